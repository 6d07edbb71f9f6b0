use super::{BinOp, DiffError, Func, Node, Var};

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn is_num(n: &Node, v: f64) -> bool {
    matches!(n, Node::Num(x) if *x == v)
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        (Node::Num(x), Node::Num(y)) => num(x + y),
        _ => Node::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        (Node::Num(x), Node::Num(y)) => num(x - y),
        _ => Node::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        (Node::Num(x), Node::Num(y)) => num(x * y),
        _ => Node::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    if is_num(&a, 0.0) {
        return num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Node::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(x) => num(-x),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn pow(a: Node, b: Node) -> Node {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return num(1.0);
    }
    Node::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

pub(super) fn differentiate(n: &Node, var: Var) -> Result<Node, DiffError> {
    if !n.vars().contains(var) {
        return Ok(num(0.0));
    }
    let kink = |construct| DiffError {
        construct,
        var: var.name(),
    };
    Ok(match n {
        Node::Num(_) => num(0.0),
        Node::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(differentiate(a, var)?),
        Node::Bin(op, a, b) => {
            let (fa, fb) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(differentiate(a, var)?, differentiate(b, var)?),
                BinOp::Sub => sub(differentiate(a, var)?, differentiate(b, var)?),
                BinOp::Mul => add(
                    mul(differentiate(a, var)?, fb),
                    mul(fa, differentiate(b, var)?),
                ),
                BinOp::Div => div(
                    sub(
                        mul(differentiate(a, var)?, fb.clone()),
                        mul(fa, differentiate(b, var)?),
                    ),
                    pow(fb, num(2.0)),
                ),
                BinOp::Pow => {
                    let base_dep = a.vars().contains(var);
                    let exp_dep = b.vars().contains(var);
                    match (base_dep, exp_dep) {
                        // g * f^(g-1) * f'
                        (true, false) => {
                            let lowered = match &fb {
                                Node::Num(g) => num(g - 1.0),
                                _ => sub(fb.clone(), num(1.0)),
                            };
                            mul(mul(fb, pow(fa, lowered)), differentiate(a, var)?)
                        }
                        // f^g * ln(f) * g'
                        (false, true) => mul(
                            mul(n.clone(), call(Func::Ln, fa)),
                            differentiate(b, var)?,
                        ),
                        // f^g * (g' ln f + g f'/f)
                        _ => mul(
                            n.clone(),
                            add(
                                mul(differentiate(b, var)?, call(Func::Ln, fa.clone())),
                                div(mul(fb, differentiate(a, var)?), fa),
                            ),
                        ),
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let inner = (**a).clone();
            let da = differentiate(a, var)?;
            let outer = match f {
                Func::Exp => n.clone(),
                Func::Ln => div(num(1.0), inner),
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Sqrt => div(num(0.5), n.clone()),
                Func::Abs => return Err(kink("abs")),
            };
            mul(outer, da)
        }
        Node::Min(..) => return Err(kink("min")),
        Node::Max(..) => return Err(kink("max")),
        Node::Piecewise { .. } => return Err(kink("piecewise")),
    })
}
