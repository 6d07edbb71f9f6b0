//! Embedded explicit Runge–Kutta pairs.

/// Butcher tableau of an embedded pair with the FSAL property: the last
/// stage is evaluated at the propagated solution.
pub struct Tableau {
    pub c: &'static [f64],
    /// Strictly lower-triangular coefficients, row `i` has `i` entries.
    pub a: &'static [&'static [f64]],
    /// Propagating weights (higher order).
    pub b: &'static [f64],
    /// Embedded weights (lower order).
    pub b_hat: &'static [f64],
    /// Order of the embedded solution plus one, used in the step-size law.
    pub error_order: i32,
}

/// Bogacki–Shampine 3(2).
pub const BOGACKI_SHAMPINE: Tableau = Tableau {
    c: &[0.0, 0.5, 0.75, 1.0],
    a: &[&[], &[0.5], &[0.0, 0.75], &[2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0]],
    b: &[2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
    b_hat: &[7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125],
    error_order: 3,
};

/// Dormand–Prince 5(4).
pub const DORMAND_PRINCE: Tableau = Tableau {
    c: &[0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[0.2],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ],
    b: &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0],
    b_hat: &[
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ],
    error_order: 5,
};

/// Outcome of one trial step.
pub struct Trial {
    pub y: Vec<f64>,
    /// Weighted max-norm of the embedded error estimate.
    pub err: f64,
    /// Derivative at the new point (first stage of the next step).
    pub f_new: Vec<f64>,
}

/// Attempts one step of size `h` from `(t, y)` with `f0 = f(t, y)`.
/// Returns `Ok(None)` if a stage produced non-finite values.
pub fn try_step<E>(
    tab: &Tableau,
    f: &mut impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    t: f64,
    y: &[f64],
    f0: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<Option<Trial>, E> {
    let n = y.len();
    let s = tab.c.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    k.push(f0.to_vec());
    let mut stage = vec![0.0; n];
    for i in 1..s {
        for j in 0..n {
            let mut acc = 0.0;
            for (m, &a) in tab.a[i].iter().enumerate() {
                if a != 0.0 {
                    acc += a * k[m][j];
                }
            }
            stage[j] = y[j] + h * acc;
        }
        let mut ki = vec![0.0; n];
        f(t + tab.c[i] * h, &stage, &mut ki)?;
        if ki.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        k.push(ki);
    }
    // FSAL: the last stage abscissa is 1 and its row equals b.
    let y_new = stage;
    let mut err = 0.0_f64;
    for j in 0..n {
        let mut e = 0.0;
        for m in 0..s {
            let d = tab.b[m] - tab.b_hat[m];
            if d != 0.0 {
                e += d * k[m][j];
            }
        }
        let scale = atol + rtol * y[j].abs().max(y_new[j].abs());
        err = err.max((h * e).abs() / scale);
    }
    let f_new = k.pop().expect("at least one stage");
    Ok(Some(Trial { y: y_new, err, f_new }))
}

/// Standard step-size update `h * safety * err^(-1/order)` clamped to
/// `[0.2, 5]`.
pub fn next_step(h: f64, err: f64, order: i32) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-1.0 / order as f64)).clamp(0.2, 5.0)
    };
    h * factor
}
