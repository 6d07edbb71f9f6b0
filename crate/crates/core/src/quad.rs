//! Quadrature: fixed rules on nodal data, adaptive Gauss–Kronrod on
//! functions, and improper integrals on `[a, ∞)` by horizon doubling.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Composite trapezoid weights for `n` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Composite Simpson on `[a, b]` with `panels` (rounded up to even)
/// subintervals.
pub fn simpson<E>(mut f: impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64, panels: usize) -> Result<f64, E> {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * r, ((kronrod - gauss) * r).abs()))
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Cap on the number of subintervals per breakpoint-delimited piece.
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 400,
        }
    }
}

/// Adaptive Gauss–Kronrod 7/15 on `[a, b]`, split at the given breakpoints.
///
/// Each piece is refined globally: the subinterval with the largest error
/// estimate is bisected until the summed estimate meets
/// `max(abs, rel·|value|)` or the interval cap is reached, so integrands
/// with rounding noise above the tolerance cost a bounded amount of work.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64, E> {
    if b <= a {
        return Ok(0.0);
    }
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = cuts.len() - 1;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let piece_tol = Tolerance {
            abs: tol.abs / pieces as f64,
            ..tol
        };
        total += adapt(&mut f, w[0], w[1], piece_tol)?;
    }
    Ok(total)
}

struct Segment {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn adapt<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64, tol: Tolerance) -> Result<f64, E> {
    let (val, err) = gk15(f, a, b)?;
    if !val.is_finite() {
        return Ok(val);
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, val, err });
    let (mut total, mut total_err) = (val, err);
    let mut settled = 0.0;
    let mut count = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) && count < tol.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            settled += worst.val;
            continue;
        }
        let (v1, e1) = gk15(f, worst.a, m)?;
        let (v2, e2) = gk15(f, m, worst.b)?;
        if !(v1 + v2).is_finite() {
            return Ok(v1 + v2);
        }
        total += v1 + v2 - worst.val;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: m, val: v1, err: e1 });
        heap.push(Segment { a: m, b: worst.b, val: v2, err: e2 });
        count += 1;
    }
    Ok(heap.iter().map(|s| s.val).sum::<f64>() + settled)
}

/// How an integral over an unbounded interval was settled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailStatus {
    /// The last doubling increments fell below the absolute threshold.
    Converged,
    /// Increments decay geometrically; the value includes the geometric tail.
    Extrapolated,
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImproperIntegral {
    /// `+∞` when divergent.
    pub value: f64,
    /// Largest horizon integrated to.
    pub horizon: f64,
    pub status: TailStatus,
}

impl ImproperIntegral {
    pub fn is_finite(&self) -> bool {
        self.status != TailStatus::Divergent
    }
}

/// Settings for [`improper`]. The divergence factor test only engages past
/// `divergence_horizon`.
#[derive(Clone, Copy, Debug)]
pub struct DoublingRule {
    pub increment_tol: f64,
    /// Floor on the value scale the increment is compared against; `0`
    /// makes the test purely relative.
    pub scale_floor: f64,
    pub divergence_factor: f64,
    pub divergence_horizon: f64,
    pub extrapolation_horizon: f64,
    pub decay_ratio: f64,
    pub max_horizon: f64,
}

impl DoublingRule {
    /// Purely relative convergence, for tails that are small in absolute
    /// terms.
    pub fn relative() -> Self {
        DoublingRule {
            scale_floor: 0.0,
            ..DoublingRule::default()
        }
    }
}

impl Default for DoublingRule {
    fn default() -> Self {
        DoublingRule {
            increment_tol: 1e-10,
            scale_floor: 1.0,
            divergence_factor: 1.5,
            divergence_horizon: (1u64 << 20) as f64,
            extrapolation_horizon: 1024.0,
            decay_ratio: 0.95,
            max_horizon: 2f64.powi(62),
        }
    }
}

/// `∫_a^∞ f` by integrating to `a + horizon` and then doubling the horizon.
///
/// Converged when two consecutive increments are below `increment_tol`
/// times `max(|value|, scale_floor)`;
/// divergent when the value is non-finite, or (past `divergence_horizon`)
/// when one doubling multiplies the value by at least `divergence_factor`
/// or three consecutive increments fail to decrease. Past
/// `extrapolation_horizon · max(1, |a|)`, three consecutive increment ratios below
/// `decay_ratio` settle the value with the geometric tail.
pub fn improper<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    breakpoints: impl Fn(f64, f64) -> Vec<f64>,
    a: f64,
    horizon: f64,
    rule: DoublingRule,
) -> Result<ImproperIntegral, E> {
    let tol = Tolerance::default();
    let mut h = horizon.max(1e-3);
    let mut value = integrate(&mut f, a, a + h, &breakpoints(a, a + h), tol)?;
    let mut increments: Vec<f64> = Vec::new();
    let mut small = 0;
    loop {
        if !value.is_finite() {
            return Ok(ImproperIntegral {
                value: f64::INFINITY,
                horizon: h,
                status: TailStatus::Divergent,
            });
        }
        let (lo, hi) = (a + h, a + 2.0 * h);
        let inc = integrate(&mut f, lo, hi, &breakpoints(lo, hi), tol)?;
        let previous = value;
        value += inc;
        h *= 2.0;
        if !value.is_finite() {
            continue;
        }
        increments.push(inc);

        if inc.abs() <= rule.increment_tol * value.abs().max(rule.scale_floor) {
            small += 1;
            if small >= 2 {
                return Ok(ImproperIntegral {
                    value,
                    horizon: h,
                    status: TailStatus::Converged,
                });
            }
            continue;
        }
        small = 0;

        let ratios: Vec<f64> = increments
            .windows(2)
            .rev()
            .take(3)
            .map(|w| if w[0] != 0.0 { w[1] / w[0] } else { f64::INFINITY })
            .collect();
        let last3 = ratios.len() == 3;

        if h >= rule.divergence_horizon {
            let grew = previous > 0.0 && value / previous >= rule.divergence_factor;
            let nondecreasing = last3 && ratios.iter().all(|&r| r >= 1.0);
            if grew || nondecreasing {
                return Ok(ImproperIntegral {
                    value: f64::INFINITY,
                    horizon: h,
                    status: TailStatus::Divergent,
                });
            }
        }
        let geometric = last3 && ratios.iter().all(|&r| r > 0.0 && r <= rule.decay_ratio);
        if (h >= rule.extrapolation_horizon * a.abs().max(1.0) && geometric) || h >= rule.max_horizon {
            let r = ratios.first().copied().unwrap_or(0.0);
            if !(r < 1.0) {
                return Ok(ImproperIntegral {
                    value: f64::INFINITY,
                    horizon: h,
                    status: TailStatus::Divergent,
                });
            }
            let tail = if r > 0.0 { inc * r / (1.0 - r) } else { 0.0 };
            return Ok(ImproperIntegral {
                value: value + tail,
                horizon: h,
                status: TailStatus::Extrapolated,
            });
        }
    }
}

/// `t ↦ ∫_0^t f` with cached partial integrals on an expanding knot set
/// (unit spacing, then geometric), so repeated queries at growing `t` stay
/// cheap.
pub struct Cumulative<F> {
    f: F,
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl<E, F: FnMut(f64) -> Result<f64, E>> Cumulative<F> {
    pub fn new(f: F) -> Self {
        Cumulative {
            f,
            knots: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn at(&mut self, t: f64) -> Result<f64, E> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        while *self.knots.last().expect("knots start at 0") < t {
            let a = *self.knots.last().expect("knots start at 0");
            let b = (a + 1.0).max(a * 1.125);
            let v = *self.values.last().expect("values start at 0") + integrate(&mut self.f, a, b, &[], Tolerance::default())?;
            self.knots.push(b);
            self.values.push(v);
            if !v.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let base = self.values[i];
        if !base.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(base + integrate(&mut self.f, self.knots[i], t, &[], Tolerance::default())?)
    }
}
