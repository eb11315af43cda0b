//! Scalar root finding and bracketing used by the solvers.

/// Bisection on a bracket with `f(a)` and `f(b)` of opposite sign (or one of
/// them zero). Runs until the bracket stops shrinking in floating point and
/// returns whichever end has the smaller residual.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "bisect needs a sign change");
    let mut best = if fa.abs() < fb.abs() {
        (a, fa.abs())
    } else {
        (b, fb.abs())
    };
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.abs() < best.1 {
            best = (m, fm.abs());
        }
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    best.0
}

/// Sub-intervals of a uniform `points`-node grid on `[lo, hi]` across which
/// `f > 0` flips.
pub(crate) fn sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    let step = (hi - lo) / (points - 1) as f64;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev_pos = f(lo) > 0.0;
    for i in 1..points {
        let x = if i == points - 1 { hi } else { lo + step * i as f64 };
        let pos = f(x) > 0.0;
        if pos != prev_pos {
            out.push((prev_x, x));
        }
        prev_x = x;
        prev_pos = pos;
    }
    out
}

/// Smallest `lo + 2^k` (capped at `cap`) at which `done` holds.
pub(crate) fn expand_until(lo: f64, cap: f64, done: impl Fn(f64) -> bool) -> f64 {
    let mut width = 1.0;
    loop {
        let x = (lo + width).min(cap);
        if done(x) || x >= cap {
            return x;
        }
        width *= 2.0;
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal `f` on `[a, b]`; returns the
/// final bracket.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    (a, b)
}
