//! One-dimensional maximisation and root finding on a bracket.

/// Number of points in the initial scan that locates the bracket.
pub const GRID_POINTS: usize = 129;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Index and value of the largest of `n` equally spaced samples on `[a, b]`.
pub fn grid_argmax<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> (usize, f64) {
    let step = (b - a) / (n - 1) as f64;
    let mut best = (0, f(a));
    for i in 1..n {
        let x = if i == n - 1 { b } else { a + step * i as f64 };
        let v = f(x);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
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
    0.5 * (a + b)
}

/// Bisection for a sign change of `g` on `[a, b]`. Returns `None` when
/// `g(a)` and `g(b)` have the same strict sign.
pub fn bisect_root<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Maximise `f` on `[a, b]`: a grid scan picks the bracket, golden-section
/// search narrows it, and if `slope` (any function with the sign of `f'`) is
/// given, bisection on it finishes the job.
pub fn maximize<F, S>(f: &F, slope: Option<&S>, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let (i, _) = grid_argmax(f, a, b, GRID_POINTS);
    let step = (b - a) / (GRID_POINTS - 1) as f64;
    let lo = if i == 0 { a } else { a + step * (i - 1) as f64 };
    let hi = if i + 1 >= GRID_POINTS { b } else { a + step * (i + 1) as f64 };
    let mut x = golden_max(f, lo, hi, tol.max(1e-15));
    if let Some(s) = slope {
        if let Some(r) = bisect_root(s, lo, hi, tol.min(1e-14)) {
            let fx = f(x);
            if f(r) >= fx - 1e-12 * fx.abs() {
                x = r;
            }
        }
    }
    // the maximum may sit on an endpoint of the bracket
    for e in [a, b] {
        if f(e) > f(x) {
            x = e;
        }
    }
    (x, f(x))
}

/// Second derivative by central differences with steps `1e-3` and `5e-4`,
/// combined by Richardson extrapolation.
pub fn second_derivative<F: Fn(f64) -> f64>(f: &F, x: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let coarse = d(1e-3);
    let fine = d(5e-4);
    (4.0 * fine - coarse) / 3.0
}
