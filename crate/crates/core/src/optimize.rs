//! One-dimensional bounded minimisation: a coarse grid to find the right
//! basin, then golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > x_tol {
        if fc < fd {
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
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid search over `n` points in `[lo, hi]` followed by golden-section
/// refinement inside the best cell's neighbours.
pub fn minimize_bounded<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, x_tol: f64) -> (f64, f64) {
    let n = n.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let (best, _) = (0..n)
        .map(|i| (i, f(lo + step * i as f64)))
        .filter(|(_, v)| v.is_finite())
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    golden_section(f, a, b, x_tol)
}
