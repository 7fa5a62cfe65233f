//! Quadrature helpers shared by the loss and power integrals.

const G3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const G3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// ∫ₐᵇ f with 3-point Gauss on every cell of a uniform grid of spacing `step`
/// anchored at 0. Partial cells at both ends are integrated over their covered
/// part only, so piecewise-smooth integrands with kinks on grid nodes stay exact
/// to the rule's order.
pub(crate) fn gauss_cells<F: FnMut(f64) -> f64>(step: f64, a: f64, b: f64, mut f: F) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut lo = a;
    let mut k = (a / step).floor() + 1.0;
    while lo < b {
        let hi = (k * step).min(b);
        if hi > lo {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let mut cell = 0.0;
            for (x, w) in G3_X.iter().zip(G3_W) {
                cell += w * f(mid + half * x);
            }
            sum += cell * half;
        }
        lo = hi;
        k += 1.0;
    }
    sum
}

/// Composite Simpson on uniformly spaced samples; `y.len()` must be odd and ≥ 3.
pub(crate) fn simpson(y: &[f64], h: f64) -> f64 {
    debug_assert!(y.len() >= 3 && y.len() % 2 == 1);
    let n = y.len() - 1;
    let mut s = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_cells_exact_for_quintics_and_partial_cells() {
        let f = |x: f64| 3.0 * x.powi(5) - x * x + 2.0;
        let exact = |x: f64| 0.5 * x.powi(6) - x.powi(3) / 3.0 + 2.0 * x;
        let v = gauss_cells(0.1, 0.033, 0.987, f);
        assert!((v - (exact(0.987) - exact(0.033))).abs() < 1e-14);
        assert_eq!(gauss_cells(0.1, 0.5, 0.5, f), 0.0);
        assert_eq!(gauss_cells(0.1, 0.6, 0.5, f), 0.0);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let h = 0.25;
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&y, h) - 2f64.powi(4) / 4.0).abs() < 1e-14);
    }
}
