//! Dimensional constants and the fractional-Laplacian normalization.

use statrs::function::gamma::ln_gamma;

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
///
/// `omega_{d-1} = 2 pi^{d/2} / Gamma(d/2)`; in particular 2 for d = 1
/// (counting measure on two points) and `2 pi` for d = 2.
pub fn sphere_area(d: usize) -> f64 {
    let d = d as f64;
    2.0 * (0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d)).exp()
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

/// Normalization constant of the fractional Laplacian of order `alpha/2`.
///
/// Standard closed form, with the symbol convention `|xi|^alpha`:
///
/// ```text
/// C(d, alpha) = alpha · 2^{alpha-1} · Gamma((d+alpha)/2) / (pi^{d/2} · Gamma(1 - alpha/2))
/// ```
///
/// Asymptotically `C(d, alpha) ~ 2 d (2-alpha) / omega_{d-1}` as `alpha -> 2^-`
/// and `C(d, alpha) ~ alpha / omega_{d-1}` as `alpha -> 0^+`, so
/// `C(d, alpha) ≍ alpha (2-alpha)`.
pub fn frac_laplace_constant(d: usize, alpha: f64) -> f64 {
    assert!(
        alpha > 0.0 && alpha < 2.0,
        "alpha must be in (0,2), got {alpha}"
    );
    let df = d as f64;
    let ln = alpha.ln() + (alpha - 1.0) * 2f64.ln() + ln_gamma(0.5 * (df + alpha))
        - 0.5 * df * std::f64::consts::PI.ln()
        - ln_gamma(1.0 - 0.5 * alpha);
    ln.exp()
}

/// The normalization-limit ratio `C(d, alpha) · omega_{d-1} / (2 d (2-alpha))`.
///
/// Tends to 1 as `alpha -> 2^-`; this is the quantity that makes the
/// second-moment matrix of `(C/2)|h|^{-d-alpha}` converge to the identity.
pub fn normalization_ratio(d: usize, alpha: f64) -> f64 {
    frac_laplace_constant(d, alpha) * sphere_area(d) / (2.0 * d as f64 * (2.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn constant_matches_direct_integral_definition() {
        // C(d, alpha)^{-1} = ∫_{R^d} (1 - cos z_1) |z|^{-d-alpha} dz, d = 1.
        // Small z by the leading term, the smooth region by octave panels,
        // the oscillatory region by panels short enough to resolve cos, and
        // the far tail by ∫ z^{-1-alpha} (the cos part is O(Z^{-1-alpha})).
        for &alpha in &[0.5, 1.0, 1.5, 1.9] {
            let f = |z: f64| 2.0 * (0.5 * z).sin().powi(2) * z.powf(-1.0 - alpha);
            let z0: f64 = 1e-8;
            let mut acc = 0.5 * z0.powf(2.0 - alpha) / (2.0 - alpha);
            let mut a = z0;
            while a < 1.0 {
                let b = (2.0 * a).min(1.0);
                acc += crate::quad::gauss_legendre(f, a, b, 24);
                a = b;
            }
            let z_max = 1e4;
            while a < z_max {
                let b = (a + 1.5).min(z_max);
                acc += crate::quad::gauss_legendre(f, a, b, 12);
                a = b;
            }
            acc += z_max.powf(-alpha) / alpha;
            let inv = 2.0 * acc; // symmetric in z
            assert_relative_eq!(frac_laplace_constant(1, alpha), 1.0 / inv, max_relative = 1e-5);
        }
    }

    #[test]
    fn normalization_ratio_tends_to_one() {
        for d in [1, 2] {
            let mut prev_gap = f64::INFINITY;
            for &alpha in &[1.5, 1.9, 1.99, 1.999] {
                let gap = (normalization_ratio(d, alpha) - 1.0).abs();
                assert!(gap < prev_gap, "ratio gap not shrinking at alpha={alpha}");
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-2);
        }
    }
}
