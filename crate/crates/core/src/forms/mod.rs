//! Quadrature engines for the nonlocal bilinear forms, the associated
//! seminorms and norms, the limiting diffusion matrix and the local gradient
//! form, mollifier concentration integrals, and the translate-and-mollify
//! smoothing operator.

mod diffusion;
mod engine;
mod smoothing;

pub use diffusion::{diffusion_matrix, symmetric_eigenvalues, DiffusionMatrix};
pub use engine::QuadConfig;
pub(crate) use engine::{eval_pair, PairMode};
pub use smoothing::{convolve_bump, mollifier_bump, smooth_approximation};

use rayon::prelude::*;

use crate::domain::{Basis, CellPair, CellRegion, GridFunction, Region, SpaceTag};
use crate::kernels::{KernelAt, Mollifier};
use crate::{Error, Result};

/// An evaluated form value with its accuracy diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct FormReport {
    /// The form value (inner part plus twice the cross part for full forms).
    pub value: f64,
    pub quadrature_error_estimate: f64,
    /// Bound on the mass discarded beyond the complement truncation box.
    pub tail_bound: f64,
    /// Contribution of touching cell pairs (singular quadrature path).
    pub singular_part: f64,
    /// Contribution of separated cell pairs.
    pub regular_part: f64,
    /// `Omega x Omega` contribution.
    pub inner_part: f64,
    /// `2 x (Omega x Omega^c)` contribution (zero for interior forms).
    pub cross_part: f64,
}

fn check_same_domain(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if !std::sync::Arc::ptr_eq(&u.domain, &v.domain) {
        return Err(Error::Domain("u and v live on different domains".into()));
    }
    if u.basis != v.basis {
        return Err(Error::Domain("u and v use different bases".into()));
    }
    Ok(())
}

/// Deterministic chunked parallel reduction over cell pairs: chunk partial
/// sums are computed in parallel but combined in fixed chunk order, so the
/// result is bit-identical regardless of worker count.
fn sum_pairs(
    pairs: &[CellPair],
    kernel: &KernelAt<'_>,
    u: &GridFunction,
    v: &GridFunction,
    cfg: &QuadConfig,
) -> Result<(f64, f64, f64, f64)> {
    let dom = &u.domain;
    let chunks: Vec<&[CellPair]> = pairs.chunks(256).collect();
    let partials: Vec<Result<(f64, f64, f64, f64)>> = chunks
        .par_iter()
        .map(|chunk| {
            let mut value_singular = 0.0;
            let mut value_regular = 0.0;
            let mut err = 0.0;
            let mut compensation = 0.0;
            for pair in *chunk {
                let out = eval_pair(dom, pair, kernel, PairMode::Pairing { u, v }, cfg)?;
                let contrib = pair.weight * out.slots[0];
                if pair.singular {
                    value_singular += contrib;
                } else {
                    // Kahan-style compensation keeps the many small regular
                    // contributions reproducible and accurate
                    let y = contrib - compensation;
                    let t = value_regular + y;
                    compensation = (t - value_regular) - y;
                    value_regular = t;
                }
                err += pair.weight * out.error;
            }
            Ok((value_singular, value_regular, err, compensation))
        })
        .collect();
    let mut singular = 0.0;
    let mut regular = 0.0;
    let mut err = 0.0;
    for p in partials {
        let (s, r, e, _c) = p?;
        singular += s;
        regular += r;
        err += e;
    }
    Ok((singular, regular, err, 0.0))
}

/// The interior form `∬_{Omega x Omega} (u(x)-u(y))(v(x)-v(y)) J(x,y) dx dy`.
///
/// Touching cell pairs go through the graded singular quadrature (the
/// difference factor cancels the `|h|^{-2}` of the kernel, leaving the
/// integrable mollifier profile); separated pairs use Gauss panels.
pub fn eval_form_inner(
    kernel: &KernelAt<'_>,
    u: &GridFunction,
    v: &GridFunction,
    cfg: &QuadConfig,
) -> Result<FormReport> {
    check_same_domain(u, v)?;
    let dom = &u.domain;
    let pairs = dom.region_pairs(Region::OmegaOmega, kernel.support_radius());
    let (singular, regular, err, _) = sum_pairs(&pairs, kernel, u, v, cfg)?;
    Ok(FormReport {
        value: singular + regular,
        quadrature_error_estimate: err,
        tail_bound: 0.0,
        singular_part: singular,
        regular_part: regular,
        inner_part: singular + regular,
        cross_part: 0.0,
    })
}

/// The full form over `(Omega^c x Omega^c)^c`: interior part plus twice the
/// `Omega x Omega^c` part over the truncated collar.
///
/// The report's `tail_bound` bounds the discarded interactions beyond the
/// truncation box by `4 ||u||_inf ||v||_inf |Omega| sup_x ∫_{|h|>margin} J`.
pub fn eval_form_full(
    kernel: &KernelAt<'_>,
    u: &GridFunction,
    v: &GridFunction,
    cfg: &QuadConfig,
) -> Result<FormReport> {
    check_same_domain(u, v)?;
    if u.space == SpaceTag::HNuOnOmega || v.space == SpaceTag::HNuOnOmega {
        return Err(Error::Domain(
            "full-form evaluation needs functions with complement values".into(),
        ));
    }
    let dom = &u.domain;
    let pairs_in = dom.region_pairs(Region::OmegaOmega, kernel.support_radius());
    let (s_in, r_in, e_in, _) = sum_pairs(&pairs_in, kernel, u, v, cfg)?;
    let pairs_cross = dom.region_pairs(Region::OmegaComplement, kernel.support_radius());
    let (s_cr, r_cr, e_cr, _) = sum_pairs(&pairs_cross, kernel, u, v, cfg)?;

    let sup = |g: &GridFunction| g.coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let margin = dom.truncation_margin();
    let tail = kernel.tail_integral(margin).value();
    let tail_bound = 4.0 * sup(u) * sup(v) * dom.omega_measure() * tail;

    let inner = s_in + r_in;
    let cross = 2.0 * (s_cr + r_cr);
    Ok(FormReport {
        value: inner + cross,
        quadrature_error_estimate: e_in + 2.0 * e_cr,
        tail_bound,
        singular_part: s_in + 2.0 * s_cr,
        regular_part: r_in + 2.0 * r_cr,
        inner_part: inner,
        cross_part: cross,
    })
}

/// `[u]_{H_nu(Omega)} = (∬_{Omega Omega} (u(x)-u(y))^2 nu(x-y))^{1/2}`.
pub fn seminorm_h_nu(kernel: &KernelAt<'_>, u: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    Ok(eval_form_inner(kernel, u, u, cfg)?.value.max(0.0).sqrt())
}

/// `||u||_{H_nu(Omega)}^2 = ||u||_{L^2(Omega)}^2 + [u]^2`.
pub fn norm_h_nu(kernel: &KernelAt<'_>, u: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    let semi = eval_form_inner(kernel, u, u, cfg)?.value.max(0.0);
    Ok((l2_inner_omega(u, u) + semi).sqrt())
}

/// `[u]_{V_nu} = (∬_{(Omega^c x Omega^c)^c} (u(x)-u(y))^2 nu(x-y))^{1/2}`
/// over the truncated region.
pub fn seminorm_v_nu(kernel: &KernelAt<'_>, u: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    Ok(eval_form_full(kernel, u, u, cfg)?.value.max(0.0).sqrt())
}

/// Full-space norm variant: adds `||u||_{L^2}` over the truncation box
/// (the `L^2(R^d)` mass of the zero-extended function).
pub fn norm_v_nu_full(kernel: &KernelAt<'_>, u: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    let semi = eval_form_full(kernel, u, u, cfg)?.value.max(0.0);
    Ok((l2_inner_box(u, u) + semi).sqrt())
}

/// Triple-norm variant: adds `||u||_{L^2(Omega)}` only.
pub fn norm_v_nu_triple(kernel: &KernelAt<'_>, u: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    let semi = eval_form_full(kernel, u, u, cfg)?.value.max(0.0);
    Ok((l2_inner_omega(u, u) + semi).sqrt())
}

fn cell_l2(u: &GridFunction, v: &GridFunction, cell: u32) -> f64 {
    let dom = &u.domain;
    let w = dom.cell_width();
    let d = dom.dimension();
    match u.basis {
        Basis::PiecewiseConstant => {
            let (a, b) = (u.coeffs[cell as usize], v.coeffs[cell as usize]);
            a * b * w.powi(d as i32)
        }
        Basis::PiecewiseLinear => {
            let a = u.local_values(cell);
            let b = v.local_values(cell);
            match d {
                1 => w / 6.0 * (2.0 * a[0] * b[0] + a[0] * b[1] + a[1] * b[0] + 2.0 * a[1] * b[1]),
                _ => {
                    // exact 2x2 Gauss for the biquadratic integrand
                    let g = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
                    let mut acc = 0.0;
                    for &s in &g {
                        for &t in &g {
                            let sh = [
                                (1.0 - s) * (1.0 - t),
                                s * (1.0 - t),
                                s * t,
                                (1.0 - s) * t,
                            ];
                            let ua: f64 = (0..4).map(|k| a[k] * sh[k]).sum();
                            let va: f64 = (0..4).map(|k| b[k] * sh[k]).sum();
                            acc += 0.25 * ua * va;
                        }
                    }
                    acc * w * w
                }
            }
        }
    }
}

/// Exact `L^2(Omega)` inner product for the basis.
pub fn l2_inner_omega(u: &GridFunction, v: &GridFunction) -> f64 {
    u.domain
        .omega_cells()
        .iter()
        .map(|&c| cell_l2(u, v, c))
        .sum()
}

/// Exact `L^2` inner product over the whole truncation box.
pub fn l2_inner_box(u: &GridFunction, v: &GridFunction) -> f64 {
    (0..u.domain.n_cells() as u32)
        .filter(|&c| {
            !(u.vanishes_on_cell(c) && v.vanishes_on_cell(c))
                || u.domain.cell_region_of(c) == CellRegion::Omega
        })
        .map(|c| cell_l2(u, v, c))
        .sum()
}

/// The local gradient form `∫_Omega <A ∇u, ∇v> dx`, assembled exactly per cell.
pub fn eval_form_local(a: &[[f64; 2]; 2], u: &GridFunction, v: &GridFunction) -> Result<f64> {
    check_same_domain(u, v)?;
    if u.basis != Basis::PiecewiseLinear {
        return Err(Error::Domain(
            "the local gradient form needs piecewise-linear functions".into(),
        ));
    }
    let dom = &u.domain;
    let w = dom.cell_width();
    let d = dom.dimension();
    let mut acc = 0.0;
    for &cell in dom.omega_cells() {
        let uu = u.local_values(cell);
        let vv = v.local_values(cell);
        match d {
            1 => {
                let du = (uu[1] - uu[0]) / w;
                let dv = (vv[1] - vv[0]) / w;
                acc += a[0][0] * du * dv * w;
            }
            _ => {
                let g = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
                for &s in &g {
                    for &t in &g {
                        // bilinear gradients in reference coordinates
                        let dus = ((uu[1] - uu[0]) * (1.0 - t) + (uu[2] - uu[3]) * t) / w;
                        let dut = ((uu[3] - uu[0]) * (1.0 - s) + (uu[2] - uu[1]) * s) / w;
                        let dvs = ((vv[1] - vv[0]) * (1.0 - t) + (vv[2] - vv[3]) * t) / w;
                        let dvt = ((vv[3] - vv[0]) * (1.0 - s) + (vv[2] - vv[1]) * s) / w;
                        let au = [
                            a[0][0] * dus + a[0][1] * dut,
                            a[1][0] * dus + a[1][1] * dut,
                        ];
                        acc += 0.25 * (au[0] * dvs + au[1] * dvt) * w * w;
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Concentration integrals `∫_{|x| <= r_max} |x|^beta rho_eps(x) dx` along an
/// `eps` sweep. The limit is 1 for `beta = 0` and 0 for `beta > 0`.
pub fn concentration_integral(
    family: &Mollifier,
    beta: f64,
    r_max: f64,
    eps_sweep: &[f64],
) -> Result<Vec<f64>> {
    if beta < 0.0 {
        return Err(Error::InvalidParameter("beta must be nonnegative".into()));
    }
    if r_max <= 0.0 {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    eps_sweep
        .iter()
        .map(|&eps| {
            family.validate_eps(eps)?;
            family.moment_integral(eps, beta, r_max)
        })
        .collect()
}

/// Quadrature over the enumerated pairs of a region for an arbitrary bounded
/// integrand (decomposition-identity checks); symmetric integrands only for
/// `OmegaComplement` (the mirrored region is accounted by the factor 2).
pub fn integrate_pairs_generic(
    dom: &crate::domain::Domain,
    region: Region,
    f: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    order: usize,
) -> f64 {
    let d = dom.dimension();
    let w = dom.cell_width();
    let rule = crate::quad::gl_rule(order);
    let pair_value = |p: &CellPair| -> f64 {
        let ao = dom.cell_origin(p.a);
        let bo = dom.cell_origin(p.b);
        let mut acc = 0.0;
        match d {
            1 => {
                for (xn, xw) in rule.nodes.iter().zip(&rule.weights) {
                    let x = [ao[0] + 0.5 * w * (1.0 + xn)];
                    for (yn, yw) in rule.nodes.iter().zip(&rule.weights) {
                        let y = [bo[0] + 0.5 * w * (1.0 + yn)];
                        acc += xw * yw * f(&x, &y);
                    }
                }
                acc * (0.5 * w).powi(2)
            }
            _ => {
                for (x1, w1) in rule.nodes.iter().zip(&rule.weights) {
                    for (x2, w2) in rule.nodes.iter().zip(&rule.weights) {
                        let x = [ao[0] + 0.5 * w * (1.0 + x1), ao[1] + 0.5 * w * (1.0 + x2)];
                        for (y1, w3) in rule.nodes.iter().zip(&rule.weights) {
                            for (y2, w4) in rule.nodes.iter().zip(&rule.weights) {
                                let y =
                                    [bo[0] + 0.5 * w * (1.0 + y1), bo[1] + 0.5 * w * (1.0 + y2)];
                                acc += w1 * w2 * w3 * w4 * f(&x, &y);
                            }
                        }
                    }
                }
                acc * (0.5 * w).powi(4)
            }
        }
    };
    // parallel evaluation, deterministic sequential combination
    let pairs = dom.region_pairs(region, f64::INFINITY);
    let values: Vec<f64> = pairs.par_iter().map(|p| p.weight * pair_value(p)).collect();
    values.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, DomainSpec, Geometry};
    use crate::kernels::{KernelFamily, Mollifier, MollifierFamily};
    use crate::quad::integrate_rect_adaptive;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn interval(n: usize, r: f64) -> Arc<Domain> {
        Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            n,
            r_trunc: r,
            tail_tol: 1e-10,
        })
        .unwrap()
    }

    fn square(n: usize) -> Arc<Domain> {
        Domain::build(DomainSpec {
            geometry: Geometry::Rect {
                x: [0.0, 1.0],
                y: [0.0, 1.0],
            },
            n,
            r_trunc: 2.0,
            tail_tol: 1e-10,
        })
        .unwrap()
    }

    fn sample_full(dom: &Arc<Domain>, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, f)
    }

    #[test]
    fn linear_energy_matches_closed_form_across_alpha() {
        // Omega = (0,1), u(x) = x, J = nu_alpha (power-law base):
        // E = (2-alpha) ∫_0^1 h^{1-alpha} (1-h) dh = 1/(3-alpha).
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let cfg = QuadConfig::default();
        for n in [4usize, 16] {
            let dom = interval(n, 2.0);
            let u = sample_full(&dom, |x| x[0]);
            for alpha in [0.5, 1.5, 1.9, 1.99, 1.999] {
                let k = fam.at(alpha).unwrap();
                let r = eval_form_inner(&k, &u, &u, &cfg).unwrap();
                let exact = 1.0 / (3.0 - alpha);
                assert_relative_eq!(r.value, exact, max_relative = 1e-8);
                assert!(r.quadrature_error_estimate < 1e-6 * exact);
            }
        }
    }

    #[test]
    fn constants_have_zero_energy() {
        let dom = interval(8, 2.0);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(1.5).unwrap();
        let c = sample_full(&dom, |_| 3.25);
        let r = eval_form_full(&k, &c, &c, &QuadConfig::default()).unwrap();
        // anchored basis deltas cancel to rounding for constants
        assert!(r.value.abs() < 1e-20, "constant energy {}", r.value);
    }

    #[test]
    fn form_is_exactly_symmetric_and_scales_quadratically() {
        let dom = interval(8, 2.0);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(1.5).unwrap();
        let cfg = QuadConfig::default();
        let u = sample_full(&dom, |x| (3.0 * x[0]).sin());
        let v = sample_full(&dom, |x| x[0] * x[0] - 0.3);
        let uv = eval_form_inner(&k, &u, &v, &cfg).unwrap().value;
        let vu = eval_form_inner(&k, &v, &u, &cfg).unwrap().value;
        assert_eq!(uv, vu);
        // power-of-two scaling is exact in floating point
        let mut u2 = u.clone();
        for c in u2.coeffs.iter_mut() {
            *c *= 2.0;
        }
        let r2 = eval_form_inner(&k, &u2, &u2, &cfg).unwrap().value;
        let r1 = eval_form_inner(&k, &u, &u, &cfg).unwrap().value;
        assert_eq!(r2, 4.0 * r1);
    }

    #[test]
    fn full_form_decomposes_into_inner_plus_twice_cross() {
        let dom = interval(8, 2.0);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(1.2).unwrap();
        let cfg = QuadConfig::default();
        let u = sample_full(&dom, |x| (-x[0] * x[0]).exp());
        let full = eval_form_full(&k, &u, &u, &cfg).unwrap();
        let inner = eval_form_inner(&k, &u, &u, &cfg).unwrap();
        assert_relative_eq!(full.inner_part, inner.value, max_relative = 1e-13);
        assert_relative_eq!(
            full.value,
            full.inner_part + full.cross_part,
            max_relative = 1e-13
        );
        assert!(full.value >= inner.value);
    }

    #[test]
    fn zero_collar_cross_term_is_a_weighted_mass() {
        // u = v = 0 on the complement: the cross part equals
        // 2 ∬_{Omega x Omega^c} u(x) v(x) J(x-y) dy dx.
        let dom = interval(16, 2.0);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let alpha = 0.9;
        let k = fam.at(alpha).unwrap();
        let cfg = QuadConfig::default();
        let u = GridFunction::sample(
            dom.clone(),
            SpaceTag::VNuZeroComplement,
            Basis::PiecewiseLinear,
            |x| (std::f64::consts::PI * x[0]).sin(),
        );
        let full = eval_form_full(&k, &u, &u, &cfg).unwrap();
        // independent oracle: weighted-mass integral with the collar potential
        // w(x) = ∫_{y notin (0,1)} nu(x-y) dy, nu supported in B_1
        let nu = crate::kernels::NuAlpha::new(Mollifier::power_law(1), alpha).unwrap();
        let mut f = |x: f64| {
            let left = {
                // ∫_{-1}^{0} nu(x-y) dy = ∫_{x}^{x+1}... clip to support
                let mut g = |y: f64| nu.radial((x - y).abs());
                let (v, _) = crate::quad::integrate_adaptive(&mut g, x - 1.0, 0.0, 1e-11, 1e-300, 30);
                if x < 1.0 {
                    v
                } else {
                    0.0
                }
            };
            let right = {
                let mut g = |y: f64| nu.radial((y - x).abs());
                let (v, _) = crate::quad::integrate_adaptive(&mut g, 1.0, x + 1.0, 1e-11, 1e-300, 30);
                v
            };
            u.eval(&[x]).powi(2) * (left + right)
        };
        let mut acc = 0.0;
        // integrate over Omega split at the grid knots (u is piecewise linear)
        for k_cell in 0..16 {
            let (a, b) = (k_cell as f64 / 16.0, (k_cell + 1) as f64 / 16.0);
            let (v, _) = crate::quad::integrate_adaptive(&mut f, a, b, 1e-10, 1e-300, 24);
            acc += v;
        }
        assert_relative_eq!(full.cross_part, 2.0 * acc, max_relative = 1e-6);
    }

    #[test]
    fn two_dimensional_linear_energy_matches_overlap_oracle() {
        // u = x1 + x2 on the unit square:
        // E = ∬ (h1+h2)^2 nu(|h|) (1-|h1|)(1-|h2|) dh
        //   = ∫_0^supp r rho(r) * 4 (pi/2 - 2r + r^2/2) dr      (supp <= 1)
        // because the quadrant sum of (±cos ± sin)^2 is the constant 4.
        let dom = square(4);
        let cfg = QuadConfig::default();
        let u = sample_full(&dom, |x| x[0] + x[1]);
        for (base, alpha) in [
            (
                Mollifier::new(2, MollifierFamily::BoundedPoly { beta: 2.0 }).unwrap(),
                1.5,
            ),
            (Mollifier::power_law(2), 0.5),
            (Mollifier::power_law(2), 1.5),
            (Mollifier::power_law(2), 1.9),
        ] {
            let fam = KernelFamily::nu(base.clone());
            let k = fam.at(alpha).unwrap();
            let got = eval_form_inner(&k, &u, &u, &cfg).unwrap().value;
            let eps = 2.0 - alpha;
            let mut f = |r: f64| {
                4.0 * r
                    * base.rho_radial(eps, r)
                    * (std::f64::consts::FRAC_PI_2 - 2.0 * r + 0.5 * r * r)
            };
            let snap = [base.gamma(eps) + 1.0];
            let (oracle, _) = crate::quad::integrate_radial(
                &mut f,
                &base.breakpoints(eps),
                base.support_radius(eps),
                &snap,
            )
            .unwrap();
            assert_relative_eq!(got, oracle, max_relative = 2e-7);
        }
    }

    #[test]
    fn local_form_closed_forms() {
        let dom = interval(8, 2.0);
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        let u = sample_full(&dom, |x| x[0]);
        assert_relative_eq!(eval_form_local(&eye, &u, &u).unwrap(), 1.0, max_relative = 1e-13);
        let two = [[2.0, 0.0], [0.0, 2.0]];
        assert_relative_eq!(eval_form_local(&two, &u, &u).unwrap(), 2.0, max_relative = 1e-13);
        let dom2 = square(4);
        let v = sample_full(&dom2, |x| x[0] + x[1]);
        assert_relative_eq!(eval_form_local(&eye, &v, &v).unwrap(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn concentration_power_law_closed_form() {
        // ∫_{|x|<=1} |x|^beta rho_eps = eps/(beta+eps)
        let m = Mollifier::power_law(1);
        for beta in [0.5, 1.0, 2.0] {
            let vals = concentration_integral(&m, beta, 1.0, &[0.1, 0.01]).unwrap();
            for (v, eps) in vals.iter().zip([0.1, 0.01]) {
                assert_relative_eq!(*v, eps / (beta + eps), epsilon = 1e-10);
            }
        }
        let unit = concentration_integral(&m, 0.0, 1.0, &[0.1, 0.01]).unwrap();
        for v in unit {
            assert_relative_eq!(v, 1.0, epsilon = 1e-11);
        }
        // 2D as well: the closed form is dimension-free
        let m2 = Mollifier::power_law(2);
        let vals = concentration_integral(&m2, 2.0, 1.0, &[0.01]).unwrap();
        assert_relative_eq!(vals[0], 0.01 / 2.01, epsilon = 1e-10);
    }

    #[test]
    fn l2_inner_products_are_exact() {
        let dom = interval(16, 2.0);
        let u = sample_full(&dom, |x| x[0]);
        // ∫_0^1 x^2 = 1/3 exactly for the interpolant? piecewise-linear
        // interpolation of x is exact, so yes.
        assert_relative_eq!(l2_inner_omega(&u, &u), 1.0 / 3.0, max_relative = 1e-14);
        let one = sample_full(&dom, |_| 1.0);
        assert_relative_eq!(l2_inner_box(&one, &one), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn v_norm_variants_order_and_coincide_on_zero_complement() {
        let dom = interval(8, 2.0);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(1.2).unwrap();
        let cfg = QuadConfig::default();
        // generic function with complement values: triple norm <= full norm
        let u = sample_full(&dom, |x| (2.0 * x[0]).cos());
        let full = norm_v_nu_full(&k, &u, &cfg).unwrap();
        let triple = norm_v_nu_triple(&k, &u, &cfg).unwrap();
        assert!(triple <= full);
        // zero-complement function: the L2 masses agree, so both norms do
        let v = GridFunction::sample(
            dom.clone(),
            SpaceTag::VNuZeroComplement,
            Basis::PiecewiseLinear,
            |x| (x[0] * (1.0 - x[0])).max(0.0),
        );
        let full_v = norm_v_nu_full(&k, &v, &cfg).unwrap();
        let triple_v = norm_v_nu_triple(&k, &v, &cfg).unwrap();
        assert_relative_eq!(full_v, triple_v, max_relative = 1e-13);
        // and the triple norm squares to L2(Omega) mass plus the seminorm
        let semi = seminorm_v_nu(&k, &v, &cfg).unwrap();
        assert_relative_eq!(
            triple_v * triple_v,
            l2_inner_omega(&v, &v) + semi * semi,
            max_relative = 1e-12
        );
    }

    #[test]
    fn tight_truncation_is_accepted_and_reported() {
        // a margin smaller than the kernel range is allowed at build time;
        // the discarded interaction shows up in the report's tail bound
        let dom = Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            n: 20,
            r_trunc: 1.05,
            tail_tol: 1e-12,
        })
        .unwrap();
        assert!(dom.truncation_margin() < 0.1);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(1.5).unwrap();
        let u = GridFunction::sample(
            dom.clone(),
            SpaceTag::VNuZeroComplement,
            Basis::PiecewiseLinear,
            |x| (std::f64::consts::PI * x[0]).sin(),
        );
        let report = eval_form_full(&k, &u, &u, &QuadConfig::default()).unwrap();
        assert!(
            report.tail_bound > dom.tail_tol(),
            "tight truncation must be visible in the report ({:e})",
            report.tail_bound
        );
        // a comfortable margin drives the bound to zero for compact kernels
        let wide = interval(8, 2.0);
        let v = GridFunction::sample(
            wide,
            SpaceTag::VNuZeroComplement,
            Basis::PiecewiseLinear,
            |x| (std::f64::consts::PI * x[0]).sin(),
        );
        let r2 = eval_form_full(&k, &v, &v, &QuadConfig::default()).unwrap();
        assert_eq!(r2.tail_bound, 0.0);
    }

    #[test]
    fn bounded_kernel_controls_rough_functions() {
        // bounded nu: H_nu(Omega) = L^2(Omega) as sets; even a sawtooth has
        // finite seminorm under the bounded kernel
        let dom = interval(16, 2.0);
        let fam = KernelFamily::nu(
            Mollifier::new(1, MollifierFamily::BoundedPoly { beta: 2.0 }).unwrap(),
        );
        let k = fam.at(1.5).unwrap();
        let mut saw = sample_full(&dom, |_| 0.0);
        for (i, c) in saw.coeffs.iter_mut().enumerate() {
            *c = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let n = norm_h_nu(&k, &saw, &QuadConfig::default()).unwrap();
        assert!(n.is_finite());
    }

    #[test]
    fn restricted_interval_energy_matches_scaled_closed_form() {
        // on a sub-interval of length L where u(x) = x exactly:
        // E = L^{3-alpha} / (3 - alpha)
        let dom = Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.25, b: 0.75 },
            n: 8,
            r_trunc: 2.0,
            tail_tol: 1e-10,
        })
        .unwrap();
        let u = sample_full(&dom, |x| x[0]);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let cfg = QuadConfig::default();
        for alpha in [1.5, 1.9] {
            let value = eval_form_inner(&fam.at(alpha).unwrap(), &u, &u, &cfg)
                .unwrap()
                .value;
            let expected = 0.5f64.powf(3.0 - alpha) / (3.0 - alpha);
            assert_relative_eq!(value, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn pairwise_region_quadrature_matches_direct_region_integral() {
        // decomposition identity for a bounded symmetric integrand
        let dom = interval(4, 2.0);
        let f = |x: &[f64], y: &[f64]| (-(x[0] - y[0]).powi(2)).exp() + x[0] * y[0];
        let inner = integrate_pairs_generic(&dom, Region::OmegaOmega, &f, 12);
        let cross = integrate_pairs_generic(&dom, Region::OmegaComplement, &f, 12);
        // direct: ∬_{B x B} - ∬_{C x C} with B the truncation box, C the collar
        let mut box_int = 0.0;
        let mut collar_int = 0.0;
        let rule = crate::quad::gl_rule(24);
        let omega_part = |lo: f64, hi: f64, other_lo: f64, other_hi: f64| -> f64 {
            rule.integrate(lo, hi, |x| {
                rule.integrate(other_lo, other_hi, |y| f(&[x], &[y]))
            })
        };
        box_int += omega_part(-2.0, 2.0, -2.0, 2.0);
        // collar x collar = box x box minus the parts involving Omega
        let oo = omega_part(0.0, 1.0, 0.0, 1.0);
        let oc = omega_part(0.0, 1.0, -2.0, 0.0) + omega_part(0.0, 1.0, 1.0, 2.0);
        collar_int = box_int - oo - 2.0 * oc;
        let direct = box_int - collar_int;
        assert_relative_eq!(inner + 2.0 * cross, direct, max_relative = 1e-10);
    }
}
