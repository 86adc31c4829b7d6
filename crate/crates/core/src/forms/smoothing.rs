//! Translate-and-mollify smoothing: `v_eps = eta_eps * u(· + tau eps e)`.
//!
//! The approximation route behind the density of smooth functions: shift the
//! function along a fixed direction (clearing the boundary, since the
//! geometry is axis-aligned any `tau > 1` works) and convolve with a smooth
//! compactly supported bump.

use std::sync::OnceLock;

use crate::domain::{Basis, GridFunction, SpaceTag};
use crate::quad::{gl_rule, integrate_adaptive};
use crate::{Error, Result};

/// The standard bump `c_d exp(-1/(1-|z|^2))` on `B_1`, unit mass.
pub fn mollifier_bump(d: usize, z: &[f64]) -> f64 {
    let r2: f64 = z.iter().map(|x| x * x).sum();
    if r2 >= 1.0 {
        return 0.0;
    }
    bump_constant(d) * (-1.0 / (1.0 - r2)).exp()
}

fn bump_constant(d: usize) -> f64 {
    static C1: OnceLock<f64> = OnceLock::new();
    static C2: OnceLock<f64> = OnceLock::new();
    let compute = |d: usize| -> f64 {
        let mut f = |r: f64| {
            let g = (-1.0 / (1.0 - r * r)).exp();
            if d == 1 {
                g
            } else {
                r * g
            }
        };
        let (v, _) = integrate_adaptive(&mut f, 0.0, 1.0, 1e-14, 1e-300, 40);
        match d {
            1 => 1.0 / (2.0 * v),
            _ => 1.0 / (std::f64::consts::TAU * v),
        }
    };
    match d {
        1 => *C1.get_or_init(|| compute(1)),
        _ => *C2.get_or_init(|| compute(2)),
    }
}

/// `v_eps(x) = ∫ eta_eps(z) u(x + tau eps dir - z) dz`, sampled on the nodes
/// of `u`'s grid. Errors when the shifted stencil needs values of `u` beyond
/// the truncation box where they are not known to vanish.
pub fn smooth_approximation(
    u: &GridFunction,
    eps: f64,
    direction: &[f64],
    tau: f64,
) -> Result<GridFunction> {
    if tau <= 1.0 {
        return Err(Error::InvalidParameter(
            "the shift factor must satisfy tau > 1 (+ Lipschitz constant, 0 here)".into(),
        ));
    }
    let d = u.domain.dimension();
    let norm: f64 = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) || direction.len() < d {
        return Err(Error::InvalidParameter("direction must be a nonzero vector".into()));
    }
    let shift: Vec<f64> = direction[..d].iter().map(|c| c / norm * tau * eps).collect();
    convolve_bump(u, eps, &shift)
}

/// Convolution with the `eps`-bump after translating by `shift`:
/// `v(x) = ∫ eta_eps(z) u(x + shift - z) dz` on the grid nodes.
pub fn convolve_bump(u: &GridFunction, eps: f64, shift: &[f64]) -> Result<GridFunction> {
    if u.basis != Basis::PiecewiseLinear {
        return Err(Error::Domain(
            "smoothing is defined for piecewise-linear functions".into(),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let dom = u.domain.clone();
    let d = dom.dimension();
    let shift_len: f64 = shift.iter().map(|c| c * c).sum::<f64>().sqrt();

    // The stencil reads u on supp(u) expanded by |shift| + eps; reject when a
    // nonzero coefficient sits within that distance of the truncation box
    // boundary, since values beyond the box are only implicitly zero.
    let reach = shift_len + eps;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for node in 0..dom.n_nodes() as u32 {
        let c = dom.node_coord(node);
        for ax in 0..d {
            lo[ax] = lo[ax].min(c[ax]);
            hi[ax] = hi[ax].max(c[ax]);
        }
    }
    for node in 0..dom.n_nodes() as u32 {
        if u.coeffs[node as usize] != 0.0 {
            let c = dom.node_coord(node);
            for ax in 0..d {
                if c[ax] - lo[ax] < reach || hi[ax] - c[ax] < reach {
                    return Err(Error::Domain(format!(
                        "mollification stencil (reach {reach:.3}) exits the truncation box"
                    )));
                }
            }
        }
    }

    let shift = {
        let mut v = [0.0; 2];
        v[..d].copy_from_slice(&shift[..d]);
        v
    };
    let mut out = GridFunction::zeros(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear);
    let rule = gl_rule(16);
    let w = dom.cell_width();

    for node in 0..dom.n_nodes() as u32 {
        let xc = dom.node_coord(node);
        let value = match d {
            1 => {
                // split the z-integral at the lattice kinks of u
                let base = xc[0] + shift[0];
                let mut knots: Vec<f64> = vec![-eps, -0.5 * eps, 0.0, 0.5 * eps, eps];
                let mut k = ((base - eps - lo[0]) / w).floor() as i64;
                loop {
                    let z = base - (lo[0] + k as f64 * w);
                    if z < -eps {
                        break;
                    }
                    if z < eps {
                        knots.push(z);
                    }
                    k += 1;
                }
                knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
                knots.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
                let mut acc = 0.0;
                for pair in knots.windows(2) {
                    acc += rule.integrate(pair[0], pair[1], |z| {
                        mollifier_bump(1, &[z / eps]) / eps * u.eval(&[base - z])
                    });
                }
                acc
            }
            _ => {
                let base = [xc[0] + shift[0], xc[1] + shift[1]];
                let big = gl_rule(16);
                let mut acc = 0.0;
                for (zn1, w1) in big.nodes.iter().zip(&big.weights) {
                    let z1 = eps * zn1;
                    for (zn2, w2) in big.nodes.iter().zip(&big.weights) {
                        let z2 = eps * zn2;
                        let eta = mollifier_bump(2, &[z1 / eps, z2 / eps]) / (eps * eps);
                        if eta == 0.0 {
                            continue;
                        }
                        acc += w1 * w2 * eta * u.eval(&[base[0] - z1, base[1] - z2]);
                    }
                }
                acc * eps * eps
            }
        };
        out.coeffs[node as usize] = value;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, DomainSpec, Geometry};
    use approx::assert_relative_eq;

    fn interval(n: usize) -> std::sync::Arc<Domain> {
        Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            n,
            r_trunc: 2.0,
            tail_tol: 1e-10,
        })
        .unwrap()
    }

    #[test]
    fn bump_has_unit_mass() {
        for d in [1usize, 2] {
            let mut f = |r: f64| {
                let z = [r, 0.0];
                let surface = if d == 1 { 2.0 } else { std::f64::consts::TAU * r };
                surface * mollifier_bump(d, &z[..d])
            };
            let (v, _) = integrate_adaptive(&mut f, 0.0, 1.0, 1e-12, 1e-300, 36);
            assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let dom = interval(32);
        // constant on a wide interior band, zero near the box edges
        let u = GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |x| {
            if x[0].abs() < 1.4 {
                1.0
            } else {
                0.0
            }
        });
        let v = smooth_approximation(&u, 0.05, &[1.0], 2.0).unwrap();
        // far from the plateau edges the convolution of 1 is 1
        assert_relative_eq!(v.eval(&[0.5]), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn smooth_function_converges_in_l2() {
        let dom = interval(256);
        let u = GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |x| {
            (-10.0 * (x[0] - 0.5).powi(2)).exp() * (x[0] * (1.0 - x[0])).max(0.0)
        });
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let v = smooth_approximation(&u, eps, &[1.0], 2.0).unwrap();
            let mut diff = v.clone();
            for (dc, uc) in diff.coeffs.iter_mut().zip(&u.coeffs) {
                *dc -= uc;
            }
            let err = diff.l2_norm_omega();
            assert!(err < prev, "eps {eps}: {err} !< {prev}");
            prev = err;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn shift_exiting_box_is_rejected() {
        let dom = interval(16);
        let u = GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |_| 1.0);
        assert!(smooth_approximation(&u, 0.3, &[1.0], 2.0).is_err());
    }
}
