//! Property tests for the structural invariants: unit mass across the
//! parameter space, kernel symmetry, and the bilinear-form algebra on random
//! coefficient vectors.

use std::sync::Arc;

use proptest::prelude::*;

use nonlocal_forms::domain::{Basis, Domain, DomainSpec, Geometry, SpaceTag};
use nonlocal_forms::forms::{eval_form_full, eval_form_inner, QuadConfig};
use nonlocal_forms::kernels::{KernelFamily, Mollifier, MollifierFamily};
use nonlocal_forms::GridFunction;

fn interval(n: usize) -> Arc<Domain> {
    Domain::build(DomainSpec {
        geometry: Geometry::Interval { a: 0.0, b: 1.0 },
        n,
        r_trunc: 2.0,
        tail_tol: 1e-10,
    })
    .unwrap()
}

fn grid_fn(dom: &Arc<Domain>, coeffs: &[f64]) -> GridFunction {
    let mut g = GridFunction::zeros(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear);
    for (c, v) in g.coeffs.iter_mut().zip(coeffs.iter().cycle()) {
        *c = *v;
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every catalog family integrates to one across its eps range.
    #[test]
    fn mollifier_unit_mass(eps in 0.02f64..1.9, pick in 0usize..4, d in 1usize..3) {
        let m = match pick {
            0 => Mollifier::power_law(d),
            1 => Mollifier::new(d, MollifierFamily::BoundedPoly { beta: 1.0 }).unwrap(),
            2 => Mollifier::new(d, MollifierFamily::ShiftedRatio { beta: 1.0, eps0: 2.0 }).unwrap(),
            _ => Mollifier::new(d, MollifierFamily::ShiftedCritical { eps0: 2.0 }).unwrap(),
        };
        prop_assume!(eps < m.eps_limit());
        let (mass, _) = m.unit_mass_quadrature(eps).unwrap();
        prop_assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    /// Kernel evaluation is symmetric in its two arguments.
    #[test]
    fn kernel_symmetry(
        alpha in 1.05f64..1.99,
        x in prop::array::uniform2(-0.9f64..0.9),
        y in prop::array::uniform2(-0.9f64..0.9),
        pick in 0usize..5,
        seed in 0u64..1000,
    ) {
        prop_assume!(x != y);
        let fam = match pick {
            0 => KernelFamily::j1(2),
            1 => KernelFamily::j2(2, 1.5).unwrap(),
            2 => KernelFamily::j4(2),
            3 => KernelFamily::nu(Mollifier::power_law(2)),
            _ => KernelFamily::perturbed(Mollifier::power_law(2), 2.0, seed).unwrap(),
        };
        let k = fam.at(alpha).unwrap();
        prop_assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
    }

    /// The discrete form is symmetric, positive and quadratically scaling.
    #[test]
    fn form_algebra_on_random_vectors(
        coeffs in prop::collection::vec(-1.0f64..1.0, 6),
        other in prop::collection::vec(-1.0f64..1.0, 6),
        alpha in 0.8f64..1.95,
    ) {
        let dom = interval(4);
        let u = grid_fn(&dom, &coeffs);
        let v = grid_fn(&dom, &other);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(alpha).unwrap();
        let cfg = QuadConfig::default();
        let uu = eval_form_inner(&k, &u, &u, &cfg).unwrap().value;
        let vv = eval_form_inner(&k, &v, &v, &cfg).unwrap().value;
        let uv = eval_form_inner(&k, &u, &v, &cfg).unwrap().value;
        let vu = eval_form_inner(&k, &v, &u, &cfg).unwrap().value;
        prop_assert_eq!(uv, vu);
        prop_assert!(uu >= 0.0 && vv >= 0.0);
        // Cauchy-Schwarz to rounding (nonnegative quadrature weights)
        prop_assert!(uv * uv <= uu * vv * (1.0 + 1e-12) + 1e-300);
        // power-of-two scaling is exact
        let mut u2 = u.clone();
        for c in u2.coeffs.iter_mut() { *c *= 2.0; }
        let r2 = eval_form_inner(&k, &u2, &u2, &cfg).unwrap().value;
        prop_assert_eq!(r2, 4.0 * uu);
    }

    /// Full-form decomposition: inner part plus twice the cross part.
    #[test]
    fn full_form_decomposition(
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
        alpha in 0.8f64..1.9,
    ) {
        let dom = interval(4);
        let u = grid_fn(&dom, &coeffs);
        let fam = KernelFamily::nu(Mollifier::power_law(1));
        let k = fam.at(alpha).unwrap();
        let cfg = QuadConfig::default();
        let full = eval_form_full(&k, &u, &u, &cfg).unwrap();
        let inner = eval_form_inner(&k, &u, &u, &cfg).unwrap();
        let defect = (full.value - (inner.value + full.cross_part)).abs();
        prop_assert!(defect <= 1e-12 * full.value.abs().max(1e-300));
        prop_assert!(full.cross_part >= 0.0);
    }
}
