//! Acceptance suite: one test per shipped guarantee, each printing a
//! pass/fail line with the measured values.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use nonlocal_forms::constants::normalization_ratio;
use nonlocal_forms::domain::{Basis, Domain, DomainSpec, Geometry, SpaceTag};
use nonlocal_forms::forms::{
    self, diffusion_matrix, eval_form_full, eval_form_inner, eval_form_local,
    smooth_approximation, QuadConfig,
};
use nonlocal_forms::kernels::{kappa0, KernelFamily, Mollifier};
use nonlocal_forms::mosco::{
    assemble, mosco_sweep, solve_resolvent, FormSide, MoscoConfig, ProblemSpace,
    VariationalProblem,
};
use nonlocal_forms::GridFunction;

// Timed criteria must not contend for the two cores; the suite serializes
// through this lock so each measured runtime is its own.
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: &str, passed: bool, detail: &str) {
    println!("[{}] {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "{id}: {detail}");
}

fn unit_interval(n: usize) -> Arc<Domain> {
    Domain::build(DomainSpec {
        geometry: Geometry::Interval { a: 0.0, b: 1.0 },
        n,
        r_trunc: 2.0,
        tail_tol: 1e-10,
    })
    .unwrap()
}

fn unit_square(n: usize) -> Arc<Domain> {
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

/// Criterion 1: the interior energies of the linear function under the
/// fractional-generator kernel match `1 - (2-alpha)/(3-alpha)` to 1e-6
/// relative, and the alpha = 1.999 value is within 1e-3 of the local
/// energy 1. Runtime under 10 s.
#[test]
fn criterion_01_bbm_limit_1d() {
    let _serial = serial();
    let start = Instant::now();
    let dom = unit_interval(16);
    let u = GridFunction::sample(dom, SpaceTag::VNuFull, Basis::PiecewiseLinear, |x| x[0]);
    let fam = KernelFamily::nu(Mollifier::power_law(1));
    let cfg = QuadConfig::default();
    let mut worst_rel = 0.0f64;
    for alpha in [1.5, 1.9, 1.99] {
        let value = eval_form_inner(&fam.at(alpha).unwrap(), &u, &u, &cfg)
            .unwrap()
            .value;
        let reference = 1.0 - (2.0 - alpha) / (3.0 - alpha);
        worst_rel = worst_rel.max((value - reference).abs() / reference);
    }
    let last = eval_form_inner(&fam.at(1.999).unwrap(), &u, &u, &cfg)
        .unwrap()
        .value;
    let final_gap = (last - 1.0).abs();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 1 (1D form limit)",
        worst_rel <= 1e-6 && final_gap <= 1e-3 && elapsed < 10.0,
        &format!(
            "worst closed-form rel err {worst_rel:.3e} (tol 1e-6), \
             final gap to the local energy {final_gap:.6e} (tol 1e-3), {elapsed:.2}s"
        ),
    );
}

/// Criterion 2: the second-moment matrices of the four catalog kernels
/// converge to the identity within 1e-3 at the final sweep order, and the
/// result recomputed at delta/2 agrees to 1e-6. Runtime under 30 s.
#[test]
fn criterion_02_diffusion_matrix_identity() {
    let _serial = serial();
    let start = Instant::now();
    // delta-independence is a limit statement; the final order must sit close
    // enough to 2 that the ball truncation effect (2-alpha)ln2 drops under 1e-6
    let sweep = [1.5, 1.9, 1.99, 1.999, 1.9999, 1.99999, 2.0 - 1e-6, 2.0 - 1e-7];
    let mut worst_id = 0.0f64;
    let mut worst_agree = 0.0f64;
    for d in [1usize, 2] {
        let kernels = [
            ("j1", KernelFamily::j1(d)),
            ("j2", KernelFamily::j2(d, 1.0).unwrap()),
            ("j3", KernelFamily::j3(d, nonlocal_forms::kernels::RadialTail::gaussian())),
            ("j4", KernelFamily::j4(d)),
        ];
        for (name, fam) in kernels {
            let m = diffusion_matrix(&fam, &vec![0.0; d], 0.5, &sweep, 1e-3).unwrap();
            assert!(m.converged, "{name} d={d} sweep not Cauchy");
            worst_id = worst_id.max(m.max_norm_distance_to_identity());
            worst_agree = worst_agree.max(m.delta_agreement);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 2 (diffusion matrix identity)",
        worst_id <= 1e-3 && worst_agree <= 1e-6 && elapsed < 30.0,
        &format!(
            "worst |A - I| {worst_id:.3e} (tol 1e-3), worst delta agreement \
             {worst_agree:.3e} (tol 1e-6), {elapsed:.2}s"
        ),
    );
}

/// Criterion 3: with a seeded random modulation of strength 2, every
/// eigenvalue of the limiting matrix lies in the ellipticity sandwich
/// `[1/(d Lambda) - 1e-3, Lambda/d + 1e-3]`.
#[test]
fn criterion_03_ellipticity_sandwich() {
    let _serial = serial();
    let d = 2;
    let lambda = 2.0;
    let fam = KernelFamily::perturbed(Mollifier::power_law(d), lambda, 2024).unwrap();
    let m = diffusion_matrix(&fam, &[0.1, -0.2], 0.5, &[1.5, 1.9, 1.99, 1.999], 1e-3).unwrap();
    let lo = 1.0 / (d as f64 * lambda) - 1e-3;
    let hi = lambda / d as f64 + 1e-3;
    let ev = m.eigenvalues();
    let ok = ev.iter().all(|&e| e >= lo && e <= hi);
    report(
        "criterion 3 (ellipticity sandwich)",
        ok,
        &format!("eigenvalues {ev:?} within [{lo:.4}, {hi:.4}]"),
    );
}

/// Criterion 4: concentration integrals of the power-law family match
/// `eps/(beta+eps)` to 1e-8, and the unit-mass case to 1e-10.
#[test]
fn criterion_04_concentration_closed_form() {
    let _serial = serial();
    let m = Mollifier::power_law(1);
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        for eps in [0.1, 0.01] {
            let v = forms::concentration_integral(&m, beta, 1.0, &[eps]).unwrap()[0];
            worst = worst.max((v - eps / (beta + eps)).abs());
        }
    }
    let unit = forms::concentration_integral(&m, 0.0, 1.0, &[0.1, 0.01]).unwrap();
    let worst_unit = unit
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0f64, f64::max);
    report(
        "criterion 4 (concentration closed form)",
        worst <= 1e-8 && worst_unit <= 1e-10,
        &format!("worst |value - eps/(beta+eps)| {worst:.3e} (tol 1e-8), worst unit-mass error {worst_unit:.3e} (tol 1e-10)"),
    );
}

/// Criterion 5: the complement cross term of a smooth bump strictly
/// decreases along the sweep and falls below 1e-2 at alpha = 1.999.
#[test]
fn criterion_05_cross_term_vanishing() {
    let _serial = serial();
    let dom = unit_interval(64);
    let u = GridFunction::sample(dom, SpaceTag::VNuFull, Basis::PiecewiseLinear, |x| {
        let s: f64 = (x[0] - 0.5) / 0.4;
        if s.abs() < 1.0 {
            (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    });
    let fam = KernelFamily::nu(Mollifier::power_law(1));
    let cfg = QuadConfig::default();
    let crosses: Vec<f64> = [1.5, 1.9, 1.99, 1.999]
        .iter()
        .map(|&alpha| {
            eval_form_full(&fam.at(alpha).unwrap(), &u, &u, &cfg)
                .unwrap()
                .cross_part
        })
        .collect();
    let decreasing = crosses.windows(2).all(|w| w[1] < w[0]);
    let final_cross = *crosses.last().unwrap();
    report(
        "criterion 5 (cross-term vanishing)",
        decreasing && final_cross < 1e-2,
        &format!("cross terms {crosses:?}, final {final_cross:.3e} (tol 1e-2)"),
    );
}

/// Criterion 6: decomposition of the full form to 1e-12 relative, exact
/// symmetry, and bilinearity plus Cauchy-Schwarz on 100 seeded triples.
#[test]
fn criterion_06_form_algebra() {
    let _serial = serial();
    let dom = unit_interval(8);
    let fam = KernelFamily::nu(Mollifier::power_law(1));
    let k = fam.at(1.5).unwrap();
    let cfg = QuadConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(61);
    fn random_fn(dom: &Arc<Domain>, rng: &mut ChaCha12Rng) -> GridFunction {
        let mut g = GridFunction::zeros(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear);
        for c in g.coeffs.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
        g
    }
    let mut worst_decomp = 0.0f64;
    let mut worst_bilinear = 0.0f64;
    let mut cs_violations = 0usize;
    let mut symmetry_exact = true;
    for _ in 0..100 {
        let (u, v, w) = (
            random_fn(&dom, &mut rng),
            random_fn(&dom, &mut rng),
            random_fn(&dom, &mut rng),
        );
        let full = eval_form_full(&k, &u, &v, &cfg).unwrap();
        let inner = eval_form_inner(&k, &u, &v, &cfg).unwrap();
        worst_decomp = worst_decomp.max(
            (full.value - (inner.value + full.cross_part)).abs()
                / full.value.abs().max(1e-300),
        );
        symmetry_exact &= full.value == eval_form_full(&k, &v, &u, &cfg).unwrap().value;
        // bilinearity: E(a u + b w, v) = a E(u,v) + b E(w,v)
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mut comb = u.clone();
        for (c, wc) in comb.coeffs.iter_mut().zip(&w.coeffs) {
            *c = a * *c + b * wc;
        }
        let lhs = eval_form_full(&k, &comb, &v, &cfg).unwrap().value;
        let rhs = a * full.value + b * eval_form_full(&k, &w, &v, &cfg).unwrap().value;
        let scale = lhs.abs().max(rhs.abs()).max(1e-12);
        worst_bilinear = worst_bilinear.max((lhs - rhs).abs() / scale);
        // Cauchy-Schwarz (the quadrature weights are nonnegative, so the
        // discrete form is PSD and the inequality holds to rounding)
        let uu = eval_form_full(&k, &u, &u, &cfg).unwrap().value;
        let vv = eval_form_full(&k, &v, &v, &cfg).unwrap().value;
        if full.value.powi(2) > uu * vv * (1.0 + 1e-12) {
            cs_violations += 1;
        }
    }
    report(
        "criterion 6 (form decomposition and algebra)",
        worst_decomp <= 1e-12 && symmetry_exact && worst_bilinear <= 1e-11 && cs_violations == 0,
        &format!(
            "decomposition defect {worst_decomp:.2e} (tol 1e-12), symmetry exact: {symmetry_exact}, \
             bilinearity defect {worst_bilinear:.2e}, Cauchy-Schwarz violations {cs_violations}/100"
        ),
    );
}

/// Criterion 7: the Dirichlet resolvent pair at n = 256 with unit source:
/// distances to the local solution strictly decrease and end below 5e-3 at
/// alpha = 1.999; the local solver is validated against the closed-form ODE
/// solution at second order. Runtime under 60 s.
#[test]
fn criterion_07_mosco_resolvent_sweep() {
    let _serial = serial();
    let start = Instant::now();
    let dom = unit_interval(256);
    let f = GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |_| 1.0);
    let fam = KernelFamily::nu(Mollifier::power_law(1));
    let cfg = MoscoConfig {
        lambda: 1.0,
        mosco_tol: 5e-3,
        ..MoscoConfig::default()
    };
    let rep = mosco_sweep(&f, &fam, &[1.5, 1.9, 1.99, 1.999], &cfg).unwrap();

    // independent validation of the local solver: nodal O(h^2) convergence
    // against u(x) = 1 - cosh(x - 1/2)/cosh(1/2)
    let exact = |x: f64| 1.0 - ((x - 0.5).cosh() / 0.5f64.cosh());
    let mut errs = Vec::new();
    for n in [128usize, 256] {
        let dn = unit_interval(n);
        let fn_ = GridFunction::sample(dn.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |_| {
            1.0
        });
        let problem = VariationalProblem {
            side: FormSide::Local {
                a: [[1.0, 0.0], [0.0, 1.0]],
            },
            space: ProblemSpace::H1Zero,
            source: &fn_,
            lambda: 1.0,
            quad: QuadConfig::default(),
        };
        let u = solve_resolvent(&problem, 1e-13).unwrap();
        let mut worst = 0.0f64;
        for &node in dn.interior_nodes() {
            let x = dn.node_coord(node)[0];
            worst = worst.max((u.coeffs[node as usize] - exact(x)).abs());
        }
        errs.push(worst);
    }
    let rate = errs[0] / errs[1];
    let ode_ok = errs[1] <= 0.5 / (256.0f64 * 256.0) && (3.2..4.8).contains(&rate);

    let distances: Vec<f64> = rep.rows.iter().map(|r| r.l2_distance).collect();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 7 (resolvent sweep, Dirichlet pair)",
        rep.distances_decreasing && rep.final_distance < 5e-3 && ode_ok && elapsed < 60.0,
        &format!(
            "distances {distances:?} (final tol 5e-3), local ODE error {:.3e} with rate {rate:.2}, {elapsed:.1}s",
            errs[1]
        ),
    );
}

/// Criterion 8: the interior energy is bounded by `(Lambda + 4 kappa_0)`
/// times the `H^1` norm squared for seeded random functions on the unit
/// square, for each kernel with near-field comparison constant `Lambda`.
#[test]
fn criterion_08_boundedness_constants() {
    let _serial = serial();
    let dom = unit_square(6);
    let eye = [[1.0, 0.0], [0.0, 1.0]];
    let mut rng = ChaCha12Rng::seed_from_u64(88);
    let mut fns = Vec::new();
    for _ in 0..20 {
        let mut g = GridFunction::zeros(dom.clone(), SpaceTag::HNuOnOmega, Basis::PiecewiseLinear);
        for &node in dom.interior_nodes() {
            g.coeffs[node as usize] = rng.random_range(-1.0..1.0);
        }
        fns.push(g);
    }
    let kernels = [
        ("j1", KernelFamily::j1(2)),
        ("j2", KernelFamily::j2(2, 1.0).unwrap()),
        ("j4", KernelFamily::j4(2)),
    ];
    let dummy = GridFunction::zeros(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear);
    let mut worst_margin = f64::INFINITY;
    let mut all_ok = true;
    for (name, fam) in &kernels {
        let constant = fam.lambda() + 4.0 * kappa0(fam, fam.alpha0()).unwrap();
        // both ends of the default sweep; the bound has a comfortable margin,
        // so a lighter quadrature suffices
        for &alpha in &[1.5, 1.999] {
            let quad = QuadConfig {
                gl_order: 6,
                graded_levels: 40,
                theta_order: 4,
                ..QuadConfig::default()
            };
            let problem = VariationalProblem {
                side: FormSide::Nonlocal { family: fam, alpha },
                space: ProblemSpace::HNuOnOmega,
                source: &dummy,
                lambda: 1.0,
                quad,
            };
            let sys = assemble(&problem).unwrap();
            let n = sys.n();
            for u in &fns {
                let x: Vec<f64> = sys.dofs.iter().map(|&d| u.coeffs[d as usize]).collect();
                let mut energy = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        energy += x[i] * sys.stiffness[i * n + j] * x[j];
                    }
                }
                let h1 = eval_form_local(&eye, u, u).unwrap() + forms::l2_inner_omega(u, u);
                let bound = constant * h1;
                all_ok &= energy <= bound * (1.0 + 1e-9);
                worst_margin = worst_margin.min(bound - energy);
            }
            if !all_ok {
                println!("bound violated for {name} at alpha {alpha}");
            }
        }
    }
    report(
        "criterion 8 (boundedness constants)",
        all_ok,
        &format!("E <= (Lambda + 4 kappa0) ||u||_H1^2 for 20 seeded u x 3 kernels x 2 orders; smallest slack {worst_margin:.3e}"),
    );
}

/// Criterion 9: the fractional normalization satisfies
/// `C(d, alpha) omega_{d-1} / (2 d (2-alpha)) -> 1`; within 1e-2 at 1.999.
#[test]
fn criterion_09_normalization_limit() {
    let _serial = serial();
    let g1 = (normalization_ratio(1, 1.999) - 1.0).abs();
    let g2 = (normalization_ratio(2, 1.999) - 1.0).abs();
    report(
        "criterion 9 (normalization-constant limit)",
        g1 <= 1e-2 && g2 <= 1e-2,
        &format!("|ratio - 1| = {g1:.3e} (d=1), {g2:.3e} (d=2), tol 1e-2"),
    );
}

/// Criterion 10: the translate-and-mollify approximation of a discontinuous
/// function has decreasing nonlocal seminorm error along the scale sweep.
#[test]
fn criterion_10_smoothing_density_trend() {
    let _serial = serial();
    let dom = unit_interval(256);
    // indicator of the left half: a genuine jump, in the nonlocal space for
    // subcritical orders
    let u = GridFunction::sample(
        dom.clone(),
        SpaceTag::VNuZeroComplement,
        Basis::PiecewiseLinear,
        |x| if x[0] <= 0.5 { 1.0 } else { 0.0 },
    );
    let fam = KernelFamily::nu(Mollifier::power_law(1));
    let kernel = fam.at(0.5).unwrap();
    let cfg = QuadConfig::default();
    let mut seminorms = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let v = smooth_approximation(&u, eps, &[1.0], 2.0).unwrap();
        let mut diff = v.clone();
        for (c, uc) in diff.coeffs.iter_mut().zip(&u.coeffs) {
            *c -= uc;
        }
        diff.space = SpaceTag::VNuFull;
        seminorms.push(forms::seminorm_v_nu(&kernel, &diff, &cfg).unwrap());
    }
    let decreasing = seminorms.windows(2).all(|w| w[1] < w[0]);
    report(
        "criterion 10 (smoothing/density trend)",
        decreasing,
        &format!("seminorm errors {seminorms:?}"),
    );
}
