//! The limiting diffusion matrix `A(x) = lim_{alpha->2} ∫_{B_delta} h h^T J_alpha(x, x+h) dh`.

use crate::constants::sphere_area;
use crate::kernels::{KernelAt, KernelFamily};
use crate::quad::{gl_rule, integrate_radial};
use crate::{Error, Result};

/// A `d x d` second-moment matrix with its convergence diagnostics along an
/// alpha sweep and the delta-independence cross check.
#[derive(Debug, Clone)]
pub struct DiffusionMatrix {
    pub d: usize,
    /// Final matrix (last sweep iterate) computed at `delta`.
    pub entries: [[f64; 2]; 2],
    pub delta: f64,
    /// Matrices per sweep alpha.
    pub per_alpha: Vec<(f64, [[f64; 2]; 2])>,
    /// Successive iterates differ by less than `matrix_tol` in max norm.
    pub converged: bool,
    pub matrix_tol: f64,
    /// Final matrix recomputed at `delta / 2`.
    pub delta_check: [[f64; 2]; 2],
    /// Max-norm difference between the `delta` and `delta/2` results.
    pub delta_agreement: f64,
}

impl DiffusionMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.entries, self.d)
    }

    pub fn max_norm_distance_to_identity(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                let target = if i == j { 1.0 } else { 0.0 };
                m = m.max((self.entries[i][j] - target).abs());
            }
        }
        m
    }
}

/// Eigenvalues of a symmetric `d x d` matrix (`d <= 2`), ascending.
pub fn symmetric_eigenvalues(a: &[[f64; 2]; 2], d: usize) -> Vec<f64> {
    match d {
        1 => vec![a[0][0]],
        _ => {
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            vec![0.5 * tr - disc, 0.5 * tr + disc]
        }
    }
}

fn matrix_max_diff(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2], d: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Second-moment matrix `∫_{B_delta} h_i h_j J(x, x+h) dh` at a fixed alpha.
fn moment_matrix(k: &KernelAt<'_>, x: &[f64], delta: f64) -> Result<[[f64; 2]; 2]> {
    let d = k.dimension();
    let omega = sphere_area(d);
    let top = delta.min(k.support_radius());
    let mut a = [[0.0; 2]; 2];
    if top <= 0.0 {
        return Ok(a);
    }
    let snap = [k.gamma() - 2.0 + d as f64 + 1.0];
    let breaks = k.breakpoints();
    if k.is_radial() {
        // isotropy: ∫ h_i h_j f(|h|) dh = delta_ij (omega/d) ∫ r^{d+1} f(r) dr
        let mut f = |r: f64| r.powi(d as i32 + 1) * k.radial(r);
        let (v, _) = integrate_radial(&mut f, &breaks, top, &snap)?;
        let diag = omega / d as f64 * v;
        for i in 0..d {
            a[i][i] = diag;
        }
        return Ok(a);
    }
    // spatial modulation: angular average per radius
    match d {
        1 => {
            let mut f = |r: f64| {
                let jp = k.eval_offdiag(x, &[x[0] + r], r);
                let jm = k.eval_offdiag(x, &[x[0] - r], r);
                r * r * (jp + jm)
            };
            let (v, _) = integrate_radial(&mut f, &breaks, top, &snap)?;
            a[0][0] = v;
            Ok(a)
        }
        _ => {
            let n_theta = 64;
            let angular = |r: f64, i: usize, j: usize| -> f64 {
                let mut acc = 0.0;
                for m in 0..n_theta {
                    let th = std::f64::consts::TAU * (m as f64 + 0.5) / n_theta as f64;
                    let t = [th.cos(), th.sin()];
                    let y = [x[0] + r * t[0], x[1] + r * t[1]];
                    acc += t[i] * t[j] * k.eval_offdiag(x, &y, r);
                }
                acc * std::f64::consts::TAU / n_theta as f64
            };
            for i in 0..2 {
                for j in i..2 {
                    let mut f = |r: f64| r.powi(3) * angular(r, i, j);
                    let (v, _) = integrate_radial(&mut f, &breaks, top, &snap)?;
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            Ok(a)
        }
    }
}

/// Compute the per-alpha second-moment matrices over the sweep, the final
/// matrix, its Cauchy diagnostic, and the delta-independence cross check at
/// `delta / 2`.
pub fn diffusion_matrix(
    family: &KernelFamily,
    x: &[f64],
    delta: f64,
    alpha_sweep: &[f64],
    matrix_tol: f64,
) -> Result<DiffusionMatrix> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if alpha_sweep.len() < 2 {
        return Err(Error::InvalidParameter(
            "the alpha sweep needs at least two entries".into(),
        ));
    }
    if alpha_sweep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "the alpha sweep must be strictly increasing".into(),
        ));
    }
    let d = family.dimension();
    let mut per_alpha = Vec::with_capacity(alpha_sweep.len());
    for &alpha in alpha_sweep {
        let k = family.at(alpha)?;
        per_alpha.push((alpha, moment_matrix(&k, x, delta)?));
    }
    let n = per_alpha.len();
    let converged = matrix_max_diff(&per_alpha[n - 1].1, &per_alpha[n - 2].1, d) < matrix_tol;
    let entries = per_alpha[n - 1].1;
    let k_last = family.at(per_alpha[n - 1].0)?;
    let delta_check = moment_matrix(&k_last, x, 0.5 * delta)?;
    let delta_agreement = matrix_max_diff(&entries, &delta_check, d);
    Ok(DiffusionMatrix {
        d,
        entries,
        delta,
        per_alpha,
        converged,
        matrix_tol,
        delta_check,
        delta_agreement,
    })
}

/// 2D Gauss moment of a function over the circle, used in tests.
#[allow(dead_code)]
fn circle_average(f: &dyn Fn(f64) -> f64, order: usize) -> f64 {
    let rule = gl_rule(order);
    rule.integrate(0.0, std::f64::consts::TAU, f) / std::f64::consts::TAU
}
