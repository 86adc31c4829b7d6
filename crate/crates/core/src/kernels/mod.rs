//! Mollifier families, derived `nu_alpha` kernels and the interaction-kernel zoo.
//!
//! A [`Mollifier`] is a parametric radial family `rho_eps >= 0` with unit mass
//! and mass concentrating at the origin as `eps -> 0`, such that
//! `h -> |h|^{-2} rho_eps(h)` is almost decreasing. [`NuAlpha`] derives the
//! jump kernel `nu_alpha(h) = |h|^{-2} rho_{2-alpha}(h)` from it.
//! [`KernelFamily`] holds the catalog of symmetric kernels `J_alpha`
//! comparable to `nu_alpha` in the sense of the two-sided bound (E).

mod checks;
mod jkernel;

pub use checks::{
    almost_decreasing_check, check_condition_e, check_condition_l, kappa0, tilde_nu,
    AlmostDecreasingReport, ConditionEReport, ConditionESample, ConditionLReport, SampleSpec,
    TildeNu,
};
pub use jkernel::{KernelAt, KernelFamily, KernelKind, RadialTail, TailBound};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::constants::sphere_area;
use crate::quad::{integrate_adaptive, integrate_radial};
use crate::{Error, Result};

/// Radial profile used by the profile-scaled mollifier family.
#[derive(Clone)]
pub struct RadialProfile {
    pub id: String,
    /// `phi(s)` for `s >= 0`; must have unit integral over `[0, ∞)`.
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Radius of the support of `phi` (in profile units).
    pub support: f64,
    /// Almost-decreasing constant of `phi`.
    pub almost_decreasing_c: f64,
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialProfile")
            .field("id", &self.id)
            .field("support", &self.support)
            .finish()
    }
}

impl RadialProfile {
    /// Indicator of `[0, 1]`: the simplest unit-mass almost decreasing profile.
    pub fn indicator() -> Self {
        RadialProfile {
            id: "indicator".into(),
            eval: Arc::new(|s| if s <= 1.0 { 1.0 } else { 0.0 }),
            support: 1.0,
            almost_decreasing_c: 1.0,
        }
    }

    /// Triangular profile `2 (1-s)_+`.
    pub fn triangle() -> Self {
        RadialProfile {
            id: "triangle".into(),
            eval: Arc::new(|s| if s < 1.0 { 2.0 * (1.0 - s) } else { 0.0 }),
            support: 1.0,
            almost_decreasing_c: 1.0,
        }
    }
}

/// The mollifier catalog.
#[derive(Debug, Clone)]
pub enum MollifierFamily {
    /// `(eps/omega) |x|^{-d+eps}` on `B_1`; the fractional-kernel generator.
    PowerLaw,
    /// `((d+beta)/(omega eps^{d+beta})) |x|^beta` on `B_eps`, `-d < beta <= 2`.
    BoundedPoly { beta: f64 },
    /// `(omega log(eps0/eps))^{-1} |x|^{-d}` on the annulus `eps < |x| < eps0`.
    LogAnnulus { eps0: f64 },
    /// `(|x|+eps)^beta / (omega b_eps)` on `B_eps0`, `-d < beta <= 2`.
    ShiftedPower { beta: f64, eps0: f64 },
    /// `(|x|+eps)^{-d} / (omega b_eps)` on `B_eps0` (the `beta = -d` endpoint).
    ShiftedCritical { eps0: f64 },
    /// `|x|^beta / (omega b_eps (|x|+eps)^{d+beta})` on `B_eps0`, `0 < beta <= 2`.
    ShiftedRatio { beta: f64, eps0: f64 },
    /// `|x|^{-d+1} (omega eps)^{-1} phi(|x|/eps)` for an almost decreasing unit-mass profile.
    ProfileScaled { profile: RadialProfile },
}

impl MollifierFamily {
    pub fn id(&self) -> &'static str {
        match self {
            MollifierFamily::PowerLaw => "power_law",
            MollifierFamily::BoundedPoly { .. } => "bounded_poly",
            MollifierFamily::LogAnnulus { .. } => "log_annulus",
            MollifierFamily::ShiftedPower { .. } => "shifted_power",
            MollifierFamily::ShiftedCritical { .. } => "shifted_critical",
            MollifierFamily::ShiftedRatio { .. } => "shifted_ratio",
            MollifierFamily::ProfileScaled { .. } => "profile",
        }
    }
}

/// A mollifier family bound to a dimension: evaluates `rho_eps` and exposes
/// the radial data (singular exponent, support, breakpoints) that the
/// quadrature engines need.
#[derive(Debug, Clone)]
pub struct Mollifier {
    d: usize,
    family: MollifierFamily,
}

impl Mollifier {
    pub fn new(d: usize, family: MollifierFamily) -> Result<Self> {
        if d == 0 || d > 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {d}"
            )));
        }
        let df = d as f64;
        match &family {
            MollifierFamily::BoundedPoly { beta } | MollifierFamily::ShiftedPower { beta, .. } => {
                if *beta <= -df || *beta > 2.0 {
                    return Err(Error::InvalidParameter(format!(
                        "beta must lie in (-d, 2], got {beta}"
                    )));
                }
            }
            MollifierFamily::ShiftedRatio { beta, .. } => {
                if *beta <= 0.0 || *beta > 2.0 {
                    return Err(Error::InvalidParameter(format!(
                        "shifted_ratio needs beta in (0, 2], got {beta}"
                    )));
                }
            }
            MollifierFamily::ProfileScaled { profile } => {
                let mut f = |s: f64| (profile.eval)(s);
                let top = profile.support.min(1e6);
                let (mass, _) = integrate_adaptive(&mut f, 0.0, top, 1e-10, 1e-14, 30);
                if (mass - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidParameter(format!(
                        "profile '{}' has integral {mass}, expected 1",
                        profile.id
                    )));
                }
            }
            _ => {}
        }
        if let Some(eps0) = family_eps0(&family) {
            if eps0 <= 0.0 {
                return Err(Error::InvalidParameter("eps0 must be positive".into()));
            }
        }
        Ok(Mollifier { d, family })
    }

    pub fn power_law(d: usize) -> Self {
        Mollifier::new(d, MollifierFamily::PowerLaw).unwrap()
    }

    pub fn bounded_poly(d: usize, beta: f64) -> Result<Self> {
        Mollifier::new(d, MollifierFamily::BoundedPoly { beta })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> &MollifierFamily {
        &self.family
    }

    /// Upper end of the valid `eps` range (exclusive).
    pub fn eps_limit(&self) -> f64 {
        family_eps0(&self.family).unwrap_or(2.0).min(2.0)
    }

    pub fn validate_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps < self.eps_limit()) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} outside valid range (0, {})",
                self.eps_limit()
            )));
        }
        Ok(())
    }

    /// Whether `rho_eps` is unbounded at the origin.
    pub fn singular_at_origin(&self, eps: f64) -> bool {
        self.gamma(eps) < 0.0
    }

    /// Radial profile `rho_eps(r)`, `r >= 0`. Unbounded families return `inf` at 0.
    pub fn rho_radial(&self, eps: f64, r: f64) -> f64 {
        let d = self.d as f64;
        let omega = sphere_area(self.d);
        match &self.family {
            MollifierFamily::PowerLaw => {
                if r <= 1.0 {
                    eps / omega * r.powf(eps - d)
                } else {
                    0.0
                }
            }
            MollifierFamily::BoundedPoly { beta } => {
                if r <= eps {
                    (d + beta) / (omega * eps.powf(d + beta)) * r.powf(*beta)
                } else {
                    0.0
                }
            }
            MollifierFamily::LogAnnulus { eps0 } => {
                if r > eps && r < *eps0 {
                    1.0 / (omega * (eps0 / eps).ln()) * r.powf(-d)
                } else {
                    0.0
                }
            }
            MollifierFamily::ShiftedPower { beta, eps0 } => {
                if r <= *eps0 {
                    (r + eps).powf(*beta) / (omega * self.b_eps(eps))
                } else {
                    0.0
                }
            }
            MollifierFamily::ShiftedCritical { eps0 } => {
                if r <= *eps0 {
                    (r + eps).powf(-d) / (omega * self.b_eps(eps))
                } else {
                    0.0
                }
            }
            MollifierFamily::ShiftedRatio { beta, eps0 } => {
                if r <= *eps0 {
                    r.powf(*beta) / (omega * self.b_eps(eps) * (r + eps).powf(d + beta))
                } else {
                    0.0
                }
            }
            MollifierFamily::ProfileScaled { profile } => {
                r.powf(1.0 - d) / (omega * eps) * (profile.eval)(r / eps)
            }
        }
    }

    /// Pointwise `rho_eps(h)` with domain checks (`h != 0` for singular families).
    pub fn eval(&self, eps: f64, h: &[f64]) -> Result<f64> {
        self.validate_eps(eps)?;
        let r = norm(h);
        if r == 0.0 && self.singular_at_origin(eps) {
            return Err(Error::Domain(
                "rho_eps is singular at the origin; h must be nonzero".into(),
            ));
        }
        Ok(self.rho_radial(eps, r))
    }

    /// Exponent `gamma` with `rho_eps(r) = r^gamma * (bounded near 0)`.
    pub fn gamma(&self, eps: f64) -> f64 {
        let d = self.d as f64;
        match &self.family {
            MollifierFamily::PowerLaw => eps - d,
            MollifierFamily::BoundedPoly { beta } => *beta,
            MollifierFamily::LogAnnulus { .. } => 0.0,
            MollifierFamily::ShiftedPower { .. } | MollifierFamily::ShiftedCritical { .. } => 0.0,
            MollifierFamily::ShiftedRatio { beta, .. } => *beta,
            MollifierFamily::ProfileScaled { .. } => 1.0 - d,
        }
    }

    /// Support radius of `rho_eps`.
    pub fn support_radius(&self, eps: f64) -> f64 {
        match &self.family {
            MollifierFamily::PowerLaw => 1.0,
            MollifierFamily::BoundedPoly { .. } => eps,
            MollifierFamily::LogAnnulus { eps0 } => *eps0,
            MollifierFamily::ShiftedPower { eps0, .. }
            | MollifierFamily::ShiftedCritical { eps0 }
            | MollifierFamily::ShiftedRatio { eps0, .. } => *eps0,
            MollifierFamily::ProfileScaled { profile } => eps * profile.support,
        }
    }

    /// Radii in `(0, support)` where the radial profile changes branch.
    pub fn breakpoints(&self, eps: f64) -> Vec<f64> {
        match &self.family {
            MollifierFamily::LogAnnulus { .. } => vec![eps],
            MollifierFamily::ShiftedPower { .. }
            | MollifierFamily::ShiftedCritical { .. }
            | MollifierFamily::ShiftedRatio { .. } => vec![eps],
            _ => vec![],
        }
    }

    /// Stored almost-decreasing constant for `|h|^{-2} rho_eps(h)`.
    pub fn almost_decreasing_c(&self) -> f64 {
        match &self.family {
            MollifierFamily::ProfileScaled { profile } => profile.almost_decreasing_c,
            _ => 1.0,
        }
    }

    /// Normalization constant `b_eps` of the shifted families, from the
    /// 1D `t`-integral stated with each family. Memoized per `(family, eps)`.
    pub fn b_eps(&self, eps: f64) -> f64 {
        let (kind, beta, eps0) = match &self.family {
            MollifierFamily::ShiftedPower { beta, eps0 } => (1u8, *beta, *eps0),
            MollifierFamily::ShiftedCritical { eps0 } => (2u8, -(self.d as f64), *eps0),
            MollifierFamily::ShiftedRatio { beta, eps0 } => (3u8, *beta, *eps0),
            _ => return f64::NAN,
        };
        static CACHE: OnceLock<Mutex<HashMap<(u8, usize, u64, u64, u64), f64>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (kind, self.d, beta.to_bits(), eps0.to_bits(), eps.to_bits());
        if let Some(v) = cache.lock().unwrap().get(&key) {
            return *v;
        }
        let d = self.d as f64;
        let t0 = eps / (eps + eps0);
        // Substitute t = e^{-s} so the endpoint-singular t-integrals stay
        // resolvable for very small eps (t0 spans many decades).
        let s_max = (1.0 / t0).ln();
        let value = match kind {
            // "shifted-power": b_eps = eps^{d+beta} ∫_{t0}^1 t^{-d-beta-1} (1-t)^{d-1} dt
            1 => {
                let mut g =
                    |s: f64| ((d + beta) * s).exp() * (1.0 - (-s).exp()).powf(d - 1.0);
                let (integral, _) = integrate_adaptive(&mut g, 0.0, s_max, 1e-13, 1e-300, 48);
                eps.powf(d + beta) * integral
            }
            // "shifted-critical": b_eps = ∫_{t0}^1 t^{-1} (1-t)^{d-1} dt
            2 => {
                let mut g = |s: f64| (1.0 - (-s).exp()).powf(d - 1.0);
                let (integral, _) = integrate_adaptive(&mut g, 0.0, s_max, 1e-13, 1e-300, 48);
                integral
            }
            // "shifted-ratio": b_eps = ∫_{t0}^1 t^{-1} (1-t)^{d+beta-1} dt
            _ => {
                let mut g = |s: f64| (1.0 - (-s).exp()).powf(d + beta - 1.0);
                let (integral, _) = integrate_adaptive(&mut g, 0.0, s_max, 1e-13, 1e-300, 48);
                integral
            }
        };
        cache.lock().unwrap().insert(key, value);
        value
    }

    /// `∫ rho_eps` by radial quadrature (closed-form 1 for the whole catalog;
    /// used by the normalization invariant checks).
    pub fn unit_mass_quadrature(&self, eps: f64) -> Result<(f64, f64)> {
        let d = self.d;
        let omega = sphere_area(d);
        let gamma = self.gamma(eps);
        let mut f = |r: f64| r.powi(d as i32 - 1) * self.rho_radial(eps, r);
        let snap = [gamma + d as f64 - 1.0];
        let (v, e) = integrate_radial(&mut f, &self.breakpoints(eps), self.support_radius(eps), &snap)?;
        Ok((omega * v, omega * e))
    }

    /// Tail mass `∫_{|x| > delta} rho_eps`.
    pub fn tail_mass(&self, eps: f64, delta: f64) -> f64 {
        let supp = self.support_radius(eps);
        if delta >= supp {
            return 0.0;
        }
        let d = self.d;
        let omega = sphere_area(d);
        let mut f = |r: f64| r.powi(d as i32 - 1) * self.rho_radial(eps, r);
        let mut cuts: Vec<f64> = self
            .breakpoints(eps)
            .into_iter()
            .filter(|&b| b > delta && b < supp)
            .collect();
        cuts.push(supp);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lo = delta;
        let mut acc = 0.0;
        for hi in cuts {
            let (v, _) = integrate_adaptive(&mut f, lo, hi, 1e-13, 1e-300, 32);
            acc += v;
            lo = hi;
        }
        omega * acc
    }

    /// `∫_{|x| <= r_max} |x|^beta rho_eps(x) dx` by graded radial quadrature.
    pub fn moment_integral(&self, eps: f64, beta: f64, r_max: f64) -> Result<f64> {
        let d = self.d;
        let omega = sphere_area(d);
        let gamma = self.gamma(eps);
        let top = r_max.min(self.support_radius(eps));
        let mut f = |r: f64| r.powi(d as i32 - 1) * r.powf(beta) * self.rho_radial(eps, r);
        let snap = [gamma + beta + d as f64 - 1.0];
        let (v, _) = integrate_radial(&mut f, &self.breakpoints(eps), top, &snap)?;
        Ok(omega * v)
    }
}

fn family_eps0(f: &MollifierFamily) -> Option<f64> {
    match f {
        MollifierFamily::LogAnnulus { eps0 }
        | MollifierFamily::ShiftedPower { eps0, .. }
        | MollifierFamily::ShiftedCritical { eps0 }
        | MollifierFamily::ShiftedRatio { eps0, .. } => Some(*eps0),
        _ => None,
    }
}

pub(crate) fn norm(h: &[f64]) -> f64 {
    h.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The jump kernel `nu_alpha(h) = |h|^{-2} rho_{2-alpha}(h)`.
#[derive(Debug, Clone)]
pub struct NuAlpha {
    base: Mollifier,
    alpha: f64,
    levy_mass: f64,
}

impl NuAlpha {
    pub fn new(base: Mollifier, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,2), got {alpha}"
            )));
        }
        base.validate_eps(2.0 - alpha)?;
        let mut nu = NuAlpha {
            base,
            alpha,
            levy_mass: 0.0,
        };
        nu.levy_mass = nu.compute_levy_mass()?;
        Ok(nu)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        2.0 - self.alpha
    }

    pub fn base(&self) -> &Mollifier {
        &self.base
    }

    pub fn dimension(&self) -> usize {
        self.base.d
    }

    /// Radial profile `nu_alpha(r) = r^{-2} rho_{2-alpha}(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        self.base.rho_radial(self.eps(), r) / (r * r)
    }

    pub fn eval(&self, h: &[f64]) -> Result<f64> {
        let r = norm(h);
        if r == 0.0 {
            return Err(Error::Domain("nu_alpha(0) is undefined".into()));
        }
        Ok(self.radial(r))
    }

    /// Exponent with `nu_alpha(r) = r^gamma * (bounded near 0)`.
    pub fn gamma(&self) -> f64 {
        self.base.gamma(self.eps()) - 2.0
    }

    pub fn support_radius(&self) -> f64 {
        self.base.support_radius(self.eps())
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints(self.eps())
    }

    /// Stored Lévy mass `∫ (1 ∧ |h|^2) nu_alpha(h) dh`.
    pub fn levy_mass(&self) -> f64 {
        self.levy_mass
    }

    fn compute_levy_mass(&self) -> Result<f64> {
        let d = self.base.d;
        let omega = sphere_area(d);
        let eps = self.eps();
        let supp = self.support_radius();
        // Over |h| <= 1 the integrand is r^{d-1} rho; beyond it is r^{d-3} rho.
        let near_top = supp.min(1.0);
        let mut f_near = |r: f64| r.powi(d as i32 - 1) * self.base.rho_radial(eps, r);
        let snap = [self.base.gamma(eps) + d as f64 - 1.0];
        let (near, _) = integrate_radial(&mut f_near, &self.breakpoints(), near_top, &snap)?;
        let mut far = 0.0;
        if supp > 1.0 {
            let mut f_far = |r: f64| r.powi(d as i32 - 3) * self.base.rho_radial(eps, r);
            let mut cuts: Vec<f64> = self
                .breakpoints()
                .into_iter()
                .filter(|&b| b > 1.0 && b < supp)
                .collect();
            cuts.push(supp);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut lo = 1.0;
            for hi in cuts {
                let (v, _) = integrate_adaptive(&mut f_far, lo, hi, 1e-12, 1e-300, 30);
                far += v;
                lo = hi;
            }
        }
        Ok(omega * (near + far))
    }
}

/// A plain radial kernel handle, for operations that take a raw Lévy density
/// (full-support comparison measures, seminorm kernels).
#[derive(Clone)]
pub struct RadialKernel {
    pub d: usize,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Support radius; `inf` for full support.
    pub support: f64,
    /// Exponent with `k(r) = r^gamma * (bounded near 0)`.
    pub gamma: f64,
    /// Decay exponent `p` with `k(r) <= C r^{-d-p}` for large `r`, when known.
    pub tail_decay: Option<f64>,
    pub breakpoints: Vec<f64>,
}

impl std::fmt::Debug for RadialKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialKernel")
            .field("d", &self.d)
            .field("support", &self.support)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl RadialKernel {
    /// The full-support fractional kernel `r^{-d-alpha}` (unnormalized).
    pub fn fractional(d: usize, alpha: f64) -> Self {
        let df = d as f64;
        RadialKernel {
            d,
            eval: Arc::new(move |r| r.powf(-df - alpha)),
            support: f64::INFINITY,
            gamma: -df - alpha,
            tail_decay: Some(alpha),
            breakpoints: vec![],
        }
    }

    pub fn from_nu(nu: &NuAlpha) -> Self {
        let nu = nu.clone();
        RadialKernel {
            d: nu.dimension(),
            support: nu.support_radius(),
            gamma: nu.gamma(),
            tail_decay: None,
            breakpoints: nu.breakpoints(),
            eval: Arc::new(move |r| nu.radial(r)),
        }
    }

    pub fn radial(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn has_full_support(&self) -> bool {
        self.support.is_infinite()
    }

    /// `∫ (1 ∧ |h|^2) k(h) dh`.
    pub fn levy_mass(&self) -> Result<f64> {
        let d = self.d;
        let omega = sphere_area(d);
        let mut f_near = |r: f64| r.powi(d as i32 + 1) * self.radial(r);
        let snap = [self.gamma + d as f64 + 1.0];
        let (near, _) = integrate_radial(&mut f_near, &self.breakpoints, self.support.min(1.0), &snap)?;
        let mut far = 0.0;
        if self.support > 1.0 {
            let p = self.tail_decay.ok_or_else(|| {
                Error::InvalidParameter("kernel tail decay unknown; cannot bound Lévy mass".into())
            })?;
            if p <= 0.0 {
                return Err(Error::DivergentIntegral("kernel tail is not integrable".into()));
            }
            // integrate to where the power tail drops below 1e-16 of the near mass
            let r_cut = if self.support.is_finite() {
                self.support
            } else {
                1e12f64.powf(1.0 / p).max(10.0)
            };
            let mut f_far = |r: f64| r.powi(d as i32 - 3) * self.radial(r);
            let (v, _) = integrate_adaptive(&mut f_far, 1.0, r_cut, 1e-12, 1e-300, 40);
            far = v;
        }
        Ok(omega * (near + far))
    }
}
