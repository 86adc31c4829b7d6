//! The interaction-kernel catalog `J_alpha` and its radial/tail metadata.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{norm, Mollifier, MollifierFamily};
use crate::constants::{frac_laplace_constant, normalization_ratio, sphere_area};
use crate::quad::integrate_adaptive;
use crate::{Error, Result};

/// Tail integral value `sup_x ∫_{|h| > delta} J(x, x+h) dh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// Exact (closed form or support-exact) value.
    Exact(f64),
    /// Upper bound with a quadrature/truncation remainder.
    Bounded { value: f64, remainder: f64 },
    /// The tail is not integrable.
    Divergent,
}

impl TailBound {
    pub fn value(&self) -> f64 {
        match self {
            TailBound::Exact(v) => *v,
            TailBound::Bounded { value, remainder } => value + remainder,
            TailBound::Divergent => f64::INFINITY,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, TailBound::Divergent)
    }
}

/// Radial tail kernel handle for the general-tail family: a symmetric
/// translation-invariant far-field part with integrable tails.
#[derive(Clone)]
pub struct RadialTail {
    pub id: String,
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Decay exponent `p` with `J(r) <= C r^{-d-p}` for large `r`;
    /// `None` means faster-than-power decay with negligible mass beyond `cutoff`.
    pub decay: Option<f64>,
    /// Radius beyond which the tail is numerically negligible.
    pub cutoff: f64,
}

impl std::fmt::Debug for RadialTail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialTail").field("id", &self.id).finish()
    }
}

impl RadialTail {
    /// Gaussian far field `exp(-r^2)`.
    pub fn gaussian() -> Self {
        RadialTail {
            id: "gaussian".into(),
            eval: Arc::new(|r| (-r * r).exp()),
            decay: None,
            cutoff: 12.0,
        }
    }
}

/// Seeded symmetric spatial modulation `c(x, y)` with `1/Lambda <= c <= Lambda`.
///
/// Built from even angular harmonics of the direction `(y-x)/|y-x|` plus
/// cosine modes in the midpoint sum `x+y`, squashed through `tanh`, so the
/// field is smooth, symmetric under the swap of `x` and `y`, and the
/// diffusion-matrix limit exists (the direction dependence is scale free).
#[derive(Debug, Clone)]
pub struct Modulation {
    pub lambda: f64,
    pub seed: u64,
    ang: Vec<(f64, f64)>,
    mid: Vec<(f64, f64, f64)>,
    d: usize,
}

impl Modulation {
    pub fn new(d: usize, lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let ang = if d >= 2 {
            (0..2)
                .map(|_| (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)))
                .collect()
        } else {
            vec![]
        };
        let mid = (0..2)
            .map(|_| {
                (
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0.5..3.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Modulation {
            lambda,
            seed,
            ang,
            mid,
            d,
        }
    }

    pub fn factor(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut q = 0.0;
        if self.d >= 2 {
            // canonical direction representative so that swapping x and y
            // yields bit-identical values
            let (mut hx, mut hy) = (y[0] - x[0], y[1] - x[1]);
            if hx < 0.0 || (hx == 0.0 && hy < 0.0) {
                hx = -hx;
                hy = -hy;
            }
            let theta = hy.atan2(hx);
            for (m, &(a, b)) in self.ang.iter().enumerate() {
                let k = 2.0 * (m as f64 + 1.0);
                q += a * (k * theta).cos() + b * (k * theta).sin();
            }
        }
        let s: f64 = x.iter().zip(y).map(|(a, b)| a + b).sum();
        for &(a, w, p) in &self.mid {
            q += a * (w * s + p).cos();
        }
        self.lambda.powf(q.tanh())
    }
}

/// Kernel kinds of the catalog.
#[derive(Debug, Clone)]
pub enum KernelKind {
    /// `(C_{d,alpha}/2) |x-y|^{-d-alpha}`: the fractional kernel, full support.
    J1Fractional,
    /// Fractional near field plus the power tail `(2-alpha) |x-y|^{-d-beta}` beyond `B_1`.
    J2MixedTail { beta: f64 },
    /// Fractional near field plus `(2-alpha) J(x,y)` beyond `B_1` for a general tail handle.
    J3GeneralTail { tail: RadialTail },
    /// `d (d+2) / (omega_{d-1} (2-alpha)^{d+2})` on `B_{2-alpha}`: a bounded kernel family.
    J4RescaledIndicator,
    /// `J_alpha = nu_alpha` of the base mollifier.
    NuDirect,
    /// `c(x, y) nu_alpha(x - y)` with a seeded symmetric modulation.
    Perturbed { modulation: Modulation },
    /// Deliberate test violator `nu_alpha(h) |h|^{-1/2}`: breaks the upper
    /// comparison bound near `h = 0` at any fixed constant.
    Violator,
}

impl KernelKind {
    pub fn id(&self) -> &'static str {
        match self {
            KernelKind::J1Fractional => "j1",
            KernelKind::J2MixedTail { .. } => "j2",
            KernelKind::J3GeneralTail { .. } => "j3",
            KernelKind::J4RescaledIndicator => "j4",
            KernelKind::NuDirect => "nu",
            KernelKind::Perturbed { .. } => "perturbed",
            KernelKind::Violator => "violator",
        }
    }
}

/// A kernel family `alpha -> J_alpha`, with its base mollifier, the declared
/// two-sided comparison constant and the validity threshold `alpha0`.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    kind: KernelKind,
    base: Mollifier,
    lambda: f64,
    alpha0: f64,
    translation_invariant: bool,
}

impl KernelFamily {
    /// The fractional kernel family over the power-law base.
    pub fn j1(d: usize) -> Self {
        let base = Mollifier::power_law(d);
        let mut fam = KernelFamily {
            kind: KernelKind::J1Fractional,
            base,
            lambda: 1.0,
            alpha0: 1.0,
            translation_invariant: true,
        };
        fam.lambda = fam.comparison_lambda();
        fam
    }

    pub fn j2(d: usize, beta: f64) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "j2 tail exponent beta must be positive, got {beta}"
            )));
        }
        let mut fam = KernelFamily {
            kind: KernelKind::J2MixedTail { beta },
            base: Mollifier::power_law(d),
            lambda: 1.0,
            alpha0: 1.0,
            translation_invariant: true,
        };
        fam.lambda = fam.comparison_lambda();
        Ok(fam)
    }

    pub fn j3(d: usize, tail: RadialTail) -> Self {
        let mut fam = KernelFamily {
            kind: KernelKind::J3GeneralTail { tail },
            base: Mollifier::power_law(d),
            lambda: 1.0,
            alpha0: 1.0,
            translation_invariant: true,
        };
        fam.lambda = fam.comparison_lambda();
        fam
    }

    pub fn j4(d: usize) -> Self {
        let base = Mollifier::new(d, MollifierFamily::BoundedPoly { beta: 2.0 }).unwrap();
        KernelFamily {
            kind: KernelKind::J4RescaledIndicator,
            base,
            lambda: d as f64,
            alpha0: 1.0,
            translation_invariant: true,
        }
    }

    pub fn nu(base: Mollifier) -> Self {
        KernelFamily {
            kind: KernelKind::NuDirect,
            base,
            lambda: 1.0,
            alpha0: 1.0,
            translation_invariant: true,
        }
    }

    pub fn perturbed(base: Mollifier, lambda: f64, seed: u64) -> Result<Self> {
        if lambda < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "perturbation constant must satisfy Lambda >= 1, got {lambda}"
            )));
        }
        let d = base.dimension();
        Ok(KernelFamily {
            kind: KernelKind::Perturbed {
                modulation: Modulation::new(d, lambda, seed),
            },
            base,
            lambda,
            alpha0: 1.0,
            translation_invariant: false,
        })
    }

    pub fn violator(base: Mollifier) -> Self {
        KernelFamily {
            kind: KernelKind::Violator,
            base,
            lambda: 1.0,
            alpha0: 1.0,
            translation_invariant: true,
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn base(&self) -> &Mollifier {
        &self.base
    }

    pub fn dimension(&self) -> usize {
        self.base.dimension()
    }

    /// Declared comparison constant for the bound (E) on `(alpha0, 2)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// Restrict the declared validity range and recompute the stored constant.
    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        if matches!(
            self.kind,
            KernelKind::J1Fractional | KernelKind::J2MixedTail { .. } | KernelKind::J3GeneralTail { .. }
        ) {
            self.lambda = self.comparison_lambda();
        }
        self
    }

    /// Extremal near-field ratio `J/nu` over a fine alpha grid of `(alpha0, 2)`.
    ///
    /// For the fractional near field the ratio is `h`-free:
    /// `(C/2) / ((2-alpha)/omega) = d * normalization_ratio(d, alpha)`.
    fn comparison_lambda(&self) -> f64 {
        let d = self.base.dimension();
        let mut worst = 1.0f64;
        let n = 256;
        let mut alphas: Vec<f64> = (0..n)
            .map(|i| self.alpha0 + (2.0 - self.alpha0) * (i as f64 + 0.5) / n as f64)
            .collect();
        // the ratio overshoots its limit on the way to 2; refine the endpoint
        for k in 1..=24 {
            alphas.push(2.0 - (2.0 - self.alpha0) * 10f64.powf(-0.5 * k as f64));
        }
        for alpha in alphas {
            let ratio = d as f64 * normalization_ratio(d, alpha);
            worst = worst.max(ratio).max(1.0 / ratio);
        }
        worst
    }

    /// View of the family at a fixed order `alpha`.
    pub fn at(&self, alpha: f64) -> Result<KernelAt<'_>> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,2), got {alpha}"
            )));
        }
        self.base.validate_eps(2.0 - alpha)?;
        Ok(KernelAt { family: self, alpha })
    }
}

/// A kernel family bound to a fixed `alpha`: what the quadrature engines consume.
#[derive(Debug, Clone, Copy)]
pub struct KernelAt<'a> {
    family: &'a KernelFamily,
    alpha: f64,
}

impl<'a> KernelAt<'a> {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> &'a KernelFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.family.base.dimension()
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.family.kind, KernelKind::Perturbed { .. })
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.family.translation_invariant
    }

    fn eps(&self) -> f64 {
        2.0 - self.alpha
    }

    fn nu_radial(&self, r: f64) -> f64 {
        self.family.base.rho_radial(self.eps(), r) / (r * r)
    }

    /// Radial profile (the `x`-independent part; the perturbed kind multiplies
    /// this by its spatial modulation).
    pub fn radial(&self, r: f64) -> f64 {
        let d = self.dimension() as f64;
        let alpha = self.alpha;
        match &self.family.kind {
            KernelKind::J1Fractional => {
                0.5 * frac_laplace_constant(self.dimension(), alpha) * r.powf(-d - alpha)
            }
            KernelKind::J2MixedTail { beta } => {
                if r <= 1.0 {
                    0.5 * frac_laplace_constant(self.dimension(), alpha) * r.powf(-d - alpha)
                } else {
                    (2.0 - alpha) * r.powf(-d - beta)
                }
            }
            KernelKind::J3GeneralTail { tail } => {
                if r <= 1.0 {
                    0.5 * frac_laplace_constant(self.dimension(), alpha) * r.powf(-d - alpha)
                } else {
                    (2.0 - alpha) * (tail.eval)(r)
                }
            }
            KernelKind::J4RescaledIndicator => {
                let eps = self.eps();
                if r <= eps {
                    d * (d + 2.0) / (sphere_area(self.dimension()) * eps.powf(d + 2.0))
                } else {
                    0.0
                }
            }
            KernelKind::NuDirect | KernelKind::Perturbed { .. } => self.nu_radial(r),
            KernelKind::Violator => self.nu_radial(r) * r.powf(-0.5),
        }
    }

    /// Kernel value `J_alpha(x, y)`; symmetric in `(x, y)` by construction.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let h: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
        let r = norm(&h);
        if r == 0.0 {
            return Err(Error::Domain("kernel undefined on the diagonal x = y".into()));
        }
        Ok(self.eval_offdiag(x, y, r))
    }

    pub(crate) fn eval_offdiag(&self, x: &[f64], y: &[f64], r: f64) -> f64 {
        let base = self.radial(r);
        match &self.family.kind {
            KernelKind::Perturbed { modulation } => modulation.factor(x, y) * base,
            _ => base,
        }
    }

    /// Exponent with `J(r) = r^{gamma - 2} * (bounded near 0)`; equivalently the
    /// exponent of the associated `rho`-form `r^2 J(r)`.
    pub fn gamma(&self) -> f64 {
        let d = self.dimension() as f64;
        match &self.family.kind {
            KernelKind::J1Fractional
            | KernelKind::J2MixedTail { .. }
            | KernelKind::J3GeneralTail { .. } => 2.0 - d - self.alpha,
            KernelKind::J4RescaledIndicator => 2.0,
            KernelKind::NuDirect | KernelKind::Perturbed { .. } => {
                self.family.base.gamma(self.eps())
            }
            KernelKind::Violator => self.family.base.gamma(self.eps()) - 0.5,
        }
    }

    /// Support radius of the radial part (`inf` for full support).
    pub fn support_radius(&self) -> f64 {
        match &self.family.kind {
            KernelKind::J1Fractional
            | KernelKind::J2MixedTail { .. }
            | KernelKind::J3GeneralTail { .. } => f64::INFINITY,
            KernelKind::J4RescaledIndicator => self.eps(),
            _ => self.family.base.support_radius(self.eps()),
        }
    }

    /// Breakpoints of the radial profile within `(0, support)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family.kind {
            KernelKind::J1Fractional => vec![],
            KernelKind::J2MixedTail { .. } | KernelKind::J3GeneralTail { .. } => vec![1.0],
            KernelKind::J4RescaledIndicator => vec![],
            _ => self.family.base.breakpoints(self.eps()),
        }
    }

    /// `sup_x ∫_{|h| > delta} J_alpha(x, x+h) dh`.
    ///
    /// Closed forms for the power pieces; quadrature with a remainder bound
    /// for general tails; an upper bound `Lambda` times the base tail for the
    /// non-translation-invariant perturbed kind.
    pub fn tail_integral(&self, delta: f64) -> TailBound {
        assert!(delta > 0.0);
        let d = self.dimension();
        let df = d as f64;
        let omega = sphere_area(d);
        let alpha = self.alpha;
        let near_exact = |from: f64, to: f64| -> f64 {
            // ∫_{from<|h|<to} (C/2) |h|^{-d-alpha} dh
            let c = 0.5 * frac_laplace_constant(d, alpha) * omega;
            c * (from.powf(-alpha) - to.powf(-alpha)) / alpha
        };
        match &self.family.kind {
            KernelKind::J1Fractional => {
                TailBound::Exact(0.5 * frac_laplace_constant(d, alpha) * omega * delta.powf(-alpha) / alpha)
            }
            KernelKind::J2MixedTail { beta } => {
                let tail_beyond = |from: f64| (2.0 - alpha) * omega * from.powf(-beta) / beta;
                if delta < 1.0 {
                    TailBound::Exact(near_exact(delta, 1.0) + tail_beyond(1.0))
                } else {
                    TailBound::Exact(tail_beyond(delta))
                }
            }
            KernelKind::J3GeneralTail { tail } => {
                let from = delta.max(1.0);
                let mut f = |r: f64| r.powf(df - 1.0) * (tail.eval)(r);
                let (v, e) = integrate_adaptive(&mut f, from, tail.cutoff.max(from + 1.0), 1e-12, 1e-300, 36);
                let far = (2.0 - alpha) * omega * v;
                let rem = (2.0 - alpha) * omega * e
                    + match tail.decay {
                        Some(p) if p > 0.0 => {
                            let r = tail.cutoff.max(from);
                            (2.0 - alpha) * omega * (tail.eval)(r) * r.powf(df) / p
                        }
                        Some(_) => return TailBound::Divergent,
                        None => 0.0,
                    };
                let near = if delta < 1.0 { near_exact(delta, 1.0) } else { 0.0 };
                TailBound::Bounded {
                    value: near + far,
                    remainder: rem,
                }
            }
            KernelKind::J4RescaledIndicator => {
                let eps = self.eps();
                if delta >= eps {
                    TailBound::Exact(0.0)
                } else {
                    // ∫_{delta<|h|<eps} d(d+2)/(omega eps^{d+2}) dh
                    let c = df * (df + 2.0) / eps.powf(df + 2.0);
                    TailBound::Exact(c * (eps.powf(df) - delta.powf(df)) / df)
                }
            }
            KernelKind::NuDirect | KernelKind::Perturbed { .. } | KernelKind::Violator => {
                let supp = self.support_radius();
                if delta >= supp {
                    return TailBound::Exact(0.0);
                }
                let mut f = |r: f64| r.powf(df - 1.0) * self.radial(r);
                let mut cuts: Vec<f64> = self
                    .breakpoints()
                    .into_iter()
                    .filter(|&b| b > delta && b < supp)
                    .collect();
                cuts.push(supp);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut acc = 0.0;
                let mut err = 0.0;
                let mut lo = delta;
                for hi in cuts {
                    let (v, e) = integrate_adaptive(&mut f, lo, hi, 1e-12, 1e-300, 36);
                    acc += v;
                    err += e;
                    lo = hi;
                }
                match &self.family.kind {
                    KernelKind::Perturbed { modulation } => TailBound::Bounded {
                        value: modulation.lambda * omega * acc,
                        remainder: modulation.lambda * omega * err,
                    },
                    _ => TailBound::Bounded {
                        value: omega * acc,
                        remainder: omega * err,
                    },
                }
            }
        }
    }
}
