//! Experiment configuration: one human-readable TOML document per run.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::kernels::{KernelFamily, Mollifier, MollifierFamily, RadialProfile, RadialTail};
use crate::{Error, Result};

/// Experiment kinds dispatched by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Structural-condition checks: two-sided comparison, vanishing tails,
    /// the uniform tail constant.
    CheckKernel,
    /// Pointwise form limit: interior energies along the sweep against the
    /// local gradient energy.
    BbmLimit,
    /// Second-moment matrices along the sweep with the delta cross-check.
    DiffusionMatrix,
    /// Mollifier concentration integrals.
    Concentration,
    /// Vanishing of the complement cross term for a smooth bump.
    CrossTerm,
    /// Resolvent-comparison sweep against the matched local problem.
    Mosco,
    /// Translate-and-mollify approximation trend in the nonlocal seminorm.
    Density,
}

impl ExperimentKind {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::CheckKernel => "check_kernel",
            ExperimentKind::BbmLimit => "bbm_limit",
            ExperimentKind::DiffusionMatrix => "diffusion_matrix",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::CrossTerm => "cross_term",
            ExperimentKind::Mosco => "mosco",
            ExperimentKind::Density => "density",
        }
    }
}

/// Mollifier family selector (catalog addressable by string id).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub family: String,
    pub d: usize,
    pub beta: Option<f64>,
    pub eps0: Option<f64>,
    /// Profile id for the profile-scaled family: `indicator` or `triangle`.
    pub profile: Option<String>,
}

impl MollifierSpec {
    pub fn build(&self) -> Result<Mollifier> {
        let beta = self.beta;
        let eps0 = self.eps0.unwrap_or(1.0);
        let family = match self.family.as_str() {
            "power_law" => MollifierFamily::PowerLaw,
            "bounded_poly" => MollifierFamily::BoundedPoly {
                beta: beta.ok_or_else(|| Error::Config("bounded_poly needs beta".into()))?,
            },
            "log_annulus" => MollifierFamily::LogAnnulus { eps0 },
            "shifted_power" => MollifierFamily::ShiftedPower {
                beta: beta.ok_or_else(|| Error::Config("shifted_power needs beta".into()))?,
                eps0,
            },
            "shifted_critical" => MollifierFamily::ShiftedCritical { eps0 },
            "shifted_ratio" => MollifierFamily::ShiftedRatio {
                beta: beta.ok_or_else(|| Error::Config("shifted_ratio needs beta".into()))?,
                eps0,
            },
            "profile" => {
                let profile = match self.profile.as_deref() {
                    Some("indicator") | None => RadialProfile::indicator(),
                    Some("triangle") => RadialProfile::triangle(),
                    Some(other) => {
                        return Err(Error::Config(format!("unknown profile '{other}'")))
                    }
                };
                MollifierFamily::ProfileScaled { profile }
            }
            other => return Err(Error::Config(format!("unknown mollifier family '{other}'"))),
        };
        Mollifier::new(self.d, family)
    }
}

/// Kernel family selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    /// `j1 | j2 | j3 | j4 | nu | perturbed | violator`.
    pub kind: String,
    pub d: usize,
    /// Base mollifier for the `nu`, `perturbed` and `violator` kinds
    /// (power-law when omitted).
    pub base: Option<MollifierSpec>,
    /// Tail exponent of `j2`.
    pub beta: Option<f64>,
    /// Comparison constant of the `perturbed` kind.
    pub lambda: Option<f64>,
}

impl KernelSpec {
    pub fn build(&self, seed: u64) -> Result<KernelFamily> {
        let base = || -> Result<Mollifier> {
            match &self.base {
                Some(spec) => {
                    if spec.d != self.d {
                        return Err(Error::Config(
                            "kernel and base mollifier dimensions differ".into(),
                        ));
                    }
                    spec.build()
                }
                None => Ok(Mollifier::power_law(self.d)),
            }
        };
        match self.kind.as_str() {
            "j1" => Ok(KernelFamily::j1(self.d)),
            "j2" => KernelFamily::j2(self.d, self.beta.unwrap_or(1.0)),
            "j3" => Ok(KernelFamily::j3(self.d, RadialTail::gaussian())),
            "j4" => Ok(KernelFamily::j4(self.d)),
            "nu" => Ok(KernelFamily::nu(base()?)),
            "perturbed" => KernelFamily::perturbed(base()?, self.lambda.unwrap_or(2.0), seed),
            "violator" => Ok(KernelFamily::violator(base()?)),
            other => Err(Error::Config(format!("unknown kernel kind '{other}'"))),
        }
    }
}

/// Tolerances with the documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tail_tol: f64,
    pub matrix_tol: f64,
    pub mosco_tol: f64,
    pub solver_tol: f64,
    pub quad_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tail_tol: 1e-10,
            matrix_tol: 1e-3,
            mosco_tol: 5e-3,
            solver_tol: 1e-12,
            quad_tol: 1e-8,
        }
    }
}

/// Kind-specific knobs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentParams {
    /// Ball radius of the second-moment matrices.
    pub delta: Option<f64>,
    /// Moment exponents of the concentration experiment.
    pub betas: Option<Vec<f64>>,
    /// Mollifier scales (concentration / density sweeps).
    pub eps_sweep: Option<Vec<f64>>,
    /// Concentration radius.
    pub radius: Option<f64>,
    /// Resolvent shift.
    pub lambda: Option<f64>,
    /// Test-function id: `linear`, `bump`, `sine`, `indicator_half`, `one`.
    pub test_function: Option<String>,
    /// Translate-and-mollify shift factor.
    pub tau: Option<f64>,
    /// Nonlocal space of the resolvent sweep:
    /// `zero_complement` (Dirichlet pair) or `full` (Neumann-type pair).
    pub space: Option<String>,
    /// Validate the local solver against the closed-form ODE solution
    /// (1D, f = 1, lambda = 1, A = identity).
    pub validate_local_ode: Option<bool>,
}

/// A complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    pub kind: ExperimentKind,
    /// Output file stem; defaults to the kind id.
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub domain: Option<DomainSpec>,
    pub kernel: Option<KernelSpec>,
    /// Mollifier family for experiments operating below the kernel level.
    pub mollifier: Option<MollifierSpec>,
    #[serde(default = "default_sweep")]
    pub alpha_sweep: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub params: ExperimentParams,
}

fn default_sweep() -> Vec<f64> {
    vec![1.5, 1.9, 1.99, 1.999]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or_else(|| self.kind.id())
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != 1 {
            return Err(Error::Config(format!(
                "unsupported spec_version {} (this build understands 1)",
                self.spec_version
            )));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tail_tol", t.tail_tol),
            ("matrix_tol", t.matrix_tol),
            ("mosco_tol", t.mosco_tol),
            ("solver_tol", t.solver_tol),
            ("quad_tol", t.quad_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive")));
            }
        }
        if self.alpha_sweep.is_empty() {
            return Err(Error::Config("alpha_sweep must not be empty".into()));
        }
        for &a in &self.alpha_sweep {
            if !(a > 0.0 && a < 2.0) {
                return Err(Error::Config(format!("alpha {a} outside (0, 2)")));
            }
        }
        if self.alpha_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("alpha_sweep must be strictly increasing".into()));
        }
        match self.kind {
            ExperimentKind::Concentration | ExperimentKind::Density => {
                if self.mollifier.is_none() && self.kernel.is_none() {
                    return Err(Error::Config(format!(
                        "{} needs a [mollifier] (or [kernel]) table",
                        self.kind.id()
                    )));
                }
            }
            ExperimentKind::CheckKernel | ExperimentKind::DiffusionMatrix => {
                if self.kernel.is_none() {
                    return Err(Error::Config(format!(
                        "{} needs a [kernel] table",
                        self.kind.id()
                    )));
                }
            }
            ExperimentKind::BbmLimit | ExperimentKind::CrossTerm | ExperimentKind::Mosco => {
                if self.kernel.is_none() || self.domain.is_none() {
                    return Err(Error::Config(format!(
                        "{} needs [kernel] and [domain] tables",
                        self.kind.id()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_config() {
        let text = r#"
spec_version = 1
kind = "bbm_limit"
seed = 7

[domain]
n = 16
r_trunc = 2.0
[domain.geometry]
shape = "interval"
a = 0.0
b = 1.0

[kernel]
kind = "nu"
d = 1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::BbmLimit);
        assert_eq!(cfg.alpha_sweep, vec![1.5, 1.9, 1.99, 1.999]);
        assert_eq!(cfg.seed, 7);
        cfg.kernel.unwrap().build(cfg.seed).unwrap();
    }

    #[test]
    fn rejects_bad_sweeps_and_tolerances() {
        let bad_sweep = r#"
spec_version = 1
kind = "check_kernel"
alpha_sweep = [1.9, 1.5]
[kernel]
kind = "j1"
d = 1
"#;
        assert!(ExperimentConfig::from_toml(bad_sweep).is_err());
        let bad_tol = r#"
spec_version = 1
kind = "check_kernel"
[tolerances]
mosco_tol = -1.0
[kernel]
kind = "j1"
d = 1
"#;
        assert!(ExperimentConfig::from_toml(bad_tol).is_err());
        let bad_version = r#"
spec_version = 2
kind = "check_kernel"
[kernel]
kind = "j1"
d = 1
"#;
        assert!(ExperimentConfig::from_toml(bad_version).is_err());
    }

    #[test]
    fn kernel_specs_cover_the_catalog() {
        for kind in ["j1", "j2", "j3", "j4", "nu", "perturbed", "violator"] {
            let spec = KernelSpec {
                kind: kind.into(),
                d: 2,
                base: None,
                beta: Some(1.0),
                lambda: Some(2.0),
            };
            spec.build(42).unwrap();
        }
        assert!(KernelSpec {
            kind: "j9".into(),
            d: 1,
            base: None,
            beta: None,
            lambda: None,
        }
        .build(0)
        .is_err());
    }
}
