//! Excitation functions `φ(t, x, l, ω)` and their annealed averages.
//!
//! Functions come from a registry of named parametric families so that a
//! run configuration can describe them. Each family is a profile in
//! `(t, x, l)`; the ω-modulated variant multiplies the profile by `ω`, which
//! makes the annealed average `φ̄ = E[ω] · profile` available in closed form.
//!
//! | family        | profile                  | params    | continuous |
//! |---------------|--------------------------|-----------|------------|
//! | `constant`    | `c`                      | `c`       | yes        |
//! | `x-linear`    | `clamp(a·x, −clip, clip)`| `a, clip` | yes        |
//! | `l-threshold` | `a · 1{l < l0}`          | `a, l0`   | **no**     |
//! | `tanh`        | `a · tanh(b·l)`          | `a, b`    | yes        |
//! | `l-linear`    | `clamp(a·l, −clip, clip)`| `a, clip` | yes        |
//!
//! `l-threshold` is discontinuous in `l` and sits outside the regularity
//! class of the diffusion limit. It is kept as a stress case.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::environment::Generator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant { c: f64 },
    XLinear { a: f64, clip: f64 },
    LThreshold { a: f64, l0: f64 },
    Tanh { a: f64, b: f64 },
    LLinear { a: f64, clip: f64 },
}

/// Registry entry describing one family.
#[derive(Debug, Clone, Copy)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub defaults: &'static [f64],
    pub continuous: bool,
    pub summary: &'static str,
}

pub const REGISTRY: &[FamilyInfo] = &[
    FamilyInfo {
        name: "constant",
        params: &["c"],
        defaults: &[1.0],
        continuous: true,
        summary: "c",
    },
    FamilyInfo {
        name: "x-linear",
        params: &["a", "clip"],
        defaults: &[1.0, 1.0],
        continuous: true,
        summary: "a*x clipped to [-clip, clip]",
    },
    FamilyInfo {
        name: "l-threshold",
        params: &["a", "l0"],
        defaults: &[1.0, 0.5],
        continuous: false,
        summary: "a if l < l0 else 0 (discontinuous stress case)",
    },
    FamilyInfo {
        name: "tanh",
        params: &["a", "b"],
        defaults: &[1.0, 1.0],
        continuous: true,
        summary: "a*tanh(b*l)",
    },
    FamilyInfo {
        name: "l-linear",
        params: &["a", "clip"],
        defaults: &[1.0, 1.0],
        continuous: true,
        summary: "a*l clipped to [-clip, clip]",
    },
];

pub fn family_info(name: &str) -> Option<&'static FamilyInfo> {
    REGISTRY.iter().find(|f| f.name == name)
}

impl Profile {
    pub fn family(&self) -> &'static str {
        match self {
            Profile::Constant { .. } => "constant",
            Profile::XLinear { .. } => "x-linear",
            Profile::LThreshold { .. } => "l-threshold",
            Profile::Tanh { .. } => "tanh",
            Profile::LLinear { .. } => "l-linear",
        }
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Profile::Constant { c } => vec![("c", c)],
            Profile::XLinear { a, clip } => vec![("a", a), ("clip", clip)],
            Profile::LThreshold { a, l0 } => vec![("a", a), ("l0", l0)],
            Profile::Tanh { a, b } => vec![("a", a), ("b", b)],
            Profile::LLinear { a, clip } => vec![("a", a), ("clip", clip)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn from_params(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let info = family_info(family).ok_or_else(|| Error::UnknownFamily(family.to_string()))?;
        if let Some(extra) = params.keys().find(|k| !info.params.contains(&k.as_str())) {
            return Err(Error::InvalidExcitation {
                family: family.into(),
                reason: format!("unknown parameter `{extra}`"),
            });
        }
        let get = |name: &str| -> Result<f64> {
            let v = *params.get(name).ok_or_else(|| Error::InvalidExcitation {
                family: family.into(),
                reason: format!("missing parameter `{name}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidExcitation {
                    family: family.into(),
                    reason: format!("parameter `{name}` is not finite"),
                });
            }
            Ok(v)
        };
        let profile = match family {
            "constant" => Profile::Constant { c: get("c")? },
            "x-linear" => Profile::XLinear {
                a: get("a")?,
                clip: get("clip")?,
            },
            "l-threshold" => Profile::LThreshold {
                a: get("a")?,
                l0: get("l0")?,
            },
            "tanh" => Profile::Tanh { a: get("a")?, b: get("b")? },
            "l-linear" => Profile::LLinear {
                a: get("a")?,
                clip: get("clip")?,
            },
            _ => unreachable!("registry and match disagree"),
        };
        if let Profile::XLinear { clip, .. } | Profile::LLinear { clip, .. } = profile {
            if clip < 0.0 {
                return Err(Error::InvalidExcitation {
                    family: family.into(),
                    reason: "clip must be nonnegative".into(),
                });
            }
        }
        Ok(profile)
    }

    #[inline(always)]
    pub fn eval(&self, _t: f64, x: f64, l: f64) -> f64 {
        match *self {
            Profile::Constant { c } => c,
            Profile::XLinear { a, clip } => (a * x).clamp(-clip, clip),
            Profile::LThreshold { a, l0 } => {
                if l < l0 {
                    a
                } else {
                    0.0
                }
            }
            Profile::Tanh { a, b } => a * (b * l).tanh(),
            Profile::LLinear { a, clip } => (a * l).clamp(-clip, clip),
        }
    }

    /// Exact supremum of `|profile|` over the whole domain.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Profile::Constant { c } => c.abs(),
            Profile::XLinear { a, clip } | Profile::LLinear { a, clip } => {
                if a == 0.0 {
                    0.0
                } else {
                    clip
                }
            }
            Profile::LThreshold { a, .. } => a.abs(),
            Profile::Tanh { a, b } => {
                if b == 0.0 {
                    0.0
                } else {
                    a.abs()
                }
            }
        }
    }

    /// True when the profile reads neither `t` nor `x`.
    pub fn level_only(&self) -> bool {
        !matches!(self, Profile::XLinear { .. })
    }
}

/// Serialized form of an [`Excitation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub bound: f64,
    #[serde(default)]
    pub omega_modulated: bool,
}

/// The excitation function with its declared sup-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExcitationConfig", into = "ExcitationConfig")]
pub struct Excitation {
    profile: Profile,
    bound: f64,
    omega_modulated: bool,
}

impl TryFrom<ExcitationConfig> for Excitation {
    type Error = Error;

    fn try_from(cfg: ExcitationConfig) -> Result<Self> {
        let profile = Profile::from_params(&cfg.family, &cfg.params)?;
        Excitation::new(profile, cfg.omega_modulated, cfg.bound)
    }
}

impl From<Excitation> for ExcitationConfig {
    fn from(e: Excitation) -> Self {
        ExcitationConfig {
            family: e.profile.family().to_string(),
            params: e.profile.params(),
            bound: e.bound,
            omega_modulated: e.omega_modulated,
        }
    }
}

impl Excitation {
    /// Builds an excitation. For ω-free functions the declared bound must
    /// dominate the profile; ω-modulated bounds are checked against an
    /// environment with [`Excitation::check_environment`].
    pub fn new(profile: Profile, omega_modulated: bool, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidExcitation {
                family: profile.family().into(),
                reason: format!("bound must be finite and nonnegative, got {bound}"),
            });
        }
        if !omega_modulated && profile.sup_abs() > bound {
            return Err(Error::InvalidExcitation {
                family: profile.family().into(),
                reason: format!("declared bound {bound} is below sup |phi| = {}", profile.sup_abs()),
            });
        }
        Ok(Self {
            profile,
            bound,
            omega_modulated,
        })
    }

    /// ω-free member of a family with its tight bound.
    pub fn plain(profile: Profile) -> Self {
        Self::new(profile, false, profile.sup_abs()).expect("tight bound is valid")
    }

    pub fn zero() -> Self {
        Self::plain(Profile::Constant { c: 0.0 })
    }

    /// Registry family with its default parameters.
    pub fn from_registry(name: &str, omega_modulated: bool, bound: Option<f64>) -> Result<Self> {
        let info = family_info(name).ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
        let params = info
            .params
            .iter()
            .zip(info.defaults)
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let profile = Profile::from_params(name, &params)?;
        Self::new(profile, omega_modulated, bound.unwrap_or_else(|| profile.sup_abs()))
    }

    pub fn check_environment(&self, generator: &Generator) -> Result<()> {
        if self.omega_modulated {
            let sup = self.profile.sup_abs() * generator.sup_abs();
            if sup > self.bound * (1.0 + 1e-12) {
                return Err(Error::InvalidExcitation {
                    family: self.profile.family().into(),
                    reason: format!(
                        "declared bound {} is below sup |phi| = {sup} for this environment",
                        self.bound
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn depends_on_omega(&self) -> bool {
        self.omega_modulated
    }

    pub fn config(&self) -> ExcitationConfig {
        self.clone().into()
    }

    #[inline(always)]
    pub fn eval(&self, t: f64, x: f64, l: f64, omega: f64) -> f64 {
        let base = self.profile.eval(t, x, l);
        if self.omega_modulated {
            base * omega
        } else {
            base
        }
    }
}

/// Arguments `(k/n, x/√n, i/√n)` at scale `n`.
#[inline(always)]
pub(crate) fn scaled_args(inv_n: f64, inv_sqrt_n: f64, k: usize, x: i64, i: u32) -> (f64, f64, f64) {
    (k as f64 * inv_n, x as f64 * inv_sqrt_n, f64::from(i) * inv_sqrt_n)
}

#[inline(always)]
pub(crate) fn inv_sqrt(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Per-step drift `ε = n^{-1/2} φ(k/n, x/√n, i/√n, ω_k)`. Not clamped.
pub fn make_epsilon(phi: &Excitation, n: usize, k: usize, x: i64, i: u32, omega_k: f64) -> f64 {
    debug_assert!(n >= 1 && i >= 1);
    let inv_sqrt_n = inv_sqrt(n);
    let (t, xs, l) = scaled_args(1.0 / n as f64, inv_sqrt_n, k, x, i);
    inv_sqrt_n * phi.eval(t, xs, l, omega_k)
}

/// `φ` at a fixed scale `n`, with level-only profiles tabulated by visit count.
///
/// Returns exactly the same bits as [`make_epsilon`].
#[derive(Debug, Clone)]
pub struct ScaledExcitation {
    phi: Excitation,
    inv_n: f64,
    inv_sqrt_n: f64,
    table: Vec<f64>,
}

impl ScaledExcitation {
    /// `max_visits` sizes the lookup table; larger counts fall back to direct evaluation.
    pub fn new(phi: &Excitation, n: usize, max_visits: usize) -> Self {
        let inv_sqrt_n = inv_sqrt(n);
        let table = if phi.profile.level_only() {
            (0..=max_visits as u32)
                .map(|j| phi.profile.eval(0.0, 0.0, f64::from(j) * inv_sqrt_n))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            phi: phi.clone(),
            inv_n: 1.0 / n as f64,
            inv_sqrt_n,
            table,
        }
    }

    pub fn excitation(&self) -> &Excitation {
        &self.phi
    }

    /// Unscaled `φ(k/n, x/√n, i/√n, ω)`.
    #[inline(always)]
    pub fn phi(&self, k: usize, x: i64, i: u32, omega: f64) -> f64 {
        let base = match self.table.get(i as usize) {
            Some(&v) => v,
            None => {
                let (t, xs, l) = scaled_args(self.inv_n, self.inv_sqrt_n, k, x, i);
                self.phi.profile.eval(t, xs, l)
            }
        };
        if self.phi.omega_modulated {
            base * omega
        } else {
            base
        }
    }

    #[inline(always)]
    pub fn epsilon(&self, k: usize, x: i64, i: u32, omega: f64) -> f64 {
        self.inv_sqrt_n * self.phi(k, x, i, omega)
    }

    pub fn inv_sqrt_n(&self) -> f64 {
        self.inv_sqrt_n
    }
}

/// How `φ̄` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DriftMethod {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Annealed drift `φ̄(t, x, l) = E φ(t, x, l, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedDrift {
    phi: Excitation,
    method: DriftMethod,
    /// Multiplier of the profile: 1 for ω-free φ, otherwise (an estimate of) E[ω].
    omega_factor: f64,
    /// Standard deviation of the ω sample (zero for closed form).
    omega_sd: f64,
    samples: usize,
}

/// Averages `phi` over the stationary marginal of `generator`.
///
/// The Monte Carlo method draws its ω sample once; since every registered
/// family is linear in ω, the sample average of `φ(·, ω_m)` equals
/// `mean(ω_m) · profile` and evaluation stays O(1).
pub fn annealed_drift(phi: &Excitation, generator: &Generator, method: DriftMethod) -> Result<AnnealedDrift> {
    generator.validate()?;
    phi.check_environment(generator)?;
    let (omega_factor, omega_sd, samples) = match (&method, phi.omega_modulated) {
        (_, false) => (1.0, 0.0, 0),
        (DriftMethod::ClosedForm, true) => (generator.stationary_mean(), 0.0, 0),
        (DriftMethod::MonteCarlo { samples, seed }, true) => {
            if *samples == 0 {
                return Err(Error::InvalidArgument("monte-carlo annealing needs samples >= 1".into()));
            }
            let draws = generator.sample_marginal(*seed, *samples)?;
            let m = draws.len() as f64;
            let mean = draws.iter().sum::<f64>() / m;
            let sd = if draws.len() > 1 {
                (draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            (mean, sd, *samples)
        }
    };
    Ok(AnnealedDrift {
        phi: phi.clone(),
        method,
        omega_factor,
        omega_sd,
        samples,
    })
}

impl AnnealedDrift {
    /// `φ̄` for an ω-free function (the identity average).
    pub fn from_plain(phi: &Excitation) -> Result<Self> {
        if phi.omega_modulated {
            return Err(Error::InvalidArgument("ω-modulated excitation needs an environment".into()));
        }
        annealed_drift(phi, &Generator::Constant { value: 0.0 }, DriftMethod::ClosedForm)
    }

    pub fn zero() -> Self {
        Self::from_plain(&Excitation::zero()).expect("zero drift")
    }

    pub fn excitation(&self) -> &Excitation {
        &self.phi
    }

    pub fn method(&self) -> &DriftMethod {
        &self.method
    }

    /// Multiplier applied to the profile.
    pub fn omega_factor(&self) -> f64 {
        self.omega_factor
    }

    #[inline(always)]
    pub fn eval_bar(&self, t: f64, x: f64, l: f64) -> f64 {
        let base = self.phi.profile.eval(t, x, l);
        if self.phi.omega_modulated {
            self.omega_factor * base
        } else {
            base
        }
    }

    /// Monte Carlo standard error of `eval_bar` at a point (zero when exact).
    pub fn standard_error(&self, t: f64, x: f64, l: f64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.phi.profile.eval(t, x, l).abs() * self.omega_sd / (self.samples as f64).sqrt()
        }
    }

    /// `φ̄` tabulated at levels `l = j·quantum`, `j = 0..=max_count`, for level-only profiles.
    pub(crate) fn level_table(&self, quantum: f64, max_count: usize) -> Option<Vec<f64>> {
        if !self.phi.profile.level_only() {
            return None;
        }
        Some(
            (0..=max_count as u32)
                .map(|j| self.eval_bar(0.0, 0.0, f64::from(j) * quantum))
                .collect(),
        )
    }
}
