//! Experiment recipes: convergence ladders, quenched-vs-annealed comparisons,
//! importance-sampling cross-checks, the modified-at-zero regimes, local-time
//! matching and weight normalization.
//!
//! Every run derives all randomness from one master seed and returns a
//! [`RunReport`] plus per-sample CSV artifacts. Checks carry the name of the
//! tolerance they were judged against.
//!
//! Functional convergence on `D([0, 1])` is examined through the marginals at
//! `t ∈ {¼, ½, ¾, 1}` and the running maximum; only the endpoint enters checks.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::density::{enumerate_exact, importance_estimate, rn_weight, EnvSource};
use crate::ebm::{simulate_origin_local_time_sde, step_count, EbmSampler, EbmSummary};
use crate::environment::{generate_environment, Environment, Generator};
use crate::error::{Error, Result};
use crate::excitation::{annealed_drift, AnnealedDrift, DriftMethod, Excitation};
use crate::occupancy::Occupancy;
use crate::parallel::replicate;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::stats::{ks_critical_two, ks_one_sample, ks_two_sample, EmpiricalSample, MeanVar, ReferenceCdf};
use crate::walk::{ModifiedWalkConfig, PathSummary, WalkModel, WalkSampler};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest replica count accepted for statistical experiments.
pub const MIN_REPLICAS: usize = 1000;

fn zero_environment() -> Generator {
    Generator::Constant { value: 0.0 }
}

fn closed_form() -> DriftMethod {
    DriftMethod::ClosedForm
}

fn default_dt() -> f64 {
    1e-4
}

fn default_exact_steps() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Convergence(ConvergenceSpec),
    QuenchedAnnealed(QuenchedAnnealedSpec),
    ImportanceCrossCheck(ImportanceSpec),
    ModifiedZero(ModifiedZeroSpec),
    LocalTimeMatch(LocalTimeSpec),
    WeightNormalization(WeightSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceTolerances {
    pub final_ks: f64,
    /// Allowed KS increase between ladder rungs, in two-sample critical values.
    pub noise_factor: f64,
    pub c_alpha: f64,
}

impl Default for ConvergenceTolerances {
    fn default() -> Self {
        Self {
            final_ks: 0.02,
            noise_factor: 2.0,
            c_alpha: crate::stats::KS_C_ALPHA_01,
        }
    }
}

/// Walk `X_n` under the annealed law against the EBM with `φ̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub phi: Excitation,
    #[serde(default = "zero_environment")]
    pub environment: Generator,
    #[serde(default = "closed_form")]
    pub drift_method: DriftMethod,
    pub ladder: Vec<usize>,
    pub replicas: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Bin width; `√dt` when absent.
    #[serde(default)]
    pub h: Option<f64>,
    /// Closed-form law of the endpoint, when known.
    #[serde(default)]
    pub reference: Option<ReferenceCdf>,
    #[serde(default)]
    pub tolerances: ConvergenceTolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsTolerance {
    pub ks: f64,
}

impl Default for KsTolerance {
    fn default() -> Self {
        Self { ks: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchedAnnealedSpec {
    pub phi: Excitation,
    pub environment: Generator,
    pub ladder: Vec<usize>,
    pub replicas: usize,
    #[serde(default)]
    pub tolerances: KsTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaTolerance {
    /// Allowed deviation in standard errors.
    pub sigma: f64,
}

impl Default for SigmaTolerance {
    fn default() -> Self {
        Self { sigma: 3.0 }
    }
}

/// `P(X_n(1) ≤ threshold)` by importance sampling and by direct simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceSpec {
    pub phi: Excitation,
    #[serde(default = "zero_environment")]
    pub environment: Generator,
    pub n: usize,
    pub replicas: usize,
    pub threshold: f64,
    #[serde(default)]
    pub tolerances: SigmaTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifiedZeroSpec {
    pub c: f64,
    pub alpha: f64,
    pub n: usize,
    pub replicas: usize,
    /// Time step of the comparison SDE for `α = 1`.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub tolerances: KsTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTimeSpec {
    pub n: usize,
    pub replicas: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub band_epsilon: Option<f64>,
    #[serde(default)]
    pub tolerances: KsTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GirsanovSpec {
    pub dt: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightTolerances {
    pub exact: f64,
    pub sigma: f64,
    pub girsanov_sigma: f64,
}

impl Default for WeightTolerances {
    fn default() -> Self {
        Self {
            exact: 1e-12,
            sigma: 4.0,
            girsanov_sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub phi: Excitation,
    #[serde(default = "zero_environment")]
    pub environment: Generator,
    #[serde(default = "default_exact_steps")]
    pub exact_steps: usize,
    pub ladder: Vec<usize>,
    pub replicas: usize,
    #[serde(default)]
    pub girsanov: Option<GirsanovSpec>,
    #[serde(default)]
    pub tolerances: WeightTolerances,
}

fn misconfigured(msg: impl Into<String>) -> Error {
    Error::Misconfigured(msg.into())
}

fn check_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() {
        return Err(misconfigured("ladder is empty"));
    }
    if ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(misconfigured("ladder must be positive and strictly increasing"));
    }
    Ok(())
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(misconfigured(format!("replicas must be at least {MIN_REPLICAS}, got {replicas}")));
    }
    Ok(())
}

fn check_positive(value: f64, what: &str) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(misconfigured(format!("{what} must be positive, got {value}")));
    }
    Ok(())
}

fn check_phi(phi: &Excitation, env: &Generator) -> Result<()> {
    env.validate()?;
    phi.check_environment(env)
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Convergence(_) => "convergence",
            ExperimentSpec::QuenchedAnnealed(_) => "quenched-annealed",
            ExperimentSpec::ImportanceCrossCheck(_) => "importance-cross-check",
            ExperimentSpec::ModifiedZero(_) => "modified-zero",
            ExperimentSpec::LocalTimeMatch(_) => "local-time-match",
            ExperimentSpec::WeightNormalization(_) => "weight-normalization",
        }
    }

    /// Checks the whole spec without simulating.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentSpec::Convergence(s) => {
                check_phi(&s.phi, &s.environment)?;
                check_ladder(&s.ladder)?;
                check_replicas(s.replicas)?;
                step_count(1.0, s.dt)?;
                if let Some(h) = s.h {
                    check_positive(h, "h")?;
                }
                if let Some(r) = &s.reference {
                    r.validate()?;
                }
                if let DriftMethod::MonteCarlo { samples: 0, .. } = s.drift_method {
                    return Err(misconfigured("monte-carlo drift needs samples >= 1"));
                }
                Ok(())
            }
            ExperimentSpec::QuenchedAnnealed(s) => {
                check_phi(&s.phi, &s.environment)?;
                if !s.phi.depends_on_omega() {
                    return Err(misconfigured(
                        "quenched and annealed laws coincide for an omega-free excitation",
                    ));
                }
                check_ladder(&s.ladder)?;
                check_replicas(s.replicas)
            }
            ExperimentSpec::ImportanceCrossCheck(s) => {
                check_phi(&s.phi, &s.environment)?;
                check_ladder(&[s.n])?;
                check_replicas(s.replicas)
            }
            ExperimentSpec::ModifiedZero(s) => {
                ModifiedWalkConfig { c: s.c, alpha: s.alpha, n: s.n }.validate()?;
                check_replicas(s.replicas)?;
                step_count(1.0, s.dt).map(|_| ())
            }
            ExperimentSpec::LocalTimeMatch(s) => {
                check_ladder(&[s.n])?;
                check_replicas(s.replicas)?;
                step_count(1.0, s.dt)?;
                if let Some(h) = s.h {
                    check_positive(h, "h")?;
                }
                if let Some(e) = s.band_epsilon {
                    check_positive(e, "band_epsilon")?;
                }
                Ok(())
            }
            ExperimentSpec::WeightNormalization(s) => {
                check_phi(&s.phi, &s.environment)?;
                check_ladder(&s.ladder)?;
                check_replicas(s.replicas)?;
                if s.exact_steps > crate::density::MAX_ENUMERATION_STEPS {
                    return Err(Error::TooManySteps {
                        steps: s.exact_steps,
                        max: crate::density::MAX_ENUMERATION_STEPS,
                    });
                }
                if let Some(g) = &s.girsanov {
                    step_count(1.0, g.dt)?;
                    check_replicas(g.replicas)?;
                }
                Ok(())
            }
        }
    }
}

/// One pass/fail decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub tolerance_name: String,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `statistic ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, statistic: f64, tolerance_name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            tolerance_name: tolerance_name.into(),
            tolerance,
            passed: statistic <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub master_seed: u64,
    pub spec: ExperimentSpec,
    pub checks: Vec<Check>,
    pub statistics: serde_json::Value,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A CSV file produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
}

/// Seed of the `label`-th sub-experiment of a run.
pub fn sub_seed(master: u64, label: u32) -> u64 {
    derive_seed(master, Stream::Custom(label), 0)
}

/// Environment used by the walks of a Monte Carlo batch.
#[derive(Debug, Clone, Copy)]
pub enum EnvMode<'a> {
    /// The walk ignores ω.
    Absent,
    /// One realization shared by every replica.
    Fixed(&'a Environment),
    /// A fresh realization per replica from `(seed, Environment, r)`.
    Fresh(&'a Generator),
}

/// `replicas` walk summaries. Replica `r` walks with seed `(seed, Walk, r)`.
pub fn walk_summaries(model: &WalkModel, n: usize, env: EnvMode<'_>, replicas: usize, seed: u64) -> Result<Vec<PathSummary>> {
    let sampler = WalkSampler::new(model.clone(), n)?;
    let needs = sampler.needs_environment();
    if let WalkModel::Excited(phi) = model {
        match env {
            EnvMode::Fixed(e) => phi.check_environment(e.generator())?,
            EnvMode::Fresh(g) => phi.check_environment(g)?,
            EnvMode::Absent => {}
        }
    }
    let env_sampler = match env {
        EnvMode::Fresh(g) if needs => Some(g.sampler()?),
        EnvMode::Absent if needs => return Err(misconfigured("excitation reads an environment but none was given")),
        EnvMode::Fixed(e) if needs && e.len() < n => {
            return Err(Error::EnvironmentTooShort {
                required: n,
                available: e.len(),
            })
        }
        _ => None,
    };
    Ok(replicate(
        replicas,
        || (Occupancy::default(), Vec::<f64>::new()),
        |(occ, buf), r| {
            let omega = match (&env_sampler, env) {
                (Some(s), _) => {
                    s.fill(derive_seed(seed, Stream::Environment, r as u64), n, buf);
                    Some(&buf[..])
                }
                (None, EnvMode::Fixed(e)) if needs => Some(e.values()),
                _ => None,
            };
            sampler.sample(occ, omega, derive_seed(seed, Stream::Walk, r as u64))
        },
    ))
}

/// `replicas` EBM summaries. Replica `r` uses the Gaussian seed `(seed, Brownian, r)`.
pub fn ebm_summaries(sampler: &EbmSampler, replicas: usize, seed: u64) -> Vec<EbmSummary> {
    replicate(
        replicas,
        || sampler.grid(),
        |grid, r| sampler.sample(grid, derive_seed(seed, Stream::Brownian, r as u64)),
    )
}

fn sample_of(values: Vec<f64>) -> Result<EmpiricalSample> {
    EmpiricalSample::new(values)
}

#[derive(Debug, Clone, Serialize)]
struct Moments {
    mean: f64,
    std_error: f64,
}

fn moments(values: &[f64]) -> Moments {
    let m: MeanVar = values.iter().copied().collect();
    Moments {
        mean: m.mean(),
        std_error: m.std_error(),
    }
}

fn walk_csv(rows: &[PathSummary]) -> String {
    let mut s = String::from("replica,x_quarter,x_half,x_three_quarters,x_end,running_max,local_time_at_origin\n");
    for (r, p) in rows.iter().enumerate() {
        let m = p.marginals;
        let _ = writeln!(
            s,
            "{r},{},{},{},{},{},{}",
            m[0], m[1], m[2], m[3], p.running_max, p.local_time_at_origin
        );
    }
    s
}

fn ebm_csv(rows: &[EbmSummary]) -> String {
    let mut s = String::from("replica,y_quarter,y_half,y_three_quarters,y_end,running_max,local_time_at_origin\n");
    for (r, p) in rows.iter().enumerate() {
        let m = p.marginals;
        let _ = writeln!(
            s,
            "{r},{},{},{},{},{},{}",
            m[0], m[1], m[2], m[3], p.running_max, p.local_time_at_origin
        );
    }
    s
}

fn column<T>(rows: &[T], f: impl Fn(&T) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

/// Runs any experiment.
pub fn run(spec: &ExperimentSpec, master_seed: u64) -> Result<RunOutput> {
    spec.validate()?;
    let start = Instant::now();
    let (checks, statistics, artifacts) = match spec {
        ExperimentSpec::Convergence(s) => run_convergence(s, master_seed)?,
        ExperimentSpec::QuenchedAnnealed(s) => run_quenched_vs_annealed(s, master_seed)?,
        ExperimentSpec::ImportanceCrossCheck(s) => run_importance_cross_check(s, master_seed)?,
        ExperimentSpec::ModifiedZero(s) => run_modified_zero(s, master_seed)?,
        ExperimentSpec::LocalTimeMatch(s) => run_local_time_match(s, master_seed)?,
        ExperimentSpec::WeightNormalization(s) => run_weight_normalization(s, master_seed)?,
    };
    Ok(RunOutput {
        report: RunReport {
            schema_version: SCHEMA_VERSION,
            kind: spec.kind().into(),
            master_seed,
            spec: spec.clone(),
            checks,
            statistics,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
        artifacts,
    })
}

type Parts = (Vec<Check>, serde_json::Value, Vec<Artifact>);

#[derive(Debug, Clone, Serialize)]
struct LadderPoint {
    n: usize,
    endpoint: Moments,
    ks_endpoint: f64,
    ks_marginals: [f64; 4],
    ks_running_max: f64,
    ks_reference: Option<f64>,
    critical: f64,
}

/// Convergence ladder of the annealed walk towards the EBM.
pub fn run_convergence(spec: &ConvergenceSpec, master_seed: u64) -> Result<Parts> {
    let h = spec.h.unwrap_or(spec.dt.sqrt());
    let phi_bar: AnnealedDrift = annealed_drift(&spec.phi, &spec.environment, spec.drift_method.clone())?;
    let ebm = ebm_summaries(&EbmSampler::new(&phi_bar, spec.dt, h)?, spec.replicas, sub_seed(master_seed, 0));
    let ebm_marg: Vec<EmpiricalSample> = (0..4)
        .map(|i| sample_of(column(&ebm, |e| e.marginals[i])))
        .collect::<Result<_>>()?;
    let ebm_max = sample_of(column(&ebm, |e| e.running_max))?;
    let model = WalkModel::Excited(spec.phi.clone());
    let mut points = Vec::new();
    let mut last_walk = Vec::new();
    for (i, &n) in spec.ladder.iter().enumerate() {
        let walk = walk_summaries(&model, n, EnvMode::Fresh(&spec.environment), spec.replicas, sub_seed(master_seed, 1 + i as u32))?;
        let ends = column(&walk, PathSummary::endpoint);
        let mut ks_marginals = [0.0; 4];
        for (k, ks) in ks_marginals.iter_mut().enumerate() {
            *ks = ks_two_sample(&sample_of(column(&walk, |w| w.marginals[k]))?, &ebm_marg[k]);
        }
        let end_sample = sample_of(ends.clone())?;
        points.push(LadderPoint {
            n,
            endpoint: moments(&ends),
            ks_endpoint: ks_marginals[3],
            ks_marginals,
            ks_running_max: ks_two_sample(&sample_of(column(&walk, |w| w.running_max))?, &ebm_max),
            ks_reference: spec.reference.as_ref().map(|r| ks_one_sample(&end_sample, r)),
            critical: ks_critical_two(spec.replicas, spec.replicas, spec.tolerances.c_alpha),
        });
        last_walk = walk;
    }
    let tol = &spec.tolerances;
    let top = points.last().expect("ladder is nonempty");
    let mut checks = vec![Check::at_most(
        format!("walk vs ebm endpoint ks at n = {}", top.n),
        top.ks_endpoint,
        "final_ks",
        tol.final_ks,
    )];
    if let Some(ks) = top.ks_reference {
        checks.push(Check::at_most(format!("walk vs reference ks at n = {}", top.n), ks, "final_ks", tol.final_ks));
    }
    for w in points.windows(2) {
        checks.push(Check::at_most(
            format!("ks increase from n = {} to n = {}", w[0].n, w[1].n),
            w[1].ks_endpoint - w[0].ks_endpoint,
            "noise_factor",
            tol.noise_factor * w[1].critical,
        ));
    }
    let ebm_ends = column(&ebm, EbmSummary::endpoint);
    let stats = json!({
        "ladder": points,
        "ebm_endpoint": moments(&ebm_ends),
        "omega_factor": phi_bar.omega_factor(),
        "h": h,
    });
    let artifacts = vec![
        Artifact {
            file_name: "walk_samples.csv".into(),
            contents: walk_csv(&last_walk),
        },
        Artifact {
            file_name: "ebm_samples.csv".into(),
            contents: ebm_csv(&ebm),
        },
    ];
    Ok((checks, stats, artifacts))
}

/// One fixed environment against fresh environments per replica.
pub fn run_quenched_vs_annealed(spec: &QuenchedAnnealedSpec, master_seed: u64) -> Result<Parts> {
    if !spec.phi.depends_on_omega() {
        return Err(misconfigured("quenched and annealed laws coincide for an omega-free excitation"));
    }
    let top = *spec.ladder.last().ok_or_else(|| misconfigured("ladder is empty"))?;
    let env = generate_environment(&spec.environment, sub_seed(master_seed, 0), top)?;
    let model = WalkModel::Excited(spec.phi.clone());
    let mut points = Vec::new();
    let mut csv = String::from("replica,quenched_end,annealed_end\n");
    for (i, &n) in spec.ladder.iter().enumerate() {
        let label = 1 + 2 * i as u32;
        let q = walk_summaries(&model, n, EnvMode::Fixed(&env), spec.replicas, sub_seed(master_seed, label))?;
        let a = walk_summaries(&model, n, EnvMode::Fresh(&spec.environment), spec.replicas, sub_seed(master_seed, label + 1))?;
        let (qe, ae) = (column(&q, PathSummary::endpoint), column(&a, PathSummary::endpoint));
        let ks = ks_two_sample(&sample_of(qe.clone())?, &sample_of(ae.clone())?);
        points.push(json!({
            "n": n,
            "quenched": moments(&qe),
            "annealed": moments(&ae),
            "ks_endpoint": ks,
        }));
        if n == top {
            csv.truncate(csv.find('\n').map_or(0, |i| i + 1));
            for (r, (x, y)) in qe.iter().zip(&ae).enumerate() {
                let _ = writeln!(csv, "{r},{x},{y}");
            }
        }
    }
    let final_ks = points.last().expect("ladder is nonempty")["ks_endpoint"].as_f64().unwrap_or(f64::NAN);
    let checks = vec![Check::at_most(
        format!("quenched vs annealed endpoint ks at n = {top}"),
        final_ks,
        "ks",
        spec.tolerances.ks,
    )];
    let stats = json!({ "ladder": points, "environment_mean": env.ergodic_average(|w| w) });
    Ok((
        checks,
        stats,
        vec![Artifact {
            file_name: "quenched_annealed_samples.csv".into(),
            contents: csv,
        }],
    ))
}

/// Importance-sampling estimate of `P(X_n(1) ≤ threshold)` against direct simulation.
pub fn run_importance_cross_check(spec: &ImportanceSpec, master_seed: u64) -> Result<Parts> {
    let threshold = spec.threshold;
    let est = importance_estimate(
        |p| f64::from(u8::from(p.value_at(1.0) <= threshold)),
        &spec.phi,
        EnvSource::Fresh(&spec.environment),
        spec.n,
        spec.replicas,
        sub_seed(master_seed, 0),
    )?;
    let direct = walk_summaries(
        &WalkModel::Excited(spec.phi.clone()),
        spec.n,
        EnvMode::Fresh(&spec.environment),
        spec.replicas,
        sub_seed(master_seed, 1),
    )?;
    let hits = column(&direct, |p| f64::from(u8::from(p.endpoint() <= threshold)));
    let d = moments(&hits);
    let combined = (est.std_error.powi(2) + d.std_error.powi(2)).sqrt();
    let z = (est.estimate - d.mean).abs() / combined;
    let zw = (est.mean_weight - 1.0).abs() / est.weight_std_error;
    let sigma = spec.tolerances.sigma;
    let checks = vec![
        Check::at_most("importance vs direct estimate, in combined std errors", z, "sigma", sigma),
        Check::at_most("mean weight minus one, in std errors", zw, "sigma", sigma),
    ];
    let stats = json!({
        "importance": { "estimate": est.estimate, "std_error": est.std_error },
        "direct": d,
        "mean_weight": est.mean_weight,
        "weight_std_error": est.weight_std_error,
    });
    let mut csv = Vec::new();
    est.write_csv(&mut csv).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((
        checks,
        stats,
        vec![Artifact {
            file_name: "weights.csv".into(),
            contents: String::from_utf8(csv).expect("csv is utf-8"),
        }],
    ))
}

/// Which limit the modified-at-zero walk is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModifiedRegime {
    /// `α > 1` or `c = 0`: standard normal endpoint.
    Brownian,
    /// `α = 1`: the SDE driven by the local time at 0.
    Critical,
    /// `α ∈ (0, 1)`: the linear law `η t`.
    Ballistic,
}

impl ModifiedRegime {
    pub fn of(c: f64, alpha: f64) -> Self {
        if c == 0.0 || alpha > 1.0 {
            ModifiedRegime::Brownian
        } else if alpha == 1.0 {
            ModifiedRegime::Critical
        } else {
            ModifiedRegime::Ballistic
        }
    }
}

/// Drift coefficient `κ` of `dX = κ L_X(t, 0) dt + dW`, the `α = 1` limit.
///
/// Each visit to 0 adds `2c/n` to the mean step, and visits accumulate like
/// `√n L(t, 0)`, so the drift per unit time is `2c L(t, 0)`.
pub fn critical_coefficient(c: f64) -> f64 {
    2.0 * c
}

/// Endpoint normalization for `α < 1`: `X(n) / n^{1−α/2}` is divided by `√(2c)`
/// so that its limit has the law of `eta_cdf`.
pub fn ballistic_scale(c: f64) -> f64 {
    (2.0 * c).sqrt()
}

/// Scaled endpoints of the modified-at-zero walk, ready for comparison with its limit.
pub fn modified_endpoints(cfg: &ModifiedWalkConfig, replicas: usize, seed: u64) -> Result<(Vec<f64>, Vec<PathSummary>)> {
    let regime = ModifiedRegime::of(cfg.c, cfg.alpha);
    let model = WalkModel::ModifiedAtZero {
        cfg: *cfg,
        exponent: cfg.scaling_exponent(),
    };
    let rows = walk_summaries(&model, cfg.n, EnvMode::Absent, replicas, seed)?;
    let scale = if regime == ModifiedRegime::Ballistic {
        ballistic_scale(cfg.c)
    } else {
        1.0
    };
    Ok((column(&rows, |p| p.endpoint() / scale), rows))
}

/// Endpoints of the `α = 1` limit SDE with band half-width `√dt`.
pub fn critical_sde_endpoints(c: f64, dt: f64, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    step_count(1.0, dt)?;
    let coef = critical_coefficient(c);
    let eps = dt.sqrt();
    replicate(
        replicas,
        || (),
        |_, r| {
            let mut rng = stream_rng(seed, Stream::Brownian, r as u64);
            simulate_origin_local_time_sde(coef, 1.0, dt, eps, &mut rng)
        },
    )
    .into_iter()
    .collect()
}

pub fn run_modified_zero(spec: &ModifiedZeroSpec, master_seed: u64) -> Result<Parts> {
    let cfg = ModifiedWalkConfig {
        c: spec.c,
        alpha: spec.alpha,
        n: spec.n,
    };
    cfg.validate()?;
    let regime = ModifiedRegime::of(spec.c, spec.alpha);
    let (ends, _) = modified_endpoints(&cfg, spec.replicas, sub_seed(master_seed, 0))?;
    let sample = sample_of(ends.clone())?;
    let (name, ks, reference) = match regime {
        ModifiedRegime::Brownian => ("endpoint ks vs standard normal", ks_one_sample(&sample, &ReferenceCdf::StdNormal), None),
        ModifiedRegime::Ballistic => ("scaled endpoint ks vs eta law", ks_one_sample(&sample, &ReferenceCdf::Eta), None),
        ModifiedRegime::Critical => {
            let sde = critical_sde_endpoints(spec.c, spec.dt, spec.replicas, sub_seed(master_seed, 1))?;
            let ks = ks_two_sample(&sample, &sample_of(sde.clone())?);
            ("endpoint ks vs local-time sde", ks, Some(sde))
        }
    };
    let checks = vec![Check::at_most(name, ks, "ks", spec.tolerances.ks)];
    let stats = json!({
        "regime": regime,
        "delta": cfg.delta(),
        "scaling_exponent": cfg.scaling_exponent(),
        "endpoint": moments(&ends),
        "ks": ks,
    });
    let mut csv = String::from("replica,endpoint\n");
    for (r, x) in ends.iter().enumerate() {
        let _ = writeln!(csv, "{r},{x}");
    }
    let mut artifacts = vec![Artifact {
        file_name: "modified_samples.csv".into(),
        contents: csv,
    }];
    if let Some(sde) = reference {
        let mut csv = String::from("replica,endpoint\n");
        for (r, x) in sde.iter().enumerate() {
            let _ = writeln!(csv, "{r},{x}");
        }
        artifacts.push(Artifact {
            file_name: "limit_samples.csv".into(),
            contents: csv,
        });
    }
    Ok((checks, stats, artifacts))
}

/// `ν(n, 0)/√n` of the symmetric walk and `L̂(1, 0)` of Brownian motion against `|N(0, 1)|`.
pub fn run_local_time_match(spec: &LocalTimeSpec, master_seed: u64) -> Result<Parts> {
    let h = spec.h.unwrap_or(spec.dt.sqrt());
    let walk = walk_summaries(&WalkModel::Symmetric, spec.n, EnvMode::Absent, spec.replicas, sub_seed(master_seed, 0))?;
    let mut sampler = EbmSampler::new(&AnnealedDrift::zero(), spec.dt, h)?;
    if let Some(e) = spec.band_epsilon {
        sampler = sampler.with_band(e)?;
    }
    let bm = ebm_summaries(&sampler, spec.replicas, sub_seed(master_seed, 1));
    let walk_l = sample_of(column(&walk, |p| p.local_time_at_origin))?;
    let bm_l = sample_of(column(&bm, |p| p.local_time_at_origin))?;
    let tol = spec.tolerances.ks;
    let mut checks = vec![
        Check::at_most("walk local time at 0 vs half-normal", ks_one_sample(&walk_l, &ReferenceCdf::HalfNormal), "ks", tol),
        Check::at_most("binned local time at 0 vs half-normal", ks_one_sample(&bm_l, &ReferenceCdf::HalfNormal), "ks", tol),
        Check::at_most("walk vs binned local time", ks_two_sample(&walk_l, &bm_l), "ks", tol),
    ];
    if spec.band_epsilon.is_some() {
        let band = sample_of(column(&bm, |p| p.band_at_origin))?;
        checks.push(Check::at_most(
            "band local time at 0 vs half-normal",
            ks_one_sample(&band, &ReferenceCdf::HalfNormal),
            "ks",
            tol,
        ));
    }
    let stats = json!({
        "walk": moments(walk_l.sorted()),
        "binned": moments(bm_l.sorted()),
        "h": h,
    });
    let mut csv = String::from("replica,walk_local_time,binned_local_time,band_local_time\n");
    for (r, (w, b)) in walk.iter().zip(&bm).enumerate() {
        let _ = writeln!(csv, "{r},{},{},{}", w.local_time_at_origin, b.local_time_at_origin, b.band_at_origin);
    }
    Ok((
        checks,
        stats,
        vec![Artifact {
            file_name: "local_time_samples.csv".into(),
            contents: csv,
        }],
    ))
}

/// Largest `|Σ_paths ρ·2^{−s} − 1|` and largest pathwise gap to the enumeration,
/// over `s = 1..=max_steps` at scale `n = s`.
pub fn exact_normalization(phi: &Excitation, env: &Environment, max_steps: usize) -> Result<(f64, f64)> {
    let (mut norm_defect, mut path_defect) = (0.0f64, 0.0f64);
    for steps in 1..=max_steps {
        let law = enumerate_exact(steps, phi, env, steps)?;
        let scale = 0.5f64.powi(steps as i32);
        let mut total = 0.0;
        for code in 0..(1u32 << steps) {
            let w = rn_weight(&law.path(code), phi, env, steps)?;
            total += w.value * scale;
            path_defect = path_defect.max((w.value * scale - law.probability(code)).abs());
        }
        norm_defect = norm_defect.max((total - 1.0).abs());
    }
    Ok((norm_defect, path_defect))
}

pub fn run_weight_normalization(spec: &WeightSpec, master_seed: u64) -> Result<Parts> {
    let tol = &spec.tolerances;
    let env = generate_environment(&spec.environment, sub_seed(master_seed, 0), spec.exact_steps.max(1))?;
    let (norm, path) = exact_normalization(&spec.phi, &env, spec.exact_steps)?;
    let mut checks = vec![
        Check::at_most("exact normalization defect", norm, "exact", tol.exact),
        Check::at_most("enumeration vs weight, pathwise", path, "exact", tol.exact),
    ];
    let mut ladder = Vec::new();
    for (i, &n) in spec.ladder.iter().enumerate() {
        let est = importance_estimate(
            |_| 1.0,
            &spec.phi,
            EnvSource::Fresh(&spec.environment),
            n,
            spec.replicas,
            sub_seed(master_seed, 1 + i as u32),
        )?;
        let z = (est.mean_weight - 1.0).abs() / est.weight_std_error;
        checks.push(Check::at_most(format!("mean weight at n = {n}, in std errors"), z, "sigma", tol.sigma));
        ladder.push(json!({ "n": n, "mean_weight": est.mean_weight, "std_error": est.weight_std_error }));
    }
    let mut stats = json!({ "exact_normalization": norm, "exact_pathwise": path, "ladder": ladder });
    let mut artifacts = Vec::new();
    if let Some(g) = &spec.girsanov {
        let phi_bar = annealed_drift(&spec.phi, &spec.environment, DriftMethod::ClosedForm)?;
        let sampler = EbmSampler::new(&AnnealedDrift::zero(), g.dt, g.dt.sqrt())?.with_probe(&phi_bar);
        let rows = ebm_summaries(&sampler, g.replicas, sub_seed(master_seed, 1000));
        let w = column(&rows, EbmSummary::probe_weight);
        let m = moments(&w);
        checks.push(Check::at_most(
            "mean girsanov weight minus one, in std errors",
            (m.mean - 1.0).abs() / m.std_error,
            "girsanov_sigma",
            tol.girsanov_sigma,
        ));
        stats["girsanov"] = json!(m);
        let mut csv = String::from("replica,weight\n");
        for (r, x) in w.iter().enumerate() {
            let _ = writeln!(csv, "{r},{x}");
        }
        artifacts.push(Artifact {
            file_name: "girsanov_weights.csv".into(),
            contents: csv,
        });
    }
    Ok((checks, stats, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::Profile;

    fn tanh() -> Excitation {
        Excitation::plain(Profile::Tanh { a: 1.0, b: 1.0 })
    }

    #[test]
    fn ladder_validation() {
        assert!(check_ladder(&[]).is_err());
        assert!(check_ladder(&[100, 100]).is_err());
        assert!(check_ladder(&[0, 10]).is_err());
        check_ladder(&[10, 100]).unwrap();
    }

    #[test]
    fn replicas_floor() {
        let spec = ExperimentSpec::Convergence(ConvergenceSpec {
            phi: tanh(),
            environment: zero_environment(),
            drift_method: DriftMethod::ClosedForm,
            ladder: vec![100],
            replicas: 999,
            dt: 1e-3,
            h: None,
            reference: None,
            tolerances: ConvergenceTolerances::default(),
        });
        assert!(matches!(spec.validate(), Err(Error::Misconfigured(_))));
    }

    #[test]
    fn quenched_needs_omega() {
        let spec = QuenchedAnnealedSpec {
            phi: tanh(),
            environment: Generator::rademacher(),
            ladder: vec![100],
            replicas: 1000,
            tolerances: KsTolerance::default(),
        };
        assert!(ExperimentSpec::QuenchedAnnealed(spec.clone()).validate().is_err());
        assert!(run_quenched_vs_annealed(&spec, 0).is_err());
    }

    #[test]
    fn regimes() {
        assert_eq!(ModifiedRegime::of(1.0, 2.0), ModifiedRegime::Brownian);
        assert_eq!(ModifiedRegime::of(0.0, 0.5), ModifiedRegime::Brownian);
        assert_eq!(ModifiedRegime::of(1.0, 1.0), ModifiedRegime::Critical);
        assert_eq!(ModifiedRegime::of(1.0, 0.5), ModifiedRegime::Ballistic);
        assert_eq!(critical_coefficient(0.25), 0.5);
    }

    #[test]
    fn summaries_are_deterministic_and_env_checked() {
        let phi = Excitation::new(Profile::Tanh { a: 1.0, b: 1.0 }, true, 2.0).unwrap();
        let env = Generator::symmetric_two_state([0.0, 2.0], 0.3);
        let model = WalkModel::Excited(phi);
        let a = walk_summaries(&model, 200, EnvMode::Fresh(&env), 50, 3).unwrap();
        let b = walk_summaries(&model, 200, EnvMode::Fresh(&env), 50, 3).unwrap();
        assert_eq!(a, b);
        assert!(walk_summaries(&model, 200, EnvMode::Absent, 5, 3).is_err());
        let short = generate_environment(&env, 1, 100).unwrap();
        assert!(walk_summaries(&model, 200, EnvMode::Fixed(&short), 5, 3).is_err());
    }

    #[test]
    fn exact_normalization_small() {
        let env = generate_environment(&zero_environment(), 0, 8).unwrap();
        let (norm, path) = exact_normalization(&tanh(), &env, 8).unwrap();
        assert!(norm < 1e-12 && path < 1e-12);
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = r#"
kind = "convergence"
ladder = [100, 1000]
replicas = 2000
dt = 0.001

[phi]
family = "tanh"
bound = 1.0
params = { a = 1.0, b = 1.0 }

[reference]
law = "drifted-normal"
mu = 0.0
sigma = 1.0
"#;
        let spec: ExperimentSpec = toml::from_str(text).unwrap();
        spec.validate().unwrap();
        let back: ExperimentSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        assert!(toml::from_str::<ExperimentSpec>("kind = \"convergence\"\nbogus = 1").is_err());
    }
}
