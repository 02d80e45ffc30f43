//! Likelihood ratio of the excited walk against the symmetric walk.
//!
//! For a nearest-neighbour path the density is the product over steps of
//! `2·p_used`, where `p_used` is the transition probability the excited walk
//! actually assigns to the observed step (clamped into `[0, 1]`). Without
//! clamping this is `Π (1 + ε_k·ξ_{k+1})`.

use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use serde::Serialize;

use crate::environment::{EnvSampler, Environment, Generator};
use crate::error::{Error, Result};
use crate::excitation::Excitation;
use crate::occupancy::Occupancy;
use crate::parallel::replicate;
use crate::rng::{derive_seed, unit_f64, SimRng, Stream};
use crate::stats::MeanVar;
use crate::walk::{rescale, step_prob, ErwKernel, LatticePath, ScaledPath};

/// Radon–Nikodym weight `ρ` and its logarithm (`−∞` when some factor is 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathWeight {
    pub value: f64,
    pub log_value: f64,
}

impl PathWeight {
    fn from_log(log_value: f64) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
        }
    }
}

/// Decomposition `log ρ = I1 + I2 + I3` with `I3` reported as an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogDensityTerms {
    /// `n^{-1/2} Σ φ_k ξ_{k+1}`.
    pub i1: f64,
    /// `−(2n)^{-1} Σ φ_k²`.
    pub i2: f64,
    /// `‖φ‖³∞ / (3√n)`.
    pub i3_bound: f64,
}

fn check_horizons(path: &LatticePath, env: &Environment, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("scale n must be positive".into()));
    }
    if path.steps() < n {
        return Err(Error::PathTooShort {
            required: n,
            available: path.steps(),
        });
    }
    if env.len() < n {
        return Err(Error::EnvironmentTooShort {
            required: n,
            available: env.len(),
        });
    }
    Ok(())
}

/// Exact density `dP_X / dP_S` of the first `n` steps of `path`.
pub fn rn_weight(path: &LatticePath, phi: &Excitation, env: &Environment, n: usize) -> Result<PathWeight> {
    check_horizons(path, env, n)?;
    phi.check_environment(env.generator())?;
    let kernel = ErwKernel::new(phi, n, n);
    let mut occ = Occupancy::default();
    let mut log = 0.0;
    let (xs, visits, incs, omega) = (path.positions(), path.visit_counts(), path.increments(), env.values());
    for k in 0..n {
        let i = occ.visit(xs[k]);
        if i != visits[k] {
            return Err(Error::InconsistentVisitCounts { step: k });
        }
        if (xs[k + 1] - xs[k]) != i64::from(incs[k]) {
            return Err(Error::NotNearestNeighbour { step: k });
        }
        let (p, _) = kernel.up_prob(k, xs[k], i, omega[k]);
        let used = if incs[k] > 0 { p } else { 1.0 - p };
        log += (2.0 * used).ln();
    }
    Ok(PathWeight::from_log(log))
}

/// `I1`, `I2` and the remainder envelope for the first `n` steps of `path`.
///
/// Requires `n > ‖φ‖∞²`, which keeps every factor strictly positive and unclamped.
pub fn log_density_terms(path: &LatticePath, phi: &Excitation, env: &Environment, n: usize) -> Result<LogDensityTerms> {
    check_horizons(path, env, n)?;
    let bound = phi.bound();
    if (n as f64) <= bound * bound {
        return Err(Error::ClampingActive {
            n,
            bound_sq: bound * bound,
        });
    }
    let kernel = ErwKernel::new(phi, n, n);
    let scaled = kernel.scaled();
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 0..n {
        let f = scaled.phi(k, path.positions()[k], path.visit_counts()[k], env.values()[k]);
        s1 += f * f64::from(path.increments()[k]);
        s2 += f * f;
    }
    let nf = n as f64;
    Ok(LogDensityTerms {
        i1: s1 / nf.sqrt(),
        i2: -s2 / (2.0 * nf),
        i3_bound: bound.powi(3) / (3.0 * nf.sqrt()),
    })
}

/// Largest number of steps [`enumerate_exact`] accepts.
pub const MAX_ENUMERATION_STEPS: usize = 20;

/// Exact law of the excited walk's first `steps` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    steps: usize,
    /// Indexed by path code: bit `k` set means step `k` goes up.
    probabilities: Vec<f64>,
}

impl ExactLaw {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, code: u32) -> f64 {
        self.probabilities[code as usize]
    }

    /// The path encoded by `code`.
    pub fn path(&self, code: u32) -> LatticePath {
        LatticePath::from_increments(&decode(code, self.steps)).expect("codes decode to unit steps")
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Induced law of `X(steps)`, as (site, probability) in increasing site order.
    pub fn endpoint_law(&self) -> Vec<(i64, f64)> {
        let s = self.steps as i64;
        let mut law = vec![0.0; self.steps + 1];
        for (code, &p) in self.probabilities.iter().enumerate() {
            let ups = i64::from((code as u32).count_ones());
            law[ups as usize] += p;
        }
        law.into_iter()
            .enumerate()
            .map(|(ups, p)| (2 * ups as i64 - s, p))
            .collect()
    }
}

/// `±1` increments of a path code.
pub fn decode(code: u32, steps: usize) -> Vec<i8> {
    (0..steps).map(|k| if code >> k & 1 == 1 { 1 } else { -1 }).collect()
}

/// Enumerates all `2^steps` paths, multiplying transition probabilities.
///
/// Visit counts are recomputed by scanning the prefix at every node, kept
/// separate from the online counters used by simulation and [`rn_weight`].
pub fn enumerate_exact(steps: usize, phi: &Excitation, env: &Environment, n: usize) -> Result<ExactLaw> {
    if steps > MAX_ENUMERATION_STEPS {
        return Err(Error::TooManySteps {
            steps,
            max: MAX_ENUMERATION_STEPS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("scale n must be positive".into()));
    }
    if env.len() < steps {
        return Err(Error::EnvironmentTooShort {
            required: steps,
            available: env.len(),
        });
    }
    phi.check_environment(env.generator())?;
    let mut probabilities = vec![0.0; 1 << steps];
    let mut prefix = vec![0i64; steps + 1];
    fn recurse(
        k: usize,
        code: u32,
        prob: f64,
        prefix: &mut [i64],
        ctx: (&Excitation, &[f64], usize, usize),
        out: &mut [f64],
    ) {
        let (phi, omega, n, steps) = ctx;
        if k == steps {
            out[code as usize] = prob;
            return;
        }
        let x = prefix[k];
        let i = prefix[..=k].iter().filter(|&&y| y == x).count() as u32;
        let p = step_prob(phi, n, k, x, i, omega[k]);
        prefix[k + 1] = x + 1;
        recurse(k + 1, code | (1 << k), prob * p, prefix, ctx, out);
        prefix[k + 1] = x - 1;
        recurse(k + 1, code, prob * (1.0 - p), prefix, ctx, out);
    }
    recurse(0, 0, 1.0, &mut prefix, (phi, env.values(), n, steps), &mut probabilities);
    Ok(ExactLaw { steps, probabilities })
}

/// Where the environment of each importance-sampling replica comes from.
#[derive(Debug, Clone, Copy)]
pub enum EnvSource<'a> {
    /// One fixed realization for all replicas (quenched).
    Fixed(&'a Environment),
    /// A fresh realization per replica (annealed).
    Fresh(&'a Generator),
}

/// One replica of [`importance_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSample {
    pub replica: usize,
    pub weight: f64,
    pub log_weight: f64,
    pub f_value: f64,
    pub i1: f64,
    pub i2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub mean_weight: f64,
    pub weight_std_error: f64,
    pub samples: Vec<WeightSample>,
}

impl ImportanceEstimate {
    /// CSV with header `replica,weight,log_weight,f_value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "replica,weight,log_weight,f_value")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{}", s.replica, s.weight, s.log_weight, s.f_value)?;
        }
        Ok(())
    }
}

/// Estimates `E f(X_n)` on `[0, 1]` from symmetric-walk paths weighted by `ρ_n`.
///
/// Replica `r` draws its walk from `(seed, Walk, r)` and, for
/// [`EnvSource::Fresh`], its environment from `(seed, Environment, r)`.
pub fn importance_estimate<F>(
    f: F,
    phi: &Excitation,
    env: EnvSource<'_>,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<ImportanceEstimate>
where
    F: Fn(&ScaledPath) -> f64 + Sync,
{
    if replicas < 2 {
        return Err(Error::TooFewValues {
            required: 2,
            got: replicas,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("scale n must be positive".into()));
    }
    let sampler: Option<EnvSampler> = match env {
        EnvSource::Fixed(e) => {
            phi.check_environment(e.generator())?;
            if e.len() < n {
                return Err(Error::EnvironmentTooShort {
                    required: n,
                    available: e.len(),
                });
            }
            None
        }
        EnvSource::Fresh(g) => {
            phi.check_environment(g)?;
            Some(g.sampler()?)
        }
    };
    let kernel = ErwKernel::new(phi, n, n);
    let reads_omega = phi.depends_on_omega();
    let samples = replicate(
        replicas,
        || (Occupancy::default(), Vec::<i64>::with_capacity(n + 1), Vec::<f64>::new()),
        |(occ, positions, omega_buf), r| {
            let omega: &[f64] = match (env, &sampler) {
                (EnvSource::Fixed(e), _) => e.values(),
                (EnvSource::Fresh(_), Some(s)) if reads_omega => {
                    s.fill(derive_seed(seed, Stream::Environment, r as u64), n, omega_buf);
                    omega_buf
                }
                _ => &[],
            };
            let mut rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Walk, r as u64));
            occ.clear();
            positions.clear();
            let scaled = kernel.scaled();
            let (mut log, mut s1, mut s2) = (0.0, 0.0, 0.0);
            let mut x = 0i64;
            for k in 0..n {
                positions.push(x);
                let i = occ.visit(x);
                let w = if reads_omega { omega[k] } else { 0.0 };
                let (p, _) = kernel.up_prob(k, x, i, w);
                let up = unit_f64(rng.next_u64()) < 0.5;
                let xi = if up { 1.0 } else { -1.0 };
                log += (2.0 * if up { p } else { 1.0 - p }).ln();
                let fk = scaled.phi(k, x, i, w);
                s1 += fk * xi;
                s2 += fk * fk;
                x += if up { 1 } else { -1 };
            }
            positions.push(x);
            let path = ScaledPath::from_grid(n, positions);
            let nf = n as f64;
            WeightSample {
                replica: r,
                weight: log.exp(),
                log_weight: log,
                f_value: f(&path),
                i1: s1 / nf.sqrt(),
                i2: -s2 / (2.0 * nf),
            }
        },
    );
    let est: MeanVar = samples.iter().map(|s| s.f_value * s.weight).collect();
    let wts: MeanVar = samples.iter().map(|s| s.weight).collect();
    Ok(ImportanceEstimate {
        estimate: est.mean(),
        std_error: est.std_error(),
        mean_weight: wts.mean(),
        weight_std_error: wts.std_error(),
        samples,
    })
}

/// Discretized Girsanov weight `exp(Σ b_j ΔW_j − ½ Σ b_j² dt)`.
pub fn girsanov_weight(wiener_increments: &[f64], drift_path: &[f64], dt: f64) -> Result<PathWeight> {
    if wiener_increments.len() != drift_path.len() {
        return Err(Error::LengthMismatch {
            left: wiener_increments.len(),
            right: drift_path.len(),
        });
    }
    let (mut stoch, mut quad) = (0.0, 0.0);
    for (&dw, &b) in wiener_increments.iter().zip(drift_path) {
        stoch += b * dw;
        quad += b * b;
    }
    Ok(PathWeight::from_log(stoch - 0.5 * quad * dt))
}

/// Convenience wrapper: rescaled symmetric path plus its weight.
pub fn weighted_srw(phi: &Excitation, env: &Environment, n: usize, seed: u64) -> Result<(ScaledPath, PathWeight)> {
    let path = crate::walk::simulate_srw(n, seed);
    let w = rn_weight(&path, phi, env, n)?;
    Ok((rescale(&path, n, 1.0)?, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::generate_environment;
    use crate::excitation::Profile;
    use crate::walk::simulate_srw;

    fn zero_env(len: usize) -> Environment {
        generate_environment(&Generator::Constant { value: 0.0 }, 0, len).unwrap()
    }

    #[test]
    fn zero_phi_gives_unit_weight() {
        let path = simulate_srw(500, 1);
        let w = rn_weight(&path, &Excitation::zero(), &zero_env(500), 500).unwrap();
        assert_eq!(w.value, 1.0);
        assert_eq!(w.log_value, 0.0);
    }

    #[test]
    fn single_up_step() {
        let c = 0.3;
        let phi = Excitation::plain(Profile::Constant { c });
        let path = LatticePath::from_increments(&[1]).unwrap();
        let w = rn_weight(&path, &phi, &zero_env(1), 1).unwrap();
        assert!((w.value - (1.0 + c)).abs() < 1e-15);
    }

    #[test]
    fn weight_zero_when_clamped_step_is_impossible() {
        let phi = Excitation::plain(Profile::Constant { c: 3.0 });
        let path = LatticePath::from_increments(&[-1, 1]).unwrap();
        let w = rn_weight(&path, &phi, &zero_env(2), 1).unwrap();
        assert_eq!(w.value, 0.0);
        assert_eq!(w.log_value, f64::NEG_INFINITY);
    }

    #[test]
    fn corrupted_visit_counts_detected() {
        let path = simulate_srw(20, 3);
        let mut positions = path.positions().to_vec();
        // Shift part of the path by 2: still unit steps except at the seam.
        for p in positions.iter_mut().skip(10) {
            *p += 2;
        }
        assert!(LatticePath::from_positions(&positions).is_err());
    }

    #[test]
    fn horizons_checked() {
        let path = simulate_srw(5, 3);
        assert!(matches!(
            rn_weight(&path, &Excitation::zero(), &zero_env(10), 10),
            Err(Error::PathTooShort { .. })
        ));
        assert!(matches!(
            rn_weight(&path, &Excitation::zero(), &zero_env(3), 5),
            Err(Error::EnvironmentTooShort { .. })
        ));
    }

    #[test]
    fn log_terms_constant_phi() {
        let phi = Excitation::plain(Profile::Constant { c: 1.0 });
        let path = simulate_srw(100, 12);
        let t = log_density_terms(&path, &phi, &zero_env(100), 100).unwrap();
        assert_eq!(t.i2, -0.5);
        assert!((t.i1 - path.endpoint() as f64 / 10.0).abs() < 1e-14);
        let z = log_density_terms(&path, &Excitation::zero(), &zero_env(100), 100).unwrap();
        assert_eq!((z.i1, z.i2, z.i3_bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn log_terms_reject_clamping_regime() {
        let phi = Excitation::plain(Profile::Constant { c: 3.0 });
        let path = simulate_srw(9, 1);
        assert!(matches!(
            log_density_terms(&path, &phi, &zero_env(9), 9),
            Err(Error::ClampingActive { .. })
        ));
    }

    #[test]
    fn enumeration_small_cases() {
        let law = enumerate_exact(1, &Excitation::zero(), &zero_env(1), 1).unwrap();
        assert_eq!(law.probabilities(), &[0.5, 0.5]);
        assert!(enumerate_exact(21, &Excitation::zero(), &zero_env(21), 1).is_err());
    }

    #[test]
    fn enumeration_two_steps_by_hand() {
        // x-linear with a = 1: step 0 at x = 0 has ε = 0, step 1 at x = 1 has ε = 1/n.
        let n = 4;
        let phi = Excitation::plain(Profile::XLinear { a: 1.0, clip: 10.0 });
        let law = enumerate_exact(2, &phi, &zero_env(2), n).unwrap();
        let c0 = 0.0;
        let c1 = (1.0 / 2.0) * (1.0 / 2.0); // n^{-1/2} φ(·, 1/√n, ·) = (1/2)(1/2)
        let up_up = 0.25 * (1.0 + c0) * (1.0 + c1);
        assert!((law.probability(0b11) - up_up).abs() < 1e-15);
        let down_down = 0.25 * (1.0 - c0) * (1.0 + c1);
        assert!((law.probability(0b00) - down_down).abs() < 1e-15);
        let ends = law.endpoint_law();
        assert_eq!(ends.iter().map(|e| e.0).collect::<Vec<_>>(), vec![-2, 0, 2]);
        assert!((ends.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn girsanov_examples() {
        let dw = [0.1, -0.3, 0.05, 0.2];
        let w = girsanov_weight(&dw, &[0.0; 4], 0.01).unwrap();
        assert_eq!(w.value, 1.0);
        let mu = 0.7;
        let dt = 0.25;
        let w = girsanov_weight(&dw, &[mu; 4], dt).unwrap();
        let wt: f64 = dw.iter().sum();
        let expected = (mu * wt - 0.5 * mu * mu * 1.0).exp();
        assert!((w.value - expected).abs() < 1e-14);
        assert!(girsanov_weight(&dw, &[0.0; 3], dt).is_err());
    }

    #[test]
    fn importance_needs_two_replicas() {
        let r = importance_estimate(|_| 1.0, &Excitation::zero(), EnvSource::Fresh(&Generator::rademacher()), 10, 1, 0);
        assert!(r.is_err());
    }

    #[test]
    fn importance_sample_weights_match_rn_weight() {
        let phi = Excitation::plain(Profile::Tanh { a: 1.0, b: 1.0 });
        let gen = Generator::Constant { value: 0.0 };
        let est = importance_estimate(|p| p.value_at(1.0), &phi, EnvSource::Fresh(&gen), 64, 5, 77).unwrap();
        for s in &est.samples {
            let path = simulate_srw(64, 0);
            let _ = path;
            let mut rng = SimRng::seed_from_u64(derive_seed(77, Stream::Walk, s.replica as u64));
            let incs: Vec<i8> = (0..64).map(|_| if unit_f64(rng.next_u64()) < 0.5 { 1 } else { -1 }).collect();
            let p = LatticePath::from_increments(&incs).unwrap();
            let w = rn_weight(&p, &phi, &zero_env(64), 64).unwrap();
            assert_eq!(w.log_value, s.log_weight);
            assert_eq!(s.f_value, p.endpoint() as f64 / 8.0);
        }
    }
}
