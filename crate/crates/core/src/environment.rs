//! Stationary ergodic environments `(ω_k)` indexed by the time step.
//!
//! Three generators are provided: a constant sequence, an i.i.d. sequence
//! with a bounded marginal, and a finite-state Markov chain started from a
//! caller-supplied stationary law. Each has a closed-form stationary mean,
//! which is what the annealed drift needs.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, unit_f64, SimRng, Stream};
use rand::SeedableRng;

/// Tolerance on row sums, stationary mass and `πP = π`.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Bounded one-dimensional marginal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Law {
    /// Finitely many atoms; weights must sum to 1.
    Discrete { values: Vec<f64>, weights: Vec<f64> },
    /// Continuous uniform on `[low, high)`.
    Uniform { low: f64, high: f64 },
}

/// How an environment is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    Constant {
        value: f64,
    },
    Iid {
        law: Law,
    },
    Markov {
        states: Vec<f64>,
        transition: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    },
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if p.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution(format!("{what} has a non-finite entry")));
    }
    Ok(())
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Discrete { values, weights } => {
                if values.len() != weights.len() {
                    return Err(Error::InvalidDistribution(format!(
                        "{} values but {} weights",
                        values.len(),
                        weights.len()
                    )));
                }
                check_finite(values, "values")?;
                check_probability_vector(weights, "weights")
            }
            Law::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform needs finite low < high, got [{low}, {high})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Law::Discrete { values, weights } => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
            Law::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Law::Discrete { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Law::Uniform { low, high } => low.abs().max(high.abs()),
        }
    }
}

impl Generator {
    /// Two-state symmetric chain flipping with probability `flip`, stationary law (½, ½).
    pub fn symmetric_two_state(states: [f64; 2], flip: f64) -> Self {
        Generator::Markov {
            states: states.to_vec(),
            transition: vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]],
            stationary: vec![0.5, 0.5],
        }
    }

    pub fn rademacher() -> Self {
        Generator::Iid {
            law: Law::Discrete {
                values: vec![-1.0, 1.0],
                weights: vec![0.5, 0.5],
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Constant { .. } => "constant",
            Generator::Iid { .. } => "iid",
            Generator::Markov { .. } => "markov",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Constant { value } => check_finite(&[*value], "constant"),
            Generator::Iid { law } => law.validate(),
            Generator::Markov {
                states,
                transition,
                stationary,
            } => {
                let m = states.len();
                if m == 0 {
                    return Err(Error::InvalidDistribution("markov chain has no states".into()));
                }
                check_finite(states, "states")?;
                if transition.len() != m || transition.iter().any(|row| row.len() != m) {
                    return Err(Error::NonStochastic(format!("transition matrix must be {m}x{m}")));
                }
                for (r, row) in transition.iter().enumerate() {
                    if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                        return Err(Error::NonStochastic(format!("row {r} has a negative or non-finite entry")));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::NonStochastic(format!("row {r} sums to {s}")));
                    }
                }
                if stationary.len() != m {
                    return Err(Error::InvalidDistribution(format!(
                        "stationary vector has {} entries for {m} states",
                        stationary.len()
                    )));
                }
                check_probability_vector(stationary, "stationary vector")?;
                let defect = (0..m)
                    .map(|j| {
                        let pj: f64 = (0..m).map(|i| stationary[i] * transition[i][j]).sum();
                        (pj - stationary[j]).abs()
                    })
                    .fold(0.0, f64::max);
                if defect > STOCHASTIC_TOL {
                    return Err(Error::StationaryMismatch { defect });
                }
                Ok(())
            }
        }
    }

    /// Exact mean of the stationary marginal.
    pub fn stationary_mean(&self) -> f64 {
        match self {
            Generator::Constant { value } => *value,
            Generator::Iid { law } => law.mean(),
            Generator::Markov { states, stationary, .. } => {
                states.iter().zip(stationary).map(|(s, p)| s * p).sum()
            }
        }
    }

    /// Exact stationary expectation of `g(ω)`, when the marginal has finite support.
    pub fn stationary_expectation(&self, g: impl Fn(f64) -> f64) -> Option<f64> {
        match self {
            Generator::Constant { value } => Some(g(*value)),
            Generator::Iid {
                law: Law::Discrete { values, weights },
            } => Some(values.iter().zip(weights).map(|(&v, w)| g(v) * w).sum()),
            Generator::Iid { law: Law::Uniform { .. } } => None,
            Generator::Markov { states, stationary, .. } => {
                Some(states.iter().zip(stationary).map(|(&s, p)| g(s) * p).sum())
            }
        }
    }

    /// Largest `|ω|` the generator can produce.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Generator::Constant { value } => value.abs(),
            Generator::Iid { law } => law.sup_abs(),
            Generator::Markov { states, .. } => states.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Validates and precomputes sampling tables.
    pub fn sampler(&self) -> Result<EnvSampler> {
        self.validate()?;
        let kind = match self {
            Generator::Constant { value } => SamplerKind::Constant(*value),
            Generator::Iid {
                law: Law::Discrete { values, weights },
            } => SamplerKind::Discrete {
                values: values.clone(),
                cumulative: cumulative(weights),
            },
            Generator::Iid {
                law: Law::Uniform { low, high },
            } => SamplerKind::Uniform {
                low: *low,
                width: high - low,
            },
            Generator::Markov {
                states,
                transition,
                stationary,
            } => SamplerKind::Markov {
                states: states.clone(),
                initial: cumulative(stationary),
                rows: transition.iter().map(|r| cumulative(r)).collect(),
            },
        };
        Ok(EnvSampler { kind })
    }

    /// Independent draws from the stationary marginal.
    pub fn sample_marginal(&self, seed: u64, count: usize) -> Result<Vec<f64>> {
        let sampler = self.sampler()?;
        let mut rng = stream_rng(seed, Stream::OmegaSample, 0);
        Ok((0..count).map(|_| sampler.draw_marginal(&mut rng)).collect())
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Guard against the last partial sum landing a hair below 1.
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Constant(f64),
    Discrete { values: Vec<f64>, cumulative: Vec<f64> },
    Uniform { low: f64, width: f64 },
    Markov { states: Vec<f64>, initial: Vec<f64>, rows: Vec<Vec<f64>> },
}

/// Validated generator ready to fill buffers.
#[derive(Debug, Clone)]
pub struct EnvSampler {
    kind: SamplerKind,
}

impl EnvSampler {
    fn draw_marginal(&self, rng: &mut SimRng) -> f64 {
        match &self.kind {
            SamplerKind::Constant(v) => *v,
            SamplerKind::Discrete { values, cumulative } => values[pick(cumulative, unit_f64(rng.next_u64()))],
            SamplerKind::Uniform { low, width } => low + width * unit_f64(rng.next_u64()),
            SamplerKind::Markov { states, initial, .. } => states[pick(initial, unit_f64(rng.next_u64()))],
        }
    }

    /// Overwrites `out` with `length` values generated from `seed`.
    pub fn fill(&self, seed: u64, length: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(length);
        let mut rng = SimRng::seed_from_u64(seed);
        match &self.kind {
            SamplerKind::Constant(v) => out.resize(length, *v),
            SamplerKind::Markov { states, initial, rows } => {
                if length == 0 {
                    return;
                }
                let mut s = pick(initial, unit_f64(rng.next_u64()));
                out.push(states[s]);
                for _ in 1..length {
                    s = pick(&rows[s], unit_f64(rng.next_u64()));
                    out.push(states[s]);
                }
            }
            _ => out.extend((0..length).map(|_| self.draw_marginal(&mut rng))),
        }
    }
}

/// A materialized realization `ω_0, …, ω_{K−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    values: Vec<f64>,
    generator: Generator,
    seed: u64,
}

/// Generates `length` values of the environment described by `generator`.
///
/// The Markov generator starts from its stationary law, so every generator
/// produces a stationary sequence.
pub fn generate_environment(generator: &Generator, seed: u64, length: usize) -> Result<Environment> {
    if length == 0 {
        return Err(Error::EmptyEnvironment);
    }
    let sampler = generator.sampler()?;
    let mut values = Vec::new();
    sampler.fill(derive_seed(seed, Stream::Environment, 0), length, &mut values);
    Ok(Environment {
        values,
        generator: generator.clone(),
        seed,
    })
}

impl Environment {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Time average `(1/K) Σ g(ω_k)`.
    pub fn ergodic_average(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().map(|&w| g(w)).sum::<f64>() / self.values.len() as f64
    }
}
