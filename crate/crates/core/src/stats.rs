//! Empirical distributions, Kolmogorov–Smirnov distances and Monte Carlo
//! error bars.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Error, Result};

/// `c(α)` for α = 0.01 in the asymptotic KS critical value `c(α)/√N`.
pub const KS_C_ALPHA_01: f64 = 1.63;

/// Sorted, finite, nonempty sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewValues { required: 1, got: 0 });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values in nondecreasing order.
    pub fn sorted(&self) -> &[f64] {
        &self.values
    }

    /// Empirical CDF `#{v ≤ x} / N`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }
}

/// Φ via Abramowitz & Stegun 7.1.26 (|error in erf| ≤ 1.5·10⁻⁷).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [0.254_829_592, -0.284_496_736, 1.421_413_741, -1.453_152_027, 1.061_405_429];
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// `P(η ≤ x) = 1 − exp(−x²/2)` for `x ≥ 0`, zero below.
pub fn eta_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * x * x).exp()
    }
}

/// Reference distributions used by the acceptance checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ReferenceCdf {
    StdNormal,
    /// Law of `|N(0,1)|`: `2Φ(x) − 1` on `x ≥ 0`.
    HalfNormal,
    Eta,
    DriftedNormal { mu: f64, sigma: f64 },
    /// Piecewise-linear CDF through `(xs[i], ps[i])`; 0 left of the table, 1 right of it.
    Table { xs: Vec<f64>, ps: Vec<f64> },
}

impl ReferenceCdf {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceCdf::DriftedNormal { mu, sigma } if !(mu.is_finite() && *sigma > 0.0) => {
                Err(Error::InvalidArgument("drifted normal needs finite mu and sigma > 0".into()))
            }
            ReferenceCdf::Table { xs, ps } => {
                let ok = !xs.is_empty()
                    && xs.len() == ps.len()
                    && xs.windows(2).all(|w| w[0] < w[1])
                    && ps.windows(2).all(|w| w[0] <= w[1])
                    && ps.iter().all(|p| (0.0..=1.0).contains(p));
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(
                        "table CDF needs increasing xs and nondecreasing ps in [0,1]".into(),
                    ))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ReferenceCdf::StdNormal => std_normal_cdf(x),
            ReferenceCdf::HalfNormal => {
                if x < 0.0 {
                    0.0
                } else {
                    (2.0 * std_normal_cdf(x) - 1.0).max(0.0)
                }
            }
            ReferenceCdf::Eta => eta_cdf(x),
            ReferenceCdf::DriftedNormal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            ReferenceCdf::Table { xs, ps } => {
                if x < xs[0] {
                    return 0.0;
                }
                if x >= xs[xs.len() - 1] {
                    return 1.0;
                }
                let j = xs.partition_point(|&v| v <= x);
                let (x0, x1, p0, p1) = (xs[j - 1], xs[j], ps[j - 1], ps[j]);
                p0 + (p1 - p0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// One-sample KS distance `sup_x |F_N(x) − F(x)|` for a continuous `F`.
pub fn ks_one_sample(sample: &EmpiricalSample, cdf: &ReferenceCdf) -> f64 {
    let n = sample.len() as f64;
    sample
        .sorted()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.eval(x);
            ((i + 1) as f64 / n - f).abs().max((f - i as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS distance between the empirical CDFs.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let (xa, xb) = (a.sorted(), b.sorted());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `c(α)/√N`.
pub fn ks_critical_one(n: usize, c_alpha: f64) -> f64 {
    c_alpha / (n as f64).sqrt()
}

/// `c(α)·√((n+m)/(n·m))`.
pub fn ks_critical_two(n: usize, m: usize, c_alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    c_alpha * ((n + m) / (n * m)).sqrt()
}

/// Streaming mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al.).
    pub fn merge(&mut self, other: &MeanVar) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::new();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Sample mean and standard error `s/√N`, computed in one pass.
pub fn mc_mean_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            required: 2,
            got: values.len(),
        });
    }
    let acc: MeanVar = values.iter().copied().collect();
    Ok((acc.mean(), acc.std_error()))
}

/// Time average `(1/n) Σ f(state_k, ω_k)` along a trajectory.
pub fn ergodic_time_average<S>(f: impl Fn(&S, f64) -> f64, trajectory: &[S], env: &Environment) -> Result<f64> {
    if trajectory.len() != env.len() {
        return Err(Error::LengthMismatch {
            left: trajectory.len(),
            right: env.len(),
        });
    }
    if trajectory.is_empty() {
        return Err(Error::TooFewValues { required: 1, got: 0 });
    }
    let sum: f64 = trajectory.iter().zip(env.values()).map(|(s, &w)| f(s, w)).sum();
    Ok(sum / trajectory.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_environment, Generator};

    fn sample(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::new(v.to_vec()).unwrap()
    }

    fn uniform01() -> ReferenceCdf {
        ReferenceCdf::Table {
            xs: vec![0.0, 1.0],
            ps: vec![0.0, 1.0],
        }
    }

    #[test]
    fn one_sample_single_point() {
        assert_eq!(ks_one_sample(&sample(&[0.5]), &uniform01()), 0.5);
    }

    #[test]
    fn one_sample_at_midpoint_quantiles() {
        let n = 200;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let d = ks_one_sample(&sample(&xs), &uniform01());
        assert!((d - 0.5 / n as f64).abs() < 1e-12, "{d}");
    }

    #[test]
    fn two_sample_examples() {
        let a = sample(&[0.3, -1.0, 2.0, 2.0]);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&sample(&[0.0]), &sample(&[1.0])), 1.0);
        // Ties across samples are handled jointly.
        assert_eq!(ks_two_sample(&sample(&[1.0, 2.0]), &sample(&[1.0, 3.0])), 0.5);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(EmpiricalSample::new(vec![]).is_err());
        assert!(EmpiricalSample::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_cdf(0.0), 0.0);
        assert_eq!(eta_cdf(-3.0), 0.0);
        assert!((eta_cdf(1.0) - 0.393_469_340_287_366_6).abs() < 1e-15);
        assert_eq!(eta_cdf(50.0), 1.0);
    }

    #[test]
    fn eta_is_monotone_on_grid() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -1.0 + 8.0 * i as f64 / 10_000.0;
            let v = eta_cdf(x);
            assert!(v >= prev && (0.0..1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn normal_cdf_against_quadrature() {
        // Composite Simpson on the density from -10.
        let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &x in &[-3.0, -1.2, -0.3, 0.0, 0.4, 1.0, 2.5] {
            let (a, m) = (-10.0, 20_000);
            let h = (x - a) / m as f64;
            let mut s = density(a) + density(x);
            for i in 1..m {
                s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let q = s * h / 3.0;
            assert!((std_normal_cdf(x) - q).abs() < 2e-7, "x={x}");
        }
    }

    #[test]
    fn reference_cdfs_are_monotone_with_limits() {
        let cdfs = [
            ReferenceCdf::StdNormal,
            ReferenceCdf::HalfNormal,
            ReferenceCdf::Eta,
            ReferenceCdf::DriftedNormal { mu: 1.0, sigma: 2.0 },
            uniform01(),
        ];
        for c in &cdfs {
            c.validate().unwrap();
            assert!(c.eval(-1e6) < 1e-12);
            assert!(c.eval(1e6) > 1.0 - 1e-12);
            let mut prev = 0.0;
            for i in 0..2000 {
                let v = c.eval(-10.0 + 0.01 * i as f64);
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
        assert!(ReferenceCdf::DriftedNormal { mu: 0.0, sigma: 0.0 }.validate().is_err());
    }

    #[test]
    fn mean_se_examples() {
        assert_eq!(mc_mean_se(&[1.0, 1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, se) = mc_mean_se(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert!(mc_mean_se(&[1.0]).is_err());
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole: MeanVar = xs.iter().copied().collect();
        let mut left: MeanVar = xs[..333].iter().copied().collect();
        let right: MeanVar = xs[333..].iter().copied().collect();
        left.merge(&right);
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn ergodic_average_examples() {
        let env = generate_environment(&Generator::Constant { value: 0.3 }, 0, 5).unwrap();
        let traj = [2.0; 5];
        assert_eq!(ergodic_time_average(|_, _| 1.0, &traj, &env).unwrap(), 1.0);
        let v = ergodic_time_average(|s: &f64, w| s * w, &traj, &env).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        assert!(ergodic_time_average(|_, _| 1.0, &traj[..3], &env).is_err());
    }
}
