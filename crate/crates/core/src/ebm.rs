//! Excited Brownian motion `dY = φ̄(t, Y, L_Y(t, Y)) dt + dW` by Euler–Maruyama.
//!
//! The local time is estimated online on a grid of bins of width `h`
//! centered at multiples of `h`. Each time step credits `dt` of occupation
//! time to the bin holding the current position, and the estimate is
//! `L̂ = (time in bin) / h`. The grid stores integer step counts, so the
//! occupation identity `Σ L̂·h = elapsed` holds up to a single rounding.
//!
//! At step `j` the current bin is credited before it is read, mirroring the
//! walk where the visit count `i_k` includes the current visit.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::excitation::AnnealedDrift;
use crate::occupancy::Occupancy;
use crate::rng::{stream_rng, SimRng, Stream};
use crate::walk::SUMMARY_TIMES;

/// Binned occupation-time field.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeGrid {
    h: f64,
    inv_h: f64,
    dt: f64,
    counts: Occupancy,
}

impl LocalTimeGrid {
    pub fn new(h: f64, dt: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("bin width must be positive, got {h}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            h,
            inv_h: 1.0 / h,
            dt,
            counts: Occupancy::with_half_width(64),
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }

    /// Index of the bin `[(b − ½)h, (b + ½)h)` containing `y`.
    #[inline(always)]
    pub fn bin(&self, y: f64) -> i64 {
        (y * self.inv_h + 0.5).floor() as i64
    }

    /// Credits one time step to the bin of `y`; returns the bin's new step count.
    #[inline(always)]
    pub fn credit(&mut self, y: f64) -> u32 {
        self.counts.visit(self.bin(y))
    }

    /// Local time per step credited to a bin: `dt / h`.
    pub fn quantum(&self) -> f64 {
        self.dt / self.h
    }

    /// `L̂` at the bin containing `x`.
    pub fn value(&self, x: f64) -> f64 {
        self.value_bin(self.bin(x))
    }

    pub fn value_bin(&self, bin: i64) -> f64 {
        f64::from(self.counts.get(bin)) * self.quantum()
    }

    /// Number of credited steps.
    pub fn steps(&self) -> u64 {
        self.counts.total()
    }

    /// `(center, L̂)` for every visited bin, in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let q = self.quantum();
        self.counts.iter().map(move |(b, c)| (b as f64 * self.h, f64::from(c) * q))
    }

    /// CSV with header `x_center,L`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x_center,L")?;
        for (x, l) in self.iter() {
            writeln!(w, "{x},{l}")?;
        }
        Ok(())
    }
}

/// `|Σ_bins L̂·h − elapsed|`.
pub fn local_time_identity_check(grid: &LocalTimeGrid, elapsed: f64) -> f64 {
    let mass: f64 = grid.iter().map(|(_, l)| l * grid.h).sum();
    (mass - elapsed).abs()
}

/// One Euler–Maruyama trajectory on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EbmPath {
    dt: f64,
    values: Vec<f64>,
    noise: Vec<f64>,
    drift_samples: Vec<f64>,
    local_samples: Vec<f64>,
    local_field: LocalTimeGrid,
}

impl EbmPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.noise.len()
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    /// `Y(t_j)` for `j = 0..=steps`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn endpoint(&self) -> f64 {
        *self.values.last().expect("path holds Y(0)")
    }

    /// Brownian increments `ΔW_j`.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// `φ̄` used at each step.
    pub fn drift_samples(&self) -> &[f64] {
        &self.drift_samples
    }

    /// `L̂(t_j, Y_j)` read at each step.
    pub fn local_samples(&self) -> &[f64] {
        &self.local_samples
    }

    /// The grid at time `T`.
    pub fn local_field(&self) -> &LocalTimeGrid {
        &self.local_field
    }

    /// CSV with header `t,Y,L_at_Y`. The last row reads the final grid.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,Y,L_at_Y")?;
        for (j, y) in self.values.iter().enumerate() {
            let l = match self.local_samples.get(j) {
                Some(&l) => l,
                None => self.local_field.value(*y),
            };
            writeln!(w, "{},{y},{l}", j as f64 * self.dt)?;
        }
        Ok(())
    }
}

/// Number of steps `T/dt`, which must be an integer up to rounding.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// Drift lookup: tabulated by step count for level-only profiles.
#[derive(Debug, Clone)]
struct DriftEval {
    drift: AnnealedDrift,
    quantum: f64,
    table: Option<Vec<f64>>,
}

impl DriftEval {
    fn new(drift: &AnnealedDrift, quantum: f64, max_count: usize) -> Self {
        Self {
            drift: drift.clone(),
            quantum,
            table: drift.level_table(quantum, max_count),
        }
    }

    #[inline(always)]
    fn eval(&self, t: f64, y: f64, count: u32) -> f64 {
        if let Some(v) = self.table.as_ref().and_then(|tb| tb.get(count as usize)) {
            return *v;
        }
        self.drift.eval_bar(t, y, f64::from(count) * self.quantum)
    }
}

/// Simulates the excited Brownian motion with drift `phi_bar`.
///
/// The Gaussian stream is `(seed, Brownian, 0)`.
pub fn simulate_ebm(phi_bar: &AnnealedDrift, horizon: f64, dt: f64, h: f64, seed: u64) -> Result<EbmPath> {
    let steps = step_count(horizon, dt)?;
    let mut grid = LocalTimeGrid::new(h, dt)?;
    let eval = DriftEval::new(phi_bar, grid.quantum(), steps);
    let mut rng = stream_rng(seed, Stream::Brownian, 0);
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut noise = Vec::with_capacity(steps);
    let mut drift_samples = Vec::with_capacity(steps);
    let mut local_samples = Vec::with_capacity(steps);
    let mut y = 0.0;
    values.push(y);
    for j in 0..steps {
        let c = grid.credit(y);
        let d = eval.eval(j as f64 * dt, y, c);
        let z: f64 = StandardNormal.sample(&mut rng);
        let dw = sqrt_dt * z;
        y += d * dt + dw;
        values.push(y);
        noise.push(dw);
        drift_samples.push(d);
        local_samples.push(f64::from(c) * grid.quantum());
    }
    Ok(EbmPath {
        dt,
        values,
        noise,
        drift_samples,
        local_samples,
        local_field: grid,
    })
}

/// `(1/2ε) Σ_{j<N} dt·1{|Y_j − x| < ε}` over the grid values `Y_0..Y_N`.
pub fn local_time_band(values: &[f64], dt: f64, x: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("band half-width must be positive, got {epsilon}")));
    }
    let n = values.len().saturating_sub(1);
    let hits = values[..n].iter().filter(|&&y| (y - x).abs() < epsilon).count();
    Ok(hits as f64 * dt / (2.0 * epsilon))
}

/// Second EBM implementation: the drift reads the band estimator
/// `(1/2ε) Σ_{i≤j} dt·1{|Y_i − Y_j| < ε}` recomputed from all past positions.
///
/// Shares the Gaussian stream of [`simulate_ebm`] for a given seed.
pub fn simulate_ebm_band(phi_bar: &AnnealedDrift, horizon: f64, dt: f64, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    let steps = step_count(horizon, dt)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("band half-width must be positive, got {epsilon}")));
    }
    let mut rng = stream_rng(seed, Stream::Brownian, 0);
    let sqrt_dt = dt.sqrt();
    let scale = dt / (2.0 * epsilon);
    let mut seen: Vec<f64> = Vec::with_capacity(steps);
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = 0.0;
    values.push(y);
    for j in 0..steps {
        let at = seen.partition_point(|&v| v < y);
        seen.insert(at, y);
        let lo = seen.partition_point(|&v| v <= y - epsilon);
        let hi = seen.partition_point(|&v| v < y + epsilon);
        let l = (hi - lo) as f64 * scale;
        let d = phi_bar.eval_bar(j as f64 * dt, y, l);
        let z: f64 = StandardNormal.sample(&mut rng);
        y += d * dt + sqrt_dt * z;
        values.push(y);
    }
    Ok(values)
}

/// Euler–Maruyama for `dY = b(t, Y) dt + dW` with no local-time bookkeeping.
///
/// Shares the Gaussian stream of [`simulate_ebm`] for a given seed.
pub fn simulate_drift_sde(drift: impl Fn(f64, f64) -> f64, horizon: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    let steps = step_count(horizon, dt)?;
    let mut rng = stream_rng(seed, Stream::Brownian, 0);
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = 0.0;
    values.push(y);
    for j in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        y += drift(j as f64 * dt, y) * dt + sqrt_dt * z;
        values.push(y);
    }
    Ok(values)
}

/// Endpoint of `dX = coef·L_X(t, 0) dt + dW`, with `L_X(t, 0)` the band
/// estimate at level 0 of half-width `epsilon` (current point included).
pub fn simulate_origin_local_time_sde(
    coef: f64,
    horizon: f64,
    dt: f64,
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<f64> {
    let steps = step_count(horizon, dt)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("band half-width must be positive, got {epsilon}")));
    }
    let sqrt_dt = dt.sqrt();
    let quantum = dt / (2.0 * epsilon);
    let mut hits = 0u64;
    let mut x = 0.0f64;
    for _ in 0..steps {
        if x.abs() < epsilon {
            hits += 1;
        }
        let z: f64 = StandardNormal.sample(rng);
        x += coef * hits as f64 * quantum * dt + sqrt_dt * z;
    }
    Ok(x)
}

/// Summary of one EBM path on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbmSummary {
    /// `Y` at [`SUMMARY_TIMES`].
    pub marginals: [f64; 4],
    pub running_max: f64,
    /// `L̂(1, 0)`.
    pub local_time_at_origin: f64,
    /// [`local_time_identity_check`] at the end of the path.
    pub identity_defect: f64,
    /// `Σ b_j² dt` for the probe drift (0 without a probe).
    pub probe_quadratic: f64,
    /// `Σ b_j ΔW_j` for the probe drift.
    pub probe_stochastic: f64,
    /// Band estimate of `L(1, 0)` (0 without a band).
    pub band_at_origin: f64,
}

impl EbmSummary {
    pub fn endpoint(&self) -> f64 {
        self.marginals[3]
    }

    /// Discretized Girsanov weight of the probe drift.
    pub fn probe_weight(&self) -> f64 {
        (self.probe_stochastic - 0.5 * self.probe_quadratic).exp()
    }
}

/// Reusable Monte Carlo driver for EBM paths on `[0, 1]`.
///
/// An optional probe drift is evaluated along the path at `(t, Y, L̂)`
/// without feeding back into it.
#[derive(Debug, Clone)]
pub struct EbmSampler {
    drift: DriftEval,
    probe: Option<DriftEval>,
    band: Option<f64>,
    dt: f64,
    h: f64,
    steps: usize,
    marks: [usize; 4],
}

impl EbmSampler {
    pub fn new(phi_bar: &AnnealedDrift, dt: f64, h: f64) -> Result<Self> {
        let steps = step_count(1.0, dt)?;
        let grid = LocalTimeGrid::new(h, dt)?;
        let q = grid.quantum();
        Ok(Self {
            drift: DriftEval::new(phi_bar, q, steps),
            probe: None,
            band: None,
            dt,
            h,
            steps,
            marks: SUMMARY_TIMES.map(|t| (steps as f64 * t).round() as usize),
        })
    }

    pub fn with_probe(mut self, probe: &AnnealedDrift) -> Self {
        self.probe = Some(DriftEval::new(probe, self.dt / self.h, self.steps));
        self
    }

    /// Also records [`local_time_band`] at level 0 with half-width `epsilon`.
    pub fn with_band(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("band half-width must be positive, got {epsilon}")));
        }
        self.band = Some(epsilon);
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// A grid sized for this sampler, for reuse across [`Self::sample`] calls.
    pub fn grid(&self) -> LocalTimeGrid {
        LocalTimeGrid::new(self.h, self.dt).expect("validated in new")
    }

    pub fn sample(&self, grid: &mut LocalTimeGrid, seed: u64) -> EbmSummary {
        grid.clear();
        let mut rng = SimRng::seed_from_u64(seed);
        let (dt, sqrt_dt) = (self.dt, self.dt.sqrt());
        let mut marginals = [0.0; 4];
        let mut next_mark = self.marks.iter().take_while(|&&m| m == 0).count();
        let (mut y, mut max) = (0.0f64, 0.0f64);
        let (mut quad, mut stoch) = (0.0, 0.0);
        let band = self.band.unwrap_or(0.0);
        let mut band_hits = 0u64;
        for j in 0..self.steps {
            band_hits += u64::from(y.abs() < band);
            let c = grid.credit(y);
            let t = j as f64 * dt;
            let d = self.drift.eval(t, y, c);
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = sqrt_dt * z;
            if let Some(p) = &self.probe {
                let b = p.eval(t, y, c);
                quad += b * b * dt;
                stoch += b * dw;
            }
            y += d * dt + dw;
            max = max.max(y);
            while next_mark < 4 && self.marks[next_mark] == j + 1 {
                marginals[next_mark] = y;
                next_mark += 1;
            }
        }
        let identity_defect = local_time_identity_check(grid, self.steps as f64 * dt);
        crate::audit::record_ebm(identity_defect, self.steps);
        EbmSummary {
            marginals,
            running_max: max,
            local_time_at_origin: grid.value_bin(0),
            identity_defect,
            probe_quadratic: quad,
            probe_stochastic: stoch,
            band_at_origin: if band > 0.0 { band_hits as f64 * dt / (2.0 * band) } else { 0.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::{Excitation, Profile};

    fn drift(p: Profile) -> AnnealedDrift {
        AnnealedDrift::from_plain(&Excitation::plain(p)).unwrap()
    }

    #[test]
    fn bins_and_ties() {
        let g = LocalTimeGrid::new(0.5, 0.25).unwrap();
        assert_eq!(g.bin(0.0), 0);
        assert_eq!(g.bin(0.24), 0);
        assert_eq!(g.bin(0.25), 1);
        assert_eq!(g.bin(-0.25), 0);
        assert_eq!(g.bin(-0.26), -1);
        assert!(LocalTimeGrid::new(0.0, 0.1).is_err());
        assert!(LocalTimeGrid::new(0.1, -1.0).is_err());
    }

    #[test]
    fn identity_examples() {
        let mut g = LocalTimeGrid::new(0.1, 0.001).unwrap();
        assert_eq!(local_time_identity_check(&g, 0.0), 0.0);
        g.credit(0.03);
        assert!(local_time_identity_check(&g, 0.001) < 1e-18);
        assert!((g.value(0.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn million_step_identity() {
        let p = simulate_ebm(&AnnealedDrift::zero(), 1.0, 1e-6, 1e-3, 5).unwrap();
        assert!(local_time_identity_check(p.local_field(), 1.0) <= 1e-3);
        assert!(local_time_identity_check(p.local_field(), 1.0) <= 1e-9 * 1e6);
    }

    #[test]
    fn step_count_checks() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn path_fields_consistent() {
        let phi = drift(Profile::Tanh { a: 1.0, b: 1.0 });
        let p = simulate_ebm(&phi, 1.0, 1e-3, 1e-3f64.sqrt(), 3).unwrap();
        assert_eq!(p.values().len(), 1001);
        assert_eq!(p.values()[0], 0.0);
        for j in 0..p.steps() {
            let inc = p.values()[j + 1] - p.values()[j];
            let expect = p.drift_samples()[j] * p.dt() + p.noise()[j];
            assert!((inc - expect).abs() < 1e-12);
            assert_eq!(p.drift_samples()[j], phi.eval_bar(0.0, 0.0, p.local_samples()[j]));
        }
        assert_eq!(p, simulate_ebm(&phi, 1.0, 1e-3, 1e-3f64.sqrt(), 3).unwrap());
    }

    #[test]
    fn zero_drift_matches_reference_solver() {
        let p = simulate_ebm(&AnnealedDrift::zero(), 1.0, 1e-3, 0.05, 11).unwrap();
        let r = simulate_drift_sde(|_, _| 0.0, 1.0, 1e-3, 11).unwrap();
        assert_eq!(p.values(), &r[..]);
    }

    #[test]
    fn x_only_drift_matches_reference_solver_pathwise() {
        let phi = drift(Profile::XLinear { a: -1.0, clip: 2.0 });
        let p = simulate_ebm(&phi, 1.0, 1e-3, 0.05, 4).unwrap();
        let r = simulate_drift_sde(|_, x| (-x).clamp(-2.0, 2.0), 1.0, 1e-3, 4).unwrap();
        assert_eq!(p.values(), &r[..]);
    }

    #[test]
    fn band_examples() {
        let zeros = vec![0.0; 1001];
        let l = local_time_band(&zeros, 1e-3, 0.0, 0.05).unwrap();
        assert!((l - 1.0 / 0.1).abs() < 1e-9);
        let far = vec![5.0; 101];
        assert_eq!(local_time_band(&far, 0.01, 0.0, 0.1).unwrap(), 0.0);
        assert!(local_time_band(&far, 0.01, 0.0, 0.0).is_err());
    }

    #[test]
    fn band_sde_without_feedback_is_brownian() {
        let a = simulate_ebm_band(&AnnealedDrift::zero(), 1.0, 1e-2, 0.05, 2).unwrap();
        let b = simulate_drift_sde(|_, _| 0.0, 1.0, 1e-2, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_matches_path() {
        let phi = drift(Profile::Tanh { a: 1.0, b: 1.0 });
        let dt = 1e-3;
        let s = EbmSampler::new(&phi, dt, dt.sqrt()).unwrap();
        let mut g = s.grid();
        let seed = crate::rng::derive_seed(9, Stream::Brownian, 0);
        let sum = s.sample(&mut g, seed);
        let p = simulate_ebm(&phi, 1.0, dt, dt.sqrt(), 9).unwrap();
        assert_eq!(sum.endpoint(), p.endpoint());
        assert_eq!(sum.marginals[1], p.values()[500]);
        assert_eq!(sum.running_max, p.values().iter().copied().fold(0.0, f64::max));
        assert_eq!(sum.local_time_at_origin, p.local_field().value(0.0));
        assert!(sum.identity_defect < 1e-9 * 1000.0);
        assert_eq!(sum.probe_quadratic, 0.0);
        let banded = s.clone().with_band(0.05).unwrap().sample(&mut g, seed);
        assert_eq!(banded.endpoint(), p.endpoint());
        assert_eq!(banded.band_at_origin, local_time_band(p.values(), dt, 0.0, 0.05).unwrap());
    }

    #[test]
    fn probe_weight_constant_drift() {
        let dt = 1e-2;
        let probe = drift(Profile::Constant { c: 0.5 });
        let s = EbmSampler::new(&AnnealedDrift::zero(), dt, 0.1).unwrap().with_probe(&probe);
        let mut g = s.grid();
        let sum = s.sample(&mut g, 3);
        let expected = (0.5 * sum.endpoint() - 0.125).exp();
        assert!((sum.probe_weight() - expected).abs() < 1e-12);
    }

    #[test]
    fn csv_exports() {
        let p = simulate_ebm(&AnnealedDrift::zero(), 0.5, 0.25, 0.5, 1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,Y,L_at_Y\n0,0,0.5\n"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        p.local_field().write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x_center,L\n"));
    }

    #[test]
    fn origin_sde_zero_coefficient_is_brownian_endpoint() {
        let mut a = stream_rng(1, Stream::Brownian, 0);
        let x = simulate_origin_local_time_sde(0.0, 1.0, 1e-2, 0.1, &mut a).unwrap();
        let r = simulate_drift_sde(|_, _| 0.0, 1.0, 1e-2, 1).unwrap();
        assert!((x - r[100]).abs() < 1e-12);
    }
}
