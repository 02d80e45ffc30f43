//! Nearest-neighbour walks on ℤ: the quenched excited walk, the symmetric
//! reference walk and the walk modified by its visits to the origin.
//!
//! Visit counts follow the set `{j ≤ k : X(j) = X(k)}` literally, so the
//! count at the current time includes the current visit and the first visit
//! to a site has count 1.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::RngCore;
use rand::SeedableRng;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::excitation::{make_epsilon, Excitation, ScaledExcitation};
use crate::occupancy::Occupancy;
use crate::rng::{stream_rng, unit_f64, SimRng, Stream};

/// Trajectory `X(0..=K)` with `X(0) = 0`, its increments and visit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    positions: Vec<i64>,
    increments: Vec<i8>,
    visit_counts: Vec<u32>,
    clamp_events: usize,
}

impl LatticePath {
    /// Builds a path from `±1` increments, computing positions and visit counts.
    pub fn from_increments(increments: &[i8]) -> Result<Self> {
        let mut positions = Vec::with_capacity(increments.len() + 1);
        let mut visit_counts = Vec::with_capacity(increments.len() + 1);
        let mut occ = Occupancy::default();
        let mut x = 0i64;
        positions.push(0);
        visit_counts.push(occ.visit(0));
        for (k, &d) in increments.iter().enumerate() {
            if d != 1 && d != -1 {
                return Err(Error::NotNearestNeighbour { step: k });
            }
            x += i64::from(d);
            positions.push(x);
            visit_counts.push(occ.visit(x));
        }
        Ok(Self {
            positions,
            increments: increments.to_vec(),
            visit_counts,
            clamp_events: 0,
        })
    }

    /// Builds a path from positions, checking `X(0) = 0` and unit steps.
    pub fn from_positions(positions: &[i64]) -> Result<Self> {
        if positions.first() != Some(&0) {
            return Err(Error::InvalidArgument("a path starts at 0".into()));
        }
        let incs = positions
            .windows(2)
            .enumerate()
            .map(|(k, w)| match w[1] - w[0] {
                1 => Ok(1i8),
                -1 => Ok(-1i8),
                _ => Err(Error::NotNearestNeighbour { step: k }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_increments(&incs)
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn increments(&self) -> &[i8] {
        &self.increments
    }

    pub fn visit_counts(&self) -> &[u32] {
        &self.visit_counts
    }

    /// Steps at which the raw up-probability left `[0, 1]` and was clamped.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn endpoint(&self) -> i64 {
        *self.positions.last().expect("paths are never empty")
    }

    /// Recomputes visit counts and increments from scratch and compares.
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.increments.len() + 1 || self.visit_counts.len() != self.positions.len() {
            return Err(Error::LengthMismatch {
                left: self.positions.len(),
                right: self.visit_counts.len(),
            });
        }
        if self.positions[0] != 0 {
            return Err(Error::InvalidArgument("a path starts at 0".into()));
        }
        let mut occ = Occupancy::default();
        for (k, &x) in self.positions.iter().enumerate() {
            if k > 0 && x - self.positions[k - 1] != i64::from(self.increments[k - 1]) {
                return Err(Error::NotNearestNeighbour { step: k - 1 });
            }
            if k > 0 && (x - self.positions[k - 1]).abs() != 1 {
                return Err(Error::NotNearestNeighbour { step: k - 1 });
            }
            if occ.visit(x) != self.visit_counts[k] {
                return Err(Error::InconsistentVisitCounts { step: k });
            }
        }
        Ok(())
    }

    /// CSV with header `k,X,i_k`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,X,i_k")?;
        for (k, (x, i)) in self.positions.iter().zip(&self.visit_counts).enumerate() {
            writeln!(w, "{k},{x},{i}")?;
        }
        Ok(())
    }
}

/// Step function `t ↦ X([nt]) / √n` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPath {
    horizon: f64,
    n: usize,
    values: Vec<f64>,
}

impl ScaledPath {
    /// Rescales lattice positions `X(0..=n)` by `1/√n` on `[0, 1]`.
    pub(crate) fn from_grid(n: usize, positions: &[i64]) -> Self {
        let f = 1.0 / (n as f64).sqrt();
        Self {
            horizon: 1.0,
            n,
            values: positions.iter().map(|&x| x as f64 * f).collect(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Values at the grid points `k/n`, `k = 0..=[nT]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at time `t`, clamped into `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = ((self.n as f64 * t.max(0.0)).floor() as usize).min(self.values.len() - 1);
        self.values[k]
    }

    pub fn running_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{v}", k as f64 / self.n as f64)?;
        }
        Ok(())
    }
}

/// `X_n(t) = X([nt]) / √n` for `t ∈ [0, horizon]`.
pub fn rescale(path: &LatticePath, n: usize, horizon: f64) -> Result<ScaledPath> {
    rescale_with(path, n, horizon, 1.0 / (n as f64).sqrt())
}

fn rescale_with(path: &LatticePath, n: usize, horizon: f64, factor: f64) -> Result<ScaledPath> {
    if n == 0 || !(horizon >= 0.0) {
        return Err(Error::InvalidArgument("rescale needs n >= 1 and horizon >= 0".into()));
    }
    let last = (n as f64 * horizon).floor() as usize;
    if last > path.steps() {
        return Err(Error::PathTooShort {
            required: last,
            available: path.steps(),
        });
    }
    Ok(ScaledPath {
        horizon,
        n,
        values: path.positions[..=last].iter().map(|&x| x as f64 * factor).collect(),
    })
}

/// Exact occupation counts `ν(k, ·)` of `X(0..=k)`.
pub fn occupation_counts(path: &LatticePath, k: usize) -> Result<BTreeMap<i64, u32>> {
    if k > path.steps() {
        return Err(Error::PathTooShort {
            required: k,
            available: path.steps(),
        });
    }
    let mut map = BTreeMap::new();
    for &x in &path.positions[..=k] {
        *map.entry(x).or_insert(0) += 1;
    }
    Ok(map)
}

#[inline(always)]
fn clamp_probability(raw: f64) -> (f64, bool) {
    if raw < 0.0 {
        (0.0, true)
    } else if raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    }
}

/// Up-step probability `½(1 + ε)` clamped to `[0, 1]`.
pub fn step_prob(phi: &Excitation, n: usize, k: usize, x: i64, i: u32, omega_k: f64) -> f64 {
    clamp_probability(0.5 * (1.0 + make_epsilon(phi, n, k, x, i, omega_k))).0
}

/// Fast per-step transition rule shared by simulation and density code.
#[derive(Debug, Clone)]
pub(crate) struct ErwKernel {
    scaled: ScaledExcitation,
}

impl ErwKernel {
    pub(crate) fn new(phi: &Excitation, n: usize, steps: usize) -> Self {
        Self {
            scaled: ScaledExcitation::new(phi, n, steps + 1),
        }
    }

    pub(crate) fn scaled(&self) -> &ScaledExcitation {
        &self.scaled
    }

    /// Clamped up-probability; bit-identical to [`step_prob`].
    #[inline(always)]
    pub(crate) fn up_prob(&self, k: usize, x: i64, i: u32, omega: f64) -> (f64, bool) {
        clamp_probability(0.5 * (1.0 + self.scaled.epsilon(k, x, i, omega)))
    }
}

#[inline(always)]
fn omega_at(omega: Option<&[f64]>, k: usize) -> f64 {
    match omega {
        Some(w) => w[k],
        None => 0.0,
    }
}

/// Drives one excited walk; `on_step(k, x_k, i_k, up)` is called per step.
/// Returns the number of clamp events. The final site is visited too, so
/// `occ` ends holding `ν(steps, ·)`.
#[inline(always)]
fn drive_erw<R: RngCore>(
    kernel: &ErwKernel,
    omega: Option<&[f64]>,
    steps: usize,
    occ: &mut Occupancy,
    rng: &mut R,
    mut on_step: impl FnMut(usize, i64, u32, bool),
) -> usize {
    let mut x = 0i64;
    let mut clamps = 0usize;
    for k in 0..steps {
        let i = occ.visit(x);
        let (p, clamped) = kernel.up_prob(k, x, i, omega_at(omega, k));
        clamps += clamped as usize;
        let up = unit_f64(rng.next_u64()) < p;
        on_step(k, x, i, up);
        x += if up { 1 } else { -1 };
    }
    occ.visit(x);
    clamps
}

fn check_env(phi: &Excitation, env: &Environment, steps: usize) -> Result<()> {
    if env.len() < steps {
        return Err(Error::EnvironmentTooShort {
            required: steps,
            available: env.len(),
        });
    }
    phi.check_environment(env.generator())
}

fn record_path(steps: usize, mut drive: impl FnMut(&mut Occupancy, &mut dyn FnMut(usize, i64, u32, bool)) -> usize) -> LatticePath {
    let mut positions = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    let mut visit_counts = Vec::with_capacity(steps + 1);
    let mut occ = Occupancy::default();
    let mut last = 0i64;
    let clamp_events = drive(&mut occ, &mut |_, x, i, up| {
        positions.push(x);
        visit_counts.push(i);
        increments.push(if up { 1 } else { -1 });
        last = x + if up { 1 } else { -1 };
    });
    positions.push(last);
    visit_counts.push(occ.get(last));
    LatticePath {
        positions,
        increments,
        visit_counts,
        clamp_events,
    }
}

/// Quenched excited walk: at step `k` the walk moves up with probability
/// `step_prob(φ, n, k, X(k), i_k, ω_k)`.
pub fn simulate_erw(phi: &Excitation, env: &Environment, n: usize, steps: usize, seed: u64) -> Result<LatticePath> {
    if n == 0 {
        return Err(Error::InvalidArgument("scale n must be positive".into()));
    }
    check_env(phi, env, steps)?;
    let kernel = ErwKernel::new(phi, n, steps);
    let mut rng = stream_rng(seed, Stream::Walk, 0);
    let omega = Some(&env.values()[..steps]);
    Ok(record_path(steps, |occ, f| drive_erw(&kernel, omega, steps, occ, &mut rng, f)))
}

/// Symmetric simple walk. Shares the increment stream of [`simulate_erw`],
/// so `φ ≡ 0` reproduces it exactly.
pub fn simulate_srw(steps: usize, seed: u64) -> LatticePath {
    let mut rng = stream_rng(seed, Stream::Walk, 0);
    record_path(steps, |occ, f| drive_srw(steps, occ, &mut rng, f))
}

#[inline(always)]
fn drive_srw<R: RngCore>(
    steps: usize,
    occ: &mut Occupancy,
    rng: &mut R,
    mut on_step: impl FnMut(usize, i64, u32, bool),
) -> usize {
    let mut x = 0i64;
    for k in 0..steps {
        let i = occ.visit(x);
        let up = unit_f64(rng.next_u64()) < 0.5;
        on_step(k, x, i, up);
        x += if up { 1 } else { -1 };
    }
    occ.visit(x);
    0
}

/// Parameters of the walk modified by its visits to the origin:
/// `Δ_n = c·n^{−α}` and up-probability `(½ + i·Δ_n) ∧ 1`, where `i` is the
/// number of visits to 0 so far.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModifiedWalkConfig {
    pub c: f64,
    pub alpha: f64,
    pub n: usize,
}

impl ModifiedWalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("c must be nonnegative, got {}", self.c)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("scale n must be positive".into()));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.c * (self.n as f64).powf(-self.alpha)
    }

    /// Exponent `γ` of the output normalization `X / n^γ`: ½ for `α ≥ 1` or
    /// `c = 0`, `1 − α/2` otherwise.
    pub fn scaling_exponent(&self) -> f64 {
        if self.alpha >= 1.0 || self.c == 0.0 {
            0.5
        } else {
            1.0 - self.alpha / 2.0
        }
    }

    #[inline(always)]
    pub fn up_prob(&self, delta: f64, zero_visits: u32) -> f64 {
        (0.5 + f64::from(zero_visits) * delta).min(1.0)
    }
}

#[inline(always)]
fn drive_modified<R: RngCore>(
    cfg: &ModifiedWalkConfig,
    steps: usize,
    occ: &mut Occupancy,
    rng: &mut R,
    mut on_step: impl FnMut(usize, i64, u32, bool),
) -> usize {
    let delta = cfg.delta();
    let mut x = 0i64;
    let mut zero_visits = 0u32;
    for k in 0..steps {
        let i = occ.visit(x);
        if x == 0 {
            zero_visits = i;
        }
        let up = unit_f64(rng.next_u64()) < cfg.up_prob(delta, zero_visits);
        on_step(k, x, i, up);
        x += if up { 1 } else { -1 };
    }
    occ.visit(x);
    0
}

/// Walk whose bias at every site grows with its number of visits to 0.
pub fn simulate_modified_at_zero(cfg: &ModifiedWalkConfig, steps: usize, seed: u64) -> Result<LatticePath> {
    cfg.validate()?;
    let mut rng = stream_rng(seed, Stream::Walk, 0);
    Ok(record_path(steps, |occ, f| drive_modified(cfg, steps, occ, &mut rng, f)))
}

/// `X([n t]) / n^γ` for the modified walk, with `γ` from the config.
pub fn rescale_modified(path: &LatticePath, cfg: &ModifiedWalkConfig, exponent: f64, horizon: f64) -> Result<ScaledPath> {
    rescale_with(path, cfg.n, horizon, (cfg.n as f64).powf(-exponent))
}

/// Times at which Monte Carlo summaries record the path.
pub const SUMMARY_TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Finite-dimensional summary of one scaled path on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    /// Values at [`SUMMARY_TIMES`].
    pub marginals: [f64; 4],
    pub running_max: f64,
    /// `ν(n, 0) / √n` or its continuous counterpart.
    pub local_time_at_origin: f64,
    pub clamp_events: u32,
    /// Occupation normalization held at the end of the path.
    pub occupation_ok: bool,
}

impl PathSummary {
    pub fn endpoint(&self) -> f64 {
        self.marginals[3]
    }
}

/// Which walk a [`WalkSampler`] drives.
#[derive(Debug, Clone)]
pub enum WalkModel {
    Excited(Excitation),
    Symmetric,
    ModifiedAtZero { cfg: ModifiedWalkConfig, exponent: f64 },
}

/// Reusable Monte Carlo driver producing [`PathSummary`] values for `n` steps at scale `n`.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    model: WalkModel,
    kernel: Option<ErwKernel>,
    n: usize,
    marks: [usize; 4],
}

impl WalkSampler {
    pub fn new(model: WalkModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("scale n must be positive".into()));
        }
        let kernel = match &model {
            WalkModel::Excited(phi) => Some(ErwKernel::new(phi, n, n)),
            WalkModel::ModifiedAtZero { cfg, .. } => {
                cfg.validate()?;
                if cfg.n != n {
                    return Err(Error::InvalidArgument("modified walk scale differs from sampler scale".into()));
                }
                None
            }
            WalkModel::Symmetric => None,
        };
        let marks = SUMMARY_TIMES.map(|t| (n as f64 * t).floor() as usize);
        Ok(Self { model, kernel, n, marks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn needs_environment(&self) -> bool {
        matches!(&self.model, WalkModel::Excited(phi) if phi.depends_on_omega())
    }

    /// Simulates one path of `n` steps from `seed`. `omega` must hold at
    /// least `n` values when the excitation reads the environment.
    pub fn sample(&self, occ: &mut Occupancy, omega: Option<&[f64]>, seed: u64) -> PathSummary {
        let n = self.n;
        occ.clear();
        let mut rng = SimRng::seed_from_u64(seed);
        let mut marginals = [0i64; 4];
        let mut max = 0i64;
        let marks = self.marks;
        // Marks at time 0 keep X(0) = 0.
        let mut next_mark = marks.iter().take_while(|&&m| m == 0).count();
        let mut observe = |k: usize, x: i64, _i: u32, up: bool| {
            let next = x + if up { 1 } else { -1 };
            while next_mark < 4 && marks[next_mark] == k + 1 {
                marginals[next_mark] = next;
                next_mark += 1;
            }
            max = max.max(next);
        };
        let clamps = match &self.model {
            WalkModel::Excited(_) => {
                let kernel = self.kernel.as_ref().expect("kernel built for excited walks");
                drive_erw(kernel, omega, n, occ, &mut rng, &mut observe)
            }
            WalkModel::Symmetric => drive_srw(n, occ, &mut rng, &mut observe),
            WalkModel::ModifiedAtZero { cfg, .. } => drive_modified(cfg, n, occ, &mut rng, &mut observe),
        };
        let scale = match &self.model {
            WalkModel::ModifiedAtZero { exponent, .. } => (n as f64).powf(-*exponent),
            _ => 1.0 / (n as f64).sqrt(),
        };
        let expected = n as u64 + 1;
        let occupation_ok = occ.total() == expected && occ.recount() == expected;
        crate::audit::record_walk(occupation_ok);
        PathSummary {
            marginals: marginals.map(|x| x as f64 * scale),
            running_max: max as f64 * scale,
            local_time_at_origin: f64::from(occ.get(0)) / (n as f64).sqrt(),
            clamp_events: clamps as u32,
            occupation_ok,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_environment, Generator};
    use crate::excitation::Profile;

    fn zero_env(len: usize) -> Environment {
        generate_environment(&Generator::Constant { value: 0.0 }, 0, len).unwrap()
    }

    #[test]
    fn step_prob_examples() {
        assert_eq!(step_prob(&Excitation::zero(), 10, 0, 0, 1, 0.0), 0.5);
        let one = Excitation::plain(Profile::Constant { c: 1.0 });
        assert!((step_prob(&one, 100, 3, 2, 1, 0.0) - 0.55).abs() < 1e-15);
        let five = Excitation::plain(Profile::Constant { c: 5.0 });
        assert_eq!(step_prob(&five, 1, 0, 0, 1, 0.0), 1.0);
        let minus = Excitation::plain(Profile::Constant { c: -5.0 });
        assert_eq!(step_prob(&minus, 1, 0, 0, 1, 0.0), 0.0);
    }

    #[test]
    fn occupation_examples() {
        let p = LatticePath::from_positions(&[0, 1, 0]).unwrap();
        let occ = occupation_counts(&p, 2).unwrap();
        assert_eq!(occ, BTreeMap::from([(0, 2), (1, 1)]));
        assert_eq!(occupation_counts(&p, 0).unwrap(), BTreeMap::from([(0, 1)]));
        assert!(occupation_counts(&p, 3).is_err());
        assert_eq!(p.visit_counts(), &[1, 1, 2]);
    }

    #[test]
    fn occupation_matches_naive_recount() {
        let path = simulate_srw(1000, 42);
        for k in [0usize, 1, 17, 500, 1000] {
            let occ = occupation_counts(&path, k).unwrap();
            assert_eq!(occ.values().map(|&c| c as usize).sum::<usize>(), k + 1);
            for (&site, &count) in &occ {
                let naive = (0..=k).filter(|&j| path.positions()[j] == site).count();
                assert_eq!(count as usize, naive);
            }
        }
        // i_k against an O(k²) recount.
        for k in 0..=1000 {
            let x = path.positions()[k];
            let naive = (0..=k).filter(|&j| path.positions()[j] == x).count();
            assert_eq!(path.visit_counts()[k] as usize, naive);
        }
    }

    #[test]
    fn rescale_examples() {
        let flat = LatticePath::from_positions(&[0, 1, 0, 1, 0]).unwrap();
        let s = rescale(&flat, 4, 1.0).unwrap();
        assert_eq!(s.value_at(0.0), 0.0);
        let p = LatticePath::from_positions(&[0, 1, 2]).unwrap();
        assert_eq!(rescale(&p, 4, 0.5).unwrap().value_at(0.5), 1.0);
        let s1 = rescale(&p, 1, 2.0).unwrap();
        assert_eq!(s1.value_at(1.5), 1.0);
        assert_eq!(s1.value_at(2.0), 2.0);
        assert!(matches!(rescale(&p, 4, 1.0), Err(Error::PathTooShort { .. })));
    }

    #[test]
    fn erw_rejects_short_environment() {
        let r = simulate_erw(&Excitation::zero(), &zero_env(5), 10, 10, 1);
        assert!(matches!(r, Err(Error::EnvironmentTooShort { .. })));
    }

    #[test]
    fn erw_with_zero_phi_is_srw() {
        let env = zero_env(2000);
        let a = simulate_erw(&Excitation::zero(), &env, 100, 2000, 9).unwrap();
        let b = simulate_srw(2000, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn erw_is_deterministic_and_valid() {
        let phi = Excitation::new(Profile::Tanh { a: 1.0, b: 1.0 }, true, 2.0).unwrap();
        let env = generate_environment(&Generator::symmetric_two_state([0.0, 2.0], 0.3), 4, 3000).unwrap();
        let a = simulate_erw(&phi, &env, 3000, 3000, 5).unwrap();
        let b = simulate_erw(&phi, &env, 3000, 3000, 5).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.clamp_events(), 0);
    }

    #[test]
    fn clamping_counted_for_small_n() {
        let phi = Excitation::plain(Profile::Constant { c: 3.0 });
        let p = simulate_erw(&phi, &zero_env(50), 1, 50, 2).unwrap();
        assert_eq!(p.clamp_events(), 50);
        assert_eq!(p.endpoint(), 50);
    }

    #[test]
    fn modified_walk_delta_one_steps_up_first() {
        let cfg = ModifiedWalkConfig { c: 1.0, alpha: 1.0, n: 1 };
        for seed in 0..50 {
            let p = simulate_modified_at_zero(&cfg, 5, seed).unwrap();
            assert_eq!(p.positions()[1], 1);
        }
        let bad = ModifiedWalkConfig { c: 1.0, alpha: 0.0, n: 10 };
        assert!(simulate_modified_at_zero(&bad, 5, 0).is_err());
    }

    #[test]
    fn modified_with_zero_delta_is_srw() {
        let cfg = ModifiedWalkConfig { c: 0.0, alpha: 0.5, n: 100 };
        assert_eq!(simulate_modified_at_zero(&cfg, 500, 3).unwrap(), simulate_srw(500, 3));
    }

    #[test]
    fn scaling_exponents() {
        let c = |alpha| ModifiedWalkConfig { c: 1.0, alpha, n: 10_000 };
        assert_eq!(c(2.0).scaling_exponent(), 0.5);
        assert_eq!(c(1.0).scaling_exponent(), 0.5);
        assert_eq!(c(0.5).scaling_exponent(), 0.75);
        assert!((c(0.5).delta() - 0.01).abs() < 1e-15);
        let off = ModifiedWalkConfig { c: 0.0, alpha: 0.5, n: 10_000 };
        assert_eq!(off.scaling_exponent(), 0.5);
    }

    #[test]
    fn sampler_matches_recorded_path() {
        let phi = Excitation::plain(Profile::Tanh { a: 1.0, b: 1.0 });
        let n = 400;
        let sampler = WalkSampler::new(WalkModel::Excited(phi.clone()), n).unwrap();
        let mut occ = Occupancy::default();
        let seed = crate::rng::derive_seed(8, Stream::Walk, 0);
        let s = sampler.sample(&mut occ, None, seed);
        let path = simulate_erw(&phi, &zero_env(n), n, n, 8).unwrap();
        let scaled = rescale(&path, n, 1.0).unwrap();
        for (m, t) in s.marginals.iter().zip(SUMMARY_TIMES) {
            assert_eq!(*m, scaled.value_at(t));
        }
        assert_eq!(s.running_max, scaled.running_max().max(0.0));
        let nu0 = occupation_counts(&path, n).unwrap().get(&0).copied().unwrap_or(0);
        assert_eq!(s.local_time_at_origin, f64::from(nu0) / 20.0);
        assert!(s.occupation_ok);
    }

    #[test]
    fn csv_export() {
        let p = LatticePath::from_positions(&[0, 1, 0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,X,i_k\n0,0,1\n1,1,1\n2,0,2\n");
        let s = rescale(&p, 2, 1.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,value\n0,0\n0.5,0.7071"));
    }
}
