//! Process-wide tally of occupation identities over every sampled path.
//!
//! [`crate::walk::WalkSampler`] and [`crate::ebm::EbmSampler`] record each
//! path they produce; callers read a [`Snapshot`] at the end of a run.

use std::sync::atomic::{AtomicU64, Ordering};

static WALK_PATHS: AtomicU64 = AtomicU64::new(0);
static WALK_VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static EBM_PATHS: AtomicU64 = AtomicU64::new(0);
/// Bits of the largest `defect / steps` seen; nonnegative floats order like their bits.
static EBM_WORST_RATIO: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub walk_paths: u64,
    /// Walk paths whose occupation counts did not sum to `k + 1`.
    pub walk_violations: u64,
    pub ebm_paths: u64,
    /// Largest `|Σ L̂·h − elapsed| / steps` over EBM paths.
    pub ebm_worst_defect_per_step: f64,
}

pub(crate) fn record_walk(ok: bool) {
    WALK_PATHS.fetch_add(1, Ordering::Relaxed);
    if !ok {
        WALK_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
}

pub(crate) fn record_ebm(defect: f64, steps: usize) {
    EBM_PATHS.fetch_add(1, Ordering::Relaxed);
    let ratio = if steps == 0 { defect } else { defect / steps as f64 };
    let bits = if ratio.is_nan() { f64::INFINITY.to_bits() } else { ratio.abs().to_bits() };
    EBM_WORST_RATIO.fetch_max(bits, Ordering::Relaxed);
}

pub fn snapshot() -> Snapshot {
    Snapshot {
        walk_paths: WALK_PATHS.load(Ordering::Relaxed),
        walk_violations: WALK_VIOLATIONS.load(Ordering::Relaxed),
        ebm_paths: EBM_PATHS.load(Ordering::Relaxed),
        ebm_worst_defect_per_step: f64::from_bits(EBM_WORST_RATIO.load(Ordering::Relaxed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_move() {
        let before = snapshot();
        record_walk(true);
        record_ebm(0.0, 10);
        let after = snapshot();
        assert!(after.walk_paths > before.walk_paths);
        assert!(after.ebm_paths > before.ebm_paths);
        assert!(after.ebm_worst_defect_per_step >= before.ebm_worst_defect_per_step);
    }
}
