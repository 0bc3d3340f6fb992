//! Easy-to-hard ordering and per-epoch availability.
//!
//! A schedule is a permutation of train indices sorted by Z-count ascending
//! (ties shuffled by seed) plus a pacing function mapping the epoch t to the
//! fraction lambda(t) of the sorted order available that epoch. Every pacing
//! kind satisfies lambda(0) = lambda0, lambda(t) = 1 for t >= t_grow, and is
//! non-decreasing in between, so the per-epoch prefixes are nested.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::zcount::ZCountTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PacingKind {
    Linear,
    Root,
    RootP,
    Geometric,
}

impl FromStr for PacingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<PacingKind> {
        match s {
            "linear" => Ok(PacingKind::Linear),
            "root" => Ok(PacingKind::Root),
            "root-p" | "root_p" | "rootp" => Ok(PacingKind::RootP),
            "geometric" => Ok(PacingKind::Geometric),
            other => Err(Error::Config(format!(
                "unknown pacing kind '{other}' (expected linear, root, root-p or geometric)"
            ))),
        }
    }
}

impl fmt::Display for PacingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PacingKind::Linear => write!(f, "linear"),
            PacingKind::Root => write!(f, "root"),
            PacingKind::RootP => write!(f, "root-p"),
            PacingKind::Geometric => write!(f, "geometric"),
        }
    }
}

/// Fully resolved pacing parameters. `lambda0` is the initial fraction,
/// `t_grow` the epoch at which the full set becomes available, and
/// `p_exponent` applies to the root-p kind only.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PacingConfig {
    pub kind: PacingKind,
    pub lambda0: f64,
    pub t_grow: u32,
    pub p_exponent: f64,
}

impl PacingConfig {
    pub fn new(kind: PacingKind, lambda0: f64, t_grow: u32, p_exponent: f64) -> Result<Self> {
        let cfg = PacingConfig {
            kind,
            lambda0,
            t_grow,
            p_exponent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0 <= 1.0) {
            return Err(Error::Config(format!(
                "lambda0 must be in (0, 1], got {}",
                self.lambda0
            )));
        }
        if self.t_grow < 1 {
            return Err(Error::Config("t_grow must be >= 1".to_string()));
        }
        if self.p_exponent.is_nan() || self.p_exponent < 1.0 {
            return Err(Error::Config(format!(
                "p_exponent must be >= 1, got {}",
                self.p_exponent
            )));
        }
        Ok(())
    }

    /// Available fraction at epoch t.
    pub fn lambda(&self, t: u32) -> f64 {
        if t >= self.t_grow {
            return 1.0;
        }
        let l0 = self.lambda0;
        let frac = t as f64 / self.t_grow as f64;
        let v = match self.kind {
            PacingKind::Linear => l0 + (1.0 - l0) * frac,
            PacingKind::Root => (l0 * l0 + (1.0 - l0 * l0) * frac).sqrt(),
            PacingKind::RootP => {
                let lp = l0.powf(self.p_exponent);
                (lp + (1.0 - lp) * frac).powf(1.0 / self.p_exponent)
            }
            PacingKind::Geometric => l0.powf(1.0 - frac),
        };
        v.min(1.0)
    }
}

/// Initial fraction lambda0 derived from the count table: the share of
/// zero-count (easiest) triples, floored at 0.05 so datasets where nearly
/// everything has support still start with a usable prefix.
pub fn initial_percentage(table: &ZCountTable) -> f64 {
    let stats = table.stats();
    (1.0 - stats.nonzero_fraction).max(0.05)
}

/// Difficulty-ascending permutation of train indices. Equal-count runs are
/// shuffled by the seeded generator, so the easy prefix is an unbiased
/// sample rather than file order.
pub fn sort_by_difficulty(table: &ZCountTable, seed: u64) -> Vec<usize> {
    let n = table.counts.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| table.counts[i]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = 0;
    while start < n {
        let count = table.counts[order[start]];
        let mut end = start + 1;
        while end < n && table.counts[order[end]] == count {
            end += 1;
        }
        order[start..end].shuffle(&mut rng);
        start = end;
    }
    order
}

/// Sorted order plus pacing; the per-epoch training pool is a prefix.
#[derive(Debug, Clone)]
pub struct CurriculumSchedule {
    order: Vec<usize>,
    pub pacing: PacingConfig,
    pub seed: u64,
}

impl CurriculumSchedule {
    pub fn new(table: &ZCountTable, pacing: PacingConfig, seed: u64) -> CurriculumSchedule {
        CurriculumSchedule {
            order: sort_by_difficulty(table, seed),
            pacing,
            seed,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// First ceil(lambda(t) * |train|) indices of the order, never empty.
    pub fn available_prefix(&self, t: u32) -> &[usize] {
        let lambda = self.pacing.lambda(t);
        let k = (lambda * self.order.len() as f64).ceil() as usize;
        &self.order[..k.clamp(1, self.order.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zcount::ZPathPolicy;
    use proptest::prelude::*;

    fn table(counts: Vec<u64>) -> ZCountTable {
        ZCountTable {
            counts,
            policy: ZPathPolicy::default(),
        }
    }

    fn config(kind: PacingKind, lambda0: f64, t_grow: u32) -> PacingConfig {
        PacingConfig::new(kind, lambda0, t_grow, 2.0).unwrap()
    }

    #[test]
    fn lambda_starts_at_lambda0() {
        for kind in [
            PacingKind::Linear,
            PacingKind::Root,
            PacingKind::RootP,
            PacingKind::Geometric,
        ] {
            let cfg = config(kind, 0.385, 50);
            assert!((cfg.lambda(0) - 0.385).abs() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn lambda_saturates_at_t_grow() {
        for kind in [
            PacingKind::Linear,
            PacingKind::Root,
            PacingKind::RootP,
            PacingKind::Geometric,
        ] {
            let cfg = config(kind, 0.25, 40);
            assert_eq!(cfg.lambda(40), 1.0);
            assert_eq!(cfg.lambda(400), 1.0);
        }
    }

    #[test]
    fn geometric_closed_form() {
        let cfg = config(PacingKind::Geometric, 0.25, 100);
        assert!((cfg.lambda(50) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_percentage_from_counts() {
        // 2 of 8 nonzero -> 0.75 easy fraction
        let t = table(vec![0, 0, 0, 0, 0, 0, 2, 5]);
        assert!((initial_percentage(&t) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn initial_percentage_floor() {
        let t = table(vec![1, 2, 3, 4]);
        assert_eq!(initial_percentage(&t), 0.05);
    }

    #[test]
    fn sort_places_strictly_ordered_counts() {
        let order = sort_by_difficulty(&table(vec![5, 0, 2]), 7);
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn sort_is_deterministic_per_seed() {
        let t = table(vec![0; 64]);
        let a = sort_by_difficulty(&t, 9);
        let b = sort_by_difficulty(&t, 9);
        let c = sort_by_difficulty(&t, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn prefix_size_rounds_up() {
        let t = table(vec![0; 10]);
        let cfg = config(PacingKind::Linear, 0.385, 100);
        let schedule = CurriculumSchedule::new(&t, cfg, 1);
        assert_eq!(schedule.available_prefix(0).len(), 4); // ceil(3.85)
        assert_eq!(schedule.available_prefix(100).len(), 10);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(PacingConfig::new(PacingKind::Linear, 0.0, 10, 2.0).is_err());
        assert!(PacingConfig::new(PacingKind::Linear, 1.1, 10, 2.0).is_err());
        assert!(PacingConfig::new(PacingKind::Linear, 0.5, 0, 2.0).is_err());
        assert!(PacingConfig::new(PacingKind::RootP, 0.5, 10, 0.5).is_err());
    }

    proptest! {
        /// Non-decreasing lambda for every kind, sampled over [0, 2 t_grow].
        #[test]
        fn lambda_monotone(
            lambda0 in 0.01f64..=1.0,
            t_grow in 1u32..200,
            kind_idx in 0usize..4,
            p in 1.0f64..4.0,
        ) {
            let kind = [PacingKind::Linear, PacingKind::Root, PacingKind::RootP, PacingKind::Geometric][kind_idx];
            let cfg = PacingConfig::new(kind, lambda0, t_grow, p).unwrap();
            let mut prev = 0.0f64;
            for t in 0..=2 * t_grow {
                let l = cfg.lambda(t);
                prop_assert!(l >= prev - 1e-15);
                prop_assert!(l > 0.0 && l <= 1.0);
                prev = l;
            }
            prop_assert!((cfg.lambda(0) - lambda0).abs() < 1e-12);
            prop_assert_eq!(cfg.lambda(t_grow), 1.0);
        }

        /// Growing prefixes are nested.
        #[test]
        fn prefixes_nested(
            counts in proptest::collection::vec(0u64..6, 1..150),
            lambda0 in 0.01f64..=1.0,
            t_grow in 1u32..60,
            kind_idx in 0usize..4,
        ) {
            let kind = [PacingKind::Linear, PacingKind::Root, PacingKind::RootP, PacingKind::Geometric][kind_idx];
            let cfg = PacingConfig::new(kind, lambda0, t_grow, 2.0).unwrap();
            let schedule = CurriculumSchedule::new(&table(counts), cfg, 3);
            for t in 0..2 * t_grow {
                let a = schedule.available_prefix(t);
                let b = schedule.available_prefix(t + 1);
                prop_assert!(a.len() <= b.len());
                prop_assert_eq!(a, &b[..a.len()]);
            }
        }

        /// root-p with p = 2 is the root pacing.
        #[test]
        fn root_p_two_equals_root(lambda0 in 0.01f64..=1.0, t_grow in 1u32..100) {
            let root = PacingConfig::new(PacingKind::Root, lambda0, t_grow, 2.0).unwrap();
            let rootp = PacingConfig::new(PacingKind::RootP, lambda0, t_grow, 2.0).unwrap();
            for t in 0..=2 * t_grow {
                prop_assert!((root.lambda(t) - rootp.lambda(t)).abs() < 1e-12);
            }
        }

        /// Counts along the produced order never decrease.
        #[test]
        fn order_is_count_ascending(counts in proptest::collection::vec(0u64..10, 1..200), seed in 0u64..100) {
            let t = table(counts.clone());
            let order = sort_by_difficulty(&t, seed);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..counts.len()).collect::<Vec<_>>());
            for w in order.windows(2) {
                prop_assert!(counts[w[0]] <= counts[w[1]]);
            }
        }
    }
}
