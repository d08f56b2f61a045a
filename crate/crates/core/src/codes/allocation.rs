use rand::Rng;
use rayon::prelude::*;

use super::musa::MusaSequenceSet;
use crate::error::{Error, Result};
use crate::mc::McEstimate;
use crate::rng::substream;

/// What the per-pool thresholds measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolCriterion {
    /// Maximum normalised cross-correlation between sequences of one pool.
    #[default]
    CrossCorrelation,
    /// Peak normalised aperiodic auto-correlation sidelobe of each sequence.
    AutoCorrelationSidelobe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationConfig {
    pub high_cap: f64,
    pub low_cap: f64,
    pub criterion: PoolCriterion,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            high_cap: 1.0,
            low_cap: 1.0,
            criterion: PoolCriterion::CrossCorrelation,
        }
    }
}

/// Split of sequence indices into a high-activity and a low-activity pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAllocation {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    pub nu_high: f64,
    pub nu_low: f64,
    pub config: AllocationConfig,
}

impl SequenceAllocation {
    /// Largest cross-correlation inside a pool (0 for pools below two).
    pub fn pool_max_correlation(set: &MusaSequenceSet, pool: &[usize]) -> f64 {
        let n = set.len();
        let c = set.correlation_matrix();
        let mut m: f64 = 0.0;
        for (a, &i) in pool.iter().enumerate() {
            for &j in &pool[a + 1..] {
                m = m.max(c[i * n + j]);
            }
        }
        m
    }
}

/// Peak aperiodic auto-correlation sidelobe of column `i`, normalised by its
/// energy.
fn sidelobe(set: &MusaSequenceSet, i: usize) -> f64 {
    let col = set.columns().column(i);
    let k = col.len();
    let mut peak: f64 = 0.0;
    for lag in 1..k {
        let s: num_complex::Complex64 = (0..k - lag).map(|t| col[t].conj() * col[t + lag]).sum();
        peak = peak.max(s.norm());
    }
    peak
}

/// Partition the sequence set between `n_high` high-activity and `n_low`
/// low-activity devices.
///
/// The high pool receives the share `(1/nu_low) / (1/nu_low + 1/nu_high)`
/// of the sequences, chosen greedily so its internal correlation stays as
/// low as possible (or, under the sidelobe criterion, the sequences with the
/// smallest auto-correlation sidelobes).
pub fn allocate_sequences(
    set: &MusaSequenceSet,
    n_high: usize,
    n_low: usize,
    config: &AllocationConfig,
) -> Result<SequenceAllocation> {
    let total = set.len();
    let devices = n_high + n_low;
    if devices == 0 {
        return Err(Error::invalid("at least one device is required"));
    }
    if devices > total {
        return Err(Error::Infeasible(format!(
            "{devices} devices but only {total} sequences"
        )));
    }
    let nu_high = n_high as f64 / devices as f64;
    let nu_low = n_low as f64 / devices as f64;
    let fraction_high = if n_high == 0 {
        0.0
    } else if n_low == 0 {
        1.0
    } else {
        (1.0 / nu_low) / (1.0 / nu_low + 1.0 / nu_high)
    };
    let mut size_high = (fraction_high * total as f64).round() as usize;
    if n_high > 0 {
        size_high = size_high.max(1);
    }
    if n_low > 0 {
        size_high = size_high.min(total - 1);
    }

    let high = match config.criterion {
        PoolCriterion::CrossCorrelation => greedy_low_correlation(set, size_high, config.high_cap)?,
        PoolCriterion::AutoCorrelationSidelobe => {
            let mut order: Vec<(f64, usize)> = (0..total).map(|i| (sidelobe(set, i), i)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let high: Vec<usize> = order[..size_high].iter().map(|&(_, i)| i).collect();
            if let Some(&(s, i)) = order[..size_high].iter().find(|(s, _)| *s > config.high_cap) {
                return Err(Error::Infeasible(format!(
                    "sequence {i} has sidelobe {s:.4} above the high-pool cap {}",
                    config.high_cap
                )));
            }
            high
        }
    };
    let mut in_high = vec![false; total];
    for &i in &high {
        in_high[i] = true;
    }
    let low: Vec<usize> = (0..total).filter(|&i| !in_high[i]).collect();
    let low_measure = match config.criterion {
        PoolCriterion::CrossCorrelation => SequenceAllocation::pool_max_correlation(set, &low),
        PoolCriterion::AutoCorrelationSidelobe => {
            low.iter().map(|&i| sidelobe(set, i)).fold(0.0, f64::max)
        }
    };
    if low_measure > config.low_cap {
        return Err(Error::Infeasible(format!(
            "low pool measure {low_measure:.4} exceeds its cap {}",
            config.low_cap
        )));
    }
    Ok(SequenceAllocation {
        high,
        low,
        nu_high,
        nu_low,
        config: *config,
    })
}

fn greedy_low_correlation(set: &MusaSequenceSet, size: usize, cap: f64) -> Result<Vec<usize>> {
    let n = set.len();
    if size == 0 {
        return Ok(Vec::new());
    }
    let c = set.correlation_matrix();
    let total: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| c[i * n + j]).sum())
        .collect();
    let first = (0..n)
        .min_by(|&a, &b| total[a].total_cmp(&total[b]).then(a.cmp(&b)))
        .expect("non-empty set");
    let mut pool = vec![first];
    let mut taken = vec![false; n];
    taken[first] = true;
    // worst correlation of each candidate with the current pool
    let mut worst: Vec<f64> = (0..n).map(|j| c[first * n + j]).collect();
    while pool.len() < size {
        let next = (0..n)
            .filter(|&j| !taken[j])
            .min_by(|&a, &b| {
                worst[a]
                    .total_cmp(&worst[b])
                    .then(total[a].total_cmp(&total[b]))
                    .then(a.cmp(&b))
            })
            .expect("pool size below set size");
        if worst[next] > cap {
            return Err(Error::Infeasible(format!(
                "cannot grow the high pool beyond {} sequences under cap {cap}",
                pool.len()
            )));
        }
        taken[next] = true;
        pool.push(next);
        for j in 0..n {
            worst[j] = worst[j].max(c[next * n + j]);
        }
    }
    Ok(pool)
}

/// How active devices pick their sequences.
#[derive(Debug, Clone, Copy)]
pub enum CollisionScheme<'a> {
    /// Every device picks uniformly from all `sequences`.
    Random { sequences: usize },
    /// High-activity devices pick from the high pool, low-activity devices
    /// from the low pool.
    Protocol(&'a SequenceAllocation),
}

const BLOCK: u64 = 4096;

/// Monte-Carlo probability that two or more active devices pick the same
/// sequence.
pub fn collision_probability_mc(
    scheme: CollisionScheme<'_>,
    active_high: usize,
    active_low: usize,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials < 10_000 {
        return Err(Error::invalid(format!("at least 10^4 trials are required, got {trials}")));
    }
    let pools: (usize, usize) = match scheme {
        CollisionScheme::Random { sequences } => (sequences, sequences),
        CollisionScheme::Protocol(a) => (a.high.len(), a.low.len()),
    };
    if (active_high > 0 && pools.0 == 0) || (active_low > 0 && pools.1 == 0) {
        return Err(Error::Infeasible("an active cluster has no sequences".into()));
    }
    // Sequence identities: under the protocol the pools are disjoint, so
    // low-pool picks are offset past the high pool.
    let low_offset = match scheme {
        CollisionScheme::Random { .. } => 0,
        CollisionScheme::Protocol(_) => pools.0,
    };
    let blocks = trials.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let count = BLOCK.min(trials - b * BLOCK);
            let mut picks = Vec::with_capacity(active_high + active_low);
            let mut hits = 0u64;
            for _ in 0..count {
                picks.clear();
                for _ in 0..active_high {
                    picks.push(rng.random_range(0..pools.0));
                }
                for _ in 0..active_low {
                    picks.push(low_offset + rng.random_range(0..pools.1));
                }
                picks.sort_unstable();
                if picks.windows(2).any(|w| w[0] == w[1]) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(McEstimate::new(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::super::musa::{select_musa_sequences, select_musa_sequences_with, MusaSelection};
    use super::*;

    fn table_set() -> MusaSequenceSet {
        let mut sel = MusaSelection::new(6, 100, 0.75, 2);
        sel.min_nonzero = 2;
        select_musa_sequences_with(&sel).unwrap()
    }

    #[test]
    fn equal_clusters_split_evenly() {
        let set = table_set();
        let a = allocate_sequences(&set, 20, 20, &AllocationConfig::default()).unwrap();
        assert_eq!((a.high.len(), a.low.len()), (50, 50));
        let mut all: Vec<usize> = a.high.iter().chain(&a.low).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn normalised_ratio_rule() {
        let set = select_musa_sequences(5, 40, 0.8, 4).unwrap();
        let a = allocate_sequences(&set, 10, 30, &AllocationConfig::default()).unwrap();
        // (1/0.75) / (1/0.75 + 1/0.25) = 0.25
        assert_eq!(a.high.len(), 10);
        assert_eq!(a.low.len(), 30);
    }

    #[test]
    fn high_pool_is_less_correlated() {
        let set = table_set();
        let a = allocate_sequences(&set, 20, 20, &AllocationConfig::default()).unwrap();
        let h = SequenceAllocation::pool_max_correlation(&set, &a.high);
        let l = SequenceAllocation::pool_max_correlation(&set, &a.low);
        assert!(h <= l, "high {h} low {l}");
    }

    #[test]
    fn sidelobe_criterion_orders_pools() {
        let set = table_set();
        let cfg = AllocationConfig {
            criterion: PoolCriterion::AutoCorrelationSidelobe,
            ..Default::default()
        };
        let a = allocate_sequences(&set, 20, 20, &cfg).unwrap();
        let hmax = a.high.iter().map(|&i| sidelobe(&set, i)).fold(0.0, f64::max);
        let lmin = a.low.iter().map(|&i| sidelobe(&set, i)).fold(f64::INFINITY, f64::min);
        assert!(hmax <= lmin);
    }

    #[test]
    fn caps_are_enforced() {
        let set = table_set();
        let cfg = AllocationConfig {
            low_cap: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            allocate_sequences(&set, 20, 20, &cfg),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn insufficient_sequences() {
        let set = select_musa_sequences(4, 10, 0.8, 1).unwrap();
        assert!(allocate_sequences(&set, 6, 6, &AllocationConfig::default()).is_err());
    }

    #[test]
    fn single_device_never_collides() {
        let e = collision_probability_mc(CollisionScheme::Random { sequences: 100 }, 1, 0, 10_000, 1)
            .unwrap();
        assert_eq!(e.successes, 0);
    }

    #[test]
    fn random_allocation_matches_birthday_formula() {
        let e = collision_probability_mc(CollisionScheme::Random { sequences: 100 }, 3, 2, 200_000, 7)
            .unwrap();
        let exact = 1.0 - (0..5).map(|k| (100 - k) as f64 / 100.0).product::<f64>();
        assert!((e.estimate() - exact).abs() <= 3.0 * e.stderr(), "{} vs {exact}", e.estimate());
    }
}
