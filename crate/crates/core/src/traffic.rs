//! Parameterized stimulus generators.
//!
//! Every master independently starts a new transaction with probability
//! `injection_rate` per idle cycle; a burst injects one beat per cycle.
//! Draws are replay-stable: the descriptor emitted for a given
//! (seed, master, cycle) never depends on simulation state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrafficError {
    #[error("sweep requires at least one injection rate")]
    EmptyRateList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    SingleBeat,
    Burst2,
    Burst4,
    Burst8,
    Burst16,
    /// Burst length drawn uniformly from {1,2,4,8,16} per transaction.
    Mixed,
}

impl PatternKind {
    pub fn name(&self) -> &'static str {
        match self {
            PatternKind::SingleBeat => "single",
            PatternKind::Burst2 => "burst2",
            PatternKind::Burst4 => "burst4",
            PatternKind::Burst8 => "burst8",
            PatternKind::Burst16 => "burst16",
            PatternKind::Mixed => "mixed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "single" => PatternKind::SingleBeat,
            "burst2" => PatternKind::Burst2,
            "burst4" => PatternKind::Burst4,
            "burst8" => PatternKind::Burst8,
            "burst16" => PatternKind::Burst16,
            "mixed" => PatternKind::Mixed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressDistribution {
    UniformRandomBank,
    /// Consecutive line addresses per master; the natural worst case for
    /// intra-burst bank conflicts without randomization.
    LinearSequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficPattern {
    pub kind: PatternKind,
    /// Probability a transaction is a read.
    pub read_fraction: f64,
    /// Per-cycle transaction start probability for an idle master (p_a).
    pub injection_rate: f64,
    pub address_distribution: AddressDistribution,
}

impl TrafficPattern {
    pub fn new(kind: PatternKind, injection_rate: f64) -> Self {
        Self {
            kind,
            read_fraction: 0.5,
            injection_rate,
            address_distribution: AddressDistribution::UniformRandomBank,
        }
    }
}

/// One requested transaction: the engine expands it into beats and
/// applies the randomization policy to pick per-beat banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransactionDescriptor {
    pub burst_len: u32,
    pub kind: AccessKind,
    /// Starting line address; beat i uses base_line + i before any
    /// randomization remapping.
    pub base_line: u64,
}

/// Draw the next transaction for an idle master, or None this cycle.
///
/// `rng` must be the per-master stream and `next_line` the master's
/// sequential-address cursor (advanced on emission when the distribution
/// is LinearSequential).
pub fn next_transaction(
    pattern: &TrafficPattern,
    rng: &mut ChaCha8Rng,
    next_line: &mut u64,
    bank_space: u64,
) -> Option<TransactionDescriptor> {
    if !rng.gen_bool(pattern.injection_rate.clamp(0.0, 1.0)) {
        return None;
    }
    let burst_len = match pattern.kind {
        PatternKind::SingleBeat => 1,
        PatternKind::Burst2 => 2,
        PatternKind::Burst4 => 4,
        PatternKind::Burst8 => 8,
        PatternKind::Burst16 => 16,
        PatternKind::Mixed => [1u32, 2, 4, 8, 16][rng.gen_range(0..5)],
    };
    let kind = if rng.gen_bool(pattern.read_fraction.clamp(0.0, 1.0)) {
        AccessKind::Read
    } else {
        AccessKind::Write
    };
    let base_line = match pattern.address_distribution {
        AddressDistribution::UniformRandomBank => rng.gen_range(0..bank_space.max(1)),
        AddressDistribution::LinearSequential => {
            let base = *next_line;
            *next_line = next_line.wrapping_add(burst_len as u64);
            base
        }
    };
    Some(TransactionDescriptor {
        burst_len,
        kind,
        base_line,
    })
}

/// A planned sweep point: the same pattern at a specific rate, with a
/// rate-independent seed derivation so points share structural streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub pattern: TrafficPattern,
    pub seed: u64,
}

/// Expand a rate list into run descriptors (duplicates preserved in order).
pub fn sweep_injection(
    pattern: &TrafficPattern,
    rates: &[f64],
    seed: u64,
) -> Result<Vec<SweepPoint>, TrafficError> {
    if rates.is_empty() {
        return Err(TrafficError::EmptyRateList);
    }
    Ok(rates
        .iter()
        .map(|&rate| SweepPoint {
            pattern: TrafficPattern {
                injection_rate: rate,
                ..*pattern
            },
            seed,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn draw_many(pattern: &TrafficPattern, n: usize) -> Vec<Option<TransactionDescriptor>> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut line = 0u64;
        (0..n)
            .map(|_| next_transaction(pattern, &mut rng, &mut line, 64))
            .collect()
    }

    #[test]
    fn zero_rate_never_emits() {
        let p = TrafficPattern::new(PatternKind::Mixed, 0.0);
        assert!(draw_many(&p, 10_000).iter().all(|d| d.is_none()));
    }

    #[test]
    fn full_rate_single_beat_always_emits() {
        let p = TrafficPattern::new(PatternKind::SingleBeat, 1.0);
        for d in draw_many(&p, 10_000) {
            let d = d.unwrap();
            assert_eq!(d.burst_len, 1);
            assert!(d.base_line < 64);
        }
    }

    #[test]
    fn mixed_burst_lengths_are_uniform() {
        let p = TrafficPattern::new(PatternKind::Mixed, 1.0);
        let n = 1_000_000usize;
        let mut counts = std::collections::HashMap::new();
        for d in draw_many(&p, n) {
            *counts.entry(d.unwrap().burst_len).or_insert(0usize) += 1;
        }
        for len in [1u32, 2, 4, 8, 16] {
            let freq = counts[&len] as f64 / n as f64;
            assert!((freq - 0.2).abs() < 0.01, "len={len} freq={freq}");
        }
    }

    #[test]
    fn read_fraction_matches_within_3_sigma() {
        let mut p = TrafficPattern::new(PatternKind::SingleBeat, 1.0);
        p.read_fraction = 0.25;
        let n = 1_000_000usize;
        let reads = draw_many(&p, n)
            .iter()
            .filter(|d| d.unwrap().kind == AccessKind::Read)
            .count();
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((reads as f64 / n as f64 - 0.25).abs() < 3.0 * sigma);
    }

    #[test]
    fn sequential_addresses_advance_by_burst_length() {
        let mut p = TrafficPattern::new(PatternKind::Burst4, 1.0);
        p.address_distribution = AddressDistribution::LinearSequential;
        let draws = draw_many(&p, 8);
        for (i, d) in draws.iter().enumerate() {
            assert_eq!(d.unwrap().base_line, 4 * i as u64);
        }
    }

    #[test]
    fn generator_is_replay_stable() {
        let p = TrafficPattern::new(PatternKind::Mixed, 0.7);
        assert_eq!(draw_many(&p, 5_000), draw_many(&p, 5_000));
    }

    #[test]
    fn sweep_expands_rates_in_order() {
        let p = TrafficPattern::new(PatternKind::Mixed, 1.0);
        let rates: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let plan = sweep_injection(&p, &rates, 3).unwrap();
        assert_eq!(plan.len(), 10);
        assert_eq!(plan[0].pattern.injection_rate, 0.1);
        assert_eq!(plan[9].pattern.injection_rate, 1.0);

        let dup = sweep_injection(&p, &[0.5, 0.5], 3).unwrap();
        assert_eq!(dup.len(), 2);

        assert_eq!(sweep_injection(&p, &[], 3), Err(TrafficError::EmptyRateList));
    }
}
