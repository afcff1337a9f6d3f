//! Run statistics: counters, latency histograms, derived metrics, CSV
//! rows, and A/B comparison tables.
//!
//! Transaction latency is measured from the cycle the transaction is
//! created at the master to the cycle its last beat completes (bank
//! service end for writes, response drain for reads), so source-side
//! waiting under congestion is included.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::traffic::AccessKind;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no completed transactions of the requested kind")]
    NoSamples,
    #[error("measured window is empty")]
    EmptyWindow,
}

/// Exact integer latency histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
    sum: u64,
    sum_sq: u128,
}

impl Histogram {
    pub fn record(&mut self, value: u64) {
        *self.counts.entry(value).or_insert(0) += 1;
        self.total += 1;
        self.sum += value;
        self.sum_sq += (value as u128) * (value as u128);
    }

    pub fn count(&self) -> u64 {
        self.total
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total > 0).then(|| self.sum as f64 / self.total as f64)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> Option<f64> {
        if self.total < 2 {
            return None;
        }
        let n = self.total as f64;
        let mean = self.sum as f64 / n;
        let var = (self.sum_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
        Some((var / n).sqrt())
    }

    /// Smallest value v with at least `p` of the mass at or below v.
    pub fn percentile(&self, p: f64) -> Option<u64> {
        if self.total == 0 {
            return None;
        }
        let threshold = (p.clamp(0.0, 1.0) * self.total as f64).ceil() as u64;
        let mut seen = 0;
        for (&v, &c) in &self.counts {
            seen += c;
            if seen >= threshold.max(1) {
                return Some(v);
            }
        }
        self.counts.keys().next_back().copied()
    }

    pub fn min(&self) -> Option<u64> {
        self.counts.keys().next().copied()
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&v, &c) in &other.counts {
            *self.counts.entry(v).or_insert(0) += c;
        }
        self.total += other.total;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    pub measured_cycles: u64,
    pub masters: u32,
    pub banks: u32,
    pub bank_latency: u32,
    pub injected_read_beats: u64,
    pub injected_write_beats: u64,
    pub served_read_beats: u64,
    pub served_write_beats: u64,
    /// Beats rejected at the source under the drop policy.
    pub never_admitted_beats: u64,
    pub in_flight_at_end: u64,
    pub per_master_accepted: Vec<u64>,
    pub per_bank_busy: Vec<u64>,
    /// Transaction latency per (kind, burst length).
    pub txn_latency: BTreeMap<(AccessKind, u32), Histogram>,
    /// Per-beat network+service latency, for diagnostics.
    pub beat_latency: Histogram,
    /// Intra-burst same-bank collisions observed at banks (must stay 0
    /// under fractal randomization).
    pub intra_burst_conflicts: u64,
}

impl SimStats {
    pub fn injected_beats(&self) -> u64 {
        self.injected_read_beats + self.injected_write_beats
    }

    pub fn served_beats(&self) -> u64 {
        self.served_read_beats + self.served_write_beats
    }

    /// Associative merge for combining runs (or windows) of identical shape.
    pub fn merge(&mut self, other: &SimStats) {
        self.measured_cycles += other.measured_cycles;
        self.injected_read_beats += other.injected_read_beats;
        self.injected_write_beats += other.injected_write_beats;
        self.served_read_beats += other.served_read_beats;
        self.served_write_beats += other.served_write_beats;
        self.never_admitted_beats += other.never_admitted_beats;
        self.in_flight_at_end = other.in_flight_at_end;
        self.intra_burst_conflicts += other.intra_burst_conflicts;
        for (a, b) in self
            .per_master_accepted
            .iter_mut()
            .zip(&other.per_master_accepted)
        {
            *a += b;
        }
        for (a, b) in self.per_bank_busy.iter_mut().zip(&other.per_bank_busy) {
            *a += b;
        }
        for (key, hist) in &other.txn_latency {
            self.txn_latency.entry(*key).or_default().merge(hist);
        }
        self.beat_latency.merge(&other.beat_latency);
    }
}

/// Served beats per master port per cycle, in [0,1].
pub fn throughput(stats: &SimStats) -> f64 {
    if stats.measured_cycles == 0 || stats.masters == 0 {
        return 0.0;
    }
    stats.served_beats() as f64 / (stats.masters as f64 * stats.measured_cycles as f64)
}

pub fn read_throughput(stats: &SimStats) -> f64 {
    if stats.measured_cycles == 0 || stats.masters == 0 {
        return 0.0;
    }
    stats.served_read_beats as f64 / (stats.masters as f64 * stats.measured_cycles as f64)
}

pub fn write_throughput(stats: &SimStats) -> f64 {
    if stats.measured_cycles == 0 || stats.masters == 0 {
        return 0.0;
    }
    stats.served_write_beats as f64 / (stats.masters as f64 * stats.measured_cycles as f64)
}

/// Per-bank busy fraction and its mean over banks.
pub fn bank_utilization(stats: &SimStats) -> (Vec<f64>, f64) {
    if stats.measured_cycles == 0 {
        return (vec![0.0; stats.per_bank_busy.len()], 0.0);
    }
    let per: Vec<f64> = stats
        .per_bank_busy
        .iter()
        .map(|&b| b as f64 / stats.measured_cycles as f64)
        .collect();
    let mean = if per.is_empty() {
        0.0
    } else {
        per.iter().sum::<f64>() / per.len() as f64
    };
    (per, mean)
}

fn latency_hist_for_kind(stats: &SimStats, kind: AccessKind) -> Histogram {
    let mut merged = Histogram::default();
    for ((k, _), hist) in &stats.txn_latency {
        if *k == kind {
            merged.merge(hist);
        }
    }
    merged
}

/// Mean transaction latency for one access kind, over all burst lengths.
pub fn average_latency(stats: &SimStats, kind: AccessKind) -> Result<f64, MetricsError> {
    latency_hist_for_kind(stats, kind)
        .mean()
        .ok_or(MetricsError::NoSamples)
}

/// Mean transaction latency over both kinds.
pub fn average_latency_all(stats: &SimStats) -> Result<f64, MetricsError> {
    let mut merged = latency_hist_for_kind(stats, AccessKind::Read);
    merged.merge(&latency_hist_for_kind(stats, AccessKind::Write));
    merged.mean().ok_or(MetricsError::NoSamples)
}

fn overall_latency(stats: &SimStats) -> Histogram {
    let mut merged = Histogram::default();
    for hist in stats.txn_latency.values() {
        merged.merge(hist);
    }
    merged
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub metric: String,
    pub value_a: f64,
    pub value_b: f64,
    /// (a - b) / b, or NaN when b = 0.
    pub relative_delta: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Set when the two runs do not share measurement shape.
    pub config_mismatch: bool,
}

/// Metric-by-metric comparison of two runs; relative delta is (a-b)/b.
pub fn compare(a: &SimStats, b: &SimStats) -> Comparison {
    let mut rows = Vec::new();
    let mut push = |metric: &str, va: f64, vb: f64| {
        let relative_delta = if vb != 0.0 { (va - vb) / vb } else { f64::NAN };
        rows.push(ComparisonRow {
            metric: metric.to_string(),
            value_a: va,
            value_b: vb,
            relative_delta,
        });
    };
    push("throughput", throughput(a), throughput(b));
    push("read_throughput", read_throughput(a), read_throughput(b));
    push("write_throughput", write_throughput(a), write_throughput(b));
    push(
        "mean_bank_utilization",
        bank_utilization(a).1,
        bank_utilization(b).1,
    );
    for kind in [AccessKind::Read, AccessKind::Write] {
        let name = match kind {
            AccessKind::Read => "read_latency_mean",
            AccessKind::Write => "write_latency_mean",
        };
        if let (Ok(la), Ok(lb)) = (average_latency(a, kind), average_latency(b, kind)) {
            push(name, la, lb);
        }
    }
    Comparison {
        rows,
        config_mismatch: a.masters != b.masters || a.measured_cycles != b.measured_cycles,
    }
}

/// Identification of a run for reporting; paired with SimStats in CSV rows.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub config_hash: u64,
    pub topology_kind: String,
    pub n: u32,
    pub k: u32,
    pub r: u32,
    pub pattern: String,
    pub injection_rate: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &[&str] = &[
    "config_hash",
    "topology_kind",
    "n",
    "k",
    "r",
    "pattern",
    "injection_rate",
    "seed",
    "measured_cycles",
    "read_throughput",
    "write_throughput",
    "mean_bank_util",
    "read_latency_mean",
    "write_latency_mean",
    "latency_p99",
    "read_latency_count",
    "read_latency_se",
    "write_latency_count",
    "write_latency_se",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV data row per run, matching [`CSV_HEADER`].
pub fn csv_row(meta: &RunMeta, stats: &SimStats) -> Vec<String> {
    let read_hist = latency_hist_for_kind(stats, AccessKind::Read);
    let write_hist = latency_hist_for_kind(stats, AccessKind::Write);
    vec![
        format!("{:016x}", meta.config_hash),
        meta.topology_kind.clone(),
        meta.n.to_string(),
        meta.k.to_string(),
        meta.r.to_string(),
        meta.pattern.clone(),
        format!("{:.4}", meta.injection_rate),
        meta.seed.to_string(),
        stats.measured_cycles.to_string(),
        format!("{:.6}", read_throughput(stats)),
        format!("{:.6}", write_throughput(stats)),
        format!("{:.6}", bank_utilization(stats).1),
        fmt_opt(read_hist.mean()),
        fmt_opt(write_hist.mean()),
        overall_latency(stats)
            .percentile(0.99)
            .map(|v| v.to_string())
            .unwrap_or_default(),
        read_hist.count().to_string(),
        fmt_opt(read_hist.std_error()),
        write_hist.count().to_string(),
        fmt_opt(write_hist.std_error()),
    ]
}
