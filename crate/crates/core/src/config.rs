//! Run configuration files: sectioned key-value text.
//!
//! Grammar: `[section]` headers, `key = value` pairs, `#` comments and
//! blank lines ignored. Sections: `topology`, `traffic`, `engine`,
//! `run`, `sweep`. Unknown keys are errors (typo protection). Every
//! parse error carries its line number.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{EngineConfig, RandomizationPolicy, RejectPolicy};
use crate::topology::{
    build_building_block, build_dsmc, build_flat_crossbar, Topology, TopologyError, TopologyKind,
};
use crate::traffic::{AddressDistribution, PatternKind, TrafficPattern};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section '{name}'")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: invalid value '{value}' for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("key outside any section at line {0}")]
    KeyOutsideSection(usize),
    #[error("invalid topology parameters: {0}")]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: TopologyKind,
    /// Masters for the flat crossbar; ports per block otherwise.
    pub n: u32,
    /// Slave ports (flat crossbar only).
    pub k: u32,
    pub r: u32,
    pub speedup_slices: u32,
    pub all_slices: u32,
    pub pattern: TrafficPattern,
    pub engine: EngineConfig,
    pub directed: bool,
    pub fractal: bool,
    pub seed: u64,
    /// Injection rates for the sweep subcommand.
    pub sweep_rates: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: TopologyKind::DsmcTwoBlock,
            n: 16,
            k: 16,
            r: 2,
            speedup_slices: 0,
            all_slices: 0,
            pattern: TrafficPattern::new(PatternKind::Mixed, 1.0),
            engine: EngineConfig::default(),
            directed: true,
            fractal: true,
            seed: 42,
            sweep_rates: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.split('#').next().unwrap_or("").trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !["topology", "traffic", "engine", "run", "sweep"].contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection { line, name });
                }
                section = Some(name);
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let section = section
                .as_deref()
                .ok_or(ConfigError::KeyOutsideSection(line))?;
            cfg.apply(section, key, value, line)?;
        }
        Ok(cfg)
    }

    fn apply(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let parse_u32 = |v: &str| v.parse::<u32>().map_err(|e| bad(&e.to_string()));
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|e| bad(&e.to_string()));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(&e.to_string()));
        let parse_bool = |v: &str| match v {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(bad("expected true/false")),
        };
        match (section, key) {
            ("topology", "kind") => {
                self.kind = match value {
                    "flat" => TopologyKind::FlatCrossbar,
                    "building-block" => TopologyKind::BuildingBlock,
                    "dsmc" => TopologyKind::DsmcTwoBlock,
                    _ => return Err(bad("expected flat | building-block | dsmc")),
                }
            }
            ("topology", "n") => self.n = parse_u32(value)?,
            ("topology", "k") => self.k = parse_u32(value)?,
            ("topology", "r") => self.r = parse_u32(value)?,
            ("topology", "speedup_slices") => self.speedup_slices = parse_u32(value)?,
            ("topology", "all_slices") => self.all_slices = parse_u32(value)?,
            ("traffic", "pattern") => {
                self.pattern.kind =
                    PatternKind::from_name(value).ok_or_else(|| {
                        bad("expected single | burst2 | burst4 | burst8 | burst16 | mixed")
                    })?
            }
            ("traffic", "read_fraction") => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("must be in [0,1]"));
                }
                self.pattern.read_fraction = v;
            }
            ("traffic", "injection_rate") => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("must be in [0,1]"));
                }
                self.pattern.injection_rate = v;
            }
            ("traffic", "address") => {
                self.pattern.address_distribution = match value {
                    "uniform" => AddressDistribution::UniformRandomBank,
                    "sequential" => AddressDistribution::LinearSequential,
                    _ => return Err(bad("expected uniform | sequential")),
                }
            }
            ("engine", "bank_latency") => self.engine.bank_latency = parse_u32(value)?,
            ("engine", "reorder_capacity") => self.engine.reorder_capacity = parse_u32(value)?,
            ("engine", "burst_atomic") => self.engine.burst_atomic = parse_bool(value)?,
            ("engine", "queue_depth") => self.engine.queue_depth = parse_u32(value)?,
            ("engine", "reject") => {
                self.engine.reject = match value {
                    "retry" => RejectPolicy::Retry,
                    "drop" => RejectPolicy::Drop,
                    _ => return Err(bad("expected retry | drop")),
                }
            }
            ("engine", "directed") => self.directed = parse_bool(value)?,
            ("engine", "fractal") => self.fractal = parse_bool(value)?,
            ("run", "cycles") => self.engine.cycles = parse_u64(value)?,
            ("run", "warmup") => self.engine.warmup = parse_u64(value)?,
            ("run", "seed") => self.seed = parse_u64(value)?,
            ("sweep", "rates") => self.sweep_rates = parse_rates(value).map_err(|r| bad(&r))?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Normalized text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[topology]");
        let _ = writeln!(out, "kind = {}", self.kind.name());
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "r = {}", self.r);
        let _ = writeln!(out, "speedup_slices = {}", self.speedup_slices);
        let _ = writeln!(out, "all_slices = {}", self.all_slices);
        let _ = writeln!(out, "[traffic]");
        let _ = writeln!(out, "pattern = {}", self.pattern.kind.name());
        let _ = writeln!(out, "read_fraction = {}", self.pattern.read_fraction);
        let _ = writeln!(out, "injection_rate = {}", self.pattern.injection_rate);
        let addr = match self.pattern.address_distribution {
            AddressDistribution::UniformRandomBank => "uniform",
            AddressDistribution::LinearSequential => "sequential",
        };
        let _ = writeln!(out, "address = {addr}");
        let _ = writeln!(out, "[engine]");
        let _ = writeln!(out, "bank_latency = {}", self.engine.bank_latency);
        let _ = writeln!(out, "reorder_capacity = {}", self.engine.reorder_capacity);
        let _ = writeln!(out, "burst_atomic = {}", self.engine.burst_atomic);
        let _ = writeln!(out, "queue_depth = {}", self.engine.queue_depth);
        let reject = match self.engine.reject {
            RejectPolicy::Retry => "retry",
            RejectPolicy::Drop => "drop",
        };
        let _ = writeln!(out, "reject = {reject}");
        let _ = writeln!(out, "directed = {}", self.directed);
        let _ = writeln!(out, "fractal = {}", self.fractal);
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "cycles = {}", self.engine.cycles);
        let _ = writeln!(out, "warmup = {}", self.engine.warmup);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "[sweep]");
        let rates: Vec<String> = self.sweep_rates.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "rates = {}", rates.join(","));
        out
    }

    /// Build the configured topology, including slice insertion.
    pub fn build_topology(&self) -> Result<Topology, ConfigError> {
        let mut topo = match self.kind {
            TopologyKind::FlatCrossbar => build_flat_crossbar(self.n, self.k, self.r)?,
            TopologyKind::BuildingBlock => build_building_block(self.n, self.r)?,
            TopologyKind::DsmcTwoBlock => build_dsmc(self.n)?,
        };
        if self.all_slices > 0 {
            for link in topo.links.iter_mut() {
                link.slice_count = self.all_slices;
            }
        }
        if self.speedup_slices > 0 {
            for link in topo.links.iter_mut().filter(|l| l.is_speedup) {
                link.slice_count = self.speedup_slices;
            }
        }
        Ok(topo)
    }

    pub fn policy(&self) -> RandomizationPolicy {
        RandomizationPolicy {
            directed: self.directed,
            fractal: self.fractal,
            rng_seed: self.seed,
        }
    }

    /// Stable content hash of the normalized form (FNV-1a, so rows are
    /// reproducible across runs and builds).
    pub fn content_hash(&self) -> u64 {
        fnv1a(self.serialize().as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Rate lists: either comma-separated values or `start:end:step`.
fn parse_rates(value: &str) -> Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err("range form is start:end:step".to_string());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || end < start {
            return Err("need step > 0 and end >= start".to_string());
        }
        let mut rates = Vec::new();
        let mut i = 0;
        loop {
            let r = start + step * i as f64;
            if r > end + 1e-9 {
                break;
            }
            rates.push((r * 1e9).round() / 1e9);
            i += 1;
        }
        Ok(rates)
    } else {
        value
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect()
    }
}
