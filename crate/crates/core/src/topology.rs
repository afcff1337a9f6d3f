//! Explicit staged interconnect graphs.
//!
//! Three builders: the flat full crossbar, a single 2-ary butterfly
//! building block (optionally with the speed-up doubling from the second
//! stage onward), and the two-block configuration with inter-block
//! speed-up links. Also a canonical bipartite embedding plus a brute-force
//! geometric crossing counter used as an independent oracle for the
//! closed-form crossing counts.
//!
//! Stage/position labeling for the butterfly kinds: wire positions
//! 0..n-1 run between stages; the switch at stage `s` (1-based, of
//! `S = log2 n` stages) pairs the two positions that differ in bit
//! `S - s`, and routing at that stage selects the output whose position
//! carries the target port's bit `S - s`. Bank addressing is low-order
//! interleaved: local bank id = port * r + stream, where `stream` is the
//! parallel speed-up plane selected from the second stage onward.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("{name}={value} must be a power of two >= {min}")]
    NotPowerOfTwo {
        name: &'static str,
        value: u32,
        min: u32,
    },
    #[error("parameter {name} must be >= 1, got {value}")]
    NonPositive { name: &'static str, value: u32 },
    #[error("speed-up r={0} not supported by this builder (expected 1 or 2)")]
    UnsupportedSpeedup(u32),
    #[error("duplicate port {0} in embedding order")]
    DuplicatePort(u32),
    #[error("embedding order does not cover wire endpoint {0}")]
    MissingPort(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    FlatCrossbar,
    BuildingBlock,
    DsmcTwoBlock,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::FlatCrossbar => "flat",
            TopologyKind::BuildingBlock => "building-block",
            TopologyKind::DsmcTwoBlock => "dsmc",
        }
    }
}

pub type SwitchId = usize;
pub type BankId = u32;
pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Master(u32),
    /// Input `port` of a switch.
    SwitchIn { switch: SwitchId, port: u32 },
    Bank(BankId),
}

#[derive(Debug, Clone, Copy)]
pub struct Link {
    /// Source switch and output port, or None when the source is a master.
    pub src_switch: Option<(SwitchId, u32)>,
    pub src_master: Option<u32>,
    pub dst: Endpoint,
    pub is_speedup: bool,
    /// Pipeline register slices on this link (one extra cycle each).
    pub slice_count: u32,
}

/// A radix-2 switch. From the second stage onward a switch carries the
/// `r` parallel speed-up streams side by side, so it exposes 2*r output
/// links ordered (position half, stream); streams never mix inside it.
#[derive(Debug, Clone)]
pub struct Switch {
    pub stage: u32,
    pub index_in_stage: u32,
    /// Block id for multi-block topologies, 0 otherwise.
    pub block: u32,
    pub input_links: Vec<LinkId>,
    pub output_links: Vec<LinkId>,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub kind: TopologyKind,
    pub masters: u32,
    pub banks: u32,
    pub speedup: u32,
    pub stage_count: u32,
    pub switches: Vec<Switch>,
    pub links: Vec<Link>,
    /// Link carrying master i's traffic into the first stage. For the
    /// flat crossbar a master has one link per slave port; this holds the
    /// port-0 link and [`Topology::flat_master_link`] addresses the rest.
    pub master_links: Vec<LinkId>,
    /// route[switch][bank] = output port index, or NO_ROUTE.
    route: Vec<Vec<u16>>,
}

pub const NO_ROUTE: u16 = u16::MAX;

impl Topology {
    /// Output port of `switch` that leads toward `bank`, if reachable.
    pub fn route(&self, switch: SwitchId, bank: BankId) -> Option<u32> {
        match self.route[switch][bank as usize] {
            NO_ROUTE => None,
            p => Some(p as u32),
        }
    }

    /// Flat crossbar only: the link from `master` to slave port `port`.
    pub fn flat_master_link(&self, master: u32, port: u32) -> LinkId {
        debug_assert_eq!(self.kind, TopologyKind::FlatCrossbar);
        let n = self.masters;
        (port * (n + self.speedup) + master) as usize
    }

    /// Entry link for a beat from `master` targeting `bank`.
    pub fn entry_link(&self, master: u32, bank: BankId) -> LinkId {
        match self.kind {
            TopologyKind::FlatCrossbar => self.flat_master_link(master, bank / self.speedup),
            _ => self.master_links[master as usize],
        }
    }

    /// Banks per building block (equals total banks for single-block kinds).
    pub fn banks_per_block(&self) -> u32 {
        self.banks / self.block_count()
    }

    pub fn block_count(&self) -> u32 {
        match self.kind {
            TopologyKind::DsmcTwoBlock => 2,
            _ => 1,
        }
    }

    pub fn block_of_master(&self, master: u32) -> u32 {
        match self.kind {
            TopologyKind::DsmcTwoBlock => master / (self.masters / 2),
            _ => 0,
        }
    }

    pub fn block_of_bank(&self, bank: BankId) -> u32 {
        match self.kind {
            TopologyKind::DsmcTwoBlock => bank / self.banks_per_block(),
            _ => 0,
        }
    }

    /// True if every bank is reachable from every master by following
    /// routed links (the full shared-memory property).
    pub fn fully_connected(&self) -> bool {
        (0..self.masters).all(|m| (0..self.banks).all(|b| self.path_from(m, b).is_some()))
    }

    /// Walk the routed path from a master to a bank. Returns the traversed
    /// link ids (entry link first, bank link last), or None if routing
    /// dead-ends.
    pub fn path_from(&self, master: u32, bank: BankId) -> Option<Vec<LinkId>> {
        let mut path = vec![self.entry_link(master, bank)];
        let mut guard = 0;
        loop {
            let link = &self.links[*path.last().unwrap()];
            match link.dst {
                Endpoint::Bank(b) => return (b == bank).then_some(path),
                Endpoint::SwitchIn { switch, .. } => {
                    let out = self.route(switch, bank)?;
                    path.push(self.switches[switch].output_links[out as usize]);
                }
                Endpoint::Master(_) => return None,
            }
            guard += 1;
            if guard > self.switches.len() + 2 {
                return None;
            }
        }
    }

    /// Switch traversals on the routed master-to-bank path.
    pub fn hops(&self, master: u32, bank: BankId) -> Option<u32> {
        self.path_from(master, bank).map(|p| p.len() as u32 - 1)
    }

    /// Sum of register slices along the routed master-to-bank path.
    pub fn slices_on_path(&self, master: u32, bank: BankId) -> Option<u32> {
        self.path_from(master, bank)
            .map(|p| p.iter().map(|&l| self.links[l].slice_count).sum())
    }

    /// Plain-text link dump, one line per link, for inspection and golden
    /// file tests.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for link in &self.links {
            let src = match (link.src_master, link.src_switch) {
                (Some(m), _) => format!("master {m} port 0"),
                (None, Some((s, p))) => {
                    let sw = &self.switches[s];
                    format!("stage {} switch {} port {}", sw.stage, sw.index_in_stage, p)
                }
                _ => unreachable!(),
            };
            let dst = match link.dst {
                Endpoint::Master(m) => format!("master {m}"),
                Endpoint::SwitchIn { switch, port } => {
                    let sw = &self.switches[switch];
                    format!("stage {} switch {} port {}", sw.stage, sw.index_in_stage, port)
                }
                Endpoint::Bank(b) => format!("bank {b}"),
            };
            let _ = write!(out, "{src} -> {dst}");
            if link.is_speedup {
                out.push_str(" speedup");
            }
            if link.slice_count > 0 {
                let _ = write!(out, " slices={}", link.slice_count);
            }
            out.push('\n');
        }
        out
    }
}

fn require_pow2(name: &'static str, n: u32, min: u32) -> Result<(), TopologyError> {
    if n < min || !n.is_power_of_two() {
        return Err(TopologyError::NotPowerOfTwo {
            name,
            value: n,
            min,
        });
    }
    Ok(())
}

/// Flat full crossbar: every master wired to every slave port; slave port
/// `j` is a single-stage switch with `n` inputs and `r` outputs, one per
/// bank behind the port.
pub fn build_flat_crossbar(n: u32, k: u32, r: u32) -> Result<Topology, TopologyError> {
    for (name, value) in [("n", n), ("k", k), ("r", r)] {
        if value == 0 {
            return Err(TopologyError::NonPositive { name, value });
        }
    }
    let banks = k * r;
    let mut links = Vec::new();
    let mut switches = Vec::new();
    for j in 0..k {
        let mut input_links = Vec::new();
        for m in 0..n {
            input_links.push(links.len());
            links.push(Link {
                src_switch: None,
                src_master: Some(m),
                dst: Endpoint::SwitchIn {
                    switch: j as usize,
                    port: m,
                },
                is_speedup: false,
                slice_count: 0,
            });
        }
        let mut output_links = Vec::new();
        for s in 0..r {
            output_links.push(links.len());
            links.push(Link {
                src_switch: Some((j as usize, s)),
                src_master: None,
                dst: Endpoint::Bank(j * r + s),
                is_speedup: false,
                slice_count: 0,
            });
        }
        switches.push(Switch {
            stage: 1,
            index_in_stage: j,
            block: 0,
            input_links,
            output_links,
        });
    }
    let master_links = (0..n)
        .map(|m| m as usize) // port-0 links come first in construction order
        .collect();
    let mut route = vec![vec![NO_ROUTE; banks as usize]; switches.len()];
    for j in 0..k {
        for s in 0..r {
            route[j as usize][(j * r + s) as usize] = s as u16;
        }
    }
    Ok(Topology {
        kind: TopologyKind::FlatCrossbar,
        masters: n,
        banks,
        speedup: r,
        stage_count: 1,
        switches,
        links,
        master_links,
        route,
    })
}

/// One 2-ary butterfly building block: log2(n) stages of radix-2
/// switches. With r=2 the links from the second stage onward are doubled
/// into two parallel streams and each final output position feeds r banks
/// (n*r banks in total).
pub fn build_building_block(n: u32, r: u32) -> Result<Topology, TopologyError> {
    require_pow2("n", n, 4)?;
    if r != 1 && r != 2 {
        return Err(TopologyError::UnsupportedSpeedup(r));
    }
    let mut b = BlockBuilder::new(n, r);
    b.add_block(0);
    b.finish(TopologyKind::BuildingBlock)
}

/// Two building blocks (r=2) joined by speed-up links: every first-stage
/// switch also sends two links (one per position half) to the sister
/// block's second-stage switches, so remote traffic merges into every
/// second-level switch.
pub fn build_dsmc(n_per_block: u32) -> Result<Topology, TopologyError> {
    require_pow2("n_per_block", n_per_block, 8)?;
    let mut b = BlockBuilder::new(n_per_block, 2);
    b.add_block(0);
    b.add_block(1);
    b.wire_speedup_links();
    b.finish(TopologyKind::DsmcTwoBlock)
}

struct BlockBuilder {
    n: u32,
    r: u32,
    stages: u32,
    switches: Vec<Switch>,
    links: Vec<Link>,
    master_links: Vec<LinkId>,
    ids: HashMap<(u32, u32, u32), SwitchId>, // (block, stage, index)
    blocks: u32,
}

impl BlockBuilder {
    fn new(n: u32, r: u32) -> Self {
        Self {
            n,
            r,
            stages: n.trailing_zeros(),
            switches: Vec::new(),
            links: Vec::new(),
            master_links: Vec::new(),
            ids: HashMap::new(),
            blocks: 0,
        }
    }

    /// The two wire positions paired by the switch at `stage`, `index`.
    fn positions(&self, stage: u32, index: u32) -> (u32, u32) {
        let bit = self.stages - stage;
        let low = index & ((1 << bit) - 1);
        let high = (index >> bit) << (bit + 1);
        (high | low, high | low | (1 << bit))
    }

    fn index_for_position(&self, stage: u32, p: u32) -> u32 {
        let bit = self.stages - stage;
        let low = p & ((1 << bit) - 1);
        let high = (p >> (bit + 1)) << bit;
        high | low
    }

    fn add_block(&mut self, block: u32) {
        let n = self.n;
        let half = n / 2;
        for stage in 1..=self.stages {
            for index in 0..half {
                let id = self.switches.len();
                self.ids.insert((block, stage, index), id);
                self.switches.push(Switch {
                    stage,
                    index_in_stage: index,
                    block,
                    input_links: Vec::new(),
                    output_links: Vec::new(),
                });
            }
        }
        // Master links into stage 1. Master at position p enters the
        // switch pairing p; its input port is which half of the pair.
        for p in 0..n {
            let sw = self.ids[&(block, 1, self.index_for_position(1, p))];
            let port = self.switches[sw].input_links.len() as u32;
            let lid = self.links.len();
            self.links.push(Link {
                src_switch: None,
                src_master: Some(block * n + p),
                dst: Endpoint::SwitchIn { switch: sw, port },
                is_speedup: false,
                slice_count: 0,
            });
            self.switches[sw].input_links.push(lid);
            self.master_links.push(lid);
        }
        // Inter-stage links. Stage 1 outputs are single width (one link
        // per position); from the second stage onward every position
        // carries r parallel stream links.
        for stage in 1..self.stages {
            let streams_out = if stage == 1 { 1 } else { self.r };
            for index in 0..half {
                let sw = self.ids[&(block, stage, index)];
                let (p0, p1) = self.positions(stage, index);
                for p in [p0, p1] {
                    let nsw = self.ids[&(block, stage + 1, self.index_for_position(stage + 1, p))];
                    for _t in 0..streams_out {
                        self.push_inter_link(sw, nsw, false);
                    }
                }
            }
        }
        // Final stage outputs to banks: position p, stream t feeds local
        // bank p*r + t.
        let last = self.stages;
        for index in 0..half {
            let sw = self.ids[&(block, last, index)];
            let (p0, p1) = self.positions(last, index);
            for p in [p0, p1] {
                for t in 0..self.r {
                    let bank = block * n * self.r + p * self.r + t;
                    let src_port = self.switches[sw].output_links.len() as u32;
                    let lid = self.links.len();
                    self.links.push(Link {
                        src_switch: Some((sw, src_port)),
                        src_master: None,
                        dst: Endpoint::Bank(bank),
                        is_speedup: false,
                        slice_count: 0,
                    });
                    self.switches[sw].output_links.push(lid);
                }
            }
        }
        self.blocks += 1;
    }

    fn push_inter_link(&mut self, src: SwitchId, dst: SwitchId, is_speedup: bool) {
        let src_port = self.switches[src].output_links.len() as u32;
        let dst_port = self.switches[dst].input_links.len() as u32;
        let lid = self.links.len();
        self.links.push(Link {
            src_switch: Some((src, src_port)),
            src_master: None,
            dst: Endpoint::SwitchIn {
                switch: dst,
                port: dst_port,
            },
            is_speedup,
            slice_count: 0,
        });
        self.switches[src].output_links.push(lid);
        self.switches[dst].input_links.push(lid);
    }

    fn wire_speedup_links(&mut self) {
        let half = self.n / 2;
        let msb = 1 << (self.stages - 1);
        for block in 0..self.blocks {
            let sister = 1 - block;
            for index in 0..half {
                let sw = self.ids[&(block, 1, index)];
                // Remote beats skip the sister's first stage, so the entry
                // position fixes the target port's MSB; wire one link per
                // half, reusing this switch's low position bits.
                let (p0, _) = self.positions(1, index);
                for p in [p0, p0 | msb] {
                    let nsw = self.ids[&(sister, 2, self.index_for_position(2, p))];
                    self.push_inter_link(sw, nsw, true);
                }
            }
        }
    }

    fn finish(self, kind: TopologyKind) -> Result<Topology, TopologyError> {
        let banks = self.blocks * self.n * self.r;
        let masters = self.blocks * self.n;
        let mut topo = Topology {
            kind,
            masters,
            banks,
            speedup: self.r,
            stage_count: self.stages,
            switches: self.switches,
            links: self.links,
            master_links: self.master_links,
            route: Vec::new(),
        };
        topo.route = build_route_table(&topo, self.n, self.stages, self.r);
        Ok(topo)
    }
}

/// Destination-tag routing for the butterfly kinds. Stage s fixes bit
/// S - s of the target port; bits above it must already agree with the
/// switch's position, bits below are fixed downstream.
fn build_route_table(topo: &Topology, n: u32, stages: u32, r: u32) -> Vec<Vec<u16>> {
    let banks_per_block = n * r;
    let mut route = vec![vec![NO_ROUTE; topo.banks as usize]; topo.switches.len()];
    for (sid, sw) in topo.switches.iter().enumerate() {
        let bit = stages - sw.stage;
        let (p0, _) = {
            let low = sw.index_in_stage & ((1 << bit) - 1);
            let high = (sw.index_in_stage >> bit) << (bit + 1);
            (high | low, ())
        };
        for bank in 0..topo.banks {
            let bank_block = bank / banks_per_block;
            let local = bank % banks_per_block;
            let port = local / r;
            let stream = local % r;
            let half_sel = (port >> bit) & 1;
            let choice = if sw.stage == 1 {
                if bank_block == sw.block {
                    Some(half_sel)
                } else if topo.kind == TopologyKind::DsmcTwoBlock {
                    Some(2 + half_sel) // speed-up outputs follow the two local ones
                } else {
                    None
                }
            } else {
                // Bits above `bit` must already match the target port.
                let mask_high = !((1u32 << (bit + 1)) - 1);
                if sw.block != bank_block || (p0 & mask_high) != (port & mask_high) {
                    None
                } else {
                    Some(half_sel * r + stream)
                }
            };
            if let Some(c) = choice {
                route[sid][bank as usize] = c as u16;
            }
        }
    }
    route
}

// ---------------------------------------------------------------------------
// Canonical geometric embedding and brute-force crossing counter.

/// A bipartite layer drawn in two columns: each wire is a straight
/// segment from a left-column y to a right-column y.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// (left y, right y) per wire, y = index in the given order.
    pub segments: Vec<(f64, f64)>,
}

/// Place left ports at y = position in `left_order` and right ports
/// likewise, then realize `wires` as straight segments.
pub fn canonical_embedding(
    wires: &[(u32, u32)],
    left_order: &[u32],
    right_order: &[u32],
) -> Result<Embedding, TopologyError> {
    let index_of = |order: &[u32]| -> Result<HashMap<u32, usize>, TopologyError> {
        let mut map = HashMap::new();
        for (i, &p) in order.iter().enumerate() {
            if map.insert(p, i).is_some() {
                return Err(TopologyError::DuplicatePort(p));
            }
        }
        Ok(map)
    };
    let left = index_of(left_order)?;
    let right = index_of(right_order)?;
    let mut segments = Vec::with_capacity(wires.len());
    for &(a, b) in wires {
        let ya = *left.get(&a).ok_or(TopologyError::MissingPort(a))? as f64;
        let yb = *right.get(&b).ok_or(TopologyError::MissingPort(b))? as f64;
        segments.push((ya, yb));
    }
    Ok(Embedding { segments })
}

/// Count unordered segment pairs that cross: (ya - yc)(yb - yd) < 0.
/// Pairs sharing an endpoint never cross. O(W^2) pair scan, fine at desk
/// scale.
pub fn count_crossings_geometric(e: &Embedding) -> u64 {
    let mut count = 0u64;
    for i in 0..e.segments.len() {
        for j in (i + 1)..e.segments.len() {
            let (a, b) = e.segments[i];
            let (c, d) = e.segments[j];
            if (a - c) * (b - d) < 0.0 {
                count += 1;
            }
        }
    }
    count
}

/// The canonical full-bipartite embedding of the flat crossbar layer.
pub fn flat_crossbar_embedding(n: u32, k: u32) -> Embedding {
    let wires: Vec<(u32, u32)> = (0..n).flat_map(|m| (0..k).map(move |s| (m, s))).collect();
    let left: Vec<u32> = (0..n).collect();
    let right: Vec<u32> = (0..k).collect();
    canonical_embedding(&wires, &left, &right).expect("canonical orders are duplicate-free")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::crossings_flat;

    #[test]
    fn flat_crossbar_shape() {
        let t = build_flat_crossbar(1, 1, 1).unwrap();
        assert_eq!((t.masters, t.banks), (1, 1));
        assert_eq!(t.links.len(), 2); // one wire in, one bank link

        let t = build_flat_crossbar(32, 32, 1).unwrap();
        let wires = t.links.iter().filter(|l| l.src_master.is_some()).count();
        assert_eq!(wires, 1024);

        let t = build_flat_crossbar(16, 16, 2).unwrap();
        assert_eq!(t.banks, 32);
        assert!(t.fully_connected());
    }

    #[test]
    fn building_block_shape() {
        let t = build_building_block(4, 1).unwrap();
        assert_eq!(t.stage_count, 2);
        assert_eq!(t.banks, 4);
        assert!(t.fully_connected());

        let t = build_building_block(16, 1).unwrap();
        assert_eq!(t.stage_count, 4);
        assert_eq!(t.banks, 16);
        // Radix 2 everywhere: two wire positions in and out per switch.
        for sw in &t.switches {
            assert_eq!(sw.output_links.len(), 2);
            assert_eq!(sw.input_links.len(), 2);
        }
        assert!(t.fully_connected());

        let t = build_building_block(16, 2).unwrap();
        assert_eq!(t.banks, 32);
        for sw in &t.switches {
            // Stage 1 single width out, later stages doubled.
            let expect = if sw.stage == 1 { 2 } else { 4 };
            assert_eq!(sw.output_links.len(), expect, "stage {}", sw.stage);
        }
        assert!(t.fully_connected());
    }

    #[test]
    fn dsmc_shape() {
        let t = build_dsmc(16).unwrap();
        assert_eq!(t.masters, 32);
        assert_eq!(t.banks, 64);
        // 8 first-stage switches per block, 2 speed-up links each.
        let speedup_links = t.links.iter().filter(|l| l.is_speedup).count();
        assert_eq!(speedup_links, 2 * 8 * 2);
        assert!(t.fully_connected());

        let t = build_dsmc(8).unwrap();
        assert_eq!((t.masters, t.banks), (16, 32));
        assert!(t.fully_connected());
    }

    #[test]
    fn speedup_links_only_in_dsmc() {
        for t in [
            build_flat_crossbar(16, 16, 2).unwrap(),
            build_building_block(16, 2).unwrap(),
        ] {
            assert!(t.links.iter().all(|l| !l.is_speedup));
        }
    }

    #[test]
    fn remote_paths_use_one_speedup_link() {
        let t = build_dsmc(16).unwrap();
        for m in 0..t.masters {
            for b in 0..t.banks {
                let path = t.path_from(m, b).unwrap();
                let speedups = path.iter().filter(|&&l| t.links[l].is_speedup).count();
                let remote = t.block_of_master(m) != t.block_of_bank(b);
                assert_eq!(speedups, usize::from(remote), "m={m} b={b}");
                // Same hop count local or remote: the speed-up link skips
                // the sister's first stage.
                assert_eq!(t.hops(m, b), Some(t.stage_count), "m={m} b={b}");
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_dsmc(16).unwrap().export_text();
        let b = build_dsmc(16).unwrap().export_text();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_building_block(6, 1).is_err());
        assert!(build_building_block(16, 3).is_err());
        assert!(build_dsmc(4).is_err());
        assert!(build_flat_crossbar(0, 1, 1).is_err());
    }

    #[test]
    fn embedding_identity_and_reversal() {
        let n = 8u32;
        let wires: Vec<(u32, u32)> = (0..n).map(|i| (i, i)).collect();
        let order: Vec<u32> = (0..n).collect();
        let e = canonical_embedding(&wires, &order, &order).unwrap();
        assert_eq!(count_crossings_geometric(&e), 0);

        for n in [2u32, 8, 16, 64] {
            let wires: Vec<(u32, u32)> = (0..n).map(|i| (i, n - 1 - i)).collect();
            let order: Vec<u32> = (0..n).collect();
            let e = canonical_embedding(&wires, &order, &order).unwrap();
            assert_eq!(
                count_crossings_geometric(&e),
                (n as u64) * (n as u64 - 1) / 2
            );
        }
    }

    #[test]
    fn embedding_rejects_duplicates() {
        let wires = [(0u32, 0u32)];
        assert!(canonical_embedding(&wires, &[0, 0], &[0]).is_err());
    }

    #[test]
    fn geometric_oracle_matches_flat_formula() {
        for n in [2u32, 4, 8, 16] {
            for k in [2u32, 4, 8, 16] {
                let e = flat_crossbar_embedding(n, k);
                assert_eq!(
                    count_crossings_geometric(&e),
                    crossings_flat(n as u64, k as u64),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn export_text_mentions_speedup_and_slices() {
        let mut t = build_dsmc(8).unwrap();
        let id = t.links.iter().position(|l| l.is_speedup).unwrap();
        t.links[id].slice_count = 2;
        let text = t.export_text();
        assert!(text.contains("speedup"));
        assert!(text.contains("slices=2"));
    }
}
