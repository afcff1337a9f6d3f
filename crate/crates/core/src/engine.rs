//! Synchronous cycle-level simulator.
//!
//! Movement model: each link whose destination is a switch input owns a
//! single-entry holding register at that input; register slices on a link
//! form a shift pipeline in front of it. Every cycle, stages are
//! evaluated sink-to-source so a register vacated downstream can be
//! refilled in the same cycle (flow-through), which is the standard
//! deterministic realization of a two-phase synchronous update. Each
//! switch output accepts at most one beat per cycle, chosen uniformly at
//! random among contending inputs; losers stay put and retry
//! (back-pressure). A beat placed in a first-stage register at cycle c
//! reaches its bank at c + hops + slices, so an uncontended write
//! completes at c + hops + slices + bank_latency.
//!
//! Reads: the response returns over a mirrored uncontended path (same
//! hop and slice count). Responses of one transaction are delivered to
//! the master in beat order; a response arriving ahead of a missing
//! earlier beat occupies one of `reorder_capacity` out-of-order slots,
//! and a master whose slots are full stops injecting new read beats.
//! Banks never block on responses, so the model is deadlock-free.
//!
//! Burst handling: with randomization off, a whole burst targets the
//! single bank derived from its base address (coarse interleaving), and
//! `burst_atomic` additionally locks that bank to the burst until its
//! last beat is accepted — the conventional non-disassembling
//! controller. Directed randomization splits even/odd beats across the
//! two blocks; fractal randomization assigns round-robin distinct banks
//! within each block.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::SimStats;
use crate::topology::{Endpoint, LinkId, SwitchId, Topology, TopologyKind};
use crate::traffic::{
    next_transaction, AccessKind, PatternKind, TrafficPattern, TransactionDescriptor,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("run must be longer than its warmup ({cycles} cycles, warmup {warmup})")]
    ZeroMeasurementWindow { cycles: u64, warmup: u64 },
    #[error("bank service latency must be at least 1 cycle")]
    ZeroBankLatency,
    #[error("directed randomization requires the two-block topology")]
    DirectedNeedsTwoBlocks,
    #[error("burst-atomic bank locking is incompatible with randomization (bursts must stay on one bank)")]
    AtomicWithRandomization,
    #[error("burst length {burst} exceeds the {available} distinct banks reachable per block")]
    BurstTooLongForFractal { burst: u32, available: u32 },
    #[error("no route from switch {switch} to bank {bank} (structural bug)")]
    RoutingFault { switch: SwitchId, bank: u32 },
    #[error("slice plan references unknown link {0}")]
    UnknownLink(LinkId),
    #[error("single-beat probe did not complete within {0} cycles")]
    ProbeTimeout(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectPolicy {
    /// Back-pressured beats retry at the source (default).
    Retry,
    /// A beat that cannot enter the network this cycle is discarded and
    /// counted, making admissions independent across cycles — the
    /// arrival model behind the closed-form utilization formulas.
    Drop,
}

#[derive(Debug, Clone, Copy)]
pub struct RandomizationPolicy {
    pub directed: bool,
    pub fractal: bool,
    pub rng_seed: u64,
}

impl RandomizationPolicy {
    pub fn none(rng_seed: u64) -> Self {
        Self {
            directed: false,
            fractal: false,
            rng_seed,
        }
    }

    pub fn full(rng_seed: u64) -> Self {
        Self {
            directed: true,
            fractal: true,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub bank_latency: u32,
    /// Out-of-order read-response slots per master; a full buffer gates
    /// new read-beat injection.
    pub reorder_capacity: u32,
    /// Lock a bank to one burst until its last beat is accepted.
    pub burst_atomic: bool,
    pub reject: RejectPolicy,
    /// Pending-request queue depth per master. 0 keeps the closed-loop
    /// model (a master draws its next transaction only when idle, so
    /// waiting time never accumulates). With depth > 0 transactions
    /// arrive open-loop at `injection_rate` beats per cycle into a
    /// bounded FIFO and latency is counted from arrival, which exposes
    /// the queueing knee at the saturation rate.
    pub queue_depth: u32,
    pub cycles: u64,
    /// Leading cycles excluded from all measured statistics.
    pub warmup: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            bank_latency: 1,
            reorder_capacity: 4,
            burst_atomic: false,
            reject: RejectPolicy::Retry,
            queue_depth: 0,
            cycles: 20_000,
            warmup: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Beat {
    pub id: u64,
    pub master: u32,
    pub burst_id: u64,
    pub beat_index: u32,
    pub burst_len: u32,
    pub kind: AccessKind,
    pub target_bank: u32,
    pub inject_cycle: u64,
    pub complete_cycle: Option<u64>,
}

/// Output port of `switch` leading toward `bank`; error when unreachable.
pub fn route_beat(topo: &Topology, switch: SwitchId, bank: u32) -> Result<u32, EngineError> {
    topo.route(switch, bank)
        .ok_or(EngineError::RoutingFault { switch, bank })
}

/// Uniform random grant of up to `capacity` contenders; the rest stall.
pub fn arbitrate<T: Copy>(
    contenders: &[T],
    capacity: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<T>, Vec<T>) {
    if contenders.len() <= capacity {
        return (contenders.to_vec(), Vec::new());
    }
    // Partial Fisher-Yates: the first `capacity` slots become the grant.
    let mut pool: Vec<T> = contenders.to_vec();
    for i in 0..capacity {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    let stalled = pool.split_off(capacity);
    (pool, stalled)
}

/// Per-beat block assignment: even beats stay in `home_block`, odd beats
/// go to the sister block.
pub fn apply_directed_randomization(
    burst_len: u32,
    home_block: u32,
    num_blocks: u32,
) -> Vec<u32> {
    debug_assert_eq!(num_blocks, 2, "current architecture has two blocks");
    (0..burst_len)
        .map(|i| if i % 2 == 0 { home_block } else { (home_block + 1) % num_blocks })
        .collect()
}

/// Round-robin cursor state for fractal spreading within blocks.
#[derive(Debug, Clone)]
pub struct FractalState {
    pub banks_per_block: u32,
    pub cursors: Vec<u32>,
}

impl FractalState {
    pub fn new(banks_per_block: u32, num_blocks: u32, start: u32) -> Self {
        Self {
            banks_per_block,
            cursors: vec![start % banks_per_block; num_blocks as usize],
        }
    }
}

/// Assign `count` beats entering `block` to consecutive round-robin
/// banks; pairwise distinct while count <= banks_per_block.
pub fn apply_fractal_randomization(state: &mut FractalState, block: u32, count: u32) -> Vec<u32> {
    let bpb = state.banks_per_block;
    let cursor = &mut state.cursors[block as usize];
    (0..count)
        .map(|_| {
            let bank = *cursor;
            *cursor = (*cursor + 1) % bpb;
            bank
        })
        .collect()
}

/// Register-slice insertion plans.
#[derive(Debug, Clone)]
pub enum SlicePlan {
    /// Explicit per-link counts; unlisted links keep their current count.
    PerLink(Vec<(LinkId, u32)>),
    /// Set every inter-block speed-up link to `count` slices.
    SpeedupUniform(u32),
    /// Set every link to `count` slices.
    AllUniform(u32),
}

/// Return a topology with slice counts updated per `plan`.
pub fn insert_register_slices(topo: &Topology, plan: &SlicePlan) -> Result<Topology, EngineError> {
    let mut out = topo.clone();
    match plan {
        SlicePlan::PerLink(entries) => {
            for &(link, count) in entries {
                out.links
                    .get_mut(link)
                    .ok_or(EngineError::UnknownLink(link))?
                    .slice_count = count;
            }
        }
        SlicePlan::SpeedupUniform(count) => {
            for link in out.links.iter_mut().filter(|l| l.is_speedup) {
                link.slice_count = *count;
            }
        }
        SlicePlan::AllUniform(count) => {
            for link in out.links.iter_mut() {
                link.slice_count = *count;
            }
        }
    }
    Ok(out)
}

struct BankState {
    in_service: Option<Beat>,
    busy_until: u64,
    /// Burst-atomic lock: (master, burst_id).
    lock: Option<(u32, u64)>,
}

struct MasterState {
    rng: ChaCha8Rng,
    next_line: u64,
    /// Burst currently being injected.
    active: Option<u64>,
    /// Waiting transactions with their arrival cycle (queue mode).
    pending: VecDeque<(TransactionDescriptor, u64)>,
    /// Next arrival drawn but not yet affordable or enqueueable.
    staged: Option<TransactionDescriptor>,
    /// Token bucket balance in beats (queue mode).
    tokens: f64,
    /// Out-of-order read responses currently buffered.
    held_count: u32,
    /// Fractal round-robin cursor per block.
    cursors: Vec<u32>,
}

struct Txn {
    master: u32,
    kind: AccessKind,
    burst_len: u32,
    created: u64,
    targets: Vec<u32>,
    next_inject: u32,
    dropped: u32,
    completed: u32,
    last_complete: u64,
    /// Next beat index the master will accept in order (reads).
    next_expected: u32,
    /// Read responses arrived ahead of order: beat_index -> arrival.
    held: BTreeMap<u32, u64>,
    /// Banks touched, for the intra-burst conflict check.
    banks_seen: Vec<u32>,
}

pub struct Sim<'a> {
    topo: &'a Topology,
    cfg: EngineConfig,
    policy: RandomizationPolicy,
    pattern: TrafficPattern,
    cycle: u64,
    /// Input register at the destination of each link (switch inputs only).
    regs: Vec<Option<Beat>>,
    /// Slice shift registers per link.
    pipes: Vec<Vec<Option<Beat>>>,
    banks: Vec<BankState>,
    masters: Vec<MasterState>,
    sw_rngs: Vec<ChaCha8Rng>,
    /// Switch ids grouped by stage, highest stage first.
    stages_desc: Vec<Vec<SwitchId>>,
    /// Master links with slices, shifted in the injection phase.
    sliced_master_links: Vec<LinkId>,
    /// All source entry links (first-stage input registers).
    entry_links: Vec<LinkId>,
    txns: HashMap<u64, Txn>,
    /// Read responses in flight, keyed by arrival cycle.
    responses: BTreeMap<u64, Vec<Beat>>,
    /// Mirrored response delay per (master, bank).
    return_delay: Vec<Vec<u32>>,
    next_beat_id: u64,
    next_burst_id: u64,
    injected_all: u64,
    served_all: u64,
    dropped_all: u64,
    stats: SimStats,
    // Reused arbitration scratch buffers.
    contenders: Vec<(LinkId, u32)>,
    eligible: Vec<LinkId>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn stream_seed(master_seed: u64, class: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(class.wrapping_mul(0x9e37) ^ splitmix64(index)))
}

fn max_burst_len(kind: PatternKind) -> u32 {
    match kind {
        PatternKind::SingleBeat => 1,
        PatternKind::Burst2 => 2,
        PatternKind::Burst4 => 4,
        PatternKind::Burst8 => 8,
        PatternKind::Burst16 | PatternKind::Mixed => 16,
    }
}

impl<'a> Sim<'a> {
    pub fn new(
        topo: &'a Topology,
        policy: RandomizationPolicy,
        pattern: TrafficPattern,
        cfg: EngineConfig,
    ) -> Result<Self, EngineError> {
        if cfg.cycles <= cfg.warmup {
            return Err(EngineError::ZeroMeasurementWindow {
                cycles: cfg.cycles,
                warmup: cfg.warmup,
            });
        }
        if cfg.bank_latency == 0 {
            return Err(EngineError::ZeroBankLatency);
        }
        if policy.directed && topo.kind != TopologyKind::DsmcTwoBlock {
            return Err(EngineError::DirectedNeedsTwoBlocks);
        }
        if cfg.burst_atomic && (policy.directed || policy.fractal) {
            return Err(EngineError::AtomicWithRandomization);
        }
        if policy.fractal {
            let max_burst = max_burst_len(pattern.kind);
            let per_block = if policy.directed {
                max_burst.div_ceil(2)
            } else {
                max_burst
            };
            if per_block > topo.banks_per_block() {
                return Err(EngineError::BurstTooLongForFractal {
                    burst: max_burst,
                    available: topo.banks_per_block(),
                });
            }
        }

        let seed = policy.rng_seed;
        let masters = (0..topo.masters)
            .map(|m| MasterState {
                rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, 1, m as u64)),
                next_line: (m as u64) << 20,
                active: None,
                pending: VecDeque::new(),
                staged: None,
                tokens: 0.0,
                held_count: 0,
                cursors: vec![
                    (stream_seed(seed, 3, m as u64) % topo.banks_per_block() as u64) as u32;
                    topo.block_count() as usize
                ],
            })
            .collect();
        let sw_rngs = (0..topo.switches.len())
            .map(|s| ChaCha8Rng::seed_from_u64(stream_seed(seed, 2, s as u64)))
            .collect();

        let max_stage = topo.stage_count;
        let mut stages_desc: Vec<Vec<SwitchId>> = Vec::new();
        for stage in (1..=max_stage).rev() {
            stages_desc.push(
                topo.switches
                    .iter()
                    .enumerate()
                    .filter(|(_, sw)| sw.stage == stage)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }

        let pipes = topo
            .links
            .iter()
            .map(|l| vec![None; l.slice_count as usize])
            .collect();
        let sliced_master_links = topo
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.src_master.is_some() && l.slice_count > 0)
            .map(|(i, _)| i)
            .collect();
        let entry_links = topo
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.src_master.is_some())
            .map(|(i, _)| i)
            .collect();

        let mut return_delay = vec![vec![0u32; topo.banks as usize]; topo.masters as usize];
        for m in 0..topo.masters {
            for b in 0..topo.banks {
                let hops = topo.hops(m, b).ok_or(EngineError::RoutingFault {
                    switch: 0,
                    bank: b,
                })?;
                let slices = topo.slices_on_path(m, b).unwrap_or(0);
                return_delay[m as usize][b as usize] = hops + slices;
            }
        }

        let stats = SimStats {
            masters: topo.masters,
            banks: topo.banks,
            bank_latency: cfg.bank_latency,
            per_master_accepted: vec![0; topo.masters as usize],
            per_bank_busy: vec![0; topo.banks as usize],
            ..Default::default()
        };

        Ok(Self {
            topo,
            cfg,
            policy,
            pattern,
            cycle: 0,
            regs: vec![None; topo.links.len()],
            pipes,
            banks: (0..topo.banks)
                .map(|_| BankState {
                    in_service: None,
                    busy_until: 0,
                    lock: None,
                })
                .collect(),
            masters,
            sw_rngs,
            stages_desc,
            sliced_master_links,
            entry_links,
            txns: HashMap::new(),
            responses: BTreeMap::new(),
            return_delay,
            next_beat_id: 0,
            next_burst_id: 0,
            injected_all: 0,
            served_all: 0,
            dropped_all: 0,
            stats,
            contenders: Vec::new(),
            eligible: Vec::new(),
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// One synchronous cycle: response delivery, bank retirement,
    /// switch movement (sink to source), master-link slice shift,
    /// injection, then bank-busy accounting.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let c = self.cycle;
        if let Some(arrivals) = self.responses.remove(&c) {
            for beat in arrivals {
                self.deliver_response(beat, c);
            }
        }
        self.retire_banks(c);
        for si in 0..self.stages_desc.len() {
            for wi in 0..self.stages_desc[si].len() {
                let sw = self.stages_desc[si][wi];
                self.move_switch(sw, c)?;
            }
        }
        for li in 0..self.sliced_master_links.len() {
            let link = self.sliced_master_links[li];
            self.shift_pipe(link, c);
        }
        if self.cfg.reject == RejectPolicy::Drop {
            self.discard_first_stage_losers(c);
        }
        for m in 0..self.masters.len() {
            self.inject(m as u32, c);
        }
        if c >= self.cfg.warmup {
            for (b, bank) in self.banks.iter().enumerate() {
                if bank.in_service.is_some() {
                    self.stats.per_bank_busy[b] += 1;
                }
            }
        }
        self.cycle += 1;
        Ok(())
    }

    /// Drop policy: a beat still sitting in a source entry register
    /// after movement lost first-stage arbitration and is discarded, so
    /// admissions stay independent across cycles (the arrival model
    /// assumed by the closed-form utilization formulas).
    fn discard_first_stage_losers(&mut self, c: u64) {
        for li in 0..self.entry_links.len() {
            let link = self.entry_links[li];
            let Some(beat) = self.regs[link] else {
                continue;
            };
            self.regs[link] = None;
            self.dropped_all += 1;
            if c >= self.cfg.warmup {
                self.stats.never_admitted_beats += 1;
            }
            if let Some(txn) = self.txns.get_mut(&beat.burst_id) {
                txn.dropped += 1;
            }
            self.try_finish_txn(beat.burst_id);
        }
    }

    fn retire_banks(&mut self, c: u64) {
        for b in 0..self.banks.len() {
            let Some(beat) = self.banks[b].in_service else {
                continue;
            };
            if self.banks[b].busy_until > c {
                continue;
            }
            self.banks[b].in_service = None;
            self.served_all += 1;
            if c >= self.cfg.warmup {
                match beat.kind {
                    AccessKind::Read => self.stats.served_read_beats += 1,
                    AccessKind::Write => self.stats.served_write_beats += 1,
                }
            }
            if beat.inject_cycle >= self.cfg.warmup {
                self.stats.beat_latency.record(c - beat.inject_cycle);
            }
            match beat.kind {
                AccessKind::Write => self.complete_beat(beat, c),
                AccessKind::Read => {
                    let delay =
                        self.return_delay[beat.master as usize][beat.target_bank as usize] as u64;
                    self.responses.entry(c + delay.max(1)).or_default().push(beat);
                }
            }
        }
    }

    /// A read response reaches its master: deliver in beat order within
    /// the transaction, buffering early arrivals.
    fn deliver_response(&mut self, beat: Beat, c: u64) {
        let Some(txn) = self.txns.get_mut(&beat.burst_id) else {
            return;
        };
        if self.cfg.reject == RejectPolicy::Drop {
            // Dropped siblings would stall in-order delivery; complete as-is.
            self.complete_beat(beat, c);
            return;
        }
        if beat.beat_index == txn.next_expected {
            txn.next_expected += 1;
            let master = txn.master;
            let mut freed = 0;
            while txn.held.remove(&txn.next_expected).is_some() {
                txn.next_expected += 1;
                txn.completed += 1;
                txn.last_complete = c;
                freed += 1;
            }
            self.masters[master as usize].held_count -= freed;
            self.complete_beat(beat, c);
        } else {
            txn.held.insert(beat.beat_index, c);
            self.masters[beat.master as usize].held_count += 1;
        }
    }

    fn complete_beat(&mut self, beat: Beat, c: u64) {
        if let Some(txn) = self.txns.get_mut(&beat.burst_id) {
            txn.completed += 1;
            txn.last_complete = c;
        }
        self.try_finish_txn(beat.burst_id);
    }

    fn try_finish_txn(&mut self, burst_id: u64) {
        let done = {
            let Some(txn) = self.txns.get(&burst_id) else {
                return;
            };
            txn.next_inject == txn.burst_len && txn.completed + txn.dropped == txn.burst_len
        };
        if !done {
            return;
        }
        let txn = self.txns.remove(&burst_id).unwrap();
        if txn.dropped == 0 && txn.created >= self.cfg.warmup {
            self.stats
                .txn_latency
                .entry((txn.kind, txn.burst_len))
                .or_default()
                .record(txn.last_complete - txn.created);
        }
    }

    fn move_switch(&mut self, sw: SwitchId, c: u64) -> Result<(), EngineError> {
        let out_count = self.topo.switches[sw].output_links.len();
        for out in 0..out_count {
            let link = self.topo.switches[sw].output_links[out];
            if self.topo.links[link].slice_count > 0 {
                self.shift_pipe(link, c);
            }
        }
        self.contenders.clear();
        for ii in 0..self.topo.switches[sw].input_links.len() {
            let in_link = self.topo.switches[sw].input_links[ii];
            if let Some(beat) = self.regs[in_link] {
                let out = route_beat(self.topo, sw, beat.target_bank)?;
                self.contenders.push((in_link, out));
            }
        }
        if self.contenders.is_empty() {
            return Ok(());
        }
        for out in 0..out_count {
            let link = self.topo.switches[sw].output_links[out];
            self.eligible.clear();
            for &(in_link, o) in &self.contenders {
                if o as usize == out && self.dst_accepts(link, &self.regs[in_link].unwrap()) {
                    self.eligible.push(in_link);
                }
            }
            if self.eligible.is_empty() {
                continue;
            }
            let winner = if self.eligible.len() == 1 {
                self.eligible[0]
            } else {
                self.eligible[self.sw_rngs[sw].gen_range(0..self.eligible.len())]
            };
            let beat = self.regs[winner].take().unwrap();
            if self.topo.links[link].slice_count > 0 {
                self.pipes[link][0] = Some(beat);
            } else {
                self.deliver(link, beat, c);
            }
        }
        Ok(())
    }

    /// Can `beat` enter the site at the far end of `link` this cycle?
    fn dst_accepts(&self, link: LinkId, beat: &Beat) -> bool {
        if self.topo.links[link].slice_count > 0 {
            return self.pipes[link][0].is_none();
        }
        match self.topo.links[link].dst {
            Endpoint::SwitchIn { .. } => self.regs[link].is_none(),
            dst => self.endpoint_accepts(dst, beat),
        }
    }

    fn endpoint_accepts(&self, dst: Endpoint, beat: &Beat) -> bool {
        match dst {
            Endpoint::SwitchIn { .. } => unreachable!("switch inputs are checked via registers"),
            Endpoint::Bank(b) => {
                let bank = &self.banks[b as usize];
                bank.in_service.is_none()
                    && bank
                        .lock
                        .map_or(true, |l| l == (beat.master, beat.burst_id))
            }
            Endpoint::Master(_) => false,
        }
    }

    fn deliver(&mut self, link: LinkId, beat: Beat, c: u64) {
        match self.topo.links[link].dst {
            Endpoint::SwitchIn { .. } => {
                debug_assert!(self.regs[link].is_none());
                self.regs[link] = Some(beat);
            }
            Endpoint::Bank(b) => self.accept_bank(b, beat, c),
            Endpoint::Master(_) => unreachable!("links never terminate at masters"),
        }
    }

    fn accept_bank(&mut self, b: u32, beat: Beat, c: u64) {
        let bank = &mut self.banks[b as usize];
        debug_assert!(bank.in_service.is_none());
        bank.in_service = Some(beat);
        bank.busy_until = c + self.cfg.bank_latency as u64;
        if self.cfg.burst_atomic {
            bank.lock = if beat.beat_index + 1 == beat.burst_len {
                None
            } else {
                Some((beat.master, beat.burst_id))
            };
        }
        if beat.burst_len > 1 {
            if let Some(txn) = self.txns.get_mut(&beat.burst_id) {
                if txn.banks_seen.contains(&b) {
                    self.stats.intra_burst_conflicts += 1;
                } else {
                    txn.banks_seen.push(b);
                }
            }
        }
    }

    fn shift_pipe(&mut self, link: LinkId, c: u64) {
        let len = self.pipes[link].len();
        if let Some(beat) = self.pipes[link][len - 1] {
            let exit_ok = match self.topo.links[link].dst {
                Endpoint::SwitchIn { .. } => self.regs[link].is_none(),
                dst => self.endpoint_accepts(dst, &beat),
            };
            if exit_ok {
                self.pipes[link][len - 1] = None;
                self.deliver(link, beat, c);
            }
        }
        for i in (1..len).rev() {
            if self.pipes[link][i].is_none() {
                self.pipes[link][i] = self.pipes[link][i - 1].take();
            }
        }
    }

    fn assign_targets(&mut self, m: u32, desc: &TransactionDescriptor) -> Vec<u32> {
        let banks = self.topo.banks as u64;
        if !self.policy.directed && !self.policy.fractal {
            // Coarse interleaving: the whole burst lives in one bank.
            return vec![(desc.base_line % banks) as u32; desc.burst_len as usize];
        }
        let bpb = self.topo.banks_per_block();
        let home = self.topo.block_of_master(m);
        let blocks = self.topo.block_count();
        let base_local = (desc.base_line % bpb as u64) as u32;
        let ms = &mut self.masters[m as usize];
        (0..desc.burst_len)
            .map(|i| {
                let block = if self.policy.directed && i % 2 == 1 {
                    (home + 1) % blocks
                } else {
                    home
                };
                let local = if self.policy.fractal {
                    let cursor = &mut ms.cursors[block as usize];
                    let v = *cursor;
                    *cursor = (*cursor + 1) % bpb;
                    v
                } else {
                    base_local
                };
                block * bpb + local
            })
            .collect()
    }

    /// Open-loop arrival into the bounded pending queue: a token bucket
    /// accrues `injection_rate` beats per cycle and releases the next
    /// drawn transaction once its full length is funded. The clock
    /// pauses while the queue is full, keeping the backlog bounded.
    fn queue_arrival(&mut self, m: u32, c: u64) {
        let rate = self.pattern.injection_rate.clamp(0.0, 1.0);
        let banks = self.topo.banks as u64;
        let ms = &mut self.masters[m as usize];
        if ms.staged.is_none() {
            let mut eager = self.pattern;
            eager.injection_rate = 1.0;
            ms.staged = next_transaction(&eager, &mut ms.rng, &mut ms.next_line, banks);
        }
        let Some(desc) = ms.staged else { return };
        let cost = desc.burst_len as f64;
        if ms.pending.len() >= self.cfg.queue_depth as usize {
            ms.tokens = ms.tokens.min(cost);
            return;
        }
        ms.tokens = (ms.tokens + rate).min(cost);
        if ms.tokens >= cost {
            ms.tokens -= cost;
            ms.pending.push_back((desc, c));
            ms.staged = None;
        }
    }

    fn inject(&mut self, m: u32, c: u64) {
        if self.cfg.queue_depth > 0 {
            self.queue_arrival(m, c);
        }
        if self.masters[m as usize].active.is_none() {
            let desc = if self.cfg.queue_depth > 0 {
                self.masters[m as usize].pending.pop_front()
            } else {
                let ms = &mut self.masters[m as usize];
                let banks = self.topo.banks as u64;
                next_transaction(&self.pattern, &mut ms.rng, &mut ms.next_line, banks)
                    .map(|d| (d, c))
            };
            if let Some((desc, created)) = desc {
                let targets = self.assign_targets(m, &desc);
                let burst_id = self.next_burst_id;
                self.next_burst_id += 1;
                self.txns.insert(
                    burst_id,
                    Txn {
                        master: m,
                        kind: desc.kind,
                        burst_len: desc.burst_len,
                        created,
                        targets,
                        next_inject: 0,
                        dropped: 0,
                        completed: 0,
                        last_complete: c,
                        next_expected: 0,
                        held: BTreeMap::new(),
                        banks_seen: Vec::new(),
                    },
                );
                self.masters[m as usize].active = Some(burst_id);
            }
        }
        let Some(burst_id) = self.masters[m as usize].active else {
            return;
        };
        let (bank, beat_index, burst_len, kind) = {
            let txn = &self.txns[&burst_id];
            (
                txn.targets[txn.next_inject as usize],
                txn.next_inject,
                txn.burst_len,
                txn.kind,
            )
        };
        // Read-beat injection is gated by out-of-order response slots.
        if kind == AccessKind::Read
            && self.cfg.reject == RejectPolicy::Retry
            && self.masters[m as usize].held_count >= self.cfg.reorder_capacity
        {
            return;
        }
        let entry = self.topo.entry_link(m, bank);
        let site_free = if self.topo.links[entry].slice_count > 0 {
            self.pipes[entry][0].is_none()
        } else {
            self.regs[entry].is_none()
        };
        if site_free {
            let beat = Beat {
                id: self.next_beat_id,
                master: m,
                burst_id,
                beat_index,
                burst_len,
                kind,
                target_bank: bank,
                inject_cycle: c,
                complete_cycle: None,
            };
            self.next_beat_id += 1;
            if self.topo.links[entry].slice_count > 0 {
                self.pipes[entry][0] = Some(beat);
            } else {
                self.regs[entry] = Some(beat);
            }
            self.injected_all += 1;
            if c >= self.cfg.warmup {
                match kind {
                    AccessKind::Read => self.stats.injected_read_beats += 1,
                    AccessKind::Write => self.stats.injected_write_beats += 1,
                }
                self.stats.per_master_accepted[m as usize] += 1;
            }
            self.advance_txn_cursor(m, burst_id, burst_len);
        } else if self.cfg.reject == RejectPolicy::Drop {
            if c >= self.cfg.warmup {
                self.stats.never_admitted_beats += 1;
            }
            if let Some(txn) = self.txns.get_mut(&burst_id) {
                txn.dropped += 1;
            }
            self.advance_txn_cursor(m, burst_id, burst_len);
            self.try_finish_txn(burst_id);
        }
    }

    fn advance_txn_cursor(&mut self, m: u32, burst_id: u64, burst_len: u32) {
        let txn = self.txns.get_mut(&burst_id).unwrap();
        txn.next_inject += 1;
        if txn.next_inject == burst_len {
            self.masters[m as usize].active = None;
        }
    }

    /// Beats currently inside the network or awaiting response delivery
    /// (conservation oracle for tests).
    pub fn beats_in_network(&self) -> u64 {
        let regs = self.regs.iter().filter(|r| r.is_some()).count();
        let piped: usize = self
            .pipes
            .iter()
            .map(|p| p.iter().filter(|s| s.is_some()).count())
            .sum();
        (regs + piped) as u64 + self.banks.iter().filter(|b| b.in_service.is_some()).count() as u64
    }

    pub fn injected_total(&self) -> u64 {
        self.injected_all
    }

    pub fn served_total(&self) -> u64 {
        self.served_all
    }

    pub fn finish(mut self) -> SimStats {
        self.stats.measured_cycles = self.cycle.saturating_sub(self.cfg.warmup);
        self.stats.in_flight_at_end = self.injected_all - self.served_all - self.dropped_all;
        self.stats
    }
}

/// Run a full simulation: `cfg.cycles` steps, statistics collected after
/// `cfg.warmup`. Deterministic for a fixed seed.
pub fn run(
    topo: &Topology,
    policy: RandomizationPolicy,
    pattern: TrafficPattern,
    cfg: EngineConfig,
) -> Result<SimStats, EngineError> {
    let mut sim = Sim::new(topo, policy, pattern, cfg)?;
    for _ in 0..cfg.cycles {
        sim.step()?;
    }
    Ok(sim.finish())
}

/// Measured end-to-end latency of a single uncontended beat from
/// `master` to `bank` (write: hops + slices + bank latency; read: adds
/// the mirrored return).
pub fn uncontended_beat_latency(
    topo: &Topology,
    cfg: EngineConfig,
    master: u32,
    bank: u32,
    kind: AccessKind,
) -> Result<u64, EngineError> {
    let pattern = TrafficPattern::new(PatternKind::SingleBeat, 0.0);
    let quiet = EngineConfig {
        warmup: 0,
        cycles: 10_000,
        ..cfg
    };
    let mut sim = Sim::new(topo, RandomizationPolicy::none(0), pattern, quiet)?;
    let burst_id = sim.next_burst_id;
    sim.next_burst_id += 1;
    sim.txns.insert(
        burst_id,
        Txn {
            master,
            kind,
            burst_len: 1,
            created: 0,
            targets: vec![bank],
            next_inject: 0,
            dropped: 0,
            completed: 0,
            last_complete: 0,
            next_expected: 0,
            held: BTreeMap::new(),
            banks_seen: Vec::new(),
        },
    );
    sim.masters[master as usize].active = Some(burst_id);
    for _ in 0..quiet.cycles {
        sim.step()?;
        if sim.txns.is_empty() && sim.injected_all == 1 {
            let stats = sim.finish();
            let hist = &stats.txn_latency[&(kind, 1)];
            return Ok(hist.min().expect("one transaction recorded"));
        }
    }
    Err(EngineError::ProbeTimeout(quiet.cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bank_utilization_flat, ContentionParams};
    use crate::metrics;
    use crate::topology::{build_building_block, build_dsmc, build_flat_crossbar};

    fn quick_cfg(cycles: u64) -> EngineConfig {
        EngineConfig {
            cycles,
            warmup: cycles / 10,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn zero_rate_run_is_silent() {
        let topo = build_dsmc(8).unwrap();
        let pattern = TrafficPattern::new(PatternKind::Mixed, 0.0);
        let stats = run(&topo, RandomizationPolicy::full(1), pattern, quick_cfg(500)).unwrap();
        assert_eq!(stats.injected_beats(), 0);
        assert_eq!(stats.served_beats(), 0);
        assert!(stats.per_bank_busy.iter().all(|&b| b == 0));
    }

    #[test]
    fn uncontended_write_latency_is_hops_plus_slices_plus_service() {
        for (topo, master, bank) in [
            (build_flat_crossbar(4, 4, 1).unwrap(), 0u32, 3u32),
            (build_building_block(16, 2).unwrap(), 5, 17),
            (build_dsmc(16).unwrap(), 3, 60),
        ] {
            let hops = topo.hops(master, bank).unwrap() as u64;
            let cfg = EngineConfig::default();
            let lat = uncontended_beat_latency(&topo, cfg, master, bank, AccessKind::Write).unwrap();
            assert_eq!(lat, hops + cfg.bank_latency as u64, "bank {bank}");

            let read = uncontended_beat_latency(&topo, cfg, master, bank, AccessKind::Read).unwrap();
            assert_eq!(read, 2 * hops + cfg.bank_latency as u64);
        }
    }

    #[test]
    fn slices_add_exactly_their_count_to_latency() {
        let base = build_dsmc(16).unwrap();
        let cfg = EngineConfig::default();
        let (m, b) = (0u32, 40u32); // remote: path crosses a speed-up link
        let before = uncontended_beat_latency(&base, cfg, m, b, AccessKind::Write).unwrap();

        let sliced = insert_register_slices(&base, &SlicePlan::SpeedupUniform(2)).unwrap();
        let after = uncontended_beat_latency(&sliced, cfg, m, b, AccessKind::Write).unwrap();
        assert_eq!(after, before + 2);

        // +1 on every link of the path adds the path's link count.
        let path = base.path_from(m, b).unwrap();
        let plan = SlicePlan::PerLink(path.iter().map(|&l| (l, 1)).collect());
        let everywhere = insert_register_slices(&base, &plan).unwrap();
        let lat = uncontended_beat_latency(&everywhere, cfg, m, b, AccessKind::Write).unwrap();
        assert_eq!(lat, before + path.len() as u64);

        // All-zero plan changes nothing.
        let zero = insert_register_slices(&base, &SlicePlan::AllUniform(0)).unwrap();
        let lat0 = uncontended_beat_latency(&zero, cfg, m, b, AccessKind::Write).unwrap();
        assert_eq!(lat0, before);
    }

    #[test]
    fn conservation_and_determinism() {
        let topo = build_dsmc(8).unwrap();
        let pattern = TrafficPattern::new(PatternKind::Mixed, 0.8);
        let cfg = EngineConfig {
            cycles: 3_000,
            warmup: 0,
            ..EngineConfig::default()
        };
        let mut sim = Sim::new(&topo, RandomizationPolicy::full(9), pattern, cfg).unwrap();
        for _ in 0..cfg.cycles {
            sim.step().unwrap();
        }
        // Injected = served + still in the network or response path.
        let in_responses: u64 = sim.responses.values().map(|v| v.len() as u64).sum();
        assert_eq!(
            sim.injected_total(),
            sim.served_total() + sim.beats_in_network()
        );
        let _ = in_responses; // responses already counted as served
        let a = sim.finish();
        let b = run(&topo, RandomizationPolicy::full(9), pattern, cfg).unwrap();
        assert_eq!(a, b);
        let c = run(&topo, RandomizationPolicy::full(10), pattern, cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn arbitrate_is_fair_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (g, s) = arbitrate(&[1], 2, &mut rng);
        assert_eq!((g.len(), s.len()), (1, 0));
        let (g, s) = arbitrate::<u32>(&[], 1, &mut rng);
        assert!(g.is_empty() && s.is_empty());

        let mut counts = [0u32; 3];
        let trials = 30_000;
        for _ in 0..trials {
            let (g, s) = arbitrate(&[0usize, 1, 2], 1, &mut rng);
            assert_eq!(g.len(), 1);
            assert_eq!(s.len(), 2);
            counts[g[0]] += 1;
        }
        for &c in &counts {
            let p = c as f64 / trials as f64;
            assert!((p - 1.0 / 3.0).abs() < 0.02, "p={p}");
        }
    }

    #[test]
    fn directed_split_is_parity_based() {
        assert_eq!(apply_directed_randomization(4, 0, 2), vec![0, 1, 0, 1]);
        assert_eq!(apply_directed_randomization(1, 1, 2), vec![1]);
        let blocks = apply_directed_randomization(16, 0, 2);
        assert_eq!(blocks.iter().filter(|&&b| b == 0).count(), 8);
    }

    #[test]
    fn fractal_assignment_is_distinct_within_burst() {
        let mut state = FractalState::new(16, 2, 5);
        let banks = apply_fractal_randomization(&mut state, 0, 4);
        let mut sorted = banks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        // Cursor advanced by the number of assignments.
        assert_eq!(state.cursors[0], (5 + 4) % 16);
        assert_eq!(state.cursors[1], 5);
    }

    #[test]
    fn drop_policy_matches_closed_form_utilization() {
        let topo = build_flat_crossbar(16, 16, 1).unwrap();
        let mut pattern = TrafficPattern::new(PatternKind::SingleBeat, 1.0);
        pattern.read_fraction = 0.0;
        let cfg = EngineConfig {
            reject: RejectPolicy::Drop,
            cycles: 30_000,
            warmup: 1_000,
            ..EngineConfig::default()
        };
        let stats = run(&topo, RandomizationPolicy::none(11), pattern, cfg).unwrap();
        let (_, mean) = metrics::bank_utilization(&stats);
        let expect =
            bank_utilization_flat(&ContentionParams::new(16, 16, 1, 1.0).unwrap());
        assert!((mean - expect).abs() < 0.02, "mean={mean} expect={expect}");
    }

    #[test]
    fn burst_atomic_serializes_a_burst_at_its_bank() {
        // Two masters, one bank: bursts must not interleave.
        let topo = build_flat_crossbar(2, 1, 1).unwrap();
        let mut pattern = TrafficPattern::new(PatternKind::Burst4, 1.0);
        pattern.read_fraction = 0.0;
        let cfg = EngineConfig {
            burst_atomic: true,
            cycles: 2_000,
            warmup: 0,
            ..EngineConfig::default()
        };
        let mut sim = Sim::new(&topo, RandomizationPolicy::none(3), pattern, cfg).unwrap();
        let mut last: Option<(u64, u32)> = None;
        for _ in 0..cfg.cycles {
            sim.step().unwrap();
            if let Some(beat) = sim.banks[0].in_service {
                if let Some((prev_burst, prev_idx)) = last {
                    if prev_burst == beat.burst_id {
                        assert!(beat.beat_index >= prev_idx);
                    } else {
                        // A new burst may only begin after the previous
                        // one's last beat.
                        assert_eq!(prev_idx, 3, "burst interleaved at bank");
                    }
                }
                last = Some((beat.burst_id, beat.beat_index));
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let flat = build_flat_crossbar(4, 4, 1).unwrap();
        let dsmc = build_dsmc(8).unwrap();
        let pattern = TrafficPattern::new(PatternKind::Mixed, 1.0);
        let cfg = EngineConfig::default();

        let r = Sim::new(&flat, RandomizationPolicy::full(0), pattern, cfg);
        assert!(matches!(r, Err(EngineError::DirectedNeedsTwoBlocks)));

        let bad = EngineConfig {
            burst_atomic: true,
            ..cfg
        };
        let r = Sim::new(&dsmc, RandomizationPolicy::full(0), pattern, bad);
        assert!(matches!(r, Err(EngineError::AtomicWithRandomization)));

        let r = Sim::new(
            &dsmc,
            RandomizationPolicy::none(0),
            pattern,
            EngineConfig {
                cycles: 10,
                warmup: 10,
                ..cfg
            },
        );
        assert!(matches!(r, Err(EngineError::ZeroMeasurementWindow { .. })));

        // burst16 with fractal-only into a small block: 16 beats need 16
        // distinct banks in the home block.
        let small = build_building_block(4, 2).unwrap();
        let p16 = TrafficPattern::new(PatternKind::Burst16, 1.0);
        let r = Sim::new(
            &small,
            RandomizationPolicy {
                directed: false,
                fractal: true,
                rng_seed: 0,
            },
            p16,
            cfg,
        );
        assert!(matches!(r, Err(EngineError::BurstTooLongForFractal { .. })));
    }

    #[test]
    fn fractal_runs_have_no_intra_burst_conflicts() {
        let topo = build_dsmc(8).unwrap();
        let pattern = TrafficPattern::new(PatternKind::Mixed, 1.0);
        let stats = run(
            &topo,
            RandomizationPolicy::full(21),
            pattern,
            quick_cfg(5_000),
        )
        .unwrap();
        assert_eq!(stats.intra_burst_conflicts, 0);
        assert!(stats.served_beats() > 0);
    }

    #[test]
    fn no_randomization_long_bursts_do_conflict() {
        // Without randomization a burst revisits its single bank, which
        // the conflict counter treats as intra-burst sharing; this guards
        // the counter against trivially passing.
        let topo = build_dsmc(8).unwrap();
        let pattern = TrafficPattern::new(PatternKind::Burst4, 1.0);
        let stats = run(
            &topo,
            RandomizationPolicy::none(21),
            pattern,
            quick_cfg(2_000),
        )
        .unwrap();
        assert!(stats.intra_burst_conflicts > 0);
    }

    #[test]
    fn saturated_throughput_is_reasonable() {
        // Sanity bounds; exact trend comparisons live in the acceptance
        // suite.
        let dsmc = build_dsmc(16).unwrap();
        let mut pattern = TrafficPattern::new(PatternKind::SingleBeat, 1.0);
        pattern.read_fraction = 0.0;
        let stats = run(
            &dsmc,
            RandomizationPolicy::full(2),
            pattern,
            quick_cfg(5_000),
        )
        .unwrap();
        let t = metrics::throughput(&stats);
        assert!(t > 0.5 && t <= 1.0, "dsmc single-beat throughput {t}");
    }
}
