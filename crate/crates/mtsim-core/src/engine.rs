//! The migration engine: replays trace operations against a DRAM/NVM/SSD
//! hierarchy under a four-probability data-migration policy, accumulating
//! simulated device time and traffic counters.
//!
//! The four knobs, each a probability in `[0, 1]`:
//!
//! - `d_r`: copy a block into DRAM when a read is served below DRAM.
//! - `d_w`: admit a non-resident block into DRAM on a write (otherwise the
//!   write bypasses DRAM and persists to NVM, or to SSD when NVM is absent).
//! - `n_r`: admit a block fetched from SSD into NVM (otherwise the fetch
//!   bypasses NVM straight into DRAM).
//! - `n_w`: admit a dirty block evicted from DRAM into NVM (otherwise the
//!   write-back bypasses NVM straight to SSD).
//!
//! The hierarchy is non-inclusive: promotion from NVM to DRAM copies rather
//! than moves, and bypass paths leave blocks resident in a single tier.
//! Clean victims are discarded for free; dirty victims are written one tier
//! down (or refreshed in place if NVM still holds a copy).
//!
//! Randomness comes from one ChaCha stream seeded by `rng_seed`. Draw
//! discipline, so runs are replayable: a DRAM read hit draws nothing; an NVM
//! read hit draws once (`d_r`); a double miss draws twice (`d_r` then
//! `n_r`); a write to a non-DRAM-resident block draws once (`d_w`); a dirty
//! DRAM eviction whose victim is absent from NVM draws once (`n_w`). Draws
//! happen even when a zero/one probability or an absent tier forces the
//! outcome, except where the branch itself is never reached.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::buffer::{self, BlockId, BufferPool, Snapshot};
use crate::device::{DeviceSpec, Direction, Hierarchy, TierKind, DEFAULT_BLOCK_SIZE};
use crate::error::{Error, Result};
use crate::workload::{OpKind, Trace, TraceOperation};

/// The four migration probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MigrationPolicy {
    pub d_r: f64,
    pub d_w: f64,
    pub n_r: f64,
    pub n_w: f64,
}

impl MigrationPolicy {
    /// The policy of classic storage stacks: always migrate.
    pub const EAGER: MigrationPolicy = MigrationPolicy {
        d_r: 1.0,
        d_w: 1.0,
        n_r: 1.0,
        n_w: 1.0,
    };

    pub fn new(d_r: f64, d_w: f64, n_r: f64, n_w: f64) -> Result<MigrationPolicy> {
        let policy = MigrationPolicy { d_r, d_w, n_r, n_w };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_r", self.d_r),
            ("d_w", self.d_w),
            ("n_r", self.n_r),
            ("n_w", self.n_w),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "policy {name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MigrationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?},{:?},{:?},{:?}", self.d_r, self.d_w, self.n_r, self.n_w)
    }
}

impl FromStr for MigrationPolicy {
    type Err = Error;

    /// Parses `d_r,d_w,n_r,n_w`, e.g. `1,1,0.01,0.5`.
    fn from_str(s: &str) -> Result<MigrationPolicy> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "policy must be 4 comma-separated probabilities, got `{s}`"
            )));
        }
        let mut vals = [0.0f64; 4];
        for (i, p) in parts.iter().enumerate() {
            vals[i] = p.trim().parse().map_err(|_| {
                Error::Config(format!("invalid policy probability `{p}`"))
            })?;
        }
        MigrationPolicy::new(vals[0], vals[1], vals[2], vals[3])
    }
}

/// Engine knobs besides the hierarchy itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub policy: MigrationPolicy,
    pub block_size: u32,
    /// Fraction of the replayed operations treated as warm-up: state evolves
    /// but no time or counters accumulate.
    pub warmup_fraction: f64,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            policy: MigrationPolicy::EAGER,
            block_size: DEFAULT_BLOCK_SIZE,
            warmup_fraction: 0.5,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup fraction must be in [0, 1], got {}",
                self.warmup_fraction
            )));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be positive".into()));
        }
        Ok(())
    }
}

/// Post-warm-up traffic counters and derived throughput.
///
/// `dram_hits`/`nvm_hits` count read operations served by each tier;
/// `ssd_reads` counts reads that missed both pools, so
/// `ssd_reads + dram_hits + nvm_hits` equals the number of measured reads.
/// The remaining per-tier counters count device operations: installs and
/// in-place updates for writes, service reads for reads. `nvm_writes` is the
/// wear-relevant counter used by the tuning objective.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimMetrics {
    pub ops_total: u64,
    pub ops_measured: u64,
    pub sim_time_ns: u64,
    pub throughput_ops_per_s: f64,
    pub nvm_writes: u64,
    pub ssd_reads: u64,
    pub ssd_writes: u64,
    pub dram_hits: u64,
    pub nvm_hits: u64,
    pub dram_evictions: u64,
    pub nvm_evictions: u64,
    pub dram_reads: u64,
    pub dram_writes: u64,
    pub nvm_reads: u64,
}

impl SimMetrics {
    pub const CSV_HEADER: &'static str = "ops_total,ops_measured,sim_time_ns,throughput_ops_per_s,nvm_writes,ssd_reads,ssd_writes,dram_hits,nvm_hits,dram_evictions,nvm_evictions,dram_reads,dram_writes,nvm_reads";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:?},{},{},{},{},{},{},{},{},{},{}",
            self.ops_total,
            self.ops_measured,
            self.sim_time_ns,
            self.throughput_ops_per_s,
            self.nvm_writes,
            self.ssd_reads,
            self.ssd_writes,
            self.dram_hits,
            self.nvm_hits,
            self.dram_evictions,
            self.nvm_evictions,
            self.dram_reads,
            self.dram_writes,
            self.nvm_reads
        )
    }
}

/// How many operations took each top-level service path. Exactly one path
/// executes per operation, so the counts sum to the operations stepped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathCounts {
    pub read_dram_hits: u64,
    pub read_nvm_hits: u64,
    pub read_misses: u64,
    pub write_dram_in_place: u64,
    pub write_dram_admits: u64,
    pub write_bypasses: u64,
}

impl PathCounts {
    pub fn total(&self) -> u64 {
        self.read_dram_hits
            + self.read_nvm_hits
            + self.read_misses
            + self.write_dram_in_place
            + self.write_dram_admits
            + self.write_bypasses
    }
}

/// A single-threaded replay engine. Distinct engines share nothing mutable
/// and may run in parallel.
#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    dram_spec: DeviceSpec,
    nvm_spec: DeviceSpec,
    ssd_spec: DeviceSpec,
    dram: BufferPool,
    nvm: BufferPool,
    footprint_blocks: u64,
    rng: ChaCha8Rng,
    measuring: bool,
    ops_stepped: u64,
    reads_measured: u64,
    paths: PathCounts,
    sim_time_ns: u64,
    nvm_writes: u64,
    ssd_reads: u64,
    ssd_writes: u64,
    dram_hits: u64,
    nvm_hits: u64,
    dram_evictions: u64,
    nvm_evictions: u64,
    dram_reads: u64,
    dram_writes: u64,
    nvm_reads: u64,
}

impl Engine {
    pub fn new(config: EngineConfig, hierarchy: &Hierarchy, footprint_blocks: u64) -> Result<Engine> {
        config.validate()?;
        hierarchy.validate(config.block_size)?;
        let ssd_slots = hierarchy.ssd.capacity_slots(config.block_size);
        if footprint_blocks > ssd_slots {
            return Err(Error::FootprintExceedsSsd {
                footprint_blocks,
                ssd_slots,
            });
        }
        let dram_slots = hierarchy.dram.capacity_slots(config.block_size) as usize;
        let nvm_slots = hierarchy.nvm.capacity_slots(config.block_size) as usize;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Ok(Engine {
            config,
            dram_spec: hierarchy.dram.clone(),
            nvm_spec: hierarchy.nvm.clone(),
            ssd_spec: hierarchy.ssd.clone(),
            dram: BufferPool::new(TierKind::Dram, dram_slots),
            nvm: BufferPool::new(TierKind::Nvm, nvm_slots),
            footprint_blocks,
            rng,
            measuring: true,
            ops_stepped: 0,
            reads_measured: 0,
            paths: PathCounts::default(),
            sim_time_ns: 0,
            nvm_writes: 0,
            ssd_reads: 0,
            ssd_writes: 0,
            dram_hits: 0,
            nvm_hits: 0,
            dram_evictions: 0,
            nvm_evictions: 0,
            dram_reads: 0,
            dram_writes: 0,
            nvm_reads: 0,
        })
    }

    pub fn policy(&self) -> MigrationPolicy {
        self.config.policy
    }

    pub fn set_policy(&mut self, policy: MigrationPolicy) -> Result<()> {
        policy.validate()?;
        self.config.policy = policy;
        Ok(())
    }

    pub fn dram_pool(&self) -> &BufferPool {
        &self.dram
    }

    pub fn nvm_pool(&self) -> &BufferPool {
        &self.nvm
    }

    pub fn path_counts(&self) -> PathCounts {
        self.paths
    }

    pub fn ops_stepped(&self) -> u64 {
        self.ops_stepped
    }

    /// Loads initial residency. Pool clocks reset; recency follows snapshot
    /// order.
    pub fn load_snapshot(&mut self, snapshot: &Snapshot) -> Result<()> {
        for &(_, block, _) in &snapshot.entries {
            if block.0 >= self.footprint_blocks {
                return Err(Error::Config(format!(
                    "snapshot block {block} is outside the trace footprint of {} blocks",
                    self.footprint_blocks
                )));
            }
        }
        buffer::load_snapshot(&mut [&mut self.dram, &mut self.nvm], snapshot)
    }

    /// Replays `ops` with the configured warm-up fraction, returning the
    /// post-warm-up metrics. Pool and RNG state persist across calls.
    pub fn replay(&mut self, ops: &[TraceOperation]) -> SimMetrics {
        let measure_from = (self.config.warmup_fraction * ops.len() as f64).ceil() as usize;
        self.replay_from(ops, measure_from)
    }

    /// Replays `ops` measuring from the first operation (no warm-up). Used
    /// for online tuning epochs on an already-warm engine.
    pub fn replay_measured(&mut self, ops: &[TraceOperation]) -> SimMetrics {
        self.replay_from(ops, 0)
    }

    fn replay_from(&mut self, ops: &[TraceOperation], measure_from: usize) -> SimMetrics {
        self.reset_metrics();
        for (index, op) in ops.iter().enumerate() {
            self.measuring = index >= measure_from;
            self.step(*op);
        }
        self.measuring = true;
        debug_assert_eq!(self.paths.total(), self.ops_stepped);
        debug_assert_eq!(
            self.ssd_reads + self.dram_hits + self.nvm_hits,
            self.reads_measured
        );
        self.metrics(ops.len() as u64, ops.len().saturating_sub(measure_from) as u64)
    }

    fn reset_metrics(&mut self) {
        self.reads_measured = 0;
        self.sim_time_ns = 0;
        self.nvm_writes = 0;
        self.ssd_reads = 0;
        self.ssd_writes = 0;
        self.dram_hits = 0;
        self.nvm_hits = 0;
        self.dram_evictions = 0;
        self.nvm_evictions = 0;
        self.dram_reads = 0;
        self.dram_writes = 0;
        self.nvm_reads = 0;
    }

    fn metrics(&self, ops_total: u64, ops_measured: u64) -> SimMetrics {
        let throughput = if self.sim_time_ns > 0 {
            ops_measured as f64 / (self.sim_time_ns as f64 / 1e9)
        } else {
            0.0
        };
        SimMetrics {
            ops_total,
            ops_measured,
            sim_time_ns: self.sim_time_ns,
            throughput_ops_per_s: throughput,
            nvm_writes: self.nvm_writes,
            ssd_reads: self.ssd_reads,
            ssd_writes: self.ssd_writes,
            dram_hits: self.dram_hits,
            nvm_hits: self.nvm_hits,
            dram_evictions: self.dram_evictions,
            nvm_evictions: self.nvm_evictions,
            dram_reads: self.dram_reads,
            dram_writes: self.dram_writes,
            nvm_reads: self.nvm_reads,
        }
    }

    fn step(&mut self, op: TraceOperation) {
        debug_assert!(op.block.0 < self.footprint_blocks, "block outside footprint");
        self.ops_stepped += 1;
        match op.kind {
            OpKind::Read => {
                if self.measuring {
                    self.reads_measured += 1;
                }
                self.handle_read(op.block);
            }
            OpKind::Write => {
                self.handle_write(op.block);
            }
        }
    }

    fn draw(&mut self, probability: f64) -> bool {
        self.rng.random::<f64>() < probability
    }

    fn dram_present(&self) -> bool {
        self.dram.capacity_slots() > 0
    }

    fn nvm_present(&self) -> bool {
        self.nvm.capacity_slots() > 0
    }

    /// Accounts one device operation and returns its transfer time.
    fn charge(&mut self, tier: TierKind, direction: Direction) -> u64 {
        let spec = match tier {
            TierKind::Dram => &self.dram_spec,
            TierKind::Nvm => &self.nvm_spec,
            TierKind::Ssd => &self.ssd_spec,
            TierKind::Hdd => unreachable!("engine hierarchies end at SSD"),
        };
        let t = spec.block_transfer_time(direction, self.config.block_size);
        if self.measuring {
            self.sim_time_ns += t;
            match (tier, direction) {
                (TierKind::Dram, Direction::Read) => self.dram_reads += 1,
                (TierKind::Dram, Direction::Write) => self.dram_writes += 1,
                (TierKind::Nvm, Direction::Read) => self.nvm_reads += 1,
                (TierKind::Nvm, Direction::Write) => self.nvm_writes += 1,
                (TierKind::Ssd, Direction::Read) => self.ssd_reads += 1,
                (TierKind::Ssd, Direction::Write) => self.ssd_writes += 1,
                (TierKind::Hdd, _) => unreachable!(),
            }
        }
        t
    }

    /// Serves a read. Exactly one of three paths executes: DRAM hit, NVM hit
    /// (with optional promotion copy into DRAM), or a double miss fetched
    /// from SSD and installed per `n_r`/`d_r`.
    fn handle_read(&mut self, block: BlockId) -> u64 {
        if self.dram.lookup(block) {
            self.paths.read_dram_hits += 1;
            if self.measuring {
                self.dram_hits += 1;
            }
            return self.charge(TierKind::Dram, Direction::Read);
        }

        if self.nvm.lookup(block) {
            self.paths.read_nvm_hits += 1;
            if self.measuring {
                self.nvm_hits += 1;
            }
            let mut charged = self.charge(TierKind::Nvm, Direction::Read);
            // Promotion copies; the NVM copy and its dirty flag survive.
            let promote = self.draw(self.config.policy.d_r);
            if promote && self.dram_present() {
                charged += self.install_dram(block, false);
            }
            return charged;
        }

        self.paths.read_misses += 1;
        let mut charged = self.charge(TierKind::Ssd, Direction::Read);
        let promote = self.draw(self.config.policy.d_r);
        let admit = self.draw(self.config.policy.n_r);
        if admit && self.nvm_present() {
            charged += self.install_nvm(block, false);
            if promote && self.dram_present() {
                charged += self.install_dram(block, false);
            }
        } else if self.dram_present() {
            // NVM bypassed (or absent): the fetch lands in DRAM, clean.
            charged += self.install_dram(block, false);
        }
        charged
    }

    /// Serves a write. Exactly one of three paths executes: in-place update
    /// of a DRAM-resident block, admission into DRAM per `d_w`, or a DRAM
    /// bypass that persists to NVM (SSD when NVM is absent).
    fn handle_write(&mut self, block: BlockId) -> u64 {
        if self.dram.contains(block) {
            // Coherence: the resident copy must be updated regardless of d_w.
            self.paths.write_dram_in_place += 1;
            self.dram.mark_dirty(block);
            return self.charge(TierKind::Dram, Direction::Write);
        }

        let admit_dram = self.draw(self.config.policy.d_w);
        if admit_dram && self.dram_present() {
            self.paths.write_dram_admits += 1;
            return self.install_dram(block, true);
        }

        self.paths.write_bypasses += 1;
        if self.nvm_present() {
            if self.nvm.contains(block) {
                self.nvm.mark_dirty(block);
                self.charge(TierKind::Nvm, Direction::Write)
            } else {
                self.install_nvm(block, true)
            }
        } else {
            self.charge(TierKind::Ssd, Direction::Write)
        }
    }

    fn install_dram(&mut self, block: BlockId, dirty: bool) -> u64 {
        let mut charged = self.charge(TierKind::Dram, Direction::Write);
        if let Some((victim, was_dirty)) = self.dram.insert(block, dirty) {
            if self.measuring {
                self.dram_evictions += 1;
            }
            charged += self.evict_from_dram(victim, was_dirty);
        }
        charged
    }

    fn install_nvm(&mut self, block: BlockId, dirty: bool) -> u64 {
        let mut charged = self.charge(TierKind::Nvm, Direction::Write);
        if let Some((victim, was_dirty)) = self.nvm.insert(block, dirty) {
            if self.measuring {
                self.nvm_evictions += 1;
            }
            charged += self.evict_from_nvm(victim, was_dirty);
        }
        charged
    }

    /// Handles a block evicted from DRAM: clean victims are discarded;
    /// dirty victims refresh an existing NVM copy, or are admitted to NVM
    /// per `n_w`, or are written back straight to SSD.
    fn evict_from_dram(&mut self, victim: BlockId, was_dirty: bool) -> u64 {
        if !was_dirty {
            return 0;
        }
        if self.nvm_present() && self.nvm.contains(victim) {
            self.nvm.mark_dirty(victim);
            return self.charge(TierKind::Nvm, Direction::Write);
        }
        let admit = self.draw(self.config.policy.n_w);
        if admit && self.nvm_present() {
            self.install_nvm(victim, true)
        } else {
            self.charge(TierKind::Ssd, Direction::Write)
        }
    }

    /// Handles a block evicted from NVM: dirty victims are written to SSD,
    /// clean victims are discarded. A DRAM copy, if any, is unaffected.
    fn evict_from_nvm(&mut self, _victim: BlockId, was_dirty: bool) -> u64 {
        if was_dirty {
            self.charge(TierKind::Ssd, Direction::Write)
        } else {
            0
        }
    }
}

/// Replays a whole trace on a fresh engine, optionally seeding residency
/// from a snapshot. Identical inputs yield bit-identical metrics.
pub fn run_trace(
    config: &EngineConfig,
    hierarchy: &Hierarchy,
    trace: &Trace,
    snapshot: Option<&Snapshot>,
) -> Result<SimMetrics> {
    let mut engine = Engine::new(config.clone(), hierarchy, trace.footprint_blocks)?;
    if let Some(snapshot) = snapshot {
        engine.load_snapshot(snapshot)?;
    }
    Ok(engine.replay(&trace.ops))
}
