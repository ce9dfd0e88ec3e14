//! Per-tier buffer pools: residency tracking, dirtiness, and LRU victim
//! selection.
//!
//! A pool never performs write-back itself; `insert` reports the victim and
//! its dirty flag and the migration engine decides where the data goes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::device::TierKind;
use crate::error::{Error, Result};

/// Logical block identifier. Valid ids are below the trace footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy)]
struct PoolEntry {
    dirty: bool,
    last_use: u64,
}

/// Fixed-slot buffer pool with strict LRU replacement.
///
/// Recency is tracked with logical timestamps; a secondary index keyed by
/// timestamp makes victim selection O(log n). Timestamps are unique because
/// the clock advances on every touch.
#[derive(Debug, Clone)]
pub struct BufferPool {
    tier: TierKind,
    capacity_slots: usize,
    entries: HashMap<BlockId, PoolEntry>,
    by_recency: BTreeMap<u64, BlockId>,
    clock: u64,
}

impl BufferPool {
    pub fn new(tier: TierKind, capacity_slots: usize) -> BufferPool {
        BufferPool {
            tier,
            capacity_slots,
            entries: HashMap::new(),
            by_recency: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn tier(&self) -> TierKind {
        self.tier
    }

    pub fn capacity_slots(&self) -> usize {
        self.capacity_slots
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, block: BlockId) -> bool {
        self.entries.contains_key(&block)
    }

    pub fn is_dirty(&self, block: BlockId) -> Option<bool> {
        self.entries.get(&block).map(|e| e.dirty)
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.entries.keys().copied()
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn touch(&mut self, block: BlockId) {
        let now = self.tick();
        let entry = self.entries.get_mut(&block).expect("block resident");
        self.by_recency.remove(&entry.last_use);
        entry.last_use = now;
        self.by_recency.insert(now, block);
    }

    /// Returns whether `block` is resident; a hit refreshes its recency.
    pub fn lookup(&mut self, block: BlockId) -> bool {
        if self.entries.contains_key(&block) {
            self.touch(block);
            true
        } else {
            false
        }
    }

    /// Installs a non-resident block, evicting the least recently used entry
    /// when the pool is full. Returns the victim and its dirty flag.
    ///
    /// A capacity-0 pool passes the block straight through. Inserting an
    /// already-resident block is a contract violation; hits must go through
    /// `lookup`/`mark_dirty`.
    pub fn insert(&mut self, block: BlockId, dirty: bool) -> Option<(BlockId, bool)> {
        assert!(
            !self.entries.contains_key(&block),
            "duplicate insert of block {block} into {} pool",
            self.tier
        );
        if self.capacity_slots == 0 {
            return Some((block, dirty));
        }
        let evicted = if self.entries.len() == self.capacity_slots {
            let (_, victim) = self
                .by_recency
                .pop_first()
                .expect("full pool has a victim");
            let entry = self.entries.remove(&victim).expect("indexed block resident");
            Some((victim, entry.dirty))
        } else {
            None
        };
        let now = self.tick();
        self.entries.insert(block, PoolEntry { dirty, last_use: now });
        self.by_recency.insert(now, block);
        evicted
    }

    /// Marks a resident block dirty and refreshes its recency.
    pub fn mark_dirty(&mut self, block: BlockId) {
        assert!(
            self.entries.contains_key(&block),
            "mark_dirty on non-resident block {block} in {} pool",
            self.tier
        );
        self.touch(block);
        self.entries.get_mut(&block).expect("block resident").dirty = true;
    }

    /// Drops all entries and resets the logical clock.
    pub fn reset(&mut self) {
        self.entries.clear();
        self.by_recency.clear();
        self.clock = 0;
    }
}

/// Initial per-tier residency loaded before a trace replays. SSD residency is
/// implicit: the backing store holds every block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    /// `(tier, block, dirty)` in file order; recency is assigned in this
    /// order, so later entries are more recently used.
    pub entries: Vec<(TierKind, BlockId, bool)>,
}

impl Snapshot {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tier_entries(&self, tier: TierKind) -> impl Iterator<Item = (BlockId, bool)> + '_ {
        self.entries
            .iter()
            .filter(move |(t, _, _)| *t == tier)
            .map(|(_, b, d)| (*b, *d))
    }

    /// Parses the snapshot format: one resident block per line,
    /// `<tier:D|N> <block_id> <dirty:0|1>`.
    pub fn parse(text: &str) -> Result<Snapshot> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `<D|N> <block_id> <0|1>`, found `{line}`"),
                });
            }
            let tier = match fields[0] {
                "D" => TierKind::Dram,
                "N" => TierKind::Nvm,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown tier `{other}` (expected D or N)"),
                    })
                }
            };
            let block = fields[1].parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid block id `{}`", fields[1]),
            })?;
            let dirty = match fields[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("invalid dirty flag `{other}` (expected 0 or 1)"),
                    })
                }
            };
            entries.push((tier, BlockId(block), dirty));
        }
        Ok(Snapshot { entries })
    }

    pub fn load(path: &Path) -> Result<Snapshot> {
        Snapshot::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (tier, block, dirty) in &self.entries {
            let t = match tier {
                TierKind::Dram => "D",
                TierKind::Nvm => "N",
                other => panic!("snapshot holds unsupported tier {other}"),
            };
            out.push_str(&format!("{t} {block} {}\n", u8::from(*dirty)));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.render())?)
    }
}

/// Replaces the pools' contents with the snapshot residency. Recency follows
/// snapshot order and each pool's clock restarts.
pub fn load_snapshot(pools: &mut [&mut BufferPool], snapshot: &Snapshot) -> Result<()> {
    for pool in pools.iter_mut() {
        pool.reset();
    }
    for &(tier, block, dirty) in &snapshot.entries {
        let pool = match pools.iter_mut().find(|p| p.tier() == tier) {
            Some(p) => p,
            None => {
                return Err(Error::Config(format!(
                    "snapshot references {tier} but the hierarchy has no such pool"
                )))
            }
        };
        if pool.contains(block) {
            return Err(Error::Config(format!(
                "snapshot lists block {block} twice for {tier}"
            )));
        }
        if pool.len() + 1 > pool.capacity_slots() {
            return Err(Error::SnapshotCapacity {
                tier,
                blocks: snapshot.tier_entries(tier).count(),
                slots: pool.capacity_slots(),
            });
        }
        pool.insert(block, dirty);
    }
    Ok(())
}
