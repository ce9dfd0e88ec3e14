//! Storage-device characteristics and per-block transfer timing.
//!
//! The default catalog carries the four device classes the simulator models:
//! DRAM, PCM-class NVM, SSD, and HDD. Timing of a block transfer is
//! `latency + block_size / bandwidth`, rounded to the nearest nanosecond.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per GB used throughout for capacities and prices.
pub const BYTES_PER_GB: u64 = 1 << 30;

/// Default block size in bytes (typical DBMS page).
pub const DEFAULT_BLOCK_SIZE: u32 = 4096;

/// Storage tiers, fastest first. A hierarchy orders tiers strictly by this
/// enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TierKind {
    Dram,
    Nvm,
    Ssd,
    Hdd,
}

impl TierKind {
    pub fn parse(s: &str) -> Option<TierKind> {
        match s.to_ascii_lowercase().as_str() {
            "dram" => Some(TierKind::Dram),
            "nvm" => Some(TierKind::Nvm),
            "ssd" => Some(TierKind::Ssd),
            "hdd" => Some(TierKind::Hdd),
            _ => None,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            TierKind::Dram => "dram",
            TierKind::Nvm => "nvm",
            TierKind::Ssd => "ssd",
            TierKind::Hdd => "hdd",
        }
    }
}

impl fmt::Display for TierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transfer direction for timing purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Read,
    Write,
}

/// Per-tier timing, cost, and capacity parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub kind: TierKind,
    pub read_latency_ns: u64,
    pub write_latency_ns: u64,
    pub bandwidth_bytes_per_s: u64,
    pub cost_per_gb: f64,
    /// Capacity in bytes; 0 means the tier is absent.
    pub capacity_bytes: u64,
}

impl DeviceSpec {
    /// Checks the positivity invariants and that the capacity is a whole
    /// multiple of `block_size`.
    pub fn validate(&self, block_size: u32) -> Result<()> {
        if self.read_latency_ns == 0 || self.write_latency_ns == 0 {
            return Err(Error::InvalidDevice(format!(
                "{} latencies must be positive",
                self.kind
            )));
        }
        if self.bandwidth_bytes_per_s == 0 {
            return Err(Error::InvalidDevice(format!(
                "{} bandwidth must be positive",
                self.kind
            )));
        }
        if self.cost_per_gb < 0.0 {
            return Err(Error::InvalidDevice(format!(
                "{} cost per GB must be non-negative",
                self.kind
            )));
        }
        if block_size == 0 {
            return Err(Error::InvalidDevice("block size must be positive".into()));
        }
        if !self.capacity_bytes.is_multiple_of(block_size as u64) {
            return Err(Error::InvalidDevice(format!(
                "{} capacity {} is not a multiple of block size {}",
                self.kind, self.capacity_bytes, block_size
            )));
        }
        Ok(())
    }

    pub fn latency_ns(&self, direction: Direction) -> u64 {
        match direction {
            Direction::Read => self.read_latency_ns,
            Direction::Write => self.write_latency_ns,
        }
    }

    /// Capacity expressed in block slots.
    pub fn capacity_slots(&self, block_size: u32) -> u64 {
        self.capacity_bytes / block_size as u64
    }

    /// Time to move one block of `block_size` bytes through this device:
    /// `latency + block_size / bandwidth`, rounded to the nearest nanosecond.
    pub fn block_transfer_time(&self, direction: Direction, block_size: u32) -> u64 {
        block_transfer_time(self, direction, block_size)
    }

    /// Purchase cost in dollars: `cost_per_gb * capacity_in_gb`.
    pub fn cost(&self) -> f64 {
        device_cost(self)
    }

    fn with_capacity(&self, capacity_bytes: u64) -> DeviceSpec {
        DeviceSpec {
            capacity_bytes,
            ..self.clone()
        }
    }
}

/// `latency(direction) + block_size / bandwidth` in nanoseconds, rounded to
/// nearest.
pub fn block_transfer_time(spec: &DeviceSpec, direction: Direction, block_size: u32) -> u64 {
    debug_assert!(block_size > 0);
    let transfer_ns = block_size as f64 * 1e9 / spec.bandwidth_bytes_per_s as f64;
    (spec.latency_ns(direction) as f64 + transfer_ns).round() as u64
}

/// Device purchase cost in dollars; 0 when the tier is absent.
pub fn device_cost(spec: &DeviceSpec) -> f64 {
    spec.cost_per_gb * spec.capacity_bytes as f64 / BYTES_PER_GB as f64
}

/// Named device profiles plus the NVM latency multiplier.
///
/// The multiplier, when set, overrides the NVM profile so that NVM read and
/// write latency both equal `m` times the DRAM read latency. It never
/// compounds: it is applied to the pristine profiles on every lookup.
#[derive(Debug, Clone)]
pub struct DeviceCatalog {
    profiles: Vec<(String, DeviceSpec)>,
    nvm_latency_mult: Option<f64>,
}

impl Default for DeviceCatalog {
    fn default() -> Self {
        let gb = |n: u64| n * 1_000_000_000; // bandwidths are decimal GB/s
        DeviceCatalog {
            profiles: vec![
                (
                    "dram".into(),
                    DeviceSpec {
                        kind: TierKind::Dram,
                        read_latency_ns: 50,
                        write_latency_ns: 50,
                        bandwidth_bytes_per_s: gb(60),
                        cost_per_gb: 10.0,
                        capacity_bytes: 0,
                    },
                ),
                (
                    "nvm".into(),
                    DeviceSpec {
                        kind: TierKind::Nvm,
                        read_latency_ns: 50,
                        write_latency_ns: 200,
                        bandwidth_bytes_per_s: gb(10),
                        cost_per_gb: 1.0,
                        capacity_bytes: 0,
                    },
                ),
                (
                    "rram".into(),
                    DeviceSpec {
                        kind: TierKind::Nvm,
                        read_latency_ns: 100,
                        write_latency_ns: 100,
                        bandwidth_bytes_per_s: gb(10),
                        cost_per_gb: 1.0,
                        capacity_bytes: 0,
                    },
                ),
                (
                    "ssd".into(),
                    DeviceSpec {
                        kind: TierKind::Ssd,
                        read_latency_ns: 25_000,
                        write_latency_ns: 300_000,
                        bandwidth_bytes_per_s: gb(1),
                        cost_per_gb: 0.2,
                        capacity_bytes: 0,
                    },
                ),
                (
                    "hdd".into(),
                    DeviceSpec {
                        kind: TierKind::Hdd,
                        read_latency_ns: 10_000_000,
                        write_latency_ns: 10_000_000,
                        bandwidth_bytes_per_s: gb(1) / 10,
                        cost_per_gb: 0.02,
                        capacity_bytes: 0,
                    },
                ),
            ],
            nvm_latency_mult: None,
        }
    }
}

impl DeviceCatalog {
    /// Sets the NVM latency multiplier. Overrides any previous value.
    pub fn set_nvm_latency_multiplier(&mut self, m: f64) -> Result<()> {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::InvalidDevice(format!(
                "NVM latency multiplier must be positive and finite, got {m}"
            )));
        }
        self.nvm_latency_mult = Some(m);
        Ok(())
    }

    pub fn nvm_latency_multiplier(&self) -> Option<f64> {
        self.nvm_latency_mult
    }

    /// Looks up a profile by name, with the NVM multiplier applied.
    pub fn profile(&self, name: &str) -> Option<DeviceSpec> {
        self.profiles
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, spec)| self.apply_multiplier(spec))
    }

    /// The first profile of the given kind, with the NVM multiplier applied.
    pub fn tier_default(&self, kind: TierKind) -> Option<DeviceSpec> {
        self.profiles
            .iter()
            .find(|(_, spec)| spec.kind == kind)
            .map(|(_, spec)| self.apply_multiplier(spec))
    }

    fn apply_multiplier(&self, spec: &DeviceSpec) -> DeviceSpec {
        let mut spec = spec.clone();
        if spec.kind == TierKind::Nvm {
            if let Some(m) = self.nvm_latency_mult {
                let dram_latency = self
                    .profiles
                    .iter()
                    .find(|(_, s)| s.kind == TierKind::Dram)
                    .map(|(_, s)| s.read_latency_ns)
                    .unwrap_or(50);
                let scaled = (m * dram_latency as f64).round().max(1.0) as u64;
                spec.read_latency_ns = scaled;
                spec.write_latency_ns = scaled;
            }
        }
        spec
    }

    /// Parses a catalog file: one device per line,
    /// `<name> <kind> <read_ns> <write_ns> <bw_bytes_per_s> <cost_per_gb> <capacity_bytes>`,
    /// with `#` starting a comment line.
    pub fn parse(text: &str) -> Result<DeviceCatalog> {
        let mut profiles = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 7 fields, found {}", fields.len()),
                });
            }
            let kind = TierKind::parse(fields[1]).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("unknown device kind `{}`", fields[1]),
            })?;
            let num = |field: &str, what: &str| -> Result<u64> {
                field.parse::<u64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid {what} `{field}`"),
                })
            };
            let cost_per_gb: f64 = fields[5].parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid cost per GB `{}`", fields[5]),
            })?;
            let spec = DeviceSpec {
                kind,
                read_latency_ns: num(fields[2], "read latency")?,
                write_latency_ns: num(fields[3], "write latency")?,
                bandwidth_bytes_per_s: num(fields[4], "bandwidth")?,
                cost_per_gb,
                capacity_bytes: num(fields[6], "capacity")?,
            };
            spec.validate(1).map_err(|e| Error::Validation {
                line: lineno,
                message: e.to_string(),
            })?;
            profiles.push((fields[0].to_string(), spec));
        }
        if profiles.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "catalog contains no devices".into(),
            });
        }
        Ok(DeviceCatalog {
            profiles,
            nvm_latency_mult: None,
        })
    }

    pub fn load(path: &Path) -> Result<DeviceCatalog> {
        DeviceCatalog::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the catalog in the file format accepted by [`Self::parse`].
    pub fn render(&self) -> String {
        let mut out = String::from(
            "# <name> <kind> <read_ns> <write_ns> <bw_bytes_per_s> <cost_per_gb> <capacity_bytes>\n",
        );
        for (name, spec) in &self.profiles {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                name,
                spec.kind,
                spec.read_latency_ns,
                spec.write_latency_ns,
                spec.bandwidth_bytes_per_s,
                spec.cost_per_gb,
                spec.capacity_bytes
            ));
        }
        out
    }
}

/// A DRAM/NVM/SSD hierarchy with concrete capacities. DRAM and NVM may have
/// capacity 0 (absent tier); the SSD backing store must hold the whole
/// footprint of any trace replayed against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub dram: DeviceSpec,
    pub nvm: DeviceSpec,
    pub ssd: DeviceSpec,
}

impl Hierarchy {
    /// Builds a hierarchy from catalog tier defaults and capacities in bytes.
    pub fn from_catalog(
        catalog: &DeviceCatalog,
        dram_bytes: u64,
        nvm_bytes: u64,
        ssd_bytes: u64,
    ) -> Result<Hierarchy> {
        let tier = |kind: TierKind| {
            catalog
                .tier_default(kind)
                .ok_or_else(|| Error::InvalidDevice(format!("catalog has no {kind} profile")))
        };
        Ok(Hierarchy {
            dram: tier(TierKind::Dram)?.with_capacity(dram_bytes),
            nvm: tier(TierKind::Nvm)?.with_capacity(nvm_bytes),
            ssd: tier(TierKind::Ssd)?.with_capacity(ssd_bytes),
        })
    }

    pub fn validate(&self, block_size: u32) -> Result<()> {
        self.dram.validate(block_size)?;
        self.nvm.validate(block_size)?;
        self.ssd.validate(block_size)?;
        if self.ssd.capacity_bytes == 0 {
            return Err(Error::InvalidDevice("SSD tier must be present".into()));
        }
        Ok(())
    }

    /// Total hardware cost in dollars.
    pub fn cost(&self) -> f64 {
        self.dram.cost() + self.nvm.cost() + self.ssd.cost()
    }
}
