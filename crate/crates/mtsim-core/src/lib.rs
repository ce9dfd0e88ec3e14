//! Trace-driven simulator and policy toolkit for multi-tier (DRAM/NVM/SSD)
//! buffer management.
//!
//! The crate replays block-level workload traces against configurable storage
//! hierarchies under probabilistic data-migration policies, tunes those
//! policies with simulated annealing, and recommends a hierarchy under a
//! system cost budget.
//!
//! Modules, bottom-up:
//!
//! - [`device`]: device timing/cost parameters and the default catalog.
//! - [`buffer`]: per-tier LRU buffer pools and residency snapshots.
//! - [`workload`]: synthetic trace generators, the trace file format, and
//!   skew characterization.
//! - [`engine`]: the migration engine that replays a trace under a
//!   [`engine::MigrationPolicy`] and accumulates [`engine::SimMetrics`].
//! - [`tuner`]: simulated-annealing policy adaptation.
//! - [`recommender`]: budget-constrained hierarchy enumeration, ranking, and
//!   the analytical access-time estimator.

pub mod buffer;
pub mod device;
pub mod engine;
pub mod error;
pub mod recommender;
pub mod tuner;
pub mod workload;

pub use buffer::{BlockId, BufferPool, Snapshot};
pub use device::{DeviceCatalog, DeviceSpec, Direction, Hierarchy, TierKind};
pub use engine::{run_trace, Engine, EngineConfig, MigrationPolicy, SimMetrics};
pub use error::{Error, Result};
pub use recommender::{CandidateSets, HitRatioCurve, PolicySource, Recommendation};
pub use tuner::{anneal, AnnealingConfig, PolicyGrid, TuningMode, TuningResult};
pub use workload::{Trace, TraceOperation, WorkloadShape, WorkloadSpec};
