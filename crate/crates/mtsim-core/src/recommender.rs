//! Budget-constrained storage-hierarchy recommendation.
//!
//! Enumerates candidate DRAM/NVM/SSD capacity triples under a cost budget,
//! measures each candidate's throughput by trace replay (optionally tuning
//! the policy per candidate first), and ranks by performance per dollar.
//! Also exposes the linear-hierarchy effective-access-time estimator used
//! for quick screening; ranking itself always relies on measurement because
//! the hit-ratio function of a workload has no closed form.

use rayon::prelude::*;
use serde::Serialize;

use crate::buffer::BufferPool;
use crate::device::{DeviceCatalog, Hierarchy, TierKind, BYTES_PER_GB};
use crate::engine::{run_trace, EngineConfig, MigrationPolicy, SimMetrics};
use crate::error::{Error, Result};
use crate::tuner::{anneal, AnnealingConfig, PolicyGrid};
use crate::workload::Trace;

/// Candidate capacities per tier, in bytes. Non-zero capacities must be
/// powers of two times 1 GB; 0 models an absent tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSets {
    pub dram: Vec<u64>,
    pub nvm: Vec<u64>,
    pub ssd: Vec<u64>,
}

impl CandidateSets {
    pub fn new(dram: Vec<u64>, nvm: Vec<u64>, ssd: Vec<u64>) -> Result<CandidateSets> {
        let sets = CandidateSets { dram, nvm, ssd };
        for (tier, values) in [
            ("dram", &sets.dram),
            ("nvm", &sets.nvm),
            ("ssd", &sets.ssd),
        ] {
            if values.is_empty() {
                return Err(Error::Config(format!("{tier} candidate set is empty")));
            }
            for &v in values {
                if v != 0 && !(v % BYTES_PER_GB == 0 && (v / BYTES_PER_GB).is_power_of_two()) {
                    return Err(Error::Config(format!(
                        "{tier} capacity {v} bytes is not a power-of-two number of GB"
                    )));
                }
            }
        }
        Ok(sets)
    }

    /// Typical provisioning ranges: DRAM from 4 GB to 64 GB, NVM from
    /// 512 GB to 2 TB, SSD at 2 TB, plus the absent-tier option in every
    /// set. An absent SSD never survives the footprint constraint, since
    /// the database must fit the lowest level.
    pub fn defaults() -> CandidateSets {
        let gb = |n: u64| n * BYTES_PER_GB;
        CandidateSets {
            dram: vec![0, gb(4), gb(8), gb(16), gb(32), gb(64)],
            nvm: vec![0, gb(512), gb(1024), gb(2048)],
            ssd: vec![0, gb(2048)],
        }
    }
}

/// One capacity triple, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub dram_bytes: u64,
    pub nvm_bytes: u64,
    pub ssd_bytes: u64,
}

/// All capacity triples that fit the budget, hold the footprint on SSD, and
/// keep at least one tier above SSD. Enumeration order is dram-major over
/// the sets as given.
pub fn enumerate(
    sets: &CandidateSets,
    catalog: &DeviceCatalog,
    budget: f64,
    footprint_bytes: u64,
) -> Result<Vec<Candidate>> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::Config(format!("budget must be positive, got {budget}")));
    }
    let price = |kind: TierKind, bytes: u64| -> Result<f64> {
        let spec = catalog
            .tier_default(kind)
            .ok_or_else(|| Error::Config(format!("catalog has no {kind} profile")))?;
        Ok(spec.cost_per_gb * bytes as f64 / BYTES_PER_GB as f64)
    };
    let mut feasible = Vec::new();
    for &dram in &sets.dram {
        for &nvm in &sets.nvm {
            for &ssd in &sets.ssd {
                if dram == 0 && nvm == 0 {
                    continue;
                }
                if ssd < footprint_bytes {
                    continue;
                }
                let cost = price(TierKind::Dram, dram)?
                    + price(TierKind::Nvm, nvm)?
                    + price(TierKind::Ssd, ssd)?;
                if cost <= budget {
                    feasible.push(Candidate {
                        dram_bytes: dram,
                        nvm_bytes: nvm,
                        ssd_bytes: ssd,
                    });
                }
            }
        }
    }
    Ok(feasible)
}

/// Where each candidate's migration policy comes from.
#[derive(Debug, Clone)]
pub enum PolicySource {
    /// Use this policy as-is on every candidate.
    Fixed(MigrationPolicy),
    /// Anneal per candidate, then measure with the best policy found.
    Tuned {
        annealing: AnnealingConfig,
        grid: PolicyGrid,
        initial: MigrationPolicy,
    },
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationEntry {
    pub rank: usize,
    pub candidate: Candidate,
    pub total_cost: f64,
    pub policy: MigrationPolicy,
    pub throughput_ops_per_s: f64,
    pub perf_per_price: f64,
    pub metrics: SimMetrics,
    /// Populated when the candidate's simulation failed; such entries score
    /// zero throughput.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Ranked evaluation of every feasible candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub budget: f64,
    pub entries: Vec<RecommendationEntry>,
}

impl Recommendation {
    pub fn csv_header() -> String {
        format!(
            "rank,dram_gb,nvm_gb,ssd_gb,cost_usd,throughput_ops_s,perf_per_price,{}",
            SimMetrics::CSV_HEADER
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        let gb = |bytes: u64| bytes as f64 / BYTES_PER_GB as f64;
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
                e.rank,
                gb(e.candidate.dram_bytes),
                gb(e.candidate.nvm_bytes),
                gb(e.candidate.ssd_bytes),
                e.total_cost,
                e.throughput_ops_per_s,
                e.perf_per_price,
                e.metrics.csv_row()
            ));
        }
        out
    }
}

fn evaluate_candidate(
    candidate: Candidate,
    catalog: &DeviceCatalog,
    trace: &Trace,
    engine_config: &EngineConfig,
    source: &PolicySource,
) -> RecommendationEntry {
    let mut entry = RecommendationEntry {
        rank: 0,
        candidate,
        total_cost: 0.0,
        policy: engine_config.policy,
        throughput_ops_per_s: 0.0,
        perf_per_price: 0.0,
        metrics: SimMetrics::default(),
        error: None,
    };
    let result = (|| -> Result<(Hierarchy, MigrationPolicy, SimMetrics)> {
        let hierarchy = Hierarchy::from_catalog(
            catalog,
            candidate.dram_bytes,
            candidate.nvm_bytes,
            candidate.ssd_bytes,
        )?;
        let policy = match source {
            PolicySource::Fixed(policy) => *policy,
            PolicySource::Tuned {
                annealing,
                grid,
                initial,
            } => {
                anneal(annealing, engine_config, &hierarchy, trace, None, grid, *initial)?
                    .best_policy
            }
        };
        let config = EngineConfig {
            policy,
            ..engine_config.clone()
        };
        let metrics = run_trace(&config, &hierarchy, trace, None)?;
        Ok((hierarchy, policy, metrics))
    })();
    match result {
        Ok((hierarchy, policy, metrics)) => {
            entry.total_cost = hierarchy.cost();
            entry.policy = policy;
            entry.throughput_ops_per_s = metrics.throughput_ops_per_s;
            entry.perf_per_price = if entry.total_cost > 0.0 {
                metrics.throughput_ops_per_s / entry.total_cost
            } else {
                0.0
            };
            entry.metrics = metrics;
        }
        Err(err) => entry.error = Some(err.to_string()),
    }
    entry
}

/// Evaluates every feasible candidate and returns the ranking: descending
/// performance per dollar, ties broken by lower cost, then by ascending
/// capacity triple. `parallelism` > 1 fans candidates out to that many
/// workers; results are still aggregated in enumeration order, so the
/// ranking does not depend on scheduling.
pub fn recommend(
    sets: &CandidateSets,
    catalog: &DeviceCatalog,
    budget: f64,
    trace: &Trace,
    engine_config: &EngineConfig,
    source: &PolicySource,
    parallelism: usize,
) -> Result<Recommendation> {
    let candidates = enumerate(sets, catalog, budget, trace.footprint_blocks * engine_config.block_size as u64)?;
    let evaluate = |c: &Candidate| evaluate_candidate(*c, catalog, trace, engine_config, source);
    let mut entries: Vec<RecommendationEntry> = if parallelism > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| candidates.par_iter().map(evaluate).collect())
    } else {
        candidates.iter().map(evaluate).collect()
    };
    entries.sort_by(|a, b| {
        b.perf_per_price
            .total_cmp(&a.perf_per_price)
            .then(a.total_cost.total_cmp(&b.total_cost))
            .then_with(|| {
                let ka = (a.candidate.dram_bytes, a.candidate.nvm_bytes, a.candidate.ssd_bytes);
                let kb = (b.candidate.dram_bytes, b.candidate.nvm_bytes, b.candidate.ssd_bytes);
                ka.cmp(&kb)
            })
    });
    for (i, entry) in entries.iter_mut().enumerate() {
        entry.rank = i + 1;
    }
    Ok(Recommendation { budget, entries })
}

/// A monotone capacity-to-hit-fraction curve. Units are the caller's choice
/// but must match the tier capacities passed to the estimator. Evaluation
/// interpolates linearly from the implicit origin `H(0) = 0` and is flat
/// past the last point.
#[derive(Debug, Clone, PartialEq)]
pub struct HitRatioCurve {
    points: Vec<(u64, f64)>,
}

impl HitRatioCurve {
    pub fn new(points: Vec<(u64, f64)>) -> Result<HitRatioCurve> {
        let mut prev = (0u64, 0.0f64);
        for (i, &(c, h)) in points.iter().enumerate() {
            if c == 0 && h != 0.0 {
                return Err(Error::Model(format!(
                    "H(0) must be 0, got {h} at capacity 0"
                )));
            }
            if i > 0 && c <= prev.0 {
                return Err(Error::Model(format!(
                    "capacities must increase, got {c} after {}",
                    prev.0
                )));
            }
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::Model(format!("hit fraction {h} outside [0, 1]")));
            }
            if h < prev.1 {
                return Err(Error::Model(format!(
                    "hit fraction must be monotone, got {h} after {}",
                    prev.1
                )));
            }
            prev = (c, h);
        }
        Ok(HitRatioCurve { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    /// H(capacity) by linear interpolation; H(0) = 0.
    pub fn eval(&self, capacity: u64) -> f64 {
        if capacity == 0 {
            return 0.0;
        }
        let mut prev = (0u64, 0.0f64);
        for &(c, h) in &self.points {
            if capacity == c {
                return h;
            }
            if capacity < c {
                let span = (c - prev.0) as f64;
                let frac = (capacity - prev.0) as f64 / span;
                return prev.1 + frac * (h - prev.1);
            }
            prev = (c, h);
        }
        prev.1
    }
}

/// Tolerance for the internal two-form consistency check.
const DUAL_FORM_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Effective average access time of a linear hierarchy.
///
/// `tiers` is `(capacity, per-access time)` ordered fastest first with
/// non-decreasing capacities; the lowest level must hold everything
/// (`H(C_n) = 1`). The value is computed as the hit-rate-weighted sum of
/// cumulative access times, cross-checked against the algebraically equal
/// miss-rate form; disagreement beyond 1e-9 relative reports a model error.
pub fn effective_access_time(curve: &HitRatioCurve, tiers: &[(u64, f64)]) -> Result<f64> {
    if tiers.is_empty() {
        return Err(Error::Model("hierarchy must have at least one level".into()));
    }
    if tiers.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Model("tier capacities must be non-decreasing".into()));
    }
    let hit_ratios: Vec<f64> = tiers.iter().map(|&(c, _)| curve.eval(c)).collect();
    let last = *hit_ratios.last().unwrap();
    if last < 1.0 - DUAL_FORM_RELATIVE_TOLERANCE {
        return Err(Error::Model(format!(
            "lowest level must hold everything: H(C_n) = {last} < 1"
        )));
    }

    // Per-level hit probability times cumulative time down to that level.
    let mut by_level_hits = 0.0;
    let mut cumulative_time = 0.0;
    for (i, &(_, t)) in tiers.iter().enumerate() {
        let h_prev = if i == 0 { 0.0 } else { hit_ratios[i - 1] };
        let h_i = hit_ratios[i] - h_prev;
        cumulative_time += t;
        by_level_hits += h_i * cumulative_time;
    }

    // Alternative form: each level's time weighted by the miss rate above it.
    let mut by_miss_rates = 0.0;
    for (i, &(_, t)) in tiers.iter().enumerate() {
        let h_prev = if i == 0 { 0.0 } else { hit_ratios[i - 1] };
        by_miss_rates += (1.0 - h_prev) * t;
    }

    let scale = by_level_hits.abs().max(by_miss_rates.abs()).max(1e-300);
    if (by_level_hits - by_miss_rates).abs() / scale > DUAL_FORM_RELATIVE_TOLERANCE {
        return Err(Error::Model(format!(
            "access-time forms disagree: {by_level_hits} vs {by_miss_rates}"
        )));
    }
    Ok(by_level_hits)
}

/// Empirical hit-ratio oracle: replays the trace through a single pure-LRU
/// tier of each capacity (in blocks) and records the hit fraction. Every
/// operation counts as one access; misses install the block.
pub fn measure_hit_ratio_curve(trace: &Trace, capacities_blocks: &[u64]) -> Result<Vec<(u64, f64)>> {
    if trace.ops.is_empty() {
        return Err(Error::Config("cannot measure an empty trace".into()));
    }
    let mut points = Vec::with_capacity(capacities_blocks.len());
    for &capacity in capacities_blocks {
        let mut pool = BufferPool::new(TierKind::Dram, capacity as usize);
        let mut hits = 0u64;
        for op in &trace.ops {
            if pool.lookup(op.block) {
                hits += 1;
            } else if capacity > 0 {
                pool.insert(op.block, false);
            }
        }
        points.push((capacity, hits as f64 / trace.ops.len() as f64));
    }
    Ok(points)
}
