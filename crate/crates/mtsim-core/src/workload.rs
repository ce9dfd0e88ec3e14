//! Synthetic workload traces with controllable skew, the trace file format,
//! and skew characterization.
//!
//! Three shapes cover the access patterns of interest: `Zipf` (rank-skewed
//! OLTP/HTAP data access), `LogAppend` (data access interleaved with
//! sequential log writes), and `ShiftingHotSet` (a hot window that slides
//! over time). Generation is deterministic for a fixed spec.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::buffer::{BlockId, Snapshot};
use crate::device::TierKind;
use crate::error::{Error, Result};

/// Read or write of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
}

/// One buffer-pool operation in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOperation {
    pub kind: OpKind,
    pub block: BlockId,
}

/// A replayable operation sequence over a block space of
/// `footprint_blocks` logical blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub footprint_blocks: u64,
    pub ops: Vec<TraceOperation>,
}

impl Trace {
    /// Number of distinct blocks referenced at least once.
    pub fn referenced_blocks(&self) -> u64 {
        let mut seen = vec![false; self.footprint_blocks as usize];
        let mut count = 0;
        for op in &self.ops {
            let idx = op.block.0 as usize;
            if !seen[idx] {
                seen[idx] = true;
                count += 1;
            }
        }
        count
    }
}

/// Workload shape and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadShape {
    /// Block ranks drawn with probability proportional to `1/rank^theta`;
    /// rank 1 maps to block 0. `theta = 0` is uniform.
    Zipf { theta: f64 },
    /// Zipf data accesses interleaved with a write-only stream of
    /// monotonically increasing block ids in a reserved log region
    /// (the top quarter of the block space), wrapping at the footprint.
    LogAppend { log_fraction: f64 },
    /// Accesses hit a hot window of `hot_set_blocks` blocks with
    /// `hot_probability`; the window slides by its own length every
    /// `shift_period` operations.
    ShiftingHotSet {
        hot_set_blocks: u64,
        shift_period: u64,
        hot_probability: f64,
    },
}

/// Full generator specification; `generate` is deterministic in it.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub shape: WorkloadShape,
    pub blocks: u64,
    pub ops: u64,
    pub read_ratio: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    fn validate(&self) -> Result<()> {
        let fraction = |v: f64, what: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{what} must be in [0, 1], got {v}")));
            }
            Ok(())
        };
        if self.blocks == 0 {
            return Err(Error::Config("blocks must be at least 1".into()));
        }
        if self.ops == 0 {
            return Err(Error::Config("ops must be at least 1".into()));
        }
        fraction(self.read_ratio, "read ratio")?;
        match &self.shape {
            WorkloadShape::Zipf { theta } => {
                if !theta.is_finite() || *theta < 0.0 {
                    return Err(Error::Config(format!(
                        "zipf theta must be non-negative, got {theta}"
                    )));
                }
            }
            WorkloadShape::LogAppend { log_fraction } => {
                fraction(*log_fraction, "log fraction")?;
                if self.blocks < 2 {
                    return Err(Error::Config(
                        "log workload needs at least 2 blocks (data + log regions)".into(),
                    ));
                }
            }
            WorkloadShape::ShiftingHotSet {
                hot_set_blocks,
                shift_period,
                hot_probability,
            } => {
                if *hot_set_blocks == 0 || *hot_set_blocks > self.blocks {
                    return Err(Error::Config(format!(
                        "hot set of {hot_set_blocks} blocks must be within 1..={}",
                        self.blocks
                    )));
                }
                if *shift_period == 0 {
                    return Err(Error::Config("shift period must be at least 1".into()));
                }
                fraction(*hot_probability, "hot probability")?;
            }
        }
        Ok(())
    }
}

/// Zipf sampler over ranks `1..=n` with an exact precomputed cumulative
/// table; avoids the bias of rejection-based approximations.
struct ZipfSampler {
    cumulative: Vec<f64>,
}

impl ZipfSampler {
    fn new(n: u64, theta: f64) -> ZipfSampler {
        let mut cumulative = Vec::with_capacity(n as usize);
        let mut total = 0.0;
        for rank in 1..=n {
            total += 1.0 / (rank as f64).powf(theta);
            cumulative.push(total);
        }
        ZipfSampler { cumulative }
    }

    /// Draws a rank minus one, i.e. a value in `0..n`, consuming one uniform.
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u) as u64
    }
}

fn draw_kind(rng: &mut ChaCha8Rng, read_ratio: f64) -> OpKind {
    if rng.random::<f64>() < read_ratio {
        OpKind::Read
    } else {
        OpKind::Write
    }
}

/// Size of the reserved log region for `LogAppend` traces.
fn log_region_blocks(blocks: u64) -> u64 {
    (blocks / 4).max(1)
}

/// Skew exponent of the data-access portion of `LogAppend` traces.
const LOG_APPEND_DATA_THETA: f64 = 1.0;

/// Generates a trace from the spec. Deterministic: the same spec yields the
/// same operation sequence.
///
/// Per-operation draw order (one uniform each, in order): `LogAppend` first
/// draws the stream choice; `ShiftingHotSet` first draws hot-vs-cold; then
/// the block is drawn and finally the read/write kind. Log-stream writes
/// draw nothing beyond the stream choice.
pub fn generate(spec: &WorkloadSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ops = Vec::with_capacity(spec.ops as usize);
    match spec.shape {
        WorkloadShape::Zipf { theta } => {
            let sampler = ZipfSampler::new(spec.blocks, theta);
            for _ in 0..spec.ops {
                let block = BlockId(sampler.sample(&mut rng));
                let kind = draw_kind(&mut rng, spec.read_ratio);
                ops.push(TraceOperation { kind, block });
            }
        }
        WorkloadShape::LogAppend { log_fraction } => {
            let log_blocks = log_region_blocks(spec.blocks);
            let data_blocks = spec.blocks - log_blocks;
            let sampler = ZipfSampler::new(data_blocks, LOG_APPEND_DATA_THETA);
            let mut log_cursor = 0u64;
            for _ in 0..spec.ops {
                if rng.random::<f64>() < log_fraction {
                    let block = BlockId(data_blocks + log_cursor % log_blocks);
                    log_cursor += 1;
                    ops.push(TraceOperation {
                        kind: OpKind::Write,
                        block,
                    });
                } else {
                    let block = BlockId(sampler.sample(&mut rng));
                    let kind = draw_kind(&mut rng, spec.read_ratio);
                    ops.push(TraceOperation { kind, block });
                }
            }
        }
        WorkloadShape::ShiftingHotSet {
            hot_set_blocks,
            shift_period,
            hot_probability,
        } => {
            for i in 0..spec.ops {
                let window_start = (i / shift_period * hot_set_blocks) % spec.blocks;
                let block = if rng.random::<f64>() < hot_probability {
                    BlockId((window_start + rng.random_range(0..hot_set_blocks)) % spec.blocks)
                } else {
                    BlockId(rng.random_range(0..spec.blocks))
                };
                let kind = draw_kind(&mut rng, spec.read_ratio);
                ops.push(TraceOperation { kind, block });
            }
        }
    }
    Ok(Trace {
        footprint_blocks: spec.blocks,
        ops,
    })
}

/// Builds a warmed-system snapshot for a trace generated from `spec`:
/// the hottest blocks under the generator distribution fill DRAM, the next
/// hottest fill NVM, up to `fill` of each tier's slots. All entries are
/// clean. Within a tier, colder blocks are listed first so the hottest end
/// up most recently used.
pub fn generate_snapshot(
    spec: &WorkloadSpec,
    dram_slots: u64,
    nvm_slots: u64,
    fill: f64,
) -> Result<Snapshot> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&fill) {
        return Err(Error::Config(format!("fill must be in [0, 1], got {fill}")));
    }
    // For every shape the generator's hottest blocks at trace start are the
    // lowest ids (Zipf rank order; the shifting window starts at 0).
    let n_dram = ((dram_slots as f64 * fill) as u64).min(spec.blocks);
    let n_nvm = ((nvm_slots as f64 * fill) as u64).min(spec.blocks.saturating_sub(n_dram));
    let mut entries = Vec::with_capacity((n_dram + n_nvm) as usize);
    for b in (0..n_dram).rev() {
        entries.push((TierKind::Dram, BlockId(b), false));
    }
    for b in (n_dram..n_dram + n_nvm).rev() {
        entries.push((TierKind::Nvm, BlockId(b), false));
    }
    Ok(Snapshot { entries })
}

/// Cumulative distribution of per-block access counts: blocks sorted by
/// ascending access count, both coordinates normalized to (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SkewCdf {
    pub points: Vec<(f64, f64)>,
}

impl SkewCdf {
    /// Access fraction accumulated by the `block_fraction` least-accessed
    /// blocks (step lookup on the computed points).
    pub fn access_fraction_at(&self, block_fraction: f64) -> f64 {
        self.points
            .iter()
            .take_while(|(bf, _)| *bf <= block_fraction)
            .last()
            .map(|(_, af)| *af)
            .unwrap_or(0.0)
    }

    /// Rows of `block_fraction,access_fraction`, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (bf, af) in &self.points {
            out.push_str(&format!("{bf:?},{af:?}\n"));
        }
        out
    }
}

/// Computes the skew CDF of a trace: point `k` is
/// `(k / referenced_blocks, cumulative_accesses_k / total_accesses)` with
/// blocks ordered by ascending access count.
pub fn characterize(trace: &Trace) -> Result<SkewCdf> {
    if trace.ops.is_empty() {
        return Err(Error::Config("cannot characterize an empty trace".into()));
    }
    let mut counts = vec![0u64; trace.footprint_blocks as usize];
    for op in &trace.ops {
        counts[op.block.0 as usize] += 1;
    }
    let mut referenced: Vec<(u64, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| (c, b))
        .collect();
    referenced.sort_unstable();
    let total = trace.ops.len() as f64;
    let n = referenced.len() as f64;
    let mut cumulative = 0u64;
    let points = referenced
        .iter()
        .enumerate()
        .map(|(k, (count, _))| {
            cumulative += count;
            ((k + 1) as f64 / n, cumulative as f64 / total)
        })
        .collect();
    Ok(SkewCdf { points })
}

/// Renders the trace file format: a header line
/// `MTSIM v1 blocks=<footprint_blocks> ops=<count>`, then one op per line,
/// `R <id>` or `W <id>`.
pub fn render_trace(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.ops.len() * 8 + 64);
    out.push_str(&format!(
        "MTSIM v1 blocks={} ops={}\n",
        trace.footprint_blocks,
        trace.ops.len()
    ));
    for op in &trace.ops {
        let tag = match op.kind {
            OpKind::Read => 'R',
            OpKind::Write => 'W',
        };
        out.push_str(&format!("{tag} {}\n", op.block));
    }
    out
}

pub fn write_trace(trace: &Trace, destination: &Path) -> Result<()> {
    Ok(std::fs::write(destination, render_trace(trace))?)
}

/// Parses the trace file format. `read_trace(write_trace(t)) == t` exactly.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let header_err = |message: String| Error::Parse { line: 1, message };
    if fields.len() != 4 || fields[0] != "MTSIM" || fields[1] != "v1" {
        return Err(header_err(format!(
            "expected `MTSIM v1 blocks=<n> ops=<m>`, found `{header}`"
        )));
    }
    let field_value = |field: &str, prefix: &str| -> Result<u64> {
        field
            .strip_prefix(prefix)
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| header_err(format!("invalid header field `{field}`")))
    };
    let blocks = field_value(fields[2], "blocks=")?;
    let declared_ops = field_value(fields[3], "ops=")?;

    let mut ops = Vec::with_capacity(declared_ops as usize);
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (tag, rest) = line.split_at(1);
        let kind = match tag {
            "R" => OpKind::Read,
            "W" => OpKind::Write,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown operation `{other}`"),
                })
            }
        };
        let block = rest.trim().parse::<u64>().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid block id `{}`", rest.trim()),
        })?;
        if block >= blocks {
            return Err(Error::Validation {
                line: lineno,
                message: format!("block id {block} out of range for blocks={blocks}"),
            });
        }
        ops.push(TraceOperation {
            kind,
            block: BlockId(block),
        });
    }
    if ops.len() as u64 != declared_ops {
        return Err(Error::Validation {
            line: 1,
            message: format!(
                "header declares ops={declared_ops} but file contains {}",
                ops.len()
            ),
        });
    }
    Ok(Trace {
        footprint_blocks: blocks,
        ops,
    })
}

pub fn read_trace(source: &Path) -> Result<Trace> {
    parse_trace(&std::fs::read_to_string(source)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zipf_spec(theta: f64, blocks: u64, ops: u64, read_ratio: f64, seed: u64) -> WorkloadSpec {
        WorkloadSpec {
            shape: WorkloadShape::Zipf { theta },
            blocks,
            ops,
            read_ratio,
            seed,
        }
    }

    #[test]
    fn zipf_theta_zero_is_uniform() {
        let trace = generate(&zipf_spec(0.0, 1000, 1_000_000, 0.5, 7)).unwrap();
        let mut counts = vec![0u64; 1000];
        for op in &trace.ops {
            counts[op.block.0 as usize] += 1;
        }
        // Multinomial: E = ops/blocks, sigma = sqrt(ops * p * (1 - p)).
        let expected = 1000.0;
        let sigma = (1_000_000.0 * 0.001 * 0.999f64).sqrt();
        let outside_3_sigma = counts
            .iter()
            .filter(|&&c| (c as f64 - expected).abs() > 3.0 * sigma)
            .count();
        // Per-block violations are ~0.27% by chance; allow up to 1%.
        assert!(outside_3_sigma <= 10, "{outside_3_sigma} blocks beyond 3 sigma");
        for &c in &counts {
            assert!((c as f64 - expected).abs() <= 6.0 * sigma);
        }
    }

    #[test]
    fn zipf_theta_one_top_block_frequency() {
        let blocks = 1000u64;
        let trace = generate(&zipf_spec(1.0, blocks, 1_000_000, 0.5, 3)).unwrap();
        let mut counts = vec![0u64; blocks as usize];
        for op in &trace.ops {
            counts[op.block.0 as usize] += 1;
        }
        // Brute-force normalization: H = sum 1/k.
        let harmonic: f64 = (1..=blocks).map(|k| 1.0 / k as f64).sum();
        let expected = 1.0 / harmonic;
        let observed = counts[0] as f64 / 1_000_000.0;
        assert!(
            (observed - expected).abs() < 0.01,
            "observed {observed}, expected {expected}"
        );
    }

    #[test]
    fn read_ratio_one_means_no_writes() {
        let trace = generate(&zipf_spec(1.0, 100, 10_000, 1.0, 1)).unwrap();
        assert!(trace.ops.iter().all(|op| op.kind == OpKind::Read));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = zipf_spec(0.8, 500, 20_000, 0.7, 42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_eq!(
            render_trace(&generate(&spec).unwrap()),
            render_trace(&generate(&spec).unwrap())
        );
    }

    #[test]
    fn log_append_ids_increase_between_wraps() {
        let spec = WorkloadSpec {
            shape: WorkloadShape::LogAppend { log_fraction: 0.5 },
            blocks: 400,
            ops: 50_000,
            read_ratio: 0.5,
            seed: 11,
        };
        let trace = generate(&spec).unwrap();
        let log_start = 300; // top quarter
        let log_ids: Vec<u64> = trace
            .ops
            .iter()
            .filter(|op| op.block.0 >= log_start)
            .map(|op| op.block.0)
            .collect();
        assert!(!log_ids.is_empty());
        for pair in log_ids.windows(2) {
            let wrapped = pair[1] == log_start && pair[0] == spec.blocks - 1;
            assert!(pair[1] == pair[0] + 1 || wrapped, "log ids {pair:?}");
        }
        // Log stream is write-only.
        assert!(trace
            .ops
            .iter()
            .filter(|op| op.block.0 >= log_start)
            .all(|op| op.kind == OpKind::Write));
        let log_ops = log_ids.len() as f64 / trace.ops.len() as f64;
        assert!((log_ops - 0.5).abs() < 0.02);
    }

    #[test]
    fn shifting_hot_set_concentrates_in_window() {
        let spec = WorkloadSpec {
            shape: WorkloadShape::ShiftingHotSet {
                hot_set_blocks: 50,
                shift_period: 10_000,
                hot_probability: 0.9,
            },
            blocks: 1000,
            ops: 10_000,
            read_ratio: 1.0,
            seed: 5,
        };
        let trace = generate(&spec).unwrap();
        // First period: window is [0, 50).
        let in_window = trace.ops.iter().filter(|op| op.block.0 < 50).count() as f64;
        let frac = in_window / trace.ops.len() as f64;
        // hot_probability plus the cold stream's 5% chance of landing there.
        assert!((frac - 0.905).abs() < 0.02, "fraction in window {frac}");

        // Second period shifts the window to [50, 100).
        let spec2 = WorkloadSpec {
            ops: 20_000,
            ..spec
        };
        let trace2 = generate(&spec2).unwrap();
        let second: Vec<_> = trace2.ops[10_000..].to_vec();
        let shifted = second
            .iter()
            .filter(|op| (50..100).contains(&op.block.0))
            .count() as f64;
        assert!(shifted / 10_000.0 > 0.85);
    }

    #[test]
    fn characterize_single_block() {
        let trace = Trace {
            footprint_blocks: 10,
            ops: vec![
                TraceOperation {
                    kind: OpKind::Read,
                    block: BlockId(3),
                };
                5
            ],
        };
        let cdf = characterize(&trace).unwrap();
        assert_eq!(cdf.points, vec![(1.0, 1.0)]);
    }

    #[test]
    fn characterize_two_uniform_blocks() {
        let ops = vec![
            TraceOperation { kind: OpKind::Read, block: BlockId(0) },
            TraceOperation { kind: OpKind::Write, block: BlockId(1) },
            TraceOperation { kind: OpKind::Read, block: BlockId(1) },
            TraceOperation { kind: OpKind::Read, block: BlockId(0) },
        ];
        let trace = Trace { footprint_blocks: 2, ops };
        let cdf = characterize(&trace).unwrap();
        assert_eq!(cdf.points, vec![(0.5, 0.5), (1.0, 1.0)]);
    }

    #[test]
    fn characterize_empty_trace_errors() {
        let trace = Trace { footprint_blocks: 2, ops: vec![] };
        assert!(characterize(&trace).is_err());
    }

    #[test]
    fn zipf_skew_direction() {
        let trace = generate(&zipf_spec(1.0, 10_000, 200_000, 0.9, 9)).unwrap();
        let cdf = characterize(&trace).unwrap();
        // Bottom 75% of referenced blocks account for well under half of
        // the accesses.
        assert!(cdf.access_fraction_at(0.75) < 0.5);
        // Endpoints and monotonicity.
        let last = *cdf.points.last().unwrap();
        assert_eq!(last, (1.0, 1.0));
        for pair in cdf.points.windows(2) {
            assert!(pair[0].0 <= pair[1].0 && pair[0].1 <= pair[1].1);
        }
    }

    #[test]
    fn trace_format_example() {
        let trace = parse_trace("MTSIM v1 blocks=4 ops=1\nR 2\n").unwrap();
        assert_eq!(trace.footprint_blocks, 4);
        assert_eq!(
            trace.ops,
            vec![TraceOperation { kind: OpKind::Read, block: BlockId(2) }]
        );
    }

    #[test]
    fn trace_round_trip_exact() {
        let spec = zipf_spec(1.2, 300, 5_000, 0.6, 13);
        let trace = generate(&spec).unwrap();
        let parsed = parse_trace(&render_trace(&trace)).unwrap();
        assert_eq!(parsed, trace);
    }

    #[test]
    fn trace_parse_rejects_out_of_range_block() {
        let err = parse_trace("MTSIM v1 blocks=4 ops=1\nR 9\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }));
    }

    #[test]
    fn trace_parse_rejects_malformed_lines() {
        let err = parse_trace("MTSIM v1 blocks=4 ops=2\nR 1\nQ 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_trace("MTSIM v2 blocks=4 ops=0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_trace("MTSIM v1 blocks=4 ops=3\nR 1\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 1, .. }));
    }

    #[test]
    fn snapshot_places_hottest_in_dram_then_nvm() {
        let spec = zipf_spec(1.0, 100, 10, 1.0, 0);
        let snap = generate_snapshot(&spec, 4, 8, 1.0).unwrap();
        let dram: Vec<u64> = snap.tier_entries(TierKind::Dram).map(|(b, _)| b.0).collect();
        let nvm: Vec<u64> = snap.tier_entries(TierKind::Nvm).map(|(b, _)| b.0).collect();
        assert_eq!(dram, vec![3, 2, 1, 0]); // hottest listed last
        assert_eq!(nvm, vec![11, 10, 9, 8, 7, 6, 5, 4]);
        assert!(snap.entries.iter().all(|(_, _, dirty)| !dirty));

        let half = generate_snapshot(&spec, 4, 8, 0.5).unwrap();
        assert_eq!(half.tier_entries(TierKind::Dram).count(), 2);
        assert_eq!(half.tier_entries(TierKind::Nvm).count(), 4);
    }
}
