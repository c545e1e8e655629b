//! Codec benchmarks over a corpus of trips.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use cvsense::codec::{recover_stream, BlockStatus, SampledBlock, SamplingMode, SensingPattern, SolverConfig};
use cvsense::metrics::{binned_report, BinnedSample, Binning, RecoveryReport};
use cvsense::rng;

use crate::bsm::Trip;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no streams to benchmark")]
    NoStreams,
    #[error("invalid bench config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub block_lens: Vec<usize>,
    pub ratios: Vec<f64>,
    pub mode: SamplingMode,
    pub solver: SolverConfig,
    /// Block length and ratio of the binned reports; `None` skips them.
    pub binned_at: Option<(usize, f64)>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            block_lens: vec![100, 200, 500, 1000],
            ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            mode: SamplingMode::ExactM,
            solver: SolverConfig::default(),
            binned_at: Some((200, 0.2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub block_len: usize,
    pub ratio: f64,
    pub blocks: usize,
    pub samples: usize,
    pub degraded: usize,
    /// Blocks that could not be captured or recovered; their samples are
    /// left out of the RMSE.
    pub failed: usize,
    /// Normalized RMSE over the concatenation of every recovered sample.
    pub rmse: Option<f64>,
    pub mean_block_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedReports {
    pub block_len: usize,
    pub ratio: f64,
    pub speed: RecoveryReport,
    pub yaw_rate: RecoveryReport,
    pub confidence: RecoveryReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub points: Vec<BenchPoint>,
    pub binned: Option<BinnedReports>,
}

struct PointRun {
    point: BenchPoint,
    samples: Vec<BinnedRecord>,
}

struct BinnedRecord {
    original: f64,
    recovered: Option<f64>,
    yaw: f64,
    confidence: f64,
}

/// Pattern for a block from one uniform draw per sample. Exact-M keeps the
/// `round(ratio·N)` smallest draws, Bernoulli keeps draws `≤ ratio`, so the
/// same draws give nested patterns as the ratio grows.
fn nested_pattern(draws: &[f64], ratio: f64, mode: SamplingMode) -> Option<SensingPattern> {
    let mut idx: Vec<usize> = match mode {
        SamplingMode::ExactM => {
            let m = (ratio * draws.len() as f64).round() as usize;
            let mut order: Vec<usize> = (0..draws.len()).collect();
            order.sort_by(|&a, &b| draws[a].total_cmp(&draws[b]));
            order.truncate(m);
            order
        }
        SamplingMode::Bernoulli => (0..draws.len()).filter(|&i| draws[i] <= ratio).collect(),
    };
    if idx.is_empty() {
        return None;
    }
    idx.sort_unstable();
    SensingPattern::new(draws.len(), idx).ok()
}

/// Captures every trip of `streams` as its own stream, recovers it and
/// scores speed. Draws for trip `t` come from substream `t` of
/// `point_seed`, which depends on the block length only: every ratio of
/// one block length sees nested patterns.
fn run_point(streams: &[Trip], block_len: usize, ratio: f64, point_seed: u64, cfg: &BenchConfig) -> PointRun {
    let mut blocks = Vec::new();
    let mut records = Vec::new();
    let mut failed = 0;
    for (t, trip) in streams.iter().enumerate() {
        let mut r = rng::stream(point_seed, t as u64);
        for (seq, chunk) in trip.records.chunks(block_len).enumerate() {
            let draws: Vec<f64> = (0..chunk.len()).map(|_| r.random::<f64>()).collect();
            let Some(pattern) = nested_pattern(&draws, ratio, cfg.mode) else {
                failed += 1;
                continue;
            };
            let values = pattern.indices().iter().map(|&i| chunk[i].speed_mph).collect();
            blocks.push(SampledBlock { pattern, values, block_seq: seq });
            records.extend(chunk.iter().map(|c| (c.speed_mph, c.yaw_rate_deg_s, c.confidence_pct)));
        }
    }
    let attempted = blocks.len() + failed;
    let rec = recover_stream(&blocks, &cfg.solver);
    let mut degraded = 0;
    let mut solved = 0u32;
    let mut total = Duration::ZERO;
    for s in &rec.statuses {
        match s {
            BlockStatus::Degraded { .. } => degraded += 1,
            BlockStatus::Unrecoverable { .. } => failed += 1,
            BlockStatus::Recovered { .. } => {}
        }
        if let Some(e) = s.elapsed() {
            total += e;
            solved += 1;
        }
    }
    let samples: Vec<BinnedRecord> = records
        .iter()
        .zip(&rec.samples)
        .map(|(&(original, yaw, confidence), &recovered)| BinnedRecord { original, recovered, yaw, confidence })
        .collect();
    let (mut err2, mut ref2) = (0.0, 0.0);
    for s in &samples {
        if let Some(r) = s.recovered {
            err2 += (s.original - r).powi(2);
            ref2 += s.original * s.original;
        }
    }
    let point = BenchPoint {
        block_len,
        ratio,
        blocks: attempted,
        samples: samples.len(),
        degraded,
        failed,
        rmse: (ref2 > 0.0).then(|| (err2 / ref2).sqrt()),
        mean_block_time: if solved > 0 { total / solved } else { Duration::ZERO },
    };
    PointRun { point, samples }
}

fn reports(samples: &[BinnedRecord], block_len: usize, ratio: f64) -> BinnedReports {
    let by = |key: fn(&BinnedRecord) -> f64, binning| {
        let rows: Vec<BinnedSample> =
            samples.iter().map(|s| BinnedSample { original: s.original, recovered: s.recovered, key: key(s) }).collect();
        binned_report(&rows, binning)
    };
    BinnedReports {
        block_len,
        ratio,
        speed: by(|s| s.original, Binning::Speed10Mph),
        yaw_rate: by(|s| s.yaw, Binning::YawRate60Deg),
        confidence: by(|s| s.confidence, Binning::Confidence10Pct),
    }
}

pub fn bench_recovery(streams: &[Trip], cfg: &BenchConfig, seed: u64) -> Result<BenchResult, BenchError> {
    if streams.iter().all(Trip::is_empty) {
        return Err(BenchError::NoStreams);
    }
    if cfg.block_lens.is_empty() || cfg.ratios.is_empty() {
        return Err(BenchError::Config("block_lens and ratios must be non-empty".into()));
    }
    if cfg.block_lens.contains(&0) {
        return Err(BenchError::Config("block lengths must be positive".into()));
    }
    if let Some(r) = cfg.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(BenchError::Config(format!("ratio {r} is outside (0, 1]")));
    }
    cfg.solver.validate().map_err(|e| BenchError::Config(e.to_string()))?;

    let mut points = Vec::new();
    let mut binned = None;
    for &n in &cfg.block_lens {
        for &r in &cfg.ratios {
            let run = run_point(streams, n, r, rng::derive_seed(seed, n as u64), cfg);
            if cfg.binned_at == Some((n, r)) {
                binned = Some(reports(&run.samples, n, r));
            }
            points.push(run.point);
        }
    }
    if let (None, Some((n, r))) = (&binned, cfg.binned_at) {
        let run = run_point(streams, n, r, rng::derive_seed(seed, n as u64), cfg);
        binned = Some(reports(&run.samples, n, r));
    }
    Ok(BenchResult { points, binned })
}

pub const BENCH_CSV_HEADER: &str = "block_len,ratio,blocks,samples,degraded,failed,rmse";
pub const TIMING_CSV_HEADER: &str = "block_len,ratio,blocks,mean_block_ms";

pub fn bench_csv(points: &[BenchPoint]) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for p in points {
        let rmse = p.rmse.map(|v| format!("{v:.9}")).unwrap_or_default();
        out += &format!("{},{:.3},{},{},{},{},{}\n", p.block_len, p.ratio, p.blocks, p.samples, p.degraded, p.failed, rmse);
    }
    out
}

/// Wall-clock times; not reproducible, so kept apart from the other outputs.
pub fn timing_csv(points: &[BenchPoint]) -> String {
    let mut out = format!("{TIMING_CSV_HEADER}\n");
    for p in points {
        out += &format!("{},{:.3},{},{:.4}\n", p.block_len, p.ratio, p.blocks, p.mean_block_time.as_secs_f64() * 1e3);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus, SynthConfig};

    fn corpus() -> Vec<Trip> {
        synth_corpus(&SynthConfig { n_trips: 3, min_len: 800, max_len: 1500, ..SynthConfig::default() }, 4)
    }

    #[test]
    fn full_ratio_is_exact() {
        let cfg = BenchConfig { block_lens: vec![100, 200], ratios: vec![1.0], binned_at: None, ..BenchConfig::default() };
        let res = bench_recovery(&corpus(), &cfg, 1).unwrap();
        for p in &res.points {
            assert!(p.rmse.unwrap() < 1e-6, "{p:?}");
            assert_eq!(p.failed, 0);
        }
    }

    #[test]
    fn sample_counts_cover_corpus() {
        let c = corpus();
        let total: usize = c.iter().map(Trip::len).sum();
        let cfg = BenchConfig { block_lens: vec![200], ratios: vec![0.5], binned_at: Some((200, 0.5)), ..BenchConfig::default() };
        let res = bench_recovery(&c, &cfg, 1).unwrap();
        assert_eq!(res.points[0].samples, total);
        let b = res.binned.unwrap();
        for rep in [&b.speed, &b.yaw_rate, &b.confidence] {
            assert_eq!(rep.per_bin.iter().map(|s| s.count).sum::<usize>(), total);
            assert_eq!(rep.overall_rmse, res.points[0].rmse);
        }
    }

    #[test]
    fn tiny_tail_block_counts_as_failed() {
        // 1001 samples at N=100: the last block holds one sample and keeps none at 0.1
        let c = crate::synth::synth_trip(&SynthConfig::default(), 1001, 1, 0.0, &mut rng::stream(2, 0));
        let cfg = BenchConfig { block_lens: vec![100], ratios: vec![0.1], binned_at: None, ..BenchConfig::default() };
        let res = bench_recovery(&[c], &cfg, 1).unwrap();
        assert_eq!(res.points[0].failed, 1);
        assert_eq!(res.points[0].blocks, 11);
        assert_eq!(res.points[0].samples, 1000);
    }

    #[test]
    fn patterns_nest_as_ratio_grows() {
        let mut r = rng::stream(4, 0);
        let draws: Vec<f64> = (0..200).map(|_| r.random::<f64>()).collect();
        for mode in [SamplingMode::ExactM, SamplingMode::Bernoulli] {
            let small = nested_pattern(&draws, 0.2, mode).unwrap();
            let large = nested_pattern(&draws, 0.5, mode).unwrap();
            assert!(small.indices().iter().all(|i| large.indices().contains(i)));
        }
        assert_eq!(nested_pattern(&draws, 0.2, SamplingMode::ExactM).unwrap().len(), 40);
        assert!(nested_pattern(&draws[..3], 0.1, SamplingMode::ExactM).is_none());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(bench_recovery(&[], &BenchConfig::default(), 1), Err(BenchError::NoStreams)));
    }

    #[test]
    fn same_seed_same_rmse() {
        let cfg = BenchConfig { block_lens: vec![100], ratios: vec![0.3], binned_at: None, ..BenchConfig::default() };
        let a = bench_recovery(&corpus(), &cfg, 9).unwrap();
        let b = bench_recovery(&corpus(), &cfg, 9).unwrap();
        assert_eq!(bench_csv(&a.points), bench_csv(&b.points));
    }
}
