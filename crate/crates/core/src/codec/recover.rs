use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::solver::{solve_basis_pursuit, SolveStats, SolverConfig};
use super::{idct, CodecError, SampledBlock};

/// Recovers the full block of samples from its kept subset.
pub fn recover_block(block: &SampledBlock, cfg: &SolverConfig) -> Result<Vec<f64>, CodecError> {
    let sol = solve_basis_pursuit(block, cfg)?;
    idct(&sol.coeffs)
}

/// Outcome of recovering one block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockStatus {
    Recovered { stats: SolveStats, elapsed: Duration },
    /// Iteration cap reached; values come from the last feasible iterate.
    Degraded { stats: SolveStats, elapsed: Duration },
    /// No kept samples (or a malformed block); output is a gap.
    Unrecoverable { reason: String },
}

impl BlockStatus {
    pub fn label(&self) -> &'static str {
        match self {
            BlockStatus::Recovered { .. } => "recovered",
            BlockStatus::Degraded { .. } => "degraded",
            BlockStatus::Unrecoverable { .. } => "unrecoverable",
        }
    }

    pub fn stats(&self) -> Option<&SolveStats> {
        match self {
            BlockStatus::Recovered { stats, .. } | BlockStatus::Degraded { stats, .. } => Some(stats),
            BlockStatus::Unrecoverable { .. } => None,
        }
    }

    pub fn elapsed(&self) -> Option<Duration> {
        match self {
            BlockStatus::Recovered { elapsed, .. } | BlockStatus::Degraded { elapsed, .. } => Some(*elapsed),
            BlockStatus::Unrecoverable { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamRecovery {
    /// Concatenated samples; `None` marks a gap left by an unrecoverable block.
    pub samples: Vec<Option<f64>>,
    /// One status per input block, in input order.
    pub statuses: Vec<BlockStatus>,
}

impl StreamRecovery {
    pub fn gap_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_none()).count()
    }
}

fn recover_one(block: &SampledBlock, cfg: &SolverConfig) -> (Vec<Option<f64>>, BlockStatus) {
    let n = block.block_len();
    let start = Instant::now();
    let outcome = solve_basis_pursuit(block, cfg);
    let (coeffs, status) = match outcome {
        Ok(sol) => (sol.coeffs, BlockStatus::Recovered { stats: sol.stats, elapsed: start.elapsed() }),
        Err(CodecError::NotConverged { stats, last }) => {
            (last, BlockStatus::Degraded { stats, elapsed: start.elapsed() })
        }
        Err(e) => return (vec![None; n], BlockStatus::Unrecoverable { reason: e.to_string() }),
    };
    match idct(&coeffs) {
        Ok(x) => (x.into_iter().map(Some).collect(), status),
        Err(e) => (vec![None; n], BlockStatus::Unrecoverable { reason: e.to_string() }),
    }
}

/// Recovers every block of a stream; blocks are solved in parallel.
///
/// Failures stay local to their block. Output does not depend on the number
/// of worker threads because each block is solved independently and results
/// are collected in input order.
pub fn recover_stream(blocks: &[SampledBlock], cfg: &SolverConfig) -> StreamRecovery {
    let parts: Vec<(Vec<Option<f64>>, BlockStatus)> =
        blocks.par_iter().map(|b| recover_one(b, cfg)).collect();
    let mut samples = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    let mut statuses = Vec::with_capacity(parts.len());
    for (values, status) in parts {
        samples.extend(values);
        statuses.push(status);
    }
    StreamRecovery { samples, statuses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{capture_stream, SamplingMode, SensingPattern};
    use crate::rng;

    #[test]
    fn full_blocks_reproduce_input() {
        let x: Vec<f64> = (0..1000).map(|i| 30.0 + (i as f64 / 17.0).cos() * 5.0).collect();
        let blocks = capture_stream(&x, 200, 1.0, SamplingMode::ExactM, &mut rng::stream(1, 0)).unwrap();
        let rec = recover_stream(&blocks, &SolverConfig::default());
        assert_eq!(rec.statuses.len(), 5);
        for (a, b) in rec.samples.iter().zip(&x) {
            assert!((a.unwrap() - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_block_leaves_gap() {
        let n = 20;
        let full = |seq| {
            SampledBlock::new(SensingPattern::full(n), (0..n).map(|i| i as f64).collect(), seq).unwrap()
        };
        let empty = SampledBlock::new(SensingPattern::new(n, vec![]).unwrap(), vec![], 1).unwrap();
        let rec = recover_stream(&[full(0), empty, full(2)], &SolverConfig::default());
        assert_eq!(rec.samples.len(), 3 * n);
        assert!(rec.samples[n..2 * n].iter().all(Option::is_none));
        assert!(rec.samples[..n].iter().all(Option::is_some));
        assert_eq!(rec.gap_count(), n);
        assert_eq!(rec.statuses[1].label(), "unrecoverable");
    }

    #[test]
    fn kept_samples_are_honored() {
        let x: Vec<f64> = (0..400).map(|i| 50.0 + 8.0 * (i as f64 / 40.0).sin()).collect();
        let blocks = capture_stream(&x, 200, 0.3, SamplingMode::Bernoulli, &mut rng::stream(4, 0)).unwrap();
        let cfg = SolverConfig::default();
        let rec = recover_stream(&blocks, &cfg);
        for b in &blocks {
            let base = b.block_seq * 200;
            for (&i, &y) in b.pattern.indices().iter().zip(&b.values) {
                let xr = rec.samples[base + i].unwrap();
                assert!((xr - y).abs() <= cfg.primal_tol * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let x: Vec<f64> = (0..2000).map(|i| 40.0 + 6.0 * (i as f64 / 90.0).sin()).collect();
        let blocks = capture_stream(&x, 200, 0.2, SamplingMode::ExactM, &mut rng::stream(6, 0)).unwrap();
        let cfg = SolverConfig::default();
        let parallel = recover_stream(&blocks, &cfg);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| recover_stream(&blocks, &cfg));
        let bits = |r: &StreamRecovery| r.samples.iter().map(|v| v.unwrap().to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&parallel), bits(&single));
    }
}
