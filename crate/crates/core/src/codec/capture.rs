use rand::Rng;

use super::pattern::{make_pattern, SamplingMode, SensingPattern};
use super::CodecError;

/// A compressed block: kept indices, the kept values, and the block's
/// position in the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBlock {
    pub pattern: SensingPattern,
    pub values: Vec<f64>,
    pub block_seq: usize,
}

impl SampledBlock {
    pub fn new(pattern: SensingPattern, values: Vec<f64>, block_seq: usize) -> Result<Self, CodecError> {
        if pattern.len() != values.len() {
            return Err(CodecError::InvalidArgument(format!(
                "block {block_seq}: {} indices but {} values",
                pattern.len(),
                values.len()
            )));
        }
        Ok(Self { pattern, values, block_seq })
    }

    pub fn block_len(&self) -> usize {
        self.pattern.block_len()
    }
}

/// Splits `samples` into consecutive blocks of `block_len` and subsamples
/// each independently. A trailing partial block keeps its own length.
pub fn capture_stream<R: Rng + ?Sized>(
    samples: &[f64],
    block_len: usize,
    ratio: f64,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<Vec<SampledBlock>, CodecError> {
    if samples.is_empty() {
        return Err(CodecError::InvalidArgument("cannot capture an empty stream".into()));
    }
    if block_len == 0 {
        return Err(CodecError::InvalidArgument("block length must be at least 1".into()));
    }
    samples
        .chunks(block_len)
        .enumerate()
        .map(|(block_seq, chunk)| {
            let pattern = make_pattern(chunk.len(), ratio, mode, rng)?;
            let values = pattern.indices().iter().map(|&i| chunk[i]).collect();
            Ok(SampledBlock { pattern, values, block_seq })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn kept(blocks: &[SampledBlock]) -> usize {
        blocks.iter().map(|b| b.values.len()).sum()
    }

    #[test]
    fn whole_blocks() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let blocks = capture_stream(&x, 200, 0.2, SamplingMode::ExactM, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(blocks.len(), 5);
        assert!(blocks.iter().all(|b| b.values.len() == 40));
        assert_eq!(kept(&blocks), 200);
        for (seq, b) in blocks.iter().enumerate() {
            assert_eq!(b.block_seq, seq);
            for (&i, &v) in b.pattern.indices().iter().zip(&b.values) {
                assert_eq!(v, (seq * 200 + i) as f64);
            }
        }
    }

    #[test]
    fn tail_block_keeps_its_length() {
        let x = vec![1.0; 4967];
        let blocks = capture_stream(&x, 200, 0.2, SamplingMode::ExactM, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(blocks.len(), 25);
        let tail = blocks.last().unwrap();
        assert_eq!(tail.block_len(), 167);
        assert_eq!(tail.values.len(), 33);
        assert_eq!(kept(&blocks), 993);
    }

    #[test]
    fn short_stream_full_ratio() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let blocks = capture_stream(&x, 200, 1.0, SamplingMode::Bernoulli, &mut rng::stream(3, 0)).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].values, x);
    }

    #[test]
    fn empty_stream_rejected() {
        assert!(capture_stream(&[], 10, 0.5, SamplingMode::ExactM, &mut rng::stream(3, 0)).is_err());
    }
}
