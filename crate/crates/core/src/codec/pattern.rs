use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CodecError;

/// How kept indices are drawn for a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Exactly `round(ratio·N)` indices, uniformly without replacement.
    #[serde(rename = "exact")]
    ExactM,
    /// Each index kept independently with probability `ratio`.
    Bernoulli,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::ExactM => "exact",
            SamplingMode::Bernoulli => "bernoulli",
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SamplingMode::ExactM),
            "bernoulli" => Ok(SamplingMode::Bernoulli),
            other => Err(CodecError::InvalidArgument(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Sorted, unique sample indices kept from a block of `block_len` samples.
///
/// Equivalent to choosing rows of the `N × N` identity matrix. A pattern may
/// be empty when Bernoulli capture keeps nothing; such a block cannot be
/// recovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingPattern {
    block_len: usize,
    indices: Vec<usize>,
}

impl SensingPattern {
    pub fn new(block_len: usize, indices: Vec<usize>) -> Result<Self, CodecError> {
        if block_len == 0 {
            return Err(CodecError::InvalidArgument("block length must be at least 1".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::InvalidArgument("pattern indices must be strictly increasing".into()));
        }
        if indices.last().is_some_and(|&i| i >= block_len) {
            return Err(CodecError::InvalidArgument(format!(
                "pattern index out of range for block length {block_len}"
            )));
        }
        Ok(Self { block_len, indices })
    }

    pub fn full(block_len: usize) -> Self {
        Self { block_len, indices: (0..block_len).collect() }
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.block_len
    }
}

fn check_ratio(ratio: f64) -> Result<(), CodecError> {
    if ratio.is_finite() && ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(CodecError::InvalidArgument(format!("compression ratio {ratio} is outside (0, 1]")))
    }
}

/// Number of samples kept by exact-M capture of a block of `block_len`.
pub(crate) fn exact_count(block_len: usize, ratio: f64) -> usize {
    (ratio * block_len as f64).round() as usize
}

/// Draws a sensing pattern for one block.
pub fn make_pattern<R: Rng + ?Sized>(
    block_len: usize,
    ratio: f64,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<SensingPattern, CodecError> {
    if block_len == 0 {
        return Err(CodecError::InvalidArgument("block length must be at least 1".into()));
    }
    check_ratio(ratio)?;
    let indices = match mode {
        SamplingMode::ExactM => {
            let m = exact_count(block_len, ratio);
            if m == 0 {
                return Err(CodecError::InvalidArgument(format!(
                    "ratio {ratio} keeps no samples of a {block_len}-sample block"
                )));
            }
            let mut idx = rand::seq::index::sample(rng, block_len, m).into_vec();
            idx.sort_unstable();
            idx
        }
        // keep when u ≤ ratio, u ~ U[0, 1)
        SamplingMode::Bernoulli => (0..block_len).filter(|_| rng.random::<f64>() <= ratio).collect(),
    };
    Ok(SensingPattern { block_len, indices })
}
