//! Plain-text compressed-block files.
//!
//! ```text
//! N=200 ratio=0.2 mode=exact seed=7
//! 0,200,3:41.2000008,17:40.75,...
//! 1,200,...
//! ```
//!
//! One stream per file. Each block line is `block_seq,block_len` followed by
//! `index:value` pairs; values carry at most nine significant digits.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{CodecError, SampledBlock, SamplingMode, SensingPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub block_len: usize,
    pub ratio: f64,
    pub mode: SamplingMode,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Rounds to nine significant digits and prints the shortest text that
/// reads back as the rounded value.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("scientific notation parses");
    format!("{rounded}")
}

pub fn write_stream<W: Write>(mut w: W, header: &StreamHeader, blocks: &[SampledBlock]) -> io::Result<()> {
    writeln!(
        w,
        "N={} ratio={} mode={} seed={}",
        header.block_len,
        header.ratio,
        header.mode.as_str(),
        header.seed
    )?;
    for b in blocks {
        write!(w, "{},{}", b.block_seq, b.block_len())?;
        for (&i, &v) in b.pattern.indices().iter().zip(&b.values) {
            write!(w, ",{}:{}", i, format_sig9(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<StreamHeader, String> {
    let mut block_len = None;
    let mut ratio = None;
    let mut mode = None;
    let mut seed = None;
    for field in line.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| format!("malformed header field `{field}`"))?;
        match k {
            "N" => block_len = Some(v.parse::<usize>().map_err(|e| format!("N: {e}"))?),
            "ratio" => ratio = Some(v.parse::<f64>().map_err(|e| format!("ratio: {e}"))?),
            "mode" => mode = Some(v.parse::<SamplingMode>().map_err(|e| e.to_string())?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| format!("seed: {e}"))?),
            other => return Err(format!("unknown header field `{other}`")),
        }
    }
    Ok(StreamHeader {
        block_len: block_len.ok_or("header lacks N")?,
        ratio: ratio.ok_or("header lacks ratio")?,
        mode: mode.ok_or("header lacks mode")?,
        seed: seed.ok_or("header lacks seed")?,
    })
}

fn parse_block(line: &str) -> Result<SampledBlock, String> {
    let mut fields = line.split(',');
    let seq = fields
        .next()
        .ok_or("missing block_seq")?
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("block_seq: {e}"))?;
    let len = fields
        .next()
        .ok_or("missing block_len")?
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("block_len: {e}"))?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for pair in fields {
        let (i, v) = pair.split_once(':').ok_or_else(|| format!("malformed pair `{pair}`"))?;
        indices.push(i.trim().parse::<usize>().map_err(|e| format!("index: {e}"))?);
        values.push(v.trim().parse::<f64>().map_err(|e| format!("value: {e}"))?);
    }
    let pattern = SensingPattern::new(len, indices).map_err(|e: CodecError| e.to_string())?;
    SampledBlock::new(pattern, values, seq).map_err(|e| e.to_string())
}

pub fn read_stream<R: BufRead>(r: R) -> Result<(StreamHeader, Vec<SampledBlock>), FormatError> {
    let mut lines = r.lines();
    let header_line = lines.next().ok_or(FormatError::Parse { line: 1, msg: "empty file".into() })??;
    let header = parse_header(&header_line).map_err(|msg| FormatError::Parse { line: 1, msg })?;
    let mut blocks = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block = parse_block(&line).map_err(|msg| FormatError::Parse { line: k + 2, msg })?;
        blocks.push(block);
    }
    Ok((header, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::capture_stream;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(40.0), "40");
        assert_eq!(format_sig9(38.540000123), "38.5400001");
        assert_eq!(format_sig9(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn golden_text() {
        let blocks = vec![
            SampledBlock::new(SensingPattern::new(4, vec![0, 3]).unwrap(), vec![1.5, 2.25], 0).unwrap(),
            SampledBlock::new(SensingPattern::new(2, vec![]).unwrap(), vec![], 1).unwrap(),
        ];
        let header = StreamHeader { block_len: 4, ratio: 0.5, mode: SamplingMode::Bernoulli, seed: 9 };
        let mut out = Vec::new();
        write_stream(&mut out, &header, &blocks).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "N=4 ratio=0.5 mode=bernoulli seed=9\n0,4,0:1.5,3:2.25\n1,2\n");
        let (h, b) = read_stream(out.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(b, blocks);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "N=4 ratio=0.5 mode=exact seed=1\n0,4,0:1\n1,4,2:x\n";
        match read_stream(text.as_bytes()) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_stream("N=4 mode=exact seed=1\n".as_bytes()).is_err());
        assert!(read_stream("N=4 ratio=0.5 mode=exact seed=1\n0,4,3:1,1:2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_nine_digits(values in prop::collection::vec(-1e4f64..1e4, 1..300), seed in any::<u64>()) {
            let blocks = capture_stream(&values, 64, 0.5, SamplingMode::Bernoulli, &mut rng::stream(seed, 0)).unwrap();
            let header = StreamHeader { block_len: 64, ratio: 0.5, mode: SamplingMode::Bernoulli, seed };
            let mut out = Vec::new();
            write_stream(&mut out, &header, &blocks).unwrap();
            let (_, back) = read_stream(out.as_slice()).unwrap();
            prop_assert_eq!(back.len(), blocks.len());
            for (a, b) in back.iter().zip(&blocks) {
                prop_assert_eq!(&a.pattern, &b.pattern);
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
                }
            }
        }
    }
}
