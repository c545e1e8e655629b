//! One function per CLI subcommand. Each returns the files it would write,
//! so the binary only parses arguments and writes artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cvsense::codec::{capture_stream, format as codec_format, recover_stream, SamplingMode, SolverConfig};
use cvsense::estimation::write_tables_csv;
use cvsense::rng;
use cvsense::sim::{
    build_scenario, run, write_detectors_csv, write_trajectories_csv, write_uploads_csv, ScenarioConfig,
};
use cvsense::study::{evaluate, EvalOptions};

use crate::artifact::Artifact;
use crate::bench::{bench_csv, bench_recovery, timing_csv, BenchConfig, BenchError, BenchPoint};
use crate::bsm::{ingest_bsm, IngestError, IngestOptions, IngestReport, Trip};
use crate::report::{report, ReportConfig, ReportError};
use crate::svg::{line_chart, Series};
use crate::sweep::{aggregates_csv, run_sweep, runs_csv, SweepError, SweepGrid};
use crate::synth::{synth_corpus, SynthConfig};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Run(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub fn parse_config<T: for<'de> Deserialize<'de> + Default>(text: Option<&str>) -> Result<T, CommandError> {
    match text {
        Some(t) => toml::from_str(t).map_err(|e| CommandError::Config(e.to_string())),
        None => Ok(T::default()),
    }
}

pub fn config_text<T: Serialize>(cfg: &T) -> String {
    toml::to_string(cfg).expect("configs serialize to TOML")
}

/// Trips read from a BSM file, or a synthetic corpus when no file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub bsm_csv: Option<PathBuf>,
    pub period_s: f64,
    pub gap_factor: f64,
    pub synth: SynthConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        let o = IngestOptions::default();
        Self { bsm_csv: None, period_s: o.period_s, gap_factor: o.gap_factor, synth: SynthConfig::default() }
    }
}

fn load_corpus(cfg: &CorpusConfig, seed: u64) -> Result<IngestReport, CommandError> {
    match &cfg.bsm_csv {
        Some(p) => Ok(ingest_bsm(p, &IngestOptions { period_s: cfg.period_s, gap_factor: cfg.gap_factor })?),
        None => {
            let trips = synth_corpus(&cfg.synth, seed);
            let rows_read = trips.iter().map(Trip::len).sum();
            Ok(IngestReport { trips, rows_read, rejected: Vec::new() })
        }
    }
}

fn ingest_artifacts(r: &IngestReport) -> Vec<Artifact> {
    let mut trips = String::from("trip,device_id,samples,start_s,end_s\n");
    for (k, t) in r.trips.iter().enumerate() {
        let (a, b) = (t.records[0].timestamp_s, t.records[t.len() - 1].timestamp_s);
        let _ = writeln!(trips, "{},{},{},{a:.1},{b:.1}", k + 1, t.device_id, t.len());
    }
    let mut rej = String::from("line,reason\n");
    for x in &r.rejected {
        let _ = writeln!(rej, "{},\"{}\"", x.line, x.reason.replace('"', "'"));
    }
    vec![Artifact::text("trips.csv", trips), Artifact::text("rejections.csv", rej)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub seed: u64,
    pub block_len: usize,
    pub ratio: f64,
    pub mode: SamplingMode,
    pub corpus: CorpusConfig,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self { seed: 1, block_len: 200, ratio: 0.2, mode: SamplingMode::ExactM, corpus: CorpusConfig::default() }
    }
}

/// Compresses the speed series of every trip into its own stream file
/// `trip_NNNN.cs`. Trip `k` draws its patterns from substream `k`.
pub fn compress(cfg: &CompressConfig) -> Result<Vec<Artifact>, CommandError> {
    let corpus = load_corpus(&cfg.corpus, cfg.seed)?;
    let mut out = ingest_artifacts(&corpus);
    let header = codec_format::StreamHeader { block_len: cfg.block_len, ratio: cfg.ratio, mode: cfg.mode, seed: cfg.seed };
    for (k, trip) in corpus.trips.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, k as u64);
        let blocks = capture_stream(&trip.speeds(), cfg.block_len, cfg.ratio, cfg.mode, &mut r)
            .map_err(|e| CommandError::Run(format!("trip {}: {e}", k + 1)))?;
        let mut buf = Vec::new();
        codec_format::write_stream(&mut buf, &header, &blocks).expect("writing to memory");
        out.push(Artifact { name: format!("trip_{:04}.cs", k + 1), bytes: buf });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    /// Directory of `.cs` stream files.
    pub input_dir: PathBuf,
    pub solver: SolverConfig,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self { input_dir: PathBuf::from("."), solver: SolverConfig::default() }
    }
}

/// Recovers every `.cs` file of the input directory into
/// `<stem>.recovered.csv`, plus `blocks.csv` with one status row per block.
pub fn recover(cfg: &RecoverConfig) -> Result<Vec<Artifact>, CommandError> {
    let io_err = |p: &std::path::Path, e: std::io::Error| CommandError::Io { path: p.display().to_string(), msg: e.to_string() };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&cfg.input_dir)
        .map_err(|e| io_err(&cfg.input_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cs"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CommandError::Run(format!("no .cs files in {}", cfg.input_dir.display())));
    }
    let mut out = Vec::new();
    let mut status = String::from("file,block_seq,block_len,kept,status,iterations\n");
    for path in files {
        let f = std::fs::File::open(&path).map_err(|e| io_err(&path, e))?;
        let (_, blocks) = codec_format::read_stream(std::io::BufReader::new(f))
            .map_err(|e| CommandError::Run(format!("{}: {e}", path.display())))?;
        let rec = recover_stream(&blocks, &cfg.solver);
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for (b, s) in blocks.iter().zip(&rec.statuses) {
            let iters = s.stats().map(|x| x.iterations.to_string()).unwrap_or_default();
            let _ = writeln!(status, "{name},{},{},{},{},{iters}", b.block_seq, b.block_len(), b.values.len(), s.label());
        }
        let mut body = String::from("index,speed\n");
        for (i, v) in rec.samples.iter().enumerate() {
            let _ = writeln!(body, "{i},{}", v.map(|x| format!("{x:.6}")).unwrap_or_default());
        }
        out.push(Artifact::text(format!("{name}.recovered.csv"), body));
    }
    out.push(Artifact::text("blocks.csv", status));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchCommandConfig {
    pub seed: u64,
    /// Also write wall-clock timings, which differ between runs.
    pub timing: bool,
    pub corpus: CorpusConfig,
    pub bench: BenchConfig,
}

impl Default for BenchCommandConfig {
    fn default() -> Self {
        Self { seed: 1, timing: false, corpus: CorpusConfig::default(), bench: BenchConfig::default() }
    }
}

fn curves(points: &[BenchPoint], y: impl Fn(&BenchPoint) -> Option<f64>) -> Vec<Series> {
    let mut lens: Vec<usize> = points.iter().map(|p| p.block_len).collect();
    lens.dedup();
    lens.iter()
        .map(|&n| Series {
            label: format!("N = {n}"),
            points: points.iter().filter(|p| p.block_len == n).filter_map(|p| y(p).map(|v| (p.ratio, v))).collect(),
        })
        .collect()
}

pub fn bench(cfg: &BenchCommandConfig) -> Result<Vec<Artifact>, CommandError> {
    let corpus = load_corpus(&cfg.corpus, cfg.seed)?;
    let res = bench_recovery(&corpus.trips, &cfg.bench, cfg.seed)?;
    let mut out = ingest_artifacts(&corpus);
    out.push(Artifact::text("bench.csv", bench_csv(&res.points)));
    out.push(Artifact::text(
        "rmse_vs_ratio.svg",
        line_chart("Recovery RMSE by compression ratio", "M/N", "normalized RMSE", &curves(&res.points, |p| p.rmse)),
    ));
    if let Some(b) = &res.binned {
        out.push(Artifact::text("binned_speed.csv", b.speed.to_csv()));
        out.push(Artifact::text("binned_yaw_rate.csv", b.yaw_rate.to_csv()));
        out.push(Artifact::text("binned_confidence.csv", b.confidence.to_csv()));
    }
    if cfg.timing {
        out.push(Artifact::text("timing.csv", timing_csv(&res.points)));
        let ms = |p: &BenchPoint| Some(p.mean_block_time.as_secs_f64() * 1e3);
        out.push(Artifact::text(
            "time_vs_ratio.svg",
            line_chart("Time per block recovery", "M/N", "ms per block", &curves(&res.points, ms)),
        ));
    }
    Ok(out)
}

pub const SUMMARY_CSV_HEADER: &str =
    "scenario_id,mape_lp,mape_cv,mape_cs,cells_missing_lp,cells_missing_cv,cells_missing_cs,cs_blocks,cs_degraded";

pub fn scenario_id(c: &ScenarioConfig) -> String {
    format!(
        "{}{}-mpr{}-{}hz-r{}-cap{}-seed{}",
        c.demand.pattern.as_str(),
        if c.closure.enabled { "" } else { "-noclosure" },
        c.cv.mpr,
        c.cv.capture_rate_hz,
        c.cv.compression_ratio,
        c.cv.obu_capacity,
        c.seed
    )
}

/// Runs one scenario and writes its logs, the four travel-time tables and
/// a one-row MAPE summary.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Vec<Artifact>, CommandError> {
    let scenario = build_scenario(cfg.clone()).map_err(|e| CommandError::Config(e.to_string()))?;
    let log = run(&scenario).map_err(|e| CommandError::Run(e.to_string()))?;
    let eval = evaluate(&scenario, &log, &EvalOptions::default()).map_err(|e| CommandError::Run(e.to_string()))?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    if cfg.output.record_trajectories {
        write_trajectories_csv(&mut buf, &log, cfg.output.trajectory_csv_stride).expect("writing to memory");
        out.push(Artifact { name: "trajectories.csv".into(), bytes: std::mem::take(&mut buf) });
    }
    write_detectors_csv(&mut buf, &log).expect("writing to memory");
    out.push(Artifact { name: "detectors.csv".into(), bytes: std::mem::take(&mut buf) });
    write_uploads_csv(&mut buf, &log.cv_uploads).expect("writing to memory");
    out.push(Artifact { name: "uploads_cv.csv".into(), bytes: std::mem::take(&mut buf) });
    write_uploads_csv(&mut buf, &log.cs_uploads).expect("writing to memory");
    out.push(Artifact { name: "uploads_cs.csv".into(), bytes: std::mem::take(&mut buf) });
    write_tables_csv(&mut buf, &[&eval.gr, &eval.lp, &eval.cv, &eval.cs]).expect("writing to memory");
    out.push(Artifact { name: "tables.csv".into(), bytes: std::mem::take(&mut buf) });
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
    let summary = format!(
        "{SUMMARY_CSV_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        scenario_id(cfg),
        opt(eval.mape_lp.mape),
        opt(eval.mape_cv.mape),
        opt(eval.mape_cs.mape),
        eval.mape_lp.cells_missing,
        eval.mape_cv.cells_missing,
        eval.mape_cs.cells_missing,
        eval.cs_blocks.total(),
        eval.cs_blocks.degraded
    );
    out.push(Artifact::text("summary.csv", summary));
    out.push(Artifact::text("scenario.toml", cfg.to_toml()));
    Ok(out)
}

pub fn sweep(grid: &SweepGrid) -> Result<Vec<Artifact>, CommandError> {
    let res = run_sweep(grid, &EvalOptions::default())?;
    Ok(vec![Artifact::text("runs.csv", runs_csv(&res.rows)), Artifact::text("aggregates.csv", aggregates_csv(&res.aggregates))])
}

pub fn make_report(cfg: &ReportConfig) -> Result<Vec<Artifact>, CommandError> {
    Ok(report(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_corpus() -> CorpusConfig {
        CorpusConfig { synth: SynthConfig { n_trips: 2, min_len: 450, max_len: 700, ..SynthConfig::default() }, ..CorpusConfig::default() }
    }

    #[test]
    fn compress_then_recover() {
        let cfg = CompressConfig { ratio: 1.0, corpus: small_corpus(), ..CompressConfig::default() };
        let arts = compress(&cfg).unwrap();
        let names: Vec<&str> = arts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["trips.csv", "rejections.csv", "trip_0001.cs", "trip_0002.cs"]);
        let dir = tempfile::tempdir().unwrap();
        for a in &arts {
            std::fs::write(dir.path().join(&a.name), &a.bytes).unwrap();
        }
        let rec = recover(&RecoverConfig { input_dir: dir.path().into(), ..RecoverConfig::default() }).unwrap();
        assert_eq!(rec.len(), 3);
        let trip1 = &synth_corpus(&cfg.corpus.synth, cfg.seed)[0];
        let body = rec[0].as_str();
        for (line, r) in body.lines().skip(1).zip(&trip1.records) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((v - r.speed_mph).abs() < 1e-4);
        }
        assert!(rec[2].as_str().lines().skip(1).all(|l| l.contains(",recovered,")));
    }

    #[test]
    fn bench_outputs_are_reproducible_without_timing() {
        let cfg = BenchCommandConfig {
            corpus: small_corpus(),
            bench: BenchConfig { block_lens: vec![100], ratios: vec![0.3, 0.6], binned_at: None, ..BenchConfig::default() },
            ..BenchCommandConfig::default()
        };
        let a = bench(&cfg).unwrap();
        assert!(a.iter().all(|x| x.name != "timing.csv"));
        assert_eq!(a, bench(&cfg).unwrap());
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        assert!(parse_config::<CompressConfig>(Some("ratoi = 0.3")).is_err());
        let c: CompressConfig = parse_config(Some("ratio = 0.3\n[corpus.synth]\nn_trips = 3\n")).unwrap();
        assert_eq!((c.ratio, c.corpus.synth.n_trips), (0.3, 3));
    }
}
