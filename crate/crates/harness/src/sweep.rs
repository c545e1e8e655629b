//! Scenario grid sweeps.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use cvsense::rng;
use cvsense::sim::{build_scenario, run, ArrivalKind, ScenarioConfig};
use cvsense::study::{evaluate, EvalOptions, Evaluation};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Grid axes plus the scenario every grid point starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub obu_capacities: Vec<usize>,
    pub rates: Vec<u32>,
    pub ratios: Vec<f64>,
    pub mprs: Vec<f64>,
    pub arrival_patterns: Vec<ArrivalKind>,
    pub replications: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub base: ScenarioConfig,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            obu_capacities: vec![50, 100, 150, 200, 250, 300],
            rates: vec![1, 10],
            ratios: vec![0.2, 0.5],
            mprs: vec![0.6],
            arrival_patterns: vec![ArrivalKind::Constant],
            replications: 5,
            master_seed: 1,
            workers: 0,
            base: ScenarioConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub pattern: ArrivalKind,
    pub mpr: f64,
    pub rate_hz: u32,
    pub ratio: f64,
    pub capacity: usize,
}

impl GridPoint {
    /// `rate-ratio-capacity`, e.g. `10-0.2-50`.
    pub fn key(&self) -> String {
        format!("{}-{}-{}", self.rate_hz, self.ratio, self.capacity)
    }
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<Self, SweepError> {
        toml::from_str(text).map_err(|e| SweepError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let empty = [
            ("obu_capacities", self.obu_capacities.is_empty()),
            ("rates", self.rates.is_empty()),
            ("ratios", self.ratios.is_empty()),
            ("mprs", self.mprs.is_empty()),
            ("arrival_patterns", self.arrival_patterns.is_empty()),
        ];
        if let Some((axis, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(SweepError::Config(format!("axis `{axis}` is empty")));
        }
        if self.replications == 0 {
            return Err(SweepError::Config("replications must be at least 1".into()));
        }
        if let Some(m) = self.mprs.iter().find(|m| !(**m > 0.0 && **m <= 1.0)) {
            return Err(SweepError::Config(format!("mpr {m} is outside (0, 1]")));
        }
        // the remaining ranges are checked by scenario validation of the first point
        let first = self.points()[0];
        build_scenario(self.config_for(&first, 0)).map_err(|e| SweepError::Config(e.to_string()))?;
        Ok(())
    }

    /// Grid points, patterns outermost and capacity innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &pattern in &self.arrival_patterns {
            for &mpr in &self.mprs {
                for &rate_hz in &self.rates {
                    for &ratio in &self.ratios {
                        for &capacity in &self.obu_capacities {
                            out.push(GridPoint { pattern, mpr, rate_hz, ratio, capacity });
                        }
                    }
                }
            }
        }
        out
    }

    /// Seed of replication `rep`. Every grid point shares it, so points
    /// differ only through their axes.
    pub fn replication_seed(&self, rep: usize) -> u64 {
        rng::derive_seed(self.master_seed, rep as u64)
    }

    pub fn config_for(&self, p: &GridPoint, rep: usize) -> ScenarioConfig {
        let mut c = self.base.clone();
        c.seed = self.replication_seed(rep);
        c.demand.pattern = p.pattern;
        c.cv.mpr = p.mpr;
        c.cv.capture_rate_hz = p.rate_hz;
        c.cv.compression_ratio = p.ratio;
        c.cv.obu_capacity = p.capacity;
        // a sweep never reads trajectories
        c.output.record_trajectories = false;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub mape_lp: Option<f64>,
    pub mape_cv: Option<f64>,
    pub mape_cs: Option<f64>,
    pub missing_lp: usize,
    pub missing_cv: usize,
    pub missing_cs: usize,
    pub cs_blocks: usize,
    pub cs_degraded: usize,
}

impl From<&Evaluation> for RunScores {
    fn from(e: &Evaluation) -> Self {
        Self {
            mape_lp: e.mape_lp.mape,
            mape_cv: e.mape_cv.mape,
            mape_cs: e.mape_cs.mape,
            missing_lp: e.mape_lp.cells_missing,
            missing_cv: e.mape_cv.cells_missing,
            missing_cs: e.mape_cs.cells_missing,
            cs_blocks: e.cs_blocks.total(),
            cs_degraded: e.cs_blocks.degraded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    pub replication: usize,
    pub seed: u64,
    pub outcome: Result<RunScores, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

fn mean_std(v: &[f64]) -> Option<MeanStd> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub point: GridPoint,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub lp: Option<MeanStd>,
    pub cv: Option<MeanStd>,
    pub cs: Option<MeanStd>,
}

impl Aggregate {
    /// Mean CS MAPE relative to mean CV MAPE: (cv − cs) / cv.
    pub fn relative_reduction(&self) -> Option<f64> {
        match (&self.cv, &self.cs) {
            (Some(cv), Some(cs)) if cv.mean > 0.0 => Some((cv.mean - cs.mean) / cv.mean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs one scenario and scores it.
pub fn run_one(config: ScenarioConfig, opts: &EvalOptions) -> Result<Evaluation, String> {
    let scenario = build_scenario(config).map_err(|e| e.to_string())?;
    let log = run(&scenario).map_err(|e| e.to_string())?;
    evaluate(&scenario, &log, opts).map_err(|e| e.to_string())
}

pub fn run_sweep(grid: &SweepGrid, opts: &EvalOptions) -> Result<SweepResult, SweepError> {
    grid.validate()?;
    let points = grid.points();
    let jobs: Vec<(GridPoint, usize)> =
        points.iter().flat_map(|p| (0..grid.replications).map(move |r| (*p, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(point, rep)| {
                let cfg = grid.config_for(&point, rep);
                let seed = cfg.seed;
                let outcome = run_one(cfg, opts).map(|e| RunScores::from(&e));
                SweepRow { point, replication: rep, seed, outcome }
            })
            .collect()
    });
    let aggregates = points
        .iter()
        .enumerate()
        .map(|(k, p)| aggregate(*p, &rows[k * grid.replications..(k + 1) * grid.replications]))
        .collect();
    Ok(SweepResult { rows, aggregates })
}

fn aggregate(point: GridPoint, rows: &[SweepRow]) -> Aggregate {
    let ok: Vec<&RunScores> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let col = |f: fn(&RunScores) -> Option<f64>| mean_std(&ok.iter().filter_map(|s| f(s)).collect::<Vec<_>>());
    Aggregate {
        point,
        runs_ok: ok.len(),
        runs_failed: rows.len() - ok.len(),
        lp: col(|s| s.mape_lp),
        cv: col(|s| s.mape_cv),
        cs: col(|s| s.mape_cs),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

pub const RUNS_CSV_HEADER: &str = "key,pattern,mpr,rate_hz,ratio,capacity,replication,seed,status,mape_lp,mape_cv,mape_cs,cells_missing_lp,cells_missing_cv,cells_missing_cs,cs_blocks,cs_degraded,error";
pub const AGGREGATES_CSV_HEADER: &str = "key,pattern,mpr,rate_hz,ratio,capacity,runs_ok,runs_failed,mean_lp,std_lp,mean_cv,std_cv,mean_cs,std_cs,relative_reduction";

fn point_cols(p: &GridPoint) -> String {
    format!("{},{},{},{},{},{}", p.key(), p.pattern.as_str(), p.mpr, p.rate_hz, p.ratio, p.capacity)
}

pub fn runs_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{RUNS_CSV_HEADER}\n");
    for r in rows {
        let _ = write!(out, "{},{},{},", point_cols(&r.point), r.replication, r.seed);
        let _ = match &r.outcome {
            Ok(s) => writeln!(
                out,
                "ok,{},{},{},{},{},{},{},{},",
                opt(s.mape_lp),
                opt(s.mape_cv),
                opt(s.mape_cs),
                s.missing_lp,
                s.missing_cv,
                s.missing_cs,
                s.cs_blocks,
                s.cs_degraded
            ),
            Err(e) => writeln!(out, "error,,,,,,,,,\"{}\"", e.replace('"', "'")),
        };
    }
    out
}

pub fn aggregates_csv(aggs: &[Aggregate]) -> String {
    let mut out = format!("{AGGREGATES_CSV_HEADER}\n");
    for a in aggs {
        let m = |v: &Option<MeanStd>| (opt(v.as_ref().map(|x| x.mean)), opt(v.as_ref().map(|x| x.std)));
        let (lp, lps) = m(&a.lp);
        let (cv, cvs) = m(&a.cv);
        let (cs, css) = m(&a.cs);
        let _ = writeln!(
            out,
            "{},{},{},{lp},{lps},{cv},{cvs},{cs},{css},{}",
            point_cols(&a.point),
            a.runs_ok,
            a.runs_failed,
            opt(a.relative_reduction())
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point() -> GridPoint {
        GridPoint { pattern: ArrivalKind::Constant, mpr: 0.6, rate_hz: 10, ratio: 0.2, capacity: 50 }
    }

    fn scores(cv: f64, cs: f64) -> RunScores {
        RunScores {
            mape_lp: Some(0.1),
            mape_cv: Some(cv),
            mape_cs: Some(cs),
            missing_lp: 0,
            missing_cv: 0,
            missing_cs: 0,
            cs_blocks: 1,
            cs_degraded: 0,
        }
    }

    #[test]
    fn grid_point_count_and_key() {
        let g = SweepGrid { obu_capacities: vec![50, 300], ..SweepGrid::default() };
        assert_eq!(g.points().len(), 2 * 2 * 2);
        assert_eq!(point().key(), "10-0.2-50");
    }

    #[test]
    fn aggregate_mean_std_and_reduction() {
        let rows: Vec<SweepRow> = [(0.10, 0.05), (0.20, 0.07), (0.30, 0.09)]
            .iter()
            .enumerate()
            .map(|(k, &(cv, cs))| SweepRow { point: point(), replication: k, seed: k as u64, outcome: Ok(scores(cv, cs)) })
            .chain(std::iter::once(SweepRow { point: point(), replication: 3, seed: 3, outcome: Err("boom".into()) }))
            .collect();
        let a = aggregate(point(), &rows);
        assert_eq!((a.runs_ok, a.runs_failed), (3, 1));
        let cv = a.cv.clone().unwrap();
        assert!((cv.mean - 0.2).abs() < 1e-12);
        assert!((cv.std - 0.1).abs() < 1e-12);
        assert!((a.relative_reduction().unwrap() - (0.2 - 0.07) / 0.2).abs() < 1e-12);
        let csv = runs_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().last().unwrap().contains("error"));
        assert_eq!(aggregates_csv(&[a]).lines().count(), 2);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let g = SweepGrid { ratios: vec![], ..SweepGrid::default() };
        assert!(matches!(g.validate(), Err(SweepError::Config(m)) if m.contains("ratios")));
        let g = SweepGrid { replications: 0, ..SweepGrid::default() };
        assert!(g.validate().is_err());
        let g = SweepGrid { rates: vec![3], ..SweepGrid::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn grid_reads_from_toml() {
        let g = SweepGrid::from_toml(
            "rates = [10]\nratios = [0.2]\nobu_capacities = [50]\nreplications = 2\n[base.closure]\nenabled = false\n",
        )
        .unwrap();
        assert_eq!(g.points().len(), 1);
        assert!(!g.base.closure.enabled);
        assert_eq!(g.replications, 2);
    }

    #[test]
    fn seeds_depend_only_on_replication() {
        let g = SweepGrid::default();
        let pts = g.points();
        assert_eq!(g.config_for(&pts[0], 2).seed, g.config_for(&pts[3], 2).seed);
        assert_ne!(g.config_for(&pts[0], 1).seed, g.config_for(&pts[0], 2).seed);
    }
}
