//! Charts from sweep and scenario CSV outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::artifact::Artifact;
use crate::svg::{bar_chart, heatmap, line_chart, Bar, Series};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {msg}")]
    Read { path: String, msg: String },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}, line {line}: {msg}")]
    BadValue { file: String, line: u64, msg: String },
    #[error("nothing to report: {0}")]
    Empty(String),
}

/// A CSV file held as strings, with columns looked up by name.
#[derive(Debug, Clone)]
pub struct CsvTable {
    name: String,
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Read { path: path.display().to_string(), msg: e.to_string() })?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        Self::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, ReportError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let err = |e: csv::Error| ReportError::Read { path: name.into(), msg: e.to_string() };
        let headers = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { name: name.into(), headers, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn col(&self, column: &str) -> Result<usize, ReportError> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| ReportError::MissingColumn { file: self.name.clone(), column: column.into() })
    }

    fn require(&self, columns: &[&str]) -> Result<Vec<usize>, ReportError> {
        columns.iter().map(|c| self.col(c)).collect()
    }

    /// Parses a field; an empty field reads as `None`.
    fn num<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<Option<T>, ReportError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, fields) = &self.rows[row];
        let raw = fields.get(col).map(String::as_str).unwrap_or("");
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse().map(Some).map_err(|e: T::Err| ReportError::BadValue {
            file: self.name.clone(),
            line: *line,
            msg: format!("`{}`: {e}", self.headers[col]),
        })
    }

    fn text(&self, row: usize, col: usize) -> &str {
        self.rows[row].1.get(col).map(String::as_str).unwrap_or("")
    }
}

/// MAPE against OBU capacity: one chart per (pattern, mpr, rate), one line
/// per source and ratio.
pub fn capacity_charts(aggs: &CsvTable) -> Result<Vec<Artifact>, ReportError> {
    let c = aggs.require(&["pattern", "mpr", "rate_hz", "ratio", "capacity", "mean_cv", "mean_cs"])?;
    if aggs.is_empty() {
        return Err(ReportError::Empty(format!("{} has no rows", aggs.name)));
    }
    // (pattern, mpr, rate) → (series label) → points
    let mut charts: BTreeMap<(String, String, String), BTreeMap<String, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in 0..aggs.len() {
        let key = (aggs.text(r, c[0]).to_string(), aggs.text(r, c[1]).to_string(), aggs.text(r, c[2]).to_string());
        let ratio = aggs.text(r, c[3]);
        let Some(cap) = aggs.num::<f64>(r, c[4])? else { continue };
        let chart = charts.entry(key).or_default();
        for (src, col) in [("CV", c[5]), ("CS", c[6])] {
            if let Some(v) = aggs.num::<f64>(r, col)? {
                chart.entry(format!("{src} ratio {ratio}")).or_default().push((cap, v));
            }
        }
    }
    Ok(charts
        .into_iter()
        .map(|((pattern, mpr, rate), lines)| {
            let series: Vec<Series> = lines
                .into_iter()
                .map(|(label, mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series { label, points }
                })
                .collect();
            let title = format!("MAPE by OBU capacity ({pattern}, mpr {mpr}, {rate} Hz)");
            let svg = line_chart(&title, "OBU capacity (snapshots)", "mean MAPE", &series);
            Artifact::text(format!("mape_capacity_{pattern}_mpr{mpr}_{rate}hz.svg"), svg)
        })
        .collect())
}

/// Mean ± standard deviation of MAPE per grid key, CV and CS side by side.
pub fn mean_std_bars(aggs: &CsvTable) -> Result<Artifact, ReportError> {
    let c = aggs.require(&["key", "pattern", "mpr", "mean_cv", "std_cv", "mean_cs", "std_cs"])?;
    if aggs.is_empty() {
        return Err(ReportError::Empty(format!("{} has no rows", aggs.name)));
    }
    let multi = (0..aggs.len()).any(|r| aggs.text(r, c[1]) != aggs.text(0, c[1]) || aggs.text(r, c[2]) != aggs.text(0, c[2]));
    let mut bars = Vec::new();
    for r in 0..aggs.len() {
        let key = if multi {
            format!("{} {} {}", aggs.text(r, c[1]), aggs.text(r, c[2]), aggs.text(r, c[0]))
        } else {
            aggs.text(r, c[0]).to_string()
        };
        for (k, (src, m, s)) in [("CV", c[3], c[4]), ("CS", c[5], c[6])].into_iter().enumerate() {
            if let Some(v) = aggs.num::<f64>(r, m)? {
                bars.push(Bar { label: format!("{key} {src}"), value: v, err: aggs.num::<f64>(r, s)?, group: k });
            }
        }
    }
    Ok(Artifact::text("mape_mean_std.svg", bar_chart("Mean MAPE ± std by rate-ratio-capacity", "MAPE", &bars)))
}

type Grid = BTreeMap<(usize, usize), f64>;

/// Segment × interval heatmaps from a travel-time table file: ground-truth
/// speed, and per-cell absolute percentage error of every other source.
pub fn heatmaps(tables: &CsvTable, segment_len_mi: f64) -> Result<Vec<Artifact>, ReportError> {
    let c = tables.require(&["source", "segment", "interval", "tt_s"])?;
    if tables.is_empty() {
        return Err(ReportError::Empty(format!("{} has no rows", tables.name)));
    }
    let mut by_source: BTreeMap<String, Grid> = BTreeMap::new();
    let (mut n_seg, mut n_int) = (0, 0);
    for r in 0..tables.len() {
        let (Some(s), Some(j)) = (tables.num::<usize>(r, c[1])?, tables.num::<usize>(r, c[2])?) else { continue };
        n_seg = n_seg.max(s);
        n_int = n_int.max(j);
        let grid = by_source.entry(tables.text(r, c[0]).to_string()).or_default();
        if let Some(tt) = tables.num::<f64>(r, c[3])? {
            grid.insert((s, j), tt);
        }
    }
    let rows: Vec<String> = (1..=n_seg).map(|s| format!("s{s}")).collect();
    let cols: Vec<String> = (1..=n_int).map(|j| j.to_string()).collect();
    let cells = |f: &dyn Fn(usize, usize) -> Option<f64>| -> Vec<Option<f64>> {
        (1..=n_seg).flat_map(|s| (1..=n_int).map(move |j| (s, j))).map(|(s, j)| f(s, j)).collect()
    };
    let mut out = Vec::new();
    let gr = by_source.get("GR");
    for (src, grid) in &by_source {
        let speed = cells(&|s, j| grid.get(&(s, j)).map(|tt| segment_len_mi * 3600.0 / tt));
        out.push(Artifact::text(
            format!("speed_{}.svg", src.to_lowercase()),
            heatmap(&format!("{src} speed (mph) by segment and interval"), &rows, &cols, &speed, true),
        ));
        if let (Some(gr), false) = (gr, src == "GR") {
            let ape = cells(&|s, j| match (grid.get(&(s, j)), gr.get(&(s, j))) {
                (Some(e), Some(t)) if *t > 0.0 => Some((e - t).abs() / t),
                _ => None,
            });
            out.push(Artifact::text(
                format!("ape_{}.svg", src.to_lowercase()),
                heatmap(&format!("{src} travel-time error vs GR by segment and interval"), &rows, &cols, &ape, false),
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Directory holding `aggregates.csv` and/or `tables.csv`.
    pub input_dir: PathBuf,
    pub segment_len_mi: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { input_dir: PathBuf::from("."), segment_len_mi: 0.5 }
    }
}

/// Every chart that the files in `cfg.input_dir` support.
pub fn report(cfg: &ReportConfig) -> Result<Vec<Artifact>, ReportError> {
    let aggs = cfg.input_dir.join("aggregates.csv");
    let tables = cfg.input_dir.join("tables.csv");
    let mut out = Vec::new();
    if aggs.exists() {
        let t = CsvTable::read(&aggs)?;
        out.extend(capacity_charts(&t)?);
        out.push(mean_std_bars(&t)?);
    }
    if tables.exists() {
        out.extend(heatmaps(&CsvTable::read(&tables)?, cfg.segment_len_mi)?);
    }
    if out.is_empty() {
        return Err(ReportError::Empty(format!("no aggregates.csv or tables.csv in {}", cfg.input_dir.display())));
    }
    Ok(out)
}
