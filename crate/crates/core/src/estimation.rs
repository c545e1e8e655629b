//! Segment travel times from ground truth, detectors and probe data, and
//! their scoring against ground truth.

use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::units::travel_time_s;

/// Spot speeds below this (mph) are raised to it before inversion.
pub const DEFAULT_V_FLOOR_MPH: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("ground truth has no value for segment {segment}, interval {interval}")]
    MissingGroundTruth { segment: usize, interval: usize },
    #[error("tables cover different grids")]
    ShapeMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Gr,
    Lp,
    Cv,
    Cs,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Gr, Source::Lp, Source::Cv, Source::Cs];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Gr => "GR",
            Source::Lp => "LP",
            Source::Cv => "CV",
            Source::Cs => "CS",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Harmonic mean of spot speeds, each raised to at least `v_floor`.
/// `None` when there are no records.
pub fn space_mean_speed_harmonic(speeds: &[f64], v_floor: f64) -> Option<f64> {
    if speeds.is_empty() {
        return None;
    }
    let inv: f64 = speeds.iter().map(|&v| 1.0 / v.max(v_floor)).sum();
    Some(speeds.len() as f64 / inv)
}

fn outer_mean(step_means: impl Iterator<Item = Option<f64>>, strict: bool) -> Option<f64> {
    let (mut sum, mut used, mut total) = (0.0, 0usize, 0usize);
    for m in step_means {
        total += 1;
        if let Some(m) = m {
            sum += m;
            used += 1;
        }
    }
    if used == 0 {
        return None;
    }
    Some(if strict { sum / total as f64 } else { sum / used as f64 })
}

/// Probe space-mean speed over one segment and interval.
///
/// `records` are `(step, speed)` pairs with `step` in `0..n_steps`. Each
/// non-empty step contributes the mean of its speeds; the result is the
/// mean over non-empty steps, or over all `n_steps` when `strict`.
pub fn space_mean_speed_probe(records: &[(usize, f64)], n_steps: usize, strict: bool) -> Option<f64> {
    let mut sums = vec![(0.0, 0u32); n_steps];
    for &(t, v) in records {
        if let Some(cell) = sums.get_mut(t) {
            cell.0 += v;
            cell.1 += 1;
        }
    }
    outer_mean(sums.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)), strict)
}

/// Per-(segment, time slot) speed sums for probe aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    n_segments: usize,
    n_intervals: usize,
    slots_per_interval: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl ProbeGrid {
    pub fn new(n_segments: usize, n_intervals: usize, slots_per_interval: usize) -> Self {
        let n = n_segments * n_intervals * slots_per_interval;
        Self { n_segments, n_intervals, slots_per_interval, sums: vec![0.0; n], counts: vec![0; n] }
    }

    pub fn n_slots(&self) -> usize {
        self.n_intervals * self.slots_per_interval
    }

    pub fn slots_per_interval(&self) -> usize {
        self.slots_per_interval
    }

    /// Adds a speed observed in 1-based `segment` at time slot `slot`.
    /// Observations outside the grid are ignored.
    pub fn add(&mut self, segment: usize, slot: usize, speed: f64) {
        if segment == 0 || segment > self.n_segments || slot >= self.n_slots() {
            return;
        }
        let k = (segment - 1) * self.n_slots() + slot;
        self.sums[k] += speed;
        self.counts[k] += 1;
    }

    /// Distinct observations in a cell.
    pub fn support(&self, segment: usize, interval: usize) -> usize {
        self.cell_range(segment, interval).map(|k| self.counts[k] as usize).sum()
    }

    fn cell_range(&self, segment: usize, interval: usize) -> std::ops::Range<usize> {
        let base = (segment - 1) * self.n_slots() + (interval - 1) * self.slots_per_interval;
        base..base + self.slots_per_interval
    }

    pub fn mean_speed(&self, segment: usize, interval: usize, strict: bool) -> Option<f64> {
        let r = self.cell_range(segment, interval);
        outer_mean(
            r.map(|k| (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64)),
            strict,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub tt_s: f64,
    pub support: usize,
}

/// Travel time per 1-based (segment, interval); absent cells had no data.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeTable {
    pub source: Source,
    n_segments: usize,
    n_intervals: usize,
    cells: Vec<Option<Cell>>,
}

impl TravelTimeTable {
    pub fn empty(source: Source, n_segments: usize, n_intervals: usize) -> Self {
        Self { source, n_segments, n_intervals, cells: vec![None; n_segments * n_intervals] }
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    fn index(&self, segment: usize, interval: usize) -> usize {
        assert!((1..=self.n_segments).contains(&segment) && (1..=self.n_intervals).contains(&interval));
        (segment - 1) * self.n_intervals + interval - 1
    }

    pub fn get(&self, segment: usize, interval: usize) -> Option<Cell> {
        self.cells[self.index(segment, interval)]
    }

    pub fn set(&mut self, segment: usize, interval: usize, cell: Option<Cell>) {
        let k = self.index(segment, interval);
        self.cells[k] = cell;
    }

    /// Cell from a space-mean speed over a segment of `len_mi`.
    pub fn set_speed(&mut self, segment: usize, interval: usize, len_mi: f64, speed_mph: Option<f64>, support: usize) {
        let cell = speed_mph.filter(|&v| v > 0.0 && support > 0).map(|v| Cell { tt_s: travel_time_s(len_mi, v), support });
        self.set(segment, interval, cell);
    }

    pub fn present(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    /// `(segment, interval, cell)` in segment-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Option<Cell>)> + '_ {
        self.cells.iter().enumerate().map(|(k, c)| (k / self.n_intervals + 1, k % self.n_intervals + 1, *c))
    }

    /// Rows `source,segment,interval,tt_s,support`; absent cells have an
    /// empty `tt_s` and support 0.
    pub fn write_csv_rows<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (s, j, c) in self.iter() {
            match c {
                Some(c) => writeln!(w, "{},{s},{j},{:.6},{}", self.source, c.tt_s, c.support)?,
                None => writeln!(w, "{},{s},{j},,0", self.source)?,
            }
        }
        Ok(())
    }
}

pub const TABLE_CSV_HEADER: &str = "source,segment,interval,tt_s,support";

/// Writes several tables under one header.
pub fn write_tables_csv<W: Write>(w: &mut W, tables: &[&TravelTimeTable]) -> std::io::Result<()> {
    writeln!(w, "{TABLE_CSV_HEADER}")?;
    for t in tables {
        t.write_csv_rows(w)?;
    }
    Ok(())
}

/// A detector spot-speed record as seen by the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotSpeed {
    /// Segment whose downstream end holds the detector.
    pub segment: usize,
    pub interval: usize,
    pub speed_mph: f64,
}

pub fn table_from_detectors(
    records: impl IntoIterator<Item = SpotSpeed>,
    n_segments: usize,
    n_intervals: usize,
    segment_len_mi: f64,
    v_floor: f64,
) -> TravelTimeTable {
    let mut speeds = vec![Vec::new(); n_segments * n_intervals];
    for r in records {
        if (1..=n_segments).contains(&r.segment) && (1..=n_intervals).contains(&r.interval) {
            speeds[(r.segment - 1) * n_intervals + r.interval - 1].push(r.speed_mph);
        }
    }
    let mut t = TravelTimeTable::empty(Source::Lp, n_segments, n_intervals);
    for s in 1..=n_segments {
        for j in 1..=n_intervals {
            let v = &speeds[(s - 1) * n_intervals + j - 1];
            t.set_speed(s, j, segment_len_mi, space_mean_speed_harmonic(v, v_floor), v.len());
        }
    }
    t
}

pub fn table_from_probes(source: Source, grid: &ProbeGrid, n_segments: usize, segment_len_mi: f64, strict: bool) -> TravelTimeTable {
    let n_intervals = grid.n_intervals;
    let mut t = TravelTimeTable::empty(source, n_segments, n_intervals);
    for s in 1..=n_segments.min(grid.n_segments) {
        for j in 1..=n_intervals {
            t.set_speed(s, j, segment_len_mi, grid.mean_speed(s, j, strict), grid.support(s, j));
        }
    }
    t
}

/// Scored window, 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapeWindow {
    pub first_segment: usize,
    pub last_segment: usize,
    pub first_interval: usize,
    pub last_interval: usize,
}

impl Default for MapeWindow {
    fn default() -> Self {
        Self { first_segment: 2, last_segment: 10, first_interval: 4, last_interval: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapeSummary {
    /// `None` when no cell of the window was present in the scored table.
    pub mape: Option<f64>,
    pub cells_used: usize,
    pub cells_missing: usize,
}

pub fn mape(table: &TravelTimeTable, truth: &TravelTimeTable) -> Result<MapeSummary, EstimationError> {
    mape_in(table, truth, MapeWindow::default())
}

pub fn mape_in(table: &TravelTimeTable, truth: &TravelTimeTable, w: MapeWindow) -> Result<MapeSummary, EstimationError> {
    if table.n_segments != truth.n_segments || table.n_intervals != truth.n_intervals {
        return Err(EstimationError::ShapeMismatch);
    }
    if w.first_segment == 0 || w.last_segment > truth.n_segments || w.first_interval == 0 || w.last_interval > truth.n_intervals {
        return Err(EstimationError::InvalidArgument("window outside the table".into()));
    }
    let (mut sum, mut used, mut missing) = (0.0, 0usize, 0usize);
    for s in w.first_segment..=w.last_segment {
        for j in w.first_interval..=w.last_interval {
            let gr = truth.get(s, j).ok_or(EstimationError::MissingGroundTruth { segment: s, interval: j })?;
            match table.get(s, j) {
                Some(c) => {
                    sum += (c.tt_s - gr.tt_s).abs() / gr.tt_s;
                    used += 1;
                }
                None => missing += 1,
            }
        }
    }
    Ok(MapeSummary { mape: (used > 0).then(|| sum / used as f64), cells_used: used, cells_missing: missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_examples() {
        assert!((space_mean_speed_harmonic(&[10.0, 30.0], 1.0).unwrap() - 15.0).abs() < 1e-12);
        assert!((space_mean_speed_harmonic(&[42.0; 3], 1.0).unwrap() - 42.0).abs() < 1e-12);
        let clamped = space_mean_speed_harmonic(&[20.0, 0.0], 1.0).unwrap();
        assert!((clamped - 2.0 / (1.0 / 20.0 + 1.0)).abs() < 1e-12);
        assert_eq!(space_mean_speed_harmonic(&[], 1.0), None);
    }

    #[test]
    fn probe_examples() {
        assert_eq!(space_mean_speed_probe(&[(0, 30.0), (1, 30.0), (2, 30.0)], 3, false), Some(30.0));
        assert_eq!(space_mean_speed_probe(&[(0, 20.0), (1, 40.0)], 2, false), Some(30.0));
        assert_eq!(space_mean_speed_probe(&[(0, 10.0), (0, 30.0), (2, 40.0)], 3, false), Some(30.0));
        assert_eq!(space_mean_speed_probe(&[(0, 20.0), (2, 40.0)], 3, true), Some(20.0));
        assert_eq!(space_mean_speed_probe(&[], 3, false), None);
    }

    #[test]
    fn grid_matches_direct_probe_mean() {
        let mut g = ProbeGrid::new(2, 2, 3);
        let recs = [(3, 20.0), (3, 30.0), (5, 40.0)];
        for &(t, v) in &recs {
            g.add(2, t, v);
        }
        let local: Vec<(usize, f64)> = recs.iter().map(|&(t, v)| (t - 3, v)).collect();
        assert_eq!(g.mean_speed(2, 2, false), space_mean_speed_probe(&local, 3, false));
        assert_eq!(g.mean_speed(2, 2, true), space_mean_speed_probe(&local, 3, true));
        assert_eq!(g.support(2, 2), 3);
        assert_eq!(g.mean_speed(1, 1, false), None);
    }

    #[test]
    fn sixty_mph_over_half_mile_is_thirty_seconds() {
        let mut t = TravelTimeTable::empty(Source::Cv, 1, 1);
        t.set_speed(1, 1, 0.5, Some(60.0), 4);
        assert!((t.get(1, 1).unwrap().tt_s - 30.0).abs() < 1e-12);
        t.set_speed(1, 1, 0.5, None, 0);
        assert_eq!(t.get(1, 1), None);
    }

    fn uniform(source: Source, tt: f64) -> TravelTimeTable {
        let mut t = TravelTimeTable::empty(source, 10, 12);
        for s in 1..=10 {
            for j in 1..=12 {
                t.set(s, j, Some(Cell { tt_s: tt, support: 1 }));
            }
        }
        t
    }

    #[test]
    fn mape_examples() {
        let gr = uniform(Source::Gr, 100.0);
        let same = mape(&gr, &gr).unwrap();
        assert_eq!((same.mape, same.cells_used, same.cells_missing), (Some(0.0), 81, 0));

        let mut one = uniform(Source::Cv, 100.0);
        one.set(5, 7, Some(Cell { tt_s: 110.0, support: 1 }));
        assert!((mape(&one, &gr).unwrap().mape.unwrap() - 0.1 / 81.0).abs() < 1e-12);

        let none = TravelTimeTable::empty(Source::Cs, 10, 12);
        let m = mape(&none, &gr).unwrap();
        assert_eq!((m.mape, m.cells_used, m.cells_missing), (None, 0, 81));
    }

    #[test]
    fn cells_outside_window_are_ignored() {
        let gr = uniform(Source::Gr, 100.0);
        let mut t = uniform(Source::Cv, 100.0);
        t.set(1, 7, Some(Cell { tt_s: 500.0, support: 1 }));
        t.set(4, 3, Some(Cell { tt_s: 500.0, support: 1 }));
        assert_eq!(mape(&t, &gr).unwrap().mape, Some(0.0));
    }

    #[test]
    fn incomplete_truth_is_an_error() {
        let mut gr = uniform(Source::Gr, 100.0);
        gr.set(3, 4, None);
        assert_eq!(
            mape(&gr.clone(), &gr).unwrap_err(),
            EstimationError::MissingGroundTruth { segment: 3, interval: 4 }
        );
    }

    #[test]
    fn csv_rows() {
        let mut t = TravelTimeTable::empty(Source::Lp, 1, 2);
        t.set_speed(1, 1, 0.5, Some(60.0), 3);
        let mut out = Vec::new();
        write_tables_csv(&mut out, &[&t]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "source,segment,interval,tt_s,support\nLP,1,1,30.000000,3\nLP,1,2,,0\n"
        );
    }

    fn table_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Option<f64>>)> {
        (
            prop::collection::vec(10.0f64..500.0, 120),
            prop::collection::vec(prop::option::of(10.0f64..500.0), 120),
        )
    }

    fn build(source: Source, tts: impl Iterator<Item = Option<f64>>) -> TravelTimeTable {
        let mut t = TravelTimeTable::empty(source, 10, 12);
        for (k, tt) in tts.enumerate() {
            t.set(k / 12 + 1, k % 12 + 1, tt.map(|tt_s| Cell { tt_s, support: 1 }));
        }
        t
    }

    proptest! {
        #[test]
        fn harmonic_never_exceeds_arithmetic(speeds in prop::collection::vec(1.0f64..120.0, 1..50)) {
            let h = space_mean_speed_harmonic(&speeds, 1.0).unwrap();
            let a = speeds.iter().sum::<f64>() / speeds.len() as f64;
            prop_assert!(h <= a * (1.0 + 1e-12));
        }

        #[test]
        fn mape_of_truth_is_zero((gr, _) in table_strategy()) {
            let gr = build(Source::Gr, gr.into_iter().map(Some));
            prop_assert_eq!(mape(&gr, &gr).unwrap().mape, Some(0.0));
        }

        #[test]
        fn mape_is_scale_consistent((gr, d) in table_strategy(), c in 0.01f64..100.0) {
            let g1 = build(Source::Gr, gr.iter().copied().map(Some));
            let d1 = build(Source::Cv, d.iter().copied());
            let g2 = build(Source::Gr, gr.iter().map(|v| Some(v * c)));
            let d2 = build(Source::Cv, d.iter().map(|v| v.map(|v| v * c)));
            let a = mape(&d1, &g1).unwrap();
            let b = mape(&d2, &g2).unwrap();
            prop_assert_eq!(a.cells_used, b.cells_used);
            match (a.mape, b.mape) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x)),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
