//! Travel-time tables from every data source for one simulated run.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{recover_stream, BlockStatus, SolverConfig};
use crate::estimation::{
    mape_in, table_from_detectors, table_from_probes, EstimationError, MapeSummary, MapeWindow, ProbeGrid, Source,
    SpotSpeed, TravelTimeTable, DEFAULT_V_FLOOR_MPH,
};
use crate::pipeline::{assemble_cs_blocks, PipelineError, UploadEvent};
use crate::sim::{Scenario, SimLog};

#[derive(Debug, Error, PartialEq)]
pub enum StudyError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("vehicle {0} uploaded data but never entered")]
    UnknownVehicle(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub v_floor_mph: f64,
    /// Divide probe sums by every step of the interval, empty or not.
    pub strict_probe: bool,
    pub window: MapeWindow,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { v_floor_mph: DEFAULT_V_FLOOR_MPH, strict_probe: false, window: MapeWindow::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockCounts {
    pub recovered: usize,
    pub degraded: usize,
    pub unrecoverable: usize,
}

impl BlockCounts {
    pub fn total(&self) -> usize {
        self.recovered + self.degraded + self.unrecoverable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub gr: TravelTimeTable,
    pub lp: TravelTimeTable,
    pub cv: TravelTimeTable,
    pub cs: TravelTimeTable,
    pub mape_lp: MapeSummary,
    pub mape_cv: MapeSummary,
    pub mape_cs: MapeSummary,
    pub cs_blocks: BlockCounts,
}

impl Evaluation {
    pub fn table(&self, source: Source) -> &TravelTimeTable {
        match source {
            Source::Gr => &self.gr,
            Source::Lp => &self.lp,
            Source::Cv => &self.cv,
            Source::Cs => &self.cs,
        }
    }
}

fn capture_grid(scenario: &Scenario) -> ProbeGrid {
    ProbeGrid::new(scenario.n_segments(), scenario.n_intervals(), scenario.steps_per_interval() / scenario.steps_per_tick())
}

/// Probe grid from uploaded fixed-rate snapshots, on the capture-rate grid.
pub fn cv_probe_grid(scenario: &Scenario, uploads: &[UploadEvent]) -> ProbeGrid {
    let spt = scenario.steps_per_tick();
    let mut grid = capture_grid(scenario);
    for s in uploads.iter().flat_map(|e| &e.snapshots) {
        grid.add(s.segment as usize, s.step as usize / spt, s.speed_mph);
    }
    grid
}

// Index of the stored tick nearest to `t`; ties go to the earlier one.
fn nearest(stored: &[u32], t: u32) -> usize {
    let k = stored.partition_point(|&s| s < t);
    if k == stored.len() {
        return k - 1;
    }
    if k == 0 || stored[k] - t < t - stored[k - 1] {
        k
    } else {
        k - 1
    }
}

type TickSample = (usize, usize, f64);

/// Tick ranges a vehicle's buffer is known to have overwritten. An upload
/// that arrives full lost everything between the previous upload and its
/// oldest surviving snapshot.
fn evicted_spans(events: &[&UploadEvent], capacity: usize) -> Vec<Range<u32>> {
    let mut order: Vec<&UploadEvent> = events.to_vec();
    order.sort_by_key(|e| e.ticks_elapsed);
    let mut spans = Vec::new();
    let mut since = 0;
    for e in order {
        if e.snapshots.len() >= capacity {
            if let Some(oldest) = e.snapshots.iter().map(|s| s.capture_tick).min() {
                spans.push(since..oldest);
            }
        }
        since = e.ticks_elapsed;
    }
    spans
}

fn recover_vehicle(
    scenario: &Scenario,
    entry_step: usize,
    events: &[&UploadEvent],
    solver: &SolverConfig,
) -> Result<(Vec<TickSample>, BlockCounts), StudyError> {
    let blocks = assemble_cs_blocks(events.iter().copied(), scenario.config().cv.block_len)?;
    let rec = recover_stream(&blocks, solver);
    let mut counts = BlockCounts::default();
    for s in &rec.statuses {
        match s {
            BlockStatus::Recovered { .. } => counts.recovered += 1,
            BlockStatus::Degraded { .. } => counts.degraded += 1,
            BlockStatus::Unrecoverable { .. } => counts.unrecoverable += 1,
        }
    }
    let mut stored: Vec<(u32, u8)> =
        events.iter().flat_map(|e| e.snapshots.iter().map(|s| (s.capture_tick, s.segment))).collect();
    stored.sort_unstable();
    if stored.is_empty() {
        return Ok((Vec::new(), counts));
    }
    let ticks: Vec<u32> = stored.iter().map(|s| s.0).collect();
    let evicted = evicted_spans(events, scenario.config().cv.obu_capacity);
    let spt = scenario.steps_per_tick();
    let n = scenario.config().cv.block_len;
    let samples = rec
        .samples
        .iter()
        .enumerate()
        .filter_map(|(t, v)| {
            let v = (*v)?;
            // no measurement backs a tick the buffer overwrote
            if evicted.iter().any(|r| r.contains(&(t as u32))) {
                return None;
            }
            let b = (t / n * n) as u32;
            let lo = ticks.partition_point(|&s| s < b);
            let hi = ticks.partition_point(|&s| s < b + n as u32);
            if lo == hi {
                return None;
            }
            let segment = stored[lo + nearest(&ticks[lo..hi], t as u32)].1 as usize;
            let step = entry_step + t * spt;
            Some((segment, step / spt, v.max(0.0)))
        })
        .collect();
    Ok((samples, counts))
}

/// Probe grid from CS-recovered per-tick speeds. Each recovered tick takes
/// the segment of the nearest stored snapshot in its block. Ticks inside a
/// stretch the buffer overwrote are left out.
pub fn cs_probe_grid(scenario: &Scenario, log: &SimLog, solver: &SolverConfig) -> Result<(ProbeGrid, BlockCounts), StudyError> {
    let mut by_vehicle: BTreeMap<u32, Vec<&UploadEvent>> = BTreeMap::new();
    for e in &log.cs_uploads {
        by_vehicle.entry(e.vehicle_id).or_default().push(e);
    }
    let work: Vec<(usize, Vec<&UploadEvent>)> = by_vehicle
        .into_iter()
        .map(|(id, ev)| {
            let entry = log.vehicles.get(id as usize).and_then(|v| v.entry_step).ok_or(StudyError::UnknownVehicle(id))?;
            Ok((entry as usize, ev))
        })
        .collect::<Result<_, StudyError>>()?;
    let parts: Vec<(Vec<TickSample>, BlockCounts)> = work
        .par_iter()
        .map(|(entry, ev)| recover_vehicle(scenario, *entry, ev, solver))
        .collect::<Result<_, _>>()?;
    let mut grid = capture_grid(scenario);
    let mut counts = BlockCounts::default();
    for (samples, c) in parts {
        counts.recovered += c.recovered;
        counts.degraded += c.degraded;
        counts.unrecoverable += c.unrecoverable;
        for (segment, slot, v) in samples {
            grid.add(segment, slot, v);
        }
    }
    Ok((grid, counts))
}

pub fn detector_table(scenario: &Scenario, log: &SimLog, v_floor: f64) -> TravelTimeTable {
    let records = log.detectors.iter().map(|d| SpotSpeed {
        segment: d.segment as usize,
        interval: scenario.interval_of_time(d.time_s),
        speed_mph: d.spot_speed_mph,
    });
    table_from_detectors(records, scenario.n_segments(), scenario.n_intervals(), scenario.segment_len_mi(), v_floor)
}

/// Builds all four tables and scores LP, CV and CS against GR.
pub fn evaluate(scenario: &Scenario, log: &SimLog, opts: &EvalOptions) -> Result<Evaluation, StudyError> {
    let (n, len) = (scenario.n_segments(), scenario.segment_len_mi());
    let gr = table_from_probes(Source::Gr, &log.ground_truth, n, len, opts.strict_probe);
    let lp = detector_table(scenario, log, opts.v_floor_mph);
    let cv = table_from_probes(Source::Cv, &cv_probe_grid(scenario, &log.cv_uploads), n, len, opts.strict_probe);
    let (cs_grid, cs_blocks) = cs_probe_grid(scenario, log, &scenario.config().solver)?;
    let cs = table_from_probes(Source::Cs, &cs_grid, n, len, opts.strict_probe);
    Ok(Evaluation {
        mape_lp: mape_in(&lp, &gr, opts.window)?,
        mape_cv: mape_in(&cv, &gr, opts.window)?,
        mape_cs: mape_in(&cs, &gr, opts.window)?,
        gr,
        lp,
        cv,
        cs,
        cs_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_breaks_ties_early() {
        let s = [2, 6, 10];
        assert_eq!(nearest(&s, 0), 0);
        assert_eq!(nearest(&s, 4), 0);
        assert_eq!(nearest(&s, 5), 1);
        assert_eq!(nearest(&s, 8), 1);
        assert_eq!(nearest(&s, 9), 2);
        assert_eq!(nearest(&s, 40), 2);
    }

    #[test]
    fn full_uploads_mark_overwritten_ticks() {
        let snap = |tick: u32| crate::pipeline::Snapshot { vehicle_id: 1, capture_tick: tick, step: tick, time_s: 0.0, segment: 1, speed_mph: 30.0 };
        let up = |elapsed: u32, ticks: &[u32]| UploadEvent {
            rsu_position_mi: 0.5,
            time_s: 0.0,
            vehicle_id: 1,
            ticks_elapsed: elapsed,
            snapshots: ticks.iter().map(|&t| snap(t)).collect(),
        };
        // capacity 3: the second upload arrived full, the first did not
        let a = up(10, &[2, 7]);
        let b = up(30, &[25, 27, 29]);
        let c = up(40, &[33, 38]);
        assert_eq!(evicted_spans(&[&c, &a, &b], 3), vec![10..25]);
        assert!(evicted_spans(&[&a, &c], 3).is_empty());
    }
}
