use std::io::{self, Write};

use crate::estimation::ProbeGrid;
use crate::pipeline::{Custody, UploadEvent};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: u32,
    pub vehicle_id: u32,
    pub lane: u8,
    pub segment: u8,
    pub position_mi: f32,
    pub speed_mph: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRecord {
    /// Segment whose downstream end holds the detector.
    pub segment: u8,
    pub time_s: f64,
    pub vehicle_id: u32,
    pub spot_speed_mph: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSummary {
    pub id: u32,
    pub is_cv: bool,
    pub arrival_s: f64,
    pub entry_step: Option<u32>,
    pub exit_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvRecord {
    pub vehicle_id: u32,
    pub ticks: u32,
    pub fixed: Custody,
    pub cs: Custody,
}

/// Everything recorded during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    /// Empty unless trajectories were requested.
    pub trajectories: Vec<TrajectoryPoint>,
    pub detectors: Vec<DetectorRecord>,
    pub cv_uploads: Vec<UploadEvent>,
    pub cs_uploads: Vec<UploadEvent>,
    /// Speeds of every active vehicle at every step.
    pub ground_truth: ProbeGrid,
    /// Indexed by vehicle id.
    pub vehicles: Vec<VehicleSummary>,
    pub cv_units: Vec<CvRecord>,
    pub active_per_step: Vec<u32>,
    /// Vehicle-steps on the inner lane inside the closed stretch while closed.
    pub closure_violations: usize,
    /// Largest distance a vehicle covered in one step, metres.
    pub max_step_advance_m: f64,
}

impl SimLog {
    pub fn entered(&self) -> usize {
        self.vehicles.iter().filter(|v| v.entry_step.is_some()).count()
    }

    pub fn exited(&self) -> usize {
        self.vehicles.iter().filter(|v| v.exit_s.is_some()).count()
    }
}

pub const TRAJECTORIES_CSV_HEADER: &str = "step,time_s,vehicle_id,lane,position_mi,segment,speed_mph";
pub const DETECTORS_CSV_HEADER: &str = "segment,time_s,vehicle_id,speed_mph";
pub const UPLOADS_CSV_HEADER: &str = "time_s,rsu_mi,vehicle_id,capture_tick,segment,speed";

pub fn write_trajectories_csv<W: Write>(w: &mut W, log: &SimLog, stride: usize) -> io::Result<()> {
    writeln!(w, "{TRAJECTORIES_CSV_HEADER}")?;
    let stride = stride.max(1) as u32;
    for p in log.trajectories.iter().filter(|p| p.step % stride == 0) {
        writeln!(
            w,
            "{},{:.1},{},{},{:.6},{},{:.4}",
            p.step,
            p.step as f64 * super::STEP_S,
            p.vehicle_id,
            p.lane,
            p.position_mi,
            p.segment,
            p.speed_mph
        )?;
    }
    Ok(())
}

pub fn write_detectors_csv<W: Write>(w: &mut W, log: &SimLog) -> io::Result<()> {
    writeln!(w, "{DETECTORS_CSV_HEADER}")?;
    for r in &log.detectors {
        writeln!(w, "{},{:.4},{},{:.6}", r.segment, r.time_s, r.vehicle_id, r.spot_speed_mph)?;
    }
    Ok(())
}

pub fn write_uploads_csv<W: Write>(w: &mut W, events: &[UploadEvent]) -> io::Result<()> {
    writeln!(w, "{UPLOADS_CSV_HEADER}")?;
    for e in events {
        for s in &e.snapshots {
            writeln!(
                w,
                "{:.4},{:.6},{},{},{},{:.6}",
                e.time_s, e.rsu_position_mi, e.vehicle_id, s.capture_tick, s.segment, s.speed_mph
            )?;
        }
    }
    Ok(())
}
