//! On-board storage, capture modes and roadside uploads.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

use crate::codec::{SampledBlock, SensingPattern};
use crate::rng::StreamRng;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("vehicle {vehicle_id}: capture tick {capture_tick} delivered twice")]
    DuplicateTick { vehicle_id: u32, capture_tick: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One stored reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub vehicle_id: u32,
    /// Ticks since trip start at the capture rate.
    pub capture_tick: u32,
    /// Simulation step at capture time.
    pub step: u32,
    pub time_s: f64,
    /// 1-based segment of the vehicle at capture time.
    pub segment: u8,
    pub speed_mph: f64,
}

/// FIFO buffer holding at most `capacity` snapshots; when full the
/// oldest snapshot is overwritten.
#[derive(Debug, Clone)]
pub struct ObuBuffer {
    capacity: usize,
    slots: VecDeque<Snapshot>,
    overwritten_count: usize,
}

impl ObuBuffer {
    pub fn new(capacity: usize) -> Result<Self, PipelineError> {
        if capacity == 0 {
            return Err(PipelineError::InvalidArgument("OBU capacity must be positive".into()));
        }
        Ok(Self { capacity, slots: VecDeque::with_capacity(capacity.min(4096)), overwritten_count: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn overwritten_count(&self) -> usize {
        self.overwritten_count
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.slots.iter()
    }

    fn take_all(&mut self) -> Vec<Snapshot> {
        self.slots.drain(..).collect()
    }
}

pub fn obu_insert(buffer: &mut ObuBuffer, snapshot: Snapshot) {
    if buffer.slots.len() == buffer.capacity {
        buffer.slots.pop_front();
        buffer.overwritten_count += 1;
    }
    buffer.slots.push_back(snapshot);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureMode {
    /// Store every tick.
    Fixed,
    /// Store each tick independently with probability `ratio`; the tick's
    /// position within its length-`block_len` block is its sensing index.
    Cs { ratio: f64, block_len: usize },
}

/// Decides whether a reading taken at a capture tick is stored.
pub fn capture_tick<R: Rng + ?Sized>(reading: Snapshot, mode: CaptureMode, rng: &mut R) -> Option<Snapshot> {
    match mode {
        CaptureMode::Fixed => Some(reading),
        CaptureMode::Cs { ratio, .. } => (rng.random::<f64>() < ratio).then_some(reading),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UploadEvent {
    pub rsu_position_mi: f64,
    pub time_s: f64,
    pub vehicle_id: u32,
    /// Capture ticks fired on this trip so far, stored or not.
    pub ticks_elapsed: u32,
    pub snapshots: Vec<Snapshot>,
}

/// Hands the whole buffer to the roadside unit and empties it.
pub fn rsu_pass(vehicle_id: u32, rsu_position_mi: f64, time_s: f64, ticks_elapsed: u32, buffer: &mut ObuBuffer) -> UploadEvent {
    UploadEvent { rsu_position_mi, time_s, vehicle_id, ticks_elapsed, snapshots: buffer.take_all() }
}

/// Snapshot accounting for one buffer over one trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Custody {
    pub captured: usize,
    pub uploaded: usize,
    pub evicted: usize,
    pub buffered: usize,
}

impl Custody {
    pub fn balanced(&self) -> bool {
        self.captured == self.uploaded + self.evicted + self.buffered
    }
}

/// Capture parameters shared by every CV in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub obu_capacity: usize,
    pub ratio: f64,
    pub block_len: usize,
}

/// The two OBUs carried by one CV: a fixed-rate buffer and a CS buffer
/// fed from the same capture ticks.
#[derive(Debug, Clone)]
pub struct CvUnit {
    vehicle_id: u32,
    ticks: u32,
    fixed: ObuBuffer,
    cs: ObuBuffer,
    cs_mode: CaptureMode,
    rng: StreamRng,
    captured: [usize; 2],
    uploaded: [usize; 2],
}

impl CvUnit {
    pub fn new(vehicle_id: u32, cfg: &PipelineConfig, rng: StreamRng) -> Result<Self, PipelineError> {
        if !(cfg.ratio > 0.0 && cfg.ratio <= 1.0) || cfg.block_len == 0 {
            return Err(PipelineError::InvalidArgument("ratio must lie in (0, 1] and block_len be positive".into()));
        }
        Ok(Self {
            vehicle_id,
            ticks: 0,
            fixed: ObuBuffer::new(cfg.obu_capacity)?,
            cs: ObuBuffer::new(cfg.obu_capacity)?,
            cs_mode: CaptureMode::Cs { ratio: cfg.ratio, block_len: cfg.block_len },
            rng,
            captured: [0; 2],
            uploaded: [0; 2],
        })
    }

    pub fn vehicle_id(&self) -> u32 {
        self.vehicle_id
    }

    pub fn ticks(&self) -> u32 {
        self.ticks
    }

    /// Fires the next capture tick with the vehicle's current reading.
    pub fn tick(&mut self, step: u32, time_s: f64, segment: u8, speed_mph: f64) {
        let reading = Snapshot { vehicle_id: self.vehicle_id, capture_tick: self.ticks, step, time_s, segment, speed_mph };
        self.ticks += 1;
        if let Some(s) = capture_tick(reading, CaptureMode::Fixed, &mut self.rng) {
            obu_insert(&mut self.fixed, s);
            self.captured[0] += 1;
        }
        if let Some(s) = capture_tick(reading, self.cs_mode, &mut self.rng) {
            obu_insert(&mut self.cs, s);
            self.captured[1] += 1;
        }
    }

    /// Uploads both buffers; returns (fixed, cs) events.
    pub fn upload(&mut self, rsu_position_mi: f64, time_s: f64) -> (UploadEvent, UploadEvent) {
        let fixed = rsu_pass(self.vehicle_id, rsu_position_mi, time_s, self.ticks, &mut self.fixed);
        let cs = rsu_pass(self.vehicle_id, rsu_position_mi, time_s, self.ticks, &mut self.cs);
        self.uploaded[0] += fixed.snapshots.len();
        self.uploaded[1] += cs.snapshots.len();
        (fixed, cs)
    }

    pub fn fixed_buffer(&self) -> &ObuBuffer {
        &self.fixed
    }

    pub fn cs_buffer(&self) -> &ObuBuffer {
        &self.cs
    }

    /// (fixed, cs) custody counts.
    pub fn custody(&self) -> (Custody, Custody) {
        let make = |k: usize, b: &ObuBuffer| Custody {
            captured: self.captured[k],
            uploaded: self.uploaded[k],
            evicted: b.overwritten_count(),
            buffered: b.len(),
        };
        (make(0, &self.fixed), make(1, &self.cs))
    }
}

/// Groups one vehicle's CS uploads into trip-anchored blocks: tick `t`
/// belongs to block `t / block_len` at index `t % block_len`. The last
/// block is cut at the trip's elapsed tick count. Blocks whose
/// measurements were all evicted come back with empty patterns.
pub fn assemble_cs_blocks<'a>(
    events: impl IntoIterator<Item = &'a UploadEvent>,
    block_len: usize,
) -> Result<Vec<SampledBlock>, PipelineError> {
    let events: Vec<&UploadEvent> = events.into_iter().collect();
    if block_len == 0 {
        return Err(PipelineError::InvalidArgument("block_len must be positive".into()));
    }
    let ticks = events.iter().map(|e| e.ticks_elapsed as usize).max().unwrap_or(0);
    let n_blocks = ticks.div_ceil(block_len);
    let mut per_block: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_blocks];
    for s in events.iter().flat_map(|e| e.snapshots.iter()) {
        let t = s.capture_tick as usize;
        if t >= ticks {
            return Err(PipelineError::InvalidArgument(format!("tick {t} beyond trip length {ticks}")));
        }
        per_block[t / block_len].push((t % block_len, s.speed_mph));
    }
    let vehicle_id = events.first().map_or(0, |e| e.vehicle_id);
    per_block
        .into_iter()
        .enumerate()
        .map(|(b, mut kept)| {
            let len = block_len.min(ticks - b * block_len);
            kept.sort_by_key(|&(i, _)| i);
            if let Some(w) = kept.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(PipelineError::DuplicateTick {
                    vehicle_id,
                    capture_tick: (b * block_len + w[0].0) as u32,
                });
            }
            let (indices, values): (Vec<usize>, Vec<f64>) = kept.into_iter().unzip();
            let pattern =
                SensingPattern::new(len, indices).map_err(|e| PipelineError::InvalidArgument(e.to_string()))?;
            SampledBlock::new(pattern, values, b).map_err(|e| PipelineError::InvalidArgument(e.to_string()))
        })
        .collect()
}
