use serde::{Deserialize, Serialize};

use super::SimError;
use crate::codec::SolverConfig;

pub const STEP_S: f64 = 0.1;
pub const CORRIDOR_MI: f64 = 5.0;
pub const NOMINAL_DEMAND_VEH: f64 = 2400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalKind {
    Constant,
    Varying,
}

impl ArrivalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArrivalKind::Constant => "constant",
            ArrivalKind::Varying => "varying",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorConfig {
    pub n_segments: usize,
    pub segment_len_mi: f64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self { n_segments: 10, segment_len_mi: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    pub pattern: ArrivalKind,
    pub rate_vph: f64,
    /// One rate per group of three intervals.
    pub varying_rates_vph: Vec<f64>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            pattern: ArrivalKind::Constant,
            rate_vph: 2400.0,
            varying_rates_vph: vec![1200.0, 2400.0, 4800.0, 1200.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub sim_duration_s: f64,
    pub interval_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { sim_duration_s: 3600.0, interval_s: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub mpr: f64,
    pub obu_capacity: usize,
    pub capture_rate_hz: u32,
    pub compression_ratio: f64,
    pub block_len: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { mpr: 0.6, obu_capacity: 300, capture_rate_hz: 1, compression_ratio: 0.2, block_len: 200 }
    }
}

/// Inner-lane closure over a range of segments and intervals (1-based,
/// inclusive). Inner-lane traffic is held out of the closed stretch from
/// `lead_time_s` before the first closed interval, so the stretch is empty
/// once the closure takes effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureConfig {
    pub enabled: bool,
    pub first_segment: usize,
    pub last_segment: usize,
    pub first_interval: usize,
    pub last_interval: usize,
    pub lead_time_s: f64,
    /// Distance upstream of the closure where inner-lane vehicles must merge.
    pub merge_zone_mi: f64,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            first_segment: 5,
            last_segment: 6,
            first_interval: 7,
            last_interval: 9,
            lead_time_s: 120.0,
            merge_zone_mi: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub record_trajectories: bool,
    /// Upload everything still buffered on board when the run ends.
    pub drain_at_end: bool,
    /// Write every k-th trajectory step to CSV.
    pub trajectory_csv_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { record_trajectories: true, drain_at_end: false, trajectory_csv_stride: 1 }
    }
}

/// Declarative scenario description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub corridor: CorridorConfig,
    pub demand: DemandConfig,
    pub timing: TimingConfig,
    pub cv: CvConfig,
    pub closure: ClosureConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            corridor: CorridorConfig::default(),
            demand: DemandConfig::default(),
            timing: TimingConfig::default(),
            cv: CvConfig::default(),
            closure: ClosureConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config { field: "toml".into(), msg: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: ScenarioConfig,
    n_intervals: usize,
    steps_per_interval: usize,
    steps_per_tick: usize,
}

fn config_err(field: &str, msg: impl Into<String>) -> SimError {
    SimError::Config { field: field.into(), msg: msg.into() }
}

/// Validates a configuration.
pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario, SimError> {
    let c = &config;
    if c.corridor.n_segments == 0 {
        return Err(config_err("corridor.n_segments", "must be positive"));
    }
    if !(c.corridor.segment_len_mi > 0.0) {
        return Err(config_err("corridor.segment_len_mi", "must be positive"));
    }
    let length = c.corridor.n_segments as f64 * c.corridor.segment_len_mi;
    if (length - CORRIDOR_MI).abs() > 1e-9 {
        return Err(config_err(
            "corridor.segment_len_mi",
            format!("corridor is {length} mi; segments must cover {CORRIDOR_MI} mi"),
        ));
    }
    let steps_per_interval = (c.timing.interval_s / STEP_S).round() as usize;
    if !(c.timing.interval_s > 0.0) || (steps_per_interval as f64 * STEP_S - c.timing.interval_s).abs() > 1e-9 {
        return Err(config_err("timing.interval_s", "must be a positive multiple of the 0.1 s step"));
    }
    let n_intervals = (c.timing.sim_duration_s / c.timing.interval_s).round() as usize;
    if n_intervals != 12 || (n_intervals as f64 * c.timing.interval_s - c.timing.sim_duration_s).abs() > 1e-9 {
        return Err(config_err("timing.sim_duration_s", "must span exactly 12 intervals"));
    }
    if !(0.0..=1.0).contains(&c.cv.mpr) {
        return Err(config_err("cv.mpr", "must lie in [0, 1]"));
    }
    if c.cv.obu_capacity == 0 {
        return Err(config_err("cv.obu_capacity", "must be positive"));
    }
    if c.cv.capture_rate_hz != 1 && c.cv.capture_rate_hz != 10 {
        return Err(config_err("cv.capture_rate_hz", "must be 1 or 10"));
    }
    if !(c.cv.compression_ratio > 0.0 && c.cv.compression_ratio <= 1.0) {
        return Err(config_err("cv.compression_ratio", "must lie in (0, 1]"));
    }
    if c.cv.block_len == 0 {
        return Err(config_err("cv.block_len", "must be positive"));
    }
    let hours = c.timing.sim_duration_s / 3600.0;
    let expected = match c.demand.pattern {
        ArrivalKind::Constant => {
            if !(c.demand.rate_vph > 0.0) {
                return Err(config_err("demand.rate_vph", "must be positive"));
            }
            c.demand.rate_vph * hours
        }
        ArrivalKind::Varying => {
            let rates = &c.demand.varying_rates_vph;
            if rates.len() != n_intervals / 3 || rates.iter().any(|r| !(*r >= 0.0)) {
                return Err(config_err(
                    "demand.varying_rates_vph",
                    "needs one non-negative rate per three intervals",
                ));
            }
            rates.iter().sum::<f64>() / rates.len() as f64 * hours
        }
    };
    if (expected - NOMINAL_DEMAND_VEH).abs() > 0.01 * NOMINAL_DEMAND_VEH {
        let field = match c.demand.pattern {
            ArrivalKind::Constant => "demand.rate_vph",
            ArrivalKind::Varying => "demand.varying_rates_vph",
        };
        return Err(config_err(field, format!("expected demand {expected} differs from 2400 vehicles")));
    }
    if c.closure.enabled {
        let cl = &c.closure;
        if cl.first_segment == 0 || cl.first_segment > cl.last_segment || cl.last_segment > c.corridor.n_segments {
            return Err(config_err("closure.first_segment", "closure segments out of range"));
        }
        if cl.first_interval == 0 || cl.first_interval > cl.last_interval || cl.last_interval > n_intervals {
            return Err(config_err("closure.first_interval", "closure intervals out of range"));
        }
        if !(cl.lead_time_s >= 0.0) || !(cl.merge_zone_mi >= 0.0) {
            return Err(config_err("closure.lead_time_s", "lead time and merge zone must be non-negative"));
        }
    }
    if c.output.trajectory_csv_stride == 0 {
        return Err(config_err("output.trajectory_csv_stride", "must be positive"));
    }
    c.solver.validate().map_err(|e| config_err("solver", e.to_string()))?;
    let steps_per_tick = (10 / c.cv.capture_rate_hz) as usize;
    Ok(Scenario { config, n_intervals, steps_per_interval, steps_per_tick })
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn n_segments(&self) -> usize {
        self.config.corridor.n_segments
    }

    pub fn segment_len_mi(&self) -> f64 {
        self.config.corridor.segment_len_mi
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn interval_s(&self) -> f64 {
        self.config.timing.interval_s
    }

    pub fn steps_per_interval(&self) -> usize {
        self.steps_per_interval
    }

    pub fn n_steps(&self) -> usize {
        self.n_intervals * self.steps_per_interval
    }

    /// Simulation steps between two capture ticks of one vehicle.
    pub fn steps_per_tick(&self) -> usize {
        self.steps_per_tick
    }

    /// Detector and roadside-unit positions: the downstream end of every segment.
    pub fn station_positions_mi(&self) -> Vec<f64> {
        (1..=self.n_segments()).map(|s| s as f64 * self.segment_len_mi()).collect()
    }

    /// 1-based segment containing `position_mi`; positions at or past the
    /// corridor end map to the last segment.
    pub fn segment_of(&self, position_mi: f64) -> usize {
        let s = (position_mi / self.segment_len_mi()).floor();
        if s < 0.0 {
            1
        } else {
            (s as usize + 1).min(self.n_segments())
        }
    }

    /// 1-based interval of simulation step `step`.
    pub fn interval_of_step(&self, step: usize) -> usize {
        (step / self.steps_per_interval + 1).min(self.n_intervals)
    }

    /// 1-based interval containing time `t_s`.
    pub fn interval_of_time(&self, t_s: f64) -> usize {
        let j = (t_s / self.interval_s()).floor();
        if j < 0.0 {
            1
        } else {
            (j as usize + 1).min(self.n_intervals)
        }
    }

    /// Closed stretch `[start, end)` in miles, if a closure is configured.
    pub fn closure_span_mi(&self) -> Option<(f64, f64)> {
        let cl = &self.config.closure;
        cl.enabled.then(|| {
            ((cl.first_segment - 1) as f64 * self.segment_len_mi(), cl.last_segment as f64 * self.segment_len_mi())
        })
    }

    /// Time window `[start, end)` during which the closure is in effect.
    pub fn closure_window_s(&self) -> Option<(f64, f64)> {
        let cl = &self.config.closure;
        cl.enabled
            .then(|| ((cl.first_interval - 1) as f64 * self.interval_s(), cl.last_interval as f64 * self.interval_s()))
    }
}
