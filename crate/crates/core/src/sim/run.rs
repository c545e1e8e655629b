use super::log::{CvRecord, DetectorRecord, SimLog, TrajectoryPoint, VehicleSummary};
use super::scenario::{Scenario, STEP_S};
use super::world::{World, INNER_LANE};
use super::{spawn_arrivals, SimError};
use crate::estimation::ProbeGrid;
use crate::pipeline::{CvUnit, PipelineConfig};
use crate::rng;
use crate::units::{miles_to_meters, mps_to_mph};

const ARRIVAL_STREAM: u64 = 0;
const CAPTURE_SEED_INDEX: u64 = 1;

/// Runs a scenario to completion. Deterministic in the scenario seed.
pub fn run(scenario: &Scenario) -> Result<SimLog, SimError> {
    let config = scenario.config();
    let arrivals = spawn_arrivals(scenario, &mut rng::stream(scenario.seed(), ARRIVAL_STREAM));
    let mut vehicles: Vec<VehicleSummary> = arrivals
        .iter()
        .map(|a| VehicleSummary { id: a.id, is_cv: a.is_cv, arrival_s: a.time_s, entry_step: None, exit_s: None })
        .collect();
    let mut world = World::new(scenario, arrivals);

    let pipeline = PipelineConfig {
        obu_capacity: config.cv.obu_capacity,
        ratio: config.cv.compression_ratio,
        block_len: config.cv.block_len,
    };
    let capture_seed = rng::derive_seed(scenario.seed(), CAPTURE_SEED_INDEX);
    let mut units: Vec<Option<CvUnit>> = vec![None; vehicles.len()];

    let n_steps = scenario.n_steps();
    let spt = scenario.steps_per_tick();
    let stations = scenario.station_positions_mi();
    let closure = scenario.closure_span_mi().zip(scenario.closure_window_s());

    let mut log = SimLog {
        trajectories: Vec::new(),
        detectors: Vec::new(),
        cv_uploads: Vec::new(),
        cs_uploads: Vec::new(),
        ground_truth: ProbeGrid::new(scenario.n_segments(), scenario.n_intervals(), scenario.steps_per_interval()),
        vehicles: Vec::new(),
        cv_units: Vec::new(),
        active_per_step: Vec::with_capacity(n_steps),
        closure_violations: 0,
        max_step_advance_m: 0.0,
    };
    let mut last_pos = vec![0.0f64; vehicles.len()];

    for step in 0..n_steps {
        for id in world.admit() {
            let v = &mut vehicles[id as usize];
            v.entry_step = Some(step as u32);
            if v.is_cv {
                let unit = CvUnit::new(id, &pipeline, rng::stream(capture_seed, id as u64))
                    .map_err(|e| SimError::Integrity(e.to_string()))?;
                units[id as usize] = Some(unit);
            }
        }

        let t = world.time_s();
        let closed = closure.is_some_and(|(_, (t0, t1))| t >= t0 && t < t1);
        for v in world.vehicles() {
            let pos_mi = v.position_mi();
            let segment = scenario.segment_of(pos_mi);
            let speed = v.speed_mph();
            log.ground_truth.add(segment, step, speed);
            if config.output.record_trajectories {
                log.trajectories.push(TrajectoryPoint {
                    step: step as u32,
                    vehicle_id: v.id,
                    lane: v.lane,
                    segment: segment as u8,
                    position_mi: pos_mi as f32,
                    speed_mph: speed as f32,
                });
            }
            if closed && v.lane == INNER_LANE {
                let ((a, b), _) = closure.unwrap();
                if pos_mi >= a && pos_mi < b {
                    log.closure_violations += 1;
                }
            }
            if (step - v.entry_step) % spt == 0 {
                if let Some(unit) = units[v.id as usize].as_mut() {
                    unit.tick(step as u32, t, segment as u8, speed);
                }
            }
        }

        let events = world.step()?;

        for v in world.vehicles() {
            let k = v.id as usize;
            let adv = v.position_m - last_pos[k];
            log.max_step_advance_m = log.max_step_advance_m.max(adv);
            last_pos[k] = v.position_m;
        }
        for c in &events.crossings {
            log.detectors.push(DetectorRecord {
                segment: c.station as u8,
                time_s: c.time_s,
                vehicle_id: c.vehicle_id,
                spot_speed_mph: mps_to_mph(c.speed_mps),
            });
            if let Some(unit) = units[c.vehicle_id as usize].as_mut() {
                let (fixed, cs) = unit.upload(stations[c.station - 1], c.time_s);
                log.cv_uploads.push(fixed);
                log.cs_uploads.push(cs);
            }
        }
        for e in &events.exits {
            let k = e.vehicle_id as usize;
            vehicles[k].exit_s = Some(e.time_s);
            let adv = miles_to_meters(stations[stations.len() - 1]) - last_pos[k];
            log.max_step_advance_m = log.max_step_advance_m.max(adv);
        }
        let active = world.vehicles().len();
        if world.entered() - world.exited() != active {
            return Err(SimError::Integrity(format!("step {step}: vehicle count out of balance")));
        }
        log.active_per_step.push(active as u32);
    }

    if config.output.drain_at_end {
        let t = n_steps as f64 * STEP_S;
        for v in world.vehicles() {
            if let Some(unit) = units[v.id as usize].as_mut() {
                let (fixed, cs) = unit.upload(v.position_mi(), t);
                log.cv_uploads.push(fixed);
                log.cs_uploads.push(cs);
            }
        }
    }

    log.cv_units = units
        .iter()
        .flatten()
        .map(|u| {
            let (fixed, cs) = u.custody();
            CvRecord { vehicle_id: u.vehicle_id(), ticks: u.ticks(), fixed, cs }
        })
        .collect();
    log.vehicles = vehicles;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_scenario, ScenarioConfig};

    fn quick(closure: bool, seed: u64) -> Scenario {
        let mut c = ScenarioConfig { seed, ..ScenarioConfig::default() };
        c.closure.enabled = closure;
        c.output.record_trajectories = false;
        build_scenario(c).unwrap()
    }

    #[test]
    fn run_is_deterministic_and_conserves_vehicles() {
        let s = quick(true, 3);
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.active_per_step.len(), 36_000);
        assert_eq!(a.closure_violations, 0);
        assert!(a.max_step_advance_m <= 29.0 * 0.1 + 1e-9, "{}", a.max_step_advance_m);

        let mut counts = vec![0usize; a.vehicles.len()];
        for d in &a.detectors {
            counts[d.vehicle_id as usize] += 1;
        }
        for v in &a.vehicles {
            if v.exit_s.is_some() {
                assert_eq!(counts[v.id as usize], 10);
            }
        }
        for u in &a.cv_units {
            assert!(u.fixed.balanced() && u.cs.balanced());
        }
    }
}
