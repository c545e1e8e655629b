use rand::Rng;

use super::scenario::{ArrivalKind, Scenario};

/// A vehicle's scheduled arrival at the corridor entrance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub id: u32,
    pub time_s: f64,
    pub is_cv: bool,
}

/// Piecewise-constant arrival rate over the run, as `(start_s, end_s, veh/h)`.
pub fn rate_profile(scenario: &Scenario) -> Vec<(f64, f64, f64)> {
    let demand = &scenario.config().demand;
    let duration = scenario.n_intervals() as f64 * scenario.interval_s();
    match demand.pattern {
        ArrivalKind::Constant => vec![(0.0, duration, demand.rate_vph)],
        ArrivalKind::Varying => {
            let piece = 3.0 * scenario.interval_s();
            demand
                .varying_rates_vph
                .iter()
                .enumerate()
                .map(|(k, &r)| (k as f64 * piece, (k as f64 + 1.0) * piece, r))
                .collect()
        }
    }
}

/// Poisson arrivals at the scenario's interval-dependent rate. Each vehicle
/// is connected with probability `mpr`; the uniform used for that draw is
/// taken for every vehicle, so schedules for different penetration rates
/// share arrival times.
pub fn spawn_arrivals<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<Arrival> {
    let mpr = scenario.config().cv.mpr;
    let mut out = Vec::new();
    for (start, end, rate_vph) in rate_profile(scenario) {
        if rate_vph <= 0.0 {
            continue;
        }
        let rate_per_s = rate_vph / 3600.0;
        let mut t = start;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate_per_s;
            if t >= end {
                break;
            }
            let cv_draw: f64 = rng.random();
            out.push(Arrival { id: out.len() as u32, time_s: t, is_cv: cv_draw < mpr });
        }
    }
    out
}
