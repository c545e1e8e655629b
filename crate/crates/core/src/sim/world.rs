use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::arrivals::Arrival;
use super::idm::IdmParams;
use super::scenario::{Scenario, STEP_S};
use super::SimError;
use crate::units::{meters_to_miles, miles_to_meters, mps_to_mph};

pub const OUTER_LANE: u8 = 0;
pub const INNER_LANE: u8 = 1;

/// Deceleration a driver can still apply to stop before a newly closed lane.
const EMERGENCY_DECEL: f64 = 9.0;

/// Gap-acceptance lane changing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneChangeParams {
    /// Acceleration gain (m/s²) required for a discretionary change.
    pub incentive: f64,
    /// Minimum time between two changes of one vehicle.
    pub cooldown_s: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self { incentive: 0.3, cooldown_s: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: u32,
    pub lane: u8,
    /// Front bumper, metres from the entrance.
    pub position_m: f64,
    pub speed_mps: f64,
    pub is_cv: bool,
    pub entered_at_s: f64,
    pub entry_step: usize,
    last_change_s: f64,
    closure_bound: bool,
}

impl VehicleState {
    pub fn position_mi(&self) -> f64 {
        meters_to_miles(self.position_m)
    }

    pub fn speed_mph(&self) -> f64 {
        mps_to_mph(self.speed_mps)
    }
}

/// A vehicle passing a station (detector and roadside unit) during a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub vehicle_id: u32,
    pub is_cv: bool,
    /// 1-based station index; station `s` sits at the end of segment `s`.
    pub station: usize,
    pub time_s: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub vehicle_id: u32,
    pub time_s: f64,
}

#[derive(Debug, Default, Clone)]
pub struct StepEvents {
    pub crossings: Vec<Crossing>,
    pub exits: Vec<Exit>,
}

#[derive(Debug, Clone, Copy)]
struct ClosureGeometry {
    start_m: f64,
    end_m: f64,
    merge_from_m: f64,
    guard_from_s: f64,
    until_s: f64,
}

/// Mutable state of one simulation run.
#[derive(Debug, Clone)]
pub struct World {
    idm: IdmParams,
    lane_change: LaneChangeParams,
    step: usize,
    corridor_m: f64,
    stations_m: Vec<f64>,
    closure: Option<ClosureGeometry>,
    vehicles: Vec<VehicleState>,
    pending: VecDeque<Arrival>,
    entered: usize,
    exited: usize,
}

impl World {
    pub fn new(scenario: &Scenario, arrivals: Vec<Arrival>) -> Self {
        Self::with_params(scenario, arrivals, IdmParams::default(), LaneChangeParams::default())
    }

    pub fn with_params(
        scenario: &Scenario,
        mut arrivals: Vec<Arrival>,
        idm: IdmParams,
        lane_change: LaneChangeParams,
    ) -> Self {
        arrivals.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.id.cmp(&b.id)));
        let closure = scenario.closure_span_mi().zip(scenario.closure_window_s()).map(|((a, b), (t0, t1))| {
            let cl = &scenario.config().closure;
            ClosureGeometry {
                start_m: miles_to_meters(a),
                end_m: miles_to_meters(b),
                merge_from_m: miles_to_meters(a - cl.merge_zone_mi),
                guard_from_s: t0 - cl.lead_time_s,
                until_s: t1,
            }
        });
        Self {
            idm,
            lane_change,
            step: 0,
            corridor_m: miles_to_meters(scenario.n_segments() as f64 * scenario.segment_len_mi()),
            stations_m: scenario.station_positions_mi().into_iter().map(miles_to_meters).collect(),
            closure,
            vehicles: Vec::new(),
            pending: arrivals.into(),
            entered: 0,
            exited: 0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time_s(&self) -> f64 {
        self.step as f64 * STEP_S
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn idm(&self) -> &IdmParams {
        &self.idm
    }

    pub fn entered(&self) -> usize {
        self.entered
    }

    pub fn exited(&self) -> usize {
        self.exited
    }

    pub fn waiting(&self) -> usize {
        self.pending.len()
    }

    /// Inserts a vehicle directly, bypassing the arrival queue.
    pub fn place(&mut self, id: u32, lane: u8, position_m: f64, speed_mps: f64, is_cv: bool) {
        self.vehicles.push(VehicleState {
            id,
            lane,
            position_m,
            speed_mps,
            is_cv,
            entered_at_s: self.time_s(),
            entry_step: self.step,
            last_change_s: f64::NEG_INFINITY,
            closure_bound: false,
        });
        self.entered += 1;
    }

    fn guard_active(&self, t: f64) -> Option<ClosureGeometry> {
        self.closure.filter(|c| t >= c.guard_from_s && t < c.until_s)
    }

    fn entry_gap(&self, lane: u8) -> f64 {
        self.vehicles
            .iter()
            .filter(|v| v.lane == lane)
            .map(|v| v.position_m - self.idm.vehicle_len)
            .fold(f64::INFINITY, f64::min)
    }

    /// Moves due arrivals onto the corridor at speed zero, each into the
    /// lane with the larger entry gap. Arrivals that find no room wait.
    /// Returns the ids admitted.
    pub fn admit(&mut self) -> Vec<u32> {
        let now = self.time_s() + 1e-9;
        let mut admitted = Vec::new();
        while let Some(next) = self.pending.front().copied() {
            if next.time_s > now {
                break;
            }
            let (g0, g1) = (self.entry_gap(OUTER_LANE), self.entry_gap(INNER_LANE));
            let (lane, gap) = if g1 > g0 { (INNER_LANE, g1) } else { (OUTER_LANE, g0) };
            if gap < self.idm.min_gap {
                break;
            }
            self.pending.pop_front();
            self.place(next.id, lane, 0.0, 0.0, next.is_cv);
            admitted.push(next.id);
        }
        admitted
    }

    /// Indices of vehicles in `lane`, front first.
    fn lane_order(&self, lane: u8) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vehicles.len()).filter(|&i| self.vehicles[i].lane == lane).collect();
        idx.sort_by(|&a, &b| {
            let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
            vb.position_m.total_cmp(&va.position_m).then(va.id.cmp(&vb.id))
        });
        idx
    }

    // (leader, follower) around position `p` in a front-first lane order,
    // skipping `skip`.
    fn neighbours(&self, order: &[usize], p: f64, skip: usize) -> (Option<usize>, Option<usize>) {
        let split = order.partition_point(|&i| self.vehicles[i].position_m >= p);
        let leader = order[..split].iter().rev().copied().find(|&i| i != skip);
        let follower = order[split..].iter().copied().find(|&i| i != skip);
        (leader, follower)
    }

    fn gap_between(&self, leader: usize, follower_pos: f64) -> f64 {
        self.vehicles[leader].position_m - self.idm.vehicle_len - follower_pos
    }

    fn accel_behind(&self, speed: f64, pos: f64, leader: Option<usize>) -> f64 {
        self.idm.accel(speed, leader.map(|l| (self.gap_between(l, pos), self.vehicles[l].speed_mps)))
    }

    fn obstacle_accel(&self, v: &VehicleState, guard: Option<ClosureGeometry>) -> Option<f64> {
        let g = guard?;
        (v.lane == INNER_LANE && v.closure_bound).then(|| self.idm.accel(v.speed_mps, Some((g.start_m - v.position_m, 0.0))))
    }

    fn update_closure_binding(&mut self, guard: Option<ClosureGeometry>) {
        for v in &mut self.vehicles {
            v.closure_bound = match guard {
                Some(g) if v.lane == INNER_LANE && v.position_m < g.start_m => {
                    v.closure_bound || g.start_m - v.position_m >= v.speed_mps * v.speed_mps / (2.0 * EMERGENCY_DECEL)
                }
                _ => false,
            };
        }
    }

    fn change_lanes(&mut self, t: f64, guard: Option<ClosureGeometry>, orders: &mut [Vec<usize>; 2]) {
        let mut all: Vec<usize> = (0..self.vehicles.len()).collect();
        all.sort_by(|&a, &b| {
            let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
            vb.position_m.total_cmp(&va.position_m).then(va.id.cmp(&vb.id))
        });
        for i in all {
            let v = self.vehicles[i].clone();
            if t - v.last_change_s < self.lane_change.cooldown_s {
                continue;
            }
            let target = 1 - v.lane;
            let p = v.position_m;
            if let Some(g) = guard {
                if target == INNER_LANE && p >= g.merge_from_m && p < g.end_m {
                    continue;
                }
            }
            let mandatory = guard.is_some_and(|g| v.lane == INNER_LANE && v.closure_bound && p >= g.merge_from_m);

            let (own_leader, _) = self.neighbours(&orders[v.lane as usize], p, i);
            let (leader, follower) = self.neighbours(&orders[target as usize], p, i);
            let s0 = self.idm.min_gap;
            let lead_gap = leader.map_or(f64::INFINITY, |l| self.gap_between(l, p));
            let lag_gap = follower.map_or(f64::INFINITY, |f| p - self.idm.vehicle_len - self.vehicles[f].position_m);
            if lead_gap < s0 || lag_gap < s0 {
                continue;
            }
            let lead_ok = leader.is_none_or(|l| {
                lead_gap >= self.idm.desired_gap(v.speed_mps, v.speed_mps - self.vehicles[l].speed_mps)
            });
            let lag_ok = follower.is_none_or(|f| {
                let fv = &self.vehicles[f];
                lag_gap >= self.idm.desired_gap(fv.speed_mps, fv.speed_mps - v.speed_mps)
            });
            let accept = lead_ok
                && lag_ok
                && (mandatory || {
                    let new_accel = self.accel_behind(v.speed_mps, p, leader);
                    let mut current = self.accel_behind(v.speed_mps, p, own_leader);
                    if let Some(a) = self.obstacle_accel(&v, guard) {
                        current = current.min(a);
                    }
                    new_accel > current + self.lane_change.incentive
                });
            if !accept {
                continue;
            }
            orders[v.lane as usize].retain(|&k| k != i);
            let dest = &orders[target as usize];
            let at = dest.partition_point(|&k| {
                let vk = &self.vehicles[k];
                vk.position_m > p || (vk.position_m == p && vk.id < v.id)
            });
            orders[target as usize].insert(at, i);
            let veh = &mut self.vehicles[i];
            veh.lane = target;
            veh.last_change_s = t;
            veh.closure_bound = false;
        }
    }

    /// Advances the world by one 0.1 s step: lane changes, IDM
    /// accelerations, ballistic integration, station crossings and exits.
    pub fn step(&mut self) -> Result<StepEvents, SimError> {
        let t = self.time_s();
        let dt = STEP_S;
        let guard = self.guard_active(t);
        self.update_closure_binding(guard);

        let mut orders = [self.lane_order(OUTER_LANE), self.lane_order(INNER_LANE)];
        self.change_lanes(t, guard, &mut orders);
        self.update_closure_binding(guard);

        let mut accel = vec![0.0; self.vehicles.len()];
        for order in &orders {
            for (k, &i) in order.iter().enumerate() {
                let v = &self.vehicles[i];
                let leader = (k > 0).then(|| order[k - 1]);
                let mut a = self.accel_behind(v.speed_mps, v.position_m, leader);
                if let Some(o) = self.obstacle_accel(v, guard) {
                    a = a.min(o);
                }
                accel[i] = a;
            }
        }

        let mut events = StepEvents::default();
        let s0 = self.idm.min_gap;
        let len = self.idm.vehicle_len;
        for order in &orders {
            let mut leader_x: Option<f64> = None;
            for &i in order {
                let v = &mut self.vehicles[i];
                let a = accel[i];
                let v0 = v.speed_mps;
                let x0 = v.position_m;
                let mut v1 = v0 + a * dt;
                let mut dx = if v1 < 0.0 {
                    v1 = 0.0;
                    -v0 * v0 / (2.0 * a)
                } else {
                    0.5 * (v0 + v1) * dt
                };
                // never close in below the standstill gap within one step
                if let Some(lx) = leader_x {
                    let room = (lx - len - s0 - x0).max(0.0);
                    if dx > room {
                        dx = room;
                        v1 = v1.min(room / dt);
                    }
                }
                let x1 = x0 + dx;
                for (s, &station) in self.stations_m.iter().enumerate() {
                    if x0 < station && station <= x1 {
                        let f = (station - x0) / dx;
                        events.crossings.push(Crossing {
                            vehicle_id: v.id,
                            is_cv: v.is_cv,
                            station: s + 1,
                            time_s: t + f * dt,
                            speed_mps: v0 + f * (v1 - v0),
                        });
                    }
                }
                v.position_m = x1;
                v.speed_mps = v1;
                leader_x = Some(x1);
            }
        }
        events.crossings.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.vehicle_id.cmp(&b.vehicle_id)));

        // integrity: nobody overlaps the vehicle ahead or enters a closed lane
        for lane in [OUTER_LANE, INNER_LANE] {
            let order = self.lane_order(lane);
            for w in order.windows(2) {
                let (lead, foll) = (&self.vehicles[w[0]], &self.vehicles[w[1]]);
                let gap = lead.position_m - self.idm.vehicle_len - foll.position_m;
                if gap < -1e-9 && lead.position_m < self.corridor_m {
                    return Err(SimError::Collision {
                        time_s: t + dt,
                        follower: foll.id,
                        leader: lead.id,
                        gap_m: gap,
                    });
                }
            }
        }
        if let Some(g) = guard {
            if let Some(v) = self.vehicles.iter().find(|v| v.closure_bound && v.position_m > g.start_m + 1e-9) {
                return Err(SimError::ClosureBreach { time_s: t + dt, vehicle: v.id });
            }
        }

        let end = self.corridor_m;
        let before = self.vehicles.len();
        let mut exits = Vec::new();
        self.vehicles.retain(|v| {
            if v.position_m >= end {
                exits.push(v.id);
                false
            } else {
                true
            }
        });
        self.exited += before - self.vehicles.len();
        let last_station = self.stations_m.len();
        for id in exits {
            let time_s = events
                .crossings
                .iter()
                .find(|c| c.vehicle_id == id && c.station == last_station)
                .map_or(t + dt, |c| c.time_s);
            events.exits.push(Exit { vehicle_id: id, time_s });
        }
        self.step += 1;
        Ok(events)
    }
}
