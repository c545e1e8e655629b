//! Intelligent Driver Model car following.

use serde::{Deserialize, Serialize};

/// IDM parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// v₀, m/s
    pub desired_speed: f64,
    /// T, s
    pub time_headway: f64,
    /// a, m/s²
    pub max_accel: f64,
    /// b, m/s²
    pub comfort_decel: f64,
    /// s₀, m
    pub min_gap: f64,
    pub vehicle_len: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 29.0,
            time_headway: 1.5,
            max_accel: 1.2,
            comfort_decel: 2.0,
            min_gap: 2.0,
            vehicle_len: 5.0,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    /// s*(v, Δv) = s₀ + max(0, vT + vΔv / (2√(ab))), with Δv = v − v_leader.
    pub fn desired_gap(&self, speed: f64, approach_rate: f64) -> f64 {
        let dynamic = speed * self.time_headway
            + speed * approach_rate / (2.0 * (self.max_accel * self.comfort_decel).sqrt());
        self.min_gap + dynamic.max(0.0)
    }

    pub fn free_accel(&self, speed: f64) -> f64 {
        self.max_accel * (1.0 - (speed / self.desired_speed).powf(self.exponent))
    }

    /// Acceleration given an optional leader `(gap, leader_speed)`; `gap` is
    /// bumper to bumper.
    pub fn accel(&self, speed: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = self.free_accel(speed);
        match leader {
            None => free,
            Some((gap, leader_speed)) => {
                let gap = gap.max(1e-3);
                let s_star = self.desired_gap(speed, speed - leader_speed);
                free - self.max_accel * (s_star / gap).powi(2)
            }
        }
    }

    /// Bumper-to-bumper gap at which speed `v` is an equilibrium behind a
    /// leader moving at `v`; infinite at or above the desired speed.
    pub fn equilibrium_gap(&self, speed: f64) -> f64 {
        let free = 1.0 - (speed / self.desired_speed).powf(self.exponent);
        if free <= 0.0 {
            f64::INFINITY
        } else {
            self.desired_gap(speed, 0.0) / free.sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_road_accelerates_to_desired_speed() {
        let p = IdmParams::default();
        assert!((p.accel(0.0, None) - p.max_accel).abs() < 1e-12);
        assert!(p.accel(p.desired_speed, None).abs() < 1e-12);
        assert!(p.accel(30.0, None) < 0.0);
    }

    #[test]
    fn equilibrium_gap_has_zero_accel() {
        let p = IdmParams::default();
        for v in [1.0, 5.0, 15.0, 25.0] {
            let s = p.equilibrium_gap(v);
            assert!(p.accel(v, Some((s, v))).abs() < 1e-9, "v={v}");
        }
    }

    #[test]
    fn standstill_at_min_gap_is_neutral() {
        let p = IdmParams::default();
        assert!(p.accel(0.0, Some((p.min_gap, 0.0))).abs() < 1e-12);
        assert!(p.accel(0.0, Some((p.min_gap * 0.5, 0.0))) < 0.0);
    }
}
