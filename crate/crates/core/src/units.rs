//! Unit conversions. Positions and speeds are reported in miles and mph;
//! the simulator integrates in metres and metres per second.

pub const METERS_PER_MILE: f64 = 1609.344;
pub const MPS_PER_MPH: f64 = 0.44704;
pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[inline]
pub fn miles_to_meters(mi: f64) -> f64 {
    mi * METERS_PER_MILE
}

#[inline]
pub fn meters_to_miles(m: f64) -> f64 {
    m / METERS_PER_MILE
}

#[inline]
pub fn mps_to_mph(v: f64) -> f64 {
    v / MPS_PER_MPH
}

#[inline]
pub fn mph_to_mps(v: f64) -> f64 {
    v * MPS_PER_MPH
}

/// Seconds needed to cover `miles` at `mph`.
#[inline]
pub fn travel_time_s(miles: f64, mph: f64) -> f64 {
    miles / mph * SECONDS_PER_HOUR
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_agree() {
        // one mile per hour is one mile per 3600 s
        assert!((METERS_PER_MILE / SECONDS_PER_HOUR - MPS_PER_MPH).abs() < 1e-15);
        assert!((mps_to_mph(mph_to_mps(37.5)) - 37.5).abs() < 1e-12);
        assert!((meters_to_miles(miles_to_meters(0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sixty_mph_half_mile_is_thirty_seconds() {
        assert!((travel_time_s(0.5, 60.0) - 30.0).abs() < 1e-12);
    }
}
