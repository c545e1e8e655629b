//! Synthetic BSM trips.
//!
//! Speed follows a chain of smooth speed changes (raised-cosine ramps) and
//! cruise or dwell phases, ending in a stop. Low-pass noise is added whose
//! amplitude grows as the reported confidence drops. Heading integrates a
//! yaw rate made of occasional turn events, more often at low speed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use cvsense::rng;
use cvsense::units::{mph_to_mps, MPS_PER_MPH};

use crate::bsm::{BsmRecord, Trip};

const METERS_PER_DEG_LAT: f64 = 111_320.0;
const MAX_SPEED_MPH: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_trips: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub period_s: f64,
    pub trips_per_device: usize,
    /// Idle time between consecutive trips of one device.
    pub trip_gap_s: f64,
    /// Noise standard deviation at 100 % and 0 % confidence.
    pub noise_mph: [f64; 2],
    pub noise_tau_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_trips: 24,
            min_len: 1200,
            max_len: 6000,
            period_s: 0.1,
            trips_per_device: 2,
            trip_gap_s: 600.0,
            noise_mph: [0.05, 0.6],
            noise_tau_s: 1.5,
        }
    }
}

/// Raised-cosine ramp from `from` to `to` over `n` samples; excludes the start.
fn ramp(out: &mut Vec<f64>, from: f64, to: f64, n: usize) {
    for k in 1..=n {
        let s = k as f64 / n as f64;
        out.push(from + (to - from) * 0.5 * (1.0 - (std::f64::consts::PI * s).cos()));
    }
}

fn ramp_len(dv_mph: f64, accel_mps2: f64, period_s: f64) -> usize {
    ((mph_to_mps(dv_mph.abs()) / accel_mps2 / period_s).ceil() as usize).max(1)
}

/// Second-order low-pass filtered white noise with unit stationary variance.
fn lowpass_noise<R: Rng + ?Sized>(n: usize, tau_s: f64, period_s: f64, rng: &mut R) -> Vec<f64> {
    let a = (-period_s / tau_s).exp();
    let gain = ((1.0 - a * a).powi(3) / (1.0 + a * a)).sqrt();
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    // burn in so the first samples are stationary
    let burn = (5.0 * tau_s / period_s) as usize;
    for k in 0..n + burn {
        let w = normal(rng);
        s1 = a * s1 + w;
        s2 = a * s2 + s1;
        if k >= burn {
            out.push(s2 * gain);
        }
    }
    out
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Noise-free speed profile of exactly `len` samples, starting and ending at rest.
pub fn speed_profile<R: Rng + ?Sized>(len: usize, period_s: f64, rng: &mut R) -> Vec<f64> {
    let stop_len = ramp_len(MAX_SPEED_MPH, 1.0, period_s);
    let body = len.saturating_sub(stop_len + 1);
    let mut v = vec![0.0];
    while v.len() < body {
        let cur = *v.last().expect("profile is non-empty");
        let target = if cur > 5.0 && rng.random::<f64>() < 0.15 { 0.0 } else { rng.random_range(15.0..MAX_SPEED_MPH) };
        let accel = rng.random_range(0.6..2.0);
        ramp(&mut v, cur, target, ramp_len(target - cur, accel, period_s));
        let hold_s = if target == 0.0 { rng.random_range(3.0..30.0) } else { rng.random_range(10.0..150.0) };
        v.extend(std::iter::repeat_n(target, (hold_s / period_s) as usize));
    }
    v.truncate(body.max(1));
    let cur = *v.last().expect("profile is non-empty");
    let n_stop = len - v.len();
    ramp(&mut v, cur, 0.0, n_stop);
    v
}

fn yaw_profile<R: Rng + ?Sized>(speed_mph: &[f64], period_s: f64, rng: &mut R) -> Vec<f64> {
    let n = speed_mph.len();
    let mut yaw = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let slow = speed_mph[k] < 20.0;
        let p_turn = if slow { 0.01 } else { 0.002 };
        if rng.random::<f64>() < p_turn {
            let angle = if slow { rng.random_range(45.0..100.0) } else { rng.random_range(5.0..35.0) };
            let angle = if rng.random::<bool>() { angle } else { -angle };
            let dur_s = if slow { rng.random_range(3.0..8.0) } else { rng.random_range(8.0..30.0) };
            let m = ((dur_s / period_s) as usize).min(n - k);
            // sin² bump integrates to angle over the full duration
            for j in 0..m {
                let s = (j as f64 + 0.5) / m as f64;
                yaw[k + j] += 2.0 * angle / dur_s * (std::f64::consts::PI * s).sin().powi(2);
            }
            k += m;
        } else {
            k += 1;
        }
    }
    yaw
}

fn confidence_profile<R: Rng + ?Sized>(n: usize, period_s: f64, rng: &mut R) -> Vec<f64> {
    let base: f64 = rng.random_range(20.0..100.0);
    let drift = lowpass_noise(n, 60.0, period_s, rng);
    drift.iter().map(|d| (base + 12.0 * d).clamp(0.0, 100.0)).collect()
}

/// One synthetic trip of `len` samples. `device_id` and `t0_s` place it in a corpus.
pub fn synth_trip<R: Rng + ?Sized>(cfg: &SynthConfig, len: usize, device_id: u64, t0_s: f64, rng: &mut R) -> Trip {
    let dt = cfg.period_s;
    let clean = speed_profile(len, dt, rng);
    let conf = confidence_profile(len, dt, rng);
    let noise = lowpass_noise(len, cfg.noise_tau_s, dt, rng);
    let yaw_clean = yaw_profile(&clean, dt, rng);
    let yaw_noise = lowpass_noise(len, cfg.noise_tau_s, dt, rng);
    let [sigma_hi, sigma_lo] = cfg.noise_mph;

    let mut heading: f64 = rng.random_range(0.0..360.0);
    let mut lat: f64 = rng.random_range(42.20..42.32);
    let mut lon: f64 = rng.random_range(-83.80..-83.65);
    let mut records = Vec::with_capacity(len);
    for k in 0..len {
        let lack = 1.0 - conf[k] / 100.0;
        let sigma = sigma_hi + (sigma_lo - sigma_hi) * lack;
        // no jitter while parked
        let moving = (clean[k] / 5.0).min(1.0);
        let speed = (clean[k] + sigma * moving * noise[k]).max(0.0);
        let yaw = (yaw_clean[k] + 0.5 * lack * moving * yaw_noise[k]).clamp(-360.0, 360.0);
        records.push(BsmRecord {
            device_id,
            timestamp_s: t0_s + k as f64 * dt,
            lat,
            lon,
            speed_mph: speed,
            heading_deg: heading,
            yaw_rate_deg_s: yaw,
            confidence_pct: conf[k],
        });
        heading = (heading + yaw * dt).rem_euclid(360.0);
        let step_m = speed * MPS_PER_MPH * dt;
        let h = heading.to_radians();
        lat += step_m * h.cos() / METERS_PER_DEG_LAT;
        lon += step_m * h.sin() / (METERS_PER_DEG_LAT * lat.to_radians().cos());
    }
    Trip { device_id, records }
}

/// A corpus of trips. Trip `k` draws from its own substream of `seed`.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> Vec<Trip> {
    let per_device = cfg.trips_per_device.max(1);
    let mut next_start = vec![0.0_f64; cfg.n_trips.div_ceil(per_device)];
    (0..cfg.n_trips)
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let len = r.random_range(cfg.min_len..=cfg.max_len.max(cfg.min_len));
            let device = k / per_device;
            let t0 = next_start[device];
            next_start[device] = t0 + len as f64 * cfg.period_s + cfg.trip_gap_s;
            synth_trip(cfg, len, device as u64 + 1, t0, &mut r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::{ingest_bsm_reader, write_bsm_csv, IngestOptions};
    use cvsense::codec::dct_forward;
    use cvsense::metrics::sparsity_count;

    #[test]
    fn profile_has_requested_length_and_rests_at_ends() {
        let mut r = rng::stream(3, 0);
        for len in [400, 999, 4967] {
            let v = speed_profile(len, 0.1, &mut r);
            assert_eq!(v.len(), len);
            assert_eq!(v[0], 0.0);
            assert!(v[len - 1].abs() < 1e-12);
            assert!(v.iter().all(|&s| (0.0..=MAX_SPEED_MPH).contains(&s)));
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        let cfg = SynthConfig::default();
        let trip = synth_trip(&cfg, 3000, 9, 0.0, &mut rng::stream(5, 0));
        for r in &trip.records {
            assert!(r.speed_mph >= 0.0);
            assert!((-360.0..=360.0).contains(&r.yaw_rate_deg_s));
            assert!((0.0..=100.0).contains(&r.confidence_pct));
            assert!((0.0..360.0).contains(&r.heading_deg));
        }
    }

    #[test]
    fn speed_blocks_are_compressible() {
        let trip = synth_trip(&SynthConfig::default(), 5000, 1, 0.0, &mut rng::stream(11, 0));
        let speeds = trip.speeds();
        let block = &speeds[1000..2000];
        let count = sparsity_count(&dct_forward(block).unwrap(), 1.0);
        assert!(count < 300, "{count} of 1000 coefficients above 1");
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = SynthConfig { n_trips: 4, min_len: 500, max_len: 900, ..SynthConfig::default() };
        assert_eq!(synth_corpus(&cfg, 2), synth_corpus(&cfg, 2));
        assert_ne!(synth_corpus(&cfg, 2), synth_corpus(&cfg, 3));
    }

    #[test]
    fn corpus_survives_csv_round_trip() {
        let cfg = SynthConfig { n_trips: 5, min_len: 500, max_len: 900, ..SynthConfig::default() };
        let corpus = synth_corpus(&cfg, 8);
        let all: Vec<BsmRecord> = corpus.iter().flat_map(|t| t.records.iter().copied()).collect();
        let mut buf = Vec::new();
        write_bsm_csv(&mut buf, &all).unwrap();
        let back = ingest_bsm_reader(buf.as_slice(), &IngestOptions::default()).unwrap();
        assert!(back.rejected.is_empty());
        assert_eq!(back.trips.len(), corpus.len());
        let lens = |ts: &[Trip]| {
            let mut v: Vec<(u64, usize)> = ts.iter().map(|t| (t.device_id, t.len())).collect();
            v.sort();
            v
        };
        assert_eq!(lens(&back.trips), lens(&corpus));
    }
}
