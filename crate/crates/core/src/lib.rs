//! Compressive capture and recovery of connected-vehicle time series.
//!
//! A vehicle keeps each sample of a fixed-rate stream with probability equal
//! to the compression ratio. A central site later recovers the full stream
//! by minimizing the ℓ1 norm of its DCT coefficients subject to agreement with
//! the kept samples. The crate also contains a two-lane freeway simulator, a
//! model of on-board snapshot buffers and roadside uploads, and the
//! travel-time estimators used to compare loop detectors, fixed-rate probe
//! data, and compressively captured probe data.
//!
//! ```
//! use cvsense::codec::{capture_stream, recover_stream, SamplingMode, SolverConfig};
//! use cvsense::metrics::rmse_normalized;
//! use cvsense::rng;
//!
//! let speeds: Vec<f64> = (0..400)
//!     .map(|i| 40.0 + 10.0 * (i as f64 / 60.0).sin())
//!     .collect();
//! let mut rng = rng::stream(7, 0);
//! let blocks = capture_stream(&speeds, 200, 0.4, SamplingMode::ExactM, &mut rng).unwrap();
//! let recovered = recover_stream(&blocks, &SolverConfig::default());
//! let values: Vec<f64> = recovered.samples.iter().map(|v| v.unwrap()).collect();
//! assert!(rmse_normalized(&speeds, &values).unwrap() < 0.01);
//! ```

pub mod codec;
pub mod estimation;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod study;
pub mod units;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dct.md")]
    mod dct {}
    #[doc = include_str!("../../../book/src/capture.md")]
    mod capture {}
    #[doc = include_str!("../../../book/src/basis-pursuit.md")]
    mod basis_pursuit {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/obu.md")]
    mod obu {}
    #[doc = include_str!("../../../book/src/travel-time.md")]
    mod travel_time {}
}
