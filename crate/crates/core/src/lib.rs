//! Dual-threshold early-exit event detection with channel-adaptive
//! offloading.
//!
//! Each event produces a tail-class confidence score at every exit block of
//! a device-side network. Two thresholds decide, block by block, whether the
//! event is a routine head event (stop locally), a rare tail event (stop and
//! offload its features to a server), or still undecided (run the next
//! block). The crate computes the resulting miss, false-alarm, offloading
//! and accuracy metrics, tunes the thresholds under data-volume and energy
//! budgets with a proximal penalty method, and replays the resulting
//! policy over varying channel states.
//!
//! ```
//! use dualexit::{detector, traces};
//!
//! let pop = traces::generate_population(&traces::SyntheticSpec::new(200, 3, 4.0, 1)).unwrap();
//! let thr = detector::ThresholdPair::new(0.3, 0.7).unwrap();
//! let m = detector::population_metrics(&pop, &thr, detector::Mode::Hard).unwrap();
//! assert!((m.p_off - ((1.0 - m.p_miss) * m.p_tail + m.p_false * m.p_head)).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod optimizer;
pub mod policy;
mod sum;
pub mod traces;

pub use error::{Error, ParseError, Result};
