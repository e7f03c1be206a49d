//! Transmit precoder design for dual-function radar-communication (DFRC)
//! arrays.
//!
//! A primary node with an M-element uniform linear array transmits radar
//! and communication waveforms through a shared precoder. The design
//! methods in this crate split per-antenna power between the two
//! subsystems subject to output-SINR requirements:
//!
//! - [`design::radar_guarantee`]: fix a radar SINR floor over a search
//!   sector, maximize the minimum communication SINR by bisection over
//!   semidefinite feasibility problems.
//! - [`design::comm_guarantee`]: the mirror image; fix the communication
//!   SINR, maximize the worst-case radar SINR.
//! - [`design::priority_combinatorial`] / [`design::priority_greedy`]:
//!   maximize the number of communication links closed under a radar
//!   guarantee, then finish with the communication guarantee.
//! - [`baselines`]: MSE and zero-forcing beampattern-matching designs
//!   from the prior literature, for comparison.
//!
//! Designs are evaluated with beampatterns ([`array_model`]), SINR
//! metrics ([`link_metrics`]) and delay-Doppler ambiguity analysis
//! ([`waveform`]). Scenario files and result export live in
//! [`scenario`].

pub mod array_model;
pub mod baselines;
pub mod conic;
pub mod design;
pub mod error;
pub mod link_metrics;
pub mod scenario;
pub mod waveform;

pub use error::{DfrcError, Result};

/// Linear power ratio -> decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Decibels -> linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
