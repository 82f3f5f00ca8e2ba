//! Discrete-event simulation of an enterprise LTE small cell plus Wi-Fi
//! deployment, with IP-probe based downlink steering between the two radio
//! paths.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: node placement, channel selection and AP association.
//! - [`channel`]: path loss, shadowing, block fading and SINR to rate mapping.
//! - [`mac_wifi`]: CSMA/CA contention with TXOP aggregation.
//! - [`mac_lte`]: round-robin TTI scheduling.
//! - [`traffic`]: FTP file sessions, TCP ACK coupling and IPsec framing.
//! - [`rlm`]: the radio link management controller (RCM) and UE agent (UCM).
//! - [`engine`]: the event loop that runs one drop of one configuration.
//! - [`metrics`]: throughput ledgers, CDFs and result files.
//! - [`config`]: campaign configuration parsing and validation.

// `!(x > 0.0)` is how validation rejects NaN along with the out-of-range
// values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod mac_lte;
pub mod mac_wifi;
pub mod metrics;
pub mod rlm;
pub mod scenario;
pub mod seeds;
pub mod time;
pub mod trace;
pub mod traffic;

pub use config::CampaignConfig;
pub use engine::{run_campaign, run_drop, run_seeded_drop, CampaignResult, DropOptions, Mode};
pub use error::{Error, Result};
pub use metrics::DropResult;
pub use time::SimTime;
