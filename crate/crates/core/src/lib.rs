//! Dual prediction scheme (DPS) library and trace-driven simulator.
//!
//! A sensor node and its sink run identical one-step predictors; the node
//! transmits a reading only when the shared prediction misses it by more
//! than an error margin, so the sink can reconstruct the series within
//! that margin from a fraction of the messages. This crate provides the
//! filter suite (MA, AR, ARMA, LMS, LMS-VSS), the node/sink state
//! machines, star and cluster topologies with two-hop message accounting,
//! head-side aggregation, trace ingestion for the Intel Lab data layout,
//! and a deterministic sweep harness over error margins.

pub mod aggregate;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fixture;
pub mod predictor;
pub mod protocol;
pub mod sweep;
pub mod topology;

pub use error::{Error, Result};
pub use predictor::{new_predictor, PredictorKind, PredictorSpec, PredictorState};
pub use protocol::{run_dps, trace_metrics, verify_lockstep, DpsTrace, ErrorMargin};
