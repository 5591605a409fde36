//! Sensing, detection and tracking core for the home activity hub.
//!
//! - [`wire`]: packet format and peripheral registry
//! - [`sim`]: scripted peripheral simulator and transport faults
//! - [`pressure`]: smoothing, centre of pressure, foot split, occupancy
//! - [`detect`]: sit-to-stand stages, pairing, lift phases, offline oracle
//! - [`metrics`]: daily metrics and the event store
//! - [`progression`]: weekly goal check and prompts
//! - [`hub`]: ordering, pipelines, session commands and UI events
//! - [`session`]: end-to-end simulated sessions

pub mod detect;
pub mod hub;
pub mod metrics;
pub mod pressure;
pub mod progression;
pub mod sim;
pub mod wire;
pub mod session;
