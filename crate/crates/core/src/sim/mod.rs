//! Peripheral simulator: scripted movements to packet streams, plus
//! transport faults and the Can Band firmware model.

mod faults;
mod firmware;
mod generate;
mod scenario;

pub use faults::{apply_faults, merge_streams, Delivery, DropoutWindow, FaultError, FaultProfile};
pub use firmware::{can_band_firmware_step, CanBandFirmware, FirmwareConfig, FirmwareInput};
pub use generate::{
    armrest_frame, mat_frame, seat_frame, synthesize_streams, synthesize_with, BandState, ChairState, GroundTruth,
    Synthesis, TimedPacket, Timeline, TruthCycle, TruthLift, ARMREST_GRID, GRAVITY, MAT_GRID, SEAT_GRID,
};
pub use scenario::{Action, Posture, ScenarioError, ScenarioScript, ScenarioStep, Side};
