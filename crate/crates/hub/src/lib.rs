//! `homesense` hub: simulation runner, report rendering and the live server
//! (UDP packet ingest, HTTP snapshot endpoint, WebSocket event channel).

pub mod cli;
pub mod report;
pub mod server;
pub mod simulate;
