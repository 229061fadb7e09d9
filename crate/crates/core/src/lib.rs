//! Circuit-level modeling of a hybrid transmitting/reflecting reconfigurable
//! surface built from varactor splitters and switched phase-shifter cells.

pub mod antenna;
pub mod cli;
pub mod cell;
pub mod emdata;
pub mod error;
pub mod netalg;
pub mod optimize;
pub mod pattern;
pub mod splitter;
pub mod thevenin;

pub use error::{Error, Result, Stage};
