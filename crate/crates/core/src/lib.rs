//! Representative-trader automaton markets and the experiments built on them.

pub mod ca;
pub mod cli;
pub mod error;
pub mod ifa;
pub mod io;
pub mod market;
pub mod regulation;
pub mod stats;
pub mod survey;
pub mod svg;

pub use error::{LabError, Result};
