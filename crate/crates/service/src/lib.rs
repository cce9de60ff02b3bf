//! Simulation service and command-line front end for the cable-driven
//! teleoperation master.

pub mod commands;
pub mod server;

pub use server::{start, ServeError, ServeOptions, ServeSummary, Server};
