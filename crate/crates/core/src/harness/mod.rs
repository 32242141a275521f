//! Configuration, persistence, seeding and the command-line front end.

pub mod cli;
pub mod config;
pub mod io;
pub mod seeds;
