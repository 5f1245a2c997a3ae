//! File formats, command line, parallel ensembles and the session server for
//! the `convicta-core` model.

pub mod catalog;
pub mod cli;
pub mod csv_io;
pub mod ensemble;
pub mod report;
pub mod server;

pub use convicta_core as core;
