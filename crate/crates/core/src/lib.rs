//! Analytical models and a cycle-level simulator for many-ported
//! shared-memory interconnects.
//!
//! The library compares two organizations of an n-master, m-bank shared
//! memory: a flat full crossbar and a distributed design built from
//! 2-ary butterfly blocks with a speed-up network and traffic
//! randomization. It provides:
//!
//! - [`analytic`]: closed-form contention/utilization formulas and
//!   wire-crossing counts.
//! - [`topology`]: explicit staged graphs for both organizations plus a
//!   geometric crossing oracle.
//! - [`engine`]: a synchronous cycle-level simulator (arbitration,
//!   back-pressure, register slices, bank service, randomization).
//! - [`traffic`]: burst/mixed stimulus generators.
//! - [`metrics`]: statistics, CSV rows, and comparison tables.
//! - [`config`] and [`svg`]: run-file parsing and minimal plots for the
//!   CLI.

pub mod analytic;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod svg;
pub mod topology;
pub mod traffic;
