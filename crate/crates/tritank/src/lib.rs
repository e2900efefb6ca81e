//! Fault diagnosis workbench for a three-tank hydraulic rig.
//!
//! The crate builds the rig as a bond graph, derives its state-space and
//! influence-graph models, simulates actuator and sensor bias faults, and
//! compares three diagnosis strategies on the same measurements:
//!
//! * residual signature matching ([`fdi`]),
//! * conflict-driven hitting sets refined with fault models ([`dx`]),
//! * causal localization on the influence graph ([`ig`]).
//!
//! [`plant`] and [`detection`] provide the shared simulation and alarm
//! layers, and [`workbench`] wires everything together, including the
//! 19-scenario single/multiple-fault benchmark behind the `table1` CLI
//! subcommand.

pub mod bondgraph;
pub mod detection;
pub mod dx;
pub mod fdi;
pub mod ig;
pub mod plant;
pub mod var;
pub mod workbench;
