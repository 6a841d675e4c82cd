//! Simulation, benchmarking and calibration of fSim two-qubit gates on a
//! tunable-coupler transmon pair.

pub mod device;
pub mod fsim;
pub mod interp;
pub mod optimize;
pub mod pulse;
pub mod experiments;
pub mod benchmarking;
pub mod output;
pub mod calibration;
pub mod cli;
