//! Benchmark definitions, the run/sweep driver with wall-clock timing, and
//! the file formats (CSV tables, legacy VTK fields, JSON configs) around
//! the `stokes-mg` solver core.

pub mod benchmarks;
pub mod config;
pub mod report;
pub mod runner;
pub mod vtk;
