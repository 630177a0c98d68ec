//! Closed-form summaries for multi-branch integer loops.
//!
//! The pipeline: parse a `.wl` program, build its control-flow graph, carve
//! each loop into single-branch paths, connect those paths into a graph whose
//! strongly connected components are "cycles the loop can settle into", then
//! summarize each component with a closed form (affine iteration counts,
//! periodic oscillation tables, or a single pass) and compose the results.
//! A concrete interpreter doubles as the ground-truth oracle, and a bounded
//! checker turns summaries into assertion verdicts.

pub mod cfg;
pub mod cli;
pub mod frontend;
pub mod graph;
pub mod interval;
pub mod oracle;
pub mod solver;
pub mod spath;
pub mod sym;
pub mod summarize;
pub mod verify;
