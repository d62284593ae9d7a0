//! Complexity analysis for integer transition systems with recursive function calls.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod interp;
pub mod invariants;
pub mod its;
pub mod parser;
pub mod poly;
pub mod rf;
pub mod size;
pub mod smt;
pub mod twn;
