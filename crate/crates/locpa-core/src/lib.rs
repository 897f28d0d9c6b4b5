//! Workbench for truly concurrent process calculi with localities.

pub mod alphabet;
pub mod term;
pub mod syntax;
pub mod sos;
pub mod pes;
pub mod equiv;
pub mod rewrite;
pub mod recursion;
pub mod gen;
pub mod expand;
pub mod laws;
