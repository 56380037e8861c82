//! Inequality checks, property suites and report assembly.

pub mod checks;
pub mod lemmas;
pub mod random;
pub mod report;
pub mod suite;
