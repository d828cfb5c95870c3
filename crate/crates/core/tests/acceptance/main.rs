//! Acceptance criteria plus the supporting oracle and property tests, kept in
//! one test binary.

mod common;
mod criteria;
