//! Universal online convex optimization with one projection per round.
//!
//! The library provides:
//!
//! * [`domains`] — convex feasible sets with Euclidean projection oracles,
//!   including Dykstra's algorithm for halfspace intersections;
//! * [`surrogate`] — the domain-converting surrogate loss that lets the
//!   learners run on an enclosing ball;
//! * [`experts`] — the per-function-class expert algorithms;
//! * [`meta`] — Adapt-ML-Prod aggregation with second-order regret;
//! * [`universal`] — the two-layer learner and a multi-projection baseline;
//! * [`harness`] — synthetic loss streams, an offline comparator, regret
//!   accounting, rate fitting, and CSV traces behind the `uoco` CLI.
//!
//! The [`oracles`] module holds independent brute-force verification
//! routes used only by the test suites.

pub mod domains;
pub mod experts;
pub mod harness;
pub mod linalg;
pub mod meta;
pub mod oracles;
pub mod surrogate;
pub mod universal;
pub mod vecmath;
