//! Constructive chain-recurrence toolkit for torus maps and shifts of
//! finite type: box-graph chain recurrent classes, periodic gluing of
//! pseudo-orbits with shadowing, periodic-measure approximation in an
//! explicit weak* metric, Monte Carlo estimation of physical-like
//! measures, and entropy on subshifts.

pub mod approx;
pub mod chain;
pub mod cli;
pub mod entropy;
pub mod gluing;
pub mod graph;
pub mod measure;
pub mod physical;
pub mod rng;
pub mod scenario;
pub mod svg;
pub mod systems;
