//! Deep Q-learning traffic signal control at a single four-approach
//! intersection, built on an in-crate discrete-time microsimulator.
//!
//! The crate is organized around the training loop: [`sim`] advances traffic
//! one second at a time, [`demand`] schedules stochastic vehicle arrivals,
//! [`signal`] owns the phase state machine, [`dtse`] turns simulator state
//! into the grid encoding the deep agent consumes, [`nn`] is the from-scratch
//! network math, [`trainer`] runs Q-learning with parallel experience replay,
//! [`baseline`] is the shallow queue-count agent trained online, and
//! [`metrics`] aggregates per-epoch traffic statistics.

pub mod baseline;
pub mod demand;
pub mod dtse;
pub mod metrics;
pub mod nn;
pub mod seeds;
pub mod signal;
pub mod sim;
pub mod trainer;
