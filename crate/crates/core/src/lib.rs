//! Simulation and analysis toolkit for the Biham-Middleton-Levine traffic
//! model and the blocking-path machinery used to show it jams at high density.

pub mod blocking;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lattice;
pub mod par;
pub mod percolation;
pub mod renorm;
pub mod rng;

pub use error::{BmlError, Result};
pub use lattice::{car_census, sample_initial, Direction, InitialLaw, SiteState, TorusGrid};
pub use rng::RngSeed;
