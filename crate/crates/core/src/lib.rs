//! Point-goal navigation simulator that serves real camera images retrieved
//! by pose from an aligned structure-from-motion database.
//!
//! The pipeline: [`alignment`] registers the image poses into the map frame,
//! [`retrieval`] answers pose queries with the closest well-aligned image,
//! [`sim`] runs episodes on a [`world::OccupancyGrid`] under [`noise`], and
//! [`metrics`] scores the trajectories. External agents plug in through
//! [`protocol`].

pub mod alignment;
pub mod cli;
pub mod fixture;
pub mod geometry;
pub mod metrics;
pub mod noise;
pub mod protocol;
pub mod retrieval;
pub mod rng;
pub mod sim;
pub mod world;
