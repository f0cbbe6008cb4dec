//! Congestion analysis of static packet routings on networks.
//!
//! * [`graph`]: topologies, preferential-attachment generation, distances.
//! * [`routing`]: local and per-destination transition matrices.
//! * [`analysis`]: the stationary occupancy matrix and everything derived
//!   from it (capacity, transit time, betweenness, queue lengths, bounds).
//! * [`sim`]: a discrete-time packet simulator used to check the analysis.

pub mod analysis;
pub mod error;
pub mod graph;
pub mod routing;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{generate_ba, load_edge_list, load_edge_list_relabeled, DegreeStats, Graph};
pub use routing::{RoutingKind, RoutingSpec, StationaryDistribution, TransitionMatrix};
