//! Binary Forney graphs: interactions on nodes, variables on edges.

pub mod core;
pub mod exact;
pub(crate) mod geometric;
pub mod graph;
pub mod ising;
pub mod random;

pub use self::core::{two_core, RemovalRecord, TwoCore};
pub use exact::{exact_log_z, exact_log_z_with, ExactLimits};
pub use graph::{spin, EdgeEnd, EdgeSpec, ForneyGraph, GraphFile, InteractionNode, NodeSpec, VariableEdge, MAX_DEGREE};
pub use ising::{build_grid, ising_grid_forney, CouplingMode, IsingGrid, IsingParams};
pub use random::{random_planar_forney, random_tree_forney, RandomPlanarOptions};
