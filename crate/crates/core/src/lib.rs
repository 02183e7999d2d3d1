//! Multi-species water-quality simulation on drinking-water networks,
//! observability Gramians built from trajectory Jacobians, and robust greedy
//! sensor placement on top of them.
//!
//! The usual pipeline: load a [`network::WaterNetwork`] and a
//! [`network::HydraulicProfile`], build a [`dynamics::WqModel`] per
//! [`dynamics::Scenario`], turn each into per-candidate Gramian atoms with
//! [`observability::scenario_atoms`], and solve a
//! [`placement::PlacementProblem`] with [`placement::greedy_place`].

pub mod dynamics;
pub mod error;
pub mod io;
pub mod network;
pub mod observability;
pub mod placement;
pub mod synthetic;
