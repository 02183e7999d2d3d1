//! Trajectory sensitivities, per-sensor Gramian atoms and observability
//! measures.

mod atoms;
mod jacobian;
mod measures;

pub use atoms::{gramian_atoms, gramian_atoms_streaming, scenario_atoms, GramianAtoms, DEFAULT_DENSE_CAP};
pub use jacobian::{step_jacobian, trajectory_jacobians, StepJacobian, TrajectoryJacobians};
pub use measures::{
    check_candidates, default_epsilon, evaluate_measure, measure_lambda_min, measure_logdet, measure_rank,
    measure_trace, normalize_weights, robust_objective, Measure, RobustValue, RANK_TOLERANCE, SYMMETRY_TOLERANCE,
};
