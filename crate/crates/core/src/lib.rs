//! Phase-space volume geometry for Hamiltonian flows.
//!
//! The crate co-integrates Hamiltonian trajectories with their state
//! transition matrices and measures what symplecticity forces on them:
//! subdeterminant and bracket identities, Poincaré–Cartan sums, Wirtinger
//! bounds, 2k-volume expansion factors, the collapse angle between
//! complementary image subspaces, and the symplectic eigenskeleton of
//! `ΦᵀΦ`. Two nonholonomic control case studies (the kinematic Heisenberg
//! system and the falling rolling disc) live in [`control`].
//!
//! Phase-space vectors are always ordered by symplectic pairs,
//! `(p1, q1, p2, q2, …)`, and pair indices are 0-based.

pub mod control;
pub mod eigenskeleton;
mod error;
pub mod hamiltonian;
pub mod integrator;
pub mod invariants;
pub mod io;
pub mod phase;
pub mod propagation;
pub mod surfaces;

pub use error::{Error, Result};

pub use eigenskeleton::{compute_skeleton, skeleton_volume_ratio, verify_pairing, Eigenskeleton};
pub use hamiltonian::{builtin_system, Hamiltonian};
pub use integrator::{IntegratorSettings, IntegratorStats, Method};
pub use invariants::{
    collapse_angle, expansion_factor, lagrange_bracket, poincare_cartan_sum,
    poincare_cartan_unsigned, poisson_bracket, subdet_table, subdeterminant, volume_2k,
    wirtinger_check, SubdetTable, VectorSet2k,
};
pub use phase::{build_j, omega, projection_matrix, symplecticity_residual, PhaseState};
pub use propagation::{propagate, SampleSpec, Stm, Trajectory};
pub use surfaces::{DensityMap, SurfaceParam};
