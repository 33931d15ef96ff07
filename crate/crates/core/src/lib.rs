//! Factorization of matrices with positive determinant into products of
//! symmetric positive-definite matrices, built from Gaussian optimal
//! transport maps, and simulation of the resulting piecewise gradient flows.

pub mod ballantine;
pub mod error;
pub mod flowsim;
pub mod io;
pub mod matfun;
pub mod matrix;
pub mod planar;
pub mod sampling;
pub mod spectral;
pub mod transport;

pub use ballantine::{
    factor_matrix, factor_orthogonal, factor_rotation2, verify, verify_factors, FactorOptions,
    FactorReport, VerificationReport,
};
pub use error::{Error, Result};
pub use flowsim::{
    segments_from_chain, simulate, simulate_with_covariance, transition_matrix, FlowSegment,
    ParticleCloud, Trajectory,
};
pub use matrix::{Matrix, SpdMatrix, SymMatrix};
pub use planar::{
    build_chain, net_rotation, phi_sweep, plan_scheme, solve_theta, ChainParams, FactorChain,
    SweepTable,
};
pub use spectral::{assemble, block_diagonalize, BlockSpec, OrthogonalDecomposition};
pub use transport::{ot_map, ot_residual};
