//! Exact second-moment calculus for forward integrals driven by
//! multi-dimensional fractional Brownian motion with Hurst exponent
//! H ∈ (1/2, 1).
//!
//! The crate evaluates the closed-form conditional kernel Λ(s,t) — a centered
//! second-order polynomial of the noise plus the mixed derivative of the
//! covariance — and verifies the resulting L² identity
//! ‖∫ Y dB‖² = E∫∫ ⟨Y_s ⊗ Y_t, Λ(s,t)⟩ ds dt
//! two independent ways: deterministic Gauss–Hermite/graded-mesh quadrature
//! on the right-hand side and Monte Carlo over exact-law paths on the left.
//!
//! Modules mirror that split:
//! - [`covariance`]: the kernel R, its derivatives and auxiliary scalars;
//! - [`regression`]: finite-scale and limit regression weights;
//! - [`kernel`]: the fields W, Λ and Λ⁻;
//! - [`sampler`]: exact path and pair-law samplers with seeded substreams;
//! - [`integral`]: forward-integral approximations and their second moments;
//! - [`quadrature`]: the deterministic right-hand side;
//! - [`bounds`]: the quantitative inequalities with recorded constants.
//!
//! Inner loops parallelize with rayon behind the `parallel` feature (on by
//! default); reductions are deterministic pairwise sums, so results do not
//! depend on the worker count.

pub mod bounds;
pub mod covariance;
pub mod exec;
pub mod integral;
pub mod kernel;
pub mod model;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod sampler;

pub use model::{
    CoeffQuad, Error, EstimateWithCI, HurstModel, KernelMatrix, PairSample, Result, SimplexPoint,
};
