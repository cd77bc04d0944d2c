//! Information states of a single agent.
//!
//! Three routes produce the conditional law of an agent's state given its
//! observation history:
//!
//! - [`ZakaiSolver`] evolves the unnormalised density on a bounded grid
//!   (transport–diffusion step followed by a multiplicative observation
//!   correction), and its normalised Kushner counterpart;
//! - [`ParticleCloud`] carries Girsanov log-weights `h dy − ½h² dt`;
//! - [`benes`] implements the finite-dimensional filter whose information
//!   state is parametrised by `(r, P, λ)`, with [`BenesGrid`] as its
//!   brute-force reference.
//!
//! [`kalman`] holds the closed-form linear-Gaussian oracle used to check all
//! of them.

pub mod benes;
mod benes_grid;
mod belief;
mod grid;
pub mod kalman;
mod particle;

pub use belief::{gauss_hermite, AgentFilter, FilterMode, GaussianBelief, InformationState};
pub use grid::{kushner_step, normalize, zakai_step, DensityGrid, GridSpec, ZakaiSolver};
pub use kalman::{kalman_bucy_oracle, KalmanPath, LinearModel};
pub use particle::{particle_filter_step, ParticleCloud};
pub use benes_grid::{benes_grid_comparison, BenesGrid, BenesGridReport};
pub use benes::{
    benes_density, benes_drift, benes_filter_step, benes_moments, phi_residual_check, riccati_step, BenesMode,
    BenesModel, BenesMoments, CoefficientPath, PhiResidualReport, QuadraticL2, SufficientStats,
};
