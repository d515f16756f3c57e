//! Coupled-dipole multiple scattering and strong-disorder renormalization
//! group (RG) for the optical response of disordered atomic ensembles.
//!
//! The library works in dimensionless units throughout: lengths carry a
//! factor of the resonant wavevector `k0` (so the resonant wavelength is
//! `2π` in code units), frequencies and detunings are in units of the
//! single-atom linewidth `Γ0`, and fields are normalized to the incident
//! amplitude at the beam focus. See [`config::UnitsConvention`].
//!
//! The main ingredients:
//!
//! - [`ensemble`]: uniform random atom positions in cylinder/sphere volumes,
//! - [`optics`]: the free-space dyadic Green's tensor, its x̂-projected
//!   scalar coupling with an explicit `1/ρ³` near-field part, and the
//!   paraxial Gaussian drive,
//! - [`solver`]: dense assembly of the N×N coupling matrix and linear solves
//!   of the coupled-dipole equations over detuning grids (LU, Hessenberg and
//!   eigendecomposition backends),
//! - [`observables`]: mode-projected transmission, complex-index extraction,
//!   optical-theorem cross sections and far-field maps,
//! - [`rg`]: the pairwise strong-disorder RG flow that maps a dense
//!   homogeneous ensemble onto an inhomogeneously broadened one,
//! - [`baselines`]: smooth-medium Maxwell-Bloch / Lorentz-Lorenz indices and
//!   their inhomogeneously broadened generalization,
//! - [`pairlab`]: exact two-atom analytics (eigenmodes, spectra, cross
//!   sections and orientation averages),
//! - [`harness`]: reproducible, resumable disorder-averaged sweeps.

pub mod baselines;
pub mod config;
pub mod ensemble;
pub mod harness;
pub mod observables;
pub mod optics;
pub mod pairlab;
pub mod rg;
pub mod solver;

mod stats;

pub use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error type; each subsystem folds into this.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Ensemble(#[from] ensemble::EnsembleError),
    #[error(transparent)]
    Optics(#[from] optics::OpticsError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Observables(#[from] observables::ObservablesError),
    #[error(transparent)]
    Rg(#[from] rg::RgError),
    #[error(transparent)]
    Baselines(#[from] baselines::BaselinesError),
    #[error(transparent)]
    Pairlab(#[from] pairlab::PairlabError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Harness(String),
}
