//! Simulation and spectral-analysis toolkit for a transversely driven atomic
//! ensemble coupled to a lossy cavity mode, with a periodically modulated
//! coupling that can stabilize period-doubled limit cycles.
//!
//! The crate is organized around the stages of the analysis:
//!
//! * [`model`] — physical parameters, derived scales, and the time-periodic
//!   coupling functions `V0(t)`, `V1(t)`, `V2(t)` obtained from adiabatic
//!   elimination of the cavity.
//! * [`meanfield`] — the atom-only nonlinear mean-field equations, a fixed-step
//!   RK4 integrator, attractor detection (fixed point vs. 2T limit cycle),
//!   order parameter, and hysteresis scans.
//! * [`floquet`] — linearization around a converged attractor, the Trotterized
//!   monodromy matrix over 2T, and extraction of the complex stability
//!   exponents (decay rate, excitation frequency).
//! * [`wigner`] — semiclassical stochastic simulation of the full
//!   spin-plus-cavity system with vacuum input noise and an optional weak
//!   probe drive; probe-response maps and phase scans.
//! * [`analysis`] — analytic cross-checks (Bogoliubov spectrum of the normal
//!   phase) and Lorentzian lineshape overlays parameterized by the Floquet
//!   exponents.
//!
//! All frequencies are expressed in units of the cavity linewidth `kappa`
//! (normally set to 1) and times in units of `1/kappa`.

pub mod analysis;
pub mod floquet;
pub mod meanfield;
pub mod model;
pub mod wigner;

pub use analysis::{
    bogoliubov_epsilon, bogoliubov_params, branch_overlay, lorentzian_overlay, AnalysisError,
    BogoliubovParams, Branch, Lineshape,
};
pub use floquet::{
    extract_exponents, monodromy, monodromy_stabilized, sigma_at, spectrum_sweep, FloquetError,
    FloquetResult, MonodromySettings, PhaseClass, SeedKind, SweepRecord, SweepSettings,
};
pub use meanfield::{
    find_attractor, hysteresis_scan, integrate, normal_phase_state, order_parameter, rhs,
    tilted_seed, AttractorInfo, AttractorKind, AttractorOptions, HysteresisPoint, MeanFieldError,
    Phase, SpinState, SweepDirection, Trajectory,
};
pub use model::{DerivedScales, EliminationCoeffs, ModelError, ModelParams, ProbeParams, RegimeWarning};
pub use wigner::{
    intensity_tav, phase_scan, probe_response_map, sample_initial, sde_step, simulate_trace,
    traj_rng, EnsembleSpec, FullState, ProbeResponseMap, WignerError,
};
