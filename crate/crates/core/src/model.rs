//! Physical parameters, derived scales, and the time-periodic coupling
//! functions that drive every other module.
//!
//! Everything here is an immutable value object; all frequencies are in units
//! of the cavity linewidth `kappa`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Errors raised by parameter validation and derived-scale evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} violates constraint: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// The static coupling is at or above the critical value, so the
    /// soft-mode frequency `omega_res` would be imaginary.
    #[error("g0 = {g0} >= g_c = {g_c}: soft-mode frequency is imaginary")]
    SupercriticalCoupling { g0: f64, g_c: f64 },
    #[error("operation requires probe parameters, but none are set")]
    NoProbe,
}

/// Weak coherent drive injected into the cavity for spectroscopy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Probe strength eta_0 (units of kappa).
    pub eta0: f64,
    /// Probe frequency omega_pr (units of kappa).
    pub omega_pr: f64,
    /// Probe phase offset phi in [0, 2*pi).
    pub phi: f64,
}

/// All physical parameters of the driven spin-cavity model.
///
/// The atom-cavity coupling is modulated in time,
/// `g(t) = g0 + g1 cos(omega t)`, with drive period `T = 2*pi/omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cavity linewidth; the base frequency unit (normally 1).
    pub kappa: f64,
    /// Cavity detuning delta_c.
    pub delta_c: f64,
    /// Level splitting Delta.
    pub delta: f64,
    /// Static coupling g0.
    pub g0: f64,
    /// Modulation amplitude g1.
    pub g1: f64,
    /// Drive frequency omega.
    pub omega: f64,
    /// Atom number N (treated as a continuous scale).
    pub n_atoms: f64,
    /// Optional probe drive.
    pub probe: Option<ProbeParams>,
}

/// Frequently used derived frequency scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScales {
    /// Critical static coupling g_c = sqrt(Delta (delta_c^2 + kappa^2) / (4 delta_c)).
    pub g_c: f64,
    /// Soft-mode frequency omega_res = Delta sqrt(1 - g0^2/g_c^2).
    pub omega_res: f64,
    /// Time-averaged damping rate gamma0 = 4 g0^2 delta_c kappa Delta / (delta_c^2 + kappa^2)^2.
    pub gamma0: f64,
    /// Drive period T = 2*pi/omega.
    pub period_t: f64,
}

/// Diagnostic produced when the adiabatic-elimination regime is violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeWarning {
    pub quantity: &'static str,
    pub value: f64,
    pub limit: f64,
    pub message: String,
}

/// Default factor for the regime checks: warn when a slow frequency exceeds
/// min(delta_c, kappa) divided by this.
pub const REGIME_FACTOR_DEFAULT: f64 = 5.0;

/// Adiabatic closed forms of the cavity-elimination coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationCoeffs {
    pub c_plus: Complex64,
    pub c_minus: Complex64,
    pub c_pr: Complex64,
}

impl Default for ModelParams {
    /// Base operating point: kappa = delta_c = 1, Delta = 0.1, g0 = g_c/2,
    /// no modulation, omega = 2*omega_res, N = 1e4, no probe.
    fn default() -> Self {
        let mut p = ModelParams {
            kappa: 1.0,
            delta_c: 1.0,
            delta: 0.1,
            g0: 0.0,
            g1: 0.0,
            omega: 1.0,
            n_atoms: 1e4,
            probe: None,
        };
        p.g0 = 0.5 * p.critical_coupling();
        p.omega = 2.0 * p.resonance_frequency().expect("subcritical by construction");
        p
    }
}

impl ModelParams {
    /// Critical static coupling g_c (independent of g0).
    pub fn critical_coupling(&self) -> f64 {
        (self.delta * (self.delta_c * self.delta_c + self.kappa * self.kappa)
            / (4.0 * self.delta_c))
            .sqrt()
    }

    /// Soft-mode frequency omega_res; requires g0 < g_c.
    pub fn resonance_frequency(&self) -> Result<f64, ModelError> {
        let g_c = self.critical_coupling();
        if self.g0 >= g_c {
            return Err(ModelError::SupercriticalCoupling { g0: self.g0, g_c });
        }
        Ok(self.delta * (1.0 - (self.g0 / g_c).powi(2)).sqrt())
    }

    /// Time-averaged damping rate gamma0 of the unmodulated system.
    pub fn damping_rate_gamma0(&self) -> f64 {
        let d2k2 = self.delta_c * self.delta_c + self.kappa * self.kappa;
        4.0 * self.g0 * self.g0 * self.delta_c * self.kappa * self.delta / (d2k2 * d2k2)
    }

    /// Drive period T = 2*pi/omega.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// All derived scales at once; errors if g0 >= g_c.
    pub fn derive_scales(&self) -> Result<DerivedScales, ModelError> {
        Ok(DerivedScales {
            g_c: self.critical_coupling(),
            omega_res: self.resonance_frequency()?,
            gamma0: self.damping_rate_gamma0(),
            period_t: self.period(),
        })
    }

    /// Set g0 as a fraction of the critical coupling.
    pub fn with_coupling_ratio(mut self, g0_over_gc: f64) -> Self {
        self.g0 = g0_over_gc * self.critical_coupling();
        self
    }

    /// Set the modulation amplitude as a fraction of g0.
    pub fn with_modulation_ratio(mut self, g1_over_g0: f64) -> Self {
        self.g1 = g1_over_g0 * self.g0;
        self
    }

    /// Set the drive frequency in units of 2*omega_res (set g0 first).
    pub fn with_omega_ratio(mut self, omega_over_2res: f64) -> Result<Self, ModelError> {
        self.omega = omega_over_2res * 2.0 * self.resonance_frequency()?;
        Ok(self)
    }

    /// Attach a probe with frequency given as an offset from omega/2 in units
    /// of omega_res.
    pub fn with_probe_offset(mut self, eta0: f64, offset_over_res: f64, phi: f64) -> Result<Self, ModelError> {
        let omega_res = self.resonance_frequency()?;
        self.probe = Some(ProbeParams {
            eta0,
            omega_pr: 0.5 * self.omega + offset_over_res * omega_res,
            phi: phi.rem_euclid(TAU),
        });
        Ok(self)
    }

    /// Instantaneous coupling g(t) = g0 + g1 cos(omega t).
    pub fn coupling_g(&self, t: f64) -> f64 {
        self.g0 + self.g1 * (self.omega * t).cos()
    }

    /// Analytic derivative dg/dt = -g1 omega sin(omega t).
    pub fn coupling_g_dot(&self, t: f64) -> f64 {
        -self.g1 * self.omega * (self.omega * t).sin()
    }

    /// Coherent cavity-mediated coupling
    /// V0(t) = 2 delta_c g^2 / (delta_c^2 + kappa^2)
    ///       - 4 delta_c kappa g g' / (delta_c^2 + kappa^2)^2.
    pub fn coupling_v0(&self, t: f64) -> f64 {
        self.couplings_v01(t).0
    }

    /// Dissipative cavity-mediated coupling
    /// V1(t) = 4 delta_c Delta kappa g^2 / (delta_c^2 + kappa^2)^2.
    pub fn coupling_v1(&self, t: f64) -> f64 {
        self.couplings_v01(t).1
    }

    /// V0 and V1 together (single trig evaluation).
    #[inline]
    pub fn couplings_v01(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega * t).sin_cos();
        let g = self.g0 + self.g1 * c;
        let g_dot = -self.g1 * self.omega * s;
        let d2k2 = self.delta_c * self.delta_c + self.kappa * self.kappa;
        let v0 = 2.0 * self.delta_c * g * g / d2k2
            - 4.0 * self.delta_c * self.kappa * g * g_dot / (d2k2 * d2k2);
        let v1 = 4.0 * self.delta_c * self.delta * self.kappa * g * g / (d2k2 * d2k2);
        (v0, v1)
    }

    /// Probe coupling V2(t) = 2 g(t) eta0 (delta_c cos(Theta) + kappa sin(Theta))
    /// / (sqrt(N) (delta_c^2 + kappa^2)), with Theta = omega_pr t - phi.
    pub fn coupling_v2(&self, t: f64) -> Result<f64, ModelError> {
        let pr = self.probe.as_ref().ok_or(ModelError::NoProbe)?;
        Ok(self.coupling_v2_inner(pr, t))
    }

    #[inline]
    pub(crate) fn coupling_v2_inner(&self, pr: &ProbeParams, t: f64) -> f64 {
        let (s, c) = (pr.omega_pr * t - pr.phi).sin_cos();
        let d2k2 = self.delta_c * self.delta_c + self.kappa * self.kappa;
        2.0 * self.coupling_g(t) * pr.eta0 * (self.delta_c * c + self.kappa * s)
            / (self.n_atoms.sqrt() * d2k2)
    }

    /// Adiabatic closed forms of the elimination coefficients c_plus/c_minus
    /// (atomic sidebands) and c_pr (probe). Provided for cross-validation of
    /// the coupling functions; the homogeneous (transient) solutions are
    /// never included.
    pub fn elimination_coeffs(&self, t: f64) -> EliminationCoeffs {
        let d = Complex64::new(self.delta_c, -self.kappa);
        let d2 = d * d;
        let sqrt_n = self.n_atoms.sqrt();
        let g = self.coupling_g(t);
        let g_dot = self.coupling_g_dot(t);
        let a = g / d + Complex64::new(0.0, 1.0) * g_dot / d2;
        let b = self.delta * g / d2;
        let c_plus = -(a - b) / sqrt_n;
        let c_minus = -(a + b) / sqrt_n;
        let c_pr = match &self.probe {
            Some(pr) => {
                let eta = pr.eta0 * Complex64::new(0.0, -(pr.omega_pr * t - pr.phi)).exp();
                let eta_dot = Complex64::new(0.0, -pr.omega_pr) * eta;
                -eta / d - Complex64::new(0.0, 1.0) * eta_dot / d2
            }
            None => Complex64::new(0.0, 0.0),
        };
        EliminationCoeffs { c_plus, c_minus, c_pr }
    }

    /// Check hard invariants and return adiabatic-regime warnings.
    ///
    /// Hard violations (non-positive frequencies, negative couplings,
    /// supercritical g0, probe phase out of range) are errors. Violations of
    /// the timescale separation omega, Delta, omega_pr << delta_c, kappa by
    /// more than `regime_factor` are reported as warnings.
    pub fn validate(&self, regime_factor: f64) -> Result<Vec<RegimeWarning>, ModelError> {
        let positive: [(&'static str, f64); 5] = [
            ("kappa", self.kappa),
            ("delta_c", self.delta_c),
            ("delta", self.delta),
            ("omega", self.omega),
            ("n_atoms", self.n_atoms),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    constraint: "must be positive and finite",
                });
            }
        }
        let nonneg: [(&'static str, f64); 2] = [("g0", self.g0), ("g1", self.g1)];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    constraint: "must be non-negative and finite",
                });
            }
        }
        if let Some(pr) = &self.probe {
            if !(pr.eta0 >= 0.0) || !pr.eta0.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name: "probe.eta0",
                    value: pr.eta0,
                    constraint: "must be non-negative and finite",
                });
            }
            if !(0.0..TAU).contains(&pr.phi) {
                return Err(ModelError::InvalidParameter {
                    name: "probe.phi",
                    value: pr.phi,
                    constraint: "must lie in [0, 2*pi)",
                });
            }
            if !(pr.omega_pr > 0.0) || !pr.omega_pr.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name: "probe.omega_pr",
                    value: pr.omega_pr,
                    constraint: "must be positive and finite",
                });
            }
        }
        // omega_res must be real; this is the one hard derived constraint.
        self.resonance_frequency()?;

        let fast = self.delta_c.min(self.kappa);
        let limit = fast / regime_factor;
        let mut warnings = Vec::new();
        let mut check = |quantity: &'static str, value: f64| {
            if value > limit {
                warnings.push(RegimeWarning {
                    quantity,
                    value,
                    limit,
                    message: format!(
                        "{quantity} = {value} exceeds min(delta_c, kappa)/{regime_factor} = {limit}; \
                         cavity elimination may be inaccurate"
                    ),
                });
            }
        };
        check("omega", self.omega);
        check("delta", self.delta);
        if let Some(pr) = &self.probe {
            check("probe.omega_pr", pr.omega_pr);
        }
        Ok(warnings)
    }
}
