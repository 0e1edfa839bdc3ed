//! Analytic cross-checks and post-processing: the Bogoliubov excitation
//! frequency of the normal phase, Lorentzian lineshape overlays
//! parameterized by the Floquet exponents, and branch overlays for
//! co-plotting with probe-response maps.

use crate::floquet::FloquetResult;
use crate::model::ModelParams;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    /// An inverse-hyperbolic argument left its domain; expected near and
    /// inside the superradiant window. Reported, never clamped.
    #[error("{angle} argument {argument} outside its domain")]
    OutsideDomain { angle: &'static str, argument: f64 },
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
}

/// Coefficients and angles of the two-step Bogoliubov diagonalization of the
/// normal-phase quadratic Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BogoliubovParams {
    /// A = g0^2 delta_c / (delta_c^2 + kappa^2).
    pub a_coef: f64,
    /// B = 2 g0 g1 delta_c / (delta_c^2 + kappa^2).
    pub b_coef: f64,
    /// First rotation angle, arcoth(Delta/(2A) - 1).
    pub theta_bt: f64,
    /// Second rotation angle, artanh(B/(omega_res - omega/2)).
    pub phi_bt: f64,
    /// Predicted oscillation frequency of the probe-driven excitation.
    pub epsilon: f64,
}

fn arcoth(x: f64) -> f64 {
    0.5 * ((x + 1.0) / (x - 1.0)).ln()
}

/// Bogoliubov parameters and the predicted excitation frequency
///
/// epsilon = -B (cosh 2theta + sinh 2theta) sinh 2phi
///           + (omega_res - omega/2) cosh 2phi.
///
/// Valid only in the normal phase: |Delta/(2A) - 1| > 1 and
/// |B/(omega_res - omega/2)| < 1 are required.
pub fn bogoliubov_params(p: &ModelParams) -> Result<BogoliubovParams, AnalysisError> {
    let d2k2 = p.delta_c * p.delta_c + p.kappa * p.kappa;
    let a_coef = p.g0 * p.g0 * p.delta_c / d2k2;
    let b_coef = 2.0 * p.g0 * p.g1 * p.delta_c / d2k2;
    let omega_res = p
        .resonance_frequency()
        .map_err(|_| AnalysisError::OutsideDomain { angle: "theta_bt", argument: f64::NAN })?;

    let theta_arg = p.delta / (2.0 * a_coef) - 1.0;
    if !(theta_arg.abs() > 1.0) || !theta_arg.is_finite() {
        return Err(AnalysisError::OutsideDomain { angle: "theta_bt", argument: theta_arg });
    }
    let theta_bt = arcoth(theta_arg);

    let detuning = omega_res - 0.5 * p.omega;
    let phi_arg = b_coef / detuning;
    if !(phi_arg.abs() < 1.0) || !phi_arg.is_finite() {
        return Err(AnalysisError::OutsideDomain { angle: "phi_bt", argument: phi_arg });
    }
    let phi_bt = phi_arg.atanh();

    let epsilon = -b_coef * ((2.0 * theta_bt).cosh() + (2.0 * theta_bt).sinh())
        * (2.0 * phi_bt).sinh()
        + detuning * (2.0 * phi_bt).cosh();
    Ok(BogoliubovParams { a_coef, b_coef, theta_bt, phi_bt, epsilon })
}

/// Just the predicted excitation frequency.
pub fn bogoliubov_epsilon(p: &ModelParams) -> Result<f64, AnalysisError> {
    Ok(bogoliubov_params(p)?.epsilon)
}

/// Which side of omega/2 a lineshape or overlay refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// Lorentzian lineshape with center and width fixed by the Floquet
/// exponents and only the amplitude fitted.
#[derive(Debug, Clone, Serialize)]
pub struct Lineshape {
    /// Center frequency offset from omega/2 (= nu_fl on the chosen branch).
    pub center: f64,
    /// Half width at half maximum (= |gamma_fl|).
    pub width: f64,
    /// Fitted amplitude; positive for spikes, negative for dips.
    pub amplitude: f64,
    /// The (omega_pr, value) samples the amplitude was fitted to.
    pub samples: Vec<(f64, f64)>,
}

impl Lineshape {
    /// Unit-amplitude model value at a probe frequency.
    pub fn unit_model(&self, p: &ModelParams, branch: Branch, omega_pr: f64) -> f64 {
        let c = 0.5 * p.omega + branch.sign() * self.center;
        let g2 = self.width * self.width;
        g2 / ((omega_pr - c) * (omega_pr - c) + g2)
    }

    /// Fitted model value at a probe frequency.
    pub fn model(&self, p: &ModelParams, branch: Branch, omega_pr: f64) -> f64 {
        self.amplitude * self.unit_model(p, branch, omega_pr)
    }

    /// RMS misfit of the stored samples against the fitted model.
    pub fn residual_rms(&self, p: &ModelParams, branch: Branch) -> f64 {
        let n = self.samples.len() as f64;
        let ss: f64 = self
            .samples
            .iter()
            .map(|&(x, y)| {
                let r = y - self.model(p, branch, x);
                r * r
            })
            .sum();
        (ss / n).sqrt()
    }
}

/// Fit the amplitude of L(omega_pr) = A g^2 / ((omega_pr - omega/2 -+ nu)^2
/// + g^2) with g = |gamma_fl| by linear least squares; A is the only free
/// parameter. The samples must bracket the line center.
pub fn lorentzian_overlay(
    fl: &FloquetResult,
    p: &ModelParams,
    branch: Branch,
    samples: &[(f64, f64)],
) -> Result<Lineshape, AnalysisError> {
    if fl.gamma_fl == 0.0 || !fl.gamma_fl.is_finite() {
        return Err(AnalysisError::IllConditioned(format!(
            "linewidth |gamma_fl| = {} is not positive",
            fl.gamma_fl.abs()
        )));
    }
    if samples.len() < 2 {
        return Err(AnalysisError::IllConditioned("need at least two samples".into()));
    }
    let ls = Lineshape {
        center: fl.nu_fl,
        width: fl.gamma_fl.abs(),
        amplitude: 1.0,
        samples: samples.to_vec(),
    };
    let c = 0.5 * p.omega + branch.sign() * fl.nu_fl;
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(lo < c && c < hi) {
        return Err(AnalysisError::IllConditioned(format!(
            "samples [{lo}, {hi}] do not bracket the line center {c}"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in samples {
        let m = ls.unit_model(p, branch, x);
        num += m * y;
        den += m * m;
    }
    if den == 0.0 {
        return Err(AnalysisError::IllConditioned("degenerate design matrix".into()));
    }
    Ok(Lineshape { amplitude: num / den, ..ls })
}

/// Overlay points (omega, omega/2 +- nu_fl) for co-plotting with
/// probe-response maps; order-preserving in omega.
pub fn branch_overlay(sweep: &[(f64, FloquetResult)], branch: Branch) -> Vec<(f64, f64)> {
    sweep
        .iter()
        .map(|(omega, fl)| (*omega, 0.5 * omega + branch.sign() * fl.nu_fl))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{extract_exponents, monodromy_stabilized, MonodromySettings};
    use crate::meanfield::{find_attractor, normal_phase_state, AttractorOptions};
    use approx::assert_relative_eq;

    fn np_params(omega_ratio: f64) -> ModelParams {
        ModelParams::default()
            .with_modulation_ratio(0.6)
            .with_omega_ratio(omega_ratio)
            .unwrap()
    }

    #[test]
    fn a_coefficient_closed_form_at_half_critical() {
        // g0 = g_c/2 makes A = Delta/16 exactly.
        let p = np_params(0.8);
        let b = bogoliubov_params(&p).unwrap();
        assert_relative_eq!(b.a_coef, p.delta / 16.0, max_relative = 1e-12);
        assert_relative_eq!(b.b_coef, 2.0 * b.a_coef * 0.6, max_relative = 1e-12);
    }

    #[test]
    fn unmodulated_epsilon_is_the_detuning() {
        let mut p = np_params(0.8);
        p.g1 = 0.0;
        let s = p.derive_scales().unwrap();
        let b = bogoliubov_params(&p).unwrap();
        assert_eq!(b.b_coef, 0.0);
        assert_eq!(b.phi_bt, 0.0);
        assert_relative_eq!(b.epsilon, s.omega_res - 0.5 * p.omega, max_relative = 1e-12);
    }

    #[test]
    fn epsilon_parity_under_detuning_and_pump_flip() {
        // In the closed form, flipping the detuning d = omega_res - omega/2
        // together with B flips the sign of epsilon (sinh is odd, cosh even).
        let eval = |b: f64, theta: f64, d: f64| {
            let phi = (b / d).atanh();
            -b * ((2.0 * theta).cosh() + (2.0 * theta).sinh()) * (2.0 * phi).sinh()
                + d * (2.0 * phi).cosh()
        };
        let p = np_params(0.8);
        let s = p.derive_scales().unwrap();
        let bp = bogoliubov_params(&p).unwrap();
        let d = s.omega_res - 0.5 * p.omega;
        assert_relative_eq!(eval(bp.b_coef, bp.theta_bt, d), bp.epsilon, max_relative = 1e-12);
        for k in 1..10 {
            let d = k as f64 * 0.2 * bp.b_coef + 1.1 * bp.b_coef;
            assert_relative_eq!(
                eval(-bp.b_coef, bp.theta_bt, -d),
                -eval(bp.b_coef, bp.theta_bt, d),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn domain_violations_are_reported() {
        // At resonance omega/2 = omega_res the phi argument diverges.
        let p = np_params(1.0);
        assert!(matches!(
            bogoliubov_params(&p),
            Err(AnalysisError::OutsideDomain { angle: "phi_bt", .. })
        ));
        // Inside the window |B/d| > 1.
        let p = np_params(1.02);
        assert!(matches!(
            bogoliubov_params(&p),
            Err(AnalysisError::OutsideDomain { angle: "phi_bt", .. })
        ));
    }

    fn np_floquet(p: &ModelParams) -> FloquetResult {
        let info = find_attractor(p, normal_phase_state(p), &AttractorOptions::default()).unwrap();
        let (phi, _) = monodromy_stabilized(p, &info.cycle, &MonodromySettings::default()).unwrap();
        extract_exponents(&phi, p, &info)
    }

    #[test]
    fn synthetic_lorentzian_amplitude_recovered() {
        let p = np_params(0.8);
        let fl = np_floquet(&p);
        let c = 0.5 * p.omega + fl.nu_fl;
        let g = fl.gamma_fl.abs();
        let a_true = -3.7;
        let samples: Vec<(f64, f64)> = (0..41)
            .map(|i| {
                let x = c + (i as f64 - 20.0) / 20.0 * 6.0 * g;
                (x, a_true * g * g / ((x - c) * (x - c) + g * g))
            })
            .collect();
        let fit = lorentzian_overlay(&fl, &p, Branch::Upper, &samples).unwrap();
        assert_relative_eq!(fit.amplitude, a_true, max_relative = 1e-10);
        assert!(fit.residual_rms(&p, Branch::Upper) < 1e-12);

        // Residual is non-increasing with sample density on model data.
        let dense: Vec<(f64, f64)> = (0..401)
            .map(|i| {
                let x = c + (i as f64 - 200.0) / 200.0 * 6.0 * g;
                (x, a_true * g * g / ((x - c) * (x - c) + g * g))
            })
            .collect();
        let fit_dense = lorentzian_overlay(&fl, &p, Branch::Upper, &dense).unwrap();
        assert!(
            fit_dense.residual_rms(&p, Branch::Upper)
                <= fit.residual_rms(&p, Branch::Upper) + 1e-12
        );
    }

    #[test]
    fn non_bracketing_samples_are_rejected() {
        let p = np_params(0.8);
        let fl = np_floquet(&p);
        let c = 0.5 * p.omega + fl.nu_fl;
        let samples: Vec<(f64, f64)> = (1..10).map(|i| (c + i as f64 * 1e-3, 0.1)).collect();
        assert!(matches!(
            lorentzian_overlay(&fl, &p, Branch::Upper, &samples),
            Err(AnalysisError::IllConditioned(_))
        ));
    }

    #[test]
    fn branch_overlay_points() {
        let p = ModelParams { omega: 0.4, g1: 0.0, ..ModelParams::default() };
        let s = p.derive_scales().unwrap();
        let fl = np_floquet(&p);
        let overlay = branch_overlay(&[(p.omega, fl.clone())], Branch::Upper);
        let expected = 0.5 * p.omega + (s.omega_res.powi(2) - s.gamma0.powi(2)).sqrt();
        assert_relative_eq!(overlay[0].1, expected, max_relative = 1e-7);
        let lower = branch_overlay(&[(p.omega, fl)], Branch::Lower);
        let expected_lo = 0.5 * p.omega - (s.omega_res.powi(2) - s.gamma0.powi(2)).sqrt();
        assert_relative_eq!(lower[0].1, expected_lo, max_relative = 1e-7);
        assert!(branch_overlay(&[], Branch::Upper).is_empty());
    }

    #[test]
    fn overlay_preserves_omega_order() {
        let p = np_params(0.75);
        let fl = np_floquet(&p);
        let sweep: Vec<(f64, FloquetResult)> =
            (0..5).map(|i| (0.1 + 0.01 * i as f64, fl.clone())).collect();
        let overlay = branch_overlay(&sweep, Branch::Upper);
        for w in overlay.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }
}
