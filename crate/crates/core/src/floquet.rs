//! Linear stability of converged attractors: the time-dependent fluctuation
//! matrix, the Trotterized monodromy over 2T, and extraction of the complex
//! stability exponents.

use crate::meanfield::{
    find_attractor, normal_phase_state, tilted_seed, AttractorInfo, AttractorKind,
    AttractorOptions, SpinState, Trajectory, DEFAULT_TILT,
};
use crate::model::ModelParams;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error("n_cut = {0}: must be >= 256")]
    TooFewSlices(usize),
    #[error("cycle window spans {span}, expected 2T = {expected}")]
    BadCycleWindow { span: f64, expected: f64 },
    #[error("exponents not stabilized at n_cut = {n_cut}: delta = {delta:e} > tol = {tol:e}")]
    TooCoarse { n_cut: usize, delta: f64, tol: f64 },
    #[error("monodromy has non-finite entries")]
    NonFinite,
}

/// Fluctuation matrix Sigma(t) of the linearized probe-free flow, assembled
/// from the couplings and the attractor samples:
///
/// ```text
///        (      0                -Delta                0            )
/// Sigma = ( Delta + 4 V0 Jz/N     4 V1 Jz/N      4 V0 Jx/N + 4 V1 Jy/N )
///        (   -4 V0 Jy/N      -4 V0 Jx/N - 8 V1 Jy/N       0            )
/// ```
pub fn sigma_from_parts(delta: f64, n_atoms: f64, v0: f64, v1: f64, j: &SpinState) -> Matrix3<f64> {
    let inv_n = 1.0 / n_atoms;
    Matrix3::new(
        0.0,
        -delta,
        0.0,
        delta + 4.0 * v0 * j.jz * inv_n,
        4.0 * v1 * j.jz * inv_n,
        4.0 * v0 * j.jx * inv_n + 4.0 * v1 * j.jy * inv_n,
        -4.0 * v0 * j.jy * inv_n,
        -4.0 * v0 * j.jx * inv_n - 8.0 * v1 * j.jy * inv_n,
        0.0,
    )
}

/// Sigma(t) on a stored attractor window, with the attractor interpolated
/// periodically (exact at grid points).
pub fn sigma_at(p: &ModelParams, cycle: &Trajectory, t: f64) -> Matrix3<f64> {
    let (v0, v1) = p.couplings_v01(t);
    let j = cycle.sample_periodic(t);
    sigma_from_parts(p.delta, p.n_atoms, v0, v1, &j)
}

/// Matrix exponential of a 3x3 real matrix by scaling-and-squaring with a
/// fixed-order Taylor kernel (Horner form). Accurate to ~1e-14 relative for
/// any input; for the small-norm arguments of the Trotter product the
/// scaling step is a no-op.
pub fn expm3(a: &Matrix3<f64>) -> Matrix3<f64> {
    const THETA: f64 = 0.25;
    const ORDER: usize = 10;
    let norm = a.abs().max();
    let s = if norm > THETA {
        ((norm / THETA).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let b = a * 0.5f64.powi(s);
    let mut p = Matrix3::identity();
    for k in (1..=ORDER).rev() {
        p = Matrix3::identity() + (b * p) / k as f64;
    }
    for _ in 0..s {
        p = p * p;
    }
    p
}

/// Trotter product of exponentials over one window:
/// Phi = prod_{j = n_cut-1..0} exp(Sigma(tau_j) dtau), with the nodes at the
/// segment midpoints tau_j = t0 + (j + 1/2) dtau and left-multiplication in
/// time order. Midpoint sampling keeps the global error at O(dtau^2).
pub fn trotter_monodromy<F: Fn(f64) -> Matrix3<f64>>(
    sigma: F,
    t0: f64,
    span: f64,
    n_cut: usize,
) -> Matrix3<f64> {
    let dtau = span / n_cut as f64;
    let mut phi = Matrix3::identity();
    for j in 0..n_cut {
        let tau = t0 + (j as f64 + 0.5) * dtau;
        phi = expm3(&(sigma(tau) * dtau)) * phi;
    }
    phi
}

/// Monodromy matrix of the linearized flow over the 2T attractor window at a
/// fixed Trotter resolution.
pub fn monodromy(p: &ModelParams, cycle: &Trajectory, n_cut: usize) -> Result<Matrix3<f64>, FloquetError> {
    if n_cut < 256 {
        return Err(FloquetError::TooFewSlices(n_cut));
    }
    let two_t = 2.0 * p.period();
    if ((cycle.span() - two_t) / two_t).abs() > 1e-9 {
        return Err(FloquetError::BadCycleWindow { span: cycle.span(), expected: two_t });
    }
    let phi = trotter_monodromy(|tau| sigma_at(p, cycle, tau), cycle.t0, two_t, n_cut);
    if phi.iter().all(|x| x.is_finite()) {
        Ok(phi)
    } else {
        Err(FloquetError::NonFinite)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonodromySettings {
    /// Starting Trotter resolution per 2T.
    pub n_cut: usize,
    /// Absolute stabilization tolerance on gamma_fl, nu_fl and |mu_trivial|
    /// between successive doublings (units of kappa).
    pub tol: f64,
    /// Give up (TooCoarse) beyond this resolution.
    pub max_n_cut: usize,
}

impl Default for MonodromySettings {
    fn default() -> Self {
        MonodromySettings { n_cut: 4096, tol: 1e-8, max_n_cut: 1 << 18 }
    }
}

/// Monodromy with automatic doubling of the Trotter resolution until the
/// extracted exponents stabilize.
pub fn monodromy_stabilized(
    p: &ModelParams,
    cycle: &Trajectory,
    settings: &MonodromySettings,
) -> Result<(Matrix3<f64>, usize), FloquetError> {
    let two_t = 2.0 * p.period();
    let dir = mean_direction(cycle);
    let mut n = settings.n_cut.max(256);
    let mut raw = RawExponents::from_monodromy(&monodromy(p, cycle, n)?, two_t, Some(dir));
    loop {
        let n2 = 2 * n;
        if n2 > settings.max_n_cut {
            return Err(FloquetError::TooCoarse { n_cut: n, delta: f64::NAN, tol: settings.tol });
        }
        let phi2 = monodromy(p, cycle, n2)?;
        let raw2 = RawExponents::from_monodromy(&phi2, two_t, Some(dir));
        let delta = (raw2.gamma_fl - raw.gamma_fl)
            .abs()
            .max((raw2.nu_fl - raw.nu_fl).abs())
            .max((raw2.mu[raw2.trivial_index].norm() - raw.mu[raw.trivial_index].norm()).abs());
        if delta < settings.tol {
            return Ok((phi2, n2));
        }
        if n2 == settings.max_n_cut {
            return Err(FloquetError::TooCoarse { n_cut: n2, delta, tol: settings.tol });
        }
        n = n2;
        raw = raw2;
    }
}

/// Time-averaged attractor direction, used to disambiguate the trivial
/// (spin-length) mode when eigenvalues cluster near 1.
fn mean_direction(cycle: &Trajectory) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    for s in &cycle.samples {
        v += Vector3::new(s.jx, s.jy, s.jz);
    }
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        Vector3::new(0.0, 0.0, -1.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct RawExponents {
    mu: [Complex64; 3],
    lambda: [Complex64; 3],
    trivial_index: usize,
    trivial_defect: f64,
    gamma_fl: f64,
    nu_fl: f64,
    overdamped: bool,
    degenerate: bool,
}

impl RawExponents {
    fn from_monodromy(phi: &Matrix3<f64>, two_t: f64, dir: Option<Vector3<f64>>) -> RawExponents {
        let eig = phi.complex_eigenvalues();
        let mu = [eig[0], eig[1], eig[2]];
        let scale = mu.iter().map(|m| m.norm()).fold(1.0, f64::max);
        let is_real = |m: &Complex64| m.im.abs() <= 1e-12 * scale;

        // A real 3x3 matrix has one or three real eigenvalues. When a complex
        // pair is present, the real eigenvalue is the trivial (spin-length)
        // mode. With three reals, pick the one closest to 1 and break near
        // ties toward the eigenvector aligned with the attractor direction.
        let reals: Vec<usize> = (0..3).filter(|&i| is_real(&mu[i])).collect();
        let trivial_index = if reals.len() == 1 {
            reals[0]
        } else {
            let d: Vec<f64> = mu.iter().map(|m| (m - Complex64::new(1.0, 0.0)).norm()).collect();
            let d_min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let candidates: Vec<usize> =
                (0..3).filter(|&i| d[i] <= 4.0 * d_min + 1e-12).collect();
            match (candidates.len(), dir) {
                (1, _) | (_, None) => {
                    candidates
                        .into_iter()
                        .min_by(|&i, &j| d[i].total_cmp(&d[j]))
                        .unwrap()
                }
                (_, Some(dir)) => {
                    // Left eigenvector of Phi for a real mu is the null vector
                    // of (Phi^T - mu I); the trivial mode's left eigenvector
                    // points along the conserved-length gradient J0.
                    candidates
                        .into_iter()
                        .max_by(|&i, &j| {
                            let oi = left_eigvec_overlap(phi, mu[i].re, &dir);
                            let oj = left_eigvec_overlap(phi, mu[j].re, &dir);
                            oi.total_cmp(&oj)
                        })
                        .unwrap()
                }
            }
        };

        let lambda = [
            mu[0].ln() / two_t,
            mu[1].ln() / two_t,
            mu[2].ln() / two_t,
        ];
        let others: Vec<usize> = (0..3).filter(|&i| i != trivial_index).collect();
        let (a, b) = (others[0], others[1]);
        let pair_complex = !is_real(&mu[a]) && !is_real(&mu[b]);
        let (gamma_fl, nu_fl, overdamped) = if pair_complex {
            (
                0.5 * (lambda[a].re + lambda[b].re),
                0.5 * (lambda[a].im.abs() + lambda[b].im.abs()),
                false,
            )
        } else {
            // Two real multipliers: report the least stable one.
            let lead = if lambda[a].re >= lambda[b].re { a } else { b };
            (lambda[lead].re, lambda[lead].im.abs(), true)
        };

        let mut max_gap: f64 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                max_gap = max_gap.max((mu[i] - mu[j]).norm());
            }
        }
        RawExponents {
            mu,
            lambda,
            trivial_index,
            trivial_defect: (mu[trivial_index] - Complex64::new(1.0, 0.0)).norm(),
            gamma_fl,
            nu_fl,
            overdamped,
            degenerate: max_gap < 1e-8 * scale,
        }
    }
}

fn left_eigvec_overlap(phi: &Matrix3<f64>, mu: f64, dir: &Vector3<f64>) -> f64 {
    let m = phi.transpose() - Matrix3::identity() * mu;
    let rows = [
        Vector3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)]),
        Vector3::new(m[(1, 0)], m[(1, 1)], m[(1, 2)]),
        Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]),
    ];
    let mut best = Vector3::zeros();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = rows[i].cross(&rows[j]);
        if c.norm() > best.norm() {
            best = c;
        }
    }
    let norm = best.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (best.dot(dir) / norm).abs()
}

/// Stability classification of an attractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseClass {
    StableNp,
    StableDtc,
    Critical,
    Unstable,
}

/// Monodromy eigenvalues and the derived stability exponents.
///
/// Sign convention: `gamma_fl` < 0 means stable (decay), `nu_fl` >= 0 is the
/// excitation frequency reported on the principal branch of the 2T map,
/// i.e. in [0, omega/4].
#[derive(Debug, Clone, Serialize)]
pub struct FloquetResult {
    #[serde(skip)]
    pub monodromy: Matrix3<f64>,
    #[serde(skip)]
    pub mu: [Complex64; 3],
    #[serde(skip)]
    pub lambda: [Complex64; 3],
    pub trivial_index: usize,
    /// |mu_trivial - 1|; small for any converged attractor.
    pub trivial_defect: f64,
    pub gamma_fl: f64,
    pub nu_fl: f64,
    /// Set when the nontrivial multipliers are two reals instead of a
    /// complex-conjugate pair.
    pub overdamped: bool,
    /// Set when all three multipliers cluster within tolerance.
    pub degenerate: bool,
    pub classification: PhaseClass,
    /// Trotter resolution the monodromy was computed at.
    pub n_cut: usize,
}

/// Fraction of gamma0 used as the criticality band for classification.
pub const EPSILON_CRIT_RELATIVE: f64 = 1e-4;

/// Extract Floquet multipliers, exponents, and the phase classification from
/// a monodromy matrix computed around `attractor`.
pub fn extract_exponents(
    phi: &Matrix3<f64>,
    p: &ModelParams,
    attractor: &AttractorInfo,
) -> FloquetResult {
    let two_t = 2.0 * p.period();
    let dir = mean_direction(&attractor.cycle);
    let raw = RawExponents::from_monodromy(phi, two_t, Some(dir));
    let eps_crit = EPSILON_CRIT_RELATIVE * p.damping_rate_gamma0();
    let classification = if raw.gamma_fl > eps_crit {
        PhaseClass::Unstable
    } else if raw.gamma_fl >= -eps_crit {
        PhaseClass::Critical
    } else {
        match attractor.kind {
            AttractorKind::FixedPoint => PhaseClass::StableNp,
            _ => PhaseClass::StableDtc,
        }
    };
    FloquetResult {
        monodromy: *phi,
        mu: raw.mu,
        lambda: raw.lambda,
        trivial_index: raw.trivial_index,
        trivial_defect: raw.trivial_defect,
        gamma_fl: raw.gamma_fl,
        nu_fl: raw.nu_fl,
        overdamped: raw.overdamped,
        degenerate: raw.degenerate,
        classification,
        n_cut: 0,
    }
}

/// Attractor search seed used at a sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeedKind {
    /// Seeded exactly at the normal-phase fixed point.
    NormalPhase,
    /// Seeded with the small symmetry-breaking tilt.
    Tilted,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub attractor: AttractorOptions,
    pub monodromy: MonodromySettings,
    pub tilt: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            attractor: AttractorOptions::default(),
            monodromy: MonodromySettings::default(),
            tilt: DEFAULT_TILT,
        }
    }
}

/// One sweep-point result (the stored attractor window is dropped to keep
/// large sweeps small).
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub omega: f64,
    pub g1: f64,
    pub seed: SeedKind,
    pub kind: AttractorKind,
    pub residual: f64,
    pub order_param: f64,
    pub floquet: Option<FloquetResult>,
    pub error: Option<String>,
}

/// Floquet exponents over a cartesian (omega, g1) grid, from both the
/// normal-phase seed and the tilted seed at every point. Per-point failures
/// are recorded in the `error` field and the sweep continues. Points run in
/// parallel; results are returned in grid order (omega-major).
pub fn spectrum_sweep(
    base: &ModelParams,
    omega_values: &[f64],
    g1_values: &[f64],
    settings: &SweepSettings,
) -> Vec<SweepRecord> {
    let points: Vec<(f64, f64)> = omega_values
        .iter()
        .flat_map(|&w| g1_values.iter().map(move |&g1| (w, g1)))
        .collect();
    points
        .par_iter()
        .flat_map_iter(|&(omega, g1)| {
            let p = ModelParams { omega, g1, ..base.clone() };
            [SeedKind::NormalPhase, SeedKind::Tilted]
                .into_iter()
                .map(move |seed_kind| sweep_point(&p, omega, g1, seed_kind, settings))
        })
        .collect()
}

fn sweep_point(
    p: &ModelParams,
    omega: f64,
    g1: f64,
    seed_kind: SeedKind,
    settings: &SweepSettings,
) -> SweepRecord {
    let seed = match seed_kind {
        SeedKind::NormalPhase => normal_phase_state(p),
        SeedKind::Tilted => tilted_seed(p, settings.tilt),
    };
    let mut record = SweepRecord {
        omega,
        g1,
        seed: seed_kind,
        kind: AttractorKind::Unconverged,
        residual: f64::NAN,
        order_param: f64::NAN,
        floquet: None,
        error: None,
    };
    let info = match find_attractor(p, seed, &settings.attractor) {
        Ok(info) => info,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.kind = info.kind;
    record.residual = info.residual;
    record.order_param = info.order_param;
    if info.kind == AttractorKind::Unconverged {
        return record;
    }
    match monodromy_stabilized(p, &info.cycle, &settings.monodromy) {
        Ok((phi, n_cut)) => {
            let mut fl = extract_exponents(&phi, p, &info);
            fl.n_cut = n_cut;
            record.floquet = Some(fl);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}
