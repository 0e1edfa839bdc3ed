//! Semiclassical stochastic simulation of the full spin-plus-cavity system
//! with vacuum input noise and an optional weak probe drive.
//!
//! The cavity is kept explicitly as the quadratures a_x, a_p; spins are
//! noise-free while both quadratures receive additive sqrt(2 kappa) white
//! noise. Observables are symmetric-ordered: the photon number estimator is
//! (a_x^2 + a_p^2)/4 - 1/2.

use crate::meanfield::tilted_seed;
use crate::model::{ModelError, ModelParams, ProbeParams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WignerError {
    #[error("state left finite range near t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Full semiclassical state: collective spin plus cavity quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullState {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub ax: f64,
    pub ap: f64,
}

impl FullState {
    pub fn is_finite(&self) -> bool {
        self.jx.is_finite()
            && self.jy.is_finite()
            && self.jz.is_finite()
            && self.ax.is_finite()
            && self.ap.is_finite()
    }

    /// Symmetric-ordered photon number (a_x^2 + a_p^2)/4 - 1/2; the offset
    /// removes the vacuum contribution of the Wigner average.
    pub fn photon_number(&self) -> f64 {
        0.25 * (self.ax * self.ax + self.ap * self.ap) - 0.5
    }
}

/// Ensemble controls for stochastic runs.
///
/// `t_avg` should be an integer multiple of 2T; map drivers re-round it per
/// cell when omega varies along an axis. The atom number lives on
/// [`ModelParams`], not here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    /// Master seed; per-trajectory streams derive from (seed, cell, traj).
    pub seed: u64,
    pub noise_on: bool,
    pub dt: f64,
    /// Relaxation span before averaging starts.
    pub t_relax: f64,
    /// Averaging window (integer multiple of 2T).
    pub t_avg: f64,
    /// Deterministic J^x tilt (units of N) used when noise is off.
    pub tilt: f64,
}

impl EnsembleSpec {
    /// Defaults: 200 trajectories, dt = min(0.05/kappa, T/256),
    /// t_relax = 10/gamma0, t_avg = 20 * 2T, noise on.
    pub fn for_params(p: &ModelParams) -> EnsembleSpec {
        let gamma0 = p.damping_rate_gamma0();
        let t = p.period();
        EnsembleSpec {
            n_traj: 200,
            seed: 1,
            noise_on: true,
            dt: (0.05 / p.kappa).min(t / 256.0),
            t_relax: if gamma0 > 0.0 { 10.0 / gamma0 } else { 100.0 / p.kappa },
            t_avg: 20.0 * 2.0 * t,
            tilt: 0.0,
        }
    }

    pub fn validate(&self, p: &ModelParams) -> Result<(), WignerError> {
        if self.n_traj < 1 {
            return Err(WignerError::InvalidSpec("n_traj must be >= 1".into()));
        }
        let dt_max = (0.05 / p.kappa).min(p.period() / 256.0);
        if !(self.dt > 0.0) || self.dt > dt_max * (1.0 + 1e-9) {
            return Err(WignerError::InvalidSpec(format!(
                "dt = {} outside (0, min(0.05/kappa, T/256) = {}]",
                self.dt, dt_max
            )));
        }
        if self.t_relax < 0.0 || self.t_avg <= 0.0 {
            return Err(WignerError::InvalidSpec("t_relax >= 0 and t_avg > 0 required".into()));
        }
        let two_t = 2.0 * p.period();
        let ratio = self.t_avg / two_t;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return Err(WignerError::InvalidSpec(format!(
                "t_avg = {} is not a positive integer multiple of 2T = {}",
                self.t_avg, two_t
            )));
        }
        Ok(())
    }

    /// Copy with t_avg re-rounded to the nearest positive multiple of 2T.
    pub fn align_t_avg(&self, p: &ModelParams) -> EnsembleSpec {
        let two_t = 2.0 * p.period();
        let periods = (self.t_avg / two_t).round().max(1.0);
        EnsembleSpec { t_avg: periods * two_t, ..*self }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trajectory random stream.
///
/// The ChaCha8 key is derived from (master seed, cell index, trajectory
/// index) by three rounds of SplitMix64-style mixing expanded to 32 bytes,
/// so every (cell, traj) pair gets an independent stream and results
/// reproduce across machines and thread counts.
pub fn traj_rng(master_seed: u64, cell: u64, traj: u64) -> ChaCha8Rng {
    let mut s = mix(master_seed ^ 0x243F_6A88_85A3_08D3);
    s = mix(s ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s = mix(s ^ traj.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut key = [0u8; 32];
    let mut x = s;
    for chunk in key.chunks_exact_mut(8) {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        chunk.copy_from_slice(&mix(x).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Initial-state sampling.
///
/// With noise on, the quadratures are standard normal, J^x and J^y are
/// normal with variance N/4, and J^z = -N/2 exactly (its variance condition
/// is <(J^z)^2> = <J^z>^2). Draw order: a_x, a_p, J^x, J^y. With noise off,
/// the deterministic tilted state is returned and the stream is untouched.
pub fn sample_initial<R: Rng>(p: &ModelParams, spec: &EnsembleSpec, rng: &mut R) -> FullState {
    if !spec.noise_on {
        let s = tilted_seed(p, spec.tilt);
        return FullState { jx: s.jx, jy: s.jy, jz: s.jz, ax: 0.0, ap: 0.0 };
    }
    let n = p.n_atoms;
    let sd_spin = 0.5 * n.sqrt();
    let ax: f64 = rng.sample(StandardNormal);
    let ap: f64 = rng.sample(StandardNormal);
    let jx: f64 = rng.sample::<f64, _>(StandardNormal) * sd_spin;
    let jy: f64 = rng.sample::<f64, _>(StandardNormal) * sd_spin;
    FullState { jx, jy, jz: -0.5 * n, ax, ap }
}

struct Sde<'a> {
    p: &'a ModelParams,
    probe: Option<ProbeParams>,
    inv_sqrt_n: f64,
}

impl<'a> Sde<'a> {
    fn new(p: &'a ModelParams, probe_on: bool) -> Result<Sde<'a>, WignerError> {
        let probe = if probe_on {
            Some(*p.probe.as_ref().ok_or(ModelError::NoProbe)?)
        } else {
            None
        };
        Ok(Sde { p, probe, inv_sqrt_n: 1.0 / p.n_atoms.sqrt() })
    }

    #[inline]
    fn drift(&self, t: f64, s: &FullState) -> FullState {
        let p = self.p;
        let g = p.g0 + p.g1 * (p.omega * t).cos();
        let (eta_x, eta_p) = match &self.probe {
            Some(pr) => {
                let (sn, cs) = (pr.omega_pr * t - pr.phi).sin_cos();
                (-2.0 * pr.eta0 * sn, -2.0 * pr.eta0 * cs)
            }
            None => (0.0, 0.0),
        };
        let gx = g * self.inv_sqrt_n;
        FullState {
            ax: -p.kappa * s.ax + p.delta_c * s.ap + eta_x,
            ap: -p.kappa * s.ap - p.delta_c * s.ax - 4.0 * gx * s.jx + eta_p,
            jx: -p.delta * s.jy,
            jy: p.delta * s.jx - 2.0 * gx * s.ax * s.jz,
            jz: 2.0 * gx * s.ax * s.jy,
        }
    }

    /// Euler-Maruyama step: deterministic drift plus additive
    /// sqrt(2 kappa dt) noise on each quadrature (spins noise-free).
    ///
    /// The spin update is projected back to its pre-step length. Only the
    /// cavity carries noise, so the spin length is an exact invariant of the
    /// stochastic flow; without the projection the Euler radial error grows
    /// secularly (percent-level per hundred drive periods at dt = 0.05) and
    /// inflates every intensity observable.
    #[inline]
    fn step<R: Rng>(&self, t: f64, dt: f64, s: &FullState, noise_on: bool, rng: &mut R) -> FullState {
        let d = self.drift(t, s);
        let (nx, np_) = if noise_on {
            let amp = (2.0 * self.p.kappa * dt).sqrt();
            let nx: f64 = rng.sample(StandardNormal);
            let np_: f64 = rng.sample(StandardNormal);
            (amp * nx, amp * np_)
        } else {
            (0.0, 0.0)
        };
        let (jx, jy, jz) = (s.jx + d.jx * dt, s.jy + d.jy * dt, s.jz + d.jz * dt);
        let l2_old = s.jx * s.jx + s.jy * s.jy + s.jz * s.jz;
        let l2_new = jx * jx + jy * jy + jz * jz;
        let scale = if l2_new > 0.0 { (l2_old / l2_new).sqrt() } else { 1.0 };
        FullState {
            ax: s.ax + d.ax * dt + nx,
            ap: s.ap + d.ap * dt + np_,
            jx: jx * scale,
            jy: jy * scale,
            jz: jz * scale,
        }
    }
}

/// Single Euler-Maruyama step (probe and noise controlled by flags).
pub fn sde_step<R: Rng>(
    p: &ModelParams,
    s: &FullState,
    t: f64,
    dt: f64,
    rng: &mut R,
    probe_on: bool,
    noise_on: bool,
) -> Result<FullState, WignerError> {
    let sde = Sde::new(p, probe_on)?;
    let next = sde.step(t, dt, s, noise_on, rng);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(WignerError::NonFinite { t })
    }
}

/// Relax, then time-average the photon number over `t_avg` for one
/// trajectory starting from `init`.
fn run_intensity<R: Rng>(
    sde: &Sde,
    spec: &EnsembleSpec,
    init: FullState,
    rng: &mut R,
) -> Result<f64, WignerError> {
    let dt = spec.dt;
    let steps_relax = (spec.t_relax / dt).round() as u64;
    let steps_avg = ((spec.t_avg / dt).round() as u64).max(1);
    let mut s = init;
    for j in 0..steps_relax {
        s = sde.step(j as f64 * dt, dt, &s, spec.noise_on, rng);
        if j % 1024 == 0 && !s.is_finite() {
            return Err(WignerError::NonFinite { t: j as f64 * dt });
        }
    }
    let t1 = steps_relax as f64 * dt;
    let mut acc = 0.0;
    for j in 0..steps_avg {
        s = sde.step(t1 + j as f64 * dt, dt, &s, spec.noise_on, rng);
        acc += s.photon_number();
    }
    if !s.is_finite() || !acc.is_finite() {
        return Err(WignerError::NonFinite { t: t1 + spec.t_avg });
    }
    Ok(acc / steps_avg as f64)
}

/// Time-averaged photon number: ensemble mean and standard error.
pub fn intensity_tav(
    p: &ModelParams,
    spec: &EnsembleSpec,
    probe_on: bool,
) -> Result<(f64, f64), WignerError> {
    spec.validate(p)?;
    let sde = Sde::new(p, probe_on)?;
    let values: Vec<f64> = (0..spec.n_traj)
        .map(|k| {
            let mut rng = traj_rng(spec.seed, 0, k as u64);
            let init = sample_initial(p, spec, &mut rng);
            run_intensity(&sde, spec, init, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    Ok(mean_stderr(&values))
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Grid of time-averaged intensity differences (probe on minus probe off).
#[derive(Debug, Clone, Serialize)]
pub struct ProbeResponseMap {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major over (axis1, axis2); NaN marks per-cell failures.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
}

impl ProbeResponseMap {
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let idx = i * self.axis2.len() + j;
        (self.values[idx], self.stderr[idx])
    }
}

/// One (cell, trajectory) pair, probe on and off with common random numbers:
/// the same stream supplies initial conditions and noise for both legs, so
/// eta0 = 0 gives an exactly zero difference.
fn run_pair(
    p: &ModelParams,
    spec: &EnsembleSpec,
    cell: u64,
    traj: u64,
) -> Result<f64, WignerError> {
    let mut rng = traj_rng(spec.seed, cell, traj);
    let init = sample_initial(p, spec, &mut rng);
    let mut rng_off = rng.clone();
    let sde_on = Sde::new(p, true)?;
    let sde_off = Sde::new(p, false)?;
    let i_pr = run_intensity(&sde_on, spec, init, &mut rng)?;
    let i_0 = run_intensity(&sde_off, spec, init, &mut rng_off)?;
    Ok(i_pr - i_0)
}

fn reduce_cells(
    cells: &[ModelParams],
    specs: &[EnsembleSpec],
    n_traj: usize,
) -> (Vec<f64>, Vec<f64>) {
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..n_traj).map(move |k| (c, k)))
        .collect();
    let diffs: Vec<Result<f64, WignerError>> = jobs
        .par_iter()
        .map(|&(c, k)| run_pair(&cells[c], &specs[c], c as u64, k as u64))
        .collect();
    let mut values = Vec::with_capacity(cells.len());
    let mut stderr = Vec::with_capacity(cells.len());
    for c in 0..cells.len() {
        let cell_vals: Vec<f64> = diffs[c * n_traj..(c + 1) * n_traj]
            .iter()
            .filter_map(|r| r.as_ref().ok().copied())
            .collect();
        if cell_vals.len() == n_traj {
            let (m, se) = mean_stderr(&cell_vals);
            values.push(m);
            stderr.push(se);
        } else {
            values.push(f64::NAN);
            stderr.push(f64::NAN);
        }
    }
    (values, stderr)
}

/// Probe-response map over (omega, probe offset): the probe frequency at
/// each cell is omega/2 + offset, with offsets given in absolute frequency
/// units. Per-cell RNG streams are keyed by the cell's row-major index;
/// matched streams pair the probe-on and probe-off legs.
pub fn probe_response_map(
    base: &ModelParams,
    omega_values: &[f64],
    pr_offsets: &[f64],
    spec: &EnsembleSpec,
) -> Result<ProbeResponseMap, WignerError> {
    let template = base.probe.as_ref().ok_or(ModelError::NoProbe)?;
    let mut cells = Vec::with_capacity(omega_values.len() * pr_offsets.len());
    let mut specs = Vec::with_capacity(cells.capacity());
    for &omega in omega_values {
        for &off in pr_offsets {
            let p = ModelParams {
                omega,
                probe: Some(ProbeParams { omega_pr: 0.5 * omega + off, ..*template }),
                ..base.clone()
            };
            let aligned = spec.align_t_avg(&p);
            aligned.validate(&p)?;
            specs.push(aligned);
            cells.push(p);
        }
    }
    let (values, stderr) = reduce_cells(&cells, &specs, spec.n_traj);
    Ok(ProbeResponseMap {
        axis1: omega_values.to_vec(),
        axis2: pr_offsets.to_vec(),
        values,
        stderr,
        n_traj: spec.n_traj,
    })
}

/// Probe-phase scan at fixed omega: map over (phi, probe offset).
pub fn phase_scan(
    base: &ModelParams,
    pr_offsets: &[f64],
    phi_values: &[f64],
    spec: &EnsembleSpec,
) -> Result<ProbeResponseMap, WignerError> {
    let template = base.probe.as_ref().ok_or(ModelError::NoProbe)?;
    let omega = base.omega;
    let mut cells = Vec::with_capacity(phi_values.len() * pr_offsets.len());
    let mut specs = Vec::with_capacity(cells.capacity());
    for &phi in phi_values {
        for &off in pr_offsets {
            let p = ModelParams {
                probe: Some(ProbeParams {
                    omega_pr: 0.5 * omega + off,
                    phi: phi.rem_euclid(TAU),
                    ..*template
                }),
                ..base.clone()
            };
            let aligned = spec.align_t_avg(&p);
            aligned.validate(&p)?;
            specs.push(aligned);
            cells.push(p);
        }
    }
    let (values, stderr) = reduce_cells(&cells, &specs, spec.n_traj);
    Ok(ProbeResponseMap {
        axis1: phi_values.to_vec(),
        axis2: pr_offsets.to_vec(),
        values,
        stderr,
        n_traj: spec.n_traj,
    })
}

/// Single-trajectory trace from t = 0 (no relaxation), sampled every
/// `stride` steps; used for cross-checks against the mean-field dynamics.
pub fn simulate_trace(
    p: &ModelParams,
    spec: &EnsembleSpec,
    probe_on: bool,
    t_span: f64,
    stride: usize,
) -> Result<Vec<(f64, FullState)>, WignerError> {
    let sde = Sde::new(p, probe_on)?;
    let mut rng = traj_rng(spec.seed, 0, 0);
    let mut s = sample_initial(p, spec, &mut rng);
    let dt = spec.dt;
    let steps = (t_span / dt).round().max(1.0) as u64;
    let stride = stride.max(1) as u64;
    let mut out = Vec::with_capacity((steps / stride + 2) as usize);
    out.push((0.0, s));
    for j in 0..steps {
        s = sde.step(j as f64 * dt, dt, &s, spec.noise_on, &mut rng);
        if !s.is_finite() {
            return Err(WignerError::NonFinite { t: (j + 1) as f64 * dt });
        }
        if (j + 1) % stride == 0 {
            out.push(((j + 1) as f64 * dt, s));
        }
    }
    Ok(out)
}
