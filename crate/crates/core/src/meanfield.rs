//! Atom-only mean-field dynamics: the nonlinear spin equations, a fixed-step
//! RK4 integrator, attractor detection, order parameter, and hysteresis scans.
//!
//! The spin state (J^x, J^y, J^z) is extensive (scales with N); its length
//! L^2 = (J^x)^2 + (J^y)^2 + (J^z)^2 is conserved by the flow, with and
//! without probe.

use crate::model::{ModelError, ModelParams, ProbeParams};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("state left finite range near t = {t}")]
    NonFinite { t: f64 },
    #[error("n_cut_per_2t = {0}: must be even and >= 64")]
    StepCount(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mean-field collective spin expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl SpinState {
    pub fn length_sq(&self) -> f64 {
        self.jx * self.jx + self.jy * self.jy + self.jz * self.jz
    }

    pub fn dot(&self, o: &SpinState) -> f64 {
        self.jx * o.jx + self.jy * o.jy + self.jz * o.jz
    }

    /// Largest component-wise absolute difference.
    pub fn max_abs_diff(&self, o: &SpinState) -> f64 {
        (self.jx - o.jx)
            .abs()
            .max((self.jy - o.jy).abs())
            .max((self.jz - o.jz).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.jx.is_finite() && self.jy.is_finite() && self.jz.is_finite()
    }
}

impl Add for SpinState {
    type Output = SpinState;
    fn add(self, o: SpinState) -> SpinState {
        SpinState { jx: self.jx + o.jx, jy: self.jy + o.jy, jz: self.jz + o.jz }
    }
}

impl Sub for SpinState {
    type Output = SpinState;
    fn sub(self, o: SpinState) -> SpinState {
        SpinState { jx: self.jx - o.jx, jy: self.jy - o.jy, jz: self.jz - o.jz }
    }
}

impl Mul<f64> for SpinState {
    type Output = SpinState;
    fn mul(self, k: f64) -> SpinState {
        SpinState { jx: self.jx * k, jy: self.jy * k, jz: self.jz * k }
    }
}

/// Exact fixed point with all atoms in the lower level and no coherence.
pub fn normal_phase_state(p: &ModelParams) -> SpinState {
    SpinState { jx: 0.0, jy: 0.0, jz: -0.5 * p.n_atoms }
}

/// Default symmetry-breaking tilt used to seed searches away from the
/// normal-phase fixed point.
pub const DEFAULT_TILT: f64 = 1e-3;

/// Seed with J^x = eps*N, J^y = 0, normalized to spin length N/2.
pub fn tilted_seed(p: &ModelParams, eps: f64) -> SpinState {
    let n = p.n_atoms;
    let jx = eps * n;
    let jz = -(0.25 * n * n - jx * jx).max(0.0).sqrt();
    SpinState { jx, jy: 0.0, jz }
}

#[inline]
fn rhs_terms(delta: f64, inv_n: f64, v0: f64, v1: f64, v2: f64, s: &SpinState) -> SpinState {
    SpinState {
        jx: -delta * s.jy,
        jy: delta * s.jx
            + 4.0 * v0 * s.jx * s.jz * inv_n
            + 4.0 * v1 * s.jy * s.jz * inv_n
            + 2.0 * v2 * s.jz,
        jz: -4.0 * v0 * s.jx * s.jy * inv_n - 4.0 * v1 * s.jy * s.jy * inv_n - 2.0 * v2 * s.jy,
    }
}

/// Time derivative of the mean-field spin state.
///
/// With `with_probe` set the V2 drive terms are kept (requires probe
/// parameters); otherwise they are dropped.
pub fn rhs(p: &ModelParams, t: f64, s: &SpinState, with_probe: bool) -> Result<SpinState, ModelError> {
    let (v0, v1) = p.couplings_v01(t);
    let v2 = if with_probe { p.coupling_v2(t)? } else { 0.0 };
    Ok(rhs_terms(p.delta, 1.0 / p.n_atoms, v0, v1, v2, s))
}

/// Uniformly sampled trajectory with drive-phase bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// Time of the first sample; fixes the drive phase.
    pub t0: f64,
    /// Sampling step; equals 2T/n_cut for an even integer n_cut.
    pub dt: f64,
    pub samples: Vec<SpinState>,
    /// Snapshot of the parameters the trajectory was generated with.
    pub params: ModelParams,
}

impl Trajectory {
    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn span(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Periodic Catmull-Rom interpolation of the stored window (exact at
    /// grid points). The last sample is treated as the wrap-around point.
    pub fn sample_periodic(&self, t: f64) -> SpinState {
        let n = self.samples.len() - 1;
        let x = ((t - self.t0) / self.dt).rem_euclid(n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let u = x - i as f64;
        let at = |k: isize| -> &SpinState {
            let idx = (i as isize + k).rem_euclid(n as isize) as usize;
            &self.samples[idx]
        };
        let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
        let cr = |a: f64, b: f64, c: f64, d: f64| -> f64 {
            0.5 * (2.0 * b
                + (c - a) * u
                + (2.0 * a - 5.0 * b + 4.0 * c - d) * u * u
                + (3.0 * b - a - 3.0 * c + d) * u * u * u)
        };
        SpinState {
            jx: cr(p0.jx, p1.jx, p2.jx, p3.jx),
            jy: cr(p0.jy, p1.jy, p2.jy, p3.jy),
            jz: cr(p0.jz, p1.jz, p2.jz, p3.jz),
        }
    }

    /// CSV export with columns t, jx, jy, jz (spins normalized by N).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.params.n_atoms;
        writeln!(w, "t,jx,jy,jz")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{},{}", self.time_at(i), s.jx / n, s.jy / n, s.jz / n)?;
        }
        Ok(())
    }
}

/// V0/V1 tabulated on the half-step grid of one drive period. The analytic
/// couplings are exactly T-periodic, so one period of table indexed modulo
/// its length reproduces the drive for arbitrarily long runs without phase
/// drift.
struct DriveTable {
    v0: Vec<f64>,
    v1: Vec<f64>,
}

impl DriveTable {
    /// `n_cut_per_2t` RK4 steps per 2T put half-steps at T/n_cut spacing, so
    /// one period holds exactly n_cut entries.
    fn build(p: &ModelParams, t0: f64, n_cut_per_2t: usize) -> DriveTable {
        let m = n_cut_per_2t;
        let h = p.period() / m as f64;
        let mut v0 = Vec::with_capacity(m);
        let mut v1 = Vec::with_capacity(m);
        for k in 0..m {
            let (a, b) = p.couplings_v01(t0 + k as f64 * h);
            v0.push(a);
            v1.push(b);
        }
        DriveTable { v0, v1 }
    }
}

struct Stepper<'a> {
    p: &'a ModelParams,
    probe: Option<ProbeParams>,
    table: DriveTable,
    t0: f64,
    dt: f64,
    inv_n: f64,
}

impl<'a> Stepper<'a> {
    fn new(
        p: &'a ModelParams,
        t0: f64,
        n_cut_per_2t: usize,
        with_probe: bool,
    ) -> Result<Stepper<'a>, MeanFieldError> {
        if n_cut_per_2t < 64 || n_cut_per_2t % 2 != 0 {
            return Err(MeanFieldError::StepCount(n_cut_per_2t));
        }
        let probe = if with_probe {
            Some(*p.probe.as_ref().ok_or(ModelError::NoProbe)?)
        } else {
            None
        };
        Ok(Stepper {
            p,
            probe,
            table: DriveTable::build(p, t0, n_cut_per_2t),
            t0,
            dt: 2.0 * p.period() / n_cut_per_2t as f64,
            inv_n: 1.0 / p.n_atoms,
        })
    }

    #[inline]
    fn v2_at(&self, t: f64) -> f64 {
        match &self.probe {
            Some(pr) => self.p.coupling_v2_inner(pr, t),
            None => 0.0,
        }
    }

    /// One classical RK4 step from global step index `j` (drive phase
    /// evaluated at the substep times through the table).
    #[inline]
    fn step(&self, j: u64, s: &SpinState) -> SpinState {
        let m = self.table.v0.len() as u64;
        let k0 = ((2 * j) % m) as usize;
        let k1 = ((2 * j + 1) % m) as usize;
        let k2 = ((2 * j + 2) % m) as usize;
        let delta = self.p.delta;
        let dt = self.dt;
        let (v2_0, v2_h, v2_1) = if self.probe.is_some() {
            let t = self.t0 + j as f64 * dt;
            (self.v2_at(t), self.v2_at(t + 0.5 * dt), self.v2_at(t + dt))
        } else {
            (0.0, 0.0, 0.0)
        };
        let f1 = rhs_terms(delta, self.inv_n, self.table.v0[k0], self.table.v1[k0], v2_0, s);
        let s2 = *s + f1 * (0.5 * dt);
        let f2 = rhs_terms(delta, self.inv_n, self.table.v0[k1], self.table.v1[k1], v2_h, &s2);
        let s3 = *s + f2 * (0.5 * dt);
        let f3 = rhs_terms(delta, self.inv_n, self.table.v0[k1], self.table.v1[k1], v2_h, &s3);
        let s4 = *s + f3 * dt;
        let f4 = rhs_terms(delta, self.inv_n, self.table.v0[k2], self.table.v1[k2], v2_1, &s4);
        *s + (f1 + f2 * 2.0 + f3 * 2.0 + f4) * (dt / 6.0)
    }

    /// Advance `n_steps` steps starting at global index `j0`; bails out if
    /// the state leaves finite range.
    fn advance(&self, mut s: SpinState, j0: u64, n_steps: u64) -> Result<SpinState, MeanFieldError> {
        let guard = 1e6 * self.p.n_atoms;
        for j in j0..j0 + n_steps {
            s = self.step(j, &s);
            if (j + 1) % 256 == 0 || j + 1 == j0 + n_steps {
                if !s.is_finite() || s.jx.abs().max(s.jy.abs()).max(s.jz.abs()) > guard {
                    return Err(MeanFieldError::NonFinite { t: self.t0 + (j + 1) as f64 * self.dt });
                }
            }
        }
        Ok(s)
    }
}

/// Fixed-step RK4 integration over `t_span` (rounded to whole steps),
/// storing every step. Deterministic: identical inputs give bit-identical
/// trajectories.
pub fn integrate(
    p: &ModelParams,
    s0: SpinState,
    t0: f64,
    t_span: f64,
    n_cut_per_2t: usize,
    with_probe: bool,
) -> Result<Trajectory, MeanFieldError> {
    let stepper = Stepper::new(p, t0, n_cut_per_2t, with_probe)?;
    let n_steps = (t_span / stepper.dt).round().max(1.0) as u64;
    let mut samples = Vec::with_capacity(n_steps as usize + 1);
    samples.push(s0);
    let mut s = s0;
    for j in 0..n_steps {
        s = stepper.step(j, &s);
        if !s.is_finite() {
            return Err(MeanFieldError::NonFinite { t: t0 + (j + 1) as f64 * stepper.dt });
        }
        samples.push(s);
    }
    Ok(Trajectory { t0, dt: stepper.dt, samples, params: p.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorKind {
    FixedPoint,
    LimitCycle2T,
    Unconverged,
}

/// Converged long-time state plus diagnostics.
#[derive(Debug, Clone)]
pub struct AttractorInfo {
    pub kind: AttractorKind,
    /// One 2T window of the final state.
    pub cycle: Trajectory,
    /// Convergence residual, normalized by N.
    pub residual: f64,
    /// Time-averaged (J^x)^2 over one T, normalized by N^2.
    pub order_param: f64,
}

#[derive(Debug, Clone)]
pub struct AttractorOptions {
    /// Relaxation span in units of 2T; `None` derives ceil(20/gamma0 / 2T).
    pub relax_periods: Option<usize>,
    /// Convergence tolerance relative to N.
    pub tol: f64,
    /// RK4 steps per 2T during relaxation.
    pub n_relax_per_2t: usize,
    /// RK4 steps per 2T for the stored cycle window.
    pub n_cycle_per_2t: usize,
    /// Maximum extra 2T windows spent tightening a near-converged cycle.
    pub max_polish: usize,
    /// Stop relaxing early once a fixed point is clearly reached.
    pub early_exit: bool,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        AttractorOptions {
            relax_periods: None,
            tol: 1e-6,
            n_relax_per_2t: 1024,
            n_cycle_per_2t: 8192,
            max_polish: 128,
            early_exit: true,
        }
    }
}

/// Default relaxation span: 20/gamma0 rounded up to whole 2T periods,
/// clamped to [16, 4096].
pub fn default_relax_periods(p: &ModelParams) -> usize {
    let gamma0 = p.damping_rate_gamma0();
    let two_t = 2.0 * p.period();
    if gamma0 <= 0.0 {
        return 1024;
    }
    ((20.0 / gamma0 / two_t).ceil() as usize).clamp(16, 4096)
}

fn window_fixed_point_residual(w: &Trajectory) -> f64 {
    let n = w.samples.len() as f64;
    let mut mean = SpinState { jx: 0.0, jy: 0.0, jz: 0.0 };
    for s in &w.samples {
        mean = mean + *s;
    }
    mean = mean * (1.0 / n);
    w.samples
        .iter()
        .map(|s| s.max_abs_diff(&mean))
        .fold(0.0, f64::max)
}

fn window_cycle_residual(a: &Trajectory, b: &Trajectory) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

/// Relax from `seed`, then classify the long-time state as a fixed point,
/// a 2T-periodic limit cycle, or unconverged (reported in `kind`, with the
/// residual, never as an error).
pub fn find_attractor(
    p: &ModelParams,
    seed: SpinState,
    opts: &AttractorOptions,
) -> Result<AttractorInfo, MeanFieldError> {
    let two_t = 2.0 * p.period();
    let relax_periods = opts.relax_periods.unwrap_or_else(|| default_relax_periods(p)).max(1);
    let n = p.n_atoms;
    let stepper = Stepper::new(p, 0.0, opts.n_relax_per_2t, false)?;
    let steps_per_period = opts.n_relax_per_2t as u64;

    // Relax in 16-period chunks. A fixed point reproduces itself both at
    // chunk boundaries and at the mid-phase probe; a 2T cycle only at the
    // boundaries (16 periods apart), so the mid-phase probe discriminates.
    let chunk = 16usize;
    let mut s = seed;
    let mut done = 0usize;
    while done < relax_periods {
        let periods = chunk.min(relax_periods - done);
        let j0 = done as u64 * steps_per_period;
        let half = periods as u64 * steps_per_period / 2 - steps_per_period / 2;
        let s_mid = stepper.advance(s, j0, half)?;
        let s_end = stepper.advance(s_mid, j0 + half, periods as u64 * steps_per_period - half)?;
        let probe = s_end.max_abs_diff(&s).max(s_end.max_abs_diff(&s_mid));
        let moved = s_end.max_abs_diff(&s);
        s = s_end;
        done += periods;
        if opts.early_exit && probe < 1e-3 * opts.tol * n && moved < 1e-3 * opts.tol * n {
            break;
        }
    }
    let t_windows = done as f64 * two_t;

    // Two consecutive 2T windows on the fine grid.
    let a = integrate(p, s, t_windows, two_t, opts.n_cycle_per_2t, false)?;
    let mut b = integrate(
        p,
        *a.samples.last().unwrap(),
        t_windows + two_t,
        two_t,
        opts.n_cycle_per_2t,
        false,
    )?;

    let mut cyc_res = window_cycle_residual(&a, &b);
    let initial_cyc_res = cyc_res;
    let fp_quick = window_fixed_point_residual(&b);
    if fp_quick >= 0.01 * opts.tol * n {
        // Polish: keep stepping windows while the stroboscopic residual
        // still improves. The slow mode decays by e^{-|gamma| 2T} per window
        // but also rotates, so the per-window residual is not monotone;
        // track the best seen and only stop after a run of windows without
        // progress.
        let mut best = cyc_res;
        let mut stall = 0usize;
        for _ in 0..opts.max_polish {
            if best < 0.01 * opts.tol * n {
                break;
            }
            let t_next = b.t0 + two_t;
            let c = integrate(p, *b.samples.last().unwrap(), t_next, two_t, opts.n_cycle_per_2t, false)?;
            let res_next = window_cycle_residual(&b, &c);
            b = c;
            cyc_res = res_next;
            if res_next < best {
                best = res_next;
                stall = 0;
            } else {
                stall += 1;
                if stall >= 16 {
                    break;
                }
            }
        }
    }

    // A limit cycle counts as converged only if the stroboscopic residual
    // is below tolerance and has demonstrably decayed; a residual that
    // merely plateaus under tolerance signals a near-critical point whose
    // periodicity cannot be certified at this accuracy.
    let decayed = cyc_res <= 0.25 * initial_cyc_res || cyc_res < 0.01 * opts.tol * n;
    let fp_res = window_fixed_point_residual(&b);
    let (kind, residual) = if fp_res < opts.tol * n {
        (AttractorKind::FixedPoint, fp_res / n)
    } else if cyc_res < opts.tol * n && decayed {
        (AttractorKind::LimitCycle2T, cyc_res / n)
    } else {
        (AttractorKind::Unconverged, cyc_res / n)
    };
    let order_param = order_parameter(&b);
    Ok(AttractorInfo { kind, cycle: b, residual, order_param })
}

/// Time-averaged (J^x)^2 over the first T of the cycle window (trapezoid
/// rule), normalized by N^2.
pub fn order_parameter(cycle: &Trajectory) -> f64 {
    let half = (cycle.samples.len() - 1) / 2;
    let mut acc = 0.0;
    for i in 0..half {
        let a = cycle.samples[i].jx;
        let b = cycle.samples[i + 1].jx;
        acc += 0.5 * (a * a + b * b);
    }
    let n = cycle.params.n_atoms;
    acc / half as f64 / (n * n)
}

/// Phase label derived from the normalized order parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    NormalPhase,
    TimeCrystal,
    Undecided,
}

/// Order-parameter threshold above which a state counts as superradiant.
pub const DTC_ORDER_THRESHOLD: f64 = 1e-2;
/// Below this the state counts as normal phase.
pub const NP_ORDER_THRESHOLD: f64 = 1e-4;

impl AttractorInfo {
    pub fn phase(&self) -> Phase {
        if self.order_param > DTC_ORDER_THRESHOLD {
            Phase::TimeCrystal
        } else if self.order_param < NP_ORDER_THRESHOLD {
            Phase::NormalPhase
        } else {
            Phase::Undecided
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepDirection {
    Up,
    Down,
}

#[derive(Debug, Clone)]
pub struct HysteresisPoint {
    pub omega: f64,
    pub info: AttractorInfo,
}

/// Sweep the drive frequency across `omega_values` (ascending grid),
/// seeding each point from the previous attractor's final state plus a
/// small symmetry-breaking tilt. Results are returned in grid order
/// regardless of direction.
pub fn hysteresis_scan(
    base: &ModelParams,
    omega_values: &[f64],
    direction: SweepDirection,
    opts: &AttractorOptions,
    tilt: f64,
) -> Result<Vec<HysteresisPoint>, MeanFieldError> {
    let order: Vec<usize> = match direction {
        SweepDirection::Up => (0..omega_values.len()).collect(),
        SweepDirection::Down => (0..omega_values.len()).rev().collect(),
    };
    let mut out: Vec<Option<HysteresisPoint>> = vec![None; omega_values.len()];
    let mut carry: Option<SpinState> = None;
    for idx in order {
        let p = ModelParams { omega: omega_values[idx], ..base.clone() };
        let seed = match carry {
            None => tilted_seed(&p, tilt),
            Some(prev) => retilt(&p, prev, tilt),
        };
        let info = find_attractor(&p, seed, opts)?;
        carry = Some(*info.cycle.samples.last().unwrap());
        out[idx] = Some(HysteresisPoint { omega: omega_values[idx], info });
    }
    Ok(out.into_iter().map(|x| x.unwrap()).collect())
}

/// Add a small J^x kick and rescale back to spin length N/2.
fn retilt(p: &ModelParams, s: SpinState, tilt: f64) -> SpinState {
    let kicked = SpinState { jx: s.jx + tilt * p.n_atoms, ..s };
    let len = kicked.length_sq().sqrt();
    if len == 0.0 {
        return tilted_seed(p, tilt);
    }
    kicked * (0.5 * p.n_atoms / len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cycle_params() -> ModelParams {
        ModelParams::default()
            .with_modulation_ratio(0.6)
            .with_omega_ratio(1.0)
            .unwrap()
    }

    #[test]
    fn np_is_fixed_point_of_probe_free_rhs() {
        let p = cycle_params();
        let s = normal_phase_state(&p);
        let d = rhs(&p, 0.33, &s, false).unwrap();
        assert_eq!((d.jx, d.jy, d.jz), (0.0, 0.0, 0.0));
    }

    #[test]
    fn np_with_probe_feels_only_v2() {
        let p = cycle_params().with_probe_offset(0.1, 0.19, 0.0).unwrap();
        let s = normal_phase_state(&p);
        for k in 0..10 {
            let t = 1.7 * k as f64;
            let d = rhs(&p, t, &s, true).unwrap();
            let v2 = p.coupling_v2(t).unwrap();
            assert_eq!(d.jx, 0.0);
            assert_relative_eq!(d.jy, -p.n_atoms * v2, max_relative = 1e-14);
            assert_eq!(d.jz, 0.0);
        }
    }

    proptest! {
        // d(L^2)/dt = 0 algebraically, probe on and off.
        #[test]
        fn spin_length_is_conserved_at_rhs_level(
            jx in -5000.0f64..5000.0,
            jy in -5000.0f64..5000.0,
            jz in -5000.0f64..5000.0,
            t in 0.0f64..500.0,
        ) {
            let p = cycle_params().with_probe_offset(0.1, 0.19, 1.0).unwrap();
            let s = SpinState { jx, jy, jz };
            for &probe in &[false, true] {
                let d = rhs(&p, t, &s, probe).unwrap();
                let dot = s.dot(&d);
                prop_assert!(dot.abs() < 1e-9 * (1.0 + s.length_sq()));
            }
        }

        // The Z2 map (jx, jy, jz) -> (-jx, -jy, jz) anticommutes with the
        // probe-free flow exactly.
        #[test]
        fn z2_covariance_at_rhs_level(
            jx in -5000.0f64..5000.0,
            jy in -5000.0f64..5000.0,
            jz in -5000.0f64..5000.0,
            t in 0.0f64..500.0,
        ) {
            let p = cycle_params();
            let s = SpinState { jx, jy, jz };
            let flipped = SpinState { jx: -jx, jy: -jy, jz };
            let d = rhs(&p, t, &s, false).unwrap();
            let df = rhs(&p, t, &flipped, false).unwrap();
            prop_assert_eq!(df.jx, -d.jx);
            prop_assert_eq!(df.jy, -d.jy);
            prop_assert_eq!(df.jz, d.jz);
        }
    }

    #[test]
    fn np_seed_stays_constant() {
        let p = cycle_params();
        let s0 = normal_phase_state(&p);
        let traj = integrate(&p, s0, 0.0, 4.0 * p.period(), 256, false).unwrap();
        for s in &traj.samples {
            assert_eq!(*s, s0);
        }
    }

    #[test]
    fn z2_covariance_along_trajectories_is_exact() {
        let p = cycle_params();
        let s0 = tilted_seed(&p, 0.05);
        let f0 = SpinState { jx: -s0.jx, jy: -s0.jy, jz: s0.jz };
        let a = integrate(&p, s0, 0.0, 6.0 * p.period(), 512, false).unwrap();
        let b = integrate(&p, f0, 0.0, 6.0 * p.period(), 512, false).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(y.jx, -x.jx);
            assert_eq!(y.jy, -x.jy);
            assert_eq!(y.jz, x.jz);
        }
    }

    #[test]
    fn integration_is_deterministic() {
        let p = cycle_params();
        let s0 = tilted_seed(&p, DEFAULT_TILT);
        let a = integrate(&p, s0, 0.0, 10.0 * p.period(), 512, false).unwrap();
        let b = integrate(&p, s0, 0.0, 10.0 * p.period(), 512, false).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn rk4_endpoint_error_scales_as_dt4() {
        let p = cycle_params();
        let s0 = tilted_seed(&p, 0.05);
        let span = 8.0 * p.period();
        let coarse = integrate(&p, s0, 0.0, span, 128, false).unwrap();
        let medium = integrate(&p, s0, 0.0, span, 256, false).unwrap();
        let fine = integrate(&p, s0, 0.0, span, 512, false).unwrap();
        let e1 = coarse.samples.last().unwrap().max_abs_diff(medium.samples.last().unwrap());
        let e2 = medium.samples.last().unwrap().max_abs_diff(fine.samples.last().unwrap());
        let order = (e1 / e2).log2();
        assert!(
            (3.5..4.5).contains(&order),
            "measured Richardson order {order}, e1 = {e1:e}, e2 = {e2:e}"
        );
    }

    #[test]
    fn spin_length_conservation_along_cycle() {
        let p = cycle_params();
        let s0 = tilted_seed(&p, DEFAULT_TILT);
        let l0 = s0.length_sq();
        let traj = integrate(&p, s0, 0.0, 40.0 * p.period(), 2048, false).unwrap();
        for s in traj.samples.iter().step_by(512) {
            assert!(((s.length_sq() - l0) / l0).abs() < 1e-10);
        }
    }

    #[test]
    fn tilted_seed_grows_and_saturates_into_subharmonic_cycle() {
        let p = cycle_params();
        let info = find_attractor(&p, tilted_seed(&p, DEFAULT_TILT), &AttractorOptions::default()).unwrap();
        assert_eq!(info.kind, AttractorKind::LimitCycle2T);
        assert!(info.order_param > 0.01, "order parameter {}", info.order_param);
        // Stroboscopic map over T flips the sign of J^x on the cycle.
        let m = (info.cycle.samples.len() - 1) / 2;
        let n = p.n_atoms;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            worst = worst.max((info.cycle.samples[i].jx + info.cycle.samples[i + m].jx).abs());
        }
        assert!(worst < 1e-4 * n, "subharmonic defect {worst:e}");
    }

    #[test]
    fn far_below_resonance_seed_decays_to_np() {
        let p = ModelParams::default()
            .with_modulation_ratio(0.6)
            .with_omega_ratio(0.5)
            .unwrap();
        let info = find_attractor(&p, tilted_seed(&p, DEFAULT_TILT), &AttractorOptions::default()).unwrap();
        assert_eq!(info.kind, AttractorKind::FixedPoint);
        assert_eq!(info.phase(), Phase::NormalPhase);
        let last = info.cycle.samples.last().unwrap();
        assert_relative_eq!(last.jz, -0.5 * p.n_atoms, max_relative = 1e-6);
    }

    #[test]
    fn trajectory_csv_export() {
        let p = cycle_params();
        let traj = integrate(&p, tilted_seed(&p, 0.1), 0.0, p.period(), 128, false).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,jx,jy,jz");
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(first[0], 0.0);
        assert_relative_eq!(first[1], 0.1, max_relative = 1e-12);
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
    }

    #[test]
    fn unmodulated_tilt_decays_to_fixed_point() {
        let p = ModelParams { g1: 0.0, ..cycle_params() };
        let info = find_attractor(&p, tilted_seed(&p, DEFAULT_TILT), &AttractorOptions::default()).unwrap();
        assert_eq!(info.kind, AttractorKind::FixedPoint);
        let last = info.cycle.samples.last().unwrap();
        assert!(last.jx.abs() < 1e-3);
        assert_relative_eq!(last.jz, -0.5 * p.n_atoms, max_relative = 1e-6);
    }

    #[test]
    fn np_seed_detected_quickly_as_fixed_point() {
        let p = cycle_params();
        let info = find_attractor(&p, normal_phase_state(&p), &AttractorOptions::default()).unwrap();
        assert_eq!(info.kind, AttractorKind::FixedPoint);
        assert_eq!(info.residual, 0.0);
        assert_eq!(info.order_param, 0.0);
    }

    #[test]
    fn order_parameter_of_synthetic_subharmonic() {
        // J^x(t) = A sin(omega t / 2) averages to A^2/2 over one T.
        let p = cycle_params();
        let n_cut = 4096usize;
        let two_t = 2.0 * p.period();
        let dt = two_t / n_cut as f64;
        let a = 0.3 * p.n_atoms;
        let samples: Vec<SpinState> = (0..=n_cut)
            .map(|i| SpinState {
                jx: a * (0.5 * p.omega * i as f64 * dt).sin(),
                jy: 0.0,
                jz: 0.0,
            })
            .collect();
        let cycle = Trajectory { t0: 0.0, dt, samples, params: p.clone() };
        let expected = 0.5 * (a / p.n_atoms) * (a / p.n_atoms);
        assert_relative_eq!(order_parameter(&cycle), expected, max_relative = 1e-6);
    }

    #[test]
    fn interpolation_is_exact_at_grid_points() {
        let p = cycle_params();
        let info = find_attractor(&p, tilted_seed(&p, DEFAULT_TILT), &AttractorOptions::default()).unwrap();
        let c = &info.cycle;
        for i in (0..c.samples.len() - 1).step_by(701) {
            let s = c.sample_periodic(c.time_at(i));
            assert!(s.max_abs_diff(&c.samples[i]) < 1e-9 * p.n_atoms);
        }
        // Periodic extension by 2T.
        let s = c.sample_periodic(c.time_at(5) + c.span());
        assert!(s.max_abs_diff(&c.samples[5]) < 1e-6 * p.n_atoms);
    }

    #[test]
    fn unmodulated_hysteresis_shows_no_bistability() {
        let base = ModelParams { g1: 0.0, ..cycle_params() };
        let scales = base.derive_scales().unwrap();
        let omegas: Vec<f64> = (0..7)
            .map(|i| (0.8 + 0.4 * i as f64 / 6.0) * 2.0 * scales.omega_res)
            .collect();
        let opts = AttractorOptions { relax_periods: Some(64), ..Default::default() };
        let up = hysteresis_scan(&base, &omegas, SweepDirection::Up, &opts, DEFAULT_TILT).unwrap();
        let down = hysteresis_scan(&base, &omegas, SweepDirection::Down, &opts, DEFAULT_TILT).unwrap();
        for (u, d) in up.iter().zip(&down) {
            assert_eq!(u.info.phase(), Phase::NormalPhase);
            assert_eq!(d.info.phase(), Phase::NormalPhase);
        }
    }

    #[test]
    fn step_count_validation() {
        let p = cycle_params();
        let s0 = normal_phase_state(&p);
        assert!(matches!(
            integrate(&p, s0, 0.0, 1.0, 62, false),
            Err(MeanFieldError::StepCount(62))
        ));
        assert!(matches!(
            integrate(&p, s0, 0.0, 1.0, 65, false),
            Err(MeanFieldError::StepCount(65))
        ));
    }

    #[test]
    fn probe_requires_probe_params() {
        let p = cycle_params();
        let s0 = normal_phase_state(&p);
        assert!(matches!(
            integrate(&p, s0, 0.0, 1.0, 128, true),
            Err(MeanFieldError::Model(ModelError::NoProbe))
        ));
    }
}
