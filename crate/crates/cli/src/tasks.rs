//! Task runners: each maps one subcommand onto core operations and writes
//! CSV artifacts plus a manifest.

use crate::config::Resolved;
use crate::output::{fmt, CsvFile};
use anyhow::{anyhow, bail, Context, Result};
use dtc_core::*;
use serde_json::json;
use std::path::{Path, PathBuf};

pub struct TaskOutput {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

fn meta(r: &Resolved, hash: &str) -> Vec<(&'static str, String)> {
    let scales = r.params.derive_scales();
    let mut m = vec![
        ("config_sha256", hash.to_string()),
        ("kappa", fmt(r.params.kappa)),
        ("n_atoms", fmt(r.params.n_atoms)),
        ("seed", r.ensemble.seed.to_string()),
    ];
    if let Ok(s) = scales {
        m.push(("omega_res", fmt(s.omega_res)));
        m.push(("gamma0", fmt(s.gamma0)));
        m.push(("g_c", fmt(s.g_c)));
    }
    m
}

fn grid(axis: Option<&crate::config::AxisSpec>, name: &str) -> Result<Vec<f64>> {
    axis.ok_or_else(|| anyhow!("task requires [grid.{name}]"))?
        .values()
        .with_context(|| format!("grid.{name}"))
}

fn scales_of(r: &Resolved) -> Result<DerivedScales> {
    Ok(r.params.derive_scales()?)
}

/// Converged attractor from the tilted seed, falling back onto the normal
/// phase seed result for reporting.
fn find_tilted(r: &Resolved) -> Result<AttractorInfo> {
    Ok(find_attractor(&r.params, tilted_seed(&r.params, r.tilt), &r.attractor)?)
}

pub fn run_trace(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let p = &r.params;
    let two_t = 2.0 * p.period();
    let info = find_tilted(r)?;
    let start = *info.cycle.samples.first().unwrap();
    let t0 = info.cycle.t0;
    let span = r.config.trace.periods as f64 * two_t;
    let n_cut = r.config.trace.n_cut_per_2t;
    let free = integrate(p, start, t0, span, n_cut, false)?;
    let probed = if p.probe.is_some() {
        Some(integrate(p, start, t0, span, n_cut, true)?)
    } else {
        None
    };

    let mut columns = vec![
        ("t", "time, units 1/kappa"),
        ("jx", "J^x / N"),
        ("jy", "J^y / N"),
        ("jz", "J^z / N"),
    ];
    if probed.is_some() {
        columns.extend([
            ("jx_pr", "J^x / N with probe"),
            ("jy_pr", "J^y / N with probe"),
            ("jz_pr", "J^z / N with probe"),
        ]);
    }
    let mut csv = CsvFile::create(dir, "trace.csv", &meta(r, hash), &columns)?;
    let n = p.n_atoms;
    for (i, s) in free.samples.iter().enumerate() {
        let mut row = vec![
            fmt(free.time_at(i) - t0),
            fmt(s.jx / n),
            fmt(s.jy / n),
            fmt(s.jz / n),
        ];
        if let Some(tr) = &probed {
            let q = &tr.samples[i];
            row.extend([fmt(q.jx / n), fmt(q.jy / n), fmt(q.jz / n)]);
        }
        csv.row(&row)?;
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings: vec![],
        summary: json!({
            "attractor": format!("{:?}", info.kind),
            "order_param": info.order_param,
            "residual": info.residual,
        }),
    })
}

pub fn run_attractor(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let info = find_tilted(r)?;
    let mut csv = CsvFile::create(
        dir,
        "attractor.csv",
        &meta(r, hash),
        &[
            ("t", "time, units 1/kappa"),
            ("jx", "J^x / N"),
            ("jy", "J^y / N"),
            ("jz", "J^z / N"),
        ],
    )?;
    let n = r.params.n_atoms;
    for (i, s) in info.cycle.samples.iter().enumerate() {
        csv.row(&[
            fmt(info.cycle.time_at(i) - info.cycle.t0),
            fmt(s.jx / n),
            fmt(s.jy / n),
            fmt(s.jz / n),
        ])?;
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings: vec![],
        summary: json!({
            "kind": format!("{:?}", info.kind),
            "residual": info.residual,
            "order_param": info.order_param,
            "phase": format!("{:?}", info.phase()),
        }),
    })
}

pub fn run_floquet_sweep(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let scales = scales_of(r)?;
    let omega_ratios = grid(r.config.grid.omega.as_ref(), "omega")?;
    let g1_ratios = grid(r.config.grid.g1_ratio.as_ref(), "g1_ratio")?;
    let omegas: Vec<f64> = omega_ratios.iter().map(|x| x * 2.0 * scales.omega_res).collect();
    let g1s: Vec<f64> = g1_ratios.iter().map(|x| x * r.params.g0).collect();
    let records = spectrum_sweep(&r.params, &omegas, &g1s, &r.sweep);

    let mut csv = CsvFile::create(
        dir,
        "floquet_sweep.csv",
        &meta(r, hash),
        &[
            ("omega", "units kappa"),
            ("g1_ratio", "g1/g0"),
            ("seed_kind", "normal_phase | tilted"),
            ("gamma_fl", "units kappa; nan when unconverged"),
            ("nu_fl", "units kappa; principal branch [0, omega/4]"),
            ("classification", "stable_np|stable_dtc|critical|unstable|unconverged"),
            ("trivial_defect", "|mu0 - 1|"),
            ("order_param", "<(J^x)^2>_tav / N^2"),
        ],
    )?;
    let mut warnings = Vec::new();
    let mut n_unconverged = 0usize;
    for rec in &records {
        let seed = match rec.seed {
            SeedKind::NormalPhase => "normal_phase",
            SeedKind::Tilted => "tilted",
        };
        let (gamma, nu, class, defect) = match &rec.floquet {
            Some(f) => (
                f.gamma_fl,
                f.nu_fl,
                match f.classification {
                    PhaseClass::StableNp => "stable_np",
                    PhaseClass::StableDtc => "stable_dtc",
                    PhaseClass::Critical => "critical",
                    PhaseClass::Unstable => "unstable",
                },
                f.trivial_defect,
            ),
            None => (f64::NAN, f64::NAN, "unconverged", f64::NAN),
        };
        if rec.floquet.is_none() {
            n_unconverged += 1;
            if let Some(e) = &rec.error {
                warnings.push(format!(
                    "point omega={} g1={} seed={seed}: {e}",
                    rec.omega, rec.g1
                ));
            }
        }
        csv.row(&[
            fmt(rec.omega),
            fmt(rec.g1 / r.params.g0),
            seed.to_string(),
            fmt(gamma),
            fmt(nu),
            class.to_string(),
            fmt(defect),
            fmt(rec.order_param),
        ])?;
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings,
        summary: json!({
            "points": omegas.len() * g1s.len(),
            "records": records.len(),
            "unconverged": n_unconverged,
        }),
    })
}

pub fn run_hysteresis(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let scales = scales_of(r)?;
    let omega_ratios = grid(r.config.grid.omega.as_ref(), "omega")?;
    let omegas: Vec<f64> = omega_ratios.iter().map(|x| x * 2.0 * scales.omega_res).collect();
    let mut csv = CsvFile::create(
        dir,
        "hysteresis.csv",
        &meta(r, hash),
        &[
            ("omega", "units kappa"),
            ("direction", "up | down"),
            ("kind", "fixed_point|limit_cycle_2t|unconverged"),
            ("order_param", "<(J^x)^2>_tav / N^2"),
            ("phase", "normal_phase|time_crystal|undecided"),
        ],
    )?;
    let mut n_bistable = 0usize;
    let up = hysteresis_scan(&r.params, &omegas, SweepDirection::Up, &r.attractor, r.tilt)?;
    let down = hysteresis_scan(&r.params, &omegas, SweepDirection::Down, &r.attractor, r.tilt)?;
    for (dir_name, scan) in [("up", &up), ("down", &down)] {
        for point in scan {
            let kind = match point.info.kind {
                AttractorKind::FixedPoint => "fixed_point",
                AttractorKind::LimitCycle2T => "limit_cycle_2t",
                AttractorKind::Unconverged => "unconverged",
            };
            let phase = match point.info.phase() {
                Phase::NormalPhase => "normal_phase",
                Phase::TimeCrystal => "time_crystal",
                Phase::Undecided => "undecided",
            };
            csv.row(&[
                fmt(point.omega),
                dir_name.to_string(),
                kind.to_string(),
                fmt(point.info.order_param),
                phase.to_string(),
            ])?;
        }
    }
    for (u, d) in up.iter().zip(&down) {
        if u.info.phase() != d.info.phase() {
            n_bistable += 1;
        }
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings: vec![],
        summary: json!({ "points": omegas.len(), "disagreeing_points": n_bistable }),
    })
}

pub fn run_probe_map(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let scales = scales_of(r)?;
    let omega_ratios = grid(r.config.grid.omega.as_ref(), "omega")?;
    let pr_ratios = grid(r.config.grid.omega_pr.as_ref(), "omega_pr")?;
    let omegas: Vec<f64> = omega_ratios.iter().map(|x| x * 2.0 * scales.omega_res).collect();
    let offsets: Vec<f64> = pr_ratios.iter().map(|x| x * scales.omega_res).collect();
    let map = probe_response_map(&r.params, &omegas, &offsets, &r.ensemble)?;
    let (csv, warnings, failed) = write_map(
        r,
        dir,
        hash,
        "probe_map.csv",
        ("omega", "units kappa"),
        &map,
    )?;
    Ok(TaskOutput {
        artifacts: vec![csv],
        warnings,
        summary: json!({ "cells": map.values.len(), "failed_cells": failed }),
    })
}

pub fn run_phase_scan(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let scales = scales_of(r)?;
    let pr_ratios = grid(r.config.grid.omega_pr.as_ref(), "omega_pr")?;
    let phis = grid(r.config.grid.phi.as_ref(), "phi")?;
    let offsets: Vec<f64> = pr_ratios.iter().map(|x| x * scales.omega_res).collect();
    let map = phase_scan(&r.params, &offsets, &phis, &r.ensemble)?;
    let (csv, warnings, failed) = write_map(
        r,
        dir,
        hash,
        "phase_scan.csv",
        ("phi", "radians"),
        &map,
    )?;
    Ok(TaskOutput {
        artifacts: vec![csv],
        warnings,
        summary: json!({ "cells": map.values.len(), "failed_cells": failed }),
    })
}

fn write_map(
    r: &Resolved,
    dir: &Path,
    hash: &str,
    name: &str,
    axis1: (&str, &str),
    map: &ProbeResponseMap,
) -> Result<(PathBuf, Vec<String>, usize)> {
    let scales = scales_of(r)?;
    let mut csv = CsvFile::create(
        dir,
        name,
        &meta(r, hash),
        &[
            axis1,
            ("omega_pr_offset", "(omega_pr - omega/2)/omega_res"),
            ("value", "photons: <I_pr>_tav - <I_0>_tav"),
            ("stderr", "photons"),
            ("value_per_atom", "photons / N"),
            ("n_traj", "trajectories per cell"),
        ],
    )?;
    let mut warnings = Vec::new();
    let mut failed = 0usize;
    for (i, &a) in map.axis1.iter().enumerate() {
        for (j, &off) in map.axis2.iter().enumerate() {
            let (v, se) = map.at(i, j);
            if v.is_nan() {
                failed += 1;
                warnings.push(format!("cell ({a}, {off}) did not finish finite"));
            }
            csv.row(&[
                fmt(a),
                fmt(off / scales.omega_res),
                fmt(v),
                fmt(se),
                fmt(v / r.params.n_atoms),
                map.n_traj.to_string(),
            ])?;
        }
    }
    Ok((csv.finish()?, warnings, failed))
}

pub fn run_lineshape(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let p = &r.params;
    if p.probe.is_none() {
        bail!("lineshape task requires [model.probe]");
    }
    let scales = scales_of(r)?;
    let pr_ratios = grid(r.config.grid.omega_pr.as_ref(), "omega_pr")?;
    let offsets: Vec<f64> = pr_ratios.iter().map(|x| x * scales.omega_res).collect();
    let branch = match r.config.lineshape.branch.as_str() {
        "upper" => Branch::Upper,
        "lower" => Branch::Lower,
        other => bail!("lineshape.branch must be 'upper' or 'lower', got {other:?}"),
    };

    // Stability exponents at this drive point: prefer the tilted attractor
    // (DTC when it exists), fall back to the normal phase branch.
    let tilted = find_tilted(r)?;
    let info = if tilted.kind == AttractorKind::Unconverged {
        find_attractor(p, normal_phase_state(p), &r.attractor)?
    } else {
        tilted
    };
    let (phi_m, n_cut) = monodromy_stabilized(p, &info.cycle, &r.monodromy)?;
    let mut fl = extract_exponents(&phi_m, p, &info);
    fl.n_cut = n_cut;

    let map = probe_response_map(p, &[p.omega], &offsets, &r.ensemble)?;
    let samples: Vec<(f64, f64)> = offsets
        .iter()
        .enumerate()
        .map(|(j, &off)| (0.5 * p.omega + off, map.at(0, j).0))
        .collect();
    let fit = lorentzian_overlay(&fl, p, branch, &samples)?;
    let residual = fit.residual_rms(p, branch);

    let mut csv = CsvFile::create(
        dir,
        "lineshape.csv",
        &meta(r, hash),
        &[
            ("omega_pr_offset", "(omega_pr - omega/2)/omega_res"),
            ("value", "photons"),
            ("stderr", "photons"),
            ("model", "fitted Lorentzian, photons"),
        ],
    )?;
    for (j, &off) in offsets.iter().enumerate() {
        let (v, se) = map.at(0, j);
        let model = fit.model(p, branch, 0.5 * p.omega + off);
        csv.row(&[fmt(off / scales.omega_res), fmt(v), fmt(se), fmt(model)])?;
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings: vec![],
        summary: json!({
            "attractor": format!("{:?}", info.kind),
            "gamma_fl": fl.gamma_fl,
            "nu_fl": fl.nu_fl,
            "amplitude": fit.amplitude,
            "residual_rms": residual,
            "residual_over_peak": residual / fit.amplitude.abs(),
        }),
    })
}

pub fn run_np_spectrum(r: &Resolved, dir: &Path, hash: &str) -> Result<TaskOutput> {
    let scales = scales_of(r)?;
    let omega_ratios = grid(r.config.grid.omega.as_ref(), "omega")?;
    let mut csv = CsvFile::create(
        dir,
        "np_spectrum.csv",
        &meta(r, hash),
        &[
            ("omega", "units kappa"),
            ("gamma_fl", "units kappa"),
            ("nu_fl", "units kappa"),
            ("epsilon", "units kappa; nan outside validity domain"),
            ("in_domain", "0|1"),
        ],
    )?;
    let mut warnings = Vec::new();
    for &x in &omega_ratios {
        let p = ModelParams { omega: x * 2.0 * scales.omega_res, ..r.params.clone() };
        let info = find_attractor(&p, normal_phase_state(&p), &r.attractor)?;
        let (phi_m, _) = monodromy_stabilized(&p, &info.cycle, &r.monodromy)?;
        let fl = extract_exponents(&phi_m, &p, &info);
        let (eps, in_domain) = match bogoliubov_epsilon(&p) {
            Ok(e) => (e, 1),
            Err(e) => {
                warnings.push(format!("omega ratio {x}: {e}"));
                (f64::NAN, 0)
            }
        };
        csv.row(&[
            fmt(p.omega),
            fmt(fl.gamma_fl),
            fmt(fl.nu_fl),
            fmt(eps),
            in_domain.to_string(),
        ])?;
    }
    Ok(TaskOutput {
        artifacts: vec![csv.finish()?],
        warnings,
        summary: json!({ "points": omega_ratios.len() }),
    })
}

pub fn run_validate(r: &Resolved) -> Result<Vec<String>> {
    let warnings = r.params.validate(dtc_core::model::REGIME_FACTOR_DEFAULT)?;
    r.ensemble.validate(&r.params)?;
    Ok(warnings.into_iter().map(|w| w.message).collect())
}
