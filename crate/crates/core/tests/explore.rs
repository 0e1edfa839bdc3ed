// Scratch measurements used to pin acceptance thresholds; run with
//   cargo test -p dtc-core --test explore -- --ignored --nocapture
// (removed before release)

use dtc_core::*;
use std::time::Instant;

fn fig_params(g1_ratio: f64, omega_ratio: f64) -> ModelParams {
    ModelParams::default()
        .with_modulation_ratio(g1_ratio)
        .with_omega_ratio(omega_ratio)
        .unwrap()
}

#[test]
#[ignore]
fn measure_l2_drift_defaults() {
    let p = fig_params(0.6, 1.0);
    for n_cut in [512usize, 1024, 2048, 4096] {
        let t0 = Instant::now();
        let info = find_attractor(
            &p,
            tilted_seed(&p, 1e-3),
            &AttractorOptions::default(),
        )
        .unwrap();
        let s0 = *info.cycle.samples.last().unwrap();
        let l0 = s0.length_sq();
        let span = 1000.0 * p.period();
        let traj = integrate(&p, s0, 0.0, span, n_cut, false).unwrap();
        let mut worst: f64 = 0.0;
        for s in traj.samples.iter().step_by(64) {
            worst = worst.max(((s.length_sq() - l0) / l0).abs());
        }
        println!(
            "n_cut={n_cut}: rel L2 drift over 1000 T = {worst:e}  ({:?})",
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn measure_cut_profile() {
    // NP and DTC branches along the g1/g0 = 0.6 cut.
    let base = fig_params(0.6, 1.0);
    let scales = base.derive_scales().unwrap();
    let settings = SweepSettings::default();
    let t0 = Instant::now();
    for i in 0..26 {
        let x = 0.7 + 0.5 * i as f64 / 25.0;
        let omegas = [x * 2.0 * scales.omega_res];
        let g1s = [base.g1];
        let recs = spectrum_sweep(&base, &omegas, &g1s, &settings);
        for r in &recs {
            let (g, nu, class) = match &r.floquet {
                Some(f) => (f.gamma_fl, f.nu_fl, format!("{:?}", f.classification)),
                None => (f64::NAN, f64::NAN, format!("{:?} {:?}", r.kind, r.error)),
            };
            println!(
                "x={x:.3} seed={:?} kind={:?} res={:.2e} op={:.4e} gamma={g:.4e} nu={nu:.4e} nu/(w/2)={:.3} {class}",
                r.seed, r.kind, r.residual, r.order_param, nu / (0.5 * omegas[0])
            );
        }
    }
    println!("cut took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_sweep_point_cost() {
    let base = fig_params(0.6, 1.0);
    let scales = base.derive_scales().unwrap();
    let settings = SweepSettings::default();
    let t0 = Instant::now();
    let omegas: Vec<f64> = (0..4).map(|i| (0.9 + 0.05 * i as f64) * 2.0 * scales.omega_res).collect();
    let g1s: Vec<f64> = (0..4).map(|i| (0.2 + 0.2 * i as f64) * base.g0).collect();
    let recs = spectrum_sweep(&base, &omegas, &g1s, &settings);
    let n_unconv = recs.iter().filter(|r| r.kind == AttractorKind::Unconverged).count();
    let ncuts: Vec<usize> = recs.iter().filter_map(|r| r.floquet.as_ref().map(|f| f.n_cut)).collect();
    println!(
        "16 points x 2 seeds took {:?} ({n_unconv} unconverged), n_cut used: {:?}",
        t0.elapsed(),
        ncuts
    );
}

#[test]
#[ignore]
fn measure_hysteresis_window() {
    let base = fig_params(0.6, 1.0);
    let scales = base.derive_scales().unwrap();
    let omegas: Vec<f64> = (0..41)
        .map(|i| (1.0 + 0.12 * i as f64 / 40.0) * 2.0 * scales.omega_res)
        .collect();
    let opts = AttractorOptions::default();
    let t0 = Instant::now();
    let up = hysteresis_scan(&base, &omegas, SweepDirection::Up, &opts, 1e-3).unwrap();
    let down = hysteresis_scan(&base, &omegas, SweepDirection::Down, &opts, 1e-3).unwrap();
    for (u, d) in up.iter().zip(&down) {
        println!(
            "x={:.4} up: {:?}/{:.3e} (op {:.3e})  down: {:?}/{:.3e} (op {:.3e})",
            u.omega / (2.0 * scales.omega_res),
            u.info.kind,
            u.info.residual,
            u.info.order_param,
            d.info.kind,
            d.info.residual,
            d.info.order_param,
        );
    }
    println!("hysteresis took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_np_cut_response() {
    // Probe spectroscopy cut in the NP at x = 0.8: find the Floquet line and
    // scan the upper branch.
    let base = fig_params(0.6, 0.8).with_probe_offset(0.1, 0.2, 0.0).unwrap();
    let scales = base.derive_scales().unwrap();
    let info = find_attractor(&base, normal_phase_state(&base), &AttractorOptions::default()).unwrap();
    let (phi, _) = monodromy_stabilized(&base, &info.cycle, &MonodromySettings::default()).unwrap();
    let fl = extract_exponents(&phi, &base, &info);
    println!(
        "NP at 0.8: gamma={:.5e} nu={:.5e} nu/wres={:.4}",
        fl.gamma_fl,
        fl.nu_fl,
        fl.nu_fl / scales.omega_res
    );
    let spec = EnsembleSpec { n_traj: 48, ..EnsembleSpec::for_params(&base) };
    let offsets: Vec<f64> = (0..7)
        .map(|j| fl.nu_fl + (j as f64 - 3.0) * 2.0 * fl.gamma_fl.abs())
        .collect();
    let t0 = Instant::now();
    let map = probe_response_map(&base, &[base.omega], &offsets, &spec).unwrap();
    for (j, &off) in offsets.iter().enumerate() {
        let (v, se) = map.at(0, j);
        println!("off/nu={:.3}: value={v:.4e} stderr={se:.3e}", off / fl.nu_fl);
    }
    println!("7 cells x 48 traj took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_dtc_cut_response() {
    let base = fig_params(0.6, 1.0).with_probe_offset(0.1, 0.2, 0.0).unwrap();
    let info = find_attractor(&base, tilted_seed(&base, 1e-3), &AttractorOptions::default()).unwrap();
    let (phi, _) = monodromy_stabilized(&base, &info.cycle, &MonodromySettings::default()).unwrap();
    let fl = extract_exponents(&phi, &base, &info);
    let scales = base.derive_scales().unwrap();
    println!(
        "DTC at 1.0: kind={:?} gamma={:.5e} nu={:.5e} nu/wres={:.4}",
        info.kind,
        fl.gamma_fl,
        fl.nu_fl,
        fl.nu_fl / scales.omega_res
    );
    let spec = EnsembleSpec { n_traj: 48, ..EnsembleSpec::for_params(&base) };
    let offsets: Vec<f64> = (0..7)
        .map(|j| fl.nu_fl + (j as f64 - 3.0) * 2.0 * fl.gamma_fl.abs())
        .collect();
    let t0 = Instant::now();
    let map = probe_response_map(&base, &[base.omega], &offsets, &spec).unwrap();
    for (j, &off) in offsets.iter().enumerate() {
        let (v, se) = map.at(0, j);
        println!("off/nu={:.3}: value={v:.4e} stderr={se:.3e}", off / fl.nu_fl);
    }
    println!("7 cells x 48 traj took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_bogoliubov_comparison() {
    let base = fig_params(0.6, 1.0);
    let scales = base.derive_scales().unwrap();
    for i in 0..26 {
        let x = 0.7 + 0.5 * i as f64 / 25.0;
        let p = ModelParams { omega: x * 2.0 * scales.omega_res, ..base.clone() };
        let eps = bogoliubov_epsilon(&p);
        let info = find_attractor(&p, normal_phase_state(&p), &AttractorOptions::default()).unwrap();
        let (phi, _) = monodromy_stabilized(&p, &info.cycle, &MonodromySettings::default()).unwrap();
        let fl = extract_exponents(&phi, &p, &info);
        match eps {
            Ok(e) => println!(
                "x={x:.3}: eps={e:+.5e} nu={:.5e} |eps-nu|/wres={:.4} gamma={:+.3e}",
                fl.nu_fl,
                (e.abs() - fl.nu_fl).abs() / scales.omega_res,
                fl.gamma_fl
            ),
            Err(err) => println!("x={x:.3}: eps outside domain ({err}) nu={:.5e}", fl.nu_fl),
        }
    }
}

#[test]
#[ignore]
fn measure_dtc_noiseless_response() {
    // Deterministic (mean-field-like) probe response of the full system.
    let base = fig_params(0.6, 1.0).with_probe_offset(0.1, 0.2, 0.0).unwrap();
    let info = find_attractor(&base, tilted_seed(&base, 1e-3), &AttractorOptions::default()).unwrap();
    let (phi, _) = monodromy_stabilized(&base, &info.cycle, &MonodromySettings::default()).unwrap();
    let fl = extract_exponents(&phi, &base, &info);
    println!("DTC gamma={:.4e} nu={:.4e}", fl.gamma_fl, fl.nu_fl);
    let spec = EnsembleSpec {
        n_traj: 1,
        noise_on: false,
        tilt: 1e-3,
        ..EnsembleSpec::for_params(&base)
    };
    for j in 0..9 {
        let off = fl.nu_fl + (j as f64 - 4.0) * 2.0 * fl.gamma_fl.abs();
        let mut p = base.clone();
        p.probe.as_mut().unwrap().omega_pr = 0.5 * p.omega + off;
        let sp = spec.align_t_avg(&p);
        let (ipr, _) = intensity_tav(&p, &sp, true).unwrap();
        let (i0, _) = intensity_tav(&p, &sp, false).unwrap();
        println!("off/nu={:.3}: ipr={ipr:.4e} i0={i0:.4e} diff={:.4e}", off / fl.nu_fl, ipr - i0);
    }
}

#[test]
#[ignore]
fn diagnose_noiseless_dtc_amplitudes() {
    let base = fig_params(0.6, 1.0);
    let spec = EnsembleSpec {
        n_traj: 1,
        noise_on: false,
        tilt: 1e-3,
        ..EnsembleSpec::for_params(&base)
    };
    let two_t = 2.0 * base.period();
    let span = spec.t_relax + 2.0 * two_t;
    let trace = simulate_trace(&base, &spec, false, span, 20).unwrap();
    let tail: Vec<&(f64, FullState)> = trace
        .iter()
        .filter(|(t, _)| *t > spec.t_relax)
        .collect();
    let n = base.n_atoms;
    let jx_max = tail.iter().map(|(_, s)| s.jx.abs()).fold(0.0, f64::max);
    let ax_max = tail.iter().map(|(_, s)| s.ax.abs()).fold(0.0, f64::max);
    let ap_max = tail.iter().map(|(_, s)| s.ap.abs()).fold(0.0, f64::max);
    let d2k2 = base.delta_c * base.delta_c + base.kappa * base.kappa;
    // adiabatic cavity estimate from the spin amplitude
    let g_typ = base.coupling_g(0.0);
    let ax_pred = 4.0 * g_typ * jx_max * base.delta_c / (n.sqrt() * d2k2);
    println!("jx_max/N = {:.4}", jx_max / n);
    println!("ax_max = {ax_max:.3}, ap_max = {ap_max:.3}, adiabatic pred ~ {ax_pred:.3}");
    let i_avg: f64 =
        tail.iter().map(|(_, s)| s.photon_number()).sum::<f64>() / tail.len() as f64;
    println!("I_avg over tail = {i_avg:.3}");
    // mean-field comparison
    let info = find_attractor(&base, tilted_seed(&base, 1e-3), &AttractorOptions::default()).unwrap();
    println!("MF order param = {:.4}, jx_max/N on MF cycle = {:.4}",
        info.order_param,
        info.cycle.samples.iter().map(|s| s.jx.abs()).fold(0.0, f64::max) / n);
}

#[test]
#[ignore]
fn measure_phase_scan() {
    let base = fig_params(0.6, 1.0).with_probe_offset(0.1, 0.2, 0.0).unwrap();
    let scales = base.derive_scales().unwrap();
    let offs = [-0.2 * scales.omega_res, 0.0, 0.2 * scales.omega_res];
    let phis: Vec<f64> = (0..8).map(|i| i as f64 * std::f64::consts::TAU / 8.0).collect();
    let spec = EnsembleSpec { n_traj: 48, ..EnsembleSpec::for_params(&base) };
    let t0 = std::time::Instant::now();
    let map = phase_scan(&base, &offs, &phis, &spec).unwrap();
    for (j, off) in offs.iter().enumerate() {
        println!("--- offset/wres = {:.2}", off / scales.omega_res);
        for (i, phi) in phis.iter().enumerate() {
            let (v, se) = map.at(i, j);
            println!("  phi={phi:.3}: {v:+.4e} +- {se:.3e}");
        }
    }
    println!("phase scan took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_phase_scan_full_scale() {
    let base = fig_params(0.6, 1.0).with_probe_offset(0.1, 0.2, 0.0).unwrap();
    let scales = base.derive_scales().unwrap();
    let offs = [-0.2 * scales.omega_res, 0.0, 0.2 * scales.omega_res];
    let phis: Vec<f64> = (0..8).map(|i| i as f64 * std::f64::consts::TAU / 8.0).collect();
    let spec = EnsembleSpec { n_traj: 200, ..EnsembleSpec::for_params(&base) };
    let t0 = std::time::Instant::now();
    let map = phase_scan(&base, &offs, &phis, &spec).unwrap();
    for (j, off) in offs.iter().enumerate() {
        let vals: Vec<f64> = (0..phis.len()).map(|i| map.at(i, j).0).collect();
        let ses: Vec<f64> = (0..phis.len()).map(|i| map.at(i, j).1).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let max_dev = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let se_max = ses.iter().cloned().fold(0.0, f64::max);
        let sign_change = vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0);
        println!(
            "off/wres={:+.2}: mean={mean:+.3e} max_dev={max_dev:.3e} se_max={se_max:.3e} dev/se={:.2} sign_change={sign_change}",
            off / scales.omega_res,
            max_dev / se_max
        );
        println!("   vals: {:?}", vals.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    }
    println!("full phase scan took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn measure_left_boundary_fine() {
    let base = fig_params(0.6, 1.0);
    let scales = base.derive_scales().unwrap();
    let settings = SweepSettings::default();
    for i in 0..31 {
        let x = 0.86 + 0.03 * i as f64 / 30.0;
        let recs = spectrum_sweep(&base, &[x * 2.0 * scales.omega_res], &[base.g1], &settings);
        let line: Vec<String> = recs
            .iter()
            .map(|r| match &r.floquet {
                Some(f) => format!(
                    "{:?}({:?}) g={:+.3e} nu={:.4e}",
                    r.seed, r.kind, f.gamma_fl, f.nu_fl
                ),
                None => format!("{:?}({:?} res={:.1e})", r.seed, r.kind, r.residual),
            })
            .collect();
        println!("x={x:.4}: {}", line.join(" | "));
    }
}

#[test]
#[ignore]
fn measure_trivial_defect_distribution() {
    let p = fig_params(0.6, 1.0);
    let scales = p.derive_scales().unwrap();
    let omegas: Vec<f64> = (0..61)
        .map(|i| (0.7 + 0.5 * i as f64 / 60.0) * 2.0 * scales.omega_res)
        .collect();
    let g1s: Vec<f64> = (0..41).map(|i| i as f64 / 40.0 * p.g0).collect();
    let t0 = std::time::Instant::now();
    let recs = spectrum_sweep(&p, &omegas, &g1s, &SweepSettings::default());
    println!("sweep took {:?}", t0.elapsed());
    let mut pairs: Vec<(f64, f64, f64, f64)> = recs
        .iter()
        .filter_map(|r| {
            r.floquet
                .as_ref()
                .map(|f| (f.trivial_defect, r.residual, r.omega / (2.0 * scales.omega_res), r.g1 / p.g0))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("checked {} converged points", pairs.len());
    for (d, res, x, r) in pairs.iter().take(15) {
        println!("defect={d:.3e} residual={res:.3e} at x={x:.4} r={r:.3}");
    }
    let n_bad = pairs.iter().filter(|p| p.0 >= 1e-6).count();
    println!("{n_bad} points with defect >= 1e-6");
}
