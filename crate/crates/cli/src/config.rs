//! Config file schema and resolution into core parameter types.
//!
//! All frequencies in config files are expressed in units of kappa. Grid
//! axes mirror the natural plotting units: `grid.omega` in units of
//! 2*omega_res, `grid.omega_pr` as offsets from omega/2 in units of
//! omega_res, `grid.phi` in radians, `grid.g1_ratio` as g1/g0.

use anyhow::{anyhow, bail, Context, Result};
use dtc_core::{
    AttractorOptions, EnsembleSpec, ModelParams, MonodromySettings, ProbeParams, SweepSettings,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub attractor: AttractorSection,
    #[serde(default)]
    pub floquet: FloquetSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub lineshape: LineshapeSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kappa: f64,
    pub delta_c: f64,
    pub delta: f64,
    /// Absolute static coupling; overrides g0_over_gc when set.
    pub g0: Option<f64>,
    pub g0_over_gc: Option<f64>,
    /// Absolute modulation amplitude; overrides g1_over_g0 when set.
    pub g1: Option<f64>,
    pub g1_over_g0: Option<f64>,
    /// Absolute drive frequency; overrides omega_over_2wres when set.
    pub omega: Option<f64>,
    pub omega_over_2wres: Option<f64>,
    pub n_atoms: f64,
    pub probe: Option<ProbeSection>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kappa: 1.0,
            delta_c: 1.0,
            delta: 0.1,
            g0: None,
            g0_over_gc: Some(0.5),
            g1: None,
            g1_over_g0: Some(0.6),
            omega: None,
            omega_over_2wres: Some(1.0),
            n_atoms: 1e4,
            probe: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub eta0: f64,
    /// Absolute probe frequency; overrides omega_pr_offset when set.
    pub omega_pr: Option<f64>,
    /// (omega_pr - omega/2) / omega_res.
    pub omega_pr_offset: Option<f64>,
    pub phi: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection { eta0: 0.1, omega_pr: None, omega_pr_offset: Some(0.19), phi: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub noise_on: Option<bool>,
    pub dt: Option<f64>,
    pub t_relax: Option<f64>,
    /// Averaging window in units of 2T.
    pub t_avg_periods: Option<usize>,
    pub tilt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AttractorSection {
    /// Relaxation span in 2T periods; omitted => 20/gamma0.
    pub relax_periods: Option<usize>,
    pub tol: Option<f64>,
    pub n_relax_per_2t: Option<usize>,
    pub n_cycle_per_2t: Option<usize>,
    /// Symmetry-breaking seed amplitude (units of N).
    pub tilt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FloquetSection {
    pub n_cut: Option<usize>,
    pub tol: Option<f64>,
    pub max_n_cut: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub omega: Option<AxisSpec>,
    pub g1_ratio: Option<AxisSpec>,
    pub omega_pr: Option<AxisSpec>,
    pub phi: Option<AxisSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            bail!("grid count must be >= 1");
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        if !(self.stop > self.start) {
            bail!("grid must be monotone: start {} < stop {}", self.start, self.stop);
        }
        Ok((0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    /// Trace length in units of 2T.
    pub periods: usize,
    pub n_cut_per_2t: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection { periods: 8, n_cut_per_2t: 1024 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineshapeSection {
    /// "upper" or "lower".
    pub branch: String,
}

impl Default for LineshapeSection {
    fn default() -> Self {
        LineshapeSection { branch: "upper".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub output_dir: String,
    pub workers: usize,
    pub reproducible: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { output_dir: "out".into(), workers: 0, reproducible: true }
    }
}

/// Fully materialized run inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: Config,
    pub params: ModelParams,
    pub ensemble: EnsembleSpec,
    pub attractor: AttractorOptions,
    pub monodromy: MonodromySettings,
    pub sweep: SweepSettings,
    pub tilt: f64,
}

impl Config {
    /// Parse, apply dotted-path overrides, and re-validate.
    pub fn from_toml_with_overrides(text: &str, sets: &[String]) -> Result<Config> {
        let mut table: toml::Table = toml::from_str(text).context("parsing config file")?;
        for setting in sets {
            let (path, value) = setting
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects key.path=value, got {setting:?}"))?;
            apply_override(&mut table, path.trim(), value.trim())?;
        }
        let merged = toml::to_string(&table)?;
        Ok(toml::from_str(&merged).context("validating merged config")?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let m = &self.model;
        let mut p = ModelParams {
            kappa: m.kappa,
            delta_c: m.delta_c,
            delta: m.delta,
            g0: 0.0,
            g1: 0.0,
            omega: 1.0,
            n_atoms: m.n_atoms,
            probe: None,
        };
        p.g0 = match (m.g0, m.g0_over_gc) {
            (Some(g0), _) => g0,
            (None, Some(r)) => r * p.critical_coupling(),
            (None, None) => bail!("model needs g0 or g0_over_gc"),
        };
        p.g1 = match (m.g1, m.g1_over_g0) {
            (Some(g1), _) => g1,
            (None, Some(r)) => r * p.g0,
            (None, None) => 0.0,
        };
        p.omega = match (m.omega, m.omega_over_2wres) {
            (Some(w), _) => w,
            (None, Some(x)) => {
                let omega_res = p
                    .resonance_frequency()
                    .map_err(|e| anyhow!("cannot express omega in units of 2*omega_res: {e}"))?;
                x * 2.0 * omega_res
            }
            (None, None) => bail!("model needs omega or omega_over_2wres"),
        };
        if let Some(pr) = &m.probe {
            let omega_pr = match (pr.omega_pr, pr.omega_pr_offset) {
                (Some(w), _) => w,
                (None, Some(off)) => {
                    let omega_res = p
                        .resonance_frequency()
                        .map_err(|e| anyhow!("cannot express omega_pr as an offset: {e}"))?;
                    0.5 * p.omega + off * omega_res
                }
                (None, None) => bail!("probe needs omega_pr or omega_pr_offset"),
            };
            p.probe = Some(ProbeParams {
                eta0: pr.eta0,
                omega_pr,
                phi: pr.phi.rem_euclid(std::f64::consts::TAU),
            });
        }

        let e = &self.ensemble;
        let mut ensemble = EnsembleSpec::for_params(&p);
        if let Some(v) = e.n_traj {
            ensemble.n_traj = v;
        }
        if let Some(v) = e.seed {
            ensemble.seed = v;
        }
        if let Some(v) = e.noise_on {
            ensemble.noise_on = v;
        }
        if let Some(v) = e.dt {
            ensemble.dt = v;
        }
        if let Some(v) = e.t_relax {
            ensemble.t_relax = v;
        }
        if let Some(v) = e.t_avg_periods {
            ensemble.t_avg = v as f64 * 2.0 * p.period();
        }
        if let Some(v) = e.tilt {
            ensemble.tilt = v;
        }

        let a = &self.attractor;
        let attractor = AttractorOptions {
            relax_periods: a.relax_periods,
            tol: a.tol.unwrap_or(1e-6),
            n_relax_per_2t: a.n_relax_per_2t.unwrap_or(1024),
            n_cycle_per_2t: a.n_cycle_per_2t.unwrap_or(8192),
            ..AttractorOptions::default()
        };
        let f = &self.floquet;
        let defaults = MonodromySettings::default();
        let monodromy = MonodromySettings {
            n_cut: f.n_cut.unwrap_or(defaults.n_cut),
            tol: f.tol.unwrap_or(defaults.tol),
            max_n_cut: f.max_n_cut.unwrap_or(defaults.max_n_cut),
        };
        let tilt = a.tilt.unwrap_or(dtc_core::meanfield::DEFAULT_TILT);
        let sweep = SweepSettings { attractor: attractor.clone(), monodromy, tilt };
        Ok(Resolved { config: self.clone(), params: p, ensemble, attractor, monodromy, sweep, tilt })
    }
}

fn apply_override(table: &mut toml::Table, path: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|s| s.is_empty()) {
        bail!("bad --set path {path:?}");
    }
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set path {path:?} crosses a non-table value at {part:?}"))?;
    }
    // Parse the value as TOML; fall back to a string literal.
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(value.to_string()),
    };
    current.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
