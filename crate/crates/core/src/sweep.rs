//! Single-point runs and parameter sweeps with plot-ready CSV output.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{analyze, Analysis, AnalysisOptions, DirectCheck};
use crate::error::{DtnError, Result};
use crate::model::{ModelConfig, PotentialSpec, CONFIG_KEYS};
use crate::sim::{estimate, SimConfig, SimEstimate};
use crate::stage::Resolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    Simulate,
    Both,
}

impl Mode {
    fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }
}

/// Settings shared by every point of a run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub resolution: Resolution,
    pub seed: u64,
    pub replicas: usize,
    /// Simulated time in units of `1/r0`.
    pub horizon_turns: f64,
    pub direct_check: DirectCheck,
    pub trace: bool,
    /// Keep the kernel in the returned analysis.
    pub keep_kernel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            resolution: Resolution::default(),
            seed: 1,
            replicas: 8,
            horizon_turns: 1e4,
            direct_check: DirectCheck::Auto,
            trace: false,
            keep_kernel: false,
        }
    }
}

impl RunOptions {
    pub fn sim_config(&self, config: &ModelConfig) -> Result<SimConfig> {
        let params = config.to_params()?;
        let horizon = self.horizon_turns / params.r0;
        let mut c = SimConfig::new(params)
            .with_seed(self.seed)
            .with_replicas(self.replicas)
            .with_horizon(horizon);
        c.trace = self.trace;
        Ok(c)
    }
}

/// One CSV row.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct PointRecord {
    pub lambda: f64,
    pub v0: f64,
    pub r0: f64,
    pub theta_w: f64,
    pub a: f64,
    pub eccentricity: f64,
    pub kappa: Option<f64>,
    pub v_p: Option<f64>,
    pub c_p: Option<f64>,
    pub e_xw: Option<f64>,
    pub e_cost: Option<f64>,
    pub e_delta: Option<f64>,
    pub e_xb: Option<f64>,
    pub dimension: Option<usize>,
    pub row_defect: Option<f64>,
    pub gate_violation: bool,
    pub doeblin_mass: Option<f64>,
    pub identity_defect: Option<f64>,
    pub bound_violations: Option<usize>,
    pub residual: Option<f64>,
    pub direct_gap: Option<f64>,
    pub v_p_sim: Option<f64>,
    pub v_p_sim_hw: Option<f64>,
    pub c_p_sim: Option<f64>,
    pub c_p_sim_hw: Option<f64>,
    pub sim_stages: Option<u64>,
    pub sim_transmissions: Option<u64>,
    pub sim_excluded: Option<usize>,
    pub v_p_gap: Option<f64>,
    pub c_p_gap: Option<f64>,
    pub error: Option<String>,
}

impl PointRecord {
    fn from_config(c: &ModelConfig) -> Self {
        PointRecord {
            lambda: c.lambda,
            v0: c.v0,
            r0: c.r0,
            theta_w: c.theta_w,
            a: c.a,
            eccentricity: c.eccentricity,
            kappa: c.get("kappa"),
            ..Default::default()
        }
    }

    fn fill_analysis(&mut self, a: &Analysis) {
        let m = &a.metrics;
        let d = &a.diagnostics;
        self.v_p = Some(m.v_p);
        self.c_p = m.c_p;
        self.e_xw = Some(m.components.e_xw);
        self.e_cost = Some(m.components.e_cost);
        self.e_delta = Some(m.components.e_delta);
        self.e_xb = Some(m.components.e_xb);
        self.dimension = Some(d.dimension);
        self.row_defect = Some(d.max_row_defect);
        self.doeblin_mass = Some(d.doeblin_mass);
        self.identity_defect = Some(d.max_identity_defect);
        self.bound_violations = Some(d.bound_violations.len());
        self.residual = Some(d.residual);
        self.direct_gap = d.direct_gap;
    }

    fn fill_sim(&mut self, e: &SimEstimate) {
        self.v_p_sim = Some(e.v_p);
        self.v_p_sim_hw = Some(e.v_p_half_width);
        self.c_p_sim = e.c_p;
        self.c_p_sim_hw = e.c_p.map(|_| e.c_p_half_width);
        self.sim_stages = Some(e.stages);
        self.sim_transmissions = Some(e.transmissions);
        self.sim_excluded = Some(e.excluded);
    }

    fn fill_error(&mut self, e: &DtnError) {
        if let DtnError::GridTooCoarse { defect, .. } = e {
            self.row_defect = Some(*defect);
            self.gate_violation = true;
        }
        self.error = Some(e.to_string());
    }
}

/// Full output of one point.
#[derive(Debug)]
pub struct PointResult {
    pub record: PointRecord,
    pub analysis: Option<Analysis>,
    pub simulation: Option<SimEstimate>,
}

/// Run one configuration; failures surface as errors.
pub fn run_point(config: &ModelConfig, mode: Mode, opts: &RunOptions) -> Result<PointResult> {
    let params = config.to_params()?;
    let mut record = PointRecord::from_config(config);
    let analysis = if mode.analytic() {
        let a = analyze(
            &params,
            &AnalysisOptions {
                resolution: opts.resolution,
                direct_check: opts.direct_check,
                keep_kernel: opts.keep_kernel,
            },
        )?;
        record.fill_analysis(&a);
        Some(a)
    } else {
        None
    };
    let simulation = if mode.simulate() {
        let e = estimate(&opts.sim_config(config)?)?;
        record.fill_sim(&e);
        Some(e)
    } else {
        None
    };
    if let (Some(a), Some(s)) = (&analysis, &simulation) {
        record.v_p_gap = Some((s.v_p - a.metrics.v_p).abs() / s.v_p.abs());
        record.c_p_gap = match (s.c_p, a.metrics.c_p) {
            (Some(x), Some(y)) => Some((x - y).abs() / x.abs()),
            _ => None,
        };
    }
    Ok(PointResult {
        record,
        analysis,
        simulation,
    })
}

/// Run one configuration; a failure becomes the record's error column.
pub fn run_point_record(config: &ModelConfig, mode: Mode, opts: &RunOptions) -> PointRecord {
    match run_point(config, mode, opts) {
        Ok(r) => r.record,
        Err(e) => {
            let mut rec = PointRecord::from_config(config);
            rec.fill_error(&e);
            rec
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Cartesian sweep over one or two parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: Axis,
    #[serde(default)]
    pub axis2: Option<Axis>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub output: Option<String>,
    /// Base configuration the axes override.
    #[serde(default)]
    pub base: ModelConfig,
}

pub const PRESETS: [&str; 3] = ["fig4", "fig5", "fig6"];

impl SweepSpec {
    pub fn new(axis1: Axis, axis2: Option<Axis>, mode: Mode) -> Result<Self> {
        let s = SweepSpec {
            axis1,
            axis2,
            mode,
            output: None,
            base: ModelConfig::default(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Built-in sweeps over the axes of the three result figures.
    pub fn preset(name: &str) -> Result<Self> {
        let axis = |name: &str, values: &[f64]| Axis {
            name: name.into(),
            values: values.to_vec(),
        };
        match name {
            "fig4" => Self::new(
                axis("a", &[0.5, 1.0, 1.5, 2.0]),
                Some(axis("eccentricity", &[0.0, 0.2, 0.4, 0.6, 0.8])),
                Mode::Analytic,
            ),
            "fig5" => Self::new(
                axis("lambda", &[0.25, 0.5, 1.0, 2.0, 4.0]),
                Some(axis("r0", &[0.5, 1.0, 2.0])),
                Mode::Analytic,
            ),
            "fig6" => {
                let mut s = Self::new(
                    axis("theta_w", &[PI / 16.0, PI / 8.0, PI / 4.0, PI / 2.0]),
                    Some(axis("a", &[0.5, 1.0, 2.0, 4.0])),
                    Mode::Analytic,
                )?;
                s.base.eccentricity = 0.0;
                Ok(s)
            }
            other => Err(DtnError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(s).map_err(|e| DtnError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// A preset name or the path of a JSON sweep file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            return Self::preset(name_or_path);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| DtnError::Config(format!("sweep `{name_or_path}`: {e}")))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in std::iter::once(&self.axis1).chain(&self.axis2) {
            let mut probe = ModelConfig::default();
            if !CONFIG_KEYS.contains(&axis.name.as_str()) && axis.name != "kappa" {
                return Err(DtnError::Config(format!("unknown sweep parameter `{}`", axis.name)));
            }
            probe.set(&axis.name, 0.0)?;
            if axis.values.is_empty() {
                return Err(DtnError::Config(format!("sweep axis `{}` has no values", axis.name)));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(DtnError::Config(format!(
                    "sweep axis `{}` has a non-finite value",
                    axis.name
                )));
            }
        }
        if let Some(b) = &self.axis2 {
            if b.name == self.axis1.name {
                return Err(DtnError::Config("the two sweep axes must differ".into()));
            }
        }
        Ok(())
    }

    /// Configurations in output order: axis 1 outer, axis 2 inner, each ascending.
    pub fn points(&self) -> Result<Vec<ModelConfig>> {
        let sorted = |a: &Axis| {
            let mut v = a.values.clone();
            v.sort_by(f64::total_cmp);
            v
        };
        let v1 = sorted(&self.axis1);
        let v2 = self.axis2.as_ref().map(sorted);
        let mut out = Vec::new();
        for &x in &v1 {
            let inner: Vec<Option<f64>> = match &v2 {
                Some(v) => v.iter().map(|&y| Some(y)).collect(),
                None => vec![None],
            };
            for y in inner {
                let mut c = self.base.clone();
                if (self.axis1.name == "kappa" || self.axis2.as_ref().is_some_and(|b| b.name == "kappa"))
                    && matches!(c.potential, PotentialSpec::NegAbsTheta)
                {
                    c.potential = PotentialSpec::ExpProgress { kappa: 0.0 };
                }
                c.set(&self.axis1.name, x)?;
                if let (Some(b), Some(y)) = (&self.axis2, y) {
                    c.set(&b.name, y)?;
                }
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// Run every point of the sweep; rows keep the order of `points()`.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<PointRecord>> {
    let points = spec.points()?;
    Ok(points
        .par_iter()
        .map(|c| run_point_record(c, spec.mode, opts))
        .collect())
}

pub fn write_records<W: Write>(records: &[PointRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_to_path(records: &[PointRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(records, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_size() {
        assert_eq!(SweepSpec::preset("fig4").unwrap().points().unwrap().len(), 20);
        assert_eq!(SweepSpec::preset("fig5").unwrap().points().unwrap().len(), 15);
        let fig6 = SweepSpec::preset("fig6").unwrap().points().unwrap();
        assert_eq!(fig6.len(), 16);
        assert!(fig6.iter().all(|c| c.eccentricity == 0.0));
        assert!(SweepSpec::preset("fig7").is_err());
    }

    #[test]
    fn single_axis_is_ascending() {
        let s = SweepSpec::new(
            Axis {
                name: "lambda".into(),
                values: vec![2.0, 0.5, 1.0],
            },
            None,
            Mode::Analytic,
        )
        .unwrap();
        let l: Vec<f64> = s.points().unwrap().iter().map(|c| c.lambda).collect();
        assert_eq!(l, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn spec_validation() {
        let bad = r#"{"axis1": {"name": "speed", "values": [1]}}"#;
        assert!(SweepSpec::from_json_str(bad).is_err());
        let empty = r#"{"axis1": {"name": "lambda", "values": []}}"#;
        assert!(SweepSpec::from_json_str(empty).is_err());
        let ok = r#"{"axis1": {"name": "kappa", "values": [0.5]}, "mode": "analytic"}"#;
        let s = SweepSpec::from_json_str(ok).unwrap();
        assert_eq!(
            s.points().unwrap()[0].potential,
            PotentialSpec::ExpProgress { kappa: 0.5 }
        );
    }

    #[test]
    fn failures_become_rows() {
        let c = ModelConfig {
            lambda: -1.0,
            ..Default::default()
        };
        let r = run_point_record(&c, Mode::Analytic, &RunOptions::default());
        assert!(r.error.unwrap().contains("lambda"));
        assert!(r.v_p.is_none());
    }

    #[test]
    fn coarse_grid_is_marked() {
        let e = DtnError::GridTooCoarse {
            what: "kernel row",
            defect: 0.08,
            limit: 0.05,
            location: "W(i=0, k=0)".into(),
        };
        let mut r = PointRecord::default();
        r.fill_error(&e);
        assert!(r.gate_violation);
        assert_eq!(r.row_defect, Some(0.08));
    }

    #[test]
    fn csv_is_deterministic() {
        let opts = RunOptions {
            resolution: Resolution::new(12, 11),
            ..Default::default()
        };
        let s = SweepSpec::new(
            Axis {
                name: "lambda".into(),
                values: vec![0.5, 1.0],
            },
            None,
            Mode::Analytic,
        )
        .unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_records(&run_sweep(&s, &opts).unwrap(), &mut a).unwrap();
        write_records(&run_sweep(&s, &opts).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().starts_with("lambda,v0,r0"));
    }
}
