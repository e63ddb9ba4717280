use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, GainScale};
use crate::error::{Error, Result};
use crate::noma::{DbConvention, LinkBudget};
use crate::optimizer::{Objective, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Distribution of the max-sum rate over random drops, per TSNR.
    Fig2,
    /// Mean max-sum rate over (K, ε, TSNR).
    Fig3,
    /// Mean max-min rate over (ε, TSNR).
    Fig4,
    /// The fixed three-user max-min instance, with oracle cross-check rows.
    MaxminExample,
    /// Grid colouring, assignment and per-cell solves end to end.
    NetworkDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2,
        ExperimentKind::Fig3,
        ExperimentKind::Fig4,
        ExperimentKind::MaxminExample,
        ExperimentKind::NetworkDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::MaxminExample => "maxmin_example",
            ExperimentKind::NetworkDemo => "network_demo",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::config(
                    "experiment",
                    format!(
                        "unknown experiment `{s}`, expected one of {}",
                        names.join(", ")
                    ),
                )
            })
    }
}

/// Room geometry, optics and link constants. Defaults are the simulation
/// table values; bandwidth only matters for the network demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub vap_height_m: f64,
    pub user_height_m: f64,
    pub half_power_semiangle_deg: f64,
    pub detector_area_cm2: f64,
    pub responsivity: f64,
    pub fov_semiangle_deg: f64,
    pub filter_gain: f64,
    pub refractive_index: f64,
    pub bandwidth_hz: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            vap_height_m: 3.0,
            user_height_m: 0.85,
            half_power_semiangle_deg: 60.0,
            detector_area_cm2: 1.0,
            responsivity: 0.4,
            fov_semiangle_deg: 32.0,
            filter_gain: 1.0,
            refractive_index: 1.5,
            bandwidth_hz: 20e6,
        }
    }
}

impl PhysicalParams {
    fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("vap_height_m", self.vap_height_m),
            ("user_height_m", self.user_height_m),
            ("half_power_semiangle_deg", self.half_power_semiangle_deg),
            ("detector_area_cm2", self.detector_area_cm2),
            ("responsivity", self.responsivity),
            ("fov_semiangle_deg", self.fov_semiangle_deg),
            ("filter_gain", self.filter_gain),
            ("refractive_index", self.refractive_index),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("physical.{field}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        for (field, v) in [
            ("half_power_semiangle_deg", self.half_power_semiangle_deg),
            ("fov_semiangle_deg", self.fov_semiangle_deg),
        ] {
            if v >= 90.0 {
                return Err(Error::config(
                    format!("physical.{field}"),
                    "must be below 90 degrees",
                ));
            }
        }
        if self.vap_height_m <= self.user_height_m {
            return Err(Error::config(
                "physical.vap_height_m",
                "must exceed physical.user_height_m",
            ));
        }
        Ok(())
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        ChannelParams::new(
            self.detector_area_cm2 * 1e-4,
            self.filter_gain,
            self.refractive_index,
            self.fov_semiangle_deg.to_radians(),
            self.half_power_semiangle_deg.to_radians(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub gain_scale: GainScale,
    pub tsnr_convention: DbConvention,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            gain_scale: GainScale::Normalized,
            tsnr_convention: DbConvention::Amplitude,
        }
    }
}

/// QoS targets: one value for every user, or one per user (weakest first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QosSpec {
    Uniform(f64),
    PerUser(Vec<f64>),
}

impl QosSpec {
    pub fn targets(&self, k: usize) -> Option<Vec<f64>> {
        match self {
            QosSpec::Uniform(t) => Some(vec![*t; k]),
            QosSpec::PerUser(v) if v.len() == k => Some(v.clone()),
            QosSpec::PerUser(_) => None,
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            QosSpec::Uniform(t) => std::slice::from_ref(t),
            QosSpec::PerUser(v) => v,
        }
    }
}

impl fmt::Display for QosSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSweep {
    users: Option<Vec<usize>>,
    epsilon: Option<Vec<f64>>,
    tsnr_db: Option<Vec<f64>>,
    qos: Option<Vec<QosSpec>>,
    gains_1e4: Option<Vec<f64>>,
    oracle_grid_step: Option<f64>,
    histogram_bin: Option<f64>,
}

/// Sweep axes after per-experiment defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    /// User counts K.
    pub users: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub tsnr_db: Vec<f64>,
    pub qos: Vec<QosSpec>,
    /// Fixed gains for the max-min example, in units of 1e-4 (weakest first).
    pub gains_1e4: Vec<f64>,
    pub oracle_grid_step: f64,
    pub histogram_bin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkOptions {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Users dropped uniformly over the service area per trial.
    pub users: usize,
    pub dedicated_fraction: f64,
    pub dedicated_cap: f64,
    pub criterion: Objective,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            spacing_m: 1.8,
            users: 30,
            dedicated_fraction: 0.1,
            dedicated_cap: 0.5,
            criterion: Objective::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub plots: bool,
    /// Per-iteration solver logs for trial 0 of every sweep point.
    pub trace: bool,
    /// Wall-clock solve times, written apart from the deterministic tables.
    pub timing: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            plots: true,
            trace: false,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    experiment: Option<ExperimentKind>,
    seed: Option<u64>,
    trials: Option<usize>,
    physical: PhysicalParams,
    model: ModelOptions,
    sweep: RawSweep,
    solver: SolverConfig,
    network: NetworkOptions,
    output: OutputOptions,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub trace: bool,
    pub timing: bool,
}

pub const DEFAULT_SEED: u64 = 20_190_425;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub physical: PhysicalParams,
    pub model: ModelOptions,
    pub sweep: Sweep,
    pub solver: SolverConfig,
    pub network: NetworkOptions,
    pub output: OutputOptions,
}

fn default_trials(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::Fig2 | ExperimentKind::Fig3 | ExperimentKind::Fig4 => 10_000,
        ExperimentKind::MaxminExample | ExperimentKind::NetworkDemo => 1,
    }
}

fn default_sweep(kind: ExperimentKind) -> Sweep {
    let tsnr_range = vec![65.0, 70.0, 75.0, 80.0, 85.0];
    let eps_range = vec![0.0, 0.02, 0.06, 0.10];
    let base = Sweep {
        users: vec![3],
        epsilon: vec![0.06],
        tsnr_db: tsnr_range.clone(),
        qos: vec![QosSpec::Uniform(0.6)],
        gains_1e4: vec![0.293, 0.359, 0.454],
        oracle_grid_step: 0.005,
        histogram_bin: 0.05,
    };
    match kind {
        ExperimentKind::Fig2 => base,
        ExperimentKind::Fig3 => Sweep {
            users: vec![2, 3, 4],
            epsilon: eps_range,
            ..base
        },
        ExperimentKind::Fig4 => Sweep {
            epsilon: eps_range,
            ..base
        },
        ExperimentKind::MaxminExample => Sweep {
            epsilon: vec![0.05],
            tsnr_db: vec![70.0],
            qos: vec![
                QosSpec::PerUser(vec![1.0; 3]),
                QosSpec::PerUser(vec![2.0, 1.0, 1.0]),
            ],
            ..base
        },
        ExperimentKind::NetworkDemo => Sweep {
            epsilon: vec![0.05],
            tsnr_db: vec![70.0],
            qos: vec![QosSpec::Uniform(0.2)],
            ..base
        },
    }
}

impl ExperimentConfig {
    /// All defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::resolve(
            RawConfig::default(),
            &Overrides {
                experiment: Some(kind),
                ..Overrides::default()
            },
        )
        .expect("built-in defaults are valid")
    }

    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| Error::config("<config>", e.to_string().trim_end()))?;
        Self::resolve(raw, overrides)
    }

    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, overrides)
    }

    fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<Self> {
        let experiment = overrides.experiment.or(raw.experiment).ok_or_else(|| {
            Error::config(
                "experiment",
                "missing; set it in the file or on the command line",
            )
        })?;
        let d = default_sweep(experiment);
        let s = raw.sweep;
        let sweep = Sweep {
            users: s.users.unwrap_or(d.users),
            epsilon: s.epsilon.unwrap_or(d.epsilon),
            tsnr_db: s.tsnr_db.unwrap_or(d.tsnr_db),
            qos: s.qos.unwrap_or(d.qos),
            gains_1e4: s.gains_1e4.unwrap_or(d.gains_1e4),
            oracle_grid_step: s.oracle_grid_step.unwrap_or(d.oracle_grid_step),
            histogram_bin: s.histogram_bin.unwrap_or(d.histogram_bin),
        };
        let mut output = raw.output;
        if let Some(dir) = &overrides.out {
            output.dir = dir.clone();
        }
        output.trace |= overrides.trace;
        output.timing |= overrides.timing;
        let mut solver = raw.solver;
        solver.record_trace = output.trace;

        let cfg = Self {
            experiment,
            seed: overrides.seed.or(raw.seed).unwrap_or(DEFAULT_SEED),
            trials: overrides
                .trials
                .or(raw.trials)
                .unwrap_or(default_trials(experiment)),
            physical: raw.physical,
            model: raw.model,
            sweep,
            solver,
            network: raw.network,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        self.physical.validate()?;
        self.solver.validate()?;
        let s = &self.sweep;
        for (field, empty) in [
            ("users", s.users.is_empty()),
            ("epsilon", s.epsilon.is_empty()),
            ("tsnr_db", s.tsnr_db.is_empty()),
            ("qos", s.qos.is_empty()),
        ] {
            if empty {
                return Err(Error::config(format!("sweep.{field}"), "must not be empty"));
            }
        }
        for (i, k) in s.users.iter().enumerate() {
            if *k == 0 {
                return Err(Error::config(
                    format!("sweep.users[{i}]"),
                    "must be at least 1",
                ));
            }
        }
        for (i, e) in s.epsilon.iter().enumerate() {
            if !(0.0..1.0).contains(e) {
                return Err(Error::config(
                    format!("sweep.epsilon[{i}]"),
                    format!("{e} outside [0, 1)"),
                ));
            }
        }
        for (i, t) in s.tsnr_db.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::config(
                    format!("sweep.tsnr_db[{i}]"),
                    "must be finite",
                ));
            }
        }
        for (i, q) in s.qos.iter().enumerate() {
            if q.values().is_empty() {
                return Err(Error::config(
                    format!("sweep.qos[{i}]"),
                    "must not be empty",
                ));
            }
            if let Some(j) = q
                .values()
                .iter()
                .position(|t| !(*t >= 0.0 && t.is_finite()))
            {
                return Err(Error::config(
                    format!("sweep.qos[{i}][{j}]"),
                    "targets must be finite and non-negative",
                ));
            }
            if let QosSpec::PerUser(v) = q {
                if let Some(k) = s.users.iter().find(|k| **k != v.len()) {
                    return Err(Error::config(
                        format!("sweep.qos[{i}]"),
                        format!("has {} targets but the sweep includes K = {k}", v.len()),
                    ));
                }
            }
        }
        if !(s.oracle_grid_step > 0.0 && s.oracle_grid_step <= 1.0) {
            return Err(Error::config(
                "sweep.oracle_grid_step",
                "must lie in (0, 1]",
            ));
        }
        if !(s.histogram_bin > 0.0 && s.histogram_bin.is_finite()) {
            return Err(Error::config("sweep.histogram_bin", "must be positive"));
        }
        for (i, g) in s.gains_1e4.iter().enumerate() {
            if !(*g > 0.0 && g.is_finite()) {
                return Err(Error::config(
                    format!("sweep.gains_1e4[{i}]"),
                    "must be positive",
                ));
            }
        }

        match self.experiment {
            ExperimentKind::MaxminExample => {
                if s.users != [s.gains_1e4.len()] {
                    return Err(Error::config(
                        "sweep.users",
                        format!("must be [{}] to match sweep.gains_1e4", s.gains_1e4.len()),
                    ));
                }
                if s.gains_1e4.len() > 4 {
                    return Err(Error::config(
                        "sweep.gains_1e4",
                        "the oracle cross-check supports at most 4 users",
                    ));
                }
            }
            ExperimentKind::NetworkDemo => {
                let n = &self.network;
                if n.rows == 0 || n.cols == 0 {
                    return Err(Error::config(
                        "network.rows",
                        "grid needs at least one row and column",
                    ));
                }
                if !(n.spacing_m > 0.0) {
                    return Err(Error::config("network.spacing_m", "must be positive"));
                }
                if n.users == 0 {
                    return Err(Error::config("network.users", "must be at least 1"));
                }
                if !(n.dedicated_fraction > 0.0
                    && n.dedicated_fraction <= n.dedicated_cap
                    && n.dedicated_cap < 1.0)
                {
                    return Err(Error::config(
                        "network.dedicated_fraction",
                        "need 0 < dedicated_fraction <= dedicated_cap < 1",
                    ));
                }
                if s.qos.len() != 1 || !matches!(s.qos[0], QosSpec::Uniform(_)) {
                    return Err(Error::config(
                        "sweep.qos",
                        "the network demo takes a single uniform target",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn budget(&self, tsnr_db: f64, epsilon: f64) -> Result<LinkBudget> {
        LinkBudget::new(
            tsnr_db,
            self.physical.responsivity,
            epsilon,
            self.model.tsnr_convention,
        )
    }
}
