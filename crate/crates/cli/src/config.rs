//! TOML experiment configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use ptssh_core::dynamics::{default_t_max, QuenchProtocol, DEFAULT_DIP_FRACTION, DEFAULT_TIME_STEPS};
use ptssh_core::lattice::HybridChainSpec;
use ptssh_core::scatter::{log_grid, PotentialStack, StackSpec};
use ptssh_core::spectral::{linear_grid, EdgeCriteria, Side, DEFAULT_ENERGY_TOL, DEFAULT_N_EDGE};

use crate::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    EdgeStates,
    BandSweep,
    Quench,
    ScatterSweep,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Spectrum,
        Command::EdgeStates,
        Command::BandSweep,
        Command::Quench,
        Command::ScatterSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::EdgeStates => "edge-states",
            Command::BandSweep => "band-sweep",
            Command::Quench => "quench",
            Command::ScatterSweep => "scatter-sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown output format '{other}' (expected csv, json or svg)")),
        }
    }
}

pub fn parse_emit_list(list: &str) -> Result<BTreeSet<Format>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Either explicit values or an inclusive uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl VGrid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Self {
            values: None,
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, String> {
        let vs = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                if !(h > 0.0 && h.is_finite() && a.is_finite() && b.is_finite() && b >= a) {
                    return Err(format!("v grid needs start <= stop and step > 0 (got {a}, {b}, {h})"));
                }
                linear_grid(a, b, h)
            }
            _ => return Err("v grid takes either `values` or all of `start`, `stop`, `step`".into()),
        };
        if vs.is_empty() {
            return Err("v grid is empty".into());
        }
        if let Some(bad) = vs.iter().find(|v| !v.is_finite()) {
            return Err(format!("v grid contains {bad}"));
        }
        Ok(vs)
    }
}

/// Either explicit energies or `n_points` log-spaced on `[e_min, e_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
}

impl EnergyGrid {
    pub fn log(e_min: f64, e_max: f64, n_points: usize) -> Self {
        Self {
            values: None,
            e_min: Some(e_min),
            e_max: Some(e_max),
            n_points: Some(n_points),
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, String> {
        let es = match (&self.values, self.e_min, self.e_max, self.n_points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if !(a > 0.0 && b >= a && b.is_finite()) {
                    return Err(format!("energy grid needs 0 < e_min <= e_max (got {a}, {b})"));
                }
                log_grid(a, b, n)
            }
            _ => return Err("energies take either `values` or all of `e_min`, `e_max`, `n_points`".into()),
        };
        if es.is_empty() {
            return Err("energy grid is empty".into());
        }
        Ok(es)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeParams {
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
    #[serde(default = "default_n_edge")]
    pub n_edge: usize,
    /// Also compare against the same chain with the potential switched off.
    #[serde(default = "yes")]
    pub compare_plain: bool,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            energy_tol: DEFAULT_ENERGY_TOL,
            n_edge: DEFAULT_N_EDGE,
            compare_plain: true,
        }
    }
}

impl EdgeParams {
    pub fn criteria(&self) -> EdgeCriteria {
        EdgeCriteria {
            energy_tol: self.energy_tol,
            n_edge: self.n_edge,
            ..EdgeCriteria::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    Left,
    Right,
    Both,
}

impl Sides {
    pub fn list(self) -> Vec<Side> {
        match self {
            Sides::Left => vec![Side::Left],
            Sides::Right => vec![Side::Right],
            Sides::Both => vec![Side::Left, Side::Right],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchParams {
    /// `v` before the quench; `chain.v` is the post-quench value.
    pub v_pre: f64,
    #[serde(default = "both")]
    pub initial_side: Sides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_steps")]
    pub n_time_steps: usize,
    #[serde(default = "default_dip")]
    pub dip_fraction: f64,
    #[serde(default = "yes")]
    pub renormalize_heatmap: bool,
    #[serde(default)]
    pub renormalize_csv: bool,
}

impl QuenchParams {
    pub fn new(v_pre: f64) -> Self {
        Self {
            v_pre,
            initial_side: Sides::Both,
            t_max: None,
            n_time_steps: DEFAULT_TIME_STEPS,
            dip_fraction: DEFAULT_DIP_FRACTION,
            renormalize_heatmap: true,
            renormalize_csv: false,
        }
    }
}

fn default_energy_tol() -> f64 {
    DEFAULT_ENERGY_TOL
}
fn default_n_edge() -> usize {
    DEFAULT_N_EDGE
}
fn default_steps() -> usize {
    DEFAULT_TIME_STEPS
}
fn default_dip() -> f64 {
    DEFAULT_DIP_FRACTION
}
fn yes() -> bool {
    true
}
fn both() -> Sides {
    Sides::Both
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Subdirectory name inside a batch; defaults to the command name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit: Option<BTreeSet<Format>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<HybridChainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<VGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quench: Option<QuenchParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<StackSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<EnergyGrid>,
}

/// A fully validated experiment, ready to run.
#[derive(Debug, Clone)]
pub enum Plan {
    Spectrum(HybridChainSpec),
    EdgeStates(HybridChainSpec, EdgeParams),
    BandSweep(HybridChainSpec, Vec<f64>),
    Quench {
        protocols: Vec<QuenchProtocol>,
        params: QuenchParams,
    },
    ScatterSweep {
        spec: StackSpec,
        stack: PotentialStack,
        energies: Vec<f64>,
    },
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn emit_set(&self) -> BTreeSet<Format> {
        self.emit
            .clone()
            .unwrap_or_else(|| [Format::Csv, Format::Json, Format::Svg].into())
    }

    pub fn dir_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.command.map_or("experiment", Command::name).to_string())
    }

    fn chain(&self, command: Command) -> Result<HybridChainSpec, ExperimentError> {
        let chain = self
            .chain
            .ok_or_else(|| invalid(format!("{command} needs a [chain] section")))?;
        chain.validate().map_err(|e| invalid(format!("[chain]: {e}")))?;
        Ok(chain)
    }

    /// Checks everything that can be checked without computing.
    pub fn plan(&self) -> Result<Plan, ExperimentError> {
        let command = self.command.ok_or_else(|| invalid("config does not name a command"))?;
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(invalid(format!("name '{name}' is not a plain directory name")));
            }
        }
        if self.emit.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err(invalid("emit list is empty"));
        }
        let unused = |section: &str, present: bool| {
            if present {
                Err(invalid(format!("[{section}] is not used by {command}")))
            } else {
                Ok(())
            }
        };
        if command != Command::ScatterSweep {
            unused("stack", self.stack.is_some())?;
            unused("energies", self.energies.is_some())?;
        }
        if command == Command::ScatterSweep {
            unused("chain", self.chain.is_some())?;
        }
        if command != Command::EdgeStates {
            unused("edge", self.edge.is_some())?;
        }
        if command != Command::BandSweep {
            unused("sweep", self.sweep.is_some())?;
        }
        if command != Command::Quench {
            unused("quench", self.quench.is_some())?;
        }

        Ok(match command {
            Command::Spectrum => Plan::Spectrum(self.chain(command)?),
            Command::EdgeStates => {
                let edge = self.edge.clone().unwrap_or_default();
                if edge.energy_tol.is_nan() || edge.energy_tol <= 0.0 || edge.n_edge == 0 {
                    return Err(invalid("[edge] needs energy_tol > 0 and n_edge >= 1"));
                }
                Plan::EdgeStates(self.chain(command)?, edge)
            }
            Command::BandSweep => {
                let chain = self.chain(command)?;
                let grid = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| invalid("band-sweep needs a [sweep] section"))?;
                Plan::BandSweep(chain, grid.resolve().map_err(invalid)?)
            }
            Command::Quench => {
                let post = self.chain(command)?;
                let params = self
                    .quench
                    .clone()
                    .ok_or_else(|| invalid("quench needs a [quench] section"))?;
                if !(params.dip_fraction > 0.0 && params.dip_fraction < 1.0) {
                    return Err(invalid("dip_fraction must lie in (0, 1)"));
                }
                let pre = post.with_v(params.v_pre);
                let protocols = params
                    .initial_side
                    .list()
                    .into_iter()
                    .map(|side| {
                        let p = QuenchProtocol {
                            t_max: params.t_max.unwrap_or_else(|| default_t_max(&post)),
                            n_time_steps: params.n_time_steps,
                            ..QuenchProtocol::new(pre, post, side)
                        };
                        p.validate().map(|_| p).map_err(|e| invalid(e.to_string()))
                    })
                    .collect::<Result<_, _>>()?;
                Plan::Quench { protocols, params }
            }
            Command::ScatterSweep => {
                let spec = self
                    .stack
                    .ok_or_else(|| invalid("scatter-sweep needs a [stack] section"))?;
                let stack = spec.build().map_err(|e| invalid(format!("[stack]: {e}")))?;
                let grid = self
                    .energies
                    .as_ref()
                    .ok_or_else(|| invalid("scatter-sweep needs an [energies] section"))?;
                let energies = grid.resolve().map_err(invalid)?;
                if let Some(bad) = energies.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
                    return Err(invalid(format!("energy {bad} must be positive")));
                }
                Plan::ScatterSweep { spec, stack, energies }
            }
        })
    }
}

/// Several experiments in one file, as `[[experiment]]` tables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub experiment: Vec<ExperimentConfig>,
}

impl BatchConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let batch: Self = toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))?;
        batch.validate()?;
        Ok(batch)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.experiment.is_empty() {
            return Err(invalid("batch has no [[experiment]] entries"));
        }
        let mut seen = BTreeSet::new();
        for (i, e) in self.experiment.iter().enumerate() {
            e.plan()
                .map_err(|err| invalid(format!("experiment {}: {err}", i + 1)))?;
            if e.output_dir.is_some() {
                return Err(invalid(format!(
                    "experiment {}: output_dir belongs at the top level of a batch",
                    i + 1
                )));
            }
            if !seen.insert(e.dir_name()) {
                return Err(invalid(format!(
                    "experiment {}: name '{}' is used twice; give each experiment a distinct name",
                    i + 1,
                    e.dir_name()
                )));
            }
        }
        Ok(())
    }
}

/// The full figure reproduction suite.
pub fn paper_figures() -> BatchConfig {
    let reference = HybridChainSpec::reference(0.1);
    let experiment = vec![
        ExperimentConfig {
            command: Some(Command::EdgeStates),
            name: Some("edge-states".into()),
            chain: Some(reference),
            edge: Some(EdgeParams::default()),
            ..Default::default()
        },
        ExperimentConfig {
            command: Some(Command::BandSweep),
            name: Some("band-sweep".into()),
            chain: Some(reference),
            sweep: Some(VGrid::range(0.0, 0.8, 0.05)),
            ..Default::default()
        },
        ExperimentConfig {
            command: Some(Command::Quench),
            name: Some("quench".into()),
            chain: Some(reference.with_v(0.5)),
            quench: Some(QuenchParams::new(0.1)),
            ..Default::default()
        },
        ExperimentConfig {
            command: Some(Command::ScatterSweep),
            name: Some("scatter-hermitian".into()),
            stack: Some(StackSpec::reference().hermitian()),
            energies: Some(EnergyGrid::log(0.02, 5.0, 400)),
            ..Default::default()
        },
        ExperimentConfig {
            command: Some(Command::ScatterSweep),
            name: Some("scatter-pt".into()),
            stack: Some(StackSpec::reference()),
            energies: Some(EnergyGrid::log(0.02, 5.0, 400)),
            ..Default::default()
        },
    ];
    BatchConfig {
        output_dir: None,
        experiment,
    }
}
