use std::path::{Path, PathBuf};

use ebt_cage::agents::{DetectorTrainConfig, TreeVariant};
use ebt_cage::netsim::{StrategyKind, DEFAULT_HORIZON};
use ebt_core::firefighter::FireConfig;
use ebt_core::gp::{EvalEnv, FitnessCoefficients, GpConfig};
use serde::{Deserialize, Serialize};

use crate::ForgeError;

/// One experiment run: which experiment, its seed, where results go and the
/// experiment's own parameters.
///
/// On disk this is a single JSON document, e.g.
/// `{"seed": 7, "out": "runs/gp", "experiment": "gp_training", "params": {"trials": 5}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum Params {
    GpTraining(GpParams),
    FirefighterEval(FireEvalParams),
    StrategySwitchEval(SwitchParams),
    Trace(TraceParams),
}

impl Params {
    pub fn name(&self) -> &'static str {
        match self {
            Params::GpTraining(_) => "gp_training",
            Params::FirefighterEval(_) => "firefighter_eval",
            Params::StrategySwitchEval(_) => "strategy_switch_eval",
            Params::Trace(_) => "trace",
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ForgeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ForgeError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ForgeError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn out_path(&self) -> Result<&Path, ForgeError> {
        self.out
            .as_deref()
            .ok_or_else(|| ForgeError::Config("no output path given".into()))
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        self.out_path()?;
        match &self.params {
            Params::GpTraining(p) => p.to_gp_config(self.seed).validate().map_err(config_err),
            Params::FirefighterEval(p) => {
                positive("episodes", p.episodes)?;
                p.fire.validate()
            }
            Params::StrategySwitchEval(p) => p.validate(),
            Params::Trace(p) => p.validate(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> ForgeError {
    ForgeError::Config(e.to_string())
}

fn positive(name: &str, v: usize) -> Result<(), ForgeError> {
    if v == 0 {
        return Err(ForgeError::Config(format!("{name} must be >= 1")));
    }
    Ok(())
}

/// Firefighter instance distribution and rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FireParams {
    pub nodes: usize,
    pub edge_prob: f64,
    pub t_burn_max: u32,
    pub radius: usize,
    pub horizon: u32,
    pub retardant_requires_unburned: bool,
}

impl Default for FireParams {
    fn default() -> Self {
        let env = EvalEnv::default();
        Self {
            nodes: env.nodes,
            edge_prob: env.edge_prob,
            t_burn_max: env.fire.t_burn_max,
            radius: env.fire.radius,
            horizon: env.fire.horizon,
            retardant_requires_unburned: env.fire.retardant_requires_unburned,
        }
    }
}

impl FireParams {
    pub fn fire_config(&self) -> FireConfig {
        FireConfig {
            t_burn_max: self.t_burn_max,
            radius: self.radius,
            horizon: self.horizon,
            source: 0,
            retardant_requires_unburned: self.retardant_requires_unburned,
        }
    }

    pub fn env(&self) -> EvalEnv {
        EvalEnv {
            fire: self.fire_config(),
            nodes: self.nodes,
            edge_prob: self.edge_prob,
        }
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        positive("nodes", self.nodes)?;
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(ForgeError::Config(format!("edge_prob={} outside [0, 1]", self.edge_prob)));
        }
        if self.t_burn_max < 1 || self.horizon < 1 {
            return Err(ForgeError::Config("t_burn_max and horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub cv: f64,
    pub cl: f64,
    pub cf: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        let c = FitnessCoefficients::default();
        Self {
            cv: c.c_v,
            cl: c.c_l,
            cf: c.c_f,
        }
    }
}

impl From<Coefficients> for FitnessCoefficients {
    fn from(c: Coefficients) -> Self {
        FitnessCoefficients {
            c_v: c.cv,
            c_l: c.cl,
            c_f: c.cf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpParams {
    pub population: usize,
    pub generations: usize,
    pub trials: usize,
    pub episodes_per_eval: usize,
    pub tournament_k: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_baseline_mate: f64,
    pub max_depth: usize,
    pub coefficients: Coefficients,
    pub fire: FireParams,
}

impl Default for GpParams {
    fn default() -> Self {
        let g = GpConfig::default();
        Self {
            population: g.population_size,
            generations: g.generations,
            trials: g.trials,
            episodes_per_eval: g.episodes_per_eval,
            tournament_k: g.tournament_k,
            p_crossover: g.p_crossover,
            p_mutation: g.p_mutation,
            p_baseline_mate: g.p_baseline_mate,
            max_depth: g.max_depth,
            coefficients: Coefficients::default(),
            fire: FireParams::default(),
        }
    }
}

impl GpParams {
    pub fn to_gp_config(&self, seed: u64) -> GpConfig {
        GpConfig {
            population_size: self.population,
            generations: self.generations,
            trials: self.trials,
            tournament_k: self.tournament_k,
            p_crossover: self.p_crossover,
            p_mutation: self.p_mutation,
            p_baseline_mate: self.p_baseline_mate,
            episodes_per_eval: self.episodes_per_eval,
            coefficients: self.coefficients.into(),
            max_depth: self.max_depth,
            env: self.fire.env(),
            seed,
        }
    }
}

/// A firefighter tree to evaluate or trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSpec {
    Baseline,
    Expert,
    /// A genome in s-expression text, typically a GP best.
    Genome(String),
}

impl TreeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            TreeSpec::Baseline => "baseline",
            TreeSpec::Expert => "expert",
            TreeSpec::Genome(_) => "gp_best",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FireEvalParams {
    pub episodes: usize,
    pub trees: Vec<TreeSpec>,
    pub coefficients: Coefficients,
    pub fire: FireParams,
}

impl Default for FireEvalParams {
    fn default() -> Self {
        Self {
            episodes: 100,
            trees: vec![TreeSpec::Baseline, TreeSpec::Expert],
            coefficients: Coefficients::default(),
            fire: FireParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchParams {
    pub episodes: usize,
    pub horizon: u32,
    pub variants: Vec<TreeVariant>,
    pub training_episodes: usize,
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Load detector weights from here instead of training.
    pub detector: Option<PathBuf>,
}

impl Default for SwitchParams {
    fn default() -> Self {
        let d = DetectorTrainConfig::default();
        Self {
            episodes: 1000,
            horizon: DEFAULT_HORIZON,
            variants: TreeVariant::ALL.to_vec(),
            training_episodes: 1000,
            window: d.window,
            hidden: d.hidden,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            detector: None,
        }
    }
}

impl SwitchParams {
    pub fn train_config(&self) -> DetectorTrainConfig {
        DetectorTrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            window: self.window,
            hidden: self.hidden,
        }
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        positive("episodes", self.episodes)?;
        positive("horizon", self.horizon as usize)?;
        positive("variants", self.variants.len())?;
        if self.detector.is_none() && self.variants.contains(&TreeVariant::LearnedSwitch) {
            positive("training_episodes", self.training_episodes)?;
            self.train_config().validate().map_err(config_err)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEnv {
    Firefighter,
    Netsim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedKind {
    Meander,
    Bline,
    RedSwitch,
}

impl From<RedKind> for StrategyKind {
    fn from(k: RedKind) -> Self {
        match k {
            RedKind::Meander => StrategyKind::Meander,
            RedKind::Bline => StrategyKind::BLine,
            RedKind::RedSwitch => StrategyKind::RedSwitch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenderSpec {
    Sleep,
    CardiffLike,
    OracleSwitch,
    LearnedSwitch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceParams {
    pub env: TraceEnv,
    pub tree: TreeSpec,
    pub fire: FireParams,
    pub defender: DefenderSpec,
    pub red: RedKind,
    pub horizon: u32,
    /// Weights for the learned-switch defender.
    pub detector: Option<PathBuf>,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            env: TraceEnv::Firefighter,
            tree: TreeSpec::Expert,
            fire: FireParams::default(),
            defender: DefenderSpec::OracleSwitch,
            red: RedKind::RedSwitch,
            horizon: DEFAULT_HORIZON,
            detector: None,
        }
    }
}

impl TraceParams {
    pub fn validate(&self) -> Result<(), ForgeError> {
        match self.env {
            TraceEnv::Firefighter => self.fire.validate(),
            TraceEnv::Netsim => {
                positive("horizon", self.horizon as usize)?;
                if self.defender == DefenderSpec::LearnedSwitch && self.detector.is_none() {
                    return Err(ForgeError::Config("learned_switch trace needs a detector file".into()));
                }
                Ok(())
            }
        }
    }
}
