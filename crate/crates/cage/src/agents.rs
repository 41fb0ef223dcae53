//! Blue-side agents: scripted per-strategy defenders, greedy decoy placement,
//! the strategy-switch detector, and the behavior-tree defender that ties them
//! together.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use ebt_core::behaviors::{
    build_learned_tree, MetaAction, GET_ANALYSIS_ACTION, GET_DETECTOR_ACTION, GET_META_ACTION,
    GET_MITIGATE_ACTION, IS_ANALYSIS, IS_DETECTOR, IS_MITIGATE, NOT_SELECT_STRATEGY, SELECT_STRATEGY,
};
use ebt_core::btengine::{
    tick, Blackboard, BlackboardAccess, BehaviorRegistry, BehaviorTree, BtError, NodeStatus, Permissions,
};
use ebt_core::rng::{derive_seed, seeded};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{
    allowed_decoys, run_episode, ActiveStrategy, Activity, Belief, BlueAction, BlueView, DefenderPolicy,
    NetError, NetworkState, Observation, Service, StrategyKind, DEFAULT_HORIZON, DEFENDED_HOSTS, ENTERPRISE0,
    ENTERPRISE1, ENTERPRISE2, HOST_COUNT, OBS_BITS, OP_SERVER, USER1, USER2, USER3, USER4,
};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_HIDDEN: usize = 100;
/// Timesteps spent scanning before a defender commits to a strategy.
pub const SCAN_STEPS: u32 = 3;
const SCAN_HOSTS: [usize; SCAN_STEPS as usize] = [USER1, USER2, USER3];

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("training data contains a single class")]
    DegenerateData,
    #[error("training data is empty")]
    EmptyData,
    #[error("window of {got} observations does not match detector window {expected}")]
    WindowMismatch { expected: usize, got: usize },
    #[error("the learned-switch variant needs a trained detector")]
    MissingDetector,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("weight file: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Decoys<'a> = [&'a BTreeSet<Service>; HOST_COUNT];

/// Per-host decoy preference lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyDecoyTable {
    prefs: Vec<Vec<Service>>,
}

impl Default for GreedyDecoyTable {
    fn default() -> Self {
        Self {
            prefs: (0..HOST_COUNT).map(|h| allowed_decoys(h).to_vec()).collect(),
        }
    }
}

impl GreedyDecoyTable {
    pub fn preferences(&self, host: usize) -> &[Service] {
        &self.prefs[host]
    }

    /// First preferred decoy not yet on the host.
    pub fn next_decoy(&self, host: usize, present: &BTreeSet<Service>) -> Option<Service> {
        self.prefs[host].iter().copied().find(|s| !present.contains(s))
    }
}

/// Deploys the best missing decoy on `host`, or analyzes it when every decoy is up.
pub fn greedy_decoy(table: &GreedyDecoyTable, host: usize, decoys: &Decoys<'_>) -> BlueAction {
    match table.next_decoy(host, decoys[host]) {
        Some(s) => BlueAction::DeployDecoy(host, s),
        None => BlueAction::Analyze(host),
    }
}

pub fn oracle_switch(state: &NetworkState) -> ActiveStrategy {
    state.active_strategy()
}

/// Meta-action category a concrete blue action belongs to.
pub fn meta_of(action: BlueAction) -> MetaAction {
    match action {
        BlueAction::DeployDecoy(..) => MetaAction::Detector,
        BlueAction::Remove(_) | BlueAction::Restore(_) => MetaAction::Mitigate,
        _ => MetaAction::Analysis,
    }
}

/// State a controller carries between decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerMemory {
    /// Round-robin position for idle analysis.
    pub cursor: usize,
    /// Host removed or restored on the previous turn.
    pub last_cleaned: Option<usize>,
}

const MEANDER_SWEEP: [usize; 7] = [ENTERPRISE0, ENTERPRISE1, ENTERPRISE2, USER1, USER2, USER3, USER4];
const MEANDER_CRITICAL: [usize; 7] = [ENTERPRISE0, ENTERPRISE1, ENTERPRISE2, USER1, USER2, USER3, USER4];
const MEANDER_LOCKED: [usize; 4] = [USER1, USER2, USER3, USER4];
const MEANDER_DECOY_HOSTS: [usize; 4] = [USER1, USER2, USER3, USER4];
const BLINE_CHOKEPOINTS: [usize; 4] = [OP_SERVER, ENTERPRISE1, ENTERPRISE0, ENTERPRISE2];
const BLINE_DECOY_HOSTS: [usize; 4] = [ENTERPRISE1, OP_SERVER, ENTERPRISE0, ENTERPRISE2];

/// Scripted controller for one red strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    AntiMeander,
    AntiBLine,
}

impl Controller {
    pub fn against(strategy: ActiveStrategy) -> Self {
        match strategy {
            ActiveStrategy::Meander => Controller::AntiMeander,
            ActiveStrategy::BLine => Controller::AntiBLine,
        }
    }

    /// Hosts the controller watches, in priority order.
    pub fn hosts(self) -> &'static [usize] {
        match self {
            Controller::AntiMeander => &MEANDER_SWEEP,
            Controller::AntiBLine => &BLINE_CHOKEPOINTS,
        }
    }

    /// Watched hosts cleaned as soon as exploit activity shows up on them.
    pub fn critical(self) -> &'static [usize] {
        match self {
            Controller::AntiMeander => &MEANDER_CRITICAL,
            Controller::AntiBLine => &BLINE_CHOKEPOINTS,
        }
    }

    /// Critical hosts where a repeat attack right after a cleanup is answered
    /// with Remove rather than another Restore.
    pub fn locked(self) -> &'static [usize] {
        match self {
            Controller::AntiMeander => &MEANDER_LOCKED,
            Controller::AntiBLine => &BLINE_CHOKEPOINTS,
        }
    }

    pub fn decoy_hosts(self) -> &'static [usize] {
        match self {
            Controller::AntiMeander => &MEANDER_DECOY_HOSTS,
            Controller::AntiBLine => &BLINE_DECOY_HOSTS,
        }
    }

    pub fn decide(
        self,
        obs: Observation,
        decoys: &Decoys<'_>,
        table: &GreedyDecoyTable,
        memory: &mut ControllerMemory,
    ) -> BlueAction {
        let action = self.choose(obs, decoys, table, memory);
        memory.last_cleaned = match action {
            BlueAction::Remove(h) | BlueAction::Restore(h) => Some(h),
            _ => None,
        };
        action
    }

    fn choose(
        self,
        obs: Observation,
        decoys: &Decoys<'_>,
        table: &GreedyDecoyTable,
        memory: &mut ControllerMemory,
    ) -> BlueAction {
        let hosts = self.hosts();
        let find = |pred: &dyn Fn(usize) -> bool| hosts.iter().copied().find(|&h| pred(h));
        // Known compromises are cleaned anywhere, watched hosts first.
        let find_any = |pred: &dyn Fn(usize) -> bool| {
            find(pred).or_else(|| DEFENDED_HOSTS.iter().copied().find(|&h| pred(h)))
        };
        let exploited = |h: usize| obs.activity(h) == Activity::Exploit;

        // Red moves before blue, so a host cleaned last turn can hold at most
        // user access now and Remove is enough.
        if let Some(&h) = self.critical().iter().find(|&&h| exploited(h)) {
            return if memory.last_cleaned == Some(h) && self.locked().contains(&h) {
                BlueAction::Remove(h)
            } else {
                BlueAction::Restore(h)
            };
        }
        if let Some(h) = find_any(&|h| obs.belief(h) == Belief::Privileged) {
            return BlueAction::Restore(h);
        }
        if let Some(h) = find_any(&|h| obs.belief(h) == Belief::User) {
            return BlueAction::Remove(h);
        }
        if let Some(h) = find(&exploited) {
            return BlueAction::Analyze(h);
        }
        if let Some(h) = find(&|h| obs.activity(h) == Activity::Scan && table.next_decoy(h, decoys[h]).is_some()) {
            return greedy_decoy(table, h, decoys);
        }
        if let Some(&h) = self
            .decoy_hosts()
            .iter()
            .find(|&&h| table.next_decoy(h, decoys[h]).is_some())
        {
            return greedy_decoy(table, h, decoys);
        }
        let h = hosts[memory.cursor % hosts.len()];
        memory.cursor = (memory.cursor + 1) % hosts.len();
        BlueAction::Analyze(h)
    }
}

/// A scripted controller used directly as a policy.
#[derive(Debug, Clone)]
pub struct ScriptedDefender {
    pub controller: Controller,
    pub table: GreedyDecoyTable,
    pub memory: ControllerMemory,
}

impl ScriptedDefender {
    pub fn new(controller: Controller) -> Self {
        Self {
            controller,
            table: GreedyDecoyTable::default(),
            memory: ControllerMemory::default(),
        }
    }

    pub fn anti_meander() -> Self {
        Self::new(Controller::AntiMeander)
    }

    pub fn anti_bline() -> Self {
        Self::new(Controller::AntiBLine)
    }
}

impl DefenderPolicy for ScriptedDefender {
    fn act(&mut self, view: &BlueView<'_>) -> BlueAction {
        self.controller
            .decide(view.observation, &view.decoys, &self.table, &mut self.memory)
    }

    fn believed_strategy(&self) -> Option<ActiveStrategy> {
        Some(match self.controller {
            Controller::AntiMeander => ActiveStrategy::Meander,
            Controller::AntiBLine => ActiveStrategy::BLine,
        })
    }
}

// ---------------------------------------------------------------------------
// Strategy detector

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub window: usize,
    pub hidden: usize,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 1e-3,
            batch_size: 32,
            window: DEFAULT_WINDOW,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl DetectorTrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |what: &str| Err(AgentError::InvalidConfig(what.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.window == 0 || self.hidden == 0 {
            return bad("batch size, window and hidden width must be positive");
        }
        Ok(())
    }
}

/// One labeled window of consecutive observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingWindow {
    pub observations: Vec<Observation>,
    /// True when BLine was active at the last step of the window.
    pub bline: bool,
    pub episode: usize,
    /// Timestep of the last observation in the window.
    pub end_t: u32,
    pub switch_t: u32,
}

impl TrainingWindow {
    /// Inside the W steps that follow the switch, where windows mix both strategies.
    pub fn in_ambiguity_band(&self) -> bool {
        let w = self.observations.len() as u32;
        self.end_t >= self.switch_t && self.end_t < self.switch_t + w
    }
}

/// Flattens a window, oldest observation first, into 0/1 inputs.
pub fn window_features(window: &[Observation]) -> Vec<f64> {
    let mut x = vec![0.0; window.len() * OBS_BITS];
    for (k, o) in window.iter().enumerate() {
        for b in 0..OBS_BITS {
            if o.bit(b) {
                x[k * OBS_BITS + b] = 1.0;
            }
        }
    }
    x
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed without forming the probability.
fn bce_from_logit(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorHeader {
    #[serde(rename = "W")]
    pub window: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub cfg: DetectorTrainConfig,
}

/// Feedforward classifier over a window: inputs → tanh hidden layer → sigmoid.
///
/// `w1` is stored input-major, so row `i` holds the weights from input `i` to
/// every hidden unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDetector {
    pub header: DetectorHeader,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Gradient with the same layout as the detector parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradient {
    fn zeros(d: &StrategyDetector) -> Self {
        Self {
            w1: vec![0.0; d.w1.len()],
            b1: vec![0.0; d.b1.len()],
            w2: vec![0.0; d.w2.len()],
            b2: 0.0,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        let (a, b, c) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < a {
            self.w1[i]
        } else if i < a + b {
            self.b1[i - a]
        } else if i < a + b + c {
            self.w2[i - a - b]
        } else {
            self.b2
        }
    }
}

impl StrategyDetector {
    fn header(window: usize, hidden: usize, seed: u64, cfg: DetectorTrainConfig) -> DetectorHeader {
        DetectorHeader {
            window,
            input_dim: window * OBS_BITS,
            hidden,
            seed,
            cfg,
        }
    }

    pub fn zeros(window: usize, hidden: usize) -> Self {
        let header = Self::header(window, hidden, 0, DetectorTrainConfig {
            window,
            hidden,
            ..DetectorTrainConfig::default()
        });
        Self {
            w1: vec![0.0; header.input_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            header,
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(window: usize, hidden: usize, seed: u64) -> Self {
        let mut d = Self::zeros(window, hidden);
        d.header.seed = seed;
        let mut rng = seeded(seed);
        let input = d.header.input_dim;
        let l1 = (6.0 / (input + hidden) as f64).sqrt();
        for w in &mut d.w1 {
            *w = rng.gen_range(-l1..l1);
        }
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        for w in &mut d.w2 {
            *w = rng.gen_range(-l2..l2);
        }
        d
    }

    pub fn window(&self) -> usize {
        self.header.window
    }

    pub fn input_dim(&self) -> usize {
        self.header.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        let (a, b, c) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < a {
            &mut self.w1[i]
        } else if i < a + b {
            &mut self.b1[i - a]
        } else if i < a + b + c {
            &mut self.w2[i - a - b]
        } else {
            &mut self.b2
        }
    }

    pub fn param(&self, i: usize) -> f64 {
        let (a, b, c) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < a {
            self.w1[i]
        } else if i < a + b {
            self.b1[i - a]
        } else if i < a + b + c {
            self.w2[i - a - b]
        } else {
            self.b2
        }
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        *self.param_mut(i) = v;
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let hidden = self.header.hidden;
        let mut z = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &self.w1[i * hidden..(i + 1) * hidden];
                for (zh, w) in z.iter_mut().zip(row) {
                    *zh += w * xi;
                }
            }
        }
        z.iter_mut().for_each(|v| *v = v.tanh());
        z
    }

    fn logit(&self, a: &[f64]) -> f64 {
        self.b2 + a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Probability that the input window comes from BLine.
    pub fn forward(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(&self.hidden_activations(x)))
    }

    pub fn loss(&self, x: &[f64], y: f64) -> f64 {
        bce_from_logit(self.logit(&self.hidden_activations(x)), y)
    }

    /// BCE loss and its gradient by backpropagation, accumulated into `grad`
    /// scaled by `scale`.
    fn backprop_into(&self, x: &[f64], y: f64, scale: f64, grad: &mut Gradient) -> f64 {
        let hidden = self.header.hidden;
        let a = self.hidden_activations(x);
        let logit = self.logit(&a);
        let d_out = (sigmoid(logit) - y) * scale;
        grad.b2 += d_out;
        let mut dz = vec![0.0; hidden];
        for h in 0..hidden {
            grad.w2[h] += d_out * a[h];
            dz[h] = d_out * self.w2[h] * (1.0 - a[h] * a[h]);
            grad.b1[h] += dz[h];
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &mut grad.w1[i * hidden..(i + 1) * hidden];
                for (g, d) in row.iter_mut().zip(&dz) {
                    *g += d * xi;
                }
            }
        }
        bce_from_logit(logit, y)
    }

    pub fn loss_and_gradient(&self, x: &[f64], y: f64) -> (f64, Gradient) {
        let mut g = Gradient::zeros(self);
        let loss = self.backprop_into(x, y, 1.0, &mut g);
        (loss, g)
    }

    fn apply(&mut self, grad: &Gradient, lr: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grad.w1) {
            *w -= lr * g;
        }
        for (w, g) in self.b1.iter_mut().zip(&grad.b1) {
            *w -= lr * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grad.w2) {
            *w -= lr * g;
        }
        self.b2 -= lr * grad.b2;
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let d: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let h = d.header;
        if h.input_dim != h.window * OBS_BITS
            || d.w1.len() != h.input_dim * h.hidden
            || d.b1.len() != h.hidden
            || d.w2.len() != h.hidden
        {
            return Err(AgentError::InvalidConfig("weight shapes disagree with header".into()));
        }
        Ok(d)
    }
}

/// Classifies a window; BLine only when the probability is strictly above one half.
pub fn detect(detector: &StrategyDetector, window: &[Observation]) -> Result<(ActiveStrategy, f64), AgentError> {
    if window.len() != detector.window() {
        return Err(AgentError::WindowMismatch {
            expected: detector.window(),
            got: window.len(),
        });
    }
    let p = detector.forward(&window_features(window));
    Ok(if p > 0.5 {
        (ActiveStrategy::BLine, p)
    } else {
        (ActiveStrategy::Meander, 1.0 - p)
    })
}

/// Labeled windows from RedSwitch episodes defended by AntiMeander.
///
/// The defender is the non-switching tree, so the opening scan matches what
/// deployed defenders observe. Episode `i` is seeded with `derive_seed(seed, i)`.
pub fn collect_training_data(episodes: usize, window: usize, seed: u64) -> Result<Vec<TrainingWindow>, AgentError> {
    let per_episode: Result<Vec<Vec<TrainingWindow>>, NetError> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut policy = ebt_defender(TreeVariant::CardiffLike, None).expect("no detector needed");
            let ep = run_episode(&mut policy, StrategyKind::RedSwitch, DEFAULT_HORIZON, derive_seed(seed, i as u64))?;
            let switch_t = match ep.strategy {
                crate::netsim::RedStrategy::RedSwitch { switch_t } => switch_t,
                _ => unreachable!("collection runs switching episodes"),
            };
            let obs = ep.observations();
            Ok(obs
                .windows(window)
                .zip(&ep.steps[window - 1..])
                .map(|(w, last)| TrainingWindow {
                    observations: w.to_vec(),
                    bline: last.red_strategy_active == ActiveStrategy::BLine,
                    episode: i,
                    end_t: last.t,
                    switch_t,
                })
                .collect())
        })
        .collect();
    Ok(per_episode?.into_iter().flatten().collect())
}

/// Minibatch gradient descent on mean BCE.
///
/// Weights are initialized from `derive_seed(seed, 0)` and each epoch's
/// shuffle from `derive_seed(seed, epoch + 1)`. Returns the detector and the
/// mean loss of every minibatch, measured before its update.
pub fn train_detector(
    data: &[TrainingWindow],
    cfg: &DetectorTrainConfig,
    seed: u64,
) -> Result<(StrategyDetector, Vec<f64>), AgentError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(AgentError::EmptyData);
    }
    if data.iter().all(|s| s.bline) || data.iter().all(|s| !s.bline) {
        return Err(AgentError::DegenerateData);
    }
    if let Some(bad) = data.iter().find(|s| s.observations.len() != cfg.window) {
        return Err(AgentError::WindowMismatch {
            expected: cfg.window,
            got: bad.observations.len(),
        });
    }
    let mut det = StrategyDetector::xavier(cfg.window, cfg.hidden, derive_seed(seed, 0));
    det.header.seed = seed;
    det.header.cfg = *cfg;
    let mut history = Vec::with_capacity(cfg.epochs * data.len().div_ceil(cfg.batch_size));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = Gradient::zeros(&det);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seeded(derive_seed(seed, epoch as u64 + 1)));
        for batch in order.chunks(cfg.batch_size) {
            grad.w1.iter_mut().for_each(|g| *g = 0.0);
            grad.b1.iter_mut().for_each(|g| *g = 0.0);
            grad.w2.iter_mut().for_each(|g| *g = 0.0);
            grad.b2 = 0.0;
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let s = &data[i];
                let y = if s.bline { 1.0 } else { 0.0 };
                loss += det.backprop_into(&window_features(&s.observations), y, scale, &mut grad);
            }
            history.push(loss * scale);
            det.apply(&grad, cfg.learning_rate);
        }
    }
    Ok((det, history))
}

/// Mean of each epoch's minibatch losses.
pub fn epoch_means(history: &[f64], epochs: usize) -> Vec<f64> {
    if epochs == 0 || history.is_empty() {
        return Vec::new();
    }
    let per = history.len().div_ceil(epochs);
    history
        .chunks(per)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Fraction of windows outside the ambiguity band classified correctly.
pub fn held_out_accuracy(detector: &StrategyDetector, data: &[TrainingWindow]) -> Result<f64, AgentError> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for s in data.iter().filter(|s| !s.in_ambiguity_band()) {
        let (label, _) = detect(detector, &s.observations)?;
        total += 1;
        if (label == ActiveStrategy::BLine) == s.bline {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(AgentError::EmptyData);
    }
    Ok(hits as f64 / total as f64)
}

// ---------------------------------------------------------------------------
// Behavior-tree defender

pub const KEY_NET_STRATEGY: &str = "net/current_strategy";
pub const KEY_NET_SIGNAL: &str = "net/switch_signal";
pub const KEY_NET_META: &str = "net/meta_action";
pub const KEY_NET_PROPOSED: &str = "net/proposed_action";
pub const KEY_NET_PENDING: &str = "net/pending_action";
pub const KEY_NET_VIEW: &str = "net/last_view";
pub const KEY_NET_MEMORY: &str = "net/controller_memory";

/// What the defender's behaviors see of the current turn.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenderView {
    pub t: u32,
    pub observation: Observation,
    pub decoys: Vec<BTreeSet<Service>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetValue {
    Strategy(ActiveStrategy),
    Meta(MetaAction),
    Action(BlueAction),
    View(Arc<DefenderView>),
    Memory(ControllerMemory),
}

pub type NetBoard = Blackboard<NetValue>;

fn read_strategy(bb: &BlackboardAccess<'_, NetValue>, key: &str) -> Result<Option<ActiveStrategy>, BtError> {
    Ok(match bb.get(key)? {
        Some(NetValue::Strategy(s)) => Some(*s),
        _ => None,
    })
}

fn read_meta(bb: &BlackboardAccess<'_, NetValue>) -> Result<Option<MetaAction>, BtError> {
    Ok(match bb.get(KEY_NET_META)? {
        Some(NetValue::Meta(m)) => Some(*m),
        _ => None,
    })
}

fn read_action(bb: &BlackboardAccess<'_, NetValue>, key: &str) -> Result<Option<BlueAction>, BtError> {
    Ok(match bb.get(key)? {
        Some(NetValue::Action(a)) => Some(*a),
        _ => None,
    })
}

fn read_view(bb: &BlackboardAccess<'_, NetValue>) -> Result<Option<Arc<DefenderView>>, BtError> {
    Ok(match bb.get(KEY_NET_VIEW)? {
        Some(NetValue::View(v)) => Some(Arc::clone(v)),
        _ => None,
    })
}

fn decoy_refs(view: &DefenderView) -> Decoys<'_> {
    std::array::from_fn(|h| &view.decoys[h])
}

/// Registry binding the nine tree behaviors to the network defenders.
pub fn netsim_registry(table: GreedyDecoyTable) -> BehaviorRegistry<NetValue> {
    let table = Arc::new(table);
    let mut reg = BehaviorRegistry::new();
    let ok = |r: Result<(), ebt_core::btengine::RegistryError>| r.expect("static registry is consistent");

    ok(reg.register_condition(
        NOT_SELECT_STRATEGY,
        Permissions::new().read(KEY_NET_STRATEGY).read(KEY_NET_SIGNAL),
        |bb| {
            let current = read_strategy(bb, KEY_NET_STRATEGY)?;
            let signal = read_strategy(bb, KEY_NET_SIGNAL)?;
            Ok(if current.is_some() && current == signal {
                NodeStatus::Success
            } else {
                NodeStatus::Failure
            })
        },
    ));

    ok(reg.register_action(
        SELECT_STRATEGY,
        Permissions::new().read(KEY_NET_SIGNAL).write(KEY_NET_STRATEGY),
        |bb| match read_strategy(bb, KEY_NET_SIGNAL)? {
            Some(s) => {
                bb.set(KEY_NET_STRATEGY, NetValue::Strategy(s))?;
                Ok(NodeStatus::Success)
            }
            None => Ok(NodeStatus::Failure),
        },
    ));

    let t = Arc::clone(&table);
    ok(reg.register_action(
        GET_META_ACTION,
        Permissions::new()
            .read(KEY_NET_STRATEGY)
            .read(KEY_NET_VIEW)
            .read_write(KEY_NET_MEMORY)
            .write(KEY_NET_META)
            .write(KEY_NET_PROPOSED),
        move |bb| {
            let (Some(strategy), Some(view)) = (read_strategy(bb, KEY_NET_STRATEGY)?, read_view(bb)?) else {
                return Ok(NodeStatus::Failure);
            };
            let proposed = if view.t < SCAN_STEPS {
                BlueAction::Analyze(SCAN_HOSTS[view.t as usize])
            } else {
                let mut memory = match bb.get(KEY_NET_MEMORY)? {
                    Some(NetValue::Memory(m)) => *m,
                    _ => ControllerMemory::default(),
                };
                let a = Controller::against(strategy).decide(view.observation, &decoy_refs(&view), &t, &mut memory);
                bb.set(KEY_NET_MEMORY, NetValue::Memory(memory))?;
                a
            };
            bb.set(KEY_NET_META, NetValue::Meta(meta_of(proposed)))?;
            bb.set(KEY_NET_PROPOSED, NetValue::Action(proposed))?;
            Ok(NodeStatus::Success)
        },
    ));

    for (id, wanted) in [
        (IS_DETECTOR, MetaAction::Detector),
        (IS_ANALYSIS, MetaAction::Analysis),
        (IS_MITIGATE, MetaAction::Mitigate),
    ] {
        ok(reg.register_condition(id, Permissions::new().read(KEY_NET_META), move |bb| {
            Ok(if read_meta(bb)? == Some(wanted) {
                NodeStatus::Success
            } else {
                NodeStatus::Failure
            })
        }));
    }

    let perms = || Permissions::new().read(KEY_NET_PROPOSED).read(KEY_NET_VIEW).write(KEY_NET_PENDING);
    let t = Arc::clone(&table);
    ok(reg.register_action(GET_DETECTOR_ACTION, perms(), move |bb| {
        let (Some(BlueAction::DeployDecoy(host, _)), Some(view)) = (read_action(bb, KEY_NET_PROPOSED)?, read_view(bb)?)
        else {
            return Ok(NodeStatus::Failure);
        };
        bb.set(KEY_NET_PENDING, NetValue::Action(greedy_decoy(&t, host, &decoy_refs(&view))))?;
        Ok(NodeStatus::Success)
    }));
    ok(reg.register_action(GET_ANALYSIS_ACTION, perms(), |bb| {
        match read_action(bb, KEY_NET_PROPOSED)? {
            Some(a @ BlueAction::Analyze(_)) => {
                bb.set(KEY_NET_PENDING, NetValue::Action(a))?;
                Ok(NodeStatus::Success)
            }
            _ => Ok(NodeStatus::Failure),
        }
    }));
    ok(reg.register_action(GET_MITIGATE_ACTION, perms(), |bb| {
        match read_action(bb, KEY_NET_PROPOSED)? {
            Some(a @ (BlueAction::Remove(_) | BlueAction::Restore(_))) => {
                bb.set(KEY_NET_PENDING, NetValue::Action(a))?;
                Ok(NodeStatus::Success)
            }
            _ => Ok(NodeStatus::Failure),
        }
    }));

    reg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeVariant {
    CardiffLike,
    OracleSwitch,
    LearnedSwitch,
}

impl TreeVariant {
    pub const ALL: [TreeVariant; 3] = [TreeVariant::CardiffLike, TreeVariant::OracleSwitch, TreeVariant::LearnedSwitch];

    pub fn name(self) -> &'static str {
        match self {
            TreeVariant::CardiffLike => "CardiffLike",
            TreeVariant::OracleSwitch => "OracleSwitch",
            TreeVariant::LearnedSwitch => "LearnedSwitch",
        }
    }
}

/// Strategy suggested by the opening scan: exploit activity on a user host
/// means red went straight for a foothold.
pub fn fingerprint(opening: &[Observation]) -> ActiveStrategy {
    let users = [USER1, USER2, USER3, USER4];
    if opening
        .iter()
        .any(|o| users.iter().any(|&h| o.activity(h) == Activity::Exploit))
    {
        ActiveStrategy::BLine
    } else {
        ActiveStrategy::Meander
    }
}

/// Behavior-tree defender whose strategy selector follows one of three switch signals.
pub struct EbtDefender {
    variant: TreeVariant,
    detector: Option<Arc<StrategyDetector>>,
    tree: BehaviorTree,
    registry: Arc<BehaviorRegistry<NetValue>>,
    board: NetBoard,
    signal: Option<ActiveStrategy>,
    last_raw: Option<ActiveStrategy>,
    t: u32,
}

pub fn ebt_defender(variant: TreeVariant, detector: Option<Arc<StrategyDetector>>) -> Result<EbtDefender, AgentError> {
    if variant == TreeVariant::LearnedSwitch && detector.is_none() {
        return Err(AgentError::MissingDetector);
    }
    Ok(EbtDefender {
        variant,
        detector,
        tree: build_learned_tree(),
        registry: Arc::new(netsim_registry(GreedyDecoyTable::default())),
        board: NetBoard::new(),
        signal: None,
        last_raw: None,
        t: 0,
    })
}

impl EbtDefender {
    pub fn variant(&self) -> TreeVariant {
        self.variant
    }

    pub fn tree(&self) -> &BehaviorTree {
        &self.tree
    }

    pub fn board(&self) -> &NetBoard {
        &self.board
    }

    fn update_signal(&mut self, view: &BlueView<'_>) -> Result<(), AgentError> {
        if view.t < SCAN_STEPS {
            self.signal = None;
            return Ok(());
        }
        let current = *self
            .signal
            .get_or_insert_with(|| fingerprint(&view.history[..SCAN_STEPS as usize]));
        match self.variant {
            TreeVariant::CardiffLike => {}
            TreeVariant::OracleSwitch => self.signal = Some(view.oracle),
            TreeVariant::LearnedSwitch => {
                let det = self.detector.as_ref().ok_or(AgentError::MissingDetector)?;
                let w = det.window();
                if view.history.len() >= w {
                    let (raw, _) = detect(det, &view.history[view.history.len() - w..])?;
                    if raw != current && self.last_raw == Some(raw) {
                        self.signal = Some(raw);
                    }
                    self.last_raw = Some(raw);
                }
            }
        }
        Ok(())
    }
}

impl DefenderPolicy for EbtDefender {
    fn act(&mut self, view: &BlueView<'_>) -> BlueAction {
        self.t = view.t;
        self.update_signal(view).expect("detector presence checked at construction");
        // The tree always has a strategy to run; during the scan phase the
        // meta-action ignores it.
        let signal = self.signal.unwrap_or(ActiveStrategy::Meander);
        self.board.set(KEY_NET_SIGNAL, NetValue::Strategy(signal));
        self.board.set(
            KEY_NET_VIEW,
            NetValue::View(Arc::new(DefenderView {
                t: view.t,
                observation: view.observation,
                decoys: view.decoys.iter().map(|d| (*d).clone()).collect(),
            })),
        );
        self.board.remove(KEY_NET_PENDING);
        let status = tick(&self.tree, &mut self.board, &self.registry);
        match (status, self.board.get(KEY_NET_PENDING)) {
            (Ok(NodeStatus::Success), Some(NetValue::Action(a))) => *a,
            _ => match self.board.get(KEY_NET_PROPOSED) {
                Some(NetValue::Action(a)) => *a,
                _ => BlueAction::Analyze(USER1),
            },
        }
    }

    fn believed_strategy(&self) -> Option<ActiveStrategy> {
        if self.t < SCAN_STEPS {
            None
        } else {
            self.signal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{reduced_action_space, reset, RedStrategy, DEFENDER};

    fn empty() -> [BTreeSet<Service>; HOST_COUNT] {
        std::array::from_fn(|_| BTreeSet::new())
    }

    #[test]
    fn greedy_follows_preferences() {
        let table = GreedyDecoyTable::default();
        let mut decoys = empty();
        let mut placed = Vec::new();
        for _ in 0..3 {
            let refs: Decoys<'_> = std::array::from_fn(|h| &decoys[h]);
            let a = greedy_decoy(&table, DEFENDER, &refs);
            let BlueAction::DeployDecoy(h, s) = a else { panic!("{a:?}") };
            decoys[h].insert(s);
            placed.push(s);
        }
        assert_eq!(placed, table.preferences(DEFENDER)[..3].to_vec());
    }

    #[test]
    fn full_host_falls_through_to_analyze() {
        let table = GreedyDecoyTable::default();
        let mut decoys = empty();
        decoys[USER4].extend(allowed_decoys(USER4));
        let refs: Decoys<'_> = std::array::from_fn(|h| &decoys[h]);
        assert_eq!(greedy_decoy(&table, USER4, &refs), BlueAction::Analyze(USER4));
    }

    #[test]
    fn oracle_follows_switch_time() {
        let mut s = reset(0, StrategyKind::RedSwitch);
        s.red.strategy = RedStrategy::RedSwitch { switch_t: 12 };
        s.t = 11;
        assert_eq!(oracle_switch(&s), ActiveStrategy::Meander);
        s.t = 12;
        assert_eq!(oracle_switch(&s), ActiveStrategy::BLine);
        let mut m = reset(0, StrategyKind::Meander);
        m.t = 90;
        assert_eq!(oracle_switch(&m), ActiveStrategy::Meander);
    }

    #[test]
    fn zero_detector_ties_to_meander() {
        let d = StrategyDetector::zeros(DEFAULT_WINDOW, DEFAULT_HIDDEN);
        let w = vec![Observation::default(); DEFAULT_WINDOW];
        assert_eq!(d.forward(&window_features(&w)), 0.5);
        assert_eq!(detect(&d, &w).unwrap(), (ActiveStrategy::Meander, 0.5));
        assert!(matches!(
            detect(&d, &w[..3]),
            Err(AgentError::WindowMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn single_class_data_is_rejected() {
        let data = vec![
            TrainingWindow {
                observations: vec![Observation::default(); DEFAULT_WINDOW],
                bline: false,
                episode: 0,
                end_t: 4,
                switch_t: 20,
            };
            4
        ];
        assert!(matches!(
            train_detector(&data, &DetectorTrainConfig::default(), 0),
            Err(AgentError::DegenerateData)
        ));
        assert!(matches!(
            train_detector(&[], &DetectorTrainConfig::default(), 0),
            Err(AgentError::EmptyData)
        ));
    }

    #[test]
    fn learned_variant_needs_detector() {
        assert!(matches!(
            ebt_defender(TreeVariant::LearnedSwitch, None),
            Err(AgentError::MissingDetector)
        ));
        assert!(ebt_defender(TreeVariant::CardiffLike, None).is_ok());
    }

    #[test]
    fn registry_matches_tree() {
        let reg = netsim_registry(GreedyDecoyTable::default());
        assert!(ebt_core::btengine::validate(&build_learned_tree(), &reg).is_empty());
    }

    #[test]
    fn scan_phase_analyzes_user_hosts() {
        let mut d = ebt_defender(TreeVariant::CardiffLike, None).unwrap();
        let ep = run_episode(&mut d, StrategyKind::RedSwitch, 10, 3).unwrap();
        let opening: Vec<BlueAction> = ep.steps[..3].iter().map(|s| s.blue).collect();
        assert_eq!(
            opening,
            vec![BlueAction::Analyze(USER1), BlueAction::Analyze(USER2), BlueAction::Analyze(USER3)]
        );
        assert!(ep.steps[..3].iter().all(|s| s.believed_strategy.is_none()));
    }

    #[test]
    fn cardiff_never_reevaluates() {
        let mut d = ebt_defender(TreeVariant::CardiffLike, None).unwrap();
        let ep = run_episode(&mut d, StrategyKind::RedSwitch, 100, 5).unwrap();
        let labels: BTreeSet<_> = ep.steps[3..].iter().map(|s| s.believed_strategy).collect();
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn oracle_flips_at_switch_time() {
        for seed in 0..20 {
            let mut d = ebt_defender(TreeVariant::OracleSwitch, None).unwrap();
            let ep = run_episode(&mut d, StrategyKind::RedSwitch, 100, seed).unwrap();
            let RedStrategy::RedSwitch { switch_t } = ep.strategy else { unreachable!() };
            for s in &ep.steps[3..] {
                assert_eq!(s.believed_strategy, Some(s.red_strategy_active), "t={} switch={switch_t}", s.t);
            }
        }
    }

    #[test]
    fn policies_stay_in_reduced_space() {
        let space: BTreeSet<BlueAction> = reduced_action_space().into_iter().collect();
        for seed in 0..20 {
            for kind in [StrategyKind::Meander, StrategyKind::BLine, StrategyKind::RedSwitch] {
                let mut policies: Vec<Box<dyn DefenderPolicy>> = vec![
                    Box::new(ScriptedDefender::anti_meander()),
                    Box::new(ScriptedDefender::anti_bline()),
                    Box::new(ebt_defender(TreeVariant::OracleSwitch, None).unwrap()),
                ];
                for p in policies.iter_mut() {
                    let ep = run_episode(p.as_mut(), kind, 100, seed).unwrap();
                    assert!(ep.steps.iter().all(|s| space.contains(&s.blue)));
                }
            }
        }
    }

    #[test]
    fn training_windows_per_episode() {
        let data = collect_training_data(3, DEFAULT_WINDOW, 1).unwrap();
        assert_eq!(data.len(), 3 * (100 - DEFAULT_WINDOW + 1));
        for e in 0..3 {
            let labels: Vec<bool> = data.iter().filter(|s| s.episode == e).map(|s| s.bline).collect();
            let flips = labels.windows(2).filter(|p| p[0] != p[1]).count();
            assert_eq!(flips, 1);
            assert!(!labels[0]);
        }
    }
}
