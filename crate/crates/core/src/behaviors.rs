//! Cyber behaviors for Cyber-Firefighter and the reference trees built from them.
//!
//! A strategy picks a meta-action (Detector, Analysis or Mitigate); the
//! matching action behavior turns it into a concrete [`FireAction`] written to
//! the pending-action key. [`run_episode`] drives a tree against the
//! environment, one tick per timestep.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::btengine::{
    tick, BehaviorNode, BehaviorRegistry, BehaviorTree, Blackboard, BlackboardAccess, BtError,
    NodeStatus, Permissions,
};
use crate::firefighter::{
    reset, Drone, FireAction, FireActionType, FireConfig, FireError, FireObservation, FireState,
};
use crate::graphgen::FireGraph;

pub const KEY_STRATEGY: &str = "cyber/current_strategy";
pub const KEY_META_ACTION: &str = "cyber/meta_action";
pub const KEY_PENDING_ACTION: &str = "cyber/pending_env_action";
pub const KEY_OBSERVATION: &str = "cyber/last_observation";
pub const KEY_STRATEGY_DIRTY: &str = "cyber/strategy_dirty";
pub const KEY_CYCLE_INDEX: &str = "cyber/cycle_index";

pub const NOT_SELECT_STRATEGY: &str = "NotSelectStrategy?";
pub const SELECT_STRATEGY: &str = "SelectStrategy!";
pub const GET_META_ACTION: &str = "GetMetaAction!";
pub const IS_DETECTOR: &str = "IsDetector?";
pub const IS_ANALYSIS: &str = "IsAnalysis?";
pub const IS_MITIGATE: &str = "IsMitigate?";
pub const GET_DETECTOR_ACTION: &str = "GetDetectorAction!";
pub const GET_ANALYSIS_ACTION: &str = "GetAnalysisAction!";
pub const GET_MITIGATE_ACTION: &str = "GetMitigateAction!";

pub const BEHAVIOR_IDS: [&str; 9] = [
    NOT_SELECT_STRATEGY,
    SELECT_STRATEGY,
    GET_META_ACTION,
    IS_DETECTOR,
    IS_ANALYSIS,
    IS_MITIGATE,
    GET_DETECTOR_ACTION,
    GET_ANALYSIS_ACTION,
    GET_MITIGATE_ACTION,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyId {
    /// Deploy, activate, place retardant, repeat.
    Cycle,
    /// Retardant on the visible frontier first, otherwise search toward the fire.
    Contain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetaAction {
    Detector,
    Analysis,
    Mitigate,
}

impl MetaAction {
    pub fn action_type(self) -> FireActionType {
        match self {
            MetaAction::Detector => FireActionType::DeployDrone,
            MetaAction::Analysis => FireActionType::ActivateSearch,
            MetaAction::Mitigate => FireActionType::PlaceRetardant,
        }
    }
}

impl fmt::Display for MetaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Values stored on the Cyber-Firefighter blackboard.
#[derive(Debug, Clone, PartialEq)]
pub enum CyberValue {
    Strategy(StrategyId),
    Meta(MetaAction),
    Action(FireAction),
    Observation(Arc<FireObservation>),
    Flag(bool),
    Count(u64),
}

pub type CyberBoard = Blackboard<CyberValue>;
type View<'a> = BlackboardAccess<'a, CyberValue>;

fn read_strategy(bb: &View<'_>) -> Result<Option<StrategyId>, BtError> {
    Ok(match bb.get(KEY_STRATEGY)? {
        Some(CyberValue::Strategy(s)) => Some(*s),
        _ => None,
    })
}

fn read_meta(bb: &View<'_>) -> Result<Option<MetaAction>, BtError> {
    Ok(match bb.get(KEY_META_ACTION)? {
        Some(CyberValue::Meta(m)) => Some(*m),
        _ => None,
    })
}

fn read_observation(bb: &View<'_>) -> Result<Option<Arc<FireObservation>>, BtError> {
    Ok(match bb.get(KEY_OBSERVATION)? {
        Some(CyberValue::Observation(o)) => Some(Arc::clone(o)),
        _ => None,
    })
}

fn read_flag(bb: &View<'_>, key: &str) -> Result<bool, BtError> {
    Ok(matches!(bb.get(key)?, Some(CyberValue::Flag(true))))
}

fn read_count(bb: &View<'_>, key: &str) -> Result<u64, BtError> {
    Ok(match bb.get(key)? {
        Some(CyberValue::Count(c)) => *c,
        _ => 0,
    })
}

/// Visible nodes with a nonzero burn time.
pub fn visible_burning(obs: &FireObservation) -> BTreeSet<usize> {
    obs.burn
        .iter()
        .filter(|(_, &b)| b >= 1)
        .map(|(&v, _)| v)
        .collect()
}

fn retardant_candidates(obs: &FireObservation) -> Vec<usize> {
    obs.visible().filter(|&v| obs.accepts_retardant(v)).collect()
}

pub fn choose_strategy(obs: &FireObservation) -> StrategyId {
    if visible_burning(obs).is_empty() {
        StrategyId::Cycle
    } else {
        StrategyId::Contain
    }
}

/// Meta-action chosen by `strategy`; `cycle_index` counts earlier Cycle ticks.
pub fn choose_meta(strategy: StrategyId, obs: &FireObservation, cycle_index: u64) -> MetaAction {
    match strategy {
        StrategyId::Cycle => match cycle_index % 3 {
            0 => MetaAction::Detector,
            1 => MetaAction::Analysis,
            _ => MetaAction::Mitigate,
        },
        StrategyId::Contain => {
            if !retardant_candidates(obs).is_empty() {
                MetaAction::Mitigate
            } else if obs.drones.contains(&Drone::Inactive) {
                MetaAction::Analysis
            } else {
                MetaAction::Detector
            }
        }
    }
}

/// Undroned node closest to the visible fire (least total hop distance to the
/// visible burning nodes), or the lowest-id undroned node if no fire is visible.
pub fn detector_target(obs: &FireObservation) -> Option<usize> {
    let free: Vec<usize> = (0..obs.drones.len())
        .filter(|&v| obs.drones[v] == Drone::None)
        .collect();
    let burning = visible_burning(obs);
    if burning.is_empty() {
        return free.first().copied();
    }
    let n = obs.graph.len();
    let tables: Vec<Vec<Option<usize>>> = burning.iter().map(|&b| obs.graph.distances_from(b)).collect();
    free.into_iter().min_by_key(|&v| {
        let total: usize = tables.iter().map(|d| d[v].unwrap_or(n)).sum();
        (total, v)
    })
}

pub fn analysis_target(obs: &FireObservation) -> Option<usize> {
    obs.drones.iter().position(|&d| d == Drone::Inactive)
}

/// Lowest-id retardant candidate next to a visible fully burning node, else
/// the lowest-id candidate.
pub fn mitigate_target(obs: &FireObservation) -> Option<usize> {
    let candidates = retardant_candidates(obs);
    let spreading = |w: usize| obs.burn_of(w) == Some(obs.t_burn_max);
    candidates
        .iter()
        .copied()
        .find(|&v| obs.graph.neighbors(v).iter().any(|&w| spreading(w)))
        .or_else(|| candidates.first().copied())
}

fn emit(bb: &mut View<'_>, target: Option<usize>, kind: FireActionType) -> Result<NodeStatus, BtError> {
    match target {
        Some(node) => {
            bb.set(KEY_PENDING_ACTION, CyberValue::Action(FireAction { node, kind }))?;
            Ok(NodeStatus::Success)
        }
        None => Ok(NodeStatus::Failure),
    }
}

/// Registry of the nine cyber behaviors.
pub fn cyber_registry() -> BehaviorRegistry<CyberValue> {
    let mut reg = BehaviorRegistry::new();
    let ok = |r: Result<(), crate::btengine::RegistryError>| r.expect("static registry is consistent");

    ok(reg.register_condition(
        NOT_SELECT_STRATEGY,
        Permissions::new()
            .read(KEY_STRATEGY)
            .read(KEY_STRATEGY_DIRTY)
            .read(KEY_OBSERVATION),
        |bb| {
            if read_strategy(bb)?.is_none() || read_flag(bb, KEY_STRATEGY_DIRTY)? {
                Ok(NodeStatus::Failure)
            } else {
                Ok(NodeStatus::Success)
            }
        },
    ));

    ok(reg.register_action(
        SELECT_STRATEGY,
        Permissions::new()
            .read(KEY_OBSERVATION)
            .write(KEY_STRATEGY)
            .write(KEY_STRATEGY_DIRTY),
        |bb| {
            let strategy = match read_observation(bb)? {
                Some(obs) => choose_strategy(&obs),
                None => StrategyId::Cycle,
            };
            bb.set(KEY_STRATEGY, CyberValue::Strategy(strategy))?;
            bb.set(KEY_STRATEGY_DIRTY, CyberValue::Flag(false))?;
            Ok(NodeStatus::Success)
        },
    ));

    ok(reg.register_action(
        GET_META_ACTION,
        Permissions::new()
            .read(KEY_STRATEGY)
            .read(KEY_OBSERVATION)
            .read_write(KEY_CYCLE_INDEX)
            .write(KEY_META_ACTION),
        |bb| {
            let (Some(strategy), Some(obs)) = (read_strategy(bb)?, read_observation(bb)?) else {
                return Ok(NodeStatus::Failure);
            };
            let index = read_count(bb, KEY_CYCLE_INDEX)?;
            let meta = choose_meta(strategy, &obs, index);
            if strategy == StrategyId::Cycle {
                bb.set(KEY_CYCLE_INDEX, CyberValue::Count(index + 1))?;
            }
            bb.set(KEY_META_ACTION, CyberValue::Meta(meta))?;
            Ok(NodeStatus::Success)
        },
    ));

    for (id, wanted) in [
        (IS_DETECTOR, MetaAction::Detector),
        (IS_ANALYSIS, MetaAction::Analysis),
        (IS_MITIGATE, MetaAction::Mitigate),
    ] {
        ok(reg.register_condition(id, Permissions::new().read(KEY_META_ACTION), move |bb| {
            if read_meta(bb)? == Some(wanted) {
                Ok(NodeStatus::Success)
            } else {
                Ok(NodeStatus::Failure)
            }
        }));
    }

    let action_perms = || Permissions::new().read(KEY_OBSERVATION).write(KEY_PENDING_ACTION);
    ok(reg.register_action(GET_DETECTOR_ACTION, action_perms(), |bb| {
        let target = read_observation(bb)?.and_then(|o| detector_target(&o));
        emit(bb, target, FireActionType::DeployDrone)
    }));
    ok(reg.register_action(GET_ANALYSIS_ACTION, action_perms(), |bb| {
        let target = read_observation(bb)?.and_then(|o| analysis_target(&o));
        emit(bb, target, FireActionType::ActivateSearch)
    }));
    ok(reg.register_action(GET_MITIGATE_ACTION, action_perms(), |bb| {
        let target = read_observation(bb)?.and_then(|o| mitigate_target(&o));
        emit(bb, target, FireActionType::PlaceRetardant)
    }));
    reg
}

fn strategy_fallback() -> BehaviorNode {
    BehaviorNode::fallback(vec![
        BehaviorNode::condition(NOT_SELECT_STRATEGY),
        BehaviorNode::action(SELECT_STRATEGY),
    ])
}

/// Strategy switching and meta-action selection only; never emits an environment action.
pub fn build_baseline_tree() -> BehaviorTree {
    BehaviorTree::new(BehaviorNode::sequence(vec![
        strategy_fallback(),
        BehaviorNode::action(GET_META_ACTION),
    ]))
}

/// Seven-child root sequence that executes exactly the defense behavior named
/// by the meta-action.
///
/// Children 3 and 4 run the detector/analysis behavior unless another
/// meta-action was chosen. Children 5 and 6 are gates that only pass for the
/// meta-action that has not been handled yet, so the trailing mitigate action
/// runs only when neither Detector nor Analysis was selected.
pub fn build_learned_tree() -> BehaviorTree {
    let c = BehaviorNode::condition;
    let a = BehaviorNode::action;
    BehaviorTree::new(BehaviorNode::sequence(vec![
        strategy_fallback(),
        a(GET_META_ACTION),
        BehaviorNode::fallback(vec![c(IS_ANALYSIS), c(IS_MITIGATE), a(GET_DETECTOR_ACTION)]),
        BehaviorNode::fallback(vec![c(IS_DETECTOR), c(IS_MITIGATE), a(GET_ANALYSIS_ACTION)]),
        BehaviorNode::fallback(vec![c(IS_ANALYSIS), c(IS_MITIGATE)]),
        BehaviorNode::fallback(vec![c(IS_DETECTOR), c(IS_MITIGATE)]),
        a(GET_MITIGATE_ACTION),
    ]))
}

pub fn build_expert_tree() -> BehaviorTree {
    build_learned_tree()
}

/// One environment step of an episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    /// Timestep at which the action was taken.
    pub t: u32,
    pub action: Option<FireAction>,
    pub accepted: bool,
    /// Counts after the step.
    pub burned_count: usize,
    pub visible: usize,
    pub retardant: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSummary {
    pub steps: Vec<StepRecord>,
    pub final_state: FireState,
    /// Burned nodes summed over every state of the episode, the initial one included.
    pub burned_sum: usize,
}

impl EpisodeSummary {
    pub fn final_visible(&self) -> usize {
        self.final_state.visible.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Tick(#[from] BtError),
    #[error(transparent)]
    Fire(#[from] FireError),
}

/// Drives `tree` on `graph` until the episode terminates.
///
/// Before each tick the driver publishes the observation and raises the
/// strategy-dirty flag whenever the set of visible burning nodes changed since
/// the previous tick. Whatever the tick leaves in the pending-action key is
/// forwarded to the environment; no pending action is a no-op step.
pub fn run_episode(
    tree: &BehaviorTree,
    registry: &BehaviorRegistry<CyberValue>,
    graph: Arc<FireGraph>,
    cfg: &FireConfig,
) -> Result<EpisodeSummary, EpisodeError> {
    let mut state = reset(graph, cfg)?;
    let mut bb = CyberBoard::new();
    let mut burned_sum = state.burned_count(cfg);
    let mut steps = Vec::new();
    let mut last_burning: Option<BTreeSet<usize>> = None;
    loop {
        let obs = state.observe(cfg);
        let burning = visible_burning(&obs);
        if last_burning.as_ref().is_some_and(|prev| *prev != burning) {
            bb.set(KEY_STRATEGY_DIRTY, CyberValue::Flag(true));
        }
        last_burning = Some(burning);
        bb.set(KEY_OBSERVATION, CyberValue::Observation(Arc::new(obs)));
        bb.remove(KEY_PENDING_ACTION);
        tick(tree, &mut bb, registry)?;
        let action = match bb.get(KEY_PENDING_ACTION) {
            Some(CyberValue::Action(a)) => Some(*a),
            _ => None,
        };
        let out = state.step(action, cfg)?;
        burned_sum += out.state.burned_count(cfg);
        steps.push(StepRecord {
            t: state.t,
            action,
            accepted: out.accepted,
            burned_count: out.state.burned_count(cfg),
            visible: out.state.visible.len(),
            retardant: out.state.retardant.len(),
        });
        let done = crate::firefighter::is_terminal(&state, &out.state, cfg);
        state = out.state;
        if done {
            break;
        }
    }
    Ok(EpisodeSummary {
        steps,
        final_state: state,
        burned_sum,
    })
}
