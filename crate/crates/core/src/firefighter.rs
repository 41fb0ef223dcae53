//! Cyber-Firefighter: a partially observable pursuit-evasion game on a graph.
//!
//! A defender deploys drones, activates area searches and places retardant
//! while a fire spreads from a fixed source. Each step applies at most one
//! defender action, then advances the fire using a snapshot of the burn
//! times from before the step. A node only spreads once its burn time has
//! reached the maximum.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::graphgen::{neighbors_within, FireGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("node {0} is not in the graph")]
    InvalidNode(usize),
    #[error("episode already terminated at t={0}")]
    SteppedTerminal(u32),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FireConfig {
    pub t_burn_max: u32,
    pub radius: usize,
    pub horizon: u32,
    pub source: usize,
    /// Stricter retardant guard: only nodes with burn time 0 accept retardant.
    pub retardant_requires_unburned: bool,
}

impl Default for FireConfig {
    fn default() -> Self {
        Self {
            t_burn_max: 4,
            radius: 1,
            horizon: 50,
            source: 0,
            retardant_requires_unburned: false,
        }
    }
}

impl FireConfig {
    pub fn validate_for(&self, graph: &FireGraph) -> Result<(), FireError> {
        if self.t_burn_max < 1 {
            return Err(FireError::InvalidConfig("t_burn_max must be >= 1".into()));
        }
        if self.horizon < 1 {
            return Err(FireError::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.source >= graph.len() {
            return Err(FireError::InvalidNode(self.source));
        }
        Ok(())
    }
}

/// Drone status per node; transitions only go `None -> Inactive -> Active`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Drone {
    None,
    Inactive,
    Active,
}

impl Drone {
    pub fn code(self) -> i8 {
        match self {
            Drone::None => -1,
            Drone::Inactive => 0,
            Drone::Active => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FireActionType {
    DeployDrone,
    ActivateSearch,
    PlaceRetardant,
}

impl FireActionType {
    pub fn code(self) -> u8 {
        match self {
            FireActionType::DeployDrone => 0,
            FireActionType::ActivateSearch => 1,
            FireActionType::PlaceRetardant => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FireActionType::DeployDrone),
            1 => Some(FireActionType::ActivateSearch),
            2 => Some(FireActionType::PlaceRetardant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FireAction {
    pub node: usize,
    pub kind: FireActionType,
}

impl FireAction {
    pub fn deploy(node: usize) -> Self {
        Self {
            node,
            kind: FireActionType::DeployDrone,
        }
    }

    pub fn activate(node: usize) -> Self {
        Self {
            node,
            kind: FireActionType::ActivateSearch,
        }
    }

    pub fn retardant(node: usize) -> Self {
        Self {
            node,
            kind: FireActionType::PlaceRetardant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FireState {
    pub t: u32,
    pub burn: Vec<u32>,
    pub drones: Vec<Drone>,
    pub retardant: BTreeSet<usize>,
    pub visible: BTreeSet<usize>,
    pub graph: Arc<FireGraph>,
}

/// What the defender sees: burn times of visible nodes only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FireObservation {
    pub t: u32,
    pub t_burn_max: u32,
    pub retardant_requires_unburned: bool,
    pub burn: BTreeMap<usize, u32>,
    pub retardant: BTreeSet<usize>,
    pub drones: Vec<Drone>,
    pub graph: Arc<FireGraph>,
}

impl FireObservation {
    pub fn visible(&self) -> impl Iterator<Item = usize> + '_ {
        self.burn.keys().copied()
    }

    pub fn burn_of(&self, v: usize) -> Option<u32> {
        self.burn.get(&v).copied()
    }

    /// Whether a retardant placed on `v` would pass the step guard.
    pub fn accepts_retardant(&self, v: usize) -> bool {
        if self.retardant.contains(&v) {
            return false;
        }
        match self.burn_of(v) {
            None => false,
            Some(b) if self.retardant_requires_unburned => b == 0,
            Some(b) => b != self.t_burn_max,
        }
    }
}

/// Result of one step: the new state and whether the action's guard held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub state: FireState,
    pub accepted: bool,
}

pub fn reset(graph: Arc<FireGraph>, cfg: &FireConfig) -> Result<FireState, FireError> {
    cfg.validate_for(&graph)?;
    let n = graph.len();
    let mut burn = vec![0; n];
    burn[cfg.source] = cfg.t_burn_max;
    Ok(FireState {
        t: 0,
        burn,
        drones: vec![Drone::None; n],
        retardant: BTreeSet::new(),
        visible: BTreeSet::new(),
        graph,
    })
}

impl FireState {
    /// Whether the action's guard holds in this state.
    pub fn accepts(&self, action: &FireAction, cfg: &FireConfig) -> bool {
        let v = action.node;
        match action.kind {
            FireActionType::DeployDrone => self.drones[v] == Drone::None,
            FireActionType::ActivateSearch => self.drones[v] == Drone::Inactive,
            FireActionType::PlaceRetardant => {
                let burn_ok = if cfg.retardant_requires_unburned {
                    self.burn[v] == 0
                } else {
                    self.burn[v] != cfg.t_burn_max
                };
                self.visible.contains(&v) && burn_ok
            }
        }
    }

    /// Applies at most one defender action, then spreads the fire.
    ///
    /// A failed guard turns the action into a no-op; time still advances.
    /// Retardant placed during this step already protects its node from this
    /// step's spread. Spread reads the burn times from before the step.
    pub fn step(&self, action: Option<FireAction>, cfg: &FireConfig) -> Result<StepOutcome, FireError> {
        if self.t >= cfg.horizon {
            return Err(FireError::SteppedTerminal(self.t));
        }
        let n = self.graph.len();
        if let Some(a) = action {
            if a.node >= n {
                return Err(FireError::InvalidNode(a.node));
            }
        }
        let mut next = self.clone();
        let mut accepted = false;
        if let Some(a) = action {
            if self.accepts(&a, cfg) {
                accepted = true;
                match a.kind {
                    FireActionType::DeployDrone => {
                        next.drones[a.node] = Drone::Inactive;
                        next.visible.insert(a.node);
                    }
                    FireActionType::ActivateSearch => {
                        next.drones[a.node] = Drone::Active;
                        next.visible
                            .extend(neighbors_within(&self.graph, a.node, cfg.radius));
                    }
                    FireActionType::PlaceRetardant => {
                        next.retardant.insert(a.node);
                    }
                }
            }
        }
        for u in 0..n {
            if next.retardant.contains(&u) {
                continue;
            }
            let exposed = self
                .graph
                .neighbors(u)
                .iter()
                .any(|&w| self.burn[w] == cfg.t_burn_max);
            if exposed {
                next.burn[u] = (self.burn[u] + 1).min(cfg.t_burn_max);
            }
        }
        next.t += 1;
        Ok(StepOutcome {
            state: next,
            accepted,
        })
    }

    pub fn observe(&self, cfg: &FireConfig) -> FireObservation {
        observe(self, cfg)
    }

    pub fn burned_count(&self, cfg: &FireConfig) -> usize {
        burned_count(self, cfg)
    }
}

pub fn step(state: &FireState, action: Option<FireAction>, cfg: &FireConfig) -> Result<StepOutcome, FireError> {
    state.step(action, cfg)
}

/// Terminal once the horizon is reached, or once a step left every burn time unchanged.
pub fn is_terminal(prev: &FireState, cur: &FireState, cfg: &FireConfig) -> bool {
    cur.t >= cfg.horizon || (cur.t > 0 && prev.burn == cur.burn)
}

pub fn observe(state: &FireState, cfg: &FireConfig) -> FireObservation {
    FireObservation {
        t: state.t,
        t_burn_max: cfg.t_burn_max,
        retardant_requires_unburned: cfg.retardant_requires_unburned,
        burn: state.visible.iter().map(|&v| (v, state.burn[v])).collect(),
        retardant: state.retardant.clone(),
        drones: state.drones.clone(),
        graph: Arc::clone(&state.graph),
    }
}

pub fn burned_count(state: &FireState, cfg: &FireConfig) -> usize {
    state.burn.iter().filter(|&&b| b == cfg.t_burn_max).count()
}
