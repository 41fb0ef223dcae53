//! A thirteen-host, three-subnet network-defense simulator.
//!
//! Each timestep the red agent acts first, then the blue agent, and the turn
//! reward is computed from the resulting state. Rewards are kept in integer
//! tenths so that sums are exact.

use std::collections::BTreeSet;
use std::fmt;

use ebt_core::rng::{derive_seed, seeded, SimRng};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub const HOST_COUNT: usize = 13;
pub const OBS_BITS: usize = 4 * HOST_COUNT;
pub const DEFAULT_HORIZON: u32 = 100;
pub const DEFAULT_P_DETECT: f64 = 0.95;

pub const USER0: usize = 0;
pub const USER1: usize = 1;
pub const USER2: usize = 2;
pub const USER3: usize = 3;
pub const USER4: usize = 4;
pub const ENTERPRISE0: usize = 5;
pub const ENTERPRISE1: usize = 6;
pub const ENTERPRISE2: usize = 7;
pub const DEFENDER: usize = 8;
pub const OP_HOST0: usize = 9;
pub const OP_SERVER: usize = 12;

/// Hosts that blue actions may target in the reduced action space.
pub const DEFENDED_HOSTS: [usize; 9] = [
    USER1, USER2, USER3, USER4, ENTERPRISE0, ENTERPRISE1, ENTERPRISE2, DEFENDER, OP_SERVER,
];

/// Fixed red route: one host in each subnet, ending at the operational server.
pub const BLINE_PATH: [usize; 3] = [USER1, ENTERPRISE1, OP_SERVER];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    UserHost(u8),
    EnterpriseServer(u8),
    Defender,
    OpHost(u8),
    OpServer,
}

impl Role {
    pub fn of(host: usize) -> Role {
        match host {
            0..=4 => Role::UserHost(host as u8),
            5..=7 => Role::EnterpriseServer((host - 5) as u8),
            8 => Role::Defender,
            9..=11 => Role::OpHost((host - 9) as u8),
            _ => Role::OpServer,
        }
    }

    pub fn subnet(self) -> u8 {
        match self {
            Role::UserHost(_) => 1,
            Role::EnterpriseServer(_) | Role::Defender => 2,
            Role::OpHost(_) | Role::OpServer => 3,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::UserHost(i) => write!(f, "User{i}"),
            Role::EnterpriseServer(i) => write!(f, "Enterprise{i}"),
            Role::Defender => f.write_str("Defender"),
            Role::OpHost(i) => write!(f, "Op_Host{i}"),
            Role::OpServer => f.write_str("Op_Server0"),
        }
    }
}

pub fn subnet_of(host: usize) -> u8 {
    Role::of(host).subnet()
}

pub fn hosts_in_subnet(subnet: u8) -> impl Iterator<Item = usize> {
    (0..HOST_COUNT).filter(move |&h| subnet_of(h) == subnet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Service {
    Sshd,
    Smss,
    Apache,
    Tomcat,
    Femitter,
    Haraka,
    Vsftpd,
    Svchost,
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Genuine service each host runs.
pub fn real_services(host: usize) -> BTreeSet<Service> {
    match Role::of(host) {
        Role::EnterpriseServer(_) => BTreeSet::from([Service::Svchost]),
        Role::OpServer => BTreeSet::from([Service::Smss]),
        _ => BTreeSet::from([Service::Sshd]),
    }
}

/// Decoys blue may deploy on `host`, in greedy preference order.
pub fn allowed_decoys(host: usize) -> &'static [Service] {
    use Service::*;
    match host {
        USER1 | USER2 => &[Apache, Tomcat, Femitter, Haraka],
        USER3 => &[Apache, Femitter],
        USER4 => &[Tomcat],
        ENTERPRISE0 => &[Apache, Tomcat, Femitter, Haraka],
        ENTERPRISE1 | ENTERPRISE2 => &[Femitter],
        DEFENDER => &[Apache, Tomcat, Vsftpd, Haraka],
        OP_SERVER => &[Apache, Tomcat, Vsftpd, Haraka],
        _ => &[],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Compromise {
    Clean,
    Discovered,
    UserAccess,
    PrivAccess,
}

impl Compromise {
    pub fn has_access(self) -> bool {
        self >= Compromise::UserAccess
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub id: usize,
    pub role: Role,
    pub compromise: Compromise,
    pub services: BTreeSet<Service>,
    pub decoys: BTreeSet<Service>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RedStrategy {
    Meander,
    BLine,
    RedSwitch { switch_t: u32 },
}

/// Strategy that is actually driving red decisions at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ActiveStrategy {
    Meander,
    BLine,
}

impl RedStrategy {
    pub fn active_at(self, t: u32) -> ActiveStrategy {
        match self {
            RedStrategy::Meander => ActiveStrategy::Meander,
            RedStrategy::BLine => ActiveStrategy::BLine,
            RedStrategy::RedSwitch { switch_t } if t < switch_t => ActiveStrategy::Meander,
            RedStrategy::RedSwitch { .. } => ActiveStrategy::BLine,
        }
    }
}

/// Which red strategy family an episode uses; RedSwitch draws its switch time at reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Meander,
    BLine,
    RedSwitch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedAgentState {
    pub strategy: RedStrategy,
    /// Hosts whose address red knows.
    pub discovered: BTreeSet<usize>,
    /// Hosts whose services red has enumerated.
    pub scanned: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RedAction {
    DiscoverRemoteSystems { subnet: u8 },
    DiscoverNetworkServices { host: usize },
    ExploitRemoteService { host: usize, service: Service, success: bool },
    PrivilegeEscalate { host: usize },
    Impact { host: usize },
    Sleep,
}

impl RedAction {
    pub fn target(&self) -> Option<usize> {
        match *self {
            RedAction::DiscoverNetworkServices { host }
            | RedAction::ExploitRemoteService { host, .. }
            | RedAction::PrivilegeEscalate { host }
            | RedAction::Impact { host } => Some(host),
            _ => None,
        }
    }

    /// Activity signature a monitor would see on the target host.
    pub fn activity(&self) -> Activity {
        match self {
            RedAction::DiscoverNetworkServices { .. } => Activity::Scan,
            RedAction::ExploitRemoteService { .. }
            | RedAction::PrivilegeEscalate { .. }
            | RedAction::Impact { .. } => Activity::Exploit,
            _ => Activity::None,
        }
    }
}

impl fmt::Display for RedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RedAction::DiscoverRemoteSystems { subnet } => write!(f, "DiscoverRemoteSystems subnet{subnet}"),
            RedAction::DiscoverNetworkServices { host } => write!(f, "DiscoverNetworkServices {}", Role::of(host)),
            RedAction::ExploitRemoteService { host, service, success } => write!(
                f,
                "ExploitRemoteService {} {service} {}",
                Role::of(host),
                if success { "success" } else { "failed" }
            ),
            RedAction::PrivilegeEscalate { host } => write!(f, "PrivilegeEscalate {}", Role::of(host)),
            RedAction::Impact { host } => write!(f, "Impact {}", Role::of(host)),
            RedAction::Sleep => f.write_str("Sleep"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BlueAction {
    Monitor,
    Analyze(usize),
    Remove(usize),
    Restore(usize),
    DeployDecoy(usize, Service),
    Sleep,
}

impl BlueAction {
    pub fn host(&self) -> Option<usize> {
        match *self {
            BlueAction::Analyze(h) | BlueAction::Remove(h) | BlueAction::Restore(h) => Some(h),
            BlueAction::DeployDecoy(h, _) => Some(h),
            _ => None,
        }
    }
}

impl fmt::Display for BlueAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BlueAction::Monitor => f.write_str("Monitor"),
            BlueAction::Analyze(h) => write!(f, "Analyze {}", Role::of(h)),
            BlueAction::Remove(h) => write!(f, "Remove {}", Role::of(h)),
            BlueAction::Restore(h) => write!(f, "Restore {}", Role::of(h)),
            BlueAction::DeployDecoy(h, s) => write!(f, "DeployDecoy{s} {}", Role::of(h)),
            BlueAction::Sleep => f.write_str("Sleep"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("host {0} does not exist")]
    InvalidHost(usize),
    #[error("decoy {1} is not allowed on host {0}")]
    InvalidDecoy(usize, Service),
}

/// Per-host activity seen by the monitor this turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Activity {
    None,
    Scan,
    Exploit,
}

impl Activity {
    fn bits(self) -> u64 {
        match self {
            Activity::None => 0b00,
            Activity::Scan => 0b01,
            Activity::Exploit => 0b10,
        }
    }

    fn from_bits(b: u64) -> Activity {
        match b & 0b11 {
            0b01 => Activity::Scan,
            0b10 => Activity::Exploit,
            _ => Activity::None,
        }
    }
}

/// Blue's knowledge of a host's compromise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Belief {
    Unknown,
    Clean,
    User,
    Privileged,
}

impl Belief {
    fn bits(self) -> u64 {
        match self {
            Belief::Unknown => 0b00,
            Belief::Clean => 0b01,
            Belief::User => 0b10,
            Belief::Privileged => 0b11,
        }
    }

    fn from_bits(b: u64) -> Belief {
        match b & 0b11 {
            0b01 => Belief::Clean,
            0b10 => Belief::User,
            0b11 => Belief::Privileged,
            _ => Belief::Unknown,
        }
    }

    fn of(c: Compromise) -> Belief {
        match c {
            Compromise::Clean | Compromise::Discovered => Belief::Clean,
            Compromise::UserAccess => Belief::User,
            Compromise::PrivAccess => Belief::Privileged,
        }
    }
}

/// 52-bit observation: for host `h`, bits `4h+3..4h+2` hold the activity code
/// and bits `4h+1..4h` the compromise belief.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Observation(u64);

impl Observation {
    pub fn from_bits(bits: u64) -> Self {
        Self(bits & ((1u64 << OBS_BITS) - 1))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn activity(self, host: usize) -> Activity {
        Activity::from_bits(self.0 >> (4 * host + 2))
    }

    pub fn belief(self, host: usize) -> Belief {
        Belief::from_bits(self.0 >> (4 * host))
    }

    fn compose(activity: &[Activity; HOST_COUNT], belief: &[Belief; HOST_COUNT]) -> Self {
        let mut bits = 0u64;
        for h in 0..HOST_COUNT {
            bits |= (activity[h].bits() << 2 | belief[h].bits()) << (4 * h);
        }
        Self(bits)
    }

    /// Thirteen lowercase hex digits.
    pub fn to_hex(self) -> String {
        format!("{:013x}", self.0)
    }

    pub fn parse_hex(s: &str) -> Option<Self> {
        if s.len() != 13 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().map(Self::from_bits)
    }

    /// Bit `i` of the vector, least significant first.
    pub fn bit(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }
}

/// Reward contributions of a single turn, in tenths of a point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RewardBreakdown {
    pub privileged: i64,
    pub restore: i64,
    pub impact: i64,
}

impl RewardBreakdown {
    pub fn total(&self) -> i64 {
        self.privileged + self.restore + self.impact
    }
}

pub fn tenths_to_f64(t: i64) -> f64 {
    t as f64 / 10.0
}

/// Per-turn penalty, in tenths, for red holding privileged access on `host`.
pub fn privileged_penalty(host: usize) -> i64 {
    match Role::of(host) {
        Role::UserHost(0) => 0,
        Role::UserHost(_) | Role::OpHost(_) => -1,
        Role::EnterpriseServer(_) | Role::OpServer => -10,
        Role::Defender => 0,
    }
}

pub const RESTORE_PENALTY: i64 = -10;
pub const IMPACT_PENALTY: i64 = -100;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub hosts: Vec<Host>,
    pub t: u32,
    pub red: RedAgentState,
    /// Cumulative reward in tenths.
    pub cumulative_reward: i64,
    pub impacted_this_turn: bool,
    pub p_detect: f64,
    activity: [Activity; HOST_COUNT],
    belief: [Belief; HOST_COUNT],
    last_observation: Observation,
}

impl NetworkState {
    /// Red holds user access on user host 0 and knows only that host.
    pub fn new(strategy: RedStrategy) -> Self {
        let hosts = (0..HOST_COUNT)
            .map(|id| Host {
                id,
                role: Role::of(id),
                compromise: if id == USER0 {
                    Compromise::UserAccess
                } else {
                    Compromise::Clean
                },
                services: real_services(id),
                decoys: BTreeSet::new(),
            })
            .collect();
        Self {
            hosts,
            t: 0,
            red: RedAgentState {
                strategy,
                discovered: BTreeSet::from([USER0]),
                scanned: BTreeSet::from([USER0]),
            },
            cumulative_reward: 0,
            impacted_this_turn: false,
            p_detect: DEFAULT_P_DETECT,
            activity: [Activity::None; HOST_COUNT],
            belief: [Belief::Unknown; HOST_COUNT],
            last_observation: Observation::default(),
        }
    }

    pub fn compromise(&self, host: usize) -> Compromise {
        self.hosts[host].compromise
    }

    pub fn set_compromise(&mut self, host: usize, c: Compromise) {
        self.hosts[host].compromise = c;
    }

    pub fn active_strategy(&self) -> ActiveStrategy {
        self.red.strategy.active_at(self.t)
    }

    pub fn observation(&self) -> Observation {
        self.last_observation
    }

    fn subnet_reachable(&self, subnet: u8) -> bool {
        let priv_in = |s: u8| hosts_in_subnet(s).any(|h| self.compromise(h) == Compromise::PrivAccess);
        subnet == 1 || priv_in(subnet - 1) || priv_in(subnet)
    }

    fn subnet_discovered(&self, subnet: u8) -> bool {
        hosts_in_subnet(subnet).all(|h| self.red.discovered.contains(&h))
    }

    /// Next action on the per-host ladder: discover subnet, enumerate
    /// services, exploit, escalate.
    fn ladder_step(&self, host: usize) -> PlannedRed {
        let subnet = subnet_of(host);
        if !self.red.discovered.contains(&host) {
            PlannedRed::DiscoverRemote(subnet)
        } else if !self.red.scanned.contains(&host) {
            PlannedRed::Scan(host)
        } else if !self.compromise(host).has_access() {
            PlannedRed::Exploit(host)
        } else {
            PlannedRed::Escalate(host)
        }
    }

    fn plan_meander(&self) -> PlannedRed {
        for subnet in 1..=3u8 {
            let owned = hosts_in_subnet(subnet).all(|h| self.compromise(h) == Compromise::PrivAccess);
            if owned {
                continue;
            }
            if !self.subnet_reachable(subnet) {
                return PlannedRed::Sleep;
            }
            if !self.subnet_discovered(subnet) {
                return PlannedRed::DiscoverRemote(subnet);
            }
            let host = hosts_in_subnet(subnet)
                .find(|&h| self.compromise(h) != Compromise::PrivAccess)
                .expect("subnet not fully owned");
            return self.ladder_step(host);
        }
        PlannedRed::Impact(OP_SERVER)
    }

    fn plan_bline(&self) -> PlannedRed {
        if self.compromise(OP_SERVER) == Compromise::PrivAccess {
            return PlannedRed::Impact(OP_SERVER);
        }
        let target = BLINE_PATH
            .iter()
            .rev()
            .copied()
            .find(|&h| self.subnet_reachable(subnet_of(h)) && self.compromise(h) != Compromise::PrivAccess);
        match target {
            Some(h) => self.ladder_step(h),
            None => PlannedRed::Sleep,
        }
    }

    /// Reward of the turn that just resolved, given whether blue restored.
    pub fn turn_reward(&self, restored: bool) -> RewardBreakdown {
        RewardBreakdown {
            privileged: self
                .hosts
                .iter()
                .filter(|h| h.compromise == Compromise::PrivAccess)
                .map(|h| privileged_penalty(h.id))
                .sum(),
            restore: if restored { RESTORE_PENALTY } else { 0 },
            impact: if self.impacted_this_turn { IMPACT_PENALTY } else { 0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlannedRed {
    DiscoverRemote(u8),
    Scan(usize),
    Exploit(usize),
    Escalate(usize),
    Impact(usize),
    Sleep,
}

pub fn reset(seed: u64, kind: StrategyKind) -> NetworkState {
    let strategy = match kind {
        StrategyKind::Meander => RedStrategy::Meander,
        StrategyKind::BLine => RedStrategy::BLine,
        StrategyKind::RedSwitch => {
            let mut rng = seeded(derive_seed(seed, 0));
            RedStrategy::RedSwitch {
                switch_t: rng.gen_range(10..=30),
            }
        }
    };
    NetworkState::new(strategy)
}

/// Executes one red action chosen by the active strategy.
///
/// Monitoring of the action is sampled here: the target host's activity for
/// this turn is recorded with probability `p_detect`.
pub fn red_step(state: &mut NetworkState, rng: &mut SimRng) -> RedAction {
    state.impacted_this_turn = false;
    state.activity = [Activity::None; HOST_COUNT];
    let plan = match state.active_strategy() {
        ActiveStrategy::Meander => state.plan_meander(),
        ActiveStrategy::BLine => state.plan_bline(),
    };
    let action = match plan {
        PlannedRed::DiscoverRemote(subnet) => {
            for h in hosts_in_subnet(subnet) {
                state.red.discovered.insert(h);
                if state.compromise(h) == Compromise::Clean {
                    state.set_compromise(h, Compromise::Discovered);
                }
            }
            RedAction::DiscoverRemoteSystems { subnet }
        }
        PlannedRed::Scan(host) => {
            state.red.scanned.insert(host);
            RedAction::DiscoverNetworkServices { host }
        }
        PlannedRed::Exploit(host) => {
            let h = &state.hosts[host];
            let options: Vec<(Service, bool)> = h
                .services
                .iter()
                .map(|&s| (s, true))
                .chain(h.decoys.iter().map(|&s| (s, false)))
                .collect();
            let (service, real) = options[rng.gen_range(0..options.len())];
            if real {
                state.set_compromise(host, Compromise::UserAccess);
            }
            RedAction::ExploitRemoteService {
                host,
                service,
                success: real,
            }
        }
        PlannedRed::Escalate(host) => {
            state.set_compromise(host, Compromise::PrivAccess);
            RedAction::PrivilegeEscalate { host }
        }
        PlannedRed::Impact(host) => {
            state.impacted_this_turn = true;
            RedAction::Impact { host }
        }
        PlannedRed::Sleep => RedAction::Sleep,
    };
    if let Some(host) = action.target() {
        if rng.gen_bool(state.p_detect) {
            state.activity[host] = action.activity();
        }
    }
    action
}

/// Applies blue's action, closes the turn and returns the new observation and
/// the turn reward in tenths.
pub fn blue_step(state: &mut NetworkState, action: BlueAction) -> Result<(Observation, i64), NetError> {
    if let Some(h) = action.host() {
        if h >= HOST_COUNT {
            return Err(NetError::InvalidHost(h));
        }
    }
    if let BlueAction::DeployDecoy(h, s) = action {
        if !allowed_decoys(h).contains(&s) {
            return Err(NetError::InvalidDecoy(h, s));
        }
    }
    let mut restored = false;
    match action {
        BlueAction::Analyze(h) => state.belief[h] = Belief::of(state.compromise(h)),
        BlueAction::Remove(h) => {
            if state.compromise(h) == Compromise::UserAccess {
                state.set_compromise(h, Compromise::Discovered);
            }
            if state.belief[h] == Belief::User {
                state.belief[h] = Belief::Clean;
            }
        }
        BlueAction::Restore(h) => {
            let host = &mut state.hosts[h];
            host.compromise = Compromise::Clean;
            host.decoys.clear();
            state.belief[h] = Belief::Clean;
            restored = true;
        }
        BlueAction::DeployDecoy(h, s) => {
            state.hosts[h].decoys.insert(s);
        }
        BlueAction::Monitor | BlueAction::Sleep => {}
    }
    let activity = if action == BlueAction::Sleep {
        [Activity::None; HOST_COUNT]
    } else {
        state.activity
    };
    let obs = Observation::compose(&activity, &state.belief);
    state.last_observation = obs;
    let reward = state.turn_reward(restored).total();
    state.cumulative_reward += reward;
    state.t += 1;
    Ok((obs, reward))
}

/// The 52 actions blue agents choose from: analyze, remove and restore on each
/// defended host, then every allowed decoy.
pub fn reduced_action_space() -> Vec<BlueAction> {
    let mut out = Vec::with_capacity(52);
    for &h in &DEFENDED_HOSTS {
        out.push(BlueAction::Analyze(h));
        out.push(BlueAction::Remove(h));
        out.push(BlueAction::Restore(h));
    }
    for &h in &DEFENDED_HOSTS {
        for &s in allowed_decoys(h) {
            out.push(BlueAction::DeployDecoy(h, s));
        }
    }
    out
}

/// What a blue policy may look at before choosing its action.
#[derive(Debug, Clone, PartialEq)]
pub struct BlueView<'a> {
    pub t: u32,
    pub observation: Observation,
    /// Observations returned so far, oldest first.
    pub history: &'a [Observation],
    /// Decoys blue itself has deployed and that are still in place.
    pub decoys: [&'a BTreeSet<Service>; HOST_COUNT],
    /// Ground-truth red strategy for this turn; only oracle policies should read it.
    pub oracle: ActiveStrategy,
}

pub trait DefenderPolicy {
    fn act(&mut self, view: &BlueView<'_>) -> BlueAction;

    /// Strategy the policy is currently defending against, if it tracks one.
    fn believed_strategy(&self) -> Option<ActiveStrategy> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SleepPolicy;

impl DefenderPolicy for SleepPolicy {
    fn act(&mut self, _view: &BlueView<'_>) -> BlueAction {
        BlueAction::Sleep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep {
    pub t: u32,
    pub red_action: String,
    pub blue_action: String,
    /// Turn reward in points.
    pub reward_delta: f64,
    pub observation_bits: String,
    pub red_strategy_active: ActiveStrategy,
    #[serde(skip)]
    pub observation: Observation,
    #[serde(skip)]
    pub reward_tenths: i64,
    #[serde(skip)]
    pub blue: BlueAction,
    #[serde(skip)]
    pub red: RedAction,
    #[serde(skip)]
    pub believed_strategy: Option<ActiveStrategy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<TrajectoryStep>,
    pub strategy: RedStrategy,
    /// Cumulative reward in tenths.
    pub reward_tenths: i64,
}

impl Episode {
    pub fn reward(&self) -> f64 {
        tenths_to_f64(self.reward_tenths)
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.steps.iter().map(|s| s.observation).collect()
    }

    /// One JSON object per step.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("trajectory serializes"));
            out.push('\n');
        }
        out
    }
}

/// Random stream for timestep `t` of an episode, so that episodes sharing a
/// seed see the same draws at the same time regardless of blue's choices.
pub fn step_rng(seed: u64, t: u32) -> SimRng {
    seeded(derive_seed(seed, u64::from(t) + 1))
}

pub fn run_episode(
    policy: &mut dyn DefenderPolicy,
    kind: StrategyKind,
    horizon: u32,
    seed: u64,
) -> Result<Episode, NetError> {
    let state = reset(seed, kind);
    run_episode_from(policy, state, horizon, seed)
}

pub fn run_episode_from(
    policy: &mut dyn DefenderPolicy,
    mut state: NetworkState,
    horizon: u32,
    seed: u64,
) -> Result<Episode, NetError> {
    let mut steps = Vec::with_capacity(horizon as usize);
    let mut history: Vec<Observation> = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let t = state.t;
        let oracle = state.active_strategy();
        let blue = {
            let decoys: [&BTreeSet<Service>; HOST_COUNT] = std::array::from_fn(|h| &state.hosts[h].decoys);
            let view = BlueView {
                t,
                observation: state.observation(),
                history: &history,
                decoys,
                oracle,
            };
            policy.act(&view)
        };
        let believed = policy.believed_strategy();
        let mut rng = step_rng(seed, t);
        let red = red_step(&mut state, &mut rng);
        let (obs, reward) = blue_step(&mut state, blue)?;
        history.push(obs);
        steps.push(TrajectoryStep {
            t,
            red_action: red.to_string(),
            blue_action: blue.to_string(),
            reward_delta: tenths_to_f64(reward),
            observation_bits: obs.to_hex(),
            red_strategy_active: oracle,
            observation: obs,
            reward_tenths: reward,
            blue,
            red,
            believed_strategy: believed,
        });
    }
    Ok(Episode {
        steps,
        strategy: state.red.strategy,
        reward_tenths: state.cumulative_reward,
    })
}
