//! Reference implementations used by the integration and acceptance suites.
//!
//! Nothing here calls into the code under test except to build inputs or to
//! drive the engine being compared.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

// ---------------------------------------------------------------------------
// Cyber-Firefighter transcription
// ---------------------------------------------------------------------------

/// Literal world state: burn times, drone codes (-1, 0, 1), retardant and visible sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleFire {
    pub t: u32,
    pub burn: Vec<u32>,
    pub drones: Vec<i8>,
    pub retardant: BTreeSet<usize>,
    pub visible: BTreeSet<usize>,
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        if !adj[u].contains(&v) {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    adj
}

/// Ball of radius r by repeated one-hop expansion of the whole set.
pub fn ball(adj: &[Vec<usize>], v: usize, r: usize) -> BTreeSet<usize> {
    let mut set = BTreeSet::from([v]);
    for _ in 0..r {
        let grown: BTreeSet<usize> = set
            .iter()
            .flat_map(|&u| adj[u].iter().copied().chain(std::iter::once(u)))
            .collect();
        set = grown;
    }
    set
}

pub fn oracle_reset(n: usize, source: usize, t_max: u32) -> OracleFire {
    let mut burn = vec![0; n];
    burn[source] = t_max;
    OracleFire {
        t: 0,
        burn,
        drones: vec![-1; n],
        retardant: BTreeSet::new(),
        visible: BTreeSet::new(),
    }
}

/// One step with explicit copies of every component: reads come from `s`,
/// writes go to the `next_*` copies. `kind` is 0 deploy, 1 activate, 2 retardant;
/// `None` is a turn without action.
pub fn oracle_step(
    adj: &[Vec<usize>],
    s: &OracleFire,
    action: Option<(usize, u8)>,
    t_max: u32,
    radius: usize,
    strict_retardant: bool,
) -> (OracleFire, bool) {
    let n = adj.len();
    let mut next_drones = s.drones.clone();
    let mut next_visible = s.visible.clone();
    let mut next_retardant = s.retardant.clone();
    let mut next_burn = s.burn.clone();
    let mut accepted = false;
    if let Some((v, kind)) = action {
        if kind == 0 {
            if s.drones[v] == -1 {
                next_drones[v] = 0;
                next_visible.insert(v);
                accepted = true;
            }
        } else if kind == 1 {
            if s.drones[v] == 0 {
                next_drones[v] = 1;
                next_visible.extend(ball(adj, v, radius));
                accepted = true;
            }
        } else if kind == 2 {
            let burn_ok = if strict_retardant {
                s.burn[v] == 0
            } else {
                s.burn[v] != t_max
            };
            if s.visible.contains(&v) && burn_ok {
                next_retardant.insert(v);
                accepted = true;
            }
        }
    }
    for u in 0..n {
        if next_retardant.contains(&u) {
            continue;
        }
        for &w in &adj[u] {
            if s.burn[w] == t_max {
                next_burn[u] = (s.burn[u] + 1).min(t_max);
                break;
            }
        }
    }
    (
        OracleFire {
            t: s.t + 1,
            burn: next_burn,
            drones: next_drones,
            retardant: next_retardant,
            visible: next_visible,
        },
        accepted,
    )
}

pub fn oracle_terminal(prev: &OracleFire, cur: &OracleFire, horizon: u32) -> bool {
    cur.t >= horizon || (cur.t > 0 && prev.burn == cur.burn)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        parent[a] = b;
    }
    let root = find(&mut parent, 0);
    (0..n).all(|x| find(&mut parent, x) == root)
}

/// Every connected labeled graph on `1..=max_n` nodes, as (n, edges).
pub fn all_connected_graphs(max_n: usize) -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .collect();
        for mask in 0u32..(1u32 << pairs.len()) {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &e)| e)
                .collect();
            if connected(n, &edges) {
                out.push((n, edges));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Erdős–Rényi rejection sampler
// ---------------------------------------------------------------------------

/// Mean edge density of connected G(n, p) draws, sampled with an unrelated rng.
pub fn rejection_edge_density(n: usize, p: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pairs = n * (n - 1) / 2;
    let mut total = 0usize;
    let mut kept = 0usize;
    while kept < samples {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        if connected(n, &edges) {
            total += edges.len();
            kept += 1;
        }
    }
    total as f64 / (samples * pairs) as f64
}

// ---------------------------------------------------------------------------
// Behavior-tree reference evaluator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefStatus {
    Success,
    Failure,
    Running,
}

/// Plain recursive tree used to generate cases and to compute expectations.
#[derive(Debug, Clone)]
pub enum RefTree {
    Seq(Vec<RefTree>),
    Fall(Vec<RefTree>),
    /// Leaf index into the outcome table.
    Leaf(usize),
}

impl RefTree {
    pub fn random(rng: &mut impl Rng, leaves: usize, depth: usize) -> RefTree {
        if depth == 0 || rng.gen_bool(0.35) {
            return RefTree::Leaf(rng.gen_range(0..leaves));
        }
        let kids = (0..rng.gen_range(1..=4))
            .map(|_| RefTree::random(rng, leaves, depth - 1))
            .collect();
        if rng.gen_bool(0.5) {
            RefTree::Seq(kids)
        } else {
            RefTree::Fall(kids)
        }
    }

    /// Expected status and the leaf indices executed, in order.
    pub fn evaluate(&self, outcomes: &[RefStatus], calls: &mut Vec<usize>) -> RefStatus {
        match self {
            RefTree::Leaf(i) => {
                calls.push(*i);
                outcomes[*i]
            }
            RefTree::Seq(kids) => {
                for k in kids {
                    match k.evaluate(outcomes, calls) {
                        RefStatus::Success => continue,
                        other => return other,
                    }
                }
                RefStatus::Success
            }
            RefTree::Fall(kids) => {
                for k in kids {
                    match k.evaluate(outcomes, calls) {
                        RefStatus::Failure => continue,
                        other => return other,
                    }
                }
                RefStatus::Failure
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Comparison runners
// ---------------------------------------------------------------------------

use std::sync::{Arc, Mutex};

use ebt_core::btengine::{
    tick_observed, BehaviorNode, BehaviorRegistry, BehaviorTree, Blackboard, BtError, NodeStatus,
    Permissions, TickTrace,
};
use ebt_core::firefighter::{self, FireAction, FireActionType, FireConfig, FireState};
use ebt_core::graphgen::FireGraph;

fn describe(state: &FireState) -> OracleFire {
    OracleFire {
        t: state.t,
        burn: state.burn.clone(),
        drones: state.drones.iter().map(|d| d.code()).collect(),
        retardant: state.retardant.clone(),
        visible: state.visible.clone(),
    }
}

/// Runs random episodes through both simulators; returns one message per divergence.
pub fn firefighter_divergences(trials: usize, seed: u64) -> Vec<String> {
    let graphs = all_connected_graphs(5);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for trial in 0..trials {
        let (n, edges) = &graphs[rng.gen_range(0..graphs.len())];
        let n = *n;
        let t_max = [1u32, 2, 4][rng.gen_range(0..3)];
        let cfg = FireConfig {
            t_burn_max: t_max,
            radius: rng.gen_range(0..3),
            horizon: rng.gen_range(1..30),
            source: rng.gen_range(0..n),
            retardant_requires_unburned: rng.gen_bool(0.25),
        };
        let adj = adjacency(n, edges);
        let graph = Arc::new(FireGraph::from_edges(n, edges).expect("edges in range"));
        let mut state = firefighter::reset(graph, &cfg).expect("valid config");
        let mut oracle = oracle_reset(n, cfg.source, t_max);
        if describe(&state) != oracle {
            out.push(format!("trial {trial}: reset differs"));
            continue;
        }
        loop {
            let action = if rng.gen_bool(0.15) {
                None
            } else {
                Some((rng.gen_range(0..n), rng.gen_range(0..3u8)))
            };
            let fire_action = action.map(|(v, k)| FireAction {
                node: v,
                kind: FireActionType::from_code(k).expect("code in range"),
            });
            let step = state.step(fire_action, &cfg).expect("not terminal");
            let (next_oracle, accepted) =
                oracle_step(&adj, &oracle, action, t_max, cfg.radius, cfg.retardant_requires_unburned);
            let got = describe(&step.state);
            if got != next_oracle || step.accepted != accepted {
                out.push(format!(
                    "trial {trial} t={}: action {action:?} engine {got:?}/{} oracle {next_oracle:?}/{accepted}",
                    state.t, step.accepted
                ));
                break;
            }
            let obs = step.state.observe(&cfg);
            let expected_obs: Vec<(usize, u32)> =
                next_oracle.visible.iter().map(|&v| (v, next_oracle.burn[v])).collect();
            let got_obs: Vec<(usize, u32)> = obs.burn.iter().map(|(&v, &b)| (v, b)).collect();
            if got_obs != expected_obs {
                out.push(format!("trial {trial} t={}: observation differs", state.t));
                break;
            }
            let burned = next_oracle.burn.iter().filter(|&&b| b == t_max).count();
            if step.state.burned_count(&cfg) != burned {
                out.push(format!("trial {trial} t={}: burned count differs", state.t));
                break;
            }
            let done = firefighter::is_terminal(&state, &step.state, &cfg);
            if done != oracle_terminal(&oracle, &next_oracle, cfg.horizon) {
                out.push(format!("trial {trial} t={}: termination differs", state.t));
                break;
            }
            state = step.state;
            oracle = next_oracle;
            if done {
                break;
            }
        }
    }
    out
}

pub const LEAVES: usize = 8;
/// Outcome code that makes a leaf touch a key it never declared.
pub const ROGUE: i64 = 3;

pub fn leaf_name(i: usize) -> String {
    if i % 2 == 0 {
        format!("A{i}!")
    } else {
        format!("C{i}?")
    }
}

fn outcome_key(i: usize) -> String {
    format!("bt/outcome/{i}")
}

fn to_node(t: &RefTree) -> BehaviorNode {
    match t {
        RefTree::Leaf(i) => BehaviorNode::leaf(&leaf_name(*i)),
        RefTree::Seq(k) => BehaviorNode::sequence(k.iter().map(to_node).collect()),
        RefTree::Fall(k) => BehaviorNode::fallback(k.iter().map(to_node).collect()),
    }
}

/// Registry of instrumented leaves: each reads its scripted outcome, appends
/// its index to `log`, and (for actions) writes its own declared key.
pub fn instrumented_registry(log: Arc<Mutex<Vec<usize>>>) -> BehaviorRegistry<i64> {
    let mut reg = BehaviorRegistry::new();
    for i in 0..LEAVES {
        let log = Arc::clone(&log);
        let name = leaf_name(i);
        let own = format!("bt/own/{i}");
        let okey = outcome_key(i);
        let is_action = i % 2 == 0;
        let mut perms = Permissions::new().read(&okey);
        if is_action {
            perms = perms.read_write(&own);
        }
        let run = move |bb: &mut ebt_core::btengine::BlackboardAccess<'_, i64>| {
            log.lock().expect("log lock").push(i);
            let code = bb.get(&okey)?.copied().unwrap_or(0);
            if is_action {
                let seen = bb.get(&own)?.copied().unwrap_or(0);
                bb.set(&own, seen + 1)?;
            }
            match code {
                0 => Ok(NodeStatus::Success),
                1 => Ok(NodeStatus::Failure),
                2 => Ok(NodeStatus::Running),
                _ => {
                    bb.get("bt/secret")?;
                    Ok(NodeStatus::Success)
                }
            }
        };
        if is_action {
            reg.register_action(&name, perms, run).expect("unique ids");
        } else {
            reg.register_condition(&name, perms, run).expect("read-only");
        }
    }
    reg
}

/// Expected result from the reference evaluator; a rogue leaf aborts the tick.
fn expected(tree: &RefTree, codes: &[i64]) -> (Result<RefStatus, usize>, Vec<usize>) {
    let mut calls = Vec::new();
    let rogue_first = {
        // status table where a rogue leaf behaves like Running so evaluation
        // stops there; the call log then tells whether it was reached
        let outcomes: Vec<RefStatus> = codes
            .iter()
            .map(|&c| match c {
                0 => RefStatus::Success,
                1 => RefStatus::Failure,
                _ => RefStatus::Running,
            })
            .collect();
        let status = tree.evaluate(&outcomes, &mut calls);
        match calls.last() {
            Some(&last) if codes[last] == ROGUE => Err(last),
            _ => Ok(status),
        }
    };
    (rogue_first, calls)
}

/// Checks the engine on `trees` random trees with random outcome tables.
pub fn bt_semantics_failures(trees: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let log = Arc::new(Mutex::new(Vec::new()));
    let reg = instrumented_registry(Arc::clone(&log));
    let mut out = Vec::new();
    for case in 0..trees {
        let shape = RefTree::random(&mut rng, LEAVES, 5);
        let codes: Vec<i64> = (0..LEAVES)
            .map(|i| {
                let roll = rng.gen_range(0..20);
                match roll {
                    0 => ROGUE,
                    1 | 2 if i % 2 == 0 => 2,
                    r if r < 11 => 0,
                    _ => 1,
                }
            })
            .collect();
        let tree = BehaviorTree::new(to_node(&shape));
        let mut bb = Blackboard::new();
        for (i, &c) in codes.iter().enumerate() {
            bb.set(&outcome_key(i), c);
        }
        bb.set("bt/secret", 42);
        let (want, want_calls) = expected(&shape, &codes);

        let mut runs = Vec::new();
        for _ in 0..2 {
            log.lock().expect("log lock").clear();
            let mut board = bb.clone();
            let mut trace = TickTrace::new();
            let got = tick_observed(&tree, &mut board, &reg, &mut trace);
            let calls = log.lock().expect("log lock").clone();
            runs.push((got, calls, trace.visited.clone(), board));
        }
        let (got, calls, visited, board) = &runs[0];
        if runs[1].0 != *got || runs[1].1 != *calls || runs[1].2 != *visited {
            out.push(format!("case {case}: nondeterministic tick"));
            continue;
        }
        if *calls != want_calls {
            out.push(format!("case {case}: calls {calls:?}, expected {want_calls:?}"));
            continue;
        }
        let preorder = tree.root.preorder();
        let visited_leaves: Vec<String> = visited
            .iter()
            .filter_map(|&i| preorder[i].kind.behavior_id().map(str::to_string))
            .collect();
        let want_names: Vec<String> = want_calls.iter().map(|&i| leaf_name(i)).collect();
        if visited_leaves != want_names {
            out.push(format!("case {case}: trace leaves differ from executed leaves"));
            continue;
        }
        match (&want, got) {
            (Ok(s), Ok(g)) => {
                let mapped = match g {
                    NodeStatus::Success => RefStatus::Success,
                    NodeStatus::Failure => RefStatus::Failure,
                    NodeStatus::Running => RefStatus::Running,
                };
                if mapped != *s {
                    out.push(format!("case {case}: status {g:?}, expected {s:?}"));
                }
            }
            (Err(i), Err(BtError::PermissionViolation { key, behavior })) => {
                if key != "bt/secret" || *behavior != leaf_name(*i) {
                    out.push(format!("case {case}: wrong violation {key} by {behavior}"));
                }
            }
            (w, g) => out.push(format!("case {case}: got {g:?}, expected {w:?}")),
        }
        // declared writes landed exactly once per executed action
        for i in (0..LEAVES).step_by(2) {
            let runs_i = want_calls.iter().filter(|&&c| c == i).count() as i64;
            let stored = board.get(&format!("bt/own/{i}")).copied().unwrap_or(0);
            if stored != runs_i {
                out.push(format!("case {case}: action {i} wrote {stored} times, ran {runs_i}"));
            }
        }
    }
    out
}
