//! Genetic programming over string-encoded behavior trees.
//!
//! Genomes use a bracketed token form: `(seq A B (fall C D))`. Control tokens
//! `seq` and `fall` head a list, every other token is a behavior id. A leaf
//! with no children is written as a bare token.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::behaviors::{cyber_registry, run_episode, CyberValue, BEHAVIOR_IDS, GET_META_ACTION};
use crate::btengine::{BehaviorNode, BehaviorRegistry, BehaviorTree, NodeKind};
use crate::firefighter::{reset, FireConfig, FireError};
use crate::graphgen::{generate_er, FireGraph, GraphError};
use crate::rng::{derive_seed, seeded, SimRng};

pub const SEQ: &str = "seq";
pub const FALL: &str = "fall";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome {
    pub head: String,
    pub children: Vec<Genome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected `{0}`")]
    Unexpected(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("trailing input")]
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fire(#[from] FireError),
    #[error("invalid GP config: {0}")]
    InvalidConfig(String),
}

impl Genome {
    pub fn leaf(id: &str) -> Self {
        Self {
            head: id.to_string(),
            children: Vec::new(),
        }
    }

    pub fn control(head: &str, children: Vec<Genome>) -> Self {
        Self {
            head: head.to_string(),
            children,
        }
    }

    /// Smallest valid genome, used when repair deletes everything.
    pub fn minimal() -> Self {
        Self::control(SEQ, vec![Self::leaf(GET_META_ACTION)])
    }

    pub fn is_control(&self) -> bool {
        self.head == SEQ || self.head == FALL
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Self::depth).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_tree(tree: &BehaviorTree) -> Self {
        fn conv(n: &BehaviorNode) -> Genome {
            let head = match &n.kind {
                NodeKind::Sequence => SEQ,
                NodeKind::Fallback => FALL,
                NodeKind::Condition(id) | NodeKind::Action(id) => id.as_str(),
            };
            Genome::control(head, n.children.iter().map(conv).collect())
        }
        conv(&tree.root)
    }

    /// Executable tree; leaf kind follows the `?` suffix convention.
    pub fn to_tree(&self) -> BehaviorTree {
        fn conv(g: &Genome) -> BehaviorNode {
            let children = g.children.iter().map(conv).collect();
            let mut node = match g.head.as_str() {
                SEQ => BehaviorNode::sequence(Vec::new()),
                FALL => BehaviorNode::fallback(Vec::new()),
                id => BehaviorNode::leaf(id),
            };
            node.children = children;
            node
        }
        BehaviorTree::new(conv(self))
    }

    /// Pre-order node at `index` (0 is the root).
    pub fn nth(&self, mut index: usize) -> Option<&Genome> {
        if index == 0 {
            return Some(self);
        }
        index -= 1;
        for c in &self.children {
            let n = c.node_count();
            if index < n {
                return c.nth(index);
            }
            index -= n;
        }
        None
    }

    pub fn nth_mut(&mut self, mut index: usize) -> Option<&mut Genome> {
        if index == 0 {
            return Some(self);
        }
        index -= 1;
        for c in &mut self.children {
            let n = c.node_count();
            if index < n {
                return c.nth_mut(index);
            }
            index -= n;
        }
        None
    }

    /// Detaches the subtree at pre-order `index`; the root cannot be removed.
    pub fn remove_nth(&mut self, index: usize) -> Option<Genome> {
        let mut offset = 1;
        for i in 0..self.children.len() {
            let n = self.children[i].node_count();
            if index == offset {
                return Some(self.children.remove(i));
            }
            if index < offset + n {
                return self.children[i].remove_nth(index - offset);
            }
            offset += n;
        }
        None
    }

    fn indices_where(&self, pred: impl Fn(&Genome) -> bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        let mut i = 0;
        // pre-order via explicit stack, children pushed in reverse
        while let Some(g) = stack.pop() {
            if pred(g) {
                out.push(i);
            }
            i += 1;
            stack.extend(g.children.iter().rev());
        }
        out
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() && !self.is_control() {
            return f.write_str(&self.head);
        }
        write!(f, "({}", self.head)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Genome {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_genome(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        let boundary = ch.is_whitespace() || ch == '(' || ch == ')';
        if boundary {
            if let Some(s) = start.take() {
                out.push((s, Token::Atom(&text[s..i])));
            }
            match ch {
                '(' => out.push((i, Token::Open)),
                ')' => out.push((i, Token::Close)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, Token::Atom(&text[s..])));
    }
    out
}

pub fn parse_genome(text: &str) -> Result<Genome, ParseError> {
    parse_genome_with(text, &BEHAVIOR_IDS)
}

/// Parses against an explicit behavior vocabulary.
pub fn parse_genome_with(text: &str, vocabulary: &[&str]) -> Result<Genome, ParseError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let g = parse_expr(&tokens, &mut pos, text.len(), vocabulary)?;
    if let Some((at, _)) = tokens.get(pos) {
        return Err(ParseError {
            position: *at,
            kind: ParseErrorKind::Trailing,
        });
    }
    Ok(g)
}

fn check_atom(atom: &str, at: usize, vocabulary: &[&str]) -> Result<(), ParseError> {
    if atom == SEQ || atom == FALL || vocabulary.contains(&atom) {
        Ok(())
    } else {
        Err(ParseError {
            position: at,
            kind: ParseErrorKind::UnknownToken(atom.to_string()),
        })
    }
}

fn parse_expr(
    tokens: &[(usize, Token<'_>)],
    pos: &mut usize,
    end: usize,
    vocabulary: &[&str],
) -> Result<Genome, ParseError> {
    let eof = ParseError {
        position: end,
        kind: ParseErrorKind::UnexpectedEnd,
    };
    let (at, tok) = tokens.get(*pos).ok_or(eof.clone())?;
    *pos += 1;
    match tok {
        Token::Atom(a) => {
            check_atom(a, *at, vocabulary)?;
            Ok(Genome::leaf(a))
        }
        Token::Close => Err(ParseError {
            position: *at,
            kind: ParseErrorKind::Unexpected(")".into()),
        }),
        Token::Open => {
            let (hat, head) = tokens.get(*pos).ok_or(eof.clone())?;
            let Token::Atom(head) = head else {
                return Err(ParseError {
                    position: *hat,
                    kind: ParseErrorKind::Unexpected(if *head == Token::Open { "(" } else { ")" }.into()),
                });
            };
            check_atom(head, *hat, vocabulary)?;
            *pos += 1;
            let mut children = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(eof),
                    Some((_, Token::Close)) => {
                        *pos += 1;
                        return Ok(Genome::control(head, children));
                    }
                    Some(_) => children.push(parse_expr(tokens, pos, end, vocabulary)?),
                }
            }
        }
    }
}

/// Returns a genome whose tree passes validation with depth at most `max_depth`.
///
/// Leaves that carry children have those children hoisted in place as
/// following siblings (a root leaf gets wrapped in a sequence first). Nodes
/// that sit at `max_depth` and still have children are replaced by the end of
/// their first-child chain. Empty control nodes are then deleted bottom-up;
/// if nothing survives the result is [`Genome::minimal`]. `max_depth` must be
/// at least 2.
pub fn repair(genome: &Genome, max_depth: usize) -> Genome {
    let mut g = genome.clone();
    if !g.is_control() && !g.children.is_empty() {
        let kids = std::mem::take(&mut g.children);
        let mut root_children = vec![g];
        root_children.extend(kids);
        g = Genome::control(SEQ, root_children);
    }
    flatten(&mut g);
    truncate(&mut g, 1, max_depth.max(2));
    if prune_empty(&mut g) {
        g
    } else {
        Genome::minimal()
    }
}

fn flatten(node: &mut Genome) {
    let old = std::mem::take(&mut node.children);
    for mut c in old {
        flatten(&mut c);
        if c.is_control() {
            node.children.push(c);
        } else {
            let hoisted = std::mem::take(&mut c.children);
            node.children.push(c);
            node.children.extend(hoisted);
        }
    }
}

fn truncate(node: &mut Genome, depth: usize, max_depth: usize) {
    if depth >= max_depth {
        while !node.children.is_empty() {
            let first = node.children.swap_remove(0);
            *node = first;
        }
        return;
    }
    for c in &mut node.children {
        truncate(c, depth + 1, max_depth);
    }
}

fn prune_empty(node: &mut Genome) -> bool {
    if !node.is_control() {
        return true;
    }
    node.children.retain_mut(prune_empty);
    !node.children.is_empty()
}

pub fn random_behavior(rng: &mut SimRng) -> &'static str {
    BEHAVIOR_IDS[rng.gen_range(0..BEHAVIOR_IDS.len())]
}

fn random_control(rng: &mut SimRng) -> &'static str {
    if rng.gen_bool(0.5) {
        SEQ
    } else {
        FALL
    }
}

/// Random valid genome with a control root and depth at most `max_depth`.
pub fn random_genome(rng: &mut SimRng, max_depth: usize) -> Genome {
    fn grow(rng: &mut SimRng, depth: usize, max_depth: usize) -> Genome {
        if depth > 1 && (depth >= max_depth || rng.gen_bool(0.6)) {
            return Genome::leaf(random_behavior(rng));
        }
        let n = rng.gen_range(1..=4);
        let children = (0..n).map(|_| grow(rng, depth + 1, max_depth)).collect();
        Genome::control(random_control(rng), children)
    }
    grow(rng, 1, max_depth.max(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessCoefficients {
    pub c_v: f64,
    pub c_l: f64,
    pub c_f: f64,
}

impl Default for FitnessCoefficients {
    fn default() -> Self {
        Self {
            c_v: 1.0,
            c_l: 1.0,
            c_f: 1.0,
        }
    }
}

/// Instance distribution for fitness episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEnv {
    pub fire: FireConfig,
    pub nodes: usize,
    pub edge_prob: f64,
}

impl Default for EvalEnv {
    fn default() -> Self {
        Self {
            fire: FireConfig::default(),
            nodes: 10,
            edge_prob: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessRecord {
    pub genome: Genome,
    pub fitness: f64,
    /// Mean terminal visibility count.
    pub visibility: f64,
    pub length: usize,
    /// Mean burned-node count summed over the states of an episode.
    pub fire: f64,
    pub generation: usize,
}

impl FitnessRecord {
    fn disqualified(genome: &Genome) -> Self {
        Self {
            genome: genome.clone(),
            fitness: f64::NEG_INFINITY,
            visibility: 0.0,
            length: genome.node_count(),
            fire: 0.0,
            generation: 0,
        }
    }
}

pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|k| derive_seed(seed, k)).collect()
}

/// Scores genomes on a fixed list of graph instances.
#[derive(Debug, Clone)]
pub struct Evaluator {
    registry: BehaviorRegistry<CyberValue>,
    fire: FireConfig,
    coefficients: FitnessCoefficients,
    graphs: Vec<Arc<FireGraph>>,
}

impl Evaluator {
    /// One freshly generated ER graph per seed.
    pub fn new(env: &EvalEnv, coefficients: FitnessCoefficients, seeds: &[u64]) -> Result<Self, GpError> {
        let graphs = seeds
            .iter()
            .map(|&s| generate_er(env.nodes, env.edge_prob, s).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_graphs(graphs, env.fire.clone(), coefficients)
    }

    pub fn with_graphs(
        graphs: Vec<Arc<FireGraph>>,
        fire: FireConfig,
        coefficients: FitnessCoefficients,
    ) -> Result<Self, GpError> {
        if graphs.is_empty() {
            return Err(GpError::InvalidConfig("no evaluation episodes".into()));
        }
        for g in &graphs {
            reset(Arc::clone(g), &fire)?;
        }
        Ok(Self {
            registry: cyber_registry(),
            fire,
            coefficients,
            graphs,
        })
    }

    pub fn graphs(&self) -> &[Arc<FireGraph>] {
        &self.graphs
    }

    /// Mean fitness over all instances; any tick error disqualifies the genome.
    pub fn evaluate(&self, genome: &Genome) -> FitnessRecord {
        let tree = genome.to_tree();
        let mut vis = 0usize;
        let mut fire = 0usize;
        for g in &self.graphs {
            match run_episode(&tree, &self.registry, Arc::clone(g), &self.fire) {
                Ok(ep) => {
                    vis += ep.final_visible();
                    fire += ep.burned_sum;
                }
                Err(_) => return FitnessRecord::disqualified(genome),
            }
        }
        let episodes = self.graphs.len() as f64;
        let visibility = vis as f64 / episodes;
        let fire = fire as f64 / episodes;
        let length = genome.node_count();
        let c = &self.coefficients;
        FitnessRecord {
            genome: genome.clone(),
            fitness: c.c_v * visibility - c.c_l * length as f64 - c.c_f * fire,
            visibility,
            length,
            fire,
            generation: 0,
        }
    }
}

/// Fitness over `episodes` instances derived from `seed`.
pub fn fitness(
    genome: &Genome,
    env: &EvalEnv,
    coefficients: FitnessCoefficients,
    episodes: usize,
    seed: u64,
) -> Result<FitnessRecord, GpError> {
    let ev = Evaluator::new(env, coefficients, &episode_seeds(seed, episodes))?;
    Ok(ev.evaluate(genome))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: f64,
}

/// True when individual `i` ranks above `j`: higher fitness, then fewer nodes, then lower index.
fn ranks_above(pop: &[Individual], i: usize, j: usize) -> bool {
    let (a, b) = (&pop[i], &pop[j]);
    match a.fitness.total_cmp(&b.fitness) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            (a.genome.node_count(), i) < (b.genome.node_count(), j)
        }
    }
}

pub fn best_index(pop: &[Individual]) -> usize {
    (1..pop.len()).fold(0, |best, i| if ranks_above(pop, i, best) { i } else { best })
}

/// Tournament over `k` distinct individuals drawn uniformly; returns the winner's index.
pub fn select(pop: &[Individual], k: usize, rng: &mut SimRng) -> usize {
    let k = k.clamp(1, pop.len());
    let entrants = sample(rng, pop.len(), k).into_vec();
    entrants
        .iter()
        .copied()
        .reduce(|best, i| if ranks_above(pop, i, best) { i } else { best })
        .expect("tournament has at least one entrant")
}

pub(crate) fn crossover_unrepaired(a: &Genome, b: &Genome, rng: &mut SimRng) -> (Genome, Genome) {
    let i = rng.gen_range(0..a.node_count());
    let j = rng.gen_range(0..b.node_count());
    let mut a2 = a.clone();
    let mut b2 = b.clone();
    std::mem::swap(
        a2.nth_mut(i).expect("index in range"),
        b2.nth_mut(j).expect("index in range"),
    );
    (a2, b2)
}

/// Swaps a uniformly chosen subtree of `a` with one of `b`, then repairs both.
pub fn crossover(a: &Genome, b: &Genome, rng: &mut SimRng, max_depth: usize) -> (Genome, Genome) {
    let (x, y) = crossover_unrepaired(a, b, rng);
    (repair(&x, max_depth), repair(&y, max_depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    ReplaceLeaf,
    InsertLeaf,
    DeleteSubtree,
    WrapSubtree,
}

pub const MUTATIONS: [Mutation; 4] = [
    Mutation::ReplaceLeaf,
    Mutation::InsertLeaf,
    Mutation::DeleteSubtree,
    Mutation::WrapSubtree,
];

/// Applies one uniformly chosen mutation and repairs the result.
pub fn mutate(g: &Genome, rng: &mut SimRng, max_depth: usize) -> Genome {
    let m = MUTATIONS[rng.gen_range(0..MUTATIONS.len())];
    mutate_with(g, m, rng, max_depth)
}

pub fn mutate_with(g: &Genome, m: Mutation, rng: &mut SimRng, max_depth: usize) -> Genome {
    let mut out = g.clone();
    match m {
        Mutation::ReplaceLeaf => {
            let leaves = out.indices_where(|n| !n.is_control());
            if !leaves.is_empty() {
                let i = leaves[rng.gen_range(0..leaves.len())];
                let id = random_behavior(rng);
                let node = out.nth_mut(i).expect("index in range");
                node.head = id.to_string();
            }
        }
        Mutation::InsertLeaf => {
            let leaf = Genome::leaf(random_behavior(rng));
            let controls = out.indices_where(Genome::is_control);
            if controls.is_empty() {
                out = Genome::control(SEQ, vec![out, leaf]);
            } else {
                let i = controls[rng.gen_range(0..controls.len())];
                let node = out.nth_mut(i).expect("index in range");
                let at = rng.gen_range(0..=node.children.len());
                node.children.insert(at, leaf);
            }
        }
        Mutation::DeleteSubtree => {
            let i = rng.gen_range(0..out.node_count());
            if i == 0 {
                out = Genome::control(SEQ, Vec::new());
            } else {
                out.remove_nth(i);
            }
        }
        Mutation::WrapSubtree => {
            let i = rng.gen_range(0..out.node_count());
            let head = random_control(rng);
            let node = out.nth_mut(i).expect("index in range");
            let inner = std::mem::replace(node, Genome::control(head, Vec::new()));
            node.children.push(inner);
        }
    }
    repair(&out, max_depth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub trials: usize,
    pub tournament_k: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_baseline_mate: f64,
    pub episodes_per_eval: usize,
    pub coefficients: FitnessCoefficients,
    pub max_depth: usize,
    pub env: EvalEnv,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 16,
            generations: 200,
            trials: 5,
            tournament_k: 3,
            p_crossover: 0.8,
            p_mutation: 0.2,
            p_baseline_mate: 0.25,
            episodes_per_eval: 5,
            coefficients: FitnessCoefficients::default(),
            max_depth: 6,
            env: EvalEnv::default(),
            seed: 0,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let counts = [
            ("population_size", self.population_size),
            ("generations", self.generations),
            ("trials", self.trials),
            ("tournament_k", self.tournament_k),
            ("episodes_per_eval", self.episodes_per_eval),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(GpError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        let probs = [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
            ("p_baseline_mate", self.p_baseline_mate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(GpError::InvalidConfig(format!("{name}={p} outside [0, 1]")));
            }
        }
        if self.max_depth < 2 {
            return Err(GpError::InvalidConfig("max_depth must be >= 2".into()));
        }
        Ok(())
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, k as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveResult {
    pub best: FitnessRecord,
    /// Best fitness record of each generation's population.
    pub history: Vec<FitnessRecord>,
    pub baseline: FitnessRecord,
    /// Instance seeds shared by every evaluation in this run.
    pub eval_seeds: Vec<u64>,
    /// Number of distinct genomes that were simulated.
    pub distinct_evaluated: usize,
}

const EVAL_STREAM: u64 = 1;
const BREED_STREAM: u64 = 2;

/// One evolutionary run seeded by `cfg.seed`.
///
/// Every generation keeps the previous best genome and re-injects the
/// baseline; the rest of the population is bred by tournament selection,
/// subtree crossover (the partner is the baseline with probability
/// `p_baseline_mate`) and mutation. All genomes are scored on the same
/// instance set so the per-generation best never decreases.
pub fn evolve(cfg: &GpConfig, baseline: &Genome) -> Result<EvolveResult, GpError> {
    evolve_observed(cfg, baseline, |_, _| {})
}

/// [`evolve`] with a callback that sees every scored generation.
pub fn evolve_observed(
    cfg: &GpConfig,
    baseline: &Genome,
    mut on_generation: impl FnMut(usize, &[Individual]),
) -> Result<EvolveResult, GpError> {
    cfg.validate()?;
    let baseline = repair(baseline, cfg.max_depth);
    let eval_seeds = episode_seeds(derive_seed(cfg.seed, EVAL_STREAM), cfg.episodes_per_eval);
    let evaluator = Evaluator::new(&cfg.env, cfg.coefficients, &eval_seeds)?;
    let mut rng = seeded(derive_seed(cfg.seed, BREED_STREAM));
    let mut cache: HashMap<Genome, FitnessRecord> = HashMap::new();

    let mut population = vec![baseline.clone()];
    while population.len() < cfg.population_size {
        population.push(random_genome(&mut rng, cfg.max_depth.min(4)));
    }

    let mut history: Vec<FitnessRecord> = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let mut fresh: Vec<Genome> = population
            .iter()
            .filter(|g| !cache.contains_key(*g))
            .cloned()
            .collect();
        fresh.sort();
        fresh.dedup();
        let scored: Vec<FitnessRecord> = fresh.par_iter().map(|g| evaluator.evaluate(g)).collect();
        for rec in scored {
            cache.insert(rec.genome.clone(), rec);
        }
        let ranked: Vec<Individual> = population
            .iter()
            .map(|g| Individual {
                genome: g.clone(),
                fitness: cache[g].fitness,
            })
            .collect();
        on_generation(generation, &ranked);
        let best = best_index(&ranked);
        let mut record = cache[&ranked[best].genome].clone();
        record.generation = generation;
        history.push(record);

        if generation + 1 == cfg.generations {
            break;
        }
        let mut next = vec![ranked[best].genome.clone()];
        if cfg.population_size > 1 {
            next.push(baseline.clone());
        }
        let maybe_mutate = |g: Genome, rng: &mut SimRng| {
            if rng.gen_bool(cfg.p_mutation) {
                mutate(&g, rng, cfg.max_depth)
            } else {
                g
            }
        };
        while next.len() < cfg.population_size {
            let a = &ranked[select(&ranked, cfg.tournament_k, &mut rng)].genome;
            if rng.gen_bool(cfg.p_crossover) {
                let b = if rng.gen_bool(cfg.p_baseline_mate) {
                    &baseline
                } else {
                    &ranked[select(&ranked, cfg.tournament_k, &mut rng)].genome
                };
                let (c1, c2) = crossover(a, b, &mut rng, cfg.max_depth);
                for c in [c1, c2] {
                    if next.len() < cfg.population_size {
                        let c = maybe_mutate(c, &mut rng);
                        next.push(c);
                    }
                }
            } else {
                let c = maybe_mutate(a.clone(), &mut rng);
                next.push(c);
            }
        }
        population = next;
    }

    let best = history
        .iter()
        .max_by(|a, b| a.fitness.total_cmp(&b.fitness).then(b.generation.cmp(&a.generation)))
        .expect("at least one generation")
        .clone();
    let mut baseline_rec = evaluator.evaluate(&baseline);
    baseline_rec.generation = 0;
    Ok(EvolveResult {
        best,
        history,
        baseline: baseline_rec,
        eval_seeds,
        distinct_evaluated: cache.len(),
    })
}

/// Runs `cfg.trials` independent trials; trial `k` uses [`GpConfig::trial_seed`].
pub fn run_trials(cfg: &GpConfig, baseline: &Genome) -> Result<Vec<EvolveResult>, GpError> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let trial = GpConfig {
                seed: cfg.trial_seed(k),
                ..cfg.clone()
            };
            evolve(&trial, baseline)
        })
        .collect()
}
