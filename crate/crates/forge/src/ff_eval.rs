use std::path::Path;
use std::sync::Arc;

use ebt_core::behaviors::{build_baseline_tree, build_expert_tree, cyber_registry, run_episode};
use ebt_core::btengine::BehaviorTree;
use ebt_core::gp::{episode_seeds, parse_genome, FitnessCoefficients, Genome};
use ebt_core::graphgen::generate_er;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FireEvalParams, TreeSpec};
use crate::{ensure_dir, write_csv, ForgeError, Written};

pub(crate) fn resolve_tree(spec: &TreeSpec) -> Result<Genome, ForgeError> {
    Ok(match spec {
        TreeSpec::Baseline => Genome::from_tree(&build_baseline_tree()),
        TreeSpec::Expert => Genome::from_tree(&build_expert_tree()),
        TreeSpec::Genome(text) => parse_genome(text).map_err(|e| ForgeError::Config(format!("genome {text:?}: {e}")))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub tree: &'static str,
    pub instance: usize,
    pub seed: u64,
    pub visibility: usize,
    pub burned_sum: usize,
    pub length: usize,
    pub fitness: f64,
}

/// Mean fitness of one tree and its three additive terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub tree: &'static str,
    pub genome_text: String,
    pub episodes: usize,
    pub mean_fitness: f64,
    pub visibility_term: f64,
    pub length_term: f64,
    pub fire_term: f64,
    pub mean_visibility: f64,
    pub length: usize,
    pub mean_burned_sum: f64,
}

#[derive(Debug, Clone)]
pub struct FireEvalReport {
    pub summaries: Vec<TreeSummary>,
    pub episodes: Vec<EpisodeRow>,
    pub files: Written,
}

/// Scores each configured tree on the same fresh instances and writes
/// `episodes.csv` and `summary.csv` into `out`.
pub fn run_firefighter_eval(p: &FireEvalParams, seed: u64, out: &Path) -> Result<FireEvalReport, ForgeError> {
    if p.episodes == 0 || p.trees.is_empty() {
        return Err(ForgeError::Config("need at least one episode and one tree".into()));
    }
    p.fire.validate()?;
    let genomes = p.trees.iter().map(resolve_tree).collect::<Result<Vec<_>, _>>()?;
    ensure_dir(out)?;
    let seeds = episode_seeds(seed, p.episodes);
    let graphs = seeds
        .iter()
        .map(|&s| generate_er(p.fire.nodes, p.fire.edge_prob, s).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    let fire = p.fire.fire_config();
    let c: FitnessCoefficients = p.coefficients.into();
    let registry = cyber_registry();

    let mut episodes = Vec::new();
    let mut summaries = Vec::new();
    for (spec, genome) in p.trees.iter().zip(&genomes) {
        let tree: BehaviorTree = genome.to_tree();
        let length = genome.node_count();
        let runs = graphs
            .par_iter()
            .map(|g| run_episode(&tree, &registry, Arc::clone(g), &fire))
            .collect::<Result<Vec<_>, _>>()?;
        let (mut vis, mut burned) = (0usize, 0usize);
        for (i, ep) in runs.iter().enumerate() {
            vis += ep.final_visible();
            burned += ep.burned_sum;
            episodes.push(EpisodeRow {
                tree: spec.label(),
                instance: i,
                seed: seeds[i],
                visibility: ep.final_visible(),
                burned_sum: ep.burned_sum,
                length,
                fitness: c.c_v * ep.final_visible() as f64 - c.c_l * length as f64 - c.c_f * ep.burned_sum as f64,
            });
        }
        let n = p.episodes as f64;
        let (mean_visibility, mean_burned_sum) = (vis as f64 / n, burned as f64 / n);
        let visibility_term = c.c_v * mean_visibility;
        let length_term = -(c.c_l * length as f64);
        let fire_term = -(c.c_f * mean_burned_sum);
        summaries.push(TreeSummary {
            tree: spec.label(),
            genome_text: genome.to_text(),
            episodes: p.episodes,
            mean_fitness: visibility_term + length_term + fire_term,
            visibility_term,
            length_term,
            fire_term,
            mean_visibility,
            length,
            mean_burned_sum,
        });
    }

    let mut files = Written::default();
    write_csv(&out.join("episodes.csv"), &episodes, &mut files)?;
    write_csv(&out.join("summary.csv"), &summaries, &mut files)?;
    Ok(FireEvalReport {
        summaries,
        episodes,
        files,
    })
}
