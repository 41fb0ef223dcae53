use std::path::Path;

use ebt_core::behaviors::{build_baseline_tree, build_expert_tree};
use ebt_core::gp::{run_trials, EvolveResult, Evaluator, FitnessRecord, Genome};
use serde::Serialize;

use crate::config::GpParams;
use crate::{ensure_dir, write_csv, ForgeError, Written};

#[derive(Debug, Clone, PartialEq)]
pub struct GpTrial {
    pub result: EvolveResult,
    /// Expert tree scored on the trial's evaluation instances.
    pub expert: FitnessRecord,
}

#[derive(Debug, Clone)]
pub struct GpReport {
    pub trials: Vec<GpTrial>,
    pub files: Written,
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    trial: usize,
    generation: usize,
    best_fitness: f64,
    best_genome_text: &'a str,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    trial: usize,
    tree: &'a str,
    fitness: f64,
    visibility: f64,
    length: usize,
    fire: f64,
    genome_text: String,
}

impl<'a> SummaryRow<'a> {
    fn new(trial: usize, tree: &'a str, r: &FitnessRecord) -> Self {
        Self {
            trial,
            tree,
            fitness: r.fitness,
            visibility: r.visibility,
            length: r.length,
            fire: r.fire,
            genome_text: r.genome.to_text(),
        }
    }
}

/// Runs the configured GP trials and writes into `out`:
/// `history.csv` (all trials), `trial_<k>.csv` per trial, and `summary.csv`
/// with the best genome of each trial next to the baseline and expert trees
/// scored on that trial's instances.
pub fn run_gp_training(p: &GpParams, seed: u64, out: &Path) -> Result<GpReport, ForgeError> {
    let cfg = p.to_gp_config(seed);
    cfg.validate().map_err(|e| ForgeError::Config(e.to_string()))?;
    ensure_dir(out)?;
    let baseline = Genome::from_tree(&build_baseline_tree());
    let expert_genome = Genome::from_tree(&build_expert_tree());
    let results = run_trials(&cfg, &baseline)?;

    let mut trials = Vec::with_capacity(results.len());
    for result in results {
        let ev = Evaluator::new(&cfg.env, cfg.coefficients, &result.eval_seeds)?;
        let expert = ev.evaluate(&expert_genome);
        trials.push(GpTrial { result, expert });
    }

    let mut files = Written::default();
    let texts: Vec<Vec<String>> = trials
        .iter()
        .map(|t| t.result.history.iter().map(|r| r.genome.to_text()).collect())
        .collect();
    let history_rows = |k: usize| {
        trials[k]
            .result
            .history
            .iter()
            .zip(&texts[k])
            .map(move |(r, text)| HistoryRow {
                trial: k,
                generation: r.generation,
                best_fitness: r.fitness,
                best_genome_text: text,
            })
    };
    let all: Vec<HistoryRow> = (0..trials.len()).flat_map(history_rows).collect();
    write_csv(&out.join("history.csv"), &all, &mut files)?;
    for k in 0..trials.len() {
        let rows: Vec<HistoryRow> = history_rows(k).collect();
        write_csv(&out.join(format!("trial_{k}.csv")), &rows, &mut files)?;
    }
    let summary: Vec<SummaryRow> = trials
        .iter()
        .enumerate()
        .flat_map(|(k, t)| {
            [
                SummaryRow::new(k, "gp_best", &t.result.best),
                SummaryRow::new(k, "baseline", &t.result.baseline),
                SummaryRow::new(k, "expert", &t.expert),
            ]
        })
        .collect();
    write_csv(&out.join("summary.csv"), &summary, &mut files)?;
    Ok(GpReport { trials, files })
}
