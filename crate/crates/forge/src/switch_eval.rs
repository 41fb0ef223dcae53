use std::path::Path;
use std::sync::Arc;

use ebt_cage::agents::{collect_training_data, ebt_defender, train_detector, StrategyDetector, TreeVariant};
use ebt_cage::netsim::{run_episode, tenths_to_f64, RedStrategy, StrategyKind};
use ebt_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SwitchParams;
use crate::{ensure_dir, mean_std, write_csv, ForgeError, Written};

const DATA_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

/// Seed of evaluation episode `i`; every variant plays the same episode seeds.
pub fn eval_episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(seed, EVAL_STREAM), i as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchEpisodeRow {
    pub episode: usize,
    pub seed: u64,
    pub switch_t: u32,
    pub variant: &'static str,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: &'static str,
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
}

#[derive(Serialize)]
struct LossRow {
    iteration: usize,
    mean_bce: f64,
}

#[derive(Debug, Clone)]
pub struct SwitchReport {
    pub detector: Option<Arc<StrategyDetector>>,
    /// Minibatch loss history; empty when the detector was loaded.
    pub loss_history: Vec<f64>,
    /// Cumulative reward in tenths per variant, indexed by episode.
    pub rewards: Vec<(TreeVariant, Vec<i64>)>,
    pub summaries: Vec<VariantSummary>,
    pub files: Written,
}

impl SwitchReport {
    pub fn mean_of(&self, v: TreeVariant) -> Option<f64> {
        self.summaries.iter().find(|s| s.variant == v.name()).map(|s| s.mean_reward)
    }
}

/// Trains (or loads) the strategy detector, plays every configured defender
/// variant on the same RedSwitch episodes and writes `episodes.csv`,
/// `summary.csv` and, after training, `detector.json` and `loss_history.csv`.
pub fn run_strategy_switch_eval(p: &SwitchParams, seed: u64, out: &Path) -> Result<SwitchReport, ForgeError> {
    p.validate()?;
    ensure_dir(out)?;
    let mut files = Written::default();
    let needs_detector = p.variants.contains(&TreeVariant::LearnedSwitch);

    let mut loss_history = Vec::new();
    let detector = match (&p.detector, needs_detector) {
        (_, false) => None,
        (Some(path), true) => {
            let d = StrategyDetector::load(path)?;
            if d.window() != p.window {
                return Err(ForgeError::Config(format!(
                    "detector window {} does not match configured window {}",
                    d.window(),
                    p.window
                )));
            }
            Some(Arc::new(d))
        }
        (None, true) => {
            let data = collect_training_data(p.training_episodes, p.window, derive_seed(seed, DATA_STREAM))?;
            let (d, history) = train_detector(&data, &p.train_config(), derive_seed(seed, TRAIN_STREAM))?;
            let path = out.join("detector.json");
            d.save(&path)?;
            files.0.push(path);
            let rows: Vec<LossRow> = history
                .iter()
                .enumerate()
                .map(|(iteration, &mean_bce)| LossRow { iteration, mean_bce })
                .collect();
            write_csv(&out.join("loss_history.csv"), &rows, &mut files)?;
            loss_history = history;
            Some(Arc::new(d))
        }
    };

    let per_episode = (0..p.episodes)
        .into_par_iter()
        .map(|i| {
            let s = eval_episode_seed(seed, i);
            let mut switch_t = 0;
            let mut rewards = Vec::with_capacity(p.variants.len());
            for &v in &p.variants {
                let mut defender = ebt_defender(v, detector.clone())?;
                let ep = run_episode(&mut defender, StrategyKind::RedSwitch, p.horizon, s)?;
                if let RedStrategy::RedSwitch { switch_t: st } = ep.strategy {
                    switch_t = st;
                }
                rewards.push(ep.reward_tenths);
            }
            Ok((s, switch_t, rewards))
        })
        .collect::<Result<Vec<_>, ForgeError>>()?;

    let mut rows = Vec::with_capacity(p.episodes * p.variants.len());
    for (i, (s, switch_t, rewards)) in per_episode.iter().enumerate() {
        for (v, &r) in p.variants.iter().zip(rewards) {
            rows.push(SwitchEpisodeRow {
                episode: i,
                seed: *s,
                switch_t: *switch_t,
                variant: v.name(),
                reward: tenths_to_f64(r),
            });
        }
    }
    let rewards: Vec<(TreeVariant, Vec<i64>)> = p
        .variants
        .iter()
        .enumerate()
        .map(|(j, &v)| (v, per_episode.iter().map(|e| e.2[j]).collect()))
        .collect();
    let summaries: Vec<VariantSummary> = rewards
        .iter()
        .map(|(v, r)| {
            let points: Vec<f64> = r.iter().map(|&t| tenths_to_f64(t)).collect();
            let (mean_reward, std_reward) = mean_std(&points);
            VariantSummary {
                variant: v.name(),
                episodes: r.len(),
                mean_reward,
                std_reward,
            }
        })
        .collect();
    write_csv(&out.join("episodes.csv"), &rows, &mut files)?;
    write_csv(&out.join("summary.csv"), &summaries, &mut files)?;
    Ok(SwitchReport {
        detector,
        loss_history,
        rewards,
        summaries,
        files,
    })
}
