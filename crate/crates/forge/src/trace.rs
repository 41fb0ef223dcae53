use std::path::Path;
use std::sync::Arc;

use ebt_cage::agents::{ebt_defender, StrategyDetector, TreeVariant};
use ebt_cage::netsim::{run_episode as run_net_episode, DefenderPolicy, Episode, SleepPolicy};
use ebt_core::behaviors::{cyber_registry, run_episode, EpisodeSummary};
use ebt_core::graphgen::generate_er;
use serde::{Deserialize, Serialize};

use crate::config::{DefenderSpec, TraceEnv, TraceParams};
use crate::ff_eval::resolve_tree;
use crate::{ForgeError, Written};

/// One firefighter step: the action taken at `t`, whether its guard held,
/// and the counts afterwards. No-op steps leave the action fields empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireTraceRow {
    pub t: u32,
    pub action_node: Option<usize>,
    pub action_type: Option<u8>,
    pub accepted: bool,
    pub burned_count: usize,
    pub visible: usize,
    pub retardant: usize,
}

/// One line of a netsim JSONL trace.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NetTraceRow {
    pub t: u32,
    pub red_action: String,
    pub blue_action: String,
    pub reward_delta: f64,
    pub observation_bits: String,
    pub red_strategy_active: String,
}

pub fn fire_trace_rows(ep: &EpisodeSummary) -> Vec<FireTraceRow> {
    ep.steps
        .iter()
        .map(|s| FireTraceRow {
            t: s.t,
            action_node: s.action.map(|a| a.node),
            action_type: s.action.map(|a| a.kind.code()),
            accepted: s.accepted,
            burned_count: s.burned_count,
            visible: s.visible,
            retardant: s.retardant,
        })
        .collect()
}

pub fn fire_trace_csv(ep: &EpisodeSummary) -> Result<String, ForgeError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in fire_trace_rows(ep) {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| ForgeError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_fire_trace(text: &str) -> Result<Vec<FireTraceRow>, ForgeError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(ForgeError::from)
}

pub fn parse_net_trace(text: &str) -> Result<Vec<NetTraceRow>, ForgeError> {
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(|e| ForgeError::Config(format!("bad trace line: {e}"))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    /// The trace text exactly as written.
    pub text: String,
    pub steps: usize,
    pub files: Written,
}

fn net_policy(p: &TraceParams) -> Result<Box<dyn DefenderPolicy>, ForgeError> {
    let variant = match p.defender {
        DefenderSpec::Sleep => return Ok(Box::new(SleepPolicy)),
        DefenderSpec::CardiffLike => TreeVariant::CardiffLike,
        DefenderSpec::OracleSwitch => TreeVariant::OracleSwitch,
        DefenderSpec::LearnedSwitch => TreeVariant::LearnedSwitch,
    };
    let detector = match &p.detector {
        Some(path) if variant == TreeVariant::LearnedSwitch => Some(Arc::new(StrategyDetector::load(path)?)),
        _ => None,
    };
    Ok(Box::new(ebt_defender(variant, detector)?))
}

pub fn net_episode(p: &TraceParams, seed: u64) -> Result<Episode, ForgeError> {
    let mut policy = net_policy(p)?;
    Ok(run_net_episode(policy.as_mut(), p.red.into(), p.horizon, seed)?)
}

pub fn fire_episode(p: &TraceParams, seed: u64) -> Result<EpisodeSummary, ForgeError> {
    let tree = resolve_tree(&p.tree)?.to_tree();
    let graph = Arc::new(generate_er(p.fire.nodes, p.fire.edge_prob, seed)?);
    Ok(run_episode(&tree, &cyber_registry(), graph, &p.fire.fire_config())?)
}

/// Plays one episode and writes its trace to the file `out`: CSV for the
/// firefighter, one JSON object per step for netsim.
pub fn emit_trace(p: &TraceParams, seed: u64, out: &Path) -> Result<TraceReport, ForgeError> {
    p.validate()?;
    let (text, steps) = match p.env {
        TraceEnv::Firefighter => {
            let ep = fire_episode(p, seed)?;
            (fire_trace_csv(&ep)?, ep.steps.len())
        }
        TraceEnv::Netsim => {
            let ep = net_episode(p, seed)?;
            (ep.to_jsonl(), ep.steps.len())
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::ensure_dir(dir)?;
    }
    std::fs::write(out, &text).map_err(|e| ForgeError::io(out, e))?;
    Ok(TraceReport {
        text,
        steps,
        files: Written(vec![out.to_path_buf()]),
    })
}
