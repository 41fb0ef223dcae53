mod common;

use std::sync::Arc;

use ebt_core::firefighter::{reset, Drone, FireAction, FireActionType, FireConfig};
use ebt_core::graphgen::{generate_er, FireGraph};
use proptest::prelude::*;

#[test]
fn matches_transcription_on_small_graphs() {
    let divergences = common::firefighter_divergences(3_000, 17);
    assert!(divergences.is_empty(), "{:#?}", &divergences[..divergences.len().min(5)]);
}

#[test]
fn small_graph_enumeration_counts() {
    // connected labeled graphs on 1..=5 nodes: 1, 1, 4, 38, 728
    let graphs = common::all_connected_graphs(5);
    let per_n: Vec<usize> = (1..=5).map(|n| graphs.iter().filter(|(m, _)| *m == n).count()).collect();
    assert_eq!(per_n, vec![1, 1, 4, 38, 728]);
}

#[test]
fn unmitigated_fire_saturates_within_bound() {
    for seed in 0..200 {
        let g = Arc::new(generate_er(10, 0.2, seed).unwrap());
        let cfg = FireConfig {
            horizon: 1000,
            ..FireConfig::default()
        };
        let mut s = reset(Arc::clone(&g), &cfg).unwrap();
        let bound = (g.len() as u32 - 1) * cfg.t_burn_max + 1;
        loop {
            let next = s.step(None, &cfg).unwrap().state;
            let done = ebt_core::firefighter::is_terminal(&s, &next, &cfg);
            s = next;
            if done {
                break;
            }
        }
        assert_eq!(s.burned_count(&cfg), g.len());
        assert!(s.t <= bound, "seed {seed}: {} > {bound}", s.t);
    }
}

fn arb_actions(n: usize) -> impl Strategy<Value = Vec<Option<(usize, u8)>>> {
    prop::collection::vec(prop::option::weighted(0.85, (0..n, 0u8..3)), 1..40)
}

proptest! {
    #[test]
    fn monotone_immune_local_and_hidden(seed in 0u64..500, t_max in 1u32..5, actions in arb_actions(10)) {
        let g = Arc::new(generate_er(10, 0.2, seed).unwrap());
        let cfg = FireConfig { t_burn_max: t_max, horizon: 60, ..FireConfig::default() };
        let mut s = reset(Arc::clone(&g), &cfg).unwrap();
        let mut frozen: Vec<Option<u32>> = vec![None; g.len()];
        for a in actions {
            let action = a.map(|(v, k)| FireAction { node: v, kind: FireActionType::from_code(k).unwrap() });
            let next = s.step(action, &cfg).unwrap().state;
            for v in 0..g.len() {
                prop_assert!(next.burn[v] >= s.burn[v]);
                prop_assert!(next.burn[v] <= t_max);
                if next.burn[v] > s.burn[v] {
                    prop_assert!(g.neighbors(v).iter().any(|&w| s.burn[w] == t_max));
                }
                let order = |d: Drone| d.code();
                prop_assert!(order(next.drones[v]) >= order(s.drones[v]));
                if next.retardant.contains(&v) && frozen[v].is_none() {
                    frozen[v] = Some(next.burn[v]);
                }
                if let Some(b) = frozen[v] {
                    prop_assert_eq!(next.burn[v], b);
                }
            }
            prop_assert!(s.visible.is_subset(&next.visible));
            prop_assert!(s.retardant.is_subset(&next.retardant));

            // changing the burn time of hidden nodes never changes the observation
            let obs = next.observe(&cfg);
            let mut tampered = next.clone();
            for v in 0..g.len() {
                if !tampered.visible.contains(&v) {
                    tampered.burn[v] = (tampered.burn[v] + 1) % (t_max + 1);
                }
            }
            prop_assert_eq!(tampered.observe(&cfg), obs.clone());
            prop_assert!(obs.burn.keys().all(|v| next.visible.contains(v)));

            let done = ebt_core::firefighter::is_terminal(&s, &next, &cfg);
            s = next;
            if done {
                break;
            }
        }
    }

    #[test]
    fn episodes_end_by_horizon(seed in 0u64..200, horizon in 1u32..20) {
        let g = Arc::new(FireGraph::path(12));
        let cfg = FireConfig { horizon, source: (seed % 12) as usize, ..FireConfig::default() };
        let mut s = reset(g, &cfg).unwrap();
        let mut steps = 0;
        loop {
            let next = s.step(None, &cfg).unwrap().state;
            steps += 1;
            let done = ebt_core::firefighter::is_terminal(&s, &next, &cfg);
            s = next;
            if done { break; }
        }
        prop_assert!(steps <= horizon);
    }
}
