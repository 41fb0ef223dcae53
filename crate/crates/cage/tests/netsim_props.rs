use std::collections::BTreeSet;

use ebt_cage::agents::{ebt_defender, ScriptedDefender, TreeVariant};
use ebt_cage::netsim::*;
use ebt_core::rng::seeded;
use proptest::prelude::*;

/// Replays a fixed list of actions, then sleeps.
struct Scripted(Vec<BlueAction>);

impl DefenderPolicy for Scripted {
    fn act(&mut self, view: &BlueView<'_>) -> BlueAction {
        self.0.get(view.t as usize).copied().unwrap_or(BlueAction::Sleep)
    }
}

fn exploit_ready(decoys: &[Service], real: bool) -> NetworkState {
    let mut s = reset(0, StrategyKind::BLine);
    s.red.discovered.extend(hosts_in_subnet(1));
    s.red.scanned.insert(USER1);
    s.hosts[USER1].decoys.extend(decoys.iter().copied());
    if !real {
        s.hosts[USER1].services.clear();
    }
    s
}

#[test]
fn exploit_success_matches_service_share() {
    let base = exploit_ready(&[Service::Apache, Service::Tomcat, Service::Femitter], true);
    let mut rng = seeded(4242);
    let trials = 10_000;
    let mut wins = 0;
    for _ in 0..trials {
        let mut s = base.clone();
        match red_step(&mut s, &mut rng) {
            RedAction::ExploitRemoteService { host: USER1, success, .. } => {
                if success {
                    wins += 1;
                    assert_eq!(s.compromise(USER1), Compromise::UserAccess);
                } else {
                    assert_eq!(s.hosts, base.hosts);
                }
            }
            other => panic!("expected an exploit, got {other:?}"),
        }
    }
    let freq = wins as f64 / trials as f64;
    assert!((freq - 0.25).abs() <= 0.03, "success frequency {freq}");
}

#[test]
fn decoy_only_host_never_falls() {
    let base = exploit_ready(&[Service::Apache, Service::Haraka], false);
    let mut rng = seeded(7);
    for _ in 0..500 {
        let mut s = base.clone();
        let a = red_step(&mut s, &mut rng);
        assert!(matches!(a, RedAction::ExploitRemoteService { success: false, .. }));
        assert_eq!(s.hosts, base.hosts);
    }
}

/// With no blue interference the route is fixed: discover each subnet, then
/// scan, exploit and escalate one host per subnet.
const BLINE_OP_SERVER_PRIV_STEP: u32 = 11;

#[test]
fn bline_reaches_op_server_on_schedule() {
    let ladder_actions = (BLINE_PATH.len() * 4) as u32;
    assert_eq!(BLINE_OP_SERVER_PRIV_STEP, ladder_actions - 1);
    for seed in 0..100 {
        let ep = run_episode(&mut SleepPolicy, StrategyKind::BLine, 100, seed).unwrap();
        let first = ep
            .steps
            .iter()
            .find(|s| s.red == RedAction::PrivilegeEscalate { host: OP_SERVER })
            .map(|s| s.t);
        assert_eq!(first, Some(BLINE_OP_SERVER_PRIV_STEP));
        assert!(ep.steps[BLINE_OP_SERVER_PRIV_STEP as usize + 1..]
            .iter()
            .all(|s| s.red == RedAction::Impact { host: OP_SERVER }));
    }
}

#[test]
fn sleeping_blue_against_bline_is_dominated_by_impacts() {
    let ep = run_episode(&mut SleepPolicy, StrategyKind::BLine, 100, 3).unwrap();
    let impacts = ep.steps.iter().filter(|s| matches!(s.red, RedAction::Impact { .. })).count() as i64;
    assert_eq!(impacts, 100 - i64::from(BLINE_OP_SERVER_PRIV_STEP) - 1);
    let impact_share = impacts * IMPACT_PENALTY;
    assert!(impact_share as f64 / ep.reward_tenths as f64 > 0.8);
}

#[test]
fn oracle_defender_beats_sleeping_against_meander() {
    for seed in 0..20 {
        let mut oracle = ebt_defender(TreeVariant::OracleSwitch, None).unwrap();
        let defended = run_episode(&mut oracle, StrategyKind::Meander, 100, seed).unwrap();
        let idle = run_episode(&mut SleepPolicy, StrategyKind::Meander, 100, seed).unwrap();
        assert!(defended.reward_tenths >= idle.reward_tenths);
    }
}

#[test]
fn episodes_are_deterministic() {
    for kind in [StrategyKind::Meander, StrategyKind::BLine, StrategyKind::RedSwitch] {
        let a = run_episode(&mut ScriptedDefender::anti_bline(), kind, 100, 11).unwrap();
        let b = run_episode(&mut ScriptedDefender::anti_bline(), kind, 100, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }
}

#[test]
fn trajectory_lines() {
    let ep = run_episode(&mut ScriptedDefender::anti_meander(), StrategyKind::RedSwitch, 100, 5).unwrap();
    let text = ep.to_jsonl();
    assert_eq!(text.lines().count(), 100);
    for (line, step) in text.lines().zip(&ep.steps) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let hex = v["observation_bits"].as_str().unwrap();
        assert_eq!(hex.len(), 13);
        assert_eq!(Observation::parse_hex(hex), Some(step.observation));
        assert_eq!(v["t"].as_u64(), Some(u64::from(step.t)));
        assert_eq!(v["reward_delta"].as_f64(), Some(step.reward_delta));
        assert!(v["red_strategy_active"].is_string());
    }
}

#[test]
fn switch_preserves_discoveries() {
    for seed in 0..30 {
        let mut state = reset(seed, StrategyKind::RedSwitch);
        let RedStrategy::RedSwitch { switch_t } = state.red.strategy else { unreachable!() };
        let mut before = BTreeSet::new();
        for t in 0..60 {
            red_step(&mut state, &mut step_rng(seed, t));
            blue_step(&mut state, BlueAction::Sleep).unwrap();
            if state.t == switch_t {
                before = state.red.discovered.clone();
            }
            if state.t > switch_t {
                assert!(before.is_subset(&state.red.discovered));
            }
        }
    }
}

#[test]
fn restore_and_remove_on_privileged_host() {
    let mut s = reset(0, StrategyKind::Meander);
    s.set_compromise(ENTERPRISE1, Compromise::PrivAccess);
    blue_step(&mut s, BlueAction::Remove(ENTERPRISE1)).unwrap();
    assert_eq!(s.compromise(ENTERPRISE1), Compromise::PrivAccess);
    let (_, r) = blue_step(&mut s, BlueAction::Restore(ENTERPRISE1)).unwrap();
    assert_eq!(s.compromise(ENTERPRISE1), Compromise::Clean);
    assert_eq!(r, RESTORE_PENALTY);
}

fn action_strategy() -> impl Strategy<Value = Vec<BlueAction>> {
    let space = reduced_action_space();
    let n = space.len();
    prop::collection::vec(0..n + 2, 100).prop_map(move |ix| {
        ix.into_iter()
            .map(|i| match i {
                i if i < n => space[i],
                i if i == n => BlueAction::Monitor,
                _ => BlueAction::Sleep,
            })
            .collect()
    })
}

fn kind_strategy() -> impl Strategy<Value = StrategyKind> {
    prop_oneof![
        Just(StrategyKind::Meander),
        Just(StrategyKind::BLine),
        Just(StrategyKind::RedSwitch)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rewards_never_positive(actions in action_strategy(), kind in kind_strategy(), seed in any::<u64>()) {
        let ep = run_episode(&mut Scripted(actions), kind, 100, seed).unwrap();
        let mut running = 0;
        for s in &ep.steps {
            prop_assert!(s.reward_tenths <= 0);
            let next = running + s.reward_tenths;
            prop_assert!(next <= running);
            running = next;
        }
        prop_assert_eq!(running, ep.reward_tenths);
    }

    #[test]
    fn state_transitions_respect_blue_semantics(actions in action_strategy(), kind in kind_strategy(), seed in any::<u64>()) {
        let mut state = reset(seed, kind);
        let mut prev_obs = state.observation();
        for (t, &blue) in actions.iter().enumerate() {
            let before_red = state.clone();
            let red = red_step(&mut state, &mut step_rng(seed, t as u32));
            if let RedAction::ExploitRemoteService { success: false, .. } = red {
                prop_assert_eq!(&state.hosts, &before_red.hosts);
            }
            let before_blue = state.clone();
            let (obs, _) = blue_step(&mut state, blue).unwrap();
            match blue {
                BlueAction::Remove(h) => {
                    let was = before_blue.compromise(h);
                    let expect = if was == Compromise::UserAccess { Compromise::Discovered } else { was };
                    prop_assert_eq!(state.compromise(h), expect);
                }
                BlueAction::Restore(h) => {
                    prop_assert_eq!(state.compromise(h), Compromise::Clean);
                    prop_assert!(state.hosts[h].decoys.is_empty());
                }
                _ => {}
            }
            for h in 0..HOST_COUNT {
                prop_assert!(state.hosts[h].decoys.is_disjoint(&state.hosts[h].services));
                if obs.belief(h) != prev_obs.belief(h) {
                    let touched = matches!(
                        blue,
                        BlueAction::Analyze(x) | BlueAction::Restore(x) | BlueAction::Remove(x) if x == h
                    );
                    prop_assert!(touched, "belief of host {} changed under {:?}", h, blue);
                }
            }
            prop_assert!(state.compromise(USER0) >= Compromise::UserAccess);
            prev_obs = obs;
        }
    }
}
