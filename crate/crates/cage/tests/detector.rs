use std::sync::{Arc, OnceLock};

use ebt_cage::agents::*;
use ebt_cage::netsim::*;
use ebt_core::rng::{derive_seed, seeded};
use rand::Rng;

struct Trained {
    detector: Arc<StrategyDetector>,
    history: Vec<f64>,
    held_out: Vec<TrainingWindow>,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = collect_training_data(1000, DEFAULT_WINDOW, 31).unwrap();
        let (d, history) = train_detector(&data, &DetectorTrainConfig::default(), 32).unwrap();
        Trained {
            detector: Arc::new(d),
            history,
            held_out: collect_training_data(200, DEFAULT_WINDOW, 33).unwrap(),
        }
    })
}

fn random_sample(rng: &mut impl Rng) -> Vec<f64> {
    (0..DEFAULT_WINDOW * OBS_BITS)
        .map(|_| if rng.gen_bool(0.15) { 1.0 } else { 0.0 })
        .collect()
}

#[test]
fn backprop_matches_central_differences() {
    let eps = 1e-5;
    let mut rng = seeded(77);
    for probe in 0..100 {
        let mut d = StrategyDetector::xavier(DEFAULT_WINDOW, DEFAULT_HIDDEN, derive_seed(5, probe));
        for h in 0..DEFAULT_HIDDEN {
            d.b1[h] = rng.gen_range(-0.5..0.5);
        }
        d.b2 = rng.gen_range(-0.5..0.5);
        let x = random_sample(&mut rng);
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let (_, grad) = d.loss_and_gradient(&x, y);

        // Weights from inactive inputs have zero gradient; probe the ones that matter.
        let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
        let w1_len = d.w1.len();
        let param = match rng.gen_range(0..4) {
            0 => active[rng.gen_range(0..active.len())] * DEFAULT_HIDDEN + rng.gen_range(0..DEFAULT_HIDDEN),
            1 => w1_len + rng.gen_range(0..DEFAULT_HIDDEN),
            2 => w1_len + DEFAULT_HIDDEN + rng.gen_range(0..DEFAULT_HIDDEN),
            _ => d.param_count() - 1,
        };
        let theta = d.param(param);
        d.set_param(param, theta + eps);
        let up = d.loss(&x, y);
        d.set_param(param, theta - eps);
        let down = d.loss(&x, y);
        d.set_param(param, theta);
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grad.get(param);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        assert!(rel < 1e-4, "probe {probe} param {param}: analytic {analytic} numeric {numeric}");
    }
}

#[test]
fn training_is_bit_identical() {
    let data = collect_training_data(40, DEFAULT_WINDOW, 8).unwrap();
    let cfg = DetectorTrainConfig::default();
    let (a, ha) = train_detector(&data, &cfg, 1).unwrap();
    let (b, hb) = train_detector(&data, &cfg, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), hb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(ha.len(), cfg.epochs * data.len().div_ceil(cfg.batch_size));
}

#[test]
fn loss_falls_every_epoch_on_small_set() {
    let data = collect_training_data(100, DEFAULT_WINDOW, 9).unwrap();
    let (_, history) = train_detector(&data, &DetectorTrainConfig::default(), 10).unwrap();
    let means = epoch_means(&history, 5);
    assert_eq!(means.len(), 5);
    for pair in means.windows(2) {
        assert!(pair[1] < pair[0], "{means:?}");
    }
}

#[test]
fn dataset_size() {
    let data = collect_training_data(1000, DEFAULT_WINDOW, 31).unwrap();
    assert_eq!(data.len(), 1000 * (100 - DEFAULT_WINDOW + 1));
    let positives = data.iter().filter(|s| s.bline).count();
    assert!(positives > data.len() / 2 && positives < data.len());
}

#[test]
fn full_training_halves_loss_and_generalizes() {
    let t = trained();
    let means = epoch_means(&t.history, 5);
    assert!(means[4] < 0.5 * means[0], "{means:?}");
    let acc = held_out_accuracy(&t.detector, &t.held_out).unwrap();
    assert!(acc >= 0.9, "held-out accuracy {acc}");
}

#[test]
fn deep_bline_windows_are_confident() {
    let t = trained();
    let deep: Vec<&TrainingWindow> = t
        .held_out
        .iter()
        .filter(|s| s.end_t >= s.switch_t + 2 * DEFAULT_WINDOW as u32)
        .collect();
    let confident = deep
        .iter()
        .filter(|s| {
            let (label, conf) = detect(&t.detector, &s.observations).unwrap();
            label == ActiveStrategy::BLine && conf > 0.9
        })
        .count();
    assert!(confident as f64 >= 0.9 * deep.len() as f64, "{confident} of {}", deep.len());
}

#[test]
fn detection_is_deterministic() {
    let t = trained();
    let w = &t.held_out[50].observations;
    assert_eq!(detect(&t.detector, w).unwrap(), detect(&t.detector, w).unwrap());
}

#[test]
fn learned_switch_latency() {
    let t = trained();
    let w = DEFAULT_WINDOW as u32;
    let mut latencies: Vec<u32> = (0..1000u64)
        .map(|i| {
            let mut d = ebt_defender(TreeVariant::LearnedSwitch, Some(Arc::clone(&t.detector))).unwrap();
            let ep = run_episode(&mut d, StrategyKind::RedSwitch, 100, derive_seed(34, i)).unwrap();
            let RedStrategy::RedSwitch { switch_t } = ep.strategy else { unreachable!() };
            ep.steps
                .iter()
                .find(|s| s.t >= switch_t && s.believed_strategy == Some(ActiveStrategy::BLine))
                .map_or(u32::MAX, |s| s.t - switch_t)
        })
        .collect();
    let within = latencies.iter().filter(|&&l| l <= w + 3).count();
    assert!(within >= 900, "{within} of 1000 episodes switched in time");
    latencies.sort_unstable();
    assert!(latencies[500] <= w + 3);
}

#[test]
fn weights_round_trip_through_json() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("detector.json");
    t.detector.save(&path).unwrap();
    let back = StrategyDetector::load(&path).unwrap();
    assert_eq!(&back, t.detector.as_ref());
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(raw["header"]["W"], 5);
    assert_eq!(raw["header"]["input_dim"], 260);
    assert_eq!(raw["header"]["hidden"], 100);
}
