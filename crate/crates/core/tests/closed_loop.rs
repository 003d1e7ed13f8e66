mod common;

use common::{canonical, canonical_identifier, canonical_training_set, TRAIN_SEED};
use mmaflc::identifier::{loss, train_offline, NeuralNet, TrainingSet};
use mmaflc::plant::{nominal_parking_plant, PlantState};
use mmaflc::simkit::{run_episode, ControllerKind};
use mmaflc::batch::{run_batch, run_batch_sequential};

const PEAK_AFLC_STEER: f64 = 0.08484;
const PEAK_AFLC_DRIVE: f64 = 0.07843;
const PEAK_MM_STEER: f64 = 0.08579;
const PEAK_MM_DRIVE: f64 = 0.07840;

#[test]
fn canonical_identifier_fits_the_nominal_plant_near_the_origin() {
    let ident = canonical_identifier();
    let plant = nominal_parking_plant(1.0).unwrap();
    let mut sq = 0.0;
    let mut n = 0;
    for i in 0..=20 {
        for j in 0..=20 {
            let x = PlantState::new(-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64);
            let d = ident.estimate(x, &ident.initial_theta()) - plant.nonlinearity(x);
            sq += d * d;
            n += 1;
        }
    }
    let rms = (sq / n as f64).sqrt();
    assert!(rms < 0.05, "rms {rms}");
}

#[test]
fn small_step_training_never_increases_the_loss() {
    let set = canonical_training_set().with_alpha(1e-3).unwrap();
    let t = train_offline(&NeuralNet::random(3, TRAIN_SEED), &set, 2000).unwrap();
    for w in t.history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(t.final_loss() < t.history[0]);
}

#[test]
fn a_perfect_network_has_zero_loss() {
    let target = NeuralNet::random(3, 1);
    let samples = [(0.3, -0.2), (-0.7, 0.5), (1.1, 0.9)]
        .map(|(a, b)| {
            let x = PlantState::new(a, b);
            (x, mmaflc::identifier::nn_forward(&target, x))
        })
        .to_vec();
    let set = TrainingSet::new(samples, 0.01).unwrap();
    assert_eq!(loss(&target, &set), 0.0);
}

#[test]
fn high_friction_metrics_are_reproduced() {
    let ident = canonical_identifier();
    let aflc = run_episode(&canonical(ControllerKind::Aflc, 5.0), Some(&ident)).unwrap().metrics;
    let mm = run_episode(&canonical(ControllerKind::MmAflc, 5.0), Some(&ident)).unwrap().metrics;
    assert!(aflc.completed && mm.completed);
    assert!((aflc.settling_time - 3.0).abs() < 1e-9, "{}", aflc.settling_time);
    assert!((mm.settling_time - 2.7).abs() < 1e-9, "{}", mm.settling_time);
    assert!((aflc.ise - 1.3140e-3).abs() < 2e-6, "{}", aflc.ise);
    assert!((mm.ise - 9.657e-4).abs() < 2e-6, "{}", mm.ise);
}

#[test]
fn peak_identification_error_matches_the_recorded_run() {
    let ident = canonical_identifier();
    let expected = [
        (ControllerKind::Aflc, [PEAK_AFLC_STEER, PEAK_AFLC_DRIVE]),
        (ControllerKind::MmAflc, [PEAK_MM_STEER, PEAK_MM_DRIVE]),
    ];
    for (kind, peaks) in expected {
        let r = run_episode(&canonical(kind, 5.0), Some(&ident)).unwrap();
        for (log, want) in r.logs.iter().zip(peaks) {
            let worst = log.records().iter().map(|x| x.e).fold(0.0, f64::max);
            assert!((worst - want).abs() < 0.2 * want, "{kind}: max |e| {worst}, recorded {want}");
        }
    }
}

#[test]
fn baseline_completes_nominally_and_fails_under_heavy_friction() {
    let nominal = run_episode(&canonical(ControllerKind::BaselineFuzzy, 1.0), None).unwrap();
    let heavy = run_episode(&canonical(ControllerKind::BaselineFuzzy, 5.0), None).unwrap();
    assert!(nominal.metrics.completed);
    assert!(!heavy.metrics.completed);
}

#[test]
fn episodes_are_deterministic() {
    let ident = canonical_identifier();
    let cfg = canonical(ControllerKind::MmAflc, 3.0);
    let a = run_episode(&cfg, Some(&ident)).unwrap();
    let b = run_episode(&cfg, Some(&ident)).unwrap();
    assert_eq!(a.metrics, b.metrics);
    for (x, y) in a.logs.iter().zip(&b.logs) {
        assert_eq!(x.to_csv(), y.to_csv());
    }
}

#[test]
fn batch_runs_keep_input_order() {
    let ident = canonical_identifier();
    let configs: Vec<_> = [ControllerKind::BaselineFuzzy, ControllerKind::Aflc, ControllerKind::MmAflc]
        .into_iter()
        .map(|k| canonical(k, 2.0))
        .collect();
    let par = run_batch(&configs, Some(&ident));
    let seq = run_batch_sequential(&configs, Some(&ident));
    for ((p, s), c) in par.iter().zip(&seq).zip(&configs) {
        let (p, s) = (p.as_ref().unwrap(), s.as_ref().unwrap());
        assert_eq!(p.kind, c.controller_kind);
        assert_eq!(p.metrics, s.metrics);
    }
}
