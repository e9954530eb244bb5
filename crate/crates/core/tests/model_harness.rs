use neurostream::dataset::{gen_synthetic, Dataset, Emotion, Recording, Split, SynthSpec};
use neurostream::harness::{self, compare_configs, ExperimentConfig};
use neurostream::hemisplit::split;
use neurostream::model::{forward_bi, grad_check_objective, ModelConfig, ModelParams, Variant};
use neurostream::preprocess::{preprocess, PreprocConfig};
use neurostream::rng::seeded;
use neurostream::temporal::temporal_scan;
use neurostream::{Error, Mode, SpectralConfig};

fn small_model() -> ModelConfig {
    ModelConfig { conv_filters: 4, conv_kernel: 3, pool: 2, lstm_units: 6, dense_units: 8, ..Default::default() }
}

fn small_cfg(variant: Variant, seed: u64) -> ExperimentConfig {
    ExperimentConfig { model: small_model(), variant, epochs: 12, batch_size: 4, seed, ..Default::default() }
}

fn short_synth(n_subjects: usize, seed: u64, split: Split) -> Dataset {
    let spec = SynthSpec { duration: 4.0, noise_sigma: 0.3, split, ..SynthSpec::separable(n_subjects, 1) };
    gen_synthetic(&spec, seed).unwrap()
}

#[test]
fn mirrored_parameters_on_mirrored_input_reproduce_output() {
    let ds = short_synth(1, 3, Split::Train);
    let params = ModelParams::init(Variant::Bi, &small_model(), 11 * 42, 5).unwrap();
    let mirrored = params.mirrored().unwrap();
    for rec in &ds.recordings {
        let cfg = SpectralConfig::default();
        let a = split(&preprocess(rec, &PreprocConfig::default()).unwrap(), &cfg).unwrap();
        let b = split(&preprocess(&rec.mirrored(), &PreprocConfig::default()).unwrap(), &cfg).unwrap();
        let pa = forward_bi(&a, &params, Mode::Eval, &mut seeded(0)).unwrap();
        let pb = forward_bi(&b, &mirrored, Mode::Eval, &mut seeded(0)).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() <= 1e-12, "{pa:?} vs {pb:?}");
        }
    }
}

#[test]
fn full_objective_gradients_match_finite_differences() {
    let tiny = ModelConfig { conv_filters: 2, conv_kernel: 2, pool: 2, lstm_units: 2, dense_units: 3, ..Default::default() };
    for variant in [Variant::Bi, Variant::Mono] {
        for seed in 0..5 {
            let r = grad_check_objective(variant, &tiny, 5, 2, 2, seed, 1e-6).unwrap();
            assert!(r.checked > 0);
            // Central differences of an O(1) loss at h = 1e-6 resolve
            // gradients to about 1e-10 absolute.
            assert!(r.max_abs_error <= 1e-8, "{variant} seed {seed}: {r:?}");
        }
    }
}

#[test]
fn training_is_deterministic_and_keeps_best_epoch() {
    let train = short_synth(2, 1, Split::Train);
    let val = short_synth(1, 2, Split::Validation);
    let cfg = small_cfg(Variant::Bi, 4);
    let (p1, r1) = harness::train(&train, &val, &cfg).unwrap();
    let (p2, r2) = harness::train(&train, &val, &cfg).unwrap();
    assert_eq!(r1.loss_curve, r2.loss_curve);
    assert_eq!(p1.tensors, p2.tensors);

    let best = r1.loss_curve.iter().min_by(|a, b| a.val_loss.total_cmp(&b.val_loss)).unwrap();
    assert_eq!(r1.accuracy, best.val_acc);
    assert_eq!(r1.confusion.iter().flatten().sum::<usize>(), val.len());

    let (_, r3) = harness::train(&train, &val, &ExperimentConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(r1.loss_curve, r3.loss_curve);
}

#[test]
fn early_stopping_cuts_the_curve() {
    let train = short_synth(1, 1, Split::Train);
    let val = short_synth(1, 2, Split::Validation);
    let cfg = ExperimentConfig { epochs: 50, early_stop_patience: 2, learning_rate: 0.5, ..small_cfg(Variant::Mono, 1) };
    let (_, r) = harness::train(&train, &val, &cfg).unwrap();
    assert!(r.loss_curve.len() < 50, "{}", r.loss_curve.len());
}

#[test]
fn missing_class_warns_instead_of_failing() {
    let mut train = short_synth(1, 1, Split::Train);
    train.recordings.retain(|r| r.label() != Some(Emotion::Fear));
    let val = short_synth(1, 2, Split::Validation);
    let (_, r) = harness::train(&train, &val, &ExperimentConfig { epochs: 2, ..small_cfg(Variant::Bi, 0) }).unwrap();
    assert_eq!(r.warnings.len(), 1);
    assert!(r.warnings[0].contains("fear"));
}

#[test]
fn predictions_keep_order_and_form_distributions() {
    let train = short_synth(1, 1, Split::Train);
    let val = short_synth(1, 2, Split::Validation);
    let cfg = ExperimentConfig { epochs: 2, ..small_cfg(Variant::Mono, 0) };
    let (params, _) = harness::train(&train, &val, &cfg).unwrap();

    let unlabeled = Dataset::new(val.recordings.iter().rev().map(|r| r.clone().with_label(None)).collect(), Split::Test).unwrap();
    let preds = harness::predict(&unlabeled, &params, &cfg).unwrap();
    assert_eq!(preds.len(), unlabeled.len());
    for (p, r) in preds.iter().zip(&unlabeled.recordings) {
        assert_eq!(p.trial_id, r.trial_id());
        assert_eq!(p.probabilities.len(), 6);
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(matches!(harness::evaluate(&unlabeled, &params, &cfg), Err(Error::Label(_))));

    let bi = ModelParams::init(Variant::Bi, &small_model(), 11 * 42, 0).unwrap();
    assert!(matches!(harness::predict(&unlabeled, &bi, &ExperimentConfig { variant: Variant::Mono, ..cfg.clone() }), Ok(_)));
    let wrong_width = ModelParams::init(Variant::Mono, &small_model(), 7, 0).unwrap();
    assert!(matches!(harness::predict(&unlabeled, &wrong_width, &cfg), Err(Error::Compat(_))));
}

#[test]
fn comparing_a_config_with_itself_gives_zero_difference() {
    let train = short_synth(1, 1, Split::Train);
    let val = short_synth(1, 2, Split::Validation);
    let cfg = ExperimentConfig { epochs: 2, ..small_cfg(Variant::Bi, 0) };
    let t = compare_configs(&train, &val, &cfg, &cfg, 2).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.difference, 0.0);
    assert_eq!(t.rows[0].accuracies, t.rows[1].accuracies);
}

#[test]
fn temporal_scan_reports_every_interval_even_when_skipped() {
    // 4 s recordings give ~150-sample intervals: too short for any framing.
    let train = short_synth(1, 1, Split::Train);
    let val = short_synth(1, 2, Split::Validation);
    let r = temporal_scan(&train, &val, &small_cfg(Variant::Bi, 0), &[Variant::Mono, Variant::Bi]).unwrap();
    assert_eq!(r.for_variant(Variant::Mono).count(), 8);
    assert_eq!(r.for_variant(Variant::Bi).count(), 8);
    assert!(r.entries.iter().all(|e| e.status.starts_with("skipped") && e.val_acc.is_none()));
}

#[test]
fn synthetic_csv_round_trip_is_exact() {
    let ds = short_synth(1, 1, Split::Train);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    neurostream::dataset::save_csv(&ds, &path).unwrap();
    let back = neurostream::dataset::load_csv(&path, &dir.path().join("raw.json")).unwrap();
    assert_eq!(back, ds);
    let r: &Recording = &back.recordings[0];
    assert_eq!(r.n_samples(), 1200);
}
