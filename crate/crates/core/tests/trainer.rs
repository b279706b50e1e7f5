use std::collections::BTreeMap;
use std::ops::ControlFlow;

use diacnn_core::data::synth::{generate, SynthConfig};
use diacnn_core::data::{batch_iter, BatchOptions, ImageSet};
use diacnn_core::net::{build_diacnn, FreezePreset, Model, Param, ParamStore, Selector};
use diacnn_core::train::{
    adam_step, best_epoch, early_stop_check, plateau_reduce, sgd_step, step_halving_lr, AdamHyper, AdamState,
    EarlyStopConfig, LrSchedule, Monitor, OptimizerKind, PlateauConfig, PlateauScheduler, StopDecision, TrainConfig,
    TrainData, TrainError, TrainEvent,
};
use diacnn_core::Tensor;

fn scalar_store(v: f64, trainable: bool) -> ParamStore<f64> {
    let mut params = BTreeMap::new();
    params.insert("p".to_string(), Param { value: Tensor::from_vec(&[1], vec![v]).unwrap(), trainable });
    ParamStore { params, running: BTreeMap::new() }
}

fn grads(v: f64) -> BTreeMap<String, Tensor<f64>> {
    BTreeMap::from([("p".to_string(), Tensor::from_vec(&[1], vec![v]).unwrap())])
}

fn p(store: &ParamStore<f64>) -> f64 {
    store.params["p"].value.data()[0]
}

#[test]
fn sgd_examples() {
    let mut s = scalar_store(1.0, true);
    sgd_step(&mut s, &grads(0.5), 0.1).unwrap();
    assert_eq!(p(&s), 0.95);
    sgd_step(&mut s, &grads(0.5), 0.0).unwrap();
    assert_eq!(p(&s), 0.95);
    let mut frozen = scalar_store(1.0, false);
    sgd_step(&mut frozen, &grads(123.0), 0.1).unwrap();
    assert_eq!(p(&frozen), 1.0);
    assert_eq!(sgd_step(&mut s, &BTreeMap::new(), 0.1), Err(TrainError::MissingGradient("p".into())));
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut s = scalar_store(1.0, true);
    let mut state = AdamState::new(&s);
    adam_step(&mut s, &grads(0.5), &mut state, 1e-3, AdamHyper::default()).unwrap();
    assert!((p(&s) - (1.0 - 1e-3)).abs() < 1e-10);
    assert_eq!(state.t, 1);

    let mut z = scalar_store(1.0, true);
    let mut state = AdamState::new(&z);
    for _ in 0..3 {
        adam_step(&mut z, &grads(0.0), &mut state, 1e-3, AdamHyper::default()).unwrap();
    }
    assert_eq!(p(&z), 1.0);
    assert_eq!(state.t, 3);
}

#[test]
fn adam_trajectory_matches_recurrence_oracle() {
    // tests/oracles/adam_reference.py
    let want = [
        0.9000000001111111,
        0.8001027073028681,
        0.7003815232817219,
        0.600913530828997,
        0.5017794559421697,
        0.40306360703755845,
        0.30485378890002013,
        0.20724118892740148,
        0.11032023310155036,
        0.014188409035791327,
    ];
    let mut s = scalar_store(1.0, true);
    let mut state = AdamState::new(&s);
    for w in want {
        let g = 3.0 * (p(&s) + 2.0);
        adam_step(&mut s, &grads(g), &mut state, 0.1, AdamHyper::default()).unwrap();
        assert!((p(&s) - w).abs() < 1e-12, "{} vs {w}", p(&s));
    }
}

#[test]
fn adam_skips_frozen_and_checks_state() {
    let mut s = scalar_store(1.0, false);
    let mut state = AdamState::new(&s);
    adam_step(&mut s, &grads(9.0), &mut state, 0.1, AdamHyper::default()).unwrap();
    assert_eq!(p(&s), 1.0);
    assert_eq!(state.m["p"], [0.0]);

    let mut s = scalar_store(1.0, true);
    let mut state = AdamState::new(&s);
    state.v.insert("p".into(), vec![0.0, 0.0]);
    assert_eq!(
        adam_step(&mut s, &grads(1.0), &mut state, 0.1, AdamHyper::default()),
        Err(TrainError::StateMismatch("p".into()))
    );
    assert_eq!(state.t, 0);
}

#[test]
fn step_halving_examples() {
    for e in 0..5 {
        assert_eq!(step_halving_lr(1e-4, e, 5), 1e-4);
    }
    assert_eq!(step_halving_lr(1e-4, 5, 5), 5e-5);
    assert_eq!(step_halving_lr(1e-4, 12, 5), 2.5e-5);
}

#[test]
fn plateau_examples() {
    let cfg = PlateauConfig::default();
    let m = Monitor::ValAccuracy;
    assert_eq!(plateau_reduce(&[0.80], 1e-3, cfg, m).unwrap(), 1e-3);
    assert_eq!(plateau_reduce(&[0.80, 0.800], 1e-3, cfg, m).unwrap(), 1e-3);
    let lr = plateau_reduce(&[0.80, 0.800, 0.800], 1e-3, cfg, m).unwrap();
    assert!((lr - 3e-4).abs() < 1e-18);

    let rising: Vec<f64> = (0..20).map(|i| 0.5 + 0.01 * i as f64).collect();
    let mut sched = PlateauScheduler::new(cfg, m);
    assert!(rising.iter().all(|&v| !sched.observe(v)));
    assert_eq!(sched.multiplier(), 1.0);

    // a gain of exactly min_delta is not an improvement
    assert_eq!(plateau_reduce(&[0.800, 0.801, 0.801], 1.0, cfg, m).unwrap(), 0.3);
    assert_eq!(plateau_reduce(&[0.800, 0.8011, 0.8022], 1.0, cfg, m).unwrap(), 1.0);
    // progress is measured from the best value, not the previous epoch
    assert_eq!(plateau_reduce(&[0.800, 0.801, 0.802], 1.0, cfg, m).unwrap(), 1.0);
    // lower-is-better monitors
    assert_eq!(plateau_reduce(&[1.0, 0.9, 0.8], 1.0, cfg, Monitor::ValLoss).unwrap(), 1.0);
    assert_eq!(plateau_reduce(&[1.0, 1.1, 1.2], 1.0, cfg, Monitor::ValLoss).unwrap(), 0.3);
    assert!(plateau_reduce(&[], 1.0, cfg, m).is_err());
}

#[test]
fn plateau_restarts_count_after_reduction() {
    let mut sched = PlateauScheduler::new(PlateauConfig::default(), Monitor::ValAccuracy);
    let fired: Vec<bool> = [0.5; 7].iter().map(|&v| sched.observe(v)).collect();
    assert_eq!(fired, [false, false, true, false, true, false, true]);
    assert!((sched.multiplier() - 0.027).abs() < 1e-15);
}

#[test]
fn early_stop_examples() {
    let m = Monitor::ValAccuracy;
    assert_eq!(early_stop_check(&[0.1, 0.2, 0.3, 0.4], 2, 0.001, m), StopDecision::Continue);
    assert_eq!(early_stop_check(&[0.5, 0.5], 2, 0.001, m), StopDecision::Continue);
    assert_eq!(early_stop_check(&[0.5, 0.5, 0.5], 2, 0.001, m), StopDecision::Stop);
    let h = [0.5, 0.6, 0.6, 0.6];
    assert_eq!(early_stop_check(&h, 2, 0.001, m), early_stop_check(&h, 2, 0.001, m));
}

#[test]
fn monitor_names() {
    assert_eq!("val_accuracy".parse::<Monitor>().unwrap(), Monitor::ValAccuracy);
    assert_eq!("val_loss".parse::<Monitor>().unwrap(), Monitor::ValLoss);
    assert_eq!("f1".parse::<Monitor>(), Err(TrainError::UnknownMonitor("f1".into())));
}

#[test]
fn best_epoch_rule() {
    assert_eq!(best_epoch(&[0.6, 0.9, 0.7], Monitor::ValAccuracy), Some(1));
    assert_eq!(best_epoch(&[0.6, 0.9, 0.9], Monitor::ValAccuracy), Some(1));
    assert_eq!(best_epoch(&[0.6, 0.5, 0.7], Monitor::ValLoss), Some(1));
    assert_eq!(best_epoch(&[], Monitor::ValLoss), None);
}

#[test]
fn config_presets_and_validation() {
    let d = TrainConfig::diacnn();
    assert_eq!((d.optimizer, d.base_lr, d.epochs, d.batch_size), (OptimizerKind::Adam, 1e-3, 50, 64));
    assert_eq!((d.beta1, d.beta2), (0.9, 0.999));
    assert_eq!((d.plateau.factor, d.plateau.patience, d.plateau.min_delta), (0.3, 2, 0.001));
    let t = TrainConfig::transfer();
    assert_eq!((t.base_lr, t.epochs, t.lr_schedule), (1e-4, 30, LrSchedule::StepHalving { period: 5 }));
    let p = TrainConfig::pretrained_table();
    assert_eq!((p.base_lr, p.epochs, p.batch_size), (1e-5, 20, 64));
    assert_eq!(TrainConfig::preset("transfer"), Some(t));
    assert!(TrainConfig { base_lr: 0.0, ..d.clone() }.validate().is_err());
    assert!(TrainConfig { beta2: 1.0, ..d.clone() }.validate().is_err());
    assert!(TrainConfig { epochs: 0, ..d.clone() }.validate().is_err());
    assert!(TrainConfig { plateau: PlateauConfig { patience: 0, ..d.plateau }, ..d.clone() }.validate().is_err());
}

fn synth_set(per_class: usize, seed: u64) -> ImageSet {
    let (images, labels) = generate(&SynthConfig { per_class, seed, ..Default::default() });
    ImageSet::new(images, labels, 2).unwrap()
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig { batch_size: 16, epochs, seed: 3, ..TrainConfig::diacnn() }
}

#[test]
fn training_is_deterministic() {
    let (train, val) = (synth_set(16, 1), synth_set(4, 2));
    let data = TrainData { train: &train, val: &val, augment: Some(Default::default()) };
    let run = || {
        let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
        let out = diacnn_core::train::train_loop(&mut model, &data, &small_cfg(3), &mut |_| ControlFlow::Continue(())).unwrap();
        (out.history, model.params.checksum(), out.best.checksum())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for (x, y) in a.0.records.iter().zip(&b.0.records) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
    }
    assert_eq!(a.0.records.len(), 3);
}

#[test]
fn fully_frozen_training_changes_nothing() {
    let (train, val) = (synth_set(8, 1), synth_set(2, 2));
    let spec = build_diacnn(4, 2).unwrap();
    let mut model = Model::new(spec.clone(), 5).unwrap();
    model.params.set_trainable(&spec, &Selector::Preset(FreezePreset::All), false).unwrap();
    let before = model.params.clone();
    let data = TrainData { train: &train, val: &val, augment: None };
    diacnn_core::train::train_loop(&mut model, &data, &small_cfg(5), &mut |_| ControlFlow::Continue(())).unwrap();
    assert_eq!(model.params, before);
}

/// A whole epoch of steps at rate zero leaves every parameter bitwise intact.
#[test]
fn zero_rate_epoch_is_a_no_op_on_parameters() {
    let train = synth_set(8, 1);
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    let before = model.params.params.clone();
    let mut state = AdamState::new(&model.params);
    let opts = BatchOptions { shuffle_seed: Some(1), ..BatchOptions::eval(4) };
    for batch in batch_iter(&train, &opts).unwrap() {
        let step = model.train_step(&batch.images, &batch.labels).unwrap();
        adam_step(&mut model.params, &step.grads, &mut state, 0.0, AdamHyper::default()).unwrap();
        sgd_step(&mut model.params, &step.grads, 0.0).unwrap();
    }
    assert_eq!(model.params.params, before);
}

#[test]
fn best_snapshot_and_recorded_rates() {
    let (train, val) = (synth_set(12, 1), synth_set(4, 2));
    let mut cfg = small_cfg(6);
    cfg.lr_schedule = LrSchedule::StepHalving { period: 2 };
    cfg.plateau = PlateauConfig { patience: 1, ..PlateauConfig::default() };
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    let mut snapshots = Vec::new();
    let mut flags = Vec::new();
    let data = TrainData { train: &train, val: &val, augment: None };
    let out = diacnn_core::train::train_loop(&mut model, &data, &cfg, &mut |e| {
        if let TrainEvent::Epoch { model, improved, .. } = e {
            snapshots.push(model.params.checksum());
            flags.push(improved);
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    let h = &out.history;
    let accs = h.metric(Monitor::ValAccuracy);
    let best = best_epoch(&accs, Monitor::ValAccuracy);
    assert_eq!(h.best_epoch, best);
    assert_eq!(out.best.checksum(), snapshots[best.unwrap()]);
    assert_eq!(flags.iter().filter(|f| **f).count(), {
        let mut n = 0;
        let mut top = f64::NEG_INFINITY;
        for a in &accs {
            if *a > top {
                top = *a;
                n += 1;
            }
        }
        n
    });

    let mut sched = PlateauScheduler::new(cfg.plateau, cfg.monitor);
    for r in &h.records {
        let want = step_halving_lr(cfg.base_lr, r.epoch, 2) * sched.multiplier();
        assert_eq!(r.lr, want, "epoch {}", r.epoch);
        sched.observe(r.val_acc);
    }
}

#[test]
fn early_stopping_shortens_history() {
    let (train, val) = (synth_set(8, 1), synth_set(2, 2));
    let mut cfg = small_cfg(6);
    cfg.early_stop = EarlyStopConfig { enabled: true, patience: 1, min_delta: 1.0 };
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    let data = TrainData { train: &train, val: &val, augment: None };
    let mut stops = 0;
    let out = diacnn_core::train::train_loop(&mut model, &data, &cfg, &mut |e| {
        if let TrainEvent::EarlyStop { .. } = e {
            stops += 1;
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    assert_eq!(out.history.records.len(), 2);
    assert!(out.history.stopped_early);
    assert_eq!(stops, 1);
}

#[test]
fn divergence_reports_epoch_and_batch() {
    let (train, val) = (synth_set(8, 1), synth_set(2, 2));
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    model.params.params.get_mut("fc.bias").unwrap().value.data_mut()[0] = f32::NAN;
    let data = TrainData { train: &train, val: &val, augment: None };
    let err = diacnn_core::train::train_loop(&mut model, &data, &small_cfg(2), &mut |_| ControlFlow::Continue(())).unwrap_err();
    assert_eq!(err, TrainError::Diverged { epoch: 0, batch: 0 });
}

#[test]
fn empty_splits_are_rejected() {
    let train = synth_set(4, 1);
    let empty = ImageSet::new(vec![], vec![], 2).unwrap();
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    let data = TrainData { train: &train, val: &empty, augment: None };
    assert!(matches!(
        diacnn_core::train::train_loop(&mut model, &data, &small_cfg(1), &mut |_| ControlFlow::Continue(())),
        Err(TrainError::Config(_))
    ));
}

/// Twenty full-batch SGD steps at 1e-3 on separable data lower the loss every time.
#[test]
fn full_batch_sgd_descends() {
    let set = synth_set(8, 4);
    let batch = batch_iter(&set, &BatchOptions::eval(16)).unwrap().next().unwrap();
    let mut model = Model::new(build_diacnn(16, 2).unwrap(), 1).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..20 {
        let step = model.train_step(&batch.images, &batch.labels).unwrap();
        assert!(step.loss < last, "step {i}: {} !< {last}", step.loss);
        last = step.loss;
        sgd_step(&mut model.params, &step.grads, 1e-3).unwrap();
    }
}

/// Fine-tuning only the head of a briefly trained network: with the
/// backbone frozen the features are fixed, so full-batch epochs must lower
/// the training loss every time.
#[test]
fn head_only_training_lowers_loss_each_epoch() {
    let (train, val) = (synth_set(32, 1), synth_set(4, 2));
    let spec = build_diacnn(16, 2).unwrap();
    let mut model = Model::new(spec.clone(), 2).unwrap();
    let data = TrainData { train: &train, val: &val, augment: None };
    diacnn_core::train::train_loop(&mut model, &data, &small_cfg(2), &mut |_| ControlFlow::Continue(())).unwrap();

    model.params.train_only(&spec, &Selector::Preset(FreezePreset::HeadOnly)).unwrap();
    let frozen_before = model.params.params["s1b1.a.conv.weight"].clone();
    let cfg = TrainConfig {
        batch_size: train.len(),
        plateau: PlateauConfig { enabled: false, ..Default::default() },
        ..small_cfg(10)
    };
    let out = diacnn_core::train::train_loop(&mut model, &data, &cfg, &mut |_| ControlFlow::Continue(())).unwrap();
    let losses = out.history.metric(Monitor::TrainLoss);
    assert_eq!(losses.len(), 10);
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
    assert_eq!(model.params.params["s1b1.a.conv.weight"], frozen_before);
}

#[test]
fn observer_can_halt_training() {
    let (train, val) = (synth_set(8, 1), synth_set(2, 2));
    let mut model = Model::new(build_diacnn(4, 2).unwrap(), 5).unwrap();
    let data = TrainData { train: &train, val: &val, augment: None };
    let out = diacnn_core::train::train_loop(&mut model, &data, &small_cfg(6), &mut |e| match e {
        TrainEvent::Epoch { record, .. } if record.epoch == 2 => ControlFlow::Break(()),
        _ => ControlFlow::Continue(()),
    })
    .unwrap();
    assert_eq!(out.history.records.len(), 3);
    assert!(out.history.halted && !out.history.stopped_early);
}
