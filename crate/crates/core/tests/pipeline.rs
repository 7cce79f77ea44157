use brau_core::model::{BrauNet, ModelConfig};
use brau_core::nn::ParamStore;
use brau_core::pipeline::augment::{flip_horizontal, rotate};
use brau_core::pipeline::{
    argmax_masks, augment, build_index, cross_entropy, one_hot, predict, read_metrics_log, seg_loss, synthetic_set,
    train, write_dataset, Adam, AdamConfig, AugmentConfig, TrainConfig,
};
use brau_core::CoreError;
use brau_metrics::SegMask;
use brau_tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn touch_dataset(root: &std::path::Path, names: &[&str], masks: &[&str]) {
    std::fs::create_dir_all(root.join("images")).unwrap();
    std::fs::create_dir_all(root.join("masks")).unwrap();
    for n in names {
        std::fs::write(root.join("images").join(format!("{n}.png")), b"").unwrap();
    }
    for n in masks {
        std::fs::write(root.join("masks").join(format!("{n}.png")), b"").unwrap();
    }
}

#[test]
fn index_split_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    touch_dataset(dir.path(), &refs, &refs);
    let a = build_index(dir.path(), 0.9, 3).unwrap();
    assert_eq!((a.train.len(), a.val.len()), (9, 1));
    assert_eq!(a, build_index(dir.path(), 0.9, 3).unwrap());
    let other = build_index(dir.path(), 0.9, 4).unwrap();
    let mut all: Vec<_> = other.train.iter().chain(&other.val).map(|p| p.name.clone()).collect();
    all.sort();
    assert_eq!(all, names.to_vec().tap_sort());
}

trait TapSort {
    fn tap_sort(self) -> Self;
}

impl TapSort for Vec<String> {
    fn tap_sort(mut self) -> Self {
        self.sort();
        self
    }
}

#[test]
fn index_split_sizes_at_scale() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..4000).map(|i| format!("{i:05}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    touch_dataset(dir.path(), &refs, &refs);
    let idx = build_index(dir.path(), 0.9, 0).unwrap();
    assert_eq!((idx.train.len(), idx.val.len()), (3600, 400));
}

#[test]
fn orphan_files_are_named() {
    let dir = tempfile::tempdir().unwrap();
    touch_dataset(dir.path(), &["a", "b", "c"], &["a", "c", "d"]);
    let err = build_index(dir.path(), 0.5, 0).unwrap_err().to_string();
    assert!(err.contains("b (no mask)") && err.contains("d (no image)"), "{err}");
}

#[test]
fn augmentation_identity_and_flip_involution() {
    let s = &synthetic_set(1, 32, 1)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (img, mask) = augment(&s.image, &s.mask, &AugmentConfig::disabled(), &mut rng);
    assert_eq!(img, s.image);
    assert_eq!(mask, s.mask);
    let (i1, m1) = flip_horizontal(&s.image, &s.mask);
    assert_ne!(m1, s.mask);
    let (i2, m2) = flip_horizontal(&i1, &m1);
    assert_eq!((i2, m2), (s.image.clone(), s.mask.clone()));
    let (ri, rm) = rotate(&s.image, &s.mask, 0.0);
    assert_eq!((ri, rm), (s.image.clone(), s.mask.clone()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn augmentation_preserves_labels_and_shapes(seed in 0u64..500, stream in 0u64..500) {
        let s = &synthetic_set(1, 32, seed)[0];
        let cfg = AugmentConfig { flip_prob: 0.5, rotation_degrees: 15.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let (img, mask) = augment(&s.image, &s.mask, &cfg, &mut rng);
        prop_assert_eq!(img.shape(), s.image.shape());
        prop_assert_eq!((mask.width(), mask.height()), (32, 32));
        prop_assert!(mask.labels().iter().all(|&l| l <= 2));
        let mut again = ChaCha8Rng::seed_from_u64(stream);
        let (img2, mask2) = augment(&s.image, &s.mask, &cfg, &mut again);
        prop_assert_eq!(img, img2);
        prop_assert_eq!(mask, mask2);
    }

    #[test]
    fn zero_gradient_adam_step_is_identity(seed in 0u64..500, steps in 0usize..4) {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("p", brau_core::verify::random_tensor(&[5], seed), true).unwrap();
        let mut adam = Adam::new(&store, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        for k in 0..steps {
            let g = brau_core::verify::random_tensor(&[5], seed + k as u64 + 1);
            adam.step(&mut store, &[(id, g)]).unwrap();
        }
        let before = store.get(id).clone();
        adam.step(&mut store, &[(id, Tensor::zeros(&[5]))]).unwrap();
        prop_assert_eq!(store.get(id), &before);
    }

    #[test]
    fn prediction_is_shift_invariant(seed in 0u64..500, shift in -50.0f64..50.0) {
        let logits = brau_core::verify::random_tensor(&[1, 3, 6, 6], seed);
        let shifted = logits.map(|v| v + shift);
        prop_assert_eq!(argmax_masks(&logits).unwrap(), argmax_masks(&shifted).unwrap());
    }
}

#[test]
fn loss_saturates_and_uniform_cross_entropy_is_ln3() {
    let masks = synthetic_set(2, 16, 3).into_iter().map(|s| s.mask).collect::<Vec<_>>();
    let onehot = one_hot::<f64>(&masks, 3).unwrap();
    let mut tape = Tape::new();
    let confident = tape.constant(onehot.map(|v| 20.0 * v));
    let l = seg_loss(&mut tape, confident, &masks, 0.4, 0.6).unwrap();
    assert!(tape.value(l).item().unwrap() < 1e-6);
    let flat = tape.constant(Tensor::zeros(&[2, 3, 16, 16]));
    let ce = cross_entropy(&mut tape, flat, &onehot).unwrap();
    assert!((tape.value(ce).item().unwrap() - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn loss_rejects_bad_labels_and_shapes() {
    let mask = SegMask::new(2, 2, vec![0, 1, 2, 1]).unwrap();
    let mut tape = Tape::<f64>::new();
    let two = tape.constant(Tensor::zeros(&[1, 2, 2, 2]));
    assert!(matches!(seg_loss(&mut tape, two, std::slice::from_ref(&mask), 0.4, 0.6), Err(CoreError::Data(_))));
    let wrong = tape.constant(Tensor::zeros(&[1, 3, 3, 3]));
    assert!(seg_loss(&mut tape, wrong, &[mask], 0.4, 0.6).is_err());
}

#[test]
fn adam_one_step_and_quadratic() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", Tensor::full(&[1], 1.0), true).unwrap();
    let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    let mut adam = Adam::new(&store, cfg);
    adam.step(&mut store, &[(id, Tensor::ones(&[1]))]).unwrap();
    assert!((store.get(id).data()[0] - 0.9).abs() < 1e-6);
    assert_eq!(adam.t, 1);

    // ½p² from p = 1: the gradient is p itself.
    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", Tensor::full(&[1], 1.0), true).unwrap();
    let mut adam = Adam::new(&store, cfg);
    let mut losses = vec![0.5];
    for _ in 0..2 {
        let g = store.get(id).clone();
        adam.step(&mut store, &[(id, g)]).unwrap();
        losses.push(0.5 * store.get(id).data()[0].powi(2));
    }
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");

    let mut store = ParamStore::<f64>::new();
    let id = store.add("p", Tensor::zeros(&[2]), true).unwrap();
    let mut adam = Adam::new(&store, AdamConfig::default());
    adam.step(&mut store, &[(id, Tensor::zeros(&[2]))]).unwrap();
    assert!(store.get(id).data().iter().all(|&v| v == 0.0));
    assert!(adam.step(&mut store, &[]).is_err());
    assert!(adam.step(&mut store, &[(id, Tensor::zeros(&[3]))]).is_err());
}

fn tiny_config(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
        batch_size: 2,
        epochs,
        seed: 5,
        flip_prob: 0.5,
        rotation_degrees: 15.0,
        w_ce: 0.4,
        w_dice: 0.6,
        eval_every: 1,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = synthetic_set(3, 64, 10);
    let mut net = BrauNet::<f32>::new(ModelConfig::toy(8), 1).unwrap();
    let before = net.store.clone();
    train(&mut net, &data, &[], &tiny_config(1, 0.0), None).unwrap();
    for id in before.trainable_ids() {
        assert_eq!(before.get(id), net.store.get(id), "{}", before.name(id));
    }
}

#[test]
fn training_is_deterministic_and_logs_each_epoch() {
    let data = synthetic_set(4, 64, 20);
    let (tr, va) = data.split_at(3);
    let dir = tempfile::tempdir().unwrap();
    let mut a = BrauNet::<f32>::new(ModelConfig::toy(8), 2).unwrap();
    let mut b = a.clone();
    let ra = train(&mut a, tr, va, &tiny_config(2, 1e-3), Some(dir.path())).unwrap();
    let rb = train(&mut b, tr, va, &tiny_config(2, 1e-3), None).unwrap();
    assert_eq!(ra.step_losses, rb.step_losses);
    assert_eq!(ra.last_checkpoint, rb.last_checkpoint);
    assert_eq!(ra.step_losses.len(), 4);
    let log = read_metrics_log(dir.path().join("metrics.jsonl")).unwrap();
    assert_eq!(log, ra.records);
    assert!(log.iter().all(|r| r.validation.is_some()));
    assert!(dir.path().join("best.ckpt").exists() && dir.path().join("last.ckpt").exists());
    assert_eq!(std::fs::read(dir.path().join("last.ckpt")).unwrap(), ra.last_checkpoint);
}

#[test]
fn non_finite_loss_aborts_with_step() {
    let data = synthetic_set(2, 64, 30);
    let mut net = BrauNet::<f32>::new(ModelConfig::toy(8), 3).unwrap();
    let id = net.store.id("head.weight").unwrap();
    let shape = net.store.get(id).shape().to_vec();
    net.store.set(id, Tensor::full(&shape, f32::INFINITY)).unwrap();
    let err = train(&mut net, &data, &[], &tiny_config(1, 1e-3), None).unwrap_err();
    assert!(matches!(err, CoreError::NonFiniteLoss { step: 0, .. }), "{err}");
}

#[test]
fn predictions_are_valid_masks_and_files_round_trip() {
    let data = synthetic_set(2, 64, 40);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &data).unwrap();
    let idx = build_index(dir.path(), 1.0, 0).unwrap();
    let loaded = brau_core::pipeline::load_samples(&idx.train, 1).unwrap();
    for s in &loaded {
        let orig = data.iter().find(|d| d.name == s.name).unwrap();
        assert_eq!(s.mask, orig.mask);
        assert!(s.image.max_abs_diff(&orig.image).unwrap() < 1.0 / 255.0);
    }
    let net = BrauNet::<f32>::new(ModelConfig::toy(8), 4).unwrap();
    let m = predict(&net, &loaded[0].image).unwrap();
    assert_eq!((m.width(), m.height()), (64, 64));
    assert!(predict(&net, &Tensor::zeros(&[1, 32, 32])).is_err());
    let background = Tensor::<f32>::from_fn(&[1, 3, 4, 4], |i| if i < 16 { 1.0 } else { 0.0 });
    assert!(argmax_masks(&background).unwrap()[0].labels().iter().all(|&l| l == 0));
    let tie = Tensor::<f32>::zeros(&[1, 3, 2, 2]);
    assert!(argmax_masks(&tie).unwrap()[0].labels().iter().all(|&l| l == 0));
}
