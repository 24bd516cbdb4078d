//! Shape, sharing and perturbation checks on randomly initialised networks.

use fontgan::dataset::{PatchSequence, PATCH};
use fontgan::models::{
    split_time_major, time_major, Checkpoint, Decoder, Mode, ModelConfig, ModelError, ModelKind, Models,
};
use fontgan::tensor::{finite_diff_check_param, seeded_rng, Adam, AdamConfig, Tape, Tensor, TensorError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_patches(n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new([n, 1, PATCH, PATCH], random_values(n * PATCH * PATCH, rng)).unwrap()
}

fn random_sequence(count: usize, rng: &mut ChaCha8Rng) -> PatchSequence {
    PatchSequence::from_values(random_values(count * PATCH * PATCH, rng), count * PATCH - 5).unwrap()
}

fn tiny(kind: ModelKind, seed: u64) -> Models {
    Models::init(ModelConfig::tiny(3), kind, seed).unwrap()
}

fn patch_rows(t: &Tensor, row: usize) -> &[f64] {
    let p = PATCH * PATCH;
    &t.values()[row * p..(row + 1) * p]
}

#[test]
fn standard_shapes() {
    let models = Models::init(ModelConfig::standard(4), ModelKind::Recurrent, 1).unwrap();
    let g = &models.generator;
    assert_eq!(g.encoder.convs[0].kernels.shape(), vec![32, 1, 5, 5]);
    assert_eq!(g.encoder.latent_dim(), 256);
    assert_eq!(models.critic.trunk.feature_dim(), 1024);
    assert_eq!(g.embedding.table.shape(), vec![4, 32]);

    let mut rng = seeded_rng(2);
    let tape = Tape::new();
    let z = g
        .encoder
        .forward(&tape, tape.constant(&random_patches(3, &mut rng)), Mode::Train)
        .unwrap();
    assert_eq!(z.shape(), vec![3, 256]);
    let y = g.decoder.forward(&tape, z, Mode::Train).unwrap();
    assert_eq!(y.shape(), vec![3, 1, 32, 32]);
    assert!(y.value().values().iter().all(|v| v.abs() <= 1.0));

    let feats = models
        .critic
        .features(&tape, tape.constant(&random_patches(3, &mut rng)))
        .unwrap();
    let d = models.critic.discriminate(&tape, feats, &[0, 1, 3]).unwrap();
    assert_eq!(d.shape(), vec![3, 1]);
    assert!(d.value().values().iter().all(|&p| p > 0.0 && p < 1.0));
    assert_eq!(models.critic.classify(&tape, feats).unwrap().shape(), vec![3, 4]);
}

#[test]
fn wrong_patch_size_is_a_dimension_error() {
    let models = tiny(ModelKind::Recurrent, 0);
    let tape = Tape::new();
    let x = tape.constant(&Tensor::zeros([2, 1, 16, 16]));
    assert!(matches!(
        models.generator.encoder.forward(&tape, x, Mode::Infer),
        Err(TensorError::BadRank { .. })
    ));
    assert!(models.critic.features(&tape, x).is_err());
    let bad = tape.constant(&Tensor::zeros([2, 5]));
    assert!(models.generator.decoder.forward(&tape, bad, Mode::Infer).is_err());
}

#[test]
fn fewer_than_two_fonts_rejected() {
    assert!(Models::init(ModelConfig::tiny(1), ModelKind::Recurrent, 0).is_err());
}

#[test]
fn same_seed_gives_identical_parameters() {
    let a = tiny(ModelKind::Recurrent, 9).to_checkpoint().to_bytes();
    let b = tiny(ModelKind::Recurrent, 9).to_checkpoint().to_bytes();
    let c = tiny(ModelKind::Recurrent, 10).to_checkpoint().to_bytes();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn infer_mode_is_deterministic() {
    let mut rng = seeded_rng(3);
    let seq = random_sequence(3, &mut rng);
    let a = tiny(ModelKind::Recurrent, 4).translate(&seq, 1, Mode::Infer).unwrap();
    let b = tiny(ModelKind::Recurrent, 4).translate(&seq, 1, Mode::Infer).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn encoder_is_not_constant_and_gradients_flow() {
    let models = Models::init(ModelConfig::standard(3), ModelKind::Baseline, 5).unwrap();
    let enc = &models.generator.encoder;
    let mut rng = seeded_rng(6);
    let tape = Tape::new();
    let a = enc
        .forward(&tape, tape.constant(&random_patches(4, &mut rng)), Mode::Train)
        .unwrap();
    let b = enc
        .forward(&tape, tape.constant(&random_patches(4, &mut rng)), Mode::Train)
        .unwrap();
    assert_ne!(a.value().values(), b.value().values());
    tape.backward(a.sum()).unwrap();
    let mut params = Vec::new();
    enc.collect("enc", &mut params);
    for (name, p) in params {
        let t = p.borrow();
        let g = t.grad().unwrap_or_else(|| panic!("{name} has no gradient"));
        assert!(g.iter().all(|v| v.is_finite()), "{name}");
        if !name.contains("beta") {
            continue;
        }
        assert!(g.iter().any(|&v| v != 0.0), "{name} gradient is all zero");
    }
}

#[test]
fn translation_preserves_count_and_width() {
    let mut rng = seeded_rng(7);
    for kind in [ModelKind::Recurrent, ModelKind::Baseline] {
        let models = tiny(kind, 8);
        for count in 1..=4 {
            let seq = random_sequence(count, &mut rng);
            let out = models.translate(&seq, 2, Mode::Infer).unwrap();
            assert_eq!(out.count(), count);
            assert_eq!(out.original_width(), seq.original_width());
            assert_eq!(out.assemble().unwrap().width(), seq.assemble().unwrap().width());
            assert!(out.values().iter().all(|v| v.abs() <= 1.0));
        }
    }
}

#[test]
fn conditioning_is_live() {
    let mut rng = seeded_rng(11);
    let seq = random_sequence(2, &mut rng);
    for kind in [ModelKind::Recurrent, ModelKind::Baseline] {
        let models = tiny(kind, 12);
        let a = models.translate(&seq, 0, Mode::Infer).unwrap();
        let b = models.translate(&seq, 1, Mode::Infer).unwrap();
        assert_ne!(a.values(), b.values(), "{kind}");
    }
}

/// Replace patch `i` of a sequence with fresh noise.
fn perturb(seq: &PatchSequence, i: usize, rng: &mut ChaCha8Rng) -> PatchSequence {
    let p = PATCH * PATCH;
    let mut values = seq.values().to_vec();
    values[i * p..(i + 1) * p].copy_from_slice(&random_values(p, rng));
    PatchSequence::from_values(values, seq.original_width()).unwrap()
}

#[test]
fn recurrent_output_depends_on_other_positions() {
    let mut rng = seeded_rng(13);
    let models = tiny(ModelKind::Recurrent, 14);
    let seq = random_sequence(3, &mut rng);
    let base = models.translate(&seq, 1, Mode::Infer).unwrap();
    // Forward context: perturbing the first patch moves the last output.
    let late = models.translate(&perturb(&seq, 0, &mut rng), 1, Mode::Infer).unwrap();
    assert_ne!(base.patch(2), late.patch(2));
    // Backward context: perturbing the last patch moves the first output.
    let early = models.translate(&perturb(&seq, 2, &mut rng), 1, Mode::Infer).unwrap();
    assert_ne!(base.patch(0), early.patch(0));
}

#[test]
fn baseline_is_patchwise_independent() {
    let mut rng = seeded_rng(15);
    let models = tiny(ModelKind::Baseline, 16);
    let seq = random_sequence(3, &mut rng);
    let base = models.translate(&seq, 1, Mode::Infer).unwrap();
    let moved = models.translate(&perturb(&seq, 0, &mut rng), 1, Mode::Infer).unwrap();
    assert_ne!(base.patch(0), moved.patch(0));
    assert_eq!(base.patch(1), moved.patch(1));
    assert_eq!(base.patch(2), moved.patch(2));

    let p = PATCH * PATCH;
    let mut twice = seq.patch(0).to_vec();
    twice.extend_from_slice(seq.patch(0));
    let out = models
        .translate(&PatchSequence::from_values(twice, 2 * PATCH).unwrap(), 1, Mode::Infer)
        .unwrap();
    assert_eq!(&out.values()[..p], &out.values()[p..]);
}

#[test]
fn swapping_latents_mixes_context() {
    let models = tiny(ModelKind::Recurrent, 17);
    let fontgan::models::Core::Recurrent(core) = &models.generator.core else {
        panic!("recurrent core expected");
    };
    let mut rng = seeded_rng(18);
    let c = models.generator.encoder.latent_dim();
    let z = random_values(3 * c, &mut rng);
    let mut swapped = z.clone();
    swapped[..c].copy_from_slice(&z[2 * c..]);
    swapped[2 * c..].copy_from_slice(&z[..c]);

    let run = |values: Vec<f64>| {
        let tape = Tape::new();
        let e = models.generator.embedding.forward(&tape, &[1]).unwrap();
        let latents = tape.constant(&Tensor::new([3, c], values).unwrap());
        core.forward(&tape, latents, e, 3).unwrap().value()
    };
    let a = run(z);
    let b = run(swapped);
    assert_eq!(b.shape(), &[3, c]);
    // A positionwise map would only permute the rows.
    assert_ne!(&a.values()[2 * c..], &b.values()[..c]);
    assert_ne!(&a.values()[..c], &b.values()[2 * c..]);
}

#[test]
fn single_patch_and_empty_sequences() {
    let models = tiny(ModelKind::Recurrent, 19);
    let mut rng = seeded_rng(20);
    let out = models.translate(&random_sequence(1, &mut rng), 0, Mode::Infer).unwrap();
    assert_eq!(out.count(), 1);
    assert!(out.values().iter().all(|v| v.is_finite()));

    let fontgan::models::Core::Recurrent(core) = &models.generator.core else {
        unreachable!()
    };
    let tape = Tape::new();
    let e = models.generator.embedding.forward(&tape, &[0]).unwrap();
    let empty = tape.zeros(&[0, 8]);
    assert!(matches!(
        core.forward(&tape, empty, e, 0),
        Err(TensorError::Contract(_))
    ));
}

#[test]
fn discriminator_starts_unsaturated() {
    let models = Models::init(ModelConfig::standard(3), ModelKind::Recurrent, 21).unwrap();
    let mut rng = seeded_rng(22);
    let n = 128;
    let tape = Tape::new();
    let feats = models
        .critic
        .features(&tape, tape.constant(&random_patches(n, &mut rng)))
        .unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let mean = models.critic.discriminate(&tape, feats, &labels).unwrap().mean().item();
    assert!(mean > 0.2 && mean < 0.8, "mean D output {mean}");
}

#[test]
fn classifier_softmax_is_normalised() {
    let models = tiny(ModelKind::Recurrent, 23);
    let mut rng = seeded_rng(24);
    let tape = Tape::new();
    let feats = models
        .critic
        .features(&tape, tape.constant(&random_patches(5, &mut rng)))
        .unwrap();
    let logits = models.critic.classify(&tape, feats).unwrap().value();
    for row in logits.values().chunks(3) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        let sum: f64 = exp.iter().map(|v| v / total).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn trunk_is_shared_between_heads() {
    let models = tiny(ModelKind::Recurrent, 25);
    let critic = &models.critic;
    let d = critic.disc_params();
    let c = critic.cls_params();
    let trunk = critic.trunk_params();
    for (name, p) in &trunk {
        assert!(d.iter().any(|(n, q)| n == name && q.ptr_eq(p)));
        assert!(c.iter().any(|(n, q)| n == name && q.ptr_eq(p)));
    }
    let shared = d.iter().filter(|(_, p)| c.iter().any(|(_, q)| q.ptr_eq(p))).count();
    assert_eq!(shared, trunk.len());
    // Each head is the two dense layers (plus the conditioning table on D).
    assert_eq!(critic.cls_head_params().len(), 4);
    assert_eq!(
        critic
            .disc_head_params()
            .iter()
            .filter(|(n, _)| n.contains(".fc"))
            .count(),
        4
    );

    let r = models.param_report();
    let all: usize = critic.params().iter().map(|(_, p)| p.len()).sum();
    assert_eq!(r.trunk + r.disc_head + r.cls_head, all);
}

#[test]
fn discriminator_step_moves_classifier_logits() {
    let models = tiny(ModelKind::Recurrent, 26);
    let critic = &models.critic;
    let mut rng = seeded_rng(27);
    let probe = random_patches(4, &mut rng);
    let logits = || {
        let tape = Tape::new();
        let f = critic.features(&tape, tape.constant(&probe)).unwrap();
        critic.classify(&tape, f).unwrap().value()
    };
    let before = logits();

    let params = critic.disc_params();
    let mut opt = Adam::new(AdamConfig::default(), &params);
    let tape = Tape::new();
    let f = critic
        .features(&tape, tape.constant(&random_patches(4, &mut rng)))
        .unwrap();
    let loss = critic.discriminate(&tape, f, &[0, 1, 2, 0]).unwrap().bce(1.0);
    tape.backward(loss).unwrap();
    opt.step(&params).unwrap();

    assert_ne!(before.values(), logits().values());
}

#[test]
fn decoder_gradient_matches_finite_differences() {
    let mut rng = seeded_rng(28);
    let decoder = Decoder::new(&[8; 5], &mut rng);
    let features = Tensor::new([3, 8], random_values(24, &mut rng)).unwrap();
    let weights = random_values(3 * PATCH * PATCH, &mut rng);
    let mut params = Vec::new();
    decoder.collect("dec", &mut params);
    for (name, p) in &params {
        // Biases feeding batch norm have an identically zero gradient.
        if name.ends_with(".b") && name != "dec.deconv4.b" {
            continue;
        }
        let coords: Vec<usize> = (0..p.len()).step_by((p.len() / 6).max(1)).collect();
        let err = finite_diff_check_param(
            |tape: &Tape| {
                let y = decoder.forward(tape, tape.constant(&features), Mode::BatchStats)?;
                y.dot_const(&weights)
            },
            p,
            1e-5,
            Some(&coords),
        )
        .unwrap();
        assert!(err < 1e-3, "{name}: relative error {err}");
    }
}

#[test]
fn checkpoint_round_trip_restores_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut rng = seeded_rng(29);
    let seq = random_sequence(2, &mut rng);
    for kind in [ModelKind::Recurrent, ModelKind::Baseline] {
        let models = tiny(kind, 30);
        // Move the running statistics off their initial values.
        let tape = Tape::new();
        models
            .generator
            .forward(
                &tape,
                tape.constant(&random_patches(4, &mut rng)),
                2,
                &[0, 1],
                Mode::Train,
            )
            .unwrap();
        let mut ck = models.to_checkpoint();
        ck.push("opt.g.t", Tensor::scalar(3.0));
        ck.save(&path).unwrap();

        let loaded = Checkpoint::load(&path).unwrap();
        let back = Models::from_checkpoint(&loaded).unwrap();
        assert_eq!(back.kind(), kind);
        if kind == ModelKind::Recurrent {
            assert_eq!(back.config, models.config);
        }
        assert_eq!(back.to_checkpoint().to_bytes(), models.to_checkpoint().to_bytes());
        assert_eq!(
            back.translate(&seq, 2, Mode::Infer).unwrap().values(),
            models.translate(&seq, 2, Mode::Infer).unwrap().values()
        );
    }
}

#[test]
fn checkpoint_font_count_is_checked() {
    let models = tiny(ModelKind::Recurrent, 31);
    assert!(models.check_fonts(3).is_ok());
    assert!(matches!(
        models.check_fonts(5),
        Err(ModelError::FontCount { expected: 5, found: 3 })
    ));
    let mut ck = models.to_checkpoint();
    ck.fonts = 4;
    assert!(matches!(Models::from_checkpoint(&ck), Err(ModelError::Format(_))));
}

#[test]
fn time_major_layout_round_trips() {
    let mut rng = seeded_rng(32);
    let a = random_sequence(3, &mut rng);
    let b = random_sequence(3, &mut rng);
    let t = time_major(&[&a, &b]).unwrap();
    assert_eq!(t.shape(), &[6, 1, PATCH, PATCH]);
    assert_eq!(patch_rows(&t, 1), b.patch(0));
    assert_eq!(patch_rows(&t, 4), a.patch(2));
    let words = split_time_major(t.values(), 3, 2);
    assert_eq!(words[0], a.values());
    assert_eq!(words[1], b.values());
    assert!(time_major(&[&a, &random_sequence(2, &mut rng)]).is_err());
}

#[test]
fn batched_forward_matches_single_words_in_infer_mode() {
    let models = tiny(ModelKind::Recurrent, 33);
    let mut rng = seeded_rng(34);
    let a = random_sequence(2, &mut rng);
    let b = random_sequence(2, &mut rng);
    let tape = Tape::new();
    let x = tape.constant(&time_major(&[&a, &b]).unwrap());
    let y = models
        .generator
        .forward(&tape, x, 2, &[0, 2], Mode::Infer)
        .unwrap()
        .value();
    let words = split_time_major(y.values(), 2, 2);
    let close = |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(p, q)| (p - q).abs() < 1e-12);
    assert!(close(&words[0], models.translate(&a, 0, Mode::Infer).unwrap().values()));
    assert!(close(&words[1], models.translate(&b, 2, Mode::Infer).unwrap().values()));
}
