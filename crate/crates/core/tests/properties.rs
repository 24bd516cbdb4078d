//! Property tests over random inputs.

use fontgan::dataset::{
    bucket_batches, default_catalog, resample, resize_to_height, resized_width, PatchSequence, WordImage, WordSample,
    PATCH,
};
use fontgan::eval::{l1_and_psnr, seam_score};
use fontgan::models::{split_time_major, time_major};
use fontgan::tensor::{Adam, AdamConfig, Param, Tape, Tensor};
use fontgan::train::StepReport;
use proptest::prelude::*;

fn image(height: usize, width: usize, lo: f64, hi: f64) -> impl Strategy<Value = WordImage> {
    prop::collection::vec(lo..=hi, height * width).prop_map(move |px| WordImage::new(height, width, px).unwrap())
}

fn any_image(max_h: usize, max_w: usize) -> impl Strategy<Value = WordImage> {
    (1..=max_h, 1..=max_w).prop_flat_map(|(h, w)| image(h, w, -1.0, 1.0))
}

fn word() -> impl Strategy<Value = String> {
    "[A-Z]{1,7}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extract_assemble_is_identity(img in (1usize..=200).prop_flat_map(|w| image(PATCH, w, -1.0, 1.0))) {
        let seq = PatchSequence::extract(&img).unwrap();
        prop_assert_eq!(seq.count(), img.width().div_ceil(PATCH));
        prop_assert!(seq.pad_columns() < PATCH);
        prop_assert_eq!(seq.count() * PATCH - seq.pad_columns(), img.width());
        prop_assert_eq!(seq.assemble().unwrap(), img);
    }

    #[test]
    fn resize_keeps_aspect_and_range(img in any_image(60, 120)) {
        let out = resize_to_height(&img, PATCH);
        prop_assert_eq!(out.height(), PATCH);
        let exact = img.width() as f64 * PATCH as f64 / img.height() as f64;
        prop_assert!((out.width() as f64 - exact).abs() <= 0.5 || out.width() == 1);
        prop_assert!(out.pixels().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn resample_to_same_size_is_identity(img in any_image(20, 20)) {
        prop_assert_eq!(resample(&img, img.height(), img.width()), img);
    }

    #[test]
    fn resized_width_is_positive(w in 1usize..2000, h in 1usize..500) {
        prop_assert!(resized_width(w, h, PATCH) >= 1);
    }

    #[test]
    fn rendering_is_pure_and_in_range(text in word(), font in 0usize..10) {
        let face = &default_catalog()[font];
        let a = face.render_word(&text).unwrap();
        let b = face.render_word(&text).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.pixels().iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(a.ink_count() > 0);
    }

    #[test]
    fn buckets_partition_samples(widths in prop::collection::vec(1usize..160, 1..40), batch in 1usize..9, seed: u64) {
        let samples: Vec<WordSample> = widths
            .iter()
            .map(|&w| {
                let seq = PatchSequence::extract(&WordImage::filled(PATCH, w, 1.0)).unwrap();
                WordSample { word: "A".into(), source: seq.clone(), target: seq, source_font: 0, target_font: 1 }
            })
            .collect();
        let batches = bucket_batches(&samples, batch, seed);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..samples.len()).collect::<Vec<_>>());
        for b in &batches {
            prop_assert!(!b.is_empty() && b.len() <= batch);
            let n = samples[b[0]].source.count();
            prop_assert!(b.iter().all(|&i| samples[i].source.count() == n));
        }
        prop_assert_eq!(batches, bucket_batches(&samples, batch, seed));
    }

    #[test]
    fn l1_psnr_symmetric_and_triangle(
        (a, b, c) in (1usize..8, 1usize..40).prop_flat_map(|(h, w)| (image(h, w, -1.0, 1.0), image(h, w, -1.0, 1.0), image(h, w, -1.0, 1.0)))
    ) {
        let (ab, pab) = l1_and_psnr(&a, &b).unwrap();
        let (ba, pba) = l1_and_psnr(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(pab, pba);
        let (bc, _) = l1_and_psnr(&b, &c).unwrap();
        let (ac, _) = l1_and_psnr(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn seam_score_ignores_intensity_shift(
        img in (33usize..130).prop_flat_map(|w| image(8, w, -0.5, 0.5)),
        shift in -0.5f64..0.5,
    ) {
        let moved = WordImage::new(img.height(), img.width(), img.pixels().iter().map(|v| v + shift).collect()).unwrap();
        let a = seam_score(&img, PATCH).unwrap();
        let b = seam_score(&moved, PATCH).unwrap();
        prop_assert!((a.raw - b.raw).abs() < 1e-12);
        prop_assert!(a.boundary >= 0.0 && a.interior >= 0.0);
    }

    #[test]
    fn activations_stay_in_range(values in prop::collection::vec(-50.0f64..50.0, 1..64)) {
        let tape = Tape::new();
        let x = tape.constant(&Tensor::new([values.len()], values).unwrap());
        prop_assert!(x.tanh().value().values().iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(x.sigmoid().value().values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn adam_zero_gradient_is_a_fixed_point(values in prop::collection::vec(-5.0f64..5.0, 1..32), steps in 1usize..20) {
        let p = Param::new(Tensor::new([values.len()], values.clone()).unwrap());
        let params = vec![("p".to_string(), p.clone())];
        let mut opt = Adam::new(AdamConfig { weight_decay: 0.0, ..AdamConfig::default() }, &params);
        for _ in 0..steps {
            opt.step(&params).unwrap();
        }
        prop_assert_eq!(opt.steps(), steps as u64);
        let after = p.borrow().values().to_vec();
        prop_assert_eq!(after, values);
    }

    #[test]
    fn time_major_round_trip(words in 1usize..5, count in 1usize..4, seed in 0u64..1000) {
        let seqs: Vec<PatchSequence> = (0..words)
            .map(|b| {
                let v = (0..count * PATCH * PATCH).map(|i| ((i as u64 * 31 + b as u64 * 7 + seed) % 200) as f64 / 100.0 - 1.0).collect();
                PatchSequence::from_values(v, count * PATCH).unwrap()
            })
            .collect();
        let refs: Vec<&PatchSequence> = seqs.iter().collect();
        let t = time_major(&refs).unwrap();
        let back = split_time_major(t.values(), count, words);
        for (s, v) in seqs.iter().zip(back) {
            prop_assert_eq!(s.values(), &v[..]);
        }
    }

    #[test]
    fn step_reports_round_trip(step: u64, v in prop::array::uniform7(-1e6f64..1e6)) {
        let r = StepReport {
            step, loss_d: v[0], loss_g_adv: v[1], loss_g_l1: v[2], loss_g_cls: v[3], loss_c: v[4], d_real: v[5], d_fake: v[6],
        };
        prop_assert_eq!(StepReport::parse_csv_row(&r.csv_row()), Some(r));
    }
}

#[test]
fn patch_counts_for_every_width_up_to_512() {
    for w in 1..=512 {
        let seq = PatchSequence::extract(&WordImage::filled(PATCH, w, 1.0)).unwrap();
        assert_eq!(seq.count(), w.div_ceil(PATCH), "width {w}");
        assert_eq!(seq.pad_columns(), seq.count() * PATCH - w);
    }
}
