//! Tape gradients against central finite differences at random points.

use fontgan::tensor::{
    finite_diff_check, finite_diff_check_param, normal_tensor, seeded_rng, Activation, LstmState, LstmWeights,
    NormMode, Param, Tape, Tensor, TensorError, Var,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const POINTS: u64 = 10;

fn projection(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Pins the higher-ranked signature of a closure stored in a variable.
fn on_tape<F>(f: F) -> F
where
    F: for<'t> Fn(&'t Tape) -> Result<Var<'t>, TensorError>,
{
    f
}

fn on_input<F>(f: F) -> F
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>, TensorError>,
{
    f
}

fn param(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Param {
    Param::new(normal_tensor(shape, std, rng))
}

#[test]
fn square_at_three() {
    let err = finite_diff_check(
        |_, x| x.mul(&x).map(|y| y.sum()),
        &Tensor::new([1], vec![3.0]).unwrap(),
        STEP,
    )
    .unwrap();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn conv2d_gradients() {
    for seed in 0..POINTS {
        let mut rng = seeded_rng(seed);
        let x = normal_tensor(&[1, 2, 8, 8], 1.0, &mut rng);
        let k = param(&[3, 2, 5, 5], 0.3, &mut rng);
        let b = param(&[3], 0.3, &mut rng);
        let w = projection(3 * 4 * 4, &mut rng);
        let err = finite_diff_check(
            |tape, x| x.conv2d(&tape.param(&k), &tape.param(&b), 2, 2)?.dot_const(&w),
            &x,
            STEP,
        )
        .unwrap();
        assert!(err < TOL, "input seed {seed}: {err}");
        let f = on_tape(|tape| {
            let xv = tape.constant(&x);
            xv.conv2d(&tape.param(&k), &tape.param(&b), 2, 2)?.dot_const(&w)
        });
        for p in [&k, &b] {
            let err = finite_diff_check_param(f, p, STEP, None).unwrap();
            assert!(err < TOL, "param seed {seed}: {err}");
        }
    }
}

#[test]
fn conv_transpose2d_gradients() {
    for seed in 0..POINTS {
        let mut rng = seeded_rng(100 + seed);
        let x = normal_tensor(&[2, 3, 2, 2], 1.0, &mut rng);
        let k = param(&[3, 2, 5, 5], 0.3, &mut rng);
        let b = param(&[2], 0.3, &mut rng);
        let w = projection(2 * 2 * 4 * 4, &mut rng);
        let err = finite_diff_check(
            |tape, x| {
                x.conv_transpose2d(&tape.param(&k), &tape.param(&b), 2, 2, 1)?
                    .dot_const(&w)
            },
            &x,
            STEP,
        )
        .unwrap();
        assert!(err < TOL, "input seed {seed}: {err}");
        let f = on_tape(|tape| {
            let xv = tape.constant(&x);
            xv.conv_transpose2d(&tape.param(&k), &tape.param(&b), 2, 2, 1)?
                .dot_const(&w)
        });
        for p in [&k, &b] {
            let err = finite_diff_check_param(f, p, STEP, None).unwrap();
            assert!(err < TOL, "param seed {seed}: {err}");
        }
    }
}

#[test]
fn dense_gradients() {
    for seed in 0..POINTS {
        let mut rng = seeded_rng(200 + seed);
        let x = normal_tensor(&[3, 4], 1.0, &mut rng);
        let wt = param(&[4, 5], 0.5, &mut rng);
        let b = param(&[5], 0.5, &mut rng);
        let w = projection(15, &mut rng);
        let err = finite_diff_check(
            |tape, x| x.dense(&tape.param(&wt), &tape.param(&b))?.dot_const(&w),
            &x,
            STEP,
        )
        .unwrap();
        assert!(err < TOL, "input seed {seed}: {err}");
        let f = on_tape(|tape| {
            tape.constant(&x)
                .dense(&tape.param(&wt), &tape.param(&b))?
                .dot_const(&w)
        });
        for p in [&wt, &b] {
            let err = finite_diff_check_param(f, p, STEP, None).unwrap();
            assert!(err < TOL, "param seed {seed}: {err}");
        }
    }
}

#[test]
fn activation_gradients() {
    for kind in [Activation::LEAKY, Activation::Tanh, Activation::Sigmoid] {
        for seed in 0..POINTS {
            let mut rng = seeded_rng(300 + seed);
            let x = normal_tensor(&[2, 6], 1.5, &mut rng);
            let w = projection(12, &mut rng);
            let err = finite_diff_check(|_, x| x.activation(kind).dot_const(&w), &x, STEP).unwrap();
            assert!(err < TOL, "{kind:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn batch_norm_gradients() {
    for train in [true, false] {
        for seed in 0..POINTS {
            let mut rng = seeded_rng(400 + seed);
            let x = normal_tensor(&[3, 2, 2, 2], 1.0, &mut rng);
            let gamma = Param::new(Tensor::new([2], vec![1.0 + rng.gen_range(-0.5..0.5), 0.7]).unwrap());
            let beta = param(&[2], 0.5, &mut rng);
            let w = projection(24, &mut rng);
            let (rm, rv) = ([0.1, -0.2], [0.8, 1.3]);
            let mode = if train {
                NormMode::Train
            } else {
                NormMode::Infer { mean: &rm, var: &rv }
            };
            let err = finite_diff_check(
                |tape, x| {
                    x.batch_norm(&tape.param(&gamma), &tape.param(&beta), mode)?
                        .0
                        .dot_const(&w)
                },
                &x,
                STEP,
            )
            .unwrap();
            assert!(err < 1e-3, "train={train} input seed {seed}: {err}");
            let f = on_tape(|tape| {
                tape.constant(&x)
                    .batch_norm(&tape.param(&gamma), &tape.param(&beta), mode)?
                    .0
                    .dot_const(&w)
            });
            for p in [&gamma, &beta] {
                let err = finite_diff_check_param(f, p, STEP, None).unwrap();
                assert!(err < 1e-3, "train={train} param seed {seed}: {err}");
            }
        }
    }
}

#[test]
fn lstm_four_step_chain() {
    let (d, u) = (3, 4);
    for seed in 0..POINTS {
        let mut rng = seeded_rng(500 + seed);
        let xs = normal_tensor(&[4, 2, d], 1.0, &mut rng);
        let wi = param(&[d, 4 * u], 0.4, &mut rng);
        let wr = param(&[u, 4 * u], 0.4, &mut rng);
        let b = param(&[4 * u], 0.4, &mut rng);
        let w = projection(2 * u, &mut rng);
        let chain = on_input(|tape, xs| {
            let weights = LstmWeights {
                input: tape.param(&wi),
                recurrent: tape.param(&wr),
                bias: tape.param(&b),
            };
            let flat = xs.reshape(&[8, d])?;
            let mut state = LstmState::zeros(tape, 2, u);
            for t in 0..4 {
                state = flat.slice_rows(2 * t, 2 * t + 2)?.lstm_cell(&state, &weights)?;
            }
            state.h.add(&state.c)?.dot_const(&w)
        });
        let err = finite_diff_check(chain, &xs, STEP).unwrap();
        assert!(err < TOL, "input seed {seed}: {err}");
        for p in [&wi, &wr, &b] {
            let err = finite_diff_check_param(|tape| chain(tape, tape.constant(&xs)), p, STEP, None).unwrap();
            assert!(err < TOL, "param seed {seed}: {err}");
        }
    }
}

#[test]
fn loss_gradients() {
    for seed in 0..POINTS {
        let mut rng = seeded_rng(600 + seed);
        let logits = normal_tensor(&[1, 3], 1.0, &mut rng);
        let label = rng.gen_range(0..3);
        let err = finite_diff_check(|_, z| z.cross_entropy(&[label]), &logits, STEP).unwrap();
        assert!(err < TOL, "cross_entropy seed {seed}: {err}");

        let batch = normal_tensor(&[4, 5], 1.0, &mut rng);
        let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
        let err = finite_diff_check(|_, z| z.cross_entropy(&labels), &batch, STEP).unwrap();
        assert!(err < TOL, "batched cross_entropy seed {seed}: {err}");

        let probs = Tensor::new([6], (0..6).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap();
        for target in [0.0, 1.0] {
            let err = finite_diff_check(|_, p| Ok(p.bce(target)), &probs, STEP).unwrap();
            assert!(err < TOL, "bce({target}) seed {seed}: {err}");
        }

        let a = normal_tensor(&[6], 1.0, &mut rng);
        let other = normal_tensor(&[6], 1.0, &mut rng);
        let err = finite_diff_check(|tape, a| a.l1(&tape.constant(&other)), &a, STEP).unwrap();
        assert!(err < TOL, "l1 seed {seed}: {err}");

        let fake = Tensor::new([6], (0..6).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap();
        let err = finite_diff_check(|tape, real| Ok(real.gan_value(&tape.constant(&fake))), &probs, STEP).unwrap();
        assert!(err < TOL, "gan_value real seed {seed}: {err}");
        let err = finite_diff_check(|tape, fake| Ok(tape.constant(&probs).gan_value(&fake)), &fake, STEP).unwrap();
        assert!(err < TOL, "gan_value fake seed {seed}: {err}");
    }
}

#[test]
fn structural_op_gradients() {
    for seed in 0..POINTS {
        let mut rng = seeded_rng(700 + seed);
        let x = normal_tensor(&[4, 6], 1.0, &mut rng);
        let other = normal_tensor(&[4, 6], 1.0, &mut rng);
        let w = projection(24, &mut rng);
        let err = finite_diff_check(
            |tape, x| {
                let o = tape.constant(&other);
                let mixed = x.mul(&o)?.add(&x.scale(0.5))?.sub(&x.mul(&x)?)?;
                let cols = Var::concat_cols(&[mixed.slice_cols(3, 6)?, mixed.slice_cols(0, 3)?])?;
                let rows = Var::concat_rows(&[cols.slice_rows(2, 4)?, cols.gather_rows(&[1, 0])?])?;
                rows.dot_const(&w)
            },
            &x,
            STEP,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
        let err = finite_diff_check(|_, x| Ok(x.gather_rows(&[3, 3, 0])?.mean()), &x, STEP).unwrap();
        assert!(err < TOL, "gather seed {seed}: {err}");
    }
}

#[test]
fn tanh_of_dense_composite() {
    let mut rng = seeded_rng(800);
    let x = normal_tensor(&[2, 3], 1.0, &mut rng);
    let wt = param(&[3, 2], 0.5, &mut rng);
    let b = param(&[2], 0.5, &mut rng);
    let err = finite_diff_check(
        |tape, x| Ok(x.dense(&tape.param(&wt), &tape.param(&b))?.tanh().sum()),
        &x,
        STEP,
    )
    .unwrap();
    assert!(err < TOL, "{err}");
}
