use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sceneact_core::arl::{Example, Pipeline, Stage1Model, Stage2Model, TrainConfig};
use sceneact_core::autodiff::layers::{init_lstm, init_mlp, lstm_final_cell, mlp};
use sceneact_core::autodiff::losses::{scene_loss_grad, scene_loss_terms};
use sceneact_core::autodiff::{grad_check, Bound, Optimizer, Params, Tape, Tensor, Var};
use sceneact_core::error::ShapeError;
use sceneact_core::scene::Scene;
use sceneact_core::tensorize::{encode_scene, Vocabulary};
use sceneact_core::worldgen::{gen_action, gen_scene};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
    Tensor::uniform(rows, cols, 1.0, &mut rng(seed))
}

/// Reduces `v` to a scalar with fixed random weights so that every output
/// coordinate contributes a distinct amount.
fn probe(tape: &mut Tape, v: Var, seed: u64) -> Result<Var, ShapeError> {
    let (r, c) = tape.value(v).shape();
    let w = tape.constant(random(r, c, seed ^ 0xabc));
    let m = tape.mul(v, w)?;
    Ok(tape.sum(m))
}

fn params(entries: &[(&str, usize, usize)], seed: u64) -> Params {
    let mut p = Params::new();
    for (i, &(name, r, c)) in entries.iter().enumerate() {
        p.insert(name, random(r, c, seed + i as u64), true);
    }
    p
}

fn check<F>(p: &Params, f: F)
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, ShapeError>,
{
    let report = grad_check(p, EPS, 1, f).unwrap();
    assert!(report.checked > 0);
    assert!(report.max_rel_err < TOL, "{report:?}");
}

#[test]
fn hand_derived_matmul_gradient() {
    // d/dA sum(A B) = 1 B^T: each row of the gradient is the row sums of B.
    let mut tape = Tape::new();
    let a = tape.var(Tensor::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = tape.constant(Tensor::new(2, 3, vec![1.0, 0.0, 2.0, -1.0, 3.0, 0.5]).unwrap());
    let y = tape.matmul(a, b).unwrap();
    let loss = tape.sum(y);
    let grads = tape.backward(loss);
    assert_eq!(grads.get(a).unwrap().data, vec![3.0, 2.5, 3.0, 2.5]);
}

#[test]
fn hand_derived_tanh_and_sigmoid_gradients() {
    let mut tape = Tape::new();
    let x = tape.var(Tensor::row(vec![0.0, 0.5]));
    let t = tape.tanh(x);
    let s = tape.sigmoid(x);
    let both = tape.add(t, s).unwrap();
    let loss = tape.sum(both);
    let g = tape.backward(loss);
    let g = g.get(x).unwrap();
    // tanh'(0) + sigmoid'(0) = 1 + 1/4.
    assert!((g.data[0] - 1.25).abs() < 1e-12);
    let (th, sg) = (0.5f64.tanh(), 1.0 / (1.0 + (-0.5f64).exp()));
    assert!((g.data[1] - (1.0 - th * th + sg * (1.0 - sg))).abs() < 1e-12);
}

#[test]
fn matmul_add_sub_mul() {
    let p = params(&[("a", 3, 4), ("b", 4, 2), ("c", 3, 2)], 10);
    check(&p, |tape, b| {
        let m = tape.matmul(b.var("a"), b.var("b"))?;
        let s = tape.add(m, b.var("c"))?;
        let d = tape.sub(s, b.var("c"))?;
        let e = tape.mul(d, b.var("c"))?;
        probe(tape, e, 1)
    });
}

#[test]
fn bias_scale_concat_and_slices() {
    let p = params(&[("x", 4, 3), ("y", 4, 2), ("b", 1, 5)], 20);
    check(&p, |tape, b| {
        let c = tape.concat_cols(&[b.var("x"), b.var("y")])?;
        let c = tape.add_bias(c, b.var("b"))?;
        let c = tape.scale(c, -1.5);
        let mid = tape.slice_cols(c, 1, 4)?;
        let rows = tape.slice_rows(mid, 1, 3)?;
        probe(tape, rows, 2)
    });
}

#[test]
fn nonlinearities() {
    let mut p = params(&[("x", 3, 5)], 30);
    // Keep relu inputs away from its kink.
    for v in &mut p.mut_value("x").unwrap().data {
        if v.abs() < 0.05 {
            *v += 0.2;
        }
    }
    check(&p, |tape, b| {
        let t = tape.tanh(b.var("x"));
        let s = tape.sigmoid(b.var("x"));
        let r = tape.relu(b.var("x"));
        let sum = tape.add(t, s)?;
        let sum = tape.add(sum, r)?;
        probe(tape, sum, 3)
    });
}

#[test]
fn embedding_and_row_select() {
    let p = params(&[("table", 6, 3), ("alt", 4, 3)], 40);
    check(&p, |tape, b| {
        let e = tape.embedding(b.var("table"), &[0, 3, 3, 5])?;
        let s = tape.select_rows(&[true, false, true, false], e, b.var("alt"))?;
        probe(tape, s, 4)
    });
}

#[test]
fn losses() {
    let p = params(&[("z", 4, 3)], 50);
    let targets = Tensor::new(4, 3, (0..12).map(|i| (i % 2) as f64).collect()).unwrap();
    let weights = random(4, 3, 51).map(f64::abs);
    check(&p, |tape, b| {
        let ce = tape.softmax_cross_entropy(b.var("z"), &[0, 2, 1, 2], Some(&[1.0, 0.5, 2.0, 0.0]))?;
        let bce = tape.bce_with_logits(b.var("z"), &targets, Some(&weights))?;
        let se = tape.squared_error(b.var("z"), &targets, None)?;
        let l = tape.add(ce, bce)?;
        tape.add(l, se)
    });
}

fn small_scene(seed: u64) -> Scene {
    let mut r = rng(seed);
    loop {
        let s = gen_scene(&mut r).unwrap();
        if s.len() >= 3 {
            return Scene::new(s.objects.into_iter().take(3).collect());
        }
    }
}

#[test]
fn scene_loss_kernel_matches_tape_op() {
    let target = encode_scene(&small_scene(3));
    let pred = random(1, target.len(), 60).data;
    let mut grad = vec![0.0; pred.len()];
    scene_loss_grad(&pred, &target, 2.0, 1.0, &mut grad);
    let mut tape = Tape::new();
    let v = tape.var(Tensor::row(pred.clone()));
    let loss = tape.scene_loss(v, &Tensor::row(target.clone()), 2.0).unwrap();
    assert!((tape.value(loss).item() - scene_loss_terms(&pred, &target, 2.0).total()).abs() < 1e-9);
    let g = tape.backward(loss);
    for (a, b) in g.get(v).unwrap().data.iter().zip(&grad) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn scene_loss_gradient() {
    let target = Tensor::from_rows(&[encode_scene(&small_scene(4)), encode_scene(&small_scene(5))]).unwrap();
    let p = params(&[("pred", 2, target.cols)], 70);
    check(&p, |tape, b| tape.scene_loss(b.var("pred"), &target, 3.0));
}

#[test]
fn mlp_gradient() {
    let mut p = Params::new();
    init_mlp(&mut p, "m", &[5, 7, 6, 3], &mut rng(80));
    p.insert("x", random(4, 5, 81), false);
    check(&p, |tape, b| {
        let y = mlp(tape, b, "m", 3, b.var("x"))?;
        probe(tape, y, 8)
    });
}

#[test]
fn lstm_gradient_with_ragged_lengths() {
    let mut p = Params::new();
    init_lstm(&mut p, "l", 3, 4, &mut rng(90));
    // Nonzero bias so every gate path is exercised.
    p.insert("l.b", random(1, 16, 91), true);
    p.insert("x", random(4 * 3, 3, 92), true);
    check(&p, |tape, b| {
        let c = lstm_final_cell(tape, b, "l", b.var("x"), 3, &[4, 1, 2])?;
        probe(tape, c, 9)
    });
}

#[test]
fn lstm_ignores_steps_past_sequence_end() {
    let mut p = Params::new();
    init_lstm(&mut p, "l", 2, 3, &mut rng(100));
    let x = random(3 * 2, 2, 101);
    let run = |x: Tensor| {
        let mut tape = Tape::new();
        let b = p.bind(&mut tape);
        let xv = tape.constant(x);
        let c = lstm_final_cell(&mut tape, &b, "l", xv, 2, &[1, 3]).unwrap();
        tape.value(c).row_slice(0).to_vec()
    };
    let mut changed = x.clone();
    // Rows 2 and 4 are steps 1 and 2 of sequence 0, which has length 1.
    for c in 0..2 {
        changed.data[2 * 2 + c] = 9.0;
        changed.data[4 * 2 + c] = -9.0;
    }
    assert_eq!(run(x), run(changed));
}

// Unit coordinate weight keeps the loss, and with it finite-difference
// roundoff, small; the weight is a plain scalar covered by scene_loss_gradient.
fn tiny_config() -> TrainConfig {
    TrainConfig { action_dim: 4, hidden_width: 6, embed_dim: 3, lstm_hidden: 5, coord_weight: 1.0, ..TrainConfig::default() }
}

fn pair_examples(seed: u64) -> Vec<Example> {
    let mut r = rng(seed);
    let vocab = Vocabulary::from_template_bank();
    (0..2)
        .map(|_| loop {
            let pre = small_scene(r.gen());
            if let Ok((text, post)) = gen_action(&mut r, &pre, 1).map(|(t, a)| (t, sceneact_core::program::exec_action(&a, &pre))) {
                if let Ok(post) = post {
                    break Example::with_text(&pre, &post, &text, &vocab).unwrap();
                }
            }
        })
        .collect()
}

#[test]
fn stage1_composite_loss_gradient() {
    for seed in 0..3 {
        let cfg = TrainConfig { seed, ..tiny_config() };
        let model = Stage1Model::init(&cfg);
        let data = pair_examples(200 + seed);
        let batch: Vec<&Example> = data.iter().collect();
        check(&model.params, |tape, b| model.loss(tape, b, &batch));
    }
}

#[test]
fn stage2_composite_loss_gradient() {
    let vocab = Vocabulary::from_template_bank();
    for seed in 0..3 {
        let cfg = TrainConfig { seed, ..tiny_config() };
        let text = Stage2Model::init(&cfg, vocab.len());
        let mut decoder = Stage1Model::init(&cfg).decoder();
        decoder.set_trainable(true);
        let pipeline = Pipeline { decoder, text: text.clone() };
        let data = pair_examples(300 + seed);
        let batch: Vec<&Example> = data.iter().collect();
        check(&pipeline.full_params(), |tape, b| Pipeline::loss(&cfg, tape, b, &text, &batch));
    }
}

#[test]
fn stage2_auxiliary_term_gradient() {
    let vocab = Vocabulary::from_template_bank();
    let cfg = TrainConfig { aux_weight: 0.5, ..tiny_config() };
    let text = Stage2Model::init(&cfg, vocab.len());
    let decoder = Stage1Model::init(&cfg).decoder();
    let pipeline = Pipeline { decoder, text: text.clone() };
    let mut data = pair_examples(400);
    for (i, e) in data.iter_mut().enumerate() {
        e.action_target = Some((0..cfg.action_dim).map(|j| 0.1 * (i + j) as f64 - 0.2).collect());
    }
    let batch: Vec<&Example> = data.iter().collect();
    let plain = TrainConfig { aux_weight: 0.0, ..cfg.clone() };
    let value = |c: &TrainConfig| {
        let mut tape = Tape::new();
        let b = pipeline.full_params().bind(&mut tape);
        let l = Pipeline::loss(c, &mut tape, &b, &text, &batch).unwrap();
        tape.value(l).data[0]
    };
    assert!(value(&cfg) > value(&plain));
    check(&pipeline.full_params(), |tape, b| Pipeline::loss(&cfg, tape, b, &text, &batch));
}

#[test]
fn frozen_parameters_are_untouched_by_optimizers() {
    let mut p = params(&[("w", 3, 3), ("frozen", 3, 3)], 110);
    p.set_trainable(false);
    let mut q = Params::new();
    q.extend_prefixed("", &p);
    q.insert("w", random(3, 3, 111), true);
    let before = q.get("frozen").unwrap().value.clone();
    for mut opt in [Optimizer::sgd(0.1), Optimizer::adam(0.1)] {
        for _ in 0..5 {
            let mut tape = Tape::new();
            let b = q.bind(&mut tape);
            let m = tape.matmul(b.var("w"), b.var("frozen")).unwrap();
            let loss = probe(&mut tape, m, 5).unwrap();
            let grads = b.grads(&q, &tape.backward(loss));
            assert!(!grads.contains_key("frozen"));
            opt.step(&mut q, &grads);
        }
    }
    assert_eq!(q.get("frozen").unwrap().value, before);
    assert_ne!(q.get("w").unwrap().value, random(3, 3, 111));
}

#[test]
fn sgd_step_is_lr_times_gradient() {
    let mut p = Params::new();
    p.insert("w", Tensor::row(vec![1.0, -2.0]), true);
    let mut tape = Tape::new();
    let b = p.bind(&mut tape);
    let loss = probe_sum_of_squares(&mut tape, b.var("w"));
    let grads = b.grads(&p, &tape.backward(loss));
    Optimizer::sgd(0.25).step(&mut p, &grads);
    // d/dw sum(w^2) = 2w, so w <- w - 0.5 w.
    assert_eq!(p.get("w").unwrap().value.data, vec![0.5, -1.0]);
}

fn probe_sum_of_squares(tape: &mut Tape, v: Var) -> Var {
    let sq = tape.mul(v, v).unwrap();
    tape.sum(sq)
}

#[test]
fn params_round_trip_through_bytes() {
    let mut p = params(&[("enc.0.w", 3, 2), ("dec.0.b", 1, 4)], 120);
    p.set_trainable(false);
    p.insert("x", Tensor::row(vec![f64::MIN_POSITIVE, -0.0, 1e300]), true);
    let back = Params::from_bytes(&p.to_bytes()).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.hash(), p.hash());
    assert!(Params::from_bytes(b"nope").is_err());
}

#[test]
fn shape_errors_are_reported() {
    let mut tape = Tape::new();
    let a = tape.var(Tensor::zeros(2, 3));
    let b = tape.var(Tensor::zeros(2, 3));
    assert!(tape.matmul(a, b).is_err());
    assert!(tape.slice_cols(a, 2, 5).is_err());
    assert!(tape.embedding(a, &[7]).is_err());
}
