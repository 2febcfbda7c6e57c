//! Action representation learning.
//!
//! Stage 1 trains an action encoder `(S, S') -> A` jointly with an effect
//! decoder `(S, A) -> S'` on scene pairs. Stage 2 keeps only the decoder,
//! freezes it, and trains an LSTM text encoder `T_A -> A` through it.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::layers::{init_lstm, init_mlp, lstm_final_cell, mlp};
use crate::autodiff::{Bound, Optimizer, OptimizerKind, ParamGrads, Params, Tape, Tensor, Var};
use crate::error::{Error, Result, ShapeError};
use crate::io::{read_to_string, write_atomic};
use crate::scene::{scene_equal, Color, Material, Scene, SceneObject, Shape};
use crate::tensorize::{decode_scene, encode_scene, TokenSeq, Vocabulary, PRESENCE, SCENE_DIM, SLOT_DIM};
use crate::worldgen::{SampleRecord, IDENTITY_TEXTS};

/// Hyperparameters for both stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Action vector length L.
    pub action_dim: usize,
    /// Word embedding size E.
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub stage1_pairs: usize,
    /// Weight of the coordinate term in the scene loss.
    pub coord_weight: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Number of "do nothing" examples mixed into both stages.
    pub identity_pairs: usize,
    pub presence_threshold: f64,
    pub coord_tol: f64,
    /// Weight of an optional term pulling text vectors toward the stage-1
    /// encoder's vectors. Off by default.
    pub aux_weight: f64,
    /// Resample a label permutation and a square symmetry of every stage-1
    /// pair each epoch.
    pub augment: bool,
    /// Cosine-anneal the learning rate from `learning_rate` down to
    /// `learning_rate * min_lr_fraction` over the epoch budget.
    pub cosine_decay: bool,
    pub min_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 7,
            stage1_epochs: 150,
            stage2_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            action_dim: 125,
            embed_dim: 32,
            lstm_hidden: 200,
            hidden_width: 256,
            hidden_layers: 2,
            stage1_pairs: 2000,
            coord_weight: 100.0,
            patience: 10,
            identity_pairs: 100,
            presence_threshold: 0.5,
            coord_tol: 0.5,
            aux_weight: 0.0,
            augment: true,
            cosine_decay: true,
            min_lr_fraction: 0.02,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("action_dim", self.action_dim),
            ("embed_dim", self.embed_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("hidden_width", self.hidden_width),
            ("stage1_pairs", self.stage1_pairs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.coord_weight > 0.0) || self.aux_weight < 0.0 || self.coord_tol < 0.0 {
            return Err(Error::Config("loss weights and tolerances must be non-negative".into()));
        }
        Ok(())
    }

    fn hidden_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        sizes.push(output);
        sizes
    }

    fn mlp_layers(&self) -> usize {
        self.hidden_layers + 1
    }
}

const ENCODER: &str = "enc";
const DECODER: &str = "dec";
const EMBEDDING: &str = "emb";
const LSTM: &str = "lstm";
const PROJECTION: &str = "proj";

/// One training example: scene before, optional action text, scene after.
#[derive(Debug, Clone)]
pub struct Example {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub pre_scene: Scene,
    pub post_scene: Scene,
    pub tokens: Option<TokenSeq>,
    /// Stage-1 encoder vector of the pair, used by the auxiliary stage-2 term.
    pub action_target: Option<Vec<f64>>,
}

impl Example {
    pub fn pair(pre: &Scene, post: &Scene) -> Example {
        Example { pre: encode_scene(pre), post: encode_scene(post), pre_scene: pre.canonical(), post_scene: post.canonical(), tokens: None, action_target: None }
    }

    pub fn with_text(pre: &Scene, post: &Scene, text: &str, vocab: &Vocabulary) -> Result<Example> {
        Ok(Example { tokens: Some(vocab.tokenize(text)?), ..Example::pair(pre, post) })
    }
}

/// Scene pairs of records with oracle fields.
pub fn scene_pairs(records: &[SampleRecord]) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let post = r.scene_post.as_ref().ok_or_else(|| Error::Data(format!("{}: scene_post missing", r.id)))?;
            Ok(Example::pair(&r.scene_pre, post))
        })
        .collect()
}

/// Text examples of records with oracle fields.
pub fn text_examples(records: &[SampleRecord], vocab: &Vocabulary) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let post = r.scene_post.as_ref().ok_or_else(|| Error::Data(format!("{}: scene_post missing", r.id)))?;
            Example::with_text(&r.scene_pre, post, &r.action_text, vocab)
        })
        .collect()
}

/// `n` identity examples over the records' initial scenes, cycling through
/// the identity texts.
pub fn identity_examples(records: &[SampleRecord], n: usize, vocab: &Vocabulary) -> Result<Vec<Example>> {
    records
        .iter()
        .cycle()
        .take(if records.is_empty() { 0 } else { n })
        .enumerate()
        .map(|(i, r)| Example::with_text(&r.scene_pre, &r.scene_pre, IDENTITY_TEXTS[i % IDENTITY_TEXTS.len()], vocab))
        .collect()
}

fn batch_tensor(rows: impl Iterator<Item = Vec<f64>>) -> Tensor {
    let rows: Vec<Vec<f64>> = rows.collect();
    Tensor::from_rows(&rows).expect("encoded scenes have equal length")
}

/// Turns decoder outputs into activations: sigmoid on presence logits.
pub fn activations(pred: &[f64]) -> Vec<f64> {
    let mut out = pred.to_vec();
    for slot in out.chunks_mut(SLOT_DIM) {
        slot[PRESENCE] = 1.0 / (1.0 + (-slot[PRESENCE]).exp());
    }
    out
}

fn decoder_forward(tape: &mut Tape, bound: &Bound, cfg: &TrainConfig, pre: Var, action: Var) -> std::result::Result<Var, ShapeError> {
    let input = tape.concat_cols(&[pre, action])?;
    mlp(tape, bound, DECODER, cfg.mlp_layers(), input)
}

fn init_decoder(params: &mut Params, cfg: &TrainConfig, rng: &mut ChaCha8Rng) {
    init_mlp(params, DECODER, &cfg.hidden_sizes(SCENE_DIM + cfg.action_dim, SCENE_DIM), rng);
}

/// Action encoder plus effect decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Model {
    pub params: Params,
    pub config: TrainConfig,
}

impl Stage1Model {
    pub fn init(cfg: &TrainConfig) -> Stage1Model {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = Params::new();
        init_mlp(&mut params, ENCODER, &cfg.hidden_sizes(2 * SCENE_DIM, cfg.action_dim), &mut rng);
        init_decoder(&mut params, cfg, &mut rng);
        Stage1Model { params, config: cfg.clone() }
    }

    /// The decoder's parameters, names unchanged.
    pub fn decoder(&self) -> Params {
        let mut p = Params::new();
        p.extend_prefixed(&format!("{DECODER}."), &self.params.with_prefix(&format!("{DECODER}.")));
        p
    }

    pub fn encode_actions(&self, tape: &mut Tape, bound: &Bound, pre: Var, post: Var) -> std::result::Result<Var, ShapeError> {
        let input = tape.concat_cols(&[pre, post])?;
        mlp(tape, bound, ENCODER, self.config.mlp_layers(), input)
    }

    /// Mean scene loss of a batch.
    pub fn loss(&self, tape: &mut Tape, bound: &Bound, batch: &[&Example]) -> std::result::Result<Var, ShapeError> {
        let pre = tape.constant(batch_tensor(batch.iter().map(|e| e.pre.clone())));
        let post_t = batch_tensor(batch.iter().map(|e| e.post.clone()));
        let post = tape.constant(post_t.clone());
        let action = self.encode_actions(tape, bound, pre, post)?;
        let pred = decoder_forward(tape, bound, &self.config, pre, action)?;
        tape.scene_loss(pred, &post_t, self.config.coord_weight)
    }

    /// Decoder output rows for each example, using the encoder's action vectors.
    pub fn reconstruct(&self, examples: &[Example]) -> Vec<Vec<f64>> {
        chunked(examples, EVAL_BATCH, |chunk| {
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let pre = tape.constant(batch_tensor(chunk.iter().map(|e| e.pre.clone())));
            let post = tape.constant(batch_tensor(chunk.iter().map(|e| e.post.clone())));
            let action = self.encode_actions(&mut tape, &bound, pre, post).expect("shapes fixed by construction");
            let pred = decoder_forward(&mut tape, &bound, &self.config, pre, action).expect("shapes fixed by construction");
            rows_of(tape.value(pred))
        })
    }

    /// Encoder action vectors `A(S, S')` of each example.
    pub fn action_vectors(&self, examples: &[Example]) -> Vec<Vec<f64>> {
        chunked(examples, EVAL_BATCH, |chunk| {
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let pre = tape.constant(batch_tensor(chunk.iter().map(|e| e.pre.clone())));
            let post = tape.constant(batch_tensor(chunk.iter().map(|e| e.post.clone())));
            let action = self.encode_actions(&mut tape, &bound, pre, post).expect("shapes fixed by construction");
            rows_of(tape.value(action))
        })
    }

    /// Fraction of examples whose reconstructed scene matches the target.
    pub fn accuracy(&self, examples: &[Example]) -> f64 {
        scene_accuracy(&self.reconstruct(examples), examples, &self.config)
    }
}

/// Text encoder: embeddings, LSTM, projection of the final cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Model {
    pub params: Params,
    pub config: TrainConfig,
    pub vocab_size: usize,
}

impl Stage2Model {
    pub fn init(cfg: &TrainConfig, vocab_size: usize) -> Stage2Model {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
        let mut params = Params::new();
        params.insert(EMBEDDING, Tensor::uniform(vocab_size, cfg.embed_dim, 0.1, &mut rng), true);
        init_lstm(&mut params, LSTM, cfg.embed_dim, cfg.lstm_hidden, &mut rng);
        init_mlp(&mut params, PROJECTION, &[cfg.lstm_hidden, cfg.action_dim], &mut rng);
        Stage2Model { params, config: cfg.clone(), vocab_size }
    }

    pub fn action_vectors(&self, tape: &mut Tape, bound: &Bound, tokens: &[TokenSeq]) -> std::result::Result<Var, ShapeError> {
        let steps = tokens.iter().map(|t| t.len).max().unwrap_or(0).max(1);
        let batch = tokens.len();
        let ids: Vec<usize> = (0..steps).flat_map(|t| tokens.iter().map(move |s| s.ids[t])).collect();
        let lens: Vec<usize> = tokens.iter().map(|t| t.len).collect();
        let embedded = tape.embedding(bound.var(EMBEDDING), &ids)?;
        let cell = lstm_final_cell(tape, bound, LSTM, embedded, batch, &lens)?;
        mlp(tape, bound, PROJECTION, 1, cell)
    }

    /// Action vectors for `tokens` as plain rows.
    pub fn vectors(&self, tokens: &[TokenSeq]) -> Vec<Vec<f64>> {
        chunked(tokens, EVAL_BATCH, |chunk| {
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let a = self.action_vectors(&mut tape, &bound, chunk).expect("shapes fixed by construction");
            rows_of(tape.value(a))
        })
    }
}

const EVAL_BATCH: usize = 256;

fn chunked<T, R>(items: &[T], size: usize, f: impl Fn(&[T]) -> Vec<R>) -> Vec<R> {
    items.chunks(size).flat_map(f).collect()
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows).map(|r| t.row_slice(r).to_vec()).collect()
}

fn scene_accuracy(preds: &[Vec<f64>], examples: &[Example], cfg: &TrainConfig) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits = preds
        .iter()
        .zip(examples)
        .filter(|(p, e)| scene_equal(&decode_scene(&activations(p), cfg.presence_threshold), &e.post_scene, cfg.coord_tol))
        .count();
    hits as f64 / examples.len() as f64
}

/// A relabeling of shapes, materials and colors plus one of the eight
/// symmetries of the square play area. Heights depend only on size, so
/// applying the same transform to both scenes of a pair keeps it valid.
#[derive(Debug, Clone)]
struct Symmetry {
    shapes: Vec<Shape>,
    materials: Vec<Material>,
    colors: Vec<Color>,
    flip_x: bool,
    flip_y: bool,
    swap_xy: bool,
}

impl Symmetry {
    fn sample(rng: &mut ChaCha8Rng) -> Symmetry {
        let mut shapes = Shape::ALL.to_vec();
        let mut materials = Material::ALL.to_vec();
        let mut colors = Color::ALL.to_vec();
        shapes.shuffle(rng);
        materials.shuffle(rng);
        colors.shuffle(rng);
        Symmetry { shapes, materials, colors, flip_x: rng.gen(), flip_y: rng.gen(), swap_xy: rng.gen() }
    }

    fn apply(&self, scene: &Scene) -> Scene {
        let objects = scene.objects.iter().map(|o| {
            let [mut x, mut y, z] = o.pos;
            if self.swap_xy {
                std::mem::swap(&mut x, &mut y);
            }
            if self.flip_x {
                x = -x;
            }
            if self.flip_y {
                y = -y;
            }
            SceneObject {
                shape: self.shapes[o.shape.index()],
                material: self.materials[o.material.index()],
                color: self.colors[o.color.index()],
                pos: [x, y, z],
                ..*o
            }
        });
        Scene::new(objects.collect())
    }
}

fn augmented(examples: &[Example], rng: &mut ChaCha8Rng) -> Vec<Example> {
    examples
        .iter()
        .map(|e| {
            let sym = Symmetry::sample(rng);
            Example { tokens: e.tokens, ..Example::pair(&sym.apply(&e.pre_scene), &sym.apply(&e.post_scene)) }
        })
        .collect()
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Stage 1 only; stage 2 skips it to save a pass over the data.
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl History {
    /// Stats of the epoch whose parameters were kept.
    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// Per-stage knobs of the training loop.
struct FitOptions {
    epochs: usize,
    seed: u64,
    augment: bool,
    track_train: bool,
}

type LossFn<'a> = dyn Fn(&mut Tape, &Bound, &[&Example]) -> std::result::Result<Var, ShapeError> + 'a;

/// Generic minibatch loop with early stopping on validation accuracy.
fn fit(
    params: &mut Params,
    cfg: &TrainConfig,
    opts: FitOptions,
    train: &[Example],
    val: Option<&[Example]>,
    loss: &LossFn,
    accuracy: &dyn Fn(&Params, &[Example]) -> f64,
) -> Result<History> {
    let FitOptions { epochs, seed, augment, track_train } = opts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut history = History::default();
    let mut best: Option<(f64, Params)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=epochs {
        if cfg.cosine_decay {
            let progress = (epoch - 1) as f64 / epochs.max(1) as f64;
            let frac = cfg.min_lr_fraction + (1.0 - cfg.min_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            opt.set_learning_rate(cfg.learning_rate * frac);
        }
        order.shuffle(&mut rng);
        let epoch_data = if augment { augmented(train, &mut rng) } else { Vec::new() };
        let source = if augment { &epoch_data[..] } else { train };
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &source[i]).collect();
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let l = loss(&mut tape, &bound, &batch)?;
            total += tape.value(l).item() * batch.len() as f64;
            let grads: ParamGrads = bound.grads(params, &tape.backward(l));
            opt.step(params, &grads);
        }
        let loss_mean = total / train.len().max(1) as f64;
        if !loss_mean.is_finite() {
            return Err(Error::Data(format!("training diverged at epoch {epoch}")));
        }
        let train_acc = track_train.then(|| accuracy(params, train));
        let val_acc = val.map(|v| accuracy(params, v));
        history.epochs.push(EpochStats { epoch, loss: loss_mean, train_acc, val_acc });
        match val_acc {
            Some(acc) if best.as_ref().is_none_or(|(b, _)| acc > *b) => {
                best = Some((acc, params.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            }
            Some(_) => {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
            None => history.best_epoch = epoch,
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    Ok(history)
}

/// Trains encoder and decoder jointly on scene pairs.
pub fn train_stage1(train: &[Example], val: Option<&[Example]>, cfg: &TrainConfig) -> Result<(Stage1Model, History)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("stage 1 needs at least one scene pair".into()));
    }
    let mut model = Stage1Model::init(cfg);
    let shape = model.clone();
    let loss = |tape: &mut Tape, bound: &Bound, batch: &[&Example]| shape.loss(tape, bound, batch);
    let accuracy = |p: &Params, ex: &[Example]| Stage1Model { params: p.clone(), config: cfg.clone() }.accuracy(ex);
    let opts = FitOptions { epochs: cfg.stage1_epochs, seed: cfg.seed ^ 0x5eed_0001, augment: cfg.augment, track_train: true };
    let history = fit(&mut model.params, cfg, opts, train, val, &loss, &accuracy)?;
    Ok((model, history))
}

/// A text encoder together with the decoder it was trained through.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub decoder: Params,
    pub text: Stage2Model,
}

impl Pipeline {
    /// Text encoder and decoder parameters in one set.
    pub fn full_params(&self) -> Params {
        let mut p = self.text.params.clone();
        p.extend_prefixed("", &self.decoder);
        p
    }

    fn from_full(full: &Params, cfg: &TrainConfig, vocab_size: usize) -> Pipeline {
        let mut decoder = Params::new();
        decoder.extend_prefixed(&format!("{DECODER}."), &full.with_prefix(&format!("{DECODER}.")));
        let mut text = Params::new();
        for (name, p) in full.iter().filter(|(n, _)| !n.starts_with(&format!("{DECODER}."))) {
            text.insert(name, p.value.clone(), p.trainable);
        }
        Pipeline { decoder, text: Stage2Model { params: text, config: cfg.clone(), vocab_size } }
    }

    /// Mean stage-2 scene loss of a batch; `bound` holds text encoder and
    /// decoder parameters.
    pub fn loss(cfg: &TrainConfig, tape: &mut Tape, bound: &Bound, text: &Stage2Model, batch: &[&Example]) -> std::result::Result<Var, ShapeError> {
        let tokens: Vec<TokenSeq> = batch.iter().map(|e| e.tokens.expect("text examples carry tokens")).collect();
        let pre = tape.constant(batch_tensor(batch.iter().map(|e| e.pre.clone())));
        let post = batch_tensor(batch.iter().map(|e| e.post.clone()));
        let action = text.action_vectors(tape, bound, &tokens)?;
        let pred = decoder_forward(tape, bound, cfg, pre, action)?;
        let loss = tape.scene_loss(pred, &post, cfg.coord_weight)?;
        let targets: Option<Vec<Vec<f64>>> = batch.iter().map(|e| e.action_target.clone()).collect();
        match targets {
            Some(t) if cfg.aux_weight > 0.0 => {
                let aux = tape.squared_error(action, &batch_tensor(t.into_iter()), None)?;
                let aux = tape.scale(aux, cfg.aux_weight / batch.len() as f64);
                tape.add(loss, aux)
            }
            _ => Ok(loss),
        }
    }

    /// Raw decoder outputs for each `(scene, tokens)` input.
    pub fn predict_rows(&self, inputs: &[(Vec<f64>, TokenSeq)]) -> Vec<Vec<f64>> {
        let full = self.full_params();
        chunked(inputs, EVAL_BATCH, |chunk| {
            let mut tape = Tape::new();
            let bound = full.bind(&mut tape);
            let tokens: Vec<TokenSeq> = chunk.iter().map(|(_, t)| *t).collect();
            let pre = tape.constant(batch_tensor(chunk.iter().map(|(p, _)| p.clone())));
            let action = self.text.action_vectors(&mut tape, &bound, &tokens).expect("shapes fixed by construction");
            let pred = decoder_forward(&mut tape, &bound, &self.text.config, pre, action).expect("shapes fixed by construction");
            rows_of(tape.value(pred))
        })
    }

    /// Predicted post-action scenes.
    pub fn predict_scenes(&self, inputs: &[(Vec<f64>, TokenSeq)]) -> Vec<Scene> {
        let cfg = &self.text.config;
        self.predict_rows(inputs).iter().map(|p| decode_scene(&activations(p), cfg.presence_threshold)).collect()
    }

    pub fn accuracy(&self, examples: &[Example]) -> f64 {
        let inputs: Vec<(Vec<f64>, TokenSeq)> = examples.iter().map(|e| (e.pre.clone(), e.tokens.expect("text examples carry tokens"))).collect();
        scene_accuracy(&self.predict_rows(&inputs), examples, &self.text.config)
    }

    /// `decode(decoder(encode(S), text(T)))` for a single input.
    pub fn predict_scene(&self, scene: &Scene, text: &str, vocab: &Vocabulary) -> Result<Scene> {
        let tokens = vocab.tokenize(text)?;
        Ok(self.predict_scenes(&[(encode_scene(scene), tokens)]).remove(0))
    }
}

/// Trains the text encoder through `decoder`. With `decoder_trainable` the
/// decoder is updated too (the no-stage-1 ablation); otherwise it is frozen.
pub fn train_text_encoder(
    train: &[Example],
    val: Option<&[Example]>,
    decoder: &Params,
    decoder_trainable: bool,
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<(Pipeline, History)> {
    cfg.validate()?;
    if train.iter().any(|e| e.tokens.is_none()) || train.is_empty() {
        return Err(Error::Data("stage 2 needs text examples".into()));
    }
    let mut decoder = decoder.clone();
    decoder.set_trainable(decoder_trainable);
    let mut full = Pipeline { decoder, text: Stage2Model::init(cfg, vocab_size) }.full_params();
    let text_shape = Stage2Model::init(cfg, vocab_size);
    let loss = |tape: &mut Tape, bound: &Bound, batch: &[&Example]| Pipeline::loss(cfg, tape, bound, &text_shape, batch);
    let accuracy = |p: &Params, ex: &[Example]| Pipeline::from_full(p, cfg, vocab_size).accuracy(ex);
    let opts = FitOptions { epochs: cfg.stage2_epochs, seed: cfg.seed ^ 0x5eed_0003, augment: false, track_train: false };
    let history = fit(&mut full, cfg, opts, train, val, &loss, &accuracy)?;
    Ok((Pipeline::from_full(&full, cfg, vocab_size), history))
}

/// Stage 2 proper: the stage-1 decoder stays frozen.
pub fn train_stage2(train: &[Example], val: Option<&[Example]>, stage1: &Stage1Model, vocab_size: usize, cfg: &TrainConfig) -> Result<(Pipeline, History)> {
    if cfg.aux_weight > 0.0 {
        let targets = stage1.action_vectors(train);
        let mut train = train.to_vec();
        for (e, a) in train.iter_mut().zip(targets) {
            e.action_target = Some(a);
        }
        return train_text_encoder(&train, val, &stage1.decoder(), false, vocab_size, cfg);
    }
    train_text_encoder(train, val, &stage1.decoder(), false, vocab_size, cfg)
}

/// The ablation without stage 1: a randomly initialized decoder trained
/// jointly with the text encoder under the same budget.
pub fn train_stage2_only(train: &[Example], val: Option<&[Example]>, vocab_size: usize, cfg: &TrainConfig) -> Result<(Pipeline, History)> {
    let random = Stage1Model::init(cfg).decoder();
    train_text_encoder(train, val, &random, true, vocab_size, cfg)
}

/// Sidecar stored next to a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub action_dim: usize,
    pub embed_dim: usize,
    pub vocab_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_hash: Option<String>,
    #[serde(default)]
    pub vocab_size: usize,
    pub config: TrainConfig,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

fn write_checkpoint(path: &Path, params: &Params, sidecar: &Sidecar) -> Result<()> {
    params.save(path)?;
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes") + "\n";
    write_atomic(&sidecar_path(path), text.as_bytes())
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let p = sidecar_path(path);
    serde_json::from_str(&read_to_string(&p)?).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
}

impl Stage1Model {
    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let sidecar = Sidecar {
            kind: "stage1".into(),
            action_dim: self.config.action_dim,
            embed_dim: self.config.embed_dim,
            vocab_hash: vocab.hash(),
            decoder_hash: Some(self.decoder().hash()),
            vocab_size: vocab.len(),
            config: self.config.clone(),
        };
        write_checkpoint(path, &self.params, &sidecar)
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Stage1Model> {
        let sidecar = read_sidecar(path)?;
        if sidecar.kind != "stage1" {
            return Err(Error::ModelMismatch(format!("{} is a {} checkpoint, expected stage1", path.display(), sidecar.kind)));
        }
        check_vocab(&sidecar, vocab)?;
        Ok(Stage1Model { params: Params::load(path)?, config: sidecar.config })
    }
}

fn check_vocab(sidecar: &Sidecar, vocab: &Vocabulary) -> Result<()> {
    if sidecar.vocab_hash != vocab.hash() {
        return Err(Error::ModelMismatch(format!("vocabulary hash {} does not match checkpoint {}", vocab.hash(), sidecar.vocab_hash)));
    }
    Ok(())
}

impl Pipeline {
    /// Saves the text encoder; the sidecar pins the decoder it was trained through.
    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let cfg = &self.text.config;
        let sidecar = Sidecar {
            kind: "stage2".into(),
            action_dim: cfg.action_dim,
            embed_dim: cfg.embed_dim,
            vocab_hash: vocab.hash(),
            decoder_hash: Some(self.decoder.hash()),
            vocab_size: self.text.vocab_size,
            config: cfg.clone(),
        };
        write_checkpoint(path, &self.text.params, &sidecar)
    }

    /// Loads a text encoder and checks it against `decoder` and `vocab`.
    pub fn load(path: &Path, decoder: Params, vocab: &Vocabulary) -> Result<Pipeline> {
        let sidecar = read_sidecar(path)?;
        if sidecar.kind != "stage2" {
            return Err(Error::ModelMismatch(format!("{} is a {} checkpoint, expected stage2", path.display(), sidecar.kind)));
        }
        check_vocab(&sidecar, vocab)?;
        if sidecar.decoder_hash.as_deref() != Some(decoder.hash().as_str()) {
            return Err(Error::ModelMismatch("decoder differs from the one the text encoder was trained through".into()));
        }
        let text = Stage2Model { params: Params::load(path)?, config: sidecar.config, vocab_size: sidecar.vocab_size };
        if text.params.get(EMBEDDING).map(|p| p.value.rows) != Some(vocab.len()) {
            return Err(Error::ModelMismatch("embedding table size differs from the vocabulary".into()));
        }
        let dec_in = decoder.get(&format!("{DECODER}.0.w")).map(|p| p.value.rows);
        if dec_in != Some(SCENE_DIM + text.config.action_dim) {
            return Err(Error::ModelMismatch("decoder input width does not match the action vector length".into()));
        }
        Ok(Pipeline { decoder, text })
    }
}
