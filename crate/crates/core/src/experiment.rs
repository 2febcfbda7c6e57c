//! End-to-end runs: train both stages, score splits, ablate, sweep.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arl::{
    identity_examples, scene_pairs, text_examples, train_stage1, train_stage2, train_stage2_only, Example, History, Pipeline,
    Stage1Model, TrainConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, Outcome};
use crate::program::{exec_action, parse_action};
use crate::qa::{record_oracle_answer, FrontEnd, PipelineBundle, Prediction};
use crate::scene::scene_equal;
use crate::tensorize::Vocabulary;
use crate::worldgen::{read_split, ActionType, SampleRecord, Split};

/// The splits a run reads, test splits with oracle fields when present.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
    pub test_ordinary: Vec<SampleRecord>,
    pub test_2hop_ta: Vec<SampleRecord>,
    pub test_2hop_qh: Vec<SampleRecord>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Dataset> {
        Ok(Dataset {
            train: read_split(dir, Split::Train, true)?,
            val: read_split(dir, Split::Val, true)?,
            test_ordinary: read_split(dir, Split::TestOrdinary, true)?,
            test_2hop_ta: read_split(dir, Split::Test2HopTa, true)?,
            test_2hop_qh: read_split(dir, Split::Test2HopQh, true)?,
        })
    }

    pub fn from_splits(mut splits: std::collections::BTreeMap<Split, Vec<SampleRecord>>) -> Dataset {
        let mut take = |s| splits.remove(&s).unwrap_or_default();
        Dataset {
            train: take(Split::Train),
            val: take(Split::Val),
            test_ordinary: take(Split::TestOrdinary),
            test_2hop_ta: take(Split::Test2HopTa),
            test_2hop_qh: take(Split::Test2HopQh),
        }
    }

    pub fn split(&self, split: Split) -> &[SampleRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::TestOrdinary => &self.test_ordinary,
            Split::Test2HopTa => &self.test_2hop_ta,
            Split::Test2HopQh => &self.test_2hop_qh,
        }
    }
}

/// The first `n` records taking action types in turn, so that a prefix of a
/// balanced split stays balanced.
pub fn balanced_prefix(records: &[SampleRecord], n: usize) -> Vec<SampleRecord> {
    let mut queues: Vec<std::collections::VecDeque<&SampleRecord>> = ActionType::ALL.iter().map(|_| Default::default()).collect();
    for r in records {
        let slot = ActionType::ALL.iter().position(|t| r.action_types.first() == Some(t)).unwrap_or(0);
        queues[slot].push_back(r);
    }
    let mut out = Vec::with_capacity(n.min(records.len()));
    while out.len() < n && queues.iter().any(|q| !q.is_empty()) {
        for q in &mut queues {
            if out.len() < n {
                if let Some(r) = q.pop_front() {
                    out.push(r.clone());
                }
            }
        }
    }
    out
}

/// Stage-1 training pairs: scene pairs plus identity pairs.
pub fn stage1_examples(records: &[SampleRecord], cfg: &TrainConfig) -> Result<Vec<Example>> {
    let mut examples = scene_pairs(records)?;
    let n = if records.is_empty() { 0 } else { cfg.identity_pairs };
    examples.extend(records.iter().cycle().take(n).map(|r| Example::pair(&r.scene_pre, &r.scene_pre)));
    Ok(examples)
}

/// Stage-2 training examples: action texts plus identity texts.
pub fn stage2_examples(records: &[SampleRecord], cfg: &TrainConfig, vocab: &Vocabulary) -> Result<Vec<Example>> {
    let mut examples = text_examples(records, vocab)?;
    examples.extend(identity_examples(records, cfg.identity_pairs, vocab)?);
    Ok(examples)
}

/// Both stages trained on `train` with early stopping on `val`.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub stage1: Stage1Model,
    pub stage1_history: History,
    pub pipeline: Pipeline,
    pub stage2_history: History,
}

pub fn run_stage1(train: &[SampleRecord], val: &[SampleRecord], cfg: &TrainConfig) -> Result<(Stage1Model, History)> {
    let pairs = balanced_prefix(train, cfg.stage1_pairs);
    let examples = stage1_examples(&pairs, cfg)?;
    let val = scene_pairs(val)?;
    train_stage1(&examples, (!val.is_empty()).then_some(&val[..]), cfg)
}

pub fn run_stage2(train: &[SampleRecord], val: &[SampleRecord], stage1: &Stage1Model, cfg: &TrainConfig, vocab: &Vocabulary) -> Result<(Pipeline, History)> {
    let examples = stage2_examples(train, cfg, vocab)?;
    let val = text_examples(val, vocab)?;
    train_stage2(&examples, (!val.is_empty()).then_some(&val[..]), stage1, vocab.len(), cfg)
}

pub fn train_pipeline(train: &[SampleRecord], val: &[SampleRecord], cfg: &TrainConfig, vocab: &Vocabulary) -> Result<TrainedPipeline> {
    let (stage1, stage1_history) = run_stage1(train, val, cfg)?;
    let (pipeline, stage2_history) = run_stage2(train, val, &stage1, cfg, vocab)?;
    Ok(TrainedPipeline { stage1, stage1_history, pipeline, stage2_history })
}

/// The no-stage-1 ablation under the same data, budget and seed.
pub fn train_ablation(train: &[SampleRecord], val: &[SampleRecord], cfg: &TrainConfig, vocab: &Vocabulary) -> Result<(Pipeline, History)> {
    let examples = stage2_examples(train, cfg, vocab)?;
    let val = text_examples(val, vocab)?;
    train_stage2_only(&examples, (!val.is_empty()).then_some(&val[..]), vocab.len(), cfg)
}

/// Which path produces answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Learned,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Learned => "learned",
            Mode::Oracle => "oracle",
        }
    }

    pub fn from_name(name: &str) -> Option<Mode> {
        match name {
            "learned" => Some(Mode::Learned),
            "oracle" => Some(Mode::Oracle),
            _ => None,
        }
    }
}

/// Scores the oracle path: stored programs executed on the initial scene.
pub fn evaluate_oracle(split: &str, records: &[SampleRecord]) -> Result<MetricsReport> {
    let outcomes = records
        .iter()
        .map(|r| {
            let answer = record_oracle_answer(r)?;
            let action = parse_action(r.action_program.as_deref().unwrap_or_default()).map_err(|e| Error::Data(format!("{}: {e}", r.id)))?;
            let post = exec_action(&action, &r.scene_pre)?;
            let scene_correct = r.scene_post.as_ref().map(|p| scene_equal(&post, p, 1e-6));
            Ok(Outcome { answer_correct: answer == r.answer, scene_correct })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::build(split, Mode::Oracle.name(), records, &outcomes))
}

/// Scores the learned path and returns the per-record predictions.
pub fn evaluate_learned(split: &str, records: &[SampleRecord], bundle: &PipelineBundle) -> Result<(MetricsReport, Vec<Prediction>)> {
    let predictions = bundle.predict_records(records)?;
    let tol = bundle.pipeline.text.config.coord_tol;
    let outcomes: Vec<Outcome> = records
        .iter()
        .zip(&predictions)
        .map(|(r, p)| Outcome {
            answer_correct: p.answer == Some(r.answer),
            scene_correct: r.scene_post.as_ref().map(|post| scene_equal(&p.scene_pred, post, tol)),
        })
        .collect();
    Ok((MetricsReport::build(split, Mode::Learned.name(), records, &outcomes), predictions))
}

/// Fraction (percent) of held-out records whose predicted scene matches.
pub fn scene_accuracy(pipeline: &Pipeline, records: &[SampleRecord], vocab: &Vocabulary) -> Result<f64> {
    let examples = text_examples(records, vocab)?;
    Ok(100.0 * pipeline.accuracy(&examples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    VectorLength,
    DataSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::VectorLength => "vector_length",
            SweepAxis::DataSize => "data_size",
        }
    }

    pub fn from_name(name: &str) -> Option<SweepAxis> {
        match name {
            "vector_length" => Some(SweepAxis::VectorLength),
            "data_size" => Some(SweepAxis::DataSize),
            _ => None,
        }
    }

    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::VectorLength => (1..=8).map(|i| 25 * i).collect(),
            SweepAxis::DataSize => vec![500, 1000, 2000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: usize,
    /// Held-out (ordinary test) scene accuracy, percent.
    pub scene_acc: f64,
    /// Held-out learned-path answer accuracy, percent.
    pub qa_acc: f64,
}

/// Retrains both stages from scratch per value and scores the ordinary test
/// split. `progress` is called after each row.
pub fn sweep(axis: SweepAxis, values: &[usize], data: &Dataset, cfg: &TrainConfig, vocab: &Vocabulary, progress: &mut dyn FnMut(&SweepRow)) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut run = cfg.clone();
        let train = match axis {
            SweepAxis::VectorLength => {
                run.action_dim = v;
                data.train.clone()
            }
            SweepAxis::DataSize => {
                run.stage1_pairs = v;
                balanced_prefix(&data.train, v)
            }
        };
        let trained = train_pipeline(&train, &data.val, &run, vocab)?;
        let bundle = PipelineBundle::new(trained.pipeline, vocab.clone(), FrontEnd::TemplateParse)?;
        let (report, _) = evaluate_learned(Split::TestOrdinary.name(), &data.test_ordinary, &bundle)?;
        let row = SweepRow { axis_value: v, scene_acc: report.scene.map_or(0.0, |c| c.accuracy), qa_acc: report.overall.accuracy };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,scene_acc,qa_acc\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.axis_value, r.scene_acc, r.qa_acc);
    }
    out
}

/// Action vectors of every record's action text as CSV.
pub fn export_vectors(pipeline: &Pipeline, records: &[SampleRecord], vocab: &Vocabulary) -> Result<String> {
    let tokens = records.iter().map(|r| vocab.tokenize(&r.action_text)).collect::<std::result::Result<Vec<_>, _>>()?;
    let vectors = pipeline.text.vectors(&tokens);
    let dims = pipeline.text.config.action_dim;
    let mut out = String::from("id,action_types,action_text");
    for i in 0..dims {
        let _ = write!(out, ",a{i}");
    }
    out.push('\n');
    for (r, v) in records.iter().zip(vectors) {
        let types: Vec<&str> = r.action_types.iter().map(|t| t.name()).collect();
        let _ = write!(out, "{},{},\"{}\"", r.id, types.join("+"), r.action_text.replace('"', "\"\""));
        for x in v {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    Ok(out)
}
