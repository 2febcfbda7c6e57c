//! Question answering over predicted or oracle post-action scenes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answer::Answer;
use crate::arl::Pipeline;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::program::{self, exec_action, exec_question, Action, Question};
use crate::scene::{AttrKind, Scene};
use crate::tensorize::{encode_scene, TokenSeq, Vocabulary, SCENE_DIM};
use crate::worldgen::templates::invert_question;
use crate::worldgen::SampleRecord;

/// How question text becomes a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontEnd {
    /// Use the record's stored question program.
    OracleProgram,
    /// Invert the question template family.
    TemplateParse,
}

/// Maps generator question text back to its program.
pub fn parse_question(text: &str) -> Result<Question> {
    invert_question(text).ok_or_else(|| Error::UnparseableQuestion(text.to_string()))
}

/// Answer given when a question cannot be executed on a predicted scene,
/// e.g. a referent that the prediction lost: the first vocabulary class of
/// the question's result type.
pub fn fallback_answer(q: &Question) -> Answer {
    let kind = match q {
        Question::Count(_) => return Answer::Count(0),
        Question::Exist(_) | Question::EqualAttr(..) | Question::CompareInt(..) => return Answer::No,
        Question::Query(kind, _) => *kind,
    };
    Answer::all()
        .into_iter()
        .find(|a| {
            matches!(
                (kind, a),
                (AttrKind::Shape, Answer::Shape(_)) | (AttrKind::Size, Answer::Size(_)) | (AttrKind::Material, Answer::Material(_)) | (AttrKind::Color, Answer::Color(_))
            )
        })
        .expect("every attribute has answer classes")
}

/// Executes `q` on a predicted scene, falling back to [`fallback_answer`].
pub fn answer_predicted(q: &Question, predicted: &Scene) -> Answer {
    exec_question(q, predicted).unwrap_or_else(|_| fallback_answer(q))
}

/// `exec_question(q, exec_action(a, s))`.
pub fn answer_oracle(s: &Scene, action: &Action, question: &Question) -> Result<Answer> {
    let post = exec_action(action, s)?;
    Ok(exec_question(question, &post)?)
}

fn stored_program<T>(record: &SampleRecord, text: &Option<String>, what: &str, parse: fn(&str) -> std::result::Result<T, crate::error::ProgramError>) -> Result<T> {
    let text = text.as_deref().ok_or_else(|| Error::Data(format!("{}: {what} program missing (blind record)", record.id)))?;
    parse(text).map_err(|e| Error::Data(format!("{}: {e}", record.id)))
}

/// Oracle answer of a record from its stored programs.
pub fn record_oracle_answer(record: &SampleRecord) -> Result<Answer> {
    let action = stored_program(record, &record.action_program, "action", program::parse_action)?;
    let question = stored_program(record, &record.question_program, "question", program::parse_question)?;
    answer_oracle(&record.scene_pre, &action, &question)
}

/// Everything the learned path needs at test time.
#[derive(Debug, Clone)]
pub struct PipelineBundle {
    pub pipeline: Pipeline,
    pub vocab: Vocabulary,
    pub front_end: FrontEnd,
}

/// One line of batch inference output. `answer` is null when the question
/// could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub answer: Option<Answer>,
    pub scene_pred: Scene,
}

impl PipelineBundle {
    pub fn new(pipeline: Pipeline, vocab: Vocabulary, front_end: FrontEnd) -> Result<PipelineBundle> {
        let text = &pipeline.text;
        if text.vocab_size != vocab.len() {
            return Err(Error::ModelMismatch(format!("text encoder has {} words, vocabulary {}", text.vocab_size, vocab.len())));
        }
        let dec_in = pipeline.decoder.iter().find(|(n, _)| n.ends_with(".0.w")).map(|(_, p)| p.value.rows);
        if dec_in != Some(SCENE_DIM + text.config.action_dim) {
            return Err(Error::ModelMismatch("decoder and text encoder disagree on the action vector length".into()));
        }
        Ok(PipelineBundle { pipeline, vocab, front_end })
    }

    /// Learned-path answer for free text: predict the scene, parse the
    /// question, execute. Total once the question parses.
    pub fn answer(&self, s: &Scene, action_text: &str, question_text: &str) -> Result<Answer> {
        let question = parse_question(question_text)?;
        let predicted = self.pipeline.predict_scene(s, action_text, &self.vocab)?;
        Ok(answer_predicted(&question, &predicted))
    }

    fn question_for(&self, record: &SampleRecord) -> Result<Question> {
        match self.front_end {
            FrontEnd::TemplateParse => parse_question(&record.question_text),
            FrontEnd::OracleProgram => stored_program(record, &record.question_program, "question", program::parse_question),
        }
    }

    /// Batched learned-path predictions in record order.
    pub fn predict_records(&self, records: &[SampleRecord]) -> Result<Vec<Prediction>> {
        let inputs: Vec<(Vec<f64>, TokenSeq)> = records
            .iter()
            .map(|r| Ok((encode_scene(&r.scene_pre), self.vocab.tokenize(&r.action_text)?)))
            .collect::<Result<_>>()?;
        let scenes = self.pipeline.predict_scenes(&inputs);
        records
            .iter()
            .zip(scenes)
            .map(|(r, scene_pred)| {
                let answer = match self.question_for(r) {
                    Ok(q) => Some(answer_predicted(&q, &scene_pred)),
                    Err(Error::UnparseableQuestion(_)) => None,
                    Err(e) => return Err(e),
                };
                Ok(Prediction { id: r.id.clone(), answer, scene_pred })
            })
            .collect()
    }
}

/// Writes predictions as JSONL.
pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("predictions serialize"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
