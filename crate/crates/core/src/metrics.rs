//! Accuracy reports broken down by action and reasoning type.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::answer::Answer;
use crate::worldgen::{ActionType, SampleRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub correct: usize,
    pub total: usize,
    /// Percent, full precision.
    pub accuracy: f64,
}

impl Cell {
    pub fn new(name: impl Into<String>, correct: usize, total: usize) -> Cell {
        let accuracy = if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 };
        Cell { name: name.into(), correct, total, accuracy }
    }
}

/// Scoring outcome of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub answer_correct: bool,
    /// Whether the predicted scene matched; `None` without ground truth.
    pub scene_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub mode: String,
    pub overall: Cell,
    pub scene: Option<Cell>,
    /// Share of the most frequent answer in the split.
    pub majority_baseline: Cell,
    pub action_types: Vec<Cell>,
    pub reasoning_types: Vec<Cell>,
}

/// Cell name of an action type combination; pairs are unordered.
pub fn action_cell_name(types: &[ActionType]) -> String {
    let mut sorted = types.to_vec();
    sorted.sort();
    sorted.iter().map(|t| t.name()).collect::<Vec<_>>().join("+")
}

fn cells<K: Ord>(items: impl Iterator<Item = (K, String, bool)>) -> Vec<Cell> {
    let mut tally: BTreeMap<K, (String, usize, usize)> = BTreeMap::new();
    for (key, name, ok) in items {
        let e = tally.entry(key).or_insert((name, 0, 0));
        e.1 += ok as usize;
        e.2 += 1;
    }
    tally.into_values().map(|(name, c, t)| Cell::new(name, c, t)).collect()
}

impl MetricsReport {
    pub fn build(split: &str, mode: &str, records: &[SampleRecord], outcomes: &[Outcome]) -> MetricsReport {
        assert_eq!(records.len(), outcomes.len(), "one outcome per record");
        let correct = outcomes.iter().filter(|o| o.answer_correct).count();
        let scene = outcomes.iter().map(|o| o.scene_correct).collect::<Option<Vec<bool>>>();
        let mut answers: BTreeMap<Answer, usize> = BTreeMap::new();
        for r in records {
            *answers.entry(r.answer).or_default() += 1;
        }
        let majority = answers.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
        let majority_baseline = match majority {
            Some((a, &n)) => Cell::new(format!("majority ({a})"), n, records.len()),
            None => Cell::new("majority", 0, 0),
        };
        let pairs = records.iter().zip(outcomes);
        MetricsReport {
            split: split.to_string(),
            mode: mode.to_string(),
            overall: Cell::new("overall", correct, records.len()),
            scene: scene.filter(|_| !records.is_empty()).map(|s| Cell::new("scene", s.iter().filter(|&&b| b).count(), s.len())),
            majority_baseline,
            action_types: cells(pairs.clone().map(|(r, o)| {
                let mut key = r.action_types.clone();
                key.sort();
                (key, action_cell_name(&r.action_types), o.answer_correct)
            })),
            reasoning_types: cells(pairs.map(|(r, o)| (r.reasoning_type, r.reasoning_type.name().to_string(), o.answer_correct))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// Human-readable rendering, accuracies to one decimal.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, indent: &str, c: &Cell| {
            let label = format!("{indent}{}", c.name);
            let _ = writeln!(out, "{label:<28}{:>6.1}  ({}/{})", c.accuracy, c.correct, c.total);
        };
        let _ = writeln!(out, "split {}, mode {}", self.split, self.mode);
        row(&mut out, "", &self.overall);
        if let Some(scene) = &self.scene {
            row(&mut out, "", scene);
        }
        row(&mut out, "", &self.majority_baseline);
        let _ = writeln!(out, "by action type");
        for c in &self.action_types {
            row(&mut out, "  ", c);
        }
        let _ = writeln!(out, "by reasoning type");
        for c in &self.reasoning_types {
            row(&mut out, "  ", c);
        }
        out
    }
}
