//! Seeded generation of scenes, action texts, questions and whole datasets.

mod lexicon;
pub mod templates;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer::Answer;
use crate::error::{Error, GenError, Result};
use crate::io::{read_jsonl, write_atomic};
use crate::program::{exec_action, exec_question, parse_action, parse_question, resolve_set, Action, Placement, Question};
use crate::scene::{scene_equal, AttrKind, AttrValue, Color, Material, ObjectAttrs, Relation, Scene, SceneObject, Shape, Size, COORD_LIMIT, MAX_OBJECTS, MIN_DISTANCE};
use crate::tensorize::{Vocabulary, MAX_TOKENS};

pub use lexicon::Description;
pub use templates::IDENTITY_TEXTS;
use templates::{Filler, QForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "val")]
    Val,
    #[serde(rename = "test_ordinary")]
    TestOrdinary,
    #[serde(rename = "test_2hop_ta")]
    Test2HopTa,
    #[serde(rename = "test_2hop_qh")]
    Test2HopQh,
}

impl Split {
    pub const ALL: [Split; 5] = [Split::Train, Split::Val, Split::TestOrdinary, Split::Test2HopTa, Split::Test2HopQh];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::TestOrdinary => "test_ordinary",
            Split::Test2HopTa => "test_2hop_ta",
            Split::Test2HopQh => "test_2hop_qh",
        }
    }

    pub fn from_name(name: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_test(self) -> bool {
        matches!(self, Split::TestOrdinary | Split::Test2HopTa | Split::Test2HopQh)
    }

    fn action_hops(self) -> usize {
        if self == Split::Test2HopTa {
            2
        } else {
            1
        }
    }

    fn logic_questions(self) -> bool {
        self == Split::Test2HopQh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Add,
    Remove,
    Change,
    Move,
}

impl ActionType {
    pub const ALL: [ActionType; 4] = [ActionType::Add, ActionType::Remove, ActionType::Change, ActionType::Move];

    pub fn name(self) -> &'static str {
        match self {
            ActionType::Add => "add",
            ActionType::Remove => "remove",
            ActionType::Change => "change",
            ActionType::Move => "move",
        }
    }

    /// The six unordered pairs of distinct types.
    pub fn pairs() -> Vec<[ActionType; 2]> {
        let all = ActionType::ALL;
        (0..4).flat_map(|i| (i + 1..4).map(move |j| [all[i], all[j]])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningType {
    Count,
    Exist,
    CompareInteger,
    CompareAttribute,
    QueryAttribute,
    And,
    Or,
    Not,
}

impl ReasoningType {
    pub const SINGLE: [ReasoningType; 5] = [
        ReasoningType::Count,
        ReasoningType::Exist,
        ReasoningType::CompareInteger,
        ReasoningType::CompareAttribute,
        ReasoningType::QueryAttribute,
    ];
    pub const LOGIC: [ReasoningType; 3] = [ReasoningType::And, ReasoningType::Or, ReasoningType::Not];

    pub fn name(self) -> &'static str {
        match self {
            ReasoningType::Count => "count",
            ReasoningType::Exist => "exist",
            ReasoningType::CompareInteger => "compare_integer",
            ReasoningType::CompareAttribute => "compare_attribute",
            ReasoningType::QueryAttribute => "query_attribute",
            ReasoningType::And => "and",
            ReasoningType::Or => "or",
            ReasoningType::Not => "not",
        }
    }
}

/// One dataset tuple. Oracle fields are `None` in blind test files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub scene_pre: Scene,
    pub action_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_program: Option<String>,
    pub question_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_program: Option<String>,
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_post: Option<Scene>,
    pub split: Split,
    pub action_types: Vec<ActionType>,
    pub reasoning_type: ReasoningType,
}

impl SampleRecord {
    pub fn blind(&self) -> SampleRecord {
        SampleRecord { action_program: None, question_program: None, scene_post: None, ..self.clone() }
    }

    /// Re-executes the stored programs and compares with the stored results.
    pub fn check_oracle(&self) -> std::result::Result<(), String> {
        let (Some(ap), Some(qp), Some(post)) = (&self.action_program, &self.question_program, &self.scene_post) else {
            return Err(format!("{}: oracle fields missing", self.id));
        };
        let action = parse_action(ap).map_err(|e| e.to_string())?;
        let question = parse_question(qp).map_err(|e| e.to_string())?;
        let got = exec_action(&action, &self.scene_pre).map_err(|e| e.to_string())?;
        if !scene_equal(&got, post, 1e-9) {
            return Err(format!("{}: scene_post differs from executed action", self.id));
        }
        let answer = exec_question(&question, post).map_err(|e| e.to_string())?;
        if answer != self.answer {
            return Err(format!("{}: stored answer {} but executor gives {answer}", self.id, self.answer));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test_ordinary: usize,
    pub test_2hop_ta: usize,
    pub test_2hop_qh: usize,
    /// Quota-balance action types in every split.
    pub balance: bool,
    /// Strip oracle fields from test-split files.
    pub blind: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 7, train: 2000, val: 500, test_ordinary: 500, test_2hop_ta: 200, test_2hop_qh: 200, balance: true, blind: false }
    }
}

impl GenConfig {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::TestOrdinary => self.test_ordinary,
            Split::Test2HopTa => self.test_2hop_ta,
            Split::Test2HopQh => self.test_2hop_qh,
        }
    }
}

const PLACEMENT_TRIES: usize = 1000;

fn random_attrs(rng: &mut impl Rng) -> ObjectAttrs {
    ObjectAttrs {
        shape: *Shape::ALL.choose(rng).expect("nonempty"),
        size: *Size::ALL.choose(rng).expect("nonempty"),
        material: *Material::ALL.choose(rng).expect("nonempty"),
        color: *Color::ALL.choose(rng).expect("nonempty"),
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// A scene of 3 to 10 ground objects with uniform attributes and
/// rejection-sampled positions.
pub fn gen_scene(rng: &mut impl Rng) -> std::result::Result<Scene, GenError> {
    let n = rng.gen_range(3..=MAX_OBJECTS);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(n);
    let mut rejections = 0;
    while objects.len() < n {
        let x = round2(rng.gen_range(-COORD_LIMIT..=COORD_LIMIT));
        let y = round2(rng.gen_range(-COORD_LIMIT..=COORD_LIMIT));
        if objects.iter().all(|o| (o.pos[0] - x).hypot(o.pos[1] - y) >= MIN_DISTANCE) {
            objects.push(SceneObject::new(random_attrs(rng), [x, y, 0.0]));
        } else {
            rejections += 1;
            if rejections >= PLACEMENT_TRIES {
                return Err(GenError::PlacementExhausted(rejections));
            }
        }
    }
    Ok(Scene::new(objects))
}

fn is_supporting(s: &Scene, i: usize) -> bool {
    (0..s.len()).any(|j| j != i && Relation::On.holds(s.objects[j].pos, s.objects[i].pos))
}

/// A random object (optionally with nothing on top) and one of its unique descriptions.
fn pick_referent(
    rng: &mut impl Rng,
    s: &Scene,
    free_top: bool,
    exclude_kind: Option<AttrKind>,
    not: Option<usize>,
) -> std::result::Result<(usize, Description), GenError> {
    let candidates: Vec<(usize, Vec<Description>)> = (0..s.len())
        .filter(|&i| Some(i) != not && !(free_top && is_supporting(s, i)))
        .map(|i| (i, lexicon::unique_descriptions(s, i, exclude_kind)))
        .filter(|(_, ds)| !ds.is_empty())
        .collect();
    let (i, ds) = candidates.choose(rng).ok_or_else(|| GenError::NoReferent("no uniquely describable object".into()))?;
    Ok((*i, *ds.choose(rng).expect("nonempty")))
}

fn definite(rng: &mut impl Rng, d: &Description) -> String {
    format!("the {}", d.realize(rng, false))
}

fn target_phrase(rng: &mut impl Rng, d: &Description) -> String {
    format!("{} {}", TARGET_ARTICLE.choose(rng).expect("nonempty"), d.realize(rng, false))
}

use templates::TARGET_ARTICLES as TARGET_ARTICLE;

/// A placement relative to some object other than `not`, with its phrase.
fn gen_placement(rng: &mut impl Rng, s: &Scene, allow_ground: bool, not: Option<usize>) -> std::result::Result<(Placement, String), GenError> {
    if allow_ground && rng.gen_bool(0.25) {
        let phrase = templates::GROUND_PHRASES.choose(rng).expect("nonempty");
        return Ok((Placement::Ground, phrase.to_string()));
    }
    let rel = *Relation::ALL.choose(rng).expect("nonempty");
    let (_, anchor) = pick_referent(rng, s, rel == Relation::On, None, not)?;
    let phrase = templates::fill(templates::relation_phrases(rel).choose(rng).expect("nonempty"), &[("a", &definite(rng, &anchor))]);
    let placement = match rel {
        Relation::On => Placement::On(anchor.to_set()),
        rel => Placement::Relative(rel, anchor.to_set()),
    };
    Ok((placement, phrase))
}

/// A fixed target for the second hop: the object and the word naming it.
struct Pinned {
    index: usize,
    description: Description,
}

fn gen_single(rng: &mut impl Rng, s: &Scene, ty: ActionType, pinned: Option<&Pinned>) -> std::result::Result<(String, Action), GenError> {
    let target = |rng: &mut ChaCha8Rng, free_top: bool| -> std::result::Result<(usize, Description, String), GenError> {
        match pinned {
            Some(p) => Ok((p.index, p.description, templates::PRONOUN.to_string())),
            None => {
                let (i, d) = pick_referent(rng, s, free_top, None, None)?;
                let phrase = target_phrase(rng, &d);
                Ok((i, d, phrase))
            }
        }
    };
    // A local generator keeps the closure signature simple and stays seeded by `rng`.
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let rng = &mut local;
    let (text, action) = match ty {
        ActionType::Remove => {
            let (_, d, t) = target(rng, true)?;
            let pattern = templates::remove_templates().choose(rng).expect("nonempty");
            (templates::fill(pattern, &[("t", &t)]), Action::Remove(d.to_set()))
        }
        ActionType::Add => {
            if s.len() >= MAX_OBJECTS {
                return Err(GenError::NoReferent("scene is full".into()));
            }
            let attrs = random_attrs(rng);
            let (placement, p) = gen_placement(rng, s, true, None)?;
            let noun = Description::full(attrs).realize(rng, false);
            let pattern = templates::add_templates().choose(rng).expect("nonempty");
            let text = templates::fill(pattern, &[("o", &format!("a {noun}")), ("n", &noun), ("p", &p)]);
            (text, Action::AddObject(attrs, placement))
        }
        ActionType::Move => {
            let (i, d, t) = target(rng, true)?;
            let (placement, p) = gen_placement(rng, s, false, Some(i))?;
            let pattern = templates::move_templates().choose(rng).expect("nonempty");
            (templates::fill(pattern, &[("t", &t), ("p", &p)]), Action::Move(d.to_set(), placement))
        }
        ActionType::Change => {
            let kind = *AttrKind::ALL.choose(rng).expect("nonempty");
            let (i, d, t) = target(rng, kind == AttrKind::Size)?;
            let current = s.objects[i].attrs().get(kind);
            let options: Vec<AttrValue> = kind.values().into_iter().filter(|&v| v != current).collect();
            let value = *options.choose(rng).expect("every kind has two or more values");
            if kind == AttrKind::Size && is_supporting(s, i) {
                return Err(GenError::NoReferent("cannot resize a supporting object".into()));
            }
            let v = lexicon::value_words(value).choose(rng).expect("nonempty");
            let pattern = templates::change_templates(kind).choose(rng).expect("nonempty");
            (templates::fill(pattern, &[("t", &t), ("v", v)]), Action::Change(d.to_set(), value))
        }
    };
    exec_action(&action, s).map_err(|e| GenError::NoReferent(e.to_string()))?;
    Ok((text, action))
}

fn single_referent(set: &crate::program::SetExpr, s: &Scene) -> Option<usize> {
    let objs = resolve_set(set, s).ok()?;
    (objs.len() == 1).then(|| objs.iter().next().expect("one element"))
}

fn placement_applies(p: &Placement, s: &Scene, moved: Option<usize>) -> bool {
    match p {
        Placement::Absolute { .. } | Placement::Ground => true,
        Placement::Relative(_, set) => single_referent(set, s).is_some_and(|j| Some(j) != moved),
        Placement::On(set) => single_referent(set, s).is_some_and(|j| Some(j) != moved && !is_supporting(s, j)),
    }
}

/// Whether `a` meets the generator's preconditions on `s`: every referent
/// resolves to exactly one object, removed, moved and resized objects carry
/// nothing, "on" anchors have a free top, additions fit, and a change alters
/// the value.
pub fn action_applies(a: &Action, s: &Scene) -> bool {
    let ok = match a {
        Action::Noop => true,
        Action::AddObject(_, p) => s.len() < MAX_OBJECTS && placement_applies(p, s, None),
        Action::Remove(set) => single_referent(set, s).is_some_and(|i| !is_supporting(s, i)),
        Action::Move(set, p) => single_referent(set, s).is_some_and(|i| !is_supporting(s, i) && placement_applies(p, s, Some(i))),
        Action::Change(set, value) => single_referent(set, s).is_some_and(|i| {
            s.objects[i].attrs().get(value.kind()) != *value && (value.kind() != AttrKind::Size || !is_supporting(s, i))
        }),
        Action::Seq(first, second) => {
            return action_applies(first, s) && exec_action(first, s).is_ok_and(|mid| action_applies(second, &mid) && exec_action(second, &mid).is_ok());
        }
    };
    ok && exec_action(a, s).is_ok()
}

/// The single object of `after` that does not appear unchanged in `before`.
fn acted_object(before: &Scene, after: &Scene) -> Option<usize> {
    let fresh: Vec<usize> = (0..after.len())
        .filter(|&i| !before.objects.iter().any(|o| o.attrs() == after.objects[i].attrs() && o.pos == after.objects[i].pos))
        .collect();
    match fresh.as_slice() {
        [i] => Some(*i),
        _ => None,
    }
}

/// Samples one referring action (or two chained ones) of the given types.
pub fn gen_action_typed(rng: &mut impl Rng, s: &Scene, types: &[ActionType]) -> std::result::Result<(String, Action), GenError> {
    match types {
        [ty] => gen_single(rng, s, *ty, None),
        [first, second] => {
            let (t1, a1) = gen_single(rng, s, *first, None)?;
            let mid = exec_action(&a1, s).map_err(|e| GenError::NoReferent(e.to_string()))?;
            let pinned = match acted_object(s, &mid) {
                Some(i) if *second != ActionType::Add && rng.gen_bool(0.5) => {
                    let free = !is_supporting(&mid, i);
                    let ds = lexicon::unique_descriptions(&mid, i, None);
                    ds.choose(rng).filter(|_| free).map(|&description| Pinned { index: i, description })
                }
                _ => None,
            };
            let (t2, a2) = gen_single(rng, &mid, *second, pinned.as_ref())?;
            let joiner = templates::SEQ_JOINERS.choose(rng).expect("nonempty");
            let action = Action::seq(a1, a2);
            exec_action(&action, s).map_err(|e| GenError::NoReferent(e.to_string()))?;
            Ok((format!("{t1} {joiner} {t2}"), action))
        }
        _ => Err(GenError::NoReferent(format!("unsupported hop count {}", types.len()))),
    }
}

/// Samples `hops` distinct action types uniformly and an action of those types.
pub fn gen_action(rng: &mut impl Rng, s: &Scene, hops: usize) -> std::result::Result<(String, Action), GenError> {
    let types: Vec<ActionType> = ActionType::ALL.choose_multiple(rng, hops).copied().collect();
    gen_action_typed(rng, s, &types)
}

/// A description used in counting-style questions: usually drawn from a
/// present object so that answers are not dominated by zero.
fn random_description(rng: &mut impl Rng, s: &Scene, max_kinds: usize) -> Description {
    let n = rng.gen_range(0..=max_kinds);
    let mut kinds = AttrKind::ALL.to_vec();
    kinds.shuffle(rng);
    kinds.truncate(n);
    if !s.is_empty() && rng.gen_bool(0.75) {
        let o = s.objects.choose(rng).expect("nonempty");
        Description::subset(o.attrs(), &kinds)
    } else {
        Description::subset(random_attrs(rng), &kinds)
    }
}

fn random_value(rng: &mut impl Rng, s: &Scene, kind: Option<AttrKind>) -> AttrValue {
    let kind = kind.unwrap_or_else(|| *AttrKind::ALL.choose(rng).expect("nonempty"));
    match s.objects.choose(rng).filter(|_| rng.gen_bool(0.7)) {
        Some(o) => o.attrs().get(kind),
        None => *kind.values().choose(rng).expect("nonempty"),
    }
}

fn forms_for(rng: &mut impl Rng, rt: ReasoningType) -> QForm {
    let pick = |rng: &mut _, forms: &[QForm]| *forms.choose(rng).expect("nonempty");
    match rt {
        ReasoningType::Count => QForm::Count,
        ReasoningType::Exist => QForm::Exist,
        ReasoningType::CompareInteger => pick(
            rng,
            &[QForm::Compare(crate::program::IntCmp::Greater), QForm::Compare(crate::program::IntCmp::Less), QForm::Compare(crate::program::IntCmp::Equal)],
        ),
        ReasoningType::CompareAttribute => QForm::EqualAttr(*AttrKind::ALL.choose(rng).expect("nonempty")),
        ReasoningType::QueryAttribute => QForm::Query(*AttrKind::ALL.choose(rng).expect("nonempty")),
        ReasoningType::And => pick(rng, &[QForm::AndCount, QForm::AndExist]),
        ReasoningType::Or => pick(rng, &[QForm::OrCount, QForm::OrExist]),
        ReasoningType::Not => pick(rng, &[QForm::NotCount, QForm::NotExist]),
    }
}

fn degenerate(msg: impl Into<String>) -> GenError {
    GenError::DegenerateQuestion(msg.into())
}

fn fillers_for(rng: &mut impl Rng, s: &Scene, form: QForm) -> std::result::Result<Vec<Filler>, GenError> {
    Ok(match form {
        QForm::Count | QForm::Exist => vec![Filler::Np(random_description(rng, s, 3))],
        QForm::Compare(_) => {
            let a = random_description(rng, s, 2);
            let b = random_description(rng, s, 2);
            if a == b {
                return Err(degenerate("compared sets are identical"));
            }
            vec![Filler::Np(a), Filler::Np(b)]
        }
        QForm::EqualAttr(kind) => {
            let (i, a) = pick_referent(rng, s, false, Some(kind), None).map_err(|e| degenerate(e.to_string()))?;
            let (_, b) = pick_referent(rng, s, false, Some(kind), Some(i)).map_err(|e| degenerate(e.to_string()))?;
            vec![Filler::Np(a), Filler::Np(b)]
        }
        QForm::Query(kind) => {
            let (_, d) = pick_referent(rng, s, false, Some(kind), None).map_err(|e| degenerate(e.to_string()))?;
            vec![Filler::Np(d)]
        }
        QForm::OrCount | QForm::OrExist => {
            let a = random_value(rng, s, None);
            let b = random_value(rng, s, None);
            if a == b {
                return Err(degenerate("disjuncts are identical"));
            }
            vec![Filler::Attr(a), Filler::Attr(b)]
        }
        QForm::AndCount | QForm::AndExist => {
            let mut kinds = AttrKind::ALL.to_vec();
            kinds.shuffle(rng);
            vec![Filler::Attr(random_value(rng, s, Some(kinds[0]))), Filler::Attr(random_value(rng, s, Some(kinds[1])))]
        }
        QForm::NotCount | QForm::NotExist => {
            let d = random_description(rng, s, 2);
            let free: Vec<AttrKind> = AttrKind::ALL.into_iter().filter(|&k| !d.values().iter().any(|v| v.kind() == k)).collect();
            let kind = *free.choose(rng).expect("at most two kinds are used");
            vec![Filler::Np(d), Filler::Attr(random_value(rng, s, Some(kind)))]
        }
    })
}

/// Raw (unsaturated) set sizes a question counts.
fn counted_sizes(q: &Question, s: &Scene) -> Vec<usize> {
    let size = |set| resolve_set(set, s).map(|m| m.len()).unwrap_or(0);
    match q {
        Question::Count(set) => vec![size(set)],
        _ => Vec::new(),
    }
}

/// Samples a question of the given reasoning type about `s`.
pub fn gen_question_typed(rng: &mut impl Rng, s: &Scene, rt: ReasoningType) -> std::result::Result<(String, Question, Answer), GenError> {
    let form = forms_for(rng, rt);
    let fillers = fillers_for(rng, s, form)?;
    let question = templates::build_question(form, &fillers).ok_or_else(|| degenerate("fillers do not fit the form"))?;
    if counted_sizes(&question, s).into_iter().any(|n| n > crate::answer::MAX_COUNT as usize) {
        return Err(degenerate("count exceeds the answer vocabulary"));
    }
    let answer = exec_question(&question, s).map_err(|e| degenerate(e.to_string()))?;
    let candidates: Vec<&templates::QuestionTemplate> = templates::question_templates().iter().filter(|t| t.form == form).collect();
    let template = candidates.choose(rng).expect("every form has templates");
    let text = templates::realize(&template.pattern, &fillers, rng);
    Ok((text, question, answer))
}

/// Samples a reasoning type (logical compositions when `hops == 2`) and a question.
pub fn gen_question(rng: &mut impl Rng, s: &Scene, hops: usize) -> std::result::Result<(String, Question, Answer), GenError> {
    let pool: &[ReasoningType] = if hops >= 2 { &ReasoningType::LOGIC } else { &ReasoningType::SINGLE };
    let rt = *pool.choose(rng).expect("nonempty");
    gen_question_typed(rng, s, rt)
}

/// Running answer histogram for the balance guard, kept per reasoning type
/// because yes/no types could never pass a guard shared with counting.
#[derive(Debug, Default)]
pub struct AnswerGuard {
    counts: HashMap<Answer, usize>,
    total: usize,
}

const GUARD_FACTOR: f64 = 5.0;
const GUARD_WARMUP: usize = 20;

impl AnswerGuard {
    /// Whether accepting `a` keeps it within 5x of uniform over the answers used so far.
    pub fn admits(&self, a: Answer) -> bool {
        if self.total < GUARD_WARMUP {
            return true;
        }
        let used = self.counts.len() + usize::from(!self.counts.contains_key(&a));
        let after = self.counts.get(&a).copied().unwrap_or(0) + 1;
        after as f64 <= GUARD_FACTOR * (self.total + 1) as f64 / used as f64
    }

    pub fn record(&mut self, a: Answer) {
        *self.counts.entry(a).or_default() += 1;
        self.total += 1;
    }
}

fn record_rng(seed: u64, split: Split, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((split as u64 + 1) << 40) | index);
    rng
}

const RECORD_ATTEMPTS: usize = 400;

fn quota<T: Copy>(items: &[T], n: usize, rng: &mut impl Rng, balanced: bool) -> Vec<T> {
    let mut out: Vec<T> = if balanced {
        (0..n).map(|i| items[i % items.len()]).collect()
    } else {
        (0..n).map(|_| *items.choose(rng).expect("nonempty")).collect()
    };
    out.shuffle(rng);
    out
}

/// Generates one split's records deterministically from the config seed.
pub fn gen_split(cfg: &GenConfig, split: Split) -> Result<Vec<SampleRecord>> {
    let n = cfg.count(split);
    let mut plan = record_rng(cfg.seed, split, u64::from(u32::MAX));
    let action_plan: Vec<Vec<ActionType>> = if split.action_hops() == 2 {
        quota(&ActionType::pairs(), n, &mut plan, cfg.balance).into_iter().map(|p| p.to_vec()).collect()
    } else {
        quota(&ActionType::ALL, n, &mut plan, cfg.balance).into_iter().map(|t| vec![t]).collect()
    };
    let pool: &[ReasoningType] = if split.logic_questions() { &ReasoningType::LOGIC } else { &ReasoningType::SINGLE };
    let question_plan = quota(pool, n, &mut plan, true);

    let mut guards: HashMap<ReasoningType, AnswerGuard> = HashMap::new();
    let mut records = Vec::with_capacity(n);
    for (index, (types, rt)) in action_plan.into_iter().zip(question_plan).enumerate() {
        let mut rng = record_rng(cfg.seed, split, index as u64);
        let guard = guards.entry(rt).or_default();
        let record = (0..RECORD_ATTEMPTS)
            .find_map(|attempt| {
                let mut types = types.clone();
                types.shuffle(&mut rng);
                let pre = gen_scene(&mut rng).ok()?;
                let (action_text, action) = gen_action_typed(&mut rng, &pre, &types).ok()?;
                let post = exec_action(&action, &pre).ok()?;
                let (question_text, question, answer) = gen_question_typed(&mut rng, &post, rt).ok()?;
                let fits = |t: &str| t.split_whitespace().count() <= MAX_TOKENS;
                if !fits(&action_text) || !fits(&question_text) {
                    return None;
                }
                // The guard relaxes once most attempts are spent so generation always terminates.
                if attempt < RECORD_ATTEMPTS / 2 && !guard.admits(answer) {
                    return None;
                }
                Some(SampleRecord {
                    id: format!("{}-{index:06}", split.name()),
                    scene_pre: pre,
                    action_text,
                    action_program: Some(action.to_string()),
                    question_text,
                    question_program: Some(question.to_string()),
                    answer,
                    scene_post: Some(post),
                    split,
                    action_types: types,
                    reasoning_type: rt,
                })
            })
            .ok_or_else(|| Error::Data(format!("could not generate {} record {index}", split.name())))?;
        guard.record(record.answer);
        records.push(record);
    }
    Ok(records)
}

/// All splits, in [`Split::ALL`] order.
pub fn gen_dataset(cfg: &GenConfig) -> Result<BTreeMap<Split, Vec<SampleRecord>>> {
    Split::ALL.into_iter().map(|s| Ok((s, gen_split(cfg, s)?))).collect()
}

/// Fraction of records whose (action text, question text) pair is unique.
pub fn uniqueness_ratio<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> f64 {
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for r in records {
        seen.insert((r.action_text.as_str(), r.question_text.as_str()));
        total += 1;
    }
    if total == 0 {
        1.0
    } else {
        seen.len() as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub config: GenConfig,
    pub counts: BTreeMap<String, usize>,
    pub uniqueness_ratio: f64,
    pub vocab_size: usize,
    pub vocab_hash: String,
}

pub fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.jsonl", split.name()))
}

pub fn oracle_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.oracle.jsonl", split.name()))
}

fn to_jsonl<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> String {
    records.into_iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
}

/// Generates every split and writes JSONL files, `metadata.json` and `vocab.json` into `dir`.
pub fn write_dataset(cfg: &GenConfig, dir: &Path) -> Result<DatasetMetadata> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = gen_dataset(cfg)?;
    let vocab = Vocabulary::from_template_bank();
    let mut written = Vec::new();
    let result = (|| {
        for (split, records) in &data {
            if cfg.blind && split.is_test() {
                let path = oracle_path(dir, *split);
                write_atomic(&path, to_jsonl(records).as_bytes())?;
                written.push(path);
                let path = split_path(dir, *split);
                write_atomic(&path, to_jsonl(records.iter().map(SampleRecord::blind).collect::<Vec<_>>().iter()).as_bytes())?;
                written.push(path);
            } else {
                let path = split_path(dir, *split);
                write_atomic(&path, to_jsonl(records).as_bytes())?;
                written.push(path);
            }
        }
        let meta = DatasetMetadata {
            config: cfg.clone(),
            counts: data.iter().map(|(s, r)| (s.name().to_string(), r.len())).collect(),
            uniqueness_ratio: uniqueness_ratio(data.values().flatten()),
            vocab_size: vocab.len(),
            vocab_hash: vocab.hash(),
        };
        let path = dir.join("vocab.json");
        write_atomic(&path, vocab.to_json().as_bytes())?;
        written.push(path);
        let path = dir.join("metadata.json");
        write_atomic(&path, (serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n").as_bytes())?;
        written.push(path);
        Ok(meta)
    })();
    if result.is_err() {
        for path in written {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

/// Reads one split; prefers the oracle file when `oracle` is set and it exists.
pub fn read_split(dir: &Path, split: Split, oracle: bool) -> Result<Vec<SampleRecord>> {
    let full = oracle_path(dir, split);
    let path = if oracle && full.exists() { full } else { split_path(dir, split) };
    read_jsonl(&path)
}
