//! The template bank. Question patterns are shared between generation and
//! [`invert_question`], so every generated question parses back to its program.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;

use super::lexicon::{self, Description};
use crate::program::{IntCmp, Question, SetExpr};
use crate::scene::{AttrKind, AttrValue, Relation};

/// Slot markers inside a pattern.
const PLURAL: &str = "{pl}";
const SINGULAR: &str = "{sg}";
const ATTR: &str = "{attr}";

/// Question shapes a pattern can denote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QForm {
    Count,
    Exist,
    Compare(IntCmp),
    EqualAttr(AttrKind),
    Query(AttrKind),
    OrCount,
    OrExist,
    AndCount,
    AndExist,
    NotCount,
    NotExist,
}

/// What a slot captured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filler {
    Np(Description),
    Attr(AttrValue),
}

#[derive(Debug, Clone)]
pub struct QuestionTemplate {
    pub form: QForm,
    pub pattern: String,
}

fn kind_noun(kind: AttrKind) -> &'static str {
    kind.name()
}

pub fn question_templates() -> &'static [QuestionTemplate] {
    static BANK: OnceLock<Vec<QuestionTemplate>> = OnceLock::new();
    BANK.get_or_init(|| {
        let mut bank: Vec<(QForm, String)> = Vec::new();
        let mut push = |form, patterns: &[&str]| bank.extend(patterns.iter().map(|p| (form, p.to_string())));
        push(QForm::Count, &["how many {pl} are there", "what number of {pl} are there", "how many {pl} are in the scene", "count the {pl}"]);
        push(QForm::Exist, &["are there any {pl}", "is there a {sg}", "is there any {sg}", "does a {sg} exist"]);
        push(
            QForm::Compare(IntCmp::Greater),
            &["are there more {pl} than {pl}", "is the number of {pl} greater than the number of {pl}"],
        );
        push(
            QForm::Compare(IntCmp::Less),
            &["are there fewer {pl} than {pl}", "is the number of {pl} less than the number of {pl}"],
        );
        push(
            QForm::Compare(IntCmp::Equal),
            &["are there the same number of {pl} and {pl}", "is the number of {pl} equal to the number of {pl}", "are there an equal number of {pl} and {pl}"],
        );
        push(QForm::OrCount, &["how many objects are either {attr} or {attr}", "how many things are either {attr} or {attr}", "what number of objects are either {attr} or {attr}"]);
        push(QForm::OrExist, &["are there any objects that are either {attr} or {attr}", "is there anything that is either {attr} or {attr}"]);
        push(QForm::AndCount, &["how many objects are both {attr} and {attr}", "how many things are both {attr} and {attr}", "what number of objects are both {attr} and {attr}"]);
        push(QForm::AndExist, &["are there any objects that are both {attr} and {attr}", "is there anything that is both {attr} and {attr}"]);
        push(QForm::NotCount, &["how many {pl} are not {attr}", "what number of {pl} are not {attr}"]);
        push(QForm::NotExist, &["are there any {pl} that are not {attr}", "is there a {sg} that is not {attr}"]);
        for kind in AttrKind::ALL {
            let k = kind_noun(kind);
            let mut equal = vec![
                format!("is the {{sg}} the same {k} as the {{sg}}"),
                format!("does the {{sg}} have the same {k} as the {{sg}}"),
                format!("do the {{sg}} and the {{sg}} have the same {k}"),
            ];
            let mut query = vec![format!("what {k} is the {{sg}}"), format!("what is the {k} of the {{sg}}"), format!("tell me the {k} of the {{sg}}")];
            if kind == AttrKind::Material {
                equal.push("is the {sg} made of the same material as the {sg}".to_string());
                query.push("what is the {sg} made of".to_string());
            }
            bank.extend(equal.into_iter().map(|p| (QForm::EqualAttr(kind), p)));
            bank.extend(query.into_iter().map(|p| (QForm::Query(kind), p)));
        }
        bank.into_iter().map(|(form, pattern)| QuestionTemplate { form, pattern }).collect()
    })
}

/// Builds the question program a form denotes from its slot fillers.
pub fn build_question(form: QForm, fillers: &[Filler]) -> Option<Question> {
    use Filler::{Attr, Np};
    let attr_set = |v: AttrValue| SetExpr::Scene.filter(v);
    let not_set = |d: &Description, v: AttrValue| {
        let rest = attr_set(v).not();
        if d.values().is_empty() {
            rest
        } else {
            d.to_set().and(rest)
        }
    };
    Some(match (form, fillers) {
        (QForm::Count, [Np(d)]) => Question::Count(d.to_set()),
        (QForm::Exist, [Np(d)]) => Question::Exist(d.to_set()),
        (QForm::Compare(c), [Np(a), Np(b)]) => Question::CompareInt(c, a.to_set().count(), b.to_set().count()),
        (QForm::EqualAttr(k), [Np(a), Np(b)]) => Question::EqualAttr(k, a.to_set().unique(), b.to_set().unique()),
        (QForm::Query(k), [Np(d)]) => Question::Query(k, d.to_set().unique()),
        (QForm::OrCount, [Attr(a), Attr(b)]) => Question::Count(attr_set(*a).or(attr_set(*b))),
        (QForm::OrExist, [Attr(a), Attr(b)]) => Question::Exist(attr_set(*a).or(attr_set(*b))),
        (QForm::AndCount, [Attr(a), Attr(b)]) => Question::Count(attr_set(*a).and(attr_set(*b))),
        (QForm::AndExist, [Attr(a), Attr(b)]) => Question::Exist(attr_set(*a).and(attr_set(*b))),
        (QForm::NotCount, [Np(d), Attr(v)]) => Question::Count(not_set(d, *v)),
        (QForm::NotExist, [Np(d), Attr(v)]) => Question::Exist(not_set(d, *v)),
        _ => return None,
    })
}

/// Fills a pattern's slots left to right with `fillers`, drawing synonyms from `rng`.
pub fn realize(pattern: &str, fillers: &[Filler], rng: &mut impl Rng) -> String {
    let mut fillers = fillers.iter();
    let words: Vec<String> = pattern
        .split(' ')
        .map(|token| match (token, fillers.next_if_slot(token)) {
            (PLURAL, Some(Filler::Np(d))) => d.realize(rng, true),
            (SINGULAR, Some(Filler::Np(d))) => d.realize(rng, false),
            (ATTR, Some(Filler::Attr(v))) => lexicon::value_words(*v).choose(rng).expect("nonempty").to_string(),
            (word, None) => word.to_string(),
            (slot, Some(f)) => panic!("filler {f:?} does not fit slot {slot}"),
        })
        .collect();
    words.join(" ")
}

trait NextIfSlot<'a> {
    fn next_if_slot(&mut self, token: &str) -> Option<&'a Filler>;
}

impl<'a, I: Iterator<Item = &'a Filler>> NextIfSlot<'a> for I {
    fn next_if_slot(&mut self, token: &str) -> Option<&'a Filler> {
        if is_slot(token) {
            Some(self.next().expect("pattern has more slots than fillers"))
        } else {
            None
        }
    }
}

fn is_slot(token: &str) -> bool {
    token.starts_with('{')
}

/// Longest noun phrase: three adjectives and a noun.
const MAX_NP_WORDS: usize = 4;

fn match_tokens(pattern: &[&str], words: &[&str], out: &mut Vec<Filler>) -> bool {
    let Some((&head, rest)) = pattern.split_first() else {
        return words.is_empty();
    };
    let mark = out.len();
    let spans: Vec<(Filler, usize)> = match head {
        PLURAL | SINGULAR => (1..=MAX_NP_WORDS.min(words.len()))
            .filter_map(|n| Description::parse(&words[..n], head == PLURAL).map(|d| (Filler::Np(d), n)))
            .collect(),
        ATTR => words.first().and_then(|w| lexicon::lookup_value(w)).map(|v| (Filler::Attr(v), 1)).into_iter().collect(),
        literal => {
            return words.first() == Some(&literal) && match_tokens(rest, &words[1..], out);
        }
    };
    for (filler, n) in spans {
        out.push(filler);
        if match_tokens(rest, &words[n..], out) {
            return true;
        }
        out.truncate(mark);
    }
    false
}

/// Inverts the question template family. Returns `None` for text outside it.
pub fn invert_question(text: &str) -> Option<Question> {
    let words: Vec<&str> = text.split_whitespace().collect();
    question_templates().iter().find_map(|t| {
        let pattern: Vec<&str> = t.pattern.split(' ').collect();
        let mut fillers = Vec::new();
        match_tokens(&pattern, &words, &mut fillers).then(|| build_question(t.form, &fillers)).flatten()
    })
}

/// Action wording. `{t}` is the target, `{o}` a new object with its
/// article, `{n}` a new object without one, `{p}` a placement phrase and
/// `{v}` a value phrase.
pub fn remove_templates() -> &'static [&'static str] {
    &["remove {t}", "take away {t}", "delete {t}", "get rid of {t}", "take {t} out of the scene", "throw away {t}"]
}

pub fn add_templates() -> &'static [&'static str] {
    &["add {o} {p}", "insert {o} {p}", "introduce {o} {p}", "create {o} {p}", "put a new {n} {p}", "place a new {n} {p}"]
}

pub fn move_templates() -> &'static [&'static str] {
    &["move {t} {p}", "put {t} {p}", "place {t} {p}", "shift {t} {p}", "relocate {t} {p}", "slide {t} {p}"]
}

pub fn change_templates(kind: AttrKind) -> &'static [&'static str] {
    match kind {
        AttrKind::Color => &["paint {t} {v}", "make {t} {v}", "color {t} {v}", "change the color of {t} to {v}", "turn {t} {v}", "recolor {t} {v}"],
        AttrKind::Material => &["make {t} {v}", "change the material of {t} to {v}", "turn {t} into {v}", "convert {t} to {v}", "make {t} out of {v}"],
        AttrKind::Size => &["make {t} {v}", "change the size of {t} to {v}", "resize {t} to {v}", "turn {t} {v}", "scale {t} to {v}"],
        AttrKind::Shape => &["turn {t} into a {v}", "change the shape of {t} to {v}", "replace {t} with a {v}", "make {t} a {v}", "reshape {t} into a {v}"],
    }
}

pub fn relation_phrases(rel: Relation) -> &'static [&'static str] {
    match rel {
        Relation::Left => &["to the left of {a}", "left of {a}"],
        Relation::Right => &["to the right of {a}", "right of {a}"],
        Relation::Front => &["in front of {a}"],
        Relation::Behind => &["behind {a}", "in back of {a}"],
        Relation::On => &["on {a}", "on top of {a}", "onto {a}"],
    }
}

pub const GROUND_PHRASES: [&str; 2] = ["", "to the scene"];
pub const TARGET_ARTICLES: [&str; 2] = ["the", "a"];
pub const PRONOUN: &str = "it";
pub const SEQ_JOINERS: [&str; 2] = ["then", "and then"];

/// Texts for the identity action.
pub const IDENTITY_TEXTS: [&str; 6] =
    ["do nothing", "leave the scene as it is", "keep everything unchanged", "change nothing", "leave everything as it is", "make no changes"];

/// Substitutes `{name}` markers and collapses the gaps left by empty phrases.
pub fn fill(pattern: &str, slots: &[(&str, &str)]) -> String {
    let mut text = pattern.to_string();
    for (name, value) in slots {
        text = text.replace(&format!("{{{name}}}"), value);
    }
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Every word any template can emit.
pub fn bank_words() -> Vec<String> {
    let mut patterns: Vec<&str> = question_templates().iter().map(|t| t.pattern.as_str()).collect();
    patterns.extend(remove_templates());
    patterns.extend(add_templates());
    patterns.extend(move_templates());
    for kind in AttrKind::ALL {
        patterns.extend(change_templates(kind));
    }
    for rel in Relation::ALL {
        patterns.extend(relation_phrases(rel));
    }
    patterns.extend(GROUND_PHRASES);
    patterns.extend(TARGET_ARTICLES);
    patterns.extend(SEQ_JOINERS);
    patterns.extend(IDENTITY_TEXTS);
    patterns.push(PRONOUN);
    let mut words: Vec<String> = patterns.iter().flat_map(|p| p.split_whitespace()).filter(|w| !is_slot(w)).map(str::to_string).collect();
    words.extend(lexicon::all_words().into_iter().map(str::to_string));
    words.sort();
    words.dedup();
    words
}
