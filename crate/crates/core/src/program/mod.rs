//! Functional programs over scenes.
//!
//! The same nested-call syntax describes questions
//! (`count(filter_color(filter_material(scene(),metal),red))`) and actions
//! (`seq(move(...),change_color(...,cyan))`). Programs are typed: set-valued,
//! object-valued and integer-valued expressions cannot be mixed, and the root
//! decides whether the program is a question or an action.

mod exec;
mod parse;

use std::fmt;

use crate::scene::{AttrKind, AttrValue, ObjectAttrs, Relation};

pub use exec::{exec_action, exec_question, resolve_set, ObjSet};
pub use parse::{parse_action, parse_program, parse_question};

/// A set-valued expression.
#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Scene,
    Filter(Box<SetExpr>, AttrValue),
    /// Objects standing in `Relation` to the given object.
    Relate(Box<ObjExpr>, Relation),
    And(Box<SetExpr>, Box<SetExpr>),
    Or(Box<SetExpr>, Box<SetExpr>),
    /// Complement relative to `scene()`.
    Not(Box<SetExpr>),
}

/// An object-valued expression.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjExpr {
    Unique(Box<SetExpr>),
}

/// An integer-valued expression.
#[derive(Debug, Clone, PartialEq)]
pub enum IntExpr {
    Count(Box<SetExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntCmp {
    Equal,
    Greater,
    Less,
}

impl IntCmp {
    pub fn name(self) -> &'static str {
        match self {
            IntCmp::Equal => "equal_integer",
            IntCmp::Greater => "greater_than",
            IntCmp::Less => "less_than",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Question {
    Count(SetExpr),
    Exist(SetExpr),
    Query(AttrKind, ObjExpr),
    EqualAttr(AttrKind, ObjExpr, ObjExpr),
    CompareInt(IntCmp, IntExpr, IntExpr),
}

/// Where `add_object` or `move` puts an object.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Absolute { x: f64, y: f64 },
    /// On the ground, in `Relation` (never `On`) to the single anchor object.
    Relative(Relation, SetExpr),
    /// On top of the single anchor object's stack.
    On(SetExpr),
    /// First free cell of the ground grid in reading order.
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Leaves the scene unchanged.
    Noop,
    AddObject(ObjectAttrs, Placement),
    Remove(SetExpr),
    Change(SetExpr, AttrValue),
    Move(SetExpr, Placement),
    Seq(Box<Action>, Box<Action>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Program {
    Question(Question),
    Action(Action),
}

impl SetExpr {
    pub fn filter(self, value: AttrValue) -> SetExpr {
        SetExpr::Filter(Box::new(self), value)
    }

    /// `scene()` narrowed by each value in turn (first value innermost).
    pub fn filtered(values: impl IntoIterator<Item = AttrValue>) -> SetExpr {
        values.into_iter().fold(SetExpr::Scene, SetExpr::filter)
    }

    pub fn and(self, other: SetExpr) -> SetExpr {
        SetExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: SetExpr) -> SetExpr {
        SetExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> SetExpr {
        SetExpr::Not(Box::new(self))
    }

    pub fn unique(self) -> ObjExpr {
        ObjExpr::Unique(Box::new(self))
    }

    pub fn count(self) -> IntExpr {
        IntExpr::Count(Box::new(self))
    }

    /// Number of AST nodes, literals included.
    pub fn size(&self) -> usize {
        match self {
            SetExpr::Scene => 1,
            SetExpr::Filter(s, _) => 2 + s.size(),
            SetExpr::Relate(o, _) => 2 + o.size(),
            SetExpr::And(a, b) | SetExpr::Or(a, b) => 1 + a.size() + b.size(),
            SetExpr::Not(a) => 1 + a.size(),
        }
    }

    /// Whether a logical connective (and/or/not) occurs anywhere below.
    pub fn uses_logic(&self) -> bool {
        match self {
            SetExpr::Scene => false,
            SetExpr::Filter(s, _) => s.uses_logic(),
            SetExpr::Relate(o, _) => match o.as_ref() {
                ObjExpr::Unique(s) => s.uses_logic(),
            },
            SetExpr::And(..) | SetExpr::Or(..) | SetExpr::Not(..) => true,
        }
    }
}

impl ObjExpr {
    pub fn size(&self) -> usize {
        match self {
            ObjExpr::Unique(s) => 1 + s.size(),
        }
    }
}

impl Question {
    pub fn size(&self) -> usize {
        match self {
            Question::Count(s) | Question::Exist(s) => 1 + s.size(),
            Question::Query(_, o) => 1 + o.size(),
            Question::EqualAttr(_, a, b) => 1 + a.size() + b.size(),
            Question::CompareInt(_, IntExpr::Count(a), IntExpr::Count(b)) => 3 + a.size() + b.size(),
        }
    }

    pub fn uses_logic(&self) -> bool {
        match self {
            Question::Count(s) | Question::Exist(s) => s.uses_logic(),
            Question::Query(_, ObjExpr::Unique(s)) => s.uses_logic(),
            Question::EqualAttr(_, ObjExpr::Unique(a), ObjExpr::Unique(b)) => a.uses_logic() || b.uses_logic(),
            Question::CompareInt(_, IntExpr::Count(a), IntExpr::Count(b)) => a.uses_logic() || b.uses_logic(),
        }
    }
}

impl Action {
    pub fn seq(first: Action, second: Action) -> Action {
        Action::Seq(Box::new(first), Box::new(second))
    }

    /// Number of primitive actions (a `seq` counts its children).
    pub fn hops(&self) -> usize {
        match self {
            Action::Seq(a, b) => a.hops() + b.hops(),
            _ => 1,
        }
    }
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Scene => f.write_str("scene()"),
            SetExpr::Filter(s, v) => write!(f, "filter_{}({s},{v})", v.kind().name()),
            SetExpr::Relate(o, r) => write!(f, "relate({o},{})", r.name()),
            SetExpr::And(a, b) => write!(f, "and({a},{b})"),
            SetExpr::Or(a, b) => write!(f, "or({a},{b})"),
            SetExpr::Not(a) => write!(f, "not({a})"),
        }
    }
}

impl fmt::Display for ObjExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjExpr::Unique(s) => write!(f, "unique({s})"),
        }
    }
}

impl fmt::Display for IntExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntExpr::Count(s) => write!(f, "count({s})"),
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Question::Count(s) => write!(f, "count({s})"),
            Question::Exist(s) => write!(f, "exist({s})"),
            Question::Query(k, o) => write!(f, "query_{}({o})", k.name()),
            Question::EqualAttr(k, a, b) => write!(f, "equal_{}({a},{b})", k.name()),
            Question::CompareInt(c, a, b) => write!(f, "{}({a},{b})", c.name()),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Absolute { x, y } => write!(f, "absolute({x},{y})"),
            Placement::Relative(r, s) => write!(f, "relative({},{s})", r.name()),
            Placement::On(s) => write!(f, "on({s})"),
            Placement::Ground => f.write_str("ground()"),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Noop => f.write_str("noop()"),
            Action::AddObject(a, p) => write!(f, "add_object({},{},{},{},{p})", a.shape, a.size, a.material, a.color),
            Action::Remove(s) => write!(f, "remove({s})"),
            Action::Change(s, v) => write!(f, "change_{}({s},{v})", v.kind().name()),
            Action::Move(s, p) => write!(f, "move({s},{p})"),
            Action::Seq(a, b) => write!(f, "seq({a},{b})"),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Question(q) => q.fmt(f),
            Program::Action(a) => a.fmt(f),
        }
    }
}

/// Canonical text of a program.
pub fn render_program(p: &Program) -> String {
    p.to_string()
}
