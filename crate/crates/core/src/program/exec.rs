//! Symbolic execution of question and action programs.

use crate::answer::Answer;
use crate::error::ExecError;
use crate::scene::{
    grid_cells, is_free_ground_cell, validate_scene, Relation, Scene, SceneObject, MAX_OBJECTS, RELATION_MARGIN,
};

use super::{Action, IntCmp, IntExpr, ObjExpr, Placement, Question, SetExpr};

/// A set of object ids as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObjSet(u64);

impl ObjSet {
    pub fn all(n: usize) -> ObjSet {
        debug_assert!(n <= 64);
        ObjSet(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn single(id: usize) -> ObjSet {
        ObjSet(1 << id)
    }

    pub fn contains(self, id: usize) -> bool {
        self.0 >> id & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }
}

fn eval_set(expr: &SetExpr, s: &Scene) -> Result<ObjSet, ExecError> {
    Ok(match expr {
        SetExpr::Scene => ObjSet::all(s.len()),
        SetExpr::Filter(inner, value) => {
            let inner = eval_set(inner, s)?;
            ObjSet(inner.iter().filter(|&i| s.objects[i].attrs().has(*value)).fold(0, |m, i| m | 1 << i))
        }
        SetExpr::Relate(obj, rel) => {
            let anchor = eval_obj(obj, s)?;
            let pos = s.objects[anchor].pos;
            ObjSet(
                (0..s.len())
                    .filter(|&i| i != anchor && rel.holds(s.objects[i].pos, pos))
                    .fold(0, |m, i| m | 1 << i),
            )
        }
        SetExpr::And(a, b) => ObjSet(eval_set(a, s)?.0 & eval_set(b, s)?.0),
        SetExpr::Or(a, b) => ObjSet(eval_set(a, s)?.0 | eval_set(b, s)?.0),
        SetExpr::Not(a) => ObjSet(ObjSet::all(s.len()).0 & !eval_set(a, s)?.0),
    })
}

fn eval_obj(expr: &ObjExpr, s: &Scene) -> Result<usize, ExecError> {
    match expr {
        ObjExpr::Unique(inner) => {
            let set = eval_set(inner, s)?;
            match set.len() {
                1 => Ok(set.iter().next().expect("one member")),
                size => Err(ExecError::NonUnique { node: expr.to_string(), size }),
            }
        }
    }
}

fn eval_int(expr: &IntExpr, s: &Scene) -> Result<usize, ExecError> {
    match expr {
        IntExpr::Count(inner) => Ok(eval_set(inner, s)?.len()),
    }
}

/// Evaluates a set expression to the ids it selects.
pub fn resolve_set(expr: &SetExpr, s: &Scene) -> Result<ObjSet, ExecError> {
    eval_set(expr, s)
}

pub fn exec_question(q: &Question, s: &Scene) -> Result<Answer, ExecError> {
    Ok(match q {
        Question::Count(set) => Answer::count(eval_set(set, s)?.len()),
        Question::Exist(set) => Answer::boolean(!eval_set(set, s)?.is_empty()),
        Question::Query(kind, obj) => Answer::attribute(s.objects[eval_obj(obj, s)?].attrs().get(*kind)),
        Question::EqualAttr(kind, a, b) => {
            let (a, b) = (eval_obj(a, s)?, eval_obj(b, s)?);
            Answer::boolean(s.objects[a].attrs().get(*kind) == s.objects[b].attrs().get(*kind))
        }
        Question::CompareInt(cmp, a, b) => {
            let (a, b) = (eval_int(a, s)?, eval_int(b, s)?);
            Answer::boolean(match cmp {
                IntCmp::Equal => a == b,
                IntCmp::Greater => a > b,
                IntCmp::Less => a < b,
            })
        }
    })
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

const RAY_STEPS: [f64; 11] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0];
const LATERAL_OFFSETS: [f64; 5] = [0.0, 0.5, -0.5, 1.0, -1.0];

/// First free ground cell on the 0.5-spaced grid, scanning rows from the
/// back (`y = +3`) to the front and each row from left to right.
pub(crate) fn first_free_grid_cell(others: &[SceneObject]) -> Option<[f64; 2]> {
    grid_cells().find(|&cell| is_free_ground_cell(cell, others))
}

fn relative_position(rel: Relation, anchor: [f64; 3], others: &[SceneObject]) -> Option<[f64; 3]> {
    let (dir, lateral) = match rel {
        Relation::Left => ([-1.0, 0.0], [0.0, 1.0]),
        Relation::Right => ([1.0, 0.0], [0.0, 1.0]),
        Relation::Front => ([0.0, -1.0], [1.0, 0.0]),
        Relation::Behind => ([0.0, 1.0], [1.0, 0.0]),
        Relation::On => return None,
    };
    for step in RAY_STEPS {
        for offset in LATERAL_OFFSETS {
            let x = round2(anchor[0] + dir[0] * step + lateral[0] * offset);
            let y = round2(anchor[1] + dir[1] * step + lateral[1] * offset);
            if is_free_ground_cell([x, y], others) && rel.holds([x, y, 0.0], anchor) {
                return Some([x, y, 0.0]);
            }
        }
    }
    None
}

/// Top of the stack standing at `anchor`'s footprint.
fn stack_top(anchor: [f64; 3], others: &[SceneObject]) -> f64 {
    others
        .iter()
        .filter(|o| (o.pos[0] - anchor[0]).abs() <= RELATION_MARGIN && (o.pos[1] - anchor[1]).abs() <= RELATION_MARGIN)
        .map(SceneObject::top)
        .fold(0.0, f64::max)
}

/// Placement with its anchor already resolved against the input scene.
enum ResolvedPlacement {
    Absolute([f64; 2]),
    Relative(Relation, [f64; 3]),
    On([f64; 3]),
    Ground,
}

fn resolve_placement(p: &Placement, s: &Scene) -> Result<ResolvedPlacement, ExecError> {
    let anchor = |set: &SetExpr| -> Result<[f64; 3], ExecError> {
        let ids = eval_set(set, s)?;
        match ids.len() {
            1 => Ok(s.objects[ids.iter().next().expect("one member")].pos),
            size => Err(ExecError::NonUniqueAnchor { size }),
        }
    };
    Ok(match p {
        Placement::Absolute { x, y } => ResolvedPlacement::Absolute([*x, *y]),
        Placement::Relative(rel, set) => ResolvedPlacement::Relative(*rel, anchor(set)?),
        Placement::On(set) => ResolvedPlacement::On(anchor(set)?),
        Placement::Ground => ResolvedPlacement::Ground,
    })
}

fn place(p: &ResolvedPlacement, others: &[SceneObject]) -> Result<[f64; 3], ExecError> {
    match p {
        ResolvedPlacement::Absolute(xy) => {
            if is_free_ground_cell(*xy, others) {
                Ok([xy[0], xy[1], 0.0])
            } else {
                Err(ExecError::NoFreePosition)
            }
        }
        ResolvedPlacement::Relative(rel, anchor) => relative_position(*rel, *anchor, others).ok_or(ExecError::NoFreePosition),
        ResolvedPlacement::On(anchor) => Ok([anchor[0], anchor[1], round2(stack_top(*anchor, others))]),
        ResolvedPlacement::Ground => first_free_grid_cell(others)
            .map(|[x, y]| [x, y, 0.0])
            .ok_or(ExecError::NoFreePosition),
    }
}

/// Drops objects that lost their support; a dropped object that lands too
/// close to another one is moved to the first free grid cell.
fn settle(mut objects: Vec<SceneObject>) -> Vec<SceneObject> {
    objects.sort_by(|a, b| a.pos[2].total_cmp(&b.pos[2]).then_with(|| a.canonical_cmp(b)));
    let mut settled: Vec<SceneObject> = Vec::with_capacity(objects.len());
    for mut o in objects {
        if o.pos[2] > 0.0 && !settled.iter().any(|b| Relation::On.holds(o.pos, b.pos)) {
            o.pos[2] = round2(stack_top(o.pos, &settled));
            let supported = o.pos[2] == 0.0 || settled.iter().any(|b| Relation::On.holds(o.pos, b.pos));
            let clear = settled.iter().all(|b| {
                Relation::On.holds(o.pos, b.pos) || (o.pos[0] - b.pos[0]).hypot(o.pos[1] - b.pos[1]) >= crate::scene::MIN_DISTANCE
            });
            if !supported || !clear {
                if let Some([x, y]) = first_free_grid_cell(&settled) {
                    o.pos = [x, y, 0.0];
                }
            }
        }
        settled.push(o);
    }
    settled
}

fn finish(objects: Vec<SceneObject>) -> Result<Scene, ExecError> {
    let scene = Scene::new(settle(objects));
    let report = validate_scene(&scene);
    match report.violations.first() {
        None => Ok(scene),
        Some(v) => Err(ExecError::InvalidResult(v.to_string())),
    }
}

/// Applies an action program, returning the new canonical scene.
pub fn exec_action(a: &Action, s: &Scene) -> Result<Scene, ExecError> {
    match a {
        Action::Noop => Ok(s.canonical()),
        Action::AddObject(attrs, placement) => {
            if s.len() >= MAX_OBJECTS {
                return Err(ExecError::Capacity);
            }
            let resolved = resolve_placement(placement, s)?;
            let pos = place(&resolved, &s.objects)?;
            let mut objects = s.objects.clone();
            objects.push(SceneObject::new(*attrs, pos));
            finish(objects)
        }
        Action::Remove(set) => {
            let ids = eval_set(set, s)?;
            if ids.is_empty() {
                return Ok(s.canonical());
            }
            finish(s.objects.iter().enumerate().filter(|(i, _)| !ids.contains(*i)).map(|(_, o)| *o).collect())
        }
        Action::Change(set, value) => {
            let ids = eval_set(set, s)?;
            let mut objects = s.objects.clone();
            for i in ids.iter() {
                objects[i].set_attr(*value);
            }
            finish(objects)
        }
        Action::Move(set, placement) => {
            let ids = eval_set(set, s)?;
            if ids.is_empty() {
                return Ok(s.canonical());
            }
            let resolved = resolve_placement(placement, s)?;
            let mut objects: Vec<SceneObject> =
                s.objects.iter().enumerate().filter(|(i, _)| !ids.contains(*i)).map(|(_, o)| *o).collect();
            for i in ids.iter() {
                let pos = place(&resolved, &objects)?;
                objects.push(SceneObject { pos, ..s.objects[i] });
            }
            finish(objects)
        }
        Action::Seq(first, second) => exec_action(second, &exec_action(first, s)?),
    }
}
