//! Closed-world scene graphs: attribute taxonomy, spatial predicates,
//! validation and order-insensitive equality.
//!
//! A [`Scene`] is an ordered list of [`SceneObject`]s. An object's id is its
//! index in that list, so ids are only stable within one canonical form;
//! every mutation goes through [`Scene::new`], which re-sorts the objects.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SceneError;

/// Maximum number of objects a scene may hold.
pub const MAX_OBJECTS: usize = 10;
/// Margin used by the left/right/front/behind/on predicates.
pub const RELATION_MARGIN: f64 = 0.25;
/// Minimum xy-plane center distance between two objects not stacked on each other.
pub const MIN_DISTANCE: f64 = 0.5;
/// Objects live in `[-COORD_LIMIT, COORD_LIMIT]` on both ground axes.
pub const COORD_LIMIT: f64 = 3.0;

/// Which of the four categorical attributes a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Shape,
    Size,
    Material,
    Color,
}

impl AttrKind {
    pub const ALL: [AttrKind; 4] = [AttrKind::Shape, AttrKind::Size, AttrKind::Material, AttrKind::Color];

    pub fn name(self) -> &'static str {
        match self {
            AttrKind::Shape => "shape",
            AttrKind::Size => "size",
            AttrKind::Material => "material",
            AttrKind::Color => "color",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Number of values of this kind.
    pub fn cardinality(self) -> usize {
        match self {
            AttrKind::Shape => Shape::ALL.len(),
            AttrKind::Size => Size::ALL.len(),
            AttrKind::Material => Material::ALL.len(),
            AttrKind::Color => Color::ALL.len(),
        }
    }

    /// All values of this kind, in enum order.
    pub fn values(self) -> Vec<AttrValue> {
        match self {
            AttrKind::Shape => Shape::ALL.iter().map(|&v| AttrValue::Shape(v)).collect(),
            AttrKind::Size => Size::ALL.iter().map(|&v| AttrValue::Size(v)).collect(),
            AttrKind::Material => Material::ALL.iter().map(|&v| AttrValue::Material(v)).collect(),
            AttrKind::Color => Color::ALL.iter().map(|&v| AttrValue::Color(v)).collect(),
        }
    }
}

macro_rules! attribute_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Every variant in the documented (on-disk) order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }

            /// Position in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

attribute_enum!(Shape { Cube => "cube", Sphere => "sphere", Cylinder => "cylinder" });
attribute_enum!(Size { Small => "small", Big => "big" });
attribute_enum!(Material { Metal => "metal", Rubber => "rubber" });
attribute_enum!(Color {
    Red => "red",
    Green => "green",
    Gray => "gray",
    Blue => "blue",
    Brown => "brown",
    Yellow => "yellow",
    Purple => "purple",
    Cyan => "cyan",
});

impl Size {
    /// Vertical extent of an object, used to stack objects on top of each other.
    pub fn height(self) -> f64 {
        match self {
            Size::Small => 0.7,
            Size::Big => 1.4,
        }
    }
}

/// A single categorical attribute value of any kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrValue {
    Shape(Shape),
    Size(Size),
    Material(Material),
    Color(Color),
}

impl AttrValue {
    pub fn kind(self) -> AttrKind {
        match self {
            AttrValue::Shape(_) => AttrKind::Shape,
            AttrValue::Size(_) => AttrKind::Size,
            AttrValue::Material(_) => AttrKind::Material,
            AttrValue::Color(_) => AttrKind::Color,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttrValue::Shape(v) => v.name(),
            AttrValue::Size(v) => v.name(),
            AttrValue::Material(v) => v.name(),
            AttrValue::Color(v) => v.name(),
        }
    }

    /// Parses `name` as a value of the given kind.
    pub fn parse(kind: AttrKind, name: &str) -> Option<Self> {
        match kind {
            AttrKind::Shape => Shape::from_name(name).map(AttrValue::Shape),
            AttrKind::Size => Size::from_name(name).map(AttrValue::Size),
            AttrKind::Material => Material::from_name(name).map(AttrValue::Material),
            AttrKind::Color => Color::from_name(name).map(AttrValue::Color),
        }
    }

    /// Parses `name` as a value of whichever kind spells it that way.
    pub fn parse_any(name: &str) -> Option<Self> {
        AttrKind::ALL.into_iter().find_map(|k| Self::parse(k, name))
    }

    pub fn index(self) -> usize {
        match self {
            AttrValue::Shape(v) => v.index(),
            AttrValue::Size(v) => v.index(),
            AttrValue::Material(v) => v.index(),
            AttrValue::Color(v) => v.index(),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spatial relation between two objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Left,
    Right,
    Front,
    Behind,
    On,
}

impl Relation {
    pub const ALL: [Relation; 5] = [Relation::Left, Relation::Right, Relation::Front, Relation::Behind, Relation::On];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
            Relation::On => "on",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Evaluates the relation "`a` is `self` of `b`" on raw positions.
    pub fn holds(self, a: [f64; 3], b: [f64; 3]) -> bool {
        let t = RELATION_MARGIN;
        match self {
            Relation::Left => a[0] < b[0] - t,
            Relation::Right => a[0] > b[0] + t,
            Relation::Front => a[1] < b[1] - t,
            Relation::Behind => a[1] > b[1] + t,
            Relation::On => (a[0] - b[0]).abs() <= t && (a[1] - b[1]).abs() <= t && a[2] > b[2],
        }
    }
}

/// The four categorical attributes of an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectAttrs {
    pub shape: Shape,
    pub size: Size,
    pub material: Material,
    pub color: Color,
}

impl ObjectAttrs {
    pub fn get(&self, kind: AttrKind) -> AttrValue {
        match kind {
            AttrKind::Shape => AttrValue::Shape(self.shape),
            AttrKind::Size => AttrValue::Size(self.size),
            AttrKind::Material => AttrValue::Material(self.material),
            AttrKind::Color => AttrValue::Color(self.color),
        }
    }

    pub fn set(&mut self, value: AttrValue) {
        match value {
            AttrValue::Shape(v) => self.shape = v,
            AttrValue::Size(v) => self.size = v,
            AttrValue::Material(v) => self.material = v,
            AttrValue::Color(v) => self.color = v,
        }
    }

    pub fn has(&self, value: AttrValue) -> bool {
        self.get(value.kind()) == value
    }

    /// All 96 attribute combinations.
    pub fn all() -> impl Iterator<Item = ObjectAttrs> {
        Shape::ALL.iter().flat_map(|&shape| {
            Size::ALL.iter().flat_map(move |&size| {
                Material::ALL.iter().flat_map(move |&material| {
                    Color::ALL.iter().map(move |&color| ObjectAttrs { shape, size, material, color })
                })
            })
        })
    }
}

/// An attributed object with a 3D position in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub size: Size,
    pub material: Material,
    pub color: Color,
    pub pos: [f64; 3],
}

impl SceneObject {
    pub fn new(attrs: ObjectAttrs, pos: [f64; 3]) -> Self {
        SceneObject { shape: attrs.shape, size: attrs.size, material: attrs.material, color: attrs.color, pos }
    }

    pub fn attrs(&self) -> ObjectAttrs {
        ObjectAttrs { shape: self.shape, size: self.size, material: self.material, color: self.color }
    }

    pub fn set_attr(&mut self, value: AttrValue) {
        let mut attrs = self.attrs();
        attrs.set(value);
        *self = SceneObject::new(attrs, self.pos);
    }

    /// Height of this object's top surface.
    pub fn top(&self) -> f64 {
        self.pos[2] + self.size.height()
    }

    /// Canonical ordering key: position first, then categorical attributes.
    pub fn canonical_cmp(&self, other: &SceneObject) -> Ordering {
        self.pos[0]
            .total_cmp(&other.pos[0])
            .then_with(|| self.pos[1].total_cmp(&other.pos[1]))
            .then_with(|| self.pos[2].total_cmp(&other.pos[2]))
            .then_with(|| self.attrs().cmp(&other.attrs()))
    }
}

/// A scene: objects in canonical order, id = index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Builds a scene in canonical order.
    pub fn new(mut objects: Vec<SceneObject>) -> Self {
        objects.sort_by(SceneObject::canonical_cmp);
        Scene { objects }
    }

    /// Builds a scene keeping the given order (used for permutation tests and
    /// for JSON input that has not been canonicalized yet).
    pub fn from_unordered(objects: Vec<SceneObject>) -> Self {
        Scene { objects }
    }

    pub fn empty() -> Self {
        Scene::default()
    }

    pub fn canonical(&self) -> Scene {
        Scene::new(self.objects.clone())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&SceneObject, SceneError> {
        self.objects.get(id).ok_or(SceneError::NoSuchObject(id))
    }

    pub fn spatial_relation(&self, a: usize, b: usize, rel: Relation) -> Result<bool, SceneError> {
        spatial_relation(self, a, b, rel)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_scene(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Scene, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// `true` when object `a` rests on `b` (directly or further up the stack).
fn is_on(a: &SceneObject, b: &SceneObject) -> bool {
    Relation::On.holds(a.pos, b.pos)
}

fn xy_distance(a: &SceneObject, b: &SceneObject) -> f64 {
    (a.pos[0] - b.pos[0]).hypot(a.pos[1] - b.pos[1])
}

/// Checks whether `pos` would be a legal ground position given `others`.
pub(crate) fn is_free_ground_cell(pos: [f64; 2], others: &[SceneObject]) -> bool {
    pos[0].abs() <= COORD_LIMIT
        && pos[1].abs() <= COORD_LIMIT
        && others.iter().all(|o| (o.pos[0] - pos[0]).hypot(o.pos[1] - pos[1]) >= MIN_DISTANCE)
}

/// Spacing of the grid used to resolve placement conflicts.
pub(crate) const GRID_STEP: f64 = 0.5;

/// Ground grid cells in reading order: rows from the back (`y = +3`) to the
/// front, each row from left to right.
pub(crate) fn grid_cells() -> impl Iterator<Item = [f64; 2]> {
    let cells = (2.0 * COORD_LIMIT / GRID_STEP).round() as i32;
    (0..=cells).flat_map(move |row| (0..=cells).map(move |col| [-COORD_LIMIT + col as f64 * GRID_STEP, COORD_LIMIT - row as f64 * GRID_STEP]))
}

/// The free grid cell closest to `pos`; ties go to the earlier cell in reading order.
pub(crate) fn nearest_free_cell(pos: [f64; 2], others: &[SceneObject]) -> Option<[f64; 2]> {
    grid_cells()
        .filter(|&c| is_free_ground_cell(c, others))
        .map(|c| ((c[0] - pos[0]).hypot(c[1] - pos[1]), c))
        .fold(None, |best: Option<(f64, [f64; 2])>, (d, c)| match best {
            Some((bd, _)) if bd <= d => best,
            _ => Some((d, c)),
        })
        .map(|(_, c)| c)
}

/// Evaluates "`a` is `rel` of `b`" for two distinct objects of `s`.
pub fn spatial_relation(s: &Scene, a: usize, b: usize, rel: Relation) -> Result<bool, SceneError> {
    let oa = s.get(a)?;
    let ob = s.get(b)?;
    if a == b {
        return Err(SceneError::SameObject(a));
    }
    Ok(rel.holds(oa.pos, ob.pos))
}

/// One violated scene invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Capacity { count: usize },
    NonFinite { id: usize },
    OutOfBounds { id: usize },
    BelowGround { id: usize },
    /// `z > 0` without any object underneath.
    Floating { id: usize },
    MinDistance { a: usize, b: usize },
}

impl Violation {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::Capacity { .. } => "capacity",
            Violation::NonFinite { .. } => "non-finite",
            Violation::OutOfBounds { .. } => "out-of-bounds",
            Violation::BelowGround { .. } => "below-ground",
            Violation::Floating { .. } => "floating",
            Violation::MinDistance { .. } => "min-distance",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Capacity { count } => write!(f, "capacity: {count} objects > {MAX_OBJECTS}"),
            Violation::NonFinite { id } => write!(f, "non-finite: object {id}"),
            Violation::OutOfBounds { id } => write!(f, "out-of-bounds: object {id}"),
            Violation::BelowGround { id } => write!(f, "below-ground: object {id}"),
            Violation::Floating { id } => write!(f, "floating: object {id} has z > 0 but nothing under it"),
            Violation::MinDistance { a, b } => write!(f, "min-distance: objects {a} and {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.violations.iter().map(Violation::code).collect()
    }
}

pub fn validate_scene(s: &Scene) -> ValidationReport {
    let mut violations = Vec::new();
    if s.len() > MAX_OBJECTS {
        violations.push(Violation::Capacity { count: s.len() });
    }
    for (id, o) in s.objects.iter().enumerate() {
        if !o.pos.iter().all(|c| c.is_finite()) {
            violations.push(Violation::NonFinite { id });
            continue;
        }
        if o.pos[0].abs() > COORD_LIMIT || o.pos[1].abs() > COORD_LIMIT {
            violations.push(Violation::OutOfBounds { id });
        }
        if o.pos[2] < 0.0 {
            violations.push(Violation::BelowGround { id });
        }
        if o.pos[2] > 0.0 && !s.objects.iter().any(|b| is_on(o, b)) {
            violations.push(Violation::Floating { id });
        }
    }
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            let (oa, ob) = (&s.objects[a], &s.objects[b]);
            if xy_distance(oa, ob) < MIN_DISTANCE && !is_on(oa, ob) && !is_on(ob, oa) {
                violations.push(Violation::MinDistance { a, b });
            }
        }
    }
    ValidationReport { violations }
}

/// Order-insensitive equality: a bijection matching all categorical
/// attributes exactly and every coordinate within `coord_tol`.
pub fn scene_equal(a: &Scene, b: &Scene, coord_tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let compatible = |x: &SceneObject, y: &SceneObject| {
        x.attrs() == y.attrs() && x.pos.iter().zip(y.pos.iter()).all(|(p, q)| (p - q).abs() <= coord_tol)
    };
    // Kuhn's augmenting-path bipartite matching; scenes have at most a handful of objects.
    let n = a.len();
    let mut match_of_b: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        a: &[SceneObject],
        b: &[SceneObject],
        seen: &mut [bool],
        match_of_b: &mut [Option<usize>],
        compatible: &dyn Fn(&SceneObject, &SceneObject) -> bool,
    ) -> bool {
        for j in 0..b.len() {
            if seen[j] || !compatible(&a[i], &b[j]) {
                continue;
            }
            seen[j] = true;
            if match_of_b[j].is_none_or(|k| augment(k, a, b, seen, match_of_b, compatible)) {
                match_of_b[j] = Some(i);
                return true;
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, &a.objects, &b.objects, &mut seen, &mut match_of_b, &compatible)
    })
}
