//! Surface words for attributes and the noun phrases built from them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::program::SetExpr;
use crate::scene::{AttrKind, AttrValue, Color, Material, ObjectAttrs, Scene, Shape, Size};

pub(crate) fn size_words(v: Size) -> &'static [&'static str] {
    match v {
        Size::Small => &["small", "tiny"],
        Size::Big => &["big", "large"],
    }
}

pub(crate) fn material_words(v: Material) -> &'static [&'static str] {
    match v {
        Material::Metal => &["metal", "metallic", "shiny"],
        Material::Rubber => &["rubber", "matte"],
    }
}

pub(crate) fn shape_words(v: Shape) -> &'static [&'static str] {
    match v {
        Shape::Cube => &["cube", "block"],
        Shape::Sphere => &["sphere", "ball"],
        Shape::Cylinder => &["cylinder"],
    }
}

pub(crate) fn shape_plural_words(v: Shape) -> &'static [&'static str] {
    match v {
        Shape::Cube => &["cubes", "blocks"],
        Shape::Sphere => &["spheres", "balls"],
        Shape::Cylinder => &["cylinders"],
    }
}

pub(crate) const GENERIC_NOUNS: [&str; 2] = ["object", "thing"];
pub(crate) const GENERIC_PLURALS: [&str; 2] = ["objects", "things"];

/// Words that may realize a value used as an adjective or bare attribute.
pub(crate) fn value_words(v: AttrValue) -> &'static [&'static str] {
    match v {
        AttrValue::Shape(s) => shape_words(s),
        AttrValue::Size(s) => size_words(s),
        AttrValue::Material(m) => material_words(m),
        AttrValue::Color(c) => color_word(c),
    }
}

fn color_word(c: Color) -> &'static [&'static str] {
    match c {
        Color::Red => &["red"],
        Color::Green => &["green"],
        Color::Gray => &["gray"],
        Color::Blue => &["blue"],
        Color::Brown => &["brown"],
        Color::Yellow => &["yellow"],
        Color::Purple => &["purple"],
        Color::Cyan => &["cyan"],
    }
}

/// Every value a single surface word can denote.
pub(crate) fn lookup_value(word: &str) -> Option<AttrValue> {
    AttrKind::ALL
        .into_iter()
        .flat_map(AttrKind::values)
        .find(|&v| value_words(v).contains(&word))
}

pub(crate) fn lookup_plural_shape(word: &str) -> Option<Shape> {
    Shape::ALL.iter().copied().find(|&s| shape_plural_words(s).contains(&word))
}

/// All words the lexicon can emit.
pub(crate) fn all_words() -> Vec<&'static str> {
    let mut words: Vec<&'static str> = AttrKind::ALL.into_iter().flat_map(AttrKind::values).flat_map(|v| value_words(v).iter().copied()).collect();
    words.extend(Shape::ALL.iter().flat_map(|&s| shape_plural_words(s).iter().copied()));
    words.extend(GENERIC_NOUNS);
    words.extend(GENERIC_PLURALS);
    words
}

/// A partial attribute description: the content of a noun phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Description {
    pub size: Option<Size>,
    pub color: Option<Color>,
    pub material: Option<Material>,
    pub shape: Option<Shape>,
}

impl Description {
    pub fn full(attrs: ObjectAttrs) -> Self {
        Description { size: Some(attrs.size), color: Some(attrs.color), material: Some(attrs.material), shape: Some(attrs.shape) }
    }

    /// Keeps only the attributes of `attrs` whose kinds are in `kinds`.
    pub fn subset(attrs: ObjectAttrs, kinds: &[AttrKind]) -> Self {
        let has = |k| kinds.contains(&k);
        Description {
            size: has(AttrKind::Size).then_some(attrs.size),
            color: has(AttrKind::Color).then_some(attrs.color),
            material: has(AttrKind::Material).then_some(attrs.material),
            shape: has(AttrKind::Shape).then_some(attrs.shape),
        }
    }

    pub fn with(mut self, value: AttrValue) -> Option<Self> {
        let slot_free = match value {
            AttrValue::Shape(v) => self.shape.replace(v).is_none(),
            AttrValue::Size(v) => self.size.replace(v).is_none(),
            AttrValue::Material(v) => self.material.replace(v).is_none(),
            AttrValue::Color(v) => self.color.replace(v).is_none(),
        };
        slot_free.then_some(self)
    }

    /// Values in filter-chain order: shape innermost, then material, color, size.
    pub fn values(&self) -> Vec<AttrValue> {
        [
            self.shape.map(AttrValue::Shape),
            self.material.map(AttrValue::Material),
            self.color.map(AttrValue::Color),
            self.size.map(AttrValue::Size),
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    pub fn matches(&self, attrs: ObjectAttrs) -> bool {
        self.values().into_iter().all(|v| attrs.has(v))
    }

    pub fn to_set(&self) -> SetExpr {
        SetExpr::filtered(self.values())
    }

    pub fn count_in(&self, scene: &Scene) -> usize {
        scene.objects.iter().filter(|o| self.matches(o.attrs())).count()
    }

    /// Adjectives in surface order (size, color, material) followed by a noun.
    pub fn realize(&self, rng: &mut impl Rng, plural: bool) -> String {
        let mut words: Vec<&str> = Vec::with_capacity(4);
        if let Some(v) = self.size {
            words.push(size_words(v).choose(rng).expect("nonempty"));
        }
        if let Some(v) = self.color {
            words.push(v.name());
        }
        if let Some(v) = self.material {
            words.push(material_words(v).choose(rng).expect("nonempty"));
        }
        let noun = match (self.shape, plural) {
            (Some(s), false) => shape_words(s).choose(rng),
            (Some(s), true) => shape_plural_words(s).choose(rng),
            (None, false) => GENERIC_NOUNS.choose(rng),
            (None, true) => GENERIC_PLURALS.choose(rng),
        };
        words.push(noun.expect("nonempty"));
        words.join(" ")
    }

    /// Inverse of [`Description::realize`].
    pub fn parse(words: &[&str], plural: bool) -> Option<Self> {
        let (noun, adjectives) = words.split_last()?;
        let mut d = Description::default();
        match plural {
            false if GENERIC_NOUNS.contains(noun) => {}
            true if GENERIC_PLURALS.contains(noun) => {}
            false => d.shape = Some(Shape::ALL.iter().copied().find(|&s| shape_words(s).contains(noun))?),
            true => d.shape = Some(lookup_plural_shape(noun)?),
        }
        // Adjectives must appear in surface order, each kind at most once.
        let order = [AttrKind::Size, AttrKind::Color, AttrKind::Material];
        let mut next = 0;
        for word in adjectives {
            let value = lookup_value(word)?;
            let rank = order.iter().position(|&k| k == value.kind())?;
            if rank < next {
                return None;
            }
            next = rank + 1;
            d = d.with(value)?;
        }
        Some(d)
    }
}

/// Descriptions of `scene.objects[target]` that match that object alone,
/// optionally without using `exclude`.
pub(crate) fn unique_descriptions(scene: &Scene, target: usize, exclude: Option<AttrKind>) -> Vec<Description> {
    let attrs = scene.objects[target].attrs();
    let kinds: Vec<AttrKind> = AttrKind::ALL.into_iter().filter(|&k| Some(k) != exclude).collect();
    (1u32..1 << kinds.len())
        .map(|mask| {
            let chosen: Vec<AttrKind> = kinds.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &k)| k).collect();
            Description::subset(attrs, &chosen)
        })
        .filter(|d| d.count_in(scene) == 1)
        .collect()
}
