//! Fixed-shape numeric codecs for scenes, texts and answers.
//!
//! A scene becomes `MAX_OBJECTS` slots of [`SLOT_DIM`] values: presence,
//! one-hot shape, size, material and color, then x/3, y/3, z/3. Objects fill
//! slots in canonical order; unused slots are zero.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::answer::{Answer, ANSWER_CLASSES};
use crate::error::{Error, Result, TokenError};
use crate::scene::{is_free_ground_cell, nearest_free_cell, Color, Material, ObjectAttrs, Relation, Scene, SceneObject, Shape, Size, COORD_LIMIT, MAX_OBJECTS, RELATION_MARGIN};

pub const SLOT_DIM: usize = 19;
pub const SCENE_DIM: usize = MAX_OBJECTS * SLOT_DIM;
pub const MAX_TOKENS: usize = 24;
pub const PAD: &str = "<pad>";
pub const PAD_ID: usize = 0;

/// Offsets of the fields within one slot.
pub const PRESENCE: usize = 0;
pub const SHAPE: usize = 1;
pub const SIZE: usize = 4;
pub const MATERIAL: usize = 6;
pub const COLOR: usize = 8;
pub const COORDS: usize = 16;

/// Categorical groups as (offset, width).
pub const GROUPS: [(usize, usize); 4] = [(SHAPE, 3), (SIZE, 2), (MATERIAL, 2), (COLOR, 8)];

const COORD_SCALE: f64 = 3.0;

pub fn encode_scene(s: &Scene) -> Vec<f64> {
    let mut v = vec![0.0; SCENE_DIM];
    for (slot, o) in s.canonical().objects.iter().enumerate() {
        let base = slot * SLOT_DIM;
        v[base + PRESENCE] = 1.0;
        v[base + SHAPE + o.shape.index()] = 1.0;
        v[base + SIZE + o.size.index()] = 1.0;
        v[base + MATERIAL + o.material.index()] = 1.0;
        v[base + COLOR + o.color.index()] = 1.0;
        for axis in 0..3 {
            v[base + COORDS + axis] = o.pos[axis] / COORD_SCALE;
        }
    }
    v
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (i, &x)| if x > values[best] { i } else { best })
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Decodes slot activations into a valid scene. Total: positions are clamped
/// into bounds, unsupported objects drop to the ground and ground objects in
/// conflict move to the nearest free grid cell.
pub fn decode_scene(v: &[f64], presence_threshold: f64) -> Scene {
    assert_eq!(v.len(), SCENE_DIM, "scene vectors have {SCENE_DIM} values");
    let mut raw: Vec<SceneObject> = (0..MAX_OBJECTS)
        .filter(|slot| v[slot * SLOT_DIM + PRESENCE] > presence_threshold)
        .map(|slot| {
            let s = &v[slot * SLOT_DIM..(slot + 1) * SLOT_DIM];
            let group = |offset: usize, width: usize| argmax(&s[offset..offset + width]);
            let attrs = ObjectAttrs {
                shape: Shape::from_index(group(SHAPE, 3)).expect("in range"),
                size: Size::from_index(group(SIZE, 2)).expect("in range"),
                material: Material::from_index(group(MATERIAL, 2)).expect("in range"),
                color: Color::from_index(group(COLOR, 8)).expect("in range"),
            };
            let coord = |axis: usize| finite_or_zero(s[COORDS + axis] * COORD_SCALE);
            let pos = [
                round2(coord(0).clamp(-COORD_LIMIT, COORD_LIMIT)),
                round2(coord(1).clamp(-COORD_LIMIT, COORD_LIMIT)),
                round2(coord(2).max(0.0)),
            ];
            SceneObject::new(attrs, pos)
        })
        .collect();
    raw.sort_by(|a, b| a.pos[2].total_cmp(&b.pos[2]).then_with(|| a.canonical_cmp(b)));
    let mut placed: Vec<SceneObject> = Vec::with_capacity(raw.len());
    for mut o in raw {
        // An elevated object stays up only if something placed below lies within the
        // footprint; it then sits exactly on top of that stack.
        if o.pos[2] > 0.0 {
            let below: Vec<&SceneObject> = placed
                .iter()
                .filter(|b| (b.pos[0] - o.pos[0]).abs() <= RELATION_MARGIN && (b.pos[1] - o.pos[1]).abs() <= RELATION_MARGIN)
                .collect();
            let base = below.iter().filter(|b| b.pos[2] == 0.0).min_by(|a, b| {
                let da = (a.pos[0] - o.pos[0]).hypot(a.pos[1] - o.pos[1]);
                let db = (b.pos[0] - o.pos[0]).hypot(b.pos[1] - o.pos[1]);
                da.total_cmp(&db)
            });
            match base {
                Some(base) => {
                    let top = below.iter().map(|b| b.top()).fold(0.0, f64::max);
                    o.pos = [base.pos[0], base.pos[1], round2(top)];
                }
                None => o.pos[2] = 0.0,
            }
        }
        if o.pos[2] == 0.0 && !is_free_ground_cell([o.pos[0], o.pos[1]], &placed) {
            if let Some([x, y]) = nearest_free_cell([o.pos[0], o.pos[1]], &placed) {
                o.pos = [x, y, 0.0];
            }
        }
        debug_assert!(o.pos[2] == 0.0 || placed.iter().any(|b| Relation::On.holds(o.pos, b.pos)));
        placed.push(o);
    }
    Scene::new(placed)
}

/// One-hot answer vector in vocabulary order.
pub fn encode_answer(a: Answer) -> Vec<f64> {
    let mut v = vec![0.0; ANSWER_CLASSES];
    v[a.index()] = 1.0;
    v
}

pub fn decode_answer(v: &[f64]) -> Answer {
    Answer::from_index(argmax(v)).expect("argmax lies within the answer vocabulary")
}

/// Closed word table; id 0 is padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Padding followed by `words` in the given order.
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        let mut list = vec![PAD.to_string()];
        list.extend(words.into_iter().filter(|w| w != PAD));
        let ids = list.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words: list, ids }
    }

    /// Every word the generator's template bank can produce, sorted.
    pub fn from_template_bank() -> Self {
        Vocabulary::new(crate::worldgen::templates::bank_words())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// JSON array; the position of each word is its id.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.words).expect("strings serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let words: Vec<String> = serde_json::from_str(text).map_err(|e| Error::Data(format!("vocabulary: {e}")))?;
        if words.first().map(String::as_str) != Some(PAD) {
            return Err(Error::Data("vocabulary must start with the padding token".into()));
        }
        Ok(Vocabulary::new(words.into_iter().skip(1)))
    }

    /// SHA-256 of the JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Lowercases, splits on whitespace and pads with id 0 to [`MAX_TOKENS`].
    pub fn tokenize(&self, text: &str) -> std::result::Result<TokenSeq, TokenError> {
        let lower = text.to_lowercase();
        let words: Vec<&str> = lower.split_whitespace().collect();
        if words.len() > MAX_TOKENS {
            return Err(TokenError::TooLong { len: words.len(), max: MAX_TOKENS });
        }
        let mut ids = [PAD_ID; MAX_TOKENS];
        for (slot, w) in ids.iter_mut().zip(&words) {
            *slot = self.id(w).ok_or_else(|| TokenError::Oov(w.to_string()))?;
        }
        Ok(TokenSeq { ids, len: words.len() })
    }
}

/// Token ids left-aligned and zero-padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    pub ids: [usize; MAX_TOKENS],
    pub len: usize,
}

impl TokenSeq {
    pub fn tokens(&self) -> &[usize] {
        &self.ids[..self.len]
    }
}
