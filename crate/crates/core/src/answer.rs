//! The closed 27-symbol answer vocabulary.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scene::{AttrValue, Color, Material, Shape, Size};

/// Number of answer classes.
pub const ANSWER_CLASSES: usize = 27;
/// Largest representable count; larger counts saturate.
pub const MAX_COUNT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Count(u8),
    Yes,
    No,
    Shape(Shape),
    Size(Size),
    Material(Material),
    Color(Color),
}

// Answer-vocabulary order lists shapes as cylinder, sphere, cube, which is
// not the enum order used by the scene codec.
const SHAPE_ORDER: [Shape; 3] = [Shape::Cylinder, Shape::Sphere, Shape::Cube];

impl Answer {
    /// Every answer in vocabulary order.
    pub fn all() -> Vec<Answer> {
        (0..ANSWER_CLASSES).map(|i| Answer::from_index(i).expect("index in range")).collect()
    }

    /// Saturating count answer.
    pub fn count(n: usize) -> Answer {
        Answer::Count(n.min(MAX_COUNT) as u8)
    }

    pub fn boolean(b: bool) -> Answer {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn attribute(value: AttrValue) -> Answer {
        match value {
            AttrValue::Shape(v) => Answer::Shape(v),
            AttrValue::Size(v) => Answer::Size(v),
            AttrValue::Material(v) => Answer::Material(v),
            AttrValue::Color(v) => Answer::Color(v),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Answer::Count(n) => n as usize,
            Answer::Yes => 10,
            Answer::No => 11,
            Answer::Shape(s) => 12 + SHAPE_ORDER.iter().position(|&x| x == s).expect("all shapes listed"),
            Answer::Size(s) => 15 + s.index(),
            Answer::Material(m) => 17 + m.index(),
            Answer::Color(c) => 19 + c.index(),
        }
    }

    pub fn from_index(index: usize) -> Option<Answer> {
        Some(match index {
            0..=9 => Answer::Count(index as u8),
            10 => Answer::Yes,
            11 => Answer::No,
            12..=14 => Answer::Shape(SHAPE_ORDER[index - 12]),
            15..=16 => Answer::Size(Size::from_index(index - 15)?),
            17..=18 => Answer::Material(Material::from_index(index - 17)?),
            19..=26 => Answer::Color(Color::from_index(index - 19)?),
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        match self {
            Answer::Count(n) => n.to_string(),
            Answer::Yes => "yes".into(),
            Answer::No => "no".into(),
            Answer::Shape(v) => v.name().into(),
            Answer::Size(v) => v.name().into(),
            Answer::Material(v) => v.name().into(),
            Answer::Color(v) => v.name().into(),
        }
    }

    pub fn parse(text: &str) -> Option<Answer> {
        (0..ANSWER_CLASSES).filter_map(Answer::from_index).find(|a| a.name() == text)
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Answer::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("unknown answer `{text}`")))
    }
}
