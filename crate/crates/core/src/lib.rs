//! Hypothetical action-effect reasoning over synthetic scene graphs.

pub mod answer;
pub mod config;
pub mod arl;
pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod program;
pub mod qa;
pub mod scene;
pub mod tensorize;
pub mod worldgen;

pub use answer::Answer;
pub use error::{Error, Result};
pub use scene::{scene_equal, validate_scene, Scene, SceneObject};
