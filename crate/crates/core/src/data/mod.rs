//! Synthetic scene generation and on-disk datasets.

mod disk;
mod scene;

pub use disk::{load_dataset, load_dataset_as, save_dataset, MANIFEST};
pub use scene::{
    embedding_classes, generate, render_one, Appearance, Geometry, SceneSpec, ShapeClass, TrainSample, IGNORE_INDEX,
};
