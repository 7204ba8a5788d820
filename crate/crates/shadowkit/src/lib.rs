//! Dataset pipeline, batch evaluation and annotation service built on
//! `shadowkit-core`.

pub mod config;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod pipeline;
pub mod server;
pub mod synth;

pub use config::Config;
pub use error::{PipelineError, Result};
pub use manifest::{load_manifest, DatasetTuple, Manifest, Split};
pub use pipeline::{run_shadow_pipeline, LightSource, Overrides, ShadowOutput};
