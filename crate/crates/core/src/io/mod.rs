//! Persistence of datasets and models, plus the synthetic benchmark.

pub mod dataset;
pub mod model_file;
pub mod synth;

pub use dataset::{load_dataset, read_sequence, save_dataset, write_sequence, Dataset, DatasetManifest};
pub use model_file::{decode_model, encode_model, load_model, model_digest, save_model, FORMAT_VERSION, MAGIC};
pub use synth::{synth_generate, view_variant, SynthConfig, SynthData};
