//! Random forests trained with privileged kinematic-layout information.
//!
//! Training sees appearance features together with skeleton joints and scene
//! planes; the trained forest splits on appearance features only, so
//! inference needs nothing beyond appearance.

pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod io;
pub mod learning;
pub mod model;
pub mod numeric;

pub use error::{ErrorCategory, KlrfError, Result};
pub use forest::{Forest, Prediction};
pub use learning::{train_baseline, train_klrf, TrainedModel, TrainingMode};
pub use model::{ActionSequence, ClassDistribution, KlrfConfig, LabelMap, Sample};
