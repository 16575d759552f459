//! Subword skip-gram embeddings trained on ASR confusion networks.
//!
//! The pipeline: parse or synthesize confusion networks ([`cn`],
//! [`acoustics`]), build a vocabulary with subword indices ([`vocab`],
//! [`subword`]), train one of four skip-gram configurations over the network
//! structure ([`trainer`]), then query, serialize, and evaluate the embedding
//! ([`model`], [`eval`]) or probe downstream robustness ([`intent`]).

pub mod acoustics;
pub mod cn;
mod error;
pub mod eval;
pub mod intent;
pub mod model;
pub mod subword;
pub mod trainer;
pub mod util;
pub mod vocab;

pub use cn::{ConfusionNetwork, Slot};
pub use error::{Error, Result};
pub use model::{EmbeddingModel, Matrix, VectorSource};
pub use trainer::{Mode, TrainConfig, TrainingPair};
pub use vocab::Vocabulary;
