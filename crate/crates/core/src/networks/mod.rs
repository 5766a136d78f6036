//! Classifier, encoder and decoder networks and their assembly into one model.

pub mod classifier;
pub mod decoder;
pub mod dims;
pub mod encoder;
pub mod init;
pub mod model;

pub use classifier::{Classifier, ConvBank};
pub use decoder::Decoder;
pub use dims::{DropoutRates, ModelDims};
pub use encoder::{lstm_final_state, lstm_step, lstm_step_projected, Encoder, LstmParams};
pub use init::glorot_uniform;
pub use model::Model;
