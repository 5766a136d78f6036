//! Semi-supervised relation classification with a conditional variational autoencoder.
//!
//! A CNN classifier q(y|x) is trained jointly with a Bi-LSTM encoder q(z|x)
//! and a CNN decoder p(x|y,z) that reconstructs the 30-token window around
//! the two blinded entities. Unlabeled instances contribute through exact
//! marginalisation over the classifier's label distribution.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod harness;
pub mod networks;
pub mod numeric;
pub mod semivae;

pub use error::{Error, Result};
