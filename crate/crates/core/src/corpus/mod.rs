//! Relation instances: ingestion, entity blinding, position features, the
//! entity-surrounding window, splits, batching and a synthetic generator.

pub mod batch;
pub mod instance;
pub mod io;
pub mod schema;
pub mod split;
pub mod synth;
pub mod vocab;

pub use batch::{BatchIndices, BatchIterator};
pub use instance::{
    blind_entities, classifier_positions, clamped_distance, position_index, position_pad_index,
    relative_positions, surrounding_window, window_positions, PreparedInstance, RelationInstance,
    E0_TOKEN, E1_TOKEN, WINDOW_LEN,
};
pub use io::{infer_schema, parse_corpus, parse_corpus_str, serialize_corpus, write_corpus};
pub use schema::LabelSchema;
pub use split::{sample_splits, DatasetSplit};
pub use synth::{generate_synthetic_corpus, trigger_oracle, SynthSpec};
pub use vocab::Vocab;
