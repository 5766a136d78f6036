//! Shared fixtures for the benchmarks in `benches/`.

use ssvae_core::corpus::{generate_synthetic_corpus, LabelSchema, PreparedInstance, SynthSpec, Vocab};
use ssvae_core::networks::{Model, ModelDims};
use ssvae_core::numeric::{SeededRng, Tensor};

/// Matrix of standard-normal entries.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor<f32> {
    let data = (0..rows * cols).map(|_| rng.normal() as f32).collect();
    Tensor::matrix(rows, cols, data).expect("shape")
}

/// Model over a synthetic corpus together with prepared training instances.
pub fn synthetic_model(dims: ModelDims, n: usize) -> (Model<f32>, Vec<PreparedInstance>) {
    let spec = SynthSpec {
        n_instances: n,
        ..Default::default()
    };
    let corpus = generate_synthetic_corpus(&spec, &mut SeededRng::new(1));
    let vocab = Vocab::build(corpus.iter(), 1);
    let schema: LabelSchema = spec.schema();
    let model = Model::new(dims, vocab, schema, 1);
    let prepared = corpus.iter().map(|i| model.prepare(i)).collect();
    (model, prepared)
}
