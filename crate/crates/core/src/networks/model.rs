//! The full model: embeddings, classifier, encoder and decoder over one parameter store.

use crate::corpus::{LabelSchema, PreparedInstance, RelationInstance, Vocab};
use crate::embeddings::EmbeddingTables;
use crate::error::Result;
use crate::networks::classifier::Classifier;
use crate::networks::decoder::Decoder;
use crate::networks::dims::ModelDims;
use crate::networks::encoder::Encoder;
use crate::numeric::{Graph, ParamStore, Real, SeededRng, Var};

#[derive(Clone, Debug)]
pub struct Model<T> {
    pub store: ParamStore<T>,
    pub dims: ModelDims,
    pub vocab: Vocab,
    pub schema: LabelSchema,
    pub embeddings: EmbeddingTables,
    pub classifier: Classifier,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl<T: Real> Model<T> {
    pub fn new(dims: ModelDims, vocab: Vocab, schema: LabelSchema, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed).fork(0x1417);
        let mut store = ParamStore::new();
        let k = schema.len();
        let embeddings = EmbeddingTables::init(&mut store, vocab.len(), dims.word_dim, dims.pos_dim, dims.max_dist, &mut rng);
        let classifier = Classifier::init(&mut store, &dims, k, &mut rng);
        let encoder = Encoder::init(&mut store, &dims, k, &mut rng);
        let decoder = Decoder::init(&mut store, &dims, vocab.len(), k, &mut rng);
        Self {
            store,
            dims,
            vocab,
            schema,
            embeddings,
            classifier,
            encoder,
            decoder,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.schema.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn prepare(&self, inst: &RelationInstance) -> PreparedInstance {
        PreparedInstance::new(
            inst,
            &self.vocab,
            self.dims.max_dist,
            self.dims.sentence_cap,
            self.dims.min_sentence_len(),
        )
    }

    /// Classifier distribution q(y|x) inside `g`; dropout is active iff `rng` is given.
    pub fn classify(&self, g: &mut Graph<'_, T>, prep: &PreparedInstance, rng: Option<&mut SeededRng>) -> Result<Var> {
        let x = self.embeddings.embed_sentence(g, &prep.sentence, &prep.dist0, &prep.dist1)?;
        self.classifier.forward(g, x, rng)
    }

    /// Deterministic q(y|x) (no dropout).
    pub fn class_probs(&self, inst: &RelationInstance) -> Result<Vec<T>> {
        let prep = self.prepare(inst);
        let mut g = Graph::new(&self.store);
        let probs = self.classify(&mut g, &prep, None)?;
        Ok(g.value(probs).data().to_vec())
    }

    /// Most probable class per instance; ties resolve to the lowest index.
    pub fn predict(&self, instances: &[RelationInstance]) -> Result<Vec<usize>> {
        instances
            .iter()
            .map(|inst| {
                let prep = self.prepare(inst);
                let mut g = Graph::new(&self.store);
                let probs = self.classify(&mut g, &prep, None)?;
                Ok(g.value(probs).argmax())
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            store: self.store.cast(),
            dims: self.dims.clone(),
            vocab: self.vocab.clone(),
            schema: self.schema.clone(),
            embeddings: self.embeddings.clone(),
            classifier: self.classifier.clone(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WINDOW_LEN;
    use crate::networks::encoder::{lstm_final_state, lstm_step, LstmParams};
    use crate::networks::DropoutRates;
    use crate::numeric::{ParamStore, Tensor};

    fn vocab(n: usize) -> Vocab {
        Vocab::from((0..n - 4).map(|i| format!("t{i}")).collect::<Vec<_>>())
    }

    fn scalars_with_prefix(store: &ParamStore<f32>, prefix: &str) -> usize {
        store
            .iter()
            .filter(|(_, p)| p.name.starts_with(prefix))
            .map(|(_, p)| p.value.len())
            .sum()
    }

    #[test]
    fn published_dims_parameter_counts() {
        let schema = LabelSchema::ddi();
        let model = Model::<f32>::new(ModelDims::default(), vocab(1000), schema, 1);
        let s = &model.store;
        // words 1000×200, positions 102×20
        assert_eq!(scalars_with_prefix(s, "embeddings."), 200_000 + 2_040);
        // conv banks 3·240·100+100, 4·240·100+100, 5·240·100+100; output 300·5+5
        assert_eq!(scalars_with_prefix(s, "classifier."), 72_100 + 96_100 + 120_100 + 1_505);
        // two directions of 4·(200·300 + 300·300 + 300); mu and logvar 600·32+32 each
        assert_eq!(scalars_with_prefix(s, "encoder."), 2 * 601_200 + 2 * 19_232);
        // input (32+5)·9000+9000; convs 3·300·300+300, 3·300·600+600, 3·600·1000+1000; output 1000·1000+1000
        assert_eq!(
            scalars_with_prefix(s, "decoder."),
            342_000 + 270_300 + 540_600 + 1_801_000 + 1_001_000
        );
        let (e, c, n, d) = model.dims.param_counts(1000, 5);
        assert_eq!(e + c + n + d, s.num_scalars());
        assert_eq!(model.dims.classifier_features(), 300);
        assert_eq!(2 * model.dims.encoder_hidden, 600);
    }

    fn zero_all(store: &mut ParamStore<f64>) {
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
    }

    fn tiny(n_classes: usize) -> Model<f64> {
        let mut dims = ModelDims::tiny();
        dims.dropout = DropoutRates::none();
        Model::new(dims, vocab(20), LabelSchema::synthetic(n_classes), 3)
    }

    #[test]
    fn zero_classifier_is_uniform_and_probabilities_sum_to_one() {
        let mut model = tiny(3);
        let inst = RelationInstance {
            id: "a".into(),
            tokens: "t1 E0 t2 t3 E1 t4".split(' ').map(String::from).collect(),
            e0_index: 1,
            e1_index: 4,
            label: None,
        };
        let p = model.class_probs(&inst).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let ids = model.classifier.param_ids();
        for id in ids {
            model.store.get_mut(id).value.fill(0.0);
        }
        let p = model.class_probs(&inst).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(model.predict(std::slice::from_ref(&inst)).unwrap(), vec![0]);
    }

    #[test]
    fn lstm_step_hand_values() {
        let mut store = ParamStore::<f64>::new();
        let p = LstmParams::init(&mut store, "l", 3, 2, &mut SeededRng::new(1));
        zero_all(&mut store);
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::vector(vec![0.3, -1.0, 2.0]));
        let h0 = g.constant(Tensor::zeros(&[2]));
        let (h, c) = lstm_step(&mut g, &p, x, h0, h0).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0]);
        assert_eq!(g.value(c).data(), &[0.0, 0.0]);
        let c_prev = g.constant(Tensor::filled(&[2], 2.0));
        let (h, c) = lstm_step(&mut g, &p, x, h0, c_prev).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 1.0]);
        for &v in g.value(h).data() {
            assert!((v - 0.5 * 1f64.tanh()).abs() < 1e-15);
            assert!((v - 0.38079).abs() < 1e-5);
        }
    }

    #[test]
    fn encoder_prior_for_pad_window_and_zero_params() {
        let mut model = tiny(2);
        zero_all(&mut model.store);
        let mut g = Graph::new(&model.store);
        let w = model.embeddings.embed_window(&mut g, &[0; WINDOW_LEN]).unwrap();
        assert!(g.value(w).data().iter().all(|&v| v == 0.0));
        let (mu, lv) = model.encoder.forward(&mut g, w, None, None).unwrap();
        assert_eq!(g.shape(mu), &[model.dims.latent]);
        assert!(g.value(mu).data().iter().all(|&v| v == 0.0));
        assert!(g.value(lv).data().iter().all(|&v| v == 0.0));
    }

    /// Swap the forward and backward LSTM parameters and the matching halves
    /// of the projection rows; the encoder of the reversed window must agree.
    #[test]
    fn bilstm_direction_symmetry() {
        let model = tiny(2);
        let h = model.dims.encoder_hidden;
        let mut rng = SeededRng::new(9);
        let window: Vec<f64> = (0..WINDOW_LEN * model.dims.word_dim).map(|_| rng.normal()).collect();
        let d = model.dims.word_dim;
        let reversed: Vec<f64> = (0..WINDOW_LEN)
            .rev()
            .flat_map(|t| window[t * d..(t + 1) * d].to_vec())
            .collect();

        let mut swapped = model.store.clone();
        let enc = &model.encoder;
        let pairs: Vec<_> = enc.forward.w.iter().zip(&enc.backward.w)
            .chain(enc.forward.u.iter().zip(&enc.backward.u))
            .chain(enc.forward.b.iter().zip(&enc.backward.b))
            .map(|(&a, &b)| (a, b))
            .collect();
        for (a, b) in pairs {
            let va = model.store.value(a).clone();
            let vb = model.store.value(b).clone();
            swapped.get_mut(a).value = vb;
            swapped.get_mut(b).value = va;
        }
        for id in [enc.mu_w, enc.logvar_w] {
            let t = swapped.get_mut(id);
            let cols = t.value.shape()[1];
            let data = t.value.data_mut();
            for r in 0..h {
                for c in 0..cols {
                    data.swap(r * cols + c, (r + h) * cols + c);
                }
            }
        }

        let run = |store: &ParamStore<f64>, input: &[f64]| {
            let mut g = Graph::new(store);
            let x = g.constant(Tensor::matrix(WINDOW_LEN, d, input.to_vec()).unwrap());
            let (mu, lv) = enc.forward(&mut g, x, None, None).unwrap();
            (g.value(mu).data().to_vec(), g.value(lv).data().to_vec())
        };
        let (mu_a, lv_a) = run(&model.store, &window);
        let (mu_b, lv_b) = run(&swapped, &reversed);
        for (a, b) in mu_a.iter().zip(&mu_b).chain(lv_a.iter().zip(&lv_b)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // and the direction actually matters
        let (mu_c, _) = run(&model.store, &reversed);
        assert!(mu_a.iter().zip(&mu_c).any(|(a, c)| (a - c).abs() > 1e-6));
    }

    #[test]
    fn final_state_of_reverse_run_reads_first_row_last() {
        let mut store = ParamStore::<f64>::new();
        let p = LstmParams::init(&mut store, "l", 2, 3, &mut SeededRng::new(2));
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::matrix(1, 2, vec![0.4, -0.2]).unwrap());
        let a = lstm_final_state(&mut g, &p, x, false).unwrap();
        let b = lstm_final_state(&mut g, &p, x, true).unwrap();
        assert_eq!(g.value(a).data(), g.value(b).data());
    }

    #[test]
    fn decoder_rows_are_distributions_and_label_pathway_is_live() {
        let model = tiny(3);
        let mut rng = SeededRng::new(4);
        let mut g = Graph::new(&model.store);
        let z = g.constant(Tensor::vector((0..model.dims.latent).map(|_| rng.normal()).collect()));
        let y0 = g.constant(Tensor::vector(vec![1.0, 0.0, 0.0]));
        let y1 = g.constant(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let mask_rng = SeededRng::new(8);
        let p0 = model.decoder.forward(&mut g, z, y0, Some(&mut mask_rng.clone())).unwrap();
        let p1 = model.decoder.forward(&mut g, z, y1, Some(&mut mask_rng.clone())).unwrap();
        assert_eq!(g.shape(p0), &[WINDOW_LEN, model.vocab_size()]);
        for row in g.value(p0).data().chunks(model.vocab_size()) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        let delta: f64 = g
            .value(p0)
            .data()
            .iter()
            .zip(g.value(p1).data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(delta > 1e-6);
    }

    #[test]
    fn eval_mode_is_deterministic_and_cast_preserves_predictions() {
        let model = tiny(2);
        let inst = RelationInstance {
            id: "a".into(),
            tokens: "E0 t2 t3 E1".split(' ').map(String::from).collect(),
            e0_index: 0,
            e1_index: 3,
            label: None,
        };
        assert_eq!(model.class_probs(&inst).unwrap(), model.class_probs(&inst).unwrap());
        let single = model.cast::<f32>();
        assert_eq!(single.store.num_scalars(), model.store.num_scalars());
        let p64 = model.class_probs(&inst).unwrap();
        let p32 = single.class_probs(&inst).unwrap();
        for (a, b) in p64.iter().zip(&p32) {
            assert!((a - f64::from(*b)).abs() < 1e-5);
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Model::<f32>::new(ModelDims::tiny(), vocab(20), LabelSchema::synthetic(2), 5);
        let b = Model::<f32>::new(ModelDims::tiny(), vocab(20), LabelSchema::synthetic(2), 5);
        let c = Model::<f32>::new(ModelDims::tiny(), vocab(20), LabelSchema::synthetic(2), 6);
        assert_eq!(a.store.flat_values(), b.store.flat_values());
        assert_ne!(a.store.flat_values(), c.store.flat_values());
    }
}
