//! Max-over-time CNN classifier q(y|x) over the position-augmented sentence.

use crate::error::Result;
use crate::networks::dims::ModelDims;
use crate::networks::init::glorot_uniform;
use crate::numeric::{Graph, Padding, ParamId, ParamStore, Real, SeededRng, Tensor, Var};

#[derive(Clone, Debug)]
pub struct ConvBank {
    pub window: usize,
    pub filters: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct Classifier {
    pub banks: Vec<ConvBank>,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub dropout_embedding: f64,
    pub dropout_output: f64,
}

impl Classifier {
    pub fn init<T: Real>(store: &mut ParamStore<T>, dims: &ModelDims, n_classes: usize, rng: &mut SeededRng) -> Self {
        let d = dims.sentence_width();
        let f = dims.filters_per_window;
        let banks = dims
            .filter_windows
            .iter()
            .map(|&w| ConvBank {
                window: w,
                filters: store.register(
                    format!("classifier.conv{w}.W"),
                    glorot_uniform(rng, &[w, d, f], w * d, w * f),
                ),
                bias: store.register(format!("classifier.conv{w}.b"), Tensor::zeros(&[f])),
            })
            .collect();
        let feats = dims.classifier_features();
        Self {
            banks,
            out_w: store.register(
                "classifier.out.W",
                glorot_uniform(rng, &[feats, n_classes], feats, n_classes),
            ),
            out_b: store.register("classifier.out.b", Tensor::zeros(&[n_classes])),
            dropout_embedding: dims.dropout.classifier_embedding,
            dropout_output: dims.dropout.classifier_output,
        }
    }

    /// Class logits: dropout → conv + ReLU + max-pool per window size → concat → dropout → affine.
    pub fn logits<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        sentence: Var,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<Var> {
        let x = g.dropout(sentence, self.dropout_embedding, rng.as_deref_mut())?;
        let mut pooled = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            let w = g.param(bank.filters);
            let b = g.param(bank.bias);
            let c = g.conv1d(x, w, b, Padding::Valid)?;
            let c = g.relu(c);
            pooled.push(g.max_pool_time(c)?);
        }
        let feats = g.concat(&pooled)?;
        let feats = g.dropout(feats, self.dropout_output, rng)?;
        let w = g.param(self.out_w);
        let b = g.param(self.out_b);
        g.linear(feats, w, b)
    }

    /// q(y|x) as a probability vector.
    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, sentence: Var, rng: Option<&mut SeededRng>) -> Result<Var> {
        let logits = self.logits(g, sentence, rng)?;
        Ok(g.softmax(logits))
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.banks
            .iter()
            .flat_map(|b| [b.filters, b.bias])
            .chain([self.out_w, self.out_b])
            .collect()
    }
}
