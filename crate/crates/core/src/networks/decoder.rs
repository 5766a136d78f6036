//! Three-layer CNN decoder p(window | y, z).

use crate::corpus::WINDOW_LEN;
use crate::error::Result;
use crate::networks::classifier::ConvBank;
use crate::networks::dims::ModelDims;
use crate::networks::init::glorot_uniform;
use crate::numeric::{Graph, Padding, ParamId, ParamStore, Real, SeededRng, Tensor, Var};

#[derive(Clone, Debug)]
pub struct Decoder {
    pub in_w: ParamId,
    pub in_b: ParamId,
    pub sheet_width: usize,
    pub convs: Vec<ConvBank>,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub dropout_output: f64,
}

impl Decoder {
    pub fn init<T: Real>(
        store: &mut ParamStore<T>,
        dims: &ModelDims,
        vocab_size: usize,
        n_classes: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let sheet_width = dims.decoder_widths[0];
        let input = dims.latent + n_classes;
        let sheet = WINDOW_LEN * sheet_width;
        let in_w = store.register("decoder.input.W", glorot_uniform(rng, &[input, sheet], input, sheet));
        let in_b = store.register("decoder.input.b", Tensor::zeros(&[sheet]));
        let w = dims.decoder_window;
        let mut c_in = sheet_width;
        let mut convs = Vec::new();
        for (layer, &c_out) in dims.decoder_widths.iter().enumerate() {
            convs.push(ConvBank {
                window: w,
                filters: store.register(
                    format!("decoder.conv{}.W", layer + 1),
                    glorot_uniform(rng, &[w, c_in, c_out], w * c_in, w * c_out),
                ),
                bias: store.register(format!("decoder.conv{}.b", layer + 1), Tensor::zeros(&[c_out])),
            });
            c_in = c_out;
        }
        Self {
            in_w,
            in_b,
            sheet_width,
            convs,
            out_w: store.register("decoder.out.W", glorot_uniform(rng, &[c_in, vocab_size], c_in, vocab_size)),
            out_b: store.register("decoder.out.b", Tensor::zeros(&[vocab_size])),
            dropout_output: dims.dropout.decoder_output,
        }
    }

    /// Per-position token distributions `[30 × vocab]` given `z` and a label
    /// vector (one-hot, or any distribution over classes).
    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, z: Var, label: Var, rng: Option<&mut SeededRng>) -> Result<Var> {
        let input = g.concat(&[z, label])?;
        let (w, b) = (g.param(self.in_w), g.param(self.in_b));
        let sheet = g.linear(input, w, b)?;
        let mut x = g.reshape(sheet, &[WINDOW_LEN, self.sheet_width])?;
        for conv in &self.convs {
            let (w, b) = (g.param(conv.filters), g.param(conv.bias));
            let c = g.conv1d(x, w, b, Padding::Same)?;
            x = g.relu(c);
        }
        let x = g.dropout(x, self.dropout_output, rng)?;
        let (w, b) = (g.param(self.out_w), g.param(self.out_b));
        let logits = g.linear(x, w, b)?;
        Ok(g.softmax(logits))
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        [self.in_w, self.in_b]
            .into_iter()
            .chain(self.convs.iter().flat_map(|c| [c.filters, c.bias]))
            .chain([self.out_w, self.out_b])
            .collect()
    }
}
