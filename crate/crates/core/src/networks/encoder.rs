//! Bidirectional LSTM encoder producing the Gaussian posterior over z.

use crate::error::Result;
use crate::networks::dims::ModelDims;
use crate::networks::init::glorot_uniform;
use crate::numeric::{Graph, ParamId, ParamStore, Real, SeededRng, Tensor, Var};

/// Gate order: input, forget, output, candidate.
pub const GATES: [&str; 4] = ["i", "f", "o", "g"];

#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w: [ParamId; 4],
    pub u: [ParamId; 4],
    pub b: [ParamId; 4],
    pub hidden: usize,
}

impl LstmParams {
    pub fn init<T: Real>(store: &mut ParamStore<T>, prefix: &str, input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut reg = |kind: &str, gate: &str, t: Tensor<T>| store.register(format!("{prefix}.{kind}_{gate}"), t);
        let w = GATES.map(|gate| reg("W", gate, glorot_uniform(rng, &[input, hidden], input, hidden)));
        let u = GATES.map(|gate| reg("U", gate, glorot_uniform(rng, &[hidden, hidden], hidden, hidden)));
        let b = GATES.map(|gate| reg("b", gate, Tensor::zeros(&[hidden])));
        Self { w, u, b, hidden }
    }

    fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.w.iter().chain(&self.u).chain(&self.b).copied()
    }
}

/// One LSTM step with the input projections `W_* x` already computed.
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)   f = σ(W_f x + U_f h + b_f)
/// o = σ(W_o x + U_o h + b_o)   g = tanh(W_g x + U_g h + b_g)
/// c' = f ⊙ c + i ⊙ g           h' = o ⊙ tanh(c')
/// ```
pub fn lstm_step_projected<T: Real>(
    g: &mut Graph<'_, T>,
    p: &LstmParams,
    x_proj: [Var; 4],
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let mut gates = [h_prev; 4];
    for k in 0..4 {
        let u = g.param(p.u[k]);
        let b = g.param(p.b[k]);
        let hu = g.matmul(h_prev, u)?;
        let pre = g.add(x_proj[k], hu)?;
        let pre = g.add_bias(pre, b)?;
        gates[k] = if k == 3 { g.tanh(pre) } else { g.sigmoid(pre) };
    }
    let [i, f, o, cand] = gates;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// One LSTM step from a raw input vector `x`.
pub fn lstm_step<T: Real>(g: &mut Graph<'_, T>, p: &LstmParams, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let mut proj = [x; 4];
    for (slot, &w) in proj.iter_mut().zip(&p.w) {
        let w = g.param(w);
        *slot = g.matmul(x, w)?;
    }
    lstm_step_projected(g, p, proj, h_prev, c_prev)
}

/// Run an LSTM over the rows of `inputs` (`[L × d]`), in reverse when `reverse`; returns the final hidden state.
pub fn lstm_final_state<T: Real>(g: &mut Graph<'_, T>, p: &LstmParams, inputs: Var, reverse: bool) -> Result<Var> {
    let steps = g.shape(inputs)[0];
    // all input projections at once: [L × hidden] per gate
    let mut xw = [inputs; 4];
    for (slot, &w) in xw.iter_mut().zip(&p.w) {
        let w = g.param(w);
        *slot = g.matmul(inputs, w)?;
    }
    let mut h = g.constant(Tensor::zeros(&[p.hidden]));
    let mut c = h;
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        let mut proj = [h; 4];
        for k in 0..4 {
            proj[k] = g.row(xw[k], t)?;
        }
        (h, c) = lstm_step_projected(g, p, proj, h, c)?;
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub mu_w: ParamId,
    pub mu_b: ParamId,
    pub logvar_w: ParamId,
    pub logvar_b: ParamId,
    pub uses_label: bool,
    pub dropout_embedding: f64,
}

impl Encoder {
    pub fn init<T: Real>(store: &mut ParamStore<T>, dims: &ModelDims, n_classes: usize, rng: &mut SeededRng) -> Self {
        let h = dims.encoder_hidden;
        let forward = LstmParams::init(store, "encoder.fwd", dims.word_dim, h, rng);
        let backward = LstmParams::init(store, "encoder.bwd", dims.word_dim, h, rng);
        let summary = 2 * h + if dims.encoder_uses_label { n_classes } else { 0 };
        let l = dims.latent;
        Self {
            forward,
            backward,
            mu_w: store.register("encoder.mu.W", glorot_uniform(rng, &[summary, l], summary, l)),
            mu_b: store.register("encoder.mu.b", Tensor::zeros(&[l])),
            logvar_w: store.register("encoder.logvar.W", glorot_uniform(rng, &[summary, l], summary, l)),
            logvar_b: store.register("encoder.logvar.b", Tensor::zeros(&[l])),
            uses_label: dims.encoder_uses_label,
            dropout_embedding: dims.dropout.encoder_embedding,
        }
    }

    /// Concatenated final forward and backward hidden states.
    pub fn summary<T: Real>(&self, g: &mut Graph<'_, T>, window: Var, rng: Option<&mut SeededRng>) -> Result<Var> {
        let x = g.dropout(window, self.dropout_embedding, rng)?;
        let hf = lstm_final_state(g, &self.forward, x, false)?;
        let hb = lstm_final_state(g, &self.backward, x, true)?;
        g.concat(&[hf, hb])
    }

    /// `(mu, logvar)` from a summary vector, appending the label vector when the encoder is label-conditioned.
    pub fn project<T: Real>(&self, g: &mut Graph<'_, T>, summary: Var, label: Option<Var>) -> Result<(Var, Var)> {
        let input = match (self.uses_label, label) {
            (true, Some(y)) => g.concat(&[summary, y])?,
            (true, None) => panic!("label-conditioned encoder needs a label vector"),
            (false, _) => summary,
        };
        let (mw, mb) = (g.param(self.mu_w), g.param(self.mu_b));
        let mu = g.linear(input, mw, mb)?;
        let (lw, lb) = (g.param(self.logvar_w), g.param(self.logvar_b));
        let logvar = g.linear(input, lw, lb)?;
        Ok((mu, logvar))
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        window: Var,
        label: Option<Var>,
        rng: Option<&mut SeededRng>,
    ) -> Result<(Var, Var)> {
        let s = self.summary(g, window, rng)?;
        self.project(g, s, label)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.forward
            .ids()
            .chain(self.backward.ids())
            .chain([self.mu_w, self.mu_b, self.logvar_w, self.logvar_b])
            .collect()
    }
}
