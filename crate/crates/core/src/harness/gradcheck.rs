//! Central finite-difference checks of every differentiable primitive and of
//! the full labeled + unlabeled objective, in double precision.

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSchema, PreparedInstance, RelationInstance, Vocab};
use crate::embeddings::EmbeddingTables;
use crate::error::Result;
use crate::networks::{lstm_step, LstmParams, Model, ModelDims};
use crate::numeric::{Graph, Padding, ParamId, ParamStore, SeededRng, Tensor, Var};
use crate::semivae::{labeled_vars, unlabeled_vars, LossWeights, Noise};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so entries whose true
    /// gradient is ~0 are judged by absolute error.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    /// `parameter[flat index]` of the worst entry.
    pub worst: String,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare the backward pass of `loss` against central differences over every
/// entry of every trainable parameter in `store`.
pub fn check<F>(name: &str, store: &ParamStore<f64>, config: GradCheckConfig, loss: F) -> Result<GradCheckResult>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<Var>,
{
    let grads = {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(s);
        let l = loss(&mut g)?;
        Ok(g.scalar(l))
    };
    let mut probe = store.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst = String::new();
    let mut entries = 0;
    let ids: Vec<(ParamId, String, usize, bool)> = store
        .iter()
        .map(|(id, p)| (id, p.name.clone(), p.value.len(), p.trainable))
        .collect();
    for (id, pname, len, trainable) in ids {
        if !trainable {
            continue;
        }
        let pinned = store.get(id).pinned_rows.clone();
        let cols = if store.value(id).rank() >= 2 { len / store.value(id).shape()[0] } else { len };
        for i in 0..len {
            if pinned.contains(&(i / cols)) {
                continue;
            }
            let orig = probe.value(id).data()[i];
            probe.get_mut(id).value.data_mut()[i] = orig + config.step;
            let plus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[i] = orig - config.step;
            let minus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * config.step);
            let analytic = grads.get(id).map_or(0.0, |t| t.data()[i]);
            let err = relative_error(analytic, numeric, config.floor);
            entries += 1;
            if err > max_rel_err || worst.is_empty() {
                max_rel_err = max_rel_err.max(err);
                worst = format!("{pname}[{i}]");
            }
        }
    }
    Ok(GradCheckResult {
        name: name.to_string(),
        entries,
        max_rel_err,
        worst,
        passed: max_rel_err < config.tolerance,
    })
}

fn randn(rng: &mut SeededRng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).expect("shape")
}

/// Reduce an arbitrary node to a scalar through fixed random weights, so every
/// output entry contributes a distinct gradient.
fn project(g: &mut Graph<'_, f64>, v: Var, seed: u64) -> Result<Var> {
    let shape = g.shape(v).to_vec();
    let w = randn(&mut SeededRng::new(seed).fork(99), &shape);
    let w = g.constant(w);
    let p = g.mul(v, w)?;
    Ok(g.sum(p))
}

type OpCase = (&'static str, Vec<Vec<usize>>, fn(&mut Graph<'_, f64>, &[Var]) -> Result<Var>);

fn op_cases() -> Vec<OpCase> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 5]], |g, v| g.matmul(v[0], v[1])),
        ("matmul_vector", vec![vec![4], vec![4, 3]], |g, v| g.matmul(v[0], v[1])),
        ("add", vec![vec![3, 4], vec![3, 4]], |g, v| g.add(v[0], v[1])),
        ("sub", vec![vec![5], vec![5]], |g, v| g.sub(v[0], v[1])),
        ("add_bias", vec![vec![3, 4], vec![4]], |g, v| g.add_bias(v[0], v[1])),
        ("linear", vec![vec![2, 3], vec![3, 4], vec![4]], |g, v| g.linear(v[0], v[1], v[2])),
        ("mul", vec![vec![3, 4], vec![3, 4]], |g, v| g.mul(v[0], v[1])),
        ("scale", vec![vec![6]], |g, v| Ok(g.scale(v[0], -1.7))),
        ("sigmoid", vec![vec![3, 4]], |g, v| Ok(g.sigmoid(v[0]))),
        ("tanh", vec![vec![3, 4]], |g, v| Ok(g.tanh(v[0]))),
        ("relu", vec![vec![3, 4]], |g, v| Ok(g.relu(v[0]))),
        ("exp", vec![vec![5]], |g, v| Ok(g.exp(v[0]))),
        ("conv1d_valid", vec![vec![7, 3], vec![3, 3, 4], vec![4]], |g, v| {
            g.conv1d(v[0], v[1], v[2], Padding::Valid)
        }),
        ("conv1d_same", vec![vec![6, 3], vec![3, 3, 2], vec![2]], |g, v| {
            g.conv1d(v[0], v[1], v[2], Padding::Same)
        }),
        ("conv1d_same_even", vec![vec![5, 2], vec![4, 2, 3], vec![3]], |g, v| {
            g.conv1d(v[0], v[1], v[2], Padding::Same)
        }),
        ("max_pool_time", vec![vec![6, 4]], |g, v| g.max_pool_time(v[0])),
        ("concat", vec![vec![3], vec![4]], |g, v| g.concat(&[v[0], v[1]])),
        ("concat_cols", vec![vec![3, 2], vec![3, 4]], |g, v| g.concat_cols(&[v[0], v[1]])),
        ("reshape", vec![vec![12]], |g, v| g.reshape(v[0], &[3, 4])),
        ("row", vec![vec![3, 4]], |g, v| g.row(v[0], 1)),
        ("softmax", vec![vec![5]], |g, v| Ok(g.softmax(v[0]))),
        ("softmax_rows", vec![vec![3, 4]], |g, v| Ok(g.softmax(v[0]))),
        ("cross_entropy", vec![vec![4]], |g, v| {
            let p = g.softmax(v[0]);
            g.cross_entropy(p, 2)
        }),
        ("nll_rows", vec![vec![3, 5]], |g, v| {
            let p = g.softmax(v[0]);
            g.nll_rows(p, &[4, 0, 2])
        }),
        ("dropout_mask", vec![vec![6]], |g, v| {
            Ok(g.dropout_with_mask(v[0], vec![2.0, 0.0, 2.0, 2.0, 0.0, 2.0]))
        }),
        ("gather", vec![vec![5, 3]], |g, v| g.gather(v[0], &[4, 0, 4, 2])),
        ("sum", vec![vec![3, 4]], |g, v| Ok(g.sum(v[0]))),
        ("stack", vec![vec![1], vec![1]], |g, v| {
            let a = g.sum(v[0]);
            let b = g.sum(v[1]);
            g.stack(&[a, b])
        }),
        ("dot", vec![vec![5], vec![5]], |g, v| g.dot(v[0], v[1])),
        ("gaussian_sample", vec![vec![4], vec![4]], |g, v| {
            g.gaussian_sample_with(v[0], v[1], vec![0.3, -1.2, 0.8, 2.0])
        }),
        ("kl_gaussian", vec![vec![4], vec![4]], |g, v| g.kl_gaussian(v[0], v[1])),
        ("entropy", vec![vec![4]], |g, v| {
            let p = g.softmax(v[0]);
            Ok(g.entropy(p))
        }),
    ]
}

/// Finite-difference checks of each primitive on random inputs.
pub fn check_primitives(config: GradCheckConfig, seed: u64) -> Result<Vec<GradCheckResult>> {
    let mut out = Vec::new();
    for (k, (name, shapes, op)) in op_cases().into_iter().enumerate() {
        let mut rng = SeededRng::new(seed).fork(k as u64);
        let mut store = ParamStore::new();
        let ids: Vec<ParamId> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| store.register(format!("{name}.in{i}"), randn(&mut rng, s)))
            .collect();
        out.push(check(name, &store, config, |g| {
            let vars: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
            let y = op(g, &vars)?;
            project(g, y, seed + k as u64)
        })?);
    }
    out.push(check_lstm_step(config, seed)?);
    Ok(out)
}

fn check_lstm_step(config: GradCheckConfig, seed: u64) -> Result<GradCheckResult> {
    let mut rng = SeededRng::new(seed).fork(1000);
    let mut store = ParamStore::new();
    let p = LstmParams::init(&mut store, "lstm", 3, 4, &mut rng);
    for param in store.iter_mut() {
        if param.name.contains(".b_") {
            param.value = randn(&mut rng, param.value.shape());
        }
    }
    let x = store.register("x", randn(&mut rng, &[3]));
    let h = store.register("h", randn(&mut rng, &[4]));
    let c = store.register("c", randn(&mut rng, &[4]));
    check("lstm_step", &store, config, |g| {
        let (xv, hv, cv) = (g.param(x), g.param(h), g.param(c));
        let (h1, c1) = lstm_step(g, &p, xv, hv, cv)?;
        let both = g.concat(&[h1, c1])?;
        project(g, both, seed)
    })
}

/// The tiny model of the end-to-end check: embeddings 8, LSTM hidden 8,
/// latent 4, vocabulary 20, two classes.
pub fn tiny_model(seed: u64) -> (Model<f64>, Vec<RelationInstance>) {
    let words: Vec<String> = (0..16).map(|i| format!("w{i}")).collect();
    let mut rng = SeededRng::new(seed).fork(7);
    let instances: Vec<RelationInstance> = (0..4)
        .map(|i| {
            let len = 8 + rng.below(6);
            let mut tokens: Vec<String> = (0..len).map(|_| words[rng.below(16)].clone()).collect();
            let a = rng.below(len / 2);
            let b = a + 1 + rng.below(len - a - 1);
            tokens[a] = "ent".into();
            tokens[b] = "ent".into();
            RelationInstance::from_spans(format!("g{i}"), &tokens, (a, a), (b, b), Some(i % 2)).expect("valid spans")
        })
        .collect();
    let vocab = Vocab::from(words);
    let dims = ModelDims::tiny();
    let schema = LabelSchema::synthetic(2);
    let mut model = Model::new(dims, vocab, schema, seed);
    // move biases off zero so every path is exercised
    for p in model.store.iter_mut() {
        if p.name.ends_with(".b") || p.name.contains(".b_") {
            for v in p.value.data_mut() {
                *v = 0.1 * rng.normal();
            }
        }
    }
    (model, instances)
}

/// Mean labeled loss over two instances plus mean unlabeled loss over two
/// more, with dropout masks and latent noise held fixed.
pub fn check_objective(config: GradCheckConfig, seed: u64) -> Result<GradCheckResult> {
    let (model, instances) = tiny_model(seed);
    let prepared: Vec<PreparedInstance> = instances.iter().map(|i| model.prepare(i)).collect();
    let mut noise_rng = SeededRng::new(seed).fork(11);
    let noises: Vec<Noise> = (0..4).map(|_| Noise::draw(&mut noise_rng)).collect();
    let weights = LossWeights::default();
    let unlabeled: Vec<PreparedInstance> = prepared[2..]
        .iter()
        .map(|p| PreparedInstance { label: None, ..p.clone() })
        .collect();
    check("objective", &model.store, config, |g| {
        let mut terms = Vec::new();
        for (p, n) in prepared[..2].iter().zip(&noises) {
            terms.push(labeled_vars(g, &model, p, weights, 1, n)?.total);
        }
        let l = g.add_scalars(&terms)?;
        let l = g.scale(l, 0.5);
        let mut terms = Vec::new();
        for (p, n) in unlabeled.iter().zip(&noises[2..]) {
            terms.push(unlabeled_vars(g, &model, p, weights, 1, n)?.total);
        }
        let u = g.add_scalars(&terms)?;
        let u = g.scale(u, 0.5);
        g.add(l, u)
    })
}

/// Embedding lookup path: sentence representation through a projection.
fn check_embeddings(config: GradCheckConfig, seed: u64) -> Result<GradCheckResult> {
    let mut rng = SeededRng::new(seed).fork(2000);
    let mut store = ParamStore::new();
    let tables = EmbeddingTables::init(&mut store, 7, 3, 2, 3, &mut rng);
    check("embed_sentence", &store, config, |g| {
        let x = tables.embed_sentence(g, &[4, 0, 6, 4], &[0, 1, 2, 3], &[6, 5, 3, 7])?;
        project(g, x, seed)
    })
}

/// Every suite: primitives, embeddings and the end-to-end objective.
pub fn run_all(config: GradCheckConfig, seed: u64) -> Result<Vec<GradCheckResult>> {
    let mut out = check_primitives(config, seed)?;
    out.push(check_embeddings(config, seed)?);
    out.push(check_objective(config, seed)?);
    Ok(out)
}
