//! Labeled and unlabeled objectives and their individual terms.

use crate::corpus::PreparedInstance;
use crate::error::{Error, Result};
use crate::networks::Model;
use crate::numeric::{Graph, Real, SeededRng, Tensor, Var};

/// Scalar loss terms of one instance or the mean over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    /// Expected reconstruction NLL summed over the 30 window positions.
    pub reconstruction: f64,
    pub kl: f64,
    /// Cross-entropy of the classifier; zero for unlabeled data.
    pub classification: f64,
    /// Entropy of q(y|x); zero for labeled data.
    pub entropy: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut out = LossBreakdown::default();
        for b in items {
            out.reconstruction += b.reconstruction / n;
            out.kl += b.kl / n;
            out.classification += b.classification / n;
            out.entropy += b.entropy / n;
            out.total += b.total / n;
        }
        out
    }
}

/// Scalar weights applied to the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub kl: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 1.0, kl: 1.0 }
    }
}

/// Randomness for one instance evaluation, one independent stream per source.
///
/// Every term clones the stream it needs, so evaluating the same `Noise`
/// twice reproduces the same dropout masks and latent samples.
#[derive(Clone, Debug)]
pub struct Noise {
    pub classifier: Option<SeededRng>,
    pub encoder: Option<SeededRng>,
    pub decoder: Option<SeededRng>,
    pub latent: SeededRng,
}

impl Noise {
    /// Training noise (dropout on) seeded from `rng`.
    pub fn draw(rng: &mut SeededRng) -> Self {
        let base = SeededRng::new(rng.next_u64());
        Self {
            classifier: Some(base.fork(1)),
            encoder: Some(base.fork(2)),
            decoder: Some(base.fork(3)),
            latent: base.fork(4),
        }
    }

    /// Dropout off; the latent sample is still drawn from `rng`.
    pub fn eval(rng: &mut SeededRng) -> Self {
        Self {
            classifier: None,
            encoder: None,
            decoder: None,
            latent: SeededRng::new(rng.next_u64()),
        }
    }

    fn eps<T: Real>(&self, samples: usize, dim: usize) -> Vec<Vec<T>> {
        let mut rng = self.latent.clone();
        (0..samples)
            .map(|_| (0..dim).map(|_| T::of(rng.normal())).collect())
            .collect()
    }
}

/// Graph nodes of an instance loss.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub reconstruction: Var,
    pub kl: Var,
    pub classification: Option<Var>,
    pub entropy: Option<Var>,
    pub total: Var,
}

impl LossVars {
    pub fn breakdown<T: Real>(&self, g: &Graph<'_, T>) -> LossBreakdown {
        LossBreakdown {
            reconstruction: g.scalar(self.reconstruction).f64(),
            kl: g.scalar(self.kl).f64(),
            classification: self.classification.map_or(0.0, |v| g.scalar(v).f64()),
            entropy: self.entropy.map_or(0.0, |v| g.scalar(v).f64()),
            total: g.scalar(self.total).f64(),
        }
    }

    /// Fails on the first non-finite term, naming it.
    pub fn check_finite<T: Real>(&self, g: &Graph<'_, T>) -> Result<()> {
        let terms = [
            ("reconstruction", Some(self.reconstruction)),
            ("kl", Some(self.kl)),
            ("classification", self.classification),
            ("entropy", self.entropy),
            ("total", Some(self.total)),
        ];
        for (term, v) in terms {
            if let Some(v) = v {
                if !g.scalar(v).f64().is_finite() {
                    return Err(Error::NonFinite { term });
                }
            }
        }
        Ok(())
    }
}

fn one_hot<T: Real>(g: &mut Graph<'_, T>, class: usize, k: usize) -> Var {
    let mut v = vec![T::zero(); k];
    v[class] = T::one();
    g.constant(Tensor::vector(v))
}

/// Encoder posterior `(mu, logvar)` of the window.
pub fn encode<T: Real>(
    g: &mut Graph<'_, T>,
    model: &Model<T>,
    prep: &PreparedInstance,
    label: Option<Var>,
    noise: &Noise,
) -> Result<(Var, Var)> {
    let window = model.embeddings.embed_window(g, &prep.window)?;
    model.encoder.forward(g, window, label, noise.encoder.clone().as_mut())
}

/// Latent samples `z = mu + exp(logvar/2)·eps`, one per configured sample.
pub fn sample_latents<T: Real>(
    g: &mut Graph<'_, T>,
    mu: Var,
    logvar: Var,
    samples: usize,
    noise: &Noise,
) -> Result<Vec<Var>> {
    let dim = g.shape(mu)[0];
    noise
        .eps::<T>(samples, dim)
        .into_iter()
        .map(|eps| g.gaussian_sample_with(mu, logvar, eps))
        .collect()
}

/// Reconstruction NLL of the window under `label_vec`, averaged over the z samples.
pub fn reconstruction<T: Real>(
    g: &mut Graph<'_, T>,
    model: &Model<T>,
    prep: &PreparedInstance,
    zs: &[Var],
    label_vec: Var,
    noise: &Noise,
) -> Result<Var> {
    let mut per_sample = Vec::with_capacity(zs.len());
    for &z in zs {
        let probs = model.decoder.forward(g, z, label_vec, noise.decoder.clone().as_mut())?;
        per_sample.push(g.nll_rows(probs, &prep.window)?);
    }
    let sum = g.add_scalars(&per_sample)?;
    Ok(if zs.len() == 1 {
        sum
    } else {
        g.scale(sum, T::of(1.0 / zs.len() as f64))
    })
}

/// `L(x,y) = recon + w_kl·KL + α·CE(q(y|x), y)` with the gold label of `prep`.
pub fn labeled_vars<T: Real>(
    g: &mut Graph<'_, T>,
    model: &Model<T>,
    prep: &PreparedInstance,
    weights: LossWeights,
    z_samples: usize,
    noise: &Noise,
) -> Result<LossVars> {
    let y = prep
        .label
        .ok_or_else(|| Error::MissingLabel("labeled loss needs a gold label".into()))?;
    let y_vec = one_hot(g, y, model.n_classes());
    let (mu, logvar) = encode(g, model, prep, Some(y_vec), noise)?;
    let zs = sample_latents(g, mu, logvar, z_samples, noise)?;
    let rec = reconstruction(g, model, prep, &zs, y_vec, noise)?;
    let kl = g.kl_gaussian(mu, logvar)?;
    let probs = model.classify(g, prep, noise.classifier.clone().as_mut())?;
    let ce = g.cross_entropy(probs, y)?;
    let total = combine(g, rec, kl, Some(ce), weights);
    Ok(LossVars {
        reconstruction: rec,
        kl,
        classification: Some(ce),
        entropy: None,
        total,
    })
}

/// `recon + w_kl·KL (+ α·CE)`, associated left to right.
fn combine<T: Real>(g: &mut Graph<'_, T>, rec: Var, kl: Var, ce: Option<Var>, weights: LossWeights) -> Var {
    let kl_w = if weights.kl == 1.0 { kl } else { g.scale(kl, T::of(weights.kl)) };
    let mut parts = vec![rec, kl_w];
    if let Some(ce) = ce {
        parts.push(g.scale(ce, T::of(weights.alpha)));
    }
    g.add_scalars(&parts).expect("scalar terms")
}

/// `U(x) = Σ_y q(y|x)·L(x,y) − H(q(y|x))`, marginalising exactly over all
/// classes with one z shared across them. The gold label is never read.
pub fn unlabeled_vars<T: Real>(
    g: &mut Graph<'_, T>,
    model: &Model<T>,
    prep: &PreparedInstance,
    weights: LossWeights,
    z_samples: usize,
    noise: &Noise,
) -> Result<LossVars> {
    let k = model.n_classes();
    let q = model.classify(g, prep, noise.classifier.clone().as_mut())?;
    if model.encoder.uses_label {
        // the posterior depends on y, so each class gets its own KL and z
        let mut per_class = Vec::with_capacity(k);
        let (mut recs, mut kls) = (Vec::with_capacity(k), Vec::with_capacity(k));
        for y in 0..k {
            let y_vec = one_hot(g, y, k);
            let (mu, logvar) = encode(g, model, prep, Some(y_vec), noise)?;
            let zs = sample_latents(g, mu, logvar, z_samples, noise)?;
            let rec = reconstruction(g, model, prep, &zs, y_vec, noise)?;
            let kl = g.kl_gaussian(mu, logvar)?;
            let l = combine(g, rec, kl, None, weights);
            recs.push(rec);
            kls.push(kl);
            per_class.push(l);
        }
        let ls = g.stack(&per_class)?;
        let expected = g.dot(q, ls)?;
        let rs = g.stack(&recs)?;
        let rec = g.dot(q, rs)?;
        let ks = g.stack(&kls)?;
        let kl = g.dot(q, ks)?;
        let h = g.entropy(q);
        let total = g.sub(expected, h)?;
        return Ok(LossVars {
            reconstruction: rec,
            kl,
            classification: None,
            entropy: Some(h),
            total,
        });
    }
    let (mu, logvar) = encode(g, model, prep, None, noise)?;
    let zs = sample_latents(g, mu, logvar, z_samples, noise)?;
    let mut recs = Vec::with_capacity(k);
    for y in 0..k {
        let y_vec = one_hot(g, y, k);
        recs.push(reconstruction(g, model, prep, &zs, y_vec, noise)?);
    }
    let rs = g.stack(&recs)?;
    // per-class bound L(x,y) = rec_y + KL
    let kl = g.kl_gaussian(mu, logvar)?;
    let per_class: Vec<Var> = recs.iter().map(|&r| combine(g, r, kl, None, weights)).collect();
    let ls = g.stack(&per_class)?;
    let expected = g.dot(q, ls)?;
    let rec = g.dot(q, rs)?;
    let h = g.entropy(q);
    let total = g.sub(expected, h)?;
    Ok(LossVars {
        reconstruction: rec,
        kl,
        classification: None,
        entropy: Some(h),
        total,
    })
}

/// Classifier cross-entropy alone (the supervised baseline objective).
pub fn supervised_vars<T: Real>(g: &mut Graph<'_, T>, model: &Model<T>, prep: &PreparedInstance, noise: &Noise) -> Result<Var> {
    let y = prep
        .label
        .ok_or_else(|| Error::MissingLabel("supervised loss needs a gold label".into()))?;
    let probs = model.classify(g, prep, noise.classifier.clone().as_mut())?;
    g.cross_entropy(probs, y)
}

/// Value of the labeled loss of one instance.
pub fn labeled_loss<T: Real>(
    model: &Model<T>,
    prep: &PreparedInstance,
    weights: LossWeights,
    z_samples: usize,
    noise: &Noise,
) -> Result<LossBreakdown> {
    let mut g = Graph::new(&model.store);
    let vars = labeled_vars(&mut g, model, prep, weights, z_samples, noise)?;
    Ok(vars.breakdown(&g))
}

/// Value of the unlabeled loss of one instance.
pub fn unlabeled_loss<T: Real>(
    model: &Model<T>,
    prep: &PreparedInstance,
    weights: LossWeights,
    z_samples: usize,
    noise: &Noise,
) -> Result<LossBreakdown> {
    let mut g = Graph::new(&model.store);
    let vars = unlabeled_vars(&mut g, model, prep, weights, z_samples, noise)?;
    Ok(vars.breakdown(&g))
}

/// Reconstruction term alone, computed in its own graph.
pub fn reconstruction_term<T: Real>(
    model: &Model<T>,
    prep: &PreparedInstance,
    z_samples: usize,
    noise: &Noise,
) -> Result<T> {
    let y = prep
        .label
        .ok_or_else(|| Error::MissingLabel("reconstruction term needs a gold label".into()))?;
    let mut g = Graph::new(&model.store);
    let y_vec = one_hot(&mut g, y, model.n_classes());
    let (mu, logvar) = encode(&mut g, model, prep, Some(y_vec), noise)?;
    let zs = sample_latents(&mut g, mu, logvar, z_samples, noise)?;
    let rec = reconstruction(&mut g, model, prep, &zs, y_vec, noise)?;
    Ok(g.scalar(rec))
}

/// KL term alone, computed in its own graph.
pub fn kl_term<T: Real>(model: &Model<T>, prep: &PreparedInstance, noise: &Noise) -> Result<T> {
    let mut g = Graph::new(&model.store);
    let label = prep.label.map(|y| one_hot(&mut g, y, model.n_classes()));
    let (mu, logvar) = encode(&mut g, model, prep, label, noise)?;
    let kl = g.kl_gaussian(mu, logvar)?;
    Ok(g.scalar(kl))
}

/// Classification cross-entropy alone, computed in its own graph.
pub fn classification_term<T: Real>(model: &Model<T>, prep: &PreparedInstance, noise: &Noise) -> Result<T> {
    let mut g = Graph::new(&model.store);
    let ce = supervised_vars(&mut g, model, prep, noise)?;
    Ok(g.scalar(ce))
}
