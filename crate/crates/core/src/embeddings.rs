//! Word and position embedding tables and the two network input representations.

use std::path::Path;

use crate::corpus::instance::WINDOW_LEN;
use crate::corpus::vocab::{Vocab, PAD};
use crate::error::{Error, Result};
use crate::networks::init::glorot_uniform;
use crate::numeric::{Graph, ParamId, ParamStore, Real, SeededRng, Tensor, Var};

/// Handles to the word table `[vocab × word_dim]` and the position table
/// `[(2·max_dist + 2) × pos_dim]`, shared by both distance channels.
#[derive(Clone, Debug)]
pub struct EmbeddingTables {
    pub word: ParamId,
    pub position: ParamId,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub max_dist: usize,
}

/// Outcome of loading a pretrained word-vector file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Vocabulary rows overwritten from the file.
    pub copied: usize,
    /// Non-reserved vocabulary rows left at their random initialisation.
    pub random: usize,
}

impl EmbeddingTables {
    /// Word rows Glorot-uniform, position rows standard normal, PAD row zero and pinned.
    pub fn init<T: Real>(
        store: &mut ParamStore<T>,
        vocab_size: usize,
        word_dim: usize,
        pos_dim: usize,
        max_dist: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut word = glorot_uniform(rng, &[vocab_size, word_dim], vocab_size, word_dim);
        word.row_mut(PAD).fill(T::zero());
        let rows = 2 * max_dist + 2;
        let position = Tensor::new(
            vec![rows, pos_dim],
            (0..rows * pos_dim).map(|_| T::of(rng.normal())).collect(),
        )
        .expect("shape");
        let word = store.register("embeddings.word", word);
        store.get_mut(word).pinned_rows = vec![PAD];
        let position = store.register("embeddings.position", position);
        Self {
            word,
            position,
            word_dim,
            pos_dim,
            max_dist,
        }
    }

    pub fn sentence_width(&self) -> usize {
        self.word_dim + 2 * self.pos_dim
    }

    pub fn set_word_trainable<T: Real>(&self, store: &mut ParamStore<T>, trainable: bool) {
        store.get_mut(self.word).trainable = trainable;
    }

    /// Overwrite word rows from a text word-vector file (`token v1 … vd` per
    /// line, optional `count dim` header). Rows missing from the file keep
    /// their initialisation; PAD stays zero.
    pub fn load_pretrained<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        path: &Path,
        vocab: &Vocab,
    ) -> Result<LoadReport> {
        let text = std::fs::read_to_string(path)?;
        let table = &mut store.get_mut(self.word).value;
        let mut covered = vec![false; vocab.len()];
        let mut copied = 0;
        for (i, line) in text.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            if i == 0 && parts.len() == 2 && parts.iter().all(|p| p.parse::<usize>().is_ok()) {
                let dim: usize = parts[1].parse().unwrap();
                if dim != self.word_dim {
                    return Err(Error::EmbeddingDim {
                        file: dim,
                        configured: self.word_dim,
                    });
                }
                continue;
            }
            let dim = parts.len() - 1;
            if dim != self.word_dim {
                return Err(Error::EmbeddingDim {
                    file: dim,
                    configured: self.word_dim,
                });
            }
            let values: Vec<T> = parts[1..]
                .iter()
                .map(|v| v.parse::<f64>().map(T::of))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("bad vector component: {e}"),
                })?;
            if let Some(row) = vocab.get(parts[0]).filter(|&r| r != PAD) {
                table.row_mut(row).copy_from_slice(&values);
                if !covered[row] {
                    covered[row] = true;
                    copied += 1;
                }
            }
        }
        let random = (4..vocab.len()).filter(|&r| !covered[r]).count();
        Ok(LoadReport { copied, random })
    }

    /// Per-token `word ∥ pos(dist0) ∥ pos(dist1)`, shape `[m × (word_dim + 2·pos_dim)]`.
    pub fn embed_sentence<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        tokens: &[usize],
        dist0: &[usize],
        dist1: &[usize],
    ) -> Result<Var> {
        if tokens.len() != dist0.len() || tokens.len() != dist1.len() {
            return Err(Error::Shape {
                op: "embed_sentence",
                lhs: vec![tokens.len()],
                rhs: vec![dist0.len(), dist1.len()],
            });
        }
        let word = g.param(self.word);
        let pos = g.param(self.position);
        let w = g.gather(word, tokens)?;
        let p0 = g.gather(pos, dist0)?;
        let p1 = g.gather(pos, dist1)?;
        g.concat_cols(&[w, p0, p1])
    }

    /// Word rows of the 30-token window, shape `[30 × word_dim]`.
    pub fn embed_window<T: Real>(&self, g: &mut Graph<'_, T>, window: &[usize]) -> Result<Var> {
        if window.len() != WINDOW_LEN {
            return Err(Error::Shape {
                op: "embed_window",
                lhs: vec![WINDOW_LEN],
                rhs: vec![window.len()],
            });
        }
        let word = g.param(self.word);
        g.gather(word, window)
    }
}
