use serde::{Deserialize, Serialize};

/// Dropout rates of the three networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    pub classifier_embedding: f64,
    pub classifier_output: f64,
    pub encoder_embedding: f64,
    pub decoder_output: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        Self {
            classifier_embedding: 0.5,
            classifier_output: 0.5,
            encoder_embedding: 0.5,
            decoder_output: 0.5,
        }
    }
}

impl DropoutRates {
    pub fn none() -> Self {
        Self {
            classifier_embedding: 0.0,
            classifier_output: 0.0,
            encoder_embedding: 0.0,
            decoder_output: 0.0,
        }
    }
}

/// Architecture sizes. Defaults are the published configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub word_dim: usize,
    pub pos_dim: usize,
    /// Distances are clamped to `±max_dist`; the position table has `2·max_dist + 2` rows.
    pub max_dist: usize,
    /// Longest sentence the classifier sees.
    pub sentence_cap: usize,
    pub filter_windows: Vec<usize>,
    pub filters_per_window: usize,
    /// Hidden size of each LSTM direction.
    pub encoder_hidden: usize,
    pub latent: usize,
    /// Channel widths of the three decoder conv layers; the first is also the sheet width.
    pub decoder_widths: Vec<usize>,
    pub decoder_window: usize,
    pub dropout: DropoutRates,
    /// Feed the label one-hot to the latent projections (q(z|x,y)).
    pub encoder_uses_label: bool,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            word_dim: 200,
            pos_dim: 20,
            max_dist: 50,
            sentence_cap: 100,
            filter_windows: vec![3, 4, 5],
            filters_per_window: 100,
            encoder_hidden: 300,
            latent: 32,
            decoder_widths: vec![300, 600, 1000],
            decoder_window: 3,
            dropout: DropoutRates::default(),
            encoder_uses_label: false,
        }
    }
}

impl ModelDims {
    /// Desk-scale configuration for experiments on a single CPU.
    pub fn small() -> Self {
        Self {
            word_dim: 24,
            pos_dim: 6,
            max_dist: 30,
            sentence_cap: 100,
            filter_windows: vec![3, 4, 5],
            filters_per_window: 16,
            encoder_hidden: 24,
            latent: 8,
            decoder_widths: vec![24, 24, 24],
            decoder_window: 3,
            dropout: DropoutRates::default(),
            encoder_uses_label: false,
        }
    }

    /// Tiny configuration used by the gradient checks.
    pub fn tiny() -> Self {
        Self {
            word_dim: 8,
            pos_dim: 3,
            max_dist: 6,
            sentence_cap: 100,
            filter_windows: vec![3, 4, 5],
            filters_per_window: 4,
            encoder_hidden: 8,
            latent: 4,
            decoder_widths: vec![4, 5, 6],
            decoder_window: 3,
            dropout: DropoutRates::default(),
            encoder_uses_label: false,
        }
    }

    pub fn sentence_width(&self) -> usize {
        self.word_dim + 2 * self.pos_dim
    }

    pub fn classifier_features(&self) -> usize {
        self.filter_windows.len() * self.filters_per_window
    }

    pub fn min_sentence_len(&self) -> usize {
        self.filter_windows.iter().copied().max().unwrap_or(1)
    }

    /// Closed-form parameter counts `(embeddings, classifier, encoder, decoder)`.
    pub fn param_counts(&self, vocab_size: usize, n_classes: usize) -> (usize, usize, usize, usize) {
        let emb = vocab_size * self.word_dim + (2 * self.max_dist + 2) * self.pos_dim;
        let d = self.sentence_width();
        let f = self.filters_per_window;
        let cls = self.filter_windows.iter().map(|w| w * d * f + f).sum::<usize>()
            + self.classifier_features() * n_classes
            + n_classes;
        let h = self.encoder_hidden;
        let lstm = 4 * (self.word_dim * h + h * h + h);
        let summary = 2 * h + if self.encoder_uses_label { n_classes } else { 0 };
        let enc = 2 * lstm + 2 * (summary * self.latent + self.latent);
        let w = &self.decoder_widths;
        let sheet = crate::corpus::WINDOW_LEN * w[0];
        let mut dec = (self.latent + n_classes) * sheet + sheet;
        let mut c_in = w[0];
        for &c_out in w {
            dec += self.decoder_window * c_in * c_out + c_out;
            c_in = c_out;
        }
        dec += c_in * vocab_size + vocab_size;
        (emb, cls, enc, dec)
    }
}
