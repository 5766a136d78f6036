//! Synthetic relation corpus with a controllable, known signal.
//!
//! Class 0 is Negative. Every positive class owns a lexicon of cue words; a
//! positive instance carries, with probability `trigger_strength`, cue words of
//! its class between the two entities. Cue words of random classes also appear
//! outside the entity span at a label-independent rate, so only their position
//! relative to the entities is informative.

use serde::{Deserialize, Serialize};

use crate::corpus::instance::RelationInstance;
use crate::corpus::schema::LabelSchema;
use crate::numeric::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub n_instances: usize,
    /// Number of distinct filler words.
    pub vocab_size: usize,
    pub trigger_strength: f64,
    /// Inclusive range of sentence lengths before blinding.
    pub sentence_len_range: (usize, usize),
    pub negative_fraction: f64,
    pub cues_per_class: usize,
    /// Cue words inserted between the entities of a signalled positive instance.
    pub cues_per_instance: usize,
    /// Probability of a cue word outside the entity span, for any label.
    pub distractor_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 3,
            n_instances: 5000,
            vocab_size: 200,
            trigger_strength: 0.9,
            sentence_len_range: (12, 30),
            negative_fraction: 0.78,
            cues_per_class: 12,
            cues_per_instance: 2,
            distractor_rate: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn schema(&self) -> LabelSchema {
        LabelSchema::synthetic(self.n_classes)
    }

    pub fn cue_word(class: usize, k: usize) -> String {
        format!("cue{class}_{k}")
    }

    /// Class owning a cue word, if `token` is one.
    pub fn cue_class(token: &str) -> Option<usize> {
        let rest = token.strip_prefix("cue")?;
        let (class, _) = rest.split_once('_')?;
        class.parse().ok()
    }
}

/// Generate `spec.n_instances` labeled, already-blinded instances.
pub fn generate_synthetic_corpus(spec: &SynthSpec, rng: &mut SeededRng) -> Vec<RelationInstance> {
    assert!(spec.n_classes >= 2, "need a negative and at least one positive class");
    let (min_len, max_len) = spec.sentence_len_range;
    let min_len = min_len.max(spec.cues_per_instance + 6);
    let max_len = max_len.max(min_len);
    (0..spec.n_instances)
        .map(|i| {
            let label = if rng.bernoulli(spec.negative_fraction) {
                0
            } else {
                1 + rng.below(spec.n_classes - 1)
            };
            let len = min_len + rng.below(max_len - min_len + 1);
            // raw layout: entities occupy 1–2 tokens each
            let e0_width = 1 + rng.below(2);
            let e1_width = 1 + rng.below(2);
            let max_gap = (len - e0_width - e1_width).min(8);
            let min_gap = spec.cues_per_instance.max(1).min(max_gap);
            let gap = min_gap + rng.below(max_gap - min_gap + 1);
            let slack = len - e0_width - e1_width - gap;
            let e0_start = rng.below(slack + 1);
            let e1_start = e0_start + e0_width + gap;

            let mut tokens: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.below(spec.vocab_size.max(1))))
                .collect();
            for k in 0..e0_width {
                tokens[e0_start + k] = format!("ent{}", rng.below(50));
            }
            for k in 0..e1_width {
                tokens[e1_start + k] = format!("ent{}", rng.below(50));
            }
            let between: Vec<usize> = (e0_start + e0_width..e1_start).collect();
            if label != 0 && rng.bernoulli(spec.trigger_strength) {
                let mut slots = between.clone();
                rng.shuffle(&mut slots);
                for &slot in slots.iter().take(spec.cues_per_instance) {
                    tokens[slot] = SynthSpec::cue_word(label, rng.below(spec.cues_per_class));
                }
            }
            let outside: Vec<usize> = (0..e0_start).chain(e1_start + e1_width..len).collect();
            if !outside.is_empty() && rng.bernoulli(spec.distractor_rate) {
                let slot = outside[rng.below(outside.len())];
                let class = 1 + rng.below(spec.n_classes - 1);
                tokens[slot] = SynthSpec::cue_word(class, rng.below(spec.cues_per_class));
            }
            RelationInstance::from_spans(
                format!("syn{i}"),
                &tokens,
                (e0_start, e0_start + e0_width - 1),
                (e1_start, e1_start + e1_width - 1),
                Some(label),
            )
            .expect("generator produces valid spans")
        })
        .collect()
}

/// Reference classifier that knows the generator: the class of the first cue
/// word between the entities, else Negative.
pub fn trigger_oracle(inst: &RelationInstance) -> usize {
    inst.tokens[inst.e0_index + 1..inst.e1_index]
        .iter()
        .find_map(|t| SynthSpec::cue_class(t))
        .unwrap_or(0)
}
