use serde::{Deserialize, Serialize};

use crate::corpus::vocab::{Vocab, PAD};
use crate::error::{Error, Result};

pub const E0_TOKEN: &str = "E0";
pub const E1_TOKEN: &str = "E1";

/// Length of the entity-surrounding window.
pub const WINDOW_LEN: usize = 30;
const BEFORE_E0: usize = 10;
const AFTER_E0: usize = 5;
const BEFORE_E1: usize = 5;
const AFTER_E1: usize = 10;

/// A blinded sentence with its candidate entity pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub id: String,
    pub tokens: Vec<String>,
    pub e0_index: usize,
    pub e1_index: usize,
    pub label: Option<usize>,
}

impl RelationInstance {
    /// Build from raw tokens and inclusive entity spans, blinding the entities.
    pub fn from_spans(
        id: impl Into<String>,
        tokens: &[String],
        first: (usize, usize),
        second: (usize, usize),
        label: Option<usize>,
    ) -> Result<Self> {
        let (tokens, e0_index, e1_index) = blind_entities(tokens, first, second)?;
        Ok(Self {
            id: id.into(),
            tokens,
            e0_index,
            e1_index,
            label,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Error::InvalidInstance {
            id: self.id.clone(),
            msg: msg.to_string(),
        };
        if !(self.e0_index < self.e1_index && self.e1_index < self.tokens.len()) {
            return Err(bad("entity indices must satisfy e0 < e1 < length"));
        }
        if self.tokens[self.e0_index] != E0_TOKEN || self.tokens[self.e1_index] != E1_TOKEN {
            return Err(bad("entity positions must hold E0 and E1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn without_label(&self) -> Self {
        Self {
            label: None,
            ..self.clone()
        }
    }
}

/// Collapse each entity span to a single placeholder. The span that starts
/// first in the sentence becomes `E0`.
pub fn blind_entities(
    tokens: &[String],
    a: (usize, usize),
    b: (usize, usize),
) -> Result<(Vec<String>, usize, usize)> {
    for span in [a, b] {
        if span.0 > span.1 || span.1 >= tokens.len() {
            return Err(Error::BadSpan {
                span,
                len: tokens.len(),
            });
        }
    }
    let (first, second) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    if second.0 <= first.1 {
        return Err(Error::OverlappingSpans { first, second });
    }
    let mut out = Vec::with_capacity(tokens.len());
    out.extend_from_slice(&tokens[..first.0]);
    let e0 = out.len();
    out.push(E0_TOKEN.to_string());
    out.extend_from_slice(&tokens[first.1 + 1..second.0]);
    let e1 = out.len();
    out.push(E1_TOKEN.to_string());
    out.extend_from_slice(&tokens[second.1 + 1..]);
    Ok((out, e0, e1))
}

/// Signed distance from `position` to `entity`, clamped to `±max_dist`.
pub fn clamped_distance(position: usize, entity: usize, max_dist: usize) -> i64 {
    let d = position as i64 - entity as i64;
    d.clamp(-(max_dist as i64), max_dist as i64)
}

/// Embedding row of a clamped distance: `d + max_dist`, in `0..=2·max_dist`.
pub fn position_index(distance: i64, max_dist: usize) -> usize {
    (distance + max_dist as i64) as usize
}

/// Embedding row reserved for padded sentence positions.
pub fn position_pad_index(max_dist: usize) -> usize {
    2 * max_dist + 1
}

/// Position-table rows for every token: distances to E0 and to E1.
pub fn relative_positions(inst: &RelationInstance, max_dist: usize) -> (Vec<usize>, Vec<usize>) {
    (0..inst.len())
        .map(|i| {
            (
                position_index(clamped_distance(i, inst.e0_index, max_dist), max_dist),
                position_index(clamped_distance(i, inst.e1_index, max_dist), max_dist),
            )
        })
        .unzip()
}

/// Token positions of the entity-surrounding window; `None` marks padding.
///
/// Segments: 10 before E0, 5 after E0, 5 before E1, 10 after E1. Each segment is
/// padded on the side away from its entity; the entities themselves are excluded.
pub fn window_positions(inst: &RelationInstance) -> [Option<usize>; WINDOW_LEN] {
    let n = inst.len() as i64;
    let mut out = [None; WINDOW_LEN];
    let segments = [
        (inst.e0_index as i64 - BEFORE_E0 as i64, BEFORE_E0),
        (inst.e0_index as i64 + 1, AFTER_E0),
        (inst.e1_index as i64 - BEFORE_E1 as i64, BEFORE_E1),
        (inst.e1_index as i64 + 1, AFTER_E1),
    ];
    let mut k = 0;
    for (start, len) in segments {
        for p in start..start + len as i64 {
            out[k] = (0..n).contains(&p).then_some(p as usize);
            k += 1;
        }
    }
    out
}

/// Vocabulary indices of the entity-surrounding window (always 30 long).
pub fn surrounding_window(inst: &RelationInstance, vocab: &Vocab) -> Vec<usize> {
    window_positions(inst)
        .iter()
        .map(|p| match p {
            Some(i) => vocab.index(&inst.tokens[*i]),
            None => PAD,
        })
        .collect()
}

/// Token positions the classifier sees: the whole sentence, or for sentences
/// longer than `cap`, the smallest span containing both entities widened
/// symmetrically with context.
pub fn classifier_positions(inst: &RelationInstance, cap: usize) -> Vec<usize> {
    let n = inst.len();
    if n <= cap {
        return (0..n).collect();
    }
    let (e0, e1) = (inst.e0_index, inst.e1_index);
    let span = e1 - e0 + 1;
    if span > cap {
        // entities too far apart: keep the neighbourhood of each
        let left = cap / 2;
        let right = cap - left;
        return (e0..e0 + left).chain(e1 + 1 - right..=e1).collect();
    }
    let context = cap - span;
    let mut start = e0.saturating_sub(context / 2);
    let mut end = start + cap;
    if end > n {
        end = n;
        start = n - cap;
    }
    (start..end).collect()
}

/// Model-ready index sequences for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedInstance {
    pub sentence: Vec<usize>,
    pub dist0: Vec<usize>,
    pub dist1: Vec<usize>,
    pub window: Vec<usize>,
    pub label: Option<usize>,
}

impl PreparedInstance {
    /// `min_len` pads the sentence (PAD token, PAD position row) up to the widest classifier filter.
    pub fn new(
        inst: &RelationInstance,
        vocab: &Vocab,
        max_dist: usize,
        sentence_cap: usize,
        min_len: usize,
    ) -> Self {
        let positions = classifier_positions(inst, sentence_cap);
        let mut sentence = Vec::with_capacity(positions.len().max(min_len));
        let mut dist0 = Vec::with_capacity(sentence.capacity());
        let mut dist1 = Vec::with_capacity(sentence.capacity());
        for &p in &positions {
            sentence.push(vocab.index(&inst.tokens[p]));
            dist0.push(position_index(clamped_distance(p, inst.e0_index, max_dist), max_dist));
            dist1.push(position_index(clamped_distance(p, inst.e1_index, max_dist), max_dist));
        }
        while sentence.len() < min_len {
            sentence.push(PAD);
            dist0.push(position_pad_index(max_dist));
            dist1.push(position_pad_index(max_dist));
        }
        Self {
            sentence,
            dist0,
            dist1,
            window: surrounding_window(inst, vocab),
            label: inst.label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn inst(n: usize, e0: usize, e1: usize) -> RelationInstance {
        let mut tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        tokens[e0] = E0_TOKEN.into();
        tokens[e1] = E1_TOKEN.into();
        RelationInstance {
            id: "x".into(),
            tokens,
            e0_index: e0,
            e1_index: e1,
            label: None,
        }
    }

    #[test]
    fn blinding_collapses_multi_token_span() {
        let (t, e0, e1) = blind_entities(&toks("the protein kinase binds actin"), (1, 2), (4, 4)).unwrap();
        assert_eq!(t, toks("the E0 binds E1"));
        assert_eq!((e0, e1), (1, 3));
    }

    #[test]
    fn blinding_single_token_spans_preserves_length() {
        let src = toks("a b c d e");
        let (t, _, _) = blind_entities(&src, (0, 0), (3, 3)).unwrap();
        assert_eq!(t.len(), src.len());
    }

    #[test]
    fn blinding_uses_surface_order() {
        let (t, e0, e1) = blind_entities(&toks("x alpha y beta z"), (3, 3), (1, 1)).unwrap();
        assert_eq!(t, toks("x E0 y E1 z"));
        assert_eq!((e0, e1), (1, 3));
    }

    #[test]
    fn blinding_rejects_overlap_and_out_of_bounds() {
        let src = toks("a b c d e");
        assert!(matches!(
            blind_entities(&src, (1, 3), (3, 4)),
            Err(Error::OverlappingSpans { .. })
        ));
        assert!(matches!(
            blind_entities(&src, (1, 1), (3, 5)),
            Err(Error::BadSpan { .. })
        ));
    }

    #[test]
    fn relative_positions_by_hand() {
        let i = RelationInstance {
            id: "s".into(),
            tokens: toks("E0 binds E1"),
            e0_index: 0,
            e1_index: 2,
            label: None,
        };
        let raw0: Vec<i64> = (0..3).map(|p| clamped_distance(p, 0, 50)).collect();
        let raw1: Vec<i64> = (0..3).map(|p| clamped_distance(p, 2, 50)).collect();
        assert_eq!(raw0, vec![0, 1, 2]);
        assert_eq!(raw1, vec![-2, -1, 0]);
        let (d0, d1) = relative_positions(&i, 50);
        assert_eq!(d0, vec![50, 51, 52]);
        assert_eq!(d1, vec![48, 49, 50]);
    }

    #[test]
    fn distance_clamps() {
        assert_eq!(clamped_distance(0, 80, 50), -50);
        assert_eq!(clamped_distance(200, 0, 50), 50);
    }

    #[test]
    fn window_forty_token_sentence() {
        let w = window_positions(&inst(40, 12, 20));
        let expect: Vec<Option<usize>> = (2..=11)
            .chain(13..=17)
            .chain(15..=19)
            .chain(21..=30)
            .map(Some)
            .collect();
        assert_eq!(w.to_vec(), expect);
    }

    #[test]
    fn window_pads_outer_side() {
        let w = window_positions(&inst(8, 0, 6));
        assert!(w[..10].iter().all(Option::is_none));
        // after E0: 1..=5
        assert_eq!(&w[10..15], &[Some(1), Some(2), Some(3), Some(4), Some(5)]);
        // after E1: only position 7 exists, padded on the right
        assert_eq!(w[20], Some(7));
        assert!(w[21..].iter().all(Option::is_none));
    }

    #[test]
    fn window_adjacent_entities_duplicates() {
        let w = window_positions(&inst(12, 4, 5));
        // after E0 starts at E1 itself; before E1 ends at E0 itself
        assert_eq!(w[10], Some(5));
        assert_eq!(w[19], Some(4));
    }

    #[test]
    fn classifier_view_keeps_entities_when_truncating() {
        let i = inst(250, 120, 140);
        let pos = classifier_positions(&i, 100);
        assert_eq!(pos.len(), 100);
        assert!(pos.contains(&120) && pos.contains(&140));
        let far = inst(300, 10, 250);
        let pos = classifier_positions(&far, 100);
        assert_eq!(pos.len(), 100);
        assert!(pos.contains(&10) && pos.contains(&250));
    }
}
