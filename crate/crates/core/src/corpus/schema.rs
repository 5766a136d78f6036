use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered relation classes, one of which is the negative ("no relation") class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub classes: Vec<String>,
    pub negative: usize,
}

impl LabelSchema {
    pub fn new(classes: Vec<String>, negative: usize) -> Result<Self> {
        if classes.len() < 2 || negative >= classes.len() {
            return Err(Error::Config(format!(
                "label schema needs at least two classes and a valid negative index, got {classes:?} / {negative}"
            )));
        }
        Ok(Self { classes, negative })
    }

    /// Protein-protein interaction: binary.
    pub fn ppi() -> Self {
        Self::named(&["positive", "negative"], 1)
    }

    /// Drug-drug interaction: four types plus Negative.
    pub fn ddi() -> Self {
        Self::named(&["advice", "effect", "mechanism", "int", "negative"], 4)
    }

    /// Chemical-protein interaction: five types plus Negative.
    pub fn cpi() -> Self {
        Self::named(
            &["activator", "inhibitor", "agonist", "antagonist", "substrate", "negative"],
            5,
        )
    }

    /// Schema used by the synthetic generator: `negative` first, then `rel1..`.
    pub fn synthetic(n_classes: usize) -> Self {
        let mut classes = vec!["negative".to_string()];
        classes.extend((1..n_classes).map(|c| format!("rel{c}")));
        Self {
            classes,
            negative: 0,
        }
    }

    fn named(names: &[&str], negative: usize) -> Self {
        Self {
            classes: names.iter().map(|s| s.to_string()).collect(),
            negative,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownLabel {
                label: name.to_string(),
                classes: self.classes.clone(),
            })
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    /// Parse the label file format: one class per line, optionally preceded by
    /// `negative=<name>`. Without that line a class named `negative`
    /// (any case) is the negative class.
    pub fn parse(text: &str) -> Result<Self> {
        let mut negative_name = None;
        let mut classes: Vec<String> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if let Some(name) = line.strip_prefix("negative=") {
                if !classes.is_empty() || negative_name.is_some() {
                    return Err(Error::Config("'negative=' must be the first line".into()));
                }
                negative_name = Some(name.trim().to_string());
            } else if classes.iter().any(|c| c == line) {
                return Err(Error::Config(format!("duplicate class '{line}'")));
            } else {
                classes.push(line.to_string());
            }
        }
        let negative = match negative_name {
            Some(name) => match classes.iter().position(|c| *c == name) {
                Some(i) => i,
                None => {
                    classes.push(name);
                    classes.len() - 1
                }
            },
            None => classes
                .iter()
                .position(|c| c.eq_ignore_ascii_case("negative"))
                .ok_or_else(|| Error::Config("label schema has no negative class".into()))?,
        };
        Self::new(classes, negative)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("negative={}\n", self.classes[self.negative]);
        for c in &self.classes {
            s.push_str(c);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_class_counts() {
        assert_eq!(LabelSchema::ppi().len(), 2);
        assert_eq!(LabelSchema::ddi().len(), 5);
        assert_eq!(LabelSchema::cpi().len(), 6);
    }

    #[test]
    fn parse_with_and_without_negative_line() {
        let s = LabelSchema::parse("negative=none\npositive\n").unwrap();
        assert_eq!(s.classes, vec!["positive", "none"]);
        assert_eq!(s.negative, 1);
        let s = LabelSchema::parse("positive\nNegative\n").unwrap();
        assert_eq!(s.negative, 1);
        assert!(LabelSchema::parse("a\nb\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let s = LabelSchema::ddi();
        assert_eq!(LabelSchema::parse(&s.to_file_string()).unwrap(), s);
    }

    #[test]
    fn unknown_label_lists_classes() {
        let err = LabelSchema::ppi().index_of("maybe").unwrap_err();
        assert!(err.to_string().contains("positive"));
    }
}
