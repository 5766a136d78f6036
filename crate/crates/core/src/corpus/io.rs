//! Tab-separated instance files.
//!
//! ```text
//! id <TAB> space-tokenized sentence <TAB> e0_start e0_end <TAB> e1_start e1_end <TAB> label-or-dash
//! ```
//! Spans are inclusive token indices before blinding. Lines starting with `#`
//! and blank lines are skipped.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::instance::RelationInstance;
use crate::corpus::schema::LabelSchema;
use crate::error::{Error, Result};

pub const UNLABELED: &str = "-";

pub fn parse_corpus(path: &Path, schema: &LabelSchema) -> Result<Vec<RelationInstance>> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus_str(&text, schema).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    })
}

pub fn parse_corpus_str(text: &str, schema: &LabelSchema) -> Result<Vec<RelationInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: "<input>".into(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
        }
        let tokens: Vec<String> = fields[1].split_whitespace().map(str::to_string).collect();
        let span = |s: &str| -> Result<(usize, usize)> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            match parts.as_slice() {
                [a, b] => match (a.parse(), b.parse()) {
                    (Ok(a), Ok(b)) => Ok((a, b)),
                    _ => Err(err(format!("bad span '{s}'"))),
                },
                _ => Err(err(format!("bad span '{s}'"))),
            }
        };
        let first = span(fields[2])?;
        let second = span(fields[3])?;
        let label = match fields[4].trim() {
            UNLABELED => None,
            name => Some(schema.index_of(name)?),
        };
        let inst = RelationInstance::from_spans(fields[0], &tokens, first, second, label).map_err(
            |e| match e {
                Error::OverlappingSpans { .. } | Error::BadSpan { .. } => err(e.to_string()),
                other => other,
            },
        )?;
        out.push(inst);
    }
    Ok(out)
}

/// Label schema from the distinct labels of a corpus file, in first-seen
/// order; the class named `negative` (any case) is the negative class.
pub fn infer_schema(text: &str) -> Result<LabelSchema> {
    let mut classes: Vec<String> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        if let Some(label) = line.split('\t').nth(4).map(str::trim) {
            if label != UNLABELED && !classes.iter().any(|c| c == label) {
                classes.push(label.to_string());
            }
        }
    }
    let negative = classes
        .iter()
        .position(|c| c.eq_ignore_ascii_case("negative"))
        .ok_or_else(|| Error::Config("cannot infer the label schema: no class named 'negative'; pass a label file".into()))?;
    LabelSchema::new(classes, negative)
}

/// Write instances in the file format; blinded entities become one-token spans.
pub fn serialize_corpus(instances: &[RelationInstance], schema: &LabelSchema) -> String {
    let mut s = String::new();
    for inst in instances {
        let label = inst.label.map_or(UNLABELED, |l| schema.name(l));
        let _ = writeln!(
            s,
            "{}\t{}\t{} {}\t{} {}\t{}",
            inst.id,
            inst.tokens.join(" "),
            inst.e0_index,
            inst.e0_index,
            inst.e1_index,
            inst.e1_index,
            label
        );
    }
    s
}

pub fn write_corpus(path: &Path, instances: &[RelationInstance], schema: &LabelSchema) -> Result<()> {
    std::fs::write(path, serialize_corpus(instances, schema))?;
    Ok(())
}
