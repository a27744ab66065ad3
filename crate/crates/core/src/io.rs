//! Tab-separated relation files.
//!
//! A relation file holds a header line of attribute names followed by one
//! tuple per line, fields separated by a tab. An optional sidecar next to it
//! (same stem, `.sizes` extension) lists `attribute<TAB>size_bits` lines that
//! override the charged size of every value of that attribute.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{AttributeValue, Relation};

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("sizes")
}

pub fn read_relation(path: &Path, site: &str) -> Result<Relation> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("cannot name relation from {}", path.display())))?;
    let text = fs::read_to_string(path)?;
    let sidecar = sidecar_path(path);
    let sizes = if sidecar.exists() {
        Some(fs::read_to_string(&sidecar)?)
    } else {
        None
    };
    parse_relation(name, &text, sizes.as_deref(), site, &path.display().to_string())
}

pub fn parse_relation(
    name: &str,
    text: &str,
    sizes: Option<&str>,
    site: &str,
    origin: &str,
) -> Result<Relation> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        line: 1,
        message: "missing header line".into(),
    })?;
    let attributes: Vec<String> = header.split('\t').map(str::to_string).collect();
    let mut rel = Relation::new(name, attributes, site)?;

    let overrides = match sizes {
        Some(s) => parse_sizes(s, &rel, origin)?,
        None => BTreeMap::new(),
    };

    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != rel.attributes().len() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 2,
                message: format!(
                    "expected {} fields, found {}",
                    rel.attributes().len(),
                    fields.len()
                ),
            });
        }
        let values = fields
            .iter()
            .enumerate()
            .map(|(col, f)| match overrides.get(&col) {
                Some(&bits) => AttributeValue::with_size_bits(f.as_bytes(), bits),
                None => AttributeValue::new(f.as_bytes()),
            })
            .collect();
        rel.push(values)?;
    }
    Ok(rel)
}

fn parse_sizes(text: &str, rel: &Relation, origin: &str) -> Result<BTreeMap<usize, u64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: format!("{origin} (sizes)"),
            line: i + 1,
            message,
        };
        let (attr, bits) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `attribute<TAB>size_bits`".into()))?;
        let bits: u64 = bits
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad size `{bits}`: {e}")))?;
        out.insert(rel.attribute_index(attr)?, bits);
    }
    Ok(out)
}

pub fn relation_to_tsv(rel: &Relation) -> Result<String> {
    let mut out = rel.attributes().join("\t");
    out.push('\n');
    for t in rel.tuples() {
        let mut fields = Vec::with_capacity(t.values.len());
        for v in &t.values {
            let s = std::str::from_utf8(v.payload()).map_err(|_| {
                Error::InvalidParameter(format!(
                    "relation `{}` tuple {} holds a non-UTF-8 value",
                    rel.name(),
                    t.tuple_id
                ))
            })?;
            if s.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidParameter(format!(
                    "relation `{}` tuple {} holds a value with a tab or newline",
                    rel.name(),
                    t.tuple_id
                )));
            }
            fields.push(s);
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_relation(rel: &Relation, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}.tsv", rel.name()));
    fs::write(&path, relation_to_tsv(rel)?)?;
    Ok(path)
}
