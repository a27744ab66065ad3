//! Brute-force reference answers used by `verify`.

use std::collections::BTreeSet;

use crate::engine::{OutputTuple, RoundSpec, Source};
use crate::error::{Error, Result};
use crate::model::{AttributeValue, Origin, Relation, TupleId};

/// An output reduced to what must match across engines: which tuples, and which values.
pub type OutputKey = (Vec<(String, TupleId)>, Vec<AttributeValue>);

pub fn canonical(outputs: &[OutputTuple]) -> Vec<OutputKey> {
    let mut out: Vec<OutputKey> = outputs
        .iter()
        .map(|o| {
            (
                o.origins.iter().map(|g| (g.relation.clone(), g.tuple_id)).collect(),
                o.values.clone(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Left-deep nested-loop join: `relations[0]` joined with each following
/// relation on the attributes in `steps[i - 1]`.
pub fn cascade(relations: &[&Relation], steps: &[Vec<String>]) -> Result<(Vec<String>, Vec<OutputTuple>)> {
    let Some(first) = relations.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut attrs: Vec<String> = first.attributes().to_vec();
    let mut rows: Vec<OutputTuple> = first
        .tuples()
        .iter()
        .map(|t| OutputTuple {
            origins: vec![origin(first, t.tuple_id)],
            values: t.values.clone(),
        })
        .collect();
    for (rel, on) in relations[1..].iter().zip(steps) {
        let lcols: Vec<usize> = on
            .iter()
            .map(|a| {
                attrs
                    .iter()
                    .position(|x| x == a)
                    .ok_or_else(|| Error::Schema(format!("no attribute `{a}` on the left")))
            })
            .collect::<Result<_>>()?;
        let rcols: Vec<usize> = on.iter().map(|a| rel.attribute_index(a)).collect::<Result<_>>()?;
        let mut next = Vec::new();
        for row in &rows {
            for t in rel.tuples() {
                if lcols.iter().zip(&rcols).all(|(&l, &r)| row.values[l] == t.values[r]) {
                    let mut origins = row.origins.clone();
                    origins.push(origin(rel, t.tuple_id));
                    let mut values = row.values.clone();
                    values.extend(
                        t.values
                            .iter()
                            .enumerate()
                            .filter(|(c, _)| !rcols.contains(c))
                            .map(|(_, v)| v.clone()),
                    );
                    next.push(OutputTuple { origins, values });
                }
            }
        }
        attrs.extend(
            rel.attributes()
                .iter()
                .enumerate()
                .filter(|(c, _)| !rcols.contains(c))
                .map(|(_, a)| a.clone()),
        );
        rows = next;
    }
    Ok((attrs, rows))
}

/// Natural-join steps for a cascade: each relation joins the running schema
/// on every attribute they share.
pub fn natural_steps(relations: &[&Relation]) -> Vec<Vec<String>> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut steps = Vec::new();
    for (i, rel) in relations.iter().enumerate() {
        if i > 0 {
            steps.push(
                rel.attributes()
                    .iter()
                    .filter(|a| seen.contains(a.as_str()))
                    .cloned()
                    .collect(),
            );
        }
        seen.extend(rel.attributes().iter().map(String::as_str));
    }
    steps
}

fn origin(rel: &Relation, id: TupleId) -> Origin {
    Origin {
        relation: rel.name().to_string(),
        tuple_id: id,
        site: rel.home_site().to_string(),
    }
}

/// Reference answer for a left-deep plan: the first round joins two
/// relations, each later round joins the previous output with one relation.
pub fn for_rounds(relations: &[Relation], rounds: &[RoundSpec]) -> Result<(Vec<String>, Vec<OutputTuple>)> {
    let find = |name: &str| {
        relations
            .iter()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::Schema(format!("unknown relation `{name}`")))
    };
    let mut order = Vec::new();
    let mut steps = Vec::new();
    for (i, r) in rounds.iter().enumerate() {
        match (i, &r.left, &r.right) {
            (0, Source::Relation(a), Source::Relation(b)) => {
                order.push(find(a)?);
                order.push(find(b)?);
            }
            (_, Source::Previous, Source::Relation(b)) if i > 0 => order.push(find(b)?),
            _ => {
                return Err(Error::Config(format!(
                    "round {} is not left-deep; the reference join cannot follow it",
                    i + 1
                )))
            }
        }
        steps.push(r.join_attrs.clone());
    }
    cascade(&order, &steps)
}
