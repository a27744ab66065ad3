//! The worked examples as data.
//!
//! Relation fixtures hold several relations in one file: `#` starts a
//! comment line, `@relation <name> <site>` starts a relation, and the lines
//! after it are a tab-separated relation with a header.

use crate::engine::Topology;
use crate::error::{Error, Result};
use crate::io::parse_relation;
use crate::model::Relation;

use super::graph::SocialGraph;

pub const FIG2: &str = include_str!("../../fixtures/fig2.rel");
pub const FIG5: &str = include_str!("../../fixtures/fig5.rel");
pub const FIG6: &str = include_str!("../../fixtures/fig6.graph");
pub const KNN: &str = include_str!("../../fixtures/knn.rel");
pub const KNN_K: usize = 2;

pub fn parse_relations(text: &str, origin: &str) -> Result<Vec<Relation>> {
    let mut out = Vec::new();
    let mut current: Option<(String, String, String)> = None;
    let flush = |cur: Option<(String, String, String)>, out: &mut Vec<Relation>| -> Result<()> {
        if let Some((name, site, body)) = cur {
            out.push(parse_relation(&name, &body, None, &site, origin)?);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("@relation") {
            flush(current.take(), &mut out)?;
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [name, site] = parts[..] else {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: i + 1,
                    message: "expected `@relation <name> <site>`".into(),
                });
            };
            current = Some((name.into(), site.into(), String::new()));
            continue;
        }
        match current.as_mut() {
            Some((_, _, body)) => {
                body.push_str(line);
                body.push('\n');
            }
            None if line.trim().is_empty() => {}
            None => {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: i + 1,
                    message: "data before the first `@relation`".into(),
                })
            }
        }
    }
    flush(current, &mut out)?;
    Ok(out)
}

pub struct Fig2 {
    pub x: Relation,
    pub y: Relation,
}

pub fn fig2() -> Fig2 {
    let mut rels = parse_relations(FIG2, "fig2.rel").expect("fixture parses");
    let y = rels.pop().expect("Y");
    let x = rels.pop().expect("X");
    Fig2 { x, y }
}

pub struct Fig5 {
    /// Cluster id and the relations stored there, in cluster order.
    pub clusters: Vec<(String, Vec<Relation>)>,
    pub global: String,
}

impl Fig5 {
    pub fn topology(&self) -> Topology {
        let spec: Vec<(&str, Vec<&str>)> = self
            .clusters
            .iter()
            .map(|(site, rels)| (site.as_str(), rels.iter().map(Relation::name).collect()))
            .collect();
        Topology::clusters(&spec, &self.global)
    }

    pub fn relations(&self) -> Vec<Relation> {
        self.clusters.iter().flat_map(|(_, r)| r.iter().cloned()).collect()
    }
}

pub fn fig5() -> Fig5 {
    let rels = parse_relations(FIG5, "fig5.rel").expect("fixture parses");
    let mut clusters: Vec<(String, Vec<Relation>)> = Vec::new();
    for r in rels {
        match clusters.iter_mut().find(|(s, _)| s == r.home_site()) {
            Some((_, v)) => v.push(r),
            None => clusters.push((r.home_site().to_string(), vec![r])),
        }
    }
    Fig5 {
        clusters,
        global: "C2".into(),
    }
}

/// Query points R and data points S of the k-NN demo.
pub fn knn_points() -> (Relation, Relation) {
    let mut rels = parse_relations(KNN, "knn.rel").expect("fixture parses");
    let s = rels.pop().expect("S");
    let r = rels.pop().expect("R");
    (r, s)
}

pub fn fig6() -> SocialGraph {
    SocialGraph::parse(FIG6).expect("fixture parses")
}
