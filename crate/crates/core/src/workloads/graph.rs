//! Shortest paths over a person/photo graph, computed on node metadata.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{Channel, CostLedger, Payload};
use crate::model::CostModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Person,
    Photo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub payload_bits: u64,
}

/// Undirected graph; photos only connect to persons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SocialGraph {
    nodes: Vec<Node>,
    adjacency: Vec<Vec<usize>>,
    index: BTreeMap<String, usize>,
}

impl SocialGraph {
    pub fn new(nodes: Vec<Node>, edges: &[(String, String)]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("node `{}` declared twice", n.id)));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (a, b) in edges {
            let lookup = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("edge names unknown node `{id}`")))
            };
            let (i, j) = (lookup(a)?, lookup(b)?);
            if nodes[i].kind == NodeKind::Photo && nodes[j].kind == NodeKind::Photo {
                return Err(Error::InvalidParameter(format!("photos `{a}` and `{b}` cannot share an edge")));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self loop at `{a}`")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(Self {
            nodes,
            adjacency,
            index,
        })
    }

    /// Lines `node <id> <person|photo> <payload bits>` and `edge <id> <id>`; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                path: "graph".into(),
                line: i + 1,
                message: m.into(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts[..] {
                ["node", id, kind, bits] => {
                    let kind = match kind {
                        "person" => NodeKind::Person,
                        "photo" => NodeKind::Photo,
                        _ => return Err(bad("node kind must be person or photo")),
                    };
                    let payload_bits = bits.parse().map_err(|_| bad("bad payload size"))?;
                    nodes.push(Node {
                        id: id.into(),
                        kind,
                        payload_bits,
                    });
                }
                ["edge", a, b] => edges.push((a.to_string(), b.to_string())),
                _ => return Err(bad("expected a node or edge line")),
            }
        }
        Self::new(nodes, &edges)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.position(a), self.position(b)) {
            (Some(i), Some(j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// A random graph: `persons` persons, `photos` photos, each possible
    /// allowed edge present with probability `density`.
    pub fn random(persons: usize, photos: usize, density: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = Vec::new();
        for i in 0..persons {
            nodes.push(Node {
                id: format!("P{i}"),
                kind: NodeKind::Person,
                payload_bits: 8 * rng.random_range(64..512),
            });
        }
        for i in 0..photos {
            nodes.push(Node {
                id: format!("Pic{i}"),
                kind: NodeKind::Photo,
                payload_bits: 8 * rng.random_range(1024..8192),
            });
        }
        let mut edges = Vec::new();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if nodes[i].kind == NodeKind::Photo && nodes[j].kind == NodeKind::Photo {
                    continue;
                }
                if rng.random_bool(density) {
                    edges.push((nodes[i].id.clone(), nodes[j].id.clone()));
                }
            }
        }
        Self::new(nodes, &edges)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    /// Edges on the path; `None` when `dst` cannot be reached.
    pub hops: Option<usize>,
    /// Node ids from `src` to `dst`; empty when there is no path or `src == dst`.
    pub nodes: Vec<String>,
    pub fetched: Vec<String>,
    pub ledger: CostLedger,
    pub rounds_executed: usize,
}

fn id_bits(n: &Node) -> u64 {
    8 * n.id.len() as u64
}

/// Breadth-first search, one round per level, on node ids and payload sizes
/// only. Every edge is uploaded as a pair of ids and every node as its id
/// plus one size field. In a round, each frontier node sends its id to each
/// neighbour's reducer; an unvisited neighbour keeps the lowest-positioned
/// sender as its parent. Once `dst` is reached the payloads of the nodes on
/// the chosen path are called, and nothing else.
pub fn shortest_path_meta(
    g: &SocialGraph,
    src: &str,
    dst: &str,
    cost: &CostModel,
    co_located: bool,
) -> Result<PathResult> {
    let s = g
        .position(src)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown node `{src}`")))?;
    let t = g
        .position(dst)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown node `{dst}`")))?;
    for (end, i) in [(src, s), (dst, t)] {
        if g.nodes[i].kind != NodeKind::Person {
            return Err(Error::InvalidParameter(format!("`{end}` is not a person")));
        }
    }
    let meta = |bits: u64| match cost {
        CostModel::Bits { .. } => bits,
        CostModel::Units { .. } => 0,
    };
    let mut ledger = CostLedger::new();
    let mut result = PathResult {
        hops: Some(0),
        nodes: Vec::new(),
        fetched: Vec::new(),
        ledger: CostLedger::new(),
        rounds_executed: 0,
    };
    if s == t {
        result.ledger = ledger;
        return Ok(result);
    }

    let upload = ledger.begin_round("upload");
    if !co_located {
        let node_bits: u64 = g.nodes.iter().map(|n| meta(id_bits(n) + cost.size_field_bits())).sum();
        let mut edge_bits = 0;
        for (i, adj) in g.adjacency.iter().enumerate() {
            for &j in adj.iter().filter(|&&j| j > i) {
                edge_bits += meta(id_bits(&g.nodes[i]) + id_bits(&g.nodes[j]));
            }
        }
        ledger.charge(upload, Channel::UserToMap, Payload::Metadata, node_bits + edge_bits);
        ledger.count_metadata_records((g.nodes.len() + g.edge_count()) as u64);
    }

    let mut parent: Vec<Option<usize>> = vec![None; g.nodes.len()];
    let mut visited = vec![false; g.nodes.len()];
    visited[s] = true;
    let mut frontier = vec![s];
    let mut rounds = 0;
    let mut last_round = upload;
    while !frontier.is_empty() && !visited[t] {
        rounds += 1;
        last_round = ledger.begin_round(format!("level {rounds}"));
        let mut offers: BTreeMap<usize, usize> = BTreeMap::new();
        let mut shuffled = 0;
        let mut records = 0;
        for &u in &frontier {
            for &v in g.neighbors(u) {
                shuffled += meta(id_bits(&g.nodes[u]) + id_bits(&g.nodes[v]));
                records += 1;
                if !visited[v] {
                    let best = offers.entry(v).or_insert(u);
                    *best = (*best).min(u);
                }
            }
        }
        ledger.charge(last_round, Channel::MapToReduce, Payload::Metadata, shuffled);
        ledger.count_metadata_records(records);
        frontier = offers.keys().copied().collect();
        for (v, u) in offers {
            visited[v] = true;
            parent[v] = Some(u);
        }
    }
    result.rounds_executed = rounds;
    if !visited[t] {
        result.hops = None;
        result.ledger = ledger;
        return Ok(result);
    }
    let mut path = vec![t];
    while let Some(p) = parent[*path.last().expect("nonempty")] {
        path.push(p);
    }
    path.reverse();

    ledger.count_signals(path.len() as u64);
    ledger.charge(
        last_round,
        Channel::CallSignal,
        Payload::Metadata,
        cost.signal_cost() * path.len() as u64,
    );
    for &i in &path {
        let n = &g.nodes[i];
        let amount = match cost {
            CostModel::Bits { .. } => id_bits(n) + n.payload_bits,
            CostModel::Units { per_tuple } => *per_tuple,
        };
        ledger.charge(last_round, Channel::UserToReduceFetch, Payload::Data, amount);
    }
    result.hops = Some(path.len() - 1);
    result.nodes = path.iter().map(|&i| g.nodes[i].id.clone()).collect();
    result.fetched = result.nodes.clone();
    result.fetched.sort();
    result.ledger = ledger;
    Ok(result)
}
