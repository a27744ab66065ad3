//! Brute-force oracles and seeded instances shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use metamr_core::workloads::{gen_chain, gen_relations, GenSpec, SocialGraph};
use metamr_core::{JobResult, Relation, TupleId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One joined row as the tuples it combines, sorted.
pub type Combo = Vec<(String, TupleId)>;

/// Nested-loop natural join: one tuple per relation, every attribute shared
/// by two relations equal.
pub fn nested_loop(rels: &[&Relation]) -> Vec<Combo> {
    fn go(rels: &[&Relation], pick: &mut Vec<TupleId>, out: &mut Vec<Combo>) {
        let i = pick.len();
        if i == rels.len() {
            let mut c: Combo = rels.iter().zip(pick.iter()).map(|(r, &t)| (r.name().to_string(), t)).collect();
            c.sort();
            out.push(c);
            return;
        }
        'next: for t in rels[i].tuples() {
            for (a, attr) in rels[i].attributes().iter().enumerate() {
                for (j, &pj) in pick.iter().enumerate() {
                    if let Ok(b) = rels[j].attribute_index(attr) {
                        if rels[j].tuples()[pj].values[b].payload() != t.values[a].payload() {
                            continue 'next;
                        }
                    }
                }
            }
            pick.push(t.tuple_id);
            go(rels, pick, out);
            pick.pop();
        }
    }
    let mut out = Vec::new();
    go(rels, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// The engine's outputs as combos, after checking each output value against
/// the tuple it should have come from.
pub fn engine_combos(res: &JobResult, rels: &[&Relation]) -> Vec<Combo> {
    let by_name: BTreeMap<&str, &Relation> = rels.iter().map(|r| (r.name(), *r)).collect();
    let mut out = Vec::with_capacity(res.outputs.len());
    for o in &res.outputs {
        assert_eq!(o.values.len(), res.attributes.len());
        for (attr, v) in res.attributes.iter().zip(&o.values) {
            let src = o
                .origins
                .iter()
                .find(|g| by_name[g.relation.as_str()].has_attribute(attr))
                .expect("some origin has the attribute");
            let rel = by_name[src.relation.as_str()];
            let t = rel.tuple(src.tuple_id).expect("origin exists");
            assert_eq!(rel.value(t, attr).unwrap().payload(), v.payload(), "value of {attr}");
        }
        let mut c: Combo = o.origins.iter().map(|g| (g.relation.clone(), g.tuple_id)).collect();
        c.sort();
        out.push(c);
    }
    out.sort();
    out
}

/// Tuples named by at least one oracle row.
pub fn participating(combos: &[Combo]) -> Vec<(String, TupleId)> {
    let mut all: Vec<(String, TupleId)> = combos.iter().flatten().cloned().collect();
    all.sort();
    all.dedup();
    all
}

pub fn fetched(res: &JobResult) -> Vec<(String, TupleId)> {
    let mut f: Vec<(String, TupleId)> = res.fetched.iter().map(|o| (o.relation.clone(), o.tuple_id)).collect();
    f.sort();
    f
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random X(A, B), Y(B, C) with between 0 and 200 tuples each.
pub fn two_way_instance(seed: u64) -> (Vec<Relation>, GenSpec) {
    let mut r = rng(seed);
    let c_bits = 8 * r.random_range(1..=4);
    let spec = GenSpec {
        n: r.random_range(0..=200),
        c_bits,
        w_bits: c_bits + 8 * r.random_range(1..=32),
        distinct_keys: r.random_range(1..=60),
        zipf_exponent: if r.random_bool(0.5) { 0.0 } else { r.random_range(0.5..1.5) },
        heavy_hitters: r.random_range(0..=1),
        seed,
        ..Default::default()
    };
    (gen_relations(&spec).unwrap(), spec)
}

/// Skewed X, Y: a couple of heavy keys take half the draws.
pub fn skewed_instance(seed: u64) -> (Vec<Relation>, GenSpec) {
    let mut r = rng(seed ^ 0x5eed);
    let spec = GenSpec {
        n: r.random_range(20..=150),
        c_bits: 16,
        w_bits: 16 + 8 * r.random_range(4..=24),
        distinct_keys: r.random_range(4..=40),
        zipf_exponent: r.random_range(0.0..1.2),
        heavy_hitters: r.random_range(1..=3),
        seed,
        ..Default::default()
    };
    (gen_relations(&spec).unwrap(), spec)
}

/// Capacity that fits any two tuples but only a handful more.
pub fn tight_q(spec: &GenSpec, seed: u64) -> u64 {
    2 * spec.w_bits * rng(seed ^ 0xcafe).random_range(2..=6)
}

/// A chain R1(K1, K2, P1) ... R4(K4, K5, P4).
pub fn chain_instance(seed: u64) -> Vec<Relation> {
    let mut r = rng(seed ^ 0xc4a1);
    let n = r.random_range(0..=40);
    let spec = GenSpec {
        n,
        c_bits: 16,
        w_bits: 64 + 8 * r.random_range(0..=16),
        distinct_keys: r.random_range((n / 3).max(1)..=(n.max(1) * 2)),
        zipf_exponent: r.random_range(0.0..1.0),
        seed,
        ..Default::default()
    };
    gen_chain(&spec, 4).unwrap()
}

/// Three clusters of two relations each, every relation carrying B plus a
/// private attribute, placed at their cluster.
pub fn cluster_instance(seed: u64) -> Vec<(String, Vec<Relation>)> {
    let mut r = rng(seed ^ 0x71e5);
    let keys = r.random_range(2..=10);
    let mut out = Vec::new();
    for c in 1..=3 {
        let site = format!("C{c}");
        let spec = GenSpec {
            n: r.random_range(0..=12),
            c_bits: 16,
            w_bits: 64,
            distinct_keys: keys,
            seed: seed.wrapping_mul(31).wrapping_add(c),
            ..Default::default()
        };
        let rels = gen_relations(&spec).unwrap();
        let renamed = rels
            .into_iter()
            .zip(["a", "b"])
            .map(|(rel, tag)| {
                let attrs: Vec<String> = rel
                    .attributes()
                    .iter()
                    .map(|a| if a == "B" { a.clone() } else { format!("{a}{c}") })
                    .collect();
                let mut fresh = Relation::new(format!("R{c}{tag}"), attrs, site.clone()).unwrap();
                for t in rel.tuples() {
                    fresh.push(t.values.clone()).unwrap();
                }
                fresh
            })
            .collect();
        out.push((site, renamed));
    }
    out
}

/// Brute-force k nearest: every S point scored, ties broken by id.
pub fn brute_knn(r: &[Vec<i64>], s: &[Vec<i64>], k: usize) -> Vec<Vec<TupleId>> {
    r.iter()
        .map(|p| {
            let mut all: Vec<(i128, TupleId)> = s
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let d: i128 = p.iter().zip(x).map(|(a, b)| (*a as i128 - *b as i128).pow(2)).sum();
                    (d, j)
                })
                .collect();
            all.sort();
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Breadth-first distances from `src`, then a walk back from `dst` taking
/// the lowest-positioned neighbour one level closer.
pub fn brute_path(g: &SocialGraph, src: &str, dst: &str) -> Option<Vec<String>> {
    let (s, t) = (g.position(src)?, g.position(dst)?);
    let mut dist = vec![usize::MAX; g.nodes().len()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist[t] == usize::MAX {
        return None;
    }
    if s == t {
        return Some(Vec::new());
    }
    let mut path = vec![t];
    let mut cur = t;
    while cur != s {
        cur = (0..g.nodes().len())
            .find(|&u| dist[u] != usize::MAX && dist[u] + 1 == dist[cur] && g.neighbors(cur).contains(&u))
            .expect("a closer neighbour exists");
        path.push(cur);
    }
    path.reverse();
    Some(path.into_iter().map(|i| g.nodes()[i].id.clone()).collect())
}

/// Smallest b with 2^b >= max(m, 2)^3.
pub fn width_oracle(m: u64) -> u32 {
    let cube = (m.max(2) as u128).pow(3);
    (0..128).find(|&b| (1u128 << b) >= cube).unwrap()
}
