mod common;

use std::collections::BTreeSet;

use common::*;
use metamr_core::joins::{
    equijoin_classic, equijoin_meta, hashed_join_meta, multiway_join_meta, skew_join_classic, skew_join_meta,
    JoinOptions,
};
use metamr_core::{theorem_bound, BoundKind, BoundParams, JobResult, Relation, Topology};

const INSTANCES: u64 = 100;

fn refs(rels: &[Relation]) -> Vec<&Relation> {
    rels.iter().collect()
}

fn distinct_b(rels: &[Relation]) -> u64 {
    let mut seen = BTreeSet::new();
    for r in rels {
        let i = r.attribute_index("B").unwrap();
        seen.extend(r.tuples().iter().map(|t| t.values[i].payload().to_vec()));
    }
    seen.len() as u64
}

fn check_measured_params(res: &JobResult, rels: &[Relation]) {
    let want = nested_loop(&refs(rels));
    assert_eq!(res.stats.h, participating(&want).len() as u64);
    assert_eq!(res.stats.n, rels.iter().map(Relation::len).max().unwrap() as u64);
}

#[test]
fn two_way_metadata_cost_within_bound() {
    for seed in 0..INSTANCES {
        let (rels, _) = two_way_instance(seed);
        let top = Topology::single_site(&rels);
        let res = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &JoinOptions { seed, ..Default::default() }).unwrap();
        check_measured_params(&res, &rels);
        let s = &res.stats;
        let bound = 2 * s.n * s.c + s.h * (s.c + s.w);
        let measured = res.ledger.theorem_relevant();
        assert!(measured <= bound, "seed {seed}: {measured} > {bound}");
        assert_eq!(theorem_bound(BoundKind::TwoWay, &BoundParams::from_stats(s)).unwrap(), bound as f64);
    }
}

#[test]
fn skew_metadata_cost_within_bound() {
    for seed in 0..INSTANCES {
        let (rels, spec) = skewed_instance(seed);
        let q = tight_q(&spec, seed);
        let top = Topology::single_site(&rels);
        let res = skew_join_meta(&rels[0], &rels[1], "B", q, &top, &JoinOptions { seed, ..Default::default() }).unwrap();
        check_measured_params(&res, &rels);
        let s = &res.stats;
        let r = if s.h == 0 { 0.0 } else { s.deliveries as f64 / s.h as f64 };
        let bound = 2.0 * (s.n * s.c) as f64 + r * (s.h * (s.c + s.w)) as f64;
        let measured = res.ledger.theorem_relevant() as f64;
        assert!(measured <= bound * (1.0 + 1e-12), "seed {seed}: {measured} > {bound}");
    }
}

#[test]
fn hashed_metadata_cost_within_bound() {
    for seed in 0..INSTANCES {
        let (rels, _) = two_way_instance(seed);
        let top = Topology::single_site(&rels);
        let res = hashed_join_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &JoinOptions { seed, ..Default::default() }).unwrap();
        check_measured_params(&res, &rels);
        let s = &res.stats;
        assert_eq!(s.m, distinct_b(&rels));
        let bound = 2 * s.n * width_oracle(s.m) as u64 + s.h * (s.c + s.w);
        let measured = res.ledger.theorem_relevant();
        assert!(measured <= bound, "seed {seed}: {measured} > {bound}");
    }
}

#[test]
fn multiway_metadata_cost_within_bound() {
    for seed in 0..INSTANCES {
        let rels = chain_instance(seed);
        let top = Topology::single_site(&rels);
        let res = multiway_join_meta(&rels, None, 1 << 14, &top, &JoinOptions { seed, ..Default::default() }).unwrap();
        let s = &res.stats;
        assert_eq!(s.k, 4);
        // the chain's middle relations carry two joined attributes
        assert_eq!(s.p, 2);
        let bound = s.k * s.n * s.p * width_oracle(s.m) as u64 + s.deliveries * (s.c + s.w);
        let measured = res.ledger.theorem_relevant();
        assert!(measured <= bound, "seed {seed}: {measured} > {bound}");
    }
}

#[test]
fn classic_costs_within_classic_bounds() {
    for seed in 0..INSTANCES {
        let (rels, _) = two_way_instance(seed);
        let top = Topology::single_site(&rels);
        let opts = JoinOptions { seed, ..Default::default() };
        let res = equijoin_classic(&rels[0], &rels[1], "B", 1 << 40, &top, &opts).unwrap();
        let s = &res.stats;
        assert!(res.ledger.total() <= 4 * s.n * s.w, "two-way, seed {seed}");

        let (rels, spec) = skewed_instance(seed);
        let top = Topology::single_site(&rels);
        let res = skew_join_classic(&rels[0], &rels[1], "B", tight_q(&spec, seed), &top, &opts).unwrap();
        let s = &res.stats;
        let bound = 2.0 * (s.n * s.w) as f64 * (1.0 + s.schema_replication);
        assert!(res.ledger.total() as f64 <= bound * (1.0 + 1e-12), "skew, seed {seed}");
    }
}

#[test]
fn metadata_never_costs_more_than_classic_on_wide_tuples() {
    for seed in 0..INSTANCES {
        let (rels, spec) = two_way_instance(seed);
        if spec.w_bits < 2 * spec.c_bits {
            continue;
        }
        let top = Topology::single_site(&rels);
        let opts = JoinOptions { seed, ..Default::default() };
        let meta = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &opts).unwrap();
        let classic = equijoin_classic(&rels[0], &rels[1], "B", 1 << 40, &top, &opts).unwrap();
        assert!(meta.ledger.theorem_relevant() <= classic.ledger.total(), "seed {seed}");
    }
}
