mod common;

use common::*;
use metamr_core::joins::{
    equijoin_classic, equijoin_meta, hashed_join_meta, hierarchical_equijoin, multiway_join_meta, skew_join_meta,
    JoinOptions,
};
use metamr_core::report::{build_report, report_json, ReportContext};
use metamr_core::{
    build_index, make_meta, tuple_size_bits, AttributeValue, BoundKind, Channel, CostModel, Mode, Relation,
    Topology,
};
use proptest::prelude::*;

fn parallel(seed: u64, on: bool) -> JoinOptions {
    JoinOptions {
        seed,
        parallel: on,
        ..Default::default()
    }
}

#[test]
fn parallel_map_changes_nothing() {
    for seed in 0..20 {
        let (rels, spec) = skewed_instance(seed);
        let top = Topology::single_site(&rels);
        let q = tight_q(&spec, seed);
        let a = skew_join_meta(&rels[0], &rels[1], "B", q, &top, &parallel(seed, false)).unwrap();
        let b = skew_join_meta(&rels[0], &rels[1], "B", q, &top, &parallel(seed, true)).unwrap();
        assert_eq!(a, b, "seed {seed}");
        let ctx = ReportContext {
            q,
            cost: CostModel::default(),
            bounds: vec![BoundKind::Skew],
            classic_total: None,
        };
        let ra = report_json(&build_report(&a, Mode::Meta, &ctx).unwrap()).unwrap();
        let rb = report_json(&build_report(&b, Mode::Meta, &ctx).unwrap()).unwrap();
        assert_eq!(ra, rb);

        let chain = chain_instance(seed);
        let top = Topology::single_site(&chain);
        let a = multiway_join_meta(&chain, None, 1 << 14, &top, &parallel(seed, false)).unwrap();
        let b = multiway_join_meta(&chain, None, 1 << 14, &top, &parallel(seed, true)).unwrap();
        assert_eq!(a, b, "chain seed {seed}");
    }
}

#[test]
fn equijoin_channels_follow_the_three_terms() {
    for seed in 0..50 {
        let (rels, _) = two_way_instance(seed);
        let top = Topology::single_site(&rels);
        let res = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &parallel(seed, false)).unwrap();
        let s = &res.stats;
        let l = &res.ledger;
        assert!(l.channel(Channel::UserToMap) <= 2 * s.n * s.c);
        assert!(l.map_to_reduce_participating() <= s.h * s.c);
        assert!(l.map_to_reduce_participating() <= l.channel(Channel::MapToReduce));
        assert!(l.channel(Channel::UserToReduceFetch) <= s.h * s.w);
        assert_eq!(l.signals(), l.channel(Channel::CallSignal));
    }
}

#[test]
fn no_original_moves_before_the_call() {
    for seed in 0..30 {
        let (rels, spec) = skewed_instance(seed);
        let top = Topology::single_site(&rels);
        let res = skew_join_meta(&rels[0], &rels[1], "B", tight_q(&spec, seed), &top, &parallel(seed, false)).unwrap();
        let l = &res.ledger;
        for c in [Channel::UserToMap, Channel::MapToReduce, Channel::CallSignal] {
            assert_eq!(l.costs().data(c), 0, "{c:?}");
        }
        assert_eq!(l.costs().metadata(Channel::UserToReduceFetch), 0);
        let (last, before) = l.rounds().split_last().unwrap();
        assert!(before.iter().all(|r| r.costs.data_total() == 0));
        assert_eq!(last.costs.data_total(), l.data_total());

        let chain = chain_instance(seed);
        let top = Topology::single_site(&chain);
        let res = multiway_join_meta(&chain, None, 1 << 14, &top, &parallel(seed, false)).unwrap();
        let (_, before) = res.ledger.rounds().split_last().unwrap();
        assert!(before.iter().all(|r| r.costs.data_total() == 0));
    }
}

#[test]
fn co_located_data_skips_the_upload() {
    let (rels, _) = two_way_instance(4);
    let top = Topology::single_site(&rels);
    let opts = JoinOptions {
        co_located: true,
        ..Default::default()
    };
    let near = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &opts).unwrap();
    let far = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &JoinOptions::default()).unwrap();
    assert_eq!(near.ledger.channel(Channel::UserToMap), 0);
    assert!(far.ledger.channel(Channel::UserToMap) > 0);
    assert_eq!(near.outputs, far.outputs);
    assert_eq!(
        near.ledger.total() + far.ledger.channel(Channel::UserToMap),
        far.ledger.total()
    );
}

#[test]
fn empty_relations_cost_nothing() {
    let x = Relation::from_rows("X", &["A", "B"], "user", Vec::<Vec<&str>>::new()).unwrap();
    let y = Relation::from_rows("Y", &["B", "C"], "user", Vec::<Vec<&str>>::new()).unwrap();
    let top = Topology::single_site([&x, &y]);
    for res in [
        equijoin_meta(&x, &y, "B", 64, &top, &JoinOptions::default()).unwrap(),
        equijoin_classic(&x, &y, "B", 64, &top, &JoinOptions::default()).unwrap(),
        hashed_join_meta(&x, &y, "B", 64, &top, &JoinOptions::default()).unwrap(),
    ] {
        assert!(res.outputs.is_empty());
        assert_eq!(res.ledger.total(), 0);
        assert_eq!(res.ledger.signals(), 0);
        assert_eq!(res.stats.h, 0);
    }
}

#[test]
fn one_bit_digests_force_a_rehash_and_keep_the_failed_attempt() {
    let x = Relation::from_rows("X", &["A", "B"], "user", [["a1", "k1"], ["a2", "k2"], ["a3", "k3"], ["a4", "k4"]]).unwrap();
    let y = Relation::from_rows("Y", &["B", "C"], "user", [["k1", "c1"], ["k2", "c2"], ["k3", "c3"], ["k5", "c5"]]).unwrap();
    let top = Topology::single_site([&x, &y]);
    let opts = JoinOptions {
        digest_bits: Some(1),
        ..Default::default()
    };
    let res = hashed_join_meta(&x, &y, "B", 1 << 20, &top, &opts).unwrap();
    assert!(res.rehash_count >= 1);
    assert_eq!(res.discarded.len() as u32, res.rehash_count);
    assert!(res.discarded.iter().all(|l| l.total() > 0));
    let cfg = res.final_digester.unwrap();
    assert!(cfg.output_bits >= width_oracle(5));
    assert_eq!(res.outputs.len(), 3);

    let none = JoinOptions {
        digest_bits: Some(1),
        rehash_limit: 0,
        ..Default::default()
    };
    assert!(hashed_join_meta(&x, &y, "B", 1 << 20, &top, &none).is_err());
}

#[test]
fn one_cluster_equals_the_plain_job() {
    for seed in 0..10 {
        let (rels, _) = two_way_instance(seed);
        let rels: Vec<Relation> = rels.into_iter().map(|r| r.with_home_site("C1")).collect();
        let top = Topology::clusters(&[("C1", vec!["X", "Y"])], "C1");
        let opts = JoinOptions {
            co_located: true,
            ..Default::default()
        };
        let h = hierarchical_equijoin(&[("C1", rels.clone())], "B", Mode::Meta, 1 << 40, &top, &opts).unwrap();
        let plain = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &Topology::single_site(&rels), &opts).unwrap();
        assert_eq!(h.sorted_outputs(), plain.sorted_outputs());
        assert_eq!(h.fetched.len(), plain.fetched.len());
    }
}

fn relation_from(name: &str, attrs: [&str; 2], rows: &[(u8, u8)], key_first: bool) -> Relation {
    let rows: Vec<[String; 2]> = rows
        .iter()
        .map(|&(k, v)| {
            let (k, v) = (format!("k{k}"), format!("v{v}"));
            if key_first {
                [k, v]
            } else {
                [v, k]
            }
        })
        .collect();
    Relation::from_rows(name, &attrs, "user", rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_tuple_never_lowers_a_classic_channel(
        xs in prop::collection::vec((0u8..6, 0u8..50), 0..30),
        ys in prop::collection::vec((0u8..6, 0u8..50), 0..30),
        extra in (0u8..6, 0u8..50),
        to_x in any::<bool>(),
    ) {
        let x = relation_from("X", ["A", "B"], &xs, false);
        let y = relation_from("Y", ["B", "C"], &ys, true);
        let (mut xs2, mut ys2) = (xs.clone(), ys.clone());
        if to_x { xs2.push(extra) } else { ys2.push(extra) }
        let x2 = relation_from("X", ["A", "B"], &xs2, false);
        let y2 = relation_from("Y", ["B", "C"], &ys2, true);
        let top = Topology::single_site([&x, &y]);
        let before = equijoin_classic(&x, &y, "B", 1 << 30, &top, &JoinOptions::default()).unwrap();
        let after = equijoin_classic(&x2, &y2, "B", 1 << 30, &top, &JoinOptions::default()).unwrap();
        for c in Channel::ALL {
            prop_assert!(after.ledger.channel(c) >= before.ledger.channel(c));
        }
    }

    #[test]
    fn index_matches_a_scan(rows in prop::collection::vec((0u8..20, 0u8..255), 100), probe in 0u8..25) {
        let rel = relation_from("X", ["A", "B"], &rows, false);
        let idx = build_index(&rel, "B").unwrap();
        let key = AttributeValue::from(format!("k{probe}"));
        let scan: Vec<usize> = rel.tuples().iter().filter(|t| t.values[1] == key).map(|t| t.tuple_id).collect();
        prop_assert_eq!(idx.lookup(&key), &scan[..]);
    }

    #[test]
    fn metadata_is_no_larger_than_the_tuple(seed in 0u64..1000) {
        let (rels, _) = two_way_instance(seed);
        for rel in &rels {
            for t in rel.tuples() {
                let a = make_meta(t, rel, &["B"], None, 0).unwrap();
                let b = make_meta(t, rel, &["B"], None, 0).unwrap();
                prop_assert_eq!(&a, &b);
                prop_assert!(a.wire_bits <= tuple_size_bits(t));
            }
        }
    }
}

#[test]
fn ledger_data_goes_only_to_fetch_in_meta_mode() {
    let (rels, _) = two_way_instance(8);
    let top = Topology::single_site(&rels);
    let res = equijoin_meta(&rels[0], &rels[1], "B", 1 << 40, &top, &JoinOptions::default()).unwrap();
    let l = &res.ledger;
    assert_eq!(l.data_total(), l.costs().data(Channel::UserToReduceFetch));
    assert_eq!(l.costs().data(Channel::UserToReduceFetch), l.costs().channel(Channel::UserToReduceFetch));
}
