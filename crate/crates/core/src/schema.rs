//! Mapping schemas: assignments of map outputs to capacity-bounded reducers.
//!
//! Sizes and the capacity `q` are always measured on the ORIGINAL data, even
//! when only metadata is shuffled.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MetaRecord;

pub type InputId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducerSpec {
    pub q: u64,
    pub count_hint: Option<usize>,
}

impl ReducerSpec {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("reducer capacity q must be positive".into()));
        }
        Ok(Self { q, count_hint: None })
    }
}

/// Reducers, each holding a sorted set of input ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingSchema {
    reducers: Vec<Vec<InputId>>,
}

impl MappingSchema {
    pub fn new(reducers: Vec<Vec<InputId>>) -> Self {
        let reducers = reducers
            .into_iter()
            .map(|mut r| {
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        Self { reducers }
    }

    pub fn reducers(&self) -> &[Vec<InputId>] {
        &self.reducers
    }

    pub fn len(&self) -> usize {
        self.reducers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reducers.is_empty()
    }

    /// Number of reducers each input is assigned to.
    pub fn multiplicities(&self) -> BTreeMap<InputId, usize> {
        let mut out = BTreeMap::new();
        for r in &self.reducers {
            for &i in r {
                *out.entry(i).or_insert(0) += 1;
            }
        }
        out
    }

    /// For every input, the sorted list of reducers that hold it.
    pub fn placement(&self) -> BTreeMap<InputId, Vec<usize>> {
        let mut out: BTreeMap<InputId, Vec<usize>> = BTreeMap::new();
        for (ri, r) in self.reducers.iter().enumerate() {
            for &i in r {
                out.entry(i).or_default().push(ri);
            }
        }
        out
    }

}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityViolation {
    pub reducer: usize,
    pub load: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub capacity_violations: Vec<CapacityViolation>,
    pub uncovered: Vec<(InputId, InputId)>,
    pub replication_rate: f64,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.capacity_violations.is_empty() && self.uncovered.is_empty()
    }
}

/// Checks capacity and pairwise coverage, and computes the replication rate
/// (assignments per input, averaged over every input in `sizes`).
pub fn validate_schema(
    s: &MappingSchema,
    sizes: &BTreeMap<InputId, u64>,
    q: u64,
    coverage: &[(InputId, InputId)],
) -> Result<ValidityReport> {
    let mut capacity_violations = Vec::new();
    for (ri, r) in s.reducers().iter().enumerate() {
        let mut load = 0u64;
        for i in r {
            load += sizes.get(i).ok_or(Error::UnknownInput(*i))?;
        }
        if load > q {
            capacity_violations.push(CapacityViolation { reducer: ri, load });
        }
    }
    let placement = s.placement();
    let empty = Vec::new();
    let mut uncovered = Vec::new();
    for &(a, b) in coverage {
        for i in [a, b] {
            if !sizes.contains_key(&i) {
                return Err(Error::UnknownInput(i));
            }
        }
        let ra = placement.get(&a).unwrap_or(&empty);
        let rb = placement.get(&b).unwrap_or(&empty);
        if !sorted_intersect(ra, rb) {
            uncovered.push((a, b));
        }
    }
    let assigned: usize = placement.values().map(Vec::len).sum();
    let replication_rate = if sizes.is_empty() {
        0.0
    } else {
        assigned as f64 / sizes.len() as f64
    };
    Ok(ValidityReport {
        capacity_violations,
        uncovered,
        replication_rate,
    })
}

fn sorted_intersect(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// One reducer per distinct key holding exactly that key's records.
/// Input ids are positions in `metas`; reducers come out in key order.
pub fn key_group_assign(metas: &[MetaRecord], q: u64) -> Result<MappingSchema> {
    let keys: Vec<Vec<u8>> = metas.iter().map(|m| m.key_material.sort_bytes()).collect();
    let sizes: Vec<u64> = metas.iter().map(|m| m.original_bits).collect();
    group_by_key(&keys, &sizes, q)
}

pub(crate) fn group_by_key(keys: &[Vec<u8>], sizes: &[u64], q: u64) -> Result<MappingSchema> {
    let mut groups: BTreeMap<&[u8], Vec<InputId>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_slice()).or_default().push(i);
    }
    let mut reducers = Vec::with_capacity(groups.len());
    for (key, ids) in groups {
        let size: u64 = ids.iter().map(|&i| sizes[i]).sum();
        if size > q {
            return Err(Error::OversizedGroup {
                key: display_key(key),
                size,
                q,
            });
        }
        reducers.push(ids);
    }
    Ok(MappingSchema::new(reducers))
}

pub(crate) fn display_key(key: &[u8]) -> String {
    let printable: String = key
        .iter()
        .map(|&b| if b.is_ascii_graphic() { b as char } else { '.' })
        .collect();
    printable.trim_matches('.').to_string()
}

/// First-fit-decreasing: items sorted by size descending (ties by id), each
/// placed in the first bin with room.
pub fn first_fit_decreasing(items: &[(InputId, u64)], capacity: u64) -> Vec<Vec<InputId>> {
    let mut order: Vec<(InputId, u64)> = items.to_vec();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut bins: Vec<(u64, Vec<InputId>)> = Vec::new();
    for (id, size) in order {
        match bins.iter_mut().find(|(load, _)| load + size <= capacity) {
            Some((load, members)) => {
                *load += size;
                members.push(id);
            }
            None => bins.push((size, vec![id])),
        }
    }
    bins.into_iter().map(|(_, m)| m).collect()
}

/// Heavy-hitter assignment for one key: both sides are packed into bins of
/// `q/2` and every (X-bin, Y-bin) pair gets its own reducer.
pub fn skew_assign(
    x_group: &[(InputId, u64)],
    y_group: &[(InputId, u64)],
    q: u64,
) -> Result<MappingSchema> {
    let total: u64 = x_group.iter().chain(y_group).map(|(_, s)| s).sum();
    if total <= q {
        let all: Vec<InputId> = x_group.iter().chain(y_group).map(|(i, _)| *i).collect();
        if all.is_empty() {
            return Ok(MappingSchema::default());
        }
        return Ok(MappingSchema::new(vec![all]));
    }
    let half = q / 2;
    for &(id, size) in x_group.iter().chain(y_group) {
        if size > half {
            return Err(Error::Infeasible {
                input: id,
                size,
                capacity: half,
            });
        }
    }
    let xb = first_fit_decreasing(x_group, half);
    let yb = first_fit_decreasing(y_group, half);
    if xb.is_empty() || yb.is_empty() {
        // nothing to pair; each bin still has to land somewhere
        return Ok(MappingSchema::new(xb.into_iter().chain(yb).collect()));
    }
    let mut reducers = Vec::with_capacity(xb.len() * yb.len());
    for x in &xb {
        for y in &yb {
            reducers.push(x.iter().chain(y).copied().collect());
        }
    }
    Ok(MappingSchema::new(reducers))
}

/// All-pairs assignment: inputs of size at most `q/k` are packed into bins of
/// `q/k`; bins are grouped `k/2` at a time and every pair of groups shares a
/// reducer. For `k = 2` that is one reducer per pair of bins.
pub fn bin_pack_assign(inputs: &[(InputId, u64)], q: u64, k: u64) -> Result<MappingSchema> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("bin-packing needs k >= 2, got {k}")));
    }
    let capacity = q / k;
    for &(id, size) in inputs {
        if size > capacity {
            return Err(Error::Infeasible {
                input: id,
                size,
                capacity,
            });
        }
    }
    let bins = first_fit_decreasing(inputs, capacity);
    let per_group = (k / 2) as usize;
    let groups: Vec<Vec<InputId>> = bins
        .chunks(per_group)
        .map(|c| c.iter().flatten().copied().collect())
        .collect();
    let mut reducers = Vec::new();
    match groups.len() {
        0 => {}
        1 => {
            if groups[0].len() > 1 {
                reducers.push(groups[0].clone());
            }
        }
        g => {
            for i in 0..g {
                for j in i + 1..g {
                    reducers.push(groups[i].iter().chain(&groups[j]).copied().collect());
                }
            }
        }
    }
    Ok(MappingSchema::new(reducers))
}

/// Every unordered pair of distinct ids from `ids`.
pub fn all_pairs(ids: &[InputId]) -> Vec<(InputId, InputId)> {
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Every (x, y) pair across two id sets.
pub fn cross_pairs(xs: &[InputId], ys: &[InputId]) -> Vec<(InputId, InputId)> {
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use crate::model::{make_meta, Relation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sizes_of(items: &[(InputId, u64)]) -> BTreeMap<InputId, u64> {
        items.iter().copied().collect()
    }

    /// Exhaustive: a pair is covered iff some reducer lists both ids.
    fn brute_uncovered(s: &MappingSchema, pairs: &[(InputId, InputId)]) -> Vec<(InputId, InputId)> {
        pairs
            .iter()
            .copied()
            .filter(|(a, b)| !s.reducers().iter().any(|r| r.contains(a) && r.contains(b)))
            .collect()
    }

    #[test]
    fn whole_b1_group_on_one_reducer_is_valid() {
        // the b1 tuples of the three-tuple example in unit cost: X ids 0,1 and Y ids 2,3.
        let s = MappingSchema::new(vec![vec![0, 1, 2, 3]]);
        let sizes: BTreeMap<_, _> = (0..4).map(|i| (i, 1)).collect();
        let cov = cross_pairs(&[0, 1], &[2, 3]);
        let rep = validate_schema(&s, &sizes, 4, &cov).unwrap();
        assert!(rep.is_valid());
        assert_eq!(rep.replication_rate, 1.0);
    }

    #[test]
    fn oversized_input_violates_capacity() {
        let s = MappingSchema::new(vec![vec![0]]);
        let sizes = BTreeMap::from([(0, 11)]);
        let rep = validate_schema(&s, &sizes, 10, &[]).unwrap();
        assert_eq!(rep.capacity_violations, vec![CapacityViolation { reducer: 0, load: 11 }]);
        assert!(!rep.is_valid());
    }

    #[test]
    fn unknown_input_is_an_error() {
        let s = MappingSchema::new(vec![vec![0, 9]]);
        let sizes = BTreeMap::from([(0, 1)]);
        assert!(matches!(validate_schema(&s, &sizes, 10, &[]), Err(Error::UnknownInput(9))));
    }

    #[test]
    fn uncovered_pairs_match_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let reducers: Vec<Vec<InputId>> = (0..rng.random_range(0..8))
                .map(|_| (0..n).filter(|_| rng.random_bool(0.3)).collect())
                .collect();
            let s = MappingSchema::new(reducers);
            let ids: Vec<InputId> = (0..n).collect();
            let pairs = all_pairs(&ids);
            let sizes: BTreeMap<_, _> = ids.iter().map(|&i| (i, 1)).collect();
            let rep = validate_schema(&s, &sizes, u64::MAX, &pairs).unwrap();
            assert_eq!(rep.uncovered, brute_uncovered(&s, &pairs));
        }
    }

    #[test]
    fn key_groups_follow_distinct_keys() {
        let x = Relation::from_rows(
            "X",
            &["A", "B"],
            "u",
            [["a1", "b1"], ["a2", "b1"], ["a3", "b2"]],
        )
        .unwrap();
        let y = Relation::from_rows(
            "Y",
            &["B", "C"],
            "v",
            [["b1", "c1"], ["b1", "c2"], ["b3", "c3"]],
        )
        .unwrap();
        let mut metas: Vec<MetaRecord> = Vec::new();
        for t in x.tuples() {
            metas.push(make_meta(t, &x, &["B"], None, 0).unwrap());
        }
        for t in y.tuples() {
            metas.push(make_meta(t, &y, &["B"], None, 0).unwrap());
        }
        let s = key_group_assign(&metas, 1 << 20).unwrap();
        assert_eq!(s.reducers(), &[vec![0, 1, 3, 4], vec![2], vec![5]]);
        assert!(key_group_assign(&[], 10).unwrap().is_empty());
        assert!(matches!(key_group_assign(&metas, 64), Err(Error::OversizedGroup { .. })));
    }

    #[test]
    fn random_keys_give_one_reducer_per_distinct_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rel = Relation::from_rows(
            "R",
            &["K", "V"],
            "u",
            (0..100).map(|i| vec![format!("k{}", rng.random_range(0..40)), format!("v{i}")])
                .map(|r| r.into_iter().map(|s| crate::model::AttributeValue::new(s)).collect::<Vec<_>>()),
        )
        .unwrap();
        let metas: Vec<MetaRecord> = rel
            .tuples()
            .iter()
            .map(|t| make_meta(t, &rel, &["K"], None, 0).unwrap())
            .collect();
        let distinct: BTreeSet<_> = rel.tuples().iter().map(|t| t.values[0].clone()).collect();
        let s = key_group_assign(&metas, u64::MAX).unwrap();
        assert_eq!(s.len(), distinct.len());
    }

    #[test]
    fn four_by_four_quarter_records_make_four_reducers() {
        let q = 100;
        let xs: Vec<(InputId, u64)> = (0..4).map(|i| (i, q / 4)).collect();
        let ys: Vec<(InputId, u64)> = (4..8).map(|i| (i, q / 4)).collect();
        let s = skew_assign(&xs, &ys, q).unwrap();
        assert_eq!(s.len(), 4);
        let sizes = sizes_of(&[xs.clone(), ys.clone()].concat());
        let cov = cross_pairs(&[0, 1, 2, 3], &[4, 5, 6, 7]);
        let rep = validate_schema(&s, &sizes, q, &cov).unwrap();
        assert!(rep.is_valid());
        assert_eq!(rep.replication_rate, 2.0);
        assert!(brute_uncovered(&s, &cov).is_empty());
    }

    #[test]
    fn skew_groups_that_fit_stay_together() {
        let s = skew_assign(&[(0, 3)], &[(1, 3)], 10).unwrap();
        assert_eq!(s.reducers(), &[vec![0, 1]]);
        let rep = validate_schema(&s, &BTreeMap::from([(0, 3), (1, 3)]), 10, &[(0, 1)]).unwrap();
        assert_eq!(rep.replication_rate, 1.0);
    }

    #[test]
    fn skew_rejects_records_over_half_capacity() {
        assert!(matches!(
            skew_assign(&[(0, 6), (1, 5)], &[(2, 1)], 10),
            Err(Error::Infeasible { input: 0, .. })
        ));
    }

    #[test]
    fn six_half_capacity_inputs_make_fifteen_reducers() {
        let q = 10;
        let inputs: Vec<(InputId, u64)> = (0..6).map(|i| (i, q / 2)).collect();
        assert_eq!(first_fit_decreasing(&inputs, q / 2).len(), 6);
        let s = bin_pack_assign(&inputs, q, 2).unwrap();
        assert_eq!(s.len(), 15);
        let ids: Vec<_> = (0..6).collect();
        assert!(brute_uncovered(&s, &all_pairs(&ids)).is_empty());
    }

    #[test]
    fn single_input_needs_no_reducer() {
        let s = bin_pack_assign(&[(0, 1)], 10, 2).unwrap();
        assert!(s.is_empty());
        let s = bin_pack_assign(&[(0, 1), (1, 1)], 10, 2).unwrap();
        assert_eq!(s.reducers(), &[vec![0, 1]]);
    }

    #[test]
    fn bin_pack_preconditions() {
        assert!(matches!(bin_pack_assign(&[(0, 6)], 10, 2), Err(Error::Infeasible { .. })));
        assert!(matches!(bin_pack_assign(&[(0, 1)], 10, 1), Err(Error::InvalidParameter(_))));
    }

    /// Exact minimum bin count by trying every assignment (small n only).
    fn optimal_bins(sizes: &[u64], cap: u64) -> usize {
        fn go(i: usize, sizes: &[u64], cap: u64, loads: &mut Vec<u64>, best: &mut usize) {
            if loads.len() >= *best {
                return;
            }
            if i == sizes.len() {
                *best = loads.len();
                return;
            }
            for b in 0..loads.len() {
                if loads[b] + sizes[i] <= cap {
                    loads[b] += sizes[i];
                    go(i + 1, sizes, cap, loads, best);
                    loads[b] -= sizes[i];
                }
            }
            loads.push(sizes[i]);
            go(i + 1, sizes, cap, loads, best);
            loads.pop();
        }
        let mut best = sizes.len().max(1);
        if sizes.is_empty() {
            return 0;
        }
        go(0, sizes, cap, &mut Vec::new(), &mut best);
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_bin_pack_covers_every_pair(sizes in proptest::collection::vec(0u64..=50, 1..=20)) {
            let q = 100;
            let inputs: Vec<(InputId, u64)> = sizes.iter().copied().enumerate().collect();
            let s = bin_pack_assign(&inputs, q, 2).unwrap();
            let ids: Vec<_> = (0..sizes.len()).collect();
            let rep = validate_schema(&s, &sizes_of(&inputs), q, &all_pairs(&ids)).unwrap();
            prop_assert!(rep.is_valid());
            prop_assert!(brute_uncovered(&s, &all_pairs(&ids)).is_empty());
        }

        #[test]
        fn larger_k_still_covers(sizes in proptest::collection::vec(0u64..=25, 1..=16), k in 2u64..=6) {
            let q = 100;
            let cap = q / k;
            let inputs: Vec<(InputId, u64)> = sizes.iter().map(|&s| s.min(cap)).enumerate().collect();
            let s = bin_pack_assign(&inputs, q, k).unwrap();
            let ids: Vec<_> = (0..sizes.len()).collect();
            let rep = validate_schema(&s, &sizes_of(&inputs), q, &all_pairs(&ids)).unwrap();
            prop_assert!(rep.is_valid());
        }

        #[test]
        fn ffd_within_twice_optimal_plus_one(sizes in proptest::collection::vec(1u64..=10, 0..=12)) {
            let items: Vec<(InputId, u64)> = sizes.iter().copied().enumerate().collect();
            let got = first_fit_decreasing(&items, 10).len();
            prop_assert!(got <= 2 * optimal_bins(&sizes, 10) + 1);
        }

        #[test]
        fn skew_cross_pairs_always_covered(nx in 1usize..=50, ny in 1usize..=50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = 200;
            let xs: Vec<(InputId, u64)> = (0..nx).map(|i| (i, rng.random_range(1..=q / 2))).collect();
            let ys: Vec<(InputId, u64)> = (0..ny).map(|i| (nx + i, rng.random_range(1..=q / 2))).collect();
            let s = skew_assign(&xs, &ys, q).unwrap();
            let cov = cross_pairs(&(0..nx).collect::<Vec<_>>(), &(nx..nx + ny).collect::<Vec<_>>());
            let rep = validate_schema(&s, &sizes_of(&[xs, ys].concat()), q, &cov).unwrap();
            prop_assert!(rep.is_valid());
        }
    }
}
