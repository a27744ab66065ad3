//! k-nearest-neighbour join in two metadata rounds.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{call_fetch, ReducerDecision, UserStore};
use crate::error::{Error, Result};
use crate::ledger::{Channel, CostLedger, Payload};
use crate::model::{make_meta, AttributeValue, CostModel, Origin, Relation, TupleId};
use crate::schema::skew_assign;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnResult {
    /// For each tuple of R in id order, its k neighbours in S, nearest first.
    pub neighbors: Vec<(TupleId, Vec<TupleId>)>,
    pub ledger: CostLedger,
    /// Calls delivered, counting a tuple once per calling reducer.
    pub fetched_r: u64,
    pub fetched_s: u64,
    /// Distinct S tuples called.
    pub fetched_s_distinct: Vec<TupleId>,
    /// R and S pairs that shared a first-round reducer.
    pub partitions: usize,
    pub rounds_executed: usize,
}

/// Coordinates of every tuple, parsed as integers.
pub fn coordinates(rel: &Relation, coords: &[&str]) -> Result<Vec<Vec<i64>>> {
    let cols: Vec<usize> = coords.iter().map(|c| rel.attribute_index(c)).collect::<Result<_>>()?;
    rel.tuples()
        .iter()
        .map(|t| {
            cols.iter()
                .map(|&c| {
                    t.values[c].as_text().trim().parse::<i64>().map_err(|_| {
                        Error::InvalidParameter(format!(
                            "`{}` tuple {}: `{}` is not an integer coordinate",
                            rel.name(),
                            t.tuple_id,
                            t.values[c].as_text()
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

pub fn squared_distance(a: &[i64], b: &[i64]) -> i128 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as i128 - *y as i128;
            d * d
        })
        .sum()
}

/// The `k` members of `candidates` nearest to `point`, ties broken by id.
fn nearest(point: &[i64], candidates: impl Iterator<Item = TupleId>, s: &[Vec<i64>], k: usize) -> Vec<TupleId> {
    let mut scored: Vec<(i128, TupleId)> = candidates.map(|j| (squared_distance(point, &s[j]), j)).collect();
    scored.sort_unstable();
    scored.truncate(k);
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Round one pairs bins of R with bins of S (bins of `q/2`, or a single
/// reducer when everything fits in `q`) and keeps, per R tuple, its `k`
/// nearest S tuples within the reducer. Round two gathers the local winners
/// of each R tuple at one reducer and keeps the global `k`. That reducer
/// then calls the R tuple and its `k` neighbours. Coordinates are the key
/// material; the other attributes travel only as sizes until called.
pub fn knn_meta(
    r: &Relation,
    s: &Relation,
    coords: &[&str],
    k: usize,
    q: u64,
    cost: &CostModel,
    co_located: bool,
) -> Result<KnnResult> {
    if k == 0 || k > s.len() {
        return Err(Error::InvalidParameter(format!("k must be in 1..={}, got {k}", s.len())));
    }
    let rp = coordinates(r, coords)?;
    let sp = coordinates(s, coords)?;
    let rm: Vec<u64> = r
        .tuples()
        .iter()
        .map(|t| make_meta(t, r, coords, None, cost.size_field_bits()).map(|m| cost.meta_cost(&m)))
        .collect::<Result<_>>()?;
    let sm: Vec<u64> = s
        .tuples()
        .iter()
        .map(|t| make_meta(t, s, coords, None, cost.size_field_bits()).map(|m| cost.meta_cost(&m)))
        .collect::<Result<_>>()?;

    let mut ledger = CostLedger::new();
    let one = ledger.begin_round("local k-nn");
    if !co_located {
        ledger.charge(one, Channel::UserToMap, Payload::Metadata, rm.iter().sum::<u64>() + sm.iter().sum::<u64>());
        ledger.count_metadata_records((r.len() + s.len()) as u64);
    }

    // ids below r.len() are R tuples, the rest S tuples
    let x: Vec<(usize, u64)> = r.tuples().iter().map(|t| (t.tuple_id, cost.tuple_cost(t))).collect();
    let y: Vec<(usize, u64)> = s
        .tuples()
        .iter()
        .map(|t| (r.len() + t.tuple_id, cost.tuple_cost(t)))
        .collect();
    let schema = skew_assign(&x, &y, q)?;

    let mut local: BTreeMap<TupleId, BTreeSet<TupleId>> = BTreeMap::new();
    let mut shuffled = 0;
    let mut records = 0;
    for members in schema.reducers() {
        let (rs, ss): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| i < r.len());
        let ss: Vec<TupleId> = ss.into_iter().map(|i| i - r.len()).collect();
        shuffled += rs.iter().map(|&i| rm[i]).sum::<u64>() + ss.iter().map(|&j| sm[j]).sum::<u64>();
        records += (rs.len() + ss.len()) as u64;
        for &i in &rs {
            local
                .entry(i)
                .or_default()
                .extend(nearest(&rp[i], ss.iter().copied(), &sp, k));
        }
    }
    ledger.charge(one, Channel::MapToReduce, Payload::Metadata, shuffled);

    let two = ledger.begin_round("global k-nn");
    let mut shuffled = 0;
    let mut neighbors = Vec::with_capacity(r.len());
    let mut decisions = Vec::with_capacity(r.len());
    let origin = |rel: &Relation, id: TupleId| Origin {
        relation: rel.name().to_string(),
        tuple_id: id,
        site: rel.home_site().to_string(),
    };
    for i in 0..r.len() {
        let cands = local.remove(&i).unwrap_or_default();
        shuffled += rm[i] + cands.iter().map(|&j| sm[j]).sum::<u64>();
        records += 1 + cands.len() as u64;
        let best = nearest(&rp[i], cands.iter().copied(), &sp, k);
        let mut requests = vec![(origin(r, i), true)];
        requests.extend(cands.iter().map(|&j| (origin(s, j), best.contains(&j))));
        decisions.push(ReducerDecision { reducer: i, requests });
        neighbors.push((i, best));
    }
    ledger.charge(two, Channel::MapToReduce, Payload::Metadata, shuffled);
    ledger.count_metadata_records(records);

    let keys = BTreeMap::from([
        (r.name().to_string(), vec![coords[0].to_string()]),
        (s.name().to_string(), vec![coords[0].to_string()]),
    ]);
    let store = UserStore::build([r, s], &keys)?;
    let fetched = call_fetch(&decisions, &store, cost, None, &mut ledger, two)?;
    let fetched_r = fetched.iter().filter(|f| f.origin.relation == r.name()).count() as u64;
    let mut fetched_s_distinct: Vec<TupleId> = fetched
        .iter()
        .filter(|f| f.origin.relation == s.name() && f.origin.relation != r.name())
        .map(|f| f.origin.tuple_id)
        .collect();
    let fetched_s = fetched.len() as u64 - fetched_r;
    fetched_s_distinct.sort_unstable();
    fetched_s_distinct.dedup();
    Ok(KnnResult {
        neighbors,
        ledger,
        fetched_r,
        fetched_s,
        fetched_s_distinct,
        partitions: schema.len(),
        rounds_executed: 2,
    })
}

/// Query points R and data points S with `dims` integer coordinates and a
/// `payload_bits` description each.
pub fn gen_points(r_count: usize, s_count: usize, dims: usize, range: i64, payload_bits: u64, seed: u64) -> Result<(Relation, Relation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attrs: Vec<String> = (0..dims).map(|d| format!("x{d}")).collect();
    attrs.push("description".into());
    let mut make = |name: &str, count: usize| -> Result<Relation> {
        let mut rel = Relation::new(name, attrs.clone(), "user")?;
        for i in 0..count {
            let mut values: Vec<AttributeValue> = (0..dims)
                .map(|_| AttributeValue::new(rng.random_range(-range..=range).to_string()))
                .collect();
            values.push(AttributeValue::with_size_bits(format!("{name}{i}"), payload_bits));
            rel.push(values)?;
        }
        Ok(rel)
    };
    let r = make("R", r_count)?;
    let s = make("S", s_count)?;
    Ok((r, s))
}
