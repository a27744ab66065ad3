//! One map/shuffle/reduce round.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{Channel, ChannelCosts, CostLedger, Payload};
use crate::model::{Origin, Relation};
use crate::schema::{bin_pack_assign, display_key, skew_assign, InputId};

use super::exec::{key_attrs_for, Exec};
use super::row::{Attr, Dataset, Gid, Registry, Row};
use super::{JobPlan, Mode, RoundSpec, Source, Strategy};

pub(crate) struct RoundOutcome {
    pub output: Dataset,
    /// Reducer that emitted each output row.
    pub producer: Vec<usize>,
    /// Distinct tuples whose records reached each reducer.
    pub delivered: Vec<Vec<Gid>>,
    pub inputs: u64,
    pub assignments: u64,
}

struct Input<'d> {
    left: bool,
    row: &'d Row,
    key: Vec<u8>,
    size: u64,
}

/// Partition key and size of every row of one side.
fn map_side<'d>(
    reg: &Registry<'_>,
    parallel: bool,
    ds: &'d Dataset,
    cols: &[usize],
    is_left: bool,
) -> Result<Vec<Input<'d>>> {
    let one = |row: &'d Row| -> Result<Input<'d>> {
        let mut key = Vec::new();
        for &c in cols {
            match &row.fields[c].key {
                Some(k) => key.extend_from_slice(k),
                None => {
                    return Err(Error::Schema(format!(
                        "attribute `{}` is not visible to mappers",
                        ds.attributes[c]
                    )))
                }
            }
        }
        Ok(Input {
            left: is_left,
            row,
            key,
            size: row.constituents.iter().map(|&g| reg.entry(g).data_cost).sum(),
        })
    };
    if parallel {
        ds.rows.par_iter().map(one).collect()
    } else {
        ds.rows.iter().map(one).collect()
    }
}

/// Joins `left` and `right` on `spec.join_attrs`, charging the shuffle.
#[allow(clippy::too_many_arguments)]
pub(crate) fn execute_round(
    reg: &Registry<'_>,
    mode: Mode,
    parallel: bool,
    spec: &RoundSpec,
    left: &Dataset,
    right: &Dataset,
    q: u64,
    out_site: &str,
    ledger: &mut CostLedger,
    round: usize,
) -> Result<RoundOutcome> {
    let (lcols, rcols) = join_columns(spec, left, right)?;

    let mut inputs = map_side(reg, parallel, left, &lcols, true)?;
    inputs.extend(map_side(reg, parallel, right, &rcols, false)?);
    // canonical reduce-input order: key bytes, then side, then originating tuples
    inputs.sort_by(|a, b| {
        a.key
            .cmp(&b.key)
            .then(b.left.cmp(&a.left))
            .then_with(|| a.row.constituents.cmp(&b.row.constituents))
    });

    let reducers = assign(&inputs, spec.strategy, q)?;

    let mut placement: Vec<Vec<usize>> = vec![Vec::new(); inputs.len()];
    for (j, members) in reducers.iter().enumerate() {
        for &i in members {
            placement[i].push(j);
        }
    }

    let drop_cols: Vec<usize> = rcols.clone();
    let reduce = |j: usize| -> (Vec<Gid>, ChannelCosts, Vec<Row>) {
        let members = &reducers[j];
        let mut gids: Vec<Gid> = members
            .iter()
            .flat_map(|&i| inputs[i].row.constituents.iter().copied())
            .collect();
        gids.sort_unstable();
        gids.dedup();
        let mut costs = ChannelCosts::default();
        for &g in &gids {
            let e = reg.entry(g);
            match mode {
                Mode::Meta => costs.add(Channel::MapToReduce, Payload::Metadata, e.meta_cost),
                Mode::Classic => costs.add(Channel::MapToReduce, Payload::Data, e.data_cost),
            }
        }
        let mut rights: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
        for &i in members.iter().filter(|&&i| !inputs[i].left) {
            rights.entry(inputs[i].key.as_slice()).or_default().push(i);
        }
        let mut rows = Vec::new();
        for &l in members.iter().filter(|&&i| inputs[i].left) {
            let Some(rs) = rights.get(inputs[l].key.as_slice()) else { continue };
            for &r in rs {
                if owner(&placement[l], &placement[r]) != Some(j) {
                    continue;
                }
                let (lrow, rrow) = (inputs[l].row, inputs[r].row);
                let mut constituents = lrow.constituents.clone();
                constituents.extend_from_slice(&rrow.constituents);
                let mut fields = lrow.fields.clone();
                fields.extend(
                    rrow.fields
                        .iter()
                        .enumerate()
                        .filter(|(c, _)| !drop_cols.contains(c))
                        .map(|(_, f)| f.clone()),
                );
                rows.push(Row {
                    constituents,
                    fields,
                });
            }
        }
        (gids, costs, rows)
    };
    let reduced: Vec<(Vec<Gid>, ChannelCosts, Vec<Row>)> = if parallel {
        (0..reducers.len()).into_par_iter().map(reduce).collect()
    } else {
        (0..reducers.len()).map(reduce).collect()
    };

    let mut attributes: Vec<Attr> = left.attributes.clone();
    attributes.extend(
        right
            .attributes
            .iter()
            .enumerate()
            .filter(|(c, _)| !rcols.contains(c))
            .map(|(_, a)| a.clone()),
    );
    let mut rows = Vec::new();
    let mut producer = Vec::new();
    let mut delivered = Vec::with_capacity(reduced.len());
    let mut total = ChannelCosts::default();
    let mut records = 0u64;
    for (j, (gids, costs, out)) in reduced.into_iter().enumerate() {
        total += &costs;
        records += gids.len() as u64;
        producer.extend(std::iter::repeat_n(j, out.len()));
        rows.extend(out);
        delivered.push(gids);
    }
    ledger.merge(round, &total);
    if mode == Mode::Meta {
        ledger.count_metadata_records(records);
    }
    Ok(RoundOutcome {
        output: Dataset {
            attributes,
            rows,
            site: out_site.to_string(),
        },
        producer,
        delivered,
        inputs: inputs.len() as u64,
        assignments: reducers.iter().map(|r| r.len() as u64).sum(),
    })
}

/// Column positions of the join attributes on each side. Attributes shared by
/// both sides must all be join attributes.
fn join_columns(spec: &RoundSpec, left: &Dataset, right: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut lcols = Vec::new();
    let mut rcols = Vec::new();
    for a in &spec.join_attrs {
        let l = left
            .column(a)
            .ok_or_else(|| Error::Schema(format!("left input has no attribute `{a}`")))?;
        let r = right
            .column(a)
            .ok_or_else(|| Error::Schema(format!("right input has no attribute `{a}`")))?;
        lcols.push(l);
        rcols.push(r);
    }
    for a in &left.attributes {
        if right.column(a).is_some() && !spec.join_attrs.iter().any(|j| **j == **a) {
            return Err(Error::Schema(format!(
                "attribute `{a}` is shared by both inputs but is not a join attribute"
            )));
        }
    }
    Ok((lcols, rcols))
}

/// The first reducer holding both inputs. Placements are ascending.
fn owner(a: &[usize], b: &[usize]) -> Option<usize> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some(a[i]),
        }
    }
    None
}

fn assign(inputs: &[Input<'_>], strategy: Strategy, q: u64) -> Result<Vec<Vec<InputId>>> {
    if strategy == Strategy::BinPack {
        let items: Vec<(InputId, u64)> = inputs.iter().enumerate().map(|(i, x)| (i, x.size)).collect();
        return Ok(bin_pack_assign(&items, q, 2)?.reducers().to_vec());
    }
    let mut reducers = Vec::new();
    let mut start = 0;
    while start < inputs.len() {
        let mut end = start + 1;
        while end < inputs.len() && inputs[end].key == inputs[start].key {
            end += 1;
        }
        let size: u64 = inputs[start..end].iter().map(|x| x.size).sum();
        if size <= q {
            reducers.push((start..end).collect());
        } else if strategy == Strategy::KeyGroup {
            return Err(Error::OversizedGroup {
                key: display_key(&inputs[start].key),
                size,
                q,
            });
        } else {
            let side = |left: bool| -> Vec<(InputId, u64)> {
                (start..end)
                    .filter(|&i| inputs[i].left == left)
                    .map(|i| (i, inputs[i].size))
                    .collect()
            };
            let s = skew_assign(&side(true), &side(false), q)?;
            reducers.extend(s.reducers().iter().cloned());
        }
        start = end;
    }
    Ok(reducers)
}

/// What one reducer received and produced, by originating tuples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducerOutput {
    pub inputs: Vec<Origin>,
    pub outputs: Vec<Vec<Origin>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutput {
    pub reducers: Vec<ReducerOutput>,
}

/// Runs round `index` of `plan` on its own, over base relations only.
///
/// Upload and shuffle are charged to a new round of `ledger`. Nothing is
/// fetched: in meta mode the outputs are pending calls.
pub fn run_round(
    plan: &JobPlan,
    index: usize,
    relations: &[Relation],
    q: u64,
    ledger: &mut CostLedger,
) -> Result<RoundOutput> {
    let spec = plan
        .rounds
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("plan has no round {}", index + 1)))?;
    let (Source::Relation(l), Source::Relation(r)) = (&spec.left, &spec.right) else {
        return Err(Error::Schema("a standalone round reads base relations only".into()));
    };
    let inputs: Vec<(&Relation, String)> = relations
        .iter()
        .map(|r| (r, r.home_site().to_string()))
        .collect();
    let keys = key_attrs_for(relations.iter(), std::slice::from_ref(spec));
    let reg = Registry::build(&inputs, &keys, plan.digester.as_ref(), &plan.cost)?;
    let mut exec = Exec::new(&reg, plan, q, ledger);
    let slot = exec.begin(format!("round {}", index + 1));
    let left = exec.base(l, "compute", slot)?;
    let right = exec.base(r, "compute", slot)?;
    let idx = exec.round(spec, &left, &right, "compute", slot)?;
    let out = &exec.log[idx];
    Ok(RoundOutput {
        reducers: out
            .delivered
            .iter()
            .enumerate()
            .map(|(j, gids)| ReducerOutput {
                inputs: gids.iter().map(|&g| reg.entry(g).origin.clone()).collect(),
                outputs: out
                    .output
                    .rows
                    .iter()
                    .zip(&out.producer)
                    .filter(|(_, p)| **p == j)
                    .map(|(row, _)| {
                        row.constituents
                            .iter()
                            .map(|&g| reg.entry(g).origin.clone())
                            .collect()
                    })
                    .collect(),
            })
            .collect(),
    })
}
