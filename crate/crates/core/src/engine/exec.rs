//! State shared by a single execution attempt.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::ledger::{Channel, CostLedger, Payload};
use crate::model::{AttributeValue, CostModel, Origin, Relation, Tuple};

use super::fetch::{call_fetch, ReducerDecision, UserStore};
use super::round::{execute_round, RoundOutcome};
use super::row::{Dataset, Gid, Registry};
use super::{JobPlan, Mode, OutputTuple, RoundSpec, RunStats};

/// Per relation, its attributes that some round joins on, in relation order.
pub(crate) fn key_attrs_for<'a>(
    relations: impl Iterator<Item = &'a Relation>,
    rounds: &[RoundSpec],
) -> BTreeMap<String, Vec<String>> {
    let joined: BTreeSet<&str> = rounds
        .iter()
        .flat_map(|r| r.join_attrs.iter().map(String::as_str))
        .collect();
    relations
        .map(|rel| {
            let keys = rel
                .attributes()
                .iter()
                .filter(|a| joined.contains(a.as_str()))
                .cloned()
                .collect();
            (rel.name().to_string(), keys)
        })
        .collect()
}

pub(crate) struct Exec<'r, 'a, 'l> {
    reg: &'r Registry<'a>,
    mode: Mode,
    cost: CostModel,
    parallel: bool,
    co_located: bool,
    q: u64,
    pub ledger: &'l mut CostLedger,
    uploaded: BTreeSet<String>,
    pub log: Vec<RoundOutcome>,
}

pub(crate) struct Finished {
    pub attributes: Vec<String>,
    pub outputs: Vec<OutputTuple>,
    pub fetched: Vec<Origin>,
    pub collision: bool,
}

impl<'r, 'a, 'l> Exec<'r, 'a, 'l> {
    pub fn new(reg: &'r Registry<'a>, plan: &JobPlan, q: u64, ledger: &'l mut CostLedger) -> Self {
        Self {
            reg,
            mode: plan.mode,
            cost: plan.cost,
            parallel: plan.parallel,
            co_located: plan.co_located,
            q,
            ledger,
            uploaded: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    pub fn set_co_located(&mut self, co_located: bool) {
        self.co_located = co_located;
    }

    pub fn begin(&mut self, label: String) -> usize {
        self.ledger.begin_round(label)
    }

    /// Rows of a base relation at `site`; the first use uploads the relation
    /// unless data is co-located with the mappers.
    pub fn base(&mut self, name: &str, site: &str, slot: usize) -> Result<Dataset> {
        let ds = self.reg.base_dataset(name, self.mode, site)?;
        if !self.co_located && self.uploaded.insert(name.to_string()) {
            let mut amount = 0;
            for row in &ds.rows {
                let e = self.reg.entry(row.constituents[0]);
                amount += match self.mode {
                    Mode::Meta => e.meta_cost,
                    Mode::Classic => e.data_cost,
                };
            }
            match self.mode {
                Mode::Meta => {
                    self.ledger.charge(slot, Channel::UserToMap, Payload::Metadata, amount);
                    self.ledger.count_metadata_records(ds.rows.len() as u64);
                }
                Mode::Classic => self.ledger.charge(slot, Channel::UserToMap, Payload::Data, amount),
            }
        }
        Ok(ds)
    }

    pub fn round(
        &mut self,
        spec: &RoundSpec,
        left: &Dataset,
        right: &Dataset,
        site: &str,
        slot: usize,
    ) -> Result<usize> {
        let out = execute_round(
            self.reg,
            self.mode,
            self.parallel,
            spec,
            left,
            right,
            self.q,
            site,
            self.ledger,
            slot,
        )?;
        self.log.push(out);
        Ok(self.log.len() - 1)
    }

    /// Moves a dataset between clusters: each distinct tuple it refers to is
    /// shipped once, as metadata or as data depending on the mode.
    /// Charges moving `ds` to site `to`; nothing when it is already there.
    pub fn ship(&mut self, ds: &Dataset, to: &str, slot: usize) {
        if ds.site == to {
            return;
        }
        let mut amount = 0;
        let gids = ds.distinct_constituents();
        for &g in &gids {
            let e = self.reg.entry(g);
            amount += match self.mode {
                Mode::Meta => e.meta_cost,
                Mode::Classic => e.data_cost,
            };
        }
        match self.mode {
            Mode::Meta => {
                self.ledger.charge(slot, Channel::InterCluster, Payload::Metadata, amount);
                self.ledger.count_metadata_records(gids.len() as u64);
            }
            Mode::Classic => self.ledger.charge(slot, Channel::InterCluster, Payload::Data, amount),
        }
    }

    /// Calls originals for the outputs of logged round `last` (meta mode),
    /// materialises the outputs and checks every join attribute literally.
    pub fn finish(
        &mut self,
        last: usize,
        store: &UserStore<'_>,
        reducer_site: Option<&str>,
        check_attrs: &BTreeSet<String>,
        slot: usize,
    ) -> Result<Finished> {
        let reg = self.reg;
        let outcome = &self.log[last];
        let mut fetched_at: HashMap<(usize, Gid), Tuple> = HashMap::new();
        let mut fetched: Vec<Origin> = Vec::new();
        if self.mode == Mode::Meta {
            let mut produced: Vec<BTreeSet<Gid>> = vec![BTreeSet::new(); outcome.delivered.len()];
            for (row, &j) in outcome.output.rows.iter().zip(&outcome.producer) {
                produced[j].extend(row.constituents.iter().copied());
            }
            let decisions: Vec<ReducerDecision> = outcome
                .delivered
                .iter()
                .enumerate()
                .map(|(j, gids)| ReducerDecision {
                    reducer: j,
                    requests: gids
                        .iter()
                        .map(|g| (reg.entry(*g).origin.clone(), produced[j].contains(g)))
                        .collect(),
                })
                .collect();
            for f in call_fetch(&decisions, store, &self.cost, reducer_site, self.ledger, slot)? {
                let (_, first) = reg.relation(&f.origin.relation)?;
                let gid = first + f.origin.tuple_id as Gid;
                fetched.push(f.origin);
                fetched_at.insert((f.reducer, gid), f.tuple);
            }
            fetched.sort();
            fetched.dedup();
        }

        let tuple_at = |j: usize, g: Gid| -> Result<&Tuple> {
            match self.mode {
                Mode::Classic => Ok(reg.entry(g).tuple),
                Mode::Meta => fetched_at.get(&(j, g)).ok_or_else(|| {
                    Error::Integrity(format!("reducer {j} holds no original for {:?}", reg.entry(g).origin))
                }),
            }
        };

        let ds = &outcome.output;
        let mut outputs = Vec::with_capacity(ds.rows.len());
        let mut collision = false;
        for (row, &j) in ds.rows.iter().zip(&outcome.producer) {
            let mut values = Vec::with_capacity(ds.attributes.len());
            for (attr, field) in ds.attributes.iter().zip(&row.fields) {
                let rel = reg.entry(field.source).relation;
                let t = tuple_at(j, field.source)?;
                values.push(rel.value(t, attr)?.clone());
            }
            for attr in check_attrs {
                let mut seen: Option<&AttributeValue> = None;
                for &g in &row.constituents {
                    let rel = reg.entry(g).relation;
                    if !rel.has_attribute(attr) {
                        continue;
                    }
                    let v = rel.value(tuple_at(j, g)?, attr)?;
                    match seen {
                        None => seen = Some(v),
                        Some(s) if s != v => collision = true,
                        Some(_) => {}
                    }
                }
            }
            outputs.push(OutputTuple {
                origins: row.constituents.iter().map(|&g| reg.entry(g).origin.clone()).collect(),
                values,
            });
        }
        Ok(Finished {
            attributes: ds.attributes.iter().map(|a| a.to_string()).collect(),
            outputs,
            fetched,
            collision,
        })
    }

    /// Fills the participating share of the shuffle and measures run parameters.
    pub fn stats(&mut self, outputs: &[OutputTuple], digest_bits: u32) -> RunStats {
        let reg = self.reg;
        let mut participating: BTreeSet<Gid> = BTreeSet::new();
        for o in outputs {
            for origin in &o.origins {
                if let Ok((_, first)) = reg.relation(&origin.relation) {
                    participating.insert(first + origin.tuple_id as Gid);
                }
            }
        }
        let mut deliveries = 0u64;
        let mut m2r = 0u64;
        let mut inputs = 0u64;
        let mut assignments = 0u64;
        let mut reducers = 0u64;
        for round in &self.log {
            inputs += round.inputs;
            assignments += round.assignments;
            reducers += round.delivered.len() as u64;
            for gids in &round.delivered {
                for g in gids.iter().filter(|g| participating.contains(g)) {
                    deliveries += 1;
                    let e = reg.entry(*g);
                    m2r += match self.mode {
                        Mode::Meta => e.meta_cost,
                        Mode::Classic => e.data_cost,
                    };
                }
            }
        }
        self.ledger.set_map_to_reduce_participating(m2r);

        let h = participating.len() as u64;
        RunStats {
            n: reg.relations().map(|r| r.len() as u64).max().unwrap_or(0),
            k: reg.relations().count() as u64,
            p: reg.key_attrs.values().map(|k| k.len() as u64).max().unwrap_or(0),
            m: reg.distinct_keys,
            c: reg.entries.iter().map(|e| e.meta_cost).max().unwrap_or(0),
            w: reg.entries.iter().map(|e| e.data_cost).max().unwrap_or(0),
            h,
            deliveries,
            replication: if h == 0 { 0.0 } else { deliveries as f64 / h as f64 },
            schema_replication: if inputs == 0 {
                0.0
            } else {
                assignments as f64 / inputs as f64
            },
            reducers,
            outputs: outputs.len() as u64,
            digest_bits,
        }
    }
}
