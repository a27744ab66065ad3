//! The call protocol: reducers flag the inputs that reached an output and the
//! owning sites deliver those originals.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::ledger::{Channel, CostLedger, Payload};
use crate::model::{build_index, CostModel, Origin, Relation, Tuple, UserIndex};

/// One reducer's answer for every input it received: `true` asks for the original.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducerDecision {
    pub reducer: usize,
    pub requests: Vec<(Origin, bool)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fetched {
    pub reducer: usize,
    pub origin: Origin,
    pub tuple: Tuple,
}

/// The user-side view of the data: each relation with an index on its
/// first key attribute, used to resolve calls.
#[derive(Clone, Debug)]
pub struct UserStore<'a> {
    relations: BTreeMap<String, (&'a Relation, Option<UserIndex>)>,
}

impl<'a> UserStore<'a> {
    /// Indexes each relation on the first of its `key_attrs`, or on its first
    /// attribute when it has no key attributes.
    pub fn build(
        relations: impl IntoIterator<Item = &'a Relation>,
        key_attrs: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let mut out = BTreeMap::new();
        for rel in relations {
            let attr = key_attrs
                .get(rel.name())
                .and_then(|k| k.first())
                .or_else(|| rel.attributes().first());
            let index = attr.map(|a| build_index(rel, a)).transpose()?;
            out.insert(rel.name().to_string(), (rel, index));
        }
        Ok(Self { relations: out })
    }

    pub fn index_mut(&mut self, relation: &str) -> Option<&mut UserIndex> {
        self.relations.get_mut(relation).and_then(|(_, i)| i.as_mut())
    }

    /// Looks a requested tuple up through the index.
    pub fn resolve(&self, origin: &Origin) -> Result<&'a Tuple> {
        let (rel, index) = self
            .relations
            .get(&origin.relation)
            .ok_or_else(|| Error::Integrity(format!("no relation `{}` at the user", origin.relation)))?;
        let t = rel.tuple(origin.tuple_id).ok_or_else(|| {
            Error::Integrity(format!("`{}` has no tuple {}", origin.relation, origin.tuple_id))
        })?;
        if let Some(index) = index {
            let key = rel.value(t, index.attribute())?;
            if !index.contains(key, t.tuple_id) {
                return Err(Error::Integrity(format!(
                    "index on `{}.{}` misses tuple {}",
                    origin.relation,
                    index.attribute(),
                    origin.tuple_id
                )));
            }
        }
        Ok(t)
    }
}

/// Charges one signal per (reducer, input) decision and delivers every
/// requested original once per reducer.
///
/// Deliveries into `reducer_site` from a different site go on the
/// inter-cluster channel; everything else is a user-to-reducer fetch.
pub fn call_fetch(
    decisions: &[ReducerDecision],
    store: &UserStore<'_>,
    cost: &CostModel,
    reducer_site: Option<&str>,
    ledger: &mut CostLedger,
    round: usize,
) -> Result<Vec<Fetched>> {
    let mut out = Vec::new();
    for d in decisions {
        let mut seen: BTreeMap<&Origin, bool> = BTreeMap::new();
        for (o, want) in &d.requests {
            *seen.entry(o).or_insert(false) |= *want;
        }
        ledger.count_signals(seen.len() as u64);
        ledger.charge(
            round,
            Channel::CallSignal,
            Payload::Metadata,
            cost.signal_cost() * seen.len() as u64,
        );
        let wanted: BTreeSet<&Origin> = seen.into_iter().filter(|(_, w)| *w).map(|(o, _)| o).collect();
        for o in wanted {
            let tuple = store.resolve(o)?;
            let channel = match reducer_site {
                Some(site) if site != o.site => Channel::InterCluster,
                _ => Channel::UserToReduceFetch,
            };
            ledger.charge(round, channel, Payload::Data, cost.tuple_cost(tuple));
            out.push(Fetched {
                reducer: d.reducer,
                origin: o.clone(),
                tuple: tuple.clone(),
            });
        }
    }
    Ok(out)
}
