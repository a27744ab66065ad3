use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hashing::{rehash, required_digest_bits, splitmix64, HashConfig};
use crate::ledger::CostLedger;
use crate::model::{Relation, SiteId};

use super::exec::{key_attrs_for, Exec};
use super::fetch::UserStore;
use super::row::{Dataset, Registry};
use super::{JobPlan, JobResult, Source, Topology};

/// Digest configuration for a run: the plan's seed mixed with the job seed.
pub(crate) fn job_digester(plan: &JobPlan, seed: u64) -> Option<HashConfig> {
    plan.digester.map(|cfg| HashConfig {
        seed: splitmix64(cfg.seed ^ splitmix64(seed)),
        ..cfg
    })
}

/// The config used after a collision: the next family member, widened to at
/// least the default width for `m` keys.
pub(crate) fn next_digester(cfg: &HashConfig, m: u64) -> HashConfig {
    let mut next = rehash(cfg);
    next.output_bits = next.output_bits.max(required_digest_bits(m));
    next
}

pub(crate) fn join_attr_set<'p>(plans: impl IntoIterator<Item = &'p JobPlan>) -> BTreeSet<String> {
    plans
        .into_iter()
        .flat_map(|p| p.rounds.iter().flat_map(|r| r.join_attrs.iter().cloned()))
        .collect()
}

/// Runs every round of `plan` in order. In meta mode the last round calls
/// the originals; a digest collision found there restarts the job under a
/// fresh hash function.
pub fn run_job(
    plan: &JobPlan,
    relations: &[Relation],
    topology: &Topology,
    q: u64,
    seed: u64,
) -> Result<JobResult> {
    plan.check()?;
    topology.validate(relations)?;
    let inputs: Vec<(&Relation, SiteId)> = relations
        .iter()
        .map(|r| (r, topology.site_of(r.name()).unwrap_or(r.home_site()).to_string()))
        .collect();
    let keys = key_attrs_for(relations.iter(), &plan.rounds);
    let store = UserStore::build(relations.iter(), &keys)?;
    let check_attrs = join_attr_set([plan]);

    let mut digester = job_digester(plan, seed);
    let mut discarded = Vec::new();
    let mut rehash_count = 0;
    loop {
        let reg = Registry::build(&inputs, &keys, digester.as_ref(), &plan.cost)?;
        let mut ledger = CostLedger::new();
        let mut exec = Exec::new(&reg, plan, q, &mut ledger);
        let mut last = None;
        let mut slot = 0;
        for (i, spec) in plan.rounds.iter().enumerate() {
            slot = exec.begin(format!("round {}", i + 1));
            let left = source(&mut exec, &spec.left, last, slot)?;
            let right = source(&mut exec, &spec.right, last, slot)?;
            last = Some(exec.round(spec, &left, &right, "compute", slot)?);
        }
        let last = last.expect("plan has rounds");
        let fin = exec.finish(last, &store, None, &check_attrs, slot)?;
        if fin.collision {
            let Some(cfg) = digester else {
                return Err(Error::Integrity("joined values disagree on a literal key".into()));
            };
            if rehash_count >= plan.rehash_limit {
                return Err(Error::HashExhausted(rehash_count));
            }
            drop(exec);
            discarded.push(ledger);
            rehash_count += 1;
            digester = Some(next_digester(&cfg, reg.distinct_keys));
            continue;
        }
        let stats = exec.stats(&fin.outputs, digester.map_or(0, |d| d.output_bits));
        drop(exec);
        return Ok(JobResult {
            attributes: fin.attributes,
            outputs: fin.outputs,
            ledger,
            discarded,
            rounds_executed: plan.rounds.len(),
            rehash_count,
            stats,
            final_digester: digester,
            fetched: fin.fetched,
        });
    }
}

fn source(exec: &mut Exec<'_, '_, '_>, src: &Source, last: Option<usize>, slot: usize) -> Result<Dataset> {
    match src {
        Source::Relation(name) => exec.base(name, "compute", slot),
        Source::Previous => {
            let i = last.ok_or_else(|| Error::Schema("no previous round".into()))?;
            Ok(exec.log[i].output.clone())
        }
    }
}
