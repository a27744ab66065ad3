use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::model::{Relation, SiteId};

use super::exec::{key_attrs_for, Exec};
use super::fetch::UserStore;
use super::job::{job_digester, join_attr_set, next_digester};
use super::row::{Dataset, Registry};
use super::{JobPlan, JobResult, Source, Topology};

/// The work one cluster does on the relations stored there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterJob {
    pub site: SiteId,
    pub plan: JobPlan,
    pub relations: Vec<Relation>,
}

/// Each cluster joins its own relations with data already at its mappers.
/// Partial outputs travel to the global site, whose plan refers to them by
/// cluster id. In meta mode the global plan's last round calls originals
/// from every cluster.
///
/// Mode, cost model, digester and rehash limit come from `global`.
pub fn run_hierarchical(
    clusters: &[ClusterJob],
    global: &JobPlan,
    topology: &Topology,
    q: u64,
    seed: u64,
) -> Result<JobResult> {
    let global_site = if global.rounds.is_empty() {
        if clusters.len() != 1 {
            return Err(Error::InvalidParameter(
                "without global rounds there must be exactly one cluster".into(),
            ));
        }
        None
    } else {
        global.check()?;
        Some(
            topology
                .global_site
                .clone()
                .ok_or_else(|| Error::Config("hierarchical execution needs a global site".into()))?,
        )
    };
    let mut inputs: Vec<(&Relation, SiteId)> = Vec::new();
    for c in clusters {
        if c.plan.mode != global.mode {
            return Err(Error::InvalidParameter(format!(
                "cluster `{}` runs in a different mode from the global plan",
                c.site
            )));
        }
        if c.plan.rounds.is_empty() && c.relations.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "cluster `{}` has no rounds, so it must hold exactly one relation",
                c.site
            )));
        }
        if !topology.sites.iter().any(|s| s.site_id == c.site) {
            return Err(Error::Config(format!("cluster `{}` is not in the topology", c.site)));
        }
        for r in &c.relations {
            match topology.site_of(r.name()) {
                Some(s) if s == c.site => {}
                _ => {
                    return Err(Error::Config(format!(
                        "relation `{}` is not placed at cluster `{}`",
                        r.name(),
                        c.site
                    )))
                }
            }
            inputs.push((r, c.site.clone()));
        }
    }
    topology.validate(inputs.iter().map(|(r, _)| *r))?;

    let all_rounds: Vec<_> = clusters
        .iter()
        .flat_map(|c| c.plan.rounds.iter())
        .chain(&global.rounds)
        .cloned()
        .collect();
    let keys = key_attrs_for(inputs.iter().map(|(r, _)| *r), &all_rounds);
    let store = UserStore::build(inputs.iter().map(|(r, _)| *r), &keys)?;
    let check_attrs = join_attr_set(clusters.iter().map(|c| &c.plan).chain([global]));

    let mut digester = job_digester(global, seed);
    let mut discarded = Vec::new();
    let mut rehash_count = 0;
    loop {
        let reg = Registry::build(&inputs, &keys, digester.as_ref(), &global.cost)?;
        let mut ledger = CostLedger::new();
        let mut exec = Exec::new(&reg, global, q, &mut ledger);
        exec.set_co_located(true);

        let mut partials: BTreeMap<&str, Dataset> = BTreeMap::new();
        let mut last = None;
        let mut slot = 0;
        for c in clusters {
            last = None;
            if c.plan.rounds.is_empty() {
                slot = exec.begin(format!("{} scan", c.site));
                let ds = exec.base(c.relations[0].name(), &c.site, slot)?;
                partials.insert(&c.site, ds);
                continue;
            }
            for (i, spec) in c.plan.rounds.iter().enumerate() {
                slot = exec.begin(format!("{} round {}", c.site, i + 1));
                let left = cluster_source(&mut exec, &spec.left, last, &c.site, slot)?;
                let right = cluster_source(&mut exec, &spec.right, last, &c.site, slot)?;
                last = Some(exec.round(spec, &left, &right, &c.site, slot)?);
            }
            partials.insert(&c.site, exec.log[last.expect("cluster has rounds")].output.clone());
        }

        let reducer_site = match &global_site {
            Some(g) => {
                for c in clusters.iter().filter(|c| &c.site != g) {
                    slot = exec.begin(format!("ship {} to {g}", c.site));
                    exec.ship(&partials[c.site.as_str()], g, slot);
                }
                last = None;
                for (i, spec) in global.rounds.iter().enumerate() {
                    slot = exec.begin(format!("global round {}", i + 1));
                    let left = global_source(&exec, &spec.left, last, &partials)?;
                    let right = global_source(&exec, &spec.right, last, &partials)?;
                    last = Some(exec.round(spec, &left, &right, g, slot)?);
                }
                g.clone()
            }
            None => clusters[0].site.clone(),
        };
        let Some(last) = last else {
            return Err(Error::InvalidParameter("nothing to join".into()));
        };
        let fin = exec.finish(last, &store, Some(&reducer_site), &check_attrs, slot)?;
        if fin.collision {
            let Some(cfg) = digester else {
                return Err(Error::Integrity("joined values disagree on a literal key".into()));
            };
            if rehash_count >= global.rehash_limit {
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
            rounds_executed: all_rounds.len(),
            rehash_count,
            stats,
            final_digester: digester,
            fetched: fin.fetched,
        });
    }
}

fn cluster_source(
    exec: &mut Exec<'_, '_, '_>,
    src: &Source,
    last: Option<usize>,
    site: &str,
    slot: usize,
) -> Result<Dataset> {
    match src {
        Source::Relation(name) => exec.base(name, site, slot),
        Source::Previous => {
            let i = last.ok_or_else(|| Error::Schema("no previous round".into()))?;
            Ok(exec.log[i].output.clone())
        }
    }
}

fn global_source(
    exec: &Exec<'_, '_, '_>,
    src: &Source,
    last: Option<usize>,
    partials: &BTreeMap<&str, Dataset>,
) -> Result<Dataset> {
    match src {
        Source::Relation(site) => partials
            .get(site.as_str())
            .cloned()
            .ok_or_else(|| Error::Schema(format!("no cluster `{site}` feeds the global plan"))),
        Source::Previous => {
            let i = last.ok_or_else(|| Error::Schema("no previous round".into()))?;
            Ok(exec.log[i].output.clone())
        }
    }
}
