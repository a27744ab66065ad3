//! Join algorithms assembled from the engine.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{
    run_hierarchical, run_job, ClusterJob, JobPlan, JobResult, Mode, RoundSpec, Source, Strategy,
    Topology, REHASH_LIMIT,
};
use crate::error::{Error, Result};
use crate::hashing::{required_digest_bits, HashConfig};
use crate::model::{AttributeValue, CostModel, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinOptions {
    pub cost: CostModel,
    pub co_located: bool,
    pub seed: u64,
    pub parallel: bool,
    pub rehash_limit: u32,
    /// Digest width for hashed joins; `None` picks the width for the measured key count.
    pub digest_bits: Option<u32>,
}

impl Default for JoinOptions {
    fn default() -> Self {
        Self {
            cost: CostModel::default(),
            co_located: false,
            seed: 0,
            parallel: false,
            rehash_limit: REHASH_LIMIT,
            digest_bits: None,
        }
    }
}

impl JoinOptions {
    fn plan(&self, mode: Mode, rounds: Vec<RoundSpec>) -> JobPlan {
        let mut plan = JobPlan::new(mode, rounds)
            .with_cost(self.cost)
            .with_co_located(self.co_located)
            .with_parallel(self.parallel);
        plan.rehash_limit = self.rehash_limit;
        plan
    }
}

/// Relations to join, the attributes each cascade step joins on, and the
/// fraction of `q` above which a key group counts as heavy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub relations: Vec<String>,
    pub steps: Vec<Vec<String>>,
    pub heavy_hitter_threshold: f64,
}

impl JoinSpec {
    pub fn two_way(x: &str, y: &str, attr: &str) -> Self {
        Self {
            relations: vec![x.into(), y.into()],
            steps: vec![vec![attr.into()]],
            heavy_hitter_threshold: 1.0,
        }
    }

    /// Checks that every step's attributes exist on both sides of the step.
    pub fn validate(&self, relations: &[Relation]) -> Result<()> {
        if self.relations.len() < 2 || self.steps.len() != self.relations.len() - 1 {
            return Err(Error::Schema("a join needs n relations and n - 1 steps".into()));
        }
        let find = |name: &str| {
            relations
                .iter()
                .find(|r| r.name() == name)
                .ok_or_else(|| Error::Schema(format!("unknown relation `{name}`")))
        };
        let mut seen: BTreeSet<String> = find(&self.relations[0])?.attributes().iter().cloned().collect();
        for (name, step) in self.relations[1..].iter().zip(&self.steps) {
            let rel = find(name)?;
            for a in step {
                if !seen.contains(a) || !rel.has_attribute(a) {
                    return Err(Error::UnknownAttribute {
                        relation: name.clone(),
                        attribute: a.clone(),
                    });
                }
            }
            seen.extend(rel.attributes().iter().cloned());
        }
        Ok(())
    }

    /// Key values of the first step whose combined group size exceeds the threshold.
    pub fn heavy_keys(&self, relations: &[Relation], q: u64, cost: &CostModel) -> Result<Vec<AttributeValue>> {
        self.validate(relations)?;
        let attr = &self.steps[0][0];
        let mut sizes: BTreeMap<&AttributeValue, u64> = BTreeMap::new();
        for name in &self.relations[..2] {
            let rel = relations.iter().find(|r| r.name() == name).expect("validated");
            for t in rel.tuples() {
                *sizes.entry(rel.value(t, attr)?).or_default() += cost.tuple_cost(t);
            }
        }
        let limit = self.heavy_hitter_threshold * q as f64;
        Ok(sizes
            .into_iter()
            .filter(|(_, s)| *s as f64 > limit)
            .map(|(k, _)| k.clone())
            .collect())
    }
}

fn two_way(x: &Relation, y: &Relation, attr: &str, strategy: Strategy) -> Vec<RoundSpec> {
    vec![RoundSpec::join(x.name(), y.name(), &[attr], strategy)]
}

fn pair(x: &Relation, y: &Relation) -> Vec<Relation> {
    vec![x.clone(), y.clone()]
}

/// Two-way join on metadata, one reducer per key. Falls back to
/// [`skew_join_meta`] when a key group does not fit in `q`.
pub fn equijoin_meta(
    x: &Relation,
    y: &Relation,
    attr: &str,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let plan = opts.plan(Mode::Meta, two_way(x, y, attr, Strategy::KeyGroup));
    match run_job(&plan, &pair(x, y), topology, q, opts.seed) {
        Err(Error::OversizedGroup { .. }) => skew_join_meta(x, y, attr, q, topology, opts),
        other => other,
    }
}

/// Two-way join shipping whole tuples.
pub fn equijoin_classic(
    x: &Relation,
    y: &Relation,
    attr: &str,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let plan = opts.plan(Mode::Classic, two_way(x, y, attr, Strategy::KeyGroup));
    match run_job(&plan, &pair(x, y), topology, q, opts.seed) {
        Err(Error::OversizedGroup { .. }) => skew_join_classic(x, y, attr, q, topology, opts),
        other => other,
    }
}

/// Two-way join on metadata where heavy key groups are split into bin pairs.
pub fn skew_join_meta(
    x: &Relation,
    y: &Relation,
    attr: &str,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let plan = opts.plan(Mode::Meta, two_way(x, y, attr, Strategy::Skew));
    run_job(&plan, &pair(x, y), topology, q, opts.seed)
}

pub fn skew_join_classic(
    x: &Relation,
    y: &Relation,
    attr: &str,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let plan = opts.plan(Mode::Classic, two_way(x, y, attr, Strategy::Skew));
    run_job(&plan, &pair(x, y), topology, q, opts.seed)
}

/// Distinct values taken by `attrs` across `relations` (attributes a relation lacks are skipped).
pub fn distinct_key_values(relations: &[&Relation], attrs: &BTreeSet<String>) -> u64 {
    let mut seen: BTreeSet<&AttributeValue> = BTreeSet::new();
    for rel in relations {
        for a in attrs {
            if let Ok(i) = rel.attribute_index(a) {
                seen.extend(rel.tuples().iter().map(|t| &t.values[i]));
            }
        }
    }
    seen.len() as u64
}

fn digester_for(relations: &[&Relation], attrs: &BTreeSet<String>, opts: &JoinOptions) -> Result<HashConfig> {
    let bits = match opts.digest_bits {
        Some(b) => b,
        None => required_digest_bits(distinct_key_values(relations, attrs)),
    };
    HashConfig::new(opts.seed, bits)
}

/// Two-way join with join keys replaced by digests. Collisions surface when
/// the fetched originals are compared and trigger a rehash.
pub fn hashed_join_meta(
    x: &Relation,
    y: &Relation,
    attr: &str,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let cfg = digester_for(&[x, y], &BTreeSet::from([attr.to_string()]), opts)?;
    let plan = opts
        .plan(Mode::Meta, two_way(x, y, attr, Strategy::Skew))
        .with_digester(Some(cfg));
    run_job(&plan, &pair(x, y), topology, q, opts.seed)
}

/// Attributes that occur in more than one relation's schema.
pub fn find_dominating_attrs(relations: &[&Relation]) -> BTreeSet<String> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for rel in relations {
        for a in rel.attributes() {
            *count.entry(a).or_default() += 1;
        }
    }
    count
        .into_iter()
        .filter(|(_, c)| *c > 1)
        .map(|(a, _)| a.to_string())
        .collect()
}

/// Rounds of a left-deep cascade over `relations` in order: each round joins
/// the running result with the next relation on every attribute they share.
pub fn cascade_rounds(relations: &[&Relation], strategy: Strategy) -> Result<Vec<RoundSpec>> {
    if relations.len() < 2 {
        return Err(Error::InvalidParameter("a cascade needs at least two relations".into()));
    }
    let mut seen: BTreeSet<&str> = relations[0].attributes().iter().map(String::as_str).collect();
    let mut rounds = Vec::new();
    for (i, rel) in relations.iter().enumerate().skip(1) {
        let shared: Vec<&str> = rel
            .attributes()
            .iter()
            .map(String::as_str)
            .filter(|a| seen.contains(a))
            .collect();
        if shared.is_empty() {
            return Err(Error::Schema(format!(
                "`{}` shares no attribute with the relations before it",
                rel.name()
            )));
        }
        let left = if i == 1 {
            Source::Relation(relations[0].name().into())
        } else {
            Source::Previous
        };
        rounds.push(RoundSpec::new(left, Source::Relation(rel.name().into()), &shared, strategy));
        seen.extend(rel.attributes().iter().map(String::as_str));
    }
    Ok(rounds)
}

fn ordered<'a>(relations: &'a [Relation], order: Option<&[usize]>) -> Result<Vec<&'a Relation>> {
    match order {
        None => Ok(relations.iter().collect()),
        Some(o) => {
            let mut check = o.to_vec();
            check.sort_unstable();
            if check != (0..relations.len()).collect::<Vec<_>>() {
                return Err(Error::InvalidParameter("join order must be a permutation".into()));
            }
            Ok(o.iter().map(|&i| &relations[i]).collect())
        }
    }
}

/// Multi-way join as a cascade of two-way rounds with dominating attributes
/// digested. Only the final round calls originals.
pub fn multiway_join_meta(
    relations: &[Relation],
    order: Option<&[usize]>,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let rels = ordered(relations, order)?;
    let rounds = cascade_rounds(&rels, Strategy::Skew)?;
    let dominating = find_dominating_attrs(&rels);
    let cfg = digester_for(&rels, &dominating, opts)?;
    let plan = opts.plan(Mode::Meta, rounds).with_digester(Some(cfg));
    run_job(&plan, relations, topology, q, opts.seed)
}

pub fn multiway_join_classic(
    relations: &[Relation],
    order: Option<&[usize]>,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let rels = ordered(relations, order)?;
    let rounds = cascade_rounds(&rels, Strategy::Skew)?;
    run_job(&opts.plan(Mode::Classic, rounds), relations, topology, q, opts.seed)
}

/// Equijoin of every cluster's relations on `attr`: each cluster joins its
/// own relations, the global site joins the partial outputs left to right.
pub fn hierarchical_equijoin(
    clusters: &[(&str, Vec<Relation>)],
    attr: &str,
    mode: Mode,
    q: u64,
    topology: &Topology,
    opts: &JoinOptions,
) -> Result<JobResult> {
    let jobs: Vec<ClusterJob> = clusters
        .iter()
        .map(|(site, rels)| {
            let rounds = if rels.len() < 2 {
                Vec::new()
            } else {
                let refs: Vec<&Relation> = rels.iter().collect();
                let mut rounds = vec![RoundSpec::join(refs[0].name(), refs[1].name(), &[attr], Strategy::Skew)];
                for r in &refs[2..] {
                    rounds.push(RoundSpec::new(
                        Source::Previous,
                        Source::Relation(r.name().into()),
                        &[attr],
                        Strategy::Skew,
                    ));
                }
                rounds
            };
            ClusterJob {
                site: site.to_string(),
                plan: opts.plan(mode, rounds),
                relations: rels.clone(),
            }
        })
        .collect();
    let mut global_rounds = Vec::new();
    if clusters.len() > 1 {
        global_rounds.push(RoundSpec::new(
            Source::Relation(clusters[0].0.into()),
            Source::Relation(clusters[1].0.into()),
            &[attr],
            Strategy::Skew,
        ));
        for (site, _) in &clusters[2..] {
            global_rounds.push(RoundSpec::new(
                Source::Previous,
                Source::Relation(site.to_string()),
                &[attr],
                Strategy::Skew,
            ));
        }
    }
    let mut global = opts.plan(mode, Vec::new());
    global.rounds = global_rounds;
    run_hierarchical(&jobs, &global, topology, q, opts.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(name: &str, attrs: &[&str]) -> Relation {
        Relation::from_rows(name, attrs, "u", Vec::<Vec<&str>>::new()).unwrap()
    }

    #[test]
    fn dominating_attributes_of_four_relations() {
        let rs = [
            rel("U", &["A", "B", "C", "D"]),
            rel("V", &["A", "B", "D", "E"]),
            rel("W", &["D", "E", "F"]),
            rel("X", &["F", "G", "H"]),
        ];
        let refs: Vec<&Relation> = rs.iter().collect();
        let got: Vec<String> = find_dominating_attrs(&refs).into_iter().collect();
        assert_eq!(got, ["A", "B", "D", "E", "F"]);
    }

    #[test]
    fn disjoint_schemas_have_no_dominating_attributes() {
        let rs = [rel("U", &["A"]), rel("V", &["B"])];
        assert!(find_dominating_attrs(&rs.iter().collect::<Vec<_>>()).is_empty());
    }

    #[test]
    fn cascade_of_four_relations_has_three_rounds() {
        let rs = [
            rel("U", &["A", "B", "C", "D"]),
            rel("V", &["A", "B", "D", "E"]),
            rel("W", &["D", "E", "F"]),
            rel("X", &["F", "G", "H"]),
        ];
        let rounds = cascade_rounds(&rs.iter().collect::<Vec<_>>(), Strategy::Skew).unwrap();
        assert_eq!(rounds.len(), 3);
        assert_eq!(rounds[0].join_attrs, ["A", "B", "D"]);
        assert_eq!(rounds[1].join_attrs, ["D", "E"]);
        assert_eq!(rounds[2].join_attrs, ["F"]);
        assert_eq!(rounds[2].left, Source::Previous);
    }

    #[test]
    fn join_spec_rejects_missing_attribute() {
        let rs = [rel("X", &["A", "B"]), rel("Y", &["C"])];
        assert!(JoinSpec::two_way("X", "Y", "B").validate(&rs).is_err());
        let rs = [rel("X", &["A", "B"]), rel("Y", &["B", "C"])];
        assert!(JoinSpec::two_way("X", "Y", "B").validate(&rs).is_ok());
    }
}
