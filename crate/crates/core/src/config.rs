//! Declarative job files (TOML).
//!
//! ```toml
//! mode = "meta"
//! q = 4096
//! seed = 7
//! unit_cost = false
//!
//! [[relations]]
//! path = "X.tsv"
//!
//! [[rounds]]
//! left = "X"
//! right = "Y"
//! join = ["B"]
//! strategy = "key-group"
//! ```
//!
//! A round side named `@previous` reads the preceding round's output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bound::BoundKind;
use crate::engine::{run_job, JobPlan, JobResult, Mode, RoundSpec, Source, Strategy, Topology, REHASH_LIMIT};
use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::io::read_relation;
use crate::joins::distinct_key_values;
use crate::model::{CostModel, Relation};
use crate::report::{build_report, CostReport, ReportContext};

pub const PREVIOUS: &str = "@previous";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationEntry {
    pub path: PathBuf,
    #[serde(default = "default_site")]
    pub site: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundEntry {
    pub left: String,
    pub right: String,
    pub join: Vec<String>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub q: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub unit_cost: bool,
    #[serde(default = "default_per_tuple")]
    pub unit_per_tuple: u64,
    #[serde(default)]
    pub size_field_bits: u64,
    #[serde(default = "default_rehash_limit")]
    pub rehash_limit: u32,
    #[serde(default)]
    pub co_located: bool,
    #[serde(default)]
    pub parallel: bool,
    /// Digest join keys. Width 0 picks the width for the key count.
    #[serde(default)]
    pub hashed: bool,
    #[serde(default)]
    pub digest_bits: u32,
    pub relations: Vec<RelationEntry>,
    pub rounds: Vec<RoundEntry>,
}

fn default_site() -> String {
    "user".into()
}
fn default_strategy() -> Strategy {
    Strategy::KeyGroup
}
fn default_mode() -> Mode {
    Mode::Meta
}
fn default_per_tuple() -> u64 {
    1
}
fn default_rehash_limit() -> u32 {
    REHASH_LIMIT
}

impl PlanConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn cost(&self) -> CostModel {
        if self.unit_cost {
            CostModel::Units {
                per_tuple: self.unit_per_tuple,
            }
        } else {
            CostModel::Bits {
                size_field_bits: self.size_field_bits,
            }
        }
    }

    /// Reads the relation files, relative to `base`.
    pub fn load_relations(&self, base: &Path) -> Result<Vec<Relation>> {
        self.relations
            .iter()
            .map(|e| read_relation(&base.join(&e.path), &e.site))
            .collect()
    }

    pub fn rounds(&self) -> Vec<RoundSpec> {
        let side = |s: &str| {
            if s == PREVIOUS {
                Source::Previous
            } else {
                Source::Relation(s.to_string())
            }
        };
        self.rounds
            .iter()
            .map(|r| RoundSpec {
                left: side(&r.left),
                right: side(&r.right),
                join_attrs: r.join.clone(),
                strategy: r.strategy,
            })
            .collect()
    }

    pub fn plan(&self, relations: &[Relation]) -> Result<JobPlan> {
        let rounds = self.rounds();
        let digester = if self.hashed {
            if self.mode == Mode::Classic {
                return Err(Error::Config("`hashed` needs meta mode".into()));
            }
            let bits = if self.digest_bits == 0 {
                let attrs = rounds.iter().flat_map(|r| r.join_attrs.iter().cloned()).collect();
                crate::hashing::required_digest_bits(distinct_key_values(
                    &relations.iter().collect::<Vec<_>>(),
                    &attrs,
                ))
            } else {
                self.digest_bits
            };
            Some(HashConfig::new(self.seed, bits)?)
        } else {
            None
        };
        let mut plan = JobPlan::new(self.mode, rounds)
            .with_cost(self.cost())
            .with_co_located(self.co_located)
            .with_parallel(self.parallel)
            .with_digester(digester);
        plan.rehash_limit = self.rehash_limit;
        plan.check()?;
        Ok(plan)
    }

    pub fn topology(&self, relations: &[Relation]) -> Topology {
        Topology::single_site(relations)
    }

    /// The bound a run of this plan is compared with.
    pub fn bound_kind(&self) -> BoundKind {
        let classic = self.mode == Mode::Classic;
        let skewed = self.rounds.iter().any(|r| r.strategy != Strategy::KeyGroup);
        match (self.rounds.len() > 1, self.hashed, skewed, classic) {
            (true, _, _, false) => BoundKind::Multiway,
            (true, _, _, true) => BoundKind::ClassicMultiway,
            (false, true, _, _) => BoundKind::Hashed,
            (false, false, true, false) => BoundKind::Skew,
            (false, false, true, true) => BoundKind::ClassicSkew,
            (false, false, false, false) => BoundKind::TwoWay,
            (false, false, false, true) => BoundKind::ClassicTwoWay,
        }
    }

    /// Loads the relations, runs the job and builds its report. A meta job
    /// is also run in classic mode for the savings line.
    pub fn run(&self, base: &Path) -> Result<(JobResult, CostReport)> {
        let relations = self.load_relations(base)?;
        let topology = self.topology(&relations);
        let plan = self.plan(&relations)?;
        let result = run_job(&plan, &relations, &topology, self.q, self.seed)?;
        let classic_total = match self.mode {
            Mode::Classic => None,
            Mode::Meta => {
                let classic = PlanConfig {
                    mode: Mode::Classic,
                    hashed: false,
                    ..self.clone()
                };
                let plan = classic.plan(&relations)?;
                Some(run_job(&plan, &relations, &topology, self.q, self.seed)?.ledger.total())
            }
        };
        let ctx = ReportContext {
            q: self.q,
            cost: self.cost(),
            bounds: vec![self.bound_kind()],
            classic_total,
        };
        let report = build_report(&result, self.mode, &ctx)?;
        Ok((result, report))
    }
}
