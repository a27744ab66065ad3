//! Multi-round, multi-site job execution.
//!
//! A job is a sequence of two-input rounds. Each round maps its inputs to a
//! partition key, assigns them to capacity-bounded reducers, and joins on the
//! round's attributes. In meta mode the rows moving through the pipeline hold
//! only metadata; the final round's reducers call the originals of the tuples
//! that made it into an output.

mod exec;
mod fetch;
mod hierarchical;
mod job;
mod round;
mod row;
mod topology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::ledger::CostLedger;
use crate::model::{AttributeValue, CostModel, Origin};

pub use fetch::{call_fetch, Fetched, ReducerDecision, UserStore};
pub use hierarchical::{run_hierarchical, ClusterJob};
pub use job::run_job;
pub use round::{run_round, ReducerOutput, RoundOutput};
pub use topology::Topology;

pub const REHASH_LIMIT: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classic,
    Meta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// A base relation by name. In a global plan, a cluster's partial output by site id.
    Relation(String),
    /// The output of the preceding round.
    Previous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One reducer per key. A key group larger than `q` is an error.
    KeyGroup,
    /// Key groups larger than `q` are split into bin pairs.
    Skew,
    /// Every pair of inputs meets in some reducer regardless of key.
    BinPack,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSpec {
    pub left: Source,
    pub right: Source,
    pub join_attrs: Vec<String>,
    pub strategy: Strategy,
}

impl RoundSpec {
    pub fn new(left: Source, right: Source, join_attrs: &[&str], strategy: Strategy) -> Self {
        Self {
            left,
            right,
            join_attrs: join_attrs.iter().map(|s| s.to_string()).collect(),
            strategy,
        }
    }

    /// Two named relations joined on `attrs`.
    pub fn join(left: &str, right: &str, attrs: &[&str], strategy: Strategy) -> Self {
        Self::new(
            Source::Relation(left.into()),
            Source::Relation(right.into()),
            attrs,
            strategy,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobPlan {
    pub mode: Mode,
    pub rounds: Vec<RoundSpec>,
    /// Data already sits at the mappers, so nothing is uploaded.
    pub co_located: bool,
    pub digester: Option<HashConfig>,
    pub cost: CostModel,
    pub rehash_limit: u32,
    pub parallel: bool,
}

impl JobPlan {
    pub fn new(mode: Mode, rounds: Vec<RoundSpec>) -> Self {
        Self {
            mode,
            rounds,
            co_located: false,
            digester: None,
            cost: CostModel::default(),
            rehash_limit: REHASH_LIMIT,
            parallel: false,
        }
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_co_located(mut self, co_located: bool) -> Self {
        self.co_located = co_located;
        self
    }

    pub fn with_digester(mut self, digester: Option<HashConfig>) -> Self {
        self.digester = digester;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.rounds.is_empty() {
            return Err(Error::InvalidParameter("a plan needs at least one round".into()));
        }
        if self.digester.is_some() && self.mode == Mode::Classic {
            return Err(Error::InvalidParameter(
                "digested keys only apply to meta mode".into(),
            ));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.join_attrs.is_empty() {
                return Err(Error::Schema(format!("round {} has no join attributes", i + 1)));
            }
            if i == 0 && (r.left == Source::Previous || r.right == Source::Previous) {
                return Err(Error::Schema("the first round has no previous output".into()));
            }
        }
        Ok(())
    }
}

/// One joined result: the contributing tuples, left to right, and the values
/// of the result schema.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputTuple {
    pub origins: Vec<Origin>,
    pub values: Vec<AttributeValue>,
}

/// Parameters measured from a run, in the cost model's units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Largest relation.
    pub n: u64,
    /// Number of input relations.
    pub k: u64,
    /// Most key attributes in one relation.
    pub p: u64,
    /// Distinct key values across all relations.
    pub m: u64,
    /// Largest metadata record.
    pub c: u64,
    /// Largest tuple.
    pub w: u64,
    /// Distinct tuples appearing in some output.
    pub h: u64,
    /// Map-to-reduce deliveries of output tuples, counted per (round, reducer).
    pub deliveries: u64,
    /// `deliveries / h`.
    pub replication: f64,
    /// Reducer assignments per reducer input, over all rounds.
    pub schema_replication: f64,
    pub reducers: u64,
    pub outputs: u64,
    pub digest_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub attributes: Vec<String>,
    pub outputs: Vec<OutputTuple>,
    pub ledger: CostLedger,
    /// Ledgers of attempts abandoned after a digest collision.
    pub discarded: Vec<CostLedger>,
    pub rounds_executed: usize,
    pub rehash_count: u32,
    pub stats: RunStats,
    pub final_digester: Option<HashConfig>,
    /// Distinct tuples called by reducers, sorted.
    pub fetched: Vec<Origin>,
}

impl JobResult {
    /// Outputs in canonical order, for comparisons.
    pub fn sorted_outputs(&self) -> Vec<OutputTuple> {
        let mut out = self.outputs.clone();
        out.sort();
        out
    }

    /// Distinct tuples appearing in at least one output, sorted.
    pub fn participating(&self) -> Vec<Origin> {
        let mut all: Vec<Origin> = self.outputs.iter().flat_map(|o| o.origins.clone()).collect();
        all.sort();
        all.dedup();
        all
    }
}
