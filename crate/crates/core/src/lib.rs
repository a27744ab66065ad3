//! Metadata-first MapReduce simulation.
//!
//! Mappers and reducers operate on per-tuple metadata (join-key material plus
//! payload sizes). Reducers that produce output call the original tuples from
//! the sites that own them, and every bit that crosses a site or phase
//! boundary is charged to a [`CostLedger`].
//!
//! The crate covers the join family (two-way, skew, hashed keys, multi-way
//! cascades, hierarchical multi-cluster execution), reducer-capacity mapping
//! schemas, closed-form cost bounds, and k-NN and social-graph workloads.

pub mod bound;
pub mod config;
pub mod engine;
pub mod error;
pub mod hashing;
pub mod io;
pub mod joins;
pub mod ledger;
pub mod model;
pub mod oracle;
pub mod report;
pub mod schema;
pub mod workloads;

pub use bound::{theorem_bound, BoundKind, BoundParams};
pub use engine::{
    call_fetch, run_hierarchical, run_job, run_round, ClusterJob, JobPlan, JobResult, Mode,
    OutputTuple, RoundSpec, RunStats, Source, Strategy, Topology,
};
pub use error::{Error, Result};
pub use hashing::{digest, rehash, required_digest_bits, Digest, HashConfig};
pub use ledger::{Channel, CostLedger, Payload};
pub use model::{
    build_index, make_meta, tuple_size_bits, AttributeValue, CostModel, KeyMaterial, MetaRecord,
    Origin, Relation, Site, SiteId, SiteKind, Tuple, TupleId, UserIndex,
};
pub use report::{emit_report, CostReport};
pub use schema::{
    bin_pack_assign, key_group_assign, skew_assign, validate_schema, InputId, MappingSchema,
    ReducerSpec, ValidityReport,
};
