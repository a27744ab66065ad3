//! Synthetic inputs, fixtures of the worked examples, and the k-NN and
//! social-graph workloads.

pub mod fixtures;
pub mod gen;
pub mod graph;
pub mod knn;

pub use gen::{gen_chain, gen_relations, GenSpec, Shape};
pub use graph::{shortest_path_meta, NodeKind, PathResult, SocialGraph};
pub use knn::{gen_points, knn_meta, KnnResult};
