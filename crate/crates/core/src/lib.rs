//! Collaborative dictionary learning: K-SVD run jointly by sites of a network
//! that exchange only consensus messages, never raw samples.
//!
//! The pieces build on each other:
//!
//! - [`linalg`], [`dictionary`] and [`coding`] provide dense kernels, unit-norm
//!   dictionaries and OMP / lasso sparse coding.
//! - [`ksvd`] is the centralized learner and its per-atom update.
//! - [`network`] simulates topologies, local-degree weights and gossip.
//! - [`cloud`] runs the distributed power method and cloud K-SVD on top.
//! - [`diagnostics`] measures errors and evaluates the analysis constants.
//! - [`data`], [`mnist`] and [`classify`] support the experiments.

pub mod classify;
pub mod cloud;
pub mod coding;
pub mod data;
pub mod diagnostics;
pub mod dictionary;
pub mod error;
pub mod ksvd;
pub mod linalg;
pub mod mnist;
pub mod network;
pub mod rng;

pub use classify::{classify_min_residue, MinResidueClassifier};
pub use cloud::{
    cloud_ksvd, cloud_ksvd_run, distributed_power_method, CloudConfig, CloudTrace, SiteState,
};
pub use coding::{omp_encode, CodingConfig, SparseCode, SparseCodeMatrix, SparseCoder};
pub use data::{gen_synthetic_sites, SyntheticConfig, SyntheticData};
pub use dictionary::{init_dictionary, Dictionary};
pub use error::{Error, Result};
pub use ksvd::{run_ksvd, AtomSolver, KsvdConfig, LearnTrace, UnusedAtomRule};
pub use linalg::Mat;
pub use network::{gen_erdos_renyi_connected, local_degree_weights, Topology, WeightMatrix};
pub use rng::{stream_rng, Stream};
