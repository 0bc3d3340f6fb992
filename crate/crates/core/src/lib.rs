//! Curriculum-scheduled training for knowledge-graph embeddings.
//!
//! The difficulty of a training triple (h, r, t) is its Z-count: the number of
//! three-edge support patterns (h,r,e1), (e2,r,e1), (e2,r,t) present in the
//! training graph under the same relation. Training sorts triples by Z-count
//! ascending and grows the visible prefix each epoch through a pacing
//! function, so the model sees easy (low-support) triples first.
//!
//! The crate provides:
//! - [`store`]: TSV ingestion, dictionary encoding, adjacency indexes
//! - [`zcount`]: Z-count computation plus a brute-force oracle
//! - [`curriculum`]: difficulty ordering and pacing functions
//! - [`model`]: TransE (L1/L2), DistMult, ComplEx, RotatE scores and gradients
//! - [`train`]: self-adversarial loss, negative sampling, sparse Adam loop
//! - [`eval`]: filtered ranking (MRR/MR/Hits@N), AUC-PR, rank-vs-Z diagnostics
//! - [`config`] / [`manifest`]: run configuration and reproducibility records

pub mod config;
pub mod curriculum;
pub mod eval;
pub mod manifest;
pub mod model;
pub mod store;
pub mod train;
pub mod zcount;

use std::path::PathBuf;

/// Errors across the toolkit. `exit_code` maps variants onto the CLI's
/// documented exit statuses.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: u32, batch: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit status: 1 usage/config, 2 data, 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. } | Error::Malformed { .. } | Error::Data(_) => 2,
            Error::NonFiniteLoss { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Cap rayon's global pool. First call wins; later calls are ignored, which
/// matches the one-process-per-command CLI model.
pub fn set_workers(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
}

/// splitmix64 finalizer; used to derive independent RNG streams from
/// (seed, purpose, index) without correlated low bits.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
