//! Run configuration, dataset files, result persistence and the pipeline
//! stages the command-line tool drives.

pub mod config;
pub mod dataset_io;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

use crate::clusterers::ClusterError;
use crate::datagen::DatagenError;
use crate::stats::StatsError;
use crate::sweep::SweepError;

pub use config::RunConfig;
pub use dataset_io::{load_corpus, load_dataset, write_dataset};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no dataset files in {}; run `gen` first or check `corpus.dir`", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("{} already holds results; pass --force to replace them", .0.display())]
    WouldOverwrite(PathBuf),
    #[error("`{stage}` results not found at {}", path.display())]
    MissingStage { stage: String, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] dataset_io::DatasetIoError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
