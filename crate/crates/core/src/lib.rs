//! Synthetic-data benchmark for classical clustering algorithms.
//!
//! Datasets with controlled class overlap come from [`datagen`], five
//! clusterers live in [`clusterers`], partitions are scored by [`metrics`],
//! and [`sweep`] measures how accuracy responds to parameter changes.

pub mod clusterers;
pub mod datagen;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod seed;
pub mod stats;
pub mod sweep;
