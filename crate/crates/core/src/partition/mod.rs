//! Scene partitioning into tile-sized shards.

mod kdtree;
mod octree;
mod shard;
mod stats;

pub use kdtree::build_kdtree;
pub use octree::{build_octree_cap, build_octree_fixed, OCTREE_MAX_DEPTH};
pub use shard::{
    extract_all_shards, extract_shard, read_shards, write_shards, AdjEntry, NeighborRecord, PartitionShard,
    ShardIndex, MAX_SHARD_ENTRIES, SHARD_MAGIC,
};
pub use stats::{estimate_footprint, partition_stats, FootprintWeights, PartitionRow, PartitionStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tiles available on the modeled chip.
pub const TILE_BUDGET: usize = 1472;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("a depth-{depth} k-d tree needs at least {needed} sites, got {found}")]
    TooFewSites { depth: u32, needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("partition {pid} does not exist ({count} partitions)")]
    InvalidPartition { pid: usize, count: usize },
    #[error("assignment covers {assigned} sites but the scene has {sites}")]
    SizeMismatch { assigned: usize, sites: usize },
    #[error("shard {pid} needs {entries} local+neighbor entries; 16-bit indices allow at most {MAX_SHARD_ENTRIES}")]
    ShardTooLarge { pid: usize, entries: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum PartitionMethod {
    Kdtree { depth: u32 },
    OctreeCap { max_points: usize },
    OctreeFixed { target: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub method: PartitionMethod,
    pub site_to_partition: Vec<u32>,
    pub partition_count: usize,
}

impl PartitionAssignment {
    /// Every site in one partition.
    pub fn single(site_count: usize) -> Self {
        PartitionAssignment {
            method: PartitionMethod::Kdtree { depth: 0 },
            site_to_partition: vec![0; site_count],
            partition_count: 1,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.partition_count];
        for &p in &self.site_to_partition {
            s[p as usize] += 1;
        }
        s
    }

    /// Largest partition size over the mean size.
    pub fn imbalance(&self) -> f64 {
        let sizes = self.sizes();
        let max = sizes.iter().copied().max().unwrap_or(0) as f64;
        let mean = self.site_to_partition.len() as f64 / self.partition_count.max(1) as f64;
        if mean > 0.0 {
            max / mean
        } else {
            0.0
        }
    }
}
