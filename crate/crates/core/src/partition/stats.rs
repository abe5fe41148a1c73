use super::{PartitionAssignment, PartitionShard, TILE_BUDGET};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Modeled bytes per stored item. A local cell is position, density and
/// color (7 x f32); a neighbor is its position plus a packed owner/local id
/// word; an adjacency entry is one tagged u16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintWeights {
    pub local: usize,
    pub neighbor: usize,
    pub adjacency: usize,
}

impl Default for FootprintWeights {
    fn default() -> Self {
        FootprintWeights {
            local: 28,
            neighbor: 16,
            adjacency: 2,
        }
    }
}

impl FootprintWeights {
    pub fn bytes(&self, n_local: usize, n_neighbor: usize, n_adjacency: usize) -> usize {
        n_local * self.local + n_neighbor * self.neighbor + n_adjacency * self.adjacency
    }
}

pub fn estimate_footprint(shard: &PartitionShard, weights: &FootprintWeights) -> usize {
    weights.bytes(shard.n_local(), shard.n_neighbor(), shard.n_adjacency())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub partition: u32,
    pub n_local: usize,
    pub n_neighbor: usize,
    pub n_adjacency: usize,
    pub neighboring_partitions: usize,
    pub footprint_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub method: super::PartitionMethod,
    pub partition_count: usize,
    pub tile_budget: usize,
    pub exceeds_tile_budget: bool,
    pub max_local: usize,
    pub mean_local: f64,
    pub imbalance: f64,
    pub max_footprint_bytes: usize,
    pub rows: Vec<PartitionRow>,
}

/// Per-partition counts. `shards` may be empty when only the assignment is
/// known (octree studies); the shard-derived columns are then zero.
pub fn partition_stats(
    assignment: &PartitionAssignment,
    shards: &[PartitionShard],
    weights: &FootprintWeights,
) -> PartitionStats {
    let sizes = assignment.sizes();
    let rows: Vec<PartitionRow> = sizes
        .iter()
        .enumerate()
        .map(|(p, &n_local)| match shards.get(p) {
            Some(s) => PartitionRow {
                partition: p as u32,
                n_local: s.n_local(),
                n_neighbor: s.n_neighbor(),
                n_adjacency: s.n_adjacency(),
                neighboring_partitions: s.neighboring_partitions().len(),
                footprint_bytes: estimate_footprint(s, weights),
            },
            None => PartitionRow {
                partition: p as u32,
                n_local,
                n_neighbor: 0,
                n_adjacency: 0,
                neighboring_partitions: 0,
                footprint_bytes: weights.bytes(n_local, 0, 0),
            },
        })
        .collect();
    let max_local = sizes.iter().copied().max().unwrap_or(0);
    PartitionStats {
        method: assignment.method,
        partition_count: assignment.partition_count,
        tile_budget: TILE_BUDGET,
        exceeds_tile_budget: assignment.partition_count > TILE_BUDGET,
        max_local,
        mean_local: assignment.site_to_partition.len() as f64 / assignment.partition_count.max(1) as f64,
        imbalance: assignment.imbalance(),
        max_footprint_bytes: rows.iter().map(|r| r.footprint_bytes).max().unwrap_or(0),
        rows,
    }
}

impl PartitionStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("partition,n_local,n_neighbor,n_adjacency,neighboring_partitions,footprint_bytes\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.partition, r.n_local, r.n_neighbor, r.n_adjacency, r.neighboring_partitions, r.footprint_bytes
            );
        }
        s
    }
}
