//! Per-partition shards: local cells, boundary neighbor records and 16-bit
//! tagged adjacency.

use super::{PartitionAssignment, PartitionError};
use crate::geometry::{Site, Vec3};
use crate::scene::Scene;
use rayon::prelude::*;
use std::io::Write;

/// `N_local + N_neighbor` limit; `0xFFFF` stays free for the payload
/// sentinels.
pub const MAX_SHARD_ENTRIES: usize = 65_534;

pub const SHARD_MAGIC: [u8; 4] = *b"FSHD";
const SHARD_VERSION: u32 = 1;

/// A site owned by another partition but adjacent to one of ours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub global_site: u32,
    /// Partition to hand the ray to when it crosses into this cell.
    pub owner_partition: u32,
    pub local_index_in_owner: u32,
    pub position: Vec3,
}

/// Decoded adjacency entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjEntry {
    Local(u16),
    Remote(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionShard {
    pub id: u32,
    /// Global index of each local site, ascending.
    pub global_ids: Vec<u32>,
    pub local_sites: Vec<Site>,
    /// Sorted by global index.
    pub neighbor_records: Vec<NeighborRecord>,
    pub adjacency_offsets: Vec<u32>,
    /// Values below `N_local` are local indices; `N_local + r` is neighbor
    /// record `r`.
    pub adjacency: Vec<u16>,
}

impl PartitionShard {
    pub fn n_local(&self) -> usize {
        self.local_sites.len()
    }

    pub fn n_neighbor(&self) -> usize {
        self.neighbor_records.len()
    }

    pub fn n_adjacency(&self) -> usize {
        self.adjacency.len()
    }

    pub fn raw_neighbors(&self, local: usize) -> &[u16] {
        &self.adjacency[self.adjacency_offsets[local] as usize..self.adjacency_offsets[local + 1] as usize]
    }

    #[inline]
    pub fn decode(&self, raw: u16) -> AdjEntry {
        let n = self.n_local() as u16;
        if raw < n {
            AdjEntry::Local(raw)
        } else {
            AdjEntry::Remote(raw - n)
        }
    }

    #[inline]
    pub fn entry_position(&self, e: AdjEntry) -> Vec3 {
        match e {
            AdjEntry::Local(l) => self.local_sites[l as usize].position,
            AdjEntry::Remote(r) => self.neighbor_records[r as usize].position,
        }
    }

    /// Neighbor positions of a local cell, in adjacency order.
    pub fn neighbor_positions(&self, local: usize, out: &mut Vec<Vec3>) {
        out.clear();
        out.extend(self.raw_neighbors(local).iter().map(|&r| self.entry_position(self.decode(r))));
    }

    /// Partition ids referenced by neighbor records, sorted and deduplicated.
    pub fn neighboring_partitions(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.neighbor_records.iter().map(|r| r.owner_partition).collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

/// Per-partition membership lists and each site's index within its owner.
#[derive(Debug, Clone)]
pub struct ShardIndex {
    pub members: Vec<Vec<u32>>,
    pub local_index: Vec<u32>,
}

impl ShardIndex {
    pub fn new(assignment: &PartitionAssignment) -> Self {
        let mut members = vec![Vec::new(); assignment.partition_count];
        let mut local_index = vec![0u32; assignment.site_to_partition.len()];
        for (i, &p) in assignment.site_to_partition.iter().enumerate() {
            let m = &mut members[p as usize];
            local_index[i] = m.len() as u32;
            m.push(i as u32);
        }
        ShardIndex { members, local_index }
    }
}

pub fn extract_shard(
    scene: &Scene,
    assignment: &PartitionAssignment,
    pid: usize,
) -> Result<PartitionShard, PartitionError> {
    check(scene, assignment)?;
    if pid >= assignment.partition_count {
        return Err(PartitionError::InvalidPartition {
            pid,
            count: assignment.partition_count,
        });
    }
    build(scene, assignment, &ShardIndex::new(assignment), pid)
}

pub fn extract_all_shards(
    scene: &Scene,
    assignment: &PartitionAssignment,
) -> Result<Vec<PartitionShard>, PartitionError> {
    check(scene, assignment)?;
    let index = ShardIndex::new(assignment);
    (0..assignment.partition_count)
        .into_par_iter()
        .map(|pid| build(scene, assignment, &index, pid))
        .collect()
}

fn check(scene: &Scene, assignment: &PartitionAssignment) -> Result<(), PartitionError> {
    if assignment.site_to_partition.len() != scene.len() {
        return Err(PartitionError::SizeMismatch {
            assigned: assignment.site_to_partition.len(),
            sites: scene.len(),
        });
    }
    if let Some(&p) = assignment
        .site_to_partition
        .iter()
        .find(|&&p| p as usize >= assignment.partition_count)
    {
        return Err(PartitionError::InvalidPartition {
            pid: p as usize,
            count: assignment.partition_count,
        });
    }
    Ok(())
}

fn build(
    scene: &Scene,
    assignment: &PartitionAssignment,
    index: &ShardIndex,
    pid: usize,
) -> Result<PartitionShard, PartitionError> {
    let members = &index.members[pid];
    let owner = &assignment.site_to_partition;
    let mut remote: Vec<u32> = members
        .iter()
        .flat_map(|&g| scene.neighbors(g as usize).iter().copied())
        .filter(|&j| owner[j as usize] as usize != pid)
        .collect();
    remote.sort_unstable();
    remote.dedup();
    let entries = members.len() + remote.len();
    if entries > MAX_SHARD_ENTRIES {
        return Err(PartitionError::ShardTooLarge { pid, entries });
    }
    let n_local = members.len() as u16;
    let mut adjacency_offsets = Vec::with_capacity(members.len() + 1);
    adjacency_offsets.push(0u32);
    let mut adjacency = Vec::new();
    for &g in members {
        for &j in scene.neighbors(g as usize) {
            let tagged = if owner[j as usize] as usize == pid {
                index.local_index[j as usize] as u16
            } else {
                n_local + remote.binary_search(&j).expect("collected above") as u16
            };
            adjacency.push(tagged);
        }
        adjacency_offsets.push(adjacency.len() as u32);
    }
    let neighbor_records = remote
        .iter()
        .map(|&j| NeighborRecord {
            global_site: j,
            owner_partition: owner[j as usize],
            local_index_in_owner: index.local_index[j as usize],
            position: scene.sites[j as usize].position,
        })
        .collect();
    Ok(PartitionShard {
        id: pid as u32,
        global_ids: members.clone(),
        local_sites: members.iter().map(|&g| scene.sites[g as usize]).collect(),
        neighbor_records,
        adjacency_offsets,
        adjacency,
    })
}

/// Writes shards in the FSHD sidecar format (see FORMATS.md).
pub fn write_shards(shards: &[PartitionShard], mut w: impl Write) -> std::io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&SHARD_MAGIC);
    buf.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(shards.len() as u32).to_le_bytes());
    for s in shards {
        for v in [s.id, s.n_local() as u32, s.n_neighbor() as u32, s.n_adjacency() as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        s.global_ids.iter().for_each(|g| buf.extend_from_slice(&g.to_le_bytes()));
        for site in &s.local_sites {
            for v in site.position.to_array().into_iter().chain([site.density]).chain(site.color) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for r in &s.neighbor_records {
            for v in [r.global_site, r.owner_partition, r.local_index_in_owner] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            r.position.to_array().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        }
        s.adjacency_offsets.iter().for_each(|o| buf.extend_from_slice(&o.to_le_bytes()));
        s.adjacency.iter().for_each(|a| buf.extend_from_slice(&a.to_le_bytes()));
        if s.adjacency.len() % 2 == 1 {
            buf.extend_from_slice(&[0, 0]);
        }
        w.write_all(&buf)?;
        buf.clear();
    }
    Ok(())
}

pub fn read_shards(bytes: &[u8]) -> std::io::Result<Vec<PartitionShard>> {
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> std::io::Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("shard file truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != SHARD_MAGIC {
        return Err(bad("bad shard magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let f32_at = |b: &[u8]| f32::from_le_bytes(b.try_into().expect("4 bytes"));
    if u32_at(take(4)?) != SHARD_VERSION {
        return Err(bad("unsupported shard version"));
    }
    let count = u32_at(take(4)?) as usize;
    let mut shards = Vec::new();
    for _ in 0..count {
        let h: Vec<u32> = take(16)?.chunks_exact(4).map(u32_at).collect();
        let (id, nl, nn, na) = (h[0], h[1] as usize, h[2] as usize, h[3] as usize);
        let global_ids = take(4 * nl)?.chunks_exact(4).map(u32_at).collect();
        let local_sites = take(28 * nl)?
            .chunks_exact(28)
            .map(|c| {
                let f: Vec<f32> = c.chunks_exact(4).map(f32_at).collect();
                Site {
                    position: Vec3::new(f[0], f[1], f[2]),
                    density: f[3],
                    color: [f[4], f[5], f[6]],
                }
            })
            .collect();
        let neighbor_records = take(24 * nn)?
            .chunks_exact(24)
            .map(|c| NeighborRecord {
                global_site: u32_at(&c[0..4]),
                owner_partition: u32_at(&c[4..8]),
                local_index_in_owner: u32_at(&c[8..12]),
                position: Vec3::new(f32_at(&c[12..16]), f32_at(&c[16..20]), f32_at(&c[20..24])),
            })
            .collect();
        let adjacency_offsets = take(4 * (nl + 1))?.chunks_exact(4).map(u32_at).collect();
        let adjacency = take(2 * na)?
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        if na % 2 == 1 {
            take(2)?;
        }
        shards.push(PartitionShard {
            id,
            global_ids,
            local_sites,
            neighbor_records,
            adjacency_offsets,
            adjacency,
        });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after shards"));
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{generate_scene, AdjacencyOptions, SceneGenSpec};
    use crate::partition::build_kdtree;
    use crate::geometry::Aabb;

    fn two_site_scene() -> Scene {
        let site = |x: f32| Site {
            position: Vec3::new(x, 0.5, 0.5),
            density: 1.0,
            color: [0.5; 3],
        };
        Scene::new(
            vec![site(0.25), site(0.75)],
            vec![0, 1, 2],
            vec![1, 0],
            Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn single_partition_has_no_boundary() {
        let scene = two_site_scene();
        let s = extract_shard(&scene, &PartitionAssignment::single(2), 0).unwrap();
        assert_eq!((s.n_local(), s.n_neighbor(), s.n_adjacency()), (2, 0, 2));
        assert_eq!(s.adjacency, vec![1, 0]);
    }

    #[test]
    fn two_sites_split_one_each() {
        let scene = two_site_scene();
        let positions: Vec<Vec3> = scene.sites.iter().map(|s| s.position).collect();
        let a = build_kdtree(&positions, 1).unwrap();
        for pid in 0..2 {
            let s = extract_shard(&scene, &a, pid).unwrap();
            assert_eq!((s.n_local(), s.n_neighbor(), s.n_adjacency()), (1, 1, 1));
            assert_eq!(s.decode(s.adjacency[0]), AdjEntry::Remote(0));
            let r = s.neighbor_records[0];
            assert_eq!(r.owner_partition as usize, 1 - pid);
            assert_eq!(r.local_index_in_owner, 0);
        }
        assert!(matches!(extract_shard(&scene, &a, 2), Err(PartitionError::InvalidPartition { .. })));
    }

    #[test]
    fn gluing_shards_reconstructs_global_adjacency() {
        let spec = SceneGenSpec::unit_cube(600, 17, [0.0, 2.0]);
        let scene = generate_scene(&spec, &AdjacencyOptions::default()).unwrap();
        let positions: Vec<Vec3> = scene.sites.iter().map(|s| s.position).collect();
        let a = build_kdtree(&positions, 3).unwrap();
        let shards = extract_all_shards(&scene, &a).unwrap();
        let mut rebuilt: Vec<Vec<u32>> = vec![Vec::new(); scene.len()];
        for s in &shards {
            for l in 0..s.n_local() {
                let g = s.global_ids[l];
                for &raw in s.raw_neighbors(l) {
                    let j = match s.decode(raw) {
                        AdjEntry::Local(k) => s.global_ids[k as usize],
                        AdjEntry::Remote(r) => {
                            let rec = s.neighbor_records[r as usize];
                            let owner = &shards[rec.owner_partition as usize];
                            assert_ne!(rec.owner_partition, s.id);
                            assert_eq!(owner.global_ids[rec.local_index_in_owner as usize], rec.global_site);
                            rec.global_site
                        }
                    };
                    rebuilt[g as usize].push(j);
                }
            }
        }
        for (i, r) in rebuilt.iter().enumerate() {
            assert_eq!(r.as_slice(), scene.neighbors(i), "site {i}");
        }
    }

    #[test]
    fn sidecar_roundtrip() {
        let spec = SceneGenSpec::unit_cube(300, 5, [0.0, 2.0]);
        let scene = generate_scene(&spec, &AdjacencyOptions::default()).unwrap();
        let positions: Vec<Vec3> = scene.sites.iter().map(|s| s.position).collect();
        let shards = extract_all_shards(&scene, &build_kdtree(&positions, 2).unwrap()).unwrap();
        let mut bytes = Vec::new();
        write_shards(&shards, &mut bytes).unwrap();
        assert_eq!(bytes.len() % 4, 0);
        assert_eq!(read_shards(&bytes).unwrap(), shards);
        assert!(read_shards(&bytes[..bytes.len() - 2]).is_err());
    }
}
