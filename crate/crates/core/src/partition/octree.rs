use super::{PartitionAssignment, PartitionError, PartitionMethod};
use crate::geometry::Vec3;
use std::collections::BinaryHeap;

/// Nodes at this depth are never split further.
pub const OCTREE_MAX_DEPTH: u32 = 40;

struct Node {
    center: [f64; 3],
    half: f64,
    depth: u32,
    ids: Vec<u32>,
    children: Option<Vec<usize>>,
}

struct Octree<'a> {
    positions: &'a [Vec3],
    nodes: Vec<Node>,
}

impl<'a> Octree<'a> {
    /// Root cube: the site bounding box grown to its largest extent.
    fn new(positions: &'a [Vec3]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in positions {
            for a in 0..3 {
                lo[a] = lo[a].min(p.axis(a) as f64);
                hi[a] = hi[a].max(p.axis(a) as f64);
            }
        }
        if positions.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let half = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max) * 0.5;
        let root = Node {
            center: [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a])),
            half: half.max(f64::MIN_POSITIVE),
            depth: 0,
            ids: (0..positions.len() as u32).collect(),
            children: None,
        };
        Octree {
            positions,
            nodes: vec![root],
        }
    }

    fn splittable(&self, n: usize) -> bool {
        let node = &self.nodes[n];
        node.children.is_none() && node.depth < OCTREE_MAX_DEPTH && node.ids.len() > 1
    }

    /// Splits node `n` into its non-empty octants (bit 0: x, 1: y, 2: z at or
    /// above the center). Returns the number of children created.
    fn split(&mut self, n: usize) -> usize {
        let ids = std::mem::take(&mut self.nodes[n].ids);
        let (c, h, depth) = (self.nodes[n].center, self.nodes[n].half, self.nodes[n].depth);
        let mut buckets: [Vec<u32>; 8] = Default::default();
        for i in ids {
            let p = self.positions[i as usize];
            let oct = (0..3).fold(0, |acc, a| acc | (((p.axis(a) as f64 >= c[a]) as usize) << a));
            buckets[oct].push(i);
        }
        let mut children = Vec::new();
        for (oct, b) in buckets.into_iter().enumerate() {
            if b.is_empty() {
                continue;
            }
            let center = [0, 1, 2].map(|a| c[a] + if oct >> a & 1 == 1 { 0.5 * h } else { -0.5 * h });
            self.nodes.push(Node {
                center,
                half: 0.5 * h,
                depth: depth + 1,
                ids: b,
                children: None,
            });
            children.push(self.nodes.len() - 1);
        }
        let count = children.len();
        self.nodes[n].children = Some(children);
        count
    }

    /// Leaves in depth-first octant order become partitions 0, 1, ...
    fn assign(self, method: PartitionMethod) -> PartitionAssignment {
        let mut site_to_partition = vec![0u32; self.positions.len()];
        let mut next = 0u32;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].children {
                Some(ch) => stack.extend(ch.iter().rev()),
                None => {
                    for &i in &self.nodes[n].ids {
                        site_to_partition[i as usize] = next;
                    }
                    next += 1;
                }
            }
        }
        PartitionAssignment {
            method,
            site_to_partition,
            partition_count: next as usize,
        }
    }
}

/// Recursively splits every octant holding more than `max_points` sites.
/// Empty octants are discarded rather than counted as partitions.
pub fn build_octree_cap(positions: &[Vec3], max_points: usize) -> Result<PartitionAssignment, PartitionError> {
    if max_points == 0 {
        return Err(PartitionError::InvalidParameter("octree cap must be at least 1".into()));
    }
    let mut tree = Octree::new(positions);
    let mut work = vec![0usize];
    while let Some(n) = work.pop() {
        if tree.nodes[n].ids.len() > max_points && tree.splittable(n) {
            tree.split(n);
            work.extend(tree.nodes[n].children.clone().expect("just split"));
        }
    }
    Ok(tree.assign(PartitionMethod::OctreeCap { max_points }))
}

/// Repeatedly splits the most populated leaf (oldest node on ties) while the
/// leaf count stays within `target`. Ends with at most `target` partitions;
/// exactly `target` when every split produces eight non-empty children and
/// `target - 1` is a multiple of seven.
pub fn build_octree_fixed(positions: &[Vec3], target: usize) -> Result<PartitionAssignment, PartitionError> {
    if target == 0 {
        return Err(PartitionError::InvalidParameter("octree target must be at least 1".into()));
    }
    let mut tree = Octree::new(positions);
    let mut heap = BinaryHeap::new();
    heap.push((tree.nodes[0].ids.len(), std::cmp::Reverse(0usize)));
    let mut leaves = 1usize;
    while let Some((count, std::cmp::Reverse(n))) = heap.pop() {
        if count <= 1 || !tree.splittable(n) {
            continue;
        }
        let nonempty = occupied_octants(&tree, n);
        if leaves + nonempty - 1 > target {
            break;
        }
        tree.split(n);
        leaves += nonempty - 1;
        for &c in tree.nodes[n].children.as_ref().expect("just split") {
            heap.push((tree.nodes[c].ids.len(), std::cmp::Reverse(c)));
        }
    }
    Ok(tree.assign(PartitionMethod::OctreeFixed { target }))
}

fn occupied_octants(tree: &Octree, n: usize) -> usize {
    let c = tree.nodes[n].center;
    let mut seen = 0u8;
    for &i in &tree.nodes[n].ids {
        let p = tree.positions[i as usize];
        let oct = (0..3).fold(0, |acc, a| acc | (((p.axis(a) as f64 >= c[a]) as u8) << a));
        seen |= 1 << oct;
        if seen == 0xff {
            break;
        }
    }
    seen.count_ones() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 40) as f32 / (1u64 << 24) as f32
        };
        (0..n).map(|_| Vec3::new(next(), next(), next())).collect()
    }

    #[test]
    fn cap_is_enforced() {
        let pts = lcg_points(40_000, 1);
        let a = build_octree_cap(&pts, 5000).unwrap();
        assert!(a.partition_count > 8);
        assert!(a.sizes().iter().all(|&s| s > 0 && s <= 5000));
    }

    #[test]
    fn tight_cluster_forces_depth() {
        // 500 points packed in a 1e-4 cube next to 10 far away points.
        let mut pts: Vec<Vec3> = lcg_points(500, 2).into_iter().map(|p| p * 1e-4).collect();
        pts.extend(lcg_points(10, 3).into_iter().map(|p| p + Vec3::new(1.0, 1.0, 1.0)));
        let a = build_octree_cap(&pts, 50).unwrap();
        assert!(a.sizes().iter().all(|&s| s <= 50));
        assert!(a.partition_count >= 10);
    }

    #[test]
    fn fixed_uniform_is_near_equal() {
        let pts = lcg_points(64_000, 4);
        let a = build_octree_fixed(&pts, 64).unwrap();
        assert_eq!(a.partition_count, 64);
        assert!(a.imbalance() < 1.3, "imbalance {}", a.imbalance());
    }

    #[test]
    fn fixed_target_one_is_everything() {
        let pts = lcg_points(100, 5);
        let a = build_octree_fixed(&pts, 1).unwrap();
        assert_eq!(a.partition_count, 1);
        assert!(a.site_to_partition.iter().all(|&p| p == 0));
    }

    #[test]
    fn fixed_never_exceeds_target() {
        let pts = lcg_points(5000, 6);
        for target in [2, 9, 20, 100] {
            let a = build_octree_fixed(&pts, target).unwrap();
            assert!(a.partition_count <= target);
            assert_eq!(a.sizes().iter().sum::<usize>(), 5000);
        }
    }
}
