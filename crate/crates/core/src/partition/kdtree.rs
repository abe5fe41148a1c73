use super::{PartitionAssignment, PartitionError, PartitionMethod};
use crate::geometry::{Aabb, Vec3};

/// Balanced k-d tree of the given depth: `2^depth` partitions whose sizes
/// differ by at most one.
///
/// Each node splits its sites at the median along the axis of largest extent
/// (lowest axis on ties); equal coordinates are ordered by site index. The
/// lower half receives `floor(n / 2)` sites. Partition ids follow the in-order
/// leaf sequence, so neighboring ids are spatially close.
pub fn build_kdtree(positions: &[Vec3], depth: u32) -> Result<PartitionAssignment, PartitionError> {
    if depth > 16 {
        return Err(PartitionError::InvalidParameter(format!("k-d depth {depth} exceeds 16")));
    }
    let parts = 1usize << depth;
    if positions.len() < parts {
        return Err(PartitionError::TooFewSites {
            depth,
            needed: parts,
            found: positions.len(),
        });
    }
    let mut order: Vec<u32> = (0..positions.len() as u32).collect();
    let mut site_to_partition = vec![0u32; positions.len()];
    let mut next_leaf = 0u32;
    split(positions, &mut order, depth, &mut next_leaf, &mut site_to_partition);
    Ok(PartitionAssignment {
        method: PartitionMethod::Kdtree { depth },
        site_to_partition,
        partition_count: parts,
    })
}

fn split(positions: &[Vec3], ids: &mut [u32], depth: u32, next_leaf: &mut u32, out: &mut [u32]) {
    if depth == 0 {
        for &i in ids.iter() {
            out[i as usize] = *next_leaf;
        }
        *next_leaf += 1;
        return;
    }
    let bbox = Aabb::from_points(ids.iter().map(|&i| positions[i as usize])).expect("nonempty node");
    let e = bbox.extent();
    let axis = if e.x >= e.y && e.x >= e.z {
        0
    } else if e.y >= e.z {
        1
    } else {
        2
    };
    let mid = ids.len() / 2;
    if mid > 0 {
        ids.select_nth_unstable_by(mid, |&a, &b| {
            let ca = positions[a as usize].axis(axis);
            let cb = positions[b as usize].axis(axis);
            ca.total_cmp(&cb).then(a.cmp(&b))
        });
    }
    let (lo, hi) = ids.split_at_mut(mid);
    split(positions, lo, depth - 1, next_leaf, out);
    split(positions, hi, depth - 1, next_leaf, out);
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
    fn collinear_sites_sort_into_singletons() {
        // Shuffled x coordinates on a line.
        let xs = [5.0, 1.0, 7.0, 0.0, 3.0, 6.0, 2.0, 4.0];
        let pts: Vec<Vec3> = xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
        let a = build_kdtree(&pts, 3).unwrap();
        let expect: Vec<u32> = xs.iter().map(|&x| x as u32).collect();
        assert_eq!(a.site_to_partition, expect);
    }

    #[test]
    fn sizes_differ_by_at_most_one() {
        for (n, d) in [(1000, 4), (1001, 5), (4097, 6), (64, 6)] {
            let a = build_kdtree(&lcg_points(n, n as u64), d).unwrap();
            let sizes = a.sizes();
            assert_eq!(sizes.len(), 1 << d);
            let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(max - min <= 1, "n={n} d={d}: {min}..{max}");
            assert_eq!(*max, n.div_ceil(1 << d));
        }
    }

    #[test]
    fn too_few_sites() {
        assert!(matches!(
            build_kdtree(&lcg_points(7, 1), 3),
            Err(PartitionError::TooFewSites { needed: 8, .. })
        ));
    }

    #[test]
    fn ties_resolved_by_index() {
        let pts = vec![Vec3::new(0.5, 0.0, 0.0); 4];
        let a = build_kdtree(&pts, 2).unwrap();
        assert_eq!(a.site_to_partition, vec![0, 1, 2, 3]);
    }

    #[test]
    fn depth_zero_is_single_partition() {
        let a = build_kdtree(&lcg_points(10, 3), 0).unwrap();
        assert_eq!(a.partition_count, 1);
        assert!(a.site_to_partition.iter().all(|&p| p == 0));
    }
}
