//! Quadtree routing overlay: tile roles, routing decisions, hop distances and
//! screen-space framebuffer slices.
//!
//! Tile ids: tracers are `0..4^L` (tracer id = leaf index), routers follow in
//! breadth-first order starting with the root at `4^L`, and the single
//! generator comes last. The generator is the root router's parent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Router lane toward the parent; lanes `0..4` are the children.
pub const PARENT_LANE: usize = 4;
pub const ROUTER_LANES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlayError {
    #[error("overlay needs at least one level")]
    NoLevels,
    #[error("{0} levels exceed the supported maximum of 8")]
    TooManyLevels(u32),
    #[error("tile {0} is not a router")]
    NotARouter(usize),
    #[error("leaf {leaf} out of range (leaf count {count})")]
    LeafOutOfRange { leaf: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Tracer,
    Router,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lane {
    Child(u8),
    Parent,
}

impl Lane {
    pub fn index(self) -> usize {
        match self {
            Lane::Child(c) => c as usize,
            Lane::Parent => PARENT_LANE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayNode {
    pub tile: u32,
    pub role: Role,
    /// Depth below the root router; tracers sit at depth `L`, the generator
    /// at -1.
    pub depth: i32,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    pub leaf_lo: u32,
    pub leaf_hi: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayTopology {
    pub levels: u32,
    pub leaf_count: usize,
    pub router_count: usize,
    pub nodes: Vec<OverlayNode>,
}

impl OverlayTopology {
    pub fn new(levels: u32) -> Result<Self, OverlayError> {
        build_overlay(levels)
    }

    pub fn tile_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.leaf_count
    }

    pub fn generator(&self) -> usize {
        self.leaf_count + self.router_count
    }

    pub fn d_max(&self) -> u32 {
        2 * self.levels
    }

    pub fn role(&self, tile: usize) -> Role {
        self.nodes[tile].role
    }

    pub fn is_router(&self, tile: usize) -> bool {
        tile >= self.leaf_count && tile < self.leaf_count + self.router_count
    }

    /// Lane of a router that leads toward `dest_leaf`.
    pub fn route_decision(&self, router: usize, dest_leaf: usize) -> Result<Lane, OverlayError> {
        if !self.is_router(router) {
            return Err(OverlayError::NotARouter(router));
        }
        if dest_leaf >= self.leaf_count {
            return Err(OverlayError::LeafOutOfRange {
                leaf: dest_leaf,
                count: self.leaf_count,
            });
        }
        Ok(self.route(router, dest_leaf))
    }

    /// Unchecked [`Self::route_decision`].
    #[inline]
    pub fn route(&self, router: usize, dest_leaf: usize) -> Lane {
        let n = &self.nodes[router];
        let (lo, hi) = (n.leaf_lo as usize, n.leaf_hi as usize);
        if dest_leaf < lo || dest_leaf >= hi {
            return Lane::Parent;
        }
        let span = (hi - lo) / 4;
        Lane::Child(((dest_leaf - lo) / span) as u8)
    }

    /// Tile reached through `lane` of `tile`. Tracers and the generator have a
    /// single lane 0.
    pub fn lane_target(&self, tile: usize, lane: usize) -> Option<usize> {
        let n = &self.nodes[tile];
        match n.role {
            Role::Router if lane == PARENT_LANE => n.parent.map(|p| p as usize),
            Role::Router => n.children.get(lane).map(|&c| c as usize),
            Role::Tracer if lane == 0 => n.parent.map(|p| p as usize),
            Role::Generator if lane == 0 => n.children.first().map(|&c| c as usize),
            _ => None,
        }
    }

    /// Number of output lanes of a tile.
    pub fn lane_count(&self, tile: usize) -> usize {
        match self.nodes[tile].role {
            Role::Router => ROUTER_LANES,
            Role::Tracer | Role::Generator => 1,
        }
    }

    /// Input lane of `to` on which traffic from `from` arrives.
    pub fn arrival_lane(&self, from: usize, to: usize) -> usize {
        let n = &self.nodes[to];
        match n.role {
            Role::Router if n.parent == Some(from as u32) => PARENT_LANE,
            Role::Router => n.children.iter().position(|&c| c as usize == from).expect("linked tiles"),
            Role::Tracer | Role::Generator => 0,
        }
    }

    /// Edges on the overlay path between two leaves.
    pub fn hop_distance(&self, a: usize, b: usize) -> u32 {
        2 * (self.levels - self.common_depth(a, b))
    }

    /// Depth of the lowest common ancestor of two leaves.
    pub fn common_depth(&self, a: usize, b: usize) -> u32 {
        let mut d = self.levels;
        let (mut x, mut y) = (a, b);
        while x != y {
            x /= 4;
            y /= 4;
            d -= 1;
        }
        d
    }
}

pub fn build_overlay(levels: u32) -> Result<OverlayTopology, OverlayError> {
    if levels == 0 {
        return Err(OverlayError::NoLevels);
    }
    if levels > 8 {
        return Err(OverlayError::TooManyLevels(levels));
    }
    let leaf_count = 4usize.pow(levels);
    let router_count = (leaf_count - 1) / 3;
    let generator = leaf_count + router_count;
    let mut nodes = Vec::with_capacity(generator + 1);
    // Routers at depth k occupy breadth-first indices level_start(k)..level_start(k+1).
    let level_start = |k: u32| (4usize.pow(k) - 1) / 3;
    let router_tile = |k: u32, q: usize| (leaf_count + level_start(k) + q) as u32;
    for leaf in 0..leaf_count {
        nodes.push(OverlayNode {
            tile: leaf as u32,
            role: Role::Tracer,
            depth: levels as i32,
            parent: Some(router_tile(levels - 1, leaf / 4)),
            children: Vec::new(),
            leaf_lo: leaf as u32,
            leaf_hi: leaf as u32 + 1,
        });
    }
    for k in 0..levels {
        let span = 4usize.pow(levels - k);
        for q in 0..4usize.pow(k) {
            let children = (0..4)
                .map(|c| {
                    if k + 1 == levels {
                        (4 * q + c) as u32
                    } else {
                        router_tile(k + 1, 4 * q + c)
                    }
                })
                .collect();
            nodes.push(OverlayNode {
                tile: router_tile(k, q),
                role: Role::Router,
                depth: k as i32,
                parent: Some(if k == 0 { generator as u32 } else { router_tile(k - 1, q / 4) }),
                children,
                leaf_lo: (q * span) as u32,
                leaf_hi: ((q + 1) * span) as u32,
            });
        }
    }
    nodes.push(OverlayNode {
        tile: generator as u32,
        role: Role::Generator,
        depth: -1,
        parent: None,
        children: vec![leaf_count as u32],
        leaf_lo: 0,
        leaf_hi: leaf_count as u32,
    });
    Ok(OverlayTopology {
        levels,
        leaf_count,
        router_count,
        nodes,
    })
}

/// Contiguous row-major pixel ranges, one per tracer. The first
/// `(W*H) mod n` tracers get one extra pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramebufferSliceMap {
    pub width: u32,
    pub height: u32,
    pub leaf_count: usize,
}

pub fn assign_framebuffer_slices(width: u32, height: u32, leaf_count: usize) -> FramebufferSliceMap {
    FramebufferSliceMap {
        width,
        height,
        leaf_count: leaf_count.max(1),
    }
}

impl FramebufferSliceMap {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    fn split(&self) -> (usize, usize) {
        let n = self.pixel_count();
        (n / self.leaf_count, n % self.leaf_count)
    }

    /// Pixel range `[start, end)` owned by `tracer`.
    pub fn slice(&self, tracer: usize) -> (usize, usize) {
        let (q, r) = self.split();
        let start = tracer * q + tracer.min(r);
        let len = q + usize::from(tracer < r);
        (start, start + len)
    }

    pub fn max_slice_len(&self) -> usize {
        self.pixel_count().div_ceil(self.leaf_count)
    }

    /// Tracer owning row-major pixel index `p`.
    pub fn owner(&self, p: usize) -> usize {
        let (q, r) = self.split();
        let big = r * (q + 1);
        if p < big {
            p / (q + 1)
        } else {
            r + (p - big) / q
        }
    }

    pub fn owner_of(&self, x: u32, y: u32) -> usize {
        self.owner(y as usize * self.width as usize + x as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_tree() {
        let t = build_overlay(1).unwrap();
        assert_eq!((t.leaf_count, t.router_count, t.tile_count()), (4, 1, 6));
        assert_eq!(t.role(4), Role::Router);
        assert_eq!(t.role(5), Role::Generator);
        assert_eq!(t.nodes[4].children, vec![0, 1, 2, 3]);
        assert_eq!(t.lane_target(4, PARENT_LANE), Some(5));
        assert_eq!(t.lane_target(5, 0), Some(4));
    }

    #[test]
    fn five_levels_fit_the_chip() {
        let t = build_overlay(5).unwrap();
        assert_eq!((t.leaf_count, t.router_count), (1024, 341));
        assert_eq!(t.d_max(), 10);
        assert!(t.tile_count() <= 1472);
        for l in 1..=5 {
            assert!(build_overlay(l).unwrap().tile_count() <= 1472);
        }
    }

    #[test]
    fn every_leaf_is_at_depth_l() {
        let t = build_overlay(3).unwrap();
        for leaf in 0..t.leaf_count {
            let mut d = 0;
            let mut n = leaf;
            while t.nodes[n].role != Role::Generator {
                n = t.nodes[n].parent.unwrap() as usize;
                d += 1;
            }
            // Leaf to root is L edges, plus one to the generator.
            assert_eq!(d, 3 + 1);
        }
    }

    #[test]
    fn sibling_ranges_partition_parent() {
        let t = build_overlay(3).unwrap();
        for n in t.nodes.iter().filter(|n| n.role == Role::Router) {
            let mut lo = n.leaf_lo;
            for &c in &n.children {
                let c = &t.nodes[c as usize];
                assert_eq!(c.leaf_lo, lo);
                assert_eq!(c.parent, Some(n.tile));
                lo = c.leaf_hi;
            }
            assert_eq!(lo, n.leaf_hi);
        }
    }

    #[test]
    fn routing_decisions() {
        let t = build_overlay(2).unwrap();
        let root = t.root();
        for dest in 0..16 {
            assert!(matches!(t.route_decision(root, dest).unwrap(), Lane::Child(_)));
        }
        // Router covering leaves [4, 8) is the second depth-1 router.
        let r = t.nodes.iter().position(|n| n.role == Role::Router && n.leaf_lo == 4 && n.leaf_hi == 8).unwrap();
        assert_eq!(t.route_decision(r, 2).unwrap(), Lane::Parent);
        assert_eq!(t.route_decision(r, 6).unwrap(), Lane::Child(2));
        assert!(t.route_decision(0, 1).is_err());
    }

    /// Walks from leaf `a` to leaf `b` by routing decisions.
    fn walk(t: &OverlayTopology, a: usize, b: usize) -> u32 {
        let mut tile = t.nodes[a].parent.unwrap() as usize;
        let mut hops = 1;
        while tile != b {
            let lane = t.route(tile, b);
            tile = t.lane_target(tile, lane.index()).unwrap();
            hops += 1;
            assert!(hops <= t.d_max());
        }
        hops
    }

    #[test]
    fn path_following_matches_hop_distance() {
        let t = build_overlay(3).unwrap();
        let mut s = 12345u64;
        for _ in 0..500 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let a = (s >> 33) as usize % t.leaf_count;
            let b = (s >> 13) as usize % t.leaf_count;
            if a == b {
                assert_eq!(t.hop_distance(a, b), 0);
                continue;
            }
            assert_eq!(walk(&t, a, b), t.hop_distance(a, b));
        }
    }

    #[test]
    fn hop_distance_examples() {
        let t = build_overlay(5).unwrap();
        assert_eq!(t.hop_distance(7, 7), 0);
        assert_eq!(t.hop_distance(4, 5), 2);
        assert_eq!(t.hop_distance(0, 1023), 10);
    }

    #[test]
    fn vga_over_1024_tracers() {
        let m = assign_framebuffer_slices(640, 480, 1024);
        for tr in 0..1024 {
            let (a, b) = m.slice(tr);
            assert_eq!(b - a, 300);
        }
    }

    #[test]
    fn small_image_leaves_empty_slices() {
        let m = assign_framebuffer_slices(3, 2, 16);
        assert_eq!(m.slice(5), (5, 6));
        assert_eq!(m.slice(6), (6, 6));
        assert_eq!(m.slice(15), (6, 6));
        assert_eq!((0..6).map(|p| m.owner(p)).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn owner_is_inverse_of_slices() {
        for (w, h, n) in [(64, 48, 64), (17, 5, 16), (7, 3, 4), (640, 480, 1024)] {
            let m = assign_framebuffer_slices(w, h, n);
            let mut covered = 0;
            for tr in 0..n {
                let (a, b) = m.slice(tr);
                assert_eq!(a, covered);
                assert!(b - a <= m.max_slice_len());
                for p in a..b {
                    assert_eq!(m.owner(p), tr);
                }
                covered = b;
            }
            assert_eq!(covered, m.pixel_count());
        }
    }
}
