use super::buffer::RayBuffer;
use super::schedule::OverflowPolicy;
use crate::overlay::{OverlayTopology, PARENT_LANE, ROUTER_LANES};
use crate::payload::{self, PayloadLayout, FINISHED_CELL};

/// Upper bound on simulated worker threads per tile.
pub const MAX_WORKERS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct RouterTile {
    pub inputs: [RayBuffer; ROUTER_LANES],
    pub outputs: [RayBuffer; ROUTER_LANES],
}

impl RouterTile {
    pub fn new(capacity: usize, layout: PayloadLayout) -> Self {
        RouterTile {
            inputs: std::array::from_fn(|_| RayBuffer::new(capacity, layout)),
            outputs: std::array::from_fn(|_| RayBuffer::new(capacity, layout)),
        }
    }

    pub fn occupancy(&self) -> usize {
        self.inputs.iter().chain(&self.outputs).map(RayBuffer::len).sum()
    }
}

/// What a router needs to know to place rays.
#[derive(Debug, Clone, Copy)]
pub struct RouteContext<'a> {
    pub topology: &'a OverlayTopology,
    pub router: usize,
    /// Leaf (tracer) holding each partition.
    pub partition_leaf: &'a [u32],
    pub policy: OverflowPolicy,
    /// Root router only: rays that do not fit a child lane go up to the
    /// generator's spill queue.
    pub spill_to_parent: bool,
}

impl RouteContext<'_> {
    /// Output lane for an encoded ray.
    pub fn lane_of(&self, entry: &[u8]) -> usize {
        self.topology.route(self.router, dest_leaf(entry, self.partition_leaf)).index()
    }
}

/// Leaf a payload is heading for: the framebuffer owner for finished rays,
/// otherwise the tracer holding the destination partition.
#[inline]
pub fn dest_leaf(entry: &[u8], partition_leaf: &[u32]) -> usize {
    let (shard, cell) = payload::peek_dest(entry);
    if cell == FINISHED_CELL {
        shard as usize
    } else {
        partition_leaf[shard as usize] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RouterReport {
    pub forwarded: usize,
    pub spilled: usize,
    pub retained: usize,
    pub dropped: usize,
}

/// Two-pass forwarder. The occupied input entries (lanes 0..5 back to back)
/// are cut into `workers` contiguous chunks. Pass one counts rays per
/// (worker, lane); exclusive prefix sums turn the counts into disjoint write
/// ranges, and pass two copies each ray into its range. Rays past a lane's
/// free space overflow: the root may spill them upward, otherwise they stay
/// in the input (backpressure) or are dropped.
pub fn router_step(tile: &mut RouterTile, ctx: &RouteContext, workers: usize) -> RouterReport {
    let w = workers.clamp(1, MAX_WORKERS);
    let entries: Vec<(usize, usize)> = (0..ROUTER_LANES)
        .flat_map(|l| (0..tile.inputs[l].len()).map(move |i| (l, i)))
        .collect();
    let mut report = RouterReport::default();
    if entries.is_empty() {
        return report;
    }
    let n = entries.len();
    let chunk = |k: usize| (k * n / w, (k + 1) * n / w);

    // Pass 1: per-worker lane counts.
    let mut lanes = vec![0u8; n];
    let mut counts = vec![[0usize; ROUTER_LANES]; w];
    for (k, c) in counts.iter_mut().enumerate() {
        let (a, b) = chunk(k);
        for j in a..b {
            let (l, i) = entries[j];
            let lane = ctx.lane_of(tile.inputs[l].entry(i));
            lanes[j] = lane as u8;
            c[lane] += 1;
        }
    }

    // Exclusive prefix over workers within each lane.
    let mut offsets = vec![[0usize; ROUTER_LANES]; w];
    for lane in 0..ROUTER_LANES {
        let mut acc = 0;
        for k in 0..w {
            offsets[k][lane] = acc;
            acc += counts[k][lane];
        }
    }

    // Pass 2: copy into the reserved ranges.
    let free: [usize; ROUTER_LANES] = std::array::from_fn(|l| tile.outputs[l].free());
    let mut overflow: Vec<usize> = Vec::new();
    for (k, off) in offsets.iter().enumerate() {
        let (a, b) = chunk(k);
        let mut cursor = *off;
        for j in a..b {
            let lane = lanes[j] as usize;
            let (l, i) = entries[j];
            if cursor[lane] < free[lane] {
                let before = tile.outputs[lane].len();
                debug_assert_eq!(before, tile.outputs[lane].capacity() - free[lane] + cursor[lane]);
                let (src, dst) = (&tile.inputs[l], &mut tile.outputs[lane]);
                dst.push(src.entry(i), *src.shadow(i));
                report.forwarded += 1;
            } else {
                overflow.push(j);
            }
            cursor[lane] += 1;
        }
    }

    settle_overflow(tile, ctx, &entries, &overflow, &mut report);
    report
}

fn settle_overflow(
    tile: &mut RouterTile,
    ctx: &RouteContext,
    entries: &[(usize, usize)],
    overflow: &[usize],
    report: &mut RouterReport,
) {
    let mut keep: [Vec<usize>; ROUTER_LANES] = Default::default();
    for &j in overflow {
        let (l, i) = entries[j];
        if ctx.spill_to_parent {
            let (src, dst) = (&tile.inputs[l], &mut tile.outputs[PARENT_LANE]);
            if dst.push(src.entry(i), *src.shadow(i)) {
                report.spilled += 1;
                continue;
            }
        }
        match ctx.policy {
            OverflowPolicy::Backpressure => {
                keep[l].push(i);
                report.retained += 1;
            }
            OverflowPolicy::Drop => report.dropped += 1,
        }
    }
    for (l, k) in keep.iter().enumerate() {
        tile.inputs[l].retain_indices(k);
    }
}

/// Single-threaded reference: walks the inputs in lane order and appends
/// each ray to its lane if there is room.
pub fn serial_router(tile: &mut RouterTile, ctx: &RouteContext) -> RouterReport {
    let mut report = RouterReport::default();
    let mut left: Vec<(usize, usize)> = Vec::new();
    for l in 0..ROUTER_LANES {
        for i in 0..tile.inputs[l].len() {
            let lane = ctx.lane_of(tile.inputs[l].entry(i));
            let (src, dst) = (&tile.inputs[l], &mut tile.outputs[lane]);
            if dst.push(src.entry(i), *src.shadow(i)) {
                report.forwarded += 1;
            } else {
                left.push((l, i));
            }
        }
    }
    let mut keep: [Vec<usize>; ROUTER_LANES] = Default::default();
    for (l, i) in left {
        if ctx.spill_to_parent {
            let (src, dst) = (&tile.inputs[l], &mut tile.outputs[PARENT_LANE]);
            if dst.push(src.entry(i), *src.shadow(i)) {
                report.spilled += 1;
                continue;
            }
        }
        if ctx.policy == OverflowPolicy::Backpressure {
            keep[l].push(i);
            report.retained += 1;
        } else {
            report.dropped += 1;
        }
    }
    for (l, k) in keep.iter().enumerate() {
        tile.inputs[l].retain_indices(k);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::buffer::Shadow;
    use crate::overlay::build_overlay;
    use crate::payload::{encode, CodecDiagnostics, RayState};

    fn ray(px: u16, shard: u16) -> Vec<u8> {
        let s = RayState {
            pixel_x: px,
            dest_shard: shard,
            ..Default::default()
        };
        encode(&s, PayloadLayout::Default, &mut CodecDiagnostics::default())
    }

    #[test]
    fn empty_router_does_nothing() {
        let topo = build_overlay(1).unwrap();
        let map: Vec<u32> = (0..4).collect();
        let mut t = RouterTile::new(4, PayloadLayout::Default);
        let ctx = RouteContext {
            topology: &topo,
            router: topo.root(),
            partition_leaf: &map,
            policy: OverflowPolicy::Backpressure,
            spill_to_parent: false,
        };
        assert_eq!(router_step(&mut t, &ctx, 6), RouterReport::default());
    }

    #[test]
    fn capacity_clamp_retains_the_rest() {
        let topo = build_overlay(1).unwrap();
        let map: Vec<u32> = (0..4).collect();
        let mut t = RouterTile::new(16, PayloadLayout::Default);
        t.outputs = std::array::from_fn(|_| RayBuffer::new(4, PayloadLayout::Default));
        for i in 0..10 {
            t.inputs[PARENT_LANE].push(&ray(i, 2), Shadow::fresh());
        }
        let ctx = RouteContext {
            topology: &topo,
            router: topo.root(),
            partition_leaf: &map,
            policy: OverflowPolicy::Backpressure,
            spill_to_parent: false,
        };
        let r = router_step(&mut t, &ctx, 3);
        assert_eq!((r.forwarded, r.retained), (4, 6));
        assert_eq!(t.outputs[2].len(), 4);
        assert_eq!(t.inputs[PARENT_LANE].len(), 6);
        assert_eq!(payload::peek_pixel(t.inputs[PARENT_LANE].entry(0)).0, 4);
        assert_eq!(t.inputs[PARENT_LANE].scan_valid(), 6);
    }
}
