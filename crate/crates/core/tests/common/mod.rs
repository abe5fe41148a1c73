#![allow(dead_code)]

use foamsim::forge::{generate_scene, AdjacencyOptions, SceneGenSpec};
use foamsim::{Camera, Scene, Vec3};

pub fn scene(n: usize, seed: u64) -> Scene {
    generate_scene(&SceneGenSpec::unit_cube(n, seed, [0.0, 6.0]), &AdjacencyOptions::default()).unwrap()
}

/// Camera just inside the cube looking across it.
pub fn camera(w: u32, h: u32) -> Camera {
    Camera::looking(
        Vec3::new(0.5, 0.45, 0.03),
        Vec3::new(0.05, 0.1, 1.0),
        Vec3::new(0.0, -1.0, 0.0),
        w,
        h,
        70.0,
    )
}

/// Same frame size, different pose.
pub fn other_camera(w: u32, h: u32) -> Camera {
    Camera::looking(
        Vec3::new(0.93, 0.5, 0.5),
        Vec3::new(-1.0, 0.05, 0.1),
        Vec3::new(0.0, -1.0, 0.0),
        w,
        h,
        60.0,
    )
}

use foamsim::engine::{OverflowPolicy, RayBuffer, RouterTile, Shadow};
use foamsim::forge::SceneRng;
use foamsim::overlay::{build_overlay, OverlayTopology, ROUTER_LANES};
use foamsim::payload::{encode, CodecDiagnostics, PayloadLayout, RayState, FINISHED_CELL};

/// A router somewhere in a random overlay with partly filled lanes.
pub struct RouterCase {
    pub topology: OverlayTopology,
    pub router: usize,
    pub partition_leaf: Vec<u32>,
    pub policy: OverflowPolicy,
    pub spill_to_parent: bool,
    pub tile: RouterTile,
}

pub fn router_case(seed: u64) -> RouterCase {
    let mut rng = SceneRng::new(seed);
    let mut below = |n: u64| rng.next_u64() % n;
    let levels = 1 + below(3) as u32;
    let topology = build_overlay(levels).unwrap();
    let router = topology.root() + below(topology.router_count as u64) as usize;
    let partitions = 1 + below(3 * topology.leaf_count as u64) as usize;
    let partition_leaf: Vec<u32> = (0..partitions).map(|_| below(topology.leaf_count as u64) as u32).collect();
    let policy = if below(2) == 0 { OverflowPolicy::Backpressure } else { OverflowPolicy::Drop };
    let spill_to_parent = router == topology.root() && below(2) == 0;
    let layout = PayloadLayout::ALL[below(3) as usize];
    let cap = 1 + below(24) as usize;
    let mut tile = RouterTile::new(cap, layout);
    let mut diag = CodecDiagnostics::default();
    for lane in 0..ROUTER_LANES {
        for (buf, fill) in [(&mut tile.inputs[lane], below(cap as u64 + 1)), (&mut tile.outputs[lane], below(cap as u64 + 1))] {
            for _ in 0..fill {
                let finished = below(4) == 0;
                let state = RayState {
                    pixel_x: below(640) as u16,
                    pixel_y: below(480) as u16,
                    dest_shard: if finished {
                        below(topology.leaf_count as u64) as u16
                    } else {
                        below(partitions as u64) as u16
                    },
                    dest_cell: if finished { FINISHED_CELL } else { below(5000) as u16 },
                    t: below(1000) as f32 / 7.0,
                    transmittance: below(1000) as f32 / 1000.0,
                    color: [0.25, 0.5, below(100) as f32 / 100.0],
                    depth16: None,
                };
                let shadow = Shadow {
                    router_hops: below(20) as u32,
                    tracer_hops: below(5) as u32,
                    since_tracer: below(8) as u32,
                    steps: below(50) as u32,
                    ..Shadow::fresh()
                };
                buf.push(&encode(&state, layout, &mut diag), shadow);
            }
        }
    }
    RouterCase {
        topology,
        router,
        partition_leaf,
        policy,
        spill_to_parent,
        tile,
    }
}

/// Bitwise view of every lane, shadows included (NaN-safe).
pub fn buffer_snapshot(b: &RayBuffer) -> Vec<(Vec<u8>, [u32; 6], bool)> {
    (0..b.len())
        .map(|i| {
            let s = b.shadow(i);
            (
                b.entry(i).to_vec(),
                [s.router_hops, s.tracer_hops, s.since_tracer, s.max_gap, s.steps, s.depth.to_bits()],
                s.spilled,
            )
        })
        .collect()
}

pub fn router_snapshot(t: &RouterTile) -> Vec<Vec<(Vec<u8>, [u32; 6], bool)>> {
    t.inputs.iter().chain(&t.outputs).map(buffer_snapshot).collect()
}
