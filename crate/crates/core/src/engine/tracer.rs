use super::buffer::{RayBuffer, Shadow};
use super::router::MAX_WORKERS;
use super::schedule::OverflowPolicy;
use super::EngineError;
use crate::geometry::{Aabb, Vec3};
use crate::overlay::FramebufferSliceMap;
use crate::partition::{AdjEntry, PartitionShard};
use crate::payload::{
    decode, dequantize_depth, encode, quantize_depth, CodecDiagnostics, PayloadLayout, RayState, FINISHED_CELL,
    NO_DEPTH_CODE,
};
use crate::render::{advance, pixel_ray, BoundedRay, Camera, MarchParams, MarchState, StepOutcome, NO_DEPTH};

/// Final values of one framebuffer pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelResult {
    pub rgb: [f32; 3],
    pub depth: f32,
    pub router_hops: u32,
    pub tracer_hops: u32,
    pub steps: u32,
    pub written: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracerTile {
    pub leaf: usize,
    /// Shards held by this tile, ascending partition id.
    pub shards: Vec<PartitionShard>,
    pub input: RayBuffer,
    pub output: RayBuffer,
    /// First row-major pixel of this tile's framebuffer slice.
    pub slice_start: usize,
    pub slice: Vec<PixelResult>,
}

impl TracerTile {
    pub fn occupancy(&self) -> usize {
        self.input.len() + self.output.len()
    }

    pub fn reset_slice(&mut self) {
        self.slice.iter_mut().for_each(|p| *p = PixelResult::default());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TracerContext<'a> {
    pub camera: &'a Camera,
    pub bbox: Aabb,
    pub params: MarchParams,
    pub layout: PayloadLayout,
    pub slices: FramebufferSliceMap,
    pub partition_leaf: &'a [u32],
    /// Index of each partition within its tracer's shard list.
    pub partition_slot: &'a [u32],
    pub t_scale: f32,
    pub policy: OverflowPolicy,
    pub workers: usize,
    /// Cells a tracer may march per ray per iteration; the ray is re-queued
    /// to itself when the cap is hit.
    pub cell_cap: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TracerReport {
    pub consumed: usize,
    pub terminated: usize,
    pub emitted: usize,
    pub dropped: usize,
    pub cells: u64,
    pub f16_overflows: u64,
}

enum Outcome {
    Write(usize, PixelResult),
    Emit(Vec<u8>, Shadow),
}

/// Consumes up to `min(input, free output)` rays (all of them in drop mode),
/// marching each until it leaves the tile's shards or terminates. Finished
/// rays owned by this tile's slice are written directly; everything else is
/// appended to the output in input order.
pub fn tracer_step(tile: &mut TracerTile, ctx: &TracerContext) -> Result<TracerReport, EngineError> {
    let n_in = tile.input.len();
    let k = match ctx.policy {
        OverflowPolicy::Backpressure => n_in.min(tile.output.free()),
        OverflowPolicy::Drop => n_in,
    };
    let mut report = TracerReport {
        consumed: k,
        ..Default::default()
    };
    if k == 0 {
        return Ok(report);
    }
    let w = ctx.workers.clamp(1, MAX_WORKERS);
    let mut diag = CodecDiagnostics::default();
    let mut outcomes = Vec::with_capacity(k);
    let mut positions = Vec::with_capacity(32);
    for worker in 0..w {
        for j in worker * k / w..(worker + 1) * k / w {
            let (o, cells) = trace_one(tile, ctx, j, &mut positions, &mut diag)?;
            report.cells += cells;
            outcomes.push(o);
        }
    }
    tile.input.pop_front(k);
    for o in outcomes {
        match o {
            Outcome::Write(p, r) => {
                let slot = &mut tile.slice[p - tile.slice_start];
                if slot.written {
                    return Err(EngineError::DuplicatePixel(p));
                }
                *slot = r;
                report.terminated += 1;
            }
            Outcome::Emit(bytes, sh) => {
                if tile.output.push(&bytes, sh) {
                    report.emitted += 1;
                } else {
                    report.dropped += 1;
                }
            }
        }
    }
    report.f16_overflows = diag.f16_overflows;
    Ok(report)
}

fn bad(tile: &TracerTile, st: &RayState) -> EngineError {
    EngineError::BadDestination {
        tile: tile.leaf,
        shard: st.dest_shard,
        cell: st.dest_cell,
    }
}

fn pixel_result(st: &RayState, sh: &Shadow, ctx: &TracerContext) -> PixelResult {
    let depth = if ctx.layout.has_depth() {
        st.depth16.map(|c| dequantize_depth(c, ctx.t_scale))
    } else {
        sh.depth()
    };
    PixelResult {
        rgb: st.color,
        depth: depth.unwrap_or(NO_DEPTH),
        router_hops: sh.router_hops,
        tracer_hops: sh.tracer_hops,
        steps: sh.steps,
        written: true,
    }
}

fn trace_one(
    tile: &TracerTile,
    ctx: &TracerContext,
    j: usize,
    positions: &mut Vec<Vec3>,
    diag: &mut CodecDiagnostics,
) -> Result<(Outcome, u64), EngineError> {
    let mut sh = *tile.input.shadow(j);
    let st = decode(tile.input.entry(j), ctx.layout).expect("slot has layout size");
    let pixel = st.pixel_y as usize * ctx.slices.width as usize + st.pixel_x as usize;
    if st.dest_cell == FINISHED_CELL {
        if st.dest_shard as usize != tile.leaf || ctx.slices.owner(pixel) != tile.leaf {
            return Err(bad(tile, &st));
        }
        return Ok((Outcome::Write(pixel, pixel_result(&st, &sh, ctx)), 0));
    }
    let p = st.dest_shard as usize;
    if ctx.partition_leaf.get(p).is_none_or(|&l| l as usize != tile.leaf) {
        return Err(bad(tile, &st));
    }
    let mut shard = &tile.shards[ctx.partition_slot[p] as usize];
    if st.dest_cell as usize >= shard.n_local() {
        return Err(bad(tile, &st));
    }
    let ray = pixel_ray(ctx.camera, st.pixel_x as u32, st.pixel_y as u32).map_err(|_| bad(tile, &st))?;
    let bounded = BoundedRay::new(ray, &ctx.bbox);
    let depth = if ctx.layout.has_depth() {
        st.depth16.map(|c| dequantize_depth(c, ctx.t_scale))
    } else {
        sh.depth()
    };
    let mut state = MarchState {
        cell: st.dest_cell as u32,
        t: st.t,
        transmittance: st.transmittance,
        color: st.color,
        depth,
        steps: sh.steps,
    };
    let mut cells = 0u64;
    let packet = |state: &MarchState, dest_shard: u16, dest_cell: u16, diag: &mut CodecDiagnostics| {
        let depth16 = ctx
            .layout
            .has_depth()
            .then(|| state.depth.map(|d| quantize_depth(d, ctx.t_scale).min(NO_DEPTH_CODE - 1)))
            .flatten();
        let rs = RayState {
            pixel_x: st.pixel_x,
            pixel_y: st.pixel_y,
            dest_shard,
            dest_cell,
            t: state.t,
            transmittance: state.transmittance,
            color: state.color,
            depth16,
        };
        encode(&rs, ctx.layout, diag)
    };
    loop {
        if ctx.cell_cap.is_some_and(|c| cells >= c as u64) {
            sh.steps = state.steps;
            sh.depth = state.depth.unwrap_or(f32::NAN);
            let bytes = packet(&state, shard.id as u16, state.cell as u16, diag);
            return Ok((Outcome::Emit(bytes, sh), cells));
        }
        let cell = state.cell as usize;
        shard.neighbor_positions(cell, positions);
        let outcome = advance(&mut state, &bounded, &shard.local_sites[cell], positions, &ctx.params);
        cells += 1;
        match outcome {
            StepOutcome::Crossed { neighbor_rank } => match shard.decode(shard.raw_neighbors(cell)[neighbor_rank]) {
                AdjEntry::Local(l) => state.cell = l as u32,
                AdjEntry::Remote(r) => {
                    let rec = shard.neighbor_records[r as usize];
                    let owner = rec.owner_partition as usize;
                    if ctx.partition_leaf[owner] as usize == tile.leaf {
                        shard = &tile.shards[ctx.partition_slot[owner] as usize];
                        state.cell = rec.local_index_in_owner;
                    } else {
                        sh.steps = state.steps;
                        sh.depth = state.depth.unwrap_or(f32::NAN);
                        let bytes = packet(&state, owner as u16, rec.local_index_in_owner as u16, diag);
                        return Ok((Outcome::Emit(bytes, sh), cells));
                    }
                }
            },
            StepOutcome::Finished(_) => {
                sh.steps = state.steps;
                sh.depth = state.depth.unwrap_or(f32::NAN);
                let owner = ctx.slices.owner(pixel);
                let bytes = packet(&state, owner as u16, FINISHED_CELL, diag);
                if owner == tile.leaf {
                    let back = decode(&bytes, ctx.layout).expect("own encoding");
                    return Ok((Outcome::Write(pixel, pixel_result(&back, &sh, ctx)), cells));
                }
                return Ok((Outcome::Emit(bytes, sh), cells));
            }
        }
    }
}
