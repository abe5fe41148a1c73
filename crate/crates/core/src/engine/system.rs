use super::buffer::RayBuffer;
use super::generator::{generator_step, GeneratorContext, GeneratorTile};
use super::router::{router_step, RouteContext, RouterTile};
use super::schedule::{CameraPolicy, Completion, FrameSchedule, OverflowPolicy};
use super::tracer::{tracer_step, PixelResult, TracerContext, TracerTile};
use super::{
    EngineConfig, EngineError, OverflowAction, OverflowEvent, Phase, RunStats, TileMemory,
};
use crate::geometry::{locate_cell, Aabb, Site};
use crate::metrics::FrameOutput;
use crate::overlay::{assign_framebuffer_slices, FramebufferSliceMap, OverlayTopology, Role};
use crate::partition::{estimate_footprint, extract_all_shards, PartitionAssignment, PartitionShard};
use crate::payload::{peek_dest, FINISHED_CELL};
use crate::render::{Camera, MarchParams};
use crate::scene::Scene;
use rayon::prelude::*;

/// Bytes per framebuffer pixel held by a tracer (rgb + depth as f32).
const SLICE_PIXEL_BYTES: usize = 16;
/// Per-worker, per-lane counters of the two-pass router.
const ROUTER_MISC_BYTES: usize = super::MAX_WORKERS * crate::overlay::ROUTER_LANES * 4 * 2;
const GENERATOR_MISC_BYTES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Tile {
    Tracer(TracerTile),
    Router(RouterTile),
    Generator(GeneratorTile),
}

impl Tile {
    fn occupancy(&self) -> usize {
        match self {
            Tile::Tracer(t) => t.occupancy(),
            Tile::Router(r) => r.occupancy(),
            Tile::Generator(g) => g.occupancy(),
        }
    }

    fn role(&self) -> Role {
        match self {
            Tile::Tracer(_) => Role::Tracer,
            Tile::Router(_) => Role::Router,
            Tile::Generator(_) => Role::Generator,
        }
    }
}

enum TileReport {
    Generator(super::GeneratorReport),
    Router(super::RouterReport),
    Tracer(super::TracerReport),
}

#[derive(Debug, Clone)]
struct Frame {
    schedule: FrameSchedule,
    slices: FramebufferSliceMap,
    iteration: u64,
    stats: RunStats,
    window_progress: u64,
    done: bool,
}

/// The simulated machine: overlay tiles with their shards and buffers.
#[derive(Debug, Clone)]
pub struct System {
    config: EngineConfig,
    topology: OverlayTopology,
    tiles: Vec<Tile>,
    bbox: Aabb,
    /// Global sites, used to locate the camera.
    sites: Vec<Site>,
    /// (partition, local index) of each global site.
    site_home: Vec<(u32, u32)>,
    partition_leaf: Vec<u32>,
    partition_slot: Vec<u32>,
    camera: Option<Camera>,
    entry: (u16, u16),
    pending_camera: Option<(Camera, CameraPolicy)>,
    frame: Option<Frame>,
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (x, y) = v.split_at_mut(b);
        (&mut x[a], &mut y[0])
    } else {
        let (x, y) = v.split_at_mut(a);
        (&mut y[0], &mut x[b])
    }
}

impl System {
    /// Partitions `scene`, extracts the shards and builds the machine.
    pub fn from_scene(
        scene: &Scene,
        assignment: &PartitionAssignment,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        let shards = extract_all_shards(scene, assignment)?;
        Self::new(shards, scene.bbox, config)
    }

    /// Builds the machine from shards `0..P` (in order). Partition `p` lives
    /// on leaf `floor(p * leaf_count / P)`.
    pub fn new(shards: Vec<PartitionShard>, bbox: Aabb, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        if shards.is_empty() {
            return Err(EngineError::Config("no shards".into()));
        }
        let p_count = shards.len();
        if p_count >= 0xFFFF {
            return Err(EngineError::Config(format!("{p_count} partitions do not fit 16-bit shard ids")));
        }
        for (i, s) in shards.iter().enumerate() {
            if s.id as usize != i {
                return Err(EngineError::Config(format!("shard {i} carries id {}", s.id)));
            }
        }
        let topology = OverlayTopology::new(config.levels)?;
        let leaves = topology.leaf_count;
        let partition_leaf: Vec<u32> = (0..p_count).map(|p| (p * leaves / p_count) as u32).collect();
        let mut partition_slot = vec![0u32; p_count];
        let mut held: Vec<Vec<PartitionShard>> = vec![Vec::new(); leaves];
        let n_sites: usize = shards.iter().map(|s| s.n_local()).sum();
        let mut sites = vec![
            Site {
                position: crate::geometry::Vec3::ZERO,
                density: 0.0,
                color: [0.0; 3],
            };
            n_sites
        ];
        let mut site_home = vec![(u32::MAX, 0u32); n_sites];
        for s in shards {
            for (l, (&g, site)) in s.global_ids.iter().zip(&s.local_sites).enumerate() {
                let g = g as usize;
                if g >= n_sites || site_home[g].0 != u32::MAX {
                    return Err(EngineError::Config(format!("global site {g} is not owned exactly once")));
                }
                sites[g] = *site;
                site_home[g] = (s.id, l as u32);
            }
            let leaf = partition_leaf[s.id as usize] as usize;
            partition_slot[s.id as usize] = held[leaf].len() as u32;
            held[leaf].push(s);
        }
        let cap = config.capacity();
        let mut tiles = Vec::with_capacity(topology.tile_count());
        for (leaf, shards) in held.into_iter().enumerate() {
            tiles.push(Tile::Tracer(TracerTile {
                leaf,
                shards,
                input: RayBuffer::new(cap, config.layout),
                output: RayBuffer::new(cap, config.layout),
                slice_start: 0,
                slice: Vec::new(),
            }));
        }
        for _ in 0..topology.router_count {
            tiles.push(Tile::Router(RouterTile::new(cap, config.layout)));
        }
        tiles.push(Tile::Generator(GeneratorTile::new(cap, config.layout)));
        Ok(System {
            config,
            topology,
            tiles,
            bbox,
            sites,
            site_home,
            partition_leaf,
            partition_slot,
            camera: None,
            entry: (0, 0),
            pending_camera: None,
            frame: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn topology(&self) -> &OverlayTopology {
        &self.topology
    }

    pub fn partition_count(&self) -> usize {
        self.partition_leaf.len()
    }

    pub fn partition_leaf(&self) -> &[u32] {
        &self.partition_leaf
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Camera currently used for new and in-flight rays.
    pub fn camera(&self) -> Option<&Camera> {
        self.camera.as_ref()
    }

    pub fn t_scale(&self) -> f32 {
        2.0 * self.bbox.diagonal()
    }

    fn params(&self) -> MarchParams {
        MarchParams {
            t_min: self.config.t_min,
            max_steps: self.config.max_steps,
            eps_t: crate::geometry::DEFAULT_EPS_T_SCALE * self.bbox.diagonal(),
        }
    }

    fn apply_camera(&mut self, camera: Camera) -> Result<(), EngineError> {
        camera.validate()?;
        let g = locate_cell(camera.origin(), &self.sites).map_err(|_| crate::render::RenderError::EmptyScene)?;
        let (p, l) = self.site_home[g];
        self.entry = (p as u16, l as u16);
        self.camera = Some(camera);
        Ok(())
    }

    /// Modeled per-tile memory for a `width x height` frame.
    pub fn memory(&self, width: u32, height: u32) -> Vec<TileMemory> {
        let slices = assign_framebuffer_slices(width, height, self.topology.leaf_count);
        let buf = self.config.buffer_model_bytes();
        self.tiles
            .iter()
            .enumerate()
            .map(|(id, t)| {
                let mut m = TileMemory {
                    tile: id as u32,
                    role: t.role(),
                    shard_bytes: 0,
                    buffer_bytes: 0,
                    slice_bytes: 0,
                    misc_bytes: 0,
                };
                match t {
                    Tile::Tracer(tr) => {
                        m.shard_bytes = tr.shards.iter().map(|s| estimate_footprint(s, &self.config.footprint)).sum();
                        m.buffer_bytes = 2 * buf;
                        let (a, b) = slices.slice(id);
                        m.slice_bytes = (b - a) * SLICE_PIXEL_BYTES;
                    }
                    Tile::Router(_) => {
                        m.buffer_bytes = 10 * buf;
                        m.misc_bytes = ROUTER_MISC_BYTES;
                    }
                    Tile::Generator(_) => {
                        m.buffer_bytes = 2 * buf;
                        m.misc_bytes = GENERATOR_MISC_BYTES;
                    }
                }
                m
            })
            .collect()
    }

    /// Fails on the first tile whose modeled bytes exceed the budget.
    pub fn sram_audit(&self, width: u32, height: u32) -> Result<Vec<TileMemory>, EngineError> {
        let mem = self.memory(width, height);
        for m in &mem {
            if m.total() > self.config.sram_budget {
                return Err(EngineError::SramBudget {
                    tile: m.tile as usize,
                    role: m.role,
                    bytes: m.total(),
                    budget: self.config.sram_budget,
                });
            }
        }
        Ok(mem)
    }

    /// Clears every buffer, sizes the framebuffer slices and arms the
    /// generator for a new frame.
    pub fn start_frame(&mut self, camera: &Camera, schedule: &FrameSchedule) -> Result<(), EngineError> {
        schedule.validate().map_err(EngineError::Config)?;
        camera.validate()?;
        if camera.width > 0xFFFF || camera.height > 0xFFFF {
            return Err(EngineError::Config("frame dimensions must fit 16 bits".into()));
        }
        self.sram_audit(camera.width, camera.height)?;
        self.apply_camera(camera.clone())?;
        self.pending_camera = None;
        let slices = assign_framebuffer_slices(camera.width, camera.height, self.topology.leaf_count);
        let total = slices.pixel_count();
        for (id, t) in self.tiles.iter_mut().enumerate() {
            match t {
                Tile::Tracer(tr) => {
                    tr.input.clear();
                    tr.output.clear();
                    let (a, b) = slices.slice(id);
                    tr.slice_start = a;
                    tr.slice = vec![PixelResult::default(); b - a];
                }
                Tile::Router(r) => r.inputs.iter_mut().chain(r.outputs.iter_mut()).for_each(RayBuffer::clear),
                Tile::Generator(g) => g.reset(total),
            }
        }
        let (w, h) = (camera.width, camera.height);
        self.frame = Some(Frame {
            schedule: *schedule,
            slices,
            iteration: 0,
            stats: RunStats {
                levels: self.config.levels,
                layout: self.config.layout,
                overflow_policy: schedule.overflow_policy,
                partition_count: self.partition_count(),
                width: w,
                height: h,
                iterations_executed: 0,
                scheduled_iterations: schedule.scheduled_iterations(w, h),
                injection_iterations: schedule.injection_iterations(w, h),
                rays_injected: 0,
                rays_terminated: 0,
                rays_dropped: 0,
                rays_in_flight: 0,
                rays_retained: 0,
                rays_spilled: 0,
                host_sync_count: 0,
                finished_pixels: 0,
                total_router_hops: 0,
                total_tracer_hops: 0,
                max_router_hops_between_tracers: 0,
                cells_marched: 0,
                f16_overflows: 0,
                peak_occupancy: vec![0; self.tiles.len()],
                overflow_events: Vec::new(),
                camera_switches: Vec::new(),
                completed: false,
                stalled: false,
            },
            window_progress: 0,
            done: false,
        });
        Ok(())
    }

    /// Requests a camera change. Outside a frame it applies immediately.
    pub fn set_camera(&mut self, camera: Camera, policy: CameraPolicy) -> Result<(), EngineError> {
        camera.validate()?;
        match &self.frame {
            Some(f) if !f.done => {
                if camera.width != f.stats.width || camera.height != f.stats.height {
                    return Err(EngineError::Config("camera change must keep the frame size".into()));
                }
                self.pending_camera = Some((camera, policy));
                Ok(())
            }
            _ => {
                self.pending_camera = None;
                self.apply_camera(camera)
            }
        }
    }

    pub fn in_flight(&self) -> u64 {
        self.tiles.iter().map(|t| t.occupancy() as u64).sum()
    }

    fn generator(&self) -> &GeneratorTile {
        match self.tiles.last() {
            Some(Tile::Generator(g)) => g,
            _ => unreachable!("generator is the last tile"),
        }
    }

    pub fn frame_done(&self) -> bool {
        self.frame.as_ref().is_none_or(|f| f.done)
    }

    fn check_conservation(&self, f: &Frame) -> Result<(), EngineError> {
        let in_flight = self.in_flight();
        let s = &f.stats;
        if s.rays_injected != s.rays_terminated + s.rays_dropped + in_flight {
            return Err(EngineError::Conservation {
                iteration: f.iteration,
                injected: s.rays_injected,
                terminated: s.rays_terminated,
                dropped: s.rays_dropped,
                in_flight,
            });
        }
        Ok(())
    }

    fn record_peaks(&self, f: &mut Frame) {
        for (p, t) in f.stats.peak_occupancy.iter_mut().zip(&self.tiles) {
            *p = (*p).max(t.occupancy() as u32);
        }
    }

    /// Runs one compute + exchange iteration (and a host sync when due).
    /// Returns true once the frame is over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let mut f = self.frame.take().ok_or(EngineError::NoFrame)?;
        if f.done {
            self.frame = Some(f);
            return Ok(true);
        }
        let r = self.iterate(&mut f);
        self.frame = Some(f);
        r?;
        Ok(self.frame_done())
    }

    fn iterate(&mut self, f: &mut Frame) -> Result<(), EngineError> {
        self.compute(f)?;
        self.check_conservation(f)?;
        self.record_peaks(f);
        self.exchange(f);
        self.check_conservation(f)?;
        self.record_peaks(f);
        f.iteration += 1;
        f.stats.iterations_executed = f.iteration;

        let sync_due = f.iteration % f.schedule.rc as u64 == 0;
        match f.schedule.completion {
            Completion::Budgeted => {
                let end = f.iteration >= f.stats.scheduled_iterations;
                if sync_due || end {
                    self.host_sync(f);
                }
                if end {
                    f.done = true;
                }
            }
            Completion::Quiescence => {
                let end = f.iteration >= f.schedule.max_iterations;
                if sync_due || end {
                    self.host_sync(f);
                    let in_flight = self.in_flight();
                    if in_flight == 0 && self.generator().injection_done() {
                        f.done = true;
                        f.stats.completed = true;
                    } else if f.window_progress == 0 && in_flight > 0 {
                        f.done = true;
                        f.stats.stalled = true;
                    }
                    f.window_progress = 0;
                }
                if end {
                    f.done = true;
                }
            }
        }
        if f.done {
            f.stats.rays_in_flight = self.in_flight();
            if f.schedule.completion == Completion::Budgeted {
                f.stats.completed = f.stats.rays_in_flight == 0 && self.generator().injection_done();
            }
        }
        Ok(())
    }

    fn host_sync(&mut self, f: &mut Frame) {
        f.stats.host_sync_count += 1;
        if let Some((cam, policy)) = self.pending_camera.clone() {
            let drained = self.in_flight() == 0 && self.generator().injection_done();
            if policy == CameraPolicy::ImmediateUnsafe || drained {
                // Validated in set_camera; the scene cannot have changed.
                if self.apply_camera(cam).is_ok() {
                    f.stats.camera_switches.push(f.iteration);
                }
                self.pending_camera = None;
            }
        }
    }

    fn event(f: &mut Frame, tile: usize, phase: Phase, action: OverflowAction, count: usize) {
        if count > 0 {
            f.stats.overflow_events.push(OverflowEvent {
                iteration: f.iteration,
                tile: tile as u32,
                phase,
                action,
                count: count as u32,
            });
        }
    }

    fn compute(&mut self, f: &mut Frame) -> Result<(), EngineError> {
        let camera = self.camera.clone().ok_or(EngineError::NoFrame)?;
        let policy = f.schedule.overflow_policy;
        let root = self.topology.root();
        let tctx = TracerContext {
            camera: &camera,
            bbox: self.bbox,
            params: self.params(),
            layout: self.config.layout,
            slices: f.slices,
            partition_leaf: &self.partition_leaf,
            partition_slot: &self.partition_slot,
            t_scale: self.t_scale(),
            policy,
            workers: self.config.workers,
            cell_cap: self.config.tracer_cell_cap,
        };
        let gctx = GeneratorContext {
            schedule: &f.schedule,
            width: f.stats.width,
            height: f.stats.height,
            iteration: f.iteration,
            layout: self.config.layout,
            entry: self.entry,
        };
        let (topology, partition_leaf, workers, spill) = (
            &self.topology,
            &self.partition_leaf[..],
            self.config.workers,
            self.config.generator_spill,
        );
        let reports: Vec<TileReport> = self
            .tiles
            .par_iter_mut()
            .enumerate()
            .map(|(id, tile)| -> Result<TileReport, EngineError> {
                Ok(match tile {
                    Tile::Generator(g) => TileReport::Generator(generator_step(g, &gctx)),
                    Tile::Router(r) => {
                        let ctx = RouteContext {
                            topology,
                            router: id,
                            partition_leaf,
                            policy,
                            spill_to_parent: spill && id == root,
                        };
                        TileReport::Router(router_step(r, &ctx, workers))
                    }
                    Tile::Tracer(t) => TileReport::Tracer(tracer_step(t, &tctx)?),
                })
            })
            .collect::<Result<_, _>>()?;
        for (id, rep) in reports.into_iter().enumerate() {
            match rep {
                TileReport::Generator(g) => {
                    f.stats.rays_injected += g.injected as u64;
                    f.window_progress += (g.injected + g.reemitted) as u64;
                }
                TileReport::Router(r) => {
                    f.stats.rays_dropped += r.dropped as u64;
                    f.stats.rays_retained += r.retained as u64;
                    f.stats.rays_spilled += r.spilled as u64;
                    f.window_progress += (r.forwarded + r.spilled + r.dropped) as u64;
                    Self::event(f, id, Phase::Compute, OverflowAction::Retained, r.retained);
                    Self::event(f, id, Phase::Compute, OverflowAction::Dropped, r.dropped);
                    Self::event(f, id, Phase::Compute, OverflowAction::Spilled, r.spilled);
                }
                TileReport::Tracer(t) => {
                    f.stats.rays_terminated += t.terminated as u64;
                    f.stats.rays_dropped += t.dropped as u64;
                    f.stats.cells_marched += t.cells;
                    f.stats.f16_overflows += t.f16_overflows;
                    f.window_progress += t.consumed as u64;
                    Self::event(f, id, Phase::Compute, OverflowAction::Dropped, t.dropped);
                }
            }
        }
        Ok(())
    }

    /// Moves rays along every link in tile order, lanes 0..5 (parent last).
    fn exchange(&mut self, f: &mut Frame) {
        let drop = f.schedule.overflow_policy == OverflowPolicy::Drop;
        let gen_id = self.topology.generator();
        for src in 0..self.tiles.len() {
            for lane in 0..self.topology.lane_count(src) {
                if self.tiles[src].occupancy() == 0 {
                    break;
                }
                let Some(dst) = self.topology.lane_target(src, lane) else {
                    continue;
                };
                let arrival = self.topology.arrival_lane(src, dst);
                let (s, d) = two_mut(&mut self.tiles, src, dst);
                let from: &mut RayBuffer = match s {
                    Tile::Tracer(t) => &mut t.output,
                    Tile::Router(r) => &mut r.outputs[lane],
                    Tile::Generator(g) => &mut g.output,
                };
                if from.is_empty() {
                    continue;
                }
                let to_tracer = matches!(d, Tile::Tracer(_));
                let to: &mut RayBuffer = match d {
                    Tile::Tracer(t) => &mut t.input,
                    Tile::Router(r) => &mut r.inputs[arrival],
                    Tile::Generator(g) => &mut g.spill,
                };
                let base = to.len();
                let moved = from.transfer_to(to, usize::MAX);
                for i in base..base + moved {
                    if peek_dest(to.entry(i)).1 == FINISHED_CELL {
                        continue;
                    }
                    let sh = to.shadow_mut(i);
                    if dst == gen_id {
                        sh.spilled = true;
                        continue;
                    }
                    if src == gen_id && sh.spilled {
                        sh.spilled = false;
                        continue;
                    }
                    sh.router_hops += 1;
                    sh.since_tracer += 1;
                    if to_tracer {
                        sh.tracer_hops += 1;
                        sh.max_gap = sh.max_gap.max(sh.since_tracer);
                        f.stats.max_router_hops_between_tracers =
                            f.stats.max_router_hops_between_tracers.max(sh.since_tracer);
                        sh.since_tracer = 0;
                    }
                }
                f.window_progress += moved as u64;
                let left = from.len();
                // The generator only ever hands over what the root can take.
                if left > 0 && src != gen_id {
                    if drop {
                        from.clear();
                        f.stats.rays_dropped += left as u64;
                        f.window_progress += left as u64;
                        Self::event(f, src, Phase::Exchange, OverflowAction::Dropped, left);
                    } else {
                        Self::event(f, src, Phase::Exchange, OverflowAction::Retained, left);
                    }
                }
            }
        }
    }

    /// Assembles the framebuffer slices and closes the frame.
    pub fn finish_frame(&mut self) -> Result<(FrameOutput, RunStats), EngineError> {
        let f = self.frame.take().ok_or(EngineError::NoFrame)?;
        let mut stats = f.stats;
        stats.rays_in_flight = self.in_flight();
        let mut out = FrameOutput::new(stats.width, stats.height);
        for t in &self.tiles {
            if let Tile::Tracer(tr) = t {
                for (k, px) in tr.slice.iter().enumerate() {
                    if !px.written {
                        continue;
                    }
                    let p = tr.slice_start + k;
                    out.rgb[p] = px.rgb;
                    out.depth[p] = px.depth;
                    out.router_hops[p] = px.router_hops;
                    out.tracer_hops[p] = px.tracer_hops;
                    out.cell_steps[p] = px.steps;
                    out.missing[p] = false;
                    stats.finished_pixels += 1;
                    stats.total_router_hops += px.router_hops as u64;
                    stats.total_tracer_hops += px.tracer_hops as u64;
                }
            }
        }
        if let Some((cam, CameraPolicy::DeferredSafe)) = self.pending_camera.take() {
            // The frame is over; nothing depends on the old camera anymore.
            self.apply_camera(cam)?;
        }
        Ok((out, stats))
    }

    /// Renders one frame to completion (or until the schedule gives up).
    pub fn run_frame(&mut self, camera: &Camera, schedule: &FrameSchedule) -> Result<(FrameOutput, RunStats), EngineError> {
        self.start_frame(camera, schedule)?;
        while !self.step()? {}
        self.finish_frame()
    }
}

pub fn run_frame(
    system: &mut System,
    camera: &Camera,
    schedule: &FrameSchedule,
) -> Result<(FrameOutput, RunStats), EngineError> {
    system.run_frame(camera, schedule)
}

pub fn set_camera(system: &mut System, camera: Camera, policy: CameraPolicy) -> Result<(), EngineError> {
    system.set_camera(camera, policy)
}
