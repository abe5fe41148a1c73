//! Serial reference ray marcher over the whole scene.
//!
//! This is the ground truth the distributed engine is checked against. The
//! per-segment step ([`advance`]) is shared with the tracer tiles so that both
//! paths perform the exact same floating-point operations; everything else
//! (adjacency lookup, state transport) differs.

use crate::geometry::{locate_cell, next_cell_exit, Ray, Site, Vec3};
use crate::metrics::FrameOutput;
use crate::scene::Scene;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_T_MIN: f32 = 1e-3;
pub const DEFAULT_MAX_STEPS: u32 = 10_000;

/// Depth reported for rays that never dropped to half transmittance.
pub const NO_DEPTH: f32 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("pixel ({x}, {y}) is outside the {width}x{height} image")]
    PixelOutOfRange { x: u32, y: u32, width: u32, height: u32 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("scene has no sites")]
    EmptyScene,
}

/// Pinhole camera. Camera space is +x right, +y down, +z forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f32; 3],
    /// Row-major camera-to-world rotation.
    pub rotation_c2w: [f32; 9],
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Camera at `position` looking along `forward`, with `up` disambiguating
    /// roll and a horizontal field of view of `hfov_deg` degrees.
    pub fn looking(position: Vec3, forward: Vec3, up: Vec3, width: u32, height: u32, hfov_deg: f32) -> Self {
        let f = forward.normalize();
        let right = cross(f, up).normalize();
        let down = cross(f, right);
        // Columns are the camera axes expressed in world space.
        let rotation_c2w = [
            right.x, down.x, f.x, //
            right.y, down.y, f.y, //
            right.z, down.z, f.z,
        ];
        let fx = 0.5 * width as f32 / (0.5 * hfov_deg.to_radians()).tan();
        Camera {
            position: position.to_array(),
            rotation_c2w,
            fx,
            fy: fx,
            cx: 0.5 * width as f32,
            cy: 0.5 * height as f32,
            width,
            height,
        }
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from_array(self.position)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidCamera(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx > 0.0 && self.cx < self.width as f32 && self.cy > 0.0 && self.cy < self.height as f32) {
            return bad("principal point must lie inside the image");
        }
        if !Vec3::from_array(self.position).is_finite() {
            return bad("position must be finite");
        }
        let r = &self.rotation_c2w;
        for i in 0..3 {
            for j in 0..3 {
                // (R^T R)_ij = sum_k R_ki R_kj
                let dot: f32 = (0..3).map(|k| r[3 * k + i] * r[3 * k + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-5 {
                    return bad("rotation is not orthonormal");
                }
            }
        }
        Ok(())
    }
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x)
}

/// Primary ray through the center of pixel `(x, y)`.
pub fn pixel_ray(camera: &Camera, x: u32, y: u32) -> Result<Ray, RenderError> {
    if x >= camera.width || y >= camera.height {
        return Err(RenderError::PixelOutOfRange {
            x,
            y,
            width: camera.width,
            height: camera.height,
        });
    }
    let d = Vec3::new(
        (x as f32 + 0.5 - camera.cx) / camera.fx,
        (y as f32 + 0.5 - camera.cy) / camera.fy,
        1.0,
    );
    let r = &camera.rotation_c2w;
    let world = Vec3::new(
        r[0] * d.x + r[1] * d.y + r[2] * d.z,
        r[3] * d.x + r[4] * d.y + r[5] * d.z,
        r[6] * d.x + r[7] * d.y + r[8] * d.z,
    );
    Ok(Ray {
        origin: camera.origin(),
        direction: world.normalize(),
    })
}

/// Result of compositing one constant-density segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentComposite {
    pub transmittance: f32,
    pub color: [f32; 3],
    /// Fraction of the segment at which transmittance reaches one half, when
    /// this segment is where it first drops to 0.5.
    pub depth_crossing: Option<f32>,
}

pub fn composite_segment(
    transmittance_in: f32,
    color_in: [f32; 3],
    sigma: f32,
    cell_color: [f32; 3],
    delta: f32,
) -> SegmentComposite {
    let optical = sigma * delta;
    let decay = (-optical).exp();
    let alpha = 1.0 - decay;
    let weight = transmittance_in * alpha;
    let color = [
        color_in[0] + weight * cell_color[0],
        color_in[1] + weight * cell_color[1],
        color_in[2] + weight * cell_color[2],
    ];
    let transmittance = transmittance_in * decay;
    let depth_crossing = (transmittance_in > 0.5 && transmittance <= 0.5 && optical > 0.0)
        .then(|| ((transmittance_in / 0.5).ln() / optical).clamp(f32::MIN_POSITIVE, 1.0));
    SegmentComposite {
        transmittance,
        color,
        depth_crossing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarchParams {
    pub t_min: f32,
    pub max_steps: u32,
    pub eps_t: f32,
}

impl MarchParams {
    pub fn for_scene(scene: &Scene) -> Self {
        MarchParams {
            t_min: DEFAULT_T_MIN,
            max_steps: DEFAULT_MAX_STEPS,
            eps_t: scene.eps_t(),
        }
    }
}

/// A ray clipped against the scene box: only `[t_near, t_far]` carries
/// density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedRay {
    pub ray: Ray,
    pub t_near: f32,
    pub t_far: f32,
}

impl BoundedRay {
    pub fn new(ray: Ray, bbox: &crate::geometry::Aabb) -> Self {
        let (t_near, t_far) = bbox.ray_span(&ray);
        BoundedRay { ray, t_near, t_far }
    }

    /// True when no part of `[0, inf)` lies inside the box.
    pub fn misses(&self) -> bool {
        !(self.t_far > self.t_near.max(0.0))
    }
}

/// Mutable per-ray marching state; exactly what travels between tiles plus
/// the bookkeeping kept alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchState {
    pub cell: u32,
    pub t: f32,
    pub transmittance: f32,
    pub color: [f32; 3],
    pub depth: Option<f32>,
    pub steps: u32,
}

impl MarchState {
    pub fn start(cell: u32) -> Self {
        MarchState {
            cell,
            t: 0.0,
            transmittance: 1.0,
            color: [0.0; 3],
            depth: None,
            steps: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    Opaque,
    NoExit,
    LeftBounds,
    StepCap,
    Missed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Crossed into the neighbor at this rank of the current cell's list;
    /// `state.t` is the crossing distance.
    Crossed { neighbor_rank: usize },
    Finished(FinishReason),
}

/// Marches one cell: finds the exit face, composites the in-box part of the
/// segment and decides whether the ray terminates. On `Crossed` the caller
/// must update `state.cell`.
pub fn advance(
    state: &mut MarchState,
    bounded: &BoundedRay,
    site: &Site,
    neighbor_positions: &[Vec3],
    params: &MarchParams,
) -> StepOutcome {
    if bounded.misses() {
        return StepOutcome::Finished(FinishReason::Missed);
    }
    let exit = next_cell_exit(&bounded.ray, state.t, site.position, neighbor_positions, params.eps_t);
    let (seg_end, terminal) = match exit {
        Some(e) if e.t_exit < bounded.t_far => (e.t_exit, None),
        Some(_) => (bounded.t_far, Some(FinishReason::LeftBounds)),
        None => (bounded.t_far, Some(FinishReason::NoExit)),
    };
    let seg_start = state.t.max(bounded.t_near);
    if seg_end > seg_start {
        let delta = seg_end - seg_start;
        let c = composite_segment(state.transmittance, state.color, site.density, site.color, delta);
        if state.depth.is_none() {
            if let Some(f) = c.depth_crossing {
                state.depth = Some(seg_start + f * delta);
            }
        }
        state.transmittance = c.transmittance;
        state.color = c.color;
    }
    state.steps += 1;
    if let Some(reason) = terminal {
        return StepOutcome::Finished(reason);
    }
    if state.transmittance < params.t_min {
        return StepOutcome::Finished(FinishReason::Opaque);
    }
    if state.steps >= params.max_steps {
        return StepOutcome::Finished(FinishReason::StepCap);
    }
    let e = exit.expect("non-terminal step has an exit face");
    state.t = e.t_exit;
    StepOutcome::Crossed {
        neighbor_rank: e.neighbor_rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchResult {
    pub color: [f32; 3],
    /// Distance at 50% transmittance, or [`NO_DEPTH`].
    pub depth: f32,
    pub final_transmittance: f32,
    pub cell_steps: u32,
    pub reason: FinishReason,
}

pub(crate) fn gather_positions(scene: &Scene, cell: usize, out: &mut Vec<Vec3>) {
    out.clear();
    out.extend(scene.neighbors(cell).iter().map(|&j| scene.sites[j as usize].position));
}

/// Walks `ray` from `camera_cell` through the global adjacency graph.
pub fn march_ray(scene: &Scene, camera_cell: usize, ray: Ray, params: &MarchParams) -> MarchResult {
    let bounded = BoundedRay::new(ray, &scene.bbox);
    let mut state = MarchState::start(camera_cell as u32);
    let mut positions = Vec::with_capacity(32);
    let reason = loop {
        let cell = state.cell as usize;
        gather_positions(scene, cell, &mut positions);
        match advance(&mut state, &bounded, &scene.sites[cell], &positions, params) {
            StepOutcome::Crossed { neighbor_rank } => {
                state.cell = scene.neighbors(cell)[neighbor_rank];
            }
            StepOutcome::Finished(r) => break r,
        }
    };
    MarchResult {
        color: state.color,
        depth: state.depth.unwrap_or(NO_DEPTH),
        final_transmittance: state.transmittance,
        cell_steps: state.steps,
        reason,
    }
}

/// One cell of a purely geometric walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpan {
    pub cell: u32,
    pub t_enter: f32,
    pub t_exit: f32,
}

/// Sequence of cells a ray visits inside the scene box, ignoring density.
pub fn walk_cells(scene: &Scene, start_cell: usize, ray: Ray, max_steps: u32) -> Vec<CellSpan> {
    let bounded = BoundedRay::new(ray, &scene.bbox);
    let mut spans = Vec::new();
    if bounded.misses() {
        return spans;
    }
    let eps = scene.eps_t();
    let (mut cell, mut t) = (start_cell, 0.0f32);
    let mut positions = Vec::new();
    for _ in 0..max_steps {
        gather_positions(scene, cell, &mut positions);
        let exit = next_cell_exit(&ray, t, scene.sites[cell].position, &positions, eps);
        let end = match exit {
            Some(e) if e.t_exit < bounded.t_far => e.t_exit,
            _ => bounded.t_far,
        };
        spans.push(CellSpan {
            cell: cell as u32,
            t_enter: t.max(bounded.t_near),
            t_exit: end,
        });
        match exit {
            Some(e) if e.t_exit < bounded.t_far => {
                cell = scene.neighbors(cell)[e.neighbor_rank] as usize;
                t = e.t_exit;
            }
            _ => break,
        }
    }
    spans
}

/// Renders every pixel independently with [`march_ray`].
pub fn render_reference(scene: &Scene, camera: &Camera, params: &MarchParams) -> Result<FrameOutput, RenderError> {
    camera.validate()?;
    let camera_cell = locate_cell(camera.origin(), &scene.sites).map_err(|_| RenderError::EmptyScene)?;
    let (w, h) = (camera.width, camera.height);
    let results: Vec<MarchResult> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let ray = pixel_ray(camera, p % w, p / w).expect("pixel in range");
            march_ray(scene, camera_cell, ray, params)
        })
        .collect();
    let mut frame = FrameOutput::new(w, h);
    for (p, r) in results.into_iter().enumerate() {
        frame.rgb[p] = r.color;
        frame.depth[p] = r.depth;
        frame.cell_steps[p] = r.cell_steps;
        frame.missing[p] = false;
    }
    Ok(frame)
}
