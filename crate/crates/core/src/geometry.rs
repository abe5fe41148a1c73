//! Geometric core of the foam: implicit Voronoi faces, ray/face intersection,
//! exit-face selection and nearest-site point location.
//!
//! Faces are never stored. The face between the cell of `p_c` and its neighbor
//! `p_n` is the bisector plane of the segment `[p_c, p_n]`, rebuilt on demand.
//! All arithmetic is `f32` so that every renderer built on these primitives
//! produces bit-identical results for identical inputs.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

/// Denominator magnitude below which a ray is treated as parallel to a face.
pub const PARALLEL_EPS: f32 = 1e-12;

/// Multiple of the scene diagonal used as the default `eps_t`.
pub const DEFAULT_EPS_T_SCALE: f32 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate sites: the two primal points coincide")]
    DegenerateSites,
    #[error("point location needs at least one site")]
    NoSites,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f32 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn length_squared(self) -> f32 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f32 {
        self.length_squared().sqrt()
    }

    pub fn normalize(self) -> Vec3 {
        let inv = 1.0 / self.length();
        Vec3::new(self.x * inv, self.y * inv, self.z * inv)
    }

    #[inline]
    pub fn distance_squared(self, o: Vec3) -> f32 {
        (self - o).length_squared()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn axis(self, a: usize) -> f32 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f32; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f32> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f32) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A primal point with its constant density and color.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Site {
    pub position: Vec3,
    /// Extinction coefficient in inverse scene units.
    pub density: f32,
    pub color: [f32; 3],
}

impl Site {
    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.density.is_finite()
            && self.density >= 0.0
            && self.color.iter().all(|c| (0.0..=1.0).contains(c))
    }
}

/// Plane `{x | <x - point, normal> = 0}`. The owning cell lies on the
/// non-positive side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub point: Vec3,
}

impl Plane {
    /// Signed (unnormalized) side of `x`; `<= 0` is inside the owning cell.
    pub fn side(&self, x: Vec3) -> f32 {
        (x - self.point).dot(self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    /// Tight box around a point set; `None` for an empty set.
    pub fn from_points(points: impl IntoIterator<Item = Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(Aabb { min, max })
    }

    pub fn diagonal(&self) -> f32 {
        (self.max - self.min).length()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    /// Slab test. Returns `(t_near, t_far)`; the ray misses when
    /// `t_near > t_far`.
    pub fn ray_span(&self, ray: &Ray) -> (f32, f32) {
        let mut t_near = f32::NEG_INFINITY;
        let mut t_far = f32::INFINITY;
        for a in 0..3 {
            let o = ray.origin.axis(a);
            let d = ray.direction.axis(a);
            let (lo, hi) = (self.min.axis(a), self.max.axis(a));
            if d == 0.0 {
                if o < lo || o > hi {
                    return (f32::INFINITY, f32::NEG_INFINITY);
                }
                continue;
            }
            let inv = 1.0 / d;
            let t0 = (lo - o) * inv;
            let t1 = (hi - o) * inv;
            let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
        }
        (t_near, t_far)
    }
}

/// The Voronoi face between `p_c` and `p_n`: normal `p_n - p_c` through the
/// midpoint of the two sites.
pub fn bisector_plane(p_c: Vec3, p_n: Vec3) -> Result<Plane, GeometryError> {
    if p_c == p_n {
        return Err(GeometryError::DegenerateSites);
    }
    Ok(Plane {
        normal: p_n - p_c,
        point: (p_c + p_n) * 0.5,
    })
}

/// Parametric distance along `ray` to the bisector plane of `p_c` and `p_n`,
/// or `None` when the ray is parallel to it or the hit is not beyond `eps_t`.
#[inline]
pub fn face_intersection(ray: &Ray, p_c: Vec3, p_n: Vec3, eps_t: f32) -> Option<f32> {
    face_hit(ray, p_c, p_n).and_then(|(t, _)| (t > eps_t).then_some(t))
}

/// Raw plane hit: `(t, denominator)`.
#[inline]
fn face_hit(ray: &Ray, p_c: Vec3, p_n: Vec3) -> Option<(f32, f32)> {
    let normal = p_n - p_c;
    let point = (p_c + p_n) * 0.5;
    let denom = ray.direction.dot(normal);
    if denom.abs() <= PARALLEL_EPS {
        return None;
    }
    Some(((point - ray.origin).dot(normal) / denom, denom))
}

/// Face through which a ray leaves its current cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellExit {
    pub t_exit: f32,
    /// Position of the crossed face's neighbor in the neighbor list.
    pub neighbor_rank: usize,
}

/// Selects the exit face of the cell of `p_c` for a ray that entered it at
/// `t_enter`: the smallest crossing beyond `t_enter + eps_t`, lowest rank on
/// ties. Only faces the ray moves toward (positive denominator) can be exit
/// faces. `None` means the ray leaves through an unbounded part of the cell.
pub fn next_cell_exit(
    ray: &Ray,
    t_enter: f32,
    p_c: Vec3,
    neighbor_positions: &[Vec3],
    eps_t: f32,
) -> Option<CellExit> {
    let threshold = t_enter + eps_t;
    let mut best: Option<CellExit> = None;
    for (rank, &p_n) in neighbor_positions.iter().enumerate() {
        let Some((t, denom)) = face_hit(ray, p_c, p_n) else {
            continue;
        };
        if denom <= 0.0 || t <= threshold {
            continue;
        }
        if best.is_none_or(|b| t < b.t_exit) {
            best = Some(CellExit {
                t_exit: t,
                neighbor_rank: rank,
            });
        }
    }
    best
}

/// Index of the nearest site (squared distance), lowest index on ties.
pub fn locate_cell(point: Vec3, sites: &[Site]) -> Result<usize, GeometryError> {
    locate_nearest(point, sites.iter().map(|s| s.position))
}

pub fn locate_nearest(
    point: Vec3,
    positions: impl IntoIterator<Item = Vec3>,
) -> Result<usize, GeometryError> {
    let mut best: Option<(usize, f32)> = None;
    for (i, p) in positions.into_iter().enumerate() {
        let d = point.distance_squared(p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(GeometryError::NoSites)
}
