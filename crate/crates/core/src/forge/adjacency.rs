//! Voronoi adjacency from primal points.
//!
//! Sites `i` and `j` are adjacent when some point of their bisector plane is
//! strictly closer to both of them than to every other site. The verdict for
//! a pair clips a large square on the bisector plane by one half-plane per
//! competing site; a polygon with positive area survives exactly when the two
//! cells share a face.
//!
//! The exhaustive mode tests every pair against every site. The default mode
//! only tests pairs that show up as faces of a cheap 3D cell built from the
//! `knn_k` nearest sites (plus a radius fallback), and stops clipping once the
//! remaining sites are too far to cut anything. Both modes decide a pair from
//! its lower-indexed site with constraints in the same order, so they agree
//! whenever the cell proposes the pair.
//!
//! All clipping is done in `f64` and restricted to the scene box grown by a
//! margin, so faces that lie entirely outside the rendered volume are not
//! reported.

use super::grid::{cmp_key, dist2, PointGrid};
use super::ForgeError;
use crate::geometry::{Aabb, Site};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyOptions {
    pub knn_k: usize,
    pub exhaustive: bool,
    /// Clip region margin as a fraction of the box diagonal.
    pub bbox_margin: f64,
}

impl Default for AdjacencyOptions {
    fn default() -> Self {
        AdjacencyOptions {
            knn_k: 64,
            exhaustive: false,
            bbox_margin: 1e-4,
        }
    }
}

impl AdjacencyOptions {
    pub fn exhaustive() -> Self {
        AdjacencyOptions {
            exhaustive: true,
            ..Self::default()
        }
    }
}

/// Compressed sparse rows: neighbors of `i` are
/// `neighbors[offsets[i]..offsets[i + 1]]`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csr {
    pub offsets: Vec<u32>,
    pub neighbors: Vec<u32>,
}

impl Csr {
    pub fn row(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_rows(rows: impl IntoIterator<Item = Vec<u32>>) -> Self {
        let mut csr = Csr {
            offsets: vec![0],
            neighbors: Vec::new(),
        };
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            csr.neighbors.extend_from_slice(&r);
            csr.offsets.push(csr.neighbors.len() as u32);
        }
        csr
    }
}

/// Axis-aligned clip region in f64.
#[derive(Debug, Clone, Copy)]
struct Region {
    lo: [f64; 3],
    hi: [f64; 3],
    diag: f64,
}

impl Region {
    fn new(bbox: &Aabb, margin: f64) -> Self {
        let lo = bbox.min.to_array().map(f64::from);
        let hi = bbox.max.to_array().map(f64::from);
        let diag = dist2(&lo, &hi).sqrt().max(1e-12);
        let m = margin * diag;
        Region {
            lo: lo.map(|v| v - m),
            hi: hi.map(|v| v + m),
            diag,
        }
    }
}

/// Outcome of clipping one witness polygon against a finite list of sites.
enum Witness {
    Empty,
    NonEmpty,
    /// Sites beyond the list could still cut the polygon; the caller must
    /// supply every site closer than `sqrt(r2)` to the reference site.
    NeedMore { r2: f64 },
}

#[derive(Default)]
struct PolyScratch {
    poly: Vec<[f64; 2]>,
    next: Vec<[f64; 2]>,
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let l = dot(&a, &a).sqrt();
    a.map(|v| v / l)
}

/// Keeps the part of `poly` where `c + ka * a + kb * b <= 0`.
fn clip_polygon(poly: &[[f64; 2]], out: &mut Vec<[f64; 2]>, c: f64, ka: f64, kb: f64) {
    out.clear();
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = c + ka * p[0] + kb * p[1];
        let fq = c + ka * q[0] + kb * q[1];
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let s = fp / (fp - fq);
            out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
        }
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * twice.abs()
}

/// Witness polygon for the pair `(a, b)`, clipped by `constraints` (sorted by
/// squared distance from `a`). With `early_out`, clipping stops at the first
/// site at least twice the polygon radius away from `a`.
fn witness(
    points: &[[f64; 3]],
    a: usize,
    b: usize,
    constraints: &[(f64, u32)],
    complete: bool,
    early_out: bool,
    region: &Region,
    scratch: &mut PolyScratch,
) -> Witness {
    let pa = &points[a];
    let pb = &points[b];
    let n = normalize(sub(pb, pa));
    let helper = {
        let ax = n.map(f64::abs);
        if ax[0] <= ax[1] && ax[0] <= ax[2] {
            [1.0, 0.0, 0.0]
        } else if ax[1] <= ax[2] {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        }
    };
    let u = normalize(cross(&n, &helper));
    let v = cross(&n, &u);
    let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])];
    let half = 5.0 * region.diag;
    scratch.poly.clear();
    scratch.poly.extend_from_slice(&[[-half, -half], [half, -half], [half, half], [-half, half]]);

    // Region walls: lo <= m + a u + b v <= hi on every axis.
    for ax in 0..3 {
        for (c, s) in [(m[ax] - region.hi[ax], 1.0), (region.lo[ax] - m[ax], -1.0)] {
            clip_polygon(&scratch.poly, &mut scratch.next, c, s * u[ax], s * v[ax]);
            std::mem::swap(&mut scratch.poly, &mut scratch.next);
            if scratch.poly.len() < 3 {
                return Witness::Empty;
            }
        }
    }

    let ma = dist2(&m, pa);
    let radius2 = |poly: &[[f64; 2]]| ma + poly.iter().map(|p| p[0] * p[0] + p[1] * p[1]).fold(0.0, f64::max);
    let mut r2 = radius2(&scratch.poly);
    for &(dk, k) in constraints {
        let k = k as usize;
        if k == b || k == a {
            continue;
        }
        if early_out && dk >= 4.0 * r2 {
            return verdict(&scratch.poly, region);
        }
        let pk = &points[k];
        let w = sub(pk, pa);
        let mid = [0.5 * (pa[0] + pk[0]), 0.5 * (pa[1] + pk[1]), 0.5 * (pa[2] + pk[2])];
        let c = dot(&sub(&m, &mid), &w);
        clip_polygon(&scratch.poly, &mut scratch.next, c, dot(&u, &w), dot(&v, &w));
        std::mem::swap(&mut scratch.poly, &mut scratch.next);
        if scratch.poly.len() < 3 {
            return Witness::Empty;
        }
        r2 = radius2(&scratch.poly);
    }
    if complete || !early_out {
        verdict(&scratch.poly, region)
    } else {
        Witness::NeedMore { r2: 4.0 * r2 }
    }
}

fn verdict(poly: &[[f64; 2]], region: &Region) -> Witness {
    if poly.len() >= 3 && polygon_area(poly) > 1e-18 * region.diag * region.diag {
        Witness::NonEmpty
    } else {
        Witness::Empty
    }
}

/// Adjacency verdict for one pair, clipping against every other site. This is
/// the unaccelerated definition; used by tests and the exhaustive mode.
pub fn witness_polygon_adjacent(sites: &[Site], bbox: &Aabb, margin: f64, i: usize, j: usize) -> bool {
    let points = to_f64(sites);
    let constraints = sorted_all(&points, i);
    let region = Region::new(bbox, margin);
    matches!(
        witness(&points, i, j, &constraints, true, false, &region, &mut PolyScratch::default()),
        Witness::NonEmpty
    )
}

fn to_f64(sites: &[Site]) -> Vec<[f64; 3]> {
    sites.iter().map(|s| s.position.to_array().map(f64::from)).collect()
}

fn sorted_all(points: &[[f64; 3]], i: usize) -> Vec<(f64, u32)> {
    let mut all: Vec<(f64, u32)> = points
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(k, p)| (dist2(&points[i], p), k as u32))
        .collect();
    all.sort_unstable_by(cmp_key);
    all
}

/// Builds the symmetric Voronoi adjacency of `sites` restricted to `bbox`
/// (grown by `options.bbox_margin`).
pub fn compute_adjacency(sites: &[Site], bbox: &Aabb, options: &AdjacencyOptions) -> Result<Csr, ForgeError> {
    check_duplicates(sites)?;
    let points = to_f64(sites);
    let region = Region::new(bbox, options.bbox_margin);
    let rows: Vec<Vec<u32>> = if options.exhaustive {
        exhaustive_rows(&points, &region)
    } else {
        knn_rows(&points, &region, options.knn_k.max(1))
    };
    Ok(symmetrize(Csr::from_rows(rows)))
}

fn check_duplicates(sites: &[Site]) -> Result<(), ForgeError> {
    let mut order: Vec<u32> = (0..sites.len() as u32).collect();
    let key = |i: u32| sites[i as usize].position.to_array().map(|c| (c + 0.0).to_bits());
    order.par_sort_unstable_by_key(|&i| (key(i), i));
    for w in order.windows(2) {
        if key(w[0]) == key(w[1]) {
            return Err(ForgeError::DuplicateSites(w[0] as usize, w[1] as usize));
        }
    }
    Ok(())
}

fn exhaustive_rows(points: &[[f64; 3]], region: &Region) -> Vec<Vec<u32>> {
    let n = points.len();
    let upper: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(PolyScratch::default, |scratch, i| {
            let constraints = sorted_all(points, i);
            ((i + 1)..n)
                .filter(|&j| {
                    matches!(
                        witness(points, i, j, &constraints, true, false, region, scratch),
                        Witness::NonEmpty
                    )
                })
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    upper
}

#[derive(Default)]
struct SiteScratch {
    constraints: Vec<(f64, u32)>,
    extra: Vec<(f64, u32)>,
    cell: Polyhedron,
    poly: PolyScratch,
    candidates: Vec<u32>,
}

fn knn_rows(points: &[[f64; 3]], region: &Region, k: usize) -> Vec<Vec<u32>> {
    let grid = PointGrid::new(points, 4.0);
    let n = points.len();
    (0..n)
        .into_par_iter()
        .map_init(SiteScratch::default, |s, i| site_neighbors(points, &grid, region, k, i, s))
        .collect()
}

/// Extends `s.constraints` with every site closer than `sqrt(r2)` to site `i`
/// that is not already listed. Returns false when nothing was added.
fn extend_constraints(points: &[[f64; 3]], grid: &PointGrid, i: usize, r2: f64, s: &mut SiteScratch) -> bool {
    let last = s.constraints.last().copied();
    grid.within(&points[i], r2, Some(i), &mut s.extra);
    let before = s.constraints.len();
    for &e in &s.extra {
        if last.is_none_or(|l| cmp_key(&e, &l).is_gt()) {
            s.constraints.push(e);
        }
    }
    s.constraints.len() > before
}

fn site_neighbors(
    points: &[[f64; 3]],
    grid: &PointGrid,
    region: &Region,
    k: usize,
    i: usize,
    s: &mut SiteScratch,
) -> Vec<u32> {
    let n = points.len();
    grid.knn(&points[i], k, Some(i), &mut s.constraints);
    let complete = |s: &SiteScratch| s.constraints.len() + 1 >= n;

    // Cell of site i, used only to pick candidate pairs.
    s.cell.reset(region);
    let mut next = 0;
    loop {
        while next < s.constraints.len() {
            let (dk, kk) = s.constraints[next];
            if dk >= 4.0 * s.cell.radius2(&points[i]) {
                break;
            }
            let pk = &points[kk as usize];
            let w = sub(pk, &points[i]);
            let mid = [
                0.5 * (points[i][0] + pk[0]),
                0.5 * (points[i][1] + pk[1]),
                0.5 * (points[i][2] + pk[2]),
            ];
            s.cell.clip(w, dot(&w, &mid), kk as i64);
            next += 1;
        }
        let more_needed = next == s.constraints.len() && !complete(s);
        if !(more_needed && extend_constraints(points, grid, i, 4.0 * s.cell.radius2(&points[i]), s)) {
            break;
        }
    }

    s.candidates.clear();
    // Each pair is decided once, from its lower-indexed site.
    s.candidates.extend(s.cell.face_planes().filter(|&p| p > i as i64).map(|p| p as u32));
    let mut row = Vec::with_capacity(s.candidates.len());
    for ci in 0..s.candidates.len() {
        let j = s.candidates[ci] as usize;
        loop {
            let is_complete = complete(s);
            match witness(points, i, j, &s.constraints, is_complete, true, region, &mut s.poly) {
                Witness::NonEmpty => {
                    row.push(j as u32);
                    break;
                }
                Witness::Empty => break,
                Witness::NeedMore { r2 } => {
                    if !extend_constraints(points, grid, i, r2, s) {
                        // No site within reach: nothing else can cut.
                        if let Witness::NonEmpty =
                            witness(points, i, j, &s.constraints, true, true, region, &mut s.poly)
                        {
                            row.push(j as u32);
                        }
                        break;
                    }
                }
            }
        }
    }
    row
}

/// Adds every missing reverse edge.
fn symmetrize(csr: Csr) -> Csr {
    let n = csr.len();
    let mut missing: Vec<(u32, u32)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let csr = &csr;
            csr.row(i)
                .iter()
                .filter(move |&&j| csr.row(j as usize).binary_search(&(i as u32)).is_err())
                .map(move |&j| (j, i as u32))
        })
        .collect();
    if missing.is_empty() {
        return csr;
    }
    missing.sort_unstable();
    let mut rows = Vec::with_capacity(n);
    let mut m = 0;
    for i in 0..n {
        let mut r = csr.row(i).to_vec();
        while m < missing.len() && missing[m].0 as usize == i {
            r.push(missing[m].1);
            m += 1;
        }
        rows.push(r);
    }
    Csr::from_rows(rows)
}

/// Convex polyhedron stored as a list of planar faces, each tagged with the
/// id of the plane that produced it (negative ids are region walls).
#[derive(Default)]
struct Polyhedron {
    verts: Vec<[f64; 3]>,
    faces: Vec<(i64, u32, u32)>,
    next_verts: Vec<[f64; 3]>,
    next_faces: Vec<(i64, u32, u32)>,
    cap: Vec<[f64; 3]>,
    face_tmp: Vec<[f64; 3]>,
    angles: Vec<(f64, [f64; 3])>,
}

impl Polyhedron {
    fn reset(&mut self, region: &Region) {
        let (l, h) = (region.lo, region.hi);
        let c = |x: usize, y: usize, z: usize| [[l[0], h[0]][x], [l[1], h[1]][y], [l[2], h[2]][z]];
        self.verts.clear();
        self.faces.clear();
        let quads: [(i64, [[usize; 3]; 4]); 6] = [
            (-1, [[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]]),
            (-2, [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]]),
            (-3, [[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]]),
            (-4, [[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]]),
            (-5, [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]]),
            (-6, [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]),
        ];
        for (id, q) in quads {
            let start = self.verts.len() as u32;
            self.verts.extend(q.iter().map(|v| c(v[0], v[1], v[2])));
            self.faces.push((id, start, 4));
        }
    }

    fn radius2(&self, p: &[f64; 3]) -> f64 {
        self.verts.iter().map(|v| dist2(v, p)).fold(0.0, f64::max)
    }

    fn face_planes(&self) -> impl Iterator<Item = i64> + '_ {
        self.faces.iter().map(|f| f.0)
    }

    /// Keeps the half-space `w . x <= c`.
    fn clip(&mut self, w: [f64; 3], c: f64, id: i64) {
        let scale = dot(&w, &w).sqrt();
        let tol = 1e-14 * scale;
        if self.verts.iter().all(|x| dot(&w, x) - c <= tol) {
            return;
        }
        self.next_verts.clear();
        self.next_faces.clear();
        self.cap.clear();
        let mut any_out = false;
        for &(fid, start, len) in &self.faces {
            let face = &self.verts[start as usize..(start + len) as usize];
            self.face_tmp.clear();
            let n = face.len();
            for a in 0..n {
                let p = face[a];
                let q = face[(a + 1) % n];
                let fp = dot(&w, &p) - c;
                let fq = dot(&w, &q) - c;
                if fp <= tol {
                    self.face_tmp.push(p);
                    if fp >= -tol {
                        self.cap.push(p);
                    }
                } else {
                    any_out = true;
                }
                if (fp < -tol && fq > tol) || (fp > tol && fq < -tol) {
                    let s = fp / (fp - fq);
                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]), p[2] + s * (q[2] - p[2])];
                    self.face_tmp.push(x);
                    self.cap.push(x);
                }
            }
            if self.face_tmp.len() >= 3 {
                let s = self.next_verts.len() as u32;
                self.next_verts.extend_from_slice(&self.face_tmp);
                self.next_faces.push((fid, s, self.face_tmp.len() as u32));
            }
        }
        if !any_out {
            return;
        }
        self.build_cap(w, id);
        std::mem::swap(&mut self.verts, &mut self.next_verts);
        std::mem::swap(&mut self.faces, &mut self.next_faces);
    }

    /// Orders the section points around their centroid and appends them as a
    /// new face.
    fn build_cap(&mut self, w: [f64; 3], id: i64) {
        if self.cap.len() < 3 {
            return;
        }
        let k = self.cap.len() as f64;
        let centroid = self
            .cap
            .iter()
            .fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]])
            .map(|v| v / k);
        let n = normalize(w);
        let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let u = normalize(cross(&n, &helper));
        let v = cross(&n, &u);
        self.angles.clear();
        for p in &self.cap {
            let d = sub(p, &centroid);
            self.angles.push((dot(&d, &v).atan2(dot(&d, &u)), *p));
        }
        self.angles.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let spread = self.angles.iter().map(|(_, p)| dist2(p, &centroid)).fold(0.0, f64::max);
        let dup2 = 1e-24 * spread.max(1e-300);
        let start = self.next_verts.len() as u32;
        let mut count = 0u32;
        for idx in 0..self.angles.len() {
            let p = self.angles[idx].1;
            if count > 0 && dist2(self.next_verts.last().expect("nonempty"), &p) <= dup2 {
                continue;
            }
            self.next_verts.push(p);
            count += 1;
        }
        if count > 1 && dist2(&self.next_verts[start as usize], self.next_verts.last().expect("nonempty")) <= dup2 {
            self.next_verts.pop();
            count -= 1;
        }
        if count >= 3 {
            self.next_faces.push((id, start, count));
        } else {
            self.next_verts.truncate(start as usize);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{generate_sites, SceneGenSpec};
    use crate::geometry::Vec3;

    fn site(x: f32, y: f32, z: f32) -> Site {
        Site {
            position: Vec3::new(x, y, z),
            density: 1.0,
            color: [0.5; 3],
        }
    }

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn tetrahedron_is_complete() {
        let s = 0.5f32;
        let sites = vec![
            site(0.5 + s * 0.3, 0.5 + s * 0.3, 0.5 + s * 0.3),
            site(0.5 + s * 0.3, 0.5 - s * 0.3, 0.5 - s * 0.3),
            site(0.5 - s * 0.3, 0.5 + s * 0.3, 0.5 - s * 0.3),
            site(0.5 - s * 0.3, 0.5 - s * 0.3, 0.5 + s * 0.3),
        ];
        for opts in [AdjacencyOptions::default(), AdjacencyOptions::exhaustive()] {
            let csr = compute_adjacency(&sites, &unit_box(), &opts).unwrap();
            for i in 0..4u32 {
                let expect: Vec<u32> = (0..4).filter(|&j| j != i).collect();
                assert_eq!(csr.row(i as usize), expect.as_slice());
            }
        }
    }

    #[test]
    fn two_sites_share_one_face() {
        let sites = vec![site(0.2, 0.5, 0.5), site(0.8, 0.5, 0.5)];
        for opts in [AdjacencyOptions::default(), AdjacencyOptions::exhaustive()] {
            let csr = compute_adjacency(&sites, &unit_box(), &opts).unwrap();
            assert_eq!(csr.offsets, vec![0, 1, 2]);
            assert_eq!(csr.neighbors, vec![1, 0]);
        }
    }

    #[test]
    fn collinear_sites_form_a_chain() {
        let sites: Vec<Site> = (0..6).map(|i| site(0.1 + 0.15 * i as f32, 0.5, 0.5)).collect();
        let csr = compute_adjacency(&sites, &unit_box(), &AdjacencyOptions::default()).unwrap();
        for i in 0..6usize {
            let expect: Vec<u32> = [i.wrapping_sub(1), i + 1].into_iter().filter(|&j| j < 6).map(|j| j as u32).collect();
            assert_eq!(csr.row(i), expect.as_slice(), "site {i}");
        }
    }

    #[test]
    fn duplicates_rejected() {
        let sites = vec![site(0.1, 0.1, 0.1), site(0.5, 0.5, 0.5), site(0.1, 0.1, 0.1), site(0.9, 0.2, 0.3)];
        assert_eq!(
            compute_adjacency(&sites, &unit_box(), &AdjacencyOptions::default()),
            Err(ForgeError::DuplicateSites(0, 2))
        );
    }

    #[test]
    fn knn_equals_exhaustive_on_random_scenes() {
        for seed in [1u64, 2, 3] {
            let sites = generate_sites(&SceneGenSpec::unit_cube(200, seed, [0.0, 1.0])).unwrap();
            let a = compute_adjacency(&sites, &unit_box(), &AdjacencyOptions::default()).unwrap();
            let b = compute_adjacency(&sites, &unit_box(), &AdjacencyOptions::exhaustive()).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn small_k_still_finds_all_faces() {
        // The radius fallback must cover what a short neighbor list misses.
        let sites = generate_sites(&SceneGenSpec::unit_cube(300, 8, [0.0, 1.0])).unwrap();
        let opts = AdjacencyOptions {
            knn_k: 4,
            ..AdjacencyOptions::default()
        };
        let a = compute_adjacency(&sites, &unit_box(), &opts).unwrap();
        let b = compute_adjacency(&sites, &unit_box(), &AdjacencyOptions::exhaustive()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polygon_clip_basics() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut out = Vec::new();
        clip_polygon(&square, &mut out, -0.5, 1.0, 0.0);
        assert!((polygon_area(&out) - 0.5).abs() < 1e-15);
        clip_polygon(&square, &mut out, 2.0, 1.0, 0.0);
        assert!(out.is_empty());
    }
}
