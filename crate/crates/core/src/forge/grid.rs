//! Uniform bucket grid for nearest-neighbor and radius queries over a fixed
//! point set.

pub struct PointGrid<'a> {
    points: &'a [[f64; 3]],
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// `dims.product() + 1` offsets into `order`.
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl<'a> PointGrid<'a> {
    /// Buckets `points` so that each cell holds about `per_cell` of them.
    pub fn new(points: &'a [[f64; 3]], per_cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let ext: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]).max(1e-12)).collect();
        let max_ext = ext.iter().cloned().fold(0.0, f64::max);
        // Flat point sets get a cell size from the largest extent only.
        let volume: f64 = ext.iter().map(|e| e.max(max_ext * 1e-3)).product();
        let target_cells = (points.len() as f64 / per_cell).max(1.0);
        let cell = (volume / target_cells).cbrt().max(max_ext * 1e-6);
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell).floor() as usize + 1).clamp(1, 1 << 20));
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut grid = PointGrid {
            points,
            origin: lo,
            cell,
            dims,
            starts: vec![0; n_cells + 1],
            order: vec![0; points.len()],
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.cell_index(grid.cell_of(p))).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for c in 0..n_cells {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.order[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        grid
    }

    fn cell_of(&self, p: &[f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn bucket(&self, c: [usize; 3]) -> &[u32] {
        let k = self.cell_index(c);
        &self.order[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// The `k` points nearest to `q` (excluding index `exclude`), sorted by
    /// `(squared distance, index)`.
    pub fn knn(&self, q: &[f64; 3], k: usize, exclude: Option<usize>, out: &mut Vec<(f64, u32)>) {
        out.clear();
        if k == 0 || self.points.is_empty() {
            return;
        }
        let home = self.cell_of(q);
        let max_r = self.dims.iter().copied().max().unwrap_or(1);
        for r in 0..=max_r {
            self.visit_shell(home, r, |i| {
                if Some(i as usize) != exclude {
                    out.push((dist2(q, &self.points[i as usize]), i));
                }
            });
            if out.len() >= k {
                if out.len() > k {
                    out.select_nth_unstable_by(k - 1, cmp_key);
                    out.truncate(k);
                }
                // Everything not yet visited lies at least r cells away.
                let reach = r as f64 * self.cell;
                let kth = out.iter().map(|e| e.0).fold(0.0, f64::max);
                if kth <= reach * reach {
                    out.sort_unstable_by(cmp_key);
                    return;
                }
            }
        }
        out.sort_unstable_by(cmp_key);
        out.truncate(k);
    }

    /// All points with squared distance below `r2` from `q` (excluding
    /// `exclude`), sorted by `(squared distance, index)`.
    pub fn within(&self, q: &[f64; 3], r2: f64, exclude: Option<usize>, out: &mut Vec<(f64, u32)>) {
        out.clear();
        let r = r2.sqrt();
        let lo = self.cell_of(&[q[0] - r, q[1] - r, q[2] - r]);
        let hi = self.cell_of(&[q[0] + r, q[1] + r, q[2] + r]);
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    for &i in self.bucket([x, y, z]) {
                        let d = dist2(q, &self.points[i as usize]);
                        if d < r2 && Some(i as usize) != exclude {
                            out.push((d, i));
                        }
                    }
                }
            }
        }
        out.sort_unstable_by(cmp_key);
    }

    fn visit_shell(&self, home: [usize; 3], r: usize, mut f: impl FnMut(u32)) {
        let r = r as isize;
        let range = |a: usize| {
            let c = home[a] as isize;
            ((c - r).max(0), (c + r).min(self.dims[a] as isize - 1))
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        let h = home.map(|c| c as isize);
        for z in z0..=z1 {
            let dz = (z - h[2]).abs();
            for y in y0..=y1 {
                let dy = (y - h[1]).abs();
                let on_face = dz == r || dy == r;
                if on_face {
                    for x in x0..=x1 {
                        self.bucket([x as usize, y as usize, z as usize]).iter().for_each(|&i| f(i));
                    }
                } else {
                    // Interior rows of the shell only contribute their two ends.
                    for x in [h[0] - r, h[0] + r] {
                        if x >= x0 && x <= x1 {
                            self.bucket([x as usize, y as usize, z as usize]).iter().for_each(|&i| f(i));
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

pub(crate) fn cmp_key(a: &(f64, u32), b: &(f64, u32)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
