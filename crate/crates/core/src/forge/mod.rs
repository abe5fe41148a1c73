//! Synthetic foam scenes: site generation, Voronoi adjacency and the FOAM
//! binary format.

mod adjacency;
mod format;
mod grid;

pub use adjacency::{compute_adjacency, witness_polygon_adjacent, AdjacencyOptions, Csr};
pub use format::{load_scene, read_scene, save_scene, write_scene, FormatError, FOAM_MAGIC, FOAM_VERSION};
pub use grid::PointGrid;

use crate::geometry::{Aabb, Site, Vec3};
use crate::scene::Scene;
use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForgeError {
    #[error("need at least 4 sites, got {0}")]
    TooFewSites(usize),
    #[error("invalid generation parameters: {0}")]
    InvalidSpec(String),
    #[error("degenerate sites: {0} and {1} coincide")]
    DuplicateSites(usize, usize),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMode {
    RandomUniform,
    PositionHash,
}

/// Spatial distribution of generated sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Distribution {
    Uniform,
    /// Sites concentrated around `clusters` random centers. Each coordinate is
    /// offset by `spread * extent * (u1 + u2 + u3 + u4 - 2)`; a
    /// `background` fraction of sites is uniform instead.
    Clustered { clusters: u32, spread: f32, background: f32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenSpec {
    pub site_count: usize,
    pub seed: u64,
    pub bbox: Aabb,
    pub density_range: [f32; 2],
    pub color_mode: ColorMode,
    #[serde(default = "uniform")]
    pub distribution: Distribution,
}

fn uniform() -> Distribution {
    Distribution::Uniform
}

impl SceneGenSpec {
    /// Uniform sites in the unit cube.
    pub fn unit_cube(site_count: usize, seed: u64, density_range: [f32; 2]) -> Self {
        SceneGenSpec {
            site_count,
            seed,
            bbox: Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)),
            density_range,
            color_mode: ColorMode::RandomUniform,
            distribution: Distribution::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.site_count < 4 {
            return Err(ForgeError::TooFewSites(self.site_count));
        }
        let [lo, hi] = self.density_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(ForgeError::InvalidSpec("density range must satisfy 0 <= lo <= hi".into()));
        }
        let e = self.bbox.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0 && e.is_finite()) {
            return Err(ForgeError::InvalidSpec("bounding box is degenerate".into()));
        }
        if let Distribution::Clustered { clusters, spread, background } = self.distribution {
            if clusters == 0 || !(spread > 0.0) || !(0.0..=1.0).contains(&background) {
                return Err(ForgeError::InvalidSpec(
                    "clustered distribution needs clusters >= 1, spread > 0, background in [0,1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// SplitMix64 stream with the float conversion used throughout scene
/// generation.
pub struct SceneRng(SplitMix64);

impl SceneRng {
    pub fn new(seed: u64) -> Self {
        SceneRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Top 24 bits scaled into `[0, 1)`; exact in `f32`.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / 16_777_216.0)
    }
}

/// Generates `spec.site_count` sites; bit-identical for identical specs.
pub fn generate_sites(spec: &SceneGenSpec) -> Result<Vec<Site>, ForgeError> {
    spec.validate()?;
    let mut rng = SceneRng::new(spec.seed);
    let (min, ext) = (spec.bbox.min, spec.bbox.extent());
    let centers: Vec<Vec3> = match spec.distribution {
        Distribution::Uniform => Vec::new(),
        Distribution::Clustered { clusters, .. } => (0..clusters).map(|_| uniform_point(&mut rng, min, ext)).collect(),
    };
    let [lo, hi] = spec.density_range;
    let mut sites = Vec::with_capacity(spec.site_count);
    for _ in 0..spec.site_count {
        let position = match spec.distribution {
            Distribution::Uniform => uniform_point(&mut rng, min, ext),
            Distribution::Clustered { spread, background, .. } => {
                clustered_point(&mut rng, &centers, spread, background, &spec.bbox)
            }
        };
        let density = lo + rng.next_f32() * (hi - lo);
        let color = match spec.color_mode {
            ColorMode::RandomUniform => [rng.next_f32(), rng.next_f32(), rng.next_f32()],
            ColorMode::PositionHash => position_hash_color(position),
        };
        sites.push(Site { position, density, color });
    }
    Ok(sites)
}

fn uniform_point(rng: &mut SceneRng, min: Vec3, ext: Vec3) -> Vec3 {
    let x = min.x + rng.next_f32() * ext.x;
    let y = min.y + rng.next_f32() * ext.y;
    let z = min.z + rng.next_f32() * ext.z;
    Vec3::new(x, y, z)
}

fn clustered_point(rng: &mut SceneRng, centers: &[Vec3], spread: f32, background: f32, bbox: &Aabb) -> Vec3 {
    let ext = bbox.extent();
    if rng.next_f32() < background {
        return uniform_point(rng, bbox.min, ext);
    }
    let c = centers[(rng.next_u64() % centers.len() as u64) as usize];
    // Redraw rather than clamp so no two sites pile up on the box surface.
    loop {
        let mut offset = [0.0f32; 3];
        for o in &mut offset {
            let s = rng.next_f32() + rng.next_f32() + rng.next_f32() + rng.next_f32() - 2.0;
            *o = s * spread;
        }
        let p = Vec3::new(c.x + offset[0] * ext.x, c.y + offset[1] * ext.y, c.z + offset[2] * ext.z);
        if bbox.contains(p) {
            return p;
        }
    }
}

/// Color derived from the position bits through the SplitMix64 finalizer.
pub fn position_hash_color(p: Vec3) -> [f32; 3] {
    let key = (p.x.to_bits() as u64) ^ ((p.y.to_bits() as u64) << 21) ^ ((p.z.to_bits() as u64) << 42);
    let mut z = key.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    [(z & 0xff) as f32 / 255.0, ((z >> 8) & 0xff) as f32 / 255.0, ((z >> 16) & 0xff) as f32 / 255.0]
}

/// Generates sites, builds their adjacency and assembles a validated scene.
pub fn generate_scene(spec: &SceneGenSpec, options: &AdjacencyOptions) -> Result<Scene, ForgeError> {
    let sites = generate_sites(spec)?;
    let csr = compute_adjacency(&sites, &spec.bbox, options)?;
    Ok(Scene::new(sites, csr.offsets, csr.neighbors, spec.bbox)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_stream() {
        // Seed 0 of the public reference implementation.
        let mut r = SceneRng::new(0);
        assert_eq!(r.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(r.next_u64(), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn floats_in_unit_interval() {
        let mut r = SceneRng::new(7);
        for _ in 0..10_000 {
            let f = r.next_f32();
            assert!((0.0..1.0).contains(&f));
        }
    }

    #[test]
    fn seeded_determinism() {
        let spec = SceneGenSpec::unit_cube(100, 42, [0.0, 5.0]);
        assert_eq!(generate_sites(&spec).unwrap(), generate_sites(&spec).unwrap());
        let other = SceneGenSpec { seed: 43, ..spec.clone() };
        assert_ne!(generate_sites(&spec).unwrap(), generate_sites(&other).unwrap());
    }

    #[test]
    fn zero_density_range_is_transparent() {
        let sites = generate_sites(&SceneGenSpec::unit_cube(50, 1, [0.0, 0.0])).unwrap();
        assert!(sites.iter().all(|s| s.density == 0.0));
    }

    #[test]
    fn too_few_sites_rejected() {
        assert_eq!(
            generate_sites(&SceneGenSpec::unit_cube(3, 1, [0.0, 1.0])),
            Err(ForgeError::TooFewSites(3))
        );
    }

    #[test]
    fn uniform_axis_means() {
        let sites = generate_sites(&SceneGenSpec::unit_cube(10_000, 99, [0.0, 1.0])).unwrap();
        for a in 0..3 {
            let mean = sites.iter().map(|s| s.position.axis(a) as f64).sum::<f64>() / sites.len() as f64;
            assert!((mean - 0.5).abs() < 0.02, "axis {a} mean {mean}");
        }
    }

    #[test]
    fn clustered_sites_stay_in_box() {
        let spec = SceneGenSpec {
            distribution: Distribution::Clustered { clusters: 5, spread: 0.05, background: 0.1 },
            color_mode: ColorMode::PositionHash,
            ..SceneGenSpec::unit_cube(5000, 3, [0.0, 1.0])
        };
        let sites = generate_sites(&spec).unwrap();
        assert!(sites.iter().all(|s| spec.bbox.contains(s.position) && s.is_valid()));
    }
}
