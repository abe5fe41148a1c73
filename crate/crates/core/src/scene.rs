//! The global foam scene: sites plus their symmetric CSR adjacency.

use crate::geometry::{Aabb, Site, DEFAULT_EPS_T_SCALE};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene has no sites")]
    Empty,
    #[error("adjacency offsets malformed: {0}")]
    BadOffsets(String),
    #[error("site {site} lists neighbor {neighbor} which does not exist")]
    NeighborOutOfRange { site: usize, neighbor: usize },
    #[error("site {0} lists itself as a neighbor")]
    SelfLoop(usize),
    #[error("asymmetric adjacency: edge ({from},{to}) has no reverse")]
    AsymmetricAdjacency { from: usize, to: usize },
    #[error("site {0} has invalid attributes (non-finite, negative density or color outside [0,1])")]
    InvalidSite(usize),
    #[error("site {0} lies outside the scene bounding box")]
    SiteOutsideBbox(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub sites: Vec<Site>,
    /// `sites.len() + 1` entries; neighbors of `i` are
    /// `adjacency[offsets[i]..offsets[i + 1]]`.
    pub adjacency_offsets: Vec<u32>,
    pub adjacency: Vec<u32>,
    pub bbox: Aabb,
}

impl Scene {
    /// Builds and validates a scene.
    pub fn new(
        sites: Vec<Site>,
        adjacency_offsets: Vec<u32>,
        adjacency: Vec<u32>,
        bbox: Aabb,
    ) -> Result<Self, SceneError> {
        let scene = Scene {
            sites,
            adjacency_offsets,
            adjacency,
            bbox,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        let lo = self.adjacency_offsets[i] as usize;
        let hi = self.adjacency_offsets[i + 1] as usize;
        &self.adjacency[lo..hi]
    }

    /// Default intersection epsilon: a millionth of the box diagonal.
    pub fn eps_t(&self) -> f32 {
        DEFAULT_EPS_T_SCALE * self.bbox.diagonal()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let n = self.sites.len();
        if n == 0 {
            return Err(SceneError::Empty);
        }
        let offs = &self.adjacency_offsets;
        if offs.len() != n + 1 {
            return Err(SceneError::BadOffsets(format!(
                "expected {} offsets, found {}",
                n + 1,
                offs.len()
            )));
        }
        if offs[0] != 0 || offs[n] as usize != self.adjacency.len() {
            return Err(SceneError::BadOffsets(
                "offsets must start at 0 and end at the adjacency length".into(),
            ));
        }
        if offs.windows(2).any(|w| w[0] > w[1]) {
            return Err(SceneError::BadOffsets("offsets decrease".into()));
        }
        for (i, s) in self.sites.iter().enumerate() {
            if !s.is_valid() {
                return Err(SceneError::InvalidSite(i));
            }
            if !self.bbox.contains(s.position) {
                return Err(SceneError::SiteOutsideBbox(i));
            }
        }
        for i in 0..n {
            for &j in self.neighbors(i) {
                let j = j as usize;
                if j >= n {
                    return Err(SceneError::NeighborOutOfRange { site: i, neighbor: j });
                }
                if j == i {
                    return Err(SceneError::SelfLoop(i));
                }
            }
        }
        for i in 0..n {
            for &j in self.neighbors(i) {
                let j = j as usize;
                if !self.neighbors(j).contains(&(i as u32)) {
                    return Err(SceneError::AsymmetricAdjacency { from: i, to: j });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn tiny() -> Scene {
        let sites = (0..3)
            .map(|i| Site {
                position: Vec3::new(i as f32, 0.0, 0.0),
                density: 1.0,
                color: [0.1, 0.2, 0.3],
            })
            .collect();
        Scene {
            sites,
            adjacency_offsets: vec![0, 1, 3, 4],
            adjacency: vec![1, 0, 2, 1],
            bbox: Aabb::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)),
        }
    }

    #[test]
    fn valid_scene_passes() {
        tiny().validate().unwrap();
    }

    #[test]
    fn detects_each_violation() {
        let mut s = tiny();
        s.adjacency[3] = 0;
        assert!(matches!(s.validate(), Err(SceneError::AsymmetricAdjacency { .. })));

        let mut s = tiny();
        s.adjacency[0] = 0;
        assert_eq!(s.validate(), Err(SceneError::SelfLoop(0)));

        let mut s = tiny();
        s.adjacency_offsets = vec![0, 2, 1, 4];
        assert!(matches!(s.validate(), Err(SceneError::BadOffsets(_))));

        let mut s = tiny();
        s.sites[1].density = -1.0;
        assert_eq!(s.validate(), Err(SceneError::InvalidSite(1)));

        let mut s = tiny();
        s.sites[2].position.x = 5.0;
        assert_eq!(s.validate(), Err(SceneError::SiteOutsideBbox(2)));

        let mut s = tiny();
        s.adjacency[1] = 9;
        assert!(matches!(s.validate(), Err(SceneError::NeighborOutOfRange { .. })));
    }
}
