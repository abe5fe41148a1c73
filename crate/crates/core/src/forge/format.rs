//! FOAM binary scene files (little-endian).
//!
//! ```text
//! "FOAM" | u32 version = 1 | u32 n | u64 m | bbox min xyz, max xyz (6 x f32)
//! n x (position 3 x f32, density f32, rgb 3 x f32)
//! (n + 1) x u32 CSR offsets
//! m x u32 neighbor indices
//! ```

use crate::geometry::{Aabb, Site, Vec3};
use crate::scene::{Scene, SceneError};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const FOAM_MAGIC: [u8; 4] = *b"FOAM";
pub const FOAM_VERSION: u32 = 1;

const HEADER_BYTES: usize = 4 + 4 + 4 + 8 + 24;
const SITE_BYTES: usize = 28;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a FOAM file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported FOAM version {0} (expected {FOAM_VERSION})")]
    VersionMismatch(u32),
    #[error("file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("asymmetric adjacency: edge ({from},{to}) has no reverse")]
    AsymmetricAdjacency { from: usize, to: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(SceneError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SceneError> for FormatError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::AsymmetricAdjacency { from, to } => FormatError::AsymmetricAdjacency { from, to },
            other => FormatError::InvalidScene(other),
        }
    }
}

pub fn write_scene(scene: &Scene, mut w: impl Write) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(HEADER_BYTES + scene.len() * SITE_BYTES);
    buf.extend_from_slice(&FOAM_MAGIC);
    buf.extend_from_slice(&FOAM_VERSION.to_le_bytes());
    buf.extend_from_slice(&(scene.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(scene.adjacency.len() as u64).to_le_bytes());
    for v in scene.bbox.min.to_array().into_iter().chain(scene.bbox.max.to_array()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for s in &scene.sites {
        let fields = s.position.to_array().into_iter().chain([s.density]).chain(s.color);
        for v in fields {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    buf.clear();
    for chunk in [&scene.adjacency_offsets, &scene.adjacency] {
        for part in chunk.chunks(1 << 16) {
            buf.clear();
            part.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_scene(scene, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(FormatError::Truncated {
            needed: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u32_vec(&mut self, n: usize) -> Result<Vec<u32>, FormatError> {
        let bytes = self.take(n.checked_mul(4).ok_or(FormatError::Truncated {
            needed: usize::MAX,
            found: self.bytes.len(),
        })?)?;
        Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

/// Parses and validates a FOAM byte buffer.
pub fn read_scene(bytes: &[u8]) -> Result<Scene, FormatError> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() >= 4 && bytes[..4] != FOAM_MAGIC {
        return Err(FormatError::BadMagic);
    }
    if c.take(4)? != FOAM_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = c.u32()?;
    if version != FOAM_VERSION {
        return Err(FormatError::VersionMismatch(version));
    }
    let n = c.u32()? as usize;
    let m = c.u64()?;
    let m = usize::try_from(m).map_err(|_| FormatError::Truncated {
        needed: usize::MAX,
        found: bytes.len(),
    })?;
    let mut b = [0f32; 6];
    for v in &mut b {
        *v = c.f32()?;
    }
    let bbox = Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]));
    // Size check up front so a corrupt count cannot trigger a huge allocation.
    let needed = HEADER_BYTES as u128 + n as u128 * SITE_BYTES as u128 + (n as u128 + 1) * 4 + m as u128 * 4;
    if (bytes.len() as u128) < needed {
        return Err(FormatError::Truncated {
            needed: needed.min(usize::MAX as u128) as usize,
            found: bytes.len(),
        });
    }
    let mut sites = Vec::with_capacity(n);
    for _ in 0..n {
        let position = Vec3::new(c.f32()?, c.f32()?, c.f32()?);
        let density = c.f32()?;
        let color = [c.f32()?, c.f32()?, c.f32()?];
        sites.push(Site { position, density, color });
    }
    let offsets = c.u32_vec(n + 1)?;
    let adjacency = c.u32_vec(m)?;
    if c.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok(Scene::new(sites, offsets, adjacency, bbox)?)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, FormatError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_scene(&bytes)
}
