//! Camera files: a full pinhole camera or a look-at shorthand, alone or in a
//! list.

use anyhow::{bail, Context, Result};
use foamsim::{Camera, Vec3};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CameraSpec {
    Full(Camera),
    Look {
        position: [f32; 3],
        forward: [f32; 3],
        up: [f32; 3],
        width: u32,
        height: u32,
        /// Horizontal field of view in degrees.
        hfov: f32,
    },
}

impl CameraSpec {
    pub fn camera(&self) -> Camera {
        match self {
            CameraSpec::Full(c) => c.clone(),
            CameraSpec::Look {
                position,
                forward,
                up,
                width,
                height,
                hfov,
            } => Camera::looking(
                Vec3::from_array(*position),
                Vec3::from_array(*forward),
                Vec3::from_array(*up),
                *width,
                *height,
                *hfov,
            ),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CameraFile {
    One(CameraSpec),
    Many(Vec<CameraSpec>),
}

pub fn parse_cameras(text: &str) -> Result<Vec<Camera>> {
    let specs = match serde_json::from_str::<CameraFile>(text).context("camera JSON")? {
        CameraFile::One(c) => vec![c],
        CameraFile::Many(v) => v,
    };
    if specs.is_empty() {
        bail!("camera list is empty");
    }
    let cams: Vec<Camera> = specs.iter().map(CameraSpec::camera).collect();
    for (i, c) in cams.iter().enumerate() {
        c.validate().with_context(|| format!("camera {i}"))?;
    }
    Ok(cams)
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_cameras(&text).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_and_list_forms() {
        let one = r#"{"position":[0.5,0.5,-1],"forward":[0,0,1],"up":[0,-1,0],"width":8,"height":6,"hfov":60}"#;
        assert_eq!(parse_cameras(one).unwrap().len(), 1);
        let full = serde_json::to_string(&parse_cameras(one).unwrap()[0]).unwrap();
        let list = format!("[{one},{full}]");
        let cams = parse_cameras(&list).unwrap();
        assert_eq!(cams[0], cams[1]);
        assert!(parse_cameras("[]").is_err());
        assert!(parse_cameras(r#"{"position":[0,0,0]}"#).is_err());
    }
}
