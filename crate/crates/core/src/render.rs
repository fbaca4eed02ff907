//! Camera-in-hand range images, point clouds and the GRIM raster format.
//!
//! Camera frame: the hand frame of the pregrasp pose, `+z` along the
//! approach. Pixel `(row i, column j)` looks along
//! `(t·aspect·(2(j+½)/w − 1), t·(2(i+½)/h − 1), 1)` with `t = tan(fov/2)`,
//! and its depth is the `z` of the first hit.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Mesh, Ray, Vec3};
use crate::hand::{pregrasp_pose, HandModel, HandPose, Pregrasp};

pub const GRIM_MAGIC: &[u8; 4] = b"GRIM";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed GRIM raster: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraParams {
    pub width: u32,
    pub height: u32,
    /// Vertical field of view in degrees.
    pub fov_deg: f64,
    /// Standard deviation of additive depth noise (m); zero disables it.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for CameraParams {
    fn default() -> Self {
        CameraParams {
            width: 128,
            height: 128,
            fov_deg: 60.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl CameraParams {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width < 8 || self.height < 8 {
            return Err(RenderError::Camera(format!(
                "image {}x{} smaller than 8x8",
                self.width, self.height
            )));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(RenderError::Camera(format!(
                "fov {}° outside (0°, 180°)",
                self.fov_deg
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(RenderError::Camera(format!(
                "noise sigma {} must be finite and nonnegative",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    fn tan_half(&self) -> f64 {
        (0.5 * self.fov_deg.to_radians()).tan()
    }

    fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// Camera-frame direction (unnormalized, `z = 1`) through a pixel
    /// position; pixel centers sit at half-integers.
    pub fn pixel_ray(&self, row: f64, col: f64) -> Vec3 {
        let t = self.tan_half();
        Vec3::new(
            t * self.aspect() * (2.0 * col / self.width as f64 - 1.0),
            t * (2.0 * row / self.height as f64 - 1.0),
            1.0,
        )
    }

    pub fn unproject(&self, row: usize, col: usize, depth: f64) -> Vec3 {
        self.pixel_ray(row as f64 + 0.5, col as f64 + 0.5) * depth
    }

    /// Continuous `(row, col)` of a camera-frame point in front of the camera.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        let t = self.tan_half();
        let col = (p.x / p.z / (t * self.aspect()) + 1.0) * 0.5 * self.width as f64;
        let row = (p.y / p.z / t + 1.0) * 0.5 * self.height as f64;
        (row, col)
    }
}

/// Depths in meters along the optical axis, row-major; `+∞` is background.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeImage {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    /// Camera center and orientation (third column = optical axis).
    pub camera: HandPose,
}

impl RangeImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.width as usize + col]
    }

    pub fn finite_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Camera pose for a pregrasp: the pregrasp hand orientation, centered one
/// bounding-box diagonal before the center of mass along the approach,
/// keeping the pregrasp's lateral offset.
pub fn camera_pose(mesh: &Mesh, p0: &Pregrasp) -> HandPose {
    let hand = pregrasp_pose(p0, mesh, &HandModel::default());
    let a = hand.approach();
    let com = mesh.center_of_mass();
    let rel = hand.wrist - com;
    let lateral = rel - a * rel.dot(&a);
    HandPose {
        wrist: com + lateral - a * mesh.bbox().diagonal(),
        orientation: hand.orientation,
    }
}

pub fn render_depth(
    mesh: &Mesh,
    p0: &Pregrasp,
    cam: &CameraParams,
) -> Result<RangeImage, RenderError> {
    render_from(mesh, &camera_pose(mesh, p0), cam)
}

/// Renders from an explicit camera pose. The mesh is moved into the
/// camera frame first, so the image depends only on relative geometry.
pub fn render_from(
    mesh: &Mesh,
    camera: &HandPose,
    cam: &CameraParams,
) -> Result<RangeImage, RenderError> {
    cam.validate()?;
    let inv = camera.orientation.inverse();
    let local = mesh
        .map_vertices(|v| inv * (v - camera.wrist))
        .expect("a rigid motion keeps the mesh valid");
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut depth = vec![f64::INFINITY; w * h];
    for i in 0..h {
        for j in 0..w {
            let dir = cam.pixel_ray(i as f64 + 0.5, j as f64 + 0.5);
            if let Some(hit) = local.ray_first_hit(&Ray::new(Vec3::zeros(), dir)) {
                depth[i * w + j] = hit.point.z;
            }
        }
    }
    if cam.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cam.noise_sigma).expect("validated sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(cam.noise_seed);
        for d in depth.iter_mut().filter(|d| d.is_finite()) {
            // keep depths in front of the camera
            *d = (*d + normal.sample(&mut rng)).max(f64::MIN_POSITIVE);
        }
    }
    Ok(RangeImage {
        width: cam.width,
        height: cam.height,
        depth,
        camera: *camera,
    })
}

/// Exactly `n` camera-frame points: unprojected finite pixels, subsampled
/// without replacement (seeded) when there are more than `n`, padded with
/// the origin when fewer.
pub fn depth_to_cloud(img: &RangeImage, cam: &CameraParams, n: usize, seed: u64) -> Vec<Vec3> {
    let w = img.width as usize;
    let mut points: Vec<Vec3> = img
        .depth
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(k, &d)| cam.unproject(k / w, k % w, d))
        .collect();
    if points.len() > n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = sample(&mut rng, points.len(), n).into_vec();
        keep.sort_unstable();
        points = keep.into_iter().map(|k| points[k]).collect();
    }
    points.resize(n, Vec3::zeros());
    points
}

pub fn encode_grim(img: &RangeImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * img.depth.len());
    out.extend_from_slice(GRIM_MAGIC);
    out.extend_from_slice(&img.width.to_le_bytes());
    out.extend_from_slice(&img.height.to_le_bytes());
    for d in &img.depth {
        out.extend_from_slice(&(*d as f32).to_le_bytes());
    }
    out
}

/// Width, height and row-major depths of a GRIM raster.
pub fn decode_grim(mut bytes: &[u8]) -> Result<(u32, u32, Vec<f32>), RenderError> {
    let mut head = [0u8; 12];
    bytes
        .read_exact(&mut head)
        .map_err(|_| RenderError::Format("shorter than the 12-byte header".into()))?;
    if &head[..4] != GRIM_MAGIC {
        return Err(RenderError::Format("bad magic".into()));
    }
    let w = u32::from_le_bytes(head[4..8].try_into().unwrap());
    let h = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let n = w as usize * h as usize;
    if bytes.len() != 4 * n {
        return Err(RenderError::Format(format!(
            "{w}x{h} raster needs {} bytes, found {}",
            4 * n,
            bytes.len()
        )));
    }
    let depth = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, depth))
}

pub fn write_grim(img: &RangeImage, path: &Path) -> Result<(), RenderError> {
    std::fs::write(path, encode_grim(img)).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_grim(path: &Path) -> Result<(u32, u32, Vec<f32>), RenderError> {
    let bytes = std::fs::read(path).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_grim(&bytes)
}

/// 16-bit binary PGM for viewing: background is 0, the nearest finite
/// depth 65535 and the farthest 1, linear in between.
pub fn encode_pgm(img: &RangeImage) -> Vec<u8> {
    let finite = img.depth.iter().copied().filter(|d| d.is_finite());
    let near = finite.clone().fold(f64::INFINITY, f64::min);
    let far = finite.fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for &d in &img.depth {
        let v: u16 = if !d.is_finite() {
            0
        } else if far > near {
            (1.0 + (far - d) / (far - near) * 65534.0).round() as u16
        } else {
            65535
        };
        out.write_all(&v.to_be_bytes()).unwrap();
    }
    out
}
