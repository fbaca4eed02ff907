//! Triangle meshes and every geometric query the rest of the crate needs:
//! mass properties, ray casting, closest-point queries and local quadric
//! fitting.

mod bvh;
mod io;
mod mesh;
mod quadric;
pub mod shapes;

pub use bvh::{Bvh, Nearest};
pub use io::{load_mesh, parse_obj, parse_off, write_obj, write_off, MeshFormat};
pub use mesh::{mass_properties, Aabb, MassProperties, Mesh};
pub use quadric::{local_quadric_curvatures, Curvatures};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Triangles with less area than this are dropped at load time (m²).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;
/// Meshes enclosing less volume than this are rejected (m³).
pub const MIN_VOLUME: f64 = 1e-12;
/// Hits closer than this along a ray are ignored.
pub const RAY_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate mesh: |volume| = {volume:e} m³")]
    DegenerateMesh { volume: f64 },
    #[error("open surface: signed volume varies from {min:e} to {max:e} with the reference point")]
    OpenSurface { min: f64, max: f64 },
    #[error("unknown mesh format for {0}")]
    UnknownFormat(String),
}

/// A half-line with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    ///
    /// Panics if `direction` has zero length.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        let norm = direction.norm();
        assert!(norm > 0.0, "ray direction must be nonzero");
        Ray {
            origin,
            direction: direction / norm,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// An intersection between a ray and a mesh triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    pub triangle: usize,
    pub distance: f64,
    /// Outward unit normal of the hit triangle.
    pub normal: Vec3,
}

/// A unit vector orthogonal to `n`, picked by crossing with the coordinate
/// axis along which `n` has its smallest component.
pub fn orthogonal_unit(n: &Vec3) -> Vec3 {
    let a = n.map(f64::abs);
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - n * n.dot(&axis)).normalize()
}

/// Right-handed tangent basis `(t1, t2)` for the unit normal `n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let t1 = orthogonal_unit(n);
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Möller–Trumbore ray/triangle test. Returns the ray parameter of the hit.
#[inline]
pub(crate) fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    const EDGE_TOL: f64 = 1e-12;
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE_TOL || u + v > 1.0 + EDGE_TOL {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > RAY_EPSILON).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub(crate) fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
