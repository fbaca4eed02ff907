use super::bvh::{Bvh, Nearest};
use super::{GeomError, Mat3, Ray, SurfaceHit, Vec3, MIN_TRIANGLE_AREA, MIN_VOLUME};

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&Vec3::zeros()).sup(&(p - self.max));
        d.norm_squared()
    }

    /// Slab test; returns the parametric entry/exit interval clipped to
    /// `[0, t_max]`.
    #[inline]
    pub fn ray_interval(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let mut ta = (self.min[k] - origin[k]) * inv_dir[k];
            let mut tb = (self.max[k] - origin[k]) * inv_dir[k];
            if ta.is_nan() || tb.is_nan() {
                // origin on the slab plane with a zero direction component
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb * (1.0 + 2e-15));
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Volume, center of mass and inertia tensor of a closed mesh at unit
/// density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassProperties {
    pub volume: f64,
    pub center_of_mass: Vec3,
    /// About the center of mass.
    pub inertia: Mat3,
}

impl MassProperties {
    /// Moment of inertia about the line through `point` along `axis`.
    pub fn inertia_about_axis(&self, point: &Vec3, axis: &Vec3) -> f64 {
        let axis = axis.normalize();
        let r = self.center_of_mass - point;
        let d_sq = (r - axis * r.dot(&axis)).norm_squared();
        axis.dot(&(self.inertia * axis)) + self.volume * d_sq
    }
}

/// Signed volume and unnormalized first/second moments of the solid bounded
/// by `triangles`, integrated over tetrahedra fanned from `reference`.
fn moments(vertices: &[Vec3], triangles: &[[u32; 3]], reference: &Vec3) -> (f64, Vec3, Mat3) {
    let mut vol6 = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Mat3::zeros();
    for t in triangles {
        let a = vertices[t[0] as usize] - reference;
        let b = vertices[t[1] as usize] - reference;
        let c = vertices[t[2] as usize] - reference;
        let det = a.dot(&b.cross(&c));
        vol6 += det;
        let s = a + b + c;
        first += s * det;
        second +=
            (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * det;
    }
    (vol6 / 6.0, first / 24.0, second / 120.0)
}

/// Mass properties by signed-tetrahedron decomposition (unit density).
pub fn mass_properties(
    vertices: &[Vec3],
    triangles: &[[u32; 3]],
) -> Result<MassProperties, GeomError> {
    let reference = Aabb::from_points(vertices.iter()).center();
    let (volume, first, second) = moments(vertices, triangles, &reference);
    if volume.abs() < MIN_VOLUME {
        return Err(GeomError::DegenerateMesh { volume });
    }
    let com_rel = first / volume;
    let cov = second - com_rel * com_rel.transpose() * volume;
    let inertia = Mat3::identity() * cov.trace() - cov;
    Ok(MassProperties {
        volume,
        center_of_mass: com_rel + reference,
        inertia: (inertia + inertia.transpose()) * 0.5,
    })
}

/// Closed, outward-oriented triangle mesh with cached mass properties and a
/// bounding-volume hierarchy. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    mass: MassProperties,
    bbox: Aabb,
    bounding_radius: f64,
    bvh: Bvh,
    // CSR vertex -> incident triangles
    vt_offsets: Vec<u32>,
    vt_triangles: Vec<u32>,
}

impl Mesh {
    /// Validates and indexes a triangle soup.
    ///
    /// Drops zero-area triangles, rejects meshes that do not bound a volume,
    /// and flips the winding globally when the signed volume is negative.
    pub fn from_triangles(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Mesh, GeomError> {
        let n = vertices.len();
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(GeomError::Parse {
                line: 0,
                message: format!("vertex index {bad} out of range ({n} vertices)"),
            });
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(GeomError::Parse {
                line: 0,
                message: format!("non-finite vertex {v:?}"),
            });
        }
        let mut triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm() >= MIN_TRIANGLE_AREA
            })
            .collect();

        let bbox = Aabb::from_points(vertices.iter());
        check_closed(&vertices, &triangles, &bbox)?;

        let mut mass = mass_properties(&vertices, &triangles)?;
        if mass.volume < 0.0 {
            for t in &mut triangles {
                t.swap(1, 2);
            }
            mass = mass_properties(&vertices, &triangles)?;
        }

        let normals = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                (b - a).cross(&(c - a)).normalize()
            })
            .collect();

        // Only vertices referenced by a triangle count towards the bounds.
        let mut used = vec![false; n];
        for &i in triangles.iter().flatten() {
            used[i as usize] = true;
        }
        let bbox = Aabb::from_points(
            vertices
                .iter()
                .zip(&used)
                .filter(|(_, &u)| u)
                .map(|(v, _)| v),
        );
        let bounding_radius = vertices
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(v, _)| (v - mass.center_of_mass).norm())
            .fold(0.0, f64::max);

        let mut counts = vec![0u32; n + 1];
        for &i in triangles.iter().flatten() {
            counts[i as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut vt_triangles = vec![0u32; counts[n] as usize];
        for (ti, t) in triangles.iter().enumerate() {
            for &i in t {
                vt_triangles[fill[i as usize] as usize] = ti as u32;
                fill[i as usize] += 1;
            }
        }

        let bvh = Bvh::build(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            normals,
            mass,
            bbox,
            bounding_radius,
            bvh,
            vt_offsets: counts,
            vt_triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn mass_properties(&self) -> &MassProperties {
        &self.mass
    }

    pub fn volume(&self) -> f64 {
        self.mass.volume
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.mass.center_of_mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.mass.inertia
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Triangles incident to vertex `v`.
    pub fn vertex_triangles(&self, v: usize) -> &[u32] {
        &self.vt_triangles[self.vt_offsets[v] as usize..self.vt_offsets[v + 1] as usize]
    }

    /// Returns a copy with every vertex mapped through `f` (re-validated).
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Mesh, GeomError> {
        Mesh::from_triangles(
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }

    fn hit(&self, ray: &Ray, triangle: usize, t: f64) -> SurfaceHit {
        SurfaceHit {
            point: ray.at(t),
            triangle,
            distance: t,
            normal: self.normals[triangle],
        }
    }

    /// Nearest intersection along the ray.
    pub fn ray_first_hit(&self, ray: &Ray) -> Option<SurfaceHit> {
        self.bvh
            .first_hit(&self.vertices, &self.triangles, ray)
            .map(|(tri, t)| self.hit(ray, tri, t))
    }

    /// Farthest intersection along the ray.
    pub fn ray_farthest_hit(&self, ray: &Ray) -> Option<SurfaceHit> {
        self.bvh
            .farthest_hit(&self.vertices, &self.triangles, ray)
            .map(|(tri, t)| self.hit(ray, tri, t))
    }

    /// Closest surface point to `p`, if one lies within `max_dist`.
    pub fn nearest_point(&self, p: &Vec3, max_dist: f64) -> Option<Nearest> {
        self.bvh
            .nearest(&self.vertices, &self.triangles, p, max_dist)
    }

    /// Every intersection along the ray, unordered.
    pub fn ray_all_hits(&self, ray: &Ray) -> Vec<SurfaceHit> {
        let mut out = Vec::new();
        self.bvh
            .visit_hits(&self.vertices, &self.triangles, ray, &mut |tri, t| {
                out.push((tri, t))
            });
        out.into_iter()
            .map(|(tri, t)| self.hit(ray, tri, t))
            .collect()
    }
}

/// For a closed surface the signed volume does not depend on the apex used
/// for the tetrahedron fan; an open one does.
fn check_closed(vertices: &[Vec3], triangles: &[[u32; 3]], bbox: &Aabb) -> Result<(), GeomError> {
    if triangles.is_empty() {
        return Err(GeomError::DegenerateMesh { volume: 0.0 });
    }
    let c = bbox.center();
    let s = bbox.diagonal().max(1e-6);
    let refs = [
        c,
        c + Vec3::new(1.37, -0.71, 0.93) * s,
        c + Vec3::new(-0.53, 1.19, -1.41) * s,
    ];
    let vols: Vec<f64> = refs
        .iter()
        .map(|r| moments(vertices, triangles, r).0)
        .collect();
    let min = vols.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vols.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = vols.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale < MIN_VOLUME {
        return Err(GeomError::DegenerateMesh { volume: vols[0] });
    }
    if max - min > 0.01 * vols[0].abs().max(MIN_VOLUME) {
        return Err(GeomError::OpenSurface { min, max });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;
    use approx::assert_relative_eq;

    #[test]
    fn corner_cube_volume_and_com() {
        let m = shapes::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        assert_relative_eq!(m.volume(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.center_of_mass(), Vec3::repeat(0.5), epsilon = 1e-12);
    }

    #[test]
    fn centered_cube_inertia() {
        let m = shapes::cuboid(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let expected = Mat3::identity() / 6.0;
        assert!((m.inertia() - expected).abs().max() <= 1e-9);
        let shifted = m.map_vertices(|v| v + Vec3::new(10.0, 0.0, 0.0)).unwrap();
        assert!((shifted.inertia() - expected).abs().max() <= 1e-9);
        assert_relative_eq!(
            shifted.center_of_mass(),
            Vec3::new(10.0, 0.0, 0.0),
            epsilon = 1e-9
        );
    }

    #[test]
    fn inverted_winding_is_flipped() {
        let m = shapes::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let flipped: Vec<[u32; 3]> = m.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect();
        let m2 = Mesh::from_triangles(m.vertices().to_vec(), flipped).unwrap();
        assert_relative_eq!(m2.volume(), 1.0, epsilon = 1e-12);
        // top face normal points up
        let hit = m2
            .ray_first_hit(&Ray::new(Vec3::new(0.5, 0.5, 3.0), -Vec3::z()))
            .unwrap();
        assert_relative_eq!(hit.normal, Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn two_triangles_are_an_open_surface() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.2),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.1),
        ];
        let err = Mesh::from_triangles(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap_err();
        assert!(matches!(err, GeomError::OpenSurface { .. }), "{err:?}");
    }

    #[test]
    fn flat_closed_mesh_is_degenerate() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let err = Mesh::from_triangles(v, vec![[0, 1, 2], [0, 2, 1]]).unwrap_err();
        assert!(matches!(err, GeomError::DegenerateMesh { .. }), "{err:?}");
    }

    #[test]
    fn zero_area_triangles_dropped() {
        let m = shapes::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let mut tris = m.triangles().to_vec();
        tris.push([0, 0, 1]);
        let m2 = Mesh::from_triangles(m.vertices().to_vec(), tris).unwrap();
        assert_eq!(m2.triangles().len(), 12);
    }

    #[test]
    fn bounding_radius_covers_vertices() {
        let m = shapes::hammer();
        let c = m.center_of_mass();
        assert!(m
            .vertices()
            .iter()
            .all(|v| (v - c).norm() <= m.bounding_radius()));
    }

    #[test]
    fn inertia_is_spd() {
        for m in [
            shapes::hammer(),
            shapes::knife(),
            shapes::torus(0.1, 0.03, 32, 16),
        ] {
            let eig = m.inertia().symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > 0.0));
            assert!((m.inertia() - m.inertia().transpose()).abs().max() == 0.0);
        }
    }

    #[test]
    fn parallel_axis() {
        let m = shapes::cuboid(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let mp = m.mass_properties();
        assert_relative_eq!(
            mp.inertia_about_axis(&Vec3::zeros(), &Vec3::x()),
            1.0 / 6.0,
            epsilon = 1e-12
        );
        let shifted = mp.inertia_about_axis(&Vec3::new(0.0, 1.0, 0.0), &Vec3::x());
        assert_relative_eq!(shifted, 1.0 / 6.0 + 1.0, epsilon = 1e-12);
    }
}
