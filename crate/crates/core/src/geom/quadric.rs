use nalgebra::{DMatrix, DVector, Matrix2};

use super::{tangent_basis, Mesh, SurfaceHit};

/// Principal curvatures of the local quadric fit, `max >= min`.
///
/// Convex regions have positive curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvatures {
    pub max: f64,
    pub min: f64,
    /// Set when the neighborhood could not determine a quadric; both
    /// curvatures are then zero.
    pub rank_deficient: bool,
}

impl Curvatures {
    const DEFICIENT: Curvatures = Curvatures {
        max: 0.0,
        min: 0.0,
        rank_deficient: true,
    };

    /// `(max - min)²`, large on edges.
    pub fn edge_strength(&self) -> f64 {
        (self.max - self.min).powi(2)
    }
}

/// Fits `h = a x² + b xy + c y² + d x + e y + f` by least squares to the
/// vertices of every triangle sharing a vertex with the hit triangle, in a
/// tangent frame at the hit point, and returns the eigenvalues of the
/// Hessian. The height `h` is measured along the inward normal so that a
/// sphere of radius `r` yields `(1/r, 1/r)`.
pub fn local_quadric_curvatures(mesh: &Mesh, hit: &SurfaceHit) -> Curvatures {
    let tri = mesh.triangles()[hit.triangle];
    let mut verts: Vec<u32> = tri
        .iter()
        .flat_map(|&v| mesh.vertex_triangles(v as usize))
        .flat_map(|&t| mesh.triangles()[t as usize])
        .collect();
    verts.sort_unstable();
    verts.dedup();
    if verts.len() < 6 {
        return Curvatures::DEFICIENT;
    }

    let n = hit.normal;
    let (tx, ty) = tangent_basis(&n);
    let local: Vec<[f64; 3]> = verts
        .iter()
        .map(|&v| {
            let d = mesh.vertices()[v as usize] - hit.point;
            [d.dot(&tx), d.dot(&ty), -d.dot(&n)]
        })
        .collect();
    // scale to unit neighborhood size for conditioning
    let scale = local.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Curvatures::DEFICIENT;
    }
    let rows = local.len();
    let a = DMatrix::from_fn(rows, 6, |i, j| {
        let x = local[i][0] / scale;
        let y = local[i][1] / scale;
        match j {
            0 => x * x,
            1 => x * y,
            2 => y * y,
            3 => x,
            4 => y,
            _ => 1.0,
        }
    });
    let rhs = DVector::from_fn(rows, |i, _| local[i][2] / scale);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-9 * smax) {
        return Curvatures::DEFICIENT;
    }
    let Ok(coef) = svd.solve(&rhs, 0.0) else {
        return Curvatures::DEFICIENT;
    };
    // undo the scaling: second-order coefficients carry 1/scale
    let (qa, qb, qc) = (coef[0] / scale, coef[1] / scale, coef[2] / scale);
    let hess = Matrix2::new(2.0 * qa, qb, qb, 2.0 * qc);
    let eig = hess.symmetric_eigenvalues();
    Curvatures {
        max: eig[0].max(eig[1]),
        min: eig[0].min(eig[1]),
        rank_deficient: false,
    }
}
