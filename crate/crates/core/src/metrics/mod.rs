//! Grasp and task metrics: the ε quality, rotational inertia about the
//! wrist, holding and impact efforts, discharge alignment, force
//! transmission to the use point and local use-point geometry.

mod effort;
mod epsilon;
mod wrench;

pub use effort::{effort_hold, effort_impact, force_to_use, GRAVITY_DIRECTIONS};
pub use epsilon::{
    epsilon_quality, sphere_directions, support, EpsilonResult, EpsilonSettings, FORCE_CLOSURE_MIN,
};
pub use wrench::{FrictionModel, MetricsError, Wrench, WrenchSet};

use serde::{Deserialize, Serialize};

use crate::geom::{local_quadric_curvatures, Mesh, SurfaceHit, Vec3};
use crate::hand::{Grasp, HandPose};
use crate::lpsolve::LpError;

/// Which hand axis the wrist rotates about.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WristAxis {
    /// The approach axis.
    #[default]
    Roll,
    /// The hand's first lateral axis, across the approach.
    Pitch,
}

impl WristAxis {
    pub fn axis(&self, pose: &HandPose) -> Vec3 {
        match self {
            WristAxis::Roll => pose.roll_axis(),
            WristAxis::Pitch => pose.orientation * Vec3::x(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub mu: f64,
    pub cone_edges: usize,
    /// Inertial torque per unit rotational inertia.
    pub kappa: f64,
    pub epsilon_directions: usize,
    pub epsilon_refine_starts: usize,
    pub wrist_axis: WristAxis,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            mu: 0.4,
            cone_edges: 8,
            kappa: 1.0,
            epsilon_directions: 4096,
            epsilon_refine_starts: 32,
            wrist_axis: WristAxis::Roll,
        }
    }
}

impl MetricsConfig {
    pub fn friction(&self) -> FrictionModel {
        FrictionModel {
            mu: self.mu,
            cone_edges: self.cone_edges,
        }
    }

    pub fn epsilon_settings(&self) -> EpsilonSettings {
        EpsilonSettings {
            directions: self.epsilon_directions,
            refine_starts: self.epsilon_refine_starts,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.friction().validate().map_err(|e| e.to_string())?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(format!(
                "kappa must be finite and nonnegative, got {}",
                self.kappa
            ));
        }
        if self.epsilon_directions == 0 {
            return Err("epsilon_directions must be positive".into());
        }
        Ok(())
    }
}

/// Where the object is used, with the direction a use force pushes on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UsePoint {
    pub point: Vec3,
    pub inward_normal: Vec3,
    pub triangle: usize,
}

impl UsePoint {
    pub fn from_hit(hit: &SurfaceHit) -> UsePoint {
        UsePoint {
            point: hit.point,
            inward_normal: -hit.normal,
            triangle: hit.triangle,
        }
    }

    fn surface_hit(&self) -> SurfaceHit {
        SurfaceHit {
            point: self.point,
            triangle: self.triangle,
            distance: 0.0,
            normal: -self.inward_normal,
        }
    }
}

/// The twelve task metrics. Efforts may be `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub eps: f64,
    pub inertia: f64,
    pub effort_impact: f64,
    pub effort_hold: [f64; 6],
    pub discharge: f64,
    pub use_force: f64,
    pub use_geometry: f64,
}

pub const METRIC_NAMES: [&str; 12] = [
    "eps", "inertia", "e_i", "e_h_0", "e_h_1", "e_h_2", "e_h_3", "e_h_4", "e_h_5", "delta",
    "u_tau", "u_g",
];

impl MetricVector {
    pub fn to_array(&self) -> [f64; 12] {
        let h = self.effort_hold;
        [
            self.eps,
            self.inertia,
            self.effort_impact,
            h[0],
            h[1],
            h[2],
            h[3],
            h[4],
            h[5],
            self.discharge,
            self.use_force,
            self.use_geometry,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> MetricVector {
        MetricVector {
            eps: a[0],
            inertia: a[1],
            effort_impact: a[2],
            effort_hold: [a[3], a[4], a[5], a[6], a[7], a[8]],
            discharge: a[9],
            use_force: a[10],
            use_geometry: a[11],
        }
    }

    pub fn effort_hold_sum(&self) -> f64 {
        self.effort_hold.iter().sum()
    }
}

/// Metrics plus diagnostics that are not part of the vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiReport {
    pub phi: MetricVector,
    pub force_closure: bool,
    pub curvature_rank_deficient: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum PhiError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Contact wrenches about the center of mass, torques scaled by
/// `1 / bounding_radius`.
pub fn cone_wrenches(
    grasp: &Grasp,
    mesh: &Mesh,
    fm: &FrictionModel,
) -> Result<WrenchSet, MetricsError> {
    let contacts: Vec<(Vec3, Vec3)> = grasp.contacts.iter().map(|c| (c.point, c.normal)).collect();
    WrenchSet::from_contacts(
        &contacts,
        mesh.center_of_mass(),
        1.0 / mesh.bounding_radius(),
        fm,
    )
}

/// Unit-density inertia about the line through `point` along `axis`.
pub fn rotational_inertia(mesh: &Mesh, point: &Vec3, axis: &Vec3) -> f64 {
    mesh.mass_properties().inertia_about_axis(point, axis)
}

/// Alignment between the wrist axis and the torque a use push exerts about
/// the wrist, clipped at zero.
pub fn discharge_efficiency(axis: &Vec3, wrist: &Vec3, use_point: &UsePoint) -> f64 {
    let t = (use_point.point - wrist).cross(&use_point.inward_normal);
    let n = t.norm();
    if n < 1e-12 {
        return 0.0;
    }
    (axis.normalize().dot(&(t / n))).clamp(0.0, 1.0)
}

/// `(λ1 - λ2)²` of the local quadric at the use point, and whether the fit
/// was rank deficient.
pub fn use_geometry(mesh: &Mesh, use_point: &UsePoint) -> (f64, bool) {
    let c = local_quadric_curvatures(mesh, &use_point.surface_hit());
    (c.edge_strength(), c.rank_deficient)
}

/// Assembles the full metric vector. A grasp without contacts yields
/// `ε = 0`, infinite efforts and zero `δ`, `U_τ`.
pub fn compute_phi(
    mesh: &Mesh,
    grasp: &Grasp,
    use_point: &UsePoint,
    cfg: &MetricsConfig,
) -> Result<PhiReport, PhiError> {
    compute_phi_opt(mesh, grasp, Some(use_point), cfg)
}

/// As [`compute_phi`]; without a use point the use-dependent metrics are
/// `E_i = ∞` and `δ = U_τ = U_g = 0`.
pub fn compute_phi_opt(
    mesh: &Mesh,
    grasp: &Grasp,
    use_point: Option<&UsePoint>,
    cfg: &MetricsConfig,
) -> Result<PhiReport, PhiError> {
    let axis = cfg.wrist_axis.axis(&grasp.pose);
    let inertia = rotational_inertia(mesh, &grasp.pose.wrist, &axis);
    let (use_geometry, rank_deficient) = use_point.map_or((0.0, false), |u| use_geometry(mesh, u));
    if grasp.contacts.is_empty() {
        return Ok(PhiReport {
            phi: MetricVector {
                eps: 0.0,
                inertia,
                effort_impact: f64::INFINITY,
                effort_hold: [f64::INFINITY; 6],
                discharge: 0.0,
                use_force: 0.0,
                use_geometry,
            },
            force_closure: false,
            curvature_rank_deficient: rank_deficient,
        });
    }
    let ws = cone_wrenches(grasp, mesh, &cfg.friction())?;
    let eps = epsilon_quality(&ws, &cfg.epsilon_settings());
    let effort_hold = effort_hold(&ws)?;
    let (effort_impact, discharge, use_force) = match use_point {
        Some(u) => {
            let torque = axis * (cfg.kappa * inertia);
            (
                effort_impact(&ws, &torque, &u.point, &u.inward_normal)?,
                discharge_efficiency(&axis, &grasp.pose.wrist, u),
                force_to_use(&ws, &u.point, &u.inward_normal)?,
            )
        }
        None => (f64::INFINITY, 0.0, 0.0),
    };
    Ok(PhiReport {
        phi: MetricVector {
            eps: eps.epsilon,
            inertia,
            effort_impact,
            effort_hold,
            discharge,
            use_force,
            use_geometry,
        },
        force_closure: eps.force_closure,
        curvature_rank_deficient: rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{shapes, Ray};
    use crate::hand::{execute_policy, HandModel, Pregrasp};
    use approx::assert_relative_eq;

    fn use_at(mesh: &Mesh, dir: Vec3) -> UsePoint {
        UsePoint::from_hit(
            &mesh
                .ray_farthest_hit(&Ray::new(mesh.center_of_mass(), dir))
                .unwrap(),
        )
    }

    #[test]
    fn discharge_cases() {
        let wrist = Vec3::zeros();
        // (U - w) × n = x × y = z
        let u = UsePoint {
            point: Vec3::x(),
            inward_normal: Vec3::y(),
            triangle: 0,
        };
        assert_relative_eq!(
            discharge_efficiency(&Vec3::z(), &wrist, &u),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(discharge_efficiency(&-Vec3::z(), &wrist, &u), 0.0);
        assert_eq!(discharge_efficiency(&Vec3::x(), &wrist, &u), 0.0);
        let on_line = UsePoint {
            inward_normal: Vec3::x(),
            ..u
        };
        assert_eq!(discharge_efficiency(&Vec3::z(), &wrist, &on_line), 0.0);
    }

    #[test]
    fn inertia_central_and_shifted() {
        let m = shapes::cuboid(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        assert_relative_eq!(
            rotational_inertia(&m, &Vec3::zeros(), &Vec3::z()),
            1.0 / 6.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            rotational_inertia(&m, &Vec3::new(1.0, 0.0, 0.0), &Vec3::z()),
            1.0 / 6.0 + 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn use_geometry_on_cylinder_plane_and_sphere() {
        let r = 0.05;
        let cyl = shapes::cylinder(r, 0.4, 96, 32);
        let (ug, _) = use_geometry(&cyl, &use_at(&cyl, Vec3::new(1.0, 0.4, 0.05).normalize()));
        assert!((ug - 1.0 / (r * r)).abs() < 0.2 / (r * r), "{ug}");
        let sph = shapes::icosphere(r, 4);
        let (us, _) = use_geometry(&sph, &use_at(&sph, Vec3::new(0.2, -0.7, 0.3).normalize()));
        assert!(us < 1e-3 / (r * r), "{us}");
        let cube = shapes::subdivided_box(Vec3::repeat(-r), Vec3::repeat(r), 8);
        let (up, _) = use_geometry(&cube, &use_at(&cube, Vec3::new(1.0, 0.1, 0.05).normalize()));
        assert!(up < 1e-3 / (r * r), "{up}");
    }

    #[test]
    fn miss_uses_no_contact_convention() {
        let m = shapes::icosphere(0.05, 3);
        let hand = HandModel::default();
        let mut g = execute_policy(&m, &Pregrasp::from_array([0.0; 6]), &hand);
        g.contacts.clear();
        g.reached_object = false;
        let u = use_at(&m, Vec3::z());
        let r = compute_phi(&m, &g, &u, &MetricsConfig::default()).unwrap();
        assert_eq!(r.phi.eps, 0.0);
        assert!(r.phi.effort_impact.is_infinite());
        assert!(r.phi.effort_hold.iter().all(|e| e.is_infinite()));
        assert_eq!((r.phi.discharge, r.phi.use_force), (0.0, 0.0));
        assert!(r.phi.inertia > 0.0);
    }

    #[test]
    fn sphere_grasp_closure_and_determinism() {
        let m = shapes::icosphere(0.03, 4);
        let hand = HandModel::default();
        let g = execute_policy(
            &m,
            &Pregrasp::from_array([-0.3, 0.4, 0.2, 0.0, 0.0, 0.25]),
            &hand,
        );
        let u = use_at(&m, Vec3::new(0.3, 0.2, 0.9).normalize());
        let cfg = MetricsConfig::default();
        let a = compute_phi(&m, &g, &u, &cfg).unwrap();
        assert!(a.force_closure, "{a:?}");
        assert!(a.phi.eps > 0.0);
        assert!(a.phi.effort_hold.iter().all(|e| e.is_finite()));
        assert_eq!(compute_phi(&m, &g, &u, &cfg).unwrap(), a);
    }

    #[test]
    fn config_json_keys() {
        let c: MetricsConfig =
            serde_json::from_str(r#"{"mu": 0.5, "wrist_axis": "PITCH"}"#).unwrap();
        assert_eq!(c.mu, 0.5);
        assert_eq!(c.wrist_axis, WristAxis::Pitch);
        assert_eq!(c.cone_edges, 8);
        assert!(serde_json::from_str::<MetricsConfig>(r#"{"nu": 0.5}"#).is_err());
    }
}
