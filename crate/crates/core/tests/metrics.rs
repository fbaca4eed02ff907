mod common;

use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;
use tgqm::geom::{shapes, Mesh, Vec3};
use tgqm::hand::{execute_policy, Contact, Grasp, HandModel};
use tgqm::metrics::{
    compute_phi, effort_hold, effort_impact, epsilon_quality, force_to_use, EpsilonSettings,
    FrictionModel, MetricVector, MetricsConfig, UsePoint, WrenchSet,
};
use tgqm::pipeline::{direction_map, draw_sample};

fn meshes() -> [Mesh; 3] {
    [shapes::ball(), shapes::block(), shapes::hammer()]
}

/// A reached grasp and its use point from the sample stream.
fn sample(mesh: &Mesh, seed: u64) -> (Grasp, UsePoint) {
    let hand = HandModel::default();
    for i in 0.. {
        let (_, p0, d) = draw_sample(seed, 1, i);
        let g = execute_policy(mesh, &p0, &hand);
        if let (true, Ok(u)) = (g.reached_object, direction_map(mesh, &d)) {
            return (g, u);
        }
    }
    unreachable!()
}

fn transform_grasp(g: &Grasp, r: &Rotation3<f64>, t: &Vec3) -> Grasp {
    Grasp {
        pose: g.pose.transformed(r, t),
        contacts: g
            .contacts
            .iter()
            .map(|c| Contact {
                point: r * c.point + t,
                normal: r * c.normal,
                ..*c
            })
            .collect(),
        ..g.clone()
    }
}

fn transform_use(u: &UsePoint, r: &Rotation3<f64>, t: &Vec3) -> UsePoint {
    UsePoint {
        point: r * u.point + t,
        inward_normal: r * u.inward_normal,
        triangle: u.triangle,
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

fn ws_of(g: &Grasp, mesh: &Mesh, fm: &FrictionModel) -> WrenchSet {
    let contacts: Vec<(Vec3, Vec3)> = g.contacts.iter().map(|c| (c.point, c.normal)).collect();
    WrenchSet::from_contacts(
        &contacts,
        mesh.center_of_mass(),
        1.0 / mesh.bounding_radius(),
        fm,
    )
    .unwrap()
}

/// Rotations mapping coordinate axes onto signed coordinate axes.
fn axis_rotations() -> Vec<Matrix3<f64>> {
    let perms = [
        [0, 1, 2],
        [1, 2, 0],
        [2, 0, 1],
        [1, 0, 2],
        [0, 2, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8 {
            let m = Matrix3::from_fn(|r, c| {
                if p[r] == c {
                    if signs >> r & 1 == 1 {
                        -1.0f64
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            });
            if (m.determinant() - 1.0).abs() < 1e-12 {
                out.push(m);
            }
        }
    }
    out
}

#[test]
fn there_are_24_axis_rotations() {
    assert_eq!(axis_rotations().len(), 24);
}

#[test]
fn holding_efforts_permute_with_axis_rotations() {
    let cfg = MetricsConfig::default();
    let mesh = shapes::block();
    let (g, u) = sample(&mesh, 3);
    let base = compute_phi(&mesh, &g, &u, &cfg).unwrap().phi;
    let axes = [
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    for m in axis_rotations() {
        let r = Rotation3::from_matrix_unchecked(m);
        let t = Vec3::new(0.3, -1.2, 2.0);
        let moved = mesh.map_vertices(|p| r * p + t).unwrap();
        let phi = compute_phi(
            &moved,
            &transform_grasp(&g, &r, &t),
            &transform_use(&u, &r, &t),
            &cfg,
        )
        .unwrap()
        .phi;
        for (k, gk) in axes.iter().enumerate() {
            // gravity gk in the moved frame is r⁻¹ gk in the original one
            let back = r.inverse() * gk;
            let j = axes.iter().position(|a| (a - back).norm() < 1e-12).unwrap();
            assert!(
                close(phi.effort_hold[k], base.effort_hold[j], 1e-6),
                "{:?} vs {:?}",
                phi.effort_hold,
                base.effort_hold
            );
        }
    }
}

#[test]
fn miss_grasp_uses_no_contact_vector() {
    let mesh = shapes::hammer();
    let p0 = tgqm::hand::Pregrasp::from_array([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
    let g = execute_policy(&mesh, &p0, &HandModel::default());
    assert!(!g.reached_object && g.contacts.is_empty());
    let u = direction_map(&mesh, &tgqm::pipeline::UseDirection::from_array([0.0, 0.0])).unwrap();
    let phi = compute_phi(&mesh, &g, &u, &MetricsConfig::default())
        .unwrap()
        .phi;
    assert_eq!(phi.eps, 0.0);
    assert!(phi.effort_impact.is_infinite());
    assert!(phi.effort_hold.iter().all(|e| e.is_infinite()));
    assert_eq!((phi.discharge, phi.use_force), (0.0, 0.0));
    assert!(phi.use_geometry >= 0.0 && phi.inertia > 0.0);
}

fn invariants_hold(phi: &MetricVector) -> Result<(), TestCaseError> {
    prop_assert!((0.0..=1.0).contains(&phi.discharge));
    prop_assert!(phi.use_geometry >= 0.0);
    prop_assert!(phi.use_force >= 0.0);
    prop_assert!(phi.eps >= 0.0);
    prop_assert!(phi.inertia >= 0.0);
    prop_assert!(phi.effort_impact >= 0.0);
    prop_assert!(phi.effort_hold.iter().all(|e| *e >= 0.0));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_are_rigid_invariant(which in 0usize..3, seed in 0u64..1000, axis in prop::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1, t in prop::array::uniform3(-3.0f64..3.0)) {
        let mesh = meshes()[which].clone();
        let cfg = MetricsConfig::default();
        let (g, u) = sample(&mesh, seed);
        let a = Vec3::new(axis[0], axis[1], axis[2]);
        prop_assume!(a.norm() > 1e-3);
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(a), angle);
        let t = Vec3::new(t[0], t[1], t[2]);
        let moved = mesh.map_vertices(|p| r * p + t).unwrap();
        let p = compute_phi(&mesh, &g, &u, &cfg).unwrap().phi;
        let q = compute_phi(&moved, &transform_grasp(&g, &r, &t), &transform_use(&u, &r, &t), &cfg).unwrap().phi;
        prop_assert!(close(p.eps, q.eps, 1e-6) || p.eps.max(q.eps) < 1e-9, "eps {} {}", p.eps, q.eps);
        prop_assert!(close(p.effort_impact, q.effort_impact, 1e-6), "E_i {} {}", p.effort_impact, q.effort_impact);
        prop_assert!(close(p.use_force, q.use_force, 1e-6) || p.use_force.max(q.use_force) < 1e-9, "U_tau {} {}", p.use_force, q.use_force);
        prop_assert!(close(p.inertia, q.inertia, 1e-6));
        prop_assert!((p.discharge - q.discharge).abs() < 1e-6);
        invariants_hold(&p)?;
        invariants_hold(&q)?;
    }

    #[test]
    fn holding_efforts_are_translation_invariant(seed in 0u64..1000, t in prop::array::uniform3(-3.0f64..3.0)) {
        let mesh = shapes::ball();
        let cfg = MetricsConfig::default();
        let (g, u) = sample(&mesh, seed);
        let r = Rotation3::identity();
        let t = Vec3::new(t[0], t[1], t[2]);
        let moved = mesh.map_vertices(|p| p + t).unwrap();
        let p = compute_phi(&mesh, &g, &u, &cfg).unwrap().phi;
        let q = compute_phi(&moved, &transform_grasp(&g, &r, &t), &transform_use(&u, &r, &t), &cfg).unwrap().phi;
        for (a, b) in p.effort_hold.iter().zip(&q.effort_hold) {
            prop_assert!(close(*a, *b, 1e-6), "{a} {b}");
        }
    }

    #[test]
    fn impact_effort_vanishes_without_inertial_torque(which in 0usize..3, seed in 0u64..1000) {
        let mesh = meshes()[which].clone();
        let cfg = MetricsConfig { kappa: 0.0, ..MetricsConfig::default() };
        let (g, u) = sample(&mesh, seed);
        let phi = compute_phi(&mesh, &g, &u, &cfg).unwrap().phi;
        prop_assert_eq!(phi.effort_impact, 0.0);
    }

    #[test]
    fn refining_the_cone_is_monotone(which in 0usize..3, seed in 0u64..1000) {
        let mesh = meshes()[which].clone();
        let (g, u) = sample(&mesh, seed);
        let settings = EpsilonSettings::default();
        let coarse = ws_of(&g, &mesh, &FrictionModel { mu: 0.4, cone_edges: 8 });
        let fine = ws_of(&g, &mesh, &FrictionModel { mu: 0.4, cone_edges: 16 });
        let e8 = epsilon_quality(&coarse, &settings).epsilon;
        let e16 = epsilon_quality(&fine, &settings).epsilon;
        prop_assert!(e16 >= e8 * (1.0 - 1e-9), "{e8} -> {e16}");
        let h8 = effort_hold(&coarse).unwrap();
        let h16 = effort_hold(&fine).unwrap();
        for (a, b) in h8.iter().zip(&h16) {
            prop_assert!(*b <= *a * (1.0 + 1e-7) || a.is_infinite(), "{a} -> {b}");
        }
        let tau = Vec3::new(0.3, -0.2, 0.9) * 1e-4;
        let i8 = effort_impact(&coarse, &tau, &u.point, &u.inward_normal).unwrap();
        let i16 = effort_impact(&fine, &tau, &u.point, &u.inward_normal).unwrap();
        prop_assert!(i16 <= i8 * (1.0 + 1e-7) || i8.is_infinite(), "{i8} -> {i16}");
        let f8 = force_to_use(&coarse, &u.point, &u.inward_normal).unwrap();
        let f16 = force_to_use(&fine, &u.point, &u.inward_normal).unwrap();
        prop_assert!(f16 >= f8 * (1.0 - 1e-7) - 1e-12, "{f8} -> {f16}");
    }

    #[test]
    fn adding_a_contact_never_hurts(which in 0usize..3, seed in 0u64..1000, other in 0u64..1000) {
        let mesh = meshes()[which].clone();
        let (g, _) = sample(&mesh, seed);
        let (h, _) = sample(&mesh, other.wrapping_add(7919));
        let fm = FrictionModel::default();
        let mut more = g.clone();
        more.contacts.push(h.contacts[0]);
        let a = ws_of(&g, &mesh, &fm);
        let b = ws_of(&more, &mesh, &fm);
        let settings = EpsilonSettings::default();
        let ea = epsilon_quality(&a, &settings).epsilon;
        let eb = epsilon_quality(&b, &settings).epsilon;
        prop_assert!(eb >= ea * (1.0 - 1e-9), "{ea} -> {eb}");
        for (x, y) in effort_hold(&a).unwrap().iter().zip(&effort_hold(&b).unwrap()) {
            prop_assert!(x.is_infinite() || *y <= *x * (1.0 + 1e-7), "{x} -> {y}");
        }
    }

    #[test]
    fn frictionless_cone_ignores_edge_count(which in 0usize..3, seed in 0u64..1000, m in 4usize..40) {
        let mesh = meshes()[which].clone();
        let (g, u) = sample(&mesh, seed);
        let a = MetricsConfig { mu: 0.0, cone_edges: 4, ..MetricsConfig::default() };
        let b = MetricsConfig { mu: 0.0, cone_edges: m, ..MetricsConfig::default() };
        prop_assert_eq!(compute_phi(&mesh, &g, &u, &a).unwrap().phi, compute_phi(&mesh, &g, &u, &b).unwrap().phi);
        let ws = ws_of(&g, &mesh, &FrictionModel { mu: 0.0, cone_edges: m });
        prop_assert_eq!(ws.wrenches.len(), g.contacts.len());
    }

    #[test]
    fn efforts_match_independent_simplex(which in 0usize..3, seed in 0u64..1000) {
        let mesh = meshes()[which].clone();
        let (g, u) = sample(&mesh, seed);
        let ws = ws_of(&g, &mesh, &FrictionModel::default());
        let ours = effort_hold(&ws).unwrap();
        let theirs = common::hold_efforts(&ws.wrenches);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!(close(*a, *b, 1e-6), "{a} vs {b}");
        }
        let tau = Vec3::new(0.2, 0.5, -0.4) * 1e-3;
        let uw = ws.wrench_at(&u.point, &u.inward_normal);
        let ei = effort_impact(&ws, &tau, &u.point, &u.inward_normal).unwrap();
        let ei_oracle = common::impact_effort(&ws.wrenches, ws.torque_scale, tau, uw);
        prop_assert!(close(ei, ei_oracle, 1e-6), "{ei} vs {ei_oracle}");
        let edges: Vec<usize> = (0..ws.n_contacts).map(|c| ws.contact_of.iter().filter(|&&k| k == c).count()).collect();
        let ut = force_to_use(&ws, &u.point, &u.inward_normal).unwrap();
        let ut_oracle = common::use_force(&ws.wrenches, &edges, uw);
        prop_assert!(close(ut, ut_oracle, 1e-6) || ut.max(ut_oracle) < 1e-9, "{ut} vs {ut_oracle}");
    }
}
