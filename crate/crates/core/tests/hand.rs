use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;
use tgqm::geom::{shapes, Mesh, Vec3};
use tgqm::hand::{
    execute_policy, execute_policy_from_pose, pregrasp_pose, ContactSource, HandModel, Pregrasp,
};

fn mesh(which: usize) -> Mesh {
    match which {
        0 => shapes::hammer(),
        1 => shapes::bottle(),
        2 => shapes::block(),
        _ => shapes::screwdriver(),
    }
}

fn pregrasp() -> impl Strategy<Value = Pregrasp> {
    (prop::array::uniform5(-1.0f64..=1.0), 0.0f64..=1.0)
        .prop_map(|(a, s)| Pregrasp::from_array([a[0], a[1], a[2], a[3], a[4], s]))
}

/// Distance from `p` to triangle `i`, by projection and edge clamping.
fn triangle_distance(m: &Mesh, i: usize, p: &Vec3) -> f64 {
    let [a, b, c] = m.triangle(i);
    let n = (b - a).cross(&(c - a)).normalize();
    let q = p - n * n.dot(&(p - a));
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (v - u).cross(&(q - u)).dot(&n) >= -1e-12);
    if inside {
        return (p - q).norm();
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|(u, v)| {
            let t = ((p - u).dot(&(v - u)) / (v - u).norm_squared()).clamp(0.0, 1.0);
            (p - (u + (v - u) * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn analytic_sphere_contacts() {
    // small enough to pass between the open fingers
    let r = 0.03;
    let m = shapes::icosphere(r, 5);
    let hand = HandModel::default();
    let mut checked = 0;
    for k in 0..20 {
        let t = k as f64 / 20.0;
        // zero lateral offset aims the approach through the center
        let p0 = Pregrasp::from_array([2.0 * t - 1.0, (5.0 * t).sin(), t - 0.5, 0.0, 0.0, t]);
        let g = execute_policy(&m, &p0, &hand);
        assert!(g.reached_object);
        assert!(
            g.contacts.iter().any(|c| c.source == ContactSource::Palm),
            "{k}: {:?}",
            g.contacts
        );
        for c in &g.contacts {
            assert!(((c.point - m.center_of_mass()).norm() - r).abs() < 1e-4);
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn policy_is_deterministic(which in 0usize..4, p0 in pregrasp()) {
        let m = mesh(which);
        let hand = HandModel::default();
        prop_assert_eq!(execute_policy(&m, &p0, &hand), execute_policy(&m, &p0, &hand));
    }

    #[test]
    fn contacts_sit_on_their_triangles(which in 0usize..4, p0 in pregrasp()) {
        let m = mesh(which);
        let g = execute_policy(&m, &p0, &HandModel::default());
        if !g.reached_object {
            prop_assert!(g.contacts.is_empty());
        }
        for c in &g.contacts {
            prop_assert!(triangle_distance(&m, c.triangle, &c.point) < 1e-4);
            prop_assert_eq!(c.normal, m.normals()[c.triangle]);
            prop_assert!((c.normal.norm() - 1.0).abs() < 1e-12);
        }
        for [q, d] in g.joints {
            prop_assert!(q >= 0.0 && d >= 0.0);
        }
    }

    #[test]
    fn policy_is_rigidly_equivariant(which in 0usize..4, p0 in pregrasp(), axis in prop::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1, t in prop::array::uniform3(-2.0f64..2.0)) {
        let m = mesh(which);
        let a = Vec3::new(axis[0], axis[1], axis[2]);
        prop_assume!(a.norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(a), angle);
        let shift = Vec3::new(t[0], t[1], t[2]);
        let moved = m.map_vertices(|v| rot * v + shift).unwrap();
        let hand = HandModel::default();
        let pose = pregrasp_pose(&p0, &m, &hand);
        let g = execute_policy_from_pose(&m, &pose, p0.spread_angle(), &hand);
        let h = execute_policy_from_pose(&moved, &pose.transformed(&rot, &shift), p0.spread_angle(), &hand);
        prop_assert_eq!(g.reached_object, h.reached_object);
        prop_assert_eq!(g.contacts.len(), h.contacts.len());
        for (x, y) in g.contacts.iter().zip(&h.contacts) {
            prop_assert!((rot * x.point + shift - y.point).norm() < 1e-6);
            // a contact on a shared edge may report either triangle
            prop_assert_eq!(x.source, y.source);
        }
    }
}
