//! OBJ scene of a grasp: the object, the palm and finger links as boxes,
//! and a small sphere on the use point, each in its own group.

use std::fmt::Write as _;

use crate::geom::Mesh;
use crate::geom::{orthogonal_unit, shapes, Vec3};
use crate::hand::{ContactSource, Grasp, HandModel};
use crate::metrics::UsePoint;

const MARKER_RADIUS: f64 = 0.004;
const PALM_THICKNESS: f64 = 0.01;

struct ObjWriter {
    text: String,
    next_vertex: usize,
}

impl ObjWriter {
    fn group(&mut self, name: &str, vertices: &[Vec3], triangles: &[[u32; 3]]) {
        let _ = writeln!(self.text, "g {name}");
        for v in vertices {
            let _ = writeln!(self.text, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z);
        }
        for t in triangles {
            let b = self.next_vertex + 1;
            let _ = writeln!(
                self.text,
                "f {} {} {}",
                t[0] as usize + b,
                t[1] as usize + b,
                t[2] as usize + b
            );
        }
        self.next_vertex += vertices.len();
    }
}

/// Box with the given center, orthonormal axes and half extents.
fn oriented_box(center: Vec3, axes: [Vec3; 3], half: [f64; 3]) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let unit = shapes::cuboid(Vec3::repeat(-1.0), Vec3::repeat(1.0));
    let vertices = unit
        .vertices()
        .iter()
        .map(|p| {
            center
                + axes[0] * (p.x * half[0])
                + axes[1] * (p.y * half[1])
                + axes[2] * (p.z * half[2])
        })
        .collect();
    (vertices, unit.triangles().to_vec())
}

fn link_box(a: Vec3, b: Vec3, radius: f64) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let axis = (b - a).normalize();
    let u = orthogonal_unit(&axis);
    let v = axis.cross(&u);
    oriented_box(
        (a + b) * 0.5,
        [u, v, axis],
        [radius, radius, 0.5 * (b - a).norm()],
    )
}

pub fn export_scene(
    mesh: &Mesh,
    grasp: &Grasp,
    use_point: Option<&UsePoint>,
    hand: &HandModel,
) -> String {
    let mut w = ObjWriter {
        text: String::from("# grasp scene\n"),
        next_vertex: 0,
    };
    w.group("object", mesh.vertices(), mesh.triangles());

    let pose = &grasp.pose;
    let axes = [
        pose.orientation * Vec3::x(),
        pose.orientation * Vec3::y(),
        pose.approach(),
    ];
    let palm_center = pose.to_world(&Vec3::new(0.0, 0.0, -0.5 * PALM_THICKNESS));
    let (v, t) = oriented_box(
        palm_center,
        axes,
        [hand.palm_radius, hand.palm_radius, 0.5 * PALM_THICKNESS],
    );
    w.group("palm", &v, &t);

    for (source, a, b) in hand.link_segments(grasp) {
        if let ContactSource::Link { finger, link } = source {
            let (v, t) = link_box(a, b, hand.link_radius);
            w.group(&format!("finger{finger}_link{link}"), &v, &t);
        }
    }

    if let Some(u) = use_point {
        let marker = shapes::icosphere(MARKER_RADIUS, 1);
        let v: Vec<Vec3> = marker.vertices().iter().map(|p| p + u.point).collect();
        w.group("use_point", &v, marker.triangles());
    }
    w.text
}
