//! Simplified three-finger gripper, pregrasp encoding and the
//! approach-then-close grasping policy.
//!
//! Hand frame: `z'` is the approach direction, the palm is a disk in the
//! `x'y'` plane at the wrist, and the fingers extend along `+z'` when open.
//! The thumb sits at `-x'` and closes towards `+x'`; the two spread fingers
//! sit at `+x'` and rotate symmetrically about their bases by the spread
//! angle.

mod policy;

pub use policy::{execute_policy, execute_policy_from_pose};

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::geom::{orthogonal_unit, Mesh, Vec3};

/// The six-value policy input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pregrasp {
    /// `[-1, 1]` mapped to polar angle `[0, π]`.
    pub approach_theta: f64,
    /// `[-1, 1]` mapped to azimuth `[-π, π]`.
    pub approach_phi: f64,
    /// `[-1, 1]` mapped to `[-π, π]` about the approach axis.
    pub roll: f64,
    /// `[-1, 1]`, fraction of the projected bounding-box half-extent.
    pub offset_x: f64,
    pub offset_y: f64,
    /// `[0, 1]` mapped to a finger spread of `[0, π]`.
    pub spread: f64,
}

impl Pregrasp {
    pub fn from_array(a: [f64; 6]) -> Self {
        Pregrasp {
            approach_theta: a[0],
            approach_phi: a[1],
            roll: a[2],
            offset_x: a[3],
            offset_y: a[4],
            spread: a[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.approach_theta,
            self.approach_phi,
            self.roll,
            self.offset_x,
            self.offset_y,
            self.spread,
        ]
    }

    pub fn is_valid(&self) -> bool {
        let a = self.to_array();
        a[..5].iter().all(|x| (-1.0..=1.0).contains(x)) && (0.0..=1.0).contains(&a[5])
    }

    /// Unit approach direction `(sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn approach(&self) -> Vec3 {
        let theta = (self.approach_theta + 1.0) * 0.5 * PI;
        let phi = self.approach_phi * PI;
        Vec3::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        )
    }

    pub fn roll_angle(&self) -> f64 {
        self.roll * PI
    }

    pub fn spread_angle(&self) -> f64 {
        self.spread * PI
    }
}

/// Wrist position and hand orientation. The orientation maps hand-frame
/// axes to world axes; its third column is the approach direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandPose {
    pub wrist: Vec3,
    pub orientation: Rotation3<f64>,
}

impl HandPose {
    pub fn approach(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }

    /// The wrist roll axis coincides with the approach axis.
    pub fn roll_axis(&self) -> Vec3 {
        self.approach()
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.wrist + self.orientation * local
    }

    /// Applies a rigid motion `x ↦ r x + t` to the pose.
    pub fn transformed(&self, r: &Rotation3<f64>, t: &Vec3) -> HandPose {
        HandPose {
            wrist: r * self.wrist + t,
            orientation: r * self.orientation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactSource {
    Palm,
    Link { finger: u8, link: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub point: Vec3,
    /// Outward normal of the touched triangle.
    pub normal: Vec3,
    pub triangle: usize,
    pub source: ContactSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grasp {
    /// Final pose; the pregrasp pose when the object was missed.
    pub pose: HandPose,
    pub spread: f64,
    /// `[proximal, distal]` closure angles per finger (thumb first).
    pub joints: [[f64; 2]; 3],
    pub contacts: Vec<Contact>,
    pub reached_object: bool,
}

/// Geometry of the gripper. Lengths in meters, angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandModel {
    pub palm_radius: f64,
    pub link1: f64,
    pub link2: f64,
    #[serde(rename = "joint_limit_deg", with = "degrees")]
    pub joint_limit: f64,
    pub standoff_factor: f64,
    pub link_radius: f64,
    /// Radius of the proxy spheres tiling the palm face.
    pub palm_proxy_radius: f64,
    pub proxy_spacing: f64,
    pub palm_proxy_spacing: f64,
    /// Distance of the finger bases from the palm center.
    pub finger_base_radius: f64,
    /// Angular offset of the two spread fingers from `+x'`.
    pub finger_base_angle: f64,
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}

impl Default for HandModel {
    fn default() -> Self {
        HandModel {
            palm_radius: 0.05,
            link1: 0.07,
            link2: 0.055,
            joint_limit: 120f64.to_radians(),
            standoff_factor: 2.0,
            link_radius: 0.008,
            palm_proxy_radius: 0.0075,
            proxy_spacing: 0.005,
            palm_proxy_spacing: 0.01,
            finger_base_radius: 0.045,
            finger_base_angle: 0.6,
        }
    }
}

/// Per-finger kinematic frame in hand coordinates.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FingerFrame {
    pub base: Vec3,
    /// Unit closing direction in the palm plane.
    pub close: Vec3,
}

impl HandModel {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("palm_radius", self.palm_radius),
            ("link1", self.link1),
            ("link2", self.link2),
            ("link_radius", self.link_radius),
            ("palm_proxy_radius", self.palm_proxy_radius),
            ("proxy_spacing", self.proxy_spacing),
            ("palm_proxy_spacing", self.palm_proxy_spacing),
            ("standoff_factor", self.standoff_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.joint_limit > 0.0 && self.joint_limit <= PI) {
            return Err(format!(
                "joint limit {} rad outside (0, π]",
                self.joint_limit
            ));
        }
        Ok(())
    }

    /// Length of a fully extended finger.
    pub fn reach(&self) -> f64 {
        self.link1 + self.link2 + self.link_radius
    }

    /// Thumb, then the two spread fingers.
    pub(crate) fn finger_frames(&self, spread: f64) -> [FingerFrame; 3] {
        let b = self.finger_base_radius;
        let a = self.finger_base_angle;
        let rz = |angle: f64, v: Vec3| Rotation3::from_axis_angle(&Vec3::z_axis(), angle) * v;
        [
            FingerFrame {
                base: Vec3::new(-b, 0.0, 0.0),
                close: Vec3::x(),
            },
            FingerFrame {
                base: Vec3::new(b * a.cos(), b * a.sin(), 0.0),
                close: rz(0.5 * spread, -Vec3::x()),
            },
            FingerFrame {
                base: Vec3::new(b * a.cos(), -b * a.sin(), 0.0),
                close: rz(-0.5 * spread, -Vec3::x()),
            },
        ]
    }

    /// Hand-frame joint positions and link directions for closure angles
    /// `(θ1, θ2)`: `(base, knuckle, tip)`.
    pub(crate) fn finger_points(&self, f: &FingerFrame, q: [f64; 2]) -> (Vec3, Vec3, Vec3) {
        let d1 = Vec3::z() * q[0].cos() + f.close * q[0].sin();
        let s = q[0] + q[1];
        let d2 = Vec3::z() * s.cos() + f.close * s.sin();
        let knuckle = f.base + d1 * self.link1;
        (f.base, knuckle, knuckle + d2 * self.link2)
    }

    /// World-frame `(start, end)` of every finger link of a grasp.
    pub fn link_segments(&self, grasp: &Grasp) -> Vec<(ContactSource, Vec3, Vec3)> {
        let mut out = Vec::with_capacity(6);
        for (f, frame) in self.finger_frames(grasp.spread).iter().enumerate() {
            let (base, knuckle, tip) = self.finger_points(frame, grasp.joints[f]);
            let w = |p: Vec3| grasp.pose.to_world(&p);
            out.push((
                ContactSource::Link {
                    finger: f as u8,
                    link: 0,
                },
                w(base),
                w(knuckle),
            ));
            out.push((
                ContactSource::Link {
                    finger: f as u8,
                    link: 1,
                },
                w(knuckle),
                w(tip),
            ));
        }
        out
    }
}

/// The frame before roll: `x0` by the smallest-component rule, `y0 = a × x0`.
fn unrolled_frame(approach: &Vec3) -> (Vec3, Vec3) {
    let x0 = orthogonal_unit(approach);
    (x0, approach.cross(&x0))
}

/// Pose of the open hand before the approach: the wrist sits
/// `standoff_factor × bounding_radius` from the center of mass along
/// `-approach`, shifted in the plane across the approach by the offsets
/// times the bounding-box half-extents projected on that plane, and rolled
/// about the approach axis.
pub fn pregrasp_pose(p0: &Pregrasp, mesh: &Mesh, hand: &HandModel) -> HandPose {
    let a = p0.approach();
    let (x0, y0) = unrolled_frame(&a);
    let half = mesh.bbox().half_extents();
    let support = |u: &Vec3| u.x.abs() * half.x + u.y.abs() * half.y + u.z.abs() * half.z;
    let wrist = mesh.center_of_mass() - a * (hand.standoff_factor * mesh.bounding_radius())
        + x0 * (p0.offset_x * support(&x0))
        + y0 * (p0.offset_y * support(&y0));
    let r = p0.roll_angle();
    let x = x0 * r.cos() + y0 * r.sin();
    let y = a.cross(&x);
    let m = nalgebra::Matrix3::from_columns(&[x, y, a]);
    HandPose {
        wrist,
        orientation: Rotation3::from_matrix_unchecked(m),
    }
}

/// Rotation by `angle` about `axis` (unit), composed onto `pose`.
pub fn rolled(pose: &HandPose, angle: f64) -> HandPose {
    let axis = Unit::new_normalize(pose.approach());
    HandPose {
        wrist: pose.wrist,
        orientation: Rotation3::from_axis_angle(&axis, angle) * pose.orientation,
    }
}
