//! The grasping policy: translate the open hand along the approach axis
//! until any part touches the object, then close each finger, proximal
//! joint first, each link stopping at its first contact or joint limit.
//!
//! Hand parts are tiled with proxy spheres and moved by conservative
//! advancement: every step is bounded by the current clearance, so no
//! proxy ever tunnels through the surface.

use super::{pregrasp_pose, Contact, ContactSource, Grasp, HandModel, HandPose, Pregrasp};
use crate::geom::{Mesh, Vec3};

/// Contacts closer than this are merged (m).
pub const MERGE_DISTANCE: f64 = 1e-3;
/// Distances closer than this (m) count as equal when ranking proxies.
const TIE_TOLERANCE: f64 = 1e-9;
/// At most this many contacts are kept per hand part.
pub const MAX_CONTACTS_PER_PART: usize = 4;
/// Contact tolerance as a fraction of the bounding radius.
pub const CONTACT_TOLERANCE: f64 = 1e-3;
const MAX_STEPS: usize = 1_000_000;

#[derive(Clone, Copy)]
struct Sphere {
    center: Vec3,
    radius: f64,
}

/// A hand part tiled by spheres, in world coordinates.
#[derive(Clone)]
struct Part {
    source: ContactSource,
    spheres: Vec<Sphere>,
    bound_center: Vec3,
    bound_radius: f64,
}

impl Part {
    fn new(source: ContactSource, spheres: Vec<Sphere>) -> Part {
        let n = spheres.len() as f64;
        let bound_center = spheres.iter().fold(Vec3::zeros(), |acc, s| acc + s.center) / n;
        let bound_radius = spheres
            .iter()
            .map(|s| (s.center - bound_center).norm() + s.radius)
            .fold(0.0, f64::max);
        Part {
            source,
            spheres,
            bound_center,
            bound_radius,
        }
    }

    fn translated(&self, t: &Vec3) -> Part {
        Part {
            source: self.source,
            spheres: self
                .spheres
                .iter()
                .map(|s| Sphere {
                    center: s.center + t,
                    radius: s.radius,
                })
                .collect(),
            bound_center: self.bound_center + t,
            bound_radius: self.bound_radius,
        }
    }
}

/// How parts move with the motion parameter: translation along `dir`, or
/// rotation about `axis` through `pivot`.
#[derive(Clone, Copy)]
enum Motion {
    Translate { dir: Vec3 },
    Rotate { pivot: Vec3, axis: Vec3 },
}

impl Motion {
    /// Upper bound on how far `p` moves per unit parameter.
    fn rate(&self, p: &Vec3) -> f64 {
        match self {
            Motion::Translate { .. } => 1.0,
            Motion::Rotate { pivot, .. } => (p - pivot).norm(),
        }
    }

    fn velocity(&self, p: &Vec3) -> Vec3 {
        match self {
            Motion::Translate { dir } => *dir,
            Motion::Rotate { pivot, axis } => axis.cross(&(p - pivot)),
        }
    }
}

/// Largest safe parameter increment for `parts` under `motion`, or the set
/// of parts already in contact.
enum Advance {
    Free(f64),
    Touching(Vec<usize>),
}

fn advance(mesh: &Mesh, parts: &[Part], motion: Motion, tol: f64) -> Advance {
    let mut best = f64::INFINITY;
    let mut touching = Vec::new();
    let mut fastest: f64 = 0.0;
    for (k, part) in parts.iter().enumerate() {
        let part_rate = motion.rate(&part.bound_center) + part.bound_radius;
        fastest = fastest.max(part_rate);
        // clearance below which this part could lower `best`
        let need = if best.is_finite() {
            best * part_rate + 0.5 * tol
        } else {
            f64::INFINITY
        };
        let Some(q) =
            mesh.nearest_point(&part.bound_center, need.max(tol) + 2.0 * part.bound_radius)
        else {
            continue;
        };
        let lower = q.distance - part.bound_radius;
        if lower > part.bound_radius {
            // far away: the bounding sphere alone is a valid clearance
            best = best.min((lower - 0.5 * tol) / part_rate);
            continue;
        }
        for s in &part.spheres {
            let rate = motion.rate(&s.center).max(1e-12);
            let need = if best.is_finite() {
                best * rate + 0.5 * tol
            } else {
                f64::INFINITY
            };
            let Some(q) = mesh.nearest_point(&s.center, need.max(tol) + s.radius) else {
                continue;
            };
            let c = q.distance - s.radius;
            if c <= tol {
                if touching.last() != Some(&k) {
                    touching.push(k);
                }
                continue;
            }
            best = best.min((c - 0.5 * tol) / rate);
        }
    }
    if !touching.is_empty() {
        return Advance::Touching(touching);
    }
    // each proxy has clearance above tol, so moving the fastest by tol is safe
    Advance::Free(best.max(tol / fastest.max(1e-12)))
}

/// Smallest proxy clearance within `reach`, with its rate of change under
/// `motion`.
fn closest_proxy(mesh: &Mesh, parts: &[Part], motion: Motion, reach: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for part in parts {
        if mesh
            .nearest_point(&part.bound_center, reach + part.bound_radius)
            .is_none()
        {
            continue;
        }
        for s in &part.spheres {
            let Some(q) = mesh.nearest_point(&s.center, reach + s.radius) else {
                continue;
            };
            let c = q.distance - s.radius;
            if best.is_none_or(|b| c < b.0) {
                let towards = if q.distance > 0.0 {
                    (q.point - s.center) / q.distance
                } else {
                    Vec3::zeros()
                };
                best = Some((c, -motion.velocity(&s.center).dot(&towards)));
            }
        }
    }
    best
}

/// Moves the motion parameter from a touching state `t` until the closest
/// proxy sits at exactly half the tolerance, so the final state does not
/// depend on the step history.
fn settle(
    mesh: &Mesh,
    parts_at: &dyn Fn(f64) -> Vec<Part>,
    motion: Motion,
    t: f64,
    t_max: f64,
    tol: f64,
) -> f64 {
    let target = 0.5 * tol;
    let mut t = t;
    for _ in 0..12 {
        let Some((c, dcdt)) = closest_proxy(mesh, &parts_at(t), motion, 2.0 * tol) else {
            break;
        };
        let gap = c - target;
        if gap.abs() <= 1e-12 || dcdt >= -1e-9 {
            break;
        }
        let next = (t - gap / dcdt).clamp(0.0, t_max);
        if next == t {
            break;
        }
        t = next;
    }
    t
}

/// Advances `t` from `t0` until a part touches or `t_max` is reached.
/// Returns the final parameter and the touching parts (empty if none).
fn sweep(
    mesh: &Mesh,
    parts_at: &dyn Fn(f64) -> Vec<Part>,
    motion_at: &dyn Fn(f64) -> Motion,
    t0: f64,
    t_max: f64,
    tol: f64,
) -> (f64, Vec<usize>) {
    let mut t = t0;
    for _ in 0..MAX_STEPS {
        let parts = parts_at(t);
        match advance(mesh, &parts, motion_at(t), tol) {
            Advance::Touching(_) => {
                let t = settle(mesh, parts_at, motion_at(t), t, t_max, tol);
                return match advance(mesh, &parts_at(t), motion_at(t), tol) {
                    Advance::Touching(which) => (t, which),
                    Advance::Free(_) => (t, Vec::new()),
                };
            }
            Advance::Free(step) => {
                if t >= t_max {
                    return (t, Vec::new());
                }
                t = (t + step).min(t_max);
            }
        }
    }
    (t, Vec::new())
}

/// Spheres every `proxy_spacing` (or closer) along a link of nominal
/// length `len`. The count comes from the nominal length so it cannot flip
/// with roundoff in world coordinates.
fn link_spheres(
    hand: &HandModel,
    len: f64,
    from: &Vec3,
    to: &Vec3,
    include_start: bool,
) -> Vec<Sphere> {
    let n = (len / hand.proxy_spacing - 1e-9).ceil().max(1.0) as usize;
    let first = if include_start { 0 } else { 1 };
    (first..=n)
        .map(|k| Sphere {
            center: from + (to - from) * (k as f64 / n as f64),
            radius: hand.link_radius,
        })
        .collect()
}

fn palm_part(hand: &HandModel, pose: &HandPose) -> Part {
    let s = hand.palm_proxy_spacing;
    let r = hand.palm_proxy_radius;
    let reach = hand.palm_radius - r;
    let n = (reach / s).floor() as i32;
    let mut spheres = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let local = Vec3::new(i as f64 * s, j as f64 * s, -r);
            if local.x.hypot(local.y) <= reach + 1e-12 {
                spheres.push(Sphere {
                    center: pose.to_world(&local),
                    radius: r,
                });
            }
        }
    }
    Part::new(ContactSource::Palm, spheres)
}

/// Link parts `[proximal, distal]` of finger `f` at closure `q`.
fn finger_parts(
    hand: &HandModel,
    pose: &HandPose,
    spread: f64,
    f: usize,
    q: [f64; 2],
) -> [Part; 2] {
    let frame = hand.finger_frames(spread)[f];
    let (b, k, t) = hand.finger_points(&frame, q);
    let (b, k, t) = (pose.to_world(&b), pose.to_world(&k), pose.to_world(&t));
    [
        Part::new(
            ContactSource::Link {
                finger: f as u8,
                link: 0,
            },
            link_spheres(hand, hand.link1, &b, &k, true),
        ),
        Part::new(
            ContactSource::Link {
                finger: f as u8,
                link: 1,
            },
            link_spheres(hand, hand.link2, &k, &t, false),
        ),
    ]
}

/// Runs the policy from the pregrasp pose decoded from `p0`.
pub fn execute_policy(mesh: &Mesh, p0: &Pregrasp, hand: &HandModel) -> Grasp {
    let pose = pregrasp_pose(p0, mesh, hand);
    execute_policy_from_pose(mesh, &pose, p0.spread_angle(), hand)
}

/// Runs the policy from an explicit pregrasp pose and spread angle.
///
/// The open hand is first pulled back by its finger reach so that the
/// fingertips start no closer to the object than the pregrasp wrist.
pub fn execute_policy_from_pose(
    mesh: &Mesh,
    pose: &HandPose,
    spread: f64,
    hand: &HandModel,
) -> Grasp {
    let radius = mesh.bounding_radius();
    let tol = CONTACT_TOLERANCE * radius;
    let dir = pose.approach();
    let retract = hand.reach();
    let limit = 4.0 * radius + retract;
    let miss = Grasp {
        pose: *pose,
        spread,
        joints: [[0.0; 2]; 3],
        contacts: Vec::new(),
        reached_object: false,
    };

    // phase 1: approach
    let start = pose.wrist - dir * retract;
    let mut open = vec![palm_part(hand, pose)];
    for f in 0..3 {
        open.extend(finger_parts(hand, pose, spread, f, [0.0, 0.0]));
    }
    let parts_at = |travel: f64| -> Vec<Part> {
        let shift = start - pose.wrist + dir * travel;
        open.iter().map(|p| p.translated(&shift)).collect()
    };
    let (travel, touching) = sweep(
        mesh,
        &parts_at,
        &|_| Motion::Translate { dir },
        0.0,
        limit,
        tol,
    );
    if touching.is_empty() {
        return miss;
    }
    let final_pose = HandPose {
        wrist: start + dir * travel,
        orientation: pose.orientation,
    };

    // phase 2: close each finger independently
    let mut joints = [[0.0; 2]; 3];
    for (f, q) in joints.iter_mut().enumerate() {
        *q = close_finger(mesh, hand, &final_pose, spread, f, tol);
    }

    let mut all = vec![palm_part(hand, &final_pose)];
    for (f, q) in joints.iter().enumerate() {
        all.extend(finger_parts(hand, &final_pose, spread, f, *q));
    }
    let contacts = collect_contacts(mesh, &all, tol);
    Grasp {
        pose: final_pose,
        spread,
        joints,
        contacts,
        reached_object: true,
    }
}

fn close_finger(
    mesh: &Mesh,
    hand: &HandModel,
    pose: &HandPose,
    spread: f64,
    f: usize,
    tol: f64,
) -> [f64; 2] {
    let frame = hand.finger_frames(spread)[f];
    let base = pose.to_world(&frame.base);
    let axis = pose.orientation * Vec3::z().cross(&frame.close);
    // proximal joint: both links swing about the base
    let (q0, touching) = sweep(
        mesh,
        &|t| finger_parts(hand, pose, spread, f, [t, 0.0]).to_vec(),
        &|_| Motion::Rotate { pivot: base, axis },
        0.0,
        hand.joint_limit,
        tol,
    );
    if !touching.is_empty() && !touching.contains(&0) {
        // the distal link blocks the whole finger
        return [q0, 0.0];
    }
    // distal joint about the knuckle
    let knuckle = pose.to_world(&hand.finger_points(&frame, [q0, 0.0]).1);
    let (q1, _) = sweep(
        mesh,
        &|t| {
            let [_, distal] = finger_parts(hand, pose, spread, f, [q0, t]);
            vec![distal]
        },
        &|_| Motion::Rotate {
            pivot: knuckle,
            axis,
        },
        0.0,
        hand.joint_limit,
        tol,
    );
    [q0, q1]
}

/// Touching proxies become contacts at their closest surface points; each
/// part keeps a well-spread subset and near-duplicates are merged.
fn collect_contacts(mesh: &Mesh, parts: &[Part], tol: f64) -> Vec<Contact> {
    let mut out: Vec<Contact> = Vec::new();
    for part in parts {
        let mut cands: Vec<(f64, Contact)> = Vec::new();
        for s in &part.spheres {
            if let Some(q) = mesh.nearest_point(&s.center, s.radius + tol) {
                cands.push((
                    q.distance - s.radius,
                    Contact {
                        point: q.point,
                        normal: mesh.normals()[q.triangle],
                        triangle: q.triangle,
                        source: part.source,
                    },
                ));
            }
        }
        if cands.is_empty() {
            continue;
        }
        // farthest-point selection seeded by the deepest proxy; near-ties go
        // to the lower proxy index so roundoff cannot flip the choice
        let mut seed = 0;
        for i in 1..cands.len() {
            if cands[i].0 < cands[seed].0 - TIE_TOLERANCE {
                seed = i;
            }
        }
        let mut chosen = vec![cands[seed].1];
        while chosen.len() < MAX_CONTACTS_PER_PART {
            let mut pick: Option<(usize, f64)> = None;
            for (i, (_, c)) in cands.iter().enumerate() {
                let d = chosen
                    .iter()
                    .map(|s| (s.point - c.point).norm())
                    .fold(f64::INFINITY, f64::min);
                if pick.is_none_or(|(_, best)| d > best + TIE_TOLERANCE) {
                    pick = Some((i, d));
                }
            }
            match pick {
                Some((i, d)) if d >= MERGE_DISTANCE => chosen.push(cands[i].1),
                _ => break,
            }
        }
        for c in chosen {
            if out
                .iter()
                .all(|o| (o.point - c.point).norm() >= MERGE_DISTANCE)
            {
                out.push(c);
            }
        }
    }
    out
}
