//! Procedural closed meshes: primitives for tests and the bundled tool set.
//!
//! All dimensions are meters. Compound tools are built from several closed
//! shells that touch but do not overlap, so signed-volume integration stays
//! exact.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mass_properties, Mesh, Vec3};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "hammer",
    "knife",
    "bottle",
    "sword",
    "screwdriver",
    "axe",
    "glass",
    "ball",
    "block",
];

/// One of the bundled tool meshes, by name.
pub fn builtin(name: &str) -> Option<Mesh> {
    Some(match name {
        "hammer" => hammer(),
        "knife" => knife(),
        "bottle" => bottle(),
        "sword" => sword(),
        "screwdriver" => screwdriver(),
        "axe" => axe(),
        "glass" => glass(),
        "ball" => ball(),
        "block" => block(),
        _ => return None,
    })
}

#[derive(Default)]
struct Shell {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl Shell {
    fn append(&mut self, other: Shell) {
        let base = self.vertices.len() as u32;
        // each shell is oriented on its own before merging
        let flip =
            mass_properties(&other.vertices, &other.triangles).map_or(false, |m| m.volume < 0.0);
        self.vertices.extend(other.vertices);
        self.triangles.extend(other.triangles.into_iter().map(|t| {
            let t = t.map(|i| i + base);
            if flip {
                [t[0], t[2], t[1]]
            } else {
                t
            }
        }));
    }

    fn into_mesh(self) -> Mesh {
        Mesh::from_triangles(self.vertices, self.triangles).expect("procedural mesh is closed")
    }
}

fn compound(shells: Vec<Shell>) -> Mesh {
    let mut all = Shell::default();
    for s in shells {
        all.append(s);
    }
    all.into_mesh()
}

/// Skins a sequence of closed cross-section polygons (equal vertex counts)
/// and caps both ends with a fan around the section centroid.
fn loft(profiles: &[Vec<Vec3>]) -> Shell {
    let k = profiles[0].len();
    assert!(profiles.iter().all(|p| p.len() == k) && profiles.len() >= 2 && k >= 3);
    let mut s = Shell::default();
    for p in profiles {
        s.vertices.extend_from_slice(p);
    }
    let idx = |ring: usize, j: usize| (ring * k + j % k) as u32;
    for ring in 0..profiles.len() - 1 {
        for j in 0..k {
            let (a, b, c, d) = (
                idx(ring, j),
                idx(ring, j + 1),
                idx(ring + 1, j + 1),
                idx(ring + 1, j),
            );
            s.triangles.push([a, b, c]);
            s.triangles.push([a, c, d]);
        }
    }
    for (ring, rev) in [(0, true), (profiles.len() - 1, false)] {
        let centroid = profiles[ring].iter().sum::<Vec3>() / k as f64;
        let ci = s.vertices.len() as u32;
        s.vertices.push(centroid);
        for j in 0..k {
            let (a, b) = (idx(ring, j), idx(ring, j + 1));
            s.triangles.push(if rev { [ci, b, a] } else { [ci, a, b] });
        }
    }
    s
}

/// Box with each face split into an `n`×`n` grid.
fn box_shell(min: Vec3, max: Vec3, n: usize) -> Shell {
    let n = n.max(1);
    let mut s = Shell::default();
    let mut lookup: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vid = |s: &mut Shell, g: [usize; 3]| -> u32 {
        *lookup.entry(g).or_insert_with(|| {
            let f = |k: usize| min[k] + (max[k] - min[k]) * g[k] as f64 / n as f64;
            s.vertices.push(Vec3::new(f(0), f(1), f(2)));
            (s.vertices.len() - 1) as u32
        })
    };
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for i in 0..n {
                for j in 0..n {
                    let mut g = [[0usize; 3]; 4];
                    for (c, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                        g[c][axis] = side;
                        g[c][u] = i + di;
                        g[c][v] = j + dj;
                    }
                    let q = g.map(|gc| vid(&mut s, gc));
                    // (u, v, axis) is right-handed, so this winding faces +axis
                    if side == n {
                        s.triangles.push([q[0], q[1], q[2]]);
                        s.triangles.push([q[0], q[2], q[3]]);
                    } else {
                        s.triangles.push([q[0], q[2], q[1]]);
                        s.triangles.push([q[0], q[3], q[2]]);
                    }
                }
            }
        }
    }
    s
}

pub fn cuboid(min: Vec3, max: Vec3) -> Mesh {
    box_shell(min, max, 1).into_mesh()
}

pub fn subdivided_box(min: Vec3, max: Vec3, n: usize) -> Mesh {
    box_shell(min, max, n).into_mesh()
}

fn ring(center: Vec3, u: Vec3, v: Vec3, ru: f64, rv: f64, segments: usize) -> Vec<Vec3> {
    (0..segments)
        .map(|j| {
            let a = TAU * j as f64 / segments as f64;
            center + u * (ru * a.cos()) + v * (rv * a.sin())
        })
        .collect()
}

/// Solid of revolution about +z from `(radius, z)` stations.
fn revolve(stations: &[(f64, f64)], segments: usize) -> Shell {
    let profiles: Vec<Vec<Vec3>> = stations
        .iter()
        .map(|&(r, z)| ring(Vec3::new(0.0, 0.0, z), Vec3::x(), Vec3::y(), r, r, segments))
        .collect();
    loft(&profiles)
}

/// Capped cylinder centered at the origin along z.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> Mesh {
    let stations: Vec<(f64, f64)> = (0..=rings.max(1))
        .map(|i| {
            (
                radius,
                -height / 2.0 + height * i as f64 / rings.max(1) as f64,
            )
        })
        .collect();
    revolve(&stations, segments).into_mesh()
}

pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Mesh {
    let mut s = Shell::default();
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            s.vertices
                .push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            s.triangles.push([a, b, c]);
            s.triangles.push([a, c, d]);
        }
    }
    s.into_mesh()
}

/// Geodesic sphere: icosahedron subdivided `level` times (20·4^level
/// triangles) and projected to radius `r`.
pub fn icosphere(r: f64, level: u32) -> Mesh {
    let s = icosphere_shell(level);
    Mesh::from_triangles(s.vertices.iter().map(|v| v * r).collect(), s.triangles)
        .expect("sphere is closed")
}

fn icosphere_shell(level: u32) -> Shell {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: u32, b: u32, vs: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vs.push(((vs[a as usize] + vs[b as usize]) * 0.5).normalize());
                (vs.len() - 1) as u32
            })
        };
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    Shell {
        vertices,
        triangles,
    }
}

/// Closed star-shaped blob: an icosphere whose radius varies smoothly with
/// direction by up to ±`amplitude`. Used as a generic non-convex test body.
pub fn star_blob(radius: f64, amplitude: f64, level: u32, seed: u64) -> Mesh {
    let s = icosphere_shell(level);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lobes: Vec<(Vec3, f64)> = (0..6)
        .map(|_| {
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            (d.normalize(), rng.random_range(-1.0..1.0))
        })
        .collect();
    let verts = s
        .vertices
        .iter()
        .map(|v| {
            let bump: f64 = lobes
                .iter()
                .map(|(d, w)| w * v.dot(d).max(0.0).powi(3))
                .sum::<f64>()
                / 6.0;
            v * radius * (1.0 + amplitude * bump.clamp(-1.0, 1.0))
        })
        .collect();
    Mesh::from_triangles(verts, s.triangles).expect("blob is closed")
}

/// Surface of a union of axis-aligned voxels of edge `size`.
pub fn voxel_solid(cells: &[[i32; 3]], size: f64) -> Mesh {
    let filled: std::collections::HashSet<[i32; 3]> = cells.iter().copied().collect();
    let mut s = Shell::default();
    let mut lookup: HashMap<[i32; 3], u32> = HashMap::new();
    let mut vid = |s: &mut Shell, g: [i32; 3]| -> u32 {
        *lookup.entry(g).or_insert_with(|| {
            s.vertices
                .push(Vec3::new(g[0] as f64, g[1] as f64, g[2] as f64) * size);
            (s.vertices.len() - 1) as u32
        })
    };
    let mut sorted: Vec<[i32; 3]> = filled.iter().copied().collect();
    sorted.sort();
    for c in sorted {
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for dir in [-1i32, 1] {
                let mut nb = c;
                nb[axis] += dir;
                if filled.contains(&nb) {
                    continue;
                }
                let side = if dir > 0 { c[axis] + 1 } else { c[axis] };
                let mut q = [[0i32; 3]; 4];
                for (k, (du, dv)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                    q[k][axis] = side;
                    q[k][u] = c[u] + du;
                    q[k][v] = c[v] + dv;
                }
                let q = q.map(|g| vid(&mut s, g));
                if dir > 0 {
                    s.triangles.push([q[0], q[1], q[2]]);
                    s.triangles.push([q[0], q[2], q[3]]);
                } else {
                    s.triangles.push([q[0], q[2], q[1]]);
                    s.triangles.push([q[0], q[3], q[2]]);
                }
            }
        }
    }
    s.into_mesh()
}

/// Elliptic grip along +x from `x0` to `x1`.
fn grip(x0: f64, x1: f64, ry: f64, rz: f64, stations: usize, segments: usize) -> Shell {
    let profiles: Vec<Vec<Vec3>> = (0..=stations)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / stations as f64;
            ring(
                Vec3::new(x, 0.0, 0.0),
                Vec3::y(),
                Vec3::z(),
                ry,
                rz,
                segments,
            )
        })
        .collect();
    loft(&profiles)
}

/// Single-edged blade along +x. The spine runs at `y = spine`, the cutting
/// edge at `y = spine - height(x)`; the section is a thin wedge.
fn blade(
    x0: f64,
    x1: f64,
    spine: f64,
    height: impl Fn(f64) -> f64,
    half_thickness: f64,
    stations: usize,
) -> Shell {
    const SIDE: usize = 6;
    let profiles: Vec<Vec<Vec3>> = (0..=stations)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / stations as f64;
            let h = height(x);
            let mut p = Vec::with_capacity(2 * SIDE + 1);
            p.push(Vec3::new(x, spine - h, 0.0));
            for k in 1..=SIDE {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, spine - h * (1.0 - f), half_thickness * f));
            }
            for k in (1..=SIDE).rev() {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, spine - h * (1.0 - f), -half_thickness * f));
            }
            p
        })
        .collect();
    loft(&profiles)
}

/// Claw-less hammer: a solid box head across the end of a long handle.
pub fn hammer() -> Mesh {
    compound(vec![
        grip(-0.28, 0.0, 0.014, 0.011, 14, 20),
        box_shell(
            Vec3::new(0.0, -0.055, -0.02),
            Vec3::new(0.04, 0.055, 0.02),
            6,
        ),
    ])
}

/// Kitchen knife: elliptic handle and a wedge blade tapering to a tip.
pub fn knife() -> Mesh {
    let length = 0.2;
    compound(vec![
        grip(-0.11, 0.0, 0.012, 0.009, 10, 16),
        blade(
            0.0,
            length,
            0.008,
            |x| {
                let taper_start = 0.14;
                if x < taper_start {
                    0.035
                } else {
                    0.035 - (0.035 - 0.004) * (x - taper_start) / (length - taper_start)
                }
            },
            0.00125,
            40,
        ),
    ])
}

pub fn bottle() -> Mesh {
    let stations = [
        (0.032, 0.0),
        (0.035, 0.004),
        (0.035, 0.05),
        (0.035, 0.1),
        (0.035, 0.15),
        (0.028, 0.17),
        (0.016, 0.19),
        (0.013, 0.2),
        (0.013, 0.23),
        (0.014, 0.235),
    ];
    revolve(&stations, 28).into_mesh()
}

pub fn glass() -> Mesh {
    let stations: Vec<(f64, f64)> = (0..=6)
        .map(|i| (0.029 + 0.008 * i as f64 / 6.0, 0.11 * i as f64 / 6.0))
        .collect();
    revolve(&stations, 28).into_mesh()
}

/// Palm-sized sphere.
pub fn ball() -> Mesh {
    icosphere(0.03, 3)
}

/// Palm-sized rectangular block.
pub fn block() -> Mesh {
    subdivided_box(
        Vec3::new(-0.025, -0.02, -0.02),
        Vec3::new(0.025, 0.02, 0.02),
        4,
    )
}

pub fn screwdriver() -> Mesh {
    let mut handle = revolve(
        &[
            (0.012, 0.0),
            (0.016, 0.01),
            (0.017, 0.05),
            (0.016, 0.09),
            (0.01, 0.1),
        ],
        18,
    );
    handle.append(revolve(
        &[(0.003, 0.1), (0.003, 0.15), (0.003, 0.19), (0.0015, 0.2)],
        10,
    ));
    handle.into_mesh()
}

/// Double-edged straight sword: blade, cross guard and grip.
pub fn sword() -> Mesh {
    let blade_len = 0.6;
    let half_h = 0.02;
    let edges = |x: f64| {
        let taper = 0.48;
        if x < taper {
            half_h
        } else {
            half_h - (half_h - 0.002) * (x - taper) / (blade_len - taper)
        }
    };
    // lens-shaped section: two wedges meeting at the central ridge
    const SIDE: usize = 5;
    let profiles: Vec<Vec<Vec3>> = (0..=48)
        .map(|i| {
            let x = blade_len * i as f64 / 48.0;
            let h = edges(x);
            let t = 0.003;
            let mut p = Vec::new();
            for k in 0..SIDE {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, -h + h * f, t * f));
            }
            for k in 0..SIDE {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, h * f, t * (1.0 - f)));
            }
            for k in 0..SIDE {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, h - h * f, -t * f));
            }
            for k in 0..SIDE {
                let f = k as f64 / SIDE as f64;
                p.push(Vec3::new(x, -h * f, -t * (1.0 - f)));
            }
            p
        })
        .collect();
    compound(vec![
        loft(&profiles),
        box_shell(
            Vec3::new(-0.025, -0.07, -0.012),
            Vec3::new(0.0, 0.07, 0.012),
            4,
        ),
        grip(-0.175, -0.025, 0.014, 0.012, 10, 16),
    ])
}

pub fn axe() -> Mesh {
    // wedge head: thick at the poll, thin at the bit
    let profiles: Vec<Vec<Vec3>> = (0..=8)
        .map(|i| {
            let x = -0.01 + 0.075 * i as f64 / 8.0;
            let mut p = Vec::new();
            let (y0, y1) = (-0.1, 0.025);
            for k in 0..=8 {
                let f = k as f64 / 8.0;
                let y = y0 + (y1 - y0) * f;
                p.push(Vec3::new(x, y, 0.0005 + 0.0145 * f));
            }
            for k in (0..=8).rev() {
                let f = k as f64 / 8.0;
                let y = y0 + (y1 - y0) * f;
                p.push(Vec3::new(x, y, -(0.0005 + 0.0145 * f)));
            }
            p
        })
        .collect();
    compound(vec![
        grip(-0.36, -0.01, 0.015, 0.011, 16, 18),
        loft(&profiles),
    ])
}
