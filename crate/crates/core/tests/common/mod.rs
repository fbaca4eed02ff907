//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here calls into the solver or metric code
//! being checked.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type V3 = Vector3<f64>;

#[derive(Clone, Debug, PartialEq)]
pub enum Oracle {
    Optimal(f64, Vec<f64>),
    Infeasible,
    Unbounded,
}

impl Oracle {
    pub fn value(&self) -> f64 {
        match self {
            Oracle::Optimal(v, _) => *v,
            Oracle::Infeasible => f64::INFINITY,
            Oracle::Unbounded => f64::NEG_INFINITY,
        }
    }
}

/// Textbook two-phase tableau simplex with Bland's rule throughout:
/// `min cᵀx` subject to `A x = b`, `x ≥ 0`.
pub fn bland_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Oracle {
    let m = a.len();
    let n = c.len();
    let w = n + m + 1;
    let rhs = n + m;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            // rows are equilibrated so the fixed pivot tolerances mean the same thing in each
            let big = a[i].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let s = if big > 0.0 { 1.0 / big } else { 1.0 } * if b[i] < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![0.0; w];
            for j in 0..n {
                row[j] = s * a[i][j];
            }
            row[n + i] = 1.0;
            row[rhs] = s * b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut z = vec![0.0; w];
    for j in n..n + m {
        z[j] = 1.0;
    }
    for row in &t {
        for j in 0..w {
            z[j] -= row[j];
        }
    }
    if !run_bland(&mut t, &mut basis, &mut z, n + m, true) {
        unreachable!("phase one is bounded");
    }
    let scale = 1.0 + t.iter().map(|row| row[rhs]).sum::<f64>();
    if -z[rhs] > 1e-9 * scale {
        return Oracle::Infeasible;
    }
    // drive remaining artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= n {
            match (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => pivot(&mut t, &mut basis, &mut z, i, j),
                None => {
                    t.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut z = vec![0.0; w];
    z[..n].copy_from_slice(c);
    for (row, &bi) in t.iter().zip(&basis) {
        let cb = c[bi];
        for j in 0..w {
            z[j] -= cb * row[j];
        }
    }
    if !run_bland(&mut t, &mut basis, &mut z, n, false) {
        return Oracle::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (row, &bi) in t.iter().zip(&basis) {
        x[bi] = row[rhs];
    }
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Oracle::Optimal(value, x)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], z: &mut [f64], r: usize, col: usize) {
    let p = t[r][col];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r && row[col] != 0.0 {
            let f = row[col];
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
    let f = z[col];
    for (v, pv) in z.iter_mut().zip(&prow) {
        *v -= f * pv;
    }
    basis[r] = col;
}

/// Returns false when unbounded.
fn run_bland(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    z: &mut [f64],
    cols: usize,
    phase_one: bool,
) -> bool {
    let rhs = z.len() - 1;
    for _ in 0..100_000 {
        // phase one cannot be unbounded, so a column without a pivot there is round-off
        let Some(col) = (0..cols)
            .find(|&j| z[j] < -1e-10 && (!phase_one || t.iter().any(|row| row[j] > 1e-10)))
        else {
            return true;
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[col] > 1e-10 {
                let ratio = row[rhs] / row[col];
                let better = match best {
                    None => true,
                    Some((r, _, b)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && basis[i] < b),
                };
                if better {
                    best = Some((ratio, i, basis[i]));
                }
            }
        }
        let Some((_, r, _)) = best else {
            return false;
        };
        pivot(t, basis, z, r, col);
    }
    panic!("oracle simplex did not terminate");
}

/// Inequality row `aᵀx (rel) b` for the vertex oracle.
#[derive(Clone, Debug)]
pub struct Row {
    pub a: Vec<f64>,
    /// -1 for `≤`, 0 for `=`, 1 for `≥`.
    pub rel: i8,
    pub b: f64,
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

fn best_vertex(rows: &[Row], c: &[f64], box_bound: f64) -> Option<f64> {
    let n = c.len();
    let mut all: Vec<Row> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        all.push(Row {
            a: e.clone(),
            rel: 1,
            b: 0.0,
        });
        all.push(Row {
            a: e,
            rel: -1,
            b: box_bound,
        });
    }
    let eq: Vec<usize> = (0..all.len()).filter(|&i| all[i].rel == 0).collect();
    let mut combos = Vec::new();
    subsets(all.len(), n, 0, &mut Vec::new(), &mut combos);
    let mut best: Option<f64> = None;
    for s in combos {
        // a vertex makes every equality active, or n of them when there are more
        let active_eq = eq.iter().filter(|e| s.contains(e)).count();
        if active_eq < eq.len().min(n) {
            continue;
        }
        let a = DMatrix::from_fn(n, n, |r, k| all[s[r]].a[k]);
        let b = DVector::from_fn(n, |r, _| all[s[r]].b);
        let Some(x) = a.clone().lu().solve(&b) else {
            continue;
        };
        if (&a * &x - &b).amax() > 1e-9 * (1.0 + b.amax()) {
            continue;
        }
        let feasible = all.iter().all(|row| {
            let lhs: f64 = row.a.iter().zip(x.iter()).map(|(a, x)| a * x).sum();
            let tol = 1e-9
                * (1.0
                    + row.b.abs()
                    + row
                        .a
                        .iter()
                        .zip(x.iter())
                        .map(|(a, x)| (a * x).abs())
                        .sum::<f64>());
            match row.rel {
                -1 => lhs <= row.b + tol,
                1 => lhs >= row.b - tol,
                _ => (lhs - row.b).abs() <= tol,
            }
        });
        if feasible {
            let v: f64 = c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// `min cᵀx` over `x ≥ 0` and `rows` by enumerating every basic solution.
/// Unboundedness shows up as an optimum that keeps improving when an
/// artificial box is enlarged.
pub fn vertex_enumeration_min(rows: &[Row], c: &[f64]) -> Oracle {
    let near = best_vertex(rows, c, 1e7);
    let far = best_vertex(rows, c, 1e9);
    match (near, far) {
        (None, _) | (_, None) => Oracle::Infeasible,
        (Some(a), Some(b)) => {
            if (a - b).abs() > 1e-6 * (1.0 + a.abs()) {
                Oracle::Unbounded
            } else {
                Oracle::Optimal(a, Vec::new())
            }
        }
    }
}

/// Primitive wrenches of a linearized cone, built from scratch.
pub fn cone_wrenches(
    contacts: &[(V3, V3)],
    center: V3,
    scale: f64,
    mu: f64,
    m: usize,
) -> Vec<[f64; 6]> {
    let mut out = Vec::new();
    for (p, n) in contacts {
        let n = n.normalize();
        let helper = if n.x.abs() < 0.9 { V3::x() } else { V3::y() };
        let t1 = n.cross(&helper).normalize();
        let t2 = n.cross(&t1);
        let edges: Vec<V3> = if mu == 0.0 {
            vec![-n]
        } else {
            (0..m)
                .map(|j| {
                    let a = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
                    -n + (t1 * a.cos() + t2 * a.sin()) * mu
                })
                .collect()
        };
        for f in edges {
            let t = (p - center).cross(&f) * scale;
            out.push([f.x, f.y, f.z, t.x, t.y, t.z]);
        }
    }
    out
}

pub fn wrench_of(center: V3, scale: f64, p: V3, f: V3) -> [f64; 6] {
    let t = (p - center).cross(&f) * scale;
    [f.x, f.y, f.z, t.x, t.y, t.z]
}

fn equality_rows(w: &[[f64; 6]]) -> Vec<Vec<f64>> {
    (0..6).map(|r| w.iter().map(|wk| wk[r]).collect()).collect()
}

/// `min Σ α` with `Σ α_k w_k + Σ β extra = target`.
pub fn min_force_sum(w: &[[f64; 6]], extra: &[[f64; 6]], target: [f64; 6]) -> f64 {
    let mut all: Vec<[f64; 6]> = w.to_vec();
    all.extend_from_slice(extra);
    let mut c = vec![1.0; w.len()];
    c.extend(std::iter::repeat_n(0.0, extra.len()));
    bland_min(&equality_rows(&all), &target, &c).value()
}

pub fn hold_efforts(w: &[[f64; 6]]) -> [f64; 6] {
    let g = [
        [1., 0., 0.],
        [-1., 0., 0.],
        [0., 1., 0.],
        [0., -1., 0.],
        [0., 0., 1.],
        [0., 0., -1.],
    ];
    g.map(|g| min_force_sum(w, &[], [-g[0], -g[1], -g[2], 0.0, 0.0, 0.0]))
}

pub fn impact_effort(w: &[[f64; 6]], scale: f64, torque: V3, use_wrench: [f64; 6]) -> f64 {
    let t = torque * scale;
    min_force_sum(w, &[use_wrench], [0.0, 0.0, 0.0, -t.x, -t.y, -t.z])
}

/// `max β` with every contact's normal force (Σ over its edges) at most 1.
pub fn use_force(w: &[[f64; 6]], edges_per_contact: &[usize], use_wrench: [f64; 6]) -> f64 {
    let n = w.len();
    let k = edges_per_contact.len();
    // variables: α (n), β, slacks (k)
    let cols = n + 1 + k;
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for r in 0..6 {
        let mut row = vec![0.0; cols];
        for (j, wk) in w.iter().enumerate() {
            row[j] = wk[r];
        }
        row[n] = use_wrench[r];
        a.push(row);
        b.push(0.0);
    }
    let mut start = 0;
    for (ci, &e) in edges_per_contact.iter().enumerate() {
        let mut row = vec![0.0; cols];
        for v in row.iter_mut().skip(start).take(e) {
            *v = 1.0;
        }
        row[n + 1 + ci] = 1.0;
        a.push(row);
        b.push(1.0);
        start += e;
    }
    let mut c = vec![0.0; cols];
    c[n] = -1.0;
    match bland_min(&a, &b, &c) {
        Oracle::Optimal(v, _) => (-v).max(0.0),
        _ => 0.0,
    }
}

fn support(w: &[[f64; 6]], u: &[f64; 6]) -> f64 {
    w.iter()
        .map(|wk| wk.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn normalize6(u: [f64; 6]) -> [f64; 6] {
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.map(|v| v / n)
}

/// Minimum of the support function over `n_dirs` Gaussian-random unit
/// directions, each of the best `polish` then improved by random local
/// search with a shrinking radius.
pub fn epsilon_by_sampling(w: &[[f64; 6]], n_dirs: usize, polish: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Vec<(f64, [f64; 6])> = Vec::with_capacity(polish + 1);
    for _ in 0..n_dirs {
        let u = normalize6(std::array::from_fn(|_| StandardNormal.sample(&mut rng)));
        let h = support(w, &u);
        if best.len() < polish || h < best[best.len() - 1].0 {
            let pos = best.partition_point(|b| b.0 <= h);
            best.insert(pos, (h, u));
            best.truncate(polish.max(1));
        }
    }
    let mut overall = best[0].0;
    for &(h0, u0) in &best {
        let (mut h, mut u) = (h0, u0);
        let mut radius = 0.05;
        while radius > 1e-9 {
            let mut improved = false;
            for _ in 0..60 {
                let cand = normalize6(std::array::from_fn(|i| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    u[i] + radius * g
                }));
                let hc = support(w, &cand);
                if hc < h {
                    h = hc;
                    u = cand;
                    improved = true;
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        overall = overall.min(h);
    }
    overall.max(0.0)
}

fn ray_hits_triangle(o: &V3, d: &V3, tri: [V3; 3]) -> bool {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return false;
    }
    let s = o - tri[0];
    let u = s.dot(&p) / det;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) / det > 0.0
}

/// Unit-density volume, center of mass and central inertia tensor by
/// rejection sampling `n` points in the bounding box; inside means an odd
/// number of crossings along a fixed skew ray.
pub fn monte_carlo_mass(
    tris: &[[V3; 3]],
    n: usize,
    seed: u64,
) -> (f64, V3, nalgebra::Matrix3<f64>) {
    let mut lo = V3::repeat(f64::INFINITY);
    let mut hi = V3::repeat(f64::NEG_INFINITY);
    for t in tris {
        for p in t {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    let d = V3::new(0.5377, 0.3111, 0.7834).normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = Vec::new();
    for _ in 0..n {
        let p = V3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let crossings = tris
            .iter()
            .filter(|t| ray_hits_triangle(&p, &d, **t))
            .count();
        if crossings % 2 == 1 {
            inside.push(p);
        }
    }
    let box_volume = (hi - lo).product();
    let volume = box_volume * inside.len() as f64 / n as f64;
    let com = inside.iter().sum::<V3>() / inside.len() as f64;
    let dm = volume / inside.len() as f64;
    let mut j = nalgebra::Matrix3::zeros();
    for p in &inside {
        let r = p - com;
        j += (nalgebra::Matrix3::identity() * r.dot(&r) - r * r.transpose()) * dm;
    }
    (volume, com, j)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

/// Prints one acceptance line and returns whether it passed. Writes to
/// the stdout handle directly so the line shows under the test harness.
pub fn report(name: &str, pass: bool, detail: &str) -> bool {
    use std::io::Write;
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    pass
}
