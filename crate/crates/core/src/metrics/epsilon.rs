//! Largest-ball quality `ε = min_{|u|=1} max_k w_k · u`, the distance from
//! the origin to the boundary of the convex hull of the primitive wrenches
//! when the origin is inside it.

use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use super::wrench::{Wrench, WrenchSet};

/// Values at or below this count as "origin on the boundary".
pub const FORCE_CLOSURE_MIN: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonResult {
    /// `max(0, min support)`.
    pub epsilon: f64,
    /// Smallest support value found; negative when the origin lies outside
    /// the hull.
    pub min_support: f64,
    /// Direction attaining `min_support`.
    pub direction: [f64; 6],
    pub force_closure: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSettings {
    pub directions: usize,
    pub refine_starts: usize,
}

impl Default for EpsilonSettings {
    fn default() -> Self {
        EpsilonSettings {
            directions: 4096,
            refine_starts: 32,
        }
    }
}

/// `max_k w_k · u`.
#[inline]
pub fn support(wrenches: &[Wrench], u: &[f64; 6]) -> f64 {
    wrenches
        .iter()
        .map(|w| w[0] * u[0] + w[1] * u[1] + w[2] * u[2] + w[3] * u[3] + w[4] * u[4] + w[5] * u[5])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` unit 6-vectors from a Halton sequence pushed through Box–Muller.
pub fn sphere_directions(n: usize) -> Arc<Vec<[f64; 6]>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<[f64; 6]>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(d) = cache.lock().unwrap().get(&n) {
        return d.clone();
    }
    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let dirs: Vec<[f64; 6]> = (1..=n as u64)
        .map(|i| {
            let h = BASES.map(|b| radical_inverse(i, b));
            let mut g = [0.0; 6];
            for k in 0..3 {
                let r = (-2.0 * h[2 * k].max(f64::MIN_POSITIVE).ln()).sqrt();
                let a = TAU * h[2 * k + 1];
                g[2 * k] = r * a.cos();
                g[2 * k + 1] = r * a.sin();
            }
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            g.map(|x| x / norm)
        })
        .collect();
    let dirs = Arc::new(dirs);
    cache.lock().unwrap().insert(n, dirs.clone());
    dirs
}

/// Sorted, exact-duplicate-free copy, so the result does not depend on
/// contact order or repeated contacts.
fn canonical(wrenches: &[Wrench]) -> Vec<Wrench> {
    let mut w = wrenches.to_vec();
    w.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    w.dedup();
    w
}

fn to_vec6(u: &[f64; 6]) -> Vector6<f64> {
    Vector6::from_column_slice(u)
}

fn to_arr(v: &Vector6<f64>) -> [f64; 6] {
    [v[0], v[1], v[2], v[3], v[4], v[5]]
}

fn finish(min_support: f64, direction: [f64; 6]) -> EpsilonResult {
    EpsilonResult {
        epsilon: min_support.max(0.0),
        min_support,
        direction,
        force_closure: min_support > FORCE_CLOSURE_MIN,
    }
}

/// Minimizes the support function over sampled directions, refines the
/// best few locally, then walks the hull facets for the exact minimum.
/// Very large hulls keep the sampled estimate.
pub fn epsilon_quality(ws: &WrenchSet, settings: &EpsilonSettings) -> EpsilonResult {
    let w = canonical(&ws.wrenches);

    // a hull that does not span all six dimensions cannot contain a ball
    let mut gram = Matrix6::<f64>::zeros();
    for wk in &w {
        let v = to_vec6(wk);
        gram += v * v.transpose();
    }
    let eig = SymmetricEigen::new(gram);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .unwrap();
    let lmax = eig.eigenvalues.max();
    if lmin <= RANK_TOL * RANK_TOL * lmax {
        let u = eig.eigenvectors.column(imin).into_owned();
        let (a, b) = (to_arr(&u), to_arr(&-u));
        let (ha, hb) = (support(&w, &a), support(&w, &b));
        let (h, d) = if ha <= hb { (ha, a) } else { (hb, b) };
        // the orthogonal complement direction supports the hull at ~0
        return finish(h.min(0.0), d);
    }

    let dirs = sphere_directions(settings.directions.max(1));
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(dirs.len());
    for (i, u) in dirs.iter().enumerate() {
        let h = support(&w, u);
        if h <= 0.0 {
            // origin outside (or on) the hull: no refinement needed
            return finish(h, *u);
        }
        scored.push((h, i));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best = (scored[0].0, dirs[scored[0].1]);
    for &(h0, i) in scored.iter().take(settings.refine_starts) {
        let (h, u) = refine(&w, dirs[i], h0);
        if h < best.0 {
            best = (h, u);
        }
        if best.0 <= 0.0 {
            return finish(best.0, best.1);
        }
    }
    match facet_walk(&w, &best.1) {
        Walk::Facet(h, u) if h < best.0 => finish(h, u),
        Walk::Unbounded(u) => finish(support(&w, &u).min(0.0), u),
        _ => finish(best.0, best.1),
    }
}

/// Upper bound on the number of hull facets visited before giving up and
/// keeping the sampled estimate.
pub const MAX_FACETS: usize = 250_000;

enum Walk {
    /// Support value and normal of the closest facet.
    Facet(f64, [f64; 6]),
    /// The origin is not interior; the direction supports the hull at `<= 0`.
    Unbounded([f64; 6]),
    TooLarge,
}

/// Right-hand sides `1 + δ_k` with tiny distinct `δ_k`, which scale each
/// wrench radially and break coplanar ties between cone edges.
fn perturbed_rhs(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let f = (k as f64 * 0.618_033_988_749_895 + 0.5).fract();
            1.0 + 1e-8 * (0.5 + f)
        })
        .collect()
}

/// Enumerates the vertices of the polar polytope `{y : w_k · y <= r_k}` by
/// pivoting from one vertex to its neighbours. Each vertex `y` is a facet
/// of the hull at distance `1 / |y|`.
fn facet_walk(w: &[Wrench], start: &[f64; 6]) -> Walk {
    let n = w.len();
    let rows: Vec<Vector6<f64>> = w.iter().map(to_vec6).collect();
    let r = perturbed_rhs(n);
    let basis = match initial_vertex(&rows, &r, &to_vec6(start)) {
        Ok(b) => b,
        Err(Some(d)) => return Walk::Unbounded(to_arr(&d)),
        Err(None) => return Walk::TooLarge,
    };
    let mut seen: HashSet<[u32; 6]> = HashSet::new();
    let mut stack = vec![basis];
    seen.insert(basis);
    let mut best: Option<(f64, [u32; 6])> = None;
    while let Some(b) = stack.pop() {
        if seen.len() > MAX_FACETS {
            return Walk::TooLarge;
        }
        let a = Matrix6::from_fn(|i, j| rows[b[i] as usize][j]);
        let Some(inv) = a.try_inverse() else { continue };
        let rb = Vector6::from_fn(|i, _| r[b[i] as usize]);
        let y = inv * rb;
        let norm2 = y.norm_squared();
        if best.is_none_or(|(m, _)| norm2 > m) {
            best = Some((norm2, b));
        }
        for leave in 0..6 {
            let d = -inv.column(leave);
            let scale = d.norm();
            let mut enter: Option<(f64, usize)> = None;
            for (k, wk) in rows.iter().enumerate() {
                if b.contains(&(k as u32)) {
                    continue;
                }
                let rate = wk.dot(&d);
                if rate <= 1e-12 * scale * wk.norm() {
                    continue;
                }
                let t = (r[k] - wk.dot(&y)).max(0.0) / rate;
                if enter.is_none_or(|(tm, _)| t < tm) {
                    enter = Some((t, k));
                }
            }
            let Some((_, k)) = enter else {
                return Walk::Unbounded(to_arr(&(d / scale)));
            };
            let mut nb = b;
            nb[leave] = k as u32;
            nb.sort_unstable();
            if seen.insert(nb) {
                stack.push(nb);
            }
        }
    }
    let (_, b) = best.expect("at least one vertex");
    // evaluate the facet on the unperturbed wrenches
    let a = Matrix6::from_fn(|i, j| rows[b[i] as usize][j]);
    let Some(y) = a.lu().solve(&Vector6::repeat(1.0)) else {
        return Walk::TooLarge;
    };
    let u = to_arr(&y.normalize());
    Walk::Facet(support(w, &u), u)
}

/// A vertex of `{y : w_k · y <= r_k}` reached from the origin by moving
/// along `dir` projected onto the null space of the constraints hit so far.
/// `Err(Some(d))` is an unbounded ray.
fn initial_vertex(
    rows: &[Vector6<f64>],
    r: &[f64],
    dir: &Vector6<f64>,
) -> Result<[u32; 6], Option<Vector6<f64>>> {
    let mut y = Vector6::<f64>::zeros();
    let mut active: Vec<usize> = Vec::with_capacity(6);
    let mut fallback = 0;
    while active.len() < 6 {
        let mut d = if fallback == 0 {
            *dir
        } else {
            Vector6::from_fn(|i, _| {
                if i == (fallback - 1) % 6 {
                    1.0
                } else {
                    0.3 / (i + 1) as f64
                }
            })
        };
        // Gram-Schmidt against the active rows
        let mut q: Vec<Vector6<f64>> = Vec::new();
        for &k in &active {
            let mut v = rows[k];
            for e in &q {
                v -= e * e.dot(&v);
            }
            q.push(v.normalize());
        }
        for e in &q {
            d -= e * e.dot(&d);
        }
        if d.norm() < 1e-9 {
            fallback += 1;
            if fallback > 12 {
                return Err(None);
            }
            continue;
        }
        let mut enter: Option<(f64, usize)> = None;
        for (k, wk) in rows.iter().enumerate() {
            if active.contains(&k) {
                continue;
            }
            let rate = wk.dot(&d);
            if rate <= 1e-12 * d.norm() * wk.norm() {
                continue;
            }
            let t = (r[k] - wk.dot(&y)).max(0.0) / rate;
            if enter.is_none_or(|(tm, _)| t < tm) {
                enter = Some((t, k));
            }
        }
        let Some((t, k)) = enter else {
            return Err(Some(d.normalize()));
        };
        y += d * t;
        active.push(k);
    }
    let mut b = [0u32; 6];
    for (o, k) in b.iter_mut().zip(&active) {
        *o = *k as u32;
    }
    b.sort_unstable();
    Ok(b)
}

fn refine(w: &[Wrench], start: [f64; 6], h_start: f64) -> (f64, [f64; 6]) {
    let mut u = to_vec6(&start);
    let mut h = h_start;
    let mut step = 0.1;
    let mut idx: Vec<usize> = (0..w.len()).collect();
    for _ in 0..200 {
        if h <= 0.0 {
            break;
        }
        // facet through the six wrenches most aligned with u
        if w.len() >= 6 {
            let dots: Vec<f64> = w.iter().map(|wk| to_vec6(wk).dot(&u)).collect();
            idx.select_nth_unstable_by(5, |&a, &b| dots[b].total_cmp(&dots[a]).then(a.cmp(&b)));
            let a = Matrix6::from_fn(|r, c| w[idx[r]][c]);
            if let Some(v) = a.lu().solve(&Vector6::repeat(1.0)) {
                let norm = v.norm();
                if norm.is_finite() && norm > 0.0 {
                    let cand = v / norm;
                    let hc = support(w, &to_arr(&cand));
                    if hc < h * (1.0 - 1e-12) {
                        u = cand;
                        h = hc;
                        continue;
                    }
                }
            }
        }
        // projected subgradient with backtracking
        let (k, _) = w
            .iter()
            .enumerate()
            .map(|(k, wk)| (k, to_vec6(wk).dot(&u)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        let g = to_vec6(&w[k]);
        let gt = g - u * g.dot(&u);
        let gn = gt.norm();
        if gn < 1e-15 {
            break;
        }
        let mut improved = false;
        while step > 1e-9 {
            let cand = (u - gt * (step / gn)).normalize();
            let hc = support(w, &to_arr(&cand));
            if hc < h {
                u = cand;
                h = hc;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (h, to_arr(&u))
}
