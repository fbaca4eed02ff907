mod common;

use common::{vertex_enumeration_min, Oracle, Row};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgqm::lpsolve::{solve, LinearProgram, LpStatus, Relation, Sense};

/// Small LP with integer data, as both a solver input and oracle rows.
pub fn random_lp(rng: &mut ChaCha8Rng) -> (LinearProgram, Vec<Row>, Vec<f64>) {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=8);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
    let sense = if rng.random_bool(0.5) {
        Sense::Min
    } else {
        Sense::Max
    };
    let mut lp = LinearProgram::new(c.clone(), sense);
    let mut rows = Vec::new();
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
        let b = rng.random_range(-10..=10) as f64;
        let (rel, code) = match rng.random_range(0..10) {
            0 => (Relation::Eq, 0),
            1..=3 => (Relation::Ge, 1),
            _ => (Relation::Le, -1),
        };
        lp.constrain(a.clone(), rel, b);
        rows.push(Row { a, rel: code, b });
    }
    let min_c = match sense {
        Sense::Min => c,
        Sense::Max => c.iter().map(|v| -v).collect(),
    };
    (lp, rows, min_c)
}

fn status_of(o: &Oracle) -> LpStatus {
    match o {
        Oracle::Optimal(..) => LpStatus::Optimal,
        Oracle::Infeasible => LpStatus::Infeasible,
        Oracle::Unbounded => LpStatus::Unbounded,
    }
}

#[test]
fn twenty_random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut seen = [0usize; 3];
    for k in 0..20 {
        let (lp, rows, min_c) = random_lp(&mut rng);
        let oracle = vertex_enumeration_min(&rows, &min_c);
        let out = solve(&lp).unwrap();
        assert_eq!(out.status, status_of(&oracle), "lp {k}: {lp:?}");
        seen[out.status as usize] += 1;
        if let Oracle::Optimal(v, _) = oracle {
            let ours = if lp.sense == Sense::Min {
                out.objective
            } else {
                -out.objective
            };
            assert!(
                (ours - v).abs() <= 1e-6 * v.abs().max(1.0),
                "lp {k}: {ours} vs {v}"
            );
            assert!(
                lp.max_violation(&out.solution)
                    <= 1e-7 * (1.0 + out.solution.iter().map(|x| x.abs()).sum::<f64>())
            );
        }
    }
    assert!(seen[LpStatus::Optimal as usize] > 0);
}

#[test]
fn many_random_lps_agree_with_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..300 {
        let (lp, rows, min_c) = random_lp(&mut rng);
        let oracle = vertex_enumeration_min(&rows, &min_c);
        let out = solve(&lp).unwrap();
        assert_eq!(out.status, status_of(&oracle), "lp {k}: {lp:?}");
        if let Oracle::Optimal(v, _) = oracle {
            let ours = if lp.sense == Sense::Min {
                out.objective
            } else {
                -out.objective
            };
            assert!(
                (ours - v).abs() <= 1e-6 * v.abs().max(1.0),
                "lp {k}: {ours} vs {v}"
            );
        }
    }
}

#[test]
fn statuses_cover_infeasible_and_unbounded() {
    let infeasible =
        LinearProgram::minimize(vec![1.0]).with_constraint(vec![1.0], Relation::Le, -1.0);
    assert_eq!(solve(&infeasible).unwrap().status, LpStatus::Infeasible);
    let unbounded =
        LinearProgram::maximize(vec![1.0, 1.0]).with_constraint(vec![1.0, -1.0], Relation::Le, 2.0);
    assert_eq!(solve(&unbounded).unwrap().status, LpStatus::Unbounded);
    let rows = [Row {
        a: vec![1.0, -1.0],
        rel: -1,
        b: 2.0,
    }];
    assert_eq!(
        vertex_enumeration_min(&rows, &[-1.0, -1.0]),
        Oracle::Unbounded
    );
    let opt = LinearProgram::minimize(vec![1.0]).with_constraint(vec![1.0], Relation::Ge, 3.0);
    let out = solve(&opt).unwrap();
    assert_eq!(out.status, LpStatus::Optimal);
    assert!((out.solution[0] - 3.0).abs() < 1e-12 && (out.objective - 3.0).abs() < 1e-12);
}

fn small_lp() -> impl Strategy<Value = (u64, f64)> {
    (any::<u64>(), 0.01f64..100.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn objective_scaling(seed_k in small_lp()) {
        let (seed, k) = seed_k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lp, _, _) = random_lp(&mut rng);
        let mut scaled = lp.clone();
        scaled.objective.iter_mut().for_each(|c| *c *= k);
        let a = solve(&lp).unwrap();
        let b = solve(&scaled).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((b.objective - k * a.objective).abs() <= 1e-7 * (1.0 + (k * a.objective).abs()));
            for (x, y) in a.solution.iter().zip(&b.solution) {
                prop_assert!((x - y).abs() <= 1e-7 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn max_is_negated_min(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lp, _, _) = random_lp(&mut rng);
        let mut flipped = lp.clone();
        flipped.sense = if lp.sense == Sense::Min { Sense::Max } else { Sense::Min };
        flipped.objective.iter_mut().for_each(|c| *c = -*c);
        let a = solve(&lp).unwrap();
        let b = solve(&flipped).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((a.objective + b.objective).abs() <= 1e-9 * (1.0 + a.objective.abs()));
        }
    }

    #[test]
    fn optimal_solutions_are_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lp, _, _) = random_lp(&mut rng);
        let out = solve(&lp).unwrap();
        if out.status == LpStatus::Optimal {
            let scale = 1.0 + out.solution.iter().map(|x| x.abs()).sum::<f64>();
            prop_assert!(lp.max_violation(&out.solution) <= 1e-7 * scale);
        }
    }
}
