//! Effort and force-transmission linear programs over contact wrenches.

use crate::geom::Vec3;
use crate::lpsolve::{solve, LinearProgram, LpError, LpStatus, Relation};

use super::wrench::{Wrench, WrenchSet};

/// Gravity directions for the six holding efforts.
pub const GRAVITY_DIRECTIONS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// `min Σ α` over `α ≥ 0` (and free nonnegative `extra` multipliers) with
/// `Σ α_k w_k + Σ β_j extra_j = target`. `∞` when infeasible.
fn min_force_sum(ws: &WrenchSet, extra: &[Wrench], target: &Wrench) -> Result<f64, LpError> {
    // the optimum is positively homogeneous in the target; solving at unit
    // norm keeps the feasibility tolerance meaningful for tiny torques
    let norm = target.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let target = target.map(|t| t / norm);
    let n = ws.wrenches.len();
    let mut objective = vec![1.0; n];
    objective.extend(std::iter::repeat_n(0.0, extra.len()));
    let mut lp = LinearProgram::minimize(objective);
    for r in 0..6 {
        let mut row: Vec<f64> = ws.wrenches.iter().map(|w| w[r]).collect();
        row.extend(extra.iter().map(|w| w[r]));
        lp.constrain(row, Relation::Eq, target[r]);
    }
    let out = solve(&lp)?;
    Ok(match out.status {
        LpStatus::Optimal => out.objective * norm,
        LpStatus::Infeasible => f64::INFINITY,
        // the objective is bounded below by zero
        LpStatus::Unbounded => unreachable!("nonnegative objective cannot be unbounded"),
    })
}

/// Minimum total normal force balancing a unit gravity force at the
/// center, for `+x, -x, +y, -y, +z, -z` in that order.
pub fn effort_hold(ws: &WrenchSet) -> Result<[f64; 6], LpError> {
    let mut out = [0.0; 6];
    for (o, g) in out.iter_mut().zip(GRAVITY_DIRECTIONS) {
        // Σ α w + (g, 0) = 0
        *o = min_force_sum(ws, &[], &[-g[0], -g[1], -g[2], 0.0, 0.0, 0.0])?;
    }
    Ok(out)
}

/// Minimum total hand force balancing the inertial torque `τ` with the
/// help of an unpenalized push `β ≥ 0` along `use_force` at `use_point`.
pub fn effort_impact(
    ws: &WrenchSet,
    torque: &Vec3,
    use_point: &Vec3,
    use_force: &Vec3,
) -> Result<f64, LpError> {
    if *torque == Vec3::zeros() {
        return Ok(0.0);
    }
    let wu = ws.wrench_at(use_point, use_force);
    let t = torque * ws.torque_scale;
    min_force_sum(ws, &[wu], &[0.0, 0.0, 0.0, -t.x, -t.y, -t.z])
}

/// Largest push `β` along `use_force` at `use_point` the hand can balance
/// with every contact's normal force at most one.
pub fn force_to_use(ws: &WrenchSet, use_point: &Vec3, use_force: &Vec3) -> Result<f64, LpError> {
    let n = ws.wrenches.len();
    let wu = ws.wrench_at(use_point, use_force);
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for r in 0..6 {
        let mut row: Vec<f64> = ws.wrenches.iter().map(|w| w[r]).collect();
        row.push(wu[r]);
        lp.constrain(row, Relation::Eq, 0.0);
    }
    for c in 0..ws.n_contacts {
        let mut row: Vec<f64> = ws
            .contact_of
            .iter()
            .map(|&k| if k == c { 1.0 } else { 0.0 })
            .collect();
        row.push(0.0);
        lp.constrain(row, Relation::Le, 1.0);
    }
    let out = solve(&lp)?;
    Ok(match out.status {
        LpStatus::Optimal => out.objective.max(0.0),
        // β = 0 with α = 0 is always feasible and β is bounded by the caps
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FrictionModel;
    use approx::assert_relative_eq;

    fn frictionless(contacts: &[(Vec3, Vec3)]) -> WrenchSet {
        WrenchSet::from_contacts(
            contacts,
            Vec3::zeros(),
            1.0,
            &FrictionModel {
                mu: 0.0,
                cone_edges: 8,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_contact_gravity_cases() {
        // contact below the center with outward normal -z pushes along +z
        let ws = frictionless(&[(-Vec3::z(), -Vec3::z())]);
        let eh = effort_hold(&ws).unwrap();
        assert_relative_eq!(eh[5], 1.0, epsilon = 1e-12);
        assert!(eh[4].is_infinite());
        assert!(eh[..4].iter().all(|e| e.is_infinite()));
    }

    #[test]
    fn zero_torque_zero_effort() {
        let ws = frictionless(&[(Vec3::x(), Vec3::x())]);
        assert_eq!(
            effort_impact(&ws, &Vec3::zeros(), &Vec3::y(), &-Vec3::y()).unwrap(),
            0.0
        );
    }

    #[test]
    fn unpenalized_use_push_leaves_only_net_force() {
        // the push at (0, 1, 0) along +x supplies torque -z, balancing τ = +z;
        // the hand contact at +x only cancels the push's net force, on a
        // line through the center
        let ws = frictionless(&[(Vec3::x(), Vec3::x())]);
        let e = effort_impact(&ws, &Vec3::z(), &Vec3::y(), &Vec3::x()).unwrap();
        assert_relative_eq!(e, 1.0, epsilon = 1e-12);
        // doubling τ doubles the push and the hand force
        let e2 = effort_impact(&ws, &(Vec3::z() * 2.0), &Vec3::y(), &Vec3::x()).unwrap();
        assert_relative_eq!(e2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unopposable_use_force_gives_zero() {
        let ws = frictionless(&[(Vec3::x(), Vec3::x())]);
        assert_eq!(force_to_use(&ws, &-Vec3::x(), &-Vec3::x()).unwrap(), 0.0);
    }

    #[test]
    fn frictionless_pinch_transmits_unit_force() {
        // contacts at ±x; a push along +x at the -x side is held by the +x contact
        let ws = frictionless(&[(Vec3::x(), Vec3::x()), (-Vec3::x(), -Vec3::x())]);
        let u = force_to_use(&ws, &-Vec3::x(), &Vec3::x()).unwrap();
        assert_relative_eq!(u, 1.0, epsilon = 1e-12);
    }
}
