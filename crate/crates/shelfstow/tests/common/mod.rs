//! Shared test support: an exhaustive active-set oracle for small box-row
//! QPs and a random strictly-convex QP generator. The oracle shares no code
//! with the solver under test — it enumerates candidate active sets and
//! checks the KKT conditions of each equality-constrained subproblem
//! directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shelfstow::convex_qp::QpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowState {
    Free,
    AtLower,
    AtUpper,
}

/// Globally solve `min ½xᵀPx + qᵀx  s.t. l ≤ Ax ≤ u` for strictly convex
/// `P` by enumerating every assignment of rows to {free, at lower, at
/// upper} and returning the first KKT-consistent stationary point.
pub fn active_set_solve(prob: &QpProblem, tol: f64) -> Option<(DVector<f64>, f64)> {
    let m = prob.m();
    let mut states = vec![RowState::Free; m];
    let mut best: Option<(DVector<f64>, f64)> = None;
    loop {
        if let Some(x) = try_active_set(prob, &states, tol) {
            let obj = 0.5 * (x.transpose() * &prob.p * &x)[(0, 0)] + prob.q.dot(&x);
            if best.as_ref().map_or(true, |b| obj < b.1 - 1e-12) {
                best = Some((x, obj));
            }
        }
        // Odometer increment over {Free, AtLower, AtUpper}^m.
        let mut k = 0;
        loop {
            if k == m {
                return best;
            }
            states[k] = match states[k] {
                RowState::Free => RowState::AtLower,
                RowState::AtLower => RowState::AtUpper,
                RowState::AtUpper => {
                    states[k] = RowState::Free;
                    k += 1;
                    continue;
                }
            };
            break;
        }
    }
}

fn try_active_set(prob: &QpProblem, states: &[RowState], tol: f64) -> Option<DVector<f64>> {
    let n = prob.n();
    let m = prob.m();
    // Equality rows (l == u) must be active; treat AtLower/AtUpper alike and
    // skip the duplicate encoding.
    let mut active: Vec<(usize, f64)> = Vec::new();
    for r in 0..m {
        let eq = prob.u[r] - prob.l[r] <= 0.0;
        match states[r] {
            RowState::Free => {
                if eq {
                    return None;
                }
            }
            RowState::AtLower => active.push((r, prob.l[r])),
            RowState::AtUpper => {
                if eq {
                    return None; // same as AtLower for an equality row
                }
                active.push((r, prob.u[r]));
            }
        }
    }
    let na = active.len();
    if na > n {
        return None;
    }
    let mut kkt = DMatrix::zeros(n + na, n + na);
    let mut rhs = DVector::zeros(n + na);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    for (t, &(r, b)) in active.iter().enumerate() {
        for c in 0..n {
            kkt[(c, n + t)] = prob.a[(r, c)];
            kkt[(n + t, c)] = prob.a[(r, c)];
        }
        rhs[n + t] = b;
    }
    for c in 0..n {
        rhs[c] = -prob.q[c];
    }
    let sol = kkt.lu().solve(&rhs)?;
    let x = DVector::from_iterator(n, (0..n).map(|k| sol[k]));

    // Primal feasibility of the inactive rows.
    let ax = &prob.a * &x;
    for r in 0..m {
        if ax[r] < prob.l[r] - tol || ax[r] > prob.u[r] + tol {
            return None;
        }
    }
    // Dual feasibility: stationarity here reads Px + q + Σ λ_t a_t = 0, so
    // an upper-active row needs λ ≥ 0 and a lower-active row λ ≤ 0.
    // Equality rows carry a free multiplier.
    for (t, &(r, _)) in active.iter().enumerate() {
        if prob.u[r] - prob.l[r] <= 0.0 {
            continue;
        }
        let lambda = sol[n + t];
        match states[r] {
            RowState::AtUpper => {
                if lambda < -tol {
                    return None;
                }
            }
            RowState::AtLower => {
                if lambda > tol {
                    return None;
                }
            }
            RowState::Free => unreachable!(),
        }
    }
    Some(x)
}

/// Random strictly convex QP with a guaranteed-feasible box `l ≤ Ax ≤ u`
/// (bounds bracket `A·x0` for a random `x0`); roughly one row in four is an
/// equality.
pub fn random_qp(seed: u64, n: usize, m: usize) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = &f.transpose() * &f + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let ax0 = &a * &x0;
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    for r in 0..m {
        if rng.gen_range(0.0..1.0) < 0.25 {
            l[r] = ax0[r];
            u[r] = ax0[r];
        } else {
            l[r] = ax0[r] - rng.gen_range(0.05..1.0);
            u[r] = ax0[r] + rng.gen_range(0.05..1.0);
        }
    }
    QpProblem { p, q, a, l, u }
}
