//! In-house convex QP solver used for branch-and-bound node relaxations.
//!
//! Operator-splitting method: alternate an unconstrained quadratic
//! minimization (one KKT solve with a cached dense factorization) with a
//! projection onto the constraint box, plus scaled dual updates. Problems
//! are posed as
//!
//! ```text
//!     minimize    ½ xᵀ P x + qᵀ x
//!     subject to  l ≤ A x ≤ u
//! ```
//!
//! Equality rows are expressed as `l = u`. Infeasibility is certified from
//! divergence of the dual (or primal) iterates. The factorization depends
//! only on `(P, A, ρ)`, so bound and linear-cost updates between solves are
//! cheap; branch-and-bound leans on this for node relaxations.

use nalgebra::{DMatrix, DVector, LU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    /// Quadratic cost matrix (symmetrized on input; must be PSD).
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }
    pub fn m(&self) -> usize {
        self.l.len()
    }

    fn check(&self) -> Result<(), QpError> {
        let (n, m) = (self.n(), self.m());
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(QpError::DimensionMismatch(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows(),
                self.p.ncols()
            )));
        }
        if self.a.nrows() != m || self.a.ncols() != n {
            return Err(QpError::DimensionMismatch(format!(
                "A is {}x{}, expected {m}x{n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.u.len() != m {
            return Err(QpError::DimensionMismatch("l/u length mismatch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Residual/infeasibility check cadence and adaptive-ρ cadence.
    pub check_interval: usize,
    pub adaptive_interval: usize,
    pub polish: bool,
    pub eps_infeas: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_interval: 25,
            adaptive_interval: 50,
            polish: true,
            eps_infeas: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub dual: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub r_primal: f64,
    pub r_dual: f64,
    pub objective: f64,
}

const RHO_EQ_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

/// Reusable solver with cached KKT factorization.
pub struct QpSolver {
    prob: QpProblem,
    cfg: QpConfig,
    rho: f64,
    rho_vec: DVector<f64>,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

impl QpSolver {
    pub fn new(mut prob: QpProblem, cfg: QpConfig) -> Result<QpSolver, QpError> {
        prob.check()?;
        // Symmetrize P.
        let pt = prob.p.transpose();
        prob.p = (&prob.p + pt) * 0.5;
        let (n, m) = (prob.n(), prob.m());
        let mut solver = QpSolver {
            prob,
            cfg,
            rho: cfg.rho,
            rho_vec: DVector::zeros(m),
            lu: None,
            x: DVector::zeros(n),
            z: DVector::zeros(m),
            y: DVector::zeros(m),
        };
        solver.update_rho_vec();
        Ok(solver)
    }

    fn update_rho_vec(&mut self) {
        let m = self.prob.m();
        let mut changed = false;
        for i in 0..m {
            let r = if (self.prob.u[i] - self.prob.l[i]).abs() <= 1e-12 {
                self.rho * RHO_EQ_SCALE
            } else {
                self.rho
            };
            if (self.rho_vec[i] - r).abs() > 0.0 {
                self.rho_vec[i] = r;
                changed = true;
            }
        }
        if changed || self.lu.is_none() {
            self.lu = None;
        }
    }

    fn factorize(&mut self) {
        let (n, m) = (self.prob.n(), self.prob.m());
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.prob.p);
        for i in 0..n {
            kkt[(i, i)] += self.cfg.sigma;
        }
        kkt.view_mut((0, n), (n, m))
            .copy_from(&self.prob.a.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&self.prob.a);
        for i in 0..m {
            kkt[(n + i, n + i)] = -1.0 / self.rho_vec[i];
        }
        self.lu = Some(kkt.lu());
    }

    pub fn update_bounds(&mut self, l: DVector<f64>, u: DVector<f64>) -> Result<(), QpError> {
        if l.len() != self.prob.m() || u.len() != self.prob.m() {
            return Err(QpError::DimensionMismatch("bound length".into()));
        }
        self.prob.l = l;
        self.prob.u = u;
        self.update_rho_vec();
        Ok(())
    }

    pub fn update_lin_cost(&mut self, q: DVector<f64>) -> Result<(), QpError> {
        if q.len() != self.prob.n() {
            return Err(QpError::DimensionMismatch("q length".into()));
        }
        self.prob.q = q;
        Ok(())
    }

    pub fn warm_start(&mut self, x: &DVector<f64>, y: &DVector<f64>) {
        self.x = x.clone();
        self.y = y.clone();
        self.z = &self.prob.a * &self.x;
    }

    pub fn problem(&self) -> &QpProblem {
        &self.prob
    }

    fn residuals(&self) -> (f64, f64, f64, f64) {
        let ax = &self.prob.a * &self.x;
        let px = &self.prob.p * &self.x;
        let aty = self.prob.a.transpose() * &self.y;
        let r_prim = (&ax - &self.z).amax();
        let r_dual = (&px + &self.prob.q + &aty).amax();
        let scale_p = ax.amax().max(self.z.amax());
        let scale_d = px.amax().max(self.prob.q.amax()).max(aty.amax());
        (r_prim, r_dual, scale_p, scale_d)
    }

    fn primal_infeasibility_certificate(&self, dy: &DVector<f64>) -> bool {
        let norm = dy.amax();
        if norm <= self.cfg.eps_infeas {
            return false;
        }
        let at_dy = self.prob.a.transpose() * dy;
        if at_dy.amax() > self.cfg.eps_infeas * norm {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let d = dy[i];
            if d > 0.0 {
                if self.prob.u[i].is_infinite() {
                    return false;
                }
                support += self.prob.u[i] * d;
            } else if d < 0.0 {
                if self.prob.l[i].is_infinite() {
                    return false;
                }
                support += self.prob.l[i] * d;
            }
        }
        support < -self.cfg.eps_infeas * norm
    }

    fn dual_infeasibility_certificate(&self, dx: &DVector<f64>) -> bool {
        let norm = dx.amax();
        if norm <= self.cfg.eps_infeas {
            return false;
        }
        if (&self.prob.p * dx).amax() > self.cfg.eps_infeas * norm {
            return false;
        }
        if self.prob.q.dot(dx) >= -self.cfg.eps_infeas * norm {
            return false;
        }
        let adx = &self.prob.a * dx;
        for i in 0..adx.len() {
            let v = adx[i];
            let tol = self.cfg.eps_infeas * norm;
            let lo_ok = self.prob.l[i].is_infinite() || v >= -tol;
            let hi_ok = self.prob.u[i].is_infinite() || v <= tol;
            if !(lo_ok && hi_ok) {
                return false;
            }
        }
        true
    }

    pub fn solve(&mut self) -> QpSolution {
        let (n, m) = (self.prob.n(), self.prob.m());
        if self.lu.is_none() {
            self.factorize();
        }
        let mut rhs = DVector::zeros(n + m);
        let mut status = QpStatus::IterationLimit;
        let mut iterations = self.cfg.max_iter;
        let mut last = (f64::INFINITY, f64::INFINITY);

        let mut prev_x = self.x.clone();
        let mut prev_y = self.y.clone();

        for it in 0..self.cfg.max_iter {
            // KKT solve.
            for i in 0..n {
                rhs[i] = self.cfg.sigma * self.x[i] - self.prob.q[i];
            }
            for i in 0..m {
                rhs[n + i] = self.z[i] - self.y[i] / self.rho_vec[i];
            }
            let sol = self
                .lu
                .as_ref()
                .expect("factorized")
                .solve(&rhs)
                .expect("KKT solve");
            let x_t = sol.rows(0, n).into_owned();
            let nu = sol.rows(n, m).into_owned();
            let mut z_t = DVector::zeros(m);
            for i in 0..m {
                z_t[i] = self.z[i] + (nu[i] - self.y[i]) / self.rho_vec[i];
            }

            prev_x.copy_from(&self.x);
            prev_y.copy_from(&self.y);

            let alpha = self.cfg.alpha;
            for i in 0..n {
                self.x[i] = alpha * x_t[i] + (1.0 - alpha) * self.x[i];
            }
            for i in 0..m {
                let zi = alpha * z_t[i] + (1.0 - alpha) * self.z[i];
                let cand = zi + self.y[i] / self.rho_vec[i];
                let proj = cand.max(self.prob.l[i]).min(self.prob.u[i]);
                self.y[i] += self.rho_vec[i] * (zi - proj);
                self.z[i] = proj;
            }

            if (it + 1) % self.cfg.check_interval == 0 || it + 1 == self.cfg.max_iter {
                let (rp, rd, sp, sd) = self.residuals();
                last = (rp, rd);
                let eps_p = self.cfg.eps_abs + self.cfg.eps_rel * sp;
                let eps_d = self.cfg.eps_abs + self.cfg.eps_rel * sd;
                if rp <= eps_p && rd <= eps_d {
                    status = QpStatus::Optimal;
                    iterations = it + 1;
                    break;
                }
                let dy = &self.y - &prev_y;
                if self.primal_infeasibility_certificate(&dy) {
                    status = QpStatus::PrimalInfeasible;
                    iterations = it + 1;
                    break;
                }
                let dx = &self.x - &prev_x;
                if self.dual_infeasibility_certificate(&dx) {
                    status = QpStatus::DualInfeasible;
                    iterations = it + 1;
                    break;
                }
                // Adaptive penalty rescaling.
                if (it + 1) % self.cfg.adaptive_interval == 0 && rd > 0.0 && rp > 0.0 {
                    let ratio = ((rp / sp.max(1e-12)) / (rd / sd.max(1e-12))).sqrt();
                    if ratio > 5.0 || ratio < 0.2 {
                        self.rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                        self.update_rho_vec();
                        self.factorize();
                    }
                }
            }
        }

        if status == QpStatus::Optimal && self.cfg.polish {
            self.polish();
            let (rp, rd, _, _) = self.residuals();
            last = (rp, rd);
        }

        let objective =
            0.5 * self.x.dot(&(&self.prob.p * &self.x)) + self.prob.q.dot(&self.x);
        QpSolution {
            x: self.x.clone(),
            dual: self.y.clone(),
            status,
            iterations,
            r_primal: last.0,
            r_dual: last.1,
            objective,
        }
    }

    /// Equality-constrained resolve on the detected active set to sharpen
    /// the solution for branch-and-bound bounds.
    fn polish(&mut self) {
        let (n, m) = (self.prob.n(), self.prob.m());
        let tol = 1e-7;
        let mut active: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            let ax = self.z[i];
            if (self.prob.u[i] - self.prob.l[i]).abs() <= 1e-12 {
                active.push((i, self.prob.u[i]));
            } else if self.y[i] > tol || (self.prob.u[i] - ax).abs() < tol {
                if self.prob.u[i].is_finite() && self.y[i] >= -tol {
                    active.push((i, self.prob.u[i]));
                }
            } else if self.y[i] < -tol || (ax - self.prob.l[i]).abs() < tol {
                if self.prob.l[i].is_finite() && self.y[i] <= tol {
                    active.push((i, self.prob.l[i]));
                }
            }
        }
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.prob.p);
        for i in 0..n {
            kkt[(i, i)] += 1e-10;
        }
        for (r, &(row, _)) in active.iter().enumerate() {
            for c in 0..n {
                kkt[(c, n + r)] = self.prob.a[(row, c)];
                kkt[(n + r, c)] = self.prob.a[(row, c)];
            }
            kkt[(n + r, n + r)] = -1e-10;
        }
        let mut rhs = DVector::zeros(n + k);
        for i in 0..n {
            rhs[i] = -self.prob.q[i];
        }
        for (r, &(_, b)) in active.iter().enumerate() {
            rhs[n + r] = b;
        }
        if let Some(sol) = kkt.lu().solve(&rhs) {
            let x_new = sol.rows(0, n).into_owned();
            let mut y_new = DVector::zeros(m);
            for (r, &(row, _)) in active.iter().enumerate() {
                y_new[row] = sol[n + r];
            }
            // Accept the polished point only if it improves the residuals.
            let before = self.kkt_norms();
            let (x_old, z_old, y_old) = (self.x.clone(), self.z.clone(), self.y.clone());
            self.x = x_new;
            self.z = &self.prob.a * &self.x;
            // Keep projected z for feasibility bookkeeping.
            for i in 0..m {
                self.z[i] = self.z[i].max(self.prob.l[i]).min(self.prob.u[i]);
            }
            self.y = y_new;
            if self.kkt_norms() > before {
                self.x = x_old;
                self.z = z_old;
                self.y = y_old;
            }
        }
    }

    fn kkt_norms(&self) -> f64 {
        let (rp, rd, _, _) = self.residuals();
        rp.max(rd)
    }
}

/// One-shot convenience wrapper.
pub fn solve_qp(prob: QpProblem, cfg: QpConfig) -> Result<QpSolution, QpError> {
    let mut solver = QpSolver::new(prob, cfg)?;
    Ok(solver.solve())
}

/// Exact KKT residual norms of a candidate solution: primal feasibility,
/// stationarity and complementarity.
pub fn kkt_residual(prob: &QpProblem, x: &DVector<f64>, dual: &DVector<f64>) -> (f64, f64, f64) {
    let ax = &prob.a * x;
    let mut r_primal: f64 = 0.0;
    let mut r_gap: f64 = 0.0;
    for i in 0..prob.m() {
        let v = ax[i];
        let viol = (prob.l[i] - v).max(0.0).max((v - prob.u[i]).max(0.0));
        r_primal = r_primal.max(viol);
        let y_plus = dual[i].max(0.0);
        let y_minus = (-dual[i]).max(0.0);
        let comp_u = if prob.u[i].is_infinite() {
            y_plus
        } else {
            (y_plus * (prob.u[i] - v)).abs()
        };
        let comp_l = if prob.l[i].is_infinite() {
            y_minus
        } else {
            (y_minus * (v - prob.l[i])).abs()
        };
        r_gap = r_gap.max(comp_u).max(comp_l);
    }
    let r_dual = (&prob.p * x + &prob.q + prob.a.transpose() * dual).amax();
    (r_primal, r_dual, r_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn cfg() -> QpConfig {
        QpConfig::default()
    }

    #[test]
    fn scalar_bound_example() {
        // min (x−1)² s.t. x ≥ 2  →  x = 2
        let prob = QpProblem {
            p: dmatrix![2.0],
            q: dvector![-2.0],
            a: dmatrix![1.0],
            l: dvector![2.0],
            u: dvector![f64::INFINITY],
        };
        let sol = solve_qp(prob, cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_equality_example() {
        // min ½xᵀx s.t. x₁ + x₂ = 1 → (0.5, 0.5)
        let prob = QpProblem {
            p: DMatrix::identity(2, 2),
            q: dvector![0.0, 0.0],
            a: dmatrix![1.0, 1.0],
            l: dvector![1.0],
            u: dvector![1.0],
        };
        let sol = solve_qp(prob, cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-6 && (sol.x[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x ≥ 1 and x ≤ 0 cannot hold.
        let prob = QpProblem {
            p: dmatrix![2.0],
            q: dvector![0.0],
            a: dmatrix![1.0; 1.0],
            l: dvector![1.0, f64::NEG_INFINITY],
            u: dvector![f64::INFINITY, 0.0],
        };
        let sol = solve_qp(prob, cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn optimal_solutions_pass_kkt_check() {
        let prob = QpProblem {
            p: dmatrix![4.0, 1.0; 1.0, 2.0],
            q: dvector![1.0, 1.0],
            a: dmatrix![1.0, 1.0; 1.0, 0.0; 0.0, 1.0],
            l: dvector![1.0, 0.0, 0.0],
            u: dvector![1.0, 0.7, 0.7],
        };
        let sol = solve_qp(prob.clone(), cfg()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let (rp, rd, rg) = kkt_residual(&prob, &sol.x, &sol.dual);
        assert!(rp <= 1e-6 && rd <= 1e-6 && rg <= 1e-5, "{rp} {rd} {rg}");
    }

    #[test]
    fn zero_problem_zero_residuals() {
        let prob = QpProblem {
            p: DMatrix::zeros(2, 2),
            q: dvector![0.0, 0.0],
            a: DMatrix::zeros(1, 2),
            l: dvector![0.0],
            u: dvector![0.0],
        };
        let sol = solve_qp(prob.clone(), cfg()).unwrap();
        let (rp, rd, rg) = kkt_residual(&prob, &sol.x, &sol.dual);
        assert!(rp == 0.0 && rd == 0.0 && rg == 0.0);
    }

    #[test]
    fn objective_scaling_leaves_argmin_unchanged() {
        let prob = QpProblem {
            p: dmatrix![3.0, 0.5; 0.5, 1.0],
            q: dvector![-1.0, 2.0],
            a: dmatrix![1.0, 2.0; 1.0, -1.0],
            l: dvector![-1.0, -2.0],
            u: dvector![2.0, 2.0],
        };
        let alpha = 37.0;
        let scaled = QpProblem {
            p: &prob.p * alpha,
            q: &prob.q * alpha,
            a: prob.a.clone(),
            l: prob.l.clone(),
            u: prob.u.clone(),
        };
        let mut c = cfg();
        let s1 = solve_qp(prob, c).unwrap();
        c.eps_abs *= alpha;
        let s2 = solve_qp(scaled, c).unwrap();
        assert_eq!(s1.status, QpStatus::Optimal);
        assert_eq!(s2.status, QpStatus::Optimal);
        assert!((&s1.x - &s2.x).amax() < 1e-5);
    }

    #[test]
    fn perturbed_solution_grows_dual_residual_linearly() {
        let prob = QpProblem {
            p: dmatrix![2.0, 0.0; 0.0, 2.0],
            q: dvector![0.0, 0.0],
            a: dmatrix![1.0, 0.0],
            l: dvector![-1.0],
            u: dvector![1.0],
        };
        let x0 = dvector![0.0, 0.0];
        let dual = dvector![0.0];
        let (_, rd0, _) = kkt_residual(&prob, &x0, &dual);
        assert!(rd0 < 1e-12);
        for eps in [1e-3, 2e-3, 4e-3] {
            let x = dvector![eps, 0.0];
            let (_, rd, _) = kkt_residual(&prob, &x, &dual);
            assert!((rd - 2.0 * eps).abs() < 1e-12);
        }
    }
}
