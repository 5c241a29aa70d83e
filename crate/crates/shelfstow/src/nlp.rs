//! Relaxed nonlinear step: augmented Lagrangian outer loop with per-group
//! penalties over the quadratic constraint rows, inner projected L-BFGS
//! with a monotone Armijo line search and box bounds.

use crate::formulation::layout::VariableLayout;
use crate::formulation::{Consensus, Constraint, Group, Objective, ProblemDef, Sense};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct NlpConfig {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// A group's penalty grows unless its violation dropped by this factor.
    pub violation_drop: f64,
    pub multiplier_cap: f64,
    pub lbfgs_memory: usize,
}

impl Default for NlpConfig {
    fn default() -> Self {
        NlpConfig {
            feas_tol: 1e-5,
            opt_tol: 1e-5,
            max_outer: 50,
            max_inner: 50,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            violation_drop: 4.0,
            multiplier_cap: 1e6,
            lbfgs_memory: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlpStatus {
    /// Feasible to `feas_tol` and stationary to `opt_tol`.
    Success,
    /// Inner iterations converged but constraint violation stagnated.
    ConvergedInfeasible,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct NlpReport {
    pub y: Vec<f64>,
    pub status: NlpStatus,
    /// Objective (movement + consensus) at the final iterate.
    pub objective: f64,
    pub max_violation: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
}

/// The smooth subproblem handed to the AL loop: diagonal quadratic
/// objective, optional consensus term, quadratic constraint rows, and box
/// bounds used for projection.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub objective: Objective,
    pub consensus: Option<Consensus>,
    pub rows: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Diagonal variable scaling (characteristic magnitude per variable).
    pub col_scale: Vec<f64>,
    /// Per-row scaling applied inside the AL terms.
    pub row_scale: Vec<f64>,
}

fn row_scales(rows: &[Constraint]) -> Vec<f64> {
    rows.iter()
        .map(|c| {
            let mut m: f64 = 1.0;
            for &(_, v) in &c.expr.linear {
                m = m.max(v.abs());
            }
            for &(_, _, v) in &c.expr.quad {
                m = m.max(v.abs());
            }
            1.0 / m
        })
        .collect()
}

/// Characteristic variable magnitudes for a stowing problem: positions by
/// the shelf extent, forces by the big-M force bound, everything else 1.
fn col_scales(def: &ProblemDef) -> Vec<f64> {
    let layout = def.layout;
    let mut d = vec![1.0; layout.dim()];
    let len = def.shelf.width.max(def.shelf.height);
    for i in 0..layout.n_items {
        d[layout.x(i)] = len;
        d[layout.y(i)] = len;
        for corner in 0..2 {
            for comp in 0..2 {
                d[layout.ground_f(i, corner, comp)] = def.params.big_m_force;
            }
        }
    }
    for p in 0..layout.n_pairs {
        d[layout.plane_b(p)] = len;
        d[layout.contact_rx(p)] = len;
        d[layout.contact_ry(p)] = len;
        d[layout.contact_fx(p)] = def.params.big_m_force;
        d[layout.contact_fy(p)] = def.params.big_m_force;
    }
    d
}

/// Generous box bounds: never binding at a sensible solution, they only
/// keep the inner iterates from wandering. Binaries live in `[0, 1]`.
fn default_bounds(def: &ProblemDef) -> (Vec<f64>, Vec<f64>) {
    let layout = def.layout;
    let n = layout.dim();
    let (w, h) = (def.shelf.width, def.shelf.height);
    let len = w + h;
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for i in 0..layout.n_items {
        lo[layout.x(i)] = -w;
        hi[layout.x(i)] = 2.0 * w;
        lo[layout.y(i)] = -h;
        hi[layout.y(i)] = 2.0 * h;
        lo[layout.c(i)] = -1.5;
        hi[layout.c(i)] = 1.5;
        lo[layout.s(i)] = -1.5;
        hi[layout.s(i)] = 1.5;
        for corner in 0..2 {
            for comp in 0..2 {
                lo[layout.ground_f(i, corner, comp)] = -2.0 * def.params.big_m_force;
                hi[layout.ground_f(i, corner, comp)] = 2.0 * def.params.big_m_force;
            }
        }
        lo[layout.z_ground(i)] = 0.0;
        hi[layout.z_ground(i)] = 1.0;
    }
    for p in 0..layout.n_pairs {
        lo[layout.plane_ax(p)] = -2.0;
        hi[layout.plane_ax(p)] = 2.0;
        lo[layout.plane_ay(p)] = -2.0;
        hi[layout.plane_ay(p)] = 2.0;
        lo[layout.plane_b(p)] = -2.0 * len;
        hi[layout.plane_b(p)] = 2.0 * len;
        lo[layout.contact_rx(p)] = -len;
        hi[layout.contact_rx(p)] = 2.0 * len;
        lo[layout.contact_ry(p)] = -len;
        hi[layout.contact_ry(p)] = 2.0 * len;
        lo[layout.contact_fx(p)] = -2.0 * def.params.big_m_force;
        hi[layout.contact_fx(p)] = 2.0 * def.params.big_m_force;
        lo[layout.contact_fy(p)] = -2.0 * def.params.big_m_force;
        hi[layout.contact_fy(p)] = 2.0 * def.params.big_m_force;
        lo[layout.z_pair(p)] = 0.0;
        hi[layout.z_pair(p)] = 1.0;
    }
    (lo, hi)
}

impl NlpProblem {
    /// ADMM's relaxed step: only the nonlinear (`b`-set) rows; the convex
    /// rows are the MIP step's responsibility.
    pub fn admm_step(def: &ProblemDef) -> NlpProblem {
        let rows = def.b_set.clone();
        let (lower, upper) = default_bounds(def);
        let row_scale = row_scales(&rows);
        NlpProblem {
            objective: def.objective.clone(),
            consensus: def.consensus.clone(),
            rows,
            lower,
            upper,
            col_scale: col_scales(def),
            row_scale,
        }
    }

    /// Every row (`f` plus `b`): the single-level problem MPCC and the
    /// fixed-binary polish operate on.
    pub fn full(def: &ProblemDef) -> NlpProblem {
        let rows: Vec<Constraint> = def.f_set.iter().chain(&def.b_set).cloned().collect();
        let (lower, upper) = default_bounds(def);
        let row_scale = row_scales(&rows);
        NlpProblem {
            objective: def.objective.clone(),
            consensus: def.consensus.clone(),
            rows,
            lower,
            upper,
            col_scale: col_scales(def),
            row_scale,
        }
    }

    pub fn push_rows(&mut self, extra: Vec<Constraint>) {
        let mut scales = row_scales(&extra);
        self.rows.extend(extra);
        self.row_scale.append(&mut scales);
    }

    /// Pin every binary to its (rounded) value in `y`.
    pub fn fix_binaries(&mut self, layout: &VariableLayout, y: &[f64]) {
        for k in layout.binary_indices() {
            let v = y[k].round().clamp(0.0, 1.0);
            self.lower[k] = v;
            self.upper[k] = v;
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn project(&self, y: &mut [f64]) {
        for k in 0..y.len() {
            y[k] = y[k].clamp(self.lower[k], self.upper[k]);
        }
    }

    pub fn max_violation(&self, y: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|c| c.residual(y))
            .fold(0.0, f64::max)
    }
}

struct AlState {
    lambda: Vec<f64>,
    mu: HashMap<Group, f64>,
    prev_violation: HashMap<Group, f64>,
}

impl AlState {
    fn new(p: &NlpProblem, cfg: &NlpConfig) -> AlState {
        let mut mu = HashMap::new();
        for c in &p.rows {
            mu.entry(c.group).or_insert(cfg.penalty_init);
        }
        AlState {
            lambda: vec![0.0; p.rows.len()],
            mu,
            prev_violation: HashMap::new(),
        }
    }
}

/// AL value and gradient at `y`.
fn al_eval(p: &NlpProblem, st: &AlState, y: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut val = p.objective.value(y);
    p.objective.add_grad(y, grad);
    if let Some(cons) = &p.consensus {
        val += cons.value(y);
        cons.add_grad(y, grad);
    }
    for (r, c) in p.rows.iter().enumerate() {
        let mu = st.mu[&c.group];
        let g = c.expr.eval(y) * p.row_scale[r];
        let lam = st.lambda[r];
        match c.sense {
            Sense::Eq => {
                val += lam * g + 0.5 * mu * g * g;
                c.expr.add_grad(y, (lam + mu * g) * p.row_scale[r], grad);
            }
            Sense::Le => {
                let t = lam + mu * g;
                if t > 0.0 {
                    val += (t * t - lam * lam) / (2.0 * mu);
                    c.expr.add_grad(y, t * p.row_scale[r], grad);
                } else {
                    val -= lam * lam / (2.0 * mu);
                }
            }
        }
    }
    val
}

/// Inner minimization: projected L-BFGS with monotone Armijo backtracking.
/// Returns `(iterations, converged)`.
fn inner_minimize(
    p: &NlpProblem,
    st: &AlState,
    y: &mut Vec<f64>,
    cfg: &NlpConfig,
) -> (usize, bool) {
    let n = y.len();
    p.project(y);
    let mut grad = vec![0.0; n];
    let mut val = al_eval(p, st, y, &mut grad);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, g_diff, 1/s·g_diff)
    let mut gamma: Option<f64> = None;

    for it in 0..cfg.max_inner {
        // Projected-gradient stationarity measure.
        let pg = (0..n)
            .map(|k| {
                let t = (y[k] - grad[k]).clamp(p.lower[k], p.upper[k]) - y[k];
                t.abs()
            })
            .fold(0.0, f64::max);
        if pg <= cfg.opt_tol * (1.0 + val.abs()) {
            return (it, true);
        }

        // Two-loop recursion; H0 is γI after the first pair, the column
        // scaling before.
        let mut q = grad.clone();
        let mut alphas = vec![0.0; pairs.len()];
        for (idx, (s, gd, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            alphas[idx] = a;
            for k in 0..n {
                q[k] -= a * gd[k];
            }
        }
        match gamma {
            Some(g) => q.iter_mut().for_each(|v| *v *= g),
            None => {
                for k in 0..n {
                    q[k] *= p.col_scale[k] * p.col_scale[k];
                }
            }
        }
        for (idx, (s, gd, rho)) in pairs.iter().enumerate() {
            let b = rho * gd.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for k in 0..n {
                q[k] += (alphas[idx] - b) * s[k];
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // Not a descent direction: fall back to scaled steepest descent.
            for k in 0..n {
                dir[k] = -grad[k] * p.col_scale[k] * p.col_scale[k];
            }
            slope = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            pairs.clear();
            gamma = None;
            if slope >= 0.0 {
                return (it, true); // flat along the feasible box
            }
        }

        // Backtracking Armijo along the projected path. Without curvature
        // information yet, cap the first step so a steep penalty gradient
        // cannot jump across basins.
        let mut alpha = if pairs.is_empty() {
            let dmax = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            (1.0 / dmax).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..40 {
            let mut y_new: Vec<f64> = (0..n).map(|k| y[k] + alpha * dir[k]).collect();
            p.project(&mut y_new);
            let step: Vec<f64> = (0..n).map(|k| y_new[k] - y[k]).collect();
            let pred: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
            let mut grad_new = vec![0.0; n];
            let val_new = al_eval(p, st, &y_new, &mut grad_new);
            if val_new <= val + 1e-4 * pred.min(0.0) && val_new.is_finite() {
                let gd: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy: f64 = step.iter().zip(&gd).map(|(a, b)| a * b).sum();
                if sy > 1e-12 {
                    let yy: f64 = gd.iter().map(|v| v * v).sum();
                    gamma = Some((sy / yy).clamp(1e-10, 1e10));
                    pairs.push((step, gd, 1.0 / sy));
                    if pairs.len() > cfg.lbfgs_memory {
                        pairs.remove(0);
                    }
                }
                *y = y_new;
                grad = grad_new;
                val = val_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return (it + 1, true); // line-search stall: treat as converged
        }
    }
    (cfg.max_inner, false)
}

/// Augmented Lagrangian solve from the warm start `y0`.
pub fn solve_nlp(p: &NlpProblem, y0: &[f64], cfg: &NlpConfig) -> NlpReport {
    assert_eq!(y0.len(), p.dim());
    let mut st = AlState::new(p, cfg);
    let mut y = y0.to_vec();
    p.project(&mut y);
    let mut inner_total = 0;
    let mut last_converged = false;

    let mut outer = 0;
    while outer < cfg.max_outer {
        outer += 1;
        let (iters, converged) = inner_minimize(p, &st, &mut y, cfg);
        inner_total += iters;
        last_converged = converged;

        // Grouped violations of the *unscaled* rows.
        let mut viol: HashMap<Group, f64> = HashMap::new();
        for c in &p.rows {
            let v = c.residual(&y);
            let e = viol.entry(c.group).or_insert(0.0);
            *e = e.max(v);
        }
        let max_v = viol.values().cloned().fold(0.0, f64::max);
        if max_v <= cfg.feas_tol && converged {
            break;
        }

        // First-order multiplier update with safeguard.
        for (r, c) in p.rows.iter().enumerate() {
            let mu = st.mu[&c.group];
            let g = c.expr.eval(&y) * p.row_scale[r];
            let lam = match c.sense {
                Sense::Eq => st.lambda[r] + mu * g,
                Sense::Le => (st.lambda[r] + mu * g).max(0.0),
            };
            st.lambda[r] = lam.clamp(-cfg.multiplier_cap, cfg.multiplier_cap);
        }

        // Per-group penalty growth when violation stagnates.
        for (g, &v) in &viol {
            let prev = st.prev_violation.get(g).copied();
            if v > cfg.feas_tol {
                if prev.map_or(false, |pv| v > pv / cfg.violation_drop) {
                    let mu = st.mu.get_mut(g).unwrap();
                    *mu = (*mu * cfg.penalty_growth).min(1e10);
                }
            }
            st.prev_violation.insert(*g, v);
        }
    }

    let max_violation = p.max_violation(&y);
    let status = if max_violation <= cfg.feas_tol && last_converged {
        NlpStatus::Success
    } else if outer >= cfg.max_outer && !last_converged {
        NlpStatus::IterationCap
    } else {
        NlpStatus::ConvergedInfeasible
    };
    let mut objective = p.objective.value(&y);
    if let Some(cons) = &p.consensus {
        objective += cons.value(&y);
    }
    NlpReport {
        y,
        status,
        objective,
        max_violation,
        outer_iters: outer,
        inner_iters: inner_total,
    }
}

/// Max relative error of the analytic AL gradient against central finite
/// differences at `y`. Exposed for the derivative acceptance check.
pub fn gradient_check(p: &NlpProblem, y: &[f64], h: f64) -> f64 {
    let st = AlState::new(p, &NlpConfig::default());
    let n = y.len();
    let mut grad = vec![0.0; n];
    al_eval(p, &st, y, &mut grad);
    let mut scratch = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[k] += h;
        ym[k] -= h;
        let fp = al_eval(p, &st, &yp, &mut scratch);
        let fm = al_eval(p, &st, &ym, &mut scratch);
        let fd = (fp - fm) / (2.0 * h);
        let denom = grad[k].abs().max(fd.abs()).max(1.0);
        worst = worst.max((grad[k] - fd).abs() / denom);
    }
    worst
}
