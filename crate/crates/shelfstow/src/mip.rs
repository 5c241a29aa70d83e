//! Mixed-integer convex step: best-first branch-and-bound over the contact
//! binaries with convex-QP node relaxations, plus an exhaustive-enumeration
//! oracle for cross-checking.

use crate::convex_qp::{QpConfig, QpProblem, QpSolver, QpStatus};
use crate::formulation::ProblemDef;
use nalgebra::{DMatrix, DVector};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MipError {
    #[error("root relaxation infeasible")]
    Infeasible,
    #[error("node cap {0} reached without incumbent")]
    NodeCapNoIncumbent(usize),
    #[error("{0} binaries exceeds enumeration cap {1}")]
    TooManyBinaries(usize, usize),
    #[error("f-set contains a non-affine row: {0}")]
    NonConvex(String),
    #[error(transparent)]
    Qp(#[from] crate::convex_qp::QpError),
}

/// The mixed-integer convex restriction: `f`-set rows plus the quadratic
/// objective (movement + consensus), with `[0, 1]` rows for every binary.
#[derive(Debug, Clone)]
pub struct MipProblem {
    pub qp: QpProblem,
    /// `(row index in A, variable index)` of each binary's bound row.
    pub binary_rows: Vec<(usize, usize)>,
}

impl MipProblem {
    /// Assemble from a built problem. Fails if any `f`-set row is not
    /// affine — the structural convexity guarantee of the split.
    pub fn from_problem_def(def: &ProblemDef) -> Result<MipProblem, MipError> {
        let n = def.layout.dim();
        let n_rows = def.f_set.len() + def.layout.n_bin;
        let mut a = DMatrix::zeros(n_rows, n);
        let mut l = DVector::from_element(n_rows, f64::NEG_INFINITY);
        let mut u = DVector::from_element(n_rows, f64::INFINITY);
        for (r, c) in def.f_set.iter().enumerate() {
            if !c.expr.is_affine() {
                return Err(MipError::NonConvex(c.label.clone()));
            }
            for &(k, coef) in &c.expr.linear {
                a[(r, k)] += coef;
            }
            match c.sense {
                crate::formulation::Sense::Le => u[r] = -c.expr.constant,
                crate::formulation::Sense::Eq => {
                    l[r] = -c.expr.constant;
                    u[r] = -c.expr.constant;
                }
            }
        }
        let mut binary_rows = Vec::with_capacity(def.layout.n_bin);
        for (slot, k) in def.layout.binary_indices().enumerate() {
            let r = def.f_set.len() + slot;
            a[(r, k)] = 1.0;
            l[r] = 0.0;
            u[r] = 1.0;
            binary_rows.push((r, k));
        }

        let mut p = DMatrix::zeros(n, n);
        let mut q = DVector::zeros(n);
        for k in 0..n {
            p[(k, k)] = 2.0 * def.objective.weights[k];
            q[k] = -2.0 * def.objective.weights[k] * def.objective.reference[k];
        }
        if let Some(cons) = &def.consensus {
            for k in 0..n {
                p[(k, k)] += cons.weights[k];
                q[k] -= cons.weights[k] * cons.anchor[k];
            }
        }
        Ok(MipProblem {
            qp: QpProblem { p, q, a, l, u },
            binary_rows,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MipConfig {
    /// Relative optimality gap.
    pub gap: f64,
    pub node_cap: usize,
    pub int_tol: f64,
    pub qp: QpConfig,
}

impl Default for MipConfig {
    fn default() -> Self {
        MipConfig {
            gap: 1e-4,
            node_cap: 5000,
            int_tol: 1e-5,
            qp: QpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MipStats {
    pub nodes: usize,
    pub qp_iterations: usize,
    pub best_bound: f64,
    pub objective: f64,
    pub gap_reached: f64,
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64)>, // (binary slot, value)
    warm_x: DVector<f64>,
    warm_y: DVector<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Min-heap on (bound, seq): BinaryHeap is a max-heap, so invert.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

fn apply_fixings(
    base_l: &DVector<f64>,
    base_u: &DVector<f64>,
    binary_rows: &[(usize, usize)],
    fixings: &[(usize, f64)],
) -> (DVector<f64>, DVector<f64>) {
    let mut l = base_l.clone();
    let mut u = base_u.clone();
    for &(slot, v) in fixings {
        let (row, _) = binary_rows[slot];
        l[row] = v;
        u[row] = v;
    }
    (l, u)
}

/// Best-first branch-and-bound. Branches on the most fractional binary
/// (ties broken by lowest index); children warm-start from the parent.
/// Returns the incumbent with all binaries exactly in `{0, 1}`.
pub fn solve_mip(
    p: &MipProblem,
    cfg: &MipConfig,
    warm: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, MipStats), MipError> {
    let mut solver = QpSolver::new(p.qp.clone(), cfg.qp)?;
    let base_l = p.qp.l.clone();
    let base_u = p.qp.u.clone();
    let m = p.qp.m();
    let zero_y = DVector::zeros(m);

    let mut stats = MipStats::default();
    let mut incumbent: Option<(DVector<f64>, f64)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixings: Vec::new(),
        warm_x: warm.cloned().unwrap_or_else(|| DVector::zeros(p.qp.n())),
        warm_y: zero_y.clone(),
    });

    while let Some(node) = heap.pop() {
        if stats.nodes >= cfg.node_cap {
            break;
        }
        if let Some((_, inc)) = &incumbent {
            if node.bound.is_finite() && inc - node.bound <= cfg.gap * inc.abs().max(1.0) {
                // Remaining tree is within the gap.
                stats.best_bound = node.bound;
                break;
            }
        }
        let (l, u) = apply_fixings(&base_l, &base_u, &p.binary_rows, &node.fixings);
        solver.update_bounds(l, u)?;
        solver.warm_start(&node.warm_x, &node.warm_y);
        let sol = solver.solve();
        stats.nodes += 1;
        stats.qp_iterations += sol.iterations;
        match sol.status {
            QpStatus::PrimalInfeasible => continue,
            QpStatus::DualInfeasible => continue,
            _ => {}
        }
        let bound = sol.objective.max(node.bound);
        if let Some((_, inc)) = &incumbent {
            if inc - bound <= cfg.gap * inc.abs().max(1.0) {
                continue;
            }
        }

        // Most fractional binary, tie-break by lowest index.
        let mut branch: Option<(usize, f64)> = None;
        for (slot, &(_, var)) in p.binary_rows.iter().enumerate() {
            if node.fixings.iter().any(|&(s, _)| s == slot) {
                continue;
            }
            let v = sol.x[var];
            let frac = v.min(1.0 - v).max(0.0);
            if frac > cfg.int_tol && branch.map_or(true, |(_, bf)| frac > bf) {
                branch = Some((slot, frac));
            }
        }

        match branch {
            None => {
                // Integral: pin binaries exactly and resolve for a clean
                // incumbent.
                let mut fix = node.fixings.clone();
                for (slot, &(_, var)) in p.binary_rows.iter().enumerate() {
                    if !fix.iter().any(|&(s, _)| s == slot) {
                        fix.push((slot, sol.x[var].round()));
                    }
                }
                let (l, u) = apply_fixings(&base_l, &base_u, &p.binary_rows, &fix);
                solver.update_bounds(l, u)?;
                solver.warm_start(&sol.x, &sol.dual);
                let fixed = solver.solve();
                stats.qp_iterations += fixed.iterations;
                if matches!(fixed.status, QpStatus::Optimal | QpStatus::IterationLimit) {
                    let mut x = fixed.x.clone();
                    for &(slot, v) in &fix {
                        x[p.binary_rows[slot].1] = v;
                    }
                    let obj = fixed.objective;
                    if incumbent.as_ref().map_or(true, |&(_, best)| obj < best) {
                        incumbent = Some((x, obj));
                    }
                }
            }
            Some((slot, _)) => {
                for v in [0.0, 1.0] {
                    let mut fix = node.fixings.clone();
                    fix.push((slot, v));
                    seq += 1;
                    heap.push(Node {
                        bound,
                        seq,
                        fixings: fix,
                        warm_x: sol.x.clone(),
                        warm_y: sol.dual.clone(),
                    });
                }
            }
        }
    }

    match incumbent {
        Some((x, obj)) => {
            stats.objective = obj;
            if stats.best_bound == 0.0 && stats.nodes > 0 {
                stats.best_bound = heap
                    .peek()
                    .map(|n| n.bound)
                    .unwrap_or(obj)
                    .min(obj);
            }
            stats.gap_reached = (obj - stats.best_bound) / obj.abs().max(1.0);
            Ok((x, stats))
        }
        None => {
            if stats.nodes >= cfg.node_cap {
                Err(MipError::NodeCapNoIncumbent(cfg.node_cap))
            } else {
                Err(MipError::Infeasible)
            }
        }
    }
}

pub const ENUMERATION_CAP: usize = 14;

/// Exhaustive oracle: one QP per binary assignment (Gray-code order so the
/// warm start carries over), returning the best feasible assignment.
pub fn enumerate_binaries(
    p: &MipProblem,
    cfg: &MipConfig,
) -> Result<(DVector<f64>, f64), MipError> {
    let k = p.binary_rows.len();
    if k > ENUMERATION_CAP {
        return Err(MipError::TooManyBinaries(k, ENUMERATION_CAP));
    }
    let mut solver = QpSolver::new(p.qp.clone(), cfg.qp)?;
    let base_l = p.qp.l.clone();
    let base_u = p.qp.u.clone();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut warm: Option<(DVector<f64>, DVector<f64>)> = None;
    for i in 0..(1usize << k) {
        let gray = i ^ (i >> 1);
        let fix: Vec<(usize, f64)> = (0..k)
            .map(|slot| (slot, ((gray >> slot) & 1) as f64))
            .collect();
        let (l, u) = apply_fixings(&base_l, &base_u, &p.binary_rows, &fix);
        solver.update_bounds(l, u)?;
        if let Some((x, y)) = &warm {
            solver.warm_start(x, y);
        }
        let sol = solver.solve();
        if sol.status == QpStatus::Optimal {
            warm = Some((sol.x.clone(), sol.dual.clone()));
            let mut x = sol.x.clone();
            for &(slot, v) in &fix {
                x[p.binary_rows[slot].1] = v;
            }
            if best.as_ref().map_or(true, |&(_, b)| sol.objective < b) {
                best = Some((x, sol.objective));
            }
        }
    }
    best.ok_or(MipError::Infeasible)
}
