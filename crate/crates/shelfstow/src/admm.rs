//! ADMM driver: alternate between the mixed-integer convex step (branch and
//! bound over the `f`-set) and the relaxed nonlinear step (augmented
//! Lagrangian over the `b`-set), coupled by a weighted consensus term whose
//! weight grows geometrically each iteration.

use crate::formulation::{
    assignment_from_poses, build_problem, default_insert_pose, Consensus, Instance, PhysParams,
    ProblemDef,
};
use crate::mip::{solve_mip, MipConfig, MipProblem};
use crate::nlp::{solve_nlp, NlpConfig, NlpProblem, NlpStatus};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error(transparent)]
    Formulation(#[from] crate::formulation::FormulationError),
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmConfig {
    /// Consensus weight growth factor per iteration.
    pub gamma: f64,
    /// Initial consensus weight on continuous variables.
    pub g_cont: f64,
    /// Initial consensus weight on binaries.
    pub g_bin: f64,
    /// Stopping threshold; `None` means `1e-3 · √dim`. `f64::INFINITY`
    /// stops after a single iteration.
    pub delta: Option<f64>,
    pub max_iters: usize,
    pub mip: MipConfig,
    pub nlp: NlpConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            gamma: 1.1,
            g_cont: 1.0,
            g_bin: 10.0,
            delta: None,
            max_iters: 100,
            mip: MipConfig::default(),
            nlp: NlpConfig::default(),
        }
    }
}

impl AdmmConfig {
    pub fn threshold(&self, dim: usize) -> f64 {
        self.delta.unwrap_or(1e-3 * (dim as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Success,
    /// Consensus residual never reached the threshold.
    ResidualNotConverged,
    /// Converged (or rounded) iterate fails the feasibility check.
    Infeasible,
    /// A subsolver failed on two consecutive iterations.
    SubsolverFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Success => "success",
            SolveStatus::ResidualNotConverged => "residual_not_converged",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::SubsolverFailure => "subsolver_failure",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterationStat {
    pub residual: f64,
    /// Movement objective at the NLP iterate.
    pub f_obj: f64,
    pub mip_nodes: usize,
    pub nlp_outer: usize,
    pub mip_time_s: f64,
    pub nlp_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Final variable vector: rounded binaries, polished continuous part.
    pub y: Vec<f64>,
    /// Movement objective (no consensus term) at the final iterate.
    pub objective: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub residuals: Vec<f64>,
    pub iter_stats: Vec<IterationStat>,
    pub max_violation: f64,
}

/// `√(Σ G_k (y_M − y_N)_k²)` — the G-weighted consensus residual.
pub fn consensus_residual(y_m: &[f64], y_n: &[f64], g: &[f64]) -> f64 {
    y_m.iter()
        .zip(y_n)
        .zip(g)
        .map(|((&a, &b), &w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// The end-of-iteration update, in this exact order: dual step, weight
/// growth, dual rescale.
pub fn dual_update(w: &mut [f64], g: &mut [f64], y_m: &[f64], y_n: &[f64], gamma: f64) {
    for k in 0..w.len() {
        w[k] += y_m[k] - y_n[k];
    }
    for v in g.iter_mut() {
        *v *= gamma;
    }
    for v in w.iter_mut() {
        *v /= gamma;
    }
}

pub(crate) fn normalize_rotations(def: &ProblemDef, y: &mut [f64]) {
    let layout = def.layout;
    for i in 0..layout.n_items {
        let (c, s) = (y[layout.c(i)], y[layout.s(i)]);
        let n = (c * c + s * s).sqrt();
        if n > 1e-6 {
            y[layout.c(i)] = c / n;
            y[layout.s(i)] = s / n;
        } else {
            y[layout.c(i)] = 1.0;
            y[layout.s(i)] = 0.0;
        }
    }
}

/// Round binaries, pin them, re-solve the full constraint set without a
/// consensus term, and renormalize rotations. Shared with the MPCC path.
pub(crate) fn polish(def: &ProblemDef, y: &[f64], nlp_cfg: &NlpConfig) -> (Vec<f64>, f64) {
    let clean = def.with_consensus(None);
    let mut p = NlpProblem::full(&clean);
    p.fix_binaries(&clean.layout, y);
    let mut y0 = y.to_vec();
    for k in clean.layout.binary_indices() {
        y0[k] = y0[k].round().clamp(0.0, 1.0);
    }
    let rep = solve_nlp(&p, &y0, nlp_cfg);
    let mut out = rep.y;
    normalize_rotations(&clean, &mut out);
    let viol = clean.max_residual(&out);
    (out, viol)
}

/// Run ADMM on an already-built problem from the warm-start assignment `y0`.
pub fn solve(def: &ProblemDef, y0: &[f64], cfg: &AdmmConfig) -> SolveReport {
    let start = Instant::now();
    let dim = def.layout.dim();
    let threshold = cfg.threshold(dim);

    let mut g: Vec<f64> = (0..dim)
        .map(|k| {
            if def.layout.is_binary(k) {
                cfg.g_bin
            } else {
                cfg.g_cont
            }
        })
        .collect();
    let mut w = vec![0.0; dim];
    let mut y_n = y0.to_vec();
    let mut y_m = y0.to_vec();

    let mut residuals = Vec::new();
    let mut iter_stats = Vec::new();
    let mut converged = false;
    let mut consecutive_failures = 0usize;
    let mut subsolver_failed = false;
    let mut iterations = 0usize;

    while iterations < cfg.max_iters {
        iterations += 1;

        // Mixed-integer convex step, anchored at y_N − w.
        let anchor_m: Vec<f64> = y_n.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let def_m = def.with_consensus(Some(Consensus {
            anchor: anchor_m,
            weights: g.clone(),
        }));
        let mut mip_nodes = 0;
        let mip_start = Instant::now();
        match MipProblem::from_problem_def(&def_m)
            .and_then(|p| solve_mip(&p, &cfg.mip, Some(&nalgebra::DVector::from_column_slice(&y_m))))
        {
            Ok((x, stats)) => {
                y_m = x.as_slice().to_vec();
                mip_nodes = stats.nodes;
                consecutive_failures = 0;
            }
            Err(_) => {
                consecutive_failures += 1;
                if consecutive_failures >= 2 {
                    subsolver_failed = true;
                    break;
                }
            }
        }

        let mip_time_s = mip_start.elapsed().as_secs_f64();

        // Relaxed nonlinear step, anchored at y_M + w.
        let anchor_n: Vec<f64> = y_m.iter().zip(&w).map(|(&a, &b)| a + b).collect();
        let def_n = def.with_consensus(Some(Consensus {
            anchor: anchor_n,
            weights: g.clone(),
        }));
        let nlp_problem = NlpProblem::admm_step(&def_n);
        let nlp_start = Instant::now();
        let rep = solve_nlp(&nlp_problem, &y_n, &cfg.nlp);
        let nlp_time_s = nlp_start.elapsed().as_secs_f64();
        if rep.status == NlpStatus::IterationCap && rep.max_violation > 1.0 {
            consecutive_failures += 1;
            if consecutive_failures >= 2 {
                subsolver_failed = true;
                break;
            }
        } else {
            y_n = rep.y;
            consecutive_failures = 0;
        }

        let residual = consensus_residual(&y_m, &y_n, &g);
        residuals.push(residual);
        iter_stats.push(IterationStat {
            residual,
            f_obj: def.objective.value(&y_n),
            mip_nodes,
            nlp_outer: rep.outer_iters,
            mip_time_s,
            nlp_time_s,
        });
        if residual <= threshold {
            converged = true;
            break;
        }

        dual_update(&mut w, &mut g, &y_m, &y_n, cfg.gamma);
    }

    // Binaries from the MIP iterate, continuous part from the NLP iterate,
    // then a fixed-binary polish over the full constraint set.
    let mut y_final = y_n.clone();
    for k in def.layout.binary_indices() {
        y_final[k] = y_m[k].round().clamp(0.0, 1.0);
    }
    let (y_pol, max_violation) = polish(def, &y_final, &cfg.nlp);

    let status = if subsolver_failed {
        SolveStatus::SubsolverFailure
    } else if !converged {
        SolveStatus::ResidualNotConverged
    } else if max_violation > 10.0 * cfg.nlp.feas_tol {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Success
    };
    let clean = def.with_consensus(None);
    SolveReport {
        status,
        objective: clean.base_objective(&y_pol),
        y: y_pol,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        residuals,
        iter_stats,
        max_violation,
    }
}

/// Build the problem for an instance, form the standard warm start (stored
/// items at their poses, insert item centered on the floor), and run ADMM.
pub fn solve_instance(
    instance: &Instance,
    params: PhysParams,
    cfg: &AdmmConfig,
) -> Result<SolveReport, AdmmError> {
    let def = build_problem(instance, params, None)?;
    let mut poses = def.initial_poses.clone();
    poses[instance.insert_index()] = default_insert_pose(instance, &params);
    let y0 = assignment_from_poses(&def, &poses);
    Ok(solve(&def, &y0, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{generate_instance, GenParams};

    #[test]
    fn dual_update_order_is_step_grow_rescale() {
        let mut w = vec![1.0];
        let mut g = vec![4.0];
        dual_update(&mut w, &mut g, &[3.0], &[2.0], 2.0);
        // w ← (1 + (3−2)) / 2, G ← 4·2
        assert_eq!(w, vec![1.0]);
        assert_eq!(g, vec![8.0]);
    }

    #[test]
    fn residual_hand_examples() {
        assert_eq!(consensus_residual(&[1.0], &[1.0], &[5.0]), 0.0);
        let r = consensus_residual(&[2.0, 0.0], &[0.0, 1.0], &[1.0, 4.0]);
        assert!((r - (4.0f64 + 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn infinite_threshold_stops_after_one_iteration() {
        let inst = generate_instance(2, 1, &GenParams::default()).unwrap();
        let cfg = AdmmConfig {
            delta: Some(f64::INFINITY),
            ..AdmmConfig::default()
        };
        let rep = solve_instance(&inst, PhysParams::for_instance(&inst), &cfg).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residuals.len(), 1);
    }

    #[test]
    fn success_implies_residual_below_threshold() {
        let inst = generate_instance(4, 2, &GenParams {
            slack_range: (2.5, 3.0),
            ..GenParams::default()
        })
        .unwrap();
        let cfg = AdmmConfig::default();
        let rep = solve_instance(&inst, PhysParams::for_instance(&inst), &cfg).unwrap();
        if rep.status == SolveStatus::Success {
            let dim = 8 * 3 + 7 * 3 + 6; // n_cont + n_bin for 3 items
            let thr = cfg.threshold(dim);
            assert!(*rep.residuals.last().unwrap() <= thr);
        }
    }

    #[test]
    fn wide_gap_instance_solves_with_small_movement() {
        // Plenty of slack: the stored items barely need to move.
        let inst = generate_instance(1, 2, &GenParams {
            slack_range: (3.0, 3.5),
            ..GenParams::default()
        })
        .unwrap();
        let rep =
            solve_instance(&inst, PhysParams::for_instance(&inst), &AdmmConfig::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Success, "report: {:?}", rep.status);
        assert!(rep.objective < 0.5, "objective {}", rep.objective);
    }
}
