//! Exhaustive oracle: enumerate every binary assignment, solve the
//! fixed-binary nonlinear restriction for each, keep the best feasible
//! result. Exponential in the binary count — test-scale instances only.

use crate::admm::SolveStatus;
use crate::formulation::{
    assignment_from_poses, build_problem, default_insert_pose, Instance, PhysParams, ProblemDef,
};
use crate::nlp::{solve_nlp, NlpConfig, NlpProblem};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{0} binaries exceeds oracle cap {1}")]
    TooManyBinaries(usize, usize),
    #[error(transparent)]
    Formulation(#[from] crate::formulation::FormulationError),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub max_binaries: usize,
    pub feas_tol: f64,
    pub nlp: NlpConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_binaries: 12,
            feas_tol: 1e-4,
            nlp: NlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    pub objective: f64,
    pub assignments: usize,
    pub wall_time_s: f64,
    pub max_violation: f64,
}

pub fn solve(def: &ProblemDef, y0: &[f64], cfg: &OracleConfig) -> Result<OracleReport, OracleError> {
    let start = Instant::now();
    let n_bin = def.layout.n_bin;
    if n_bin > cfg.max_binaries {
        return Err(OracleError::TooManyBinaries(n_bin, cfg.max_binaries));
    }
    let clean = def.with_consensus(None);
    let bins: Vec<usize> = clean.layout.binary_indices().collect();
    let mut best: Option<(Vec<f64>, f64, f64)> = None; // (y, objective, violation)
    let mut assignments = 0usize;
    for bits in 0..(1u64 << n_bin) {
        let mut y = y0.to_vec();
        for (slot, &k) in bins.iter().enumerate() {
            y[k] = ((bits >> slot) & 1) as f64;
        }
        let mut p = NlpProblem::full(&clean);
        p.fix_binaries(&clean.layout, &y);
        let rep = solve_nlp(&p, &y, &cfg.nlp);
        assignments += 1;
        let mut y_fin = rep.y;
        crate::admm::normalize_rotations(&clean, &mut y_fin);
        let viol = p.max_violation(&y_fin);
        if viol <= cfg.feas_tol {
            let obj = clean.base_objective(&y_fin);
            if best.as_ref().map_or(true, |&(_, b, _)| obj < b) {
                best = Some((y_fin, obj, viol));
            }
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    match best {
        Some((y, objective, max_violation)) => Ok(OracleReport {
            status: SolveStatus::Success,
            y,
            objective,
            assignments,
            wall_time_s,
            max_violation,
        }),
        None => Ok(OracleReport {
            status: SolveStatus::Infeasible,
            y: y0.to_vec(),
            objective: f64::NAN,
            assignments,
            wall_time_s,
            max_violation: f64::INFINITY,
        }),
    }
}

pub fn solve_instance(
    instance: &Instance,
    params: PhysParams,
    cfg: &OracleConfig,
) -> Result<OracleReport, OracleError> {
    let def = build_problem(instance, params, None)?;
    let mut poses = def.initial_poses.clone();
    poses[instance.insert_index()] = default_insert_pose(instance, &params);
    let y0 = assignment_from_poses(&def, &poses);
    solve(&def, &y0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{generate_instance, GenParams};
    use crate::harness::verify::verify;

    #[test]
    fn single_item_instance_is_solved_and_verifies() {
        // One item, no stored neighbors: 1 binary (ground), 2 assignments.
        let inst = generate_instance(21, 0, &GenParams::default()).unwrap();
        let params = PhysParams::for_instance(&inst);
        let rep = solve_instance(&inst, params, &OracleConfig::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Success);
        assert_eq!(rep.assignments, 2);
        let layout = crate::formulation::layout::VariableLayout::new(1);
        let pose = layout.get_pose(&rep.y, 0);
        let v = verify(&inst, &[pose], &params);
        assert!(v.overall(), "{:?}", v.messages);
    }

    #[test]
    fn binary_cap_is_enforced() {
        let inst = generate_instance(4, 5, &GenParams::default()).unwrap();
        let err = solve_instance(&inst, PhysParams::for_instance(&inst), &OracleConfig::default());
        assert!(matches!(err, Err(OracleError::TooManyBinaries(21, 12))));
    }
}
