//! Concrete MINLP for item stowing: variable layout, the mixed-integer
//! convex constraint set `f`, the mixed-integer nonlinear set `b`, the
//! quadratic movement objective plus optional consensus term, analytic first
//! derivatives, instance generation and JSON (de)serialization.

pub mod expr;
pub mod layout;

mod assign;
mod build;
mod generate;
mod io;

pub use assign::{assignment_from_poses, certificate_assignment, default_insert_pose};
pub use build::build_problem;
pub use generate::{generate_instance, GenParams};
pub use io::{Solution, SolutionForces};

use crate::{Pose2, RectItem, Shelf};
use expr::QuadExpr;
use layout::VariableLayout;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("variable vector has length {got}, layout expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("instance has {got} items, cap is {cap}")]
    TooManyItems { got: usize, cap: usize },
    #[error("instance generation failed after {retries} retries: {reason}")]
    GenerationFailed { retries: usize, reason: String },
    #[error("malformed instance: {0}")]
    BadInstance(String),
}

/// Physical and big-M parameters of the formulation. All defaults are
/// exposed through the CLI config file.
#[derive(Debug, Clone, Copy)]
pub struct PhysParams {
    /// Minimal separation margin between non-contacting item pairs.
    pub delta: f64,
    /// Small positive clearance enforced at shelf walls and at declared
    /// contacts so solver tolerance slop can never turn into geometric
    /// penetration or containment violations.
    pub clearance: f64,
    /// Upper edge of the ground-contact height band: a ground binary forces
    /// the two bottom vertices into `[clearance, ground_band]`.
    pub ground_band: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Area density (mass per unit area).
    pub density: f64,
    /// Gravitational acceleration.
    pub gravity: f64,
    /// Big-M bound on any contact force component.
    pub big_m_force: f64,
    /// Big-M bound on `|s_i|` in the robustness implication.
    pub big_m_sine: f64,
    /// Big-M used to relax contact-point localization boxes.
    pub big_m_contact: f64,
    /// Position movement weight in the objective.
    pub w_x: f64,
    /// Rotation movement weight in the objective.
    pub w_theta: f64,
}

impl PhysParams {
    /// Defaults scaled to an instance: `δ = 0.01·min item width`,
    /// `M_f = 10·total weight`.
    pub fn for_instance(instance: &Instance) -> Self {
        let min_w = instance
            .all_items()
            .map(|it| it.width)
            .fold(f64::INFINITY, f64::min);
        let density = 1.0;
        let gravity = 9.81;
        let total_weight: f64 = instance
            .all_items()
            .map(|it| density * it.area() * gravity)
            .sum();
        let delta = 0.01 * min_w;
        PhysParams {
            delta,
            clearance: 1e-4,
            ground_band: 1e-4 + 0.5 * delta,
            mu: 0.5,
            density,
            gravity,
            big_m_force: 10.0 * total_weight,
            big_m_sine: 1.0,
            big_m_contact: instance.shelf.width + instance.shelf.height,
            w_x: 1.0,
            w_theta: 10.0,
        }
    }

    pub fn mass(&self, item: RectItem) -> f64 {
        self.density * item.area()
    }

    pub fn weight(&self, item: RectItem) -> f64 {
        self.mass(item) * self.gravity
    }
}

/// One stowing instance: shelf, stored items with their initial poses, and
/// the item to insert. `insert_ref` is the insert item's pose in the
/// pre-removal configuration the generator started from; it certifies that
/// the instance is feasible and is never used to warm-start a solver.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub seed: u64,
    pub shelf: Shelf,
    pub stored: Vec<(RectItem, Pose2)>,
    pub insert: RectItem,
    pub insert_ref: Pose2,
}

impl Instance {
    pub fn n_items(&self) -> usize {
        self.stored.len() + 1
    }

    /// All items in layout order: stored items first, insert item last.
    pub fn all_items(&self) -> impl Iterator<Item = RectItem> + '_ {
        self.stored
            .iter()
            .map(|&(it, _)| it)
            .chain(std::iter::once(self.insert))
    }

    pub fn item(&self, i: usize) -> RectItem {
        if i < self.stored.len() {
            self.stored[i].0
        } else {
            self.insert
        }
    }

    /// Index of the insert item in layout order.
    pub fn insert_index(&self) -> usize {
        self.stored.len()
    }

    /// Pre-removal poses (stored poses plus the insert certificate pose).
    pub fn certificate_poses(&self) -> Vec<Pose2> {
        let mut poses: Vec<Pose2> = self.stored.iter().map(|&(_, p)| p).collect();
        poses.push(self.insert_ref);
        poses
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `g(y) = 0`
    Eq,
    /// `g(y) ≤ 0`
    Le,
}

/// Constraint families, used for grouped penalty control and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Containment,
    RotationRange,
    RotationUnit,
    PlaneSeparation,
    PlaneUnit,
    ForceActivation,
    ForceBalance,
    Moment,
    Friction,
    GroundFriction,
    GroundLink,
    Robustness,
    Localization,
    Complementarity,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub group: Group,
    pub sense: Sense,
    pub expr: QuadExpr,
    pub label: String,
}

impl Constraint {
    /// Residual with inequality semantics folded in: `max(0, g)` for `≤`,
    /// `|g|` for `=`.
    pub fn residual(&self, y: &[f64]) -> f64 {
        let g = self.expr.eval(y);
        match self.sense {
            Sense::Eq => g.abs(),
            Sense::Le => g.max(0.0),
        }
    }
}

/// Diagonal quadratic movement objective `Σ w_k (y_k − ref_k)²`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub weights: Vec<f64>,
    pub reference: Vec<f64>,
}

impl Objective {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.reference)
            .zip(y)
            .map(|((&w, &r), &v)| w * (v - r) * (v - r))
            .sum()
    }

    pub fn add_grad(&self, y: &[f64], grad: &mut [f64]) {
        for k in 0..y.len() {
            grad[k] += 2.0 * self.weights[k] * (y[k] - self.reference[k]);
        }
    }
}

/// Consensus anchor term `½ ‖y − anchor‖²_G` with diagonal `G`.
#[derive(Debug, Clone)]
pub struct Consensus {
    pub anchor: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Consensus {
    pub fn value(&self, y: &[f64]) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&self.anchor)
            .zip(y)
            .map(|((&g, &a), &v)| g * (v - a) * (v - a))
            .sum::<f64>()
    }

    pub fn add_grad(&self, y: &[f64], grad: &mut [f64]) {
        for k in 0..y.len() {
            grad[k] += self.weights[k] * (y[k] - self.anchor[k]);
        }
    }
}

/// The assembled problem. Immutable after build; evaluation and jacobian
/// calls are reentrant.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub layout: VariableLayout,
    pub f_set: Vec<Constraint>,
    pub b_set: Vec<Constraint>,
    pub objective: Objective,
    pub consensus: Option<Consensus>,
    pub params: PhysParams,
    pub shelf: Shelf,
    pub items: Vec<RectItem>,
    pub initial_poses: Vec<Pose2>,
    pub n_stored: usize,
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub objective: f64,
    pub f_residuals: Vec<f64>,
    pub b_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Jacobian {
    pub objective_grad: Vec<f64>,
    pub f_rows: Vec<Vec<(usize, f64)>>,
    pub b_rows: Vec<Vec<(usize, f64)>>,
}

impl ProblemDef {
    fn check_dim(&self, y: &[f64]) -> Result<(), FormulationError> {
        if y.len() != self.layout.dim() {
            return Err(FormulationError::DimensionMismatch {
                got: y.len(),
                want: self.layout.dim(),
            });
        }
        Ok(())
    }

    /// Objective including the consensus term when present.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        let mut v = self.objective.value(y);
        if let Some(cons) = &self.consensus {
            v += cons.value(y);
        }
        v
    }

    /// Movement objective alone (the quantity reported in solve reports).
    pub fn base_objective(&self, y: &[f64]) -> f64 {
        self.objective.value(y)
    }

    pub fn objective_grad(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        self.objective.add_grad(y, &mut g);
        if let Some(cons) = &self.consensus {
            cons.add_grad(y, &mut g);
        }
        g
    }

    pub fn eval(&self, y: &[f64]) -> Result<EvalResult, FormulationError> {
        self.check_dim(y)?;
        Ok(EvalResult {
            objective: self.objective_value(y),
            f_residuals: self.f_set.iter().map(|c| c.residual(y)).collect(),
            b_residuals: self.b_set.iter().map(|c| c.residual(y)).collect(),
        })
    }

    /// Sparse first derivatives of every constraint row (of the raw `g`,
    /// not the folded residual) and the objective gradient.
    pub fn jacobian(&self, y: &[f64]) -> Result<Jacobian, FormulationError> {
        self.check_dim(y)?;
        Ok(Jacobian {
            objective_grad: self.objective_grad(y),
            f_rows: self.f_set.iter().map(|c| c.expr.grad_sparse(y)).collect(),
            b_rows: self.b_set.iter().map(|c| c.expr.grad_sparse(y)).collect(),
        })
    }

    /// Replace the consensus term (used by the ADMM loop between iterations).
    pub fn with_consensus(&self, consensus: Option<Consensus>) -> ProblemDef {
        let mut p = self.clone();
        p.consensus = consensus;
        p
    }

    pub fn max_residual(&self, y: &[f64]) -> f64 {
        self.f_set
            .iter()
            .chain(&self.b_set)
            .map(|c| c.residual(y))
            .fold(0.0, f64::max)
    }
}
