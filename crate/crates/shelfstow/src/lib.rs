//! Planning library for 2-D item stowing: inserting a rectangular item into an
//! occupied shelf with minimal disturbance to the items already stored.
//!
//! The problem is formulated as a mixed-integer nonlinear program (poses,
//! separating planes, contact forces, contact binaries) and solved by ADMM
//! splitting into a mixed-integer convex subproblem (branch-and-bound over an
//! in-house operator-splitting QP) and a relaxed nonlinear subproblem
//! (augmented Lagrangian). An MPCC reformulation is provided as a baseline,
//! together with an exhaustive oracle, an independent feasibility verifier,
//! a benchmark harness, an SVG renderer and an admittance-control simulator.

pub mod admm;
pub mod convex_qp;
pub mod formulation;
pub mod geometry;
pub mod harness;
pub mod mip;
pub mod mpcc;
pub mod nlp;

/// Scalar type used by the solver stack. The geometry core is generic over
/// the scalar; everything above it is pinned to `f64`.
pub type Scalar = f64;

pub type Vec2 = geometry::Vec2<Scalar>;
pub type Rot2 = geometry::Rot2<Scalar>;
pub type Pose2 = geometry::Pose2<Scalar>;
pub type RectItem = geometry::RectItem<Scalar>;
pub type Shelf = geometry::Shelf<Scalar>;

/// Single-precision aliases for callers that do not need solver accuracy.
pub type Vec2f = geometry::Vec2<f32>;
pub type Rot2f = geometry::Rot2<f32>;
pub type Pose2f = geometry::Pose2<f32>;
pub type RectItemf = geometry::RectItem<f32>;
pub type Shelff = geometry::Shelf<f32>;
