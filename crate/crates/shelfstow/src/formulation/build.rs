//! Constraint emission: turns an [`Instance`] into the concrete constraint
//! sets and objective over the flat variable vector.
//!
//! Conventions fixed here and relied upon everywhere else:
//! * pair plane normal `a` points from the lower-index item `i` toward `j`
//!   (`a·v ≤ b` on `i`'s vertices, `a·v ≥ b` on `j`'s);
//! * the pair force is the force exerted on `i` by `j`, so compression means
//!   `f·a ≤ 0` and the same force enters `j`'s balance with opposite sign;
//! * ground contact acts at the two body-frame bottom vertices with a
//!   vertical normal and linear friction rows.

use super::expr::QuadExpr;
use super::layout::VariableLayout;
use super::{
    Consensus, Constraint, FormulationError, Group, Instance, Objective, PhysParams, ProblemDef,
    Sense,
};
use crate::formulation::assign::default_insert_pose;

/// Hard cap on total item count; above this the dense subsolvers are not
/// sized appropriately.
pub const MAX_ITEMS: usize = 12;

pub fn build_problem(
    instance: &Instance,
    params: PhysParams,
    consensus: Option<Consensus>,
) -> Result<ProblemDef, FormulationError> {
    let n = instance.n_items();
    if n > MAX_ITEMS {
        return Err(FormulationError::TooManyItems {
            got: n,
            cap: MAX_ITEMS,
        });
    }
    let layout = VariableLayout::new(n);
    let dim = layout.dim();
    if let Some(cons) = &consensus {
        if cons.anchor.len() != dim || cons.weights.len() != dim {
            return Err(FormulationError::DimensionMismatch {
                got: cons.anchor.len(),
                want: dim,
            });
        }
    }

    let items: Vec<_> = instance.all_items().collect();
    let n_stored = instance.stored.len();
    let mut initial_poses: Vec<_> = instance.stored.iter().map(|&(_, p)| p).collect();
    initial_poses.push(default_insert_pose(instance, &params));

    let mut f_set = Vec::new();
    let mut b_set = Vec::new();

    let shelf = instance.shelf;
    let eta = params.clearance;

    for i in 0..n {
        let item = items[i];
        let (xi, yi, ci, si) = (layout.x(i), layout.y(i), layout.c(i), layout.s(i));

        // Containment: every vertex inside [η, W−η] × [η, H−η].
        for (k, h) in item.vertex_offsets().iter().enumerate() {
            // v_x = x + c·hx − s·hy ; v_y = y + s·hx + c·hy
            let vx = |sign: f64, rhs: f64| {
                QuadExpr::constant(rhs)
                    .lin(xi, sign)
                    .lin(ci, sign * h.x)
                    .lin(si, -sign * h.y)
            };
            let vy = |sign: f64, rhs: f64| {
                QuadExpr::constant(rhs)
                    .lin(yi, sign)
                    .lin(si, sign * h.x)
                    .lin(ci, sign * h.y)
            };
            f_set.push(Constraint {
                group: Group::Containment,
                sense: Sense::Le,
                expr: vx(-1.0, eta),
                label: format!("contain[i={i},k={k},x_lo]"),
            });
            f_set.push(Constraint {
                group: Group::Containment,
                sense: Sense::Le,
                expr: vx(1.0, eta - shelf.width),
                label: format!("contain[i={i},k={k},x_hi]"),
            });
            f_set.push(Constraint {
                group: Group::Containment,
                sense: Sense::Le,
                expr: vy(-1.0, eta),
                label: format!("contain[i={i},k={k},y_lo]"),
            });
            f_set.push(Constraint {
                group: Group::Containment,
                sense: Sense::Le,
                expr: vy(1.0, eta - shelf.height),
                label: format!("contain[i={i},k={k},y_hi]"),
            });
        }

        // Upright range c ≥ 0 and rotation entry boxes.
        for (expr, tag) in [
            (QuadExpr::constant(0.0).lin(ci, -1.0), "c_lo"),
            (QuadExpr::constant(-1.0).lin(ci, 1.0), "c_hi"),
            (QuadExpr::constant(-1.0).lin(si, 1.0), "s_hi"),
            (QuadExpr::constant(-1.0).lin(si, -1.0), "s_lo"),
        ] {
            f_set.push(Constraint {
                group: Group::RotationRange,
                sense: Sense::Le,
                expr,
                label: format!("rot_range[i={i},{tag}]"),
            });
        }

        // Robustness: |s_i| ≤ M_s (Σ_p z_p + z_gi) over pairs containing i.
        for sign in [1.0, -1.0] {
            let mut e = QuadExpr::constant(0.0).lin(si, sign);
            for j in 0..n {
                if j != i {
                    e = e.lin(layout.z_pair(layout.pair_index(i, j)), -params.big_m_sine);
                }
            }
            e = e.lin(layout.z_ground(i), -params.big_m_sine);
            f_set.push(Constraint {
                group: Group::Robustness,
                sense: Sense::Le,
                expr: e,
                label: format!("robust[i={i},sign={}]", sign as i32),
            });
        }

        // Ground force activation, friction and height linkage.
        let zg = layout.z_ground(i);
        for corner in 0..2 {
            for comp in 0..2 {
                let fk = layout.ground_f(i, corner, comp);
                for sign in [1.0, -1.0] {
                    f_set.push(Constraint {
                        group: Group::ForceActivation,
                        sense: Sense::Le,
                        expr: QuadExpr::constant(0.0)
                            .lin(fk, sign)
                            .lin(zg, -params.big_m_force),
                        label: format!("ground_act[i={i},corner={corner},comp={comp}]"),
                    });
                }
            }
            let fx = layout.ground_f(i, corner, 0);
            let fy = layout.ground_f(i, corner, 1);
            f_set.push(Constraint {
                group: Group::GroundFriction,
                sense: Sense::Le,
                expr: QuadExpr::constant(0.0).lin(fy, -1.0),
                label: format!("ground_fn[i={i},corner={corner}]"),
            });
            for sign in [1.0, -1.0] {
                f_set.push(Constraint {
                    group: Group::GroundFriction,
                    sense: Sense::Le,
                    expr: QuadExpr::constant(0.0).lin(fx, sign).lin(fy, -params.mu),
                    label: format!("ground_cone[i={i},corner={corner},sign={}]", sign as i32),
                });
            }
            // Bottom vertex height band when the ground binary is set:
            // v_y ≤ ground_band + M(1−z_g), with M = shelf height.
            let h = item.vertex_offsets()[2 + corner];
            f_set.push(Constraint {
                group: Group::GroundLink,
                sense: Sense::Le,
                expr: QuadExpr::constant(-params.ground_band - shelf.height)
                    .lin(yi, 1.0)
                    .lin(si, h.x)
                    .lin(ci, h.y)
                    .lin(zg, shelf.height),
                label: format!("ground_link[i={i},corner={corner}]"),
            });
        }

        // Static force balance (contacts + ground forces balance gravity).
        let mi_g = params.weight(item);
        for comp in 0..2 {
            let mut e = QuadExpr::constant(if comp == 1 { -mi_g } else { 0.0 });
            for j in 0..n {
                if j == i {
                    continue;
                }
                let p = layout.pair_index(i, j);
                let sign = if i < j { 1.0 } else { -1.0 };
                let fk = if comp == 0 {
                    layout.contact_fx(p)
                } else {
                    layout.contact_fy(p)
                };
                e = e.lin(fk, sign);
            }
            for corner in 0..2 {
                e = e.lin(layout.ground_f(i, corner, comp), 1.0);
            }
            f_set.push(Constraint {
                group: Group::ForceBalance,
                sense: Sense::Eq,
                expr: e,
                label: format!("balance[i={i},comp={comp}]"),
            });
        }

        // Rotation orthogonality c² + s² = 1 (2-D reduction; det = 1 holds
        // automatically for this parameterization).
        b_set.push(Constraint {
            group: Group::RotationUnit,
            sense: Sense::Eq,
            expr: QuadExpr::constant(-1.0).quad(ci, ci, 1.0).quad(si, si, 1.0),
            label: format!("rot_unit[i={i}]"),
        });

        // Moment balance about the centroid.
        let mut e = QuadExpr::constant(0.0);
        for j in 0..n {
            if j == i {
                continue;
            }
            let p = layout.pair_index(i, j);
            let sign = if i < j { 1.0 } else { -1.0 };
            let (rx, ry) = (layout.contact_rx(p), layout.contact_ry(p));
            let (fx, fy) = (layout.contact_fx(p), layout.contact_fy(p));
            // sign · [(r_x − x_i)·f_y − (r_y − y_i)·f_x]
            e = e
                .quad(rx, fy, sign)
                .quad(xi, fy, -sign)
                .quad(ry, fx, -sign)
                .quad(yi, fx, sign);
        }
        for corner in 0..2 {
            let h = item.vertex_offsets()[2 + corner];
            let (fx, fy) = (layout.ground_f(i, corner, 0), layout.ground_f(i, corner, 1));
            // lever = R·h ; moment = lever_x·f_y − lever_y·f_x
            e = e
                .quad(ci, fy, h.x)
                .quad(si, fy, -h.y)
                .quad(si, fx, -h.x)
                .quad(ci, fx, -h.y);
        }
        b_set.push(Constraint {
            group: Group::Moment,
            sense: Sense::Eq,
            expr: e,
            label: format!("moment[i={i}]"),
        });
    }

    // Pair constraints.
    for p in 0..layout.n_pairs {
        let (i, j) = layout.pair_items(p);
        let zp = layout.z_pair(p);
        let (ax, ay, b) = (layout.plane_ax(p), layout.plane_ay(p), layout.plane_b(p));
        let (rx, ry) = (layout.contact_rx(p), layout.contact_ry(p));
        let (fx, fy) = (layout.contact_fx(p), layout.contact_fy(p));

        // Pair force activation (big-M, linear).
        for fk in [fx, fy] {
            for sign in [1.0, -1.0] {
                f_set.push(Constraint {
                    group: Group::ForceActivation,
                    sense: Sense::Le,
                    expr: QuadExpr::constant(0.0)
                        .lin(fk, sign)
                        .lin(zp, -params.big_m_force),
                    label: format!("pair_act[p={p},var={fk},sign={}]", sign as i32),
                });
            }
        }

        // Separating plane with margin δ when z=0, clearance η when z=1:
        // margin(z) = δ + z(η − δ).
        let margin_lin = params.clearance - params.delta;
        for (side, m) in [(0usize, i), (1usize, j)] {
            let sgn = if side == 0 { 1.0 } else { -1.0 };
            let (xm, ym, cm, sm) = (layout.x(m), layout.y(m), layout.c(m), layout.s(m));
            for (k, h) in items[m].vertex_offsets().iter().enumerate() {
                // sgn·(a·v − b) + δ + (η−δ)·z ≤ 0
                let e = QuadExpr::constant(params.delta)
                    .lin(zp, margin_lin)
                    .lin(b, -sgn)
                    .quad(ax, xm, sgn)
                    .quad(ax, cm, sgn * h.x)
                    .quad(ax, sm, -sgn * h.y)
                    .quad(ay, ym, sgn)
                    .quad(ay, sm, sgn * h.x)
                    .quad(ay, cm, sgn * h.y);
                b_set.push(Constraint {
                    group: Group::PlaneSeparation,
                    sense: Sense::Le,
                    expr: e,
                    label: format!("plane[p={p},item={m},k={k}]"),
                });
            }
        }

        // Unit normal.
        b_set.push(Constraint {
            group: Group::PlaneUnit,
            sense: Sense::Eq,
            expr: QuadExpr::constant(-1.0).quad(ax, ax, 1.0).quad(ay, ay, 1.0),
            label: format!("plane_unit[p={p}]"),
        });

        // Compression plus polyhedral friction cone against the plane
        // normal (force on i from j points along −a).
        b_set.push(Constraint {
            group: Group::Friction,
            sense: Sense::Le,
            expr: QuadExpr::constant(0.0).quad(fx, ax, 1.0).quad(fy, ay, 1.0),
            label: format!("compress[p={p}]"),
        });
        for sign in [1.0, -1.0] {
            // sign·(f·t) + μ·(f·a) ≤ 0 with t = (−a_y, a_x)
            let e = QuadExpr::constant(0.0)
                .quad(fx, ay, -sign)
                .quad(fy, ax, sign)
                .quad(fx, ax, params.mu)
                .quad(fy, ay, params.mu);
            b_set.push(Constraint {
                group: Group::Friction,
                sense: Sense::Le,
                expr: e,
                label: format!("cone[p={p},sign={}]", sign as i32),
            });
        }

        // Contact point localization: r within a box around each item's
        // centroid, relaxed by big-M when the pair is inactive.
        for m in [i, j] {
            let d = 0.5 * (items[m].width + items[m].height);
            for (rk, xk) in [(rx, layout.x(m)), (ry, layout.y(m))] {
                for sign in [1.0, -1.0] {
                    b_set.push(Constraint {
                        group: Group::Localization,
                        sense: Sense::Le,
                        expr: QuadExpr::constant(-d - params.big_m_contact)
                            .lin(rk, sign)
                            .lin(xk, -sign)
                            .lin(zp, params.big_m_contact),
                        label: format!("localize[p={p},item={m},var={rk},sign={}]", sign as i32),
                    });
                }
            }
        }
    }

    // Objective: movement of the stored items only.
    let mut weights = vec![0.0; dim];
    let mut reference = vec![0.0; dim];
    for i in 0..n {
        reference[layout.x(i)] = initial_poses[i].x;
        reference[layout.y(i)] = initial_poses[i].y;
        reference[layout.c(i)] = initial_poses[i].rot.c;
        reference[layout.s(i)] = initial_poses[i].rot.s;
        if i < n_stored {
            weights[layout.x(i)] = params.w_x;
            weights[layout.y(i)] = params.w_x;
            // ‖R − R₀‖²_F = 2[(c−c₀)² + (s−s₀)²]
            weights[layout.c(i)] = 2.0 * params.w_theta;
            weights[layout.s(i)] = 2.0 * params.w_theta;
        }
    }

    Ok(ProblemDef {
        layout,
        f_set,
        b_set,
        objective: Objective { weights, reference },
        consensus,
        params,
        shelf,
        items,
        initial_poses,
        n_stored,
    })
}
