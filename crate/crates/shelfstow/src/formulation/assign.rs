//! Construction of full variable assignments from item poses: contact
//! binaries and planes from the collision oracle, contact forces from a
//! least-squares equilibrium fit. Used for warm starts and for the
//! hand-built feasible assignments in tests.

use super::{Instance, PhysParams, ProblemDef};
use crate::geometry::{item_vertices, rects_overlap, separating_witness};
use crate::{Pose2, Vec2};
use nalgebra::{DMatrix, DVector};

/// Default starting pose for the item to insert: centered in the shelf,
/// upright, resting on the floor. Deliberately ignorant of the free-gap
/// structure so no solver is handed the answer.
pub fn default_insert_pose(instance: &Instance, params: &PhysParams) -> Pose2 {
    Pose2::from_angle(
        0.5 * instance.shelf.width,
        0.5 * instance.insert.height + params.clearance,
        0.0,
    )
}

/// Build a complete variable vector from the given item poses (layout
/// order). Binaries come from the geometric gap structure, separating
/// planes from the independent witness oracle, and forces from a
/// least-squares equilibrium fit over the active contacts.
pub fn assignment_from_poses(problem: &ProblemDef, poses: &[Pose2]) -> Vec<f64> {
    let layout = problem.layout;
    let params = &problem.params;
    assert_eq!(poses.len(), layout.n_items);
    let mut y = vec![0.0; layout.dim()];

    for (i, pose) in poses.iter().enumerate() {
        layout.set_pose(&mut y, i, *pose);
    }

    // Pair planes and binaries.
    for p in 0..layout.n_pairs {
        let (i, j) = layout.pair_items(p);
        let (ii, ij) = (problem.items[i], problem.items[j]);
        let (overlap, pen) = rects_overlap(poses[i], ii, poses[j], ij);
        let touching = overlap || -pen <= params.delta;
        y[layout.z_pair(p)] = if touching { 1.0 } else { 0.0 };
        let (a, b) = match separating_witness(poses[i], ii, poses[j], ij) {
            Some(w) => w,
            None => {
                // Overlapping: fall back to the centroid direction.
                let d = poses[j].position().sub(poses[i].position());
                let n = d.norm();
                let a = if n > 1e-12 {
                    d.scale(1.0 / n)
                } else {
                    Vec2::new(1.0, 0.0)
                };
                let mid = poses[i].position().add(poses[j].position()).scale(0.5);
                (a, a.dot(mid))
            }
        };
        y[layout.plane_ax(p)] = a.x;
        y[layout.plane_ay(p)] = a.y;
        y[layout.plane_b(p)] = b;
        let mid = poses[i].position().add(poses[j].position()).scale(0.5);
        y[layout.contact_rx(p)] = mid.x;
        y[layout.contact_ry(p)] = mid.y;
    }

    // Ground binaries from bottom-vertex heights.
    for i in 0..layout.n_items {
        let vs = item_vertices(poses[i], problem.items[i]);
        let low = vs.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
        let grounded = low <= params.ground_band + params.delta;
        y[layout.z_ground(i)] = if grounded { 1.0 } else { 0.0 };
    }

    fit_forces(problem, poses, &mut y);
    y
}

/// Assignment for the pre-removal configuration (the generator's
/// feasibility certificate).
pub fn certificate_assignment(problem: &ProblemDef, instance: &Instance) -> Vec<f64> {
    assignment_from_poses(problem, &instance.certificate_poses())
}

/// Least-squares equilibrium fit: minimum-norm forces over the active
/// contacts satisfying the per-item force and moment balance rows.
fn fit_forces(problem: &ProblemDef, poses: &[Pose2], y: &mut [f64]) {
    let layout = problem.layout;
    let n = layout.n_items;

    // Column bookkeeping: active pair forces then active ground forces.
    let mut cols: Vec<usize> = Vec::new();
    for p in 0..layout.n_pairs {
        if y[layout.z_pair(p)] > 0.5 {
            cols.push(layout.contact_fx(p));
            cols.push(layout.contact_fy(p));
        }
    }
    for i in 0..n {
        if y[layout.z_ground(i)] > 0.5 {
            for corner in 0..2 {
                for comp in 0..2 {
                    cols.push(layout.ground_f(i, corner, comp));
                }
            }
        }
    }
    if cols.is_empty() {
        return;
    }
    let col_of = |k: usize| cols.iter().position(|&c| c == k);

    // Rows: force balance (2 per item) + moment balance (1 per item).
    let mut a = DMatrix::zeros(3 * n, cols.len());
    let mut rhs = DVector::zeros(3 * n);
    for i in 0..n {
        rhs[3 * i + 1] = problem.params.weight(problem.items[i]);
        for j in 0..n {
            if j == i {
                continue;
            }
            let p = layout.pair_index(i, j);
            if y[layout.z_pair(p)] <= 0.5 {
                continue;
            }
            let sign = if i < j { 1.0 } else { -1.0 };
            let (cfx, cfy) = (
                col_of(layout.contact_fx(p)).unwrap(),
                col_of(layout.contact_fy(p)).unwrap(),
            );
            a[(3 * i, cfx)] += sign;
            a[(3 * i + 1, cfy)] += sign;
            let lever = Vec2::new(
                y[layout.contact_rx(p)] - poses[i].x,
                y[layout.contact_ry(p)] - poses[i].y,
            );
            a[(3 * i + 2, cfy)] += sign * lever.x;
            a[(3 * i + 2, cfx)] -= sign * lever.y;
        }
        if y[layout.z_ground(i)] > 0.5 {
            for corner in 0..2 {
                let h = problem.items[i].vertex_offsets()[2 + corner];
                let lever = poses[i].rot.apply(h);
                let (cfx, cfy) = (
                    col_of(layout.ground_f(i, corner, 0)).unwrap(),
                    col_of(layout.ground_f(i, corner, 1)).unwrap(),
                );
                a[(3 * i, cfx)] += 1.0;
                a[(3 * i + 1, cfy)] += 1.0;
                a[(3 * i + 2, cfy)] += lever.x;
                a[(3 * i + 2, cfx)] -= lever.y;
            }
        }
    }

    let svd = a.svd(true, true);
    if let Ok(sol) = svd.solve(&rhs, 1e-10) {
        for (c, &k) in cols.iter().enumerate() {
            y[k] = sol[c];
        }
    }
}
