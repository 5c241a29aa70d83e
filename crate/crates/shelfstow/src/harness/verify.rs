//! Independent feasibility verification. Works purely from instance
//! geometry and final poses — none of the solver's internal variables are
//! trusted. Equilibrium is checked as an existence problem: is there any
//! set of non-negative friction-cone coefficients at the geometrically
//! plausible contacts that balances gravity?

use crate::formulation::{Instance, PhysParams};
use crate::geometry::{item_vertices, point_rect_distance, rects_overlap, separating_witness};
use crate::{Pose2, Vec2};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub overlap_ok: bool,
    pub containment_ok: bool,
    pub rotation_ok: bool,
    pub equilibrium_ok: bool,
    /// Worst pairwise penetration depth (0 when disjoint).
    pub worst_penetration: f64,
    /// Worst distance outside the shelf (0 when contained).
    pub worst_containment: f64,
    pub worst_rotation_defect: f64,
    /// Equilibrium force residual relative to the total weight.
    pub equilibrium_residual: f64,
    pub messages: Vec<String>,
}

impl VerifyReport {
    pub fn overall(&self) -> bool {
        self.overlap_ok && self.containment_ok && self.rotation_ok && self.equilibrium_ok
    }
}

/// Non-negative least squares, Lawson–Hanson active set method.
/// Returns `x ≥ 0` minimizing `‖a·x − b‖₂`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut w = a.transpose() * (b - a * &x);
    for _ in 0..(3 * n.max(1)) {
        // Most violated dual among the active (zero) set.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, v)| w[j] > v) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((j_in, _)) = best else { break };
        passive[j_in] = true;

        loop {
            // Least squares on the passive set.
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
            let sol = ap
                .clone()
                .svd(true, true)
                .solve(b, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(cols.len()));
            if sol.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &j) in cols.iter().enumerate() {
                    x[j] = sol[c];
                }
                break;
            }
            // Step toward `sol` until the first coordinate hits zero.
            let mut alpha = f64::INFINITY;
            for (c, &j) in cols.iter().enumerate() {
                if sol[c] <= 0.0 {
                    let t = x[j] / (x[j] - sol[c]);
                    alpha = alpha.min(t);
                }
            }
            for (c, &j) in cols.iter().enumerate() {
                x[j] += alpha * (sol[c] - x[j]);
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
        w = a.transpose() * (b - a * &x);
    }
    x
}

/// One candidate contact: a point, a unit normal pointing into the item the
/// force acts on, and the two items it couples (`None` = environment).
struct ContactCandidate {
    point: Vec2,
    normal: Vec2,
    on_item: usize,
    from_item: Option<usize>,
}

fn cone_edges(normal: Vec2, mu: f64) -> [Vec2; 2] {
    let t = normal.perp();
    let e_plus = normal.add(t.scale(mu));
    let e_minus = normal.sub(t.scale(mu));
    [
        e_plus.scale(1.0 / e_plus.norm()),
        e_minus.scale(1.0 / e_minus.norm()),
    ]
}

fn collect_contacts(instance: &Instance, poses: &[Pose2], ctol: f64) -> Vec<ContactCandidate> {
    let n = instance.n_items();
    let items: Vec<_> = instance.all_items().collect();
    let shelf = instance.shelf;
    let mut out = Vec::new();

    for i in 0..n {
        for v in item_vertices(poses[i], items[i]) {
            // Ground and wall supports push the item inward.
            if v.y <= ctol {
                out.push(ContactCandidate {
                    point: v,
                    normal: Vec2::new(0.0, 1.0),
                    on_item: i,
                    from_item: None,
                });
            }
            if v.x <= ctol {
                out.push(ContactCandidate {
                    point: v,
                    normal: Vec2::new(1.0, 0.0),
                    on_item: i,
                    from_item: None,
                });
            }
            if v.x >= shelf.width - ctol {
                out.push(ContactCandidate {
                    point: v,
                    normal: Vec2::new(-1.0, 0.0),
                    on_item: i,
                    from_item: None,
                });
            }
            if v.y >= shelf.height - ctol {
                out.push(ContactCandidate {
                    point: v,
                    normal: Vec2::new(0.0, -1.0),
                    on_item: i,
                    from_item: None,
                });
            }
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            let (_, pen) = rects_overlap(poses[i], items[i], poses[j], items[j]);
            let gap = -pen; // positive when disjoint
            if gap > ctol {
                continue;
            }
            // Witness axis oriented i → j: force on i acts along −a.
            let Some((a, _)) = separating_witness(poses[i], items[i], poses[j], items[j]) else {
                continue;
            };
            // Vertices of either item close to the other's surface.
            for v in item_vertices(poses[i], items[i]) {
                if point_rect_distance(v, poses[j], items[j]) <= ctol {
                    out.push(ContactCandidate {
                        point: v,
                        normal: a.scale(-1.0),
                        on_item: i,
                        from_item: Some(j),
                    });
                }
            }
            for v in item_vertices(poses[j], items[j]) {
                if point_rect_distance(v, poses[i], items[i]) <= ctol {
                    out.push(ContactCandidate {
                        point: v,
                        normal: a,
                        on_item: j,
                        from_item: Some(i),
                    });
                }
            }
        }
    }
    out
}

/// Equilibrium feasibility: NNLS over friction-cone edge coefficients at
/// the candidate contacts against the per-item force and moment balance.
/// Returns the residual relative to the total weight.
fn equilibrium_residual(
    instance: &Instance,
    poses: &[Pose2],
    params: &PhysParams,
    ctol: f64,
) -> f64 {
    let n = instance.n_items();
    let items: Vec<_> = instance.all_items().collect();
    let contacts = collect_contacts(instance, poses, ctol);
    let total_weight: f64 = items.iter().map(|&it| params.weight(it)).sum();

    let n_cols = 2 * contacts.len();
    let mut a = DMatrix::zeros(3 * n, n_cols.max(1));
    let mut b = DVector::zeros(3 * n);
    // Moment rows are scaled into force units so one tolerance applies.
    let len = instance.shelf.width.max(instance.shelf.height);
    for i in 0..n {
        b[3 * i + 1] = params.weight(items[i]);
    }
    for (c, contact) in contacts.iter().enumerate() {
        for (e, edge) in cone_edges(contact.normal, params.mu).iter().enumerate() {
            let col = 2 * c + e;
            let mut add = |item: usize, f: Vec2| {
                let lever = contact.point.sub(poses[item].position());
                a[(3 * item, col)] += f.x;
                a[(3 * item + 1, col)] += f.y;
                a[(3 * item + 2, col)] += lever.cross(f) / len;
            };
            add(contact.on_item, *edge);
            if let Some(other) = contact.from_item {
                add(other, edge.scale(-1.0));
            }
        }
    }

    let x = nnls(&a, &b, 1e-12);
    let res = (&b - &a * &x).norm();
    res / total_weight.max(1e-12)
}

/// Verify a final configuration independently of how it was produced.
pub fn verify(instance: &Instance, poses: &[Pose2], params: &PhysParams) -> VerifyReport {
    assert_eq!(poses.len(), instance.n_items());
    let items: Vec<_> = instance.all_items().collect();
    let n = items.len();
    let min_dim = items
        .iter()
        .flat_map(|it| [it.width, it.height])
        .fold(f64::INFINITY, f64::min);
    let pen_tol = 1e-6 * min_dim;
    let mut messages = Vec::new();

    // Rotation validity (on the raw (c, s) the caller provides).
    let worst_rotation_defect = poses
        .iter()
        .map(|p| p.rot.unit_defect())
        .fold(0.0, f64::max);
    let rotation_ok = worst_rotation_defect <= 1e-5;
    if !rotation_ok {
        messages.push(format!("rotation defect {worst_rotation_defect:.2e}"));
    }

    // Pairwise non-penetration.
    let mut worst_penetration: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (hit, pen) = rects_overlap(poses[i], items[i], poses[j], items[j]);
            if hit && pen > worst_penetration {
                worst_penetration = pen;
                messages.push(format!("items {i},{j} penetrate by {pen:.2e}"));
            }
        }
    }
    let overlap_ok = worst_penetration <= pen_tol;

    // Containment in the closed shelf region.
    let mut worst_containment: f64 = 0.0;
    for (i, (&item, &pose)) in items.iter().zip(poses).enumerate() {
        for v in item_vertices(pose, item) {
            let out = (-v.x)
                .max(v.x - instance.shelf.width)
                .max(-v.y)
                .max(v.y - instance.shelf.height)
                .max(0.0);
            if out > worst_containment {
                worst_containment = out;
                messages.push(format!("item {i} outside shelf by {out:.2e}"));
            }
        }
    }
    let containment_ok = worst_containment <= pen_tol;

    // Static equilibrium via existence of contact forces.
    let ctol = params.delta + 1e-5;
    let residual = equilibrium_residual(instance, poses, params, ctol);
    let equilibrium_ok = residual <= 1e-4;
    if !equilibrium_ok {
        messages.push(format!("equilibrium residual {residual:.2e}"));
    }

    VerifyReport {
        overlap_ok,
        containment_ok,
        rotation_ok,
        equilibrium_ok,
        worst_penetration,
        worst_containment,
        worst_rotation_defect,
        equilibrium_residual: residual,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{generate_instance, GenParams};
    use crate::{RectItem, Shelf};

    #[test]
    fn nnls_matches_hand_solutions() {
        // Unconstrained optimum already non-negative.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[2.0, 3.0]);
        let x = nnls(&a, &b, 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 3.0).abs() < 1e-10);

        // Negative component must clamp to zero: min ‖x − (−1, 2)‖, x ≥ 0.
        let b = DVector::from_column_slice(&[-1.0, 2.0]);
        let x = nnls(&a, &b, 1e-12);
        assert!(x[0].abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn nnls_overdetermined() {
        // Columns (1,1,0) and (0,1,1), target (1,2,1): x = (1,1) exactly.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0, 1.0]);
        let x = nnls(&a, &b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    fn single_item_instance(pose: Pose2) -> Instance {
        Instance {
            id: "test".into(),
            seed: 0,
            shelf: Shelf::new(1.0, 0.5),
            stored: vec![],
            insert: RectItem::new(0.1, 0.3),
            insert_ref: pose,
        }
    }

    #[test]
    fn grounded_upright_item_verifies() {
        let pose = Pose2::from_angle(0.5, 0.15 + 1e-4, 0.0);
        let inst = single_item_instance(pose);
        let params = PhysParams::for_instance(&inst);
        let rep = verify(&inst, &[pose], &params);
        assert!(rep.overall(), "{:?}", rep.messages);
    }

    #[test]
    fn floating_item_fails_equilibrium_only() {
        let pose = Pose2::from_angle(0.5, 0.25, 0.0);
        let inst = single_item_instance(pose);
        let params = PhysParams::for_instance(&inst);
        let rep = verify(&inst, &[pose], &params);
        assert!(rep.overlap_ok && rep.containment_ok && rep.rotation_ok);
        assert!(!rep.equilibrium_ok);
    }

    #[test]
    fn out_of_shelf_item_fails_containment() {
        let pose = Pose2::from_angle(-0.02, 0.15 + 1e-4, 0.0);
        let inst = single_item_instance(pose);
        let params = PhysParams::for_instance(&inst);
        let rep = verify(&inst, &[pose], &params);
        assert!(!rep.containment_ok);
    }

    #[test]
    fn leaning_item_against_wall_verifies() {
        // A slender item leaning like a ladder: top vertex against the left
        // wall, bottom vertex on the ground, friction carries the rest.
        let item = RectItem::new(0.05, 0.4);
        let inst = Instance {
            id: "lean".into(),
            seed: 0,
            shelf: Shelf::new(1.0, 0.42),
            stored: vec![],
            insert: item,
            insert_ref: Pose2::from_angle(0.5, 0.2, 0.0),
        };
        let params = PhysParams::for_instance(&inst);
        let r = crate::geometry::rot_from_angle(0.15);
        let off = item.vertex_offsets().map(|h| r.apply(h));
        let min_x = off.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        let min_y = off.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
        // Leftmost vertex at the wall, lowest vertex on the ground.
        let pose = Pose2::new(1e-5 - min_x, 1e-5 - min_y, r);
        let rep = verify(&inst, &[pose], &params);
        assert!(rep.containment_ok, "{:?}", rep.messages);
        assert!(rep.equilibrium_ok, "{:?}", rep.messages);
    }

    #[test]
    fn generated_pre_removal_configurations_verify() {
        for seed in 0..5u64 {
            let inst = generate_instance(seed, 3, &GenParams::default()).unwrap();
            let params = PhysParams::for_instance(&inst);
            let rep = verify(&inst, &inst.certificate_poses(), &params);
            assert!(rep.overall(), "seed {seed}: {:?}", rep.messages);
        }
    }
}
