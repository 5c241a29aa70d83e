//! Instance generation: place `n_existing + 1` upright books side by side
//! with random sizes and random gaps, then remove one at random as the item
//! to insert. The pre-removal configuration is retained as the feasibility
//! certificate, so every generated instance is solvable by construction.

use super::{FormulationError, Instance};
use crate::geometry::{item_vertices, rects_overlap, shelf_contains};
use crate::{Pose2, RectItem, Shelf};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    /// Fixed shelf width; when `None` the width adapts to the sampled books
    /// plus a random slack.
    pub shelf_width: Option<f64>,
    pub shelf_height: f64,
    pub width_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Minimum gap between neighbors (and to the walls) in the pre-removal
    /// configuration.
    pub min_gap: f64,
    /// Total free width as a multiple of the mean book width, sampled
    /// uniformly from this range (adaptive-shelf mode only).
    pub slack_range: (f64, f64),
    pub max_retries: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            shelf_width: None,
            shelf_height: 0.32,
            width_range: (0.04, 0.09),
            height_range: (0.16, 0.30),
            min_gap: 2e-3,
            slack_range: (0.5, 1.5),
            max_retries: 64,
        }
    }
}

pub fn generate_instance(
    seed: u64,
    n_existing: usize,
    gen: &GenParams,
) -> Result<Instance, FormulationError> {
    let n_total = n_existing + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..gen.max_retries {
        let widths: Vec<f64> = (0..n_total)
            .map(|_| rng.gen_range(gen.width_range.0..gen.width_range.1))
            .collect();
        let heights: Vec<f64> = (0..n_total)
            .map(|_| rng.gen_range(gen.height_range.0..gen.height_range.1))
            .collect();
        let total_width: f64 = widths.iter().sum();
        let n_slots = n_total + 1;

        let shelf_width = match gen.shelf_width {
            Some(w) => w,
            None => {
                let mean_w = total_width / n_total as f64;
                let slack = rng.gen_range(gen.slack_range.0..gen.slack_range.1) * mean_w;
                total_width + slack.max(n_slots as f64 * gen.min_gap * 1.5)
            }
        };
        let slack = shelf_width - total_width - n_slots as f64 * gen.min_gap;
        if slack < 0.0 || heights.iter().any(|&h| h > gen.shelf_height) {
            continue; // resample sizes
        }

        // Random split of the remaining slack over the gap slots.
        let mut cuts: Vec<f64> = (0..n_slots).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cut_sum: f64 = cuts.iter().sum();
        for c in &mut cuts {
            *c = gen.min_gap + slack * *c / cut_sum;
        }

        // Build the pre-removal configuration, upright on the floor.
        let clearance = 1e-4; // matches PhysParams default
        let shelf = Shelf::new(shelf_width, gen.shelf_height);
        let mut placed: Vec<(RectItem, Pose2)> = Vec::with_capacity(n_total);
        let mut cursor = 0.0;
        for k in 0..n_total {
            cursor += cuts[k];
            let item = RectItem::new(widths[k], heights[k]);
            let pose = Pose2::from_angle(
                cursor + 0.5 * widths[k],
                0.5 * heights[k] + clearance,
                0.0,
            );
            placed.push((item, pose));
            cursor += widths[k];
        }

        // Sanity: containment and pairwise disjointness by construction.
        let ok = placed.iter().all(|&(item, pose)| {
            shelf_contains(shelf, &item_vertices(pose, item), 0.0)
        }) && (0..n_total).all(|i| {
            (i + 1..n_total).all(|j| {
                !rects_overlap(placed[i].1, placed[i].0, placed[j].1, placed[j].0).0
            })
        });
        if !ok {
            continue;
        }

        let removed = rng.gen_range(0..n_total);
        let (insert, insert_ref) = placed.remove(removed);
        return Ok(Instance {
            id: format!("inst-{seed}-n{n_existing}"),
            seed,
            shelf,
            stored: placed,
            insert,
            insert_ref,
        });
    }
    Err(FormulationError::GenerationFailed {
        retries: gen.max_retries,
        reason: "sampled sizes never fit the shelf".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = generate_instance(1, 3, &GenParams::default()).unwrap();
        let b = generate_instance(1, 3, &GenParams::default()).unwrap();
        let ja = serde_json::to_string(&crate::formulation::io::InstanceFile::from(&a)).unwrap();
        let jb = serde_json::to_string(&crate::formulation::io::InstanceFile::from(&b)).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn item_counts_and_layout_sizes() {
        let inst = generate_instance(3, 7, &GenParams::default()).unwrap();
        assert_eq!(inst.n_items(), 8);
        let layout = crate::formulation::layout::VariableLayout::new(inst.n_items());
        assert_eq!(layout.n_bin, 36);
    }

    #[test]
    fn pre_removal_configuration_is_disjoint_and_contained() {
        for seed in [7u64, 8, 9] {
            let inst = generate_instance(seed, 3, &GenParams::default()).unwrap();
            let poses = inst.certificate_poses();
            let items: Vec<_> = inst.all_items().collect();
            for i in 0..items.len() {
                assert!(shelf_contains(
                    inst.shelf,
                    &item_vertices(poses[i], items[i]),
                    0.0
                ));
                for j in i + 1..items.len() {
                    let (hit, pen) = rects_overlap(poses[i], items[i], poses[j], items[j]);
                    assert!(!hit, "seed {seed}: items {i},{j} overlap by {pen}");
                }
            }
        }
    }
}
