//! Flat variable layout `y = (x, z)` shared by every solver layer.
//!
//! Continuous block, per item `i`: pose `(x, y, c, s)`. Per unordered pair
//! `p = (i, j)`, `i < j`: separating plane `(a_x, a_y, b)`, contact point
//! `(r_x, r_y)` and contact force `(f_x, f_y)` (force on `i` from `j`).
//! Per item: ground contact forces at the two body-frame bottom vertices.
//! Binary block: one pair binary per pair, then one ground binary per item.

use crate::{Pose2, Rot2};

pub const POSE_STRIDE: usize = 4;
pub const PAIR_STRIDE: usize = 7;
pub const GROUND_STRIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_items: usize,
    pub n_pairs: usize,
    /// Continuous variable count.
    pub n_cont: usize,
    /// Binary variable count: `N(N−1)/2 + N`.
    pub n_bin: usize,
}

impl VariableLayout {
    pub fn new(n_items: usize) -> Self {
        let n_pairs = n_items * (n_items.saturating_sub(1)) / 2;
        let n_cont = POSE_STRIDE * n_items + PAIR_STRIDE * n_pairs + GROUND_STRIDE * n_items;
        VariableLayout {
            n_items,
            n_pairs,
            n_cont,
            n_bin: n_pairs + n_items,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_cont + self.n_bin
    }

    /// Pair index for the unordered item pair `(i, j)`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(j < self.n_items && i != j);
        // Lexicographic over (i, j), i < j.
        i * self.n_items - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Items making up pair `p`, as `(i, j)` with `i < j`.
    pub fn pair_items(&self, p: usize) -> (usize, usize) {
        let mut rem = p;
        for i in 0..self.n_items {
            let row = self.n_items - i - 1;
            if rem < row {
                return (i, i + 1 + rem);
            }
            rem -= row;
        }
        panic!("pair index {p} out of range");
    }

    pub fn x(&self, i: usize) -> usize {
        POSE_STRIDE * i
    }
    pub fn y(&self, i: usize) -> usize {
        POSE_STRIDE * i + 1
    }
    pub fn c(&self, i: usize) -> usize {
        POSE_STRIDE * i + 2
    }
    pub fn s(&self, i: usize) -> usize {
        POSE_STRIDE * i + 3
    }

    fn pair_base(&self, p: usize) -> usize {
        POSE_STRIDE * self.n_items + PAIR_STRIDE * p
    }
    pub fn plane_ax(&self, p: usize) -> usize {
        self.pair_base(p)
    }
    pub fn plane_ay(&self, p: usize) -> usize {
        self.pair_base(p) + 1
    }
    pub fn plane_b(&self, p: usize) -> usize {
        self.pair_base(p) + 2
    }
    pub fn contact_rx(&self, p: usize) -> usize {
        self.pair_base(p) + 3
    }
    pub fn contact_ry(&self, p: usize) -> usize {
        self.pair_base(p) + 4
    }
    pub fn contact_fx(&self, p: usize) -> usize {
        self.pair_base(p) + 5
    }
    pub fn contact_fy(&self, p: usize) -> usize {
        self.pair_base(p) + 6
    }

    fn ground_base(&self, i: usize) -> usize {
        POSE_STRIDE * self.n_items + PAIR_STRIDE * self.n_pairs + GROUND_STRIDE * i
    }
    /// Ground force components at the two body-frame bottom vertices
    /// (corner slot 0 = vertex index 2, slot 1 = vertex index 3).
    pub fn ground_f(&self, i: usize, corner: usize, comp: usize) -> usize {
        debug_assert!(corner < 2 && comp < 2);
        self.ground_base(i) + 2 * corner + comp
    }

    pub fn z_pair(&self, p: usize) -> usize {
        self.n_cont + p
    }
    pub fn z_ground(&self, i: usize) -> usize {
        self.n_cont + self.n_pairs + i
    }

    pub fn is_binary(&self, k: usize) -> bool {
        k >= self.n_cont
    }

    pub fn binary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.n_cont..self.dim()
    }

    // Named pack/unpack helpers.

    pub fn set_pose(&self, y: &mut [f64], i: usize, pose: Pose2) {
        y[self.x(i)] = pose.x;
        y[self.y(i)] = pose.y;
        y[self.c(i)] = pose.rot.c;
        y[self.s(i)] = pose.rot.s;
    }

    pub fn get_pose(&self, y: &[f64], i: usize) -> Pose2 {
        Pose2::new(
            y[self.x(i)],
            y[self.y(i)],
            Rot2 {
                c: y[self.c(i)],
                s: y[self.s(i)],
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_match_formulas() {
        for n in 1..=9 {
            let l = VariableLayout::new(n);
            assert_eq!(l.n_bin, n * (n - 1) / 2 + n);
            assert_eq!(l.n_cont, 8 * n + 7 * n * (n - 1) / 2);
        }
        // 8 items total -> 36 binaries minus ground... pair count alone:
        assert_eq!(VariableLayout::new(8).n_pairs + 8, 36);
    }

    #[test]
    fn pair_indexing_round_trips() {
        let l = VariableLayout::new(6);
        let mut seen = vec![false; l.n_pairs];
        for i in 0..6 {
            for j in (i + 1)..6 {
                let p = l.pair_index(i, j);
                assert_eq!(l.pair_items(p), (i, j));
                assert_eq!(p, l.pair_index(j, i));
                assert!(!seen[p]);
                seen[p] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn ranges_are_disjoint_and_cover() {
        let l = VariableLayout::new(4);
        let mut hit = vec![0usize; l.dim()];
        for i in 0..4 {
            for k in [l.x(i), l.y(i), l.c(i), l.s(i), l.z_ground(i)] {
                hit[k] += 1;
            }
            for corner in 0..2 {
                for comp in 0..2 {
                    hit[l.ground_f(i, corner, comp)] += 1;
                }
            }
        }
        for p in 0..l.n_pairs {
            for k in [
                l.plane_ax(p),
                l.plane_ay(p),
                l.plane_b(p),
                l.contact_rx(p),
                l.contact_ry(p),
                l.contact_fx(p),
                l.contact_fy(p),
                l.z_pair(p),
            ] {
                hit[k] += 1;
            }
        }
        assert!(hit.iter().all(|&c| c == 1));
    }

    proptest! {
        #[test]
        fn pose_pack_unpack_roundtrip(x in -5.0f64..5.0, yv in -5.0f64..5.0,
                                      c in -1.0f64..1.0, s in -1.0f64..1.0) {
            let l = VariableLayout::new(3);
            let mut y = vec![0.0; l.dim()];
            let pose = Pose2::new(x, yv, Rot2 { c, s });
            l.set_pose(&mut y, 1, pose);
            let back = l.get_pose(&y, 1);
            prop_assert_eq!(back, pose);
        }
    }
}
