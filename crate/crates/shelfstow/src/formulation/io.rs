//! JSON schemas for instances and solutions.
//!
//! Instance: `{id, seed, shelf:{w,h}, items:[{w,h,x,y,theta,role}]}` with
//! angles in radians and lengths in meters. Stored items come first in
//! layout order; the single `"insert"` item carries its pre-removal pose
//! (the generator's feasibility certificate).
//!
//! Solution: `{instance_id, status, objective, poses:[{x,y,c,s}],
//! binaries:{pair:[...], ground:[...]}, forces:[...]}`.

use super::layout::VariableLayout;
use super::{FormulationError, Instance};
use crate::{Pose2, RectItem, Shelf};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShelfRec {
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemRec {
    pub w: f64,
    pub h: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub role: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub id: String,
    pub seed: u64,
    pub shelf: ShelfRec,
    pub items: Vec<ItemRec>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let mut items: Vec<ItemRec> = inst
            .stored
            .iter()
            .map(|&(item, pose)| ItemRec {
                w: item.width,
                h: item.height,
                x: pose.x,
                y: pose.y,
                theta: pose.rot.angle(),
                role: "stored".into(),
            })
            .collect();
        items.push(ItemRec {
            w: inst.insert.width,
            h: inst.insert.height,
            x: inst.insert_ref.x,
            y: inst.insert_ref.y,
            theta: inst.insert_ref.rot.angle(),
            role: "insert".into(),
        });
        InstanceFile {
            id: inst.id.clone(),
            seed: inst.seed,
            shelf: ShelfRec {
                w: inst.shelf.width,
                h: inst.shelf.height,
            },
            items,
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = FormulationError;

    fn try_from(f: InstanceFile) -> Result<Self, Self::Error> {
        let mut stored = Vec::new();
        let mut insert = None;
        for it in &f.items {
            if it.w <= 0.0 || it.h <= 0.0 {
                return Err(FormulationError::BadInstance(
                    "item dimensions must be positive".into(),
                ));
            }
            let item = RectItem::new(it.w, it.h);
            let pose = Pose2::from_angle(it.x, it.y, it.theta);
            match it.role.as_str() {
                "stored" => stored.push((item, pose)),
                "insert" => {
                    if insert.replace((item, pose)).is_some() {
                        return Err(FormulationError::BadInstance(
                            "more than one insert item".into(),
                        ));
                    }
                }
                other => {
                    return Err(FormulationError::BadInstance(format!(
                        "unknown item role {other:?}"
                    )))
                }
            }
        }
        let (insert, insert_ref) = insert.ok_or_else(|| {
            FormulationError::BadInstance("no item with role \"insert\"".into())
        })?;
        if f.shelf.w <= 0.0 || f.shelf.h <= 0.0 {
            return Err(FormulationError::BadInstance(
                "shelf dimensions must be positive".into(),
            ));
        }
        Ok(Instance {
            id: f.id,
            seed: f.seed,
            shelf: Shelf::new(f.shelf.w, f.shelf.h),
            stored,
            insert,
            insert_ref,
        })
    }
}

impl Instance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Instance, FormulationError> {
        let file: InstanceFile = serde_json::from_str(s)
            .map_err(|e| FormulationError::BadInstance(e.to_string()))?;
        Instance::try_from(file)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRec {
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryRec {
    pub pair: Vec<u8>,
    pub ground: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SolutionForces {
    #[serde(rename = "pair")]
    Pair {
        i: usize,
        j: usize,
        r: [f64; 2],
        f: [f64; 2],
    },
    #[serde(rename = "ground")]
    Ground { item: usize, corners: [[f64; 2]; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub instance_id: String,
    pub status: String,
    pub objective: f64,
    pub poses: Vec<PoseRec>,
    pub binaries: BinaryRec,
    pub forces: Vec<SolutionForces>,
}

impl Solution {
    pub fn from_vector(
        instance_id: &str,
        status: &str,
        objective: f64,
        layout: &VariableLayout,
        y: &[f64],
    ) -> Solution {
        let poses = (0..layout.n_items)
            .map(|i| PoseRec {
                x: y[layout.x(i)],
                y: y[layout.y(i)],
                c: y[layout.c(i)],
                s: y[layout.s(i)],
            })
            .collect();
        let pair_bins: Vec<u8> = (0..layout.n_pairs)
            .map(|p| (y[layout.z_pair(p)] > 0.5) as u8)
            .collect();
        let ground_bins: Vec<u8> = (0..layout.n_items)
            .map(|i| (y[layout.z_ground(i)] > 0.5) as u8)
            .collect();
        let mut forces = Vec::new();
        for p in 0..layout.n_pairs {
            if pair_bins[p] == 1 {
                let (i, j) = layout.pair_items(p);
                forces.push(SolutionForces::Pair {
                    i,
                    j,
                    r: [y[layout.contact_rx(p)], y[layout.contact_ry(p)]],
                    f: [y[layout.contact_fx(p)], y[layout.contact_fy(p)]],
                });
            }
        }
        for i in 0..layout.n_items {
            if ground_bins[i] == 1 {
                forces.push(SolutionForces::Ground {
                    item: i,
                    corners: [
                        [y[layout.ground_f(i, 0, 0)], y[layout.ground_f(i, 0, 1)]],
                        [y[layout.ground_f(i, 1, 0)], y[layout.ground_f(i, 1, 1)]],
                    ],
                });
            }
        }
        Solution {
            instance_id: instance_id.into(),
            status: status.into(),
            objective,
            poses,
            binaries: BinaryRec {
                pair: pair_bins,
                ground: ground_bins,
            },
            forces,
        }
    }

    pub fn pose(&self, i: usize) -> Pose2 {
        let p = &self.poses[i];
        Pose2::new(p.x, p.y, crate::Rot2 { c: p.c, s: p.s })
    }

    pub fn all_poses(&self) -> Vec<Pose2> {
        (0..self.poses.len()).map(|i| self.pose(i)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(s: &str) -> Result<Solution, FormulationError> {
        serde_json::from_str(s).map_err(|e| FormulationError::BadInstance(e.to_string()))
    }
}
