//! Exact 2-D rectangle kinematics and an independent collision oracle.
//!
//! Everything here is pure and generic over the scalar type. The collision
//! test is a separating-axis test over the four edge normals of the two
//! rectangles, which is exact for rectangles. These routines are used both
//! for solver warm starts and for the independent verifier, so they never
//! read optimizer variables.

use num_traits::Float;

/// Minimal 2-D vector. Kept local so the geometry core stays dependency-free
/// and generic over `f32`/`f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Float> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// 2-D cross product (z component of the 3-D cross).
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, k: T) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn add(self, other: Self) -> Self {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Self) -> Self {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }
}

/// Rotation stored by its matrix entries `(c, s)` = `(cos θ, sin θ)`.
///
/// For a valid rotation `c² + s² = 1`; the upright range of the formulation
/// additionally requires `c ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot2<T> {
    pub c: T,
    pub s: T,
}

impl<T: Float> Rot2<T> {
    pub fn identity() -> Self {
        Rot2 {
            c: T::one(),
            s: T::zero(),
        }
    }

    pub fn from_angle(theta: T) -> Self {
        Rot2 {
            c: theta.cos(),
            s: theta.sin(),
        }
    }

    pub fn angle(self) -> T {
        self.s.atan2(self.c)
    }

    /// `|c² + s² − 1|` — distance from the orthogonality constraint.
    pub fn unit_defect(self) -> T {
        (self.c * self.c + self.s * self.s - T::one()).abs()
    }

    pub fn is_valid(self, tol: T) -> bool {
        self.unit_defect() <= tol
    }

    /// Rescale `(c, s)` onto the unit circle.
    pub fn normalized(self) -> Self {
        let n = (self.c * self.c + self.s * self.s).sqrt();
        if n > T::zero() {
            Rot2 {
                c: self.c / n,
                s: self.s / n,
            }
        } else {
            Rot2::identity()
        }
    }

    pub fn apply(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.c * v.x - self.s * v.y, self.s * v.x + self.c * v.y)
    }
}

/// Planar pose of an item centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub rot: Rot2<T>,
}

impl<T: Float> Pose2<T> {
    pub fn new(x: T, y: T, rot: Rot2<T>) -> Self {
        Pose2 { x, y, rot }
    }

    pub fn from_angle(x: T, y: T, theta: T) -> Self {
        Pose2 {
            x,
            y,
            rot: Rot2::from_angle(theta),
        }
    }

    pub fn position(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

/// Rectangular item of width `W` and height `H`, described by the four
/// constant centroid-to-vertex offsets `(±W/2, ±H/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectItem<T> {
    pub width: T,
    pub height: T,
}

impl<T: Float> RectItem<T> {
    pub fn new(width: T, height: T) -> Self {
        debug_assert!(width > T::zero() && height > T::zero());
        RectItem { width, height }
    }

    /// Body-frame vertex offsets in the fixed order `(++, −+, −−, +−)`.
    /// The ordering is relied upon for stable variable indexing: indices
    /// 2 and 3 are the body-frame bottom vertices.
    pub fn vertex_offsets(self) -> [Vec2<T>; 4] {
        let hw = self.width / (T::one() + T::one());
        let hh = self.height / (T::one() + T::one());
        [
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
        ]
    }

    pub fn half_diagonal(self) -> T {
        let hw = self.width / (T::one() + T::one());
        let hh = self.height / (T::one() + T::one());
        (hw * hw + hh * hh).sqrt()
    }

    pub fn area(self) -> T {
        self.width * self.height
    }
}

/// Shelf interior `[0, W] × [0, H]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shelf<T> {
    pub width: T,
    pub height: T,
}

impl<T: Float> Shelf<T> {
    pub fn new(width: T, height: T) -> Self {
        debug_assert!(width > T::zero() && height > T::zero());
        Shelf { width, height }
    }
}

/// `(cos θ, sin θ)` as a rotation.
pub fn rot_from_angle<T: Float>(theta: T) -> Rot2<T> {
    Rot2::from_angle(theta)
}

/// World-frame vertices `v_k = x + R·h_k` in the fixed body order.
pub fn item_vertices<T: Float>(pose: Pose2<T>, item: RectItem<T>) -> [Vec2<T>; 4] {
    let p = pose.position();
    item.vertex_offsets()
        .map(|h| p.add(pose.rot.apply(h)))
}

/// True iff every point lies in the closed region
/// `[margin, W−margin] × [margin, H−margin]`.
pub fn shelf_contains<T: Float>(shelf: Shelf<T>, points: &[Vec2<T>], margin: T) -> bool {
    points.iter().all(|p| {
        p.x >= margin && p.x <= shelf.width - margin && p.y >= margin && p.y <= shelf.height - margin
    })
}

fn project_extent<T: Float>(axis: Vec2<T>, pose: Pose2<T>, item: RectItem<T>) -> T {
    // Support extent of the rectangle along `axis` about its centroid.
    let hw = item.width / (T::one() + T::one());
    let hh = item.height / (T::one() + T::one());
    let ex = pose.rot.apply(Vec2::new(T::one(), T::zero()));
    let ey = pose.rot.apply(Vec2::new(T::zero(), T::one()));
    (axis.dot(ex) * hw).abs() + (axis.dot(ey) * hh).abs()
}

fn candidate_axes<T: Float>(a_pose: Pose2<T>, b_pose: Pose2<T>) -> [Vec2<T>; 4] {
    let ax = a_pose.rot.apply(Vec2::new(T::one(), T::zero()));
    let ay = a_pose.rot.apply(Vec2::new(T::zero(), T::one()));
    let bx = b_pose.rot.apply(Vec2::new(T::one(), T::zero()));
    let by = b_pose.rot.apply(Vec2::new(T::zero(), T::one()));
    [ax, ay, bx, by]
}

/// Separating-axis overlap test over the four edge normals.
///
/// Returns `(overlap, penetration)` where `penetration` is the minimal
/// translation distance when overlapping, and the negative of the largest
/// separation gap otherwise.
pub fn rects_overlap<T: Float>(
    a_pose: Pose2<T>,
    a_item: RectItem<T>,
    b_pose: Pose2<T>,
    b_item: RectItem<T>,
) -> (bool, T) {
    let d = b_pose.position().sub(a_pose.position());
    let mut min_overlap = T::infinity();
    let mut max_gap = T::neg_infinity();
    let mut separated = false;
    for axis in candidate_axes(a_pose, b_pose) {
        let ea = project_extent(axis, a_pose, a_item);
        let eb = project_extent(axis, b_pose, b_item);
        let overlap = ea + eb - axis.dot(d).abs();
        if overlap <= T::zero() {
            separated = true;
            max_gap = max_gap.max(-overlap);
        }
        min_overlap = min_overlap.min(overlap);
    }
    if separated {
        (false, -max_gap)
    } else {
        (true, min_overlap)
    }
}

/// Separating plane `a·p = b` with `‖a‖ = 1`, `a·v ≤ b` on all vertices of
/// rect A and `a·v ≥ b` on all of rect B. The offset `b` is placed at the
/// midpoint of the projection gap. Returns `None` when the rects overlap.
pub fn separating_witness<T: Float>(
    a_pose: Pose2<T>,
    a_item: RectItem<T>,
    b_pose: Pose2<T>,
    b_item: RectItem<T>,
) -> Option<(Vec2<T>, T)> {
    let d = b_pose.position().sub(a_pose.position());
    let mut best: Option<(Vec2<T>, T)> = None;
    for axis in candidate_axes(a_pose, b_pose) {
        let ea = project_extent(axis, a_pose, a_item);
        let eb = project_extent(axis, b_pose, b_item);
        let gap = axis.dot(d).abs() - (ea + eb);
        if gap >= T::zero() && best.map_or(true, |(_, g)| gap > g) {
            // Orient the axis from A toward B.
            let dir = if axis.dot(d) >= T::zero() { axis } else { axis.scale(-T::one()) };
            best = Some((dir, gap));
        }
    }
    best.map(|(dir, _)| {
        let max_a = item_vertices(a_pose, a_item)
            .iter()
            .map(|v| dir.dot(*v))
            .fold(T::neg_infinity(), T::max);
        let min_b = item_vertices(b_pose, b_item)
            .iter()
            .map(|v| dir.dot(*v))
            .fold(T::infinity(), T::min);
        (dir, (max_a + min_b) / (T::one() + T::one()))
    })
}

/// Distance from a point to a (possibly rotated) rectangle; zero inside.
pub fn point_rect_distance<T: Float>(p: Vec2<T>, pose: Pose2<T>, item: RectItem<T>) -> T {
    // Transform into the body frame.
    let d = p.sub(pose.position());
    let local = Vec2::new(
        pose.rot.c * d.x + pose.rot.s * d.y,
        -pose.rot.s * d.x + pose.rot.c * d.y,
    );
    let hw = item.width / (T::one() + T::one());
    let hh = item.height / (T::one() + T::one());
    let dx = (local.x.abs() - hw).max(T::zero());
    let dy = (local.y.abs() - hh).max(T::zero());
    (dx * dx + dy * dy).sqrt()
}
