//! SVG scene rendering: shelf outline, stored items before (grey) and
//! after (colored) a solution, insert item highlighted.

use crate::formulation::Instance;
use crate::geometry::item_vertices;
use crate::Pose2;
use std::fmt::Write as _;

const VIEW_W: f64 = 800.0;
const VIEW_H: f64 = 400.0;
const MARGIN: f64 = 20.0;

struct Mapper {
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Mapper {
    fn new(shelf_w: f64, shelf_h: f64) -> Mapper {
        let scale = ((VIEW_W - 2.0 * MARGIN) / shelf_w).min((VIEW_H - 2.0 * MARGIN) / shelf_h);
        Mapper {
            scale,
            ox: MARGIN,
            oy: VIEW_H - MARGIN,
        }
    }

    // Shelf frame is y-up; SVG is y-down.
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (self.ox + self.scale * x, self.oy - self.scale * y)
    }
}

fn polygon(out: &mut String, pts: &[(f64, f64)], fill: &str, stroke: &str, opacity: f64) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(
        out,
        "<polygon points=\"{}\" fill=\"{}\" stroke=\"{}\" stroke-width=\"1\" fill-opacity=\"{}\"/>",
        coords.join(" "),
        fill,
        stroke,
        opacity
    )
    .unwrap();
}

/// Render an instance; with `solution` poses (layout order, insert last)
/// the final configuration is drawn in color over the greyed-out initial
/// one.
pub fn render_svg(instance: &Instance, solution: Option<&[Pose2]>) -> String {
    let m = Mapper::new(instance.shelf.width, instance.shelf.height);
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{VIEW_W}\" height=\"{VIEW_H}\" viewBox=\"0 0 {VIEW_W} {VIEW_H}\">"
    )
    .unwrap();

    // Shelf interior.
    let (x0, y1) = m.map(0.0, 0.0);
    let (x1, y0) = m.map(instance.shelf.width, instance.shelf.height);
    writeln!(
        out,
        "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>",
        x1 - x0,
        y1 - y0
    )
    .unwrap();

    // Initial stored configuration, grey.
    for &(item, pose) in &instance.stored {
        let pts: Vec<(f64, f64)> = item_vertices(pose, item)
            .iter()
            .map(|v| m.map(v.x, v.y))
            .collect();
        polygon(&mut out, &pts, "#999999", "#555555", 0.6);
    }

    // Final configuration in color, insert item highlighted.
    if let Some(poses) = solution {
        let items: Vec<_> = instance.all_items().collect();
        let ins = instance.insert_index();
        for (i, (&item, &pose)) in items.iter().zip(poses).enumerate() {
            let (fill, stroke) = if i == ins {
                ("#e8743b", "#a34a1a")
            } else {
                ("#4a90d9", "#1f5a96")
            };
            let pts: Vec<(f64, f64)> = item_vertices(pose, item)
                .iter()
                .map(|v| m.map(v.x, v.y))
                .collect();
            polygon(&mut out, &pts, fill, stroke, 0.85);
        }
    }

    writeln!(out, "</svg>").unwrap();
    out
}
