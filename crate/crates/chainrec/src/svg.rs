//! Small hand-rolled SVG output. Only two pictures are ever drawn: a box
//! heatmap colored by chain class (dimension 1 or 2) and a basin scatter
//! of sample starting points colored by cluster. Floats are printed with
//! two decimals so the byte output is stable across runs and platforms.

use std::fmt::Write as _;

use crate::chain::{BoxGrid, ChainClass};
use crate::physical::{BasinEstimate, SampleOutcome};

/// Distinct fills for class/cluster ids; cycles past the palette end.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

const UNCLASSED: &str = "#e0e0e0";

fn color(id: usize) -> &'static str {
    PALETTE[id % PALETTE.len()]
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.2} {height:.2}\" \
         width=\"{width:.2}\" height=\"{height:.2}\">"
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{width:.2}\" height=\"{height:.2}\" fill=\"#ffffff\"/>"
    );
}

/// Heatmap of grid boxes colored by the class owning them; boxes in no
/// class stay light gray. Supports dim 1 (a strip) and dim 2.
pub fn class_heatmap(grid: BoxGrid, classes: &[ChainClass]) -> String {
    assert!(grid.dim() <= 2, "heatmap drawn only for dimension 1 or 2");
    let per_axis = 1usize << grid.depth();
    let mut owner = vec![None::<usize>; grid.box_count()];
    for class in classes {
        for &b in &class.boxes {
            owner[b as usize] = Some(class.id);
        }
    }

    let side = 900.0;
    let cell = side / per_axis as f64;
    let strip_height = if grid.dim() == 1 { cell.max(40.0) } else { side };
    let mut out = String::new();
    header(&mut out, side, strip_height);

    for (index, own) in owner.iter().enumerate() {
        let fill = own.map_or(UNCLASSED, color);
        let cells = grid.cell_coords(index);
        let x = cells[grid.dim() - 1] as f64 * cell;
        let y = if grid.dim() == 2 {
            // Row 0 at the bottom so the picture matches coordinates.
            side - (cells[0] + 1) as f64 * cell
        } else {
            0.0
        };
        let h = if grid.dim() == 1 { strip_height } else { cell };
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{h:.2}\" \
             fill=\"{fill}\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Strip of alphabet symbols colored by the symbol class owning them;
/// the subshift counterpart of the box heatmap.
pub fn symbol_strip(alphabet: usize, classes: &[ChainClass]) -> String {
    assert!(alphabet >= 1);
    let mut owner = vec![None::<usize>; alphabet];
    for class in classes {
        for &b in &class.boxes {
            owner[b as usize] = Some(class.id);
        }
    }
    let side = 900.0;
    let cell = side / alphabet as f64;
    let height = cell.max(40.0);
    let mut out = String::new();
    header(&mut out, side, height);
    for (symbol, own) in owner.iter().enumerate() {
        let fill = own.map_or(UNCLASSED, color);
        let x = symbol as f64 * cell;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"0.00\" width=\"{cell:.2}\" height=\"{height:.2}\" \
             fill=\"{fill}\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of sample starting points, one dot per sample, filled by the
/// cluster that captured it. Dimension 1 plots clusters as rows.
pub fn basin_scatter(estimate: &BasinEstimate, dim: usize) -> String {
    assert!(dim <= 2, "scatter drawn only for dimension 1 or 2");
    let side = 900.0;
    let margin = 30.0;
    let span = side - 2.0 * margin;
    let rows = estimate.clusters.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, side, side);

    let place = |s: &SampleOutcome| -> (f64, f64) {
        let x = margin + crate::systems::frac(s.initial[0]) * span;
        let y = if dim == 2 {
            side - margin - crate::systems::frac(s.initial[1]) * span
        } else {
            margin + (s.cluster_id as f64 + 0.5) / rows * span
        };
        (x, y)
    };

    for sample in &estimate.samples {
        let (x, y) = place(sample);
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.00\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            color(sample.cluster_id)
        );
    }
    out.push_str("</svg>\n");
    out
}
