//! Orthographic top-down raster of the table.

use crate::types::{Image, Side};

use super::{jaw_center, SimConfig, SimState};

const LEG: f32 = 0.6;
const JAW_OPEN: f32 = 0.35;
const JAW_CLOSED: f32 = 1.0;
const CROSS: f32 = 0.85;

/// Render `state` as a `image_size`² grayscale grid covering
/// `[-image_half_extent, image_half_extent]²`. Row 0 is the +y edge.
/// A state whose legs have zero radius renders no discs.
pub fn render_topdown(state: &SimState, cfg: &SimConfig) -> Image {
    let n = cfg.image_size;
    let half = cfg.image_half_extent;
    let px = 2.0 * half / n as f64;
    let mut img = Image::blank(n, n);
    let center_of = |col: usize, row: usize| {
        (
            -half + (col as f64 + 0.5) * px,
            half - (row as f64 + 0.5) * px,
        )
    };
    let to_pixel = |x: f64, y: f64| -> Option<(i64, i64)> {
        let col = ((x + half) / px).floor();
        let row = ((half - y) / px).floor();
        (col.is_finite() && row.is_finite()).then_some((col as i64, row as i64))
    };
    let put = |img: &mut Image, col: i64, row: i64, v: f32| {
        if col >= 0 && row >= 0 && (col as usize) < n && (row as usize) < n {
            let idx = row as usize * n + col as usize;
            img.data[idx] = img.data[idx].max(v);
        }
    };

    if state.leg_radius > 0.0 {
        for leg in &state.legs {
            for row in 0..n {
                for col in 0..n {
                    let (x, y) = center_of(col, row);
                    if (x - leg[0]).hypot(y - leg[1]) <= state.leg_radius {
                        put(&mut img, col as i64, row as i64, LEG);
                    }
                }
            }
        }
    }

    for side in Side::BOTH {
        let [x, y] = jaw_center(state.ee, side, cfg);
        let v = if state.jaw_state.get(side) { JAW_CLOSED } else { JAW_OPEN };
        if let Some((c, r)) = to_pixel(x, y) {
            for dr in -1..=1 {
                for dc in -1..=1 {
                    put(&mut img, c + dc, r + dr, v);
                }
            }
        }
    }

    if let Some((c, r)) = to_pixel(state.ee[0], state.ee[1]) {
        for d in -1..=1 {
            put(&mut img, c + d, r, CROSS);
            put(&mut img, c, r + d, CROSS);
        }
    }
    img
}
