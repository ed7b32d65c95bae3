//! SVG trajectory plot for replays: a top-down view of the end-effector path
//! and legs, and the end-effector and carcass heights over time.

use std::fmt::Write as _;

use chicgrasp_core::sim::{SimConfig, SimState};

const PANEL: f64 = 360.0;
const PAD: f64 = 30.0;

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let span = (self.hi - self.lo).max(1e-9);
        self.px_lo + (v - self.lo) / span * (self.px_hi - self.px_lo)
    }
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.1},{y:.1} ");
    }
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
        d.trim_end()
    );
}

/// Render `states` (initial first) as a standalone SVG document.
pub fn trajectory_svg(states: &[SimState], cfg: &SimConfig) -> String {
    let b = &cfg.bounds;
    let width = 2.0 * PANEL + 3.0 * PAD;
    let height = PANEL + 2.0 * PAD;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(out, r##"<rect width="{width}" height="{height}" fill="white"/>"##);

    // Top-down panel; +y points up on screen.
    let xs = Axis {
        lo: b.min[0],
        hi: b.max[0],
        px_lo: PAD,
        px_hi: PAD + PANEL,
    };
    let ys = Axis {
        lo: b.min[1],
        hi: b.max[1],
        px_lo: PAD + PANEL,
        px_hi: PAD,
    };
    let _ = writeln!(
        out,
        r##"<rect x="{PAD}" y="{PAD}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
    );
    let _ = writeln!(out, r##"<text x="{PAD}" y="{}">top view (x, y)</text>"##, PAD - 8.0);
    if let Some(first) = states.first() {
        for leg in &first.legs {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.1}" cy="{:.1}" r="4" fill="#d08030"/>"##,
                xs.map(leg[0]),
                ys.map(leg[1])
            );
        }
    }
    let sh = cfg.shackle.pos;
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="#3060c0"/>"##,
        xs.map(sh[0]) - 4.0,
        ys.map(sh[1]) - 4.0
    );
    polyline(&mut out, states.iter().map(|s| (xs.map(s.ee[0]), ys.map(s.ee[1]))), "#202020");
    // Mark ticks where either jaw changed state.
    for w in states.windows(2) {
        if w[0].jaw_state != w[1].jaw_state {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="none" stroke="#c02020"/>"##,
                xs.map(w[1].ee[0]),
                ys.map(w[1].ee[1])
            );
        }
    }

    // Height panel.
    let left = 2.0 * PAD + PANEL;
    let last_tick = states.last().map(|s| s.tick).unwrap_or(1).max(1) as f64;
    let first_tick = states.first().map(|s| s.tick).unwrap_or(0) as f64;
    let ts = Axis {
        lo: first_tick,
        hi: last_tick,
        px_lo: left,
        px_hi: left + PANEL,
    };
    let zs = Axis {
        lo: b.min[2].min(0.0),
        hi: b.max[2],
        px_lo: PAD + PANEL,
        px_hi: PAD,
    };
    let _ = writeln!(
        out,
        r##"<rect x="{left}" y="{PAD}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{left}" y="{}">height over ticks: end-effector (black), carcass (orange)</text>"##,
        PAD - 8.0
    );
    polyline(&mut out, states.iter().map(|s| (ts.map(s.tick as f64), zs.map(s.ee[2]))), "#202020");
    polyline(
        &mut out,
        states.iter().map(|s| (ts.map(s.tick as f64), zs.map(s.carcass_z))),
        "#d08030",
    );
    let lift = zs.map(cfg.lift_threshold);
    let _ = writeln!(
        out,
        r##"<line x1="{left}" y1="{lift:.1}" x2="{:.1}" y2="{lift:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
        left + PANEL
    );
    if let Some(last) = states.last() {
        let _ = writeln!(
            out,
            r##"<text x="{left}" y="{:.1}">final phase {} at tick {}</text>"##,
            height - 8.0,
            last.phase.as_str(),
            last.tick
        );
    }
    out.push_str("</svg>\n");
    out
}
