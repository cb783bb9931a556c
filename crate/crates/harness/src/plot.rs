//! SVG line chart of a sweep summary: one line per `d` against `n` (log
//! scale), with a ±1 standard deviation band.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::output::SummaryRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub const Y_LABEL: &str = "‖AAᵀ − Z*‖_F";

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, n: f64) -> f64 {
        let t = if self.x_hi > self.x_lo { (n.log10() - self.x_lo) / (self.x_hi - self.x_lo) } else { 0.5 };
        LEFT + t * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let t = if self.y_hi > self.y_lo { (y - self.y_lo) / (self.y_hi - self.y_lo) } else { 0.5 };
        HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM)
    }
}

fn point(s: &mut String, x: f64, y: f64) {
    let _ = write!(s, "{x:.2},{y:.2} ");
}

/// Renders the chart. Output depends only on `rows`.
pub fn render_svg(rows: &[SummaryRow]) -> String {
    let mut by_d: BTreeMap<usize, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_d.entry(r.d).or_default().push(r);
    }
    for line in by_d.values_mut() {
        line.sort_by_key(|r| r.n);
    }
    let ns = rows.iter().map(|r| (r.n.max(1) as f64).log10());
    let frame = Frame {
        x_lo: ns.clone().fold(f64::INFINITY, f64::min),
        x_hi: ns.fold(f64::NEG_INFINITY, f64::max),
        y_lo: 0.0,
        y_hi: rows.iter().map(|r| r.mean_rec_err + r.std_rec_err).fold(0.0, f64::max).max(1e-12) * 1.05,
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#);

    let mut ticks: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ticks.sort_unstable();
    ticks.dedup();
    for n in ticks {
        let x = frame.px(n.max(1) as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{n}</text>"#, y1 + 18.0);
    }
    for i in 0..=4 {
        let v = frame.y_hi * i as f64 / 4.0;
        let y = frame.py(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.3}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">n</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">{Y_LABEL}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (i, (d, line)) in by_d.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for r in line {
            point(&mut band, frame.px(r.n.max(1) as f64), frame.py(r.mean_rec_err + r.std_rec_err));
        }
        for r in line.iter().rev() {
            point(&mut band, frame.px(r.n.max(1) as f64), frame.py((r.mean_rec_err - r.std_rec_err).max(0.0)));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        let mut pts = String::new();
        for r in line {
            point(&mut pts, frame.px(r.n.max(1) as f64), frame.py(r.mean_rec_err));
        }
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.trim_end());
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, x1 + 15.0, x1 + 35.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">d = {d}</text>"#, x1 + 40.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
