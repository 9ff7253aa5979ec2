//! Minimal line/scatter plots written directly as SVG.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Curve {
    pub label: String,
    pub xy: Vec<(f64, f64)>,
}

pub struct Points {
    pub label: String,
    /// `(x, y, error)`.
    pub xye: Vec<(f64, f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_max: f64,
    pub curves: Vec<Curve>,
    pub points: Vec<Points>,
}

impl Plot {
    fn sx(&self, x: f64) -> f64 {
        let span = if self.x_max > 0.0 { self.x_max } else { 1.0 };
        LEFT + x / span * (WIDTH - LEFT - RIGHT)
    }

    fn sy(y: f64) -> f64 {
        TOP + (1.0 - y.clamp(0.0, 1.05) / 1.05) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(&self.title));

        // axes and ticks
        let (x0, x1, y0, y1) = (self.sx(0.0), self.sx(self.x_max), Self::sy(0.0), Self::sy(1.05));
        let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none"><line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}"/><line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}"/></g>"#);
        for k in 0..=5 {
            let x = self.x_max * f64::from(k) / 5.0;
            let px = self.sx(x);
            let _ = writeln!(s, r#"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#, y0 + 5.0, y0 + 18.0);
        }
        for k in 0..=5 {
            let y = 0.2 * f64::from(k);
            let py = Self::sy(y);
            let _ = writeln!(s, r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"#, x0 - 5.0, x0 - 8.0, py + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, escape(&self.y_label));

        let mut legend = Vec::new();
        for (i, c) in self.curves.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = c.xy.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), Self::sy(y))).collect();
            let _ = writeln!(s, r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#, pts.join(" "));
            legend.push((color, c.label.as_str(), false));
        }
        for (i, p) in self.points.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(s, r#"<g class="points" stroke="{color}" fill="{color}">"#);
            for &(x, y, e) in &p.xye {
                let (px, py) = (self.sx(x), Self::sy(y));
                if e > 0.0 {
                    let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}"/>"#, Self::sy(y - e), Self::sy(y + e));
                }
                let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3"/>"#);
            }
            let _ = writeln!(s, "</g>");
            legend.push((color, p.label.as_str(), true));
        }
        for (k, (color, label, marker)) in legend.iter().enumerate() {
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 12.0;
            if *marker {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{ly:.1}" r="3" fill="{color}"/>"#, lx + 10.0);
            } else {
                let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"/>"#, lx + 20.0);
            }
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
