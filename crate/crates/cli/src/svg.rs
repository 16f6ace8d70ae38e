//! Minimal line-plot SVG writer.

use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub width: f64,
    pub dashed: bool,
    pub label: Option<String>,
}

impl Series {
    pub fn new(points: Vec<(f64, f64)>, color: &str) -> Self {
        Self { points, color: color.to_string(), width: 1.5, dashed: false, label: None }
    }

    pub fn width(mut self, w: f64) -> Self {
        self.width = w;
        self
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn label(mut self, l: impl Into<String>) -> Self {
        self.label = Some(l.into());
        self
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub width: f64,
    pub height: f64,
    /// Same scale on both axes.
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

/// Palette for unlabelled series.
pub const GREYS: &str = "#9a9a9a";
pub const BLUE: &str = "#1f5fbf";
pub const GREEN: &str = "#2e9e44";
pub const RED: &str = "#d62728";
pub const ORANGE: &str = "#e08a00";

const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), width: 640.0, height: 640.0, equal_aspect: true, series: Vec::new() }
    }

    pub fn push(&mut self, s: Series) {
        self.series.push(s);
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let (w, h) = (self.width - 2.0 * MARGIN, self.height - 2.0 * MARGIN);
        let (mut sx, mut sy) = (w / (x1 - x0), h / (y1 - y0));
        if self.equal_aspect {
            let s = sx.min(sy);
            sx = s;
            sy = s;
        }
        let px = |x: f64| MARGIN + (x - x0) * sx;
        let py = |y: f64| self.height - MARGIN - (y - y0) * sy;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(&self.title));
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#cccccc"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="10">x [{x0:.3}, {x1:.3}]  y [{y0:.3}, {y1:.3}]</text>"#,
            self.height - 12.0
        );
        let mut legend_y = MARGIN + 14.0;
        for s in &self.series {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="{}"{dash} points="{}"/>"#,
                s.color,
                s.width,
                pts.join(" ")
            );
            if let Some(l) = &s.label {
                let lx = self.width - MARGIN - 150.0;
                let _ = writeln!(
                    out,
                    r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{legend_y:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                    legend_y - 4.0,
                    lx + 20.0,
                    legend_y - 4.0,
                    s.color,
                    lx + 25.0,
                    escape(l)
                );
                legend_y += 14.0;
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_series() {
        let mut p = Plot::new("a < b");
        p.push(Series::new(vec![(0.0, 0.0), (1.0, 1.0)], BLUE).label("ref"));
        p.push(Series::new(vec![(0.5, 0.2)], RED).dashed());
        let s = p.render();
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("a &lt; b"));
        assert_eq!(s, p.render());
    }
}
