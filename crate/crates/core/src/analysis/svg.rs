//! Minimal self-contained SVG writer. Coordinates are printed with fixed
//! precision so identical inputs give identical bytes.

use std::fmt::Write as _;

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

/// Linear map from data to pixel coordinates.
#[derive(Clone, Copy)]
pub struct Frame {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }
    pub fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }
}

/// Axis range padded so a flat series still spans a visible interval.
pub fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        lo -= 0.5 * (1.0 + lo.abs()) * 1e-3;
        hi += 0.5 * (1.0 + hi.abs()) * 1e-3;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>"
        )
        .unwrap();
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        writeln!(self.body, "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>").unwrap();
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        writeln!(self.body, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" fill=\"{fill}\"/>").unwrap();
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        writeln!(self.body, "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{s}</text>").unwrap();
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
            p.join(" ")
        )
        .unwrap();
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(self.body, "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"none\"/>", p.join(" ")).unwrap();
    }

    /// Box with ticks at both ends of each axis.
    pub fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let (x0, y0, x1, y1) = (f.x0, f.y0, f.x0 + f.w, f.y0 + f.h);
        for (a, b, c, d) in [(x0, y1, x1, y1), (x0, y0, x0, y1), (x0, y0, x1, y0), (x1, y0, x1, y1)] {
            self.line(a, b, c, d, "black", 1.0);
        }
        self.text(x0, y1 + 14.0, "middle", &fmt_tick(f.xmin));
        self.text(x1, y1 + 14.0, "middle", &fmt_tick(f.xmax));
        self.text(x0 - 4.0, y1, "end", &fmt_tick(f.ymin));
        self.text(x0 - 4.0, y0 + 8.0, "end", &fmt_tick(f.ymax));
        self.text(x0 + f.w / 2.0, y1 + 28.0, "middle", xlabel);
        self.text(x0 + f.w / 2.0, y0 - 6.0, "middle", ylabel);
    }
}
