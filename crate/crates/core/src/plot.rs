//! Standalone SVG figures.

use std::fmt::Write as _;

use crate::ensemble::EnsembleResult;
use crate::field::{bounding_box, Point};
use crate::geometry::{BoundaryCurve, Topology};
use crate::report::{sig3, DiscoveryReport};
use crate::sim::ReplayBand;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";
const INK: &str = "#1f3a5f";
const MUTED: &str = "#9aa4ae";
const ACCENT: &str = "#c0392b";

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, w: f64) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{stroke}\" stroke-width=\"{w}\"/>",
            a.0, a.1, b.0, b.1
        );
    }

    fn text(&mut self, at: (f64, f64), anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"{anchor}\" {FONT}>{}</text>",
            at.0,
            at.1,
            escape(s)
        );
    }

    fn circle(&mut self, c: (f64, f64), r: f64, fill: &str) {
        let _ = writeln!(self.body, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"{fill}\"/>", c.0, c.1);
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, w: f64, closed: bool) {
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            "<{tag} points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{w}\"/>",
            points_attr(pts)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn points_attr(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// Linear map from a data box to a pixel box; `y` grows upward in data space.
#[derive(Clone, Copy)]
struct Axes {
    lo: Point,
    hi: Point,
    px: (f64, f64, f64, f64),
}

impl Axes {
    fn new(lo: Point, hi: Point, px: (f64, f64, f64, f64)) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = pad(lo[0], hi[0]);
        let (y0, y1) = pad(lo[1], hi[1]);
        Self { lo: [x0, y0], hi: [x1, y1], px }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        let (left, top, w, h) = self.px;
        (
            left + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * w,
            top + h - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * h,
        )
    }
}

/// Median and 3-sigma whisker per feature, annotated with inclusion probability.
pub fn coefficient_plot(report: &DiscoveryReport) -> String {
    let row_h = 26.0;
    let (left, top, width) = (150.0, 40.0, 420.0);
    let n = report.features.len();
    let mut svg = Svg::new(left + width + 110.0, top + row_h * n as f64 + 40.0);
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for f in &report.features {
        if let Some(c) = f.ci {
            lo = lo.min(c.lower);
            hi = hi.max(c.upper);
        }
        if let Some(m) = f.median {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    let span = (hi - lo).max(1e-12);
    let (lo, hi) = (lo - 0.05 * span, hi + 0.05 * span);
    let ax = Axes::new([lo, 0.0], [hi, 1.0], (left, top, width, row_h * n as f64));
    svg.text((left + width / 2.0, 22.0), "middle", &report.equation);
    let zero = ax.map([0.0, 0.0]).0;
    svg.line((zero, top), (zero, top + row_h * n as f64), MUTED, 1.0);
    for (i, f) in report.features.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let color = if f.retained { INK } else { MUTED };
        svg.text((left - 8.0, y + 4.0), "end", &f.name);
        if let Some(c) = f.ci {
            let a = ax.map([c.lower, 0.0]).0;
            let b = ax.map([c.upper, 0.0]).0;
            svg.line((a, y), (b, y), color, 2.0);
            svg.line((a, y - 5.0), (a, y + 5.0), color, 2.0);
            svg.line((b, y - 5.0), (b, y + 5.0), color, 2.0);
        }
        if let Some(m) = f.median {
            svg.circle((ax.map([m, 0.0]).0, y), 4.0, if f.retained { ACCENT } else { MUTED });
        }
        svg.text((left + width + 10.0, y + 4.0), "start", &format!("p = {}", sig3(f.p_inc)));
    }
    let base = top + row_h * n as f64 + 18.0;
    svg.text((left, base), "start", &sig3(lo));
    svg.text((left + width, base), "end", &sig3(hi));
    svg.finish()
}

/// One density panel per feature that was ever selected.
pub fn kde_plot(result: &EnsembleResult) -> String {
    let panels: Vec<usize> = (0..result.names.len()).filter(|&j| result.kde[j].is_some()).collect();
    let (pw, ph, cols) = (260.0, 160.0, 3usize);
    let rows = panels.len().div_ceil(cols).max(1);
    let mut svg = Svg::new(cols as f64 * (pw + 30.0) + 20.0, rows as f64 * (ph + 50.0) + 20.0);
    for (slot, &j) in panels.iter().enumerate() {
        let Some(k) = &result.kde[j] else { continue };
        let left = 30.0 + (slot % cols) as f64 * (pw + 30.0);
        let top = 35.0 + (slot / cols) as f64 * (ph + 50.0);
        let dmax = k.density.iter().copied().fold(0.0, f64::max);
        let ax = Axes::new(
            [k.grid[0], 0.0],
            [*k.grid.last().unwrap_or(&k.grid[0]), dmax.max(1e-300)],
            (left, top, pw, ph),
        );
        let color = if result.retained.contains(&j) { INK } else { MUTED };
        // a few hundred vertices are plenty for a smooth outline
        let step = (k.grid.len() / 400).max(1);
        let pts: Vec<(f64, f64)> = k.grid.iter().zip(&k.density).step_by(step).map(|(x, d)| ax.map([*x, *d])).collect();
        svg.polyline(&pts, color, 1.5, false);
        svg.line((left, top + ph), (left + pw, top + ph), MUTED, 1.0);
        svg.text((left + pw / 2.0, top - 10.0), "middle", &format!("{}  (p = {})", result.names[j], sig3(result.p_inc[j])));
        if let Some(m) = result.median[j] {
            let x = ax.map([m, 0.0]).0;
            svg.line((x, top), (x, top + ph), ACCENT, 1.0);
        }
        svg.text((left, top + ph + 16.0), "start", &sig3(ax.lo[0]));
        svg.text((left + pw, top + ph + 16.0), "end", &sig3(ax.hi[0]));
    }
    svg.finish()
}

fn curve_box(curves: &[&BoundaryCurve]) -> (Point, Point) {
    let pts: Vec<Point> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    bounding_box(&pts)
}

/// Shaded region between the lower and upper replayed fronts.
pub fn band_plot(band: &ReplayBand, observed: Option<&BoundaryCurve>) -> String {
    let mut all = vec![&band.lower, &band.median, &band.upper];
    if let Some(o) = observed {
        all.push(o);
    }
    let (mut lo, mut hi) = curve_box(&all);
    if let Topology::Periodic { period } = band.median.topology {
        lo[1] = lo[1].min(0.0);
        hi[1] = hi[1].max(period[1]);
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let (lo, hi) = ([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]);
    let size = 480.0;
    let aspect = (hi[1] - lo[1]) / (hi[0] - lo[0]);
    let (w, h) = if aspect >= 1.0 { (size / aspect, size) } else { (size, size * aspect) };
    let ax = Axes::new(lo, hi, (40.0, 50.0, w, h));
    let mut svg = Svg::new(w + 80.0, h + 100.0);
    let closed = matches!(band.median.topology, Topology::ClosedLoop);
    let map = |c: &BoundaryCurve| c.points.iter().map(|p| ax.map(*p)).collect::<Vec<_>>();
    let path = if closed {
        format!("M {} Z M {} Z", points_attr(&map(&band.upper)), points_attr(&map(&band.lower)))
    } else {
        let mut ring = map(&band.lower);
        ring.extend(map(&band.upper).into_iter().rev());
        format!("M {} Z", points_attr(&ring))
    };
    let _ = writeln!(svg.body, "<path d=\"{path}\" fill=\"{ACCENT}\" fill-opacity=\"0.3\" fill-rule=\"evenodd\" stroke=\"none\"/>");
    svg.polyline(&map(&band.lower), ACCENT, 1.0, closed);
    svg.polyline(&map(&band.upper), ACCENT, 1.0, closed);
    svg.polyline(&map(&band.median), INK, 1.5, closed);
    if let Some(o) = observed {
        let _ = writeln!(
            svg.body,
            "<{tag} points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>",
            points_attr(&map(o)),
            tag = if closed { "polygon" } else { "polyline" }
        );
    }
    svg.text(
        (40.0 + w / 2.0, 22.0),
        "middle",
        &format!("t = {}   kappa in [{}, {}]   band area {}", sig3(band.t_target), sig3(band.kappas[0]), sig3(band.kappas[2]), sig3(band.area)),
    );
    svg.text((40.0, h + 75.0), "start", "shaded: interval runs   solid: median run   dashed: data");
    svg.finish()
}

fn ramp(t: f64) -> String {
    // dark blue through teal to yellow
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let w = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + w * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Per-node colour map of scattered values on a regular grid of spacing `h`.
pub fn heatmap(points: &[Point], values: &[f64], h: f64, title: &str) -> String {
    let (lo, hi) = bounding_box(points);
    let (lo, hi) = ([lo[0] - h / 2.0, lo[1] - h / 2.0], [hi[0] + h / 2.0, hi[1] + h / 2.0]);
    let size = 480.0;
    let aspect = (hi[1] - lo[1]) / (hi[0] - lo[0]).max(1e-12);
    let (w, ht) = if aspect >= 1.0 { (size / aspect, size) } else { (size, size * aspect) };
    let ax = Axes::new(lo, hi, (40.0, 50.0, w, ht));
    let mut svg = Svg::new(w + 140.0, ht + 90.0);
    let vmax = values.iter().copied().fold(0.0, f64::max);
    let vmin = values.iter().copied().fold(vmax, f64::min);
    let span = (vmax - vmin).max(1e-300);
    let cell = (h / (hi[0] - lo[0]) * w).max(0.5);
    for (p, v) in points.iter().zip(values) {
        let (x, y) = ax.map([p[0] - h / 2.0, p[1] + h / 2.0]);
        let _ = writeln!(
            svg.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            cell + 0.3,
            cell + 0.3,
            ramp((v - vmin) / span)
        );
    }
    svg.text((40.0 + w / 2.0, 25.0), "middle", title);
    let bar_x = 60.0 + w;
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let y = 50.0 + ht * (1.0 - t) - ht / 50.0;
        let _ = writeln!(svg.body, "<rect x=\"{bar_x:.2}\" y=\"{y:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>", ht / 50.0 + 0.5, ramp(t));
    }
    svg.text((bar_x + 20.0, 60.0), "start", &sig3(vmax));
    svg.text((bar_x + 20.0, 50.0 + ht), "start", &sig3(vmin));
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
        assert_eq!(ramp(7.0), "#fde725");
    }

    #[test]
    fn heatmap_is_well_formed() {
        let pts: Vec<Point> = (0..4).flat_map(|i| (0..3).map(move |j| [i as f64 * 0.1, j as f64 * 0.1])).collect();
        let vals: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let s = heatmap(&pts, &vals, 0.1, "a < b");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect").count(), 1 + 12 + 50);
        assert!(s.contains("a &lt; b"));
    }

    #[test]
    fn axes_map_corners() {
        let ax = Axes::new([0.0, 0.0], [2.0, 1.0], (10.0, 20.0, 100.0, 50.0));
        assert_eq!(ax.map([0.0, 0.0]), (10.0, 70.0));
        assert_eq!(ax.map([2.0, 1.0]), (110.0, 20.0));
    }
}
