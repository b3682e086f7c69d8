//! Interface polylines, panels and corotational frames, normal velocity.
//!
//! Orientation convention: closed loops bound the inner region (the populated
//! side); periodic graphs are listed along their period vector with the
//! populated side on the left. Panel normals always point away from the
//! populated side, in the direction the front advances.

use crate::error::{Error, Result};
use crate::field::{FieldSnapshot, Point};
use crate::pddo::{evaluate_derivatives, Center, Frame, Neighborhood, PdFunctions, PddoParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Simple closed curve; the last point connects back to the first.
    ClosedLoop,
    /// Graph repeating with `period`; the last point connects to the first shifted by one period.
    Periodic { period: [f64; 2] },
    /// Graph without wrap.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub time: f64,
    pub points: Vec<Point>,
    pub topology: Topology,
}

impl BoundaryCurve {
    pub fn new(time: f64, points: Vec<Point>, topology: Topology) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "boundary curve needs at least 3 points, got {}",
                points.len()
            )));
        }
        Ok(Self { time, points, topology })
    }

    /// Segment endpoints, including the wrap segment for closed and periodic curves.
    pub fn segments(&self) -> Vec<(Point, Point)> {
        let n = self.points.len();
        let mut out: Vec<(Point, Point)> = self.points.windows(2).map(|w| (w[0], w[1])).collect();
        match self.topology {
            Topology::ClosedLoop => out.push((self.points[n - 1], self.points[0])),
            Topology::Periodic { period } => {
                let first = self.points[0];
                out.push((self.points[n - 1], [first[0] + period[0], first[1] + period[1]]));
            }
            Topology::Open => {}
        }
        out
    }

    /// Shoelace area; positive for counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            * 0.5
    }

    fn normal_sign(&self) -> f64 {
        match self.topology {
            Topology::ClosedLoop if self.signed_area() < 0.0 => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub midpoint: Point,
    /// Angle of the segment vector, radians.
    pub angle: f64,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

impl Panel {
    /// Corotational frame (normal, tangent) for derivative evaluation.
    pub fn frame(&self) -> Frame {
        Frame::corotational(self.normal, self.tangent)
    }
}

pub fn panels_from_curve(curve: &BoundaryCurve) -> Result<Vec<Panel>> {
    let sign = curve.normal_sign();
    curve
        .segments()
        .into_iter()
        .enumerate()
        .map(|(index, (a, b))| {
            let d = [b[0] - a[0], b[1] - a[1]];
            let length = d[0].hypot(d[1]);
            if !(length > 0.0) {
                return Err(Error::DegeneratePanel { index });
            }
            let angle = d[1].atan2(d[0]);
            let tangent = [d[0] / length, d[1] / length];
            // tangent turned by -90 degrees
            let normal = [sign * tangent[1], -sign * tangent[0]];
            let tangent = [sign * tangent[0], sign * tangent[1]];
            Ok(Panel {
                midpoint: [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5],
                angle,
                tangent,
                normal,
                length,
            })
        })
        .collect()
}

/// Unit normals `grad(phi)/|grad(phi)|` from a sampled level-set function.
pub fn normals_from_levelset(
    phi: &FieldSnapshot,
    boundary_points: &[Point],
    params: PddoParams,
) -> Result<Vec<[f64; 2]>> {
    let hood = Neighborhood::new(&phi.points, params)?;
    boundary_points
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            let fam = hood.family(Center::Location(p), None, Frame::cartesian())?;
            let pd = PdFunctions::for_family(&fam)?;
            let d = evaluate_derivatives(&phi.values, &fam, &pd)?;
            let norm = d.f1.hypot(d.f2);
            if !(norm >= 1e-8) {
                return Err(Error::FlatLevelSet { index, norm });
            }
            Ok([d.f1 / norm, d.f2 / norm])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityMethod {
    /// `|s| / dt`
    NearestNorm,
    /// `|s . n| / dt`
    #[default]
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalVelocitySample {
    pub panel: usize,
    pub time: f64,
    pub speed: f64,
    pub method: VelocityMethod,
}

fn nearest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

/// Closest point to `p` on the polyline of `curve`; periodic curves are
/// replicated one period either side first.
pub fn nearest_point_on_curve(curve: &BoundaryCurve, p: Point) -> Point {
    let segments = curve.segments();
    let shifts: Vec<[f64; 2]> = match curve.topology {
        Topology::Periodic { period } => vec![[0.0, 0.0], period, [-period[0], -period[1]]],
        _ => vec![[0.0, 0.0]],
    };
    let mut best = curve.points[0];
    let mut best_d2 = f64::INFINITY;
    for s in &shifts {
        for (a, b) in &segments {
            let a = [a[0] + s[0], a[1] + s[1]];
            let b = [b[0] + s[0], b[1] + s[1]];
            let q = nearest_on_segment(p, a, b);
            let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
    }
    best
}

pub fn normal_velocity(
    panels: &[Panel],
    curve_next: &BoundaryCurve,
    dt: f64,
    method: VelocityMethod,
) -> Result<Vec<NormalVelocitySample>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if curve_next.points.is_empty() {
        return Err(Error::MissingSnapshot("next boundary curve has no points".into()));
    }
    Ok(panels
        .iter()
        .enumerate()
        .map(|(i, panel)| {
            let q = nearest_point_on_curve(curve_next, panel.midpoint);
            let s = [q[0] - panel.midpoint[0], q[1] - panel.midpoint[1]];
            let speed = match method {
                VelocityMethod::NearestNorm => s[0].hypot(s[1]) / dt,
                VelocityMethod::Projected => (s[0] * panel.normal[0] + s[1] * panel.normal[1]).abs() / dt,
            };
            NormalVelocitySample { panel: i, time: curve_next.time - dt, speed, method }
        })
        .collect())
}

/// Signed distance from `p` to the curve: negative on the populated side.
pub fn signed_distance(curve: &BoundaryCurve, panels: &[Panel], p: Point) -> f64 {
    let segments = curve.segments();
    let shifts: Vec<[f64; 2]> = match curve.topology {
        Topology::Periodic { period } => vec![[0.0, 0.0], period, [-period[0], -period[1]]],
        _ => vec![[0.0, 0.0]],
    };
    let mut best = (f64::INFINITY, 0.0);
    for s in &shifts {
        for (k, (a, b)) in segments.iter().enumerate() {
            let a = [a[0] + s[0], a[1] + s[1]];
            let b = [b[0] + s[0], b[1] + s[1]];
            let q = nearest_on_segment(p, a, b);
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 {
                let n = panels[k].normal;
                // side test against the owning panel, robust at vertices via the
                // direction to the nearest point
                let side = (p[0] - q[0]) * n[0] + (p[1] - q[1]) * n[1];
                best = (d, side);
            }
        }
    }
    if best.1 > 0.0 {
        best.0
    } else {
        -best.0
    }
}
