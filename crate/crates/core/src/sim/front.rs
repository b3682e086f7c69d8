//! Single-valued front graphs: `x = s(y)` periodic in `y`, or `r = rho(theta)`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::field::Point;
use crate::geometry::{BoundaryCurve, Topology};

/// Largest front slope before the graph is treated as folding over.
pub const MAX_SLOPE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Front {
    /// `s[j]` is the front position on grid row `y = j * ly / s.len()`.
    Planar { s: Vec<f64>, ly: f64 },
    /// `rho[k]` is the radius at `theta = 2 pi k / rho.len()`.
    Star { rho: Vec<f64> },
}

/// Marker on the front with its outward unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Marker {
    pub point: Point,
    pub normal: Point,
    /// Ratio between marker motion along its graph coordinate and normal speed.
    pub stretch: f64,
}

impl Front {
    pub fn len(&self) -> usize {
        match self {
            Front::Planar { s, .. } => s.len(),
            Front::Star { rho } => rho.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn values(&self) -> &[f64] {
        match self {
            Front::Planar { s, .. } => s,
            Front::Star { rho } => rho,
        }
    }

    fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Front::Planar { s, .. } => s,
            Front::Star { rho } => rho,
        }
    }

    /// Periodic linear interpolation of the graph at a fractional marker index.
    fn graph_at(&self, u: f64) -> f64 {
        let v = self.values();
        let n = v.len();
        let u = u.rem_euclid(n as f64);
        let k = (u.floor() as usize).min(n - 1);
        let w = u - k as f64;
        (1.0 - w) * v[k] + w * v[(k + 1) % n]
    }

    /// `(a, u)` with `phi = a - graph(u)`; static for a fixed point and marker count.
    pub fn graph_coords(&self, p: Point) -> (f64, f64) {
        match self {
            Front::Planar { s, ly } => (p[0], p[1] / ly * s.len() as f64),
            Front::Star { rho } => {
                let th = p[1].atan2(p[0]).rem_euclid(TAU);
                (p[0].hypot(p[1]), th / TAU * rho.len() as f64)
            }
        }
    }

    pub fn phi_at_coords(&self, (a, u): (f64, f64)) -> f64 {
        a - self.graph_at(u)
    }

    /// Level-set value: negative inside the populated region.
    pub fn phi(&self, p: Point) -> f64 {
        self.phi_at_coords(self.graph_coords(p))
    }

    /// Central-difference slope of the graph at marker `k`, per unit graph coordinate.
    fn slope(&self, k: usize) -> f64 {
        let v = self.values();
        let n = v.len();
        let h = match self {
            Front::Planar { ly, .. } => ly / n as f64,
            Front::Star { .. } => TAU / n as f64,
        };
        (v[(k + 1) % n] - v[(k + n - 1) % n]) / (2.0 * h)
    }

    pub fn markers(&self) -> Vec<Marker> {
        let n = self.len();
        (0..n)
            .map(|k| match self {
                Front::Planar { s, ly } => {
                    let sy = self.slope(k);
                    let norm = (1.0 + sy * sy).sqrt();
                    Marker {
                        point: [s[k], k as f64 * ly / n as f64],
                        normal: [1.0 / norm, -sy / norm],
                        stretch: norm,
                    }
                }
                Front::Star { rho } => {
                    let th = TAU * k as f64 / n as f64;
                    let (sn, cs) = th.sin_cos();
                    let q = self.slope(k) / rho[k];
                    let norm = (1.0 + q * q).sqrt();
                    Marker {
                        point: [rho[k] * cs, rho[k] * sn],
                        normal: [(cs + q * sn) / norm, (sn - q * cs) / norm],
                        stretch: norm,
                    }
                }
            })
            .collect()
    }

    /// Move every marker by `normal speed * dt` along the outward normal.
    pub fn advance(&mut self, speeds: &[f64], dt: f64) {
        let markers = self.markers();
        for ((v, m), vn) in self.values_mut().iter_mut().zip(&markers).zip(speeds) {
            *v += dt * vn * m.stretch;
        }
    }

    pub fn max_slope(&self) -> f64 {
        (0..self.len())
            .map(|k| match self {
                Front::Planar { .. } => self.slope(k).abs(),
                Front::Star { rho } => (self.slope(k) / rho[k]).abs(),
            })
            .fold(0.0, f64::max)
    }

    pub fn to_curve(&self, time: f64) -> Result<BoundaryCurve> {
        let pts = self.markers().into_iter().map(|m| m.point).collect();
        let topology = match self {
            Front::Planar { ly, .. } => Topology::Periodic { period: [0.0, *ly] },
            Front::Star { .. } => Topology::ClosedLoop,
        };
        BoundaryCurve::new(time, pts, topology)
    }

    /// Inverse of [`Front::to_curve`].
    pub fn from_curve(curve: &BoundaryCurve) -> Result<Self> {
        match curve.topology {
            Topology::Periodic { period } => Ok(Front::Planar {
                s: curve.points.iter().map(|p| p[0]).collect(),
                ly: period[1],
            }),
            Topology::ClosedLoop => Ok(Front::Star { rho: curve.points.iter().map(|p| p[0].hypot(p[1])).collect() }),
            Topology::Open => Err(Error::InvalidParameter("open curves cannot drive the simulator".into())),
        }
    }

    /// Pointwise blend `(1 - w) a + w b` of two fronts with the same layout.
    pub fn lerp(a: &Front, b: &Front, w: f64) -> Result<Front> {
        if a.len() != b.len() || std::mem::discriminant(a) != std::mem::discriminant(b) {
            return Err(Error::Shape { expected: a.len(), found: b.len() });
        }
        let mut out = a.clone();
        for (o, (x, y)) in out.values_mut().iter_mut().zip(a.values().iter().zip(b.values())) {
            *o = (1.0 - w) * x + w * y;
        }
        Ok(out)
    }

    /// Area between two fronts: `int |s_b - s_a| dy` or `1/2 int |rho_b^2 - rho_a^2| dtheta`.
    pub fn area_between(a: &Front, b: &Front) -> Result<f64> {
        if a.len() != b.len() || std::mem::discriminant(a) != std::mem::discriminant(b) {
            return Err(Error::Shape { expected: a.len(), found: b.len() });
        }
        let n = a.len() as f64;
        Ok(match (a, b) {
            (Front::Planar { s: sa, ly }, Front::Planar { s: sb, .. }) => {
                sa.iter().zip(sb).map(|(x, y)| (y - x).abs()).sum::<f64>() * ly / n
            }
            (Front::Star { rho: ra }, Front::Star { rho: rb }) => {
                0.5 * ra.iter().zip(rb).map(|(x, y)| (y * y - x * x).abs()).sum::<f64>() * TAU / n
            }
            _ => unreachable!(),
        })
    }
}
