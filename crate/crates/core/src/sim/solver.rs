//! Explicit finite differences on a Cartesian grid with a sharp Dirichlet front.
//!
//! Nodes with `phi >= 0` sit outside the populated region and hold `u_f`.
//! Stencil arms that cross the front use a ghost value extrapolated linearly
//! through `u_f` at the sub-cell crossing; the part of that ghost which
//! depends on the centre node is taken implicitly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::front::Front;
use crate::error::{Error, Result};
use crate::field::{FieldSnapshot, Point};

/// Smallest crossing fraction used in ghost extrapolation.
const MIN_FRACTION: f64 = 1e-3;
/// Explicit diffusion safety factor.
pub const CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: Point,
    /// Row `ny` wraps to row 0.
    pub periodic_y: bool,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.dx, self.origin[1] + j as f64 * self.dy]
    }

    pub fn h(&self) -> f64 {
        self.dx.min(self.dy)
    }

    /// Neighbour index and its position, wrapping rows when periodic.
    fn neighbor(&self, i: usize, j: usize, di: isize, dj: isize) -> (Option<usize>, Point) {
        let ii = i as isize + di;
        let jj = j as isize + dj;
        let pos = [self.origin[0] + ii as f64 * self.dx, self.origin[1] + jj as f64 * self.dy];
        if ii < 0 || ii >= self.nx as isize {
            return (None, pos);
        }
        let jj = if self.periodic_y {
            jj.rem_euclid(self.ny as isize)
        } else if jj < 0 || jj >= self.ny as isize {
            return (None, pos);
        } else {
            jj
        };
        (Some(self.index(ii as usize, jj as usize)), pos)
    }
}

/// Right-hand side `sum c_k * feature_k` over the reaction-diffusion library
/// `[1, u, u^2, lap(u), u_x, u_y, u_xx, u_xy, u_yy, u_y*u_xx]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub coefficients: [f64; 10],
}

impl Model {
    pub fn fisher_kpp() -> Self {
        Self { coefficients: [0.0, 1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        let coefficients: [f64; 10] =
            c.try_into().map_err(|_| Error::Shape { expected: 10, found: c.len() })?;
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("model coefficients must be finite".into()));
        }
        Ok(Self { coefficients })
    }

    /// Effective diffusion along x and y.
    pub fn diffusion(&self) -> (f64, f64) {
        let c = &self.coefficients;
        (c[3] + c[6], c[3] + c[8])
    }

    pub fn check_well_posed(&self) -> Result<()> {
        let (dx, dy) = self.diffusion();
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::IllPosedModel(format!(
                "diffusion must be positive in both directions, got ({dx:.3e}, {dy:.3e})"
            )));
        }
        Ok(())
    }

    /// Largest stable explicit step on `grid`, before the safety factor.
    pub fn stable_dt(&self, grid: &Grid) -> f64 {
        let (ax, ay) = self.diffusion();
        let cxy = self.coefficients[7].abs();
        let rate = 2.0 * ax.max(0.0) / (grid.dx * grid.dx)
            + 2.0 * ay.max(0.0) / (grid.dy * grid.dy)
            + cxy / (grid.dx * grid.dy);
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSolver {
    pub grid: Grid,
    pub model: Model,
    pub u_f: f64,
    /// Column `i = 0` held at this value.
    pub dirichlet_left: Option<f64>,
    pub u: Vec<f64>,
    coords: Vec<(f64, f64)>,
    phi: Vec<f64>,
}

/// `value = a * u_centre + b`, with `a` nonzero only for ghost arms.
#[derive(Clone, Copy)]
struct Arm {
    a: f64,
    b: f64,
}

impl FieldSolver {
    pub fn new(grid: Grid, model: Model, u_f: f64, dirichlet_left: Option<f64>, u: Vec<f64>, front: &Front) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), found: u.len() });
        }
        let coords = (0..grid.ny)
            .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| front.graph_coords(grid.point(i, j)))
            .collect();
        let mut s = Self { grid, model, u_f, dirichlet_left, u, coords, phi: vec![0.0; grid.len()] };
        s.set_front(front);
        Ok(s)
    }

    pub fn inside(&self, idx: usize) -> bool {
        self.phi[idx] < 0.0
    }

    /// Recompute the level set and reset every outside node to `u_f`.
    pub fn set_front(&mut self, front: &Front) {
        let coords = &self.coords;
        self.phi.par_iter_mut().zip(coords.par_iter()).for_each(|(p, &c)| *p = front.phi_at_coords(c));
        let u_f = self.u_f;
        self.u.par_iter_mut().zip(self.phi.par_iter()).for_each(|(u, &p)| {
            if p >= 0.0 {
                *u = u_f;
            }
        });
        if let Some(v) = self.dirichlet_left {
            for j in 0..self.grid.ny {
                let k = self.grid.index(0, j);
                if self.phi[k] < 0.0 {
                    self.u[k] = v;
                }
            }
        }
    }

    fn arm(&self, front: &Front, i: usize, j: usize, di: isize, dj: isize) -> Arm {
        let p = self.grid.index(i, j);
        let (q, pos) = self.grid.neighbor(i, j, di, dj);
        let phi_q = match q {
            Some(q) if self.phi[q] < 0.0 => return Arm { a: 0.0, b: self.u[q] },
            Some(q) => self.phi[q],
            None => match front.phi(pos) {
                // off-grid but inside: copy the centre (zero flux)
                v if v < 0.0 => return Arm { a: 1.0, b: 0.0 },
                v => v,
            },
        };
        let phi_p = self.phi[p];
        let theta = if phi_q > phi_p { (phi_p / (phi_p - phi_q)).clamp(MIN_FRACTION, 1.0) } else { 1.0 };
        Arm { a: -(1.0 - theta) / theta, b: self.u_f / theta }
    }

    fn update(&self, front: &Front, i: usize, j: usize, dt: f64) -> f64 {
        let g = &self.grid;
        let idx = g.index(i, j);
        let u = self.u[idx];
        let c = &self.model.coefficients;
        let (e, w, n, s) = (
            self.arm(front, i, j, 1, 0),
            self.arm(front, i, j, -1, 0),
            self.arm(front, i, j, 0, 1),
            self.arm(front, i, j, 0, -1),
        );
        let (hx2, hy2) = (g.dx * g.dx, g.dy * g.dy);
        // (regular diagonal, ghost diagonal, constant) for each derivative
        let ux = (0.0, (e.a - w.a) / (2.0 * g.dx), (e.b - w.b) / (2.0 * g.dx));
        let uy = (0.0, (n.a - s.a) / (2.0 * g.dy), (n.b - s.b) / (2.0 * g.dy));
        let uxx = (-2.0 / hx2, (e.a + w.a) / hx2, (e.b + w.b) / hx2);
        let uyy = (-2.0 / hy2, (n.a + s.a) / hy2, (n.b + s.b) / hy2);
        let uxy = if c[7] != 0.0 {
            let d = 4.0 * g.dx * g.dy;
            let (ne, nw, se, sw) = (
                self.arm(front, i, j, 1, 1),
                self.arm(front, i, j, -1, 1),
                self.arm(front, i, j, 1, -1),
                self.arm(front, i, j, -1, -1),
            );
            (0.0, (ne.a - nw.a - se.a + sw.a) / d, (ne.b - nw.b - se.b + sw.b) / d)
        } else {
            (0.0, 0.0, 0.0)
        };
        let terms = [(c[3], uxx), (c[3], uyy), (c[4], ux), (c[5], uy), (c[6], uxx), (c[7], uxy), (c[8], uyy)];
        let mut implicit = 0.0;
        let mut explicit = c[0] + c[1] * u + c[2] * u * u;
        for (coef, (reg, gh, b)) in terms {
            if coef != 0.0 {
                implicit += coef * gh;
                explicit += coef * (reg * u + b);
            }
        }
        if c[9] != 0.0 {
            let val = |(reg, gh, b): (f64, f64, f64)| (reg + gh) * u + b;
            explicit += c[9] * val(uy) * val(uxx);
        }
        if implicit < 0.0 {
            (u + dt * explicit) / (1.0 - dt * implicit)
        } else {
            u + dt * (explicit + implicit * u)
        }
    }

    /// One explicit step with the front held fixed.
    pub fn step(&mut self, front: &Front, dt: f64) {
        let g = self.grid;
        let mut next = self.u.clone();
        let this = &*self;
        next.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                let idx = g.index(i, j);
                if this.phi[idx] >= 0.0 || (i == 0 && this.dirichlet_left.is_some()) {
                    continue;
                }
                *v = this.update(front, i, j, dt);
            }
        });
        self.u = next;
    }

    /// Bilinear interpolation of the nodal field.
    pub fn sample(&self, p: Point) -> f64 {
        let g = &self.grid;
        let fx = ((p[0] - g.origin[0]) / g.dx).clamp(0.0, (g.nx - 1) as f64);
        let mut fy = (p[1] - g.origin[1]) / g.dy;
        if g.periodic_y {
            fy = fy.rem_euclid(g.ny as f64);
        } else {
            fy = fy.clamp(0.0, (g.ny - 1) as f64);
        }
        let i = (fx.floor() as usize).min(g.nx.saturating_sub(2));
        let j = fy.floor() as usize;
        let j = if g.periodic_y { j.min(g.ny - 1) } else { j.min(g.ny.saturating_sub(2)) };
        let j1 = if g.periodic_y { (j + 1) % g.ny } else { j + 1 };
        let (wx, wy) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| self.u[g.index(i, j)];
        (1.0 - wy) * ((1.0 - wx) * at(i, j) + wx * at(i + 1, j)) + wy * ((1.0 - wx) * at(i, j1) + wx * at(i + 1, j1))
    }

    /// Stefan speed `-kappa du/dn` at every front marker, from a one-sided
    /// quadratic through the front value and two samples along `-n`.
    pub fn front_speeds(&self, front: &Front, kappa: f64) -> Vec<f64> {
        let a = 1.5 * self.grid.h();
        front
            .markers()
            .iter()
            .map(|m| {
                let at = |d: f64| self.sample([m.point[0] - d * m.normal[0], m.point[1] - d * m.normal[1]]);
                let (u1, u2) = (at(a), at(2.0 * a));
                kappa * (4.0 * u1 - u2 - 3.0 * self.u_f) / (2.0 * a)
            })
            .collect()
    }

    /// Values at the inside nodes, in grid order.
    pub fn snapshot(&self, time: f64) -> FieldSnapshot {
        let g = &self.grid;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                if self.phi[k] < 0.0 {
                    points.push(g.point(i, j));
                    values.push(self.u[k]);
                }
            }
        }
        FieldSnapshot { time, points, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_grid(n: usize, h: f64) -> Grid {
        Grid { nx: n + 1, ny: n, dx: h, dy: h, origin: [0.0, 0.0], periodic_y: true }
    }

    #[test]
    fn fixed_points_of_the_reaction() {
        let g = planar_grid(20, 0.1);
        let far = Front::Planar { s: vec![100.0; 20], ly: 2.0 };
        for level in [0.0, 1.0] {
            let mut s = FieldSolver::new(g, Model::fisher_kpp(), 0.0, None, vec![level; g.len()], &far).unwrap();
            for _ in 0..200 {
                s.step(&far, 0.002);
            }
            assert!(s.u.iter().all(|v| (v - level).abs() < 1e-14));
        }
    }

    #[test]
    fn exact_for_linear_profile_at_front() {
        // u = 1 - x/2 between a Dirichlet edge and a front at x = 2; harmonic, so only the
        // reaction changes it in one step
        let g = planar_grid(30, 0.1);
        let s_pos = 2.05;
        let front = Front::Planar { s: vec![s_pos; 30], ly: 3.0 };
        let u: Vec<f64> = (0..g.len()).map(|k| 1.0 - (k % g.nx) as f64 * 0.1 / s_pos).collect();
        let model = Model { coefficients: [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] };
        let mut s = FieldSolver::new(g, model, 0.0, Some(1.0), u.clone(), &front).unwrap();
        s.step(&front, 0.002);
        for k in 0..g.len() {
            if s.inside(k) {
                assert!((s.u[k] - u[k]).abs() < 1e-12, "node {k}: {} vs {}", s.u[k], u[k]);
            }
        }
        let v = s.front_speeds(&front, 0.5);
        assert!(v.iter().all(|x| (x - 0.5 / s_pos).abs() < 1e-9));
    }

    #[test]
    fn bilinear_sampling() {
        let g = planar_grid(10, 0.5);
        let far = Front::Planar { s: vec![100.0; 10], ly: 5.0 };
        let u: Vec<f64> = (0..g.len()).map(|k| (k % g.nx) as f64 * 0.5 * 2.0 + 3.0).collect();
        let s = FieldSolver::new(g, Model::fisher_kpp(), 0.0, None, u, &far).unwrap();
        assert!((s.sample([1.3, 4.9]) - (2.6 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn well_posedness() {
        assert!(Model::fisher_kpp().check_well_posed().is_ok());
        let bad = Model { coefficients: [0.0, 1.0, -1.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] };
        assert!(matches!(bad.check_well_posed(), Err(Error::IllPosedModel(_))));
        assert!(Model::from_slice(&[1.0; 3]).is_err());
        let g = planar_grid(10, 0.1);
        assert!((Model::fisher_kpp().stable_dt(&g) - 0.0025).abs() < 1e-15);
    }
}
