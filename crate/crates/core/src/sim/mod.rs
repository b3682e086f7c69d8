//! Fisher-Stefan forward solver for ground-truth data, noise injection and model replay.

mod front;
mod replay;
mod solver;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use front::{Front, Marker, MAX_SLOPE};
pub use replay::{replay_boundary, replay_field, FieldReplay, ReplayBand};
pub use solver::{FieldSolver, Grid, Model, CFL_SAFETY};

use crate::error::{Error, Result};
use crate::field::FieldSnapshot;
use crate::geometry::BoundaryCurve;
use crate::library::{CandidateLibrary, Problem};

pub const DATASET_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Front `x = s(y)` advancing from a fixed edge `x = 0`, periodic in `y`.
    Planar,
    /// Closed front `r = rho(theta)` around the origin.
    Star,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::Planar => "planar",
            Case::Star => "star",
        })
    }
}

/// Initial front `front0 + amplitude * sum_m sin(m phase)`, with phase `2 pi y / Ly` or `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub modes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub case: Case,
    pub kappa: f64,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub t_end: f64,
    pub u_f: f64,
    pub u_ell: f64,
    /// Solver steps between stored snapshots.
    pub snapshot_stride: usize,
    /// Planar: `[Lx, Ly]`. Star: half-widths of the box centred on the origin.
    pub extent: [f64; 2],
    pub front0: f64,
    pub perturbation: Perturbation,
    /// Initial profile `amplitude * (1 - (d / front)^exponent)` behind the front.
    pub ic_amplitude: f64,
    pub ic_exponent: f64,
    /// Front markers for the star case; the planar case uses one per grid row.
    pub n_theta: usize,
}

impl SimParams {
    pub fn planar() -> Self {
        Self {
            case: Case::Planar,
            kappa: 0.5,
            dx: 0.1,
            dy: 0.1,
            dt: 0.002,
            t_end: 5.0,
            u_f: 0.0,
            u_ell: 1.0,
            snapshot_stride: 25,
            extent: [10.0, 10.0],
            front0: 4.0,
            perturbation: Perturbation { amplitude: 0.2, modes: vec![2] },
            ic_amplitude: 1.0,
            ic_exponent: 4.0,
            n_theta: 0,
        }
    }

    pub fn star() -> Self {
        Self {
            case: Case::Star,
            kappa: 0.1,
            dx: 0.1,
            dy: 0.1,
            dt: 0.002,
            t_end: 40.0,
            u_f: 0.0,
            u_ell: 1.0,
            snapshot_stride: 200,
            extent: [10.0, 10.0],
            front0: 3.5,
            perturbation: Perturbation { amplitude: 0.2, modes: vec![3, 12, 16] },
            ic_amplitude: 1.0,
            ic_exponent: 3.0,
            n_theta: 360,
        }
    }

    pub fn for_case(case: Case) -> Self {
        match case {
            Case::Planar => Self::planar(),
            Case::Star => Self::star(),
        }
    }

    pub fn cfl_limit(&self) -> f64 {
        CFL_SAFETY * self.dx.min(self.dy).powi(2) / 4.0
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("dx", self.dx),
            ("dy", self.dy),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("front0", self.front0),
            ("ic_exponent", self.ic_exponent),
            ("extent x", self.extent[0]),
            ("extent y", self.extent[1]),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot stride must be >= 1".into()));
        }
        if self.case == Case::Star && self.n_theta < 8 {
            return Err(Error::InvalidParameter(format!("n_theta must be >= 8, got {}", self.n_theta)));
        }
        let limit = self.cfl_limit();
        if self.dt > limit {
            return Err(Error::Cfl { dt: self.dt, limit });
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end {} is not a whole number of steps of {}",
                self.t_end, self.dt
            )));
        }
        if self.case == Case::Planar {
            let rows = self.extent[1] / self.dy;
            if (rows - rows.round()).abs() > 1e-9 * rows {
                return Err(Error::InvalidParameter("Ly must be a whole number of dy for periodicity".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        match self.case {
            Case::Planar => Grid {
                nx: (self.extent[0] / self.dx).round() as usize + 1,
                ny: (self.extent[1] / self.dy).round() as usize,
                dx: self.dx,
                dy: self.dy,
                origin: [0.0, 0.0],
                periodic_y: true,
            },
            Case::Star => Grid {
                nx: (2.0 * self.extent[0] / self.dx).round() as usize + 1,
                ny: (2.0 * self.extent[1] / self.dy).round() as usize + 1,
                dx: self.dx,
                dy: self.dy,
                origin: [-self.extent[0], -self.extent[1]],
                periodic_y: false,
            },
        }
    }

    pub fn initial_front(&self) -> Front {
        let bump = |phase: f64| {
            self.front0 + self.perturbation.amplitude * self.perturbation.modes.iter().map(|&m| (m as f64 * phase).sin()).sum::<f64>()
        };
        match self.case {
            Case::Planar => {
                let g = self.grid();
                let ly = self.extent[1];
                Front::Planar { s: (0..g.ny).map(|j| bump(TAU * j as f64 * self.dy / ly)).collect(), ly }
            }
            Case::Star => Front::Star { rho: (0..self.n_theta).map(|k| bump(TAU * k as f64 / self.n_theta as f64)).collect() },
        }
    }

    pub fn initial_field(&self, grid: &Grid, front: &Front) -> Vec<f64> {
        let mut u = vec![self.u_f; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.point(i, j);
                let (a, _) = front.graph_coords(p);
                let phi = front.phi(p);
                if phi < 0.0 {
                    let edge = a - phi;
                    let ratio = (a / edge).max(0.0);
                    let amp = match self.case {
                        Case::Planar => self.u_ell,
                        Case::Star => self.ic_amplitude,
                    };
                    u[grid.index(i, j)] = self.u_f + (amp - self.u_f) * (1.0 - ratio.powf(self.ic_exponent));
                }
            }
        }
        u
    }

    fn check_topology(&self, front: &Front, time: f64) -> Result<()> {
        let h = self.dx.min(self.dy);
        let fail = |reason: String| Err(Error::Topology { time, reason });
        if front.max_slope() > MAX_SLOPE {
            return fail(format!("front slope {:.3} exceeds {MAX_SLOPE}", front.max_slope()));
        }
        match front {
            Front::Planar { s, .. } => {
                let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                if lo <= 3.0 * h || hi >= self.extent[0] - 3.0 * h || !lo.is_finite() || !hi.is_finite() {
                    return fail(format!("front left the domain: x in [{lo:.4}, {hi:.4}]"));
                }
            }
            Front::Star { rho } => {
                let (lo, hi) = rho.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                let wall = self.extent[0].min(self.extent[1]) - 3.0 * h;
                if lo <= 2.0 * h || !lo.is_finite() {
                    return fail(format!("front collapsed: radius {lo:.4}"));
                }
                if hi >= wall || !hi.is_finite() {
                    return fail(format!("front reached the box: radius {hi:.4}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stefan: Vec<f64>,
    pub fisher: Vec<f64>,
}

impl GroundTruth {
    pub fn for_params(params: &SimParams) -> Self {
        let mut stefan = vec![0.0; CandidateLibrary::stefan().len()];
        stefan[2] = -params.kappa;
        Self { stefan, fisher: Model::fisher_kpp().coefficients.to_vec() }
    }

    pub fn for_problem(&self, problem: Problem) -> &[f64] {
        match problem {
            Problem::Stefan => &self.stefan,
            Problem::Fisher => &self.fisher,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub eta: f64,
    pub seed: u64,
    pub sigma_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub solver_version: String,
    pub seed: u64,
    pub params: SimParams,
    pub truth: GroundTruth,
    pub noise: Option<NoiseRecord>,
    /// Snapshot times, one per stored index.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub snapshots: Vec<FieldSnapshot>,
    pub curves: Vec<BoundaryCurve>,
}

impl Dataset {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

/// How the front moves during a run.
pub(crate) enum Drive<'a> {
    Stefan { kappa: f64 },
    Prescribed(&'a [BoundaryCurve]),
}

pub(crate) struct RunOutput {
    pub snapshots: Vec<FieldSnapshot>,
    pub curves: Vec<BoundaryCurve>,
    pub front: Front,
    pub solver: FieldSolver,
}

fn prescribed_front(curves: &[BoundaryCurve], t: f64) -> Result<Front> {
    let k = curves.partition_point(|c| c.time <= t);
    if k == 0 {
        return Front::from_curve(&curves[0]);
    }
    if k == curves.len() {
        return Front::from_curve(&curves[k - 1]);
    }
    let (a, b) = (&curves[k - 1], &curves[k]);
    let w = (t - a.time) / (b.time - a.time);
    Front::lerp(&Front::from_curve(a)?, &Front::from_curve(b)?, w)
}

/// Integrate `steps` steps of size `dt`, recording every `stride` steps when `record`.
pub(crate) fn run(
    params: &SimParams,
    model: Model,
    drive: Drive<'_>,
    dt: f64,
    steps: usize,
    record: Option<usize>,
) -> Result<RunOutput> {
    let grid = params.grid();
    let mut front = match &drive {
        Drive::Stefan { .. } => params.initial_front(),
        Drive::Prescribed(curves) => {
            if curves.is_empty() {
                return Err(Error::MissingSnapshot("no boundary curves to prescribe".into()));
            }
            prescribed_front(curves, 0.0)?
        }
    };
    let dirichlet = (params.case == Case::Planar).then_some(params.u_ell);
    let u0 = params.initial_field(&grid, &front);
    let mut solver = FieldSolver::new(grid, model, params.u_f, dirichlet, u0, &front)?;
    let mut snapshots = Vec::new();
    let mut curves = Vec::new();
    let mut emit = |k: usize, solver: &FieldSolver, front: &Front| -> Result<()> {
        if let Some(stride) = record {
            if k % stride == 0 {
                let t = k as f64 * dt;
                snapshots.push(solver.snapshot(t));
                curves.push(front.to_curve(t)?);
            }
        }
        Ok(())
    };
    params.check_topology(&front, 0.0)?;
    emit(0, &solver, &front)?;
    for k in 0..steps {
        let t_next = (k + 1) as f64 * dt;
        match &drive {
            Drive::Stefan { kappa } => {
                let speeds = solver.front_speeds(&front, *kappa);
                solver.step(&front, dt);
                front.advance(&speeds, dt);
                params.check_topology(&front, t_next)?;
            }
            Drive::Prescribed(c) => {
                solver.step(&front, dt);
                front = prescribed_front(c, t_next)?;
            }
        }
        solver.set_front(&front);
        emit(k + 1, &solver, &front)?;
    }
    Ok(RunOutput { snapshots, curves, front, solver })
}

/// Coupled Fisher-KPP / Stefan integration from the parameterised initial state.
pub fn simulate(params: &SimParams, seed: u64) -> Result<Dataset> {
    params.validate()?;
    let out = run(
        params,
        Model::fisher_kpp(),
        Drive::Stefan { kappa: params.kappa },
        params.dt,
        params.n_steps(),
        Some(params.snapshot_stride),
    )?;
    Ok(Dataset {
        manifest: Manifest {
            format: DATASET_FORMAT,
            solver_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            params: params.clone(),
            truth: GroundTruth::for_params(params),
            noise: None,
            times: out.snapshots.iter().map(|s| s.time).collect(),
        },
        snapshots: out.snapshots,
        curves: out.curves,
    })
}

/// Population standard deviation of every field value in the dataset.
pub fn field_std(snapshots: &[FieldSnapshot]) -> f64 {
    let n: usize = snapshots.iter().map(|s| s.len()).sum();
    if n == 0 {
        return 0.0;
    }
    let mean = snapshots.iter().flat_map(|s| &s.values).sum::<f64>() / n as f64;
    (snapshots.iter().flat_map(|s| &s.values).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Add i.i.d. `N(0, (eta * std(u))^2)` noise to every field value; curves are untouched.
pub fn add_noise(dataset: &Dataset, eta: f64, seed: u64) -> Result<Dataset> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {eta}")));
    }
    let sigma_u = field_std(&dataset.snapshots);
    let mut out = dataset.clone();
    out.manifest.noise = Some(NoiseRecord { eta, seed, sigma_u });
    if eta == 0.0 || sigma_u == 0.0 {
        return Ok(out);
    }
    let dist = Normal::new(0.0, eta * sigma_u).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for snap in &mut out.snapshots {
        for v in &mut snap.values {
            *v += dist.sample(&mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_planar() -> SimParams {
        SimParams { extent: [4.0, 2.0], front0: 1.5, t_end: 0.2, snapshot_stride: 20, ..SimParams::planar() }
    }

    #[test]
    fn cfl_refusal() {
        let p = SimParams { dt: 0.01, ..SimParams::planar() };
        assert!(matches!(simulate(&p, 0), Err(Error::Cfl { .. })));
        assert!(matches!(p.validate(), Err(Error::Cfl { .. })));
    }

    #[test]
    fn star_initial_front_matches_formula() {
        let p = SimParams::star();
        let Front::Star { rho } = p.initial_front() else { panic!() };
        for (k, r) in rho.iter().enumerate() {
            let th = TAU * k as f64 / 360.0;
            let want = 3.5 + 0.2 * ((3.0 * th).sin() + (12.0 * th).sin() + (16.0 * th).sin());
            assert!((r - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let p = SimParams { u_ell: 0.0, ..small_planar() };
        let d = simulate(&p, 0).unwrap();
        assert!(d.snapshots.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
        assert_eq!(d.curves.first().unwrap().points, d.curves.last().unwrap().points);
    }

    #[test]
    fn small_planar_run_is_bounded_and_advances() {
        let d = simulate(&small_planar(), 3).unwrap();
        assert_eq!(d.snapshots.len(), 6);
        assert_eq!(d.curves.len(), 6);
        for s in &d.snapshots {
            assert!(s.values.iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
        }
        let mean_x = |c: &BoundaryCurve| c.points.iter().map(|p| p[0]).sum::<f64>() / c.points.len() as f64;
        for w in d.curves.windows(2) {
            assert!(mean_x(&w[1]) >= mean_x(&w[0]));
        }
        assert_eq!(d.manifest.truth.stefan[2], -0.5);
    }

    #[test]
    fn topology_error_when_front_exits() {
        let p = SimParams { extent: [2.0, 2.0], front0: 1.6, kappa: 5.0, t_end: 2.0, dt: 0.002, ..small_planar() };
        assert!(matches!(simulate(&p, 0), Err(Error::Topology { .. })));
    }

    #[test]
    fn noise_statistics() {
        let d = simulate(&SimParams { snapshot_stride: 2, ..small_planar() }, 0).unwrap();
        let same = add_noise(&d, 0.0, 9).unwrap();
        assert_eq!(same.snapshots, d.snapshots);
        let noisy = add_noise(&d, 0.05, 9).unwrap();
        let sigma = field_std(&d.snapshots);
        let diffs: Vec<f64> = noisy
            .snapshots
            .iter()
            .zip(&d.snapshots)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect::<Vec<_>>())
            .collect();
        assert!(diffs.len() >= 10_000);
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        assert!((sd / (0.05 * sigma) - 1.0).abs() < 0.02);
        assert_eq!(add_noise(&d, 0.05, 9).unwrap().snapshots, noisy.snapshots);
        assert_eq!(noisy.curves, d.curves);
        assert!(add_noise(&d, -1.0, 0).is_err());
    }
}
