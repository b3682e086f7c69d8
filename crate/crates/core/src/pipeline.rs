//! The four pipeline stages and their on-disk outputs.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ensemble_fit, EnsembleConfig, EnsembleResult, InclusionDenominator};
use crate::error::{Error, Result};
use crate::geometry::VelocityMethod;
use crate::io;
use crate::library::{
    build_fisher_system, build_stefan_system, normalize, FeatureSystem, FisherConfig, Problem, StefanConfig,
    STEFAN_HORIZON_FACTOR,
};
use crate::pddo::PddoParams;
use crate::plot;
use crate::regression::{select_lambda1, RegressionParams};
use crate::report::{DatasetEcho, DiscoveryReport};
use crate::sim::{self, Dataset, FieldReplay, ReplayBand, SimParams};

pub const REPORT_FILE: &str = "report.toml";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Every knob of the discovery stage; echoed verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverOptions {
    pub problem: Problem,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_iter: usize,
    pub debias: bool,
    pub n_boot: usize,
    pub leave_out: usize,
    pub p_inc_threshold: f64,
    pub seed: u64,
    pub perturb_noise: f64,
    pub denominator: InclusionDenominator,
    /// Horizon in units of the grid spacing.
    pub horizon_factor: f64,
    pub velocity: VelocityMethod,
    /// Fisher rows stay this many horizons away from the front and the box edges.
    pub margin_factor: f64,
    pub time_stride: usize,
    pub space_stride: usize,
    /// AIC sweep; when present the ensemble runs at the winning value.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub select_lambda1: Option<Vec<f64>>,
}

impl DiscoverOptions {
    pub fn for_problem(problem: Problem) -> Self {
        let base = Self {
            problem,
            lambda1: 0.3,
            lambda2: 1.0,
            max_iter: 25,
            debias: true,
            n_boot: 60,
            leave_out: 3,
            p_inc_threshold: 0.7,
            seed: 0,
            perturb_noise: 0.0,
            denominator: InclusionDenominator::Presence,
            horizon_factor: STEFAN_HORIZON_FACTOR,
            velocity: VelocityMethod::Projected,
            margin_factor: 1.5,
            time_stride: 1,
            space_stride: 1,
            select_lambda1: None,
        };
        match problem {
            Problem::Stefan => base,
            Problem::Fisher => Self { lambda1: 0.2, leave_out: 1, horizon_factor: 3.015, ..base },
        }
    }

    pub fn regression(&self, lambda1: f64) -> RegressionParams {
        RegressionParams { lambda1, lambda2: self.lambda2, max_iter: self.max_iter, debias: self.debias }
    }

    pub fn ensemble(&self, lambda1: f64) -> EnsembleConfig {
        EnsembleConfig {
            n_boot: self.n_boot,
            leave_out: self.leave_out,
            p_inc_threshold: self.p_inc_threshold,
            regression: self.regression(lambda1),
            seed: self.seed,
            perturb_noise: self.perturb_noise,
            denominator: self.denominator,
        }
    }
}

/// Grid spacing of a simulator dataset.
pub fn spacing(params: &SimParams) -> f64 {
    params.dx.min(params.dy)
}

pub fn feature_system(dataset: &Dataset, opts: &DiscoverOptions) -> Result<FeatureSystem> {
    if !(opts.horizon_factor > 0.0) || opts.time_stride == 0 || opts.space_stride == 0 {
        return Err(Error::InvalidParameter("horizon factor and strides must be positive".into()));
    }
    let h = spacing(&dataset.manifest.params);
    let pddo = PddoParams { horizon: opts.horizon_factor * h, volume: h * h };
    match opts.problem {
        Problem::Stefan => {
            let cfg = StefanConfig { pddo, velocity: opts.velocity, time_stride: opts.time_stride };
            build_stefan_system(&dataset.snapshots, &dataset.curves, &cfg)
        }
        Problem::Fisher => {
            let g = dataset.manifest.params.grid();
            let far = [
                g.origin[0] + (g.nx - 1) as f64 * g.dx,
                g.origin[1] + (g.ny - 1) as f64 * g.dy,
            ];
            let cfg = FisherConfig {
                pddo,
                margin_factor: opts.margin_factor,
                time_stride: opts.time_stride,
                space_stride: opts.space_stride,
                domain: Some((g.origin, far)),
            };
            build_fisher_system(&dataset.snapshots, &dataset.curves, &cfg)
        }
    }
}

pub struct Discovery {
    pub report: DiscoveryReport,
    pub result: EnsembleResult,
}

pub fn discover(dataset: &Dataset, opts: &DiscoverOptions) -> Result<Discovery> {
    let system = normalize(&feature_system(dataset, opts)?)?;
    info!("{} system: {} rows x {} features", opts.problem, system.nrows(), system.ncols());
    let selection = match &opts.select_lambda1 {
        Some(c) => Some(select_lambda1(&system.matrix, &system.velocity, c, opts.lambda2)?),
        None => None,
    };
    let lambda1 = selection.as_ref().map_or(opts.lambda1, |s| s.chosen);
    let truth = dataset.manifest.truth.for_problem(opts.problem);
    let result = ensemble_fit(&system, &opts.ensemble(lambda1), Some(truth))?;
    let echo = DatasetEcho {
        seed: dataset.manifest.seed,
        snapshots: dataset.snapshots.len(),
        noise_eta: dataset.manifest.noise.as_ref().map(|n| n.eta),
        noise_seed: dataset.manifest.noise.as_ref().map(|n| n.seed),
    };
    let report = DiscoveryReport::new(opts.problem, system.nrows(), &result, Some(truth), echo, opts.clone(), selection)?;
    Ok(Discovery { report, result })
}

pub enum Replay {
    Boundary(ReplayBand),
    Field(FieldReplay),
}

/// Stefan reports drive the front with the interval ends and median of `u_xn`;
/// Fisher reports replace the reaction-diffusion model with the recovered one.
pub fn replay(dataset: &Dataset, report: &DiscoveryReport, t_target: f64) -> Result<Replay> {
    if report.is_empty_model() {
        return Err(Error::NoModel(format!("the {} report retained no features", report.problem)));
    }
    match report.problem {
        Problem::Stefan => {
            let f = report
                .feature("u_xn")
                .filter(|f| f.retained)
                .ok_or_else(|| Error::NoModel("the Stefan report did not retain u_xn".into()))?;
            let (Some(m), Some(ci)) = (f.median, f.ci) else {
                return Err(Error::NoModel("u_xn has no recorded draws".into()));
            };
            sim::replay_boundary(dataset, [ci.lower, m, ci.upper], t_target).map(Replay::Boundary)
        }
        Problem::Fisher => sim::replay_field(dataset, &report.coefficients, t_target).map(Replay::Field),
    }
}

pub fn cmd_simulate(params: &SimParams, seed: u64, out: &Path) -> Result<Dataset> {
    let d = sim::simulate(params, seed)?;
    io::write_dataset(out, &d)?;
    info!("wrote {} snapshots to {}", d.snapshots.len(), out.display());
    Ok(d)
}

pub fn cmd_corrupt(input: &Path, eta: f64, seed: u64, out: &Path) -> Result<Dataset> {
    if same_dir(input, out) {
        return Err(Error::InvalidParameter("corrupt output must differ from its input".into()));
    }
    let d = sim::add_noise(&io::read_dataset(input)?, eta, seed)?;
    io::write_dataset(out, &d)?;
    Ok(d)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Writes `report.toml`, `summary.txt`, `coefficients.svg` and `kde.svg`.
pub fn cmd_discover(dataset_dir: &Path, opts: &DiscoverOptions, out: &Path) -> Result<DiscoveryReport> {
    let dataset = io::read_dataset(dataset_dir)?;
    let Discovery { report, result } = discover(&dataset, opts)?;
    io::write_text(&out.join(REPORT_FILE), &report.to_toml()?)?;
    io::write_text(&out.join(SUMMARY_FILE), &report.summary())?;
    io::write_text(&out.join("coefficients.svg"), &plot::coefficient_plot(&report))?;
    io::write_text(&out.join("kde.svg"), &plot::kde_plot(&result))?;
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<DiscoveryReport> {
    let text = io::read_text(path)?;
    DiscoveryReport::from_toml(&text).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path, message),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub t_target: f64,
    pub kappas: [f64; 3],
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub t_target: f64,
    pub max_error: f64,
    pub nodes: usize,
}

/// Stefan: `band.toml`, `band.svg` and `boundary/{lower,median,upper}.csv`.
/// Fisher: `field.toml`, `field_error.csv` and `field_error.svg`.
pub fn cmd_replay(dataset_dir: &Path, report_path: &Path, t_target: f64, out: &Path) -> Result<Replay> {
    let dataset = io::read_dataset(dataset_dir)?;
    let report = read_report(report_path)?;
    let r = replay(&dataset, &report, t_target)?;
    match &r {
        Replay::Boundary(b) => {
            let dir: PathBuf = out.join("boundary");
            io::write_curve(&dir.join("lower.csv"), &b.lower)?;
            io::write_curve(&dir.join("median.csv"), &b.median)?;
            io::write_curve(&dir.join("upper.csv"), &b.upper)?;
            let observed = dataset.curves.iter().find(|c| (c.time - t_target).abs() < 1e-9 * t_target.max(1.0));
            io::write_text(&out.join("band.svg"), &plot::band_plot(b, observed))?;
            io::write_toml(&out.join("band.toml"), &BandSummary { t_target, kappas: b.kappas, area: b.area })?;
        }
        Replay::Field(f) => {
            let rows = f
                .reference
                .points
                .iter()
                .zip(&f.reference.values)
                .zip(&f.recovered.values)
                .zip(&f.error)
                .map(|(((p, a), b), e)| vec![p[0], p[1], *a, *b, *e]);
            io::write_csv(&out.join("field_error.csv"), None, &["x", "y", "reference", "recovered", "error"], rows)?;
            let h = spacing(&dataset.manifest.params);
            let title = format!("|u_recovered - u_reference| at t = {}", crate::report::sig3(t_target));
            io::write_text(&out.join("field_error.svg"), &plot::heatmap(&f.reference.points, &f.error, h, &title))?;
            io::write_toml(
                &out.join("field.toml"),
                &FieldSummary { t_target, max_error: f.max_error, nodes: f.error.len() },
            )?;
        }
    }
    Ok(r)
}
