use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mbsindy::ensemble::InclusionDenominator;
use mbsindy::geometry::VelocityMethod;
use mbsindy::io;
use mbsindy::library::Problem;
use mbsindy::pipeline::{self, DiscoverOptions, Replay};
use mbsindy::report::sig3;
use mbsindy::sim::{Case, SimParams};
use mbsindy::Error;

#[derive(Parser)]
#[command(name = "mbsindy", version, about = "Equation discovery for moving-boundary reaction-diffusion data")]
struct Cli {
    /// Worker threads for the ensemble and the simulator (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory under which outputs go when `--out` is not given.
    #[arg(long, global = true, env = "MBSINDY_OUT", default_value = ".")]
    out_root: PathBuf,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth dataset with the built-in solver.
    Simulate(SimulateArgs),
    /// Add Gaussian noise, relative to the field's standard deviation, to a dataset.
    Corrupt(CorruptArgs),
    /// Ensemble sparse regression on a dataset.
    Discover(DiscoverArgs),
    /// Re-run the solver with a discovered model.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Planar,
    Star,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Stefan,
    Fisher,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    case: CaseArg,
    /// Parameter file (TOML) replacing the case defaults; flags still override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid spacing in both directions.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Noise standard deviation as a fraction of std(u).
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Comma-separated sparsity penalties scored by AIC.
    #[arg(long, value_delimiter = ',')]
    select_lambda1: Option<Vec<f64>>,
    #[arg(long)]
    n_boot: Option<usize>,
    /// Features dropped from each library subset.
    #[arg(long)]
    leave_out: Option<usize>,
    /// Inclusion probability needed to keep a feature.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative noise added to each replicate's target.
    #[arg(long)]
    perturb_noise: Option<f64>,
    #[arg(long, value_enum)]
    denominator: Option<DenominatorArg>,
    #[arg(long)]
    no_debias: bool,
    /// PDDO horizon over grid spacing.
    #[arg(long)]
    horizon_factor: Option<f64>,
    #[arg(long, value_enum)]
    velocity: Option<VelocityArg>,
    #[arg(long)]
    margin_factor: Option<f64>,
    #[arg(long)]
    time_stride: Option<usize>,
    #[arg(long)]
    space_stride: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenominatorArg {
    Presence,
    Total,
}

#[derive(Clone, Copy, ValueEnum)]
enum VelocityArg {
    Projected,
    Nearest,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `report.toml` written by `discover`.
    #[arg(long)]
    report: PathBuf,
    /// Replay end time.
    #[arg(long)]
    t: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn stem(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Cfl { .. } => 2,
        Error::NoModel(_) => 3,
        e if e.is_numerical() => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> mbsindy::Result<()> {
    let root = cli.out_root;
    match cli.command {
        Command::Simulate(a) => {
            let case = match a.case {
                CaseArg::Planar => Case::Planar,
                CaseArg::Star => Case::Star,
            };
            let mut p = match &a.params {
                Some(path) => io::read_toml::<SimParams>(path)?,
                None => SimParams::for_case(case),
            };
            p.case = case;
            if let Some(v) = a.kappa {
                p.kappa = v;
            }
            if let Some(v) = a.t_end {
                p.t_end = v;
            }
            if let Some(v) = a.dt {
                p.dt = v;
            }
            if let Some(v) = a.h {
                p.dx = v;
                p.dy = v;
            }
            if let Some(v) = a.snapshot_stride {
                p.snapshot_stride = v;
            }
            let out = a.out.unwrap_or_else(|| root.join(case.to_string()));
            let d = pipeline::cmd_simulate(&p, a.seed, &out)?;
            println!("{}: {} snapshots to t = {}", out.display(), d.snapshots.len(), p.t_end);
        }
        Command::Corrupt(a) => {
            let out = a.out.unwrap_or_else(|| root.join(format!("{}_eta{}", stem(&a.dataset), a.eta)));
            let d = pipeline::cmd_corrupt(&a.dataset, a.eta, a.seed, &out)?;
            let sigma = d.manifest.noise.as_ref().map_or(0.0, |n| n.sigma_u);
            println!("{}: eta = {}, noise std = {}", out.display(), a.eta, sig3(a.eta * sigma));
        }
        Command::Discover(a) => {
            let problem = match a.problem {
                ProblemArg::Stefan => Problem::Stefan,
                ProblemArg::Fisher => Problem::Fisher,
            };
            let mut o = DiscoverOptions::for_problem(problem);
            if let Some(v) = a.lambda1 {
                o.lambda1 = v;
            }
            if let Some(v) = a.lambda2 {
                o.lambda2 = v;
            }
            o.select_lambda1 = a.select_lambda1;
            if let Some(v) = a.n_boot {
                o.n_boot = v;
            }
            if let Some(v) = a.leave_out {
                o.leave_out = v;
            }
            if let Some(v) = a.threshold {
                o.p_inc_threshold = v;
            }
            if let Some(v) = a.seed {
                o.seed = v;
            }
            if let Some(v) = a.perturb_noise {
                o.perturb_noise = v;
            }
            if let Some(v) = a.denominator {
                o.denominator = match v {
                    DenominatorArg::Presence => InclusionDenominator::Presence,
                    DenominatorArg::Total => InclusionDenominator::Total,
                };
            }
            o.debias = !a.no_debias;
            if let Some(v) = a.horizon_factor {
                o.horizon_factor = v;
            }
            if let Some(v) = a.velocity {
                o.velocity = match v {
                    VelocityArg::Projected => VelocityMethod::Projected,
                    VelocityArg::Nearest => VelocityMethod::NearestNorm,
                };
            }
            if let Some(v) = a.margin_factor {
                o.margin_factor = v;
            }
            if let Some(v) = a.time_stride {
                o.time_stride = v;
            }
            if let Some(v) = a.space_stride {
                o.space_stride = v;
            }
            let out = a.out.unwrap_or_else(|| root.join(format!("{}_{problem}", stem(&a.dataset))));
            let report = pipeline::cmd_discover(&a.dataset, &o, &out)?;
            print!("{}", report.summary());
            println!("written to {}", out.display());
            if report.is_empty_model() {
                eprintln!("warning: every feature fell below the inclusion threshold");
            }
        }
        Command::Replay(a) => {
            let out = a.out.unwrap_or_else(|| {
                let from = a.report.parent().map_or_else(|| stem(&a.dataset), stem);
                root.join(format!("{from}_replay_t{}", a.t))
            });
            match pipeline::cmd_replay(&a.dataset, &a.report, a.t, &out)? {
                Replay::Boundary(b) => println!(
                    "front coefficients [{}, {}, {}], band area {}",
                    sig3(b.kappas[0]),
                    sig3(b.kappas[1]),
                    sig3(b.kappas[2]),
                    sig3(b.area)
                ),
                Replay::Field(f) => println!("max |u_recovered - u_reference| = {}", sig3(f.max_error)),
            }
            println!("written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
