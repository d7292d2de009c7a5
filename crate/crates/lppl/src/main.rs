//! Command-line front end: simulate | fit | scan | forecast | benchmark,
//! plus rerun for reproducing a previous run from its manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lppl::artifacts::Manifest;
use lppl::calibrate::{FitConfig, ObjectiveKind, SlavingMode};
use lppl::error::Error;
use lppl::forecast::{BandwidthMode, DensityConfig, ReplicaMethod, ReplicaSpec, ScanPlan};
use lppl::ingest::{ingest, IngestConfig};
use lppl::model::{FitBounds, LpplParams};
use lppl::run::{
    execute, BenchmarkCommand, Command, Execution, FitCommand, ForecastCommand, InputSpec,
    OutputFormat, ScanCommand, SimKind, SimulateCommand,
};
use lppl::simulate::{NoiseKind, NoiseSpec, SdeParams};

#[derive(Parser)]
#[command(
    name = "lppl",
    version,
    about = "Log-periodic power law bubble diagnostics: simulation, calibration and critical-time forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (defaults to $LPPL_OUTPUT_DIR).
    #[arg(long, env = "LPPL_OUTPUT_DIR")]
    out: PathBuf,
    /// Artifact families to write.
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Args)]
struct CurveArgs {
    /// Critical time (days).
    #[arg(long, default_value_t = 300.0, allow_hyphen_values = true)]
    tc: f64,
    /// Power-law exponent.
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    m: f64,
    /// Angular log-frequency.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    omega: f64,
    /// Phase (radians).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    phi: f64,
    /// Asymptotic log-price level.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    a: f64,
    /// Power-law amplitude.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    b: f64,
    /// Oscillation amplitude.
    #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
    c: f64,
}

impl CurveArgs {
    fn params(&self) -> LpplParams {
        LpplParams {
            tc: self.tc,
            m: self.m,
            omega: self.omega,
            phi: self.phi,
            a: self.a,
            b: self.b,
            c: self.c,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "date")]
    date_column: String,
    #[arg(long, default_value = "close")]
    price_column: String,
    /// Take the natural log of the price column.
    #[arg(long)]
    log: bool,
    /// The price column already holds log-prices.
    #[arg(long)]
    log_input: bool,
}

impl InputArgs {
    fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            date_column: self.date_column.clone(),
            price_column: self.price_column.clone(),
            apply_log: self.log,
            values_are_log: self.log_input,
        }
    }

    fn resolve(&self) -> Result<InputSpec, Error> {
        InputSpec::resolve(&self.input, self.ingest_config())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SlavingArg {
    FourLinear,
    ThreeLinear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    LogRmse,
    NormalizedPriceRmse,
}

#[derive(Args)]
struct FitArgs {
    /// Base seed for the stochastic search.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of retained fits per window.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Independent taboo restarts pooled before refinement.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, value_enum, default_value_t = SlavingArg::FourLinear)]
    slaving: SlavingArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::LogRmse)]
    objective: ObjectiveArg,
    /// Search the exponent in [-5, 5] instead of [0.01, 0.99].
    #[arg(long)]
    diagnostic_m: bool,
    #[arg(long)]
    tc_min: Option<f64>,
    #[arg(long)]
    tc_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m_max: Option<f64>,
    #[arg(long)]
    omega_min: Option<f64>,
    #[arg(long)]
    omega_max: Option<f64>,
    #[arg(long, default_value_t = 500)]
    taboo_iterations: usize,
    #[arg(long, default_value_t = 20)]
    taboo_neighborhood: usize,
    #[arg(long, default_value_t = 50)]
    taboo_tabu_len: usize,
    #[arg(long, default_value_t = 30)]
    taboo_pool: usize,
    /// Relative objective-improvement tolerance of the refinement stage.
    #[arg(long)]
    tol_objective: Option<f64>,
}

impl FitArgs {
    fn resolve(&self, t1: f64, t2: f64) -> FitConfig {
        let mut config = FitConfig::for_window(t1, t2);
        if self.diagnostic_m {
            config.bounds = FitBounds::diagnostic_for_window(t1, t2);
        }
        if let Some(v) = self.tc_min {
            config.bounds.tc.lo = v;
        }
        if let Some(v) = self.tc_max {
            config.bounds.tc.hi = v;
        }
        if let Some(v) = self.m_min {
            config.bounds.m.lo = v;
        }
        if let Some(v) = self.m_max {
            config.bounds.m.hi = v;
        }
        if let Some(v) = self.omega_min {
            config.bounds.omega.lo = v;
        }
        if let Some(v) = self.omega_max {
            config.bounds.omega.hi = v;
        }
        config.slaving = match self.slaving {
            SlavingArg::FourLinear => SlavingMode::FourLinear,
            SlavingArg::ThreeLinear => SlavingMode::ThreeLinear,
        };
        config.objective = match self.objective {
            ObjectiveArg::LogRmse => ObjectiveKind::LogRmse,
            ObjectiveArg::NormalizedPriceRmse => ObjectiveKind::NormalizedPriceRmse,
        };
        config.top_k = self.top_k;
        config.restarts = self.restarts;
        config.taboo.seed = self.seed;
        config.taboo.iterations = self.taboo_iterations;
        config.taboo.neighborhood = self.taboo_neighborhood;
        config.taboo.tabu_len = self.taboo_tabu_len;
        config.taboo.pool = self.taboo_pool;
        if let Some(v) = self.tol_objective {
            config.refine.objective = v;
        }
        config
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Gaussian,
    StudentT4,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchNoiseArg {
    Both,
    Gaussian,
    StudentT4,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplicaMethodArg {
    BlockBootstrap,
    Ar1,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandwidthArg {
    Adaptive,
    FixedSilverman,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a synthetic series: the reference curve, a noisy decoration
    /// of it, or a jump-diffusion Monte-Carlo path.
    Simulate {
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        curve: CurveArgs,
        /// Observations (reference/noisy) or steps (sde).
        #[arg(long, default_value_t = 240)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        #[arg(long, value_enum, default_value_t = NoiseArg::None)]
        noise: NoiseArg,
        /// Noise standard deviation as a fraction of the window's largest
        /// log-price.
        #[arg(long, default_value_t = 0.05)]
        noise_std: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Simulate the jump-diffusion path instead of the pure curve.
        #[arg(long)]
        sde: bool,
        /// Diffusion volatility per sqrt-day (sde).
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Crash loss fraction (sde).
        #[arg(long, default_value_t = 0.2)]
        kappa: f64,
        /// Integration step in days (sde).
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Initial price (sde); defaults to the curve value at t = 0.
        #[arg(long)]
        p0: Option<f64>,
    },
    /// Calibrate the full series and write the retained fits.
    Fit {
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Calibrate several windows sharing a common end.
    Scan {
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Comma-separated window start times.
        #[arg(long, value_delimiter = ',')]
        t1_list: Vec<f64>,
        /// Common window end time.
        #[arg(long)]
        t2: f64,
    },
    /// Scan windows, refit residual replicas, and estimate the density of
    /// the critical time.
    Forecast {
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_delimiter = ',')]
        t1_list: Vec<f64>,
        #[arg(long)]
        t2: f64,
        /// Replica series per window (0 disables replicas).
        #[arg(long, default_value_t = 50)]
        replicas: usize,
        #[arg(long, value_enum, default_value_t = ReplicaMethodArg::BlockBootstrap)]
        replica_method: ReplicaMethodArg,
        /// Residual block length in days (block bootstrap).
        #[arg(long, default_value_t = 25)]
        block_len: usize,
        #[arg(long, default_value_t = 512)]
        grid_points: usize,
        #[arg(long)]
        grid_min: Option<f64>,
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long, value_enum, default_value_t = BandwidthArg::Adaptive)]
        bandwidth: BandwidthArg,
    },
    /// Reproduce the synthetic benchmark: noisy realizations of the
    /// reference curve, ten best fits each, pooled sampling statistics.
    Benchmark {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 200)]
        realizations: usize,
        #[arg(long, value_enum, default_value_t = BenchNoiseArg::Both)]
        noise: BenchNoiseArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Disable the per-realization checkpoint file.
        #[arg(long)]
        no_checkpoint: bool,
    },
    /// Re-execute a previous run from its manifest, reproducing the
    /// artifacts byte for byte.
    Rerun {
        /// Path to a manifest.json written by a previous run.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn build_command(cli: Commands) -> Result<(Command, PathBuf), Error> {
    match cli {
        Commands::Simulate {
            out,
            curve,
            points,
            t0,
            noise,
            noise_std,
            seed,
            sde,
            sigma,
            kappa,
            dt,
            p0,
        } => {
            let generator = curve.params();
            let sim = if sde {
                let p0 = match p0 {
                    Some(v) => v,
                    None => generator.log_price(0.0)?.exp(),
                };
                SimKind::Sde {
                    sde: SdeParams {
                        hazard: generator.to_hazard(kappa)?,
                        sigma,
                        kappa,
                        dt,
                        p0,
                    },
                    seed,
                }
            } else {
                match noise {
                    NoiseArg::None => SimKind::Reference,
                    NoiseArg::Gaussian => SimKind::Noisy {
                        noise: NoiseSpec {
                            kind: NoiseKind::Gaussian,
                            relative_std: noise_std,
                            seed,
                        },
                    },
                    NoiseArg::StudentT4 => SimKind::Noisy {
                        noise: NoiseSpec {
                            kind: NoiseKind::StudentT4,
                            relative_std: noise_std,
                            seed,
                        },
                    },
                }
            };
            Ok((
                Command::Simulate(SimulateCommand {
                    generator,
                    points,
                    t0,
                    sim,
                    format: out.format.into(),
                }),
                out.out,
            ))
        }

        Commands::Fit { out, input, fit } => {
            let spec = input.resolve()?;
            let series = ingest(&input.input, &input.ingest_config())?;
            let config = fit.resolve(series.t0, series.t_end());
            Ok((
                Command::Fit(FitCommand {
                    input: spec,
                    config,
                    format: out.format.into(),
                }),
                out.out,
            ))
        }

        Commands::Scan {
            out,
            input,
            fit,
            t1_list,
            t2,
        } => {
            let spec = input.resolve()?;
            let t1_min = t1_list.iter().cloned().fold(f64::MAX, f64::min);
            let config = fit.resolve(t1_min, t2);
            Ok((
                Command::Scan(ScanCommand {
                    input: spec,
                    plan: ScanPlan {
                        t1_list,
                        t2,
                        config,
                    },
                    format: out.format.into(),
                }),
                out.out,
            ))
        }

        Commands::Forecast {
            out,
            input,
            fit,
            t1_list,
            t2,
            replicas,
            replica_method,
            block_len,
            grid_points,
            grid_min,
            grid_max,
            bandwidth,
        } => {
            let spec = input.resolve()?;
            let t1_min = t1_list.iter().cloned().fold(f64::MAX, f64::min);
            let seed = fit.seed;
            let config = fit.resolve(t1_min, t2);
            let replica_spec = (replicas > 0).then_some(ReplicaSpec {
                method: match replica_method {
                    ReplicaMethodArg::BlockBootstrap => ReplicaMethod::BlockBootstrap,
                    ReplicaMethodArg::Ar1 => ReplicaMethod::Ar1,
                },
                count: replicas,
                block_len,
                seed: lppl::seeds::derive_seed(seed, 0x5eed),
            });
            Ok((
                Command::Forecast(ForecastCommand {
                    input: spec,
                    plan: ScanPlan {
                        t1_list,
                        t2,
                        config,
                    },
                    replicas: replica_spec,
                    density: DensityConfig {
                        lo: grid_min,
                        hi: grid_max,
                        points: grid_points,
                        mode: match bandwidth {
                            BandwidthArg::Adaptive => BandwidthMode::Adaptive,
                            BandwidthArg::FixedSilverman => BandwidthMode::FixedSilverman,
                        },
                    },
                    format: out.format.into(),
                }),
                out.out,
            ))
        }

        Commands::Benchmark {
            out,
            realizations,
            noise,
            seed,
            top_k,
            no_checkpoint,
        } => {
            let mut spec = lppl::benchmark::BenchmarkSpec::standard(seed);
            spec.realizations = realizations;
            spec.fit.top_k = top_k;
            let kinds = match noise {
                BenchNoiseArg::Both => vec![NoiseKind::Gaussian, NoiseKind::StudentT4],
                BenchNoiseArg::Gaussian => vec![NoiseKind::Gaussian],
                BenchNoiseArg::StudentT4 => vec![NoiseKind::StudentT4],
            };
            Ok((
                Command::Benchmark(BenchmarkCommand {
                    spec,
                    kinds,
                    format: out.format.into(),
                    checkpoint: !no_checkpoint,
                }),
                out.out,
            ))
        }

        Commands::Rerun { manifest, out } => {
            let manifest: Manifest<Command> = Manifest::read(&manifest)?;
            Ok((manifest.command, out.out))
        }
    }
}

fn report(execution: &Execution) {
    println!("manifest hash: {}", execution.manifest_hash);
    for path in &execution.written {
        println!("wrote {}", path.display());
    }
    if let Some(best) = &execution.best_fit {
        println!(
            "best fit: tc {:.3} m {:.4} omega {:.4} phi {:.4} A {:.4} B {:.5} C {:.5}",
            best.tc, best.m, best.omega, best.phi, best.a, best.b, best.c
        );
    }
    if let Some(report) = &execution.benchmark {
        if report.reduced_run {
            println!("benchmark: reduced run (fewer than 200 realizations)");
        }
        for branch in &report.branches {
            println!(
                "benchmark {:?}: {} realizations, {} pooled fits | tc {:.2} ({:.2}) | m {:.3} ({:.3}) | omega {:.2} ({:.2})",
                branch.kind,
                branch.realizations,
                branch.samples,
                branch.tc.mean,
                branch.tc.std,
                branch.m.mean,
                branch.m.std,
                branch.omega.mean,
                branch.omega.std
            );
            for check in &branch.checks {
                println!(
                    "  [{}] {}: observed {:.4}, requirement {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.observed,
                    check.requirement
                );
            }
        }
        println!(
            "benchmark overall: {}",
            if report.passed { "PASS" } else { "FAIL" }
        );
    }
}

fn exit_class(err: &Error) -> u8 {
    match err {
        Error::AllWindowsFailed(_)
        | Error::DegenerateSystem
        | Error::NonStationaryResiduals { .. } => 3,
        e if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, out) = match build_command(cli.command) {
        Ok(v) => v,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_class(&err));
        }
    };
    match execute(&command, &out) {
        Ok(execution) => {
            report(&execution);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_class(&err))
        }
    }
}
