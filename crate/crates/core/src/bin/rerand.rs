//! Command-line front end: design, diagnose, analyze and simulate
//! rerandomized experiments. See `rerand <command> --help`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rerand::cli::{
    cmd_analyze, cmd_design, cmd_diagnose, cmd_simulate, AnalyzeCmd, DesignCmd, DiagnoseCmd,
    OutcomeModel, SimulateCmd, ThresholdArg,
};
use rerand::design::DesignSpec;
use rerand::inference::HcMode;

#[derive(Parser)]
#[command(
    name = "rerand",
    version,
    about = "Design and analysis of rerandomized experiments under the Mahalanobis balance criterion"
)]
struct Cli {
    /// Worker threads (0 = all cores). Results are identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ThresholdOpts {
    /// Approximate acceptance probability; the threshold becomes the p-th
    /// chi-square quantile. Mutually exclusive with --a.
    #[arg(long, conflicts_with = "a")]
    p: Option<f64>,
    /// Direct Mahalanobis threshold.
    #[arg(long)]
    a: Option<f64>,
}

impl ThresholdOpts {
    fn arg(&self) -> ThresholdArg {
        ThresholdArg {
            p: self.p,
            a: self.a,
        }
    }
}

fn parse_trim(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected lo,hi".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Command {
    /// Draw a balance-accepted assignment; writes <output>.csv and .json.
    Design {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated covariate column names.
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        /// Treated-group size.
        #[arg(long)]
        n1: usize,
        #[command(flatten)]
        threshold: ThresholdOpts,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DesignSpec::DEFAULT_MAX_DRAWS)]
        max_draws: u64,
        /// Winsorize covariates at these quantiles, e.g. 0.025,0.975.
        #[arg(long, value_parser = parse_trim)]
        trim: Option<(f64, f64)>,
    },
    /// Pre-experiment diagnostics; writes <output>.json.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        /// Potential-outcome columns (both or neither).
        #[arg(long)]
        y1: Option<String>,
        #[arg(long)]
        y0: Option<String>,
        #[arg(long)]
        n1: usize,
        /// Intended acceptance probability of the design.
        #[arg(long, default_value_t = 0.001)]
        p: f64,
        /// Monte Carlo draws behind worst-case bias/RMSE (0 = skip).
        #[arg(long, default_value_t = 0)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_trim)]
        trim: Option<(f64, f64)>,
    },
    /// Confidence intervals from observed outcomes; writes <output>.json.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        /// Observed-outcome column.
        #[arg(long)]
        y: String,
        /// Assignment column of 0/1.
        #[arg(long)]
        z: String,
        /// Covariate count of the original design (default: all columns).
        #[arg(long)]
        k: Option<u32>,
        #[command(flatten)]
        threshold: ThresholdOpts,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Residual rescaling: 0..3.
        #[arg(long, default_value_t = 0)]
        hc: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2_000_000)]
        mc_samples: usize,
    },
    /// Design sweep over covariate counts; writes <output>.csv and .json.
    Simulate {
        /// Population CSV; omitted = built-in 974-unit surrogate.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        #[arg(long, default_value_t = rerand::synthetic::SURROGATE_N1)]
        n1: usize,
        /// Covariate counts to sweep, e.g. 0,5,9.
        #[arg(long, value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 0.001)]
        p: f64,
        #[arg(long, value_parser = parse_trim)]
        trim: Option<(f64, f64)>,
        /// Outcome model for replications: linear|mirror|adversarial.
        #[arg(long)]
        outcome: Option<String>,
        /// Replications per design (0 = analytic columns only).
        #[arg(long, default_value_t = 0)]
        reps: usize,
        /// Draws behind the worst-case bias/RMSE columns (0 = skip).
        #[arg(long, default_value_t = 10_000)]
        design_draws: usize,
        #[arg(long, default_value_t = 400_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// True effect under the linear outcome model.
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long)]
        seed: u64,
    },
}

fn run(cli: Cli) -> rerand::Result<()> {
    let _ = rerand::par::configure_threads(cli.threads);
    match cli.command {
        Command::Design {
            input,
            output,
            covariates,
            n1,
            threshold,
            seed,
            max_draws,
            trim,
        } => {
            let cmd = DesignCmd {
                input,
                output,
                covariates,
                n1,
                threshold: threshold.arg(),
                seed,
                max_draws,
                trim,
            };
            let (_, sidecar) = cmd_design(&cmd)?;
            eprintln!(
                "accepted after {} draws, M = {:.6}",
                sidecar.draws_used, sidecar.m_value
            );
            Ok(())
        }
        Command::Diagnose {
            input,
            output,
            covariates,
            y1,
            y0,
            n1,
            p,
            reps,
            seed,
            trim,
        } => {
            let cmd = DiagnoseCmd {
                input,
                output,
                covariates,
                y1,
                y0,
                n1,
                p,
                design_draws: reps,
                seed,
                trim,
            };
            let report = cmd_diagnose(&cmd)?;
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            eprintln!(
                "gamma = {} (floor {:.4}), delta bound = {}, sum H^1.5 = {:.4} (floor {:.4}), max H = {:.4}",
                opt(report.gamma_n),
                report.gamma_lower_bound,
                opt(report.delta_bound),
                report.leverage.sum_h32,
                report.leverage.min_sum_h32,
                report.leverage.max_h,
            );
            Ok(())
        }
        Command::Analyze {
            input,
            output,
            covariates,
            y,
            z,
            k,
            threshold,
            alpha,
            hc,
            seed,
            mc_samples,
        } => {
            let cmd = AnalyzeCmd {
                input,
                output,
                covariates,
                y,
                z,
                k,
                threshold: threshold.arg(),
                alpha,
                hc: HcMode::from_index(hc)?,
                seed,
                mc_samples,
            };
            let out = cmd_analyze(&cmd)?;
            eprintln!(
                "tau = {:.6}, constrained CI [{:.6}, {:.6}]",
                out.constrained.tau_hat, out.constrained.ci[0], out.constrained.ci[1]
            );
            Ok(())
        }
        Command::Simulate {
            input,
            output,
            covariates,
            n1,
            k_list,
            p,
            trim,
            outcome,
            reps,
            design_draws,
            mc_samples,
            alpha,
            tau,
            seed,
        } => {
            let cmd = SimulateCmd {
                input,
                output,
                covariates,
                n1,
                k_list,
                p,
                trim,
                outcome: outcome.as_deref().map(OutcomeModel::parse).transpose()?,
                replications: reps,
                design_draws,
                mc_samples,
                alpha,
                tau,
                seed,
            };
            let rows = cmd_simulate(&cmd)?;
            print!("{}", rerand::cli::render_sim_table(&rows));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
