//! Config-driven commands behind the `rerand` binary: `design`, `diagnose`,
//! `analyze` and `simulate`.
//!
//! Every command is a plain function over a config struct so tests can call
//! it in-process and compare against direct library invocations byte for
//! byte. Machine output is JSON (and CSV for tabular results); an `--output`
//! value is a path stem that grows `.csv`/`.json` extensions. Stochastic
//! commands require an explicit seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::constrained::{v_ka, McConfig, NuSampler};
use crate::design::{
    sample_rem, threshold, Assignment, DesignSpec, MahalanobisCache, RemResult, ThresholdMode,
};
use crate::diagnostics::{diagnose, max_bias_rmse, mc_design_moments, DesignMomentMode,
    DiagnosticsReport,
};
use crate::inference::{
    confidence_interval_with_sampler, observe, CiMethod, HcMode, InferenceResult, ObservedData,
};
use crate::population::{
    leverage_scores, load_population, read_table, trim_covariates, FinitePopulation, TableSchema,
};
use crate::rng::{stream_rng, DOMAIN_REPLICATION};
use crate::specialfn::chi2_quantile;
use crate::synthetic;
use crate::{par, Error, Result};

/// Threshold selection shared by the commands: exactly one of `p`/`a`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdArg {
    pub p: Option<f64>,
    pub a: Option<f64>,
}

impl ThresholdArg {
    pub fn mode(&self) -> Result<ThresholdMode> {
        match (self.p, self.a) {
            (Some(p), None) => Ok(ThresholdMode::FromAcceptance(p)),
            (None, Some(a)) => Ok(ThresholdMode::Direct(a)),
            _ => Err(Error::validation(
                "exactly one of --p and --a must be given",
            )),
        }
    }
}

fn open_input(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::validation(format!("cannot open input {}: {e}", path.display()))
    })
}

fn create_output(stem: &Path, ext: &str) -> Result<BufWriter<File>> {
    let path = stem.with_extension(ext);
    Ok(BufWriter::new(File::create(&path).map_err(|e| {
        Error::validation(format!("cannot create {}: {e}", path.display()))
    })?))
}

fn write_json<T: Serialize>(stem: &Path, value: &T) -> Result<()> {
    let mut out = create_output(stem, "json")?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// On a singular covariate covariance, names exactly duplicated columns so
/// the operator knows what to drop.
fn name_duplicate_columns(pop: &FinitePopulation, names: &[String], err: Error) -> Error {
    if let Error::SingularCovariance(msg) = &err {
        let k = pop.k();
        let mut pairs = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                let same = (0..pop.n()).all(|i| pop.row(i)[a] == pop.row(i)[b]);
                if same {
                    pairs.push(format!("'{}' == '{}'", names[a], names[b]));
                }
            }
        }
        if !pairs.is_empty() {
            return Error::SingularCovariance(format!(
                "{msg}; duplicated covariate columns: {}",
                pairs.join(", ")
            ));
        }
    }
    err
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DesignCmd {
    pub input: PathBuf,
    pub output: PathBuf,
    pub covariates: Vec<String>,
    pub n1: usize,
    pub threshold: ThresholdArg,
    pub seed: u64,
    pub max_draws: u64,
    pub trim: Option<(f64, f64)>,
}

/// Sidecar metadata written next to the assignment CSV.
#[derive(Debug, Clone, Serialize)]
pub struct DesignSidecar {
    pub threshold: f64,
    pub p: Option<f64>,
    pub m_value: f64,
    pub draws_used: u64,
    pub seed: u64,
    pub leverage: LeverageSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeverageSummary {
    pub sum_h32: f64,
    pub max_h: f64,
    pub min_sum_h32: f64,
    pub min_max_h: f64,
}

/// Draws an acceptable assignment and writes `<output>.csv` (a single `z`
/// column) plus `<output>.json`.
pub fn cmd_design(cmd: &DesignCmd) -> Result<(Assignment, DesignSidecar)> {
    let schema = TableSchema {
        covariates: cmd.covariates.clone(),
        ..Default::default()
    };
    let mut pop = load_population(open_input(&cmd.input)?, &schema, cmd.n1)?;
    if let Some((lo, hi)) = cmd.trim {
        pop = trim_covariates(&pop, lo, hi)?;
    }
    let spec = DesignSpec {
        mode: cmd.threshold.mode()?,
        max_draws: cmd.max_draws,
        seed: cmd.seed,
    };
    let result: RemResult =
        sample_rem(&pop, &spec).map_err(|e| name_duplicate_columns(&pop, &cmd.covariates, e))?;
    let lev = leverage_scores(&pop)
        .map_err(|e| name_duplicate_columns(&pop, &cmd.covariates, e))?;
    let sidecar = DesignSidecar {
        threshold: result.threshold,
        p: cmd.threshold.p,
        m_value: result.m_value,
        draws_used: result.draws_used,
        seed: cmd.seed,
        leverage: LeverageSummary {
            sum_h32: lev.sum_h32,
            max_h: lev.max_h,
            min_sum_h32: lev.min_sum_h32,
            min_max_h: lev.min_max_h,
        },
    };
    let mut csv_out = create_output(&cmd.output, "csv")?;
    writeln!(csv_out, "z")?;
    for &z in result.assignment.z() {
        writeln!(csv_out, "{z}")?;
    }
    write_json(&cmd.output, &sidecar)?;
    Ok((result.assignment, sidecar))
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DiagnoseCmd {
    pub input: PathBuf,
    pub output: PathBuf,
    pub covariates: Vec<String>,
    pub y1: Option<String>,
    pub y0: Option<String>,
    pub n1: usize,
    pub p: f64,
    /// Monte Carlo draws for the worst-case bias/RMSE; 0 skips them.
    pub design_draws: usize,
    pub seed: Option<u64>,
    pub trim: Option<(f64, f64)>,
}

/// Writes the diagnostics report to `<output>.json`.
pub fn cmd_diagnose(cmd: &DiagnoseCmd) -> Result<DiagnosticsReport> {
    if cmd.y1.is_some() != cmd.y0.is_some() {
        return Err(Error::validation(
            "diagnostics on outcomes need both --y1 and --y0",
        ));
    }
    let schema = TableSchema {
        covariates: cmd.covariates.clone(),
        y1: cmd.y1.clone(),
        y0: cmd.y0.clone(),
        ..Default::default()
    };
    let mut pop = load_population(open_input(&cmd.input)?, &schema, cmd.n1)?;
    if let Some((lo, hi)) = cmd.trim {
        pop = trim_covariates(&pop, lo, hi)?;
    }
    let mode = if cmd.design_draws > 0 {
        let seed = cmd.seed.ok_or_else(|| {
            Error::validation("--seed is required when estimating design moments")
        })?;
        Some(DesignMomentMode::MonteCarlo {
            draws: cmd.design_draws,
            seed,
        })
    } else {
        None
    };
    let report = diagnose(&pop, cmd.p, mode)
        .map_err(|e| name_duplicate_columns(&pop, &cmd.covariates, e))?;
    write_json(&cmd.output, &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AnalyzeCmd {
    pub input: PathBuf,
    pub output: PathBuf,
    pub covariates: Vec<String>,
    /// Observed-outcome column.
    pub y: String,
    /// Assignment column of 0/1.
    pub z: String,
    /// Covariate count of the original design; defaults to the number of
    /// covariate columns.
    pub k: Option<u32>,
    pub threshold: ThresholdArg,
    pub alpha: f64,
    pub hc: HcMode,
    pub seed: u64,
    pub mc_samples: usize,
}

/// Both interval constructions on one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub constrained: InferenceResult,
    pub wald: InferenceResult,
}

/// Writes `<output>.json` holding the constrained and Wald results.
pub fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<AnalysisOutput> {
    let schema = TableSchema {
        covariates: cmd.covariates.clone(),
        y: Some(cmd.y.clone()),
        z: Some(cmd.z.clone()),
        ..Default::default()
    };
    let table = read_table(open_input(&cmd.input)?, &schema)?;
    let z = table
        .z
        .clone()
        .ok_or_else(|| Error::validation("analyze needs the assignment column"))?;
    let y = table
        .y
        .clone()
        .ok_or_else(|| Error::validation("analyze needs the outcome column"))?;
    let assignment = Assignment::new(z)?;
    let pop = FinitePopulation::new(
        table.covariates,
        table.n,
        table.k,
        None,
        None,
        assignment.n1(),
        None,
    )?;
    let k = cmd.k.unwrap_or(pop.k() as u32);
    let spec = DesignSpec {
        mode: cmd.threshold.mode()?,
        max_draws: 1,
        seed: cmd.seed,
    };
    let a = threshold(&spec, k)?;
    let data = ObservedData::new(pop.clone(), assignment, y)?;
    let cfg = McConfig {
        samples: cmd.mc_samples,
        seed: cmd.seed,
        antithetic: true,
    };
    let sampler = NuSampler::new(k, a, &cfg)?;
    let run = |method| {
        confidence_interval_with_sampler(&data, &sampler, cmd.alpha, method, cmd.hc, cmd.seed)
            .map_err(|e| name_duplicate_columns(&pop, &cmd.covariates, e))
    };
    let output = AnalysisOutput {
        constrained: run(CiMethod::Constrained)?,
        wald: run(CiMethod::Wald)?,
    };
    write_json(&cmd.output, &output)?;
    Ok(output)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Outcome model driving the replication half of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeModel {
    /// Constant effect, linear outcome-covariate association.
    Linear,
    /// Both potential outcomes equal a noisy baseline (zero effect).
    Mirror,
    /// Propensity-averaged, heavy-tail transformed outcomes (zero effect).
    Adversarial,
}

impl OutcomeModel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(OutcomeModel::Linear),
            "mirror" => Ok(OutcomeModel::Mirror),
            "adversarial" => Ok(OutcomeModel::Adversarial),
            other => Err(Error::validation(format!(
                "unknown outcome model '{other}' (expected linear|mirror|adversarial)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateCmd {
    /// Population CSV; when absent, the built-in 974-unit surrogate with
    /// max(k_list) covariate columns is generated from the seed.
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub covariates: Vec<String>,
    pub n1: usize,
    pub k_list: Vec<usize>,
    pub p: f64,
    pub trim: Option<(f64, f64)>,
    pub outcome: Option<OutcomeModel>,
    pub replications: usize,
    /// Draws behind the worst-case bias/RMSE estimates (0 skips them).
    pub design_draws: usize,
    pub mc_samples: usize,
    pub alpha: f64,
    pub tau: f64,
    pub seed: u64,
}

impl SimulateCmd {
    pub fn surrogate_default(output: PathBuf, k_list: Vec<usize>, p: f64, seed: u64) -> Self {
        SimulateCmd {
            input: None,
            output,
            covariates: Vec::new(),
            n1: synthetic::SURROGATE_N1,
            k_list,
            p,
            trim: None,
            outcome: None,
            replications: 0,
            design_draws: 10_000,
            mc_samples: 400_000,
            alpha: 0.05,
            tau: 0.0,
            seed,
        }
    }
}

/// One row of the results table: analytic design quantities, optionally the
/// worst-case estimates, optionally replication-based accuracy/coverage.
#[derive(Debug, Clone, Serialize)]
pub struct SimRow {
    pub k: usize,
    pub trimmed: bool,
    pub one_minus_v: f64,
    pub max_bias: Option<f64>,
    pub max_rmse: Option<f64>,
    pub sum_h32: Option<f64>,
    pub max_h: Option<f64>,
    pub min_sum_h32: Option<f64>,
    pub min_max_h: Option<f64>,
    /// |mean(tau_hat) - tau| / sqrt(V_tau_tau) over the replications.
    pub bias_std: Option<f64>,
    /// mean squared error over the asymptotic variance of the design.
    pub mse_ratio: Option<f64>,
    /// Constrained-interval coverage for HC0..HC3.
    pub coverage: Option<[f64; 4]>,
}

fn load_or_generate(cmd: &SimulateCmd) -> Result<FinitePopulation> {
    let k_max = *cmd.k_list.iter().max().unwrap_or(&0);
    match &cmd.input {
        Some(path) => {
            let schema = TableSchema {
                covariates: cmd.covariates.clone(),
                ..Default::default()
            };
            let pop = load_population(open_input(path)?, &schema, cmd.n1)?;
            if pop.k() < k_max {
                return Err(Error::validation(format!(
                    "population has {} covariates, k-list needs {}",
                    pop.k(),
                    k_max
                )));
            }
            Ok(pop)
        }
        None => Ok(synthetic::star_surrogate(k_max.max(1), cmd.seed)),
    }
}

/// Runs the design sweep and writes `<output>.csv` and `<output>.json`.
pub fn cmd_simulate(cmd: &SimulateCmd) -> Result<Vec<SimRow>> {
    if cmd.k_list.is_empty() {
        return Err(Error::validation("k-list must not be empty"));
    }
    if !(cmd.p > 0.0 && cmd.p <= 1.0) {
        return Err(Error::validation(format!(
            "acceptance probability must lie in (0,1], got {}",
            cmd.p
        )));
    }
    let base = load_or_generate(cmd)?;
    let designs: Result<Vec<(usize, FinitePopulation, f64)>> = cmd
        .k_list
        .iter()
        .map(|&k| {
            let mut pop_k = base.with_first_k_covariates(k);
            if let Some((lo, hi)) = cmd.trim {
                pop_k = trim_covariates(&pop_k, lo, hi)?;
            }
            let a = if k == 0 {
                f64::INFINITY
            } else {
                chi2_quantile(cmd.p, k as u32)?
            };
            Ok((k, pop_k, a))
        })
        .collect();
    let designs = designs?;

    // The adversarial outcome vector averages treatment propensities over
    // every swept design, then is shared by all rows.
    let adversarial_y = if cmd.outcome == Some(OutcomeModel::Adversarial) && cmd.replications > 0 {
        let draws = cmd.design_draws.max(2_000);
        let mut propensity_sets = Vec::new();
        for (idx, (k, pop_k, a)) in designs.iter().enumerate() {
            if *k == 0 {
                continue;
            }
            let moments = mc_design_moments(pop_k, *a, draws, cmd.seed ^ (0x53 + idx as u64))?;
            propensity_sets.push(moments.pi);
        }
        if propensity_sets.is_empty() {
            return Err(Error::validation(
                "adversarial outcomes need at least one design with covariates",
            ));
        }
        let probe = synthetic::with_propensity_outcomes(&designs[0].1, &propensity_sets)?;
        Some(probe.y1().expect("outcomes attached").to_vec())
    } else {
        None
    };

    let mut rows = Vec::new();
    for (row_idx, (k, pop_k, a)) in designs.iter().enumerate() {
        rows.push(simulate_row(
            cmd,
            pop_k,
            *k,
            *a,
            adversarial_y.as_deref(),
            row_idx as u64,
        )?);
    }
    write_sim_csv(&cmd.output, &rows)?;
    write_json(&cmd.output, &rows)?;
    Ok(rows)
}

fn simulate_row(
    cmd: &SimulateCmd,
    pop: &FinitePopulation,
    k: usize,
    a: f64,
    adversarial_y: Option<&[f64]>,
    row_idx: u64,
) -> Result<SimRow> {
    let one_minus_v = 1.0 - v_ka(k as u32, a)?;

    let leverage = if k > 0 {
        Some(leverage_scores(pop)?)
    } else {
        None
    };

    let worst = if cmd.design_draws > 0 {
        Some(max_bias_rmse(
            pop,
            a,
            DesignMomentMode::MonteCarlo {
                draws: cmd.design_draws,
                seed: cmd.seed ^ (row_idx << 8),
            },
        )?)
    } else {
        None
    };

    let replicated = if cmd.replications > 0 {
        let outcome = cmd.outcome.ok_or_else(|| {
            Error::validation("--reps > 0 requires an outcome model")
        })?;
        Some(replicate_design(cmd, pop, k, a, outcome, adversarial_y, row_idx)?)
    } else {
        None
    };

    Ok(SimRow {
        k,
        trimmed: cmd.trim.is_some(),
        one_minus_v,
        max_bias: worst.as_ref().map(|w| w.max_bias),
        max_rmse: worst.as_ref().map(|w| w.max_rmse),
        sum_h32: leverage.as_ref().map(|l| l.sum_h32),
        max_h: leverage.as_ref().map(|l| l.max_h),
        min_sum_h32: leverage.as_ref().map(|l| l.min_sum_h32),
        min_max_h: leverage.as_ref().map(|l| l.min_max_h),
        bias_std: replicated.map(|r| r.bias_std),
        mse_ratio: replicated.map(|r| r.mse_ratio),
        coverage: replicated.map(|r| r.coverage),
    })
}

#[derive(Clone, Copy)]
struct ReplicationSummary {
    bias_std: f64,
    mse_ratio: f64,
    coverage: [f64; 4],
}

fn attach_outcomes(
    cmd: &SimulateCmd,
    pop: &FinitePopulation,
    outcome: OutcomeModel,
    adversarial_y: Option<&[f64]>,
) -> Result<FinitePopulation> {
    match outcome {
        OutcomeModel::Linear => {
            synthetic::with_linear_outcomes(pop, cmd.tau, 2.0, cmd.seed ^ 0x51)
        }
        OutcomeModel::Mirror => synthetic::with_mirror_outcomes(pop, cmd.seed ^ 0x52),
        OutcomeModel::Adversarial => {
            let y = adversarial_y
                .ok_or_else(|| Error::validation("adversarial outcomes were not prepared"))?;
            pop.with_outcomes(y.to_vec(), y.to_vec())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn replicate_design(
    cmd: &SimulateCmd,
    pop: &FinitePopulation,
    k: usize,
    a: f64,
    outcome: OutcomeModel,
    adversarial_y: Option<&[f64]>,
    row_idx: u64,
) -> Result<ReplicationSummary> {
    let pop = attach_outcomes(cmd, pop, outcome, adversarial_y)?;
    let tau = crate::population::average_treatment_effect(&pop)?;
    let v_tt = crate::population::v_tau_tau(&pop)?;
    let r2_true = crate::population::r_squared(&pop)?;
    let one_minus_v = 1.0 - v_ka(k as u32, a)?;
    let asymptotic_var = v_tt * (1.0 - one_minus_v * r2_true);

    let mc = McConfig {
        samples: cmd.mc_samples,
        seed: cmd.seed ^ 0x54,
        antithetic: true,
    };
    let sampler = NuSampler::new(k as u32, a, &mc)?;
    let cache = MahalanobisCache::new(&pop)?;

    // One derived seed per replication keeps the chunked loop reproducible
    // for every thread count.
    let mut seed_stream = stream_rng(cmd.seed, DOMAIN_REPLICATION, row_idx);
    use rand::Rng;
    let rep_seeds: Vec<u64> = (0..cmd.replications).map(|_| seed_stream.random()).collect();

    const REP_CHUNK: usize = 16;
    let n_chunks = cmd.replications.div_ceil(REP_CHUNK);
    let partials: Vec<Result<(f64, f64, [u64; 4])>> = par::map_chunks(n_chunks, |c| {
        let start = c * REP_CHUNK;
        let end = (start + REP_CHUNK).min(cmd.replications);
        let mut sum_tau = 0.0;
        let mut sum_sq = 0.0;
        let mut covered = [0u64; 4];
        for &rep_seed in &rep_seeds[start..end] {
            let rem = crate::design::sample_rem_cached(
                &pop,
                &cache,
                a,
                rep_seed,
                DesignSpec::DEFAULT_MAX_DRAWS,
            )?;
            let data = observe(&pop, &rem.assignment)?;
            let diff = crate::inference::diff_in_means(&data)? - tau;
            sum_tau += diff;
            sum_sq += diff * diff;
            for (h, hc) in HcMode::ALL.into_iter().enumerate() {
                let ci = confidence_interval_with_sampler(
                    &data,
                    &sampler,
                    cmd.alpha,
                    CiMethod::Constrained,
                    hc,
                    rep_seed,
                )?;
                if ci.ci[0] <= tau && tau <= ci.ci[1] {
                    covered[h] += 1;
                }
            }
        }
        Ok((sum_tau, sum_sq, covered))
    });

    let mut sum_tau = 0.0;
    let mut sum_sq = 0.0;
    let mut covered = [0u64; 4];
    for partial in partials {
        let (s, q, c) = partial?;
        sum_tau += s;
        sum_sq += q;
        for (tot, add) in covered.iter_mut().zip(c) {
            *tot += add;
        }
    }
    let reps = cmd.replications as f64;
    let mut coverage = [0.0_f64; 4];
    for (c, &hits) in coverage.iter_mut().zip(&covered) {
        *c = hits as f64 / reps;
    }
    Ok(ReplicationSummary {
        bias_std: (sum_tau / reps).abs() / v_tt.sqrt(),
        mse_ratio: (sum_sq / reps) / asymptotic_var,
        coverage,
    })
}

/// Renders the rows as an aligned text table (the human-facing view of the
/// same columns the CSV carries).
pub fn render_sim_table(rows: &[SimRow]) -> String {
    let mut out = String::new();
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    out.push_str(&format!(
        "{:>4} {:>5} {:>6} {:>7} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7} {:>23}\n",
        "K", "trim", "1-v", "bias", "rmse", "sumH32", "maxH", "minH32", "minmaxH", "biasStd",
        "mseRat", "coverage HC0..HC3"
    ));
    for row in rows {
        let coverage = row
            .coverage
            .map(|c| format!("{:.3} {:.3} {:.3} {:.3}", c[0], c[1], c[2], c[3]))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:>4} {:>5} {:>6.3} {:>7} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7} {:>23}\n",
            row.k,
            if row.trimmed { "yes" } else { "no" },
            row.one_minus_v,
            fmt(row.max_bias),
            fmt(row.max_rmse),
            fmt(row.sum_h32),
            fmt(row.max_h),
            fmt(row.min_sum_h32),
            fmt(row.min_max_h),
            fmt(row.bias_std),
            fmt(row.mse_ratio),
            coverage,
        ));
    }
    out
}

fn write_sim_csv(stem: &Path, rows: &[SimRow]) -> Result<()> {
    let mut out = create_output(stem, "csv")?;
    writeln!(
        out,
        "k,trimmed,one_minus_v,max_bias,max_rmse,sum_h32,max_h,min_sum_h32,min_max_h,bias_std,mse_ratio,coverage_hc0,coverage_hc1,coverage_hc2,coverage_hc3"
    )?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for row in rows {
        let cov = |i: usize| row.coverage.map(|c| format!("{}", c[i])).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.k,
            row.trimmed,
            row.one_minus_v,
            fmt(row.max_bias),
            fmt(row.max_rmse),
            fmt(row.sum_h32),
            fmt(row.max_h),
            fmt(row.min_sum_h32),
            fmt(row.min_max_h),
            fmt(row.bias_std),
            fmt(row.mse_ratio),
            cov(0),
            cov(1),
            cov(2),
            cov(3),
        )?;
    }
    Ok(())
}
