use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ecgfuse_core::embedding::{estimate_delay_ad_with, estimate_dimension_fnn_with, AdConfig, FnnConfig};
use ecgfuse_core::fis::FisConfigFile;
use ecgfuse_core::lwlpa::{one_step_forecast, LwlpaConfig};
use ecgfuse_core::nfda::Normalization;
use ecgfuse_core::pipeline::{fuse_record, screen_constant_leads, twelve_lead_to_vcg, EstimationConfig};
use ecgfuse_core::recordio::{read_lead, read_record, read_trajectory, write_record, write_trajectory};
use ecgfuse_core::synthgen::{apply_noise, generate_noise, load_noise_record, synth_vcg, EcgModelParams, NoiseKind, NoiseSpec};
use ecgfuse_core::vcgprep::{DowerMatrix, DEFAULT_CONSTANT_EPSILON, EIGHT_LEADS};
use ecgfuse_core::{delay_embed, disorder_metric, EmbeddingParams, Error, FusionConfig};

#[derive(Parser)]
#[command(name = "ecgfuse", version, about = "Phase-space fusion of multi-lead ECG records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate (m, tau) for one lead and write its delay embedding
    Embed(EmbedArgs),
    /// One-step local linear prediction of the tail of a series
    LwlpaPredict(PredictArgs),
    /// 12-lead ECG to 3-lead VCG via the inverse Dower matrix
    Dower(DowerArgs),
    /// Synthetic 3-lead VCG
    Synth(SynthArgs),
    /// Corrupt one lead at a target SNR
    Noise(NoiseArgs),
    /// Fuse all leads of a record into one trajectory
    Fuse(FuseArgs),
    /// Disorder metric of trajectory files
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Embedding dimension (estimated when omitted)
    #[arg(long, requires = "tau")]
    m: Option<usize>,
    /// Delay in samples (estimated when omitted)
    #[arg(long, requires = "m")]
    tau: Option<usize>,
    #[arg(long, default_value_t = 50)]
    max_tau: usize,
    #[arg(long, default_value_t = 10)]
    max_m: usize,
}

impl ParamArgs {
    fn fixed(&self) -> Result<Option<EmbeddingParams>> {
        match (self.m, self.tau) {
            (Some(m), Some(tau)) => Ok(Some(EmbeddingParams::new(m, tau)?)),
            _ => Ok(None),
        }
    }

    fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            ad: AdConfig {
                max_tau: self.max_tau,
                ..AdConfig::default()
            },
            fnn: FnnConfig {
                max_m: self.max_m,
                ..FnnConfig::default()
            },
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    /// Lead to embed; required for multi-lead files
    #[arg(long)]
    lead: Option<String>,
    #[command(flatten)]
    params: ParamArgs,
    /// Trajectory CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lead: Option<String>,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    tau: usize,
    /// Neighbour count, default 2(m+1)
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Number of trailing samples to forecast
    #[arg(long)]
    horizon: usize,
    /// Prediction CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DowerArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON file with `rows` (3x8) and `lead_order`
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONSTANT_EPSILON)]
    epsilon: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Heart rate in beats per minute
    #[arg(long, default_value_t = 60.0)]
    hr: f64,
    #[arg(long, default_value_t = 500.0)]
    fs: f64,
    /// Seconds
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Respiratory baseline amplitude
    #[arg(long, default_value_t = 0.0)]
    baseline: f64,
    /// Model parameter JSON (built-in defaults when omitted); --hr and
    /// --baseline still apply
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "Vx")]
    lead: String,
    /// BW, EM or MA
    #[arg(long)]
    kind: NoiseKind,
    /// Target SNR in dB
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    /// Recorded noise; a synthetic stand-in is generated when omitted
    #[arg(long)]
    noise_file: Option<PathBuf>,
    /// Seed of the synthetic stand-in
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// First sample of the noise segment
    #[arg(long, default_value_t = 0)]
    offset: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// 3-lead (or any multi-lead) record, or a 12-lead record which is
    /// converted to VCG first
    #[arg(long)]
    input: PathBuf,
    /// FIS override file
    #[arg(long, env = "ECGFUSE_FIS_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Scale step lengths by each lead's own range instead of the global max
    #[arg(long)]
    per_lead_scale: bool,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = DEFAULT_CONSTANT_EPSILON)]
    epsilon: f64,
    /// Fused trajectory CSV
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON (stdout when omitted)
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Trajectory CSV files
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

/// Argument problems the parser cannot see.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidParameter(_)) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Embed(a) => embed(a),
        Command::LwlpaPredict(a) => predict(a),
        Command::Dower(a) => dower(a),
        Command::Synth(a) => synth(a),
        Command::Noise(a) => noise(a),
        Command::Fuse(a) => fuse(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn embed(a: EmbedArgs) -> Result<()> {
    let series = read_lead(&a.input, a.lead.as_deref())?;
    let (params, report) = match a.params.fixed()? {
        Some(p) => (p, json!({ "lead": series.label(), "m": p.m, "tau": p.tau, "estimated": false })),
        None => {
            let est = a.params.estimation();
            let tau = estimate_delay_ad_with(&series, &est.ad)?;
            let fnn = estimate_dimension_fnn_with(&series, tau, &est.fnn)?;
            if !fnn.converged {
                log::warn!("FNN fraction did not fall below threshold up to m={}", est.fnn.max_m);
            }
            (
                EmbeddingParams::new(fnn.dimension, tau)?,
                json!({
                    "lead": series.label(),
                    "m": fnn.dimension,
                    "tau": tau,
                    "estimated": true,
                    "fnn_fractions": fnn.fractions,
                    "fnn_converged": fnn.converged,
                }),
            )
        }
    };
    let traj = delay_embed(&series, params)?;
    if let Some(out) = &a.out {
        write_trajectory(&traj, out)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let series = read_lead(&a.input, a.lead.as_deref())?;
    let config = LwlpaConfig {
        neighbors: a.neighbors,
        lambda: a.lambda,
        ..LwlpaConfig::default()
    };
    let forecast = one_step_forecast(&series, EmbeddingParams::new(a.m, a.tau)?, a.horizon, &config)?;
    let mut out = String::from("index,predicted,actual,persistence\n");
    for i in 0..forecast.index.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            forecast.index[i], forecast.predicted[i], forecast.actual[i], forecast.persistence[i]
        );
    }
    emit(&out, a.out.as_deref())?;
    eprintln!(
        "rmse {:.6} (persistence {:.6})",
        forecast.rmse(),
        forecast.persistence_rmse()
    );
    Ok(())
}

fn dower(a: DowerArgs) -> Result<()> {
    let record = read_record(&a.input)?;
    let matrix = match &a.matrix {
        Some(p) => DowerMatrix::load(p)?,
        None => DowerMatrix::default(),
    };
    let vcg = twelve_lead_to_vcg(&record, a.epsilon, &matrix)?;
    write_record(&vcg, &a.out)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let base = match &a.params {
        Some(p) => EcgModelParams::load(p)?,
        None => EcgModelParams::default(),
    };
    let params = EcgModelParams {
        baseline_amplitude: a.baseline,
        ..base.with_heart_rate(a.hr)
    };
    let record = synth_vcg(&params, a.fs, a.duration)?;
    write_record(&record, &a.out)?;
    Ok(())
}

fn noise(a: NoiseArgs) -> Result<()> {
    let mut record = read_record(&a.input)?;
    let lead = record
        .lead(&a.lead)
        .cloned()
        .ok_or_else(|| Error::MissingLead(a.lead.clone()))?;
    let source = match &a.noise_file {
        Some(p) => load_noise_record(p, a.kind)?,
        None => generate_noise(
            a.kind,
            record.sample_rate_hz(),
            (a.offset + record.len()) as f64 / record.sample_rate_hz(),
            a.seed,
        )?,
    };
    let spec = NoiseSpec {
        kind: a.kind,
        source,
        target_snr_db: a.snr,
        offset: a.offset,
    };
    record.replace_lead(apply_noise(&lead, &spec)?)?;
    write_record(&record, &a.out)?;
    Ok(())
}

fn is_twelve_lead(names: &[&str]) -> bool {
    EIGHT_LEADS
        .iter()
        .all(|lead| names.iter().any(|n| n.eq_ignore_ascii_case(lead)))
}

fn fuse(a: FuseArgs) -> Result<()> {
    let record = read_record(&a.input)?;
    let record = if is_twelve_lead(&record.names()) {
        twelve_lead_to_vcg(&record, a.epsilon, &DowerMatrix::default())?
    } else {
        screen_constant_leads(&record, a.epsilon)?;
        record
    };
    if record.lead_count() < 2 {
        return Err(usage(format!("fusion needs at least 2 leads, {} has {}", a.input.display(), record.lead_count())));
    }
    let (fis_d, fis_alpha) = match &a.config {
        Some(p) => FisConfigFile::load(p)
            .with_context(|| format!("loading FIS config {}", p.display()))?
            .into_systems(),
        None => FisConfigFile::default().into_systems(),
    };
    let config = FusionConfig {
        gamma: a.gamma,
        normalization: if a.per_lead_scale {
            Normalization::AmplitudeRange
        } else {
            Normalization::GlobalMax
        },
        fis_d,
        fis_alpha,
        ..FusionConfig::default()
    };
    let outcome = fuse_record(&record, a.params.fixed()?, &a.params.estimation(), &config)?;
    write_trajectory(&outcome.report.trajectory, &a.out)?;
    let mut report = serde_json::to_value(&outcome.metrics)?;
    if let Some(est) = &outcome.estimates {
        report["estimates"] = serde_json::to_value(est)?;
    }
    emit(&(serde_json::to_string_pretty(&report)? + "\n"), a.metrics.as_deref())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.inputs {
        let traj = read_trajectory(path)?;
        rows.push(json!({
            "file": path.display().to_string(),
            "label": traj.source_label(),
            "m": traj.dim(),
            "states": traj.len(),
            "disorder": disorder_metric(&traj)?,
        }));
    }
    println!("{}", serde_json::to_string_pretty(&rows)?);
    Ok(())
}
