//! `mmtss` command-line entry point.
//!
//! Exit status: 0 when every item succeeded, 1 when any item or check
//! failed, 2 when the run could not start (bad flags, paths, manifest).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mmtss::fusion::{
    factorized_attention_forward, load_attention_params, run_fusion_checks, save_attention_params, CheckDims,
    FactorizedAttentionParams, RuleAttentionParams,
};
use mmtss::io::{read_tensor, write_json, write_tensor, SimulationManifest, TensorBlob};
use mmtss::pipeline::{self, FeatureOptions, StageSummary, REPORT_FILE};
use mmtss::room::synth::{write_synthetic_corpus, CorpusSpec};
use mmtss::{Error, Result};

#[derive(Parser)]
#[command(name = "mmtss", version, about = "Multi-channel target speech separation toolkit")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Print a machine-readable JSON summary to stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a small synthetic speech and noise corpus plus a manifest.
    MakeCorpus(MakeCorpusArgs),
    /// Simulate spatialised mixtures from a manifest.
    Simulate(SimulateArgs),
    /// Compute LPS, IPD, DF and the stacked feature matrix per example.
    Featurize(FeaturizeArgs),
    /// Separate the target with the oracle ratio mask and score it.
    OracleSeparate(OracleArgs),
    /// Score estimates against dataset references, bucketed.
    Evaluate(EvaluateArgs),
    /// Gradient, simplex and rule-gate checks of the fusion operators.
    FusionCheck(FusionCheckArgs),
    /// Write randomly initialised factorized-attention parameters.
    FusionInit(FusionInitArgs),
    /// Run factorized attention on tensors read from files.
    FusionForward(FusionForwardArgs),
}

#[derive(Args)]
struct MakeCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mixtures the written manifest asks for.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 12)]
    sources: usize,
    #[arg(long, default_value_t = 3)]
    noises: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces the manifest's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the manifest's example count.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Zero the directional feature where it falls below its median.
    #[arg(long)]
    premask: bool,
    /// Rule-gate slope; giving either gate flag enables the gate.
    #[arg(long, allow_hyphen_values = true)]
    gate_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gate_b: Option<f64>,
    /// Also write per-example real-time factors.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of `<id>.wav` estimates.
    #[arg(long)]
    estimates: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Report location; defaults to `<estimates>/report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FusionCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 3)]
    heads: usize,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    #[arg(long, default_value_t = 4)]
    acoustic_dim: usize,
    #[arg(long, default_value_t = 3)]
    modality_dim: usize,
    #[arg(long, default_value_t = 2)]
    out_dim: usize,
    /// Corrupt a parameter between the analytic and numeric passes.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args)]
struct FusionInitArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    input_dim: usize,
    #[arg(long, default_value_t = 256)]
    modality_dim: usize,
    #[arg(long, default_value_t = mmtss::fusion::DEFAULT_HEADS)]
    heads: usize,
    #[arg(long, default_value_t = 256)]
    out_dim: usize,
}

#[derive(Args)]
struct FusionForwardArgs {
    /// Directory holding `params.json` and its weight tensors.
    #[arg(long)]
    params: PathBuf,
    /// `[T x E]` tensor.
    #[arg(long)]
    acoustic: PathBuf,
    /// `[T x D]` tensor.
    #[arg(long)]
    modality: PathBuf,
    /// Fused `[T x P]` output tensor.
    #[arg(long)]
    out: PathBuf,
    /// Optional `[T x H]` attention weights output.
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{} is not a file", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{} is not a directory", path.display())))
    }
}

/// Prints `value` as JSON or `text` and returns the exit status.
fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String, ok: bool) -> Result<ExitCode> {
    if json {
        let s = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
        println!("{s}");
    } else {
        println!("{}", text());
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn summary_text(stage: &str, s: &StageSummary) -> String {
    let mut out = format!(
        "{stage}: {} processed, {} skipped, {} failed",
        s.processed.len(),
        s.skipped.len(),
        s.failures.len()
    );
    for f in &s.failures {
        out.push_str(&format!("\n  {}: {}", f.id, f.error));
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode> {
    let json = cli.json;
    let threads = cli.threads;
    match cli.command {
        Command::MakeCorpus(a) => {
            let spec = CorpusSpec {
                seed: a.seed,
                sources: a.sources,
                noises: a.noises,
                ..CorpusSpec::default()
            };
            let manifest = write_synthetic_corpus(&a.out, &spec, a.count)?;
            let path = a.out.join("manifest.json");
            write_json(&path, &manifest)?;
            emit(json, &path, || format!("wrote {}", path.display()), true)
        }
        Command::Simulate(a) => {
            require_file(&a.manifest)?;
            let mut manifest = SimulationManifest::load(&a.manifest)?;
            if let Some(seed) = a.seed {
                manifest.base_seed = seed;
            }
            if let Some(count) = a.count {
                manifest.count = count;
            }
            manifest.validate()?;
            let (_, summary) = pipeline::with_threads(threads, || pipeline::simulate_dataset(&manifest, &a.out))??;
            emit(json, &summary, || summary_text("simulate", &summary), summary.ok())
        }
        Command::Featurize(a) => {
            require_dir(&a.dataset)?;
            let gate = match (a.gate_w, a.gate_b) {
                (None, None) => None,
                (w, b) => {
                    let d = RuleAttentionParams::default();
                    Some(RuleAttentionParams {
                        w: w.unwrap_or(d.w),
                        b: b.unwrap_or(d.b),
                    })
                }
            };
            let opts = FeatureOptions {
                premask: a.premask,
                gate,
                timing: a.timing,
            };
            let summary = pipeline::with_threads(threads, || pipeline::featurize_dataset(&a.dataset, &a.out, &opts))??;
            emit(json, &summary, || summary_text("featurize", &summary), summary.ok())
        }
        Command::OracleSeparate(a) => {
            require_dir(&a.dataset)?;
            let outcome =
                pipeline::with_threads(threads, || pipeline::oracle_separate_dataset(&a.dataset, &a.out, a.timing))??;
            let ok = outcome.summary.ok();
            emit(json, &outcome, || summary_text("oracle-separate", &outcome.summary), ok)
        }
        Command::Evaluate(a) => {
            require_dir(&a.estimates)?;
            require_dir(&a.dataset)?;
            let outcome = pipeline::with_threads(threads, || pipeline::evaluate(&a.estimates, &a.dataset))??;
            let out = a.out.unwrap_or_else(|| a.estimates.join(REPORT_FILE));
            write_json(&out, &outcome)?;
            let ok = outcome.ok();
            emit(
                json,
                &outcome,
                || {
                    let mut t = outcome.report.to_table();
                    for id in &outcome.unmatched_estimates {
                        t.push_str(&format!("\nunmatched estimate: {id}"));
                    }
                    for id in &outcome.missing_estimates {
                        t.push_str(&format!("\nmissing estimate: {id}"));
                    }
                    for f in &outcome.failures {
                        t.push_str(&format!("\nfailed: {}: {}", f.id, f.error));
                    }
                    t
                },
                ok,
            )
        }
        Command::FusionCheck(a) => {
            let dims = CheckDims {
                frames: a.frames,
                acoustic: a.acoustic_dim,
                modality: a.modality_dim,
                heads: a.heads,
                out: a.out_dim,
            };
            let report = run_fusion_checks(a.seed, a.instances, dims, a.inject_fault)?;
            let ok = report.passed();
            emit(
                json,
                &report,
                || {
                    let mut t = format!(
                        "fusion-check: {} instances, max grad rel. error {:.3e}, max simplex error {:.3e}: {}",
                        report.instances,
                        report.max_grad_rel_error,
                        report.max_simplex_error,
                        if ok { "PASS" } else { "FAIL" }
                    );
                    for f in &report.failures {
                        t.push_str(&format!("\n  {f}"));
                    }
                    t
                },
                ok,
            )
        }
        Command::FusionInit(a) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let p = FactorizedAttentionParams::random(&mut rng, a.input_dim, a.modality_dim, a.heads, a.out_dim)?;
            save_attention_params(&a.out, &p)?;
            emit(json, &a.out, || format!("wrote {}", a.out.display()), true)
        }
        Command::FusionForward(a) => {
            require_dir(&a.params)?;
            require_file(&a.acoustic)?;
            require_file(&a.modality)?;
            let params = load_attention_params(&a.params)?;
            let acoustic = read_tensor(&a.acoustic)?.to_array2()?;
            let modality = read_tensor(&a.modality)?.to_array2()?;
            let out = factorized_attention_forward(acoustic.view(), modality.view(), &params)?;
            write_tensor(&a.out, &TensorBlob::from_array2_f64(&out.fused))?;
            if let Some(w) = &a.weights_out {
                write_tensor(w, &TensorBlob::from_array2_f64(&out.weights))?;
            }
            let shape = out.fused.shape().to_vec();
            emit(json, &shape, || format!("fused {shape:?} -> {}", a.out.display()), true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MMTSS_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
