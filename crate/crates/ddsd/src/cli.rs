//! The `ddsd` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ddsd_core::backend::{BackendConfig, BackendKind, MockOptions};
use ddsd_core::classifier::{LoraSpec, Optimizer, TrainConfig};
use ddsd_core::corpus::{self, Split, SplitRatios, SynthConfig};
use ddsd_core::eval::{self, ErrorKind, EvalError, MetricsReport, OpSelection, ScoredExample};
use ddsd_core::lattice;
use ddsd_core::promptgen::{ContextMode, FollowupMode, PromptConfig};
use serde::{Deserialize, Serialize};

use crate::det::{self, Axis};
use crate::manifest::{sha256_file, RunManifest};
use crate::pipeline::{self, PipelineError, Subset};
use crate::{checkpoint, dataset, remote, scores};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_UNATTAINABLE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    fn validation(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            error: e.into(),
        }
    }

    fn io(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            code: EXIT_IO,
            error: e.into(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Backend { .. } => EXIT_BACKEND,
            _ => EXIT_VALIDATION,
        };
        CliError { code, error: e.into() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ddsd", version, about = "Device-directed speech detection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic corpus with speaker-disjoint splits.
    Synth(SynthArgs),
    /// List the n cheapest hypotheses of a lattice file.
    Nbest(NbestArgs),
    /// Render prompts for a dataset.
    Prompt(PromptArgs),
    /// Score a dataset by prompting or with trained classifiers.
    Infer(InferArgs),
    /// Train a classifier head on backend embeddings.
    Train(TrainArgs),
    /// FAR, FRR, EER and operating points for a scores file.
    Eval(EvalArgs),
    /// Paired t-test between two scores files.
    Significance(SignificanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory for outputs and the run manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 200)]
    pub speakers: usize,
    #[arg(long, default_value_t = 0.2)]
    pub directed_ratio: f64,
    #[arg(long, default_value_t = 0.3)]
    pub ambiguity: f64,
    #[arg(long, default_value_t = 3)]
    pub confusions: usize,
    /// Train/val/test shares.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.1,0.2")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NbestArgs {
    pub lattice: PathBuf,
    #[arg(short, default_value_t = 8)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PromptFlags {
    /// 1 for the 1-best follow-up, N for an N-best list.
    #[arg(long, default_value_t = 8)]
    pub followup_hyps: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub context: Switch,
    /// Prepend the task instructions. Defaults to on for prompting and off
    /// for classifier training.
    #[arg(long, value_enum)]
    pub task_prompt: Option<Switch>,
    /// Run several configurations, e.g. `1,8,1-1,1-8`. Overrides
    /// `--followup-hyps` and `--context`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<String>,
}

impl PromptFlags {
    pub fn configs(&self, default_task_prompt: bool) -> CliResult<Vec<PromptConfig>> {
        let task_prompt = self.task_prompt.map_or(default_task_prompt, Switch::on);
        let configs = if self.grid.is_empty() {
            let followup = match self.followup_hyps {
                0 => return Err(CliError::validation(anyhow!("--followup-hyps must be at least 1"))),
                1 => FollowupMode::OneBest,
                n => FollowupMode::NBest(n),
            };
            let context = if self.context.on() {
                ContextMode::WithContext
            } else {
                ContextMode::FollowupOnly
            };
            vec![PromptConfig::new(followup, context)]
        } else {
            self.grid
                .iter()
                .map(|t| PromptConfig::from_tag(t.trim()).map_err(CliError::validation))
                .collect::<CliResult<Vec<_>>>()?
        };
        Ok(configs
            .into_iter()
            .map(|c| c.with_task_prompt(task_prompt))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn subset(self) -> Subset {
        match self {
            SplitArg::Train => Subset::Only(Split::Train),
            SplitArg::Val => Subset::Only(Split::Val),
            SplitArg::Test => Subset::Only(Split::Test),
            SplitArg::All => Subset::All,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BackendFlags {
    /// TOML backend configuration; `DDSD_ENDPOINT` / `DDSD_MODEL` override it.
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
    /// Endpoint of a served model; selects the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Label for answers that are neither 0 nor 1.
    #[arg(long)]
    pub fallback_label: Option<u8>,
    /// Mock only: prefix answers with a sentence of reasoning.
    #[arg(long)]
    pub mock_verbose: bool,
    /// Mock only: answer descriptively for about one prompt in N.
    #[arg(long)]
    pub mock_descriptive_period: Option<u64>,
    /// Mock only: scale of the noise dimensions.
    #[arg(long, default_value_t = 0.3)]
    pub mock_noise: f64,
}

impl BackendFlags {
    pub fn config(&self) -> CliResult<BackendConfig> {
        let mut c = remote::load_config(self.backend_config.as_deref()).map_err(CliError::validation)?;
        if let Some(url) = &self.endpoint {
            c.endpoint_url = Some(url.clone());
            c.kind = BackendKind::Remote;
        }
        if let Some(m) = &self.model {
            c.model_name = Some(m.clone());
        }
        if let Some(d) = self.embedding_dim {
            c.embedding_dim = d;
        }
        if let Some(n) = self.max_in_flight {
            c.max_in_flight = n;
        }
        if let Some(ms) = self.timeout_ms {
            c.request_timeout = Duration::from_millis(ms);
        }
        if let Some(l) = self.fallback_label {
            c.fallback_label = l;
        }
        c.validate().map_err(CliError::validation)?;
        Ok(c)
    }

    pub fn backend(&self, seed: u64) -> CliResult<(BackendConfig, pipeline::SharedBackend)> {
        let config = self.config()?;
        let mock = MockOptions {
            verbose: self.mock_verbose,
            descriptive_period: self.mock_descriptive_period,
            noise_scale: self.mock_noise,
            seed,
        };
        let backend = pipeline::make_backend(config.clone(), mock).map_err(CliError::validation)?;
        Ok((config, backend))
    }
}

#[derive(Debug, Clone, Args)]
pub struct PromptArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub prompt: PromptFlags,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    /// Render only the first N selected records.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Prompting,
    Classifier,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Prompting)]
    pub mode: Mode,
    /// Trained checkpoints for classifier mode; each carries its own prompt
    /// configuration.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[command(flatten)]
    pub prompt: PromptFlags,
    #[command(flatten)]
    pub backend: BackendFlags,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub prompt: PromptFlags,
    #[command(flatten)]
    pub backend: BackendFlags,
    #[arg(long, default_value_t = 2e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.03)]
    pub warmup: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Momentum coefficient; plain SGD when absent.
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub l2_normalize: bool,
    /// Train a low-rank adapter of this rank on a frozen random projection.
    #[arg(long)]
    pub lora_rank: Option<usize>,
    #[arg(long, default_value_t = 16.0)]
    pub lora_alpha: f64,
    #[arg(long, default_value_t = 64)]
    pub lora_hidden: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.10")]
    pub op_frr: Vec<f64>,
    /// Interpolate between curve points at operating points.
    #[arg(long)]
    pub interpolate: bool,
    /// Treat scores as hard labels; detected from the scores by default.
    #[arg(long, value_enum)]
    pub hard_labels: Option<Switch>,
    /// Inference report whose fallback rate is carried into the metrics.
    #[arg(long)]
    pub infer_report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Axis::Probit)]
    pub det_axis: Axis,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorsArg {
    All,
    FalseAccept,
}

#[derive(Debug, Clone, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Fixed decision threshold for both systems. Without it each system is
    /// thresholded at its `--op-frr` operating point (0.5 for hard labels).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0.10)]
    pub op_frr: f64,
    #[arg(long, value_enum, default_value_t = ErrorsArg::All)]
    pub errors: ErrorsArg,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK });
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}

pub fn execute(command: &Command) -> CliResult {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Nbest(a) => cmd_nbest(a),
        Command::Prompt(a) => cmd_prompt(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Significance(a) => cmd_significance(a),
    }
}

fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(anyhow!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::io(anyhow!("{}: {e}", path.display())))
}

fn hash_input(path: &Path) -> CliResult<String> {
    sha256_file(path).map_err(|e| CliError::io(anyhow!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> CliResult<Vec<corpus::DatasetRecord>> {
    dataset::load(path).map_err(|e| match e {
        dataset::DatasetError::Io { .. } => CliError::io(e),
        _ => CliError::validation(e),
    })
}

fn scores_error(e: scores::ScoresError) -> CliError {
    match &e {
        scores::ScoresError::Io { .. } => CliError::io(e),
        scores::ScoresError::Csv { source, .. } if source.is_io_error() => CliError::io(e),
        _ => CliError::validation(e),
    }
}

fn load_checkpoint(path: &Path) -> CliResult<checkpoint::Checkpoint> {
    checkpoint::load(path).map_err(|e| match e {
        checkpoint::CheckpointError::Io { .. } => CliError::io(e),
        _ => CliError::validation(anyhow!("{}: {e}", path.display())),
    })
}

fn finish(manifest: RunManifest, out_dir: &Path) -> CliResult {
    manifest.write(out_dir).map(|_| ()).map_err(CliError::io)
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let [train, val, test] = a.ratios[..] else {
        return Err(CliError::validation(anyhow!("--ratios needs three values")));
    };
    let config = SynthConfig {
        num_pairs: a.pairs,
        num_speakers: a.speakers,
        directed_ratio: a.directed_ratio,
        ambiguity_fraction: a.ambiguity,
        n_confusions: a.confusions,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let ratios = SplitRatios { train, val, test };
    let mut records = corpus::generate(&config).map_err(CliError::validation)?;
    corpus::split(&mut records, ratios, a.seed).map_err(CliError::validation)?;
    ensure_dir(&a.out.out_dir)?;
    let path = a.out.out_dir.join("dataset.jsonl");
    dataset::save(&records, &path).map_err(CliError::io)?;

    let mut m = RunManifest::new("synth", serde_json::json!({ "synth": to_json(&config), "ratios": to_json(&ratios) }), a.seed);
    m.input_sha256 = Some(hash_input(&path)?);
    m.outputs.push(path.display().to_string());
    println!("wrote {} records to {}", records.len(), path.display());
    finish(m, &a.out.out_dir)
}

fn cmd_nbest(a: &NbestArgs) -> CliResult {
    if a.n == 0 {
        return Err(CliError::validation(anyhow!("-n must be at least 1")));
    }
    let text = std::fs::read_to_string(&a.lattice).map_err(|e| CliError::io(anyhow!("{}: {e}", a.lattice.display())))?;
    let lat = lattice::parse_lattice(&text).map_err(|e| CliError::validation(anyhow!("{}: {e}", a.lattice.display())))?;
    for h in lattice::nbest(&lat, a.n) {
        println!("{}\t{}", h.total_cost, h.text);
    }
    Ok(())
}

fn cmd_prompt(a: &PromptArgs) -> CliResult {
    let records = load_dataset(&a.dataset)?;
    let mut selected = a.split.subset().select(&records);
    if let Some(limit) = a.limit {
        selected.truncate(limit);
    }
    ensure_dir(&a.out.out_dir)?;
    let configs = a.prompt.configs(true)?;
    let mut m = RunManifest::new("prompt", to_json(&configs), 0);
    m.input_sha256 = Some(hash_input(&a.dataset)?);
    for config in configs {
        let prompts = pipeline::render_prompts(&selected, &config)?;
        let mut out = String::new();
        for (r, p) in selected.iter().zip(&prompts) {
            out.push_str(&format!("### {}\n{}\n\n", r.pair_id, p));
        }
        let path = a.out.out_dir.join(format!("prompts_{}.txt", config.tag()));
        write_file(&path, &out)?;
        m.outputs.push(path.display().to_string());
    }
    finish(m, &a.out.out_dir)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferReport {
    pub mode: String,
    pub config: String,
    pub examples: usize,
    pub fallbacks: usize,
    pub fallback_rate: Option<f64>,
}

fn cmd_infer(a: &InferArgs) -> CliResult {
    let records = load_dataset(&a.dataset)?;
    let selected = a.split.subset().select(&records);
    if selected.is_empty() {
        return Err(CliError::validation(anyhow!("no records in the selected split")));
    }
    let (config, backend) = a.backend.backend(a.seed)?;
    ensure_dir(&a.out.out_dir)?;
    let mut m = RunManifest::new(
        "infer",
        serde_json::json!({ "mode": format!("{:?}", a.mode), "backend": to_json(&config), "split": format!("{:?}", a.split) }),
        a.seed,
    );
    m.input_sha256 = Some(hash_input(&a.dataset)?);
    m.backend = Some(backend.identity());

    match a.mode {
        Mode::Prompting => {
            for pc in a.prompt.configs(true)? {
                let run = pipeline::infer_prompting(backend.as_ref(), &selected, &pc, config.max_in_flight, config.fallback_label)?;
                let tag = pc.tag();
                let report = InferReport {
                    mode: "prompting".into(),
                    config: tag.clone(),
                    examples: run.scores.len(),
                    fallbacks: run.fallbacks,
                    fallback_rate: Some(run.fallback_rate()),
                };
                m.outputs.extend(write_infer_outputs(&a.out.out_dir, &tag, &run.scores, &report)?);
                println!("{tag}: {} examples, fallback rate {:.4}", run.scores.len(), run.fallback_rate());
            }
        }
        Mode::Classifier => {
            if a.checkpoint.is_empty() {
                return Err(CliError::validation(anyhow!("classifier mode needs --checkpoint")));
            }
            for path in &a.checkpoint {
                let ck = load_checkpoint(path)?;
                let scores = pipeline::infer_classifier(backend.as_ref(), &ck, &selected, config.max_in_flight)?;
                let tag = ck.prompt_config.tag();
                let report = InferReport {
                    mode: "classifier".into(),
                    config: tag.clone(),
                    examples: scores.len(),
                    fallbacks: 0,
                    fallback_rate: None,
                };
                m.outputs.extend(write_infer_outputs(&a.out.out_dir, &tag, &scores, &report)?);
                println!("{tag}: {} examples scored with {}", scores.len(), path.display());
            }
        }
    }
    finish(m, &a.out.out_dir)
}

fn write_infer_outputs(dir: &Path, tag: &str, s: &[ScoredExample], report: &InferReport) -> CliResult<Vec<String>> {
    let scores_path = dir.join(format!("scores_{tag}.csv"));
    scores::write_scores(&scores_path, s).map_err(CliError::io)?;
    let report_path = dir.join(format!("infer_{tag}.toml"));
    scores::write_report(&report_path, report).map_err(CliError::io)?;
    Ok(vec![scores_path.display().to_string(), report_path.display().to_string()])
}

fn cmd_train(a: &TrainArgs) -> CliResult {
    let records = load_dataset(&a.dataset)?;
    let selected = a.split.subset().select(&records);
    let train_config = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        warmup_fraction: a.warmup,
        batch_size: a.batch_size,
        seed: a.seed,
        optimizer: match a.momentum {
            Some(beta) => Optimizer::Momentum { beta },
            None => Optimizer::Sgd,
        },
        l2_normalize: a.l2_normalize,
    };
    train_config.validate().map_err(CliError::validation)?;
    let lora = a.lora_rank.map(|rank| LoraSpec {
        rank,
        alpha: a.lora_alpha,
        hidden_dim: a.lora_hidden,
    });
    let (config, backend) = a.backend.backend(a.seed)?;
    ensure_dir(&a.out.out_dir)?;
    let mut m = RunManifest::new(
        "train",
        serde_json::json!({ "train": to_json(&train_config), "lora": to_json(&lora), "backend": to_json(&config) }),
        a.seed,
    );
    m.input_sha256 = Some(hash_input(&a.dataset)?);
    m.backend = Some(backend.identity());
    for pc in a.prompt.configs(false)? {
        let ck = pipeline::train_classifier(backend.as_ref(), &selected, &pc, &train_config, lora.as_ref(), config.max_in_flight)?;
        let tag = pc.tag();
        let path = a.out.out_dir.join(format!("checkpoint_{tag}.txt"));
        checkpoint::save(&ck, &path).map_err(CliError::io)?;
        let trace: Vec<String> = ck.model.loss_trace.iter().map(|l| l.to_string()).collect();
        let trace_path = a.out.out_dir.join(format!("loss_{tag}.txt"));
        write_file(&trace_path, &(trace.join("\n") + "\n"))?;
        println!(
            "{tag}: {} trainable parameters, final epoch loss {:.6}",
            ck.model.trainable_param_count(),
            ck.model.loss_trace.last().copied().unwrap_or(f64::NAN)
        );
        m.outputs.push(path.display().to_string());
        m.outputs.push(trace_path.display().to_string());
    }
    finish(m, &a.out.out_dir)
}

fn cmd_eval(a: &EvalArgs) -> CliResult {
    let s = scores::read_scores(&a.scores).map_err(scores_error)?;
    let hard = match a.hard_labels {
        Some(sw) => sw.on(),
        None => scores::is_hard_labels(&s),
    };
    let selection = if a.interpolate {
        OpSelection::Interpolate
    } else {
        OpSelection::Conservative
    };
    let (mut report, curve) =
        eval::report(&s, a.threshold, &a.op_frr, selection, hard).map_err(CliError::validation)?;
    if let Some(path) = &a.infer_report {
        let r: InferReport = scores::read_report(path).map_err(scores_error)?;
        report.fallback_rate = r.fallback_rate;
    }
    ensure_dir(&a.out.out_dir)?;
    let stem = a
        .scores
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scores")
        .trim_start_matches("scores_")
        .to_string();
    let mut m = RunManifest::new(
        "eval",
        serde_json::json!({ "threshold": a.threshold, "op_frr": a.op_frr, "selection": to_json(&selection), "hard_labels": hard }),
        0,
    );
    m.input_sha256 = Some(hash_input(&a.scores)?);
    let report_path = a.out.out_dir.join(format!("metrics_{stem}.toml"));
    scores::write_report(&report_path, &report).map_err(CliError::io)?;
    m.outputs.push(report_path.display().to_string());
    if let Some(curve) = &curve {
        let csv_path = a.out.out_dir.join(format!("det_{stem}.csv"));
        write_file(&csv_path, &det::to_csv(curve))?;
        let svg_path = a.out.out_dir.join(format!("det_{stem}.svg"));
        write_file(&svg_path, &det::to_svg(curve, a.det_axis, &stem))?;
        m.outputs.push(csv_path.display().to_string());
        m.outputs.push(svg_path.display().to_string());
    }
    print_metrics(&report);
    finish(m, &a.out.out_dir)?;
    if report.far_at_op.iter().any(|op| !op.attainable) {
        return Err(CliError {
            code: EXIT_UNATTAINABLE,
            error: anyhow!("an operating point is finer than the positive-count resolution; nearest points were reported"),
        });
    }
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "absent".into(), |v| format!("{v}"))
}

fn print_metrics(r: &MetricsReport) {
    println!("far {}", fmt_rate(r.far));
    println!("frr {}", fmt_rate(r.frr));
    println!("eer {}", fmt_rate(r.eer));
    for op in &r.far_at_op {
        println!(
            "far@frr{} {} (threshold {}, frr {}{})",
            op.target_frr,
            op.far,
            op.threshold,
            op.frr,
            if op.attainable { "" } else { ", unattainable" }
        );
    }
    println!(
        "counts tp {} fp {} tn {} fn {}",
        r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn_
    );
    if let Some(f) = r.fallback_rate {
        println!("fallback_rate {f}");
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub threshold_a: f64,
    pub threshold_b: f64,
    pub errors: String,
    pub error_rate_a: f64,
    pub error_rate_b: f64,
    pub test: eval::TTestResult,
}

fn decision_threshold(s: &[ScoredExample], fixed: Option<f64>, op_frr: f64) -> CliResult<f64> {
    if let Some(t) = fixed {
        return Ok(t);
    }
    if scores::is_hard_labels(s) {
        return Ok(0.5);
    }
    let curve = eval::sweep(s).map_err(CliError::validation)?;
    match eval::far_at_frr(&curve, op_frr, OpSelection::Conservative) {
        Ok(op) => Ok(op.threshold),
        Err(e @ EvalError::Unattainable { .. }) => Err(CliError {
            code: EXIT_UNATTAINABLE,
            error: e.into(),
        }),
        Err(e) => Err(CliError::validation(e)),
    }
}

fn cmd_significance(a: &SignificanceArgs) -> CliResult {
    let sa = scores::read_scores(&a.a).map_err(scores_error)?;
    let sb = scores::read_scores(&a.b).map_err(scores_error)?;
    let ta = decision_threshold(&sa, a.threshold, a.op_frr)?;
    let tb = decision_threshold(&sb, a.threshold, a.op_frr)?;
    let pairs = eval::align_by_pair_id(&sa, &sb).map_err(CliError::validation)?;
    let (left, right): (Vec<&ScoredExample>, Vec<&ScoredExample>) = pairs.into_iter().unzip();
    let kind = match a.errors {
        ErrorsArg::All => ErrorKind::All,
        ErrorsArg::FalseAccept => ErrorKind::FalseAcceptOnly,
    };
    let ea = eval::error_indicators(&left, ta, kind);
    let eb = eval::error_indicators(&right, tb, kind);
    let test = eval::paired_ttest(&ea, &eb, a.confidence).map_err(CliError::validation)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let report = SignificanceReport {
        threshold_a: ta,
        threshold_b: tb,
        errors: format!("{:?}", a.errors).to_lowercase(),
        error_rate_a: mean(&ea),
        error_rate_b: mean(&eb),
        test,
    };
    ensure_dir(&a.out.out_dir)?;
    let path = a.out.out_dir.join("significance.toml");
    scores::write_report(&path, &report).map_err(CliError::io)?;
    println!(
        "t {} df {} p {} significant {} (mean difference {}, CI [{}, {}])",
        report.test.t,
        report.test.df,
        report.test.p_value,
        report.test.significant,
        report.test.mean_diff,
        report.test.ci.0,
        report.test.ci.1
    );
    let mut m = RunManifest::new(
        "significance",
        serde_json::json!({ "threshold": a.threshold, "op_frr": a.op_frr, "errors": report.errors, "confidence": a.confidence }),
        0,
    );
    m.input_sha256 = Some(sha_pair(&a.a, &a.b)?);
    m.outputs.push(path.display().to_string());
    finish(m, &a.out.out_dir)
}

fn sha_pair(a: &Path, b: &Path) -> CliResult<String> {
    Ok(format!("{}+{}", hash_input(a)?, hash_input(b)?))
}
