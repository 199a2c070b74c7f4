use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use voxid_core::audio::{load_manifest, read_wav, write_wav};
use voxid_core::corpus::build_corpus;
use voxid_core::disguise::{DisguiseSpec, Effect};
use voxid_core::features::{extract, FeatureConfig, FeatureMethod};
use voxid_core::harness::{
    emit_report, run_experiment, EvalReport, ExperimentConfig, ExperimentMethod, ModelBundle, ReportFormat,
};
use voxid_core::{PldaOptions, SvmParams};

#[derive(Parser)]
#[command(name = "voxid", version, about = "Speaker identification under voice disguise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic corpus and its manifest.
    Synth {
        #[arg(long, default_value_t = 10)]
        speakers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump per-frame features of one WAV file as CSV.
    Extract {
        input: PathBuf,
        #[arg(long, default_value = "mfcc_dd")]
        method: String,
        /// TOML file with feature parameters.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a disguise effect to one WAV file.
    Disguise {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        effect: EffectArg,
        #[arg(long, allow_hyphen_values = true)]
        semitones: Option<f64>,
        #[arg(long)]
        carrier: Option<f64>,
    },
    /// Train one method on the training partition of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "mfcc_dd")]
        method: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Identify the speaker of one WAV file with a trained model.
    Identify {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        /// Print every speaker score, best first.
        #[arg(long)]
        scores: bool,
    },
    /// Run the method × effect grid and print the report.
    Evaluate(EvaluateArgs),
    /// Re-render a saved JSON report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    /// TOML experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated subset of mfcc_dd,lpc,dwpd,dct,plda.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated subset of none,high,low,evc.
    #[arg(long, value_delimiter = ',')]
    effects: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the full report as JSON for `voxid report`.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EffectArg {
    None,
    High,
    Low,
    Evc,
}

impl From<EffectArg> for Effect {
    fn from(e: EffectArg) -> Self {
        match e {
            EffectArg::None => Effect::None,
            EffectArg::High => Effect::HighPitched,
            EffectArg::Low => Effect::LowPitched,
            EffectArg::Evc => Effect::Evc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_features(path: Option<&Path>) -> Result<FeatureConfig> {
    match path {
        Some(p) => toml::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(FeatureConfig::default()),
    }
}

fn resolve_config(args: &EvaluateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let mut cfg: ExperimentConfig =
                toml::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
            if cfg.manifest.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.manifest = base.join(&cfg.manifest);
            }
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.manifest {
        cfg.manifest = m.clone();
    } else if args.config.is_none() {
        bail!("either --manifest or --config is required");
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(effects) = &args.effects {
        cfg.effects = effects.iter().map(|e| e.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { speakers, out, seed } => {
            let manifest = build_corpus(speakers, &out, seed)?;
            println!("{}", manifest.display());
        }
        Command::Extract {
            input,
            method,
            features,
            out,
        } => {
            let method: FeatureMethod = method.parse()?;
            let cfg = load_features(features.as_deref())?;
            let clip = read_wav(&input)?;
            let m = extract(&clip, method, &cfg)?;
            write_text(out.as_deref(), &m.to_csv())?;
        }
        Command::Disguise {
            input,
            output,
            effect,
            semitones,
            carrier,
        } => {
            let mut spec = DisguiseSpec::default_for(effect.into());
            if let Some(s) = semitones {
                spec.semitones = s;
            }
            if let Some(c) = carrier {
                spec.carrier_hz = c;
            }
            let clip = read_wav(&input)?;
            write_wav(&spec.apply(&clip)?, &output)?;
        }
        Command::Train {
            manifest,
            method,
            model,
            seed,
            features,
        } => {
            let method: ExperimentMethod = method.parse()?;
            let records = load_manifest(&manifest)?;
            let svm = SvmParams {
                seed,
                ..SvmParams::default()
            };
            let features = load_features(features.as_deref())?;
            let (bundle, warnings) = ModelBundle::train(&records, method, &features, &svm, &PldaOptions::default())?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            bundle.save(&model)?;
        }
        Command::Identify { model, input, scores } => {
            let bundle = ModelBundle::load(&model)?;
            let (who, mut all) = bundle.identify(&read_wav(&input)?)?;
            println!("{who}");
            if scores {
                all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                for (id, s) in all {
                    println!("{id}\t{s:.6}");
                }
            }
        }
        Command::Evaluate(args) => {
            let cfg = resolve_config(&args)?;
            let report = run_experiment(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = &args.json {
                write_text(Some(path), &emit_report(&report, ReportFormat::Json))?;
            }
            write_text(args.out.as_deref(), &emit_report(&report, args.format.into()))?;
        }
        Command::Report { input, format } => {
            let report: EvalReport = serde_json::from_str(&read_text(&input)?)
                .with_context(|| format!("parsing report {}", input.display()))?;
            print!("{}", emit_report(&report, format.into()));
        }
    }
    Ok(())
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Extract { .. } => "extract",
            Command::Disguise { .. } => "disguise",
            Command::Train { .. } => "train",
            Command::Identify { .. } => "identify",
            Command::Evaluate(_) => "evaluate",
            Command::Report { .. } => "report",
        }
    }
}

// Library errors already render their source, so only causes that add new
// text are appended.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.stage();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("voxid {stage} failed: {}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
