use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use strokekit::models::Family;
use strokekit::pipeline::{self, exit_code, PipelineConfig, PipelineMode, Strategy};
use strokekit::{Error, TrainedModel};

/// Overrides the output directory of every command; `--out` wins over it.
const OUT_ENV: &str = "STROKEKIT_OUT";
const TRAINING_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "strokekit", version, about = "Stroke risk prediction: imbalance handling, model comparison, explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Row and column counts, missingness, class balance and per-class summaries.
    Inspect {
        /// CSV to inspect; defaults to the `data` entry of --config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write inspect.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One pipeline run: fit, report, importance and SHAP artifacts.
    Run(RunArgs),
    /// Every model family under every resampling strategy.
    Matrix {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated subset of families.
        #[arg(long, value_delimiter = ',')]
        families: Vec<Family>,
        /// Comma-separated subset of strategies.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
    },
    /// Randomized search with stratified cross-validation only.
    Tune(RunArgs),
    /// Importance and SHAP artifacts for a fitted or freshly trained model.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        /// A model_<model>.json written by `run`; fitted from --config otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; replaces the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// `paper` (resample before the split) or `leakfree`.
    #[arg(long)]
    mode: Option<PipelineMode>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent matrix cells.
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> strokekit::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(out) = output_override(self.out.as_deref()) {
            cfg.output_dir = out;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(cfg)
    }
}

fn output_override(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn print_report(cfg: &PipelineConfig, a: &pipeline::RunArtifacts) {
    let r = &a.report;
    println!(
        "{} / {} / {}: accuracy {:.4}, weighted F1 {:.4}, positive recall {:.4} -> {}",
        r.model,
        r.strategy,
        r.mode.as_str(),
        r.test.accuracy,
        r.test.weighted_avg.f1,
        r.test.classes[1].recall,
        cfg.output_dir.display()
    );
}

fn inspect(data: Option<PathBuf>, config: Option<PathBuf>, out: Option<PathBuf>) -> strokekit::Result<()> {
    let (data, schema) = match (data, config) {
        (Some(d), cfg) => {
            let schema = match cfg {
                Some(c) => PipelineConfig::from_path(c)?.schema()?,
                None => strokekit::tabular::Schema::stroke(),
            };
            (d, schema)
        }
        (None, Some(c)) => {
            let cfg = PipelineConfig::from_path(c)?;
            (cfg.data.clone(), cfg.schema()?)
        }
        (None, None) => return Err(Error::Config("inspect needs --data or --config".into())),
    };
    let report = pipeline::inspect(&data, &schema)?;
    print!("{}", report.to_text());
    if let Some(dir) = output_override(out.as_deref()) {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join("inspect.json");
        std::fs::write(&path, report.to_json()?).map_err(|e| Error::io(path.display().to_string(), e))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn run(command: Command) -> strokekit::Result<u8> {
    match command {
        Command::Inspect { data, config, out } => inspect(data, config, out).map(|()| 0),
        Command::Run(args) => {
            let cfg = args.load()?;
            let a = pipeline::run_pipeline(&cfg)?;
            print_report(&cfg, &a);
            Ok(0)
        }
        Command::Matrix {
            run,
            families,
            strategies,
        } => {
            let cfg = run.load()?;
            let families = if families.is_empty() { Family::ALL.to_vec() } else { families };
            let strategies = if strategies.is_empty() { Strategy::ALL.to_vec() } else { strategies };
            let report = pipeline::run_matrix(&cfg, &strategies, &families)?;
            let mut failed = 0;
            for c in &report.cells {
                match &c.outcome {
                    Ok(r) => println!(
                        "{:<20} {:<12} accuracy {:.4}  weighted F1 {:.4}",
                        c.family.as_str(),
                        c.strategy.as_str(),
                        r.test.accuracy,
                        r.test.weighted_avg.f1
                    ),
                    Err(e) => {
                        failed += 1;
                        println!("{:<20} {:<12} failed: {e}", c.family.as_str(), c.strategy.as_str());
                    }
                }
            }
            println!("summary -> {}", cfg.output_dir.join("summary.csv").display());
            if failed > 0 {
                warn!("{failed} of {} cells failed", report.cells.len());
            }
            // cell failures are recorded in summary.csv; only a matrix with no
            // successful cell fails the command
            Ok(if failed == report.cells.len() { TRAINING_FAILURE } else { 0 })
        }
        Command::Tune(args) => {
            let cfg = args.load()?;
            let cv = pipeline::tune_only(&cfg)?;
            let best = &cv.candidates[cv.best];
            println!(
                "best of {} candidates: mean {}-fold accuracy {:.4}",
                cv.candidates.len(),
                cv.folds,
                best.mean_accuracy
            );
            println!("{}", serde_json::to_string_pretty(&best.params)?);
            Ok(0)
        }
        Command::Explain { run, model } => {
            let cfg = run.load()?;
            let model = match model {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(p.display().to_string(), e))?;
                    Some(TrainedModel::from_json(&text)?)
                }
                None => None,
            };
            let ex = pipeline::explain_only(&cfg, model)?;
            let top = ex.importance.argmax().map_or("-", |j| ex.importance.feature_names[j].as_str());
            println!("{}: top impurity importance {top}", ex.model.family());
            for (k, &j) in ex.shap.ranking.iter().enumerate().take(5) {
                println!("  shap rank {}: {} ({:.4})", k + 1, ex.shap.feature_names[j], ex.shap.mean_abs_phi[j]);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
