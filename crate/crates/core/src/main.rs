use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dicl::dataset::load_dataset;
use dicl::eval::export::{export_human_eval, hit_candidates};
use dicl::infer::InferenceMode;
use dicl::llm::ProviderKind;
use dicl::run::{self, oracle_script, stubborn_script, Pipeline, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "dicl", version, about = "Bundle generation with demonstration-guided prompting")]
struct Cli {
    /// TOML run configuration. Defaults to the run directory's config.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Dataset file, overriding the configuration.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Self-correction rounds.
    #[arg(long, global = true)]
    ts: Option<u32>,
    /// Bundle feedback rounds.
    #[arg(long, global = true)]
    tb: Option<u32>,
    /// Intent feedback rounds.
    #[arg(long, global = true)]
    ti: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    provider: Option<Provider>,
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dicl,
    FewShot,
    ZeroShot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Mock,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Split the dataset into train, validation and test.
    Ingest,
    /// Embed session descriptions.
    Embed,
    /// Choose demonstration sessions for every test session.
    Retrieve,
    /// Build demonstrations for the chosen sessions.
    Demo,
    /// Generate bundles for the test sessions.
    Infer,
    /// Score the results against the ground truth.
    Eval,
    /// All stages in order.
    Run,
    /// Compare finished runs.
    Report { run_dirs: Vec<PathBuf> },
    /// Write a mock script that answers from the dataset's ground truth.
    OracleScript {
        #[arg(long)]
        out: PathBuf,
        /// Never repair anything instead.
        #[arg(long)]
        stubborn: bool,
    },
    /// Sample hit intents for blinded human rating.
    ExportHumanEval {
        /// DOMAIN=RUN_DIR, once per domain.
        #[arg(long = "run", value_parser = parse_domain)]
        runs: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = 20)]
        per_domain: usize,
        #[arg(long, default_value_t = 2)]
        raters: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_domain(s: &str) -> Result<(String, PathBuf), String> {
    let (d, p) = s.split_once('=').ok_or("expected DOMAIN=RUN_DIR")?;
    Ok((d.to_owned(), PathBuf::from(p)))
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, RunError> {
        let existing = self.run_dir.join("config.json");
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None if existing.exists() => {
                let text = std::fs::read_to_string(&existing)?;
                serde_json::from_str(&text).map_err(|source| RunError::Json {
                    path: existing,
                    source,
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(m) = self.mode {
            cfg.inference.mode = match m {
                Mode::Dicl => InferenceMode::Dicl,
                Mode::FewShot => InferenceMode::FewShotRandom,
                Mode::ZeroShot => InferenceMode::ZeroShot,
            };
        }
        if let Some(k) = self.k {
            cfg.retrieval.k = k;
        }
        if let Some(t) = self.ts {
            cfg.loops.self_correct = t;
        }
        if let Some(t) = self.tb {
            cfg.loops.bundle_feedback = t;
        }
        if let Some(t) = self.ti {
            cfg.loops.intent_feedback = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.provider {
            cfg = cfg.with_provider_kind(match p {
                Provider::Mock => ProviderKind::Mock,
                Provider::Remote => ProviderKind::Remote,
            });
        }
        if let Some(s) = &self.mock_script {
            cfg = cfg.with_mock_script(&absolute(s)?);
        }
        cfg.dataset = absolute(&cfg.dataset)?;
        Ok(cfg)
    }
}

fn absolute(p: &Path) -> Result<PathBuf, RunError> {
    if p.as_os_str().is_empty() || p.is_absolute() {
        Ok(p.to_owned())
    } else {
        Ok(std::env::current_dir()?.join(p))
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Report { run_dirs } => {
            print!("{}", run::report(run_dirs)?);
            return Ok(());
        }
        Command::OracleScript { out, stubborn } => {
            let cfg = cli.run_config()?;
            let ds = load_dataset(&cfg.dataset)?;
            let script = if *stubborn {
                stubborn_script(&ds)
            } else {
                oracle_script(&ds)
            };
            script.save(out)?;
            println!("wrote {} rules to {}", script.rules.len(), out.display());
            return Ok(());
        }
        Command::ExportHumanEval {
            runs,
            per_domain,
            raters,
            out,
        } => {
            let mut domains = BTreeMap::new();
            let mut seed = 0;
            for (domain, dir) in runs {
                let p = Pipeline::open(cli_config_for(dir)?, dir, cli.workers)?;
                seed = p.config().seed;
                let ds = load_dataset(&p.config().dataset)?;
                let results: Vec<_> = p.load_results()?.into_values().collect();
                domains.insert(domain.clone(), hit_candidates(&results, &ds));
            }
            let s = export_human_eval(&domains, *per_domain, *raters, seed, out)?;
            println!("wrote {} records for {} raters to {}", s.records, raters, out.display());
            return Ok(());
        }
        _ => {}
    }
    let p = Pipeline::open(cli.run_config()?, &cli.run_dir, cli.workers)?;
    match cli.command {
        Command::Ingest => {
            let s = p.ingest()?;
            println!(
                "train {} / validation {} / test {}",
                s.train.len(),
                s.validation.len(),
                s.test.len()
            );
        }
        Command::Embed => {
            let e = p.embed()?;
            println!("{} sessions embedded with {} (dim {})", e.sessions, e.provider, e.dim);
        }
        Command::Retrieve => {
            let n = p.retrieve()?;
            println!("{} test sessions planned, {} demonstrations needed", n.plan.len(), n.demo_sessions().len());
        }
        Command::Demo => {
            let s = p.demo()?;
            println!("demonstrations: {} built, {} existing, {} failed", s.produced, s.skipped, s.failed);
        }
        Command::Infer => {
            let s = p.infer()?;
            println!("results: {} produced, {} existing, {} failed", s.produced, s.skipped, s.failed);
        }
        Command::Eval => print!("{}", p.eval()?.to_table()),
        Command::Run => print!("{}", p.run_all()?.to_table()),
        _ => unreachable!(),
    }
    Ok(())
}

fn cli_config_for(dir: &Path) -> Result<RunConfig, RunError> {
    let path = dir.join("config.json");
    let text = std::fs::read_to_string(&path).map_err(|_| RunError::MissingArtifact {
        artifact: path.clone(),
        stage: "ingest",
    })?;
    serde_json::from_str(&text).map_err(|source| RunError::Json { path, source })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
