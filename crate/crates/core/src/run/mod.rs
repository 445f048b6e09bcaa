//! Resumable pipeline stages over a run directory.
//!
//! ```text
//! <run>/config.json          RunConfig, written once
//! <run>/run.lock             held while a stage runs
//! <run>/split.json           ingest: split ids and dataset digest
//! <run>/embeddings.bin       embed: vector cache
//! <run>/embed.json           embed: provider and dimension used
//! <run>/neighbors.json       retrieve: demonstration plan per test session
//! <run>/demos/<id>.json      demo: one demonstration per planned session
//! <run>/results/<id>.json    infer: one result per test session
//! <run>/eval/report.{json,txt}
//! <run>/run_log.jsonl        every model call
//! <run>/cache/<role>.jsonl   response caches
//! <run>/manifest.json        providers and produced files
//! ```
//!
//! Every stage skips work whose output already exists, so an interrupted
//! stage can simply be run again.

mod config;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, Dataset, DatasetError, Session};
use crate::demo::{DemoBuilder, DemoError, Demonstration, RaterPanel};
use crate::eval::{comparison_table, eval_sessions, evaluate, EvalError, EvalReport};
use crate::infer::{
    assemble_context, ideal_transcript, infer_target, InferError, InferenceMode, SessionResult,
};
use crate::llm::{
    ChatClient, ChatProvider, LlmError, MockProvider, MockScript, ProviderConfig, ProviderKind,
    ResponseCache, RunLog,
};
use crate::prompts::{PromptError, PromptRegistry};
use crate::retrieval::{
    describe_catalog, embed_sessions, session_description, EmbedError, EmbeddingCache,
    EmbeddingProvider, HashEmbedder, NeighborIndex, RemoteEmbedder, StopWords,
};

pub use self::config::{EmbedderConfig, EmbedderKind, InferenceConfig, RunConfig};
pub use self::oracle::{oracle_script, stubborn_script, ORACLE_RULES};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("run directory {dir} was created with a different configuration (hash {existing}, now {current})")]
    ConfigMismatch {
        dir: PathBuf,
        existing: String,
        current: String,
    },
    #[error("run directory is locked by another process ({0}); remove it if that process is gone")]
    Locked(PathBuf),
    #[error("missing {artifact}; run `{stage}` first")]
    MissingArtifact { artifact: PathBuf, stage: &'static str },
    #[error("dataset changed since ingest (digest {expected}, now {found})")]
    DatasetChanged { expected: String, found: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("demonstration for {session}: {source}")]
    Demo { session: String, source: DemoError },
    #[error("inference for {session}: {source}")]
    Infer { session: String, source: InferError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl RunError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Prompt(_) => 2,
            RunError::ConfigMismatch { .. } | RunError::Locked(_) => 3,
            RunError::MissingArtifact { .. } => 4,
            RunError::Dataset(_) | RunError::DatasetChanged { .. } => 5,
            RunError::Embed(_) => 6,
            RunError::Llm(_) => 7,
            RunError::Demo { source, .. } => match source {
                DemoError::Llm(_) => 7,
                _ => 8,
            },
            RunError::Infer { source, .. } => match source {
                InferError::Llm(_) => 7,
                _ => 8,
            },
            RunError::Eval(_) => 9,
            RunError::Io(_) | RunError::Json { .. } => 10,
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| RunError::Json {
        path: path.to_owned(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| RunError::Json {
        path: path.to_owned(),
        source,
    })? + "\n";
    // write-then-rename so a crash never leaves a half-written artifact
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf, RunError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(RunError::MissingArtifact {
            artifact: path,
            stage,
        })
    }
}

fn file_digest(path: &Path) -> Result<String, RunError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Per-target generator seeded from the run seed and the session id.
fn target_rng(seed: u64, session_id: &str) -> ChaCha8Rng {
    let h = Sha256::digest(session_id.as_bytes());
    let salt = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedManifest {
    pub provider: String,
    pub dim: usize,
    pub sessions: usize,
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRef {
    pub session_id: String,
    /// Cosine similarity; absent for randomly drawn sessions.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPlan {
    pub mode: InferenceMode,
    pub k: usize,
    pub top_neighbors: bool,
    pub plan: BTreeMap<String, Vec<NeighborRef>>,
}

impl NeighborPlan {
    /// Distinct sessions that need a demonstration.
    pub fn demo_sessions(&self) -> BTreeSet<String> {
        self.plan
            .values()
            .flatten()
            .map(|n| n.session_id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub produced: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub dataset_sha256: Option<String>,
    pub providers: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageSummary>,
    pub demos: Vec<String>,
    pub results: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DemoFailure {
    session_id: String,
    error: String,
}

struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// An opened run directory plus the settings to execute its stages.
pub struct Pipeline {
    config: RunConfig,
    root: PathBuf,
    workers: usize,
    prompts: PromptRegistry,
}

impl Pipeline {
    /// Opens (creating if needed) `root` for `config`. A directory created
    /// with a different configuration is refused.
    pub fn open(config: RunConfig, root: &Path, workers: usize) -> Result<Self, RunError> {
        config.validate()?;
        fs::create_dir_all(root)?;
        let cfg_path = root.join("config.json");
        if cfg_path.exists() {
            let existing: RunConfig = read_json(&cfg_path)?;
            if existing != config {
                return Err(RunError::ConfigMismatch {
                    dir: root.to_owned(),
                    existing: existing.hash(),
                    current: config.hash(),
                });
            }
        } else {
            fs::write(&cfg_path, config.to_json())?;
        }
        let prompts = match &config.prompts_dir {
            Some(d) => PromptRegistry::with_overrides(d)?,
            None => PromptRegistry::builtin(),
        };
        Ok(Self {
            config,
            root: root.to_owned(),
            workers: workers.max(1),
            prompts,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn lock(&self) -> Result<Lock, RunError> {
        let p = self.path("run.lock");
        match OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Lock(p))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(RunError::Locked(p)),
            Err(e) => Err(e.into()),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, RunError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| RunError::Config(format!("worker pool: {e}")))
    }

    fn update_manifest(&self, f: impl FnOnce(&mut Manifest)) -> Result<(), RunError> {
        let p = self.path("manifest.json");
        let mut m: Manifest = if p.exists() {
            read_json(&p)?
        } else {
            Manifest::default()
        };
        m.config_sha256 = self.config.hash();
        f(&mut m);
        write_json(&p, &m)
    }

    fn dataset(&self) -> Result<(Dataset, SplitManifest), RunError> {
        let split: SplitManifest = read_json(&require(self.path("split.json"), "ingest")?)?;
        let found = file_digest(&self.config.dataset)?;
        if found != split.dataset_sha256 {
            return Err(RunError::DatasetChanged {
                expected: split.dataset_sha256,
                found,
            });
        }
        Ok((load_dataset(&self.config.dataset)?, split))
    }

    /// Training sessions that have ground truth; the demonstration pool.
    fn labelled_train<'d>(&self, ds: &'d Dataset, split: &SplitManifest) -> Vec<&'d Session> {
        let train: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
        let mut out: Vec<&Session> = ds
            .sessions
            .iter()
            .filter(|s| train.contains(s.session_id.as_str()))
            .filter(|s| {
                ds.ground_truth
                    .get(&s.session_id)
                    .is_some_and(|g| !g.bundles.is_empty())
            })
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    fn titles(ds: &Dataset, s: &Session) -> Vec<String> {
        s.item_ids
            .iter()
            .map(|id| ds.title(id).unwrap_or(id).to_owned())
            .collect()
    }

    // ---------------------------------------------------------------- ingest

    pub fn ingest(&self) -> Result<SplitManifest, RunError> {
        let _lock = self.lock()?;
        let p = self.path("split.json");
        if p.exists() {
            let (_, split) = self.dataset()?;
            return Ok(split);
        }
        let ds = load_dataset(&self.config.dataset)?;
        let split = ds.split(self.config.split)?;
        let ids = |v: &[Session]| v.iter().map(|s| s.session_id.clone()).collect();
        let manifest = SplitManifest {
            dataset: self.config.dataset.clone(),
            dataset_sha256: file_digest(&self.config.dataset)?,
            ratios: self.config.split,
            train: ids(&split.train),
            validation: ids(&split.validation),
            test: ids(&split.test),
        };
        write_json(&p, &manifest)?;
        log::info!(
            "ingest: {} train, {} validation, {} test sessions",
            manifest.train.len(),
            manifest.validation.len(),
            manifest.test.len()
        );
        let digest = manifest.dataset_sha256.clone();
        self.update_manifest(|m| {
            m.dataset_sha256 = Some(digest);
            m.stages.insert(
                "ingest".into(),
                StageSummary {
                    produced: 1,
                    ..Default::default()
                },
            );
        })?;
        Ok(manifest)
    }

    // ----------------------------------------------------------------- embed

    fn embedder(&self) -> Result<(Box<dyn EmbeddingProvider>, bool), RunError> {
        let cfg = &self.config.embedder;
        match cfg.kind {
            EmbedderKind::Hash => Ok((Box::new(HashEmbedder::default()), false)),
            EmbedderKind::Remote => {
                let attempt = RemoteEmbedder::new(&cfg.url, Duration::from_secs_f64(cfg.timeout_secs))
                    .and_then(|mut r| r.health().map(|_| r));
                match attempt {
                    Ok(r) => Ok((Box::new(r), false)),
                    Err(e) if cfg.fallback_to_hash => {
                        log::warn!("embedding service unavailable ({e}); using the hash embedder");
                        Ok((Box::new(HashEmbedder::default()), true))
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn embed_all(
        &self,
        ds: &Dataset,
        sessions: &[&Session],
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<crate::retrieval::SessionEmbedding>, RunError> {
        let descs = describe_catalog(&ds.catalog, &StopWords::english());
        let texts = sessions
            .iter()
            .map(|s| session_description(s, &descs))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::Config(e.to_string()))?;
        let cache = EmbeddingCache::open(&self.path("embeddings.bin")).map_err(EmbedError::from)?;
        Ok(embed_sessions(&texts, provider, Some(&cache))?)
    }

    fn embed_targets<'d>(&self, ds: &'d Dataset, split: &SplitManifest) -> Vec<&'d Session> {
        let mut v = self.labelled_train(ds, split);
        v.extend(split.test.iter().filter_map(|id| ds.session(id)));
        v
    }

    pub fn embed(&self) -> Result<EmbedManifest, RunError> {
        let _lock = self.lock()?;
        let p = self.path("embed.json");
        if p.exists() {
            return read_json(&p);
        }
        let (ds, split) = self.dataset()?;
        let (provider, fell_back) = self.embedder()?;
        let sessions = self.embed_targets(&ds, &split);
        let embs = self.embed_all(&ds, &sessions, provider.as_ref())?;
        let manifest = EmbedManifest {
            provider: provider.id(),
            dim: embs.first().map_or(0, |e| e.dim()),
            sessions: embs.len(),
            fell_back,
        };
        write_json(&p, &manifest)?;
        let pid = manifest.provider.clone();
        self.update_manifest(|m| {
            m.providers.insert("embedder".into(), pid);
            m.stages.insert(
                "embed".into(),
                StageSummary {
                    produced: embs.len(),
                    ..Default::default()
                },
            );
        })?;
        Ok(manifest)
    }

    // -------------------------------------------------------------- retrieve

    pub fn retrieve(&self) -> Result<NeighborPlan, RunError> {
        let _lock = self.lock()?;
        let p = self.path("neighbors.json");
        if p.exists() {
            return read_json(&p);
        }
        let embed: EmbedManifest = read_json(&require(self.path("embed.json"), "embed")?)?;
        let (ds, split) = self.dataset()?;
        let pool = self.labelled_train(&ds, &split);
        let mode = self.config.inference.mode;
        let k = self.config.retrieval.k;
        let top = self.config.inference.ablation.use_top_neighbor;
        let mut plan = BTreeMap::new();
        match mode {
            InferenceMode::ZeroShot => {
                for id in &split.test {
                    plan.insert(id.clone(), Vec::new());
                }
            }
            InferenceMode::Dicl if top => {
                // the embedder recorded by `embed`; every vector is cached
                let provider: Box<dyn EmbeddingProvider> = if embed.provider == HashEmbedder::default().id() {
                    Box::new(HashEmbedder::default())
                } else {
                    self.embedder()?.0
                };
                if provider.id() != embed.provider {
                    return Err(RunError::Config(format!(
                        "embedder is now {}, but embeddings were made with {}",
                        provider.id(),
                        embed.provider
                    )));
                }
                let corpus = self.embed_all(&ds, &pool, provider.as_ref())?;
                let index = NeighborIndex::new(corpus)?;
                let targets: Vec<&Session> =
                    split.test.iter().filter_map(|id| ds.session(id)).collect();
                let queries = self.embed_all(&ds, &targets, provider.as_ref())?;
                for q in queries {
                    let ns = index.query(&q, k)?;
                    plan.insert(
                        q.session_id.clone(),
                        ns.into_iter()
                            .map(|n| NeighborRef {
                                session_id: n.session_id,
                                score: Some(n.score),
                            })
                            .collect(),
                    );
                }
            }
            _ => {
                for id in &split.test {
                    let mut rng = target_rng(self.config.seed, id);
                    let n = k.min(pool.len());
                    let picked = sample(&mut rng, pool.len(), n);
                    plan.insert(
                        id.clone(),
                        picked
                            .iter()
                            .map(|i| NeighborRef {
                                session_id: pool[i].session_id.clone(),
                                score: None,
                            })
                            .collect(),
                    );
                }
            }
        }
        let result = NeighborPlan {
            mode,
            k,
            top_neighbors: mode == InferenceMode::Dicl && top,
            plan,
        };
        write_json(&p, &result)?;
        let n = result.plan.len();
        self.update_manifest(|m| {
            m.stages.insert(
                "retrieve".into(),
                StageSummary {
                    produced: n,
                    ..Default::default()
                },
            );
        })?;
        Ok(result)
    }

    // ------------------------------------------------------------ providers

    fn role_provider(&self, role: &str, cfg: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, RunError> {
        if cfg.kind == ProviderKind::Mock {
            let script_path = cfg
                .mock_script
                .as_ref()
                .or(self.config.generator.mock_script.as_ref())
                .ok_or_else(|| RunError::Config(format!("{role}: mock provider needs a mock_script")))?;
            let script = MockScript::load(script_path)?;
            return Ok(if role == "generator" {
                Arc::new(MockProvider::new(script))
            } else {
                Arc::new(MockProvider::for_role(script, role))
            });
        }
        Ok(cfg.build_provider()?)
    }

    fn client(&self, role: &str, cfg: &ProviderConfig, log: &Arc<RunLog>) -> Result<ChatClient, RunError> {
        fs::create_dir_all(self.path("cache"))?;
        let cache = ResponseCache::open(&self.path(&format!("cache/{role}.jsonl")))
            .map_err(LlmError::from)?;
        Ok(ChatClient::new(self.role_provider(role, cfg)?, cfg)
            .with_cache(Arc::new(cache))
            .with_log(log.clone()))
    }

    fn run_log(&self) -> Result<Arc<RunLog>, RunError> {
        Ok(Arc::new(RunLog::open(&self.path("run_log.jsonl")).map_err(LlmError::from)?))
    }

    fn record_providers(&self, ids: &[(&str, String)]) -> Result<(), RunError> {
        self.update_manifest(|m| {
            for (role, id) in ids {
                m.providers.insert((*role).to_owned(), id.clone());
            }
        })
    }

    // ------------------------------------------------------------------ demo

    fn demo_path(&self, id: &str) -> PathBuf {
        self.path(&format!("demos/{id}.json"))
    }

    fn demo_failure_path(&self, id: &str) -> PathBuf {
        self.path(&format!("demos/{id}.failed.json"))
    }

    pub fn demo(&self) -> Result<StageSummary, RunError> {
        let _lock = self.lock()?;
        let plan: NeighborPlan = read_json(&require(self.path("neighbors.json"), "retrieve")?)?;
        let (ds, _) = self.dataset()?;
        fs::create_dir_all(self.path("demos"))?;
        let wanted: Vec<String> = plan.demo_sessions().into_iter().collect();
        let todo: Vec<&String> = wanted
            .iter()
            .filter(|id| !self.demo_path(id).exists() && !self.demo_failure_path(id).exists())
            .collect();
        let mut summary = StageSummary {
            skipped: wanted.len() - todo.len(),
            ..Default::default()
        };

        if plan.mode == InferenceMode::FewShotRandom {
            for id in &todo {
                let s = ds.session(id).expect("planned from the dataset");
                let gt = &ds.ground_truth[id.as_str()];
                let d = ideal_transcript(s, &Self::titles(&ds, s), gt, &self.prompts).map_err(|source| {
                    RunError::Infer {
                        session: (*id).clone(),
                        source,
                    }
                })?;
                write_json(&self.demo_path(id), &d)?;
                summary.produced += 1;
            }
        } else if !todo.is_empty() {
            let log = self.run_log()?;
            let gen = self.client("generator", &self.config.generator, &log)?;
            let r1 = self.client("rater1", &self.config.rater1, &log)?;
            let r2 = self.client("rater2", &self.config.rater2, &log)?;
            self.record_providers(&[
                ("generator", gen.provider_id()),
                ("rater1", r1.provider_id()),
                ("rater2", r2.provider_id()),
            ])?;
            let panel = RaterPanel::new(r1, r2).with_repetitions(self.config.rater_repetitions);
            let builder = DemoBuilder::new(&gen, &panel, &self.prompts, self.config.loops);
            let outcomes: Vec<Result<bool, RunError>> = self.pool()?.install(|| {
                todo.par_iter()
                    .map(|id| {
                        let s = ds.session(id).expect("planned from the dataset");
                        match builder.build(s, &Self::titles(&ds, s), ds.ground_truth.get(id.as_str())) {
                            Ok(d) => write_json(&self.demo_path(id), &d).map(|_| true),
                            Err(e @ (DemoError::Llm(_) | DemoError::Io(_) | DemoError::Prompt(_))) => {
                                Err(RunError::Demo {
                                    session: (*id).clone(),
                                    source: e,
                                })
                            }
                            Err(e) => {
                                log::warn!("demonstration for {id} failed: {e}");
                                let f = DemoFailure {
                                    session_id: (*id).clone(),
                                    error: e.to_string(),
                                };
                                write_json(&self.demo_failure_path(id), &f).map(|_| false)
                            }
                        }
                    })
                    .collect()
            });
            for o in outcomes {
                if o? {
                    summary.produced += 1;
                } else {
                    summary.failed += 1;
                }
            }
        }
        let demos = wanted
            .iter()
            .filter(|id| self.demo_path(id).exists())
            .cloned()
            .collect();
        let s = summary.clone();
        self.update_manifest(|m| {
            m.demos = demos;
            m.stages.insert("demo".into(), s);
        })?;
        Ok(summary)
    }

    // ----------------------------------------------------------------- infer

    fn result_path(&self, id: &str) -> PathBuf {
        self.path(&format!("results/{id}.json"))
    }

    pub fn infer(&self) -> Result<StageSummary, RunError> {
        let _lock = self.lock()?;
        let plan: NeighborPlan = read_json(&require(self.path("neighbors.json"), "retrieve")?)?;
        let (ds, split) = self.dataset()?;
        if plan.mode != InferenceMode::ZeroShot {
            for id in plan.demo_sessions() {
                if !self.demo_path(&id).exists() && !self.demo_failure_path(&id).exists() {
                    return Err(RunError::MissingArtifact {
                        artifact: self.demo_path(&id),
                        stage: "demo",
                    });
                }
            }
        }
        fs::create_dir_all(self.path("results"))?;
        let todo: Vec<&String> = split
            .test
            .iter()
            .filter(|id| !self.result_path(id).exists())
            .collect();
        let mut summary = StageSummary {
            skipped: split.test.len() - todo.len(),
            ..Default::default()
        };
        if !todo.is_empty() {
            let log = self.run_log()?;
            let gen = self.client("generator", &self.config.generator, &log)?;
            self.record_providers(&[("generator", gen.provider_id())])?;
            let ablation = self.config.inference.ablation;
            let outcomes: Vec<Result<bool, RunError>> = self.pool()?.install(|| {
                todo.par_iter()
                    .map(|id| {
                        let s = ds.session(id).expect("split from the dataset");
                        let err = |source| RunError::Infer {
                            session: (*id).clone(),
                            source,
                        };
                        let mut demos = Vec::new();
                        for n in &plan.plan[id.as_str()] {
                            let p = self.demo_path(&n.session_id);
                            if p.exists() {
                                demos.push(read_json::<Demonstration>(&p)?);
                            }
                        }
                        let refs: Vec<&Demonstration> = demos.iter().collect();
                        let result = match assemble_context(&refs, plan.mode, &ablation, &self.prompts) {
                            Ok(ctx) => infer_target(
                                s,
                                &Self::titles(&ds, s),
                                &ctx,
                                demos.iter().map(|d| d.session_id.clone()).collect(),
                                plan.mode,
                                &gen,
                                &self.prompts,
                            )
                            .map_err(err)?,
                            Err(InferError::NoDemonstrations(_)) => SessionResult {
                                session_id: s.session_id.clone(),
                                mode: plan.mode,
                                bundles: Vec::new(),
                                failed: true,
                                failure: Some("no usable demonstration".into()),
                                demonstrations: Vec::new(),
                                turns: Vec::new(),
                                warnings: Vec::new(),
                            },
                            Err(e) => return Err(err(e)),
                        };
                        write_json(&self.result_path(id), &result)?;
                        Ok(!result.failed)
                    })
                    .collect()
            });
            for o in outcomes {
                if o? {
                    summary.produced += 1;
                } else {
                    summary.failed += 1;
                }
            }
        }
        let results = split
            .test
            .iter()
            .filter(|id| self.result_path(id).exists())
            .cloned()
            .collect();
        let s = summary.clone();
        self.update_manifest(|m| {
            m.results = results;
            m.stages.insert("infer".into(), s);
        })?;
        Ok(summary)
    }

    // ------------------------------------------------------------------ eval

    pub fn load_results(&self) -> Result<BTreeMap<String, SessionResult>, RunError> {
        let (_, split) = self.dataset()?;
        let mut out = BTreeMap::new();
        for id in &split.test {
            let p = require(self.result_path(id), "infer")?;
            out.insert(id.clone(), read_json(&p)?);
        }
        Ok(out)
    }

    pub fn eval(&self) -> Result<EvalReport, RunError> {
        let _lock = self.lock()?;
        let results = self.load_results()?;
        let (ds, split) = self.dataset()?;
        let sessions = eval_sessions(&split.test, &results, &ds.ground_truth)?;
        let (report, _) = evaluate(&sessions, self.config.inference.counting);
        report.save(&self.path("eval"))?;
        self.update_manifest(|m| {
            m.stages.insert(
                "eval".into(),
                StageSummary {
                    produced: 1,
                    ..Default::default()
                },
            );
        })?;
        Ok(report)
    }

    /// All stages in order.
    pub fn run_all(&self) -> Result<EvalReport, RunError> {
        self.ingest()?;
        self.embed()?;
        self.retrieve()?;
        self.demo()?;
        self.infer()?;
        self.eval()
    }

    /// A configuration that answers every model call of this run from its
    /// run log, under the providers recorded in the manifest.
    pub fn replay_config(&self) -> Result<RunConfig, RunError> {
        let m: Manifest = read_json(&require(self.path("manifest.json"), "ingest")?)?;
        let log = self.path("run_log.jsonl");
        let mut cfg = self.config.clone();
        for (role, pc) in [
            ("generator", &mut cfg.generator),
            ("rater1", &mut cfg.rater1),
            ("rater2", &mut cfg.rater2),
        ] {
            pc.kind = ProviderKind::Replay;
            pc.replay_log = Some(log.clone());
            pc.replay_provider = m.providers.get(role).cloned();
            pc.mock_script = None;
        }
        Ok(cfg)
    }
}

/// Side-by-side metrics of finished runs, labelled by directory name.
pub fn report(run_dirs: &[PathBuf]) -> Result<String, RunError> {
    let mut runs = Vec::new();
    for d in run_dirs {
        let eval = require(d.join("eval/report.json"), "eval")?;
        let name = d
            .file_name()
            .map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
        runs.push((name, EvalReport::load(eval.parent().expect("inside eval/"))?));
    }
    Ok(comparison_table(&runs))
}

#[cfg(test)]
mod tests;
