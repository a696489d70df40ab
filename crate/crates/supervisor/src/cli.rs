use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use narravine_core::fsm::Phase;
use narravine_core::scene::Scene;
use narravine_core::session::{replay_scene, SessionOutcome};
use narravine_core::store::{compute_metrics, FailureKind, Outcome};
use narravine_core::SessionConfig;
use serde::Serialize;
use tracing::info;

use crate::analyze::{analyze, AnalyzeInputs};
use crate::error::SupervisorError;
use crate::gateway;
use crate::hub::{Hub, StartRequest};
use crate::modules::Modules;

#[derive(Debug, Parser)]
#[command(name = "narravine", version, about = "Cube storytelling session supervisor")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Session configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<u32>,
    #[arg(long, global = true)]
    pub participant: Option<String>,
    /// Use the mock generative models with this fixture.
    #[arg(long, global = true, value_name = "FIXTURE")]
    pub mock_genai: Option<PathBuf>,
    /// First port for the middleware's allocations.
    #[arg(long, global = true)]
    pub port_base: Option<u16>,
    /// Sticker manifest, replacing the built-in one.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boot the modules, serve the operator gateway and run a session.
    Run {
        /// Serve the gateway and wait for a start request.
        #[arg(long)]
        idle: bool,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Scene script, or "interactive" for console-driven sessions.
        #[arg(long)]
        scene: Option<String>,
        /// Real seconds per session second.
        #[arg(long)]
        time_scale: Option<f64>,
        #[arg(long)]
        session_dir: Option<PathBuf>,
    },
    /// Run a scene headless on a simulated clock and print a summary.
    Replay {
        scene: PathBuf,
        /// Persist the session here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute session metrics and questionnaire statistics.
    Analyze {
        session_dir: PathBuf,
        #[arg(long)]
        sus: Option<PathBuf>,
        #[arg(long)]
        ueq: Option<PathBuf>,
        #[arg(long)]
        votes: Option<PathBuf>,
    },
    /// Load and validate the configuration, then print it.
    ValidateConfig,
}

impl GlobalArgs {
    /// The configuration file, if any, with command-line overrides on top.
    pub fn config(&self) -> Result<SessionConfig, SupervisorError> {
        let mut cfg = match &self.config {
            Some(path) => SessionConfig::load(path)?,
            None => SessionConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut SessionConfig) {
        if let Some(n) = self.trials {
            cfg.trials_total = n;
        }
        if let Some(p) = &self.participant {
            cfg.participant_id = p.clone();
        }
        if let Some(f) = &self.mock_genai {
            cfg.genai.transport = narravine_core::config::TransportKind::Mock;
            cfg.genai.fixture = Some(f.clone());
        }
        if let Some(b) = self.port_base {
            cfg.port_base = Some(b);
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TrialLine {
    pub trial_index: u32,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
    pub cubes: Vec<String>,
}

/// What `replay` prints.
#[derive(Debug, Serialize)]
pub struct ReplaySummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    pub aborted: bool,
    /// Phases entered, in order, starting after Idle.
    pub phases: Vec<Phase>,
    pub transitions: usize,
    pub trials: Vec<TrialLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<narravine_core::store::SessionMetrics>,
    pub runtime_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_dir: Option<PathBuf>,
}

pub fn phase_sequence(outcome: &SessionOutcome) -> Vec<Phase> {
    let mut phases: Vec<Phase> = Vec::new();
    let mut current = Phase::Idle;
    for r in outcome.transitions.iter().filter(|r| r.rejected.is_none()) {
        if r.phase_to != current {
            phases.push(r.phase_to);
            current = r.phase_to;
        }
    }
    phases
}

pub fn summarize(scene: Option<String>, outcome: &SessionOutcome, runtime: Duration, dir: Option<&Path>) -> ReplaySummary {
    ReplaySummary {
        scene,
        aborted: outcome.aborted,
        phases: phase_sequence(outcome),
        transitions: outcome.transitions.len(),
        trials: outcome
            .records
            .iter()
            .map(|r| TrialLine {
                trial_index: r.trial_index,
                outcome: r.outcome,
                failure_kind: r.failure_kind,
                cubes: r.cube_sequence.iter().map(|c| c.as_str().to_string()).collect(),
            })
            .collect(),
        metrics: compute_metrics(&outcome.records).ok(),
        runtime_ms: runtime.as_millis(),
        session_dir: dir.map(Path::to_path_buf),
    }
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

/// Replays `path`. Settings come from the configuration, then the scene,
/// then the command line.
pub fn replay(global: &GlobalArgs, path: &Path, out: Option<&Path>) -> Result<ReplaySummary, SupervisorError> {
    let cfg = global.config()?;
    let mut scene = Scene::load(path, cfg.perception.seed)?;
    if let Some(n) = global.trials {
        scene.settings.trials_total = Some(n);
    }
    if let Some(p) = &global.participant {
        scene.settings.participant_id = Some(p.clone());
    }
    if let Some(f) = &global.mock_genai {
        scene.settings.genai_fixture = Some(f.clone());
    }
    let started = Instant::now();
    let outcome = replay_scene(&cfg, &scene, out, None)?;
    Ok(summarize(scene.name.clone(), &outcome, started.elapsed(), out))
}

fn run(
    global: &GlobalArgs,
    idle: bool,
    listen: SocketAddr,
    request: StartRequest,
) -> Result<(), SupervisorError> {
    let cfg = global.config()?;
    let modules = Modules::boot(&listen.ip().to_string(), cfg.port_base)?;
    for port in modules.ports() {
        info!(name = %port.name, "port {}:{}", port.host, port.tcp_port);
    }
    let hub = Hub::new(cfg, Some(modules))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(SupervisorError::Io)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| SupervisorError::ModuleBoot(format!("gateway cannot bind {listen}: {e}")))?;
        let addr = listener.local_addr()?;
        eprintln!("gateway listening on http://{addr}");
        if !idle {
            let hub = hub.clone();
            tokio::task::spawn_blocking(move || hub.start(&request))
                .await
                .expect("start does not panic")
                .map_err(|e| match e {
                    crate::hub::StartError::Config(c) => SupervisorError::Config(c),
                    crate::hub::StartError::Session(s) => s.into(),
                    crate::hub::StartError::AlreadyRunning => unreachable!("fresh hub"),
                })?;
        }
        let waiter = hub.clone();
        let shutdown = async move {
            let finished = async {
                if idle {
                    std::future::pending::<()>().await;
                }
                let w = waiter.clone();
                let _ = tokio::task::spawn_blocking(move || w.wait_idle(None)).await;
            };
            tokio::select! {
                _ = finished => {}
                _ = tokio::signal::ctrl_c() => {
                    waiter.shutdown();
                    let w = waiter.clone();
                    let _ = tokio::task::spawn_blocking(move || w.wait_idle(Some(Duration::from_secs(10)))).await;
                }
            }
        };
        gateway::serve(listener, hub.clone(), shutdown).await?;
        Ok::<(), SupervisorError>(())
    })?;
    let snapshot = hub.snapshot();
    if let Some(summary) = &snapshot.summary {
        print_json(summary);
        if let Some(e) = &summary.error {
            return Err(SupervisorError::Session(narravine_core::session::SessionError::FatalModuleLoss(e.clone())));
        }
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), SupervisorError> {
    let g = &cli.global;
    match cli.command {
        Command::Run {
            idle,
            listen,
            scene,
            time_scale,
            session_dir,
        } => run(
            g,
            idle,
            listen,
            StartRequest {
                scene,
                time_scale,
                session_dir,
                ..StartRequest::default()
            },
        ),
        Command::Replay { scene, out } => {
            print_json(&replay(g, &scene, out.as_deref())?);
            Ok(())
        }
        Command::Analyze {
            session_dir,
            sus,
            ueq,
            votes,
        } => {
            print_json(&analyze(&session_dir, &AnalyzeInputs { sus, ueq, votes })?);
            Ok(())
        }
        Command::ValidateConfig => {
            let cfg = g.config()?;
            cfg.manifest()?;
            print_json(&cfg);
            Ok(())
        }
    }
}
