//! Command-line front end: simulate, analyze, serve, export.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use farmgame_core::agents::{Archetype, BatteryPlan};
use farmgame_core::clustering::matched_accuracy;
use farmgame_core::embedding::{Disconnected, EmbeddingError};
use farmgame_core::metrics::trajectory;

use crate::battery::{parse_counts, read_labels, run_battery, write_labels};
use crate::events::{read_sessions_file, write_sessions};
use crate::pipeline::{analyze, write_outputs, AnalysisError};
use crate::service::{router, system_clock, SessionService};
use crate::settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "farmgame", version, about = "Farm biosecurity game: agent batteries, analysis and session service")]
pub struct Cli {
    /// TOML file with [game], [service], [analysis] and [simulate] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Play synthetic agents and write their session logs.
    Simulate(SimulateArgs),
    /// Run the behavioral analysis over session logs.
    Analyze(AnalyzeArgs),
    /// Host live sessions over HTTP.
    Serve(ServeArgs),
    /// Write complete sessions from a service data directory as JSON Lines.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Agent counts, e.g. RA=250,RT=250,LRA=250,LRT=250.
    #[arg(long)]
    pub agents: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON Lines file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth label file; defaults to <out stem>.labels.csv.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Per-round noise on every archetype's invest probability.
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// Inclusive range of cluster counts, e.g. 1..10.
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<(usize, usize)>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "analysis")]
    pub out_dir: PathBuf,
    /// Join disconnected neighbor-graph components instead of failing.
    #[arg(long)]
    pub bridge_components: bool,
    /// Ground-truth labels to score the clustering against.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Only sessions created at or after this time (ms since the epoch).
    #[arg(long)]
    pub since: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected LOW..HIGH, got {s:?}"))?;
    let lo: usize = a.trim().parse().map_err(|_| format!("bad lower bound {a:?}"))?;
    let hi: usize = b.trim().parse().map_err(|_| format!("bad upper bound {b:?}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range {s:?} must satisfy 1 <= LOW <= HIGH"));
    }
    Ok((lo, hi))
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Failure { code: 2, message: m.to_string() }
    }
    fn environment(m: impl ToString) -> Self {
        Failure { code: 3, message: m.to_string() }
    }
    fn data(m: impl ToString) -> Self {
        Failure { code: 4, message: m.to_string() }
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut settings = Settings::load(cli.config.as_deref()).map_err(Failure::usage)?;
    match cli.command {
        Command::Simulate(a) => simulate(a, &mut settings),
        Command::Analyze(a) => analyze_cmd(a, &mut settings),
        Command::Serve(a) => serve(a, &mut settings),
        Command::Export(a) => export(a, &mut settings),
    }
}

fn default_labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sessions".into());
    out.with_file_name(format!("{stem}.labels.csv"))
}

fn simulate(a: SimulateArgs, s: &mut Settings) -> Result<(), Failure> {
    let agents = a
        .agents
        .or(s.simulate.agents.clone())
        .ok_or_else(|| Failure::usage("--agents is required (e.g. RA=250,RT=250,LRA=250,LRT=250)"))?;
    let counts = parse_counts(&agents).map_err(Failure::usage)?;
    let seed = a.seed.or(s.simulate.seed).unwrap_or(0);
    let out = a
        .out
        .or(s.simulate.out.clone())
        .unwrap_or_else(|| PathBuf::from("sessions.jsonl"));
    let mut plan = BatteryPlan::with_counts(counts);
    if let Some(sd) = a.noise_sd {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Failure::usage("--noise-sd must be a non-negative number"));
        }
        plan = plan.map_specs(|mut spec| {
            spec.archetype.noise_sd = sd;
            spec
        });
    }
    let sessions = run_battery(&plan, seed, &s.game).map_err(Failure::data)?;
    let logs: Vec<_> = sessions.iter().map(|x| x.log.clone()).collect();
    let file = File::create(&out).map_err(|e| Failure::environment(format!("{}: {e}", out.display())))?;
    write_sessions(BufWriter::new(file), &logs).map_err(Failure::environment)?;
    let labels = a.labels.unwrap_or_else(|| default_labels_path(&out));
    let file = File::create(&labels).map_err(|e| Failure::environment(format!("{}: {e}", labels.display())))?;
    write_labels(BufWriter::new(file), &sessions).map_err(Failure::environment)?;

    println!("sessions: {}", logs.len());
    println!("infections: {}", logs.iter().map(|l| l.infection_count()).sum::<usize>());
    for arch in Archetype::ALL {
        let rho: Vec<f64> = sessions
            .iter()
            .filter(|x| x.archetype == arch)
            .filter_map(|x| trajectory(&x.log).ok())
            .flat_map(|t| t.rho)
            .collect();
        if !rho.is_empty() {
            println!("mean rho {arch}: {:.4}", rho.iter().sum::<f64>() / rho.len() as f64);
        }
    }
    println!("wrote {} and {}", out.display(), labels.display());
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs, s: &mut Settings) -> Result<(), Failure> {
    let opts = &mut s.analysis;
    if let Some(k) = a.k_neighbors {
        opts.neighbors = k;
    }
    if let Some((lo, hi)) = a.k_range {
        opts.k_min = lo;
        opts.k_max = hi;
    }
    if let Some(seed) = a.seed {
        opts.seed = seed;
    }
    if a.bridge_components {
        opts.disconnected = Disconnected::Bridge;
    }
    let sessions = read_sessions_file(&a.input).map_err(|e| match e {
        crate::events::DecodeError::Io(io) => Failure::environment(format!("{}: {io}", a.input.display())),
        other => Failure::data(other),
    })?;
    let result = analyze(&sessions, opts).map_err(|e| match e {
        AnalysisError::TooFewSessions { .. } | AnalysisError::KRange(..) => Failure::usage(e),
        AnalysisError::Embedding(EmbeddingError::Disconnected { .. }) => Failure::data(format!(
            "{e}; rerun with a larger --k-neighbors (or --bridge-components to join the pieces)"
        )),
        other => Failure::data(other),
    })?;
    write_outputs(&result, &a.out_dir).map_err(|e| Failure::environment(format!("{}: {e}", a.out_dir.display())))?;

    println!("players: {}", sessions.len());
    if result.components > 1 {
        println!("neighbor graph components bridged: {}", result.components);
    }
    println!("selected K: {}", result.elbow.selected);
    for (c, size) in result.clustering.cluster_sizes().iter().enumerate() {
        println!(
            "cluster {c}: {} players, label {}, median rho {:.3}, slope {:+.4}",
            size,
            result.group_name(c),
            result.labeling.medians[c],
            result.labeling.slopes[c]
        );
    }
    let labels = a.labels.or_else(|| {
        let p = default_labels_path(&a.input);
        p.exists().then_some(p)
    });
    if let Some(path) = labels {
        let truth = read_labels(&path).map_err(Failure::data)?;
        let by_id: std::collections::HashMap<_, _> = truth.into_iter().collect();
        let pairs: Vec<(usize, usize)> = sessions
            .iter()
            .enumerate()
            .filter_map(|(i, l)| by_id.get(&l.session_id).map(|a| (result.clustering.assignment[i], a.index())))
            .collect();
        let (assign, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        println!("matched accuracy vs {}: {:.4}", path.display(), matched_accuracy(&assign, &truth));
    }
    println!("wrote {}", a.out_dir.display());
    Ok(())
}

fn open_service(s: &Settings, data_dir: Option<PathBuf>) -> Result<SessionService, Failure> {
    let dir = data_dir.unwrap_or_else(|| s.service.data_dir.clone());
    SessionService::open(&dir, s.game.clone(), s.service.abandon_after_minutes, system_clock()).map_err(|e| match e {
        crate::service::ServiceError::Storage(io) => Failure::environment(format!("{}: {io}", dir.display())),
        other => Failure::data(other),
    })
}

fn serve(a: ServeArgs, s: &mut Settings) -> Result<(), Failure> {
    let port = a.port.unwrap_or(s.service.port);
    let service = Arc::new(open_service(s, a.data_dir)?);
    let rt = tokio::runtime::Runtime::new().map_err(Failure::environment)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| Failure::environment(format!("cannot bind port {port}: {e}")))?;
        eprintln!("listening on {}", listener.local_addr().map_err(Failure::environment)?);
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(Failure::environment)
    })
}

fn export(a: ExportArgs, s: &mut Settings) -> Result<(), Failure> {
    let service = open_service(s, a.data_dir)?;
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(Failure::environment)?;
    let bytes = rt.block_on(service.export(a.since)).map_err(Failure::data)?;
    match a.out {
        Some(p) => std::fs::write(&p, bytes).map_err(|e| Failure::environment(format!("{}: {e}", p.display()))),
        None => io::stdout().lock().write_all(&bytes).map_err(Failure::environment),
    }
}
