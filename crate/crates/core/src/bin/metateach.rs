use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use metateach::analysis::group_report_labeled;
use metateach::config::ExperimentConfig;
use metateach::feedback::Mode;
use metateach::session::client::drive_scripted;
use metateach::session::server::{Server, ServerConfig};
use metateach::session::{run_scripted_session, SessionLog};
use metateach::teacher::TeacherConfig;
use metateach::{Error, LOG_SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "metateach", version, about = "Preference learning with feedback meta-modalities on simulated minigolf")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PreferenceOnly,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PreferenceOnly => Mode::PreferenceOnly,
            ModeArg::Full => Mode::FullModality,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TeacherArg {
    Oracle,
    Noisy,
}

#[derive(Subcommand)]
enum Command {
    /// Run scripted sessions and write one JSONL log per seed.
    Run {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Number of sessions; seeds run from --first-seed upward.
        #[arg(long, default_value_t = 30)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Overrides the trial count from the config.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the teacher noise from the config.
        #[arg(long, value_enum)]
        teacher: Option<TeacherArg>,
    },
    /// Compare two directories of finished session logs.
    Analyze {
        #[arg(long)]
        group_a: PathBuf,
        #[arg(long)]
        group_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve live sessions over TCP until SIGINT or SIGTERM.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port; the bound address is printed either way.
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Most permissive mode clients may start.
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Directory for streamed session logs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive one session on a running server with the scripted teacher.
    Drive {
        #[arg(long)]
        addr: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        session_id: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        teacher: Option<TeacherArg>,
    },
}

#[derive(Serialize)]
struct Manifest {
    schema: &'static str,
    mode: Mode,
    seeds: Vec<u64>,
    logs: Vec<String>,
    config: ExperimentConfig,
}

fn load_config(path: Option<&Path>) -> metateach::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn teacher_config(base: &TeacherConfig, mode: Mode, arg: Option<TeacherArg>) -> TeacherConfig {
    let mut cfg = TeacherConfig { mode, ..base.clone() };
    match arg {
        Some(TeacherArg::Oracle) => cfg.noise_temperature = 0.0,
        Some(TeacherArg::Noisy) if cfg.noise_temperature == 0.0 => {
            cfg.noise_temperature = TeacherConfig::NOISY_TEMPERATURE;
        }
        _ => {}
    }
    cfg
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn run(
    mode: Mode,
    seeds: u64,
    first_seed: u64,
    trials: Option<usize>,
    config: Option<&Path>,
    out: &Path,
    teacher: Option<TeacherArg>,
) -> metateach::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(t) = trials {
        cfg.session.trials = t;
    }
    cfg.validate()?;
    let teacher_cfg = teacher_config(&cfg.teacher, mode, teacher);
    teacher_cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
    let names = seed_list
        .par_iter()
        .map(|&seed| {
            let log = run_scripted_session(mode, &teacher_cfg, &cfg, seed)?;
            let name = format!("{mode}-{seed}.jsonl");
            log.write(&out.join(&name))?;
            Ok(name)
        })
        .collect::<metateach::Result<Vec<_>>>()?;

    let manifest = Manifest {
        schema: LOG_SCHEMA_VERSION,
        mode,
        seeds: seed_list,
        logs: names,
        config: cfg,
    };
    let path = out.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    println!("wrote {} logs to {}", manifest.logs.len(), out.display());
    Ok(())
}

/// Loads every finished log in `dir`; truncated logs are reported and skipped.
fn load_group(dir: &Path) -> metateach::Result<Vec<SessionLog>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Io(format!("{}: no .jsonl logs found", dir.display())));
    }
    let mut logs = Vec::new();
    for p in paths {
        let log = SessionLog::read(&p)?;
        if log.is_finished() {
            log.validate_finished()?;
            logs.push(log);
        } else {
            eprintln!("skipping unfinished log {}", p.display());
        }
    }
    Ok(logs)
}

fn label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn analyze(group_a: &Path, group_b: &Path, out: &Path) -> metateach::Result<()> {
    let a = load_group(group_a)?;
    let b = load_group(group_b)?;
    let report = group_report_labeled((&label(group_a), &a), (&label(group_b), &b))?;
    report.write(out)?;
    print!("{}", report.summary_text());
    Ok(())
}

fn serve(host: &str, port: u16, config: Option<&Path>, mode: Mode, out: Option<PathBuf>) -> metateach::Result<()> {
    let experiment = load_config(config)?;
    let server = Server::bind((host, port), ServerConfig { mode, experiment, out_dir: out })?;
    let shutdown = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, Arc::clone(&shutdown))?;
    }
    println!("listening on {}", server.local_addr()?);
    std::io::stdout().flush()?;
    let truncated = server.run(&shutdown)?;
    for id in &truncated {
        eprintln!("truncated unfinished session {id}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            mode,
            seeds,
            first_seed,
            trials,
            config,
            out,
            teacher,
        } => run(mode.into(), seeds, first_seed, trials, config.as_deref(), &out, teacher),
        Command::Analyze { group_a, group_b, out } => analyze(&group_a, &group_b, &out),
        Command::Serve {
            host,
            port,
            config,
            mode,
            out,
        } => serve(&host, port, config.as_deref(), mode.into(), out),
        Command::Drive {
            addr,
            mode,
            seed,
            session_id,
            config,
            teacher,
        } => load_config(config.as_deref()).and_then(|cfg| {
            let t = teacher_config(&cfg.teacher, mode.into(), teacher);
            let id = drive_scripted(addr.as_str(), t, cfg.course, seed, session_id)?;
            println!("finished session {id}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Validation(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
