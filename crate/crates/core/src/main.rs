use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use feedlab::analytics::{build_report, load_survey_csv, ReportOptions};
use feedlab::model::RoomCode;
use feedlab::service::log::data_dir;
use feedlab::service::{replay_file, server, Hub, RoomSetup, SystemClock};
use feedlab::sim::{simulate, SimConfig};

#[derive(Parser)]
#[command(name = "feedlab", version, about = "Classroom social-media mechanism simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the classroom server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Image manifest; defaults to the bundled sample.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Room config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Listen address.
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
        /// Seed for room codes and session tokens; random when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a simulated classroom and write its log.
    Simulate {
        #[arg(long)]
        room: String,
        #[arg(long)]
        students: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write the final snapshot here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the final snapshot of a room from its log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze pre/post questionnaire CSVs.
    Stats {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this Likert item.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=11))]
        item: Option<u8>,
        /// Only this open question.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        question: Option<u8>,
        /// CSV with columns `rater_a,rater_b` for inter-rater agreement.
        #[arg(long)]
        raters: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve { port, manifest, config, host, seed } => {
            let setup = RoomSetup::load(config.as_deref(), manifest.as_deref())?;
            let dir = data_dir();
            let seed = seed.unwrap_or_else(rand::random);
            let hub = Hub::new(Arc::new(SystemClock), seed, Some(dir.clone()));
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            tracing::info!(data_dir = %dir.display(), "room logs");
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(addr, hub, setup))?;
        }
        Command::Simulate { room, students, steps, seed, config, manifest, out } => {
            let setup = RoomSetup::load(config.as_deref(), manifest.as_deref())?;
            let room = RoomCode::new(room)?;
            let started = std::time::Instant::now();
            let report = simulate(setup, &SimConfig::new(room, students, steps, seed), Some(&data_dir()))?;
            if let Some(out) = out {
                write(&out, &report.snapshot.to_json())?;
            }
            let log = report.log_path.as_deref().map_or_else(String::new, |p| p.display().to_string());
            println!(
                "room {} | {} events | {} frames in, {} frames out, {} errors | log {} | {:.2?}",
                report.room,
                report.events,
                report.frames_sent,
                report.frames_received,
                report.errors,
                log,
                started.elapsed()
            );
        }
        Command::Replay { log, config, manifest, out } => {
            let setup = RoomSetup::load(config.as_deref(), manifest.as_deref())?;
            let snap = replay_file(&log, &setup)?;
            write(&out, &snap.to_json())?;
            println!("room {} | seq {} | snapshot {}", snap.room, snap.seq, out.display());
        }
        Command::Stats { pre, post, out, item, question, raters } => {
            let opts = ReportOptions {
                item: item.map(usize::from),
                question: question.map(usize::from),
                raters: raters.as_deref().map(load_raters).transpose()?,
            };
            let report = build_report(load_survey_csv(&pre)?, load_survey_csv(&post)?, &opts)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write(&out, &text)?;
            println!("{} pre rows, {} post rows | report {}", report.pre_rows, report.post_rows, out.display());
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Deserialize)]
struct RaterRow {
    rater_a: String,
    rater_b: String,
}

fn load_raters(path: &Path) -> anyhow::Result<(Vec<String>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for row in rdr.deserialize::<RaterRow>() {
        let row = row?;
        a.push(row.rater_a);
        b.push(row.rater_b);
    }
    if a.is_empty() {
        bail!("{} has no rater rows", path.display());
    }
    Ok((a, b))
}
