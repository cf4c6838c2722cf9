use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vtouch_core::analytics::{analyze_records, load_trial_records, AnalysisReport};
use vtouch_core::gaze::GazeSwitchConfig;
use vtouch_core::harness::TrialRecord;
use vtouch_core::selection::DwellConfig;
use vtouch_core::synth::{run_incar_block, run_pointing_block, simulate_drive, DriveConfig, SelectionModel, UserParams};
use vtouch_core::{CursorSource, ScreenSpec};
use vtouch_gateway::server::serve;
use vtouch_gateway::stdio::run_stdio;
use vtouch_gateway::SessionManager;

#[derive(Parser)]
#[command(name = "vtouch", version, about = "Virtual-touch pointing workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Laser,
    Imu,
    Ir,
    Gaze,
    PointerProxy,
}

impl From<Source> for CursorSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Laser => CursorSource::Laser,
            Source::Imu => CursorSource::Imu,
            Source::Ir => CursorSource::Ir,
            Source::Gaze => CursorSource::Gaze,
            Source::PointerProxy => CursorSource::PointerProxy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    Mechanical,
    Dwell,
    Gaze,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Adaptation {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Pretty,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run synthetic ring-task blocks and write one trial record per line.
    Point {
        #[arg(long, value_enum, default_value = "laser")]
        source: Source,
        /// Defaults to the usual switch for the source.
        #[arg(long, value_enum)]
        selection: Option<Selection>,
        #[arg(long, value_enum, default_value = "both")]
        adaptation: Adaptation,
        /// Repetitions of the distance by width grid.
        #[arg(long, default_value_t = 4)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Endpoint scatter as a fraction of the effective target width.
        #[arg(long)]
        noise_fraction: Option<f64>,
        #[arg(long)]
        keep_trajectory: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run synthetic in-car dashboard selections.
    Incar {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the lane-change drive and write the vehicle log.
    Drive {
        /// Select on the dashboard at every cue while driving.
        #[arg(long)]
        dual: bool,
        #[arg(long, default_value_t = 90.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Summarize a JSONL log of trial records or exported session logs.
    Analyze {
        /// Log files; `-` reads stdin.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "pretty")]
        format: Format,
    },
    /// Serve sessions over HTTP and WebSocket, or over stdin/stdout.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        stdio: bool,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_records(out: &mut dyn Write, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn default_selection(source: Source) -> SelectionModel {
    match source {
        Source::Imu => SelectionModel::Dwell(DwellConfig::imu()),
        Source::Ir => SelectionModel::Dwell(DwellConfig::ir()),
        Source::Gaze => SelectionModel::Gaze(GazeSwitchConfig::default()),
        Source::Laser | Source::PointerProxy => SelectionModel::Mechanical,
    }
}

fn selection_model(source: Source, selection: Option<Selection>) -> SelectionModel {
    match selection {
        None => default_selection(source),
        Some(Selection::Mechanical) => SelectionModel::Mechanical,
        Some(Selection::Gaze) => SelectionModel::Gaze(GazeSwitchConfig::default()),
        Some(Selection::Dwell) => match source {
            Source::Imu => SelectionModel::Dwell(DwellConfig::imu()),
            _ => SelectionModel::Dwell(DwellConfig::ir()),
        },
    }
}

fn read_logs(paths: &[PathBuf]) -> Result<Vec<TrialRecord>> {
    let mut records = Vec::new();
    for p in paths {
        let text = if p.as_os_str() == "-" {
            io::stdin().lock().lines().collect::<io::Result<Vec<_>>>()?.join("\n")
        } else {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        };
        records.extend(load_trial_records(&text).with_context(|| format!("parsing {}", p.display()))?);
    }
    Ok(records)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn print_pretty(out: &mut dyn Write, r: &AnalysisReport) -> Result<()> {
    writeln!(
        out,
        "{:<24} {:>6} {:>7} {:>9} {:>9} {:>8} {:>7} {:>8} {:>8} {:>6}",
        "group", "trials", "correct", "mean_ms", "median_ms", "sd_ms", "wrong%", "a_ms", "b_ms/bit", "r2"
    )?;
    for g in &r.groups {
        let s = g.summary.as_ref();
        let f = g.fitts.as_ref();
        writeln!(
            out,
            "{:<24} {:>6} {:>7} {:>9} {:>9} {:>8} {:>7.2} {:>8} {:>8} {:>6}",
            g.group,
            g.trials,
            g.correct,
            opt(s.map(|s| s.mean), 1),
            opt(s.map(|s| s.median), 1),
            opt(s.map(|s| s.sd), 1),
            g.wrong_selection_rate_pct,
            opt(f.map(|f| f.a_ms), 1),
            opt(f.map(|f| f.b_ms_per_bit), 1),
            opt(f.map(|f| f.r2), 3),
        )?;
    }
    if let Some(f) = &r.overall_fitts {
        writeln!(
            out,
            "\noverall fit: MT = {:.1} + {:.1} * ID  (r2 {:.3}, IP {} bit/s)",
            f.a_ms,
            f.b_ms_per_bit,
            f.r2,
            opt(f.ip_bits_per_s, 2)
        )?;
    }
    if let Some(fence) = &r.fence {
        writeln!(
            out,
            "outliers: {} removed outside [{:.1}, {:.1}] ms",
            fence.removed.len(),
            fence.lower_fence,
            fence.upper_fence
        )?;
    }
    if let Some(a) = &r.anova {
        writeln!(out, "anova: F({}, {}) = {:.3}, p = {:.4}", a.df_between, a.df_within, a.f, a.p)?;
    }
    for p in &r.pairwise {
        writeln!(
            out,
            "{} vs {}: t = {:.3}, df = {:.1}, p = {:.4}, p_bonf = {:.4}",
            p.a, p.b, p.test.t, p.test.df, p.test.p_two_sided, p.p_bonferroni
        )?;
    }
    Ok(())
}

fn print_csv(out: &mut dyn Write, r: &AnalysisReport) -> Result<()> {
    writeln!(out, "group,trials,correct,mean_ms,median_ms,sd_ms,wrong_pct,a_ms,b_ms_per_bit,r2")?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for g in &r.groups {
        let s = g.summary.as_ref();
        let f = g.fitts.as_ref();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            g.group,
            g.trials,
            g.correct,
            cell(s.map(|s| s.mean)),
            cell(s.map(|s| s.median)),
            cell(s.map(|s| s.sd)),
            g.wrong_selection_rate_pct,
            cell(f.map(|f| f.a_ms)),
            cell(f.map(|f| f.b_ms_per_bit)),
            cell(f.map(|f| f.r2)),
        )?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let screen = ScreenSpec::default();
    match cli.command {
        Command::Point {
            source,
            selection,
            adaptation,
            reps,
            seed,
            noise_fraction,
            keep_trajectory,
            out,
        } => {
            let mut params = UserParams {
                seed,
                ..UserParams::default()
            };
            if let Some(f) = noise_fraction {
                params.endpoint_noise_fraction = f;
            }
            params.validate()?;
            let model = selection_model(source, selection);
            let modes: &[bool] = match adaptation {
                Adaptation::On => &[true],
                Adaptation::Off => &[false],
                Adaptation::Both => &[false, true],
            };
            let mut w = output(&out)?;
            for &adaptive in modes {
                let mut records = run_pointing_block(&params, model, source.into(), adaptive, reps, screen)?;
                if !keep_trajectory {
                    records.iter_mut().for_each(|r| r.trajectory.clear());
                }
                write_records(&mut w, &records)?;
            }
        }
        Command::Incar { trials, seed, out } => {
            let params = UserParams {
                seed,
                ..UserParams::incar()
            };
            let mut records = run_incar_block(&params, trials, screen)?;
            records.iter_mut().for_each(|r| r.trajectory.clear());
            write_records(&mut *output(&out)?, &records)?;
        }
        Command::Drive {
            dual,
            duration_s,
            seed,
            out,
        } => {
            if !(duration_s > 0.0) {
                bail!("--duration-s must be positive");
            }
            let params = UserParams {
                seed,
                ..UserParams::incar()
            };
            let cfg = DriveConfig {
                duration_ms: duration_s * 1000.0,
                dual_task: dual,
                seed,
                ..DriveConfig::default()
            };
            let run = simulate_drive(&params, &cfg, screen)?;
            let mut w = output(&out)?;
            for e in &run.log {
                serde_json::to_writer(&mut w, e)?;
                writeln!(w)?;
            }
            w.flush()?;
            let mean_rt = (!run.response_times_ms.is_empty())
                .then(|| run.response_times_ms.iter().sum::<f64>() / run.response_times_ms.len() as f64);
            eprintln!(
                "mean lane deviation {:.3} m, steering sd {:.4} rad, max speed {:.2} m/s, {} cues, mean response {} ms",
                run.mean_deviation_m,
                run.steering_sd_rad,
                run.max_speed_mps,
                run.cues.cue_t_ms.len(),
                opt(mean_rt, 1)
            );
        }
        Command::Analyze { logs, format } => {
            let records = read_logs(&logs)?;
            if records.is_empty() {
                bail!("no trial records found");
            }
            let report = analyze_records(&records);
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match format {
                Format::Pretty => print_pretty(&mut w, &report)?,
                Format::Csv => print_csv(&mut w, &report)?,
                Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?,
            }
        }
        Command::Serve { port, host, stdio } => {
            let manager = Arc::new(SessionManager::new());
            if stdio {
                run_stdio(&manager, BufReader::new(io::stdin().lock()), io::stdout().lock())?;
            } else {
                let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
                let rt = tokio::runtime::Runtime::new()?;
                eprintln!("listening on {addr}");
                rt.block_on(serve(addr, manager))?;
            }
        }
    }
    Ok(())
}
