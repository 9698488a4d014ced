//! `obtrack` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use obtrack_core::doe::{block_by_name, campaign, default_layout};
use obtrack_core::io::report::{campaign_table, metrics_table, mode_label, to_json, EvaluationOutput};
use obtrack_core::io::sheet::{parse_sheet, write_sheet};
use obtrack_core::io::{read_stream, write_stream, RunConfig};
use obtrack_core::pipeline::{frame_pairs, run_campaign, track_stream};
use obtrack_core::simulate::{simulate_trial, NoiseModel};
use obtrack_core::{evaluate, Error, EvalMode, Result, StreamKind};

#[derive(Parser)]
#[command(name = "obtrack", version, about = "Oriented-box multi-object tracking, simulation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trial design.
    Doe {
        #[command(subcommand)]
        action: DoeAction,
    },
    /// Simulate one trial into ground-truth and detection stream files.
    Simulate {
        #[arg(long)]
        trial: u32,
        #[arg(long)]
        seed: u64,
        /// Trial sheet to pick the trial from; defaults to the built-in campaign.
        #[arg(long)]
        sheet: Option<PathBuf>,
        #[arg(long, env = "OBTRACK_CONFIG")]
        config: Option<PathBuf>,
        /// Emit detections without any corruption.
        #[arg(long)]
        zero_noise: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Track a detection stream; writes confirmed tracklets per frame.
    Track {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "OBTRACK_CONFIG")]
        config: Option<PathBuf>,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Defaults to `tracklet` for tracklet streams, else `detection`.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Average HOTA over IoU thresholds 0.05..0.95.
        #[arg(long)]
        alpha_sweep: bool,
        #[arg(long, env = "OBTRACK_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Full simulated campaign.
    Campaign {
        #[command(subcommand)]
        action: CampaignAction,
    },
}

#[derive(Subcommand)]
enum DoeAction {
    /// Write the trial sheet as JSON.
    Gen {
        /// Only this layout block (e.g. single-msu).
        #[arg(long)]
        block: Option<String>,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CampaignAction {
    /// Simulate, track and evaluate every trial.
    Run {
        #[arg(long)]
        seed: u64,
        #[arg(long, env = "OBTRACK_CONFIG")]
        config: Option<PathBuf>,
        /// Directory for campaign-report.json and campaign-report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Detection,
    Tracklet,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Doe {
            action: DoeAction::Gen { block, out },
        } => {
            let layout = match block {
                Some(name) => vec![block_by_name(&name)?],
                None => default_layout(),
            };
            let trials = campaign(&layout, &RunConfig::default().classes)?;
            emit(out.as_deref(), &write_sheet(&trials))
        }
        Command::Simulate {
            trial,
            seed,
            sheet,
            config,
            zero_noise,
            out_dir,
        } => {
            let cfg = RunConfig::resolve(config.as_deref())?;
            let trials = match sheet {
                Some(p) => parse_sheet(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?,
                None => campaign(&default_layout(), &cfg.classes)?,
            };
            let spec = trials
                .iter()
                .find(|t| t.trial_id == trial)
                .ok_or_else(|| Error::Config(format!("unknown trial id {trial}")))?;
            let noise = if zero_noise { NoiseModel::zero() } else { cfg.noise.clone() };
            let sim = simulate_trial(spec, &cfg.sim, &cfg.classes, &noise, &cfg.tracker.sensor_offset, seed)?;
            let dir = out_dir.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("."));
            let gt_path = dir.join(format!("trial-{trial:02}-gt.jsonl"));
            let det_path = dir.join(format!("trial-{trial:02}-detections.jsonl"));
            write_file(&gt_path, &write_stream(&sim.ground_truth))?;
            write_file(&det_path, &write_stream(&sim.detections))?;
            println!("{}\n{}", gt_path.display(), det_path.display());
            Ok(())
        }
        Command::Track { input, config, output } => {
            let cfg = RunConfig::resolve(config.as_deref())?;
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            if text.trim().is_empty() {
                return emit(output.as_deref(), "");
            }
            let detections = obtrack_core::io::parse_stream(&text)?;
            let tracklets = track_stream(&detections, &cfg.tracker, &cfg.classes)?;
            emit(output.as_deref(), &write_stream(&tracklets))
        }
        Command::Evaluate {
            gt,
            pred,
            mode,
            json,
            alpha_sweep,
            config,
        } => {
            let cfg = RunConfig::resolve(config.as_deref())?;
            let gt = read_stream(&gt)?;
            let pred = read_stream(&pred)?;
            let mode = match mode {
                Some(Mode::Detection) => EvalMode::Detection,
                Some(Mode::Tracklet) => EvalMode::Tracklet,
                None if pred.kind == StreamKind::Tracklets => EvalMode::Tracklet,
                None => EvalMode::Detection,
            };
            let mut opts = cfg.metrics.options(mode);
            opts.alpha_sweep |= alpha_sweep;
            let frames = frame_pairs(&gt, &pred, &cfg.tracker.sensor_offset)?;
            let report = evaluate(&frames, &opts)?;
            if let Some(path) = json {
                let out = EvaluationOutput {
                    mode: mode_label(mode),
                    alpha: opts.alpha,
                    alpha_sweep: opts.alpha_sweep,
                    report: &report,
                };
                write_file(&path, &to_json(&out))?;
            }
            emit(None, &metrics_table(&report, mode))
        }
        Command::Campaign {
            action: CampaignAction::Run { seed, config, out },
        } => {
            let cfg = RunConfig::resolve(config.as_deref())?;
            let trials = campaign(&default_layout(), &cfg.classes)?;
            let report = run_campaign(&trials, &cfg, seed)?;
            let table = campaign_table(&report);
            let dir = out.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("."));
            write_file(&dir.join("campaign-report.json"), &to_json(&report))?;
            write_file(&dir.join("campaign-report.txt"), &table)?;
            emit(None, &table)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
