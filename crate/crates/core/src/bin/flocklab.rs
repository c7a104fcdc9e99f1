use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use flocklab::experiments::{self, ExperimentConfig, ExperimentError, PlotKind, PlotStyle, Preset};
use flocklab::par::{self, Execution};

#[derive(Parser)]
#[command(name = "flocklab", version, about = "Decentralized flock dynamics experiments")]
struct Cli {
    /// Process work items on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset.
    Preset {
        #[arg(value_enum)]
        name: PresetArg,
        #[arg(long, default_value = "flocklab-out")]
        out: PathBuf,
        /// Follower count N for the linear presets (default 100).
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Render an SVG plot from a CSV written by `run` or `preset`.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Output file; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Space-time plots: shift column k by -k * SPACING.
        #[arg(long)]
        offset_spacing: Option<f64>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig2,
    Fig3,
    Fig4,
    Turn,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Spacetime,
    Response,
    Spectrum,
}

fn configure_threads() -> Result<(), ExperimentError> {
    let Ok(raw) = std::env::var("FLOCKLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ExperimentError::Config {
        line: None,
        message: format!("FLOCKLAB_THREADS must be a positive integer, got {raw:?}"),
    })?;
    par::init_threads(threads).map_err(|message| ExperimentError::Config { line: None, message })
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    configure_threads()?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("flocklab-out").join(cfg.kind.name()));
            let summary = experiments::run(&cfg, &dir, exec)?;
            println!("{} -> {}", cfg.kind.name(), dir.display());
            for (k, v) in &summary.results {
                println!("  {k} = {v}");
            }
        }
        Command::Preset { name, out, scale } => {
            let preset = match name {
                PresetArg::Fig2 => Preset::Fig2,
                PresetArg::Fig3 => Preset::Fig3,
                PresetArg::Fig4 => Preset::Fig4,
                PresetArg::Turn => Preset::Turn,
            };
            if preset == Preset::Turn && scale.is_some() {
                log::warn!("--scale has no effect on the turn preset");
            }
            for (sub, summary) in experiments::run_preset(preset, &out, scale, exec)? {
                println!("{}/{sub} -> {}", preset.name(), summary.output_dir.display());
            }
        }
        Command::Plot { csv, kind, out, offset_spacing, title } => {
            let text = std::fs::read_to_string(&csv).map_err(|e| ExperimentError::Config {
                line: None,
                message: format!("cannot read {}: {e}", csv.display()),
            })?;
            let kind = match kind {
                KindArg::Spacetime => PlotKind::SpaceTime,
                KindArg::Response => PlotKind::Response,
                KindArg::Spectrum => PlotKind::Spectrum,
            };
            let style = PlotStyle { title, offset_spacing, ..PlotStyle::default() };
            let svg = experiments::plot(kind, &text, &style).map_err(|e| ExperimentError::Config {
                line: None,
                message: format!("{}: {e}", csv.display()),
            })?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&out, svg).map_err(|e| ExperimentError::Io { path: out.clone(), message: e.to_string() })?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flocklab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
