use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use taxi_regions::pipeline::{fit_report, read_samples, write_atomic, Pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "taxi-regions", version, about = "Taxi traces to trips, regions, functional labels and DTN carrier selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Override a config value, e.g. `trips.d_threshold_m=75`. Repeatable.
    #[arg(long = "stage-override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw traces into canonical points.
    Ingest(Common),
    /// Segment trajectories, detect stops and extract trips.
    Trips(Common),
    /// Build the quad-tree and emit visit/departure events.
    Regions(Common),
    /// Fit trip-length, trip-duration and stay-time distributions.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Fit a standalone file of samples (one per line) instead of pipeline artifacts.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Lower cutoff for the power-law families when fitting `--samples`.
        #[arg(long)]
        x_min: Option<f64>,
    },
    /// Mine hourly frequent itemsets and label regions.
    Functions(Common),
    /// Run the carrier-selection simulations.
    Dtn(Common),
    /// Run every stage in order.
    All(Common),
}

fn pipeline(common: &Common) -> Result<Pipeline> {
    let Some(path) = &common.config else {
        bail!("--config is required");
    };
    let cfg = PipelineConfig::load(path, &common.overrides)?;
    let out = match (&common.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("out"),
    };
    Ok(Pipeline::new(cfg, out)?)
}

fn run(common: &Common, stages: &[Stage]) -> Result<()> {
    let p = pipeline(common)?;
    for report in p.run(stages)? {
        println!("[{}] {}", report.stage, report.outputs.join(", "));
        for line in report.lines {
            println!("  {line}");
        }
    }
    println!("artifacts in {}", p.out_dir.display());
    Ok(())
}

fn standalone_stats(samples: &PathBuf, x_min: Option<f64>, out: Option<&PathBuf>) -> Result<()> {
    let file = File::open(samples).with_context(|| format!("opening {}", samples.display()))?;
    let values = read_samples(BufReader::new(file)).map_err(anyhow::Error::msg).with_context(|| samples.display().to_string())?;
    let report = fit_report(&values, x_min, 50);
    print!("{}", report.text);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("stats_samples.txt"), &report.table)?;
        write_atomic(&dir.join("ccdf_samples.txt"), &report.ccdf)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(c) => run(c, &[Stage::Ingest]),
        Command::Trips(c) => run(c, &[Stage::Trips]),
        Command::Regions(c) => run(c, &[Stage::Regions]),
        Command::Stats { common, samples: Some(s), x_min } => standalone_stats(s, *x_min, common.out.as_ref()),
        Command::Stats { common, .. } => run(common, &[Stage::Stats]),
        Command::Functions(c) => run(c, &[Stage::Functions]),
        Command::Dtn(c) => run(c, &[Stage::Dtn]),
        Command::All(c) => run(c, &Stage::ALL),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
