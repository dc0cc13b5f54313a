use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use autodip::image::Microscope;
use autodip::synth::{DatasetSpec, PhantomKind};
use autodip_cli::commands::{
    cmd_calibrate, cmd_denoise, cmd_evaluate, cmd_inspect_store, cmd_synth, DenoiseRequest,
    EvaluateRequest,
};
use autodip_cli::CliConfig;
use clap::{Args, Parser, Subcommand};

/// Deep Image Prior denoising with architecture and stopping-point transfer.
#[derive(Parser)]
#[command(name = "autodip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file (worker count, search space, run settings, strategy).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; overrides the config file and AUTODIP_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<CliConfig> {
        let mut config = CliConfig::load(self.config.as_deref())?;
        if let Some(w) = self.workers {
            config.workers = w;
            config.validate()?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Grid-search every manifest image and write a calibration store.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        /// Output store path.
        #[arg(long)]
        out: PathBuf,
        /// Per-image grid files used to resume; defaults to `<out>.grids/`.
        #[arg(long)]
        grid_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Denoise one image with a transferred or baseline configuration.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        /// `baseline`, `group:<scope>` or `metric:<measure>@<scope>`.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value = "unknown")]
        microscope: Microscope,
        #[arg(long, default_value = "unknown")]
        specimen: String,
        /// Number of averaged frames, if known.
        #[arg(long)]
        noise_level: Option<u32>,
        /// Decision record path; defaults to `<out>.decision.json`.
        #[arg(long)]
        decision: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare strategies against ground truth and write a TSV report.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Comma-separated strategies; baseline and oracle columns are always added.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
        #[arg(long)]
        report: PathBuf,
        /// Cached grids of the manifest images, enabling the oracle column.
        #[arg(long)]
        grid_dir: Option<PathBuf>,
        /// Per-image result cache; defaults to `<report>.cache/`.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic phantom dataset with calibration and validation manifests.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "dots,filaments")]
        kinds: Vec<PhantomKind>,
        /// Frames averaged per noise regime.
        #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
        noise_levels: Vec<u32>,
        #[arg(long, default_value_t = 2)]
        calibration_per_cell: usize,
        #[arg(long, default_value_t = 1)]
        validation_per_cell: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 100.0)]
        gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print group optima and per-image optima of a store.
    InspectStore {
        #[arg(long)]
        store: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            manifest,
            out,
            grid_dir,
            common,
        } => {
            cmd_calibrate(&manifest, &out, &common.load()?, grid_dir.as_deref())?;
        }
        Command::Denoise {
            input,
            out,
            store,
            strategy,
            microscope,
            specimen,
            noise_level,
            decision,
            common,
        } => {
            let req = DenoiseRequest {
                input: &input,
                output: &out,
                microscope,
                specimen: &specimen,
                noise_level,
                store: store.as_deref(),
                strategy: strategy.as_deref(),
                decision: decision.as_deref(),
            };
            cmd_denoise(&req, &common.load()?)?;
        }
        Command::Evaluate {
            manifest,
            store,
            strategies,
            report,
            grid_dir,
            cache_dir,
            common,
        } => {
            let req = EvaluateRequest {
                manifest: &manifest,
                store: store.as_deref(),
                strategies: &strategies,
                report: &report,
                grid_dir: grid_dir.as_deref(),
                cache_dir: cache_dir.as_deref(),
            };
            cmd_evaluate(&req, &common.load()?)?;
        }
        Command::Synth {
            out,
            kinds,
            noise_levels,
            calibration_per_cell,
            validation_per_cell,
            size,
            sigma,
            gain,
            seed,
        } => {
            let spec = DatasetSpec {
                kinds,
                noise_levels,
                calibration_per_cell,
                validation_per_cell,
                height: size,
                width: size,
                gaussian_sigma: sigma,
                poisson_gain: gain,
                seed,
            };
            cmd_synth(&spec, &out)?;
        }
        Command::InspectStore { store } => print!("{}", cmd_inspect_store(&store)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
