//! `cellfree`: run simulator presets or custom experiments and write CSV/JSON artifacts.
//!
//! Exit status is 0 on success, 1 when an experiment fails at runtime and 2 for
//! usage errors (bad flags, unreadable or invalid config, unknown preset).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cellfree_core::harness::{
    monte_carlo, preset, run_realization, ClusteringMode, Controller, ExperimentSpec, PRESET_NAMES,
};
use cellfree_core::report::{metadata_line, write_artifacts};
use cellfree_core::{Error, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "cellfree", version, about = "Cell-free massive MIMO uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a custom experiment from a TOML config.
    Run(RunArgs),
    /// Run a named preset experiment.
    Preset(PresetArgs),
    /// List the preset names.
    ListPresets,
    /// Print the fully resolved config (defaults, or a file merged over them).
    DumpConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Directory for the artifacts; created if missing.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Realization count override.
    #[arg(long)]
    realizations: Option<usize>,
    /// Also write the solver traces of realization 0.
    #[arg(long)]
    dump_trace: bool,
    /// Also write the dendrograms of realization 0.
    #[arg(long)]
    dump_dendrogram: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Experiment id used in file names.
    #[arg(long, default_value = "custom")]
    id: String,
    #[arg(long, value_delimiter = ',', default_values = ["wsrm", "mse", "f"])]
    controllers: Vec<ControllerArg>,
    #[arg(long, value_delimiter = ',', default_values = ["proposed"])]
    clustering: Vec<ClusteringArg>,
    /// Antennas per AP to sweep; defaults to the config value.
    #[arg(long, value_delimiter = ',')]
    antennas: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PresetArgs {
    name: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ControllerArg {
    Wsrm,
    Mse,
    F,
}

impl From<ControllerArg> for Controller {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Wsrm => Controller::Wsrm,
            ControllerArg::Mse => Controller::Mse,
            ControllerArg::F => Controller::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClusteringArg {
    Proposed,
    AllAps,
}

impl From<ClusteringArg> for ClusteringMode {
    fn from(c: ClusteringArg) -> Self {
        match c {
            ClusteringArg::Proposed => ClusteringMode::Proposed,
            ClusteringArg::AllAps => ClusteringMode::AllAps,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    SimConfig::load(path).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn apply_overrides(spec: &mut ExperimentSpec, out: &OutputArgs) -> Result<(), Failure> {
    if let Some(seed) = out.seed {
        spec.base_seed = seed;
    }
    if let Some(n) = out.realizations {
        spec.realizations = n;
    }
    if out.workers == Some(0) {
        return Err(Failure::usage("--workers must be >= 1"));
    }
    spec.validate().map_err(Failure::usage)
}

fn file_label(label: &str) -> String {
    label.replace(':', "_")
}

fn dump_realization_zero(spec: &ExperimentSpec, out: &OutputArgs) -> Result<Vec<PathBuf>, Failure> {
    let output = run_realization(spec, 0).map_err(Failure::runtime)?;
    let header = metadata_line(&spec.id, &spec.hash(), spec.base_seed);
    let mut files = Vec::new();
    if out.dump_trace {
        for (variant, trace) in spec.variants().iter().zip(&output.traces) {
            if let Some(trace) = trace {
                let path = out
                    .out
                    .join(format!("{}_trace_r0_{}.csv", spec.id, file_label(&spec.label(variant))));
                std::fs::write(&path, format!("{header}{}", trace.to_csv())).map_err(Failure::runtime)?;
                files.push(path);
            }
        }
    }
    if out.dump_dendrogram {
        for (antennas, dendrogram) in &output.dendrograms {
            let path = out.out.join(format!("{}_dendrogram_r0_L{antennas}.csv", spec.id));
            std::fs::write(&path, format!("{header}{}", dendrogram.to_csv())).map_err(Failure::runtime)?;
            files.push(path);
        }
    }
    Ok(files)
}

fn execute(spec: &ExperimentSpec, out: &OutputArgs) -> Result<(), Failure> {
    log::info!("running {} ({} realizations, seed {})", spec.id, spec.realizations, spec.base_seed);
    let set = monte_carlo(spec, out.workers).map_err(Failure::runtime)?;
    if !set.failed.is_empty() {
        log::warn!("{} realizations aborted and were skipped: {:?}", set.failed.len(), set.failed);
    }
    let mut files = write_artifacts(&set, &out.out).map_err(Failure::runtime)?;
    if out.dump_trace || out.dump_dendrogram {
        files.extend(dump_realization_zero(spec, out)?);
    }
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::ListPresets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::DumpConfig { config } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => SimConfig::default(),
            };
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Preset(args) => {
            let mut spec = preset(&args.name).map_err(|e| match e {
                Error::UnknownPreset { .. } => Failure::usage(e),
                other => Failure::runtime(other),
            })?;
            apply_overrides(&mut spec, &args.output)?;
            execute(&spec, &args.output)
        }
        Command::Run(args) => {
            let cfg = load_config(&args.config)?;
            let mut spec = ExperimentSpec::new(args.id, cfg);
            spec.controllers = args.controllers.into_iter().map(Controller::from).collect();
            spec.clustering_modes = args.clustering.into_iter().map(ClusteringMode::from).collect();
            spec.antenna_sweep = args.antennas;
            apply_overrides(&mut spec, &args.output)?;
            execute(&spec, &args.output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on its own usage errors
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
