//! `duality` command-line runner.
//!
//! Exit codes: 0 ok, 1 config error, 2 state-validation error, 3 invariant
//! violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use duality_core::experiments::{
    run, summary, write_report, ExperimentConfig, ExperimentError, ExperimentKind, OutputFormat,
};
use duality_core::state_file::StateFileError;

#[derive(Parser)]
#[command(name = "duality", version, about = "Wave-particle duality of partially distinguishable particles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-particle HOM interference over an (r, theta) grid.
    Hom(Common),
    /// Double-well Bose-Hubbard visibilities and their bound.
    BoseHubbard(Common),
    /// Wave and particle measures of random states.
    RandomSweep(Common),
    /// Full report of one state file.
    Measures(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

/// Loads the config; a missing `experiment` key is taken from the
/// subcommand, a conflicting one is rejected.
fn load_config(path: &Path, kind: ExperimentKind) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ExperimentError::Config("config must be a JSON object".into()))?;
    match obj.get("experiment").and_then(|v| v.as_str()) {
        None => {
            obj.insert("experiment".into(), kind.name().into());
        }
        Some(name) if name != kind.name() => {
            return Err(ExperimentError::Config(format!(
                "config is for experiment {name:?}, not {:?}",
                kind.name()
            )))
        }
        Some(_) => {}
    }
    ExperimentConfig::from_json(&value.to_string())
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<(), ExperimentError> {
    let mut cfg = load_config(&args.config, kind)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(ExperimentError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
    }
    let format = args.format.map(OutputFormat::from).unwrap_or(cfg.output.format);
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out = args.out.clone().or_else(|| cfg.output.path.as_ref().map(|p| base.join(p)));

    let report = run(&cfg, base)?;
    if let Some(text) = write_report(&report, format, out.as_deref())? {
        print!("{text}");
    }
    eprintln!("{}", summary(&report));
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors count as config errors; clap's own code 2 is reserved
    // for invalid states.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Hom(a) => (ExperimentKind::Hom, a),
        Command::BoseHubbard(a) => (ExperimentKind::BoseHubbard, a),
        Command::RandomSweep(a) => (ExperimentKind::RandomSweep, a),
        Command::Measures(a) => (ExperimentKind::Measures, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                ExperimentError::State(err @ StateFileError::Invalid { .. }) => {
                    eprintln!("error: invalid state");
                    for d in err.diagnostics() {
                        eprintln!("  {d}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
