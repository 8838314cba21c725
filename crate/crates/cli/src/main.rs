use std::path::PathBuf;
use std::process::ExitCode;

use ace_engine::harness::{self, ExperimentConfig, Study};
use ace_engine::Error;
use clap::{Args, Parser, Subcommand};

/// Run agent-based economics experiments from TOML configs.
///
/// Exit status: 0 on success, 2 for invalid configs or arguments, 3 for
/// I/O failures.
#[derive(Parser, Debug)]
#[command(name = "ace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// NK landscape analysis: optima, local-optima census, hill climbs
    Nk(RunArgs),
    /// Cellular automaton runs
    Ca(RunArgs),
    /// Organizational search under a fixed coordination mode
    Org(RunArgs),
    /// Growth study with learning over coordination modes
    Grow(RunArgs),
    /// Agentized hidden-action model
    Ha(RunArgs),
    /// Run one experiment per value of a config field
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config; the built-in example is used when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of replications
    #[arg(long, value_name = "N")]
    replications: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR", env = "ACE_OUT_DIR")]
    out: Option<PathBuf>,
    /// Print nothing on success
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Dotted config field, e.g. `nk.k` or `org.incentive_weight`
    #[arg(long)]
    axis: String,
    /// Comma-separated values written as in the config file
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

fn builtin(study: Study) -> &'static str {
    match study {
        Study::NkAnalysis => include_str!("../configs/nk.toml"),
        Study::Automaton => include_str!("../configs/ca.toml"),
        Study::OrgSearch => include_str!("../configs/org.toml"),
        Study::GrowthStudy => include_str!("../configs/grow.toml"),
        Study::HiddenAction => include_str!("../configs/ha.toml"),
    }
}

fn load(common: &Common, study: Option<Study>) -> Result<ExperimentConfig, Error> {
    let mut config = match (&common.config, study) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(study)) => ExperimentConfig::from_toml_str(builtin(study))?,
        (None, None) => return Err(Error::Config("sweep needs --config".into())),
    };
    if let Some(study) = study {
        if config.study != study {
            return Err(Error::Config(format!(
                "config describes study {}, not {}",
                config.study.label(),
                study.label()
            )));
        }
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(r) = common.replications {
        config.replications = r;
    }
    if let Some(out) = &common.out {
        config.output_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, study) = match &cli.command {
        Command::Nk(a) => (&a.common, Study::NkAnalysis),
        Command::Ca(a) => (&a.common, Study::Automaton),
        Command::Org(a) => (&a.common, Study::OrgSearch),
        Command::Grow(a) => (&a.common, Study::GrowthStudy),
        Command::Ha(a) => (&a.common, Study::HiddenAction),
        Command::Sweep(s) => {
            let config = load(&s.common, None)?;
            let values: Vec<_> = s.values.iter().map(|v| harness::parse_value(v.trim())).collect();
            let report = harness::sweep(&config, &s.axis, &values)?;
            if !s.common.quiet {
                for (value, run) in &report.runs {
                    eprintln!("{} = {value}: {} rows in {}", s.axis, run.series_rows, run.output_dir.display());
                }
                eprintln!("combined table: {}", report.combined.display());
            }
            return Ok(());
        }
    };
    let config = load(common, Some(study))?;
    let report = harness::run_experiment(&config)?;
    if !common.quiet {
        eprintln!(
            "{}: {} replications, {} rows in {}",
            study.label(),
            config.replications,
            report.series_rows,
            report.output_dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
