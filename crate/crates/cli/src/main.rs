use clap::{Parser, Subcommand, ValueEnum};
use irs_core::experiment::{
    consistency_violations, preset, run, validate, ExperimentSpec, ValidationOptions, PRESETS,
};
use irs_core::Error;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Analytic and simulated performance of distributed-IRS links over
/// Nakagami-m fading.
#[derive(Parser, Debug)]
#[command(name = "irs-eval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one experiment and write its CSV.
    Run {
        /// Built-in figure preset (see list-presets).
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// TOML experiment file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte-Carlo trials per batch (0 disables simulation).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit nonzero when a simulated column disagrees with its closed form.
        #[arg(long)]
        validate: bool,
        /// Print the resolved experiment as TOML instead of running it.
        #[arg(long)]
        print_spec: bool,
    },
    /// Run the acceptance suite and report one line per criterion.
    Validate {
        /// Trials for every simulation; defaults to the stated counts.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the built-in presets.
    ListPresets,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Toml,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn load_spec(
    preset_name: Option<String>,
    config: Option<PathBuf>,
) -> Result<ExperimentSpec, Error> {
    match (preset_name, config) {
        (Some(p), None) => preset(&p),
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_toml(&text)
        }
        _ => Err(Error::Usage(
            "give exactly one of --preset or --config".into(),
        )),
    }
}

fn cmd_run(
    preset_name: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    check: bool,
    print_spec: bool,
) -> Result<bool, Error> {
    let mut spec = load_spec(preset_name, config)?;
    if let Some(n) = trials {
        spec.output.n_trials = n;
    }
    if let Some(s) = seed {
        spec.output.seed = s;
    }
    if print_spec {
        print!("{}", spec.to_toml()?);
        return Ok(true);
    }
    let result = run(&spec)?;
    match out {
        Some(path) => {
            let f = fs::File::create(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            result.write_csv(io::BufWriter::new(f))?;
        }
        None => {
            let csv = result.to_csv_string();
            if let Err(e) = io::stdout().lock().write_all(csv.as_bytes()) {
                if e.kind() != io::ErrorKind::BrokenPipe {
                    return Err(Error::Io(e.to_string()));
                }
            }
        }
    }
    if !check {
        return Ok(true);
    }
    let violations = consistency_violations(&result);
    for v in &violations {
        eprintln!(
            "violation: {} {}={} {}: {}",
            v.series,
            spec.sweep.var.name(),
            v.x,
            v.metric,
            v.detail
        );
    }
    Ok(violations.is_empty())
}

fn cmd_validate(trials: Option<usize>, seed: Option<u64>, format: Format) -> bool {
    let mut opts = ValidationOptions::default();
    if let Some(n) = trials {
        opts = opts.with_trials(n);
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = validate(&opts);
    match format {
        Format::Text => print!("{report}"),
        Format::Toml => print!("{}", report.to_toml()),
    }
    report.unexpected_failures().is_empty()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            preset,
            config,
            out,
            trials,
            seed,
            validate,
            print_spec,
        } => cmd_run(preset, config, out, trials, seed, validate, print_spec),
        Command::Validate {
            trials,
            seed,
            format,
        } => Ok(cmd_validate(trials, seed, format)),
        Command::ListPresets => {
            let mut out = io::stdout().lock();
            for (name, about) in PRESETS {
                let _ = writeln!(out, "{name:<6} {about}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
