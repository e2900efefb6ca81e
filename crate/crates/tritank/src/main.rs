//! Command-line front end for the diagnosis workbench.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 when an input file
//! cannot be read or parsed, 3 when simulation or derivation fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tritank::bondgraph::{
    assign_causality, derive_influence_graph, parse_model, three_tank, TankParams,
};
use tritank::fdi::SignatureMatrix;
use tritank::plant::FaultScenario;
use tritank::var::{format_set, format_sets};
use tritank::workbench::{
    parse_scenario, render_outcome_text, render_report_csv, render_report_text,
    render_trace_csv, Config, Workbench, WorkbenchError,
};

#[derive(Parser)]
#[command(
    name = "tritank",
    version,
    about = "Model-based fault diagnosis workbench for a three-tank rig"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the trace as CSV.
    Simulate {
        /// Scenario file; the fault-free rig when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Workbench configuration, TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the diagnosers on one scenario and print their verdicts.
    Diagnose {
        /// Scenario file; the fault-free rig when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Workbench configuration, TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Which diagnoser to run.
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
    },
    /// Run the built-in benchmark fault table.
    Table1 {
        /// Workbench configuration, TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Emit CSV instead of the text report.
        #[arg(long)]
        csv: bool,
        /// Override the bias size as a fraction of each quiescent value.
        #[arg(long)]
        magnitude_frac: Option<f64>,
    },
    /// Print the fault signature matrix.
    Signature,
    /// Print the influence graph of the rig.
    Graph {
        /// Bond-graph description file; the built-in rig when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Emit Graphviz DOT instead of the arc list.
        #[arg(long)]
        dot: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    All,
    Fdi,
    Dx,
    Ig,
}

/// A failure with the exit code it maps to.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn content(message: String) -> Failure {
        Failure { message, code: 2 }
    }

    fn numeric(message: String) -> Failure {
        Failure { message, code: 3 }
    }
}

impl From<WorkbenchError> for Failure {
    fn from(e: WorkbenchError) -> Failure {
        match e {
            WorkbenchError::Config(_)
            | WorkbenchError::Scenario { .. }
            | WorkbenchError::Model(_) => Failure::content(e.to_string()),
            _ => Failure::numeric(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::content(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => Ok(Config::from_toml(&read(p)?)?),
    }
}

fn load_scenario(path: &Option<PathBuf>) -> Result<FaultScenario, Failure> {
    match path {
        None => Ok(FaultScenario::nominal()),
        Some(p) => Ok(parse_scenario(&read(p)?)?),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::numeric(format!("cannot write {}: {e}", p.display()))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            scenario,
            config,
            out,
        } => {
            let wb = Workbench::new(load_config(&config)?)?;
            let trace = wb.simulate_scenario(&load_scenario(&scenario)?)?;
            emit(&out, &render_trace_csv(&trace))
        }
        Command::Diagnose {
            scenario,
            config,
            method,
        } => {
            let wb = Workbench::new(load_config(&config)?)?;
            let outcome = wb.run_scenario(&load_scenario(&scenario)?)?;
            match method {
                Method::All => print!("{}", render_outcome_text(&outcome)),
                Method::Fdi => println!(
                    "{} -> {}",
                    outcome.fdi.verdict.label(),
                    format_sets(&outcome.fdi.candidates)
                ),
                Method::Dx => println!("{}", format_sets(&outcome.dx.diagnoses())),
                Method::Ig => println!(
                    "{} (stage {})",
                    format_set(&outcome.ig.sources),
                    outcome.ig.stage.label()
                ),
            }
            Ok(())
        }
        Command::Table1 {
            config,
            csv,
            magnitude_frac,
        } => {
            let mut config = load_config(&config)?;
            if let Some(frac) = magnitude_frac {
                config.magnitude_frac = frac;
            }
            let report = Workbench::new(config)?.run_table1()?;
            if csv {
                print!("{}", render_report_csv(&report));
            } else {
                print!("{}", render_report_text(&report));
            }
            Ok(())
        }
        Command::Signature => {
            print!("{}", SignatureMatrix::from_structure().render());
            Ok(())
        }
        Command::Graph { model, dot } => {
            let model = match model {
                None => three_tank(&TankParams::default())
                    .map_err(|e| Failure::numeric(e.to_string()))?,
                Some(p) => parse_model(&read(&p)?)
                    .map_err(|e| Failure::content(e.to_string()))?,
            };
            let causality =
                assign_causality(&model).map_err(|e| Failure::numeric(e.to_string()))?;
            let graph = derive_influence_graph(&model, &causality)
                .map_err(|e| Failure::numeric(e.to_string()))?;
            if dot {
                print!("{}", graph.to_dot());
            } else {
                print!("{}", graph.describe());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
