//! Batch front-end: mapping validation, Trotter runs, gate counts, weight
//! tables and constrained-vacuum certificates.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ququart::config::ExperimentConfig;
use ququart::constraint_toric::{audit_toric, build_vvc, vacuum_prepare, GateAssignment};
use ququart::decomposition::{gate_count, weight_table, weight_table_csv, weight_table_markdown, GateCountReport};
use ququart::mappings::{build_hamiltonian, MappingKind};
use ququart::trotter::{evolve_and_record, RunOptions, TrotterPlan};
use ququart::validation::validate_mapping;
use ququart::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

/// Tolerance of the vacuum certificate.
const CERTIFICATE_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "ququart-sim", version, about = "Ququart fermion-mapping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML); `sweep` accepts it repeatedly.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Config override `key=value` (dotted keys, repeatable).
    #[arg(long = "override", global = true)]
    overrides: Vec<String>,
    /// Statevector budget in bytes; overrides `memory_budget`.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Reserved; the dynamics is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Run the (anti)commutation, antisymmetry, involution and cross-spin suites.
    ValidateMapping,
    /// Trotter evolution with oracle occupations and Δn.
    Evolve,
    /// Two-qudit gate counts of the circuit templates (all mappings without --config).
    GateCount,
    /// Operator-weight table.
    Weights,
    /// Constrained vacuum certificate, plus the toric audit for spinless_local.
    ConstraintCheck,
    /// Evolve several configs concurrently, each into its own subdirectory.
    Sweep,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MemoryBudget { .. } | Error::DenseCapExceeded { .. } | Error::OracleTooLarge { .. } => EXIT_RESOURCE,
            Error::Config(_) | Error::UnknownCase(_) | Error::IncompatibleModel { .. } | Error::InvalidLattice(_) => {
                EXIT_CONFIG
            }
            Error::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn load_config(cli: &Cli, path: &Path) -> CliResult<ExperimentConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(b) = cli.budget {
        overrides.push(format!("memory_budget={b}"));
    }
    Ok(ExperimentConfig::load(path, &overrides)?)
}

fn single_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    match cli.config.as_slice() {
        [path] => load_config(cli, path),
        [] => Err(config_error("--config is required")),
        _ => Err(config_error("this subcommand takes one --config")),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn to_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

fn validate_cmd(cli: &Cli) -> CliResult<()> {
    let cfg = single_config(cli)?;
    let report = validate_mapping(cfg.mapping_kind()?, cfg.spec()?, cfg.validation.fault)?;
    print!("{}", report.to_text());
    let body = json!({
        "config": cfg.echo(),
        "passed": report.passed(),
        "checked": report.checked(),
        "first_failure": report.first_failure(),
        "report": report,
    });
    write(&cli.out, "validation.json", &to_pretty(&body))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("FAIL: {}", report.first_failure().unwrap_or_default()),
        })
    }
}

fn evolve_into(cfg: &ExperimentConfig, out: &Path) -> CliResult<String> {
    let mm = build_hamiltonian(cfg.mapping_kind()?, cfg.spec()?, cfg.model()?)?;
    let plan = TrotterPlan::new(&mm, cfg.tau, cfg.n_steps)?;
    let options = RunOptions {
        monitor_invariants: cfg.monitor_invariants,
    };
    let record = evolve_and_record(&mm, &cfg.recipe()?, &plan, cfg.budget(), options)?;
    let csv_name = cfg.outputs.csv.clone().unwrap_or_else(|| "evolve.csv".into());
    let json_name = cfg.outputs.json.clone().unwrap_or_else(|| "evolve.json".into());
    let csv = write(out, &csv_name, &record.to_csv())?;
    let exact_name = Path::new(&csv_name).with_extension("").to_string_lossy().into_owned() + "_exact.csv";
    write(out, &exact_name, &record.exact_csv())?;
    let body = json!({ "config": cfg.echo(), "record": record });
    write(out, &json_name, &to_pretty(&body))?;
    Ok(format!(
        "{}: {} steps, tau {}, max delta_n {:.3e}, survival {} -> {}",
        mm.kind.name(),
        record.n_steps,
        record.tau,
        record.max_delta_n(),
        record.survival_probability,
        csv.display()
    ))
}

fn evolve_cmd(cli: &Cli) -> CliResult<()> {
    let cfg = single_config(cli)?;
    println!("{}", evolve_into(&cfg, &cli.out)?);
    Ok(())
}

fn sweep_cmd(cli: &Cli) -> CliResult<()> {
    if cli.config.is_empty() {
        return Err(config_error("sweep needs at least one --config"));
    }
    let configs = cli
        .config
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            Ok((stem, load_config(cli, p)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut stems: Vec<&String> = configs.iter().map(|(s, _)| s).collect();
    stems.sort();
    stems.dedup();
    if stems.len() != configs.len() {
        return Err(config_error("sweep configs must have distinct file names"));
    }
    let results: Vec<CliResult<String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(stem, cfg)| {
                let dir = cli.out.join(stem);
                scope.spawn(move || evolve_into(cfg, &dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut first_err = None;
    for ((stem, _), r) in configs.iter().zip(results) {
        match r {
            Ok(line) => println!("{stem}: {line}"),
            Err(e) => {
                eprintln!("{stem}: {}", e.message);
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn gate_count_cmd(cli: &Cli) -> CliResult<()> {
    let (kinds, echo) = match cli.config.as_slice() {
        [] => (
            vec![
                MappingKind::SpinlessLocal,
                MappingKind::SpinSplit,
                MappingKind::AuxiliaryParity,
            ],
            serde_json::Value::Null,
        ),
        _ => {
            let cfg = single_config(cli)?;
            (vec![cfg.mapping_kind()?], cfg.echo())
        }
    };
    let reports = kinds
        .into_iter()
        .map(gate_count)
        .collect::<ququart::Result<Vec<GateCountReport>>>()?;
    let mut csv = format!("{}\n", GateCountReport::csv_header());
    for r in &reports {
        print!("{}", r.to_markdown());
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write(&cli.out, "gate_counts.csv", &csv)?;
    let body = json!({ "config": echo, "reports": reports });
    write(&cli.out, "gate_counts.json", &to_pretty(&body))?;
    Ok(())
}

fn weights_cmd(cli: &Cli) -> CliResult<()> {
    let echo = match cli.config.as_slice() {
        [] => serde_json::Value::Null,
        _ => single_config(cli)?.echo(),
    };
    let rows = weight_table()?;
    print!("{}", weight_table_markdown(&rows));
    write(&cli.out, "weights.csv", &weight_table_csv(&rows))?;
    let body = json!({ "config": echo, "rows": rows });
    write(&cli.out, "weights.json", &to_pretty(&body))?;
    Ok(())
}

fn constraint_check_cmd(cli: &Cli) -> CliResult<()> {
    let cfg = single_config(cli)?;
    let mm = build_hamiltonian(cfg.mapping_kind()?, cfg.spec()?, cfg.model()?)?;
    let (_, cert) = vacuum_prepare(&mm, cfg.budget())?;
    let mut passed = cert.passed(CERTIFICATE_TOL);
    println!(
        "{} {}: {} constraints, max |<G> - s| {:.3e}, max <n> {:.3e}, survival {}",
        cert.mapping,
        cert.lattice,
        cert.constraints.len(),
        cert.max_constraint_deviation,
        cert.max_occupation,
        cert.survival_probability
    );
    let toric = if mm.kind == MappingKind::SpinlessLocal {
        let assignment = match &cfg.toric.assignment {
            Some(p) => GateAssignment::parse(
                &fs::read_to_string(p).map_err(|e| config_error(format!("cannot read {p}: {e}")))?,
            )?,
            None => GateAssignment::default_for(&mm.spec),
        };
        let circuit = build_vvc(&mm.spec, assignment)?;
        let report = audit_toric(&mm, &circuit)?;
        println!(
            "toric audit: wen form {}, conjugated constraints hermitian {}, commuting {}, commute with H {}",
            report.wen_form_matches, report.hermitian, report.commuting, report.commute_with_hamiltonian
        );
        passed &= report.passed();
        Some(report)
    } else {
        None
    };
    let body = json!({ "config": cfg.echo(), "passed": passed, "certificate": cert, "toric": toric });
    write(&cli.out, "certificate.json", &to_pretty(&body))?;
    if passed {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: "FAIL: constraint certificate".into(),
        })
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match cli.command {
        Command::ValidateMapping => validate_cmd(cli),
        Command::Evolve => evolve_cmd(cli),
        Command::GateCount => gate_count_cmd(cli),
        Command::Weights => weights_cmd(cli),
        Command::ConstraintCheck => constraint_check_cmd(cli),
        Command::Sweep => sweep_cmd(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
