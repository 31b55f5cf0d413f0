//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::basis::embed_subsystem;
use crate::chain::{build_couplings, CouplingMatrix};
use crate::config::{load_config, OutputFormat, RunConfig};
use crate::dynamics::TransferEvaluator;
use crate::error::{PstError, Result};
use crate::lambda::{roots_of, scan, sig9, write_scan_csv, ScanOptions};
use crate::protocol::{
    run_arbitrary_pst, run_global_pst, run_k_excitation_pst, run_nonpreserving_pst, LineOperator,
    ProtocolReport, Variant,
};
use crate::reproduce::{self, Cell};
use crate::restore::complete::random_complex_vector;
use crate::restore::{solve, RestoreMode, RestoreProblem, RestoreSolution};
use crate::C64;

#[derive(Debug, Parser)]
#[command(
    name = "pstchain",
    version,
    about = "Perfect state transfer along dipolar spin chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Overrides `output.path`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `csv` or `json`; overrides `output.format`.
    #[arg(long, global = true)]
    pub format: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal realizable |lambda| over the time grid.
    Scan,
    /// Every root of the lambda polynomial at one time.
    Roots {
        /// Time to evaluate at; defaults to `solver.tau0` or the scan maximum.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Solve for the restoring operator.
    Solve,
    /// Run a protocol and report its success probability and fidelity.
    Simulate {
        /// Previously written solution JSON.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// File holding comma-separated complex sender amplitudes.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit a parameterized restoring circuit.
    FitCircuit,
    /// Compare against the published tables: `1a`, `2` or `roots`.
    Reproduce { table: String },
}

fn configure_threads(threads: usize) {
    if threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| PstError::Config("--config is required for this command".into()))?;
    let mut overrides = Vec::new();
    if let Some(seed) = cli.seed {
        overrides.push(("solver.seed", seed.to_string()));
    }
    if let Some(f) = &cli.format {
        overrides.push(("output.format", f.clone()));
    }
    if let Some(o) = &cli.out {
        overrides.push(("output.path", o.display().to_string()));
    }
    load_config(path, &overrides)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    configure_threads(cli.threads);
    match &cli.command {
        Command::Reproduce { table } => cmd_reproduce(cli, table),
        Command::Scan => cmd_scan(&load(cli)?),
        Command::Roots { tau } => cmd_roots(&load(cli)?, *tau),
        Command::Solve => cmd_solve(&load(cli)?, false),
        Command::FitCircuit => cmd_solve(&load(cli)?, true),
        Command::Simulate { solution, input } => {
            cmd_simulate(&load(cli)?, solution.as_deref(), input.as_deref())
        }
    }
}

fn couplings(cfg: &RunConfig) -> Result<CouplingMatrix> {
    build_couplings(&cfg.chain)
}

/// `solver.tau0` when given, otherwise the scan maximum.
fn registration_time(cfg: &RunConfig, c: &CouplingMatrix) -> Result<f64> {
    if let Some(t) = cfg.solver.tau0 {
        return Ok(t);
    }
    let r = scan(
        c,
        &cfg.partition,
        cfg.k,
        &cfg.scan.grid,
        ScanOptions {
            refine: cfg.scan.refine,
        },
    )?;
    info!(
        "registration time from scan: tau0 = {}, |lambda|_min = {}",
        r.tau0, r.lambda_min
    );
    Ok(r.refined.map(|(t, _)| t).unwrap_or(r.tau0))
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<()> {
    let c = couplings(cfg)?;
    let r = scan(
        &c,
        &cfg.partition,
        cfg.k,
        &cfg.scan.grid,
        ScanOptions {
            refine: cfg.scan.refine,
        },
    )?;
    let mut summary = r.summary(&cfg.chain_id);
    summary.config_hash = Some(cfg.hash.clone());
    let summary_json = to_json(&summary)?;
    match cfg.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Json => emit(cfg.output.as_deref(), &summary_json),
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_scan_csv(&r, &mut buf)?;
            let csv = String::from_utf8(buf).expect("csv is utf-8");
            match cfg.output.as_deref() {
                Some(path) => {
                    std::fs::write(path, csv)?;
                    std::fs::write(path.with_extension("summary.json"), &summary_json)?;
                    emit(None, &summary_json)
                }
                None => {
                    eprint!("{summary_json}");
                    emit(None, &csv)
                }
            }
        }
    }
}

#[derive(Serialize)]
struct RootsReport {
    chain_id: String,
    n_er: usize,
    k: usize,
    tau: f64,
    roots: Vec<RootEntry>,
    config_hash: String,
}

#[derive(Serialize)]
struct RootEntry {
    abs: f64,
    multiplicity: usize,
}

pub fn cmd_roots(cfg: &RunConfig, tau: Option<f64>) -> Result<()> {
    let c = couplings(cfg)?;
    let tau = match tau {
        Some(t) => t,
        None => registration_time(cfg, &c)?,
    };
    let block = TransferEvaluator::new(&c, &cfg.partition, cfg.k)?.at(tau);
    let roots = roots_of(&block.v_hat)?;
    match cfg.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Csv => {
            let mut text = String::from("abs,multiplicity\n");
            for r in &roots {
                text += &format!("{},{}\n", sig9(r.abs), r.multiplicity);
            }
            emit(cfg.output.as_deref(), &text)
        }
        OutputFormat::Json => emit(
            cfg.output.as_deref(),
            &to_json(&RootsReport {
                chain_id: cfg.chain_id.clone(),
                n_er: cfg.partition.n_er(),
                k: cfg.k,
                tau,
                roots: roots
                    .iter()
                    .map(|r| RootEntry {
                        abs: r.abs,
                        multiplicity: r.multiplicity,
                    })
                    .collect(),
                config_hash: cfg.hash.clone(),
            })?,
        ),
    }
}

fn build_solution(cfg: &RunConfig, c: &CouplingMatrix, tau0: f64) -> Result<RestoreSolution> {
    let block = TransferEvaluator::new(c, &cfg.partition, cfg.k)?.at(tau0);
    let opts = cfg.solver.options();
    let problem = match cfg.solver.mode {
        RestoreMode::PreservingGeneral | RestoreMode::NonpreservingGeneral => {
            let p = RestoreProblem::general(block, cfg.solver.mode.preserving(), opts)?;
            if let Some(extra) = cfg.solver.n_extra_zero_rows {
                if extra != p.n_extra_zero_rows {
                    return Err(PstError::Config(format!(
                        "solver.n_extra_zero_rows = {extra}, but {} needs exactly {}",
                        cfg.solver.mode.name(),
                        p.n_extra_zero_rows
                    )));
                }
            }
            p
        }
        mode => {
            RestoreProblem::circuit(block, mode, cfg.solver.n_extra_zero_rows.unwrap_or(0), opts)?
        }
    };
    solve(&problem)
}

pub fn cmd_solve(cfg: &RunConfig, circuit_only: bool) -> Result<()> {
    if circuit_only && cfg.solver.mode.layers().is_none() {
        return Err(PstError::Config(format!(
            "fit-circuit needs solver.mode = circuit-preserving or circuit-nonpreserving, got {}",
            cfg.solver.mode.name()
        )));
    }
    if cfg.format == Some(OutputFormat::Csv) {
        return Err(PstError::Config(
            "solutions are written as JSON only".into(),
        ));
    }
    let c = couplings(cfg)?;
    let tau0 = registration_time(cfg, &c)?;
    let sol = build_solution(cfg, &c, tau0)?;
    if cfg.solver.mode.layers().is_some() {
        let converged = sol.records.iter().filter(|r| r.converged).count();
        info!(
            "best |lambda| = {} from restart {} (seed {}, {converged}/{} restarts converged)",
            sol.lambda.norm(),
            sol.restart,
            sol.seed,
            sol.records.len()
        );
    }
    let mut file = sol.to_file();
    file.config_hash = Some(cfg.hash.clone());
    emit(cfg.output.as_deref(), &to_json(&file)?)
}

fn random_input(seed: u64, dim: usize) -> Vec<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let v = random_complex_vector(&mut rng, dim);
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn read_input(path: &Path) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)?;
    crate::config::parse_complex_list(text.trim())
}

pub fn cmd_simulate(cfg: &RunConfig, solution: Option<&Path>, input: Option<&Path>) -> Result<()> {
    if cfg.format == Some(OutputFormat::Csv) {
        return Err(PstError::Config(
            "protocol reports are written as JSON only".into(),
        ));
    }
    let c = couplings(cfg)?;
    let sol = match solution {
        Some(p) => RestoreSolution::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            let tau0 = registration_time(cfg, &c)?;
            build_solution(cfg, &c, tau0)?
        }
    };
    let tau0 = sol.tau;
    let part = &cfg.partition;
    let seed = cfg.solver.seed;
    let variant = cfg.protocol.variant;
    let dim = match variant {
        Variant::Arbitrary => {
            let s0 = part.s0().ok_or_else(|| {
                PstError::Config("arbitrary variant needs partition.s0 and partition.r0".into())
            })?;
            1usize << s0.len()
        }
        _ => embed_subsystem(&part.sender(), part.n_sites(), cfg.k)?.len(),
    };
    let s = match (input, &cfg.protocol.input) {
        (Some(p), _) => read_input(p)?,
        (None, Some(v)) => v.clone(),
        (None, None) => random_input(seed, dim),
    };
    if s.len() != dim {
        return Err(PstError::Config(format!(
            "sender state has {} amplitudes, the {} variant needs {dim}",
            s.len(),
            variant.name()
        )));
    }
    let report: ProtocolReport = match variant {
        Variant::KExcitation => run_k_excitation_pst(&c, part, cfg.k, &s, &sol, tau0)?,
        Variant::Nonpreserving => run_nonpreserving_pst(&c, part, cfg.k, &s, &sol, tau0)?,
        Variant::Arbitrary => run_arbitrary_pst(&c, part, cfg.k, &s, &sol, tau0)?,
        Variant::Global => {
            let sender = part.sender();
            let local = embed_subsystem(&sender, part.n_sites(), cfg.k)?;
            let mut full = vec![C64::new(0.0, 0.0); 1 << sender.len()];
            for (j, &z) in s.iter().enumerate() {
                full[local.local_basis().state(j) as usize] = z;
            }
            run_global_pst(&c, part, &full, LineOperator::Restoring(&sol), tau0)?
        }
    };
    let mut file = report.to_file(&cfg.chain_id, cfg.k, seed, cfg.protocol.epsilon);
    file.config_hash = Some(cfg.hash.clone());
    emit(cfg.output.as_deref(), &to_json(&file)?)
}

pub fn cmd_reproduce(cli: &Cli, table: &str) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let cells: Vec<Cell> = match table {
        "1a" => reproduce::table_1a(seed)?,
        "2" => reproduce::table_2()?,
        "roots" => reproduce::roots()?,
        other => {
            return Err(PstError::Config(format!(
                "unknown table `{other}`; expected 1a, 2 or roots"
            )))
        }
    };
    let format = cli.format.as_deref().map(OutputFormat::parse).transpose()?;
    let text = match format {
        Some(OutputFormat::Json) => to_json(&cells)?,
        Some(OutputFormat::Csv) => {
            let mut t = String::from("table,column,quantity,value,reference,tolerance,pass\n");
            for c in &cells {
                t += &format!(
                    "{},{},{},{},{},{},{}\n",
                    c.table,
                    c.column,
                    c.quantity,
                    sig9(c.value),
                    c.reference,
                    c.tolerance,
                    c.pass
                );
            }
            t
        }
        None => {
            let passed = cells.iter().filter(|c| c.pass).count();
            let mut t: String = cells.iter().map(|c| c.line() + "\n").collect();
            t += &format!("{passed}/{} cells within tolerance\n", cells.len());
            t
        }
    };
    emit(cli.out.as_deref(), &text)
}
