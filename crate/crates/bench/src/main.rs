use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use oblique_qr::mmio::read_matrix_file;
use oblique_qr::{OrthOptions, SecondPassCoefficients};
use oblique_qr_bench::{
    factorize_files, parse_range, run_rank_deficient, run_sweep, write_csv, Algorithm,
    ExperimentRecord, FactorizeOutputs, RankDefConfig, RunOptions, SweepConfig,
};

#[derive(Parser)]
#[command(name = "oblique-qr-bench", version, about = "Orthogonalization experiments in a B-inner product")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Loss of orthogonality over a range of condition numbers of X.
    Sweep(SweepArgs),
    /// The [X0, 0, X0] rank-deficient problem.
    Rankdef(RankdefArgs),
    /// Factor X read from a Matrix Market file.
    Factorize(FactorizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum GsR {
    /// Keep only the first projection pass in R.
    First,
    /// Sum both passes into R.
    Summed,
}

impl GsR {
    fn policy(self) -> SecondPassCoefficients {
        match self {
            GsR::First => SecondPassCoefficients::Discarded,
            GsR::Summed => SecondPassCoefficients::Summed,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Comma-separated subset of cgs,mgs,cgs2,mgs2,hh_right,hh_left,hh_block.
    #[arg(long, value_delimiter = ',', default_value = "cgs,mgs,cgs2,mgs2,hh_right,hh_left,hh_block")]
    algorithms: Vec<Algorithm>,
    /// Reorthogonalize Householder vectors against the starting basis.
    #[arg(long, value_enum, default_value = "on")]
    reorth: OnOff,
    /// Relative deflation threshold of the Householder drivers.
    #[arg(long, default_value_t = 0.0)]
    deflation_tol: f64,
    /// Gram–Schmidt drop threshold on q^H B q.
    #[arg(long, default_value_t = 0.0)]
    drop_tol: f64,
    /// Which projection passes of cgs2/mgs2 are recorded in R.
    #[arg(long, value_enum, default_value = "first")]
    gs_r: GsR,
    /// Panel width of hh_block.
    #[arg(long, default_value_t = 32)]
    panel_width: usize,
    /// Write runtime_ms as 0 so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// Output CSV (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn run_options(&self) -> RunOptions {
        RunOptions {
            algorithms: self.algorithms.clone(),
            orth: OrthOptions {
                reorth: matches!(self.reorth, OnOff::On),
                deflation_tol: self.deflation_tol,
                panel_width: self.panel_width,
            },
            drop_tol: self.drop_tol,
            gs_second_pass: self.gs_r.policy(),
            timing: !self.no_timing,
            threads: None,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    log_kappa_b: f64,
    /// `a:b`, `a:step:b` or a comma-separated list.
    #[arg(long, default_value = "0:16")]
    log_kappa_x: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Starting basis instead of the Cholesky-based one, as `file:<path>`.
    #[arg(long)]
    init_basis: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RankdefArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k0: usize,
    /// log10 of the condition numbers of both B and X0.
    #[arg(long, default_value_t = 20.0)]
    log_kappa: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Hermitian positive-definite B (Matrix Market).
    #[arg(long)]
    b: PathBuf,
    /// Matrix to orthogonalize (Matrix Market).
    #[arg(long)]
    x: PathBuf,
    #[arg(long, default_value = "hh_left")]
    alg: Algorithm,
    /// Writes <prefix>_q.mtx, <prefix>_r.mtx and <prefix>_metrics.csv.
    #[arg(long, default_value = "out")]
    out_prefix: String,
    #[arg(long)]
    init_basis: Option<String>,
    #[arg(long, value_enum, default_value = "on")]
    reorth: OnOff,
    #[arg(long, default_value_t = 0.0)]
    deflation_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    drop_tol: f64,
    #[arg(long, value_enum, default_value = "first")]
    gs_r: GsR,
    #[arg(long, default_value_t = 32)]
    panel_width: usize,
    #[arg(long)]
    no_timing: bool,
}

fn init_basis_path(spec: &str) -> Result<PathBuf> {
    match spec.strip_prefix("file:") {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => bail!("--init-basis expects file:<path>, got '{spec}'"),
    }
}

fn emit(records: &[ExperimentRecord], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(BufWriter::new(f), records)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&mut lock, records)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(a) => {
            let init_basis = match &a.init_basis {
                Some(spec) => {
                    let path = init_basis_path(spec)?;
                    Some(read_matrix_file(&path).with_context(|| format!("reading {}", path.display()))?)
                }
                None => None,
            };
            let cfg = SweepConfig {
                n: a.n,
                k: a.k,
                log_kappa_b: a.log_kappa_b,
                log_kappa_x: parse_range(&a.log_kappa_x)?,
                seed: a.seed,
                init_basis,
                run: a.common.run_options(),
            };
            let records = run_sweep(&cfg)?;
            emit(&records, a.common.out.as_ref())
        }
        Command::Rankdef(a) => {
            let cfg = RankDefConfig {
                n: a.n,
                k0: a.k0,
                log_kappa: a.log_kappa,
                seed: a.seed,
                run: a.common.run_options(),
            };
            let records = run_rank_deficient(&cfg)?;
            emit(&records, a.common.out.as_ref())
        }
        Command::Factorize(a) => {
            let init = a.init_basis.as_deref().map(init_basis_path).transpose()?;
            let run = RunOptions {
                algorithms: vec![a.alg],
                orth: OrthOptions {
                    reorth: matches!(a.reorth, OnOff::On),
                    deflation_tol: a.deflation_tol,
                    panel_width: a.panel_width,
                },
                drop_tol: a.drop_tol,
                gs_second_pass: a.gs_r.policy(),
                timing: !a.no_timing,
                threads: None,
            };
            let out = FactorizeOutputs::from_prefix(&a.out_prefix);
            let rec = factorize_files(&a.b, &a.x, a.alg, &out, init.as_deref(), &run)?;
            log::info!(
                "{}: loss {:e}, residual {:e}, rank {}",
                rec.algorithm,
                rec.loss_orth,
                rec.rel_residual,
                rec.rank_q
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
