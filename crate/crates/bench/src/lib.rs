//! Experiment harness: condition-number sweeps, the rank-deficient test
//! problem, and factorization of matrices read from Matrix Market files.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use oblique_qr::mmio::{read_b_operator, read_matrix_file, write_matrix_file};
use oblique_qr::probe::{
    build_rank_deficient, gen_conditioned, gen_spd, loss_of_orthogonality, matrix_condition,
    relative_residual, spd_condition,
};
use oblique_qr::{
    gram_schmidt_with, householder_qr, initial_basis, BOperator, Driver, GsOptions, GsVariant,
    Matrix, OrthOptions, OrthoBasis, QRFactorization, SecondPassCoefficients,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OBLIQUE_QR_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Cgs,
    Mgs,
    Cgs2,
    Mgs2,
    HhRight,
    HhLeft,
    HhBlock,
}

impl Algorithm {
    /// Output order of the records.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Cgs,
        Algorithm::Mgs,
        Algorithm::Cgs2,
        Algorithm::Mgs2,
        Algorithm::HhRight,
        Algorithm::HhLeft,
        Algorithm::HhBlock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cgs => "cgs",
            Algorithm::Mgs => "mgs",
            Algorithm::Cgs2 => "cgs2",
            Algorithm::Mgs2 => "mgs2",
            Algorithm::HhRight => "hh_right",
            Algorithm::HhLeft => "hh_left",
            Algorithm::HhBlock => "hh_block",
        }
    }

    pub fn is_householder(self) -> bool {
        matches!(self, Algorithm::HhRight | Algorithm::HhLeft | Algorithm::HhBlock)
    }

    fn gs_variant(self) -> Option<GsVariant> {
        match self {
            Algorithm::Cgs => Some(GsVariant::Cgs),
            Algorithm::Mgs => Some(GsVariant::Mgs),
            Algorithm::Cgs2 => Some(GsVariant::Cgs2),
            Algorithm::Mgs2 => Some(GsVariant::Mgs2),
            _ => None,
        }
    }

    fn driver(self) -> Option<Driver> {
        match self {
            Algorithm::HhRight => Some(Driver::RightLooking),
            Algorithm::HhLeft => Some(Driver::LeftLooking),
            Algorithm::HhBlock => Some(Driver::Blocked),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .with_context(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub kappa_b: f64,
    pub kappa_x: f64,
    pub rank_q: usize,
    pub loss_orth: f64,
    pub rel_residual: f64,
    pub runtime_ms: f64,
    pub seed: u64,
}

/// Settings shared by every run of a sweep.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub algorithms: Vec<Algorithm>,
    pub orth: OrthOptions,
    /// Drop threshold of the Gram–Schmidt variants.
    pub drop_tol: f64,
    /// `R` bookkeeping of cgs2/mgs2. Defaults to first-pass coefficients
    /// only, the convention behind the published rank-deficient results.
    pub gs_second_pass: SecondPassCoefficients,
    /// When false, `runtime_ms` is written as 0 so that output files are
    /// reproducible byte for byte.
    pub timing: bool,
    /// Worker threads; `None` reads [`THREADS_ENV`] and otherwise lets
    /// rayon decide.
    pub threads: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            orth: OrthOptions::default(),
            drop_tol: 0.0,
            gs_second_pass: SecondPassCoefficients::Discarded,
            timing: true,
            threads: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub n: usize,
    pub k: usize,
    pub log_kappa_b: f64,
    pub log_kappa_x: Vec<f64>,
    pub seed: u64,
    /// Precomputed starting basis; when absent it is built from `B`'s
    /// leading block.
    pub init_basis: Option<Matrix>,
    pub run: RunOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k: 100,
            log_kappa_b: 5.0,
            log_kappa_x: (0..=16).map(f64::from).collect(),
            seed: 42,
            init_basis: None,
            run: RunOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RankDefConfig {
    pub n: usize,
    pub k0: usize,
    /// Target `log10` of both `κ₂(B)` and `κ₂(X0)`.
    pub log_kappa: f64,
    pub seed: u64,
    pub run: RunOptions,
}

impl Default for RankDefConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k0: 10,
            log_kappa: 20.0,
            seed: 42,
            run: RunOptions::default(),
        }
    }
}

fn thread_count(opt: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = opt {
        return Ok(Some(t.max(1)));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let t: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
            Ok(Some(t.max(1)))
        }
        _ => Ok(None),
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(threads)? {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building thread pool")?;
    Ok(pool.install(f))
}

struct Problem<'a> {
    x: &'a Matrix,
    kappa_x: f64,
}

struct Shared<'a> {
    b: &'a BOperator,
    basis: &'a OrthoBasis,
    kappa_b: f64,
    seed: u64,
    run: &'a RunOptions,
}

fn factorize(
    alg: Algorithm,
    x: &Matrix,
    b: &BOperator,
    basis: &OrthoBasis,
    run: &RunOptions,
) -> Result<QRFactorization> {
    if let Some(v) = alg.gs_variant() {
        let opts = GsOptions {
            drop_tol: run.drop_tol,
            second_pass: run.gs_second_pass,
        };
        return Ok(gram_schmidt_with(x, b, v, &opts)?);
    }
    let driver = alg.driver().expect("householder algorithm");
    let mut orth = run.orth.clone();
    orth.panel_width = orth.panel_width.min(x.cols()).max(1);
    Ok(householder_qr(driver, x, b, basis, &orth)?)
}

fn run_one(
    alg: Algorithm,
    p: &Problem<'_>,
    s: &Shared<'_>,
) -> Result<(ExperimentRecord, QRFactorization)> {
    let start = Instant::now();
    let qr = factorize(alg, p.x, s.b, s.basis, s.run).with_context(|| format!("running {alg}"))?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let loss_orth = loss_of_orthogonality(&qr.q, s.b)?;
    let rel_residual = relative_residual(p.x, &qr.q, &qr.r)?;
    let record = ExperimentRecord {
        algorithm: alg.name().to_string(),
        n: p.x.rows(),
        k: p.x.cols(),
        kappa_b: s.kappa_b,
        kappa_x: p.kappa_x,
        rank_q: qr.rank_q(),
        loss_orth,
        rel_residual,
        runtime_ms: if s.run.timing { elapsed } else { 0.0 },
        seed: s.seed,
    };
    Ok((record, qr))
}

/// Runs every (algorithm, problem) pair; records come back algorithm-major
/// in the order of [`Algorithm::ALL`], then in problem order.
fn run_all(problems: &[Problem<'_>], shared: &Shared<'_>) -> Result<Vec<ExperimentRecord>> {
    let mut algorithms = shared.run.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    if algorithms.is_empty() {
        bail!("no algorithms selected");
    }
    let tasks: Vec<(Algorithm, usize)> = algorithms
        .iter()
        .flat_map(|&a| (0..problems.len()).map(move |i| (a, i)))
        .collect();
    with_pool(shared.run.threads, || {
        tasks
            .par_iter()
            .map(|&(a, i)| run_one(a, &problems[i], shared).map(|(rec, _)| rec))
            .collect::<Result<Vec<_>>>()
    })?
}

fn basis_for(b: &BOperator, k: usize, given: Option<&Matrix>) -> Result<OrthoBasis> {
    let u = match given {
        Some(u) => {
            if u.shape() != (b.dim(), k) {
                bail!(
                    "initial basis is {}x{}, expected {}x{}",
                    u.rows(),
                    u.cols(),
                    b.dim(),
                    k
                );
            }
            u.clone()
        }
        None => initial_basis(b, k).context("building the initial basis from B's leading block")?,
    };
    Ok(OrthoBasis::new(b, u)?)
}

/// Orthogonalizes `X = U Σ V` for each `log_kappa_x`, reusing one `B` and
/// one starting basis for the whole sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    if cfg.k == 0 || cfg.k > cfg.n {
        bail!("need 1 <= k <= n, got n = {}, k = {}", cfg.n, cfg.k);
    }
    let b = gen_spd(cfg.n, cfg.log_kappa_b, cfg.seed)?;
    let kappa_b = spd_condition(&b);
    log::info!("B: n = {}, measured kappa = {kappa_b:e}", cfg.n);
    let basis = basis_for(&b, cfg.k, cfg.init_basis.as_ref())?;
    let xs: Vec<Matrix> = cfg
        .log_kappa_x
        .iter()
        .map(|&lk| gen_conditioned(cfg.n, cfg.k, lk, cfg.seed))
        .collect::<std::result::Result<_, _>>()?;
    let problems: Vec<Problem<'_>> = xs
        .iter()
        .map(|x| Problem {
            x,
            kappa_x: matrix_condition(x),
        })
        .collect();
    let shared = Shared {
        b: &b,
        basis: &basis,
        kappa_b,
        seed: cfg.seed,
        run: &cfg.run,
    };
    run_all(&problems, &shared)
}

/// Orthogonalizes `[X0, 0, X0]` with `B` and `X0` generated at the
/// configured scale.
pub fn run_rank_deficient(cfg: &RankDefConfig) -> Result<Vec<ExperimentRecord>> {
    if cfg.k0 == 0 || 3 * cfg.k0 > cfg.n {
        bail!("need 1 <= 3 k0 <= n, got n = {}, k0 = {}", cfg.n, cfg.k0);
    }
    let b = gen_spd(cfg.n, cfg.log_kappa, cfg.seed)?;
    let x0 = gen_conditioned(cfg.n, cfg.k0, cfg.log_kappa, cfg.seed)?;
    rank_deficient_records(&b, &x0, cfg.seed, &cfg.run)
}

/// Orthogonalizes `[X0, 0, X0]` for a given `B` and `X0`. `kappa_x` is
/// reported for `X0`.
pub fn rank_deficient_records(
    b: &BOperator,
    x0: &Matrix,
    seed: u64,
    run: &RunOptions,
) -> Result<Vec<ExperimentRecord>> {
    let x = build_rank_deficient(x0);
    if x.rows() != b.dim() || x.cols() > x.rows() {
        bail!("[X0, 0, X0] is {}x{}, B is {}x{}", x.rows(), x.cols(), b.dim(), b.dim());
    }
    let basis = basis_for(b, x.cols(), None)?;
    let problems = [Problem {
        x: &x,
        kappa_x: matrix_condition(x0),
    }];
    let shared = Shared {
        b,
        basis: &basis,
        kappa_b: spd_condition(b),
        seed,
        run,
    };
    run_all(&problems, &shared)
}

/// Output paths of [`factorize_files`].
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizeOutputs {
    pub q: PathBuf,
    pub r: PathBuf,
    pub metrics: PathBuf,
}

impl FactorizeOutputs {
    pub fn from_prefix(prefix: &str) -> Self {
        Self {
            q: PathBuf::from(format!("{prefix}_q.mtx")),
            r: PathBuf::from(format!("{prefix}_r.mtx")),
            metrics: PathBuf::from(format!("{prefix}_metrics.csv")),
        }
    }
}

/// Factors the matrix in `x_path` against the `B` in `b_path` and writes
/// `Q`, `R` and a one-row metrics CSV.
pub fn factorize_files(
    b_path: &Path,
    x_path: &Path,
    algorithm: Algorithm,
    out: &FactorizeOutputs,
    init_basis: Option<&Path>,
    run: &RunOptions,
) -> Result<ExperimentRecord> {
    let b = read_b_operator(b_path).with_context(|| format!("reading B from {}", b_path.display()))?;
    let x = read_matrix_file(x_path).with_context(|| format!("reading X from {}", x_path.display()))?;
    if x.rows() != b.dim() {
        bail!(
            "dimension mismatch: B is {}x{} but X has {} rows",
            b.dim(),
            b.dim(),
            x.rows()
        );
    }
    if x.cols() == 0 || x.cols() > x.rows() {
        bail!("X must have between 1 and {} columns, found {}", x.rows(), x.cols());
    }
    let u = match init_basis {
        Some(p) => Some(read_matrix_file(p).with_context(|| format!("reading U from {}", p.display()))?),
        None => None,
    };
    let basis = basis_for(&b, x.cols(), u.as_ref())?;
    let problem = Problem {
        x: &x,
        kappa_x: matrix_condition(&x),
    };
    let shared = Shared {
        b: &b,
        basis: &basis,
        kappa_b: spd_condition(&b),
        seed: 0,
        run,
    };
    let (record, qr) = run_one(algorithm, &problem, &shared)?;
    write_matrix_file(&out.q, &qr.q).with_context(|| format!("writing {}", out.q.display()))?;
    write_matrix_file(&out.r, &qr.r).with_context(|| format!("writing {}", out.r.display()))?;
    let f = std::fs::File::create(&out.metrics).with_context(|| format!("writing {}", out.metrics.display()))?;
    write_csv(f, std::slice::from_ref(&record))?;
    Ok(record)
}

/// Writes records as CSV with a header row and LF line endings.
pub fn write_csv<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    if records.is_empty() {
        wtr.write_record([
            "algorithm",
            "n",
            "k",
            "kappa_b",
            "kappa_x",
            "rank_q",
            "loss_orth",
            "rel_residual",
            "runtime_ms",
            "seed",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses `a:b` (unit step), `a:step:b`, or a comma-separated list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number '{t}' in range '{s}'"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let (lo, step, hi) = match parts.as_slice() {
        [one] => {
            return one.split(',').map(num).collect();
        }
        [a, b] => (num(a)?, 1.0, num(b)?),
        [a, st, b] => (num(a)?, num(st)?, num(b)?),
        _ => bail!("bad range '{s}'"),
    };
    if !(step > 0.0) {
        bail!("range step must be positive in '{s}'");
    }
    if hi < lo {
        bail!("empty range '{s}'");
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}
