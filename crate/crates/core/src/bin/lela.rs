use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lela::bench::{adversarial_product, add_noise, gen_powerlaw, run_experiment, summarize, write_rows, write_summary, Algorithm, ExperimentConfig};
use lela::distpca::{centralized_reference, run_distpca, DistConfig, DistScenario, PartitionPolicy, DEFAULT_INIT_ROUNDS};
use lela::lela::{evaluate, lela, spectral_norm, LelaConfig};
use lela::linalg::io::{read_matrix_market, write_factorization};
use lela::linalg::{dense_svd, DenseMatrix, Factorization, Product, Residual, ORACLE_GUARD};
use lela::matprod::{lowrank_covariance, lowrank_product, stagewise_covariance_baseline, stagewise_product_baseline, symmetrized, ProductTask};
use lela::sampling::SamplerKind;
use lela::waltmin::SplitMode;
use lela::{LelaError, Result};

#[derive(Parser)]
#[command(name = "lela", version, about = "Sampled low-rank approximation, products and distributed PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-r approximation of a matrix from sampled entries.
    Lela(LelaArgs),
    /// Rank-r approximation of A·B without forming the product.
    Product(ProductArgs),
    /// Rank-r approximation of Y·Yᵀ.
    Covariance(CovarianceArgs),
    /// Simulated row-partitioned run with a communication ledger.
    Distpca(DistArgs),
    /// Synthetic experiments written as CSV.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Column count; defaults to n.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Spectral norm of the added Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long, env = "LELA_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "multinomial", value_parser = parse_sampler)]
    mode: SamplerKind,
    #[arg(long, default_value = "reuse", value_parser = parse_split)]
    split: SplitMode,
    /// MatrixMarket input instead of a generated instance.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

impl Common {
    fn d(&self) -> usize {
        self.d.unwrap_or(self.n)
    }

    /// The input matrix and, for generated instances, its low-rank part.
    fn instance(&self) -> Result<(DenseMatrix, Option<Factorization>)> {
        match &self.matrix {
            Some(path) => Ok((read_matrix_market(path)?, None)),
            None => {
                let (mr, svd) = gen_powerlaw(self.n, self.d(), self.rank, self.alpha, self.seed)?;
                Ok((add_noise(&mr, self.noise, self.seed.wrapping_add(1))?, Some(svd.to_factorization())))
            }
        }
    }

    fn default_m(&self, n: usize) -> usize {
        8 * n * self.rank
    }
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    s.parse().map_err(|e: LelaError| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<SplitMode, String> {
    s.parse().map_err(|e: LelaError| e.to_string())
}

fn parse_partition(s: &str) -> std::result::Result<PartitionPolicy, String> {
    s.parse().map_err(|e: LelaError| e.to_string())
}

#[derive(Args)]
struct LelaArgs {
    #[command(flatten)]
    common: Common,
    /// Sample budget; defaults to 8·n·r.
    #[arg(long)]
    m: Option<usize>,
    /// Also report the best rank-r errors (dense SVD).
    #[arg(long)]
    oracle: bool,
    /// Hold out 5% of samples and stop early on rising error.
    #[arg(long)]
    cross_validate: bool,
    /// Write <out>.U.mtx, <out>.V.mtx and <out>.meta.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProductArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<usize>,
    /// MatrixMarket file for B; with --matrix for A.
    #[arg(long)]
    matrix_b: Option<PathBuf>,
    /// Also run the stagewise baseline.
    #[arg(long)]
    stagewise: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovarianceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<usize>,
    /// Replace the output by the rank-r part of (M̂ + M̂ᵀ)/2.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long)]
    stagewise: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 4)]
    servers: usize,
    #[arg(long, default_value_t = DEFAULT_INIT_ROUNDS)]
    init_rounds: usize,
    #[arg(long, default_value = "contiguous", value_parser = parse_partition)]
    partition: PartitionPolicy,
    /// key=value scenario file; overrides the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Compare against the single-machine reference.
    #[arg(long)]
    check: bool,
    /// Ledger CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated budgets; defaults to {4,8,16,32}·n·r.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Comma-separated sketch sizes; each must equal its m / n.
    #[arg(long, value_delimiter = ',')]
    l: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "lela,gaussian-projection")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 4)]
    servers: usize,
    #[arg(long, default_value_t = 0)]
    power_steps: usize,
    /// Record wall time per row (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
    /// Per-trial CSV destination; stdout gets the summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn report(key: &str, value: impl std::fmt::Display) {
    println!("{key}: {value}");
}

fn report_f(key: &str, x: f64) {
    println!("{key}: {x:.6e}");
}

fn cmd_lela(a: LelaArgs) -> Result<()> {
    let c = &a.common;
    let (m, low) = c.instance()?;
    let mut cfg = LelaConfig::new(c.rank, a.m.unwrap_or(c.default_m(m.nrows())), c.iters, c.seed).with_sampler(c.mode).with_oracle(a.oracle);
    cfg.split = c.split;
    cfg.cross_validate = a.cross_validate;
    let rep = lela(&m, &cfg)?;
    report("shape", format!("{}x{}", m.nrows(), m.ncols()));
    report("samples", rep.sample_count);
    report("passes_over_M", rep.passes_over_m);
    report_f("spectral_err", rep.spectral_err);
    report_f("fro_err", rep.fro_err);
    if let (Some(s), Some(f)) = (rep.oracle_spectral, rep.oracle_fro) {
        report_f("oracle_spectral", s);
        report_f("oracle_fro", f);
    }
    if let Some(t) = low {
        report_f("lowrank_err", spectral_norm(&Residual::new(&t, &rep.factorization)));
    }
    report("trimmed_rows", rep.trimmed_rows.len());
    report("unobserved_rows", rep.unobserved_rows.len());
    report("unobserved_cols", rep.unobserved_cols.len());
    if let Some(out) = a.out {
        write_factorization(out, &rep.factorization, c.iters, c.seed)?;
    }
    Ok(())
}

fn cmd_product(a: ProductArgs) -> Result<()> {
    let c = &a.common;
    let (am, bm, truth) = match (&c.matrix, &a.matrix_b) {
        (Some(pa), Some(pb)) => (read_matrix_market(pa)?, read_matrix_market(pb)?, None),
        (None, None) => {
            let inst = adversarial_product(c.n, c.d(), c.n, c.rank, c.seed)?;
            (inst.a, inst.b, Some(inst.product))
        }
        _ => return Err(LelaError::Parameter("--matrix and --matrix-b must be given together".into())),
    };
    let mut task = ProductTask::new(&am, &bm, c.rank, a.m.unwrap_or(c.default_m(am.nrows().max(bm.ncols()))), c.iters, c.seed);
    task.split = c.split;
    let f = lowrank_product(&task)?;
    let ab = Product::new(&am, &bm);
    report("shape", format!("{}x{}", am.nrows(), bm.ncols()));
    report_f("spectral_err", spectral_norm(&Residual::new(&ab, &f)));
    if let Some(t) = &truth {
        report_f("lowrank_err", spectral_norm(&Residual::new(t, &f)));
    }
    if a.stagewise {
        let g = stagewise_product_baseline(&task)?;
        report_f("stagewise_spectral_err", spectral_norm(&Residual::new(&ab, &g)));
    }
    if let Some(out) = a.out {
        write_factorization(out, &f, c.iters, c.seed)?;
    }
    Ok(())
}

fn cmd_covariance(a: CovarianceArgs) -> Result<()> {
    let c = &a.common;
    let (y, _) = c.instance()?;
    let m = a.m.unwrap_or(c.default_m(y.nrows()));
    let mut f = lowrank_covariance(&y, c.rank, m, c.iters, c.seed)?;
    if a.symmetrize {
        f = symmetrized(&f, c.rank)?;
    }
    let yt = y.transpose();
    let full = Product::new(&y, &yt);
    report("shape", format!("{}x{}", y.nrows(), y.nrows()));
    report_f("spectral_err", spectral_norm(&Residual::new(&full, &f)));
    if y.nrows().min(y.ncols()) <= ORACLE_GUARD {
        let (s, _) = dense_svd(&y)?.tail_errors(c.rank);
        report_f("oracle_spectral", s * s);
    }
    if a.stagewise {
        let g = stagewise_covariance_baseline(&y, c.rank, m, c.iters, c.seed)?;
        report_f("stagewise_spectral_err", spectral_norm(&Residual::new(&full, &g)));
    }
    if let Some(out) = a.out {
        write_factorization(out, &f, c.iters, c.seed)?;
    }
    Ok(())
}

fn cmd_distpca(a: DistArgs) -> Result<()> {
    let mut c = a.common.clone();
    let mut cfg = DistConfig::new(a.servers, c.rank, 0, c.iters, c.seed);
    cfg.init_rounds = a.init_rounds;
    cfg.policy = a.partition;
    cfg.split = c.split;
    if let Some(path) = &a.config {
        let sc = DistScenario::read(path)?;
        c.n = sc.n;
        c.d = Some(sc.d);
        c.alpha = sc.alpha;
        c.rank = sc.config.rank;
        c.seed = sc.config.seed;
        cfg = sc.config;
    }
    let (m, _) = c.instance()?;
    if cfg.m == 0 {
        cfg.m = a.m.unwrap_or(c.default_m(m.nrows()));
    }
    let out = run_distpca(&m, &cfg)?;
    let (d, s) = (m.ncols(), cfg.servers);
    report("servers", s);
    report("samples", out.sample_count);
    report("ledger_total", out.ledger.total());
    report_f("ledger_bound", out.bound(d, s, cfg.rank, cfg.init_rounds));
    report("ledger_consistent", out.ledger.verify_totals());
    let errs = evaluate(&m, &out.factorization, cfg.rank, false)?;
    report_f("spectral_err", errs.spectral_err);
    report_f("fro_err", errs.fro_err);
    if a.check {
        let reference = centralized_reference(&m, &cfg)?;
        let gap = out.factorization.u.sub(&reference.u)?.max_abs().max(out.factorization.v.sub(&reference.v)?.max_abs());
        report_f("max_gap_to_reference", gap);
    }
    if let Some(path) = a.out {
        out.ledger.write_csv(path)?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let c = &a.common;
    let base = ExperimentConfig {
        n: c.n,
        d: c.d(),
        r: c.rank,
        alpha: c.alpha,
        noise_spectral: c.noise,
        trials: a.trials,
        iterations: c.iters,
        seed: c.seed,
        algorithms: a.algorithms.clone(),
        sampler: c.mode,
        split: c.split,
        servers: a.servers,
        power_steps: a.power_steps,
        timing: a.timing,
        ..ExperimentConfig::default()
    };
    let mut cfg = if a.m.is_empty() { base.with_multipliers(&[4, 8, 16, 32]) } else { base.with_budgets(a.m.clone()) };
    if !a.l.is_empty() {
        cfg.l_grid = a.l.clone();
    }
    let rows = run_experiment(&cfg)?;
    match &a.out {
        Some(path) => write_rows(&rows, std::fs::File::create(path)?)?,
        None => write_rows(&rows, std::io::stdout().lock())?,
    }
    if a.out.is_some() {
        write_summary(&summarize(&rows), std::io::stdout().lock())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Lela(a) => cmd_lela(a),
        Command::Product(a) => cmd_product(a),
        Command::Covariance(a) => cmd_covariance(a),
        Command::Distpca(a) => cmd_distpca(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
