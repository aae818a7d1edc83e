use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use ravg::error::{Error, Result};
use ravg::eval::{beta_min_bound_gram_floor, beta_min_bound_population};
use ravg::experiments::{
    self, AdaptationTableConfig, BoundsExperimentConfig, RegretExperimentConfig, Scale,
    TableConfig,
};
use ravg::extract::{self, FsaSchedule, Penalty};
use ravg::moments::{MomentSet, Observation, WeightMode};
use ravg::simgen::{expand_interactions, sparse_beta, write_csv, GenConfig, SyntheticStream, Task};
use ravg::snapshot::{read_snapshot, write_snapshot};
use ravg::standardize::{standardize, StandardizedMoments, DEFAULT_MIN_SIGMA};
use ravg::SparseModel;

use crate::csvio::for_each_row;
use crate::lock::SnapshotLock;

// ---------------------------------------------------------------- accumulate

#[derive(Args)]
pub struct AccumulateArgs {
    /// CSV input path, or '-' for stdin
    #[arg(long, default_value = "-")]
    input: String,
    /// Snapshot file to create or continue updating
    #[arg(long)]
    snapshot: PathBuf,
    /// Exponential forgetting rate per observation (drift adaptation)
    #[arg(long)]
    adapt: Option<f64>,
    /// Merge these uniform snapshots instead of reading CSV
    #[arg(long, num_args = 1.., conflicts_with_all = ["input", "adapt", "expand_interactions"])]
    merge: Vec<PathBuf>,
    /// Expand each row with squares and pairwise products before updating
    #[arg(long)]
    expand_interactions: bool,
}

fn load_snapshot(path: &Path) -> Result<MomentSet> {
    read_snapshot(BufReader::new(File::open(path)?))
}

fn store_snapshot(m: &MomentSet, path: &Path) -> Result<()> {
    let _lock = SnapshotLock::acquire(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn accumulate(args: AccumulateArgs) -> Result<()> {
    if !args.merge.is_empty() {
        let mut merged = load_snapshot(&args.merge[0])?;
        for path in &args.merge[1..] {
            let other = load_snapshot(path)?;
            merged = MomentSet::merge(&merged, &other)?;
        }
        store_snapshot(&merged, &args.snapshot)?;
        println!(
            "merged {} snapshots: p={} n={}",
            args.merge.len(),
            merged.p(),
            merged.n()
        );
        return Ok(());
    }

    let mut existing = if args.snapshot.exists() {
        Some(load_snapshot(&args.snapshot)?)
    } else {
        None
    };
    let mut rows = 0usize;
    let mut expanded = Vec::new();
    let mut sink = |x: &[f64], y: f64| -> Result<()> {
        let x = if args.expand_interactions {
            expanded = expand_interactions(x);
            &expanded[..]
        } else {
            x
        };
        let m = match &mut existing {
            Some(m) => m,
            None => {
                let mode = match args.adapt {
                    Some(rate) => WeightMode::Exponential { rate },
                    None => WeightMode::Uniform,
                };
                existing = Some(MomentSet::new(x.len(), mode)?);
                existing.as_mut().unwrap()
            }
        };
        m.update(Observation { x, y })?;
        rows += 1;
        Ok(())
    };
    if args.input == "-" {
        let stdin = io::stdin();
        for_each_row(stdin.lock(), &mut sink)?;
    } else {
        for_each_row(BufReader::new(File::open(&args.input)?), &mut sink)?;
    }
    let m = existing.ok_or_else(|| Error::Parse {
        line: 0,
        reason: "input contained no observations".into(),
    })?;
    store_snapshot(&m, &args.snapshot)?;
    println!("accumulated {rows} observations: p={} n={}", m.p(), m.n());
    Ok(())
}

// ------------------------------------------------------------------- extract

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ols,
    Olsth,
    Ofsa,
    Lasso,
    Elnet,
    Mcp,
}

#[derive(Args)]
pub struct ExtractArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Target sparsity (required for olsth/ofsa; tunes lambda for penalties)
    #[arg(long)]
    k: Option<usize>,
    /// Fixed penalty weight; omit to tune toward --k
    #[arg(long)]
    lambda: Option<f64>,
    /// Elastic net quadratic weight
    #[arg(long, default_value_t = 0.5)]
    l2_mix: f64,
    /// MCP constant b
    #[arg(long, default_value_t = 3.0)]
    mcp_b: f64,
    /// Force a ridge first step with this weight (olsth)
    #[arg(long)]
    ridge: Option<f64>,
    /// Gradient iterations for the penalized methods
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Learning rate override
    #[arg(long)]
    eta: Option<f64>,
    /// Penalty grid size when tuning lambda
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Model output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit a solution path over k=lo..hi (inclusive), e.g. --path 1..20
    #[arg(long)]
    path: Option<String>,
    /// Solution path CSV output (stdout when omitted)
    #[arg(long)]
    path_out: Option<PathBuf>,
}

fn require_k(k: Option<usize>) -> Result<usize> {
    k.ok_or_else(|| Error::InvalidParameter("this method needs --k".into()))
}

fn extract_one(args: &ExtractArgs, sm: &StandardizedMoments, k: Option<usize>) -> Result<SparseModel> {
    match args.method {
        MethodArg::Ols => extract::ols(sm),
        MethodArg::Olsth => extract::ols_th(sm, require_k(k)?, args.ridge),
        MethodArg::Ofsa => extract::ofsa(sm, &FsaSchedule::for_sparsity(require_k(k)?)),
        MethodArg::Lasso | MethodArg::Elnet | MethodArg::Mcp => {
            let penalty = match args.method {
                MethodArg::Lasso => Penalty::Lasso,
                MethodArg::Elnet => Penalty::ElasticNet { l2_mix: args.l2_mix },
                _ => Penalty::Mcp { b: args.mcp_b },
            };
            match args.lambda {
                Some(lambda) => {
                    let spec = extract::PenaltySpec::new(penalty, lambda)?;
                    extract::penalized_gd(sm, &spec, args.iters, args.eta)
                }
                None => {
                    let out = extract::tune_lambda_for_sparsity(
                        sm,
                        &penalty,
                        require_k(k)?,
                        args.grid,
                        args.iters,
                    )?;
                    if !out.target_met {
                        eprintln!(
                            "warning: no grid point produced a nonempty model at sparsity <= {}",
                            require_k(k)?
                        );
                    }
                    eprintln!("tuned lambda = {}", out.lambda);
                    Ok(out.model)
                }
            }
        }
    }
}

fn parse_range(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split("..").collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].parse(), parts[1].parse()) {
            if a >= 1 && a <= b {
                return Ok((a, b));
            }
        }
    }
    Err(Error::InvalidParameter(format!(
        "expected a range like 1..20, got {text:?}"
    )))
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let m = load_snapshot(&args.snapshot)?;
    let sm = standardize(&m, DEFAULT_MIN_SIGMA)?;

    if let Some(range) = &args.path {
        let (lo, hi) = parse_range(range)?;
        let mut csv = String::from("k,feature,beta_orig,beta_std\n");
        for k in lo..=hi {
            let model = extract_one(&args, &sm, Some(k))?;
            for (slot, &j) in model.support().iter().enumerate() {
                csv.push_str(&format!(
                    "{k},{j},{},{}\n",
                    model.beta_orig()[slot],
                    model.beta_std()[slot]
                ));
            }
        }
        match &args.path_out {
            Some(p) => std::fs::write(p, csv)?,
            None => print!("{csv}"),
        }
        return Ok(());
    }

    let model = extract_one(&args, &sm, args.k)?;
    match &args.output {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            model.write_to(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut buf = Vec::new();
            model.write_to(&mut buf)?;
            io::stdout().write_all(&buf)?;
        }
    }
    eprintln!(
        "extracted model: support size {}, intercept {:.6}",
        model.support().len(),
        model.intercept()
    );
    Ok(())
}

// ------------------------------------------------------------------ simulate

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    k_star: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_corr: f64,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    task: TaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable observation noise
    #[arg(long)]
    noiseless: bool,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = GenConfig {
        p: args.p,
        n: args.n,
        k_star: args.k_star,
        beta_strength: if args.k_star == 0 { 1.0 } else { args.beta },
        alpha_corr: args.alpha_corr,
        task: match args.task {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        },
        seed: args.seed,
        noise: !args.noiseless,
    };
    cfg.validate()?;
    let beta_star = if args.k_star == 0 {
        vec![0.0; args.p]
    } else {
        sparse_beta(args.p, args.k_star, args.beta)?
    };
    let mut stream = SyntheticStream::new(cfg, beta_star);
    let mut x = vec![0.0; args.p];
    let rows = (0..args.n).map(move |_| {
        let y = stream.next_into(&mut x);
        (x.clone(), y)
    });
    match &args.output {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_csv(&mut w, args.p, rows)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            write_csv(stdout.lock(), args.p, rows)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- experiment

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    T2,
    T3,
    T4,
    Regret,
    Bounds,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    table: TableArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// Override the preset's seed count
    #[arg(long)]
    seeds: Option<usize>,
    /// Master seed; all randomness derives from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for result CSVs
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let scale = match args.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    match args.table {
        TableArg::T2 | TableArg::T3 => {
            let mut cfg = match args.table {
                TableArg::T2 => TableConfig::regression(scale),
                _ => TableConfig::classification(scale),
            };
            if let Some(s) = args.seeds {
                cfg.seeds = s;
            }
            let res = experiments::run_table(&cfg, args.seed)?;
            let tag = match args.table {
                TableArg::T2 => "t2",
                _ => "t3",
            };
            write_out(&args.out_dir, &format!("{tag}_per_seed.csv"), &res.per_seed_csv())?;
            write_out(&args.out_dir, &format!("{tag}_summary.csv"), &res.summary_csv())?;
            print!("{}", res.summary_csv());
        }
        TableArg::T4 => {
            let mut cfg = AdaptationTableConfig::defaults();
            if let Some(s) = args.seeds {
                cfg.seeds = s;
            }
            let res = experiments::run_adaptation_table(&cfg, args.seed)?;
            write_out(&args.out_dir, "t4_per_seed.csv", &res.csv())?;
            println!(
                "adaptive rmse {:.4}, non-adaptive rmse {:.4}",
                res.adaptive_mean, res.non_adaptive_mean
            );
        }
        TableArg::Regret => {
            let mut cfg = RegretExperimentConfig::defaults();
            if let Some(s) = args.seeds {
                cfg.seeds = s;
            }
            let res = experiments::run_regret_experiment(&cfg, args.seed)?;
            write_out(&args.out_dir, "regret_trace.csv", &res.csv())?;
            println!("log-log slope {:.4}", res.slope);
        }
        TableArg::Bounds => {
            let mut cfg = BoundsExperimentConfig::defaults();
            if let Some(s) = args.seeds {
                cfg.seeds = s;
            }
            let res = experiments::run_bounds_experiment(&cfg, args.seed)?;
            write_out(&args.out_dir, "bounds.csv", &res.csv())?;
            print!("{}", res.csv());
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- bounds

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum BoundKindArg {
    /// bound from an eigenvalue floor of the design Gram
    GramFloor,
    /// bound from population covariance with finite-sample correction
    PopCov,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: BoundKindArg,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// eigenvalue floor (gram-floor kind)
    #[arg(long)]
    lambda: Option<f64>,
    /// smallest eigenvalue of the covariance square root (pop-cov kind)
    #[arg(long)]
    lambda_min_sqrt: Option<f64>,
    /// largest diagonal entry of the covariance (pop-cov kind)
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha_exp: f64,
}

pub fn bounds(args: BoundsArgs) -> Result<()> {
    let value = match args.kind {
        BoundKindArg::GramFloor => {
            let lambda = args
                .lambda
                .ok_or_else(|| Error::InvalidParameter("gram-floor needs --lambda".into()))?;
            beta_min_bound_gram_floor(args.n, args.p, args.sigma, lambda, args.alpha_exp)?
        }
        BoundKindArg::PopCov => {
            let ls = args.lambda_min_sqrt.ok_or_else(|| {
                Error::InvalidParameter("pop-cov needs --lambda-min-sqrt".into())
            })?;
            let rho = args
                .rho
                .ok_or_else(|| Error::InvalidParameter("pop-cov needs --rho".into()))?;
            beta_min_bound_population(args.n, args.p, args.sigma, ls, rho, args.alpha_exp)?
        }
    };
    println!("{value}");
    Ok(())
}

// ------------------------------------------------------------------- inspect

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long)]
    snapshot: PathBuf,
}

pub fn inspect(args: InspectArgs) -> Result<()> {
    let m = load_snapshot(&args.snapshot)?;
    let mode = match m.mode() {
        WeightMode::Uniform => "uniform".to_string(),
        WeightMode::Exponential { rate } => format!("exponential(rate={rate})"),
    };
    println!("p: {}", m.p());
    println!("n: {}", m.n());
    println!("effective n: {}", m.effective_n());
    println!("mode: {mode}");
    println!("mu_y: {}", m.mu_y());
    println!("s_yy: {}", m.s_yy());
    println!("var_y: {}", m.s_yy() - m.mu_y() * m.mu_y());
    let show = m.p().min(5);
    let head: Vec<String> = m.mu_x()[..show].iter().map(|v| format!("{v:.6}")).collect();
    println!("mu_x[..{show}]: [{}]", head.join(", "));
    Ok(())
}
