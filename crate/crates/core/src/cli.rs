//! Command-line front end. `main.rs` only parses and calls [`run`].
//!
//! Without `--out` the result CSV goes to stdout. With `--out DIR` it is
//! written to `DIR/<name>.csv` next to a `manifest.json` describing the run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::design::Design;
use crate::error::Error;
use crate::io;
use crate::mc::DEFAULT_REPS;
use crate::oracle::{exact_moments_capped, Statistic, DEFAULT_CAP};
use crate::population::PotentialOutcomeTable;
use crate::replay::{replay, ReplayData, Strategy};
use crate::studies::{run_study, StudyConfig, StudyName};
use crate::variance::{
    neyman_var_blocked, neyman_var_cr, var_diff_finite, var_diff_mixed, var_diff_site_sampling, var_diff_strat,
    var_diff_strat_unequal, var_diff_two_stage, Decomposition, MixedMode, SizeRule, VarianceReport,
};

pub const DEFAULT_SEED: u64 = 1;

/// Relative tolerance for `--oracle` agreement.
pub const ORACLE_RTOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "blockcalc", version, about = "Variances of blocked and completely randomized experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed (overrides a study config's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replications (overrides a study config's reps).
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output directory for the CSV and manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Omit the `# blockcalc` header line from CSV output.
    #[arg(long, global = true)]
    pub no_comment: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact Neyman variances for a potential-outcome table.
    Variance(VarianceArgs),
    /// Superpopulation comparisons from stratum moments (or a table for `site`).
    Compare(CompareArgs),
    /// Run a canonical simulation study.
    Study(StudyArgs),
    /// Replay alternative blocking strategies on a realized experiment.
    Replay(ReplayArgs),
    /// Enumerate every assignment and report exact moments of a statistic.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    /// CSV with columns unit_id,block,y_t,y_c.
    pub table: PathBuf,
    /// `cr:N`, `blocked:FILE` (block,n_treated) or `blocked:N1,N2,...`.
    #[arg(long)]
    pub design: String,
    /// Check the closed forms against full enumeration.
    #[arg(long)]
    pub oracle: bool,
    /// Require the between/within decomposition.
    #[arg(long)]
    pub decompose: bool,
    /// Enumeration cap for `--oracle`.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameworkArg {
    Strat,
    Unequal,
    Mixed,
    TwoStage,
    Site,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedModeArg {
    CrSrsVsBkStrat,
    CrSrsVsCrStrat,
    Both,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Stratum CSV (stratum,weight,mu_t,mu_c,sigma2_t,sigma2_c,sigma2_tc);
    /// for `site`, a unit table whose blocks form the site population.
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub framework: FrameworkArg,
    /// Sample size (strat, unequal).
    #[arg(long)]
    pub n: Option<usize>,
    /// Overall treated proportion (strat, unequal, two-stage, site).
    #[arg(long)]
    pub p: Option<f64>,
    /// Per-stratum treated proportions (unequal).
    #[arg(long, value_delimiter = ',')]
    pub p_k: Vec<f64>,
    /// Treated and control counts (mixed).
    #[arg(long)]
    pub n_t: Option<usize>,
    #[arg(long)]
    pub n_c: Option<usize>,
    #[arg(long, value_enum, default_value_t = MixedModeArg::Both)]
    pub mode: MixedModeArg,
    /// Strata or sites drawn per experiment (two-stage, site).
    #[arg(long)]
    pub k_draw: Option<usize>,
    /// Units per drawn stratum (two-stage).
    #[arg(long, conflicts_with = "sizes")]
    pub stratum_size: Option<usize>,
    /// Units per stratum type, one per input row (two-stage).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(value_parser = ["ratio-sweep", "flexible-blocking", "misconceptions"])]
    pub name: String,
    /// JSON config; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// CSV with columns unit_id,block,treated,baseline,y.
    pub data: PathBuf,
    /// JSON list of {name, params}; all strategies when omitted.
    #[arg(long)]
    pub strategies: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticArg {
    TauHat,
    VarEstCr,
    VarEstBlocked,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    pub table: PathBuf,
    #[arg(long)]
    pub design: String,
    #[arg(long, value_enum, default_value_t = StatisticArg::TauHat)]
    pub statistic: StatisticArg,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

/// What a run wrote and how to reproduce it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

/// The result of one command before it is written anywhere.
struct Output {
    name: String,
    config: serde_json::Value,
    seed: u64,
    csv: Vec<u8>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let started = chrono::Utc::now();
    let out = match cli.global.threads {
        Some(0) => bail!("--threads must be positive"),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building thread pool")?
            .install(|| execute(&cli))?,
        None => execute(&cli)?,
    };
    let Some(dir) = &cli.global.out else {
        std::io::stdout().write_all(&out.csv)?;
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_name = format!("{}.csv", out.name);
    fs::write(dir.join(&csv_name), &out.csv).with_context(|| format!("writing {csv_name}"))?;
    let manifest = RunManifest {
        command: out.name.clone(),
        config_digest: digest(serde_json::to_string(&out.config)?.as_bytes()),
        config: out.config,
        seed: out.seed,
        version: io::VERSION.to_string(),
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        outputs: vec![csv_name],
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
        .context("writing manifest.json")?;
    Ok(())
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> anyhow::Result<String> {
    Ok(digest(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

fn execute(cli: &Cli) -> anyhow::Result<Output> {
    let g = &cli.global;
    match &cli.command {
        Command::Variance(a) => variance(a, g),
        Command::Compare(a) => compare(a, g),
        Command::Study(a) => study(a, g),
        Command::Replay(a) => replay_cmd(a, g),
        Command::Enumerate(a) => enumerate(a, g),
    }
}

fn csv_bytes<T: Serialize>(rows: &[T], g: &GlobalArgs, seed: u64) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let comment = (!g.no_comment).then(|| io::header_comment(seed));
    io::write_rows(&mut buf, rows, comment.as_deref())?;
    Ok(buf)
}

fn read_table(path: &Path) -> anyhow::Result<PotentialOutcomeTable> {
    io::read_table_file(path).with_context(|| format!("reading table {}", path.display()))
}

/// Parse `cr:N`, `blocked:FILE` or `blocked:N1,N2,...` against `table`.
pub fn parse_design(spec: &str, table: &PotentialOutcomeTable) -> anyhow::Result<Design> {
    let design = if let Some(n) = spec.strip_prefix("cr:") {
        Design::complete(n.trim().parse().with_context(|| format!("bad treated count in {spec:?}"))?)
    } else if let Some(rest) = spec.strip_prefix("blocked:") {
        let path = Path::new(rest);
        if path.is_file() {
            let f = fs::File::open(path).with_context(|| format!("opening {rest}"))?;
            Design::blocked(io::read_block_counts(f, table)?)
        } else {
            let counts: Result<Vec<usize>, _> = rest.split(',').map(|c| c.trim().parse()).collect();
            match counts {
                Ok(c) => Design::blocked(c),
                Err(_) => bail!("{rest:?} is neither a file nor a list of treated counts"),
            }
        }
    } else {
        bail!("design must be cr:N or blocked:FILE, got {spec:?}");
    };
    design.validate(table)?;
    Ok(design)
}

#[derive(Debug, Serialize)]
struct VarianceRow {
    design: String,
    n: usize,
    n_treated: usize,
    var_cr: f64,
    var_bk: Option<f64>,
    diff: Option<f64>,
    ratio: Option<f64>,
    between: Option<f64>,
    within: Option<f64>,
    oracle_var_cr: Option<f64>,
    oracle_var_bk: Option<f64>,
    oracle_max_rel_err: Option<f64>,
    oracle_match: Option<bool>,
}

fn rel_err(exact: f64, closed: f64) -> f64 {
    (exact - closed).abs() / exact.abs().max(closed.abs()).max(f64::MIN_POSITIVE)
}

fn variance(a: &VarianceArgs, g: &GlobalArgs) -> anyhow::Result<Output> {
    let table = read_table(&a.table)?;
    let design = parse_design(&a.design, &table)?;
    let n_t = design.total_treated();
    let var_cr = neyman_var_cr(&table, n_t)?;
    let mut row = VarianceRow {
        design: a.design.clone(),
        n: table.n(),
        n_treated: n_t,
        var_cr,
        var_bk: None,
        diff: None,
        ratio: None,
        between: None,
        within: None,
        oracle_var_cr: None,
        oracle_var_bk: None,
        oracle_max_rel_err: None,
        oracle_match: None,
    };
    if design.is_blocked() {
        let var_bk = neyman_var_blocked(&table, &design)?;
        row.var_bk = Some(var_bk);
        row.diff = Some(var_cr - var_bk);
        row.ratio = (var_cr != 0.0).then(|| var_bk / var_cr);
        if design.has_equal_proportions(&table) {
            let report = var_diff_finite(&table, n_t as f64 / table.n() as f64)?;
            if let Some(Decomposition::Finite { between, within }) = report.decomposition {
                row.between = Some(between);
                row.within = Some(within);
            }
        } else if a.decompose {
            bail!("the between/within decomposition requires equal proportions treated in every block");
        }
    } else if a.decompose {
        bail!("the between/within decomposition needs a blocked design");
    }
    if a.oracle {
        let cr = exact_moments_capped(&table, &Design::complete(n_t), &Statistic::TauHat, a.cap)?;
        let mut worst = rel_err(cr.variance, var_cr);
        row.oracle_var_cr = Some(cr.variance);
        if let Some(var_bk) = row.var_bk {
            let bk = exact_moments_capped(&table, &design, &Statistic::TauHat, a.cap)?;
            worst = worst.max(rel_err(bk.variance, var_bk));
            row.oracle_var_bk = Some(bk.variance);
        }
        row.oracle_max_rel_err = Some(worst);
        row.oracle_match = Some(worst <= ORACLE_RTOL);
    }
    let config = json!({
        "table": a.table.display().to_string(),
        "table_sha256": file_digest(&a.table)?,
        "design": design,
        "oracle": a.oracle,
        "decompose": a.decompose,
        "cap": a.cap,
    });
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    Ok(Output { name: "variance".into(), config, seed, csv: csv_bytes(&[row], g, seed)? })
}

#[derive(Debug, Serialize)]
struct CompareRow {
    framework: FrameworkArg,
    mode: Option<MixedModeArg>,
    var_cr: f64,
    var_bk: f64,
    diff: f64,
    ratio: Option<f64>,
    between: Option<f64>,
    within: Option<f64>,
    unequal_p: Option<f64>,
    std_error: Option<f64>,
    reps: Option<usize>,
}

fn compare_row(framework: FrameworkArg, mode: Option<MixedModeArg>, r: &VarianceReport) -> CompareRow {
    let (between, within, unequal_p) = match r.decomposition {
        Some(Decomposition::Finite { between, within }) => (Some(between), Some(within), None),
        Some(Decomposition::UnequalProportions { between, unequal_p }) => (Some(between), None, Some(unequal_p)),
        None => (None, None, None),
    };
    CompareRow {
        framework,
        mode,
        var_cr: r.var_cr,
        var_bk: r.var_bk,
        diff: r.diff,
        ratio: r.ratio(),
        between,
        within,
        unequal_p,
        std_error: r.std_error,
        reps: r.reps,
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, framework: FrameworkArg) -> anyhow::Result<T> {
    v.with_context(|| format!("--{flag} is required for --framework {}", framework_name(framework)))
}

fn framework_name(f: FrameworkArg) -> &'static str {
    match f {
        FrameworkArg::Strat => "strat",
        FrameworkArg::Unequal => "unequal",
        FrameworkArg::Mixed => "mixed",
        FrameworkArg::TwoStage => "two-stage",
        FrameworkArg::Site => "site",
    }
}

fn compare(a: &CompareArgs, g: &GlobalArgs) -> anyhow::Result<Output> {
    let f = a.framework;
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let reps = g.reps.unwrap_or(DEFAULT_REPS);
    let mut rows = Vec::new();
    let mut config = json!({
        "input": a.input.display().to_string(),
        "input_sha256": file_digest(&a.input)?,
        "framework": f,
    });
    let extra = config.as_object_mut().expect("object");
    match f {
        FrameworkArg::Strat | FrameworkArg::Unequal => {
            let m = io::read_strata_file(&a.input)?;
            let n = need(a.n, "n", f)?;
            let p = need(a.p, "p", f)?;
            extra.insert("n".into(), json!(n));
            extra.insert("p".into(), json!(p));
            let r = if f == FrameworkArg::Strat {
                var_diff_strat(&m, n, p)?
            } else {
                if a.p_k.is_empty() {
                    bail!("--p-k is required for --framework unequal");
                }
                extra.insert("p_k".into(), json!(a.p_k));
                var_diff_strat_unequal(&m, n, &a.p_k, p)?
            };
            rows.push(compare_row(f, None, &r));
        }
        FrameworkArg::Mixed => {
            let m = io::read_strata_file(&a.input)?;
            let n_t = need(a.n_t, "n-t", f)?;
            let n_c = need(a.n_c, "n-c", f)?;
            extra.insert("n_t".into(), json!(n_t));
            extra.insert("n_c".into(), json!(n_c));
            extra.insert("mode".into(), json!(a.mode));
            let modes: &[(MixedModeArg, MixedMode)] = match a.mode {
                MixedModeArg::CrSrsVsBkStrat => &[(MixedModeArg::CrSrsVsBkStrat, MixedMode::CrSrsVsBkStrat)],
                MixedModeArg::CrSrsVsCrStrat => &[(MixedModeArg::CrSrsVsCrStrat, MixedMode::CrSrsVsCrStrat)],
                MixedModeArg::Both => &[
                    (MixedModeArg::CrSrsVsBkStrat, MixedMode::CrSrsVsBkStrat),
                    (MixedModeArg::CrSrsVsCrStrat, MixedMode::CrSrsVsCrStrat),
                ],
            };
            for &(arg, mode) in modes {
                rows.push(compare_row(f, Some(arg), &var_diff_mixed(&m, n_t, n_c, mode)?));
            }
        }
        FrameworkArg::TwoStage => {
            let m = io::read_strata_file(&a.input)?;
            let k = need(a.k_draw, "k-draw", f)?;
            let p = need(a.p, "p", f)?;
            let rule = match (a.stratum_size, a.sizes.is_empty()) {
                (Some(s), _) => SizeRule::Constant(s),
                (None, false) => SizeRule::PerType(a.sizes.clone()),
                (None, true) => bail!("--stratum-size or --sizes is required for --framework two-stage"),
            };
            extra.insert("k_draw".into(), json!(k));
            extra.insert("p".into(), json!(p));
            extra.insert("size_rule".into(), json!(rule));
            extra.insert("reps".into(), json!(reps));
            extra.insert("seed".into(), json!(seed));
            rows.push(compare_row(f, None, &var_diff_two_stage(&m, k, &rule, p, reps, seed)?));
        }
        FrameworkArg::Site => {
            let population = read_table(&a.input)?.split_blocks();
            let k = need(a.k_draw, "k-draw", f)?;
            let p = need(a.p, "p", f)?;
            extra.insert("k_draw".into(), json!(k));
            extra.insert("p".into(), json!(p));
            extra.insert("reps".into(), json!(reps));
            extra.insert("seed".into(), json!(seed));
            rows.push(compare_row(f, None, &var_diff_site_sampling(&population, k, p, reps, seed)?));
        }
    }
    Ok(Output { name: "compare".into(), config, seed, csv: csv_bytes(&rows, g, seed)? })
}

fn study(a: &StudyArgs, g: &GlobalArgs) -> anyhow::Result<Output> {
    let name: StudyName = a.name.parse()?;
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            StudyConfig::from_json(name, &text)?
        }
        None => StudyConfig::default_for(name),
    };
    if let Some(seed) = g.seed {
        config.set_seed(seed);
    }
    if let Some(reps) = g.reps {
        if reps == 0 {
            bail!("--reps must be positive");
        }
        config.set_reps(reps);
    }
    let rows = run_study(&config)?;
    let seed = config.seed();
    let mut csv = Vec::new();
    let comment = (!g.no_comment).then(|| io::header_comment(seed));
    rows.write_csv(&mut csv, comment.as_deref())?;
    Ok(Output { name: name.as_str().into(), config: serde_json::to_value(&config)?, seed, csv })
}

fn replay_cmd(a: &ReplayArgs, g: &GlobalArgs) -> anyhow::Result<Output> {
    let f = fs::File::open(&a.data).with_context(|| format!("opening {}", a.data.display()))?;
    let data = ReplayData::from_rows(io::read_replay_rows(f)?)?;
    let strategies: Vec<Strategy> = match &a.strategies {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Error::Input(format!("strategies: {e}")))?
        }
        None => Strategy::defaults(),
    };
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let rows = replay(&data, &strategies, seed)?;
    let config = json!({
        "data": a.data.display().to_string(),
        "data_sha256": file_digest(&a.data)?,
        "strategies": strategies,
        "seed": seed,
    });
    Ok(Output { name: "replay".into(), config, seed, csv: csv_bytes(&rows, g, seed)? })
}

#[derive(Debug, Serialize)]
struct EnumerateRow {
    design: String,
    statistic: StatisticArg,
    assignments: u64,
    mean: f64,
    variance: f64,
}

fn enumerate(a: &EnumerateArgs, g: &GlobalArgs) -> anyhow::Result<Output> {
    let table = read_table(&a.table)?;
    let design = parse_design(&a.design, &table)?;
    let stat = match a.statistic {
        StatisticArg::TauHat => Statistic::TauHat,
        StatisticArg::VarEstCr => Statistic::VarEstCr,
        StatisticArg::VarEstBlocked => Statistic::VarEstBlocked,
    };
    let m = exact_moments_capped(&table, &design, &stat, a.cap)?;
    let row = EnumerateRow {
        design: a.design.clone(),
        statistic: a.statistic,
        assignments: m.count,
        mean: m.mean,
        variance: m.variance,
    };
    let config = json!({
        "table": a.table.display().to_string(),
        "table_sha256": file_digest(&a.table)?,
        "design": design,
        "statistic": a.statistic,
        "cap": a.cap,
    });
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    Ok(Output { name: "enumerate".into(), config, seed, csv: csv_bytes(&[row], g, seed)? })
}
