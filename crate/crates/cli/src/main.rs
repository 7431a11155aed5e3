//! `trip` — audit permutation feature importance for extrapolation.
//!
//! Subcommands: `simulate` (write simulated datasets), `audit` (full
//! extrapolation audit of a CSV or generator), `cod` (dimensionality sweep),
//! `spca-audit` (sparse-PCA reduction, then audit the components).

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use trip_cli::config::{AuditConfig, CodConfig, DataSource, SimulateConfig, SpcaConfig};
use trip_cli::error::{CliError, CliResult};
use trip_cli::{pipeline, report};
use trip_core::data::Task;
use trip_core::forest::ForestParams;
use trip_core::simgen::{GeneratorKind, GeneratorSpec};
use trip_core::spca::SparsityTarget;

#[derive(Parser)]
#[command(
    name = "trip",
    about = "Detect unreliable permutation feature importance via leaf-community distances and paired permutation tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated datasets and write them as CSV files.
    Simulate(SimulateArgs),
    /// Audit a dataset: forest, ALCD table, paired tests, PFI.
    Audit(AuditArgs),
    /// Dimensionality sweep: mean p-values across (n, p, metric exponent).
    Cod(CodArgs),
    /// Reduce with sparse PCA, then audit the component scores.
    SpcaAudit(SpcaAuditArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum KindArg {
    TwoCorrelated,
    Circle,
    EqualBlocks,
    VariedBlocks,
    Cod,
}

impl From<KindArg> for GeneratorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::TwoCorrelated => GeneratorKind::TwoCorrelated,
            KindArg::Circle => GeneratorKind::Circle,
            KindArg::EqualBlocks => GeneratorKind::EqualBlocks,
            KindArg::VariedBlocks => GeneratorKind::VariedBlocks,
            KindArg::Cod => GeneratorKind::Cod,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

/// `single`, or `total:<n>` for a bound on total nonzero weights.
#[derive(Clone, Copy, Debug)]
struct SparsityArg(SparsityTarget);

impl FromStr for SparsityArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "single" {
            return Ok(SparsityArg(SparsityTarget::SingleMembership));
        }
        if let Some(n) = s.strip_prefix("total:") {
            let n: usize = n
                .parse()
                .map_err(|_| format!("bad nonzero bound in `{s}`"))?;
            return Ok(SparsityArg(SparsityTarget::TotalNonzeros(n)));
        }
        Err(format!(
            "expected `single` or `total:<n>`, got `{s}`"
        ))
    }
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Audit a CSV file (with --target and --task).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Target column name of the CSV.
    #[arg(long)]
    target: Option<String>,
    /// Task kind of the CSV target.
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Audit a simulated dataset instead of a CSV.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Sample count of the generator.
    #[arg(long)]
    n: Option<usize>,
    /// Feature count of the generator (block kinds).
    #[arg(long)]
    p: Option<usize>,
    /// Block correlations; one value recycles across blocks.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho: Option<Vec<f64>>,
    /// Correlated-block size.
    #[arg(long)]
    block_size: Option<usize>,
    /// Response noise standard deviation.
    #[arg(long)]
    noise_sd: Option<f64>,
}

impl SourceArgs {
    fn resolve(&self, fallback: Option<DataSource>, seed: u64) -> CliResult<DataSource> {
        if let Some(path) = &self.csv {
            let target = self
                .target
                .clone()
                .ok_or_else(|| CliError::Input("--csv requires --target".into()))?;
            let task = self
                .task
                .ok_or_else(|| CliError::Input("--csv requires --task".into()))?;
            return Ok(DataSource::Csv {
                path: path.clone(),
                target,
                task: task.into(),
            });
        }
        if let Some(kind) = self.kind {
            return Ok(DataSource::Generator(self.generator_spec(kind, seed)?));
        }
        fallback.ok_or_else(|| {
            CliError::Input("no data source: pass --csv or --kind (or a --config with one)".into())
        })
    }

    fn generator_spec(&self, kind: KindArg, seed: u64) -> CliResult<GeneratorSpec> {
        let rhos = self.rho.clone().unwrap_or_else(|| vec![0.75]);
        let n = self.n.unwrap_or(500);
        let spec = match kind {
            KindArg::TwoCorrelated => GeneratorSpec::two_correlated(n, rhos[0], seed),
            KindArg::Circle => GeneratorSpec::circle(n, seed),
            KindArg::EqualBlocks => GeneratorSpec::equal_blocks(
                n,
                self.p.unwrap_or(8),
                self.block_size.unwrap_or(3),
                rhos[0],
                seed,
            ),
            KindArg::VariedBlocks => GeneratorSpec::varied_blocks(
                n,
                self.p.unwrap_or(8),
                self.block_size.unwrap_or(3),
                rhos,
                seed,
            ),
            KindArg::Cod => GeneratorSpec::cod(n, self.p.unwrap_or(10), rhos[0], seed),
        };
        let mut spec = spec;
        if let Some(noise_sd) = self.noise_sd {
            spec.noise_sd = noise_sd;
        }
        Ok(spec)
    }
}

#[derive(Args, Clone, Copy)]
struct ForestArgs {
    /// Trees in the forest.
    #[arg(long)]
    trees: Option<usize>,
    /// Features tried per split.
    #[arg(long)]
    mtry: Option<usize>,
    /// Minimum rows per leaf.
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Depth cap.
    #[arg(long)]
    max_depth: Option<usize>,
}

impl ForestArgs {
    fn apply(&self, mut params: ForestParams) -> ForestParams {
        if let Some(trees) = self.trees {
            params.trees = trees;
        }
        if self.mtry.is_some() {
            params.mtry = self.mtry;
        }
        if self.min_leaf.is_some() {
            params.min_leaf = self.min_leaf;
        }
        if self.max_depth.is_some() {
            params.max_depth = self.max_depth;
        }
        params
    }
}

#[derive(Args, Clone, Copy)]
struct ProtocolArgs {
    /// Permutation repetitions per feature (R).
    #[arg(long)]
    reps: Option<usize>,
    /// Sign-flip rounds per test.
    #[arg(long)]
    pi: Option<usize>,
    /// Independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Train fraction in (0, 1]; 1.0 evaluates on the training set.
    #[arg(long)]
    split: Option<f64>,
    /// Minkowski exponent of the distance.
    #[arg(long)]
    metric_exponent: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Also compute the permute-and-relearn oracle (one refit per feature
    /// per run).
    #[arg(long)]
    relearn: bool,
    /// Keep only this fraction of columns by training variance.
    #[arg(long)]
    top_variance: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CodArgs {
    /// Observation counts of the sweep.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Feature counts of the sweep.
    #[arg(long, value_delimiter = ',')]
    p_list: Option<Vec<usize>>,
    /// Minkowski exponents to sweep.
    #[arg(long, value_delimiter = ',')]
    exponents: Option<Vec<f64>>,
    /// Within-block correlation.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SpcaAuditArgs {
    #[command(flatten)]
    audit: AuditArgs,
    /// Component count R.
    #[arg(long)]
    components: Option<usize>,
    /// Ridge penalty on the weight columns.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Explicit increasing lambda1 grid.
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    /// `single` (each feature in at most one component) or `total:<n>`.
    #[arg(long)]
    sparsity_target: Option<SparsityArg>,
    /// Treat sparse-PCA non-convergence as fatal (exit 4).
    #[arg(long)]
    strict: bool,
}

fn load_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config `{}`: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad config `{}`: {e}", path.display())))
}

fn build_audit_config(args: &AuditArgs, spca: Option<SpcaConfig>) -> CliResult<AuditConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<AuditConfig>(path)?,
        None => {
            let seed = args.protocol.seed.unwrap_or(1);
            let source = args.source.resolve(None, seed)?;
            AuditConfig::new(source, seed)
        }
    };
    if let Some(seed) = args.protocol.seed {
        cfg.seed = seed;
    }
    if args.source.csv.is_some() || args.source.kind.is_some() {
        cfg.source = args.source.resolve(Some(cfg.source.clone()), cfg.seed)?;
    }
    if let Some(split) = args.protocol.split {
        cfg.train_fraction = split;
    }
    if let Some(reps) = args.protocol.reps {
        cfg.repetitions = reps;
    }
    if let Some(pi) = args.protocol.pi {
        cfg.rounds = pi;
    }
    if let Some(runs) = args.protocol.runs {
        cfg.runs = runs;
    }
    if let Some(exp) = args.protocol.metric_exponent {
        cfg.metric_exponent = exp;
    }
    cfg.forest = args.forest.apply(cfg.forest);
    if args.relearn {
        cfg.relearn = true;
    }
    if args.top_variance.is_some() {
        cfg.top_variance = args.top_variance;
    }
    if let Some(spca) = spca {
        cfg.spca = Some(spca);
    }
    Ok(cfg)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<SimulateConfig>(path)?,
        None => {
            let seed = args.seed.unwrap_or(1);
            let kind = args.source.kind.ok_or_else(|| {
                CliError::Input("simulate needs --kind (or a --config with a spec)".into())
            })?;
            SimulateConfig {
                spec: args.source.generator_spec(kind, seed)?,
                runs: 1,
                seed,
            }
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(kind) = args.source.kind {
        cfg.spec = args.source.generator_spec(kind, cfg.seed)?;
    }
    if cfg.spec.kind == GeneratorKind::Cod && args.source.p.is_none() {
        // a cod simulate without an explicit p writes the whole grid
        let specs = trip_core::simgen::cod_suite(
            &trip_core::simgen::COD_DEFAULT_N,
            &trip_core::simgen::COD_DEFAULT_P,
            cfg.spec.rhos[0],
            cfg.seed,
        );
        let mut total = 0;
        for (i, spec) in specs.iter().enumerate() {
            let sub = SimulateConfig {
                spec: spec.clone(),
                runs: cfg.runs,
                seed: trip_core::stream::derive(cfg.seed, &[i as u64]),
            };
            let runs = pipeline::run_simulate(&sub)?;
            total += runs.len();
            report::write_simulate(&runs, &sub, &args.out.join(format!("n{}_p{}", spec.n, spec.p)))?;
        }
        eprintln!("wrote {total} datasets under {}", args.out.display());
        return Ok(());
    }
    let runs = pipeline::run_simulate(&cfg)?;
    report::write_simulate(&runs, &cfg, &args.out)?;
    eprintln!("wrote {} dataset(s) under {}", runs.len(), args.out.display());
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> CliResult<()> {
    let cfg = build_audit_config(args, None)?;
    let bundle = pipeline::run_audit(&cfg)?;
    report::write_audit(&bundle, &cfg, &args.out)?;
    eprintln!(
        "audited {} run(s), {} features; reports under {}",
        bundle.runs.len(),
        bundle.feature_names.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_cod(args: &CodArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<CodConfig>(path)?,
        None => CodConfig::new(args.protocol.seed.unwrap_or(1)),
    };
    if let Some(seed) = args.protocol.seed {
        cfg.seed = seed;
    }
    if let Some(n_list) = &args.n_list {
        cfg.n_list = n_list.clone();
    }
    if let Some(p_list) = &args.p_list {
        cfg.p_list = p_list.clone();
    }
    if let Some(exponents) = &args.exponents {
        cfg.exponents = exponents.clone();
    }
    if let Some(rho) = args.rho {
        cfg.rho = rho;
    }
    if let Some(split) = args.protocol.split {
        cfg.train_fraction = split;
    }
    if let Some(reps) = args.protocol.reps {
        cfg.repetitions = reps;
    }
    if let Some(pi) = args.protocol.pi {
        cfg.rounds = pi;
    }
    if let Some(runs) = args.protocol.runs {
        cfg.runs = runs;
    }
    cfg.forest = args.forest.apply(cfg.forest);
    let report_data = pipeline::run_cod(&cfg)?;
    report::write_cod(&report_data, &cfg, &args.out)?;
    eprintln!(
        "swept {} cells; report under {}",
        report_data.cells.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_spca_audit(args: &SpcaAuditArgs) -> CliResult<()> {
    let mut cfg = build_audit_config(&args.audit, None)?;
    let mut spca_cfg = cfg
        .spca
        .take()
        .unwrap_or_else(|| SpcaConfig::new(args.components.unwrap_or(6)));
    if let Some(components) = args.components {
        spca_cfg.components = components;
    }
    if let Some(lambda2) = args.lambda2 {
        spca_cfg.lambda2 = lambda2;
    }
    if args.lambda1_grid.is_some() {
        spca_cfg.lambda1_grid = args.lambda1_grid.clone();
    }
    if let Some(target) = args.sparsity_target {
        spca_cfg.sparsity_target = target.0;
    }
    cfg.spca = Some(spca_cfg);
    let bundle = pipeline::run_audit(&cfg)?;
    if args.strict {
        for run in &bundle.runs {
            if let Some(spca) = &run.spca {
                if !spca.model.converged {
                    return Err(CliError::NonConvergence(format!(
                        "sparse PCA did not converge in run {} (lambda1 = {})",
                        run.run, spca.lambda1
                    )));
                }
            }
        }
    }
    report::write_audit(&bundle, &cfg, &args.audit.out)?;
    eprintln!(
        "audited {} component run(s); reports under {}",
        bundle.runs.len(),
        args.audit.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Cod(args) => cmd_cod(args),
        Command::SpcaAudit(args) => cmd_spca_audit(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
