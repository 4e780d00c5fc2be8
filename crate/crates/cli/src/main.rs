//! `caselab`: batch driver for ingest, description, cohort selection,
//! network and SVM analyses, model prediction, synthetic data and serving.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use caselab_core::analysis::{run_bayesnet, run_svm_grid, BayesAnalysisConfig, SvmAnalysisConfig};
use caselab_core::clustering::{k_means, silhouette};
use caselab_core::cohort::{apply_criteria, missingness_comparison, CohortSpec};
use caselab_core::registry::{personalized_predict, ModelArtifact};
use caselab_core::stats::{describe, render_frequency_table};
use caselab_core::svm::{ClassWeights, Grid};
use caselab_core::synth::{default_cohort_spec, generate, GeneratorConfig};
use caselab_core::tabular::{
    clean_sentinels, fit_encoder, load_csv, save_csv, write_csv, ColumnKind, Dataset, Record, Schema,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "caselab",
    version,
    about = "Clinical cohort analytics from CSV to served models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV against its schema, convert sentinels to missing and write the cleaned dataset.
    Ingest {
        #[command(flatten)]
        input: DataArgs,
        /// Cleaned CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Clean report (JSON) destination.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Frequency tables for categorical columns and quartile summaries for continuous ones.
    Describe {
        #[command(flatten)]
        input: DataArgs,
        /// Comma-separated columns; defaults to every column.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        /// Emit JSON summaries instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Apply a criteria file and print the inclusion flowchart.
    Cohort {
        #[command(flatten)]
        input: DataArgs,
        /// Criteria file (TOML or JSON).
        #[arg(long)]
        criteria: PathBuf,
        /// Cohort CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flowchart (JSON) destination.
        #[arg(long)]
        flowchart_out: Option<PathBuf>,
        /// Comparison of complete and incomplete rows (JSON) destination.
        #[arg(long)]
        missingness_out: Option<PathBuf>,
    },
    /// Learn a Bayesian network by hill climbing and export it.
    Bn(BnArgs),
    /// Cross-validated RBF-SVM grid search and export of the best model.
    SvmGrid(SvmArgs),
    /// Predict one record with an exported model.
    Predict {
        /// Model artifact (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Record file: a variable-to-value map in TOML or JSON.
        #[arg(long)]
        record: PathBuf,
    },
    /// Generate a synthetic cohort dataset with its schema.
    Synth {
        /// Generator config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Size of the final analysed cohort; incomplete and excluded rows scale with it.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Schema destination; defaults to the dataset path with a `.schema.toml` suffix.
        #[arg(long)]
        schema_out: Option<PathBuf>,
        /// Also write the matching criteria file here.
        #[arg(long)]
        criteria_out: Option<PathBuf>,
    },
    /// k-means clustering of encoded features.
    Cluster {
        #[command(flatten)]
        input: DataArgs,
        /// Comma-separated feature columns.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
        /// Assignment CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve datasets, analyses and models over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        /// Artifact directory.
        #[arg(long, default_value = "models")]
        models: PathBuf,
        /// Analyses allowed to run at once.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Schema file (TOML or JSON).
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct BnArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Analysis config (TOML or JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated nodes; defaults to every categorical column.
    #[arg(long, value_delimiter = ',')]
    variables: Vec<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_parents: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dirichlet pseudo-count for the tables.
    #[arg(long)]
    alpha: Option<f64>,
    /// Model artifact destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Graphviz destination.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    None,
    InversePrevalence,
}

#[derive(Args)]
struct SvmArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Analysis config (TOML or JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    /// Category of the target treated as positive.
    #[arg(long)]
    positive: Option<String>,
    /// Comma-separated feature columns.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    costs: Vec<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    class_weights: Option<Weights>,
    /// Grid CSV destination; printed to stdout when absent.
    #[arg(long)]
    grid_out: Option<PathBuf>,
    /// Model artifact destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = format!("{e:#}");
            let lines: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.contains('|'))
                .collect();
            eprintln!("error: {}", lines.join(": "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, out, report } => ingest(&input, &out, report.as_deref()),
        Command::Describe { input, columns, json } => describe_cmd(&input, &columns, json),
        Command::Cohort {
            input,
            criteria,
            out,
            flowchart_out,
            missingness_out,
        } => cohort(
            &input,
            &criteria,
            out.as_deref(),
            flowchart_out.as_deref(),
            missingness_out.as_deref(),
        ),
        Command::Bn(args) => bn(args),
        Command::SvmGrid(args) => svm_grid(args),
        Command::Predict { model, record } => predict(&model, &record),
        Command::Synth {
            config,
            n,
            seed,
            out,
            schema_out,
            criteria_out,
        } => synth(config.as_deref(), n, seed, &out, schema_out, criteria_out.as_deref()),
        Command::Cluster {
            input,
            features,
            k,
            seed,
            max_iter,
            out,
        } => cluster(&input, &features, k, seed, max_iter, out.as_deref()),
        Command::Serve { addr, models, workers } => serve(addr, models, workers),
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("{}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("{}", path.display()))
    }
}

fn write_config<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(value)? + "\n"
    } else {
        toml::to_string(value)?
    };
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())
}

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        let seed = nanos % 1_000_000_007;
        eprintln!("seed: {seed} (pass --seed {seed} to reproduce)");
        seed
    })
}

/// Loads, validates and cleans the input dataset.
fn load(input: &DataArgs) -> Result<Dataset> {
    let schema: Schema = read_config(&input.schema)?;
    let raw = load_csv(&input.data, &schema).with_context(|| format!("{}", input.data.display()))?;
    Ok(clean_sentinels(&raw).0)
}

fn ingest(input: &DataArgs, out: &Path, report_path: Option<&Path>) -> Result<()> {
    let schema: Schema = read_config(&input.schema)?;
    let raw = load_csv(&input.data, &schema).with_context(|| format!("{}", input.data.display()))?;
    let (clean, report) = clean_sentinels(&raw);
    save_csv(&clean, out).with_context(|| format!("writing {}", out.display()))?;
    println!("{} rows, {} columns", clean.n_rows(), clean.n_cols());
    for c in report.columns.iter().filter(|c| c.sentinel + c.out_of_range > 0) {
        println!("{}: {} sentinel, {} out of range", c.column, c.sentinel, c.out_of_range);
    }
    println!(
        "{} cells set missing in {} rows",
        report.total_conversions, report.rows_touched
    );
    if let Some(p) = report_path {
        write_json(p, &report)?;
    }
    Ok(())
}

fn describe_cmd(input: &DataArgs, columns: &[String], json: bool) -> Result<()> {
    let ds = load(input)?;
    let columns: Vec<&str> = if columns.is_empty() {
        ds.schema().names().collect()
    } else {
        columns.iter().map(String::as_str).collect()
    };
    if json {
        let mut out = Vec::new();
        for c in &columns {
            out.push(serde_json::json!({ "name": c, "summary": describe(&ds, c)? }));
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        print!("{}", render_frequency_table(&ds, &columns)?);
    }
    Ok(())
}

fn cohort(
    input: &DataArgs,
    criteria: &Path,
    out: Option<&Path>,
    flowchart_out: Option<&Path>,
    missingness_out: Option<&Path>,
) -> Result<()> {
    let ds = load(input)?;
    let spec: CohortSpec = read_config(criteria)?;
    let (cohort, flow) = apply_criteria(&ds, &spec.criteria, &spec.analysis_vars)?;
    print!("{}", flow.render_text());
    if let Some(p) = out {
        save_csv(&cohort, p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = flowchart_out {
        write_json(p, &flow)?;
    }
    if let Some(p) = missingness_out {
        let no_vars: [&str; 0] = [];
        let (eligible, _) = apply_criteria(&ds, &spec.criteria, &no_vars)?;
        write_json(p, &missingness_comparison(&eligible, &spec.analysis_vars)?)?;
    }
    Ok(())
}

fn bn(args: BnArgs) -> Result<()> {
    let ds = load(&args.input)?;
    let mut config = match &args.config {
        Some(p) => read_config(p)?,
        None => BayesAnalysisConfig {
            variables: Vec::new(),
            target: String::new(),
            hill_climb: Default::default(),
            alpha: 1.0,
            target_as_sink: true,
        },
    };
    if let Some(t) = args.target {
        config.target = t;
    }
    if config.target.is_empty() {
        bail!("no target: pass --target or set `target` in the config");
    }
    if !args.variables.is_empty() {
        config.variables = args.variables;
    }
    if config.variables.is_empty() {
        config.variables = ds
            .schema()
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
            .map(|c| c.name.clone())
            .collect();
    }
    if let Some(r) = args.restarts {
        config.hill_climb.restarts = r;
    }
    if let Some(m) = args.max_parents {
        config.hill_climb.max_parents = m;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    config.hill_climb.seed = match (args.seed, &args.config) {
        (Some(s), _) => s,
        (None, Some(_)) => config.hill_climb.seed,
        (None, None) => seed_or_fresh(None),
    };
    let result = run_bayesnet(&ds, &config)?;
    let dag = &result.scored.dag;
    print!("{}", dag.edge_list());
    println!("BIC {}", result.scored.total);
    for (node, score) in dag.nodes().iter().zip(&result.scored.family_scores) {
        println!("  {node}: {score}");
    }
    println!("direct causes of {}: {}", config.target, result.paths.direct.join(", "));
    println!(
        "indirect causes of {}: {}",
        config.target,
        result.paths.indirect.join(", ")
    );
    if let Some(p) = &args.dot {
        write_file(p, dag.to_dot().as_bytes())?;
    }
    if let Some(p) = &args.out {
        result.artifact.save(p)?;
        eprintln!("model {} written to {}", result.artifact.id, p.display());
    }
    Ok(())
}

fn svm_grid(args: SvmArgs) -> Result<()> {
    let ds = load(&args.input)?;
    let mut config = match &args.config {
        Some(p) => read_config(p)?,
        None => SvmAnalysisConfig {
            features: Vec::new(),
            target: String::new(),
            positive: String::new(),
            grid: Grid::default(),
            folds: 10,
            seed: 0,
            smo: Default::default(),
        },
    };
    if let Some(t) = args.target {
        config.target = t;
    }
    if let Some(p) = args.positive {
        config.positive = p;
    }
    if !args.features.is_empty() {
        config.features = args.features;
    }
    if config.target.is_empty() || config.positive.is_empty() || config.features.is_empty() {
        bail!("--target, --positive and --features are required unless set in the config");
    }
    if !args.gammas.is_empty() {
        config.grid.gammas = args.gammas;
    }
    if !args.costs.is_empty() {
        config.grid.costs = args.costs;
    }
    if let Some(k) = args.folds {
        config.folds = k;
    }
    if let Some(w) = args.class_weights {
        config.smo.class_weights = match w {
            Weights::None => ClassWeights::None,
            Weights::InversePrevalence => ClassWeights::InversePrevalence,
        };
    }
    config.seed = match (args.seed, &args.config) {
        (Some(s), _) => s,
        (None, Some(_)) => config.seed,
        (None, None) => seed_or_fresh(None),
    };
    let result = run_svm_grid(&ds, &config)?;
    let csv = result.grid.to_csv();
    match &args.grid_out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    let best = result.grid.best();
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    eprintln!(
        "best gamma {} cost {}: sensitivity {}, specificity {}, youden {}",
        best.gamma,
        best.cost,
        show(best.sensitivity),
        show(best.specificity),
        show(best.youden)
    );
    if let Some(p) = &args.out {
        result.artifact.save(p)?;
        eprintln!("model {} written to {}", result.artifact.id, p.display());
    }
    Ok(())
}

fn predict(model: &Path, record: &Path) -> Result<()> {
    let artifact = ModelArtifact::load(model)?;
    let record: Record = read_config(record)?;
    let output =
        personalized_predict(&artifact, &record).with_context(|| format!("record rejected by {}", model.display()))?;
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn synth(
    config: Option<&Path>,
    n: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    schema_out: Option<PathBuf>,
    criteria_out: Option<&Path>,
) -> Result<()> {
    let mut cfg: GeneratorConfig = match config {
        Some(p) => read_config(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(n) = n {
        let included = cfg.n_total.saturating_sub(cfg.n_incomplete + cfg.n_excluded).max(1) as f64;
        let scale = n as f64 / included;
        cfg.n_incomplete = (cfg.n_incomplete as f64 * scale).round() as usize;
        cfg.n_excluded = (cfg.n_excluded as f64 * scale).round() as usize;
        cfg.n_total = n + cfg.n_incomplete + cfg.n_excluded;
    }
    cfg.seed = match (seed, config) {
        (Some(s), _) => s,
        (None, Some(_)) => cfg.seed,
        (None, None) => seed_or_fresh(None),
    };
    let ds = generate(&cfg)?;
    let mut csv = Vec::new();
    write_csv(&ds, &mut csv)?;
    write_file(out, &csv)?;
    let schema_path = schema_out.unwrap_or_else(|| out.with_extension("schema.toml"));
    write_config(&schema_path, ds.schema())?;
    if let Some(p) = criteria_out {
        write_config(p, &default_cohort_spec(&cfg))?;
    }
    eprintln!(
        "{} rows written to {}, schema to {}",
        ds.n_rows(),
        out.display(),
        schema_path.display()
    );
    Ok(())
}

fn cluster(
    input: &DataArgs,
    features: &[String],
    k: usize,
    seed: Option<u64>,
    max_iter: usize,
    out: Option<&Path>,
) -> Result<()> {
    let ds = load(input)?;
    let seed = seed_or_fresh(seed);
    let encoder = fit_encoder(&ds, features)?;
    let x = encoder.encode(&ds)?;
    let assignment = k_means(&x, k, seed, max_iter)?;
    match out {
        Some(p) => write_file(p, assignment.to_csv().as_bytes())?,
        None => print!("{}", assignment.to_csv()),
    }
    eprintln!(
        "k {}: sizes {:?}, inertia {}, {} iterations",
        k,
        assignment.cluster_sizes(),
        assignment.inertia,
        assignment.iterations
    );
    if k >= 2 {
        eprintln!("mean silhouette {:.4}", silhouette(&x, &assignment.labels)?);
    }
    Ok(())
}

fn serve(addr: std::net::SocketAddr, models: PathBuf, workers: usize) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    let config = caselab_service::ServiceConfig {
        addr,
        artifact_dir: models,
        workers,
    };
    runtime.block_on(caselab_service::serve(config, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}
