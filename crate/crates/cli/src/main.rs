use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dissoc_core::db::{format_answer, load_database, Database};
use dissoc_core::engine::{lineage, propagation_score, Strategy, DEFAULT_LINEAGE_CAP};
use dissoc_core::enumerate::enumerate_minimal_plans;
use dissoc_core::error::{EngineError, HarnessError, OracleError, PlanError, QueryError};
use dissoc_core::harness::{
    derive_seed, generate, parse_config, parse_strategy, ranking_experiment, scaling_experiment_config, write_instance,
    GenSpec, QueryFamily,
};
use dissoc_core::optimize::{shared_view_plan, single_plan};
use dissoc_core::oracle::{exact_query_prob_with, mc_estimate, OracleLimits};
use dissoc_core::query::{parse_catalog, parse_query, Catalog, Query};
use dissoc_core::sql::{emit_sql, emit_sql_reduced};

/// Propagation scores for queries over tuple-independent probabilistic
/// databases.
#[derive(Parser)]
#[command(name = "dissoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QueryArgs {
    /// Query text or a file holding it.
    query: String,
    /// Catalog text (`;` separates lines) or a file holding it.
    catalog: String,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    input: QueryArgs,
    /// Use deterministic relations and functional dependencies.
    #[arg(long)]
    schema: bool,
    /// none, 1, 12 or 123.
    #[arg(long, default_value = "123", value_parser = parse_strategy)]
    opt: Strategy,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimal plans, the single plan or its view set.
    Plan(PlanArgs),
    /// Propagation score of every answer, as `answer<TAB>score`.
    Eval {
        #[command(flatten)]
        plan: PlanArgs,
        /// Directory with one `<relation>.tsv` per catalog relation.
        #[arg(long)]
        data: PathBuf,
    },
    /// Exact probability of every answer.
    Exact {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        data: PathBuf,
        /// Memoised states before giving up.
        #[arg(long, default_value_t = OracleLimits::default().max_states)]
        max_states: usize,
    },
    /// Monte-Carlo estimate of every answer's probability.
    Mc {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Lineage of every answer, as `answer<TAB>monomial;monomial`.
    Lineage {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LINEAGE_CAP)]
        cap: usize,
    },
    /// Write a synthetic chain or star instance.
    Gen {
        #[arg(long, value_parser = |s: &str| s.parse::<QueryFamily>())]
        shape: QueryFamily,
        #[arg(long)]
        k: usize,
        /// Tuples per relation.
        #[arg(long)]
        n: usize,
        /// Domain size.
        #[arg(long = "N")]
        domain: i64,
        #[arg(long, default_value_t = 1.0)]
        pmax: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a ranking or scaling experiment from a key=value config.
    Bench {
        kind: BenchKind,
        #[arg(long)]
        config: PathBuf,
        /// Write the TSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SQL computing the propagation score.
    EmitSql {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        schema: bool,
        /// Read semi-join reduced copies of the base tables.
        #[arg(long)]
        reduced: bool,
        #[arg(long, default_value = "ansi")]
        dialect: Dialect,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Rank,
    Scale,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dialect {
    Ansi,
}

/// The argument itself, or the file it names.
fn text_or_file(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        return fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
    }
    Ok(arg.to_string())
}

impl QueryArgs {
    fn load(&self) -> Result<(Query, Catalog)> {
        let catalog = parse_catalog(&text_or_file(&self.catalog)?.replace(';', "\n"))?;
        let query = parse_query(text_or_file(&self.query)?.trim(), &catalog)?;
        Ok((query, catalog))
    }

    fn load_with_data(&self, dir: &Path) -> Result<(Query, Catalog, Database)> {
        let (q, catalog) = self.load()?;
        let db = load_database(dir, &catalog)?;
        Ok((q, catalog, db))
    }
}

fn run(cli: Cli) -> Result<String> {
    let out = match cli.command {
        Command::Plan(args) => {
            let (q, catalog) = args.input.load()?;
            match args.opt {
                Strategy::AllPlans => enumerate_minimal_plans(&q, &catalog, args.schema)
                    .iter()
                    .enumerate()
                    .map(|(i, p)| format!("plan {}\n{p}", i + 1))
                    .collect::<Vec<_>>()
                    .join("\n"),
                Strategy::Opt1 => single_plan(&q, &catalog, args.schema).to_string(),
                Strategy::Opt12 | Strategy::Opt123 => shared_view_plan(&q, &catalog, args.schema).to_string(),
            }
        }
        Command::Eval { plan, data } => {
            let (q, catalog, db) = plan.input.load_with_data(&data)?;
            propagation_score(&q, &db, &catalog, plan.opt, plan.schema)?.to_tsv()
        }
        Command::Exact {
            input,
            data,
            max_states,
        } => {
            let (q, _, db) = input.load_with_data(&data)?;
            let limits = OracleLimits {
                max_states,
                ..OracleLimits::default()
            };
            exact_query_prob_with(&q, &db, limits)?.to_tsv()
        }
        Command::Mc {
            input,
            data,
            samples,
            seed,
        } => {
            anyhow::ensure!(samples > 0, Validation("--samples must be positive".into()));
            let (q, _, db) = input.load_with_data(&data)?;
            let lin = lineage(&q, &db, DEFAULT_LINEAGE_CAP)?;
            let dist = db.probabilities();
            let mut out = String::new();
            for (i, (answer, f)) in lin.answers.iter().enumerate() {
                let est = mc_estimate(f, &dist, samples, derive_seed(seed, i as u64))?;
                out.push_str(&format!("{}\t{est}\n", format_answer(answer)));
            }
            out
        }
        Command::Lineage { input, data, cap } => {
            let (q, _, db) = input.load_with_data(&data)?;
            lineage(&q, &db, cap)?.dump()
        }
        Command::Gen {
            shape,
            k,
            n,
            domain,
            pmax,
            seed,
            out,
        } => {
            let spec = GenSpec {
                family: shape,
                k,
                n,
                domain,
                p_max: pmax,
                seed,
            };
            let (q, db, catalog) = generate(&spec)?;
            write_instance(&out, &q, &catalog, &db)?;
            format!("{q}\n")
        }
        Command::Bench { kind, config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = parse_config(&text)?;
            let report = match kind {
                BenchKind::Rank => ranking_experiment(&cfg)?.to_tsv(),
                BenchKind::Scale => scaling_experiment_config(&cfg)?.to_tsv(),
            };
            match out {
                Some(path) => {
                    fs::write(&path, report).with_context(|| format!("writing {}", path.display()))?;
                    String::new()
                }
                None => report,
            }
        }
        Command::EmitSql {
            input,
            schema,
            reduced,
            dialect: Dialect::Ansi,
        } => {
            let (q, catalog) = input.load()?;
            let vs = shared_view_plan(&q, &catalog, schema);
            if reduced {
                emit_sql_reduced(&vs, &q, &catalog)
            } else {
                emit_sql(&vs, &catalog)
            }
        }
    };
    Ok(out)
}

/// A bad argument caught by the CLI itself.
#[derive(Debug)]
struct Validation(String);

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

fn is_overflow(e: &EngineError) -> bool {
    matches!(
        e,
        EngineError::LineageTooLarge { .. } | EngineError::Oracle(OracleError::TooLarge(_))
    )
}

/// 3 for oracle overflow, 2 for invalid input, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            return if is_overflow(e) { 3 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<OracleError>() {
            return if matches!(e, OracleError::TooLarge(_)) { 3 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return match e {
                HarnessError::Engine(inner) if is_overflow(inner) => 3,
                _ => 2,
            };
        }
        if cause.is::<QueryError>() || cause.is::<PlanError>() || cause.is::<Validation>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
