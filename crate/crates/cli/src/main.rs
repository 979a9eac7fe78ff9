use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::{Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use clap::{Args, Parser, Subcommand};
use semsearch::pipeline::{self, LoadedArtifacts, PipelineConfig, PipelineError};
use semsearch::rdf::{parse_ntriples, ParseMode};
use semsearch::search::{render_json_lines, render_table, SearchConfig, SearchError};
use semsearch::{evaluate, GoldSet};

/// Usage or validation failure; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn pipeline_error(e: PipelineError) -> anyhow::Error {
    if e.is_validation() {
        usage(e.to_string())
    } else {
        e.into()
    }
}

#[derive(Parser)]
#[command(name = "semsearch", version, about = "Keyword search over RDF graphs")]
struct Cli {
    /// Flat key = value config file; flags override its values.
    #[arg(long, global = true, env = "SEMSEARCH_CONFIG")]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset and write all search artifacts.
    Build(BuildArgs),
    /// Run one query, or read queries from stdin until end of input.
    Query(QueryArgs),
    /// Score search results against a gold file.
    Eval(EvalArgs),
    /// Answer queries over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// N-Triples file.
    dataset: Option<PathBuf>,
    /// Artifact directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    exact_matching_limit: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// uniform or rarity.
    #[arg(long)]
    weight_mode: Option<String>,
    #[arg(long)]
    no_stemming: bool,
    /// One stopword per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Skip malformed lines instead of stopping at the first one.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(short, long)]
    artifacts: Option<PathBuf>,
    /// Keywords; omit to read one query per line from stdin.
    query: Option<String>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// One JSON object per result line.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(short, long)]
    artifacts: Option<PathBuf>,
    /// Lines of `query<TAB>iri,iri,...`.
    #[arg(short, long)]
    gold: PathBuf,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(short, long)]
    artifacts: Option<PathBuf>,
    #[arg(short, long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(pipeline_error)?;
    }
    Ok(cfg)
}

fn artifact_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> PathBuf {
    flag.or_else(|| cfg.artifacts.clone()).unwrap_or_else(|| PathBuf::from("artifacts"))
}

fn load_artifacts(dir: &Path) -> Result<LoadedArtifacts> {
    if !dir.join(pipeline::MANIFEST_FILE).is_file() {
        return Err(usage(format!("no build manifest in {}; run `semsearch build` first", dir.display())));
    }
    LoadedArtifacts::load(dir).with_context(|| format!("refusing to use artifacts in {}", dir.display()))
}

fn cmd_build(cfg: PipelineConfig, args: BuildArgs) -> Result<()> {
    let mut cfg = cfg;
    macro_rules! apply {
        ($($field:ident),*) => {$(if let Some(v) = args.$field { cfg.$field = v; })*};
    }
    apply!(beta, max_iterations, epsilon, exact_matching_limit, tau, sigma, k, weight_mode);
    if args.no_stemming {
        cfg.stemming = false;
    }
    if args.stopwords.is_some() {
        cfg.stopwords = args.stopwords;
    }
    cfg.validate().map_err(pipeline_error)?;

    let dataset = args
        .dataset
        .or_else(|| cfg.dataset.clone())
        .ok_or_else(|| usage("no dataset given"))?;
    let out = artifact_dir(args.out, &cfg);
    let bytes = fs::read(&dataset).map_err(|e| usage(format!("no such dataset: {} ({e})", dataset.display())))?;
    let analysis = cfg.analysis().map_err(pipeline_error)?;

    let mode = if args.lenient { ParseMode::Lenient } else { ParseMode::FailFast };
    let (graph, stats) =
        parse_ntriples(bytes.as_slice(), mode).with_context(|| format!("parsing {}", dataset.display()))?;
    for e in &stats.errors {
        log::warn!("skipped: {e}");
    }
    log::info!("parsed {} triples ({} duplicates, {} skipped)", stats.triples, stats.duplicates, stats.skipped);

    let build = pipeline::build(&graph, &cfg, analysis).map_err(pipeline_error)?;
    let manifest = build.write_to(&out, &pipeline::sha256_hex(&bytes))?;
    let s = &manifest.stats;
    println!(
        "built {}: {} triples, {} subjects, {} candidate pairs, {} iterations{}, {} classes, {} summary edges, {} tokens",
        out.display(),
        s.triples,
        s.subjects,
        s.candidate_pairs,
        s.iterations,
        if s.converged { "" } else { " (not converged)" },
        s.classes,
        s.summary_edges,
        s.keyword_tokens,
    );
    if s.approximate_pairs > 0 {
        println!("{} pairs used greedy matching", s.approximate_pairs);
    }
    Ok(())
}

fn query_config(loaded: &LoadedArtifacts, k: Option<usize>, sigma: Option<f64>) -> Result<SearchConfig> {
    let cfg = SearchConfig {
        k: k.unwrap_or(loaded.engine.config.k),
        sigma: sigma.unwrap_or(loaded.engine.config.sigma),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn run_query(loaded: &LoadedArtifacts, q: &str, cfg: &SearchConfig, json: bool, out: &mut impl Write) -> Result<bool> {
    match loaded.engine.search_with(q, cfg) {
        Ok(results) => {
            if json {
                out.write_all(render_json_lines(&results).as_bytes())?;
            } else if results.is_empty() {
                writeln!(out, "no results")?;
            } else {
                out.write_all(render_table(&results).as_bytes())?;
            }
            Ok(true)
        }
        Err(SearchError::EmptyQuery) => Ok(false),
        Err(e) => Err(usage(e.to_string())),
    }
}

const EMPTY_QUERY: &str = "empty query: enter at least one keyword that is not a stopword";

fn cmd_query(cfg: PipelineConfig, args: QueryArgs) -> Result<()> {
    let loaded = load_artifacts(&artifact_dir(args.artifacts, &cfg))?;
    let search = query_config(&loaded, args.k, args.sigma)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if let Some(q) = args.query {
        if !run_query(&loaded, &q, &search, args.json, &mut out)? {
            return Err(usage(EMPTY_QUERY));
        }
        return Ok(());
    }
    let interactive = io::stdin().is_terminal();
    loop {
        if interactive {
            eprint!("> ");
            io::stderr().flush()?;
        }
        let mut line = String::new();
        if io::stdin().lock().read_line(&mut line)? == 0 {
            break;
        }
        if !run_query(&loaded, line.trim(), &search, args.json, &mut out)? {
            eprintln!("{EMPTY_QUERY}");
        }
        out.flush()?;
    }
    Ok(())
}

fn cmd_eval(cfg: PipelineConfig, args: EvalArgs) -> Result<()> {
    let loaded = load_artifacts(&artifact_dir(args.artifacts, &cfg))?;
    let k = args.k.unwrap_or(loaded.engine.config.k);
    let text =
        fs::read_to_string(&args.gold).map_err(|e| usage(format!("gold file {}: {e}", args.gold.display())))?;
    let gold = GoldSet::parse(&text).map_err(|e| usage(e.to_string()))?;
    let report = evaluate(&loaded.engine, &gold, k).map_err(|e| usage(e.to_string()))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

#[derive(Clone)]
struct ServeState {
    loaded: Arc<LoadedArtifacts>,
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(serde_json::json!({ "error": message }))).into_response()
}

async fn search_handler(State(state): State<ServeState>, UrlQuery(params): UrlQuery<HashMap<String, String>>) -> Response {
    let q = params.get("q").map(String::as_str).unwrap_or("");
    let mut cfg = state.loaded.engine.config;
    if let Some(k) = params.get("k") {
        match k.parse() {
            Ok(k) => cfg.k = k,
            Err(_) => return bad_request(format!("k must be a positive integer, got {k:?}")),
        }
    }
    if let Err(e) = cfg.validate() {
        return bad_request(e.to_string());
    }
    match state.loaded.engine.search_with(q, &cfg) {
        Ok(results) => Json(results.iter().map(|r| r.to_json()).collect::<Vec<_>>()).into_response(),
        Err(SearchError::EmptyQuery) => bad_request(EMPTY_QUERY.to_string()),
        Err(e) => bad_request(e.to_string()),
    }
}

async fn health_handler(State(state): State<ServeState>) -> Response {
    Json(&state.loaded.manifest).into_response()
}

fn cmd_serve(cfg: PipelineConfig, args: ServeArgs) -> Result<()> {
    let loaded = load_artifacts(&artifact_dir(args.artifacts, &cfg))?;
    let listener = std::net::TcpListener::bind((args.host.as_str(), args.port))
        .map_err(|e| usage(format!("cannot listen on {}:{}: {e}", args.host, args.port)))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let app = Router::new()
        .route("/search", get(search_handler))
        .route("/health", get(health_handler))
        .with_state(ServeState {
            loaded: Arc::new(loaded),
        });
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        println!("listening on http://{addr}");
        io::stdout().flush()?;
        axum::serve(listener, app).await?;
        Ok::<_, anyhow::Error>(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = load_config(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Build(args) => cmd_build(cfg, args),
        Command::Query(args) => cmd_query(cfg, args),
        Command::Eval(args) => cmd_eval(cfg, args),
        Command::Serve(args) => cmd_serve(cfg, args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
