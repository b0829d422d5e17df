mod config;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use levelk_core::bruteforce::{enumerate_networks, enumerate_raw, Universe, DEFAULT_BUDGET};
use levelk_core::constants::{derive_constants, Constants, ConstantsConfig, Estimate};
use levelk_core::generators::{enumerate_generators, tabulate_generators};
use levelk_core::heads::head_weight_series;
use levelk_core::network::Network;
use levelk_core::offspring::exact_count;
use levelk_core::parallel::{default_jobs, parallel_map, stream_rng};
use levelk_core::sampler::LevelSampler;
use levelk_core::series::solve_network_series;
use levelk_core::stats::{
    directed_heights, height_process, leaf_order, longest_directed_path, neighborhood_census, special_order,
    undirected_heights, Census, CensusScope,
};
use levelk_core::verify::{self, VerifyConfig, CRITERIA, QUICK};

#[derive(Parser)]
#[command(name = "levelk", version, about = "Exact counts and uniform samples of level-k phylogenetic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, serde::Serialize)]
struct Common {
    /// Worker threads (default: logical cores).
    #[arg(long, env = "LEVELK_JOBS")]
    jobs: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, env = "LEVELK_OUT")]
    out: Option<PathBuf>,
}

impl Common {
    fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(default_jobs).max(1)
    }
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum NetworkFormat {
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum LimitMode {
    Root,
    Vertex,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum Scope {
    Vertices,
    Leaves,
    Root,
}

#[derive(Subcommand)]
enum Command {
    /// Generator table for level k.
    #[command(args_override_self = true)]
    Generators {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, value_enum, default_value = "csv", env = "LEVELK_FORMAT")]
        format: TableFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Exact network counts N(k, n) for n up to max-n.
    #[command(args_override_self = true)]
    Counts {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, default_value_t = 10, env = "LEVELK_MAX_N")]
        max_n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Offspring law and derived constants.
    #[command(args_override_self = true)]
    Constants {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, env = "LEVELK_SEED")]
        seed: u64,
        /// Smaller Monte-Carlo budget.
        #[arg(long, env = "LEVELK_QUICK")]
        quick: bool,
        #[arg(long, default_value_t = 8, env = "LEVELK_D_EXACT")]
        d_exact: usize,
        #[arg(long, value_enum, default_value = "table", env = "LEVELK_FORMAT")]
        format: ReportFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Uniform random networks, one per line.
    #[command(args_override_self = true)]
    Sample {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, env = "LEVELK_N")]
        n: usize,
        #[arg(long, env = "LEVELK_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1, env = "LEVELK_COUNT")]
        count: usize,
        #[arg(long, env = "LEVELK_MAX_REJECTIONS")]
        max_rejections: Option<usize>,
        #[arg(long, value_enum, default_value = "json", env = "LEVELK_FORMAT")]
        format: NetworkFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Neighbourhoods of the root or of a uniform vertex in the limit network.
    #[command(args_override_self = true)]
    Locallimit {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, value_enum, env = "LEVELK_MODE")]
        mode: LimitMode,
        #[arg(long, env = "LEVELK_DEPTH")]
        depth: usize,
        #[arg(long, env = "LEVELK_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1, env = "LEVELK_COUNT")]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Height statistics of sampled networks.
    #[command(args_override_self = true)]
    Stats {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, env = "LEVELK_N")]
        n: usize,
        #[arg(long, env = "LEVELK_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1, env = "LEVELK_COUNT")]
        count: usize,
        /// csv: one summary row per network; json: height processes.
        #[arg(long, value_enum, default_value = "csv", env = "LEVELK_FORMAT")]
        format: TableFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Neighbourhood census pooled over sampled networks.
    #[command(args_override_self = true)]
    Census {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, env = "LEVELK_N")]
        n: usize,
        #[arg(long, env = "LEVELK_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1, env = "LEVELK_COUNT")]
        count: usize,
        #[arg(long, default_value_t = 1, env = "LEVELK_DEPTH")]
        depth: usize,
        #[arg(long, value_enum, default_value = "vertices", env = "LEVELK_SCOPE")]
        scope: Scope,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive universe of networks on n leaves, one per line.
    #[command(args_override_self = true)]
    Bruteforce {
        #[arg(long, env = "LEVELK_K")]
        k: usize,
        #[arg(long, env = "LEVELK_N")]
        n: usize,
        /// Use the raw digraph search instead of decorated trees (n <= 3).
        #[arg(long, env = "LEVELK_RAW")]
        raw: bool,
        /// Reuse or store universes here, keyed by (k, n).
        #[arg(long, env = "LEVELK_CACHE_DIR")]
        cache_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the acceptance criteria.
    #[command(args_override_self = true)]
    Verify {
        /// Only the fast criteria.
        #[arg(long, env = "LEVELK_QUICK")]
        quick: bool,
        /// Comma-separated criterion numbers.
        #[arg(long, env = "LEVELK_CRITERIA", value_delimiter = ',')]
        criteria: Vec<usize>,
        #[arg(long, default_value_t = VerifyConfig::default().seed, env = "LEVELK_SEED")]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
}

enum CliError {
    Usage(String),
    Failed(String, String),
    Verification(Vec<usize>),
}

impl CliError {
    fn run(kind: &str, e: impl std::fmt::Display) -> Self {
        CliError::Failed(kind.into(), e.to_string())
    }
}

fn header(command: &str, config: Value) -> String {
    json!({ "levelk": env!("CARGO_PKG_VERSION"), "command": command, "config": config }).to_string()
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::run("io", format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::run("io", e))
        }
    }
}

fn sampler(k: usize) -> Result<LevelSampler, CliError> {
    if k == 0 {
        return Err(CliError::Usage("k must be at least 1".into()));
    }
    LevelSampler::new(k).map_err(|e| CliError::run("model", e))
}

fn network_json(net: &Network) -> Value {
    serde_json::from_str(&net.to_json()).expect("network JSON parses")
}

fn estimate_row(name: &str, e: &Estimate) -> String {
    let err = match (e.abs_error, e.stderr) {
        (Some(a), Some(s)) => format!("+- {a:.1e} (abs) +- {s:.1e} (se)"),
        (Some(a), None) => format!("+- {a:.1e} (abs)"),
        (None, Some(s)) => format!("+- {s:.1e} (se)"),
        (None, None) => String::new(),
    };
    format!("{name:<14} {:<22.12} {err:<34} {}\n", e.value, e.method)
}

fn constants_table(c: &Constants) -> String {
    let mut s = String::new();
    for (name, e) in [
        ("t0", &c.t0),
        ("rho", &c.rho),
        ("p0", &c.p0),
        ("var_xi", &c.var_xi),
        ("a_k", &c.a_k),
        ("E_eta", &c.e_eta),
        ("E_eta_prime", &c.e_eta_prime),
        ("E_eta_dprime", &c.e_eta_dprime),
        ("E_kappa", &c.e_kappa),
        ("b", &c.b),
        ("b_closed_form", &c.b_closed_form),
        ("b_k", &c.b_k),
        ("b_k_prime", &c.b_k_prime),
        ("b_k_dprime", &c.b_k_dprime),
    ] {
        s.push_str(&estimate_row(name, e));
    }
    if c.b_disagrees {
        s.push_str("warning: regression and closed-form b differ by more than three standard errors\n");
    }
    s
}

fn load_universe(k: usize, n: usize, raw: bool, cache: Option<&PathBuf>) -> Result<Universe, CliError> {
    let build = || {
        if raw {
            enumerate_raw(k, n, DEFAULT_BUDGET)
        } else {
            enumerate_networks(k, n, DEFAULT_BUDGET)
        }
        .map_err(|e| CliError::run("bruteforce", e))
    };
    let Some(dir) = cache else { return build() };
    let path = dir.join(format!("universe-k{k}-n{n}{}.jsonl", if raw { "-raw" } else { "" }));
    if let Ok(text) = fs::read_to_string(&path) {
        let nets: Result<Vec<Network>, _> = text.lines().map(Network::from_json).collect();
        let nets = nets.map_err(|e| CliError::run("cache", format!("{}: {e}", path.display())))?;
        return Ok(Universe::from_networks(k, n, nets));
    }
    let u = build()?;
    fs::create_dir_all(dir).map_err(|e| CliError::run("io", e))?;
    fs::write(&path, u.to_json_lines()).map_err(|e| CliError::run("io", e))?;
    Ok(u)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generators { k, format, common } => {
            let gens = enumerate_generators(k).map_err(|e| CliError::run("generators", e))?;
            let table = tabulate_generators(k, &gens).map_err(|e| CliError::run("generators", e))?;
            let text = match format {
                TableFormat::Csv => table.to_csv(),
                TableFormat::Json => table.generators_json() + "\n",
            };
            emit(&common, &text)
        }
        Command::Counts { k, max_n, common } => {
            if k == 0 || max_n == 0 {
                return Err(CliError::Usage("k and max-n must be at least 1".into()));
            }
            let gens = enumerate_generators(k).map_err(|e| CliError::run("generators", e))?;
            let table = tabulate_generators(k, &gens).map_err(|e| CliError::run("generators", e))?;
            let series = solve_network_series(&head_weight_series(&table, max_n).series)
                .map_err(|e| CliError::run("series", e))?;
            let mut text = String::from("n,count\n");
            for n in 1..=max_n {
                let c = exact_count(&series, n).map_err(|e| CliError::run("series", e))?;
                text.push_str(&format!("{n},{c}\n"));
            }
            emit(&common, &text)
        }
        Command::Constants { k, seed, quick, d_exact, format, common } => {
            let s = sampler(k)?;
            let mut cfg = ConstantsConfig { seed, jobs: common.jobs(), d_exact, ..ConstantsConfig::default() };
            if quick {
                cfg.head_samples = 2_000;
                cfg.tree_sizes = vec![250, 1000, 4000];
                cfg.trees_per_size = vec![800, 300, 100];
            }
            let c = derive_constants(&s, &cfg).map_err(|e| CliError::run("constants", e))?;
            let config = json!({ "k": k, "seed": seed, "quick": quick, "d_exact": d_exact });
            let text = match format {
                ReportFormat::Json => {
                    let mut v: Value = serde_json::from_str(&c.to_json()).expect("constants JSON parses");
                    v["config"] = config;
                    serde_json::to_string_pretty(&v).expect("JSON serializes") + "\n"
                }
                ReportFormat::Table => format!("# {}\n{}", header("constants", config), constants_table(&c)),
            };
            emit(&common, &text)
        }
        Command::Sample { k, n, seed, count, max_rejections, format, common } => {
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            let s = sampler(k)?;
            let budget = max_rejections.unwrap_or_else(|| s.default_max_rejections(n));
            if budget == 0 {
                return Err(CliError::Usage("max-rejections must be at least 1".into()));
            }
            let nets = parallel_map(count, common.jobs(), |i| {
                s.sample_network(n, &mut stream_rng(seed, i as u64), budget).map(|x| x.network)
            });
            let config = json!({ "k": k, "n": n, "seed": seed, "count": count, "max_rejections": budget });
            let head = header("sample", config);
            let mut text = match format {
                NetworkFormat::Json => head + "\n",
                NetworkFormat::Dot => format!("// {head}\n"),
            };
            for net in nets {
                let net = net.map_err(|e| CliError::run("sampler", e))?;
                match format {
                    NetworkFormat::Json => text.push_str(&(net.to_json() + "\n")),
                    NetworkFormat::Dot => text.push_str(&net.to_dot()),
                }
            }
            emit(&common, &text)
        }
        Command::Locallimit { k, mode, depth, seed, count, common } => {
            let s = sampler(k)?;
            let cap = 10_000_000;
            let views = parallel_map(count, common.jobs(), |i| {
                let mut rng = stream_rng(seed, i as u64);
                match mode {
                    LimitMode::Root => s.sample_root_limit(depth, &mut rng, cap),
                    LimitMode::Vertex => s.sample_vertex_limit(depth, &mut rng, cap),
                }
            });
            let config = json!({ "k": k, "mode": mode, "depth": depth, "seed": seed, "count": count });
            let mut text = header("locallimit", config) + "\n";
            for view in views {
                let view = view.map_err(|e| CliError::run("sampler", e))?;
                // keep only the requested ball
                let ball = view.network.ball(view.center, depth);
                let (_, new_id) = view.network.canonical_numbering();
                let line = json!({
                    "center": new_id[view.center],
                    "ball": ball.iter().map(|&v| new_id[v]).collect::<std::collections::BTreeSet<_>>(),
                    "ball_code": view.ball_code(depth),
                    "network": network_json(&view.network),
                });
                text.push_str(&(line.to_string() + "\n"));
            }
            emit(&common, &text)
        }
        Command::Stats { k, n, seed, count, format, common } => {
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            let s = sampler(k)?;
            let budget = s.default_max_rejections(n);
            let rows = parallel_map(count, common.jobs(), |i| {
                let x = s.sample_network(n, &mut stream_rng(seed, i as u64), budget)?;
                let h = directed_heights(&x.network);
                let g = undirected_heights(&x.network);
                let row = match format {
                    TableFormat::Csv => format!(
                        "{n},{},{},{},{}\n",
                        x.network.n_vertices(),
                        h.iter().max().unwrap(),
                        g.iter().max().unwrap(),
                        longest_directed_path(&x.network)
                    ),
                    TableFormat::Json => {
                        let order = special_order(&x.decorated, &x.vertex_of_node, &x.surplus);
                        let leaves = leaf_order(&x.decorated, &x.vertex_of_node);
                        json!({
                            "index": i,
                            "vertices": height_process(&h, &order),
                            "vertices_undirected": height_process(&g, &order),
                            "leaves": height_process(&h, &leaves),
                        })
                        .to_string()
                            + "\n"
                    }
                };
                Ok::<_, levelk_core::sampler::SamplerError>(row)
            });
            let config = json!({ "k": k, "n": n, "seed": seed, "count": count });
            let mut text = match format {
                TableFormat::Csv => format!("# {}\nn,vertices,height_directed,height_undirected,longest_directed_path\n", header("stats", config)),
                TableFormat::Json => header("stats", config) + "\n",
            };
            for row in rows {
                text.push_str(&row.map_err(|e| CliError::run("sampler", e))?);
            }
            emit(&common, &text)
        }
        Command::Census { k, n, seed, count, depth, scope, common } => {
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            let s = sampler(k)?;
            let budget = s.default_max_rejections(n);
            let which = match scope {
                Scope::Vertices => CensusScope::Vertices,
                Scope::Leaves => CensusScope::Leaves,
                Scope::Root => CensusScope::Root,
            };
            let parts = parallel_map(count, common.jobs(), |i| {
                s.sample_network(n, &mut stream_rng(seed, i as u64), budget)
                    .map(|x| neighborhood_census(&x.network, depth, which))
            });
            let mut census = Census::new(depth);
            for p in parts {
                census.merge(&p.map_err(|e| CliError::run("sampler", e))?);
            }
            let mut v = census.to_json();
            v["config"] = json!({ "k": k, "n": n, "seed": seed, "count": count, "depth": depth, "scope": scope });
            emit(&common, &(serde_json::to_string_pretty(&v).expect("JSON serializes") + "\n"))
        }
        Command::Bruteforce { k, n, raw, cache_dir, common } => {
            if k == 0 {
                return Err(CliError::Usage("k must be at least 1".into()));
            }
            let u = load_universe(k, n, raw, cache_dir.as_ref())?;
            eprintln!("{}", json!({ "k": k, "n": n, "networks": u.len() }));
            emit(&common, &u.to_json_lines())
        }
        Command::Verify { quick, criteria, seed, common } => {
            let ids: Vec<usize> = if !criteria.is_empty() {
                criteria
            } else if quick {
                QUICK.to_vec()
            } else {
                (1..=CRITERIA).collect()
            };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA) {
                return Err(CliError::Usage(format!("no criterion {bad}")));
            }
            let cfg = VerifyConfig { seed, jobs: common.jobs() };
            let mut text = String::new();
            let mut failed = Vec::new();
            for id in ids {
                let outcome = verify::run(id, &cfg);
                if common.out.is_none() {
                    println!("{}", outcome.line());
                }
                text.push_str(&(outcome.line() + "\n"));
                if !outcome.passed {
                    failed.push(id);
                }
            }
            if common.out.is_some() {
                emit(&common, &text)?;
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(failed))
            }
        }
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e }));
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("{}", json!({ "error": "usage", "message": m }));
            ExitCode::from(2)
        }
        Err(CliError::Failed(kind, m)) => {
            eprintln!("{}", json!({ "error": kind, "message": m }));
            ExitCode::from(2)
        }
        Err(CliError::Verification(ids)) => {
            eprintln!("{}", json!({ "error": "verification", "failed": ids }));
            ExitCode::from(1)
        }
    }
}
