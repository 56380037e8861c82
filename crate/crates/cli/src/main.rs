use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmgeo::harness::checks::{ratio_table_csv, Caps, DEFAULT_SLACK};
use mmgeo::harness::report::{reports_to_csv, reports_to_json};
use mmgeo::harness::suite::{run_suite, Suite, SuiteConfig};
use mmgeo::isoperimetry::{self, CutMethod, CutResult};
use mmgeo::mmspace::{gen_cycle, gen_dumbbell, gen_gauss_interval, gen_grid_torus, load_space, save_space, MMSpace};
use mmgeo::separation::{self, CandidateFamily, SepConfig, DEFAULT_MAX_K};
use mmgeo::{spectral, transport, Error};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "mmgeo", version, about = "Spectral, isoperimetric, separation and transport quantities on finite metric-measure spaces")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Enumeration caps, e.g. `hk_exact_n=12,sep_nodes=1000000,prohorov_n=10,sweep_trials=64`.
    #[arg(long, global = true)]
    caps: Option<String>,
    /// Relative slack for tolerance-class checks.
    #[arg(long, global = true)]
    slack: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated space to a file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Compute one quantity of a space.
    Compute(ComputeArgs),
    /// Run the inequality suites on a space.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum GenKind {
    Cycle {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        circumference: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Gauss {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 5.0)]
        half_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Dumbbell {
        #[arg(long)]
        clique: usize,
        #[arg(long)]
        bridge_len: usize,
        #[arg(long)]
        bridge_weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Torus {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        lx: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        ly: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    Spectrum,
    Hk,
    Sep,
    Alpha,
    Obsdiam,
    W2,
    Tra,
    Prohorov,
    Entropy,
    Sweep,
    Heat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HkMethod {
    Auto,
    Exact,
    Chain,
    Sweep,
}

#[derive(Args)]
struct ComputeArgs {
    #[arg(value_enum)]
    quantity: Quantity,
    space: PathBuf,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = HkMethod::Auto)]
    method: HkMethod,
    /// Comma-separated masses for `sep`.
    #[arg(long, value_delimiter = ',')]
    kappas: Vec<f64>,
    /// Mass parameter for `obsdiam`.
    #[arg(long)]
    kappa: Option<f64>,
    /// Comma-separated radii for `alpha`.
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,
    /// Time for `heat`.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated probability vector (defaults to the space measure).
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    nu: Vec<f64>,
    /// Comma-separated function values for `sweep` and `heat`.
    #[arg(long, value_delimiter = ',')]
    f: Vec<f64>,
    /// Lower-bound mode for `sep` and `alpha`.
    #[arg(long)]
    heuristic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    space: PathBuf,
    /// `all` or a comma-separated list of spectral, separation, transport, lemmas.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    #[arg(long, default_value_t = 20)]
    random_spaces: usize,
    /// Report file (stdout when absent).
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV of the growth ratios per k.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

/// A failure with its exit code and a one-line reason.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 3, kind: "usage", message: message.into() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure { code: 2, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

/// Errors of the library: bad requests are usage errors, everything about
/// reading files is I/O.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) | Error::Parse(_) => (2, "io"),
            Error::CapExceeded { .. } => (3, "cap"),
            Error::InvalidArgument(_) => (3, "usage"),
            Error::InvariantViolation { .. } | Error::Disconnected { .. } => (3, "invalid"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let caps = parse_caps(cli.caps.as_deref())?;
    match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Compute(args) => cmd_compute(args, cli.seed, cli.format, caps),
        Command::Verify(args) => {
            let slack = cli.slack.unwrap_or(DEFAULT_SLACK);
            cmd_verify(args, cli.seed, cli.format, caps, slack)
        }
    }
}

fn parse_caps(spec: Option<&str>) -> Result<Caps, Failure> {
    let mut caps = Caps::default();
    let Some(spec) = spec else { return Ok(caps) };
    for item in spec.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| Failure::usage(format!("cap `{item}` is not key=value")))?;
        let bad = || Failure::usage(format!("cap `{key}` needs a nonnegative integer, got `{value}`"));
        let v: u64 = value.parse().map_err(|_| bad())?;
        match key {
            "hk_exact_n" => caps.hk_exact_n = v as usize,
            "sep_nodes" => caps.sep_nodes = v,
            "prohorov_n" => caps.prohorov_n = v as usize,
            "sweep_trials" => caps.sweep_trials = v as usize,
            _ => return Err(Failure::usage(format!("unknown cap `{key}`"))),
        }
    }
    Ok(caps)
}

fn cmd_gen(kind: GenKind) -> Outcome {
    let (space, out) = match kind {
        GenKind::Cycle { n, circumference, out } => (gen_cycle(n, circumference)?, out),
        GenKind::Gauss { n, sigma, half_width, out } => (gen_gauss_interval(n, sigma, half_width)?, out),
        GenKind::Dumbbell { clique, bridge_len, bridge_weight, out } => {
            (gen_dumbbell(clique, bridge_len, bridge_weight)?, out)
        }
        GenKind::Torus { nx, ny, lx, ly, out } => (gen_grid_torus(nx, ny, lx, ly)?, out),
    };
    save_space(&space, &out).map_err(|e| Failure::io(&out, e))?;
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<MMSpace, Failure> {
    load_space(path).map_err(|e| Failure::io(path, e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn provenance(exact: bool) -> &'static str {
    if exact {
        "exact"
    } else {
        "heuristic"
    }
}

fn cut_row(k: usize, cut: &CutResult) -> Map<String, Value> {
    let sets: Vec<Vec<usize>> = cut.family.sets().iter().map(|a| a.indices().to_vec()).collect();
    let mut row = Map::new();
    row.insert("k".into(), json!(k));
    row.insert("value".into(), json!(cut.value));
    row.insert("provenance".into(), json!(if cut.method == CutMethod::Exact { "exact" } else { "sweep" }));
    row.insert("sets".into(), json!(sets));
    row
}

fn require<T>(v: Option<T>, flag: &str, quantity: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("`{quantity}` needs --{flag}")))
}

fn measure_or_default(space: &MMSpace, v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        space.measure().to_vec()
    } else {
        v.to_vec()
    }
}

fn cmd_compute(args: ComputeArgs, seed: u64, format: Format, caps: Caps) -> Outcome {
    let space = load(&args.space)?;
    let mut rows: Vec<Map<String, Value>> = Vec::new();
    let mut row = |pairs: Vec<(&str, Value)>| rows.push(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
    match args.quantity {
        Quantity::Spectrum => {
            let k = require(args.k, "k", "spectrum")?;
            let spec = spectral::eigenpairs(&space, k)?;
            for (j, l) in spec.eigenvalues.iter().enumerate() {
                row(vec![("k", json!(j)), ("lambda", json!(l)), ("provenance", json!("exact"))]);
            }
        }
        Quantity::Hk => {
            let k = require(args.k, "k", "hk")?;
            let cut = match args.method {
                HkMethod::Exact => isoperimetry::hk_exact_with_cap(&space, k, caps.hk_exact_n)?,
                HkMethod::Chain => isoperimetry::hk_chain(&space, k)?,
                HkMethod::Sweep => isoperimetry::hk_sweep(&space, k, caps.sweep_trials, seed)?,
                HkMethod::Auto if space.n() <= caps.hk_exact_n => {
                    isoperimetry::hk_exact_with_cap(&space, k, caps.hk_exact_n)?
                }
                HkMethod::Auto if isoperimetry::is_chain_graph(&space) => isoperimetry::hk_chain(&space, k)?,
                HkMethod::Auto => isoperimetry::hk_sweep(&space, k, caps.sweep_trials, seed)?,
            };
            rows.push(cut_row(k, &cut));
        }
        Quantity::Sep => {
            if args.kappas.is_empty() {
                return Err(Failure::usage("`sep` needs --kappas"));
            }
            let r = if args.heuristic {
                separation::sep_heuristic(&space, &args.kappas)?
            } else {
                let config = SepConfig { max_nodes: caps.sep_nodes, max_k: DEFAULT_MAX_K };
                separation::sep_exact_with(&space, &args.kappas, &config)?
            };
            let sets: Vec<Vec<usize>> = r.witness.sets().iter().map(|a| a.indices().to_vec()).collect();
            row(vec![
                ("kappas", json!(args.kappas)),
                ("value", json!(r.value)),
                ("provenance", json!(provenance(r.exact))),
                ("empty_feasible", json!(r.empty_feasible)),
                ("sets", json!(sets)),
            ]);
        }
        Quantity::Alpha => {
            if args.r.is_empty() {
                return Err(Failure::usage("`alpha` needs --r"));
            }
            for &r in &args.r {
                let s = if args.heuristic {
                    separation::concentration_heuristic(&space, r)
                } else {
                    separation::concentration_function_with(&space, r, caps.sep_nodes)?
                };
                row(vec![("r", json!(r)), ("alpha", json!(s.alpha)), ("provenance", json!(provenance(s.exact)))]);
            }
        }
        Quantity::Obsdiam => {
            let kappa = require(args.kappa, "kappa", "obsdiam")?;
            let b = separation::obs_diameter_lower(&space, kappa, &CandidateFamily::standard())?;
            row(vec![
                ("kappa", json!(kappa)),
                ("value", json!(b.value)),
                ("candidate", json!(b.candidate)),
                ("provenance", json!("heuristic")),
            ]);
        }
        Quantity::W2 => {
            let (mu, nu) = (measure_or_default(&space, &args.mu), measure_or_default(&space, &args.nu));
            let (w, _) = transport::wasserstein2(&space, &mu, &nu)?;
            row(vec![("value", json!(w)), ("provenance", json!("exact"))]);
        }
        Quantity::Tra | Quantity::Prohorov => {
            let lambda = require(args.lambda, "lambda", "tra/prohorov")?;
            let (mu, nu) = (measure_or_default(&space, &args.mu), measure_or_default(&space, &args.nu));
            let v = if args.quantity == Quantity::Tra {
                transport::transportation_distance(&space, &mu, &nu, lambda)?
            } else {
                transport::prohorov_distance_with_cap(&space, &mu, &nu, lambda, caps.prohorov_n)?
            };
            row(vec![("lambda", json!(lambda)), ("value", json!(v)), ("provenance", json!("exact"))]);
        }
        Quantity::Entropy => {
            if args.nu.is_empty() {
                return Err(Failure::usage("`entropy` needs --nu"));
            }
            let e = transport::relative_entropy(&measure_or_default(&space, &args.mu), &args.nu)?;
            let v = if e.is_finite() { json!(e.value()) } else { json!("inf") };
            row(vec![("value", v), ("provenance", json!("exact"))]);
        }
        Quantity::Sweep => {
            let cut = isoperimetry::sweep_cut(&space, &args.f)?;
            let mut r = cut_row(1, &cut);
            r.remove("k");
            r.insert("bound".into(), json!(isoperimetry::sweep_lemma_bound(&space, &args.f)));
            rows.push(r);
        }
        Quantity::Heat => {
            let t = require(args.t, "t", "heat")?;
            let h = spectral::heat_apply(&space, &args.f, t)?;
            for (x, v) in h.values.iter().enumerate() {
                row(vec![("x", json!(x)), ("value", json!(v)), ("provenance", json!("exact"))]);
            }
        }
    }
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            s
        }
        Format::Csv => rows_to_csv(&rows)?,
    };
    write_output(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn rows_to_csv(rows: &[Map<String, Value>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = rows.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
    let csv_err = |e: csv::Error| Failure { code: 2, kind: "io", message: e.to_string() };
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let fields = header.iter().map(|k| match &r[k] {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        });
        w.write_record(fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 2, kind: "io", message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_verify(args: VerifyArgs, seed: u64, format: Format, caps: Caps, slack: f64) -> Outcome {
    let suites = if args.suite == "all" {
        Vec::new()
    } else {
        args.suite.split(',').map(str::parse).collect::<Result<Vec<Suite>, _>>()?
    };
    let space = load(&args.space)?;
    let config = SuiteConfig { seed, slack, suites, k_max: args.k_max, random_spaces: args.random_spaces, caps };
    let out = run_suite(&space, &config)?;
    let text = match format {
        Format::Json => reports_to_json(&out.reports),
        Format::Csv => reports_to_csv(&out.reports),
    };
    write_output(args.report.as_deref(), &text)?;
    if let Some(p) = &args.plot_data {
        fs::write(p, ratio_table_csv(&out.ratio_rows)).map_err(|e| Failure::io(p, e))?;
    }
    let hard: Vec<&str> = out.reports.iter().filter(|r| r.is_hard_failure()).map(|r| r.id.as_str()).collect();
    let failed = out.reports.iter().filter(|r| !r.passed()).count();
    eprintln!("summary: {} reports, {} failed, {} hard failures", out.reports.len(), failed, hard.len());
    if hard.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Failure { code: 1, kind: "hard-failure", message: hard.join(",") })
    }
}
