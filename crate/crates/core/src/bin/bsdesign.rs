//! Command-line front end for the binary-search initial design.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bsdesign::baseline::{grid_table, simulate_grid_nonexistence, DEFAULT_GRID};
use bsdesign::cost::{coeffs_table, cost_study, default_stage_costs, points_table, predict_stage_size, CostFitCoeffs};
use bsdesign::likelihood::{fit_mle, mle_exists, FitOptions};
use bsdesign::nonexistence::{design_points_table, no_mle_table, DEFAULT_SIZES};
use bsdesign::oracle::{InteractiveOracle, ResponseOracle, ScriptedOracle, SimulatedOracle};
use bsdesign::report::Table;
use bsdesign::search::{recommended_next_levels, Limits, Method, Phase, ProbeSubset, SearchState, StageRole};
use bsdesign::simulation::{render_table, simulate_binary_search_with_progress, SimConfig, TableId, TABLE_LENGTHS};
use bsdesign::{Error, LinkParams, ModelKind};

#[derive(Parser)]
#[command(name = "bsdesign", version, about = "Binary-search initial designs for binary-response experiments")]
struct Cli {
    /// Directory for reports written without an explicit --out.
    #[arg(long, global = true, env = "BSDESIGN_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analytic tables: 1 = D-optimal levels, 2 = no-MLE probabilities.
    Tables(TablesArgs),
    /// Monte Carlo study of the binary search (tables 3, 4, 5).
    Simulate(SimulateArgs),
    /// Non-existence rates of equally spaced designs.
    Baseline(BaselineArgs),
    /// Fit the stage-size cost model from simulated stage counts.
    CostFit(CostFitArgs),
    /// Recommended stage size and next design levels.
    Recommend(RecommendArgs),
    /// Run or resume a live binary search.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    which: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(3..=5))]
    table: u32,
    #[arg(long, default_value = "cloglog")]
    model: ModelKind,
    /// Runs per cell (default 1000, or 5000 with --full).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 2007)]
    seed: u64,
    /// Use the full grid of 23 stage sizes and 7 interval lengths.
    #[arg(long)]
    full: bool,
    /// Fit method II on every probe stage instead of the final one.
    #[arg(long)]
    all_probes: bool,
    /// Also write every run record as JSON.
    #[arg(long)]
    raw_json: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, default_value = "cloglog")]
    model: ModelKind,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 2007)]
    seed: u64,
    /// Interval lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = TABLE_LENGTHS)]
    d: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CostFitArgs {
    #[arg(long, default_value = "cloglog")]
    model: ModelKind,
    #[arg(long, default_value_t = 5000)]
    runs: usize,
    #[arg(long, default_value_t = 2007)]
    seed: u64,
    /// Write the (d, C_S, optimal, predicted) points as CSV.
    #[arg(long)]
    points: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long, default_value = "cloglog")]
    model: ModelKind,
    /// Standardized interval length (slope times interval width).
    #[arg(long)]
    d: Option<f64>,
    /// Cost of one stage relative to one measurement.
    #[arg(long)]
    stage_cost: Option<f64>,
    /// Estimated slope, for the next design levels.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Estimated intercept, for the next design levels.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// simulate:a,b,seed | script:PATH | interactive
    #[arg(long)]
    oracle: String,
    /// Initial interval as lo,hi (taken from the state file when resuming).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Measurements per stage (taken from the state file when resuming).
    #[arg(long)]
    nk: Option<u64>,
    #[arg(long, default_value = "cloglog")]
    model: ModelKind,
    /// Search state, rewritten after every stage.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Continue from the state file instead of starting over.
    #[arg(long, requires = "state")]
    resume: bool,
    /// Replace an existing state file when starting a new search.
    #[arg(long)]
    overwrite: bool,
    /// Stop after this many new stages.
    #[arg(long)]
    stop_after: Option<usize>,
    #[arg(long, default_value_t = 0)]
    tie_seed: u64,
}

/// Usage problems exit with 2, everything else with 1.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::InvalidArgument(_)) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.clone();
    let result = match cli.command {
        Command::Tables(a) => cmd_tables(a, out_dir.as_deref()),
        Command::Simulate(a) => cmd_simulate(a, out_dir.as_deref()),
        Command::Baseline(a) => cmd_baseline(a, out_dir.as_deref()),
        Command::CostFit(a) => cmd_cost_fit(a, out_dir.as_deref()),
        Command::Recommend(a) => cmd_recommend(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn render(table: &Table, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Csv => table.to_csv_string()?,
        Format::Text => table.to_text(),
    })
}

/// Writes to `--out`, else to `out_dir/default_name`, else to stdout.
fn emit(table: &Table, output: &Output, out_dir: Option<&Path>, default_name: &str) -> CliResult {
    let text = render(table, output.format)?;
    let ext = match output.format {
        Format::Csv => "csv",
        Format::Text => "txt",
    };
    let target = match (&output.out, out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            fs::create_dir_all(dir)?;
            Some(dir.join(format!("{default_name}.{ext}")))
        }
        (None, None) => None,
    };
    match target {
        Some(path) => {
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_tables(args: TablesArgs, out_dir: Option<&Path>) -> CliResult {
    let (table, name) = match args.which {
        1 => (design_points_table(&ModelKind::ALL)?, "table1"),
        _ => (no_mle_table(&ModelKind::ALL, &DEFAULT_SIZES)?, "table2"),
    };
    emit(&table, &args.output, out_dir, name)
}

fn progress(cell: &bsdesign::simulation::CellResult, done: usize, total: usize) {
    eprintln!(
        "[{done}/{total}] d={} n_k={}: {} runs, {} failed",
        cell.d,
        cell.n_k,
        cell.runs.len(),
        cell.failures()
    );
}

fn cmd_simulate(args: SimulateArgs, out_dir: Option<&Path>) -> CliResult {
    let id = TableId::from_number(args.table)?;
    let mut config = if args.full { SimConfig::full(args.model) } else { SimConfig::desk(args.model) };
    if let Some(r) = args.runs {
        config.runs = r;
    }
    config.seed = args.seed;
    config.fit = id != TableId::Stages;
    if args.all_probes {
        config.probe_subset = ProbeSubset::AllProbes;
    }
    config.validate()?;
    let cells = simulate_binary_search_with_progress(&config, progress)?;
    if let Some(path) = &args.raw_json {
        fs::write(path, serde_json::to_string(&cells).map_err(Error::from)?)?;
        eprintln!("wrote {}", path.display());
    }
    let table = render_table(id, config.model, &cells);
    emit(&table, &args.output, out_dir, &format!("table{}_{}", args.table, config.model))
}

fn cmd_baseline(args: BaselineArgs, out_dir: Option<&Path>) -> CliResult {
    let cells = simulate_grid_nonexistence(args.model, &args.d, &DEFAULT_GRID, args.runs, args.seed)?;
    emit(&grid_table(args.model, &cells), &args.output, out_dir, &format!("baseline_{}", args.model))
}

fn cmd_cost_fit(args: CostFitArgs, out_dir: Option<&Path>) -> CliResult {
    let mut config = SimConfig::full(args.model);
    config.runs = args.runs;
    config.seed = args.seed;
    config.validate()?;
    let study = cost_study(&config, &default_stage_costs(), progress)?;
    if let Some(path) = &args.points {
        let mut f = fs::File::create(path)?;
        points_table(&study.points, &study.coeffs).write_csv(&mut f)?;
        eprintln!("wrote {}", path.display());
    }
    let mut table = coeffs_table(args.model, &study.coeffs);
    let published = CostFitCoeffs::published(args.model);
    table.title.push_str(&format!(
        "; published: alpha {}, beta {}, gamma {}, R2 {}",
        published.alpha, published.beta, published.gamma, published.r_squared
    ));
    emit(&table, &args.output, out_dir, &format!("costfit_{}", args.model))
}

fn cmd_recommend(args: RecommendArgs) -> CliResult {
    let mut said = false;
    match (args.d, args.stage_cost) {
        (Some(d), Some(c)) => {
            let coeffs = CostFitCoeffs::published(args.model);
            let n = predict_stage_size(&coeffs, d, c)?;
            println!(
                "stage size for d = {d}, C_S = {c} ({}): {n} (unrounded {:.2})",
                args.model,
                coeffs.predict_raw(d, c)
            );
            said = true;
        }
        (None, None) => {}
        _ => return Err(usage("--d and --stage-cost go together")),
    }
    match (args.a, args.b) {
        (Some(a), Some(b)) => {
            let params = LinkParams::new(a, b)?;
            let (x1, x2) = recommended_next_levels(args.model, &params)?;
            println!("next design levels for a = {a}, b = {b} ({}): {x1:.6} and {x2:.6}", args.model);
            said = true;
        }
        (None, None) => {}
        _ => return Err(usage("--a and --b go together")),
    }
    if !said {
        return Err(usage("give --d and --stage-cost, or --a and --b"));
    }
    Ok(())
}

enum OracleSpec {
    Simulate { a: f64, b: f64, seed: u64 },
    Script(PathBuf),
    Interactive,
}

fn parse_oracle(spec: &str) -> CliResult<OracleSpec> {
    if spec == "interactive" {
        return Ok(OracleSpec::Interactive);
    }
    if let Some(path) = spec.strip_prefix("script:") {
        return Ok(OracleSpec::Script(PathBuf::from(path)));
    }
    if let Some(rest) = spec.strip_prefix("simulate:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if let [a, b, seed] = parts[..] {
            let bad = |what: &str| usage(format!("bad {what} in oracle spec `{spec}`"));
            return Ok(OracleSpec::Simulate {
                a: a.parse().map_err(|_| bad("slope"))?,
                b: b.parse().map_err(|_| bad("intercept"))?,
                seed: seed.parse().map_err(|_| bad("seed"))?,
            });
        }
    }
    Err(usage(format!("oracle must be simulate:a,b,seed, script:PATH or interactive, got `{spec}`")))
}

fn parse_interval(s: &str) -> CliResult<(f64, f64)> {
    let bad = || usage(format!("interval must be lo,hi with lo < hi, got `{s}`"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn save_state(path: &Path, state: &SearchState) -> CliResult {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, state.to_json()?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn role_name(role: StageRole) -> &'static str {
    match role {
        StageRole::EndpointCheck => "endpoint",
        StageRole::Bisection => "bisection",
        StageRole::EpsilonProbe => "probe",
    }
}

fn initial_state(args: &RunArgs) -> CliResult<SearchState> {
    if args.resume {
        let path = args.state.as_ref().expect("clap enforces --state with --resume");
        let text = fs::read_to_string(path)
            .map_err(|e| Failure { code: 1, message: format!("cannot read {}: {e}", path.display()) })?;
        let state = SearchState::from_json(&text)
            .map_err(|e| Failure { code: 1, message: format!("bad state file {}: {e}", path.display()) })?;
        if let Some(s) = &args.interval {
            let (lo, hi) = parse_interval(s)?;
            if (lo, hi) != (state.x_min, state.x_max) {
                return Err(usage(format!(
                    "--interval {lo},{hi} does not match the saved interval {},{}",
                    state.x_min, state.x_max
                )));
            }
        }
        if args.nk.is_some_and(|n| n != state.stage_size) {
            return Err(usage(format!("--nk does not match the saved stage size {}", state.stage_size)));
        }
        return Ok(state);
    }
    let interval = args.interval.as_deref().ok_or_else(|| usage("--interval is required for a new search"))?;
    let (lo, hi) = parse_interval(interval)?;
    let nk = args.nk.ok_or_else(|| usage("--nk is required for a new search"))?;
    if let Some(path) = &args.state {
        if path.exists() && !args.overwrite {
            return Err(usage(format!(
                "{} exists; pass --resume to continue it or --overwrite to start over",
                path.display()
            )));
        }
    }
    Ok(SearchState::new(lo, hi, nk, Limits::default(), args.tie_seed)?)
}

fn cmd_run(args: RunArgs) -> CliResult {
    let spec = parse_oracle(&args.oracle)?;
    let mut state = initial_state(&args)?;
    let done = state.stages();
    let mut oracle: Box<dyn ResponseOracle> = match spec {
        OracleSpec::Simulate { a, b, seed } => {
            Box::new(SimulatedOracle::new(args.model, LinkParams::new(a, b)?, seed).resume_at(done as u64))
        }
        OracleSpec::Script(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| Failure { code: 1, message: format!("cannot read {}: {e}", path.display()) })?;
            Box::new(ScriptedOracle::parse(&text)?.skip(done * state.stage_size as usize))
        }
        OracleSpec::Interactive => {
            Box::new(InteractiveOracle::new(io::stdin().lock(), io::stdout()).starting_at(done))
        }
    };
    if let Some(path) = &args.state {
        save_state(path, &state)?;
    }

    println!(
        "Binary search on [{}, {}] with {} measurements per stage ({})",
        state.x_min, state.x_max, state.stage_size, args.model
    );
    for r in &state.history {
        println!("stage {:>3} {:<9} x = {:<12.6} {}/{}  (resumed)", r.stage, role_name(r.role), r.x, r.k, r.n);
    }
    let mut new_stages = 0;
    while !state.phase.is_terminal() {
        if args.stop_after.is_some_and(|n| new_stages >= n) {
            println!("stopped after {new_stages} new stages; next level {}", state.next_level()?);
            return Ok(());
        }
        let x = state.next_level()?;
        let k = oracle.measure(x, state.stage_size)?;
        state.apply_response(k)?;
        new_stages += 1;
        if let Some(path) = &args.state {
            save_state(path, &state)?;
        }
        let r = state.history.last().expect("stage just recorded");
        print!("stage {:>3} {:<9} x = {:<12.6} {}/{}", r.stage, role_name(r.role), r.x, r.k, r.n);
        match (state.phase, state.anchor, state.epsilon) {
            (Phase::Probing, Some(anchor), Some(eps)) if r.role != StageRole::EpsilonProbe => {
                println!("  anchor {anchor:.6}, eps {eps:.6}")
            }
            (Phase::Bisection, ..) => println!("  bracket [{:.6}, {:.6}]", state.lower, state.upper),
            _ => println!(),
        }
    }
    if let Some(f) = &state.failure {
        return Err(f.to_error().into());
    }

    println!("MLEs exist after {} stages: {}", state.stages(), mle_exists(&state.observations()));
    let opts = FitOptions::default();
    for method in [Method::I, Method::II] {
        let data = state.select_data(method, ProbeSubset::FinalProbe)?;
        match fit_mle(args.model, &data, &opts) {
            Ok(fit) => {
                println!(
                    "method {method:?}: a = {:.6} (se {:.6}), b = {:.6} (se {:.6}), {} levels, converged {}",
                    fit.a_hat,
                    fit.se_a,
                    fit.b_hat,
                    fit.se_b,
                    data.len(),
                    fit.converged
                );
                match fit.params().and_then(|p| recommended_next_levels(args.model, &p)) {
                    Ok((x1, x2)) => println!("  next design levels: {x1:.6} and {x2:.6}"),
                    Err(e) => println!("  no design levels: {e}"),
                }
            }
            Err(e) => println!("method {method:?}: fit failed: {e}"),
        }
    }
    Ok(())
}
