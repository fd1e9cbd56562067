use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ota_coord::sim::{
    checktime_sweep, draw_channel, run_sweep, sweep_trials, ChannelModel, Fading, Solver, SweepAxis,
    SweepResult, SweepSpec,
};
use ota_coord::tree::{build_tree, exhaustive_optimum, Mode};
use ota_coord::{
    mmse, to_db, zf, Complex64, CoordError, CoordinationProblem, CoordinationSolution, ProblemDocument,
};
use serde::Deserialize;
use serde_json::{json, Value};

const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CAP: u8 = 4;

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_INPUT, error: error.into() }
    }
}

impl From<CoordError> for Failure {
    fn from(e: CoordError) -> Self {
        let code = match e {
            CoordError::InstanceTooLarge { .. } => EXIT_CAP,
            CoordError::RootInfeasible
            | CoordError::NoFeasibleSetting
            | CoordError::SingularGram { .. }
            | CoordError::NumericalInstability { .. }
            | CoordError::NullProjection { .. } => EXIT_SOLVER,
            _ => EXIT_INPUT,
        };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::input(error)
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "ota-coord", version, about = "Device coordination for over-the-air federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Run a Monte Carlo sweep over SNR or load.
    Sweep(SweepArgs),
    /// Build and export the feasibility tree of one instance.
    Tree(TreeArgs),
    /// Compare the greedy solvers with exhaustive search on random instances.
    OracleCompare(CompareArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "generate")]
    instance: Option<PathBuf>,
    /// Draw a random instance instead of reading one.
    #[arg(long)]
    generate: bool,
    /// Devices of a generated instance.
    #[arg(long = "L", default_value_t = 4)]
    devices: usize,
    /// Antennas of a generated instance.
    #[arg(long = "N", default_value_t = 8)]
    antennas: usize,
    /// Seed of a generated instance; drawn at random and reported when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// SNR in dB of a generated instance.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr: f64,
    /// Per-device power cap of a generated instance.
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    /// Comma-separated amplitude gains of a generated instance.
    #[arg(long, value_delimiter = ',')]
    pathloss: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = FadingArg::Complex)]
    fading: FadingArg,
    /// Overrides the noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FadingArg {
    Complex,
    Real,
}

impl From<FadingArg> for Fading {
    fn from(f: FadingArg) -> Self {
        match f {
            FadingArg::Complex => Fading::Complex,
            FadingArg::Real => Fading::Real,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Azf,
    Ammse,
    ZfOpt,
    MmseOpt,
    ZfShortcut,
    MmseShortcut,
    All,
}

impl SolverArg {
    const EACH: [SolverArg; 6] = [
        SolverArg::Azf,
        SolverArg::Ammse,
        SolverArg::ZfOpt,
        SolverArg::MmseOpt,
        SolverArg::ZfShortcut,
        SolverArg::MmseShortcut,
    ];

    fn name(self) -> &'static str {
        match self {
            SolverArg::Azf => "azf",
            SolverArg::Ammse => "ammse",
            SolverArg::ZfOpt => "zf-opt",
            SolverArg::MmseOpt => "mmse-opt",
            SolverArg::ZfShortcut => "zf-shortcut",
            SolverArg::MmseShortcut => "mmse-shortcut",
            SolverArg::All => "all",
        }
    }

    fn run(self, problem: &CoordinationProblem) -> Result<Option<CoordinationSolution>, CoordError> {
        match self {
            SolverArg::Azf => Solver::Azf.solve(problem).map(Some),
            SolverArg::Ammse => Solver::Ammse.solve(problem).map(Some),
            SolverArg::ZfOpt => exhaustive_optimum(problem, Mode::Zf).map(Some),
            SolverArg::MmseOpt => exhaustive_optimum(problem, Mode::Mmse).map(Some),
            SolverArg::ZfShortcut => Ok(zf::closed_form_shortcut(problem)),
            SolverArg::MmseShortcut => Ok(mmse::closed_form_shortcut(problem)),
            SolverArg::All => unreachable!("expanded before running"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value_t = SolverArg::All)]
    solver: SolverArg,
    /// Leave run metadata (seed, source) out of the report.
    #[arg(long)]
    seedless: bool,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the solved instance as JSON.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file with sweep settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    axis: Option<SweepAxis>,
    /// `start:step:stop` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long = "L")]
    devices: Option<usize>,
    #[arg(long = "N")]
    antennas: Option<usize>,
    /// SNR in dB for load sweeps.
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated solver names.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    metric: Option<MetricArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated amplitude gains.
    #[arg(long)]
    pathloss: Option<String>,
    #[arg(long)]
    fading: Option<Fading>,
    #[arg(long)]
    format: Option<CsvOrJson>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum MetricArg {
    Error,
    Checktime,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum CsvOrJson {
    Csv,
    Json,
}

/// Either a grid string or an explicit list.
#[derive(Deserialize)]
#[serde(untagged)]
enum GridValue {
    Text(String),
    List(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NameList {
    Text(String),
    List(Vec<String>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepConfigFile {
    axis: Option<SweepAxis>,
    grid: Option<GridValue>,
    #[serde(rename = "L", alias = "devices")]
    devices: Option<usize>,
    #[serde(rename = "N", alias = "antennas")]
    antennas: Option<usize>,
    snr: Option<f64>,
    power: Option<f64>,
    trials: Option<u64>,
    solvers: Option<NameList>,
    metric: Option<MetricArg>,
    seed: Option<u64>,
    pathloss: Option<Vec<f64>>,
    fading: Option<Fading>,
    format: Option<CsvOrJson>,
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Zf)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = TreeFormat::Json)]
    format: TreeFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Zf,
    Mmse,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Json,
    Dot,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "L", default_value_t = 4)]
    devices: usize,
    #[arg(long = "N", default_value_t = 8)]
    antennas: usize,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pathloss: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = FadingArg::Complex)]
    fading: FadingArg,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads().and_then(|()| dispatch(cli.command)) {
        eprintln!("error: {:#}", f.error);
        return ExitCode::from(f.code);
    }
    ExitCode::SUCCESS
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("OTA_COORD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::input(anyhow!("OTA_COORD_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::input(anyhow!(e)))
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Tree(a) => cmd_tree(a),
        Command::OracleCompare(a) => cmd_oracle_compare(a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::input),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn auto_seed(seed: Option<u64>) -> (u64, bool) {
    match seed {
        Some(s) => (s, false),
        None => (rand::random(), true),
    }
}

/// Loaded or generated instance plus metadata describing where it came from.
fn load_instance(args: &InstanceArgs) -> CliResult<(CoordinationProblem, Vec<(String, Value)>)> {
    let mut meta = Vec::new();
    let problem = match (&args.instance, args.generate) {
        (Some(path), false) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: ProblemDocument =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            meta.push(("instance".into(), json!(path.display().to_string())));
            CoordinationProblem::from_document(&doc)?
        }
        (None, true) => {
            let (seed, auto) = auto_seed(args.seed);
            let pathloss = args.pathloss.clone().unwrap_or_else(|| vec![1.0; args.devices]);
            let model = ChannelModel::new(args.antennas, args.devices, pathloss, seed)?.with_fading(args.fading.into());
            let h = draw_channel(&model, 0);
            let weights = vec![1.0 / args.devices as f64; args.devices];
            let noise = args.power * 10f64.powf(-args.snr / 10.0);
            meta.push(("generated".into(), serde_json::to_value(&model).expect("model serializes")));
            meta.push(("seed".into(), json!(seed)));
            meta.push(("seed_source".into(), json!(if auto { "auto" } else { "flag" })));
            meta.push(("snr_db".into(), json!(args.snr)));
            CoordinationProblem::new(h, weights, args.power, noise)?
        }
        _ => return Err(Failure::input(anyhow!("give exactly one of --instance or --generate"))),
    };
    let problem = match args.sigma2 {
        Some(s2) => problem.with_noise_variance(s2)?,
        None => problem,
    };
    Ok((problem, meta))
}

fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

fn round15(x: f64) -> f64 {
    sig15(x).parse().expect("formatted float parses")
}

fn complex_text(z: Complex64) -> String {
    format!("{}{}{}j", sig15(z.re), if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) { "-" } else { "+" }, sig15(z.im.abs()))
}

fn complex_json(v: &[Complex64]) -> Value {
    json!(v.iter().map(|z| [round15(z.re), round15(z.im)]).collect::<Vec<_>>())
}

enum SolveOutcome {
    Solved(CoordinationSolution),
    NotApplicable,
    Failed(CoordError),
}

fn cmd_solve(args: SolveArgs) -> CliResult<()> {
    let (problem, meta) = load_instance(&args.instance)?;
    if args.seedless && args.instance.generate && args.instance.seed.is_none() {
        return Err(Failure::input(anyhow!("--seedless with --generate needs an explicit --seed")));
    }
    if let Some(path) = &args.save_instance {
        let doc = serde_json::to_string_pretty(&problem.to_document()).expect("document serializes");
        emit(Some(path), &doc)?;
    }
    let solvers: Vec<SolverArg> = if args.solver == SolverArg::All {
        SolverArg::EACH.to_vec()
    } else {
        vec![args.solver]
    };
    let outcomes: Vec<(SolverArg, SolveOutcome)> = solvers
        .iter()
        .map(|&s| {
            let o = match s.run(&problem) {
                Ok(Some(sol)) => SolveOutcome::Solved(sol),
                Ok(None) => SolveOutcome::NotApplicable,
                Err(e) => SolveOutcome::Failed(e),
            };
            (s, o)
        })
        .collect();

    let text = match args.format {
        TextOrJson::Text => solve_text(&problem, &outcomes, if args.seedless { &[] } else { &meta }),
        TextOrJson::Json => solve_json(&problem, &outcomes, if args.seedless { &[] } else { &meta }),
    };
    emit(args.output.as_deref(), &text)?;

    // a single requested solver decides the exit status; `all` fails only on hard errors
    for (s, o) in outcomes {
        match o {
            SolveOutcome::Failed(e) => {
                let mut f = Failure::from(e);
                f.error = f.error.context(format!("solver {}", s.name()));
                return Err(f);
            }
            SolveOutcome::NotApplicable if args.solver != SolverArg::All => {
                return Err(Failure {
                    code: EXIT_SOLVER,
                    error: anyhow!("{}: closed-form condition does not hold", s.name()),
                });
            }
            _ => {}
        }
    }
    Ok(())
}

fn solve_text(problem: &CoordinationProblem, outcomes: &[(SolverArg, SolveOutcome)], meta: &[(String, Value)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out.push_str(&format!(
        "instance: N={} L={} P={} sigma2={}\n",
        problem.antennas(),
        problem.devices(),
        sig15(problem.power()),
        sig15(problem.noise_variance())
    ));
    for (s, o) in outcomes {
        out.push_str(&format!("\n[{}]\n", s.name()));
        match o {
            SolveOutcome::Solved(sol) => {
                out.push_str(&format!("subset: {}\n", sol.subset));
                out.push_str(&format!("error: {} ({} dB)\n", sig15(sol.error), sig15(sol.error_db())));
                out.push_str(&format!("check_count: {}\n", sol.check_count));
                let fmt = |v: &[Complex64]| v.iter().map(|z| complex_text(*z)).collect::<Vec<_>>().join(" ");
                out.push_str(&format!("receiver: {}\n", fmt(&sol.receiver)));
                out.push_str(&format!("scalings: {}\n", fmt(&sol.scalings)));
            }
            SolveOutcome::NotApplicable => out.push_str("not applicable: closed-form condition does not hold\n"),
            SolveOutcome::Failed(e) => out.push_str(&format!("failed: {e}\n")),
        }
    }
    out
}

fn solve_json(problem: &CoordinationProblem, outcomes: &[(SolverArg, SolveOutcome)], meta: &[(String, Value)]) -> String {
    let results: Vec<Value> = outcomes
        .iter()
        .map(|(s, o)| match o {
            SolveOutcome::Solved(sol) => json!({
                "solver": s.name(),
                "status": "ok",
                "subset": sol.subset.one_based(),
                "error_linear": round15(sol.error),
                "error_db": round15(sol.error_db()),
                "check_count": sol.check_count,
                "receiver": complex_json(&sol.receiver),
                "scalings": complex_json(&sol.scalings),
                "path": sol.diagnostics.path.iter().map(|p| p.one_based()).collect::<Vec<_>>(),
                "downdate_fallbacks": sol.diagnostics.downdate_fallbacks,
            }),
            SolveOutcome::NotApplicable => json!({"solver": s.name(), "status": "not-applicable"}),
            SolveOutcome::Failed(e) => json!({"solver": s.name(), "status": "failed", "message": e.to_string()}),
        })
        .collect();
    let doc = json!({
        "metadata": meta.iter().cloned().collect::<serde_json::Map<_, _>>(),
        "instance": {
            "antennas": problem.antennas(),
            "devices": problem.devices(),
            "power": problem.power(),
            "noise_variance": problem.noise_variance(),
        },
        "results": results,
    });
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

/// Parses `start:step:stop` (stop included when reached within 1e-9) or a
/// comma-separated list.
fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 1 {
        return text
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`")))
            .collect();
    }
    let [start, step, stop] = parts[..] else {
        bail!("grid must be start:step:stop, got `{text}`");
    };
    let parse = |v: &str| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`"));
    let (start, step, stop) = (parse(start)?, parse(step)?, parse(stop)?);
    if !(step.is_finite() && step != 0.0 && start.is_finite() && stop.is_finite()) {
        bail!("grid step must be finite and non-zero");
    }
    let span = (stop - start) / step;
    if span < -1e-9 {
        return Ok(Vec::new());
    }
    let count = (span + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let v = start + k as f64 * step;
            if (v - stop).abs() <= 1e-9 {
                stop
            } else {
                (v * 1e12).round() / 1e12
            }
        })
        .collect())
}

fn parse_names(list: &[String]) -> anyhow::Result<Vec<Solver>> {
    list.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Solver>().map_err(|e| anyhow!(e)))
        .collect()
}

fn split_commas(s: &str) -> Vec<String> {
    s.split(',').map(str::to_string).collect()
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let file: SweepConfigFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SweepConfigFile::default(),
    };

    let grid = match (&args.grid, file.grid) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(GridValue::Text(g))) => parse_grid(&g)?,
        (None, Some(GridValue::List(v))) => v,
        (None, None) => return Err(Failure::input(anyhow!("--grid is required"))),
    };
    let metric = args.metric.or(file.metric).unwrap_or(MetricArg::Error);
    let solvers = match (&args.solvers, file.solvers) {
        (Some(s), _) => parse_names(&split_commas(s))?,
        (None, Some(NameList::Text(s))) => parse_names(&split_commas(&s))?,
        (None, Some(NameList::List(v))) => parse_names(&v)?,
        (None, None) => match metric {
            MetricArg::Error => Solver::ALL.to_vec(),
            MetricArg::Checktime => vec![Solver::Azf, Solver::Ammse],
        },
    };
    let defaults = SweepSpec::default();
    let devices = args.devices.or(file.devices).unwrap_or(defaults.devices);
    let pathloss = match (&args.pathloss, file.pathloss) {
        (Some(p), _) => p
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad path loss `{v}`")))
            .collect::<anyhow::Result<Vec<_>>>()?,
        (None, Some(p)) => p,
        (None, None) => vec![1.0; devices],
    };
    let (seed, auto) = auto_seed(args.seed.or(file.seed));
    let spec = SweepSpec {
        axis: args.axis.or(file.axis).unwrap_or(SweepAxis::SnrDb),
        grid,
        trials: args.trials.or(file.trials).unwrap_or(defaults.trials),
        devices,
        antennas: args.antennas.or(file.antennas).unwrap_or(defaults.antennas),
        snr_db: args.snr.or(file.snr).unwrap_or(defaults.snr_db),
        power: args.power.or(file.power).unwrap_or(defaults.power),
        pathloss,
        fading: args.fading.or(file.fading).unwrap_or_default(),
        solvers,
        seed,
    };
    let format = args.format.or(file.format).unwrap_or(CsvOrJson::Csv);
    let output = args.output.or(file.output);

    let result: SweepResult = match metric {
        MetricArg::Error => run_sweep(&spec)?,
        MetricArg::Checktime => checktime_sweep(&spec)?,
    };
    let seed_source = if auto { "auto" } else { "given" };
    let text = match format {
        CsvOrJson::Csv => result.to_csv(&[("seed".into(), format!("{seed} ({seed_source})"))]),
        CsvOrJson::Json => {
            let mut v = serde_json::to_value(&result).expect("result serializes");
            v["seed_source"] = json!(seed_source);
            serde_json::to_string_pretty(&v).expect("result serializes") + "\n"
        }
    };
    emit(output.as_deref(), &text)
}

fn cmd_tree(args: TreeArgs) -> CliResult<()> {
    let (problem, _) = load_instance(&args.instance)?;
    let mode = match args.mode {
        ModeArg::Zf => Mode::Zf,
        ModeArg::Mmse => Mode::Mmse,
    };
    let tree = build_tree(&problem, mode)?;
    let text = match args.format {
        TreeFormat::Json => tree.to_json() + "\n",
        TreeFormat::Dot => tree.to_dot(),
    };
    emit(args.output.as_deref(), &text)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn cmd_oracle_compare(args: CompareArgs) -> CliResult<()> {
    let (seed, auto) = auto_seed(args.seed);
    let spec = SweepSpec {
        axis: SweepAxis::SnrDb,
        grid: vec![args.snr],
        trials: args.trials,
        devices: args.devices,
        antennas: args.antennas,
        pathloss: args.pathloss.clone().unwrap_or_else(|| vec![1.0; args.devices]),
        fading: args.fading.into(),
        solvers: Solver::ALL.to_vec(),
        seed,
        ..SweepSpec::default()
    };
    let trials = sweep_trials(&spec)?;
    let records = &trials[0].records;
    let mut report = Vec::new();
    for (greedy, oracle, name) in [(0, 2, "azf"), (1, 3, "ammse")] {
        let mut gaps: Vec<f64> = records[greedy]
            .iter()
            .zip(&records[oracle])
            .map(|(g, o)| to_db(g.error) - to_db(o.error))
            .collect();
        let matches = gaps.iter().filter(|g| g.abs() <= 1e-9).count();
        gaps.sort_by(f64::total_cmp);
        let mean_g = records[greedy].iter().map(|r| r.error).sum::<f64>() / gaps.len() as f64;
        let mean_o = records[oracle].iter().map(|r| r.error).sum::<f64>() / gaps.len() as f64;
        report.push(json!({
            "solver": name,
            "match_rate": matches as f64 / gaps.len() as f64,
            "mean_gap_db": to_db(mean_g) - to_db(mean_o),
            "gap_db": {
                "median": quantile(&gaps, 0.5),
                "p90": quantile(&gaps, 0.9),
                "p99": quantile(&gaps, 0.99),
                "max": gaps.last().copied().unwrap_or(f64::NAN),
            },
            "mean_check_count": records[greedy].iter().map(|r| r.check_count as f64).sum::<f64>() / gaps.len() as f64,
        }));
    }
    let text = match args.format {
        TextOrJson::Json => {
            serde_json::to_string_pretty(&json!({
                "config": spec,
                "seed_source": if auto { "auto" } else { "given" },
                "comparisons": report,
            }))
            .expect("report serializes")
                + "\n"
        }
        TextOrJson::Text => {
            let mut out = format!(
                "# seed: {seed} ({})\n# L={} N={} snr={} dB trials={}\n",
                if auto { "auto" } else { "given" },
                spec.devices,
                spec.antennas,
                args.snr,
                spec.trials
            );
            for r in &report {
                out.push_str(&format!(
                    "{}: match rate {:.4}, mean gap {:.4} dB, gap median {:.4} p90 {:.4} p99 {:.4} max {:.4} dB, mean check count {:.4}\n",
                    r["solver"].as_str().unwrap(),
                    r["match_rate"].as_f64().unwrap(),
                    r["mean_gap_db"].as_f64().unwrap(),
                    r["gap_db"]["median"].as_f64().unwrap(),
                    r["gap_db"]["p90"].as_f64().unwrap(),
                    r["gap_db"]["p99"].as_f64().unwrap(),
                    r["gap_db"]["max"].as_f64().unwrap(),
                    r["mean_check_count"].as_f64().unwrap(),
                ));
            }
            out
        }
    };
    emit(args.output.as_deref(), &text)
}
