//! `flattop` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flattop::data::{gen_mixed_1d, gen_segments_2d, gen_segments_2d_labeled, read_csv, write_csv_to, Dataset, SegmentsScenario};
use flattop::divergence::{
    ball_and_bestfit_normal, ball_vs_bestfit_normal, bestfit_normal_of_uniform, divergence_numeric,
    uniform_vs_bestfit_normal_1d, Density, DivergenceResult, DivergenceSettings,
};
use flattop::flatness::{analyze, BoundaryRule, DeltaMode, FlatnessOptions};
use flattop::mixture::{e_step, strategy, sweep, EmSettings};
use flattop::mle::{
    al_init_normal, cl_init, fit_al, fit_bl, fit_cl, gradcheck, loglik_normal_mle, FitReport, FitSettings,
};
use flattop::multivariate::{matrix_from_rows, MultivariateSpec, MvFamily};
use flattop::univariate::{parse_param_list, ParamMap};
use flattop::{FamilyTag, UnivariateSpec};
use serde_json::{json, Value};

const OUT_DIR_VAR: &str = "FLATTOP_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "flattop", version, about = "Flat-topped densities: evaluation, fitting, mixtures and divergences")]
struct Cli {
    /// Output file; relative paths resolve against $FLATTOP_OUT_DIR when set. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress notes on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Extra notes on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate pdf (and cdf) on a grid.
    Eval(EvalArgs),
    /// Draw a seeded sample.
    Sample(SampleArgs),
    /// Maximum-likelihood fit of AL, BL or CL.
    Fit(FitArgs),
    /// Fit a GMM or flat-topped mixture.
    Mixfit(MixfitArgs),
    /// AIC/BIC over a range of component counts.
    Sweep(SweepArgs),
    /// Flatness measures and bounds.
    Flatness(FlatnessArgs),
    /// KL divergence and L1 distance.
    Divergence(DivergenceArgs),
    /// Analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic dataset or the default scenario.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// `start:stop:step` with step > 0 and stop ≥ start.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Grid {
    start: f64,
    stop: f64,
    step: f64,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{s}` is not start:stop:step"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("grid `{s}`: `{t}` is not a number"));
        let g = Grid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        if !(g.start.is_finite() && g.stop.is_finite() && g.step.is_finite()) {
            return Err(format!("grid `{s}` has non-finite entries"));
        }
        if !(g.step > 0.0) {
            return Err(format!("grid `{s}`: step must be positive"));
        }
        if g.stop < g.start {
            return Err(format!("grid `{s}`: stop is below start"));
        }
        Ok(g)
    }
}

impl Grid {
    fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Inclusive `lo:hi` or a single value.
#[derive(Clone, Copy, Debug, PartialEq)]
struct KRange {
    lo: usize,
    hi: usize,
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a component count"));
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let k = num(s)?;
                (k, k)
            }
        };
        if lo == 0 || hi < lo {
            return Err(format!("component range `{s}` must satisfy 1 <= lo <= hi"));
        }
        Ok(KRange { lo, hi })
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    family: String,
    /// Comma-separated key=value list.
    #[arg(long, default_value = "")]
    params: String,
    #[arg(long, allow_hyphen_values = true)]
    grid: Grid,
    /// Dimension for CM/CL/MU (1 or 2), centred at 0 with identity scale matrix.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value = "")]
    params: String,
    /// Number of draws.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension for CM/CL/MU.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV dataset, one observation per line.
    #[arg(long)]
    data: PathBuf,
    /// Skip the first line.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// AL, BL or CL.
    #[arg(long)]
    family: String,
    #[command(flatten)]
    data: DataArgs,
    /// Initial parameters (AL/BL); defaults to the normal-based start.
    #[arg(long)]
    init: Option<String>,
    #[arg(long, default_value_t = FitSettings::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = FitSettings::default().grad_tol)]
    grad_tol: f64,
    /// Also write the per-iteration log-likelihood trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MixfitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// GMM or FTM.
    #[arg(long, default_value = "FTM")]
    family: String,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Responsibilities CSV; relative to $FLATTOP_OUT_DIR when set.
    #[arg(long, default_value = "responsibilities.csv")]
    resp: PathBuf,
    /// Keep AL components even when flat-topped (1D).
    #[arg(long)]
    no_upgrade: bool,
    #[arg(long, default_value_t = EmSettings::default().max_cycles)]
    max_cycles: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// GMM or FTM.
    #[arg(long)]
    family: String,
    /// Inclusive component range lo:hi.
    #[arg(long)]
    k: KRange,
    /// CSV dataset; defaults to the segments scenario.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    header: bool,
    /// Scenario JSON used when --data is absent.
    #[arg(long, conflicts_with = "data")]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    Canonical,
    Fwhm,
    Parameters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Integral,
    Concave,
}

#[derive(Args, Debug)]
struct FlatnessArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value = "")]
    params: String,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Canonical)]
    boundaries: BoundaryArg,
    /// Explicit boundaries `a:b`, overriding --boundaries.
    #[arg(long, allow_hyphen_values = true)]
    ab: Option<String>,
    /// Comma-separated thresholds to report verdicts at.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Window `x1:x2` for the δ-measure.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Integral)]
    mode: ModeArg,
    /// ε for the generalized-normal flat-interval ratio.
    #[arg(long)]
    ratio_eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CaseArg {
    /// Uniform interval vs its best-fit normal.
    Uniform,
    /// Uniform n-ball vs its best-fit normal.
    Ball,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Closed,
    Numeric,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    #[arg(long, value_enum, conflicts_with_all = ["p", "q"])]
    case: Option<CaseArg>,
    /// Ball dimension.
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Closed)]
    method: MethodArg,
    /// First density as FAMILY:key=value,...
    #[arg(long, requires = "q")]
    p: Option<String>,
    /// Second density as FAMILY:key=value,...
    #[arg(long, requires = "p")]
    q: Option<String>,
    #[arg(long, default_value_t = DivergenceSettings::default().draws)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// AL, BL or CL.
    #[arg(long)]
    family: String,
    /// Number of random instances.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenWhat {
    /// 40 uniform + 15 normal draws.
    Mixed,
    /// Noisy points on axis-aligned segments.
    Segments,
    /// The default segments scenario as JSON.
    Scenario,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    what: GenWhat,
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario JSON for `segments`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the scenario point count.
    #[arg(long)]
    n: Option<usize>,
    /// Override the scenario noise level.
    #[arg(long)]
    noise: Option<f64>,
    /// Append the source segment index as a third column.
    #[arg(long)]
    labels: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<flattop::Error> for Failure {
    fn from(e: flattop::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<T>(r: flattop::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

struct Ctx {
    out: Option<PathBuf>,
    quiet: bool,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn detail(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(p) => write_file(&resolve(p), text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json(&self, v: &Value) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
        s.push('\n');
        self.emit(&s)
    }
}

fn resolve(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn to_value<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| Failure::Runtime(e.to_string()))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn load(args: &DataArgs) -> CliResult<Dataset> {
    read_csv(&args.data, args.header).map_err(|e| Failure::Runtime(format!("{}: {e}", args.data.display())))
}

/// A univariate family or an elliptical one (CM/CL/MU) centred at 0 with Σ = I.
enum Model {
    Uni(UnivariateSpec),
    Multi(MultivariateSpec),
}

fn mv_from_params(family: MvFamily, params: &str, dim: usize) -> CliResult<MultivariateSpec> {
    if dim == 0 {
        return Err(Failure::Usage("--dim must be at least 1".into()));
    }
    let map: ParamMap = usage(parse_param_list(params))?;
    let allowed: &[&str] = if family == MvFamily::MU { &["r"] } else { &["r", "t"] };
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Failure::Usage(format!("unknown parameter `{k}` for {family}; expected {allowed:?}")));
    }
    let r = *map.get("r").ok_or_else(|| Failure::Usage(format!("{family} needs r")))?;
    let t = map.get("t").copied();
    if family != MvFamily::MU && t.is_none() {
        return Err(Failure::Usage(format!("{family} needs t")));
    }
    let identity: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    usage(MultivariateSpec::new(family, vec![0.0; dim], matrix_from_rows(&identity)?, r, t))
}

fn model(family: &str, params: &str, dim: usize) -> CliResult<Model> {
    if let Ok(mv) = family.parse::<MvFamily>() {
        return Ok(Model::Multi(mv_from_params(mv, params, dim)?));
    }
    Ok(Model::Uni(usage(UnivariateSpec::parse(family, params))?))
}

fn run_eval(ctx: &Ctx, a: &EvalArgs) -> CliResult<()> {
    let xs = a.grid.points();
    match model(&a.family, &a.params, a.dim)? {
        Model::Uni(spec) => {
            let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [x, spec.pdf(x), spec.cdf(x)]).collect();
            match a.format {
                Format::Csv => {
                    let mut s = String::from("x,pdf,cdf\n");
                    for r in &rows {
                        let _ = writeln!(s, "{},{},{}", num(r[0]), num(r[1]), num(r[2]));
                    }
                    ctx.emit(&s)
                }
                Format::Json => ctx.emit_json(&json!({
                    "family": spec.tag().as_str(),
                    "params": spec.param_map(),
                    "rows": rows.iter().map(|r| json!({"x": r[0], "pdf": r[1], "cdf": r[2]})).collect::<Vec<_>>(),
                })),
            }
        }
        Model::Multi(spec) => {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            match spec.n() {
                1 => {
                    for &x in &xs {
                        rows.push(vec![x, spec.pdf(&[x])?]);
                    }
                }
                2 => {
                    for &x in &xs {
                        for &y in &xs {
                            rows.push(vec![x, y, spec.pdf(&[x, y])?]);
                        }
                    }
                }
                _ => return Err(Failure::Usage("eval supports --dim 1 or 2 for elliptical families".into())),
            }
            let header = if spec.n() == 1 { "x,pdf" } else { "x,y,pdf" };
            match a.format {
                Format::Csv => {
                    let mut s = format!("{header}\n");
                    for r in &rows {
                        let line: Vec<String> = r.iter().map(|v| num(*v)).collect();
                        let _ = writeln!(s, "{}", line.join(","));
                    }
                    ctx.emit(&s)
                }
                Format::Json => ctx.emit_json(&json!({
                    "model": to_value(&spec)?,
                    "columns": header.split(',').collect::<Vec<_>>(),
                    "rows": rows,
                })),
            }
        }
    }
}

fn run_sample(ctx: &Ctx, a: &SampleArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let data = match model(&a.family, &a.params, a.dim)? {
        Model::Uni(spec) => spec.sample(a.n, a.seed)?,
        Model::Multi(spec) => spec.sample(a.n, a.seed)?,
    };
    match a.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv_to(&data, &mut buf)?;
            ctx.emit(&String::from_utf8_lossy(&buf))
        }
        Format::Json => ctx.emit_json(&json!({
            "dim": data.dim(),
            "provenance": data.provenance(),
            "rows": data.rows().map(|r| r.to_vec()).collect::<Vec<_>>(),
        })),
    }
}

fn write_trace(path: &Option<PathBuf>, report: &FitReport) -> CliResult<()> {
    match path {
        Some(p) => write_file(&resolve(p), &report.trace_csv()),
        None => Ok(()),
    }
}

fn run_fit(ctx: &Ctx, a: &FitArgs) -> CliResult<()> {
    let settings = FitSettings {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        ..FitSettings::default()
    };
    usage(settings.validate())?;
    let tag = a.family.to_ascii_uppercase();
    if tag == "CL" {
        if a.init.is_some() {
            return Err(Failure::Usage("--init is not supported for CL".into()));
        }
        let data = load(&a.data)?;
        let init = cl_init(&data)?;
        let (spec, report) = fit_cl(&data, &init, &settings)?;
        warn_report(ctx, &report);
        write_trace(&a.trace, &report)?;
        return ctx.emit_json(&json!({
            "family": "CL",
            "model": to_value(&spec)?,
            "report": to_value(&report)?,
        }));
    }
    let family: FamilyTag = usage(tag.parse())?;
    if !matches!(family, FamilyTag::AL | FamilyTag::BL) {
        return Err(Failure::Usage(format!("fit supports AL, BL and CL, not {family}")));
    }
    let user_init = match &a.init {
        Some(p) => Some(usage(UnivariateSpec::parse(family.as_str(), p))?),
        None => None,
    };
    let data = load(&a.data)?;
    let xs = data.as_univariate()?.to_vec();
    let mut stages = Vec::new();
    let (spec, report) = match family {
        FamilyTag::AL => {
            let init = match user_init {
                Some(s) => s,
                None => al_init_normal(&xs)?,
            };
            fit_al(&data, &init, &settings)?
        }
        _ => {
            let init = match user_init {
                Some(s) => s,
                None => {
                    let (al, al_report) = fit_al(&data, &al_init_normal(&xs)?, &settings)?;
                    ctx.detail(format!("AL stage: loglik {}", al_report.loglik));
                    stages.push(json!({"family": "AL", "params": al.param_map(), "loglik": al_report.loglik}));
                    let p = |k: &str| al.param(k).unwrap_or(f64::NAN);
                    UnivariateSpec::bl(p("a"), p("b"), p("s"), p("s"))?
                }
            };
            fit_bl(&data, &init, &settings)?
        }
    };
    warn_report(ctx, &report);
    write_trace(&a.trace, &report)?;
    let mut out = json!({
        "family": spec.tag().as_str(),
        "params": spec.param_map(),
        "report": to_value(&report)?,
        "normal_loglik": loglik_normal_mle(&xs),
    });
    if !stages.is_empty() {
        out["stages"] = Value::Array(stages);
    }
    ctx.emit_json(&out)
}

fn warn_report(ctx: &Ctx, report: &FitReport) {
    if !report.converged {
        ctx.note(format!("note: stopped without converging ({:?})", report.termination));
    }
    for w in &report.warnings {
        ctx.note(format!("warning: {w}"));
    }
}

fn run_mixfit(ctx: &Ctx, a: &MixfitArgs) -> CliResult<()> {
    let strat = usage(strategy(&a.family))?;
    if a.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let settings = EmSettings {
        max_cycles: a.max_cycles,
        upgrade_threshold: if a.no_upgrade { None } else { EmSettings::default().upgrade_threshold },
        ..EmSettings::default()
    };
    let data = load(&a.data)?;
    let (model, report) = strat.fit(&data, a.k, a.seed, &settings)?;
    if !report.flagged_points.is_empty() {
        ctx.note(format!("note: {} points underflowed under every component", report.flagged_points.len()));
    }
    let resp = e_step(&model, &data)?.resp;
    let resp_path = resolve(&a.resp);
    write_file(&resp_path, &resp.to_csv())?;
    ctx.detail(format!("responsibilities written to {}", resp_path.display()));
    ctx.emit_json(&json!({
        "strategy": strat.name(),
        "model": to_value(&model)?,
        "report": to_value(&report)?,
    }))
}

fn run_sweep(ctx: &Ctx, a: &SweepArgs) -> CliResult<()> {
    let strat = usage(strategy(&a.family))?;
    let data = match (&a.data, &a.scenario) {
        (Some(p), _) => read_csv(p, a.header).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        (None, Some(s)) => gen_segments_2d(&SegmentsScenario::load(s)?)?,
        (None, None) => gen_segments_2d(&SegmentsScenario::default())?,
    };
    let table = sweep(&data, strat.name(), a.k.lo..=a.k.hi, a.seed, &EmSettings::default())?;
    for r in &table.rows {
        if let Some(e) = &r.error {
            ctx.note(format!("K={}: {e}", r.k));
        }
    }
    match a.format {
        Format::Csv => ctx.emit(&table.to_csv()),
        Format::Json => ctx.emit_json(&json!({
            "strategy": table.strategy,
            "n_obs": data.len(),
            "rows": to_value(&table.rows)?,
            "argmin_aic": table.argmin_aic(),
            "argmin_bic": table.argmin_bic(),
        })),
    }
}

fn pair(s: &str, what: &str) -> CliResult<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("{what} `{s}` is not lo:hi")))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("{what} `{s}`: `{t}` is not a number")));
    Ok((p(a)?, p(b)?))
}

fn run_flatness(ctx: &Ctx, a: &FlatnessArgs) -> CliResult<()> {
    let spec = usage(UnivariateSpec::parse(&a.family, &a.params))?;
    let opts = FlatnessOptions {
        boundaries: match a.boundaries {
            BoundaryArg::Canonical => BoundaryRule::Canonical,
            BoundaryArg::Fwhm => BoundaryRule::Fwhm,
            BoundaryArg::Parameters => BoundaryRule::Parameters,
        },
        explicit: a.ab.as_deref().map(|s| pair(s, "--ab")).transpose()?,
        epsilons: a.eps.clone(),
        window: match &a.window {
            Some(w) => {
                let (x1, x2) = pair(w, "--window")?;
                let mode = match a.mode {
                    ModeArg::Integral => DeltaMode::Integral,
                    ModeArg::Concave => DeltaMode::Concave,
                };
                Some((x1, x2, mode))
            }
            None => None,
        },
        ratio_epsilon: a.ratio_eps,
    };
    let report = analyze(&*spec, &opts)?;
    ctx.emit_json(&json!({
        "family": spec.tag().as_str(),
        "params": spec.param_map(),
        "report": to_value(&report)?,
    }))
}

fn density_arg(s: &str) -> CliResult<Density> {
    let (fam, params) = s.split_once(':').unwrap_or((s, ""));
    Ok(Density::from(usage(UnivariateSpec::parse(fam, params))?))
}

fn run_divergence(ctx: &Ctx, a: &DivergenceArgs) -> CliResult<()> {
    let settings = DivergenceSettings {
        draws: a.draws,
        seed: a.seed,
        ..DivergenceSettings::default()
    };
    let result: DivergenceResult = match (&a.p, &a.q, a.case) {
        (Some(p), Some(q), _) => divergence_numeric(&density_arg(p)?, &density_arg(q)?, &settings)?,
        (_, _, Some(CaseArg::Uniform)) => match a.method {
            MethodArg::Closed => uniform_vs_bestfit_normal_1d(),
            MethodArg::Numeric => {
                let (m, v) = bestfit_normal_of_uniform(-1.0, 1.0)?;
                let p = Density::from(UnivariateSpec::uniform(-1.0, 1.0)?);
                let q = Density::from(UnivariateSpec::normal(m, v.sqrt())?);
                divergence_numeric(&p, &q, &settings)?
            }
        },
        (_, _, Some(CaseArg::Ball)) => {
            if a.n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            match a.method {
                MethodArg::Closed => ball_vs_bestfit_normal(a.n)?,
                MethodArg::Numeric => {
                    let (ball, normal) = ball_and_bestfit_normal(a.n)?;
                    let mut r = divergence_numeric(&ball, &normal, &settings)?;
                    r.chi_n = ball_vs_bestfit_normal(a.n)?.chi_n;
                    r
                }
            }
        }
        _ => return Err(Failure::Usage("give --case, or both --p and --q".into())),
    };
    ctx.emit_json(&to_value(&result)?)
}

fn run_gradcheck(ctx: &Ctx, a: &GradcheckArgs) -> CliResult<()> {
    let family = a.family.to_ascii_uppercase();
    if !matches!(family.as_str(), "AL" | "BL" | "CL") {
        return Err(Failure::Usage(format!("gradcheck supports AL, BL and CL, not {}", a.family)));
    }
    let rows = gradcheck(&family, a.n, a.seed)?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    ctx.note(format!("{family}: {} comparisons, max relative error {worst:e}", rows.len()));
    match a.format {
        Format::Csv => {
            let mut s = String::from("instance,param,analytic,numeric,rel_err\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{},{}", r.instance, r.param, num(r.analytic), num(r.numeric), num(r.rel_err));
            }
            ctx.emit(&s)
        }
        Format::Json => ctx.emit_json(&json!({
            "family": family,
            "max_rel_err": worst,
            "rows": to_value(&rows)?,
        })),
    }
}

fn run_gen(ctx: &Ctx, a: &GenArgs) -> CliResult<()> {
    let dataset_csv = |d: &Dataset| -> CliResult<String> {
        let mut buf = Vec::new();
        write_csv_to(d, &mut buf)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    };
    match a.what {
        GenWhat::Mixed => ctx.emit(&dataset_csv(&gen_mixed_1d(a.seed.unwrap_or(0)))?),
        GenWhat::Segments | GenWhat::Scenario => {
            let mut sc = match &a.scenario {
                Some(p) => SegmentsScenario::load(p)?,
                None => SegmentsScenario::default(),
            };
            if let Some(s) = a.seed {
                sc.seed = s;
            }
            if let Some(n) = a.n {
                sc.n_points = n;
            }
            if let Some(noise) = a.noise {
                sc.noise_sigma = noise;
            }
            usage(sc.validate())?;
            if a.what == GenWhat::Scenario {
                return ctx.emit_json(&to_value(&sc)?);
            }
            if a.labels {
                let (d, labels) = gen_segments_2d_labeled(&sc)?;
                let mut s = String::new();
                for (row, k) in d.rows().zip(labels) {
                    let _ = writeln!(s, "{},{},{k}", num(row[0]), num(row[1]));
                }
                ctx.emit(&s)
            } else {
                ctx.emit(&dataset_csv(&gen_segments_2d(&sc)?)?)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    let result = match &cli.command {
        Command::Eval(a) => run_eval(&ctx, a),
        Command::Sample(a) => run_sample(&ctx, a),
        Command::Fit(a) => run_fit(&ctx, a),
        Command::Mixfit(a) => run_mixfit(&ctx, a),
        Command::Sweep(a) => run_sweep(&ctx, a),
        Command::Flatness(a) => run_flatness(&ctx, a),
        Command::Divergence(a) => run_divergence(&ctx, a),
        Command::Gradcheck(a) => run_gradcheck(&ctx, a),
        Command::Gen(a) => run_gen(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
