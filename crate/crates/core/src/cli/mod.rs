//! Command-line front end.
//!
//! Every command resolves a [`RunConfig`] from an optional JSON file and
//! flags (flags win), writes its artifacts atomically into the output
//! directory and prints its JSON document on standard output. Exit codes:
//! 0 success, 1 malformed input, 2 numerical failure.

pub mod expr;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bifurcation::diagram::{build_diagram_with, BifurcationDiagram, DiagramConfig};
use crate::bifurcation::equilibria::{find_equilibria, Kind};
use crate::dynamics::field::{ScalarField, StateDomain};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};
use crate::models::{self, BumpConstants};
use crate::nonautonomous::{
    compute_pullback, construct_pseudo_orbit, forward_limit_on, make_stable_path, verify_pseudo_orbit, PseudoOrbitConfig,
    RoutingPolicy, StablePath,
};
use crate::tipping::{classify_tipping, energy_balance_report, find_rate_windows, ClassifyConfig, RateScanConfig};

use expr::{field_from_expression, lambda_function, shift_from_expression};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "TIPSHIFT_THREADS";

const DEFAULT_B: &str = "2.5";
const DEFAULT_C: &str = "0.8 + 0.4*lambda";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// Built-in name; ignored when `expr` is set.
    pub name: String,
    /// `f(x, lambda)` as an expression.
    pub expr: Option<String>,
    /// `b(lambda)` and `c(lambda)` of the energy-balance model.
    pub b: String,
    pub c: String,
    pub bump: BumpConstants,
    pub domain: Option<(f64, f64)>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            name: models::CHANGEOVER.into(),
            expr: None,
            b: DEFAULT_B.into(),
            c: DEFAULT_C.into(),
            bump: BumpConstants::default(),
            domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    /// `tanh`, `logistic` or an expression in `s`.
    pub family: String,
    pub lmin: Option<f64>,
    pub lmax: Option<f64>,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self { family: "tanh".into(), lmin: None, lmax: None }
    }
}

/// Everything a command needs; embedded in every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub shift: ShiftSpec,
    /// Past equilibrium; by default the stable one nearest the domain centre.
    pub x0: Option<f64>,
    pub rate: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub eps: f64,
    pub n_grid: usize,
    pub skip_scan: bool,
    pub diagram: DiagramConfig,
    pub scan: RateScanConfig,
    pub pseudo: PseudoOrbitConfig,
    pub routing: RoutingPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            shift: ShiftSpec::default(),
            x0: None,
            rate: 0.1,
            r_min: 0.01,
            r_max: 10.0,
            eps: 0.05,
            n_grid: 1001,
            skip_scan: false,
            diagram: DiagramConfig::default(),
            scan: RateScanConfig::default(),
            pseudo: PseudoOrbitConfig::default(),
            routing: RoutingPolicy::default(),
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let pos = [self.rate, self.r_min, self.r_max, self.eps, self.scan.bisect_tol];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("rates and tolerances must be positive".into()));
        }
        if self.r_min >= self.r_max {
            return Err(Error::InvalidArgument(format!("need r_min < r_max, got {} and {}", self.r_min, self.r_max)));
        }
        if let (Some(a), Some(b)) = (self.shift.lmin, self.shift.lmax) {
            if !(a < b) {
                return Err(Error::InvalidArgument(format!("need lmin < lmax, got {a} and {b}")));
            }
        }
        self.diagram.validate()?;
        self.scan.pullback.integrator.validate()
    }

    fn field(&self) -> Result<ScalarField> {
        let m = &self.model;
        let domain = m.domain.map(|(lo, hi)| StateDomain::new(lo, hi)).transpose()?;
        if let Some(text) = &m.expr {
            return field_from_expression("expression", text, domain.unwrap_or(StateDomain { lo: -10.0, hi: 10.0 }));
        }
        let f = match m.name.as_str() {
            models::CHANGEOVER => models::changeover(),
            models::BUMP => models::bump(m.bump),
            models::ENERGY_BALANCE => models::energy_balance(lambda_function(&m.b)?, lambda_function(&m.c)?),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown model `{other}`; built-ins are {}, {} and {}",
                    models::CHANGEOVER,
                    models::BUMP,
                    models::ENERGY_BALANCE
                )))
            }
        };
        Ok(match domain {
            Some(d) => f.with_domain(d),
            None => f,
        })
    }

    fn lambda_range(&self) -> Result<(f64, f64)> {
        let default = match (self.model.expr.as_deref(), self.model.name.as_str()) {
            (None, models::CHANGEOVER) => Some((-2.0, 2.0)),
            (None, models::BUMP) => Some((-1.0, 1.0)),
            (None, models::ENERGY_BALANCE) => Some((0.0, 1.0)),
            _ => None,
        };
        match (self.shift.lmin, self.shift.lmax, default) {
            (Some(a), Some(b), _) => Ok((a, b)),
            (a, b, Some((da, db))) => Ok((a.unwrap_or(da), b.unwrap_or(db))),
            _ => Err(Error::InvalidArgument("expression models need --lmin and --lmax".into())),
        }
    }

    fn shift(&self) -> Result<ParameterShift> {
        let (a, b) = self.lambda_range()?;
        match self.shift.family.as_str() {
            "tanh" => ParameterShift::tanh(a, b),
            "logistic" => ParameterShift::logistic(a, b),
            text => shift_from_expression(text, a, b),
        }
    }

    fn x0(&self, field: &ScalarField, lambda_minus: f64) -> Result<f64> {
        if let Some(x) = self.x0 {
            return Ok(x);
        }
        let dom = field.domain();
        let mid = 0.5 * (dom.lo + dom.hi);
        find_equilibria(field, lambda_minus, self.diagram.n_scan)
            .into_iter()
            .filter(|e| e.kind == Kind::Stable)
            .min_by(|a, b| (a.x - mid).abs().total_cmp(&(b.x - mid).abs()))
            .map(|e| e.x)
            .ok_or_else(|| Error::InvalidArgument(format!("no stable equilibrium at lambda = {lambda_minus}; pass --x0")))
    }

    fn diagram(&self, field: &ScalarField) -> Result<BifurcationDiagram> {
        build_diagram_with(field, self.lambda_range()?, &self.diagram)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tipshift", version, about = "Tipping analysis of scalar ODEs under parameter shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium branches and bifurcation points (diagram.csv, diagram.json)
    Diagram(CommonArgs),
    /// Pullback attractor at one rate (pullback.csv, pullback.json)
    Pullback(CommonArgs),
    /// Critical-rate windows over a rate range (scan.csv, scan.json)
    Scan(CommonArgs),
    /// Tracking, bifurcation or rate-induced tipping verdicts (classify.json)
    Classify(CommonArgs),
    /// Pseudo-orbit shadowing the stable path (pseudo.csv, pseudo.json)
    Pseudo(CommonArgs),
    /// Branch conditions of the energy-balance model (ebm.json)
    Ebm(CommonArgs),
    /// List the built-in models
    Models,
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Built-in model: changeover, bump or energy-balance
    #[arg(long)]
    model: Option<String>,
    /// Right-hand side f(x, lambda) as an expression
    #[arg(long = "rhs")]
    rhs: Option<String>,
    /// b(lambda) of the energy-balance model
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// c(lambda) of the energy-balance model
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    /// tanh, logistic, or an expression in s
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lmax: Option<f64>,
    /// Past equilibrium
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rmin: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    /// Log-spaced rates in a scan
    #[arg(long)]
    n_rates: Option<usize>,
    #[arg(long)]
    bisect_tol: Option<f64>,
    /// Pseudo-orbit tolerance
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n_lambda: Option<usize>,
    /// Scan points for equilibria
    #[arg(long)]
    n_scan: Option<usize>,
    /// Grid points on [0, 1] for the energy-balance conditions
    #[arg(long)]
    n_grid: Option<usize>,
    /// Report only the small-rate verdict
    #[arg(long)]
    skip_scan: bool,
    /// Routing through branch points with several stable continuations
    #[arg(long, value_parser = ["stable-upper", "stable-lower", "strict"])]
    routing: Option<String>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            cfg.model.name = m.clone();
            cfg.model.expr = None;
        }
        set(&mut cfg.model.expr, self.rhs.clone().map(Some));
        set(&mut cfg.model.b, self.b.clone());
        set(&mut cfg.model.c, self.c.clone());
        match (self.xmin, self.xmax, cfg.model.domain) {
            (Some(a), Some(b), _) => cfg.model.domain = Some((a, b)),
            (Some(a), None, Some((_, b))) | (None, Some(b), Some((a, _))) => cfg.model.domain = Some((a, b)),
            (None, None, _) => {}
            _ => return Err(Error::InvalidArgument("--xmin and --xmax go together".into())),
        }
        set(&mut cfg.shift.family, self.shift.clone());
        set(&mut cfg.shift.lmin, self.lmin.map(Some));
        set(&mut cfg.shift.lmax, self.lmax.map(Some));
        set(&mut cfg.x0, self.x0.map(Some));
        set(&mut cfg.rate, self.rate);
        set(&mut cfg.r_min, self.rmin);
        set(&mut cfg.r_max, self.rmax);
        set(&mut cfg.scan.n_scan, self.n_rates);
        set(&mut cfg.scan.bisect_tol, self.bisect_tol);
        set(&mut cfg.eps, self.eps);
        set(&mut cfg.diagram.n_lambda, self.n_lambda);
        set(&mut cfg.diagram.n_scan, self.n_scan);
        set(&mut cfg.n_grid, self.n_grid);
        cfg.skip_scan |= self.skip_scan;
        if let Some(r) = &self.routing {
            cfg.routing = serde_json::from_value(Value::String(r.clone())).expect("value parser admits known policies");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn csv<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&self, name: &str, fill: F) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        write_atomic(&self.dir.join(name), &buf)
    }

    fn json(&self, name: &str, doc: &Value) -> Result<String> {
        let text = serde_json::to_string_pretty(doc).expect("json values serialize") + "\n";
        write_atomic(&self.dir.join(name), text.as_bytes())?;
        Ok(text)
    }
}

fn document(command: &str, cfg: &RunConfig, result: Value) -> Value {
    json!({ "command": command, "config": cfg, "result": result })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn path_for(cfg: &RunConfig, d: &BifurcationDiagram, shift: &ParameterShift, x0: f64) -> Option<StablePath> {
    make_stable_path(d, shift, x0, cfg.routing).ok()
}

fn cmd_diagram(cfg: &RunConfig, out: &Output) -> Result<String> {
    let field = cfg.field()?;
    let d = cfg.diagram(&field)?;
    out.csv("diagram.csv", |w| d.write_csv(w))?;
    let branches: Vec<Value> = d
        .branches
        .iter()
        .map(|b| {
            json!({
                "id": b.id,
                "stability": b.stability.as_str(),
                "lambda_range": b.lambda_range(),
                "x_range": b.x_range(),
                "start": b.start,
                "end": b.end,
            })
        })
        .collect();
    let result = json!({ "branches": branches, "bifurcation_points": d.points_json() });
    out.json("diagram.json", &document("diagram", cfg, result))
}

fn cmd_pullback(cfg: &RunConfig, out: &Output) -> Result<String> {
    let field = cfg.field()?;
    let shift = cfg.shift()?;
    let x0 = cfg.x0(&field, shift.lambda_minus())?;
    let pb = compute_pullback(&field, &shift, cfg.rate, x0, &cfg.scan.pullback)?;
    let d = cfg.diagram(&field).ok();
    let path = d.as_ref().and_then(|d| path_for(cfg, d, &shift, x0));
    out.csv("pullback.csv", |w| pb.write_csv(w, path.as_ref()))?;
    let limit = d.as_ref().map(|d| forward_limit_on(&pb, d, shift.lambda_plus()));
    let result = json!({
        "x_minus": x0,
        "r": pb.r,
        "horizon": pb.horizon,
        "t_forward": pb.t_forward,
        "convergence": pb.convergence,
        "retries": pb.retries,
        "escape": pb.escape,
        "end": pb.end(),
        "forward_limit": limit,
        "samples": pb.trajectory.len(),
    });
    out.json("pullback.json", &document("pullback", cfg, result))
}

fn cmd_scan(cfg: &RunConfig, out: &Output) -> Result<String> {
    let field = cfg.field()?;
    let shift = cfg.shift()?;
    let x0 = cfg.x0(&field, shift.lambda_minus())?;
    let res = find_rate_windows(&field, &shift, x0, cfg.r_min, cfg.r_max, &cfg.scan)?;
    out.csv("scan.csv", |w| res.write_csv(w))?;
    let result = json!({ "x_minus": x0, "scan": res });
    out.json("scan.json", &document("scan", cfg, result))
}

fn cmd_classify(cfg: &RunConfig, out: &Output) -> Result<String> {
    let field = cfg.field()?;
    let shift = cfg.shift()?;
    let x0 = cfg.x0(&field, shift.lambda_minus())?;
    let ccfg = ClassifyConfig {
        scan: cfg.scan.clone(),
        r_lo: cfg.r_min,
        r_hi: cfg.r_max,
        diagram: cfg.diagram.clone(),
        skip_scan: cfg.skip_scan,
        ..ClassifyConfig::default()
    };
    let rep = classify_tipping(&field, &shift, x0, &ccfg)?;
    out.json("classify.json", &document("classify", cfg, to_value(&rep)))
}

fn cmd_pseudo(cfg: &RunConfig, out: &Output) -> Result<String> {
    let field = cfg.field()?;
    let shift = cfg.shift()?;
    let x0 = cfg.x0(&field, shift.lambda_minus())?;
    let d = cfg.diagram(&field)?;
    let path = make_stable_path(&d, &shift, x0, cfg.routing)?;
    let po = construct_pseudo_orbit(&field, &shift, cfg.rate, &path, cfg.eps, &cfg.pseudo)?;
    let rep = verify_pseudo_orbit(&po, &field, &shift, &path, cfg.eps);
    out.csv("pseudo.csv", |w| po.write_csv(w))?;
    let result = json!({ "x_minus": x0, "jumps": po.jumps_json(), "report": rep, "crossings": path.crossings });
    out.json("pseudo.json", &document("pseudo", cfg, result))
}

fn cmd_ebm(cfg: &RunConfig, out: &Output) -> Result<String> {
    let b = lambda_function(&cfg.model.b)?;
    let c = lambda_function(&cfg.model.c)?;
    let rep = energy_balance_report(b, c, cfg.n_grid)?;
    let result = json!({ "report": rep, "no_rate_tipping": rep.no_rate_tipping() });
    out.json("ebm.json", &document("ebm", cfg, result))
}

fn cmd_models() -> String {
    serde_json::to_string_pretty(&models::catalog()).expect("catalog serializes") + "\n"
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn error_record(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": { "kind": kind, "message": message, "exit_code": code } }).to_string()
}

/// Run the command line `args` (program name first), writing to `stdout`
/// and `stderr`. Returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = writeln!(stderr, "{}", error_record("usage", e.render().to_string().trim_end(), 1));
            return 1;
        }
    };
    configure_threads();
    let outcome = match &cli.command {
        Command::Models => Ok(cmd_models()),
        Command::Diagram(a)
        | Command::Pullback(a)
        | Command::Scan(a)
        | Command::Classify(a)
        | Command::Pseudo(a)
        | Command::Ebm(a) => a.resolve().and_then(|cfg| {
            let out = Output::new(&a.out)?;
            match &cli.command {
                Command::Diagram(_) => cmd_diagram(&cfg, &out),
                Command::Pullback(_) => cmd_pullback(&cfg, &out),
                Command::Scan(_) => cmd_scan(&cfg, &out),
                Command::Classify(_) => cmd_classify(&cfg, &out),
                Command::Pseudo(_) => cmd_pseudo(&cfg, &out),
                Command::Ebm(_) => cmd_ebm(&cfg, &out),
                Command::Models => unreachable!("handled above"),
            }
        }),
    };
    match outcome {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let code = if e.is_usage() { 1 } else { 2 };
            let _ = writeln!(stderr, "{}", error_record(e.kind(), &e.to_string(), code));
            code
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
