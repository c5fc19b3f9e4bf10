use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mavaltk::convex::{ConvexFn, Frame, FrameJson};
use mavaltk::forms::ConstantForm;
use mavaltk::harness::{self, FunctionJson, SuiteReport, ValueJson};
use mavaltk::maops::{self, Lebesgue, MongeAmpere, Valuation, Weighted};
use mavaltk::measures::{AxisBox, RadonMeasure};
use mavaltk::{Complex64, Error};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mavaltk", version, about = "Monge-Ampere type valuations on convex functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Ambient dimension; inferred from the inputs when omitted.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Degree for `hessian` and `check positivity`.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Cells per axis for grid measures.
    #[arg(long, global = true, default_value_t = 64)]
    grid: usize,
    /// Region: `R` for [-R, R]^n, `LO:HI` on every axis, or `{"lo": [..], "hi": [..]}`.
    #[arg(long = "box", global = true, allow_hyphen_values = true)]
    region: Option<String>,
    /// Seed for randomized suites; defaults to MAVALTK_SEED, then a fixed value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Input function (or list of functions for `mixed-ma`) as JSON.
    #[arg(long, global = true)]
    json_in: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
    /// Drop atoms and zero out values whose magnitude is at most this.
    #[arg(long, global = true, default_value_t = 0.0)]
    tolerance: f64,
    /// Constant form as JSON.
    #[arg(long, global = true)]
    form: Option<PathBuf>,
    /// Frame as JSON, `{"columns": [[..], ..]}`.
    #[arg(long, global = true)]
    frame: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monge-Ampere measure: Alexandrov atoms for max-affine input, det D^2 f otherwise.
    Ma,
    /// Mixed Monge-Ampere measure of a JSON list of n functions.
    MixedMa,
    /// k-th Hessian measure of a C^2 function.
    Hessian,
    /// Psi_tau(f) for a primitive form.
    PsiTau,
    /// Klain function of a primitive form at the span of a frame.
    Klain,
    /// Density of an n-homogeneous valuation at a point, from the atom of a ball polytope.
    ExtractDensity(DensityArgs),
    /// Run a named acceptance suite.
    Check {
        suite: Suite,
    },
}

#[derive(Args)]
struct DensityArgs {
    /// Valuation to probe.
    #[arg(long, value_enum, default_value_t = ValuationKind::Ma)]
    valuation: ValuationKind,
    /// Constant weight multiplying the valuation.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    weight: f64,
    /// Point, comma separated.
    #[arg(long, allow_negative_numbers = true)]
    x: String,
    /// Vertices of the ball polytope.
    #[arg(long, default_value_t = 64)]
    m: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValuationKind {
    Ma,
    Lebesgue,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Positivity,
    Classification,
    Equivariance,
    ValuationAxioms,
}

enum Failure {
    Input(String),
    SuiteFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Outcome<&'a Path> {
    p.as_deref().ok_or_else(|| Failure::Input(format!("{flag} is required")))
}

fn check_dim(common: &Common, n: usize) -> Outcome<usize> {
    match common.n {
        Some(m) if m != n => Err(Failure::Input(format!("--n {m} does not match input dimension {n}"))),
        _ => Ok(n),
    }
}

fn parse_box(arg: Option<&str>, n: usize, default_radius: f64) -> Outcome<AxisBox> {
    let Some(s) = arg else { return Ok(AxisBox::cube(n, default_radius)) };
    let s = s.trim();
    let bad = |what: &str| Failure::Input(format!("--box {s}: {what}"));
    if s.starts_with('{') {
        let b: AxisBox = serde_json::from_str(s).map_err(|e| bad(&e.to_string()))?;
        if b.dim() != n {
            return Err(bad("dimension does not match the input"));
        }
        return Ok(AxisBox::new(b.lo, b.hi)?);
    }
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: f64 = lo.trim().parse().map_err(|_| bad("expected LO:HI"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("expected LO:HI"))?;
        return Ok(AxisBox::new(vec![lo; n], vec![hi; n])?);
    }
    let r: f64 = s.parse().map_err(|_| bad("expected a radius, LO:HI or a JSON box"))?;
    if !(r > 0.0) {
        return Err(bad("radius must be positive"));
    }
    Ok(AxisBox::cube(n, r))
}

fn read_function(common: &Common) -> Outcome<ConvexFn> {
    let j: FunctionJson = parse(require(&common.json_in, "--json-in")?)?;
    let f = j.to_function()?;
    check_dim(common, f.dim())?;
    Ok(f)
}

fn read_form(common: &Common) -> Outcome<ConstantForm> {
    let tau = ConstantForm::from_json(&read(require(&common.form, "--form")?)?)?;
    check_dim(common, tau.dim())?;
    Ok(tau)
}

fn smooth(f: &ConvexFn, what: &str) -> Outcome<mavaltk::convex::SmoothConvex> {
    f.as_smooth().cloned().ok_or_else(|| Failure::Input(format!("{what} needs a C^2 function (quadratic, exponentials, or pieces with beta)")))
}

fn clean(z: Complex64, tol: f64) -> Complex64 {
    if z.norm() <= tol { Complex64::new(0.0, 0.0) } else { z }
}

fn measure_json(mu: &RadonMeasure, tol: f64) -> Outcome<serde_json::Value> {
    let kept: Vec<_> = mu.atoms().iter().filter(|a| a.mass.norm() > tol).cloned().collect();
    let mut m = RadonMeasure::from_atoms(mu.dim(), kept)?;
    if let Some(d) = mu.density() {
        m = m.add(&RadonMeasure::from_density(d.clone()))?;
    }
    Ok(serde_json::json!({
        "measure": m.to_json(),
        "total_mass": ValueJson::from(clean(m.total_mass(), tol)),
    }))
}

fn emit<T: Serialize>(common: &Common, value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    match &common.json_out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_suite(suite: Suite, common: &Common) -> Outcome<SuiteReport> {
    let seed = common.seed.unwrap_or_else(harness::default_seed);
    let n = common.n.unwrap_or(2);
    Ok(match suite {
        Suite::Positivity => harness::suite_positivity(n, common.k.unwrap_or(1), seed)?,
        Suite::Classification => harness::suite_classification(n, seed)?,
        Suite::Equivariance => harness::suite_equivariance(n, seed)?,
        Suite::ValuationAxioms => harness::suite_valuation_axioms(n, seed)?,
    })
}

fn run(cli: &Cli) -> Outcome<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Ma => {
            let f = read_function(common)?;
            let radius = if f.as_max_affine().is_some() { 1e6 } else { 1.0 };
            let region = parse_box(common.region.as_deref(), f.dim(), radius)?;
            let mu = maops::ma(&f, &region, &vec![common.grid; f.dim()])?;
            emit(common, &measure_json(&mu, common.tolerance)?)
        }
        Command::MixedMa => {
            let list: Vec<FunctionJson> = parse(require(&common.json_in, "--json-in")?)?;
            let fs: Vec<ConvexFn> = list.iter().map(|j| j.to_function()).collect::<mavaltk::Result<_>>()?;
            let n = check_dim(common, fs.first().map(|f| f.dim()).ok_or(Error::Empty("function list"))?)?;
            let region = parse_box(common.region.as_deref(), n, 1.0)?;
            let mu = maops::mixed_ma(&fs, &region, &vec![common.grid; n])?;
            emit(common, &measure_json(&mu, common.tolerance)?)
        }
        Command::Hessian => {
            let f = read_function(common)?;
            let k = common.k.ok_or_else(|| Failure::Input("--k is required".into()))?;
            let region = parse_box(common.region.as_deref(), f.dim(), 1.0)?;
            let mu = maops::hessian_measure(k, &smooth(&f, "hessian")?, &region, &vec![common.grid; f.dim()])?;
            emit(common, &measure_json(&mu, common.tolerance)?)
        }
        Command::PsiTau => {
            let tau = read_form(common)?;
            let f = read_function(common)?;
            if f.dim() != tau.dim() {
                return Err(Failure::Input(format!("form is on R^{}, function on R^{}", tau.dim(), f.dim())));
            }
            let region = parse_box(common.region.as_deref(), f.dim(), 1.0)?;
            let mu = maops::psi_tau(&tau, &smooth(&f, "psi-tau")?, &region, &vec![common.grid; f.dim()])?;
            emit(common, &measure_json(&mu, common.tolerance)?)
        }
        Command::Klain => {
            let tau = read_form(common)?;
            let fj: FrameJson = parse(require(&common.frame, "--frame")?)?;
            let frame = Frame::try_from(&fj)?;
            let v = clean(maops::klain(&tau, &frame)?, common.tolerance);
            if common.json_out.is_some() {
                emit(common, &ValueJson::from(v))
            } else {
                if v.im == 0.0 { println!("{}", v.re) } else { println!("{v}") }
                Ok(())
            }
        }
        Command::ExtractDensity(a) => {
            let x: Vec<f64> = a
                .x
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Failure::Input(format!("--x {}: expected comma-separated numbers", a.x)))?;
            let n = check_dim(common, x.len())?;
            let region = AxisBox::cube(n, 1.0);
            let grid = vec![common.grid; n];
            let inner: Box<dyn Valuation> = match a.valuation {
                ValuationKind::Ma => Box::new(MongeAmpere { region, grid }),
                ValuationKind::Lebesgue => Box::new(Lebesgue { region, grid }),
            };
            let psi = Weighted::constant(inner, Complex64::new(a.weight, 0.0));
            let est = maops::extract_density(&psi, &x, a.m)?;
            emit(
                common,
                &serde_json::json!({
                    "value": ValueJson::from(clean(est.value, common.tolerance)),
                    "ball_normalized": ValueJson::from(clean(est.ball_normalized, common.tolerance)),
                    "volume_ratio": est.volume_ratio,
                }),
            )
        }
        Command::Check { suite } => {
            let report = run_suite(*suite, common)?;
            eprint!("{report}");
            emit(common, &report)?;
            if report.passed() { Ok(()) } else { Err(Failure::SuiteFailed) }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SuiteFailed) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
