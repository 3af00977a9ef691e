//! Command-line front end. Every subcommand reads JSON, writes one JSON
//! report (to `--out` or stdout) and a short summary to stderr.
//!
//! Exit codes: 0 success, 2 contract or verification failure (report still
//! written), 1 usage, input or IO error.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::corona::{corona_solve, fixture, fixture_certificate, CoronaProblem};
use crate::error::{Error, Result};
use crate::factor::{douglas_solve_tol, DOUGLAS_TOL};
use crate::haar::{twirl_exact, twirl_mc, BlockOperator};
use crate::json::{
    as_f64, as_str, as_usize, certificate_from_json, colligation_to_json, content_hash, dims_to_json, domain_from_json,
    field, matrix_from_json, matrix_to_json, pencil_from_json, tuples_from_json, CertificateSource,
};
use crate::linalg::{fro_norm, min_eig_hermitian, op_norm};
use crate::ncdomain::{membership_margin, pencil_to_domain, sample_domain_with, DomainSpec, SamplerConfig, MEMBER_TOL};
use crate::ncpoly::{parse_poly, parse_poly_infer, FreePolynomial, MatrixTuple, NcFunction};
use crate::par::stream_seed;
use crate::realize::{
    realize, verify_realization, Certificate, ExtensionMode, Realization, RealizeConfig, VerificationReport,
    VerifyConfig,
};
use crate::selftest::{run_selftest, SelftestConfig};

/// Residual bound for `a f = b` and `Σ a_i g_i = I` on held-out points.
const SOLVE_TOL: f64 = 1e-6;
/// Bound for exact algebraic identities and direct-sum residuals.
const IDENTITY_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "free-corona", version, about = "Free polynomials, free domains and contractive realizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a free polynomial at a matrix tuple.
    Eval {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        point: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Membership margin of points in a domain.
    Member {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a linear pencil `I − Λ(X) − Λ(X)*`.
    Pencil {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Douglas factorization `B = AE` of `{"A": …, "B": …}`.
    Douglas {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact level twirl of `{"p", "q", "n", "W"}`, cross-checked by Monte Carlo.
    Twirl {
        #[arg(long)]
        spec: PathBuf,
        /// Monte-Carlo draws; 0 skips the cross-check.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Realize a contractive solution of `a f = b` from a certificate.
    Realize {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        points: Points,
        #[command(flatten)]
        common: Common,
    },
    /// Solve a Toeplitz-Corona problem.
    Corona {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        points: Points,
        #[command(flatten)]
        common: Common,
    },
    /// Run the fixture suite.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Certificate truncation rank.
    #[arg(long = "trunc", value_name = "M", default_value_t = 16)]
    trunc: usize,
    #[arg(long, value_enum, default_value_t = Mode::ZeroExtend)]
    mode: Mode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Points {
    /// Construction points: a JSON file of tuples, or a count to sample.
    #[arg(long)]
    samples: Option<String>,
    /// Held-out probes: a JSON file of tuples, or a count to sample.
    #[arg(long)]
    holdout: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    ZeroExtend,
    Unitary,
}

impl From<Mode> for ExtensionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ZeroExtend => ExtensionMode::ZeroExtend,
            Mode::Unitary => ExtensionMode::Unitary,
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    /// Contract failure with the report that should still be written.
    Contract(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Errors that are properties of the mathematics rather than of the input.
fn is_contract_error(e: &Error) -> bool {
    matches!(
        e,
        Error::CertificateInconsistent { .. }
            | Error::FactorizationInfeasible { .. }
            | Error::ContractionViolation { .. }
            | Error::MarginTooSmall { .. }
            | Error::CoronaCondition { .. }
            | Error::OutsideDomain { .. }
            | Error::Conditioning { .. }
            | Error::Sampling { .. }
    )
}

struct Outcome {
    report: Value,
    passed: bool,
    summary: String,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, out) = command_meta(&cli.command);
    match dispatch(&cli.command) {
        Ok(o) => {
            eprintln!("{name}: {}", o.summary);
            if let Err(e) = write_report(&o.report, out.as_ref()) {
                eprintln!("error: {e}");
                return 1;
            }
            if o.passed {
                0
            } else {
                eprintln!("{name}: contract check failed");
                2
            }
        }
        Err(Failure::Contract(report)) => {
            let msg = report.get("error").and_then(Value::as_str).unwrap_or("contract failure").to_string();
            eprintln!("{name}: {msg}");
            if let Err(e) = write_report(&report, out.as_ref()) {
                eprintln!("error: {e}");
                return 1;
            }
            2
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn command_meta(c: &Command) -> (&'static str, Option<PathBuf>) {
    let (name, common) = match c {
        Command::Eval { common, .. } => ("eval", common),
        Command::Member { common, .. } => ("member", common),
        Command::Pencil { common, .. } => ("pencil", common),
        Command::Douglas { common, .. } => ("douglas", common),
        Command::Twirl { common, .. } => ("twirl", common),
        Command::Realize { common, .. } => ("realize", common),
        Command::Corona { common, .. } => ("corona", common),
        Command::Selftest { common } => ("selftest", common),
    };
    (name, common.out.clone())
}

fn write_report(report: &Value, out: Option<&PathBuf>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json(path: &PathBuf) -> std::result::Result<Value, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Usage(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn common_config(c: &Common) -> Value {
    json!({
        "tol": c.tol,
        "seed": c.seed,
        "trunc": c.trunc,
        "mode": format!("{:?}", c.mode),
    })
}

/// Report skeleton: command name plus hash of inputs and configuration.
fn envelope(command: &str, input: &Value, config: &Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("hash".into(), json!(content_hash(&json!({"input": input, "config": config}))));
    m
}

/// Turns a contract error into a written report; input errors stay usage errors.
fn contract_or_usage(env: &Map<String, Value>, e: Error) -> Failure {
    if is_contract_error(&e) {
        let mut r = env.clone();
        r.insert("passed".into(), json!(false));
        r.insert("error".into(), json!(e.to_string()));
        if let Error::FactorizationInfeasible { min_eig } = e {
            r.insert("min_eig".into(), json!(min_eig));
        }
        Failure::Contract(Value::Object(r))
    } else {
        Failure::Usage(e.to_string())
    }
}

fn finish(mut env: Map<String, Value>, body: Map<String, Value>, passed: bool, summary: String) -> Outcome {
    env.extend(body);
    env.insert("passed".into(), json!(passed));
    Outcome { report: Value::Object(env), passed, summary }
}

fn dispatch(cmd: &Command) -> std::result::Result<Outcome, Failure> {
    match cmd {
        Command::Eval { poly, point, common } => cmd_eval(poly, point, common),
        Command::Member { spec, point, common } => cmd_member(spec, point, common),
        Command::Pencil { spec, point, common } => cmd_pencil(spec, point, common),
        Command::Douglas { spec, common } => cmd_douglas(spec, common),
        Command::Twirl { spec, samples, common } => cmd_twirl(spec, *samples, common),
        Command::Realize { spec, points, common } => cmd_realize(spec, points, common),
        Command::Corona { spec, points, common } => cmd_corona(spec, points, common),
        Command::Selftest { common } => cmd_selftest(common),
    }
}

/// `{"value": …}` for a single tuple, `{"values": [...]}` for a list.
fn per_point(input: &Value, xs: &[MatrixTuple], f: impl Fn(&MatrixTuple) -> Result<Value>) -> Result<(String, Value)> {
    if input.is_array() {
        Ok(("values".into(), Value::Array(xs.iter().map(f).collect::<Result<_>>()?)))
    } else {
        Ok(("value".into(), f(&xs[0])?))
    }
}

fn cmd_eval(poly: &str, point: &PathBuf, c: &Common) -> std::result::Result<Outcome, Failure> {
    let pv = read_json(point)?;
    let xs = tuples_from_json(&pv)?;
    let d = xs.first().map(MatrixTuple::d).ok_or_else(|| Failure::Usage("no points given".into()))?;
    let p = parse_poly_infer(poly, d)?;
    let env = envelope("eval", &json!({"poly": poly, "point": pv}), &common_config(c));
    let (key, val) = per_point(&pv, &xs, |x| Ok(matrix_to_json(&p.eval(x)?)))?;
    let mut body = Map::new();
    body.insert("shape".into(), json!([p.shape().0, p.shape().1]));
    body.insert(key, val);
    Ok(finish(env, body, true, format!("evaluated {} at {} point(s)", p, xs.len())))
}

fn cmd_member(spec: &PathBuf, point: &PathBuf, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec)?;
    let pv = read_json(point)?;
    let domain = domain_from_json(&sv)?;
    let xs = tuples_from_json(&pv)?;
    let env = envelope("member", &json!({"spec": sv, "point": pv}), &common_config(c));
    let entry = |x: &MatrixTuple| -> Result<Value> {
        let m = membership_margin(&domain, x)?;
        Ok(json!({"margin": m, "member": m > MEMBER_TOL}))
    };
    let mut body = Map::new();
    let summary = if pv.is_array() {
        let (k, v) = per_point(&pv, &xs, entry)?;
        body.insert(k, v);
        format!("{} point(s) tested", xs.len())
    } else {
        let v = entry(&xs[0])?;
        let summary = format!("margin {} member {}", v["margin"], v["member"]);
        if let Value::Object(m) = v {
            body.extend(m);
        }
        summary
    };
    Ok(finish(env, body, true, summary))
}

fn cmd_pencil(spec: &PathBuf, point: &PathBuf, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec)?;
    let pv = read_json(point)?;
    let pencil = pencil_from_json(&sv)?;
    let domain = pencil_to_domain(&pencil);
    let xs = tuples_from_json(&pv)?;
    let env = envelope("pencil", &json!({"spec": sv, "point": pv}), &common_config(c));
    let mut worst: f64 = 0.0;
    let mut results = Vec::new();
    for x in &xs {
        let l = pencil.eval(x)?;
        let e = domain.epsilon().eval(x)?;
        let d = domain.delta().eval(x)?;
        let residual = op_norm(&(&e * e.adjoint() - &d * d.adjoint() - &l));
        worst = worst.max(residual);
        let min_eig = min_eig_hermitian(&l);
        results.push(json!({
            "L": matrix_to_json(&l),
            "min_eig": min_eig,
            "member": min_eig > MEMBER_TOL,
            "identity_residual": residual,
        }));
    }
    let mut body = Map::new();
    if pv.is_array() {
        body.insert("values".into(), Value::Array(results));
    } else if let Some(Value::Object(m)) = results.pop() {
        body.extend(m);
    }
    let passed = worst <= 1e-12;
    Ok(finish(env, body, passed, format!("identity residual {worst:.3e}")))
}

fn cmd_douglas(spec: &PathBuf, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec)?;
    let a = matrix_from_json(field(&sv, "A")?)?;
    let b = matrix_from_json(field(&sv, "B")?)?;
    let env = envelope("douglas", &sv, &common_config(c));
    let r = douglas_solve_tol(&a, &b, DOUGLAS_TOL.max(c.tol * 1e-2)).map_err(|e| contract_or_usage(&env, e))?;
    let mut body = Map::new();
    body.insert("E".into(), matrix_to_json(&r.e));
    body.insert("residual".into(), json!(r.residual));
    body.insert("norm_E".into(), json!(r.norm_e));
    let passed = r.norm_e <= 1.0 + c.tol;
    Ok(finish(env, body, passed, format!("|E| = {:.6}, |AE - B| = {:.3e}", r.norm_e, r.residual)))
}

fn cmd_twirl(spec: &PathBuf, draws: usize, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec)?;
    let w = matrix_from_json(field(&sv, "W")?)?;
    let p = as_usize(field(&sv, "p")?, "p")?;
    let q = as_usize(field(&sv, "q")?, "q")?;
    let n = as_usize(field(&sv, "n")?, "n")?;
    let w = BlockOperator::new(w, p, q, n)?;
    let mut config = common_config(c);
    config["samples"] = json!(draws);
    let env = envelope("twirl", &sv, &config);
    let (inner, lifted) = twirl_exact(&w);
    let mut body = Map::new();
    body.insert("inner".into(), matrix_to_json(&inner));
    body.insert("norm_W".into(), json!(op_norm(w.matrix())));
    body.insert("norm_lifted".into(), json!(op_norm(lifted.matrix())));
    let mut passed = true;
    let mut summary = format!("{p}x{q} inner operator at level {n}");
    if draws > 0 {
        let mc = twirl_mc(&w, draws, c.seed);
        let residual = fro_norm(&(mc - lifted.matrix()));
        let bound = 5.0 * fro_norm(w.matrix()) / (draws as f64).sqrt();
        passed = residual <= bound;
        body.insert("mc".into(), json!({"draws": draws, "residual": residual, "bound": bound, "passed": passed}));
        summary.push_str(&format!(", MC residual {residual:.3e} (bound {bound:.3e})"));
    }
    Ok(finish(env, body, passed, summary))
}

/// `--samples` / `--holdout`: a JSON file of tuples, or a count of seeded
/// points with levels cycling through `1..=max_level`.
fn resolve_points(
    arg: Option<&String>,
    default_count: usize,
    max_level: usize,
    spec: &DomainSpec,
    radius: Option<f64>,
    seed: u64,
) -> std::result::Result<(Vec<MatrixTuple>, Value), Failure> {
    let count = match arg {
        Some(s) => match s.parse::<usize>() {
            Ok(c) => c,
            Err(_) => {
                let v = read_json(&PathBuf::from(s))?;
                return Ok((tuples_from_json(&v)?, v));
            }
        },
        None => default_count,
    };
    if count == 0 {
        return Err(Failure::Usage("point count must be positive".into()));
    }
    let sampler = SamplerConfig { max_entry_norm: radius, ..SamplerConfig::default() };
    let points = (0..count)
        .map(|i| Ok(sample_domain_with(spec, 1 + i % max_level, 1, stream_seed(seed, i as u64), &sampler)?.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    Ok((points, json!({"count": count, "max_level": max_level, "radius": radius, "seed": seed})))
}

fn realize_contract(r: &VerificationReport, tol: f64, f_bound: f64) -> Vec<(&'static str, bool)> {
    vec![
        ("a f = b", r.max_af_minus_b <= SOLVE_TOL),
        ("norm bound", r.max_f_norm <= f_bound + tol),
        ("defect identity", r.max_defect_residual <= tol),
        ("defect positivity", r.min_defect_eig >= -IDENTITY_TOL),
        ("direct sums", r.direct_sum_residual <= IDENTITY_TOL),
        ("similarity", r.similarity_ratio <= tol),
    ]
}

fn contract_json(items: &[(&str, bool)]) -> Value {
    Value::Object(items.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

fn bundle(real: &Realization) -> Map<String, Value> {
    let mut m = colligation_to_json(&real.colligation);
    m.insert("dims".into(), dims_to_json(&real.dims));
    m.insert("spec".into(), crate::json::domain_to_json(&real.spec));
    m
}

struct RealizeInput {
    spec: DomainSpec,
    a: FreePolynomial,
    b: FreePolynomial,
    cert: CertOrFixture,
    radius: Option<f64>,
}

enum CertOrFixture {
    Ready(Certificate),
    Fixture(String),
}

/// Default sampling cap for fixtures whose certificate carries a tail.
fn fixture_radius(name: &str) -> Option<f64> {
    (name == "disc-corona").then_some(0.6)
}

fn certificate_for(cert: &CertOrFixture, trunc: usize, points: &[MatrixTuple]) -> Result<Certificate> {
    match cert {
        CertOrFixture::Ready(c) => Ok(c.clone()),
        CertOrFixture::Fixture(name) => Ok(fixture_certificate(name, trunc)?.certificate(points)),
    }
}

fn source_to_cert(src: CertificateSource) -> CertOrFixture {
    match src {
        CertificateSource::Fixture(name) => CertOrFixture::Fixture(name),
        other => CertOrFixture::Ready(other.into_certificate().expect("non-fixture certificate")),
    }
}

/// `{"fixture": name}` or `{"spec", "e1", "e2", "e3", "a", "b", "certificate"}`.
fn realize_input(v: &Value, trunc: usize) -> Result<RealizeInput> {
    let radius = v.get("sample_radius").map(|r| as_f64(r, "sample_radius")).transpose()?;
    if let Some(name) = v.get("fixture") {
        let fx = fixture(as_str(name, "fixture name")?, trunc)?;
        let radius = radius.or(fixture_radius(&fx.cert.name));
        let cert = CertOrFixture::Fixture(fx.cert.name.clone());
        return Ok(RealizeInput { spec: fx.spec, a: fx.a, b: fx.b, cert, radius });
    }
    let spec = domain_from_json(field(v, "spec")?)?;
    let d = spec.d();
    let e1 = as_usize(field(v, "e1")?, "e1")?;
    let e2 = as_usize(field(v, "e2")?, "e2")?;
    let e3 = as_usize(field(v, "e3")?, "e3")?;
    let a = parse_poly(as_str(field(v, "a")?, "a text")?, d, (e3, e2))?;
    let b = parse_poly(as_str(field(v, "b")?, "b text")?, d, (e3, e1))?;
    let cert = source_to_cert(certificate_from_json(field(v, "certificate")?, d, Some((e3, trunc * spec.k())))?);
    Ok(RealizeInput { spec, a, b, cert, radius })
}

fn cmd_realize(spec_path: &PathBuf, pts: &Points, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec_path)?;
    let input = realize_input(&sv, c.trunc)?;
    let (points, pts_json) =
        resolve_points(pts.samples.as_ref(), 6, 3, &input.spec, input.radius, stream_seed(c.seed, 1))?;
    let (holdout, hold_json) =
        resolve_points(pts.holdout.as_ref(), 50, 4, &input.spec, input.radius, stream_seed(c.seed, 2))?;
    let mut config = common_config(c);
    config["samples"] = pts_json;
    config["holdout"] = hold_json;
    let env = envelope("realize", &sv, &config);
    let cert = certificate_for(&input.cert, c.trunc, &points)?;
    let rcfg = RealizeConfig { tol: c.tol, mode: c.mode.into(), seed: c.seed, ..RealizeConfig::default() };
    let real =
        realize(&input.spec, &input.a, &input.b, &cert, &points, &rcfg).map_err(|e| contract_or_usage(&env, e))?;
    let vcfg = VerifyConfig { seed: stream_seed(c.seed, 3), ..VerifyConfig::default() };
    let ver = verify_realization(&real.function(), &holdout, &input.a, &input.b, &vcfg)
        .map_err(|e| contract_or_usage(&env, e))?;
    let contract = realize_contract(&ver, c.tol, 1.0);
    let passed = contract.iter().all(|(_, ok)| *ok) && real.report.interpolation_residual <= c.tol;
    let mut body = bundle(&real);
    body.insert(
        "report".into(),
        json!({
            "construction": real.report,
            "verification": ver,
            "contract": contract_json(&contract),
        }),
    );
    let summary = format!(
        "rank {} at level {}, max |af - b| {:.3e}, max |f| {:.6}",
        real.report.rank, real.report.aggregate_level, ver.max_af_minus_b, ver.max_f_norm
    );
    Ok(finish(env, body, passed, summary))
}

fn cmd_corona(spec_path: &PathBuf, pts: &Points, c: &Common) -> std::result::Result<Outcome, Failure> {
    let sv = read_json(spec_path)?;
    let spec = domain_from_json(field(&sv, "spec")?)?;
    let d = spec.d();
    let mu = as_f64(field(&sv, "mu")?, "mu")?;
    let texts = field(&sv, "a")?.as_array().ok_or_else(|| Error::Json("expected list of a_i texts".into()))?;
    let a: Vec<Arc<dyn NcFunction>> = texts
        .iter()
        .map(|t| Ok(Arc::new(parse_poly(as_str(t, "a_i text")?, d, (1, 1))?) as Arc<dyn NcFunction>))
        .collect::<Result<_>>()?;
    if let Some(ell) = sv.get("ell") {
        if as_usize(ell, "ell")? != a.len() {
            return Err(Failure::Usage(format!("ell does not match the {} functions given", a.len())));
        }
    }
    let cert_src = source_to_cert(certificate_from_json(field(&sv, "certificate")?, d, Some((1, c.trunc * spec.k())))?);
    let radius = match (sv.get("sample_radius"), &cert_src) {
        (Some(r), _) => Some(as_f64(r, "sample_radius")?),
        (None, CertOrFixture::Fixture(name)) => fixture_radius(name),
        (None, _) => None,
    };
    let (points, pts_json) = resolve_points(pts.samples.as_ref(), 12, 3, &spec, radius, stream_seed(c.seed, 1))?;
    let (holdout, hold_json) = resolve_points(pts.holdout.as_ref(), 30, 4, &spec, radius, stream_seed(c.seed, 2))?;
    let mut config = common_config(c);
    config["samples"] = pts_json;
    config["holdout"] = hold_json;
    let env = envelope("corona", &sv, &config);
    let cert = certificate_for(&cert_src, c.trunc, &points)?;
    let prob = CoronaProblem::new(spec, mu, a, cert)?;
    let rcfg = RealizeConfig { tol: c.tol, mode: c.mode.into(), seed: c.seed, ..RealizeConfig::default() };
    let vcfg = VerifyConfig { seed: stream_seed(c.seed, 3), ..VerifyConfig::default() };
    let out = corona_solve(&prob, &points, &holdout, &rcfg, &vcfg).map_err(|e| contract_or_usage(&env, e))?;
    let r = &out.report;
    let mut contract = realize_contract(&r.verification, c.tol, 1.0);
    contract.push(("bezout", r.max_bezout_residual <= SOLVE_TOL));
    contract.push(("g norm", r.max_g_norm <= r.g_norm_bound + c.tol));
    contract.push(("kernel positivity", r.verification.min_kernel_eig >= -c.tol));
    let passed = contract.iter().all(|(_, ok)| *ok);
    let mut body = bundle(&out.realization);
    body.insert("ell".into(), json!(r.ell));
    body.insert("mu".into(), json!(r.mu));
    let g_at: Vec<Value> = holdout
        .iter()
        .take(4)
        .map(|x| Ok(json!({"point": crate::json::tuple_to_json(x), "g": out.solution.components(x)?.iter().map(matrix_to_json).collect::<Vec<_>>()})))
        .collect::<Result<_>>()?;
    body.insert("g_samples".into(), Value::Array(g_at));
    body.insert("report".into(), json!({"corona": r, "contract": contract_json(&contract)}));
    let summary = format!(
        "max |sum a_i g_i - I| {:.3e}, max |g| {:.6} (bound {:.6})",
        r.max_bezout_residual, r.max_g_norm, r.g_norm_bound
    );
    Ok(finish(env, body, passed, summary))
}

fn cmd_selftest(c: &Common) -> std::result::Result<Outcome, Failure> {
    if !(c.tol > 0.0) || c.trunc == 0 {
        return Err(Failure::Usage("tol must be positive and trunc at least 1".into()));
    }
    let cfg = SelftestConfig { seed: c.seed, tol: c.tol, trunc: c.trunc, ..SelftestConfig::default() };
    let env = envelope("selftest", &Value::Null, &common_config(c));
    let report = run_selftest(&cfg);
    for k in &report.criteria {
        eprintln!("criterion {} [{}] {}", k.id, if k.passed { "PASS" } else { "FAIL" }, k.title);
    }
    let passed = report.passed;
    let failed = report.criteria.iter().filter(|k| !k.passed).count();
    let Value::Object(body) = serde_json::to_value(&report).expect("report serializes") else {
        unreachable!("selftest report is an object")
    };
    let summary = format!("{} of {} criteria passed", report.criteria.len() - failed, report.criteria.len());
    Ok(finish(env, body, passed, summary))
}
