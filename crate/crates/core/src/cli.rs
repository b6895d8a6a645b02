//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed check, 2 unparseable input, 3 pole hit
//! during integration, 64 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::{self, CatalogEntry, CatalogError, Params, System};
use crate::expr::parse::{parse_rational, ParseContext, ParseError};
use crate::expr::{Expr, Symbol};
use crate::liealg::{extract_structure_constants, LieAlgError, LieAlgebraBasis, StructureTensor};
use crate::liesys::{
    build_symmetry_system, symmetry_residual, LieSysError, LieSystemDef, SampleGrid, SymmetryCandidate,
};
use crate::ode::{OdeError, Trajectory};
use crate::pdesys::{
    build_pde_symmetry_system, curvature_residual, integrate_along_path_unchecked, PDELieSystemDef, PdeError,
    TimePath,
};
use crate::vectorfield::VectorField;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_POLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const CSV_VERSION_LINE: &str = "# liesym-csv v1";
pub const DEFAULT_TOL: f64 = 1e-6;
pub const SEED_ENV: &str = "LIESYM_SEED";

#[derive(Parser, Debug)]
#[command(name = "liesym", version, about = "Lie symmetries of Lie systems through their symmetry systems")]
struct Cli {
    /// Seed for randomised sample grids (overrides LIESYM_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List catalog entries.
    List,
    /// Print basis, structure constants and known symmetries of an entry.
    Show {
        name: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Check closure of a basis and report its structure constants.
    CheckAlgebra(Source),
    /// Integrate the symmetry system and verify the result with the bracket oracle.
    Symmetrize {
        #[command(flatten)]
        source: Source,
        /// Gauge b0(t); overrides the definition.
        #[arg(long)]
        b0: Option<String>,
        #[arg(long, default_value = "0,1", value_name = "T0,T1")]
        t_span: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Initial values f0,...,fr.
        #[arg(long, value_name = "F0,...,FR")]
        f_init: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Verify the closed-form symmetry families bundled with an entry.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "0,1", value_name = "T0,T1")]
        t_span: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate the Lie system itself.
    Integrate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "X1,...,XN")]
        x0: String,
        #[arg(long, default_value = "0,1", value_name = "T0,T1")]
        t_span: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Curvature, path-independence and symmetry-system checks of a PDE Lie system.
    Pde {
        #[command(flatten)]
        source: Source,
        /// Path specification JSON; compared against the default diagonal path.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, value_name = "X1,...,XN")]
        x0: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        out: Outputs,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Catalog entry name.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    catalog: Option<String>,
    /// System definition JSON.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Catalog parameters.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct Outputs {
    /// CSV output; a gnuplot script is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

fn fail(code: i32, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        let code = match &e {
            CatalogError::UnknownName(_) | CatalogError::BadParams(_) => EXIT_USAGE,
            CatalogError::Parse(_) => EXIT_PARSE,
            CatalogError::Algebra(LieAlgError::NotClosed { .. }) => EXIT_CHECK_FAILED,
            _ => EXIT_CHECK_FAILED,
        };
        fail(code, e.to_string())
    }
}

impl From<LieSysError> for Failure {
    fn from(e: LieSysError) -> Self {
        let code = match &e {
            LieSysError::Ode(OdeError::PoleEncountered { .. }) => EXIT_POLE,
            LieSysError::Ode(_) | LieSysError::BadInput(_) => EXIT_USAGE,
            _ => EXIT_CHECK_FAILED,
        };
        fail(code, e.to_string())
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        let code = match &e {
            PdeError::Ode(OdeError::PoleEncountered { .. }) => EXIT_POLE,
            PdeError::Ode(_) | PdeError::BadInput(_) => EXIT_USAGE,
            _ => EXIT_CHECK_FAILED,
        };
        fail(code, e.to_string())
    }
}

impl From<LieAlgError> for Failure {
    fn from(e: LieAlgError) -> Self {
        fail(EXIT_CHECK_FAILED, e.to_string())
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        fail(EXIT_PARSE, e.to_string())
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    fail(EXIT_USAGE, format!("{}: {e}", path.display()))
}

/// ODE system definition file.
#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SystemJson {
    vars: Vec<String>,
    basis: Vec<Vec<String>>,
    #[serde(default)]
    coeffs: Vec<String>,
    #[serde(default)]
    gauge_b0: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, String>,
    #[serde(default)]
    time: Option<String>,
    #[serde(default)]
    excluded: Vec<String>,
    #[serde(default, rename = "box")]
    sample_box: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    times: Option<Vec<String>>,
    #[serde(default)]
    matrix: Option<Vec<Vec<String>>>,
    #[serde(default)]
    domain: Option<Vec<(f64, f64)>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct PathJson {
    waypoints: Vec<Vec<f64>>,
    steps: usize,
}

struct Loaded {
    label: String,
    system: System,
    sample_box: Vec<(f64, f64)>,
    entry: Option<CatalogEntry>,
}

fn parse_params(list: &[String]) -> Result<Params, Failure> {
    let mut p = Params::new();
    for kv in list {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| fail(EXIT_USAGE, format!("parameter `{kv}` is not KEY=VALUE")))?;
        p = p.set(k.trim(), v.trim());
    }
    Ok(p)
}

fn load(src: &Source) -> Result<Loaded, Failure> {
    if let Some(name) = &src.catalog {
        let entry = catalog::make(name, &parse_params(&src.params)?)?;
        return Ok(Loaded {
            label: name.clone(),
            system: entry.system.clone(),
            sample_box: entry.sample_box.clone(),
            entry: Some(entry),
        });
    }
    let path = src.input.as_ref().ok_or_else(|| fail(EXIT_USAGE, "--catalog or --input required"))?;
    if !src.params.is_empty() {
        return Err(fail(EXIT_USAGE, "--param applies to catalog entries; use \"params\" in the input file"));
    }
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    let def: SystemJson =
        serde_json::from_str(&text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let mut ctx = ParseContext {
        registry: catalog::default_registry(),
        ..ParseContext::new()
    };
    for (k, v) in &def.params {
        ctx = ctx.param(k, parse_rational(v)?);
    }
    let vars: Vec<&str> = def.vars.iter().map(String::as_str).collect();
    let fields = def
        .basis
        .iter()
        .map(|comps| {
            let es = comps.iter().map(|c| ctx.parse(c)).collect::<Result<Vec<_>, _>>()?;
            VectorField::from_names(&vars, es).map_err(|e| fail(EXIT_PARSE, e.to_string()))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let n = vars.len();
    let sample_box = def.sample_box.clone().unwrap_or_else(|| vec![(-1.0, 1.0); n]);
    if sample_box.len() != n {
        return Err(fail(EXIT_PARSE, "box must have one interval per variable"));
    }
    let basis = LieAlgebraBasis::new(fields)?;
    let label = path.display().to_string();
    if let Some(times) = &def.times {
        let matrix = def.matrix.as_ref().ok_or_else(|| fail(EXIT_PARSE, "PDE input needs \"matrix\""))?;
        let coeffs = matrix
            .iter()
            .map(|row| row.iter().map(|c| ctx.parse(c)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut sys = PDELieSystemDef::new(&basis, coeffs, times.iter().map(|t| Symbol::new(t)).collect())
            .map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
        if let Some(d) = &def.domain {
            sys = sys.with_domain(d.clone()).map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
        }
        return Ok(Loaded {
            label,
            system: System::Pde(sys),
            sample_box,
            entry: None,
        });
    }
    let time = Symbol::new(def.time.as_deref().unwrap_or("t"));
    let coeffs = def.coeffs.iter().map(|c| ctx.parse(c)).collect::<Result<Vec<_>, _>>()?;
    let gauge = match &def.gauge_b0 {
        Some(g) => ctx.parse(g)?,
        None => Expr::zero(),
    };
    let excluded = def.excluded.iter().map(|c| ctx.parse(c)).collect::<Result<Vec<_>, _>>()?;
    let sys = LieSystemDef::new(basis, coeffs, time)
        .map_err(|e| fail(EXIT_PARSE, e.to_string()))?
        .with_gauge(gauge)
        .with_excluded(excluded);
    Ok(Loaded {
        label,
        system: System::Ode(sys),
        sample_box,
        entry: None,
    })
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| fail(EXIT_USAGE, format!("{what}: `{v}` is not a number")))
        })
        .collect()
}

fn parse_span(s: &str) -> Result<(f64, f64), Failure> {
    let v = parse_list(s, "t-span")?;
    match v.as_slice() {
        [a, b] if b > a => Ok((*a, *b)),
        _ => Err(fail(EXIT_USAGE, format!("t-span `{s}` must be T0,T1 with T1 > T0"))),
    }
}

fn check_step(step: f64) -> Result<(), Failure> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(fail(EXIT_USAGE, format!("step must be positive, got {step}")))
    }
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(fail(EXIT_USAGE, format!("tolerance must be positive, got {tol}")))
    }
}

fn ode_of(l: &Loaded) -> Result<&LieSystemDef, Failure> {
    match &l.system {
        System::Ode(s) => Ok(s),
        System::Pde(_) => Err(fail(EXIT_USAGE, format!("{} is a PDE system; use `liesym pde`", l.label))),
    }
}

fn write_csv(path: &Path, header: &[String], tr: &Trajectory, extra: impl Fn(usize) -> Vec<f64>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    writeln!(buf, "{CSV_VERSION_LINE}").expect("vec write");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
        for (k, (t, x)) in tr.times.iter().zip(&tr.states).enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(extra(k).iter().map(f64::to_string));
            row.extend(x.iter().map(f64::to_string));
            row.push(tr.err_est[k].to_string());
            w.write_record(&row).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
        }
        w.flush().map_err(|e| io_fail(path, e))?;
    }
    fs::write(path, buf).map_err(|e| io_fail(path, e))?;
    let gp = path.with_extension("gp");
    let file = path.file_name().map(|f| f.to_string_lossy().to_string()).unwrap_or_default();
    let mut script = String::new();
    script.push_str("set datafile separator ','\nset key autotitle columnhead\nset xlabel '");
    script.push_str(&header[0]);
    script.push_str("'\nplot ");
    let cols: Vec<String> = (2..header.len())
        .map(|c| format!("'{file}' every ::1 using 1:{c} with lines"))
        .collect();
    script.push_str(&cols.join(", \\\n     "));
    script.push('\n');
    fs::write(&gp, script).map_err(|e| io_fail(&gp, e))
}

fn write_report(path: &Option<PathBuf>, v: &Value) -> Result<(), Failure> {
    if let Some(p) = path {
        let mut s = serde_json::to_string_pretty(v).expect("json");
        s.push('\n');
        fs::write(p, s).map_err(|e| io_fail(p, e))?;
    }
    Ok(())
}

fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

/// Run the CLI; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let seed = cli.seed.unwrap_or_else(seed_from_env);
    match dispatch(cli.cmd, seed, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn dispatch(cmd: Command, seed: u64, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::List => {
            for name in catalog::NAMES {
                let _ = writeln!(out, "{name:<16} {}", catalog::summary(name).unwrap_or(""));
            }
            Ok(EXIT_OK)
        }
        Command::Show { name, params } => cmd_show(&name, &parse_params(&params)?, out),
        Command::CheckAlgebra(src) => cmd_check_algebra(&load(&src)?, out),
        Command::Symmetrize {
            source,
            b0,
            t_span,
            step,
            f_init,
            tol,
            out: outputs,
        } => {
            check_step(step)?;
            check_tol(tol)?;
            let span = parse_span(&t_span)?;
            let loaded = load(&source)?;
            cmd_symmetrize(&loaded, b0.as_deref(), span, step, f_init.as_deref(), tol, &outputs, seed, out)
        }
        Command::Verify {
            source,
            t_span,
            tol,
            report,
        } => {
            check_tol(tol)?;
            let span = parse_span(&t_span)?;
            cmd_verify(&load(&source)?, span, tol, &report, seed, out)
        }
        Command::Integrate {
            source,
            x0,
            t_span,
            step,
            out: outputs,
        } => {
            check_step(step)?;
            let span = parse_span(&t_span)?;
            let x0 = parse_list(&x0, "x0")?;
            cmd_integrate(&load(&source)?, &x0, span, step, &outputs, out)
        }
        Command::Pde {
            source,
            path,
            x0,
            tol,
            out: outputs,
        } => {
            check_tol(tol)?;
            let loaded = load(&source)?;
            cmd_pde(&loaded, path.as_deref(), x0.as_deref(), tol, &outputs, out)
        }
    }
}

fn cmd_show(name: &str, params: &Params, out: &mut dyn Write) -> Result<i32, Failure> {
    let e = catalog::make(name, params)?;
    let _ = writeln!(out, "{} - {}", e.name, e.summary);
    let fields = e.basis_fields();
    let _ = writeln!(out, "variables: {}", fields[0].vars().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
    for (i, f) in fields.iter().enumerate() {
        let _ = writeln!(out, "X{} = {f}", i + 1);
    }
    let _ = writeln!(out, "structure constants: {}", e.tensor());
    match &e.system {
        System::Ode(s) => {
            let coeffs: Vec<String> = s.coeffs.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "coefficients: {}", coeffs.join(", "));
            let _ = writeln!(out, "gauge b0: {}", s.gauge);
        }
        System::Pde(s) => {
            for (a, row) in s.coeffs.iter().enumerate() {
                let r: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "b{}: {}", a + 1, r.join(", "));
            }
        }
    }
    if !e.excluded.is_empty() {
        let _ = writeln!(out, "excluded: {}", e.excluded.join("; "));
    }
    for fam in &e.families {
        let _ = writeln!(out, "family [{}] with b0 = {}", fam.label, fam.gauge);
        if let crate::liesys::CandidateForm::Closed(f) = &fam.candidate.form {
            for (i, fi) in f.iter().enumerate() {
                let _ = writeln!(out, "  f{i} = {fi}");
            }
        }
    }
    Ok(EXIT_OK)
}

fn algebra_summary(tensor: &StructureTensor) -> String {
    format!(
        "closed, r={}, jacobi={}, center={}",
        tensor.dim(),
        crate::expr::parse::format_rational(&tensor.jacobi_residual()),
        tensor.center().len()
    )
}

fn cmd_check_algebra(l: &Loaded, out: &mut dyn Write) -> Result<i32, Failure> {
    let fields = match &l.system {
        System::Ode(s) => s.basis.fields().to_vec(),
        System::Pde(s) => s.fields().to_vec(),
    };
    let (tensor, mode) = extract_structure_constants(&fields)?;
    let _ = writeln!(out, "{}", algebra_summary(&tensor));
    let _ = writeln!(out, "extraction: {mode:?}");
    let _ = writeln!(out, "tensor: {tensor}");
    if let Some(exp) = l.entry.as_ref().and_then(|e| e.expected.as_ref()) {
        let ok = exp == &tensor;
        let _ = writeln!(out, "expected tensor: {}", if ok { "match" } else { "MISMATCH" });
        if !ok {
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_symmetrize(
    l: &Loaded,
    b0: Option<&str>,
    span: (f64, f64),
    step: f64,
    f_init: Option<&str>,
    tol: f64,
    outputs: &Outputs,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut sys = ode_of(l)?.clone();
    if let Some(g) = b0 {
        let ctx = ParseContext {
            registry: catalog::default_registry(),
            ..ParseContext::new()
        }
        .restrict_symbols([sys.time.name()]);
        sys = sys.with_gauge(ctx.parse(g)?);
    }
    let r = sys.r();
    let f0 = match f_init {
        Some(s) => parse_list(s, "f-init")?,
        None => {
            let mut v = vec![0.0; r + 1];
            v[0] = 1.0;
            v
        }
    };
    if f0.len() != r + 1 {
        return Err(fail(EXIT_USAGE, format!("f-init needs {} values (f0..f{r}), got {}", r + 1, f0.len())));
    }
    let symsys = build_symmetry_system(&sys)?;
    let tr = crate::liesys::integrate(&symsys, &f0, span.0, span.1, step)?;
    let cand = SymmetryCandidate::from_trajectory(&symsys, &tr)?;
    // grid times are a subset of the trajectory grid
    let n_t = 20.min(tr.len());
    let idx: Vec<usize> = (0..n_t).map(|i| i * (tr.len() - 1) / (n_t - 1).max(1)).collect();
    let mut grid = SampleGrid::new(span, 0, &l.sample_box, 20, seed);
    grid.times = idx.iter().map(|&i| tr.times[i]).collect();
    let rep = symmetry_residual(&cand, &sys, &grid)?;
    let pass = rep.passes(tol);
    if let Some(p) = &outputs.out {
        let mut header = vec!["t".to_string()];
        header.extend((0..=r).map(|i| format!("f{i}")));
        header.push("err_est".into());
        write_csv(p, &header, &tr, |_| Vec::new())?;
    }
    let rhs: Vec<String> = symsys.field().components().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "system: {}", l.label);
    let _ = writeln!(out, "multiplier: h = -b0, b0 = {}", sys.gauge);
    for (i, c) in rhs.iter().enumerate() {
        let _ = writeln!(out, "df{i}/dt = {c}");
    }
    let _ = writeln!(out, "steps: {}, max error estimate: {:e}", tr.len() - 1, tr.max_err_est());
    let _ = writeln!(out, "final: {}", fmt_vec(tr.final_state()));
    let _ = writeln!(
        out,
        "symmetry residual: {:e} over {} points (tol {:e}) {}",
        rep.max_abs,
        grid.len(),
        tol,
        if pass { "PASS" } else { "FAIL" }
    );
    write_report(
        &outputs.report,
        &json!({
            "command": "symmetrize",
            "system": l.label,
            "seed": seed,
            "multiplier": "h = -b0",
            "gauge_b0": sys.gauge.to_string(),
            "symmetry_system": rhs,
            "t_span": [span.0, span.1],
            "step": tr.step,
            "f_init": f0,
            "final": tr.final_state(),
            "max_err_est": tr.max_err_est(),
            "residual": rep.max_abs,
            "grid_points": grid.len(),
            "tol": tol,
            "pass": pass,
        }),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn cmd_verify(
    l: &Loaded,
    span: (f64, f64),
    tol: f64,
    report: &Option<PathBuf>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let sys = ode_of(l)?;
    let entry = l
        .entry
        .as_ref()
        .ok_or_else(|| fail(EXIT_USAGE, "verify works on catalog entries"))?;
    let grid = SampleGrid::new(span, 20, &l.sample_box, 20, seed);
    let mut results = Vec::new();
    let mut all = true;
    for fam in &entry.families {
        let s = sys.clone().with_gauge(fam.gauge.clone());
        let rep = symmetry_residual(&fam.candidate, &s, &grid)?;
        let pass = rep.passes(tol);
        all &= pass;
        let _ = writeln!(
            out,
            "[{}] residual {} {}",
            fam.label,
            if rep.exact_zero { "0 (exact)".to_string() } else { format!("{:e}", rep.max_abs) },
            if pass { "PASS" } else { "FAIL" }
        );
        results.push(json!({"family": fam.label, "residual": rep.max_abs, "exact": rep.exact_zero, "pass": pass}));
    }
    if entry.families.is_empty() {
        let _ = writeln!(out, "no closed-form families bundled with {}", entry.name);
    }
    write_report(
        report,
        &json!({"command": "verify", "system": l.label, "seed": seed, "tol": tol, "families": results, "pass": all}),
    )?;
    Ok(if all { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_integrate(
    l: &Loaded,
    x0: &[f64],
    span: (f64, f64),
    step: f64,
    outputs: &Outputs,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let sys = ode_of(l)?;
    if x0.len() != sys.vars().len() {
        return Err(fail(EXIT_USAGE, format!("x0 needs {} values", sys.vars().len())));
    }
    let tr = crate::liesys::integrate(sys, x0, span.0, span.1, step)?;
    if let Some(p) = &outputs.out {
        let mut header = vec![sys.time.to_string()];
        header.extend(sys.vars().iter().map(|v| v.to_string()));
        header.push("err_est".into());
        write_csv(p, &header, &tr, |_| Vec::new())?;
    }
    let _ = writeln!(out, "steps: {}, max error estimate: {:e}", tr.len() - 1, tr.max_err_est());
    let _ = writeln!(out, "final: {}", fmt_vec(tr.final_state()));
    write_report(
        &outputs.report,
        &json!({"command": "integrate", "system": l.label, "x0": x0, "final": tr.final_state(), "max_err_est": tr.max_err_est()}),
    )?;
    Ok(EXIT_OK)
}

/// Default path set on the unit square of the first two times: L-path,
/// diagonal and the other L-path.
fn default_paths(s: usize, steps: usize) -> Vec<TimePath> {
    let p = |pts: Vec<Vec<f64>>| TimePath::new(pts, steps).expect("static path");
    let e = |v: [f64; 2]| {
        let mut w = vec![0.0; s];
        w[0] = v[0];
        w[1] = v[1];
        w
    };
    vec![
        p(vec![e([0.0, 0.0]), e([1.0, 0.0]), e([1.0, 1.0])]),
        p(vec![e([0.0, 0.0]), e([1.0, 1.0])]),
        p(vec![e([0.0, 0.0]), e([0.0, 1.0]), e([1.0, 1.0])]),
    ]
}

fn cmd_pde(
    l: &Loaded,
    path: Option<&Path>,
    x0: Option<&str>,
    tol: f64,
    outputs: &Outputs,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let sys = match &l.system {
        System::Pde(s) => s,
        System::Ode(_) => {
            return Err(fail(
                EXIT_USAGE,
                format!("{} has a single time; `pde` needs s >= 2 (use `integrate` or `symmetrize`)", l.label),
            ))
        }
    };
    if sys.s() < 2 {
        return Err(fail(EXIT_USAGE, "`pde` needs s >= 2 time variables; path independence is vacuous for s = 1"));
    }
    let x0 = match x0 {
        Some(s) => parse_list(s, "x0")?,
        None => vec![0.0; sys.vars().len()],
    };
    if x0.len() != sys.vars().len() {
        return Err(fail(EXIT_USAGE, format!("x0 needs {} values", sys.vars().len())));
    }
    let mut paths = default_paths(sys.s(), 200);
    if let Some(p) = path {
        let text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
        let spec: PathJson = serde_json::from_str(&text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display())))?;
        let user = TimePath::new(spec.waypoints, spec.steps).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
        if user.waypoints[0].len() != sys.s() {
            return Err(fail(EXIT_USAGE, "path dimension differs from the number of times"));
        }
        let start = user.waypoints[0].clone();
        let end = user.waypoints.last().expect("nonempty").clone();
        let diagonal = TimePath::new(vec![start, end], spec.steps).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
        paths = vec![user, diagonal];
    }
    let curv = curvature_residual(sys)?;
    let integrable = curv.passes(sys.tol);
    let trajs = paths
        .iter()
        .map(|p| integrate_along_path_unchecked(sys, &x0, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut disagreement: f64 = 0.0;
    for i in 0..trajs.len() {
        for j in i + 1..trajs.len() {
            for (a, b) in trajs[i].final_state().iter().zip(trajs[j].final_state()) {
                disagreement = disagreement.max((a - b).abs());
            }
        }
    }
    let paths_agree = disagreement <= tol;
    let sym_curv = if integrable {
        let symsys = build_pde_symmetry_system(sys)?;
        Some(curvature_residual(&symsys)?)
    } else {
        None
    };
    if let Some(p) = &outputs.out {
        let first = &paths[0];
        let mut header = vec!["sigma".to_string()];
        header.extend(sys.times.iter().map(|t| t.to_string()));
        header.extend(sys.vars().iter().map(|v| v.to_string()));
        header.push("err_est".into());
        let tr = &trajs[0];
        write_csv(p, &header, tr, |k| first.point(tr.times[k]))?;
    }
    let _ = writeln!(out, "system: {}", l.label);
    let _ = writeln!(
        out,
        "curvature residual: {} ({})",
        if curv.exact_zero { "0 (exact)".to_string() } else { format!("{:e}", curv.max_abs) },
        if integrable { "integrable" } else { "NOT integrable" }
    );
    for (p, tr) in paths.iter().zip(&trajs) {
        let wp: Vec<String> = p.waypoints.iter().map(|w| format!("({})", fmt_vec(w))).collect();
        let _ = writeln!(out, "path {}: endpoint {}", wp.join(" -> "), fmt_vec(tr.final_state()));
    }
    let _ = writeln!(
        out,
        "path disagreement: {:e} (tol {:e}) {}",
        disagreement,
        tol,
        if paths_agree { "agree" } else { "DISAGREE" }
    );
    if let Some(c) = &sym_curv {
        let _ = writeln!(
            out,
            "symmetry system curvature: {}",
            if c.exact_zero { "0 (exact)".to_string() } else { format!("{:e}", c.max_abs) }
        );
    }
    let ok = integrable && paths_agree && sym_curv.as_ref().is_some_and(|c| c.passes(sys.tol));
    write_report(
        &outputs.report,
        &json!({
            "command": "pde",
            "system": l.label,
            "curvature": curv.max_abs,
            "curvature_exact_zero": curv.exact_zero,
            "integrable": integrable,
            "paths": paths.iter().map(|p| json!({"waypoints": p.waypoints, "steps": p.steps})).collect::<Vec<_>>(),
            "endpoints": trajs.iter().map(|t| t.final_state().to_vec()).collect::<Vec<_>>(),
            "path_disagreement": disagreement,
            "tol": tol,
            "symmetry_system_curvature": sym_curv.as_ref().map(|c| c.max_abs),
            "pass": ok,
        }),
    )?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}
