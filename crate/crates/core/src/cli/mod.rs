//! The `darboux` command-line interface.
//!
//! Exit status: 0 success, 1 I/O failure, 2 malformed spec or usage,
//! 3 integration diverged, 4 a verification expectation did not hold.

pub mod spec;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    check_quantity, classify_symmetry, conserved_from_symmetry, hamiltonian_quantity, noether_quantity,
    POINTWISE_TOL,
};
use crate::calculus::VectorFieldSpec;
use crate::contact::{sample_states, State, SystemSpec, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::integrate::{integrate_adaptive, integrate_fixed, read_csv, write_csv, Trajectory};
use crate::models::{builtin, model_info, CATALOG};

use spec::{load_spec, reference_initial, LoadedSpec};
use verify::{classification_name, symmetry_verdict, SampleSource, VerifyOptions, MIN_DIVISOR};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "darboux", version, about = "Contact Hamiltonian systems in Darboux coordinates")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a system and write its trajectory as CSV
    Simulate(SimulateArgs),
    /// Check every symmetry, quantity and map declared in a spec
    Verify(VerifyArgs),
    /// Classify one vector field and derive its quantities
    Analyze(AnalyzeArgs),
    /// List the built-in models
    ListModels,
    /// Write a built-in model as a spec document
    ExportModel(ExportArgs),
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// Spec document (TOML)
    #[arg(required_unless_present = "model")]
    spec: Option<PathBuf>,
    /// Use a built-in model instead of a spec document
    #[arg(long, conflicts_with = "spec")]
    model: Option<String>,
    /// Override a parameter, NAME=VALUE
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Rk4,
    Dopri5,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    tf: f64,
    /// Fixed step for rk4 [default: 0.001]
    #[arg(long)]
    dt: Option<f64>,
    /// Error tolerance for dopri5 [default: 1e-8]
    #[arg(long)]
    tol: Option<f64>,
    /// Defaults to dopri5 when --tol is given, rk4 otherwise
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Initial positions, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    q: Option<Vec<f64>>,
    /// Initial momenta, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    p: Option<Vec<f64>>,
    /// Initial action
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    /// CSV output path; standard output when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Spec document (TOML)
    spec: PathBuf,
    /// Override a parameter, NAME=VALUE
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Evaluate quantity checks on the samples of this trajectory CSV
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    tf: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = POINTWISE_TOL)]
    tol: f64,
    /// Number of random states for symmetry and map checks
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Report path; standard output when omitted
    #[arg(long, short)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// A declared symmetry, or one of d/d<coordinate>, R, X_H, 0
    #[arg(long)]
    field: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = POINTWISE_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Model name (see list-models)
    model: String,
    /// Override a parameter, NAME=VALUE
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Output path; standard output when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v: f64 = value.trim().parse().map_err(|e| format!("`{value}`: {e}"))?;
    if !v.is_finite() {
        return Err(format!("`{value}` is not finite"));
    }
    Ok((name.trim().to_string(), v))
}

enum Failure {
    Error(Error),
    Usage(String),
    Mismatch(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::ListModels => list_models(),
        Command::ExportModel(a) => export(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Mismatch(n)) => {
            eprintln!("error: {n} expectation(s) did not hold");
            EXIT_MISMATCH
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Divergence { .. } | Error::StepUnderflow { .. } => EXIT_DIVERGENCE,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_USAGE,
            }
        }
    }
}

struct Loaded {
    spec: Option<LoadedSpec>,
    system: SystemSpec,
    model_initial: Option<State>,
}

fn load_system(args: &SystemArgs) -> Result<Loaded> {
    if let Some(name) = &args.model {
        let refs: Vec<(&str, f64)> = args.params.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        let system = builtin(name, &refs)?;
        let n = system.dim();
        return Ok(Loaded {
            spec: None,
            system,
            model_initial: Some(reference_initial(n)),
        });
    }
    let path = args.spec.as_ref().expect("clap requires spec or model");
    let spec = load_spec(path, &args.params)?;
    Ok(Loaded {
        system: spec.system.clone(),
        model_initial: None,
        spec: Some(spec),
    })
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn format_state(sys: &SystemSpec, state: &State) -> String {
    sys.chart()
        .chart_names()
        .zip(state.to_vec())
        .map(|(n, v)| format!("{n} = {v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn simulate(a: SimulateArgs) -> Outcome {
    if !(a.t0.is_finite() && a.tf.is_finite()) || a.tf <= a.t0 {
        return Err(Failure::Usage(format!("need t0 < tf, got t0 = {} and tf = {}", a.t0, a.tf)));
    }
    let method = a.method.unwrap_or(if a.tol.is_some() { Method::Dopri5 } else { Method::Rk4 });
    match method {
        Method::Rk4 if a.tol.is_some() => return Err(Failure::Usage("--tol applies to dopri5 only".into())),
        Method::Dopri5 if a.dt.is_some() => return Err(Failure::Usage("--dt applies to rk4 only".into())),
        _ => {}
    }
    let loaded = load_system(&a.system)?;
    let sys = &loaded.system;
    let n = sys.dim();
    let base = loaded
        .spec
        .as_ref()
        .and_then(|s| s.initial.clone())
        .or(loaded.model_initial.clone());
    let given = a.q.is_some() || a.p.is_some() || a.s.is_some();
    let base = match base {
        Some(b) => b,
        None if given => State::zeros(n),
        None => {
            return Err(Failure::Usage(
                "no initial state: add an [initial] table to the spec or pass --q, --p, --s".into(),
            ))
        }
    };
    let s0 = State::new(
        a.q.unwrap_or(base.q),
        a.p.unwrap_or(base.p),
        a.s.unwrap_or(base.s),
    )?;
    sys.check_dim(s0.dim())?;
    if s0.p.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: s0.p.len(),
        }
        .into());
    }

    let traj = match method {
        Method::Rk4 => {
            let dt = a.dt.unwrap_or(1e-3);
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Failure::Usage(format!("--dt must be positive, got {dt}")));
            }
            integrate_fixed(sys, &s0, a.t0, a.tf, dt)?
        }
        Method::Dopri5 => {
            let tol = a.tol.unwrap_or(1e-8);
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
            }
            integrate_adaptive(sys, &s0, a.t0, a.tf, tol)?
        }
    };

    let summary = summarize(sys, &traj)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(sys, &traj, &mut w)?;
            w.flush()?;
            print!("{summary}");
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_csv(sys, &traj, &mut w)?;
            w.flush()?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn summarize(sys: &SystemSpec, traj: &Trajectory) -> Result<String> {
    let (tf, last) = traj.last().expect("trajectory has at least one sample");
    let t0 = traj.times[0];
    let h0 = sys.energy(&traj.states[0])?;
    let h1 = sys.energy(last)?;
    let decay = if h0 != 0.0 {
        format!("{:?}", h1 / h0)
    } else {
        "undefined (H(t0) = 0)".into()
    };
    Ok(format!(
        "method {}: {} steps ({} rejected), t = {t0:?} .. {tf:?}\nfinal state: {}\nH(t0) = {h0:?}, H(tf) = {h1:?}, decay factor {decay}\n",
        traj.method,
        traj.accepted_steps,
        traj.rejected_steps,
        format_state(sys, last),
    ))
}

fn verify_cmd(a: VerifyArgs) -> Outcome {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    if a.samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    let spec = load_spec(&a.spec, &a.params)?;
    if spec.candidate_count() == 0 {
        return Err(Failure::Usage(format!(
            "{} declares no symmetries, quantities or maps",
            a.spec.display()
        )));
    }
    let sys = &spec.system;
    let (states, source) = if let Some(path) = &a.trajectory {
        let file = File::open(path).map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        let traj = read_csv(sys, BufReader::new(file))?;
        let count = traj.len();
        (
            traj.states,
            SampleSource {
                source: "trajectory",
                count,
                t0: None,
                tf: None,
                dt: None,
            },
        )
    } else if let Some(s0) = &spec.initial {
        if a.tf.is_nan() || a.tf <= a.t0 || a.dt.is_nan() || a.dt <= 0.0 {
            return Err(Failure::Usage(format!(
                "need t0 < tf and dt > 0, got t0 = {}, tf = {}, dt = {}",
                a.t0, a.tf, a.dt
            )));
        }
        let traj = integrate_fixed(sys, s0, a.t0, a.tf, a.dt)?;
        let count = traj.len();
        (
            traj.states,
            SampleSource {
                source: "simulation",
                count,
                t0: Some(a.t0),
                tf: Some(a.tf),
                dt: Some(a.dt),
            },
        )
    } else {
        (
            sample_states(sys.dim(), a.samples, a.seed),
            SampleSource {
                source: "random",
                count: a.samples,
                t0: None,
                tf: None,
                dt: None,
            },
        )
    };

    let report = verify::verify(
        &spec,
        &states,
        source,
        VerifyOptions {
            seed: a.seed,
            samples: a.samples,
            tolerance: a.tol,
        },
    );
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::Spec(e.to_string()))?;
    json.push('\n');
    let summary = verify_summary(&report);
    match &a.report {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(json.as_bytes())?;
            w.flush()?;
            print!("{summary}");
        }
        None => {
            io::stdout().write_all(json.as_bytes())?;
            eprint!("{summary}");
        }
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Mismatch(report.mismatches.len()))
    }
}

fn mark(matches: Option<bool>) -> &'static str {
    match matches {
        Some(true) => "ok  ",
        Some(false) => "FAIL",
        None => "    ",
    }
}

fn verify_summary(r: &verify::VerifyReport) -> String {
    let mut out = String::new();
    let mut line = |m: Option<bool>, text: String| {
        out.push_str(mark(m));
        out.push(' ');
        out.push_str(&text);
        out.push('\n');
    };
    let quantity = |e: &verify::QuantityEntry| {
        format!(
            "{}: {} (max residual conserved {:?}, dissipated {:?})",
            e.name,
            classification_name(e.report.classification),
            e.report.conserved.max_residual,
            e.report.dissipated.max_residual
        )
    };
    for s in &r.symmetries {
        line(s.matches, format!("symmetry {}: {}", s.name, s.verdict));
        for q in s.noether_quantity.iter().chain(&s.conserved_quotient) {
            line(q.matches, format!("  {}", quantity(q)));
        }
    }
    for q in &r.quantities {
        line(q.matches, format!("quantity {}", quantity(q)));
    }
    for q in &r.quotients {
        line(q.matches, format!("quotient {}", quantity(q)));
    }
    for m in &r.maps {
        line(m.matches, format!("map {}: {} (max residual {:?})", m.name, m.verdict, m.report.max_residual));
    }
    for q in &r.pullbacks {
        line(q.matches, format!("pullback {}", quantity(q)));
    }
    out.push_str(if r.passed {
        "all expectations hold\n"
    } else {
        "some expectations did not hold\n"
    });
    out
}

fn builtin_field(sys: &SystemSpec, name: &str) -> Option<VectorFieldSpec> {
    let chart = sys.chart();
    match name {
        "R" => Some(VectorFieldSpec::reeb(chart)),
        "X_H" => Some(VectorFieldSpec::hamiltonian(sys)),
        "0" => Some(VectorFieldSpec::zero(chart)),
        _ => {
            let coord = name.strip_prefix("d/d")?;
            let slot = chart.slot(coord).filter(|&k| chart.is_chart_slot(k))?;
            Some(VectorFieldSpec::coordinate(chart, slot))
        }
    }
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    if a.samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    let loaded = load_system(&a.system)?;
    let sys = &loaded.system;
    let declared = loaded
        .spec
        .as_ref()
        .and_then(|s| s.symmetries.iter().find(|c| c.value.name == a.field))
        .map(|c| c.value.clone());
    let y = match declared.or_else(|| builtin_field(sys, &a.field)) {
        Some(y) => y,
        None => {
            let mut names: Vec<String> = loaded
                .spec
                .iter()
                .flat_map(|s| s.symmetries.iter().map(|c| c.value.name.clone()))
                .collect();
            names.extend(sys.chart().chart_names().map(|n| format!("d/d{n}")));
            names.extend(["R", "X_H", "0"].map(String::from));
            let mut seen = std::collections::HashSet::new();
            names.retain(|n| seen.insert(n.clone()));
            return Err(Failure::Usage(format!(
                "unknown field `{}`; available: {}",
                a.field,
                names.join(", ")
            )));
        }
    };

    let samples = sample_states(sys.dim(), a.samples, a.seed);
    let report = classify_symmetry(sys, &y, &samples, a.tol);
    let mut out = String::new();
    out.push_str(&format!(
        "field {} ({} samples, seed {}, tol {:?})\n",
        y.name, a.samples, a.seed, a.tol
    ));
    let verdict = match symmetry_verdict(&report) {
        spec::SymmetryClass::Contact => "contact symmetry".to_string(),
        other => {
            let mut why = Vec::new();
            if report.max_lie_eta > a.tol {
                why.push(format!("L_Yeta = {:?}", report.max_lie_eta));
            }
            if report.max_lie_hamiltonian > a.tol {
                why.push(format!("L_YH = {:?}", report.max_lie_hamiltonian));
            }
            if report.contact.failed_samples() > 0 {
                why.push(format!("{} samples failed", report.contact.failed_samples()));
            }
            let not_contact = format!("not a contact symmetry ({})", why.join(", "));
            if other == spec::SymmetryClass::Dynamical {
                format!("dynamical symmetry; {not_contact}")
            } else {
                format!(
                    "{not_contact}; not a dynamical symmetry ([Y, X_H] = {:?})",
                    report.dynamical.max_residual
                )
            }
        }
    };
    out.push_str(&format!("classification: {verdict}\n"));
    out.push_str(&format!(
        "  contact check: max |L_Y eta| = {:?}, max |L_Y H| = {:?}\n  dynamical check: max |[Y, X_H]| = {:?}\n",
        report.max_lie_eta, report.max_lie_hamiltonian, report.dynamical.max_residual
    ));

    let f = noether_quantity(&y);
    let fq = check_quantity(sys, &f, &samples, a.tol);
    out.push_str(&format!(
        "Noether quantity {}: {}\n",
        f.expression,
        classification_name(fq.classification)
    ));

    let h = hamiltonian_quantity(sys);
    let h_min = samples
        .iter()
        .map(|s| sys.bindings(s).and_then(|b| h.evaluate(&b)).map(f64::abs))
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)));
    match h_min {
        Ok(m) if m >= MIN_DIVISOR => {
            let c = conserved_from_symmetry(sys, &y);
            let cq = check_quantity(sys, &c, &samples, a.tol);
            out.push_str(&format!(
                "conserved quotient {}: {}\n",
                c.name,
                classification_name(cq.classification)
            ));
        }
        _ => out.push_str("conserved quotient: skipped, H vanishes near a sample\n"),
    }
    print!("{out}");
    Ok(())
}

fn list_models() -> Outcome {
    let mut out = String::new();
    for m in CATALOG {
        let params: Vec<String> = m.parameters.iter().map(|(n, v)| format!("{n}={v:?}")).collect();
        out.push_str(&format!(
            "{}  n={}  {}  H = {}  ({})\n",
            m.name,
            m.coordinates.len(),
            params.join(" "),
            m.hamiltonian,
            m.description
        ));
    }
    print!("{out}");
    Ok(())
}

fn export(a: ExportArgs) -> Outcome {
    model_info(&a.model)?;
    let text = spec::export_model(&a.model, &a.params)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
