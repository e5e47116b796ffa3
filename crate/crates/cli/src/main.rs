use clap::{Args, Parser, Subcommand};
use flexidx::flexindex::{flexibility_index, psi, verify_solution, CandidateOutcome, IndexResult};
use flexidx::model::{parse_model, SetKind, SystemModel, UncertaintySet};
use flexidx::montecarlo::{estimate_alpha, estimate_sf};
use flexidx::FlexError;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

mod boundary;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Flexibility analysis of affine constraint systems under uncertainty.
#[derive(Parser)]
#[command(name = "flexidx", version, about)]
struct Cli {
    /// Log progress to standard error (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Also write the JSON report to this path
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the feasibility function at one parameter point
    Psi {
        model: PathBuf,
        /// Comma separated parameter values
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        theta: Vec<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Flexibility index for one uncertainty set
    Index {
        model: PathBuf,
        /// ellipsoid, box, l1, l2 or linf
        #[arg(long, default_value = "ellipsoid")]
        set: SetKind,
        #[command(flatten)]
        out: Output,
    },
    /// Monte Carlo estimate of the stochastic flexibility
    Sf {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Check an ellipsoidal index against sampling
    Verify {
        model: PathBuf,
        #[arg(long, default_value = "ellipsoid")]
        set: SetKind,
        /// Points sampled inside the optimal ellipsoid
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        /// Monte Carlo samples for the probability estimates
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Write 2-D plot data: feasible region, optimal ellipse and hyperbox
    Boundary {
        model: PathBuf,
        /// Points on the ellipse
        #[arg(long, default_value_t = 360, value_parser = clap::value_parser!(u64).range(3..))]
        resolution: u64,
        /// CSV destination (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Input(String),
}

impl From<FlexError> for Failure {
    fn from(e: FlexError) -> Self {
        Failure::Input(e.to_string())
    }
}

#[derive(Serialize)]
struct Report {
    command: Vec<String>,
    model: String,
    tool_version: &'static str,
    results: Value,
    diagnostics: Value,
}

impl Report {
    fn new(model: &SystemModel, results: Value, diagnostics: Value) -> Self {
        Self {
            command: std::env::args().skip(1).collect(),
            model: model.name.clone(),
            tool_version: env!("CARGO_PKG_VERSION"),
            results,
            diagnostics,
        }
    }

    fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn write(&self, out: &Output) -> Result<(), Failure> {
        if let Some(path) = &out.json {
            std::fs::write(path, self.to_pretty() + "\n")
                .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn load(path: &Path) -> Result<SystemModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn index_json(model: &SystemModel, r: &IndexResult) -> Value {
    json!({
        "set": r.set,
        "delta_star": r.delta_star,
        "delta_units": r.delta_units,
        "theta_star": r.theta_star,
        "z_star": r.z_star,
        "active_set": r.active_set.as_ref().map(|a| json!({
            "indices": a.indices,
            "names": a.names(model),
            "lambda": a.lambda,
            "gradient_rank": a.gradient_rank,
        })),
        "alpha_star": r.alpha_star,
        "interior": r.interior,
        "psi_nominal": r.psi_nominal,
    })
}

fn not_interior(r: &IndexResult) -> Failure {
    Failure::Input(format!(
        "nominal point is not strictly feasible (psi = {:.6e}); the index is 0",
        r.psi_nominal
    ))
}

fn cmd_psi(path: &Path, theta: &[f64], out: &Output) -> Result<u8, Failure> {
    let model = load(path)?;
    if theta.len() != model.n_theta {
        return Err(Failure::Usage(format!(
            "--theta has {} values, the model has {} parameters",
            theta.len(),
            model.n_theta
        )));
    }
    let p = psi(&model, theta)?;
    let names: Vec<&str> = p
        .active_constraints
        .iter()
        .map(|&j| model.constraints[j].name.as_str())
        .collect();
    let report = Report::new(
        &model,
        json!({
            "theta": theta,
            "u": p.u,
            "z_star": p.z_star,
            "active_constraints": p.active_constraints,
            "active_names": names,
            "feasible": p.u <= 0.0,
        }),
        json!({}),
    );
    println!("{}", report.to_pretty());
    report.write(out)?;
    Ok(if p.u <= 0.0 { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn cmd_index(path: &Path, kind: SetKind, out: &Output) -> Result<u8, Failure> {
    let model = load(path)?;
    let set = UncertaintySet::from_kind(kind, &model)?;
    let start = Instant::now();
    let r = flexibility_index(&model, &set)?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = Report::new(
        &model,
        index_json(&model, &r),
        json!({
            "candidates": r.candidates,
            "ties": r.ties(),
            "elapsed_seconds": elapsed,
        }),
    );
    report.write(out)?;
    if !r.interior {
        return Err(not_interior(&r));
    }
    let optimal = r
        .candidates
        .iter()
        .filter(|c| matches!(c.outcome, CandidateOutcome::Optimal { .. }))
        .count();
    println!("model:      {}", model.name);
    println!("set:        {kind}");
    println!("delta*:     {:.10} ({})", r.delta_star, r.delta_units);
    if let Some(a) = r.alpha_star {
        println!("alpha*:     {a:.6}");
    }
    println!("theta*:     {}", fmt_vec(&r.theta_star));
    if model.n_z > 0 {
        println!("z*:         {}", fmt_vec(&r.z_star));
    }
    if let Some(a) = &r.active_set {
        println!("active set: {}", a.names(&model).join(", "));
    }
    println!(
        "candidates: {} evaluated, {} optimal, {} skipped",
        r.candidates.len(),
        optimal,
        r.candidates.len() - optimal
    );
    Ok(EXIT_OK)
}

fn cmd_sf(path: &Path, samples: u64, seed: u64, out: &Output) -> Result<u8, Failure> {
    let model = load(path)?;
    let e = estimate_sf(&model, samples as usize, seed)?;
    println!("model:    {}", model.name);
    println!(
        "SF:       {:.6} ± {:.6} (n = {}, seed = {})",
        e.estimate, e.stderr, e.n_samples, e.seed
    );
    println!("95% CI:   [{:.6}, {:.6}]", e.ci95.0, e.ci95.1);
    println!("elapsed:  {:.3} s", e.elapsed);
    let report = Report::new(
        &model,
        serde_json::to_value(&e).expect("estimate serializes"),
        json!({ "elapsed_seconds": e.elapsed }),
    );
    report.write(out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(
    path: &Path,
    kind: SetKind,
    probes: usize,
    samples: u64,
    seed: u64,
    out: &Output,
) -> Result<u8, Failure> {
    if kind != SetKind::Ellipsoid {
        return Err(Failure::Usage(
            "verify supports only --set ellipsoid".into(),
        ));
    }
    let model = load(path)?;
    let r = flexibility_index(&model, &UncertaintySet::Ellipsoid)?;
    if !r.interior {
        return Err(not_interior(&r));
    }
    let alpha = r.alpha_star.unwrap_or(0.0);
    let rep = verify_solution(&model, &r, probes, seed)?;
    let n = samples as usize;
    let a_mc = estimate_alpha(&model, r.delta_star, n, seed)?;
    let sf = estimate_sf(&model, n, seed.wrapping_add(1))?;
    let combined = (a_mc.stderr.powi(2) + sf.stderr.powi(2)).sqrt();

    let mut rows: Vec<(String, bool, String)> = rep
        .checks
        .iter()
        .map(|c| {
            (
                c.name.clone(),
                c.passed,
                format!("{:.3e} (tol {:.0e})", c.worst, c.tolerance),
            )
        })
        .collect();
    let agree = (a_mc.estimate - alpha).abs() <= 4.0 * a_mc.stderr.max(1.0 / n as f64);
    rows.push((
        "alpha_mc_agreement".into(),
        agree,
        format!("|{:.4} - {:.4}|", a_mc.estimate, alpha),
    ));
    let bound_mc = a_mc.estimate <= sf.estimate + 3.0 * combined;
    rows.push((
        "alpha_mc_below_sf".into(),
        bound_mc,
        format!(
            "{:.4} <= {:.4} + 3*{:.4}",
            a_mc.estimate, sf.estimate, combined
        ),
    ));
    let bound = alpha <= sf.estimate + 3.0 * sf.stderr;
    rows.push((
        "alpha_below_sf".into(),
        bound,
        format!("{:.4} <= {:.4} + 3*{:.4}", alpha, sf.estimate, sf.stderr),
    ));
    let passed = rows.iter().all(|r| r.1);

    println!("model:   {}", model.name);
    println!("delta*:  {:.10}   alpha*: {alpha:.6}", r.delta_star);
    println!("alpha^:  {:.6} ± {:.6}", a_mc.estimate, a_mc.stderr);
    println!("SF^:     {:.6} ± {:.6}", sf.estimate, sf.stderr);
    println!();
    for (name, ok, detail) in &rows {
        println!(
            "{:<20} {:<4} {detail}",
            name,
            if *ok { "pass" } else { "FAIL" }
        );
    }
    let checks: Vec<Value> = rows
        .iter()
        .map(|(name, ok, detail)| json!({ "name": name, "passed": ok, "detail": detail }))
        .collect();
    let mut results = index_json(&model, &r);
    results["alpha_mc"] = serde_json::to_value(&a_mc).expect("estimate serializes");
    results["sf_mc"] = serde_json::to_value(&sf).expect("estimate serializes");
    results["checks"] = Value::Array(checks);
    results["passed"] = Value::Bool(passed);
    let report = Report::new(&model, results, json!({ "probe_report": rep }));
    report.write(out)?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_boundary(path: &Path, resolution: u64, out: Option<&Path>) -> Result<u8, Failure> {
    let model = load(path)?;
    if model.n_theta != 2 {
        return Err(Failure::Input(format!(
            "boundary data needs two parameters, the model has {}",
            model.n_theta
        )));
    }
    let r = flexibility_index(&model, &UncertaintySet::Ellipsoid)?;
    if !r.interior {
        return Err(not_interior(&r));
    }
    let hb = match &model.hyperbox {
        Some(h) => {
            let set = UncertaintySet::Hyperbox(h.clone());
            Some((flexibility_index(&model, &set)?.delta_star, h.clone()))
        }
        None => None,
    };
    let csv = boundary::render(&model, r.delta_star, hb.as_ref(), resolution as usize)?;
    match out {
        Some(p) => std::fs::write(p, csv)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Psi { model, theta, out } => cmd_psi(&model, &theta, &out),
        Command::Index { model, set, out } => cmd_index(&model, set, &out),
        Command::Sf {
            model,
            samples,
            seed,
            out,
        } => cmd_sf(&model, samples, seed, &out),
        Command::Verify {
            model,
            set,
            probes,
            samples,
            seed,
            out,
        } => cmd_verify(&model, set, probes, samples, seed, &out),
        Command::Boundary {
            model,
            resolution,
            out,
        } => cmd_boundary(&model, resolution, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
