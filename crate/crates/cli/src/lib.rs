//! Command-line front end: instance files, sampling, verification suites, augmentation
//! inspection, Las Vegas simulation and round statistics.

pub mod report;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use locallll::augmentation::{augment, ell0, Constants};
use locallll::format::{parse_graph, parse_instance, InstanceFile};
use locallll::pipeline::{builtin, lv_instance, lv_outputs, lv_rejection, simulate_las_vegas, BUILTINS};
use locallll::rational;
use locallll::sampler::IntervalMode;
use locallll::verify::{collect_runs, exact_distribution, pushforward, report_from_samples};
use locallll::{Assignment, Error, ExactOracle, Rational, Region};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use report::{distribution, exact_table, f12, histogram, q, write_or_print};
use suites::{mode_name, pipeline_config, pipeline_runs, rounds_json, tv_tolerance, SuiteOutcome, P_MIN, SUITES};

#[derive(Parser, Debug)]
#[command(name = "locallll", version, about = "Perfect sampling from LLL distributions in a simulated LOCAL network")]
pub struct Cli {
    /// Worker threads for repeated runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Estimate,
    OracleCheck,
}

impl From<Mode> for IntervalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Estimate => IntervalMode::Estimate,
            Mode::OracleCheck => IntervalMode::OracleCheck,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Pipeline,
    Augment,
    Estimate,
    Substitute,
    Gibbs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw samples with the full pipeline.
    Sample {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Samples file, one line per run.
        #[arg(long)]
        out: PathBuf,
        /// Report path; defaults to OUT.report.json.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Estimate)]
        mode: Mode,
    },
    /// Print the exact distribution, one line per satisfying assignment.
    Exact {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run verification suites.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build and describe an augmenting event.
    Augment {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated event names.
        #[arg(long)]
        region: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        ell: u64,
        #[arg(long, default_value = "1/8")]
        eps0: String,
    },
    /// Perfect simulation of a built-in Las Vegas algorithm.
    SimulateLv {
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Outputs file, one line per run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Round, radius and potential statistics over seeds.
    Bench {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Estimate)]
        mode: Mode,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Exit status 1 is an assertion failure, 2 a usage or input error.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Assertion(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Assertion(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Argument(_) | Error::Model(_) => Failure::Usage(e.to_string()),
            _ => Failure::Assertion(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(path: &Path) -> std::result::Result<InstanceFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn rat(s: &str) -> std::result::Result<Rational, Failure> {
    rational::parse(s).map_err(Failure::from)
}

fn line(values: &[u32]) -> String {
    let v: Vec<String> = values.iter().map(u32::to_string).collect();
    v.join(" ")
}

fn write_lines(path: &Path, rows: &[Vec<u32>]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    std::fs::write(path, out)
}

fn header(command: &str) -> Value {
    json!({"command": command, "version": env!("CARGO_PKG_VERSION")})
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

fn sample(file: &InstanceFile, seed: u64, runs: u64, out: &Path, report: Option<&Path>, mode: Mode, threads: usize) -> Outcome {
    let inst = &file.instance;
    let cfg = pipeline_config(mode.into(), file.gamma.clone());
    let (seeds, sums) = pipeline_runs(inst, &cfg, runs, seed, threads)?;
    let values: Vec<Vec<u32>> = sums.iter().map(|s| s.values.clone()).collect();
    write_lines(out, &values)?;
    let dist = match exact_distribution(&cfg.sampler.oracle(), inst) {
        Ok(exact) if runs > 0 => distribution(&report_from_samples(exact, &values, seed, vec![])),
        Ok(exact) => json!({"runs": 0, "exact": exact_table(&exact), "counts": []}),
        Err(Error::Budget { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let violations: usize = sums.iter().map(|s| s.violations).sum();
    let potentials: Vec<u64> = sums.iter().map(|s| s.potential).collect();
    let doc = merge(
        header("sample"),
        json!({
            "seed": seed,
            "runs": runs,
            "mode": mode_name(mode.into()),
            "variables": inst.var_ids().map(|x| inst.var(x).unwrap().name.clone()).collect::<Vec<_>>(),
            "seeds": seeds,
            "distribution": dist,
            "violations": violations,
            "potential_histogram": histogram(&potentials),
            "rounds": rounds_json(&sums),
        }),
    );
    let default = PathBuf::from(format!("{}.report.json", out.display()));
    write_or_print(&doc, Some(report.unwrap_or(&default)))?;
    if violations > 0 {
        return Err(Failure::Assertion(format!("{violations} containment violations")));
    }
    Ok(())
}

fn exact(file: &InstanceFile) -> Outcome {
    let t = exact_distribution(&ExactOracle::default(), &file.instance)?;
    let mut out = std::io::stdout().lock();
    for (o, p) in t.outcomes.iter().zip(&t.probs) {
        writeln!(out, "{} {}", line(o), rational::format(p))?;
    }
    Ok(())
}

fn verify(file: &InstanceFile, runs: u64, seed: u64, suite: Suite, report: Option<&Path>, threads: usize) -> Outcome {
    let names: Vec<&str> = match suite {
        Suite::All => SUITES.to_vec(),
        Suite::Pipeline => vec!["pipeline"],
        Suite::Augment => vec!["augment"],
        Suite::Estimate => vec!["estimate"],
        Suite::Substitute => vec!["substitute"],
        Suite::Gibbs => vec!["gibbs"],
    };
    let mut outcomes: Vec<SuiteOutcome> = Vec::new();
    for n in names {
        outcomes.extend(suites::run_suite(n, &file.instance, file.gamma.clone(), runs, seed, threads)?);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    for o in &outcomes {
        eprintln!("{}: {}", o.name, if o.passed { "pass" } else { "FAIL" });
    }
    let doc = merge(
        header("verify"),
        json!({"runs": runs, "seed": seed, "passed": passed, "suites": outcomes.iter().map(SuiteOutcome::to_json).collect::<Vec<_>>()}),
    );
    write_or_print(&doc, report)?;
    if !passed {
        return Err(Failure::Assertion("verification failed".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn augment_cmd(file: &InstanceFile, region: &str, eps: &str, gamma: &str, delta: &str, ell: u64, eps0: &str) -> Outcome {
    let inst = &file.instance;
    let mut r = Region::new();
    for name in region.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        r.insert(inst.find_event(name).ok_or_else(|| Failure::Usage(format!("unknown event `{name}`")))?);
    }
    if r.is_empty() {
        return Err(Failure::Usage("empty region".into()));
    }
    let (eps, gamma, delta, eps0) = (rat(eps)?, rat(gamma)?, rat(delta)?, rat(eps0)?);
    let o = ExactOracle::default();
    let a = augment(&o, inst, &r, &eps, &gamma, &delta, ell, &eps0)?;
    let name = |x: &u32| inst.var(*x).unwrap().name.clone();
    let ev = a.to_event(inst, "λ")?;
    let doc = merge(
        header("augment"),
        json!({
            "region": r.iter().map(|e| inst.event(*e).unwrap().name().to_string()).collect::<Vec<_>>(),
            "eps": q(&eps), "gamma": q(&gamma), "delta": q(&delta), "ell": ell, "eps0": q(&eps0),
            "ell0": ell0(&eps, &gamma, &delta, &Constants::default().c0)?,
            "gap": a.gap,
            "rings": a.rings.iter().map(|ring| ring.iter().map(name).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "forbidden_per_ring": a.forbidden.iter().map(|f| f.len()).collect::<Vec<_>>(),
            "vbl": ev.vbl().iter().map(name).collect::<Vec<_>>(),
            "forbidden_tuples": ev.forbidden_count(),
            "never": a.is_never(),
            "rarity": q(&a.rarity(&o, inst)?),
        }),
    );
    write_or_print(&doc, None)?;
    Ok(())
}

fn simulate_lv(name: &str, graph: &Path, seed: u64, runs: u64, out: Option<&Path>, report: Option<&Path>, threads: usize) -> Outcome {
    let alg = builtin(name).ok_or_else(|| Failure::Usage(format!("unknown builtin `{name}`; expected one of {BUILTINS:?}")))?;
    let text = std::fs::read_to_string(graph).map_err(|e| Failure::Usage(format!("{}: {e}", graph.display())))?;
    let g = parse_graph(&text).map_err(|e| Failure::Usage(format!("{}: {e}", graph.display())))?;
    let inst = lv_instance(alg.as_ref(), &g)?;
    let cfg = pipeline_config(IntervalMode::Estimate, None);
    let f = |s: u64| simulate_las_vegas(alg.as_ref(), &g, s, &cfg).map(|(y, _)| y);
    let (seeds, outputs) = collect_runs(&f, runs, seed, threads)?;
    if let Some(p) = out {
        write_lines(p, &outputs)?;
    }
    let randomness = exact_distribution(&cfg.sampler.oracle(), &inst)?;
    let nodes: Vec<u32> = g.nodes().collect();
    let law = pushforward(nodes, &randomness, |vals| lv_outputs(alg.as_ref(), &g, &Assignment::full(vals.to_vec())));
    let reference = |s: u64| lv_rejection(alg.as_ref(), &g, &mut ChaCha8Rng::seed_from_u64(s));
    let (_, rejected) = collect_runs(&reference, runs, seed ^ 0x5eed, threads)?;
    let sim = report_from_samples(law.clone(), &outputs, seed, seeds);
    let rej = report_from_samples(law, &rejected, seed ^ 0x5eed, vec![]);
    let between = {
        let n = runs as f64;
        let sum: f64 = sim.counts.iter().zip(&rej.counts).map(|(a, b)| (*a as f64 - *b as f64).abs() / n).sum();
        (sum + (sim.outside as f64 - rej.outside as f64).abs() / n) / 2.0
    };
    let tol = tv_tolerance(runs);
    let passed = sim.tv <= tol && sim.p_value >= P_MIN && between <= tol;
    let doc = merge(
        header("simulate-lv"),
        json!({
            "builtin": name,
            "radius": alg.radius(),
            "nodes": g.node_count(),
            "seed": seed,
            "runs": runs,
            "simulation": distribution(&sim),
            "rejection": distribution(&rej),
            "tv_simulation_rejection": f12(between),
            "tv_tolerance": f12(tol),
            "passed": passed,
        }),
    );
    write_or_print(&doc, report)?;
    if !passed {
        return Err(Failure::Assertion("simulation law differs from the rejection reference".into()));
    }
    Ok(())
}

fn bench(file: &InstanceFile, seeds: u64, seed: u64, mode: Mode, report: Option<&Path>, threads: usize) -> Outcome {
    let cfg = pipeline_config(mode.into(), file.gamma.clone());
    let (_, sums) = pipeline_runs(&file.instance, &cfg, seeds, seed, threads)?;
    let potentials: Vec<u64> = sums.iter().map(|s| s.potential).collect();
    let doc = merge(
        header("bench"),
        json!({
            "seeds": seeds,
            "seed": seed,
            "mode": mode_name(mode.into()),
            "rounds": rounds_json(&sums),
            "potential": report::stats(&potentials),
            "potential_histogram": histogram(&potentials),
        }),
    );
    write_or_print(&doc, report)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let t = cli.threads.max(1);
    match cli.command {
        Command::Sample { instance, seed, runs, out, report, mode } => sample(&load(&instance)?, seed, runs, &out, report.as_deref(), mode, t),
        Command::Exact { instance } => exact(&load(&instance)?),
        Command::Verify { instance, runs, seed, suite, report } => {
            if runs == 0 {
                return Err(Failure::Usage("--runs must be at least 1".into()));
            }
            verify(&load(&instance)?, runs, seed, suite, report.as_deref(), t)
        }
        Command::Augment { instance, region, eps, gamma, delta, ell, eps0 } => {
            augment_cmd(&load(&instance)?, &region, &eps, &gamma, &delta, ell, &eps0)
        }
        Command::SimulateLv { builtin, graph, seed, runs, out, report } => {
            if runs == 0 {
                return Err(Failure::Usage("--runs must be at least 1".into()));
            }
            simulate_lv(&builtin, &graph, seed, runs, out.as_deref(), report.as_deref(), t)
        }
        Command::Bench { instance, seeds, seed, mode, report } => bench(&load(&instance)?, seeds, seed, mode, report.as_deref(), t),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Assertion(m)) = &f;
            eprintln!("error: {m}");
            f.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["locallll", "--bogus"]), 2);
        assert_eq!(run(["locallll", "exact"]), 2);
        assert_eq!(run(["locallll", "exact", "--instance", "/nonexistent/file"]), 2);
    }

    #[test]
    fn error_classes() {
        assert_eq!(Failure::from(Error::Argument("x".into())).code(), 2);
        assert_eq!(Failure::from(Error::Invariant("x".into())).code(), 1);
    }
}
