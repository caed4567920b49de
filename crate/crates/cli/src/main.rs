//! `treedep` command-line front end.
//!
//! Exit codes: 0 ok, 1 a check failed, 2 bad input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use treedep::counterexamples::run_all;
use treedep::hmm::{default_t_grid, uncertainty_band, ErrorFamily, SigmaSchedule, DEFAULT_GRID_POINTS, DEFAULT_SAMPLES};
use treedep::marginals::linspace;
use treedep::ordering::{audit_theorem_conditions, AuditSpec, Holds, Theorem};
use treedep::sampler::{sample, TreeSpec};
use treedep::TheoremQuery;

#[derive(Parser, Debug)]
#[command(name = "treedep", version, about = "Markov tree dependence: counterexamples, hypothesis audits, sampling, robustness bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rebuild the embedded counterexamples and verify their exact values.
    Counterexamples {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the comparison hypotheses for two specifications on one tree.
    Check {
        /// Smaller specification (JSON).
        x: PathBuf,
        /// Larger specification (JSON).
        y: PathBuf,
        #[arg(long, value_enum, default_value_t = TheoremArg::TreeSm)]
        theorem: TheoremArg,
        /// Comma-separated node path `P` starting at a child of the root.
        #[arg(long, value_delimiter = ',')]
        path: Option<Vec<usize>>,
        #[arg(long)]
        k_star: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a copula specification.
    Sample {
        spec: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ECDF band for the maximum of a perturbed Gaussian random walk.
    Band {
        /// Number of steps.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value = "gaussian")]
        family: String,
        /// Error variance bound: `const:<v>` or `linear:<slope>`.
        #[arg(long, default_value = "const:3")]
        sigma: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of t grid points from -5 to 4√d.
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Json,
    Csv,
    Binary,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TheoremArg {
    TreeSm,
    CopulaSm,
    Ism,
    Dsm,
    Dcx,
}

impl From<TheoremArg> for Theorem {
    fn from(t: TheoremArg) -> Self {
        match t {
            TheoremArg::TreeSm => Theorem::TreeSm,
            TheoremArg::CopulaSm => Theorem::CopulaSm,
            TheoremArg::Ism => Theorem::Ism,
            TheoremArg::Dsm => Theorem::Dsm,
            TheoremArg::Dcx => Theorem::Dcx,
        }
    }
}

enum Failure {
    Check(String),
    Input(String),
}

impl From<treedep::Error> for Failure {
    fn from(e: treedep::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Counterexamples { format, out } => counterexamples(format, out.as_deref()),
        Command::Check { x, y, theorem, path, k_star, format, out } => check(&x, &y, theorem.into(), path, k_star, format, out.as_deref()),
        Command::Sample { spec, samples, seed, format, out } => sample_cmd(&spec, samples, seed, format, out.as_deref()),
        Command::Band { steps, family, sigma, samples, seed, grid, format, out } => {
            band(steps, &family, &sigma, samples, seed, grid, format, out.as_deref())
        }
    }
}

fn unsupported(format: Format, cmd: &str) -> Failure {
    Failure::Input(format!("format {format:?} is not available for {cmd}").to_lowercase())
}

/// Output file, or stdout when `out` is absent.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `<out>.manifest.json` next to the output, or prints the manifest to
/// stderr when writing to stdout.
fn emit_manifest(out: Option<&Path>, manifest: serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match out {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".manifest.json");
            std::fs::write(PathBuf::from(name), text + "\n")?;
        }
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn counterexamples(format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let reports = run_all()?;
    let mut w = sink(out)?;
    match format {
        Format::Text => {
            for r in &reports {
                writeln!(w, "== {} ({})", r.title, r.key)?;
                for line in &r.lines {
                    writeln!(w, "{line}")?;
                }
                for c in r.checks.iter().filter(|c| !c.pass) {
                    writeln!(w, "MISMATCH {}: expected {}, got {}", c.name, c.expected, c.actual)?;
                }
                writeln!(w, "{}", if r.passed() { "PASS" } else { "FAIL" })?;
            }
        }
        Format::Json => {
            let all = json!({ "passed": reports.iter().all(|r| r.passed()), "examples": reports });
            writeln!(w, "{}", serde_json::to_string_pretty(&all).expect("report serializes"))?;
        }
        other => return Err(unsupported(other, "counterexamples")),
    }
    w.flush()?;
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}: {}: expected {}, got {}", r.key, c.name, c.expected, c.actual)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("; ")))
    }
}

fn check(
    x: &Path,
    y: &Path,
    theorem: Theorem,
    path: Option<Vec<usize>>,
    k_star: Option<usize>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let load = |p: &Path| AuditSpec::load(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())));
    let (sx, sy) = (load(x)?, load(y)?);
    if sx.tree() != sy.tree() {
        return Err(Failure::Input("the two specifications use different trees".into()));
    }
    let default = TheoremQuery::default_for(sx.tree())?;
    let query = TheoremQuery::new(path.unwrap_or(default.path), k_star.unwrap_or(default.k_star));
    query.validate(sx.tree())?;
    let report = audit_theorem_conditions(&sx, &sy, &query)?;
    let verdict = report
        .verdict(theorem)
        .ok_or_else(|| Failure::Input(format!("{} is not audited for this kind of specification", json!(theorem))))?
        .clone();
    let mut w = sink(out)?;
    match format {
        Format::Json => {
            let doc = json!({ "theorem": theorem, "holds": verdict.holds, "report": report });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"))?;
        }
        Format::Text => {
            writeln!(w, "theorem {}: {}", json!(theorem).as_str().unwrap_or_default(), json!(verdict.holds).as_str().unwrap_or_default())?;
            for f in &verdict.failures {
                writeln!(w, "  ({}) {} {}: {}", f.hypothesis, json!(f.subject), f.flag, json!(f.value).as_str().unwrap_or_default())?;
            }
        }
        other => return Err(unsupported(other, "check")),
    }
    w.flush()?;
    match verdict.holds {
        Holds::True => Ok(()),
        h => {
            let first = verdict.failures.first().map(|f| format!("({}) {} {}", f.hypothesis, json!(f.subject), f.flag)).unwrap_or_default();
            Err(Failure::Check(format!("hypotheses {}: {first}", json!(h).as_str().unwrap_or_default())))
        }
    }
}

fn sample_cmd(spec_path: &Path, n: usize, seed: u64, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let spec = TreeSpec::load(spec_path).map_err(|e| Failure::Input(format!("{}: {e}", spec_path.display())))?;
    let batch = sample(&spec, n, seed)?;
    let mut w = sink(out)?;
    match format {
        Format::Csv => batch.write_csv(&mut w)?,
        Format::Binary => batch.write_binary(&mut w)?,
        other => return Err(unsupported(other, "sample")),
    }
    w.flush()?;
    emit_manifest(
        out,
        json!({
            "command": "sample",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "n_samples": n,
            "format": format!("{format:?}").to_lowercase(),
            "fingerprint": format!("{:016x}", spec.fingerprint()),
            "spec": spec.to_json(),
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn band(steps: usize, family: &str, sigma: &str, n: usize, seed: u64, grid: usize, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let family: ErrorFamily = family.parse()?;
    let schedule: SigmaSchedule = sigma.parse()?;
    if grid < 2 {
        return Err(Failure::Input("--grid needs at least two points".into()));
    }
    let t_grid = if grid == DEFAULT_GRID_POINTS { default_t_grid(steps) } else { linspace(-5.0, 4.0 * (steps as f64).sqrt(), grid) };
    let result = uncertainty_band(steps, family, &schedule.values(steps), n, seed, &t_grid)?;
    let mut w = sink(out)?;
    match format {
        Format::Csv => result.write_csv(&mut w)?,
        Format::Json => writeln!(w, "{}", serde_json::to_string(&result).expect("band serializes"))?,
        other => return Err(unsupported(other, "band")),
    }
    w.flush()?;
    emit_manifest(
        out,
        json!({
            "command": "band",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "n_samples": n,
            "format": format!("{format:?}").to_lowercase(),
            "steps": steps,
            "family": family,
            "sigma": schedule.to_string(),
            "grid": grid,
        }),
    )
}
