//! `cnls` command line: configuration, commands and output files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::params::{
    alpha_threshold, beta_spread_condition, small_b_bound, theorem12_condition,
    theorem13_condition, ParameterSet, DEFAULT_EQ_TOL,
};
use crate::phase::{
    classify, sweep, PhaseOptions, SweepAxis, DEFAULT_MARGIN_TOL, DEFAULT_SWEEP_CAP,
};
use crate::reduction::reduce_system;
use crate::selftest::{self, Harness};
use crate::solver::{ground_state, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_WARNING: i32 = 2;

pub const MIN_INTERVALS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

fn default_margin_tol() -> f64 {
    DEFAULT_MARGIN_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Pretty-print JSON outputs.
    #[serde(default = "default_true")]
    pub pretty: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            pretty: true,
        }
    }
}

/// Everything a run needs, read from one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub parameters: ParameterSet,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_margin_tol")]
    pub margin_tol: f64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// 0-based indices merged by `reduce`.
    #[serde(default)]
    pub group: Option<Vec<usize>>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        self.solver.validate()?;
        self.phase_options().validate()?;
        if self.grid.n < MIN_INTERVALS {
            return Err(Error::Config(format!(
                "grid n must be at least {MIN_INTERVALS}, got {}",
                self.grid.n
            )));
        }
        if let Some(r) = self.grid.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("grid R must be positive, got {r}")));
            }
        }
        if let Some(s) = &self.sweep {
            if s.cap == 0 {
                return Err(Error::Config("sweep cap must be positive".into()));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn phase_options(&self) -> PhaseOptions {
        PhaseOptions {
            solver: self.solver.clone(),
            margin_tol: self.margin_tol,
        }
    }

    /// SHA-256 of the canonical JSON form of this configuration, leaving out
    /// the output location and worker count, which do not affect results.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.workers = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Provenance {
            tool: "cnls".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config.sha256(),
        }
    }

    /// Leading comment line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# {} {} config_sha256={}\n",
            self.tool, self.version, self.config_sha256
        )
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cnls",
    version,
    about = "Ground states of weakly coupled cubic Schrödinger systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the ground state; writes result.json and profiles.csv.
    Solve(RunArgs),
    /// Decide fully nontrivial vs semitrivial; writes verdict.json.
    Classify(RunArgs),
    /// Classify a grid of parameter points; writes sweep.csv.
    Sweep(RunArgs),
    /// Merge a group of equal-λ equations and print the reduced system.
    Reduce(RunArgs),
    /// Print the closed-form thresholds for the parameters.
    Thresholds(RunArgs),
    /// Run the acceptance suite.
    Selftest {
        #[arg(long, hide = true)]
        inject_weight_fault: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn effective_config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            c.solver.seed = seed;
        }
        if let Some(out) = &self.out {
            c.output.dir = out.clone();
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        c.validate()?;
        Ok(c)
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let mut s = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    s.push('\n');
    Ok(s)
}

fn output_dir(c: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&c.output.dir).map_err(|e| {
        Error::Config(format!(
            "output directory {} not writable: {e}",
            c.output.dir.display()
        ))
    })?;
    Ok(&c.output.dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: T,
}

fn cmd_solve(c: &RunConfig, io: &mut Io) -> Result<i32> {
    let p = &c.parameters;
    let grid = Arc::new(c.grid.build(p.dim, &p.lambda)?);
    let r = ground_state(p, &grid, &c.solver)?;
    let prov = Provenance::of(c);
    let dir = output_dir(c)?;
    #[derive(Serialize)]
    struct Body {
        result: crate::solver::ResultMetadata,
    }
    write_file(
        dir,
        "result.json",
        &to_json(
            &Document {
                provenance: &prov,
                body: Body {
                    result: r.metadata(),
                },
            },
            c.output.pretty,
        )?,
    )?;
    write_file(
        dir,
        "profiles.csv",
        &(prov.csv_comment() + &r.fields.to_csv()),
    )?;
    writeln!(io.out, "level = {:.10}", r.level)?;
    writeln!(io.out, "support = {:?}", r.support)?;
    writeln!(
        io.out,
        "converged = {} (grad_norm = {:e}, {} iterations)",
        r.converged, r.grad_norm, r.iterations
    )?;
    if r.converged {
        Ok(EXIT_OK)
    } else {
        writeln!(
            io.err,
            "warning: solver did not converge; result written with converged = false"
        )?;
        Ok(EXIT_WARNING)
    }
}

fn cmd_classify(c: &RunConfig, io: &mut Io) -> Result<i32> {
    let p = &c.parameters;
    let grid = Arc::new(c.grid.build(p.dim, &p.lambda)?);
    let v = classify(p, &grid, &c.phase_options())?;
    let prov = Provenance::of(c);
    #[derive(Serialize)]
    struct Body<'a> {
        verdict: &'a crate::phase::PhaseVerdict,
    }
    write_file(
        output_dir(c)?,
        "verdict.json",
        &to_json(
            &Document {
                provenance: &prov,
                body: Body { verdict: &v },
            },
            c.output.pretty,
        )?,
    )?;
    writeln!(io.out, "verdict = {}", v.verdict.as_str())?;
    writeln!(io.out, "full level = {:.10}", v.numeric_full_level)?;
    writeln!(
        io.out,
        "semitrivial level = {:.10}",
        v.numeric_semitrivial_level
    )?;
    writeln!(io.out, "margin = {:e}", v.margin)?;
    writeln!(io.out, "certificate held = {}", v.certificate_held)?;
    for d in &v.diagnostics {
        writeln!(io.err, "note: {d}")?;
    }
    Ok(if v.converged { EXIT_OK } else { EXIT_WARNING })
}

fn cmd_sweep(c: &RunConfig, io: &mut Io) -> Result<i32> {
    let (axes, cap) = match &c.sweep {
        Some(s) => (s.axes.clone(), s.cap),
        None => (Vec::new(), DEFAULT_SWEEP_CAP),
    };
    let workers = c
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let table = sweep(
        &c.parameters,
        &axes,
        &c.grid,
        &c.phase_options(),
        cap,
        workers,
    )?;
    let prov = Provenance::of(c);
    let path = write_file(
        output_dir(c)?,
        "sweep.csv",
        &(prov.csv_comment() + &table.to_csv()),
    )?;
    writeln!(
        io.out,
        "{} points written to {}",
        table.rows.len(),
        path.display()
    )?;
    let unconverged = table.rows.iter().filter(|r| !r.verdict.converged).count();
    if unconverged > 0 {
        writeln!(io.err, "warning: {unconverged} points did not converge")?;
        return Ok(EXIT_WARNING);
    }
    Ok(EXIT_OK)
}

fn cmd_reduce(c: &RunConfig, io: &mut Io) -> Result<i32> {
    let group = c.group.as_ref().ok_or_else(|| {
        Error::Config("reduce requires a \"group\" field (0-based indices)".into())
    })?;
    let red = reduce_system(&c.parameters, group)?;
    let prov = Provenance::of(c);
    write!(
        io.out,
        "{}",
        to_json(
            &Document {
                provenance: &prov,
                body: &red
            },
            true
        )?
    )?;
    Ok(EXIT_OK)
}

/// Twelve significant digits, trailing zeros dropped.
fn short(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return x.to_string();
    }
    let digits = (11 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn cmd_thresholds(c: &RunConfig, io: &mut Io) -> Result<i32> {
    let p = &c.parameters;
    let mut sorted = p.lambda.clone();
    sorted.sort_by(f64::total_cmp);
    let w = &mut io.out;
    writeln!(w, "d = {}, N = {}", p.d, p.dim)?;
    writeln!(w, "{:<28}{:?}", "lambda (ascending)", sorted)?;
    let show = |r: Result<String>| r.unwrap_or_else(|e| format!("n/a ({e})"));
    writeln!(
        w,
        "{:<28}{}",
        "alpha_threshold",
        show(
            alpha_threshold(
                sorted.get(1).copied().unwrap_or(f64::NAN) / sorted[0],
                p.d,
                p.dim
            )
            .map(short)
        )
    )?;
    writeln!(
        w,
        "{:<28}{}",
        "tail admissible",
        show(theorem12_condition(&sorted, p.dim).map(|r| format!(
            "{} (ratio {} vs alpha {})",
            r.admissible,
            short(r.ratio),
            short(r.alpha)
        )))
    )?;
    writeln!(
        w,
        "{:<28}{}",
        "theorem13_condition",
        show(theorem13_condition(&p.lambda).map(|r| format!(
            "{} (ratio {} vs alpha {})",
            r.admissible,
            short(r.ratio),
            short(r.alpha)
        )))
    )?;
    writeln!(
        w,
        "{:<28}{}",
        "small_b_bound",
        show(small_b_bound(&p.mu).map(short))
    )?;
    writeln!(
        w,
        "{:<28}{}",
        "beta_spread_condition",
        show(beta_spread_condition(p, DEFAULT_EQ_TOL).map(|r| format!(
            "{} (spread {} vs gap {})",
            r.holds,
            short(r.spread),
            short(r.alpha_gap)
        )))
    )?;
    Ok(EXIT_OK)
}

fn cmd_selftest(fault: bool, io: &mut Io) -> Result<i32> {
    let report = selftest::run(&Harness {
        corrupt_weights: fault,
    });
    write!(io.out, "{}", report.text())?;
    write!(io.err, "{}", report.timings())?;
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_USAGE
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let info = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            let _ = if info {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return if info { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let mut io = Io { out, err };
    let result = match &cli.command {
        Command::Selftest {
            inject_weight_fault,
        } => cmd_selftest(*inject_weight_fault, &mut io),
        Command::Solve(a) => a.effective_config().and_then(|c| cmd_solve(&c, &mut io)),
        Command::Classify(a) => a.effective_config().and_then(|c| cmd_classify(&c, &mut io)),
        Command::Sweep(a) => a.effective_config().and_then(|c| cmd_sweep(&c, &mut io)),
        Command::Reduce(a) => a.effective_config().and_then(|c| cmd_reduce(&c, &mut io)),
        Command::Thresholds(a) => a
            .effective_config()
            .and_then(|c| cmd_thresholds(&c, &mut io)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"parameters": {"d": 1, "N": 1, "lambda": [1.0], "mu": [1.0], "b": [[0.0]]}}"#;

    #[test]
    fn config_defaults_and_validation() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.solver, SolverOptions::default());
        assert_eq!(c.margin_tol, DEFAULT_MARGIN_TOL);
        assert!(c.validate().is_ok());

        let mut small = c.clone();
        small.grid.n = 50;
        assert!(small.validate().is_err());
        assert!(RunConfig::from_json(r#"{"parameters": {}, "extra": 1}"#).is_err());
        let unknown = MINIMAL.replacen('{', r#"{"bogus": true, "#, 1);
        assert!(RunConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn hash_tracks_effective_config() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
        b.output.dir = "elsewhere".into();
        b.workers = Some(3);
        assert_eq!(a.sha256(), b.sha256());
        b.solver.seed = 9;
        assert_ne!(a.sha256(), b.sha256());
        assert!(Provenance::of(&a).csv_comment().starts_with("# cnls "));
    }

    #[test]
    fn short_formatting() {
        assert_eq!(short(2.2499999999999996), "2.25");
        assert_eq!(short(2.0), "2");
        assert_eq!(short(std::f64::consts::FRAC_1_SQRT_2), "0.707106781187");
        assert_eq!(short(-1234.5), "-1234.5");
        assert_eq!(short(0.0), "0");
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["cnls", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["cnls", "solve"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(
            run(
                ["cnls", "solve", "/nonexistent/config.json"],
                &mut o,
                &mut e
            ),
            EXIT_USAGE
        );
        let mut o = Vec::new();
        assert_eq!(run(["cnls", "--version"], &mut o, &mut e), EXIT_OK);
        assert!(String::from_utf8(o)
            .unwrap()
            .contains(env!("CARGO_PKG_VERSION")));
    }
}
