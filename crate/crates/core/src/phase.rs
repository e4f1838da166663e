//! Deciding whether ground states are fully nontrivial, plus parameter
//! sweeps and the scaling and monotonicity checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{format_float, GridSpec, RadialGrid};
use crate::params::{
    beta_spread_condition, small_b_bound, theorem12_condition, theorem13_condition, ParameterSet,
    DEFAULT_EQ_TOL,
};
use crate::solver::{
    certificate_for_slot, ground_state, ground_state_with_semitrivial, CertificateReport,
    SolverOptions,
};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-4;
pub const MONOTONICITY_TOL: f64 = 1e-6;
pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FullyNontrivial,
    Semitrivial,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::FullyNontrivial => "fully_nontrivial",
            Verdict::Semitrivial => "semitrivial",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Truth value of an analytic hypothesis; `NotApplicable` when its
/// preconditions (d ≥ 3, equal λ, constant B, …) are not met.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "fails")]
    Fails,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Predicate {
    fn from_bool(b: bool) -> Self {
        if b {
            Predicate::Holds
        } else {
            Predicate::Fails
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::Holds => "holds",
            Predicate::Fails => "fails",
            Predicate::NotApplicable => "n/a",
        }
    }
}

pub const PREDICATE_NAMES: [&str; 4] = [
    "theorem12",
    "theorem13",
    "theorem15_spread",
    "theorem17_smallb",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVerdict {
    pub numeric_full_level: f64,
    pub numeric_semitrivial_level: f64,
    /// Semitrivial level minus full level.
    pub margin: f64,
    pub verdict: Verdict,
    pub certificate_held: bool,
    pub predicates: BTreeMap<String, Predicate>,
    pub full_support: Vec<usize>,
    pub semitrivial_support: Vec<usize>,
    pub converged: bool,
    pub certificates: Vec<CertificateReport>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOptions {
    pub solver: SolverOptions,
    /// Relative to the semitrivial level.
    pub margin_tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            solver: SolverOptions::default(),
            margin_tol: DEFAULT_MARGIN_TOL,
        }
    }
}

impl PhaseOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.margin_tol > 0.0 && self.margin_tol < 1.0) {
            return Err(Error::Validation(format!(
                "margin_tol must lie in (0, 1), got {}",
                self.margin_tol
            )));
        }
        Ok(())
    }
}

/// The analytic hypotheses, evaluated side by side with the numerics.
pub fn analytic_predicates(p: &ParameterSet) -> BTreeMap<String, Predicate> {
    let na = Predicate::NotApplicable;
    let mut sorted = p.lambda.clone();
    sorted.sort_by(f64::total_cmp);
    let t12 =
        theorem12_condition(&sorted, p.dim).map_or(na, |r| Predicate::from_bool(r.admissible));
    let t13 = theorem13_condition(&p.lambda).map_or(na, |r| Predicate::from_bool(r.admissible));
    let t15 =
        beta_spread_condition(p, DEFAULT_EQ_TOL).map_or(na, |r| Predicate::from_bool(r.holds));
    let max_b = (0..p.d)
        .flat_map(|i| (0..p.d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| p.b[i][j])
        .fold(f64::NEG_INFINITY, f64::max);
    let t17 = small_b_bound(&p.mu).map_or(na, |bound| Predicate::from_bool(max_b < bound));
    PREDICATE_NAMES
        .iter()
        .zip([t12, t13, t15, t17])
        .map(|(n, v)| (n.to_string(), v))
        .collect()
}

/// Compares the numeric full and semitrivial levels. The perturbation
/// certificate is tried on every empty slot of every size-(d−1) minimizer
/// attaining the semitrivial level (within `margin_tol`), with each
/// surviving component as the test direction; this covers both the
/// smallest-λ and the largest-L⁴ choice.
pub fn classify(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    opts: &PhaseOptions,
) -> Result<PhaseVerdict> {
    p.validate()?;
    opts.validate()?;
    if p.d < 2 {
        return Err(Error::Precondition("classification needs d >= 2".into()));
    }
    let (full, semi) = ground_state_with_semitrivial(p, grid, &opts.solver)?;
    let semi = semi.expect("d >= 2");

    // Only minimizers attaining the semitrivial level matter: a certificate
    // on a higher subset level says nothing about c_sem.
    let attaining = |level: f64| level <= semi.level + opts.margin_tol * semi.level.abs();
    let mut certificates = Vec::new();
    for (_, r) in semi.per_subset.iter().filter(|(_, r)| attaining(r.level)) {
        for slot in (0..p.d).filter(|k| !r.support.contains(k)) {
            for &i in &r.support {
                certificates.push(certificate_for_slot(
                    p,
                    &r.fields,
                    slot,
                    r.fields.component(i),
                )?);
            }
        }
    }
    let certificate_held = certificates.iter().any(|c| c.holds);

    let mut diagnostics = Vec::new();
    if !full.converged {
        diagnostics.push(format!(
            "full minimizer did not converge (grad_norm = {:e} after {} iterations)",
            full.grad_norm, full.iterations
        ));
    }
    for (s, r) in &semi.per_subset {
        if !r.converged {
            diagnostics.push(format!(
                "semitrivial minimizer on {s:?} did not converge (grad_norm = {:e})",
                r.grad_norm
            ));
        }
    }
    let converged = diagnostics.is_empty();

    let margin = semi.level - full.level;
    let tol = opts.margin_tol * semi.level.abs();
    let verdict = if !converged {
        Verdict::Inconclusive
    } else if margin > tol && full.is_fully_nontrivial() {
        Verdict::FullyNontrivial
    } else if margin < -tol || (margin.abs() <= tol && !certificate_held) {
        Verdict::Semitrivial
    } else {
        if margin.abs() <= tol {
            diagnostics.push("levels agree within margin_tol but a certificate holds".into());
        } else {
            diagnostics.push("full level is lower but its minimizer has a zero component".into());
        }
        Verdict::Inconclusive
    };

    Ok(PhaseVerdict {
        numeric_full_level: full.level,
        numeric_semitrivial_level: semi.level,
        margin,
        verdict,
        certificate_held,
        predicates: analytic_predicates(p),
        full_support: full.support,
        semitrivial_support: semi.best().support.clone(),
        converged,
        certificates,
        diagnostics,
    })
}

/// One swept coordinate: a parameter path and the values it takes.
///
/// Paths: `b` (every off-diagonal entry), `b[i][j]` (kept symmetric),
/// `mu`, `mu[i]`, `lambda`, `lambda[i]`, with 0-based indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    AllB,
    B(usize, usize),
    AllMu,
    Mu(usize),
    AllLambda,
    Lambda(usize),
}

fn parse_path(path: &str, d: usize) -> Result<Target> {
    let bad = || Error::Sweep(format!("unknown parameter path {path:?}"));
    let range = |k: usize| {
        if k < d {
            Ok(k)
        } else {
            Err(Error::Sweep(format!(
                "index {k} in {path:?} out of range for d = {d}"
            )))
        }
    };
    let index = |s: &str| -> Result<usize> {
        s.strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(bad)
    };
    let path = path.trim();
    match path {
        "b" => return Ok(Target::AllB),
        "mu" => return Ok(Target::AllMu),
        "lambda" => return Ok(Target::AllLambda),
        _ => {}
    }
    if let Some(rest) = path.strip_prefix("lambda") {
        return Ok(Target::Lambda(range(index(rest)?)?));
    }
    if let Some(rest) = path.strip_prefix("mu") {
        return Ok(Target::Mu(range(index(rest)?)?));
    }
    if let Some(rest) = path.strip_prefix('b') {
        let split = rest.find("][").ok_or_else(bad)?;
        let (i, j) = (index(&rest[..=split])?, index(&rest[split + 1..])?);
        let (i, j) = (range(i)?, range(j)?);
        if i == j {
            return Err(Error::Sweep(format!(
                "{path:?} addresses an unused diagonal entry"
            )));
        }
        return Ok(Target::B(i, j));
    }
    Err(bad())
}

fn apply(p: &mut ParameterSet, t: Target, v: f64) {
    match t {
        Target::AllB => {
            for i in 0..p.d {
                for j in (0..p.d).filter(|&j| j != i) {
                    p.b[i][j] = v;
                }
            }
        }
        Target::B(i, j) => {
            p.b[i][j] = v;
            p.b[j][i] = v;
        }
        Target::AllMu => p.mu.iter_mut().for_each(|m| *m = v),
        Target::Mu(i) => p.mu[i] = v,
        Target::AllLambda => p.lambda.iter_mut().for_each(|l| *l = v),
        Target::Lambda(i) => p.lambda[i] = v,
    }
}

/// The parameter sets of a sweep in row-major order (last axis fastest).
pub fn sweep_points(
    base: &ParameterSet,
    axes: &[SweepAxis],
    cap: usize,
) -> Result<Vec<(Vec<f64>, ParameterSet)>> {
    base.validate()?;
    let targets = axes
        .iter()
        .map(|a| parse_path(&a.path, base.d))
        .collect::<Result<Vec<_>>>()?;
    if let Some(a) = axes.iter().find(|a| a.values.is_empty()) {
        return Err(Error::Sweep(format!("axis {:?} has no values", a.path)));
    }
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
        .filter(|&t| t <= cap)
        .ok_or_else(|| Error::Sweep(format!("sweep exceeds the cap of {cap} points")))?;
    let mut points = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = vec![0.0; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            coords[k] = a.values[rem % a.values.len()];
            rem /= a.values.len();
        }
        let mut p = base.clone();
        for (t, &v) in targets.iter().zip(&coords) {
            apply(&mut p, *t, v);
        }
        p.validate()
            .map_err(|e| Error::Sweep(format!("point {coords:?}: {e}")))?;
        points.push((coords, p));
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub verdict: PhaseVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.axes.clone();
        header.extend(
            [
                "full_level",
                "semitrivial_level",
                "margin",
                "verdict",
                "certificate_held",
            ]
            .map(String::from),
        );
        header.extend(PREDICATE_NAMES.map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let v = &row.verdict;
            let mut cells: Vec<String> = row.coords.iter().map(|&x| format_float(x)).collect();
            cells.push(format_float(v.numeric_full_level));
            cells.push(format_float(v.numeric_semitrivial_level));
            cells.push(format_float(v.margin));
            cells.push(v.verdict.as_str().into());
            cells.push(v.certificate_held.to_string());
            for name in PREDICATE_NAMES {
                cells.push(v.predicates[name].as_str().into());
            }
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Classifies every point of the sweep on a pool of `workers` threads.
/// Each point gets its own grid from `grid`, so an automatic radius follows
/// the swept λ. Rows come back in row-major order regardless of scheduling.
pub fn sweep(
    base: &ParameterSet,
    axes: &[SweepAxis],
    grid: &GridSpec,
    opts: &PhaseOptions,
    cap: usize,
    workers: usize,
) -> Result<SweepTable> {
    opts.validate()?;
    let points = sweep_points(base, axes, cap)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        points
            .into_par_iter()
            .map(|(coords, p)| {
                let g = Arc::new(grid.build(p.dim, &p.lambda)?);
                Ok(SweepRow {
                    verdict: classify(&p, &g, opts)?,
                    coords,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepTable {
        axes: axes.iter().map(|a| a.path.clone()).collect(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub c_p: f64,
    pub c_q: f64,
    pub consistent: bool,
}

/// For `λ_p ≤ λ_q`, `μ_q ≤ μ_p`, `B_q ≤ B_p` the levels satisfy `c_p ≤ c_q`.
/// Both levels are computed on one grid, sized for the smaller λ.
pub fn monotonicity_check(
    p: &ParameterSet,
    q: &ParameterSet,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<MonotonicityReport> {
    p.validate()?;
    q.validate()?;
    if p.d != q.d || p.dim != q.dim {
        return Err(Error::Precondition("p and q must share d and N".into()));
    }
    let ordered = (0..p.d).all(|i| {
        p.lambda[i] <= q.lambda[i]
            && q.mu[i] <= p.mu[i]
            && (0..p.d).all(|j| i == j || q.b[i][j] <= p.b[i][j])
    });
    if !ordered {
        return Err(Error::Precondition(
            "ordering violated: need lambda_p <= lambda_q, mu_q <= mu_p, B_q <= B_p".into(),
        ));
    }
    let lambdas: Vec<f64> = p.lambda.iter().chain(&q.lambda).copied().collect();
    let g = Arc::new(grid.build(p.dim, &lambdas)?);
    let c_p = ground_state(p, &g, opts)?.level;
    let c_q = ground_state(q, &g, opts)?.level;
    Ok(MonotonicityReport {
        c_p,
        c_q,
        consistent: c_p <= c_q + MONOTONICITY_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// `c(σλ, μ, B)` against `σ^{(4−N)/2} c(λ, μ, B)`. The scaled problem is
/// solved on the grid dilated by `1/√σ`, where the identity holds exactly
/// for the discrete functional.
pub fn scaling_check(
    p: &ParameterSet,
    sigma: f64,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<ScalingReport> {
    p.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let radius = grid.resolve_radius(&p.lambda);
    let base = Arc::new(RadialGrid::new(p.dim, radius, grid.n)?);
    let scaled_grid = Arc::new(RadialGrid::new(p.dim, radius / sigma.sqrt(), grid.n)?);
    let mut q = p.clone();
    q.lambda.iter_mut().for_each(|l| *l *= sigma);
    let lhs = ground_state(&q, &scaled_grid, opts)?.level;
    let rhs = sigma.powf((4.0 - p.dim as f64) / 2.0) * ground_state(p, &base, opts)?.level;
    Ok(ScalingReport {
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / rhs.abs(),
    })
}

/// `c(λ, μ, b)` against `c(λ, μ/b, 1) / b`, for constant couplings.
pub fn b_scaling_check(
    p: &ParameterSet,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<ScalingReport> {
    p.validate()?;
    let b = p
        .constant_coupling(DEFAULT_EQ_TOL)
        .ok_or_else(|| Error::Precondition("b-scaling needs constant couplings b_ij = b".into()))?;
    let g = Arc::new(grid.build(p.dim, &p.lambda)?);
    let q = ParameterSet::uniform(
        p.dim,
        p.lambda.clone(),
        p.mu.iter().map(|m| m / b).collect(),
        1.0,
    );
    let lhs = ground_state(p, &g, opts)?.level;
    let rhs = ground_state(&q, &g, opts)?.level / b;
    Ok(ScalingReport {
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / rhs.abs(),
    })
}
