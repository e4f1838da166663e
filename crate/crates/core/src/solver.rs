//! Ground-state levels by descent on the Nehari manifold.
//!
//! Every iterate lives on 𝒩: after each step the field is rescaled by the
//! closed-form Nehari factor. On 𝒩 the action coincides with the
//! degree-zero quotient `J(u) = Q(u)² / (4 P(u))` (Q quadratic, P quartic),
//! and `∇J = I'` there, so a step along `−I'` followed by rescaling is a
//! gradient step for `J` with the constraint removed.
//!
//! The step direction is the `(−Δ_h + λ_i)^{-1}` preconditioned gradient, a
//! tridiagonal solve per component, which keeps the iteration count
//! independent of the mesh size. Iterates are clamped to be nonnegative,
//! fixing the sign of every component.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{
    breakdown_raw, check_dims, gradient_component_raw, scale_from, ActionBreakdown,
};
use crate::grid::{Field, GridMetadata, MultiField, RadialGrid};
use crate::params::ParameterSet;

/// Levels closer than this (relative) are treated as equal.
pub const LEVEL_TIE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Upper bound for the adaptive step length.
    pub max_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// Stop once the preconditioned gradient norm, relative to ‖u‖, is below this.
    pub tolerance: f64,
    /// Components whose L⁴ mass is below this fraction of the largest are zero.
    pub triviality_threshold: f64,
    /// Number of random starts added to the deterministic inventory.
    pub multistarts: usize,
    pub seed: u64,
    /// Amplitude of the soliton added to empty slots of perturbed starts.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 20_000,
            initial_step: 1.0,
            max_step: 4.0,
            backtrack: 0.5,
            armijo: 1e-4,
            tolerance: 1e-7,
            triviality_threshold: 1e-6,
            multistarts: 2,
            seed: 0,
            perturbation: 0.1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("solver option {what}")));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.initial_step > 0.0 && self.max_step >= self.initial_step) {
            return bad("steps must satisfy 0 < initial_step <= max_step");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.triviality_threshold > 0.0 && self.triviality_threshold < 1e-2) {
            return bad("triviality_threshold must lie in (0, 1e-2)");
        }
        if self.multistarts == 0 {
            return bad("multistarts must be positive");
        }
        if !(self.perturbation > 0.0) {
            return bad("perturbation must be positive");
        }
        Ok(())
    }
}

/// Another minimizer found at the same level as the reported one.
#[derive(Clone, Debug)]
pub struct Alternative {
    pub level: f64,
    pub support: Vec<usize>,
    pub fields: MultiField,
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub fields: MultiField,
    pub level: f64,
    /// Indices (0-based) of the nonzero components.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub starts_used: usize,
    pub converged: bool,
    pub breakdown: ActionBreakdown,
    pub alternatives: Vec<Alternative>,
}

/// JSON-facing summary of a [`GroundStateResult`]; profiles go to CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultMetadata {
    pub level: f64,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub starts_used: usize,
    pub converged: bool,
    pub breakdown: ActionBreakdown,
    pub grid: GridMetadata,
    pub alternatives: Vec<AlternativeMetadata>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeMetadata {
    pub level: f64,
    pub support: Vec<usize>,
}

impl GroundStateResult {
    pub fn metadata(&self) -> ResultMetadata {
        ResultMetadata {
            level: self.level,
            support: self.support.clone(),
            iterations: self.iterations,
            grad_norm: self.grad_norm,
            starts_used: self.starts_used,
            converged: self.converged,
            breakdown: self.breakdown,
            grid: self.fields.grid().metadata(),
            alternatives: self
                .alternatives
                .iter()
                .map(|a| AlternativeMetadata {
                    level: a.level,
                    support: a.support.clone(),
                })
                .collect(),
        }
    }

    pub fn is_fully_nontrivial(&self) -> bool {
        self.support.len() == self.fields.d()
    }
}

fn check_subset(p: &ParameterSet, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::Precondition("index subset must be nonempty".into()));
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&k) = s.iter().find(|&&k| k >= p.d) {
        return Err(Error::Precondition(format!(
            "index {k} out of range for d = {}",
            p.d
        )));
    }
    Ok(s)
}

struct Workspace {
    u: Vec<Vec<f64>>,
    trial: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    dir: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, len: usize) -> Self {
        let block = || vec![vec![0.0; len]; d];
        Workspace {
            u: block(),
            trial: block(),
            grad: block(),
            dir: block(),
            scratch: vec![0.0; len],
        }
    }
}

fn eval(grid: &RadialGrid, p: &ParameterSet, u: &[Vec<f64>]) -> ActionBreakdown {
    let s: Vec<&[f64]> = u.iter().map(Vec::as_slice).collect();
    breakdown_raw(grid, p, &s)
}

/// `Q² / (4P)`, the action at the Nehari scaling; `None` when P ≤ 0.
fn quotient(b: &ActionBreakdown) -> Option<f64> {
    let q = b.quartic();
    (q > 0.0 && b.quadratic > 0.0).then(|| b.quadratic * b.quadratic / (4.0 * q))
}

fn rescale(u: &mut [Vec<f64>], t: f64) {
    u.iter_mut().flatten().for_each(|x| *x *= t);
}

/// One local descent from `start`, restricted to `subset` (sorted).
fn descend(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    subset: &[usize],
    opts: &SolverOptions,
    start: &MultiField,
) -> Result<GroundStateResult> {
    let d = p.d;
    let len = grid.len();
    let mut ws = Workspace::new(d, len);
    for &i in subset {
        ws.u[i].copy_from_slice(start.component(i).values());
        ws.u[i].iter_mut().for_each(|x| *x = x.max(0.0));
    }
    let b0 = eval(grid, p, &ws.u);
    let t0 = scale_from(&b0)?;
    rescale(&mut ws.u, t0);
    let mut current = eval(grid, p, &ws.u);
    let mut j_cur = quotient(&current).expect("rescaled field has positive quartic part");

    let mut step = opts.initial_step;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let mut gn2 = 0.0;
        {
            let s: Vec<&[f64]> = ws.u.iter().map(Vec::as_slice).collect();
            for &i in subset {
                gradient_component_raw(grid, p, &s, i, &mut ws.grad[i]);
                grid.solve_shifted(p.lambda[i], &ws.grad[i], &mut ws.dir[i], &mut ws.scratch);
                gn2 += grid.dot(&ws.grad[i], &ws.dir[i]);
            }
        }
        grad_norm = (gn2.max(0.0) / current.quadratic).sqrt();
        if grad_norm < opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut accepted = None;
        let mut first_try = true;
        while step >= 1e-14 {
            let mut decrease = 0.0;
            for &i in subset {
                for j in 0..len {
                    let x = (ws.u[i][j] - step * ws.dir[i][j]).max(0.0);
                    ws.trial[i][j] = x;
                }
                ws.trial[i][len - 1] = 0.0;
                decrease += ws.grad[i]
                    .iter()
                    .zip(ws.u[i].iter().zip(&ws.trial[i]))
                    .zip(grid.weights())
                    .map(|((g, (a, b)), w)| w * g * (a - b))
                    .sum::<f64>();
            }
            let tb = eval(grid, p, &ws.trial);
            if let Some(j_trial) = quotient(&tb) {
                if j_trial <= j_cur - opts.armijo * decrease {
                    accepted = Some((tb, j_trial));
                    break;
                }
            }
            step *= opts.backtrack;
            first_try = false;
        }
        let Some((tb, j_trial)) = accepted else {
            break;
        };
        let t = scale_from(&tb)?;
        std::mem::swap(&mut ws.u, &mut ws.trial);
        rescale(&mut ws.u, t);
        current = eval(grid, p, &ws.u);
        j_cur = j_trial;
        if first_try {
            step = (step * 1.5).min(opts.max_step);
        }
    }

    // Snap negligible components to zero and return to 𝒩.
    let masses: Vec<f64> =
        ws.u.iter()
            .map(|c| {
                c.iter()
                    .zip(grid.weights())
                    .map(|(x, w)| w * x.powi(4))
                    .sum()
            })
            .collect();
    let max_mass = masses.iter().copied().fold(0.0f64, f64::max);
    let mut support = Vec::new();
    let mut snapped = false;
    for i in 0..d {
        if masses[i] > 0.0 && masses[i] >= opts.triviality_threshold * max_mass {
            support.push(i);
        } else if masses[i] > 0.0 {
            ws.u[i].iter_mut().for_each(|x| *x = 0.0);
            snapped = true;
        }
    }
    if snapped {
        let b = eval(grid, p, &ws.u);
        rescale(&mut ws.u, scale_from(&b)?);
    }
    let breakdown = eval(grid, p, &ws.u);
    let components =
        ws.u.into_iter()
            .map(Field::from_values)
            .collect::<Result<Vec<_>>>()?;
    let fields = MultiField::new(grid.clone(), components)?;
    Ok(GroundStateResult {
        fields,
        level: breakdown.action,
        support,
        iterations,
        grad_norm,
        starts_used: 1,
        converged,
        breakdown,
        alternatives: Vec::new(),
    })
}

fn relative_distance(a: &MultiField, b: &MultiField) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.components().iter().zip(b.components()) {
        scale = scale.max(x.sup_norm()).max(y.sup_norm());
        for (p, q) in x.values().iter().zip(y.values()) {
            diff = diff.max((p - q).abs());
        }
    }
    if scale > 0.0 {
        diff / scale
    } else {
        0.0
    }
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TIE_TOL * a.abs().max(b.abs())
}

/// Lowest level wins; ties go to the lexicographically smallest support,
/// then to the earliest start. Converged results are preferred.
fn merge(mut results: Vec<GroundStateResult>) -> Result<GroundStateResult> {
    let starts_used = results.iter().map(|r| r.starts_used).sum();
    if results.is_empty() {
        return Err(Error::Degenerate(
            "no start could be projected onto 𝒩".into(),
        ));
    }
    if results.iter().any(|r| r.converged) {
        results.retain(|r| r.converged);
    }
    let best_level = results
        .iter()
        .map(|r| r.level)
        .fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..results.len())
        .filter(|&k| tied(results[k].level, best_level))
        .collect();
    order.sort_by(|&a, &b| results[a].support.cmp(&results[b].support).then(a.cmp(&b)));
    let mut chosen = results[order[0]].clone();
    let mut alternatives: Vec<Alternative> = Vec::new();
    for &k in &order[1..] {
        let r = &results[k];
        let distinct = relative_distance(&r.fields, &chosen.fields) > 1e-4
            && alternatives
                .iter()
                .all(|a| relative_distance(&r.fields, &a.fields) > 1e-4);
        if distinct {
            alternatives.push(Alternative {
                level: r.level,
                support: r.support.clone(),
                fields: r.fields.clone(),
            });
        }
    }
    chosen.alternatives = alternatives;
    chosen.starts_used = starts_used;
    Ok(chosen)
}

fn subset_seed(seed: u64, subset: &[usize]) -> u64 {
    let mask = subset.iter().fold(0u64, |m, &i| m | (1 << (i % 64)));
    seed ^ mask.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Starting profiles restricted to `subset`: one with all components equal,
/// one per index with that component dominant, and `opts.multistarts`
/// randomized positive profiles.
fn restricted_inventory(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    subset: &[usize],
    opts: &SolverOptions,
) -> Vec<MultiField> {
    let mut starts = Vec::new();
    let mean_lambda = subset.iter().map(|&i| p.lambda[i]).sum::<f64>() / subset.len() as f64;
    let common = Field::soliton(grid, mean_lambda, 1.0);
    let mut equal = MultiField::zeros(grid.clone(), p.d);
    for &i in subset {
        equal.components_mut()[i] = common.clone();
    }
    starts.push(equal);

    if subset.len() >= 2 {
        for &k in subset {
            let mut m = MultiField::zeros(grid.clone(), p.d);
            for &i in subset {
                let s = Field::soliton(grid, p.lambda[i], p.mu[i]);
                m.components_mut()[i] = if i == k {
                    s
                } else {
                    s.scaled(opts.perturbation)
                };
            }
            starts.push(m);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(subset_seed(opts.seed, subset));
    for _ in 0..opts.multistarts {
        let mut m = MultiField::zeros(grid.clone(), p.d);
        for &i in subset {
            let amp: f64 = rng.gen_range(0.2..2.0);
            let width: f64 = rng.gen_range(0.5..2.0);
            let k = p.lambda[i].sqrt() / width;
            let a = amp * (2.0 * p.lambda[i] / p.mu[i]).sqrt();
            m.components_mut()[i] = Field::sample(grid, |r| a / (k * r).cosh());
        }
        starts.push(m);
    }
    starts
}

fn run_all(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    subset: &[usize],
    opts: &SolverOptions,
    starts: &[MultiField],
) -> Vec<GroundStateResult> {
    starts
        .par_iter()
        .filter_map(|s| descend(p, grid, subset, opts, s).ok())
        .collect()
}

fn check_grid(p: &ParameterSet, grid: &RadialGrid) -> Result<()> {
    if grid.dim() != p.dim {
        return Err(Error::Precondition(format!(
            "grid is {}-dimensional but parameters have N = {}",
            grid.dim(),
            p.dim
        )));
    }
    Ok(())
}

/// Approximates `c(I)`, the ground-state level of the subsystem on `subset`
/// (0-based indices). With `init`, one descent from that field; without,
/// the best of the restricted multistart inventory. Components outside the
/// subset stay identically zero.
pub fn minimize_restricted(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    subset: &[usize],
    opts: &SolverOptions,
    init: Option<&MultiField>,
) -> Result<GroundStateResult> {
    p.validate()?;
    opts.validate()?;
    check_grid(p, grid)?;
    let subset = check_subset(p, subset)?;
    match init {
        Some(u) => {
            check_dims(u, p)?;
            if u.grid().len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: u.grid().len(),
                });
            }
            if let Some(k) = (0..p.d).find(|k| !subset.contains(k) && !u.component(*k).is_zero()) {
                return Err(Error::Precondition(format!(
                    "initial component {k} lies outside the subset but is nonzero"
                )));
            }
            descend(p, grid, &subset, opts, u)
        }
        None => {
            let starts = restricted_inventory(p, grid, &subset, opts);
            merge(run_all(p, grid, &subset, opts, &starts))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SemitrivialLevel {
    pub level: f64,
    /// The size-(d−1) subset achieving `level`.
    pub best_subset: Vec<usize>,
    /// One result per size-(d−1) subset, lexicographic order of subsets.
    pub per_subset: Vec<(Vec<usize>, GroundStateResult)>,
}

impl SemitrivialLevel {
    pub fn converged(&self) -> bool {
        self.per_subset.iter().all(|(_, r)| r.converged)
    }

    pub fn best(&self) -> &GroundStateResult {
        &self
            .per_subset
            .iter()
            .find(|(s, _)| *s == self.best_subset)
            .expect("best subset is one of the computed subsets")
            .1
    }
}

/// Minimum of `c(I)` over the d subsets with `#I = d − 1`; smaller supports
/// are dominated by inclusion.
pub fn semitrivial_level(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    opts: &SolverOptions,
) -> Result<SemitrivialLevel> {
    p.validate()?;
    opts.validate()?;
    check_grid(p, grid)?;
    let d = p.d;
    if d < 2 {
        return Err(Error::Precondition("semitrivial level needs d >= 2".into()));
    }
    let subsets: Vec<Vec<usize>> = (0..d)
        .rev()
        .map(|k| (0..d).filter(|&i| i != k).collect())
        .collect();
    let per_subset = subsets
        .par_iter()
        .map(|s| minimize_restricted(p, grid, s, opts, None).map(|r| (s.clone(), r)))
        .collect::<Result<Vec<_>>>()?;
    let level = per_subset
        .iter()
        .map(|(_, r)| r.level)
        .fold(f64::INFINITY, f64::min);
    let best_subset = per_subset
        .iter()
        .find(|(_, r)| tied(r.level, level))
        .map(|(s, _)| s.clone())
        .expect("at least one subset");
    Ok(SemitrivialLevel {
        level,
        best_subset,
        per_subset,
    })
}

/// Ground state together with the semitrivial data it was seeded from.
pub(crate) fn ground_state_with_semitrivial(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    opts: &SolverOptions,
) -> Result<(GroundStateResult, Option<SemitrivialLevel>)> {
    p.validate()?;
    opts.validate()?;
    check_grid(p, grid)?;
    let full: Vec<usize> = (0..p.d).collect();
    if p.d == 1 {
        return Ok((minimize_restricted(p, grid, &full, opts, None)?, None));
    }
    let semi = semitrivial_level(p, grid, opts)?;
    let mut starts = restricted_inventory(p, grid, &full, opts);
    for (_, r) in &semi.per_subset {
        let mut m = r.fields.clone();
        for k in 0..p.d {
            if m.component(k).is_zero() {
                m.components_mut()[k] =
                    Field::soliton(grid, p.lambda[k], p.mu[k]).scaled(opts.perturbation);
            }
        }
        starts.push(m);
    }
    let mut results = run_all(p, grid, &full, opts, &starts);
    // The semitrivial minimizers are themselves critical points of the full
    // system and compete for the lowest level.
    for (_, r) in &semi.per_subset {
        let mut r = r.clone();
        r.starts_used = 0;
        results.push(r);
    }
    Ok((merge(results)?, Some(semi)))
}

/// Multistart approximation of the ground state of the full system: the
/// restricted inventory on all indices, each semitrivial minimizer with a
/// small soliton added in its empty slots, and the semitrivial minimizers
/// themselves. The level is an upper approximation of `c`.
pub fn ground_state(
    p: &ParameterSet,
    grid: &Arc<RadialGrid>,
    opts: &SolverOptions,
) -> Result<GroundStateResult> {
    ground_state_with_semitrivial(p, grid, opts).map(|(r, _)| r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub missing: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `‖w‖²_{λ_{i₀}} < Σ_i b_{i,i₀} |u_i w|₂²` for the empty slot `missing` of
/// `fields`. When it holds, `(u, θw)` rescaled onto 𝒩 lies strictly below
/// the level of `u` for small θ > 0.
pub fn certificate_for_slot(
    p: &ParameterSet,
    fields: &MultiField,
    missing: usize,
    w: &Field,
) -> Result<CertificateReport> {
    check_dims(fields, p)?;
    if missing >= p.d {
        return Err(Error::Precondition(format!("slot {missing} out of range")));
    }
    if !fields.component(missing).is_zero() {
        return Err(Error::Precondition(format!(
            "component {missing} is not empty"
        )));
    }
    if w.is_zero() {
        return Err(Error::Precondition("perturbation w must be nonzero".into()));
    }
    let grid = fields.grid();
    let lhs = grid.h1_lambda_sq(w, p.lambda[missing])?;
    let mut rhs = 0.0;
    for i in (0..p.d).filter(|&i| i != missing) {
        rhs += p.b[i][missing] * grid.mixed_l2(fields.component(i), w)?;
    }
    Ok(CertificateReport {
        missing,
        lhs,
        rhs,
        holds: lhs < rhs,
    })
}

/// Certificate for a semitrivial result with exactly one empty component.
pub fn perturbation_certificate(
    p: &ParameterSet,
    semi: &GroundStateResult,
    w: &Field,
) -> Result<CertificateReport> {
    let missing: Vec<usize> = (0..p.d).filter(|k| !semi.support.contains(k)).collect();
    if missing.len() != 1 {
        return Err(Error::Precondition(format!(
            "certificate needs exactly one missing component, found {}",
            missing.len()
        )));
    }
    certificate_for_slot(p, &semi.fields, missing[0], w)
}
