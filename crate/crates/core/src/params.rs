//! Problem parameters and the closed-form hypotheses on them.
//!
//! The system is
//!
//! ```text
//! -Δu_i + λ_i u_i = μ_i u_i³ + u_i Σ_{j≠i} b_ij u_j²,   i = 1..d,  x ∈ ℝᴺ
//! ```
//!
//! Everything here is a pure function of the parameters. None of the
//! predicates can decide the ground-state structure on their own, since the
//! existence results only hold for `b` beyond a non-explicit constant; they
//! report whether the shape hypotheses on λ, μ and B hold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for "equal λ" and "constant B" checks.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

/// The full problem datum: d, N, λ, μ and the coupling matrix B.
///
/// The diagonal of `b` is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub d: usize,
    #[serde(rename = "N")]
    pub dim: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

impl ParameterSet {
    /// Parameter set with every off-diagonal coupling equal to `b`.
    pub fn uniform(dim: usize, lambda: Vec<f64>, mu: Vec<f64>, b: f64) -> Self {
        let d = lambda.len();
        let b = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 0.0 } else { b }).collect())
            .collect();
        ParameterSet {
            d,
            dim,
            lambda,
            mu,
            b,
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.b[i][j]
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 1 {
            return Err(Error::Validation("d must be at least 1".into()));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Validation(format!(
                "spatial dimension N = {} outside {{1, 2, 3}}",
                self.dim
            )));
        }
        if self.lambda.len() != d || self.mu.len() != d {
            return Err(Error::Validation(format!(
                "lambda and mu must have length d = {d} (got {} and {})",
                self.lambda.len(),
                self.mu.len()
            )));
        }
        if self.b.len() != d || self.b.iter().any(|row| row.len() != d) {
            return Err(Error::Validation(format!("b must be a {d}x{d} matrix")));
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Validation(format!(
                    "positivity violated: lambda[{i}] = {l}"
                )));
            }
        }
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Validation(format!(
                    "positivity violated: mu[{i}] = {m}"
                )));
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let (bij, bji) = (self.b[i][j], self.b[j][i]);
                if bij != bji {
                    return Err(Error::Validation(format!(
                        "symmetry violated: b[{i}][{j}] = {bij} but b[{j}][{i}] = {bji}"
                    )));
                }
                if !(bij.is_finite() && bij > 0.0) {
                    return Err(Error::Validation(format!(
                        "positivity violated: b[{i}][{j}] = {bij} (couplings must be cooperative)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The common off-diagonal coupling, if all entries agree within `tol`.
    pub fn constant_coupling(&self, tol: f64) -> Option<f64> {
        if self.d < 2 {
            return None;
        }
        let b0 = self.b[0][1];
        let all_equal = (0..self.d)
            .flat_map(|i| (0..self.d).filter(move |&j| j != i).map(move |j| (i, j)))
            .all(|(i, j)| approx_eq(self.b[i][j], b0, tol));
        all_equal.then_some(b0)
    }

    /// Relabels the equations: component `k` of the result is component
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> ParameterSet {
        ParameterSet {
            d: self.d,
            dim: self.dim,
            lambda: perm.iter().map(|&k| self.lambda[k]).collect(),
            mu: perm.iter().map(|&k| self.mu[k]).collect(),
            b: perm
                .iter()
                .map(|&i| perm.iter().map(|&j| self.b[i][j]).collect())
                .collect(),
        }
    }
}

/// Returns `p` unchanged when every invariant holds.
pub fn validate(p: ParameterSet) -> Result<ParameterSet> {
    p.validate()?;
    Ok(p)
}

pub(crate) fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Membership in 𝒜_α: `max a_i < α · min a_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub alpha: f64,
    pub ratio: f64,
    pub admissible: bool,
}

pub fn is_alpha_admissible(a: &[f64], alpha: f64) -> Result<AdmissibilityReport> {
    if a.len() < 2 {
        return Err(Error::Precondition(format!(
            "admissibility needs at least two entries, got {}",
            a.len()
        )));
    }
    if let Some(x) = a.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Precondition(format!(
            "admissibility needs positive entries, got {x}"
        )));
    }
    if !(alpha > 1.0) {
        return Err(Error::Precondition(format!(
            "alpha must exceed 1, got {alpha}"
        )));
    }
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AdmissibilityReport {
        alpha,
        ratio: max / min,
        admissible: max < alpha * min,
    })
}

fn rho(k: usize) -> f64 {
    (k as f64 - 2.0) / (k as f64 - 1.0)
}

/// Admissibility threshold for the tail `(λ_2, …, λ_d)` given `ω = λ_2/λ_1 ≥ 1`.
pub fn alpha_threshold(omega: f64, d: usize, dim: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Precondition(format!(
            "alpha threshold needs d >= 3, got {d}"
        )));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::Precondition(format!(
            "N = {dim} outside {{1, 2, 3}}"
        )));
    }
    if !(omega >= 1.0) || !omega.is_finite() {
        return Err(Error::Precondition(format!(
            "omega = lambda_2 / lambda_1 must be >= 1, got {omega}"
        )));
    }
    let (rd, rd1) = (rho(d), rho(d - 1));
    let w2 = omega * omega;
    let l4_ratio = (2.0 * w2 * ((rd1 + omega).powi(2) + w2) / (rd1 + 2.0 * omega).powi(2)).sqrt();
    let base = 1.0 - (rd - rd1) / (l4_ratio + rd);
    Ok(base.powf(-2.0 / (4.0 - dim as f64)))
}

/// Below this uniform coupling no ground state is fully nontrivial.
pub fn small_b_bound(mu: &[f64]) -> Result<f64> {
    let d = mu.len();
    if d < 2 {
        return Err(Error::Precondition(format!(
            "small-b bound needs d >= 2, got {d}"
        )));
    }
    let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(2f64.powf(1.0 - d as f64 / 2.0) * (min * max).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub alpha_gap: f64,
    pub spread: f64,
    pub holds: bool,
}

/// Spread condition on non-constant couplings with all λ equal.
pub fn beta_spread_condition(p: &ParameterSet, eq_tol: f64) -> Result<SpreadReport> {
    p.validate()?;
    let d = p.d;
    if d < 3 {
        return Err(Error::Precondition(format!(
            "spread condition needs d >= 3, got {d}"
        )));
    }
    let l0 = p.lambda[0];
    if let Some(l) = p.lambda.iter().find(|&&l| !approx_eq(l, l0, eq_tol)) {
        return Err(Error::Precondition(format!(
            "spread condition requires lambda_1 = ... = lambda_d (found {l0} and {l})"
        )));
    }
    let alpha_gap = (0..d)
        .map(|i| {
            let min_b = (0..d)
                .filter(|&j| j != i)
                .map(|j| p.b[i][j])
                .fold(f64::INFINITY, f64::min);
            min_b - p.mu[i]
        })
        .fold(f64::INFINITY, f64::min);
    let mut spread = 0.0f64;
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            for k in (0..d).filter(|&k| k != i && k != j) {
                spread = spread.max((p.b[i][j] - p.b[i][k]).abs());
            }
        }
    }
    Ok(SpreadReport {
        alpha_gap,
        spread,
        holds: alpha_gap > 0.0 && spread < alpha_gap / (d as f64 - 2.0),
    })
}

/// `(λ_1, …, λ_d) ∈ 𝒜_{1 + 1/(d-2)}`.
pub fn theorem13_condition(lambda: &[f64]) -> Result<AdmissibilityReport> {
    let d = lambda.len();
    if d < 3 {
        return Err(Error::Precondition(format!(
            "condition needs d >= 3, got {d}"
        )));
    }
    is_alpha_admissible(lambda, 1.0 + 1.0 / (d as f64 - 2.0))
}

/// `(λ_2, …, λ_d) ∈ 𝒜_α` with `α = alpha_threshold(λ_2/λ_1, d, N)`.
/// `lambda` must be sorted in nondecreasing order.
pub fn theorem12_condition(lambda: &[f64], dim: usize) -> Result<AdmissibilityReport> {
    let d = lambda.len();
    if d < 3 {
        return Err(Error::Precondition(format!(
            "condition needs d >= 3, got {d}"
        )));
    }
    if lambda.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition(
            "lambda must be sorted in nondecreasing order".into(),
        ));
    }
    if !(lambda[0] > 0.0) {
        return Err(Error::Precondition("lambda must be positive".into()));
    }
    let alpha = alpha_threshold(lambda[1] / lambda[0], d, dim)?;
    is_alpha_admissible(&lambda[1..], alpha)
}
