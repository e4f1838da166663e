//! Merging components with equal λ.
//!
//! If `b_ij ≡ b` and `λ_i` agree on a group of k indices, the group behaves
//! like a single equation whose self-interaction is the maximum of
//!
//! ```text
//! f(X) = Σ_{i≠j} b x_i² x_j² + Σ μ_i x_i⁴
//! ```
//!
//! over the unit sphere of ℝᵏ. Ground states of the full system are
//! `(X u, rest)` with `X` a maximizer and `(u, rest)` a ground state of the
//! reduced system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, MultiField};
use crate::params::{approx_eq, ParameterSet, DEFAULT_EQ_TOL};
use crate::solver::GroundStateResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Vertex,
    Interior,
    Face,
}

/// The full maximizer set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaximizerSet {
    /// `{±e_i : i ∈ indices}`.
    Vertices { indices: Vec<usize> },
    /// All `2^k` sign patterns `(±m_1, …, ±m_k)`.
    SignOrbit { magnitudes: Vec<f64>, count: u64 },
    /// The unit sphere of the coordinates in `indices`, other coordinates zero.
    FaceSphere { indices: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereMaxResult {
    pub f_max: f64,
    pub regime: Regime,
    #[serde(rename = "X_repr")]
    pub x_repr: Vec<f64>,
    #[serde(rename = "X_description")]
    pub x_description: MaximizerSet,
}

fn check_k(mu: &[f64]) -> Result<()> {
    if mu.len() < 2 {
        return Err(Error::Precondition(format!(
            "sphere maximization needs k >= 2, got k = {}",
            mu.len()
        )));
    }
    Ok(())
}

pub fn f_eval(x: &[f64], mu: &[f64], b: f64) -> Result<f64> {
    check_k(mu)?;
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: x.len(),
        });
    }
    let z: Vec<f64> = x.iter().map(|v| v * v).collect();
    Ok(f_on_simplex(&z, mu, b))
}

/// `f` as a function of `z_i = x_i²`.
fn f_on_simplex(z: &[f64], mu: &[f64], b: f64) -> f64 {
    let s: f64 = z.iter().sum();
    let sq: f64 = z.iter().map(|v| v * v).sum();
    let own: f64 = z.iter().zip(mu).map(|(v, m)| m * v * v).sum();
    b * (s * s - sq) + own
}

pub fn sphere_max(mu: &[f64], b: f64) -> Result<SphereMaxResult> {
    check_k(mu)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Precondition(format!("b must be positive, got {b}")));
    }
    if let Some(m) = mu.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(Error::Precondition(format!(
            "mu entries must be nonnegative, got {m}"
        )));
    }
    let k = mu.len();
    let mu_max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if approx_eq(mu_max, b, DEFAULT_EQ_TOL) {
        let indices: Vec<usize> = (0..k)
            .filter(|&i| approx_eq(mu[i], b, DEFAULT_EQ_TOL))
            .collect();
        let c = 1.0 / (indices.len() as f64).sqrt();
        let mut x = vec![0.0; k];
        indices.iter().for_each(|&i| x[i] = c);
        return Ok(SphereMaxResult {
            f_max: b,
            regime: Regime::Face,
            x_repr: x,
            x_description: MaximizerSet::FaceSphere { indices },
        });
    }
    if mu_max > b {
        let indices: Vec<usize> = (0..k).filter(|&i| mu[i] == mu_max).collect();
        let mut x = vec![0.0; k];
        x[indices[0]] = 1.0;
        return Ok(SphereMaxResult {
            f_max: mu_max,
            regime: Regime::Vertex,
            x_repr: x,
            x_description: MaximizerSet::Vertices { indices },
        });
    }
    let inv: f64 = mu.iter().map(|m| 1.0 / (b - m)).sum();
    let f_max = b - 1.0 / inv;
    let mut x: Vec<f64> = mu.iter().map(|m| ((b - f_max) / (b - m)).sqrt()).collect();
    // remove the last ulp of drift from |x| = 1
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    Ok(SphereMaxResult {
        f_max,
        regime: Regime::Interior,
        x_repr: x.clone(),
        x_description: MaximizerSet::SignOrbit {
            magnitudes: x,
            count: 1u64 << k.min(63),
        },
    })
}

pub const BRUTE_FORCE_MAX_K: usize = 4;

/// Maximum of `f` over the lattice `z = n / resolution`, `Σ n_i = resolution`.
pub fn brute_force_sphere_max(mu: &[f64], b: f64, resolution: usize) -> Result<f64> {
    check_k(mu)?;
    let k = mu.len();
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::Precondition(format!(
            "brute force is limited to k <= {BRUTE_FORCE_MAX_K}, got {k}"
        )));
    }
    if resolution < 50 {
        return Err(Error::Precondition(format!(
            "resolution must be at least 50, got {resolution}"
        )));
    }
    let m = resolution as f64;
    let mut best = f64::NEG_INFINITY;
    // Odometer over the first k−1 counts; the last takes what is left.
    let mut counts = vec![0usize; k - 1];
    let mut z = vec![0.0; k];
    'lattice: loop {
        let used: usize = counts.iter().sum();
        for (zi, &c) in z.iter_mut().zip(&counts) {
            *zi = c as f64 / m;
        }
        z[k - 1] = (resolution - used) as f64 / m;
        best = best.max(f_on_simplex(&z, mu, b));
        for s in 0..k - 1 {
            counts[s] += 1;
            if counts.iter().sum::<usize>() <= resolution {
                continue 'lattice;
            }
            counts[s] = 0;
        }
        break;
    }
    Ok(best)
}

/// How the reduced system's components map back to the full system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionMapping {
    pub full_d: usize,
    /// The merged indices (0-based, sorted).
    pub group: Vec<usize>,
    /// Position of the merged equation in the reduced system.
    pub merged_index: usize,
    /// Full index of each reduced component; the merged one maps to `group[0]`.
    pub retained: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub reduced: ParameterSet,
    pub mapping: ReductionMapping,
    pub sphere: SphereMaxResult,
}

/// Replaces the equations in `group` by one equation with self-interaction
/// `f_max(μ_group, b)`. Requires constant couplings and equal λ on the group.
pub fn reduce_system(p: &ParameterSet, group: &[usize]) -> Result<Reduction> {
    p.validate()?;
    let mut group = group.to_vec();
    group.sort_unstable();
    group.dedup();
    if group.len() < 2 {
        return Err(Error::Precondition(
            "group must contain at least two indices".into(),
        ));
    }
    if let Some(&k) = group.iter().find(|&&k| k >= p.d) {
        return Err(Error::Precondition(format!(
            "group index {k} out of range for d = {}",
            p.d
        )));
    }
    let b = p.constant_coupling(DEFAULT_EQ_TOL).ok_or_else(|| {
        Error::Precondition("reduction requires constant couplings b_ij = b for all i != j".into())
    })?;
    let lambda0 = p.lambda[group[0]];
    if let Some(&k) = group
        .iter()
        .find(|&&k| !approx_eq(p.lambda[k], lambda0, DEFAULT_EQ_TOL))
    {
        return Err(Error::Precondition(format!(
            "lambda must be equal on the group: lambda[{}] = {} but lambda[{k}] = {}",
            group[0], lambda0, p.lambda[k]
        )));
    }
    let mu_group: Vec<f64> = group.iter().map(|&k| p.mu[k]).collect();
    let sphere = sphere_max(&mu_group, b)?;

    let retained: Vec<usize> = (0..p.d)
        .filter(|k| !group.contains(k) || *k == group[0])
        .collect();
    let merged_index = retained
        .iter()
        .position(|&k| k == group[0])
        .expect("group head kept");
    let lambda = retained.iter().map(|&k| p.lambda[k]).collect();
    let mu = retained
        .iter()
        .map(|&k| if k == group[0] { sphere.f_max } else { p.mu[k] })
        .collect();
    let reduced = ParameterSet::uniform(p.dim, lambda, mu, b);
    Ok(Reduction {
        reduced,
        mapping: ReductionMapping {
            full_d: p.d,
            group,
            merged_index,
            retained,
        },
        sphere,
    })
}

/// Expands a reduced ground state to the full system: the merged component
/// `u` becomes `(X_repr)_i · u` on each group index.
pub fn lift_ground_state(
    reduced_result: &GroundStateResult,
    sphere: &SphereMaxResult,
    mapping: &ReductionMapping,
) -> Result<MultiField> {
    let fields = &reduced_result.fields;
    if fields.d() != mapping.retained.len() {
        return Err(Error::DimensionMismatch {
            expected: mapping.retained.len(),
            found: fields.d(),
        });
    }
    if sphere.x_repr.len() != mapping.group.len() {
        return Err(Error::DimensionMismatch {
            expected: mapping.group.len(),
            found: sphere.x_repr.len(),
        });
    }
    let grid = fields.grid().clone();
    let mut out = vec![Field::zeros(&grid); mapping.full_d];
    for (r, &k) in mapping.retained.iter().enumerate() {
        if r == mapping.merged_index {
            for (&g, &x) in mapping.group.iter().zip(&sphere.x_repr) {
                out[g] = fields.component(r).scaled(x);
            }
        } else {
            out[k] = fields.component(r).clone();
        }
    }
    MultiField::new(grid, out)
}
