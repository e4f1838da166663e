//! Action functional, Nehari residual and the closed-form Nehari rescaling.
//!
//! ```text
//! I(u) = ½ Σ‖u_i‖²_{λ_i} − ¼ Σ μ_i|u_i|₄⁴ − ½ Σ_{i<j} b_ij |u_i u_j|₂²
//! τ(u) = Σ‖u_i‖²_{λ_i} − Σ μ_i|u_i|₄⁴ − 2 Σ_{i<j} b_ij |u_i u_j|₂²
//! ```
//!
//! The quadratic part has degree 2 and the quartic part degree 4, so every
//! ray `s ↦ s·u` with positive quartic part meets the Nehari manifold exactly
//! once, at `t² = quadratic / quartic`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, MultiField, RadialGrid};
use crate::params::ParameterSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    /// Σ ‖u_i‖²_{λ_i}
    pub quadratic: f64,
    /// Σ μ_i |u_i|₄⁴
    pub quartic_self: f64,
    /// 2 Σ_{i<j} b_ij |u_i u_j|₂²
    pub quartic_cross: f64,
    pub action: f64,
    pub nehari_residual: f64,
}

impl ActionBreakdown {
    pub(crate) fn from_parts(quadratic: f64, quartic_self: f64, quartic_cross: f64) -> Self {
        ActionBreakdown {
            quadratic,
            quartic_self,
            quartic_cross,
            action: 0.5 * quadratic - 0.25 * quartic_self - 0.25 * quartic_cross,
            nehari_residual: quadratic - quartic_self - quartic_cross,
        }
    }

    pub fn quartic(&self) -> f64 {
        self.quartic_self + self.quartic_cross
    }
}

pub(crate) fn check_dims(u: &MultiField, p: &ParameterSet) -> Result<()> {
    if u.d() != p.d {
        return Err(Error::DimensionMismatch {
            expected: p.d,
            found: u.d(),
        });
    }
    if u.grid().dim() != p.dim {
        return Err(Error::Precondition(format!(
            "grid is {}-dimensional but parameters have N = {}",
            u.grid().dim(),
            p.dim
        )));
    }
    Ok(())
}

/// Raw evaluation on component slices.
pub(crate) fn breakdown_raw(grid: &RadialGrid, p: &ParameterSet, u: &[&[f64]]) -> ActionBreakdown {
    let d = u.len();
    let quadratic: f64 = (0..d).map(|i| grid.h1_raw(u[i], p.lambda[i])).sum();
    let w = grid.weights();
    let mut quartic_self = 0.0;
    let mut quartic_cross = 0.0;
    for j in 0..w.len() {
        let mut s = 0.0;
        let mut c = 0.0;
        for i in 0..d {
            let ui2 = u[i][j] * u[i][j];
            s += p.mu[i] * ui2 * ui2;
            for k in (i + 1)..d {
                c += p.b[i][k] * ui2 * u[k][j] * u[k][j];
            }
        }
        quartic_self += w[j] * s;
        quartic_cross += w[j] * c;
    }
    ActionBreakdown::from_parts(quadratic, quartic_self, 2.0 * quartic_cross)
}

/// Writes the L²-gradient `(-Δ + λ_i)u_i − μ_i u_i³ − u_i Σ_{j≠i} b_ij u_j²`
/// of component `i` into `out`.
pub(crate) fn gradient_component_raw(
    grid: &RadialGrid,
    p: &ParameterSet,
    u: &[&[f64]],
    i: usize,
    out: &mut [f64],
) {
    grid.apply_raw(u[i], p.lambda[i], out);
    let n = grid.intervals();
    for j in 0..n {
        let ui = u[i][j];
        let mut coupling = p.mu[i] * ui * ui;
        for (k, uk) in u.iter().enumerate() {
            if k != i {
                coupling += p.b[i][k] * uk[j] * uk[j];
            }
        }
        out[j] -= coupling * ui;
    }
}

fn slices(u: &MultiField) -> Vec<&[f64]> {
    u.components().iter().map(Field::values).collect()
}

pub fn action(u: &MultiField, p: &ParameterSet) -> Result<ActionBreakdown> {
    check_dims(u, p)?;
    Ok(breakdown_raw(u.grid(), p, &slices(u)))
}

pub(crate) fn scale_from(b: &ActionBreakdown) -> Result<f64> {
    if !(b.quadratic > 0.0) {
        return Err(Error::Degenerate("field is zero".into()));
    }
    let quartic = b.quartic();
    if !(quartic > 0.0) {
        return Err(Error::Degenerate("quartic part vanishes".into()));
    }
    Ok((b.quadratic / quartic).sqrt())
}

/// The unique `t > 0` with `τ(t·u) = 0`.
pub fn nehari_scale(u: &MultiField, p: &ParameterSet) -> Result<f64> {
    scale_from(&action(u, p)?)
}

/// `I(t·u)` at the Nehari scaling, `quadratic² / (4·quartic)`; invariant
/// under positive rescaling of `u`.
pub fn action_on_nehari(u: &MultiField, p: &ParameterSet) -> Result<f64> {
    let b = action(u, p)?;
    scale_from(&b)?;
    Ok(b.quadratic * b.quadratic / (4.0 * b.quartic()))
}

/// L²(w)-representative of `I'(u)`: `I'(u)[v] = ⟨grad, v⟩` with the grid
/// quadrature pairing.
pub fn action_gradient(u: &MultiField, p: &ParameterSet) -> Result<MultiField> {
    check_dims(u, p)?;
    let grid = u.grid().clone();
    let s = slices(u);
    let mut out = MultiField::zeros(grid.clone(), p.d);
    for i in 0..p.d {
        gradient_component_raw(&grid, p, &s, i, out.components_mut()[i].values_mut());
    }
    Ok(out)
}

/// Weighted pairing `Σ_i ⟨u_i, v_i⟩` of two fields on the same grid.
pub fn pairing(u: &MultiField, v: &MultiField) -> Result<f64> {
    if u.d() != v.d() {
        return Err(Error::DimensionMismatch {
            expected: u.d(),
            found: v.d(),
        });
    }
    if u.grid().len() != v.grid().len() {
        return Err(Error::DimensionMismatch {
            expected: u.grid().len(),
            found: v.grid().len(),
        });
    }
    Ok(u.components()
        .iter()
        .zip(v.components())
        .map(|(a, b)| u.grid().dot(a.values(), b.values()))
        .sum())
}
