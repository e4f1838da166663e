//! Radial discretization of H¹(ℝᴺ) for N ∈ {1, 2, 3}.
//!
//! Nodes are `r_j = j h`, `j = 0..=n`, `h = R / n`, with a Dirichlet condition
//! at `r = R` and even symmetry at the axis. The scheme is conservative: node
//! `j` owns the dual cell `[r_j - h/2, r_j + h/2] ∩ [0, R]` and its quadrature
//! weight is the exact ℝᴺ volume of that shell, so the weights sum to the
//! volume of the ball. Fluxes live on the faces `r_{j+1/2}`.
//!
//! The discrete Dirichlet form is
//!
//! ```text
//! Σ_j a_{j+1/2} (u_{j+1} - u_j)²,   a_{j+1/2} = s_N r_{j+1/2}^{N-1} / h
//! ```
//!
//! and `apply_neg_laplacian_plus` is exactly its gradient in the weighted
//! pairing `⟨u, v⟩ = Σ w_j u_j v_j`, so `⟨(-Δ_h + λ)u, u⟩ = ‖u‖²_λ` holds to
//! rounding. For N = 1 the half-line carries `s_1 = 2`, so every integral is
//! the whole-line integral of the even extension.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface measure of the unit sphere in ℝᴺ (s_1 counts both half-lines).
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// Volume of the ball of radius `r` in ℝᴺ.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    intervals: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Face coefficients `a_{j+1/2}`, `j = 0..n`.
    faces: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: usize, radius: f64, intervals: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Validation(format!("N = {dim} outside {{1, 2, 3}}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Validation(format!(
                "grid radius must be positive, got {radius}"
            )));
        }
        if intervals < 2 {
            return Err(Error::Validation(format!(
                "grid needs at least 2 intervals, got {intervals}"
            )));
        }
        let h = radius / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|j| j as f64 * h).collect();
        let shell = |lo: f64, hi: f64| ball_volume(dim, hi) - ball_volume(dim, lo);
        let weights = nodes
            .iter()
            .map(|&r| shell((r - 0.5 * h).max(0.0), (r + 0.5 * h).min(radius)))
            .collect();
        let s = sphere_area(dim);
        let faces = (0..intervals)
            .map(|j| s * ((j as f64 + 0.5) * h).powi(dim as i32 - 1) / h)
            .collect();
        Ok(RadialGrid {
            dim,
            radius,
            intervals,
            h,
            nodes,
            weights,
            faces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of intervals `n`; there are `n + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Multiplies every quadrature weight by `factor`. Only meant for fault
    /// injection in the self-test harness.
    #[doc(hidden)]
    pub fn corrupt_weights(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Relative deviation of Σ w_j from the volume of the ball of radius R.
    pub fn volume_defect(&self) -> f64 {
        let exact = ball_volume(self.dim, self.radius);
        (self.total_weight() - exact).abs() / exact
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            dim: self.dim,
            radius: self.radius,
            intervals: self.intervals,
        }
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Weighted pairing `Σ w_j u_j v_j`.
    pub(crate) fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Discrete `∫|∇u|²`.
    pub(crate) fn dirichlet(&self, u: &[f64]) -> f64 {
        self.faces
            .iter()
            .zip(u.windows(2))
            .map(|(a, pair)| {
                let du = pair[1] - pair[0];
                a * du * du
            })
            .sum()
    }

    pub(crate) fn h1_raw(&self, u: &[f64], lambda: f64) -> f64 {
        self.dirichlet(u) + lambda * self.dot(u, u)
    }

    /// Writes `(-Δ_h + λ)u` into `out`; the Dirichlet node is left at zero.
    pub(crate) fn apply_raw(&self, u: &[f64], lambda: f64, out: &mut [f64]) {
        let n = self.intervals;
        for j in 0..n {
            let mut flux = 0.0;
            if j > 0 {
                flux += self.faces[j - 1] * (u[j] - u[j - 1]);
            }
            flux += self.faces[j] * (u[j] - u[j + 1]);
            out[j] = flux / self.weights[j] + lambda * u[j];
        }
        out[n] = 0.0;
    }

    /// Solves `(-Δ_h + λ) x = g` with `x_n = 0` (Thomas algorithm on the
    /// symmetric form `M x = W g`). Requires `λ > 0`.
    pub(crate) fn solve_shifted(&self, lambda: f64, g: &[f64], x: &mut [f64], scratch: &mut [f64]) {
        let n = self.intervals;
        let a = &self.faces;
        let w = &self.weights;
        // forward sweep: scratch holds the modified super-diagonal
        let mut prev_c = 0.0;
        let mut prev_x = 0.0;
        for j in 0..n {
            let left = if j > 0 { a[j - 1] } else { 0.0 };
            let diag = left + a[j] + lambda * w[j];
            let sub = -left;
            let denom = diag - sub * prev_c;
            let c = -a[j] / denom;
            let rhs = (w[j] * g[j] - sub * prev_x) / denom;
            scratch[j] = c;
            x[j] = rhs;
            prev_c = c;
            prev_x = rhs;
        }
        x[n] = 0.0;
        for j in (0..n.saturating_sub(1)).rev() {
            x[j] -= scratch[j] * x[j + 1];
        }
    }

    /// `‖u‖²_λ = ∫|∇u|² + λ∫u²`.
    pub fn h1_lambda_sq(&self, u: &Field, lambda: f64) -> Result<f64> {
        self.check(u)?;
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(self.h1_raw(u.values(), lambda))
    }

    /// `|u|₄⁴`.
    pub fn l4_quartic(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self
            .weights
            .iter()
            .zip(u.values())
            .map(|(w, x)| w * (x * x) * (x * x))
            .sum())
    }

    /// `|uv|₂²`.
    pub fn mixed_l2(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self
            .weights
            .iter()
            .zip(u.values().iter().zip(v.values()))
            .map(|(w, (a, b))| w * (a * b) * (a * b))
            .sum())
    }

    /// `(-Δ + λ)u` for the radial Laplacian in dimension N.
    pub fn apply_neg_laplacian_plus(&self, u: &Field, lambda: f64) -> Result<Field> {
        self.check(u)?;
        let mut out = vec![0.0; self.len()];
        self.apply_raw(u.values(), lambda, &mut out);
        Ok(Field { values: out })
    }
}

/// What is needed to rebuild a grid: (N, R, n).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub intervals: usize,
}

impl GridMetadata {
    pub fn build(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.dim, self.radius, self.intervals)
    }
}

/// Grid configuration; `radius = None` picks `20 / √(min λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "R", default, with = "auto_radius")]
    pub radius: Option<f64>,
    #[serde(default = "GridSpec::default_intervals")]
    pub n: usize,
}

/// `"R": "auto"` (or null / absent) selects the automatic radius.
mod auto_radius {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Keyword(String),
    }

    pub fn serialize<S: Serializer>(r: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(v) => Repr::Value(*v),
            None => Repr::Keyword("auto".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Value(v)) => Ok(Some(v)),
            Some(Repr::Keyword(k)) if k == "auto" => Ok(None),
            Some(Repr::Keyword(k)) => Err(serde::de::Error::custom(format!(
                "R must be a number or \"auto\", got {k:?}"
            ))),
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radius: None,
            n: Self::default_intervals(),
        }
    }
}

impl GridSpec {
    pub const AUTO_RADIUS_SCALE: f64 = 20.0;

    fn default_intervals() -> usize {
        4000
    }

    pub fn resolve_radius(&self, lambda: &[f64]) -> f64 {
        self.radius.unwrap_or_else(|| {
            let lmin = lambda.iter().copied().fold(f64::INFINITY, f64::min);
            Self::AUTO_RADIUS_SCALE / lmin.sqrt()
        })
    }

    pub fn build(&self, dim: usize, lambda: &[f64]) -> Result<RadialGrid> {
        RadialGrid::new(dim, self.resolve_radius(lambda), self.n)
    }
}

/// One radial profile on the grid nodes; the last value is the Dirichlet zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &RadialGrid) -> Self {
        Field {
            values: vec![0.0; grid.len()],
        }
    }

    /// Wraps raw node values; rejects non-finite entries and a nonzero
    /// boundary value.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("field value {x} is not finite")));
        }
        if values.len() < 3 {
            return Err(Error::Validation("field needs at least 3 nodes".into()));
        }
        if *values.last().unwrap() != 0.0 {
            return Err(Error::Validation("field must vanish at r = R".into()));
        }
        Ok(Field { values })
    }

    /// Samples `f` at the nodes and pins the boundary value to zero.
    pub fn sample(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        *values.last_mut().unwrap() = 0.0;
        Field { values }
    }

    /// Exact single-equation soliton `√(2λ/μ) sech(√λ r)` in N = 1; used as a
    /// generic positive, decaying profile in every dimension.
    pub fn soliton(grid: &RadialGrid, lambda: f64, mu: f64) -> Self {
        let amp = (2.0 * lambda / mu).sqrt();
        let k = lambda.sqrt();
        Field::sample(grid, |r| amp / (k * r).cosh())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            values: self.values.iter().map(|x| c * x).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// `u = (u_1, …, u_d)` on one shared grid.
#[derive(Clone, Debug)]
pub struct MultiField {
    grid: Arc<RadialGrid>,
    components: Vec<Field>,
}

impl MultiField {
    pub fn new(grid: Arc<RadialGrid>, components: Vec<Field>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation(
                "a MultiField needs at least one component".into(),
            ));
        }
        for c in &components {
            grid.check(c)?;
        }
        Ok(MultiField { grid, components })
    }

    pub fn zeros(grid: Arc<RadialGrid>, d: usize) -> Self {
        let components = (0..d).map(|_| Field::zeros(&grid)).collect();
        MultiField { grid, components }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Field] {
        &mut self.components
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn scaled(&self, c: f64) -> MultiField {
        MultiField {
            grid: self.grid.clone(),
            components: self.components.iter().map(|f| f.scaled(c)).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.components
            .iter()
            .all(|f| f.values().iter().all(|&x| x >= 0.0))
    }

    /// CSV with columns `r, u1, …, ud`, '\n' line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r");
        for i in 1..=self.d() {
            out.push_str(&format!(",u{i}"));
        }
        out.push('\n');
        for (j, r) in self.grid.nodes().iter().enumerate() {
            out.push_str(&format_float(*r));
            for c in &self.components {
                out.push(',');
                out.push_str(&format_float(c.values()[j]));
            }
            out.push('\n');
        }
        out
    }
}

/// Locale-independent float formatting that round-trips.
pub(crate) fn format_float(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sech_grid(n: usize) -> (RadialGrid, Field) {
        let g = RadialGrid::new(1, 20.0, n).unwrap();
        let u = Field::soliton(&g, 1.0, 1.0);
        (g, u)
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        for dim in 1..=3 {
            for &n in &[2, 7, 100, 4000] {
                let g = RadialGrid::new(dim, 3.7, n).unwrap();
                assert!(
                    g.volume_defect() < 1e-10,
                    "N={dim} n={n}: {}",
                    g.volume_defect()
                );
                assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            }
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(RadialGrid::new(0, 1.0, 10).is_err());
        assert!(RadialGrid::new(4, 1.0, 10).is_err());
        assert!(RadialGrid::new(1, -1.0, 10).is_err());
        assert!(RadialGrid::new(1, 1.0, 1).is_err());
    }

    #[test]
    fn field_invariants() {
        assert!(Field::from_values(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(Field::from_values(vec![1.0, 0.5, 0.1]).is_err());
        assert!(Field::from_values(vec![f64::NAN, 0.5, 0.0]).is_err());
    }

    #[test]
    fn zero_field_norms() {
        let g = RadialGrid::new(2, 5.0, 50).unwrap();
        let z = Field::zeros(&g);
        assert_eq!(g.h1_lambda_sq(&z, 1.0).unwrap(), 0.0);
        assert_eq!(g.l4_quartic(&z).unwrap(), 0.0);
        assert_eq!(g.mixed_l2(&z, &z).unwrap(), 0.0);
        assert!(g.apply_neg_laplacian_plus(&z, 1.0).unwrap().is_zero());
        assert!(g.h1_lambda_sq(&z, 0.0).is_err());
    }

    #[test]
    fn sech_soliton_norms() {
        let (g, u) = sech_grid(4000);
        let h1 = g.h1_lambda_sq(&u, 1.0).unwrap();
        let l4 = g.l4_quartic(&u).unwrap();
        let exact = 16.0 / 3.0;
        assert!((h1 - exact).abs() / exact < 1e-3, "{h1}");
        assert!((l4 - exact).abs() / exact < 1e-3, "{l4}");
        assert!((g.mixed_l2(&u, &u).unwrap() - l4).abs() <= 1e-14 * l4);
    }

    #[test]
    fn mismatched_grids_error() {
        let g1 = RadialGrid::new(1, 5.0, 50).unwrap();
        let g2 = RadialGrid::new(1, 5.0, 60).unwrap();
        let u = Field::soliton(&g1, 1.0, 1.0);
        let v = Field::soliton(&g2, 1.0, 1.0);
        assert!(g1.mixed_l2(&u, &v).is_err());
        assert!(g2.l4_quartic(&u).is_err());
    }

    #[test]
    fn h1_refinement_is_second_order() {
        let exact = 16.0 / 3.0;
        let errs: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&n| {
                let (g, u) = sech_grid(n);
                (g.h1_lambda_sq(&u, 1.0).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn l4_refinement_is_second_order_in_3d() {
        // ∫_{ℝ³} e^{-2r²} dx = (π/2)^{3/2}; the dual-cell rule is O(h²) here,
        // whereas for the even N = 1 extension it is spectrally accurate.
        let exact = (PI / 2.0).powf(1.5);
        let errs: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let g = RadialGrid::new(3, 8.0, n).unwrap();
                let u = Field::sample(&g, |r| (-0.5 * r * r).exp());
                (g.l4_quartic(&u).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn soliton_residual_is_second_order() {
        // For the exact soliton the residual is the truncation error of the
        // three-point stencil, h² u''''/12; at r = 0 that is h²·5√2/12.
        let mut prev = None;
        for &n in &[1000, 2000, 4000] {
            let (g, u) = sech_grid(n);
            let lu = g.apply_neg_laplacian_plus(&u, 1.0).unwrap();
            let res = lu
                .values()
                .iter()
                .zip(u.values())
                .take(g.intervals() - 1)
                .map(|(a, x)| (a - x * x * x).abs())
                .fold(0.0f64, f64::max);
            let h = g.spacing();
            let bound = h * h * 5.0 * 2f64.sqrt() / 12.0;
            assert!(res <= 1.05 * bound, "n={n}: {res} vs {bound}");
            if let Some(p) = prev {
                let ratio: f64 = p / res;
                assert!((3.5..=4.5).contains(&ratio));
            }
            prev = Some(res);
        }
    }

    #[test]
    fn ball_eigenfunction_3d() {
        let big_r = 5.0;
        let k = PI / big_r;
        let mut prev = None;
        for &n in &[200, 400, 800] {
            let g = RadialGrid::new(3, big_r, n).unwrap();
            let u = Field::sample(&g, |r| if r == 0.0 { k } else { (k * r).sin() / r });
            let lu = g.apply_neg_laplacian_plus(&u, 0.0).unwrap();
            let err = lu
                .values()
                .iter()
                .zip(u.values())
                .map(|(a, x)| (a - k * k * x).abs())
                .fold(0.0f64, f64::max)
                / (k * k * u.sup_norm());
            let h = g.spacing();
            assert!(err < 2.0 * h * h, "n={n}: {err}");
            if let Some(p) = prev {
                let ratio: f64 = p / err;
                assert!((3.0..=5.0).contains(&ratio), "{ratio}");
            }
            prev = Some(err);
        }
    }

    #[test]
    fn bilinear_form_matches_h1() {
        for dim in 1..=3 {
            let g = RadialGrid::new(dim, 12.0, 4000).unwrap();
            let u = Field::sample(&g, |r| (-(r * r) / 3.0).exp() * (1.0 + 0.3 * r));
            let lu = g.apply_neg_laplacian_plus(&u, 0.7).unwrap();
            let form = g.dot(lu.values(), u.values());
            let h1 = g.h1_lambda_sq(&u, 0.7).unwrap();
            assert!((form - h1).abs() / h1 < 1e-6, "N={dim}");
        }
    }

    #[test]
    fn shifted_solve_inverts_operator() {
        for dim in 1..=3 {
            let g = RadialGrid::new(dim, 10.0, 300).unwrap();
            let u = Field::sample(&g, |r| (-r).exp() * (2.0 + (3.0 * r).sin()));
            let lu = g.apply_neg_laplacian_plus(&u, 1.3).unwrap();
            let mut x = vec![0.0; g.len()];
            let mut scratch = vec![0.0; g.len()];
            g.solve_shifted(1.3, lu.values(), &mut x, &mut scratch);
            let err = x
                .iter()
                .zip(u.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-10, "N={dim}: {err}");
        }
    }

    #[test]
    fn csv_layout() {
        let g = Arc::new(RadialGrid::new(1, 1.0, 4).unwrap());
        let m = MultiField::zeros(g, 2);
        let csv = m.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r,u1,u2"));
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }

    fn random_field(g: &RadialGrid, amps: &[f64]) -> Field {
        Field::sample(g, |r| {
            amps.iter()
                .enumerate()
                .map(|(k, a)| a * (-(r * r) / (1.0 + k as f64)).exp())
                .sum()
        })
    }

    proptest! {
        #[test]
        fn homogeneity(
            amps in prop::collection::vec(-2.0f64..2.0, 1..4),
            c in 0.1f64..10.0,
            dim in 1usize..=3,
        ) {
            let g = RadialGrid::new(dim, 8.0, 200).unwrap();
            let u = random_field(&g, &amps);
            let cu = u.scaled(c);
            let h = g.h1_lambda_sq(&u, 1.0).unwrap();
            let l4 = g.l4_quartic(&u).unwrap();
            prop_assert!((g.h1_lambda_sq(&cu, 1.0).unwrap() - c * c * h).abs() <= 1e-12 * c * c * h.max(1e-300));
            prop_assert!((g.l4_quartic(&cu).unwrap() - c.powi(4) * l4).abs() <= 1e-12 * c.powi(4) * l4.max(1e-300));
            let m = g.mixed_l2(&u, &u.scaled(0.5)).unwrap();
            let mc = g.mixed_l2(&cu, &u.scaled(0.5 * c)).unwrap();
            prop_assert!((mc - c.powi(4) * m).abs() <= 1e-12 * c.powi(4) * m.max(1e-300));
        }

        #[test]
        fn cauchy_schwarz(
            a in prop::collection::vec(-2.0f64..2.0, 1..4),
            b in prop::collection::vec(-2.0f64..2.0, 1..4),
            dim in 1usize..=3,
        ) {
            let g = RadialGrid::new(dim, 8.0, 200).unwrap();
            let u = random_field(&g, &a);
            let v = random_field(&g, &b);
            let lhs = g.mixed_l2(&u, &v).unwrap();
            let rhs = (g.l4_quartic(&u).unwrap() * g.l4_quartic(&v).unwrap()).sqrt();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn grid_spec_json() {
        let auto: GridSpec = serde_json::from_str(r#"{"R": "auto", "n": 500}"#).unwrap();
        assert_eq!(
            auto,
            GridSpec {
                radius: None,
                n: 500
            }
        );
        let absent: GridSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(absent, GridSpec::default());
        let fixed: GridSpec = serde_json::from_str(r#"{"R": 12.5}"#).unwrap();
        assert_eq!(fixed.radius, Some(12.5));
        assert!(serde_json::from_str::<GridSpec>(r#"{"R": "big"}"#).is_err());
        assert!(serde_json::from_str::<GridSpec>(r#"{"radius": 3}"#).is_err());
        let back: GridSpec = serde_json::from_str(&serde_json::to_string(&auto).unwrap()).unwrap();
        assert_eq!(back, auto);
        assert_eq!(auto.resolve_radius(&[4.0, 9.0]), 10.0);
    }
}
