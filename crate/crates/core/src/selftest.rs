//! The acceptance suite, shared by `cnls selftest` and the test harness.
//!
//! Every criterion is deterministic: random draws come from fixed seeds, and
//! the report text carries no timings.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::functional::{action, action_gradient, nehari_scale, pairing};
use crate::grid::{Field, GridSpec, MultiField, RadialGrid};
use crate::params::{small_b_bound, ParameterSet};
use crate::phase::{
    b_scaling_check, classify, monotonicity_check, scaling_check, PhaseOptions, Verdict,
};
use crate::reduction::{
    brute_force_sphere_max, lift_ground_state, reduce_system, sphere_max, Regime,
};
use crate::solver::{ground_state, minimize_restricted, perturbation_certificate, SolverOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct SelftestReport {
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    /// One line per criterion plus a summary; identical across runs.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        let passed = self.criteria.iter().filter(|c| c.passed).count();
        s.push_str(&format!(
            "{passed}/{} criteria passed\n",
            self.criteria.len()
        ));
        s
    }

    pub fn timings(&self) -> String {
        self.criteria
            .iter()
            .map(|c| {
                format!(
                    "criterion {:>2}: {:.2} s (budget {} s)\n",
                    c.id,
                    c.elapsed.as_secs_f64(),
                    c.budget.as_secs()
                )
            })
            .collect()
    }
}

/// Test-mode switches for the harness itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct Harness {
    /// Multiply every quadrature weight by 1.01 before use.
    pub corrupt_weights: bool,
}

impl Harness {
    fn grid(&self, dim: usize, radius: f64, n: usize) -> Result<Arc<RadialGrid>> {
        let mut g = RadialGrid::new(dim, radius, n)?;
        if self.corrupt_weights {
            g.corrupt_weights(1.01);
        }
        Ok(Arc::new(g))
    }
}

pub const CRITERIA: [(usize, &str, u64); 10] = [
    (1, "single-equation level", 10),
    (2, "symmetric two-component threshold", 60),
    (3, "sphere maximum vs brute force", 30),
    (4, "reduction consistency", 120),
    (5, "scaling identities", 60),
    (6, "monotonicity of levels", 120),
    (7, "small-b consistency", 300),
    (8, "certificate sanity", 10),
    (9, "gradient vs finite differences", 10),
    (10, "Nehari projection", 10),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

type Outcome = Result<(bool, String)>;

fn c1(h: &Harness) -> Outcome {
    let g = h.grid(1, 20.0, 4000)?;
    let p = ParameterSet::uniform(1, vec![1.0], vec![1.0], 1.0);
    let r = ground_state(&p, &g, &SolverOptions::default())?;
    let e = rel(r.level, 4.0 / 3.0);
    Ok((
        r.converged && e < 1e-3,
        format!("level = {:.8}, rel_err = {e:.2e} (tol 1e-3)", r.level),
    ))
}

fn c2(h: &Harness) -> Outcome {
    let g = h.grid(1, 20.0, 4000)?;
    let opts = PhaseOptions::default();
    let weak = classify(
        &ParameterSet::uniform(1, vec![1.0; 2], vec![1.0; 2], 0.5),
        &g,
        &opts,
    )?;
    let strong = classify(
        &ParameterSet::uniform(1, vec![1.0; 2], vec![1.0; 2], 3.0),
        &g,
        &opts,
    )?;
    let e = rel(strong.numeric_full_level, 2.0 / 3.0);
    Ok((
        weak.verdict == Verdict::Semitrivial
            && strong.verdict == Verdict::FullyNontrivial
            && e < 1e-3,
        format!(
            "b=0.5 -> {}, b=3 -> {} with level {:.8} (rel_err {e:.2e}, tol 1e-3)",
            weak.verdict.as_str(),
            strong.verdict.as_str(),
            strong.numeric_full_level
        ),
    ))
}

fn c3(_: &Harness) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let resolution = |k: usize| match k {
        2 => 10_000,
        3 => 400,
        _ => 100,
    };
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut checked = 0;
    for k in 2..=4 {
        let res = resolution(k);
        let tol = 2.0 / res as f64;
        for regime in [Regime::Interior, Regime::Vertex, Regime::Face] {
            for _ in 0..100 {
                let b: f64 = rng.gen_range(0.5..3.0);
                let mut mu: Vec<f64> = (0..k).map(|_| b * rng.gen_range(0.05..0.95)).collect();
                let slot = rng.gen_range(0..k);
                match regime {
                    Regime::Interior => {}
                    Regime::Vertex => mu[slot] = b * rng.gen_range(1.05..2.0),
                    Regime::Face => mu[slot] = b,
                }
                let s = sphere_max(&mu, b)?;
                let brute = brute_force_sphere_max(&mu, b, res)?;
                let err = (s.f_max - brute).abs();
                worst = worst.max(err * res as f64 / 2.0);
                ok &= s.regime == regime && err <= tol;
                checked += 1;
            }
        }
        let s = sphere_max(&vec![0.0; k], 1.0)?;
        let exact = 1.0 - 1.0 / k as f64;
        let brute = brute_force_sphere_max(&vec![0.0; k], 1.0, res)?;
        ok &= (s.f_max - exact).abs() < 1e-12 && (brute - exact).abs() <= tol;
    }
    Ok((
        ok,
        format!("{checked} draws, worst |closed - brute| = {worst:.3} x (2/resolution); 1-1/k at mu=0, b=1 for k=2..4"),
    ))
}

fn c4(h: &Harness) -> Outcome {
    let g = h.grid(1, 20.0, 4000)?;
    let opts = SolverOptions::default();
    let p = ParameterSet::uniform(1, vec![1.0, 1.0, 2.0], vec![1.0; 3], 3.0);
    let red = reduce_system(&p, &[0, 1])?;
    let full = ground_state(&p, &g, &opts)?;
    let reduced = ground_state(&red.reduced, &g, &opts)?;
    let lifted = lift_ground_state(&reduced, &red.sphere, &red.mapping)?;
    let e = rel(full.level, reduced.level);
    let prop = |m: &MultiField| {
        let (a, b) = (m.component(0), m.component(1));
        let diff = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        diff / a.sup_norm().max(b.sup_norm())
    };
    let (pf, pl) = (prop(&full.fields), prop(&lifted));
    let lifted_level = action(&lifted, &p)?.action;
    Ok((
        e < 3e-3 && pf < 1e-3 && pl < 1e-3 && rel(lifted_level, reduced.level) < 1e-8,
        format!(
            "full {:.8} vs reduced {:.8} (rel {e:.2e}, tol 3e-3); |u1-u2|/|u| = {pf:.2e} full, {pl:.2e} lifted (tol 1e-3)",
            full.level, reduced.level
        ),
    ))
}

fn c5(_: &Harness) -> Outcome {
    let opts = SolverOptions::default();
    let spec = GridSpec {
        radius: Some(20.0),
        n: 4000,
    };
    let p = ParameterSet::uniform(1, vec![1.0, 1.3], vec![0.8, 1.1], 2.5);
    let bs = b_scaling_check(&p, &spec, &opts)?;
    let single = ParameterSet::uniform(1, vec![1.0], vec![1.0], 1.0);
    let ls = scaling_check(&single, 4.0, &spec, &opts)?;
    Ok((
        bs.rel_err < 1e-10 && ls.rel_err < 1e-3,
        format!(
            "b-scaling rel_err = {:.2e} (tol 1e-10); sigma=4 rel_err = {:.2e} (tol 1e-3)",
            bs.rel_err, ls.rel_err
        ),
    ))
}

fn c6(_: &Harness) -> Outcome {
    let opts = SolverOptions::default();
    let spec = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let lam: Vec<f64> = (0..2).map(|_| rng.gen_range(0.5..2.0)).collect();
        let mu: Vec<f64> = (0..2).map(|_| rng.gen_range(0.5..2.0)).collect();
        let b = rng.gen_range(0.2..3.0);
        let p = ParameterSet::uniform(1, lam.clone(), mu.clone(), b);
        let q = ParameterSet::uniform(
            1,
            lam.iter().map(|l| l * rng.gen_range(1.0..1.5)).collect(),
            mu.iter().map(|m| m * rng.gen_range(0.6..1.0)).collect(),
            b * rng.gen_range(0.6..1.0),
        );
        let r = monotonicity_check(&p, &q, &spec, &opts)?;
        ok &= r.consistent;
        worst = worst.max(r.c_p - r.c_q);
    }
    Ok((
        ok,
        format!("20 pairs, max(c_p - c_q) = {worst:.3e} (tol 1e-6)"),
    ))
}

fn c7(_: &Harness) -> Outcome {
    let opts = PhaseOptions::default();
    let spec = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0usize; 3];
    for draw in 0..20 {
        let d = 2 + draw % 2;
        let lam: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        let b = 0.9 * small_b_bound(&mu)?;
        let p = ParameterSet::uniform(1, lam, mu, b);
        let g = Arc::new(spec.build(1, &p.lambda)?);
        match classify(&p, &g, &opts)?.verdict {
            Verdict::FullyNontrivial => counts[0] += 1,
            Verdict::Semitrivial => counts[1] += 1,
            Verdict::Inconclusive => counts[2] += 1,
        }
    }
    Ok((
        counts[0] == 0,
        format!(
            "20 draws: {} fully_nontrivial, {} semitrivial, {} inconclusive",
            counts[0], counts[1], counts[2]
        ),
    ))
}

fn c8(h: &Harness) -> Outcome {
    let g = h.grid(1, 20.0, 4000)?;
    let opts = SolverOptions::default();
    let mut ok = true;
    let bs = [0.5, 0.9, 0.99, 0.998, 1.002, 1.01, 1.1, 2.0];
    for b in bs {
        let p = ParameterSet::uniform(1, vec![1.0; 2], vec![1.0; 2], b);
        let semi = minimize_restricted(&p, &g, &[0], &opts, None)?;
        let c = perturbation_certificate(&p, &semi, semi.fields.component(0))?;
        ok &= c.holds == (b > 1.0);
    }
    Ok((ok, format!("holds iff b > mu at b in {bs:?}")))
}

fn random_multifield(
    rng: &mut ChaCha8Rng,
    grid: &Arc<RadialGrid>,
    d: usize,
    positive: bool,
) -> MultiField {
    let r = grid.radius();
    let comps = (0..d)
        .map(|_| {
            let terms: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    let a = if positive {
                        rng.gen_range(0.1..2.0)
                    } else {
                        rng.gen_range(-2.0..2.0)
                    };
                    (a, rng.gen_range(0.3..2.0), rng.gen_range(0.0..0.3 * r))
                })
                .collect();
            Field::sample(grid, |x| {
                terms
                    .iter()
                    .map(|(a, k, c)| a / (k * (x - c)).cosh())
                    .sum::<f64>()
                    * (1.0 - (x / r).powi(2))
            })
        })
        .collect();
    MultiField::new(grid.clone(), comps).expect("matching grid")
}

fn random_params(rng: &mut ChaCha8Rng, d: usize, dim: usize) -> ParameterSet {
    let mut p = ParameterSet::uniform(
        dim,
        (0..d).map(|_| rng.gen_range(0.5..2.0)).collect(),
        (0..d).map(|_| rng.gen_range(0.5..2.0)).collect(),
        1.0,
    );
    for i in 0..d {
        for j in (i + 1)..d {
            let b = rng.gen_range(0.1..3.0);
            p.b[i][j] = b;
            p.b[j][i] = b;
        }
    }
    p
}

fn c9(h: &Harness) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for pair in 0..10 {
        let dim = 1 + pair % 3;
        let g = h.grid(dim, 12.0, 600)?;
        let p = random_params(&mut rng, 3, dim);
        let u = random_multifield(&mut rng, &g, 3, false);
        let v = random_multifield(&mut rng, &g, 3, false);
        let analytic = pairing(&action_gradient(&u, &p)?, &v)?;
        let shifted = |s: f64| -> Result<f64> {
            let comps = u
                .components()
                .iter()
                .zip(v.components())
                .map(|(a, b)| {
                    Field::from_values(
                        a.values()
                            .iter()
                            .zip(b.values())
                            .map(|(x, y)| x + s * y)
                            .collect(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(action(&MultiField::new(g.clone(), comps)?, &p)?.action)
        };
        let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        worst = worst.max(rel(fd, analytic));
    }
    Ok((
        worst < 1e-6,
        format!("10 pairs (d=3, N=1..3), worst rel_err = {worst:.2e} (tol 1e-6)"),
    ))
}

fn c10(h: &Harness) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_tau = 0.0f64;
    let mut ray_ok = true;
    for k in 0..50 {
        let dim = 1 + k % 3;
        let d = 1 + (k / 3) % 3;
        let g = h.grid(dim, 12.0, 400)?;
        let p = random_params(&mut rng, d, dim);
        let u = random_multifield(&mut rng, &g, d, k % 2 == 0);
        let t = nehari_scale(&u, &p)?;
        let on = action(&u.scaled(t), &p)?;
        worst_tau = worst_tau.max(on.nehari_residual.abs() / on.quadratic);
        for s in [0.5, 2.0] {
            ray_ok &= action(&u.scaled(s * t), &p)?.action < on.action;
        }
    }
    Ok((
        worst_tau <= 1e-10 && ray_ok,
        format!("50 fields, max |tau|/Q = {worst_tau:.2e} (tol 1e-10), ray maximum at t: {ray_ok}"),
    ))
}

fn dispatch(id: usize, h: &Harness) -> Outcome {
    match id {
        1 => c1(h),
        2 => c2(h),
        3 => c3(h),
        4 => c4(h),
        5 => c5(h),
        6 => c6(h),
        7 => c7(h),
        8 => c8(h),
        9 => c9(h),
        10 => c10(h),
        _ => unreachable!("criteria are numbered 1..=10"),
    }
}

/// Runs one criterion; errors count as failures.
pub fn run_criterion(id: usize, harness: &Harness) -> CriterionResult {
    let (_, name, budget) = CRITERIA[id - 1];
    let start = Instant::now();
    let (passed, detail) = match dispatch(id, harness) {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget),
    }
}

pub fn run(harness: &Harness) -> SelftestReport {
    SelftestReport {
        criteria: (1..=CRITERIA.len())
            .map(|id| run_criterion(id, harness))
            .collect(),
    }
}
