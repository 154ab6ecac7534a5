//! Alternating descent for `min λ₁(g, V)` over `E(g₀) × E(V₀)`.
//!
//! Each round solves for `u^k` and replaces both weights by their extremal
//! rearrangements against `u^k`. Both replacements lower the Rayleigh quotient
//! of `u^k` (the numerator does not grow, the weighted mass does not shrink),
//! so `λ^{k+1} ≤ λ^k`.
//!
//! On a lattice the scheme can stop at fixed points that are not global
//! minimizers. At such a point a polarization sweep tries `(g_H, V^H)` for every
//! lattice-exact half-space with `Ω_H = Ω`; since polarization lowers the
//! Gagliardo energy and raises the weighted mass, `λ₁(g_H, V^H) ≤ λ₁(g, V)`.
//! The first strict improvement is accepted and the descent resumes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{FactoredPencil, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fracop::Operator;
use crate::geometry::{Grid, HalfSpace, HalfSpaceFamily};
use crate::rearrange::{
    maximizing_rearrangement, minimizing_rearrangement, validate_assumptions, WeightClass,
};
use crate::symmetry::{dual_polarize_with, polarize_with};

/// Relative slack allowed when comparing consecutive `λ`.
pub const DESCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OptOptions {
    /// Relative `λ` change treated as stagnation.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Eigensolver tolerance.
    pub eig_tol: f64,
    /// Integrability exponent for the assumption check. Grid fields are
    /// bounded, so `q = ∞` is always admissible.
    pub q: f64,
    /// Try polarizations at fixed points before stopping.
    pub polarization_sweep: bool,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions { tol: 1e-8, max_iter: 500, seed: 0, eig_tol: DEFAULT_TOL, q: f64::INFINITY, polarization_sweep: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Both rearrangement steps reproduce the current weights.
    FixedPoint,
    /// `λ` changed by at most `tol` relative for two consecutive rounds.
    Stagnation,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub lambda_min: f64,
    pub g_opt: Vec<f64>,
    pub v_opt: Vec<f64>,
    pub u_opt: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    /// Rearrangement rounds performed.
    pub iterations: usize,
    /// Accepted polarization steps.
    pub polarizations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub start_seed: u64,
}

fn shuffled(class: &WeightClass, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = class.values().to_vec();
    v.shuffle(rng);
    v
}

/// Runs the alternating descent from a seeded random member of each class.
///
/// The returned iterate is the last one whose `λ` is within
/// [`DESCENT_SLACK`] of the best seen.
pub fn optimize(
    grid: &Grid,
    op: &Operator,
    g_class: &WeightClass,
    v_class: &WeightClass,
    opts: &OptOptions,
) -> Result<OptResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let g0 = shuffled(g_class, &mut rng);
    let v0 = shuffled(v_class, &mut rng);
    optimize_from(grid, op, g_class, v_class, g0, v0, opts)
}

/// Runs the alternating descent from the given members `g0 ∈ E(g₀)`,
/// `v0 ∈ E(V₀)`. `opts.seed` is only recorded.
pub fn optimize_from(
    grid: &Grid,
    op: &Operator,
    g_class: &WeightClass,
    v_class: &WeightClass,
    g0: Vec<f64>,
    v0: Vec<f64>,
    opts: &OptOptions,
) -> Result<OptResult> {
    let n = op.n_cells();
    grid.check_field(&vec![0.0; n])?;
    for class in [g_class, v_class] {
        if class.len() != n {
            return Err(Error::Shape { expected: n, got: class.len() });
        }
    }
    for (start, class, name) in [(&g0, g_class, "g"), (&v0, v_class, "V")] {
        if start.len() != n {
            return Err(Error::Shape { expected: n, got: start.len() });
        }
        if !class.contains(start) {
            return Err(Error::Parameter(format!("initial {name} is not a rearrangement of its class")));
        }
    }
    if !(opts.tol >= 0.0) || opts.max_iter == 0 {
        return Err(Error::Parameter(format!(
            "need tol >= 0 and max_iter >= 1, got tol = {}, max_iter = {}",
            opts.tol, opts.max_iter
        )));
    }
    let report = validate_assumptions(g_class, v_class, opts.q, op)?;
    if !report.passed {
        let failed: Vec<String> = report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
        return Err(Error::Assumption(failed.join("; ")));
    }

    let mut g = g0;
    let mut v = v0;
    let mut pencil = FactoredPencil::new(op, &v)?;
    let mut pair = pencil.first_eigenpair(&g, opts.eig_tol)?;
    let mut history = vec![HistoryEntry { iteration: 0, lambda: pair.lambda, residual: pair.residual }];
    let mut best = (pair.lambda, g.clone(), v.clone(), pair.u.clone());

    let sweep = if opts.polarization_sweep { sweep_halfspaces(grid)? } else { Vec::new() };
    let mut stop = StopReason::MaxIter;
    let mut stagnant = 0;
    let mut iterations = 0;
    let mut polarizations = 0;
    for k in 1..=opts.max_iter {
        iterations = k;
        let mut g_next = maximizing_rearrangement(g_class, &pair.u)?;
        let mut v_next = minimizing_rearrangement(v_class, &pair.u)?;
        if g_next == g && v_next == v {
            match improving_polarization(grid, op, &sweep, g_class, v_class, &g, &v, pair.lambda, opts.eig_tol)? {
                Some((gp, vp)) => {
                    polarizations += 1;
                    g_next = gp;
                    v_next = vp;
                }
                None => {
                    stop = StopReason::FixedPoint;
                    break;
                }
            }
        }
        if v_next != v {
            pencil = FactoredPencil::new(op, &v_next)?;
        }
        let next = pencil.first_eigenpair(&g_next, opts.eig_tol)?;
        history.push(HistoryEntry { iteration: k, lambda: next.lambda, residual: next.residual });
        if (next.lambda - pair.lambda).abs() <= opts.tol * pair.lambda.abs() {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        g = g_next;
        v = v_next;
        pair = next;
        if pair.lambda <= best.0 + DESCENT_SLACK * best.0.abs() {
            best = (pair.lambda, g.clone(), v.clone(), pair.u.clone());
        }
        if stagnant >= 2 {
            stop = StopReason::Stagnation;
            break;
        }
    }

    let (lambda_min, g_opt, v_opt, u_opt) = best;
    Ok(OptResult {
        lambda_min,
        g_opt,
        v_opt,
        u_opt,
        history,
        iterations,
        polarizations,
        converged: stop != StopReason::MaxIter,
        stop,
        start_seed: opts.seed,
    })
}

/// Lattice-exact half-spaces with `Ω_H = Ω`: through-origin ones and, per
/// axis, those containing a coordinate hyperplane.
fn sweep_halfspaces(grid: &Grid) -> Result<Vec<HalfSpace>> {
    let mut families = vec![HalfSpaceFamily::ThroughOrigin];
    families.extend((0..grid.dim()).map(|axis| HalfSpaceFamily::Steiner { axis }));
    let mut out = Vec::new();
    for family in families {
        for hs in grid.compatible_halfspaces(&family)? {
            if grid.is_polarization_invariant(&hs)? {
                out.push(hs);
            }
        }
    }
    Ok(out)
}

/// First half-space whose polarization `(g_H, V^H)` stays in the classes and
/// lowers `λ` strictly.
#[allow(clippy::too_many_arguments)]
fn improving_polarization(
    grid: &Grid,
    op: &Operator,
    sweep: &[HalfSpace],
    g_class: &WeightClass,
    v_class: &WeightClass,
    g: &[f64],
    v: &[f64],
    lambda: f64,
    eig_tol: f64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    for hs in sweep {
        let rm = grid.reflection_map(hs)?;
        let g_h = polarize_with(&rm, g);
        let v_h = dual_polarize_with(grid, hs, v)?;
        if (g_h == g && v_h == v) || !g_class.contains(&g_h) || !v_class.contains(&v_h) {
            continue;
        }
        let candidate = match FactoredPencil::new(op, &v_h)?.first_eigenpair(&g_h, eig_tol) {
            Ok(pair) => pair,
            Err(Error::Positivity { .. }) | Err(Error::NoPositiveDirection { .. }) => continue,
            Err(e) => return Err(e),
        };
        if candidate.lambda < lambda * (1.0 - 10.0 * DESCENT_SLACK) {
            return Ok(Some((g_h, v_h)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    /// Sorted by `lambda_min`, ties by seed.
    pub results: Vec<OptResult>,
    /// `max − min` of `lambda_min` over the starts.
    pub spread: f64,
}

impl MultiStart {
    pub fn best(&self) -> &OptResult {
        &self.results[0]
    }
}

/// [`optimize`] from every seed in `seeds`, run concurrently.
pub fn multi_start_seeds(
    grid: &Grid,
    op: &Operator,
    g_class: &WeightClass,
    v_class: &WeightClass,
    opts: &OptOptions,
    seeds: &[u64],
) -> Result<MultiStart> {
    if seeds.is_empty() {
        return Err(Error::Parameter("at least one start is required".into()));
    }
    let mut results: Vec<OptResult> = seeds
        .par_iter()
        .map(|&seed| optimize(grid, op, g_class, v_class, &OptOptions { seed, ..opts.clone() }))
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| a.lambda_min.total_cmp(&b.lambda_min).then(a.start_seed.cmp(&b.start_seed)));
    let spread = results[results.len() - 1].lambda_min - results[0].lambda_min;
    Ok(MultiStart { results, spread })
}

/// [`optimize`] from seeds `0..n_starts`.
pub fn multi_start(
    grid: &Grid,
    op: &Operator,
    g_class: &WeightClass,
    v_class: &WeightClass,
    opts: &OptOptions,
    n_starts: usize,
) -> Result<MultiStart> {
    let seeds: Vec<u64> = (0..n_starts as u64).collect();
    multi_start_seeds(grid, op, g_class, v_class, opts, &seeds)
}
