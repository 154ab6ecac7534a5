//! Polarization, symmetrization and the half-space characterizations of
//! Steiner and foliated Schwarz symmetry.
//!
//! All transforms use the zero extension: a reflected center that is not an
//! inside cell carries the value 0. Cells whose center lies on `∂H` are fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, HalfSpace, HalfSpaceFamily, Image, ReflectionMap, Side};

fn require_nonnegative(f: &[f64]) -> Result<()> {
    match f.iter().position(|&v| !(v >= 0.0)) {
        Some(cell) => Err(Error::NegativeField { cell, value: f[cell] }),
        None => Ok(()),
    }
}

fn image_value(f: &[f64], img: Image) -> f64 {
    match img {
        Image::Cell(j) => f[j],
        Image::Exterior => 0.0,
    }
}

/// Polarization over a precomputed reflection map, for fields of any sign.
pub(crate) fn polarize_with(rm: &ReflectionMap, f: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(rm.side.iter().zip(&rm.image))
        .map(|(&v, (side, &img))| match side {
            Side::Inside => v.max(image_value(f, img)),
            Side::Complement => v.min(image_value(f, img)),
            Side::Boundary => v,
        })
        .collect()
}

/// `f_H`: larger of each reflected pair on the `H` side, smaller on `H^c`.
pub fn polarize(grid: &Grid, hs: &HalfSpace, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(f)?;
    require_nonnegative(f)?;
    Ok(polarize_with(&grid.reflection_map(hs)?, f))
}

/// `f^H = f_H ∘ σ_H` evaluated through the zero-extended `f_H`.
fn dual_by_composition(rm: &ReflectionMap, f: &[f64]) -> Vec<f64> {
    let f_h = polarize_with(rm, f);
    f.iter()
        .zip(rm.side.iter().zip(&rm.image))
        .map(|(&v, (side, &img))| match (side, img) {
            (Side::Boundary, _) => v,
            (_, Image::Cell(j)) => f_h[j],
            // σx lies outside Ω on the opposite side of ∂H, where f̃ = 0.
            (Side::Inside, Image::Exterior) => v.min(0.0),
            (Side::Complement, Image::Exterior) => v.max(0.0),
        })
        .collect()
}

pub(crate) fn dual_polarize_with(grid: &Grid, hs: &HalfSpace, f: &[f64]) -> Result<Vec<f64>> {
    let rm = grid.reflection_map(hs)?;
    let composed = dual_by_composition(&rm, f);
    let complement = polarize_with(&grid.reflection_map(&hs.complement())?, f);
    debug_assert!(composed.iter().zip(&complement).all(|(a, b)| a == b));
    Ok(complement)
}

/// `f^H`, the polarization toward the complement of `H`.
///
/// Computed both as `f_H ∘ σ_H` and as the polarization with respect to
/// `{x·(−ν) > −c}`; the two agree exactly.
pub fn dual_polarize(grid: &Grid, hs: &HalfSpace, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(f)?;
    require_nonnegative(f)?;
    dual_polarize_with(grid, hs, f)
}

/// Both routes to `f^H`, exposed for cross-checking.
pub fn dual_polarize_routes(grid: &Grid, hs: &HalfSpace, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check_field(f)?;
    require_nonnegative(f)?;
    let composed = dual_by_composition(&grid.reflection_map(hs)?, f);
    let complement = polarize_with(&grid.reflection_map(&hs.complement())?, f);
    Ok((composed, complement))
}

/// Inside cells grouped into lines parallel to `axis`, each sorted along it.
fn axis_slices(grid: &Grid, axis: usize) -> Result<Vec<Vec<usize>>> {
    if axis >= grid.dim() {
        return Err(Error::Parameter(format!("axis {axis} out of range for a {}-dimensional grid", grid.dim())));
    }
    let mut slices: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for cell in 0..grid.n_cells() {
        let mi = grid.multi_index(cell);
        let key = if grid.dim() == 1 { 0 } else { mi[1 - axis] };
        slices.entry(key).or_default().push(cell);
    }
    let mut out = Vec::with_capacity(slices.len());
    for (key, mut cells) in slices {
        cells.sort_by_key(|&c| grid.multi_index(c)[axis]);
        let first = grid.multi_index(cells[0])[axis];
        let contiguous = cells.iter().enumerate().all(|(k, &c)| grid.multi_index(c)[axis] == first + k as i64);
        if !contiguous {
            return Err(Error::DomainShape(format!(
                "slice {key} along axis {axis} is not contiguous; Steiner symmetrization needs convex slices"
            )));
        }
        out.push(cells);
    }
    Ok(out)
}

/// Slice positions ordered from the midpoint outward, negative side first.
fn center_out_order(len: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(len);
    let (mut left, mut right) = if len % 2 == 1 {
        order.push(len / 2);
        (len / 2, len / 2 + 1)
    } else {
        (len / 2, len / 2)
    };
    while order.len() < len {
        if left > 0 {
            left -= 1;
            order.push(left);
        }
        if right < len {
            order.push(right);
            right += 1;
        }
    }
    order
}

/// Symmetric-decreasing rearrangement of every line parallel to `axis`
/// about the line's midpoint.
pub fn steiner_symmetrize(grid: &Grid, axis: usize, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(f)?;
    require_nonnegative(f)?;
    let mut out = vec![0.0; f.len()];
    for slice in axis_slices(grid, axis)? {
        let mut values: Vec<f64> = slice.iter().map(|&c| f[c]).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        for (pos, v) in center_out_order(slice.len()).into_iter().zip(values) {
            out[slice[pos]] = v;
        }
    }
    Ok(out)
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Parameter(format!("direction {v:?} has no unit normalization")));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Shell-wise rearrangement decreasing in the angle from `gamma`.
///
/// Within each shell of width `h`, cells are ordered by angle from `gamma`
/// (ties by second coordinate) and receive the shell's values in descending
/// order.
pub fn foliated_schwarz_symmetrize(grid: &Grid, gamma: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(f)?;
    require_nonnegative(f)?;
    if grid.dim() != 2 || !grid.domain().is_radial() {
        return Err(Error::DomainShape("foliated Schwarz symmetrization needs a disc or concentric annulus".into()));
    }
    if gamma.len() != 2 {
        return Err(Error::Shape { expected: 2, got: gamma.len() });
    }
    let gamma = unit(gamma)?;
    let mut out = vec![0.0; f.len()];
    for mut shell in grid.radial_shells(grid.h())? {
        // cos θ quantized so that mirror-image cells tie exactly
        let key = |c: usize| {
            let x = grid.center(c);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            ((x[0] * gamma[0] + x[1] * gamma[1]) / r * 1e12).round() as i64
        };
        shell.sort_by(|&a, &b| key(b).cmp(&key(a)).then(grid.center(a)[1].total_cmp(&grid.center(b)[1])));
        let mut values: Vec<f64> = shell.iter().map(|&c| f[c]).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        for (c, v) in shell.into_iter().zip(values) {
            out[c] = v;
        }
    }
    Ok(out)
}

/// Which characterization a report belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckFamily {
    Steiner { axis: usize },
    Foliated { search: bool },
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceDeviation {
    pub halfspace: HalfSpace,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionScore {
    pub direction: Vec<f64>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub family: CheckFamily,
    pub entries: Vec<HalfSpaceDeviation>,
    pub max_deviation: f64,
    /// Index into `entries` of the first half-space attaining the maximum.
    pub worst: Option<usize>,
    pub tolerance: f64,
    pub verdict: bool,
    /// `β` for foliated checks.
    pub direction: Option<Vec<f64>>,
    /// Every candidate direction scanned in search mode.
    pub candidates: Vec<DirectionScore>,
}

impl SymmetryReport {
    fn new(family: CheckFamily, entries: Vec<HalfSpaceDeviation>, tolerance: f64) -> Self {
        let mut max_deviation = 0.0f64;
        let mut worst = None;
        for (k, e) in entries.iter().enumerate() {
            if worst.is_none() || e.deviation > max_deviation {
                max_deviation = e.deviation;
                worst = Some(k);
            }
        }
        SymmetryReport {
            family,
            entries,
            max_deviation,
            worst,
            tolerance,
            verdict: max_deviation <= tolerance,
            direction: None,
            candidates: Vec::new(),
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn polarization_deviations(grid: &Grid, halfspaces: &[HalfSpace], f: &[f64]) -> Result<Vec<HalfSpaceDeviation>> {
    halfspaces
        .par_iter()
        .map(|hs| {
            let f_h = polarize_with(&grid.reflection_map(hs)?, f);
            Ok(HalfSpaceDeviation { halfspace: hs.clone(), deviation: max_abs_diff(&f_h, f) })
        })
        .collect()
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if !(tolerance >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be nonnegative, got {tolerance}")));
    }
    Ok(())
}

/// `max |f_H − f|` over the half-spaces containing `{x_axis = 0}`.
pub fn check_steiner(grid: &Grid, f: &[f64], axis: usize, tolerance: f64) -> Result<SymmetryReport> {
    grid.check_field(f)?;
    check_tolerance(tolerance)?;
    let family = grid.compatible_halfspaces(&HalfSpaceFamily::Steiner { axis })?;
    let entries = polarization_deviations(grid, &family, f)?;
    Ok(SymmetryReport::new(CheckFamily::Steiner { axis }, entries, tolerance))
}

/// Direction for [`check_foliated`]: fixed, or scanned over the lattice-exact
/// through-origin normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoliatedMode {
    Direction(Vec<f64>),
    Search,
}

fn foliated_at(grid: &Grid, f: &[f64], beta: &[f64], tolerance: f64, search: bool) -> Result<SymmetryReport> {
    let family = grid.compatible_halfspaces(&HalfSpaceFamily::ThroughOriginContaining { gamma: beta.to_vec() })?;
    let entries = polarization_deviations(grid, &family, f)?;
    let mut report = SymmetryReport::new(CheckFamily::Foliated { search }, entries, tolerance);
    report.direction = Some(beta.to_vec());
    Ok(report)
}

/// `max |f_H − f|` over through-origin half-spaces containing `β`. In search
/// mode every lattice-exact normal is tried as `β` and the one with the
/// smallest maximum deviation is reported (first on ties).
pub fn check_foliated(grid: &Grid, f: &[f64], mode: &FoliatedMode, tolerance: f64) -> Result<SymmetryReport> {
    grid.check_field(f)?;
    check_tolerance(tolerance)?;
    match mode {
        FoliatedMode::Direction(beta) => {
            if beta.len() != grid.dim() {
                return Err(Error::Shape { expected: grid.dim(), got: beta.len() });
            }
            foliated_at(grid, f, &unit(beta)?, tolerance, false)
        }
        FoliatedMode::Search => {
            let normals: Vec<Vec<f64>> = grid
                .compatible_halfspaces(&HalfSpaceFamily::ThroughOrigin)?
                .into_iter()
                .map(|hs| hs.normal)
                .collect();
            let reports: Vec<SymmetryReport> = normals
                .par_iter()
                .map(|beta| foliated_at(grid, f, beta, tolerance, true))
                .collect::<Result<_>>()?;
            let candidates: Vec<DirectionScore> = reports
                .iter()
                .map(|r| DirectionScore { direction: r.direction.clone().unwrap_or_default(), max_deviation: r.max_deviation })
                .collect();
            let mut best = reports
                .into_iter()
                .reduce(|a, b| if b.max_deviation < a.max_deviation { b } else { a })
                .ok_or_else(|| Error::DomainShape("no through-origin half-spaces on this grid".into()))?;
            best.candidates = candidates;
            Ok(best)
        }
    }
}

/// `max |f∘σ_H − f|` over the given half-spaces; exterior images count as 0.
pub fn check_reflection_invariance(
    grid: &Grid,
    f: &[f64],
    halfspaces: &[HalfSpace],
    tolerance: f64,
) -> Result<SymmetryReport> {
    grid.check_field(f)?;
    check_tolerance(tolerance)?;
    let entries = halfspaces
        .par_iter()
        .map(|hs| {
            let rm = grid.reflection_map(hs)?;
            let deviation = f
                .iter()
                .zip(&rm.image)
                .map(|(&v, &img)| (image_value(f, img) - v).abs())
                .fold(0.0, f64::max);
            Ok(HalfSpaceDeviation { halfspace: rm.halfspace, deviation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryReport::new(CheckFamily::Reflection, entries, tolerance))
}

/// `(max |f_H − f|, max |f^H − f|)` for a field of any sign.
pub fn polarization_invariance(grid: &Grid, hs: &HalfSpace, f: &[f64]) -> Result<(f64, f64)> {
    grid.check_field(f)?;
    let f_h = polarize_with(&grid.reflection_map(hs)?, f);
    let f_dual = dual_polarize_with(grid, hs, f)?;
    Ok((max_abs_diff(&f_h, f), max_abs_diff(&f_dual, f)))
}

/// Integrals of the two Hardy–Littlewood inequalities under polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyLittlewood {
    /// `∫ u v`
    pub lhs: f64,
    /// `∫ u_H v_H`
    pub rhs: f64,
    /// `∫ u^H v_H`
    pub dual_lhs: f64,
    /// `∫ u v`
    pub dual_rhs: f64,
    /// The reverse inequality is guaranteed when `v ≥ 0` or `σ_H(Ω) = Ω`.
    pub reverse_applies: bool,
}

impl HardyLittlewood {
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn dual_gap(&self) -> f64 {
        self.dual_rhs - self.dual_lhs
    }
}

/// `∫uv ≤ ∫u_H v_H` and `∫u^H v_H ≤ ∫uv` on a mask with `Ω_H = Ω`.
///
/// One of `u`, `v` must be nonnegative; the reverse inequality additionally
/// needs `v ≥ 0` unless no reflected cell leaves the domain.
pub fn hardy_littlewood_gap(grid: &Grid, hs: &HalfSpace, u: &[f64], v: &[f64]) -> Result<HardyLittlewood> {
    grid.check_field(u)?;
    grid.check_field(v)?;
    let v_nonneg = v.iter().all(|&x| x >= 0.0);
    if !v_nonneg {
        require_nonnegative(u)?;
    }
    if !grid.is_polarization_invariant(hs)? {
        return Err(Error::DomainShape(format!(
            "mask is not invariant under polarization by normal {:?}, offset {}",
            hs.normal, hs.offset
        )));
    }
    let rm = grid.reflection_map(hs)?;
    let u_h = polarize_with(&rm, u);
    let v_h = polarize_with(&rm, v);
    let u_dual = dual_polarize_with(grid, hs, u)?;
    let m = grid.cell_measure();
    let integral = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * m;
    let uv = integral(u, v);
    Ok(HardyLittlewood {
        lhs: uv,
        rhs: integral(&u_h, &v_h),
        dual_lhs: integral(&u_dual, &v_h),
        dual_rhs: uv,
        reverse_applies: v_nonneg || grid.is_reflection_invariant(hs)?,
    })
}
