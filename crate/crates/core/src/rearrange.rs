//! Discrete rearrangement classes and the extremal (bathtub) pairings.
//!
//! On a lattice of equal cells two fields are equimeasurable exactly when
//! their value multisets agree, so a class is stored as a sorted multiset.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{coercivity_check, CoercivityReport};
use crate::error::{Error, Result};
use crate::fracop::Operator;
use crate::geometry::Grid;

/// Tolerance for multiset and monotonicity comparisons.
pub const COMPARE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub value: f64,
    pub fraction: f64,
}

/// Piecewise-constant profile: `fraction` of the cells carry `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub steps: Vec<Step>,
}

impl StepSpec {
    pub fn new(steps: &[(f64, f64)]) -> Self {
        StepSpec { steps: steps.iter().map(|&(value, fraction)| Step { value, fraction }).collect() }
    }

    pub fn constant(value: f64) -> Self {
        StepSpec::new(&[(value, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Spec("no steps given".into()));
        }
        for s in &self.steps {
            if !s.value.is_finite() {
                return Err(Error::Spec(format!("non-finite value {}", s.value)));
            }
            if !(0.0..=1.0).contains(&s.fraction) {
                return Err(Error::Spec(format!("fraction {} outside [0, 1]", s.fraction)));
            }
        }
        let total: f64 = self.steps.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Spec(format!("fractions sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Cell count per step by largest remainder; ties go to the earlier step.
    pub fn counts(&self, n_cells: usize) -> Result<Vec<usize>> {
        self.validate()?;
        let quotas: Vec<f64> = self.steps.iter().map(|s| s.fraction * n_cells as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = quotas[i] - quotas[i].floor();
            let rj = quotas[j] - quotas[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &i in order.iter().take(n_cells.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Steps(StepSpec),
    Sampled,
}

/// Discrete rearrangement class: one value per inside cell, order forgotten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightClass {
    values: Vec<f64>,
    provenance: Provenance,
}

impl WeightClass {
    pub fn from_steps(spec: &StepSpec, n_cells: usize) -> Result<Self> {
        let counts = spec.counts(n_cells)?;
        let mut values = Vec::with_capacity(n_cells);
        for (step, count) in spec.steps.iter().zip(counts) {
            values.extend(std::iter::repeat_n(step.value, count));
        }
        values.sort_by(f64::total_cmp);
        Ok(WeightClass { values, provenance: Provenance::Steps(spec.clone()) })
    }

    pub fn from_field(field: &[f64]) -> Result<Self> {
        if field.is_empty() {
            return Err(Error::Spec("empty field".into()));
        }
        if let Some(v) = field.iter().find(|v| !v.is_finite()) {
            return Err(Error::Spec(format!("non-finite value {v}")));
        }
        let mut values = field.to_vec();
        values.sort_by(f64::total_cmp);
        Ok(WeightClass { values, provenance: Provenance::Sampled })
    }

    /// Values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A class with a single distinct value has one member.
    pub fn is_singleton(&self) -> bool {
        self.values.first() == self.values.last()
    }

    pub fn has_positive(&self) -> bool {
        self.values.iter().any(|&v| v > 0.0)
    }

    pub fn contains(&self, field: &[f64]) -> bool {
        is_rearrangement(&self.values, field)
    }
}

/// Multiset of a step spec or sampled field on `grid`.
pub fn class_from_spec(spec: &StepSpec, grid: &Grid) -> Result<WeightClass> {
    WeightClass::from_steps(spec, grid.n_cells())
}

fn check_len(class: &WeightClass, u: &[f64]) -> Result<()> {
    if class.len() != u.len() {
        return Err(Error::Shape { expected: class.len(), got: u.len() });
    }
    Ok(())
}

/// Cells ordered by `|u|` descending, ties by index ascending. For positive
/// `u` this is the `u²` order without rounding collisions.
fn cells_by_magnitude(u: &[f64]) -> Vec<usize> {
    let mut cells: Vec<usize> = (0..u.len()).collect();
    cells.sort_by(|&i, &j| u[j].abs().total_cmp(&u[i].abs()).then(i.cmp(&j)));
    cells
}

/// Member of `class` maximizing `Σ g_i u_i²`: largest values on largest `|u|`.
pub fn maximizing_rearrangement(class: &WeightClass, u: &[f64]) -> Result<Vec<f64>> {
    check_len(class, u)?;
    let mut out = vec![0.0; u.len()];
    for (cell, v) in cells_by_magnitude(u).into_iter().zip(class.values.iter().rev()) {
        out[cell] = *v;
    }
    Ok(out)
}

/// Member of `class` minimizing `Σ V_i u_i²`: smallest values on largest `|u|`.
pub fn minimizing_rearrangement(class: &WeightClass, u: &[f64]) -> Result<Vec<f64>> {
    check_len(class, u)?;
    let mut out = vec![0.0; u.len()];
    for (cell, v) in cells_by_magnitude(u).into_iter().zip(class.values.iter()) {
        out[cell] = *v;
    }
    Ok(out)
}

/// Sorted values agree entrywise within `COMPARE_TOL`.
pub fn is_rearrangement(f1: &[f64], f2: &[f64]) -> bool {
    if f1.len() != f2.len() {
        return false;
    }
    let mut a = f1.to_vec();
    let mut b = f2.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= COMPARE_TOL)
}

/// `(Σ |f_i|^q h^N)^{1/q}`.
pub fn lq_norm(grid: &Grid, f: &[f64], q: f64) -> Result<f64> {
    grid.check_field(f)?;
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("q must be >= 1, got {q}")));
    }
    let sum: f64 = f.iter().map(|v| v.abs().powf(q)).sum();
    Ok((sum * grid.cell_measure()).powf(1.0 / q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub passed: bool,
    pub checks: Vec<AssumptionCheck>,
    pub coercivity: CoercivityReport,
}

impl AssumptionReport {
    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks integrability, `g⁺ ≢ 0` and coercivity over the potential class.
///
/// The Sobolev-constant bound on `‖V⁻‖_q` has no computable discrete
/// counterpart; it is replaced by positivity of the smallest eigenvalue of
/// `A + D_V M` for the adversarial arrangement of the class.
pub fn validate_assumptions(
    g_class: &WeightClass,
    v_class: &WeightClass,
    q: f64,
    op: &Operator,
) -> Result<AssumptionReport> {
    let params = op.params();
    let threshold = params.dim as f64 / (2.0 * params.s);
    let mut checks = vec![AssumptionCheck {
        name: "q > N/(2s)".into(),
        passed: q > threshold,
        detail: format!("q = {q}, N/(2s) = {threshold}"),
    }];
    checks.push(AssumptionCheck {
        name: "g+ not identically zero".into(),
        passed: g_class.has_positive(),
        detail: format!("max g = {}", g_class.values().last().copied().unwrap_or(f64::NAN)),
    });
    let coercivity = coercivity_check(op, v_class.values())?;
    checks.push(AssumptionCheck {
        name: "coercivity over the potential class".into(),
        passed: coercivity.margin > 0.0,
        detail: format!(
            "min eigenvalue {:e}, adversarial {:e}, Weyl class bound {:e} (stands in for the Sobolev-constant bound on the negative part)",
            coercivity.min_eig, coercivity.adversarial_min_eig, coercivity.class_lower_bound
        ),
    });
    Ok(AssumptionReport { passed: checks.iter().all(|c| c.passed), checks, coercivity })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub holds: bool,
    pub max_violation: f64,
}

/// Whether `w` is a monotone function of `u`: for every pair with
/// `u_i < u_j`, `w_i ≤ w_j` (increasing) or `w_i ≥ w_j` (decreasing).
pub fn check_monotone_dependence(u: &[f64], w: &[f64], direction: Monotonicity) -> Result<MonotoneReport> {
    if u.len() != w.len() {
        return Err(Error::Shape { expected: u.len(), got: w.len() });
    }
    let sign = match direction {
        Monotonicity::Increasing => 1.0,
        Monotonicity::Decreasing => -1.0,
    };
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[i].total_cmp(&u[j]));
    let mut max_violation = 0.0f64;
    // running max of sign·w over strictly smaller u
    let mut below = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && u[order[end]] == u[order[start]] {
            end += 1;
        }
        let mut group_max = f64::NEG_INFINITY;
        for &i in &order[start..end] {
            let v = sign * w[i];
            max_violation = max_violation.max(below - v);
            group_max = group_max.max(v);
        }
        below = below.max(group_max);
        start = end;
    }
    Ok(MonotoneReport { holds: max_violation <= COMPARE_TOL, max_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn singleton_class() {
        let c = WeightClass::from_steps(&StepSpec::constant(1.0), 10).unwrap();
        assert_eq!(c.values(), &[1.0; 10]);
        assert!(c.is_singleton());
    }

    #[test]
    fn exact_fractions() {
        let c = WeightClass::from_steps(&StepSpec::new(&[(0.0, 0.75), (5.0, 0.25)]), 8).unwrap();
        assert_eq!(c.values(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0]);
    }

    #[test]
    fn largest_remainder() {
        let spec = StepSpec::new(&[(0.0, 0.5), (1.0, 0.3), (2.0, 0.2)]);
        assert_eq!(spec.counts(7).unwrap(), vec![4, 2, 1]);
        let c = WeightClass::from_steps(&spec, 7).unwrap();
        assert_eq!(c.values(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn bad_spec() {
        assert!(matches!(
            StepSpec::new(&[(0.0, 0.5), (1.0, 0.4)]).counts(5),
            Err(Error::Spec(_))
        ));
        assert!(StepSpec::new(&[(0.0, 1.5), (1.0, -0.5)]).validate().is_err());
        assert!(StepSpec { steps: vec![] }.validate().is_err());
    }

    #[test]
    fn extremal_examples() {
        let u = [1f64.sqrt(), 3f64.sqrt(), 2f64.sqrt()];
        let g = WeightClass::from_field(&[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(maximizing_rearrangement(&g, &u).unwrap(), vec![0.0, 5.0, 0.0]);
        let v = WeightClass::from_field(&[0.0, 0.0, 7.0]).unwrap();
        assert_eq!(minimizing_rearrangement(&v, &u).unwrap(), vec![7.0, 0.0, 0.0]);
        let flat = [2.0; 3];
        let c = WeightClass::from_field(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(maximizing_rearrangement(&c, &flat).unwrap(), vec![3.0, 2.0, 1.0]);
        let k = WeightClass::from_field(&[4.0; 3]).unwrap();
        assert_eq!(minimizing_rearrangement(&k, &u).unwrap(), vec![4.0; 3]);
        assert!(matches!(maximizing_rearrangement(&c, &u[..2]), Err(Error::Shape { .. })));
    }

    #[test]
    fn rearrangement_predicate() {
        assert!(is_rearrangement(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]));
        assert!(!is_rearrangement(&[0.0, 0.0, 5.0], &[0.0, 5.0, 5.0]));
        assert!(!is_rearrangement(&[0.0], &[0.0, 1.0]));
    }

    #[test]
    fn norms() {
        let g = Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 8).unwrap();
        let ones = vec![1.0; 8];
        for q in [1.0, 2.0, 4.0] {
            assert!((lq_norm(&g, &ones, q).unwrap() - 2f64.powf(1.0 / q)).abs() < 1e-14);
        }
        assert!(lq_norm(&g, &ones, 0.5).is_err());
        let g1 = Grid::new(&DomainSpec::Interval { a: -1.0, b: 0.0 }, 2).unwrap();
        assert_eq!(g1.cell_measure(), 1.0);
        let g2 = Grid::new(&DomainSpec::Interval { a: -2.0, b: 2.0 }, 4).unwrap();
        let f = vec![0.0, 3.0, 4.0, 0.0];
        assert!((lq_norm(&g2, &f, 2.0).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn assumptions() {
        let grid = Grid::new(&DomainSpec::Disc { radius: 1.0 }, 6).unwrap();
        let op = Operator::assemble(&grid, 0.5).unwrap();
        let n = grid.n_cells();
        let g1 = WeightClass::from_steps(&StepSpec::constant(1.0), n).unwrap();
        let v0 = WeightClass::from_steps(&StepSpec::constant(0.0), n).unwrap();
        assert!(validate_assumptions(&g1, &v0, 4.0, &op).unwrap().passed);
        let gneg = WeightClass::from_steps(&StepSpec::new(&[(0.0, 0.5), (-1.0, 0.5)]), n).unwrap();
        let rep = validate_assumptions(&gneg, &v0, 4.0, &op).unwrap();
        assert!(!rep.passed);
        assert!(rep.failures().any(|c| c.name.contains("g+")));
        let rep = validate_assumptions(&g1, &v0, 1.5, &op).unwrap();
        assert!(!rep.passed);
        assert!(rep.failures().any(|c| c.name.starts_with("q >")));
    }

    #[test]
    fn monotone_checks() {
        let u = [0.3, 0.1, 0.9, 0.5, 0.5];
        let class = WeightClass::from_field(&[0.0, 1.0, 2.0, 2.0, 7.0]).unwrap();
        let g = maximizing_rearrangement(&class, &u).unwrap();
        assert!(check_monotone_dependence(&u, &g, Monotonicity::Increasing).unwrap().holds);
        let v = minimizing_rearrangement(&class, &u).unwrap();
        assert!(check_monotone_dependence(&u, &v, Monotonicity::Decreasing).unwrap().holds);
        let shuffled = [7.0, 2.0, 0.0, 1.0, 2.0];
        let rep = check_monotone_dependence(&u, &shuffled, Monotonicity::Increasing).unwrap();
        assert!(!rep.holds && rep.max_violation > 0.0);
        // equal u with different w is a tie, not a violation
        let rep = check_monotone_dependence(&[1.0, 1.0], &[0.0, 5.0], Monotonicity::Increasing).unwrap();
        assert!(rep.holds);
    }
}
