//! Dense discretization of the Gagliardo energy `(C_{N,s}/2)[u]_s^2` for
//! fields that vanish outside the domain.
//!
//! Pairs of inside cells interact through the midpoint kernel
//! `|x_i - x_j|^{-(N+2s)}`; the interaction of each inside cell with the
//! exterior collapses into a diagonal killing term. The self cell is excluded.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::Grid;

/// Largest number of inside cells accepted for dense storage.
pub const MAX_DENSE_CELLS: usize = 4096;

/// Truncation radius of the exterior lattice sum, in units of `diam(Ω)`.
pub const TRUNCATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    pub dim: usize,
    pub c_ns: f64,
}

impl FracParams {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        Ok(FracParams { s, dim, c_ns: normalization_constant(dim, s)? })
    }
}

/// `C_{N,s} = s 4^s Γ(N/2 + s) / (π^{N/2} Γ(1 − s))`.
pub fn normalization_constant(dim: usize, s: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s must lie in (0, 1), got {s}")));
    }
    let half_n = dim as f64 / 2.0;
    Ok(s * 4f64.powf(s) * gamma(half_n + s) / (std::f64::consts::PI.powf(half_n) * gamma(1.0 - s)))
}

/// Surface measure of the unit sphere `S^{N-1}`.
fn unit_sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0),
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Assembled stiffness matrix and lumped mass of the restricted operator.
#[derive(Debug, Clone)]
pub struct Operator {
    stiffness: DMatrix<f64>,
    cell_measure: f64,
    killing: Vec<f64>,
    params: FracParams,
}

/// Assembles the operator on `grid` for exponent `s`.
pub fn assemble_operator(grid: &Grid, s: f64) -> Result<Operator> {
    Operator::assemble(grid, s)
}

impl Operator {
    pub fn assemble(grid: &Grid, s: f64) -> Result<Self> {
        let params = FracParams::new(grid.dim(), s)?;
        let n_cells = grid.n_cells();
        if n_cells > MAX_DENSE_CELLS {
            return Err(Error::TooLarge { cells: n_cells, limit: MAX_DENSE_CELLS });
        }
        let dim = grid.dim();
        let h = grid.h();
        let hn = grid.cell_measure();
        let exponent = dim as f64 + 2.0 * s;
        // K(Δ) for an integer lattice offset Δ, from |Δ|^2 only so that
        // reflected pairs get bit-identical weights.
        let kernel = |dist2: i64| (h * h * dist2 as f64).powf(-exponent / 2.0);

        // Full lattice sum over offsets 0 < |Δ| h < R_t; identical for every cell.
        let r_trunc = TRUNCATION_FACTOR * grid.domain().diameter();
        let rho = r_trunc / h;
        let rho_i = rho.floor() as i64 + 1;
        let mut lattice_sum = CompensatedSum::default();
        if dim == 1 {
            for k in (1..=rho_i).rev() {
                if (k as f64) < rho {
                    lattice_sum.add(2.0 * kernel(k * k));
                }
            }
        } else {
            for a in (0..=rho_i).rev() {
                for b in (0..=rho_i).rev() {
                    let d2 = a * a + b * b;
                    if d2 == 0 || (d2 as f64).sqrt() >= rho {
                        continue;
                    }
                    let mult = match (a, b) {
                        (0, _) | (_, 0) => 2.0,
                        _ => 4.0,
                    };
                    lattice_sum.add(mult * kernel(d2));
                }
            }
        }
        let tail = unit_sphere_measure(dim) * r_trunc.powf(-2.0 * s) / (2.0 * s);
        let full = hn * lattice_sum.value() + tail;

        let c = params.c_ns;
        let idx: Vec<[i64; 2]> = (0..n_cells).map(|i| grid.multi_index(i)).collect();
        let mut stiffness = DMatrix::<f64>::zeros(n_cells, n_cells);
        let mut killing = vec![0.0; n_cells];
        stiffness
            .as_mut_slice()
            .par_chunks_mut(n_cells)
            .zip(killing.par_iter_mut())
            .enumerate()
            .for_each(|(j, (col, kill))| {
                let mut inner = CompensatedSum::default();
                for (i, a) in col.iter_mut().enumerate() {
                    if i == j {
                        *a = c * hn * full;
                        continue;
                    }
                    let d0 = idx[i][0] - idx[j][0];
                    let d1 = idx[i][1] - idx[j][1];
                    let k = kernel(d0 * d0 + d1 * d1);
                    inner.add(k);
                    *a = -c * hn * hn * k;
                }
                *kill = full - hn * inner.value();
            });

        Ok(Operator { stiffness, cell_measure: hn, killing, params })
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn n_cells(&self) -> usize {
        self.stiffness.nrows()
    }

    /// Lumped mass `h^N`, the same for every cell.
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// `κ_i = ∫_{Ω^c} |x_i − y|^{−(N+2s)} dy` as discretized.
    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    pub(crate) fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_cells() {
            return Err(Error::Shape { expected: self.n_cells(), got: field.len() });
        }
        Ok(())
    }

    /// `u·A·u`, equal to `(C_{N,s}/2)[u]_s^2` for the zero extension of `u`.
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        let v = DVector::from_column_slice(u);
        Ok(v.dot(&(&self.stiffness * &v)))
    }

    /// Discrete `[u]_s^2`.
    pub fn gagliardo_seminorm_sq(&self, u: &[f64]) -> Result<f64> {
        Ok(2.0 / self.params.c_ns * self.energy(u)?)
    }

    /// `u·A·u + Σ V_i u_i^2 h^N`.
    pub fn quadratic_form(&self, potential: &[f64], u: &[f64]) -> Result<f64> {
        self.check(potential)?;
        let energy = self.energy(u)?;
        let mass: f64 = potential.iter().zip(u).map(|(v, x)| v * x * x).sum();
        Ok(energy + mass * self.cell_measure)
    }

    /// `A + diag(V h^N)`.
    pub fn shifted(&self, potential: &[f64]) -> Result<DMatrix<f64>> {
        self.check(potential)?;
        let mut k = self.stiffness.clone();
        for (i, v) in potential.iter().enumerate() {
            k[(i, i)] += v * self.cell_measure;
        }
        Ok(k)
    }
}

/// Assembles on `grid` and evaluates `[u]_s^2`.
pub fn gagliardo_seminorm_sq(grid: &Grid, s: f64, u: &[f64]) -> Result<f64> {
    grid.check_field(u)?;
    Operator::assemble(grid, s)?.gagliardo_seminorm_sq(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn constant_reference_values() {
        // mpmath, 40 digits
        let cases = [
            (1, 0.5, 0.31830988618379067154),
            (2, 0.5, 0.15915494309189533577),
            (1, 0.25, 0.19947114020071633897),
            (1, 0.75, 0.29920671030107450845),
            (2, 0.1, 0.032551422029941055115),
            (2, 0.9, 0.10084985986148907972),
        ];
        for (n, s, want) in cases {
            let got = normalization_constant(n, s).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "N={n} s={s}: {got} vs {want}");
        }
        assert!((normalization_constant(1, 0.5).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn constant_rejects_bad_s() {
        assert!(normalization_constant(1, 0.0).is_err());
        assert!(normalization_constant(1, 1.0).is_err());
        assert!(normalization_constant(2, -0.3).is_err());
        assert!(normalization_constant(0, 0.5).is_err());
    }

    #[test]
    fn single_cell_is_pure_killing() {
        let g = Grid::new(&DomainSpec::Interval { a: -1.0, b: 0.2 }, 2).unwrap();
        assert_eq!(g.n_cells(), 1);
        let op = Operator::assemble(&g, 0.5).unwrap();
        let a11 = op.stiffness()[(0, 0)];
        let expect = op.params().c_ns * g.h() * op.killing()[0];
        assert!(a11 > 0.0);
        assert!(((a11 - expect) / a11).abs() < 1e-14);
    }

    #[test]
    fn two_cells_off_diagonal() {
        let g = Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 2).unwrap();
        let s = 0.3;
        let op = Operator::assemble(&g, s).unwrap();
        let a = op.stiffness();
        let c = op.params().c_ns;
        let d: f64 = 1.0;
        let expect = -c * g.h() * g.h() * d.powf(-(1.0 + 2.0 * s));
        assert_eq!(a[(0, 1)], a[(1, 0)]);
        assert!(((a[(0, 1)] - expect) / expect).abs() < 1e-14);
    }

    #[test]
    fn m_matrix_structure() {
        for (spec, n) in [
            (DomainSpec::Interval { a: -1.0, b: 1.0 }, 16),
            (DomainSpec::Disc { radius: 1.0 }, 10),
            (DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.25 }, 12),
        ] {
            let g = Grid::new(&spec, n).unwrap();
            let op = Operator::assemble(&g, 0.4).unwrap();
            let a = op.stiffness();
            for i in 0..a.nrows() {
                let mut off = 0.0;
                for j in 0..a.ncols() {
                    assert_eq!(a[(i, j)], a[(j, i)]);
                    if i != j {
                        assert!(a[(i, j)] < 0.0);
                        off += a[(i, j)].abs();
                    }
                }
                assert!(a[(i, i)] > off);
                assert!(op.killing()[i] > 0.0);
            }
            assert!(a.clone().cholesky().is_some());
        }
    }

    #[test]
    fn seminorm_basic_identities() {
        let g = Grid::new(&DomainSpec::Disc { radius: 1.0 }, 6).unwrap();
        let op = Operator::assemble(&g, 0.5).unwrap();
        let zero = vec![0.0; g.n_cells()];
        assert_eq!(op.gagliardo_seminorm_sq(&zero).unwrap(), 0.0);
        let mut e = zero.clone();
        e[3] = 1.0;
        let want = 2.0 * op.stiffness()[(3, 3)] / op.params().c_ns;
        assert!((op.gagliardo_seminorm_sq(&e).unwrap() - want).abs() < 1e-12 * want);
        let u: Vec<f64> = (0..g.n_cells()).map(|i| (i as f64 * 0.7).sin()).collect();
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let a = op.gagliardo_seminorm_sq(&u).unwrap();
        let b = op.gagliardo_seminorm_sq(&u2).unwrap();
        assert!(((b - 4.0 * a) / b).abs() < 1e-12);
        assert!(a > 0.0);
        assert!(matches!(op.gagliardo_seminorm_sq(&u[1..]), Err(Error::Shape { .. })));
    }

    #[test]
    fn quadratic_form_parts() {
        let g = Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 6).unwrap();
        let op = Operator::assemble(&g, 0.5).unwrap();
        let u = vec![0.3, -0.2, 1.0, 0.5, 0.1, 0.0];
        let zero = vec![0.0; 6];
        assert_eq!(op.quadratic_form(&zero, &u).unwrap(), op.energy(&u).unwrap());
        assert_eq!(op.quadratic_form(&u, &zero).unwrap(), 0.0);
    }

    #[test]
    fn mirrored_domain_gives_same_matrix() {
        // Mirror image of the interval; the kernel depends on |i - j| only.
        let a = Grid::new(&DomainSpec::Interval { a: -0.9, b: 0.4 }, 20).unwrap();
        let b = Grid::new(&DomainSpec::Interval { a: -0.4, b: 0.9 }, 20).unwrap();
        assert_eq!(a.n_cells(), b.n_cells());
        let oa = Operator::assemble(&a, 0.6).unwrap();
        let ob = Operator::assemble(&b, 0.6).unwrap();
        assert_eq!(oa.stiffness(), ob.stiffness());
    }

    #[test]
    fn too_large() {
        let g = Grid::new(&DomainSpec::Box { lengths: vec![1.0, 1.0] }, 66).unwrap();
        assert!(matches!(Operator::assemble(&g, 0.5), Err(Error::TooLarge { .. })));
    }
}
