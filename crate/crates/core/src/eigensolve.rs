//! First eigenpair of `(A + D_V M) u = λ D_g M u`.
//!
//! The pencil is inverted: with `A + D_V M = L Lᵀ`, the largest eigenvalue
//! `μ` of `B = L⁻¹ D_g M L⁻ᵀ` gives `λ₁ = 1/μ`. This covers sign-changing `g`
//! without shifts, and the admissible set `{Σ g u² > 0}` corresponds exactly to
//! the positive part of the spectrum of `B`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracop::Operator;

/// Default relative tolerance on `μ`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Two largest `μ` closer than this (relative) are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

const MAX_KRYLOV: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// Smallest eigenvalue of `A + D_V M` for the given `V`.
    pub min_eig: f64,
    pub coercive: bool,
    /// Smallest of the given and adversarial eigenvalues.
    pub margin: f64,
    /// Smallest eigenvalue after pairing the most negative values of `V`
    /// with the smallest diagonal entries of `A`.
    pub adversarial_min_eig: f64,
    /// Weyl bound `λ_min(A) + min(V) h^N`, valid for every rearrangement of `V`.
    pub class_lower_bound: f64,
}

fn smallest_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `A + D_V M`, for `V` as given and for the most
/// adversarial rearrangement of its values.
pub fn coercivity_check(op: &Operator, potential: &[f64]) -> Result<CoercivityReport> {
    op.check(potential)?;
    let min_eig = smallest_eigenvalue(op.shifted(potential)?);

    let a = op.stiffness();
    let mut cells: Vec<usize> = (0..op.n_cells()).collect();
    cells.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let mut values = potential.to_vec();
    values.sort_by(f64::total_cmp);
    let mut adversarial = vec![0.0; op.n_cells()];
    for (cell, v) in cells.iter().zip(values) {
        adversarial[*cell] = v;
    }
    let adversarial_min_eig = smallest_eigenvalue(op.shifted(&adversarial)?);

    let a_min = smallest_eigenvalue(a.clone());
    let v_min = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport {
        min_eig,
        coercive: min_eig > 0.0,
        margin: min_eig.min(adversarial_min_eig),
        adversarial_min_eig,
        class_lower_bound: a_min + v_min * op.cell_measure(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Normalized so that `Σ g u² h^N = 1` and `Σ u > 0`.
    pub u: Vec<f64>,
    /// `‖(A + D_V M)u − λ D_g M u‖ / (‖u‖ ‖A + D_V M‖_∞)`.
    pub residual: f64,
    pub normalized: bool,
    /// Krylov dimension used (0 for the dense path).
    pub iterations: usize,
    /// Set when the two largest pencil eigenvalues coincide to `DEGENERACY_TOL`.
    pub degenerate: bool,
}

/// `A + D_V M` with its Cholesky factor, reusable across weights `g`.
pub struct FactoredPencil<'a> {
    op: &'a Operator,
    potential: Vec<f64>,
    shifted: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    row_norm: f64,
}

impl<'a> FactoredPencil<'a> {
    pub fn new(op: &'a Operator, potential: &[f64]) -> Result<Self> {
        let shifted = op.shifted(potential)?;
        let chol = match Cholesky::new(shifted.clone()) {
            Some(c) => c,
            None => return Err(Error::NotCoercive { min_eig: smallest_eigenvalue(shifted) }),
        };
        let row_norm = shifted
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(FactoredPencil { op, potential: potential.to_vec(), shifted, chol, row_norm })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn apply_b(&self, l: &DMatrix<f64>, weights: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let mut w = l.tr_solve_lower_triangular(v).expect("nonsingular Cholesky factor");
        for (wi, d) in w.iter_mut().zip(weights) {
            *wi *= d;
        }
        l.solve_lower_triangular(&w).expect("nonsingular Cholesky factor")
    }

    /// First eigenpair for weight `g`; `tol` is relative on `μ = 1/λ`.
    pub fn first_eigenpair(&self, g: &[f64], tol: f64) -> Result<EigenPair> {
        self.op.check(g)?;
        if !(tol > 0.0) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
        }
        if !g.iter().any(|&v| v > 0.0) {
            return Err(Error::Assumption("g+ is identically zero".into()));
        }
        let n = g.len();
        let hn = self.op.cell_measure();
        let weights: Vec<f64> = g.iter().map(|v| v * hn).collect();
        let l = self.chol.l();

        let (mu, y, second, iterations) = if n <= 2 {
            let (mu, y, second) = self.dense_top(&l, &weights);
            (mu, y, second, 0)
        } else {
            match self.lanczos_top(&l, &weights, tol) {
                Some(found) => found,
                None => {
                    let (mu, y, second) = self.dense_top(&l, &weights);
                    (mu, y, second, 0)
                }
            }
        };
        if !(mu > 0.0) {
            return Err(Error::NoPositiveDirection { mu });
        }
        let degenerate = second.is_some_and(|s| (mu - s).abs() <= DEGENERACY_TOL * mu);

        let mut u = l.tr_solve_lower_triangular(&y).expect("nonsingular Cholesky factor");
        if u.sum() < 0.0 {
            u.neg_mut();
        }
        let mass: f64 = u.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        if !(mass > 0.0) {
            return Err(Error::Denominator(mass));
        }
        u /= mass.sqrt();
        let lambda = 1.0 / mu;

        if g.iter().all(|&v| v >= 0.0) && !degenerate {
            let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::Positivity { min });
            }
        }
        let residual = self.residual_of(g, lambda, u.as_slice());
        Ok(EigenPair { lambda, u: u.as_slice().to_vec(), residual, normalized: true, iterations, degenerate })
    }

    fn residual_of(&self, g: &[f64], lambda: f64, u: &[f64]) -> f64 {
        let hn = self.op.cell_measure();
        let uv = DVector::from_column_slice(u);
        let mut r = &self.shifted * &uv;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri -= lambda * g[i] * hn * u[i];
        }
        r.norm() / (uv.norm() * self.row_norm)
    }

    /// Dense eigen-decomposition of `B`; returns `(μ_max, y, μ_second)`.
    fn dense_top(&self, l: &DMatrix<f64>, weights: &[f64]) -> (f64, DVector<f64>, Option<f64>) {
        let n = weights.len();
        let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonsingular Cholesky factor");
        let mut scaled = linv.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= weights[j];
        }
        let b = &scaled * linv.transpose();
        let b = (&b + b.transpose()) * 0.5;
        let eig = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = order[0];
        let second = order.get(1).map(|&i| eig.eigenvalues[i]);
        (eig.eigenvalues[top], eig.eigenvectors.column(top).into_owned(), second)
    }

    /// Lanczos with full reorthogonalization on `B`.
    fn lanczos_top(
        &self,
        l: &DMatrix<f64>,
        weights: &[f64],
        tol: f64,
    ) -> Option<(f64, DVector<f64>, Option<f64>, usize)> {
        let n = weights.len();
        let max_dim = n.min(MAX_KRYLOV);
        // Start near Lᵀ·1 (the image of a positive field), perturbed so that no
        // eigenvector is missed by exact orthogonality.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let ones = DVector::from_element(n, 1.0);
        let mut q = l.transpose() * ones;
        let typical = q.norm() / (n as f64).sqrt();
        for qi in q.iter_mut() {
            *qi += 1e-3 * typical * (rng.random::<f64>() - 0.5);
        }
        q /= q.norm();

        let mut basis: Vec<DVector<f64>> = vec![q];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut scale = 0.0f64;
        for k in 0..max_dim {
            let mut w = self.apply_b(l, weights, &basis[k]);
            let a = basis[k].dot(&w);
            alpha.push(a);
            // two passes of classical Gram–Schmidt against the whole basis
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let b_next = w.norm();
            let dim = k + 1;
            scale = scale.max(a.abs()).max(b_next);
            let invariant = b_next <= 1e-14 * scale;
            if dim % 4 == 0 || invariant || dim == max_dim {
                let eig = SymmetricEigen::new(tridiagonal(&alpha, &beta));
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
                let top = order[0];
                let mu = eig.eigenvalues[top];
                let s = eig.eigenvectors.column(top);
                let ritz_residual = (b_next * s[dim - 1]).abs();
                if ritz_residual <= tol * mu.abs() || invariant {
                    let mut y = DVector::zeros(n);
                    for (j, b) in basis.iter().enumerate() {
                        y.axpy(s[j], b, 1.0);
                    }
                    let norm = y.norm();
                    y /= norm;
                    let second = order.get(1).map(|&i| eig.eigenvalues[i]);
                    return Some((mu, y, second, dim));
                }
            }
            if invariant {
                return None;
            }
            beta.push(b_next);
            basis.push(w / b_next);
        }
        None
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// First eigenpair of the weighted problem with weight `g` and potential `V`.
pub fn first_eigenpair(op: &Operator, g: &[f64], potential: &[f64], tol: f64) -> Result<EigenPair> {
    FactoredPencil::new(op, potential)?.first_eigenpair(g, tol)
}

/// `(u·A·u + Σ V u² h^N) / Σ g u² h^N`.
pub fn rayleigh_quotient(op: &Operator, g: &[f64], potential: &[f64], u: &[f64]) -> Result<f64> {
    op.check(g)?;
    let denom: f64 = g.iter().zip(u).map(|(w, x)| w * x * x).sum::<f64>() * op.cell_measure();
    let numer = op.quadratic_form(potential, u)?;
    if !(denom > 0.0) {
        return Err(Error::Denominator(denom));
    }
    Ok(numer / denom)
}

/// Relative residual of `pair` against the pencil `(A + D_V M, D_g M)`.
pub fn residual(op: &Operator, g: &[f64], potential: &[f64], pair: &EigenPair) -> Result<f64> {
    op.check(g)?;
    op.check(&pair.u)?;
    let k = op.shifted(potential)?;
    let row_norm = k.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let u = DVector::from_column_slice(&pair.u);
    let mut r = &k * &u;
    for (i, ri) in r.iter_mut().enumerate() {
        *ri -= pair.lambda * g[i] * op.cell_measure() * pair.u[i];
    }
    Ok(r.norm() / (u.norm() * row_norm))
}
