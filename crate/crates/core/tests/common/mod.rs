//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fracweight::{DomainSpec, Grid, Operator};
use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

/// Admissible eigenvalues of `(A + D_V M) u = λ D_g M u`, ascending, with
/// eigenvectors, via the symmetric square root `K^{-1/2}`.
pub struct DensePencil {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_pencil(op: &Operator, g: &[f64], v: &[f64]) -> DensePencil {
    let n = g.len();
    let hn = op.cell_measure();
    let mut k = op.stiffness().clone();
    for i in 0..n {
        k[(i, i)] += v[i] * hn;
    }
    let ek = SymmetricEigen::new(k);
    assert!(ek.eigenvalues.iter().all(|&e| e > 0.0), "oracle needs a coercive form");
    let inv_sqrt = DMatrix::from_diagonal(&ek.eigenvalues.map(|e| 1.0 / e.sqrt()));
    let k_inv_half = &ek.eigenvectors * inv_sqrt * ek.eigenvectors.transpose();
    let d = DMatrix::from_diagonal(&DVector::from_iterator(n, g.iter().map(|x| x * hn)));
    let b = &k_inv_half * d * &k_inv_half;
    let b = (&b + b.transpose()) * 0.5;
    let eb = SymmetricEigen::new(b);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .filter(|&j| eb.eigenvalues[j] > 0.0)
        .map(|j| {
            let u = &k_inv_half * eb.eigenvectors.column(j);
            (1.0 / eb.eigenvalues[j], u.as_slice().to_vec())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    DensePencil {
        lambdas: pairs.iter().map(|p| p.0).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
    }
}

fn kernel(d2: f64, dim: usize, s: f64) -> f64 {
    d2.powf(-(dim as f64 + 2.0 * s) / 2.0)
}

/// Exterior integral `∫_{Ω^c} |x − y|^{−N−2s} dy` by midpoint sums over every
/// lattice cell outside the mask within `10·diam` of `x`, plus the radial tail.
fn killing_oracle(grid: &Grid, s: f64, x: &[f64]) -> f64 {
    let dim = grid.dim();
    let h = grid.h();
    let hn = grid.cell_measure();
    let rt = 10.0 * grid.domain().diameter();
    let reach = (rt / h).ceil() as i64 + grid.n_per_axis() as i64;
    let inside: std::collections::HashSet<Vec<i64>> =
        (0..grid.n_cells()).map(|c| grid.multi_index(c)[..dim].to_vec()).collect();
    let n = grid.n_per_axis() as i64;
    // lattice index i has center (2i + 1 − n) h / 2
    let xi: Vec<i64> = x.iter().map(|v| ((2.0 * v / h + n as f64 - 1.0) / 2.0).round() as i64).collect();
    let mut sum = 0.0;
    let ranges: Vec<std::ops::RangeInclusive<i64>> = (0..dim).map(|k| xi[k] - reach..=xi[k] + reach).collect();
    for idx in ranges.into_iter().multi_cartesian_product() {
        if inside.contains(&idx) {
            continue;
        }
        let d2: f64 = (0..dim).map(|k| ((idx[k] - xi[k]) as f64 * h).powi(2)).sum();
        if d2.sqrt() < rt {
            sum += kernel(d2, dim, s) * hn;
        }
    }
    let sigma = if dim == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    sum + sigma * rt.powf(-2.0 * s) / (2.0 * s)
}

/// Direct double sum for `[u]²_s` with `u` extended by zero.
pub fn gagliardo_double_sum(grid: &Grid, s: f64, u: &[f64]) -> f64 {
    let dim = grid.dim();
    let hn = grid.cell_measure();
    let n = grid.n_cells();
    let mut pair = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d2: f64 = grid.center(i).iter().zip(grid.center(j)).map(|(a, b)| (a - b).powi(2)).sum();
                pair += (u[i] - u[j]).powi(2) * kernel(d2, dim, s) * hn * hn;
            }
        }
    }
    let exterior: f64 = (0..n).map(|i| u[i] * u[i] * killing_oracle(grid, s, grid.center(i)) * hn).sum();
    pair + 2.0 * exterior
}

/// Largest `Σ w_i a_i` over all permutations of `values`, with the maximizing
/// arrangement.
pub fn brute_force_pairing(values: &[f64], a: &[f64], maximize: bool) -> (f64, Vec<f64>) {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for perm in (0..values.len()).permutations(values.len()) {
        let w: Vec<f64> = perm.iter().map(|&p| values[p]).collect();
        let obj: f64 = w.iter().zip(a).map(|(x, y)| x * y).sum();
        let better = match &best {
            None => true,
            Some((b, _)) => (maximize && obj > *b) || (!maximize && obj < *b),
        };
        if better {
            best = Some((obj, w));
        }
    }
    best.unwrap()
}

/// Distinct arrangements of a multiset.
pub fn distinct_arrangements(values: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..values.len())
        .permutations(values.len())
        .map(|p| p.iter().map(|&i| values[i]).collect::<Vec<f64>>())
        .collect();
    out.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    out.dedup();
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Small grids with at most 12 cells.
pub fn small_grids() -> Vec<Grid> {
    let mut out: Vec<Grid> = [2usize, 4, 6, 8, 10, 12]
        .iter()
        .map(|&n| Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, n).unwrap())
        .collect();
    out.push(Grid::new(&DomainSpec::Interval { a: -0.3, b: 1.0 }, 8).unwrap());
    out.push(Grid::new(&DomainSpec::Disc { radius: 1.0 }, 2).unwrap());
    out.push(Grid::new(&DomainSpec::Disc { radius: 1.0 }, 4).unwrap());
    out.push(Grid::new(&DomainSpec::Box { lengths: vec![2.0, 1.0] }, 4).unwrap());
    out.push(Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.0 }, 4).unwrap());
    for g in &out {
        assert!(g.n_cells() <= 12);
    }
    out
}

/// Random potential with `λ_min(A) + min(V) h^N > 0`.
pub fn random_coercive_potential(op: &Operator, rng: &mut impl Rng) -> Vec<f64> {
    let floor = min_eig(op.stiffness()) / op.cell_measure();
    (0..op.n_cells()).map(|_| rng.random_range(-0.9 * floor..2.0 * floor)).collect()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
