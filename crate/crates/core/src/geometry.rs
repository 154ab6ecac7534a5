//! Masked uniform lattices and lattice-exact reflections.
//!
//! A [`Grid`] is an `n^N` lattice of square cells covering `[-L, L]^N`, with
//! centers at half-integer multiples of the spacing `h = 2L/n`. A cell belongs
//! to the domain when its center lies in the (open) domain. Fields are stored
//! as one value per inside cell, in lattice order.
//!
//! Reflections are handled exactly on integer "doubled coordinates": a center
//! `x_k = X_k h / 2` with `X_k` odd. A half-space is lattice compatible when its
//! reflection is an affine signed permutation of the doubled coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIDE_EPS: f64 = 1e-9;

/// Supported domain shapes. Boxes are centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Open interval `(a, b)` in one dimension.
    Interval { a: f64, b: f64 },
    /// Open box `prod (-l_k/2, l_k/2)`, one or two axes.
    Box { lengths: Vec<f64> },
    /// Open disc of radius `radius` about the origin.
    Disc { radius: f64 },
    /// `B_outer(0)` minus the closed disc of radius `inner` centered at `(offset, 0)`.
    Annulus {
        outer: f64,
        inner: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Box { lengths } => lengths.len(),
            DomainSpec::Disc { .. } | DomainSpec::Annulus { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            DomainSpec::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("interval needs a < b, got ({a}, {b})"));
                }
            }
            DomainSpec::Box { lengths } => {
                if lengths.is_empty() || lengths.len() > 2 {
                    return bad(format!("box needs 1 or 2 lengths, got {}", lengths.len()));
                }
                if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return bad("box lengths must be positive".into());
                }
            }
            DomainSpec::Disc { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("disc radius must be positive, got {radius}"));
                }
            }
            DomainSpec::Annulus { outer, inner, offset } => {
                if !(outer.is_finite() && inner.is_finite() && offset.is_finite()) {
                    return bad("annulus parameters must be finite".into());
                }
                if !(*inner > 0.0 && *offset >= 0.0 && *offset < outer - inner) {
                    return bad(format!(
                        "annulus needs 0 < r and 0 <= t < R - r, got R={outer}, r={inner}, t={offset}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Interval { a, b } => *a < x[0] && x[0] < *b,
            DomainSpec::Box { lengths } => lengths.iter().zip(x).all(|(l, xi)| xi.abs() < l / 2.0),
            DomainSpec::Disc { radius } => x[0] * x[0] + x[1] * x[1] < radius * radius,
            DomainSpec::Annulus { outer, inner, offset } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let dx = x[0] - offset;
                let hole2 = dx * dx + x[1] * x[1];
                r2 < outer * outer && hole2 > inner * inner
            }
        }
    }

    /// Half-width `L` of the origin-centered bounding box `[-L, L]^N`.
    pub fn half_extent(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => a.abs().max(b.abs()),
            DomainSpec::Box { lengths } => lengths.iter().cloned().fold(0.0, f64::max) / 2.0,
            DomainSpec::Disc { radius } => *radius,
            DomainSpec::Annulus { outer, .. } => *outer,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Box { lengths } => lengths.iter().map(|l| l * l).sum::<f64>().sqrt(),
            DomainSpec::Disc { radius } => 2.0 * radius,
            DomainSpec::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Disc or concentric annulus.
    pub fn is_radial(&self) -> bool {
        match self {
            DomainSpec::Disc { .. } => true,
            DomainSpec::Annulus { offset, .. } => *offset == 0.0,
            _ => false,
        }
    }
}

/// Open half-space `{x : x·normal > offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub grid_compatible: bool,
}

impl HalfSpace {
    /// Normalizes `normal`. The compatibility flag is left unset; use
    /// [`Grid::halfspace`] to obtain a checked half-space.
    pub fn new(normal: &[f64], offset: f64) -> Result<Self> {
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if normal.is_empty() || normal.len() > 2 || !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Parameter(format!("invalid half-space normal {normal:?}")));
        }
        if !offset.is_finite() {
            return Err(Error::Parameter("half-space offset must be finite".into()));
        }
        Ok(HalfSpace {
            normal: normal.iter().map(|v| v / norm).collect(),
            offset,
            grid_compatible: false,
        })
    }

    /// `H̄^c = {x·ν < c}`, written as `{x·(−ν) > −c}`.
    pub fn complement(&self) -> HalfSpace {
        HalfSpace {
            normal: self.normal.iter().map(|v| -v).collect(),
            offset: -self.offset,
            grid_compatible: self.grid_compatible,
        }
    }

    /// Whether `0` lies in the closure of `H`.
    pub fn contains_origin_closure(&self) -> bool {
        self.offset <= 0.0
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) > self.offset
    }

    /// Continuous reflection across `∂H`.
    pub fn reflect_point(&self, x: &[f64]) -> Vec<f64> {
        let d = dot(&self.normal, x) - self.offset;
        x.iter().zip(&self.normal).map(|(xi, ni)| xi - 2.0 * d * ni).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Position of a cell center relative to a half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inside,
    Boundary,
    Complement,
}

/// Image of an inside cell under a reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Image {
    Cell(usize),
    /// The reflected center is not an inside cell, so zero-extended fields vanish there.
    Exterior,
}

/// Half-space families sampled on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HalfSpaceFamily {
    /// Half-spaces containing the hyperplane `{x_axis = 0}` with parallel
    /// boundary, at every lattice-exact offset inside the bounding box.
    Steiner { axis: usize },
    /// Lattice-exact half-spaces with `0 ∈ ∂H`.
    ThroughOrigin,
    /// Through-origin half-spaces that contain `gamma`.
    ThroughOriginContaining { gamma: Vec<f64> },
}

/// Reflection as an affine signed permutation of doubled coordinates.
#[derive(Debug, Clone, Copy)]
struct LatticeMap {
    perm: [[i64; 2]; 2],
    shift: [i64; 2],
}

impl LatticeMap {
    fn apply(&self, x: [i64; 2], dim: usize) -> [i64; 2] {
        let mut out = [0i64; 2];
        for (r, o) in out.iter_mut().enumerate().take(dim) {
            *o = (0..dim).map(|c| self.perm[r][c] * x[c]).sum::<i64>() + self.shift[r];
        }
        out
    }
}

/// Precomputed reflection of every inside cell.
#[derive(Debug, Clone)]
pub struct ReflectionMap {
    pub halfspace: HalfSpace,
    pub image: Vec<Image>,
    pub side: Vec<Side>,
}

/// Masked uniform lattice.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: DomainSpec,
    dim: usize,
    n: usize,
    h: f64,
    half_width: f64,
    inside: Vec<bool>,
    lattice_to_cell: Vec<Option<usize>>,
    cells: Vec<usize>,
    centers: Vec<f64>,
}

/// Builds the masked lattice for `spec` with `n` cells per axis.
pub fn build_grid(spec: &DomainSpec, n: usize) -> Result<Grid> {
    Grid::new(spec, n)
}

impl Grid {
    pub fn new(spec: &DomainSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n < 2 || n % 2 != 0 {
            return Err(Error::Parameter(format!(
                "n must be an even integer >= 2 (cell centers at half-integer multiples of h), got {n}"
            )));
        }
        let dim = spec.dim();
        let half_width = spec.half_extent();
        let h = 2.0 * half_width / n as f64;

        let mut domain = spec.clone();
        if let DomainSpec::Annulus { outer, inner, offset } = &mut domain {
            let mut t = (*offset / h).round() * h;
            while t > 0.0 && t >= *outer - *inner {
                t -= h;
            }
            *offset = t.max(0.0);
        }

        let lattice_len = n.pow(dim as u32);
        let mut inside = vec![false; lattice_len];
        let mut lattice_to_cell = vec![None; lattice_len];
        let mut cells = Vec::new();
        let mut centers = Vec::new();
        for l in 0..lattice_len {
            let x = lattice_center_of(l, n, dim, h);
            if domain.contains(&x[..dim]) {
                inside[l] = true;
                lattice_to_cell[l] = Some(cells.len());
                cells.push(l);
                centers.extend_from_slice(&x[..dim]);
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(Grid { domain, dim, n, h, half_width, inside, lattice_to_cell, cells, centers })
    }

    /// Effective domain (annulus offset snapped to the lattice).
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `h^N`.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn lattice_len(&self) -> usize {
        self.inside.len()
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        &self.centers[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks(self.dim)
    }

    pub fn lattice_index(&self, cell: usize) -> usize {
        self.cells[cell]
    }

    pub fn cell_of_lattice(&self, lattice: usize) -> Option<usize> {
        self.lattice_to_cell[lattice]
    }

    pub fn lattice_center(&self, lattice: usize) -> Vec<f64> {
        lattice_center_of(lattice, self.n, self.dim, self.h)[..self.dim].to_vec()
    }

    /// Integer lattice multi-index of an inside cell.
    pub fn multi_index(&self, cell: usize) -> [i64; 2] {
        self.lattice_multi_index(self.cells[cell])
    }

    fn lattice_multi_index(&self, lattice: usize) -> [i64; 2] {
        let mut idx = [0i64; 2];
        let mut rem = lattice;
        for slot in idx.iter_mut().take(self.dim) {
            *slot = (rem % self.n) as i64;
            rem /= self.n;
        }
        idx
    }

    fn doubled(&self, lattice: usize) -> [i64; 2] {
        let mi = self.lattice_multi_index(lattice);
        let mut out = [0i64; 2];
        for k in 0..self.dim {
            out[k] = 2 * mi[k] + 1 - self.n as i64;
        }
        out
    }

    fn lattice_of_doubled(&self, x: [i64; 2]) -> Option<usize> {
        let mut lattice = 0usize;
        let mut stride = 1usize;
        for &xk in x.iter().take(self.dim) {
            let i = xk + self.n as i64 - 1;
            if i % 2 != 0 {
                return None;
            }
            let i = i / 2;
            if i < 0 || i >= self.n as i64 {
                return None;
            }
            lattice += i as usize * stride;
            stride *= self.n;
        }
        Some(lattice)
    }

    /// Checks lattice compatibility and returns the half-space with the flag set.
    pub fn halfspace(&self, normal: &[f64], offset: f64) -> Result<HalfSpace> {
        if normal.len() != self.dim {
            return Err(Error::Parameter(format!(
                "half-space normal has {} components, grid is {}-dimensional",
                normal.len(),
                self.dim
            )));
        }
        let mut hs = HalfSpace::new(normal, offset)?;
        hs.grid_compatible = self.lattice_map(&hs).is_some();
        Ok(hs)
    }

    fn lattice_map(&self, hs: &HalfSpace) -> Option<LatticeMap> {
        if hs.normal.len() != self.dim {
            return None;
        }
        let mut perm = [[0i64; 2]; 2];
        let mut shift = [0i64; 2];
        for r in 0..self.dim {
            for c in 0..self.dim {
                let delta = if r == c { 1.0 } else { 0.0 };
                let v = delta - 2.0 * hs.normal[r] * hs.normal[c];
                let rounded = v.round();
                if (v - rounded).abs() > 1e-12 {
                    return None;
                }
                perm[r][c] = rounded as i64;
            }
            // shift in doubled units: 2cν / (h/2)
            let b = 4.0 * hs.offset * hs.normal[r] / self.h;
            let rounded = b.round();
            if (b - rounded).abs() > 1e-9 || (rounded as i64) % 2 != 0 {
                return None;
            }
            shift[r] = rounded as i64;
        }
        Some(LatticeMap { perm, shift })
    }

    fn checked_map(&self, hs: &HalfSpace) -> Result<LatticeMap> {
        self.lattice_map(hs).ok_or_else(|| {
            Error::Compatibility(format!("normal {:?}, offset {}", hs.normal, hs.offset))
        })
    }

    fn side_of_lattice(&self, hs: &HalfSpace, lattice: usize) -> Side {
        let x = self.lattice_center(lattice);
        let d = dot(&hs.normal, &x) - hs.offset;
        if d.abs() <= SIDE_EPS * self.h {
            Side::Boundary
        } else if d > 0.0 {
            Side::Inside
        } else {
            Side::Complement
        }
    }

    pub fn side(&self, hs: &HalfSpace, cell: usize) -> Side {
        self.side_of_lattice(hs, self.cells[cell])
    }

    /// Reflects a lattice cell; `None` when the image leaves the bounding box.
    pub fn reflect_lattice(&self, hs: &HalfSpace, lattice: usize) -> Result<Option<usize>> {
        let map = self.checked_map(hs)?;
        Ok(self.lattice_of_doubled(map.apply(self.doubled(lattice), self.dim)))
    }

    /// Reflects an inside cell across `∂H`.
    pub fn reflect_cell(&self, hs: &HalfSpace, cell: usize) -> Result<Image> {
        let map = self.checked_map(hs)?;
        Ok(self.image_with(&map, cell))
    }

    fn image_with(&self, map: &LatticeMap, cell: usize) -> Image {
        let target = map.apply(self.doubled(self.cells[cell]), self.dim);
        match self.lattice_of_doubled(target).and_then(|l| self.lattice_to_cell[l]) {
            Some(c) => Image::Cell(c),
            None => Image::Exterior,
        }
    }

    pub fn reflection_map(&self, hs: &HalfSpace) -> Result<ReflectionMap> {
        let map = self.checked_map(hs)?;
        let image = (0..self.n_cells()).map(|c| self.image_with(&map, c)).collect();
        let side = (0..self.n_cells()).map(|c| self.side(hs, c)).collect();
        let mut halfspace = hs.clone();
        halfspace.grid_compatible = true;
        Ok(ReflectionMap { halfspace, image, side })
    }

    /// Discrete `Ω_H = Ω`: every inside cell strictly on the complement side
    /// reflects onto an inside cell.
    pub fn is_polarization_invariant(&self, hs: &HalfSpace) -> Result<bool> {
        let rm = self.reflection_map(hs)?;
        Ok(rm
            .side
            .iter()
            .zip(&rm.image)
            .all(|(s, img)| *s != Side::Complement || matches!(img, Image::Cell(_))))
    }

    /// Discrete `σ_H(Ω) = Ω`.
    pub fn is_reflection_invariant(&self, hs: &HalfSpace) -> Result<bool> {
        let rm = self.reflection_map(hs)?;
        Ok(rm.image.iter().all(|img| matches!(img, Image::Cell(_))))
    }

    fn through_origin_normals(&self) -> Vec<Vec<f64>> {
        if self.dim == 1 {
            return vec![vec![1.0], vec![-1.0]];
        }
        let d = std::f64::consts::FRAC_1_SQRT_2;
        vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![d, d],
            vec![-d, -d],
            vec![d, -d],
            vec![-d, d],
        ]
    }

    /// Enumerates the lattice-exact members of a half-space family.
    pub fn compatible_halfspaces(&self, family: &HalfSpaceFamily) -> Result<Vec<HalfSpace>> {
        let mut out = Vec::new();
        match family {
            HalfSpaceFamily::Steiner { axis } => {
                if *axis >= self.dim {
                    return Err(Error::Parameter(format!(
                        "axis {axis} out of range for a {}-dimensional grid",
                        self.dim
                    )));
                }
                // Hyperplanes at ±m h/2, m >= 1, oriented so the half-space contains 0.
                for m in 1..self.n {
                    let c = m as f64 * self.h / 2.0;
                    for sign in [1.0, -1.0] {
                        let mut normal = vec![0.0; self.dim];
                        normal[*axis] = sign;
                        out.push(self.halfspace(&normal, -c)?);
                    }
                }
            }
            HalfSpaceFamily::ThroughOrigin => {
                for normal in self.through_origin_normals() {
                    out.push(self.halfspace(&normal, 0.0)?);
                }
            }
            HalfSpaceFamily::ThroughOriginContaining { gamma } => {
                if gamma.len() != self.dim {
                    return Err(Error::Parameter(format!(
                        "direction has {} components, grid is {}-dimensional",
                        gamma.len(),
                        self.dim
                    )));
                }
                for normal in self.through_origin_normals() {
                    if dot(&normal, gamma) > 1e-12 {
                        out.push(self.halfspace(&normal, 0.0)?);
                    }
                }
            }
        }
        debug_assert!(out.iter().all(|h| h.grid_compatible));
        Ok(out)
    }

    /// Bins inside cells by `⌊|x| / width⌋`; empty bins are omitted.
    pub fn radial_shells(&self, width: f64) -> Result<Vec<Vec<usize>>> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Parameter(format!("shell width must be positive, got {width}")));
        }
        let mut bins: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
        for (c, x) in self.centers().enumerate() {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            bins.entry((r / width).floor() as u64).or_default().push(c);
        }
        Ok(bins.into_values().collect())
    }

    /// Checks that `field` has one value per inside cell.
    pub fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_cells() {
            return Err(Error::Shape { expected: self.n_cells(), got: field.len() });
        }
        Ok(())
    }
}

fn lattice_center_of(lattice: usize, n: usize, dim: usize, h: f64) -> [f64; 2] {
    let mut x = [0.0; 2];
    let mut rem = lattice;
    for xk in x.iter_mut().take(dim) {
        let i = rem % n;
        rem /= n;
        *xk = (2 * i as i64 + 1 - n as i64) as f64 * h / 2.0;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval4() -> Grid {
        Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 4).unwrap()
    }

    fn disc2() -> Grid {
        Grid::new(&DomainSpec::Disc { radius: 1.0 }, 2).unwrap()
    }

    fn find(grid: &Grid, x: &[f64]) -> usize {
        grid.centers()
            .position(|c| c.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-12))
            .unwrap()
    }

    #[test]
    fn interval_partition() {
        let g = interval4();
        assert_eq!(g.n_cells(), 4);
        assert_eq!(g.h(), 0.5);
        let xs: Vec<f64> = g.centers().map(|c| c[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.cell_measure(), 0.5);
    }

    #[test]
    fn disc_four_cells() {
        let g = disc2();
        assert_eq!(g.n_cells(), 4);
        assert_eq!(g.h(), 1.0);
        for c in g.centers() {
            assert_eq!(c[0].abs(), 0.5);
            assert_eq!(c[1].abs(), 0.5);
        }
    }

    #[test]
    fn coarse_annulus_count() {
        let g = Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.0 }, 4).unwrap();
        // 4 centers in the hole (|x|≈0.354), 4 corners outside (|x|≈1.06).
        assert_eq!(g.n_cells(), 8);
        for c in g.centers() {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            assert!((r - 0.790569415).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            Grid::new(&DomainSpec::Interval { a: 1.0, b: -1.0 }, 4),
            Err(Error::Parameter(_))
        ));
        assert!(Grid::new(&DomainSpec::Disc { radius: 0.0 }, 4).is_err());
        assert!(Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.5, offset: 0.5 }, 8).is_err());
        assert!(Grid::new(&DomainSpec::Box { lengths: vec![] }, 4).is_err());
        assert!(Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 5).is_err());
        assert!(Grid::new(&DomainSpec::Interval { a: -1.0, b: 1.0 }, 0).is_err());
    }

    #[test]
    fn empty_domain() {
        // Annulus whose ring falls between the n = 2 centers (|x| ≈ 0.707).
        let spec = DomainSpec::Annulus { outer: 1.0, inner: 0.8, offset: 0.0 };
        assert!(matches!(Grid::new(&spec, 2), Err(Error::EmptyDomain)));
    }

    #[test]
    fn annulus_offset_snaps() {
        let spec = DomainSpec::Annulus { outer: 1.0, inner: 0.3, offset: 0.23 };
        let g = Grid::new(&spec, 8).unwrap();
        match g.domain() {
            DomainSpec::Annulus { offset, .. } => assert_eq!(*offset, 0.25),
            _ => unreachable!(),
        }
    }

    #[test]
    fn reflect_examples() {
        let g = interval4();
        let h0 = g.halfspace(&[1.0], 0.0).unwrap();
        assert!(h0.grid_compatible);
        assert_eq!(g.reflect_cell(&h0, find(&g, &[-0.25])).unwrap(), Image::Cell(find(&g, &[0.25])));

        let h1 = g.halfspace(&[1.0], 0.25).unwrap();
        assert!(h1.grid_compatible);
        assert_eq!(g.reflect_cell(&h1, find(&g, &[0.25])).unwrap(), Image::Cell(find(&g, &[0.25])));
        assert_eq!(g.reflect_cell(&h1, find(&g, &[-0.25])).unwrap(), Image::Cell(find(&g, &[0.75])));
        assert_eq!(g.side(&h1, find(&g, &[0.25])), Side::Boundary);
        // 2c − x = 0.5 + 0.75 leaves the domain.
        assert_eq!(g.reflect_cell(&h1, find(&g, &[-0.75])).unwrap(), Image::Exterior);

        let d = disc2();
        let e1 = d.halfspace(&[1.0, 0.0], 0.0).unwrap();
        assert_eq!(
            d.reflect_cell(&e1, find(&d, &[-0.5, 0.5])).unwrap(),
            Image::Cell(find(&d, &[0.5, 0.5]))
        );
    }

    #[test]
    fn incompatible_halfspace() {
        let g = interval4();
        let hs = g.halfspace(&[1.0], 0.1).unwrap();
        assert!(!hs.grid_compatible);
        assert!(matches!(g.reflect_cell(&hs, 0), Err(Error::Compatibility(_))));
        let d = disc2();
        let tilted = d.halfspace(&[0.6, 0.8], 0.0).unwrap();
        assert!(!tilted.grid_compatible);
    }

    #[test]
    fn families() {
        let g = interval4();
        let st = g.compatible_halfspaces(&HalfSpaceFamily::Steiner { axis: 0 }).unwrap();
        // offsets h/2, h, 3h/2 on either side of 0, each containing the origin
        assert_eq!(st.len(), 6);
        assert!(st.iter().all(|h| h.offset < 0.0 && h.contains_point(&[0.0])));

        let d = Grid::new(&DomainSpec::Disc { radius: 1.0 }, 8).unwrap();
        let all = d.compatible_halfspaces(&HalfSpaceFamily::ThroughOrigin).unwrap();
        assert_eq!(all.len(), 8);
        let sub = d
            .compatible_halfspaces(&HalfSpaceFamily::ThroughOriginContaining { gamma: vec![-1.0, 0.0] })
            .unwrap();
        assert_eq!(sub.len(), 3);
        let d2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut normals: Vec<Vec<f64>> = sub.iter().map(|h| h.normal.clone()).collect();
        normals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(normals, vec![vec![-1.0, 0.0], vec![-d2, -d2], vec![-d2, d2]]);
    }

    #[test]
    fn shells() {
        let d = disc2();
        assert_eq!(d.radial_shells(1.0).unwrap(), vec![vec![0, 1, 2, 3]]);
        let a = Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.0 }, 4).unwrap();
        let sh = a.radial_shells(0.5).unwrap();
        assert_eq!(sh.len(), 1);
        assert_eq!(sh[0].len(), 8);
        let fine = Grid::new(&DomainSpec::Disc { radius: 1.0 }, 8).unwrap();
        let sh = fine.radial_shells(0.01).unwrap();
        assert!(sh.iter().all(|b| !b.is_empty()));
        let total: usize = sh.iter().map(Vec::len).sum();
        assert_eq!(total, fine.n_cells());
        assert!(fine.radial_shells(0.0).is_err());
    }

    #[test]
    fn reflection_involution_and_symmetric_domains() {
        for spec in [
            DomainSpec::Disc { radius: 1.0 },
            DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.0 },
        ] {
            let g = Grid::new(&spec, 16).unwrap();
            for hs in g.compatible_halfspaces(&HalfSpaceFamily::ThroughOrigin).unwrap() {
                for c in 0..g.n_cells() {
                    match g.reflect_cell(&hs, c).unwrap() {
                        Image::Cell(r) => assert_eq!(g.reflect_cell(&hs, r).unwrap(), Image::Cell(c)),
                        Image::Exterior => panic!("symmetric domain reflected outside"),
                    }
                }
            }
        }
    }

    #[test]
    fn exterior_cells_in_h_stay_exterior() {
        let grids = [
            Grid::new(&DomainSpec::Disc { radius: 1.0 }, 16).unwrap(),
            Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.0 }, 16).unwrap(),
            Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.3 }, 16).unwrap(),
        ];
        for g in &grids {
            let mut families = vec![HalfSpaceFamily::ThroughOriginContaining { gamma: vec![-1.0, 0.0] }];
            if g.domain().is_radial() {
                families.push(HalfSpaceFamily::ThroughOrigin);
            }
            // annuli are not Steiner convex
            if matches!(g.domain(), DomainSpec::Disc { .. }) {
                families.push(HalfSpaceFamily::Steiner { axis: 0 });
                families.push(HalfSpaceFamily::Steiner { axis: 1 });
            }
            for fam in families {
                for hs in g.compatible_halfspaces(&fam).unwrap() {
                    assert!(g.is_polarization_invariant(&hs).unwrap(), "{hs:?}");
                    for l in 0..g.lattice_len() {
                        if g.inside_mask()[l] || g.side_of_lattice(&hs, l) != Side::Inside {
                            continue;
                        }
                        if let Some(img) = g.reflect_lattice(&hs, l).unwrap() {
                            assert!(!g.inside_mask()[img]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn offset_annulus_is_not_invariant_for_hole_side() {
        let g = Grid::new(&DomainSpec::Annulus { outer: 1.0, inner: 0.4, offset: 0.25 }, 16).unwrap();
        let toward_hole = g.halfspace(&[1.0, 0.0], 0.0).unwrap();
        assert!(!g.is_polarization_invariant(&toward_hole).unwrap());
        let away = g.halfspace(&[-1.0, 0.0], 0.0).unwrap();
        assert!(g.is_polarization_invariant(&away).unwrap());
        assert!(!g.is_reflection_invariant(&away).unwrap());
    }

    #[test]
    fn center_multiset_symmetric_under_dihedral_group() {
        let g = Grid::new(&DomainSpec::Disc { radius: 1.0 }, 12).unwrap();
        for hs in g.compatible_halfspaces(&HalfSpaceFamily::ThroughOrigin).unwrap() {
            let mut images: Vec<Vec<f64>> = g.centers().map(|c| hs.reflect_point(c)).collect();
            let mut orig: Vec<Vec<f64>> = g.centers().map(|c| c.to_vec()).collect();
            let key = |v: &Vec<f64>| v.iter().map(|x| (x * 1e9).round() as i64).collect::<Vec<_>>();
            images.sort_by_key(key);
            orig.sort_by_key(key);
            for (a, b) in images.iter().zip(&orig) {
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
    }
}
