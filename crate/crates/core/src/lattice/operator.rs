use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::geometry::Region;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default cap on operator dimension for dense routines.
pub const DIM_CAP: usize = 4096;

/// Relative tolerance for the Hermitian check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// `d^n`, or a cap error if it would overflow or exceed `cap`.
pub fn region_dim(site_dim: usize, sites: usize, cap: usize) -> Result<usize> {
    let dim = (site_dim as u64)
        .checked_pow(sites as u32)
        .filter(|&v| v <= cap as u64)
        .ok_or(Error::DimensionCap {
            dim: (site_dim as f64).powi(sites as i32).min(usize::MAX as f64) as usize,
            cap,
        })?;
    Ok(dim as usize)
}

/// A dense operator attached to a finite region. Tensor legs follow the
/// lexicographic site order of the region, first site most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    region: Region,
    site_dim: usize,
    matrix: CMatrix,
}

impl LocalOperator {
    pub fn new(region: Region, site_dim: usize, matrix: CMatrix) -> Result<Self> {
        if site_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "site dimension must be >= 2, got {site_dim}"
            )));
        }
        let expected = region_dim(site_dim, region.len(), usize::MAX)?;
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected,
            });
        }
        Ok(Self {
            region,
            site_dim,
            matrix,
        })
    }

    pub fn identity(region: Region, site_dim: usize) -> Result<Self> {
        let dim = region_dim(site_dim, region.len(), DIM_CAP)?;
        Self::new(region, site_dim, CMatrix::identity(dim, dim))
    }

    pub fn zero(region: Region, site_dim: usize) -> Result<Self> {
        let dim = region_dim(site_dim, region.len(), DIM_CAP)?;
        Self::new(region, site_dim, CMatrix::zeros(dim, dim))
    }

    /// A multiple of the unit, living on the empty region.
    pub fn scalar(value: C64, site_dim: usize) -> Self {
        Self {
            region: Region::empty(),
            site_dim,
            matrix: CMatrix::from_element(1, 1, value),
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            region: self.region.clone(),
            site_dim: self.site_dim,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            region: self.region.clone(),
            site_dim: self.site_dim,
            matrix: &self.matrix * c,
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `||A - A^dagger||_F / ||A||_F` (zero for the zero operator).
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.matrix.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint()).norm() / n
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_residual() <= HERMITIAN_TOL
    }

    pub fn norm(&self) -> Result<f64> {
        operator_norm(self)
    }

    /// Unital embedding `A -> A ⊗ 1` into a larger region.
    pub fn embed(&self, target: &Region) -> Result<Self> {
        if &self.region == target {
            return Ok(self.clone());
        }
        if !self.region.is_subset(target) {
            return Err(Error::NotSubset {
                inner: self.region.to_string(),
                outer: target.to_string(),
            });
        }
        let d = self.site_dim;
        let n = target.len();
        let dim = region_dim(d, n, DIM_CAP)?;
        let positions: Vec<usize> = self
            .region
            .iter()
            .map(|s| target.position(s).expect("subset checked"))
            .collect();
        let dx = self.dim();
        let drest = dim / dx;
        // by_rest[r * dx + a] = full index with rest digits r and X digits a
        let mut by_rest = vec![0usize; dim];
        for i in 0..dim {
            let (a, r) = split_index(i, n, d, &positions);
            by_rest[r * dx + a] = i;
        }
        let mut out = CMatrix::zeros(dim, dim);
        for r in 0..drest {
            let block = &by_rest[r * dx..(r + 1) * dx];
            for (a, &i) in block.iter().enumerate() {
                for (b, &j) in block.iter().enumerate() {
                    out[(i, j)] = self.matrix[(a, b)];
                }
            }
        }
        Self::new(target.clone(), d, out)
    }

    /// Both operators embedded on the union of their regions.
    pub fn on_common_region(&self, other: &Self) -> Result<(Region, CMatrix, CMatrix)> {
        self.check_site_dim(other)?;
        let u = self.region.union(&other.region);
        let a = self.embed(&u)?.matrix;
        let b = other.embed(&u)?.matrix;
        Ok((u, a, b))
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        let (u, a, b) = self.on_common_region(other)?;
        Self::new(u, self.site_dim, a * b)
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        let (u, a, b) = self.on_common_region(other)?;
        Self::new(u, self.site_dim, a + b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        let (u, a, b) = self.on_common_region(other)?;
        Self::new(u, self.site_dim, a - b)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let (u, a, b) = self.on_common_region(other)?;
        Self::new(u, self.site_dim, &a * &b - &b * &a)
    }

    /// `A ⊗ B` for operators on disjoint regions.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.region.intersects(&other.region) {
            return Err(Error::InvalidParameter(
                "tensor product requires disjoint regions".into(),
            ));
        }
        self.product(other)
    }

    fn check_site_dim(&self, other: &Self) -> Result<()> {
        if self.site_dim != other.site_dim {
            return Err(Error::InvalidParameter(format!(
                "site dimensions differ: {} vs {}",
                self.site_dim, other.site_dim
            )));
        }
        Ok(())
    }
}

/// Split a full index into (digits at `positions`, remaining digits), both
/// read most-significant first.
fn split_index(i: usize, n: usize, d: usize, positions: &[usize]) -> (usize, usize) {
    let mut digits = vec![0usize; n];
    let mut rem = i;
    for k in (0..n).rev() {
        digits[k] = rem % d;
        rem /= d;
    }
    let mut a = 0;
    let mut r = 0;
    let mut pi = 0;
    for (k, &dig) in digits.iter().enumerate() {
        if pi < positions.len() && positions[pi] == k {
            a = a * d + dig;
            pi += 1;
        } else {
            r = r * d + dig;
        }
    }
    (a, r)
}

/// Contract the leg at position `p` (of `n` legs, dimension `d`) against a
/// one-site density matrix: `(1 ⊗ tr(rho ·) ⊗ 1)(M)`.
pub fn contract_leg(m: &CMatrix, n: usize, d: usize, p: usize, rho: &CMatrix) -> CMatrix {
    let dim = m.nrows();
    let out_dim = dim / d;
    let stride = d.pow((n - 1 - p) as u32);
    let ins = |r: usize, a: usize| (r / stride) * stride * d + a * stride + r % stride;
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for r in 0..out_dim {
        for c in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..d {
                let ra = ins(r, a);
                for b in 0..d {
                    let w = rho[(b, a)];
                    if w != C64::new(0.0, 0.0) {
                        acc += w * m[(ra, ins(c, b))];
                    }
                }
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Spectral norm with the default dimension cap.
pub fn operator_norm(a: &LocalOperator) -> Result<f64> {
    operator_norm_with_cap(a, DIM_CAP)
}

pub fn operator_norm_with_cap(a: &LocalOperator, cap: usize) -> Result<f64> {
    if a.dim() > cap {
        return Err(Error::DimensionCap { dim: a.dim(), cap });
    }
    Ok(spectral_norm(a.matrix(), a.is_hermitian()))
}

/// Largest singular value; via eigenvalues when `hermitian` is set.
pub fn spectral_norm(m: &CMatrix, hermitian: bool) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 {
        return m[(0, 0)].norm();
    }
    if hermitian {
        let h = hermitize(m);
        h.symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    } else {
        m.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0f64, |acc, v| acc.max(*v))
    }
}

/// `(M + M^dagger)/2`, removing round-off asymmetry before eigensolvers.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Spectral decomposition of a Hermitian matrix, kept for repeated
/// functional calculus.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let (values, vectors) = hermitian_eigen(m);
        Self { values, vectors }
    }

    /// `f(H) = V diag(f(λ)) V^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            for v in scaled.column_mut(k).iter_mut() {
                *v *= fk;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Kronecker product, first argument most significant.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
