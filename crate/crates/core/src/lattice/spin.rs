use serde::{Deserialize, Serialize};

use super::geometry::{Region, Site};
use super::operator::{kron, CMatrix, LocalOperator, C64};
use crate::error::{Error, Result};

/// Spin-j representation, stored as `2j` so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinRep {
    two_j: u32,
}

impl SpinRep {
    pub fn new(two_j: u32) -> Result<Self> {
        if two_j < 1 {
            return Err(Error::InvalidSpin(two_j));
        }
        Ok(Self { two_j })
    }

    pub fn half() -> Self {
        Self { two_j: 1 }
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }
}

/// Raw spin matrices `(S1, S2, S3)` in the Condon–Shortley convention, basis
/// ordered `m = j, j-1, ..., -j`.
pub fn spin_matrix_triple(spin: SpinRep) -> [CMatrix; 3] {
    let d = spin.dim();
    let j = spin.j();
    let mut s3 = CMatrix::zeros(d, d);
    let mut sp = CMatrix::zeros(d, d);
    for k in 0..d {
        let m = j - k as f64;
        s3[(k, k)] = C64::new(m, 0.0);
        if k > 0 {
            // S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
            sp[(k - 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let sm = sp.adjoint();
    let s1 = (&sp + &sm) * C64::new(0.5, 0.0);
    let s2 = (&sp - &sm) * C64::new(0.0, -0.5);
    [s1, s2, s3]
}

/// Spin matrices as one-site operators at `site`.
pub fn spin_matrices(spin: SpinRep, site: &Site) -> Result<[LocalOperator; 3]> {
    let d = spin.dim();
    let [a, b, c] = spin_matrix_triple(spin);
    let r = Region::single(site.clone());
    Ok([
        LocalOperator::new(r.clone(), d, a)?,
        LocalOperator::new(r.clone(), d, b)?,
        LocalOperator::new(r, d, c)?,
    ])
}

/// `δ(S1⊗S1 + S2⊗S2) + S3⊗S3` on two legs.
pub fn heisenberg_bond_matrix(spin: SpinRep, delta: f64) -> CMatrix {
    let [s1, s2, s3] = spin_matrix_triple(spin);
    (kron(&s1, &s1) + kron(&s2, &s2)) * C64::new(delta, 0.0) + kron(&s3, &s3)
}

/// `S3⊗S3` on two legs.
pub fn ising_bond_matrix(spin: SpinRep) -> CMatrix {
    let [_, _, s3] = spin_matrix_triple(spin);
    kron(&s3, &s3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::operator::spectral_norm;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rejects_zero_spin() {
        assert_eq!(SpinRep::new(0), Err(Error::InvalidSpin(0)));
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let [s1, s2, s3] = spin_matrix_triple(SpinRep::half());
        let h = C64::new(0.5, 0.0);
        let z = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        assert!(close(&s1, &CMatrix::from_row_slice(2, 2, &[z, h, h, z]), 1e-15));
        assert!(close(&s2, &CMatrix::from_row_slice(2, 2, &[z, -i * 0.5, i * 0.5, z]), 1e-15));
        assert!(close(&s3, &CMatrix::from_row_slice(2, 2, &[h, z, z, -h]), 1e-15));
        assert!((spectral_norm(&s3, true) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spin_one_s3() {
        let [_, _, s3] = spin_matrix_triple(SpinRep::new(2).unwrap());
        let diag: Vec<f64> = (0..3).map(|k| s3[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        assert!((spectral_norm(&s3, true) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn commutation_and_casimir() {
        for two_j in 1..=8 {
            let spin = SpinRep::new(two_j).unwrap();
            let [s1, s2, s3] = spin_matrix_triple(spin);
            let i = C64::new(0.0, 1.0);
            let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;
            assert!(close(&comm(&s1, &s2), &(&s3 * i), 1e-12));
            assert!(close(&comm(&s2, &s3), &(&s1 * i), 1e-12));
            assert!(close(&comm(&s3, &s1), &(&s2 * i), 1e-12));
            let j = spin.j();
            let cas = &s1 * &s1 + &s2 * &s2 + &s3 * &s3;
            let d = spin.dim();
            assert!(close(&cas, &(CMatrix::identity(d, d) * C64::new(j * (j + 1.0), 0.0)), 1e-12));
            for s in [&s1, &s2, &s3] {
                assert!(close(s, &s.adjoint(), 0.0));
            }
        }
    }

    #[test]
    fn bond_norms() {
        for delta in [-2.0, -0.3, 0.5, 1.0, 3.0] {
            let m = heisenberg_bond_matrix(SpinRep::half(), delta);
            let expect = f64::abs(delta) / 2.0 + 0.25;
            assert!((spectral_norm(&m, true) - expect).abs() < 1e-12);
        }
        for two_j in 1..=3 {
            let spin = SpinRep::new(two_j).unwrap();
            let j = spin.j();
            assert!((spectral_norm(&ising_bond_matrix(spin), true) - j * j).abs() < 1e-12);
        }
    }
}
