//! Seeded random draws. Every draw `i` of a suite gets its own ChaCha stream,
//! so results do not depend on scheduling.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::operator::{CMatrix, C64};

pub type SuiteRng = ChaCha8Rng;

pub fn rng_for(seed: u64, stream: u64) -> SuiteRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Ginibre matrix with standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng))
}

/// `(G + G^dagger)/2` for a Ginibre `G`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Haar-distributed unitary: Gram–Schmidt on the columns of a Ginibre
/// matrix, which is QR with a positive diagonal in `R`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let mut q = ginibre(dim, rng);
    for k in 0..dim {
        for i in 0..k {
            let proj = q.column(i).dotc(&q.column(k));
            let ci = q.column(i).clone_owned();
            q.column_mut(k).axpy(-proj, &ci, C64::new(1.0, 0.0));
        }
        let n = q.column(k).norm();
        q.column_mut(k).unscale_mut(n);
    }
    q
}

/// Uniform rotation in SO(3) from a uniform unit quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let mut q = [0.0f64; 4];
    loop {
        for v in q.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation by `angle` about the z-axis.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = rng_for(7, 3).random();
        let b: f64 = rng_for(7, 3).random();
        let c: f64 = rng_for(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = rng_for(1, 0);
        for d in 1..=5 {
            let u = haar_unitary(d, &mut rng);
            assert!((&u * u.adjoint() - CMatrix::identity(d, d)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_special_orthogonal() {
        let mut rng = rng_for(2, 0);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            assert!((r * r.transpose() - Matrix3::identity()).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }
}
