//! Single-site reference states, partial expectations and the η-free
//! decomposition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::family::InteractionFamily;
use crate::lattice::geometry::{Region, Site};
use crate::lattice::operator::{contract_leg, spectral_norm, CMatrix, HermitianEigen, LocalOperator, C64, HERMITIAN_TOL};
use crate::par;
use crate::random::{haar_unitary, rng_for};

/// Largest region handled by subset enumeration.
pub const SUBSET_CAP: usize = 12;

/// Tolerance used when an input must already be η-free.
pub const ETA_FREE_TOL: f64 = 1e-10;

/// `e^{-βΨ_x} / tr e^{-βΨ_x}` for a one-site Hermitian `Ψ_x`.
pub fn gibbs_single_site(psi: &LocalOperator, beta: f64) -> Result<CMatrix> {
    let res = psi.hermitian_residual();
    if res > HERMITIAN_TOL {
        return Err(Error::NotHermitian(res));
    }
    Ok(gibbs_matrix(psi.matrix(), beta))
}

/// Normalized `e^{-βH}` for a Hermitian matrix, shifted by the smallest
/// eigenvalue to avoid overflow.
pub fn gibbs_matrix(h: &CMatrix, beta: f64) -> CMatrix {
    let eig = HermitianEigen::new(h);
    let lo = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = eig.values.iter().map(|l| (-beta * (l - lo)).exp()).sum();
    eig.apply(|l| C64::new((-beta * (l - lo)).exp() / z, 0.0))
}

/// Per-site densities `ρ_x`; sites without a single-site term use `1/d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaFamily {
    beta: f64,
    site_dim: usize,
    rho: BTreeMap<Site, CMatrix>,
    mixed: CMatrix,
}

impl EtaFamily {
    pub fn new(fam: &InteractionFamily, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        let d = fam.site_dim();
        let rho = fam
            .singletons()
            .map(|(s, op)| Ok((s.clone(), gibbs_single_site(op, beta)?)))
            .collect::<Result<_>>()?;
        Ok(Self { beta, site_dim: d, rho, mixed: Self::mixed_state(d) })
    }

    /// `ρ_x = 1/d` everywhere.
    pub fn maximally_mixed(site_dim: usize) -> Self {
        Self { beta: 0.0, site_dim, rho: BTreeMap::new(), mixed: Self::mixed_state(site_dim) }
    }

    fn mixed_state(d: usize) -> CMatrix {
        CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn rho(&self, x: &Site) -> &CMatrix {
        self.rho.get(x).unwrap_or(&self.mixed)
    }
}

/// `η_X(A)`: the `X` legs are contracted against `⊗ρ_x`, the result lives
/// on `Λ∖X`. `η_∅` is the identity map.
pub fn partial_expectation(a: &LocalOperator, x: &Region, eta: &EtaFamily) -> Result<LocalOperator> {
    if !x.is_subset(a.region()) {
        return Err(Error::NotSubset { inner: x.to_string(), outer: a.region().to_string() });
    }
    if x.is_empty() {
        return Ok(a.clone());
    }
    let d = a.site_dim();
    let lambda = a.region();
    let mut m = a.matrix().clone();
    let mut n = lambda.len();
    // highest position first keeps lower positions valid
    for s in x.iter().rev() {
        let p = lambda.position(s).expect("subset checked");
        m = contract_leg(&m, n, d, p, eta.rho(s));
        n -= 1;
    }
    LocalOperator::new(lambda.difference(x), d, m)
}

/// `max_{x∈X} ‖η_x(A)‖`.
pub fn eta_free_residual_on(a: &LocalOperator, x: &Region, eta: &EtaFamily) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in x.iter() {
        let e = partial_expectation(a, &Region::single(s.clone()), eta)?;
        worst = worst.max(spectral_norm(e.matrix(), false));
    }
    Ok(worst)
}

/// `max_{x∈Λ} ‖η_x(A)‖` over the operator's own region.
pub fn eta_free_residual(a: &LocalOperator, eta: &EtaFamily) -> Result<f64> {
    eta_free_residual_on(a, a.region(), eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Recursive,
    Moebius,
}

/// Components `Ã_X` for `X ⊆ Λ`, each embedded on `Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub lambda: Region,
    pub method: Method,
    pub components: BTreeMap<Region, LocalOperator>,
}

/// Residuals of the defining properties of a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResiduals {
    /// `‖Σ_X Ã_X − A‖`.
    pub reconstruction: f64,
    /// `max_X max_{x∈X} ‖η_x(Ã_X)‖`.
    pub eta_free: f64,
    /// `max_X ‖Ã_X − η_{Λ∖X}(Ã_X)‖`: each component lives on its index.
    pub support: f64,
    /// `max_X ‖Ã_X‖ / (2^{|X|}‖A‖)`; at most 1 in theory.
    pub norm_ratio: f64,
}

impl Decomposition {
    /// Components in order of increasing `|X|`, then lexicographic.
    pub fn ordered(&self) -> Vec<(&Region, &LocalOperator)> {
        let mut v: Vec<_> = self.components.iter().collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn get(&self, x: &Region) -> Option<&LocalOperator> {
        self.components.get(x)
    }

    pub fn sum(&self) -> Result<CMatrix> {
        let mut iter = self.components.values();
        let first = iter.next().ok_or(Error::EmptyRegion)?.matrix().clone();
        Ok(iter.fold(first, |acc, c| acc + c.matrix()))
    }

    pub fn residuals(&self, a: &LocalOperator, eta: &EtaFamily) -> Result<DecompositionResiduals> {
        let reconstruction = spectral_norm(&(self.sum()? - a.embed(&self.lambda)?.matrix()), false);
        let a_norm = spectral_norm(a.matrix(), a.is_hermitian());
        let items: Vec<_> = self.components.iter().collect();
        let per = par::try_map_range(items.len(), |i| {
            let (x, c) = items[i];
            let free = eta_free_residual_on(c, x, eta)?;
            let rest = self.lambda.difference(x);
            let back = partial_expectation(c, &rest, eta)?.embed(&self.lambda)?;
            let support = spectral_norm(&(c.matrix() - back.matrix()), false);
            let n = spectral_norm(c.matrix(), false);
            let ratio = if a_norm == 0.0 { if n == 0.0 { 0.0 } else { f64::INFINITY } } else { n / (2f64.powi(x.len() as i32) * a_norm) };
            Ok::<_, Error>((free, support, ratio))
        })?;
        let mut out = DecompositionResiduals { reconstruction, eta_free: 0.0, support: 0.0, norm_ratio: 0.0 };
        for (f, s, r) in per {
            out.eta_free = out.eta_free.max(f);
            out.support = out.support.max(s);
            out.norm_ratio = out.norm_ratio.max(r);
        }
        Ok(out)
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > SUBSET_CAP {
        return Err(Error::SubsetCap { sites: n, cap: SUBSET_CAP });
    }
    Ok(())
}

/// Masks over `n` bits ordered by popcount, then by the lexicographic order
/// of the sub-region they select.
fn ordered_masks(region: &Region) -> Vec<u64> {
    let n = region.len();
    let mut masks: Vec<u64> = (0..1u64 << n).collect();
    masks.sort_by(|&a, &b| {
        a.count_ones()
            .cmp(&b.count_ones())
            .then_with(|| region.subset_from_mask(a).cmp(&region.subset_from_mask(b)))
    });
    masks
}

/// `embed(η_{S∖Z}(A))` on `S` for every `Z = fixed ∪ (subset of free)`,
/// indexed by the mask over `free`.
fn complement_expectations(a: &LocalOperator, free: &Region, fixed: &Region, eta: &EtaFamily) -> Result<Vec<CMatrix>> {
    let s = a.region();
    par::try_map_range(1usize << free.len(), |m| {
        let z = free.subset_from_mask(m as u64).union(fixed);
        let e = partial_expectation(a, &s.difference(&z), eta)?;
        Ok(e.embed(s)?.into_matrix())
    })
}

/// Sum of the already computed components over proper submasks of `mask`.
fn submask_sum(mask: u64, done: &[Option<CMatrix>], dim: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(dim, dim);
    let mut sub = mask;
    while sub != 0 {
        sub = (sub - 1) & mask;
        if let Some(c) = &done[sub as usize] {
            acc += c;
        }
    }
    acc
}

fn recursive_core(e: &[CMatrix], order: &[u64], dim: usize) -> Vec<CMatrix> {
    let mut done: Vec<Option<CMatrix>> = vec![None; e.len()];
    for &m in order {
        let c = if m == 0 { e[0].clone() } else { &e[m as usize] - submask_sum(m, &done, dim) };
        done[m as usize] = Some(c);
    }
    done.into_iter().map(|c| c.expect("every mask visited")).collect()
}

fn moebius_core(e: &[CMatrix], dim: usize) -> Vec<CMatrix> {
    par::map_range(e.len(), |m| {
        let m = m as u64;
        let mut acc = CMatrix::zeros(dim, dim);
        let mut sub = m;
        loop {
            let sign = if (m & !sub).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            acc += &e[sub as usize] * C64::new(sign, 0.0);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & m;
        }
        acc
    })
}

fn decompose(a: &LocalOperator, eta: &EtaFamily, method: Method) -> Result<Decomposition> {
    let lambda = a.region().clone();
    check_cap(lambda.len())?;
    let e = complement_expectations(a, &lambda, &Region::empty(), eta)?;
    let dim = a.dim();
    let comps = match method {
        Method::Recursive => recursive_core(&e, &ordered_masks(&lambda), dim),
        Method::Moebius => moebius_core(&e, dim),
    };
    let components = comps
        .into_iter()
        .enumerate()
        .map(|(m, c)| Ok((lambda.subset_from_mask(m as u64), LocalOperator::new(lambda.clone(), a.site_dim(), c)?)))
        .collect::<Result<_>>()?;
    Ok(Decomposition { lambda, method, components })
}

/// `Ã_∅ = η_Λ(A)`, `Ã_X = η_{Λ∖X}(A) − Σ_{Y⊊X} Ã_Y`.
pub fn decompose_recursive(a: &LocalOperator, eta: &EtaFamily) -> Result<Decomposition> {
    decompose(a, eta, Method::Recursive)
}

/// `Ã_X = Σ_{Y⊆X} (−1)^{|X∖Y|} η_{Λ∖Y}(A)`.
pub fn decompose_moebius(a: &LocalOperator, eta: &EtaFamily) -> Result<Decomposition> {
    decompose(a, eta, Method::Moebius)
}

/// Decomposition of an element already η-free on `Λ_n = Λ ∖ S_n`: indices
/// are `X ⊆ S_n`, component `X` has support `X ∪ Λ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedDecomposition {
    /// `S_n ∪ Λ`, the region every component is embedded on.
    pub region: Region,
    pub s_n: Region,
    pub lambda_n: Region,
    pub components: BTreeMap<Region, LocalOperator>,
}

impl RefinedDecomposition {
    pub fn sum(&self) -> CMatrix {
        let dim = self.components.values().next().map_or(1, |c| c.dim());
        self.components.values().fold(CMatrix::zeros(dim, dim), |acc, c| acc + c.matrix())
    }
}

/// Refined decomposition of `product` (on `S_n ∪ Λ`), which must be η-free
/// at every site of `Λ ∖ S_n`.
pub fn decompose_refined_element(product: &LocalOperator, s_n: &Region, lambda: &Region, eta: &EtaFamily) -> Result<RefinedDecomposition> {
    let region = s_n.union(lambda);
    let product = product.embed(&region)?;
    let lambda_n = lambda.difference(s_n);
    check_cap(s_n.len())?;
    let res = eta_free_residual_on(&product, &lambda_n, eta)?;
    let scale = spectral_norm(product.matrix(), false).max(1.0);
    if res > ETA_FREE_TOL * scale {
        return Err(Error::NotEtaFree(res));
    }
    let e = complement_expectations(&product, s_n, &lambda_n, eta)?;
    let comps = moebius_core(&e, product.dim());
    let components = comps
        .into_iter()
        .enumerate()
        .map(|(m, c)| Ok((s_n.subset_from_mask(m as u64), LocalOperator::new(region.clone(), product.site_dim(), c)?)))
        .collect::<Result<_>>()?;
    Ok(RefinedDecomposition { region, s_n: s_n.clone(), lambda_n, components })
}

/// Refined decomposition of `A_1 ⋯ A_n Ã_Λ`.
pub fn decompose_refined(prefactors: &[LocalOperator], a_tilde: &LocalOperator, eta: &EtaFamily) -> Result<RefinedDecomposition> {
    let res = eta_free_residual(a_tilde, eta)?;
    let scale = spectral_norm(a_tilde.matrix(), false).max(1.0);
    if res > ETA_FREE_TOL * scale {
        return Err(Error::NotEtaFree(res));
    }
    let s_n: Region = prefactors.iter().flat_map(|p| p.region().iter().cloned()).collect();
    let mut product = LocalOperator::scalar(C64::new(1.0, 0.0), a_tilde.site_dim());
    for p in prefactors {
        product = product.product(p)?;
    }
    let product = product.product(a_tilde)?;
    decompose_refined_element(&product, &s_n, a_tilde.region(), eta)
}

/// `‖(1/N) Σ U A U^dagger − (tr A / d)·1‖` over `samples` Haar unitaries.
pub fn haar_trace_identity_check(a: &CMatrix, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let d = a.nrows();
    let draws = par::map_range(samples, |i| {
        let u = haar_unitary(d, &mut rng_for(seed, i as u64));
        &u * a * u.adjoint()
    });
    let avg = draws.into_iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m) / C64::new(samples as f64, 0.0);
    let target = CMatrix::identity(d, d) * (a.trace() / C64::new(d as f64, 0.0));
    Ok(spectral_norm(&(avg - target), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::family::build_ising_staggered;
    use crate::lattice::spin::{spin_matrix_triple, SpinRep};
    use crate::random::random_hermitian;
    use proptest::prelude::*;

    fn site(i: i32) -> Site {
        Site::new([i])
    }

    fn random_eta(n: usize, beta: f64, seed: u64) -> EtaFamily {
        let mut rng = rng_for(seed, 1_000);
        let mut fam = InteractionFamily::new(2);
        for i in 0..n {
            fam.insert(LocalOperator::new(Region::single(site(i as i32)), 2, random_hermitian(2, &mut rng)).unwrap()).unwrap();
        }
        EtaFamily::new(&fam, beta).unwrap()
    }

    fn random_op(n: usize, seed: u64) -> LocalOperator {
        let mut rng = rng_for(seed, 0);
        LocalOperator::new(Region::chain(n), 2, random_hermitian(1 << n, &mut rng)).unwrap()
    }

    #[test]
    fn single_site_gibbs() {
        let half = SpinRep::half();
        let s3 = LocalOperator::new(Region::single(site(0)), 2, spin_matrix_triple(half)[2].clone()).unwrap();
        let rho = gibbs_single_site(&s3, 1.0).unwrap();
        let z = (-0.5f64).exp() + 0.5f64.exp();
        assert!((rho[(0, 0)].re - (-0.5f64).exp() / z).abs() < 1e-14);
        assert!((rho[(1, 1)].re - 0.5f64.exp() / z).abs() < 1e-14);
        let hot = gibbs_single_site(&s3, 1e-8).unwrap();
        assert!((hot - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-7);
        let zero = LocalOperator::zero(Region::single(site(0)), 3).unwrap();
        let mixed = gibbs_single_site(&zero, 2.0).unwrap();
        assert!((mixed - CMatrix::identity(3, 3) * C64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gibbs_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let op = LocalOperator::new(Region::single(site(0)), 2, m).unwrap();
        assert!(matches!(gibbs_single_site(&op, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eta_family_states_are_densities() {
        let fam = build_ising_staggered(1.0, 2.0, SpinRep::new(3).unwrap(), &Region::chain(3)).unwrap();
        let eta = EtaFamily::new(&fam, 0.7).unwrap();
        for x in Region::chain(3).iter() {
            let r = eta.rho(x);
            assert!((r.trace().re - 1.0).abs() < 1e-12);
            assert!((r - r.adjoint()).norm() < 1e-12);
            assert!(HermitianEigen::new(r).values.iter().all(|&v| v > -1e-12));
        }
    }

    #[test]
    fn partial_expectation_basics() {
        let eta = random_eta(3, 1.0, 5);
        let id = LocalOperator::identity(Region::chain(3), 2).unwrap();
        let e = partial_expectation(&id, &Region::single(site(1)), &eta).unwrap();
        assert!((e.matrix() - CMatrix::identity(4, 4)).norm() < 1e-13);
        // full expectation is a scalar
        let a = random_op(3, 9);
        let full = partial_expectation(&a, &Region::chain(3), &eta).unwrap();
        assert!(full.region().is_empty() && full.dim() == 1);
        // composition over disjoint sets
        let x = Region::single(site(0));
        let y = Region::single(site(2));
        let two = partial_expectation(&partial_expectation(&a, &x, &eta).unwrap(), &y, &eta).unwrap();
        let one = partial_expectation(&a, &x.union(&y), &eta).unwrap();
        assert!((two.matrix() - one.matrix()).norm() < 1e-13);
        assert!(partial_expectation(&a, &Region::single(site(7)), &eta).is_err());
    }

    #[test]
    fn product_factorization() {
        let eta = random_eta(2, 0.3, 2);
        let mut rng = rng_for(3, 0);
        let b = LocalOperator::new(Region::single(site(0)), 2, random_hermitian(2, &mut rng)).unwrap();
        let c = LocalOperator::new(Region::single(site(1)), 2, random_hermitian(2, &mut rng)).unwrap();
        let a = b.tensor(&c).unwrap();
        let lhs = partial_expectation(&a, &Region::single(site(0)), &eta).unwrap();
        let eb = partial_expectation(&b, &Region::single(site(0)), &eta).unwrap().matrix()[(0, 0)];
        assert!((lhs.matrix() - c.matrix() * eb).norm() < 1e-13);
    }

    #[test]
    fn unit_decomposes_trivially() {
        let eta = random_eta(3, 1.0, 1);
        let a = LocalOperator::identity(Region::chain(3), 2).unwrap().scale(C64::new(2.5, 0.0));
        for d in [decompose_recursive(&a, &eta).unwrap(), decompose_moebius(&a, &eta).unwrap()] {
            for (x, c) in &d.components {
                let expect = if x.is_empty() { a.matrix().norm() } else { 0.0 };
                assert!((c.matrix().norm() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_site_case() {
        let eta = random_eta(1, 1.0, 4);
        let a = random_op(1, 4);
        let d = decompose_recursive(&a, &eta).unwrap();
        let mean = partial_expectation(&a, a.region(), &eta).unwrap().matrix()[(0, 0)];
        let expect = a.matrix() - CMatrix::identity(2, 2) * mean;
        assert!((d.get(a.region()).unwrap().matrix() - expect).norm() < 1e-13);
    }

    #[test]
    fn alternating_signs_for_pairs() {
        let eta = random_eta(3, 1.0, 8);
        let a = random_op(3, 8);
        let d = decompose_moebius(&a, &eta).unwrap();
        let lam = a.region();
        let e = |z: &Region| partial_expectation(&a, &lam.difference(z), &eta).unwrap().embed(lam).unwrap().into_matrix();
        let x = Region::new(vec![site(0), site(2)]);
        let expect = e(&x) - e(&Region::single(site(0))) - e(&Region::single(site(2))) + e(&Region::empty());
        assert!((d.get(&x).unwrap().matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn eta_free_input_is_fixed_point() {
        let eta = random_eta(2, 1.0, 11);
        let a = random_op(2, 11);
        let d = decompose_recursive(&a, &eta).unwrap();
        let top = d.get(a.region()).unwrap().clone();
        let again = decompose_moebius(&top, &eta).unwrap();
        for (x, c) in &again.components {
            let expect = if x == a.region() { top.matrix().clone() } else { CMatrix::zeros(4, 4) };
            assert!((c.matrix() - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn uniqueness_perturbation_is_detected() {
        let eta = random_eta(2, 1.0, 12);
        let a = random_op(2, 12);
        let mut d = decompose_recursive(&a, &eta).unwrap();
        // move a piece between two components: reconstruction still holds
        let x = Region::single(site(0));
        let y = Region::single(site(1));
        let shift = d.get(&y).unwrap().scale(C64::new(0.3, 0.0));
        let cx = d.components[&x].sum(&shift).unwrap();
        let cy = d.components[&y].difference(&shift).unwrap();
        d.components.insert(x, cx);
        d.components.insert(y, cy);
        let r = d.residuals(&a, &eta).unwrap();
        assert!(r.reconstruction < 1e-12);
        assert!(r.support > 1e-3);
    }

    #[test]
    fn subset_cap() {
        let a = LocalOperator::identity(Region::chain(2), 2).unwrap();
        assert!(check_cap(13).is_err());
        assert!(decompose_recursive(&a, &EtaFamily::maximally_mixed(2)).is_ok());
    }

    #[test]
    fn refined_trivial_and_counts() {
        let eta = random_eta(5, 1.0, 21);
        let a = random_op(2, 21);
        let top = decompose_recursive(&a, &eta).unwrap().get(a.region()).unwrap().clone();
        let r0 = decompose_refined(&[], &top, &eta).unwrap();
        assert_eq!(r0.components.len(), 1);
        assert!((r0.components[&Region::empty()].matrix() - top.matrix()).norm() < 1e-12);
        let mut rng = rng_for(21, 5);
        let x1 = Region::new(vec![site(3), site(4)]);
        let p = LocalOperator::new(x1.clone(), 2, random_hermitian(4, &mut rng)).unwrap();
        let r1 = decompose_refined(&[p], &top, &eta).unwrap();
        assert_eq!(r1.components.len(), 4);
        assert_eq!(r1.lambda_n, *a.region());
        assert!(decompose_refined(&[], &a, &eta).is_err());
    }

    #[test]
    fn refined_matches_full_decomposition() {
        let eta = random_eta(3, 0.8, 31);
        let a = random_op(2, 31);
        let top = decompose_recursive(&a, &eta).unwrap().get(a.region()).unwrap().clone();
        let mut rng = rng_for(31, 7);
        let x1 = Region::new(vec![site(1), site(2)]);
        let p = LocalOperator::new(x1.clone(), 2, random_hermitian(4, &mut rng)).unwrap();
        let refined = decompose_refined(std::slice::from_ref(&p), &top, &eta).unwrap();
        let product = p.product(&top).unwrap();
        let full = decompose_recursive(&product, &eta).unwrap();
        let ln = refined.lambda_n.clone();
        assert_eq!(ln, Region::single(site(0)));
        for (x, c) in &full.components {
            match refined.components.get(&x.difference(&ln)) {
                Some(rc) if ln.is_subset(x) => assert!((rc.matrix() - c.matrix()).norm() < 1e-10),
                _ => assert!(c.matrix().norm() < 1e-10, "component {x} should vanish"),
            }
        }
        let pn = spectral_norm(product.matrix(), false);
        for (x, c) in &refined.components {
            assert!(spectral_norm(c.matrix(), false) <= 2f64.powi(x.len() as i32) * pn * (1.0 + 1e-9));
        }
        assert!((refined.sum() - product.matrix()).norm() < 1e-11);
    }

    #[test]
    fn haar_average() {
        let id = CMatrix::identity(2, 2);
        assert!(haar_trace_identity_check(&id, 10, 0).unwrap() < 1e-14);
        let s3 = spin_matrix_triple(SpinRep::half())[2].clone();
        assert!(haar_trace_identity_check(&s3, 10_000, 1).unwrap() < 0.05);
        let mut p0 = CMatrix::zeros(2, 2);
        p0[(0, 0)] = C64::new(1.0, 0.0);
        assert!(haar_trace_identity_check(&p0, 10_000, 2).unwrap() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn decomposition_invariants(n in 1usize..=3, seed in 0u64..1_000_000, hot in proptest::bool::ANY) {
            let beta = if hot { 0.3 } else { 1.0 };
            let eta = random_eta(n, beta, seed);
            let a = random_op(n, seed);
            let an = spectral_norm(a.matrix(), true);
            let rec = decompose_recursive(&a, &eta).unwrap();
            let moe = decompose_moebius(&a, &eta).unwrap();
            let r = rec.residuals(&a, &eta).unwrap();
            prop_assert!(r.reconstruction <= 1e-10 * an);
            prop_assert!(r.eta_free <= 1e-10);
            prop_assert!(r.support <= 1e-10 * an);
            prop_assert!(r.norm_ratio <= 1.0 + 1e-9);
            for (x, c) in &rec.components {
                prop_assert!((c.matrix() - moe.components[x].matrix()).norm() <= 1e-11 * an.max(1.0));
            }
        }

        #[test]
        fn decomposition_is_linear(seed in 0u64..1_000_000, al in -2.0f64..2.0, be in -2.0f64..2.0) {
            let eta = random_eta(2, 1.0, seed);
            let a = random_op(2, seed);
            let b = random_op(2, seed + 1);
            let comb = LocalOperator::new(a.region().clone(), 2, a.matrix() * C64::new(al, 0.0) + b.matrix() * C64::new(be, 0.0)).unwrap();
            let da = decompose_moebius(&a, &eta).unwrap();
            let db = decompose_moebius(&b, &eta).unwrap();
            let dc = decompose_recursive(&comb, &eta).unwrap();
            for (x, c) in &dc.components {
                let expect = da.components[x].matrix() * C64::new(al, 0.0) + db.components[x].matrix() * C64::new(be, 0.0);
                prop_assert!((c.matrix() - expect).norm() < 1e-10);
            }
        }
    }
}
