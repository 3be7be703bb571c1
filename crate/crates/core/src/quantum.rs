//! Finite-volume exact dynamics, Gibbs states, the Dyson series, the KMS
//! condition and the Kirkwood–Salzburg equation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eta::{decompose_refined_element, eta_free_residual, partial_expectation, EtaFamily, ETA_FREE_TOL};
use crate::lattice::family::InteractionFamily;
use crate::lattice::geometry::{Region, Site};
use crate::lattice::operator::{region_dim, spectral_norm, CMatrix, HermitianEigen, LocalOperator, C64, DIM_CAP};
use crate::lattice::spin::SpinRep;
use crate::norms::{NormParams, NormSource, TermTable};
use crate::par;
use crate::quadrature::SimplexQuadrature;

/// Largest expansion order accepted by the Dyson and KS routines.
pub const ORDER_CAP: usize = 4;

/// Largest order for the KS kernel.
pub const KS_ORDER_CAP: usize = 3;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A finite lattice with an interaction supported in it.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    gamma: Region,
    fam: InteractionFamily,
    spin: SpinRep,
    beta: f64,
}

impl FiniteSystem {
    pub fn new(gamma: Region, fam: InteractionFamily, spin: SpinRep, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        if fam.site_dim() != spin.dim() {
            return Err(Error::InvalidParameter(format!(
                "family site dimension {} does not match spin dimension {}",
                fam.site_dim(),
                spin.dim()
            )));
        }
        region_dim(spin.dim(), gamma.len(), DIM_CAP)?;
        for r in fam.terms().keys() {
            if !r.is_subset(&gamma) {
                return Err(Error::NotSubset { inner: r.to_string(), outer: gamma.to_string() });
            }
        }
        Ok(Self { gamma, fam, spin, beta })
    }

    pub fn gamma(&self) -> &Region {
        &self.gamma
    }

    pub fn family(&self) -> &InteractionFamily {
        &self.fam
    }

    pub fn spin(&self) -> SpinRep {
        self.spin
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.gamma.clone(), self.fam.clone(), self.spin, beta)
    }

    /// `H_W = Σ_{X⊆W} Φ_X` on `W`.
    pub fn hamiltonian(&self, window: &Region) -> Result<LocalOperator> {
        if !window.is_subset(&self.gamma) {
            return Err(Error::NotSubset { inner: window.to_string(), outer: self.gamma.to_string() });
        }
        let d = self.spin.dim();
        let mut h = LocalOperator::zero(window.clone(), d)?.into_matrix();
        for (r, op) in self.fam.terms() {
            if r.is_subset(window) {
                h += op.embed(window)?.matrix();
            }
        }
        LocalOperator::new(window.clone(), d, h)
    }

    pub fn full_hamiltonian(&self) -> Result<LocalOperator> {
        self.hamiltonian(&self.gamma)
    }

    pub fn gibbs_state(&self) -> Result<State> {
        State::gibbs(&self.full_hamiltonian()?, self.beta)
    }

    /// `tr(e^{-βH} A) / tr(e^{-βH})`.
    pub fn gibbs_expectation(&self, a: &LocalOperator) -> Result<C64> {
        self.gibbs_state()?.expect(a)
    }

    /// Single-site reference states at this system's β.
    pub fn eta(&self) -> Result<EtaFamily> {
        EtaFamily::new(&self.fam, self.beta)
    }
}

/// A state on a finite region given by its density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    region: Region,
    site_dim: usize,
    rho: CMatrix,
}

impl State {
    pub fn gibbs(h: &LocalOperator, beta: f64) -> Result<Self> {
        let rho = crate::eta::gibbs_matrix(h.matrix(), beta);
        Ok(Self { region: h.region().clone(), site_dim: h.site_dim(), rho })
    }

    pub fn maximally_mixed(region: Region, site_dim: usize) -> Result<Self> {
        let dim = region_dim(site_dim, region.len(), DIM_CAP)?;
        Ok(Self { region, site_dim, rho: CMatrix::identity(dim, dim) / c(dim as f64) })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn density(&self) -> &CMatrix {
        &self.rho
    }

    pub fn expect(&self, a: &LocalOperator) -> Result<C64> {
        if a.site_dim() != self.site_dim {
            return Err(Error::InvalidParameter("site dimension mismatch".into()));
        }
        Ok(trace_product(&self.rho, a.embed(&self.region)?.matrix()))
    }
}

/// `tr(A B)` in `O(d²)`.
fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = c(0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `τ_t(A) = e^{itH} A e^{-itH}` for a fixed Hermitian `H`, with complex `t`.
#[derive(Clone, Debug)]
pub struct Evolver {
    region: Region,
    eig: HermitianEigen,
}

impl Evolver {
    pub fn new(h: &LocalOperator) -> Result<Self> {
        let res = h.hermitian_residual();
        if res > crate::lattice::operator::HERMITIAN_TOL {
            return Err(Error::NotHermitian(res));
        }
        Ok(Self { region: h.region().clone(), eig: HermitianEigen::new(h.matrix()) })
    }

    pub fn evolve(&self, a: &LocalOperator, t: C64) -> Result<LocalOperator> {
        let a = a.embed(&self.region)?;
        let i = C64::new(0.0, 1.0);
        let left = self.eig.apply(|l| (i * t * l).exp());
        let right = self.eig.apply(|l| (-i * t * l).exp());
        LocalOperator::new(self.region.clone(), a.site_dim(), left * a.matrix() * right)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eig.max_abs()
    }
}

/// One-shot `e^{itH} A e^{-itH}`; `A` is embedded on `H`'s region.
pub fn evolve(a: &LocalOperator, h: &LocalOperator, t: C64) -> Result<LocalOperator> {
    Evolver::new(h)?.evolve(a, t)
}

/// `δ(A) = i Σ_{X∩Λ≠∅} [Φ_X, A]`, on the union of `Λ` and the touching
/// regions.
pub fn generator_delta(a: &LocalOperator, fam: &InteractionFamily) -> Result<LocalOperator> {
    let touching: Vec<_> = fam.terms().iter().filter(|(r, _)| r.intersects(a.region())).collect();
    let region = touching.iter().fold(a.region().clone(), |acc, (r, _)| acc.union(r));
    let a_emb = a.embed(&region)?;
    let mut out = CMatrix::zeros(a_emb.dim(), a_emb.dim());
    for (_, op) in touching {
        let p = op.embed(&region)?;
        out += p.matrix() * a_emb.matrix() - a_emb.matrix() * p.matrix();
    }
    LocalOperator::new(region, a.site_dim(), out * C64::new(0.0, 1.0))
}

/// Analytic-element bound
/// `‖A‖ e^{ζ‖Ψ‖_Λ} e^{ε|Λ|} n! 2^n ζ^{-n} Σ_{k=0}^n (ζ‖Φ̄‖_{ε,ζ}/ε)^k`.
pub fn delta_power_bound(a_norm: f64, psi_lambda: f64, lambda_size: usize, n: usize, eps: f64, zeta: f64, phibar_norm: f64) -> f64 {
    let q = zeta / eps * phibar_norm;
    let geom: f64 = (0..=n).map(|k| q.powi(k as i32)).sum();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    a_norm * (zeta * psi_lambda + eps * lambda_size as f64).exp() * fact * 2f64.powi(n as i32) * zeta.powi(-(n as i32)) * geom
}

/// Free dynamics `τ^Ψ_z(B) = e^{izΨ_X} B e^{-izΨ_X}` from single-site
/// eigendecompositions.
#[derive(Clone, Debug)]
pub struct FreeDynamics {
    site_dim: usize,
    eig: BTreeMap<Site, HermitianEigen>,
}

impl FreeDynamics {
    pub fn new(fam: &InteractionFamily) -> Self {
        let eig = fam.singletons().map(|(s, op)| (s.clone(), HermitianEigen::new(op.matrix()))).collect();
        Self { site_dim: fam.site_dim(), eig }
    }

    fn factor(&self, region: &Region, z: C64) -> CMatrix {
        let i = C64::new(0.0, 1.0);
        let d = self.site_dim;
        let mut out = CMatrix::identity(1, 1);
        for s in region.iter() {
            let f = match self.eig.get(s) {
                Some(e) => e.apply(|l| (i * z * l).exp()),
                None => CMatrix::identity(d, d),
            };
            out = out.kronecker(&f);
        }
        out
    }

    pub fn conj(&self, b: &LocalOperator, z: C64) -> Result<LocalOperator> {
        if self.eig.is_empty() || z == c(0.0) {
            return Ok(b.clone());
        }
        let u = self.factor(b.region(), z);
        let v = self.factor(b.region(), -z);
        LocalOperator::new(b.region().clone(), b.site_dim(), u * b.matrix() * v)
    }
}

/// Ordered tuples `(X_1, …, X_n)` of indices into `regions` with
/// `X_j ∩ S_{j-1} ≠ ∅`, `S_0 = start`, `S_j = S_{j-1} ∪ X_j`.
pub fn constrained_tuples(regions: &[Region], start: &Region, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    tuples_rec(regions, start, n, &mut cur, &mut out);
    out
}

fn tuples_rec(regions: &[Region], s: &Region, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == n {
        out.push(cur.clone());
        return;
    }
    for (k, r) in regions.iter().enumerate() {
        if r.intersects(s) {
            cur.push(k);
            tuples_rec(regions, &s.union(r), n, cur, out);
            cur.pop();
        }
    }
}

/// Real or imaginary time along which the Dyson series is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeArg {
    Real(f64),
    /// `t = iσ`.
    Imaginary(f64),
}

impl TimeArg {
    pub fn magnitude(self) -> f64 {
        match self {
            TimeArg::Real(t) => t.abs(),
            TimeArg::Imaginary(s) => s.abs(),
        }
    }

    /// Complex time at distance `s` along the ray.
    fn point(self, s: f64) -> C64 {
        match self {
            TimeArg::Real(t) => c(s * t.signum()),
            TimeArg::Imaginary(sig) => C64::new(0.0, s * sig.signum()),
        }
    }

    pub fn as_complex(self) -> C64 {
        self.point(self.magnitude())
    }

    /// `i^n` for real time; the ray direction folds in the orientation.
    fn coefficient(self, n: usize) -> C64 {
        let dir = self.point(1.0);
        (C64::new(0.0, 1.0) * dir).powi(n as i32)
    }
}

#[derive(Clone, Debug)]
pub struct DysonResult {
    pub operator: LocalOperator,
    /// Whether `2|t| ‖Φ̄‖_{ε,2|t|} < ε` for some ε on the scan grid.
    pub in_convergence_regime: bool,
}

/// Partial sum through order `n_max` of
/// `Σ_n c_n ∫_{|t|>s_1>…>s_n>0} Σ_{X_1..X_n:Λ} ad_{V_n}⋯ad_{V_1}(τ^Ψ_t A)`,
/// `V_ℓ = τ^Ψ_{s_ℓ}(Φ̄_{X_ℓ})` along the ray of `t`. The innermost commutator
/// carries the largest time.
pub fn dyson_truncated(a: &LocalOperator, sys: &FiniteSystem, t: TimeArg, n_max: usize, points: usize) -> Result<DysonResult> {
    if n_max > ORDER_CAP {
        return Err(Error::OrderCap { order: n_max, cap: ORDER_CAP });
    }
    let fam = sys.family();
    let free = FreeDynamics::new(fam);
    let gamma = sys.gamma();
    let d = fam.site_dim();
    let tau = t.magnitude();
    let zeroth = free.conj(a, t.as_complex())?;
    let mut total = zeroth.embed(gamma)?.into_matrix();
    let (regions, ops): (Vec<Region>, Vec<LocalOperator>) = fam.multilocal().map(|(r, o)| (r.clone(), o.clone())).unzip();
    for n in 1..=n_max {
        if tau == 0.0 || regions.is_empty() {
            break;
        }
        let tuples = constrained_tuples(&regions, a.region(), n);
        if tuples.is_empty() {
            continue;
        }
        let nodes = SimplexQuadrature::new(n, points, tau)?.nodes();
        let coef = t.coefficient(n);
        let parts = par::try_map_range(nodes.len(), |k| {
            let (s, w) = &nodes[k];
            let mut acc = CMatrix::zeros(total.nrows(), total.ncols());
            for tuple in &tuples {
                let mut b = zeroth.clone();
                for (l, &idx) in tuple.iter().enumerate() {
                    let v = free.conj(&ops[idx], t.point(s[l]))?;
                    b = v.commutator(&b)?;
                }
                acc += b.embed(gamma)?.matrix();
            }
            Ok::<_, Error>(acc * (coef * c(*w)))
        })?;
        for p in parts {
            total += p;
        }
    }
    let table = TermTable::new(fam)?;
    let in_regime = tau == 0.0
        || table.is_trivial()
        || (1..=1000).any(|k| {
            let eps = k as f64 * 0.01;
            let p = NormParams::new(eps, 2.0 * tau).expect("valid grid point");
            2.0 * tau * table.sup(p) < eps
        });
    Ok(DysonResult { operator: LocalOperator::new(gamma.clone(), d, total)?, in_convergence_regime: in_regime })
}

/// `|ω(A τ_{iβ}(B)) − ω(BA)|` for an arbitrary state `ω` and Hamiltonian `H`.
pub fn kms_residual_with_state(state: &State, h: &LocalOperator, beta: f64, a: &LocalOperator, b: &LocalOperator) -> Result<f64> {
    let ev = Evolver::new(h)?;
    let tb = ev.evolve(b, C64::new(0.0, beta))?;
    let lhs = state.expect(&a.product(&tb)?)?;
    let rhs = state.expect(&b.product(a)?)?;
    Ok((lhs - rhs).norm())
}

/// KMS residual of the finite Gibbs state of `sys`.
pub fn kms_residual(sys: &FiniteSystem, a: &LocalOperator, b: &LocalOperator) -> Result<f64> {
    let h = sys.full_hamiltonian()?;
    kms_residual_with_state(&State::gibbs(&h, sys.beta())?, &h, sys.beta(), a, b)
}

/// Both sides of the constrained-sum estimate
/// `Σ_{X_1..X_n:Λ} Π α ≤ n! ε^{-n} e^{ε|Λ|} (sup_x Σ_{X∋x} e^{ε(|X|-1)} α_X)^n`.
pub fn lemma1_check(alpha: &BTreeMap<Region, f64>, lambda: &Region, n: usize, eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    if n > ORDER_CAP {
        return Err(Error::OrderCap { order: n, cap: ORDER_CAP });
    }
    if alpha.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("alpha must be finite and >= 0".into()));
    }
    let (regions, weights): (Vec<Region>, Vec<f64>) = alpha.iter().filter(|(r, _)| !r.is_empty()).map(|(r, v)| (r.clone(), *v)).unzip();
    let lhs: f64 = constrained_tuples(&regions, lambda, n)
        .iter()
        .map(|t| t.iter().map(|&k| weights[k]).product::<f64>())
        .sum();
    let mut per_site: BTreeMap<&Site, f64> = BTreeMap::new();
    for (r, w) in regions.iter().zip(&weights) {
        for s in r.iter() {
            *per_site.entry(s).or_default() += (eps * (r.len() as f64 - 1.0)).exp() * w;
        }
    }
    let sup = per_site.values().cloned().fold(0.0, f64::max);
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let rhs = fact * eps.powi(-(n as i32)) * (eps * lambda.len() as f64).exp() * sup.powi(n as i32);
    Ok((lhs, rhs))
}

/// `K = Σ_ρ (−1)^{n−|ρ|} η_x(L_ρ) R_ρ` with `V_ℓ = τ^Ψ_{i s_ℓ}(Φ̄_{X_ℓ})`,
/// `L_ρ = Π_{ℓ↓, ρ_ℓ=1} V_ℓ`, `R_ρ = Π_{ℓ↑, ρ_ℓ=0} V_ℓ`. The result lives
/// on `{x} ∪ X_1 ∪ … ∪ X_n`.
pub fn ks_kernel(free: &FreeDynamics, eta: &EtaFamily, x: &Site, terms: &[&LocalOperator], times: &[f64]) -> Result<LocalOperator> {
    let n = terms.len();
    if n > KS_ORDER_CAP {
        return Err(Error::OrderCap { order: n, cap: KS_ORDER_CAP });
    }
    if times.len() != n {
        return Err(Error::InvalidParameter("one time per term is required".into()));
    }
    let d = eta.site_dim();
    let xr = Region::single(x.clone());
    let region = terms.iter().fold(xr.clone(), |acc, t| acc.union(t.region()));
    let vs = terms
        .iter()
        .zip(times)
        .map(|(t, &s)| free.conj(t, C64::new(0.0, s)))
        .collect::<Result<Vec<_>>>()?;
    let one = LocalOperator::identity(xr.clone(), d)?;
    let mut out = CMatrix::zeros(region_dim(d, region.len(), DIM_CAP)?, region_dim(d, region.len(), DIM_CAP)?);
    for rho in 0..(1u32 << n) {
        let mut left = one.clone();
        for l in (0..n).rev() {
            if rho >> l & 1 == 1 {
                left = left.product(&vs[l])?;
            }
        }
        let mut right = LocalOperator::scalar(c(1.0), d);
        for (l, v) in vs.iter().enumerate() {
            if rho >> l & 1 == 0 {
                right = right.product(v)?;
            }
        }
        let sign = if (n as u32 - rho.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        let ex = partial_expectation(&left, &xr, eta)?;
        out += ex.product(&right)?.embed(&region)?.matrix() * c(sign);
    }
    LocalOperator::new(region, d, out)
}

/// `2^n Π_ℓ e^{2β‖Ψ‖_{X_ℓ}} ‖Φ̄_{X_ℓ}‖`.
pub fn ks_kernel_bound(fam: &InteractionFamily, terms: &[&LocalOperator], beta: f64) -> Result<f64> {
    let mut b = 2f64.powi(terms.len() as i32);
    for t in terms {
        let psi = crate::norms::psi_norm_sum(fam, t.region())?;
        b *= (2.0 * beta * psi).exp() * t.norm()?;
    }
    Ok(b)
}

/// Per-element outcome of the Kirkwood–Salzburg check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResidual {
    /// `ω(Ã)` under the exact Gibbs state.
    pub omega: f64,
    /// Order-`n` contribution for `n = 1..=N`.
    pub terms: Vec<f64>,
    /// `|ω(Ã) − Σ_{n≤N} term_n|` for `N = 1..=order`.
    pub residuals: Vec<f64>,
    /// Largest `|Σ_X ω(Ã_{X∪Λ_n}) − ω(Ã K)|` seen.
    pub telescoping: f64,
    /// Largest `‖K‖ / bound` seen.
    pub kernel_bound_ratio: f64,
    pub element_norm: f64,
}

/// Kirkwood–Salzburg residuals of η-free elements under the exact Gibbs
/// state of `sys`, truncating the expansion at `order`.
pub fn ks_residual(sys: &FiniteSystem, elems: &[LocalOperator], order: usize, points: usize) -> Result<Vec<KsResidual>> {
    if order > KS_ORDER_CAP {
        return Err(Error::OrderCap { order, cap: KS_ORDER_CAP });
    }
    let fam = sys.family();
    let eta = sys.eta()?;
    let free = FreeDynamics::new(fam);
    let state = sys.gibbs_state()?;
    let beta = sys.beta();
    let (regions, ops): (Vec<Region>, Vec<LocalOperator>) = fam.multilocal().map(|(r, o)| (r.clone(), o.clone())).unzip();
    let bounds: Vec<f64> = ops.iter().map(|o| ks_kernel_bound(fam, &[o], beta)).collect::<Result<_>>()?;
    for e in elems {
        if e.region().is_empty() {
            return Err(Error::EmptyRegion);
        }
        let res = eta_free_residual(e, &eta)?;
        if res > ETA_FREE_TOL * spectral_norm(e.matrix(), false).max(1.0) {
            return Err(Error::NotEtaFree(res));
        }
    }
    par::try_map_range(elems.len(), |ei| {
        let a = &elems[ei];
        let lambda = a.region();
        let x = lambda.min_site().expect("non-empty").clone();
        let omega = state.expect(a)?;
        let mut terms = Vec::with_capacity(order);
        let mut telescoping = 0.0f64;
        let mut ratio = 0.0f64;
        for n in 1..=order {
            let tuples = constrained_tuples(&regions, &Region::single(x.clone()), n);
            if tuples.is_empty() || beta == 0.0 {
                terms.push(0.0);
                continue;
            }
            let nodes = SimplexQuadrature::new(n, points, beta)?.nodes();
            let parts = par::try_map_range(nodes.len(), |k| {
                let (s, w) = &nodes[k];
                let mut acc = c(0.0);
                let mut tele = 0.0f64;
                let mut rmax = 0.0f64;
                for tuple in &tuples {
                    let tops: Vec<&LocalOperator> = tuple.iter().map(|&i| &ops[i]).collect();
                    let kern = ks_kernel(&free, &eta, &x, &tops, s)?;
                    let bound: f64 = 2f64.powi(n as i32) * tuple.iter().map(|&i| bounds[i] / 2.0).product::<f64>();
                    if bound > 0.0 {
                        rmax = rmax.max(spectral_norm(kern.matrix(), false) / bound);
                    }
                    let s_n: Region = tops.iter().fold(Region::empty(), |acc, t| acc.union(t.region()));
                    let prod = a.product(&kern)?;
                    let refined = decompose_refined_element(&prod, &s_n, lambda, &eta)?;
                    let mut sum = c(0.0);
                    for comp in refined.components.values() {
                        sum += state.expect(comp)?;
                    }
                    let direct = state.expect(&prod)?;
                    tele = tele.max((sum - direct).norm());
                    acc += sum;
                }
                Ok::<_, Error>((acc * c(*w), tele, rmax))
            })?;
            let mut total = c(0.0);
            for (v, t, r) in parts {
                total += v;
                telescoping = telescoping.max(t);
                ratio = ratio.max(r);
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            terms.push(sign * total.re);
        }
        let mut residuals = Vec::with_capacity(order);
        let mut partial = 0.0;
        for t in &terms {
            partial += t;
            residuals.push((omega.re - partial).abs());
        }
        Ok(KsResidual {
            omega: omega.re,
            terms,
            residuals,
            telescoping,
            kernel_bound_ratio: ratio,
            element_norm: spectral_norm(a.matrix(), false),
        })
    })
}
