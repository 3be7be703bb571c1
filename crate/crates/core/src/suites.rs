//! Seeded randomized verification suites. Each draw owns an RNG stream, so
//! a suite's report is a function of its inputs and seed alone.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::Check;
use crate::classical::{invariance_residual, ClassicalPotential, SphereGrid};
use crate::error::{Error, Result};
use crate::eta::{decompose_moebius, decompose_recursive, EtaFamily};
use crate::lattice::family::{build_heisenberg, InteractionFamily};
use crate::lattice::geometry::{Region, Site};
use crate::lattice::operator::{spectral_norm, CMatrix, HermitianEigen, LocalOperator, C64};
use crate::lattice::spin::SpinRep;
use crate::par;
use crate::quantum::{dyson_truncated, evolve, kms_residual_with_state, ks_kernel, ks_kernel_bound, ks_residual, lemma1_check, FiniteSystem, FreeDynamics, State, TimeArg};
use crate::random::{haar_unitary, random_hermitian, random_rotation, rng_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Decompose,
    Kms,
    Dyson,
    Ks,
    Lemma1,
    ClassicalInvariance,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Decompose, Suite::Kms, Suite::Dyson, Suite::Ks, Suite::Lemma1, Suite::ClassicalInvariance];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decompose => "decompose",
            Suite::Kms => "kms",
            Suite::Dyson => "dyson",
            Suite::Ks => "ks",
            Suite::Lemma1 => "lemma1",
            Suite::ClassicalInvariance => "classical-invariance",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub draws: usize,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

pub fn random_operator<R: Rng + ?Sized>(region: Region, site_dim: usize, rng: &mut R) -> Result<LocalOperator> {
    let dim = crate::lattice::operator::region_dim(site_dim, region.len(), crate::lattice::operator::DIM_CAP)?;
    LocalOperator::new(region, site_dim, random_hermitian(dim, rng))
}

/// Family of random Hermitian single-site potentials on `region`.
pub fn random_fields<R: Rng + ?Sized>(region: &Region, site_dim: usize, rng: &mut R) -> Result<InteractionFamily> {
    let mut fam = InteractionFamily::new(site_dim);
    for s in region.iter() {
        fam.insert(random_operator(Region::single(s.clone()), site_dim, rng)?)?;
    }
    Ok(fam)
}

/// Nearest-neighbour Heisenberg chain of `n` sites plus random fields.
pub fn heisenberg_with_fields(n: usize, spin: SpinRep, field_scale: f64, beta: f64, seed: u64, stream: u64) -> Result<FiniteSystem> {
    let gamma = Region::chain(n);
    let mut fam = build_heisenberg(|_, _| 1.0, 1.0, spin, &gamma)?;
    if field_scale != 0.0 {
        let mut rng = rng_for(seed, stream);
        for s in gamma.iter() {
            fam.insert(random_operator(Region::single(s.clone()), spin.dim(), &mut rng)?.scale(c(field_scale)))?;
        }
    }
    FiniteSystem::new(gamma, fam, spin, beta)
}

/// Top component `Ã_Λ` of a random Hermitian operator on `Λ`.
pub fn random_eta_free<R: Rng + ?Sized>(lambda: &Region, eta: &EtaFamily, rng: &mut R) -> Result<LocalOperator> {
    let a = random_operator(lambda.clone(), eta.site_dim(), rng)?;
    decompose_recursive(&a, eta)?.get(lambda).cloned().ok_or(Error::EmptyRegion)
}

#[derive(Clone, Debug)]
pub struct DecomposeCase {
    pub eta: EtaFamily,
    pub lambda: Region,
}

/// Random single-site states on `lambda` at `beta`.
pub fn random_decompose_case(lambda: Region, spin: SpinRep, beta: f64, seed: u64, stream: u64) -> Result<DecomposeCase> {
    let fam = random_fields(&lambda, spin.dim(), &mut rng_for(seed, stream))?;
    Ok(DecomposeCase { eta: EtaFamily::new(&fam, beta)?, lambda })
}

/// Reconstruction, η-freeness, recursive/Möbius agreement and the
/// `2^{|X|}‖A‖` component bound on one random operator per case.
pub fn decompose_suite(cases: &[DecomposeCase], seed: u64) -> Result<SuiteReport> {
    let rows = par::try_map_range(cases.len(), |i| {
        let case = &cases[i];
        let mut rng = rng_for(seed, i as u64);
        let a = random_operator(case.lambda.clone(), case.eta.site_dim(), &mut rng)?;
        let an = spectral_norm(a.matrix(), true);
        let rec = decompose_recursive(&a, &case.eta)?;
        let mob = decompose_moebius(&a, &case.eta)?;
        let res = rec.residuals(&a, &case.eta)?;
        let mut agree = 0.0f64;
        for (x, comp) in &rec.components {
            let other = mob.get(x).ok_or(Error::EmptyRegion)?;
            agree = agree.max(spectral_norm(&(comp.matrix() - other.matrix()), false));
        }
        Ok::<_, Error>([res.reconstruction / an, res.eta_free, agree, res.norm_ratio])
    })?;
    let col = |k: usize| max_of(rows.iter().map(|r| r[k]));
    Ok(SuiteReport {
        suite: Suite::Decompose,
        seed,
        draws: cases.len(),
        checks: vec![
            Check::le("reconstruction_over_norm", col(0), 1e-10),
            Check::le("eta_free_residual", col(1), 1e-10),
            Check::le("recursive_vs_moebius", col(2), 1e-11),
            Check::le("component_norm_ratio", col(3), 1.0),
        ],
    })
}

/// KMS residual of the Gibbs state, normalized by `‖A‖‖B‖e^{2β‖H‖}`, and
/// the share of draws on which the maximally mixed state violates it by
/// more than `1e-3`.
pub fn kms_suite(systems: &[FiniteSystem], draws: usize, seed: u64) -> Result<SuiteReport> {
    if systems.is_empty() {
        return Err(Error::InvalidParameter("kms suite needs at least one system".into()));
    }
    let rows = par::try_map_range(draws, |i| {
        let sys = &systems[i % systems.len()];
        let mut rng = rng_for(seed, i as u64);
        let gamma = sys.gamma();
        let mask = rng.random_range(1u64..(1u64 << gamma.len()));
        let a = random_operator(gamma.subset_from_mask(mask), sys.spin().dim(), &mut rng)?;
        let b = random_operator(gamma.clone(), sys.spin().dim(), &mut rng)?;
        let h = sys.full_hamiltonian()?;
        let gibbs = State::gibbs(&h, sys.beta())?;
        let mixed = State::maximally_mixed(gamma.clone(), sys.spin().dim())?;
        let scale = a.norm()? * b.norm()? * (2.0 * sys.beta() * h.norm()?).exp();
        let r = kms_residual_with_state(&gibbs, &h, sys.beta(), &a, &b)?;
        let m = kms_residual_with_state(&mixed, &h, sys.beta(), &a, &b)?;
        Ok::<_, Error>((r / scale, m))
    })?;
    let worst = max_of(rows.iter().map(|r| r.0));
    let hits = rows.iter().filter(|r| r.1 > 1e-3).count() as f64 / draws.max(1) as f64;
    Ok(SuiteReport {
        suite: Suite::Kms,
        seed,
        draws,
        checks: vec![Check::le("gibbs_residual_normalized", worst, 1e-9), Check::ge("mismatched_state_detected_fraction", hits, 0.9)],
    })
}

/// Truncation error of the order-`n` Dyson sum at `t` and `t/2`, for a
/// random operator on the first site.
pub fn dyson_errors(sys: &FiniteSystem, t: f64, order: usize, points: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = rng_for(seed, 0);
    let x = sys.gamma().min_site().ok_or(Error::EmptyRegion)?.clone();
    let a = random_operator(Region::single(x), sys.spin().dim(), &mut rng)?;
    let h = sys.full_hamiltonian()?;
    let err = |tt: f64| -> Result<f64> {
        let d = dyson_truncated(&a, sys, TimeArg::Real(tt), order, points)?;
        let exact = evolve(&a, &h, c(tt))?;
        Ok(spectral_norm(&(d.operator.matrix() - exact.matrix()), false))
    };
    Ok((err(t)?, err(t / 2.0)?))
}

/// Error ratio under halving `t`; `≥ 11` is order-`t⁴` behaviour at `N = 3`
/// with slack.
pub fn dyson_suite(sys: &FiniteSystem, t: f64, order: usize, points: usize, seed: u64) -> Result<SuiteReport> {
    let (e1, e2) = dyson_errors(sys, t, order, points, seed)?;
    let ratio = if e2 > 0.0 { e1 / e2 } else { f64::INFINITY };
    let need = 2f64.powi(order as i32 + 1) * 0.7;
    Ok(SuiteReport {
        suite: Suite::Dyson,
        seed,
        draws: 1,
        checks: vec![Check::ge("error_ratio_under_halving", ratio, need)],
    })
}

/// Constrained-sum estimate on random weights over the subsets of `lattice`.
pub fn lemma1_suite(lattice: &Region, draws: usize, max_order: usize, eps_values: &[f64], seed: u64) -> Result<SuiteReport> {
    let n = lattice.len();
    if n > 12 {
        return Err(Error::SubsetCap { sites: n, cap: 12 });
    }
    let rows = par::try_map_range(draws, |i| {
        let mut rng = rng_for(seed, i as u64);
        let mut alpha = BTreeMap::new();
        for m in 1u64..(1 << n) {
            if rng.random::<f64>() < 0.6 {
                alpha.insert(lattice.subset_from_mask(m), rng.random::<f64>() * 2.0);
            }
        }
        let lam = lattice.subset_from_mask(rng.random_range(1u64..(1 << n)));
        let order = rng.random_range(1..=max_order);
        let eps = eps_values[rng.random_range(0..eps_values.len())];
        let (l, r) = lemma1_check(&alpha, &lam, order, eps)?;
        Ok::<_, Error>(if r > 0.0 { l / r } else if l == 0.0 { 0.0 } else { f64::INFINITY })
    })?;
    let violations = rows.iter().filter(|v| **v > 1.0).count();
    Ok(SuiteReport {
        suite: Suite::Lemma1,
        seed,
        draws,
        checks: vec![Check::le("violations", violations as f64, 0.0), Check::le("max_lhs_over_rhs", max_of(rows), 1.0)],
    })
}

/// Monte-Carlo Haar estimate of the order-one kernel at time `s`:
/// `⨍ U^dagger [V, e^{-βΨ_x} U] dU / (tr e^{-βΨ_x}/d)`, compared with the
/// ρ-expansion. Returns `(‖mean − K‖_F, σ)` with `σ` the standard error of
/// the mean in Frobenius norm.
pub fn ks_kernel_mc(sys: &FiniteSystem, s: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let fam = sys.family();
    let x = sys.gamma().min_site().ok_or(Error::EmptyRegion)?.clone();
    let xr = Region::single(x.clone());
    let term = fam.multilocal().find(|(r, _)| r.contains(&x)).map(|(_, o)| o).ok_or(Error::InvalidParameter("no multilocal term at the first site".into()))?;
    let eta = sys.eta()?;
    let free = FreeDynamics::new(fam);
    let k = ks_kernel(&free, &eta, &x, &[term], &[s])?;
    let region = k.region().clone();
    let d = sys.spin().dim();
    let g = match fam.psi(&x) {
        Some(p) => HermitianEigen::new(p.matrix()).apply(|l| c((-sys.beta() * l).exp())),
        None => CMatrix::identity(d, d),
    };
    let norm = g.trace() / c(d as f64);
    let g = LocalOperator::new(xr.clone(), d, g)?;
    let v = free.conj(term, C64::new(0.0, s))?;
    let draws = par::try_map_range(samples, |i| {
        let u = LocalOperator::new(xr.clone(), d, haar_unitary(d, &mut rng_for(seed, i as u64)))?;
        let inner = g.product(&u)?;
        let m = u.adjoint().product(&v.commutator(&inner)?)?.embed(&region)?;
        Ok::<_, Error>(m.into_matrix() / norm)
    })?;
    let n = samples as f64;
    let dim = k.dim();
    let mut mean = CMatrix::zeros(dim, dim);
    for m in &draws {
        mean += m;
    }
    mean /= c(n);
    let mut var = 0.0;
    for m in &draws {
        var += (m - &mean).norm_squared();
    }
    let sigma = (var / (n - 1.0) / n).sqrt();
    Ok(((mean - k.matrix()).norm(), sigma))
}

/// Residuals below this multiple of `‖Ã‖` are treated as converged.
pub const RESIDUAL_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Kernel checks plus residual decay of the KS sum on `elements` random
/// η-free elements over the whole of `Γ`.
pub fn ks_suite(sys: &FiniteSystem, elements: usize, order: usize, points: usize, mc_samples: usize, seed: u64) -> Result<SuiteReport> {
    let eta = sys.eta()?;
    let gamma = sys.gamma();
    let elems = (0..elements).map(|i| random_eta_free(gamma, &eta, &mut rng_for(seed, 10_000 + i as u64))).collect::<Result<Vec<_>>>()?;
    let res = ks_residual(sys, &elems, order, points)?;
    let mut checks = Vec::new();
    if mc_samples > 0 {
        let (err, sigma) = ks_kernel_mc(sys, 0.5 * sys.beta(), mc_samples, seed)?;
        checks.push(Check::le("kernel_vs_haar_mc", err, 3.0 * sigma));
    }
    checks.push(Check::le("kernel_norm_over_bound", max_of(res.iter().map(|r| r.kernel_bound_ratio)), 1.0));
    let rel = |r: &crate::quantum::KsResidual, k: usize| r.residuals[k] / r.element_norm;
    // pairs whose first residual is already at rounding level carry no signal
    let worst_pair = max_of(res.iter().flat_map(|r| {
        let floor = RESIDUAL_FLOOR * r.element_norm;
        r.residuals.windows(2).filter(|w| w[0] > floor).map(|w| w[1] / w[0]).collect::<Vec<_>>()
    }));
    // strictly decreasing in N iff every consecutive ratio is below one
    checks.push(Check::lt("max_consecutive_residual_ratio", worst_pair, 1.0));
    checks.push(Check::lt("final_residual_over_norm", max_of(res.iter().map(|r| rel(r, order - 1))), 1e-4));
    checks.push(Check::le("telescoping_defect", max_of(res.iter().map(|r| r.telescoping)), 1e-10));
    Ok(SuiteReport { suite: Suite::Ks, seed, draws: elements, checks })
}

/// Standalone kernel-bound sweep: random tuples at random times on `sys`.
pub fn ks_kernel_bound_sweep(sys: &FiniteSystem, draws: usize, seed: u64) -> Result<f64> {
    let fam = sys.family();
    let eta = sys.eta()?;
    let free = FreeDynamics::new(fam);
    let terms: Vec<(Region, LocalOperator)> = fam.multilocal().map(|(r, o)| (r.clone(), o.clone())).collect();
    let x = sys.gamma().min_site().ok_or(Error::EmptyRegion)?.clone();
    let ratios = par::try_map_range(draws, |i| {
        let mut rng = rng_for(seed, i as u64);
        let n = rng.random_range(1..=3usize);
        let tuples = crate::quantum::constrained_tuples(&terms.iter().map(|t| t.0.clone()).collect::<Vec<_>>(), &Region::single(x.clone()), n);
        if tuples.is_empty() {
            return Ok(0.0);
        }
        let tuple = &tuples[rng.random_range(0..tuples.len())];
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * sys.beta()).collect();
        times.sort_by(|a, b| b.total_cmp(a));
        let ops: Vec<&LocalOperator> = tuple.iter().map(|&k| &terms[k].1).collect();
        let kern = ks_kernel(&free, &eta, &x, &ops, &times)?;
        let bound = ks_kernel_bound(fam, &ops, sys.beta())?;
        Ok::<_, Error>(if bound > 0.0 { kern.norm()? / bound } else { 0.0 })
    })?;
    Ok(max_of(ratios))
}

/// Rotation identity on random two-site classical systems with random
/// observables, plus sphere-quadrature exactness.
pub fn classical_invariance_suite(draws: usize, j: f64, delta: Option<f64>, q: usize, seed: u64) -> Result<SuiteReport> {
    let grid = SphereGrid::new(q)?;
    let w = Region::chain(2);
    let s0 = Site::new([0]);
    let s1 = Site::new([1]);
    let rows = par::try_map_range(draws, |i| {
        let mut rng = rng_for(seed, i as u64);
        let dl = delta.unwrap_or_else(|| rng.random_range(-2.0..2.0));
        let beta = rng.random::<f64>();
        let field = rng.random_range(-1.0..1.0);
        let r = random_rotation(&mut rng);
        let coef: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let pots = vec![ClassicalPotential::heisenberg_bond(s0.clone(), s1.clone(), j, dl)?, ClassicalPotential::field(s0.clone(), field)];
        let a = ClassicalPotential::new(w.clone(), move |s| coef[0] * s[0].x + coef[1] * s[0].y * s[1].z + coef[2] * s[0].z * s[0].x + coef[3] * s[1].y);
        let x = if i % 2 == 0 { &s0 } else { &s1 };
        invariance_residual(&w, &pots, beta, &a, x, &r, &grid)
    })?;
    let exact = [
        (grid.integrate(|_| 1.0) - 1.0).abs(),
        grid.integrate(|v| v.z).abs(),
        (grid.integrate(|v| v.z * v.z) - 1.0 / 3.0).abs(),
        grid.integrate(|v| 3.0 * v.z * v.z - 1.0).abs(),
    ];
    Ok(SuiteReport {
        suite: Suite::ClassicalInvariance,
        seed,
        draws,
        checks: vec![Check::lt("invariance_residual", max_of(rows), 1e-6), Check::le("sphere_quadrature_exactness", max_of(exact), 1e-10)],
    })
}
