//! Subcritical inverse temperatures, comparator bounds and ε-optimization.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::family::{InteractionFamily, TIInteractionSpec};
use crate::lattice::operator::spectral_norm;
use crate::lattice::spin::{heisenberg_bond_matrix, SpinRep};
use crate::norms::{NormSource, TiTable};
use crate::par;

/// `log 3`, the shift between the norm index and ε.
pub const LN_3: f64 = 1.098_612_288_668_109_8;

/// Absolute tolerance on β for the bisection.
pub const BETA_TOL: f64 = 1e-10;

/// An inverse temperature that may be `+inf`. Serialized as a number or the
/// string `"+inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InvTemp {
    Finite(f64),
    Infinite,
}

impl InvTemp {
    pub fn finite(self) -> Option<f64> {
        match self {
            InvTemp::Finite(v) => Some(v),
            InvTemp::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, InvTemp::Infinite)
    }

    /// `+inf` for the `f64` world.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// `self / other`, undefined when either side is infinite.
    pub fn ratio(self, other: InvTemp) -> Option<f64> {
        Some(self.finite()? / other.finite()?)
    }
}

impl fmt::Display for InvTemp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvTemp::Finite(v) => write!(f, "{v}"),
            InvTemp::Infinite => write!(f, "+inf"),
        }
    }
}

impl Serialize for InvTemp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InvTemp::Finite(v) => s.serialize_f64(*v),
            InvTemp::Infinite => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for InvTemp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(InvTemp::Finite(v)),
            Raw::Str(s) if s == "+inf" => Ok(InvTemp::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"+inf\", got {s:?}"))),
        }
    }
}

/// `ε / (6(1 + e^ε))`.
pub fn target_fn(eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    Ok(eps / (6.0 * (1.0 + eps.exp())))
}

/// `ε e^{-ε} / (1 + e^ε)`.
pub fn ours_objective(eps: f64) -> f64 {
    eps * (-eps).exp() / (1.0 + eps.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsOptimum {
    pub eps_star: f64,
    pub value: f64,
    /// False when the grid scan saw more than one local maximum.
    pub unimodal: bool,
}

pub const EPS_MAX: f64 = 10.0;
pub const EPS_STEP: f64 = 1e-2;

/// Maximize `f` on `(0, 10]`: grid scan with step 0.01, then golden section
/// around the best grid point. A non-unimodal scan keeps the global grid
/// maximum and clears `unimodal`.
pub fn optimize_eps<F>(f: F) -> EpsOptimum
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let n = (EPS_MAX / EPS_STEP).round() as usize;
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 * EPS_STEP).collect();
    let vals = par::map_slice(&grid, |&e| f(e));
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    let unimodal = is_unimodal(&vals);
    if !unimodal {
        return EpsOptimum { eps_star: grid[best], value: vals[best], unimodal };
    }
    let lo = if best == 0 { grid[0] * 0.5 } else { grid[best - 1] };
    let hi = if best + 1 == n { grid[best] } else { grid[best + 1] };
    let (eps_star, value) = golden_max(&f, lo, hi, 1e-10);
    let (eps_star, value) = if value >= vals[best] { (eps_star, value) } else { (grid[best], vals[best]) };
    EpsOptimum { eps_star, value, unimodal }
}

fn is_unimodal(v: &[f64]) -> bool {
    let mut falling = false;
    for w in v.windows(2) {
        let d = w[1] - w[0];
        let tol = 1e-14 * w[0].abs().max(w[1].abs());
        if d < -tol {
            falling = true;
        } else if d > tol && falling {
            return false;
        }
    }
    true
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Root of `β ‖Φ̄‖_{ε+log 3, 2β} = target(ε)` by bracket doubling and
/// bisection. `+inf` when there is no multilocal interaction.
pub fn beta_u_general(src: &dyn NormSource, eps: f64) -> Result<InvTemp> {
    let target = target_fn(eps)?;
    if src.is_trivial() {
        return Ok(InvTemp::Infinite);
    }
    let g = |beta: f64| beta * src.weighted_norm(eps + LN_3, 2.0 * beta) - target;
    let mut hi = 1.0f64;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 2f64.powi(60) {
            return Err(Error::BracketOverflow);
        }
    }
    let mut lo = 0.0f64;
    while hi - lo > BETA_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(InvTemp::Finite(0.5 * (lo + hi)))
}

/// `target(ε) / ‖Φ̄‖_{ε+log 3}` without a commutation check.
pub fn beta_u_from_norm(src: &dyn NormSource, eps: f64) -> Result<InvTemp> {
    let target = target_fn(eps)?;
    if src.is_trivial() {
        return Ok(InvTemp::Infinite);
    }
    Ok(InvTemp::Finite(target / src.weighted_norm(eps + LN_3, 0.0)))
}

/// Largest `‖[Φ̄_Λ, Ψ_x]‖` over overlapping pairs.
pub fn max_commutator(fam: &InteractionFamily) -> f64 {
    let mut worst = 0.0f64;
    for (region, phi) in fam.multilocal() {
        for x in region.iter() {
            if let Some(psi) = fam.psi(x) {
                let c = phi.commutator(psi).expect("same site dimension in one family");
                worst = worst.max(spectral_norm(c.matrix(), false));
            }
        }
    }
    worst
}

/// Commuting case: verifies `[Φ̄_Λ, Ψ_x] = 0` (tolerance 1e-10), then
/// `β_u = target(ε) / ‖Φ̄‖_{ε+log 3}`.
pub fn beta_u_commuting(fam: &InteractionFamily, eps: f64) -> Result<InvTemp> {
    let c = max_commutator(fam);
    if c >= 1e-10 {
        return Err(Error::CommutationFailed(c));
    }
    let table = crate::norms::TermTable::new(fam)?;
    beta_u_from_norm(&table, eps)
}

/// How ε is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsChoice {
    Auto,
    Fixed(f64),
}

/// β_u at the chosen ε, optimizing over ε when asked.
pub fn optimal_beta<F>(choice: EpsChoice, beta_at: F) -> Result<(f64, InvTemp)>
where
    F: Fn(f64) -> Result<InvTemp> + Sync + Send,
{
    match choice {
        EpsChoice::Fixed(eps) => Ok((eps, beta_at(eps)?)),
        EpsChoice::Auto => {
            if beta_at(1.0)?.is_infinite() {
                let opt = optimize_eps(ours_objective);
                return Ok((opt.eps_star, InvTemp::Infinite));
            }
            let opt = optimize_eps(|e| beta_at(e).map_or(f64::NAN, InvTemp::as_f64));
            if !opt.value.is_finite() {
                return Err(Error::InvalidParameter("β_u objective is not finite on the ε grid".into()));
            }
            Ok((opt.eps_star, beta_at(opt.eps_star)?))
        }
    }
}

/// A comparator bound at its own optimal ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub eps_star: Option<f64>,
    pub beta: InvTemp,
}

/// `εe^{-ε} / (1 + e^ε (2j+1)³/(2j))`.
pub fn br_645_objective(spin: SpinRep, eps: f64) -> f64 {
    let d = spin.dim() as f64;
    eps * (-eps).exp() / (1.0 + eps.exp() * d.powi(3) / spin.two_j() as f64)
}

/// Heisenberg comparator with `S = sup_x Σ_y |J(x,y)| ‖bond‖`.
pub fn br_645_beta(spin: SpinRep, s: f64) -> Comparator {
    let opt = optimize_eps(|e| br_645_objective(spin, e));
    if s == 0.0 {
        return Comparator { eps_star: Some(opt.eps_star), beta: InvTemp::Infinite };
    }
    let d = spin.dim() as f64;
    Comparator { eps_star: Some(opt.eps_star), beta: InvTemp::Finite(opt.value / (2.0 * d * d * s)) }
}

/// `εe^{-ε} / (1 + 2(2j+1)⁴ e^ε)`.
pub fn br_646_objective(spin: SpinRep, eps: f64) -> f64 {
    let d = spin.dim() as f64;
    eps * (-eps).exp() / (1.0 + 2.0 * d.powi(4) * eps.exp())
}

/// Ising comparator `[1/(8ν|J|(2j+1)³)] max_ε εe^{-ε}/(1+2(2j+1)⁴e^ε)`.
pub fn br_646_beta(spin: SpinRep, nu: usize, j: f64) -> Comparator {
    let opt = optimize_eps(|e| br_646_objective(spin, e));
    if j == 0.0 {
        return Comparator { eps_star: Some(opt.eps_star), beta: InvTemp::Infinite };
    }
    let d = spin.dim() as f64;
    let beta = opt.value / (8.0 * nu as f64 * j.abs() * d.powi(3));
    Comparator { eps_star: Some(opt.eps_star), beta: InvTemp::Finite(beta) }
}

/// `log 2 / (6 ‖φ̄‖_{log 3})`.
pub fn beta_u_classical(norm_log3: f64) -> Result<InvTemp> {
    if !(norm_log3.is_finite() && norm_log3 >= 0.0) {
        return Err(Error::InvalidParameter(format!("norm must be finite and >= 0, got {norm_log3}")));
    }
    if norm_log3 == 0.0 {
        return Ok(InvTemp::Infinite);
    }
    Ok(InvTemp::Finite(LN_2 / (6.0 * norm_log3)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvBound {
    pub beta: InvTemp,
    /// `18ν log(1 + 1/(2ν e^{6+2ε}))`.
    pub ratio_quoted: f64,
    /// Supremum over ν of `ratio_quoted`, `9/e^{6+2ε}`.
    pub ratio_sup: f64,
}

/// Nearest-neighbour classical Heisenberg bound
/// `[1/(J max(|δ|,1))] log(1 + 1/(2ν e^{6+2ε}))`.
pub fn fv_beta(nu: usize, j: f64, delta: f64, eps: f64) -> Result<FvBound> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
    }
    if nu == 0 {
        return Err(Error::InvalidParameter("lattice dimension must be >= 1".into()));
    }
    let nu_f = nu as f64;
    let l = (1.0 / (2.0 * nu_f * (6.0 + 2.0 * eps).exp())).ln_1p();
    let scale = j.abs() * delta.abs().max(1.0);
    let beta = if scale == 0.0 { InvTemp::Infinite } else { InvTemp::Finite(l / scale) };
    Ok(FvBound { beta, ratio_quoted: 18.0 * nu_f * l, ratio_sup: 9.0 / (6.0 + 2.0 * eps).exp() })
}

/// One named pass/fail item with the number it was judged on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value <= bound, value, bound }
    }

    pub fn lt(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value < bound, value, bound }
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value >= bound, value, bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub model_id: String,
    pub eps_star: f64,
    pub beta_u: InvTemp,
    pub comparators: BTreeMap<String, Comparator>,
    /// `comparator.beta / beta_u` for every finite pair.
    pub ratios: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn new(model_id: String, eps_star: f64, beta_u: InvTemp) -> Self {
        Self { model_id, eps_star, beta_u, comparators: BTreeMap::new(), ratios: BTreeMap::new(), checks: Vec::new() }
    }

    pub fn add(&mut self, name: &str, c: Comparator) {
        if let Some(r) = c.beta.ratio(self.beta_u) {
            self.ratios.insert(name.to_string(), r);
        }
        self.comparators.insert(name.to_string(), c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn model_id(kind: &str, parts: &[(&str, f64)]) -> String {
    let mut s = kind.to_string();
    for (k, v) in parts {
        s.push_str(&format!("_{k}={v}"));
    }
    s
}

/// Quantum anisotropic Heisenberg model on Z^ν with constant coupling.
pub fn heisenberg_report(nu: usize, spin: SpinRep, j: f64, delta: f64, eps: EpsChoice) -> Result<BoundReport> {
    let spec = TIInteractionSpec::heisenberg(nu, j, delta, spin)?;
    let table = TiTable::new(&spec)?;
    let (eps_star, beta) = optimal_beta(eps, |e| beta_u_general(&table, e))?;
    let id = model_id("heisenberg", &[("nu", nu as f64), ("two_j", spin.two_j() as f64), ("J", j), ("delta", delta)]);
    let mut rep = BoundReport::new(id, eps_star, beta);
    let bond = spectral_norm(&heisenberg_bond_matrix(spin, delta), true);
    let s = 2.0 * nu as f64 * j.abs() * bond;
    rep.add("bratteli_robinson_645", br_645_beta(spin, s));
    if let Some(b) = beta.finite() {
        let closed = target_fn(eps_star)? / (3.0 * eps_star.exp() * s);
        rep.checks.push(Check::le("bisection_matches_closed_form", (b - closed).abs(), BETA_TOL));
    }
    Ok(rep)
}

/// Quantum Ising model with staggered field on Z^ν. `beta_u` is the
/// symbolic value `max_ε εe^{-ε}/(36ν|J|(1+e^ε))`.
pub fn ising_report(nu: usize, spin: SpinRep, j: f64, b: f64, eps: EpsChoice) -> Result<BoundReport> {
    let spec = TIInteractionSpec::ising_staggered(nu, j, b, spin)?;
    let table = TiTable::new(&spec)?;
    let symbolic = |e: f64| -> Result<InvTemp> {
        if j == 0.0 {
            return Ok(InvTemp::Infinite);
        }
        Ok(InvTemp::Finite(ours_objective(e) / (36.0 * nu as f64 * j.abs())))
    };
    let (eps_star, beta) = optimal_beta(eps, symbolic)?;
    let id = model_id("ising_staggered", &[("nu", nu as f64), ("two_j", spin.two_j() as f64), ("J", j), ("B", b)]);
    let mut rep = BoundReport::new(id, eps_star, beta);
    rep.add("bratteli_robinson_646", br_646_beta(spin, nu, j));
    let (e_op, b_op) = optimal_beta(eps, |e| beta_u_from_norm(&table, e))?;
    rep.add("ours_operator_norm", Comparator { eps_star: Some(e_op), beta: b_op });
    let (e_nc, b_nc) = optimal_beta(eps, |e| beta_u_general(&table, e))?;
    rep.add("ours_noncommuting", Comparator { eps_star: Some(e_nc), beta: b_nc });
    // commutation on a patch containing every motif through the origin
    let window = crate::lattice::geometry::Region::hypercube(nu, -1, 1);
    let patch = crate::lattice::family::build_ising_staggered(j, b, spin, &window)?;
    rep.checks.push(Check::lt("field_commutes_with_bonds", max_commutator(&patch), 1e-10));
    Ok(rep)
}

/// Classical anisotropic Heisenberg model on Z^ν. `beta_u` is
/// `log 2/(6‖φ̄‖_{log 3})`; `eps_fv` feeds the FV comparator.
pub fn classical_report(nu: usize, j: f64, delta: f64, eps: EpsChoice, eps_fv: f64) -> Result<BoundReport> {
    let spec = TIInteractionSpec::classical_heisenberg(nu, j, delta)?;
    let table = TiTable::new(&spec)?;
    let norm_log3 = table.weighted_norm(LN_3, 0.0);
    let beta = beta_u_classical(norm_log3)?;
    let id = model_id("classical_heisenberg", &[("nu", nu as f64), ("J", j), ("delta", delta)]);
    let (e_hat, b_hat) = optimal_beta(eps, |e| beta_u_general(&table, e))?;
    let mut rep = BoundReport::new(id, e_hat, beta);
    let fv = fv_beta(nu, j, delta, eps_fv)?;
    rep.add("friedli_velenik", Comparator { eps_star: Some(eps_fv), beta: fv.beta });
    rep.add("combined", Comparator { eps_star: Some(e_hat), beta: b_hat });
    let quoted = if norm_log3 == 0.0 { InvTemp::Infinite } else { InvTemp::Finite(1.0 / (3.0 * norm_log3)) };
    rep.add("classical_quoted", Comparator { eps_star: None, beta: quoted });
    rep.checks.push(Check::le("fv_ratio_quoted_below_sup", fv.ratio_quoted, fv.ratio_sup));
    if let Some(bh) = b_hat.finite() {
        rep.checks.push(Check::lt("combined_times_6norm_below_log2", bh * 6.0 * norm_log3, LN_2));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::family::build_heisenberg;
    use crate::lattice::family::build_ising_staggered;
    use crate::lattice::geometry::Region;
    use crate::norms::TermTable;
    use proptest::prelude::*;

    #[test]
    fn target_values() {
        assert!(target_fn(0.0).is_err());
        assert!(target_fn(1e-9).unwrap() < 1e-9);
        let e = std::f64::consts::E;
        assert!((target_fn(1.0).unwrap() - 1.0 / (6.0 * (1.0 + e))).abs() < 1e-15);
        assert!((target_fn(1.0).unwrap() - 0.04483).abs() < 1e-5);
    }

    #[test]
    fn ours_objective_peak() {
        let opt = optimize_eps(ours_objective);
        assert!(opt.unimodal);
        assert!((opt.eps_star - 0.607).abs() < 2e-3);
        assert!((opt.value - 0.117).abs() < 1e-3);
        // stationarity of the analytic derivative
        let h = 1e-6;
        let d = (ours_objective(opt.eps_star + h) - ours_objective(opt.eps_star - h)) / (2.0 * h);
        assert!(d.abs() < 1e-6);
    }

    #[test]
    fn br_objectives_peaks() {
        let half = SpinRep::half();
        assert!((optimize_eps(|e| br_645_objective(half, e)).eps_star - 0.518).abs() < 2e-3);
        assert!((optimize_eps(|e| br_646_objective(half, e)).eps_star - 0.505).abs() < 2e-3);
        let e8 = optimize_eps(|e| br_645_objective(SpinRep::new(16).unwrap(), e)).eps_star;
        assert!(e8 > 0.5 && e8 < 0.518);
    }

    #[test]
    fn non_unimodal_scan_is_flagged() {
        let f = |e: f64| (-(e - 1.0).powi(2) * 20.0).exp() + 2.0 * (-(e - 5.0).powi(2) * 20.0).exp();
        let opt = optimize_eps(f);
        assert!(!opt.unimodal);
        assert!((opt.eps_star - 5.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_interaction_gives_infinity() {
        let fam = InteractionFamily::new(2);
        let t = TermTable::new(&fam).unwrap();
        assert_eq!(beta_u_general(&t, 0.5).unwrap(), InvTemp::Infinite);
        assert_eq!(beta_u_commuting(&fam, 0.5).unwrap(), InvTemp::Infinite);
        assert_eq!(beta_u_classical(0.0).unwrap(), InvTemp::Infinite);
    }

    #[test]
    fn heisenberg_commuting_example() {
        let spec = TIInteractionSpec::heisenberg(1, 1.0, 1.0, SpinRep::half()).unwrap();
        let t = TiTable::new(&spec).unwrap();
        for eps in [0.2f64, 0.607, 1.5] {
            let expect = eps * (-eps).exp() / (27.0 * (1.0 + eps.exp()));
            let b = beta_u_from_norm(&t, eps).unwrap().finite().unwrap();
            assert!((b - expect).abs() < 1e-14);
            let g = beta_u_general(&t, eps).unwrap().finite().unwrap();
            assert!((g - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn commuting_check_and_b_independence() {
        let w = Region::chain(3);
        let a = build_ising_staggered(1.0, 0.0, SpinRep::half(), &w).unwrap();
        let b = build_ising_staggered(1.0, 5.0, SpinRep::half(), &w).unwrap();
        assert_eq!(beta_u_commuting(&a, 0.6).unwrap(), beta_u_commuting(&b, 0.6).unwrap());
        // a transverse field breaks commutation
        let mut c = build_heisenberg(|_, _| 1.0, 0.0, SpinRep::half(), &w).unwrap();
        let [s1, _, _] = crate::lattice::spin::spin_matrices(SpinRep::half(), &crate::lattice::geometry::Site::new([0])).unwrap();
        c.insert(s1).unwrap();
        assert!(matches!(beta_u_commuting(&c, 0.6), Err(Error::CommutationFailed(_))));
    }

    #[test]
    fn noncommuting_treatment_is_smaller_and_depends_on_b() {
        let spin = SpinRep::half();
        let t0 = TiTable::new(&TIInteractionSpec::ising_staggered(1, 1.0, 0.0, spin).unwrap()).unwrap();
        let t1 = TiTable::new(&TIInteractionSpec::ising_staggered(1, 1.0, 1.0, spin).unwrap()).unwrap();
        let t2 = TiTable::new(&TIInteractionSpec::ising_staggered(1, 1.0, 3.0, spin).unwrap()).unwrap();
        let c = beta_u_from_norm(&t1, 0.6).unwrap().as_f64();
        let g0 = beta_u_general(&t0, 0.6).unwrap().as_f64();
        let g1 = beta_u_general(&t1, 0.6).unwrap().as_f64();
        let g2 = beta_u_general(&t2, 0.6).unwrap().as_f64();
        assert!((g0 - c).abs() < 1e-10);
        assert!(g1 < c && g2 < g1);
    }

    #[test]
    fn heisenberg_ratio() {
        let rep = heisenberg_report(1, SpinRep::half(), 1.0, 1.0, EpsChoice::Auto).unwrap();
        assert!(rep.all_passed());
        let r = rep.ratios["bratteli_robinson_645"];
        assert!((r - 0.412).abs() < 5e-3);
        // displayed ratio formula
        let half = SpinRep::half();
        let eb = rep.comparators["bratteli_robinson_645"].eps_star.unwrap();
        let formula = 9.0 / 4.0 * br_645_objective(half, eb) / ours_objective(rep.eps_star);
        assert!((r - formula).abs() < 1e-8);
    }

    #[test]
    fn ising_ratio_and_scaling() {
        let r1 = ising_report(1, SpinRep::half(), 1.0, 1.0, EpsChoice::Auto).unwrap();
        assert!(r1.all_passed());
        assert!((r1.ratios["bratteli_robinson_646"] - 0.027).abs() < 3e-3);
        let r2 = ising_report(2, SpinRep::half(), 1.0, 1.0, EpsChoice::Auto).unwrap();
        let half = |a: InvTemp, b: InvTemp| (a.as_f64() / b.as_f64() - 2.0).abs() < 1e-9;
        assert!(half(r1.beta_u, r2.beta_u));
        assert!(half(r1.comparators["bratteli_robinson_646"].beta, r2.comparators["bratteli_robinson_646"].beta));
        assert!((r1.comparators["ours_operator_norm"].beta.as_f64() / r1.beta_u.as_f64() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn classical_plug_in() {
        let rep = classical_report(1, 1.0, 1.0, EpsChoice::Auto, 0.0).unwrap();
        assert!((rep.beta_u.as_f64() - LN_2 / 36.0).abs() < 1e-15);
        assert!((rep.comparators["classical_quoted"].beta.as_f64() - 1.0 / 18.0).abs() < 1e-15);
        assert!(rep.all_passed());
        let closed = optimize_eps(ours_objective).value / 36.0;
        assert!((rep.comparators["combined"].beta.as_f64() - closed).abs() < 1e-9);
    }

    #[test]
    fn fv_values() {
        let fv = fv_beta(1, 1.0, 1.0, 0.0).unwrap();
        assert!((fv.ratio_quoted - 18.0 * (1.0 + 1.0 / (2.0 * 6f64.exp())).ln()).abs() < 1e-15);
        assert!((fv.ratio_quoted - 0.0223).abs() < 1e-4);
        assert!((fv.ratio_sup - 9.0 / 6f64.exp()).abs() < 1e-15);
        let mut prev = 0.0;
        for nu in 1..=64 {
            let r = fv_beta(nu, 1.0, 1.0, 0.3).unwrap();
            assert!(r.ratio_quoted > prev && r.ratio_quoted < r.ratio_sup);
            prev = r.ratio_quoted;
        }
    }

    #[test]
    fn degenerate_couplings() {
        let rep = classical_report(2, 0.0, 1.0, EpsChoice::Auto, 0.0).unwrap();
        assert!(rep.beta_u.is_infinite());
        assert!(rep.comparators["combined"].beta.is_infinite());
        let h = heisenberg_report(1, SpinRep::half(), 0.0, 1.0, EpsChoice::Auto).unwrap();
        assert!(h.beta_u.is_infinite() && h.ratios.is_empty());
    }

    #[test]
    fn inv_temp_serde() {
        let s = serde_json::to_string(&vec![InvTemp::Finite(0.5), InvTemp::Infinite]).unwrap();
        assert_eq!(s, "[0.5,\"+inf\"]");
        let back: Vec<InvTemp> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![InvTemp::Finite(0.5), InvTemp::Infinite]);
    }

    proptest! {
        #[test]
        fn root_and_monotonicity(b in 0.0f64..3.0, j in 0.1f64..3.0, eps in 0.05f64..3.0) {
            let t = TiTable::new(&TIInteractionSpec::ising_staggered(2, j, b, SpinRep::new(2).unwrap()).unwrap()).unwrap();
            let beta = beta_u_general(&t, eps).unwrap().finite().unwrap();
            let g = |x: f64| x * t.weighted_norm(eps + LN_3, 2.0 * x) - target_fn(eps).unwrap();
            prop_assert!(g(beta - 2.0 * BETA_TOL) < 0.0 && g(beta + 2.0 * BETA_TOL) > 0.0);
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=20 {
                let x = beta * k as f64 / 20.0 * 0.999;
                let v = g(x);
                prop_assert!(v < 0.0 && v > prev);
                prev = v;
            }
        }

        #[test]
        fn combined_never_exceeds_classical(j in 0.1f64..5.0, delta in -3.0f64..3.0, nu in 1usize..4) {
            let rep = classical_report(nu, j, delta, EpsChoice::Auto, 0.0).unwrap();
            prop_assert!(rep.comparators["combined"].beta.as_f64() <= rep.beta_u.as_f64());
        }
    }
}
