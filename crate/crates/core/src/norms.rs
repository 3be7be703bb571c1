//! Weighted interaction norms `sup_x Σ_{Λ∋x} e^{ε(|Λ|-1) + ζ‖Ψ‖_Λ} ‖Φ̄_Λ‖`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::family::{InteractionFamily, MotifNorm, TIInteractionSpec};
use crate::lattice::geometry::{Region, Site};
use crate::lattice::operator::{operator_norm, spectral_norm, HERMITIAN_TOL};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormParams {
    eps: f64,
    zeta: f64,
}

impl NormParams {
    pub fn new(eps: f64, zeta: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
        }
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::InvalidParameter(format!("zeta must be >= 0, got {zeta}")));
        }
        Ok(Self { eps, zeta })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    fn weight(&self, size: usize, psi: f64) -> f64 {
        (self.eps * (size as f64 - 1.0) + self.zeta * psi).exp()
    }
}

/// Anything that can evaluate the weighted norm.
pub trait NormSource: Sync {
    /// Norm at `(eps, zeta)`; callers guarantee `eps > 0`, `zeta >= 0`.
    fn weighted_norm(&self, eps: f64, zeta: f64) -> f64;

    /// True when there is no (nonzero) multilocal interaction.
    fn is_trivial(&self) -> bool;
}

/// `‖Ψ‖_X = Σ_{x∈X} ‖Ψ_x‖`.
pub fn psi_norm_sum(fam: &InteractionFamily, x: &Region) -> Result<f64> {
    let mut total = 0.0;
    for s in x.iter() {
        if let Some(op) = fam.psi(s) {
            total += operator_norm(op)?;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
struct TermEntry {
    size: usize,
    norm: f64,
    psi: f64,
}

/// Operator norms of a finite family, computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct TermTable {
    entries: Vec<TermEntry>,
    by_site: BTreeMap<Site, Vec<usize>>,
    max_diameter: u32,
}

impl TermTable {
    pub fn new(fam: &InteractionFamily) -> Result<Self> {
        let psi_norms: BTreeMap<Site, f64> = fam
            .singletons()
            .map(|(s, op)| Ok((s.clone(), operator_norm(op)?)))
            .collect::<Result<_>>()?;
        let multi: Vec<_> = fam.multilocal().collect();
        let norms = par::try_map_range(multi.len(), |i| operator_norm(multi[i].1))?;
        let mut entries = Vec::with_capacity(multi.len());
        let mut by_site: BTreeMap<Site, Vec<usize>> = BTreeMap::new();
        for (k, ((region, _), norm)) in multi.iter().zip(norms).enumerate() {
            let psi = region.iter().filter_map(|s| psi_norms.get(s)).sum();
            entries.push(TermEntry { size: region.len(), norm, psi });
            for s in region.iter() {
                by_site.entry(s.clone()).or_default().push(k);
            }
        }
        Ok(Self { entries, by_site, max_diameter: fam.max_diameter() })
    }

    /// `Σ_{Λ∋x}` weighted sum at one site.
    pub fn at_site(&self, x: &Site, p: NormParams) -> f64 {
        self.by_site.get(x).map_or(0.0, |idx| {
            idx.iter()
                .map(|&k| {
                    let e = &self.entries[k];
                    p.weight(e.size, e.psi) * e.norm
                })
                .sum()
        })
    }

    /// Sup over every site touched by a multilocal term.
    pub fn sup(&self, p: NormParams) -> f64 {
        self.by_site.keys().map(|x| self.at_site(x, p)).fold(0.0, f64::max)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.by_site.keys()
    }
}

impl NormSource for TermTable {
    fn weighted_norm(&self, eps: f64, zeta: f64) -> f64 {
        self.sup(NormParams { eps, zeta })
    }

    fn is_trivial(&self) -> bool {
        self.entries.iter().all(|e| e.norm == 0.0)
    }
}

/// `‖Φ̄‖_{ε,ζ}` of a finite family, sup over all sites. Zero for an empty
/// family.
pub fn norm_eps_zeta(fam: &InteractionFamily, p: NormParams) -> Result<f64> {
    Ok(TermTable::new(fam)?.sup(p))
}

/// Finite-window norm with interior and boundary sites reported apart.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowNorm {
    /// Interior sup when any site is interior, otherwise the all-site sup.
    pub value: f64,
    pub interior_sup: Option<f64>,
    pub boundary_sup: f64,
    pub interior_sites: usize,
}

/// A site is interior when every lattice point within the largest term
/// diameter of it lies in `window`.
pub fn norm_eps_zeta_window(fam: &InteractionFamily, p: NormParams, window: &Region) -> Result<WindowNorm> {
    let table = TermTable::new(fam)?;
    let radius = table.max_diameter;
    let mut interior = None::<f64>;
    let mut boundary = 0.0f64;
    let mut count = 0;
    for x in window.iter() {
        let v = table.at_site(x, p);
        if x.ball(radius).iter().all(|y| window.contains(y)) {
            interior = Some(interior.map_or(v, |m| m.max(v)));
            count += 1;
        } else {
            boundary = boundary.max(v);
        }
    }
    Ok(WindowNorm {
        value: interior.unwrap_or(boundary),
        interior_sup: interior,
        boundary_sup: boundary,
        interior_sites: count,
    })
}

/// Per-motif scalars of a translation-invariant interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct TiTable {
    /// `(|M|, |c|·‖op‖)` per motif.
    motifs: Vec<(usize, f64)>,
    single_site_norm: f64,
}

impl TiTable {
    pub fn new(spec: &TIInteractionSpec) -> Result<Self> {
        let motifs = spec
            .motifs
            .iter()
            .map(|m| {
                let base = match &m.norm {
                    MotifNorm::Scalar(v) => *v,
                    MotifNorm::Operator(op) => {
                        let herm = (op - op.adjoint()).norm() <= HERMITIAN_TOL * op.norm().max(f64::MIN_POSITIVE);
                        spectral_norm(op, herm)
                    }
                };
                (m.region.len(), m.coefficient.abs() * base)
            })
            .collect();
        Ok(Self { motifs, single_site_norm: spec.single_site_norm })
    }

    /// Closed form `Σ_M |M| e^{ε(|M|-1) + ζ|M|ψ} |c| ‖op‖`; every site has
    /// `|M|` translates of `M` through it.
    pub fn value(&self, p: NormParams) -> f64 {
        self.motifs
            .iter()
            .map(|&(size, s)| size as f64 * p.weight(size, size as f64 * self.single_site_norm) * s)
            .sum()
    }
}

impl NormSource for TiTable {
    fn weighted_norm(&self, eps: f64, zeta: f64) -> f64 {
        self.value(NormParams { eps, zeta })
    }

    fn is_trivial(&self) -> bool {
        self.motifs.iter().all(|&(_, s)| s == 0.0)
    }
}

/// Translation-invariant closed form of `‖Φ̄‖_{ε,ζ}`.
pub fn norm_eps_zeta_ti(spec: &TIInteractionSpec, p: NormParams) -> Result<f64> {
    Ok(TiTable::new(spec)?.value(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::family::{build_heisenberg, build_ising_staggered, Motif};
    use crate::lattice::spin::{heisenberg_bond_matrix, SpinRep};
    use proptest::prelude::*;

    fn p(eps: f64, zeta: f64) -> NormParams {
        NormParams::new(eps, zeta).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(NormParams::new(0.0, 0.0).is_err());
        assert!(NormParams::new(0.1, -1.0).is_err());
    }

    #[test]
    fn psi_sums() {
        let w = Region::chain(3);
        let heis = build_heisenberg(|_, _| 1.0, 1.0, SpinRep::half(), &w).unwrap();
        assert_eq!(psi_norm_sum(&heis, &w).unwrap(), 0.0);
        let ising = build_ising_staggered(1.0, 0.8, SpinRep::half(), &w).unwrap();
        assert!((psi_norm_sum(&ising, &w).unwrap() - 3.0 * 0.8 * 0.5).abs() < 1e-12);
        assert_eq!(psi_norm_sum(&ising, &Region::empty()).unwrap(), 0.0);
    }

    #[test]
    fn ti_heisenberg_closed_form() {
        for nu in 1..=3 {
            for two_j in 1..=3 {
                let spin = SpinRep::new(two_j).unwrap();
                let spec = TIInteractionSpec::heisenberg(nu, 1.3, 0.7, spin).unwrap();
                let bond = spectral_norm(&heisenberg_bond_matrix(spin, 0.7), true);
                let eps = 0.4;
                let v = norm_eps_zeta_ti(&spec, p(eps + 3f64.ln(), 0.0)).unwrap();
                let expect = 3.0 * eps.exp() * 2.0 * nu as f64 * 1.3 * bond;
                assert!((v - expect).abs() < 1e-12 * expect);
                let vz = norm_eps_zeta_ti(&spec, p(eps + 3f64.ln(), 0.9)).unwrap();
                assert_eq!(v, vz);
            }
        }
    }

    #[test]
    fn staggered_ising_hand_value() {
        let spec = TIInteractionSpec::ising_staggered(1, 1.0, 1.0, SpinRep::half()).unwrap();
        let v = norm_eps_zeta_ti(&spec, p(0.1, 0.2)).unwrap();
        let expect = 2.0 * (0.1f64 + 0.2).exp() * 0.25;
        assert!((v - expect).abs() < 1e-14);
        let fam = build_ising_staggered(1.0, 1.0, SpinRep::half(), &Region::boxed(&[(-3, 3)])).unwrap();
        let w = norm_eps_zeta_window(&fam, p(0.1, 0.2), &Region::boxed(&[(-3, 3)])).unwrap();
        assert!((w.value - expect).abs() < 1e-12);
    }

    #[test]
    fn scalar_and_operator_motifs_agree() {
        let spin = SpinRep::new(2).unwrap();
        let op = heisenberg_bond_matrix(spin, -1.5);
        let s = spectral_norm(&op, true);
        let mk = |norm| TIInteractionSpec::new(
            2,
            3,
            0.0,
            vec![Motif { region: Region::new(vec![Site::new([0, 0]), Site::new([0, 1])]), norm, coefficient: 2.0 }],
        )
        .unwrap();
        let a = norm_eps_zeta_ti(&mk(MotifNorm::Operator(op)), p(0.5, 0.0)).unwrap();
        let b = norm_eps_zeta_ti(&mk(MotifNorm::Scalar(s)), p(0.5, 0.0)).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn window_converges_to_ti_value() {
        let spin = SpinRep::half();
        let spec = TIInteractionSpec::heisenberg(2, 1.0, 0.3, spin).unwrap();
        let ti = norm_eps_zeta_ti(&spec, p(1.0, 0.0)).unwrap();
        let small = Region::hypercube(2, 0, 1);
        let fam = spec.to_family(&small).unwrap();
        let w = norm_eps_zeta_window(&fam, p(1.0, 0.0), &small).unwrap();
        assert_eq!(w.interior_sites, 0);
        assert!(w.value < ti);
        let big = Region::hypercube(2, -2, 2);
        let fam = spec.to_family(&big).unwrap();
        let w = norm_eps_zeta_window(&fam, p(1.0, 0.0), &big).unwrap();
        assert!(w.interior_sites > 0);
        assert!((w.interior_sup.unwrap() - ti).abs() < 1e-12 * ti);
        assert!(w.boundary_sup < ti);
    }

    #[test]
    fn empty_family_is_zero() {
        let fam = InteractionFamily::new(2);
        assert_eq!(norm_eps_zeta(&fam, p(1.0, 1.0)).unwrap(), 0.0);
        assert!(TermTable::new(&fam).unwrap().is_trivial());
    }

    proptest! {
        #[test]
        fn monotone_in_eps_and_zeta(eps in 0.01f64..3.0, de in 0.01f64..1.0, zeta in 0.0f64..2.0, dz in 0.01f64..1.0, b in 0.1f64..2.0) {
            let fam = build_ising_staggered(1.0, b, SpinRep::half(), &Region::chain(4)).unwrap();
            let t = TermTable::new(&fam).unwrap();
            let base = t.sup(p(eps, zeta));
            prop_assert!(t.sup(p(eps + de, zeta)) > base);
            prop_assert!(t.sup(p(eps, zeta + dz)) > base);
        }

        #[test]
        fn homogeneous_in_multilocal_scale(c in 0.0f64..5.0, eps in 0.05f64..2.0, zeta in 0.0f64..1.0) {
            let fam = build_ising_staggered(0.7, 0.4, SpinRep::new(2).unwrap(), &Region::chain(3)).unwrap();
            let base = norm_eps_zeta(&fam, p(eps, zeta)).unwrap();
            let scaled = norm_eps_zeta(&fam.scale_multilocal(c), p(eps, zeta)).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
