use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{Region, Site};
use super::operator::{CMatrix, LocalOperator, C64};
use super::spin::{heisenberg_bond_matrix, ising_bond_matrix, spin_matrix_triple, SpinRep};
use crate::error::{Error, Result};

/// Finitely many interaction terms keyed by region. Singleton terms form the
/// single-site part, the rest the multilocal part.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionFamily {
    site_dim: usize,
    terms: BTreeMap<Region, LocalOperator>,
}

impl InteractionFamily {
    pub fn new(site_dim: usize) -> Self {
        Self {
            site_dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    /// Add a term. Terms on an existing region are summed.
    pub fn insert(&mut self, op: LocalOperator) -> Result<()> {
        if op.region().is_empty() {
            return Err(Error::EmptyRegion);
        }
        if op.site_dim() != self.site_dim {
            return Err(Error::InvalidParameter(format!(
                "term has site dimension {}, family uses {}",
                op.site_dim(),
                self.site_dim
            )));
        }
        let res = op.hermitian_residual();
        if res > super::operator::HERMITIAN_TOL {
            return Err(Error::NotHermitian(res));
        }
        let key = op.region().clone();
        let merged = match self.terms.remove(&key) {
            Some(prev) => prev.sum(&op)?,
            None => op,
        };
        self.terms.insert(key, merged);
        Ok(())
    }

    pub fn terms(&self) -> &BTreeMap<Region, LocalOperator> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, region: &Region) -> Option<&LocalOperator> {
        self.terms.get(region)
    }

    /// Single-site term at `x`, if present.
    pub fn psi(&self, x: &Site) -> Option<&LocalOperator> {
        self.terms.get(&Region::single(x.clone()))
    }

    /// Multilocal term on `region`; `None` for singletons and absent regions.
    pub fn phibar(&self, region: &Region) -> Option<&LocalOperator> {
        if region.len() < 2 {
            return None;
        }
        self.terms.get(region)
    }

    pub fn singletons(&self) -> impl Iterator<Item = (&Site, &LocalOperator)> {
        self.terms
            .iter()
            .filter(|(r, _)| r.len() == 1)
            .map(|(r, op)| (&r.sites()[0], op))
    }

    pub fn multilocal(&self) -> impl Iterator<Item = (&Region, &LocalOperator)> {
        self.terms.iter().filter(|(r, _)| r.len() >= 2)
    }

    /// Union of all term regions.
    pub fn support(&self) -> Region {
        self.terms.keys().flat_map(|r| r.iter().cloned()).collect()
    }

    /// Terms whose region lies inside `window`.
    pub fn restrict(&self, window: &Region) -> Self {
        Self {
            site_dim: self.site_dim,
            terms: self
                .terms
                .iter()
                .filter(|(r, _)| r.is_subset(window))
                .map(|(r, op)| (r.clone(), op.clone()))
                .collect(),
        }
    }

    /// Only the multilocal part.
    pub fn multilocal_part(&self) -> Self {
        Self {
            site_dim: self.site_dim,
            terms: self
                .multilocal()
                .map(|(r, op)| (r.clone(), op.clone()))
                .collect(),
        }
    }

    /// Largest region diameter among multilocal terms.
    pub fn max_diameter(&self) -> u32 {
        self.multilocal().map(|(r, _)| r.diameter()).max().unwrap_or(0)
    }

    /// Multiply every multilocal term by `c`.
    pub fn scale_multilocal(&self, c: f64) -> Self {
        Self {
            site_dim: self.site_dim,
            terms: self
                .terms
                .iter()
                .map(|(r, op)| {
                    let op = if r.len() >= 2 { op.scale(C64::new(c, 0.0)) } else { op.clone() };
                    (r.clone(), op)
                })
                .collect(),
        }
    }
}

/// Quantum anisotropic Heisenberg model on the bonds of `window`:
/// `-J(x,y)(δ(S1S1 + S2S2) + S3S3)`. Zero couplings are skipped.
pub fn build_heisenberg<F>(coupling: F, delta: f64, spin: SpinRep, window: &Region) -> Result<InteractionFamily>
where
    F: Fn(&Site, &Site) -> f64,
{
    let d = spin.dim();
    let bond = heisenberg_bond_matrix(spin, delta);
    let mut fam = InteractionFamily::new(d);
    for (a, b) in window.bonds() {
        let j = coupling(&a, &b);
        if !j.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling on {a}-{b} is not finite")));
        }
        if j == 0.0 {
            continue;
        }
        let r = Region::new(vec![a, b]);
        fam.insert(LocalOperator::new(r, d, &bond * C64::new(-j, 0.0))?)?;
    }
    Ok(fam)
}

/// Quantum Ising model with staggered field: `J S3S3` on bonds and
/// `(-1)^{|x|_1} B S3` on sites. The field is omitted when `B = 0`.
pub fn build_ising_staggered(j: f64, b: f64, spin: SpinRep, window: &Region) -> Result<InteractionFamily> {
    if !j.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter("couplings must be finite".into()));
    }
    let d = spin.dim();
    let bond = ising_bond_matrix(spin) * C64::new(j, 0.0);
    let [_, _, s3] = spin_matrix_triple(spin);
    let mut fam = InteractionFamily::new(d);
    if j != 0.0 {
        for (x, y) in window.bonds() {
            fam.insert(LocalOperator::new(Region::new(vec![x, y]), d, bond.clone())?)?;
        }
    }
    if b != 0.0 {
        for x in window.iter() {
            let origin = Site::origin(x.dim());
            let sign = if x.distance(&origin) % 2 == 0 { 1.0 } else { -1.0 };
            fam.insert(LocalOperator::new(
                Region::single(x.clone()),
                d,
                &s3 * C64::new(sign * b, 0.0),
            )?)?;
        }
    }
    Ok(fam)
}

/// How a motif's norm is known.
#[derive(Clone, Debug, PartialEq)]
pub enum MotifNorm {
    /// Bond operator on the motif region; its norm is computed.
    Operator(CMatrix),
    /// Precomputed norm (also used for classical sup-norms).
    Scalar(f64),
}

/// One translation orbit of terms: `coefficient * op` placed on every
/// translate of `region`.
#[derive(Clone, Debug, PartialEq)]
pub struct Motif {
    pub region: Region,
    pub norm: MotifNorm,
    pub coefficient: f64,
}

/// Translation-invariant interaction on Z^ν given by motifs, one per orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct TIInteractionSpec {
    pub nu: usize,
    pub site_dim: usize,
    /// `‖Ψ_x‖`, the same at every site.
    pub single_site_norm: f64,
    pub motifs: Vec<Motif>,
}

/// Named translation-invariant models used by reports and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heisenberg,
    IsingStaggered,
    ClassicalHeisenberg,
    Custom,
}

impl TIInteractionSpec {
    pub fn new(nu: usize, site_dim: usize, single_site_norm: f64, motifs: Vec<Motif>) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidParameter("lattice dimension must be >= 1".into()));
        }
        if !(single_site_norm.is_finite() && single_site_norm >= 0.0) {
            return Err(Error::InvalidParameter("single-site norm must be finite and >= 0".into()));
        }
        let origin = Site::origin(nu);
        for m in &motifs {
            if !m.region.contains(&origin) {
                return Err(Error::InvalidParameter(format!("motif {} does not contain the origin", m.region)));
            }
            if m.region.iter().any(|s| s.dim() != nu) {
                return Err(Error::InvalidParameter(format!("motif {} has wrong dimension", m.region)));
            }
            if !m.coefficient.is_finite() {
                return Err(Error::InvalidParameter("motif coefficient is not finite".into()));
            }
            match &m.norm {
                MotifNorm::Scalar(v) if !(v.is_finite() && *v >= 0.0) => {
                    return Err(Error::InvalidParameter("motif norm must be finite and >= 0".into()));
                }
                MotifNorm::Operator(op) => {
                    let expected = site_dim.pow(m.region.len() as u32);
                    if op.nrows() != expected || op.ncols() != expected {
                        return Err(Error::ShapeMismatch { rows: op.nrows(), cols: op.ncols(), expected });
                    }
                }
                _ => {}
            }
        }
        Ok(Self { nu, site_dim, single_site_norm, motifs })
    }

    fn unit_bonds(nu: usize) -> Vec<Region> {
        (0..nu)
            .map(|k| {
                let mut e = vec![0; nu];
                e[k] = 1;
                Region::new(vec![Site::origin(nu), Site::new(e)])
            })
            .collect()
    }

    pub fn heisenberg(nu: usize, j: f64, delta: f64, spin: SpinRep) -> Result<Self> {
        let bond = heisenberg_bond_matrix(spin, delta);
        let motifs = Self::unit_bonds(nu)
            .into_iter()
            .map(|region| Motif { region, norm: MotifNorm::Operator(bond.clone()), coefficient: -j })
            .collect();
        Self::new(nu, spin.dim(), 0.0, motifs)
    }

    pub fn ising_staggered(nu: usize, j: f64, b: f64, spin: SpinRep) -> Result<Self> {
        let bond = ising_bond_matrix(spin);
        let motifs = Self::unit_bonds(nu)
            .into_iter()
            .map(|region| Motif { region, norm: MotifNorm::Operator(bond.clone()), coefficient: j })
            .collect();
        Self::new(nu, spin.dim(), b.abs() * spin.j(), motifs)
    }

    /// Classical Heisenberg with bond sup-norm `max(|δ|, 1)` on unit vectors.
    pub fn classical_heisenberg(nu: usize, j: f64, delta: f64) -> Result<Self> {
        let motifs = Self::unit_bonds(nu)
            .into_iter()
            .map(|region| Motif { region, norm: MotifNorm::Scalar(delta.abs().max(1.0)), coefficient: j })
            .collect();
        // site_dim is not meaningful classically; 2 keeps constructors uniform.
        Self::new(nu, 2, 0.0, motifs)
    }

    /// Place every motif translate that fits inside `window`.
    pub fn to_family(&self, window: &Region) -> Result<InteractionFamily> {
        let mut fam = InteractionFamily::new(self.site_dim);
        for m in &self.motifs {
            let MotifNorm::Operator(op) = &m.norm else {
                return Err(Error::InvalidParameter("scalar motifs have no operator to place".into()));
            };
            if m.coefficient == 0.0 {
                continue;
            }
            let scaled = op * C64::new(m.coefficient, 0.0);
            for x in window.iter() {
                let r = m.region.translate(x);
                if r.is_subset(window) {
                    fam.insert(LocalOperator::new(r, self.site_dim, scaled.clone())?)?;
                }
            }
        }
        Ok(fam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_two_sites() {
        let fam = build_heisenberg(|_, _| 1.0, 1.0, SpinRep::half(), &Region::chain(2)).unwrap();
        assert_eq!(fam.len(), 1);
        let op = fam.phibar(&Region::chain(2)).unwrap();
        assert!((op.norm().unwrap() - 0.75).abs() < 1e-12);
        assert!(fam.singletons().next().is_none());
        assert!(fam.psi(&Site::new([0])).is_none());
    }

    #[test]
    fn heisenberg_delta_zero_is_ising_coupling() {
        let fam = build_heisenberg(|_, _| 2.0, 0.0, SpinRep::half(), &Region::chain(2)).unwrap();
        let expect = ising_bond_matrix(SpinRep::half()) * C64::new(-2.0, 0.0);
        assert!((fam.phibar(&Region::chain(2)).unwrap().matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn heisenberg_skips_zero_coupling() {
        let fam = build_heisenberg(|a, _| if a.coords()[0] == 0 { 0.0 } else { 1.0 }, 1.0, SpinRep::half(), &Region::chain(3))
            .unwrap();
        assert_eq!(fam.len(), 1);
    }

    #[test]
    fn staggered_signs() {
        let spin = SpinRep::half();
        let window = Region::boxed(&[(-1, 1)]);
        let fam = build_ising_staggered(1.0, 2.0, spin, &window).unwrap();
        let s3 = &spin_matrix_triple(spin)[2];
        let at = |c: i32| fam.psi(&Site::new([c])).unwrap().matrix().clone();
        assert!((at(0) - s3 * C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((at(1) - s3 * C64::new(-2.0, 0.0)).norm() < 1e-15);
        assert!((at(-1) - s3 * C64::new(-2.0, 0.0)).norm() < 1e-15);
        let no_field = build_ising_staggered(1.0, 0.0, spin, &window).unwrap();
        assert_eq!(no_field.singletons().count(), 0);
    }

    #[test]
    fn staggered_terms_commute() {
        let fam = build_ising_staggered(1.3, 0.7, SpinRep::new(3).unwrap(), &Region::hypercube(2, 0, 1)).unwrap();
        for a in fam.terms().values() {
            for b in fam.terms().values() {
                assert!(a.commutator(b).unwrap().matrix().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn insert_validates() {
        let mut fam = InteractionFamily::new(2);
        let bad = LocalOperator::new(Region::single(Site::new([0])), 2, CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]))
            .unwrap();
        assert!(matches!(fam.insert(bad), Err(Error::NotHermitian(_))));
        let empty = LocalOperator::scalar(C64::new(1.0, 0.0), 2);
        assert_eq!(fam.insert(empty), Err(Error::EmptyRegion));
    }

    #[test]
    fn motifs_must_contain_origin() {
        let m = Motif {
            region: Region::new(vec![Site::new([1]), Site::new([2])]),
            norm: MotifNorm::Scalar(1.0),
            coefficient: 1.0,
        };
        assert!(TIInteractionSpec::new(1, 2, 0.0, vec![m]).is_err());
    }

    #[test]
    fn ti_heisenberg_places_bonds() {
        let spec = TIInteractionSpec::heisenberg(2, 1.0, 0.5, SpinRep::half()).unwrap();
        let w = Region::hypercube(2, 0, 2);
        let a = spec.to_family(&w).unwrap();
        let b = build_heisenberg(|_, _| 1.0, 0.5, SpinRep::half(), &w).unwrap();
        assert_eq!(a.len(), 12);
        for (r, op) in a.terms() {
            assert!((op.matrix() - b.get(r).unwrap().matrix()).norm() < 1e-15);
        }
    }
}
