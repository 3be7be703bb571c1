//! Classical `(S²)^Λ` spin systems: potentials, sup-norms, quadrature Gibbs
//! states and the single-site rotation identity.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::geometry::{Region, Site};
use crate::par;
use crate::quadrature::gauss_legendre;
use crate::random::{random_rotation, rng_for};

pub type Vec3 = Vector3<f64>;

/// Tolerance for accepting a matrix as an element of SO(3).
pub const ROTATION_TOL: f64 = 1e-10;

/// Largest window for quadrature integrals.
pub const QUADRATURE_SITES: usize = 3;

/// Directions per axis of the coarse sup-norm search.
pub const SUPNORM_GRID: usize = 64;

type Eval = dyn Fn(&[Vec3]) -> f64 + Send + Sync;

/// Real function of the spins on `region`, one unit vector per site in the
/// region's order.
#[derive(Clone)]
pub struct ClassicalPotential {
    region: Region,
    eval: Arc<Eval>,
    supnorm: Option<f64>,
}

/// Observables share the representation.
pub type Observable = ClassicalPotential;

impl fmt::Debug for ClassicalPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalPotential").field("region", &self.region).field("supnorm", &self.supnorm).finish()
    }
}

impl ClassicalPotential {
    pub fn new(region: Region, eval: impl Fn(&[Vec3]) -> f64 + Send + Sync + 'static) -> Self {
        Self { region, eval: Arc::new(eval), supnorm: None }
    }

    pub fn with_supnorm(mut self, value: f64) -> Self {
        self.supnorm = Some(value);
        self
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn closed_form_supnorm(&self) -> Option<f64> {
        self.supnorm
    }

    pub fn eval(&self, spins: &[Vec3]) -> f64 {
        (self.eval)(spins)
    }

    pub fn constant(region: Region, value: f64) -> Self {
        Self::new(region, move |_| value).with_supnorm(value.abs())
    }

    pub fn zero(region: Region) -> Self {
        Self::constant(region, 0.0)
    }

    /// `-J (δ(s¹s'¹ + s²s'²) + s³s'³)`.
    pub fn heisenberg_bond(a: Site, b: Site, j: f64, delta: f64) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidParameter("bond endpoints must differ".into()));
        }
        let r = Region::new(vec![a, b]);
        Ok(Self::new(r, move |s| -j * (delta * (s[0].x * s[1].x + s[0].y * s[1].y) + s[0].z * s[1].z))
            .with_supnorm(j.abs() * delta.abs().max(1.0)))
    }

    /// `b s³` at one site.
    pub fn field(x: Site, b: f64) -> Self {
        Self::new(Region::single(x), move |s| b * s[0].z).with_supnorm(b.abs())
    }

    /// `s^k` at one site, `k` in `0..3`.
    pub fn component(x: Site, k: usize) -> Self {
        Self::new(Region::single(x), move |s| s[0][k]).with_supnorm(1.0)
    }

    /// `σ ↦ φ(σ with σ(x) replaced by R^{-1} σ(x))`.
    pub fn rotated(&self, x: &Site, r: &Matrix3<f64>) -> Self {
        let Some(pos) = self.region.position(x) else {
            return self.clone();
        };
        let inv = r.transpose();
        let f = self.eval.clone();
        Self {
            region: self.region.clone(),
            eval: Arc::new(move |s: &[Vec3]| {
                let mut t = s.to_vec();
                t[pos] = inv * s[pos];
                f(&t)
            }),
            supnorm: self.supnorm,
        }
    }
}

/// Unit vector from `(cos θ, φ)`.
pub fn direction(u: f64, phi: f64) -> Vec3 {
    let u = u.clamp(-1.0, 1.0);
    let r = (1.0 - u * u).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), u)
}

/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`, normalized to
/// total mass one.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    q: usize,
    nodes: Vec<(Vec3, f64)>,
}

impl SphereGrid {
    pub const DEFAULT_ORDER: usize = 16;

    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("sphere grid order must be >= 1".into()));
        }
        let (us, ws) = gauss_legendre(q);
        let m = 2 * q;
        let mut nodes = Vec::with_capacity(q * m);
        for (u, w) in us.iter().zip(&ws) {
            for k in 0..m {
                let phi = 2.0 * PI * k as f64 / m as f64;
                nodes.push((direction(*u, phi), w / 2.0 / m as f64));
            }
        }
        Ok(Self { q, nodes })
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn nodes(&self) -> &[(Vec3, f64)] {
        &self.nodes
    }

    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.nodes.iter().map(|(v, w)| w * f(v)).sum()
    }
}

impl Default for SphereGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ORDER).expect("positive order")
    }
}

fn search_point(params: &[f64]) -> Vec<Vec3> {
    params.chunks(2).map(|p| direction(p[0], p[1])).collect()
}

/// `sup |φ|`: coarse search over `64²` directions per site, then three rounds
/// of local refinement with halving step. Regions of more than two sites
/// need a closed form.
pub fn classical_supnorm(phi: &ClassicalPotential) -> Result<f64> {
    let n = phi.region().len();
    if n == 0 {
        return Ok(phi.eval(&[]).abs());
    }
    if n > 2 {
        return phi.closed_form_supnorm().ok_or(Error::RegionTooLarge { size: n, what: "sup-norm grid search" });
    }
    let g = SUPNORM_GRID;
    let axis = |k: usize| (-1.0 + 2.0 * k as f64 / (g - 1) as f64, 2.0 * PI * k as f64 / g as f64);
    let per_site = g * g;
    let dirs: Vec<Vec3> = (0..per_site).map(|d| direction(axis(d / g).0, axis(d % g).1)).collect();
    let inner = if n == 2 { per_site } else { 1 };
    let best = par::map_range(per_site, |outer| {
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut spins = [dirs[outer], dirs[0]];
        for (k, d) in dirs.iter().enumerate().take(inner) {
            spins[1] = *d;
            let v = phi.eval(&spins[..n]).abs();
            if v > best.0 {
                best = (v, outer * inner + k);
            }
        }
        best
    })
    .into_iter()
    .fold((f64::NEG_INFINITY, 0usize), |a, b| if b.0 > a.0 { b } else { a });
    let mut x = index_params(best.1, n, per_site, g, &axis);
    let mut val = best.0;
    let mut h = [2.0 / (g - 1) as f64, 2.0 * PI / g as f64];
    let dims = 2 * n;
    for _ in 0..3 {
        loop {
            let mut improved = false;
            for off in 0..5usize.pow(dims as u32) {
                let mut y = x.clone();
                let mut o = off;
                for (d, yd) in y.iter_mut().enumerate() {
                    *yd += (o % 5) as f64 * h[d % 2] / 2.0 - h[d % 2];
                    o /= 5;
                }
                let v = phi.eval(&search_point(&y)).abs();
                if v > val {
                    val = v;
                    x = y;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        h = [h[0] / 2.0, h[1] / 2.0];
    }
    Ok(val)
}

fn index_params(idx: usize, n: usize, per_site: usize, g: usize, axis: &impl Fn(usize) -> (f64, f64)) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n);
    let mut rest = idx;
    let mut digits = vec![0; n];
    for d in digits.iter_mut().rev() {
        *d = rest % per_site;
        rest /= per_site;
    }
    for d in digits {
        out.push(axis(d / g).0);
        out.push(axis(d % g).1);
    }
    out
}

struct WindowIntegrator<'a> {
    window: &'a Region,
    grid: &'a SphereGrid,
}

impl WindowIntegrator<'_> {
    fn positions(&self, f: &ClassicalPotential) -> Result<Vec<usize>> {
        f.region()
            .iter()
            .map(|s| {
                self.window
                    .position(s)
                    .ok_or_else(|| Error::NotSubset { inner: f.region().to_string(), outer: self.window.to_string() })
            })
            .collect()
    }

    /// Weighted sums `Σ w e^{-βH - m} g_k` for each integrand `g_k`, with
    /// a shift `m` chosen per outer node and reconciled afterwards.
    fn sums(&self, energy: impl Fn(&[Vec3]) -> f64 + Sync, integrands: &[&(dyn Fn(&[Vec3]) -> f64 + Sync)]) -> Vec<f64> {
        let nodes = self.grid.nodes();
        let m = self.window.len();
        let per = nodes.len();
        let inner = per.pow(m.saturating_sub(1) as u32);
        let chunks = par::map_range(per, |first| {
            let mut spins = vec![Vec3::zeros(); m];
            let mut vals = Vec::with_capacity(inner);
            for k in 0..inner {
                let mut w = nodes[first].1;
                if m > 0 {
                    spins[0] = nodes[first].0;
                }
                let mut rest = k;
                for slot in (1..m).rev() {
                    let (v, wv) = nodes[rest % per];
                    spins[slot] = v;
                    w *= wv;
                    rest /= per;
                }
                let e = energy(&spins);
                let g: Vec<f64> = integrands.iter().map(|f| f(&spins)).collect();
                vals.push((w, e, g));
            }
            let shift = vals.iter().map(|v| -v.1).fold(f64::NEG_INFINITY, f64::max);
            let mut acc = vec![0.0; integrands.len() + 1];
            for (w, e, g) in vals {
                let b = w * (-e - shift).exp();
                acc[0] += b;
                for (a, gv) in acc[1..].iter_mut().zip(g) {
                    *a += b * gv;
                }
            }
            (shift, acc)
        });
        let top = chunks.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; integrands.len() + 1];
        for (shift, acc) in chunks {
            let scale = (shift - top).exp();
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a * scale;
            }
        }
        out
    }
}

fn gather(pos: &[usize], spins: &[Vec3], buf: &mut Vec<Vec3>) {
    buf.clear();
    buf.extend(pos.iter().map(|&p| spins[p]));
}

fn check_window(window: &Region) -> Result<()> {
    if window.len() > QUADRATURE_SITES {
        return Err(Error::RegionTooLarge { size: window.len(), what: "sphere quadrature" });
    }
    Ok(())
}

/// `∫ e^{-βH} f dμ / ∫ e^{-βH} dμ` over the window, with `H` the sum of the
/// given potentials.
pub fn classical_gibbs_expectation(window: &Region, potentials: &[ClassicalPotential], beta: f64, f: &Observable, grid: &SphereGrid) -> Result<f64> {
    check_window(window)?;
    let integ = WindowIntegrator { window, grid };
    let pots: Vec<(Vec<usize>, &ClassicalPotential)> = potentials.iter().map(|p| Ok((integ.positions(p)?, p))).collect::<Result<_>>()?;
    let fpos = integ.positions(f)?;
    let energy = |s: &[Vec3]| {
        let mut buf = Vec::with_capacity(4);
        pots.iter().map(|(pos, p)| {
            gather(pos, s, &mut buf);
            p.eval(&buf)
        }).sum::<f64>() * beta
    };
    let obs = |s: &[Vec3]| {
        let mut buf = Vec::with_capacity(4);
        gather(&fpos, s, &mut buf);
        f.eval(&buf)
    };
    let sums = integ.sums(energy, &[&obs]);
    Ok(sums[1] / sums[0])
}

/// Orthogonality defect `max |RᵀR − I|` and determinant.
pub fn rotation_defect(r: &Matrix3<f64>) -> (f64, f64) {
    let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
    (orth, r.determinant())
}

pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let (orth, det) = rotation_defect(r);
    if !(orth <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL) {
        return Err(Error::NotRotation { orth, det });
    }
    Ok(())
}

/// `|ω(a) − ω(e^{β Σ_{X∋x}(φ_X − ρ̂φ_X)} ρ̂a)|` under the finite-volume Gibbs
/// state, `ρ̂` rotating the spin at `x` by `R`.
pub fn invariance_residual(window: &Region, potentials: &[ClassicalPotential], beta: f64, a: &Observable, x: &Site, r: &Matrix3<f64>, grid: &SphereGrid) -> Result<f64> {
    check_rotation(r)?;
    check_window(window)?;
    if !window.contains(x) {
        return Err(Error::NotSubset { inner: x.to_string(), outer: window.to_string() });
    }
    let integ = WindowIntegrator { window, grid };
    let pots: Vec<(Vec<usize>, &ClassicalPotential)> = potentials.iter().map(|p| Ok((integ.positions(p)?, p))).collect::<Result<_>>()?;
    let at_x: Vec<(Vec<usize>, ClassicalPotential, ClassicalPotential)> = potentials
        .iter()
        .filter(|p| p.region().contains(x))
        .map(|p| Ok((integ.positions(p)?, p.clone(), p.rotated(x, r))))
        .collect::<Result<_>>()?;
    let apos = integ.positions(a)?;
    let ra = a.rotated(x, r);
    let energy = |s: &[Vec3]| {
        let mut buf = Vec::with_capacity(4);
        pots.iter().map(|(pos, p)| {
            gather(pos, s, &mut buf);
            p.eval(&buf)
        }).sum::<f64>() * beta
    };
    let lhs = |s: &[Vec3]| {
        let mut buf = Vec::with_capacity(4);
        gather(&apos, s, &mut buf);
        a.eval(&buf)
    };
    let rhs = |s: &[Vec3]| {
        let mut buf = Vec::with_capacity(4);
        let mut diff = 0.0;
        for (pos, p, rp) in &at_x {
            gather(pos, s, &mut buf);
            diff += p.eval(&buf) - rp.eval(&buf);
        }
        gather(&apos, s, &mut buf);
        (beta * diff).exp() * ra.eval(&buf)
    };
    let sums = integ.sums(energy, &[&lhs, &rhs]);
    Ok(((sums[1] - sums[2]) / sums[0]).abs())
}

/// Configurations sampled per rotation in the kernel check.
pub const KERNEL_CONFIGS: usize = 2048;

/// Largest value of `|Π_ℓ (φ_ℓ − ρ̂φ_ℓ)| e^{-βρ̂ψ_x} / e^{β‖ψ_x‖}` over random
/// rotations and configurations, against `2^n Π_ℓ ‖φ_ℓ‖`.
pub fn classical_kernel_bound_check(x: &Site, bonds: &[ClassicalPotential], psi: Option<&ClassicalPotential>, beta: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let n = bonds.len();
    if n > 3 {
        return Err(Error::OrderCap { order: n, cap: 3 });
    }
    let mut region = Region::single(x.clone());
    for b in bonds {
        region = region.union(b.region());
    }
    if let Some(p) = psi {
        if p.region() != &Region::single(x.clone()) {
            return Err(Error::InvalidParameter("single-site potential must live at x".into()));
        }
    }
    let norms: Vec<f64> = bonds.iter().map(classical_supnorm).collect::<Result<_>>()?;
    let rhs = 2f64.powi(n as i32) * norms.iter().product::<f64>();
    let psi_norm = match psi {
        Some(p) => classical_supnorm(p)?,
        None => 0.0,
    };
    let pos: Vec<Vec<usize>> = bonds.iter().map(|b| b.region().iter().map(|s| region.position(s).expect("in union")).collect()).collect();
    let worst = par::map_range(samples, |i| {
        let mut rng = rng_for(seed, i as u64);
        let r = random_rotation(&mut rng);
        let rotated: Vec<ClassicalPotential> = bonds.iter().map(|b| b.rotated(x, &r)).collect();
        let rpsi = psi.map(|p| p.rotated(x, &r));
        let mut buf = Vec::with_capacity(4);
        let mut best = 0.0f64;
        for _ in 0..KERNEL_CONFIGS {
            let spins: Vec<Vec3> = (0..region.len()).map(|_| direction(rng.random_range(-1.0..=1.0), rng.random_range(0.0..2.0 * PI))).collect();
            let mut v = 1.0;
            for ((b, rb), p) in bonds.iter().zip(&rotated).zip(&pos) {
                gather(p, &spins, &mut buf);
                v *= b.eval(&buf) - rb.eval(&buf);
            }
            if let Some(rp) = &rpsi {
                v *= (-beta * rp.eval(&[spins[0]]) - beta * psi_norm).exp();
            }
            best = best.max(v.abs());
        }
        best
    });
    Ok((worst.into_iter().fold(0.0, f64::max), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rotation_z;
    use proptest::prelude::*;

    fn s(i: i32) -> Site {
        Site::new([i])
    }

    #[test]
    fn sphere_grid_moments() {
        let g = SphereGrid::default();
        assert!(g.nodes().iter().all(|(_, w)| *w > 0.0));
        assert!((g.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!(g.integrate(|v| v.z).abs() < 1e-12);
        assert!((g.integrate(|v| v.z * v.z) - 1.0 / 3.0).abs() < 1e-10);
        // Y_2^0 ∝ 3z² − 1
        assert!(g.integrate(|v| 3.0 * v.z * v.z - 1.0).abs() < 1e-12);
        assert!(g.integrate(|v| v.x * v.y).abs() < 1e-12);
    }

    #[test]
    fn supnorm_examples() {
        assert!((classical_supnorm(&ClassicalPotential::component(s(0), 2)).unwrap() - 1.0).abs() < 1e-12);
        let b = ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, 2.0).unwrap();
        assert!((classical_supnorm(&b).unwrap() - 2.0).abs() < 1e-4);
        let b = ClassicalPotential::heisenberg_bond(s(0), s(1), 3.0, 0.5).unwrap();
        assert!((classical_supnorm(&b).unwrap() - dense_oracle(&b)).abs() < 1e-4);
        let three = ClassicalPotential::new(Region::chain(3), |_| 1.0);
        assert!(matches!(classical_supnorm(&three), Err(Error::RegionTooLarge { .. })));
    }

    /// Dense 256² product grid over the first spin with the second spin
    /// set to the best of a few aligned candidates.
    fn dense_oracle(b: &ClassicalPotential) -> f64 {
        let g = 256;
        let mut best = 0.0f64;
        for i in 0..g {
            for k in 0..g {
                let u = -1.0 + 2.0 * i as f64 / (g - 1) as f64;
                let v = direction(u, 2.0 * PI * k as f64 / g as f64);
                for w in [v, -v, Vec3::new(v.x, v.y, -v.z), Vec3::new(-v.x, -v.y, v.z)] {
                    best = best.max(b.eval(&[v, w]).abs());
                }
            }
        }
        best
    }

    #[test]
    fn gibbs_examples() {
        let g = SphereGrid::default();
        let w = Region::chain(2);
        let bond = ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, 0.7).unwrap();
        let one = ClassicalPotential::constant(w.clone(), 1.0);
        assert!((classical_gibbs_expectation(&w, std::slice::from_ref(&bond), 0.8, &one, &g).unwrap() - 1.0).abs() < 1e-14);
        let w1 = Region::single(s(0));
        let z = ClassicalPotential::component(s(0), 2);
        let got = classical_gibbs_expectation(&w1, std::slice::from_ref(&z), 1.0, &z, &g).unwrap();
        let langevin = 1.0 / 1f64.tanh() - 1.0;
        assert!((got + langevin).abs() < 1e-10);
        let zz = ClassicalPotential::new(Region::chain(2), |s| s[0].z * s[1].z + s[0].x);
        let hot = classical_gibbs_expectation(&w, std::slice::from_ref(&bond), 0.0, &zz, &g).unwrap();
        assert!(hot.abs() < 1e-13);
    }

    #[test]
    fn gibbs_order_doubling() {
        let w = Region::chain(2);
        let pots = vec![ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, 1.3).unwrap(), ClassicalPotential::field(s(0), 0.4)];
        let f = ClassicalPotential::new(w.clone(), |s| s[0].dot(&s[1]));
        let a = classical_gibbs_expectation(&w, &pots, 1.0, &f, &SphereGrid::new(8).unwrap()).unwrap();
        let b = classical_gibbs_expectation(&w, &pots, 1.0, &f, &SphereGrid::new(16).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-6 * b.abs().max(1e-3));
        assert!(classical_gibbs_expectation(&Region::chain(4), &[], 1.0, &f, &SphereGrid::new(2).unwrap()).is_err());
    }

    #[test]
    fn invariance_examples() {
        let g = SphereGrid::default();
        let w = Region::chain(2);
        let bond = ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, 0.6).unwrap();
        let a = ClassicalPotential::new(w.clone(), |s| s[0].x * s[1].z + s[0].y);
        let id = Matrix3::identity();
        assert_eq!(invariance_residual(&w, std::slice::from_ref(&bond), 0.5, &a, &s(0), &id, &g).unwrap(), 0.0);
        let r = rotation_z(1.234);
        assert!(invariance_residual(&w, std::slice::from_ref(&bond), 0.5, &a, &s(0), &r, &g).unwrap() < 1e-6);
        let zero = ClassicalPotential::zero(w.clone());
        let r = random_rotation(&mut rng_for(3, 0));
        assert!(invariance_residual(&w, &[zero], 0.5, &a, &s(1), &r, &g).unwrap() < 1e-10);
        let bad = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(invariance_residual(&w, &[bond], 0.5, &a, &s(0), &bad, &g), Err(Error::NotRotation { .. })));
    }

    #[test]
    fn kernel_bound_examples() {
        let b = ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, 1.0).unwrap();
        let (l, r) = classical_kernel_bound_check(&s(0), std::slice::from_ref(&b), None, 1.0, 10, 1).unwrap();
        assert!(l <= r && (r - 2.0).abs() < 1e-4);
        let b2 = ClassicalPotential::heisenberg_bond(s(-1), s(0), 0.7, 1.5).unwrap();
        let psi = ClassicalPotential::field(s(0), 0.8);
        let (l, r) = classical_kernel_bound_check(&s(0), &[b, b2], Some(&psi), 0.6, 100, 2).unwrap();
        assert!(l > 0.0 && l <= r);
        let z = ClassicalPotential::zero(Region::chain(2));
        assert_eq!(classical_kernel_bound_check(&s(0), &[z], None, 1.0, 5, 3).unwrap(), (0.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn invariance_random(seed in 0u64..1_000_000, beta in 0.0f64..1.0, delta in -2.0f64..2.0) {
            let mut rng = rng_for(seed, 0);
            let r = random_rotation(&mut rng);
            let c: [f64; 3] = std::array::from_fn(|_| rand::Rng::random(&mut rng));
            let w = Region::chain(2);
            let pots = vec![ClassicalPotential::heisenberg_bond(s(0), s(1), 1.0, delta).unwrap(), ClassicalPotential::field(s(0), 0.5)];
            let a = ClassicalPotential::new(w.clone(), move |s| c[0] * s[0].x + c[1] * s[0].y * s[1].z + c[2] * s[1].x);
            let res = invariance_residual(&w, &pots, beta, &a, &s(0), &r, &SphereGrid::default()).unwrap();
            prop_assert!(res < 1e-6, "{}", res);
        }

        #[test]
        fn heisenberg_supnorm_closed_form(j in 0.2f64..3.0, delta in -3.0f64..3.0) {
            let b = ClassicalPotential::heisenberg_bond(s(0), s(1), j, delta).unwrap();
            let got = classical_supnorm(&b).unwrap();
            prop_assert!((got - j * delta.abs().max(1.0)).abs() < 1e-4);
        }
    }
}
