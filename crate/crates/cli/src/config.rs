//! Model configuration files.

use std::path::Path;

use kmsbounds::lattice::{build_heisenberg, build_ising_staggered, CMatrix, InteractionFamily, LocalOperator, ModelKind, Region, Site, SpinRep, C64};
use kmsbounds::quantum::{FiniteSystem, KS_ORDER_CAP, ORDER_CAP};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `"auto"` or a fixed positive ε.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum EpsSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for EpsSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EpsSetting::Auto => s.serialize_str("auto"),
            EpsSetting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EpsSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(EpsSetting::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(EpsSetting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("eps must be a number or \"auto\", got \"{t}\""))),
        }
    }
}

impl EpsSetting {
    pub fn choice(self) -> kmsbounds::bounds::EpsChoice {
        match self {
            EpsSetting::Auto => kmsbounds::bounds::EpsChoice::Auto,
            EpsSetting::Fixed(v) => kmsbounds::bounds::EpsChoice::Fixed(v),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// ε used in the classical FV comparator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_fv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub dyson_order: usize,
    pub ks_order: usize,
    pub quad_points: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { dyson_order: 3, ks_order: 3, quad_points: 8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormGrid {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub zeta: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    /// Real time for the Dyson suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_elements: Option<usize>,
    /// β for the KS suite; defaults to a tenth of the finite-volume `β_u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_beta: Option<f64>,
}

/// One custom interaction term: sites and a Hermitian matrix of `[re, im]`
/// entries, row-major, legs in lexicographic site order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTerm {
    pub sites: Vec<Vec<i32>>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default = "default_nu")]
    pub nu: usize,
    #[serde(default = "default_two_j")]
    pub two_j: u32,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub eps: EpsSetting,
    /// Inclusive `[lo, hi]` per dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<[i32; 2]>>,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_grid: Option<NormGrid>,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<CustomTerm>,
}

fn default_nu() -> usize {
    1
}

fn default_two_j() -> u32 {
    1
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn finite(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !x.is_finite() => Err(schema(format!("{name} must be finite"))),
        _ => Ok(()),
    }
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=3).contains(&self.nu) {
            return Err(schema(format!("nu must be 1, 2 or 3, got {}", self.nu)));
        }
        if self.two_j == 0 {
            return Err(schema("two_j must be >= 1"));
        }
        finite("params.J", self.params.j)?;
        finite("params.delta", self.params.delta)?;
        finite("params.B", self.params.b)?;
        if let Some(e) = self.params.eps_fv {
            if !(e.is_finite() && e >= 0.0) {
                return Err(schema("params.eps_fv must be finite and >= 0"));
            }
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b >= 0.0) {
                return Err(schema("beta must be finite and >= 0"));
            }
        }
        if let EpsSetting::Fixed(e) = self.eps {
            if !(e.is_finite() && e > 0.0) {
                return Err(schema("eps must be > 0 or \"auto\""));
            }
        }
        if let Some(w) = &self.window {
            if w.len() != self.nu {
                return Err(schema(format!("window has {} extents, expected nu = {}", w.len(), self.nu)));
            }
            if w.iter().any(|[lo, hi]| lo > hi) {
                return Err(schema("window extents must satisfy lo <= hi"));
            }
        }
        let t = &self.truncation;
        if t.dyson_order > ORDER_CAP || t.ks_order == 0 || t.ks_order > KS_ORDER_CAP || !(1..=32).contains(&t.quad_points) {
            return Err(schema(format!(
                "truncation out of range: dyson_order <= {ORDER_CAP}, 1 <= ks_order <= {KS_ORDER_CAP}, 1 <= quad_points <= 32"
            )));
        }
        if let Some(g) = &self.norm_grid {
            if g.eps.is_empty() || g.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || g.zeta.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
                return Err(schema("norm_grid needs eps > 0 (non-empty) and zeta >= 0"));
            }
        }
        if let Some(t) = self.verify.time {
            if !(t.is_finite() && t >= 0.0) {
                return Err(schema("verify.time must be finite and >= 0"));
            }
        }
        if let Some(b) = self.verify.ks_beta {
            if !(b.is_finite() && b >= 0.0) {
                return Err(schema("verify.ks_beta must be finite and >= 0"));
            }
        }
        if !self.terms.is_empty() && self.model != ModelKind::Custom {
            return Err(schema("terms are only allowed for the custom model"));
        }
        for term in &self.terms {
            if term.sites.iter().any(|s| s.len() != self.nu) {
                return Err(schema("every term site needs nu coordinates"));
            }
            if term.matrix.iter().any(|row| row.len() != term.matrix.len()) {
                return Err(schema("term matrices must be square"));
            }
            if term.matrix.iter().flatten().flatten().any(|v| !v.is_finite()) {
                return Err(schema("term matrix entries must be finite"));
            }
        }
        Ok(())
    }

    pub fn spin(&self) -> SpinRep {
        SpinRep::new(self.two_j).expect("validated two_j")
    }

    pub fn j(&self) -> f64 {
        self.params.j.unwrap_or(1.0)
    }

    pub fn delta(&self) -> f64 {
        self.params.delta.unwrap_or(1.0)
    }

    pub fn field(&self) -> f64 {
        self.params.b.unwrap_or(0.0)
    }

    pub fn is_quantum(&self) -> bool {
        self.model != ModelKind::ClassicalHeisenberg
    }

    /// The configured window, or the unit cube `{0,1}^ν`.
    pub fn window(&self) -> Region {
        match &self.window {
            Some(w) => Region::boxed(&w.iter().map(|[a, b]| (*a, *b)).collect::<Vec<_>>()),
            None => Region::hypercube(self.nu, 0, 1),
        }
    }

    pub fn custom_family(&self) -> Result<InteractionFamily, CliError> {
        let d = self.spin().dim();
        let mut fam = InteractionFamily::new(d);
        for term in &self.terms {
            let region = Region::new(term.sites.iter().map(|s| Site::new(s.clone())).collect());
            if region.len() != term.sites.len() {
                return Err(schema("term sites must be distinct"));
            }
            let n = term.matrix.len();
            let m = CMatrix::from_fn(n, n, |i, k| C64::new(term.matrix[i][k][0], term.matrix[i][k][1]));
            fam.insert(LocalOperator::new(region, d, m).map_err(CliError::from)?).map_err(CliError::from)?;
        }
        Ok(fam)
    }

    /// Finite-volume family on the window, for the quantum models.
    pub fn finite_family(&self) -> Result<InteractionFamily, CliError> {
        let w = self.window();
        let spin = self.spin();
        Ok(match self.model {
            ModelKind::Heisenberg => {
                let j = self.j();
                build_heisenberg(move |_, _| j, self.delta(), spin, &w)?
            }
            ModelKind::IsingStaggered => build_ising_staggered(self.j(), self.field(), spin, &w)?,
            ModelKind::Custom => self.custom_family()?,
            ModelKind::ClassicalHeisenberg => return Err(CliError::Unsupported("quantum suites need a quantum model".into())),
        })
    }

    pub fn finite_system(&self, beta: f64) -> Result<FiniteSystem, CliError> {
        let fam = self.finite_family()?;
        let gamma = match (self.model, &self.window) {
            (ModelKind::Custom, None) => fam.support(),
            _ => self.window(),
        };
        if gamma.is_empty() {
            return Err(schema("the system has no sites"));
        }
        Ok(FiniteSystem::new(gamma, fam, self.spin(), beta)?)
    }
}
