use kmsbounds::bounds::{
    beta_u_general, classical_report, fv_beta, heisenberg_report, ising_report, optimal_beta, optimize_eps, ours_objective, BoundReport, InvTemp, LN_3,
};
use kmsbounds::lattice::{ModelKind, Region, TIInteractionSpec};
use kmsbounds::norms::{NormSource, TermTable, TiTable};
use kmsbounds::suites::{
    classical_invariance_suite, decompose_suite, dyson_suite, kms_suite, ks_suite, lemma1_suite, random_decompose_case, Suite, SuiteReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{EpsSetting, ModelConfig};
use crate::output::{fmt_f64, Table, Tabular};
use crate::CliError;

/// The interaction norm of the configured model, either translation
/// invariant (closed form) or a finite custom family.
enum Source {
    Ti(TiTable, f64),
    Finite(TermTable, f64),
}

impl Source {
    fn of(cfg: &ModelConfig) -> Result<Self, CliError> {
        let (nu, spin, j) = (cfg.nu, cfg.spin(), cfg.j());
        let spec = match cfg.model {
            ModelKind::Heisenberg => TIInteractionSpec::heisenberg(nu, j, cfg.delta(), spin)?,
            ModelKind::IsingStaggered => TIInteractionSpec::ising_staggered(nu, j, cfg.field(), spin)?,
            ModelKind::ClassicalHeisenberg => TIInteractionSpec::classical_heisenberg(nu, j, cfg.delta())?,
            ModelKind::Custom => {
                let fam = cfg.custom_family()?;
                let psi = fam.singletons().map(|(_, op)| op.norm()).collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
                return Ok(Source::Finite(TermTable::new(&fam)?, psi));
            }
        };
        let psi = spec.single_site_norm;
        Ok(Source::Ti(TiTable::new(&spec)?, psi))
    }

    fn norms(&self) -> &dyn NormSource {
        match self {
            Source::Ti(t, _) => t,
            Source::Finite(t, _) => t,
        }
    }

    fn psi_sup(&self) -> f64 {
        match self {
            Source::Ti(_, p) | Source::Finite(_, p) => *p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub eps: f64,
    pub zeta: f64,
    /// `‖Φ̄‖_{ε,0}`.
    pub norm_eps: f64,
    pub norm_eps_zeta: f64,
    /// `‖Φ̄‖_{ε+log 3,ζ}`, the norm entering `β_u`.
    pub norm_shifted: f64,
    /// `sup_x ‖Ψ_x‖`.
    pub psi_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormsOutput {
    pub model_id: String,
    pub rows: Vec<NormRow>,
}

impl Tabular for NormsOutput {
    fn title(&self) -> String {
        format!("interaction norms: {}", self.model_id)
    }

    fn table(&self) -> Table {
        Table {
            header: vec!["eps", "zeta", "norm_eps", "norm_eps_zeta", "norm_shifted", "psi_sup"],
            rows: self
                .rows
                .iter()
                .map(|r| [r.eps, r.zeta, r.norm_eps, r.norm_eps_zeta, r.norm_shifted, r.psi_sup].iter().map(|v| fmt_f64(*v)).collect())
                .collect(),
        }
    }
}

fn model_id(cfg: &ModelConfig) -> String {
    let name = serde_json::to_value(cfg.model).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    let mut id = format!("{name}_nu={}", cfg.nu);
    if cfg.is_quantum() {
        id.push_str(&format!("_two_j={}", cfg.two_j));
    }
    match cfg.model {
        ModelKind::Heisenberg | ModelKind::ClassicalHeisenberg => id.push_str(&format!("_J={}_delta={}", cfg.j(), cfg.delta())),
        ModelKind::IsingStaggered => id.push_str(&format!("_J={}_B={}", cfg.j(), cfg.field())),
        ModelKind::Custom => id.push_str(&format!("_terms={}", cfg.terms.len())),
    }
    id
}

pub fn norms(cfg: &ModelConfig) -> Result<NormsOutput, CliError> {
    let src = Source::of(cfg)?;
    let (eps_list, zeta_list) = match &cfg.norm_grid {
        Some(g) => (g.eps.clone(), if g.zeta.is_empty() { vec![0.0] } else { g.zeta.clone() }),
        None => {
            let eps = match cfg.eps {
                EpsSetting::Fixed(e) => e,
                EpsSetting::Auto => optimize_eps(ours_objective).eps_star,
            };
            let mut zeta = vec![0.0];
            if let Some(b) = cfg.beta.filter(|b| *b > 0.0) {
                zeta.push(2.0 * b);
            }
            (vec![eps], zeta)
        }
    };
    let n = src.norms();
    let mut rows = Vec::new();
    for &eps in &eps_list {
        for &zeta in &zeta_list {
            rows.push(NormRow {
                eps,
                zeta,
                norm_eps: n.weighted_norm(eps, 0.0),
                norm_eps_zeta: n.weighted_norm(eps, zeta),
                norm_shifted: n.weighted_norm(eps + LN_3, zeta),
                psi_sup: src.psi_sup(),
            });
        }
    }
    Ok(NormsOutput { model_id: model_id(cfg), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub eps: f64,
    pub beta: InvTemp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaUOutput {
    #[serde(flatten)]
    pub report: BoundReport,
    /// The ε-dependent bound that is maximized, on a coarse grid.
    pub eps_trace: Vec<TracePoint>,
}

impl Tabular for BoundReport {
    fn title(&self) -> String {
        format!("{}  eps*={}  beta_u={}", self.model_id, fmt_f64(self.eps_star), self.beta_u)
    }

    fn table(&self) -> Table {
        let mut rows = vec![vec!["beta_u".to_string(), fmt_f64(self.eps_star), self.beta_u.to_string(), String::new()]];
        for (name, c) in &self.comparators {
            rows.push(vec![
                name.clone(),
                c.eps_star.map(fmt_f64).unwrap_or_default(),
                c.beta.to_string(),
                self.ratios.get(name).map(|r| fmt_f64(*r)).unwrap_or_default(),
            ]);
        }
        Table { header: vec!["name", "eps_star", "beta", "ratio_to_beta_u"], rows }
    }

    fn extra(&self) -> Vec<(String, Table)> {
        if self.checks.is_empty() {
            return Vec::new();
        }
        let rows = self.checks.iter().map(|c| vec![c.name.clone(), fmt_f64(c.value), fmt_f64(c.bound), c.passed.to_string()]).collect();
        vec![("checks".into(), Table { header: vec!["check", "value", "bound", "passed"], rows })]
    }
}

impl Tabular for BetaUOutput {
    fn title(&self) -> String {
        self.report.title()
    }

    fn table(&self) -> Table {
        self.report.table()
    }

    fn extra(&self) -> Vec<(String, Table)> {
        let mut out = self.report.extra();
        let rows = self.eps_trace.iter().map(|p| vec![fmt_f64(p.eps), p.beta.to_string()]).collect();
        out.push(("eps trace".into(), Table { header: vec!["eps", "beta"], rows }));
        out
    }
}

pub fn bound_report(cfg: &ModelConfig) -> Result<BoundReport, CliError> {
    let choice = cfg.eps.choice();
    let (nu, spin, j) = (cfg.nu, cfg.spin(), cfg.j());
    Ok(match cfg.model {
        ModelKind::Heisenberg => heisenberg_report(nu, spin, j, cfg.delta(), choice)?,
        ModelKind::IsingStaggered => ising_report(nu, spin, j, cfg.field(), choice)?,
        ModelKind::ClassicalHeisenberg => classical_report(nu, j, cfg.delta(), choice, cfg.params.eps_fv.unwrap_or(0.0))?,
        ModelKind::Custom => {
            let table = TermTable::new(&cfg.custom_family()?)?;
            let (eps, beta) = optimal_beta(choice, |e| beta_u_general(&table, e))?;
            BoundReport::new(model_id(cfg), eps, beta)
        }
    })
}

fn eps_trace(cfg: &ModelConfig) -> Result<Vec<TracePoint>, CliError> {
    let src = Source::of(cfg)?;
    (1..=20)
        .map(|k| {
            let eps = k as f64 / 10.0;
            let beta = match cfg.model {
                ModelKind::IsingStaggered if cfg.j() == 0.0 => InvTemp::Infinite,
                ModelKind::IsingStaggered => InvTemp::Finite(ours_objective(eps) / (36.0 * cfg.nu as f64 * cfg.j().abs())),
                _ => beta_u_general(src.norms(), eps)?,
            };
            Ok(TracePoint { eps, beta })
        })
        .collect()
}

pub fn beta_u(cfg: &ModelConfig) -> Result<BetaUOutput, CliError> {
    Ok(BetaUOutput { report: bound_report(cfg)?, eps_trace: eps_trace(cfg)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: String,
    pub quantity: String,
    pub value: f64,
    pub quoted: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

impl Tabular for ReferenceTable {
    fn title(&self) -> String {
        "reference comparison table".into()
    }

    fn table(&self) -> Table {
        Table {
            header: vec!["model", "quantity", "value", "quoted", "tolerance", "agrees"],
            rows: self
                .rows
                .iter()
                .map(|r| vec![r.model.clone(), r.quantity.clone(), fmt_f64(r.value), fmt_f64(r.quoted), fmt_f64(r.tolerance), r.agrees.to_string()])
                .collect(),
        }
    }
}

fn row(model: &str, quantity: &str, value: f64, quoted: f64, tolerance: f64) -> ReferenceRow {
    ReferenceRow { model: model.into(), quantity: quantity.into(), value, quoted, tolerance, agrees: (value - quoted).abs() <= tolerance }
}

/// The j = 1/2, ν = 1 comparison numbers and the classical FV supremum.
pub fn reference_table() -> Result<ReferenceTable, CliError> {
    use kmsbounds::bounds::EpsChoice::Auto;
    use kmsbounds::lattice::SpinRep;
    let opt = optimize_eps(ours_objective);
    let h = heisenberg_report(1, SpinRep::half(), 1.0, 1.0, Auto)?;
    let i = ising_report(1, SpinRep::half(), 1.0, 0.0, Auto)?;
    let fv = fv_beta(1, 1.0, 1.0, 0.0)?;
    let eps_of = |r: &BoundReport, k: &str| r.comparators[k].eps_star.unwrap_or(f64::NAN);
    Ok(ReferenceTable {
        rows: vec![
            row("all", "eps_bar", opt.eps_star, 0.607, 0.002),
            row("all", "objective_peak", opt.value, 0.117, 0.001),
            row("heisenberg_j=1/2", "eps_bar_comparator", eps_of(&h, "bratteli_robinson_645"), 0.518, 0.002),
            row("heisenberg_j=1/2", "comparator_over_beta_u", h.ratios["bratteli_robinson_645"], 0.412, 0.005),
            row("ising_staggered_j=1/2", "eps_bar_comparator", eps_of(&i, "bratteli_robinson_646"), 0.505, 0.002),
            row("ising_staggered_j=1/2", "comparator_over_beta_u", i.ratios["bratteli_robinson_646"], 0.027, 0.003),
            row("classical_heisenberg", "fv_ratio_supremum", fv.ratio_sup, 0.022, 0.001),
        ],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CompareOutput {
    Report(BoundReport),
    Reference(ReferenceTable),
}

impl Tabular for CompareOutput {
    fn title(&self) -> String {
        match self {
            CompareOutput::Report(r) => r.title(),
            CompareOutput::Reference(t) => t.title(),
        }
    }

    fn table(&self) -> Table {
        match self {
            CompareOutput::Report(r) => r.table(),
            CompareOutput::Reference(t) => t.table(),
        }
    }

    fn extra(&self) -> Vec<(String, Table)> {
        match self {
            CompareOutput::Report(r) => r.extra(),
            CompareOutput::Reference(_) => Vec::new(),
        }
    }
}

fn require_named_model(cfg: &ModelConfig) -> Result<(), CliError> {
    if cfg.model == ModelKind::Custom {
        return Err(CliError::Unsupported("compare needs heisenberg, ising_staggered or classical_heisenberg".into()));
    }
    Ok(())
}

pub fn compare(cfg: &ModelConfig, paper_table: bool) -> Result<CompareOutput, CliError> {
    require_named_model(cfg)?;
    if paper_table {
        return Ok(CompareOutput::Reference(reference_table()?));
    }
    Ok(CompareOutput::Report(bound_report(cfg)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SuiteArg {
    Decompose,
    Kms,
    Dyson,
    Ks,
    Lemma1,
    ClassicalInvariance,
    All,
}

impl SuiteArg {
    fn suites(self, cfg: &ModelConfig) -> Result<Vec<Suite>, CliError> {
        let quantum_only = [Suite::Kms, Suite::Dyson, Suite::Ks];
        let one = match self {
            SuiteArg::Decompose => Suite::Decompose,
            SuiteArg::Kms => Suite::Kms,
            SuiteArg::Dyson => Suite::Dyson,
            SuiteArg::Ks => Suite::Ks,
            SuiteArg::Lemma1 => Suite::Lemma1,
            SuiteArg::ClassicalInvariance => Suite::ClassicalInvariance,
            SuiteArg::All => {
                return Ok(Suite::ALL.into_iter().filter(|s| cfg.is_quantum() || !quantum_only.contains(s)).collect());
            }
        };
        if !cfg.is_quantum() && quantum_only.contains(&one) {
            return Err(CliError::Unsupported(format!("suite {} needs a quantum model", one.name())));
        }
        Ok(vec![one])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl Tabular for VerifyOutput {
    fn title(&self) -> String {
        format!("verification (seed {}): {}", self.seed, if self.passed { "PASS" } else { "FAIL" })
    }

    fn table(&self) -> Table {
        let mut rows = Vec::new();
        for s in &self.suites {
            for c in &s.checks {
                rows.push(vec![s.suite.name().to_string(), c.name.clone(), fmt_f64(c.value), fmt_f64(c.bound), c.passed.to_string()]);
            }
        }
        Table { header: vec!["suite", "check", "value", "bound", "passed"], rows }
    }
}

fn run_suite(cfg: &ModelConfig, suite: Suite, seed: u64) -> Result<SuiteReport, CliError> {
    let v = &cfg.verify;
    let t = &cfg.truncation;
    let spin = cfg.spin();
    Ok(match suite {
        Suite::Decompose => {
            let lambda = cfg.window();
            let beta = cfg.beta.unwrap_or(1.0);
            let cases = (0..v.draws.unwrap_or(100))
                .map(|i| random_decompose_case(lambda.clone(), spin, beta, seed, 500 + i as u64))
                .collect::<Result<Vec<_>, _>>()?;
            decompose_suite(&cases, seed)?
        }
        Suite::Kms => kms_suite(&[cfg.finite_system(cfg.beta.unwrap_or(1.0))?], v.draws.unwrap_or(50), seed)?,
        Suite::Dyson => dyson_suite(&cfg.finite_system(cfg.beta.unwrap_or(1.0))?, v.time.unwrap_or(0.1), t.dyson_order, t.quad_points, seed)?,
        Suite::Ks => {
            let base = cfg.finite_system(0.0)?;
            let beta = match v.ks_beta {
                Some(b) => b,
                None => {
                    let table = TermTable::new(base.family())?;
                    let (_, b) = optimal_beta(kmsbounds::bounds::EpsChoice::Auto, |e| beta_u_general(&table, e))?;
                    b.finite().map(|b| b / 10.0).unwrap_or(1.0)
                }
            };
            let sys = base.with_beta(beta)?;
            let x = sys.gamma().min_site().cloned();
            let has_term = x.is_some_and(|x| sys.family().multilocal().any(|(r, _)| r.contains(&x)));
            let mc = if has_term { v.mc_samples.unwrap_or(10_000) } else { 0 };
            ks_suite(&sys, v.ks_elements.unwrap_or(4), t.ks_order, t.quad_points, mc, seed)?
        }
        Suite::Lemma1 => {
            let w = cfg.window();
            let lattice = if w.len() <= 6 { w } else { Region::chain(4) };
            lemma1_suite(&lattice, v.draws.unwrap_or(500), 3, &[0.3, 0.7, 1.5], seed)?
        }
        Suite::ClassicalInvariance => {
            let (j, delta) = if cfg.is_quantum() { (1.0, None) } else { (cfg.j(), Some(cfg.delta())) };
            classical_invariance_suite(v.draws.unwrap_or(20), j, delta, 16, seed)?
        }
    })
}

pub fn verify(cfg: &ModelConfig, suite: SuiteArg, seed: u64) -> Result<VerifyOutput, CliError> {
    let mut suites = suite.suites(cfg)?;
    suites.sort();
    let reports = suites.into_iter().map(|s| run_suite(cfg, s, seed)).collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyOutput { seed, passed: reports.iter().all(|r| r.passed()), suites: reports })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub bounds: BetaUOutput,
    pub norms: NormsOutput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceTable>,
}

impl Tabular for FullReport {
    fn title(&self) -> String {
        self.bounds.title()
    }

    fn table(&self) -> Table {
        self.bounds.table()
    }

    fn extra(&self) -> Vec<(String, Table)> {
        let mut out = self.bounds.extra();
        out.push((self.norms.title(), self.norms.table()));
        if let Some(r) = &self.reference {
            out.push((r.title(), r.table()));
        }
        out
    }
}

pub fn report(cfg: &ModelConfig, paper_table: bool) -> Result<FullReport, CliError> {
    Ok(FullReport {
        bounds: beta_u(cfg)?,
        norms: norms(cfg)?,
        reference: if paper_table { Some(reference_table()?) } else { None },
    })
}
