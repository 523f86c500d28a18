//! End-to-end pipelines, registered by name and selected at run time.

mod audit;
mod backscatter;
mod homogeneous;
mod nullradial;
mod validate;
mod weaknull;

pub use audit::AuditScenario;
pub use backscatter::BackscatterScenario;
pub use homogeneous::{psi_state, HomogeneousRun, HomogeneousScenario, TLimitScenario};
pub use nullradial::NullRadialScenario;
pub use validate::{ConvergenceScenario, ValidateScenario};
pub use weaknull::WeakNullScenario;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::backscatter::SweepRow;
use crate::error::{Error, Result};
use crate::functionals::{fit_decay, FitResult, FunctionalReport};
use crate::profile::ProfileDescriptor;
use crate::radiation::{check_gamma, RadiationField};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSpec {
    pub l: usize,
    pub m: i64,
    pub profile: ProfileDescriptor,
}

/// Thresholds that turn measurements into pass/fail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Acceptance {
    pub exponent_tol: f64,
    pub order_target: f64,
    pub order_tol: f64,
    pub min_order: f64,
    pub identity_constant: f64,
    pub bulk_tol: f64,
    pub cauchy_ratio: f64,
    pub envelope_ratio: f64,
    pub crosscheck_tol: f64,
    pub oracle_tol: f64,
    pub residual_tol: f64,
    pub budget: f64,
    pub drift: f64,
    pub scaling_tol: f64,
    pub nonincrease_tol: f64,
}

impl Default for Acceptance {
    fn default() -> Self {
        Acceptance {
            exponent_tol: 0.15,
            order_target: 2.0,
            order_tol: 0.1,
            min_order: 1.9,
            identity_constant: 5.0,
            bulk_tol: 1e-12,
            cauchy_ratio: 1.5,
            envelope_ratio: 5.0,
            crosscheck_tol: 1e-2,
            oracle_tol: 1e-4,
            residual_tol: 1e-2,
            budget: 10.0,
            drift: 2.0,
            scaling_tol: 0.2,
            nonincrease_tol: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    pub scenario: String,
    pub f0: Vec<ModeSpec>,
    pub g0: Vec<ModeSpec>,
    /// Angular band limit L_max of the data.
    pub band: usize,
    pub gamma: f64,
    pub s: f64,
    pub mass: f64,
    pub mu: f64,
    pub a: f64,
    pub delta: f64,
    pub t_final: f64,
    pub t0: f64,
    pub t_list: Vec<f64>,
    pub samples: usize,
    pub h: f64,
    pub convention: String,
    pub seed: u64,
    pub acceptance: Acceptance,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            scenario: "validate".into(),
            f0: Vec::new(),
            g0: Vec::new(),
            band: 2,
            gamma: 0.8,
            s: 1.2,
            mass: 0.0,
            mu: 0.1,
            a: 0.0,
            delta: 0.3,
            t_final: 80.0,
            t0: 2.0,
            t_list: vec![40.0, 80.0, 160.0],
            samples: 64,
            h: 0.05,
            convention: "retarded".into(),
            seed: 0,
            acceptance: Acceptance::default(),
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.s >= 1.0 && self.s < self.gamma + 0.5) {
            return Err(Error::range(
                "s",
                format!("s must satisfy 1 ≤ s < gamma + 1/2 = {}, got {}", self.gamma + 0.5, self.s),
            ));
        }
        if !(self.t0 >= 1.0 && self.t_final > self.t0) {
            return Err(Error::range("T", format!("need T > t0 ≥ 1, got T = {}, t0 = {}", self.t_final, self.t0)));
        }
        if !(self.h > 0.0 && self.h <= 0.5) {
            return Err(Error::range("h", format!("must lie in (0, 0.5], got {}", self.h)));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(Error::range("mu", format!("must lie in (0, 1/2), got {}", self.mu)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5 - self.mu) {
            return Err(Error::range(
                "delta",
                format!("must satisfy 0 < delta < 1/2 - mu = {}, got {}", 0.5 - self.mu, self.delta),
            ));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::range("a", format!("must be finite and ≥ 0, got {}", self.a)));
        }
        if !self.mass.is_finite() {
            return Err(Error::range("M", "must be finite"));
        }
        if self.samples < 8 {
            return Err(Error::range("samples", format!("need at least 8 record times, got {}", self.samples)));
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) || self.t_list.iter().any(|&t| t <= self.t0) {
            return Err(Error::range("T_list", "must be strictly increasing and above t0"));
        }
        for m in self.f0.iter().chain(&self.g0) {
            if m.l > self.band || m.m.unsigned_abs() as usize > m.l {
                return Err(Error::range(
                    "mode",
                    format!("({},{}) outside band limit L_max = {}", m.l, m.m, self.band),
                ));
            }
        }
        Ok(())
    }

    pub fn field(&self, modes: &[ModeSpec]) -> Result<RadiationField> {
        let d: Vec<(usize, i64, ProfileDescriptor)> = modes.iter().map(|m| (m.l, m.m, m.profile.clone())).collect();
        RadiationField::from_descriptors(self.band, self.gamma, &d)
    }

    /// Geometric record times from T down to t0, strictly decreasing.
    pub fn record_times(&self) -> Vec<f64> {
        geometric_times(self.t_final, self.t0, self.samples)
    }
}

pub fn geometric_times(t_final: f64, t0: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| t_final * (t0 / t_final).powf(k as f64 / (n - 1) as f64)).collect();
    v[n - 1] = t0;
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentCheck {
    pub name: String,
    pub fitted: Option<FitResult>,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl ExponentCheck {
    pub fn from_fit(name: &str, series: &[(f64, f64)], window: (f64, f64), target: f64, tol: f64) -> Self {
        match fit_decay(series, window.0, window.1) {
            Ok(f) => ExponentCheck {
                name: name.into(),
                fitted: Some(f),
                target,
                tol,
                pass: (f.exponent - target).abs() <= tol,
                note: None,
            },
            Err(e) => {
                ExponentCheck { name: name.into(), fitted: None, target, tol, pass: false, note: Some(e.to_string()) }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Reported only; does not affect the run status.
    pub informational: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
            informational: false,
            detail: detail.into(),
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
            informational: false,
            detail: detail.into(),
        }
    }

    pub fn info(name: &str, value: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), value, threshold: f64::NAN, pass: true, informational: true, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub h: f64,
    pub j_max: usize,
    pub band: usize,
}

/// A named time series beyond the standard functional columns.
#[derive(Clone, Debug, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub reports: Vec<FunctionalReport>,
    pub series: Vec<Series>,
    pub exponents: Vec<ExponentCheck>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub sweep: Vec<SweepRow>,
    pub provenance: Provenance,
}

impl ScenarioReport {
    pub fn new(scenario: &str) -> Self {
        ScenarioReport {
            scenario: scenario.into(),
            reports: Vec::new(),
            series: Vec::new(),
            exponents: Vec::new(),
            checks: Vec::new(),
            sweep: Vec::new(),
            provenance: Provenance { version: env!("CARGO_PKG_VERSION").into(), ..Default::default() },
        }
    }

    pub fn passed(&self) -> bool {
        self.exponents.iter().all(|e| e.pass) && self.checks.iter().all(|c| c.informational || c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exponent(&self, name: &str) -> Option<&ExponentCheck> {
        self.exponents.iter().find(|c| c.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&[(f64, f64)]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.points.as_slice())
    }

    fn push_series(&mut self, name: &str, mut points: Vec<(f64, f64)>) {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.series.push(Series { name: name.into(), points });
    }
}

/// max/min of a series over times in [lo, hi]; infinite when the minimum vanishes.
pub fn spread(series: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let vals: Vec<f64> = series.iter().filter(|p| p.0 >= lo && p.0 <= hi).map(|p| p.1).collect();
    let max = vals.iter().fold(0.0f64, |m, &x| m.max(x));
    let min = vals.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if max == 0.0 {
        1.0
    } else if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Largest growth factor forward in time: max over t_i < t_j of N(t_j) / N(t_i).
pub fn forward_growth(series: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 >= lo && p.0 <= hi).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut worst: f64 = 1.0;
    let mut min_so_far = f64::INFINITY;
    for (_, v) in pts {
        if min_so_far.is_finite() {
            worst = worst.max(if min_so_far > 0.0 {
                v / min_so_far
            } else if v > 0.0 {
                f64::INFINITY
            } else {
                1.0
            });
        }
        min_so_far = min_so_far.min(v);
    }
    worst
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport>;
}

pub struct ScenarioRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        ScenarioRegistry { entries: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ValidateScenario));
        r.register(Arc::new(HomogeneousScenario));
        r.register(Arc::new(TLimitScenario));
        r.register(Arc::new(WeakNullScenario));
        r.register(Arc::new(NullRadialScenario));
        r.register(Arc::new(BackscatterScenario));
        r.register(Arc::new(AuditScenario));
        r.register(Arc::new(ConvergenceScenario));
        r
    }

    pub fn register(&mut self, s: Arc<dyn Scenario>) {
        self.entries.insert(s.name(), s);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scenario>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::Unknown {
            what: "scenario",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        spec.validate()?;
        let s = self.get(&spec.scenario)?;
        s.run(spec).map_err(|e| if e.stage().is_some() { e } else { e.in_stage(s.name()) })
    }
}
