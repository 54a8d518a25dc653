//! JSON problem description, CLI overrides and conversion to solver inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use sturm_core::solver::StabilityCheck;
use sturm_core::{
    BasisParams, BoundSearch, CouplingForm, EquationKind, PhysicalConstants, PotentialTerm, Problem, RadialPotential,
    ResonanceSearch, TermList,
};
use thiserror::Error;

/// Validation failure, tagged with the offending field.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Schrodinger,
    Kg,
    Dirac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub e2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            m: 1.0,
            hbar: 1.0,
            e2: 1.0,
            c: None,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Nprime", default, skip_serializing_if = "Option::is_none")]
    pub n_prime: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Absolute refinement tolerance on E′.
    pub root: f64,
    /// σ_min/scale acceptance for bound states.
    pub bound_sigma: f64,
    /// σ_min/scale acceptance for resonances.
    pub resonance_sigma: f64,
    pub merge: f64,
    /// Relative drift allowed when a resonance is re-found at N + 10; null
    /// disables the check.
    pub stability: Option<f64>,
    /// Largest |Δ| tolerated by `verify`.
    pub verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root: 1e-12,
            bound_sigma: 1e-8,
            resonance_sigma: 1e-6,
            merge: 1e-8,
            stability: Some(1e-3),
            verify: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub bound_interval: Option<[f64; 2]>,
    pub bound_grid: usize,
    /// [re_lo, re_hi, im_lo, im_hi]
    pub resonance_box: Option<[f64; 4]>,
    /// Extra Muller starting points as [re, im].
    pub seeds: Vec<[f64; 2]>,
    pub tolerances: Tolerances,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bound_interval: None,
            bound_grid: 1000,
            resonance_box: None,
            seeds: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub b_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Points along Re E′ and Im E′ (the second is ignored on a line).
    pub grid: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub equation: Equation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(rename = "coulomb_Z")]
    pub coulomb_z: f64,
    /// Short-range terms amp·r^power·e^(−decay·r).
    #[serde(default)]
    pub potential: Vec<PotentialTerm>,
    pub basis: BasisConfig,
    #[serde(default)]
    pub search: SearchConfig,
    /// Dirac only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that replace file fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub equation: Option<Equation>,
    pub l: Option<u32>,
    pub j: Option<f64>,
    pub n_basis: Option<usize>,
    pub n_prime: Option<usize>,
    pub b: Option<f64>,
    pub bound_interval: Option<[f64; 2]>,
    pub resonance_box: Option<[f64; 4]>,
    pub format: Option<Format>,
    pub out: Option<String>,
}

/// Everything the solver needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub problem: Problem,
    pub bound: Option<BoundSearch>,
    pub resonance: Option<ResonanceSearch>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| ConfigError {
            path: format!("{} ({})", path.display(), e.path),
            message: e.message,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.equation {
            self.equation = e;
        }
        if let Some(l) = o.l {
            self.l = Some(l);
            self.j = None;
        }
        if let Some(j) = o.j {
            self.j = Some(j);
            self.l = None;
        }
        if let Some(n) = o.n_basis {
            self.basis.n = n;
        }
        if let Some(n) = o.n_prime {
            self.basis.n_prime = Some(n);
        }
        if let Some(b) = o.b {
            self.basis.b = b;
        }
        if let Some(iv) = o.bound_interval {
            self.search.bound_interval = Some(iv);
        }
        if let Some(bx) = o.resonance_box {
            self.search.resonance_box = Some(bx);
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
    }

    /// SHA-256 of the problem and search definition. Output settings do not
    /// enter, and results carry no timing data into it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn kind(&self) -> Result<EquationKind, ConfigError> {
        match self.equation {
            Equation::Schrodinger | Equation::Kg => {
                if self.j.is_some() {
                    return err("j", "only meaningful for equation = dirac; use l");
                }
                let Some(l) = self.l else {
                    return err("l", format!("required for equation = {:?}", self.equation).to_lowercase());
                };
                Ok(if self.equation == Equation::Kg {
                    EquationKind::KleinGordon { l }
                } else {
                    EquationKind::Schrodinger { l }
                })
            }
            Equation::Dirac => {
                if self.l.is_some() {
                    return err("l", "equation = dirac takes j, not l");
                }
                let Some(j) = self.j else {
                    return err("j", "required for equation = dirac");
                };
                EquationKind::dirac(j).or_else(|e| err("j", e.to_string()))
            }
        }
    }

    pub fn constants(&self) -> Result<PhysicalConstants, ConfigError> {
        let k = &self.constants;
        for (name, v) in [("constants.m", k.m), ("constants.hbar", k.hbar), ("constants.e2", k.e2)] {
            if !(v > 0.0 && v.is_finite()) {
                return err(name, format!("must be positive, got {v}"));
            }
        }
        let c = match (k.c, k.alpha) {
            (Some(_), Some(_)) => return err("constants", "give either c or alpha, not both"),
            (Some(c), None) => c,
            (None, Some(a)) => {
                if !(a > 0.0 && a < 1.0) {
                    return err("constants.alpha", format!("must lie in (0, 1), got {a}"));
                }
                k.e2 / (k.hbar * a)
            }
            (None, None) => PhysicalConstants::MODEL_C,
        };
        let out = PhysicalConstants {
            m: k.m,
            hbar: k.hbar,
            c,
            e2: k.e2,
        };
        out.validate().or_else(|e| err("constants.c", e.to_string()))?;
        Ok(out)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let kind = self.kind()?;
        let constants = self.constants()?;
        if !self.coulomb_z.is_finite() {
            return err("coulomb_Z", "must be finite");
        }
        let potential = RadialPotential::new(self.coulomb_z, TermList::new(self.potential.clone()))
            .or_else(|e| err("potential", e.to_string()))?;
        let basis = self.basis_params()?;
        let coupling = match (self.coupling, kind) {
            (Some(_), EquationKind::Schrodinger { .. } | EquationKind::KleinGordon { .. }) => {
                return err("coupling", "only meaningful for equation = dirac")
            }
            (c, _) => c.unwrap_or_default(),
        };
        let problem = Problem {
            kind,
            constants,
            potential,
            basis,
            coupling,
        };
        // λ must exist (supercritical Zα is a configuration error)
        let channel = sturm_core::effective::EffectiveChannel::new(kind, problem.potential.coulomb_z, constants, coupling)
            .or_else(|e| err("coulomb_Z", e.to_string()))?;

        let s = &self.search;
        let t = &s.tolerances;
        for (name, v) in [
            ("search.tolerances.root", t.root),
            ("search.tolerances.bound_sigma", t.bound_sigma),
            ("search.tolerances.resonance_sigma", t.resonance_sigma),
            ("search.tolerances.merge", t.merge),
            ("search.tolerances.verify", t.verify),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(name, format!("must be positive, got {v}"));
            }
        }
        let bound = match s.bound_interval {
            None => None,
            Some([lo, hi]) => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return err("search.bound_interval", format!("need lo < hi, got [{lo}, {hi}]"));
                }
                let eps_hi = channel.eps(Complex64::new(hi, 0.0)).re;
                if eps_hi >= 0.0 {
                    return err("search.bound_interval", format!("upper end {hi} is at or above threshold"));
                }
                if s.bound_grid < 2 {
                    return err("search.bound_grid", "need at least 2 cells");
                }
                let mut b = BoundSearch::new(lo, hi);
                b.grid = s.bound_grid;
                b.tolerance = t.root;
                b.sigma_tolerance = t.bound_sigma;
                Some(b)
            }
        };
        let resonance = match s.resonance_box {
            None => None,
            Some([a, b, c, d]) => {
                if !(a < b && c < d) || [a, b, c, d].iter().any(|v| !v.is_finite()) {
                    return err("search.resonance_box", "need re_lo < re_hi and im_lo < im_hi");
                }
                let mut r = ResonanceSearch::new(a, b, c, d);
                r.seeds = s.seeds.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                r.tolerance = t.root;
                r.sigma_tolerance = t.resonance_sigma;
                r.merge_tolerance = t.merge;
                r.stability = t.stability.map(|tol| StabilityCheck { extra_n: 10, tolerance: tol });
                Some(r)
            }
        };
        if let Some(cv) = &self.converge {
            if cv.n_list.is_empty() || cv.n_list.iter().any(|&n| n == 0) {
                return err("converge.N_list", "need a non-empty list of positive sizes");
            }
            if cv.b_list.is_empty() || cv.b_list.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
                return err("converge.b_list", "need a non-empty list of positive scales");
            }
        }
        if let Some(p) = &self.probe {
            if p.grid[0] < 2 || p.grid[1] < 1 {
                return err("probe.grid", "need at least 2 points along Re E′ and 1 along Im E′");
            }
        }
        Ok(Resolved {
            problem,
            bound,
            resonance,
        })
    }

    fn basis_params(&self) -> Result<BasisParams, ConfigError> {
        let b = &self.basis;
        if !(b.b > 0.0 && b.b.is_finite()) {
            return err("basis.b", format!("must be positive, got {}", b.b));
        }
        if b.n == 0 {
            return err("basis.N", "must be at least 1");
        }
        let n_prime = b.n_prime.unwrap_or(b.n);
        if n_prime < b.n {
            return err("basis.Nprime", format!("must be at least N = {}, got {n_prime}", b.n));
        }
        let min_quad = 2 * n_prime + 40;
        let quad_points = b.quad_points.unwrap_or(min_quad);
        if quad_points < min_quad {
            return err("basis.quad_points", format!("must be at least 2N′+40 = {min_quad}, got {quad_points}"));
        }
        let p = BasisParams {
            b: b.b,
            n: b.n,
            n_prime,
            quad_points,
        };
        p.validate().or_else(|e| err("basis", e.to_string()))?;
        Ok(p)
    }
}
