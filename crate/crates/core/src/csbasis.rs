//! Coulomb-Sturmian functions for real (possibly non-integer) angular
//! momentum, their matrix elements, and the double-inversion separable
//! representation of a short-range potential.
//!
//! CS functions:
//!
//! ```text
//! ⟨r|nλ⟩ = √(Γ(n+1)/Γ(n+2λ+2)) e^(−br) (2br)^(λ+1) L_n^(2λ+1)(2br)
//! ⟨r|ñλ⟩ = ⟨r|nλ⟩ / r,        ⟨nλ|ñ′λ⟩ = δ_nn′
//! ```
//!
//! Potentials are finite sums of `amp · r^p · e^(−μr)` terms. For such a term
//! the matrix element reduces, after x = 2br and y = (1 + μ/2b)·x, to a
//! polynomial integrated against y^α e^(−y) with α = λ_row + λ_col + 2 + p,
//! which a Gauss-Laguerre rule with more than N′ nodes integrates exactly.

use crate::specfun::{gauss_laguerre_rule, laguerre_sequence, ln_gamma_pos, QuadratureRule, SpecFunError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BasisError {
    #[error("invalid basis parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-conditioned potential matrix (condition estimate {condition:.3e}); try a smaller N′")]
    Conditioning { condition: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

pub type Result<T> = std::result::Result<T, BasisError>;

/// Refusal threshold for the double inversion.
pub const MAX_POTENTIAL_CONDITION: f64 = 1e12;

/// Basis scale and sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    /// Inverse-length scale b.
    pub b: f64,
    /// Retained size N.
    pub n: usize,
    /// Expansion size N′ used before the double inversion.
    pub n_prime: usize,
    pub quad_points: usize,
}

impl BasisParams {
    /// N′ = N and the minimal quadrature size.
    pub fn new(b: f64, n: usize) -> Result<Self> {
        Self::with_expansion(b, n, n)
    }

    pub fn with_expansion(b: f64, n: usize, n_prime: usize) -> Result<Self> {
        let p = BasisParams {
            b,
            n,
            n_prime,
            quad_points: 2 * n_prime + 40,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(BasisError::InvalidParams(format!("b must be positive, got {}", self.b)));
        }
        if self.n == 0 || self.n > self.n_prime {
            return Err(BasisError::InvalidParams(format!(
                "need 1 ≤ N ≤ N′, got N = {}, N′ = {}",
                self.n, self.n_prime
            )));
        }
        if self.quad_points < 2 * self.n_prime + 40 {
            return Err(BasisError::InvalidParams(format!(
                "quad_points = {} is below 2N′ + 40 = {}",
                self.quad_points,
                2 * self.n_prime + 40
            )));
        }
        Ok(())
    }
}

/// One term `amp · r^power · e^(−decay·r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub amp: f64,
    pub power: i32,
    pub decay: f64,
}

impl PotentialTerm {
    pub fn new(amp: f64, power: i32, decay: f64) -> Self {
        PotentialTerm { amp, power, decay }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.amp * r.powi(self.power) * (-self.decay * r).exp()
    }
}

/// A radial function given as a sum of exponential-power terms, closed under
/// the operations the relativistic mappings need (square, derivative, 1/r).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermList(pub Vec<PotentialTerm>);

impl TermList {
    pub fn new(terms: Vec<PotentialTerm>) -> Self {
        TermList(terms).simplified()
    }

    pub fn zero() -> Self {
        TermList(Vec::new())
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.amp == 0.0)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.0.iter().map(|t| t.value(r)).sum()
    }

    pub fn derivative_value(&self, r: f64) -> f64 {
        self.derivative().value(r)
    }

    pub fn scaled(&self, s: f64) -> Self {
        TermList(self.0.iter().map(|t| PotentialTerm { amp: t.amp * s, ..*t }).collect())
    }

    /// Multiply by r^k.
    pub fn times_power(&self, k: i32) -> Self {
        TermList(
            self.0
                .iter()
                .map(|t| PotentialTerm {
                    power: t.power + k,
                    ..*t
                })
                .collect(),
        )
    }

    pub fn over_r(&self) -> Self {
        self.times_power(-1)
    }

    pub fn square(&self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() * self.0.len());
        for a in &self.0 {
            for b in &self.0 {
                out.push(PotentialTerm {
                    amp: a.amp * b.amp,
                    power: a.power + b.power,
                    decay: a.decay + b.decay,
                });
            }
        }
        TermList(out).simplified()
    }

    /// d/dr[a r^p e^(−μr)] = a e^(−μr) (p r^(p−1) − μ r^p).
    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(2 * self.0.len());
        for t in &self.0 {
            if t.decay != 0.0 {
                out.push(PotentialTerm {
                    amp: -t.amp * t.decay,
                    ..*t
                });
            }
            if t.power != 0 {
                out.push(PotentialTerm {
                    amp: t.amp * t.power as f64,
                    power: t.power - 1,
                    decay: t.decay,
                });
            }
        }
        TermList(out).simplified()
    }

    pub fn plus(&self, other: &TermList) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        TermList(v).simplified()
    }

    /// Merge terms sharing (power, decay) and drop zero amplitudes.
    pub fn simplified(self) -> Self {
        let mut out: Vec<PotentialTerm> = Vec::with_capacity(self.0.len());
        for t in self.0 {
            if let Some(existing) = out
                .iter_mut()
                .find(|e| e.power == t.power && e.decay.to_bits() == t.decay.to_bits())
            {
                existing.amp += t.amp;
            } else {
                out.push(t);
            }
        }
        out.retain(|t| t.amp != 0.0);
        TermList(out)
    }

    /// Coefficient of r^k in the small-r Laurent expansion (k ≤ −1 is enough
    /// for the singular part).
    pub fn laurent_coefficient(&self, k: i32) -> f64 {
        // e^(−μr) = Σ (−μr)^j / j!
        let mut total = 0.0;
        for t in &self.0 {
            let j = k - t.power;
            if j < 0 {
                continue;
            }
            let mut fact = 1.0;
            for i in 1..=j {
                fact *= i as f64;
            }
            total += t.amp * (-t.decay).powi(j) / fact;
        }
        total
    }

    pub fn min_decay(&self) -> Option<f64> {
        self.0.iter().map(|t| t.decay).min_by(|a, b| a.total_cmp(b))
    }
}

/// Coulomb coefficient plus the short-range part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    /// Coefficient of 1/r (energy·length, includes e²). Positive is repulsive.
    pub coulomb_z: f64,
    pub short_range: TermList,
}

impl RadialPotential {
    pub fn new(coulomb_z: f64, short_range: TermList) -> Result<Self> {
        let p = RadialPotential { coulomb_z, short_range };
        p.validate()?;
        Ok(p)
    }

    pub fn pure_coulomb(coulomb_z: f64) -> Self {
        RadialPotential {
            coulomb_z,
            short_range: TermList::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coulomb_z.is_finite() {
            return Err(BasisError::Domain("Coulomb coefficient is not finite".into()));
        }
        for t in self.short_range.terms() {
            if !(t.decay > 0.0 && t.decay.is_finite()) {
                return Err(BasisError::Domain(format!(
                    "short-range term {t:?} needs a positive decay constant"
                )));
            }
            if t.power < -1 {
                return Err(BasisError::Domain(format!(
                    "short-range term {t:?} is more singular than 1/r"
                )));
            }
            if !t.amp.is_finite() {
                return Err(BasisError::Domain(format!("term {t:?} has a non-finite amplitude")));
            }
        }
        Ok(())
    }

    pub fn value(&self, r: f64) -> f64 {
        self.coulomb_z / r + self.short_range.value(r)
    }
}

fn cs_log_norm(n: usize, lambda: f64) -> f64 {
    0.5 * (ln_gamma_pos(n as f64 + 1.0) - ln_gamma_pos(n as f64 + 2.0 * lambda + 2.0))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda <= -1.0 || !lambda.is_finite() {
        return Err(BasisError::Domain(format!("angular momentum must exceed -1, got {lambda}")));
    }
    Ok(())
}

/// ⟨r|nλ⟩ for the CS function with scale `b`.
pub fn cs_eval(n: usize, lambda: f64, b: f64, r: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if r < 0.0 || !r.is_finite() {
        return Err(BasisError::Domain(format!("radius must be non-negative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let x = 2.0 * b * r;
    let lag = laguerre_sequence(2.0 * lambda + 1.0, x, n)?;
    let ln_mag = cs_log_norm(n, lambda) - b * r + (lambda + 1.0) * x.ln();
    Ok(ln_mag.exp() * lag[n])
}

/// Real matrix ⟨n λ_row| f |n′ λ_col⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMatrix {
    pub lambda_row: f64,
    pub lambda_col: f64,
    pub entries: DMatrix<f64>,
    pub symmetric: bool,
}

impl PotentialMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.entries.map(|v| Complex64::new(v, 0.0))
    }
}

/// Rows are normalized Laguerre factors N_n L_n^(2λ+1)(x_k) scaled by √w_k.
fn weighted_basis_table(lambda: f64, size: usize, rule: &QuadratureRule, scale: f64) -> Result<DMatrix<f64>> {
    let alpha = 2.0 * lambda + 1.0;
    let norms: Vec<f64> = (0..size).map(|n| cs_log_norm(n, lambda).exp()).collect();
    let mut table = DMatrix::<f64>::zeros(size, rule.len());
    for (k, (&y, &lnw)) in rule.nodes.iter().zip(&rule.ln_weights).enumerate() {
        let x = y / scale;
        let sqrt_w = (0.5 * lnw).exp();
        if sqrt_w == 0.0 {
            continue;
        }
        let lag = laguerre_sequence(alpha, x, size - 1)?;
        for n in 0..size {
            table[(n, k)] = sqrt_w * norms[n] * lag[n];
        }
    }
    Ok(table)
}

/// Matrix elements of a term-list potential, exact up to rounding.
pub fn potential_matrix(
    f: &TermList,
    lambda_row: f64,
    lambda_col: f64,
    params: &BasisParams,
) -> Result<PotentialMatrix> {
    check_lambda(lambda_row)?;
    check_lambda(lambda_col)?;
    params.validate()?;
    let size = params.n_prime;
    let b = params.b;
    let mut entries = DMatrix::<f64>::zeros(size, size);
    let mut rules: HashMap<i32, QuadratureRule> = HashMap::new();

    for term in f.terms() {
        if term.amp == 0.0 {
            continue;
        }
        if term.decay < 0.0 {
            return Err(BasisError::Domain(format!("term {term:?} grows at large r")));
        }
        let alpha = lambda_row + lambda_col + 2.0 + term.power as f64;
        if alpha <= -1.0 {
            return Err(BasisError::Domain(format!(
                "term {term:?} is not integrable against λ = ({lambda_row}, {lambda_col})"
            )));
        }
        if !rules.contains_key(&term.power) {
            rules.insert(term.power, gauss_laguerre_rule(alpha, params.quad_points)?);
        }
        let rule = &rules[&term.power];
        let s = 1.0 + term.decay / (2.0 * b);
        let rows = weighted_basis_table(lambda_row, size, rule, s)?;
        let cols = if lambda_col.to_bits() == lambda_row.to_bits() {
            rows.clone()
        } else {
            weighted_basis_table(lambda_col, size, rule, s)?
        };
        let factor = term.amp * (2.0 * b).powi(-term.power - 1) * s.powf(-(alpha + 1.0));
        entries += (&rows * cols.transpose()) * factor;
    }

    let symmetric = lambda_row.to_bits() == lambda_col.to_bits();
    if symmetric {
        // fixed pairing so both triangles carry identical bits
        for i in 0..size {
            for j in 0..i {
                let v = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
    }
    Ok(PotentialMatrix {
        lambda_row,
        lambda_col,
        entries,
        symmetric,
    })
}

/// Matrix elements of an arbitrary radial function by Gauss-Laguerre
/// quadrature in x = 2br with weight x^(2λ_min+1) e^(−x).
///
/// `f` must be at most as singular as 1/r at the origin and may not grow.
/// Unlike [`potential_matrix`] this is only as accurate as the rule resolves
/// the remaining smooth factor.
pub fn potential_matrix_fn<F: Fn(f64) -> f64>(
    f: F,
    lambda_row: f64,
    lambda_col: f64,
    params: &BasisParams,
) -> Result<PotentialMatrix> {
    check_lambda(lambda_row)?;
    check_lambda(lambda_col)?;
    params.validate()?;
    let size = params.n_prime;
    let b = params.b;
    let lmin = lambda_row.min(lambda_col);
    let alpha = 2.0 * lmin + 1.0;
    let rule = gauss_laguerre_rule(alpha, params.quad_points)?;
    let rows = weighted_basis_table(lambda_row, size, &rule, 1.0)?;
    let cols = weighted_basis_table(lambda_col, size, &rule, 1.0)?;
    // x^(λr+λc+2) / x^α = x^(λr+λc−2λmin+1), and dr = dx/2b
    let extra = lambda_row + lambda_col - 2.0 * lmin + 1.0;
    let mut g = Vec::with_capacity(rule.len());
    for &x in &rule.nodes {
        let r = x / (2.0 * b);
        let fv = f(r);
        if !fv.is_finite() {
            return Err(BasisError::Domain(format!("integrand not finite at r = {r}")));
        }
        g.push(fv * x.powf(extra) / (2.0 * b));
    }
    let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g));
    let mut entries = &rows * g * cols.transpose();
    let symmetric = lambda_row.to_bits() == lambda_col.to_bits();
    if symmetric {
        for i in 0..size {
            for j in 0..i {
                let v = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
    }
    Ok(PotentialMatrix {
        lambda_row,
        lambda_col,
        entries,
        symmetric,
    })
}

/// ⟨nλ|ñ′λ⟩ by quadrature; the identity matrix when everything is consistent.
pub fn overlap_matrix(lambda: f64, params: &BasisParams) -> Result<DMatrix<f64>> {
    let one_over_r = TermList(vec![PotentialTerm::new(1.0, -1, 0.0)]);
    let m = potential_matrix(&one_over_r, lambda, lambda, params)?;
    if m.entries.iter().any(|v| !v.is_finite()) {
        return Err(BasisError::Domain("overlap quadrature produced non-finite values".into()));
    }
    Ok(m.entries)
}

/// ⟨nλ|n′λ⟩ (non-tilde on both sides): the matrix representing the unit
/// operator in the ⟨ñ| … |ñ′⟩ expansion.
pub fn unit_operator_matrix(lambda: f64, params: &BasisParams) -> Result<DMatrix<f64>> {
    let one = TermList(vec![PotentialTerm::new(1.0, 0, 0.0)]);
    Ok(potential_matrix(&one, lambda, lambda, params)?.entries)
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition estimate ‖A‖₁ ‖A⁻¹‖₁; infinite when A is singular.
pub fn condition_estimate(m: &DMatrix<Complex64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// ((V⁻¹) restricted to the leading N×N block)⁻¹, computed as the Schur
/// complement V_AA − V_AB V_BB⁻¹ V_BA. A zero potential stays zero.
pub fn separable_truncate(v: &DMatrix<Complex64>, n: usize) -> Result<DMatrix<Complex64>> {
    let size = v.nrows();
    if v.ncols() != size {
        return Err(BasisError::InvalidParams("potential matrix must be square".into()));
    }
    if n == 0 || n > size {
        return Err(BasisError::InvalidParams(format!("cannot truncate {size}×{size} to {n}")));
    }
    if n == size {
        return Ok(v.clone());
    }
    if v.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
        return Ok(DMatrix::zeros(n, n));
    }
    let condition = condition_estimate(v);
    if !(condition <= MAX_POTENTIAL_CONDITION) {
        return Err(BasisError::Conditioning { condition });
    }
    let m = size - n;
    let vaa = v.view((0, 0), (n, n));
    let vab = v.view((0, n), (n, m));
    let vba = v.view((n, 0), (m, n));
    let vbb = v.view((n, n), (m, m)).clone_owned();
    let lu = vbb.lu();
    let x = lu
        .solve(&vba.clone_owned())
        .ok_or(BasisError::Conditioning { condition: f64::INFINITY })?;
    Ok(vaa.clone_owned() - vab * x)
}
