//! Coulomb-Sturmian representation of the Coulomb Green's operator.
//!
//! The inverse Green's operator `ε − h_C` is tridiagonal in the CS basis (the
//! J matrix). Truncating it at size N and correcting the bottom-right entry
//! with the continued-fraction tail gives the N×N inverse Green's matrix
//! exactly, for complex λ-continued channels and on either sheet.

use crate::specfun::{hyp2f1_ratio, Hyp2F1RatioParams, SpecFunError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GreensError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("energy {eps} is within pole proximity of the Coulomb Green's matrix (condition {condition:.3e})")]
    PoleProximity { eps: Complex64, condition: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

pub type Result<T> = std::result::Result<T, GreensError>;

/// Condition threshold above which `greens_matrix` refuses to invert.
pub const POLE_CONDITION_LIMIT: f64 = 1e13;

/// Mass, ħ, speed of light and squared charge; α = e²/(ħc).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub m: f64,
    pub hbar: f64,
    pub c: f64,
    pub e2: f64,
}

impl PhysicalConstants {
    pub const MODEL_C: f64 = 137.036_04;

    /// m = ħ = e² = 1 with α = 1/137.03604.
    pub fn model() -> Self {
        PhysicalConstants {
            m: 1.0,
            hbar: 1.0,
            c: Self::MODEL_C,
            e2: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.e2 / (self.hbar * self.c)
    }

    /// ħ²/2m
    pub fn kinetic_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.m)
    }

    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.m, self.hbar, self.c, self.e2]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(GreensError::InvalidInput(format!("constants must be positive: {self:?}")));
        }
        if self.alpha() >= 1.0 {
            return Err(GreensError::InvalidInput(format!("α = {} must be below 1", self.alpha())));
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::model()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    /// Im k ≥ 0
    Physical,
    /// Im k < 0
    Unphysical,
}

/// Effective energy with its wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub eps: Complex64,
    pub k: Complex64,
    pub sheet: Sheet,
}

/// k = √(2mε)/ħ on the requested sheet.
pub fn wavenumber(eps: Complex64, constants: &PhysicalConstants, sheet: Sheet) -> EnergyPoint {
    let k = (eps * (2.0 * constants.m)).sqrt() / constants.hbar;
    let k = match sheet {
        Sheet::Physical if k.im < 0.0 => -k,
        Sheet::Unphysical if k.im > 0.0 => -k,
        // real-positive-energy boundary: keep Re k > 0 on both sheets
        _ => k,
    };
    EnergyPoint { eps, k, sheet }
}

/// Principal root (Re k ≥ 0): the unphysical sheet below the positive real
/// axis, continued across it onto the physical sheet above. Resonance
/// searches use this so that the continuation is analytic in the whole box
/// around a narrow resonance.
pub fn wavenumber_continued(eps: Complex64, constants: &PhysicalConstants) -> EnergyPoint {
    let k = (eps * (2.0 * constants.m)).sqrt() / constants.hbar;
    let sheet = if k.im < 0.0 { Sheet::Unphysical } else { Sheet::Physical };
    EnergyPoint { eps, k, sheet }
}

/// One row of the tridiagonal J matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JElements {
    pub diag: Complex64,
    pub sup: Complex64,
    pub sub: Complex64,
}

pub fn j_elements(
    n: usize,
    lambda: f64,
    zeff: Complex64,
    point: &EnergyPoint,
    b: f64,
    constants: &PhysicalConstants,
) -> JElements {
    let h2m = constants.hbar * constants.hbar / constants.m;
    let k2 = point.k * point.k;
    let nf = n as f64;
    let off = -(k2 + b * b) * (h2m / (4.0 * b));
    JElements {
        diag: (k2 - b * b) * (h2m / (2.0 * b)) * (nf + lambda + 1.0) - zeff,
        sup: off * ((nf + 1.0) * (nf + 2.0 * lambda + 2.0)).sqrt(),
        sub: off * (nf * (nf + 2.0 * lambda + 1.0)).sqrt(),
    }
}

/// γ = Z_eff m / (ħ² k)
pub fn sommerfeld(zeff: Complex64, k: Complex64, constants: &PhysicalConstants) -> Complex64 {
    zeff * constants.m / (constants.hbar * constants.hbar * k)
}

fn tail_at(n: usize, lambda: f64, i_gamma: Complex64, k: Complex64, b: f64, constants: &PhysicalConstants) -> Result<Complex64> {
    let i = Complex64::i();
    let bm = b - i * k;
    let bp = b + i * k;
    let z = (bp * bp) / (bm * bm);
    let nf = n as f64;
    let ratio = hyp2f1_ratio(&Hyp2F1RatioParams {
        a: -lambda + i_gamma,
        b: Complex64::new(nf, 0.0),
        c: nf + 1.0 + lambda + i_gamma,
        z,
    })?;
    let pref = -(4.0 * constants.m * b / (constants.hbar * constants.hbar)) / (bm * bm * (nf + lambda + 1.0 + i_gamma));
    Ok(pref * ratio.value)
}

/// Continued-fraction tail of the J matrix: with C the (0,0) element of the
/// inverse of the semi-infinite block starting at index `n`, the N = n
/// truncation is corrected by J_{n−1,n−1} ← J_{n−1,n−1} − J_{n−1,n}² C.
///
/// At isolated points (c of the ₂F₁ ratio a non-positive integer) the
/// fraction is undefined although C itself is finite; there C is the average
/// of the values at iγ ± δ.
pub fn tail_correction(
    n: usize,
    lambda: f64,
    zeff: Complex64,
    point: &EnergyPoint,
    b: f64,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    if n == 0 {
        return Err(GreensError::InvalidInput("tail must start at index ≥ 1".into()));
    }
    if point.k == Complex64::new(0.0, 0.0) {
        return Err(GreensError::InvalidInput("zero wavenumber".into()));
    }
    let i_gamma = Complex64::i() * sommerfeld(zeff, point.k, constants);
    match tail_at(n, lambda, i_gamma, point.k, b, constants) {
        Err(GreensError::SpecFun(SpecFunError::Domain(_))) if is_integer_c(n, lambda, i_gamma) => {
            let c = n as f64 + 1.0 + lambda + i_gamma.re;
            let delta = 1e-9 * (1.0 + c.abs());
            let up = tail_at(n, lambda, i_gamma + delta, point.k, b, constants)?;
            let down = tail_at(n, lambda, i_gamma - delta, point.k, b, constants)?;
            Ok(0.5 * (up + down))
        }
        other => other,
    }
}

fn is_integer_c(n: usize, lambda: f64, i_gamma: Complex64) -> bool {
    let c = n as f64 + 1.0 + lambda + i_gamma;
    c.im.abs() <= 1e-12 * (1.0 + c.re.abs()) && c.re <= 0.5 && (c.re - c.re.round()).abs() <= 1e-9 * (1.0 + c.re.abs())
}

/// Per-channel Coulomb data: λ, Z_eff, b, N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensWorkspace {
    pub lambda: f64,
    pub zeff: Complex64,
    pub b: f64,
    pub n: usize,
    pub constants: PhysicalConstants,
}

impl GreensWorkspace {
    pub fn new(lambda: f64, zeff: Complex64, b: f64, n: usize, constants: PhysicalConstants) -> Result<Self> {
        if lambda <= -1.0 || !lambda.is_finite() {
            return Err(GreensError::InvalidInput(format!("λ = {lambda} must exceed −1")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(GreensError::InvalidInput(format!("b = {b} must be positive")));
        }
        if n == 0 {
            return Err(GreensError::InvalidInput("N must be at least 1".into()));
        }
        constants.validate()?;
        Ok(GreensWorkspace {
            lambda,
            zeff,
            b,
            n,
            constants,
        })
    }

    pub fn gamma(&self, point: &EnergyPoint) -> Complex64 {
        sommerfeld(self.zeff, point.k, &self.constants)
    }

    pub fn j(&self, n: usize, point: &EnergyPoint) -> JElements {
        j_elements(n, self.lambda, self.zeff, point, self.b, &self.constants)
    }

    /// Truncated J without the tail correction.
    pub fn truncated_j(&self, point: &EnergyPoint, size: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(size, size);
        for i in 0..size {
            let e = self.j(i, point);
            m[(i, i)] = e.diag;
            if i + 1 < size {
                m[(i, i + 1)] = e.sup;
                m[(i + 1, i)] = e.sup;
            }
        }
        m
    }

    pub fn tail(&self, point: &EnergyPoint) -> Result<Complex64> {
        tail_correction(self.n, self.lambda, self.zeff, point, self.b, &self.constants)
    }

    /// N×N matrix representation of (ε − h_C), i.e. g⁻¹.
    pub fn greens_inverse(&self, point: &EnergyPoint) -> Result<DMatrix<Complex64>> {
        let n = self.n;
        let mut m = self.truncated_j(point, n);
        let corner = self.j(n - 1, point).sup;
        let c = self.tail(point)?;
        m[(n - 1, n - 1)] -= corner * corner * c;
        Ok(m)
    }

    pub fn greens_matrix(&self, point: &EnergyPoint) -> Result<DMatrix<Complex64>> {
        let inv = self.greens_inverse(point)?;
        invert_guarded(&inv, point.eps)
    }
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert_guarded(m: &DMatrix<Complex64>, eps: Complex64) -> Result<DMatrix<Complex64>> {
    let inv = m.clone().try_inverse().ok_or(GreensError::PoleProximity {
        eps,
        condition: f64::INFINITY,
    })?;
    let condition = norm1(m) * norm1(&inv);
    if !(condition <= POLE_CONDITION_LIMIT) {
        return Err(GreensError::PoleProximity { eps, condition });
    }
    Ok(inv)
}
