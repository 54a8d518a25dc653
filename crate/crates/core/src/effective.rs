//! Effective Schrödinger-form parameters for the three wave equations.
//!
//! Klein-Gordon and the squared Dirac equation (rest energy separated off,
//! E = mc² + E′) reduce to a Coulomb problem with a non-integer angular
//! momentum λ, an energy-dependent charge Z′ and energy ε, plus an
//! energy-dependent short-range part
//!
//! ```text
//! w = c₁ v + c₂ Z v/r + c₃ v²,   c₁ = 1 + E′/mc²,  c₂ = −1/mc²,  c₃ = −1/2mc²
//! ```
//!
//! The Dirac case carries two channels λ₊ = s − 1, λ₋ = s coupled by the
//! spin-orbit-like term w′ = κ′ dv/dr.

use crate::greens::PhysicalConstants;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EffectiveError {
    #[error("supercritical charge: Zα = {zalpha} must stay below {limit}")]
    Supercritical { zalpha: f64, limit: f64 },
    #[error("invalid quantum number: {0}")]
    InvalidQuantumNumber(String),
}

pub type Result<T> = std::result::Result<T, EffectiveError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "equation", rename_all = "lowercase")]
pub enum EquationKind {
    Schrodinger { l: u32 },
    #[serde(rename = "kg")]
    KleinGordon { l: u32 },
    /// j = twice_j / 2, twice_j odd.
    Dirac { twice_j: u32 },
}

impl EquationKind {
    pub fn dirac(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice > 0.0 && twice.fract() == 0.0 && (twice as u32) % 2 == 1) {
            return Err(EffectiveError::InvalidQuantumNumber(format!("j = {j} is not a positive half-integer")));
        }
        Ok(EquationKind::Dirac { twice_j: twice as u32 })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EquationKind::Dirac { twice_j } if twice_j % 2 == 0 => Err(EffectiveError::InvalidQuantumNumber(format!(
                "2j = {twice_j} must be odd"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_relativistic(&self) -> bool {
        !matches!(self, EquationKind::Schrodinger { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EquationKind::Schrodinger { .. } => "schrodinger",
            EquationKind::KleinGordon { .. } => "kg",
            EquationKind::Dirac { .. } => "dirac",
        }
    }
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationKind::Schrodinger { l } => write!(f, "schrodinger l={l}"),
            EquationKind::KleinGordon { l } => write!(f, "kg l={l}"),
            EquationKind::Dirac { twice_j } => write!(f, "dirac j={twice_j}/2"),
        }
    }
}

/// Zα = Z/(ħc) with Z the 1/r coefficient in energy·length.
pub fn zalpha(coulomb_z: f64, constants: &PhysicalConstants) -> f64 {
    coulomb_z / (constants.hbar * constants.c)
}

/// λ = −1/2 + √((l+1/2)² − (Zα)²)
pub fn kg_lambda(l: u32, zalpha: f64) -> Result<f64> {
    let half = l as f64 + 0.5;
    if zalpha.abs() >= half {
        return Err(EffectiveError::Supercritical { zalpha, limit: half });
    }
    // (l+½)² − (Zα)² factored to keep precision when Zα is tiny
    Ok(-0.5 + ((half - zalpha) * (half + zalpha)).sqrt())
}

/// ε = E′(1 + E′/2mc²)
pub fn kg_effective_energy(e_prime: Complex64, constants: &PhysicalConstants) -> Complex64 {
    e_prime * (1.0 + e_prime / (2.0 * constants.rest_energy()))
}

/// Z′ = Z(1 + E′/mc²)
pub fn kg_effective_charge(e_prime: Complex64, coulomb_z: f64, constants: &PhysicalConstants) -> Complex64 {
    coulomb_z * (1.0 + e_prime / constants.rest_energy())
}

/// Weights of w = c₁ v + c₂ (Z v/r) + c₃ v².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentWeights {
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: Complex64,
}

impl ComponentWeights {
    pub fn plain() -> Self {
        ComponentWeights {
            c1: Complex64::new(1.0, 0.0),
            c2: Complex64::new(0.0, 0.0),
            c3: Complex64::new(0.0, 0.0),
        }
    }
}

pub fn kg_component_weights(e_prime: Complex64, constants: &PhysicalConstants) -> ComponentWeights {
    let mc2 = constants.rest_energy();
    ComponentWeights {
        c1: 1.0 + e_prime / mc2,
        c2: Complex64::new(-1.0 / mc2, 0.0),
        c3: Complex64::new(-0.5 / mc2, 0.0),
    }
}

/// (s, λ₊, λ₋) with s = √((j+½)² − (Zα)²), λ₊ = s − 1, λ₋ = s.
pub fn dirac_s_and_lambdas(twice_j: u32, zalpha: f64) -> Result<(f64, f64, f64)> {
    if twice_j % 2 == 0 {
        return Err(EffectiveError::InvalidQuantumNumber(format!("2j = {twice_j} must be odd")));
    }
    let big_j = (twice_j as f64 + 1.0) / 2.0;
    if zalpha.abs() >= big_j {
        return Err(EffectiveError::Supercritical { zalpha, limit: big_j });
    }
    let s = ((big_j - zalpha) * (big_j + zalpha)).sqrt();
    Ok((s, s - 1.0, s))
}

pub type Mat2 = [[Complex64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat2_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Angular part of the squared Dirac operator in the (l₊, l₋) = (j−½, j+½)
/// spinor-harmonic pair:
///
/// ```text
/// ⎛ (j−½)(j+½) − (Zα)²       iZα          ⎞
/// ⎝      iZα          (j+½)(j+3/2) − (Zα)² ⎠
/// ```
///
/// The matrix is complex symmetric, not normal: its eigenvectors are
/// orthogonal under the bilinear form xᵀy, and `rotation` is normalized so
/// that Rᵀ R = 1 and Rᵀ A R = diag(λ₊(λ₊+1), λ₋(λ₋+1)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularBlock {
    pub matrix: Mat2,
    pub eigenvalues: [f64; 2],
    pub rotation: Mat2,
    pub s: f64,
}

impl AngularBlock {
    pub fn new(twice_j: u32, zalpha: f64) -> Result<Self> {
        let (s, lp, lm) = dirac_s_and_lambdas(twice_j, zalpha)?;
        let j = twice_j as f64 / 2.0;
        let big_j = j + 0.5;
        let za2 = zalpha * zalpha;
        let off = Complex64::new(0.0, zalpha);
        let matrix = [
            [Complex64::new((j - 0.5) * (j + 0.5) - za2, 0.0), off],
            [off, Complex64::new((j + 0.5) * (j + 1.5) - za2, 0.0)],
        ];
        let q = zalpha / (big_j + s);
        let norm = ((big_j + s) / (2.0 * s)).sqrt();
        let rotation = [
            [Complex64::new(norm, 0.0), Complex64::new(0.0, q * norm)],
            [Complex64::new(0.0, -q * norm), Complex64::new(norm, 0.0)],
        ];
        Ok(AngularBlock {
            matrix,
            eigenvalues: [lp * (lp + 1.0), lm * (lm + 1.0)],
            rotation,
            s,
        })
    }

    /// Rᵀ X R
    pub fn transform(&self, x: &Mat2) -> Mat2 {
        mat2_mul(&mat2_transpose(&self.rotation), &mat2_mul(x, &self.rotation))
    }

    /// Rᵀ σ_x R: the r̂·σ structure of w′ seen from the λ± channels,
    /// ((−iZα/s, J/s), (J/s, iZα/s)) with J = j + ½.
    pub fn rotated_coupling(&self) -> Mat2 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        self.transform(&[[zero, one], [one, zero]])
    }
}

/// κ′ = −iħ/(2mc), so that w′ = κ′ dv/dr.
pub fn dirac_offdiag_coefficient(constants: &PhysicalConstants) -> Complex64 {
    Complex64::new(0.0, -constants.hbar / (2.0 * constants.m * constants.c))
}

/// How w′ enters the λ± channels of the squared Dirac equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingForm {
    /// w′ transformed into the eigenbasis of the angular block: diagonal
    /// ∓iZα/s pieces plus a J/s off-diagonal coupling. Reproduces the
    /// first-order Dirac spectrum.
    #[default]
    Rotated,
    /// w′ only on the off-diagonal, with unit coefficient.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelLambdas {
    Single(f64),
    Pair { plus: f64, minus: f64, s: f64 },
}

/// Per-equation effective data; all energy maps are analytic in E′.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    pub kind: EquationKind,
    pub lambdas: ChannelLambdas,
    pub coulomb_z: f64,
    pub constants: PhysicalConstants,
    /// Coefficients multiplying κ′ dv/dr: `[[λ₊λ₊, λ₊λ₋], [λ₋λ₊, λ₋λ₋]]`.
    pub coupling: Option<Mat2>,
    pub coupling_form: CouplingForm,
}

impl EffectiveChannel {
    pub fn new(kind: EquationKind, coulomb_z: f64, constants: PhysicalConstants, form: CouplingForm) -> Result<Self> {
        kind.validate()?;
        let za = zalpha(coulomb_z, &constants);
        let (lambdas, coupling) = match kind {
            EquationKind::Schrodinger { l } => (ChannelLambdas::Single(l as f64), None),
            EquationKind::KleinGordon { l } => (ChannelLambdas::Single(kg_lambda(l, za)?), None),
            EquationKind::Dirac { twice_j } => {
                let block = AngularBlock::new(twice_j, za)?;
                let zero = Complex64::new(0.0, 0.0);
                let one = Complex64::new(1.0, 0.0);
                let coupling = match form {
                    CouplingForm::Rotated => block.rotated_coupling(),
                    CouplingForm::Literal => [[zero, one], [one, zero]],
                };
                (
                    ChannelLambdas::Pair {
                        plus: block.s - 1.0,
                        minus: block.s,
                        s: block.s,
                    },
                    Some(coupling),
                )
            }
        };
        Ok(EffectiveChannel {
            kind,
            lambdas,
            coulomb_z,
            constants,
            coupling,
            coupling_form: form,
        })
    }

    pub fn lambda_list(&self) -> Vec<f64> {
        match self.lambdas {
            ChannelLambdas::Single(l) => vec![l],
            ChannelLambdas::Pair { plus, minus, .. } => vec![plus, minus],
        }
    }

    pub fn zeff(&self, e_prime: Complex64) -> Complex64 {
        if self.kind.is_relativistic() {
            kg_effective_charge(e_prime, self.coulomb_z, &self.constants)
        } else {
            Complex64::new(self.coulomb_z, 0.0)
        }
    }

    pub fn eps(&self, e_prime: Complex64) -> Complex64 {
        if self.kind.is_relativistic() {
            kg_effective_energy(e_prime, &self.constants)
        } else {
            e_prime
        }
    }

    pub fn weights(&self, e_prime: Complex64) -> ComponentWeights {
        if self.kind.is_relativistic() {
            kg_component_weights(e_prime, &self.constants)
        } else {
            ComponentWeights::plain()
        }
    }

    pub fn offdiag_coefficient(&self) -> Option<Complex64> {
        self.coupling.map(|_| dirac_offdiag_coefficient(&self.constants))
    }
}
