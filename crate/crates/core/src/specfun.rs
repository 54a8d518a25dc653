//! Complex special functions used by the basis and the Green's matrix.
//!
//! Everything here is a pure function of its arguments. Quadrature rules are
//! immutable once built and can be shared between threads.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Errors raised by the special-function layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecFunError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(
        "continued fraction did not converge after {terms} terms \
         (last convergent {last}, previous {previous})"
    )]
    Convergence {
        terms: usize,
        last: Complex64,
        previous: Complex64,
    },
    #[error("symmetric eigensolve failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, SpecFunError>;

// B_{2k} / (2k (2k-1)) for k = 1..8
const STIRLING_COEF: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

fn ln_gamma_right(z: Complex64) -> Complex64 {
    // Re z >= 0.5
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    if z.norm() > 12.0 {
        let inv = z.inv();
        let inv2 = inv * inv;
        let mut series = Complex64::new(0.0, 0.0);
        let mut pow = inv;
        for c in STIRLING_COEF {
            series += pow * c;
            pow *= inv2;
        }
        (z - 0.5) * z.ln() - z + half_ln_2pi + series
    } else {
        // shift into the asymptotic region: Γ(z) = Γ(z+n) / (z (z+1) … (z+n−1))
        let mut shifted = z;
        let mut prod = Complex64::new(1.0, 0.0);
        while shifted.norm() <= 12.0 {
            prod *= shifted;
            shifted += 1.0;
        }
        ln_gamma_right(shifted) - prod.ln()
    }
}

fn wrap_phase(mut phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    phi = (phi + PI).rem_euclid(two_pi) - PI;
    if phi <= -PI {
        phi += two_pi;
    }
    phi
}

/// Principal-branch logarithm of Γ(z).
///
/// The imaginary part is reduced to (−π, π]. Poles (z = 0, −1, −2, …) are a
/// domain error.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if is_gamma_pole(z) {
        return Err(SpecFunError::Domain(format!("Γ has a pole at {z}")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecFunError::Domain(format!("non-finite argument {z}")));
    }
    let raw = if z.re < 0.5 {
        // reflection: Γ(z) Γ(1−z) = π / sin(πz)
        let s = (z * PI).sin();
        Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma_right(Complex64::new(1.0, 0.0) - z)
    } else {
        ln_gamma_right(z)
    };
    Ok(Complex64::new(raw.re, wrap_phase(raw.im)))
}

/// ln Γ(x) for real x > 0.
pub fn ln_gamma_pos(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma_right(Complex64::new(x, 0.0)).re
}

/// Generalized Laguerre values L_0^α(x) … L_{n_max}^α(x) by upward recurrence.
pub fn laguerre_sequence(alpha: f64, x: f64, n_max: usize) -> Result<Vec<f64>> {
    if alpha <= -1.0 || !alpha.is_finite() {
        return Err(SpecFunError::Domain(format!(
            "Laguerre parameter must exceed -1, got {alpha}"
        )));
    }
    if x < 0.0 || !x.is_finite() {
        return Err(SpecFunError::Domain(format!(
            "Laguerre argument must be non-negative, got {x}"
        )));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return Ok(out);
    }
    out.push(alpha + 1.0 - x);
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + alpha + 1.0 - x) * out[n] - (nf + alpha) * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    Ok(out)
}

/// Returns (L_n, L_{n−1}, ln_scale) with the true values equal to the first
/// two entries times exp(ln_scale). Rescales on the fly so large arguments
/// do not overflow.
fn laguerre_pair_scaled(alpha: f64, x: f64, n: usize) -> (f64, f64, f64) {
    let mut prev = 1.0;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    let mut cur = alpha + 1.0 - x;
    let mut ln_scale = 0.0;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e150 {
            prev /= mag;
            cur /= mag;
            ln_scale += mag.ln();
        }
    }
    (cur, prev, ln_scale)
}

/// Gauss rule for the weight x^α e^(−x) on (0, ∞).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Natural logs of the weights; finite even where `weights` underflows.
    pub ln_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w_i f(x_i).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Golub-Welsch rule with Newton-polished nodes.
///
/// Nodes come from the eigenvalues of the Laguerre Jacobi matrix; each node is
/// then refined by Newton steps on L_n^α and the weights are taken from the
/// closed form w = Γ(n+α+1) x / (n! (n+α)² L_{n−1}(x)²), evaluated in logs.
pub fn gauss_laguerre_rule(alpha: f64, n: usize) -> Result<QuadratureRule> {
    if alpha <= -1.0 || !alpha.is_finite() {
        return Err(SpecFunError::Domain(format!(
            "quadrature exponent must exceed -1, got {alpha}"
        )));
    }
    if n == 0 {
        return Err(SpecFunError::Domain("quadrature needs at least one node".into()));
    }
    let ln_gamma_a1 = ln_gamma_pos(alpha + 1.0);
    if n == 1 {
        return Ok(QuadratureRule {
            alpha,
            nodes: vec![alpha + 1.0],
            weights: vec![ln_gamma_a1.exp()],
            ln_weights: vec![ln_gamma_a1],
        });
    }

    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + alpha + 1.0
        } else if i + 1 == j {
            (j as f64 * (j as f64 + alpha)).sqrt()
        } else if j + 1 == i {
            (i as f64 * (i as f64 + alpha)).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 10_000)
        .ok_or_else(|| SpecFunError::Eigen(format!("Jacobi matrix of size {n} did not converge")))?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let nf = n as f64;
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (ln, lnm1, _) = laguerre_pair_scaled(alpha, *x, n);
            // x L_n' = n L_n − (n+α) L_{n−1}
            let deriv = (nf * ln - (nf + alpha) * lnm1) / *x;
            if deriv == 0.0 {
                break;
            }
            let step = ln / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs() {
                break;
            }
        }
    }
    nodes.sort_by(|a, b| a.total_cmp(b));
    if nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpecFunError::Eigen(
            "Laguerre nodes are not strictly positive and increasing".into(),
        ));
    }

    let ln_pref = ln_gamma_pos(nf + alpha + 1.0) - ln_gamma_pos(nf + 1.0) - 2.0 * (nf + alpha).ln();
    let ln_weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, lnm1, ln_scale) = laguerre_pair_scaled(alpha, x, n);
            ln_pref + x.ln() - 2.0 * (lnm1.abs().ln() + ln_scale)
        })
        .collect();
    let weights = ln_weights.iter().map(|l| l.exp()).collect();
    Ok(QuadratureRule {
        alpha,
        nodes,
        weights,
        ln_weights,
    })
}

/// Parameters of the ratio ₂F₁(a, b+1; c+1; z) / ₂F₁(a, b; c; z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp2F1RatioParams {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub z: Complex64,
}

/// Converged continued-fraction value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfValue {
    pub value: Complex64,
    pub iterations: usize,
}

pub const CF_DEFAULT_MAX_TERMS: usize = 100_000;
pub const CF_TOLERANCE: f64 = 1e-14;
const LENTZ_TINY: f64 = 1e-300;

/// Gauss continued fraction for ₂F₁(a,b+1;c+1;z)/₂F₁(a,b;c;z).
pub fn hyp2f1_ratio(params: &Hyp2F1RatioParams) -> Result<CfValue> {
    hyp2f1_ratio_with(params, CF_DEFAULT_MAX_TERMS)
}

/// As [`hyp2f1_ratio`] with an explicit cap on the number of partial
/// numerators.
///
/// The fraction is 1 / (1 + d₁z / (1 + d₂z / (1 + …))) with
/// d_{2k+1} = −(a+k)(c−b+k)/((c+2k)(c+2k+1)) and
/// d_{2k} = −(b+k)(c−a+k)/((c+2k−1)(c+2k)), evaluated by modified Lentz.
pub fn hyp2f1_ratio_with(params: &Hyp2F1RatioParams, max_terms: usize) -> Result<CfValue> {
    let Hyp2F1RatioParams { a, b, c, z } = *params;
    if is_gamma_pole(c) {
        return Err(SpecFunError::Domain(format!(
            "c = {c} is a non-positive integer"
        )));
    }
    if z.im == 0.0 && z.re >= 1.0 {
        return Err(SpecFunError::Domain(format!(
            "z = {z} lies on the branch cut [1, ∞)"
        )));
    }
    if ![a, b, c, z].iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(SpecFunError::Domain("non-finite continued-fraction input".into()));
    }

    let tiny = Complex64::new(LENTZ_TINY, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut f = one;
    let mut cc = f;
    let mut dd = Complex64::new(0.0, 0.0);
    let mut previous = f;
    for j in 1..=max_terms {
        let coef = if j % 2 == 1 {
            let k = ((j - 1) / 2) as f64;
            -(a + k) * (c - b + k) / ((c + 2.0 * k) * (c + 2.0 * k + 1.0))
        } else {
            let k = (j / 2) as f64;
            -(b + k) * (c - a + k) / ((c + 2.0 * k - 1.0) * (c + 2.0 * k))
        };
        let aj = coef * z;
        dd = one + aj * dd;
        if dd == Complex64::new(0.0, 0.0) {
            dd = tiny;
        }
        cc = one + aj / cc;
        if cc == Complex64::new(0.0, 0.0) {
            cc = tiny;
        }
        dd = dd.inv();
        let delta = cc * dd;
        previous = f;
        f *= delta;
        if !(f.re.is_finite() && f.im.is_finite()) {
            return Err(SpecFunError::Domain(format!(
                "continued fraction overflowed at term {j}"
            )));
        }
        if (delta - one).norm() < CF_TOLERANCE {
            return Ok(CfValue {
                value: f.inv(),
                iterations: j,
            });
        }
    }
    Err(SpecFunError::Convergence {
        terms: max_terms,
        last: f.inv(),
        previous: previous.inv(),
    })
}
