//! Finite-difference reference solver for single-channel effective radial
//! equations, independent of the CS machinery.
//!
//! With r = eˣ and ψ(r) = e^(x/2) u(x) the radial equation
//!
//! ```text
//! −ħ²/2m ψ″ + [ħ² λ(λ+1)/(2m r²) + Z′/r + w(r)] ψ = ε ψ
//! ```
//!
//! becomes u″ = Q(x) u with Q = (λ+½)² + r² (2m/ħ²)(Z′/r + w − ε), which has
//! no first-derivative term and stays bounded at the origin even when w has
//! 1/r² pieces. Numerov on a uniform x grid, outward from a Frobenius start
//! and inward from e^(−κr), matched by a Wronskian at the outer turning point.

use crate::csbasis::{PotentialTerm, RadialPotential, TermList};
use crate::effective::{EffectiveChannel, EquationKind};
use crate::greens::PhysicalConstants;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle domain error: {0}")]
    Domain(String),
    #[error("the oracle handles single-channel problems only ({0})")]
    Unsupported(String),
    #[error("invalid oracle setup: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

pub const MIN_STEPS: usize = 20_000;
const RESCALE: f64 = 1e200;
/// κ·r and μ_min·r at the outer boundary.
const OUTER_DECAY: f64 = 40.0;
const OUTER_TAIL: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingProblem {
    pub lambda: f64,
    pub channel: EffectiveChannel,
    pub potential: RadialPotential,
    /// Outermost radius; at E′ the grid stops earlier, where the level has
    /// decayed (κr = 40) and the short-range tail is gone (μ_min·r = 25).
    pub r_max: f64,
    pub steps: usize,
    /// Matching index is clamped to this fraction range of the grid.
    pub match_range: (f64, f64),
    /// Hard wall u(r_w) = 0 replacing the Frobenius start. Required when the
    /// 1/r² part of the effective potential is supercritical; the levels
    /// then depend on r_w and should be checked for stability in it.
    pub inner_wall: Option<f64>,
    v: TermList,
    v_over_r: TermList,
    v_sq: TermList,
}

impl ShootingProblem {
    /// Schrödinger or Klein-Gordon problem; `r_max` chosen so that the
    /// short-range tail and bound states down to `eps_hi` have decayed.
    pub fn new(kind: EquationKind, potential: RadialPotential, constants: PhysicalConstants, eps_hi: f64) -> Result<Self> {
        if let EquationKind::Dirac { .. } = kind {
            return Err(OracleError::Unsupported(kind.to_string()));
        }
        let channel = EffectiveChannel::new(kind, potential.coulomb_z, constants, Default::default())
            .map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let lambda = channel.lambda_list()[0];
        Self::with_channel(lambda, channel, potential, eps_hi)
    }

    /// Any single λ with the channel's energy maps (e.g. one decoupled Dirac
    /// tower).
    pub fn with_channel(lambda: f64, channel: EffectiveChannel, potential: RadialPotential, eps_hi: f64) -> Result<Self> {
        potential.validate().map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        if eps_hi >= 0.0 {
            return Err(OracleError::Domain(format!("ε = {eps_hi} is not below threshold")));
        }
        let k = &channel.constants;
        let kappa = (-2.0 * k.m * eps_hi).sqrt() / k.hbar;
        let mut r_max = OUTER_DECAY / kappa;
        if let Some(mu) = potential.short_range.min_decay() {
            r_max = r_max.max(OUTER_TAIL / mu);
        }
        let r_max = r_max.min(5000.0);
        let v = potential.short_range.clone();
        Ok(ShootingProblem {
            lambda,
            channel,
            r_max,
            steps: MIN_STEPS,
            match_range: (0.1, 0.9),
            inner_wall: None,
            v_over_r: v.over_r(),
            v_sq: v.square(),
            v,
            potential,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(OracleError::InvalidInput(format!("steps = {} below {MIN_STEPS}", self.steps)));
        }
        if let Some(mu) = self.potential.short_range.min_decay() {
            if self.r_max * mu < 25.0 {
                return Err(OracleError::InvalidInput(format!(
                    "r_max·μ_min = {} must be at least 25",
                    self.r_max * mu
                )));
            }
        }
        Ok(())
    }

    /// True when the 1/r² part of the effective potential at E′ overwhelms
    /// the centrifugal term, so the Frobenius start does not exist and an
    /// [`inner_wall`](Self::inner_wall) is needed.
    pub fn supercritical(&self, e_prime: f64) -> bool {
        let k = &self.channel.constants;
        let s = 2.0 * k.m / (k.hbar * k.hbar);
        (self.lambda + 0.5).powi(2) + s * self.effective_terms(e_prime).laurent_coefficient(-2) <= 0.0
    }

    /// Z′/r + w at this energy as one term list (real energies only).
    fn effective_terms(&self, e_prime: f64) -> TermList {
        let e = Complex64::new(e_prime, 0.0);
        let zp = self.channel.zeff(e).re;
        let w = self.channel.weights(e);
        let z = self.potential.coulomb_z;
        let mut terms = vec![PotentialTerm::new(zp, -1, 0.0)];
        terms.extend(self.v.scaled(w.c1.re).0);
        if w.c2.re != 0.0 {
            terms.extend(self.v_over_r.scaled(w.c2.re * z).0);
        }
        if w.c3.re != 0.0 {
            terms.extend(self.v_sq.scaled(w.c3.re).0);
        }
        TermList::new(terms)
    }
}

/// Integration workspace at one energy.
struct Grid {
    x0: f64,
    h: f64,
    q: Vec<f64>,
    nu: f64,
    start_a: f64,
    kappa: f64,
    turning: usize,
    wall: bool,
}

impl ShootingProblem {
    fn grid(&self, e_prime: f64, steps: usize) -> Result<Grid> {
        self.validate()?;
        let eps = self.channel.eps(Complex64::new(e_prime, 0.0)).re;
        if eps >= 0.0 {
            return Err(OracleError::Domain(format!("ε(E′ = {e_prime}) = {eps} is not below threshold")));
        }
        let k = &self.channel.constants;
        let s = 2.0 * k.m / (k.hbar * k.hbar);
        let terms = self.effective_terms(e_prime);
        let l2 = (self.lambda + 0.5).powi(2);
        let c_m2 = terms.laurent_coefficient(-2);
        let c_m1 = terms.laurent_coefficient(-1);
        let nu2 = l2 + s * c_m2;
        if nu2 <= 0.0 && self.inner_wall.is_none() {
            return Err(OracleError::Domain(format!(
                "effective potential falls to the centre ((λ+½)² + 2m C₋₂/ħ² = {nu2}); set an inner wall"
            )));
        }
        let nu = nu2.max(0.0).sqrt();
        let x0 = match self.inner_wall {
            Some(rw) if rw > 0.0 && rw < self.r_max => rw.ln(),
            Some(rw) => return Err(OracleError::InvalidInput(format!("inner wall {rw} outside (0, r_max)"))),
            None => (self.r_max * 1e-6).ln(),
        };
        // a deeper level decays faster: stop where it has, which keeps the
        // outer Numerov steps stable (h²Q small) for any E′ below eps_hi
        let kappa = (-2.0 * k.m * eps).sqrt() / k.hbar;
        let mut r_out = OUTER_DECAY / kappa;
        if let Some(mu) = self.potential.short_range.min_decay() {
            r_out = r_out.max(OUTER_TAIL / mu);
        }
        let r_out = r_out.min(self.r_max);
        if x0 >= r_out.ln() {
            return Err(OracleError::InvalidInput(format!("inner wall beyond the outer radius {r_out}")));
        }
        let x1 = r_out.ln();
        let h = (x1 - x0) / steps as f64;
        let q: Vec<f64> = (0..=steps)
            .map(|i| {
                let r = (x0 + h * i as f64).exp();
                l2 + r * r * s * (terms.value(r) - eps)
            })
            .collect();
        let lo = (self.match_range.0 * steps as f64) as usize;
        let hi = (self.match_range.1 * steps as f64) as usize;
        let mut turning = lo;
        for i in (lo..hi).rev() {
            if q[i] < 0.0 {
                turning = i;
                break;
            }
        }
        Ok(Grid {
            x0,
            h,
            q,
            nu,
            start_a: s * c_m1 / (2.0 * nu + 1.0),
            kappa,
            turning: turning.clamp(lo.max(2), hi.min(steps - 2)),
            wall: self.inner_wall.is_some(),
        })
    }
}

/// u_{i+1} from u_i, u_{i−1}.
#[inline]
fn numerov_step(h2: f64, q_prev: f64, q_cur: f64, q_next: f64, u_prev: f64, u_cur: f64) -> f64 {
    let f = |q: f64| 1.0 - h2 * q / 12.0;
    ((12.0 - 10.0 * f(q_cur)) * u_cur - f(q_prev) * u_prev) / f(q_next)
}

impl Grid {
    fn r(&self, i: usize) -> f64 {
        (self.x0 + self.h * i as f64).exp()
    }

    fn outward_start(&self, i: usize) -> f64 {
        if self.wall {
            return i as f64;
        }
        let r = self.r(i);
        r.powf(self.nu) * (1.0 + self.start_a * r)
    }

    fn inward_start(&self, i: usize) -> f64 {
        let r = self.r(i);
        // ψ = e^(−κr), u = ψ e^(−x/2); shifted by κ r_end to stay in range
        let r_end = self.r(self.q.len() - 1);
        (-self.kappa * (r - r_end)).exp() / r.sqrt()
    }

    /// Outward solution up to `end` (inclusive), rescaled on the fly; also
    /// returns the number of sign changes.
    fn outward(&self, end: usize, store: bool) -> (Vec<f64>, f64, f64, usize) {
        let h2 = self.h * self.h;
        let mut u_prev = self.outward_start(0);
        let mut u_cur = self.outward_start(1);
        let mut values = if store { vec![u_prev, u_cur] } else { Vec::new() };
        let mut nodes = 0;
        for i in 1..end {
            let next = numerov_step(h2, self.q[i - 1], self.q[i], self.q[i + 1], u_prev, u_cur);
            if next * u_cur < 0.0 {
                nodes += 1;
            }
            u_prev = u_cur;
            u_cur = next;
            if store {
                values.push(next);
            }
            if u_cur.abs() > RESCALE {
                u_prev /= RESCALE;
                u_cur /= RESCALE;
                values.iter_mut().for_each(|v| *v /= RESCALE);
            }
        }
        (values, u_prev, u_cur, nodes)
    }

    /// Inward solution from the last grid point down to `start` (inclusive),
    /// stored in ascending index order when requested.
    fn inward(&self, start: usize, store: bool) -> (Vec<f64>, f64, f64) {
        let h2 = self.h * self.h;
        let n = self.q.len() - 1;
        let mut u_next = self.inward_start(n);
        let mut u_cur = self.inward_start(n - 1);
        let mut values = if store { vec![u_next, u_cur] } else { Vec::new() };
        for i in (start + 1..n).rev() {
            let prev = numerov_step(h2, self.q[i + 1], self.q[i], self.q[i - 1], u_next, u_cur);
            u_next = u_cur;
            u_cur = prev;
            if store {
                values.push(prev);
            }
            if u_cur.abs() > RESCALE {
                u_next /= RESCALE;
                u_cur /= RESCALE;
                values.iter_mut().for_each(|v| *v /= RESCALE);
            }
        }
        values.reverse();
        // (u[start], u[start+1])
        (values, u_cur, u_next)
    }
}

impl ShootingProblem {
    /// Normalized Wronskian of the outward and inward solutions at the
    /// matching point. Continuous in E′; zero at eigenvalues.
    pub fn match_defect(&self, e_prime: f64) -> Result<f64> {
        self.defect_with_steps(e_prime, self.steps)
    }

    fn defect_with_steps(&self, e_prime: f64, steps: usize) -> Result<f64> {
        let g = self.grid(e_prime, steps)?;
        let m = g.turning;
        let (_, o0, o1, _) = g.outward(m + 1, false);
        let (_, i0, i1) = g.inward(m, false);
        let w = o1 * i0 - o0 * i1;
        Ok(w / (o0.hypot(o1) * i0.hypot(i1)))
    }

    /// Nodes of the outward solution over the whole grid: the number of
    /// eigenvalues below E′.
    pub fn node_count(&self, e_prime: f64) -> Result<usize> {
        let g = self.grid(e_prime, self.steps)?;
        Ok(g.outward(g.q.len() - 1, false).3)
    }

    /// Bisected root of the defect on [lo, hi] at a given step count.
    pub fn root_with_steps(&self, lo: f64, hi: f64, steps: usize) -> Result<f64> {
        if steps < MIN_STEPS {
            return Err(OracleError::InvalidInput(format!("steps = {steps} below {MIN_STEPS}")));
        }
        self.bisect(lo, hi, steps)
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, steps: usize) -> Result<f64> {
        let mut flo = self.defect_with_steps(lo, steps)?;
        for _ in 0..200 {
            if hi - lo <= 1e-13 * lo.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let fm = self.defect_with_steps(mid, steps)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Bound states on [lo, hi]: defect sign changes on `grid` cells that
    /// coincide with a change in node count, bisected at h and h/2 and
    /// Richardson-extrapolated (E₂ + (E₂ − E₁)/15).
    pub fn bound_states(&self, lo: f64, hi: f64, grid: usize) -> Result<Vec<OracleLevel>> {
        let pts = scan_points(lo, hi, grid)?;
        self.bracketing_cells(&pts)?
            .par_iter()
            .map(|&i| self.refine(pts[i], pts[i + 1]))
            .collect()
    }

    fn bracketing_cells(&self, pts: &[f64]) -> Result<Vec<usize>> {
        let vals: Vec<(f64, usize)> = pts
            .par_iter()
            .map(|&e| Ok((self.match_defect(e)?, self.node_count(e)?)))
            .collect::<Result<_>>()?;
        Ok((0..pts.len() - 1)
            .filter(|&i| vals[i].0 * vals[i + 1].0 <= 0.0 && vals[i].1 != vals[i + 1].1)
            .collect())
    }

    fn refine(&self, lo: f64, hi: f64) -> Result<OracleLevel> {
        let e1 = self.bisect(lo, hi, self.steps)?;
        let e2 = self.bisect(lo, hi, 2 * self.steps)?;
        Ok(OracleLevel {
            coarse: e1,
            fine: e2,
            energy: e2 + (e2 - e1) / 15.0,
        })
    }

    /// ⟨f⟩ = ∫ψ² f dr / ∫ψ² dr from the matched Numerov solution at `e_prime`.
    pub fn expectation(&self, e_prime: f64, f: &TermList) -> Result<f64> {
        let g = self.grid(e_prime, 2 * self.steps)?;
        let m = g.turning;
        let (out, _, _, _) = g.outward(m, true);
        let (inn, _, _) = g.inward(m, true);
        let scale = out[m] / inn[0];
        let u: Vec<f64> = out.iter().copied().chain(inn.iter().skip(1).map(|v| v * scale)).collect();
        // ψ² dr = r² u² dx; Simpson on the uniform x grid
        let mut num = 0.0;
        let mut den = 0.0;
        let n = u.len() - 1;
        for (i, &ui) in u.iter().enumerate() {
            let wgt = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let r = g.r(i);
            let dens = wgt * r * r * ui * ui;
            num += dens * f.value(r);
            den += dens;
        }
        Ok(num / den)
    }
}

/// One oracle eigenvalue with its two step sizes.
fn scan_points(lo: f64, hi: f64, grid: usize) -> Result<Vec<f64>> {
    if !(lo < hi) || grid < 2 {
        return Err(OracleError::InvalidInput(format!("bad interval [{lo}, {hi}] / grid {grid}")));
    }
    Ok((0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLevel {
    pub coarse: f64,
    pub fine: f64,
    pub energy: f64,
}

impl OracleLevel {
    /// |E(h) − E(h/2)|
    pub fn step_change(&self) -> f64 {
        (self.coarse - self.fine).abs()
    }
}
