//! Determinant condition det((g^C)⁻¹ − w̃) = 0 and its roots.
//!
//! Bound states are sign changes of the (real) determinant on the real E′
//! axis; resonances are complex zeros found by Muller iteration on the
//! principal-root continuation of the Green's matrix. Every evaluation is a
//! pure function of E′, so scans parallelize over energies.

use crate::csbasis::{
    potential_matrix, separable_truncate, unit_operator_matrix, BasisError, BasisParams, PotentialMatrix, RadialPotential,
};
use crate::effective::{ChannelLambdas, CouplingForm, EffectiveChannel, EffectiveError, EquationKind};
use crate::greens::{wavenumber, wavenumber_continued, EnergyPoint, GreensError, GreensWorkspace, PhysicalConstants, Sheet};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Greens(#[from] GreensError),
    #[error(transparent)]
    Effective(#[from] EffectiveError),
    #[error("invalid search: {0}")]
    InvalidSearch(String),
    #[error("null space of dimension {dimension} at E′ = {e_prime}")]
    Multiplicity { e_prime: Complex64, dimension: usize },
    #[error("singular matrix where a factorization was required")]
    Singular,
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// Widths below this are reported as unresolved rather than as signed numbers.
pub const WIDTH_RESOLUTION: f64 = 1e-12;

/// Everything that defines one eigenvalue problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub kind: EquationKind,
    pub constants: PhysicalConstants,
    pub potential: RadialPotential,
    pub basis: BasisParams,
    pub coupling: CouplingForm,
}

impl Problem {
    pub fn with_basis(&self, basis: BasisParams) -> Self {
        Problem { basis, ..self.clone() }
    }
}

/// Which branch of k = √(2mε)/ħ the evaluator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetMode {
    Physical,
    Unphysical,
    /// Principal root, Re k ≥ 0: analytic across the positive real axis.
    Continued,
}

impl SheetMode {
    fn point(self, eps: Complex64, constants: &PhysicalConstants) -> EnergyPoint {
        match self {
            SheetMode::Physical => wavenumber(eps, constants, Sheet::Physical),
            SheetMode::Unphysical => wavenumber(eps, constants, Sheet::Unphysical),
            SheetMode::Continued => wavenumber_continued(eps, constants),
        }
    }
}

/// ln|D| and arg D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: f64,
}

impl LogDet {
    /// D · e^(−reference)
    pub fn scaled(&self, reference: f64) -> Complex64 {
        Complex64::from_polar((self.ln_abs - reference).exp(), self.phase)
    }

    /// Sign of the real part; meaningful on the real axis below threshold.
    pub fn real_sign(&self) -> f64 {
        if self.ln_abs == f64::NEG_INFINITY {
            0.0
        } else {
            self.phase.cos().signum()
        }
    }
}

struct ChannelMatrices {
    v1: DMatrix<f64>,
    v2: Option<DMatrix<f64>>,
    v3: Option<DMatrix<f64>>,
    dv: Option<DMatrix<f64>>,
}

/// Cached potential matrices for one problem; immutable and shareable.
pub struct DeterminantEvaluator {
    pub problem: Problem,
    pub channel: EffectiveChannel,
    pub sheet: SheetMode,
    blocks: Vec<ChannelMatrices>,
    /// ⟨λ₊| dv/dr |λ₋⟩
    mixed: Option<DMatrix<f64>>,
    greens: Vec<GreensWorkspace>,
}

impl std::fmt::Debug for DeterminantEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeterminantEvaluator")
            .field("kind", &self.problem.kind)
            .field("basis", &self.problem.basis)
            .field("sheet", &self.sheet)
            .finish()
    }
}

impl DeterminantEvaluator {
    pub fn new(problem: &Problem) -> Result<Self> {
        problem.basis.validate()?;
        problem.potential.validate()?;
        problem.constants.validate()?;
        let channel = EffectiveChannel::new(problem.kind, problem.potential.coulomb_z, problem.constants, problem.coupling)?;
        let v = &problem.potential.short_range;
        let relativistic = problem.kind.is_relativistic();
        let dirac = matches!(channel.lambdas, ChannelLambdas::Pair { .. });
        let lambdas = channel.lambda_list();

        let mut blocks = Vec::with_capacity(lambdas.len());
        for &lam in &lambdas {
            let mat = |f: &crate::csbasis::TermList| -> Result<DMatrix<f64>> {
                Ok(potential_matrix(f, lam, lam, &problem.basis)?.entries)
            };
            blocks.push(ChannelMatrices {
                v1: mat(v)?,
                v2: if relativistic { Some(mat(&v.over_r())?) } else { None },
                v3: if relativistic { Some(mat(&v.square())?) } else { None },
                dv: if dirac { Some(mat(&v.derivative())?) } else { None },
            });
        }
        let mixed = if dirac {
            Some(potential_matrix(&v.derivative(), lambdas[0], lambdas[1], &problem.basis)?.entries)
        } else {
            None
        };
        let mut greens = Vec::with_capacity(lambdas.len());
        for &lam in &lambdas {
            greens.push(GreensWorkspace::new(
                lam,
                Complex64::new(problem.potential.coulomb_z, 0.0),
                problem.basis.b,
                problem.basis.n,
                problem.constants,
            )?);
        }
        Ok(DeterminantEvaluator {
            problem: problem.clone(),
            channel,
            sheet: SheetMode::Physical,
            blocks,
            mixed,
            greens,
        })
    }

    pub fn with_sheet(mut self, sheet: SheetMode) -> Self {
        self.sheet = sheet;
        self
    }

    pub fn channels(&self) -> usize {
        self.blocks.len()
    }

    /// Size of the assembled matrix (N or 2N).
    pub fn dimension(&self) -> usize {
        self.channels() * self.problem.basis.n
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.channel.lambda_list()
    }

    /// w̃(E′): the separable (double-inversion) form of the effective
    /// short-range potential, including the Dirac coupling.
    pub fn separable_potential(&self, e_prime: Complex64) -> Result<DMatrix<Complex64>> {
        let np = self.problem.basis.n_prime;
        let n = self.problem.basis.n;
        let w = self.channel.weights(e_prime);
        let z = self.problem.potential.coulomb_z;
        let nch = self.channels();
        let mut full = DMatrix::<Complex64>::zeros(nch * np, nch * np);
        let kappa = self.channel.offdiag_coefficient();
        for (a, blk) in self.blocks.iter().enumerate() {
            let mut view = full.view_mut((a * np, a * np), (np, np));
            view.zip_apply(&blk.v1, |x, v| *x += w.c1 * v);
            if let Some(v2) = &blk.v2 {
                view.zip_apply(v2, |x, v| *x += w.c2 * z * v);
            }
            if let Some(v3) = &blk.v3 {
                view.zip_apply(v3, |x, v| *x += w.c3 * v);
            }
            if let (Some(dv), Some(kap), Some(coup)) = (&blk.dv, kappa, self.channel.coupling) {
                let f = kap * coup[a][a];
                view.zip_apply(dv, |x, v| *x += f * v);
            }
        }
        if let (Some(x), Some(kap), Some(coup)) = (&self.mixed, kappa, self.channel.coupling) {
            let f01 = kap * coup[0][1];
            let f10 = kap * coup[1][0];
            full.view_mut((0, np), (np, np)).zip_apply(x, |e, v| *e += f01 * v);
            full.view_mut((np, 0), (np, np)).zip_apply(&x.transpose(), |e, v| *e += f10 * v);
        }
        if nch == 1 {
            return Ok(separable_truncate(&full, n)?);
        }
        // move the retained indices of both blocks to the front
        let keep: Vec<usize> = (0..nch).flat_map(|a| (0..n).map(move |i| a * np + i)).collect();
        let rest: Vec<usize> = (0..nch).flat_map(|a| (n..np).map(move |i| a * np + i)).collect();
        let order: Vec<usize> = keep.iter().chain(rest.iter()).copied().collect();
        let permuted = DMatrix::from_fn(order.len(), order.len(), |i, j| full[(order[i], order[j])]);
        Ok(separable_truncate(&permuted, keep.len())?)
    }

    /// Block-diagonal (g^C)⁻¹ at E′.
    pub fn greens_inverse(&self, e_prime: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.problem.basis.n;
        let eps = self.channel.eps(e_prime);
        let zeff = self.channel.zeff(e_prime);
        let point = self.sheet.point(eps, &self.problem.constants);
        let mut out = DMatrix::<Complex64>::zeros(self.dimension(), self.dimension());
        for (a, g) in self.greens.iter().enumerate() {
            let ws = GreensWorkspace { zeff, ..*g };
            out.view_mut((a * n, a * n), (n, n)).copy_from(&ws.greens_inverse(&point)?);
        }
        Ok(out)
    }

    /// (g^C)⁻¹ − w̃ at E′.
    pub fn assemble_matrix(&self, e_prime: Complex64) -> Result<DMatrix<Complex64>> {
        Ok(self.greens_inverse(e_prime)? - self.separable_potential(e_prime)?)
    }

    pub fn determinant(&self, e_prime: Complex64) -> Result<LogDet> {
        Ok(log_determinant(self.assemble_matrix(e_prime)?))
    }

    /// σ_min of the assembled matrix and the scale it is judged against:
    /// the largest of σ_max, ‖g⁻¹‖_F, ‖w̃‖_F and the tail-free J blocks. A zero
    /// of the determinant is a cancellation between these parts, so
    /// σ_min/scale is small there even for a 1×1 matrix with w̃ = 0.
    pub fn singular_extremes(&self, e_prime: Complex64) -> Result<(f64, f64)> {
        let g_inv = self.greens_inverse(e_prime)?;
        let w = self.separable_potential(e_prime)?;
        let sv = (&g_inv - &w).singular_values();
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sv.iter().copied().fold(0.0, f64::max);
        let eps = self.channel.eps(e_prime);
        let point = self.sheet.point(eps, &self.problem.constants);
        let zeff = self.channel.zeff(e_prime);
        let j_norm = self
            .greens
            .iter()
            .map(|g| GreensWorkspace { zeff, ..*g }.truncated_j(&point, self.problem.basis.n).norm_squared())
            .sum::<f64>()
            .sqrt();
        Ok((min, max.max(g_inv.norm()).max(w.norm()).max(j_norm)))
    }
}

/// Determinant from a partially pivoted LU factorization, as (ln|D|, arg D).
pub fn log_determinant(m: DMatrix<Complex64>) -> LogDet {
    let lu = m.lu();
    let parity: Complex64 = lu.p().determinant();
    let u = lu.u();
    let mut ln_abs = 0.0;
    let mut phase = parity.arg();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        ln_abs += d.norm().ln();
        phase += d.arg();
    }
    LogDet {
        ln_abs,
        phase: (phase + PI).rem_euclid(2.0 * PI) - PI,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootKind {
    Bound,
    Resonance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootResult {
    pub e_prime: Complex64,
    pub kind: RootKind,
    /// ln|D| at the root.
    pub ln_abs_det: f64,
    pub sigma_min: f64,
    /// Reference scale for `sigma_min`, see [`DeterminantEvaluator::singular_extremes`].
    pub sigma_max: f64,
    pub n: usize,
    pub n_prime: usize,
    pub b: f64,
    pub iterations: usize,
    /// False when |Im E′| is below [`WIDTH_RESOLUTION`]; the imaginary part is
    /// then reported as zero.
    pub width_resolved: bool,
}

impl RootResult {
    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_min / self.sigma_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSearch {
    pub interval: (f64, f64),
    pub grid: usize,
    /// Accept a bracketed sign change as a root only when
    /// σ_min ≤ `sigma_tolerance`·σ_max (rejects poles of the tail).
    pub sigma_tolerance: f64,
    /// Absolute refinement tolerance in E′.
    pub tolerance: f64,
}

impl BoundSearch {
    pub fn new(lo: f64, hi: f64) -> Self {
        BoundSearch {
            interval: (lo, hi),
            grid: 1000,
            sigma_tolerance: 1e-8,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SearchReport {
    pub roots: Vec<RootResult>,
    pub diagnostics: Vec<String>,
}

impl DeterminantEvaluator {
    /// Real zeros of D on `search.interval`, in ascending order.
    pub fn find_bound_states(&self, search: &BoundSearch) -> Result<SearchReport> {
        let (lo, hi) = search.interval;
        if !(lo < hi) || search.grid < 2 {
            return Err(SolverError::InvalidSearch(format!("bad interval [{lo}, {hi}] or grid {}", search.grid)));
        }
        let eps_hi = self.channel.eps(Complex64::new(hi, 0.0));
        if eps_hi.re >= 0.0 {
            return Err(SolverError::InvalidSearch(format!(
                "upper end {hi} maps to ε = {} at or above threshold",
                eps_hi.re
            )));
        }
        let eval = self.clone_for_sheet(SheetMode::Physical);
        let grid: Vec<f64> = (0..=search.grid)
            .map(|i| lo + (hi - lo) * i as f64 / search.grid as f64)
            .collect();
        let dets: Vec<LogDet> = grid
            .par_iter()
            .map(|&e| eval.determinant(Complex64::new(e, 0.0)))
            .collect::<Result<_>>()?;
        let signs: Vec<f64> = dets.iter().map(|d| d.real_sign()).collect();

        let mut report = SearchReport::default();
        let cells: Vec<usize> = (0..search.grid).filter(|&i| signs[i] * signs[i + 1] <= 0.0).collect();
        let refined: Vec<Result<Option<RootResult>>> = cells
            .par_iter()
            .map(|&i| {
                let ceiling = dets[i].ln_abs.min(dets[i + 1].ln_abs);
                eval.refine_bound(grid[i], grid[i + 1], signs[i], ceiling, search)
            })
            .collect();
        for (cell, r) in cells.iter().zip(refined) {
            match r? {
                Some(root) => report.roots.push(root),
                None => {
                    report.diagnostics.push(format!(
                        "sign change in [{}, {}] is a pole, not a zero",
                        grid[*cell],
                        grid[cell + 1]
                    ));
                    // a pole can share its cell with a zero of even multiplicity
                    if let Some(root) = eval.refine_touching(grid[*cell], grid[cell + 1], search)? {
                        report
                            .diagnostics
                            .push(format!("zero of even multiplicity at {} next to a pole", root.e_prime.re));
                        report.roots.push(root);
                    }
                }
            }
        }
        // zeros of even multiplicity (degenerate decoupled channels) leave the
        // sign alone; look for them at local minima of |D| instead
        let touching: Vec<usize> = (1..search.grid)
            .filter(|&i| {
                dets[i].ln_abs < dets[i - 1].ln_abs
                    && dets[i].ln_abs < dets[i + 1].ln_abs
                    && signs[i - 1] * signs[i] > 0.0
                    && signs[i] * signs[i + 1] > 0.0
            })
            .collect();
        let refined: Vec<Result<Option<RootResult>>> = touching
            .par_iter()
            .map(|&i| eval.refine_touching(grid[i - 1], grid[i + 1], search))
            .collect();
        for r in refined {
            if let Some(root) = r? {
                report
                    .diagnostics
                    .push(format!("zero of even multiplicity at {} (no sign change)", root.e_prime.re));
                report.roots.push(root);
            }
        }
        report.roots.sort_by(|a, b| a.e_prime.re.total_cmp(&b.e_prime.re));
        Ok(report)
    }

    /// Golden-section minimum of σ_min on [lo, hi]; a root if it passes the
    /// same σ test as a bracketed zero. (σ_min itself, not the ratio: the
    /// scale diverges at a pole of the tail.)
    fn refine_touching(&self, mut lo: f64, mut hi: f64, search: &BoundSearch) -> Result<Option<RootResult>> {
        let ratio = |e: f64| -> Result<f64> { Ok(self.singular_extremes(Complex64::new(e, 0.0))?.0) };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - g * (hi - lo);
        let mut b = lo + g * (hi - lo);
        let (mut fa, mut fb) = (ratio(a)?, ratio(b)?);
        let mut iterations = 2;
        while hi - lo > search.tolerance.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs())) && iterations < 200 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - g * (hi - lo);
                fa = ratio(a)?;
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + g * (hi - lo);
                fb = ratio(b)?;
            }
            iterations += 1;
        }
        let e = Complex64::new(0.5 * (lo + hi), 0.0);
        let (sigma_min, sigma_max) = self.singular_extremes(e)?;
        if sigma_min > search.sigma_tolerance * sigma_max {
            return Ok(None);
        }
        Ok(Some(RootResult {
            e_prime: e,
            kind: RootKind::Bound,
            ln_abs_det: self.determinant(e)?.ln_abs,
            sigma_min,
            sigma_max,
            n: self.problem.basis.n,
            n_prime: self.problem.basis.n_prime,
            b: self.problem.basis.b,
            iterations,
            width_resolved: true,
        }))
    }

    fn clone_for_sheet(&self, sheet: SheetMode) -> DeterminantEvaluator {
        DeterminantEvaluator {
            problem: self.problem.clone(),
            channel: self.channel,
            sheet,
            blocks: self
                .blocks
                .iter()
                .map(|b| ChannelMatrices {
                    v1: b.v1.clone(),
                    v2: b.v2.clone(),
                    v3: b.v3.clone(),
                    dv: b.dv.clone(),
                })
                .collect(),
            mixed: self.mixed.clone(),
            greens: self.greens.clone(),
        }
    }

    /// Bisection of a sign change. Poles of the tail also flip the sign and
    /// inflate σ_max, so a root must additionally bring |D| below its value
    /// at both ends of the cell (`ceiling`).
    fn refine_bound(
        &self,
        mut lo: f64,
        mut hi: f64,
        mut slo: f64,
        ceiling: f64,
        search: &BoundSearch,
    ) -> Result<Option<RootResult>> {
        let mut iterations = 0;
        if slo == 0.0 {
            hi = lo;
        }
        while hi - lo > search.tolerance.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            let s = self.determinant(Complex64::new(mid, 0.0))?.real_sign();
            iterations += 1;
            if s == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if s * slo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                slo = s;
            }
        }
        let e = Complex64::new(0.5 * (lo + hi), 0.0);
        let ln_abs_det = self.determinant(e)?.ln_abs;
        if ln_abs_det >= ceiling {
            return Ok(None);
        }
        let (sigma_min, sigma_max) = self.singular_extremes(e)?;
        if sigma_min > search.sigma_tolerance * sigma_max {
            return Ok(None);
        }
        Ok(Some(RootResult {
            e_prime: e,
            kind: RootKind::Bound,
            ln_abs_det,
            sigma_min,
            sigma_max,
            n: self.problem.basis.n,
            n_prime: self.problem.basis.n_prime,
            b: self.problem.basis.b,
            iterations,
            width_resolved: true,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSearch {
    /// (re_lo, re_hi, im_lo, im_hi)
    pub region: (f64, f64, f64, f64),
    /// Extra starting points; grid minima are added unless `auto_seed` is off.
    pub seeds: Vec<Complex64>,
    pub auto_seed: bool,
    pub grid: (usize, usize),
    pub tolerance: f64,
    pub max_iterations: usize,
    pub merge_tolerance: f64,
    /// Accept a converged point only when σ_min ≤ `sigma_tolerance`·σ_max.
    pub sigma_tolerance: f64,
    /// Points of an extra ln|D| scan along Im E′ = 0 whose local minima are
    /// used as seeds; narrow resonances show up there as sharp dips that a
    /// coarse 2D grid misses. 0 disables.
    pub line_scan: usize,
    pub stability: Option<StabilityCheck>,
}

/// Re-converge every root with N and N′ enlarged by `extra_n` and drop it if
/// it moves by more than `tolerance`·max(1, |E′|). Zeros of the finite-rank
/// determinant that are artifacts of the truncation (broad, regularly spaced
/// in the continuum) move by O(0.1) under this test; physical resonances do
/// not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub extra_n: usize,
    pub tolerance: f64,
}

impl Default for StabilityCheck {
    fn default() -> Self {
        StabilityCheck {
            extra_n: 10,
            tolerance: 1e-3,
        }
    }
}

impl ResonanceSearch {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Self {
        ResonanceSearch {
            region: (re_lo, re_hi, im_lo, im_hi),
            seeds: Vec::new(),
            auto_seed: true,
            grid: (40, 20),
            tolerance: 1e-12,
            max_iterations: 200,
            merge_tolerance: 1e-8,
            sigma_tolerance: 1e-6,
            line_scan: 2000,
            stability: Some(StabilityCheck::default()),
        }
    }

    fn contains(&self, e: Complex64, margin: f64) -> bool {
        let (a, b, c, d) = self.region;
        let (mr, mi) = (margin * (b - a), margin * (d - c));
        e.re >= a - mr && e.re <= b + mr && e.im >= c - mi && e.im <= d + mi
    }
}

struct Stability {
    larger: DeterminantEvaluator,
    check: StabilityCheck,
}

impl Stability {
    fn confirm(&self, root: Complex64, step: Complex64, search: &ResonanceSearch) -> Result<std::result::Result<(), String>> {
        let wide = ResonanceSearch {
            region: (
                search.region.0 - 1.0,
                search.region.1 + 1.0,
                search.region.2 - 1.0,
                search.region.3 + 1.0,
            ),
            ..search.clone()
        };
        Ok(match self.larger.muller(root, step * 1e-2, &[], &wide)? {
            MullerOutcome::Converged(x, _) => {
                let moved = (x - root).norm();
                if moved <= self.check.tolerance * root.norm().max(1.0) {
                    Ok(())
                } else {
                    Err(format!("moved by {moved:.2e} when N grew by {}", self.check.extra_n))
                }
            }
            _ => Err(format!("was lost when N grew by {}", self.check.extra_n)),
        })
    }
}

enum MullerOutcome {
    Converged(Complex64, usize),
    Escaped(Complex64),
    Stalled(Complex64),
}

impl DeterminantEvaluator {
    /// Local minima of ln|D| on the search grid lying below the 10th percentile.
    pub fn resonance_seeds(&self, search: &ResonanceSearch) -> Result<Vec<Complex64>> {
        let (a, b, c, d) = search.region;
        let (nr, ni) = search.grid;
        if nr < 3 || ni < 3 {
            return Err(SolverError::InvalidSearch("seed grid needs at least 3×3 points".into()));
        }
        let eval = self.clone_for_sheet(SheetMode::Continued);
        let pts: Vec<(usize, usize, Complex64)> = (0..ni)
            .flat_map(|j| (0..nr).map(move |i| (i, j)))
            .map(|(i, j)| {
                let re = a + (b - a) * i as f64 / (nr - 1) as f64;
                let im = c + (d - c) * j as f64 / (ni - 1) as f64;
                (i, j, Complex64::new(re, im))
            })
            .collect();
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|&(_, _, e)| eval.determinant(e).map(|v| v.ln_abs))
            .collect::<Result<_>>()?;
        let at = |i: usize, j: usize| vals[j * nr + i];
        let mut sorted: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(|x, y| x.total_cmp(y));
        let cut = sorted.get(sorted.len() / 10).copied().unwrap_or(f64::INFINITY);
        let mut seeds = Vec::new();
        for &(i, j, e) in &pts {
            let v = at(i, j);
            if v > cut {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= nr as i64 || jj >= ni as i64 {
                        continue;
                    }
                    if at(ii as usize, jj as usize) < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push(e);
            }
        }
        if search.line_scan >= 3 && c <= 0.0 && d >= 0.0 {
            let m = search.line_scan;
            let line: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let e = Complex64::new(a + (b - a) * i as f64 / (m - 1) as f64, 0.0);
                    eval.determinant(e).map(|v| v.ln_abs)
                })
                .collect::<Result<_>>()?;
            for i in 1..m - 1 {
                if line[i] < line[i - 1] && line[i] < line[i + 1] {
                    seeds.push(Complex64::new(a + (b - a) * i as f64 / (m - 1) as f64, 0.0));
                }
            }
        }
        Ok(seeds)
    }

    /// Complex zeros in the search rectangle by Muller iteration with
    /// deflation, on the continued sheet.
    pub fn find_resonances(&self, search: &ResonanceSearch) -> Result<SearchReport> {
        let (a, b, c, d) = search.region;
        if !(a < b && c < d) {
            return Err(SolverError::InvalidSearch(format!("empty region {:?}", search.region)));
        }
        let eval = self.clone_for_sheet(SheetMode::Continued);
        let mut seeds = search.seeds.clone();
        if search.auto_seed {
            seeds.extend(eval.resonance_seeds(search)?);
        }
        let stability = match search.stability {
            Some(check) => {
                let mut basis = self.problem.basis;
                basis.n += check.extra_n;
                basis.n_prime += check.extra_n;
                basis.quad_points += 2 * check.extra_n;
                let larger = DeterminantEvaluator::new(&self.problem.with_basis(basis))?.with_sheet(SheetMode::Continued);
                Some(Stability { larger, check })
            }
            None => None,
        };
        let mut report = SearchReport::default();
        let mut found: Vec<Complex64> = Vec::new();
        let step = Complex64::new(0.02 * (b - a) / search.grid.0.max(1) as f64, 0.0)
            + Complex64::new(0.0, 0.02 * (d - c) / search.grid.1.max(1) as f64);

        for seed in seeds {
            let outcome = eval.muller(seed, step, &found, search)?;
            let (root, iterations) = match outcome {
                MullerOutcome::Converged(x, it) => (x, it),
                MullerOutcome::Escaped(x) => {
                    report.diagnostics.push(format!("seed {seed}: iteration left the region at {x}"));
                    continue;
                }
                MullerOutcome::Stalled(x) => {
                    report.diagnostics.push(format!("seed {seed}: no convergence (last iterate {x})"));
                    continue;
                }
            };
            // polish on the undeflated determinant
            let root = match eval.muller(root, step * 1e-3, &[], search)? {
                MullerOutcome::Converged(x, _) if (x - root).norm() < 1e-6 * (1.0 + root.norm()) => x,
                _ => root,
            };
            if found.iter().any(|f| (f - root).norm() <= search.merge_tolerance * (1.0 + root.norm())) {
                continue;
            }
            let (sigma_min, sigma_max) = eval.singular_extremes(root)?;
            if sigma_min > search.sigma_tolerance * sigma_max {
                report
                    .diagnostics
                    .push(format!("seed {seed}: converged to {root} but σ_min/σ_max = {:.2e}", sigma_min / sigma_max));
                continue;
            }
            found.push(root);
            if let Some(check) = &stability {
                match check.confirm(root, step, search)? {
                    Ok(()) => {}
                    Err(msg) => {
                        report.diagnostics.push(format!("zero at {root} {msg}; dropped as a truncation artifact"));
                        continue;
                    }
                }
            }
            if root.im > WIDTH_RESOLUTION * root.re.abs().max(1.0) {
                report
                    .diagnostics
                    .push(format!("zero at {root} lies above the real axis; not a resonance"));
                continue;
            }
            let width_resolved = root.im.abs() >= WIDTH_RESOLUTION;
            let e_prime = if width_resolved { root } else { Complex64::new(root.re, 0.0) };
            report.roots.push(RootResult {
                e_prime,
                kind: RootKind::Resonance,
                ln_abs_det: eval.determinant(root)?.ln_abs,
                sigma_min,
                sigma_max,
                n: self.problem.basis.n,
                n_prime: self.problem.basis.n_prime,
                b: self.problem.basis.b,
                iterations,
                width_resolved,
            });
        }
        report.roots.sort_by(|x, y| x.e_prime.re.total_cmp(&y.e_prime.re));
        Ok(report)
    }

    fn deflated(&self, e: Complex64, reference: f64, found: &[Complex64]) -> Result<Complex64> {
        let mut v = self.determinant(e)?.scaled(reference);
        for r in found {
            v /= e - r;
        }
        Ok(v)
    }

    fn muller(&self, seed: Complex64, step: Complex64, found: &[Complex64], search: &ResonanceSearch) -> Result<MullerOutcome> {
        let reference = self.determinant(seed)?.ln_abs;
        let mut x0 = seed - step;
        let mut x1 = seed + step;
        let mut x2 = seed;
        let mut f0 = self.deflated(x0, reference, found)?;
        let mut f1 = self.deflated(x1, reference, found)?;
        let mut f2 = self.deflated(x2, reference, found)?;
        for it in 1..=search.max_iterations {
            if f2.norm() == 0.0 {
                return Ok(MullerOutcome::Converged(x2, it));
            }
            let h1 = x1 - x0;
            let h2 = x2 - x1;
            let d1 = (f1 - f0) / h1;
            let d2 = (f2 - f1) / h2;
            let a = (d2 - d1) / (h2 + h1);
            let bq = a * h2 + d2;
            let disc = (bq * bq - 4.0 * f2 * a).sqrt();
            let den = if (bq + disc).norm() >= (bq - disc).norm() { bq + disc } else { bq - disc };
            let dx = if den.norm() == 0.0 { step } else { -2.0 * f2 / den };
            let x3 = x2 + dx;
            if !x3.re.is_finite() || !x3.im.is_finite() {
                return Ok(MullerOutcome::Stalled(x2));
            }
            if !search.contains(x3, 0.25) {
                return Ok(MullerOutcome::Escaped(x3));
            }
            x0 = x1;
            x1 = x2;
            x2 = x3;
            f0 = f1;
            f1 = f2;
            f2 = self.deflated(x3, reference, found)?;
            if dx.norm() <= search.tolerance * x3.norm().max(1.0) {
                return Ok(MullerOutcome::Converged(x3, it));
            }
        }
        Ok(MullerOutcome::Stalled(x2))
    }
}

/// Null vector ψ of the assembled matrix and the coefficients c = w̃ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub e_prime: Complex64,
    /// ψ, normalized to unit Euclidean length (bilinear normalization is
    /// applied in [`DeterminantEvaluator::expectation_value`]).
    pub psi: Vec<Complex64>,
    pub coefficients: Vec<Complex64>,
    /// ‖Mψ‖ / ‖ψ‖
    pub residual: f64,
    pub matrix_norm: f64,
}

impl DeterminantEvaluator {
    /// Smallest right singular vector of the assembled matrix at the root.
    pub fn state_vector(&self, root: &RootResult) -> Result<StateVector> {
        let eval = match root.kind {
            RootKind::Bound => self.clone_for_sheet(SheetMode::Physical),
            RootKind::Resonance => self.clone_for_sheet(SheetMode::Continued),
        };
        let m = eval.assemble_matrix(root.e_prime)?;
        let svd = m.clone().svd(false, true);
        let v_t = svd.v_t.ok_or(SolverError::Singular)?;
        let sv = &svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
        let smax = sv[order[sv.len() - 1]];
        let tol = 1e-8 * smax;
        let null_dim = order.iter().filter(|&&i| sv[i] <= tol).count();
        if null_dim > 1 {
            return Err(SolverError::Multiplicity {
                e_prime: root.e_prime,
                dimension: null_dim,
            });
        }
        let idx = order[0];
        // right singular vector: conjugate of the row of Vᴴ
        let psi = nalgebra::DVector::from_iterator(v_t.ncols(), v_t.row(idx).iter().map(|z| z.conj()));
        let residual = (&m * &psi).norm() / psi.norm();
        let w = eval.separable_potential(root.e_prime)?;
        let coeff = &w * &psi;
        Ok(StateVector {
            e_prime: root.e_prime,
            psi: psi.iter().copied().collect(),
            coefficients: coeff.iter().copied().collect(),
            residual,
            matrix_norm: smax,
        })
    }

    /// ⟨ψ|O|ψ⟩/⟨ψ|ψ⟩ with ψ = g c expanded in the CS functions |n⟩; `obs` holds
    /// one ⟨n|O|n′⟩ matrix per channel (block-diagonal operator). Both
    /// contractions are bilinear, which is the resonance-state normalization.
    pub fn expectation_value(&self, state: &StateVector, obs: &[PotentialMatrix]) -> Result<Complex64> {
        let n = self.problem.basis.n;
        if obs.len() != self.channels() {
            return Err(SolverError::InvalidSearch(format!(
                "need one observable block per channel ({}), got {}",
                self.channels(),
                obs.len()
            )));
        }
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for (a, lam) in self.lambdas().into_iter().enumerate() {
            if obs[a].size() < n {
                return Err(SolverError::InvalidSearch("observable matrix smaller than N".into()));
            }
            let unit = unit_operator_matrix(lam, &self.problem.basis)?;
            let psi = &state.psi[a * n..(a + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    let pp = psi[i] * psi[j];
                    num += pp * obs[a].entries[(i, j)];
                    den += pp * unit[(i, j)];
                }
            }
        }
        Ok(num / den)
    }
}

/// One (N, b) cell of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCell {
    pub n: usize,
    pub b: f64,
    pub roots: Vec<RootResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub cells: Vec<ConvergenceCell>,
    /// Per b, per root index: |E(N_i) − E(N_{i+1})| for consecutive N in the
    /// list (entry i corresponds to N_i → N_{i+1}).
    pub drift: Vec<(f64, Vec<Vec<f64>>)>,
    /// Per N, per root index: max − min of E over the b list.
    pub spread: Vec<(usize, Vec<f64>)>,
}

/// Re-solve the bound-state problem on every (N, b) cell. N′ = N in every
/// cell; failures are recorded per cell.
pub fn convergence_study(problem: &Problem, n_list: &[usize], b_list: &[f64], search: &BoundSearch) -> Result<ConvergenceTable> {
    if n_list.is_empty() || b_list.is_empty() {
        return Err(SolverError::InvalidSearch("N and b lists must be non-empty".into()));
    }
    let jobs: Vec<(usize, f64)> = b_list.iter().flat_map(|&b| n_list.iter().map(move |&n| (n, b))).collect();
    let cells: Vec<ConvergenceCell> = jobs
        .par_iter()
        .map(|&(n, b)| {
            let run = || -> Result<Vec<RootResult>> {
                let basis = BasisParams::with_expansion(b, n, n)?;
                let eval = DeterminantEvaluator::new(&problem.with_basis(basis))?;
                Ok(eval.find_bound_states(search)?.roots)
            };
            match run() {
                Ok(roots) => ConvergenceCell { n, b, roots, error: None },
                Err(e) => ConvergenceCell {
                    n,
                    b,
                    roots: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let lookup = |n: usize, b: f64| cells.iter().find(|c| c.n == n && c.b == b);
    let mut drift = Vec::new();
    for &b in b_list {
        let mut per_n = Vec::new();
        for w in n_list.windows(2) {
            let (c0, c1) = (lookup(w[0], b), lookup(w[1], b));
            let d = match (c0, c1) {
                (Some(x), Some(y)) => x
                    .roots
                    .iter()
                    .zip(&y.roots)
                    .map(|(p, q)| (p.e_prime - q.e_prime).norm())
                    .collect(),
                _ => Vec::new(),
            };
            per_n.push(d);
        }
        drift.push((b, per_n));
    }
    let mut spread = Vec::new();
    for &n in n_list {
        let cols: Vec<&ConvergenceCell> = b_list.iter().filter_map(|&b| lookup(n, b)).collect();
        let count = cols.iter().map(|c| c.roots.len()).min().unwrap_or(0);
        let s = (0..count)
            .map(|k| {
                let vals: Vec<f64> = cols.iter().map(|c| c.roots[k].e_prime.re).collect();
                vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect();
        spread.push((n, s));
    }
    Ok(ConvergenceTable { cells, drift, spread })
}
