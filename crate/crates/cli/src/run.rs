//! The four subcommands.

use crate::config::{ConfigError, ProblemConfig};
use crate::record::{
    Convergence, ConvergenceRow, DriftRow, Probe, ProbePoint, ResultRecord, RootRecord, Timings, VerifyRow, Verification,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::time::Instant;
use sturm_core::oracle::OracleError;
use sturm_core::{
    convergence_study, DeterminantEvaluator, EquationKind, RootResult, SearchReport, SheetMode, ShootingProblem, SolverError,
};
use thiserror::Error;

/// Points per axis of an oracle scan.
const ORACLE_GRID: usize = 400;
/// Hard wall used by the oracle when the KG 1/r² term is supercritical.
const ORACLE_WALL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(SolverError::InvalidSearch(_)) => 2,
            CliError::Oracle(OracleError::Unsupported(_) | OracleError::InvalidInput(_)) => 2,
            CliError::Solver(_) | CliError::Oracle(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn header(command: &str, config: &ProblemConfig, kind: EquationKind) -> ResultRecord {
    ResultRecord {
        command: command.into(),
        config_hash: config.hash(),
        equation: kind.to_string(),
        roots: Vec::new(),
        diagnostics: Vec::new(),
        verification: None,
        convergence: None,
        probe: None,
        timings: Timings::default(),
    }
}

fn push_roots(rec: &mut ResultRecord, report: SearchReport) {
    for r in &report.roots {
        match RootRecord::from_root(r) {
            Some(x) => rec.roots.push(x),
            None => rec.diagnostics.push(format!("discarded root above the real axis at {}", r.e_prime)),
        }
    }
    rec.diagnostics.extend(report.diagnostics);
}

/// Bound search, then resonance search, as configured.
pub fn run_solve(config: &ProblemConfig) -> Result<ResultRecord> {
    let t0 = Instant::now();
    let res = config.resolve()?;
    let mut rec = header("solve", config, res.problem.kind);
    if res.bound.is_none() && res.resonance.is_none() {
        return Err(ConfigError {
            path: "search".into(),
            message: "set bound_interval and/or resonance_box".into(),
        }
        .into());
    }
    let eval = DeterminantEvaluator::new(&res.problem)?;
    if let Some(search) = &res.bound {
        let t = Instant::now();
        push_roots(&mut rec, eval.find_bound_states(search)?);
        rec.timings.bound_s = Some(t.elapsed().as_secs_f64());
    }
    if let Some(search) = &res.resonance {
        let t = Instant::now();
        push_roots(&mut rec, eval.find_resonances(search)?);
        rec.timings.resonance_s = Some(t.elapsed().as_secs_f64());
    }
    rec.timings.total_s = t0.elapsed().as_secs_f64();
    Ok(rec)
}

/// Bound states from the solver next to the shooting oracle. The record's
/// `verification.passed` is false on any mismatch.
pub fn run_verify(config: &ProblemConfig) -> Result<ResultRecord> {
    let t0 = Instant::now();
    let res = config.resolve()?;
    let kind = res.problem.kind;
    if let EquationKind::Dirac { .. } = kind {
        return Err(OracleError::Unsupported(format!("verify supports schrodinger and kg, not {kind}")).into());
    }
    let Some(search) = &res.bound else {
        return Err(ConfigError {
            path: "search.bound_interval".into(),
            message: "verify needs a bound interval".into(),
        }
        .into());
    };
    let mut rec = header("verify", config, kind);
    let eval = DeterminantEvaluator::new(&res.problem)?;
    let t = Instant::now();
    push_roots(&mut rec, eval.find_bound_states(search)?);
    rec.timings.bound_s = Some(t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (lo, hi) = search.interval;
    let eps_hi = eval.channel.eps(Complex64::new(hi, 0.0)).re;
    let mut shoot = ShootingProblem::new(kind, res.problem.potential.clone(), res.problem.constants, eps_hi)?;
    if shoot.supercritical(lo) || shoot.supercritical(hi) {
        shoot.inner_wall = Some(ORACLE_WALL);
        rec.diagnostics.push(format!(
            "the 1/r² term of the local equation is supercritical; the oracle uses a hard wall at r = {ORACLE_WALL:e}"
        ));
    }
    let oracle: Vec<f64> = shoot.bound_states(lo, hi, ORACLE_GRID)?.iter().map(|l| l.energy).collect();
    rec.timings.oracle_s = Some(t.elapsed().as_secs_f64());

    let tol = config.search.tolerances.verify;
    let solver: Vec<f64> = rec.roots.iter().map(|r| r.e_re).collect();
    let rows: Vec<VerifyRow> = (0..solver.len().max(oracle.len()))
        .map(|i| {
            let (s, o) = (solver.get(i).copied(), oracle.get(i).copied());
            let delta = s.zip(o).map(|(s, o)| (s - o).abs());
            VerifyRow {
                index: i,
                solver: s,
                oracle: o,
                delta,
                ok: delta.is_some_and(|d| d <= tol),
            }
        })
        .collect();
    let max_delta = rows.iter().filter_map(|r| r.delta).reduce(f64::max);
    rec.verification = Some(Verification {
        tolerance: tol,
        max_delta,
        passed: rows.iter().all(|r| r.ok),
        rows,
    });
    rec.timings.total_s = t0.elapsed().as_secs_f64();
    Ok(rec)
}

/// Bound states on every (N, b) cell, N′ = N, with the drift between
/// consecutive N at each b.
pub fn run_converge(config: &ProblemConfig, n_list: &[usize], b_list: &[f64]) -> Result<ResultRecord> {
    let t0 = Instant::now();
    let res = config.resolve()?;
    let Some(search) = &res.bound else {
        return Err(ConfigError {
            path: "search.bound_interval".into(),
            message: "converge needs a bound interval".into(),
        }
        .into());
    };
    let mut rec = header("converge", config, res.problem.kind);
    let table = convergence_study(&res.problem, n_list, b_list, search)?;
    let real = |roots: &[RootResult]| roots.iter().map(|r| r.e_prime.re).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for &b in b_list {
        for &n in n_list {
            if let Some(c) = table.cells.iter().find(|c| c.n == n && c.b == b) {
                rows.push(ConvergenceRow {
                    n,
                    b,
                    energies: real(&c.roots),
                    error: c.error.clone(),
                });
            }
        }
    }
    let mut drift = Vec::new();
    for (b, per_n) in &table.drift {
        for (w, d) in n_list.windows(2).zip(per_n) {
            drift.push(DriftRow {
                b: *b,
                n_from: w[0],
                n_to: w[1],
                drift: d.clone(),
            });
        }
    }
    rec.convergence = Some(Convergence {
        n_list: n_list.to_vec(),
        b_list: b_list.to_vec(),
        rows,
        drift,
    });
    rec.timings.total_s = t0.elapsed().as_secs_f64();
    Ok(rec)
}

/// ln|D| and arg D on a grid: over the resonance box on the continued sheet
/// when one is configured, else along the bound interval on the physical
/// sheet.
pub fn run_probe(config: &ProblemConfig, grid: [usize; 2]) -> Result<ResultRecord> {
    let t0 = Instant::now();
    let res = config.resolve()?;
    if grid[0] < 2 || grid[1] < 1 {
        return Err(ConfigError {
            path: "probe.grid".into(),
            message: "need at least 2 points along Re E′ and 1 along Im E′".into(),
        }
        .into());
    }
    let mut rec = header("greens-probe", config, res.problem.kind);
    let eval = DeterminantEvaluator::new(&res.problem)?;
    let (eval, sheet, shape, points) = if let Some(r) = &res.resonance {
        let (a, b, c, d) = r.region;
        let ny = grid[1].max(2);
        let pts: Vec<Complex64> = (0..ny)
            .flat_map(|j| {
                (0..grid[0]).map(move |i| {
                    Complex64::new(
                        a + (b - a) * i as f64 / (grid[0] - 1) as f64,
                        c + (d - c) * j as f64 / (ny - 1) as f64,
                    )
                })
            })
            .collect();
        (eval.with_sheet(SheetMode::Continued), "continued", [grid[0], ny], pts)
    } else if let Some(s) = &res.bound {
        let (lo, hi) = s.interval;
        let pts = (0..grid[0])
            .map(|i| Complex64::new(lo + (hi - lo) * i as f64 / (grid[0] - 1) as f64, 0.0))
            .collect();
        (eval.with_sheet(SheetMode::Physical), "physical", [grid[0], 1], pts)
    } else {
        return Err(ConfigError {
            path: "search".into(),
            message: "greens-probe needs a resonance_box or a bound_interval".into(),
        }
        .into());
    };
    let values: Vec<ProbePoint> = points
        .par_iter()
        .map(|&e| {
            let d = eval.determinant(e)?;
            Ok(ProbePoint {
                e_re: e.re,
                e_im: e.im,
                ln_abs_det: d.ln_abs,
                phase: d.phase,
            })
        })
        .collect::<std::result::Result<_, SolverError>>()?;
    rec.probe = Some(Probe {
        sheet: sheet.into(),
        shape,
        points: values,
    });
    rec.timings.total_s = t0.elapsed().as_secs_f64();
    Ok(rec)
}
