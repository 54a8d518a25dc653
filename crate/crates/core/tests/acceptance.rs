//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Every criterion is evaluated regardless of the others.
//!
//! Reference numbers for the Z = 50 model are the published table; all other
//! references (Bohr, Sommerfeld, recursion, shooting) are computed here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::Instant;
use sturm_core::csbasis::overlap_matrix;
use sturm_core::effective::{dirac_s_and_lambdas, kg_lambda, zalpha};
use sturm_core::greens::{j_elements, tail_correction, wavenumber, Sheet};
use sturm_core::*;

const N_MODEL: usize = 60;
const B_MODEL: f64 = 4.0;

fn model_potential() -> RadialPotential {
    let v = TermList::new(vec![PotentialTerm::new(-240.0, -1, 1.0), PotentialTerm::new(320.0, -1, 4.0)]);
    RadialPotential::new(50.0, v).unwrap()
}

fn problem(kind: EquationKind, potential: RadialPotential, b: f64, n: usize) -> Problem {
    Problem {
        kind,
        constants: PhysicalConstants::model(),
        potential,
        basis: BasisParams::new(b, n).unwrap(),
        coupling: CouplingForm::Rotated,
    }
}

fn bound(p: &Problem, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let ev = DeterminantEvaluator::new(p).unwrap();
    let mut search = BoundSearch::new(lo, hi);
    search.grid = grid;
    ev.find_bound_states(&search).unwrap().roots.iter().map(|r| r.e_prime.re).collect()
}

fn resonances(p: &Problem) -> Vec<Complex64> {
    let ev = DeterminantEvaluator::new(p).unwrap();
    ev.find_resonances(&ResonanceSearch::new(4.0, 14.0, -0.5, 0.05))
        .unwrap()
        .roots
        .iter()
        .map(|r| r.e_prime)
        .collect()
}

#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

/// Table block for one equation: bound towers, resonances (E_r, Im E).
struct Block {
    labels: [&'static str; 3],
    kinds: [EquationKind; 3],
    bound: [&'static [f64]; 3],
    resonances: [&'static [(f64, f64)]; 3],
}

/// Positions within `pos_tol`; widths negative; widths of order 1e-5 within
/// a factor of 3; tiny widths only bounded by `tiny_bound`.
fn check_block(block: &Block, pos_tol: f64, tiny_bound: f64, out: &mut Outcome) {
    for i in 0..3 {
        let p = problem(block.kinds[i], model_potential(), B_MODEL, N_MODEL);
        let got = bound(&p, -100.0, -0.01, 1000);
        let want = block.bound[i];
        out.check(got.len() == want.len(), || {
            format!("{}: {} bound states, table has {}", block.labels[i], got.len(), want.len())
        });
        for (g, w) in got.iter().zip(want) {
            out.check((g - w).abs() <= pos_tol, || format!("{}: bound {g:.7} vs {w} (Δ={:.2e})", block.labels[i], g - w));
        }
        let res = resonances(&p);
        for &(er, im) in block.resonances[i] {
            let nearest = res
                .iter()
                .min_by(|a, b| (a.re - er).abs().total_cmp(&(b.re - er).abs()))
                .copied();
            let Some(z) = nearest else {
                out.failures.push(format!("{}: no resonance found (table {er})", block.labels[i]));
                continue;
            };
            if (z.re - er).abs() > pos_tol {
                out.failures.push(format!(
                    "{}: resonance {er} not reproduced; nearest {:.7}{:+.3e}i (Δ={:.2e})",
                    block.labels[i],
                    z.re,
                    z.im,
                    z.re - er
                ));
                continue;
            }
            // widths below the resolution are reported as exactly zero
            out.check(z.im < 0.0 || (z.im == 0.0 && im.abs() < 1e-9), || {
                format!("{}: resonance {er} has Im E = {:.3e}", block.labels[i], z.im)
            });
            if im.abs() >= 1e-6 {
                let ratio = z.im / im;
                out.check((1.0 / 3.0..=3.0).contains(&ratio), || {
                    format!("{}: width {:.3e} vs {im} (ratio {ratio:.2})", block.labels[i], z.im)
                });
            } else {
                out.check(z.im.abs() <= tiny_bound, || {
                    format!("{}: width {:.3e} exceeds {tiny_bound:e}", block.labels[i], z.im)
                });
            }
            out.notes.push(format!("{} {:.7}{:+.2e}i", block.labels[i], z.re, z.im));
        }
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::default();
    let block = Block {
        labels: ["l=0", "l=1", "l=2"],
        kinds: [0, 1, 2].map(|l| EquationKind::Schrodinger { l }),
        bound: [
            &[-92.264199, -54.224609, -26.210528, -6.5302229],
            &[-86.36494, -49.69048, -22.84595, -4.175213],
            &[-75.76312, -41.60855, -16.91107, -0.091564],
        ],
        resonances: [&[(6.139886, -0.00000002)], &[(7.600636, -0.0000000003)], &[(10.019283, -0.000017)]],
    };
    check_block(&block, 5e-4, 1e-6, &mut out);
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::default();
    let block = Block {
        labels: ["l=0", "l=1", "l=2"],
        kinds: [0, 1, 2].map(|l| EquationKind::KleinGordon { l }),
        bound: [
            &[-92.27553, -54.25825, -26.26132, -6.583528],
            &[-86.37913, -49.72854, -22.89969, -4.229067],
            &[-75.78641, -41.65660, -16.97094, -0.146437],
        ],
        resonances: [&[(6.098560, -0.000000003)], &[(7.561164, -0.0000000002)], &[(10.019284, -0.000014)]],
    };
    check_block(&block, 5e-4, 1e-6, &mut out);
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::default();
    let block = Block {
        labels: ["j=1/2", "j=3/2", "j=5/2"],
        kinds: [1, 3, 5].map(|twice_j| EquationKind::Dirac { twice_j }),
        bound: [
            &[-91.73292, -86.80452, -54.03927, -49.89311, -26.13929, -22.98923, -6.503713, -4.285842],
            &[-86.20067, -75.92108, -49.62861, -41.72801, -22.84399, -17.01021, -4.195174, -0.169263],
            &[-75.66290, -62.28595, -41.59556, -31.45510, -16.94087, -9.587586, -0.130783],
        ],
        resonances: [
            &[(6.1480973, -0.00000008)],
            &[(7.580558, -0.0000000004), (9.972041, -0.000014)],
            &[(4.786557, -0.0000000000006), (9.991357, -0.000015)],
        ],
    };
    check_block(&block, 1e-3, 1e-6, &mut out);
    if !out.failures.is_empty() {
        out.notes
            .push("see README, 'Dirac coupling structure', for the coupling-form investigation".into());
    }
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::default();
    // Schrödinger hydrogen, m = ħ = 1, Z = −1
    let mut checked = 0;
    for n in [1usize, 5, 20] {
        for b in [0.5, 2.0, 8.0] {
            let p = problem(EquationKind::Schrodinger { l: 0 }, RadialPotential::pure_coulomb(-1.0), b, n);
            let got = bound(&p, -0.6, -0.015, 4000);
            for level in 1..=5 {
                let exact = -0.5 / (level * level) as f64;
                let hit = got.iter().any(|g| (g - exact).abs() < 1e-9);
                if !hit && n == 1 && b == 0.5 && level == 2 {
                    // ψ₂ is cs₁ at b = 1/2 and ⟨ñ₀|cs₁⟩ = 0: the 1×1 Green's
                    // matrix has no pole there, so no zero can exist
                    out.notes.push("N=1 b=0.5 n=2: state orthogonal to the retained basis (no pole, by construction)".into());
                    continue;
                }
                checked += 1;
                out.check(hit, || format!("hydrogen N={n} b={b}: level {level} ({exact}) missing in {got:?}"));
            }
            let expected = if n == 1 && b == 0.5 { 4 } else { 5 };
            out.check(got.len() == expected, || format!("hydrogen N={n} b={b}: extra zeros {got:?}"));
        }
    }
    out.notes.push(format!("{checked} Bohr levels within 1e-9"));

    // Sommerfeld, Z = −50
    let k = PhysicalConstants::model();
    let z = -50.0;
    let za = zalpha(z, &k);
    let mc2 = k.rest_energy();
    let sommerfeld = |n_eff: f64| mc2 / (1.0 + (za / n_eff).powi(2)).sqrt() - mc2;
    let mut worst: f64 = 0.0;
    for (n, b) in [(5usize, 8.0), (5, 20.0), (20, 8.0), (20, 20.0)] {
        for l in [0u32, 1, 2] {
            let lambda = kg_lambda(l, za).unwrap();
            let got = bound(&problem(EquationKind::KleinGordon { l }, RadialPotential::pure_coulomb(z), b, n), -1800.0, -30.0, 1000);
            out.check(got.len() >= 4, || format!("KG l={l} N={n} b={b}: only {} levels", got.len()));
            for (nr, g) in got.iter().enumerate() {
                let w = sommerfeld(nr as f64 + lambda + 1.0);
                worst = worst.max(((g - w) / w).abs());
                out.check(((g - w) / w).abs() < 1e-8, || format!("KG l={l} N={n} b={b}: {g} vs {w}"));
            }
        }
        for twice_j in [1u32, 3, 5] {
            let (s, _, _) = dirac_s_and_lambdas(twice_j, za).unwrap();
            let got = bound(&problem(EquationKind::Dirac { twice_j }, RadialPotential::pure_coulomb(z), b, n), -1800.0, -30.0, 1000);
            out.check(got.len() >= 4, || format!("Dirac 2j={twice_j} N={n} b={b}: only {} levels", got.len()));
            // λ₊ tower n_r + s, λ₋ tower n_r + s + 1; distinct levels are n_r + s
            for (nr, g) in got.iter().enumerate() {
                let w = sommerfeld(nr as f64 + s);
                worst = worst.max(((g - w) / w).abs());
                out.check(((g - w) / w).abs() < 1e-8, || format!("Dirac 2j={twice_j} N={n} b={b}: {g} vs {w}"));
            }
        }
    }
    out.notes.push(format!("Sommerfeld worst relative error {worst:.1e}"));
    out
}

/// C_n by backward recursion of the Jacobi tail from depth `depth`.
fn recursion_tail(n: usize, lambda: f64, zeff: Complex64, eps: Complex64, b: f64, depth: usize) -> Complex64 {
    let k = PhysicalConstants::model();
    let p = wavenumber(eps, &k, Sheet::Physical);
    let mut c = Complex64::new(0.0, 0.0);
    for m in (n..depth).rev() {
        let e = j_elements(m, lambda, zeff, &p, b, &k);
        c = 1.0 / (e.diag - e.sup * e.sup * c);
    }
    c
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::default();
    let k = PhysicalConstants::model();

    // continued fraction vs backward recursion
    let mut cf_worst: f64 = 0.0;
    for eps in [Complex64::new(-0.7, 0.0), Complex64::new(3.0, 0.5), Complex64::new(8.0, -1.0)] {
        for (lambda, z, b, n) in [(0.0, 50.0, 4.0, 60usize), (0.931, 50.0, 4.0, 20), (-0.158, 49.9, 2.0, 5), (2.0, -1.0, 1.0, 1)] {
            let zeff = Complex64::new(z, 0.0);
            let p = wavenumber(eps, &k, Sheet::Physical);
            let cf = tail_correction(n, lambda, zeff, &p, b, &k).unwrap();
            let rec = recursion_tail(n, lambda, zeff, eps, b, 100_000);
            cf_worst = cf_worst.max((cf - rec).norm() / rec.norm());
        }
    }
    out.check(cf_worst < 1e-10, || format!("continued fraction vs recursion {cf_worst:.1e}"));
    out.notes.push(format!("CF/recursion {cf_worst:.1e}"));

    // quadrature orthonormality
    let mut ortho: f64 = 0.0;
    for lambda in [0.0, 1.0, 2.0, -0.158, 0.931] {
        for b in [1.0, 4.0] {
            let s = overlap_matrix(lambda, &BasisParams::new(b, 60).unwrap()).unwrap();
            ortho = ortho.max((s - DMatrix::<f64>::identity(60, 60)).abs().max());
        }
    }
    out.check(ortho < 1e-10, || format!("orthonormality {ortho:.1e}"));
    out.notes.push(format!("orthonormality {ortho:.1e}"));

    // b-invariance at N = 80 over b ∈ {3, 4, 5, 6}
    let mut b_spread: f64 = 0.0;
    let mut b2_spread: f64 = 0.0;
    for l in [0u32, 1, 2] {
        let at = |b: f64| bound(&problem(EquationKind::Schrodinger { l }, model_potential(), b, 80), -100.0, -0.05, 1000);
        let reference = at(4.0);
        for b in [3.0, 5.0, 6.0, 2.0] {
            let other = at(b);
            out.check(other.len() == reference.len(), || format!("b-invariance l={l} b={b}: root count differs"));
            let d = other.iter().zip(&reference).map(|(a, r)| (a - r).abs()).fold(0.0, f64::max);
            if b == 2.0 {
                b2_spread = b2_spread.max(d);
            } else {
                b_spread = b_spread.max(d);
            }
        }
    }
    out.check(b_spread < 1e-6, || format!("b-invariance over b∈{{3,4,5,6}} at N=80: {b_spread:.1e}"));
    out.notes.push(format!("b-invariance {b_spread:.1e} (b=2 at N=80, not yet converged: {b2_spread:.1e})"));

    // shooting oracle on every Schrödinger / KG bound state
    let mut oracle_worst: f64 = 0.0;
    for kind in [0, 1, 2]
        .map(|l| EquationKind::Schrodinger { l })
        .into_iter()
        .chain([0, 1, 2].map(|l| EquationKind::KleinGordon { l }))
    {
        let cs = bound(&problem(kind, model_potential(), B_MODEL, N_MODEL), -100.0, -0.05, 1000);
        let mut shoot = ShootingProblem::new(kind, model_potential(), k, -0.05).unwrap();
        if kind == (EquationKind::KleinGordon { l: 0 }) {
            // the total 1/r² strength near the origin is supercritical for
            // the local KG l=0 equation; a hard wall at 1e−6 fixes it
            shoot.inner_wall = Some(1e-6);
        }
        let reference: Vec<f64> = shoot.bound_states(-100.0, -0.05, 300).unwrap().iter().map(|l| l.energy).collect();
        out.check(cs.len() == reference.len(), || format!("oracle {kind}: {cs:?} vs {reference:?}"));
        for (a, r) in cs.iter().zip(&reference) {
            oracle_worst = oracle_worst.max((a - r).abs());
        }
    }
    out.check(oracle_worst < 1e-6, || format!("oracle agreement {oracle_worst:.1e}"));
    out.notes.push(format!("oracle {oracle_worst:.1e}"));

    // non-relativistic limit: (E_rel − E_S) c² settles
    let ground = |kind: EquationKind, c: f64| {
        let mut p = problem(kind, model_potential(), B_MODEL, 30);
        p.constants.c = c;
        bound(&p, -100.0, -88.0, 400)[0]
    };
    let schr = ground(EquationKind::Schrodinger { l: 0 }, k.c);
    for kind in [EquationKind::KleinGordon { l: 0 }, EquationKind::Dirac { twice_j: 1 }] {
        let d1 = ground(kind, 10.0 * k.c) - schr;
        let d2 = ground(kind, 100.0 * k.c) - schr;
        let rate = (d1 / d2).log10();
        out.check((rate - 2.0).abs() < 0.01, || format!("{kind}: NR shift exponent {rate:.4}"));
        out.notes.push(format!("{kind} shift ∝ c^-{rate:.4}"));
    }

    // determinant reality below threshold
    let mut phase_worst: f64 = 0.0;
    for kind in [
        EquationKind::Schrodinger { l: 2 },
        EquationKind::KleinGordon { l: 1 },
        EquationKind::Dirac { twice_j: 1 },
        EquationKind::Dirac { twice_j: 5 },
    ] {
        let ev = DeterminantEvaluator::new(&problem(kind, model_potential(), B_MODEL, 40)).unwrap();
        for e in [-97.0, -70.5, -33.3, -8.0, -1.1, -0.02] {
            let d = ev.determinant(Complex64::new(e, 0.0)).unwrap();
            phase_worst = phase_worst.max(d.phase.sin().abs());
        }
    }
    out.check(phase_worst < 1e-10, || format!("Im D/|D| = {phase_worst:.1e}"));
    out.notes.push(format!("Im D/|D| {phase_worst:.1e}"));
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::default();
    let ns = [20usize, 30, 40, 50, 60, 70, 80];
    let e: Vec<f64> = ns
        .iter()
        .map(|&n| bound(&problem(EquationKind::Schrodinger { l: 0 }, model_potential(), B_MODEL, n), -93.0, -91.0, 200)[0])
        .collect();
    let last = e[e.len() - 1];
    let drift: Vec<f64> = e.iter().map(|x| (x - last).abs()).collect();
    // smallest N from which every drift stays below the bound
    let reached = (0..ns.len() - 1)
        .find(|&i| drift[i..ns.len() - 1].iter().all(|&d| d < 1e-6))
        .map(|i| ns[i]);
    out.check(reached.is_some_and(|n| n <= 50), || format!("drift {drift:?}"));
    out.notes.push(format!(
        "|E(N)−E(80)| = {} ; below 1e-6 from N = {}",
        ns.iter().zip(&drift).map(|(n, d)| format!("{n}:{d:.1e}")).collect::<Vec<_>>().join(" "),
        reached.map_or("never".into(), |n| n.to_string())
    ));
    out
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("Schrödinger table block", criterion_1),
        ("Klein-Gordon table block", criterion_2),
        ("Dirac table block", criterion_3),
        ("hydrogenic / Sommerfeld exactness", criterion_4),
        ("property suites", criterion_5),
        ("ground-state convergence in N", criterion_6),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let pass = out.failures.is_empty();
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} — {name} ({:.1}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for f in &out.failures {
            println!("    mismatch: {f}");
        }
        for n in &out.notes {
            println!("    {n}");
        }
    }
    println!("acceptance: {} of 6 criteria pass", 6 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
