//! Result records and their JSON / CSV / text renderings.

use crate::config::Format;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io;
use sturm_core::{RootKind, RootResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    #[serde(rename = "type")]
    pub kind: RootKind,
    #[serde(rename = "E_re")]
    pub e_re: f64,
    /// Never positive; exactly zero when the width is below resolution.
    #[serde(rename = "E_im")]
    pub e_im: f64,
    /// σ_min/σ_max of the determinant matrix at the root.
    pub residual: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub b: f64,
    pub iterations: usize,
}

impl RootRecord {
    /// None for roots above the real axis, which have no physical meaning.
    pub fn from_root(r: &RootResult) -> Option<Self> {
        if r.e_prime.im > 0.0 {
            return None;
        }
        Some(RootRecord {
            kind: r.kind,
            e_re: r.e_prime.re,
            // −0.0 and 0.0 print differently; normalize
            e_im: if r.e_prime.im == 0.0 { 0.0 } else { r.e_prime.im },
            residual: r.sigma_ratio(),
            n: r.n,
            b: r.b,
            iterations: r.iterations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub index: usize,
    pub solver: Option<f64>,
    pub oracle: Option<f64>,
    /// |solver − oracle|, absent when one side has no level at this index.
    pub delta: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub tolerance: f64,
    pub max_delta: Option<f64>,
    pub passed: bool,
    pub rows: Vec<VerifyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub b: f64,
    /// Real parts of the bound states found, ascending.
    pub energies: Vec<f64>,
    pub error: Option<String>,
}

/// |E(N_from) − E(N_to)| per level at fixed b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub b: f64,
    #[serde(rename = "N_from")]
    pub n_from: usize,
    #[serde(rename = "N_to")]
    pub n_to: usize,
    pub drift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub b_list: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    pub drift: Vec<DriftRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    #[serde(rename = "E_re")]
    pub e_re: f64,
    #[serde(rename = "E_im")]
    pub e_im: f64,
    pub ln_abs_det: f64,
    /// arg D in (−π, π].
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub sheet: String,
    /// Points along Re E′ and Im E′; row-major with Re fastest.
    pub shape: [usize; 2],
    pub points: Vec<ProbePoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub bound_s: Option<f64>,
    pub resonance_s: Option<f64>,
    pub oracle_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub config_hash: String,
    pub equation: String,
    pub roots: Vec<RootRecord>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    /// Wall-clock only; the one part of the output that varies between runs.
    pub timings: Timings,
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SigFormatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident $(, $arg:ident: $ty:ty)*;)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for SigFormatter {
    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        begin_object_value;
        end_object_value;
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// 17 significant digits, parseable back to the same bits.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// 8 significant digits, fixed notation where that stays readable.
pub fn sig8(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..8).contains(&exp) {
        format!("{:.*}", (7 - exp).max(0) as usize, x)
    } else {
        format!("{x:.7e}")
    }
}

impl ResultRecord {
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
        self.serialize(&mut ser).expect("record serializes");
        buf.push(b'\n');
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        }
    }

    /// One table per record: the verification, convergence or probe data
    /// when present, the root list otherwise.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |x: Option<f64>| x.map(sig17).unwrap_or_default();
        let res: csv::Result<()> = (|| {
            if let Some(v) = &self.verification {
                w.write_record(["index", "solver", "oracle", "delta", "ok"])?;
                for r in &v.rows {
                    w.write_record([r.index.to_string(), opt(r.solver), opt(r.oracle), opt(r.delta), r.ok.to_string()])?;
                }
            } else if let Some(c) = &self.convergence {
                w.write_record(["N", "b", "index", "E_re", "drift_to_next_N"])?;
                for row in &c.rows {
                    let next = c.drift.iter().find(|d| d.b == row.b && d.n_from == row.n);
                    for (i, e) in row.energies.iter().enumerate() {
                        let d = next.and_then(|d| d.drift.get(i).copied());
                        w.write_record([row.n.to_string(), sig17(row.b), i.to_string(), sig17(*e), opt(d)])?;
                    }
                }
            } else if let Some(p) = &self.probe {
                w.write_record(["E_re", "E_im", "ln_abs_det", "phase"])?;
                for q in &p.points {
                    w.write_record([sig17(q.e_re), sig17(q.e_im), sig17(q.ln_abs_det), sig17(q.phase)])?;
                }
            } else {
                w.write_record(["type", "E_re", "E_im", "residual", "N", "b", "iterations"])?;
                for r in &self.roots {
                    w.write_record([
                        kind_name(r.kind).to_string(),
                        sig17(r.e_re),
                        sig17(r.e_im),
                        sig17(r.residual),
                        r.n.to_string(),
                        sig17(r.b),
                        r.iterations.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        })();
        res.expect("CSV into memory");
        String::from_utf8(w.into_inner().expect("flushed")).expect("CSV is UTF-8")
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{} — {} (config {})", self.command, self.equation, &self.config_hash[..12]);
        if !self.roots.is_empty() {
            let _ = writeln!(s, "{:<10} {:>16} {:>16} {:>12} {:>4} {:>8} {:>5}", "type", "Re E", "Im E", "residual", "N", "b", "iter");
            for r in &self.roots {
                let _ = writeln!(
                    s,
                    "{:<10} {:>16} {:>16} {:>12} {:>4} {:>8} {:>5}",
                    kind_name(r.kind),
                    sig8(r.e_re),
                    sig8(r.e_im),
                    format!("{:.1e}", r.residual),
                    r.n,
                    sig8(r.b),
                    r.iterations
                );
            }
        } else if self.convergence.is_none() && self.probe.is_none() {
            let _ = writeln!(s, "no roots found");
        }
        if let Some(v) = &self.verification {
            let _ = writeln!(s, "\nverification against shooting (tolerance {:e}):", v.tolerance);
            let _ = writeln!(s, "{:>5} {:>16} {:>16} {:>10}", "#", "solver", "oracle", "|Δ|");
            let o = |x: Option<f64>| x.map(sig8).unwrap_or_else(|| "—".into());
            for r in &v.rows {
                let d = r.delta.map(|d| format!("{d:.2e}")).unwrap_or_else(|| "—".into());
                let _ = writeln!(s, "{:>5} {:>16} {:>16} {:>10}{}", r.index, o(r.solver), o(r.oracle), d, if r.ok { "" } else { "  MISMATCH" });
            }
            let _ = writeln!(s, "{}", if v.passed { "all levels agree" } else { "verification FAILED" });
        }
        if let Some(c) = &self.convergence {
            let _ = writeln!(s, "{:>4} {:>8}  energies", "N", "b");
            for row in &c.rows {
                let es: Vec<String> = row.energies.iter().map(|&e| sig8(e)).collect();
                let tail = row.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default();
                let _ = writeln!(s, "{:>4} {:>8}  {}{tail}", row.n, sig8(row.b), es.join(" "));
            }
            if !c.drift.is_empty() {
                let _ = writeln!(s, "\ndrift |E(N) − E(N_next)|:");
                for d in &c.drift {
                    let ds: Vec<String> = d.drift.iter().map(|x| format!("{x:.2e}")).collect();
                    let _ = writeln!(s, "b={} {:>4}→{:<4} {}", sig8(d.b), d.n_from, d.n_to, ds.join(" "));
                }
            }
        }
        if let Some(p) = &self.probe {
            let _ = writeln!(s, "{} sheet, {}×{} points", p.sheet, p.shape[0], p.shape[1]);
            let _ = writeln!(s, "{:>16} {:>16} {:>16} {:>12}", "Re E", "Im E", "ln|D|", "arg D");
            for q in &p.points {
                let _ = writeln!(s, "{:>16} {:>16} {:>16} {:>12}", sig8(q.e_re), sig8(q.e_im), sig8(q.ln_abs_det), sig8(q.phase));
            }
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "note: {d}");
        }
        let _ = writeln!(s, "time {:.3} s", self.timings.total_s);
        s
    }
}

fn kind_name(k: RootKind) -> &'static str {
    match k {
        RootKind::Bound => "bound",
        RootKind::Resonance => "resonance",
    }
}
