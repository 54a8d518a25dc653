//! End-to-end runs of the `sturm` binary and the library entry points on the
//! bundled configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use sturm_cli::config::{ConvergeConfig, Format, Overrides, ProblemConfig};
use sturm_cli::{run_converge, run_probe, run_solve, run_verify, ResultRecord};
use sturm_core::RootKind;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bundled(name: &str) -> ProblemConfig {
    ProblemConfig::load(&configs().join(format!("{name}.json"))).unwrap()
}

fn sturm(args: &[&str]) -> Output {
    sturm_env(args, &[])
}

fn sturm_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sturm"));
    cmd.args(args).env_remove("STURM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn config_arg(name: &str) -> String {
    configs().join(format!("{name}.json")).display().to_string()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("problem.json");
    std::fs::write(&p, json).unwrap();
    p.display().to_string()
}

fn bound(rec: &ResultRecord) -> Vec<f64> {
    rec.roots.iter().filter(|r| r.kind == RootKind::Bound).map(|r| r.e_re).collect()
}

#[test]
fn every_bundled_config_is_valid() {
    let names = [
        "hydrogen_check",
        "table1_schrodinger_l0",
        "table1_schrodinger_l1",
        "table1_schrodinger_l2",
        "table1_kg_l0",
        "table1_kg_l1",
        "table1_kg_l2",
        "table1_dirac_j1_2",
        "table1_dirac_j3_2",
        "table1_dirac_j5_2",
    ];
    let mut found: Vec<String> = std::fs::read_dir(configs())
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    found.sort();
    let mut want: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(found, want);
    for n in names {
        let c = bundled(n);
        c.resolve().unwrap_or_else(|e| panic!("{n}: {e}"));
    }
}

#[test]
fn schrodinger_l0_reproduces_the_table() {
    let rec = run_solve(&bundled("table1_schrodinger_l0")).unwrap();
    let e = bound(&rec);
    let table = [-92.264199, -54.224609, -26.210528, -6.5302229];
    assert_eq!(e.len(), 4, "{e:?}");
    for (g, w) in e.iter().zip(table) {
        assert!((g - w).abs() < 5e-4, "{g} vs {w}");
    }
    let res: Vec<_> = rec.roots.iter().filter(|r| r.kind == RootKind::Resonance).collect();
    assert_eq!(res.len(), 1);
    assert!((res[0].e_re - 6.139886).abs() < 5e-4);
    assert!(res[0].e_im < 0.0 && res[0].e_im > -1e-6);
}

#[test]
fn repulsive_coulomb_alone_binds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"equation": "schrodinger", "l": 0, "coulomb_Z": 50.0, "potential": [],
            "basis": {"b": 4.0, "N": 20}, "search": {"bound_interval": [-100.0, -0.01]}}"#,
    );
    let out = sturm(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = ResultRecord::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(rec.roots.is_empty());
}

#[test]
fn hydrogen_check_gives_the_bohr_series() {
    let out = sturm(&["solve", "--config", &config_arg("hydrogen_check"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = ResultRecord::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let e = bound(&rec);
    assert_eq!(e.len(), 5, "{e:?}");
    for (i, got) in e.iter().enumerate() {
        let n = (i + 1) as f64;
        assert!((got + 0.5 / (n * n)).abs() < 1e-10, "{got}");
        assert_eq!(rec.roots[i].e_im, 0.0);
    }
}

#[test]
fn verify_schrodinger_l1_within_tolerance() {
    let rec = run_verify(&bundled("table1_schrodinger_l1")).unwrap();
    let v = rec.verification.unwrap();
    assert!(v.passed);
    assert_eq!(v.rows.len(), 4);
    assert!(v.max_delta.unwrap() <= 1e-5, "{:?}", v.max_delta);
}

#[test]
fn verify_pure_coulomb_to_1e8() {
    let out = sturm(&["verify", "--config", &config_arg("hydrogen_check"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = ResultRecord::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let v = rec.verification.unwrap();
    assert_eq!(v.rows.len(), 5);
    assert!(v.rows.iter().all(|r| r.delta.unwrap() <= 1e-8));
}

#[test]
fn verify_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = bundled("hydrogen_check");
    c.search.tolerances.verify = 1e-15;
    let cfg = write_config(dir.path(), &serde_json::to_string(&c).unwrap());
    let out = sturm(&["verify", "--config", &cfg, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(4));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("index,solver,oracle,delta,ok"));
    assert!(csv.contains(",false"));
}

#[test]
fn verify_rejects_dirac() {
    let out = sturm(&["verify", "--config", &config_arg("table1_dirac_j1_2")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schrodinger and kg"));
}

#[test]
fn converge_model_drift_decreases_past_n30() {
    let c = bundled("table1_schrodinger_l0");
    let cv = c.converge.clone().unwrap();
    let rec = run_converge(&c, &cv.n_list, &cv.b_list).unwrap();
    let table = rec.convergence.unwrap();
    assert_eq!(table.rows.len(), cv.n_list.len());
    let ground: Vec<f64> = table.drift.iter().filter(|d| d.n_from >= 30).map(|d| d.drift[0]).collect();
    assert!(ground.len() >= 4);
    assert!(ground.windows(2).all(|w| w[1] < w[0]), "{ground:?}");
    for d in table.drift.iter().filter(|d| d.n_from >= 30) {
        assert_eq!(d.drift.len(), 4);
    }
}

#[test]
fn converge_pure_coulomb_has_no_drift() {
    let c = bundled("hydrogen_check");
    let cv = c.converge.clone().unwrap();
    let rec = run_converge(&c, &cv.n_list, &cv.b_list).unwrap();
    let table = rec.convergence.unwrap();
    assert_eq!(table.rows.len(), 9);
    assert!(table.rows.iter().all(|r| r.energies.len() == 5));
    for d in &table.drift {
        assert!(d.drift.iter().all(|&x| x <= 1e-12), "{d:?}");
    }
}

#[test]
fn converge_single_cell() {
    let out = sturm(&[
        "converge",
        "--config",
        &config_arg("hydrogen_check"),
        "--n-list",
        "8",
        "--b-list",
        "1.5",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rec = ResultRecord::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let t = rec.convergence.unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.drift.is_empty());
}

#[test]
fn json_round_trip_is_bit_exact() {
    let rec = run_solve(&bundled("table1_schrodinger_l2")).unwrap();
    let text = rec.to_json();
    let back = ResultRecord::from_json(&text).unwrap();
    assert_eq!(back, rec);
    for (a, b) in rec.roots.iter().zip(&back.roots) {
        assert_eq!(a.e_re.to_bits(), b.e_re.to_bits());
        assert_eq!(a.e_im.to_bits(), b.e_im.to_bits());
        assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    }
    assert_eq!(back.to_json(), text);
    assert!(rec.roots.iter().all(|r| r.e_im <= 0.0));
}

fn without_timings(json: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(json).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn output_is_deterministic() {
    let cfg = config_arg("table1_kg_l1");
    let a = sturm(&["solve", "--config", &cfg, "--threads", "4"]);
    let b = sturm(&["solve", "--config", &cfg, "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(without_timings(&a.stdout), without_timings(&b.stdout));
    // byte-level: everything before the timing block is identical
    let cut = |o: &[u8]| {
        let s = String::from_utf8(o.to_vec()).unwrap();
        s[..s.find("\"timings\"").unwrap()].to_string()
    };
    assert_eq!(cut(&a.stdout), cut(&b.stdout));
}

#[test]
fn hash_ignores_output_settings() {
    let mut c = bundled("table1_schrodinger_l1");
    let h = c.hash();
    c.output.format = Format::Csv;
    c.output.path = Some("/tmp/x".into());
    assert_eq!(c.hash(), h);
    c.basis.n = 40;
    assert_ne!(c.hash(), h);
}

#[test]
fn csv_and_text_formats() {
    let cfg = config_arg("hydrogen_check");
    let out = sturm(&["solve", "--config", &cfg, "--format", "csv"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "type,E_re,E_im,residual,N,b,iterations");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "bound");
    // 17 significant digits
    assert_eq!(first[1].split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
    assert!((first[1].parse::<f64>().unwrap() + 0.5).abs() < 1e-10);

    let out = sturm(&["solve", "--config", &cfg, "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("-0.50000000"), "{text}");
    assert!(text.contains("-0.12500000"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("result.json");
    let out = sturm(&["solve", "--config", &config_arg("hydrogen_check"), "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let rec = ResultRecord::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rec.roots.len(), 5);
}

#[test]
fn flags_override_the_file() {
    let mut c = bundled("hydrogen_check");
    c.apply(&Overrides {
        l: Some(1),
        n_basis: Some(6),
        b: Some(0.7),
        bound_interval: Some([-0.2, -0.015]),
        ..Default::default()
    });
    let rec = run_solve(&c).unwrap();
    let e = bound(&rec);
    // l = 1 starts at n = 2
    assert_eq!(e.len(), 4, "{e:?}");
    assert!((e[0] + 0.125).abs() < 1e-10);
    assert!(rec.roots.iter().all(|r| r.n == 6 && r.b == 0.7));

    let out = sturm(&[
        "solve",
        "--config",
        &config_arg("hydrogen_check"),
        "--l",
        "2",
        "--bound-interval",
        "-0.1,-0.015",
        "--n-basis",
        "4",
        "--n-prime",
        "8",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = ResultRecord::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(bound(&rec).len(), 3);
    assert!((rec.roots[0].e_re + 0.5 / 9.0).abs() < 1e-10);
}

#[test]
fn threads_from_environment() {
    let cfg = config_arg("hydrogen_check");
    let out = sturm_env(&["solve", "--config", &cfg], &[("STURM_THREADS", "2")]);
    assert_eq!(out.status.code(), Some(0));
    let out = sturm_env(&["solve", "--config", &cfg], &[("STURM_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(2));
    let out = sturm_env(&["solve", "--config", &cfg], &[("STURM_THREADS", "many")]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn validation_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"equation": "schrodinger", "l": 0, "j": 0.5, "coulomb_Z": -1, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-1, -0.1]}}"#, "j"),
        (r#"{"equation": "dirac", "coulomb_Z": -1, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-1, -0.1]}}"#, "j"),
        (r#"{"equation": "kg", "l": 0, "coulomb_Z": -1, "basis": {"b": 1, "N": 5, "Nprime": 3}, "search": {"bound_interval": [-1, -0.1]}}"#, "basis.Nprime"),
        (r#"{"equation": "kg", "l": 0, "coulomb_Z": -1, "constants": {"c": 137, "alpha": 0.007}, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-1, -0.1]}}"#, "constants"),
        (r#"{"equation": "schrodinger", "l": 0, "coulomb_Z": -1, "basis": {"b": -1, "N": 5}, "search": {"bound_interval": [-1, -0.1]}}"#, "basis.b"),
        (r#"{"equation": "schrodinger", "l": 0, "coulomb_Z": -1, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-0.1, -1]}}"#, "search.bound_interval"),
        (r#"{"equation": "schrodinger", "l": 0, "coulomb_Z": -1, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-1, 0.5]}}"#, "search.bound_interval"),
        (r#"{"equation": "kg", "l": 0, "coulomb_Z": -100, "basis": {"b": 1, "N": 5}, "search": {"bound_interval": [-1, -0.1]}}"#, "coulomb_Z"),
        (r#"{"equation": "schrodinger", "l": 0, "coulomb_Z": -1, "basis": {"b": 1, "N": 5}, "colour": 3}"#, "line"),
    ];
    for (json, field) in cases {
        let cfg = write_config(dir.path(), json);
        let out = sturm(&["solve", "--config", &cfg]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{json}: {err}");
        assert!(err.contains(field), "{json}: {err}");
    }
}

#[test]
fn malformed_flag_lists_exit_2() {
    let cfg = config_arg("hydrogen_check");
    for args in [["--bound-interval", "-0.1"], ["--resonance-box", "1,2,3"], ["--bound-interval", "a,b"]] {
        let out = sturm(&["solve", "--config", &cfg, args[0], args[1]]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn greens_probe_grids() {
    // line on the physical sheet: ln|D| dips at the Bohr levels
    let mut c = bundled("hydrogen_check");
    c.search.bound_interval = Some([-0.6, -0.4]);
    let rec = run_probe(&c, [201, 1]).unwrap();
    let p = rec.probe.unwrap();
    assert_eq!(p.sheet, "physical");
    assert_eq!(p.shape, [201, 1]);
    let min = p.points.iter().min_by(|a, b| a.ln_abs_det.total_cmp(&b.ln_abs_det)).unwrap();
    assert!((min.e_re + 0.5).abs() < 2e-3);

    // box on the continued sheet
    let out = sturm(&[
        "greens-probe",
        "--config",
        &config_arg("table1_schrodinger_l2"),
        "--n-basis",
        "20",
        "--grid",
        "11,5",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 55);
    assert!(csv.starts_with("E_re,E_im,ln_abs_det,phase"));
}

#[test]
fn converge_reads_lists_from_file() {
    let mut c = bundled("hydrogen_check");
    c.converge = Some(ConvergeConfig {
        n_list: vec![3, 6],
        b_list: vec![1.0],
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::to_string(&c).unwrap());
    let out = sturm(&["converge", "--config", &cfg, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("N,b,index,E_re,drift_to_next_N"));
    assert_eq!(csv.lines().count(), 1 + 10);
}
