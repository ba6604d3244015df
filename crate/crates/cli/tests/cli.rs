use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn ionspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionspin"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, value: &Value) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
        p
    }

    fn exec(&self, command: &str, config: &Path, extra: &[&str]) -> Output {
        let out = self.path("out");
        let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        ionspin(&args)
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path("out").join(name)).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }
}

fn chain(n: usize, beta_x: f64) -> Value {
    json!({
        "n_ions": n,
        "spacing_um": 5.0,
        "mass_amu": 40.0,
        "trap_freq_mhz": { "x": 10.0, "y": 10.0, "z": 2.0 },
        "stiffness": { "x": beta_x, "y": beta_x, "z": 0.05 }
    })
}

fn benchmark_drives(phase: f64) -> Value {
    json!([
        { "axis": "x", "sideband_order": 1, "intensity_mhz": 0.125, "detuning_mhz": -1.25, "lamb_dicke": 0.2, "phase": phase },
        { "axis": "x", "sideband_order": 2, "intensity_mhz": 0.125, "detuning_mhz": -2.5, "lamb_dicke": 0.2 },
        { "axis": "z", "rabi_freq_mhz": 1.0, "detuning_mhz": 0.4, "lattice_multiple": 1, "phase_uniform": true }
    ])
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn modes_two_ions() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "chain": chain(2, 0.01) }));
    let o = r.exec("modes", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = r.read("modes.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,n,eigenvalue,frequency");
    assert_eq!(lines.len(), 7);
    for axis in ["x", "y", "z"] {
        let rows: Vec<Vec<f64>> = lines
            .iter()
            .filter(|l| l.starts_with(&format!("{axis},")))
            .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 2);
        assert!((rows[0][0] + 2.0).abs() < 1e-12 && rows[1][0].abs() < 1e-12);
    }
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
}

#[test]
fn unstable_chain_exits_nonzero() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "chain": chain(2, 0.6) }));
    let o = r.exec("modes", &cfg, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("instability"), "{}", stderr(&o));
}

#[test]
fn fifteen_radial_modes_inside_band() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "chain": chain(15, 0.05) }));
    assert_eq!(code(&r.exec("modes", &cfg, &[])), 0);
    let csv = r.read("modes.csv");
    let radial: Vec<(f64, f64)> = csv
        .lines()
        .filter(|l| l.starts_with("x,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(radial.len(), 15);
    let vmin = radial.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let low = 10.0 * (1.0 + 0.05 * vmin).sqrt();
    assert!(radial.iter().all(|&(_, w)| w >= low - 1e-12 && w <= 10.0 + 1e-12));
}

#[test]
fn couplings_benchmark_estimates() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "chain": chain(10, 0.05), "drives": benchmark_drives(0.0) }));
    let o = r.exec("couplings", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = r.json("couplings.json");
    assert!((doc["closed_form"]["j2_khz"].as_f64().unwrap() - 0.625).abs() < 1e-9);
    assert!((doc["closed_form"]["j3_khz"].as_f64().unwrap() - 0.600).abs() < 1e-9);
    assert!((doc["couplings"]["error_budget"]["total"].as_f64().unwrap() - 1e-2).abs() < 1e-15);
    assert!(doc["dipolar_fit"]["exponent"].is_number());
    assert_eq!(doc["variant"], "eq6-literal");
    assert!(r.read("j3.csv").lines().count() > 1);
}

#[test]
fn variant_flag_changes_three_spin_terms() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "chain": chain(4, 0.05), "drives": benchmark_drives(0.0) }));
    assert_eq!(code(&r.exec("couplings", &cfg, &[])), 0);
    let literal = r.read("j3.csv");
    assert_eq!(code(&r.exec("couplings", &cfg, &["--variant", "eq6-corrected"])), 0);
    assert_ne!(literal, r.read("j3.csv"));
    assert_eq!(r.json("couplings.json")["variant"], "eq6-corrected");
    assert_eq!(code(&r.exec("couplings", &cfg, &["--variant", "eq7"])), 1);
}

#[test]
fn quadrature_phase_has_no_three_spin_terms() {
    let r = Run::new();
    let cfg = r.config(
        "c.json",
        &json!({ "chain": chain(6, 0.05), "drives": benchmark_drives(std::f64::consts::FRAC_PI_2) }),
    );
    assert_eq!(code(&r.exec("couplings", &cfg, &[])), 0);
    assert_eq!(r.json("couplings.json")["couplings"]["j3"], json!([]));
    assert_eq!(r.read("j3.csv"), "j,k,l,value\n");
}

#[test]
fn screening_hits_target_or_refuses() {
    let r = Run::new();
    let mut doc = json!({
        "chain": chain(10, 0.05),
        "drives": benchmark_drives(0.0),
        "model": { "h_khz": 0.5, "screening_target_khz": 0.065 }
    });
    let cfg = r.config("c.json", &doc);
    assert_eq!(code(&r.exec("couplings", &cfg, &[])), 0);
    let mean = r.json("couplings.json")["screening"]["mean_nn"].as_f64().unwrap();
    assert!((mean - 0.065).abs() < 1e-12, "{mean}");

    doc["model"]["screening_target_khz"] = json!(10.0);
    let cfg = r.config("c.json", &doc);
    let o = r.exec("couplings", &cfg, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn ground_degeneracy_and_free_fermion() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "model": { "n": 3, "j2_khz": 0.0, "j3_khz": -1.0, "h_khz": 0.0 } }));
    assert_eq!(code(&r.exec("ground", &cfg, &[])), 0);
    let g = r.json("ground.json");
    assert_eq!(g["degeneracy"], 4);
    assert!((g["e0"].as_f64().unwrap() + 1.0).abs() < 1e-12);

    let cfg = r.config("c.json", &json!({ "model": { "n": 8, "j2_khz": 1.0, "h_khz": 1.0 } }));
    assert_eq!(code(&r.exec("ground", &cfg, &[])), 0);
    let e0 = r.json("ground.json")["e0"].as_f64().unwrap();
    assert!((e0 - ionspin::oracles::tfi_free_fermion(8, 1.0, 1.0)).abs() < 1e-10);
}

#[test]
fn validation_errors_exit_one() {
    let r = Run::new();
    let cfg = r.config("c.json", &json!({ "model": { "n": 3, "bonds": [[0, 5, 1.0]], "h_khz": 1.0 } }));
    let o = r.exec("ground", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bonds[0]"), "{}", stderr(&o));

    let p = r.path("typo.json");
    std::fs::write(&p, "{\n  \"model\": {\n    \"n\": 3,\n    \"hkhz\": 1.0\n  }\n}\n").unwrap();
    let o = r.exec("ground", &p, &[]);
    assert_eq!(code(&o), 1);
    let msg = stderr(&o);
    assert!(msg.contains("line 4") && msg.contains("model"), "{msg}");

    let o = ionspin(&["ground"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn scan_is_reproducible_from_metadata() {
    let r = Run::new();
    let input = json!({
        "scan": {
            "n": 6,
            "h_khz": 1.0,
            "j2_khz": { "min": 0.0, "max": 3.0, "points": 5 },
            "j3_khz": { "min": -3.0, "max": 0.0, "points": 4 }
        }
    });
    let cfg = r.config("c.json", &input);
    assert_eq!(code(&r.exec("scan", &cfg, &["--workers", "1"])), 0);
    let first = r.read("scan.csv");
    assert_eq!(first.lines().count(), 21);
    assert!(first.starts_with("j2,j3,h,n,e0,gap,o_af,o_f,label\n"));

    assert_eq!(code(&r.exec("scan", &cfg, &["--workers", "3"])), 0);
    assert_eq!(first, r.read("scan.csv"));

    let meta = r.json("scan.meta.json");
    assert_eq!(meta["config"], input);
    let replay = r.path("replay.json");
    std::fs::copy(r.path("out").join("scan.meta.json"), &replay).unwrap();
    assert_eq!(code(&r.exec("scan", &replay, &[])), 0);
    assert_eq!(first, r.read("scan.csv"));
    assert_eq!(r.json("scan.meta.json"), meta);
}

#[test]
fn ghz_ramp_reaches_target() {
    let r = Run::new();
    let cfg = r.config(
        "c.json",
        &json!({ "ramp": {
            "duration": 50.0,
            "steps": 2000,
            "start": { "j2_khz": -1.0, "j3_khz": 0.0, "h_khz": 5.0 },
            "end": { "j2_khz": -1.0, "j3_khz": 0.0, "h_khz": 0.05 },
            "targets": ["ghz"],
            "sample_every": 500
        }}),
    );
    let o = r.exec("ramp", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = r.read("ramp.csv");
    assert!(csv.starts_with("time,j2,j3,h,energy,ground_energy,gap,ground_fidelity,fidelity_ghz\n"));
    assert_eq!(csv.lines().count(), 6);
    let last: f64 = csv.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(last >= 0.9, "{last}");
}

#[test]
fn verify_exit_codes() {
    let o = ionspin(&["verify", "--n-max", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);

    let o = ionspin(&["verify", "--n-max", "6", "--perturb", "1e-6"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));

    let o = ionspin(&["verify", "--n-max", "20"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("refusing"));
}
