use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ququart-sim"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn out_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_mapping_passes_on_spinless_two_by_two() {
    let out = out_dir("validate_pass");
    let o = run(
        &["validate-mapping", "--config", fixture("tv_2x2.toml").to_str().unwrap()],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    let v = read_json(&out.join("validation.json"));
    assert_eq!(v["passed"], true);
    assert!(v["checked"].as_u64().unwrap() > 0);
    assert_eq!(v["config"]["mapping"], "spinless_local");
}

#[test]
fn validate_mapping_reports_injected_fault() {
    let out = out_dir("validate_fault");
    let o = run(
        &[
            "validate-mapping",
            "--config",
            fixture("fault_flip.toml").to_str().unwrap(),
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("FAIL: antisymmetry"), "{err}");
    assert!(err.contains("A[(1,0)->(0,0)]"), "{err}");
}

#[test]
fn wrong_factor_fault_names_an_anticommutator() {
    let out = out_dir("validate_wrong_factor");
    let o = run(
        &[
            "validate-mapping",
            "--config",
            fixture("fault_flip.toml").to_str().unwrap(),
            "--override",
            "validation.fault={kind=\"wrong_factor\", edge=0}",
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rule_table: anticommutator of"), "{}", stderr(&o));
}

#[test]
fn validate_mapping_aux_three_by_two_includes_cross_spin() {
    let out = out_dir("validate_aux");
    let o = run(
        &[
            "validate-mapping",
            "--config",
            fixture("fh_2x2_aux.toml").to_str().unwrap(),
            "--override",
            "lattice.lx=3",
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("cross_spin"));
}

#[test]
fn evolve_zero_steps_gives_one_exact_row() {
    let out = out_dir("evolve_zero");
    let cfg = root().join("presets/tv_2x3.toml");
    let o = run(
        &["evolve", "--config", cfg.to_str().unwrap(), "--override", "n_steps=0"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("tv_2x3.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,site_0,site_1,site_2,site_3,site_4,site_5,delta_n");
    let delta: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!(delta < 1e-9);
    let v = read_json(&out.join("tv_2x3.json"));
    assert_eq!(v["config"]["initial_state"]["preset"], "tv_2x3");
}

#[test]
fn evolve_spinful_preset_has_site_times_spin_columns() {
    let out = out_dir("evolve_fh");
    let cfg = root().join("presets/fh_2x3.toml");
    let o = run(
        &["evolve", "--config", cfg.to_str().unwrap(), "--override", "n_steps=0"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("fh_2x3.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 12 + 1);
    assert_eq!(header[1], "site_0_up");
    assert_eq!(header[12], "site_5_down");
}

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = fixture("tv_2x2.toml");
    let a = out_dir("repro_a");
    let b = out_dir("repro_b");
    for d in [&a, &b] {
        let o = run(&["evolve", "--config", cfg.to_str().unwrap()], d);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ca = std::fs::read(a.join("evolve.csv")).unwrap();
    let cb = std::fs::read(b.join("evolve.csv")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(String::from_utf8(ca).unwrap().lines().count(), 1 + 5);
}

#[test]
fn gate_count_reports_five_nine_twenty() {
    let out = out_dir("gate_count");
    let o = run(&["gate-count"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("gate_counts.csv")).unwrap();
    let totals: Vec<(String, String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[4].to_string(), f[5].to_string())
        })
        .collect();
    assert_eq!(totals[0].0, "spinless_local");
    assert_eq!(totals[0].1, "5");
    assert_eq!((totals[1].1.as_str(), totals[1].2.as_str()), ("9", "5"));
    assert_eq!(totals[2].1, "20");
}

#[test]
fn weights_table_is_emitted() {
    let out = out_dir("weights");
    let o = run(&["weights"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    assert!(csv.lines().count() >= 7);
}

#[test]
fn constraint_check_certifies_spinless_vacuum() {
    let out = out_dir("constraint_check");
    let cfg = root().join("presets/tv_2x3.toml");
    let o = run(&["constraint-check", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out.join("certificate.json"));
    for c in v["certificate"]["constraints"].as_array().unwrap() {
        let e = c["expectation"].as_f64().unwrap();
        let s = c["sign"].as_f64().unwrap();
        assert!((e - s).abs() < 1e-10);
    }
    assert_eq!(v["toric"]["wen_form_matches"], true);
}

#[test]
fn resource_and_config_errors_have_distinct_codes() {
    let out = out_dir("errors");
    let cfg = root().join("presets/tv_2x3.toml");
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--budget", "100"], &out);
    assert_eq!(o.status.code(), Some(3));
    let o = run(
        &["evolve", "--config", cfg.to_str().unwrap(), "--override", "tau=0"],
        &out,
    );
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["evolve"], &out);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["evolve", "--config", "/nonexistent.toml"], &out);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_writes_isolated_outputs() {
    let out = out_dir("sweep");
    let o = run(
        &[
            "sweep",
            "--config",
            fixture("tv_2x2.toml").to_str().unwrap(),
            "--config",
            fixture("fh_2x2_aux.toml").to_str().unwrap(),
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("tv_2x2/evolve.csv").exists());
    assert!(out.join("fh_2x2_aux/evolve.csv").exists());
}
