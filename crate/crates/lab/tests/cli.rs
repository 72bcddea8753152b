use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use manelab::config::Format;
use manelab::{run, Command, LabError, Options};

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn opts(config: Option<std::path::PathBuf>, out: &Path) -> Options {
    Options { config, out: Some(out.to_path_buf()), ..Default::default() }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

const SMALL_CUBE: &str = r#"{"drive": {"tau": 1.0}, "geometry": {"cloud": "cube", "levels": [4, 9, 16, 25]}}"#;

#[test]
fn reruns_reproduce_csv_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_CUBE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ra = run(Command::Report, &Options { threads: Some(1), ..opts(Some(cfg.clone()), &a) }).unwrap();
    run(Command::Report, &Options { threads: Some(3), ..opts(Some(cfg), &b) }).unwrap();
    assert_eq!(ra.exit_code(), 0, "{}", ra.table());
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() >= 8, "{:?}", fa.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(fa, fb);
    let names: Vec<&str> = ra.verdicts.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names[..4], ["gap_check", "floquet_shift", "floquet_decay", "simulate"]);
    assert_eq!(*names.last().unwrap(), "dimension");
    for f in &ra.files {
        assert!(a.join(&f.path).exists());
    }
}

#[test]
fn resolved_config_materializes_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let r = run(Command::GapCheck, &opts(None, &out)).unwrap();
    let text = fs::read_to_string(out.join("resolved_config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["spectrum"]["params"]["c"], 1.0);
    assert_eq!(v["dynamics"]["L"], 2.5);
    assert_eq!(v["drive"]["T_scale"], 1.0);
    assert_eq!(v["expect"]["gap_check"], "obstruction");
    assert_eq!(r.scenario_hash.len(), 64);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario_hash"], r.scenario_hash.as_str());
    assert_eq!(report["verdicts"][0]["verdict"], "obstruction");
}

#[test]
fn gap_check_regimes() {
    let tmp = tempfile::tempdir().unwrap();
    let small = write_config(tmp.path(), "s.json", r#"{"dynamics": {"L": 0.4}}"#);
    let r = run(Command::GapCheck, &opts(Some(small), &tmp.path().join("s"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "gap_holds");
    let two = write_config(tmp.path(), "t.json", r#"{"dynamics": {"L": 2.0}}"#);
    let r = run(Command::GapCheck, &opts(Some(two), &tmp.path().join("t"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "obstruction");
    let q = write_config(tmp.path(), "q.json", r#"{"spectrum": {"family": "quadratic"}}"#);
    let r = run(Command::GapCheck, &opts(Some(q), &tmp.path().join("q"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "unbounded_gap");
    let row = fs::read_to_string(tmp.path().join("t/gap_check.csv")).unwrap();
    assert!(row.lines().nth(1).unwrap().ends_with(",0,63,1,true,true,obstruction"), "{row}");
}

#[test]
fn zero_rotation_removes_the_shift_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "e.json", r#"{"dynamics": {"epsilon": 0.0}}"#);
    let r = run(Command::Floquet, &opts(Some(c), &tmp.path().join("e"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "no_pattern");
    assert_eq!(r.exit_code(), 2);
    let r = run(Command::Floquet, &opts(None, &tmp.path().join("d"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "shift_pattern");
    assert_eq!(r.verdicts[1].verdict, "super_exponential");
    let iterates = fs::read_to_string(tmp.path().join("d/floquet_iterates.csv")).unwrap();
    assert_eq!(iterates.lines().count(), 14);
    assert!(iterates.lines().nth(1).unwrap().starts_with("0,0.0000000000000000e0,2,1"));
}

#[test]
fn zero_separation_is_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        "z.json",
        r#"{"dynamics": {"initial_amplitude": 0.0}, "expect": {"simulate": "degenerate", "modulus": []}}"#,
    );
    let r = run(Command::Simulate, &opts(Some(c), &tmp.path().join("z"))).unwrap();
    assert_eq!(r.verdicts.len(), 1);
    assert_eq!(r.verdicts[0].verdict, "degenerate");
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn default_simulation_fits_and_flags_the_modulus() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(Command::Simulate, &opts(None, tmp.path())).unwrap();
    assert_eq!(r.exit_code(), 0, "{}", r.table());
    assert!(r.verdicts[0].constants["kappa_fit"] > 0.0);
    assert_eq!(r.verdicts[2].verdict, "upward");
    let pair = fs::read_to_string(tmp.path().join("simulate_pair.csv")).unwrap();
    assert_eq!(pair.lines().count(), 1 + 6 * 16 + 1);
}

#[test]
fn grid_and_file_clouds() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_config(tmp.path(), "g.json", r#"{"geometry": {"cloud": "grid", "s_list": [0]}}"#);
    let r = run(Command::Dimension, &opts(Some(g), &tmp.path().join("g"))).unwrap();
    assert_eq!(r.verdicts[0].verdict, "finite");

    let mut text = String::from("x0,x1\n");
    for i in 0..15 {
        for j in 0..15 {
            text += &format!("{},{}\n", i as f64 / 14.0, j as f64 / 14.0);
        }
    }
    let cloud = tmp.path().join("cloud.csv");
    fs::write(&cloud, text).unwrap();
    let body = format!(
        r#"{{"geometry": {{"cloud": "file", "file": {:?}, "s_list": [0]}}, "expect": {{"dimension": "finite"}}}}"#,
        cloud.to_str().unwrap()
    );
    let f = write_config(tmp.path(), "f.json", &body);
    let r = run(Command::Dimension, &Options { format: Some(Format::Csv), ..opts(Some(f), &tmp.path().join("f")) }).unwrap();
    assert_eq!(r.verdicts[0].verdict, "finite");
    assert!(!tmp.path().join("f/dimension.json").exists());
    let rows = fs::read_to_string(tmp.path().join("f/dimension.csv")).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "s,eps,ln_eps,N_eps,D_eps,local_slope");
    assert_eq!(rows.lines().count(), 9);
}

#[test]
fn cloud_parse_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cloud = tmp.path().join("bad.csv");
    fs::write(&cloud, "x0,m2\n0.5,ln:-3\n0.25,oops\n").unwrap();
    let body = format!(r#"{{"geometry": {{"cloud": "file", "file": {:?}}}}}"#, cloud.to_str().unwrap());
    let f = write_config(tmp.path(), "f.json", &body);
    let err = run(Command::Dimension, &opts(Some(f), &tmp.path().join("o"))).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3") && msg.contains("oops"), "{msg}");
}

#[test]
fn cube_levels_diverge() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", SMALL_CUBE);
    let r = run(Command::Dimension, &opts(Some(c), tmp.path())).unwrap();
    assert_eq!(r.verdicts[0].verdict, "diverging");
    assert_eq!(r.verdicts[0].constants["bounds_hold"], 1.0);
    let rows = fs::read_to_string(tmp.path().join("dimension_cube.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn section4_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(
        tmp.path(),
        "s.json",
        r#"{"spectrum": {"family": "quadratic", "n_max": 200}, "geometry": {"cloud": "section4"}}"#,
    );
    let r = run(Command::Dimension, &opts(Some(c), tmp.path())).unwrap();
    assert_eq!(r.verdicts[0].verdict, "bounded_profile", "{}", r.table());
    let s = fs::read_to_string(tmp.path().join("smoothness.csv")).unwrap();
    let verdicts: Vec<&str> = s.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(verdicts, ["bounded", "bounded", "unbounded"]);
}

#[test]
fn config_errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "u.json", r#"{"geometry": {"clouds": "grid"}}"#);
    let err = run(Command::Dimension, &opts(Some(c), tmp.path())).unwrap_err();
    assert!(matches!(err, LabError::Config(_)));
    assert!(err.to_string().contains("clouds"));
    let err = run(Command::Dimension, &Options { scales: Some("1:2:3".into()), ..opts(None, tmp.path()) }).unwrap_err();
    assert!(err.to_string().contains("eps_hi > eps_lo"));
}

fn bin(args: &[&str]) -> std::process::Output {
    Proc::new(env!("CARGO_BIN_EXE_manelab")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let ok = bin(&["gap-check", "--out", out]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("obstruction"));

    let finding = write_config(tmp.path(), "q.json", r#"{"spectrum": {"family": "quadratic"}, "expect": {"gap_check": "obstruction"}}"#);
    let r = bin(&["gap-check", "--config", finding.to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(2));

    let bad = write_config(tmp.path(), "b.json", r#"{"dynamics": {"LL": 1}}"#);
    let r = bin(&["gap-check", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown field `LL`"));

    let r = bin(&["simulate", "--config", tmp.path().join("missing.json").to_str().unwrap(), "--out", out]);
    assert_eq!(r.status.code(), Some(1));
}
