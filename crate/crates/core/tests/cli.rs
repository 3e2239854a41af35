use std::fs;
use std::process::{Command, Output};

use hyperberry::bounds::{ConstantSet, Provenance, ProvenanceMap};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperberry"))
        .args(args)
        .env("HYPERBERRY_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn pmf_prints_rational() {
    let o = bin(&["pmf", "--n", "2", "--M", "2", "--N", "4", "--k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "2/3\n");
}

#[test]
fn pmf_outside_support_is_zero() {
    let o = bin(&["pmf", "--n", "2", "--M", "2", "--N", "4", "--k", "-1"]);
    assert_eq!(stdout(&o), "0\n");
}

#[test]
fn cdf_json_has_backend() {
    let o = bin(&["cdf", "--n", "2", "--M", "2", "--N", "4", "--k", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cdf"], "5/6");
    assert_eq!(v["backend"], "rational");
}

#[test]
fn bound_centre_profile() {
    let o = bin(&["bound", "--n", "100", "--M", "100", "--N", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("f_bar,a1,delta,sigma,gate_ok"));
    assert_eq!(lines.next(), Some("0.5,2.25,0.0444444444444,3.53553390593,false"));
}

#[test]
fn delta_small_example() {
    let o = bin(&["delta", "--n", "2", "--M", "2", "--N", "4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["delta_sup"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(v["argmax_k"], 1);
    let csv = stdout(&bin(&["delta", "--n", "2", "--M", "2", "--N", "4"]));
    assert!(csv.lines().nth(1).unwrap().contains(",0.333333333333,1,"));
}

#[test]
fn exit_codes() {
    let invalid = bin(&["pmf", "--n", "5", "--M", "2", "--N", "4", "--k", "1"]);
    assert_eq!(invalid.status.code(), Some(1));
    assert!(stderr(&invalid).contains("n < N"));

    let unknown = bin(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));

    let refused = bin(&["certify", "--n", "100", "--M", "100", "--N", "200", "--k", "80"]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(stderr(&refused).contains("standardized_range"));
}

#[test]
fn certify_reports_enclosure() {
    let o = bin(&["certify", "--n", "100", "--M", "100", "--N", "200", "--k", "50", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lo = v["lo"].as_f64().unwrap();
    let hi = v["hi"].as_f64().unwrap();
    assert!(lo < 0.11241557570404212 && 0.11241557570404212 < hi);
}

fn constants_file(dir: &tempfile::TempDir) -> String {
    let c = ConstantSet {
        c1: 0.5,
        c2: 0.05,
        c3: 2.0,
        c4: 0.07,
        c5: 4.0,
        c6: 0.07,
        provenance: ProvenanceMap::all(Provenance::Calibrated),
        grid: "hand-picked".into(),
        calibrated_at: None,
    };
    let path = dir.path().join("c.json");
    fs::write(&path, c.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bound_with_constants_refuses_below_gate() {
    let dir = tempfile::tempdir().unwrap();
    let c = constants_file(&dir);
    let o = bin(&["bound", "--n", "100", "--M", "100", "--N", "200", "--constants", &c, "--x", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta_sigma"));

    let ok = bin(&["bound", "--n", "500000", "--M", "500000", "--N", "1000000", "--constants", &c, "--x", "-1,0,3"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    assert!(text.contains("x,nonuniform_bound,tail_bound"));
    assert_eq!(text.lines().count(), 2 + 1 + 3);
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.cfg");
    fs::write(&grid, "# small grid\nname = t\nN = 100, 400\np = 0.1, 0.5\nf = 0.5\n").unwrap();
    let g = grid.to_str().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = bin(&["sweep", "--grid", g, "--no-timestamp", "--output", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = fs::read(&out1).unwrap();
    assert_eq!(a, fs::read(&out2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("0,50,10,100,"));

    let stamped = stdout(&bin(&["sweep", "--grid", g]));
    assert!(stamped.starts_with("# generated_at="));
    assert_eq!(stamped.lines().skip(1).collect::<Vec<_>>(), text.lines().collect::<Vec<_>>());
}

#[test]
fn sweep_bad_config_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.cfg");
    fs::write(&grid, "N = 100\np = 0.5\nf = banana\n").unwrap();
    let o = bin(&["sweep", "--grid", grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"));
}

#[test]
fn calibrate_writes_constants() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.cfg");
    fs::write(&grid, "N = 20000, 40000\np = 0.3, 0.5\nf = 0.5\nrequire_gate = true\n").unwrap();
    let out = dir.path().join("c.json");
    let o = bin(&[
        "calibrate",
        "--grid",
        grid.to_str().unwrap(),
        "--no-timestamp",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = ConstantSet::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(c.calibrated_at, None);
    assert!(c.c1 > 0.0 && c.c2 <= c.c1);

    let no_gate = dir.path().join("ng.cfg");
    fs::write(&no_gate, "N = 100\np = 0.5\nf = 0.5\n").unwrap();
    let refused = bin(&["calibrate", "--grid", no_gate.to_str().unwrap()]);
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn verify_suite_passes() {
    let o = bin(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.starts_with("property,status,detail\n"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_fails_with_tiny_constants() {
    let dir = tempfile::tempdir().unwrap();
    let c = ConstantSet {
        c1: 0.01,
        c2: 0.001,
        c3: 0.01,
        c4: 0.07,
        c5: 0.01,
        c6: 0.07,
        provenance: ProvenanceMap::all(Provenance::Calibrated),
        grid: "too-small".into(),
        calibrated_at: None,
    };
    let cpath = dir.path().join("c.json");
    fs::write(&cpath, c.to_json()).unwrap();
    let grid = dir.path().join("g.cfg");
    fs::write(&grid, "N = 20000\np = 0.5\nf = 0.5\n").unwrap();
    let o = bin(&[
        "verify",
        "--constants",
        cpath.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("uniform-bound,FAIL"));
}
