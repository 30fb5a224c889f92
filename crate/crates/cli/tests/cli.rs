use std::path::Path;
use std::process::{Command, Output};

use tactile_cs::tacf::decode_sequence;

const SHORT: &[&str] = &["--set", "simulate.trajectory.steps=300"];

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tactile-cs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = run(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(a.path(), &[&["simulate"], SHORT].concat());
    ok(b.path(), &[&["simulate"], SHORT].concat());
    for name in ["golf_ball.true.tacf", "golf_ball.sensor.tacf"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
        let frames = decode_sequence(&x).unwrap();
        assert_eq!(frames.len(), 300);
        assert!(frames.iter().all(|f| f.side() == 32));
    }
    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &[&["simulate", "--seed", "9"], SHORT].concat());
    assert_ne!(
        std::fs::read(a.path().join("golf_ball.sensor.tacf")).unwrap(),
        std::fs::read(c.path().join("golf_ball.sensor.tacf")).unwrap()
    );
}

#[test]
fn zero_depth_press_has_no_contact() {
    let d = tempfile::tempdir().unwrap();
    let stdout = ok(
        d.path(),
        &[&["simulate", "--set", "simulate.trajectory.descent_depth_mm=0"], SHORT].concat(),
    );
    assert!(stdout.contains("300 frames, 0 in contact"), "{stdout}");
    let truth = decode_sequence(&std::fs::read(d.path().join("golf_ball.true.tacf")).unwrap()).unwrap();
    assert!(truth.iter().all(|f| f.max_force() == 0.0));
}

#[test]
fn measure_then_reconstruct() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &[&["simulate"], SHORT].concat());
    let sensor = arg(&d.path().join("golf_ball.sensor.tacf"));
    let truth = arg(&d.path().join("golf_ball.true.tacf"));
    let stdout = ok(d.path(), &["measure", "--input", &sensor, "--m", "256"]);
    assert!(stdout.contains("1024 -> 256"), "{stdout}");
    let measurements = arg(&d.path().join("measurements.json"));
    ok(
        d.path(),
        &[
            "reconstruct",
            "--input",
            &measurements,
            "--truth",
            &truth,
            "--lambda",
            "0.01",
        ],
    );
    let frames = decode_sequence(&std::fs::read(d.path().join("reconstruction.tacf")).unwrap()).unwrap();
    assert_eq!(frames.len(), 300);
    assert!(frames.iter().all(|f| f.forces().iter().all(|&v| v >= 0.0)));
    let rows = read_csv(&d.path().join("reconstruction.csv"));
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().all(|r| r[1] == "20"));
    let finite: Vec<f64> = rows
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap())
        .filter(|p| p.is_finite())
        .collect();
    assert!(finite.iter().sum::<f64>() / finite.len() as f64 > 20.0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("reconstruct.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "reconstruct");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn separable_measurement_round_trip() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &[&["simulate"], SHORT].concat());
    let sensor = arg(&d.path().join("golf_ball.sensor.tacf"));
    let stdout = ok(
        d.path(),
        &["measure", "--input", &sensor, "--operator", "separable", "--m", "256"],
    );
    assert!(stdout.contains("separable"), "{stdout}");
    let measurements = arg(&d.path().join("measurements.json"));
    ok(
        d.path(),
        &["reconstruct", "--input", &measurements, "--iterations", "5"],
    );
    let rows = read_csv(&d.path().join("reconstruction.csv"));
    assert!(rows.iter().all(|r| r[1] == "5" && r[3].is_empty()));
}

#[test]
fn observe_train_classify() {
    let d = tempfile::tempdir().unwrap();
    let small = [
        "--set",
        r#"observe.objects=["golf_ball","cup","clamp"]"#,
        "--set",
        r#"observe.perturbations={"row_offsets_mm":[0,4],"col_offsets_mm":[0,4],"yaw_deg":[0,10,20]}"#,
    ];
    let stdout = ok(d.path(), &[&["observe"][..], &small].concat());
    assert!(stdout.contains("36 observations"), "{stdout}");
    let obs = arg(&d.path().join("observations"));
    let rows = read_csv(&d.path().join("observations.csv"));
    assert_eq!(rows.len(), 36);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("observations.json")).unwrap()).unwrap();
    assert_eq!(manifest["frames"], "observations.tacf");
    assert_eq!(manifest["observations"], 36);
    assert_eq!(manifest["class_names"].as_array().unwrap().len(), 3);
    let grid = manifest["perturbations"].as_array().unwrap();
    assert_eq!(grid.len(), 12);
    let p: usize = rows[5][3].parse().unwrap();
    assert!(grid[p]["yaw_deg"].is_number());

    let stdout = ok(
        d.path(),
        &[
            "train",
            "--observations",
            &obs,
            "--set",
            "train.dev_fraction=0.5",
            "--set",
            "train.val_fraction=0.25",
        ],
    );
    assert!(stdout.contains("3 classes, 16 features"), "{stdout}");
    assert!(stdout.contains("3 binary SVMs"), "{stdout}");
    let model = arg(&d.path().join("model.json"));
    ok(d.path(), &["classify", "--model", &model, "--observations", &obs]);
    let preds = read_csv(&d.path().join("predictions.csv"));
    assert_eq!(preds.len(), 36);
    assert!(preds.iter().all(|r| r[3] == "2"));
    let confusion = read_csv(&d.path().join("predictions_confusion.csv"));
    assert_eq!(confusion.len(), 3);
    for row in &confusion {
        let total: f64 = row[1..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 100.0).abs() < 1e-3);
    }
}

#[test]
fn classify_rejects_mismatched_observations() {
    let d = tempfile::tempdir().unwrap();
    let grid = r#"observe.perturbations={"row_offsets_mm":[0,4],"col_offsets_mm":[0],"yaw_deg":[0,10]}"#;
    ok(
        d.path(),
        &[
            "observe",
            "--set",
            r#"observe.objects=["golf_ball","cup"]"#,
            "--set",
            grid,
        ],
    );
    let obs = arg(&d.path().join("observations"));
    ok(
        d.path(),
        &[
            "train",
            "--observations",
            &obs,
            "--set",
            "train.operator=null",
            "--set",
            "train.dev_fraction=0.5",
            "--set",
            "train.val_fraction=0.25",
        ],
    );
    let other = tempfile::tempdir().unwrap();
    ok(
        other.path(),
        &[
            "observe",
            "--set",
            r#"observe.objects=["golf_ball","cup"]"#,
            "--set",
            grid,
            "--set",
            r#"observe.array={"side":16,"extent_mm":256}"#,
        ],
    );
    let o = run(
        d.path(),
        &[
            "classify",
            "--model",
            &arg(&d.path().join("model.json")),
            "--observations",
            &arg(&other.path().join("observations")),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("taxels"));
}

#[test]
fn rip_report_reference_rows() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["rip-report"]);
    let rows = read_csv(&d.path().join("rip.csv"));
    let identity: Vec<_> = rows.iter().filter(|r| r[0] == "identity").collect();
    assert_eq!(identity.len(), 3);
    assert!(identity
        .iter()
        .all(|r| r[6].parse::<f64>().unwrap() == 0.0 && r[8] == "ok"));
    let dup = rows
        .iter()
        .find(|r| r[0] == "duplicated_column" && r[5] == "2")
        .expect("duplicate row at k = 2");
    assert!(dup[6].parse::<f64>().unwrap() >= 1.0 - 1e-9);
    assert_eq!(dup[8], "fails 2-RIP");
    assert!(rows
        .iter()
        .filter(|r| r[0] == "seeded" && r[2] != "pixel")
        .all(|r| !r[7].is_empty()));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(d.path(), args).status.code();
    assert_eq!(code(&["simulate", "--set", "nonsense=1"]), Some(2));
    assert_eq!(code(&["simulate", "--set", "simulate.noise_sigma=-1"]), Some(2));
    assert_eq!(code(&["simulate", "--set", "seed"]), Some(2));
    assert_eq!(
        code(&[
            "measure",
            "--m",
            "5000",
            "--input",
            &arg(&d.path().join("missing.tacf"))
        ]),
        Some(3)
    );
    assert_eq!(
        code(&["reconstruct", "--input", &arg(&d.path().join("missing.json"))]),
        Some(3)
    );
    assert_eq!(code(&["no-such-verb"]), Some(2));
    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&["simulate", "--config", &arg(&cfg)]), Some(2));
}

#[test]
fn over_compression_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &[&["simulate"], SHORT].concat());
    let sensor = arg(&d.path().join("golf_ball.sensor.tacf"));
    let o = run(d.path(), &["measure", "--input", &sensor, "--m", "2000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dumped_config_reloads() {
    let d = tempfile::tempdir().unwrap();
    let dumped = ok(
        d.path(),
        &[
            "simulate",
            "--seed",
            "5",
            "--set",
            "acquisition.ratios=[4]",
            "--dump-config",
        ],
    );
    let path = d.path().join("cfg.json");
    std::fs::write(&path, &dumped).unwrap();
    let again = ok(d.path(), &["simulate", "--config", &arg(&path), "--dump-config"]);
    assert_eq!(dumped, again);
    let v: serde_json::Value = serde_json::from_str(&dumped).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["acquisition"]["ratios"], serde_json::json!([4.0]));
}

#[test]
fn sparsity_table_lists_every_basis() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "sparsity-table",
            "--set",
            r#"sparsity.scene.objects=["golf_ball"]"#,
            "--set",
            "sparsity.scene.trajectory.steps=200",
        ],
    );
    let rows = read_csv(&d.path().join("sparsity.csv"));
    let bases: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(bases, ["haar2", "d4_2d", "dct2"]);
    assert!(rows.iter().all(|r| r[4] == "200"));
}
