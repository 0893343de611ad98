use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dasis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dasis"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: &str = r#"
seed = 3
pipelines = ["da-sis:4", "zf-iir", "fir:4", "no-eq"]

[optimizer]
mask_draws = 3
max_iters = 40

[sweep]
snr_db = [0.0, 6.0, 12.0]
min_errors = 20
max_bits = 50000
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn validate_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let o = dasis(&["validate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    assert!(text.contains("PASS pipeline zf-iir: channel inverse is stable"));

    let cfg = write_config(dir.path(), &QUICK.replace("da-sis:4", "da-sis:5"));
    let o = dasis(&["validate", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL pipeline da-sis:5: 5 elements per layer is not a perfect square"));
}

#[test]
fn unstable_taps_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{QUICK}\n[channel]\ntaps = [{{ modulus = 1.0, phase = 0.0 }}, {{ modulus = 1.0, phase = 0.0 }}]\n"
    );
    let cfg = write_config(dir.path(), &text);
    let o = dasis(&["validate", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL pipeline zf-iir: channel inverse is unstable"));
}

#[test]
fn parse_errors_exit_nonzero_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n\n[sweep]\nsnr_db = [0.0, 1.0\n");
    for cmd in ["run", "validate"] {
        let o = dasis(&[cmd, "--config", &cfg]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    }
    let missing = dir.path().join("missing.toml");
    let o = dasis(&["run", "--config", missing.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.toml"));
}

#[test]
fn run_writes_artifacts_deterministically_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = dasis(&["run", "--config", &cfg, "--out-dir", a.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote"));
    let o = dasis(&["run", "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--threads", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["da-sis-4.csv", "da-sis-4.surface.toml", "fir-4.csv", "no-eq.csv", "plot_ber.py", "zf-iir.csv"]
    );
    for n in &names {
        assert_eq!(read(&a, n), read(&b, n), "{n} differs between thread counts");
    }
    let csv = read(&a, "no-eq.csv");
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("label,snr_db,ber,bits,errors,ci\n"));
}

#[test]
fn optimized_surface_sweeps_back_to_the_same_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let run_dir = dir.path().join("run");
    let opt_dir = dir.path().join("opt");
    let sweep_dir = dir.path().join("sweep");
    assert!(dasis(&["run", "--config", &cfg, "--out-dir", run_dir.to_str().unwrap()]).status.success());
    let o = dasis(&["optimize", "--config", &cfg, "--out-dir", opt_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(&opt_dir).unwrap().count(), 1);
    assert_eq!(read(&opt_dir, "da-sis-4.surface.toml"), read(&run_dir, "da-sis-4.surface.toml"));

    let surface = opt_dir.join("da-sis-4.surface.toml");
    let o = dasis(&[
        "sweep",
        "--config",
        &cfg,
        "--surface",
        surface.to_str().unwrap(),
        "--out-dir",
        sweep_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&sweep_dir, "da-sis-4.csv"), read(&run_dir, "da-sis-4.csv"));
}

#[test]
fn baseline_skips_surfaces_and_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("base");
    let o = dasis(&["baseline", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.join("da-sis-4.csv").exists());
    let reference = read(&out, "no-eq.csv");

    let reseeded = dir.path().join("reseeded");
    let o = dasis(&["baseline", "--config", &cfg, "--out-dir", reseeded.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(read(&reseeded, "no-eq.csv"), reference);

    let transmit = dir.path().join("transmit");
    let o = dasis(&[
        "baseline",
        "--config",
        &cfg,
        "--out-dir",
        transmit.to_str().unwrap(),
        "--snr-def",
        "transmit",
    ]);
    assert!(o.status.success());
    assert_ne!(read(&transmit, "zf-iir.csv"), read(&out, "zf-iir.csv"));

    let o = dasis(&["baseline", "--config", &cfg, "--snr-def", "sideways"]);
    assert!(!o.status.success());
}

#[test]
fn failed_runs_leave_no_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let o = dasis(&["baseline", "--config", &cfg, "--out-dir", blocker.join("out").to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);

    let o = dasis(&["run", "--config", &cfg, "--threads", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--threads"));
}
