use std::path::Path;
use std::process::{Command, Output};

fn kinetic(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KINETIC_THREADS")
        .output()
        .unwrap()
}

const SMALL: &str = "lx = 4\nlv = 2\ndv = 0.02\ndt = 1e-3\nt_final = 0.2\npatch_x = 2\npatch_v = 0\npatch_side = 1\nsnapshot_stride = 100\nsample_stride = 20\n";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("k.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_scatter_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = kinetic(&["run", "--config", &cfg, "--out", "a"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("a/manifest.json").exists());
    assert!(tmp.path().join("a/observables.csv").exists());

    let out = kinetic(&["scatter", "--run-dir", "a", "--out", "s"], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("d >= 2"));
    assert!(tmp.path().join("s/scattering.csv").exists());

    let out = kinetic(&["compare", "--run-dir", "a", "--run-dir", "a", "--out", "c"], tmp.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("c/compare.csv")).unwrap();
    assert!(text.starts_with("t,l1_distance\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0e0")));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dt = 1.0\n");
    let out = kinetic(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));

    let cfg = write_config(tmp.path(), "colour = blue\n");
    let out = kinetic(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = kinetic(&["scatter", "--run-dir", "nowhere"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));

    let out = kinetic(&["run", "--config", "absent.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(3));

    let out = kinetic(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn picard_non_convergence_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}dx = 0.125\ndv = 0.125\ngamma = 50\npicard_max_iter = 2\npicard_halvings = 0\npicard_tol = 1e-14\n", SMALL.replace("dv = 0.02\n", "")),
    );
    let out = kinetic(&["picard", "--config", &cfg, "--out", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn thread_cap_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_kinetic"))
            .args(["homogeneous", "--out", "h"])
            .current_dir(tmp.path())
            .env("KINETIC_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert_eq!(run("zero").status.code(), Some(1));
}

#[test]
fn monokinetic_reports_the_blowup_time() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kinetic(&["monokinetic", "--out", "m"], tmp.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find(|l| l.starts_with("blowup_time")).unwrap();
    let t: f64 = line.split(':').nth(1).unwrap().trim().parse().unwrap();
    assert!((t - 1.0).abs() <= 2e-3);
}

#[test]
fn keys_lists_every_default() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kinetic(&["keys"], tmp.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("dt = 1e-4")));
    assert_eq!(text.lines().count(), kinetic_core::cli_io::KEYS.len());
}
