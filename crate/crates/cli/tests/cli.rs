use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oamturb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oamturb")).args(args).output().expect("binary runs")
}

fn small_sweep(out: &Path, threads: &str) -> Output {
    oamturb(&[
        "--threads", threads, "sweep", "--ell", "1,3", "--w-steps", "3", "--w-max", "1.0",
        "--realizations", "4", "--bootstrap", "10", "--grid-n", "128",
        "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn negativity_table_csv() {
    let out = oamturb(&["negativity", "--ell", "1", "--w-values", "0,0.68", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ell,W,negativity_w0_over_r0,negativity_wp_over_r0");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,0,0.9763"));
}

#[test]
fn sweep_outputs_are_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_sweep(&a, "1").status.success());
    assert!(small_sweep(&b, "2").status.success());
    for name in ["negativity.csv", "summary.json", "rho_ell3_w02.json", "overlay.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("negativity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(a.join("timing.txt").exists());
}

#[test]
fn config_file_is_read_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "[sweep]\nell = [2]\nw_values = [0.0, 0.5]\nrealizations = 2\n\n[grid]\ngrid_n = 128\n\n[tomography]\nbootstrap = 5\n\n[output]\nout = {:?}\nformat = [\"json\"]\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let res = oamturb(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("negativity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("2,0.0,"));
    assert!(!out.join("summary.json").exists());
}

#[test]
fn invalid_input_exits_nonzero() {
    for args in [
        &["sweep", "--ell", "5"][..],
        &["sweep", "--w-values", "0.5,1.0"][..],
        &["sweep", "--grid-n", "100"][..],
        &["negativity", "--format", "xml"][..],
    ] {
        let out = oamturb(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn tomo_writes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.csv");
    let out = oamturb(&["tomo", "--bootstrap", "10", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("reconstructed negativity"));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 82);
    assert!(text.starts_with("setting_index,projA_spec,projB_spec,expected_rate,counts,seed"));
}

#[test]
fn screens_are_written_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = oamturb(&[
        "screens", "--grid-n", "128", "--count", "4", "--tolerance", "10",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("screen_0003.bin").exists());
    assert!(dir.path().join("screen_0003.txt").exists());
    // r0 far below the sample spacing is rejected
    let bad = oamturb(&["screens", "--grid-n", "128", "--r0", "1e-6"]);
    assert!(!bad.status.success());
}
