use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn redve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn costs(trace: &Path) -> Vec<(usize, f64)> {
    let text = std::fs::read_to_string(trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(redve::io::TRACE_HEADER));
    lines
        .filter_map(|l| {
            let mut f = l.split(',');
            let iter = f.next()?.parse().ok()?;
            let cost = f.next()?.parse().ok()?;
            Some((iter, cost))
        })
        .collect()
}

#[test]
fn fp_mpe_reaches_fp_cost_in_fewer_steps() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample("shapes32.pgm");
    let out = dir.path().to_str().unwrap();
    for method in ["fp", "fp-mpe"] {
        let o = redve(&[
            "--task",
            "deblur-uniform",
            "--input",
            input.to_str().unwrap(),
            "--method",
            method,
            "--output-dir",
            out,
            "--seed",
            "4",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8(o.stdout).unwrap();
        let mut lines = stdout.lines();
        assert_eq!(
            lines.next(),
            Some("method iters final_cost final_psnr elapsed_s")
        );
        let fields: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0], method);
        assert!(fields[2].parse::<f64>().unwrap().is_finite());
    }
    let fp = costs(&dir.path().join("deblur-uniform_fp_trace.csv"));
    let mpe = costs(&dir.path().join("deblur-uniform_fp-mpe_trace.csv"));
    let (fp_steps, fp_final) = *fp.last().unwrap();
    let reached = mpe.iter().find(|(_, c)| *c <= fp_final).map(|(i, _)| *i);
    assert!(
        reached.is_some_and(|k| k < fp_steps),
        "FP {fp_steps} steps, FP-MPE reaches at {reached:?}"
    );
    assert!(dir.path().join("deblur-uniform_fp-mpe.pgm").exists());
    assert!(dir.path().join("deblur-uniform_degraded.pgm").exists());
}

#[test]
fn superres_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("custom.csv");
    let o = redve(&[
        "--task",
        "superres",
        "--input",
        sample("shapes32.pgm").to_str().unwrap(),
        "--method",
        "sd-mpe",
        "--max-iters",
        "30",
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(costs(&trace).len(), 30);
    let restored = redve::io::read_pgm(dir.path().join("superres_sd-mpe.pgm")).unwrap();
    assert_eq!(restored.dims(), (32, 32));
    let degraded = redve::io::read_pgm(dir.path().join("superres_degraded.pgm")).unwrap();
    assert_eq!(degraded.dims(), (11, 11));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(redve(&["--help"]).status.code(), Some(0));
    assert_eq!(redve(&["--task", "deblur-uniform"]).status.code(), Some(2));
    assert_eq!(
        redve(&["--task", "superres", "--input", "x.pgm", "--kappa", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        redve(&[
            "--task",
            "deblur-uniform",
            "--input",
            "x.pgm",
            "--method",
            "lbfgs"
        ])
        .status
        .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.pgm");
    assert_eq!(
        redve(&[
            "--task",
            "deblur-uniform",
            "--input",
            missing.to_str().unwrap(),
            "--output-dir",
            out
        ])
        .status
        .code(),
        Some(3)
    );

    // a wildly oversized gradient step diverges to non-finite values
    let o = redve(&[
        "--task",
        "deblur-uniform",
        "--input",
        sample("shapes32.pgm").to_str().unwrap(),
        "--method",
        "sd",
        "--step-size",
        "1e6",
        "--denoiser",
        "gaussian",
        "--output-dir",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite"));
    assert!(!costs(&dir.path().join("deblur-uniform_sd_trace.csv")).is_empty());
}

#[test]
fn lindemo_and_check_denoiser() {
    let o = redve(&["--task", "lindemo"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("SVD-MPE"));

    let o = redve(&["--task", "check-denoiser"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let verdict = |prefix: &str| {
        text.lines()
            .find(|l| l.starts_with(prefix))
            .and_then(|l| l.split_whitespace().last())
            .map(str::to_string)
    };
    assert_eq!(verdict("identity").as_deref(), Some("yes"));
    assert_eq!(verdict("gaussian").as_deref(), Some("yes"));
    assert_eq!(verdict("frozen_patch_weights").as_deref(), Some("yes"));
    assert_eq!(verdict("1.5_x_gaussian").as_deref(), Some("no"));
}
