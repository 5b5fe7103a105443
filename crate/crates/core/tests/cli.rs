//! End-to-end CLI checks: exit codes, diagnostics and output files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fbtouch")
}

fn run(sub: &str, config_body: &str, out: &Path) -> Output {
    let cfg = out.with_extension("cfg");
    std::fs::write(&cfg, config_body).unwrap();
    Command::new(bin())
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run fbtouch")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("fbtouch-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn catalog_passes_and_writes_report() {
    // the default resolution (the empty config) is the calibration point of
    // the fixed residual tolerance
    let out = tmp("catalog_ok");
    let result = run("catalog", "# defaults\nh = 0.00390625\n", &out);
    assert_eq!(result.status.code(), Some(0));
    let report = std::fs::read_to_string(out.join("catalog_report.csv")).unwrap();
    assert!(report.starts_with("kind,"));
    assert!(report.lines().count() > 10);
    assert!(out.join("manifest.txt").exists());
}

#[test]
fn catalog_flags_too_coarse_grids() {
    let out = tmp("catalog_coarse");
    let result = run("catalog", "h = 0.125\n", &out);
    assert_eq!(result.status.code(), Some(2), "h = 1/8 must fail verification");
    let report = std::fs::read_to_string(out.join("catalog_report.csv")).unwrap();
    assert!(report.contains("false"));
}

#[test]
fn malformed_config_names_the_line() {
    let out = tmp("catalog_bad");
    let result = run("catalog", "h = 0.015625\nthis line is wrong\n", &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("line 2"), "diagnostic: {stderr}");
}

#[test]
fn unknown_key_is_rejected() {
    let out = tmp("solve_unknown_key");
    let result = run(
        "solve",
        "h = 0.03125\nboundary.kind = one_sided_positive\nboundary.b = 0.25\nbogus = 1\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("bogus"), "diagnostic: {stderr}");
}

#[test]
fn solve_manufactured_exit_zero_and_outputs() {
    let out = tmp("solve_ok");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 0.25\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(0));
    for name in ["field.txt", "regions.csv", "report.csv", "membership.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let regions = std::fs::read_to_string(out.join("regions.csv")).unwrap();
    assert!(regions.contains("GAMMA"));
}

#[test]
fn solve_iteration_cap_reports_non_convergence() {
    let out = tmp("solve_cap");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 0.25\nmax_outer = 1\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn wedge_solve_passes_without_origin_requirement() {
    let out = tmp("solve_wedge");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = wedge\nboundary.c = 0.3\nboundary.b = 0\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(0));

    // demanding the origin contact must flip the verdict for this data
    let out = tmp("solve_wedge_origin");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = wedge\nboundary.c = 0.3\nboundary.b = 0\nrequire_origin = true\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn blowup_without_contact_exits_one() {
    let solve_out = tmp("blowup_src");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 0.25\n",
        &solve_out,
    );
    assert_eq!(result.status.code(), Some(0));

    let out = tmp("blowup_nocontact");
    let field = solve_out.join("field.txt");
    let result = run("blowup", &format!("input = {}\n", field.display()), &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("hypothesis"), "diagnostic: {stderr}");
}

#[test]
fn phi_on_tangentially_flat_field_is_monotone() {
    let solve_out = tmp("phi_src");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 0.25\n",
        &solve_out,
    );
    assert_eq!(result.status.code(), Some(0));

    let out = tmp("phi_run");
    let field = solve_out.join("field.txt");
    let result = run("phi", &format!("input = {}\n", field.display()), &out);
    assert_eq!(result.status.code(), Some(0));
    let scan = std::fs::read_to_string(out.join("phi_scan.csv")).unwrap();
    assert!(scan.starts_with("r,I1,I2,phi"));
}

#[test]
fn tangency_controls() {
    let out = tmp("tangency_ray");
    let result = run(
        "tangency",
        "points.synthetic = ray\nh = 0.00390625\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(2), "ray control must fail");

    let out = tmp("tangency_parabola");
    let result = run(
        "tangency",
        "points.synthetic = parabola\nh = 0.00390625\n",
        &out,
    );
    assert_eq!(result.status.code(), Some(0));
    for name in ["slope.csv", "cone.csv", "sigma.csv"] {
        assert!(out.join(name).exists());
    }
}

#[test]
fn checks_on_zero_field_pass_vacuously() {
    // a knot beyond the domain solves to the identically zero field
    let solve_out = tmp("checks_src");
    let result = run(
        "solve",
        "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 2\nM = 1\n",
        &solve_out,
    );
    assert_eq!(result.status.code(), Some(0));

    let out = tmp("checks_zero");
    let field = solve_out.join("field.txt");
    let result = run("checks", &format!("input = {}\n", field.display()), &out);
    assert_eq!(result.status.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(summary.contains("patch_violations,0,true"));
}

#[test]
fn gnuplot_flag_writes_dat_twins() {
    let out = tmp("gnuplot");
    let cfg = out.with_extension("cfg");
    std::fs::write(&cfg, "points.synthetic = parabola\nh = 0.00390625\n").unwrap();
    let result = Command::new(bin())
        .arg("tangency")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--gnuplot")
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0));
    let dat = std::fs::read_to_string(out.join("slope.dat")).unwrap();
    assert!(dat.starts_with("# r s"));
}
