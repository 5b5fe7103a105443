//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with the measured numbers before asserting.

use std::f64::consts::PI;
use std::time::Instant;

use once_cell::sync::Lazy;

use fbtouch::solver::{self, BoundaryData, ProblemSpec, SolveReport};
use fbtouch::{
    classify, cone_exclusion, contact_free_boundary, decompose_regions, default_bumps,
    dyadic_growth, monotone_verdict, nondegeneracy_check, odd_reflect, patch_growth_check, phi,
    rescale, residual_check, slope_profile, split_directional, synthetic_points,
    GlobalSolution, Grid, NondegeneracyOptions, ScalarField,
};

fn verdict(criterion: u32, title: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion:02} {title}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({title}): {detail}");
}

fn families() -> Vec<GlobalSolution> {
    vec![
        GlobalSolution::half_space_poly(0.3, 0.1),
        GlobalSolution::one_sided_positive(0.25).unwrap(),
        GlobalSolution::one_sided_negative(0.3).unwrap(),
        GlobalSolution::two_sided(0.2, 0.5).unwrap(),
    ]
}

fn solve_spec(boundary: BoundaryData, subdiv: u32) -> ProblemSpec {
    let grid = Grid::half_ball(2, subdiv).unwrap();
    let mut spec = ProblemSpec::new(grid, boundary);
    spec.tol = 1e-9;
    spec.max_outer = 200;
    spec
}

/// Contact-point generator: the symmetrically pinched profile
/// `g = (x1^2/2 + x1 (alpha - 0.5 x2^2))_+` with the lift `alpha` driven by
/// bisection to the largest value whose coincidence set still reaches the
/// origin. At that critical lift the coincidence sliver is parabolic and the
/// free boundary meets the wall at the origin.
fn tuned_contact_run(subdiv: u32) -> (f64, SolveReport) {
    let h = 1.0 / subdiv as f64;
    let run_at = |alpha: f64| -> SolveReport {
        let spec = solve_spec(
            BoundaryData::ContactPoly {
                a: 0.0,
                alpha,
                c: -0.5,
            },
            subdiv,
        );
        let run = solver::solve(&spec).unwrap();
        assert!(run.converged, "contact run did not converge");
        run
    };
    let has_contact = |run: &SolveReport| -> bool {
        let points = contact_free_boundary(&run.field, run.eps_g).unwrap();
        points
            .iter()
            .any(|p| p[0].hypot(p[1]) <= 2.0 * h + 1e-12)
    };
    // the contact window in the lift is only ~2h/0.9 wide just below the
    // critical value, so scan finely for a bracket before bisecting to the
    // loss threshold (the last contact run has the cleanest parabolic tip)
    let mut lo = None;
    let mut hi = None;
    let mut best = None;
    let mut alpha = 0.10f64;
    while alpha <= 0.20 {
        let run = run_at(alpha);
        if has_contact(&run) {
            lo = Some(alpha);
            best = Some(run);
        } else if lo.is_some() {
            hi = Some(alpha);
            break;
        }
        alpha += 0.004;
    }
    let mut lo = lo.expect("no contact lift found in the scanned range");
    let mut hi = hi.expect("contact never lost in the scanned range");
    let mut best = best.unwrap();
    for _ in 0..9 {
        let mid = 0.5 * (lo + hi);
        let run = run_at(mid);
        if has_contact(&run) {
            lo = mid;
            best = run;
        } else {
            hi = mid;
        }
    }
    (lo, best)
}

struct SuiteRun {
    name: &'static str,
    sup_bound: f64,
    report: SolveReport,
}

/// The converged solver runs shared by criteria 4-9.
static SUITE: Lazy<Vec<SuiteRun>> = Lazy::new(|| {
    let mut runs = Vec::new();
    for subdiv in [128u32, 256] {
        let spec = solve_spec(
            BoundaryData::Catalog(GlobalSolution::one_sided_positive(0.25).unwrap()),
            subdiv,
        );
        let report = solver::solve(&spec).unwrap();
        runs.push(SuiteRun {
            name: if subdiv == 128 {
                "one_sided_b025_h128"
            } else {
                "one_sided_b025_h256"
            },
            sup_bound: 0.28125,
            report,
        });
    }
    for subdiv in [128u32, 256] {
        let spec = solve_spec(BoundaryData::Wedge { c: 0.3, b: 0.0 }, subdiv);
        let report = solver::solve(&spec).unwrap();
        runs.push(SuiteRun {
            name: if subdiv == 128 {
                "wedge_c03_h128"
            } else {
                "wedge_c03_h256"
            },
            sup_bound: 0.5,
            report,
        });
    }
    for subdiv in [128u32, 256] {
        let (_, report) = tuned_contact_run(subdiv);
        let sup = report.field.max_abs().max(1e-3);
        runs.push(SuiteRun {
            name: if subdiv == 128 {
                "contact_h128"
            } else {
                "contact_h256"
            },
            sup_bound: sup,
            report,
        });
    }
    for run in &runs {
        assert!(run.report.converged, "{} did not converge", run.name);
    }
    runs
});

#[test]
fn acceptance_01_catalog_residual() {
    let start = Instant::now();
    let bumps = default_bumps();
    let mut worst_final = 0.0f64;
    let mut decay_ok = true;
    let mut detail = String::new();
    for member in families() {
        let mut residuals = Vec::new();
        for subdiv in [64u32, 128, 256] {
            let grid = Grid::half_ball(2, subdiv).unwrap();
            let field = member.sample(&grid);
            let res = residual_check(&field, grid.h(), &bumps).unwrap();
            // at-least-linear decay: the uniform linear envelope anchored at
            // the 1e-3@256 tolerance must hold on every rung
            decay_ok &= res <= fbtouch::catalog::residual_tolerance(grid.h());
            residuals.push(res);
        }
        // and the ladder must actually decrease (signed-sum cancellation can
        // make a coarse rung artificially good, so only values above the
        // noise floor are compared)
        for w in residuals.windows(2) {
            if w[0] > 1e-12 || w[1] > 1e-12 {
                decay_ok &= w[1] < w[0];
            }
        }
        worst_final = worst_final.max(residuals[2]);
        detail.push_str(&format!(
            "{}: {:.2e}->{:.2e}->{:.2e}; ",
            member.kind.as_str(),
            residuals[0],
            residuals[1],
            residuals[2]
        ));
    }
    let elapsed = start.elapsed();
    let pass = worst_final <= 1e-3 && decay_ok && elapsed.as_secs_f64() < 10.0;
    verdict(
        1,
        "catalog residual",
        pass,
        &format!("{detail}worst@256 = {worst_final:.2e} (tol 1e-3), {elapsed:.1?}"),
    );
}

#[test]
fn acceptance_02_acf_constancy() {
    let start = Instant::now();
    let grid = Grid::full_ball(2, 256).unwrap();
    let h1 = ScalarField::from_fn(grid.clone(), |x| x[1].max(0.0));
    let h2 = ScalarField::from_fn(grid.clone(), |x| (-x[1]).max(0.0));
    let radii = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let scan = phi(&h1, &h2, &[0.0, 0.0], &radii).unwrap();
    let exact = PI * PI / 4.0;
    let worst = scan
        .phi
        .iter()
        .map(|p| (p - exact).abs() / exact)
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    let pass = worst <= 0.02 && elapsed.as_secs_f64() < 5.0;
    verdict(
        2,
        "ACF constancy",
        pass,
        &format!(
            "max |phi - pi^2/4|/exact = {:.3}% over r in [0.2, 0.8] at h=1/256, {elapsed:.1?}",
            worst * 100.0
        ),
    );
}

#[test]
fn acceptance_03_acf_monotonicity() {
    let radii = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let members = [
        GlobalSolution::half_space_poly(0.5, 0.0),
        GlobalSolution::half_space_poly(-0.4, 0.1),
        GlobalSolution::one_sided_positive(0.25).unwrap(),
        GlobalSolution::two_sided(0.2, 0.5).unwrap(),
    ];
    let mut pairs_checked = 0;
    let mut all_ok = true;
    for subdiv in [128u32, 256] {
        let grid = Grid::half_ball(2, subdiv).unwrap();
        let mut sources: Vec<ScalarField> = members.iter().map(|m| m.sample(&grid)).collect();
        sources.push(ScalarField::from_fn(grid.clone(), |x| x[0] * x[1]));
        for u in &sources {
            for e in [[0.0, 1.0], [0.0, -1.0]] {
                let (p, n) = split_directional(u, &e).unwrap();
                let scan = phi(&p, &n, &[0.0, 0.0], &radii).unwrap();
                let ok = monotone_verdict(&scan, None).is_monotone();
                all_ok &= ok;
                if subdiv == 128 {
                    pairs_checked += 1;
                }
            }
        }
    }
    let pass = all_ok && pairs_checked == 10;
    verdict(
        3,
        "ACF monotonicity",
        pass,
        &format!("{pairs_checked} split pairs monotone at h=1/128, verdicts stable at h=1/256"),
    );
}

#[test]
fn acceptance_04_manufactured_solve() {
    // run the manufactured solves directly so the timer covers exactly this
    // criterion's work (the shared suite also holds copies for 5-9)
    let start = Instant::now();
    let mut errs = Vec::new();
    let mut gamma_ok = true;
    let mut converged_ok = true;
    for subdiv in [128u32, 256] {
        let spec = solve_spec(
            BoundaryData::Catalog(GlobalSolution::one_sided_positive(0.25).unwrap()),
            subdiv,
        );
        let report = solver::solve(&spec).unwrap();
        converged_ok &= report.converged;
        let grid = report.field.grid().clone();
        let exact = GlobalSolution::one_sided_positive(0.25)
            .unwrap()
            .sample(&grid);
        errs.push(report.field.sup_distance(&exact).unwrap());
        let h = grid.h();
        let gammas = report.regions.free_boundary_nodes();
        gamma_ok &= !gammas.is_empty()
            && gammas.iter().all(|idx| {
                let x = grid.coords(*idx);
                (x[0] - 0.25).abs() <= 2.0 * h + 1e-12
            });
    }
    let h128 = 1.0 / 128.0;
    let tol = 5.0 * h128 * h128;
    // err halving factor >= 3, with an absolute floor for exact solutions
    let factor_ok = errs[1] <= errs[0] / 3.0 + 1e-12;
    let elapsed = start.elapsed();
    let pass =
        converged_ok && errs[0] <= tol && gamma_ok && factor_ok && elapsed.as_secs_f64() < 60.0;
    verdict(
        4,
        "manufactured solve",
        pass,
        &format!(
            "sup err = {:.2e} (tol {tol:.2e}) at h=1/128, {:.2e} at h=1/256; free boundary within 2h: {gamma_ok}; {elapsed:.1?}",
            errs[0], errs[1]
        ),
    );
}

#[test]
fn acceptance_05_nondegeneracy() {
    let radii = [0.25, 0.125, 0.0625, 0.03125];
    let mut worst: Option<(f64, &str)> = None;
    for run in SUITE.iter() {
        let report = nondegeneracy_check(
            &run.report.field,
            &run.report.regions,
            &radii,
            NondegeneracyOptions::default(),
        )
        .unwrap();
        for (node, _, _, margin) in &report.entries {
            if run.report.field.value(*node) >= 0.0
                && worst.map(|(m, _)| *margin < m).unwrap_or(true)
            {
                worst = Some((*margin, run.name));
            }
        }
    }
    let (min_margin, at) = worst.expect("suite produced free-boundary nodes");
    let h = 1.0 / 128.0;
    let pass = min_margin >= -h;
    verdict(
        5,
        "non-degeneracy",
        pass,
        &format!("min margin {min_margin:.3e} (>= -h = {:-.3e}) at {at}", h),
    );
}

#[test]
fn acceptance_06_patch_growth() {
    let mut total_checked = 0;
    let mut total_violations = 0;
    for run in SUITE.iter() {
        for r in [0.25, 0.125] {
            let report = patch_growth_check(&run.report.field, &run.report.regions, r).unwrap();
            total_checked += report.checked;
            total_violations += report.violations.len();
        }
    }
    let pass = total_violations == 0 && total_checked > 0;
    verdict(
        6,
        "patch growth",
        pass,
        &format!("{total_violations} violations over {total_checked} checks"),
    );
}

#[test]
fn acceptance_07_blowup_classification() {
    let run = SUITE.iter().find(|r| r.name == "wedge_c03_h256").unwrap();
    let target = Grid::half_ball(2, 64).unwrap();
    let mut distances = Vec::new();
    let mut increments = Vec::new();
    let mut prev: Option<ScalarField> = None;
    for j in 1..=5 {
        let r = 0.5f64.powi(j);
        let u_r = rescale(&run.report.field, &[0.0, 0.0], r, &target).unwrap();
        let (member, _) = classify(&u_r).unwrap();
        let dist = u_r.sup_distance(&member.sample(&target)).unwrap();
        if let Some(p) = &prev {
            increments.push(u_r.sup_distance(p).unwrap());
        }
        distances.push(dist);
        prev = Some(u_r);
    }
    // nonincreasing for j = 2..5
    let d_ok = distances[1..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let c_ok = increments.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let pass = d_ok && c_ok;
    verdict(
        7,
        "blow-up classification",
        pass,
        &format!(
            "catalog distances {:?}, increments {:?}",
            distances
                .iter()
                .map(|d| format!("{d:.1e}"))
                .collect::<Vec<_>>(),
            increments
                .iter()
                .map(|d| format!("{d:.1e}"))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn acceptance_08_tangential_touch() {
    // negative control: the constant-slope ray fails the eps = 1/2 cone test
    // at every usable radius
    let h256 = 1.0 / 256.0;
    let ray = synthetic_points("ray", h256).unwrap();
    let ray_fails = [0.25, 0.125, 0.0625]
        .iter()
        .all(|&rho| !cone_exclusion(&ray, 0.5, rho, h256));

    // contact-point runs (the coincidence set reaches the origin and the
    // free boundary meets the wall there)
    let radii = [0.25, 0.125, 0.0625];
    let mut strict_ok = true;
    let mut halving_ok = true;
    let mut detail = String::new();
    for name in ["contact_h128", "contact_h256"] {
        let run = SUITE.iter().find(|r| r.name == name).unwrap();
        let h = run.report.field.grid().h();
        let points = contact_free_boundary(&run.report.field, run.report.eps_g).unwrap();
        let profile = slope_profile(&points, &radii, h).unwrap();
        let s = &profile.slopes;
        strict_ok &= s[2] < s[1] && s[1] < s[0];
        halving_ok &= s[2] <= 0.5 * s[0];
        detail.push_str(&format!(
            "{name}: s(1/4)={:.4} s(1/8)={:.4} s(1/16)={:.4}; ",
            s[0], s[1], s[2]
        ));
    }
    let pass = ray_fails && strict_ok && halving_ok;
    verdict(
        8,
        "tangential touch",
        pass,
        &format!(
            "{detail}strictly increasing: {strict_ok}, s(1/16) <= 0.5 s(1/4): {halving_ok}, ray control fails cone(1/2): {ray_fails}"
        ),
    );
}

#[test]
fn acceptance_09_dyadic_growth() {
    let mut detail = String::new();
    let mut bound_ok = true;
    let mut stable_ok = true;
    for pair in [
        ("one_sided_b025_h128", "one_sided_b025_h256"),
        ("wedge_c03_h128", "wedge_c03_h256"),
        ("contact_h128", "contact_h256"),
    ] {
        let mut fits = Vec::new();
        for name in [pair.0, pair.1] {
            let run = SUITE.iter().find(|r| r.name == name).unwrap();
            let grid = run.report.field.grid().clone();
            let tilde = odd_reflect(&run.report.field).unwrap();
            // free-boundary node nearest the origin with room for the
            // radius-1/2 ball
            let mut z = None;
            let mut best = f64::INFINITY;
            for idx in run.report.regions.free_boundary_nodes() {
                let x = grid.coords(idx);
                let norm = x[0].hypot(x[1]);
                if norm + 0.5 <= 1.0 + 1e-12 && norm < best {
                    best = norm;
                    z = Some(x);
                }
            }
            let z = z.expect("no free-boundary node with room");
            let zt = tilde.grid().nearest_node(&z[..2]).unwrap();
            let ladder = dyadic_growth(&tilde, zt, 7, run.sup_bound).unwrap();
            let violations = ladder.violations_for(10.0);
            bound_ok &= violations.is_empty();
            fits.push(ladder.c0_fit);
        }
        let (a, b) = (fits[0], fits[1]);
        let pair_stable = if a <= 1e-12 && b <= 1e-12 {
            true
        } else {
            let lo = a.min(b).max(1e-12);
            let hi = a.max(b);
            hi / lo <= 2.0
        };
        stable_ok &= pair_stable;
        detail.push_str(&format!("{}: C0 {:.3}/{:.3}; ", pair.0, a, b));
    }
    let pass = bound_ok && stable_ok;
    verdict(
        9,
        "dyadic growth",
        pass,
        &format!("{detail}all levels within C0 <= 10: {bound_ok}, resolution-stable x2: {stable_ok}"),
    );
}

#[test]
fn acceptance_10_determinism() {
    use std::process::Command;

    let bin = env!("CARGO_BIN_EXE_fbtouch");
    let base = tempfile::tempdir().unwrap();

    // each rerun works inside its own root with purely relative paths, so
    // every produced file (manifests included) must be byte-identical
    let run_suite = |tag: &str| -> Vec<(String, i32)> {
        let root = base.path().join(tag);
        std::fs::create_dir_all(root.join("cfg")).unwrap();
        let write_cfg = |name: &str, body: &str| {
            std::fs::write(root.join("cfg").join(name), body).unwrap();
        };
        write_cfg("catalog.cfg", "h = 0.00390625\n");
        write_cfg(
            "solve.cfg",
            "h = 0.015625\nboundary.kind = one_sided_positive\nboundary.b = 0.25\n",
        );
        write_cfg(
            "homogeneous.cfg",
            "h = 0.015625\nboundary.kind = half_space_poly\nboundary.a = 0\nboundary.alpha = 0\n",
        );
        write_cfg(
            "contact.cfg",
            "h = 0.0078125\nboundary.kind = contact_poly\nboundary.a = 0.5\nboundary.alpha = -0.028\n",
        );
        write_cfg(
            "parabola.cfg",
            "points.synthetic = parabola\nh = 0.015625\nradii = 0.25,0.125\n",
        );
        write_cfg(
            "blowup.cfg",
            "input = homogeneous/field.txt\nj_max = 2\ntarget_h = 0.03125\n",
        );
        write_cfg("phi.cfg", "input = solve/field.txt\nradii = 0.2,0.4,0.6\n");
        write_cfg("tangency.cfg", "input = contact/field.txt\nradii = 0.25,0.125\n");
        write_cfg("checks.cfg", "input = solve/field.txt\n");

        let mut codes = Vec::new();
        let mut invoke = |sub: &str, cfg: &str, out: &str| {
            let status = Command::new(bin)
                .current_dir(&root)
                .arg(sub)
                .arg("--config")
                .arg(format!("cfg/{cfg}"))
                .arg("--out")
                .arg(out)
                .arg("--seed")
                .arg("7")
                .arg("--gnuplot")
                .env("FBTOUCH_TIMESTAMP", "0")
                .env("FBTOUCH_THREADS", "2")
                .status()
                .expect("run fbtouch");
            codes.push((format!("{sub}/{out}"), status.code().unwrap_or(-1)));
        };
        invoke("catalog", "catalog.cfg", "catalog");
        invoke("solve", "solve.cfg", "solve");
        invoke("solve", "homogeneous.cfg", "homogeneous");
        invoke("solve", "contact.cfg", "contact");
        invoke("blowup", "blowup.cfg", "blowup");
        invoke("phi", "phi.cfg", "phi");
        invoke("tangency", "tangency.cfg", "tangency");
        invoke("tangency", "parabola.cfg", "tangency_syn");
        invoke("checks", "checks.cfg", "checks");
        codes
    };

    let codes_a = run_suite("a");
    let codes_b = run_suite("b");
    assert_eq!(codes_a, codes_b, "exit codes differ between reruns");
    let expected: Vec<i32> = vec![0; codes_a.len()];
    let actual: Vec<i32> = codes_a.iter().map(|(_, c)| *c).collect();
    assert_eq!(actual, expected, "suite exit codes not all clean: {codes_a:?}");

    // byte-compare every produced file
    let mut compared = 0;
    let mut diffs = Vec::new();
    let root_a = base.path().join("a");
    let root_b = base.path().join("b");
    let mut stack = vec![root_a.clone()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(&root_a).unwrap();
            let twin = root_b.join(rel);
            let a = std::fs::read(&path).unwrap();
            let b = std::fs::read(&twin).unwrap_or_default();
            compared += 1;
            if a != b {
                diffs.push(rel.display().to_string());
            }
        }
    }
    let pass = diffs.is_empty() && compared > 10;
    verdict(
        10,
        "determinism",
        pass,
        &format!("{compared} files byte-identical across reruns (exit codes {codes_a:?}); diffs: {diffs:?}"),
    );
}
