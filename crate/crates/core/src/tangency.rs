//! Slope profile and cone exclusion for the touch between the free and the
//! fixed boundary: how steeply do free-boundary points rise off the wall as
//! a function of distance from the contact point at the origin.

use std::fmt::Write as _;

use crate::error::{FbError, Result};

/// Epsilon ladder for the cone exclusion grid.
pub const EPS_TABLE: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

#[derive(Debug, Clone)]
pub struct TangencyReport {
    /// Grid spacing behind the resolution floor `|p| >= 4h`.
    pub h: f64,
    /// Tested radii, strictly decreasing.
    pub radii: Vec<f64>,
    /// `s(r) = max { p1/|p| : 4h <= |p| <= r }` (0 when the annulus is empty).
    pub slopes: Vec<f64>,
    /// Cone-exclusion verdicts, one row per (eps, rho) pair.
    pub cone_verdicts: Vec<(f64, f64, bool)>,
    /// Largest tested radius passing exclusion for each epsilon in
    /// `EPS_TABLE` (`None` when every tested radius fails).
    pub rho_eps: Vec<(f64, Option<f64>)>,
    /// Modulus table: for each tested radius, the smallest epsilon whose
    /// exclusion radius covers it (capped at 1, the trivial slope bound).
    pub sigma: Vec<(f64, f64)>,
    /// Extrapolated modulus at vanishing radius: the slope at the smallest
    /// admissible radius.
    pub sigma_zero: f64,
    /// Largest tested radius passing the eps = 1 cone exclusion.
    pub r0: Option<f64>,
}

impl TangencyReport {
    pub fn slope_csv(&self) -> String {
        let mut out = String::from("r,s\n");
        for (r, s) in self.radii.iter().zip(&self.slopes) {
            let _ = writeln!(out, "{r:.16e},{s:.16e}");
        }
        out
    }

    pub fn cone_csv(&self) -> String {
        let mut out = String::from("eps,rho,pass\n");
        for (eps, rho, pass) in &self.cone_verdicts {
            let _ = writeln!(out, "{eps:.16e},{rho:.16e},{pass}");
        }
        out
    }

    pub fn sigma_csv(&self) -> String {
        let mut out = String::from("r,sigma\n");
        for (r, s) in &self.sigma {
            let _ = writeln!(out, "{r:.16e},{s:.16e}");
        }
        out
    }

    pub fn slope(&self, r: f64) -> Option<f64> {
        self.radii
            .iter()
            .position(|&x| (x - r).abs() <= 1e-12)
            .map(|k| self.slopes[k])
    }
}

fn norm2(p: &[f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Slope profile of a free-boundary point cloud around the origin contact.
/// Requires a point within `2h` of the origin (the contact hypothesis);
/// points below the resolution floor `4h` carry no claim and are ignored.
/// Radii must be strictly decreasing and at least `4h`.
pub fn slope_profile(fb_points: &[[f64; 2]], radii: &[f64], h: f64) -> Result<TangencyReport> {
    let mut nearest = f64::INFINITY;
    for p in fb_points {
        nearest = nearest.min(norm2(p));
    }
    if nearest > 2.0 * h + 1e-12 {
        return Err(FbError::OriginNotContact { nearest });
    }
    let mut prev = f64::INFINITY;
    let mut kept: Vec<f64> = Vec::new();
    for &r in radii {
        if r >= prev {
            return Err(FbError::InvalidArgument(
                "radii must be strictly decreasing".into(),
            ));
        }
        prev = r;
        if r >= 4.0 * h - 1e-12 {
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(FbError::InvalidArgument(
            "no tested radius clears the 4h resolution floor".into(),
        ));
    }

    let floor = 4.0 * h;
    let slopes: Vec<f64> = kept
        .iter()
        .map(|&r| {
            let mut s = 0.0f64;
            for p in fb_points {
                let d = norm2(p);
                if d + 1e-15 >= floor && d <= r + 1e-15 {
                    s = s.max((p[0] / d).clamp(0.0, 1.0));
                }
            }
            s
        })
        .collect();

    Ok(TangencyReport {
        h,
        radii: kept,
        slopes,
        cone_verdicts: Vec::new(),
        rho_eps: Vec::new(),
        sigma: Vec::new(),
        sigma_zero: 0.0,
        r0: None,
    })
}

/// Pass iff no point with `4h <= |p| <= rho` lies inside the cone
/// `{ x1 > eps |x2| }`.
pub fn cone_exclusion(fb_points: &[[f64; 2]], eps: f64, rho: f64, h: f64) -> bool {
    let floor = 4.0 * h;
    for p in fb_points {
        let d = norm2(p);
        if d + 1e-15 < floor || d > rho + 1e-15 {
            continue;
        }
        if p[0] > eps * p[1].abs() {
            return false;
        }
    }
    true
}

/// Fill in the cone grid, the per-epsilon exclusion radii, and the modulus
/// table (the monotone inverse of eps -> rho_eps, with the value at the
/// smallest admissible radius as the zero-radius extrapolation).
pub fn fit_modulus(report: &mut TangencyReport, fb_points: &[[f64; 2]]) {
    let radii = report.radii.clone();
    let h = report.h;
    let mut verdicts = Vec::new();
    let mut rho_eps = Vec::new();
    for &eps in EPS_TABLE.iter() {
        let mut best: Option<f64> = None;
        for &rho in &radii {
            let pass = cone_exclusion(fb_points, eps, rho, h);
            verdicts.push((eps, rho, pass));
            if pass {
                best = Some(best.map_or(rho, |b: f64| b.max(rho)));
            }
        }
        rho_eps.push((eps, best));
    }
    let sigma: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut best = 1.0f64;
            for &(eps, rho) in &rho_eps {
                if let Some(rho) = rho {
                    if rho + 1e-15 >= r {
                        best = best.min(eps);
                    }
                }
            }
            (r, best)
        })
        .collect();
    report.sigma_zero = *report.slopes.last().unwrap_or(&0.0);
    report.r0 = rho_eps
        .iter()
        .find(|(eps, _)| (*eps - 1.0).abs() < 1e-15)
        .and_then(|(_, rho)| *rho);
    report.cone_verdicts = verdicts;
    report.rho_eps = rho_eps;
    report.sigma = sigma;
}

/// Synthetic point clouds used as controls.
pub fn synthetic_points(kind: &str, h: f64) -> Result<Vec<[f64; 2]>> {
    let mut pts = Vec::new();
    match kind {
        // the parabola x1 = x2^2 through the origin: tangential touch
        "parabola" => {
            let step = h / 8.0;
            let mut t = -1.0;
            while t <= 1.0 {
                pts.push([t * t, t]);
                t += step;
            }
            pts.push([0.0, 0.0]);
        }
        // the ray x1 = x2 > 0: constant slope, the non-tangential control
        "ray" => {
            let step = h / 8.0;
            let mut t = 0.0;
            while t <= 1.0 {
                pts.push([t, t]);
                t += step;
            }
        }
        other => {
            return Err(FbError::InvalidArgument(format!(
                "unknown synthetic point set `{other}`"
            )))
        }
    }
    Ok(pts)
}
