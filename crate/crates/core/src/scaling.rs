//! Blow-up rescaling, odd reflection across the flat boundary, and the
//! pointwise growth checkers: patch growth, quantitative non-degeneracy,
//! dyadic decay of oscillations, quadratic growth near the free boundary and
//! the second-difference bound.

use std::fmt::Write as _;

use crate::error::{FbError, Result};
use crate::field::{sup_on_ball_open, ScalarField};
use crate::grid::{DomainKind, Grid, NodeIdx};
use crate::regions::RegionDecomposition;

/// `u_r(x) = (u(r x + x0) - u(x0)) / r^2` sampled onto `target_grid` with
/// bilinear interpolation; the base value `u(x0)` rides along as metadata.
pub fn rescale(
    field: &ScalarField,
    x0: &[f64],
    r: f64,
    target_grid: &Grid,
) -> Result<ScalarField> {
    let src = field.grid();
    if target_grid.n() != src.n() {
        return Err(FbError::InvalidArgument(
            "source and target dimension differ".into(),
        ));
    }
    if !(r > 0.0) {
        return Err(FbError::InvalidArgument(format!(
            "rescaling radius must be positive, got {r}"
        )));
    }
    let node = src.nearest_node(x0).ok_or_else(|| FbError::OutOfDomain {
        point: x0.to_vec(),
    })?;
    let xc = src.coords(node);
    for k in 0..src.n() {
        if (xc[k] - x0[k]).abs() > 1e-12 {
            return Err(FbError::InvalidArgument(format!(
                "base point {x0:?} is not an active grid node"
            )));
        }
    }
    let base = field.value(node);

    let n = src.n();
    let mut out = ScalarField::zeros(target_grid.clone());
    let inv_r2 = 1.0 / (r * r);
    for idx in target_grid.active_nodes() {
        let y = target_grid.coords(idx);
        let mut p = [0.0f64; 3];
        for k in 0..n {
            p[k] = r * y[k] + x0[k];
        }
        let v = field.interpolate(&p[..n])?;
        out.set(idx, (v - base) * inv_r2);
    }
    out.set_base_value(Some(base));
    Ok(out)
}

/// Odd extension across the flat boundary: `u` for `x1 >= 0`,
/// `-u(-x1, x')` for `x1 < 0`, by exact node mirroring. The trace on the
/// flat boundary must vanish to 1e-12.
pub fn odd_reflect(field: &ScalarField) -> Result<ScalarField> {
    let src = field.grid();
    if src.kind() != DomainKind::HalfBall {
        return Err(FbError::InvalidArgument(
            "odd reflection expects a half-ball field".into(),
        ));
    }
    let max_trace = field.max_abs_on_pi();
    if max_trace > 1e-12 {
        return Err(FbError::BoundaryViolated { max_trace });
    }
    let full = Grid::full_ball(src.n(), src.subdiv())?;
    let offset = full.origin()[0];
    let mut out = ScalarField::zeros(full.clone());
    for idx in full.active_nodes() {
        let rel0 = idx[0] as i64 - offset;
        let v = if rel0 >= 0 {
            field.value([rel0 as usize, idx[1], idx[2]])
        } else {
            -field.value([(-rel0) as usize, idx[1], idx[2]])
        };
        out.set(idx, v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Non-degeneracy and patch growth
// ---------------------------------------------------------------------------

/// Margins of the quantitative growth inequality
/// `sup_{B+(x0,r)} u - u(x0) - C r^2` at free-boundary nodes.
#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    /// (node, coords, radius, margin); node order and radius order fixed.
    pub entries: Vec<(NodeIdx, [f64; 3], f64, f64)>,
    pub min_margin: Option<f64>,
    pub worst: Option<(NodeIdx, f64)>,
}

impl NondegeneracyReport {
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from(if n == 2 {
            "x0_i,x0_j,r,margin\n"
        } else {
            "x0_i,x0_j,x0_k,r,margin\n"
        });
        for (idx, _, r, margin) in &self.entries {
            if n == 2 {
                let _ = writeln!(out, "{},{},{:.16e},{:.16e}", idx[0], idx[1], r, margin);
            } else {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e}",
                    idx[0], idx[1], idx[2], r, margin
                );
            }
        }
        out
    }
}

/// Growth-constant configuration. The positive case uses the barrier
/// constant `1/(2n)`; for negative center values only an unquantified
/// "smaller constant" is available, taken as half of the positive one and
/// exposed here.
#[derive(Debug, Clone, Copy)]
pub struct NondegeneracyOptions {
    pub c_pos_factor: f64,
    pub c_neg_factor: f64,
}

impl Default for NondegeneracyOptions {
    fn default() -> Self {
        NondegeneracyOptions {
            c_pos_factor: 0.5,  // C = 1/(2n)
            c_neg_factor: 0.25, // C = 1/(4n)
        }
    }
}

/// Check the growth inequality at every free-boundary node and every radius
/// whose ball fits in the domain. For `u(x0) >= 0` the sup runs over the open
/// half-ball `B(x0,r) ∩ {x1 > 0}`; for `u(x0) < 0` the check only runs when
/// the full ball sits inside the open half-domain and uses the smaller
/// constant.
pub fn nondegeneracy_check(
    field: &ScalarField,
    regions: &RegionDecomposition,
    radii: &[f64],
    opts: NondegeneracyOptions,
) -> Result<NondegeneracyReport> {
    field.check_same_grid_regions(regions)?;
    let grid = field.grid();
    let n = grid.n() as f64;
    let c_pos = opts.c_pos_factor / n;
    let c_neg = opts.c_neg_factor / n;

    let mut entries = Vec::new();
    let mut min_margin: Option<f64> = None;
    let mut worst = None;
    for node in regions.free_boundary_nodes() {
        let x0 = grid.coords(node);
        let u0 = field.value(node);
        let norm: f64 = (0..grid.n()).map(|k| x0[k] * x0[k]).sum::<f64>().sqrt();
        for &r in radii {
            if norm + r > 1.0 + 1e-12 {
                continue;
            }
            let margin = if u0 >= 0.0 {
                let sup = sup_on_ball_open(field, &x0[..grid.n()], r)?;
                sup - u0 - c_pos * r * r
            } else {
                // full ball inside the open half-domain
                if x0[0] - r <= 1e-12 {
                    continue;
                }
                let sup = sup_on_ball_open(field, &x0[..grid.n()], r)?;
                sup - u0 - c_neg * r * r
            };
            entries.push((node, x0, r, margin));
            if min_margin.map(|m| margin < m).unwrap_or(true) {
                min_margin = Some(margin);
                worst = Some((node, r));
            }
        }
    }
    Ok(NondegeneracyReport {
        entries,
        min_margin,
        worst,
    })
}

/// Strict patch growth `sup_{B+(x0,r)} u > u(x0)` at free-boundary nodes;
/// the sup excludes the flat boundary and a margin of at least 1e-12 is
/// required.
#[derive(Debug, Clone)]
pub struct PatchGrowthReport {
    pub checked: usize,
    /// (node, sup, center value)
    pub violations: Vec<(NodeIdx, f64, f64)>,
}

impl PatchGrowthReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn patch_growth_check(
    field: &ScalarField,
    regions: &RegionDecomposition,
    r: f64,
) -> Result<PatchGrowthReport> {
    field.check_same_grid_regions(regions)?;
    let grid = field.grid();
    let mut checked = 0;
    let mut violations = Vec::new();
    for node in regions.free_boundary_nodes() {
        let x0 = grid.coords(node);
        let norm: f64 = (0..grid.n()).map(|k| x0[k] * x0[k]).sum::<f64>().sqrt();
        if norm + r > 1.0 + 1e-12 {
            continue;
        }
        let sup = sup_on_ball_open(field, &x0[..grid.n()], r)?;
        let u0 = field.value(node);
        checked += 1;
        if sup - u0 <= 1e-12 {
            violations.push((node, sup, u0));
        }
    }
    Ok(PatchGrowthReport {
        checked,
        violations,
    })
}

impl ScalarField {
    fn check_same_grid_regions(&self, regions: &RegionDecomposition) -> Result<()> {
        if self.grid() != regions.grid() {
            return Err(FbError::InvalidArgument(
                "regions were computed on a different grid".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Dyadic growth
// ---------------------------------------------------------------------------

/// Oscillation decay over dyadic balls: `S_j = max_{B(z, 2^-j)} |u - u(z)|`,
/// the smallest constant making the two-branch decay inequality hold, and
/// the levels violating it for a prescribed constant.
#[derive(Debug, Clone)]
pub struct DyadicGrowthReport {
    pub z: NodeIdx,
    pub z_coords: [f64; 3],
    /// levels j = 1, 2, ... (S[k] corresponds to j = k+1)
    pub s: Vec<f64>,
    pub sup_bound: f64,
    pub c0_fit: f64,
}

impl DyadicGrowthReport {
    pub fn level(&self, k: usize) -> u32 {
        (k + 1) as u32
    }

    /// Levels where neither decay branch holds for the given constant.
    pub fn violations_for(&self, c0: f64) -> Vec<u32> {
        let mut out = Vec::new();
        for k in 0..self.s.len().saturating_sub(1) {
            let j = self.level(k);
            let branch1 = self.s[k] * 0.25;
            let branch2 = c0 * self.sup_bound * 0.25f64.powi(j as i32);
            let bound = branch1.max(branch2);
            if self.s[k + 1] > bound * (1.0 + 1e-12) {
                out.push(j);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,S_j\n");
        for (k, &s) in self.s.iter().enumerate() {
            let _ = writeln!(out, "{},{:.16e}", self.level(k), s);
        }
        out
    }
}

/// Compute the dyadic oscillation ladder at a free-boundary node. Levels stop
/// at `j_max` or as soon as a ball holds fewer than 10 active nodes.
/// `sup_bound` is the class bound used to normalize the fitted constant.
pub fn dyadic_growth(
    field: &ScalarField,
    z: NodeIdx,
    j_max: u32,
    sup_bound: f64,
) -> Result<DyadicGrowthReport> {
    let grid = field.grid();
    if !grid.is_active(z) {
        return Err(FbError::InvalidArgument(format!(
            "base node {z:?} is not active"
        )));
    }
    if !(sup_bound > 0.0) {
        return Err(FbError::InvalidArgument(
            "sup bound must be positive".into(),
        ));
    }
    let zc = grid.coords(z);
    if grid.distance_to_boundary(&zc[..grid.n()]) + 1e-12 < 0.5 {
        return Err(FbError::BallOutOfDomain {
            center: zc[..grid.n()].to_vec(),
            radius: 0.5,
        });
    }
    let uz = field.value(z);
    let mut s = Vec::new();
    for j in 1..=j_max {
        let r = 0.5f64.powi(j as i32);
        let mut count = 0usize;
        let mut best = 0.0f64;
        for idx in grid.nodes_in_ball(&zc[..grid.n()], r) {
            count += 1;
            let d = (field.value(idx) - uz).abs();
            if d > best {
                best = d;
            }
        }
        if count < 10 {
            break;
        }
        s.push(best);
    }
    let mut c0_fit = 0.0f64;
    for k in 0..s.len().saturating_sub(1) {
        let j = (k + 1) as i32;
        if s[k + 1] > s[k] * 0.25 * (1.0 + 1e-12) {
            // first branch fails; the second must carry this level
            c0_fit = c0_fit.max(s[k + 1] * 4.0f64.powi(j) / sup_bound);
        }
    }
    Ok(DyadicGrowthReport {
        z,
        z_coords: zc,
        s,
        sup_bound,
        c0_fit,
    })
}

// ---------------------------------------------------------------------------
// Quadratic growth and second differences
// ---------------------------------------------------------------------------

/// Largest ratio `|u(x) - u(z)| / (M d(x)^2)` over nodes within distance
/// 0.25 of the free boundary, with `d` the distance to the nearest labeled
/// free-boundary node `z` (ties resolved lexicographically).
pub fn quadratic_growth_check(
    field: &ScalarField,
    regions: &RegionDecomposition,
    sup_bound: f64,
) -> Result<(f64, Option<NodeIdx>)> {
    field.check_same_grid_regions(regions)?;
    if !(sup_bound > 0.0) {
        return Err(FbError::InvalidArgument(
            "sup bound must be positive".into(),
        ));
    }
    let grid = field.grid();
    let gammas = regions.free_boundary_nodes();
    if gammas.is_empty() {
        return Ok((0.0, None));
    }
    let gamma_pts: Vec<([f64; 3], f64)> = gammas
        .iter()
        .map(|&g| (grid.coords(g), field.value(g)))
        .collect();

    let mut c_fit = 0.0f64;
    let mut witness = None;
    for idx in grid.active_nodes() {
        let x = grid.coords(idx);
        let mut best_d2 = f64::INFINITY;
        let mut best_val = 0.0;
        for (gx, gv) in &gamma_pts {
            let mut d2 = 0.0;
            for k in 0..grid.n() {
                d2 += (x[k] - gx[k]) * (x[k] - gx[k]);
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best_val = *gv;
            }
        }
        let d = best_d2.sqrt();
        if d <= 0.0 || d > 0.25 {
            continue;
        }
        let ratio = (field.value(idx) - best_val).abs() / (sup_bound * best_d2);
        if ratio > c_fit {
            c_fit = ratio;
            witness = Some(idx);
        }
    }
    Ok((c_fit, witness))
}

/// Maximum absolute second difference quotient (pure and mixed) over nodes of
/// the open half-ball of radius 1/2 whose full stencil is active. Requires a
/// resolution of at least 64 subdivisions.
pub fn hessian_bound_check(field: &ScalarField) -> Result<(f64, Option<NodeIdx>)> {
    let grid = field.grid();
    if grid.subdiv() < 64 {
        return Err(FbError::InvalidArgument(format!(
            "second-difference scan needs h <= 1/64, got 1/{}",
            grid.subdiv()
        )));
    }
    let h = grid.h();
    let h2 = h * h;
    let n = grid.n();
    let mut best = 0.0f64;
    let mut witness = None;
    'nodes: for idx in grid.active_nodes() {
        let x = grid.coords(idx);
        let norm2: f64 = (0..n).map(|k| x[k] * x[k]).sum();
        if norm2 > 0.25 {
            continue;
        }
        if grid.kind().is_half() && x[0] <= 0.0 {
            continue;
        }
        let rel = grid.rel(idx);
        // full 3^n neighborhood must stay active
        for axis in 0..n {
            for dir in [-1i64, 1] {
                let mut q = rel;
                q[axis] += dir;
                let raw = [
                    q[0] + grid.origin()[0],
                    q[1] + grid.origin()[1],
                    q[2] + grid.origin()[2],
                ];
                if !grid.in_box(raw)
                    || !grid.is_active([raw[0] as usize, raw[1] as usize, raw[2] as usize])
                {
                    continue 'nodes;
                }
            }
        }
        let at = |d0: i64, d1: i64, d2: i64| -> Option<f64> {
            let raw = [
                rel[0] + d0 + grid.origin()[0],
                rel[1] + d1 + grid.origin()[1],
                rel[2] + d2 + grid.origin()[2],
            ];
            if !grid.in_box(raw) {
                return None;
            }
            let id = [raw[0] as usize, raw[1] as usize, raw[2] as usize];
            if grid.is_active(id) {
                Some(field.value(id))
            } else {
                None
            }
        };
        let center = field.value(idx);
        let mut local = 0.0f64;
        for axis in 0..n {
            let mut d = [0i64; 3];
            d[axis] = 1;
            let f = at(d[0], d[1], d[2]);
            let b = at(-d[0], -d[1], -d[2]);
            if let (Some(f), Some(b)) = (f, b) {
                local = local.max(((f - 2.0 * center + b) / h2).abs());
            }
        }
        for a1 in 0..n {
            for a2 in (a1 + 1)..n {
                let mut pp = [0i64; 3];
                pp[a1] = 1;
                pp[a2] = 1;
                let mut pm = [0i64; 3];
                pm[a1] = 1;
                pm[a2] = -1;
                let q = (
                    at(pp[0], pp[1], pp[2]),
                    at(pm[0], pm[1], pm[2]),
                    at(-pm[0], -pm[1], -pm[2]),
                    at(-pp[0], -pp[1], -pp[2]),
                );
                if let (Some(a), Some(b), Some(c), Some(d)) = q {
                    local = local.max(((a - b - c + d) / (4.0 * h2)).abs());
                }
            }
        }
        if local > best {
            best = local;
            witness = Some(idx);
        }
    }
    Ok((best, witness))
}
