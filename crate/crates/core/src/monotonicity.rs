//! Weighted two-phase Dirichlet functional: `I(r, v, x0)` integrates
//! `|∇v|^2 / |x - x0|^(n-2)` over `B(x0, r)`, and the product functional
//! `phi(r) = I(r, h1) I(r, h2) / r^4` is scanned over radii for a pair of
//! nonnegative functions with disjoint supports vanishing at the center.

use std::fmt::Write as _;

use crate::error::{FbError, Result};
use crate::field::{gradient, ScalarField};
use crate::grid::{Grid, NodeIdx};

#[derive(Debug, Clone)]
pub struct MonotonicityScan {
    pub center: [f64; 3],
    pub n: usize,
    pub radii: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub phi: Vec<f64>,
}

impl MonotonicityScan {
    /// CSV export `r,I1,I2,phi`, one row per radius.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,I1,I2,phi\n");
        for k in 0..self.radii.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.radii[k], self.i1[k], self.i2[k], self.phi[k]
            );
        }
        out
    }

    pub fn max_phi(&self) -> f64 {
        self.phi.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Monotone,
    ViolationAt(usize),
}

impl Verdict {
    pub fn is_monotone(&self) -> bool {
        matches!(self, Verdict::Monotone)
    }
}

/// Split the directional derivative `D_e u` into its nonnegative and
/// nonpositive parts. On a half-ball the direction must be tangential
/// (orthogonal to `e1`) and the parts are extended by zero across the flat
/// boundary onto the full ball; on a full ball the parts stay in place.
pub fn split_directional(
    field: &ScalarField,
    e: &[f64],
) -> Result<(ScalarField, ScalarField)> {
    let grid = field.grid();
    let n = grid.n();
    if e.len() != n {
        return Err(FbError::InvalidArgument(format!(
            "direction has {} components, grid dimension is {n}",
            e.len()
        )));
    }
    let norm: f64 = e.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(FbError::InvalidArgument(format!(
            "direction must be a unit vector, |e| = {norm}"
        )));
    }
    let grad = gradient(field)?;

    match grid.kind() {
        crate::grid::DomainKind::FullBall => {
            let mut pos = ScalarField::zeros(grid.clone());
            let mut neg = ScalarField::zeros(grid.clone());
            for idx in grid.active_nodes() {
                let d = grad.component(idx, e);
                pos.set(idx, d.max(0.0));
                neg.set(idx, (-d).max(0.0));
            }
            Ok((pos, neg))
        }
        crate::grid::DomainKind::HalfBall => {
            if e[0].abs() > 1e-12 {
                return Err(FbError::InvalidArgument(
                    "direction must be orthogonal to e1 on a half domain".into(),
                ));
            }
            let full = Grid::full_ball(n, grid.subdiv())?;
            let mut pos = ScalarField::zeros(full.clone());
            let mut neg = ScalarField::zeros(full.clone());
            let offset = full.origin()[0]; // = subdiv
            for idx in full.active_nodes() {
                let rel0 = idx[0] as i64 - offset;
                if rel0 < 0 {
                    continue; // extended by zero across the flat boundary
                }
                let src = [rel0 as usize, idx[1], idx[2]];
                let d = grad.component(src, e);
                pos.set(idx, d.max(0.0));
                neg.set(idx, (-d).max(0.0));
            }
            Ok((pos, neg))
        }
        crate::grid::DomainKind::HalfRect => Err(FbError::InvalidArgument(
            "directional split is not defined on the half-rectangle".into(),
        )),
    }
}

fn check_ball_in_domain(grid: &Grid, x0: &[f64], r: f64) -> Result<()> {
    if grid.distance_to_boundary(x0) + 1e-12 < r {
        return Err(FbError::BallOutOfDomain {
            center: x0[..grid.n()].to_vec(),
            radius: r,
        });
    }
    Ok(())
}

/// Midpoint-rule quadrature of `|∇v|^2 |x - x0|^(2-n)` over the cells whose
/// centers lie in `B(x0, r)`. Cell gradients are face differences of the
/// corner values (the gradient of the multilinear interpolant at the cell
/// center), which keeps kinks aligned with node lines exact. In three
/// dimensions the cell containing `x0` is skipped (its contribution is
/// O(h^2) for bounded gradients).
pub fn weighted_dirichlet(v: &ScalarField, x0: &[f64], r: f64) -> Result<f64> {
    let grid = v.grid();
    let n = grid.n();
    check_ball_in_domain(grid, x0, r)?;
    let h = grid.h();
    let hn = h.powi(n as i32);
    let shape = grid.shape();
    let origin = grid.origin();

    // bounding box of cells (identified by their lower corner node)
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        let ck = if k < n { x0[k] } else { 0.0 };
        let max_cell = if k < n { shape[k] as i64 - 2 } else { 0 };
        let l = ((ck - r) / h - 1.0).floor() as i64 + origin[k];
        let u = ((ck + r) / h).ceil() as i64 + origin[k];
        lo[k] = l.clamp(0, max_cell.max(0)) as usize;
        hi[k] = u.clamp(0, max_cell.max(0)) as usize;
    }

    let r2 = r * r;
    let mut acc = 0.0;
    for i0 in lo[0]..=hi[0] {
        for i1 in lo[1]..=hi[1] {
            for i2 in lo[2]..=hi[2] {
                let corner: NodeIdx = [i0, i1, i2];
                // cell center
                let base = grid.coords(corner);
                let mut c = [0.0f64; 3];
                let mut d2 = 0.0;
                for k in 0..n {
                    c[k] = base[k] + 0.5 * h;
                    let ck = x0.get(k).copied().unwrap_or(0.0);
                    d2 += (c[k] - ck) * (c[k] - ck);
                }
                if d2 > r2 {
                    continue;
                }
                // all corners must be active; gather their values
                let corners = 1usize << n;
                let mut vals = [0.0f64; 8];
                let mut ok = true;
                for bits in 0..corners {
                    let mut idx = corner;
                    for (k, item) in idx.iter_mut().enumerate().take(n) {
                        if (bits >> k) & 1 == 1 {
                            *item += 1;
                        }
                    }
                    if !grid.in_box([idx[0] as i64, idx[1] as i64, idx[2] as i64])
                        || !grid.is_active(idx)
                    {
                        ok = false;
                        break;
                    }
                    vals[bits] = v.value(idx);
                }
                if !ok {
                    continue;
                }
                // face differences: mean over the +k face minus the -k face
                let face_scale = 1.0 / ((corners / 2) as f64 * h);
                let mut mag2 = 0.0;
                for k in 0..n {
                    let mut diff = 0.0;
                    for (bits, val) in vals.iter().enumerate().take(corners) {
                        if (bits >> k) & 1 == 1 {
                            diff += val;
                        } else {
                            diff -= val;
                        }
                    }
                    let comp = diff * face_scale;
                    mag2 += comp * comp;
                }
                let kernel = if n == 2 {
                    1.0
                } else {
                    // exclude the singular cell containing x0
                    let contains = (0..n).all(|k| {
                        (c[k] - x0.get(k).copied().unwrap_or(0.0)).abs() <= 0.5 * h
                    });
                    if contains {
                        continue;
                    }
                    1.0 / d2.sqrt()
                };
                acc += mag2 * kernel * hn;
            }
        }
    }
    Ok(acc)
}

/// Scan the product functional over a list of radii for a complementary pair.
///
/// Preconditions checked here: both parts nonnegative, nodewise product below
/// `eps_g^2` (with `eps_g = h`) outside at most 0.1% of the active nodes, and
/// both parts vanishing at the center node (within `eps_g`).
pub fn phi(
    h1: &ScalarField,
    h2: &ScalarField,
    x0: &[f64],
    radii: &[f64],
) -> Result<MonotonicityScan> {
    h1.check_same_grid(h2)?;
    let grid = h1.grid();
    let n = grid.n();
    let eps_g = grid.h();

    for (name, f) in [("h1", h1), ("h2", h2)] {
        let min = grid
            .active_nodes()
            .map(|idx| f.value(idx))
            .fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(FbError::InvalidArgument(format!(
                "{name} must be nonnegative, min = {min:e}"
            )));
        }
    }

    let tol = eps_g * eps_g;
    let total = grid.active_count();
    let overlap = grid
        .active_nodes()
        .filter(|&idx| (h1.value(idx) * h2.value(idx)).abs() > tol)
        .count();
    if overlap as f64 > 0.001 * total as f64 {
        return Err(FbError::NotComplementary { overlap, total });
    }

    let center_node = grid.nearest_node(x0).ok_or_else(|| FbError::OutOfDomain {
        point: x0.to_vec(),
    })?;
    for (name, f) in [("h1", h1), ("h2", h2)] {
        let v = f.value(center_node).abs();
        if v > eps_g {
            return Err(FbError::InvalidArgument(format!(
                "{name} must vanish at the scan center, |{name}(x0)| = {v:e}"
            )));
        }
    }

    let mut prev = 0.0;
    for (k, &r) in radii.iter().enumerate() {
        if !(r > 0.0) || (k > 0 && r <= prev) {
            return Err(FbError::InvalidArgument(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        prev = r;
    }

    let mut i1 = Vec::with_capacity(radii.len());
    let mut i2 = Vec::with_capacity(radii.len());
    let mut phis = Vec::with_capacity(radii.len());
    for &r in radii {
        let a = weighted_dirichlet(h1, x0, r)?;
        let b = weighted_dirichlet(h2, x0, r)?;
        i1.push(a);
        i2.push(b);
        phis.push(a * b / (r * r * r * r));
    }

    let mut center = [0.0f64; 3];
    center[..x0.len().min(3)].copy_from_slice(&x0[..x0.len().min(3)]);
    Ok(MonotonicityScan {
        center,
        n,
        radii: radii.to_vec(),
        i1,
        i2,
        phi: phis,
    })
}

/// Monotone up to slack: `phi[k+1] >= phi[k] - slack` for every k. The
/// default slack is 2% of the scan maximum.
pub fn monotone_verdict(scan: &MonotonicityScan, slack: Option<f64>) -> Verdict {
    let slack = slack.unwrap_or(0.02 * scan.max_phi());
    for k in 0..scan.phi.len().saturating_sub(1) {
        if scan.phi[k + 1] < scan.phi[k] - slack {
            return Verdict::ViolationAt(k);
        }
    }
    Verdict::Monotone
}
