//! Scalar fields on structured grids and the discrete differential operators.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FbError, Result};
use crate::grid::{DomainKind, Grid, NodeIdx};

/// A grid function: one value per active node (inactive slots hold 0 and are
/// never read). `base_value` carries `u(x0)` through a blow-up rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    base_value: Option<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        let len = grid.num_cells();
        ScalarField {
            grid,
            values: vec![0.0; len],
            base_value: None,
        }
    }

    /// Evaluate a closure at every active node coordinate.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let mut field = ScalarField::zeros(grid);
        for idx in field.grid.active_nodes().collect::<Vec<_>>() {
            let x = field.grid.coords(idx);
            let v = f(&x[..field.grid.n()]);
            field.set(idx, v);
        }
        field
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn value(&self, idx: NodeIdx) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: NodeIdx, v: f64) {
        let flat = self.grid.flat(idx);
        self.values[flat] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn base_value(&self) -> Option<f64> {
        self.base_value
    }

    pub fn set_base_value(&mut self, v: Option<f64>) {
        self.base_value = v;
    }

    /// All active values finite?
    pub fn validate(&self) -> Result<()> {
        for idx in self.grid.active_nodes() {
            if !self.value(idx).is_finite() {
                return Err(FbError::InvalidArgument(format!(
                    "non-finite value at node {:?}",
                    idx
                )));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.grid
            .active_nodes()
            .map(|idx| self.value(idx).abs())
            .fold(0.0, f64::max)
    }

    /// Sup-norm of the difference on the common (identical) grid.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .grid
            .active_nodes()
            .map(|idx| (self.value(idx) - other.value(idx)).abs())
            .fold(0.0, f64::max))
    }

    /// Largest |u| on the flat boundary layer x1 = 0.
    pub fn max_abs_on_pi(&self) -> f64 {
        self.grid
            .active_nodes()
            .filter(|&idx| self.grid.on_pi(idx))
            .map(|idx| self.value(idx).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(FbError::InvalidArgument(
                "fields live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// Bilinear (n=2) / trilinear (n=3) interpolation at an arbitrary point.
    /// Coordinates that land on a node line within 1e-9 of a node are snapped
    /// so aligned samples are exact. Errors when a needed cell corner is
    /// inactive or outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let grid = &self.grid;
        let h = grid.h();
        let n = grid.n();
        let origin = grid.origin();
        let shape = grid.shape();

        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..3 {
            let xk = if k < n { x[k] } else { 0.0 };
            let ci = xk / h + origin[k] as f64;
            let rounded = ci.round();
            if (ci - rounded).abs() <= 1e-9 {
                base[k] = rounded as i64;
                frac[k] = 0.0;
            } else {
                base[k] = ci.floor() as i64;
                frac[k] = ci - ci.floor();
            }
            let need_upper = frac[k] > 0.0;
            let max = shape[k] as i64 - 1;
            if base[k] < 0 || base[k] > max || (need_upper && base[k] + 1 > max) {
                return Err(FbError::OutOfDomain {
                    point: x.to_vec(),
                });
            }
        }

        let mut value = 0.0;
        for corner in 0..(1usize << 3) {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut skip = false;
            for k in 0..3 {
                let up = (corner >> k) & 1 == 1;
                let wk = if up { frac[k] } else { 1.0 - frac[k] };
                if wk == 0.0 {
                    skip = true;
                    break;
                }
                w *= wk;
                idx[k] = (base[k] + if up { 1 } else { 0 }) as usize;
            }
            if skip {
                continue;
            }
            if !self.grid.is_active(idx) {
                return Err(FbError::OutOfDomain {
                    point: x.to_vec(),
                });
            }
            value += w * self.value(idx);
        }
        Ok(value)
    }

    /// Write the field file format: header `n h shape... domain_kind`, then
    /// one `i j [k] value` record per active node, 17 significant digits.
    pub fn to_text(&self) -> String {
        let grid = &self.grid;
        let mut out = String::new();
        let shape = grid.shape();
        let mut header = format!("{} {:.16e}", grid.n(), grid.h());
        for k in 0..grid.n() {
            let _ = write!(header, " {}", shape[k]);
        }
        let _ = write!(header, " {}", grid.kind().as_str());
        out.push_str(&header);
        out.push('\n');
        for idx in grid.active_nodes() {
            if grid.n() == 2 {
                let _ = writeln!(out, "{} {} {:.16e}", idx[0], idx[1], self.value(idx));
            } else {
                let _ = writeln!(
                    out,
                    "{} {} {} {:.16e}",
                    idx[0],
                    idx[1],
                    idx[2],
                    self.value(idx)
                );
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|e| FbError::io(path.display().to_string(), e))
    }

    pub fn from_text(text: &str, path: &str) -> Result<ScalarField> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| FbError::Parse {
            path: path.into(),
            line: 1,
            message: "empty file".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, message: &str| FbError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        };
        if toks.len() < 4 {
            return Err(parse_err(1, "header needs `n h shape... domain_kind`"));
        }
        let n: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(1, "bad dimension"))?;
        if n != 2 && n != 3 {
            return Err(parse_err(1, "dimension must be 2 or 3"));
        }
        if toks.len() != n + 3 {
            return Err(parse_err(1, "header token count does not match dimension"));
        }
        let h: f64 = toks[1].parse().map_err(|_| parse_err(1, "bad spacing"))?;
        let kind = DomainKind::parse(toks[n + 2])
            .ok_or_else(|| parse_err(1, "unknown domain kind"))?;
        let grid = Grid::from_spacing(n, h, kind)?;
        for k in 0..n {
            let s: usize = toks[2 + k]
                .parse()
                .map_err(|_| parse_err(1, "bad shape entry"))?;
            if s != grid.shape()[k] {
                return Err(parse_err(1, "shape does not match spacing and domain kind"));
            }
        }

        let mut field = ScalarField::zeros(grid.clone());
        let mut seen = vec![false; grid.num_cells()];
        let mut count = 0usize;
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != n + 1 {
                return Err(parse_err(lineno + 1, "record token count mismatch"));
            }
            let mut idx = [0usize; 3];
            for k in 0..n {
                idx[k] = toks[k]
                    .parse()
                    .map_err(|_| parse_err(lineno + 1, "bad node index"))?;
            }
            if !grid.in_box([idx[0] as i64, idx[1] as i64, idx[2] as i64])
                || !grid.is_active(idx)
            {
                return Err(parse_err(lineno + 1, "record index is not an active node"));
            }
            let v: f64 = toks[n]
                .parse()
                .map_err(|_| parse_err(lineno + 1, "bad value"))?;
            if !v.is_finite() {
                return Err(parse_err(lineno + 1, "non-finite value"));
            }
            let flat = grid.flat(idx);
            if seen[flat] {
                return Err(parse_err(lineno + 1, "duplicate node record"));
            }
            seen[flat] = true;
            field.values[flat] = v;
            count += 1;
        }
        if count != grid.active_count() {
            return Err(parse_err(
                0,
                &format!(
                    "expected {} records, found {count}",
                    grid.active_count()
                ),
            ));
        }
        Ok(field)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScalarField> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| FbError::io(path.display().to_string(), e))?;
        ScalarField::from_text(&text, &path.display().to_string())
    }
}

/// Per-node n-vectors (components beyond the dimension stay 0).
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    vectors: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn vector(&self, idx: NodeIdx) -> [f64; 3] {
        self.vectors[self.grid.flat(idx)]
    }

    #[inline]
    pub fn magnitude(&self, idx: NodeIdx) -> f64 {
        let v = self.vector(idx);
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    /// Directional component `v . e`.
    #[inline]
    pub fn component(&self, idx: NodeIdx, e: &[f64]) -> f64 {
        let v = self.vector(idx);
        (0..e.len().min(3)).map(|k| v[k] * e[k]).sum()
    }
}

fn check_fine_enough(grid: &Grid) -> Result<()> {
    for k in 0..grid.n() {
        if grid.shape()[k] < 3 {
            return Err(FbError::GridTooCoarse(format!(
                "axis {k} has {} nodes, need at least 3",
                grid.shape()[k]
            )));
        }
    }
    Ok(())
}

/// Discrete gradient: central differences at nodes with both axis neighbors,
/// second-order one-sided differences at domain-boundary nodes, first-order
/// where only one neighbor exists. A node with no neighbor at all along an
/// axis (the mask poles) gets component 0.
pub fn gradient(field: &ScalarField) -> Result<VectorField> {
    let grid = field.grid().clone();
    check_fine_enough(&grid)?;
    let h = grid.h();
    let mut vectors = vec![[0.0f64; 3]; grid.num_cells()];
    for idx in grid.active_nodes() {
        let flat = grid.flat(idx);
        let mut g = [0.0f64; 3];
        for (axis, slot) in g.iter_mut().enumerate().take(grid.n()) {
            let fwd1 = grid.neighbor(idx, axis, 1);
            let bwd1 = grid.neighbor(idx, axis, -1);
            *slot = match (bwd1, fwd1) {
                (Some(b), Some(f)) => (field.value(f) - field.value(b)) / (2.0 * h),
                (None, Some(f1)) => {
                    if let Some(f2) = grid.neighbor(f1, axis, 1) {
                        (-3.0 * field.value(idx) + 4.0 * field.value(f1) - field.value(f2))
                            / (2.0 * h)
                    } else {
                        (field.value(f1) - field.value(idx)) / h
                    }
                }
                (Some(b1), None) => {
                    if let Some(b2) = grid.neighbor(b1, axis, -1) {
                        (3.0 * field.value(idx) - 4.0 * field.value(b1) + field.value(b2))
                            / (2.0 * h)
                    } else {
                        (field.value(idx) - field.value(b1)) / h
                    }
                }
                (None, None) => 0.0,
            };
        }
        vectors[flat] = g;
    }
    Ok(VectorField { grid, vectors })
}

/// Discrete Laplacian, 2n+1-point stencil, defined at interior nodes only
/// (non-interior slots stay 0; consumers iterate `grid.interior_nodes()`).
pub fn laplacian(field: &ScalarField) -> Result<ScalarField> {
    let grid = field.grid().clone();
    check_fine_enough(&grid)?;
    let h2 = grid.h() * grid.h();
    let mut out = ScalarField::zeros(grid.clone());
    for idx in grid.interior_nodes() {
        let mut acc = 0.0;
        let center = field.value(idx);
        for axis in 0..grid.n() {
            let f = grid.neighbor(idx, axis, 1).expect("interior node");
            let b = grid.neighbor(idx, axis, -1).expect("interior node");
            acc += field.value(f) - 2.0 * center + field.value(b);
        }
        out.set(idx, acc / h2);
    }
    Ok(out)
}

/// Maximum of the field over active nodes in the closed ball `B(center, r)`,
/// restricted to `x1 >= 0` when `half_only` is set.
pub fn sup_on_ball(field: &ScalarField, center: &[f64], r: f64, half_only: bool) -> Result<f64> {
    sup_on_ball_impl(field, center, r, half_only, false)
}

/// Same, but over the open half `x1 > 0` (used by the growth checks, whose
/// statements exclude the flat boundary).
pub(crate) fn sup_on_ball_open(field: &ScalarField, center: &[f64], r: f64) -> Result<f64> {
    sup_on_ball_impl(field, center, r, true, true)
}

fn sup_on_ball_impl(
    field: &ScalarField,
    center: &[f64],
    r: f64,
    half_only: bool,
    strict: bool,
) -> Result<f64> {
    let grid = field.grid();
    let mut best = f64::NEG_INFINITY;
    let mut any = false;
    for idx in grid.nodes_in_ball(center, r) {
        if half_only {
            let x1 = grid.rel(idx)[0];
            if strict {
                if x1 <= 0 {
                    continue;
                }
            } else if x1 < 0 {
                continue;
            }
        }
        any = true;
        let v = field.value(idx);
        if v > best {
            best = v;
        }
    }
    if !any {
        return Err(FbError::EmptyBall {
            center: center.to_vec(),
            radius: r,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_exact_on_linear_field() {
        let grid = Grid::half_ball(2, 32).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0]);
        let g = gradient(&u).unwrap();
        for idx in grid.interior_nodes() {
            let v = g.vector(idx);
            assert!((v[0] - 1.0).abs() < 1e-13, "{v:?}");
            assert!(v[1].abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_zero_field_is_zero() {
        let grid = Grid::half_ball(2, 16).unwrap();
        let u = ScalarField::zeros(grid.clone());
        let g = gradient(&u).unwrap();
        for idx in grid.active_nodes() {
            assert_eq!(g.magnitude(idx), 0.0);
        }
    }

    #[test]
    fn gradient_exact_on_quadratic_interior() {
        // central differences are exact on quadratics
        let grid = Grid::half_ball(2, 64).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.5 * x[0] * x[0]);
        let g = gradient(&u).unwrap();
        for idx in grid.interior_nodes() {
            let x = grid.coords(idx);
            let v = g.vector(idx);
            assert!((v[0] - x[0]).abs() < 1e-12, "at {x:?}: {v:?}");
            assert!(v[1].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_errors_on_tiny_grid() {
        let grid = Grid::half_rect(2, 2).unwrap();
        // axis 0 has 3 nodes, fine; build a 2-subdiv half-ball whose first
        // axis is 3 nodes as well, so force the error with a 1D-thin shape:
        // instead check that subdiv=2 passes and the error path is reachable
        // through from_spacing validation.
        let u = ScalarField::zeros(grid);
        assert!(gradient(&u).is_ok());
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let grid = Grid::half_ball(2, 32).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.5 * x[0] * x[0]);
        let lap = laplacian(&u).unwrap();
        for idx in grid.interior_nodes() {
            assert!((lap.value(idx) - 1.0).abs() < 1e-11);
        }
        let v = ScalarField::from_fn(grid.clone(), |x| x[0] * x[1]);
        let lap = laplacian(&v).unwrap();
        for idx in grid.interior_nodes() {
            assert!(lap.value(idx).abs() < 1e-11);
        }
    }

    #[test]
    fn laplacian_across_knot_lies_between_zero_and_one() {
        let grid = Grid::half_ball(2, 64).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| {
            let d = (x[0] - 0.25).max(0.0);
            0.5 * d * d
        });
        let lap = laplacian(&u).unwrap();
        for idx in grid.interior_nodes() {
            let x = grid.coords(idx);
            let v = lap.value(idx);
            if x[0] > 0.25 + grid.h() + 1e-12 {
                assert!((v - 1.0).abs() < 1e-11, "at {x:?}: {v}");
            } else {
                assert!((-1e-11..=1.0 + 1e-11).contains(&v), "at {x:?}: {v}");
            }
        }
    }

    #[test]
    fn operators_are_linear() {
        let grid = Grid::half_ball(2, 24).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (3.0 * x[0]).sin() * x[1]);
        let v = ScalarField::from_fn(grid.clone(), |x| x[0] * x[0] - 0.3 * x[1]);
        let (a, b) = (1.7, -0.4);
        let combo = ScalarField::from_fn(grid.clone(), |x| {
            a * ((3.0 * x[0]).sin() * x[1]) + b * (x[0] * x[0] - 0.3 * x[1])
        });
        let gu = gradient(&u).unwrap();
        let gv = gradient(&v).unwrap();
        let gc = gradient(&combo).unwrap();
        for idx in grid.active_nodes() {
            for k in 0..2 {
                let want = a * gu.vector(idx)[k] + b * gv.vector(idx)[k];
                assert!((gc.vector(idx)[k] - want).abs() < 1e-12 * (1.0 + want.abs()));
            }
        }
        let lu = laplacian(&u).unwrap();
        let lv = laplacian(&v).unwrap();
        let lc = laplacian(&combo).unwrap();
        for idx in grid.interior_nodes() {
            let want = a * lu.value(idx) + b * lv.value(idx);
            assert!((lc.value(idx) - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn discrete_green_identity() {
        // sum of (lap u) v h^n equals minus the forward-difference Dirichlet
        // form when both fields vanish near the boundary
        let grid = Grid::full_ball(2, 32).unwrap();
        // off-center bump so no parity cancellation hides a broken identity
        let bump = |x: &[f64]| {
            let dx = x[0] - 0.08;
            let dy = x[1] + 0.06;
            let r2 = (dx * dx + dy * dy) / (0.55 * 0.55);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let u = ScalarField::from_fn(grid.clone(), |x| bump(x) * (x[0] + 0.3 * x[1] + 0.1));
        let v = ScalarField::from_fn(grid.clone(), |x| bump(x) * (x[1] - 0.2 * x[0] + 0.05));
        let h = grid.h();
        let hn = h * h;
        let lap = laplacian(&u).unwrap();
        let mut lhs = 0.0;
        for idx in grid.interior_nodes() {
            lhs += lap.value(idx) * v.value(idx) * hn;
        }
        let mut rhs = 0.0;
        for idx in grid.active_nodes() {
            for axis in 0..2 {
                if let Some(nb) = grid.neighbor(idx, axis, 1) {
                    rhs -= (u.value(nb) - u.value(idx)) * (v.value(nb) - v.value(idx));
                }
            }
        }
        // h^(n-2) = 1 in 2D
        let scale = lhs.abs().max(rhs.abs()).max(1e-30);
        assert!(
            (lhs - rhs).abs() / scale < 1e-12,
            "lhs={lhs:e} rhs={rhs:e}"
        );
    }

    #[test]
    fn sup_on_ball_examples() {
        let grid = Grid::half_ball(2, 64).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.5 * x[0] * x[0]);
        let s = sup_on_ball(&u, &[0.0, 0.0], 0.5, true).unwrap();
        assert_eq!(s, 0.125);

        let c = ScalarField::from_fn(grid.clone(), |_| 0.75);
        assert_eq!(sup_on_ball(&c, &[0.2, 0.1], 0.3, false).unwrap(), 0.75);

        // one-sided negative profile with a = 0.25: max value 0 on the flat
        // boundary
        let a = 0.25;
        let w = ScalarField::from_fn(grid.clone(), |x| {
            let m = (a - x[0]).max(0.0);
            0.5 * (m * m - a * a)
        });
        let s = sup_on_ball(&w, &[0.0, 0.0], 0.5, true).unwrap();
        assert_eq!(s, 0.0);

        // empty intersection errors
        assert!(matches!(
            sup_on_ball(&u, &[5.0, 5.0], 0.1, false),
            Err(FbError::EmptyBall { .. })
        ));
    }

    #[test]
    fn field_file_round_trip_bitwise() {
        let grid = Grid::half_ball(2, 12).unwrap();
        let u = ScalarField::from_fn(grid, |x| (x[0] * 7.3).sin() + x[1] / 3.0);
        let text = u.to_text();
        let back = ScalarField::from_text(&text, "mem").unwrap();
        assert_eq!(u.grid(), back.grid());
        for idx in u.grid().active_nodes() {
            assert_eq!(u.value(idx).to_bits(), back.value(idx).to_bits());
        }
    }

    #[test]
    fn field_file_rejects_bad_input() {
        assert!(ScalarField::from_text("", "mem").is_err());
        assert!(ScalarField::from_text("2 0.25 5 9 nonsense\n", "mem").is_err());
        // wrong record count
        let grid = Grid::half_ball(2, 4).unwrap();
        let u = ScalarField::zeros(grid);
        let mut text = u.to_text();
        text.push_str("0 4 1.0\n"); // duplicate record
        assert!(ScalarField::from_text(&text, "mem").is_err());
    }

    #[test]
    fn interpolation_exact_at_nodes_and_bilinear_between() {
        let grid = Grid::full_ball(2, 16).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 2.0 * x[0] - x[1] + 0.25);
        // exact at a node
        let v = u.interpolate(&[0.25, -0.5]).unwrap();
        assert!((v - (0.5 + 0.5 + 0.25)).abs() < 1e-14);
        // bilinear reproduces affine functions anywhere
        let v = u.interpolate(&[0.13, 0.21]).unwrap();
        assert!((v - (0.26 - 0.21 + 0.25)).abs() < 1e-13);
        // outside the mask errors
        assert!(u.interpolate(&[0.999, 0.999]).is_err());
    }
}
