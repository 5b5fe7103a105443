//! Structured grids on the half-ball, full ball and half-rectangle.
//!
//! All grids are uniform Cartesian node masks with spacing `h = 1/N` where
//! `N` is the number of subdivisions per unit radius. Node coordinates are
//! always derived from integer indices, `x_k = (i_k - origin_k) * h`, so the
//! flat boundary `{x_1 = 0}` is exactly the node layer with index offset 0
//! and no rounding accumulates anywhere.

use std::sync::Arc;

use crate::error::{FbError, Result};

/// Raw box index of a node, one entry per axis. Axes beyond the grid
/// dimension are always 0.
pub type NodeIdx = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// `{ |x| <= 1, x_1 >= 0 }`, flat boundary on the node layer `x_1 = 0`.
    HalfBall,
    /// `{ |x| <= 1 }`.
    FullBall,
    /// `[0,1] x [-1,1]^(n-1)`, no curved mask.
    HalfRect,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::HalfBall => "half_ball",
            DomainKind::FullBall => "full_ball",
            DomainKind::HalfRect => "half_rect",
        }
    }

    pub fn parse(s: &str) -> Option<DomainKind> {
        match s {
            "half_ball" => Some(DomainKind::HalfBall),
            "full_ball" => Some(DomainKind::FullBall),
            "half_rect" => Some(DomainKind::HalfRect),
            _ => None,
        }
    }

    pub fn is_half(&self) -> bool {
        matches!(self, DomainKind::HalfBall | DomainKind::HalfRect)
    }
}

#[derive(Debug)]
struct GridData {
    active: Vec<bool>,
    interior: Vec<bool>,
    /// Active nodes in lexicographic index order. Fixed iteration order keeps
    /// every reduction over nodes deterministic.
    nodes: Vec<NodeIdx>,
}

/// A structured grid: dimension, spacing, domain mask and index bookkeeping.
///
/// Cloning is cheap (the node masks are shared). Two grids compare equal when
/// dimension, subdivision count and domain kind agree; the masks are a pure
/// function of those.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    subdiv: u32,
    kind: DomainKind,
    shape: [usize; 3],
    origin: [i64; 3],
    data: Arc<GridData>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.subdiv == other.subdiv && self.kind == other.kind
    }
}

impl Grid {
    pub fn new(n: usize, subdiv: u32, kind: DomainKind) -> Result<Grid> {
        if n != 2 && n != 3 {
            return Err(FbError::InvalidArgument(format!(
                "dimension must be 2 or 3, got {n}"
            )));
        }
        if subdiv < 2 {
            return Err(FbError::GridTooCoarse(format!(
                "need at least 2 subdivisions per unit radius, got {subdiv}"
            )));
        }
        let nn = subdiv as usize;
        let (shape, origin) = match kind {
            DomainKind::HalfBall | DomainKind::HalfRect => {
                let mut shape = [nn + 1, 2 * nn + 1, 1];
                let mut origin = [0i64, nn as i64, 0];
                if n == 3 {
                    shape[2] = 2 * nn + 1;
                    origin[2] = nn as i64;
                }
                (shape, origin)
            }
            DomainKind::FullBall => {
                let mut shape = [2 * nn + 1, 2 * nn + 1, 1];
                let mut origin = [nn as i64, nn as i64, 0];
                if n == 3 {
                    shape[2] = 2 * nn + 1;
                    origin[2] = nn as i64;
                }
                (shape, origin)
            }
        };

        let volume = shape[0] * shape[1] * shape[2];
        let mut active = vec![false; volume];
        let r2 = (subdiv as i64) * (subdiv as i64);
        let mut nodes = Vec::new();
        for i0 in 0..shape[0] {
            for i1 in 0..shape[1] {
                for i2 in 0..shape[2] {
                    let idx = [i0, i1, i2];
                    let rel = [
                        i0 as i64 - origin[0],
                        i1 as i64 - origin[1],
                        i2 as i64 - origin[2],
                    ];
                    let inside = match kind {
                        DomainKind::HalfRect => true,
                        DomainKind::HalfBall | DomainKind::FullBall => {
                            rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2] <= r2
                        }
                    };
                    if inside {
                        let flat = (i0 * shape[1] + i1) * shape[2] + i2;
                        active[flat] = true;
                        nodes.push(idx);
                    }
                }
            }
        }

        let mut interior = vec![false; volume];
        for &idx in &nodes {
            let flat = (idx[0] * shape[1] + idx[1]) * shape[2] + idx[2];
            let mut inner = true;
            'axes: for axis in 0..n {
                for dir in [-1i64, 1] {
                    let j = idx[axis] as i64 + dir;
                    if j < 0 || j as usize >= shape[axis] {
                        inner = false;
                        break 'axes;
                    }
                    let mut nb = idx;
                    nb[axis] = j as usize;
                    let nb_flat = (nb[0] * shape[1] + nb[1]) * shape[2] + nb[2];
                    if !active[nb_flat] {
                        inner = false;
                        break 'axes;
                    }
                }
            }
            interior[flat] = inner;
        }

        Ok(Grid {
            n,
            subdiv,
            kind,
            shape,
            origin,
            data: Arc::new(GridData {
                active,
                interior,
                nodes,
            }),
        })
    }

    pub fn half_ball(n: usize, subdiv: u32) -> Result<Grid> {
        Grid::new(n, subdiv, DomainKind::HalfBall)
    }

    pub fn full_ball(n: usize, subdiv: u32) -> Result<Grid> {
        Grid::new(n, subdiv, DomainKind::FullBall)
    }

    pub fn half_rect(n: usize, subdiv: u32) -> Result<Grid> {
        Grid::new(n, subdiv, DomainKind::HalfRect)
    }

    /// Grid from a spacing value; `1/h` must be an integer count within 1e-9.
    pub fn from_spacing(n: usize, h: f64, kind: DomainKind) -> Result<Grid> {
        if !(h > 0.0) {
            return Err(FbError::InvalidArgument(format!("spacing must be positive, got {h}")));
        }
        let inv = 1.0 / h;
        let subdiv = inv.round();
        if (inv - subdiv).abs() > 1e-9 * inv.max(1.0) || subdiv < 2.0 {
            return Err(FbError::InvalidArgument(format!(
                "spacing {h} is not of the form 1/N for integer N >= 2"
            )));
        }
        Grid::new(n, subdiv as u32, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn subdiv(&self) -> u32 {
        self.subdiv
    }

    pub fn h(&self) -> f64 {
        1.0 / self.subdiv as f64
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn origin(&self) -> [i64; 3] {
        self.origin
    }

    pub fn num_cells(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    #[inline]
    pub fn flat(&self, idx: NodeIdx) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    /// Integer offsets of a node from the origin node.
    #[inline]
    pub fn rel(&self, idx: NodeIdx) -> [i64; 3] {
        [
            idx[0] as i64 - self.origin[0],
            idx[1] as i64 - self.origin[1],
            idx[2] as i64 - self.origin[2],
        ]
    }

    /// Node coordinates, computed from integers every time.
    #[inline]
    pub fn coords(&self, idx: NodeIdx) -> [f64; 3] {
        let h = self.h();
        let rel = self.rel(idx);
        [rel[0] as f64 * h, rel[1] as f64 * h, rel[2] as f64 * h]
    }

    #[inline]
    pub fn in_box(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|k| idx[k] >= 0 && (idx[k] as usize) < self.shape[k])
    }

    #[inline]
    pub fn is_active(&self, idx: NodeIdx) -> bool {
        self.data.active[self.flat(idx)]
    }

    #[inline]
    pub fn is_interior(&self, idx: NodeIdx) -> bool {
        self.data.interior[self.flat(idx)]
    }

    /// Active node whose first coordinate is exactly zero (the flat boundary).
    #[inline]
    pub fn on_pi(&self, idx: NodeIdx) -> bool {
        idx[0] as i64 == self.origin[0]
    }

    pub fn active_count(&self) -> usize {
        self.data.nodes.len()
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.data.nodes.iter().copied()
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.data
            .nodes
            .iter()
            .copied()
            .filter(move |&idx| self.is_interior(idx))
    }

    /// Axis neighbor (`dir` is -1 or +1); `None` outside the box or inactive.
    #[inline]
    pub fn neighbor(&self, idx: NodeIdx, axis: usize, dir: i64) -> Option<NodeIdx> {
        let j = idx[axis] as i64 + dir;
        if j < 0 || j as usize >= self.shape[axis] {
            return None;
        }
        let mut nb = idx;
        nb[axis] = j as usize;
        if self.data.active[self.flat(nb)] {
            Some(nb)
        } else {
            None
        }
    }

    /// Nearest node to a point; `None` when the rounded index leaves the box
    /// or lands on an inactive node.
    pub fn nearest_node(&self, x: &[f64]) -> Option<NodeIdx> {
        let h = self.h();
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let xk = if k < self.n { x[k] } else { 0.0 };
            let j = (xk / h).round() as i64 + self.origin[k];
            if j < 0 || j as usize >= self.shape[k] {
                return None;
            }
            idx[k] = j as usize;
        }
        if self.is_active(idx) {
            Some(idx)
        } else {
            None
        }
    }

    /// Iterate active nodes inside the closed ball `|x - center| <= r`,
    /// restricted to the bounding box of the ball.
    pub fn nodes_in_ball<'a>(
        &'a self,
        center: &'a [f64],
        r: f64,
    ) -> impl Iterator<Item = NodeIdx> + 'a {
        let h = self.h();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for k in 0..3 {
            let ck = if k < self.n { center[k] } else { 0.0 };
            let l = ((ck - r) / h).floor() as i64 + self.origin[k];
            let u = ((ck + r) / h).ceil() as i64 + self.origin[k];
            lo[k] = l.clamp(0, self.shape[k] as i64 - 1) as usize;
            hi[k] = u.clamp(0, self.shape[k] as i64 - 1) as usize;
        }
        let r2 = r * r;
        let n = self.n;
        (lo[0]..=hi[0]).flat_map(move |i0| {
            (lo[1]..=hi[1]).flat_map(move |i1| {
                (lo[2]..=hi[2]).filter_map(move |i2| {
                    let idx = [i0, i1, i2];
                    if !self.is_active(idx) {
                        return None;
                    }
                    let x = self.coords(idx);
                    let mut d2 = 0.0;
                    for k in 0..n {
                        let ck = if k < center.len() { center[k] } else { 0.0 };
                        d2 += (x[k] - ck) * (x[k] - ck);
                    }
                    if d2 <= r2 {
                        Some(idx)
                    } else {
                        None
                    }
                })
            })
        })
    }

    /// Distance from a point to the domain boundary, measured exactly for the
    /// ball kinds (`1 - |x|`, and `x_1` for half domains) and for the box.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let norm: f64 = (0..self.n).map(|k| x[k] * x[k]).sum::<f64>().sqrt();
        match self.kind {
            DomainKind::FullBall => 1.0 - norm,
            DomainKind::HalfBall => (1.0 - norm).min(x[0]),
            DomainKind::HalfRect => {
                let mut d = (1.0 - x[0]).min(x[0]);
                for k in 1..self.n {
                    d = d.min(1.0 - x[k].abs());
                }
                d
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_ball_contains_origin_and_pi_layer() {
        let g = Grid::half_ball(2, 16).unwrap();
        assert!(g.is_active([0, 16, 0]));
        assert_eq!(g.coords([0, 16, 0]), [0.0, 0.0, 0.0]);
        // flat boundary is exactly the x1 = 0 node layer
        for idx in g.active_nodes().filter(|&i| g.on_pi(i)) {
            assert_eq!(g.coords(idx)[0], 0.0);
        }
        // all active nodes satisfy |x| <= 1 and x1 >= 0
        for idx in g.active_nodes() {
            let x = g.coords(idx);
            assert!(x[0] >= 0.0);
            assert!(x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn coordinate_round_trip_is_identity() {
        for grid in [
            Grid::half_ball(2, 12).unwrap(),
            Grid::full_ball(2, 12).unwrap(),
            Grid::half_rect(2, 12).unwrap(),
            Grid::half_ball(3, 6).unwrap(),
        ] {
            for idx in grid.active_nodes() {
                let x = grid.coords(idx);
                assert_eq!(grid.nearest_node(&x), Some(idx));
            }
        }
    }

    #[test]
    fn interior_nodes_have_all_neighbors() {
        let g = Grid::half_ball(2, 16).unwrap();
        for idx in g.interior_nodes() {
            for axis in 0..2 {
                for dir in [-1, 1] {
                    assert!(g.neighbor(idx, axis, dir).is_some());
                }
            }
        }
        // Pi-layer nodes are never interior
        assert!(!g.is_interior([0, 16, 0]));
    }

    #[test]
    fn from_spacing_rejects_non_reciprocal() {
        assert!(Grid::from_spacing(2, 1.0 / 64.0, DomainKind::HalfBall).is_ok());
        assert!(Grid::from_spacing(2, 0.013, DomainKind::HalfBall).is_err());
        assert!(Grid::from_spacing(2, -0.1, DomainKind::HalfBall).is_err());
    }

    #[test]
    fn ball_iteration_matches_closed_ball() {
        let g = Grid::full_ball(2, 10).unwrap();
        let pts: Vec<_> = g.nodes_in_ball(&[0.0, 0.0], 0.5).collect();
        for idx in &pts {
            let x = g.coords(*idx);
            assert!(x[0] * x[0] + x[1] * x[1] <= 0.25 + 1e-15);
        }
        // node exactly on the sphere of radius 0.5 is included
        assert!(pts.contains(&[15, 10, 0]));
    }
}
