//! Region decomposition by gradient threshold: growth region, coincidence
//! set, free boundary, and contact points on the flat boundary.

use std::fmt::Write as _;

use crate::error::Result;
use crate::field::{gradient, ScalarField};
use crate::grid::{Grid, NodeIdx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// `|grad u| > eps_g`
    Omega,
    /// `|grad u| <= eps_g`, not adjacent to Omega
    Lambda,
    /// Lambda node with at least one Omega lattice neighbor
    Gamma,
    /// Gamma node on the flat boundary x1 = 0
    GammaStar,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Omega => "OMEGA",
            RegionLabel::Lambda => "LAMBDA",
            RegionLabel::Gamma => "GAMMA",
            RegionLabel::GammaStar => "GAMMA_STAR",
        }
    }

    pub fn is_free_boundary(&self) -> bool {
        matches!(self, RegionLabel::Gamma | RegionLabel::GammaStar)
    }
}

#[derive(Debug, Clone)]
pub struct RegionDecomposition {
    grid: Grid,
    labels: Vec<RegionLabel>,
    eps_g: f64,
}

impl RegionDecomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eps_g(&self) -> f64 {
        self.eps_g
    }

    #[inline]
    pub fn label(&self, idx: NodeIdx) -> RegionLabel {
        self.labels[self.grid.flat(idx)]
    }

    /// Free-boundary nodes (Gamma and GammaStar) in lexicographic order.
    pub fn free_boundary_nodes(&self) -> Vec<NodeIdx> {
        self.grid
            .active_nodes()
            .filter(|&idx| self.label(idx).is_free_boundary())
            .collect()
    }

    pub fn contact_nodes(&self) -> Vec<NodeIdx> {
        self.grid
            .active_nodes()
            .filter(|&idx| self.label(idx) == RegionLabel::GammaStar)
            .collect()
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.grid
            .active_nodes()
            .filter(|&idx| self.label(idx) == label)
            .count()
    }

    /// Fraction of active nodes labeled as free boundary; reported (not
    /// thresholded) as the discrete stand-in for its vanishing measure.
    pub fn free_boundary_fraction(&self) -> f64 {
        self.free_boundary_nodes().len() as f64 / self.grid.active_count() as f64
    }

    /// CSV `i,j,label` (or `i,j,k,label` in 3D), active nodes only.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.grid.n() == 2 {
            out.push_str("i,j,label\n");
            for idx in self.grid.active_nodes() {
                let _ = writeln!(out, "{},{},{}", idx[0], idx[1], self.label(idx).as_str());
            }
        } else {
            out.push_str("i,j,k,label\n");
            for idx in self.grid.active_nodes() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    idx[0],
                    idx[1],
                    idx[2],
                    self.label(idx).as_str()
                );
            }
        }
        out
    }
}

/// Label every active node: Omega where the discrete gradient exceeds the
/// threshold, otherwise Lambda; Lambda nodes adjacent to Omega become Gamma,
/// and Gamma on the flat boundary becomes GammaStar.
pub fn decompose_regions(field: &ScalarField, eps_g: f64) -> Result<RegionDecomposition> {
    use crate::error::FbError;
    if !(eps_g > 0.0) {
        return Err(FbError::InvalidArgument(format!(
            "gradient threshold must be positive, got {eps_g}"
        )));
    }
    let grid = field.grid().clone();
    let grad = gradient(field)?;
    let mut labels = vec![RegionLabel::Lambda; grid.num_cells()];
    for idx in grid.active_nodes() {
        if grad.magnitude(idx) > eps_g {
            labels[grid.flat(idx)] = RegionLabel::Omega;
        }
    }
    let omega = labels.clone();
    for idx in grid.active_nodes() {
        let flat = grid.flat(idx);
        if omega[flat] == RegionLabel::Omega {
            continue;
        }
        // mask poles (no neighbor at all along some axis) have no gradient
        // estimate; never promote them to the free boundary
        let gradient_complete = (0..grid.n()).all(|axis| {
            grid.neighbor(idx, axis, 1).is_some() || grid.neighbor(idx, axis, -1).is_some()
        });
        if !gradient_complete {
            continue;
        }
        let mut adjacent = false;
        'axes: for axis in 0..grid.n() {
            for dir in [-1i64, 1] {
                if let Some(nb) = grid.neighbor(idx, axis, dir) {
                    if omega[grid.flat(nb)] == RegionLabel::Omega {
                        adjacent = true;
                        break 'axes;
                    }
                }
            }
        }
        if adjacent {
            labels[flat] = if grid.kind().is_half() && grid.on_pi(idx) {
                RegionLabel::GammaStar
            } else {
                RegionLabel::Gamma
            };
        }
    }
    Ok(RegionDecomposition {
        grid,
        labels,
        eps_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn knot_field(grid: Grid, b: f64) -> ScalarField {
        ScalarField::from_fn(grid, move |x| {
            let d = (x[0] - b).max(0.0);
            0.5 * d * d
        })
    }

    #[test]
    fn zero_field_is_all_lambda() {
        let grid = Grid::half_ball(2, 32).unwrap();
        let u = ScalarField::zeros(grid.clone());
        let regions = decompose_regions(&u, grid.h()).unwrap();
        assert_eq!(regions.count(RegionLabel::Lambda), grid.active_count());
        assert!(regions.free_boundary_nodes().is_empty());
    }

    #[test]
    fn knot_field_gamma_hugs_the_knot() {
        let grid = Grid::half_ball(2, 64).unwrap();
        let h = grid.h();
        let u = knot_field(grid.clone(), 0.25);
        let regions = decompose_regions(&u, h).unwrap();
        let gammas = regions.free_boundary_nodes();
        assert!(!gammas.is_empty());
        for idx in &gammas {
            let x = grid.coords(*idx);
            assert!(
                (x[0] - 0.25).abs() <= h + 1e-12,
                "gamma node at {x:?} too far from the knot"
            );
        }
        assert!(regions.contact_nodes().is_empty());
    }

    #[test]
    fn labels_partition_and_invariants_hold() {
        let grid = Grid::half_ball(2, 48).unwrap();
        let h = grid.h();
        let u = knot_field(grid.clone(), 0.3);
        let regions = decompose_regions(&u, h).unwrap();
        let grad = gradient(&u).unwrap();
        let total = regions.count(RegionLabel::Omega)
            + regions.count(RegionLabel::Lambda)
            + regions.count(RegionLabel::Gamma)
            + regions.count(RegionLabel::GammaStar);
        assert_eq!(total, grid.active_count());
        for idx in grid.active_nodes() {
            if regions.label(idx).is_free_boundary() {
                assert!(grad.magnitude(idx) <= h);
                let has_omega_neighbor = (0..2).any(|axis| {
                    [-1i64, 1].iter().any(|&d| {
                        grid.neighbor(idx, axis, d)
                            .map(|nb| regions.label(nb) == RegionLabel::Omega)
                            .unwrap_or(false)
                    })
                });
                assert!(has_omega_neighbor);
            }
        }
    }

    #[test]
    fn isolated_gradient_zero_keeps_gamma_small() {
        let grid = Grid::half_ball(2, 64).unwrap();
        let h = grid.h();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.5 * x[0] * x[0] + 0.5 * x[0] * x[1]);
        let regions = decompose_regions(&u, h).unwrap();
        // gradient (x1 + 0.5 x2, 0.5 x1) vanishes only at the origin; the
        // sub-threshold blob is an O(1) patch of nodes around it
        let non_omega = grid.active_count() - regions.count(RegionLabel::Omega);
        assert!(non_omega <= 16, "expected O(1) non-Omega nodes, got {non_omega}");
        for idx in regions.free_boundary_nodes() {
            let x = grid.coords(idx);
            assert!(x[0].hypot(x[1]) <= 6.0 * h);
        }
    }

    #[test]
    fn monotone_in_threshold() {
        let grid = Grid::half_ball(2, 32).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (3.0 * x[0]).sin() * (1.0 + x[1]));
        let lo = decompose_regions(&u, 0.05).unwrap();
        let hi = decompose_regions(&u, 0.2).unwrap();
        for idx in grid.active_nodes() {
            if hi.label(idx) == RegionLabel::Omega {
                assert_eq!(lo.label(idx), RegionLabel::Omega);
            }
        }
    }
}
