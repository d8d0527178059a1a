//! Uniform partitions of `[0, T]` and node-indexed values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_i = i * h`, `i = 0..=M`, with `h = T / M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    intervals: usize,
    step: f64,
}

impl Grid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if intervals == 0 {
            return Err(Error::invalid("number of intervals must be at least 1"));
        }
        Ok(Self {
            horizon,
            intervals,
            step: horizon / intervals as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `M`; the grid has `M + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Node `t_i`. The last node is pinned to `T`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.intervals);
        if i == self.intervals {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.intervals + 1).map(move |i| self.node(i))
    }

    /// True when `other` refines `self` by an integer factor, so every node of
    /// `self` is also a node of `other`.
    pub fn refinement_factor(&self, other: &Grid) -> Option<usize> {
        if !other.intervals.is_multiple_of(self.intervals) {
            return None;
        }
        let same_horizon = (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon;
        same_horizon.then_some(other.intervals / self.intervals)
    }
}

/// Uniform grid on `[0, horizon]` with `intervals` steps.
pub fn make_grid(horizon: f64, intervals: usize) -> Result<Grid> {
    Grid::new(horizon, intervals)
}

/// Real values attached to the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid function needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericBlowup { node });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let values = grid.nodes().map(&mut f).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max over nodes of `|self - other|`; both must live on the same grid.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Restriction to the nodes of a coarser grid that `self.grid` refines.
    pub fn restrict_to(&self, coarse: &Grid) -> Result<GridFunction> {
        let factor = coarse.refinement_factor(&self.grid).ok_or_else(|| {
            Error::invalid(format!(
                "grid with M = {} is not aligned with grid with M = {}",
                coarse.intervals(),
                self.grid.intervals()
            ))
        })?;
        let values = (0..coarse.len()).map(|i| self.values[i * factor]).collect();
        GridFunction::new(*coarse, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_grid() {
        let g = make_grid(1.0, 4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.step(), 0.25);
    }

    #[test]
    fn single_interval() {
        let g = make_grid(2.0, 1).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![0.0, 2.0]);
        assert_eq!(g.step(), 2.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(make_grid(1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(0.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(-1.0, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spacing_within_one_ulp() {
        for &(t, m) in &[(1.0, 3), (0.7, 97), (3.3, 1000), (1.0, 10_000)] {
            let g = make_grid(t, m).unwrap();
            let nodes: Vec<f64> = g.nodes().collect();
            assert_eq!(nodes[0], 0.0);
            assert_eq!(*nodes.last().unwrap(), t);
            for w in nodes.windows(2) {
                let d = w[1] - w[0];
                assert!(d > 0.0);
                let ulp = f64::EPSILON * w[1].abs().max(1.0);
                assert!((d - g.step()).abs() <= 2.0 * ulp, "{d} vs {}", g.step());
            }
        }
    }

    #[test]
    fn grid_function_rejects_non_finite() {
        let g = make_grid(1.0, 2).unwrap();
        assert!(matches!(
            GridFunction::new(g, vec![0.0, f64::NAN, 1.0]),
            Err(Error::NumericBlowup { node: 1 })
        ));
        assert!(GridFunction::new(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn restriction_picks_shared_nodes() {
        let fine = make_grid(1.0, 8).unwrap();
        let coarse = make_grid(1.0, 2).unwrap();
        let f = GridFunction::from_fn(fine, |t| Ok(t * t)).unwrap();
        let r = f.restrict_to(&coarse).unwrap();
        assert_eq!(r.values(), &[0.0, 0.25, 1.0]);
        assert!(f.restrict_to(&make_grid(1.0, 3).unwrap()).is_err());
    }
}
