use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// Uniform grid over a box; counts which cells have been visited.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    bounds: Vec<(f64, f64)>,
    resolution: usize,
    visited: Vec<bool>,
    count: usize,
}

impl CoverageGrid {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::config("coverage resolution must be at least 1"));
        }
        if bounds.is_empty() || bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::config("coverage bounds must be non-empty finite intervals"));
        }
        let total = resolution
            .checked_pow(bounds.len() as u32)
            .filter(|&t| t <= 1 << 26)
            .ok_or_else(|| Error::config("coverage grid too large"))?;
        Ok(CoverageGrid {
            bounds,
            resolution,
            visited: vec![false; total],
            count: 0,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn total_cells(&self) -> usize {
        self.visited.len()
    }

    pub fn visited_count(&self) -> usize {
        self.count
    }

    /// Flat cell index; out-of-bound coordinates land in the edge cell.
    pub fn cell_of(&self, state: &[f64]) -> Result<usize> {
        check_dim("coverage state", self.bounds.len(), state.len())?;
        let g = self.resolution;
        let mut idx = 0;
        for (&x, &(lo, hi)) in state.iter().zip(&self.bounds) {
            let frac = (x - lo) / (hi - lo);
            let c = if frac.is_nan() {
                0
            } else {
                ((frac * g as f64).floor().max(0.0) as usize).min(g - 1)
            };
            idx = idx * g + c;
        }
        Ok(idx)
    }

    pub fn record_visit(&mut self, state: &[f64]) -> Result<()> {
        let c = self.cell_of(state)?;
        if !self.visited[c] {
            self.visited[c] = true;
            self.count += 1;
        }
        Ok(())
    }

    /// Fraction of cells visited, in `[0, 1]`.
    pub fn coverage(&self) -> f64 {
        self.count as f64 / self.visited.len() as f64
    }

    pub fn is_visited(&self, cell: usize) -> bool {
        self.visited[cell]
    }

    /// Center of a flat cell index, for tests and plotting.
    pub fn cell_center(&self, mut cell: usize) -> Vec<f64> {
        let g = self.resolution;
        let mut out = vec![0.0; self.bounds.len()];
        for d in (0..self.bounds.len()).rev() {
            let c = cell % g;
            cell /= g;
            let (lo, hi) = self.bounds[d];
            out[d] = lo + (c as f64 + 0.5) * (hi - lo) / g as f64;
        }
        out
    }

    fn same_geometry(&self, other: &CoverageGrid) -> bool {
        self.resolution == other.resolution && self.bounds == other.bounds
    }

    /// Cell-wise union.
    pub fn merge(&mut self, other: &CoverageGrid) -> Result<()> {
        if !self.same_geometry(other) {
            return Err(Error::config("cannot merge grids of different geometry"));
        }
        for (a, &b) in self.visited.iter_mut().zip(&other.visited) {
            if b && !*a {
                *a = true;
                self.count += 1;
            }
        }
        Ok(())
    }
}

/// How differently the styles explored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleDivergence {
    /// Cells visited by style `j` and by no other style.
    pub unique_cells: Vec<usize>,
    /// Pairwise Jaccard overlap of visited sets; two empty sets count as 1.
    pub jaccard: Vec<Vec<f64>>,
    /// Cells visited by any style.
    pub union_cells: usize,
}

pub fn style_divergence(grids: &[CoverageGrid]) -> Result<StyleDivergence> {
    if grids.len() < 2 {
        return Err(Error::config("style divergence needs at least two styles"));
    }
    if grids.iter().any(|g| !g.same_geometry(&grids[0])) {
        return Err(Error::config("style grids must share one geometry"));
    }
    let k = grids.len();
    let cells = grids[0].total_cells();
    let mut unique = vec![0usize; k];
    let mut union = 0;
    for c in 0..cells {
        let who: Vec<usize> = (0..k).filter(|&j| grids[j].visited[c]).collect();
        if !who.is_empty() {
            union += 1;
        }
        if let [only] = who[..] {
            unique[only] += 1;
        }
    }
    let mut jaccard = vec![vec![1.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let (mut inter, mut uni) = (0usize, 0usize);
            for c in 0..cells {
                let (x, y) = (grids[a].visited[c], grids[b].visited[c]);
                inter += (x && y) as usize;
                uni += (x || y) as usize;
            }
            let j = if uni == 0 { 1.0 } else { inter as f64 / uni as f64 };
            jaccard[a][b] = j;
            jaccard[b][a] = j;
        }
    }
    Ok(StyleDivergence {
        unique_cells: unique,
        jaccard,
        union_cells: union,
    })
}
