//! Rectangular sub-windows of the node lattice and their Dirichlet solves.

use serde::Serialize;

use super::stencil::StencilField;
use crate::error::{invalid, Result};
use crate::linear::BandLu;

/// Window of the node lattice: nodes `origin ..= origin + extent` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SubdomainWindow {
    pub origin: (usize, usize),
    pub extent: (usize, usize),
}

impl SubdomainWindow {
    pub fn new(origin: (usize, usize), extent: (usize, usize)) -> Result<Self> {
        if extent.0 < 2 || extent.1 < 2 {
            return Err(invalid(format!("window extent {extent:?} must be at least 2 intervals per side")));
        }
        Ok(Self { origin, extent })
    }

    pub fn square(origin: (usize, usize), extent: usize) -> Result<Self> {
        Self::new(origin, (extent, extent))
    }

    pub fn width(&self) -> usize {
        self.extent.0 + 1
    }

    pub fn height(&self) -> usize {
        self.extent.1 + 1
    }

    pub fn node_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn interior_count(&self) -> usize {
        (self.extent.0 - 1) * (self.extent.1 - 1)
    }

    pub fn end(&self) -> (usize, usize) {
        (self.origin.0 + self.extent.0, self.origin.1 + self.extent.1)
    }

    pub fn fits(&self, nodes_per_side: usize) -> bool {
        let (ex, ey) = self.end();
        ex < nodes_per_side && ey < nodes_per_side
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (ex, ey) = self.end();
        i >= self.origin.0 && i <= ex && j >= self.origin.1 && j <= ey
    }

    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        let (ex, ey) = self.end();
        self.contains(i, j) && (i == self.origin.0 || i == ex || j == self.origin.1 || j == ey)
    }

    /// Row-major index of global node `(i, j)` within the window.
    pub fn local_index(&self, i: usize, j: usize) -> usize {
        (j - self.origin.1) * self.width() + (i - self.origin.0)
    }

    pub fn global_node(&self, local: usize) -> (usize, usize) {
        (self.origin.0 + local % self.width(), self.origin.1 + local / self.width())
    }

    /// Boundary nodes in counterclockwise order starting at the origin corner.
    pub fn perimeter(&self) -> Vec<(usize, usize)> {
        let (x0, y0) = self.origin;
        let (x1, y1) = self.end();
        let mut p = Vec::with_capacity(2 * (self.extent.0 + self.extent.1));
        p.extend((x0..x1).map(|i| (i, y0)));
        p.extend((y0..y1).map(|j| (x1, j)));
        p.extend((x0 + 1..=x1).rev().map(|i| (i, y1)));
        p.extend((y0 + 1..=y1).rev().map(|j| (x0, j)));
        p
    }

    /// The same window moved so its origin is at `(0, 0)`.
    pub fn at_origin(&self) -> Self {
        Self { origin: (0, 0), extent: self.extent }
    }
}

/// Temperatures on every node of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowField {
    pub window: SubdomainWindow,
    pub values: Vec<f64>,
}

impl WindowField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.window.local_index(i, j)]
    }
}

/// Factored Dirichlet problem on one window: interior unknowns in row-major
/// order, boundary nodes moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct LocalSolver {
    window: SubdomainWindow,
    lu: BandLu,
    /// (unknown, window-local boundary node, weight) couplings.
    boundary_links: Vec<(usize, usize, f64)>,
    /// Window-local node index of each unknown.
    unknown_nodes: Vec<usize>,
}

impl LocalSolver {
    pub fn new(stencil: &StencilField, window: SubdomainWindow) -> Result<Self> {
        if !window.fits(stencil.nodes_per_side()) {
            return Err(invalid(format!(
                "window {window:?} exceeds the {}-node lattice",
                stencil.nodes_per_side()
            )));
        }
        let iw = window.extent.0 - 1;
        let ih = window.extent.1 - 1;
        let n = iw * ih;
        let unknown = |i: usize, j: usize| -> Option<usize> {
            let (a, b) = (i - window.origin.0, j - window.origin.1);
            if a >= 1 && a <= iw && b >= 1 && b <= ih {
                Some((b - 1) * iw + (a - 1))
            } else {
                None
            }
        };
        let mut entries = Vec::with_capacity(5 * n);
        let mut boundary_links = Vec::new();
        let mut unknown_nodes = Vec::with_capacity(n);
        for b in 1..=ih {
            for a in 1..=iw {
                let (i, j) = (window.origin.0 + a, window.origin.1 + b);
                let row = (b - 1) * iw + (a - 1);
                unknown_nodes.push(window.local_index(i, j));
                entries.push((row, row, 1.0));
                let s = stencil.at(i, j);
                for ((ni, nj), w) in [((i + 1, j), s.east), ((i - 1, j), s.west), ((i, j + 1), s.north), ((i, j - 1), s.south)] {
                    match unknown(ni, nj) {
                        Some(col) => entries.push((row, col, -w)),
                        None => boundary_links.push((row, window.local_index(ni, nj), w)),
                    }
                }
            }
        }
        let lu = BandLu::factor(n, iw, iw, &entries)?;
        Ok(Self { window, lu, boundary_links, unknown_nodes })
    }

    pub fn window(&self) -> &SubdomainWindow {
        &self.window
    }

    /// Fills the interior of `values` (window-local, row-major) from its boundary entries.
    pub fn solve_in_place(&self, values: &mut [f64]) {
        assert_eq!(values.len(), self.window.node_count());
        let mut rhs = vec![0.0; self.unknown_nodes.len()];
        for &(row, node, w) in &self.boundary_links {
            rhs[row] += w * values[node];
        }
        self.lu.solve_in_place(&mut rhs);
        for (&node, v) in self.unknown_nodes.iter().zip(rhs) {
            values[node] = v;
        }
    }

    /// Solves with the given perimeter trace (ordering of [`SubdomainWindow::perimeter`]).
    pub fn solve_trace(&self, trace: &[f64]) -> Result<WindowField> {
        let perimeter = self.window.perimeter();
        if trace.len() != perimeter.len() {
            return Err(invalid(format!(
                "trace has {} values, window boundary has {} points",
                trace.len(),
                perimeter.len()
            )));
        }
        let mut values = vec![0.0; self.window.node_count()];
        for (&(i, j), &t) in perimeter.iter().zip(trace) {
            values[self.window.local_index(i, j)] = t;
        }
        self.solve_in_place(&mut values);
        Ok(WindowField { window: self.window, values })
    }
}

/// Dirichlet solve of one window with the given perimeter trace.
pub fn solve_subdomain(window: SubdomainWindow, stencil: &StencilField, trace: &[f64]) -> Result<WindowField> {
    let expected = window.perimeter().len();
    if trace.len() != expected {
        return Err(invalid(format!("trace has {} values, window boundary has {expected} points", trace.len())));
    }
    LocalSolver::new(stencil, window)?.solve_trace(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn perimeter_order_and_count() {
        let w = SubdomainWindow::new((1, 2), (3, 2)).unwrap();
        let p = w.perimeter();
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], (1, 2));
        assert_eq!(p[3], (4, 2));
        assert_eq!(p[5], (4, 4));
        assert_eq!(p[8], (1, 4));
        assert!(p.iter().all(|&(i, j)| w.on_boundary(i, j)));
        let mut sorted = p.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), p.len());
    }

    #[test]
    fn constant_trace_reproduced() {
        let g = GridSpec::vertex(9).unwrap();
        let s = StencilField::uniform(&g);
        let w = SubdomainWindow::square((1, 1), 6).unwrap();
        let f = solve_subdomain(w, &s, &vec![3.25; 24]).unwrap();
        assert!(f.values.iter().all(|v| (v - 3.25).abs() < 1e-13));
    }

    #[test]
    fn linear_ramp_reproduced_in_homogeneous_window() {
        let g = GridSpec::vertex(9).unwrap();
        let s = StencilField::uniform(&g);
        let w = SubdomainWindow::square((2, 1), 4).unwrap();
        let trace: Vec<f64> = w.perimeter().iter().map(|&(i, _)| 0.5 + 0.25 * i as f64).collect();
        let f = solve_subdomain(w, &s, &trace).unwrap();
        for j in 1..=5 {
            for i in 2..=6 {
                assert!((f.at(i, j) - (0.5 + 0.25 * i as f64)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn trace_length_checked() {
        let g = GridSpec::vertex(9).unwrap();
        let s = StencilField::uniform(&g);
        let w = SubdomainWindow::square((0, 0), 4).unwrap();
        assert!(solve_subdomain(w, &s, &[0.0; 15]).is_err());
        let outside = SubdomainWindow::square((6, 6), 4).unwrap();
        assert!(LocalSolver::new(&s, outside).is_err());
        assert!(SubdomainWindow::square((0, 0), 1).is_err());
    }
}
