//! Domain description: grid layouts, conductivity fields, Dirichlet data and
//! temperature fields on the unit square.
//!
//! All solvers work on a square *node lattice*. For the vertex-centered layout
//! the lattice is the grid itself. For the cell-centered layout it is the set of
//! cell centers plus one ring of nodes on the geometric boundary, so that the
//! Dirichlet data sits half a cell away from the outermost unknowns.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Grid points at `(i h, j h)`, boundary points carry Dirichlet data.
    Vertex,
    /// One grid point per cell at `((i - 0.5) h, (j - 0.5) h)`.
    Cell,
}

impl Layout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::Vertex => "vertex",
            Layout::Cell => "cell",
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertex" => Ok(Layout::Vertex),
            "cell" => Ok(Layout::Cell),
            other => Err(invalid(format!("unknown layout '{other}' (expected vertex|cell)"))),
        }
    }
}

/// Discretization of the unit square with `n_grid` grid lines per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    layout: Layout,
    n_grid: usize,
}

impl GridSpec {
    pub fn new(layout: Layout, n_grid: usize) -> Result<Self> {
        if n_grid < 3 {
            return Err(invalid(format!("n_grid must be at least 3, got {n_grid}")));
        }
        Ok(Self { layout, n_grid })
    }

    pub fn vertex(n_grid: usize) -> Result<Self> {
        Self::new(Layout::Vertex, n_grid)
    }

    pub fn cell(n_grid: usize) -> Result<Self> {
        Self::new(Layout::Cell, n_grid)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_grid - 1) as f64
    }

    /// Nodes per side of the solver lattice (grid points plus, for the
    /// cell layout, the boundary ring).
    pub fn nodes_per_side(&self) -> usize {
        match self.layout {
            Layout::Vertex => self.n_grid,
            Layout::Cell => self.n_grid + 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    /// Coordinate of lattice node `i` along either axis.
    pub fn node_coord(&self, i: usize) -> f64 {
        let h = self.h();
        match self.layout {
            Layout::Vertex => {
                if i == self.n_grid - 1 {
                    1.0
                } else {
                    i as f64 * h
                }
            }
            Layout::Cell => {
                if i == 0 {
                    0.0
                } else if i == self.n_grid {
                    1.0
                } else {
                    (i as f64 - 0.5) * h
                }
            }
        }
    }

    pub fn node_coords(&self) -> Vec<f64> {
        (0..self.nodes_per_side()).map(|i| self.node_coord(i)).collect()
    }

    /// Grid points per side (cell centers for the cell layout).
    pub fn points_per_side(&self) -> usize {
        match self.layout {
            Layout::Vertex => self.n_grid,
            Layout::Cell => self.n_grid - 1,
        }
    }

    pub fn point_count(&self) -> usize {
        self.points_per_side() * self.points_per_side()
    }

    /// Lattice index range that holds grid points.
    pub fn point_range(&self) -> std::ops::Range<usize> {
        match self.layout {
            Layout::Vertex => 0..self.n_grid,
            Layout::Cell => 1..self.n_grid,
        }
    }

    /// Number of unknowns of the direct finite-difference system.
    pub fn unknown_count(&self) -> usize {
        let m = self.nodes_per_side() - 2;
        m * m
    }

    /// Side length of the conductivity field this grid expects: one value
    /// per grid point for the vertex layout, one per cell otherwise.
    pub fn field_cells(&self) -> usize {
        self.points_per_side()
    }

    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        let last = self.nodes_per_side() - 1;
        i == 0 || j == 0 || i == last || j == last
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_per_side() + i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub seed: Option<u64>,
    pub k_min: f64,
    pub k_max: f64,
}

/// Piecewise-constant isotropic conductivity, `n_cells x n_cells` values.
///
/// `get(i, j)` is the cell in row `i` (x direction) and column `j` (y direction).
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    n_cells: usize,
    k: Vec<f64>,
    meta: FieldMeta,
}

impl ConductivityField {
    pub fn new(n_cells: usize, k: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if n_cells == 0 || k.len() != n_cells * n_cells {
            return Err(invalid(format!(
                "conductivity field needs {n_cells}x{n_cells} values, got {}",
                k.len()
            )));
        }
        let mut k_min = f64::INFINITY;
        let mut k_max = f64::NEG_INFINITY;
        for (idx, &v) in k.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidField { row: idx / n_cells, col: idx % n_cells, value: v });
            }
            k_min = k_min.min(v);
            k_max = k_max.max(v);
        }
        Ok(Self { n_cells, k, meta: FieldMeta { seed, k_min, k_max } })
    }

    pub fn uniform(n_cells: usize, k: f64) -> Result<Self> {
        Self::new(n_cells, vec![k; n_cells * n_cells], None)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n_cells + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.k
    }

    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    pub(crate) fn with_meta(mut self, meta: FieldMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn is_uniform(&self) -> bool {
        self.k.iter().all(|&v| v == self.k[0])
    }

    /// Multiplies every cell by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let k = self.k.iter().map(|v| v * c).collect();
        Self::new(self.n_cells, k, self.meta.seed)
    }
}

/// Independent uniform draws on `[k_min, k_max]` from a ChaCha8 stream seeded
/// with `seed`.
pub fn gen_random_conductivity(n_cells: usize, k_min: f64, k_max: f64, seed: u64) -> Result<ConductivityField> {
    if n_cells < 2 {
        return Err(invalid(format!("n_cells must be at least 2, got {n_cells}")));
    }
    if !(k_min > 0.0) || !k_min.is_finite() {
        return Err(invalid(format!("k_min must be positive, got {k_min}")));
    }
    if !(k_max >= k_min) || !k_max.is_finite() {
        return Err(invalid(format!("k_max must be finite and >= k_min, got {k_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k: Vec<f64> = if k_min == k_max {
        vec![k_min; n_cells * n_cells]
    } else {
        let dist = Uniform::new_inclusive(k_min, k_max);
        (0..n_cells * n_cells).map(|_| dist.sample(&mut rng)).collect()
    };
    let field = ConductivityField::new(n_cells, k, Some(seed))?;
    Ok(field.with_meta(FieldMeta { seed: Some(seed), k_min, k_max }))
}

/// Equivalent interface conductivity `2 k1 k2 / (k1 + k2)`.
pub fn harmonic_mean(k1: f64, k2: f64) -> Result<f64> {
    if !(k1 > 0.0) || !(k2 > 0.0) {
        return Err(invalid(format!("harmonic mean needs positive inputs, got {k1}, {k2}")));
    }
    Ok(2.0 * k1 * k2 / (k1 + k2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    TraceSampled,
    CornerInterpolated { c00: f64, c10: f64, c01: f64, c11: f64 },
}

/// Dirichlet data on the four sides, sampled at the boundary lattice nodes.
///
/// `bottom`/`top` are indexed by the x node index, `left`/`right` by the y
/// node index. At the four corners the bottom/top traces take precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    kind: BoundaryKind,
    n: usize,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl BoundarySpec {
    pub fn from_traces(grid: &GridSpec, bottom: Vec<f64>, top: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let n = grid.nodes_per_side();
        for (name, t) in [("bottom", &bottom), ("top", &top), ("left", &left), ("right", &right)] {
            if t.len() != n {
                return Err(invalid(format!("{name} trace has {} values, grid needs {n}", t.len())));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{name} trace contains non-finite values")));
            }
        }
        Ok(Self { kind: BoundaryKind::TraceSampled, n, bottom, top, left, right })
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n
    }

    /// Dirichlet value at boundary node `(i, j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        let last = self.n - 1;
        if j == 0 {
            self.bottom[i]
        } else if j == last {
            self.top[i]
        } else if i == 0 {
            self.left[j]
        } else if i == last {
            self.right[j]
        } else {
            panic!("node ({i}, {j}) is not on the boundary")
        }
    }

    pub fn min(&self) -> f64 {
        self.all().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.all().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.bottom.iter().chain(&self.top).chain(&self.left).chain(&self.right).copied()
    }
}

/// `sin(pi x)` on the top side, zero elsewhere.
pub fn make_bc_sine(grid: &GridSpec) -> BoundarySpec {
    let n = grid.nodes_per_side();
    let top = (0..n).map(|i| (std::f64::consts::PI * grid.node_coord(i)).sin()).collect();
    BoundarySpec {
        kind: BoundaryKind::TraceSampled,
        n,
        bottom: vec![0.0; n],
        top,
        left: vec![0.0; n],
        right: vec![0.0; n],
    }
}

/// Side traces linearly interpolated between the corner temperatures
/// `c00` at (0,0), `c10` at (1,0), `c01` at (0,1) and `c11` at (1,1).
pub fn make_bc_corners(c00: f64, c10: f64, c01: f64, c11: f64, grid: &GridSpec) -> BoundarySpec {
    let n = grid.nodes_per_side();
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let side = |a: f64, b: f64| -> Vec<f64> { (0..n).map(|i| lerp(a, b, grid.node_coord(i))).collect() };
    BoundarySpec {
        kind: BoundaryKind::CornerInterpolated { c00, c10, c01, c11 },
        n,
        bottom: side(c00, c10),
        top: side(c01, c11),
        left: side(c00, c01),
        right: side(c10, c11),
    }
}

/// Temperatures at every lattice node (boundary ring included).
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    grid: GridSpec,
    u: Vec<f64>,
}

impl TemperatureField {
    pub fn new(grid: GridSpec, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.node_count() {
            return Err(invalid(format!(
                "temperature field needs {} node values, got {}",
                grid.node_count(),
                u.len()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(invalid("temperature field contains non-finite values"));
        }
        Ok(Self { grid, u })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.node_index(i, j)]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.u
    }

    /// Values at the grid points in row-major order (y outer, x inner).
    pub fn point_values(&self) -> Vec<f64> {
        let r = self.grid.point_range();
        let mut out = Vec::with_capacity(self.grid.point_count());
        for j in r.clone() {
            for i in r.clone() {
                out.push(self.at(i, j));
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|u(x, y) - u(1 - x, y)|` over all nodes.
    pub fn mirror_asymmetry_x(&self) -> f64 {
        let n = self.grid.nodes_per_side();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((self.at(i, j) - self.at(n - 1 - i, j)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cell_layout_coordinates() {
        let g = GridSpec::cell(5).unwrap();
        assert_eq!(g.nodes_per_side(), 6);
        assert_eq!(g.point_count(), 16);
        assert_eq!(g.unknown_count(), 16);
        assert_eq!(g.node_coord(0), 0.0);
        assert_relative_eq!(g.node_coord(1), 0.125);
        assert_relative_eq!(g.node_coord(4), 0.875);
        assert_eq!(g.node_coord(5), 1.0);
    }

    #[test]
    fn vertex_layout_coordinates() {
        let g = GridSpec::vertex(9).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.point_count(), 81);
        assert_eq!(g.unknown_count(), 49);
        assert_eq!(g.node_coord(8), 1.0);
        assert!(GridSpec::vertex(2).is_err());
    }

    #[test]
    fn random_field_bounds() {
        let f = gen_random_conductivity(997, 0.01, 1.0, 7).unwrap();
        assert!(f.values().iter().all(|&k| (0.01..=1.0).contains(&k)));
        assert!(f.meta().k_max / f.meta().k_min <= 100.0);
        assert_eq!(f.meta().seed, Some(7));
    }

    #[test]
    fn degenerate_interval_is_constant() {
        let f = gen_random_conductivity(4, 1.0, 1.0, 0).unwrap();
        assert!(f.values().iter().all(|&k| k == 1.0));
    }

    #[test]
    fn random_field_mean_converges() {
        let f = gen_random_conductivity(512, 0.01, 1.0, 42).unwrap();
        let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
        assert!((mean - 0.505).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn random_field_is_reproducible() {
        let a = gen_random_conductivity(16, 0.01, 1.0, 3).unwrap();
        let b = gen_random_conductivity(16, 0.01, 1.0, 3).unwrap();
        assert_eq!(a, b);
        let c = gen_random_conductivity(16, 0.01, 1.0, 4).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn random_field_rejects_bad_bounds() {
        assert!(matches!(gen_random_conductivity(8, 0.0, 1.0, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(gen_random_conductivity(8, -1.0, 1.0, 0), Err(Error::InvalidParameter(_))));
        assert!(gen_random_conductivity(8, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn field_rejects_nonpositive_cell() {
        let mut k = vec![1.0; 9];
        k[5] = 0.0;
        match ConductivityField::new(3, k, None) {
            Err(Error::InvalidField { row, col, .. }) => assert_eq!((row, col), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sine_bc_samples() {
        let g = GridSpec::vertex(9).unwrap();
        let bc = make_bc_sine(&g);
        assert_relative_eq!(bc.top[4], 1.0);
        assert_eq!(bc.top[0], 0.0);
        assert_relative_eq!(bc.top[2], 0.70710678, epsilon = 1e-8);
        assert!(bc.bottom.iter().chain(&bc.left).chain(&bc.right).all(|&v| v == 0.0));
    }

    #[test]
    fn corner_bc_traces() {
        let g = GridSpec::vertex(9).unwrap();
        let zero = make_bc_corners(0.0, 0.0, 0.0, 0.0, &g);
        assert_eq!(zero.max(), 0.0);
        assert_eq!(zero.min(), 0.0);

        let bc = make_bc_corners(0.0, 1.0, 0.0, 1.0, &g);
        assert_eq!(bc.bottom[4], 0.5);
        assert_eq!(bc.min(), 0.0);
        assert_eq!(bc.max(), 1.0);
        for t in [&bc.bottom, &bc.top, &bc.left, &bc.right] {
            for w in t.windows(3) {
                assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn corner_bc_linear_on_cell_layout() {
        let g = GridSpec::cell(9).unwrap();
        let bc = make_bc_corners(0.2, 1.0, -0.4, 0.6, &g);
        let x = g.node_coords();
        for t in [&bc.bottom, &bc.top, &bc.left, &bc.right] {
            for i in 1..x.len() - 1 {
                let s0 = (t[i] - t[i - 1]) / (x[i] - x[i - 1]);
                let s1 = (t[i + 1] - t[i]) / (x[i + 1] - x[i]);
                assert!((s0 - s1).abs() < 1e-12);
            }
        }
        assert_eq!(bc.value(0, 0), 0.2);
        assert_eq!(bc.value(9, 9), 0.6);
    }

    #[test]
    fn harmonic_mean_values() {
        assert_eq!(harmonic_mean(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(harmonic_mean(0.37, 0.37).unwrap(), 0.37);
        assert_relative_eq!(harmonic_mean(0.01, 1.0).unwrap(), 0.019801980198019802, epsilon = 1e-16);
        assert!(harmonic_mean(0.0, 1.0).is_err());
        assert!(harmonic_mean(1.0, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_mean_symmetric_and_bounded(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let ab = harmonic_mean(a, b).unwrap();
            prop_assert_eq!(ab, harmonic_mean(b, a).unwrap());
            prop_assert!(ab >= a.min(b) * (1.0 - 1e-15));
            prop_assert!(ab <= a.max(b) * (1.0 + 1e-15));
        }
    }
}
