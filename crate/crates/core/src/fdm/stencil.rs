//! Five-point flux stencil with harmonic-mean interface conductivities.
//!
//! The interface conductivity between two cells is their harmonic mean
//! `2 k_n k_c / (k_n + k_c)`. Dividing the flux balance by the common factor
//! `2 k_c / h^2` leaves neighbor weights `k_n / (k_n + k_c)`, which are then
//! normalized so the four weights sum to one. A neighbor sitting on the
//! geometric boundary half a cell away (cell layout) has flux coefficient
//! `k_c / (h/2)`, i.e. raw weight exactly 1.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::field::{ConductivityField, GridSpec, Layout};

/// Normalized neighbor weights of one unknown; `normalizer` is the raw weight sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StencilCoeffs {
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
    pub normalizer: f64,
}

impl StencilCoeffs {
    /// Builds the stencil from raw (unnormalized) neighbor weights `[E, W, N, S]`.
    pub fn from_raw(raw: [f64; 4]) -> Self {
        let k = raw.iter().sum::<f64>();
        Self { east: raw[0] / k, west: raw[1] / k, north: raw[2] / k, south: raw[3] / k, normalizer: k }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.east, self.west, self.north, self.south]
    }

    pub fn sum(&self) -> f64 {
        self.east + self.west + self.north + self.south
    }
}

/// Raw weight `k_n / (k_n + k_c)` of a neighbor.
fn raw_weight(k_nbr: f64, k_ctr: f64) -> f64 {
    k_nbr / (k_nbr + k_ctr)
}

/// Stencil from a center conductivity and its `[E, W, N, S]` neighbors.
pub fn stencil_weights(k_center: f64, neighbors: [f64; 4]) -> Result<StencilCoeffs> {
    if !(k_center > 0.0) || neighbors.iter().any(|k| !(*k > 0.0)) {
        return Err(invalid(format!("conductivities must be positive: center {k_center}, neighbors {neighbors:?}")));
    }
    Ok(StencilCoeffs::from_raw(neighbors.map(|k| raw_weight(k, k_center))))
}

/// Stencil at cell `(i, j)` of `field`, which must have all four neighbors.
pub fn stencil_at(field: &ConductivityField, i: usize, j: usize) -> Result<StencilCoeffs> {
    let n = field.n_cells();
    if i == 0 || j == 0 || i + 1 >= n || j + 1 >= n {
        return Err(invalid(format!("cell ({i}, {j}) does not have four neighbors in a {n}x{n} field")));
    }
    stencil_weights(
        field.get(i, j),
        [field.get(i + 1, j), field.get(i - 1, j), field.get(i, j + 1), field.get(i, j - 1)],
    )
}

/// Stencil weights for every interior node of a grid's lattice.
#[derive(Debug, Clone)]
pub struct StencilField {
    n: usize,
    coeffs: Vec<StencilCoeffs>,
}

impl StencilField {
    pub fn new(grid: &GridSpec, field: &ConductivityField) -> Result<Self> {
        let expected = grid.field_cells();
        if field.n_cells() != expected {
            return Err(invalid(format!(
                "{} layout with n_grid={} needs a {expected}x{expected} conductivity field, got {}x{}",
                grid.layout().as_str(),
                grid.n_grid(),
                field.n_cells(),
                field.n_cells()
            )));
        }
        let n = grid.nodes_per_side();
        let mut coeffs = vec![StencilCoeffs::default(); n * n];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let s = match grid.layout() {
                    Layout::Vertex => {
                        let kc = field.get(i, j);
                        let nb = [field.get(i + 1, j), field.get(i - 1, j), field.get(i, j + 1), field.get(i, j - 1)];
                        StencilCoeffs::from_raw(nb.map(|k| raw_weight(k, kc)))
                    }
                    Layout::Cell => {
                        // Node (i, j) is cell (i - 1, j - 1); nodes 0 and n - 1 lie on the boundary.
                        let kc = field.get(i - 1, j - 1);
                        let w = |ni: usize, nj: usize| -> f64 {
                            if ni == 0 || nj == 0 || ni == n - 1 || nj == n - 1 {
                                1.0
                            } else {
                                raw_weight(field.get(ni - 1, nj - 1), kc)
                            }
                        };
                        StencilCoeffs::from_raw([w(i + 1, j), w(i - 1, j), w(i, j + 1), w(i, j - 1)])
                    }
                };
                coeffs[j * n + i] = s;
            }
        }
        Ok(Self { n, coeffs })
    }

    /// Homogeneous field of the right size for `grid`.
    pub fn uniform(grid: &GridSpec) -> Self {
        let field = ConductivityField::uniform(grid.field_cells(), 1.0).expect("uniform field");
        Self::new(grid, &field).expect("uniform stencil")
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n
    }

    /// Stencil at interior node `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> &StencilCoeffs {
        &self.coeffs[j * self.n + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gen_random_conductivity, harmonic_mean};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_stencil_is_quarter() {
        let f = ConductivityField::uniform(5, 1.0).unwrap();
        let s = stencil_at(&f, 2, 2).unwrap();
        assert_eq!(s.as_array(), [0.25; 4]);
        let f = ConductivityField::uniform(5, 0.037).unwrap();
        assert_eq!(stencil_at(&f, 1, 3).unwrap().as_array(), [0.25; 4]);
    }

    #[test]
    fn low_conductivity_east_neighbor() {
        let mut k = vec![1.0; 9];
        k[2 * 3 + 1] = 0.01; // cell (2, 1) is east of (1, 1)
        let f = ConductivityField::new(3, k, None).unwrap();
        let s = stencil_at(&f, 1, 1).unwrap();
        let e = 0.01 / 1.01;
        let big_k = e + 1.5;
        assert_relative_eq!(s.normalizer, big_k, epsilon = 1e-15);
        assert_relative_eq!(s.east, e / big_k, epsilon = 1e-15);
        assert_relative_eq!(s.west, 0.5 / big_k, epsilon = 1e-15);
        assert_relative_eq!(s.sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn normalized_form_equals_harmonic_mean_form() {
        // Weights k_n/(k_n+k_c)/K equal H_n / sum(H) with H the harmonic means.
        let f = gen_random_conductivity(6, 0.01, 1.0, 9).unwrap();
        for i in 1..5 {
            for j in 1..5 {
                let s = stencil_at(&f, i, j).unwrap();
                let kc = f.get(i, j);
                let h = [
                    harmonic_mean(f.get(i + 1, j), kc).unwrap(),
                    harmonic_mean(f.get(i - 1, j), kc).unwrap(),
                    harmonic_mean(f.get(i, j + 1), kc).unwrap(),
                    harmonic_mean(f.get(i, j - 1), kc).unwrap(),
                ];
                let total: f64 = h.iter().sum();
                for (w, hm) in s.as_array().iter().zip(h) {
                    assert_relative_eq!(*w, hm / total, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn stencil_at_rejects_edge_cells() {
        let f = ConductivityField::uniform(4, 1.0).unwrap();
        assert!(stencil_at(&f, 0, 1).is_err());
        assert!(stencil_at(&f, 1, 3).is_err());
        assert!(stencil_weights(0.0, [1.0; 4]).is_err());
        assert!(stencil_weights(1.0, [1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn cell_layout_boundary_weight() {
        let g = GridSpec::cell(5).unwrap();
        let s = StencilField::uniform(&g);
        // corner cell: two boundary neighbors with raw weight 1, two interior with 1/2
        let c = s.at(1, 1);
        assert_relative_eq!(c.normalizer, 3.0);
        assert_relative_eq!(c.west, 1.0 / 3.0);
        assert_relative_eq!(c.east, 0.5 / 3.0);
        assert_eq!(s.at(2, 2).as_array(), [0.25; 4]);
    }

    #[test]
    fn field_size_must_match_layout() {
        let g = GridSpec::cell(9).unwrap();
        let f = ConductivityField::uniform(9, 1.0).unwrap();
        assert!(StencilField::new(&g, &f).is_err());
        let g = GridSpec::vertex(9).unwrap();
        assert!(StencilField::new(&g, &f).is_ok());
    }

    #[test]
    fn weights_sum_to_one_everywhere() {
        for g in [GridSpec::cell(12).unwrap(), GridSpec::vertex(12).unwrap()] {
            let f = gen_random_conductivity(g.field_cells(), 0.01, 1.0, 1).unwrap();
            let s = StencilField::new(&g, &f).unwrap();
            let n = g.nodes_per_side();
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let c = s.at(i, j);
                    assert!((c.sum() - 1.0).abs() < 1e-15);
                    assert!(c.as_array().iter().all(|&w| w > 0.0));
                }
            }
        }
    }
}
