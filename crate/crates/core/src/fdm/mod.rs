//! Direct finite-difference solve of the full grid.

mod stencil;
mod window;

pub use stencil::{stencil_at, stencil_weights, StencilCoeffs, StencilField};
pub use window::{solve_subdomain, LocalSolver, SubdomainWindow, WindowField};

use crate::error::{invalid, Result};
use crate::field::{BoundarySpec, ConductivityField, GridSpec, TemperatureField};
use crate::linear::{solve_sparse, RowKind, SparseSystem};
use crate::metrics::{Phase, PhaseTimes};

/// A grid, its stencil weights and the Dirichlet data: everything the three
/// solvers need.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: GridSpec,
    stencil: StencilField,
    bc: BoundarySpec,
    homogeneous: bool,
}

impl Problem {
    pub fn new(grid: GridSpec, field: &ConductivityField, bc: BoundarySpec) -> Result<Self> {
        let stencil = StencilField::new(&grid, field)?;
        Self::check_bc(&grid, &bc)?;
        Ok(Self { grid, stencil, bc, homogeneous: field.is_uniform() })
    }

    /// Uniform conductivity.
    pub fn homogeneous(grid: GridSpec, bc: BoundarySpec) -> Result<Self> {
        Self::check_bc(&grid, &bc)?;
        Ok(Self { grid, stencil: StencilField::uniform(&grid), bc, homogeneous: true })
    }

    fn check_bc(grid: &GridSpec, bc: &BoundarySpec) -> Result<()> {
        if bc.nodes_per_side() != grid.nodes_per_side() {
            return Err(invalid(format!(
                "boundary traces have {} points per side, grid lattice has {}",
                bc.nodes_per_side(),
                grid.nodes_per_side()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn stencil(&self) -> &StencilField {
        &self.stencil
    }

    pub fn bc(&self) -> &BoundarySpec {
        &self.bc
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn n(&self) -> usize {
        self.grid.nodes_per_side()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.grid.is_boundary_node(i, j)
    }

    /// Node values with the Dirichlet data filled in on the boundary ring and zeros inside.
    pub fn boundary_filled(&self) -> Vec<f64> {
        let n = self.n();
        let mut u = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                if self.is_boundary(i, j) {
                    u[j * n + i] = self.bc.value(i, j);
                }
            }
        }
        u
    }
}

/// One equation per interior node: `u_c - sum(w u_nbr) = 0`, with boundary
/// neighbors moved to the right-hand side. Unknowns are the interior nodes in
/// row-major order.
pub fn assemble_direct(problem: &Problem) -> SparseSystem {
    let n = problem.n();
    let m = n - 2;
    let mut sys = SparseSystem::new(m * m);
    let idx = |i: usize, j: usize| (j - 1) * m + (i - 1);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let row = idx(i, j);
            sys.add(row, row, 1.0);
            sys.set_kind(row, RowKind::Stencil);
            let s = problem.stencil().at(i, j);
            for ((ni, nj), w) in [((i + 1, j), s.east), ((i - 1, j), s.west), ((i, j + 1), s.north), ((i, j - 1), s.south)] {
                if problem.is_boundary(ni, nj) {
                    sys.add_rhs(row, w * problem.bc().value(ni, nj));
                } else {
                    sys.add(row, idx(ni, nj), -w);
                }
            }
        }
    }
    sys.finalize();
    sys
}

pub fn solve_direct(problem: &Problem) -> Result<TemperatureField> {
    let sys = assemble_direct(problem);
    let x = solve_sparse(&sys)?;
    Ok(scatter_interior(problem, &x))
}

fn scatter_interior(problem: &Problem, x: &[f64]) -> TemperatureField {
    let n = problem.n();
    let m = n - 2;
    let mut u = problem.boundary_filled();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            u[j * n + i] = x[(j - 1) * m + (i - 1)];
        }
    }
    TemperatureField::new(*problem.grid(), u).expect("interior scatter keeps dimensions")
}

#[derive(Debug, Clone)]
pub struct FdmRun {
    pub field: TemperatureField,
    pub unknowns: usize,
    pub bandwidth: usize,
    pub times: PhaseTimes,
}

/// Direct solve with the whole factorization timed as the global phase.
pub fn run_direct(problem: &Problem) -> Result<FdmRun> {
    let mut times = PhaseTimes::default();
    let (sys, x) = times.run(Phase::Global, || {
        let sys = assemble_direct(problem);
        let x = solve_sparse(&sys);
        (sys, x)
    });
    let x = x?;
    Ok(FdmRun { field: scatter_interior(problem, &x), unknowns: sys.n(), bandwidth: sys.couplings(), times })
}
