//! Domain decomposition: each `m x m` window's interior is reduced onto its
//! outer and inner rings, the rings are solved globally, and the eliminated
//! points are recovered window by window.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::counts;
use crate::error::{Error, Result};
use crate::fdm::{LocalSolver, Problem, StencilField, SubdomainWindow};
use crate::field::{GridSpec, TemperatureField};
use crate::linear::{solve_sparse, RowKind, SparseSystem};
use crate::metrics::{Phase, PhaseTimes};

/// Square windows of side `m` tiling the lattice, adjacent windows sharing a grid line.
#[derive(Debug, Clone)]
pub struct DdmPartition {
    m: usize,
    per_side: usize,
    nodes_per_side: usize,
    windows: Vec<SubdomainWindow>,
}

pub fn partition(grid: &GridSpec, m: usize) -> Result<DdmPartition> {
    let intervals = grid.nodes_per_side() - 1;
    let count = counts::ddm_windows(intervals, m)?;
    let per_side = intervals / m;
    let mut windows = Vec::with_capacity(count);
    for wy in 0..per_side {
        for wx in 0..per_side {
            windows.push(SubdomainWindow::square((wx * m, wy * m), m)?);
        }
    }
    Ok(DdmPartition { m, per_side, nodes_per_side: grid.nodes_per_side(), windows })
}

impl DdmPartition {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domains_per_side(&self) -> usize {
        self.per_side
    }

    pub fn windows(&self) -> &[SubdomainWindow] {
        &self.windows
    }

    /// Node lies on a partition line (the domain boundary included).
    pub fn is_line_node(&self, i: usize, j: usize) -> bool {
        i % self.m == 0 || j % self.m == 0
    }

    /// Node is one step inside a window boundary.
    pub fn is_inner_node(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i % self.m, j % self.m);
        !self.is_line_node(i, j) && (a == 1 || a == self.m - 1 || b == 1 || b == self.m - 1)
    }

    /// Unknowns of the reduced system: partition lines plus inner rings.
    pub fn reduced_count(&self) -> usize {
        let n = self.nodes_per_side;
        (0..n * n).filter(|k| self.is_line_node(k % n, k / n) || self.is_inner_node(k % n, k / n)).count()
    }
}

/// Window boundary without its four corners, in perimeter order.
pub fn outer_nodes(window: &SubdomainWindow) -> Vec<(usize, usize)> {
    let (x0, y0) = window.origin;
    let (x1, y1) = window.end();
    window.perimeter().into_iter().filter(|&(i, j)| !((i == x0 || i == x1) && (j == y0 || j == y1))).collect()
}

/// The ring one step inside the window boundary, corners included.
pub fn inner_nodes(window: &SubdomainWindow) -> Result<Vec<(usize, usize)>> {
    if window.extent.0 < 3 || window.extent.1 < 3 {
        return Err(Error::DegenerateDomain(format!("window {window:?} has no inner ring")));
    }
    let (x0, y0) = (window.origin.0 + 1, window.origin.1 + 1);
    let (x1, y1) = (window.end().0 - 1, window.end().1 - 1);
    let mut p = Vec::with_capacity(2 * (x1 - x0 + y1 - y0));
    p.extend((x0..x1).map(|i| (i, y0)));
    p.extend((y0..y1).map(|j| (x1, j)));
    p.extend((x0 + 1..=x1).rev().map(|i| (i, y1)));
    p.extend((y0 + 1..=y1).rev().map(|j| (x0, j)));
    Ok(p)
}

/// Inner-ring temperatures as a linear map of the outer ring.
#[derive(Debug, Clone)]
pub struct DdmOperator {
    pub window: SubdomainWindow,
    pub outer: Vec<(usize, usize)>,
    pub inner: Vec<(usize, usize)>,
    /// `inner.len() x outer.len()`.
    pub a: DMatrix<f64>,
    solver: LocalSolver,
}

impl DdmOperator {
    /// Largest deviation of a row sum of `a` from one.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.a.nrows()).map(|r| (self.a.row(r).sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn solver(&self) -> &LocalSolver {
        &self.solver
    }
}

/// One window solve per outer node with a unit value there and zero elsewhere
/// on the boundary (corners included); the inner-ring values form one column.
pub fn local_reduce(stencil: &StencilField, window: SubdomainWindow) -> Result<DdmOperator> {
    if window.extent.0 < 3 || window.extent.1 < 3 {
        return Err(Error::DegenerateDomain(format!("window {window:?} is too small to reduce (need side >= 3)")));
    }
    let outer = outer_nodes(&window);
    let inner = inner_nodes(&window)?;
    let solver = LocalSolver::new(stencil, window)?;
    let inner_local: Vec<usize> = inner.iter().map(|&(i, j)| window.local_index(i, j)).collect();
    let mut a = DMatrix::zeros(inner.len(), outer.len());
    let mut values = vec![0.0; window.node_count()];
    for (col, &(i, j)) in outer.iter().enumerate() {
        values.iter_mut().for_each(|v| *v = 0.0);
        values[window.local_index(i, j)] = 1.0;
        solver.solve_in_place(&mut values);
        for (row, &k) in inner_local.iter().enumerate() {
            a[(row, col)] = values[k];
        }
    }
    Ok(DdmOperator { window, outer, inner, a, solver })
}

/// Reduced system over partition lines and inner rings. Unknowns are numbered
/// in row-major node order; returns the system and the node of each unknown.
pub fn assemble_global_ddm(
    problem: &Problem,
    part: &DdmPartition,
    operators: &[DdmOperator],
) -> Result<(SparseSystem, Vec<usize>)> {
    if operators.len() != part.windows.len() {
        return Err(Error::IncompleteAssembly(format!(
            "{} operators for {} windows",
            operators.len(),
            part.windows.len()
        )));
    }
    let n = problem.n();
    let mut index = vec![usize::MAX; n * n];
    let mut nodes = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if part.is_line_node(i, j) || part.is_inner_node(i, j) {
                index[j * n + i] = nodes.len();
                nodes.push(j * n + i);
            }
        }
    }
    let mut sys = SparseSystem::new(nodes.len());
    for j in 0..n {
        for i in 0..n {
            if !part.is_line_node(i, j) {
                continue;
            }
            let row = index[j * n + i];
            if problem.is_boundary(i, j) {
                sys.set_dirichlet(row, problem.bc().value(i, j));
                continue;
            }
            sys.set_kind(row, RowKind::Stencil);
            sys.add(row, row, 1.0);
            let s = problem.stencil().at(i, j);
            for ((ni, nj), w) in [((i + 1, j), s.east), ((i - 1, j), s.west), ((i, j + 1), s.north), ((i, j - 1), s.south)] {
                let col = index[nj * n + ni];
                if col == usize::MAX {
                    return Err(Error::IncompleteAssembly(format!("stencil at ({i}, {j}) reaches eliminated node ({ni}, {nj})")));
                }
                sys.add(row, col, -w);
            }
        }
    }
    for op in operators {
        for (r, &(i, j)) in op.inner.iter().enumerate() {
            let row = index[j * n + i];
            sys.set_kind(row, RowKind::Reduction);
            sys.add(row, row, 1.0);
            for (c, &(oi, oj)) in op.outer.iter().enumerate() {
                sys.add(row, index[oj * n + oi], -op.a[(r, c)]);
            }
        }
    }
    sys.finalize();
    sys.check_rows()?;
    Ok((sys, nodes))
}

/// Full field from the reduced solution: each window's eliminated points come
/// from a Dirichlet solve with its now-known boundary.
pub fn recover_interior(
    problem: &Problem,
    part: &DdmPartition,
    operators: &[DdmOperator],
    nodes: &[usize],
    reduced: &[f64],
) -> Result<TemperatureField> {
    let n = problem.grid().nodes_per_side();
    debug_assert_eq!(operators.len(), part.windows.len());
    let mut u = vec![f64::NAN; n * n];
    for (&node, &v) in nodes.iter().zip(reduced) {
        u[node] = v;
    }
    for op in operators {
        let w = op.window;
        if w.extent.0 <= 3 {
            continue;
        }
        let mut values = vec![0.0; w.node_count()];
        for (i, j) in w.perimeter() {
            values[w.local_index(i, j)] = u[j * n + i];
        }
        op.solver.solve_in_place(&mut values);
        for j in w.origin.1 + 2..w.end().1 - 1 {
            for i in w.origin.0 + 2..w.end().0 - 1 {
                u[j * n + i] = values[w.local_index(i, j)];
            }
        }
    }
    if let Some(k) = u.iter().position(|v| v.is_nan()) {
        return Err(Error::Coverage(format!("node ({}, {}) was not recovered", k % n, k / n)));
    }
    TemperatureField::new(*problem.grid(), u)
}

#[derive(Debug, Clone)]
pub struct DdmRun {
    pub partition: DdmPartition,
    pub operators: Vec<DdmOperator>,
    pub field: TemperatureField,
    pub times: PhaseTimes,
    /// Windows reduced (one factorization each).
    pub local_solves: usize,
    pub unknowns: usize,
    pub bandwidth: usize,
}

impl DdmRun {
    pub fn row_sum_defect(&self) -> f64 {
        self.operators.iter().map(DdmOperator::row_sum_defect).fold(0.0, f64::max)
    }
}

pub fn run_ddm(problem: &Problem, m: usize, parallel: bool) -> Result<DdmRun> {
    let part = partition(problem.grid(), m)?;
    let mut times = PhaseTimes::default();
    let operators = times.run(Phase::Local, || -> Result<Vec<DdmOperator>> {
        if parallel {
            part.windows.par_iter().map(|&w| local_reduce(problem.stencil(), w)).collect()
        } else {
            part.windows.iter().map(|&w| local_reduce(problem.stencil(), w)).collect()
        }
    })?;
    let (sys, nodes, reduced) = times.run(Phase::Global, || -> Result<_> {
        let (sys, nodes) = assemble_global_ddm(problem, &part, &operators)?;
        let x = solve_sparse(&sys)?;
        Ok((sys, nodes, x))
    })?;
    let field = times.run(Phase::Recovery, || recover_interior(problem, &part, &operators, &nodes, &reduced))?;
    Ok(DdmRun {
        local_solves: operators.len(),
        unknowns: sys.n(),
        bandwidth: sys.couplings(),
        partition: part,
        operators,
        field,
        times,
    })
}
