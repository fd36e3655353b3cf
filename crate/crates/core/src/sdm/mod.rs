//! Coarse-point lattice, local analyses, the coarse global system and
//! fine-grid interpolation.

mod local;

pub use local::{local_basis_oversampled, local_basis_plain, perimeter_interpolation, LocalBasis, LocalOperator};

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts;
use crate::error::{invalid, Error, Result};
use crate::fdm::{Problem, SubdomainWindow};
use crate::field::{GridSpec, TemperatureField};
use crate::linear::{solve_sparse, RowKind, SparseSystem};
use crate::metrics::{Phase, PhaseTimes};

/// Which lattice neighbors of a coarse point serve as its references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefPattern {
    /// All eight neighbors, counterclockwise from the lower-left one.
    #[default]
    Ring8,
    /// The four diagonal neighbors.
    Corners4,
    /// The four axial neighbors.
    EdgeMid4,
}

impl RefPattern {
    /// Offsets in units of the lattice spacing.
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            RefPattern::Ring8 => &[(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)],
            RefPattern::Corners4 => &[(-1, -1), (1, -1), (1, 1), (-1, 1)],
            RefPattern::EdgeMid4 => &[(0, -1), (1, 0), (0, 1), (-1, 0)],
        }
    }

    pub fn len(self) -> usize {
        self.offsets().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RefPattern::Ring8 => "ring8",
            RefPattern::Corners4 => "corners4",
            RefPattern::EdgeMid4 => "edgemid4",
        }
    }
}

impl FromStr for RefPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ring8" => Ok(RefPattern::Ring8),
            "corners4" => Ok(RefPattern::Corners4),
            "edgemid4" => Ok(RefPattern::EdgeMid4),
            _ => Err(invalid(format!("unknown reference pattern '{s}' (ring8, corners4, edgemid4)"))),
        }
    }
}

/// Coarse points every `r` lattice intervals, numbered `cy * per_side + cx`.
#[derive(Debug, Clone)]
pub struct CoarseLattice {
    r: usize,
    per_side: usize,
    nodes_per_side: usize,
    pattern: RefPattern,
}

pub fn build_lattice(grid: &GridSpec, r: usize, pattern: RefPattern) -> Result<CoarseLattice> {
    let intervals = grid.nodes_per_side() - 1;
    let per_side = counts::cp_per_side(intervals, r)?;
    if per_side < 3 {
        return Err(invalid(format!("coarse spacing r={r} leaves no interior coarse point on {intervals} intervals")));
    }
    Ok(CoarseLattice { r, per_side, nodes_per_side: grid.nodes_per_side(), pattern })
}

impl CoarseLattice {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    pub fn len(&self) -> usize {
        self.per_side * self.per_side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pattern(&self) -> RefPattern {
        self.pattern
    }

    pub fn id(&self, cx: usize, cy: usize) -> usize {
        cy * self.per_side + cx
    }

    pub fn lattice_coords(&self, id: usize) -> (usize, usize) {
        (id % self.per_side, id / self.per_side)
    }

    /// Grid node of a coarse point.
    pub fn node(&self, id: usize) -> (usize, usize) {
        let (cx, cy) = self.lattice_coords(id);
        (cx * self.r, cy * self.r)
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        let (cx, cy) = self.lattice_coords(id);
        cx == 0 || cy == 0 || cx == self.per_side - 1 || cy == self.per_side - 1
    }

    pub fn interior_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&id| !self.is_boundary(id))
    }

    pub fn positions(&self) -> Vec<(usize, usize)> {
        (0..self.len()).map(|id| self.node(id)).collect()
    }

    /// Reference coarse points of an interior coarse point, in pattern order.
    pub fn refs(&self, id: usize) -> Result<Vec<usize>> {
        if self.is_boundary(id) {
            return Err(invalid(format!("coarse point {id} lies on the boundary and has no references")));
        }
        let (cx, cy) = self.lattice_coords(id);
        Ok(self
            .pattern
            .offsets()
            .iter()
            .map(|&(dx, dy)| self.id((cx as i64 + dx) as usize, (cy as i64 + dy) as usize))
            .collect())
    }

    /// The `2r` window centered on a coarse point.
    pub fn plain_window(&self, id: usize) -> Result<SubdomainWindow> {
        let (x, y) = self.node(id);
        SubdomainWindow::square((x - self.r, y - self.r), 2 * self.r)
    }

    /// Whether the `4r` window centered on a coarse point lies inside the domain.
    pub fn oversampled_centered_fits(&self, id: usize) -> bool {
        let last = self.nodes_per_side - 1;
        let (x, y) = self.node(id);
        [x, y].iter().all(|&c| c >= 2 * self.r && c + 2 * self.r <= last)
    }

    /// The `4r` window around a coarse point, moved inward where it would leave the domain.
    pub fn oversampled_window(&self, id: usize) -> Result<SubdomainWindow> {
        let side = 4 * self.r;
        let last = self.nodes_per_side - 1;
        if side > last {
            return Err(invalid(format!(
                "oversampled window of {side} intervals does not fit the {last}-interval domain (need r <= {})",
                last / 4
            )));
        }
        let (x, y) = self.node(id);
        let place = |c: usize| c.saturating_sub(2 * self.r).min(last - side);
        SubdomainWindow::square((place(x), place(y)), side)
    }

    /// Index of the interior coarse point whose center is nearest to node
    /// `(i, j)`, ties going to the lower index.
    pub fn owner(&self, i: usize, j: usize) -> usize {
        let axis = |v: usize| -> usize {
            let (q, rem) = (v / self.r, v % self.r);
            let c = if 2 * rem > self.r { q + 1 } else { q };
            c.clamp(1, self.per_side - 2)
        };
        self.id(axis(i), axis(j))
    }
}

/// Boundary points of an oversampled window: the corners, then the edge
/// midpoints as well when eight are needed.
pub fn oversampling_points(window: &SubdomainWindow, count: usize) -> Result<Vec<(usize, usize)>> {
    let (x0, y0) = window.origin;
    let (x1, y1) = window.end();
    let (xm, ym) = ((x0 + x1) / 2, (y0 + y1) / 2);
    match count {
        4 => Ok(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]),
        8 => Ok(vec![(x0, y0), (xm, y0), (x1, y0), (x1, ym), (x1, y1), (xm, y1), (x0, y1), (x0, ym)]),
        _ => Err(Error::InvalidConfiguration(format!("{count} oversampling points; 4 or 8 supported"))),
    }
}

/// The coarse system `u_c - sum(a u_ref) = 0` with Dirichlet rows on the boundary.
#[derive(Debug, Clone)]
pub struct GlobalCoarseSystem {
    pub sys: SparseSystem,
}

pub fn assemble_global(problem: &Problem, lattice: &CoarseLattice, operators: &[Option<LocalOperator>]) -> Result<GlobalCoarseSystem> {
    if operators.len() != lattice.len() {
        return Err(Error::IncompleteAssembly(format!(
            "{} operator slots for {} coarse points",
            operators.len(),
            lattice.len()
        )));
    }
    let mut sys = SparseSystem::new(lattice.len());
    for id in 0..lattice.len() {
        if lattice.is_boundary(id) {
            let (i, j) = lattice.node(id);
            sys.set_dirichlet(id, problem.bc().value(i, j));
            continue;
        }
        let op = operators[id]
            .as_ref()
            .ok_or_else(|| Error::IncompleteAssembly(format!("no local operator for coarse point {id}")))?;
        sys.set_kind(id, RowKind::Stencil);
        sys.add(id, id, 1.0);
        for (&r, &a) in op.refs.iter().zip(op.al()) {
            sys.add(id, r, -a);
        }
    }
    sys.finalize();
    sys.check_rows()?;
    Ok(GlobalCoarseSystem { sys })
}

pub fn solve_global(gcs: &GlobalCoarseSystem) -> Result<Vec<f64>> {
    solve_sparse(&gcs.sys)
}

/// Fine temperatures from the coarse solution. Boundary nodes take the
/// Dirichlet data; every other node is interpolated by its owner's basis.
pub fn interpolate_fine(
    problem: &Problem,
    lattice: &CoarseLattice,
    operators: &[Option<LocalOperator>],
    ug: &[f64],
) -> Result<TemperatureField> {
    if ug.len() != lattice.len() {
        return Err(invalid(format!("coarse solution has {} values for {} coarse points", ug.len(), lattice.len())));
    }
    let n = problem.n();
    let mut u = problem.boundary_filled();
    let ref_values: Vec<Option<Vec<f64>>> =
        operators.iter().map(|op| op.as_ref().map(|op| op.refs.iter().map(|&r| ug[r]).collect())).collect();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let owner = lattice.owner(i, j);
            let op = operators[owner]
                .as_ref()
                .ok_or_else(|| Error::Coverage(format!("node ({i}, {j}) has no owning local domain")))?;
            if !op.window.contains(i, j) {
                return Err(Error::Coverage(format!("node ({i}, {j}) lies outside its owner's window {:?}", op.window)));
            }
            u[j * n + i] = op.value_at(i, j, ref_values[owner].as_deref().unwrap_or(&[]));
        }
    }
    // Coarse points carry the coarse solution itself.
    for id in lattice.interior_ids() {
        let (i, j) = lattice.node(id);
        u[j * n + i] = ug[id];
    }
    TemperatureField::new(*problem.grid(), u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdmOptions {
    pub r: usize,
    pub pattern: RefPattern,
    pub oversample: bool,
    pub edge: EdgeWindows,
    pub singular: SingularFallback,
    /// Run distinct local analyses on the rayon pool.
    pub parallel: bool,
}

impl SdmOptions {
    pub fn new(r: usize) -> Self {
        Self { r, pattern: RefPattern::Ring8, oversample: true, edge: EdgeWindows::Auto, singular: SingularFallback::Plain, parallel: false }
    }
}

/// Local analysis for coarse points whose centered oversampled window would
/// leave the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWindows {
    /// Plain analysis on the `2r` window.
    Plain,
    /// Oversampled analysis on the `4r` window moved inward.
    Shift,
    /// Shift where every window side on the domain boundary carries affine
    /// data, plain elsewhere.
    #[default]
    Auto,
}

impl FromStr for EdgeWindows {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(EdgeWindows::Plain),
            "shift" => Ok(EdgeWindows::Shift),
            "auto" => Ok(EdgeWindows::Auto),
            _ => Err(invalid(format!("unknown edge window policy '{s}' (plain, shift, auto)"))),
        }
    }
}

/// What to do when an oversampling matrix cannot be inverted.
///
/// This happens next to the domain corners with eight references: the
/// shifted window puts three references on one boundary segment between
/// two boundary points, so their rows are linearly dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularFallback {
    /// Report [`Error::OversamplingSingular`].
    Fail,
    /// Use the least-squares pseudo-inverse.
    Pinv,
    /// Redo that local analysis without oversampling.
    #[default]
    Plain,
}

impl FromStr for SingularFallback {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fail" => Ok(SingularFallback::Fail),
            "pinv" => Ok(SingularFallback::Pinv),
            "plain" => Ok(SingularFallback::Plain),
            _ => Err(invalid(format!("unknown singular fallback '{s}' (fail, pinv, plain)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdmRun {
    pub lattice: CoarseLattice,
    pub operators: Vec<Option<LocalOperator>>,
    pub coarse: Vec<f64>,
    pub field: TemperatureField,
    pub times: PhaseTimes,
    /// Local analyses actually performed after memoization.
    pub local_solves: usize,
    pub pinv_fallbacks: usize,
    pub plain_fallbacks: usize,
    pub unknowns: usize,
    pub bandwidth: usize,
}

impl SdmRun {
    /// Largest partition-of-unity defect over all distinct local bases.
    pub fn partition_defect(&self) -> f64 {
        self.operators.iter().flatten().map(|op| op.basis.partition_defect()).fold(0.0, f64::max)
    }

    /// Fine solution sampled at every coarse point, in coarse-point order.
    pub fn fine_at_cps(&self) -> Vec<f64> {
        self.lattice.positions().iter().map(|&(i, j)| self.field.at(i, j)).collect()
    }
}

/// Everything that determines a local basis, relative to the window origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct BasisKey {
    extent: (usize, usize),
    center: (usize, usize),
    refs: Vec<(usize, usize)>,
    boundary: Vec<(usize, usize)>,
    spacing: Vec<u8>,
    weights: Vec<u64>,
}

struct Job {
    window: SubdomainWindow,
    plain_window: SubdomainWindow,
    center: (usize, usize),
    refs: Vec<(usize, usize)>,
    boundary: Option<Vec<(usize, usize)>>,
}

fn spacing_classes(coords: &[f64], h: f64, from: usize, to: usize) -> impl Iterator<Item = u8> + '_ {
    (from..to).map(move |k| ((coords[k + 1] - coords[k]) / h * 2.0).round() as u8)
}

fn basis_key(problem: &Problem, coords: &[f64], job: &Job) -> BasisKey {
    let w = &job.window;
    let rel = |p: &(usize, usize)| (p.0 - w.origin.0, p.1 - w.origin.1);
    let (x1, y1) = w.end();
    let h = problem.grid().h();
    let spacing =
        spacing_classes(coords, h, w.origin.0, x1).chain(spacing_classes(coords, h, w.origin.1, y1)).collect();
    let mut weights = Vec::with_capacity(4 * w.interior_count());
    for j in w.origin.1 + 1..y1 {
        for i in w.origin.0 + 1..x1 {
            weights.extend(problem.stencil().at(i, j).as_array().map(f64::to_bits));
        }
    }
    BasisKey {
        extent: w.extent,
        center: rel(&job.center),
        refs: job.refs.iter().map(rel).collect(),
        boundary: job.boundary.iter().flatten().map(rel).collect(),
        spacing,
        weights,
    }
}

fn run_job(problem: &Problem, coords: &[f64], job: &Job, fallback: SingularFallback) -> Result<LocalBasis> {
    let plain = || local_basis_plain(problem.stencil(), coords, job.plain_window, job.center, &job.refs);
    let Some(bp) = &job.boundary else { return plain() };
    let allow_pinv = fallback == SingularFallback::Pinv;
    match local_basis_oversampled(problem.stencil(), coords, job.window, job.center, &job.refs, bp, allow_pinv) {
        Err(Error::OversamplingSingular { cond }) if fallback == SingularFallback::Plain => {
            let mut b = plain()?;
            b.d_cond = Some(cond);
            b.plain_fallback = true;
            Ok(b)
        }
        other => other,
    }
}

/// Whether the boundary data is affine along every side of `w` that lies on
/// the domain boundary.
pub fn boundary_sides_affine(problem: &Problem, coords: &[f64], w: &SubdomainWindow) -> bool {
    let last = coords.len() - 1;
    let (x0, y0) = w.origin;
    let (x1, y1) = w.end();
    let bc = problem.bc();
    let tol = 1e-12 * bc.range().max(1.0);
    let affine = |nodes: &mut dyn Iterator<Item = (usize, (usize, usize))>| {
        let pts: Vec<(f64, f64)> = nodes.map(|(t, (i, j))| (coords[t], bc.value(i, j))).collect();
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        pts.iter().all(|&(t, v)| (a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0) - v).abs() <= tol)
    };
    (x0 != 0 || affine(&mut (y0..=y1).map(|j| (j, (0, j)))))
        && (x1 != last || affine(&mut (y0..=y1).map(|j| (j, (last, j)))))
        && (y0 != 0 || affine(&mut (x0..=x1).map(|i| (i, (i, 0)))))
        && (y1 != last || affine(&mut (x0..=x1).map(|i| (i, (i, last)))))
}

/// Operators indexed by coarse point (`None` on the boundary).
#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub operators: Vec<Option<LocalOperator>>,
    /// Local analyses actually performed.
    pub distinct: usize,
    pub pinv_fallbacks: usize,
    pub plain_fallbacks: usize,
}

/// Local operators for every interior coarse point. Windows with identical
/// stencil weights and geometry share one analysis.
pub fn build_operators(problem: &Problem, lattice: &CoarseLattice, opts: &SdmOptions) -> Result<LocalOperators> {
    let coords = problem.grid().node_coords();
    let mut jobs: Vec<Job> = Vec::new();
    let mut index: HashMap<BasisKey, usize> = HashMap::new();
    let mut assignment: Vec<Option<(usize, [SubdomainWindow; 2], Vec<usize>)>> = vec![None; lattice.len()];
    for id in lattice.interior_ids() {
        let refs = lattice.refs(id)?;
        let ref_nodes: Vec<_> = refs.iter().map(|&r| lattice.node(r)).collect();
        let plain_window = lattice.plain_window(id)?;
        let oversample = opts.oversample
            && (lattice.oversampled_centered_fits(id)
                || match opts.edge {
                    EdgeWindows::Plain => false,
                    EdgeWindows::Shift => true,
                    EdgeWindows::Auto => boundary_sides_affine(problem, &coords, &lattice.oversampled_window(id)?),
                });
        let (window, boundary) = if oversample {
            let window = lattice.oversampled_window(id)?;
            (window, Some(oversampling_points(&window, refs.len())?))
        } else {
            (plain_window, None)
        };
        let job = Job { window, plain_window, center: lattice.node(id), refs: ref_nodes, boundary };
        let key = basis_key(problem, &coords, &job);
        let windows = [window, plain_window];
        let slot = *index.entry(key).or_insert_with(|| {
            jobs.push(job);
            jobs.len() - 1
        });
        assignment[id] = Some((slot, windows, refs));
    }

    let bases: Vec<Result<LocalBasis>> = if opts.parallel {
        jobs.par_iter().map(|job| run_job(problem, &coords, job, opts.singular)).collect()
    } else {
        jobs.iter().map(|job| run_job(problem, &coords, job, opts.singular)).collect()
    };
    let bases: Vec<Arc<LocalBasis>> = bases.into_iter().map(|b| b.map(Arc::new)).collect::<Result<_>>()?;
    let pinv_fallbacks = bases.iter().filter(|b| b.pinv_fallback).count();
    let plain_fallbacks = bases.iter().filter(|b| b.plain_fallback).count();

    let operators = assignment
        .into_iter()
        .enumerate()
        .map(|(id, a)| {
            a.map(|(slot, [window, plain_window], refs)| {
                let basis = Arc::clone(&bases[slot]);
                let window = if basis.plain_fallback { plain_window } else { window };
                LocalOperator { center: id, refs, window, basis }
            })
        })
        .collect();
    Ok(LocalOperators { operators, distinct: jobs.len(), pinv_fallbacks, plain_fallbacks })
}

/// Full SDM solve with local, global and recovery phases timed separately.
pub fn run_sdm(problem: &Problem, opts: &SdmOptions) -> Result<SdmRun> {
    let lattice = build_lattice(problem.grid(), opts.r, opts.pattern)?;
    let mut times = PhaseTimes::default();
    let LocalOperators { operators, distinct: local_solves, pinv_fallbacks, plain_fallbacks } =
        times.run(Phase::Local, || build_operators(problem, &lattice, opts))?;
    let (gcs, coarse) = times.run(Phase::Global, || -> Result<_> {
        let gcs = assemble_global(problem, &lattice, &operators)?;
        let coarse = solve_global(&gcs)?;
        Ok((gcs, coarse))
    })?;
    let field = times.run(Phase::Recovery, || interpolate_fine(problem, &lattice, &operators, &coarse))?;
    Ok(SdmRun {
        unknowns: gcs.sys.n(),
        bandwidth: gcs.sys.couplings(),
        lattice,
        operators,
        coarse,
        field,
        times,
        local_solves,
        pinv_fallbacks,
        plain_fallbacks,
    })
}
