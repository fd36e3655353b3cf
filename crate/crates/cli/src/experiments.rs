//! The four experiments behind `--experiment`.

use std::fs;
use std::path::{Path, PathBuf};

use sdm_core::ddm::{self, run_ddm, DdmRun};
use sdm_core::fdm::{run_direct, FdmRun, Problem};
use sdm_core::field::{gen_random_conductivity, make_bc_corners, make_bc_sine, BoundarySpec, ConductivityField, GridSpec};
use sdm_core::io::{read_field, write_field, write_temps};
use sdm_core::metrics::{loglog_slope, rmse_report, sample, timing_reports, true_field, Method, PhaseTimes, PointSet, Reference, RmseReport};
use sdm_core::sdm::{build_lattice, run_sdm, EdgeWindows, SdmOptions, SdmRun};
use sdm_core::field::TemperatureField;
use sdm_core::Error;

use crate::args::{BcSpec, Experiment};
use crate::config::{FieldSource, RunConfig};
use crate::report::{write_csv, write_json, Entry, EntryError, FieldInfo, Report, Row, Slope};
use crate::CliError;

/// Files written and per-entry failures of one invocation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: Option<Report>,
    /// Entries that failed inside a solver (as opposed to invalid spacings).
    pub solver_failures: usize,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
    match cfg.experiment {
        Experiment::GenField => gen_field(cfg),
        Experiment::Convergence => convergence(cfg),
        Experiment::Heterogeneous | Experiment::Solve => single_grid(cfg),
    }
}

fn gen_field(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let FieldSource::Random { seed, kmin, kmax } = cfg.field else {
        return Err(CliError::Config("gen-field needs a seeded source".into()));
    };
    let field = gen_random_conductivity(cfg.ncells, kmin, kmax, seed)?;
    let path = cfg.out.join("field.txt");
    write_field(&path, &field)?;
    Ok(Outcome { files: vec![path], ..Outcome::default() })
}

pub fn load_field(source: &FieldSource, grid: &GridSpec) -> Result<ConductivityField, CliError> {
    let n = grid.field_cells();
    match source {
        FieldSource::Homogeneous => Ok(ConductivityField::uniform(n, 1.0)?),
        FieldSource::Random { seed, kmin, kmax } => Ok(gen_random_conductivity(n, *kmin, *kmax, *seed)?),
        FieldSource::File { path } => {
            let f = read_field(path)?;
            if f.n_cells() != n {
                return Err(CliError::Config(format!(
                    "{} holds a {}x{} field but the {} grid with ngrid={} needs {n}x{n}",
                    path.display(),
                    f.n_cells(),
                    f.n_cells(),
                    grid.layout().as_str(),
                    grid.n_grid()
                )));
            }
            Ok(f)
        }
    }
}

pub fn make_bc(bc: &BcSpec, grid: &GridSpec) -> BoundarySpec {
    match *bc {
        BcSpec::Sine => make_bc_sine(grid),
        BcSpec::Corners { c00, c10, c01, c11 } => make_bc_corners(c00, c10, c01, c11, grid),
    }
}

/// Runs `f` `repeat` times and keeps the run with the least total CPU time.
fn best_of<R>(repeat: usize, times: impl Fn(&R) -> PhaseTimes, f: impl Fn() -> sdm_core::Result<R>) -> sdm_core::Result<R> {
    let mut best = f()?;
    for _ in 1..repeat {
        let next = f()?;
        if times(&next).total().cpu_seconds < times(&best).total().cpu_seconds {
            best = next;
        }
    }
    Ok(best)
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_) | Error::DegenerateDomain(_) | Error::InvalidConfiguration(_) | Error::InvalidField { .. }
    )
}

fn row(method: Method, variant: String, ratio: f64, unknowns: usize, bandwidth: usize, times: &PhaseTimes, local_solves: usize) -> Row {
    Row {
        method: method.as_str().into(),
        variant,
        spacing_ratio: ratio,
        n_unknowns: unknowns,
        bandwidth,
        rmse_vs_true: None,
        rmse_vs_fdm_cp: None,
        rmse_vs_fdm_full: None,
        cpu_local_s: times.local.cpu_seconds,
        cpu_global_s: times.global.cpu_seconds,
        cpu_total_s: times.total().cpu_seconds,
        n_local_solves: local_solves,
    }
}

fn entry(row: Row, spacing: f64, times: &PhaseTimes, method: Method) -> Entry {
    let local_solves = row.n_local_solves;
    Entry {
        timing: timing_reports(method, times, local_solves, row.n_unknowns, row.bandwidth),
        mean_local_cpu_s: (local_solves > 0).then(|| times.local.cpu_seconds / local_solves as f64),
        row,
        spacing,
        rmse: Vec::new(),
        partition_defect: None,
        sdm_plain_fallbacks: None,
        sdm_pinv_fallbacks: None,
        max_abs_diff_vs_fdm: None,
        field_file: None,
    }
}

fn max_abs_diff(a: &TemperatureField, b: &TemperatureField) -> f64 {
    a.nodes().iter().zip(b.nodes()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Adds an RMSE report and returns its value.
fn push_rmse(e: &mut Entry, reference: Reference, set: PointSet, a: &[f64], b: &[f64]) -> sdm_core::Result<f64> {
    let r: RmseReport = rmse_report(method_of(&e.row), e.spacing, reference, set, a, b)?;
    e.rmse.push(r.clone());
    Ok(r.rmse)
}

fn method_of(row: &Row) -> Method {
    match row.method.as_str() {
        "SDM" => Method::Sdm,
        "DDM" => Method::Ddm,
        _ => Method::Fdm,
    }
}

/// Comparison targets shared by all entries on one fine grid.
struct Targets<'a> {
    truth: Option<&'a TemperatureField>,
    fdm: Option<&'a TemperatureField>,
}

fn fdm_entry(run: &FdmRun, ratio: f64, t: &Targets) -> sdm_core::Result<Entry> {
    let grid = run.field.grid();
    let r = row(Method::Fdm, "direct".into(), ratio, run.unknowns, run.bandwidth, &run.times, 0);
    let mut e = entry(r, grid.h(), &run.times, Method::Fdm);
    if let Some(truth) = t.truth {
        e.row.rmse_vs_true = Some(push_rmse(&mut e, Reference::TrueSolution, PointSet::FullGrid, &run.field.point_values(), &truth.point_values())?);
    }
    if let Some(fdm) = t.fdm.filter(|f| f.grid() == grid) {
        e.row.rmse_vs_fdm_full = Some(push_rmse(&mut e, Reference::DirectFdm, PointSet::FullGrid, &run.field.point_values(), &fdm.point_values())?);
        e.max_abs_diff_vs_fdm = Some(max_abs_diff(&run.field, fdm));
    }
    Ok(e)
}

fn sdm_variant(cfg: &RunConfig) -> String {
    let mut v = format!("{}-{}", cfg.sdm_ref.as_str(), if cfg.oversample { "oversampled" } else { "plain" });
    if cfg.oversample {
        match cfg.sdm_edge {
            EdgeWindows::Plain => {}
            EdgeWindows::Shift => v.push_str("-shift"),
            EdgeWindows::Auto => v.push_str("-auto"),
        }
    }
    if !cfg.sequential_timing {
        v.push_str("+parallel");
    }
    v
}

fn sdm_options(cfg: &RunConfig, r: usize) -> SdmOptions {
    SdmOptions {
        pattern: cfg.sdm_ref,
        oversample: cfg.oversample,
        edge: cfg.sdm_edge,
        singular: cfg.sdm_singular,
        parallel: !cfg.sequential_timing,
        ..SdmOptions::new(r)
    }
}

fn sdm_entry(cfg: &RunConfig, run: &SdmRun, r: usize, t: &Targets) -> sdm_core::Result<Entry> {
    let h = run.field.grid().h();
    let rw = row(Method::Sdm, sdm_variant(cfg), r as f64, run.unknowns, run.bandwidth, &run.times, run.local_solves);
    let mut e = entry(rw, r as f64 * h, &run.times, Method::Sdm);
    let cps = run.lattice.positions();
    let at_cps = run.fine_at_cps();
    if let Some(truth) = t.truth {
        e.row.rmse_vs_true = Some(push_rmse(&mut e, Reference::TrueSolution, PointSet::CpPositions, &at_cps, &sample(truth, &cps))?);
        push_rmse(&mut e, Reference::TrueSolution, PointSet::FullGrid, &run.field.point_values(), &truth.point_values())?;
    }
    if let Some(fdm) = t.fdm {
        e.row.rmse_vs_fdm_cp = Some(push_rmse(&mut e, Reference::DirectFdm, PointSet::CpPositions, &at_cps, &sample(fdm, &cps))?);
        e.row.rmse_vs_fdm_full = Some(push_rmse(&mut e, Reference::DirectFdm, PointSet::FullGrid, &run.field.point_values(), &fdm.point_values())?);
        e.max_abs_diff_vs_fdm = Some(max_abs_diff(&run.field, fdm));
    }
    e.partition_defect = Some(run.partition_defect());
    e.sdm_plain_fallbacks = Some(run.plain_fallbacks);
    e.sdm_pinv_fallbacks = Some(run.pinv_fallbacks);
    Ok(e)
}

fn ddm_entry(cfg: &RunConfig, run: &DdmRun, m: usize, t: &Targets) -> sdm_core::Result<Entry> {
    let grid = *run.field.grid();
    let variant = if cfg.sequential_timing { "reduced".to_string() } else { "reduced+parallel".to_string() };
    let rw = row(Method::Ddm, variant, m as f64, run.unknowns, run.bandwidth, &run.times, run.local_solves);
    let mut e = entry(rw, m as f64 * grid.h(), &run.times, Method::Ddm);
    if let Some(truth) = t.truth {
        e.row.rmse_vs_true = Some(push_rmse(&mut e, Reference::TrueSolution, PointSet::FullGrid, &run.field.point_values(), &truth.point_values())?);
    }
    if let Some(fdm) = t.fdm {
        let n = grid.nodes_per_side();
        let reduced: Vec<(usize, usize)> = (0..n * n)
            .map(|k| (k % n, k / n))
            .filter(|&(i, j)| run.partition.is_line_node(i, j) || run.partition.is_inner_node(i, j))
            .collect();
        e.row.rmse_vs_fdm_cp = Some(push_rmse(&mut e, Reference::DirectFdm, PointSet::ReducedPoints, &sample(&run.field, &reduced), &sample(fdm, &reduced))?);
        e.row.rmse_vs_fdm_full = Some(push_rmse(&mut e, Reference::DirectFdm, PointSet::FullGrid, &run.field.point_values(), &fdm.point_values())?);
        e.max_abs_diff_vs_fdm = Some(max_abs_diff(&run.field, fdm));
    }
    e.partition_defect = Some(run.row_sum_defect());
    Ok(e)
}

/// Collects entries and failures while keeping going after a failed entry.
struct Collector {
    entries: Vec<Entry>,
    errors: Vec<EntryError>,
    solver_failures: usize,
}

impl Collector {
    fn new() -> Self {
        Collector { entries: Vec::new(), errors: Vec::new(), solver_failures: 0 }
    }

    fn fail(&mut self, method: Method, ratio: f64, e: &Error) {
        if !is_config_error(e) {
            self.solver_failures += 1;
        }
        eprintln!("{} spacing {ratio}: {e}", method.as_str());
        self.errors.push(EntryError { method: method.as_str().into(), spacing_ratio: ratio, error: e.to_string() });
    }

    fn add(&mut self, method: Method, ratio: f64, r: sdm_core::Result<Entry>) -> Option<usize> {
        match r {
            Ok(e) => {
                self.entries.push(e);
                Some(self.entries.len() - 1)
            }
            Err(e) => {
                self.fail(method, ratio, &e);
                None
            }
        }
    }
}

/// Checks every requested spacing against the fine grid before solving.
fn precheck(cfg: &RunConfig, grid: &GridSpec, c: &mut Collector) -> (Vec<usize>, Vec<usize>) {
    let mut rs = Vec::new();
    let mut ms = Vec::new();
    if cfg.methods.contains(&Method::Sdm) {
        for &r in &cfg.sdm_r {
            match build_lattice(grid, r, cfg.sdm_ref) {
                Ok(_) => rs.push(r),
                Err(e) => c.fail(Method::Sdm, r as f64, &e),
            }
        }
    }
    if cfg.methods.contains(&Method::Ddm) {
        for &m in &cfg.ddm_m {
            match ddm::partition(grid, m) {
                Ok(_) => ms.push(m),
                Err(e) => c.fail(Method::Ddm, m as f64, &e),
            }
        }
    }
    (rs, ms)
}

fn convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let fine = cfg.grid()?;
    let fine_intervals = fine.n_grid() - 1;
    let mut c = Collector::new();
    let (rs, ms) = precheck(cfg, &fine, &mut c);
    let fdm_hs: Vec<usize> = if cfg.methods.contains(&Method::Fdm) { cfg.fdm_h.clone() } else { Vec::new() };
    if rs.is_empty() && ms.is_empty() && fdm_hs.is_empty() {
        return Err(CliError::Config(format!("no runnable entries: {}", c.errors.iter().map(|e| e.error.as_str()).collect::<Vec<_>>().join("; "))));
    }

    let fine_problem = Problem::homogeneous(fine, make_bc_sine(&fine))?;
    let truth_fine = true_field(&fine);
    let reference = run_direct(&fine_problem)?;
    let t = Targets { truth: Some(&truth_fine), fdm: Some(&reference.field) };

    for &n in &fdm_hs {
        let ratio = fine_intervals as f64 / n as f64;
        let res = (|| {
            let grid = GridSpec::new(cfg.layout, n + 1)?;
            let problem = Problem::homogeneous(grid, make_bc_sine(&grid))?;
            let run = best_of(cfg.repeat, |r: &FdmRun| r.times, || run_direct(&problem))?;
            let truth = true_field(&grid);
            fdm_entry(&run, ratio, &Targets { truth: Some(&truth), fdm: t.fdm })
        })();
        c.add(Method::Fdm, ratio, res);
    }
    for &r in &rs {
        let res = best_of(cfg.repeat, |x: &SdmRun| x.times, || run_sdm(&fine_problem, &sdm_options(cfg, r))).and_then(|run| sdm_entry(cfg, &run, r, &t));
        c.add(Method::Sdm, r as f64, res);
    }
    for &m in &ms {
        let res = best_of(cfg.repeat, |x: &DdmRun| x.times, || run_ddm(&fine_problem, m, !cfg.sequential_timing)).and_then(|run| ddm_entry(cfg, &run, m, &t));
        c.add(Method::Ddm, m as f64, res);
    }

    let mut slopes = Vec::new();
    for method in [Method::Fdm, Method::Sdm, Method::Ddm] {
        let pts: Vec<(f64, f64)> = c
            .entries
            .iter()
            .filter(|e| e.row.method == method.as_str())
            .filter_map(|e| e.row.rmse_vs_true.map(|v| (e.spacing, v)))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        if let Ok(slope) = loglog_slope(&x, &y) {
            slopes.push(Slope { method: method.as_str().into(), n_points: x.len(), slope });
        }
    }

    let field = ConductivityField::uniform(fine.field_cells(), 1.0)?;
    finish(cfg, "convergence", &field, c, slopes)
}

fn single_grid(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let field = load_field(&cfg.field, &grid)?;
    let problem = Problem::new(grid, &field, make_bc(&cfg.bc, &grid))?;
    let mut c = Collector::new();
    let (rs, ms) = precheck(cfg, &grid, &mut c);
    let wants_fdm = cfg.methods.contains(&Method::Fdm);
    if rs.is_empty() && ms.is_empty() && !wants_fdm {
        return Err(CliError::Config(format!("no runnable entries: {}", c.errors.iter().map(|e| e.error.as_str()).collect::<Vec<_>>().join("; "))));
    }
    let name = if cfg.experiment == Experiment::Solve { "solve" } else { "heterogeneous" };
    let fields_dir = cfg.out.join(if cfg.experiment == Experiment::Solve { "." } else { "fields" });
    fs::create_dir_all(&fields_dir).map_err(|e| CliError::Io(format!("{}: {e}", fields_dir.display())))?;

    let reference = best_of(cfg.repeat, |r: &FdmRun| r.times, || run_direct(&problem))?;
    let truth = (problem.is_homogeneous() && cfg.bc == BcSpec::Sine).then(|| true_field(&grid));
    let t = Targets { truth: truth.as_ref(), fdm: Some(&reference.field) };
    let mut files = Vec::new();
    let mut save = |c: &mut Collector, idx: Option<usize>, fname: String, f: &TemperatureField| -> Result<(), CliError> {
        if let Some(i) = idx {
            let path = fields_dir.join(&fname);
            write_temps(&path, f)?;
            c.entries[i].field_file = Some(rel(&cfg.out, &path));
            files.push(path);
        }
        Ok(())
    };

    if wants_fdm {
        let idx = c.add(Method::Fdm, 1.0, fdm_entry(&reference, 1.0, &t));
        save(&mut c, idx, "fdm.txt".into(), &reference.field)?;
    }
    for &r in &rs {
        match best_of(cfg.repeat, |x: &SdmRun| x.times, || run_sdm(&problem, &sdm_options(cfg, r))) {
            Ok(run) => {
                let idx = c.add(Method::Sdm, r as f64, sdm_entry(cfg, &run, r, &t));
                save(&mut c, idx, format!("sdm_r{r}.txt"), &run.field)?;
            }
            Err(e) => c.fail(Method::Sdm, r as f64, &e),
        }
    }
    for &m in &ms {
        match best_of(cfg.repeat, |x: &DdmRun| x.times, || run_ddm(&problem, m, !cfg.sequential_timing)) {
            Ok(run) => {
                let idx = c.add(Method::Ddm, m as f64, ddm_entry(cfg, &run, m, &t));
                save(&mut c, idx, format!("ddm_m{m}.txt"), &run.field)?;
            }
            Err(e) => c.fail(Method::Ddm, m as f64, &e),
        }
    }
    if cfg.experiment == Experiment::Heterogeneous {
        let path = cfg.out.join("field.txt");
        write_field(&path, &field)?;
        files.push(path);
    }
    let mut out = finish(cfg, name, &field, c, Vec::new())?;
    out.files.extend(files);
    Ok(out)
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().trim_start_matches("./").to_string()
}

fn finish(cfg: &RunConfig, name: &str, field: &ConductivityField, c: Collector, slopes: Vec<Slope>) -> Result<Outcome, CliError> {
    let csv_path = cfg.out.join(format!("{name}.csv"));
    let rows: Vec<Row> = c.entries.iter().map(|e| e.row.clone()).collect();
    write_csv(&csv_path, &rows)?;
    let mut files = vec![csv_path];
    if !slopes.is_empty() {
        let path = cfg.out.join(format!("{name}_slopes.csv"));
        write_csv(&path, &slopes)?;
        files.push(path);
    }
    let report = Report {
        config: cfg.clone(),
        field: FieldInfo::new(&cfg.field, field),
        timing_mode: cfg.timing_mode(),
        entries: c.entries,
        errors: c.errors,
        slopes,
    };
    let json_path = cfg.out.join(format!("{name}.json"));
    write_json(&json_path, &report)?;
    files.push(json_path);
    Ok(Outcome { files, report: Some(report), solver_failures: c.solver_failures })
}
