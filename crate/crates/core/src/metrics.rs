//! Exact solution, RMSE and per-phase CPU timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{GridSpec, TemperatureField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Fdm,
    Sdm,
    Ddm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fdm => "FDM",
            Method::Sdm => "SDM",
            Method::Ddm => "DDM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    TrueSolution,
    DirectFdm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointSet {
    CpPositions,
    FullGrid,
    ReducedPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub method: Method,
    pub spacing: f64,
    pub reference: Reference,
    pub point_set: PointSet,
    pub rmse: f64,
    pub n_points: usize,
}

/// Exact temperature of the unit square with `sin(pi x)` on the top side and
/// zero on the other three: `sin(pi x) sinh(pi y) / sinh(pi)`.
pub fn true_solution(x: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    (PI * x).sin() * ((PI * y).exp() - (-PI * y).exp()) / (PI.exp() - (-PI).exp())
}

/// [`true_solution`] at every lattice node of `grid`.
pub fn true_field(grid: &GridSpec) -> TemperatureField {
    let n = grid.nodes_per_side();
    let x = grid.node_coords();
    let u = (0..n * n).map(|k| true_solution(x[k % n], x[k / n])).collect();
    TemperatureField::new(*grid, u).expect("exact solution is finite")
}

/// Values of `field` at the given lattice nodes.
pub fn sample(field: &TemperatureField, nodes: &[(usize, usize)]) -> Vec<f64> {
    nodes.iter().map(|&(i, j)| field.at(i, j)).collect()
}

/// Root mean square of `a - b`.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("rmse of samples with lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(invalid("rmse of empty samples"));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

pub fn rmse_report(
    method: Method,
    spacing: f64,
    reference: Reference,
    point_set: PointSet,
    a: &[f64],
    b: &[f64],
) -> Result<RmseReport> {
    Ok(RmseReport { method, spacing, reference, point_set, rmse: rmse(a, b)?, n_points: a.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Local,
    Global,
    Recovery,
    Total,
}

/// CPU seconds consumed by the whole process so far.
pub fn process_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: clock_gettime only writes into the provided timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

impl std::ops::Add for PhaseSample {
    type Output = PhaseSample;
    fn add(self, o: PhaseSample) -> PhaseSample {
        PhaseSample { cpu_seconds: self.cpu_seconds + o.cpu_seconds, wall_seconds: self.wall_seconds + o.wall_seconds }
    }
}

/// Runs `f` and measures its process-CPU and wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, PhaseSample) {
    let c0 = process_cpu_seconds();
    let w0 = Instant::now();
    let out = f();
    let sample = PhaseSample {
        cpu_seconds: (process_cpu_seconds() - c0).max(0.0),
        wall_seconds: w0.elapsed().as_secs_f64(),
    };
    (out, sample)
}

/// Phase times of one method run. Phases are disjoint; the total is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub local: PhaseSample,
    pub global: PhaseSample,
    pub recovery: PhaseSample,
}

impl PhaseTimes {
    /// Times `f` and adds it to `phase`. Taking `&mut self` keeps phases from nesting.
    pub fn run<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let (out, s) = timed(f);
        let slot = match phase {
            Phase::Local => &mut self.local,
            Phase::Global => &mut self.global,
            Phase::Recovery => &mut self.recovery,
            Phase::Total => panic!("the total phase is derived, not timed"),
        };
        *slot = *slot + s;
        out
    }

    pub fn total(&self) -> PhaseSample {
        self.local + self.global + self.recovery
    }

    pub fn get(&self, phase: Phase) -> PhaseSample {
        match phase {
            Phase::Local => self.local,
            Phase::Global => self.global,
            Phase::Recovery => self.recovery,
            Phase::Total => self.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub method: Method,
    pub phase: Phase,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
    pub local_solve_count: usize,
    pub unknowns: usize,
    pub bandwidth: usize,
}

/// Expands phase times into one report entry per phase (Total last).
pub fn timing_reports(method: Method, times: &PhaseTimes, local_solves: usize, unknowns: usize, bandwidth: usize) -> Vec<TimingReport> {
    [Phase::Local, Phase::Global, Phase::Recovery, Phase::Total]
        .into_iter()
        .map(|phase| {
            let s = times.get(phase);
            TimingReport {
                method,
                phase,
                cpu_seconds: s.cpu_seconds,
                wall_seconds: s.wall_seconds,
                local_solve_count: local_solves,
                unknowns,
                bandwidth,
            }
        })
        .collect()
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("log-log slope needs at least two paired samples"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log slope needs positive samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn true_solution_anchors() {
        assert_relative_eq!(true_solution(0.5, 1.0), 1.0, epsilon = 1e-15);
        for x in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(true_solution(x, 0.0), 0.0);
        }
        // sinh(pi/2) / sinh(pi)
        assert_relative_eq!(true_solution(0.5, 0.5), 0.19926840766919332, epsilon = 1e-14);
    }

    #[test]
    fn true_solution_discrete_residual_is_second_order() {
        let residual = |n: usize| -> f64 {
            let h = 1.0 / n as f64;
            let mut worst = 0.0f64;
            for j in 1..n {
                for i in 1..n {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    let r = true_solution(x - h, y) + true_solution(x + h, y) + true_solution(x, y - h) + true_solution(x, y + h)
                        - 4.0 * true_solution(x, y);
                    worst = worst.max((r / (h * h)).abs());
                }
            }
            worst
        };
        let ratio = residual(16) / residual(32);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rmse_cases() {
        let a = [0.1, 0.2, -0.3];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        assert_relative_eq!(rmse(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5355339059327378, epsilon = 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn noop_timing_is_small() {
        let ((), s) = timed(|| ());
        assert!(s.cpu_seconds >= 0.0 && s.cpu_seconds < 0.1);
    }

    #[test]
    fn phases_add_up() {
        let mut t = PhaseTimes::default();
        t.run(Phase::Local, || (0..200_000).map(|i| (i as f64).sqrt()).sum::<f64>());
        t.run(Phase::Global, || (0..100_000).map(|i| (i as f64).ln_1p()).sum::<f64>());
        let total = t.get(Phase::Total);
        assert!((total.cpu_seconds - (t.local.cpu_seconds + t.global.cpu_seconds)).abs() < 1e-12);
        let reports = timing_reports(Method::Sdm, &t, 1, 10, 8);
        assert_eq!(reports.len(), 4);
        assert!(reports[3].cpu_seconds >= reports[0].cpu_seconds + reports[1].cpu_seconds - 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.125, 0.0625, 0.03125];
        let y: Vec<f64> = x.iter().map(|h| 3.0 * h * h).collect();
        assert_relative_eq!(loglog_slope(&x, &y).unwrap(), 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_triangle(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..40)) {
            let a: Vec<f64> = v.iter().map(|t| t.0).collect();
            let b: Vec<f64> = v.iter().map(|t| t.1).collect();
            let c: Vec<f64> = v.iter().map(|t| t.2).collect();
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            prop_assert!(rmse(&a, &c).unwrap() <= ab + rmse(&b, &c).unwrap() + 1e-12);
        }
    }
}
