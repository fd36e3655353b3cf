//! Fully resolved run configuration: defaults per experiment, validated
//! before any solve.

use std::path::PathBuf;

use sdm_core::field::{GridSpec, Layout};
use sdm_core::metrics::Method;
use sdm_core::sdm::{EdgeWindows, RefPattern, SingularFallback};
use serde::Serialize;

use crate::args::{Args, BcSpec, Experiment, MethodArg, OnOff};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSource {
    Homogeneous,
    File { path: PathBuf },
    Random { seed: u64, kmin: f64, kmax: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub ngrid: usize,
    pub layout: Layout,
    pub methods: Vec<Method>,
    /// Direct-FDM spacings as denominators `N` of `h = 1/N` (convergence only).
    pub fdm_h: Vec<usize>,
    pub sdm_r: Vec<usize>,
    pub sdm_ref: RefPattern,
    pub oversample: bool,
    pub sdm_edge: EdgeWindows,
    pub sdm_singular: SingularFallback,
    pub ddm_m: Vec<usize>,
    pub field: FieldSource,
    /// Field side length for gen-field.
    pub ncells: usize,
    pub bc: BcSpec,
    pub out: PathBuf,
    pub sequential_timing: bool,
    pub repeat: usize,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Fdm => Method::Fdm,
        MethodArg::Sdm => Method::Sdm,
        MethodArg::Ddm => Method::Ddm,
    }
}

impl RunConfig {
    pub fn resolve(a: Args) -> Result<RunConfig, CliError> {
        let experiment = a.experiment.ok_or_else(|| config_err("--experiment is required"))?;
        let (kmin, kmax) = (a.kmin.unwrap_or(0.01), a.kmax.unwrap_or(1.0));
        let random = |seed: u64| FieldSource::Random { seed, kmin, kmax };
        let given_source = match (&a.field, a.seed) {
            (Some(_), Some(_)) => return Err(config_err("--field and --seed are mutually exclusive")),
            (Some(p), None) => Some(FieldSource::File { path: p.clone() }),
            (None, Some(s)) => Some(random(s)),
            (None, None) => None,
        };
        let fdm_h = a.fdm_h.unwrap_or_else(|| vec![8, 16, 32, 64]);
        let (ngrid, sdm_r, ddm_m, field, bc) = match experiment {
            Experiment::Convergence => {
                if given_source.is_some() {
                    return Err(config_err("the convergence study runs on the homogeneous field; drop --field/--seed"));
                }
                if matches!(a.bc, Some(BcSpec::Corners { .. })) {
                    return Err(config_err("the convergence study uses the sine boundary condition"));
                }
                let finest = fdm_h.iter().copied().max().ok_or_else(|| config_err("--fdm-h is empty"))?;
                (a.ngrid.unwrap_or(finest + 1), a.sdm_r.unwrap_or_else(|| vec![8, 4, 2]), a.ddm_m.unwrap_or_else(|| vec![8, 4, 2]), FieldSource::Homogeneous, BcSpec::Sine)
            }
            Experiment::Heterogeneous => (
                a.ngrid.unwrap_or(97),
                a.sdm_r.unwrap_or_else(|| vec![4, 6, 12]),
                a.ddm_m.unwrap_or_else(|| vec![4, 6, 12]),
                given_source.unwrap_or_else(|| random(42)),
                a.bc.unwrap_or(BcSpec::Corners { c00: 0.0, c10: 1.0, c01: 0.0, c11: 1.0 }),
            ),
            Experiment::Solve => (
                a.ngrid.unwrap_or(65),
                a.sdm_r.unwrap_or_else(|| vec![4]),
                a.ddm_m.unwrap_or_else(|| vec![4]),
                given_source.unwrap_or(FieldSource::Homogeneous),
                a.bc.unwrap_or(BcSpec::Sine),
            ),
            Experiment::GenField => (0, vec![], vec![], given_source.unwrap_or_else(|| random(42)), BcSpec::Sine),
        };
        let methods: Vec<Method> = match a.methods {
            Some(m) => m.into_iter().map(method).collect(),
            None if experiment == Experiment::Solve => vec![Method::Fdm],
            None => vec![Method::Fdm, Method::Sdm, Method::Ddm],
        };
        let cfg = RunConfig {
            experiment,
            ngrid,
            layout: a.layout.unwrap_or(Layout::Vertex),
            methods,
            fdm_h,
            sdm_r,
            sdm_ref: a.sdm_ref.unwrap_or_default(),
            oversample: a.oversample.map_or(true, OnOff::is_on),
            sdm_edge: a.sdm_edge.unwrap_or_default(),
            sdm_singular: a.sdm_singular.unwrap_or_default(),
            ddm_m,
            field,
            ncells: a.ncells.unwrap_or(96),
            bc,
            out: a.out.unwrap_or_else(|| PathBuf::from("out")),
            sequential_timing: a.sequential_timing.map_or(true, OnOff::is_on),
            repeat: a.repeat.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.repeat == 0 {
            return Err(config_err("--repeat must be at least 1"));
        }
        if let FieldSource::Random { kmin, kmax, .. } = self.field {
            if !(kmin > 0.0 && kmin <= kmax && kmax.is_finite()) {
                return Err(config_err(format!("need 0 < kmin <= kmax, got kmin={kmin} kmax={kmax}")));
            }
        }
        match self.experiment {
            Experiment::GenField => {
                if matches!(self.field, FieldSource::File { .. }) {
                    return Err(config_err("gen-field draws a random field; use --seed, not --field"));
                }
                if self.ncells < 2 {
                    return Err(config_err("--ncells must be at least 2"));
                }
                return Ok(());
            }
            Experiment::Solve => {
                if self.methods.len() != 1 {
                    return Err(config_err("solve runs exactly one method"));
                }
                if self.methods[0] == Method::Sdm && self.sdm_r.len() != 1 {
                    return Err(config_err("solve takes exactly one --sdm-r"));
                }
                if self.methods[0] == Method::Ddm && self.ddm_m.len() != 1 {
                    return Err(config_err("solve takes exactly one --ddm-m"));
                }
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(config_err("--methods is empty"));
        }
        GridSpec::new(self.layout, self.ngrid).map_err(CliError::Core)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.layout, self.ngrid).map_err(CliError::Core)
    }

    pub fn timing_mode(&self) -> &'static str {
        if self.sequential_timing {
            "sequential"
        } else {
            "parallel"
        }
    }
}
