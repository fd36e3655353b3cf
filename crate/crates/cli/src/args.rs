//! Command-line flags and the `key=value` config file that mirrors them.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use sdm_core::field::Layout;
use sdm_core::sdm::{EdgeWindows, RefPattern, SingularFallback};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Convergence,
    Heterogeneous,
    Solve,
    GenField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fdm,
    Sdm,
    Ddm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub fn is_on(self) -> bool {
        self == OnOff::On
    }
}

/// Dirichlet data on the four sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BcSpec {
    /// `sin(pi x)` on the top side, zero elsewhere.
    Sine,
    /// Linear side traces between corner values at (0,0), (1,0), (0,1), (1,1).
    Corners { c00: f64, c10: f64, c01: f64, c11: f64 },
}

impl FromStr for BcSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "sine" {
            return Ok(BcSpec::Sine);
        }
        let list = s.strip_prefix("corners:").ok_or_else(|| format!("unknown bc '{s}' (expected sine or corners:c00,c10,c01,c11)"))?;
        let v: Vec<f64> = list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad corner value '{t}'")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [c00, c10, c01, c11] if v.iter().all(|x| x.is_finite()) => Ok(BcSpec::Corners { c00, c10, c01, c11 }),
            _ => Err(format!("corners needs four finite values, got '{list}'")),
        }
    }
}

/// Fine-grid spacing given as `1/N` or `N`; yields `N`.
pub fn parse_h(s: &str) -> Result<usize, String> {
    let den = s.trim().strip_prefix("1/").unwrap_or(s.trim());
    match den.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("bad spacing '{s}' (expected 1/N or N with N >= 2)")),
    }
}

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "sdm", version, about = "Steady heat conduction experiments: direct FDM, seamless-domain method, domain decomposition")]
pub struct Args {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Grid lines per side.
    #[arg(long)]
    pub ngrid: Option<usize>,
    /// vertex | cell
    #[arg(long)]
    pub layout: Option<Layout>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<MethodArg>>,
    /// Direct-FDM spacings, e.g. 1/8,1/16,1/32,1/64.
    #[arg(long = "fdm-h", value_delimiter = ',', value_parser = parse_h)]
    pub fdm_h: Option<Vec<usize>>,
    /// Coarse-point spacings in fine-grid intervals.
    #[arg(long = "sdm-r", value_delimiter = ',')]
    pub sdm_r: Option<Vec<usize>>,
    /// ring8 | corners4 | edgemid4
    #[arg(long = "sdm-ref")]
    pub sdm_ref: Option<RefPattern>,
    #[arg(long, value_enum)]
    pub oversample: Option<OnOff>,
    /// Oversampled windows that would leave the domain: auto | plain | shift
    #[arg(long = "sdm-edge")]
    pub sdm_edge: Option<EdgeWindows>,
    /// Singular oversampling matrix: plain | pinv | fail
    #[arg(long = "sdm-singular")]
    pub sdm_singular: Option<SingularFallback>,
    /// Decomposition window sides in fine-grid intervals.
    #[arg(long = "ddm-m", value_delimiter = ',')]
    pub ddm_m: Option<Vec<usize>>,
    /// Conductivity field file.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub kmin: Option<f64>,
    #[arg(long)]
    pub kmax: Option<f64>,
    /// Field side length for gen-field.
    #[arg(long)]
    pub ncells: Option<usize>,
    /// sine | corners:c00,c10,c01,c11
    #[arg(long)]
    pub bc: Option<BcSpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "sequential-timing", value_enum)]
    pub sequential_timing: Option<OnOff>,
    #[arg(long)]
    pub repeat: Option<usize>,
    /// key=value file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Args {
    /// Fills every unset field from `base`. A field source on either side
    /// (file or seed) replaces the other side's source as a whole.
    pub fn or(self, base: Args) -> Args {
        let own_source = self.field.is_some() || self.seed.is_some();
        Args {
            experiment: self.experiment.or(base.experiment),
            ngrid: self.ngrid.or(base.ngrid),
            layout: self.layout.or(base.layout),
            methods: self.methods.or(base.methods),
            fdm_h: self.fdm_h.or(base.fdm_h),
            sdm_r: self.sdm_r.or(base.sdm_r),
            sdm_ref: self.sdm_ref.or(base.sdm_ref),
            oversample: self.oversample.or(base.oversample),
            sdm_edge: self.sdm_edge.or(base.sdm_edge),
            sdm_singular: self.sdm_singular.or(base.sdm_singular),
            ddm_m: self.ddm_m.or(base.ddm_m),
            field: if own_source { self.field } else { base.field },
            seed: if own_source { self.seed } else { base.seed },
            kmin: self.kmin.or(base.kmin),
            kmax: self.kmax.or(base.kmax),
            ncells: self.ncells.or(base.ncells),
            bc: self.bc.or(base.bc),
            out: self.out.or(base.out),
            sequential_timing: self.sequential_timing.or(base.sequential_timing),
            repeat: self.repeat.or(base.repeat),
            config: self.config,
        }
    }
}

/// Parses config file text: `key = value` per line, `#` comments, keys named
/// like the long flags (`fdm-h` or `fdm_h`).
pub fn parse_config_text(text: &str) -> Result<Args, CliError> {
    let mut argv = vec!["sdm".to_string()];
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value, got '{line}'", k + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(CliError::Config(format!("config line {}: nested config files are not supported", k + 1)));
        }
        argv.push(format!("--{key}"));
        argv.push(value.trim().to_string());
    }
    Args::try_parse_from(argv).map_err(|e| CliError::Config(format!("config file: {}", e.to_string().trim())))
}

pub fn read_config(path: &Path) -> Result<Args, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}
