//! Benchmark systems, run configuration and report files.

mod mtx;
mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::Mat;
use crate::reduction::{Method, ReductionOptions};
use crate::system::LtiSystem;
use crate::{Error, Result};

pub use mtx::{format_matrix_market, parse_matrix_market, read_matrix_market, write_matrix_market};
pub use report::{
    load_report, to_json_string, write_report, DeviationNorms, GridSummary, MethodReport, MetricsBlock, Report,
    SystemSummary,
};
pub use report::{write_response_csv, write_trace_csv};

/// Where a system came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSource {
    Files { a: PathBuf, b: PathBuf, c: PathBuf },
    Heat { n: usize, diffusivity: f64 },
}

#[derive(Debug, Clone)]
pub struct SystemBundle {
    pub system: LtiSystem,
    pub source: SystemSource,
    /// SHA-256 over the dimensions and little-endian entries of `A`, `B`, `C`.
    pub checksum: String,
}

impl SystemBundle {
    pub fn new(system: LtiSystem, source: SystemSource) -> Self {
        let checksum = checksum(&system);
        Self {
            system,
            source,
            checksum,
        }
    }
}

fn checksum(sys: &LtiSystem) -> String {
    let mut h = Sha256::new();
    for m in [sys.a(), sys.b(), sys.c()] {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for v in m.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn load_matrix_market_triple(a: impl AsRef<Path>, b: impl AsRef<Path>, c: impl AsRef<Path>) -> Result<SystemBundle> {
    let (a, b, c) = (a.as_ref(), b.as_ref(), c.as_ref());
    let label = a
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".into());
    let system = LtiSystem::new(read_matrix_market(a)?, read_matrix_market(b)?, read_matrix_market(c)?, label)?;
    Ok(SystemBundle::new(
        system,
        SystemSource::Files {
            a: a.to_path_buf(),
            b: b.to_path_buf(),
            c: c.to_path_buf(),
        },
    ))
}

/// Default diffusivity for the synthetic heat benchmark. At this value the
/// slowest mode decays on a time scale of about 10, so a horizon of 1 cuts
/// the impulse response well before it dies out.
pub const HEAT_DIFFUSIVITY: f64 = 0.01;

/// 1D heat equation on `n` interior nodes with Dirichlet boundaries:
/// `A = k (n+1)^2 tridiag(1, -2, 1)`, input at node `n/4`, output at node `3n/4`.
pub fn generate_heat_system(n: usize, diffusivity: f64) -> Result<SystemBundle> {
    if n < 3 {
        return Err(Error::Validation(format!("heat system needs n >= 3, got {n}")));
    }
    if !(diffusivity > 0.0) || !diffusivity.is_finite() {
        return Err(Error::Validation(format!("diffusivity must be positive, got {diffusivity}")));
    }
    let s = diffusivity * ((n + 1) * (n + 1)) as f64;
    let a = Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * s,
        1 => s,
        _ => 0.0,
    });
    let mut b = Mat::zeros(n, 1);
    b[(n / 4, 0)] = 1.0;
    let mut c = Mat::zeros(1, n);
    c[(0, 3 * n / 4)] = 1.0;
    let system = LtiSystem::new(a, b, c, format!("heat{n}"))?;
    Ok(SystemBundle::new(system, SystemSource::Heat { n, diffusivity }))
}

/// Sampling of the impulse-response traces: `count` points on `[0, factor T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotGrid {
    pub count: usize,
    pub horizon_factor: f64,
}

impl Default for PlotGrid {
    fn default() -> Self {
        Self {
            count: 500,
            horizon_factor: 1.5,
        }
    }
}

impl PlotGrid {
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        crate::system::uniform_grid(self.horizon_factor * horizon, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: Option<SystemSource>,
    pub order: usize,
    pub horizon: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub output_dir: PathBuf,
    pub plot_grid: PlotGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opts = ReductionOptions::default();
        Self {
            source: None,
            order: 5,
            horizon: 1.0,
            methods: vec![Method::Irka, Method::TlIrka],
            seed: 0,
            tolerance: opts.tolerance,
            max_iterations: opts.max_iterations,
            output_dir: PathBuf::from("out"),
            plot_grid: PlotGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Validation("order must be at least 1".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Validation(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Validation("max_iterations must be at least 1".into()));
        }
        if self.plot_grid.count < 2 || !(self.plot_grid.horizon_factor > 0.0) {
            return Err(Error::Validation("plot grid needs at least 2 samples and a positive span".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> ReductionOptions {
        ReductionOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    pub fn load_system(&self) -> Result<SystemBundle> {
        match &self.source {
            Some(SystemSource::Files { a, b, c }) => load_matrix_market_triple(a, b, c),
            Some(SystemSource::Heat { n, diffusivity }) => generate_heat_system(*n, *diffusivity),
            None => Err(Error::Validation("no system source: pass --a/--b/--c or --gen-heat".into())),
        }
    }
}
