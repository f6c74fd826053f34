//! `report.json` and the CSV traces written next to it.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{RunConfig, SystemSource};
use crate::linalg::{Mat, C64};
use crate::reduction::{IterationRecord, Method};
use crate::system::ErrorTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub system: SystemSummary,
    pub impulse_grid: GridSummary,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub checksum: String,
    pub source: Option<SystemSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub samples: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    #[serde(rename = "E_c")]
    pub e_c: Option<f64>,
    #[serde(rename = "E_b")]
    pub e_b: Option<f64>,
    #[serde(rename = "E_lambda")]
    pub e_lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationNorms {
    pub e_c: f64,
    pub e_b: f64,
    pub e_lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub converged: bool,
    pub hurwitz: bool,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub eigenvalues: Vec<(f64, f64)>,
    pub metrics: MetricsBlock,
    pub deviation_norms: Option<DeviationNorms>,
    pub h2t_error: f64,
    pub max_impulse_error: f64,
    pub wall_clock_seconds: f64,
}

/// Pretty JSON with every float printed to 17 significant digits.
struct DigitsFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for DigitsFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DigitsFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn trace_csv(trace: &ErrorTrace) -> String {
    let with_rel = trace.relative.iter().any(Option::is_some);
    let mut out = String::from(if with_rel { "t,eps_abs,eps_rel\n" } else { "t,eps_abs\n" });
    for ((t, a), r) in trace.times.iter().zip(&trace.absolute).zip(&trace.relative) {
        let _ = write!(out, "{t:.16e},{a:.16e}");
        if with_rel {
            out.push(',');
            if let Some(r) = r {
                let _ = write!(out, "{r:.16e}");
            }
        }
        out.push('\n');
    }
    out
}

fn eigs_csv(eigs: &[C64]) -> String {
    let mut out = String::from("re,im\n");
    for z in eigs {
        let _ = writeln!(out, "{:.16e},{:.16e}", z.re, z.im);
    }
    out
}

/// Write one error trace as `t,eps_abs[,eps_rel]`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &ErrorTrace) -> Result<PathBuf> {
    write_file(path.as_ref().to_path_buf(), &trace_csv(trace))
}

/// Write sampled impulse responses as `t,h_1_1,...` (entry `(i, j)` is output
/// `i`, input `j`).
pub fn write_response_csv(path: impl AsRef<Path>, times: &[f64], responses: &[Mat]) -> Result<PathBuf> {
    let (p, m) = responses.first().map_or((0, 0), |h| h.shape());
    let mut out = String::from("t");
    for i in 0..p {
        for j in 0..m {
            let _ = write!(out, ",h_{}_{}", i + 1, j + 1);
        }
    }
    out.push('\n');
    for (t, h) in times.iter().zip(responses) {
        let _ = write!(out, "{t:.16e}");
        for i in 0..p {
            for j in 0..m {
                let _ = write!(out, ",{:.16e}", h[(i, j)]);
            }
        }
        out.push('\n');
    }
    write_file(path.as_ref().to_path_buf(), &out)
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write `report.json`, `impulse_<name>.csv` per trace and `eigs_<name>.csv`
/// per spectrum into `dir`, creating it if needed.
pub fn write_report(
    dir: impl AsRef<Path>,
    report: &Report,
    traces: &[(&str, &ErrorTrace)],
    spectra: &[(&str, &[C64])],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![write_file(dir.join("report.json"), &to_json_string(report)?)?];
    for (name, trace) in traces {
        written.push(write_file(dir.join(format!("impulse_{name}.csv")), &trace_csv(trace))?);
    }
    for (name, eigs) in spectra {
        written.push(write_file(dir.join(format!("eigs_{name}.csv")), &eigs_csv(eigs))?);
    }
    Ok(written)
}
