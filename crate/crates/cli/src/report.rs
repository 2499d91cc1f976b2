//! JSON report files.
//!
//! A report file holds one or more estimate reports under a `schema_version`
//! key. Each report stores the parameter object four times (estimate, SE and
//! the two interval bounds), each as a `q × q` matrix with node intercepts on
//! the diagonal plus the full node coefficient vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sciss_core::ising::IsingParams;
use sciss_core::linalg::Mat;
use sciss_core::pipeline::Method;
use sciss_core::sciss::{Diagnostics, EnsembleWeights, EstimateReport, IntrTrace};

use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDto {
    /// Pair coefficients off the diagonal, node intercepts on it.
    pub matrix: Vec<Vec<f64>>,
    /// Full `θ_jj` vectors, intercept first.
    pub node: Vec<Vec<f64>>,
}

impl From<&IsingParams> for ParamsDto {
    fn from(p: &IsingParams) -> Self {
        let m = p.to_matrix();
        Self {
            matrix: (0..p.q()).map(|j| m.row(j).to_vec()).collect(),
            node: (0..p.q()).map(|j| p.node(j).to_vec()).collect(),
        }
    }
}

impl TryFrom<&ParamsDto> for IsingParams {
    type Error = CliError;

    fn try_from(d: &ParamsDto) -> Result<Self, CliError> {
        let q = d.matrix.len();
        let bad = |m: &str| CliError::Config(format!("malformed parameter block: {m}"));
        if d.node.len() != q || d.matrix.iter().any(|r| r.len() != q) {
            return Err(bad("matrix and node blocks disagree on q"));
        }
        let w_len = d.node.first().map_or(0, Vec::len);
        if w_len == 0 || d.node.iter().any(|v| v.len() != w_len) {
            return Err(bad("node vectors must share a nonzero length"));
        }
        let mut p = IsingParams::zeros(q, w_len).map_err(CliError::from_core)?;
        for j in 0..q {
            p.node_mut(j).copy_from_slice(&d.node[j]);
            for k in j + 1..q {
                if d.matrix[j][k] != d.matrix[k][j] {
                    return Err(bad("pair matrix is not symmetric"));
                }
                p.set_pair(j, k, d.matrix[j][k]);
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrTraceDto {
    pub j: usize,
    pub k: usize,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeightsDto {
    pub param: usize,
    pub alpha: Vec<f64>,
    pub dropped: Vec<usize>,
    pub vertex: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsDto {
    pub node_iterations: Vec<usize>,
    pub clamped: bool,
    pub overparameterized: bool,
    pub intr: Vec<IntrTraceDto>,
    pub ensemble_members: Vec<String>,
    pub ensemble: Vec<EnsembleWeightsDto>,
    pub notes: Vec<String>,
}

impl From<&Diagnostics> for DiagnosticsDto {
    fn from(d: &Diagnostics) -> Self {
        Self {
            node_iterations: d.node_iterations.clone(),
            clamped: d.clamped,
            overparameterized: d.overparameterized,
            intr: d
                .intr
                .iter()
                .map(|t| IntrTraceDto {
                    j: t.j + 1,
                    k: t.k + 1,
                    objective: t.objective.clone(),
                })
                .collect(),
            ensemble_members: d.ensemble_members.iter().map(|m| m.tag().to_string()).collect(),
            ensemble: d
                .ensemble
                .iter()
                .map(|e| EnsembleWeightsDto {
                    param: e.param,
                    alpha: e.alpha.clone(),
                    dropped: e.dropped.clone(),
                    vertex: e.vertex,
                })
                .collect(),
            notes: d.notes.clone(),
        }
    }
}

impl TryFrom<&DiagnosticsDto> for Diagnostics {
    type Error = CliError;

    fn try_from(d: &DiagnosticsDto) -> Result<Self, CliError> {
        let one_based = |v: usize| {
            v.checked_sub(1)
                .ok_or_else(|| CliError::Config("INTR trace node indices are 1-based".into()))
        };
        Ok(Self {
            node_iterations: d.node_iterations.clone(),
            clamped: d.clamped,
            overparameterized: d.overparameterized,
            intr: d
                .intr
                .iter()
                .map(|t| {
                    Ok(IntrTrace {
                        j: one_based(t.j)?,
                        k: one_based(t.k)?,
                        objective: t.objective.clone(),
                    })
                })
                .collect::<Result<_, CliError>>()?,
            ensemble_members: d
                .ensemble_members
                .iter()
                .map(|m| m.parse::<Method>().map_err(CliError::from_core))
                .collect::<Result<_, _>>()?,
            ensemble: d
                .ensemble
                .iter()
                .map(|e| EnsembleWeights {
                    param: e.param,
                    alpha: e.alpha.clone(),
                    dropped: e.dropped.clone(),
                    vertex: e.vertex,
                })
                .collect(),
            notes: d.notes.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDto {
    pub method: String,
    pub n: usize,
    pub q: usize,
    pub theta: ParamsDto,
    pub se: ParamsDto,
    pub ci_low: ParamsDto,
    pub ci_high: ParamsDto,
    pub diagnostics: DiagnosticsDto,
}

impl From<&EstimateReport> for ReportDto {
    fn from(r: &EstimateReport) -> Self {
        Self {
            method: r.method.tag().to_string(),
            n: r.n,
            q: r.theta.q(),
            theta: (&r.theta).into(),
            se: (&r.se).into(),
            ci_low: (&r.ci_low).into(),
            ci_high: (&r.ci_high).into(),
            diagnostics: (&r.diagnostics).into(),
        }
    }
}

impl TryFrom<&ReportDto> for EstimateReport {
    type Error = CliError;

    /// Influence columns are not stored, so the result carries none.
    fn try_from(d: &ReportDto) -> Result<Self, CliError> {
        let theta = IsingParams::try_from(&d.theta)?;
        if theta.q() != d.q {
            return Err(CliError::Config(format!("report declares q = {} but stores {}", d.q, theta.q())));
        }
        Ok(Self {
            method: d.method.parse().map_err(CliError::from_core)?,
            n: d.n,
            theta,
            se: (&d.se).try_into()?,
            ci_low: (&d.ci_low).try_into()?,
            ci_high: (&d.ci_high).try_into()?,
            diagnostics: (&d.diagnostics).try_into()?,
            influence: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub reports: Vec<ReportDto>,
}

impl ReportFile {
    pub fn new(reports: &[EstimateReport]) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            reports: reports.iter().map(ReportDto::from).collect(),
        }
    }

    pub fn to_reports(&self) -> Result<Vec<EstimateReport>, CliError> {
        self.reports.iter().map(EstimateReport::try_from).collect()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_reports(path: &Path, reports: &[EstimateReport]) -> Result<(), CliError> {
    write_json(path, &ReportFile::new(reports))
}

pub fn read_reports(path: &Path) -> Result<Vec<EstimateReport>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ReportFile = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.schema_version != REPORT_SCHEMA_VERSION {
        return Err(CliError::SchemaVersion {
            found: file.schema_version,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    file.to_reports()
}

/// Human-readable estimate table: one line per parameter.
pub fn render_report(r: &EstimateReport) -> String {
    let mut out = format!("{} (n = {})\n", r.method.tag(), r.n);
    out.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>10} {:>10}\n",
        "param", "estimate", "se", "ci_low", "ci_high"
    ));
    let q = r.theta.q();
    let mut line = |label: String, t: f64, s: f64, lo: f64, hi: f64| {
        out.push_str(&format!("{label:<10} {t:>10.4} {s:>10.4} {lo:>10.4} {hi:>10.4}\n"));
    };
    for j in 0..q {
        for c in 0..r.theta.w_len() {
            let label = if r.theta.w_len() == 1 {
                format!("θ{}{}", j + 1, j + 1)
            } else {
                format!("θ{}{}[{c}]", j + 1, j + 1)
            };
            line(label, r.theta.node(j)[c], r.se.node(j)[c], r.ci_low.node(j)[c], r.ci_high.node(j)[c]);
        }
    }
    for j in 0..q {
        for k in j + 1..q {
            line(
                format!("θ{}{}", j + 1, k + 1),
                r.theta.pair(j, k),
                r.se.pair(j, k),
                r.ci_low.pair(j, k),
                r.ci_high.pair(j, k),
            );
        }
    }
    for note in &r.diagnostics.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

/// Square matrix from nested rows, for callers assembling parameters by hand.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Mat::from_rows(&refs).map_err(CliError::from_core)
}
