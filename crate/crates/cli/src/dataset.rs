//! Comma-separated dataset files.
//!
//! The header names outcome columns `y1..yq`, auxiliary features `x1..xp` and
//! adjustment covariates `w1..wd` in any order. Rows with every `y` filled are
//! labeled, rows with every `y` empty are unlabeled. The intercept `w0 = 1`
//! is prepended on read and dropped on write.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use sciss_core::{LabeledSample, OutcomeConfig, UnlabeledSample};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub q: usize,
    pub labeled: Vec<LabeledSample>,
    pub unlabeled: Vec<UnlabeledSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Y,
    X,
    W,
}

/// Maps header cells to `(kind, index)` and checks that each kind is numbered `1..=m`.
fn header_layout(path: &Path, header: &csv::StringRecord) -> Result<(Vec<(Kind, usize)>, [usize; 3]), CliError> {
    let schema = |message: String| CliError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut cols = Vec::with_capacity(header.len());
    let mut seen: [Vec<usize>; 3] = Default::default();
    for cell in header.iter() {
        let cell = cell.trim();
        let (kind, rest) = match cell.split_at_checked(1) {
            Some(("y", r)) => (Kind::Y, r),
            Some(("x", r)) => (Kind::X, r),
            Some(("w", r)) => (Kind::W, r),
            _ => return Err(schema(format!("unrecognized column `{cell}`"))),
        };
        let idx: usize = rest
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| schema(format!("unrecognized column `{cell}`")))?;
        seen[kind as usize].push(idx);
        cols.push((kind, idx - 1));
    }
    let mut counts = [0; 3];
    for (k, idx) in seen.iter_mut().enumerate() {
        idx.sort_unstable();
        let name = ["y", "x", "w"][k];
        if idx.iter().enumerate().any(|(i, &v)| v != i + 1) {
            return Err(schema(format!("{name} columns must be numbered 1..m without gaps or repeats")));
        }
        counts[k] = idx.len();
    }
    if counts[0] == 0 {
        return Err(schema("no outcome columns (y1, y2, ...)".into()));
    }
    if counts[0] > sciss_core::ising::MAX_NODES {
        return Err(schema(format!("{} outcomes exceed the cap of 15", counts[0])));
    }
    Ok((cols, counts))
}

/// Reads a dataset and splits it into labeled and unlabeled records.
pub fn parse_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let header = reader
        .headers()
        .map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let (cols, [q, p, d]) = header_layout(path, &header)?;
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut y: Vec<Option<u8>> = vec![None; q];
        let mut x = vec![0.0; p];
        let mut w = vec![0.0; d + 1];
        w[0] = 1.0;
        for (cell, &(kind, idx)) in record.iter().zip(&cols) {
            let cell = cell.trim();
            match kind {
                Kind::Y => {
                    y[idx] = match cell {
                        "" => None,
                        "0" => Some(0),
                        "1" => Some(1),
                        other => return Err(err(format!("outcome y{} must be 0, 1 or empty, found `{other}`", idx + 1))),
                    }
                }
                Kind::X | Kind::W => {
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| err(format!("expected a number, found `{cell}`")))?;
                    if kind == Kind::X {
                        x[idx] = v;
                    } else {
                        w[idx + 1] = v;
                    }
                }
            }
        }
        let filled = y.iter().filter(|v| v.is_some()).count();
        if filled == q {
            let bits: Vec<u8> = y.into_iter().map(|v| v.expect("filled")).collect();
            let y = OutcomeConfig::from_bits(&bits).map_err(|e| err(e.to_string()))?;
            labeled.push(LabeledSample { y, x, w });
        } else if filled == 0 {
            unlabeled.push(UnlabeledSample { x, w });
        } else {
            return Err(err("partial outcome row".into()));
        }
    }
    if labeled.is_empty() {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            message: "labeled sample is empty".into(),
        });
    }
    Ok(Dataset { q, labeled, unlabeled })
}

/// Writes a dataset in the layout [`parse_dataset`] reads. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let first_x = data
        .labeled
        .first()
        .map(|s| (s.x.len(), s.w.len()))
        .ok_or_else(|| CliError::Config("cannot write a dataset without labeled rows".into()))?;
    let (p, w_len) = first_x;
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    let header: Vec<String> = (1..=data.q)
        .map(|j| format!("y{j}"))
        .chain((1..=p).map(|j| format!("x{j}")))
        .chain((1..w_len).map(|j| format!("w{j}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let row = |y: Option<OutcomeConfig>, x: &[f64], w: &[f64]| -> String {
        let ys = (0..data.q).map(|j| y.map_or(String::new(), |y| if y.get(j) { "1".into() } else { "0".into() }));
        let nums = x.iter().chain(&w[1..]).map(|v| format!("{v:?}"));
        ys.chain(nums).collect::<Vec<_>>().join(",")
    };
    for s in &data.labeled {
        writeln!(out, "{}", row(Some(s.y), &s.x, &s.w)).map_err(io)?;
    }
    for s in &data.unlabeled {
        writeln!(out, "{}", row(None, &s.x, &s.w)).map_err(io)?;
    }
    out.flush().map_err(io)
}
