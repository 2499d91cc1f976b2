//! Simulation summaries as JSON and as a fixed-width table.

use serde::{Deserialize, Serialize};

use sciss_core::sim::SimSummary;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummaryDto {
    pub label: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub se: Option<f64>,
    pub re: Option<f64>,
    pub cp: f64,
    pub mean_reported_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummaryDto {
    pub method: String,
    pub mean_intr_steps: f64,
    pub params: Vec<ParamSummaryDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub preset: String,
    pub reps: usize,
    pub failures: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummaryDto>,
    pub warnings: Vec<String>,
}

impl SummaryFile {
    pub fn new(s: &SimSummary, seed: u64) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            preset: s.name.clone(),
            reps: s.reps,
            failures: s.failures,
            seed,
            methods: s
                .methods
                .iter()
                .map(|m| MethodSummaryDto {
                    method: m.method.tag().to_string(),
                    mean_intr_steps: m.mean_intr_steps,
                    params: m
                        .params
                        .iter()
                        .map(|p| ParamSummaryDto {
                            label: p.label.clone(),
                            truth: p.truth,
                            mean: p.mean,
                            bias: p.bias,
                            se: p.se,
                            re: p.re,
                            cp: p.cp,
                            mean_reported_se: p.mean_reported_se,
                        })
                        .collect(),
                })
                .collect(),
            warnings: s.warnings.clone(),
        }
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

/// Parameters as rows; Bias, SE, RE and CP per method as column groups.
pub fn render_table(s: &SimSummary) -> String {
    let mut out = format!("{}: {} replications", s.name, s.reps);
    if s.failures > 0 {
        out.push_str(&format!(" ({} failed)", s.failures));
    }
    out.push('\n');
    let group = 4 * 8 + 3;
    out.push_str(&format!("{:<8}", ""));
    for m in &s.methods {
        out.push_str(&format!(" | {:^group$}", m.method.tag()));
    }
    out.push('\n');
    out.push_str(&format!("{:<8}", "param"));
    for _ in &s.methods {
        out.push_str(&format!(" | {:>8} {:>8} {:>8} {:>8}", "Bias", "SE", "RE", "CP"));
    }
    out.push('\n');
    let Some(first) = s.methods.first() else {
        return out;
    };
    for (i, p) in first.params.iter().enumerate() {
        out.push_str(&format!("{:<8}", p.label));
        for m in &s.methods {
            let p = &m.params[i];
            out.push_str(&format!(
                " | {:>8.3} {:>8} {:>8} {:>8.3}",
                p.bias,
                opt(p.se, 3),
                opt(p.re, 2),
                p.cp
            ));
        }
        out.push('\n');
    }
    for m in &s.methods {
        if m.mean_intr_steps > 0.0 {
            out.push_str(&format!("{}: mean accepted refinement steps {:.2}\n", m.method.tag(), m.mean_intr_steps));
        }
    }
    for w in &s.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}
