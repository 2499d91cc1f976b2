//! Runs a selection of estimators on one dataset, sharing the supervised fit
//! and the conditional models between them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::conditional::{default_lambda, fit_aug, fit_pos, AugParams, FeatureTransform, PosParams, SurrogateFamily};
use crate::data::{LabeledSample, Schema, UnlabeledSample};
use crate::dr::fit_dr;
use crate::error::{Error, Result};
use crate::linalg::SolverConfig;
use crate::sciss::{fit_ensemble, fit_intr, fit_sciss, report_sl, EstimateReport, IntrConfig};
use crate::supervised::{fit_sl, SlFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sl,
    ScissAug,
    ScissPos,
    Intr,
    Ensemble,
    Dr,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sl,
        Method::ScissAug,
        Method::ScissPos,
        Method::Intr,
        Method::Ensemble,
        Method::Dr,
    ];

    /// Display tag used in tables and report files.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Sl => "SL",
            Method::ScissAug => "SCISS-Aug",
            Method::ScissPos => "SCISS-PoS",
            Method::Intr => "INTR",
            Method::Ensemble => "ES",
            Method::Dr => "DR",
        }
    }

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Sl => "sl",
            Method::ScissAug => "sciss-aug",
            Method::ScissPos => "sciss-pos",
            Method::Intr => "intr",
            Method::Ensemble => "ensemble",
            Method::Dr => "dr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts either the tag or the command-line spelling, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s) || m.cli_name().eq_ignore_ascii_case(s))
            .or_else(|| s.eq_ignore_ascii_case("es").then_some(Method::Ensemble))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl FromStr for SurrogateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(SurrogateFamily::Gaussian),
            "logistic" | "binary" => Ok(SurrogateFamily::Logistic),
            "poisson" | "count" => Ok(SurrogateFamily::Poisson),
            _ => Err(Error::InvalidConfig(format!("unknown surrogate family `{s}`"))),
        }
    }
}

/// Conditional model refined by the intrinsic-efficiency step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntrBase {
    #[default]
    Aug,
    Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub methods: Vec<Method>,
    /// One family per surrogate; required by SCISS-PoS.
    pub families: Option<Vec<SurrogateFamily>>,
    /// Applied to `x` by the augmented model and the density-ratio baseline.
    pub transform: FeatureTransform,
    /// Ridge for the augmented model; `n^{-3/4}` when absent.
    pub lambda: Option<f64>,
    pub solver: SolverConfig,
    pub intr: IntrConfig,
    pub intr_base: IntrBase,
    /// Pairs refined by INTR; every pair when absent.
    pub intr_pairs: Option<Vec<(usize, usize)>>,
    pub ensemble_members: Vec<Method>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Sl],
            families: None,
            transform: FeatureTransform::Identity,
            lambda: None,
            solver: SolverConfig::default(),
            intr: IntrConfig::default(),
            intr_base: IntrBase::Aug,
            intr_pairs: None,
            ensemble_members: vec![Method::Sl, Method::ScissAug, Method::ScissPos],
        }
    }
}

impl PipelineConfig {
    /// Uses `log(x + 1)` features for the augmented model and the baseline
    /// when every surrogate is a count.
    pub fn with_families(mut self, families: Vec<SurrogateFamily>) -> Self {
        if !families.is_empty() && families.iter().all(|&f| f == SurrogateFamily::Poisson) {
            self.transform = FeatureTransform::Log1p;
        }
        self.families = Some(families);
        self
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        self.solver.validate()?;
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no estimation method selected".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!("lambda must be a nonnegative number, got {l}")));
            }
        }
        if let Some(f) = &self.families {
            if f.len() != schema.q {
                return Err(Error::InvalidConfig(format!(
                    "{} surrogate families given for {} outcomes",
                    f.len(),
                    schema.q
                )));
            }
            if schema.p != schema.q {
                return Err(Error::InvalidConfig(format!(
                    "surrogate models need one feature per outcome, found p = {} for q = {}",
                    schema.p, schema.q
                )));
            }
        }
        if self.needs(Method::ScissPos) && self.families.is_none() {
            return Err(Error::InvalidConfig("SCISS-PoS requires surrogate families".into()));
        }
        if self.methods.contains(&Method::Ensemble) {
            let members = self.effective_members();
            if members.len() < 2 {
                return Err(Error::InvalidConfig("an ensemble needs at least two available members".into()));
            }
            if members.iter().any(|&m| m == Method::Ensemble) {
                return Err(Error::InvalidConfig("an ensemble cannot contain itself".into()));
            }
        }
        if let Some(pairs) = &self.intr_pairs {
            for &(j, k) in pairs {
                if j == k || j >= schema.q || k >= schema.q {
                    return Err(Error::InvalidConfig(format!("INTR pair ({j}, {k}) is not an edge")));
                }
            }
        }
        Ok(())
    }

    /// Ensemble members that can actually be fitted (PoS drops out without families).
    fn effective_members(&self) -> Vec<Method> {
        self.ensemble_members
            .iter()
            .copied()
            .filter(|&m| m != Method::ScissPos || self.families.is_some())
            .collect()
    }

    fn needs(&self, target: Method) -> bool {
        self.methods.iter().any(|&m| {
            m == target
                || (m == Method::Intr
                    && matches!(
                        (target, self.intr_base),
                        (Method::ScissAug, IntrBase::Aug) | (Method::ScissPos, IntrBase::Pos)
                    ))
                || (m == Method::Ensemble && self.effective_members().contains(&target))
        })
    }
}

/// Fitted ingredients kept around for inspection.
#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub reports: Vec<EstimateReport>,
    pub sl: SlFit,
    pub aug: Option<AugParams>,
    pub pos: Option<PosParams>,
}

impl PipelineFit {
    pub fn report(&self, method: Method) -> Option<&EstimateReport> {
        self.reports.iter().find(|r| r.method == method)
    }
}

/// Fits every requested method; reports come back in `cfg.methods` order.
pub fn fit_methods(
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    q: usize,
    cfg: &PipelineConfig,
) -> Result<PipelineFit> {
    let schema = Schema::infer(q, labeled, unlabeled)?;
    cfg.validate(&schema)?;
    let semi = cfg.methods.iter().any(|&m| m != Method::Sl);
    if semi && unlabeled.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }

    let sl = fit_sl(labeled, q, &cfg.solver)?;
    let mut done: Vec<EstimateReport> = Vec::new();
    let mut aug = None;
    let mut pos = None;

    let sl_report = report_sl(labeled, &sl, Method::Sl)?;
    done.push(sl_report);

    if cfg.needs(Method::ScissAug) {
        let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(labeled.len()));
        let model = fit_aug(labeled, q, lambda, cfg.transform, &cfg.solver)?;
        let mut r = fit_sciss(labeled, unlabeled, &sl, &model, Method::ScissAug)?;
        if model.diagnostics.overparameterized {
            r.diagnostics.overparameterized = true;
            r.diagnostics.notes.push(format!(
                "augmented model has {} coefficients per node for n = {}",
                model.diagnostics.params_per_node,
                labeled.len()
            ));
        }
        done.push(r);
        aug = Some(model);
    }
    if cfg.needs(Method::ScissPos) {
        let families = cfg.families.as_deref().unwrap_or_default();
        let model = fit_pos(labeled, &sl.theta, families, &cfg.solver)?;
        let mut r = fit_sciss(labeled, unlabeled, &sl, &model, Method::ScissPos)?;
        if model.any_clamped() {
            r.diagnostics.clamped = true;
            let nodes: Vec<String> = model
                .surrogates
                .iter()
                .enumerate()
                .filter(|(_, s)| s.clamped)
                .map(|(j, _)| format!("{}", j + 1))
                .collect();
            r.diagnostics
                .notes
                .push(format!("surrogate linear predictor held at the box for node(s) {}", nodes.join(",")));
        }
        done.push(r);
        pos = Some(model);
    }
    if cfg.methods.contains(&Method::Intr) {
        let pairs = cfg.intr_pairs.clone().unwrap_or_else(|| {
            (0..q).flat_map(|j| (j + 1..q).map(move |k| (j, k))).collect()
        });
        let r = match cfg.intr_base {
            IntrBase::Aug => {
                let base = find(&done, Method::ScissAug)?;
                let model = aug.as_ref().expect("fitted above");
                fit_intr(labeled, unlabeled, &sl, model, base, &pairs, &cfg.intr)?
            }
            IntrBase::Pos => {
                let base = find(&done, Method::ScissPos)?;
                let model = pos.as_ref().expect("fitted above");
                fit_intr(labeled, unlabeled, &sl, model, base, &pairs, &cfg.intr)?
            }
        };
        done.push(r);
    }
    if cfg.methods.contains(&Method::Dr) {
        done.push(fit_dr(labeled, unlabeled, q, cfg.transform, &cfg.solver)?);
    }
    if cfg.methods.contains(&Method::Ensemble) {
        let members = cfg
            .effective_members()
            .into_iter()
            .map(|m| find(&done, m))
            .collect::<Result<Vec<_>>>()?;
        let r = fit_ensemble(&members)?;
        done.push(r);
    }

    let reports = cfg
        .methods
        .iter()
        .map(|&m| find(&done, m).cloned())
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineFit { reports, sl, aug, pos })
}

fn find(reports: &[EstimateReport], method: Method) -> Result<&EstimateReport> {
    reports
        .iter()
        .find(|r| r.method == method)
        .ok_or_else(|| Error::InvalidConfig(format!("{method} was not fitted")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(m.cli_name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn poisson_families_switch_to_log_features() {
        let cfg = PipelineConfig::default().with_families(vec![SurrogateFamily::Poisson; 3]);
        assert_eq!(cfg.transform, FeatureTransform::Log1p);
        let cfg = PipelineConfig::default().with_families(vec![SurrogateFamily::Gaussian; 3]);
        assert_eq!(cfg.transform, FeatureTransform::Identity);
    }
}
