//! Synthetic data generation and replicated estimation.
//!
//! Outcomes come from an Ising model with `w = 1`; surrogates are attached by
//! one of three mechanisms. Every replication draws from its own ChaCha stream
//! derived from `(seed, replication index)`, and all outcomes are drawn before
//! any surrogate, so configurations that differ only in `c` share outcomes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::conditional::SurrogateFamily;
use crate::data::{LabeledSample, UnlabeledSample};
use crate::error::{Error, Result};
use crate::ising::{sample, IsingParams, OutcomeConfig};
use crate::linalg::Mat;
use crate::math;
use crate::pipeline::{fit_methods, IntrBase, Method, PipelineConfig};
use crate::sciss::EstimateReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    /// `x_k = c_kk y_k + Σ_{j≠k} c_jk y_j y_k + N(0, 1)`.
    Gaussian,
    /// `x_k ~ Poi(c_kk y_k + Σ_{j≠k} c_jk y_j y_k)`, zero when the rate is zero.
    Poisson,
    /// `P(x_k = 1 | y_k = 1) = rate`, `x_k = 0` when `y_k = 0`.
    AnchorBinary,
}

impl Mechanism {
    pub fn family(self) -> SurrogateFamily {
        match self {
            Mechanism::Gaussian => SurrogateFamily::Gaussian,
            Mechanism::Poisson => SurrogateFamily::Poisson,
            Mechanism::AnchorBinary => SurrogateFamily::Logistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub name: String,
    pub theta: IsingParams,
    pub mechanism: Mechanism,
    pub c: Mat,
    /// `P(x_k = 1 | y_k = 1)` for the anchor mechanism.
    pub anchor_rate: f64,
    pub n: usize,
    pub big_n: usize,
    pub reps: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

pub const PRESETS: [&str; 8] = [
    "gauss-c1", "gauss-c2", "gauss-c3", "pois-c1", "pois-c2", "pois-c3", "anchor", "gauss-noise",
];

fn mat(rows: [[f64; 3]; 3]) -> Mat {
    Mat::from_rows(&[&rows[0], &rows[1], &rows[2]]).expect("3x3")
}

pub fn table1_theta() -> IsingParams {
    IsingParams::from_matrix(&mat([[0.1, 0.3, -0.6], [0.3, -0.3, 0.4], [-0.6, 0.4, 0.2]])).expect("symmetric")
}

pub fn anchor_theta() -> IsingParams {
    IsingParams::from_matrix(&mat([[-2.0, 0.0, 1.0], [0.0, -1.5, 1.0], [1.0, 1.0, -1.0]])).expect("symmetric")
}

pub fn c_matrix(level: usize) -> Option<Mat> {
    match level {
        0 => Some(Mat::zeros(3, 3)),
        1 => Some(mat([[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]])),
        2 => Some(mat([[2.5, 0.2, 0.5], [0.2, 2.5, 0.5], [0.5, 0.5, 2.5]])),
        3 => Some(mat([[1.5, 1.0, 1.5], [1.0, 2.0, 1.0], [1.5, 1.0, 1.5]])),
        _ => None,
    }
}

impl SimConfig {
    /// Named settings: the six surrogate configurations, the anchor-positive
    /// misspecification study, and a pure-noise control.
    pub fn preset(name: &str) -> Result<Self> {
        let (mechanism, level) = match name {
            "gauss-c1" => (Mechanism::Gaussian, 1),
            "gauss-c2" => (Mechanism::Gaussian, 2),
            "gauss-c3" => (Mechanism::Gaussian, 3),
            "pois-c1" => (Mechanism::Poisson, 1),
            "pois-c2" => (Mechanism::Poisson, 2),
            "pois-c3" => (Mechanism::Poisson, 3),
            "gauss-noise" => (Mechanism::Gaussian, 0),
            "anchor" => (Mechanism::AnchorBinary, 0),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset `{name}`; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        let families = vec![mechanism.family(); 3];
        if mechanism == Mechanism::AnchorBinary {
            let mut pipeline = PipelineConfig::default().with_families(families);
            pipeline.methods = vec![Method::Sl, Method::ScissAug, Method::Intr];
            pipeline.intr_base = IntrBase::Aug;
            pipeline.intr_pairs = Some(vec![(0, 1)]);
            return Ok(Self {
                name: name.to_string(),
                theta: anchor_theta(),
                mechanism,
                c: Mat::zeros(3, 3),
                anchor_rate: 0.6,
                n: 500,
                big_n: 7500,
                reps: 500,
                seed: 1,
                pipeline,
            });
        }
        let mut pipeline = PipelineConfig::default().with_families(families);
        pipeline.methods = vec![Method::Sl, Method::ScissAug, Method::ScissPos, Method::Dr, Method::Ensemble];
        Ok(Self {
            name: name.to_string(),
            theta: table1_theta(),
            mechanism,
            c: c_matrix(level).expect("known level"),
            anchor_rate: 0.6,
            n: 200,
            big_n: 10_000,
            reps: 500,
            seed: 1,
            pipeline,
        })
    }

    pub fn q(&self) -> usize {
        self.theta.q()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q();
        if self.theta.w_len() != 1 {
            return Err(Error::InvalidConfig("simulations use w = 1 (intercept only)".into()));
        }
        if self.c.rows() != q || self.c.cols() != q {
            return Err(Error::InvalidMechanism(format!(
                "c is {}x{} for {q} outcomes",
                self.c.rows(),
                self.c.cols()
            )));
        }
        if !self.c.is_symmetric(0.0) {
            return Err(Error::InvalidMechanism("c must be symmetric".into()));
        }
        if self.mechanism == Mechanism::Poisson && self.c.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidMechanism("Poisson rates need nonnegative c".into()));
        }
        if self.mechanism == Mechanism::AnchorBinary && !(0.0..=1.0).contains(&self.anchor_rate) {
            return Err(Error::InvalidMechanism(format!("anchor rate {} is not a probability", self.anchor_rate)));
        }
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!("n = {} is below 10", self.n)));
        }
        if self.big_n < self.n {
            return Err(Error::InvalidConfig(format!("N = {} is smaller than n = {}", self.big_n, self.n)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("at least one replication is required".into()));
        }
        if self.pipeline.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        Ok(())
    }

    /// Methods actually fitted per replication: SL first, then the requested ones.
    pub fn fitted_methods(&self) -> Vec<Method> {
        let mut m = vec![Method::Sl];
        m.extend(self.pipeline.methods.iter().copied().filter(|&x| x != Method::Sl));
        m
    }
}

fn rate(c: &Mat, y: OutcomeConfig, k: usize) -> f64 {
    if !y.get(k) {
        return 0.0;
    }
    let q = c.rows();
    let mut r = c[(k, k)];
    for j in (0..q).filter(|&j| j != k && y.get(j)) {
        r += c[(j, k)];
    }
    r
}

pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Draws `n` labeled and `N` unlabeled records for replication `rep`.
pub fn generate(cfg: &SimConfig, rep: usize) -> Result<(Vec<LabeledSample>, Vec<UnlabeledSample>)> {
    cfg.validate()?;
    let q = cfg.q();
    let mut rng = replication_rng(cfg.seed, rep);
    let ys = sample(&cfg.theta, &[1.0], &mut rng, cfg.n + cfg.big_n)?;
    let mut labeled = Vec::with_capacity(cfg.n);
    let mut unlabeled = Vec::with_capacity(cfg.big_n);
    for (i, y) in ys.into_iter().enumerate() {
        let x: Vec<f64> = (0..q)
            .map(|k| match cfg.mechanism {
                Mechanism::Gaussian => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    rate(&cfg.c, y, k) + e
                },
                Mechanism::Poisson => {
                    let r = rate(&cfg.c, y, k);
                    if r > 0.0 {
                        Poisson::new(r).expect("positive rate").sample(&mut rng)
                    } else {
                        0.0
                    }
                }
                Mechanism::AnchorBinary => {
                    if y.get(k) && rng.random::<f64>() < cfg.anchor_rate {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        if i < cfg.n {
            labeled.push(LabeledSample { y, x, w: vec![1.0] });
        } else {
            unlabeled.push(UnlabeledSample { x, w: vec![1.0] });
        }
    }
    Ok((labeled, unlabeled))
}

/// Point estimates and interval bounds of one method in one replication,
/// in [`IsingParams::flatten`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodDraw {
    pub method: Method,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Accepted INTR steps summed over refined pairs.
    pub intr_steps: usize,
}

impl From<&EstimateReport> for MethodDraw {
    fn from(r: &EstimateReport) -> Self {
        Self {
            method: r.method,
            estimate: r.theta.flatten(),
            se: r.se.flatten(),
            ci_low: r.ci_low.flatten(),
            ci_high: r.ci_high.flatten(),
            intr_steps: r.diagnostics.intr.iter().map(|t| t.accepted_steps()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub draws: Vec<MethodDraw>,
}

/// Generates and fits one replication.
pub fn replicate(cfg: &SimConfig, rep: usize) -> Result<RepOutcome> {
    let (labeled, unlabeled) = generate(cfg, rep)?;
    let mut pipeline = cfg.pipeline.clone();
    pipeline.methods = cfg.fitted_methods();
    let fit = fit_methods(&labeled, &unlabeled, cfg.q(), &pipeline)?;
    Ok(RepOutcome {
        rep,
        draws: fit.reports.iter().map(MethodDraw::from).collect(),
    })
}

/// Labels for the flattened parameters, e.g. `θ11` or `θ12`.
pub fn param_labels(q: usize, w_len: usize) -> Vec<(String, usize, usize)> {
    let mut v = Vec::new();
    for j in 0..q {
        for c in 0..w_len {
            let label = if w_len == 1 {
                format!("θ{}{}", j + 1, j + 1)
            } else {
                format!("θ{}{}[{}]", j + 1, j + 1, c)
            };
            v.push((label, j, j));
        }
    }
    for j in 0..q {
        for k in j + 1..q {
            v.push((format!("θ{}{}", j + 1, k + 1), j, k));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub label: String,
    pub j: usize,
    pub k: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Monte-Carlo standard deviation of the estimates; absent below two replications.
    pub se: Option<f64>,
    /// `(SE_SL / SE)²`.
    pub re: Option<f64>,
    pub cp: f64,
    pub mean_reported_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub params: Vec<ParamSummary>,
    pub mean_intr_steps: f64,
}

impl MethodSummary {
    pub fn param(&self, j: usize, k: usize) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.j == j && p.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub name: String,
    pub reps: usize,
    pub failures: usize,
    pub methods: Vec<MethodSummary>,
    pub warnings: Vec<String>,
}

impl SimSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    /// `(SE_b / SE_a)²` for one parameter, the efficiency of `a` relative to `b`.
    pub fn relative_efficiency(&self, a: Method, b: Method, j: usize, k: usize) -> Option<f64> {
        let sa = self.method(a)?.param(j, k)?.se?;
        let sb = self.method(b)?.param(j, k)?.se?;
        (sa > 0.0).then(|| (sb / sa) * (sb / sa))
    }
}

/// Aggregates replication outcomes in the given (replication) order. More
/// than 2% failed replications is an error.
pub fn summarize(cfg: &SimConfig, outcomes: &[Result<RepOutcome>]) -> Result<SimSummary> {
    let total = outcomes.len();
    let failed: Vec<&Error> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    if failed.len() * 50 > total {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total,
            first: failed[0].to_string(),
        });
    }
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut warnings = Vec::new();
    if !failed.is_empty() {
        warnings.push(format!(
            "{} of {total} replications failed and were excluded (first: {})",
            failed.len(),
            failed[0]
        ));
    }
    if ok.len() < 2 {
        warnings.push("fewer than two replications: Monte-Carlo SE and RE are not available".into());
    }
    let truth = cfg.theta.flatten();
    let labels = param_labels(cfg.q(), cfg.theta.w_len());
    let methods = cfg.fitted_methods();
    let count = ok.len() as f64;

    let mut summaries: Vec<MethodSummary> = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let draws: Vec<&MethodDraw> = ok.iter().map(|o| &o.draws[mi]).collect();
        let params = labels
            .iter()
            .enumerate()
            .map(|(p, (label, j, k))| {
                let est: Vec<f64> = draws.iter().map(|d| d.estimate[p]).collect();
                let mean = est.iter().sum::<f64>() / count;
                let covered = draws
                    .iter()
                    .filter(|d| d.ci_low[p] <= truth[p] && truth[p] <= d.ci_high[p])
                    .count();
                ParamSummary {
                    label: label.clone(),
                    j: *j,
                    k: *k,
                    truth: truth[p],
                    mean,
                    bias: mean - truth[p],
                    se: math::sample_sd(&est),
                    re: None,
                    cp: covered as f64 / count,
                    mean_reported_se: draws.iter().map(|d| d.se[p]).sum::<f64>() / count,
                }
            })
            .collect();
        summaries.push(MethodSummary {
            method,
            params,
            mean_intr_steps: draws.iter().map(|d| d.intr_steps as f64).sum::<f64>() / count,
        });
    }
    let sl_se: Vec<Option<f64>> = summaries[0].params.iter().map(|p| p.se).collect();
    for s in &mut summaries {
        for (p, base) in s.params.iter_mut().zip(&sl_se) {
            p.re = match (base, p.se) {
                (Some(b), Some(m)) if m > 0.0 => Some((b / m) * (b / m)),
                _ => None,
            };
        }
    }
    Ok(SimSummary {
        name: cfg.name.clone(),
        reps: ok.len(),
        failures: failed.len(),
        methods: summaries,
        warnings,
    })
}

/// Sequential driver; see the command-line crate for the parallel one.
pub fn run(cfg: &SimConfig) -> Result<SimSummary> {
    cfg.validate()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.reps).map(|r| replicate(cfg, r)).collect();
    summarize(cfg, &outcomes)
}

