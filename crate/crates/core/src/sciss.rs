//! Score-induced semi-supervised estimation.
//!
//! The supervised node estimates are corrected by the difference between the
//! unlabeled and labeled means of the projected score `m̂_j(z)`. Variances come
//! from per-subject influence columns, which also feed the ensemble.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::conditional::{projection_jacobian, ConditionalModel};
use crate::data::{Features, LabeledSample, UnlabeledSample};
use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::linalg::{dot, solve_linear, Mat};
use crate::math;
use crate::pipeline::Method;
use crate::supervised::{score_rows, NodewiseFit, SlFit};

/// Normal quantile used for the reported 95% intervals.
pub const Z_95: f64 = 1.96;

/// Per-subject influence contributions, one column per scalar parameter in
/// [`IsingParams::flatten`] order.
///
/// Pair columns hold `½(s_jk + s_kj − m̂_jk − m̂_kj)` (the projection terms
/// vanish for the supervised estimator); node columns hold `s − m̂` for each
/// coordinate of `θ_jj`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceTable {
    pub q: usize,
    pub w_len: usize,
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

impl InfluenceTable {
    pub fn node_index(&self, j: usize, c: usize) -> usize {
        j * self.w_len + c
    }

    pub fn pair_index(&self, j: usize, k: usize) -> usize {
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        self.q * self.w_len + a * (2 * self.q - a - 1) / 2 + (b - a - 1)
    }

    /// Centered `(1/n)` variance of one column.
    pub fn variance(&self, param: usize) -> f64 {
        math::centered_variance(&self.columns[param])
    }

    /// `Ω̂_jk = (1/4)·Var{s_jk + s_kj − m̂_jk − m̂_kj}`.
    pub fn pair_variance(&self, j: usize, k: usize) -> f64 {
        self.variance(self.pair_index(j, k))
    }
}

/// Accepted objective values of one intrinsic-efficiency optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrTrace {
    pub j: usize,
    pub k: usize,
    /// Objective at the starting point followed by every accepted iterate.
    pub objective: Vec<f64>,
}

impl IntrTrace {
    pub fn accepted_steps(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }
}

/// Allocation for one scalar parameter of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    pub param: usize,
    /// Weight per input estimator, zero for dropped members.
    pub alpha: Vec<f64>,
    /// Members removed because their influence columns were collinear.
    pub dropped: Vec<usize>,
    /// The simplex optimum was replaced by the best single member.
    pub vertex: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub node_iterations: Vec<usize>,
    /// A surrogate fit held a linear predictor on its box boundary.
    pub clamped: bool,
    /// The augmented model has more than `n / 5` coefficients per node.
    pub overparameterized: bool,
    pub intr: Vec<IntrTrace>,
    pub ensemble_members: Vec<Method>,
    pub ensemble: Vec<EnsembleWeights>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub n: usize,
    pub theta: IsingParams,
    pub se: IsingParams,
    pub ci_low: IsingParams,
    pub ci_high: IsingParams,
    pub diagnostics: Diagnostics,
    /// Absent for reports read back from files.
    pub influence: Option<InfluenceTable>,
}

impl EstimateReport {
    /// Builds SEs and intervals from influence columns. The supervised
    /// estimator uses the uncentered second moment, everything else the
    /// centered variance.
    pub fn from_influence(
        method: Method,
        theta: IsingParams,
        influence: InfluenceTable,
        centered: bool,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let n = influence.n;
        let se_flat: Vec<f64> = influence
            .columns
            .iter()
            .map(|c| {
                let v = if centered {
                    math::centered_variance(c)
                } else {
                    c.iter().map(|x| x * x).sum::<f64>() / n as f64
                };
                math::sqrt(v / n as f64)
            })
            .collect();
        let mut se = IsingParams::zeros(theta.q(), theta.w_len())?;
        se.unflatten(&se_flat)?;
        let (ci_low, ci_high) = intervals(&theta, &se)?;
        Ok(Self {
            method,
            n,
            theta,
            se,
            ci_low,
            ci_high,
            diagnostics,
            influence: Some(influence),
        })
    }

    /// `(θ̂ − 1.96·SE, θ̂ + 1.96·SE)` for the pair `(j, k)`, or the node
    /// intercept when `j == k`.
    pub fn ci(&self, j: usize, k: usize) -> (f64, f64) {
        (entry(&self.ci_low, j, k), entry(&self.ci_high, j, k))
    }

    pub fn estimate(&self, j: usize, k: usize) -> f64 {
        entry(&self.theta, j, k)
    }

    pub fn std_error(&self, j: usize, k: usize) -> f64 {
        entry(&self.se, j, k)
    }
}

fn entry(p: &IsingParams, j: usize, k: usize) -> f64 {
    if j == k {
        p.node(j)[0]
    } else {
        p.pair(j, k)
    }
}

pub fn intervals(theta: &IsingParams, se: &IsingParams) -> Result<(IsingParams, IsingParams)> {
    let t = theta.flatten();
    let s = se.flatten();
    let mut lo = theta.clone();
    let mut hi = theta.clone();
    lo.unflatten(&t.iter().zip(&s).map(|(a, b)| a - Z_95 * b).collect::<Vec<_>>())?;
    hi.unflatten(&t.iter().zip(&s).map(|(a, b)| a + Z_95 * b).collect::<Vec<_>>())?;
    Ok((lo, hi))
}

fn iterations(fit: &NodewiseFit) -> Vec<usize> {
    fit.nodes.iter().map(|n| n.iterations).collect()
}

/// Influence columns from per-node score rows and (optionally) matching projections.
fn influence_columns(fit: &NodewiseFit, scores: &[Mat], proj: Option<&[Mat]>, n: usize) -> InfluenceTable {
    let layout = fit.layout;
    let q = fit.q();
    let w_len = layout.node_width;
    let value = |j: usize, i: usize, c: usize| scores[j][(i, c)] - proj.map_or(0.0, |p| p[j][(i, c)]);
    let mut columns = Vec::with_capacity(q * w_len + q * (q - 1) / 2);
    for j in 0..q {
        for c in layout.node_block(j) {
            columns.push((0..n).map(|i| value(j, i, c)).collect());
        }
    }
    for j in 0..q {
        for k in j + 1..q {
            let (a, b) = (layout.pair_pos(j, k), layout.pair_pos(k, j));
            columns.push((0..n).map(|i| 0.5 * (value(j, i, a) + value(k, i, b))).collect());
        }
    }
    InfluenceTable { q, w_len, n, columns }
}

/// Supervised report with the variances of Lemma-1 form, `(1/n) Σ s²`.
pub fn report_sl(data: &[LabeledSample], sl: &SlFit, method: Method) -> Result<EstimateReport> {
    let scores: Vec<Mat> = (0..sl.nodes.q()).map(|j| score_rows(data, &sl.nodes, j)).collect();
    let influence = influence_columns(&sl.nodes, &scores, None, data.len());
    let diagnostics = Diagnostics {
        node_iterations: iterations(&sl.nodes),
        ..Diagnostics::default()
    };
    EstimateReport::from_influence(method, sl.theta.clone(), influence, false, diagnostics)
}

/// Scores of every configuration for each node, recomputed only when `w` changes.
struct ScoreCache<'a> {
    fit: &'a NodewiseFit,
    w: Vec<f64>,
    tables: Vec<Mat>,
}

impl<'a> ScoreCache<'a> {
    fn new(fit: &'a NodewiseFit) -> Self {
        Self {
            fit,
            w: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn get(&mut self, w: &[f64]) -> &[Mat] {
        if self.tables.is_empty() || self.w != w {
            self.w = w.to_vec();
            self.tables = (0..self.fit.q()).map(|j| self.fit.config_scores(j, w)).collect();
        }
        &self.tables
    }
}

/// Projected scores for every node at every record, one `records × dim` matrix per node.
fn project_records<M, F>(model: &M, fit: &NodewiseFit, records: &[F]) -> Result<Vec<Mat>>
where
    M: ConditionalModel + ?Sized,
    F: Features,
{
    let q = fit.q();
    let dim = fit.layout.dim();
    let mut out: Vec<Mat> = (0..q).map(|_| Mat::zeros(records.len(), dim)).collect();
    let mut cache = ScoreCache::new(fit);
    for (i, r) in records.iter().enumerate() {
        let dist = model.predict(r.x(), r.w())?;
        let tables = cache.get(r.w());
        for (j, table) in tables.iter().enumerate() {
            let row = out[j].row_mut(i);
            for (c, &p) in dist.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (o, s) in row.iter_mut().zip(table.row(c)) {
                    *o += p * s;
                }
            }
        }
    }
    Ok(out)
}

/// `mean_U(m) − mean_L(m)` per column, both taken relative to the first
/// labeled projection so that a constant projection yields exactly zero.
fn correction(labeled: &Mat, unlabeled: &Mat, c: usize) -> f64 {
    let anchor = labeled[(0, c)];
    let l = math::shifted_mean((0..labeled.rows()).map(|i| labeled[(i, c)]), anchor);
    let u = math::shifted_mean((0..unlabeled.rows()).map(|i| unlabeled[(i, c)]), anchor);
    u - l
}

fn check_samples(labeled: &[LabeledSample], unlabeled: &[UnlabeledSample]) -> Result<()> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeled);
    }
    if unlabeled.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    Ok(())
}

/// SCISS estimate built on a fitted conditional model.
pub fn fit_sciss<M: ConditionalModel + ?Sized>(
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    sl: &SlFit,
    model: &M,
    method: Method,
) -> Result<EstimateReport> {
    check_samples(labeled, unlabeled)?;
    let fit = &sl.nodes;
    let q = fit.q();
    if model.q() != q {
        return Err(Error::DimensionMismatch {
            what: "conditional model nodes",
            expected: q,
            found: model.q(),
        });
    }
    let scores: Vec<Mat> = (0..q).map(|j| score_rows(labeled, fit, j)).collect();
    let proj_l = project_records(model, fit, labeled)?;
    let proj_u = project_records(model, fit, unlabeled)?;
    let stacked: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            fit.nodes[j]
                .coef
                .iter()
                .enumerate()
                .map(|(c, &t)| t + correction(&proj_l[j], &proj_u[j], c))
                .collect()
        })
        .collect();
    let theta = IsingParams::symmetrize(q, fit.layout.node_width, &stacked)?;
    let influence = influence_columns(fit, &scores, Some(&proj_l), labeled.len());
    let diagnostics = Diagnostics {
        node_iterations: iterations(fit),
        ..Diagnostics::default()
    };
    EstimateReport::from_influence(method, theta, influence, true, diagnostics)
}

/// How the intrinsic objective for a pair is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntrTarget {
    /// Variance of the symmetrized residual `s_jk + s_kj − m̂_jk − m̂_kj`; one
    /// optimization serves both orderings.
    #[default]
    Pair,
    /// Variance of `s_jk − m̂_jk` for each node separately; two optimizations.
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrConfig {
    pub max_iters: usize,
    /// Halvings tried on a step that fails to lower the objective.
    pub step_halvings: usize,
    pub target: IntrTarget,
    /// Ridge on the Gauss–Newton system, relative to its largest diagonal entry.
    pub ridge: f64,
}

impl Default for IntrConfig {
    fn default() -> Self {
        Self {
            max_iters: 4,
            step_halvings: 0,
            target: IntrTarget::Pair,
            ridge: 1e-8,
        }
    }
}

/// One `(node, stacked coordinate)` entry entering a residual sum.
type Target = (usize, usize);

struct Residuals {
    r: Vec<f64>,
    /// Row `i` is `∂(Σ m̂)/∂η` for subject `i`.
    jac: Option<Mat>,
}

fn residuals<M: ConditionalModel + ?Sized>(
    model: &M,
    labeled: &[LabeledSample],
    fit: &NodewiseFit,
    scores: &[Mat],
    targets: &[Target],
    with_jac: bool,
) -> Result<Residuals> {
    let np = model.n_params();
    let nconf = 1usize << model.q();
    let mut cache = ScoreCache::new(fit);
    let mut r = Vec::with_capacity(labeled.len());
    let mut jac = with_jac.then(|| Mat::zeros(labeled.len(), np));
    let mut grads = Mat::zeros(nconf, np);
    let mut column = Mat::zeros(nconf, 1);
    for (i, s) in labeled.iter().enumerate() {
        let dist = model.predict(&s.x, &s.w)?;
        let tables = cache.get(&s.w);
        let mut ri = 0.0;
        for &(node, coord) in targets {
            let m: f64 = dist
                .probs()
                .iter()
                .enumerate()
                .map(|(c, p)| p * tables[node][(c, coord)])
                .sum();
            ri += scores[node][(i, coord)] - m;
        }
        r.push(ri);
        if let Some(jac) = jac.as_mut() {
            model.log_weight_gradients(&s.x, &s.w, &mut grads);
            let row = jac.row_mut(i);
            for &(node, coord) in targets {
                for c in 0..nconf {
                    column[(c, 0)] = tables[node][(c, coord)];
                }
                let d = projection_jacobian(&dist, &grads, &column);
                for (o, v) in row.iter_mut().zip(d.row(0)) {
                    *o += v;
                }
            }
        }
    }
    Ok(Residuals { r, jac })
}

fn objective_scale(targets: &[Target]) -> f64 {
    1.0 / (targets.len() * targets.len()) as f64
}

fn pair_targets(fit: &NodewiseFit, j: usize, k: usize) -> [Target; 2] {
    [(j, fit.layout.pair_pos(j, k)), (k, fit.layout.pair_pos(k, j))]
}

fn check_pair(q: usize, j: usize, k: usize) -> Result<()> {
    if j == k || j >= q || k >= q {
        return Err(Error::InvalidConfig(alloc::format!(
            "({j}, {k}) is not an off-diagonal pair for {q} nodes"
        )));
    }
    Ok(())
}

/// `σ̂²_jk(η) = (1/4)·Var_L{ŝ_jk + ŝ_kj − m̂_jk(z; η) − m̂_kj(z; η)}`.
pub fn intrinsic_objective<M: ConditionalModel + Clone>(
    model: &M,
    eta: &[f64],
    labeled: &[LabeledSample],
    fit: &NodewiseFit,
    j: usize,
    k: usize,
) -> Result<f64> {
    check_pair(fit.q(), j, k)?;
    let m = model.with_params(eta)?;
    let scores: Vec<Mat> = (0..fit.q()).map(|node| score_rows(labeled, fit, node)).collect();
    let targets = pair_targets(fit, j, k);
    let res = residuals(&m, labeled, fit, &scores, &targets, false)?;
    Ok(objective_scale(&targets) * math::centered_variance(&res.r))
}

/// Analytic gradient of [`intrinsic_objective`] with respect to `η`.
pub fn intrinsic_gradient<M: ConditionalModel + Clone>(
    model: &M,
    eta: &[f64],
    labeled: &[LabeledSample],
    fit: &NodewiseFit,
    j: usize,
    k: usize,
) -> Result<Vec<f64>> {
    check_pair(fit.q(), j, k)?;
    let m = model.with_params(eta)?;
    let scores: Vec<Mat> = (0..fit.q()).map(|node| score_rows(labeled, fit, node)).collect();
    let targets = pair_targets(fit, j, k);
    let res = residuals(&m, labeled, fit, &scores, &targets, true)?;
    let jac = res.jac.expect("requested");
    let (rc, ac) = centered_system(&res.r, &jac);
    let n = res.r.len() as f64;
    let scale = objective_scale(&targets);
    Ok((0..jac.cols())
        .map(|p| -2.0 * scale * (0..rc.len()).map(|i| rc[i] * ac[(i, p)]).sum::<f64>() / n)
        .collect())
}

fn centered_system(r: &[f64], jac: &Mat) -> (Vec<f64>, Mat) {
    let n = r.len() as f64;
    let rm = r.iter().sum::<f64>() / n;
    let rc: Vec<f64> = r.iter().map(|v| v - rm).collect();
    let mut ac = jac.clone();
    for p in 0..jac.cols() {
        let mean = (0..jac.rows()).map(|i| jac[(i, p)]).sum::<f64>() / n;
        for i in 0..jac.rows() {
            ac[(i, p)] -= mean;
        }
    }
    (rc, ac)
}

/// Gauss–Newton descent on the residual variance, starting at `model`'s
/// parameters. Returns the final model and the accepted objective values.
fn minimize_variance<M: ConditionalModel + Clone>(
    model: &M,
    labeled: &[LabeledSample],
    fit: &NodewiseFit,
    scores: &[Mat],
    targets: &[Target],
    cfg: &IntrConfig,
) -> Result<(M, Vec<f64>)> {
    let scale = objective_scale(targets);
    let mut current = model.clone();
    let mut eta = current.params();
    let mut res = residuals(&current, labeled, fit, scores, targets, true)?;
    let mut f = scale * math::centered_variance(&res.r);
    let mut trace = vec![f];
    for _ in 0..cfg.max_iters {
        let jac = res.jac.take().expect("requested");
        let (rc, ac) = centered_system(&res.r, &jac);
        let np = ac.cols();
        let mut normal = Mat::zeros(np, np);
        let mut rhs = vec![0.0; np];
        for i in 0..ac.rows() {
            let row = ac.row(i);
            normal.add_outer(1.0, row);
            for (b, a) in rhs.iter_mut().zip(row) {
                *b += a * rc[i];
            }
        }
        let ridge = cfg.ridge * normal.max_abs_diagonal();
        if !(ridge > 0.0) {
            break;
        }
        normal.add_diagonal(ridge);
        let Ok(delta) = solve_linear(&normal, &rhs) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.step_halvings {
            let cand: Vec<f64> = eta.iter().zip(&delta).map(|(e, d)| e + step * d).collect();
            let trial = current.with_params(&cand)?;
            if let Ok(r) = residuals(&trial, labeled, fit, scores, targets, false) {
                let ft = scale * math::centered_variance(&r.r);
                if ft < f {
                    accepted = Some((cand, trial, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, trial, ft)) = accepted else {
            break;
        };
        eta = cand;
        current = trial;
        f = ft;
        trace.push(f);
        match residuals(&current, labeled, fit, scores, targets, true) {
            Ok(r) => res = r,
            Err(_) => break,
        }
    }
    Ok((current, trace))
}

/// Mean correction for a single `(node, coordinate)` under `model`.
fn single_projection<M: ConditionalModel + ?Sized>(
    model: &M,
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    fit: &NodewiseFit,
    target: Target,
) -> Result<(Vec<f64>, f64)> {
    let (node, coord) = target;
    let mut cache = ScoreCache::new(fit);
    let mut project = |x: &[f64], w: &[f64]| -> Result<f64> {
        let dist = model.predict(x, w)?;
        let table = &cache.get(w)[node];
        Ok(dist.probs().iter().enumerate().map(|(c, p)| p * table[(c, coord)]).sum())
    };
    let ml = labeled.iter().map(|s| project(&s.x, &s.w)).collect::<Result<Vec<_>>>()?;
    let mu = unlabeled.iter().map(|s| project(&s.x, &s.w)).collect::<Result<Vec<_>>>()?;
    let anchor = ml[0];
    let corr = math::shifted_mean(mu.iter().copied(), anchor) - math::shifted_mean(ml.iter().copied(), anchor);
    Ok((ml, corr))
}

/// Intrinsic-efficient refinement of the listed pairs of a SCISS report.
///
/// Each pair's conditional-model parameters start at the fitted values and
/// move only while the empirical variance strictly decreases. Pairs that see
/// no accepted step keep their SCISS value; node blocks and unlisted pairs are
/// copied from `base`.
pub fn fit_intr<M: ConditionalModel + Clone>(
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    sl: &SlFit,
    model: &M,
    base: &EstimateReport,
    pairs: &[(usize, usize)],
    cfg: &IntrConfig,
) -> Result<EstimateReport> {
    check_samples(labeled, unlabeled)?;
    let fit = &sl.nodes;
    let q = fit.q();
    let base_influence = base
        .influence
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("base report carries no influence table".into()))?;
    let scores: Vec<Mat> = (0..q).map(|j| score_rows(labeled, fit, j)).collect();
    let mut theta = base.theta.clone();
    let mut influence = base_influence.clone();
    let mut diagnostics = base.diagnostics.clone();
    for &(j, k) in pairs {
        check_pair(q, j, k)?;
        let [tj, tk] = pair_targets(fit, j, k);
        let (model_j, model_k, traces) = match cfg.target {
            IntrTarget::Pair => {
                let (m, trace) = minimize_variance(model, labeled, fit, &scores, &[tj, tk], cfg)?;
                (m.clone(), m, vec![IntrTrace { j, k, objective: trace }])
            }
            IntrTarget::Node => {
                let (mj, trace_j) = minimize_variance(model, labeled, fit, &scores, &[tj], cfg)?;
                let (mk, trace_k) = minimize_variance(model, labeled, fit, &scores, &[tk], cfg)?;
                (
                    mj,
                    mk,
                    vec![IntrTrace { j, k, objective: trace_j }, IntrTrace { j: k, k: j, objective: trace_k }],
                )
            }
        };
        let moved = traces.iter().any(|t| t.accepted_steps() > 0);
        diagnostics.intr.extend(traces);
        if !moved {
            continue;
        }
        let (ml_j, corr_j) = single_projection(&model_j, labeled, unlabeled, fit, tj)?;
        let (ml_k, corr_k) = single_projection(&model_k, labeled, unlabeled, fit, tk)?;
        let est_j = fit.nodes[j].coef[tj.1] + corr_j;
        let est_k = fit.nodes[k].coef[tk.1] + corr_k;
        theta.set_pair(j, k, 0.5 * (est_j + est_k));
        let col = influence.pair_index(j, k);
        influence.columns[col] = (0..labeled.len())
            .map(|i| 0.5 * (scores[j][(i, tj.1)] - ml_j[i] + scores[k][(i, tk.1)] - ml_k[i]))
            .collect();
    }
    EstimateReport::from_influence(Method::Intr, theta, influence, true, diagnostics)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Correlations this close to one are treated as duplicate members.
const COLLINEAR: f64 = 1.0 - 1e-9;

fn quad(l: &Mat, a: &[f64]) -> f64 {
    dot(a, &l.mul_vec(a))
}

/// Variance-minimizing simplex weights for covariance `Λ̂`.
///
/// Returns `(α, dropped, vertex)`. Collinear or singular members are dropped
/// one at a time (the later of the most correlated pair); if the projected
/// optimum has larger variance than the best single member, that member is used.
pub fn allocation_weights(lambda: &Mat) -> (Vec<f64>, Vec<usize>, bool) {
    let m = lambda.rows();
    let mut active: Vec<usize> = (0..m).collect();
    let mut dropped = Vec::new();
    let full = |active: &[usize], sub: &[f64]| {
        let mut a = vec![0.0; m];
        for (&i, &v) in active.iter().zip(sub) {
            a[i] = v;
        }
        a
    };
    let best_vertex = |active: &[usize]| {
        let mut best = active[0];
        for &i in active {
            if lambda[(i, i)] < lambda[(best, best)] {
                best = i;
            }
        }
        best
    };
    loop {
        if active.len() == 1 {
            return (full(&active, &[1.0]), dropped, false);
        }
        let k = active.len();
        let scale = active.iter().map(|&i| lambda[(i, i)]).fold(0.0, f64::max);
        if !(scale > 0.0) {
            let b = best_vertex(&active);
            let mut a = vec![0.0; m];
            a[b] = 1.0;
            return (a, dropped, true);
        }
        let mut sub = Mat::zeros(k, k);
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                sub[(r, c)] = lambda[(i, j)] / scale;
            }
        }
        // Most correlated pair among the active members.
        let mut worst = (0.0, 0, 0);
        for r in 0..k {
            for c in r + 1..k {
                let d = sub[(r, r)] * sub[(c, c)];
                let corr = if d > 0.0 { sub[(r, c)].abs() / math::sqrt(d) } else { 1.0 };
                if corr > worst.0 {
                    worst = (corr, r, c);
                }
            }
        }
        let solved = if worst.0 >= COLLINEAR {
            None
        } else {
            solve_linear(&sub, &vec![1.0; k]).ok()
        };
        let Some(x) = solved else {
            dropped.push(active.remove(worst.2));
            continue;
        };
        let total: f64 = x.iter().sum();
        let b = best_vertex(&active);
        if !(total.abs() > 0.0) || !total.is_finite() {
            let mut a = vec![0.0; m];
            a[b] = 1.0;
            return (a, dropped, true);
        }
        let alpha_sub = project_simplex(&x.iter().map(|v| v / total).collect::<Vec<_>>());
        let alpha = full(&active, &alpha_sub);
        if quad(lambda, &alpha) > lambda[(b, b)] {
            let mut a = vec![0.0; m];
            a[b] = 1.0;
            return (a, dropped, true);
        }
        return (alpha, dropped, false);
    }
}

/// Per-parameter convex combination of estimators with allocation weights
/// from the influence covariance on the labeled sample.
pub fn fit_ensemble(members: &[&EstimateReport]) -> Result<EstimateReport> {
    if members.len() < 2 {
        return Err(Error::InvalidConfig("an ensemble needs at least two estimators".into()));
    }
    let tables = members
        .iter()
        .map(|r| {
            r.influence
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("ensemble member carries no influence table".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let first = tables[0];
    for t in &tables[1..] {
        if t.n != first.n || t.columns.len() != first.columns.len() {
            return Err(Error::DimensionMismatch {
                what: "ensemble influence table",
                expected: first.columns.len(),
                found: t.columns.len(),
            });
        }
    }
    let thetas: Vec<Vec<f64>> = members.iter().map(|r| r.theta.flatten()).collect();
    let m = members.len();
    let n = first.n as f64;
    let mut est = vec![0.0; first.columns.len()];
    let mut columns = Vec::with_capacity(first.columns.len());
    let mut weights = Vec::with_capacity(first.columns.len());
    for p in 0..first.columns.len() {
        let cols: Vec<&Vec<f64>> = tables.iter().map(|t| &t.columns[p]).collect();
        let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
        let mut lambda = Mat::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = (0..first.n)
                    .map(|i| (cols[a][i] - means[a]) * (cols[b][i] - means[b]))
                    .sum::<f64>()
                    / n;
                lambda[(a, b)] = v;
                lambda[(b, a)] = v;
            }
        }
        let (alpha, dropped, vertex) = allocation_weights(&lambda);
        est[p] = alpha.iter().zip(&thetas).map(|(a, t)| a * t[p]).sum();
        columns.push((0..first.n).map(|i| alpha.iter().zip(&cols).map(|(a, c)| a * c[i]).sum()).collect());
        weights.push(EnsembleWeights {
            param: p,
            alpha,
            dropped,
            vertex,
        });
    }
    let mut theta = members[0].theta.clone();
    theta.unflatten(&est)?;
    let influence = InfluenceTable {
        columns,
        ..first.clone()
    };
    let diagnostics = Diagnostics {
        ensemble_members: members.iter().map(|r| r.method).collect(),
        ensemble: weights,
        ..Diagnostics::default()
    };
    EstimateReport::from_influence(Method::Ensemble, theta, influence, true, diagnostics)
}

/// Two-sided normal p-value for `θ_A − θ_B` on `(j, k)` from independent samples.
pub fn two_sample_contrast(a: &EstimateReport, b: &EstimateReport, j: usize, k: usize) -> Result<f64> {
    let q = a.theta.q();
    if b.theta.q() != q {
        return Err(Error::DimensionMismatch {
            what: "contrast reports",
            expected: q,
            found: b.theta.q(),
        });
    }
    if j >= q || k >= q {
        return Err(Error::InvalidConfig(alloc::format!("({j}, {k}) is outside a {q}-node graph")));
    }
    Ok(contrast_p_value(a.estimate(j, k), a.std_error(j, k), b.estimate(j, k), b.std_error(j, k)))
}

pub fn contrast_p_value(theta_a: f64, se_a: f64, theta_b: f64, se_b: f64) -> f64 {
    let diff = theta_a - theta_b;
    let se = math::sqrt(se_a * se_a + se_b * se_b);
    if diff == 0.0 {
        return 1.0;
    }
    math::two_sided_normal_p(diff / se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.3, 0.7]), vec![0.3, 0.7]);
        let p = project_simplex(&[1.4, -0.4]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_member_closed_form() {
        let (a, b, c) = (2.0, 3.0, 0.5);
        let l = Mat::from_rows(&[&[a, c], &[c, b]]).unwrap();
        let (alpha, dropped, vertex) = allocation_weights(&l);
        assert!(dropped.is_empty() && !vertex);
        assert!((alpha[0] - (b - c) / (a + b - 2.0 * c)).abs() < 1e-12);
        assert!((alpha[0] + alpha[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_weighting() {
        let l = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.1]]).unwrap();
        let (alpha, _, _) = allocation_weights(&l);
        assert!((alpha[1] - 10.0 / 11.0).abs() < 1e-12);
        assert!(quad(&l, &alpha) <= 0.1);
    }

    #[test]
    fn identical_members_collapse() {
        let l = Mat::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let (alpha, dropped, _) = allocation_weights(&l);
        assert_eq!(dropped, vec![1]);
        assert_eq!(alpha, vec![1.0, 0.0]);
    }

    #[test]
    fn vertex_safeguard() {
        // Unconstrained optimum has a negative weight; after projection it can
        // be worse than the best single member.
        let l = Mat::from_rows(&[&[1.0, 0.99], &[0.99, 4.0]]).unwrap();
        let (alpha, _, _) = allocation_weights(&l);
        assert!(quad(&l, &alpha) <= 1.0 + 1e-12);
    }

    #[test]
    fn contrast_values() {
        assert_eq!(contrast_p_value(0.4, 0.1, 0.4, 0.2), 1.0);
        let p = contrast_p_value(3.29, 1.0, 0.0, 0.0);
        assert!((p - 0.001).abs() < 2e-5);
        let p = contrast_p_value(-1.30, 0.19, -0.65, 0.17);
        assert!((p - 0.0108).abs() < 5e-4, "{p}");
    }
}
