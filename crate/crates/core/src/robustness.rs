//! Monte Carlo experiments on the SVM functional: continuity under weakly
//! convergent perturbations, qualitative robustness at fixed lambda, the
//! failure of robustness when lambda decays with n, and consistency along
//! nested sample paths.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ContaminationModel, ExperimentConfig, ExperimentKind, Family};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, RkhsFunction};
use crate::losses::Loss;
use crate::measures::{
    contaminate, empirical_from, jitter, jitter_inputs, sample, DiscreteMeasure,
};
use crate::prokhorov::{prokhorov_1d, prokhorov_cross, prokhorov_measures};
use crate::solver::{train, SolverOptions, SvmModel};

/// `sum_i w_i L(y_i, f(x_i))`, with `L*` when `shifted`, plus
/// `lambda |f|_H^2` when `lambda` is given.
pub fn risk(
    f: &RkhsFunction,
    p: &DiscreteMeasure,
    loss: &Loss,
    shifted: bool,
    lambda: Option<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (a, w) in p.iter() {
        let t = f.eval(&a.x)?;
        let v = if shifted {
            loss.eval_shifted(&a.x, a.y, t)?
        } else {
            loss.eval(&a.x, a.y, t)?
        };
        total += w * v;
    }
    Ok(total + lambda.map_or(0.0, |l| l * f.norm_sq()))
}

/// Kolmogorov-type sampling allowance for Monte Carlo Prokhorov estimates.
pub fn mc_tolerance(replicates: usize) -> f64 {
    1.36 / (replicates as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PushforwardMode {
    /// Exact Prokhorov distance between the model clouds in `H`.
    HNorm,
    /// Prokhorov distance between the values `f(x*)`.
    Probe(Vec<f64>),
}

/// Prokhorov distance between the empirical distributions of two lists of
/// trained models.
pub fn pushforward_distance(a: &[SvmModel], b: &[SvmModel], mode: &PushforwardMode) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty model list".into()));
    }
    let kernel = a[0].kernel();
    if let Some(m) = a.iter().chain(b).find(|m| m.kernel() != kernel) {
        return Err(Error::KernelMismatch(
            kernel.to_string(),
            m.kernel().to_string(),
        ));
    }
    match mode {
        PushforwardMode::HNorm => {
            let cross: Vec<Vec<f64>> = a
                .par_iter()
                .map(|ma| {
                    b.iter()
                        .map(|mb| ma.function.distance(&mb.function))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let wa = vec![1.0 / a.len() as f64; a.len()];
            let wb = vec![1.0 / b.len() as f64; b.len()];
            Ok(prokhorov_cross(&wa, &wb, &cross).epsilon)
        }
        PushforwardMode::Probe(x) => {
            let va = a.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
            let vb = b.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
            prokhorov_1d(&va, &vb)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "insufficient data")]
    InsufficientData,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::InsufficientData => "insufficient data",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Predicate {
    fn new(name: impl Into<String>, verdict: Verdict, detail: impl Into<String>) -> Self {
        Predicate {
            name: name.into(),
            verdict,
            detail: detail.into(),
        }
    }
}

/// One `(series, n, delta)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub series: String,
    pub n: usize,
    pub delta: f64,
    pub lambda: f64,
    pub d_pro_h: Option<f64>,
    pub d_pro_probe: Option<f64>,
    pub med_h_dist: Option<f64>,
    pub med_sup_dist: Option<f64>,
    pub risk_gap: Option<f64>,
    pub certified: usize,
    pub total: usize,
    pub certified_frac: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl CellRecord {
    fn new(series: &str, n: usize, delta: f64, lambda: f64) -> Self {
        CellRecord {
            series: series.to_string(),
            n,
            delta,
            lambda,
            d_pro_h: None,
            d_pro_probe: None,
            med_h_dist: None,
            med_sup_dist: None,
            risk_gap: None,
            certified: 0,
            total: 0,
            certified_frac: 0.0,
            extra: BTreeMap::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn fully_certified(&self) -> bool {
        self.total > 0 && self.certified == self.total
    }

    fn count(&mut self, certified: usize, total: usize) {
        self.certified = certified;
        self.total = total;
        self.certified_frac = if total == 0 {
            0.0
        } else {
            certified as f64 / total as f64
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lipschitz: f64,
    pub kernel_sup: f64,
    /// `|L|_1 |k|_inf / lambda` for fixed lambda.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bound: Option<f64>,
    pub mc_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_half: Option<f64>,
    /// `|f~|_H^2` of the interpolant with `f~(x0) = 0`, `f~(x1) = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_tilde_norm_sq: Option<f64>,
    /// Sample size beyond which `lambda_n |f~|^2 < (delta/2) L(x1, 1, gamma)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_star: Vec<DeltaValue>,
    /// Data-space Prokhorov distance between the base and perturbed measures.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_pro_data: Vec<DeltaValue>,
}

/// Gaps along one nested sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub certified: bool,
    /// `|f_n - f_P|_H`
    pub h_dist: Option<f64>,
    /// sup-distance on the probes
    pub sup_dist: Option<f64>,
    /// regularized shifted risk gap
    pub reg_risk_gap: Option<f64>,
    /// shifted risk gap
    pub risk_gap: Option<f64>,
    /// `lambda (|f_n|^2 - |f_P|^2)`
    pub penalty_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPath {
    pub seed: u64,
    pub rows: Vec<GapRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub constants: Constants,
    pub cells: Vec<CellRecord>,
    pub predicates: Vec<Predicate>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<ConsistencyPath>,
}

impl RobustnessReport {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn series(&self, name: &str) -> impl Iterator<Item = &CellRecord> {
        let name = name.to_string();
        self.cells.iter().filter(move |c| c.series == name)
    }

    /// Combines predicate verdicts: any failure fails; no predicates or an
    /// undecided one gives "insufficient data".
    pub fn overall(predicates: &[Predicate], cells: &[CellRecord]) -> Verdict {
        if cells.is_empty() || predicates.is_empty() {
            return Verdict::InsufficientData;
        }
        if predicates.iter().any(|p| p.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if predicates
            .iter()
            .any(|p| p.verdict == Verdict::InsufficientData)
        {
            Verdict::InsufficientData
        } else {
            Verdict::Pass
        }
    }
}

/// Wall-clock seconds per cell, kept apart from the report so the report
/// stays reproducible byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub cells: Vec<CellTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub series: String,
    pub n: usize,
    pub delta: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RobustnessReport,
    pub timings: Timings,
}

/// Runs the experiment selected by `config.kind`. Parallel work uses the
/// current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    match config.kind {
        ExperimentKind::Continuity => run_continuity(config),
        ExperimentKind::QualitativeRobustness => run_qualitative_robustness(config),
        ExperimentKind::LambdaDecay => run_lambda_decay(config),
        ExperimentKind::Consistency => run_consistency(config),
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6}"))
}

/// Shared state of one experiment run.
struct Ctx {
    cfg: ExperimentConfig,
    loss: Loss,
    kernel: Kernel,
    base: DiscreteMeasure,
    contaminant: Option<DiscreteMeasure>,
    probes: Vec<Vec<f64>>,
    probe: Vec<f64>,
    opts: SolverOptions,
    k_inf: f64,
    timings: Timings,
    started: Instant,
}

type Fit = std::result::Result<SvmModel, String>;

impl Ctx {
    fn new(config: &ExperimentConfig, kind: ExperimentKind) -> Result<Self> {
        if config.kind != kind {
            return Err(Error::config(
                "kind",
                format!("expected {kind}, got {}", config.kind),
            ));
        }
        let cfg = config.clone().validate()?;
        let kernel = cfg.bounded_kernel()?;
        let k_inf = kernel.sup_norm()?;
        let base = cfg.base()?;
        let contaminant = cfg.contaminant()?;
        Ok(Ctx {
            loss: cfg.loss,
            kernel,
            base,
            contaminant,
            probes: cfg.probes.clone().unwrap_or_default(),
            probe: cfg.probe.clone().unwrap_or_default(),
            opts: cfg.solver.clone(),
            k_inf,
            timings: Timings::default(),
            started: Instant::now(),
            cfg,
        })
    }

    fn seed(&self, job: u64) -> u64 {
        self.cfg.base_seed.wrapping_add(job)
    }

    fn fit(&self, m: &DiscreteMeasure, lambda: f64) -> Result<Fit> {
        match train(m, &self.loss, &self.kernel, lambda, &self.opts) {
            Ok(model) => Ok(Ok(model)),
            Err(e @ Error::NonConvergence { .. }) => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        }
    }

    fn reference(&self, lambda: f64) -> Result<SvmModel> {
        train(&self.base, &self.loss, &self.kernel, lambda, &self.opts)
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: self.loss.lipschitz(),
            kernel_sup: self.k_inf,
            h_bound: self
                .cfg
                .lambda
                .map(|l| self.loss.lipschitz() * self.k_inf / l),
            mc_tolerance: mc_tolerance(self.cfg.replicates),
            c: None,
            c_half: None,
            f_tilde_norm_sq: None,
            n_star: Vec::new(),
            d_pro_data: Vec::new(),
        }
    }

    fn time_cell(&mut self, cell: &CellRecord, since: Instant) {
        self.timings.cells.push(CellTiming {
            series: cell.series.clone(),
            n: cell.n,
            delta: cell.delta,
            seconds: since.elapsed().as_secs_f64(),
        });
    }

    fn finish(
        mut self,
        constants: Constants,
        cells: Vec<CellRecord>,
        predicates: Vec<Predicate>,
        paths: Vec<ConsistencyPath>,
    ) -> Outcome {
        self.timings.total_seconds = self.started.elapsed().as_secs_f64();
        let verdict = RobustnessReport::overall(&predicates, &cells);
        Outcome {
            report: RobustnessReport {
                kind: self.cfg.kind,
                config: self.cfg,
                constants,
                cells,
                predicates,
                verdict,
                paths,
            },
            timings: self.timings,
        }
    }

    /// Trains on `replicates` draws of size `n` from `m`; job seeds are
    /// `first_job + r`.
    fn replicate_fits(
        &self,
        m: &DiscreteMeasure,
        n: usize,
        lambda: f64,
        first_job: u64,
    ) -> Result<Vec<Fit>> {
        (0..self.cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let data = sample(m, n, self.seed(first_job + r))?;
                self.fit(&empirical_from(&data)?, lambda)
            })
            .collect()
    }
}

fn split(fits: Vec<Fit>, diagnostics: &mut Vec<String>) -> Vec<SvmModel> {
    let mut models = Vec::with_capacity(fits.len());
    for f in fits {
        match f {
            Ok(m) => models.push(m),
            Err(msg) => {
                if !diagnostics.contains(&msg) {
                    diagnostics.push(msg);
                }
            }
        }
    }
    models
}

/// Distances of `models` from `reference`: (H, sup on probes, |shifted risk gap on p|).
fn distances_to(
    ctx: &Ctx,
    models: &[SvmModel],
    reference: &SvmModel,
    p: &DiscreteMeasure,
) -> Result<Vec<(f64, f64, f64)>> {
    let ref_risk = risk(&reference.function, p, &ctx.loss, true, None)?;
    models
        .par_iter()
        .map(|m| {
            Ok((
                m.function.distance(&reference.function)?,
                m.function.sup_distance(&reference.function, &ctx.probes)?,
                (risk(&m.function, p, &ctx.loss, true, None)? - ref_risk).abs(),
            ))
        })
        .collect()
}

/// Weakly convergent sequences `P_m => P_0` (shrinking jitter and/or
/// empirical measures of growing samples) and the distance of `f_{P_m}` from
/// `f_{P_0}`.
pub fn run_continuity(config: &ExperimentConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(config, ExperimentKind::Continuity)?;
    let spec = ctx.cfg.continuity.unwrap_or_default();
    let lambda = ctx.cfg.lambda_at(0);
    let reference = ctx.reference(lambda)?;
    let families: Vec<Family> = match spec.family {
        Family::Both => vec![Family::Jitter, Family::Empirical],
        f => vec![f],
    };
    let grid = ctx.cfg.n_grid.clone();
    let reps = ctx.cfg.replicates as u64;
    let mut cells = Vec::new();
    let mut embedding_ok = true;
    let mut embedding_worst = 0.0f64;
    for (fi, family) in families.iter().enumerate() {
        let series = match family {
            Family::Jitter => "jitter",
            _ => "empirical",
        };
        for (mi, &m) in grid.iter().enumerate() {
            let t0 = Instant::now();
            let first = ((fi * grid.len() + mi) as u64) * reps;
            let fits: Vec<Fit> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let seed = ctx.seed(first + r);
                    let pm = match family {
                        Family::Jitter => {
                            let s = spec.scale(m);
                            if ctx.loss.is_classification() {
                                jitter_inputs(&ctx.base, s, seed)?
                            } else {
                                jitter(&ctx.base, s, seed)?
                            }
                        }
                        _ => empirical_from(&sample(&ctx.base, m, seed)?)?,
                    };
                    ctx.fit(&pm, lambda)
                })
                .collect::<Result<_>>()?;
            let mut cell = CellRecord::new(series, m, 0.0, lambda);
            let total = fits.len();
            let models = split(fits, &mut cell.diagnostics);
            cell.count(models.len(), total);
            let d = distances_to(&ctx, &models, &reference, &ctx.base)?;
            for &(h, s, _) in &d {
                embedding_worst = embedding_worst.max(s - ctx.k_inf * h);
                if s > ctx.k_inf * h + 1e-12 {
                    embedding_ok = false;
                }
            }
            cell.med_h_dist = median(d.iter().map(|x| x.0).collect());
            cell.med_sup_dist = median(d.iter().map(|x| x.1).collect());
            cell.risk_gap = median(d.iter().map(|x| x.2).collect());
            if *family == Family::Jitter {
                cell.extra.insert("scale".into(), spec.scale(m));
            }
            ctx.time_cell(&cell, t0);
            cells.push(cell);
        }
    }

    let bound = ctx.loss.lipschitz() * ctx.k_inf / lambda;
    let mut predicates = Vec::new();
    for family in &families {
        let series = match family {
            Family::Jitter => "jitter",
            _ => "empirical",
        };
        let meds: Vec<f64> = cells
            .iter()
            .filter(|c| c.series == series && c.fully_certified())
            .filter_map(|c| c.med_h_dist)
            .collect();
        let complete = meds.len() == grid.len();
        let decreasing = meds.windows(2).all(|w| w[1] < w[0]);
        let detail = format!(
            "medians {:?}",
            meds.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        );
        predicates.push(Predicate::new(
            format!("{series}: median H-distance strictly decreasing"),
            if complete {
                Verdict::of(decreasing)
            } else {
                Verdict::InsufficientData
            },
            detail,
        ));
        let limit = spec.final_fraction * bound;
        let last = meds.last().copied();
        predicates.push(Predicate::new(
            format!(
                "{series}: final median below {} of the H-norm bound",
                spec.final_fraction
            ),
            match last {
                Some(v) if complete => Verdict::of(v < limit),
                _ => Verdict::InsufficientData,
            },
            format!("final {} vs limit {limit:.6}", fmt_opt(last)),
        ));
    }
    predicates.push(Predicate::new(
        "sup-distance <= |k|_inf * H-distance",
        Verdict::of(embedding_ok),
        format!("largest excess {embedding_worst:.3e}"),
    ));
    let constants = ctx.constants();
    Ok(ctx.finish(constants, cells, predicates, Vec::new()))
}

/// The perturbed measure for contamination level `delta`.
fn perturbed(ctx: &Ctx, delta: f64, job: u64) -> Result<DiscreteMeasure> {
    let model = ctx
        .cfg
        .contamination
        .as_ref()
        .map(|c| c.model)
        .unwrap_or_default();
    match model {
        ContaminationModel::Mixture => {
            let q = ctx
                .contaminant
                .as_ref()
                .ok_or_else(|| Error::config("contamination.contaminant", "missing"))?;
            contaminate(&ctx.base, q, delta)
        }
        ContaminationModel::Jitter => {
            if ctx.loss.is_classification() {
                jitter_inputs(&ctx.base, delta, ctx.seed(job))
            } else {
                jitter(&ctx.base, delta, ctx.seed(job))
            }
        }
    }
}

struct PairCell {
    cell: CellRecord,
    base_models: Vec<SvmModel>,
    pert_models: Vec<SvmModel>,
}

/// Trains both branches of one `(n, delta)` cell and fills the pushforward
/// distances.
#[allow(clippy::too_many_arguments)]
fn pair_cell(
    ctx: &Ctx,
    series: &str,
    n: usize,
    delta: f64,
    lambda: f64,
    perturbed_measure: &DiscreteMeasure,
    first_job: u64,
    reference: &SvmModel,
) -> Result<PairCell> {
    let reps = ctx.cfg.replicates as u64;
    let base_fits = ctx.replicate_fits(&ctx.base, n, lambda, first_job)?;
    let pert_fits = ctx.replicate_fits(perturbed_measure, n, lambda, first_job + reps)?;
    let mut cell = CellRecord::new(series, n, delta, lambda);
    let total = base_fits.len() + pert_fits.len();
    let base_models = split(base_fits, &mut cell.diagnostics);
    let pert_models = split(pert_fits, &mut cell.diagnostics);
    cell.count(base_models.len() + pert_models.len(), total);
    if !base_models.is_empty() && !pert_models.is_empty() {
        cell.d_pro_h = Some(pushforward_distance(
            &base_models,
            &pert_models,
            &PushforwardMode::HNorm,
        )?);
        cell.d_pro_probe = Some(pushforward_distance(
            &base_models,
            &pert_models,
            &PushforwardMode::Probe(ctx.probe.clone()),
        )?);
    }
    let d = distances_to(ctx, &pert_models, reference, &ctx.base)?;
    cell.med_h_dist = median(d.iter().map(|x| x.0).collect());
    cell.med_sup_dist = median(d.iter().map(|x| x.1).collect());
    cell.risk_gap = median(d.iter().map(|x| x.2).collect());
    let max_norm = base_models
        .iter()
        .chain(&pert_models)
        .map(|m| m.norm())
        .fold(0.0f64, f64::max);
    cell.extra.insert("max_norm".into(), max_norm);
    Ok(PairCell {
        cell,
        base_models,
        pert_models,
    })
}

/// Sup over the grid of the certified cells' H-mode distances, per delta
/// (ascending); `None` when some delta has no certified cell.
fn sup_by_delta<'a>(
    cells: impl Iterator<Item = &'a CellRecord>,
    deltas: &[f64],
) -> Vec<(f64, Option<f64>)> {
    let cells: Vec<&CellRecord> = cells.collect();
    let mut ds = deltas.to_vec();
    ds.sort_by(f64::total_cmp);
    ds.into_iter()
        .map(|d| {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.delta == d && c.fully_certified())
                .filter_map(|c| c.d_pro_h)
                .collect();
            (d, vals.into_iter().reduce(f64::max))
        })
        .collect()
}

/// Pushforward distances between `SVM_n(P^n)` and `SVM_n(P'^n)` over an
/// `(n, delta)` grid at fixed lambda.
pub fn run_qualitative_robustness(config: &ExperimentConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(config, ExperimentKind::QualitativeRobustness)?;
    let deltas = ctx
        .cfg
        .contamination
        .as_ref()
        .map(|c| c.delta.clone())
        .unwrap_or_default();
    let grid = ctx.cfg.n_grid.clone();
    let reps = ctx.cfg.replicates as u64;
    let tol = mc_tolerance(ctx.cfg.replicates);
    let lambda = ctx.cfg.lambda_at(0);
    let reference = ctx.reference(lambda)?;
    let h_bound = ctx.loss.lipschitz() * ctx.k_inf / lambda;
    let jobs_per_grid = (grid.len() * deltas.len()) as u64 * 2 * reps;
    let measures: Vec<DiscreteMeasure> = deltas
        .iter()
        .enumerate()
        .map(|(di, &d)| perturbed(&ctx, d, jobs_per_grid + di as u64))
        .collect::<Result<_>>()?;

    let mut constants = ctx.constants();
    for (d, m) in deltas.iter().zip(&measures) {
        if m.dim() == ctx.base.dim() {
            constants.d_pro_data.push(DeltaValue {
                delta: *d,
                value: prokhorov_measures(&ctx.base, m)?.epsilon,
            });
        }
    }

    let mut cells = Vec::new();
    let mut bound_ok = true;
    let mut probe_ok = true;
    let lip = ctx.k_inf.max(1.0);
    for (ni, &n) in grid.iter().enumerate() {
        for (di, &delta) in deltas.iter().enumerate() {
            let t0 = Instant::now();
            let first = ((ni * deltas.len() + di) as u64) * 2 * reps;
            let pc = pair_cell(
                &ctx,
                "fixed-lambda",
                n,
                delta,
                lambda,
                &measures[di],
                first,
                &reference,
            )?;
            let cell = pc.cell;
            if pc
                .base_models
                .iter()
                .chain(&pc.pert_models)
                .any(|m| m.norm() > h_bound + 1e-9)
            {
                bound_ok = false;
            }
            if let (Some(h), Some(p)) = (cell.d_pro_h, cell.d_pro_probe) {
                if p > lip * h + 1e-12 {
                    probe_ok = false;
                }
            }
            ctx.time_cell(&cell, t0);
            cells.push(cell);
        }
    }

    let sups = sup_by_delta(cells.iter(), &deltas);
    let mut predicates = Vec::new();
    let complete = sups.iter().all(|s| s.1.is_some());
    let vals: Vec<f64> = sups.iter().filter_map(|s| s.1).collect();
    let monotone = vals
        .iter()
        .enumerate()
        .all(|(k, v)| vals[..k].iter().all(|u| *v >= u - tol));
    predicates.push(Predicate::new(
        "sup_n d_pro non-decreasing in delta",
        if complete {
            Verdict::of(monotone)
        } else {
            Verdict::InsufficientData
        },
        format!(
            "sup_n d_pro by delta: {}; tolerance {tol:.4}",
            sups.iter()
                .map(|(d, v)| format!("{d}: {}", fmt_opt(*v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));
    if let Some((d0, v0)) = sups.first() {
        if *d0 == 0.0 {
            predicates.push(Predicate::new(
                "delta = 0 below Monte Carlo tolerance",
                match v0 {
                    Some(v) => Verdict::of(*v < tol),
                    None => Verdict::InsufficientData,
                },
                format!("{} vs {tol:.4}", fmt_opt(*v0)),
            ));
        }
    }
    predicates.push(Predicate::new(
        "every model within the H-norm bound",
        Verdict::of(bound_ok),
        format!("bound {h_bound:.6}"),
    ));
    predicates.push(Predicate::new(
        "probe distance <= max(1, |k|_inf) * H distance",
        Verdict::of(probe_ok),
        String::new(),
    ));
    Ok(ctx.finish(constants, cells, predicates, Vec::new()))
}

/// The two-point interpolant `f~` with `f~(x0) = 0`, `f~(x1) = 1`; returns
/// its squared norm.
pub fn interpolant_norm_sq(kernel: &Kernel, x0: &[f64], x1: &[f64]) -> Result<f64> {
    let k = DMatrix::from_row_slice(
        2,
        2,
        &[
            kernel.eval(x0, x0)?,
            kernel.eval(x0, x1)?,
            kernel.eval(x1, x0)?,
            kernel.eval(x1, x1)?,
        ],
    );
    let beta = k
        .lu()
        .solve(&DVector::from_column_slice(&[0.0, 1.0]))
        .ok_or_else(|| {
            Error::config(
                "lambda_decay",
                "x0 and x1 cannot be separated by the kernel",
            )
        })?;
    Ok(beta[1])
}

/// The counterexample with `lambda_n -> 0`: `P_0 = delta_(x0, 0)` against
/// `P_delta = (1 - delta) P_0 + delta delta_(x1, 1)`, with the same cells
/// rerun at the fixed `lambda` of the smallest grid size as a control.
pub fn run_lambda_decay(config: &ExperimentConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(config, ExperimentKind::LambdaDecay)?;
    let ld = ctx.cfg.lambda_decay.clone().expect("validated");
    let schedule = ctx.cfg.lambda_schedule.expect("validated");
    let deltas = ctx
        .cfg
        .contamination
        .as_ref()
        .map(|c| c.delta.clone())
        .unwrap_or_default();
    let grid = ctx.cfg.n_grid.clone();
    let reps = ctx.cfg.replicates as u64;
    let tol = mc_tolerance(ctx.cfg.replicates);
    let c = (ld.gamma / ctx.k_inf).min(1.0);
    let f_tilde = interpolant_norm_sq(&ctx.kernel, &ld.x0, &ld.x1)?;
    let loss_at_gamma = ctx.loss.value(1.0, ld.gamma);

    let mut constants = ctx.constants();
    constants.c = Some(c);
    constants.c_half = Some(c / 2.0);
    constants.f_tilde_norm_sq = Some(f_tilde);
    let measures: Vec<DiscreteMeasure> = deltas
        .iter()
        .map(|&d| perturbed(&ctx, d, 0))
        .collect::<Result<_>>()?;
    for (&d, m) in deltas.iter().zip(&measures) {
        constants.d_pro_data.push(DeltaValue {
            delta: d,
            value: prokhorov_measures(&ctx.base, m)?.epsilon,
        });
        if d > 0.0 && loss_at_gamma > 0.0 {
            let n_star = (schedule.scale * f_tilde / (0.5 * d * loss_at_gamma))
                .powf(1.0 / schedule.exponent);
            constants.n_star.push(DeltaValue {
                delta: d,
                value: n_star,
            });
        }
    }

    let fixed_lambda = schedule.at(grid[0]);
    let mut cells = Vec::new();
    let mut base_max = 0.0f64;
    for (si, series) in ["lambda-decay", "fixed-lambda"].iter().enumerate() {
        for (ni, &n) in grid.iter().enumerate() {
            let lambda = if si == 0 {
                schedule.at(n)
            } else {
                fixed_lambda
            };
            let reference = ctx.reference(lambda)?;
            for (di, &delta) in deltas.iter().enumerate() {
                let t0 = Instant::now();
                let first = (((si * grid.len() + ni) * deltas.len() + di) as u64) * 2 * reps;
                let pc = pair_cell(
                    &ctx,
                    series,
                    n,
                    delta,
                    lambda,
                    &measures[di],
                    first,
                    &reference,
                )?;
                let mut cell = pc.cell;
                let bm = pc
                    .base_models
                    .iter()
                    .map(|m| m.norm())
                    .fold(0.0f64, f64::max);
                base_max = base_max.max(bm);
                cell.extra.insert("base_max_norm".into(), bm);
                if !pc.pert_models.is_empty() {
                    let hits = pc.pert_models.iter().filter(|m| m.norm() >= c).count();
                    cell.extra
                        .insert("q".into(), hits as f64 / pc.pert_models.len() as f64);
                }
                ctx.time_cell(&cell, t0);
                cells.push(cell);
            }
        }
    }

    let mut predicates = Vec::new();
    let base_complete = cells.iter().all(|c| c.fully_certified());
    predicates.push(Predicate::new(
        "P0 branch yields the zero model",
        if base_complete || base_max > 1e-12 {
            Verdict::of(base_max <= 1e-12)
        } else {
            Verdict::InsufficientData
        },
        format!("largest norm {base_max:.3e}"),
    ));
    let lower = c / 2.0 - tol;
    let mut reach = Vec::new();
    let mut implied = Vec::new();
    let mut control = Vec::new();
    for (di, &d) in deltas.iter().enumerate() {
        let decay: Vec<&CellRecord> = cells
            .iter()
            .filter(|x| x.series == "lambda-decay" && x.delta == d && x.fully_certified())
            .collect();
        let hit: Vec<&&CellRecord> = decay
            .iter()
            .filter(|x| x.extra.get("q").is_some_and(|q| *q >= 0.5))
            .collect();
        reach.push((d, hit.first().map(|x| x.n)));
        let data = constants.d_pro_data[di].value;
        let ok = !hit.is_empty()
            && data <= d + 1e-12
            && hit.iter().all(|x| x.d_pro_h.is_some_and(|v| v >= lower));
        implied.push((
            d,
            ok,
            hit.iter()
                .map(|x| x.d_pro_h.unwrap_or(f64::NAN))
                .fold(f64::NAN, f64::min),
            data,
        ));
        let ctrl = sup_by_delta(cells.iter().filter(|x| x.series == "fixed-lambda"), &[d]);
        control.push((d, ctrl[0].1));
    }
    let all_cert = cells.iter().all(|c| c.fully_certified());
    let undecided = |ok: bool| {
        if ok || all_cert {
            Verdict::of(ok)
        } else {
            Verdict::InsufficientData
        }
    };
    predicates.push(Predicate::new(
        "some n reaches q >= 1/2 for every delta",
        undecided(reach.iter().all(|r| r.1.is_some())),
        reach
            .iter()
            .map(|(d, n)| {
                format!(
                    "delta {d}: first n {}",
                    n.map_or("none".into(), |v| v.to_string())
                )
            })
            .collect::<Vec<_>>()
            .join(", "),
    ));
    predicates.push(Predicate::new(
        "implied pushforward bound",
        undecided(implied.iter().all(|x| x.1)),
        implied
            .iter()
            .map(|(d, _, v, data)| {
                format!("delta {d}: min d_pro where q >= 1/2 = {v:.4} vs {lower:.4}; d_pro(P0, P_delta) = {data:.4}")
            })
            .collect::<Vec<_>>()
            .join("; "),
    ));
    let ctrl_ok = control.iter().all(|(_, v)| v.is_some_and(|x| x < lower));
    predicates.push(Predicate::new(
        "fixed-lambda control stays below the decay lower bound",
        if control.iter().all(|x| x.1.is_some()) {
            Verdict::of(ctrl_ok)
        } else {
            Verdict::InsufficientData
        },
        control
            .iter()
            .map(|(d, v)| format!("delta {d}: sup_n d_pro {} vs {lower:.4}", fmt_opt(*v)))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    Ok(ctx.finish(constants, cells, predicates, Vec::new()))
}

/// Nested sample paths `D_100 < D_200 < ...` per seed, and the four gaps
/// between `f_{D_n}` and `f_P`.
pub fn run_consistency(config: &ExperimentConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(config, ExperimentKind::Consistency)?;
    let grid = ctx.cfg.n_grid.clone();
    let lambda = ctx.cfg.lambda_at(0);
    let reference = ctx.reference(lambda)?;
    let ref_risk = risk(&reference.function, &ctx.base, &ctx.loss, true, None)?;
    let ref_reg = risk(
        &reference.function,
        &ctx.base,
        &ctx.loss,
        true,
        Some(lambda),
    )?;
    let ref_norm_sq = reference.function.norm_sq();
    let n_max = *grid.last().unwrap();
    let t0 = Instant::now();

    let paths: Vec<(ConsistencyPath, Vec<String>)> = (0..ctx.cfg.replicates as u64)
        .into_par_iter()
        .map(|s| {
            let seed = ctx.seed(s);
            let data = sample(&ctx.base, n_max, seed)?;
            let mut rows = Vec::new();
            let mut diags = Vec::new();
            for &n in &grid {
                let fit = ctx.fit(&empirical_from(&data[..n])?, lambda)?;
                let row = match fit {
                    Ok(m) => {
                        let f = &m.function;
                        GapRow {
                            n,
                            certified: true,
                            h_dist: Some(f.distance(&reference.function)?),
                            sup_dist: Some(f.sup_distance(&reference.function, &ctx.probes)?),
                            reg_risk_gap: Some(
                                risk(f, &ctx.base, &ctx.loss, true, Some(lambda))? - ref_reg,
                            ),
                            risk_gap: Some(risk(f, &ctx.base, &ctx.loss, true, None)? - ref_risk),
                            penalty_gap: Some(lambda * (f.norm_sq() - ref_norm_sq)),
                        }
                    }
                    Err(msg) => {
                        diags.push(format!("seed {seed}, n {n}: {msg}"));
                        GapRow {
                            n,
                            certified: false,
                            h_dist: None,
                            sup_dist: None,
                            reg_risk_gap: None,
                            risk_gap: None,
                            penalty_gap: None,
                        }
                    }
                };
                rows.push(row);
            }
            Ok((ConsistencyPath { seed, rows }, diags))
        })
        .collect::<Result<_>>()?;
    let (paths, diags): (Vec<ConsistencyPath>, Vec<Vec<String>>) = paths.into_iter().unzip();

    let mut cells = Vec::new();
    for (ni, &n) in grid.iter().enumerate() {
        let rows: Vec<&GapRow> = paths
            .iter()
            .map(|p| &p.rows[ni])
            .filter(|r| r.certified)
            .collect();
        let mut cell = CellRecord::new("path", n, 0.0, lambda);
        cell.count(rows.len(), paths.len());
        cell.med_h_dist = median(rows.iter().filter_map(|r| r.h_dist).collect());
        cell.med_sup_dist = median(rows.iter().filter_map(|r| r.sup_dist).collect());
        cell.risk_gap = median(rows.iter().filter_map(|r| r.reg_risk_gap).collect());
        if let Some(v) = median(
            rows.iter()
                .filter_map(|r| r.risk_gap.map(f64::abs))
                .collect(),
        ) {
            cell.extra.insert("med_abs_shifted_risk_gap".into(), v);
        }
        cell.diagnostics = diags
            .iter()
            .flatten()
            .filter(|d| d.ends_with(&format!("n {n}")) || d.contains(&format!("n {n}:")))
            .cloned()
            .collect();
        cells.push(cell);
    }
    ctx.timings.cells.push(CellTiming {
        series: "path".into(),
        n: n_max,
        delta: 0.0,
        seconds: t0.elapsed().as_secs_f64(),
    });

    let abs_gaps = |r: &GapRow| -> Option<[f64; 4]> {
        Some([
            r.h_dist?,
            r.sup_dist?,
            r.reg_risk_gap?.abs(),
            r.risk_gap?.abs(),
        ])
    };
    let mut usable = 0usize;
    let mut improved = 0usize;
    for p in &paths {
        if let (Some(first), Some(last)) = (abs_gaps(&p.rows[0]), abs_gaps(p.rows.last().unwrap()))
        {
            usable += 1;
            if (0..4).all(|i| last[i] < first[i]) {
                improved += 1;
            }
        }
    }
    let needed = (0.9 * paths.len() as f64).ceil() as usize;
    let mut predicates = vec![Predicate::new(
        "all four gaps shrink from n_min to n_max in >= 90% of seeds",
        if usable == paths.len() || improved >= needed {
            Verdict::of(improved >= needed)
        } else {
            Verdict::InsufficientData
        },
        format!("{improved} of {} seeds (need {needed})", paths.len()),
    )];

    let mut worst_identity = 0.0f64;
    let mut worst_lipschitz = f64::NEG_INFINITY;
    for r in paths.iter().flat_map(|p| &p.rows) {
        if let (Some(c), Some(d), Some(pen), Some(b)) =
            (r.reg_risk_gap, r.risk_gap, r.penalty_gap, r.sup_dist)
        {
            worst_identity = worst_identity.max((c - (d + pen)).abs());
            worst_lipschitz = worst_lipschitz.max(d.abs() - ctx.loss.lipschitz() * b);
        }
    }
    predicates.push(Predicate::new(
        "regularized gap = risk gap + lambda * norm^2 difference",
        Verdict::of(worst_identity <= 1e-10),
        format!("largest deviation {worst_identity:.3e}"),
    ));
    predicates.push(Predicate::new(
        "risk gap <= |L|_1 * sup-distance",
        Verdict::of(worst_lipschitz <= 1e-12),
        format!("largest excess {worst_lipschitz:.3e}"),
    ));
    let meds: Vec<Option<f64>> = cells.iter().map(|c| c.med_h_dist).collect();
    let all_cert = cells.iter().all(|c| c.fully_certified());
    let mono = meds
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a));
    predicates.push(Predicate::new(
        "median H-distance decreasing along the grid",
        if all_cert {
            Verdict::of(mono)
        } else {
            Verdict::InsufficientData
        },
        format!(
            "medians {:?}",
            meds.iter().map(|v| fmt_opt(*v)).collect::<Vec<_>>()
        ),
    ));
    let constants = ctx.constants();
    Ok(ctx.finish(constants, cells, predicates, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use crate::measures::Atom;
    use crate::solver::SolverOptions;

    fn rbf() -> Kernel {
        Kernel::rbf(1.0).unwrap()
    }

    #[test]
    fn risk_examples() {
        let p = DiscreteMeasure::new(
            vec![Atom::new(vec![0.0], 0.5), Atom::new(vec![1.0], -0.25)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let zero = RkhsFunction::zero(rbf());
        let loss = Loss::absolute();
        assert_eq!(risk(&zero, &p, &loss, true, None).unwrap(), 0.0);
        assert!((risk(&zero, &p, &loss, false, None).unwrap() - 0.375).abs() < 1e-15);
        // interpolation of both atoms
        let k = rbf().gram(&[vec![0.0], vec![1.0]]).unwrap();
        let a = k
            .lu()
            .solve(&DVector::from_column_slice(&[0.5, -0.25]))
            .unwrap();
        let f = RkhsFunction::new(
            rbf(),
            vec![vec![0.0], vec![1.0]],
            a.iter().copied().collect(),
        )
        .unwrap();
        assert!(risk(&f, &p, &loss, false, None).unwrap() < 1e-12);
        let shifted = risk(&f, &p, &loss, true, None).unwrap();
        assert!(shifted >= -0.375 - 1e-12);
    }

    #[test]
    fn trained_model_beats_random_candidates() {
        use rand::{Rng, SeedableRng};
        let p = crate::config::generate(crate::config::Generator::Regression, 6, 1, 4);
        let loss = Loss::logistic();
        let lambda = 0.2;
        let m = train(&p, &loss, &rbf(), lambda, &SolverOptions::default()).unwrap();
        let best = risk(&m.function, &p, &loss, true, Some(lambda)).unwrap();
        assert!((best - m.objective).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let support = m.function.support().to_vec();
        for _ in 0..100 {
            let c: Vec<f64> = support
                .iter()
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let f = RkhsFunction::new(rbf(), support.clone(), c).unwrap();
            assert!(best <= risk(&f, &p, &loss, true, Some(lambda)).unwrap() + 1e-12);
        }
    }

    #[test]
    fn pushforward_examples() {
        let p = DiscreteMeasure::dirac(vec![0.0], 0.0);
        let q = DiscreteMeasure::dirac(vec![0.0], 1.0);
        let opts = SolverOptions::default();
        let zero = train(&p, &Loss::absolute(), &rbf(), 0.25, &opts).unwrap();
        let one = train(&q, &Loss::absolute(), &rbf(), 0.25, &opts).unwrap();
        assert!(one.norm() > 0.5);
        let zeros = vec![zero.clone(); 4];
        assert_eq!(
            pushforward_distance(&zeros, &zeros, &PushforwardMode::HNorm).unwrap(),
            0.0
        );
        let mixed = vec![zero.clone(), one.clone(), one.clone(), zero.clone()];
        let d = pushforward_distance(&zeros, &mixed, &PushforwardMode::HNorm).unwrap();
        assert!(d >= (0.5f64).min(one.norm()) - 1e-12, "{d}");
        let probe =
            pushforward_distance(&zeros, &mixed, &PushforwardMode::Probe(vec![0.0])).unwrap();
        assert!(probe <= d + 1e-12);
        assert!(pushforward_distance(&[], &zeros, &PushforwardMode::HNorm).is_err());
        let other = train(
            &p,
            &Loss::absolute(),
            &Kernel::rbf(2.0).unwrap(),
            0.25,
            &opts,
        )
        .unwrap();
        assert!(matches!(
            pushforward_distance(&zeros, &[other], &PushforwardMode::HNorm),
            Err(Error::KernelMismatch(..))
        ));
    }

    #[test]
    fn interpolant() {
        let n = interpolant_norm_sq(&rbf(), &[0.0], &[0.08]).unwrap();
        let kappa = (-0.0064f64).exp();
        assert!((n - 1.0 / (1.0 - kappa * kappa)).abs() < 1e-9);
    }

    #[test]
    fn continuity_rejects_zero_jitter_base() {
        let text = r#"
kind = "continuity"
loss = "logistic"
kernel = "rbf:1"
lambda = 0.1
n_grid = [1, 2]
replicates = 3

[continuity]
base = 1e-300

[base_measure]
generate = "regression"
size = 4
"#;
        let mut cfg = parse_config_str(text).unwrap();
        cfg.continuity.as_mut().unwrap().base = 0.0;
        // a zero jitter scale leaves P_m = P_0
        let spec = cfg.continuity.unwrap();
        assert_eq!(spec.scale(3), 0.0);
        let out = run_continuity(&cfg).unwrap_err();
        assert!(matches!(out, Error::Config { .. }));
    }

    #[test]
    fn small_runs_are_deterministic() {
        let text = r#"
kind = "qualitative-robustness"
loss = "hinge"
kernel = "rbf:1"
lambda = 1.0
n_grid = [10, 20]
replicates = 8
base_seed = 3

[base_measure]
generate = "classification"
size = 5

[contamination]
delta = [0.0, 0.1]
contaminant = { atoms = [[1.5, -1.0]] }
"#;
        let cfg = parse_config_str(text).unwrap();
        let a = run_qualitative_robustness(&cfg).unwrap().report;
        let b = run_qualitative_robustness(&cfg).unwrap().report;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.cells.len(), 4);
        for c in &a.cells {
            assert!(c.d_pro_h.unwrap() <= 1.0 && c.d_pro_h.unwrap() >= 0.0);
            assert_eq!(c.total, 16);
        }
    }

    #[test]
    fn verdict_of_empty_report() {
        assert_eq!(
            RobustnessReport::overall(&[], &[]),
            Verdict::InsufficientData
        );
        assert_eq!(
            serde_json::to_string(&Verdict::InsufficientData).unwrap(),
            "\"insufficient data\""
        );
    }
}
