//! Regularized risk minimization over finitely supported measures.
//!
//! Training minimizes `sum_i w_i L*(y_i, f(x_i)) + lambda |f|_H^2` over
//! `f = sum_j a_j k(., x_j)`, the `x_j` being the distinct inputs of the
//! measure. Smooth losses use damped Newton steps on the stationarity map
//! `G(a) = 2 lambda a + g(K a)`; piecewise-linear losses go through a
//! sequence of Moreau-smoothed problems and finish with an exact active-set
//! solve. Every returned model carries the residual of the first-order
//! optimality certificate.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, RkhsFunction};
use crate::losses::{Loss, PiecewiseLinear};
use crate::measures::DiscreteMeasure;

pub const SMOOTH_TOLERANCE: f64 = 1e-6;
pub const NONSMOOTH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Certificate tolerance; `None` picks the per-loss default.
    pub tolerance: Option<f64>,
    /// Moreau parameters for nonsmooth losses, strictly decreasing. `None`
    /// uses `{1e-1, 1e-2, 1e-3, 1e-4} * |L|_1`.
    pub smoothing_schedule: Option<Vec<f64>>,
    /// Added to the Gram matrix inside Newton systems only.
    pub jitter: f64,
    pub seed: u64,
    /// Start from random coefficients drawn with `seed` instead of zero.
    pub random_init: bool,
    /// Minimize with the unshifted loss `L` instead of `L*`.
    pub unshifted: bool,
    /// Train even when the loss is not uniformly Lipschitz.
    pub allow_contract_violation: bool,
    /// Skip the exact active-set step after smoothing.
    pub skip_polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 500,
            tolerance: None,
            smoothing_schedule: None,
            jitter: 0.0,
            seed: 0,
            random_init: false,
            unshifted: false,
            allow_contract_violation: false,
            skip_polish: false,
        }
    }
}

impl SolverOptions {
    pub fn tolerance_for(&self, loss: &Loss) -> f64 {
        self.tolerance.unwrap_or(if loss.is_differentiable() {
            SMOOTH_TOLERANCE
        } else {
            NONSMOOTH_TOLERANCE
        })
    }

    pub fn schedule_for(&self, loss: &Loss) -> Vec<f64> {
        match &self.smoothing_schedule {
            Some(s) => s.clone(),
            None => [1e-1, 1e-2, 1e-3, 1e-4]
                .iter()
                .map(|m| m * loss.lipschitz())
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("tolerance", format!("{t} is not positive")));
            }
        }
        if let Some(s) = &self.smoothing_schedule {
            if s.is_empty() {
                return Err(Error::config("smoothing_schedule", "empty"));
            }
            if s.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
                return Err(Error::config(
                    "smoothing_schedule",
                    "entries must be positive",
                ));
            }
            if s.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config(
                    "smoothing_schedule",
                    "must be strictly decreasing",
                ));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::config("jitter", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Objective values at the start and end of one smoothing stage (a single
/// stage for smooth losses).
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub mu: Option<f64>,
    pub iterations: usize,
    /// Surrogate objective after each accepted step, starting value first.
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct SvmModel {
    pub function: RkhsFunction,
    pub lambda: f64,
    pub loss: Loss,
    pub objective: f64,
    pub certificate_residual: f64,
    pub iterations: usize,
    pub stages: Vec<StageTrace>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    kernel: Kernel,
    lambda: f64,
    loss: Loss,
    support: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    objective: f64,
    certificate_residual: f64,
    #[serde(default)]
    iterations: usize,
}

impl TryFrom<ModelRepr> for SvmModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        check_lambda(r.lambda)?;
        if !(r.certificate_residual >= 0.0) {
            return Err(Error::InvalidArgument(
                "certificate_residual must be nonnegative".into(),
            ));
        }
        if !r.objective.is_finite() {
            return Err(Error::InvalidArgument("objective must be finite".into()));
        }
        Ok(SvmModel {
            function: RkhsFunction::new(r.kernel, r.support, r.coeffs)?,
            lambda: r.lambda,
            loss: r.loss,
            objective: r.objective,
            certificate_residual: r.certificate_residual,
            iterations: r.iterations,
            stages: Vec::new(),
        })
    }
}

impl From<SvmModel> for ModelRepr {
    fn from(m: SvmModel) -> Self {
        ModelRepr {
            kernel: *m.function.kernel(),
            lambda: m.lambda,
            loss: m.loss,
            support: m.function.support().to_vec(),
            coeffs: m.function.coeffs().to_vec(),
            objective: m.objective,
            certificate_residual: m.certificate_residual,
            iterations: m.iterations,
        }
    }
}

impl SvmModel {
    pub fn kernel(&self) -> &Kernel {
        self.function.kernel()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.function.eval(x)
    }

    pub fn norm(&self) -> f64 {
        self.function.norm()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    Ok(())
}

/// The training problem after grouping atoms by input point.
struct Problem<'a> {
    loss: &'a Loss,
    lambda: f64,
    points: Vec<Vec<f64>>,
    terms: Vec<Vec<(f64, f64)>>,
    gram: DMatrix<f64>,
    shifted: bool,
}

impl<'a> Problem<'a> {
    fn n(&self) -> usize {
        self.points.len()
    }

    fn group_value(&self, j: usize, t: f64) -> f64 {
        self.terms[j]
            .iter()
            .map(|&(y, w)| {
                let v = self.loss.value(y, t);
                w * if self.shifted {
                    v - self.loss.value(y, 0.0)
                } else {
                    v
                }
            })
            .sum()
    }

    fn group_first(&self, j: usize, t: f64) -> f64 {
        self.terms[j]
            .iter()
            .map(|&(y, w)| w * self.loss.first(y, t))
            .sum()
    }

    fn group_second(&self, j: usize, t: f64) -> f64 {
        self.terms[j]
            .iter()
            .map(|&(y, w)| w * self.loss.second(y, t))
            .sum()
    }

    fn objective(&self, alpha: &DVector<f64>) -> f64 {
        let t = &self.gram * alpha;
        (0..self.n())
            .map(|j| self.group_value(j, t[j]))
            .sum::<f64>()
            + self.lambda * alpha.dot(&t).max(0.0)
    }

    fn piecewise(&self) -> Option<Vec<PiecewiseLinear>> {
        self.terms
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .try_fold(PiecewiseLinear::zero(), |acc, &(y, w)| {
                        self.loss
                            .piecewise_linear(&[], y)
                            .map(|pl| acc.add_scaled(&pl, w))
                    })
            })
            .collect()
    }
}

/// Per-group surrogate losses used inside one Newton stage.
enum Surrogate<'p> {
    Exact,
    Moreau {
        pieces: &'p [PiecewiseLinear],
        mu: f64,
    },
}

impl Surrogate<'_> {
    fn value(&self, pb: &Problem, j: usize, t: f64) -> f64 {
        match self {
            Surrogate::Exact => pb.group_value(j, t),
            Surrogate::Moreau { pieces, mu } => {
                let (p, _) = pieces[j].prox(t, *mu);
                pb.group_value(j, p) + (t - p) * (t - p) / (2.0 * mu)
            }
        }
    }

    fn derivatives(&self, pb: &Problem, j: usize, t: f64) -> (f64, f64) {
        match self {
            Surrogate::Exact => (pb.group_first(j, t), pb.group_second(j, t)),
            Surrogate::Moreau { pieces, mu } => pieces[j].moreau_derivatives(t, *mu),
        }
    }

    fn objective(&self, pb: &Problem, alpha: &DVector<f64>) -> f64 {
        let t = &pb.gram * alpha;
        (0..pb.n()).map(|j| self.value(pb, j, t[j])).sum::<f64>()
            + pb.lambda * alpha.dot(&t).max(0.0)
    }
}

/// Damped Newton on `G(a) = 2 lambda a + g(K a)`. The direction solves
/// `(2 lambda I + D K) d = -G`; it is a descent direction for the surrogate
/// objective, whose gradient is `K G`.
fn newton_stage(
    pb: &Problem,
    sur: &Surrogate,
    alpha: &mut DVector<f64>,
    target: f64,
    budget: usize,
    jitter: f64,
    trace: &mut StageTrace,
) -> f64 {
    let n = pb.n();
    let two_lambda = 2.0 * pb.lambda;
    let mut f_cur = sur.objective(pb, alpha);
    trace.objectives.push(f_cur);
    let mut residual = f64::INFINITY;
    for _ in 0..budget {
        let t = &pb.gram * &*alpha;
        let mut g = DVector::zeros(n);
        let mut curv = DVector::zeros(n);
        for j in 0..n {
            let (d1, d2) = sur.derivatives(pb, j, t[j]);
            g[j] = two_lambda * alpha[j] + d1;
            curv[j] = d2;
        }
        let kg = &pb.gram * &g;
        residual = g.dot(&kg).max(0.0).sqrt() / two_lambda;
        if residual <= target {
            break;
        }
        let mut jac = DMatrix::from_diagonal_element(n, n, two_lambda);
        for i in 0..n {
            if curv[i] != 0.0 {
                for j in 0..n {
                    let kij = pb.gram[(i, j)] + if i == j { jitter } else { 0.0 };
                    jac[(i, j)] += curv[i] * kij;
                }
            }
        }
        let mut dir = jac.lu().solve(&(-&g)).unwrap_or_else(|| -&g);
        let mut slope = kg.dot(&dir);
        if !(slope < 0.0) {
            dir = -&g;
            slope = -kg.dot(&g);
            if !(slope < 0.0) {
                break;
            }
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &*alpha + step * &dir;
            let f_new = sur.objective(pb, &cand);
            if f_new <= f_cur + 1e-4 * step * slope {
                *alpha = cand;
                f_cur = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.iterations += 1;
        if !accepted {
            break;
        }
        trace.objectives.push(f_cur);
    }
    residual
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Kink(usize),
    Piece(usize),
}

/// Exact solve for piecewise-linear losses: groups sitting on a kink have
/// their function value fixed there, the others have their coefficient fixed
/// by the slope of their piece. Violations move groups between the two sets.
fn polish(
    pb: &Problem,
    pieces: &[PiecewiseLinear],
    start: &DVector<f64>,
    mu: f64,
    iterations: &mut usize,
) -> Vec<DVector<f64>> {
    let n = pb.n();
    let two_lambda = 2.0 * pb.lambda;
    let t0 = &pb.gram * start;
    let mut slots: Vec<Slot> = (0..n)
        .map(|j| match pieces[j].prox(t0[j], mu) {
            (_, Some(k)) => Slot::Kink(k),
            (p, None) => Slot::Piece(pieces[j].piece_index(p)),
        })
        .collect();
    let mut candidates = Vec::new();
    for _ in 0..100 {
        *iterations += 1;
        let e: Vec<usize> = (0..n)
            .filter(|&j| matches!(slots[j], Slot::Kink(_)))
            .collect();
        let mut alpha = DVector::zeros(n);
        for j in 0..n {
            if let Slot::Piece(i) = slots[j] {
                alpha[j] = -pieces[j].piece(i).0 / two_lambda;
            }
        }
        if !e.is_empty() {
            let t_n = &pb.gram * &alpha;
            let rhs = DVector::from_iterator(
                e.len(),
                e.iter().map(|&j| match slots[j] {
                    Slot::Kink(k) => pieces[j].kinks()[k] - t_n[j],
                    Slot::Piece(_) => unreachable!(),
                }),
            );
            let kee = DMatrix::from_fn(e.len(), e.len(), |a, b| pb.gram[(e[a], e[b])]);
            let sol = match kee.clone().cholesky() {
                Some(ch) => Some(ch.solve(&rhs)),
                None => {
                    let svd = kee.svd(true, true);
                    let cut = 1e-12 * svd.singular_values.max();
                    svd.solve(&rhs, cut).ok()
                }
            };
            let Some(sol) = sol else { break };
            for (a, &j) in e.iter().enumerate() {
                alpha[j] = sol[a];
            }
        }
        let t = &pb.gram * &alpha;
        candidates.push(alpha.clone());

        let mut changed = false;
        for j in 0..n {
            match slots[j] {
                Slot::Kink(k) => {
                    let h = -two_lambda * alpha[j];
                    let (sl, sr) = (pieces[j].slopes()[k], pieces[j].slopes()[k + 1]);
                    let slack = 1e-10 * (1.0 + sl.abs().max(sr.abs()));
                    if h < sl - slack {
                        slots[j] = Slot::Piece(k);
                        changed = true;
                    } else if h > sr + slack {
                        slots[j] = Slot::Piece(k + 1);
                        changed = true;
                    }
                }
                Slot::Piece(i) => {
                    let (_, lo, hi) = pieces[j].piece(i);
                    let eta = 1e-10 * (1.0 + t[j].abs());
                    if t[j] < lo - eta {
                        slots[j] = Slot::Kink(i - 1);
                        changed = true;
                    } else if t[j] > hi + eta {
                        slots[j] = Slot::Kink(i);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    candidates
}

/// Trains on `measure` (identical inputs merged, weights summed).
pub fn train(
    measure: &DiscreteMeasure,
    loss: &Loss,
    kernel: &Kernel,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SvmModel> {
    check_lambda(lambda)?;
    opts.validate()?;
    if !loss.satisfies_contract() && !opts.allow_contract_violation {
        return Err(Error::ContractViolation {
            loss: loss.to_string(),
            detail: "not uniformly Lipschitz; set allow_contract_violation to train anyway".into(),
        });
    }
    kernel.sup_norm()?;
    for (a, _) in measure.iter() {
        kernel.check_point(&a.x)?;
        loss.check_label(a.y)?;
    }
    let groups = measure.grouped_by_input();
    let (points, terms): (Vec<_>, Vec<_>) = groups.into_iter().unzip();
    let gram = kernel.gram_unchecked(&points);
    let pb = Problem {
        loss,
        lambda,
        points,
        terms,
        gram,
        shifted: !opts.unshifted,
    };
    let n = pb.n();
    let tol = opts.tolerance_for(loss);

    let mut alpha = if opts.random_init {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = loss.lipschitz() / (2.0 * lambda);
        DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..=1.0))
    } else {
        DVector::zeros(n)
    };

    let mut stages = Vec::new();
    let mut used = 0usize;
    let pieces = if loss.is_differentiable() {
        None
    } else {
        pb.piecewise()
    };

    let alpha = match &pieces {
        None => {
            let mut trace = StageTrace {
                mu: None,
                iterations: 0,
                objectives: Vec::new(),
            };
            newton_stage(
                &pb,
                &Surrogate::Exact,
                &mut alpha,
                (1e-3 * tol).min(1e-10),
                opts.max_iterations,
                opts.jitter,
                &mut trace,
            );
            used += trace.iterations;
            stages.push(trace);
            alpha
        }
        Some(pieces) => {
            let schedule = opts.schedule_for(loss);
            for &mu in &schedule {
                let mut trace = StageTrace {
                    mu: Some(mu),
                    iterations: 0,
                    objectives: Vec::new(),
                };
                let budget = opts.max_iterations.saturating_sub(used).max(1);
                newton_stage(
                    &pb,
                    &Surrogate::Moreau { pieces, mu },
                    &mut alpha,
                    1e-3 * tol.min(mu),
                    budget,
                    opts.jitter,
                    &mut trace,
                );
                used += trace.iterations;
                stages.push(trace);
            }
            let mut best = (group_certificate(&pb, &alpha), alpha.clone());
            if !opts.skip_polish {
                let mu_last = *schedule.last().unwrap();
                for cand in polish(&pb, pieces, &alpha, mu_last, &mut used) {
                    let r = group_certificate(&pb, &cand);
                    if r < best.0 {
                        best = (r, cand);
                    }
                }
            }
            best.1
        }
    };

    let residual = group_certificate(&pb, &alpha);
    if !(residual <= tol) {
        return Err(Error::NonConvergence {
            iterations: used,
            residual,
            tolerance: tol,
        });
    }
    let objective = pb.objective(&alpha);
    Ok(SvmModel {
        function: RkhsFunction::new(*kernel, pb.points.clone(), alpha.iter().copied().collect())?,
        lambda,
        loss: *loss,
        objective,
        certificate_residual: residual,
        iterations: used,
        stages,
    })
}

/// Certificate on the grouped problem, warm-started at the model's own
/// selection.
fn group_certificate(pb: &Problem, alpha: &DVector<f64>) -> f64 {
    let t = &pb.gram * alpha;
    let boxes: Vec<(f64, f64)> = (0..pb.n())
        .map(|j| group_interval(pb.loss, &pb.terms[j], t[j]))
        .collect();
    let slots: Vec<usize> = (0..pb.n()).collect();
    let warm: Vec<f64> = alpha.iter().map(|a| -2.0 * pb.lambda * a).collect();
    box_qp(
        &pb.gram,
        alpha.as_slice(),
        &slots,
        &boxes,
        pb.lambda,
        Some(&warm),
    )
}

/// Subgradient interval of a group loss at `t`; piecewise-linear pieces
/// count as active within a relative distance of `1e-9` from a kink.
fn group_interval(loss: &Loss, terms: &[(f64, f64)], t: f64) -> (f64, f64) {
    let eta = 1e-9 * (1.0 + t.abs());
    terms.iter().fold((0.0, 0.0), |(lo, hi), &(y, w)| {
        let (a, b) = loss.subdifferential_near(y, t, eta);
        (lo + w * a, hi + w * b)
    })
}

/// `min_s |sum_u c_u Phi_u + (1/2 lambda) sum_j s_j Phi_{slot_j}|_H` over
/// `s_j in boxes[j]`, by projected coordinate descent from the box midpoints
/// and, if given, from the projection of `warm`.
fn box_qp(
    gram: &DMatrix<f64>,
    base: &[f64],
    slots: &[usize],
    boxes: &[(f64, f64)],
    lambda: f64,
    warm: Option<&[f64]>,
) -> f64 {
    let two_lambda = 2.0 * lambda;
    let run = |start: Vec<f64>| -> f64 {
        let mut s = start;
        let mut v = DVector::from_column_slice(base);
        for (j, &u) in slots.iter().enumerate() {
            v[u] += s[j] / two_lambda;
        }
        let mut kv = gram * &v;
        let mut value = v.dot(&kv);
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for (j, &u) in slots.iter().enumerate() {
                let kuu = gram[(u, u)];
                if kuu <= 0.0 || boxes[j].0 == boxes[j].1 {
                    continue;
                }
                let target = s[j] - two_lambda * kv[u] / kuu;
                let next = target.clamp(boxes[j].0, boxes[j].1);
                let delta = (next - s[j]) / two_lambda;
                if delta != 0.0 {
                    s[j] = next;
                    v[u] += delta;
                    kv.axpy(delta, &gram.column(u), 1.0);
                    moved = moved.max(delta.abs());
                }
            }
            let new_value = v.dot(&kv);
            let done = moved == 0.0 || value - new_value <= 1e-15 * value.abs().max(1e-300);
            value = new_value;
            if done {
                break;
            }
        }
        // recompute to shed accumulated drift
        v.dot(&(gram * &v)).max(0.0).sqrt()
    };
    let mid: Vec<f64> = boxes.iter().map(|b| 0.5 * (b.0 + b.1)).collect();
    let mut best = run(mid);
    if let Some(w) = warm {
        let proj: Vec<f64> = w
            .iter()
            .zip(boxes)
            .map(|(x, b)| x.clamp(b.0, b.1))
            .collect();
        best = best.min(run(proj));
    }
    best
}

/// Residual of the first-order optimality condition of `model` on
/// `measure`: the smallest `|f + (1/2 lambda) sum_i w_i h_i Phi(x_i)|_H`
/// over subgradient selections `h_i`.
pub fn certificate_residual(model: &SvmModel, measure: &DiscreteMeasure) -> Result<f64> {
    let f = &model.function;
    let kernel = f.kernel();
    let groups = measure.grouped_by_input();
    for (x, terms) in &groups {
        kernel.check_point(x)?;
        if let Some(d) = f.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        for &(y, _) in terms {
            model.loss.check_label(y)?;
        }
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut slot_of = |x: &[f64], points: &mut Vec<Vec<f64>>| -> usize {
        let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        *index.entry(key).or_insert_with(|| {
            points.push(x.to_vec());
            points.len() - 1
        })
    };
    let mut base_idx = Vec::new();
    for x in f.support() {
        base_idx.push(slot_of(x, &mut points));
    }
    let slots: Vec<usize> = groups
        .iter()
        .map(|(x, _)| slot_of(x, &mut points))
        .collect();
    let mut base = vec![0.0; points.len()];
    for (&u, &c) in base_idx.iter().zip(f.coeffs()) {
        base[u] += c;
    }
    let gram = kernel.gram_unchecked(&points);
    let t_all = &gram * DVector::from_column_slice(&base);
    let boxes: Vec<(f64, f64)> = groups
        .iter()
        .zip(&slots)
        .map(|((_, terms), &u)| group_interval(&model.loss, terms, t_all[u]))
        .collect();
    // each group's own coefficient, if it is the only group on that point
    let warm: Vec<f64> = slots
        .iter()
        .map(|&u| -2.0 * model.lambda * base[u])
        .collect();
    Ok(box_qp(
        &gram,
        &base,
        &slots,
        &boxes,
        model.lambda,
        Some(&warm),
    ))
}

/// A measured quantity next to its theoretical bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn new(value: f64, bound: f64) -> Self {
        BoundCheck {
            value,
            bound,
            passed: value <= bound + 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    /// `|f|_H <= |L|_1 |k|_inf / lambda`
    pub h_norm: BoundCheck,
    /// `|f|_inf <= |L|_1 |k|_inf^2 / lambda`, on the probes
    pub sup_norm: BoundCheck,
    /// `|L*(y, f(x))| <= |L|_1^2 |k|_inf^2 / lambda`, on probes x labels
    pub shifted_loss: BoundCheck,
}

impl NormBoundReport {
    pub fn passed(&self) -> bool {
        self.h_norm.passed && self.sup_norm.passed && self.shifted_loss.passed
    }
}

/// Compares the trained function with the a priori bounds. Probes default to
/// the support points; labels to `{-1, 1}`.
pub fn check_norm_bounds(
    model: &SvmModel,
    probes: Option<&[Vec<f64>]>,
    labels: Option<&[f64]>,
) -> Result<NormBoundReport> {
    let f = &model.function;
    let k_inf = f.kernel().sup_norm()?;
    let l1 = model.loss.lipschitz();
    let lam = model.lambda;
    let probes = probes.unwrap_or(f.support());
    let labels = labels.unwrap_or(&[-1.0, 1.0]);
    let mut sup = 0.0f64;
    let mut shifted = 0.0f64;
    for x in probes {
        let t = f.eval(x)?;
        sup = sup.max(t.abs());
        for &y in labels {
            if model.loss.check_label(y).is_ok() {
                shifted = shifted.max((model.loss.value(y, t) - model.loss.value(y, 0.0)).abs());
            }
        }
    }
    Ok(NormBoundReport {
        h_norm: BoundCheck::new(f.norm(), l1 * k_inf / lam),
        sup_norm: BoundCheck::new(sup, l1 * k_inf * k_inf / lam),
        shifted_loss: BoundCheck::new(shifted, l1 * l1 * k_inf * k_inf / lam),
    })
}

/// `sum_i w_i h_i Phi(x_i)` over the atoms of `measure`.
pub fn mean_embedding(
    h: &[f64],
    measure: &DiscreteMeasure,
    kernel: &Kernel,
) -> Result<RkhsFunction> {
    if h.len() != measure.len() {
        return Err(Error::DimensionMismatch {
            expected: measure.len(),
            got: h.len(),
        });
    }
    let (support, coeffs): (Vec<_>, Vec<_>) = measure
        .iter()
        .zip(h)
        .map(|((a, w), hi)| (a.x.clone(), w * hi))
        .unzip();
    RkhsFunction::new(*kernel, support, coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `|f_P - f_P0|_H`
    pub lhs: f64,
    /// `lambda^-1 |int h Phi dP - int h Phi dP0|_H`, `h` the loss derivative
    /// at `f_P0`
    pub rhs: f64,
    /// `lambda^-1 |L|_1 |k|_inf sum |p - p0|`, an upper bound for `rhs`
    pub cap: f64,
    pub holds: bool,
}

/// Checks the stability inequality between the solutions on `p` and `p0`.
/// Only for differentiable losses.
pub fn stability_bound_check(
    p: &DiscreteMeasure,
    p0: &DiscreteMeasure,
    loss: &Loss,
    kernel: &Kernel,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<StabilityReport> {
    if !loss.is_differentiable() {
        return Err(Error::Unsupported(format!(
            "stability check needs a differentiable loss, got {loss}"
        )));
    }
    let f = train(p, loss, kernel, lambda, opts)?;
    let f0 = train(p0, loss, kernel, lambda, opts)?;
    let lhs = f.function.distance(&f0.function)?;
    let h = |m: &DiscreteMeasure| -> Result<Vec<f64>> {
        m.iter()
            .map(|(a, _)| Ok(loss.first(a.y, f0.function.eval(&a.x)?)))
            .collect()
    };
    let emb = mean_embedding(&h(p)?, p, kernel)?;
    let emb0 = mean_embedding(&h(p0)?, p0, kernel)?;
    let rhs = emb.distance(&emb0)? / lambda;
    let cap = loss.lipschitz() * kernel.sup_norm()? * p.l1_distance(p0) / lambda;
    Ok(StabilityReport {
        lhs,
        rhs,
        cap,
        holds: lhs <= rhs + 1e-9,
    })
}
