//! Convex, uniformly Lipschitz loss functions `L(x, y, t)` and their shifted
//! form `L*(x, y, t) = L(x, y, t) - L(x, y, 0)`.
//!
//! Every built-in loss depends on `(y, t)` only; the input `x` stays in the
//! signatures so that the call sites match the general contract.
//!
//! The nonsmooth losses (hinge, absolute, epsilon-insensitive, pinball) are
//! piecewise linear in `t`. They expose that structure through
//! [`Loss::piecewise_linear`], which the solver uses for Moreau smoothing and
//! for the exact active-set polish.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `max(0, 1 - y t)` for `y` in {-1, 1}.
    Hinge,
    /// Distance-based logistic loss `-ln(4 Λ(y-t) (1 - Λ(y-t)))`, Λ the
    /// sigmoid; equal to `2 ln cosh((y - t) / 2)`.
    Logistic,
    Absolute,
    EpsilonInsensitive {
        epsilon: f64,
    },
    Huber {
        delta: f64,
    },
    Pinball {
        tau: f64,
    },
    /// `(y - t)^2`. Not uniformly Lipschitz; constructible so that the
    /// contract checks have something to reject.
    LeastSquares,
}

impl LossKind {
    /// Analytic uniform Lipschitz constant in `t`.
    pub fn analytic_lipschitz(&self) -> f64 {
        match *self {
            LossKind::Hinge
            | LossKind::Logistic
            | LossKind::Absolute
            | LossKind::EpsilonInsensitive { .. } => 1.0,
            LossKind::Huber { delta } => delta,
            LossKind::Pinball { tau } => tau.max(1.0 - tau),
            // declared, and wrong on any unbounded range
            LossKind::LeastSquares => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LossKind::EpsilonInsensitive { epsilon }
                if !(epsilon >= 0.0 && epsilon.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "epsilon-insensitive width must be finite and nonnegative, got {epsilon}"
                )))
            }
            LossKind::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => Err(
                Error::InvalidArgument(format!("huber threshold must be positive, got {delta}")),
            ),
            LossKind::Pinball { tau } if !(tau > 0.0 && tau < 1.0) => Err(Error::InvalidArgument(
                format!("pinball level must lie in (0, 1), got {tau}"),
            )),
            _ => Ok(()),
        }
    }
}

/// A loss together with its declared Lipschitz constant `|L|_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Loss {
    kind: LossKind,
    lipschitz: f64,
}

impl Loss {
    pub fn new(kind: LossKind) -> Result<Self> {
        kind.validate()?;
        Ok(Loss {
            kind,
            lipschitz: kind.analytic_lipschitz(),
        })
    }

    /// Same loss with a caller-declared Lipschitz constant. The declaration is
    /// not trusted: [`verify_loss_contract`] checks it numerically.
    pub fn with_lipschitz(kind: LossKind, lipschitz: f64) -> Result<Self> {
        kind.validate()?;
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        Ok(Loss { kind, lipschitz })
    }

    pub fn hinge() -> Self {
        Loss::new(LossKind::Hinge).unwrap()
    }

    pub fn logistic() -> Self {
        Loss::new(LossKind::Logistic).unwrap()
    }

    pub fn absolute() -> Self {
        Loss::new(LossKind::Absolute).unwrap()
    }

    pub fn epsilon_insensitive(epsilon: f64) -> Result<Self> {
        Loss::new(LossKind::EpsilonInsensitive { epsilon })
    }

    pub fn huber(delta: f64) -> Result<Self> {
        Loss::new(LossKind::Huber { delta })
    }

    pub fn pinball(tau: f64) -> Result<Self> {
        Loss::new(LossKind::Pinball { tau })
    }

    pub fn least_squares() -> Self {
        Loss::new(LossKind::LeastSquares).unwrap()
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Declared `|L|_1`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(
            self.kind,
            LossKind::Logistic | LossKind::Huber { .. } | LossKind::LeastSquares
        )
    }

    /// Classification losses only accept labels in {-1, 1}.
    pub fn is_classification(&self) -> bool {
        matches!(self.kind, LossKind::Hinge)
    }

    /// Whether the loss satisfies the uniform Lipschitz contract at all.
    pub fn satisfies_contract(&self) -> bool {
        !matches!(self.kind, LossKind::LeastSquares)
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("label {y} is not finite")));
        }
        if self.is_classification() && y != 1.0 && y != -1.0 {
            return Err(Error::Domain(format!(
                "{self} requires labels in {{-1, 1}}, got {y}"
            )));
        }
        Ok(())
    }

    fn check(&self, y: f64, t: f64) -> Result<()> {
        self.check_label(y)?;
        if !t.is_finite() {
            return Err(Error::Domain(format!("prediction {t} is not finite")));
        }
        Ok(())
    }

    /// `L(x, y, t)`.
    pub fn eval(&self, _x: &[f64], y: f64, t: f64) -> Result<f64> {
        self.check(y, t)?;
        Ok(self.value(y, t))
    }

    /// `L*(x, y, t) = L(x, y, t) - L(x, y, 0)`.
    pub fn eval_shifted(&self, _x: &[f64], y: f64, t: f64) -> Result<f64> {
        self.check(y, t)?;
        Ok(self.value(y, t) - self.value(y, 0.0))
    }

    /// Closed subdifferential of `t -> L(x, y, t)` at `t`.
    pub fn subgradient_interval(&self, _x: &[f64], y: f64, t: f64) -> Result<(f64, f64)> {
        self.check(y, t)?;
        Ok(self.subdifferential(y, t))
    }

    /// Derivative in `t`, for differentiable losses.
    pub fn derivative(&self, _x: &[f64], y: f64, t: f64) -> Result<f64> {
        self.check(y, t)?;
        if !self.is_differentiable() {
            return Err(Error::Unsupported(format!("{self} is not differentiable")));
        }
        Ok(self.first(y, t))
    }

    /// Piecewise-linear description of `t -> L(x, y, t)`, if it has one.
    pub fn piecewise_linear(&self, _x: &[f64], y: f64) -> Option<PiecewiseLinear> {
        let pl = match self.kind {
            LossKind::Hinge => {
                if y > 0.0 {
                    PiecewiseLinear::new(vec![1.0 / y], vec![-y, 0.0])
                } else {
                    PiecewiseLinear::new(vec![1.0 / y], vec![0.0, -y])
                }
            }
            LossKind::Absolute => PiecewiseLinear::new(vec![y], vec![-1.0, 1.0]),
            LossKind::EpsilonInsensitive { epsilon } => {
                if epsilon == 0.0 {
                    PiecewiseLinear::new(vec![y], vec![-1.0, 1.0])
                } else {
                    PiecewiseLinear::new(vec![y - epsilon, y + epsilon], vec![-1.0, 0.0, 1.0])
                }
            }
            LossKind::Pinball { tau } => PiecewiseLinear::new(vec![y], vec![-tau, 1.0 - tau]),
            LossKind::Logistic | LossKind::Huber { .. } | LossKind::LeastSquares => return None,
        };
        Some(pl)
    }

    // Unchecked kernels of the public methods. Callers validate labels once.

    pub(crate) fn value(&self, y: f64, t: f64) -> f64 {
        let r = y - t;
        match self.kind {
            LossKind::Hinge => (1.0 - y * t).max(0.0),
            LossKind::Logistic => {
                let a = r.abs();
                // 2 ln cosh(r/2) = |r| + 2 ln(1 + e^{-|r|}) - 2 ln 2
                a + 2.0 * (-a).exp().ln_1p() - 2.0 * std::f64::consts::LN_2
            }
            LossKind::Absolute => r.abs(),
            LossKind::EpsilonInsensitive { epsilon } => (r.abs() - epsilon).max(0.0),
            LossKind::Huber { delta } => {
                let a = r.abs();
                if a <= delta {
                    0.5 * r * r
                } else {
                    delta * (a - 0.5 * delta)
                }
            }
            LossKind::Pinball { tau } => {
                if r >= 0.0 {
                    tau * r
                } else {
                    (tau - 1.0) * r
                }
            }
            LossKind::LeastSquares => r * r,
        }
    }

    /// Derivative in `t` of a differentiable loss.
    pub(crate) fn first(&self, y: f64, t: f64) -> f64 {
        let r = y - t;
        match self.kind {
            LossKind::Logistic => -(0.5 * r).tanh(),
            LossKind::Huber { delta } => -r.clamp(-delta, delta),
            LossKind::LeastSquares => -2.0 * r,
            _ => {
                let (lo, hi) = self.subdifferential(y, t);
                0.5 * (lo + hi)
            }
        }
    }

    /// Second derivative in `t` of a differentiable loss (one-sided at the
    /// Huber switch points).
    pub(crate) fn second(&self, y: f64, t: f64) -> f64 {
        let r = y - t;
        match self.kind {
            LossKind::Logistic => {
                let th = (0.5 * r).tanh();
                0.5 * (1.0 - th * th)
            }
            LossKind::Huber { delta } => {
                if r.abs() <= delta {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::LeastSquares => 2.0,
            _ => 0.0,
        }
    }

    pub(crate) fn subdifferential(&self, y: f64, t: f64) -> (f64, f64) {
        match self.piecewise_linear(&[], y) {
            Some(pl) => pl.subdifferential(t),
            None => {
                let d = self.first(y, t);
                (d, d)
            }
        }
    }

    /// Convex hull of the subdifferentials over `[t - eta, t + eta]`.
    pub(crate) fn subdifferential_near(&self, y: f64, t: f64, eta: f64) -> (f64, f64) {
        match self.piecewise_linear(&[], y) {
            Some(pl) => (pl.subdifferential(t - eta).0, pl.subdifferential(t + eta).1),
            None => self.subdifferential(y, t),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Hinge => write!(f, "hinge"),
            LossKind::Logistic => write!(f, "logistic"),
            LossKind::Absolute => write!(f, "absolute"),
            LossKind::EpsilonInsensitive { epsilon } => write!(f, "eps_insensitive:{epsilon}"),
            LossKind::Huber { delta } => write!(f, "huber:{delta}"),
            LossKind::Pinball { tau } => write!(f, "pinball:{tau}"),
            LossKind::LeastSquares => write!(f, "least_squares"),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| {
                Error::InvalidArgument(format!("loss `{name}` needs a {what} parameter"))
            })?;
            a.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("loss `{name}`: cannot parse {what} from `{a}`"))
            })
        };
        let no_param = |kind: LossKind| -> Result<Loss> {
            if arg.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "loss `{name}` takes no parameter"
                )));
            }
            Loss::new(kind)
        };
        match name {
            "hinge" => no_param(LossKind::Hinge),
            "logistic" => no_param(LossKind::Logistic),
            "absolute" => no_param(LossKind::Absolute),
            "least_squares" => no_param(LossKind::LeastSquares),
            "eps_insensitive" => Loss::new(LossKind::EpsilonInsensitive {
                epsilon: param("width")?,
            }),
            "huber" => Loss::new(LossKind::Huber {
                delta: param("threshold")?,
            }),
            "pinball" => Loss::new(LossKind::Pinball {
                tau: param("level")?,
            }),
            _ => Err(Error::InvalidArgument(format!("unknown loss `{s}`"))),
        }
    }
}

impl TryFrom<String> for Loss {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Loss> for String {
    fn from(l: Loss) -> String {
        l.to_string()
    }
}

/// Read-only view evaluating the shifted loss `L*`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedLoss<'a> {
    pub base: &'a Loss,
}

impl<'a> ShiftedLoss<'a> {
    pub fn new(base: &'a Loss) -> Self {
        ShiftedLoss { base }
    }

    pub fn eval(&self, x: &[f64], y: f64, t: f64) -> Result<f64> {
        self.base.eval_shifted(x, y, t)
    }

    /// The shift does not change subgradients.
    pub fn subgradient_interval(&self, x: &[f64], y: f64, t: f64) -> Result<(f64, f64)> {
        self.base.subgradient_interval(x, y, t)
    }
}

/// Convex piecewise-linear function of one variable, described by its sorted
/// kinks and the slopes of the `kinks.len() + 1` pieces between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    kinks: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(kinks: Vec<f64>, slopes: Vec<f64>) -> Self {
        debug_assert_eq!(kinks.len() + 1, slopes.len());
        debug_assert!(kinks.windows(2).all(|w| w[0] < w[1]));
        PiecewiseLinear { kinks, slopes }
    }

    pub fn zero() -> Self {
        PiecewiseLinear {
            kinks: Vec::new(),
            slopes: vec![0.0],
        }
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Weighted sum `self + w * other`.
    pub fn add_scaled(&self, other: &PiecewiseLinear, w: f64) -> PiecewiseLinear {
        let mut kinks: Vec<f64> = self.kinks.iter().chain(&other.kinks).copied().collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        let piece = |pl: &PiecewiseLinear, region: usize| -> f64 {
            // number of pl's own kinks at or left of the region's left edge
            let idx = if region == 0 {
                0
            } else {
                let left = kinks[region - 1];
                pl.kinks.partition_point(|&k| k <= left)
            };
            pl.slopes[idx]
        };
        let slopes = (0..=kinks.len())
            .map(|r| piece(self, r) + w * piece(other, r))
            .collect();
        PiecewiseLinear { kinks, slopes }
    }

    /// Index of the piece containing `t` (kinks belong to the right piece).
    fn piece_of(&self, t: f64) -> usize {
        self.kinks.partition_point(|&k| k <= t)
    }

    pub fn subdifferential(&self, t: f64) -> (f64, f64) {
        let i = self.kinks.partition_point(|&k| k < t);
        if i < self.kinks.len() && self.kinks[i] == t {
            (self.slopes[i], self.slopes[i + 1])
        } else {
            let s = self.slopes[i];
            (s, s)
        }
    }

    /// Proximal point of `mu * self` at `t`: returns the prox location and,
    /// when it sits on a kink, that kink's index.
    pub fn prox(&self, t: f64, mu: f64) -> (f64, Option<usize>) {
        for (i, &k) in self.kinks.iter().enumerate() {
            let lo = k + mu * self.slopes[i];
            let hi = k + mu * self.slopes[i + 1];
            if t < lo {
                return (t - mu * self.slopes[i], None);
            }
            if t <= hi {
                return (k, Some(i));
            }
        }
        (t - mu * self.slopes[self.kinks.len()], None)
    }

    /// Gradient and curvature of the Moreau envelope with parameter `mu`.
    pub fn moreau_derivatives(&self, t: f64, mu: f64) -> (f64, f64) {
        match self.prox(t, mu) {
            (p, Some(_)) => ((t - p) / mu, 1.0 / mu),
            (p, None) => ((t - p) / mu, 0.0),
        }
    }

    /// Slope of the piece containing `t` and its closed extent.
    pub(crate) fn piece(&self, index: usize) -> (f64, f64, f64) {
        let lo = if index == 0 {
            f64::NEG_INFINITY
        } else {
            self.kinks[index - 1]
        };
        let hi = self.kinks.get(index).copied().unwrap_or(f64::INFINITY);
        (self.slopes[index], lo, hi)
    }

    pub(crate) fn piece_index(&self, t: f64) -> usize {
        self.piece_of(t)
    }
}

/// Sampling plan for [`verify_loss_contract`]: an evenly spaced grid of `t`
/// values on `[t_min, t_max]`; labels run over the same grid (or {-1, 1} for
/// classification losses).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for ContractGrid {
    fn default() -> Self {
        ContractGrid {
            t_min: -10.0,
            t_max: 10.0,
            points: 41,
        }
    }
}

impl ContractGrid {
    fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let step = (self.t_max - self.t_min) / (n - 1) as f64;
        (0..n).map(|i| self.t_min + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub passed: bool,
    /// Largest amount by which the clause was exceeded (0 when it holds).
    pub worst_violation: f64,
}

impl ClauseResult {
    fn from_violation(worst: f64, slack: f64) -> Self {
        ClauseResult {
            passed: worst <= slack,
            worst_violation: worst.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub loss: String,
    pub declared_lipschitz: f64,
    pub triples: usize,
    pub diagonal_zero: ClauseResult,
    pub convexity: ClauseResult,
    pub lipschitz: ClauseResult,
    pub subgradient_bounds: ClauseResult,
    /// Largest difference quotient seen on the grid.
    pub max_quotient: f64,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.diagonal_zero.passed
            && self.convexity.passed
            && self.lipschitz.passed
            && self.subgradient_bounds.passed
    }
}

/// Checks the loss contract (diagonal zero, convexity in `t`, Lipschitz with
/// the declared constant, bounded subgradients) on every grid triple.
pub fn verify_loss_contract(loss: &Loss, grid: &ContractGrid) -> ContractReport {
    const SLACK: f64 = 1e-12;
    let ts = grid.values();
    let ys: Vec<f64> = if loss.is_classification() {
        vec![-1.0, 1.0]
    } else {
        ts.clone()
    };
    let lip = loss.lipschitz();

    let mut diag = 0.0f64;
    let mut convex = 0.0f64;
    let mut lipschitz = 0.0f64;
    let mut subgrad = 0.0f64;
    let mut max_q = 0.0f64;
    let mut triples = 0usize;

    for &y in &ys {
        diag = diag.max(loss.value(y, y).abs());
        let vals: Vec<f64> = ts.iter().map(|&t| loss.value(y, t)).collect();
        for (i, &t) in ts.iter().enumerate() {
            let (lo, hi) = loss.subdifferential(y, t);
            subgrad = subgrad.max(lo - hi).max(lo.abs() - lip).max(hi.abs() - lip);
            for j in (i + 1)..ts.len() {
                let tp = ts[j];
                triples += 1;
                let q = (vals[i] - vals[j]).abs() / (tp - t);
                max_q = max_q.max(q);
                lipschitz = lipschitz.max(q - lip);
                let mid = loss.value(y, 0.5 * (t + tp));
                convex = convex.max(mid - 0.5 * (vals[i] + vals[j]));
            }
        }
    }

    ContractReport {
        loss: loss.to_string(),
        declared_lipschitz: lip,
        triples,
        diagonal_zero: ClauseResult::from_violation(diag, SLACK),
        convexity: ClauseResult::from_violation(convex, SLACK),
        lipschitz: ClauseResult::from_violation(lipschitz, SLACK),
        subgradient_bounds: ClauseResult::from_violation(subgrad, SLACK),
        max_quotient: max_q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: &[f64] = &[0.0];

    #[test]
    fn spot_values() {
        let pinball = Loss::pinball(0.5).unwrap();
        assert_eq!(pinball.eval(X, 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(Loss::hinge().eval(X, 1.0, 0.0).unwrap(), 1.0);
        for loss in all_losses() {
            let y = if loss.is_classification() { -1.0 } else { 0.7 };
            assert!(loss.eval(X, y, y).unwrap().abs() < 1e-12, "{loss}");
        }
    }

    #[test]
    fn shifted_values() {
        let abs = Loss::absolute();
        let view = ShiftedLoss::new(&abs);
        assert_eq!(view.eval(X, 1.0, 1.0).unwrap(), -1.0);
        assert_eq!(view.eval(X, 1.0, 2.0).unwrap(), 0.0);
        for loss in all_losses() {
            assert_eq!(loss.eval_shifted(X, 1.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(
            Loss::hinge().subgradient_interval(X, 1.0, 1.0).unwrap(),
            (-1.0, 0.0)
        );
        let eps = Loss::epsilon_insensitive(0.1).unwrap();
        assert_eq!(eps.subgradient_interval(X, 0.0, 0.05).unwrap(), (0.0, 0.0));
        assert_eq!(
            Loss::absolute().subgradient_interval(X, 1.0, 2.0).unwrap(),
            (1.0, 1.0)
        );
    }

    #[test]
    fn hinge_rejects_regression_labels() {
        assert!(matches!(
            Loss::hinge().eval(X, 0.5, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(Loss::absolute().eval(X, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn contract_examples() {
        let grid = ContractGrid::default();
        assert!(verify_loss_contract(&Loss::hinge(), &grid).passed());

        let ls = verify_loss_contract(&Loss::least_squares(), &grid);
        assert!(!ls.lipschitz.passed);
        assert!(ls.diagonal_zero.passed && ls.convexity.passed);
        // the quotient between t = 10 and t' = 9 alone is 19
        assert!(ls.max_quotient >= 19.0);

        let pinball = Loss::with_lipschitz(LossKind::Pinball { tau: 0.3 }, 0.7).unwrap();
        let report = verify_loss_contract(&pinball, &grid);
        assert!(report.passed());
        assert!((report.max_quotient - 0.7).abs() < 1e-12);
        assert!(report.triples >= 100);
    }

    #[test]
    fn understated_lipschitz_is_caught() {
        let huber = Loss::with_lipschitz(LossKind::Huber { delta: 2.0 }, 1.0).unwrap();
        assert!(
            !verify_loss_contract(&huber, &ContractGrid::default())
                .lipschitz
                .passed
        );
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "hinge",
            "logistic",
            "absolute",
            "eps_insensitive:0.1",
            "huber:1.35",
            "pinball:0.5",
            "least_squares",
        ] {
            let loss: Loss = s.parse().unwrap();
            assert_eq!(loss.to_string(), s);
        }
        for bad in [
            "",
            "hinge:1",
            "huber",
            "huber:0",
            "pinball:1",
            "eps_insensitive:-1",
            "l2",
        ] {
            assert!(bad.parse::<Loss>().is_err(), "{bad}");
        }
    }

    #[test]
    fn piecewise_sum_and_prox() {
        let a = Loss::absolute().piecewise_linear(X, 1.0).unwrap();
        let b = Loss::absolute().piecewise_linear(X, -1.0).unwrap();
        let s = PiecewiseLinear::zero()
            .add_scaled(&a, 0.5)
            .add_scaled(&b, 0.5);
        assert_eq!(s.kinks(), &[-1.0, 1.0]);
        assert_eq!(s.slopes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.subdifferential(-1.0), (-1.0, 0.0));
        // inside the flat piece the prox is the identity
        assert_eq!(s.prox(0.3, 0.1), (0.3, None));
        assert_eq!(s.prox(1.05, 0.1), (1.0, Some(1)));
        assert!((s.prox(2.0, 0.1).0 - 1.9).abs() < 1e-15);
    }

    pub(crate) fn all_losses() -> Vec<Loss> {
        vec![
            Loss::hinge(),
            Loss::logistic(),
            Loss::absolute(),
            Loss::epsilon_insensitive(0.1).unwrap(),
            Loss::huber(1.35).unwrap(),
            Loss::pinball(0.3).unwrap(),
        ]
    }
}
