//! Experiment configuration: TOML documents with strict keys.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::losses::Loss;
use crate::measures::{Atom, DiscreteMeasure};
use crate::solver::SolverOptions;

pub const DEFAULT_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Continuity,
    QualitativeRobustness,
    LambdaDecay,
    Consistency,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::QualitativeRobustness => "qualitative-robustness",
            ExperimentKind::LambdaDecay => "lambda-decay",
            ExperimentKind::Consistency => "consistency",
        })
    }
}

/// `lambda_n = scale * n^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSchedule {
    #[serde(default = "one")]
    pub scale: f64,
    pub exponent: f64,
}

impl LambdaSchedule {
    pub fn at(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Regression,
    Classification,
}

/// Either explicit atoms (`[x..., y]` rows) with weights, or a seeded
/// generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MeasureSpec {
    pub fn from_measure(m: &DiscreteMeasure) -> Self {
        MeasureSpec {
            atoms: Some(
                m.atoms()
                    .iter()
                    .map(|a| a.x.iter().copied().chain([a.y]).collect())
                    .collect(),
            ),
            weights: Some(m.weights().to_vec()),
            ..Default::default()
        }
    }

    pub fn build(&self, field: &str) -> Result<DiscreteMeasure> {
        let err = |msg: String| Error::config(field, msg);
        match (&self.atoms, &self.generate) {
            (Some(rows), None) => {
                if self.size.is_some() || self.dim.is_some() || self.seed.is_some() {
                    return Err(err("size/dim/seed only apply to generated measures".into()));
                }
                let atoms = rows
                    .iter()
                    .map(|row| match row.split_last() {
                        Some((&y, x)) if !x.is_empty() => Ok(Atom::new(x.to_vec(), y)),
                        _ => Err(err(
                            "each atom row needs at least one input and a label".into()
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let weights = match &self.weights {
                    Some(w) => w.clone(),
                    None => vec![1.0 / atoms.len().max(1) as f64; atoms.len()],
                };
                DiscreteMeasure::new(atoms, weights).map_err(|e| err(e.to_string()))
            }
            (None, Some(kind)) => {
                if self.weights.is_some() {
                    return Err(err("weights only apply to explicit atoms".into()));
                }
                let size = self.size.unwrap_or(20);
                let dim = self.dim.unwrap_or(1);
                if size == 0 || dim == 0 {
                    return Err(err("size and dim must be at least 1".into()));
                }
                Ok(generate(*kind, size, dim, self.seed.unwrap_or(0)))
            }
            (Some(_), Some(_)) => Err(err("give either atoms or generate, not both".into())),
            (None, None) => Err(err("needs atoms or generate".into())),
        }
    }
}

/// A finitely supported measure with uniform weights on `size` points drawn
/// uniformly from `[-1, 1]^dim`. Regression labels are `sin(pi x_1)` plus
/// uniform noise of width 0.1; classification labels are the sign of
/// `x_1 + x_2 / 2`, flipped with probability 0.1.
pub fn generate(kind: Generator, size: usize, dim: usize, seed: u64) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<Atom> = (0..size)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let y = match kind {
                Generator::Regression => {
                    (std::f64::consts::PI * x[0]).sin() + rng.random_range(-0.1..=0.1)
                }
                Generator::Classification => {
                    let s = x[0] + 0.5 * x.get(1).copied().unwrap_or(0.0);
                    let y = if s >= 0.0 { 1.0 } else { -1.0 };
                    if rng.random_bool(0.1) {
                        -y
                    } else {
                        y
                    }
                }
            };
            Atom::new(x, y)
        })
        .collect();
    DiscreteMeasure::uniform(atoms).expect("nonempty")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContaminationModel {
    /// `(1 - delta) P + delta Q`
    #[default]
    Mixture,
    /// every atom moved by at most `delta`
    Jitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub delta: Vec<f64>,
    #[serde(default)]
    pub model: ContaminationModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contaminant: Option<MeasureSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Jitter,
    Empirical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JitterSchedule {
    /// `s_m = base * ratio^m`
    #[default]
    Geometric,
    /// `s_m = base / m`
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuitySpec {
    #[serde(default)]
    pub family: Family,
    #[serde(default)]
    pub schedule: JitterSchedule,
    #[serde(default = "one")]
    pub base: f64,
    #[serde(default = "half")]
    pub ratio: f64,
    /// Final median H-distance must fall below this fraction of
    /// `|L|_1 |k|_inf / lambda`.
    #[serde(default = "five_percent")]
    pub final_fraction: f64,
}

impl Default for ContinuitySpec {
    fn default() -> Self {
        ContinuitySpec {
            family: Family::default(),
            schedule: JitterSchedule::default(),
            base: 1.0,
            ratio: 0.5,
            final_fraction: 0.05,
        }
    }
}

impl ContinuitySpec {
    pub fn scale(&self, m: usize) -> f64 {
        match self.schedule {
            JitterSchedule::Geometric => self.base * self.ratio.powi(m as i32),
            JitterSchedule::Harmonic => self.base / m as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaDecaySpec {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(with = "as_string")]
    pub loss: Loss,
    #[serde(with = "as_string")]
    pub kernel: Kernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Points where sup-distances are evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    /// The point `x*` for one-dimensional pushforwards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_schedule: Option<LambdaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contamination: Option<ContaminationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity: Option<ContinuitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_decay: Option<LambdaDecaySpec>,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn five_percent() -> f64 {
    0.05
}
fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

mod as_string {
    use super::*;

    pub fn serialize<T: fmt::Display, S: Serializer>(
        v: &T,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
    where
        T: FromStr,
        T::Err: fmt::Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    /// The kernel with the configured domain bound attached.
    pub fn bounded_kernel(&self) -> Result<Kernel> {
        self.kernel
            .with_domain_bound(self.domain_bound)
            .map_err(|e| Error::config("domain_bound", e.to_string()))
    }

    pub fn lambda_at(&self, n: usize) -> f64 {
        match (self.lambda, &self.lambda_schedule) {
            (Some(l), _) => l,
            (None, Some(s)) => s.at(n),
            (None, None) => f64::NAN,
        }
    }

    pub fn base(&self) -> Result<DiscreteMeasure> {
        match (&self.base_measure, &self.lambda_decay) {
            (Some(spec), _) => spec.build("base_measure"),
            (None, Some(ld)) => Ok(DiscreteMeasure::dirac(ld.x0.clone(), 0.0)),
            (None, None) => Err(Error::config("base_measure", "missing")),
        }
    }

    pub fn contaminant(&self) -> Result<Option<DiscreteMeasure>> {
        if let Some(ld) = &self.lambda_decay {
            return Ok(Some(DiscreteMeasure::dirac(ld.x1.clone(), 1.0)));
        }
        match self
            .contamination
            .as_ref()
            .and_then(|c| c.contaminant.as_ref())
        {
            Some(spec) => spec.build("contamination.contaminant").map(Some),
            None => Ok(None),
        }
    }

    /// Semantic checks, then defaults (tolerance, probes) filled in.
    pub fn validate(mut self) -> Result<Self> {
        use ExperimentKind::*;
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must not be empty"));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::config("n_grid", "entries must be at least 1"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_grid", "must be strictly ascending"));
        }
        if matches!(self.kind, Continuity | Consistency) && self.n_grid.len() < 2 {
            return Err(Error::config("n_grid", "needs at least two entries"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        self.solver
            .validate()
            .map_err(|e| prefix_field(e, "solver"))?;
        if !self.loss.satisfies_contract() && !self.solver.allow_contract_violation {
            return Err(Error::config(
                "loss",
                format!("{} is not uniformly Lipschitz", self.loss),
            ));
        }
        let kernel = self.bounded_kernel()?;
        kernel
            .sup_norm()
            .map_err(|e| Error::config("kernel", e.to_string()))?;

        match (self.lambda, &self.lambda_schedule, self.kind) {
            (Some(_), Some(_), _) => {
                return Err(Error::config(
                    "lambda",
                    "give lambda or lambda_schedule, not both",
                ))
            }
            (None, Some(s), LambdaDecay) => {
                if !(s.scale > 0.0 && s.scale.is_finite()) {
                    return Err(Error::config("lambda_schedule.scale", "must be positive"));
                }
                if !(s.exponent > 0.0 && s.exponent.is_finite()) {
                    return Err(Error::config(
                        "lambda_schedule.exponent",
                        "must be positive so that lambda_n -> 0",
                    ));
                }
            }
            (_, _, LambdaDecay) => {
                return Err(Error::config(
                    "lambda_schedule",
                    "required for lambda-decay",
                ))
            }
            (Some(l), None, _) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::config("lambda", format!("{l} must be positive")));
                }
            }
            (None, _, _) => return Err(Error::config("lambda", "a fixed lambda is required")),
        }

        if let Some(c) = &self.contamination {
            if c.delta.is_empty() {
                return Err(Error::config("contamination.delta", "must not be empty"));
            }
            for &d in &c.delta {
                let ok = match c.model {
                    ContaminationModel::Mixture => (0.0..1.0).contains(&d),
                    ContaminationModel::Jitter => d >= 0.0 && d.is_finite(),
                };
                if !ok {
                    return Err(Error::config(
                        "contamination.delta",
                        format!("{d} out of [0,1)"),
                    ));
                }
            }
            if c.model == ContaminationModel::Jitter && c.contaminant.is_some() {
                return Err(Error::config(
                    "contamination.contaminant",
                    "not used by the jitter model",
                ));
            }
        }

        match self.kind {
            LambdaDecay => {
                let ld = self
                    .lambda_decay
                    .as_ref()
                    .ok_or_else(|| Error::config("lambda_decay", "required for lambda-decay"))?;
                if self.base_measure.is_some() {
                    return Err(Error::config(
                        "base_measure",
                        "lambda-decay builds its measures from lambda_decay.x0 / x1",
                    ));
                }
                if !(ld.gamma > 0.0 && ld.gamma < 1.0) {
                    return Err(Error::config("lambda_decay.gamma", "must lie in (0, 1)"));
                }
                if ld.x0.is_empty() || ld.x0.len() != ld.x1.len() {
                    return Err(Error::config(
                        "lambda_decay.x1",
                        "x0 and x1 need the same dimension",
                    ));
                }
                if ld.x0 == ld.x1 {
                    return Err(Error::config("lambda_decay.x1", "must differ from x0"));
                }
                kernel
                    .check_point(&ld.x0)
                    .and_then(|_| kernel.check_point(&ld.x1))
                    .map_err(|e| Error::config("lambda_decay", e.to_string()))?;
                self.loss
                    .check_label(0.0)
                    .and_then(|_| self.loss.check_label(1.0))
                    .map_err(|e| Error::config("loss", e.to_string()))?;
                if !(self.loss.value(1.0, 0.0) > 0.0) {
                    return Err(Error::config(
                        "loss",
                        "needs L(x1, 1, 0) > 0 for the counterexample",
                    ));
                }
                match &self.contamination {
                    Some(c)
                        if c.model == ContaminationModel::Mixture && c.contaminant.is_none() => {}
                    Some(_) => {
                        return Err(Error::config(
                            "contamination",
                            "lambda-decay uses the mixture model with the fixed contaminant at x1",
                        ))
                    }
                    None => return Err(Error::config("contamination.delta", "required")),
                }
            }
            QualitativeRobustness => {
                let c = self
                    .contamination
                    .as_ref()
                    .ok_or_else(|| Error::config("contamination", "required"))?;
                if c.model == ContaminationModel::Mixture && c.contaminant.is_none() {
                    return Err(Error::config(
                        "contamination.contaminant",
                        "required by the mixture model",
                    ));
                }
            }
            Continuity | Consistency => {
                if self.contamination.is_some() {
                    return Err(Error::config(
                        "contamination",
                        format!("not used by {}", self.kind),
                    ));
                }
            }
        }
        if self.lambda_decay.is_some() && self.kind != LambdaDecay {
            return Err(Error::config(
                "lambda_decay",
                format!("not used by {}", self.kind),
            ));
        }
        if self.continuity.is_some() && self.kind != Continuity {
            return Err(Error::config(
                "continuity",
                format!("not used by {}", self.kind),
            ));
        }
        if self.kind == Continuity {
            let spec = self.continuity.get_or_insert_with(ContinuitySpec::default);
            if !(spec.base > 0.0 && spec.base.is_finite()) {
                return Err(Error::config("continuity.base", "must be positive"));
            }
            if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
                return Err(Error::config("continuity.ratio", "must lie in (0, 1)"));
            }
            if !(spec.final_fraction > 0.0) {
                return Err(Error::config(
                    "continuity.final_fraction",
                    "must be positive",
                ));
            }
        }

        // measures, labels and domain
        let base = self.base()?;
        let contaminant = self.contaminant()?;
        for (field, m) in std::iter::once(("base_measure", &base)).chain(
            contaminant
                .as_ref()
                .map(|q| ("contamination.contaminant", q)),
        ) {
            if m.dim() != base.dim() {
                return Err(Error::config(
                    field,
                    "dimension differs from the base measure",
                ));
            }
            for (a, _) in m.iter() {
                kernel
                    .check_point(&a.x)
                    .map_err(|e| Error::config(field, e.to_string()))?;
                self.loss
                    .check_label(a.y)
                    .map_err(|e| Error::config(field, e.to_string()))?;
            }
        }
        let dim = base.dim();
        if let Some(probe) = &self.probe {
            if probe.len() != dim {
                return Err(Error::config("probe", format!("expected dimension {dim}")));
            }
            kernel
                .check_point(probe)
                .map_err(|e| Error::config("probe", e.to_string()))?;
        }
        match &self.probes {
            Some(p) => {
                if p.is_empty() {
                    return Err(Error::config("probes", "must not be empty"));
                }
                for x in p {
                    if x.len() != dim {
                        return Err(Error::config("probes", format!("expected dimension {dim}")));
                    }
                    kernel
                        .check_point(x)
                        .map_err(|e| Error::config("probes", e.to_string()))?;
                }
            }
            None => self.probes = Some(auto_probes(&kernel, &base, contaminant.as_ref())),
        }
        if self.probe.is_none() {
            self.probe = Some(match &self.lambda_decay {
                Some(ld) => ld.x1.clone(),
                None => base.input_mean(),
            });
        }
        if self.solver.tolerance.is_none() {
            self.solver.tolerance = Some(self.solver.tolerance_for(&self.loss));
        }
        Ok(self)
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{prefix}.{field}"), message),
        other => other,
    }
}

/// Input points of the measures, plus a 41-point grid spanning them (with a
/// margin of 1) in one dimension. Points outside the kernel domain are
/// dropped.
pub fn auto_probes(
    kernel: &Kernel,
    base: &DiscreteMeasure,
    extra: Option<&DiscreteMeasure>,
) -> Vec<Vec<f64>> {
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for m in std::iter::once(base).chain(extra) {
        for (a, _) in m.iter() {
            if !probes.contains(&a.x) {
                probes.push(a.x.clone());
            }
        }
    }
    if base.dim() == 1 {
        let lo = probes.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - 1.0;
        let hi = probes
            .iter()
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max)
            + 1.0;
        for i in 0..41 {
            let x = vec![lo + (hi - lo) * i as f64 / 40.0];
            if kernel.check_point(&x).is_ok() && !probes.contains(&x) {
                probes.push(x);
            }
        }
    }
    probes
}

/// Parses and validates a TOML experiment configuration.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config("config", e.to_string()))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "continuity"
loss = "logistic"
kernel = "rbf:1"
lambda = 0.1
n_grid = [1, 2, 3]

[base_measure]
generate = "regression"
size = 5
"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.replicates, 200);
        assert_eq!(cfg.solver.tolerance, Some(1e-6));
        assert!(cfg.probes.as_ref().unwrap().len() >= 5);
        assert_eq!(cfg.continuity, Some(ContinuitySpec::default()));
        assert_eq!(cfg.probe.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let text = config_to_toml(&cfg).unwrap();
        let again = parse_config_str(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn delta_out_of_range() {
        let text = r#"
kind = "qualitative-robustness"
loss = "hinge"
kernel = "rbf:1"
lambda = 1.0
n_grid = [10]

[base_measure]
generate = "classification"

[contamination]
delta = [0.0, 1.5]
contaminant = { atoms = [[2.0, -1.0]] }
"#;
        let err = parse_config_str(text).unwrap_err();
        assert!(err.to_string().contains("contamination.delta"), "{err}");
        assert!(err.to_string().contains("out of [0,1)"), "{err}");
    }

    #[test]
    fn unknown_keys_report_position() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        match parse_config_str(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line > 0);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("size = 5", "size = 5\ncolour = 2");
        assert!(matches!(parse_config_str(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let cases = [
            (
                MINIMAL.replace("n_grid = [1, 2, 3]", "n_grid = [3, 2]"),
                "n_grid",
            ),
            (MINIMAL.replace("lambda = 0.1", "lambda = -1.0"), "lambda"),
            (MINIMAL.replace("\"logistic\"", "\"least_squares\""), "loss"),
            (MINIMAL.replace("\"rbf:1\"", "\"linear\""), "kernel"),
            (
                MINIMAL.replace(
                    "generate = \"regression\"",
                    "generate = \"regression\"\nweights = [1.0]",
                ),
                "base_measure",
            ),
        ];
        for (text, field) in cases {
            match parse_config_str(&text) {
                Err(Error::Config { field: f, .. }) => {
                    assert!(f.starts_with(field), "{f} vs {field}")
                }
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn lambda_decay_requirements() {
        let good = r#"
kind = "lambda-decay"
loss = "absolute"
kernel = "rbf:1"
n_grid = [50, 100]
lambda_schedule = { exponent = 0.5 }

[contamination]
delta = [0.2]

[lambda_decay]
x0 = [0.0]
x1 = [0.08]
gamma = 0.5
"#;
        let cfg = parse_config_str(good).unwrap();
        assert_eq!(cfg.probe, Some(vec![0.08]));
        assert!((cfg.lambda_at(100) - 0.1).abs() < 1e-15);
        let bad = good.replace("gamma = 0.5", "gamma = 1.5");
        assert!(parse_config_str(&bad).is_err());
        let bad = good.replace("\"absolute\"", "\"eps_insensitive:2\"");
        assert!(matches!(parse_config_str(&bad), Err(Error::Config { .. })));
        let bad = good.replace("exponent = 0.5", "exponent = 0.0");
        assert!(parse_config_str(&bad).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate(Generator::Classification, 10, 2, 3);
        assert_eq!(a, generate(Generator::Classification, 10, 2, 3));
        assert!(a.atoms().iter().all(|x| x.y == 1.0 || x.y == -1.0));
        let r = generate(Generator::Regression, 10, 1, 3);
        assert!(r.atoms().iter().all(|x| x.x[0].abs() <= 1.0));
    }
}
