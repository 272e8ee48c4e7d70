//! Finitely supported probability measures on `X x Y`, with the contamination,
//! jitter and sampling models used by the experiments.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Atom {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Atom { x, y }
    }

    fn key(&self) -> Vec<u64> {
        // +0.0 folds -0.0 onto 0.0
        self.x
            .iter()
            .chain(std::iter::once(&self.y))
            .map(|v| (v + 0.0).to_bits())
            .collect()
    }

    /// Euclidean distance between the concatenated `(x, y)` vectors.
    pub fn distance(&self, other: &Atom) -> f64 {
        let dx: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (dx + (self.y - other.y).powi(2)).sqrt()
    }
}

pub type Dataset = Vec<Atom>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
}

/// JSON layout: `{"atoms": [[x_1, ..., x_d, y], ...], "weights": [...]}`;
/// missing weights mean uniform.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    atoms: Vec<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        let atoms = r
            .atoms
            .into_iter()
            .map(|mut row| match row.pop() {
                Some(y) if !row.is_empty() => Ok(Atom::new(row, y)),
                _ => Err(Error::InvalidMeasure(
                    "each atom needs at least one input coordinate and a label".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        match r.weights {
            Some(w) => DiscreteMeasure::new(atoms, w),
            None => DiscreteMeasure::uniform(atoms),
        }
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            atoms: m
                .atoms
                .into_iter()
                .map(|a| {
                    let mut row = a.x;
                    row.push(a.y);
                    row
                })
                .collect(),
            weights: Some(m.weights),
        }
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Atom>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let d = atoms[0].x.len();
        for a in &atoms {
            if a.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.x.len(),
                });
            }
            if a.x.iter().any(|v| !v.is_finite()) || !a.y.is_finite() {
                return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let tol = 1e-12 + weights.len() as f64 * f64::EPSILON;
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// The Dirac measure at `(x, y)`.
    pub fn dirac(x: Vec<f64>, y: f64) -> Self {
        DiscreteMeasure {
            atoms: vec![Atom::new(x, y)],
            weights: vec![1.0],
        }
    }

    /// Uniform weights over the given atoms; duplicates stay separate.
    pub fn uniform(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("empty dataset".into()));
        }
        let w = 1.0 / atoms.len() as f64;
        let weights = vec![w; atoms.len()];
        DiscreteMeasure::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].x.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Identical atoms merged (weights summed), zero-weight atoms dropped,
    /// first-appearance order kept.
    pub fn merged(&self) -> DiscreteMeasure {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (a, w) in self.iter() {
            if w == 0.0 {
                continue;
            }
            match index.get(&a.key()) {
                Some(&i) => weights[i] += w,
                None => {
                    index.insert(a.key(), atoms.len());
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure { atoms, weights }
    }

    /// Atoms grouped by input point: `(x, [(y, w), ...])`, zero weights dropped.
    pub fn grouped_by_input(&self) -> Vec<(Vec<f64>, Vec<(f64, f64)>)> {
        let mut groups: Vec<(Vec<f64>, Vec<(f64, f64)>)> = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (a, w) in self.iter() {
            if w == 0.0 {
                continue;
            }
            let key: Vec<u64> = a.x.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&i) => groups[i].1.push((a.y, w)),
                None => {
                    index.insert(key, groups.len());
                    groups.push((a.x.clone(), vec![(a.y, w)]));
                }
            }
        }
        groups
    }

    /// Weighted mean of the input points.
    pub fn input_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (a, w) in self.iter() {
            for (m, v) in mean.iter_mut().zip(&a.x) {
                *m += w * v;
            }
        }
        mean
    }

    /// `sum_i |p_i - q_i|` over the union of atoms (twice the total variation).
    pub fn l1_distance(&self, other: &DiscreteMeasure) -> f64 {
        let mut mass: HashMap<Vec<u64>, f64> = HashMap::new();
        for (a, w) in self.iter() {
            *mass.entry(a.key()).or_default() += w;
        }
        for (a, w) in other.iter() {
            *mass.entry(a.key()).or_default() -= w;
        }
        mass.values().map(|v| v.abs()).sum()
    }
}

/// Empirical measure of a dataset: weight `1/n` per observation.
pub fn empirical_from(dataset: &[Atom]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(dataset.to_vec())
}

/// The mixture `(1 - delta) P + delta Q`, identical atoms merged.
pub fn contaminate(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    delta: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "contamination level {delta} outside [0, 1]"
        )));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let atoms: Vec<Atom> = p.atoms.iter().chain(&q.atoms).cloned().collect();
    let weights: Vec<f64> = p
        .weights
        .iter()
        .map(|w| (1.0 - delta) * w)
        .chain(q.weights.iter().map(|w| delta * w))
        .collect();
    Ok(DiscreteMeasure { atoms, weights }.merged())
}

/// Moves every atom by independent uniform noise on `[-scale, scale]` in each
/// coordinate of `(x, y)`. Weights are unchanged.
pub fn jitter(p: &DiscreteMeasure, scale: f64, seed: u64) -> Result<DiscreteMeasure> {
    jitter_with(p, scale, seed, true)
}

/// As [`jitter`] but leaves the labels alone (for classification measures).
pub fn jitter_inputs(p: &DiscreteMeasure, scale: f64, seed: u64) -> Result<DiscreteMeasure> {
    jitter_with(p, scale, seed, false)
}

fn jitter_with(
    p: &DiscreteMeasure,
    scale: f64,
    seed: u64,
    labels: bool,
) -> Result<DiscreteMeasure> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "jitter scale {scale} must be >= 0"
        )));
    }
    if scale == 0.0 {
        return Ok(p.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = p
        .atoms
        .iter()
        .map(|a| {
            let x =
                a.x.iter()
                    .map(|v| v + rng.random_range(-scale..=scale))
                    .collect();
            let y = if labels {
                a.y + rng.random_range(-scale..=scale)
            } else {
                a.y
            };
            Atom::new(x, y)
        })
        .collect();
    Ok(DiscreteMeasure {
        atoms,
        weights: p.weights.clone(),
    })
}

/// `n` i.i.d. draws from `p`.
pub fn sample(p: &DiscreteMeasure, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(p, n, &mut rng)
}

pub(crate) fn sample_with<R: Rng>(p: &DiscreteMeasure, n: usize, rng: &mut R) -> Result<Dataset> {
    if p.len() == 1 {
        return Ok(vec![p.atoms[0].clone(); n]);
    }
    let dist = WeightedIndex::new(&p.weights)
        .map_err(|e| Error::InvalidMeasure(format!("cannot sample: {e}")))?;
    Ok((0..n).map(|_| p.atoms[dist.sample(rng)].clone()).collect())
}

/// Pairwise data-space distances on the union of supports: indices
/// `0..p.len()` are the atoms of `p`, followed by those of `q`.
pub fn data_distance_matrix(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Vec<Vec<f64>> {
    let all: Vec<&Atom> = p.atoms.iter().chain(&q.atoms).collect();
    all.iter()
        .map(|a| all.iter().map(|b| a.distance(b)).collect())
        .collect()
}
