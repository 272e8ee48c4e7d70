//! Bounded kernels on `R^d` and arithmetic on finite kernel expansions
//! `f = sum_j a_j k(., x_j)` in the associated RKHS.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `exp(-gamma |x - x'|^2)`
    Rbf { gamma: f64 },
    /// `<x, x'>`
    Linear,
    /// `(<x, x'> + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `exp(<x, x'>)`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    kind: KernelKind,
    domain_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRepr {
    spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_bound: Option<f64>,
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        let k: Kernel = r.spec.parse()?;
        k.with_domain_bound(r.domain_bound)
    }
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> Self {
        KernelRepr {
            spec: k.to_string(),
            domain_bound: k.domain_bound,
        }
    }
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Result<Self> {
        match kind {
            KernelKind::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                return Err(Error::InvalidArgument(format!(
                    "rbf bandwidth must be positive, got {gamma}"
                )))
            }
            KernelKind::Polynomial { degree, offset }
                if degree == 0 || !(offset >= 0.0 && offset.is_finite()) =>
            {
                return Err(Error::InvalidArgument(format!(
                    "polynomial kernel needs degree >= 1 and offset >= 0, got {degree}, {offset}"
                )))
            }
            _ => {}
        }
        Ok(Kernel {
            kind,
            domain_bound: None,
        })
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Kernel::new(KernelKind::Rbf { gamma })
    }

    pub fn linear() -> Self {
        Kernel::new(KernelKind::Linear).unwrap()
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        Kernel::new(KernelKind::Polynomial { degree, offset })
    }

    pub fn exponential() -> Self {
        Kernel::new(KernelKind::Exponential).unwrap()
    }

    /// Restricts the input domain to the closed ball of radius `bound`.
    pub fn with_domain_bound(mut self, bound: Option<f64>) -> Result<Self> {
        if let Some(r) = bound {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "domain bound must be positive, got {r}"
                )));
            }
        }
        self.domain_bound = bound;
        Ok(self)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn domain_bound(&self) -> Option<f64> {
        self.domain_bound
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "input point has a non-finite coordinate".into(),
            ));
        }
        if let Some(bound) = self.domain_bound {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > bound * (1.0 + 1e-12) {
                return Err(Error::OutsideDomain { norm, bound });
            }
        }
        Ok(())
    }

    /// `k(x, x')`, validated.
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: xp.len(),
            });
        }
        self.check_point(x)?;
        self.check_point(xp)?;
        Ok(self.value(x, xp))
    }

    /// `k(x, x')` without validation; lengths must agree.
    pub fn value(&self, x: &[f64], xp: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelKind::Linear => dot(x, xp),
            KernelKind::Polynomial { degree, offset } => (dot(x, xp) + offset).powi(degree as i32),
            KernelKind::Exponential => dot(x, xp).exp(),
        }
    }

    /// `sup_x sqrt(k(x, x))` over the domain.
    pub fn sup_norm(&self) -> Result<f64> {
        match (self.kind, self.domain_bound) {
            (KernelKind::Rbf { .. }, _) => Ok(1.0),
            (KernelKind::Linear, Some(r)) => Ok(r),
            (KernelKind::Polynomial { degree, offset }, Some(r)) => {
                Ok((r * r + offset).powf(degree as f64 / 2.0))
            }
            (KernelKind::Exponential, Some(r)) => Ok((r * r / 2.0).exp()),
            (_, None) => Err(Error::UnboundedKernel(self.to_string())),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_norm().is_ok()
    }

    /// Gram matrix `K_ij = k(x_i, x_j)`.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "gram matrix of an empty point list".into(),
            ));
        }
        let d = points[0].len();
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            self.check_point(p)?;
        }
        Ok(self.gram_unchecked(points))
    }

    pub(crate) fn gram_unchecked(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.value(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    pub(crate) fn cross_unchecked(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.value(&a[i], &b[j]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Rbf { gamma } => write!(f, "rbf:{gamma}"),
            KernelKind::Linear => write!(f, "linear"),
            KernelKind::Polynomial { degree, offset } => write!(f, "poly:{degree}:{offset}"),
            KernelKind::Exponential => write!(f, "exp"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("kernel `{s}`: bad number `{p}`")))
        };
        match parts.as_slice() {
            ["rbf", g] => Kernel::rbf(num(g)?),
            ["linear"] => Ok(Kernel::linear()),
            ["poly", d, c] => {
                let degree = d.trim().parse::<u32>().map_err(|_| {
                    Error::InvalidArgument(format!("kernel `{s}`: bad degree `{d}`"))
                })?;
                Kernel::polynomial(degree, num(c)?)
            }
            ["exp"] => Ok(Kernel::exponential()),
            _ => Err(Error::InvalidArgument(format!("unknown kernel `{s}`"))),
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A finite kernel expansion `f = sum_j coeffs[j] * k(., support[j])`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RkhsFunction {
    kernel: Kernel,
    support: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    #[serde(skip)]
    norm_sq: OnceLock<f64>,
}

impl Clone for RkhsFunction {
    fn clone(&self) -> Self {
        RkhsFunction {
            kernel: self.kernel,
            support: self.support.clone(),
            coeffs: self.coeffs.clone(),
            norm_sq: self.norm_sq.clone(),
        }
    }
}

impl PartialEq for RkhsFunction {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel && self.support == other.support && self.coeffs == other.coeffs
    }
}

impl RkhsFunction {
    pub fn new(kernel: Kernel, support: Vec<Vec<f64>>, coeffs: Vec<f64>) -> Result<Self> {
        if support.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: coeffs.len(),
            });
        }
        if let Some(first) = support.first() {
            for p in &support {
                if p.len() != first.len() {
                    return Err(Error::DimensionMismatch {
                        expected: first.len(),
                        got: p.len(),
                    });
                }
                kernel.check_point(p)?;
            }
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite expansion coefficient".into(),
            ));
        }
        Ok(RkhsFunction {
            kernel,
            support,
            coeffs,
            norm_sq: OnceLock::new(),
        })
    }

    pub fn zero(kernel: Kernel) -> Self {
        RkhsFunction {
            kernel,
            support: Vec::new(),
            coeffs: Vec::new(),
            norm_sq: OnceLock::new(),
        }
    }

    /// The canonical feature `Φ(x) = k(., x)`.
    pub fn feature(kernel: Kernel, x: Vec<f64>) -> Result<Self> {
        RkhsFunction::new(kernel, vec![x], vec![1.0])
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> Option<usize> {
        self.support.first().map(Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `f(x) = <f, Φ(x)>`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        self.kernel.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coeffs)
            .map(|(xj, a)| a * self.kernel.value(x, xj))
            .sum()
    }

    /// `|f|_H^2 = a^T K a`, clamped at zero. Cached after the first call.
    pub fn norm_sq(&self) -> f64 {
        *self.norm_sq.get_or_init(|| {
            if self.support.is_empty() {
                return 0.0;
            }
            let k = self.kernel.gram_unchecked(&self.support);
            let a = DVector::from_column_slice(&self.coeffs);
            a.dot(&(&k * &a)).max(0.0)
        })
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn same_kernel(&self, other: &RkhsFunction) -> Result<()> {
        if self.kernel != other.kernel {
            return Err(Error::KernelMismatch(
                self.kernel.to_string(),
                other.kernel.to_string(),
            ));
        }
        match (self.dim(), other.dim()) {
            (Some(a), Some(b)) if a != b => Err(Error::DimensionMismatch {
                expected: a,
                got: b,
            }),
            _ => Ok(()),
        }
    }

    /// `<f, g>_H`.
    pub fn inner(&self, other: &RkhsFunction) -> Result<f64> {
        self.same_kernel(other)?;
        if self.support.is_empty() || other.support.is_empty() {
            return Ok(0.0);
        }
        let k = self.kernel.cross_unchecked(&self.support, &other.support);
        let a = DVector::from_column_slice(&self.coeffs);
        let b = DVector::from_column_slice(&other.coeffs);
        Ok(a.dot(&(&k * &b)))
    }

    /// `a f + b g` on the union of the two supports, merging identical points.
    pub fn linear_combination(a: f64, f: &RkhsFunction, b: f64, g: &RkhsFunction) -> Result<Self> {
        f.same_kernel(g)?;
        let mut support: Vec<Vec<f64>> = Vec::with_capacity(f.support.len() + g.support.len());
        let mut coeffs: Vec<f64> = Vec::with_capacity(support.capacity());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (scale, h) in [(a, f), (b, g)] {
            for (x, c) in h.support.iter().zip(&h.coeffs) {
                let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
                match index.get(&key) {
                    Some(&i) => coeffs[i] += scale * c,
                    None => {
                        index.insert(key, support.len());
                        support.push(x.clone());
                        coeffs.push(scale * c);
                    }
                }
            }
        }
        Ok(RkhsFunction {
            kernel: f.kernel,
            support,
            coeffs,
            norm_sq: OnceLock::new(),
        })
    }

    /// `|f - g|_H`.
    pub fn distance(&self, other: &RkhsFunction) -> Result<f64> {
        Ok(RkhsFunction::linear_combination(1.0, self, -1.0, other)?.norm())
    }

    /// `max_{x in probes} |f(x) - g(x)|`.
    pub fn sup_distance(&self, other: &RkhsFunction, probes: &[Vec<f64>]) -> Result<f64> {
        self.same_kernel(other)?;
        if probes.is_empty() {
            return Err(Error::InvalidArgument("empty probe grid".into()));
        }
        let mut worst = 0.0f64;
        for x in probes {
            worst = worst.max((self.eval(x)? - other.eval(x)?).abs());
        }
        Ok(worst)
    }

    /// `max_{x in probes} |f(x)|`.
    pub fn sup_norm_on(&self, probes: &[Vec<f64>]) -> Result<f64> {
        self.sup_distance(&RkhsFunction::zero(self.kernel), probes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf1() -> Kernel {
        Kernel::rbf(1.0).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf1().eval(&[0.3, 1.0], &[0.3, 1.0]).unwrap(), 1.0);
        assert_eq!(
            Kernel::linear().eval(&[1.0, 2.0], &[3.0, -1.0]).unwrap(),
            1.0
        );
        let v = rbf1().eval(&[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            rbf1().eval(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let bounded = Kernel::linear().with_domain_bound(Some(1.0)).unwrap();
        assert!(matches!(
            bounded.eval(&[2.0], &[0.0]),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn sup_norms() {
        assert_eq!(Kernel::rbf(3.7).unwrap().sup_norm().unwrap(), 1.0);
        let lin = Kernel::linear().with_domain_bound(Some(2.0)).unwrap();
        assert_eq!(lin.sup_norm().unwrap(), 2.0);
        assert!(matches!(
            Kernel::linear().sup_norm(),
            Err(Error::UnboundedKernel(_))
        ));
        assert!(Kernel::exponential().sup_norm().is_err());
    }

    #[test]
    fn polynomial_sup_norm_matches_grid_maximum() {
        let k = Kernel::polynomial(2, 1.0)
            .unwrap()
            .with_domain_bound(Some(1.0))
            .unwrap();
        let closed = k.sup_norm().unwrap();
        assert_eq!(closed, 2.0);
        // grid over the unit disc
        let mut best = 0.0f64;
        for i in 0..=100 {
            for j in 0..=100 {
                let x = [-1.0 + 0.02 * i as f64, -1.0 + 0.02 * j as f64];
                if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                    best = best.max(k.value(&x, &x).sqrt());
                }
            }
        }
        assert!((best - closed).abs() < 1e-12);
    }

    #[test]
    fn gram_examples() {
        let g = rbf1().gram(&[vec![0.5]]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        let g = rbf1().gram(&[vec![0.5, 1.0], vec![0.5, 1.0]]).unwrap();
        assert_eq!(g, DMatrix::from_element(2, 2, 1.0));
        assert!(min_eigenvalue(&g).abs() < 1e-12);
        assert!(rbf1().gram(&[]).is_err());
    }

    #[test]
    fn rkhs_examples() {
        let k = rbf1();
        let x = vec![0.0];
        let xp = vec![1.0];
        let px = RkhsFunction::feature(k, x.clone()).unwrap();
        let pxp = RkhsFunction::feature(k, xp.clone()).unwrap();
        assert!((px.inner(&pxp).unwrap() - k.value(&x, &xp)).abs() < 1e-15);

        let f = RkhsFunction::linear_combination(1.0, &px, 1.0, &pxp).unwrap();
        let g = RkhsFunction::linear_combination(1.0, &px, -1.0, &pxp).unwrap();
        let expect = k.value(&x, &x) - k.value(&xp, &xp);
        assert!((f.inner(&g).unwrap() - expect).abs() < 1e-14);

        assert_eq!(f.distance(&f).unwrap(), 0.0);
        assert!((px.distance(&RkhsFunction::zero(k)).unwrap() - 1.0).abs() < 1e-15);
        let d = px.distance(&pxp).unwrap();
        assert!((d - (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-12);
        assert!((d - 1.12438).abs() < 1e-5);
    }

    #[test]
    fn mismatched_kernels() {
        let a = RkhsFunction::feature(rbf1(), vec![0.0]).unwrap();
        let b = RkhsFunction::feature(Kernel::rbf(2.0).unwrap(), vec![0.0]).unwrap();
        assert!(matches!(a.inner(&b), Err(Error::KernelMismatch(..))));
        assert!(a.sup_distance(&a, &[]).is_err());
    }

    #[test]
    fn spec_strings() {
        for s in ["rbf:1", "linear", "poly:2:1", "exp", "rbf:0.25"] {
            let k: Kernel = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        for bad in [
            "rbf",
            "rbf:-1",
            "poly:0:1",
            "poly:2",
            "poly:2:-1",
            "gauss:1",
        ] {
            assert!(bad.parse::<Kernel>().is_err(), "{bad}");
        }
    }
}
