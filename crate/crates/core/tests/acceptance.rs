//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its PASS/FAIL line, and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svm_robust::config::parse_config_str;
use svm_robust::prokhorov::{prokhorov_1d, prokhorov_finite};
use svm_robust::robustness::{run_experiment, RobustnessReport, Verdict};
use svm_robust::solver::{check_norm_bounds, mean_embedding};
use svm_robust::{train, Atom, DiscreteMeasure, Kernel, Loss, RkhsFunction, SolverOptions};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_weights(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_point(r: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    // uniform in the cube, scaled back into the ball
    let p: Vec<f64> = (0..d).map(|_| r.random_range(-radius..radius)).collect();
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        p.iter().map(|v| v * radius / norm).collect()
    } else {
        p
    }
}

fn random_measure(
    r: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    radius: f64,
    classification: bool,
) -> DiscreteMeasure {
    let atoms = (0..n)
        .map(|_| {
            let x = random_point(r, d, radius);
            let y = if classification {
                if r.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                r.random_range(-2.0..2.0)
            };
            Atom::new(x, y)
        })
        .collect();
    DiscreteMeasure::new(atoms, random_weights(r, n)).unwrap()
}

// 1. a priori bounds on |f|_H and |f|_inf
fn norm_bounds() -> (bool, String) {
    let losses = [
        Loss::hinge(),
        Loss::logistic(),
        Loss::absolute(),
        Loss::epsilon_insensitive(0.1).unwrap(),
        Loss::huber(0.5).unwrap(),
        Loss::pinball(0.3).unwrap(),
    ];
    let lambdas = [0.05, 0.5, 5.0];
    let mut r = rng(101);
    let mut worst_h = f64::NEG_INFINITY;
    let mut worst_sup = f64::NEG_INFINITY;
    let mut failures = 0;
    for i in 0..100 {
        let loss = losses[i % losses.len()];
        let lambda = lambdas[(i / losses.len()) % lambdas.len()];
        let d = r.random_range(1..=3);
        let radius = r.random_range(0.5..2.0);
        let kernel = match i % 4 {
            0 => Kernel::rbf(r.random_range(0.2..3.0)).unwrap(),
            1 => Kernel::linear().with_domain_bound(Some(radius)).unwrap(),
            2 => Kernel::polynomial(2, 1.0)
                .unwrap()
                .with_domain_bound(Some(radius))
                .unwrap(),
            _ => Kernel::exponential()
                .with_domain_bound(Some(radius))
                .unwrap(),
        };
        let n = r.random_range(1..=15);
        let m = random_measure(&mut r, n, d, radius, loss.is_classification());
        let model = train(&m, &loss, &kernel, lambda, &SolverOptions::default()).unwrap();
        let mut probes: Vec<Vec<f64>> = m.atoms().iter().map(|a| a.x.clone()).collect();
        probes.extend((0..50).map(|_| random_point(&mut r, d, radius)));
        let rep = check_norm_bounds(&model, Some(&probes), None).unwrap();
        worst_h = worst_h.max(rep.h_norm.value - rep.h_norm.bound);
        worst_sup = worst_sup.max(rep.sup_norm.value - rep.sup_norm.bound);
        if rep.h_norm.value > rep.h_norm.bound + 1e-9
            || rep.sup_norm.value > rep.sup_norm.bound + 1e-9
        {
            failures += 1;
        }
    }
    (
        failures == 0,
        format!("100 trainings, {failures} violations; max(|f|_H - bound) = {worst_h:.3e}, max(|f|_inf - bound) = {worst_sup:.3e}"),
    )
}

// 2. f = -(1/2 lambda) sum w_i h_i Phi(x_i)
fn representer() -> (bool, String) {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let loss = if i % 2 == 0 {
            Loss::logistic()
        } else {
            Loss::huber(0.7).unwrap()
        };
        let lambda = [0.01, 0.1, 1.0][i % 3];
        let kernel = Kernel::rbf(r.random_range(0.3..2.0)).unwrap();
        let n = r.random_range(1..=50);
        let d = r.random_range(1..=3);
        let m = random_measure(&mut r, n, d, 2.0, false);
        let model = train(&m, &loss, &kernel, lambda, &SolverOptions::default()).unwrap();
        let h: Vec<f64> = m
            .atoms()
            .iter()
            .map(|a| {
                loss.derivative(&a.x, a.y, model.predict(&a.x).unwrap())
                    .unwrap()
            })
            .collect();
        let emb = mean_embedding(&h, &m, &kernel).unwrap();
        let resid =
            RkhsFunction::linear_combination(1.0, &model.function, 0.5 / lambda, &emb).unwrap();
        worst = worst.max(resid.norm());
    }
    (
        worst <= 1e-6,
        format!("20 measures, max |f + (1/2 lambda) E[h Phi]|_H = {worst:.3e} (limit 1e-6)"),
    )
}

// 3. |f_P - f_P0|_H <= |E_P h Phi - E_P0 h Phi|_H / lambda, h the derivative at f_P0
fn stability() -> (bool, String) {
    let mut r = rng(303);
    let loss = Loss::logistic();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let lambda = [0.05, 0.2, 1.0][r.random_range(0..3)];
        let kernel = Kernel::rbf(r.random_range(0.3..2.0)).unwrap();
        let d = r.random_range(1..=2);
        let n0 = r.random_range(1..=10);
        let p0 = random_measure(&mut r, n0, d, 2.0, false);
        let nq = r.random_range(1..=4);
        let q = random_measure(&mut r, nq, d, 3.0, false);
        let eps = r.random_range(0.01..0.5);
        let p = svm_robust::measures::contaminate(&p0, &q, eps).unwrap();
        let opts = SolverOptions::default();
        let f = train(&p, &loss, &kernel, lambda, &opts).unwrap();
        let f0 = train(&p0, &loss, &kernel, lambda, &opts).unwrap();
        let h = |m: &DiscreteMeasure| -> Vec<f64> {
            m.atoms()
                .iter()
                .map(|a| {
                    loss.derivative(&a.x, a.y, f0.predict(&a.x).unwrap())
                        .unwrap()
                })
                .collect()
        };
        let e = mean_embedding(&h(&p), &p, &kernel).unwrap();
        let e0 = mean_embedding(&h(&p0), &p0, &kernel).unwrap();
        let rhs = e.distance(&e0).unwrap() / lambda;
        let lhs = f.function.distance(&f0.function).unwrap();
        worst = worst.max(lhs - rhs);
    }
    (
        worst <= 1e-9,
        format!("50 pairs, max(lhs - rhs) = {worst:.3e} (limit 1e-9)"),
    )
}

/// Prokhorov distance by enumerating every subset `A` of the support of `p`:
/// `min_k max(r_k, sup_A p(A) - q(A^{r_k}))` over the distinct distances.
fn brute_prokhorov(p: &[f64], q: &[f64], dist: &[Vec<f64>]) -> f64 {
    let (np, nq) = (p.len(), q.len());
    let mut radii: Vec<f64> = dist.iter().flatten().copied().collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut best = 1.0f64;
    for &rad in &radii {
        let mut g = 0.0f64;
        for mask in 1u32..(1 << np) {
            let pa: f64 = (0..np).filter(|i| mask >> i & 1 == 1).map(|i| p[i]).sum();
            let qa: f64 = (0..nq)
                .filter(|&j| (0..np).any(|i| mask >> i & 1 == 1 && dist[i][np + j] <= rad))
                .map(|j| q[j])
                .sum();
            g = g.max(pa - qa);
        }
        best = best.min(rad.max(g));
    }
    best
}

// 4. max-flow Prokhorov against subset enumeration; 1-D routine against the general one
fn prokhorov_oracle() -> (bool, String) {
    let t0 = Instant::now();
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (np, nq) = (r.random_range(1..=6), r.random_range(1..=6));
        let pts: Vec<Vec<f64>> = (0..np + nq)
            .map(|_| {
                (0..2)
                    .map(|_| (r.random_range(-1.0f64..1.0) * 4.0).round() / 4.0)
                    .collect()
            })
            .collect();
        let dist: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| {
                        a.iter()
                            .zip(b)
                            .map(|(u, v)| (u - v).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let p = random_weights(&mut r, np);
        let q = random_weights(&mut r, nq);
        let fast = prokhorov_finite(&p, &q, &dist).unwrap().epsilon;
        worst = worst.max((fast - brute_prokhorov(&p, &q, &dist)).abs());
    }
    let mut worst_1d = 0.0f64;
    for _ in 0..200 {
        let (na, nb) = (r.random_range(1..=10), r.random_range(1..=10));
        let a: Vec<f64> = (0..na)
            .map(|_| (r.random_range(-1.0f64..1.0) * 10.0).round() / 10.0)
            .collect();
        let b: Vec<f64> = (0..nb)
            .map(|_| (r.random_range(-1.0f64..1.0) * 10.0).round() / 10.0)
            .collect();
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let dist: Vec<Vec<f64>> = all
            .iter()
            .map(|u| all.iter().map(|v| (u - v).abs()).collect())
            .collect();
        let general = prokhorov_finite(
            &vec![1.0 / na as f64; na],
            &vec![1.0 / nb as f64; nb],
            &dist,
        )
        .unwrap()
        .epsilon;
        worst_1d = worst_1d.max((prokhorov_1d(&a, &b).unwrap() - general).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst <= 1e-12 && worst_1d <= 1e-12 && secs < 60.0,
        format!("max |flow - brute| = {worst:.1e}, max |1d - finite| = {worst_1d:.1e}, {secs:.1}s (limit 60s)"),
    )
}

/// `sum_i w_i L*(y_i, (K a)_i) + lambda a'Ka` with the Gram matrix built here.
fn objective(
    loss: &Loss,
    m: &DiscreteMeasure,
    gram: &[Vec<f64>],
    alpha: &[f64],
    lambda: f64,
) -> f64 {
    let n = alpha.len();
    let f: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| gram[i][j] * alpha[j]).sum())
        .collect();
    let pen: f64 = (0..n).map(|i| alpha[i] * f[i]).sum();
    m.atoms()
        .iter()
        .zip(m.weights())
        .map(|(a, w)| {
            let i = m.atoms().iter().position(|b| b.x == a.x).unwrap();
            w * loss.eval_shifted(&a.x, a.y, f[i]).unwrap()
        })
        .sum::<f64>()
        + lambda * pen
}

/// Grid search over `alpha` in the box `|alpha_j| <= |L|_1 / (2 lambda)`,
/// zooming around the best point.
fn grid_min(loss: &Loss, m: &DiscreteMeasure, gram: &[Vec<f64>], lambda: f64) -> f64 {
    let n = gram.len();
    let steps = 20i64;
    let mut center = vec![0.0; n];
    let mut half = loss.lipschitz() / (2.0 * lambda);
    let mut best = f64::INFINITY;
    for _ in 0..14 {
        let h = 2.0 * half / steps as f64;
        let total = (steps + 1).pow(n as u32);
        let mut arg = center.clone();
        for code in 0..total {
            let mut c = code;
            let a: Vec<f64> = (0..n)
                .map(|j| {
                    let k = c % (steps + 1);
                    c /= steps + 1;
                    center[j] - half + k as f64 * h
                })
                .collect();
            let v = objective(loss, m, gram, &a, lambda);
            if v < best {
                best = v;
                arg = a;
            }
        }
        center = arg;
        half = 2.0 * h;
    }
    best
}

// 5. solver against grid search; shifted and unshifted coefficients
fn solver_oracle() -> (bool, String) {
    let losses = [
        Loss::hinge(),
        Loss::logistic(),
        Loss::absolute(),
        Loss::epsilon_insensitive(0.3).unwrap(),
        Loss::huber(0.5).unwrap(),
        Loss::pinball(0.7).unwrap(),
    ];
    let mut r = rng(505);
    let mut worst_obj = 0.0f64;
    let mut worst_coef = 0.0f64;
    for i in 0..50 {
        let loss = losses[i % losses.len()];
        let lambda = [0.1, 0.5, 2.0][i % 3];
        let gamma = r.random_range(0.5..2.0);
        let kernel = Kernel::rbf(gamma).unwrap();
        let n = r.random_range(1..=3);
        // distinct, well separated inputs
        let mut xs: Vec<f64> = Vec::new();
        while xs.len() < n {
            let x = r.random_range(-2.0..2.0);
            if xs.iter().all(|u: &f64| (u - x).abs() > 0.4) {
                xs.push(x);
            }
        }
        let atoms: Vec<Atom> = xs
            .iter()
            .map(|&x| {
                let y = if loss.is_classification() {
                    if r.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    r.random_range(-2.0..2.0)
                };
                Atom::new(vec![x], y)
            })
            .collect();
        let m = DiscreteMeasure::new(atoms, random_weights(&mut r, n)).unwrap();
        let gram: Vec<Vec<f64>> = xs
            .iter()
            .map(|a| {
                xs.iter()
                    .map(|b| (-gamma * (a - b) * (a - b)).exp())
                    .collect()
            })
            .collect();
        let model = train(&m, &loss, &kernel, lambda, &SolverOptions::default()).unwrap();
        let grid = grid_min(&loss, &m, &gram, lambda);
        worst_obj = worst_obj.max((model.objective - grid).abs());
        let unshifted = SolverOptions {
            unshifted: true,
            ..SolverOptions::default()
        };
        let other = train(&m, &loss, &kernel, lambda, &unshifted).unwrap();
        for (x, c) in model.function.support().iter().zip(model.function.coeffs()) {
            let j = other
                .function
                .support()
                .iter()
                .position(|s| s == x)
                .unwrap();
            worst_coef = worst_coef.max((c - other.function.coeffs()[j]).abs());
        }
    }
    (
        worst_obj <= 1e-4 && worst_coef <= 1e-8,
        format!("50 problems, max |objective - grid| = {worst_obj:.2e} (limit 1e-4), max coefficient gap = {worst_coef:.2e} (limit 1e-8)"),
    )
}

fn experiment(text: &str, budget: Duration) -> (bool, String, RobustnessReport) {
    let cfg = parse_config_str(text).unwrap();
    let t0 = Instant::now();
    let report = run_experiment(&cfg).unwrap().report;
    let secs = t0.elapsed();
    let mut detail = format!(
        "verdict {}, {:.1}s (limit {}s)",
        report.verdict,
        secs.as_secs_f64(),
        budget.as_secs()
    );
    for p in &report.predicates {
        detail.push_str(&format!("\n    [{}] {}: {}", p.verdict, p.name, p.detail));
    }
    (
        report.verdict == Verdict::Pass && secs < budget,
        detail,
        report,
    )
}

// 6. continuity under shrinking jitter
fn continuity() -> (bool, String) {
    let (ok, detail, _) = experiment(
        include_str!("../../../configs/continuity.toml"),
        Duration::from_secs(300),
    );
    (ok, detail)
}

// 7. qualitative robustness at fixed lambda
fn robustness() -> (bool, String) {
    let (ok, detail, report) = experiment(
        include_str!("../../../configs/robustness.toml"),
        Duration::from_secs(1200),
    );
    let tol = report.constants.mc_tolerance;
    (ok && (tol - 1.36 / 200f64.sqrt()).abs() < 1e-15, detail)
}

// 8. non-robustness when lambda_n -> 0
fn lambda_decay() -> (bool, String) {
    let (ok, detail, report) = experiment(
        include_str!("../../../configs/lambda_decay.toml"),
        Duration::from_secs(1800),
    );
    let c = &report.constants;
    let exact = c.c == Some(0.5) && c.c_half == Some(0.25) && c.kernel_sup == 1.0;
    let zero = report
        .cells
        .iter()
        .all(|x| x.extra.get("base_max_norm") == Some(&0.0));
    let data = c.d_pro_data.iter().all(|d| d.value <= 0.2 + 1e-12);
    let control = report
        .series("fixed-lambda")
        .filter_map(|x| x.d_pro_h)
        .fold(0.0f64, f64::max);
    (
        ok && exact && zero && data && control < 0.15,
        format!("{detail}\n    fixed-lambda sup_n d_pro = {control:.4} (limit 0.15)"),
    )
}

// 9. consistency along nested paths
fn consistency() -> (bool, String) {
    let (ok, detail, _) = experiment(
        include_str!("../../../configs/consistency.toml"),
        Duration::from_secs(1800),
    );
    (ok, detail)
}

type Criterion = (&'static str, fn() -> (bool, String));

fn main() {
    let criteria: [Criterion; 9] = [
        ("norm bounds", norm_bounds),
        ("representer identity", representer),
        ("stability bound", stability),
        ("prokhorov oracle equivalence", prokhorov_oracle),
        ("solver oracle", solver_oracle),
        ("continuity experiment", continuity),
        ("qualitative robustness at fixed lambda", robustness),
        ("decaying-lambda counterexample", lambda_decay),
        ("consistency experiment", consistency),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} [{}] ({:.1}s) {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            t0.elapsed().as_secs_f64(),
            detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
