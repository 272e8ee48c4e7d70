//! Exact Lévy–Prokhorov distance between finitely supported measures.
//!
//! For a threshold `r`, let `D(r) = max_B [P(B) - Q(B^r)]` over subsets `B`
//! of the support of `P`, with closed blow-ups `B^r`. By max-flow/min-cut,
//! `D(r) = 1 - maxflow(r)` in the bipartite network that joins atoms at
//! distance `<= r`. `D` is a nonincreasing step function that only changes at
//! the pairwise distances `r_0 < r_1 < ...`, so
//!
//! ```text
//! d(P, Q) = min(1, min_k max(r_k, D(r_k)))
//! ```
//!
//! and the minimum sits where `D(r_k) <= r_k` first holds; a binary search
//! over the sorted distances finds it with `O(log n)` flow computations.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{data_distance_matrix, DiscreteMeasure};

const FLOW_EPS: f64 = 1e-15;

/// Certificate that the distance is not smaller: a subset `set` of the
/// atoms of `P` with `P(set) - Q(set^e) >= excess` for every `e` below the
/// returned distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub set: Vec<usize>,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProkhorovResult {
    pub epsilon: f64,
    /// Threshold distance of the coupling edges.
    pub radius: f64,
    /// Sub-coupling `(i, j, mass)` moving mass only along pairs at distance
    /// `<= radius`; it leaves at most `epsilon` unmatched.
    pub coupling: Vec<(usize, usize, f64)>,
    pub violation: Option<Violation>,
}

impl ProkhorovResult {
    pub fn unmatched(&self) -> f64 {
        1.0 - self.coupling.iter().map(|c| c.2).sum::<f64>()
    }
}

/// Prokhorov distance between weight vectors `p` and `q` under a metric on
/// the union of their supports: `dist` is square of size `p.len() + q.len()`,
/// atoms of `p` first.
pub fn prokhorov_finite(p: &[f64], q: &[f64], dist: &[Vec<f64>]) -> Result<ProkhorovResult> {
    check_weights(p)?;
    check_weights(q)?;
    let n = p.len() + q.len();
    if dist.len() != n || dist.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "distance matrix must be {n} x {n}"
        )));
    }
    check_metric(dist)?;
    let cross: Vec<Vec<f64>> = dist[..p.len()]
        .iter()
        .map(|row| row[p.len()..].to_vec())
        .collect();
    Ok(prokhorov_cross(p, q, &cross))
}

/// Prokhorov distance between two measures on `X x Y` under the Euclidean
/// metric on concatenated `(x, y)`.
pub fn prokhorov_measures(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<ProkhorovResult> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    prokhorov_finite(p.weights(), q.weights(), &data_distance_matrix(p, q))
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidMeasure("empty weight vector".into()));
    }
    if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidMeasure(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 + w.len() as f64 * f64::EPSILON {
        return Err(Error::InvalidMeasure(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Symmetry, zero diagonal, nonnegativity, and the triangle inequality (on
/// every triple for small matrices, on a deterministic stride otherwise).
pub fn check_metric(dist: &[Vec<f64>]) -> Result<()> {
    let n = dist.len();
    let scale = dist
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let tol = 1e-9 * scale;
    for i in 0..n {
        if dist[i][i] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "dist[{i}][{i}] is not zero"
            )));
        }
        for j in 0..n {
            let d = dist[i][j];
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidArgument(format!("dist[{i}][{j}] = {d}")));
            }
            if (d - dist[j][i]).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "distance matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let stride = if n <= 60 { 1 } else { n / 40 };
    for i in (0..n).step_by(stride) {
        for j in (0..n).step_by(stride) {
            for k in 0..n {
                if dist[i][j] > dist[i][k] + dist[k][j] + tol {
                    return Err(Error::InvalidArgument(format!(
                        "triangle inequality fails for ({i}, {k}, {j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Prokhorov distance from the cross distances `cross[i][j] = d(p_i, q_j)`.
/// Inputs are trusted.
pub fn prokhorov_cross(p: &[f64], q: &[f64], cross: &[Vec<f64>]) -> ProkhorovResult {
    let mut radii: Vec<f64> = cross.iter().flatten().copied().collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let mut net = Bipartite::new(p, q, cross);
    let deficiency = |net: &mut Bipartite, r: f64| net.solve(r);

    // smallest k with D(r_k) <= r_k; the last radius always qualifies
    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if deficiency(&mut net, radii[mid]) <= radii[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = lo;
    let below = if k > 0 {
        let d_prev = deficiency(&mut net, radii[k - 1]);
        let set = net.source_side();
        let excess = net.excess(&set, radii[k - 1]);
        Some((d_prev, Violation { set, excess }))
    } else if radii[0] > 0.0 {
        Some((
            1.0,
            Violation {
                set: (0..p.len()).collect(),
                excess: 1.0,
            },
        ))
    } else {
        None
    };

    let (mut epsilon, radius) = match &below {
        Some((d_prev, _)) if k > 0 && *d_prev < radii[k] => (*d_prev, radii[k - 1]),
        _ => (radii[k], radii[k]),
    };
    deficiency(&mut net, radius);
    let coupling = net.coupling();
    if epsilon > 1.0 {
        epsilon = 1.0;
    }
    ProkhorovResult {
        epsilon,
        radius,
        coupling,
        violation: below.map(|(_, v)| v),
    }
}

/// Source → P atoms → Q atoms → sink, P–Q edges present when the distance is
/// within the current radius.
struct Bipartite<'a> {
    p: &'a [f64],
    q: &'a [f64],
    cross: &'a [Vec<f64>],
    // flow on P-Q edges, per P atom the list of (j, flow)
    flow: Vec<Vec<(usize, f64)>>,
    out_p: Vec<f64>,
    in_q: Vec<f64>,
}

impl<'a> Bipartite<'a> {
    fn new(p: &'a [f64], q: &'a [f64], cross: &'a [Vec<f64>]) -> Self {
        Bipartite {
            p,
            q,
            cross,
            flow: vec![Vec::new(); p.len()],
            out_p: vec![0.0; p.len()],
            in_q: vec![0.0; q.len()],
        }
    }

    /// Max flow at radius `r` by Dinic's algorithm; returns `1 - flow`.
    fn solve(&mut self, r: f64) -> f64 {
        let (np, nq) = (self.p.len(), self.q.len());
        self.flow = (0..np)
            .map(|i| {
                (0..nq)
                    .filter(|&j| self.cross[i][j] <= r)
                    .map(|j| (j, 0.0))
                    .collect()
            })
            .collect();
        self.out_p.iter_mut().for_each(|v| *v = 0.0);
        self.in_q.iter_mut().for_each(|v| *v = 0.0);

        // nodes: 0 = source, 1..=np = P, np+1..=np+nq = Q, np+nq+1 = sink
        let sink = np + nq + 1;
        // reverse adjacency of Q for residual backward moves
        let mut q_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nq];
        for (i, edges) in self.flow.iter().enumerate() {
            for (e, &(j, _)) in edges.iter().enumerate() {
                q_adj[j].push((i, e));
            }
        }
        loop {
            // BFS levels on the residual graph
            let mut level = vec![usize::MAX; sink + 1];
            level[0] = 0;
            let mut queue = VecDeque::from([0usize]);
            while let Some(u) = queue.pop_front() {
                let lu = level[u];
                let visit = |v: usize, level: &mut Vec<usize>, queue: &mut VecDeque<usize>| {
                    if level[v] == usize::MAX {
                        level[v] = lu + 1;
                        queue.push_back(v);
                    }
                };
                if u == 0 {
                    for i in 0..np {
                        if self.p[i] - self.out_p[i] > FLOW_EPS {
                            visit(1 + i, &mut level, &mut queue);
                        }
                    }
                } else if u <= np {
                    let i = u - 1;
                    for &(j, _) in &self.flow[i] {
                        visit(1 + np + j, &mut level, &mut queue);
                    }
                } else if u < sink {
                    let j = u - 1 - np;
                    if self.q[j] - self.in_q[j] > FLOW_EPS {
                        visit(sink, &mut level, &mut queue);
                    }
                    for &(i, e) in &q_adj[j] {
                        if self.flow[i][e].1 > FLOW_EPS {
                            visit(1 + i, &mut level, &mut queue);
                        }
                    }
                }
            }
            if level[sink] == usize::MAX {
                break;
            }
            // blocking flow by repeated DFS with per-node edge pointers
            let mut ptr_p = vec![0usize; np];
            let mut ptr_q = vec![0usize; nq];
            let mut pushed_any = false;
            for i in 0..np {
                while level[1 + i] == 1 && self.p[i] - self.out_p[i] > FLOW_EPS {
                    let cap = self.p[i] - self.out_p[i];
                    let pushed = self.dfs_p(i, cap, &level, &mut ptr_p, &mut ptr_q, &q_adj);
                    if pushed <= FLOW_EPS {
                        break;
                    }
                    self.out_p[i] += pushed;
                    pushed_any = true;
                }
            }
            if !pushed_any {
                break;
            }
        }
        let total: f64 = self.out_p.iter().sum();
        leftover(
            self.p.iter().sum(),
            self.q.iter().sum(),
            total,
            self.p.len() + self.q.len(),
        )
    }

    fn dfs_p(
        &mut self,
        i: usize,
        limit: f64,
        level: &[usize],
        ptr_p: &mut [usize],
        ptr_q: &mut [usize],
        q_adj: &[Vec<(usize, usize)>],
    ) -> f64 {
        let np = self.p.len();
        while ptr_p[i] < self.flow[i].len() {
            let (j, _) = self.flow[i][ptr_p[i]];
            if level[1 + np + j] == level[1 + i] + 1 {
                let pushed = self.dfs_q(j, limit, level, ptr_p, ptr_q, q_adj);
                if pushed > FLOW_EPS {
                    let e = ptr_p[i];
                    self.flow[i][e].1 += pushed;
                    return pushed;
                }
            }
            ptr_p[i] += 1;
        }
        0.0
    }

    fn dfs_q(
        &mut self,
        j: usize,
        limit: f64,
        level: &[usize],
        ptr_p: &mut [usize],
        ptr_q: &mut [usize],
        q_adj: &[Vec<(usize, usize)>],
    ) -> f64 {
        let np = self.p.len();
        let sink = np + self.q.len() + 1;
        // direct to sink first
        let room = self.q[j] - self.in_q[j];
        if room > FLOW_EPS && level[sink] == level[1 + np + j] + 1 {
            let pushed = room.min(limit);
            self.in_q[j] += pushed;
            return pushed;
        }
        // otherwise cancel flow back into some P atom
        while ptr_q[j] < q_adj[j].len() {
            let (i, e) = q_adj[j][ptr_q[j]];
            let back = self.flow[i][e].1;
            if back > FLOW_EPS && level[1 + i] == level[1 + np + j] + 1 {
                let pushed = self.dfs_p(i, limit.min(back), level, ptr_p, ptr_q, q_adj);
                if pushed > FLOW_EPS {
                    self.flow[i][e].1 -= pushed;
                    return pushed;
                }
            }
            ptr_q[j] += 1;
        }
        0.0
    }

    /// P atoms reachable from the source in the residual graph of the last
    /// solve: the source side of a minimum cut.
    fn source_side(&self) -> Vec<usize> {
        let (np, nq) = (self.p.len(), self.q.len());
        let mut seen_p = vec![false; np];
        let mut seen_q = vec![false; nq];
        let mut stack: Vec<usize> = (0..np)
            .filter(|&i| self.p[i] - self.out_p[i] > FLOW_EPS)
            .collect();
        for &i in &stack {
            seen_p[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.flow[i] {
                if !seen_q[j] {
                    seen_q[j] = true;
                    for (i2, edges) in self.flow.iter().enumerate() {
                        if !seen_p[i2] && edges.iter().any(|&(jj, f)| jj == j && f > FLOW_EPS) {
                            seen_p[i2] = true;
                            stack.push(i2);
                        }
                    }
                }
            }
        }
        (0..np).filter(|&i| seen_p[i]).collect()
    }

    /// `P(set) - Q(set^r)`.
    fn excess(&self, set: &[usize], r: f64) -> f64 {
        let pm: f64 = set.iter().map(|&i| self.p[i]).sum();
        let qm: f64 = (0..self.q.len())
            .filter(|&j| set.iter().any(|&i| self.cross[i][j] <= r))
            .map(|j| self.q[j])
            .sum();
        pm - qm
    }

    fn coupling(&self) -> Vec<(usize, usize, f64)> {
        self.flow
            .iter()
            .enumerate()
            .flat_map(|(i, edges)| {
                edges
                    .iter()
                    .filter(|e| e.1 > FLOW_EPS)
                    .map(move |&(j, f)| (i, j, f))
            })
            .collect()
    }
}

/// Prokhorov distance between the empirical distributions of two samples on
/// the real line (uniform weights, repeated values allowed).
pub fn prokhorov_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    Ok(prokhorov_1d_weighted(a, &wa, b, &wb))
}

/// Weighted version of [`prokhorov_1d`]; inputs are trusted.
pub fn prokhorov_1d_weighted(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64]) -> f64 {
    let sorted = |v: &[f64], w: &[f64]| -> Vec<(f64, f64)> {
        let mut s: Vec<(f64, f64)> = v.iter().copied().zip(w.iter().copied()).collect();
        s.sort_by(|x, y| x.0.total_cmp(&y.0));
        s
    };
    let pa = sorted(a, wa);
    let qb = sorted(b, wb);

    let mut radii: Vec<f64> = pa
        .iter()
        .flat_map(|&(x, _)| qb.iter().map(move |&(y, _)| (x - y).abs()))
        .collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if interval_deficiency(&pa, &qb, radii[mid]) <= radii[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut eps = radii[lo];
    if lo > 0 {
        eps = eps.min(interval_deficiency(&pa, &qb, radii[lo - 1]));
    }
    eps.min(1.0)
}

/// `1 - maxflow` when each point of `p` may send mass to points of `q`
/// within distance `r`. The neighbourhoods are intervals whose endpoints move
/// monotonically with position, so serving each `q` point from the earliest
/// reachable `p` points is optimal.
fn interval_deficiency(p: &[(f64, f64)], q: &[(f64, f64)], r: f64) -> f64 {
    let mut remaining: Vec<f64> = p.iter().map(|e| e.1).collect();
    let mut start = 0usize;
    let mut matched = 0.0;
    for &(y, cap) in q {
        let mut need = cap;
        while start < p.len() && (y - p[start].0 > r || remaining[start] <= FLOW_EPS) {
            start += 1;
        }
        let mut i = start;
        // differences, not shifted endpoints, so the test agrees with |x - y|
        while need > FLOW_EPS && i < p.len() && p[i].0 - y <= r {
            let take = remaining[i].min(need);
            remaining[i] -= take;
            need -= take;
            matched += take;
            i += 1;
        }
    }
    leftover(
        p.iter().map(|e| e.1).sum(),
        q.iter().map(|e| e.1).sum(),
        matched,
        p.len() + q.len(),
    )
}

/// Mass left unmatched by a flow; amounts at rounding level count as zero,
/// since the weights themselves only sum to one up to rounding.
fn leftover(p_total: f64, q_total: f64, flow: f64, atoms: usize) -> f64 {
    let d = p_total.min(q_total) - flow;
    if d <= 4.0 * atoms as f64 * f64::EPSILON {
        0.0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{contaminate, Atom};

    fn line_metric(points: &[f64]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect()
    }

    #[test]
    fn identical_measures() {
        let d = line_metric(&[0.0, 1.0, 0.0, 1.0]);
        let r = prokhorov_finite(&[0.3, 0.7], &[0.3, 0.7], &d).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!(r.violation.is_none());
        assert!(r.unmatched().abs() < 1e-15);
    }

    #[test]
    fn one_d_radius_rounding() {
        // 0.2 - 0.7 rounds above -0.5, yet |-0.5 - 0.2| is exactly the radius
        let a = [-0.5];
        let b = [0.4, 0.2];
        let d = prokhorov_1d(&a, &b).unwrap();
        let g = prokhorov_finite(&[1.0], &[0.5, 0.5], &line_metric(&[-0.5, 0.4, 0.2])).unwrap();
        assert_eq!(d, g.epsilon);
        assert!((d - 0.7).abs() < 1e-15);
    }

    #[test]
    fn two_diracs() {
        for d in [0.3, 0.99, 1.0, 2.5] {
            let r = prokhorov_finite(&[1.0], &[1.0], &line_metric(&[0.0, d])).unwrap();
            assert_eq!(r.epsilon, d.min(1.0));
        }
    }

    #[test]
    fn mixture_is_within_delta() {
        let p0 = DiscreteMeasure::dirac(vec![0.0], 0.0);
        let q = DiscreteMeasure::dirac(vec![5.0], 1.0);
        for delta in [0.01, 0.2, 0.5] {
            let pd = contaminate(&p0, &q, delta).unwrap();
            let r = prokhorov_measures(&p0, &pd).unwrap();
            assert!((r.epsilon - delta).abs() < 1e-15);
            let v = r.violation.unwrap();
            assert!(v.excess >= delta - 1e-15);
        }
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(prokhorov_1d(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(prokhorov_1d(&[0.0], &[0.3]).unwrap(), 0.3);
        let mut a = vec![0.0; 95];
        a.extend([5.0; 5]);
        let b = vec![0.0; 100];
        assert!((prokhorov_1d(&a, &b).unwrap() - 0.05).abs() < 1e-12);
        assert!(prokhorov_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn not_the_levy_metric() {
        // Lévy distance is 0.5 here; Prokhorov needs the whole unit.
        let d = prokhorov_1d(&[0.0, 2.0], &[1.0]).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn rejects_non_metric() {
        let mut d = line_metric(&[0.0, 1.0, 2.0]);
        d[0][2] = 5.0;
        d[2][0] = 5.0;
        assert!(prokhorov_finite(&[0.5, 0.5], &[1.0], &d).is_err());
        let mut d = line_metric(&[0.0, 1.0]);
        d[0][1] = 0.5;
        assert!(prokhorov_finite(&[1.0], &[1.0], &d).is_err());
    }

    #[test]
    fn data_space_metric() {
        let p = DiscreteMeasure::dirac(vec![0.0, 0.0], 0.0);
        let q = DiscreteMeasure::new(
            vec![
                Atom::new(vec![0.3, 0.4], 0.0),
                Atom::new(vec![0.0, 0.0], 0.0),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let r = prokhorov_measures(&p, &q).unwrap();
        // B = {origin}: Q(B^e) = 0.5 for e < 0.5, so e = 0.5
        assert!((r.epsilon - 0.5).abs() < 1e-15);
    }
}
