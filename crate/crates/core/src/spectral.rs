//! Spectral measurements on regular graphs and checkers for the facts the
//! pipeline leans on: the mixing bound, joinedness and expansion into a
//! reservoir.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{edge_count_between, gamma_restricted, Graph, GraphError, VertexSet};
use crate::rng::{self, streams};

/// Largest graph handled by dense eigendecomposition.
pub const DENSE_LIMIT: usize = 512;
/// Multiplier applied to iterative estimates before they feed parameter
/// derivation.
pub const ITERATIVE_MARGIN: f64 = 1.05;
/// Lanczos step cap for the iterative estimator.
pub const LANCZOS_MAX_STEPS: usize = 1200;
/// Largest vertex count for exhaustive joinedness checks.
pub const EXHAUSTIVE_JOINED_LIMIT: usize = 24;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("graph is not regular")]
    NotRegular,
    #[error("iterative eigensolver did not converge within {0} steps")]
    NonConvergence(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    #[default]
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub lambda2: f64,
    pub lambda_n: f64,
    pub lambda: f64,
    pub ratio: f64,
    pub tol: f64,
    #[serde(skip)]
    pub method: EigenMethod,
}

impl SpectralProfile {
    fn new(degree: usize, lambda2: f64, lambda_n: f64, tol: f64, method: EigenMethod) -> Self {
        let lambda = lambda2.max(lambda_n.abs());
        Self {
            lambda2,
            lambda_n,
            lambda,
            ratio: degree as f64 / lambda,
            tol,
            method,
        }
    }

    /// λ as consumed by parameter derivation: exact values pass through,
    /// iterative estimates get the safety margin.
    pub fn lambda_for_params(&self) -> f64 {
        match self.method {
            EigenMethod::Dense => self.lambda,
            EigenMethod::Lanczos => self.lambda * ITERATIVE_MARGIN,
        }
    }
}

fn require_regular(g: &Graph) -> Result<usize, SpectralError> {
    g.regular_degree().ok_or(SpectralError::NotRegular)
}

fn check_tol(tol: f64) -> Result<(), SpectralError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// λ₂ and λₙ of the adjacency matrix. Dense below [`DENSE_LIMIT`] vertices,
/// Lanczos on the complement of the all-ones vector above it.
pub fn extremal_eigenvalues(g: &Graph, tol: f64) -> Result<SpectralProfile, SpectralError> {
    if g.vertex_count() <= DENSE_LIMIT {
        dense_extremal(g, tol)
    } else {
        lanczos_extremal(g, tol)
    }
}

pub fn dense_extremal(g: &Graph, tol: f64) -> Result<SpectralProfile, SpectralError> {
    check_tol(tol)?;
    let d = require_regular(g)?;
    let n = g.vertex_count();
    if n < 2 {
        return Err(SpectralError::InvalidArgument("need at least two vertices".into()));
    }
    let mut adjacency = DMatrix::<f64>::zeros(n, n);
    for (u, v) in g.edges() {
        adjacency[(u, v)] = 1.0;
        adjacency[(v, u)] = 1.0;
    }
    let mut values: Vec<f64> = SymmetricEigen::new(adjacency).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SpectralProfile::new(d, values[1], values[n - 1], tol, EigenMethod::Dense))
}

fn adjacency_apply(g: &Graph, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().enumerate().for_each(|(v, out)| {
        *out = g.neighbors(v).iter().map(|&w| x[w]).sum();
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Lanczos with full reorthogonalization on the adjacency operator
/// restricted to the orthogonal complement of the all-ones vector. Its
/// extreme Ritz values converge to λ₂ and λₙ.
pub fn lanczos_extremal(g: &Graph, tol: f64) -> Result<SpectralProfile, SpectralError> {
    check_tol(tol)?;
    let d = require_regular(g)?;
    let n = g.vertex_count();
    if n < 2 {
        return Err(SpectralError::InvalidArgument("need at least two vertices".into()));
    }
    let max_steps = (n - 1).min(LANCZOS_MAX_STEPS);
    let mut rng = rng::stream_rng(0, streams::SPECTRAL);

    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    remove_mean(&mut q);
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut next_check = 20usize.min(max_steps);

    loop {
        let k = basis.len();
        adjacency_apply(g, &basis[k - 1], &mut w);
        let alpha = dot(&w, &basis[k - 1]);
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against ones and the basis.
        for _ in 0..2 {
            remove_mean(&mut w);
            for qj in &basis {
                let c = dot(&w, qj);
                w.iter_mut().zip(qj).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let exhausted = beta <= 1e-10 * (d as f64).max(1.0) || k == max_steps;

        if k >= next_check || exhausted {
            let (lo, hi, res_lo, res_hi) = tridiagonal_extremes(&alphas, &betas, beta);
            let converged = res_hi <= tol * hi.abs().max(1.0) && res_lo <= tol * lo.abs().max(1.0);
            // A full Krylov space (k = n - 1) or an invariant subspace is exact.
            if converged || beta <= 1e-10 * (d as f64).max(1.0) || k == n - 1 {
                return Ok(SpectralProfile::new(d, hi, lo, tol, EigenMethod::Lanczos));
            }
            if k == max_steps {
                return Err(SpectralError::NonConvergence(max_steps));
            }
            next_check = (k + 10).max(k * 5 / 4).min(max_steps);
        }

        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
}

/// Extreme eigenvalues of the Lanczos tridiagonal matrix with their
/// residual estimates `|β_k s_k|`.
fn tridiagonal_extremes(alphas: &[f64], betas: &[f64], last_beta: f64) -> (f64, f64, f64, f64) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut lo_idx, mut hi_idx) = (0, 0);
    for i in 0..k {
        if eig.eigenvalues[i] < eig.eigenvalues[lo_idx] {
            lo_idx = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi_idx] {
            hi_idx = i;
        }
    }
    let residual = |i: usize| (last_beta * eig.eigenvectors[(k - 1, i)]).abs();
    (
        eig.eigenvalues[lo_idx],
        eig.eigenvalues[hi_idx],
        residual(lo_idx),
        residual(hi_idx),
    )
}

/// `λ√(|A||B|) − |e(A,B) − |A||B|d/n|`; nonnegative whenever `lambda`
/// bounds the nontrivial spectrum.
pub fn mixing_slack(g: &Graph, lambda: f64, a: &VertexSet, b: &VertexSet) -> Result<f64, SpectralError> {
    let d = require_regular(g)?;
    let n = g.vertex_count() as f64;
    let e = edge_count_between(g, a, b)? as f64;
    let (sa, sb) = (a.len() as f64, b.len() as f64);
    Ok(lambda * (sa * sb).sqrt() - (e - sa * sb * d as f64 / n).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinedMode {
    Exhaustive,
    Sampled,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinedReport {
    pub m: usize,
    pub mode: JoinedMode,
    pub checked: u64,
    pub passed: bool,
    /// Two disjoint sets of size `m` with no edge between them.
    pub witness: Option<(VertexSet, VertexSet)>,
}

/// Looks for disjoint `X, Y` with `|X| = |Y| = m` and `e(X, Y) = 0`.
/// Exhaustive up to [`EXHAUSTIVE_JOINED_LIMIT`] vertices, sampled beyond.
pub fn check_joined(g: &Graph, m: usize, trials: usize, seed: u64) -> Result<JoinedReport, SpectralError> {
    if m == 0 {
        return Err(SpectralError::InvalidArgument("m must be at least 1".into()));
    }
    let n = g.vertex_count();
    if 2 * m > n {
        return Ok(JoinedReport { m, mode: JoinedMode::Vacuous, checked: 0, passed: true, witness: None });
    }
    if n <= EXHAUSTIVE_JOINED_LIMIT {
        Ok(exhaustive_joined(g, m))
    } else {
        Ok(sampled_joined(g, m, trials, seed))
    }
}

fn exhaustive_joined(g: &Graph, m: usize) -> JoinedReport {
    let n = g.vertex_count();
    let closed: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(1u32 << v, |acc, &w| acc | (1 << w)))
        .collect();
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut pick: Vec<usize> = (0..m).collect();
    let mut checked = 0u64;
    loop {
        checked += 1;
        // Vertices outside X ∪ Γ(X) are exactly the admissible partners.
        let covered = pick.iter().fold(0u32, |acc, &v| acc | closed[v]);
        let free = full & !covered;
        if free.count_ones() as usize >= m {
            let partner: VertexSet = (0..n).filter(|&v| free >> v & 1 == 1).take(m).collect();
            return JoinedReport {
                m,
                mode: JoinedMode::Exhaustive,
                checked,
                passed: false,
                witness: Some((VertexSet::from(pick), partner)),
            };
        }
        if !next_combination(&mut pick, n) {
            break;
        }
    }
    JoinedReport { m, mode: JoinedMode::Exhaustive, checked, passed: true, witness: None }
}

/// Advances `pick` to the next `pick.len()`-subset of `0..n` in lexicographic
/// order.
pub(crate) fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn sampled_joined(g: &Graph, m: usize, trials: usize, seed: u64) -> JoinedReport {
    let n = g.vertex_count();
    let mut rng = rng::stream_rng(seed, streams::SAMPLING);
    let mut mark = vec![false; n];
    for t in 0..trials {
        let sample = index::sample(&mut rng, n, 2 * m).into_vec();
        let (x, y) = sample.split_at(m);
        y.iter().for_each(|&v| mark[v] = true);
        let crossing = x.iter().any(|&v| g.neighbors(v).iter().any(|&w| mark[w]));
        y.iter().for_each(|&v| mark[v] = false);
        if !crossing {
            return JoinedReport {
                m,
                mode: JoinedMode::Sampled,
                checked: t as u64 + 1,
                passed: false,
                witness: Some((x.iter().copied().collect(), y.iter().copied().collect())),
            };
        }
    }
    JoinedReport { m, mode: JoinedMode::Sampled, checked: trials as u64, passed: true, witness: None }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// `|Γ_B(X)| / |X|`, absent for empty `X`.
    pub ratio: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Checks `|Γ_B(X)| ≥ ε²k|X|` under the hypotheses that guarantee it:
/// `k > 1`, `|X| ≤ n/(12k)` and every vertex has `≥ εd/3` neighbors in `B`.
pub fn expansion_check(
    g: &Graph,
    b: &VertexSet,
    x: &VertexSet,
    eps: f64,
    k: f64,
) -> Result<ExpansionReport, SpectralError> {
    let d = require_regular(g)?;
    b.validate(g)?;
    x.validate(g)?;
    let n = g.vertex_count();
    if k <= 1.0 {
        return Err(SpectralError::Precondition(format!("k must exceed 1, got {k}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(SpectralError::Precondition(format!("eps must lie in (0, 1], got {eps}")));
    }
    if x.len() as f64 > n as f64 / (12.0 * k) {
        return Err(SpectralError::Precondition(format!(
            "|X| = {} exceeds n/(12k) = {:.3}",
            x.len(),
            n as f64 / (12.0 * k)
        )));
    }
    let in_b = b.mask(n);
    let need = eps * d as f64 / 3.0;
    if let Some(v) = (0..n).find(|&v| (g.neighbors(v).iter().filter(|&&w| in_b[w]).count() as f64) < need) {
        return Err(SpectralError::Precondition(format!(
            "vertex {v} has fewer than {need:.3} neighbors in B"
        )));
    }
    let threshold = eps * eps * k;
    if x.is_empty() {
        return Ok(ExpansionReport { ratio: None, threshold, passed: true });
    }
    let ratio = gamma_restricted(g, x, b)?.len() as f64 / x.len() as f64;
    Ok(ExpansionReport { ratio: Some(ratio), threshold, passed: ratio >= threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, cycle, glued_cliques, petersen, random_regular};

    #[test]
    fn complete_graph_spectrum() {
        let p = dense_extremal(&complete(5), 1e-9).unwrap();
        assert!((p.lambda2 + 1.0).abs() < 1e-9);
        assert!((p.lambda_n + 1.0).abs() < 1e-9);
        assert!((p.lambda - 1.0).abs() < 1e-9);
        assert!((p.ratio - 4.0).abs() < 1e-9);
    }

    #[test]
    fn petersen_spectrum() {
        let p = extremal_eigenvalues(&petersen(), 1e-9).unwrap();
        assert!((p.lambda2 - 1.0).abs() < 1e-9);
        assert!((p.lambda_n + 2.0).abs() < 1e-9);
        assert!((p.lambda - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cycle_spectrum_matches_closed_form() {
        let g = cycle(6).unwrap();
        let mut closed: Vec<f64> = (0..6).map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 6.0).cos()).collect();
        closed.sort_by(|a, b| b.total_cmp(a));
        let p = dense_extremal(&g, 1e-9).unwrap();
        assert!((p.lambda2 - closed[1]).abs() < 1e-9);
        assert!((p.lambda_n - closed[5]).abs() < 1e-9);
        assert!((p.lambda - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lanczos_matches_dense_on_fixtures() {
        for g in [petersen(), complete(7), cycle(9).unwrap(), random_regular(60, 5, 2).unwrap()] {
            let dense = dense_extremal(&g, 1e-8).unwrap();
            let iter = lanczos_extremal(&g, 1e-8).unwrap();
            assert!((dense.lambda2 - iter.lambda2).abs() < 1e-7, "{dense:?} {iter:?}");
            assert!((dense.lambda_n - iter.lambda_n).abs() < 1e-7, "{dense:?} {iter:?}");
            assert_eq!(iter.method, EigenMethod::Lanczos);
        }
    }

    #[test]
    fn margin_applies_only_to_iterative_estimates() {
        let g = petersen();
        assert_eq!(dense_extremal(&g, 1e-9).unwrap().lambda_for_params(), dense_extremal(&g, 1e-9).unwrap().lambda);
        let it = lanczos_extremal(&g, 1e-9).unwrap();
        assert!((it.lambda_for_params() - 2.1).abs() < 1e-6);
    }

    #[test]
    fn spectral_errors() {
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(matches!(extremal_eigenvalues(&star, 1e-6), Err(SpectralError::NotRegular)));
        assert!(matches!(extremal_eigenvalues(&petersen(), 0.0), Err(SpectralError::InvalidArgument(_))));
        assert!(matches!(mixing_slack(&star, 1.0, &VertexSet::new(), &VertexSet::new()), Err(SpectralError::NotRegular)));
    }

    #[test]
    fn profile_serializes_with_five_keys() {
        let p = dense_extremal(&petersen(), 1e-6).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["lambda", "lambda2", "lambda_n", "ratio", "tol"]);
    }

    #[test]
    fn mixing_slack_examples() {
        let k4 = complete(4);
        let s = mixing_slack(&k4, 1.0, &VertexSet::from([0, 1]), &VertexSet::from([2, 3])).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(mixing_slack(&k4, 1.0, &VertexSet::new(), &VertexSet::from([1])).unwrap(), 0.0);
    }

    #[test]
    fn petersen_mixing_never_violated() {
        let g = petersen();
        let mut rng = rng::stream_rng(9, 0);
        for _ in 0..10_000 {
            let perm = index::sample(&mut rng, 10, 10).into_vec();
            let sa = rng.random_range(0..=10);
            let sb = rng.random_range(0..=10 - sa);
            let a: VertexSet = perm[..sa].iter().copied().collect();
            let b: VertexSet = perm[sa..sa + sb].iter().copied().collect();
            assert!(mixing_slack(&g, 2.0, &a, &b).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn joined_examples() {
        let r = check_joined(&complete(4), 1, 0, 0).unwrap();
        assert!(r.passed);
        assert_eq!(r.mode, JoinedMode::Exhaustive);

        let c6 = cycle(6).unwrap();
        let r = check_joined(&c6, 1, 0, 0).unwrap();
        assert!(!r.passed);
        let (x, y) = r.witness.unwrap();
        assert!(x.is_disjoint(&y) && edge_count_between(&c6, &x, &y).unwrap() == 0);
        assert_eq!(edge_count_between(&c6, &VertexSet::from([0]), &VertexSet::from([3])).unwrap(), 0);

        let glued = glued_cliques(5).unwrap();
        let r = check_joined(&glued, 4, 0, 0).unwrap();
        assert_eq!(r.witness, Some((VertexSet::from([1, 2, 3, 4]), VertexSet::from([5, 6, 7, 8]))));

        let r = check_joined(&petersen(), 6, 0, 0).unwrap();
        assert_eq!(r.mode, JoinedMode::Vacuous);
        assert!(r.passed);
        assert!(check_joined(&petersen(), 0, 0, 0).is_err());
    }

    fn brute_force_joined(g: &Graph, m: usize) -> bool {
        let n = g.vertex_count();
        let mut x: Vec<usize> = (0..m).collect();
        loop {
            let xs = VertexSet::from(x.clone());
            let mut y: Vec<usize> = (0..m).collect();
            loop {
                let ys = VertexSet::from(y.clone());
                if xs.is_disjoint(&ys) && edge_count_between(g, &xs, &ys).unwrap() == 0 {
                    return false;
                }
                if !next_combination(&mut y, n) {
                    break;
                }
            }
            if !next_combination(&mut x, n) {
                break;
            }
        }
        true
    }

    #[test]
    fn exhaustive_joined_agrees_with_pair_scan() {
        let mut rng = rng::stream_rng(5, 0);
        for _ in 0..60 {
            let n = rng.random_range(4..=12);
            let p = rng.random_range(0.2..0.9);
            let g = crate::graph::tests::random_graph(&mut rng, n, p);
            for m in 1..=n / 2 {
                let r = check_joined(&g, m, 0, 0).unwrap();
                assert_eq!(r.passed, brute_force_joined(&g, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn sampled_joined_finds_cycle_gaps() {
        let g = cycle(100).unwrap();
        let r = check_joined(&g, 2, 100, 4).unwrap();
        assert_eq!(r.mode, JoinedMode::Sampled);
        assert!(!r.passed);
        let (x, y) = r.witness.unwrap();
        assert_eq!(edge_count_between(&g, &x, &y).unwrap(), 0);
        assert!(check_joined(&complete(30), 3, 200, 4).unwrap().passed);
    }

    #[test]
    fn expansion_examples() {
        let k20 = complete(20);
        let v = k20.vertices();
        let empty = expansion_check(&k20, &v, &VertexSet::new(), 1.0, 1.5).unwrap();
        assert!(empty.passed && empty.ratio.is_none());
        let r = expansion_check(&k20, &v, &VertexSet::from([0]), 1.0, 1.5).unwrap();
        assert_eq!(r.ratio, Some(19.0));
        assert!(r.passed);

        let c = cycle(100).unwrap();
        let r = expansion_check(&c, &c.vertices(), &VertexSet::from([0]), 1.0, 3.0).unwrap();
        assert_eq!(r.ratio, Some(2.0));
        assert!(!r.passed);
    }

    #[test]
    fn expansion_preconditions() {
        let k20 = complete(20);
        let v = k20.vertices();
        assert!(matches!(expansion_check(&k20, &v, &VertexSet::from([0]), 1.0, 1.0), Err(SpectralError::Precondition(_))));
        assert!(matches!(expansion_check(&k20, &v, &VertexSet::from([0, 1]), 1.0, 1.5), Err(SpectralError::Precondition(_))));
        assert!(matches!(
            expansion_check(&k20, &VertexSet::from([0]), &VertexSet::from([1]), 1.0, 1.5),
            Err(SpectralError::Precondition(_))
        ));
    }
}
