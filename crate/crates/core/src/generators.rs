//! Seeded graph generators: random regular graphs, binomial random graphs
//! and small fixtures.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Vertex};
use crate::rng::{self, streams};

/// Restart cap for the regular-graph pairing sampler.
pub const REGULAR_RETRY_CAP: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("n·d must be even (n = {n}, d = {d})")]
    Parity { n: usize, d: usize },
    #[error("degree must satisfy 0 < d < n (n = {n}, d = {d})")]
    DegreeRange { n: usize, d: usize },
    #[error("pairing sampler failed {0} times in a row")]
    RetryBudgetExhausted(usize),
    #[error("edge probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Regular { n: usize, d: usize, seed: u64 },
    Binomial { n: usize, p: f64, seed: u64 },
    GluedCliques { k: usize },
    Complete { n: usize },
    Cycle { n: usize },
    Petersen,
}

impl GenSpec {
    pub fn build(&self) -> Result<Graph, GenError> {
        fixture(self)
    }
}

/// Uniform-ish simple d-regular graph via stub pairing. Stubs of rejected
/// pairs (loops, repeated edges) are re-paired among themselves; if none of
/// the leftovers can form a new edge the attempt restarts from scratch.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GenError> {
    if d == 0 || d >= n {
        return Err(GenError::DegreeRange { n, d });
    }
    if (n * d) % 2 == 1 {
        return Err(GenError::Parity { n, d });
    }
    let mut rng = rng::stream_rng(seed, streams::GENERATE);
    for _ in 0..REGULAR_RETRY_CAP {
        if let Some(edges) = try_pairing(n, d, &mut rng) {
            let mut edges: Vec<_> = edges.into_iter().collect();
            edges.sort_unstable();
            return Ok(Graph::from_edges(n, edges).expect("pairing yields a simple graph"));
        }
    }
    Err(GenError::RetryBudgetExhausted(REGULAR_RETRY_CAP))
}

fn try_pairing(n: usize, d: usize, rng: &mut rng::Rng) -> Option<HashSet<(Vertex, Vertex)>> {
    let mut edges = HashSet::with_capacity(n * d / 2);
    let mut stubs: Vec<Vertex> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<Vertex, usize> = BTreeMap::new();
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && !edges.contains(&(u, v)) {
                edges.insert((u, v));
            } else {
                *leftover.entry(u).or_default() += 1;
                *leftover.entry(v).or_default() += 1;
            }
        }
        if !has_suitable_pair(&edges, &leftover) {
            return None;
        }
        stubs = leftover
            .iter()
            .flat_map(|(&v, &count)| std::iter::repeat_n(v, count))
            .collect();
    }
    Some(edges)
}

fn has_suitable_pair(edges: &HashSet<(Vertex, Vertex)>, leftover: &BTreeMap<Vertex, usize>) -> bool {
    if leftover.is_empty() {
        return true;
    }
    let nodes: Vec<Vertex> = leftover.keys().copied().collect();
    nodes
        .iter()
        .enumerate()
        .any(|(i, &u)| nodes[i + 1..].iter().any(|&v| !edges.contains(&(u, v))))
}

/// G(n, p) using geometric skipping over the lexicographic pair order.
pub fn binomial_random(n: usize, p: f64, seed: u64) -> Result<Graph, GenError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GenError::ProbabilityRange(p));
    }
    if p == 0.0 || n < 2 {
        return Ok(Graph::empty(n));
    }
    if p == 1.0 {
        return Ok(complete(n));
    }
    let mut rng = rng::stream_rng(seed, streams::GENERATE);
    let log_q = (1.0 - p).ln();
    let mut edges = Vec::new();
    // Pairs (w, v) with w < v, enumerated v-major.
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + skip as i64;
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    Ok(Graph::from_edges(n, edges).expect("distinct pairs"))
}

pub fn complete(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
        .expect("complete graph is simple")
}

pub fn cycle(n: usize) -> Result<Graph, GenError> {
    if n < 3 {
        return Err(GenError::InvalidParameters(format!("cycle needs n >= 3, got {n}")));
    }
    Ok(Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle is simple"))
}

/// Two k-cliques sharing vertex 0: `{0, 1..k}` and `{0, k..2k-1}`.
pub fn glued_cliques(k: usize) -> Result<Graph, GenError> {
    if k < 2 {
        return Err(GenError::InvalidParameters(format!("glued cliques need k >= 2, got {k}")));
    }
    let first: Vec<Vertex> = (0..k).collect();
    let second: Vec<Vertex> = std::iter::once(0).chain(k..2 * k - 1).collect();
    let mut edges = Vec::new();
    for clique in [&first, &second] {
        for (i, &u) in clique.iter().enumerate() {
            for &v in &clique[i + 1..] {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_edges(2 * k - 1, edges).expect("cliques share one vertex only"))
}

pub fn petersen() -> Graph {
    let mut edges = Vec::with_capacity(15);
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((i + 5, (i + 2) % 5 + 5));
    }
    Graph::from_edges(10, edges).expect("petersen is simple")
}

pub fn fixture(spec: &GenSpec) -> Result<Graph, GenError> {
    match *spec {
        GenSpec::Regular { n, d, seed } => random_regular(n, d, seed),
        GenSpec::Binomial { n, p, seed } => binomial_random(n, p, seed),
        GenSpec::GluedCliques { k } => glued_cliques(k),
        GenSpec::Complete { n } => Ok(complete(n)),
        GenSpec::Cycle { n } => cycle(n),
        GenSpec::Petersen => Ok(petersen()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_simple_symmetric(g: &Graph) {
        for v in 0..g.vertex_count() {
            let nbrs = g.neighbors(v);
            assert!(nbrs.windows(2).all(|w| w[0] < w[1]));
            assert!(!nbrs.contains(&v));
            assert!(nbrs.iter().all(|&w| g.has_edge(w, v)));
        }
    }

    #[test]
    fn small_regular_graph_is_regular() {
        let g = random_regular(10, 3, 1).unwrap();
        assert_simple_symmetric(&g);
        assert!((0..10).all(|v| g.degree(v) == 3));
        assert_eq!(g.edge_count(), 15);
    }

    #[test]
    fn regular_parameter_errors() {
        assert_eq!(random_regular(5, 3, 0).unwrap_err(), GenError::Parity { n: 5, d: 3 });
        assert_eq!(random_regular(4, 4, 0).unwrap_err(), GenError::DegreeRange { n: 4, d: 4 });
        assert_eq!(random_regular(4, 0, 0).unwrap_err(), GenError::DegreeRange { n: 4, d: 0 });
    }

    #[test]
    fn regular_is_deterministic_per_seed() {
        let a = random_regular(200, 6, 42).unwrap();
        let b = random_regular(200, 6, 42).unwrap();
        let c = random_regular(200, 6, 43).unwrap();
        assert_eq!(a.to_edge_list_string(), b.to_edge_list_string());
        assert_ne!(a.to_edge_list_string(), c.to_edge_list_string());
    }

    #[test]
    fn dense_regular_graph_terminates() {
        let g = random_regular(2000, 64, 3).unwrap();
        assert_eq!(g.regular_degree(), Some(64));
    }

    #[test]
    fn binomial_extremes() {
        assert_eq!(binomial_random(30, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(binomial_random(30, 1.0, 1).unwrap().edge_count(), 435);
        assert_eq!(binomial_random(3, 1.5, 1).unwrap_err(), GenError::ProbabilityRange(1.5));
    }

    #[test]
    fn binomial_edge_count_concentrates() {
        let g = binomial_random(1000, 0.02, 7).unwrap();
        assert_simple_symmetric(&g);
        let pairs = 1000.0 * 999.0 / 2.0;
        let mean = pairs * 0.02;
        let sd = (pairs * 0.02 * 0.98f64).sqrt();
        assert!((g.edge_count() as f64 - mean).abs() < 5.0 * sd, "{}", g.edge_count());
        assert_eq!(
            g.to_edge_list_string(),
            binomial_random(1000, 0.02, 7).unwrap().to_edge_list_string()
        );
    }

    #[test]
    fn fixtures() {
        let g = glued_cliques(3).unwrap();
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.degree(0), 4);
        assert!((1..5).all(|v| g.degree(v) == 2));
        assert!(glued_cliques(1).is_err());

        let p = petersen();
        assert_eq!(p.vertex_count(), 10);
        assert_eq!(p.regular_degree(), Some(3));
        assert_eq!(p.edge_count(), 15);

        let c = fixture(&GenSpec::Cycle { n: 5 }).unwrap();
        let edges: Vec<_> = c.edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(fixture(&GenSpec::Complete { n: 4 }).unwrap().edge_count(), 6);
    }

    #[test]
    fn gen_spec_serializes_with_kind_tag() {
        let spec = GenSpec::Regular { n: 10, d: 3, seed: 1 };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"regular","n":10,"d":3,"seed":1}"#);
        assert_eq!(serde_json::from_str::<GenSpec>(&json).unwrap(), spec);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn regular_graphs_have_constant_degree(n in 4usize..60, d in 1usize..8, seed in any::<u64>()) {
            prop_assume!(d < n && (n * d) % 2 == 0);
            let g = random_regular(n, d, seed).unwrap();
            assert_simple_symmetric(&g);
            prop_assert!((0..n).all(|v| g.degree(v) == d));
        }
    }
}
