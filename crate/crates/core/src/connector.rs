//! Joins the components of every dominating set through the reservoir.
//!
//! For each set, trees are grown from one endpoint of every current path
//! inside `G' = G[X ∪ B]`, a host edge between two tree collections closes a
//! new path, and the unused tree vertices are deleted leaf by leaf. All sets
//! share one forest, so reservoir vertices are used by at most one path.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::DominatingFamily;
use crate::extendable::{EmbeddedTree, ExtendableForest, ForestError, TreeSpec};
use crate::graph::{components_of, Graph, GraphError, InducedSubgraph, Vertex, VertexSet};
use crate::params::{Mode, PackingParams};
use crate::rng::{self, streams};
use crate::verifier::verify_packing;

/// Seeded splits of the tree collections tried before regrowing the trees.
pub const SPLIT_RESHUFFLES: usize = 4;
/// Regrowth rounds per step before giving up on a cross edge.
pub const REGROW_ROUNDS: usize = 3;

#[derive(Debug, Error)]
pub enum ConnectError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("set {set}: no edge between the tree collections at step {step}")]
    NoCrossEdge { set: usize, step: usize },
    #[error("set {set}: path of length {length} exceeds bound {bound:.3}")]
    PathTooLong { set: usize, length: usize, bound: f64 },
    #[error("set {set} is disconnected after stitching")]
    Disconnected { set: usize },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("packing failed verification: {0}")]
    VerificationFailed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub endpoints: [Vertex; 2],
    /// Reservoir vertices from `endpoints[0]` to `endpoints[1]`.
    pub internal: Vec<Vertex>,
    pub set: usize,
    #[serde(default)]
    pub length_bound: f64,
}

impl PathRecord {
    /// Number of edges.
    pub fn length(&self) -> usize {
        self.internal.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdsPacking {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PackingParams>,
    pub sets: Vec<VertexSet>,
    #[serde(default)]
    pub certificates: Vec<Vec<(Vertex, Vertex)>>,
    #[serde(default)]
    pub paths: Vec<PathRecord>,
}

/// `X_i`: one lowest-id vertex per component of `S_i`, plus padding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representatives {
    pub representatives: VertexSet,
    pub padded: VertexSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSet {
    pub set: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectOutcome {
    pub packing: CdsPacking,
    /// Family sets left out of the packing, by family index.
    pub dropped: Vec<DroppedSet>,
    /// Family index of each packed set.
    pub family_index: Vec<usize>,
    pub path_vertices: usize,
}

pub fn choose_representatives(
    g: &Graph,
    family: &DominatingFamily,
    params: &PackingParams,
) -> Result<Vec<Representatives>, ConnectError> {
    let pad_to = (params.n as f64 / (2.0 * params.d as f64)).ceil() as usize;
    family
        .sets
        .iter()
        .map(|s| {
            let components = components_of(g, s)?;
            let representatives: VertexSet = components.iter().filter_map(VertexSet::min).collect();
            let mut padded: Vec<Vertex> = representatives.clone().into();
            if padded.len() < pad_to {
                let extra = pad_to - padded.len();
                padded.extend(s.iter().copied().filter(|&v| !representatives.contains(v)).take(extra));
            }
            Ok(Representatives { representatives, padded: padded.into() })
        })
        .collect()
}

/// One path of the linear forest on a set's representatives, by its two
/// end vertices (local ids; equal for a singleton).
#[derive(Clone, Copy, Debug)]
struct Chain {
    ends: [Vertex; 2],
}

impl Chain {
    fn endpoint(&self) -> (Vertex, usize) {
        if self.ends[0] <= self.ends[1] {
            (self.ends[0], 0)
        } else {
            (self.ends[1], 1)
        }
    }
}

struct Stitcher<'a, 'g> {
    gprime: &'a InducedSubgraph,
    forest: ExtendableForest<'g>,
    params: &'a PackingParams,
    rng: rng::Rng,
}

impl Stitcher<'_, '_> {
    fn tree_size(&self, endpoints: usize) -> usize {
        let arity = self.params.tree_arity();
        let free = self.gprime.graph.vertex_count() - self.forest.size();
        let budget_room = self.forest.budget().saturating_sub(self.forest.size());
        let nominal = self.params.forest_budget / (3 * endpoints);
        let size = match self.params.mode {
            Mode::Theory => nominal,
            Mode::Practice => nominal.min(self.params.d).max(arity + 1),
        };
        size.min(budget_room / endpoints + 1).min(free / endpoints + 1).max(1)
    }

    fn max_depth(&self) -> usize {
        let arity = self.params.tree_arity().max(2) as f64;
        ((self.params.n as f64).ln() / arity.ln()).floor().max(1.0) as usize
    }

    /// Grows one tree per endpoint. In practice mode a failed embedding is
    /// retried at half size, down to the bare root.
    fn grow(&mut self, roots: &[Vertex], size: usize) -> Result<Vec<EmbeddedTree>, ConnectError> {
        let arity = self.params.tree_arity();
        let mut trees = Vec::with_capacity(roots.len());
        for &root in roots {
            let mut size = size;
            let tree = loop {
                let spec = TreeSpec {
                    arity,
                    size,
                    max_depth: (self.params.mode == Mode::Practice).then(|| self.max_depth()),
                };
                match self.forest.attach_tree(root, spec, self.rng.random()) {
                    Ok(tree) => break tree,
                    Err(ForestError::EmbeddingFailed { .. } | ForestError::BudgetExceeded { .. })
                        if self.params.mode == Mode::Practice && size > 1 =>
                    {
                        size /= 2;
                    }
                    Err(e) => {
                        self.discard(&trees)?;
                        return Err(e.into());
                    }
                }
            };
            trees.push(tree);
        }
        Ok(trees)
    }

    fn discard(&mut self, trees: &[EmbeddedTree]) -> Result<(), ConnectError> {
        for tree in trees.iter().rev() {
            self.forest.rollback_tree(tree, &[])?;
        }
        Ok(())
    }

    /// First host edge, in (vertex, neighbor) order, from the smaller
    /// collection to the other one.
    fn cross_edge(&self, trees: &[EmbeddedTree], order: &[usize]) -> Option<(usize, Vertex, usize, Vertex)> {
        let k = order.len();
        let (left, right) = order.split_at(k / 2);
        let (small, large) = if left.len() <= right.len() { (left, right) } else { (right, left) };
        let n = self.gprime.graph.vertex_count();
        let mut owner = vec![usize::MAX; n];
        for &t in large {
            for &v in &trees[t].vertices {
                owner[v] = t;
            }
        }
        let mut candidates: Vec<(Vertex, usize)> =
            small.iter().flat_map(|&t| trees[t].vertices.iter().map(move |&v| (v, t))).collect();
        candidates.sort_unstable();
        let cap = self.params.degree_cap - 1;
        for (u, tu) in candidates {
            if self.forest.degree(u) > cap {
                continue;
            }
            for &v in self.gprime.graph.neighbors(u) {
                if owner[v] != usize::MAX && self.forest.degree(v) <= cap {
                    return Some((tu, u, owner[v], v));
                }
            }
        }
        None
    }

    /// Joins the representatives of one set into a single path system.
    fn connect_one(&mut self, set: usize, reps: &VertexSet) -> Result<Vec<PathRecord>, ConnectError> {
        let mut chains: Vec<Chain> = reps
            .iter()
            .map(|&x| {
                let v = self.gprime.local(x).expect("representatives lie in G'");
                Chain { ends: [v, v] }
            })
            .collect();
        let total = chains.len();
        let mut records = Vec::new();
        for step in 0..total.saturating_sub(1) {
            debug_assert_eq!(chains.len(), total - step);
            let k = chains.len();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by_key(|&c| chains[c].endpoint().0);
            let roots: Vec<Vertex> = (0..k).map(|c| chains[c].endpoint().0).collect();
            let mut size = self.tree_size(k);
            let mut found = None;
            let mut trees = Vec::new();
            'rounds: for _ in 0..REGROW_ROUNDS {
                trees = self.grow(&roots, size)?;
                let mut split = order.clone();
                for attempt in 0..=SPLIT_RESHUFFLES {
                    if attempt > 0 {
                        split.shuffle(&mut self.rng);
                    }
                    if let Some(edge) = self.cross_edge(&trees, &split) {
                        found = Some(edge);
                        break 'rounds;
                    }
                }
                self.discard(&trees)?;
                trees.clear();
                size = (size * 2).min(self.params.d.max(size));
            }
            let Some((ta, u, tb, v)) = found else {
                return Err(ConnectError::NoCrossEdge { set, step });
            };

            let mut path = trees[ta].path_to_root(u).expect("u in its tree");
            path.reverse();
            path.extend(trees[tb].path_to_root(v).expect("v in its tree"));
            self.forest.add_edge(u, v)?;
            for (t, tree) in trees.iter().enumerate().rev() {
                let keep: &[Vertex] = if t == ta || t == tb { &path } else { &[] };
                self.forest.rollback_tree(tree, keep)?;
            }
            for &w in &path {
                self.forest.protect(w)?;
            }

            let length = path.len() - 1;
            let bound = match self.params.mode {
                Mode::Theory => self.params.path_length_bound(self.params.n as f64 / (total - step + 1) as f64),
                Mode::Practice => self.params.path_length_bound(self.params.n as f64),
            };
            if self.params.mode == Mode::Theory && length as f64 > bound {
                return Err(ConnectError::PathTooLong { set, length, bound });
            }
            let (a, b) = (path[0], path[length]);
            records.push(PathRecord {
                endpoints: [self.gprime.global(a), self.gprime.global(b)],
                internal: path[1..length].iter().map(|&w| self.gprime.global(w)).collect(),
                set,
                length_bound: bound,
            });

            let (ca, cb) = (chain_of(&chains, a), chain_of(&chains, b));
            let far = |c: &Chain, end: Vertex| if c.ends[0] == end { c.ends[1] } else { c.ends[0] };
            let merged = Chain { ends: [far(&chains[ca], a), far(&chains[cb], b)] };
            let (lo, hi) = (ca.min(cb), ca.max(cb));
            chains.remove(hi);
            chains[lo] = merged;
        }
        Ok(records)
    }
}

fn chain_of(chains: &[Chain], end: Vertex) -> usize {
    chains.iter().position(|c| c.ends.contains(&end)).expect("tree roots are chain ends")
}

/// BFS spanning tree of `g[s]`, or `None` if disconnected.
pub fn spanning_tree(g: &Graph, s: &VertexSet) -> Option<Vec<(Vertex, Vertex)>> {
    let Some(start) = s.min() else { return Some(Vec::new()) };
    let inside = s.mask(g.vertex_count());
    let mut seen = vec![false; g.vertex_count()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut edges = Vec::with_capacity(s.len().saturating_sub(1));
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if inside[w] && !seen[w] {
                seen[w] = true;
                edges.push((v.min(w), v.max(w)));
                queue.push_back(w);
            }
        }
    }
    (edges.len() + 1 == s.len()).then_some(edges)
}

/// Stitches the family into a packing. `max_sets` limits how many sets are
/// attempted. Practice mode drops a set whose stitching fails and carries on;
/// theory mode propagates the failure. The result is verified before it is
/// returned.
pub fn connect_family(
    g: &Graph,
    family: &DominatingFamily,
    params: &PackingParams,
    seed: u64,
    max_sets: Option<usize>,
) -> Result<ConnectOutcome, ConnectError> {
    family.reservoir.validate(g)?;
    for s in &family.sets {
        s.validate(g)?;
        if !s.is_disjoint(&family.reservoir) {
            return Err(ConnectError::InvalidFamily("set meets the reservoir".into()));
        }
    }
    let reps = choose_representatives(g, family, params)?;
    let x: VertexSet = reps.iter().fold(VertexSet::new(), |acc, r| acc.union(&r.padded));
    let gprime = g.induced(&x.union(&family.reservoir))?;
    let x_local: VertexSet = x.iter().map(|&v| gprime.local(v).expect("X in G'")).collect();
    let forest = ExtendableForest::new(
        &gprime.graph,
        &x_local,
        params.joined_size,
        params.degree_cap,
        params.forest_budget,
    )?;
    let mut stitcher = Stitcher { gprime: &gprime, forest, params, rng: rng::stream_rng(seed, streams::CONNECT) };

    let limit = max_sets.unwrap_or(usize::MAX);
    let mut sets = Vec::new();
    let mut paths = Vec::new();
    let mut dropped = Vec::new();
    let mut family_index = Vec::new();
    for (i, r) in reps.iter().enumerate() {
        if i >= limit {
            dropped.push(DroppedSet { set: i, reason: "set cap reached".into() });
            continue;
        }
        match stitcher.connect_one(i, &r.representatives) {
            Ok(records) => {
                let slot = sets.len();
                let internal = records.iter().flat_map(|p| p.internal.iter().copied());
                sets.push(family.sets[i].union(&internal.collect()));
                paths.extend(records.into_iter().map(|p| PathRecord { set: slot, ..p }));
                family_index.push(i);
            }
            Err(e) if params.mode == Mode::Practice => {
                dropped.push(DroppedSet { set: i, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }

    let mut certificates = Vec::with_capacity(sets.len());
    for (slot, s) in sets.iter().enumerate() {
        certificates.push(spanning_tree(g, s).ok_or(ConnectError::Disconnected { set: family_index[slot] })?);
    }
    let path_vertices = paths.iter().map(|p| p.internal.len()).sum();
    let packing = CdsPacking { params: Some(params.clone()), sets, certificates, paths };
    let report = verify_packing(g, &packing, None);
    if let Some(f) = report.failures.first() {
        return Err(ConnectError::VerificationFailed(format!("set {}: {}", f.set, f.detail)));
    }
    Ok(ConnectOutcome { packing, dropped, family_index, path_vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{build_family, stage_one, stage_two};
    use crate::generators::{complete, cycle, random_regular};
    use crate::params::{derive_params, Overrides};
    use crate::spectral::extremal_eigenvalues;

    fn practice_params(n: usize, d: usize) -> PackingParams {
        derive_params(n, d, 2.0 * ((d - 1) as f64).sqrt(), 0.3, Mode::Practice, Overrides::default()).unwrap()
    }

    fn family(sets: Vec<VertexSet>, reservoir: VertexSet) -> DominatingFamily {
        let component_counts = vec![1; sets.len()];
        DominatingFamily { reservoir, sets, component_counts }
    }

    #[test]
    fn representatives_per_component_and_padding() {
        // C12 with S = {0, 1, 4, 8, 9}: components {0,1}, {4}, {8,9}.
        let g = cycle(12).unwrap();
        let mut params = practice_params(200, 8);
        params.n = 12;
        params.d = 2;
        let f = family(vec![VertexSet::from([0, 1, 4, 8, 9]), VertexSet::from([2, 3])], VertexSet::new());
        let reps = choose_representatives(&g, &f, &params).unwrap();
        assert_eq!(reps[0].representatives, VertexSet::from([0, 4, 8]));
        assert_eq!(reps[0].padded, reps[0].representatives);
        assert_eq!(reps[1].representatives, VertexSet::from([2]));
        assert_eq!(reps[1].padded, VertexSet::from([2, 3]));
    }

    #[test]
    fn padding_reaches_ceiling() {
        let g = complete(40);
        let mut params = practice_params(200, 8);
        params.n = 40;
        params.d = 4;
        let s: VertexSet = (0..20).collect();
        let reps = choose_representatives(&g, &family(vec![s], VertexSet::new()), &params).unwrap();
        assert_eq!(reps[0].representatives.len(), 1);
        assert_eq!(reps[0].padded.len(), 5);
    }

    #[test]
    fn connected_sets_need_no_paths() {
        let g = complete(8);
        let mut params = practice_params(200, 8);
        params.n = 8;
        let f = family(vec![VertexSet::from([0, 1]), VertexSet::from([2, 3])], VertexSet::from([4, 5]));
        let out = connect_family(&g, &f, &params, 1, None).unwrap();
        assert_eq!(out.packing.sets, f.sets);
        assert!(out.packing.paths.is_empty());
        assert!(out.dropped.is_empty());
    }

    /// Path 0-1-2-3 with leaves 4, 5 on 0 and 6, 7 on 3; with `hub`, an
    /// extra vertex 8 adjacent to everything.
    fn caterpillar(hub: bool) -> Graph {
        let mut edges = vec![(0, 1), (1, 2), (2, 3), (0, 4), (0, 5), (3, 6), (3, 7)];
        if hub {
            edges.extend((0..8).map(|v| (v, 8)));
        }
        Graph::from_edges(if hub { 9 } else { 8 }, edges).unwrap()
    }

    #[test]
    fn two_representatives_join_through_the_reservoir() {
        let g = caterpillar(false);
        let mut params = practice_params(200, 8);
        params.n = 8;
        let f = family(vec![VertexSet::from([0, 3])], VertexSet::from([1, 2]));
        let reps = choose_representatives(&g, &f, &params).unwrap();
        assert_eq!(reps[0].representatives.len(), 2);
        let out = connect_family(&g, &f, &params, 3, None).unwrap();
        let p = &out.packing.paths;
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].endpoints, [0, 3]);
        assert_eq!(p[0].internal, vec![1, 2]);
        assert_eq!(out.packing.sets[0], VertexSet::from([0, 1, 2, 3]));
        assert_eq!(out.path_vertices, 2);
    }

    #[test]
    fn unreachable_sets_are_dropped_in_practice() {
        // Only reservoir vertex 1 is available, so 0 and 3 cannot meet.
        let g = caterpillar(true);
        let mut params = practice_params(200, 8);
        params.n = 9;
        let f = family(vec![VertexSet::from([0, 3]), VertexSet::from([8])], VertexSet::from([1]));
        let out = connect_family(&g, &f, &params, 3, None).unwrap();
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(out.dropped[0].set, 0);
        assert_eq!(out.family_index, vec![1]);
        assert_eq!(out.packing.sets, vec![VertexSet::from([8])]);
        let capped = connect_family(&g, &f, &params, 3, Some(0)).unwrap();
        assert!(capped.packing.sets.is_empty());
    }

    #[test]
    fn theory_mode_propagates_failures() {
        let g = caterpillar(true);
        let mut params = practice_params(200, 8);
        params.n = 9;
        params.mode = Mode::Theory;
        let f = family(vec![VertexSet::from([0, 3]), VertexSet::from([8])], VertexSet::from([1]));
        assert!(connect_family(&g, &f, &params, 3, None).is_err());
    }

    #[test]
    fn end_to_end_on_a_regular_graph() {
        let g = random_regular(3000, 64, 5).unwrap();
        let spectrum = extremal_eigenvalues(&g, 1e-6).unwrap();
        let params =
            derive_params(3000, 64, spectrum.lambda_for_params(), 0.3, Mode::Practice, Overrides::default()).unwrap();
        let one = stage_one(&g, &params, 1).unwrap();
        let two = stage_two(&g, &one, &params, 1).unwrap();
        let fam = build_family(&g, &two, &params).unwrap();
        let out = connect_family(&g, &fam, &params, 1, None).unwrap();
        assert!(out.packing.sets.len() >= 4, "{:?}", out.dropped);
        let mut used = vec![false; 3000];
        for p in &out.packing.paths {
            assert!(p.length() as f64 <= p.length_bound);
            for &v in &p.internal {
                assert!(fam.reservoir.contains(v));
                assert!(!std::mem::replace(&mut used[v], true));
            }
        }
        let again = connect_family(&g, &fam, &params, 1, None).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn packing_json_layout() {
        let p = CdsPacking {
            params: None,
            sets: vec![VertexSet::from([0, 1])],
            certificates: vec![vec![(0, 1)]],
            paths: vec![PathRecord { endpoints: [0, 1], internal: vec![], set: 0, length_bound: 3.0 }],
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"sets":[[0,1]],"certificates":[[[0,1]]],"paths":[{"endpoints":[0,1],"internal":[],"set":0,"length_bound":3.0}]}"#
        );
        let bare: CdsPacking = serde_json::from_str(r#"{"sets":[[2],[0,1]]}"#).unwrap();
        assert_eq!(bare.sets[0], VertexSet::from([2]));
        assert!(bare.certificates.is_empty());
    }
}
