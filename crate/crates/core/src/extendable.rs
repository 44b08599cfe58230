//! Bounded-degree forests grown inside a host graph by tree attachment,
//! edge addition and leaf deletion, plus an exhaustive checker for the
//! `(m, D)`-extendability inequality on small hosts.
//!
//! At scale the embedder keeps extendability only heuristically: children
//! are picked greedily by how many unused neighbors they keep, dead ends are
//! rolled back and retried. Final packings are certified by the verifier.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Vertex, VertexSet};
use crate::rng::{self, streams};
use crate::spectral::next_combination;

/// Reorderings tried per tree before giving up.
pub const EMBED_RETRY_CAP: usize = 50;
/// Largest number of subsets the exact checker will enumerate.
pub const EXACT_SUBSET_GUARD: u128 = 50_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("seed set is empty")]
    EmptySeed,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("forest budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("could not embed tree at {root} after {attempts} attempts")]
    EmbeddingFailed { root: Vertex, attempts: usize },
    #[error("vertex {vertex} has forest degree {degree}, limit {limit}")]
    DegreeViolation { vertex: Vertex, degree: usize, limit: usize },
    #[error("{0} and {1} already lie in one forest component")]
    SameComponent(Vertex, Vertex),
    #[error("{0}-{1} is not a host edge")]
    NotAnEdge(Vertex, Vertex),
    #[error("vertex {0} is not in the forest")]
    NotInForest(Vertex),
    #[error("vertex {0} is not a leaf")]
    NotALeaf(Vertex),
    #[error("vertex {0} is protected")]
    Protected(Vertex),
    #[error("invalid tree spec: {0}")]
    InvalidSpec(String),
    #[error("exact check would enumerate {0} subsets")]
    TooLarge(u128),
}

/// Shape of a tree to attach: complete-as-possible `arity`-ary tree on
/// `size` vertices, grown breadth first. `max_depth` bounds root-to-leaf
/// distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeSpec {
    pub arity: usize,
    pub size: usize,
    pub max_depth: Option<usize>,
}

impl TreeSpec {
    pub fn new(arity: usize, size: usize) -> Self {
        Self { arity, size, max_depth: None }
    }

    /// `⌈log_arity(size)⌉`.
    pub fn implied_depth(&self) -> usize {
        let mut depth = 0;
        let mut reach = 1usize;
        while reach < self.size {
            reach = reach.saturating_mul(self.arity);
            depth += 1;
        }
        depth
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddedTree {
    pub root: Vertex,
    /// Breadth-first order, root first.
    pub vertices: Vec<Vertex>,
    /// `parent[i]` is the index in `vertices` of the parent of
    /// `vertices[i]`; the root points at itself.
    pub parent: Vec<usize>,
    pub depth: Vec<usize>,
}

impl EmbeddedTree {
    fn position(&self, v: Vertex) -> Option<usize> {
        self.vertices.iter().position(|&w| w == v)
    }

    /// Vertices from `v` up to the root, inclusive.
    pub fn path_to_root(&self, v: Vertex) -> Option<Vec<Vertex>> {
        let mut i = self.position(v)?;
        let mut path = vec![self.vertices[i]];
        while self.parent[i] != i {
            i = self.parent[i];
            path.push(self.vertices[i]);
        }
        Some(path)
    }

    pub fn depth_of(&self, v: Vertex) -> Option<usize> {
        self.position(v).map(|i| self.depth[i])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestSnapshot {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(Vertex, Vertex)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendabilityReport {
    pub passed: bool,
    pub checked: u64,
    /// First set `U` violating the inequality.
    pub witness: Option<VertexSet>,
    /// Forest vertex above the degree cap, if any.
    pub degree_violation: Option<Vertex>,
}

/// A forest `S` inside `host`, treated as `(m, D)`-extendable.
#[derive(Clone, Debug)]
pub struct ExtendableForest<'g> {
    host: &'g Graph,
    in_forest: Vec<bool>,
    protected: Vec<bool>,
    adjacency: Vec<Vec<Vertex>>,
    size: usize,
    edge_count: usize,
    joined_size: usize,
    degree_cap: usize,
    budget: usize,
}

impl<'g> ExtendableForest<'g> {
    /// `I[x]`: the vertices of `x` with no edges. Members of `x` are
    /// protected from deletion.
    pub fn new(host: &'g Graph, x: &VertexSet, joined_size: usize, degree_cap: usize, budget: usize) -> Result<Self, ForestError> {
        if x.is_empty() {
            return Err(ForestError::EmptySeed);
        }
        if joined_size < 1 || degree_cap < 3 {
            return Err(ForestError::InvalidParameters(format!(
                "need m >= 1 and D >= 3 (m = {joined_size}, D = {degree_cap})"
            )));
        }
        x.validate(host).map_err(|e| ForestError::InvalidParameters(e.to_string()))?;
        if x.len() > budget {
            return Err(ForestError::BudgetExceeded { needed: x.len(), budget });
        }
        let n = host.vertex_count();
        let in_forest = x.mask(n);
        Ok(Self {
            host,
            protected: in_forest.clone(),
            in_forest,
            adjacency: vec![Vec::new(); n],
            size: x.len(),
            edge_count: 0,
            joined_size,
            degree_cap,
            budget,
        })
    }

    pub fn host(&self) -> &'g Graph {
        self.host
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn joined_size(&self) -> usize {
        self.joined_size
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.in_forest.get(v).copied().unwrap_or(false)
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency[v].len()
    }

    pub fn forest_neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adjacency[v]
    }

    pub fn is_protected(&self, v: Vertex) -> bool {
        self.protected[v]
    }

    /// Marks `v` as finalized so rollbacks can never remove it.
    pub fn protect(&mut self, v: Vertex) -> Result<(), ForestError> {
        if !self.contains(v) {
            return Err(ForestError::NotInForest(v));
        }
        self.protected[v] = true;
        Ok(())
    }

    /// Host vertices outside the forest.
    pub fn is_free(&self, v: Vertex) -> bool {
        !self.in_forest[v]
    }

    pub fn vertices(&self) -> VertexSet {
        (0..self.in_forest.len()).filter(|&v| self.in_forest[v]).collect()
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut edges: Vec<_> = (0..self.adjacency.len())
            .flat_map(|u| self.adjacency[u].iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn snapshot(&self) -> ForestSnapshot {
        ForestSnapshot { vertices: self.vertices().into(), edges: self.edges() }
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Embeds a copy of the tree described by `spec` with its root at
    /// `root`, using only host vertices outside the forest.
    pub fn attach_tree(&mut self, root: Vertex, spec: TreeSpec, seed: u64) -> Result<EmbeddedTree, ForestError> {
        if !self.contains(root) {
            return Err(ForestError::NotInForest(root));
        }
        if spec.size == 0 {
            return Err(ForestError::InvalidSpec("size must be at least 1".into()));
        }
        if spec.size == 1 {
            return Ok(EmbeddedTree { root, vertices: vec![root], parent: vec![0], depth: vec![0] });
        }
        if spec.arity < 2 {
            return Err(ForestError::InvalidSpec(format!("arity must be at least 2, got {}", spec.arity)));
        }
        let root_limit = (self.degree_cap / 2).saturating_sub(1);
        if self.degree(root) > root_limit {
            return Err(ForestError::DegreeViolation { vertex: root, degree: self.degree(root), limit: root_limit });
        }
        let needed = self.size + spec.size;
        if needed > self.budget {
            return Err(ForestError::BudgetExceeded { needed, budget: self.budget });
        }

        let mut rng = rng::stream_rng(seed, streams::CONNECT);
        let mut taken = vec![false; self.host.vertex_count()];
        for attempt in 0..EMBED_RETRY_CAP {
            let shuffle = if attempt == 0 { None } else { Some(&mut rng) };
            if let Some(tree) = self.try_embed(root, spec, &mut taken, shuffle) {
                self.commit(&tree);
                return Ok(tree);
            }
        }
        Err(ForestError::EmbeddingFailed { root, attempts: EMBED_RETRY_CAP })
    }

    fn unused_degree(&self, v: Vertex, taken: &[bool]) -> usize {
        self.host.neighbors(v).iter().filter(|&&w| !self.in_forest[w] && !taken[w]).count()
    }

    /// One breadth-first embedding attempt. The greedy pass orders
    /// candidates by residual unused degree (then id); later passes use a
    /// random order. `taken` is left cleared.
    fn try_embed(
        &self,
        root: Vertex,
        spec: TreeSpec,
        taken: &mut [bool],
        mut shuffle: Option<&mut rng::Rng>,
    ) -> Option<EmbeddedTree> {
        let mut tree = EmbeddedTree { root, vertices: vec![root], parent: vec![0], depth: vec![0] };
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            if tree.vertices.len() == spec.size {
                break;
            }
            if spec.max_depth.is_some_and(|limit| tree.depth[i] >= limit) {
                continue;
            }
            let v = tree.vertices[i];
            let mut candidates: Vec<Vertex> = self
                .host
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| !self.in_forest[w] && !taken[w])
                .collect();
            match shuffle.as_deref_mut() {
                Some(rng) => candidates.shuffle(rng),
                None => {
                    let mut scored: Vec<(usize, Vertex)> =
                        candidates.iter().map(|&w| (self.unused_degree(w, taken), w)).collect();
                    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                    candidates = scored.into_iter().map(|(_, w)| w).collect();
                }
            }
            let room = spec.size - tree.vertices.len();
            for w in candidates.into_iter().take(spec.arity.min(room)) {
                taken[w] = true;
                tree.vertices.push(w);
                tree.parent.push(i);
                tree.depth.push(tree.depth[i] + 1);
                queue.push_back(tree.vertices.len() - 1);
            }
        }
        for &w in &tree.vertices[1..] {
            taken[w] = false;
        }
        (tree.vertices.len() == spec.size).then_some(tree)
    }

    fn commit(&mut self, tree: &EmbeddedTree) {
        for i in 1..tree.vertices.len() {
            let (v, p) = (tree.vertices[i], tree.vertices[tree.parent[i]]);
            self.in_forest[v] = true;
            self.adjacency[v].push(p);
            self.adjacency[p].push(v);
        }
        self.size += tree.vertices.len() - 1;
        self.edge_count += tree.vertices.len() - 1;
    }

    fn same_component(&self, u: Vertex, v: Vertex) -> bool {
        let mut seen = vec![u];
        let mut stack = vec![(u, usize::MAX)];
        while let Some((x, from)) = stack.pop() {
            for &y in &self.adjacency[x] {
                if y == v {
                    return true;
                }
                if y != from && !seen.contains(&y) {
                    seen.push(y);
                    stack.push((y, x));
                }
            }
        }
        false
    }

    /// Adds host edge `uv` between two forest components.
    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), ForestError> {
        for w in [u, v] {
            if !self.contains(w) {
                return Err(ForestError::NotInForest(w));
            }
        }
        if !self.host.has_edge(u, v) {
            return Err(ForestError::NotAnEdge(u, v));
        }
        let limit = self.degree_cap - 1;
        for w in [u, v] {
            if self.degree(w) > limit {
                return Err(ForestError::DegreeViolation { vertex: w, degree: self.degree(w), limit });
            }
        }
        if self.same_component(u, v) {
            return Err(ForestError::SameComponent(u, v));
        }
        self.adjacency[u].push(v);
        self.adjacency[v].push(u);
        self.edge_count += 1;
        Ok(())
    }

    /// Deletes an unprotected vertex of forest degree one.
    pub fn remove_leaf(&mut self, leaf: Vertex) -> Result<(), ForestError> {
        if !self.contains(leaf) {
            return Err(ForestError::NotInForest(leaf));
        }
        if self.protected[leaf] {
            return Err(ForestError::Protected(leaf));
        }
        if self.degree(leaf) != 1 {
            return Err(ForestError::NotALeaf(leaf));
        }
        let parent = self.adjacency[leaf].pop().expect("leaf has one neighbor");
        self.adjacency[parent].retain(|&w| w != leaf);
        self.in_forest[leaf] = false;
        self.size -= 1;
        self.edge_count -= 1;
        Ok(())
    }

    /// Removes every non-root vertex of `tree` not listed in `keep`, deepest
    /// first.
    pub fn rollback_tree(&mut self, tree: &EmbeddedTree, keep: &[Vertex]) -> Result<(), ForestError> {
        for &v in tree.vertices[1..].iter().rev() {
            if !keep.contains(&v) {
                self.remove_leaf(v)?;
            }
        }
        Ok(())
    }

    /// Exhaustively checks the extendability inequality
    /// `|Γ(U) \ V(S)| ≥ (D−1)|U| − Σ_{x ∈ U∩V(S)} (d_S(x) − 1)`
    /// for all nonempty `U` with `|U| ≤ min(2m, u_cap)`, and the degree cap.
    pub fn is_extendable_exact(&self, u_cap: usize) -> Result<ExtendabilityReport, ForestError> {
        let n = self.host.vertex_count();
        let limit = (2 * self.joined_size).min(u_cap).min(n);
        let subsets: u128 = (1..=limit).map(|k| binomial(n, k)).sum();
        if subsets > EXACT_SUBSET_GUARD {
            return Err(ForestError::TooLarge(subsets));
        }
        if let Some(v) = (0..n).find(|&v| self.degree(v) > self.degree_cap) {
            return Ok(ExtendabilityReport { passed: false, checked: 0, witness: None, degree_violation: Some(v) });
        }
        let mut stamp = vec![0u64; n];
        let mut round = 0u64;
        let mut checked = 0u64;
        let d_minus_one = self.degree_cap as i64 - 1;
        for k in 1..=limit {
            let mut pick: Vec<Vertex> = (0..k).collect();
            loop {
                round += 1;
                checked += 1;
                let mut gamma_outside = 0i64;
                for &u in &pick {
                    for &w in self.host.neighbors(u) {
                        if stamp[w] != round {
                            stamp[w] = round;
                            if !self.in_forest[w] {
                                gamma_outside += 1;
                            }
                        }
                    }
                }
                let credit: i64 = pick
                    .iter()
                    .filter(|&&x| self.in_forest[x])
                    .map(|&x| self.degree(x) as i64 - 1)
                    .sum();
                if gamma_outside < d_minus_one * k as i64 - credit {
                    return Ok(ExtendabilityReport {
                        passed: false,
                        checked,
                        witness: Some(VertexSet::from(pick)),
                        degree_violation: None,
                    });
                }
                if !next_combination(&mut pick, n) {
                    break;
                }
            }
        }
        Ok(ExtendabilityReport { passed: true, checked, witness: None, degree_violation: None })
    }

    /// DOT rendering of the forest; `labels` maps host ids to printed ids.
    pub fn to_dot(&self, labels: Option<&[Vertex]>) -> String {
        let name = |v: Vertex| labels.map_or(v, |l| l[v]);
        let mut out = String::from("graph forest {\n");
        for v in self.vertices().iter() {
            let shape = if self.protected[*v] { "box" } else { "ellipse" };
            let _ = writeln!(out, "  {} [shape={shape}];", name(*v));
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "  {} -- {};", name(u), name(v));
        }
        out.push_str("}\n");
        out
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
