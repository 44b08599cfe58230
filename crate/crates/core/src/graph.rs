//! Immutable simple undirected graphs and the set-level primitives used by
//! every other stage: ordered-pair edge counts, restricted neighborhoods and
//! induced components.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vertex = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for graph on {n} vertices")]
    VertexOutOfRange { vertex: Vertex, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(Vertex, Vertex),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header declares {declared} edges but {found} were read")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compressed adjacency lists. Neighbors of `v` live in
/// `neighbors[offsets[v]..offsets[v + 1]]` and are strictly increasing.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<Vertex>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("vertex_count", &self.vertex_count())
            .field("edge_count", &self.edge_count())
            .finish()
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    /// Builds a graph from an undirected edge list. Each unordered pair may
    /// appear once, in either orientation.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        let mut adjacency: Vec<Vec<Vertex>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(adjacency.iter().map(Vec::len).sum());
        offsets.push(0);
        for (u, mut list) in adjacency.into_iter().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let (a, b) = (u.min(w[0]), u.max(w[0]));
                return Err(GraphError::DuplicateEdge(a, b));
            }
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        Ok(Self { offsets, neighbors })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u < self.vertex_count() && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Common degree if the graph is regular. The empty graph on zero
    /// vertices is reported as 0-regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let n = self.vertex_count();
        if n == 0 {
            return Some(0);
        }
        let d = self.degree(0);
        (1..n).all(|v| self.degree(v) == d).then_some(d)
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet((0..self.vertex_count()).collect())
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        (0..self.vertex_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<(), GraphError> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange {
                vertex: v,
                n: self.vertex_count(),
            })
        }
    }

    /// Induced subgraph on `set`, relabelled to `0..set.len()` in increasing
    /// global order so local and global ids sort identically.
    pub fn induced(&self, set: &VertexSet) -> Result<InducedSubgraph, GraphError> {
        set.validate(self)?;
        let mut local = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in set.iter().enumerate() {
            local[v] = i;
        }
        let mut offsets = Vec::with_capacity(set.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for &v in set.iter() {
            // Global neighbor order is increasing and the relabelling is
            // monotone, so local lists stay sorted.
            neighbors.extend(
                self.neighbors(v)
                    .iter()
                    .map(|&w| local[w])
                    .filter(|&w| w != usize::MAX),
            );
            offsets.push(neighbors.len());
        }
        Ok(InducedSubgraph {
            graph: Graph { offsets, neighbors },
            to_global: set.as_slice().to_vec(),
        })
    }

    /// Parses the edge-list text format: a header `n m` followed by `m`
    /// lines `u v`.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self, GraphError> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (line_no, header) = match lines.next() {
            Some((i, l)) => (i, l?),
            None => {
                return Err(GraphError::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        let [n, m] = parse_pair(&header, line_no)?;
        let mut edges = Vec::with_capacity(m);
        for (line_no, line) in lines {
            let line = line?;
            edges.push(parse_pair(&line, line_no).map(|[u, v]| (u, v))?);
        }
        if edges.len() != m {
            return Err(GraphError::EdgeCountMismatch {
                declared: m,
                found: edges.len(),
            });
        }
        Self::from_edges(n, edges)
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        Self::read_edge_list(text.as_bytes())
    }

    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{} {}", self.vertex_count(), self.edge_count())?;
        for (u, v) in self.edges() {
            writeln!(writer, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("edge list is ASCII")
    }
}

fn parse_pair(line: &str, line_no: usize) -> Result<[usize; 2], GraphError> {
    let mut fields = line.split_whitespace();
    let mut out = [0usize; 2];
    for slot in out.iter_mut() {
        let field = fields.next().ok_or_else(|| GraphError::Parse {
            line: line_no,
            message: "expected two integers".into(),
        })?;
        *slot = field.parse().map_err(|_| GraphError::Parse {
            line: line_no,
            message: format!("not a nonnegative integer: {field:?}"),
        })?;
    }
    if fields.next().is_some() {
        return Err(GraphError::Parse {
            line: line_no,
            message: "trailing fields".into(),
        });
    }
    Ok(out)
}

/// An induced subgraph together with the map from its local ids back to the
/// host graph. `to_global` is strictly increasing.
#[derive(Clone, Debug)]
pub struct InducedSubgraph {
    pub graph: Graph,
    pub to_global: Vec<Vertex>,
}

impl InducedSubgraph {
    pub fn global(&self, local: Vertex) -> Vertex {
        self.to_global[local]
    }

    pub fn local(&self, global: Vertex) -> Option<Vertex> {
        self.to_global.binary_search(&global).ok()
    }
}

/// Sorted, duplicate-free list of vertex ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Vertex>", into = "Vec<Vertex>")]
pub struct VertexSet(Vec<Vertex>);

impl From<Vec<Vertex>> for VertexSet {
    fn from(mut members: Vec<Vertex>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self(members)
    }
}

impl From<VertexSet> for Vec<Vertex> {
    fn from(set: VertexSet) -> Self {
        set.0
    }
}

impl FromIterator<Vertex> for VertexSet {
    fn from_iter<I: IntoIterator<Item = Vertex>>(iter: I) -> Self {
        Self::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<const N: usize> From<[Vertex; N]> for VertexSet {
    fn from(members: [Vertex; N]) -> Self {
        Self::from(members.to_vec())
    }
}

impl VertexSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Vertex> + '_ {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.0
    }

    pub fn min(&self) -> Option<Vertex> {
        self.0.first().copied()
    }

    pub fn validate(&self, g: &Graph) -> Result<(), GraphError> {
        match self.0.last() {
            Some(&v) => g.check_vertex(v),
            None => Ok(()),
        }
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        self.0.iter().chain(other.0.iter()).copied().collect()
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet(
            self.0
                .iter()
                .copied()
                .filter(|&v| !other.contains(v))
                .collect(),
        )
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    /// Membership mask over `0..n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.0 {
            mask[v] = true;
        }
        mask
    }
}

/// `e(A, B)`: number of ordered pairs `(x, y) ∈ A × B` with `xy` an edge.
pub fn edge_count_between(g: &Graph, a: &VertexSet, b: &VertexSet) -> Result<usize, GraphError> {
    a.validate(g)?;
    b.validate(g)?;
    let in_b = b.mask(g.vertex_count());
    Ok(a.iter()
        .map(|&x| g.neighbors(x).iter().filter(|&&y| in_b[y]).count())
        .sum())
}

/// `Γ_B(A)`: vertices of `b` with at least one neighbor in `a`.
pub fn gamma_restricted(g: &Graph, a: &VertexSet, b: &VertexSet) -> Result<VertexSet, GraphError> {
    a.validate(g)?;
    b.validate(g)?;
    let mut hit = vec![false; g.vertex_count()];
    for &x in a.iter() {
        for &y in g.neighbors(x) {
            hit[y] = true;
        }
    }
    Ok(VertexSet(b.iter().copied().filter(|&y| hit[y]).collect()))
}

/// `N_B(A) = Γ_B(A) \ A`.
pub fn external_neighborhood(
    g: &Graph,
    a: &VertexSet,
    b: &VertexSet,
) -> Result<VertexSet, GraphError> {
    Ok(gamma_restricted(g, a, b)?.difference(a))
}

/// Connected components of `g[s]`, each sorted, ordered by smallest member.
pub fn components_of(g: &Graph, s: &VertexSet) -> Result<Vec<VertexSet>, GraphError> {
    s.validate(g)?;
    let n = g.vertex_count();
    let inside = s.mask(n);
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    // Scanning roots in increasing order yields components sorted by minimum.
    for &root in s.iter() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        let mut members = Vec::new();
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for &w in g.neighbors(v) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        components.push(VertexSet::from(members));
    }
    Ok(components)
}

/// Whether `g[s]` is connected. The empty set counts as disconnected.
pub fn is_connected_subset(g: &Graph, s: &VertexSet) -> Result<bool, GraphError> {
    Ok(components_of(g, s)?.len() == 1)
}
