//! Construction-agnostic certification of packings, and exhaustive oracles
//! for tiny graphs.
//!
//! Nothing the constructor reports is trusted: connectivity is re-derived
//! by traversal and certificates are only cross-checked afterwards.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connector::CdsPacking;
use crate::graph::{Graph, Vertex, VertexSet};
use crate::spectral::next_combination;

pub const MIN_CDS_LIMIT: usize = 20;
pub const MAX_PACKING_LIMIT: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: n = {n} > {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("graph is not connected")]
    Disconnected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InvalidVertex,
    Overlap,
    NotDominating,
    Disconnected,
    BadCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub set: usize,
    pub kind: FailureKind,
    pub witness: Option<Vertex>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCheck {
    pub size: usize,
    pub dominating: bool,
    pub connected: bool,
    /// `None` when the packing carries no certificate for this set.
    pub certificate_ok: Option<bool>,
}

impl SetCheck {
    fn passed(&self) -> bool {
        self.dominating && self.connected && self.certificate_ok != Some(false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub packing_size: usize,
    pub sets: Vec<SetCheck>,
    pub disjoint: bool,
    pub failures: Vec<Failure>,
    /// Sets that passed every check; zero unless the packing is disjoint.
    pub verified_count: usize,
    pub target: Option<usize>,
    pub target_met: Option<bool>,
}

impl VerificationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    /// Valid and, if a target was given, meeting it.
    pub fn passed(&self) -> bool {
        self.is_valid() && self.target_met != Some(false)
    }
}

/// Lowest vertex neither in `s` nor adjacent to it.
pub fn domination_witness(g: &Graph, s: &VertexSet) -> Option<Vertex> {
    let n = g.vertex_count();
    let mut covered = vec![false; n];
    for &v in s.iter().filter(|&&v| v < n) {
        covered[v] = true;
        for &w in g.neighbors(v) {
            covered[w] = true;
        }
    }
    covered.iter().position(|&c| !c)
}

pub fn is_dominating(g: &Graph, s: &VertexSet) -> bool {
    domination_witness(g, s).is_none()
}

/// Vertex of `s` unreachable from `min(s)` inside `g[s]`, if any.
fn connectivity_witness(g: &Graph, s: &VertexSet) -> Option<Vertex> {
    let start = s.min()?;
    let n = g.vertex_count();
    let inside = s.mask(n);
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in g.neighbors(v) {
            if inside[w] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    s.iter().copied().find(|&v| !seen[v])
}

/// Whether `edges` form a spanning tree of `g[s]`.
fn certificate_problem(g: &Graph, s: &VertexSet, edges: &[(Vertex, Vertex)]) -> Option<String> {
    if edges.len() + 1 != s.len().max(1) {
        return Some(format!("{} edges for {} vertices", edges.len(), s.len()));
    }
    let index = |v: Vertex| s.as_slice().binary_search(&v).ok();
    let mut parent: Vec<usize> = (0..s.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in edges {
        let (Some(a), Some(b)) = (index(u), index(v)) else {
            return Some(format!("edge {u}-{v} leaves the set"));
        };
        if !g.has_edge(u, v) {
            return Some(format!("{u}-{v} is not an edge"));
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return Some(format!("edge {u}-{v} closes a cycle"));
        }
        parent[ra] = rb;
    }
    None
}

/// Checks disjointness, then domination and connectivity of every set.
pub fn verify_packing(g: &Graph, packing: &CdsPacking, target: Option<usize>) -> VerificationReport {
    let n = g.vertex_count();
    let mut failures = Vec::new();

    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut disjoint = true;
    for (i, set) in packing.sets.iter().enumerate() {
        for &v in set.iter() {
            if v >= n {
                failures.push(Failure {
                    set: i,
                    kind: FailureKind::InvalidVertex,
                    witness: Some(v),
                    detail: format!("vertex {v} out of range for n = {n}"),
                });
                continue;
            }
            match owner[v] {
                Some(j) => {
                    disjoint = false;
                    failures.push(Failure {
                        set: i,
                        kind: FailureKind::Overlap,
                        witness: Some(v),
                        detail: format!("vertex {v} also in set {j}"),
                    });
                }
                None => owner[v] = Some(i),
            }
        }
    }
    let has_certificates = !packing.certificates.is_empty();
    if has_certificates && packing.certificates.len() != packing.sets.len() {
        failures.push(Failure {
            set: packing.sets.len().min(packing.certificates.len()),
            kind: FailureKind::BadCertificate,
            witness: None,
            detail: format!("{} certificates for {} sets", packing.certificates.len(), packing.sets.len()),
        });
    }

    let checks: Vec<(SetCheck, Vec<Failure>)> = packing
        .sets
        .par_iter()
        .enumerate()
        .map(|(i, raw)| {
            let set: VertexSet = raw.iter().copied().filter(|&v| v < n).collect();
            let mut local = Vec::new();
            let undominated = domination_witness(g, &set);
            if let Some(w) = undominated {
                local.push(Failure {
                    set: i,
                    kind: FailureKind::NotDominating,
                    witness: Some(w),
                    detail: format!("vertex {w} has no neighbor in the set"),
                });
            }
            let unreachable = if set.is_empty() { None } else { connectivity_witness(g, &set) };
            if let Some(w) = unreachable {
                local.push(Failure {
                    set: i,
                    kind: FailureKind::Disconnected,
                    witness: Some(w),
                    detail: format!("vertex {w} unreachable from {}", set.min().unwrap_or(0)),
                });
            }
            let certificate_ok = packing.certificates.get(i).filter(|_| has_certificates).map(|edges| {
                match certificate_problem(g, &set, edges) {
                    Some(detail) => {
                        local.push(Failure { set: i, kind: FailureKind::BadCertificate, witness: None, detail });
                        false
                    }
                    None => true,
                }
            });
            let check = SetCheck {
                size: raw.len(),
                dominating: undominated.is_none(),
                connected: !set.is_empty() && unreachable.is_none(),
                certificate_ok,
            };
            (check, local)
        })
        .collect();

    let mut sets = Vec::with_capacity(checks.len());
    for (check, local) in checks {
        failures.extend(local);
        sets.push(check);
    }
    let verified_count = if disjoint { sets.iter().filter(|c| c.passed()).count() } else { 0 };
    VerificationReport {
        packing_size: packing.sets.len(),
        sets,
        disjoint,
        failures,
        verified_count,
        target,
        target_met: target.map(|t| verified_count >= t),
    }
}

fn closed_masks(g: &Graph) -> Vec<u32> {
    (0..g.vertex_count())
        .map(|v| g.neighbors(v).iter().fold(1u32 << v, |m, &w| m | (1 << w)))
        .collect()
}

fn mask_is_cds(masks: &[u32], full: u32, s: u32) -> bool {
    if s == 0 {
        return false;
    }
    let mut covered = 0;
    let mut rest = s;
    while rest != 0 {
        covered |= masks[rest.trailing_zeros() as usize];
        rest &= rest - 1;
    }
    if covered != full {
        return false;
    }
    let mut reached = s & s.wrapping_neg();
    loop {
        let mut grown = reached;
        let mut rest = reached;
        while rest != 0 {
            grown |= masks[rest.trailing_zeros() as usize] & s;
            rest &= rest - 1;
        }
        if grown == reached {
            return reached == s;
        }
        reached = grown;
    }
}

fn mask_to_set(mask: u32) -> VertexSet {
    (0..32).filter(|&v| mask >> v & 1 == 1).collect()
}

/// Smallest connected dominating set, by increasing-size enumeration.
pub fn brute_force_min_cds(g: &Graph) -> Result<(usize, VertexSet), OracleError> {
    let n = g.vertex_count();
    if n > MIN_CDS_LIMIT {
        return Err(OracleError::TooLarge { n, limit: MIN_CDS_LIMIT });
    }
    if n == 0 || !crate::graph::is_connected_subset(g, &g.vertices()).unwrap_or(false) {
        return Err(OracleError::Disconnected);
    }
    let masks = closed_masks(g);
    let full = ((1u64 << n) - 1) as u32;
    for k in 1..=n {
        let mut pick: Vec<Vertex> = (0..k).collect();
        loop {
            let s = pick.iter().fold(0u32, |m, &v| m | 1 << v);
            if mask_is_cds(&masks, full, s) {
                return Ok((k, mask_to_set(s)));
            }
            if !next_combination(&mut pick, n) {
                break;
            }
        }
    }
    unreachable!("V(g) is a connected dominating set of a connected graph")
}

/// Largest number of pairwise disjoint connected dominating sets. Only
/// inclusion-minimal sets are candidates: shrinking members keeps a packing
/// disjoint.
pub fn brute_force_max_disjoint_cds(g: &Graph) -> Result<(usize, Vec<VertexSet>), OracleError> {
    let n = g.vertex_count();
    if n > MAX_PACKING_LIMIT {
        return Err(OracleError::TooLarge { n, limit: MAX_PACKING_LIMIT });
    }
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let masks = closed_masks(g);
    let full = (1u32 << n) - 1;
    let is_cds: Vec<bool> = (0..=full).map(|s| mask_is_cds(&masks, full, s)).collect();
    let minimal: Vec<u32> = (1..=full)
        .filter(|&s| is_cds[s as usize])
        .filter(|&s| {
            let mut rest = s;
            while rest != 0 {
                let bit = rest & rest.wrapping_neg();
                if is_cds[(s ^ bit) as usize] {
                    return false;
                }
                rest ^= bit;
            }
            true
        })
        .collect();
    let smallest = minimal.iter().map(|s| s.count_ones()).min().unwrap_or(1);

    fn search(cands: &[u32], from: usize, used: u32, n: usize, smallest: u32, chosen: &mut Vec<u32>, best: &mut Vec<u32>) {
        if chosen.len() > best.len() {
            *best = chosen.clone();
        }
        let free = n as u32 - used.count_ones();
        if chosen.len() + (free / smallest) as usize <= best.len() {
            return;
        }
        for i in from..cands.len() {
            if cands[i] & used == 0 {
                chosen.push(cands[i]);
                search(cands, i + 1, used | cands[i], n, smallest, chosen, best);
                chosen.pop();
            }
        }
    }
    let mut best = Vec::new();
    search(&minimal, 0, 0, n, smallest, &mut Vec::new(), &mut best);
    Ok((best.len(), best.into_iter().map(mask_to_set).collect()))
}
