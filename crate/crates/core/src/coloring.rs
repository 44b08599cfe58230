//! Two-stage random coloring with bad-event resampling.
//!
//! Stage one splits the vertices into the reservoir `B` and `r1` coarse
//! colors; stage two refines every coarse color into `r2` subcolors. Each
//! stage resamples the variables of the lowest violated bad event until none
//! remain. The refined classes become the dominating sets of the family.
//!
//! Theory mode resamples Moser–Tardos style. In practice mode a redrawn
//! label is usually kept only if it moves no count out of, or further out
//! of, its window: at small `d` the plain walk creates violations faster
//! than it repairs them.

use std::collections::BTreeSet;
use std::ops::Bound::{Excluded, Unbounded};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{components_of, Graph, Vertex, VertexSet};
use crate::params::{Mode, PackingParams};
use crate::rng::{self, streams};

/// Resampling cap per stage, as a multiple of `n`.
pub const RESAMPLE_FACTOR: usize = 100;
/// Chance that practice mode keeps a harmful redraw anyway, which breaks
/// gridlocks between neighboring events.
pub const ESCAPE_PROB: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum ColoringError {
    #[error("stage {stage}: resampling budget of {budget} exhausted with {remaining} bad events left")]
    ResampleBudgetExhausted { stage: u8, budget: usize, remaining: usize },
    #[error("postcondition violated ({bullet}): {detail}")]
    PostconditionViolation { bullet: Bullet, detail: String },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bullet {
    Dominating,
    ComponentBound,
    ReservoirDegree,
}

impl std::fmt::Display for Bullet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bullet::Dominating => "each set dominating",
            Bullet::ComponentBound => "component bound",
            Bullet::ReservoirDegree => "reservoir degree",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Uncolored,
    Reservoir,
    Color1(usize),
    Color2(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorAssignment {
    pub labels: Vec<Label>,
    /// Bad events resampled to reach this assignment.
    pub resamplings: usize,
}

impl ColorAssignment {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Output of the coloring: reservoir `B` and the disjoint dominating sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominatingFamily {
    #[serde(rename = "B")]
    pub reservoir: VertexSet,
    pub sets: Vec<VertexSet>,
    pub component_counts: Vec<usize>,
}

fn draw_coarse(rng: &mut rng::Rng, params: &PackingParams) -> Label {
    let u: f64 = rng.random();
    if u < params.reservoir_prob {
        return Label::Reservoir;
    }
    let c = ((u - params.reservoir_prob) / params.color_prob) as usize;
    if c < params.color_classes {
        Label::Color1(c)
    } else {
        Label::Uncolored
    }
}

/// Counter slot for a stage-one label: 0 for the reservoir, `1 + c` for
/// coarse color `c`.
fn coarse_slot(label: Label) -> Option<usize> {
    match label {
        Label::Reservoir => Some(0),
        Label::Color1(c) => Some(1 + c),
        _ => None,
    }
}

struct StageOneEvents<'a> {
    params: &'a PackingParams,
    slots: usize,
    counts: Vec<u32>,
    bad: BTreeSet<(Vertex, usize)>,
}

impl StageOneEvents<'_> {
    fn below(&self, slot: usize, k: u32) -> bool {
        let t = &self.params.thresholds;
        (k as f64) < if slot == 0 { t.reservoir_low } else { t.color_low }
    }

    fn above(&self, slot: usize, k: u32) -> bool {
        let (t, k) = (&self.params.thresholds, k as f64);
        if slot == 0 {
            t.reservoir_high.is_some_and(|h| k > h)
        } else {
            k > t.color_high
        }
    }

    fn is_bad(&self, v: Vertex, slot: usize) -> bool {
        let k = self.counts[v * self.slots + slot];
        self.below(slot, k) || self.above(slot, k)
    }

    /// Whether relabeling `u` from `old` to `new` pushes some count down to
    /// or further below its window, or up to or further above it.
    fn harms(&self, g: &Graph, u: Vertex, old: Label, new: Label) -> bool {
        g.neighbors(u).iter().any(|&w| {
            let base = w * self.slots;
            coarse_slot(old).is_some_and(|s| self.below(s, self.counts[base + s] - 1))
                || coarse_slot(new).is_some_and(|s| self.above(s, self.counts[base + s] + 1))
        })
    }

    fn refresh(&mut self, v: Vertex, slot: usize) {
        if self.is_bad(v, slot) {
            self.bad.insert((v, slot));
        } else {
            self.bad.remove(&(v, slot));
        }
    }

    fn relabel(&mut self, g: &Graph, u: Vertex, old: Label, new: Label) {
        for &w in g.neighbors(u) {
            if let Some(s) = coarse_slot(old) {
                self.counts[w * self.slots + s] -= 1;
                self.refresh(w, s);
            }
            if let Some(s) = coarse_slot(new) {
                self.counts[w * self.slots + s] += 1;
                self.refresh(w, s);
            }
        }
    }
}

fn stage_one_events<'a>(g: &Graph, labels: &[Label], params: &'a PackingParams) -> StageOneEvents<'a> {
    let n = g.vertex_count();
    let slots = params.color_classes + 1;
    let mut counts = vec![0u32; n * slots];
    for v in 0..n {
        for &w in g.neighbors(v) {
            if let Some(s) = coarse_slot(labels[w]) {
                counts[v * slots + s] += 1;
            }
        }
    }
    let mut events = StageOneEvents { params, slots, counts, bad: BTreeSet::new() };
    for v in 0..n {
        for s in 0..slots {
            if events.is_bad(v, s) {
                events.bad.insert((v, s));
            }
        }
    }
    events
}

/// The lowest bad event, or with `sweep` the lowest one after `cursor`
/// (wrapping), so that one stubborn event cannot starve the rest.
fn next_event(bad: &BTreeSet<(Vertex, usize)>, cursor: (Vertex, usize), sweep: bool) -> Option<(Vertex, usize)> {
    if sweep {
        if let Some(&e) = bad.range((Excluded(cursor), Unbounded)).next() {
            return Some(e);
        }
    }
    bad.first().copied()
}

/// Random split into reservoir and coarse colors, then resampling of
/// `N(v)` for the lowest violated `(v, c)` until every count sits in its
/// window.
pub fn stage_one(g: &Graph, params: &PackingParams, seed: u64) -> Result<ColorAssignment, ColoringError> {
    let n = g.vertex_count();
    let mut rng = rng::stream_rng(seed, streams::STAGE_ONE);
    let mut labels: Vec<Label> = (0..n).map(|_| draw_coarse(&mut rng, params)).collect();
    let mut events = stage_one_events(g, &labels, params);
    let conservative = params.mode == Mode::Practice;
    let budget = RESAMPLE_FACTOR * n;
    let mut resamplings = 0;
    let mut cursor = (0, 0);
    while let Some(event) = next_event(&events.bad, cursor, conservative) {
        if resamplings == budget {
            return Err(ColoringError::ResampleBudgetExhausted { stage: 1, budget, remaining: events.bad.len() });
        }
        resamplings += 1;
        cursor = event;
        let v = event.0;
        for &u in g.neighbors(v) {
            let new = draw_coarse(&mut rng, params);
            let old = labels[u];
            if old == new || (conservative && events.harms(g, u, old, new) && !rng.random_bool(ESCAPE_PROB)) {
                continue;
            }
            labels[u] = new;
            events.relabel(g, u, old, new);
        }
    }
    Ok(ColorAssignment { labels, resamplings })
}

struct StageTwoEvents<'a> {
    params: &'a PackingParams,
    grid: usize,
    counts: Vec<u32>,
    bad: BTreeSet<(Vertex, usize)>,
}

impl StageTwoEvents<'_> {
    fn below(&self, k: u32) -> bool {
        k as f64 <= self.params.thresholds.pair_low
    }

    fn above(&self, k: u32) -> bool {
        k as f64 >= self.params.thresholds.pair_high
    }

    fn is_bad(&self, v: Vertex, idx: usize) -> bool {
        let k = self.counts[v * self.grid + idx];
        self.below(k) || self.above(k)
    }

    fn harms(&self, g: &Graph, u: Vertex, from: usize, to: usize) -> bool {
        g.neighbors(u).iter().any(|&w| {
            self.below(self.counts[w * self.grid + from] - 1) || self.above(self.counts[w * self.grid + to] + 1)
        })
    }

    fn refresh(&mut self, v: Vertex, idx: usize) {
        if self.is_bad(v, idx) {
            self.bad.insert((v, idx));
        } else {
            self.bad.remove(&(v, idx));
        }
    }
}

/// Refines each `Color1(c)` into `Color2(c, c')` with `c'` uniform, then
/// resamples the subcolors of `N_c(v)` for the lowest violated
/// `(v, c, c')` until every refined count lies strictly inside
/// `(pair_low, pair_high)`.
pub fn stage_two(
    g: &Graph,
    stage1: &ColorAssignment,
    params: &PackingParams,
    seed: u64,
) -> Result<ColorAssignment, ColoringError> {
    let n = g.vertex_count();
    if stage1.labels.len() != n {
        return Err(ColoringError::InvalidAssignment(format!(
            "{} labels for {n} vertices",
            stage1.labels.len()
        )));
    }
    if let Some(l) = stage1.labels.iter().find(|l| matches!(l, Label::Color2(..))) {
        return Err(ColoringError::InvalidAssignment(format!("stage-one input already refined: {l:?}")));
    }
    let remaining = stage_one_events(g, &stage1.labels, params).bad.len();
    if remaining > 0 {
        return Err(ColoringError::InvalidAssignment(format!("{remaining} stage-one bad events remain")));
    }

    let r2 = params.subcolor_classes;
    let grid = params.target_count;
    let mut rng = rng::stream_rng(seed, streams::STAGE_TWO);
    let mut labels: Vec<Label> = stage1
        .labels
        .iter()
        .map(|&l| match l {
            Label::Color1(c) => Label::Color2(c, rng.random_range(0..r2)),
            other => other,
        })
        .collect();

    let mut counts = vec![0u32; n * grid];
    for v in 0..n {
        for &w in g.neighbors(v) {
            if let Label::Color2(c, s) = labels[w] {
                counts[v * grid + params.set_index(c, s)] += 1;
            }
        }
    }
    let mut events = StageTwoEvents { params, grid, counts, bad: BTreeSet::new() };
    for v in 0..n {
        for idx in 0..grid {
            if events.is_bad(v, idx) {
                events.bad.insert((v, idx));
            }
        }
    }

    let conservative = params.mode == Mode::Practice;
    let budget = RESAMPLE_FACTOR * n;
    let mut resamplings = 0;
    let mut cursor = (0, 0);
    while let Some(event) = next_event(&events.bad, cursor, conservative) {
        if resamplings == budget {
            return Err(ColoringError::ResampleBudgetExhausted { stage: 2, budget, remaining: events.bad.len() });
        }
        resamplings += 1;
        cursor = event;
        let (v, idx) = event;
        let color = idx / r2;
        for &u in g.neighbors(v) {
            let Label::Color2(c, old) = labels[u] else { continue };
            if c != color {
                continue;
            }
            let new = rng.random_range(0..r2);
            if new == old {
                continue;
            }
            let (from, to) = (params.set_index(c, old), params.set_index(c, new));
            if conservative && events.harms(g, u, from, to) && !rng.random_bool(ESCAPE_PROB) {
                continue;
            }
            labels[u] = Label::Color2(c, new);
            for &w in g.neighbors(u) {
                events.counts[w * grid + from] -= 1;
                events.refresh(w, from);
                events.counts[w * grid + to] += 1;
                events.refresh(w, to);
            }
        }
    }
    Ok(ColorAssignment { labels, resamplings })
}

/// Upper bound on the number of components of each set.
pub fn component_bound(params: &PackingParams) -> f64 {
    20.0 * params.n as f64 / (params.epsilon * params.epsilon * params.d as f64)
}

/// Minimum number of reservoir neighbors every vertex must have.
pub fn reservoir_degree_bound(params: &PackingParams) -> f64 {
    params.reservoir_prob * params.d as f64 / 2.0
}

/// Collects the refined classes into the family and checks all three
/// output properties mechanically.
pub fn build_family(
    g: &Graph,
    stage2: &ColorAssignment,
    params: &PackingParams,
) -> Result<DominatingFamily, ColoringError> {
    let n = g.vertex_count();
    if stage2.labels.len() != n {
        return Err(ColoringError::InvalidAssignment(format!(
            "{} labels for {n} vertices",
            stage2.labels.len()
        )));
    }
    let mut members: Vec<Vec<Vertex>> = vec![Vec::new(); params.target_count];
    let mut reservoir = Vec::new();
    for (v, &label) in stage2.labels.iter().enumerate() {
        match label {
            Label::Reservoir => reservoir.push(v),
            Label::Color2(c, s) => members[params.set_index(c, s)].push(v),
            Label::Color1(_) => {
                return Err(ColoringError::InvalidAssignment(format!("vertex {v} was never refined")))
            }
            Label::Uncolored => {}
        }
    }
    let sets: Vec<VertexSet> = members.into_iter().map(VertexSet::from).collect();
    let reservoir = VertexSet::from(reservoir);
    let component_counts = sets
        .iter()
        .map(|s| components_of(g, s).map(|c| c.len()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ColoringError::InvalidAssignment(e.to_string()))?;
    let family = DominatingFamily { reservoir, sets, component_counts };
    check_family(g, &family, params)?;
    Ok(family)
}

/// The three output properties of the coloring stage.
pub fn check_family(g: &Graph, family: &DominatingFamily, params: &PackingParams) -> Result<(), ColoringError> {
    let n = g.vertex_count();
    for (i, set) in family.sets.iter().enumerate() {
        let inside = set.mask(n);
        if let Some(v) = (0..n).find(|&v| !inside[v] && !g.neighbors(v).iter().any(|&w| inside[w])) {
            return Err(ColoringError::PostconditionViolation {
                bullet: Bullet::Dominating,
                detail: format!("set {i} does not dominate vertex {v}"),
            });
        }
    }
    let bound = component_bound(params);
    for (i, &count) in family.component_counts.iter().enumerate() {
        if count as f64 > bound {
            return Err(ColoringError::PostconditionViolation {
                bullet: Bullet::ComponentBound,
                detail: format!("set {i} has {count} components, bound {bound:.3}"),
            });
        }
    }
    let in_b = family.reservoir.mask(n);
    let need = reservoir_degree_bound(params);
    if let Some(v) = (0..n).find(|&v| (g.neighbors(v).iter().filter(|&&w| in_b[w]).count() as f64) < need) {
        return Err(ColoringError::PostconditionViolation {
            bullet: Bullet::ReservoirDegree,
            detail: format!("vertex {v} has fewer than {need:.3} reservoir neighbors"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_regular;
    use crate::params::{derive_params, Mode, Overrides};

    fn practice(g: &Graph, lambda: f64, eps: f64) -> PackingParams {
        let d = g.regular_degree().unwrap();
        derive_params(g.vertex_count(), d, lambda, eps, Mode::Practice, Overrides::default()).unwrap()
    }

    fn stage_one_bad_count(g: &Graph, a: &ColorAssignment, params: &PackingParams) -> usize {
        stage_one_events(g, &a.labels, params).bad.len()
    }

    #[test]
    fn single_coarse_color() {
        let g = random_regular(2000, 40, 1).unwrap();
        let params = practice(&g, 13.0, 0.3);
        assert_eq!(params.color_classes, 1);
        let a = stage_one(&g, &params, 3).unwrap();
        assert!(a.labels.iter().all(|l| matches!(l, Label::Reservoir | Label::Color1(0) | Label::Uncolored)));
        assert_eq!(stage_one_bad_count(&g, &a, &params), 0);
    }

    #[test]
    fn stage_one_reservoir_audit() {
        let g = random_regular(3000, 64, 2).unwrap();
        let params = practice(&g, 16.0, 0.3);
        let a = stage_one(&g, &params, 5).unwrap();
        for v in 0..g.vertex_count() {
            let k = g.neighbors(v).iter().filter(|&&w| a.labels[w] == Label::Reservoir).count();
            assert!(k as f64 >= 0.09 * 64.0 / 2.0, "vertex {v}: {k}");
        }
    }

    #[test]
    fn impossible_thresholds_exhaust_budget() {
        let g = random_regular(30, 4, 1).unwrap();
        let mut params = derive_params(30, 4, 3.0, 0.5, Mode::Practice, Overrides::default()).unwrap();
        params.thresholds.reservoir_low = 5.0;
        let err = stage_one(&g, &params, 0).unwrap_err();
        assert!(matches!(err, ColoringError::ResampleBudgetExhausted { stage: 1, budget: 3000, .. }));
    }

    #[test]
    fn single_subcolor_is_identity_refinement() {
        let g = random_regular(1000, 40, 4).unwrap();
        let mut params = practice(&g, 13.0, 0.3);
        params.subcolor_classes = 1;
        params.target_count = params.color_classes;
        params.subcolor_prob = 1.0;
        let a = stage_one(&g, &params, 1).unwrap();
        let b = stage_two(&g, &a, &params, 1).unwrap();
        for (x, y) in a.labels.iter().zip(&b.labels) {
            match (x, y) {
                (Label::Color1(c), Label::Color2(c2, 0)) => assert_eq!(c, c2),
                (l, m) => assert_eq!(l, m),
            }
        }
        assert_eq!(b.resamplings, 0);
    }

    #[test]
    fn stage_two_counts_and_determinism() {
        let g = random_regular(3000, 64, 7).unwrap();
        let params = practice(&g, 16.0, 0.3);
        let a = stage_one(&g, &params, 11).unwrap();
        let b = stage_two(&g, &a, &params, 11).unwrap();
        assert_eq!(b, stage_two(&g, &a, &params, 11).unwrap());
        assert_eq!(a, stage_one(&g, &params, 11).unwrap());
        for v in 0..g.vertex_count() {
            let mut counts = vec![0usize; params.target_count];
            for &w in g.neighbors(v) {
                if let Label::Color2(c, s) = b.labels[w] {
                    counts[params.set_index(c, s)] += 1;
                }
            }
            let low = params.thresholds.pair_low;
            assert!(counts.iter().all(|&k| k as f64 > low), "vertex {v}: {counts:?}");
        }
        // Refinement keeps coarse colors and never touches other labels.
        for (x, y) in a.labels.iter().zip(&b.labels) {
            match (x, y) {
                (Label::Color1(c), Label::Color2(c2, _)) => assert_eq!(c, c2),
                (l, m) => assert_eq!(l, m),
            }
        }
    }

    #[test]
    fn stage_two_rejects_unfinished_stage_one() {
        let g = random_regular(30, 4, 1).unwrap();
        let mut params = derive_params(30, 4, 3.0, 0.5, Mode::Practice, Overrides::default()).unwrap();
        let a = ColorAssignment { labels: vec![Label::Uncolored; 30], resamplings: 0 };
        params.thresholds.reservoir_low = 1.0;
        assert!(matches!(stage_two(&g, &a, &params, 0), Err(ColoringError::InvalidAssignment(_))));
    }

    #[test]
    fn family_satisfies_all_bullets() {
        let g = random_regular(3000, 64, 9).unwrap();
        let params = practice(&g, 16.0, 0.3);
        let a = stage_one(&g, &params, 2).unwrap();
        let b = stage_two(&g, &a, &params, 2).unwrap();
        let family = build_family(&g, &b, &params).unwrap();
        assert_eq!(family.sets.len(), params.target_count);
        let mut owner = vec![usize::MAX; g.vertex_count()];
        for (i, s) in std::iter::once(&family.reservoir).chain(&family.sets).enumerate() {
            for &v in s.iter() {
                assert_eq!(owner[v], usize::MAX, "vertex {v} in two classes");
                owner[v] = i;
            }
        }
        assert!(family.component_counts.iter().all(|&c| c >= 1));
    }

    #[test]
    fn tampered_family_is_rejected() {
        let g = random_regular(3000, 64, 9).unwrap();
        let params = practice(&g, 16.0, 0.3);
        let a = stage_one(&g, &params, 2).unwrap();
        let mut b = stage_two(&g, &a, &params, 2).unwrap();
        // Empty class 0 by moving it into the reservoir-free pool.
        for l in b.labels.iter_mut() {
            if *l == Label::Color2(0, 0) {
                *l = Label::Uncolored;
            }
        }
        let err = build_family(&g, &b, &params).unwrap_err();
        assert!(matches!(err, ColoringError::PostconditionViolation { bullet: Bullet::Dominating, .. }));

        let mut c = stage_two(&g, &a, &params, 2).unwrap();
        for l in c.labels.iter_mut() {
            if *l == Label::Reservoir {
                *l = Label::Uncolored;
            }
        }
        let err = build_family(&g, &c, &params).unwrap_err();
        assert!(matches!(err, ColoringError::PostconditionViolation { bullet: Bullet::ReservoirDegree, .. }));
    }

    #[test]
    fn family_json_layout() {
        let family = DominatingFamily {
            reservoir: VertexSet::from([4]),
            sets: vec![VertexSet::from([0, 1]), VertexSet::from([2])],
            component_counts: vec![1, 1],
        };
        assert_eq!(
            serde_json::to_string(&family).unwrap(),
            r#"{"B":[4],"sets":[[0,1],[2]],"component_counts":[1,1]}"#
        );
    }
}
