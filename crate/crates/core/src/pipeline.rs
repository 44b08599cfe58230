//! Whole-run orchestration: spectrum, parameters, coloring, stitching and
//! verification, collected into one JSON-ready report.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coloring::{build_family, stage_one, stage_two, ColoringError, DominatingFamily};
use crate::connector::{connect_family, CdsPacking, DroppedSet};
use crate::generators::GenSpec;
use crate::graph::{Graph, VertexSet};
use crate::params::{derive_params, Mode, Overrides, PackingParams};
use crate::spectral::{extremal_eigenvalues, SpectralProfile};
use crate::verifier::{verify_packing, VerificationReport};

/// Coloring attempts (seeds `seed`, `seed + 1`, ...) before giving up.
pub const COLORING_ATTEMPTS: usize = 5;
/// Default target is `⌈FLOOR_FACTOR · d / ln d⌉` verified sets.
pub const FLOOR_FACTOR: f64 = 0.25;

pub mod exit_code {
    pub const OK: i32 = 0;
    pub const VERIFICATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const SPECTRAL: i32 = 4;
    pub const PARAMS: i32 = 5;
    pub const COLORING: i32 = 6;
    pub const CONNECTOR: i32 = 7;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackConfig {
    pub epsilon: f64,
    pub mode: Mode,
    pub tol: f64,
    #[serde(default)]
    pub overrides: Overrides,
    /// Verified sets required for success; defaults to the engineering floor.
    pub target: Option<usize>,
    pub max_sets: Option<usize>,
}

impl Default for PackConfig {
    fn default() -> Self {
        Self { epsilon: 0.3, mode: Mode::Practice, tol: 1e-6, overrides: Overrides::default(), target: None, max_sets: None }
    }
}

pub fn default_target(d: usize) -> usize {
    let d = d as f64;
    (FLOOR_FACTOR * d / d.ln()).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub edges: usize,
    pub degree: Option<usize>,
    pub source: Option<GenSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub reservoir: VertexSet,
    pub set_sizes: Vec<usize>,
    pub component_counts: Vec<usize>,
    pub resamplings: [usize; 2],
}

impl FamilySummary {
    fn new(family: &DominatingFamily, resamplings: [usize; 2]) -> Self {
        Self {
            reservoir: family.reservoir.clone(),
            set_sizes: family.sets.iter().map(|s| s.len()).collect(),
            component_counts: family.component_counts.clone(),
            resamplings,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub spectral_ms: f64,
    pub params_ms: f64,
    pub coloring_ms: f64,
    pub connector_ms: f64,
    pub verifier_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: PackConfig,
    pub graph: GraphSummary,
    pub spectral: Option<SpectralProfile>,
    /// λ handed to parameter derivation (iterative estimates carry a margin).
    pub lambda_used: Option<f64>,
    pub params: Option<PackingParams>,
    pub family: Option<FamilySummary>,
    pub packing: Option<CdsPacking>,
    pub dropped: Vec<DroppedSet>,
    pub verification: Option<VerificationReport>,
    pub attempts: usize,
    pub timings: Timings,
    pub error: Option<RunError>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match (&self.error, &self.verification) {
            (Some(e), _) => e.exit_code,
            (None, Some(v)) if v.passed() => exit_code::OK,
            _ => exit_code::VERIFICATION,
        }
    }

    /// Report with the timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { timings: Timings::default(), ..self.clone() }
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn fail(report: &mut RunReport, stage: &str, message: String, exit_code: i32) {
    report.error = Some(RunError { stage: stage.into(), message, exit_code });
}

/// Runs the whole pipeline on `g`. Failures are recorded in the report.
pub fn pack(g: &Graph, source: Option<GenSpec>, config: &PackConfig, seed: u64) -> RunReport {
    let mut report = RunReport {
        seed,
        config: config.clone(),
        graph: GraphSummary { n: g.vertex_count(), edges: g.edge_count(), degree: g.regular_degree(), source },
        spectral: None,
        lambda_used: None,
        params: None,
        family: None,
        packing: None,
        dropped: Vec::new(),
        verification: None,
        attempts: 0,
        timings: Timings::default(),
        error: None,
    };

    let start = Instant::now();
    let spectrum = extremal_eigenvalues(g, config.tol);
    report.timings.spectral_ms = elapsed_ms(start);
    let spectrum = match spectrum {
        Ok(s) => s,
        Err(e) => {
            fail(&mut report, "spectral", e.to_string(), exit_code::SPECTRAL);
            return report;
        }
    };
    let lambda = spectrum.lambda_for_params();
    report.spectral = Some(spectrum);
    report.lambda_used = Some(lambda);
    let d = report.graph.degree.expect("spectral stage requires a regular graph");

    let start = Instant::now();
    let params = derive_params(g.vertex_count(), d, lambda, config.epsilon, config.mode, config.overrides);
    report.timings.params_ms = elapsed_ms(start);
    let params = match params {
        Ok(p) => p,
        Err(e) => {
            fail(&mut report, "params", e.to_string(), exit_code::PARAMS);
            return report;
        }
    };
    report.params = Some(params.clone());

    let start = Instant::now();
    let mut colored = None;
    let mut last_error = None;
    for attempt in 0..COLORING_ATTEMPTS {
        report.attempts = attempt + 1;
        let s = seed.wrapping_add(attempt as u64);
        let result = stage_one(g, &params, s)
            .and_then(|one| stage_two(g, &one, &params, s).map(|two| (one.resamplings, two)))
            .and_then(|(r1, two)| build_family(g, &two, &params).map(|f| (f, [r1, two.resamplings], s)));
        match result {
            Ok(found) => {
                colored = Some(found);
                break;
            }
            Err(e @ ColoringError::ResampleBudgetExhausted { .. }) => last_error = Some(e),
            Err(e) => {
                last_error = Some(e);
                break;
            }
        }
    }
    report.timings.coloring_ms = elapsed_ms(start);
    let Some((family, resamplings, color_seed)) = colored else {
        let message = last_error.map_or_else(|| "no coloring attempt made".into(), |e| e.to_string());
        fail(&mut report, "coloring", message, exit_code::COLORING);
        return report;
    };
    report.family = Some(FamilySummary::new(&family, resamplings));

    let start = Instant::now();
    let outcome = connect_family(g, &family, &params, color_seed, config.max_sets);
    report.timings.connector_ms = elapsed_ms(start);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            fail(&mut report, "connector", e.to_string(), exit_code::CONNECTOR);
            return report;
        }
    };

    let start = Instant::now();
    let target = config.target.unwrap_or_else(|| default_target(d));
    report.verification = Some(verify_packing(g, &outcome.packing, Some(target)));
    report.timings.verifier_ms = elapsed_ms(start);
    report.packing = Some(outcome.packing);
    report.dropped = outcome.dropped;
    report
}

/// Independent runs with seeds `seed + t · COLORING_ATTEMPTS`, executed concurrently.
pub fn pack_trials(g: &Graph, source: Option<GenSpec>, config: &PackConfig, seed: u64, trials: usize) -> Vec<RunReport> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| pack(g, source.clone(), config, seed.wrapping_add(t * COLORING_ATTEMPTS as u64)))
        .collect()
}
