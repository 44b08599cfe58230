use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use cdspack_core::connector::CdsPacking;
use cdspack_core::generators::GenSpec;
use cdspack_core::graph::Graph;
use cdspack_core::params::{Mode, Overrides};
use cdspack_core::pipeline::{self, exit_code, PackConfig};
use cdspack_core::spectral::extremal_eigenvalues;
use cdspack_core::verifier::verify_packing;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Disjoint connected dominating set packings in regular expanders.
#[derive(Parser)]
#[command(name = "cdspack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as an edge list.
    Gen {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Extremal adjacency eigenvalues of a regular graph.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full pipeline and write a JSON report.
    Pack {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        pack: PackArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Independent runs with disjoint seed ranges, executed concurrently.
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Check a packing (bare, or inside a pack report) against a graph.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        packing: PathBuf,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Regular,
    Binomial,
    GluedCliques,
    Complete,
    Cycle,
    Petersen,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file; generator flags are ignored when given.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "regular")]
    kind: Kind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator seed, if different from --seed.
    #[arg(long)]
    graph_seed: Option<u64>,
}

#[derive(Args)]
struct PackArgs {
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    #[arg(long, default_value = "practice")]
    mode: Mode,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Joinedness scale override (practice mode).
    #[arg(long)]
    m: Option<usize>,
    /// Extendability degree override (practice mode).
    #[arg(long = "D")]
    degree_cap: Option<usize>,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    max_sets: Option<usize>,
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: exit_code::USAGE, error: error.into() }
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: exit_code::IO, error: error.into() }
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::usage(anyhow::anyhow!("--{flag} is required for this graph kind")))
}

impl GraphArgs {
    fn spec(&self) -> Result<GenSpec, Failure> {
        let seed = self.graph_seed.unwrap_or(self.seed);
        Ok(match self.kind {
            Kind::Regular => GenSpec::Regular { n: need(self.n, "n")?, d: need(self.d, "d")?, seed },
            Kind::Binomial => GenSpec::Binomial { n: need(self.n, "n")?, p: need(self.p, "p")?, seed },
            Kind::GluedCliques => GenSpec::GluedCliques { k: need(self.k, "k")? },
            Kind::Complete => GenSpec::Complete { n: need(self.n, "n")? },
            Kind::Cycle => GenSpec::Cycle { n: need(self.n, "n")? },
            Kind::Petersen => GenSpec::Petersen,
        })
    }

    fn load(&self) -> Result<(Graph, Option<GenSpec>), Failure> {
        match &self.input {
            Some(path) => Ok((read_graph(path)?, None)),
            None => {
                let spec = self.spec()?;
                let g = spec.build().map_err(Failure::usage)?;
                Ok((g, Some(spec)))
            }
        }
    }
}

fn read_graph(path: &Path) -> Result<Graph, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::io)?;
    Graph::parse_edge_list(&text).with_context(|| format!("parsing {}", path.display())).map_err(Failure::io)
}

fn emit(path: Option<&Path>, body: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())).map_err(Failure::io),
        None => io::stdout().write_all(body.as_bytes()).context("writing stdout").map_err(Failure::io),
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Accepts either a packing or a pack report with a `packing` field.
fn read_packing(path: &Path) -> Result<CdsPacking, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::io)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(Failure::io)?;
    let inner = match value.get("packing") {
        Some(p) if value.get("sets").is_none() => p.clone(),
        _ => value,
    };
    if inner.is_null() {
        return Err(Failure::io(anyhow::anyhow!("{} holds no packing", path.display())));
    }
    serde_json::from_value(inner).with_context(|| format!("decoding packing in {}", path.display())).map_err(Failure::io)
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Gen { graph, output } => {
            let (g, _) = graph.load()?;
            emit(output.as_deref(), &g.to_edge_list_string())?;
            Ok(exit_code::OK)
        }
        Command::Spectrum { graph, tol, report } => {
            let (g, source) = graph.load()?;
            match extremal_eigenvalues(&g, tol) {
                Ok(profile) => {
                    let body = json!({
                        "graph": {"n": g.vertex_count(), "edges": g.edge_count(), "source": source},
                        "spectral": profile,
                        "lambda_for_params": profile.lambda_for_params(),
                    });
                    emit(report.as_deref(), &to_json(&body))?;
                    Ok(exit_code::OK)
                }
                Err(e) => {
                    let body = json!({"error": {"stage": "spectral", "message": e.to_string()}});
                    emit(report.as_deref(), &to_json(&body))?;
                    Ok(exit_code::SPECTRAL)
                }
            }
        }
        Command::Pack { graph, pack, report, trials } => {
            let (g, source) = graph.load()?;
            let config = PackConfig {
                epsilon: pack.epsilon,
                mode: pack.mode,
                tol: pack.tol,
                overrides: Overrides { joined_size: pack.m, degree_cap: pack.degree_cap },
                target: pack.target,
                max_sets: pack.max_sets,
            };
            if trials <= 1 {
                let r = pipeline::pack(&g, source, &config, graph.seed);
                emit(report.as_deref(), &to_json(&r))?;
                Ok(r.exit_code())
            } else {
                let runs = pipeline::pack_trials(&g, source, &config, graph.seed, trials);
                let code = runs.iter().map(|r| r.exit_code()).find(|&c| c != exit_code::OK).unwrap_or(exit_code::OK);
                let summary: Vec<_> = runs
                    .iter()
                    .map(|r| {
                        json!({
                            "seed": r.seed,
                            "exit_code": r.exit_code(),
                            "verified_count": r.verification.as_ref().map(|v| v.verified_count),
                        })
                    })
                    .collect();
                emit(report.as_deref(), &to_json(&json!({"summary": summary, "trials": runs})))?;
                Ok(code)
            }
        }
        Command::Verify { input, packing, target, report } => {
            let g = read_graph(&input)?;
            let p = read_packing(&packing)?;
            let r = verify_packing(&g, &p, target);
            emit(report.as_deref(), &to_json(&r))?;
            Ok(if r.passed() { exit_code::OK } else { exit_code::VERIFICATION })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
