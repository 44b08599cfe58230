//! Construction and certification of vertex-disjoint connected dominating
//! set packings in regular expander graphs.

pub mod coloring;
pub mod connector;
pub mod extendable;
pub mod generators;
pub mod graph;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod verifier;
