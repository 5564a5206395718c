//! Procedural city generation.
//!
//! A street grid is cut into lots and a shape-grammar rule set is run on every
//! lot. The result is a [`SemanticCity`]: buildings with typed entrances,
//! zones and tagged objects, plus the raw geometry for export.

pub mod city;
pub mod interp;
pub mod layout;
pub mod obj;
pub mod scope;

use rayon::prelude::*;
use thiserror::Error;

pub use city::{Building, CityObject, Entrance, Footprint, SemanticCity, SpatialIndex, Zone};
pub use interp::Leaf;
pub use layout::{generate_layout, Layout, LayoutConfig, Lot, Side, Street};
pub use scope::Scope;

use crate::rng::{substream, Stream};
use crate::rulelang::{RuleError, RuleSet};

#[derive(Debug, Error)]
pub enum CityError {
    #[error("invalid layout: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("malformed city file: {0}")]
    Format(String),
    #[error("city fails validation:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Rules(#[from] RuleError),
}

#[derive(Debug, Clone)]
pub struct CityOutput {
    pub city: SemanticCity,
    pub layout: Layout,
    /// Geometry of every lot, indexed by lot id.
    pub leaves: Vec<Vec<Leaf>>,
    pub diagnostics: Vec<String>,
}

/// Generates a city. Lots are independent and run in parallel, each with its
/// own random substream, so the output depends only on the inputs.
pub fn generate_city(cfg: &LayoutConfig, rules: &RuleSet, seed: u64) -> Result<CityOutput, CityError> {
    let layout = generate_layout(cfg)?;
    let outputs: Vec<interp::LotOutput> = layout
        .lots
        .par_iter()
        .map(|lot| interp::apply_cga(rules, lot, &layout, cfg, substream(seed, Stream::Lot, lot.id as u64)))
        .collect();
    let mut diagnostics = Vec::new();
    let mut records = Vec::with_capacity(outputs.len());
    let mut leaves = Vec::with_capacity(outputs.len());
    for out in outputs {
        diagnostics.extend(out.diagnostics);
        records.push(out.records);
        leaves.push(out.leaves);
    }
    for d in &diagnostics {
        log::warn!("{d}");
    }
    let city = city::finalize_city(&layout, cfg, seed, records)?;
    Ok(CityOutput { city, layout, leaves, diagnostics })
}
