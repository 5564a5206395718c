//! Procedural semantic cities, household populations, rule-driven daily
//! agendas and a deterministic whereabouts simulation.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agendagen;
pub mod citygen;
pub mod geom;
pub mod harness;
pub mod navgraph;
pub mod population;
pub mod rng;
pub mod rulelang;
pub mod simulation;
