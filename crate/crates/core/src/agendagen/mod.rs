//! Agenda generation from household rule files.
//!
//! Every household gets a fresh context and its own random substream, runs
//! the start rule, and each member's agenda is then completed with stays at
//! home so that it covers the whole day.

pub mod agenda;
pub mod builtins;
mod generate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use agenda::{Agenda, AgendaTask, FloatingTaskEntry, GroupId, TaskKind, DAY};
pub use builtins::World;
pub use generate::DYNAMIC_OPS;

use crate::rng::{substream, Stream};
use crate::rulelang::RuleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaSet {
    pub seed: u64,
    /// Indexed by person id.
    pub agendas: Vec<Agenda>,
    pub diagnostics: Vec<String>,
}

impl AgendaSet {
    pub fn agenda(&self, person: u32) -> Option<&Agenda> {
        self.agendas.get(person as usize)
    }

    /// Checks that there is one complete agenda per person.
    pub fn validate(&self, world: &World<'_>) -> Vec<String> {
        let mut problems = Vec::new();
        if self.agendas.len() != world.population.persons.len() {
            problems.push(format!("{} agendas for {} persons", self.agendas.len(), world.population.persons.len()));
        }
        for (i, a) in self.agendas.iter().enumerate() {
            if a.person as usize != i {
                problems.push(format!("agenda {i} belongs to person {}", a.person));
            }
            if let Err(e) = a.check(true) {
                problems.push(format!("person {}: {e}", a.person));
            }
            for t in &a.tasks {
                if t.kind.building().is_some_and(|b| world.city.building(b).is_none()) {
                    problems.push(format!("person {}: task refers to a missing building", a.person));
                }
            }
        }
        problems
    }
}

pub fn generate_all_agendas(rules: &RuleSet, world: World<'_>, seed: u64, max_depth: u32) -> AgendaSet {
    let results: Vec<(Vec<Agenda>, Vec<String>)> = world
        .population
        .households
        .par_iter()
        .map(|h| {
            let rng = substream(seed, Stream::Household, h.id as u64);
            let mut g = generate::Generator::new(world, rules, h, rng, max_depth);
            let outcome = g.run();
            let mut notes = std::mem::take(&mut g.warnings);
            let mut agendas: Vec<Agenda> = match outcome {
                Ok(()) => g.agendas.into_values().collect(),
                Err(e) => {
                    notes.push(format!("household {}: {e}; members stay at home", h.id));
                    h.members.iter().map(|&m| Agenda::new(m)).collect()
                }
            };
            for a in &mut agendas {
                a.finalize(h.home);
            }
            (agendas, notes)
        })
        .collect();
    let mut agendas: Vec<Agenda> = Vec::with_capacity(world.population.persons.len());
    let mut diagnostics = Vec::new();
    for (a, d) in results {
        agendas.extend(a);
        diagnostics.extend(d);
    }
    agendas.sort_by_key(|a| a.person);
    for d in &diagnostics {
        log::warn!("{d}");
    }
    AgendaSet { seed, agendas, diagnostics }
}
