//! Text report of one person and their agenda.

use std::fmt::Write;

use super::HarnessError;
use crate::agendagen::{AgendaSet, TaskKind};
use crate::citygen::SemanticCity;
use crate::population::Population;

/// `hh:mm:ss`, rounded to the second.
pub fn clock(t: f64) -> String {
    let s = t.round() as i64;
    format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
}

fn building(city: &SemanticCity, b: u32) -> String {
    match city.building(b) {
        Some(x) => {
            let mut kinds: Vec<&str> = x.entrances.iter().map(|e| e.kind.as_str()).collect();
            kinds.dedup();
            format!("building {b} ({})", kinds.join("/"))
        }
        None => format!("building {b} (missing)"),
    }
}

pub fn inspect_person(city: &SemanticCity, population: &Population, agendas: &AgendaSet, person: u32) -> Result<String, HarnessError> {
    let p = population.person(person).ok_or_else(|| HarnessError::stage("inspect", format!("no person with id {person}")))?;
    let agenda = agendas.agenda(person).ok_or_else(|| HarnessError::stage("inspect", format!("no agenda for person {person}")))?;
    let mut out = String::new();
    writeln!(out, "person {}", p.id).unwrap();
    writeln!(out, "  household   {}", p.household).unwrap();
    writeln!(out, "  age         {}", p.age).unwrap();
    writeln!(out, "  gender      {}", if p.gender { "female" } else { "male" }).unwrap();
    writeln!(out, "  home        {}", building(city, p.home)).unwrap();
    writeln!(out, "  walk speed  {:.2} m/s", p.walk_speed).unwrap();
    writeln!(out, "agenda").unwrap();
    for t in &agenda.tasks {
        let target = match &t.kind {
            TaskKind::StayInside { building: b } | TaskKind::GoToBuilding { building: b } => building(city, *b),
            TaskKind::DelayedRule { rule, .. } => format!("rule {rule}"),
            TaskKind::FloatingSlot => "free time".to_string(),
            TaskKind::GroupAccompany { members, building: b, .. } => {
                let m: Vec<String> = members.iter().map(|m| format!("person {m}")).collect();
                format!("{} with {}", building(city, *b), m.join(", "))
            }
        };
        let group = t.group.map(|g| format!("  [group {}.{}]", g.household, g.index)).unwrap_or_default();
        writeln!(out, "  {}-{}  {:<16} {target}{group}", clock(t.t0), clock(t.t1), t.kind.name()).unwrap();
    }
    writeln!(out, "floating pool").unwrap();
    if agenda.pool.is_empty() {
        writeln!(out, "  (empty)").unwrap();
    }
    for e in &agenda.pool {
        writeln!(out, "  rule {}  max {}  priority {}", e.rule, clock(e.max_duration), e.priority).unwrap();
    }
    Ok(out)
}
