//! Globals and functions shared by agenda generation and delayed rules.

use rand::Rng;

use crate::citygen::SemanticCity;
use crate::navgraph::NavGraph;
use crate::population::Population;
use crate::rng::StreamRng;
use crate::rulelang::eval::uniform;
use crate::rulelang::{evaluate, Arg, EntityKind, EntityRef, Environment, Pos, RuleError, Signature, Value};

/// Read-only inputs every agenda interpreter sees.
#[derive(Debug, Clone, Copy)]
pub struct World<'w> {
    pub city: &'w SemanticCity,
    pub graph: &'w NavGraph,
    pub population: &'w Population,
}

/// State an interpreter exposes to the shared functions.
pub trait AgendaScope<'w>: Environment {
    fn world(&self) -> World<'w>;
    fn household(&self) -> u32;
    fn focus(&self) -> Option<u32>;
    fn set_focus(&mut self, person: Option<u32>);
    fn rng(&mut self) -> &mut StreamRng;
    /// `findObject`, whose search origin and reservation rules differ.
    fn find_object(&mut self, kind: &str, radius: Option<f64>) -> Value;
}

pub fn signature(name: &str) -> Option<Signature> {
    Some(match name {
        "getDistance" | "getDistanceInTime" | "findNearestBuilding" | "rand" => Signature::strict(2, 2),
        "findBuilding" | "isValid" => Signature::strict(1, 1),
        "findObject" => Signature::strict(1, 2),
        "count" => Signature { min_args: 0, max_args: 1, lazy: &[0] },
        "chooseMember" => Signature { min_args: 1, max_args: 1, lazy: &[0] },
        _ => return None,
    })
}

pub fn global<'w, S: AgendaScope<'w> + ?Sized>(s: &S, name: &str) -> Option<Value> {
    let w = s.world();
    let person = s.focus().and_then(|p| w.population.person(p));
    Some(match name {
        "home" => Value::Entity(EntityRef::building(w.population.households[s.household() as usize].home)),
        "household.id" => Value::Number(s.household() as f64),
        "person.id" => match person {
            Some(p) => Value::Entity(EntityRef::person(p.id)),
            None => Value::Number(-1.0),
        },
        "age" => person.map_or(Value::Invalid, |p| Value::Number(p.age as f64)),
        "gender" => person.map_or(Value::Invalid, |p| Value::Bool(p.gender)),
        _ => return None,
    })
}

fn building(v: &Value, pos: Pos) -> Result<Option<u32>, RuleError> {
    v.as_entity(EntityKind::Building, pos, "building")
}

/// Evaluates `pred` once per household member with that member focused.
fn per_member<'w, S: AgendaScope<'w> + ?Sized>(s: &mut S, pred: &crate::rulelang::Expr) -> Result<Vec<(u32, Value)>, RuleError> {
    let w = s.world();
    let members = w.population.households[s.household() as usize].members.clone();
    let saved = s.focus();
    let mut out = Vec::with_capacity(members.len());
    for m in members {
        s.set_focus(Some(m));
        let v = evaluate(pred, s);
        s.set_focus(saved);
        out.push((m, v?));
    }
    Ok(out)
}

pub fn call<'w, S: AgendaScope<'w> + ?Sized>(s: &mut S, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
    let w = s.world();
    match name {
        "getDistance" => {
            let (Some(a), Some(b)) = (building(args[0].value(), pos)?, building(args[1].value(), pos)?) else {
                return Ok(Value::Invalid);
            };
            Ok(w.graph.building_distance(a, b).map_or(Value::Invalid, Value::Number))
        }
        "getDistanceInTime" => {
            let person = s
                .focus()
                .and_then(|p| w.population.person(p))
                .ok_or_else(|| RuleError::runtime(pos, "getDistanceInTime needs a focused person"))?;
            let (Some(a), Some(b)) = (building(args[0].value(), pos)?, building(args[1].value(), pos)?) else {
                return Ok(Value::Invalid);
            };
            Ok(w.graph.building_distance(a, b).map_or(Value::Invalid, |d| Value::Number(d / person.walk_speed)))
        }
        "findBuilding" => {
            let kind = args[0].value().as_text(pos, "building type")?;
            let found: Vec<u32> = w.city.buildings_of_kind(kind).map(|b| b.id).collect();
            if found.is_empty() {
                return Ok(Value::Invalid);
            }
            let i = s.rng().gen_range(0..found.len());
            Ok(Value::Entity(EntityRef::building(found[i])))
        }
        "findNearestBuilding" => {
            let kind = args[0].value().as_text(pos, "building type")?;
            let Some(from) = building(args[1].value(), pos)? else {
                return Ok(Value::Invalid);
            };
            let mut best: Option<(f64, u32)> = None;
            for b in w.city.buildings_of_kind(kind) {
                if let Some(d) = w.graph.building_distance(from, b.id) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, b.id));
                    }
                }
            }
            Ok(best.map_or(Value::Invalid, |(_, id)| Value::Entity(EntityRef::building(id))))
        }
        "findObject" => {
            let kind = args[0].value().as_text(pos, "object type")?.to_string();
            let radius = match args.get(1) {
                Some(a) => Some(a.value().as_number(pos, "search radius")?),
                None => None,
            };
            Ok(s.find_object(&kind, radius))
        }
        "isValid" => Ok(Value::Bool(args[0].value().is_valid())),
        "rand" => {
            let lo = args[0].value().as_number(pos, "rand bound")?;
            let hi = args[1].value().as_number(pos, "rand bound")?;
            Ok(Value::Number(uniform(s.rng(), lo, hi)))
        }
        "count" => {
            let Some(Arg::Lazy(pred)) = args.first() else {
                return Ok(Value::Number(w.population.households[s.household() as usize].members.len() as f64));
            };
            let mut n = 0;
            for (_, v) in per_member(s, pred)? {
                if matches!(v, Value::Bool(true)) {
                    n += 1;
                } else if !matches!(v, Value::Bool(false) | Value::Invalid) {
                    return Err(RuleError::mismatch(pred.pos(), format!("count predicate must be a bool, got {}", v.type_name())));
                }
            }
            Ok(Value::Number(n as f64))
        }
        "chooseMember" => {
            let Arg::Lazy(pred) = &args[0] else { unreachable!() };
            let scored = per_member(s, pred)?;
            let mut best: Vec<u32> = Vec::new();
            let mut top = f64::NEG_INFINITY;
            for (m, v) in scored {
                let score = match v {
                    Value::Bool(true) => 1.0,
                    Value::Bool(false) | Value::Invalid => continue,
                    Value::Number(x) if x.is_finite() => x,
                    Value::Number(_) => continue,
                    v => {
                        return Err(RuleError::mismatch(
                            pred.pos(),
                            format!("chooseMember predicate must be a bool or number, got {}", v.type_name()),
                        ))
                    }
                };
                if score > top {
                    top = score;
                    best.clear();
                }
                if score == top {
                    best.push(m);
                }
            }
            if best.is_empty() {
                return Ok(Value::Invalid);
            }
            let i = if best.len() == 1 { 0 } else { s.rng().gen_range(0..best.len()) };
            Ok(Value::Entity(EntityRef::person(best[i])))
        }
        _ => Err(RuleError::UnknownFunction { name: name.to_string(), pos }),
    }
}
