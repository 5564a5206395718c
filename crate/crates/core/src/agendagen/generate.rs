//! The household interpreter that writes agendas.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::agenda::{Agenda, FloatingTaskEntry, GroupId, TaskKind, DAY};
use super::builtins::{self, AgendaScope, World};
use crate::population::Household;
use crate::rng::StreamRng;
use crate::rulelang::ast::{Expr, ExprKind, SelectorBlock, SuccessorItem};
use crate::rulelang::{evaluate, Arg, EntityKind, Environment, Pos, RuleError, RuleSet, Signature, Value};

/// Operations that only make sense while a delayed rule runs.
pub const DYNAMIC_OPS: [&str; 5] = ["wait", "goToZone", "goToObject", "interact", "waitUntilNextTask"];

pub(crate) struct Generator<'w> {
    pub world: World<'w>,
    pub rules: &'w RuleSet,
    pub household: &'w Household,
    pub attrs: HashMap<String, Value>,
    pub agendas: BTreeMap<u32, Agenda>,
    pub rng: StreamRng,
    pub focus: Option<u32>,
    pub vars: HashMap<String, Value>,
    pub warnings: Vec<String>,
    pub max_depth: u32,
    groups: u32,
}

impl Environment for Generator<'_> {
    fn variable(&self, name: &str) -> Option<Value> {
        self.vars.get(name).or_else(|| self.attrs.get(name)).cloned().or_else(|| builtins::global(self, name))
    }

    fn signature(&self, name: &str) -> Option<Signature> {
        builtins::signature(name)
    }

    fn call(&mut self, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
        builtins::call(self, name, args, pos)
    }
}

impl<'w> AgendaScope<'w> for Generator<'w> {
    fn world(&self) -> World<'w> {
        self.world
    }

    fn household(&self) -> u32 {
        self.household.id
    }

    fn focus(&self) -> Option<u32> {
        self.focus
    }

    fn set_focus(&mut self, person: Option<u32>) {
        self.focus = person;
    }

    fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    /// Searches around the home entrance; nothing is reserved before the
    /// simulation runs.
    fn find_object(&mut self, kind: &str, radius: Option<f64>) -> Value {
        let city = self.world.city;
        let origin = city.buildings[self.household.home as usize].primary_entrance();
        let found: Vec<u32> = city
            .objects
            .iter()
            .filter(|o| o.kind == kind && radius.is_none_or(|r| o.position.distance(origin) <= r))
            .map(|o| o.id)
            .collect();
        if found.is_empty() {
            return Value::Invalid;
        }
        let i = self.rng.gen_range(0..found.len());
        Value::Entity(crate::rulelang::EntityRef::object(found[i]))
    }
}

fn symbol<'e>(e: &'e Expr, what: &str) -> Result<&'e str, RuleError> {
    e.as_symbol().ok_or_else(|| RuleError::runtime(e.pos(), format!("{what} must be a name")))
}

impl<'w> Generator<'w> {
    pub fn new(world: World<'w>, rules: &'w RuleSet, household: &'w Household, rng: StreamRng, max_depth: u32) -> Self {
        let agendas = household.members.iter().map(|&m| (m, Agenda::new(m))).collect();
        Generator {
            world,
            rules,
            household,
            attrs: HashMap::new(),
            agendas,
            rng,
            focus: None,
            vars: HashMap::new(),
            warnings: Vec::new(),
            max_depth,
            groups: 0,
        }
    }

    pub fn run(&mut self) -> Result<(), RuleError> {
        for (name, expr) in &self.rules.attributes {
            let v = evaluate(expr, self)?;
            self.attrs.insert(name.clone(), v);
        }
        let start = self.rules.start();
        if !start.params.is_empty() {
            return Err(RuleError::runtime(start.span.0, "the start rule cannot take parameters"));
        }
        self.run_items(&start.successor, 0)
    }

    fn warn(&mut self, pos: Pos, msg: impl Into<String>) {
        self.warnings.push(format!("household {} at {pos}: {}", self.household.id, msg.into()));
    }

    /// Attributes overlaid with the current variables, for delayed execution.
    fn snapshot(&self) -> BTreeMap<String, Value> {
        let mut out: BTreeMap<String, Value> = self.attrs.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        out.extend(self.vars.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    fn with_saved<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> T {
        let vars = self.vars.clone();
        let focus = self.focus;
        let out = f(self);
        self.vars = vars;
        self.focus = focus;
        out
    }

    fn run_items(&mut self, items: &'w [SuccessorItem], depth: u32) -> Result<(), RuleError> {
        for item in items {
            match item {
                SuccessorItem::RuleCall { name, args, span } => self.call_rule(name, args, depth, span.0)?,
                SuccessorItem::OpCall { name, args, selectors, span } => self.op(name, args, selectors.as_ref(), depth, span.0)?,
                SuccessorItem::Cases(branches) => {
                    for b in branches {
                        let take = match &b.condition {
                            None => true,
                            Some(c) => evaluate(c, self)?.as_bool(c.pos(), "case condition")?,
                        };
                        if take {
                            self.run_items(&b.body, depth)?;
                            break;
                        }
                    }
                }
                SuccessorItem::Group(inner) => self.with_saved(|g| g.run_items(inner, depth))?,
            }
        }
        Ok(())
    }

    fn call_rule(&mut self, name: &str, args: &[Expr], depth: u32, pos: Pos) -> Result<(), RuleError> {
        let rule = self.rules.rule(name).ok_or_else(|| RuleError::runtime(pos, format!("unknown rule `{name}`")))?;
        if rule.params.len() != args.len() {
            return Err(RuleError::runtime(pos, format!("rule `{name}` takes {} argument(s), got {}", rule.params.len(), args.len())));
        }
        if depth + 1 > self.max_depth {
            return Err(RuleError::runtime(pos, format!("rule nesting deeper than {}", self.max_depth)));
        }
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(evaluate(a, self)?);
        }
        self.with_saved(|g| {
            for (p, v) in rule.params.iter().zip(values) {
                g.vars.insert(p.clone(), v);
            }
            g.run_items(&rule.successor, depth + 1)
        })
    }

    fn number(&mut self, e: &Expr, what: &str) -> Result<f64, RuleError> {
        evaluate(e, self)?.as_number(e.pos(), what)
    }

    fn op(&mut self, name: &str, args: &'w [Expr], selectors: Option<&'w SelectorBlock>, depth: u32, pos: Pos) -> Result<(), RuleError> {
        let arity = |lo: usize, hi: usize| {
            if args.len() < lo || args.len() > hi {
                Err(RuleError::runtime(pos, format!("`{name}` got {} argument(s)", args.len())))
            } else {
                Ok(())
            }
        };
        if (name == "members") != selectors.is_some() {
            return Err(RuleError::runtime(
                pos,
                if name == "members" {
                    "`members` needs a selector block".to_string()
                } else {
                    format!("`{name}` does not take a selector block")
                },
            ));
        }
        match name {
            "members" => {
                arity(0, 0)?;
                self.members(selectors.unwrap(), depth)
            }
            "set" => {
                arity(2, 2)?;
                let var = symbol(&args[0], "variable")?.to_string();
                let v = evaluate(&args[1], self)?;
                self.vars.insert(var, v);
                Ok(())
            }
            "stayInside" | "goToBuilding" => {
                arity(3, 3)?;
                let t0 = self.number(&args[0], "start time")?;
                let t1 = self.number(&args[1], "end time")?;
                let b = evaluate(&args[2], self)?.as_entity(EntityKind::Building, args[2].pos(), "building")?;
                let Some(building) = b.filter(|b| (*b as usize) < self.world.city.buildings.len()) else {
                    return Err(RuleError::runtime(args[2].pos(), format!("`{name}` needs a valid building")));
                };
                if name == "goToBuilding" && t0 == t1 {
                    return Ok(());
                }
                let kind = if name == "stayInside" { TaskKind::StayInside { building } } else { TaskKind::GoToBuilding { building } };
                self.insert(t0, t1, kind, pos)
            }
            "floatingSlot" => {
                arity(2, 2)?;
                let t0 = self.number(&args[0], "start time")?;
                let t1 = self.number(&args[1], "end time")?;
                self.insert(t0, t1, TaskKind::FloatingSlot, pos)
            }
            "delayedRule" => {
                arity(3, 3)?;
                let t0 = self.number(&args[0], "start time")?;
                let t1 = self.number(&args[1], "end time")?;
                let rule = self.delayed_target(&args[2])?;
                let vars = self.snapshot();
                self.insert(t0, t1, TaskKind::DelayedRule { rule, vars }, pos)
            }
            "floatingTask" => {
                arity(2, 3)?;
                let max_duration = self.number(&args[0], "duration")?;
                if !(max_duration > 0.0) {
                    return Err(RuleError::runtime(pos, "floating task duration must be positive"));
                }
                let rule = self.delayed_target(&args[1])?;
                let priority = match args.get(2) {
                    Some(e) => self.number(e, "priority")?,
                    None => 0.0,
                };
                let Some(p) = self.focus else {
                    self.warn(pos, "floatingTask without a focused person ignored");
                    return Ok(());
                };
                let vars = self.snapshot();
                self.agendas.get_mut(&p).unwrap().pool.push(FloatingTaskEntry { rule, max_duration, priority, vars });
                Ok(())
            }
            "accompany" => {
                arity(2, 2)?;
                let time = self.number(&args[0], "time")?;
                self.accompany(time, &args[1], pos)
            }
            op if DYNAMIC_OPS.contains(&op) => Err(RuleError::runtime(pos, format!("`{op}` is only available inside delayed rules"))),
            _ => Err(RuleError::runtime(pos, format!("unknown operation `{name}`"))),
        }
    }

    fn delayed_target(&self, e: &Expr) -> Result<String, RuleError> {
        let name = symbol(e, "rule")?;
        let rule = self.rules.rule(name).ok_or_else(|| RuleError::runtime(e.pos(), format!("unknown rule `{name}`")))?;
        if !rule.params.is_empty() {
            return Err(RuleError::runtime(e.pos(), format!("delayed rule `{name}` cannot take parameters")));
        }
        Ok(name.to_string())
    }

    fn insert(&mut self, t0: f64, t1: f64, kind: TaskKind, pos: Pos) -> Result<(), RuleError> {
        if !(t0 < t1) {
            return Err(RuleError::runtime(pos, format!("`{}` has an empty time interval", kind.name())));
        }
        let Some(p) = self.focus else {
            self.warn(pos, format!("{} without a focused person ignored", kind.name()));
            return Ok(());
        };
        let (a, b) = (t0.max(0.0), t1.min(DAY));
        if a >= b {
            self.warn(pos, format!("{} outside the day ignored", kind.name()));
            return Ok(());
        }
        if (a, b) != (t0, t1) {
            self.warn(pos, format!("{} clipped to the day", kind.name()));
        }
        self.agendas.get_mut(&p).unwrap().insert(a, b, kind, None);
        Ok(())
    }

    fn members(&mut self, block: &'w SelectorBlock, depth: u32) -> Result<(), RuleError> {
        // chooseMember selectors are drawn once for the whole block
        let mut cached: Vec<Option<Value>> = Vec::with_capacity(block.entries.len());
        for e in &block.entries {
            cached.push(match &e.key.kind {
                ExprKind::Call { name, .. } if name == "chooseMember" => Some(evaluate(&e.key, self)?),
                _ => None,
            });
        }
        for m in self.household.members.clone() {
            let mut chosen = None;
            for (i, e) in block.entries.iter().enumerate() {
                let v = match &cached[i] {
                    Some(v) => v.clone(),
                    None => self.with_saved(|g| {
                        g.focus = Some(m);
                        evaluate(&e.key, g)
                    })?,
                };
                let hit = match v {
                    Value::Bool(b) => b,
                    Value::Invalid => false,
                    Value::Entity(r) if r.kind == EntityKind::Person => r.id == m,
                    v => {
                        return Err(RuleError::mismatch(
                            e.key.pos(),
                            format!("members selector must be a bool or person, got {}", v.type_name()),
                        ))
                    }
                };
                if hit {
                    chosen = Some(i);
                    break;
                }
            }
            if let Some(i) = chosen {
                self.with_saved(|g| {
                    g.focus = Some(m);
                    g.run_items(&block.entries[i].successor, depth)
                })?;
            }
        }
        Ok(())
    }

    fn accompany(&mut self, time: f64, cond: &'w Expr, pos: Pos) -> Result<(), RuleError> {
        let Some(leader) = self.focus else {
            self.warn(pos, "accompany without a focused person ignored");
            return Ok(());
        };
        let mut target: Option<(f64, f64, u32)> = None;
        let mut members = Vec::new();
        for m in self.household.members.clone() {
            if m == leader {
                continue;
            }
            let matches = self.with_saved(|g| {
                g.focus = Some(m);
                evaluate(cond, g)
            })?;
            if !matches.as_bool(cond.pos(), "accompany condition")? {
                continue;
            }
            let Some(task) = self.agendas[&m].task_at(time) else {
                continue;
            };
            let Some(b) = task.kind.building() else {
                continue;
            };
            let entry = (task.t0, task.t1, b);
            match target {
                None => {
                    target = Some(entry);
                    members.push(m);
                }
                Some(t) if t == entry => members.push(m),
                Some(_) => self.warn(pos, format!("person {m} travels separately and is not accompanied")),
            }
        }
        let Some((t0, t1, building)) = target else {
            self.warn(pos, "accompany found nobody to accompany");
            return Ok(());
        };
        let group = GroupId { household: self.household.id, index: self.groups };
        self.groups += 1;
        for &m in &members {
            let agenda = self.agendas.get_mut(&m).unwrap();
            let i = agenda.index_at(time).unwrap();
            agenda.tasks[i].group = Some(group);
        }
        let kind = TaskKind::GroupAccompany { leader, members, building };
        self.agendas.get_mut(&leader).unwrap().insert(t0, t1, kind, Some(group));
        Ok(())
    }
}
