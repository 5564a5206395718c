//! Pausable execution of delayed rules.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::occupancy::Occupancy;
use crate::agendagen::builtins::{self, AgendaScope};
use crate::agendagen::World;
use crate::geom::Vec2;
use crate::rng::StreamRng;
use crate::rulelang::ast::{Expr, SuccessorItem};
use crate::rulelang::{evaluate, Arg, EntityRef, Environment, Pos, RuleError, RuleSet, Signature, Value};

/// What a paused context waits for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Block {
    Until(f64),
    Arrival,
    SlotEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Rule,
    Cases,
    Group,
}

#[derive(Debug, Clone)]
struct Frame<'w> {
    items: &'w [SuccessorItem],
    next: usize,
    vars: HashMap<String, Value>,
    kind: FrameKind,
}

/// A rule stack with one resume point per frame.
#[derive(Debug, Clone)]
pub(crate) struct ExecContext<'w> {
    frames: Vec<Frame<'w>>,
    pub block: Option<Block>,
    pub slot_end: f64,
    pub rule: String,
}

/// Request from a rule to the movement layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Request {
    GoToZone,
    GoToObject(u32),
    Interact { object: u32 },
}

/// Outcome of executing items until something stops the context.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Flow {
    /// Paused on a blocking condition.
    Blocked,
    /// A movement or interaction op needs the caller; the context resumes afterwards.
    Request(Request, Option<String>),
    /// Stack exhausted.
    Done,
}

impl<'w> ExecContext<'w> {
    pub fn start(rules: &'w RuleSet, rule: &str, vars: &BTreeMap<String, Value>, slot_end: f64) -> Option<Self> {
        let r = rules.rule(rule)?;
        let vars = vars.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        Some(ExecContext {
            frames: vec![Frame { items: &r.successor, next: 0, vars, kind: FrameKind::Rule }],
            block: None,
            slot_end,
            rule: rule.to_string(),
        })
    }

    fn pop(&mut self) {
        let f = self.frames.pop().unwrap();
        if f.kind == FrameKind::Cases {
            if let Some(parent) = self.frames.last_mut() {
                parent.vars = f.vars;
            }
        }
    }

    fn depth(&self) -> usize {
        self.frames.iter().filter(|f| f.kind == FrameKind::Rule).count()
    }

    /// Runs items until a block, a request for the caller, or the end.
    pub fn run(&mut self, env: &mut SimEnv<'_, 'w>, rules: &'w RuleSet, now: f64, max_depth: u32) -> Result<Flow, RuleError> {
        loop {
            let Some(top) = self.frames.last_mut() else {
                return Ok(Flow::Done);
            };
            if top.next >= top.items.len() {
                self.pop();
                continue;
            }
            let item = &top.items[top.next];
            top.next += 1;
            env.vars = top.vars.clone();
            match item {
                SuccessorItem::RuleCall { name, args, span } => {
                    let rule = rules.rule(name).ok_or_else(|| RuleError::runtime(span.0, format!("unknown rule `{name}`")))?;
                    if rule.params.len() != args.len() {
                        return Err(RuleError::runtime(span.0, format!("rule `{name}` takes {} argument(s)", rule.params.len())));
                    }
                    if self.depth() + 1 > max_depth as usize {
                        return Err(RuleError::runtime(span.0, format!("rule nesting deeper than {max_depth}")));
                    }
                    let mut vars = env.vars.clone();
                    for (p, a) in rule.params.iter().zip(args) {
                        let v = evaluate(a, env)?;
                        vars.insert(p.clone(), v);
                    }
                    self.frames.push(Frame { items: &rule.successor, next: 0, vars, kind: FrameKind::Rule });
                }
                SuccessorItem::Cases(branches) => {
                    for b in branches {
                        let take = match &b.condition {
                            None => true,
                            Some(c) => evaluate(c, env)?.as_bool(c.pos(), "case condition")?,
                        };
                        if take {
                            let vars = env.vars.clone();
                            self.frames.push(Frame { items: &b.body, next: 0, vars, kind: FrameKind::Cases });
                            break;
                        }
                    }
                }
                SuccessorItem::Group(inner) => {
                    let vars = env.vars.clone();
                    self.frames.push(Frame { items: inner, next: 0, vars, kind: FrameKind::Group });
                }
                SuccessorItem::OpCall { name, args, span, .. } => {
                    if let Some(flow) = self.op(env, name, args, span.0, now)? {
                        return Ok(flow);
                    }
                }
            }
        }
    }

    fn op(&mut self, env: &mut SimEnv<'_, 'w>, name: &str, args: &[Expr], pos: Pos, now: f64) -> Result<Option<Flow>, RuleError> {
        let arity = |lo: usize, hi: usize| {
            if args.len() < lo || args.len() > hi {
                Err(RuleError::runtime(pos, format!("`{name}` got {} argument(s)", args.len())))
            } else {
                Ok(())
            }
        };
        match name {
            "NIL" => Ok(None),
            "set" => {
                arity(2, 2)?;
                let var = args[0].as_symbol().ok_or_else(|| RuleError::runtime(args[0].pos(), "variable must be a name"))?.to_string();
                let v = evaluate(&args[1], env)?;
                self.frames.last_mut().unwrap().vars.insert(var, v);
                Ok(None)
            }
            "wait" => {
                arity(1, 1)?;
                let s = evaluate(&args[0], env)?.as_number(args[0].pos(), "wait duration")?;
                if s <= 0.0 {
                    return Ok(None);
                }
                self.block = Some(Block::Until(now + s.max(0.0)));
                Ok(Some(Flow::Blocked))
            }
            "waitUntilNextTask" => {
                arity(0, 0)?;
                self.block = Some(Block::SlotEnd);
                Ok(Some(Flow::Blocked))
            }
            "goToZone" => {
                arity(1, 1)?;
                let kind = evaluate(&args[0], env)?.as_text(args[0].pos(), "zone type")?.to_string();
                Ok(Some(Flow::Request(Request::GoToZone, Some(kind))))
            }
            "goToObject" => {
                arity(1, 1)?;
                let v = evaluate(&args[0], env)?;
                match v.as_entity(crate::rulelang::EntityKind::Object, args[0].pos(), "object")? {
                    Some(o) if (o as usize) < env.world.city.objects.len() => Ok(Some(Flow::Request(Request::GoToObject(o), None))),
                    _ => Err(RuleError::runtime(pos, "goToObject needs a valid object")),
                }
            }
            "interact" => {
                arity(1, 2)?;
                let v = evaluate(&args[0], env)?;
                let object = match v.as_entity(crate::rulelang::EntityKind::Object, args[0].pos(), "object")? {
                    Some(o) if (o as usize) < env.world.city.objects.len() => o,
                    _ => return Err(RuleError::runtime(pos, "interact needs a valid object")),
                };
                let verb = match args.get(1) {
                    Some(e) => Some(evaluate(e, env)?.as_text(e.pos(), "verb")?.to_string()),
                    None => None,
                };
                Ok(Some(Flow::Request(Request::Interact { object }, verb)))
            }
            "stayInside" | "goToBuilding" | "floatingSlot" | "delayedRule" | "floatingTask" | "accompany" | "members" => {
                log::debug!("`{name}` ignored while rule `{}` runs", self.rule);
                Ok(None)
            }
            _ => Err(RuleError::runtime(pos, format!("unknown operation `{name}`"))),
        }
    }
}

/// Evaluation environment of a running delayed rule.
pub(crate) struct SimEnv<'a, 'w> {
    pub world: World<'w>,
    pub household: u32,
    pub person: u32,
    pub focus: Option<u32>,
    pub vars: HashMap<String, Value>,
    pub rng: &'a mut StreamRng,
    pub occupancy: &'a mut Occupancy,
    pub origin: Vec2,
}

impl Environment for SimEnv<'_, '_> {
    fn variable(&self, name: &str) -> Option<Value> {
        self.vars.get(name).cloned().or_else(|| builtins::global(self, name))
    }

    fn signature(&self, name: &str) -> Option<Signature> {
        builtins::signature(name)
    }

    fn call(&mut self, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
        builtins::call(self, name, args, pos)
    }
}

impl<'w> AgendaScope<'w> for SimEnv<'_, 'w> {
    fn world(&self) -> World<'w> {
        self.world
    }

    fn household(&self) -> u32 {
        self.household
    }

    fn focus(&self) -> Option<u32> {
        self.focus
    }

    fn set_focus(&mut self, person: Option<u32>) {
        self.focus = person;
    }

    fn rng(&mut self) -> &mut StreamRng {
        self.rng
    }

    /// Searches around the person and soft-reserves the pick.
    fn find_object(&mut self, kind: &str, radius: Option<f64>) -> Value {
        let found: Vec<u32> = self
            .world
            .city
            .objects
            .iter()
            .filter(|o| o.kind == kind && radius.is_none_or(|r| o.position.distance(self.origin) <= r))
            .filter(|o| self.occupancy.is_free(o.id))
            .map(|o| o.id)
            .collect();
        if found.is_empty() {
            return Value::Invalid;
        }
        let pick = found[self.rng.gen_range(0..found.len())];
        self.occupancy.reserve(pick, self.person);
        Value::Entity(EntityRef::object(pick))
    }
}
