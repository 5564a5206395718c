//! Shape-grammar interpreter for one lot.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::city::{Entrance, Footprint, LotRecords};
use super::layout::{Layout, LayoutConfig, Lot};
use super::scope::{split_parts, Scope, SplitSize};
use crate::geom::{Vec2, Vec3};
use crate::rng::StreamRng;
use crate::rulelang::ast::{Expr, ExprKind, SelectorBlock, SuccessorItem, UnOp};
use crate::rulelang::eval::uniform;
use crate::rulelang::{evaluate, Arg, Environment, Pos, RuleError, RuleSet, Signature, Value};

/// Terminal geometry produced by a lot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub scope: Scope,
    pub color: [f64; 3],
    /// Index into the lot's objects when the leaf belongs to a tagged object.
    pub object: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LotOutput {
    pub records: LotRecords,
    pub leaves: Vec<Leaf>,
    pub diagnostics: Vec<String>,
    /// True when the lot was abandoned because of an error.
    pub aborted: bool,
}

#[derive(Debug, Clone)]
struct Shape {
    scope: Scope,
    color: [f64; 3],
    object: Option<usize>,
    consumed: bool,
}

type Vars = HashMap<String, Value>;

struct Interp<'a> {
    rules: &'a RuleSet,
    lot: &'a Lot,
    cfg: &'a LayoutConfig,
    lot_x: Vec3,
    lot_z: Vec3,
    rng: StreamRng,
    attrs: Vars,
    out: LotOutput,
    warned: BTreeSet<String>,
}

struct Env<'e> {
    vars: &'e Vars,
    attrs: &'e Vars,
    lot: &'e Lot,
    scope: &'e Scope,
    rng: &'e mut StreamRng,
}

impl Environment for Env<'_> {
    fn variable(&self, name: &str) -> Option<Value> {
        if let Some(v) = self.vars.get(name).or_else(|| self.attrs.get(name)) {
            return Some(v.clone());
        }
        let n = |v: f64| Some(Value::Number(v));
        match name {
            "lot.id" => n(self.lot.id as f64),
            "lot.u" => n(self.lot.uv[0]),
            "lot.v" => n(self.lot.uv[1]),
            "lot.bx" => n(self.lot.block[0] as f64),
            "lot.by" => n(self.lot.block[1] as f64),
            "lot.i" => n(self.lot.cell[0] as f64),
            "lot.j" => n(self.lot.cell[1] as f64),
            "scope.sx" => n(self.scope.size[0]),
            "scope.sy" => n(self.scope.size[1]),
            "scope.sz" => n(self.scope.size[2]),
            _ => None,
        }
    }

    fn signature(&self, name: &str) -> Option<Signature> {
        match name {
            "rand" => Some(Signature::strict(2, 2)),
            _ => None,
        }
    }

    fn call(&mut self, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
        debug_assert_eq!(name, "rand");
        let lo = args[0].value().as_number(pos, "rand bound")?;
        let hi = args[1].value().as_number(pos, "rand bound")?;
        Ok(Value::Number(uniform(self.rng, lo, hi)))
    }
}

/// Runs the start rule of `rules` on `lot`.
pub fn apply_cga(rules: &RuleSet, lot: &Lot, _layout: &Layout, cfg: &LayoutConfig, rng: StreamRng) -> LotOutput {
    let frame = lot.frame();
    let scope = Scope { origin: frame.origin, axes: [frame.x, Vec3::Y, frame.z], size: [frame.width, 0.0, frame.depth] };
    let mut it = Interp {
        rules,
        lot,
        cfg,
        lot_x: frame.x,
        lot_z: frame.z,
        rng,
        attrs: Vars::new(),
        out: LotOutput::default(),
        warned: BTreeSet::new(),
    };
    let result = it.init_attributes().and_then(|_| {
        let start = rules.start_rule.clone();
        it.apply_rule(&start, Vec::new(), Shape { scope, color: [1.0; 3], object: None, consumed: false }, 0, Pos::default())
    });
    if let Err(e) = result {
        it.out.diagnostics.push(format!("lot {}: {e}; lot left empty", lot.id));
        it.out.aborted = true;
        it.out.records = LotRecords::default();
        it.out.leaves.clear();
    }
    it.out
}

impl Interp<'_> {
    fn init_attributes(&mut self) -> Result<(), RuleError> {
        let scope = Scope { origin: Vec3::default(), axes: [Vec3::X, Vec3::Y, Vec3::Z], size: [0.0; 3] };
        for (name, expr) in &self.rules.attributes {
            let empty = Vars::new();
            let mut env = Env { vars: &empty, attrs: &self.attrs, lot: self.lot, scope: &scope, rng: &mut self.rng };
            let v = evaluate(expr, &mut env)?;
            self.attrs.insert(name.clone(), v);
        }
        Ok(())
    }

    fn eval(&mut self, expr: &Expr, vars: &Vars, scope: &Scope) -> Result<Value, RuleError> {
        let mut env = Env { vars, attrs: &self.attrs, lot: self.lot, scope, rng: &mut self.rng };
        evaluate(expr, &mut env)
    }

    fn warn_once(&mut self, msg: String) {
        if self.warned.insert(msg.clone()) {
            self.out.diagnostics.push(format!("lot {}: {msg}", self.lot.id));
        }
    }

    fn leaf(&mut self, shape: &Shape) {
        self.out.leaves.push(Leaf { scope: shape.scope, color: shape.color, object: shape.object });
    }

    fn apply_rule(&mut self, name: &str, args: Vec<Value>, mut shape: Shape, depth: u32, pos: Pos) -> Result<(), RuleError> {
        if depth > self.cfg.max_depth {
            return Err(RuleError::runtime(pos, format!("rule nesting deeper than {}", self.cfg.max_depth)));
        }
        let Some(rule) = self.rules.rule(name) else {
            self.warn_once(format!("undefined rule `{name}` kept as plain geometry"));
            self.leaf(&shape);
            return Ok(());
        };
        if rule.params.len() != args.len() {
            return Err(RuleError::runtime(pos, format!("rule `{name}` takes {} argument(s), got {}", rule.params.len(), args.len())));
        }
        let vars: Vars = rule.params.iter().cloned().zip(args).collect();
        if let Some(tag) = rule.object_tag() {
            self.out.records.objects.push((tag.to_string(), shape.scope));
            shape.object = Some(self.out.records.objects.len() - 1);
        }
        let object = shape.object;
        self.run(&rule.successor, &mut shape, &vars, depth)?;
        if !shape.consumed {
            self.leaf(&shape);
        }
        if let Some(i) = object {
            // the object's bounds grow to what its rule produced
            if let Some(last) = self.out.leaves.iter().rev().find(|l| l.object == Some(i)) {
                self.out.records.objects[i].1 = last.scope;
            }
        }
        Ok(())
    }

    fn run(&mut self, items: &[SuccessorItem], shape: &mut Shape, vars: &Vars, depth: u32) -> Result<(), RuleError> {
        for item in items {
            if shape.consumed {
                self.warn_once(format!(
                    "operations after a terminal operation are ignored{}",
                    item.name().map(|n| format!(" (`{n}`)")).unwrap_or_default()
                ));
                break;
            }
            match item {
                SuccessorItem::RuleCall { name, args, span } => {
                    let mut values = Vec::with_capacity(args.len());
                    for a in args {
                        values.push(self.eval(a, vars, &shape.scope)?);
                    }
                    let child = Shape { consumed: false, ..shape.clone() };
                    self.apply_rule(name, values, child, depth + 1, span.0)?;
                    shape.consumed = true;
                }
                SuccessorItem::OpCall { name, args, selectors, span } => {
                    self.op(name, args, selectors.as_ref(), shape, vars, depth, span.0)?;
                }
                SuccessorItem::Cases(branches) => {
                    for b in branches {
                        let take = match &b.condition {
                            None => true,
                            Some(c) => self.eval(c, vars, &shape.scope)?.as_bool(c.pos(), "case condition")?,
                        };
                        if take {
                            self.run(&b.body, shape, vars, depth)?;
                            break;
                        }
                    }
                }
                SuccessorItem::Group(inner) => {
                    let mut copy = Shape { consumed: false, ..shape.clone() };
                    self.run(inner, &mut copy, vars, depth)?;
                }
            }
        }
        Ok(())
    }

    fn number(&mut self, e: &Expr, vars: &Vars, scope: &Scope, what: &str) -> Result<f64, RuleError> {
        self.eval(e, vars, scope)?.as_number(e.pos(), what)
    }

    fn text(&mut self, e: &Expr, vars: &Vars, scope: &Scope, what: &str) -> Result<String, RuleError> {
        Ok(self.eval(e, vars, scope)?.as_text(e.pos(), what)?.to_string())
    }

    #[allow(clippy::too_many_arguments)]
    fn op(
        &mut self,
        name: &str,
        args: &[Expr],
        selectors: Option<&SelectorBlock>,
        shape: &mut Shape,
        vars: &Vars,
        depth: u32,
        pos: Pos,
    ) -> Result<(), RuleError> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(RuleError::runtime(pos, format!("`{name}` takes {n} argument(s), got {}", args.len())))
            }
        };
        let needs_selectors = matches!(name, "split" | "comp");
        if needs_selectors != selectors.is_some() {
            return Err(RuleError::runtime(
                pos,
                if needs_selectors {
                    format!("`{name}` needs a selector block")
                } else {
                    format!("`{name}` does not take a selector block")
                },
            ));
        }
        match name {
            "NIL" => {
                arity(0)?;
                shape.consumed = true;
            }
            "color" => {
                arity(3)?;
                for (c, arg) in shape.color.iter_mut().zip(args.iter()) {
                    *c = self.number(arg, vars, &shape.scope, "color component")?.clamp(0.0, 1.0);
                }
            }
            "t" => {
                arity(3)?;
                let mut d = [0.0; 3];
                for i in 0..3 {
                    d[i] = match &args[i].kind {
                        ExprKind::Unary { op: UnOp::Relative, expr } => {
                            self.number(expr, vars, &shape.scope, "translation")? * shape.scope.size[i]
                        }
                        _ => self.number(&args[i], vars, &shape.scope, "translation")?,
                    };
                }
                shape.scope = shape.scope.translated(d);
            }
            "extrude" => {
                arity(1)?;
                let h = self.number(&args[0], vars, &shape.scope, "extrusion height")?;
                let Some(axis) = shape.scope.flat_axis() else {
                    return Err(RuleError::runtime(pos, "extrude needs a flat scope"));
                };
                let s = &shape.scope;
                if axis == 1 && h > 0.0 && s.origin.y.abs() < 1e-9 && s.axes[1] == Vec3::Y && shape.object.is_none() {
                    self.out.records.ground_extrusions.push((s.size[0] * s.size[2], h));
                }
                shape.scope = shape.scope.extruded(axis, h);
            }
            "entrance" => {
                arity(1)?;
                let kind = self.text(&args[0], vars, &shape.scope, "entrance type")?;
                if kind.is_empty() {
                    return Err(RuleError::runtime(pos, "entrance type must not be empty"));
                }
                let position = shape.scope.origin.ground();
                self.out.records.entrances.push(Entrance { kind, position });
            }
            "zone" => {
                arity(1)?;
                let kind = self.text(&args[0], vars, &shape.scope, "zone type")?;
                if kind.is_empty() {
                    return Err(RuleError::runtime(pos, "zone type must not be empty"));
                }
                let height = if shape.scope.size[1] > 0.0 { shape.scope.size[1] } else { self.cfg.zone_height };
                self.out.records.zones.push((kind, footprint(&shape.scope), height));
            }
            "split" => {
                arity(1)?;
                let axis = match args[0].as_symbol() {
                    Some("x") => 0,
                    Some("y") => 1,
                    Some("z") => 2,
                    _ => return Err(RuleError::runtime(pos, "split axis must be x, y or z")),
                };
                let block = selectors.unwrap();
                let extent = shape.scope.size[axis];
                let mut sizes = Vec::with_capacity(block.entries.len());
                for e in &block.entries {
                    let size = match &e.key.kind {
                        ExprKind::Unary { op: UnOp::Floating, expr } => {
                            SplitSize::Floating(self.number(expr, vars, &shape.scope, "split size")?)
                        }
                        ExprKind::Unary { op: UnOp::Relative, expr } => {
                            SplitSize::Absolute(self.number(expr, vars, &shape.scope, "split size")? * extent)
                        }
                        _ => SplitSize::Absolute(self.number(&e.key, vars, &shape.scope, "split size")?),
                    };
                    let (SplitSize::Absolute(v) | SplitSize::Floating(v)) = size;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(RuleError::runtime(e.key.pos(), "split sizes must be non-negative"));
                    }
                    sizes.push(size);
                }
                let (parts, scaled) = split_parts(extent, &sizes, block.repeat);
                if scaled {
                    self.warn_once(format!("split sizes at {pos} rescaled to fit a {extent:.3} m extent"));
                }
                for part in parts {
                    if part.len <= 1e-9 {
                        continue;
                    }
                    let mut child = Shape { scope: shape.scope.slice(axis, part.start, part.len), consumed: false, ..shape.clone() };
                    self.run(&block.entries[part.entry].successor, &mut child, vars, depth + 1)?;
                    if !child.consumed {
                        self.leaf(&child);
                    }
                }
                shape.consumed = true;
            }
            "comp" => {
                arity(1)?;
                if args[0].as_symbol() != Some("f") {
                    return Err(RuleError::runtime(pos, "only comp(f) is supported"));
                }
                let block = selectors.unwrap();
                let mut keys = Vec::with_capacity(block.entries.len());
                for e in &block.entries {
                    match e.key.as_symbol() {
                        Some(k) if FACE_KEYS.contains(&k) => keys.push(k),
                        _ => return Err(RuleError::runtime(e.key.pos(), "unknown face selector")),
                    }
                }
                let faces: Vec<Scope> = match shape.scope.flat_axis() {
                    Some(_) => vec![shape.scope],
                    None => shape.scope.faces().into_iter().map(|(_, f)| f).collect(),
                };
                for face in faces {
                    let class = classify(face.axes[2], self.lot_x, self.lot_z);
                    if let Some(i) = keys.iter().position(|k| face_matches(k, class)) {
                        let mut child = Shape { scope: face, consumed: false, ..shape.clone() };
                        self.run(&block.entries[i].successor, &mut child, vars, depth + 1)?;
                        if !child.consumed {
                            self.leaf(&child);
                        }
                    }
                }
                shape.consumed = true;
            }
            _ => return Err(RuleError::runtime(pos, format!("unsupported operation `{name}`"))),
        }
        Ok(())
    }
}

const FACE_KEYS: [&str; 10] = ["front", "back", "left", "right", "side", "top", "bottom", "vertical", "horizontal", "all"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceClass {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
}

/// Classifies a face by its outward normal relative to the lot: front faces
/// look toward the lot's street.
pub fn classify(normal: Vec3, lot_x: Vec3, lot_z: Vec3) -> FaceClass {
    if normal.y > 0.5 {
        return FaceClass::Top;
    }
    if normal.y < -0.5 {
        return FaceClass::Bottom;
    }
    let toward_street = -normal.dot(lot_z);
    if toward_street > std::f64::consts::FRAC_1_SQRT_2 {
        FaceClass::Front
    } else if toward_street < -std::f64::consts::FRAC_1_SQRT_2 {
        FaceClass::Back
    } else if normal.dot(lot_x) < 0.0 {
        FaceClass::Left
    } else {
        FaceClass::Right
    }
}

fn face_matches(key: &str, class: FaceClass) -> bool {
    use FaceClass::*;
    match key {
        "front" => class == Front,
        "back" => class == Back,
        "left" => class == Left,
        "right" => class == Right,
        "side" => matches!(class, Left | Right),
        "top" => class == Top,
        "bottom" => class == Bottom,
        "vertical" => matches!(class, Front | Back | Left | Right),
        "horizontal" => matches!(class, Top | Bottom),
        _ => key == "all",
    }
}

/// Ground footprint of a scope: exact for upright scopes, otherwise the
/// axis-aligned bounds of its corners.
fn footprint(s: &Scope) -> Footprint {
    if s.axes[1] == Vec3::Y {
        return Footprint { origin: s.origin.ground(), u: s.axes[0].ground(), v: s.axes[2].ground(), size: [s.size[0], s.size[2]] };
    }
    let pts: Vec<Vec2> = s.corners().iter().map(|c| c.ground()).collect();
    let min = pts.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |m, p| Vec2::new(m.x.min(p.x), m.y.min(p.y)));
    let max = pts.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, p| Vec2::new(m.x.max(p.x), m.y.max(p.y)));
    Footprint { origin: min, u: Vec2::new(1.0, 0.0), v: Vec2::new(0.0, 1.0), size: [max.x - min.x, max.y - min.y] }
}
