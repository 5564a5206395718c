//! The semantic city: buildings with typed entrances, zones and objects.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::layout::{Layout, LayoutConfig, Lot, Street};
use super::scope::Scope;
use super::CityError;
use crate::geom::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entrance {
    pub kind: String,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: u32,
    pub lot_id: u32,
    pub entrances: Vec<Entrance>,
    pub floors: u32,
    pub height: f64,
    pub footprint_area: f64,
    /// Number of households the building can hold.
    pub residential_capacity: u32,
}

impl Building {
    pub fn has_kind(&self, kind: &str) -> bool {
        self.entrances.iter().any(|e| e.kind == kind)
    }

    /// The entrance used for distance queries.
    pub fn primary_entrance(&self) -> Vec2 {
        self.entrances[0].position
    }
}

/// Ground rectangle with arbitrary orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub origin: Vec2,
    pub u: Vec2,
    pub v: Vec2,
    pub size: [f64; 2],
}

impl Footprint {
    pub fn corners(&self) -> [Vec2; 4] {
        let a = self.origin;
        let b = a + self.u * self.size[0];
        let c = b + self.v * self.size[1];
        let d = a + self.v * self.size[1];
        [a, b, c, d]
    }

    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        let d = p - self.origin;
        let (s, t) = (d.dot(self.u), d.dot(self.v));
        s >= -eps && s <= self.size[0] + eps && t >= -eps && t <= self.size[1] + eps
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        let c = self.corners();
        (0..4).map(|i| p.distance(p.project_on_segment(c[i], c[(i + 1) % 4]))).fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec2 {
        self.origin + self.u * (self.size[0] / 2.0) + self.v * (self.size[1] / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: u32,
    pub kind: String,
    pub lot_id: u32,
    pub footprint: Footprint,
    pub height: f64,
    pub entry_points: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityObject {
    pub id: u32,
    pub kind: String,
    pub lot_id: u32,
    /// Zone containing the object, if any.
    pub zone_id: Option<u32>,
    pub position: Vec2,
    pub bounds: Scope,
    pub interactions: Vec<String>,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCity {
    pub layout: LayoutConfig,
    pub seed: u64,
    pub extent: Vec2,
    pub streets: Vec<Street>,
    pub lots: Vec<Lot>,
    pub buildings: Vec<Building>,
    pub zones: Vec<Zone>,
    pub objects: Vec<CityObject>,
}

impl SemanticCity {
    pub fn building(&self, id: u32) -> Option<&Building> {
        self.buildings.get(id as usize)
    }

    pub fn buildings_of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Building> + 'a {
        self.buildings.iter().filter(move |b| b.has_kind(kind))
    }

    pub fn total_capacity(&self) -> u64 {
        self.buildings.iter().map(|b| b.residential_capacity as u64).sum()
    }

    pub fn street_distance(&self, p: Vec2) -> f64 {
        self.streets.iter().map(|s| p.distance(p.project_on_segment(s.a, s.b))).fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants; returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (i, b) in self.buildings.iter().enumerate() {
            if b.id as usize != i {
                problems.push(format!("building ids are not dense at {i}"));
            }
            let Some(lot) = self.lots.get(b.lot_id as usize) else {
                problems.push(format!("building {} refers to missing lot {}", b.id, b.lot_id));
                continue;
            };
            if b.entrances.is_empty() {
                problems.push(format!("building {} has no entrance", b.id));
            }
            for e in &b.entrances {
                if e.kind.is_empty() {
                    problems.push(format!("lot {}: entrance with empty type", lot.id));
                }
                if lot.rect.boundary_distance(e.position) > 1e-6 {
                    problems.push(format!(
                        "lot {}: {} entrance at ({:.3}, {:.3}) is not on the lot boundary",
                        lot.id, e.kind, e.position.x, e.position.y
                    ));
                } else if self.street_distance(e.position) > 1.5 * self.layout.street_width + 1e-6 {
                    problems.push(format!(
                        "lot {}: {} entrance at ({:.3}, {:.3}) is not next to a street",
                        lot.id, e.kind, e.position.x, e.position.y
                    ));
                }
            }
            if (b.residential_capacity > 0) != b.has_kind("house") {
                problems.push(format!("building {}: capacity and house entrance disagree", b.id));
            }
        }
        for (i, z) in self.zones.iter().enumerate() {
            if z.id as usize != i {
                problems.push(format!("zone ids are not dense at {i}"));
            }
            if z.entry_points.is_empty() {
                problems.push(format!("zone {} has no entry point", z.id));
            }
            for p in &z.entry_points {
                if z.footprint.boundary_distance(*p) > 1e-6 {
                    problems.push(format!("zone {}: entry point off its boundary", z.id));
                }
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.id as usize != i {
                problems.push(format!("object ids are not dense at {i}"));
            }
            if o.capacity == 0 {
                problems.push(format!("object {} has zero capacity", o.id));
            }
            let in_lot = self.lots.get(o.lot_id as usize).is_some_and(|l| l.rect.contains(o.position, 1e-6));
            let in_zone = o.zone_id.and_then(|z| self.zones.get(z as usize)).is_some_and(|z| z.footprint.contains(o.position, 1e-6));
            if !in_lot && !in_zone {
                problems.push(format!("object {} lies outside its lot", o.id));
            }
        }
        problems
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("city serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CityError> {
        let city: SemanticCity = serde_json::from_str(text).map_err(|e| CityError::Format(e.to_string()))?;
        let problems = city.validate();
        if !problems.is_empty() {
            return Err(CityError::Invalid(problems));
        }
        Ok(city)
    }
}

/// Per-lot output of the rule interpreter, before ids are assigned.
#[derive(Debug, Clone, Default)]
pub struct LotRecords {
    pub entrances: Vec<Entrance>,
    pub zones: Vec<(String, Footprint, f64)>,
    pub objects: Vec<(String, Scope)>,
    /// `(footprint area, height)` of every extrusion from the ground.
    pub ground_extrusions: Vec<(f64, f64)>,
}

/// Turns per-lot records into a city with dense ids.
pub fn finalize_city(layout: &Layout, cfg: &LayoutConfig, seed: u64, records: Vec<LotRecords>) -> Result<SemanticCity, CityError> {
    let mut city = SemanticCity {
        layout: cfg.clone(),
        seed,
        extent: layout.extent,
        streets: layout.streets.clone(),
        lots: layout.lots.clone(),
        buildings: Vec::new(),
        zones: Vec::new(),
        objects: Vec::new(),
    };
    for (lot, rec) in layout.lots.iter().zip(records) {
        let first_zone = city.zones.len();
        for (kind, footprint, height) in rec.zones {
            let entry_points = zone_entry_points(&footprint, lot, layout);
            city.zones.push(Zone { id: city.zones.len() as u32, kind, lot_id: lot.id, footprint, height, entry_points });
        }
        for (kind, bounds) in rec.objects {
            let position = bounds.ground_center();
            let zone_id = city.zones[first_zone..].iter().find(|z| z.footprint.contains(position, 1e-9)).map(|z| z.id);
            let interactions = vec![if kind == "bench" { "sit" } else { "use" }.to_string()];
            city.objects.push(CityObject {
                id: city.objects.len() as u32,
                kind,
                lot_id: lot.id,
                zone_id,
                position,
                bounds,
                interactions,
                capacity: cfg.object_capacity,
            });
        }
        if !rec.entrances.is_empty() {
            let height = rec.ground_extrusions.iter().map(|e| e.1).fold(0.0, f64::max);
            let floors = ((height / cfg.floor_height + 1e-9).floor() as u32).max(1);
            let is_home = rec.entrances.iter().any(|e| e.kind == "house");
            city.buildings.push(Building {
                id: city.buildings.len() as u32,
                lot_id: lot.id,
                entrances: rec.entrances,
                floors,
                height,
                footprint_area: rec.ground_extrusions.iter().map(|e| e.0).sum(),
                residential_capacity: if is_home { floors * cfg.apartments_per_floor } else { 0 },
            });
        }
    }
    let problems = city.validate();
    if !problems.is_empty() {
        return Err(CityError::Invalid(problems));
    }
    Ok(city)
}

/// Midpoints of zone edges lying on a street side of the lot; otherwise the
/// boundary point closest to a street centerline.
fn zone_entry_points(fp: &Footprint, lot: &Lot, layout: &Layout) -> Vec<Vec2> {
    let c = fp.corners();
    let edges: Vec<(Vec2, Vec2)> = (0..4).map(|i| (c[i], c[(i + 1) % 4])).collect();
    let mut points = Vec::new();
    for &(a, b) in &edges {
        if a.distance(b) < 1e-9 {
            continue;
        }
        let on_street_side = lot.street_sides.iter().any(|s| {
            let (p, q) = s.edge(&lot.rect);
            [a, b].iter().all(|v| v.distance(v.project_on_segment(p, q)) < 1e-6)
        });
        if on_street_side {
            points.push(a.lerp(b, 0.5));
        }
    }
    if points.is_empty() {
        let candidates = edges.iter().map(|(a, b)| a.lerp(*b, 0.5)).chain(c.iter().copied());
        let mut best: Option<(f64, Vec2)> = None;
        for p in candidates {
            let d = layout.street_distance(p);
            if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                best = Some((d, p));
            }
        }
        points.extend(best.map(|b| b.1));
    }
    points
}

/// Uniform grid over object positions for radius queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl SpatialIndex {
    pub fn new(city: &SemanticCity, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for o in &city.objects {
            buckets.entry(Self::key(o.position, cell)).or_default().push(o.id);
        }
        SpatialIndex { cell, buckets }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Ids of objects within `radius` of `p`, in increasing id order.
    pub fn objects_within(&self, city: &SemanticCity, p: Vec2, radius: f64) -> Vec<u32> {
        let lo = Self::key(p - Vec2::new(radius, radius), self.cell);
        let hi = Self::key(p + Vec2::new(radius, radius), self.cell);
        let mut out = Vec::new();
        for gx in lo.0..=hi.0 {
            for gy in lo.1..=hi.1 {
                if let Some(ids) = self.buckets.get(&(gx, gy)) {
                    out.extend(ids.iter().copied().filter(|&id| city.objects[id as usize].position.distance(p) <= radius));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
