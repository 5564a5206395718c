//! Block and lot layout on an orthogonal street grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CityError;
use crate::geom::{Rect, Vec2, Vec3};

fn default_apartments() -> u32 {
    2
}
fn default_floor_height() -> f64 {
    3.0
}
fn default_zone_height() -> f64 {
    3.0
}
fn default_capacity() -> u32 {
    1
}
fn default_depth() -> u32 {
    64
}

/// Layout and generation parameters, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub blocks_x: u32,
    pub blocks_y: u32,
    pub lots_per_block_x: u32,
    pub lots_per_block_y: u32,
    /// Lot extent along world x, meters.
    pub lot_width: f64,
    /// Lot extent along world z, meters.
    pub lot_depth: f64,
    pub street_width: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_apartments")]
    pub apartments_per_floor: u32,
    #[serde(default = "default_floor_height")]
    pub floor_height: f64,
    /// Height of the prism made from a flat zone scope.
    #[serde(default = "default_zone_height")]
    pub zone_height: f64,
    /// Occupancy capacity given to every tagged object.
    #[serde(default = "default_capacity")]
    pub object_capacity: u32,
    #[serde(default = "default_depth")]
    pub max_depth: u32,
}

impl LayoutConfig {
    pub fn new(blocks: (u32, u32), lots_per_block: (u32, u32), lot_size: (f64, f64), street_width: f64) -> Self {
        LayoutConfig {
            blocks_x: blocks.0,
            blocks_y: blocks.1,
            lots_per_block_x: lots_per_block.0,
            lots_per_block_y: lots_per_block.1,
            lot_width: lot_size.0,
            lot_depth: lot_size.1,
            street_width,
            seed: 0,
            apartments_per_floor: default_apartments(),
            floor_height: default_floor_height(),
            zone_height: default_zone_height(),
            object_capacity: default_capacity(),
            max_depth: default_depth(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CityError> {
        let cfg: LayoutConfig = toml::from_str(text).map_err(|e| CityError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CityError> {
        let text = std::fs::read_to_string(path).map_err(|e| CityError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CityError> {
        let counts = [self.blocks_x, self.blocks_y, self.lots_per_block_x, self.lots_per_block_y];
        if counts.contains(&0) {
            return Err(CityError::Config("block and lot counts must be at least 1".into()));
        }
        let lengths = [self.lot_width, self.lot_depth, self.street_width, self.floor_height, self.zone_height];
        if lengths.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CityError::Config("lengths must be positive".into()));
        }
        if self.lots_per_block_x.min(self.lots_per_block_y) > 2 {
            return Err(CityError::Config("with more than two lots per block in both directions, inner lots have no street access".into()));
        }
        if self.object_capacity == 0 {
            return Err(CityError::Config("object capacity must be at least 1".into()));
        }
        Ok(())
    }

    fn block_size(&self) -> Vec2 {
        Vec2::new(self.lots_per_block_x as f64 * self.lot_width, self.lots_per_block_y as f64 * self.lot_depth)
    }
}

/// Side of a lot. World z grows to the south.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    North,
    South,
    West,
    East,
}

impl Side {
    /// Outward normal on the ground.
    pub fn outward(self) -> Vec2 {
        match self {
            Side::North => Vec2::new(0.0, -1.0),
            Side::South => Vec2::new(0.0, 1.0),
            Side::West => Vec2::new(-1.0, 0.0),
            Side::East => Vec2::new(1.0, 0.0),
        }
    }

    pub fn edge(self, r: &Rect) -> (Vec2, Vec2) {
        match self {
            Side::North => (r.min, Vec2::new(r.max.x, r.min.y)),
            Side::South => (Vec2::new(r.min.x, r.max.y), r.max),
            Side::West => (r.min, Vec2::new(r.min.x, r.max.y)),
            Side::East => (Vec2::new(r.max.x, r.min.y), r.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lot {
    pub id: u32,
    pub block: [u32; 2],
    pub cell: [u32; 2],
    pub rect: Rect,
    /// Sides that border a street.
    pub street_sides: Vec<Side>,
    /// The street side the lot faces.
    pub front: Side,
    /// Lot center normalized to the city extent, in `[0, 1]`.
    pub uv: [f64; 2],
}

/// Local frame of a lot: `z` points from the front street into the lot.
#[derive(Debug, Clone, Copy)]
pub struct LotFrame {
    pub origin: Vec3,
    pub x: Vec3,
    pub z: Vec3,
    pub width: f64,
    pub depth: f64,
}

impl Lot {
    pub fn frame(&self) -> LotFrame {
        let n = self.front.outward();
        let z = Vec3::new(-n.x, 0.0, -n.y);
        let x = Vec3::Y.cross(z);
        let (width, depth) = match self.front {
            Side::North | Side::South => (self.rect.width(), self.rect.height()),
            Side::West | Side::East => (self.rect.height(), self.rect.width()),
        };
        // the corner with the smallest local coordinates
        let c = self.rect.center();
        let origin = Vec3::new(c.x, 0.0, c.y) - x * (width / 2.0) - z * (depth / 2.0);
        LotFrame { origin, x, z, width, depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub a: Vec2,
    pub b: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub lots: Vec<Lot>,
    /// Street centerlines, each spanning the whole city.
    pub streets: Vec<Street>,
    /// x coordinates of north-south centerlines.
    pub street_x: Vec<f64>,
    /// z coordinates of east-west centerlines.
    pub street_z: Vec<f64>,
    pub extent: Vec2,
}

impl Layout {
    pub fn street_distance(&self, p: Vec2) -> f64 {
        self.streets.iter().map(|s| p.distance(p.project_on_segment(s.a, s.b))).fold(f64::INFINITY, f64::min)
    }
}

pub fn generate_layout(cfg: &LayoutConfig) -> Result<Layout, CityError> {
    cfg.validate()?;
    let s = cfg.street_width;
    let block = cfg.block_size();
    let extent = Vec2::new(cfg.blocks_x as f64 * (block.x + s) + s, cfg.blocks_y as f64 * (block.y + s) + s);
    let street_x: Vec<f64> = (0..=cfg.blocks_x).map(|i| i as f64 * (block.x + s) + s / 2.0).collect();
    let street_z: Vec<f64> = (0..=cfg.blocks_y).map(|j| j as f64 * (block.y + s) + s / 2.0).collect();
    let (z0, z1) = (street_z[0], *street_z.last().unwrap());
    let (x0, x1) = (street_x[0], *street_x.last().unwrap());
    let mut streets = Vec::new();
    for &x in &street_x {
        streets.push(Street { a: Vec2::new(x, z0), b: Vec2::new(x, z1) });
    }
    for &z in &street_z {
        streets.push(Street { a: Vec2::new(x0, z), b: Vec2::new(x1, z) });
    }

    let (nx, ny) = (cfg.lots_per_block_x, cfg.lots_per_block_y);
    let mut lots = Vec::new();
    for by in 0..cfg.blocks_y {
        for bx in 0..cfg.blocks_x {
            let bmin = Vec2::new(bx as f64 * (block.x + s) + s, by as f64 * (block.y + s) + s);
            for j in 0..ny {
                for i in 0..nx {
                    let min = bmin + Vec2::new(i as f64 * cfg.lot_width, j as f64 * cfg.lot_depth);
                    let rect = Rect { min, max: min + Vec2::new(cfg.lot_width, cfg.lot_depth) };
                    let mut sides = Vec::new();
                    if j == 0 {
                        sides.push(Side::North);
                    }
                    if j == ny - 1 {
                        sides.push(Side::South);
                    }
                    if i == 0 {
                        sides.push(Side::West);
                    }
                    if i == nx - 1 {
                        sides.push(Side::East);
                    }
                    let front = choose_front(&sides, cfg.lot_width, cfg.lot_depth);
                    let c = rect.center();
                    lots.push(Lot {
                        id: lots.len() as u32,
                        block: [bx, by],
                        cell: [i, j],
                        rect,
                        street_sides: sides,
                        front,
                        uv: [c.x / extent.x, c.y / extent.y],
                    });
                }
            }
        }
    }
    Ok(Layout { lots, streets, street_x, street_z, extent })
}

/// The longest street edge; among equals north/south before west/east.
fn choose_front(sides: &[Side], width: f64, depth: f64) -> Side {
    let len = |s: Side| match s {
        Side::North | Side::South => width,
        Side::West | Side::East => depth,
    };
    let mut best = sides[0];
    for &s in &sides[1..] {
        if len(s) > len(best) {
            best = s;
        }
    }
    best
}
