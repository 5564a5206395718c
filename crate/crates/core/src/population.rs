//! Households sampled from a pattern distribution and housed in the city.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citygen::SemanticCity;
use crate::rng::{substream, Stream, StreamRng};

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("cannot read patterns: {0}")]
    Io(String),
    #[error("pattern row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("no patterns")]
    Empty,
    #[error("all pattern weights are zero")]
    ZeroWeight,
    #[error("not enough housing: {households} households for {capacity} apartments (short by {})", households - capacity)]
    Capacity { households: u64, capacity: u64 },
    #[error("malformed population file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    AdultMan,
    AdultWoman,
    ElderMan,
    ElderWoman,
    Boy,
    Girl,
}

impl Category {
    pub const ALL: [Category; 6] =
        [Category::AdultMan, Category::AdultWoman, Category::ElderMan, Category::ElderWoman, Category::Boy, Category::Girl];

    pub fn is_woman(self) -> bool {
        matches!(self, Category::AdultWoman | Category::ElderWoman | Category::Girl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdPattern {
    pub id: u32,
    /// Member counts in [`Category::ALL`] order.
    pub counts: [u32; 6],
    pub weight: f64,
}

impl HouseholdPattern {
    pub fn size(&self) -> u32 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Deserialize)]
struct PatternRow {
    adult_men: i64,
    adult_women: i64,
    elder_men: i64,
    elder_women: i64,
    boys: i64,
    girls: i64,
    count: f64,
}

pub fn parse_patterns(reader: impl Read) -> Result<Vec<HouseholdPattern>, PopulationError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in csv.deserialize::<PatternRow>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| PopulationError::Row { row, msg: e.to_string() })?;
        let raw = [r.adult_men, r.adult_women, r.elder_men, r.elder_women, r.boys, r.girls];
        if raw.iter().any(|&c| c < 0) {
            return Err(PopulationError::Row { row, msg: "negative member count".into() });
        }
        if raw.iter().all(|&c| c == 0) {
            return Err(PopulationError::Row { row, msg: "household without members".into() });
        }
        if !(r.count >= 0.0 && r.count.is_finite()) {
            return Err(PopulationError::Row { row, msg: "count must be a non-negative number".into() });
        }
        out.push(HouseholdPattern { id: out.len() as u32, counts: raw.map(|c| c as u32), weight: r.count });
    }
    if out.is_empty() {
        return Err(PopulationError::Empty);
    }
    Ok(out)
}

pub fn load_patterns(path: &Path) -> Result<Vec<HouseholdPattern>, PopulationError> {
    let file = std::fs::File::open(path).map_err(|e| PopulationError::Io(format!("{}: {e}", path.display())))?;
    parse_patterns(file)
}

/// Inverse-CDF pick for a uniform draw `u` in `[0, 1)`.
pub fn pick_pattern(patterns: &[HouseholdPattern], u: f64) -> usize {
    let total: f64 = patterns.iter().map(|p| p.weight).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in patterns.iter().enumerate() {
        if p.weight <= 0.0 {
            continue;
        }
        acc += p.weight;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Age bands (inclusive, years) and walk speeds (m/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub child_ages: (u32, u32),
    pub adult_ages: (u32, u32),
    pub elder_ages: (u32, u32),
    pub child_speed: f64,
    pub adult_speed: f64,
    pub elder_speed: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            child_ages: (4, 17),
            adult_ages: (18, 64),
            elder_ages: (65, 90),
            child_speed: 1.1,
            adult_speed: 1.4,
            elder_speed: 0.9,
        }
    }
}

impl PopulationConfig {
    fn band(&self, c: Category) -> ((u32, u32), f64) {
        match c {
            Category::Boy | Category::Girl => (self.child_ages, self.child_speed),
            Category::AdultMan | Category::AdultWoman => (self.adult_ages, self.adult_speed),
            Category::ElderMan | Category::ElderWoman => (self.elder_ages, self.elder_speed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: u32,
    pub household: u32,
    pub category: Category,
    pub age: u32,
    /// True for women.
    pub gender: bool,
    pub walk_speed: f64,
    pub home: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub id: u32,
    pub pattern: u32,
    pub members: Vec<u32>,
    pub home: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub seed: u64,
    pub households: Vec<Household>,
    pub persons: Vec<Person>,
}

impl Population {
    pub fn person(&self, id: u32) -> Option<&Person> {
        self.persons.get(id as usize)
    }

    pub fn household(&self, id: u32) -> Option<&Household> {
        self.households.get(id as usize)
    }

    pub fn members(&self, household: u32) -> impl Iterator<Item = &Person> + '_ {
        self.households[household as usize].members.iter().map(|&m| &self.persons[m as usize])
    }

    /// Checks ids, membership and housing against `city`.
    pub fn validate(&self, city: &SemanticCity) -> Vec<String> {
        let mut problems = Vec::new();
        let mut load = vec![0u32; city.buildings.len()];
        for (i, h) in self.households.iter().enumerate() {
            if h.id as usize != i {
                problems.push(format!("household ids are not dense at {i}"));
            }
            if h.members.is_empty() {
                problems.push(format!("household {} has no members", h.id));
            }
            match city.building(h.home) {
                Some(b) if b.has_kind("house") => load[h.home as usize] += 1,
                _ => problems.push(format!("household {} lives in building {} which is not a house", h.id, h.home)),
            }
            for &m in &h.members {
                match self.persons.get(m as usize) {
                    Some(p) if p.household == h.id && p.home == h.home => {}
                    _ => problems.push(format!("household {}: member {m} is inconsistent", h.id)),
                }
            }
        }
        for (i, p) in self.persons.iter().enumerate() {
            if p.id as usize != i {
                problems.push(format!("person ids are not dense at {i}"));
            }
            if !(p.walk_speed > 0.0) {
                problems.push(format!("person {} has no walking speed", p.id));
            }
        }
        for (b, &n) in load.iter().enumerate() {
            if n > city.buildings[b].residential_capacity {
                problems.push(format!("building {b} houses {n} households over capacity"));
            }
        }
        problems
    }

    pub fn from_json(text: &str, city: &SemanticCity) -> Result<Self, PopulationError> {
        let p: Population = serde_json::from_str(text).map_err(|e| PopulationError::Format(e.to_string()))?;
        let problems = p.validate(city);
        if !problems.is_empty() {
            return Err(PopulationError::Format(problems.join("; ")));
        }
        Ok(p)
    }
}

/// How many households to create.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Households(u32),
    /// Households are added until at least this many persons exist.
    Persons(u32),
}

/// Chooses a home for every household, each draw weighted by the remaining
/// apartments of every house.
pub fn assign_homes(households: usize, city: &SemanticCity, rng: &mut StreamRng) -> Result<Vec<u32>, PopulationError> {
    let mut remaining: Vec<u64> = city.buildings.iter().map(|b| b.residential_capacity as u64).collect();
    let capacity: u64 = remaining.iter().sum();
    if households as u64 > capacity {
        return Err(PopulationError::Capacity { households: households as u64, capacity });
    }
    let mut left = capacity;
    let mut homes = Vec::with_capacity(households);
    for _ in 0..households {
        let mut k = rng.gen_range(0..left);
        let b = remaining
            .iter()
            .position(|&r| {
                if k < r {
                    true
                } else {
                    k -= r;
                    false
                }
            })
            .unwrap();
        remaining[b] -= 1;
        left -= 1;
        homes.push(b as u32);
    }
    Ok(homes)
}

pub fn generate_population(
    city: &SemanticCity,
    patterns: &[HouseholdPattern],
    target: Target,
    cfg: &PopulationConfig,
    seed: u64,
) -> Result<Population, PopulationError> {
    let mut rng = substream(seed, Stream::Population, 0);
    let wanted = match target {
        Target::Households(0) | Target::Persons(0) => return Ok(Population { seed, households: Vec::new(), persons: Vec::new() }),
        t => t,
    };
    if patterns.iter().all(|p| p.weight <= 0.0) {
        return Err(PopulationError::ZeroWeight);
    }
    let mut chosen = Vec::new();
    let mut persons = 0u32;
    loop {
        let done = match wanted {
            Target::Households(n) => chosen.len() as u32 >= n,
            Target::Persons(n) => persons >= n,
        };
        if done {
            break;
        }
        let i = pick_pattern(patterns, rng.gen::<f64>());
        persons += patterns[i].size();
        chosen.push(i);
    }
    let homes = assign_homes(chosen.len(), city, &mut rng)?;
    let mut pop = Population { seed, households: Vec::with_capacity(chosen.len()), persons: Vec::new() };
    for (h, (&pi, &home)) in chosen.iter().zip(&homes).enumerate() {
        let pattern = &patterns[pi];
        let mut members = Vec::new();
        for (c, &n) in Category::ALL.iter().zip(&pattern.counts) {
            let ((lo, hi), speed) = cfg.band(*c);
            for _ in 0..n {
                let id = pop.persons.len() as u32;
                pop.persons.push(Person {
                    id,
                    household: h as u32,
                    category: *c,
                    age: rng.gen_range(lo..=hi),
                    gender: c.is_woman(),
                    walk_speed: speed,
                    home,
                });
                members.push(id);
            }
        }
        pop.households.push(Household { id: h as u32, pattern: pattern.id, members, home });
    }
    Ok(pop)
}
