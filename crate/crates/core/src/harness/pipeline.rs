//! Stage helpers and the full city → population → agendas → simulation run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::heatmap::Heatmap;
use super::{
    filter_by_age, json_artifact, parse_artifact, parse_time, read_file, read_text, trajectories_jsonl, write_file, AgeBand, HarnessError,
    Header,
};
use crate::agendagen::{generate_all_agendas, AgendaSet, World};
use crate::citygen::{generate_city, LayoutConfig, SemanticCity};
use crate::geom::Vec2;
use crate::navgraph::NavGraph;
use crate::population::{generate_population, parse_patterns, Population, PopulationConfig, Target};
use crate::rulelang::resolve::parse_define;
use crate::rulelang::RuleSet;
use crate::simulation::{BuildingEvent, Sample, SimConfig, SimInputs, Simulation};

fn file_key(prefix: &str, path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    format!("{prefix}:{name}")
}

/// Loads a rule file with its imports and applies `name=value` overrides.
/// Every contributing file is digested into `header`.
pub fn load_rules(stage: &'static str, path: &Path, defines: &[String], header: &mut Header) -> Result<RuleSet, HarnessError> {
    read_file(stage, path)?;
    let mut rules = RuleSet::load(path, None).map_err(|e| HarnessError::stage(stage, format!("{}: {e}", path.display())))?;
    for src in rules.sources.clone() {
        let bytes = read_file(stage, &src)?;
        header.inputs.insert(file_key("rules", &src), super::digest(&bytes));
    }
    for d in defines {
        let (name, value) = parse_define(d).map_err(|e| HarnessError::stage(stage, e))?;
        header.inputs.insert(format!("define:{name}"), super::digest(d.as_bytes()));
        rules.define(&name, value);
    }
    Ok(rules)
}

pub fn load_layout(path: &Path, header: &mut Header) -> Result<LayoutConfig, HarnessError> {
    let text = read_text("layout", path)?;
    header.inputs.insert(file_key("layout", path), super::digest(text.as_bytes()));
    LayoutConfig::from_toml(&text).map_err(|e| HarnessError::stage("layout", e))
}

pub fn load_city(path: &Path, header: &mut Header) -> Result<SemanticCity, HarnessError> {
    let text = read_text("city", path)?;
    header.inputs.insert(file_key("city", path), super::digest(text.as_bytes()));
    let (_, city): (_, SemanticCity) = parse_artifact("city", &text)?;
    let problems = city.validate();
    if !problems.is_empty() {
        return Err(HarnessError::stage("city", problems.join("; ")));
    }
    Ok(city)
}

pub fn load_population(path: &Path, city: &SemanticCity, header: &mut Header) -> Result<Population, HarnessError> {
    let text = read_text("population", path)?;
    header.inputs.insert(file_key("population", path), super::digest(text.as_bytes()));
    let (_, pop): (_, Population) = parse_artifact("population", &text)?;
    let problems = pop.validate(city);
    if !problems.is_empty() {
        return Err(HarnessError::stage("population", problems.join("; ")));
    }
    Ok(pop)
}

pub fn load_agendas(path: &Path, world: &World<'_>, header: &mut Header) -> Result<AgendaSet, HarnessError> {
    let text = read_text("agendas", path)?;
    header.inputs.insert(file_key("agendas", path), super::digest(text.as_bytes()));
    let (_, set): (_, AgendaSet) = parse_artifact("agendas", &text)?;
    let problems = set.validate(world);
    if !problems.is_empty() {
        return Err(HarnessError::stage("agendas", problems.join("; ")));
    }
    Ok(set)
}

pub fn build_graph(city: &SemanticCity) -> Result<NavGraph, HarnessError> {
    NavGraph::build(city).map_err(|e| HarnessError::stage("navgraph", e))
}

/// What one simulated run produced.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub samples: Vec<Sample>,
    pub events: Vec<BuildingEvent>,
    pub incidents: Vec<String>,
}

/// Simulates from `from` to `to`, optionally jumping ahead to `jump_to` first.
pub fn simulate(
    inputs: SimInputs<'_>,
    cfg: SimConfig,
    seed: u64,
    from: f64,
    to: f64,
    jump_to: Option<f64>,
) -> Result<SimRun, HarnessError> {
    let mut sim = Simulation::new(inputs, cfg, seed, from).map_err(|e| HarnessError::stage("simulate", e))?;
    if let Some(j) = jump_to {
        sim.time_jump(j - from).map_err(|e| HarnessError::stage("simulate", e))?;
    }
    sim.run_until(to);
    Ok(SimRun { samples: sim.take_samples(), events: sim.events().to_vec(), incidents: sim.incidents().to_vec() })
}

/// Heat-map over the whole city from trajectory samples.
pub fn heatmap_for(city: &SemanticCity, samples: &[Sample], cell: f64) -> Heatmap {
    let mut h = Heatmap::new(Vec2::new(0.0, 0.0), city.extent, cell);
    h.add_samples(samples);
    h
}

fn default_from() -> String {
    "0h".into()
}

fn default_to() -> String {
    "24h".into()
}

fn default_cell() -> f64 {
    2.0
}

/// Everything a full run needs; loaded from TOML. Relative paths are
/// resolved against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// City rules and layout, or a ready `city` file.
    pub city_rules: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub city: Option<PathBuf>,
    /// Household patterns and a size, or a ready `population` file.
    pub patterns: Option<PathBuf>,
    pub households: Option<u32>,
    pub persons: Option<u32>,
    pub population: Option<PathBuf>,
    pub agenda_rules: PathBuf,
    /// A ready agenda file; the rules are still needed for delayed rules.
    pub agendas: Option<PathBuf>,
    #[serde(default)]
    pub defines: Vec<String>,
    #[serde(default = "default_from")]
    pub from: String,
    #[serde(default = "default_to")]
    pub to: String,
    pub jump_to: Option<String>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_cell")]
    pub heatmap_cell: f64,
    /// Restricts heat-map and trajectories to ages `lo-hi`.
    pub age_band: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = read_text("config", path)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            Some(&mut cfg.out_dir),
            cfg.city_rules.as_mut(),
            cfg.layout.as_mut(),
            cfg.city.as_mut(),
            cfg.patterns.as_mut(),
            cfg.population.as_mut(),
            Some(&mut cfg.agenda_rules),
            cfg.agendas.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub city: SemanticCity,
    pub population: Population,
    pub agendas: AgendaSet,
    pub run: SimRun,
    pub heatmap: Heatmap,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    pub diagnostics: Vec<String>,
}

/// Runs every stage and writes its artifact into `out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutputs, HarnessError> {
    let mut header = Header::new(cfg.seed);
    let mut files = Vec::new();
    let mut diagnostics = Vec::new();
    let out = |name: &str| cfg.out_dir.join(name);

    let city = match (&cfg.city, &cfg.city_rules, &cfg.layout) {
        (Some(path), _, _) => load_city(path, &mut header)?,
        (None, Some(rules), Some(layout)) => {
            let layout = load_layout(layout, &mut header)?;
            let rules = load_rules("city", rules, &[], &mut header)?;
            let output = generate_city(&layout, &rules, cfg.seed).map_err(|e| HarnessError::stage("city", e))?;
            diagnostics.extend(output.diagnostics);
            let path = out("city.json");
            write_file(&path, json_artifact(&header, &output.city).as_bytes())?;
            files.push(path);
            output.city
        }
        _ => return Err(HarnessError::Config("either `city` or both `city_rules` and `layout` are required".into())),
    };
    let graph = build_graph(&city)?;

    let population = match (&cfg.population, &cfg.patterns) {
        (Some(path), _) => load_population(path, &city, &mut header)?,
        (None, Some(patterns)) => {
            let bytes = read_file("population", patterns)?;
            header.inputs.insert(file_key("patterns", patterns), super::digest(&bytes));
            let patterns = parse_patterns(&bytes[..]).map_err(|e| HarnessError::stage("population", e))?;
            let target = match (cfg.households, cfg.persons) {
                (Some(h), None) => Target::Households(h),
                (None, Some(p)) => Target::Persons(p),
                _ => return Err(HarnessError::Config("give exactly one of `households` or `persons`".into())),
            };
            let pop = generate_population(&city, &patterns, target, &PopulationConfig::default(), cfg.seed)
                .map_err(|e| HarnessError::stage("population", e))?;
            let path = out("population.json");
            write_file(&path, json_artifact(&header, &pop).as_bytes())?;
            files.push(path);
            pop
        }
        _ => return Err(HarnessError::Config("either `population` or `patterns` is required".into())),
    };

    let world = World { city: &city, graph: &graph, population: &population };
    let rules = load_rules("agendas", &cfg.agenda_rules, &cfg.defines, &mut header)?;
    let agendas = match &cfg.agendas {
        Some(path) => load_agendas(path, &world, &mut header)?,
        None => {
            let set = generate_all_agendas(&rules, world, cfg.seed, cfg.sim.max_depth);
            diagnostics.extend(set.diagnostics.iter().cloned());
            let path = out("agendas.json");
            write_file(&path, json_artifact(&header, &set).as_bytes())?;
            files.push(path);
            set
        }
    };

    let from = parse_time(&cfg.from)?;
    let to = parse_time(&cfg.to)?;
    let jump = cfg.jump_to.as_deref().map(parse_time).transpose()?;
    let inputs = SimInputs { world, agendas: &agendas, rules: &rules };
    let mut run = simulate(inputs, cfg.sim, cfg.seed, from, to, jump)?;
    if let Some(band) = &cfg.age_band {
        run.samples = filter_by_age(&run.samples, &population, AgeBand::parse(band)?);
    }
    let heatmap = heatmap_for(&city, &run.samples, cfg.heatmap_cell);
    let comment = header.line();
    for (name, bytes) in [
        ("trajectories.jsonl", trajectories_jsonl(&header, &run.samples).into_bytes()),
        ("heatmap.pgm", heatmap.to_pgm(&comment)),
        ("heatmap.csv", heatmap.to_csv(&comment).into_bytes()),
        ("incidents.txt", run.incidents.iter().map(|l| format!("{l}\n")).collect::<String>().into_bytes()),
    ] {
        let path = out(name);
        write_file(&path, &bytes)?;
        files.push(path);
    }
    Ok(RunOutputs { city, population, agendas, run, heatmap, files, diagnostics })
}
