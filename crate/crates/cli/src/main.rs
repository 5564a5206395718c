//! `crowdforge` command line: generates a city, its population and their
//! agendas, and simulates a day.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crowdforge::agendagen::{generate_all_agendas, World};
use crowdforge::citygen::{generate_city, obj::to_obj};
use crowdforge::harness::pipeline::{
    build_graph, heatmap_for, load_agendas, load_city, load_layout, load_population, load_rules, simulate,
};
use crowdforge::harness::{
    filter_by_age, inspect_person, json_artifact, parse_time, read_file, run_pipeline, trajectories_jsonl, write_file, AgeBand, Header,
    RunConfig,
};
use crowdforge::population::{generate_population, parse_patterns, PopulationConfig, Target};
use crowdforge::rulelang::RuleSet;
use crowdforge::simulation::{SimConfig, SimInputs};

#[derive(Parser)]
#[command(name = "crowdforge", version, about = "Semantic city, population and daily-agenda generation with a whereabouts simulation")]
struct Cli {
    /// Random seed; falls back to CROWDFORGE_SEED, then 0.
    #[arg(long, global = true, env = "CROWDFORGE_SEED")]
    seed: Option<u64>,
    /// Exit with status 2 when a run reports more incidents than this.
    #[arg(long, global = true, default_value_t = 0)]
    max_incidents: usize,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Parse rule files and report what they define.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate a city from a layout and a shape rule file.
    City(CityArgs),
    /// Sample households and persons into the city's houses.
    Population(PopulationArgs),
    /// Compile daily agendas from an agenda rule file.
    Agendas(AgendaArgs),
    /// Simulate a day and export heat-maps and trajectories.
    Simulate(SimulateArgs),
    /// Print one person and their agenda.
    Inspect(InspectArgs),
    /// Run every stage from a TOML run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct CityArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the navigation graph.
    #[arg(long, value_name = "PATH")]
    emit_navgraph: Option<PathBuf>,
    /// Also write a Wavefront mesh of the generated geometry.
    #[arg(long, value_name = "PATH")]
    obj: Option<PathBuf>,
}

#[derive(Args)]
struct PopulationArgs {
    #[arg(long)]
    city: PathBuf,
    #[arg(long)]
    patterns: PathBuf,
    #[arg(long, conflicts_with = "persons", required_unless_present = "persons")]
    households: Option<u32>,
    /// Add households until at least this many persons exist.
    #[arg(long)]
    persons: Option<u32>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AgendaArgs {
    #[arg(long)]
    city: PathBuf,
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    /// Override an attribute, e.g. `workStart=9h`.
    #[arg(long, value_name = "NAME=VALUE")]
    define: Vec<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    city: PathBuf,
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    agendas: PathBuf,
    /// Rule file for delayed rules and floating tasks.
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_name = "NAME=VALUE")]
    define: Vec<String>,
    #[arg(long, default_value = "0h")]
    from: String,
    #[arg(long, default_value = "24h")]
    to: String,
    /// Jump to this time before simulating.
    #[arg(long)]
    jump_to: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    /// Seconds between trajectory samples.
    #[arg(long, default_value_t = 60.0)]
    sample_interval: f64,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    heatmap_csv: Option<PathBuf>,
    /// Heat-map cell size in meters.
    #[arg(long, default_value_t = 2.0)]
    heatmap_cell: f64,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// Only export persons aged `lo-hi` (lo inclusive).
    #[arg(long)]
    age_band: Option<String>,
    /// Write incidents here, one per line.
    #[arg(long)]
    incidents: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    city: PathBuf,
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    agendas: PathBuf,
    #[arg(long)]
    person: u32,
}

/// Number of incidents a command ran into.
type Incidents = usize;

fn check(files: &[PathBuf]) -> Result<Incidents> {
    let mut failed = 0;
    for path in files {
        match RuleSet::load(path, None) {
            Ok(rules) => {
                println!(
                    "{}: ok, {} rules, {} attributes, start rule {}",
                    path.display(),
                    rules.rules().count(),
                    rules.attributes.len(),
                    rules.start_rule
                );
                for (caller, callee, pos) in rules.undefined_calls() {
                    println!("  warning: {caller} calls undefined rule {callee} at {pos}");
                }
            }
            Err(e) => {
                println!("{}: error: {e}", path.display());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} rule files failed to parse", files.len());
    }
    Ok(0)
}

fn city(a: &CityArgs, seed: u64) -> Result<Incidents> {
    let mut header = Header::new(seed);
    let layout = load_layout(&a.layout, &mut header)?;
    let rules = load_rules("city", &a.rules, &[], &mut header)?;
    let out = generate_city(&layout, &rules, seed).context("city")?;
    for d in &out.diagnostics {
        log::warn!("{d}");
    }
    write_file(&a.output, json_artifact(&header, &out.city).as_bytes())?;
    if let Some(path) = &a.emit_navgraph {
        let graph = build_graph(&out.city)?;
        write_file(path, json_artifact(&header, &graph.dump()).as_bytes())?;
    }
    if let Some(path) = &a.obj {
        write_file(path, to_obj(out.leaves.iter().flatten()).as_bytes())?;
    }
    let c = &out.city;
    println!(
        "city: {} lots, {} buildings, {} zones, {} objects -> {}",
        out.layout.lots.len(),
        c.buildings.len(),
        c.zones.len(),
        c.objects.len(),
        a.output.display()
    );
    Ok(0)
}

fn population(a: &PopulationArgs, seed: u64) -> Result<Incidents> {
    let mut header = Header::new(seed);
    let city = load_city(&a.city, &mut header)?;
    let bytes = read_file("population", &a.patterns)?;
    header.inputs.insert("patterns".into(), crowdforge::harness::digest(&bytes));
    let patterns = parse_patterns(&bytes[..]).context("population")?;
    let target = match (a.households, a.persons) {
        (Some(h), _) => Target::Households(h),
        (None, Some(p)) => Target::Persons(p),
        (None, None) => bail!("give --households or --persons"),
    };
    let pop = generate_population(&city, &patterns, target, &PopulationConfig::default(), seed).context("population")?;
    write_file(&a.output, json_artifact(&header, &pop).as_bytes())?;
    println!("population: {} households, {} persons -> {}", pop.households.len(), pop.persons.len(), a.output.display());
    Ok(0)
}

fn agendas(a: &AgendaArgs, seed: u64, max_depth: u32) -> Result<Incidents> {
    let mut header = Header::new(seed);
    let city = load_city(&a.city, &mut header)?;
    let population = load_population(&a.population, &city, &mut header)?;
    let graph = build_graph(&city)?;
    let rules = load_rules("agendas", &a.rules, &a.define, &mut header)?;
    let world = World { city: &city, graph: &graph, population: &population };
    let set = generate_all_agendas(&rules, world, seed, max_depth);
    for d in &set.diagnostics {
        log::warn!("{d}");
    }
    write_file(&a.output, json_artifact(&header, &set).as_bytes())?;
    println!("agendas: {} persons, {} diagnostics -> {}", set.agendas.len(), set.diagnostics.len(), a.output.display());
    Ok(set.diagnostics.len())
}

fn simulate_cmd(a: &SimulateArgs, seed: u64) -> Result<Incidents> {
    let mut header = Header::new(seed);
    let city = load_city(&a.city, &mut header)?;
    let population = load_population(&a.population, &city, &mut header)?;
    let graph = build_graph(&city)?;
    let world = World { city: &city, graph: &graph, population: &population };
    let agendas = load_agendas(&a.agendas, &world, &mut header)?;
    let rules = load_rules("simulate", &a.rules, &a.define, &mut header)?;
    let cfg = SimConfig { dt: a.dt, sample_interval: a.sample_interval, ..SimConfig::default() };
    let from = parse_time(&a.from)?;
    let to = parse_time(&a.to)?;
    let jump = a.jump_to.as_deref().map(parse_time).transpose()?;
    let mut run = simulate(SimInputs { world, agendas: &agendas, rules: &rules }, cfg, seed, from, to, jump)?;
    if let Some(band) = &a.age_band {
        run.samples = filter_by_age(&run.samples, &population, AgeBand::parse(band)?);
    }
    let comment = header.line();
    if a.heatmap.is_some() || a.heatmap_csv.is_some() {
        if a.heatmap_cell.is_nan() || a.heatmap_cell <= 0.0 {
            bail!("--heatmap-cell must be positive");
        }
        let heat = heatmap_for(&city, &run.samples, a.heatmap_cell);
        if let Some(path) = &a.heatmap {
            write_file(path, &heat.to_pgm(&comment))?;
        }
        if let Some(path) = &a.heatmap_csv {
            write_file(path, heat.to_csv(&comment).as_bytes())?;
        }
    }
    if let Some(path) = &a.trajectories {
        write_file(path, trajectories_jsonl(&header, &run.samples).as_bytes())?;
    }
    if let Some(path) = &a.incidents {
        write_file(path, run.incidents.iter().map(|l| format!("{l}\n")).collect::<String>().as_bytes())?;
    }
    for line in &run.incidents {
        log::warn!("{line}");
    }
    println!("simulate: {} samples, {} building events, {} incidents", run.samples.len(), run.events.len(), run.incidents.len());
    Ok(run.incidents.len())
}

fn inspect(a: &InspectArgs) -> Result<Incidents> {
    let mut header = Header::new(0);
    let city = load_city(&a.city, &mut header)?;
    let population = load_population(&a.population, &city, &mut header)?;
    let graph = build_graph(&city)?;
    let world = World { city: &city, graph: &graph, population: &population };
    let agendas = load_agendas(&a.agendas, &world, &mut header)?;
    print!("{}", inspect_person(&city, &population, &agendas, a.person)?);
    Ok(0)
}

fn run(config: &Path, seed: Option<u64>) -> Result<Incidents> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out = run_pipeline(&cfg)?;
    for d in &out.diagnostics {
        log::warn!("{d}");
    }
    for line in &out.run.incidents {
        log::warn!("{line}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!("run: {} persons, {} samples, {} incidents", out.population.persons.len(), out.run.samples.len(), out.run.incidents.len());
    Ok(out.run.incidents.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let seed = cli.seed.unwrap_or(0);
    let result = match &cli.command {
        Command::Check { files } => check(files),
        Command::City(a) => city(a, seed),
        Command::Population(a) => population(a, seed),
        Command::Agendas(a) => agendas(a, seed, SimConfig::default().max_depth),
        Command::Simulate(a) => simulate_cmd(a, seed),
        Command::Inspect(a) => inspect(a),
        Command::Run { config } => run(config, cli.seed),
    };
    match result {
        Ok(n) if n > cli.max_incidents => {
            eprintln!("error: {n} incidents (allowed {})", cli.max_incidents);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
