use std::collections::BTreeMap;
use std::path::Path;

use super::*;
use crate::agendagen::{generate_all_agendas, Agenda, FloatingTaskEntry};
use crate::citygen::{generate_city, LayoutConfig, SemanticCity};
use crate::navgraph::NavGraph;
use crate::population::{Category, Household, Person, Population};

const H: f64 = 3600.0;

struct Fixture {
    city: SemanticCity,
    graph: NavGraph,
}

fn fixture() -> Fixture {
    let rules = RuleSet::from_source(include_str!("../../assets/structured.cga"), Path::new("."), None).unwrap();
    let cfg = LayoutConfig::from_toml(include_str!("../../assets/structured.toml")).unwrap();
    let city = generate_city(&cfg, &rules, 1).unwrap().city;
    let graph = NavGraph::build(&city).unwrap();
    Fixture { city, graph }
}

fn population(city: &SemanticCity, households: &[&[u32]]) -> Population {
    let home = city.buildings_of_kind("house").next().unwrap().id;
    let mut pop = Population { seed: 0, households: Vec::new(), persons: Vec::new() };
    for (h, ages) in households.iter().enumerate() {
        let mut members = Vec::new();
        for &age in *ages {
            let (category, walk_speed) = match age {
                0..=17 => (Category::Girl, 1.1),
                18..=64 => (Category::AdultMan, 1.4),
                _ => (Category::ElderWoman, 0.9),
            };
            let id = pop.persons.len() as u32;
            pop.persons.push(Person { id, household: h as u32, category, age, gender: category.is_woman(), walk_speed, home });
            members.push(id);
        }
        pop.households.push(Household { id: h as u32, pattern: 0, members, home });
    }
    pop
}

fn rules(src: &str) -> RuleSet {
    if src.contains("@StartRule") {
        return RuleSet::from_source(src, Path::new("."), None).unwrap();
    }
    RuleSet::from_source(&format!("@StartRule\nMain --> NIL\n{src}"), Path::new("."), None).unwrap()
}

fn single(person: u32, home: u32, tasks: Vec<(f64, f64, TaskKind)>, pool: Vec<FloatingTaskEntry>) -> AgendaSet {
    let mut a = Agenda::new(person);
    for (t0, t1, k) in tasks {
        a.insert(t0, t1, k, None);
    }
    a.finalize(home);
    a.pool = pool;
    AgendaSet { seed: 0, agendas: vec![a], diagnostics: Vec::new() }
}

fn delayed(rule: &str) -> TaskKind {
    TaskKind::DelayedRule { rule: rule.into(), vars: BTreeMap::new() }
}

fn entry(rule: &str, minutes: f64, priority: f64) -> FloatingTaskEntry {
    FloatingTaskEntry { rule: rule.into(), max_duration: minutes * 60.0, priority, vars: BTreeMap::new() }
}

fn exit_times(sim: &Simulation<'_>) -> Vec<f64> {
    sim.events().iter().filter(|e| e.kind == EventKind::Exit).map(|e| e.time).collect()
}

#[test]
fn wait_blocks_for_ceiling_of_ticks() {
    let f = fixture();
    let pop = population(&f.city, &[&[70]]);
    let home = pop.persons[0].home;
    let r = rules("R --> wait(2) goToZone(\"park\") waitUntilNextTask()\nZ --> wait(0) goToZone(\"park\") waitUntilNextTask()");
    for dt in [0.25, 0.3, 1.0] {
        let set = single(0, home, vec![(100.0, 1000.0, delayed("R"))], vec![]);
        let world = World { city: &f.city, graph: &f.graph, population: &pop };
        let cfg = SimConfig { dt, ..SimConfig::default() };
        let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, cfg, 1, 100.0).unwrap();
        sim.run_until(200.0);
        let ticks = (2.0 / dt).ceil();
        let exits = exit_times(&sim);
        assert_eq!(exits.len(), 1);
        assert!((exits[0] - (100.0 + ticks * dt)).abs() < 1e-9, "dt {dt}: exit at {}", exits[0]);

        let set = single(0, home, vec![(100.0, 1000.0, delayed("Z"))], vec![]);
        let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, cfg, 1, 100.0).unwrap();
        sim.step();
        assert_eq!(exit_times(&sim), [100.0]);
    }
}

#[test]
fn context_ends_at_slot_end_and_agent_heads_home() {
    let f = fixture();
    let pop = population(&f.city, &[&[70]]);
    let home = pop.persons[0].home;
    let r = rules("R --> wait(1h)");
    let set = single(0, home, vec![(100.0, 200.0, delayed("R"))], vec![]);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 1, 0.0).unwrap();
    sim.run_until(199.0);
    assert_eq!(sim.status(0).phase, "delayed");
    sim.run_until(201.0);
    assert_eq!(sim.status(0).task, Some(2));
    assert_eq!(sim.presence(0), &Presence::Inside(home));
    assert!(sim.events().iter().all(|e| e.kind == EventKind::Init));
}

#[test]
fn empty_rule_ends_and_next_task_starts_early() {
    let f = fixture();
    let pop = population(&f.city, &[&[70]]);
    let home = pop.persons[0].home;
    let r = rules("Park --> goToZone(\"park\")\nEmpty --> NIL");
    let set = single(0, home, vec![(100.0, 2000.0, delayed("Park")), (2000.0, 3000.0, delayed("Empty"))], vec![]);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 1, 0.0).unwrap();
    sim.run_until(1900.0);
    // reached the park and ended the rule, so the person walks back home early
    assert_eq!(sim.presence(0), &Presence::Inside(home));
    assert!(sim.status(0).task.unwrap() >= 2);
    sim.run_until(DAY);
    assert_eq!(incoherent_exits(sim.events()), 0);
}

#[test]
fn unknown_zone_is_an_incident_not_a_crash() {
    let f = fixture();
    let pop = population(&f.city, &[&[70]]);
    let home = pop.persons[0].home;
    let r = rules("R --> goToZone(\"beach\")");
    let set = single(0, home, vec![(100.0, 200.0, delayed("R"))], vec![]);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 1, 0.0).unwrap();
    sim.run_until(300.0);
    assert_eq!(sim.incidents().len(), 1, "{:?}", sim.incidents());
    assert!(sim.incidents()[0].contains("beach"));
    assert_eq!(sim.presence(0), &Presence::Inside(home));
}

const FLOAT_RULES: &str = "
A --> goToZone(\"park\") waitUntilNextTask()
B --> goToZone(\"park\") waitUntilNextTask()
Short1 --> wait(1m)
Short2 --> wait(1m)
";

fn slot_run(pool: Vec<FloatingTaskEntry>, slot_minutes: f64, seed: u64) -> (Vec<String>, Vec<FloatingTaskEntry>, usize) {
    let f = fixture();
    let pop = population(&f.city, &[&[30]]);
    let home = pop.persons[0].home;
    let r = rules(FLOAT_RULES);
    let t0 = 10.0 * H;
    let set = single(0, home, vec![(t0, t0 + slot_minutes * 60.0, TaskKind::FloatingSlot)], pool);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), seed, t0).unwrap();
    let mut started = Vec::new();
    while sim.time() < t0 + slot_minutes * 60.0 {
        sim.step();
        if let Some(ctx) = &sim.people[0].exec {
            if started.last() != Some(&ctx.rule) {
                started.push(ctx.rule.clone());
            }
        }
    }
    let exits = exit_times(&sim).len();
    (started, sim.people[0].pool.clone(), exits)
}

#[test]
fn floating_slot_picks_highest_priority() {
    let (started, pool, _) = slot_run(vec![entry("B", 60.0, 1.0), entry("A", 60.0, 2.0)], 60.0, 1);
    assert_eq!(started, ["A"]);
    assert_eq!(pool.len(), 1);
    assert_eq!(pool[0].rule, "B");
}

#[test]
fn floating_slot_too_short_runs_nothing() {
    let (started, pool, exits) = slot_run(vec![entry("A", 180.0, 0.0)], 120.0, 1);
    assert!(started.is_empty());
    assert_eq!(pool.len(), 1);
    assert_eq!(exits, 0);
}

#[test]
fn floating_slot_runs_ties_in_seeded_order() {
    let pool = || vec![entry("Short1", 30.0, 0.0), entry("Short2", 30.0, 0.0)];
    let mut orders = std::collections::BTreeSet::new();
    for seed in 0..12 {
        let (started, left, _) = slot_run(pool(), 120.0, seed);
        assert_eq!(started.len(), 2, "{started:?}");
        assert!(left.is_empty());
        assert_eq!(slot_run(pool(), 120.0, seed).0, started);
        orders.insert(started);
    }
    assert_eq!(orders.len(), 2);
}

/// City with a single bench, left in the park nearest to the first house.
fn one_bench(f: &Fixture) -> Fixture {
    let home = f.city.buildings_of_kind("house").next().unwrap().id;
    let from = Endpoint::Attach(Attachment::Entrance { building: home, index: 0 });
    let park = f
        .city
        .zones
        .iter()
        .filter(|z| z.kind == "park")
        .min_by(|a, b| {
            let d = |z: &crate::citygen::Zone| {
                f.graph.distance(from, Endpoint::Attach(Attachment::ZoneEntry { zone: z.id, index: 0 })).unwrap()
            };
            d(a).total_cmp(&d(b))
        })
        .unwrap()
        .id;
    let mut city = f.city.clone();
    let keep = city.objects.iter().position(|o| o.kind == "bench" && o.zone_id == Some(park)).unwrap();
    let mut bench = city.objects[keep].clone();
    bench.id = 0;
    city.objects = vec![bench];
    let graph = NavGraph::build(&city).unwrap();
    Fixture { city, graph }
}

#[test]
fn one_bench_two_elders() {
    let f = one_bench(&fixture());
    let pop = population(&f.city, &[&[70], &[72]]);
    let r = rules(include_str!("../../assets/weekday.pcg"));
    let mut winners = std::collections::BTreeSet::new();
    for seed in 0..6 {
        let world = World { city: &f.city, graph: &f.graph, population: &pop };
        let set = generate_all_agendas(&r, world, seed, 64);
        let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), seed, 0.0).unwrap();
        let mut seated: Vec<u32> = Vec::new();
        while sim.time() < DAY {
            sim.step();
            assert!(sim.occupancy().within_capacity());
            for (p, a) in sim.agents() {
                if a.state == AgentState::Interacting(0) && !seated.contains(&p) {
                    seated.push(p);
                }
            }
        }
        assert_eq!(seated.len(), 1, "seed {seed}: {seated:?}");
        winners.insert(seated[0]);
        assert!(sim.occupancy().is_empty());
        for p in 0..2 {
            assert_eq!(sim.presence(p), &Presence::Inside(pop.persons[p as usize].home));
        }
    }
    assert_eq!(winners.len(), 2);
}

fn weekday_world<'a>(f: &'a Fixture, pop: &'a Population, r: &'a RuleSet, seed: u64) -> AgendaSet {
    let world = World { city: &f.city, graph: &f.graph, population: pop };
    generate_all_agendas(r, world, seed, 64)
}

#[test]
fn full_day_invariants() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8, 6], &[35], &[70, 68], &[45, 12]]);
    let r = rules(include_str!("../../assets/weekday.pcg"));
    let set = weekday_world(&f, &pop, &r, 5);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 5, 0.0).unwrap();
    let dt = sim.config().dt;
    let mut last: Vec<Option<Vec2>> = vec![None; pop.persons.len()];
    let mut group_ticks = 0;
    while sim.time() < DAY {
        sim.step();
        for (p, prev) in pop.persons.iter().zip(last.iter_mut()) {
            let now = sim.presence(p.id).agent().map(|a| a.pos);
            if let (Some(a), Some(b)) = (*prev, now) {
                // carried members move at the group speed, which is never faster
                assert!(a.distance(b) <= p.walk_speed * dt + 1e-6, "person {} jumped", p.id);
            }
            *prev = now;
        }
        for (leader, a) in sim.agents() {
            if let Phase::Lead(l) = &sim.people[leader as usize].phase {
                if l.stage == LeadStage::Escort {
                    group_ticks += 1;
                    for &m in &l.members {
                        let ma = sim.presence(m).agent().unwrap();
                        assert!(ma.pos.distance(a.pos) <= sim.config().agent_radius);
                        assert_eq!(ma.state, a.state);
                    }
                }
            }
        }
    }
    assert!(group_ticks > 0);
    assert_eq!(incoherent_exits(sim.events()), 0);
    for p in &pop.persons {
        assert_eq!(sim.presence(p.id), &Presence::Inside(p.home), "person {} not home", p.id);
    }
    assert!(sim.occupancy().is_empty());
    assert!(sim.incidents().is_empty(), "{:?}", sim.incidents());
    // at midday children are in school and adults at work
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 5, 0.0).unwrap();
    sim.set_recording(false);
    sim.run_until(12.0 * H);
    for p in &pop.persons {
        let kind = match p.age {
            0..=17 => "school",
            18..=64 => "workplace",
            _ => continue,
        };
        let b = sim.presence(p.id).building().expect("inside at noon");
        assert!(f.city.buildings[b as usize].has_kind(kind), "person {} in building {b}", p.id);
    }
}

#[test]
fn child_goes_to_school_with_adult() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8]]);
    let r = rules(include_str!("../../assets/weekday.pcg"));
    let set = weekday_world(&f, &pop, &r, 2);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 2, 0.0).unwrap();
    sim.run_until(DAY);
    let trace = |p: u32| -> Vec<(EventKind, u32)> {
        sim.events().iter().filter(|e| e.person == p && e.time < 12.0 * H).map(|e| (e.kind, e.building)).collect()
    };
    let adult = trace(0);
    let child = trace(1);
    let school = child.iter().find(|(k, _)| *k == EventKind::Enter).unwrap().1;
    assert!(f.city.buildings[school as usize].has_kind("school"));
    let at = adult.iter().position(|&e| e == (EventKind::Enter, school)).expect("adult enters the school");
    assert_eq!(adult[at + 1], (EventKind::Exit, school));
    assert!(adult[at + 2..].iter().any(|&(k, b)| k == EventKind::Enter && f.city.buildings[b as usize].has_kind("workplace")));
}

#[test]
fn time_jump_places_persons() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8]]);
    let r = rules(include_str!("../../assets/weekday.pcg"));
    let set = weekday_world(&f, &pop, &r, 2);
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let inputs = SimInputs { world, agendas: &set, rules: &r };
    let mut sim = Simulation::new(inputs, SimConfig::default(), 2, 6.0 * H).unwrap();
    assert!(matches!(sim.time_jump(0.0), Err(SimError::BadJump(_))));
    assert!(matches!(sim.time_jump(-5.0), Err(SimError::BadJump(_))));
    sim.time_jump(6.0 * H).unwrap();
    assert_eq!(sim.time(), 12.0 * H);
    let mut cont = Simulation::new(inputs, SimConfig::default(), 2, 0.0).unwrap();
    cont.set_recording(false);
    cont.run_until(12.0 * H);
    for p in 0..2 {
        assert_eq!(sim.presence(p), cont.presence(p));
    }

    // midway through the group trip both stand at half the path
    let child = &set.agendas[1];
    let trip = child.tasks.iter().find(|t| t.group.is_some()).unwrap();
    let mid = 0.5 * (trip.t0 + trip.t1);
    let jumped = Simulation::new(inputs, SimConfig::default(), 2, mid).unwrap();
    let (a, c) = (jumped.presence(0).agent().unwrap(), jumped.presence(1).agent().unwrap());
    assert_eq!(a.pos, c.pos);
    let route = a.route.as_ref().unwrap();
    assert!((route.progress - 0.5 * route.path.length).abs() < 1e-9);
    assert_eq!(route.path.start(), f.city.buildings[pop.persons[0].home as usize].primary_entrance());

    // a full day later the state is the same
    let mut again = Simulation::new(inputs, SimConfig::default(), 2, mid).unwrap();
    again.time_jump(DAY).unwrap();
    assert!((again.time() - mid).abs() < 1e-6);
    for p in 0..2 {
        assert_eq!(again.presence(p), jumped.presence(p));
    }
}

#[test]
fn travel_start_spawns_at_source_entrance() {
    let f = fixture();
    let pop = population(&f.city, &[&[30]]);
    let home = pop.persons[0].home;
    let work = f.city.buildings_of_kind("workplace").next().unwrap().id;
    let set = single(0, home, vec![(H, 2.0 * H, TaskKind::GoToBuilding { building: work })], vec![]);
    let r = rules("X --> NIL");
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    let sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 1, H).unwrap();
    let a = sim.presence(0).agent().unwrap();
    assert_eq!(a.pos, f.city.buildings[home as usize].primary_entrance());
}

#[test]
fn runs_are_deterministic_and_seed_sensitive() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8], &[70], &[30]]);
    let r = rules(include_str!("../../assets/weekday.pcg"));
    let samples = |seed: u64| {
        let set = weekday_world(&f, &pop, &r, seed);
        let world = World { city: &f.city, graph: &f.graph, population: &pop };
        let mut sim = Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), seed, 0.0).unwrap();
        sim.run_until(DAY);
        sim.take_samples()
    };
    let a = samples(9);
    assert!(!a.is_empty());
    assert_eq!(a, samples(9));
    assert_ne!(a, samples(10));
}

#[test]
fn random_baseline_is_incoherent() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8], &[70], &[30]]);
    let events = baseline::random_walk_events(&f.city, &pop, 1, 6);
    assert!(incoherent_exits(&events) > 0);
    assert_eq!(events.iter().filter(|e| e.kind == EventKind::Exit).count(), 4 * 6);
}

#[test]
fn mismatched_agendas_are_rejected() {
    let f = fixture();
    let pop = population(&f.city, &[&[40, 8]]);
    let set = single(0, pop.persons[0].home, vec![], vec![]);
    let r = rules("X --> NIL");
    let world = World { city: &f.city, graph: &f.graph, population: &pop };
    assert!(matches!(
        Simulation::new(SimInputs { world, agendas: &set, rules: &r }, SimConfig::default(), 1, 0.0),
        Err(SimError::AgendaMismatch { .. })
    ));
    let bad = SimConfig { dt: 0.0, ..SimConfig::default() };
    let set = single(0, pop.persons[0].home, vec![], vec![]);
    let pop1 = population(&f.city, &[&[40]]);
    let world = World { city: &f.city, graph: &f.graph, population: &pop1 };
    assert!(matches!(Simulation::new(SimInputs { world, agendas: &set, rules: &r }, bad, 1, 0.0), Err(SimError::Config(_))));
}
