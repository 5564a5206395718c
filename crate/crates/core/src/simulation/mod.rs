//! Fixed-step simulation of a day.
//!
//! Persons are either hidden inside a building or embodied as an agent that
//! walks the navigation graph. Each tick the current agenda task of every
//! person is advanced in id order; delayed rules run in pausable contexts.

pub mod baseline;
mod exec;
pub mod occupancy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agendagen::{AgendaSet, GroupId, TaskKind, World, DAY};
use crate::geom::Vec2;
use crate::navgraph::{Attachment, Endpoint, Path};
use crate::rng::{substream, Stream, StreamRng};
use crate::rulelang::RuleSet;
use exec::{Block, ExecContext, Flow, Request, SimEnv};
pub use occupancy::Occupancy;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time jumps must move forward, got {0} s")]
    BadJump(f64),
    #[error("{agendas} agendas for {persons} persons")]
    AgendaMismatch { agendas: usize, persons: usize },
    #[error("invalid simulation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds per tick.
    pub dt: f64,
    /// Seconds between trajectory samples.
    pub sample_interval: f64,
    pub interaction_range: f64,
    /// Rendezvous tolerance for groups.
    pub agent_radius: f64,
    pub max_depth: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 0.25, sample_interval: 60.0, interaction_range: 1.5, agent_radius: 2.0, max_depth: 64 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(SimError::Config("sample interval must be positive".into()));
        }
        Ok(())
    }

    fn sample_every(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }
}

/// Everything a run reads.
#[derive(Debug, Clone, Copy)]
pub struct SimInputs<'w> {
    pub world: World<'w>,
    pub agendas: &'w AgendaSet,
    pub rules: &'w RuleSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentState {
    Walking,
    Idle,
    Interacting(u32),
    Grouped(GroupId),
}

impl AgentState {
    pub fn name(&self) -> &'static str {
        match self {
            AgentState::Walking => "walking",
            AgentState::Idle => "idle",
            AgentState::Interacting(_) => "interacting",
            AgentState::Grouped(_) => "grouped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: Path,
    pub progress: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub pos: Vec2,
    pub route: Option<Route>,
    pub state: AgentState,
}

/// Where a person is: hidden in a building or embodied.
#[derive(Debug, Clone, PartialEq)]
pub enum Presence {
    Inside(u32),
    Agent(Agent),
}

impl Presence {
    pub fn agent(&self) -> Option<&Agent> {
        match self {
            Presence::Agent(a) => Some(a),
            Presence::Inside(_) => None,
        }
    }

    pub fn building(&self) -> Option<u32> {
        match self {
            Presence::Inside(b) => Some(*b),
            Presence::Agent(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Placed inside at initialization.
    Init,
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingEvent {
    pub time: f64,
    pub person: u32,
    pub building: u32,
    pub kind: EventKind,
}

/// Number of exits not preceded by being inside that same building.
pub fn incoherent_exits(events: &[BuildingEvent]) -> usize {
    let mut inside: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    let mut bad = 0;
    for e in events {
        match e.kind {
            EventKind::Init | EventKind::Enter => {
                inside.insert(e.person, e.building);
            }
            EventKind::Exit => {
                if inside.remove(&e.person) != Some(e.building) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// One trajectory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tick: u64,
    pub time: f64,
    #[serde(rename = "personId")]
    pub person: u32,
    pub x: f64,
    pub y: f64,
    pub state: String,
    #[serde(rename = "taskKind")]
    pub task: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Rendezvous {
    Building(u32),
    Point(Vec2),
}

#[derive(Debug, Clone, PartialEq)]
enum LeadStage {
    Fetch(Rendezvous),
    Escort,
}

#[derive(Debug, Clone, PartialEq)]
struct Lead {
    group: GroupId,
    building: u32,
    members: Vec<u32>,
    speed: f64,
    stage: LeadStage,
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    /// The current task still has to be started.
    Pending,
    Travel {
        building: u32,
        must_arrive: bool,
    },
    /// Nothing to do until the task ends.
    Settled,
    Delayed,
    Slot,
    Lead(Lead),
    Carried {
        leader: u32,
    },
    Await {
        leader: u32,
        leader_task: usize,
    },
    Finished,
}

impl Phase {
    fn name(&self) -> &'static str {
        match self {
            Phase::Pending => "pending",
            Phase::Travel { .. } => "travel",
            Phase::Settled => "settled",
            Phase::Delayed => "delayed",
            Phase::Slot => "slot",
            Phase::Lead(_) => "lead",
            Phase::Carried { .. } => "carried",
            Phase::Await { .. } => "await",
            Phase::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone)]
struct Runner<'w> {
    presence: Presence,
    cur: usize,
    phase: Phase,
    exec: Option<ExecContext<'w>>,
    pool: Vec<crate::agendagen::FloatingTaskEntry>,
    rng: StreamRng,
    started: f64,
}

/// Read-only view of a person's progress.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonStatus {
    pub task: Option<usize>,
    /// Time the current task was started.
    pub started: f64,
    pub phase: &'static str,
}

pub struct Simulation<'w> {
    inputs: SimInputs<'w>,
    cfg: SimConfig,
    start: f64,
    tick: u64,
    base_tick: u64,
    people: Vec<Runner<'w>>,
    occupancy: Occupancy,
    events: Vec<BuildingEvent>,
    incidents: Vec<String>,
    samples: Vec<Sample>,
    recording: bool,
}

const EPS: f64 = 1e-9;

impl<'w> Simulation<'w> {
    /// Builds a world and places everyone as of time `start`.
    pub fn new(inputs: SimInputs<'w>, cfg: SimConfig, seed: u64, start: f64) -> Result<Self, SimError> {
        cfg.validate()?;
        let persons = inputs.world.population.persons.len();
        if inputs.agendas.agendas.len() != persons {
            return Err(SimError::AgendaMismatch { agendas: inputs.agendas.agendas.len(), persons });
        }
        let people = inputs
            .world
            .population
            .persons
            .iter()
            .map(|p| Runner {
                presence: Presence::Inside(p.home),
                cur: 0,
                phase: Phase::Pending,
                exec: None,
                pool: inputs.agendas.agendas[p.id as usize].pool.clone(),
                rng: substream(seed, Stream::Person, p.id as u64),
                started: start,
            })
            .collect();
        let mut sim = Simulation {
            inputs,
            cfg,
            start: start.rem_euclid(DAY),
            tick: 0,
            base_tick: 0,
            people,
            occupancy: Occupancy::new(inputs.world.city),
            events: Vec::new(),
            incidents: Vec::new(),
            samples: Vec::new(),
            recording: true,
        };
        sim.initialize();
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.start + (self.tick - self.base_tick) as f64 * self.cfg.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn presence(&self, person: u32) -> &Presence {
        &self.people[person as usize].presence
    }

    pub fn status(&self, person: u32) -> PersonStatus {
        let r = &self.people[person as usize];
        let n = self.inputs.agendas.agendas[person as usize].tasks.len();
        PersonStatus { task: (r.cur < n).then_some(r.cur), started: r.started, phase: r.phase.name() }
    }

    pub fn agents(&self) -> impl Iterator<Item = (u32, &Agent)> + '_ {
        self.people.iter().enumerate().filter_map(|(i, r)| r.presence.agent().map(|a| (i as u32, a)))
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.occupancy
    }

    pub fn events(&self) -> &[BuildingEvent] {
        &self.events
    }

    pub fn incidents(&self) -> &[String] {
        &self.incidents
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn take_samples(&mut self) -> Vec<Sample> {
        std::mem::take(&mut self.samples)
    }

    /// Turns trajectory recording on or off.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    fn world(&self) -> World<'w> {
        self.inputs.world
    }

    fn incident(&mut self, person: usize, msg: impl std::fmt::Display) {
        let line = format!("t={:.2} person {person}: {msg}", self.time());
        log::info!("{line}");
        self.incidents.push(line);
    }

    fn speed(&self, person: usize) -> f64 {
        self.world().population.persons[person].walk_speed
    }

    fn home(&self, person: usize) -> u32 {
        self.world().population.persons[person].home
    }

    fn entrance(b: u32) -> Endpoint {
        Endpoint::Attach(Attachment::Entrance { building: b, index: 0 })
    }

    fn push_event(&mut self, person: usize, building: u32, kind: EventKind) {
        self.events.push(BuildingEvent { time: self.time(), person: person as u32, building, kind });
    }

    // ----- initialization -----

    /// Places every person according to the agenda task at the current time.
    fn initialize(&mut self) {
        let t = self.time();
        self.occupancy.clear();
        let world = self.world();
        let agendas = self.inputs.agendas;
        let mut leaders = Vec::new();
        for i in 0..self.people.len() {
            let agenda = &agendas.agendas[i];
            let home = self.home(i);
            let r = &mut self.people[i];
            r.exec = None;
            r.started = t;
            let Some(idx) = agenda.index_at(t) else {
                r.cur = agenda.tasks.len();
                r.phase = Phase::Finished;
                r.presence = Presence::Inside(home);
                self.push_event(i, home, EventKind::Init);
                continue;
            };
            r.cur = idx;
            let task = &agenda.tasks[idx];
            r.started = task.t0;
            let mut placed = false;
            if let (true, Some(target)) = (task.kind.is_travel(), task.kind.building()) {
                let source = idx.checked_sub(1).and_then(|j| agenda.tasks[j].kind.building()).unwrap_or(home);
                if source != target {
                    if let Some(path) = world.graph.shortest_path(Self::entrance(source), Self::entrance(target)) {
                        let frac = ((t - task.t0) / (task.t1 - task.t0)).clamp(0.0, 1.0);
                        let progress = frac * path.length;
                        let pos = path.position_at_distance(progress);
                        r.presence = Presence::Agent(Agent { pos, route: Some(Route { path, progress }), state: AgentState::Walking });
                        r.phase = Phase::Travel { building: target, must_arrive: true };
                        if let TaskKind::GroupAccompany { members, .. } = &task.kind {
                            leaders.push((i, task.group, members.clone(), target));
                        }
                        placed = true;
                    }
                }
            }
            if !placed {
                let b = task.kind.building().unwrap_or(home);
                r.presence = Presence::Inside(b);
                r.phase = match task.kind {
                    TaskKind::StayInside { .. } | TaskKind::GoToBuilding { .. } | TaskKind::GroupAccompany { .. } => Phase::Settled,
                    TaskKind::DelayedRule { .. } | TaskKind::FloatingSlot => Phase::Pending,
                };
                self.push_event(i, b, EventKind::Init);
            }
        }
        // travelling groups are re-formed around their leader
        for (leader, group, members, building) in leaders {
            let Some(group) = group else { continue };
            let Presence::Agent(lead_agent) = self.people[leader].presence.clone() else { continue };
            let mut carried = Vec::new();
            for m in members {
                let mi = m as usize;
                let r = &self.people[mi];
                let agenda = &agendas.agendas[mi];
                let same = agenda.tasks.get(r.cur).is_some_and(|task| task.group == Some(group));
                if same && matches!(r.presence, Presence::Agent(_)) {
                    carried.push(m);
                }
            }
            let speed = carried.iter().map(|&m| self.speed(m as usize)).fold(self.speed(leader), f64::min);
            for &m in &carried {
                let r = &mut self.people[m as usize];
                r.presence = Presence::Agent(Agent { pos: lead_agent.pos, route: None, state: AgentState::Grouped(group) });
                r.phase = Phase::Carried { leader: leader as u32 };
            }
            if let Presence::Agent(a) = &mut self.people[leader].presence {
                a.state = AgentState::Grouped(group);
            }
            self.people[leader].phase = Phase::Lead(Lead { group, building, members: carried, speed, stage: LeadStage::Escort });
        }
    }

    /// Moves the clock by `delta` seconds and re-places everyone.
    pub fn time_jump(&mut self, delta: f64) -> Result<(), SimError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(SimError::BadJump(delta));
        }
        let mut t = self.time() + delta.rem_euclid(DAY);
        if t >= DAY {
            t -= DAY;
        }
        self.start = t;
        self.base_tick = self.tick;
        for r in &mut self.people {
            r.exec = None;
        }
        self.initialize();
        Ok(())
    }

    // ----- stepping -----

    /// Runs until the clock reaches `end`.
    pub fn run_until(&mut self, end: f64) {
        while self.time() < end - EPS {
            self.step();
        }
    }

    /// Advances every person by one tick, records samples, then moves the clock.
    pub fn step(&mut self) {
        for i in 0..self.people.len() {
            self.update(i);
        }
        if self.recording && self.tick.is_multiple_of(self.cfg.sample_every()) {
            self.record();
        }
        self.tick += 1;
    }

    fn record(&mut self) {
        let time = self.time();
        for (i, r) in self.people.iter().enumerate() {
            if let Presence::Agent(a) = &r.presence {
                let task = self.inputs.agendas.agendas[i].tasks.get(r.cur).map_or("none", |t| t.kind.name());
                self.samples.push(Sample {
                    tick: self.tick,
                    time,
                    person: i as u32,
                    x: a.pos.x,
                    y: a.pos.y,
                    state: a.state.name().to_string(),
                    task: task.to_string(),
                });
            }
        }
    }

    fn update(&mut self, i: usize) {
        let now = self.time();
        let n = self.inputs.agendas.agendas[i].tasks.len();
        for _ in 0..=2 * n + 2 {
            if self.people[i].cur >= n {
                self.people[i].phase = Phase::Finished;
                break;
            }
            let t1 = self.inputs.agendas.agendas[i].tasks[self.people[i].cur].t1;
            match self.people[i].phase {
                Phase::Finished => break,
                Phase::Pending => {
                    self.activate(i);
                    continue;
                }
                _ => {}
            }
            if now >= t1 && self.finishable(i) {
                self.finish(i);
                continue;
            }
            if !self.think(i) {
                break;
            }
            self.finish(i);
        }
        self.advance(i);
    }

    fn finishable(&self, i: usize) -> bool {
        match self.people[i].phase {
            Phase::Settled | Phase::Delayed | Phase::Slot | Phase::Pending | Phase::Finished => true,
            Phase::Travel { must_arrive, .. } => !must_arrive,
            Phase::Lead(_) | Phase::Carried { .. } | Phase::Await { .. } => false,
        }
    }

    /// Ends the current task and moves to the next one.
    fn finish(&mut self, i: usize) {
        self.end_context(i);
        let r = &mut self.people[i];
        if let Presence::Agent(a) = &mut r.presence {
            a.route = None;
            a.state = AgentState::Idle;
        }
        r.cur += 1;
        r.phase = Phase::Pending;
    }

    fn end_context(&mut self, i: usize) {
        if self.people[i].exec.take().is_some() {
            self.release(i);
        }
    }

    fn release(&mut self, i: usize) {
        self.occupancy.release(i as u32);
        if let Presence::Agent(a) = &mut self.people[i].presence {
            if matches!(a.state, AgentState::Interacting(_)) {
                a.state = AgentState::Idle;
            }
        }
    }

    fn activate(&mut self, i: usize) {
        let now = self.time();
        let agendas = self.inputs.agendas;
        let agenda = &agendas.agendas[i];
        let cur = self.people[i].cur;
        let task = &agenda.tasks[cur];
        self.people[i].started = now;
        match &task.kind {
            TaskKind::StayInside { building } => self.head_to(i, *building, false),
            TaskKind::GoToBuilding { building } => {
                if let Some(group) = task.group {
                    if let Some((leader, leader_task)) = self.leader_of(i, group) {
                        if self.people[leader].cur <= leader_task {
                            self.people[i].phase = Phase::Await { leader: leader as u32, leader_task };
                            return;
                        }
                    }
                }
                self.head_to(i, *building, true)
            }
            TaskKind::GroupAccompany { members, building, .. } => {
                let group = task.group.expect("group task without id");
                self.start_lead(i, group, members.clone(), *building)
            }
            TaskKind::DelayedRule { rule, vars } => match ExecContext::start(self.inputs.rules, rule, vars, task.t1) {
                Some(ctx) => {
                    self.people[i].exec = Some(ctx);
                    self.people[i].phase = Phase::Delayed;
                }
                None => {
                    self.incident(i, format!("delayed rule `{rule}` is not defined; task skipped"));
                    self.finish(i);
                }
            },
            TaskKind::FloatingSlot => self.people[i].phase = Phase::Slot,
        }
    }

    /// Leader and task index of the accompaniment covering person `i`.
    fn leader_of(&self, i: usize, group: GroupId) -> Option<(usize, usize)> {
        let members = &self.world().population.households[group.household as usize].members;
        for &m in members {
            if m as usize == i {
                continue;
            }
            let tasks = &self.inputs.agendas.agendas[m as usize].tasks;
            if let Some(j) = tasks.iter().position(|t| t.group == Some(group) && matches!(t.kind, TaskKind::GroupAccompany { .. })) {
                return Some((m as usize, j));
            }
        }
        None
    }

    /// Where a person currently is, as a graph endpoint.
    fn endpoint(&self, i: usize) -> Endpoint {
        match &self.people[i].presence {
            Presence::Inside(b) => Self::entrance(*b),
            Presence::Agent(a) => Endpoint::Point(a.pos),
        }
    }

    /// Starts walking towards `to`; exits the current building first.
    /// Returns whether the person is already there.
    fn route_to(&mut self, i: usize, to: Endpoint, state: AgentState) -> Result<bool, String> {
        let from = self.endpoint(i);
        let path = self.world().graph.shortest_path(from, to).ok_or_else(|| format!("no path to {to:?}"))?;
        if let Presence::Inside(b) = self.people[i].presence {
            self.push_event(i, b, EventKind::Exit);
            self.people[i].presence = Presence::Agent(Agent { pos: path.start(), route: None, state: AgentState::Idle });
        }
        let Presence::Agent(a) = &mut self.people[i].presence else { unreachable!() };
        if path.length <= EPS {
            a.route = None;
            a.state = if state == AgentState::Walking { AgentState::Idle } else { state };
            return Ok(true);
        }
        a.route = Some(Route { path, progress: 0.0 });
        a.state = state;
        Ok(false)
    }

    fn head_to(&mut self, i: usize, building: u32, must_arrive: bool) {
        if self.people[i].presence == Presence::Inside(building) {
            self.people[i].phase = Phase::Settled;
            return;
        }
        match self.route_to(i, Self::entrance(building), AgentState::Walking) {
            Ok(true) => self.enter(i, building),
            Ok(false) => self.people[i].phase = Phase::Travel { building, must_arrive },
            Err(e) => {
                self.incident(i, format!("{e}; task skipped"));
                self.finish(i);
            }
        }
    }

    fn enter(&mut self, i: usize, building: u32) {
        self.push_event(i, building, EventKind::Enter);
        self.people[i].presence = Presence::Inside(building);
        self.people[i].phase = Phase::Settled;
    }

    // ----- groups -----

    fn group_task(&self, m: usize, group: GroupId) -> Option<usize> {
        self.inputs.agendas.agendas[m].tasks.iter().position(|t| t.group == Some(group))
    }

    fn start_lead(&mut self, i: usize, group: GroupId, members: Vec<u32>, building: u32) {
        let eligible: Vec<u32> = members
            .into_iter()
            .filter(|&m| {
                let m = m as usize;
                self.group_task(m, group).is_some_and(|j| self.people[m].cur <= j) && !matches!(self.people[m].phase, Phase::Carried { .. })
            })
            .collect();
        let Some(&first) = eligible.first() else {
            self.head_to(i, building, true);
            return;
        };
        let at = match &self.people[first as usize].presence {
            Presence::Inside(b) => Rendezvous::Building(*b),
            Presence::Agent(a) => Rendezvous::Point(a.pos),
        };
        let lead = Lead { group, building, members: eligible, speed: self.speed(i), stage: LeadStage::Fetch(at.clone()) };
        self.people[i].phase = Phase::Lead(lead);
        let here = match (&self.people[i].presence, &at) {
            (Presence::Inside(b), Rendezvous::Building(x)) => b == x,
            (Presence::Agent(a), Rendezvous::Point(p)) => a.pos.distance(*p) <= self.cfg.agent_radius,
            _ => false,
        };
        if here {
            self.pickup(i);
            return;
        }
        let to = match at {
            Rendezvous::Building(b) => Self::entrance(b),
            Rendezvous::Point(p) => Endpoint::Point(p),
        };
        match self.route_to(i, to, AgentState::Walking) {
            Ok(true) => self.pickup(i),
            Ok(false) => {}
            Err(e) => {
                self.incident(i, format!("{e}; travelling alone"));
                self.head_to(i, building, true);
            }
        }
    }

    /// Collects the members waiting at the rendezvous and sets off.
    fn pickup(&mut self, i: usize) {
        let now = self.time();
        let Phase::Lead(mut lead) = self.people[i].phase.clone() else { return };
        let LeadStage::Fetch(at) = &lead.stage else { return };
        let here: Vec<u32> = lead
            .members
            .iter()
            .copied()
            .filter(|&m| {
                let m = m as usize;
                let waiting = self.group_task(m, lead.group).is_some_and(|j| self.people[m].cur <= j);
                waiting
                    && match (&self.people[m].presence, at) {
                        (Presence::Inside(b), Rendezvous::Building(x)) => b == x,
                        (Presence::Agent(a), _) => match &self.people[i].presence {
                            Presence::Agent(l) => a.pos.distance(l.pos) <= self.cfg.agent_radius,
                            Presence::Inside(b) => {
                                let e = self.world().city.buildings[*b as usize].primary_entrance();
                                a.pos.distance(e) <= self.cfg.agent_radius
                            }
                        },
                        _ => false,
                    }
            })
            .collect();
        // everyone already inside the destination: nothing to walk
        if self.people[i].presence == Presence::Inside(lead.building) {
            for &m in &here {
                let mi = m as usize;
                self.end_context(mi);
                let j = self.group_task(mi, lead.group).unwrap();
                let r = &mut self.people[mi];
                r.cur = j;
                r.started = now;
                if r.presence != Presence::Inside(lead.building) {
                    self.enter(mi, lead.building);
                }
                self.people[mi].phase = Phase::Settled;
            }
            self.people[i].phase = Phase::Settled;
            return;
        }
        match self.route_to(i, Self::entrance(lead.building), AgentState::Grouped(lead.group)) {
            Err(e) => {
                self.incident(i, format!("{e}; group dissolved"));
                self.finish(i);
            }
            Ok(arrived) => {
                let pos = self.people[i].presence.agent().unwrap().pos;
                for &m in &here {
                    let mi = m as usize;
                    self.end_context(mi);
                    if let Presence::Inside(b) = self.people[mi].presence {
                        self.push_event(mi, b, EventKind::Exit);
                    }
                    let j = self.group_task(mi, lead.group).unwrap();
                    let r = &mut self.people[mi];
                    r.cur = j;
                    r.started = now;
                    r.presence = Presence::Agent(Agent { pos, route: None, state: AgentState::Grouped(lead.group) });
                    r.phase = Phase::Carried { leader: i as u32 };
                }
                lead.speed = here.iter().map(|&m| self.speed(m as usize)).fold(self.speed(i), f64::min);
                lead.members = here;
                lead.stage = LeadStage::Escort;
                self.people[i].phase = Phase::Lead(lead);
                if arrived {
                    self.arrive_group(i);
                }
            }
        }
    }

    fn arrive_group(&mut self, i: usize) {
        let Phase::Lead(lead) = self.people[i].phase.clone() else { return };
        self.enter(i, lead.building);
        for m in lead.members {
            self.enter(m as usize, lead.building);
        }
    }

    // ----- per-tick behaviour -----

    /// Phase logic that does not move anyone. Returns true when the current
    /// task is over early.
    fn think(&mut self, i: usize) -> bool {
        match self.people[i].phase.clone() {
            Phase::Delayed => self.run_context(i),
            Phase::Slot => {
                self.run_slot(i);
                false
            }
            Phase::Await { leader, leader_task } => {
                let l = &self.people[leader as usize];
                let waiting = l.cur < leader_task
                    || (l.cur == leader_task
                        && match &l.phase {
                            Phase::Pending => true,
                            Phase::Lead(lead) => matches!(lead.stage, LeadStage::Fetch(_)) && lead.members.contains(&(i as u32)),
                            _ => false,
                        });
                if !waiting {
                    let agendas = self.inputs.agendas;
                    let task = &agendas.agendas[i].tasks[self.people[i].cur];
                    let b = task.kind.building().unwrap_or(self.home(i));
                    self.head_to(i, b, true);
                }
                false
            }
            _ => false,
        }
    }

    fn run_slot(&mut self, i: usize) {
        let now = self.time();
        let t1 = self.inputs.agendas.agendas[i].tasks[self.people[i].cur].t1;
        for _ in 0..=self.people[i].pool.len() + 1 {
            if self.people[i].exec.is_some() {
                if !self.run_context(i) {
                    return;
                }
                continue;
            }
            let remaining = t1 - now;
            let pool = &self.people[i].pool;
            let top = pool.iter().filter(|e| e.max_duration <= remaining + EPS).map(|e| e.priority).fold(f64::NEG_INFINITY, f64::max);
            let candidates: Vec<usize> =
                (0..pool.len()).filter(|&k| pool[k].max_duration <= remaining + EPS && pool[k].priority == top).collect();
            if candidates.is_empty() {
                self.people[i].phase = Phase::Settled;
                return;
            }
            let k = if candidates.len() == 1 {
                candidates[0]
            } else {
                use rand::Rng;
                candidates[self.people[i].rng.gen_range(0..candidates.len())]
            };
            let entry = self.people[i].pool.remove(k);
            let end = (now + entry.max_duration).min(t1);
            match ExecContext::start(self.inputs.rules, &entry.rule, &entry.vars, end) {
                Some(ctx) => self.people[i].exec = Some(ctx),
                None => self.incident(i, format!("floating task `{}` is not defined", entry.rule)),
            }
        }
    }

    /// Ticks the person's context. Returns true when it has ended.
    fn run_context(&mut self, i: usize) -> bool {
        let now = self.time();
        let Some(mut ctx) = self.people[i].exec.take() else { return true };
        if now >= ctx.slot_end {
            self.release(i);
            return true;
        }
        let ready = match ctx.block {
            None => true,
            Some(Block::Until(t)) => now + EPS >= t,
            Some(Block::Arrival) => self.people[i].presence.agent().is_none_or(|a| a.route.is_none()),
            Some(Block::SlotEnd) => false,
        };
        if !ready {
            self.people[i].exec = Some(ctx);
            return false;
        }
        if ctx.block == Some(Block::Arrival) {
            if let Presence::Agent(a) = &mut self.people[i].presence {
                if a.state == AgentState::Walking {
                    a.state = AgentState::Idle;
                }
            }
        }
        ctx.block = None;
        let world = self.world();
        let person = &world.population.persons[i];
        loop {
            let origin = match &self.people[i].presence {
                Presence::Agent(a) => a.pos,
                Presence::Inside(b) => world.city.buildings[*b as usize].primary_entrance(),
            };
            let flow = {
                let r = &mut self.people[i];
                let mut env = SimEnv {
                    world,
                    household: person.household,
                    person: person.id,
                    focus: Some(person.id),
                    vars: Default::default(),
                    rng: &mut r.rng,
                    occupancy: &mut self.occupancy,
                    origin,
                };
                ctx.run(&mut env, self.inputs.rules, now, self.cfg.max_depth)
            };
            let result = match flow {
                Err(e) => Err(format!("rule `{}` stopped: {e}", ctx.rule)),
                Ok(Flow::Done) => {
                    self.release(i);
                    return true;
                }
                Ok(Flow::Blocked) => {
                    self.people[i].exec = Some(ctx);
                    return false;
                }
                Ok(Flow::Request(Request::GoToZone, kind)) => self.go_to_zone(i, kind.as_deref().unwrap_or_default()),
                Ok(Flow::Request(Request::GoToObject(o), _)) => {
                    self.route_to(i, Endpoint::Attach(Attachment::Object { object: o }), AgentState::Walking)
                }
                Ok(Flow::Request(Request::Interact { object }, verb)) => {
                    self.interact(i, object, verb.as_deref());
                    Ok(true)
                }
            };
            match result {
                Ok(true) => continue,
                Ok(false) => {
                    ctx.block = Some(Block::Arrival);
                    self.people[i].exec = Some(ctx);
                    return false;
                }
                Err(e) => {
                    self.incident(i, e);
                    self.release(i);
                    return true;
                }
            }
        }
    }

    fn go_to_zone(&mut self, i: usize, kind: &str) -> Result<bool, String> {
        let world = self.world();
        let from = self.endpoint(i);
        let mut best: Option<(f64, Attachment)> = None;
        for z in world.city.zones.iter().filter(|z| z.kind == kind) {
            for k in 0..z.entry_points.len() {
                let a = Attachment::ZoneEntry { zone: z.id, index: k as u32 };
                if let Some(d) = world.graph.distance(from, Endpoint::Attach(a)) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, a));
                    }
                }
            }
        }
        let (_, a) = best.ok_or_else(|| format!("no reachable zone of type `{kind}`"))?;
        self.route_to(i, Endpoint::Attach(a), AgentState::Walking)
    }

    fn interact(&mut self, i: usize, object: u32, verb: Option<&str>) {
        let city = self.world().city;
        let obj = &city.objects[object as usize];
        if let Some(v) = verb {
            if !obj.interactions.iter().any(|x| x == v) {
                self.incident(i, format!("object {object} does not offer `{v}`"));
                return;
            }
        }
        let range = self.cfg.interaction_range;
        let Presence::Agent(a) = &self.people[i].presence else { return };
        if a.pos.distance(obj.position) > range {
            log::debug!("person {i} too far from object {object} to interact");
            return;
        }
        if self.occupancy.hold(object, i as u32) {
            if let Presence::Agent(a) = &mut self.people[i].presence {
                a.state = AgentState::Interacting(object);
            }
        }
    }

    /// Walks the person's agent, and its group when leading.
    fn advance(&mut self, i: usize) {
        let speed = match &self.people[i].phase {
            Phase::Lead(l) if l.stage == LeadStage::Escort => l.speed,
            Phase::Carried { .. } => return,
            _ => self.speed(i),
        };
        let step = speed * self.cfg.dt;
        let Presence::Agent(a) = &mut self.people[i].presence else { return };
        let Some(route) = &mut a.route else { return };
        route.progress = (route.progress + step).min(route.path.length);
        a.pos = route.path.position_at_distance(route.progress);
        let arrived = route.progress >= route.path.length - EPS;
        let pos = a.pos;
        if arrived {
            a.route = None;
        }
        if let Phase::Lead(l) = self.people[i].phase.clone() {
            if l.stage == LeadStage::Escort {
                for &m in &l.members {
                    if let Presence::Agent(ma) = &mut self.people[m as usize].presence {
                        ma.pos = pos;
                    }
                }
            }
        }
        if !arrived {
            return;
        }
        match self.people[i].phase.clone() {
            Phase::Travel { building, .. } => self.enter(i, building),
            Phase::Lead(l) => match l.stage {
                LeadStage::Fetch(_) => self.pickup(i),
                LeadStage::Escort => self.arrive_group(i),
            },
            Phase::Delayed | Phase::Slot => {
                if let Presence::Agent(a) = &mut self.people[i].presence {
                    a.state = AgentState::Idle;
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests;
