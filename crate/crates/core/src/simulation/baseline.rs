//! A random-walk driver without agendas, for contrast with the simulation.
//!
//! Each person starts at home and then hops between uniformly random
//! buildings at random times, with no memory of where they are.

use rand::Rng;

use super::{BuildingEvent, EventKind};
use crate::agendagen::DAY;
use crate::citygen::SemanticCity;
use crate::population::Population;
use crate::rng::{substream, Stream};

pub fn random_walk_events(city: &SemanticCity, population: &Population, seed: u64, hops: u32) -> Vec<BuildingEvent> {
    let mut events = Vec::new();
    let n = city.buildings.len() as u32;
    if n == 0 {
        return events;
    }
    for p in &population.persons {
        let mut rng = substream(seed, Stream::Baseline, p.id as u64);
        events.push(BuildingEvent { time: 0.0, person: p.id, building: p.home, kind: EventKind::Init });
        let mut times: Vec<f64> = (0..hops).map(|_| rng.gen_range(0.0..DAY)).collect();
        times.sort_by(f64::total_cmp);
        for time in times {
            let from = rng.gen_range(0..n);
            let to = rng.gen_range(0..n);
            events.push(BuildingEvent { time, person: p.id, building: from, kind: EventKind::Exit });
            events.push(BuildingEvent { time, person: p.id, building: to, kind: EventKind::Enter });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.person.cmp(&b.person)));
    events
}
