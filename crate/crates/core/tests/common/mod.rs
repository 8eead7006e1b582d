#![allow(dead_code)]

use histgeo::gazetteer::{GazetteerRegistry, NewObject, NewProcess, NewSource, ScaleClass};
use histgeo::{Coord, FuzzyPeriod, Geometry};
use rand::rngs::StdRng;
use rand::Rng;

pub const STREETS: &[&str] = &[
    "rue du temple",
    "rue de la paix",
    "rue de la vannerie",
    "rue de la tannerie",
    "rue saint honore",
    "boulevard haussmann",
    "rue des blancs manteaux",
    "quai de la megisserie",
    "place des vosges",
    "rue vieille du temple",
    "rue de rivoli",
    "rue des ecoles",
];

pub fn random_period(rng: &mut StdRng) -> FuzzyPeriod {
    let start = rng.random_range(1780.0..1900.0);
    let rise = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..10.0) };
    let core = rng.random_range(0.0..30.0);
    let fall = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..10.0) };
    FuzzyPeriod::new(start, start + rise, start + rise + core, start + rise + core + fall).unwrap()
}

pub fn random_address(rng: &mut StdRng) -> String {
    let street = STREETS[rng.random_range(0..STREETS.len())];
    if rng.random_bool(0.8) {
        format!("{} {street}", rng.random_range(1..80))
    } else {
        street.to_string()
    }
}

/// Random character edits on a string.
pub fn perturb(rng: &mut StdRng, s: &str, edits: usize) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let letters: Vec<char> = "abcdefghijklmnopqrstuvwxyz ".chars().collect();
    for _ in 0..edits {
        let c = letters[rng.random_range(0..letters.len())];
        match rng.random_range(0..3) {
            0 if !chars.is_empty() => {
                let i = rng.random_range(0..chars.len());
                chars[i] = c;
            }
            1 if chars.len() > 1 => {
                chars.remove(rng.random_range(0..chars.len()));
            }
            _ => chars.insert(rng.random_range(0..=chars.len()), c),
        }
    }
    chars.into_iter().collect()
}

/// A registry with two sources, two processes, precise and rough gazetteers.
pub fn random_registry(rng: &mut StdRng, objects: usize) -> GazetteerRegistry {
    let mut r = GazetteerRegistry::default();
    let sources = [
        r.register_source(NewSource::new("atlas", random_period(rng), 5.0)).unwrap(),
        r.register_source(NewSource::new("cadastre", random_period(rng), 20.0)).unwrap(),
    ];
    let processes = [
        r.register_process(NewProcess::new("manual", 5.0)).unwrap(),
        r.register_process(NewProcess::new("vectorized", 1.5)).unwrap(),
    ];
    let gazetteers = [
        r.create_gazetteer("numbers_a", ScaleClass::Precise).unwrap(),
        r.create_gazetteer("numbers_b", ScaleClass::Precise).unwrap(),
        r.create_gazetteer("streets", ScaleClass::Rough).unwrap(),
    ];
    let mut remaining = objects;
    while remaining > 0 {
        let batch = remaining.min(rng.random_range(1..200));
        remaining -= batch;
        let g = gazetteers[rng.random_range(0..gazetteers.len())];
        let rough = g == gazetteers[2];
        let objs = (0..batch)
            .map(|_| {
                let (name, geometry) = if rough {
                    let street = STREETS[rng.random_range(0..STREETS.len())].to_string();
                    let x = rng.random_range(0.0..5000.0);
                    let y = rng.random_range(0.0..5000.0);
                    let line = vec![Coord::new(x, y), Coord::new(x + rng.random_range(10.0..400.0), y + rng.random_range(-50.0..50.0))];
                    (street, Geometry::polyline(line).unwrap())
                } else {
                    let p = Geometry::point(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0));
                    (random_address(rng), p)
                };
                let name = if rng.random_bool(0.3) { perturb(rng, &name, 2) } else { name };
                let mut o = NewObject::new(
                    &name,
                    sources[rng.random_range(0..2)],
                    processes[rng.random_range(0..2)],
                    geometry,
                );
                if rng.random_bool(0.4) {
                    o.period = Some(random_period(rng));
                }
                if rng.random_bool(0.3) {
                    o.accuracy = Some(rng.random_range(0.0..30.0));
                }
                o
            })
            .filter(|o| !histgeo::normalize(&o.historical_name).normalized.is_empty())
            .collect();
        r.insert_objects(g, objs).unwrap();
    }
    r
}
