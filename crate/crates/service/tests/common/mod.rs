#![allow(dead_code)]

use std::collections::HashSet;

use histgeo::fuzzy_time::temporal_distance;
use histgeo::gazetteer::{GazetteerRegistry, NewObject, NewProcess, NewSource, ObjectId, ScaleClass};
use histgeo::scoring::{scale_distance, ScoringExpression};
use histgeo::text::building_number_distance;
use histgeo::{normalize, Coord, FuzzyPeriod, GeocodeQuery, Geometry, MetricVector};
use histgeo_service::engine::{Engine, EngineOptions};
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

pub fn period(a: f64, b: f64, c: f64, d: f64) -> FuzzyPeriod {
    FuzzyPeriod::new(a, b, c, d).unwrap()
}

pub fn random_period(rng: &mut StdRng) -> FuzzyPeriod {
    let start = rng.random_range(1780.0..1900.0);
    let rise = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..10.0) };
    let core = rng.random_range(0.0..30.0);
    let fall = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..10.0) };
    period(start, start + rise, start + rise + core, start + rise + core + fall)
}

pub fn random_address(rng: &mut StdRng) -> String {
    let street = STREETS[rng.random_range(0..STREETS.len())];
    if rng.random_bool(0.8) {
        format!("{} {street}", rng.random_range(1..80))
    } else {
        street.to_string()
    }
}

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

/// Objects for a random registry: precise point addresses in two
/// gazetteers, rough street polylines in a third.
pub fn random_objects(rng: &mut StdRng, n: usize, sources: [histgeo::gazetteer::SourceId; 2], processes: [histgeo::gazetteer::ProcessId; 2], rough: bool) -> Vec<NewObject> {
    (0..n)
        .map(|_| {
            let (name, geometry) = if rough {
                let street = STREETS[rng.random_range(0..STREETS.len())].to_string();
                let (x, y) = (rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0));
                let line = vec![Coord::new(x, y), Coord::new(x + rng.random_range(10.0..400.0), y + rng.random_range(-50.0..50.0))];
                (street, Geometry::polyline(line).unwrap())
            } else {
                (random_address(rng), Geometry::point(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)))
            };
            let name = if rng.random_bool(0.3) { perturb(rng, &name, 2) } else { name };
            let mut o = NewObject::new(&name, sources[rng.random_range(0..2)], processes[rng.random_range(0..2)], geometry);
            if rng.random_bool(0.4) {
                o.period = Some(random_period(rng));
            }
            if rng.random_bool(0.3) {
                o.accuracy = Some(rng.random_range(0.5..30.0));
            }
            o
        })
        .filter(|o| !normalize(&o.historical_name).normalized.is_empty())
        .collect()
}

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
        let which = rng.random_range(0..gazetteers.len());
        let objs = random_objects(rng, batch, sources, processes, which == 2);
        r.insert_objects(gazetteers[which], objs).unwrap();
    }
    r
}

pub fn random_query(rng: &mut StdRng) -> GeocodeQuery {
    let base = random_address(rng);
    let edits = rng.random_range(0..3);
    let mut q = GeocodeQuery::new(&perturb(rng, &base, edits))
        .with_max_results(rng.random_range(1..10))
        .with_max_string_distance([0.0, 0.3, 0.5, 0.7][rng.random_range(0..4)]);
    if rng.random_bool(0.7) {
        q.period = Some(random_period(rng));
    }
    if rng.random_bool(0.3) {
        q.hint_geometry = Some(Geometry::point(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)));
    }
    q.allow_rough_fallback = rng.random_bool(0.8);
    q
}

/// pg_trgm style trigrams: words of letters and digits, padded with two
/// spaces in front and one behind.
pub fn oracle_trigrams(s: &str) -> HashSet<String> {
    let lower = s.to_lowercase();
    let mut out = HashSet::new();
    for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let padded: Vec<char> = format!("  {word} ").chars().collect();
        for w in padded.windows(3) {
            out.insert(w.iter().collect::<String>());
        }
    }
    out
}

pub fn oracle_string_distance(a: &str, b: &str) -> f64 {
    oracle_set_distance(&oracle_trigrams(a), &oracle_trigrams(b))
}

pub fn oracle_set_distance(ta: &HashSet<String>, tb: &HashSet<String>) -> f64 {
    if ta.is_empty() && tb.is_empty() {
        return 0.0;
    }
    1.0 - ta.intersection(tb).count() as f64 / ta.union(tb).count() as f64
}

fn leading_number(normalized: &str) -> Option<u32> {
    let first = normalized.split(' ').next()?;
    let digits: String = first.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub id: ObjectId,
    pub class: ScaleClass,
    pub metrics: MetricVector,
    pub score: Option<f64>,
}

struct OracleObject {
    id: ObjectId,
    class: ScaleClass,
    trigrams: HashSet<String>,
    number: Option<u32>,
    period: histgeo::FuzzyPeriod,
    s_p: f64,
    s_d: f64,
    geometry: Geometry,
}

/// Linear-scan geocoder. Effective period and accuracy come straight from
/// the source and process catalogs; per-object values are computed once.
pub struct Oracle {
    objects: Vec<OracleObject>,
}

impl Oracle {
    pub fn new(r: &GazetteerRegistry) -> Self {
        let objects = r
            .objects()
            .map(|v| {
                let o = v.object();
                let source = r.source(o.source).unwrap();
                let process = r.process(o.process).unwrap();
                let s_p = o.accuracy.unwrap_or(source.default_accuracy) + process.digitizing_precision;
                OracleObject {
                    id: o.id,
                    class: o.scale_class,
                    trigrams: oracle_trigrams(&o.normalized_name),
                    number: leading_number(&o.normalized_name),
                    period: o.period.unwrap_or(source.default_period),
                    s_p,
                    s_d: scale_distance(&o.geometry, s_p, 0.0, 200.0).unwrap(),
                    geometry: o.geometry.clone(),
                }
            })
            .collect();
        Self { objects }
    }

    /// Scores every object, then applies the threshold, the rough
    /// fallback, the ranking order and the cut.
    pub fn geocode(&self, q: &GeocodeQuery, expr: &ScoringExpression) -> Vec<OracleRow> {
        let query = normalize(&q.raw_address).normalized;
        let qn = leading_number(&query);
        let query_trigrams = oracle_trigrams(&query);
        let mut rows: Vec<OracleRow> = self
            .objects
            .iter()
            .map(|o| {
                let w_d = oracle_set_distance(&query_trigrams, &o.trigrams);
                let t_d = q.period.map_or(0.0, |p| temporal_distance(&p, &o.period));
                let (b_d, number_compared) = match (qn, o.number) {
                    (Some(a), Some(b)) => (building_number_distance(a, b), true),
                    _ => (0.0, false),
                };
                let g_d = q.hint_geometry.as_ref().map_or(0.0, |h| h.distance(&o.geometry).unwrap());
                let metrics = MetricVector {
                    w_d,
                    t_d,
                    b_d,
                    s_p: o.s_p,
                    s_d: o.s_d,
                    g_d,
                    number_compared,
                    period_compared: q.period.is_some(),
                    g_d_available: q.hint_geometry.is_some(),
                };
                OracleRow { id: o.id, class: o.class, score: expr.evaluate(&metrics).ok(), metrics }
            })
            .filter(|row| row.metrics.w_d <= q.max_string_distance)
            .collect();
        let has_precise = rows.iter().any(|row| row.class == ScaleClass::Precise);
        rows.retain(|row| row.class == ScaleClass::Precise || (!has_precise && q.allow_rough_fallback));
        rows.sort_by(|a, b| {
            let s = match (a.score, b.score) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            };
            s.then(a.metrics.w_d.total_cmp(&b.metrics.w_d))
                .then(a.metrics.t_d.total_cmp(&b.metrics.t_d))
                .then(a.id.cmp(&b.id))
        });
        rows.truncate(q.max_results);
        rows
    }
}

pub fn brute_force(r: &GazetteerRegistry, q: &GeocodeQuery, expr: &ScoringExpression) -> Vec<OracleRow> {
    Oracle::new(r).geocode(q, expr)
}

/// The "12 rue de la Vannerie" scenario: a textually exact 1810 object and
/// a temporally close 1860 "Tannerie" object, plus unrelated addresses.
pub struct Vannerie {
    pub engine: Engine,
    pub vannerie_1810: ObjectId,
    pub tannerie_1860: ObjectId,
}

pub fn vannerie() -> Vannerie {
    let mut e = Engine::in_memory(EngineOptions { sync: false, ..Default::default() });
    let atlas = e.register_source(NewSource::new("atlas_1810", period(1808.0, 1810.0, 1811.0, 1812.0), 10.0)).unwrap();
    let cadastre = e.register_source(NewSource::new("cadastre_1860", period(1858.0, 1860.0, 1861.0, 1862.0), 3.0)).unwrap();
    let manual = e.register_process(NewProcess::new("manual vectorization", 2.0)).unwrap();
    let numbers = e.create_gazetteer("paris_numbers", ScaleClass::Precise).unwrap();
    let streets = e.create_gazetteer("paris_streets", ScaleClass::Rough).unwrap();
    let ids = e
        .insert_objects(
            numbers,
            vec![
                NewObject::new("12 r. de la Vannerie Paris", atlas, manual, Geometry::point(1000.0, 1000.0))
                    .with_period(period(1810.0, 1810.0, 1811.0, 1811.0)),
                NewObject::new("12 r. de la Tannerie Paris", cadastre, manual, Geometry::point(1030.0, 990.0))
                    .with_period(period(1860.0, 1860.0, 1861.0, 1861.0)),
                NewObject::new("12 rue du Temple Paris", cadastre, manual, Geometry::point(2000.0, 400.0)),
                NewObject::new("10 r. du Temple Paris", atlas, manual, Geometry::point(2010.0, 410.0)),
                NewObject::new("3 rue de la Paix Paris", cadastre, manual, Geometry::point(300.0, 2500.0)),
            ],
        )
        .unwrap();
    e.insert_objects(
        streets,
        vec![
            NewObject::new(
                "rue de Rivoli Paris",
                cadastre,
                manual,
                Geometry::polyline(vec![Coord::new(0.0, 0.0), Coord::new(800.0, 40.0)]).unwrap(),
            ),
            NewObject::new(
                "rue du Temple Paris",
                atlas,
                manual,
                Geometry::polyline(vec![Coord::new(1900.0, 300.0), Coord::new(2100.0, 600.0)]).unwrap(),
            ),
        ],
    )
    .unwrap();
    Vannerie { engine: e, vannerie_1810: ids[0], tannerie_1860: ids[1] }
}
