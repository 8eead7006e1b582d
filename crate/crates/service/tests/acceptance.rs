//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force, oracle_string_distance, Oracle, perturb, random_query, random_registry};
use histgeo::fuzzy_time::{parse_fuzzy_date, temporal_distance, FuzzyPeriod};
use histgeo::gazetteer::{GazetteerRegistry, NewObject, NewProcess, NewSource, ObjectId, ScaleClass, EDIT_GAZETTEER, EDIT_PROCESS};
use histgeo::geocoder::{evaluate_against_ground_truth, geocode, BatchInput, BatchReport, EvaluatedRow, GeocoderConfig, RowStatus, TruthRow};
use histgeo::georef::{fit_affine, fit_polynomial, fit_tps, residuals, ControlPoint, Transform};
use histgeo::scoring::DEFAULT_EXPRESSION;
use histgeo::text::{building_number_distance, string_distance};
use histgeo::{normalize, Coord, GeocodeQuery, Geometry, ScoringExpression};
use histgeo_service::engine::{object_hash, status_of, EditRequest, Engine, EngineError, EngineOptions, PersistRow, QueryEcho, SetKind};
use histgeo_service::journal::ReplayReport;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Temporal distance

fn random_trapezoid(rng: &mut StdRng) -> FuzzyPeriod {
    let mut v: Vec<f64> = (0..4).map(|_| rng.random_range(1750.0..1950.0)).collect();
    v.sort_by(f64::total_cmp);
    match rng.random_range(0..5) {
        0 => v[1] = v[0],
        1 => v[3] = v[2],
        2 => {
            v[0] = v[0].floor();
            v[1] = v[0];
            v[2] = v[0] + 1.0;
            v[3] = v[2];
        }
        _ => {}
    }
    v.sort_by(f64::total_cmp);
    FuzzyPeriod::new(v[0], v[1], v[2], v[3]).unwrap()
}

fn membership(p: &FuzzyPeriod, t: f64) -> f64 {
    let [a, b, c, d] = p.breakpoints();
    if t <= a || t >= d {
        if (b == a && t == a) || (c == d && t == d) {
            1.0
        } else {
            0.0
        }
    } else if t < b {
        (t - a) / (b - a)
    } else if t <= c {
        1.0
    } else {
        (d - t) / (d - c)
    }
}

/// Composite Simpson rule on each interval between consecutive knots.
fn simpson(knots: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 20_000;
    let mut knots = knots.to_vec();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / N as f64;
        let mut s = f(lo + 1e-12 * h) + f(hi - 1e-12 * h);
        for i in 1..N {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        total += s * h / 3.0;
    }
    total
}

fn temporal_oracle(q: &FuzzyPeriod, c: &FuzzyPeriod) -> f64 {
    let (qb, cb) = (q.breakpoints(), c.breakpoints());
    let area = simpson(&qb, |t| membership(q, t));
    let mut knots = qb.to_vec();
    knots.extend(cb);
    let lo = qb[0].max(cb[0]);
    let hi = qb[3].min(cb[3]);
    let inter = if hi > lo {
        let inner: Vec<f64> = knots.into_iter().filter(|k| *k >= lo && *k <= hi).collect();
        simpson(&inner, |t| membership(q, t).min(membership(c, t)))
    } else {
        0.0
    };
    // Both polygons rest on the membership-0 axis, so the closest points
    // are the facing support ends.
    let gap = (cb[0] - qb[3]).max(qb[0] - cb[3]).max(0.0);
    gap + area - inter
}

fn temporal() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xa11ce);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (q, c) = (random_trapezoid(&mut rng), random_trapezoid(&mut rng));
        let (got, want) = (temporal_distance(&q, &c), temporal_oracle(&q, &c));
        worst = worst.max((got - want).abs());
        check((got - want).abs() < 1e-3, || format!("{q} vs {c}: {got} != {want}"))?;
    }
    let mut worst_self: f64 = 0.0;
    for _ in 0..100 {
        let p = random_trapezoid(&mut rng);
        worst_self = worst_self.max(temporal_distance(&p, &p).abs());
    }
    check(worst_self < 1e-9, || format!("self distance {worst_self}"))?;
    let a = FuzzyPeriod::new(1800.0, 1800.0, 1810.0, 1810.0).unwrap();
    let b = FuzzyPeriod::new(1800.0, 1800.0, 1805.0, 1805.0).unwrap();
    let pair = (temporal_distance(&a, &b), temporal_distance(&b, &a));
    check((pair.0 - 5.0).abs() < 1e-9 && pair.1.abs() < 1e-9, || format!("asymmetry pair {pair:?}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("500 pairs max error {worst:.2e}, self max {worst_self:.1e}, pair ({}, {}), {secs:.2} s", pair.0, pair.1))
}

// Trigram distance

fn random_text(rng: &mut StdRng) -> String {
    const ALPHABET: &[&str] = &["a", "e", "r", "u", "t", "n", "É", "é", "ß", "ç", "1", "2", "7", " ", " ", "-", "'", ".", ",", "R", "Q"];
    let len = rng.random_range(0..25);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn trigrams() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7219);
    let mut nonzero = 0;
    for i in 0..1000 {
        let (a, b) = if i % 2 == 0 {
            (random_text(&mut rng), random_text(&mut rng))
        } else {
            let a = common::random_address(&mut rng);
            let edits = rng.random_range(0..6);
            let b = perturb(&mut rng, &a, edits);
            (a, b)
        };
        let (got, want) = (string_distance(&a, &b), oracle_string_distance(&a, &b));
        check(got.to_bits() == want.to_bits(), || format!("{a:?} / {b:?}: {got} != {want}"))?;
        if got > 0.0 && got < 1.0 {
            nonzero += 1;
        }
    }
    let n = |s: &str| normalize(s).normalized;
    let near = string_distance(&n("12 rue du temple"), &n("10 rue du temple"));
    let far = string_distance(&n("12 rue du temple"), &n("12 rue de la paix"));
    check(near < far, || format!("ordering claim fails: {near} >= {far}"))?;
    Ok(format!("1000 pairs exact ({nonzero} partial overlaps); d(12 temple, 10 temple) = {near:.3} < d(12 temple, 12 paix) = {far:.3}"))
}

// Building numbers

fn building_numbers() -> Outcome {
    for q in 0u32..=200 {
        for c in 0u32..=200 {
            let diff = (i64::from(q) - i64::from(c)).abs() as f64;
            let want = if (q + c) % 2 == 0 { diff } else { diff + 10.0 };
            let got = building_number_distance(q, c);
            check(got == want, || format!("b({q}, {c}) = {got}, expected {want}"))?;
        }
    }
    Ok("201 x 201 pairs exact".into())
}

// Vannerie / Tannerie

fn same_ranking(engine: &Engine, q: &GeocodeQuery, expr: &ScoringExpression) -> Result<Vec<ObjectId>, String> {
    let got = engine.geocode(q).map_err(|e| e.to_string())?;
    let want = brute_force(engine.registry(), q, expr);
    let got_ids: Vec<ObjectId> = got.iter().map(|r| r.object.id).collect();
    let want_ids: Vec<ObjectId> = want.iter().map(|r| r.id).collect();
    check(got_ids == want_ids, || format!("order {got_ids:?} != oracle {want_ids:?}"))?;
    for (g, w) in got.iter().zip(&want) {
        check(g.score.map(f64::to_bits) == w.score.map(f64::to_bits), || format!("score {:?} != oracle {:?}", g.score, w.score))?;
    }
    Ok(got_ids)
}

fn vannerie() -> Outcome {
    let v = common::vannerie();
    let q = GeocodeQuery::new("12 rue de la Vannerie, Paris")
        .with_period(parse_fuzzy_date("1854").unwrap())
        .with_max_results(5);
    let default: ScoringExpression = DEFAULT_EXPRESSION.parse().unwrap();
    let order = same_ranking(&v.engine, &q, &default)?;
    check(order.first() == Some(&v.vannerie_1810), || format!("default scoring ranks {order:?}"))?;
    check(order.contains(&v.tannerie_1860), || "1860 candidate missing".into())?;
    let t_only: ScoringExpression = "t_d".parse().unwrap();
    let order_t = same_ranking(&v.engine, &q.clone().with_scoring(t_only.clone()), &t_only)?;
    check(order_t.first() == Some(&v.tannerie_1860), || format!("t_d scoring ranks {order_t:?}"))?;
    let results = v.engine.geocode(&q).unwrap();
    let metric = |id: ObjectId| results.iter().find(|r| r.object.id == id).map(|r| r.metrics).unwrap();
    let (mv, mt) = (metric(v.vannerie_1810), metric(v.tannerie_1860));
    Ok(format!(
        "default: 1810 first (w_d {:.3}, t_d {:.1}); t_d: 1860 first (w_d {:.3}, t_d {:.1}); both match brute force",
        mv.w_d, mv.t_d, mt.w_d, mt.t_d
    ))
}

// Index / oracle equivalence

fn index_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x1dec5);
    let expressions: Vec<ScoringExpression> = [DEFAULT_EXPRESSION, "100*w_d", "t_d + 2*b_d - w_d*s_d", "greatest(w_d, 0.01*g_d) / (1 + s_p)", "ln(b_d) + w_d"]
        .iter()
        .map(|e| e.parse().unwrap())
        .collect();
    let config = GeocoderConfig::default();
    let (mut queries, mut returned, mut objects) = (0, 0, 0);
    for _ in 0..50 {
        let n = rng.random_range(1..=1000);
        let registry = random_registry(&mut rng, n);
        objects += registry.len();
        let oracle = Oracle::new(&registry);
        for _ in 0..20 {
            let expr = &expressions[rng.random_range(0..expressions.len())];
            let q = random_query(&mut rng).with_scoring(expr.clone());
            let got = geocode(&q, &registry, &config).map_err(|e| e.to_string())?;
            let want = oracle.geocode(&q, expr);
            check(got.len() == want.len(), || format!("{:?}: {} results, oracle {}", q.raw_address, got.len(), want.len()))?;
            for (g, w) in got.iter().zip(&want) {
                check(g.object.id == w.id, || format!("{:?}: {:?} != oracle {:?}", q.raw_address, g.object.id, w.id))?;
                check(g.score.map(f64::to_bits) == w.score.map(f64::to_bits), || {
                    format!("{:?}: score {:?} != oracle {:?}", q.raw_address, g.score, w.score)
                })?;
            }
            queries += 1;
            returned += got.len();
        }
    }
    Ok(format!("50 registries ({objects} objects), {queries} queries, {returned} ranked results identical"))
}

// Georeferencing

fn random_points(rng: &mut StdRng, n: usize) -> Vec<Coord> {
    (0..n).map(|_| Coord::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))).collect()
}

fn coefficients(t: &Transform) -> Vec<f64> {
    match t {
        Transform::Affine { x, y } => x.iter().chain(y).copied().collect(),
        Transform::Polynomial { x, y, .. } => x.iter().chain(y).copied().collect(),
        _ => Vec::new(),
    }
}

fn georef() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6e0);
    let (mut tps_worst, mut affine_worst, mut poly_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let n = rng.random_range(6..40);
        let (k1, k2) = (rng.random_range(1.0..20.0), rng.random_range(1.0..20.0));
        let gcps: Vec<ControlPoint> = random_points(&mut rng, n)
            .into_iter()
            .map(|p| {
                let tx = 1.1 * p.x + 0.2 * p.y + k1 * (p.y / 150.0).sin() + 30.0;
                let ty = -0.1 * p.x + 0.9 * p.y + k2 * (p.x / 90.0).cos() - 12.0;
                ControlPoint::new(p.x, p.y, tx, ty)
            })
            .collect();
        let t = fit_tps(&gcps, 0.0).map_err(|e| e.to_string())?;
        tps_worst = tps_worst.max(residuals(&t, &gcps).max);

        let coef: Vec<f64> = (0..6)
            .map(|i| if i % 3 == 0 { rng.random_range(-500.0..500.0) } else { rng.random_range(-2.0..2.0) })
            .collect();
        let exact: Vec<ControlPoint> = random_points(&mut rng, n)
            .into_iter()
            .map(|p| ControlPoint::new(p.x, p.y, coef[0] + coef[1] * p.x + coef[2] * p.y, coef[3] + coef[4] * p.x + coef[5] * p.y))
            .collect();
        let fitted = coefficients(&fit_affine(&exact).map_err(|e| e.to_string())?);
        for (f, c) in fitted.iter().zip(&coef) {
            affine_worst = affine_worst.max((f - c).abs());
        }

        let noisy: Vec<ControlPoint> = exact
            .iter()
            .map(|g| ControlPoint::new(g.source.x, g.source.y, g.target.x + rng.random_range(-3.0..3.0), g.target.y + rng.random_range(-3.0..3.0)))
            .collect();
        let a = coefficients(&fit_affine(&noisy).map_err(|e| e.to_string())?);
        let p = coefficients(&fit_polynomial(&noisy, 1).map_err(|e| e.to_string())?);
        check(a.len() == p.len(), || "order-1 polynomial has a different coefficient count".into())?;
        for (x, y) in a.iter().zip(&p) {
            poly_worst = poly_worst.max((x - y).abs());
        }
    }
    check(tps_worst < 1e-6, || format!("TPS residual {tps_worst:e}"))?;
    check(affine_worst < 1e-9, || format!("affine recovery error {affine_worst:e}"))?;
    check(poly_worst < 1e-9, || format!("order-1 vs affine {poly_worst:e}"))?;
    Ok(format!("TPS max residual {tps_worst:.1e}, affine recovery {affine_worst:.1e}, order-1 vs affine {poly_worst:.1e}"))
}

// Threshold direction

fn threshold() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x0305);
    let mut r = GazetteerRegistry::default();
    let s = r.register_source(NewSource::new("s", FuzzyPeriod::new(1850.0, 1850.0, 1870.0, 1870.0).unwrap(), 3.0)).unwrap();
    let p = r.register_process(NewProcess::new("p", 1.0)).unwrap();
    let g = r.create_gazetteer("numbers", ScaleClass::Precise).unwrap();
    let mut names: Vec<String> = (0..400).map(|_| common::random_address(&mut rng)).collect();
    names.sort();
    names.dedup();
    let objects = names.iter().map(|n| NewObject::new(n, s, p, Geometry::point(rng.random_range(0.0..1e4), rng.random_range(0.0..1e4)))).collect();
    r.insert_objects(g, objects).unwrap();
    let targets: Vec<String> = r.objects().map(|o| o.object().normalized_name.clone()).collect();

    let (mut far, mut near) = (Vec::new(), Vec::new());
    while far.len() < 150 || near.len() < 150 {
        let target = &targets[rng.random_range(0..targets.len())];
        let edits = rng.random_range(1..8);
        let query = perturb(&mut rng, target, edits);
        let d = oracle_string_distance(&normalize(&query).normalized, target);
        if d > 0.3 && d <= 0.5 && far.len() < 150 {
            far.push(query);
        } else if d <= 0.3 && near.len() < 150 {
            near.push(query);
        }
    }
    let rows: Vec<BatchInput> = far.iter().chain(&near).map(|a| BatchInput::new(a, Some("1860"))).collect();
    let config = GeocoderConfig::default();
    let count = |tau: f64| {
        let template = GeocodeQuery::new("-").with_max_string_distance(tau);
        let out = histgeo::batch_geocode(&rows, &template, &r, &config);
        (out.report.matched(), out.rows[..far.len()].iter().filter(|r| r.status == RowStatus::MatchedPrecise).count())
    };
    let ((at3, far3), (at5, far5)) = (count(0.3), count(0.5));
    check(at5 > at3, || format!("matched {at3} at 0.3 and {at5} at 0.5"))?;
    Ok(format!("{} rows (150 at distance in (0.3, 0.5]): matched {at3} at 0.3 ({far3} far) -> {at5} at 0.5 ({far5} far)", rows.len()))
}

// Throughput

fn syllable_street(rng: &mut StdRng) -> String {
    const KINDS: &[&str] = &["rue", "rue", "rue", "boulevard", "quai", "place", "impasse", "passage", "avenue"];
    const SYL: &[&str] = &["ma", "ri", "ton", "ber", "gue", "lau", "vin", "cha", "pel", "mont", "roc", "sai", "ne", "dor", "fau", "bou", "lin", "ter"];
    let word = |rng: &mut StdRng| (0..rng.random_range(2..4)).map(|_| SYL[rng.random_range(0..SYL.len())]).collect::<String>();
    let article = ["de la", "du", "des", "de", ""][rng.random_range(0..5)];
    format!("{} {article} {} {}", KINDS[rng.random_range(0..KINDS.len())], word(rng), word(rng)).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn throughput() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x100_000);
    let mut r = GazetteerRegistry::default();
    let sources: Vec<_> = (0..3)
        .map(|i| r.register_source(NewSource::new(&format!("atlas_{i}"), common::random_period(&mut rng), 4.0 + i as f64)).unwrap())
        .collect();
    let p = r.register_process(NewProcess::new("vectorized", 1.5)).unwrap();
    let numbers = r.create_gazetteer("numbers", ScaleClass::Precise).unwrap();
    let streets = r.create_gazetteer("streets", ScaleClass::Rough).unwrap();
    let street_names: Vec<String> = (0..2500).map(|_| syllable_street(&mut rng)).collect();
    let mut street_objects = Vec::new();
    for name in &street_names {
        let (x, y) = (rng.random_range(0.0..2e4), rng.random_range(0.0..2e4));
        let line = Geometry::polyline(vec![Coord::new(x, y), Coord::new(x + 300.0, y + rng.random_range(-40.0..40.0))]).unwrap();
        street_objects.push(NewObject::new(name, sources[rng.random_range(0..3)], p, line));
    }
    r.insert_objects(streets, street_objects).unwrap();
    let mut addresses = Vec::new();
    while r.len() < 100_000 {
        let batch: Vec<NewObject> = (0..5000.min(100_000 - r.len()))
            .map(|_| {
                let name = format!("{} {}", rng.random_range(1..120), street_names[rng.random_range(0..street_names.len())]);
                let mut o = NewObject::new(&name, sources[rng.random_range(0..3)], p, Geometry::point(rng.random_range(0.0..2e4), rng.random_range(0.0..2e4)));
                if rng.random_bool(0.3) {
                    o = o.with_period(common::random_period(&mut rng));
                }
                addresses.push(name);
                o
            })
            .collect();
        r.insert_objects(numbers, batch).unwrap();
    }
    let config = GeocoderConfig::default();
    let mut times = Vec::with_capacity(1000);
    let mut report = BatchReport { rows: 1000, matched_precise: 0, matched_rough: 0, unmatched: 0, errors: 0, elapsed_secs: 0.0 };
    for i in 0..1000 {
        let base = &addresses[rng.random_range(0..addresses.len())];
        let text = if i % 4 == 3 { perturb(&mut rng, base, 3) } else { base.clone() };
        let q = GeocodeQuery::new(&text).with_period(common::random_period(&mut rng));
        let start = Instant::now();
        let results = geocode(&q, &r, &config);
        times.push(start.elapsed().as_secs_f64());
        match results.as_deref().map(status_of) {
            Ok(RowStatus::MatchedPrecise) => report.matched_precise += 1,
            Ok(RowStatus::MatchedRough) => report.matched_rough += 1,
            Ok(_) => report.unmatched += 1,
            Err(_) => report.errors += 1,
        }
    }
    report.elapsed_secs = times.iter().sum();
    let mean = report.elapsed_secs / times.len() as f64;
    let max = times.iter().copied().fold(0.0, f64::max);
    println!("  {}", BatchReport::TABLE_HEADER);
    println!("  {}", report.table_row("synthetic_100k"));
    check(mean <= 0.2, || format!("mean {:.1} ms", mean * 1e3))?;
    check(max <= 1.0, || format!("max {:.1} ms", max * 1e3))?;
    Ok(format!("{} objects, 1000 queries: mean {:.2} ms, max {:.2} ms", r.len(), mean * 1e3, max * 1e3))
}

// Edit loop

fn random_edit(rng: &mut StdRng) -> EditRequest {
    let mut req = EditRequest::default();
    if rng.random_bool(0.5) {
        req.geometry = Some(Geometry::point(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)));
    }
    if rng.random_bool(0.3) {
        req.period = Some(common::random_period(rng));
    }
    if rng.random_bool(0.3) {
        req.historical_name = Some(common::random_address(rng));
    }
    if rng.random_bool(0.1) {
        req.normalized_name = Some(common::random_address(rng));
    }
    if rng.random_bool(0.3) {
        req.note = Some("fuzzed".into());
    }
    req
}

fn edit_loop() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let options = EngineOptions { sync: false, ..Default::default() };
    let mut rng = StdRng::seed_from_u64(0xed17);
    let (mut e, _) = Engine::open(dir.path(), options.clone()).map_err(|e| e.to_string())?;
    let sources = [
        e.register_source(NewSource::new("atlas", common::random_period(&mut rng), 5.0)).unwrap(),
        e.register_source(NewSource::new("cadastre", common::random_period(&mut rng), 2.0)).unwrap(),
    ];
    let processes = [
        e.register_process(NewProcess::new("manual", 3.0)).unwrap(),
        e.register_process(NewProcess::new("vectorized", 1.0)).unwrap(),
    ];
    let g = e.create_gazetteer("numbers", ScaleClass::Precise).unwrap();
    let objs = common::random_objects(&mut rng, 400, sources, processes, false);
    e.insert_objects(g, objs).unwrap();
    let source_hashes: HashMap<ObjectId, String> = e.registry().objects().map(|v| (v.id(), object_hash(v.object()))).collect();
    let edit_gazetteer = e.registry().gazetteer_by_name(EDIT_GAZETTEER).unwrap().id;

    let mut sets: Vec<(String, Vec<u64>)> = Vec::new();
    let (mut accepted, mut empty_rejected, mut bounced, mut persisted) = (0, 0, 0, 0);
    for _ in 0..100 {
        let op = if sets.len() < 2 { 0 } else { rng.random_range(0..4) };
        match op {
            0 => {
                let q = GeocodeQuery::new(&common::random_address(&mut rng)).with_max_results(3).with_max_string_distance(0.5);
                let results = e.geocode(&q).map_err(|e| e.to_string())?;
                let query = QueryEcho::new(&q, None, e.config());
                let outcome = histgeo::geocoder::BatchRowResult { status: status_of(&results), results, error: None };
                let ruid = e.persist(SetKind::Single, vec![PersistRow { query, outcome }]).map_err(|e| e.to_string())?;
                let ids = e.result_set(&ruid).unwrap().records.iter().filter(|r| r.result.is_some()).map(|r| r.id).collect();
                sets.push((ruid, ids));
                persisted += 1;
            }
            1 | 2 => {
                let candidates: Vec<&(String, Vec<u64>)> = sets.iter().filter(|(_, ids)| !ids.is_empty()).collect();
                if candidates.is_empty() {
                    continue;
                }
                let (ruid, ids) = candidates[rng.random_range(0..candidates.len())];
                let id = ids[rng.random_range(0..ids.len())];
                let req = random_edit(&mut rng);
                let original = e.record(id).unwrap().result.as_ref().unwrap().object.clone();
                let before = e.registry().len();
                match e.edit(ruid, id, &req) {
                    Ok(new_id) => {
                        accepted += 1;
                        check(e.registry().len() == before + 1, || "accepted edit did not add exactly one object".into())?;
                        let copy = e.registry().object(new_id).unwrap();
                        check(copy.object().gazetteer == edit_gazetteer, || format!("edit landed in {:?}", copy.gazetteer().name))?;
                        check(copy.process().name == EDIT_PROCESS, || format!("edit process {:?}", copy.process().name))?;
                        check(copy.object().source == original.source, || "edit changed the source".into())?;
                    }
                    Err(EngineError::EmptyEdit) if req.is_empty() => empty_rejected += 1,
                    Err(err) => return Err(format!("edit rejected: {err}")),
                }
            }
            _ => {
                let i = rng.random_range(0..sets.len());
                let j = (i + rng.random_range(1..sets.len())) % sets.len();
                let Some(&id) = sets[j].1.first() else { continue };
                let ruid = if rng.random_bool(0.5) { sets[i].0.clone() } else { histgeo_service::engine::new_ruid() };
                let hash = e.state_hash();
                let result = e.edit(&ruid, id, &random_edit(&mut rng));
                check(matches!(result, Err(EngineError::RuidMismatch { .. })), || format!("wrong ruid gave {result:?}"))?;
                check(e.state_hash() == hash, || "wrong-ruid edit changed state".into())?;
                bounced += 1;
            }
        }
    }
    for (id, hash) in &source_hashes {
        let now = object_hash(e.registry().object(*id).unwrap().object());
        check(&now == hash, || format!("object {id:?} changed"))?;
    }
    let in_edit = e.registry().gazetteer_objects(edit_gazetteer).count();
    check(in_edit == accepted, || format!("{in_edit} edit objects for {accepted} accepted edits"))?;
    check(e.edits().len() == accepted, || "edit log size".into())?;
    e.flush().map_err(|e| e.to_string())?;
    let final_hash = e.state_hash();
    drop(e);
    let (replayed, report, _, _): (Engine, ReplayReport, u64, u64) = Engine::replay(dir.path(), &options).map_err(|e| e.to_string())?;
    check(report.is_clean(), || format!("replay report {report:?}"))?;
    check(replayed.state_hash() == final_hash, || "replayed state hash differs".into())?;
    check(accepted > 0 && bounced > 0, || format!("degenerate run: {accepted} accepted, {bounced} bounced"))?;
    Ok(format!(
        "{persisted} persists, {accepted} accepted edits, {empty_rejected} empty edits refused, {bounced} wrong-ruid edits bounced; {} source objects unchanged; replay hash {}",
        source_hashes.len(),
        &final_hash[..12]
    ))
}

// Evaluation histogram

fn paper_bin(d: f64) -> usize {
    if d < 15.0 {
        0
    } else if d < 55.0 {
        1
    } else if d < 155.0 {
        2
    } else {
        3
    }
}

fn histogram() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xb1);
    let mut results = Vec::new();
    let mut truth = Vec::new();
    let mut expected = [0usize; 4];
    for (i, d) in [5.0, 30.0, 100.0, 500.0].into_iter().enumerate() {
        let t = Coord::new(rng.random_range(0.0..1e4), rng.random_range(0.0..1e4));
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let p = Coord::new(t.x + d * angle.cos(), t.y + d * angle.sin());
        expected[paper_bin(d)] += 1;
        results.push(EvaluatedRow { id: i.to_string(), point: Some(p), score: Some(1.0), w_d: 0.0, t_d: 0.0 });
        truth.push(TruthRow { id: i.to_string(), point: t });
    }
    let h = evaluate_against_ground_truth(&results, &truth).map_err(|e| e.to_string())?;
    let counts = h.counts();
    check(counts == expected.to_vec() && counts == vec![1, 1, 1, 1], || format!("counts {counts:?}"))?;
    Ok(format!("displacements 5/30/100/500 m -> {counts:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("temporal distance exactness", temporal),
        ("trigram distance", trigrams),
        ("building-number formula", building_numbers),
        ("Vannerie/Tannerie ranking", vannerie),
        ("index/oracle equivalence", index_oracle),
        ("georeferencing fits", georef),
        ("threshold direction", threshold),
        ("throughput at desk scale", throughput),
        ("edit-loop invariants", edit_loop),
        ("evaluation histogram", histogram),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
