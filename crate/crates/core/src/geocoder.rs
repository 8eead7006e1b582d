//! The query pipeline: normalize, gather candidates, compute metrics, score,
//! fall back to rough stores, keep the top results. Also batch geocoding and
//! the ground-truth error histogram.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy_time::{parse_fuzzy_date, FuzzyPeriod};
use crate::gazetteer::{Candidate, GazetteerRegistry, GeoHistoricalObject, ScaleClass, ScaleFilter};
use crate::geometry::{Coord, Geometry};
use crate::scoring::{
    compute_metrics_with_string_distance, MetricVector, PreparedQuery, ScaleDistanceMode, ScaleRange,
    ScoringExpression,
};

pub const DEFAULT_MAX_STRING_DISTANCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeQuery {
    pub raw_address: String,
    #[serde(default)]
    pub period: Option<FuzzyPeriod>,
    #[serde(default)]
    pub hint_geometry: Option<Geometry>,
    #[serde(default)]
    pub scale_low: Option<f64>,
    #[serde(default)]
    pub scale_high: Option<f64>,
    pub max_results: usize,
    pub max_string_distance: f64,
    pub allow_rough_fallback: bool,
    #[serde(default)]
    pub scoring: Option<ScoringExpression>,
}

impl GeocodeQuery {
    pub fn new(raw_address: &str) -> Self {
        Self {
            raw_address: raw_address.to_string(),
            period: None,
            hint_geometry: None,
            scale_low: None,
            scale_high: None,
            max_results: 1,
            max_string_distance: DEFAULT_MAX_STRING_DISTANCE,
            allow_rough_fallback: true,
            scoring: None,
        }
    }

    pub fn with_period(mut self, period: FuzzyPeriod) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_max_results(mut self, k: usize) -> Self {
        self.max_results = k;
        self
    }

    pub fn with_max_string_distance(mut self, tau: f64) -> Self {
        self.max_string_distance = tau;
        self
    }

    pub fn with_scoring(mut self, e: ScoringExpression) -> Self {
        self.scoring = Some(e);
        self
    }

    pub fn with_hint(mut self, g: Geometry) -> Self {
        self.hint_geometry = Some(g);
        self
    }

    pub fn with_rough_fallback(mut self, allow: bool) -> Self {
        self.allow_rough_fallback = allow;
        self
    }

    /// Same parameters for a different address.
    pub fn for_address(&self, raw_address: &str) -> Self {
        Self {
            raw_address: raw_address.to_string(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// Rough stores are consulted only when no precise candidate passes the
    /// string threshold.
    #[default]
    Fallback,
    /// Precise and rough candidates ranked together.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeocoderConfig {
    #[serde(default)]
    pub ranking: RankingMode,
    #[serde(default)]
    pub scale_mode: ScaleDistanceMode,
    #[serde(default)]
    pub scale_range: ScaleRange,
    #[serde(default)]
    pub scoring: ScoringExpression,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeocodeError {
    #[error("address is empty")]
    EmptyAddress,
    #[error("max_results must be at least 1")]
    InvalidMaxResults,
    #[error("max_string_distance must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("invalid scale range ({0}, {1})")]
    InvalidScaleRange(f64, f64),
    #[error("hint geometry is in {found} but the registry uses {expected}")]
    HintCrsMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResult {
    pub rank: usize,
    pub object: GeoHistoricalObject,
    pub gazetteer: String,
    pub source: String,
    pub process: String,
    /// `None` when the scoring expression failed on this candidate.
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_error: Option<String>,
    pub metrics: MetricVector,
    pub precision_class: ScaleClass,
    pub point: Coord,
    pub effective_period: FuzzyPeriod,
    pub effective_accuracy: f64,
}

struct Scored<'r> {
    candidate: Candidate<'r>,
    metrics: MetricVector,
    score: Result<f64, String>,
}

fn rank_order(a: &Scored<'_>, b: &Scored<'_>) -> std::cmp::Ordering {
    let score = match (&a.score, &b.score) {
        (Ok(x), Ok(y)) => x.total_cmp(y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => std::cmp::Ordering::Equal,
    };
    score
        .then(a.metrics.w_d.total_cmp(&b.metrics.w_d))
        .then(a.metrics.t_d.total_cmp(&b.metrics.t_d))
        .then(a.candidate.view.id().cmp(&b.candidate.view.id()))
}

fn prepare(q: &GeocodeQuery, registry: &GazetteerRegistry, config: &GeocoderConfig) -> Result<PreparedQuery, GeocodeError> {
    if q.raw_address.trim().is_empty() {
        return Err(GeocodeError::EmptyAddress);
    }
    if q.max_results == 0 {
        return Err(GeocodeError::InvalidMaxResults);
    }
    if !(0.0..=1.0).contains(&q.max_string_distance) {
        return Err(GeocodeError::InvalidThreshold(q.max_string_distance));
    }
    let low = q.scale_low.unwrap_or(config.scale_range.low);
    let high = q.scale_high.unwrap_or(config.scale_range.high);
    let scale_range = ScaleRange::new(low, high).map_err(|_| GeocodeError::InvalidScaleRange(low, high))?;
    if let Some(h) = &q.hint_geometry {
        if h.crs() != registry.crs() {
            return Err(GeocodeError::HintCrsMismatch {
                expected: registry.crs().to_string(),
                found: h.crs().to_string(),
            });
        }
    }
    let mut prepared = PreparedQuery::new(&q.raw_address);
    prepared.period = q.period;
    prepared.hint = q.hint_geometry.clone();
    prepared.scale_range = scale_range;
    prepared.scale_mode = config.scale_mode;
    Ok(prepared)
}

/// Ranked matches for one address, best first. An empty list means no match.
pub fn geocode(
    q: &GeocodeQuery,
    registry: &GazetteerRegistry,
    config: &GeocoderConfig,
) -> Result<Vec<GeocodeResult>, GeocodeError> {
    let prepared = prepare(q, registry, config)?;
    let tau = q.max_string_distance;
    let candidates = match (config.ranking, q.allow_rough_fallback) {
        (_, false) => registry.query_candidates_with_trigrams(&prepared.trigrams, tau, ScaleFilter::Precise, None),
        (RankingMode::Pooled, true) => {
            registry.query_candidates_with_trigrams(&prepared.trigrams, tau, ScaleFilter::Both, None)
        }
        (RankingMode::Fallback, true) => {
            let precise = registry.query_candidates_with_trigrams(&prepared.trigrams, tau, ScaleFilter::Precise, None);
            if precise.is_empty() {
                registry.query_candidates_with_trigrams(&prepared.trigrams, tau, ScaleFilter::Rough, None)
            } else {
                precise
            }
        }
    };

    let expression = q.scoring.as_ref().unwrap_or(&config.scoring);
    let mut scored: Vec<Scored<'_>> = candidates
        .into_iter()
        .map(|candidate| {
            let metrics = compute_metrics_with_string_distance(&prepared, &candidate.view, candidate.string_distance);
            let score = expression.evaluate(&metrics).map_err(|e| e.to_string());
            Scored { candidate, metrics, score }
        })
        .collect();
    let k = q.max_results.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);

    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let view = s.candidate.view;
            let object = view.object();
            let (score, score_error) = match s.score {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e)),
            };
            GeocodeResult {
                rank: i + 1,
                gazetteer: view.gazetteer().name.clone(),
                source: view.source().name.clone(),
                process: view.process().name.clone(),
                score,
                score_error,
                metrics: s.metrics,
                precision_class: object.scale_class,
                point: object.geometry.representative_point(),
                effective_period: view.effective_period(),
                effective_accuracy: view.effective_accuracy(),
                object: object.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    MatchedPrecise,
    MatchedRough,
    Unmatched,
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::MatchedPrecise => "matched_precise",
            RowStatus::MatchedRough => "matched_rough",
            RowStatus::Unmatched => "unmatched",
            RowStatus::Error => "error",
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchInput {
    pub address: String,
    #[serde(default)]
    pub date: Option<String>,
}

impl BatchInput {
    pub fn new(address: &str, date: Option<&str>) -> Self {
        Self {
            address: address.to_string(),
            date: date.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRowResult {
    pub results: Vec<GeocodeResult>,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: usize,
    pub matched_precise: usize,
    pub matched_rough: usize,
    pub unmatched: usize,
    pub errors: usize,
    pub elapsed_secs: f64,
}

impl BatchReport {
    pub fn matched(&self) -> usize {
        self.matched_precise + self.matched_rough
    }

    /// Wall time per 1000 input rows.
    pub fn secs_per_1000(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.elapsed_secs * 1000.0 / self.rows as f64
        }
    }

    /// One row in the layout `name | input addresses | matched (rough) | secs/1000 addresses`.
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{name} | {} | {} ({}) | {:.1}",
            self.rows,
            self.matched(),
            self.matched_rough,
            self.secs_per_1000()
        )
    }

    pub const TABLE_HEADER: &'static str = "dataset | input addresses | response rate (rough) | secs/1000 addresses";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    pub rows: Vec<BatchRowResult>,
    pub report: BatchReport,
}

fn geocode_row(
    row: &BatchInput,
    template: &GeocodeQuery,
    registry: &GazetteerRegistry,
    config: &GeocoderConfig,
) -> BatchRowResult {
    let mut q = template.for_address(&row.address);
    if let Some(date) = row.date.as_deref().map(str::trim).filter(|d| !d.is_empty()) {
        match parse_fuzzy_date(date) {
            Ok(p) => q.period = Some(p),
            Err(e) => {
                return BatchRowResult {
                    results: Vec::new(),
                    status: RowStatus::Error,
                    error: Some(format!("date: {e}")),
                }
            }
        }
    }
    match geocode(&q, registry, config) {
        Ok(results) => {
            let status = match results.first().map(|r| r.precision_class) {
                Some(ScaleClass::Precise) => RowStatus::MatchedPrecise,
                Some(ScaleClass::Rough) => RowStatus::MatchedRough,
                None => RowStatus::Unmatched,
            };
            BatchRowResult { results, status, error: None }
        }
        Err(e) => BatchRowResult {
            results: Vec::new(),
            status: RowStatus::Error,
            error: Some(e.to_string()),
        },
    }
}

/// Geocodes every row with shared defaults. Rows run in parallel; output
/// keeps input order. A row's failure never aborts the batch.
pub fn batch_geocode(
    rows: &[BatchInput],
    template: &GeocodeQuery,
    registry: &GazetteerRegistry,
    config: &GeocoderConfig,
) -> BatchOutput {
    let start = Instant::now();
    let results: Vec<BatchRowResult> = rows
        .par_iter()
        .map(|row| geocode_row(row, template, registry, config))
        .collect();
    let elapsed_secs = start.elapsed().as_secs_f64();
    let count = |s: RowStatus| results.iter().filter(|r| r.status == s).count();
    let report = BatchReport {
        rows: rows.len(),
        matched_precise: count(RowStatus::MatchedPrecise),
        matched_rough: count(RowStatus::MatchedRough),
        unmatched: count(RowStatus::Unmatched),
        errors: count(RowStatus::Error),
        elapsed_secs,
    };
    BatchOutput { rows: results, report }
}

/// A geocoded row to evaluate. `point` is `None` for unmatched rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedRow {
    pub id: String,
    pub point: Option<Coord>,
    pub score: Option<f64>,
    pub w_d: f64,
    pub t_d: f64,
}

impl EvaluatedRow {
    pub fn from_result(id: &str, result: Option<&GeocodeResult>) -> Self {
        match result {
            Some(r) => Self {
                id: id.to_string(),
                point: Some(r.point),
                score: r.score,
                w_d: r.metrics.w_d,
                t_d: r.metrics.t_d,
            },
            None => Self {
                id: id.to_string(),
                point: None,
                score: None,
                w_d: 0.0,
                t_d: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub id: String,
    pub point: Coord,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
    #[error("row {0:?} has no ground truth")]
    MissingTruth(String),
    #[error("ground truth row {0:?} has no result")]
    MissingResult(String),
}

/// Lower bounds of the error bins, in meters; the last bin is open.
pub const ERROR_BINS: [f64; 4] = [0.0, 15.0, 55.0, 155.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBin {
    pub lower: f64,
    pub upper: Option<f64>,
    pub count: usize,
    pub fraction: f64,
    pub mean_score: Option<f64>,
    pub mean_w_d: Option<f64>,
    pub mean_t_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bins: Vec<ErrorBin>,
    pub evaluated: usize,
    pub unmatched: usize,
}

impl ErrorHistogram {
    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(|b| b.count).collect()
    }
}

impl fmt::Display for ErrorHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dist. (m) | count | % | avg(agg) | avg(sem) | avg(tempo)")?;
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        for b in &self.bins {
            let range = match b.upper {
                Some(u) => format!("{} - {}", b.lower, u),
                None => format!("{}+", b.lower),
            };
            writeln!(
                f,
                "{range} | {} | {:.0} % | {} | {} | {}",
                b.count,
                b.fraction * 100.0,
                opt(b.mean_score, 1),
                opt(b.mean_w_d, 2),
                opt(b.mean_t_d, 1)
            )?;
        }
        write!(f, "evaluated {} | unmatched {}", self.evaluated, self.unmatched)
    }
}

fn bin_index(distance: f64) -> usize {
    ERROR_BINS.iter().rposition(|lower| distance >= *lower).unwrap_or(0)
}

/// Buckets the planar distance between each result and its ground truth.
/// Rows are aligned by id; unmatched rows are counted separately.
pub fn evaluate_against_ground_truth(
    results: &[EvaluatedRow],
    truth: &[TruthRow],
) -> Result<ErrorHistogram, EvaluationError> {
    let mut truth_by_id: HashMap<&str, Coord> = HashMap::new();
    for t in truth {
        if truth_by_id.insert(t.id.as_str(), t.point).is_some() {
            return Err(EvaluationError::DuplicateId(t.id.clone()));
        }
    }
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut sums = [(0usize, 0.0f64, 0usize, 0.0f64, 0.0f64); 4];
    let mut unmatched = 0;
    for r in results {
        if seen.insert(r.id.as_str(), ()).is_some() {
            return Err(EvaluationError::DuplicateId(r.id.clone()));
        }
        let target = *truth_by_id
            .get(r.id.as_str())
            .ok_or_else(|| EvaluationError::MissingTruth(r.id.clone()))?;
        let Some(point) = r.point else {
            unmatched += 1;
            continue;
        };
        let s = &mut sums[bin_index(point.distance(target))];
        s.0 += 1;
        if let Some(score) = r.score {
            s.1 += score;
            s.2 += 1;
        }
        s.3 += r.w_d;
        s.4 += r.t_d;
    }
    if let Some(t) = truth.iter().find(|t| !seen.contains_key(t.id.as_str())) {
        return Err(EvaluationError::MissingResult(t.id.clone()));
    }
    let evaluated: usize = sums.iter().map(|s| s.0).sum();
    let bins = sums
        .iter()
        .enumerate()
        .map(|(i, &(count, score_sum, scored, w_sum, t_sum))| {
            let mean = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
            ErrorBin {
                lower: ERROR_BINS[i],
                upper: ERROR_BINS.get(i + 1).copied(),
                count,
                fraction: if evaluated == 0 { 0.0 } else { count as f64 / evaluated as f64 },
                mean_score: mean(score_sum, scored),
                mean_w_d: mean(w_sum, count),
                mean_t_d: mean(t_sum, count),
            }
        })
        .collect();
    Ok(ErrorHistogram { bins, evaluated, unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::{NewObject, NewProcess, NewSource};
    use crate::scoring::parse_expression;

    fn registry() -> GazetteerRegistry {
        let mut r = GazetteerRegistry::default();
        let s = r.register_source(NewSource::new("atlas", parse_fuzzy_date("1827-1836").unwrap(), 5.0)).unwrap();
        let p = r.register_process(NewProcess::new("digitization", 5.0)).unwrap();
        let precise = r.create_gazetteer("numbers", crate::gazetteer::ScaleClass::Precise).unwrap();
        let rough = r.create_gazetteer("streets", crate::gazetteer::ScaleClass::Rough).unwrap();
        r.insert_objects(
            precise,
            vec![
                NewObject::new("12 rue du temple paris", s, p, Geometry::point(10.0, 0.0)),
                NewObject::new("14 rue du temple paris", s, p, Geometry::point(30.0, 0.0)),
            ],
        )
        .unwrap();
        let street = Geometry::polyline(vec![Coord::new(0.0, 100.0), Coord::new(200.0, 100.0)]).unwrap();
        r.insert_objects(rough, vec![NewObject::new("rue de la paix", s, p, street)]).unwrap();
        r
    }

    #[test]
    fn exact_match_first() {
        let r = registry();
        let out = geocode(&GeocodeQuery::new("12 Rue du Temple, Paris"), &r, &GeocoderConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].rank, 1);
        assert_eq!(out[0].object.normalized_name, "12 rue du temple paris");
        assert_eq!(out[0].metrics.w_d, 0.0);
        assert_eq!(out[0].precision_class, ScaleClass::Precise);
    }

    #[test]
    fn rough_fallback() {
        let r = registry();
        let q = GeocodeQuery::new("12 rue de la Paix");
        let out = geocode(&q, &r, &GeocoderConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].precision_class, ScaleClass::Rough);
        assert_eq!(out[0].point, Coord::new(100.0, 100.0));
        let precise_only = geocode(&q.clone().with_rough_fallback(false), &r, &GeocoderConfig::default()).unwrap();
        assert!(precise_only.is_empty());
    }

    #[test]
    fn no_match_is_empty() {
        let r = registry();
        assert!(geocode(&GeocodeQuery::new("xqzw kkv"), &r, &GeocoderConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn invalid_queries() {
        let r = registry();
        let cfg = GeocoderConfig::default();
        assert_eq!(geocode(&GeocodeQuery::new("  "), &r, &cfg), Err(GeocodeError::EmptyAddress));
        assert_eq!(
            geocode(&GeocodeQuery::new("a").with_max_results(0), &r, &cfg),
            Err(GeocodeError::InvalidMaxResults)
        );
        assert!(matches!(
            geocode(&GeocodeQuery::new("a").with_max_string_distance(1.5), &r, &cfg),
            Err(GeocodeError::InvalidThreshold(_))
        ));
        let foreign = Geometry::point(0.0, 0.0).with_crs(crate::geometry::CrsId::new("EPSG:4326"));
        assert!(matches!(
            geocode(&GeocodeQuery::new("a").with_hint(foreign), &r, &cfg),
            Err(GeocodeError::HintCrsMismatch { .. })
        ));
    }

    #[test]
    fn top_k_consistency_and_building_numbers() {
        let r = registry();
        let cfg = GeocoderConfig::default();
        let q = GeocodeQuery::new("13 rue du temple paris").with_max_string_distance(0.5);
        let ten = geocode(&q.clone().with_max_results(10), &r, &cfg).unwrap();
        let one = geocode(&q, &r, &cfg).unwrap();
        assert_eq!(ten.len(), 2);
        assert_eq!(one[0], ten[0]);
        assert!(ten.iter().all(|x| x.metrics.number_compared));
        assert_eq!(ten.iter().map(|x| x.rank).collect::<Vec<_>>(), vec![1, 2]);
        assert!(ten[0].score <= ten[1].score);
    }

    #[test]
    fn hint_and_flags() {
        let r = registry();
        let cfg = GeocoderConfig::default();
        let q = GeocodeQuery::new("12 rue du temple paris");
        let plain = geocode(&q, &r, &cfg).unwrap();
        assert!(!plain[0].metrics.period_compared);
        assert!(!plain[0].metrics.g_d_available);
        let hinted = geocode(&q.clone().with_hint(Geometry::point(10.0, 40.0)), &r, &cfg).unwrap();
        assert!(hinted[0].metrics.g_d_available);
        assert_eq!(hinted[0].metrics.g_d, 40.0);
    }

    #[test]
    fn evaluation_failures_rank_last() {
        let r = registry();
        let cfg = GeocoderConfig::default();
        let q = GeocodeQuery::new("12 rue du temple paris")
            .with_max_string_distance(0.5)
            .with_max_results(5)
            .with_scoring(parse_expression("1 / (b_d - 2)").unwrap());
        let out = geocode(&q, &r, &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].object.normalized_name, "12 rue du temple paris");
        assert_eq!(out[1].score, None);
        assert!(out[1].score_error.is_some());
    }

    #[test]
    fn pooled_ranking_variant() {
        let r = registry();
        let cfg = GeocoderConfig { ranking: RankingMode::Pooled, ..Default::default() };
        let q = GeocodeQuery::new("rue de la paix").with_max_string_distance(1.0).with_max_results(10);
        let out = geocode(&q, &r, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].precision_class, ScaleClass::Rough);
    }

    #[test]
    fn batch_statuses() {
        let r = registry();
        let rows = vec![
            BatchInput::new("12 rue du temple paris", Some("1850")),
            BatchInput::new("rue de la paix", None),
            BatchInput::new("zzzz qqqq", None),
            BatchInput::new("14 rue du temple paris", Some("not a date")),
        ];
        let out = batch_geocode(&rows, &GeocodeQuery::new("-"), &r, &GeocoderConfig::default());
        let statuses: Vec<_> = out.rows.iter().map(|r| r.status).collect();
        assert_eq!(
            statuses,
            vec![RowStatus::MatchedPrecise, RowStatus::MatchedRough, RowStatus::Unmatched, RowStatus::Error]
        );
        assert_eq!(
            (out.report.matched_precise, out.report.matched_rough, out.report.unmatched, out.report.errors),
            (1, 1, 1, 1)
        );
        assert!(out.rows[0].results[0].metrics.period_compared);
        assert!(out.report.table_row("test").starts_with("test | 4 | 2 (1) | "));
    }

    #[test]
    fn histogram_bins() {
        let truth: Vec<TruthRow> = (0..4)
            .map(|i| TruthRow { id: i.to_string(), point: Coord::new(0.0, 0.0) })
            .collect();
        let results: Vec<EvaluatedRow> = [5.0, 30.0, 100.0, 500.0]
            .iter()
            .enumerate()
            .map(|(i, d)| EvaluatedRow { id: i.to_string(), point: Some(Coord::new(*d, 0.0)), score: Some(1.0), w_d: 0.1, t_d: 2.0 })
            .collect();
        let h = evaluate_against_ground_truth(&results, &truth).unwrap();
        assert_eq!(h.counts(), vec![1, 1, 1, 1]);
        assert_eq!(h.bins[3].upper, None);
        assert_eq!(h.bins[0].mean_w_d, Some(0.1));
        assert!(h.to_string().contains("155+"));
    }

    #[test]
    fn histogram_edges_and_alignment() {
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(14.999), 0);
        assert_eq!(bin_index(15.0), 1);
        assert_eq!(bin_index(55.0), 2);
        assert_eq!(bin_index(155.0), 3);
        let truth = vec![TruthRow { id: "a".into(), point: Coord::new(0.0, 0.0) }];
        let row = |id: &str| EvaluatedRow { id: id.into(), point: None, score: None, w_d: 0.0, t_d: 0.0 };
        assert_eq!(
            evaluate_against_ground_truth(&[row("b")], &truth),
            Err(EvaluationError::MissingTruth("b".into()))
        );
        assert_eq!(evaluate_against_ground_truth(&[], &truth), Err(EvaluationError::MissingResult("a".into())));
        let h = evaluate_against_ground_truth(&[row("a")], &truth).unwrap();
        assert_eq!((h.evaluated, h.unmatched), (0, 1));
    }
}
