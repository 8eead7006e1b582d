//! JSON bodies shared by the REST endpoints and the CLI.

use histgeo::fuzzy_time::{parse_fuzzy_date, FuzzyPeriod};
use histgeo::geocoder::RowStatus;
use histgeo::geometry::{Coord, CrsId, Geometry};
use histgeo::GeocodeResult;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{EditRecord, EditRequest, QueryEcho, ResultRecord, ResultSet, SetKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiMetrics {
    pub w_d: f64,
    pub t_d: f64,
    pub b_d: f64,
    pub s_p: f64,
    pub s_d: f64,
    pub g_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiFlags {
    pub t_d_available: bool,
    pub b_d_available: bool,
    pub g_d_available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResult {
    /// Persisted result id; present only when the result was persisted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub rank: usize,
    pub object_id: u64,
    pub name_historical: String,
    pub name_normalized: String,
    pub geometry: Geometry,
    pub point: Coord,
    pub score: Option<f64>,
    pub metrics: ApiMetrics,
    pub flags: ApiFlags,
    pub gazetteer: String,
    pub source: String,
    pub process: String,
    pub period: FuzzyPeriod,
    pub accuracy_m: f64,
    pub precision_class: String,
}

impl ApiResult {
    pub fn new(r: &GeocodeResult, id: Option<u64>) -> Self {
        let m = &r.metrics;
        Self {
            id,
            rank: r.rank,
            object_id: r.object.id.0,
            name_historical: r.object.historical_name.clone(),
            name_normalized: r.object.normalized_name.clone(),
            geometry: r.object.geometry.clone(),
            point: r.point,
            score: r.score,
            metrics: ApiMetrics { w_d: m.w_d, t_d: m.t_d, b_d: m.b_d, s_p: m.s_p, s_d: m.s_d, g_d: m.g_d },
            flags: ApiFlags {
                t_d_available: m.period_compared,
                b_d_available: m.number_compared,
                g_d_available: m.g_d_available,
                score_error: r.score_error.clone(),
            },
            gazetteer: r.gazetteer.clone(),
            source: r.source.clone(),
            process: r.process.clone(),
            period: r.effective_period,
            accuracy_m: r.effective_accuracy,
            precision_class: r.precision_class.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruid: Option<String>,
    pub results: Vec<ApiResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRecord {
    pub id: u64,
    pub row_index: usize,
    pub query: QueryEcho,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub edited: bool,
    pub created_at: String,
    pub result: Option<ApiResult>,
}

impl ApiRecord {
    pub fn new(r: &ResultRecord) -> Self {
        Self {
            id: r.id,
            row_index: r.row_index,
            query: r.query.clone(),
            status: r.status,
            error: r.error.clone(),
            edited: r.edited,
            created_at: r.created_at.clone(),
            result: r.result.as_ref().map(|x| ApiResult::new(x, Some(r.id))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSetResponse {
    pub ruid: String,
    pub kind: SetKind,
    pub created_at: String,
    pub records: Vec<ApiRecord>,
    pub edits: Vec<EditRecord>,
}

impl ResultSetResponse {
    pub fn new<'a>(set: &ResultSet, edits: impl Iterator<Item = &'a EditRecord>) -> Self {
        Self {
            ruid: set.ruid.clone(),
            kind: set.kind,
            created_at: set.created_at.clone(),
            records: set.records.iter().map(ApiRecord::new).collect(),
            edits: edits.cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub ruid: String,
    pub result_id: u64,
    pub object_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

/// Decodes an edit payload. Accepted keys: `geometry` (geometry JSON; a
/// missing `crs` means the registry's), `period` (`[a, b, c, d]` or a date
/// string), `name_historical`, `name_normalized`, `note`.
pub fn parse_edit_payload(body: &Value, registry_crs: &CrsId) -> Result<EditRequest, String> {
    let obj = body.as_object().ok_or("edit payload must be a JSON object")?;
    const KEYS: [&str; 5] = ["geometry", "period", "name_historical", "name_normalized", "note"];
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(format!("unknown edit field {k:?}"));
    }
    let text = |key: &str| -> Result<Option<String>, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(format!("{key} must be a string")),
        }
    };
    let geometry = match obj.get("geometry") {
        None | Some(Value::Null) => None,
        Some(g) => {
            let mut g = g.clone();
            if let Some(m) = g.as_object_mut() {
                m.entry("crs").or_insert_with(|| Value::String(registry_crs.as_str().to_string()));
            }
            Some(serde_json::from_value::<Geometry>(g).map_err(|e| format!("geometry: {e}"))?)
        }
    };
    let period = match obj.get("period") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(parse_fuzzy_date(s).map_err(|e| format!("period: {e}"))?),
        Some(p) => Some(serde_json::from_value::<FuzzyPeriod>(p.clone()).map_err(|e| format!("period: {e}"))?),
    };
    Ok(EditRequest {
        geometry,
        period,
        historical_name: text("name_historical")?,
        normalized_name: text("name_normalized")?,
        note: text("note")?,
    })
}
