//! Loading gazetteers from delimited and JSON feature files, building-number
//! interpolation along street segments, and import of modern lon/lat
//! address extracts.
//!
//! A mapping file is a list of `key = value` lines naming the input columns
//! (or feature properties):
//!
//! ```text
//! historical_name = nom
//! normalized_name = nom_norm
//! geometry = geom          # JSON geometry; or use x = ... and y = ...
//! period = date
//! accuracy = precision_m
//! delimiter = ;
//! ```
//!
//! `historical_name` and the geometry columns are mandatory. The other
//! columns are optional and ignored when absent from the header.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fuzzy_time::{parse_fuzzy_date, FuzzyPeriod};
use crate::gazetteer::{GazetteerId, GazetteerRegistry, NewObject, ObjectId, ProcessId, RegistryError, SourceId};
use crate::geometry::{point_along, polyline_length, Coord, CrsId, Geometry};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("mapping line {line}: {message}")]
    Mapping { line: usize, message: String },
    #[error("mandatory field {0:?} is not present in the input")]
    UnmappedField(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Delimited,
    JsonFeatures,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delimited" | "csv" => Ok(InputFormat::Delimited),
            "json" | "json-features" | "geojson" => Ok(InputFormat::JsonFeatures),
            other => Err(format!("unknown input format {other:?}")),
        }
    }
}

impl InputFormat {
    /// Guesses from the file extension; anything but `.json`/`.geojson` is delimited.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("json" | "geojson") => InputFormat::JsonFeatures,
            _ => InputFormat::Delimited,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryMapping {
    /// A column holding a JSON geometry. Ignored for JSON features, which
    /// carry their own geometry.
    Column(String),
    /// Two numeric columns forming a point.
    Xy { x: String, y: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub historical_name: String,
    pub normalized_name: Option<String>,
    pub geometry: GeometryMapping,
    pub period: Option<String>,
    pub accuracy: Option<String>,
    pub delimiter: u8,
}

impl Default for Mapping {
    fn default() -> Self {
        Self {
            historical_name: "historical_name".into(),
            normalized_name: Some("normalized_name".into()),
            geometry: GeometryMapping::Column("geometry".into()),
            period: Some("period".into()),
            accuracy: Some("accuracy".into()),
            delimiter: b',',
        }
    }
}

impl Mapping {
    /// Point mapping with the default optional columns.
    pub fn points(historical_name: &str, x: &str, y: &str) -> Self {
        Self {
            historical_name: historical_name.into(),
            geometry: GeometryMapping::Xy { x: x.into(), y: y.into() },
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut m = Mapping::default();
        let (mut x, mut y) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| IngestError::Mapping { line: i + 1, message };
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() && key != "delimiter" {
                return Err(err(format!("empty value for {key}")));
            }
            match key {
                "historical_name" => m.historical_name = value.into(),
                "normalized_name" => m.normalized_name = Some(value.into()),
                "geometry" => m.geometry = GeometryMapping::Column(value.into()),
                "x" => x = Some(value.to_string()),
                "y" => y = Some(value.to_string()),
                "period" => m.period = Some(value.into()),
                "accuracy" => m.accuracy = Some(value.into()),
                "delimiter" => {
                    m.delimiter = match value {
                        "\\t" | "tab" => b'\t',
                        v if v.len() == 1 => v.as_bytes()[0],
                        // a raw '#' would have been stripped as a comment
                        _ => return Err(err(format!("delimiter must be one byte, got {value:?}"))),
                    }
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        match (x, y) {
            (Some(x), Some(y)) => m.geometry = GeometryMapping::Xy { x, y },
            (None, None) => {}
            _ => {
                return Err(IngestError::Mapping {
                    line: 0,
                    message: "x and y must be given together".into(),
                })
            }
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Where loaded objects go and which catalog entries they reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadTarget {
    pub gazetteer: GazetteerId,
    pub source: SourceId,
    pub process: ProcessId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based data row (header excluded) or feature index.
    pub row: usize,
    pub reason: String,
    /// The original row as a delimited line, or the feature as JSON.
    pub original: String,
}

/// Parsed and validated objects, not yet inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedObjects {
    pub rows: usize,
    pub objects: Vec<NewObject>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub rows: usize,
    pub inserted: Vec<ObjectId>,
    pub rejects: Vec<Reject>,
}

/// Writes rejects as a delimited file with columns `row,reason,original`.
pub fn write_rejects<W: Write>(rejects: &[Reject], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "reason", "original"])?;
    for r in rejects {
        w.write_record([r.row.to_string(), r.reason.clone(), r.original.clone()])?;
    }
    w.flush().map_err(|e| IngestError::Malformed(e.to_string()))
}

/// Per-row overrides and coordinate conversion.
struct RowPolicy<'a> {
    project: Option<&'a dyn Fn(Coord) -> Result<Coord, String>>,
    period: Option<FuzzyPeriod>,
    accuracy: Option<f64>,
}

impl RowPolicy<'_> {
    fn plain() -> Self {
        Self { project: None, period: None, accuracy: None }
    }
}

struct Fields {
    historical_name: Option<String>,
    normalized_name: Option<String>,
    geometry: Result<Geometry, String>,
    period: Option<String>,
    accuracy: Option<String>,
}

fn build_object(
    registry: &GazetteerRegistry,
    target: LoadTarget,
    fields: Fields,
    policy: &RowPolicy<'_>,
) -> Result<NewObject, String> {
    let historical_name = fields
        .historical_name
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or("empty historical name")?;
    let mut geometry = fields.geometry?;
    if let Some(project) = policy.project {
        geometry = geometry
            .try_map_coords(project, registry.crs().clone())?
            .map_err(|e| format!("geometry: {e}"))?;
    }
    let mut object = NewObject::new(&historical_name, target.source, target.process, geometry);
    object.normalized_name = fields.normalized_name.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
    object.period = match fields.period.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        Some(text) => Some(parse_fuzzy_date(text).map_err(|e| format!("period: {e}"))?),
        None => policy.period,
    };
    object.accuracy = match fields.accuracy.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        Some(text) => Some(
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("accuracy: invalid value {text:?}"))?,
        ),
        None => policy.accuracy,
    };
    registry
        .validate_object(target.gazetteer, &object)
        .map_err(|e| e.to_string())?;
    Ok(object)
}

fn geometry_from_json(value: Value, crs: &CrsId) -> Result<Geometry, String> {
    let mut value = value;
    if let Value::Object(map) = &mut value {
        map.entry("crs").or_insert_with(|| Value::String(crs.to_string()));
    }
    serde_json::from_value(value).map_err(|e| format!("geometry: {e}"))
}

fn geometry_from_text(text: &str, crs: &CrsId) -> Result<Geometry, String> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| format!("geometry: {e}"))?;
    geometry_from_json(value, crs)
}

fn parse_coord(x: Option<&str>, y: Option<&str>) -> Result<Coord, String> {
    let num = |v: Option<&str>, axis: &str| {
        v.map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing {axis} coordinate"))?
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid {axis} coordinate"))
    };
    Ok(Coord::new(num(x, "x")?, num(y, "y")?))
}

fn read_delimited<R: Read>(
    registry: &GazetteerRegistry,
    reader: R,
    mapping: &Mapping,
    target: LoadTarget,
    policy: &RowPolicy<'_>,
) -> Result<ParsedObjects, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| column(name).ok_or_else(|| IngestError::UnmappedField(name.to_string()));
    let name_col = required(&mapping.historical_name)?;
    enum GeomCols {
        Json(usize),
        Xy(usize, usize),
    }
    let geom_cols = match &mapping.geometry {
        GeometryMapping::Column(c) => GeomCols::Json(required(c)?),
        GeometryMapping::Xy { x, y } => GeomCols::Xy(required(x)?, required(y)?),
    };
    let optional = |c: &Option<String>| c.as_deref().and_then(column);
    let (norm_col, period_col, acc_col) = (
        optional(&mapping.normalized_name),
        optional(&mapping.period),
        optional(&mapping.accuracy),
    );

    let mut out = ParsedObjects { rows: 0, objects: Vec::new(), rejects: Vec::new() };
    for (i, record) in rdr.records().enumerate() {
        out.rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject { row: i + 1, reason: e.to_string(), original: String::new() });
                continue;
            }
        };
        let get = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::to_string);
        let geometry = match geom_cols {
            GeomCols::Json(c) => geometry_from_text(record.get(c).unwrap_or(""), registry.crs()),
            GeomCols::Xy(x, y) => parse_coord(record.get(x), record.get(y))
                .map(|c| Geometry::point(c.x, c.y).with_crs(registry.crs().clone())),
        };
        let fields = Fields {
            historical_name: get(Some(name_col)),
            normalized_name: get(norm_col),
            geometry,
            period: get(period_col),
            accuracy: get(acc_col),
        };
        match build_object(registry, target, fields, policy) {
            Ok(o) => out.objects.push(o),
            Err(reason) => {
                let mut w = csv::WriterBuilder::new().delimiter(mapping.delimiter).from_writer(Vec::new());
                w.write_record(&record)?;
                let original = String::from_utf8_lossy(&w.into_inner().unwrap_or_default())
                    .trim_end_matches(['\r', '\n'])
                    .to_string();
                out.rejects.push(Reject { row: i + 1, reason, original });
            }
        }
    }
    Ok(out)
}

fn property_text(props: &Map<String, Value>, key: Option<&str>) -> Option<String> {
    match props.get(key?)? {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

fn read_features<R: Read>(
    registry: &GazetteerRegistry,
    reader: R,
    mapping: &Mapping,
    target: LoadTarget,
    policy: &RowPolicy<'_>,
) -> Result<ParsedObjects, IngestError> {
    let root: Value = serde_json::from_reader(reader).map_err(|e| IngestError::Malformed(e.to_string()))?;
    let features = match root {
        Value::Array(items) => items,
        Value::Object(mut map) => match map.remove("features") {
            Some(Value::Array(items)) => items,
            _ => return Err(IngestError::Malformed("expected a \"features\" array".into())),
        },
        _ => return Err(IngestError::Malformed("expected a feature collection or array".into())),
    };
    let mut out = ParsedObjects { rows: features.len(), objects: Vec::new(), rejects: Vec::new() };
    let empty = Map::new();
    for (i, feature) in features.into_iter().enumerate() {
        let original = feature.to_string();
        let props = feature.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        let geometry = match &mapping.geometry {
            GeometryMapping::Xy { x, y } => parse_coord(
                property_text(props, Some(x)).as_deref(),
                property_text(props, Some(y)).as_deref(),
            )
            .map(|c| Geometry::point(c.x, c.y).with_crs(registry.crs().clone())),
            GeometryMapping::Column(_) => match feature.get("geometry") {
                Some(g) if !g.is_null() => geometry_from_json(g.clone(), registry.crs()),
                _ => Err("missing geometry".to_string()),
            },
        };
        let fields = Fields {
            historical_name: property_text(props, Some(&mapping.historical_name)),
            normalized_name: property_text(props, mapping.normalized_name.as_deref()),
            geometry,
            period: property_text(props, mapping.period.as_deref()),
            accuracy: property_text(props, mapping.accuracy.as_deref()),
        };
        match build_object(registry, target, fields, policy) {
            Ok(o) => out.objects.push(o),
            Err(reason) => out.rejects.push(Reject { row: i + 1, reason, original }),
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path).map(BufReader::new).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_with_policy<R: Read>(
    registry: &GazetteerRegistry,
    reader: R,
    format: InputFormat,
    mapping: &Mapping,
    target: LoadTarget,
    policy: &RowPolicy<'_>,
) -> Result<ParsedObjects, IngestError> {
    if registry.gazetteer(target.gazetteer).is_none() {
        return Err(RegistryError::UnknownGazetteer(target.gazetteer.to_string()).into());
    }
    match format {
        InputFormat::Delimited => read_delimited(registry, reader, mapping, target, policy),
        InputFormat::JsonFeatures => read_features(registry, reader, mapping, target, policy),
    }
}

/// Parses and validates rows without inserting them.
pub fn read_objects<R: Read>(
    registry: &GazetteerRegistry,
    reader: R,
    format: InputFormat,
    mapping: &Mapping,
    target: LoadTarget,
) -> Result<ParsedObjects, IngestError> {
    read_with_policy(registry, reader, format, mapping, target, &RowPolicy::plain())
}

fn insert(registry: &mut GazetteerRegistry, target: LoadTarget, parsed: ParsedObjects) -> Result<LoadReport, IngestError> {
    let inserted = registry.insert_objects(target.gazetteer, parsed.objects)?;
    Ok(LoadReport { rows: parsed.rows, inserted, rejects: parsed.rejects })
}

/// Loads a file into a gazetteer. Bad rows go to the rejects report; the
/// others are inserted as one batch.
pub fn load_objects_file(
    registry: &mut GazetteerRegistry,
    path: impl AsRef<Path>,
    format: InputFormat,
    mapping: &Mapping,
    target: LoadTarget,
) -> Result<LoadReport, IngestError> {
    let parsed = read_objects(registry, open(path.as_ref())?, format, mapping, target)?;
    insert(registry, target, parsed)
}

/// Writes a gazetteer's objects in the default-mapping delimited layout.
pub fn export_delimited<W: Write>(
    registry: &GazetteerRegistry,
    gazetteer: GazetteerId,
    writer: W,
) -> Result<usize, IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["historical_name", "normalized_name", "geometry", "period", "accuracy"])?;
    let mut n = 0;
    for view in registry.gazetteer_objects(gazetteer) {
        let o = view.object();
        let geometry = serde_json::to_string(&o.geometry).map_err(|e| IngestError::Malformed(e.to_string()))?;
        w.write_record([
            o.historical_name.clone(),
            o.normalized_name.clone(),
            geometry,
            o.period.map(|p| p.to_string()).unwrap_or_default(),
            o.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
        n += 1;
    }
    w.flush().map_err(|e| IngestError::Malformed(e.to_string()))?;
    Ok(n)
}

/// Writes a gazetteer's objects as a JSON feature collection.
pub fn export_features<W: Write>(
    registry: &GazetteerRegistry,
    gazetteer: GazetteerId,
    writer: W,
) -> Result<usize, IngestError> {
    let features: Vec<Value> = registry
        .gazetteer_objects(gazetteer)
        .map(|view| {
            let o = view.object();
            let mut props = Map::new();
            props.insert("historical_name".into(), Value::String(o.historical_name.clone()));
            props.insert("normalized_name".into(), Value::String(o.normalized_name.clone()));
            if let Some(p) = o.period {
                props.insert("period".into(), Value::String(p.to_string()));
            }
            if let Some(a) = o.accuracy {
                props.insert("accuracy".into(), serde_json::json!(a));
            }
            serde_json::json!({
                "type": "Feature",
                "geometry": o.geometry,
                "properties": props,
            })
        })
        .collect();
    let n = features.len();
    serde_json::to_writer_pretty(writer, &serde_json::json!({"type": "FeatureCollection", "features": features}))
        .map_err(|e| IngestError::Malformed(e.to_string()))?;
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// 90° counterclockwise from the digitization direction.
    Left,
    Right,
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpolationError {
    #[error("first number {first} and last number {last} differ in parity")]
    ParityMismatch { first: u32, last: u32 },
    #[error("segment has zero length")]
    DegenerateSegment,
    #[error("road width must be nonnegative and finite, got {0}")]
    InvalidWidth(f64),
}

/// Places `first, first±2, …, last` along a street segment. The k-th of n
/// numbers sits at curvilinear fraction (k+0.5)/n, offset by half the road
/// width to the given side of the local segment direction.
pub fn interpolate_building_numbers(
    segment: &[Coord],
    side: Side,
    first_number: u32,
    last_number: u32,
    road_width: f64,
) -> Result<Vec<(u32, Coord)>, InterpolationError> {
    if first_number % 2 != last_number % 2 {
        return Err(InterpolationError::ParityMismatch { first: first_number, last: last_number });
    }
    if !(road_width.is_finite() && road_width >= 0.0) {
        return Err(InterpolationError::InvalidWidth(road_width));
    }
    let length = if segment.len() < 2 { 0.0 } else { polyline_length(segment) };
    if length.is_nan() || length <= 0.0 {
        return Err(InterpolationError::DegenerateSegment);
    }
    let n = (first_number.abs_diff(last_number) / 2 + 1) as usize;
    let descending = last_number < first_number;
    let offset = 0.5 * road_width * if side == Side::Left { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let number = if descending { first_number - 2 * k as u32 } else { first_number + 2 * k as u32 };
        let s = (k as f64 + 0.5) / n as f64 * length;
        let base = point_along(segment, s);
        let (dx, dy) = direction_at(segment, s);
        out.push((number, Coord::new(base.x - dy * offset, base.y + dx * offset)));
    }
    Ok(out)
}

/// Unit direction of the non-degenerate piece containing abscissa `s`.
fn direction_at(line: &[Coord], s: f64) -> (f64, f64) {
    let mut travelled = 0.0;
    let mut last = (1.0, 0.0);
    for w in line.windows(2) {
        let len = w[0].distance(w[1]);
        if len == 0.0 {
            continue;
        }
        last = ((w[1].x - w[0].x) / len, (w[1].y - w[0].y) / len);
        if travelled + len >= s {
            break;
        }
        travelled += len;
    }
    last
}

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("invalid projection parameters")]
    InvalidParameters,
    #[error("coordinate ({lon}, {lat}) outside the projection's valid range")]
    OutOfRange { lon: f64, lat: f64 },
}

/// Equirectangular projection centered on (lon0, lat0), in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equirectangular {
    pub lon0: f64,
    pub lat0: f64,
    pub radius: f64,
}

impl Equirectangular {
    pub fn new(lon0: f64, lat0: f64) -> Result<Self, ProjectionError> {
        Self::with_radius(lon0, lat0, EARTH_RADIUS_M)
    }

    pub fn with_radius(lon0: f64, lat0: f64, radius: f64) -> Result<Self, ProjectionError> {
        let ok = lon0.is_finite()
            && lat0.is_finite()
            && lon0.abs() <= 180.0
            && lat0.abs() < 90.0
            && radius.is_finite()
            && radius > 0.0;
        if ok {
            Ok(Self { lon0, lat0, radius })
        } else {
            Err(ProjectionError::InvalidParameters)
        }
    }

    pub fn project(&self, lon: f64, lat: f64) -> Result<Coord, ProjectionError> {
        let dlon = lon - self.lon0;
        if !(lon.is_finite() && lat.is_finite()) || lon.abs() > 180.0 || lat.abs() > 90.0 || dlon.abs() > 180.0 {
            return Err(ProjectionError::OutOfRange { lon, lat });
        }
        Ok(Coord::new(
            self.radius * dlon.to_radians() * self.lat0.to_radians().cos(),
            self.radius * (lat - self.lat0).to_radians(),
        ))
    }

    pub fn unproject(&self, c: Coord) -> (f64, f64) {
        (
            self.lon0 + (c.x / (self.radius * self.lat0.to_radians().cos())).to_degrees(),
            self.lat0 + (c.y / self.radius).to_degrees(),
        )
    }
}

/// Reads a lon/lat feature or delimited file, projects it, and inserts it as
/// a dated gazetteer. Rows whose own period or accuracy columns are filled
/// keep those values.
#[allow(clippy::too_many_arguments)]
pub fn import_modern_addresses(
    registry: &mut GazetteerRegistry,
    path: impl AsRef<Path>,
    format: InputFormat,
    mapping: &Mapping,
    projection: &Equirectangular,
    period: FuzzyPeriod,
    accuracy: f64,
    target: LoadTarget,
) -> Result<LoadReport, IngestError> {
    let parsed = read_modern_addresses(registry, open(path.as_ref())?, format, mapping, projection, period, accuracy, target)?;
    insert(registry, target, parsed)
}

#[allow(clippy::too_many_arguments)]
pub fn read_modern_addresses<R: Read>(
    registry: &GazetteerRegistry,
    reader: R,
    format: InputFormat,
    mapping: &Mapping,
    projection: &Equirectangular,
    period: FuzzyPeriod,
    accuracy: f64,
    target: LoadTarget,
) -> Result<ParsedObjects, IngestError> {
    let project = |c: Coord| projection.project(c.x, c.y).map_err(|e| e.to_string());
    let policy = RowPolicy {
        project: Some(&project),
        period: Some(period),
        accuracy: Some(accuracy),
    };
    read_with_policy(registry, reader, format, mapping, target, &policy)
}
