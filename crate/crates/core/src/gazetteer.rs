//! Geohistorical objects, their source and process catalogs, and the
//! registry that exposes every gazetteer through unified candidate stores.
//!
//! Gazetteers are tagged either precise (building-level) or rough
//! (street- or neighbourhood-level). Querying a store observes every
//! gazetteer registered under it. The registry owns three indexes:
//!
//! * an inverted trigram index over normalized names, with per-object
//!   trigram counts so that the exact Jaccard distance falls out of the
//!   shared-trigram count without touching the name again;
//! * an R-tree over geometry bounding boxes;
//! * an ordered index over effective period envelopes `[a, d]`.
//!
//! The registry is append-only: objects are never modified once inserted.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy_time::FuzzyPeriod;
use crate::geometry::{CrsId, Geometry, Rect};
use crate::text::{self, distance_from_counts, Trigram, TrigramSet};

/// Name of the built-in gazetteer receiving collaborative edits.
pub const EDIT_GAZETTEER: &str = "user_edit_added_to_geocoding";
/// Name of the built-in process assigned to edited copies.
pub const EDIT_PROCESS: &str = "collaborative edit";

macro_rules! id_type {
    ($name:ident, $inner:ty) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(SourceId, u32);
id_type!(ProcessId, u32);
id_type!(GazetteerId, u32);
id_type!(ObjectId, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleClass {
    Precise,
    Rough,
}

impl fmt::Display for ScaleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleClass::Precise => "precise",
            ScaleClass::Rough => "rough",
        })
    }
}

impl std::str::FromStr for ScaleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "precise" => Ok(ScaleClass::Precise),
            "rough" => Ok(ScaleClass::Rough),
            other => Err(format!("unknown scale class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleFilter {
    Precise,
    Rough,
    Both,
}

impl ScaleFilter {
    fn accepts(self, class: ScaleClass) -> bool {
        match self {
            ScaleFilter::Both => true,
            ScaleFilter::Precise => class == ScaleClass::Precise,
            ScaleFilter::Rough => class == ScaleClass::Rough,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalSource {
    pub id: SourceId,
    pub name: String,
    pub description: String,
    pub default_period: FuzzyPeriod,
    pub default_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSource {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub default_period: FuzzyPeriod,
    pub default_accuracy: f64,
}

impl NewSource {
    pub fn new(name: &str, default_period: FuzzyPeriod, default_accuracy: f64) -> Self {
        Self {
            name: name.to_string(),
            description: String::new(),
            default_period,
            default_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalOriginProcess {
    pub id: ProcessId,
    pub name: String,
    pub description: String,
    pub digitizing_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewProcess {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub digitizing_precision: f64,
}

impl NewProcess {
    pub fn new(name: &str, digitizing_precision: f64) -> Self {
        Self {
            name: name.to_string(),
            description: String::new(),
            digitizing_precision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gazetteer {
    pub id: GazetteerId,
    pub name: String,
    /// `None` only for the built-in edit gazetteer, which holds copies of
    /// both precise and rough objects.
    pub scale_class: Option<ScaleClass>,
}

/// A named, sourced, dated and located gazetteer entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoHistoricalObject {
    pub id: ObjectId,
    pub gazetteer: GazetteerId,
    pub historical_name: String,
    pub normalized_name: String,
    pub source: SourceId,
    pub process: ProcessId,
    pub period: Option<FuzzyPeriod>,
    pub geometry: Geometry,
    pub accuracy: Option<f64>,
    pub scale_class: ScaleClass,
}

/// Insert payload; the registry assigns ids and fills defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewObject {
    pub historical_name: String,
    /// Computed from `historical_name` when absent.
    #[serde(default)]
    pub normalized_name: Option<String>,
    pub source: SourceId,
    pub process: ProcessId,
    #[serde(default)]
    pub period: Option<FuzzyPeriod>,
    pub geometry: Geometry,
    #[serde(default)]
    pub accuracy: Option<f64>,
    /// Defaults to the gazetteer's class; required for the edit gazetteer.
    #[serde(default)]
    pub scale_class: Option<ScaleClass>,
}

impl NewObject {
    pub fn new(historical_name: &str, source: SourceId, process: ProcessId, geometry: Geometry) -> Self {
        Self {
            historical_name: historical_name.to_string(),
            normalized_name: None,
            source,
            process,
            period: None,
            geometry,
            accuracy: None,
            scale_class: None,
        }
    }

    pub fn with_period(mut self, period: FuzzyPeriod) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy);
        self
    }

    pub fn with_normalized_name(mut self, name: &str) -> Self {
        self.normalized_name = Some(name.to_string());
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("name must not be empty")]
    EmptyName,
    #[error("a source named {0:?} already exists")]
    DuplicateSource(String),
    #[error("a process named {0:?} already exists")]
    DuplicateProcess(String),
    #[error("a gazetteer named {0:?} already exists")]
    DuplicateGazetteer(String),
    #[error("accuracy must be positive and finite, got {0}")]
    InvalidAccuracy(f64),
    #[error("digitizing precision must be nonnegative and finite, got {0}")]
    InvalidPrecision(f64),
    #[error("unknown gazetteer {0}")]
    UnknownGazetteer(String),
    #[error("object {object:?}: unknown source {source_id}")]
    UnknownSource { object: String, source_id: SourceId },
    #[error("object {object:?}: unknown process {process}")]
    UnknownProcess { object: String, process: ProcessId },
    #[error("object {object:?}: geometry in {found} but registry uses {expected}")]
    CrsMismatch { object: String, expected: String, found: String },
    #[error("object {object:?}: normalized name is empty")]
    EmptyNormalizedName { object: String },
    #[error("object {object:?}: scale class {found} does not match gazetteer class {expected}")]
    ScaleClassMismatch { object: String, expected: ScaleClass, found: ScaleClass },
    #[error("object {object:?}: the edit gazetteer needs an explicit scale class")]
    MissingScaleClass { object: String },
    #[error("object {object:?}: invalid accuracy {value}")]
    InvalidObjectAccuracy { object: String, value: f64 },
    #[error("inconsistent snapshot: {0}")]
    BadSnapshot(String),
}

struct Entry {
    object: GeoHistoricalObject,
    trigram_count: u32,
    building_number: Option<u32>,
    effective_period: FuzzyPeriod,
    effective_accuracy: f64,
    buffered_extent: OnceLock<f64>,
}

type SpatialEntry = GeomWithData<Rectangle<[f64; 2]>, u32>;

/// Total order on period starts for the envelope index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StartKey(f64);

impl Eq for StartKey {}

impl PartialOrd for StartKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StartKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A borrowed object together with its resolved catalog data.
#[derive(Clone, Copy)]
pub struct ObjectView<'r> {
    entry: &'r Entry,
    registry: &'r GazetteerRegistry,
}

impl<'r> ObjectView<'r> {
    pub fn object(&self) -> &'r GeoHistoricalObject {
        &self.entry.object
    }

    pub fn id(&self) -> ObjectId {
        self.entry.object.id
    }

    /// The object's own period, or its source's default.
    pub fn effective_period(&self) -> FuzzyPeriod {
        self.entry.effective_period
    }

    /// Own (or source default) accuracy plus the process digitizing precision.
    pub fn effective_accuracy(&self) -> f64 {
        self.entry.effective_accuracy
    }

    pub fn building_number(&self) -> Option<u32> {
        self.entry.building_number
    }

    /// Square root of the area of the geometry buffered by the effective
    /// accuracy. Computed on first use and cached.
    pub fn buffered_extent(&self) -> f64 {
        *self.entry.buffered_extent.get_or_init(|| {
            self.entry
                .object
                .geometry
                .buffer(self.entry.effective_accuracy)
                .map(|g| g.area().sqrt())
                .unwrap_or(0.0)
        })
    }

    pub fn trigram_count(&self) -> usize {
        self.entry.trigram_count as usize
    }

    pub fn gazetteer(&self) -> &'r Gazetteer {
        &self.registry.gazetteers[self.entry.object.gazetteer.0 as usize]
    }

    pub fn source(&self) -> &'r HistoricalSource {
        &self.registry.sources[self.entry.object.source.0 as usize]
    }

    pub fn process(&self) -> &'r NumericalOriginProcess {
        &self.registry.processes[self.entry.object.process.0 as usize]
    }
}

impl fmt::Debug for ObjectView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectView")
            .field("object", &self.entry.object)
            .field("effective_period", &self.entry.effective_period)
            .field("effective_accuracy", &self.entry.effective_accuracy)
            .finish()
    }
}

/// A candidate passing the string-distance filter.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'r> {
    pub view: ObjectView<'r>,
    pub string_distance: f64,
}

/// Serializable registry contents, in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrySnapshot {
    pub crs: CrsId,
    pub sources: Vec<HistoricalSource>,
    pub processes: Vec<NumericalOriginProcess>,
    pub gazetteers: Vec<Gazetteer>,
    pub objects: Vec<GeoHistoricalObject>,
}

pub struct GazetteerRegistry {
    crs: CrsId,
    sources: Vec<HistoricalSource>,
    processes: Vec<NumericalOriginProcess>,
    gazetteers: Vec<Gazetteer>,
    source_names: HashMap<String, SourceId>,
    process_names: HashMap<String, ProcessId>,
    gazetteer_names: HashMap<String, GazetteerId>,
    objects: Vec<Entry>,
    postings: HashMap<Trigram, Vec<u32>>,
    no_trigrams: Vec<u32>,
    spatial: RTree<SpatialEntry>,
    periods: BTreeMap<(StartKey, u32), f64>,
}

impl fmt::Debug for GazetteerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GazetteerRegistry")
            .field("crs", &self.crs)
            .field("sources", &self.sources.len())
            .field("processes", &self.processes.len())
            .field("gazetteers", &self.gazetteers.len())
            .field("objects", &self.objects.len())
            .finish()
    }
}

impl Default for GazetteerRegistry {
    fn default() -> Self {
        Self::new(CrsId::default())
    }
}

fn validate_name(name: &str) -> Result<String, RegistryError> {
    let name = name.trim();
    if name.is_empty() {
        Err(RegistryError::EmptyName)
    } else {
        Ok(name.to_string())
    }
}

impl GazetteerRegistry {
    /// Empty registry in the given planar reference system, holding only the
    /// built-in edit gazetteer and collaborative-edit process.
    pub fn new(crs: CrsId) -> Self {
        let mut registry = Self::bare(crs);
        registry
            .register_process(NewProcess {
                name: EDIT_PROCESS.to_string(),
                description: "copy of a geocoding result corrected by a user".to_string(),
                digitizing_precision: 0.0,
            })
            .expect("fresh registry");
        registry.push_gazetteer(EDIT_GAZETTEER.to_string(), None);
        registry
    }

    fn bare(crs: CrsId) -> Self {
        Self {
            crs,
            sources: Vec::new(),
            processes: Vec::new(),
            gazetteers: Vec::new(),
            source_names: HashMap::new(),
            process_names: HashMap::new(),
            gazetteer_names: HashMap::new(),
            objects: Vec::new(),
            postings: HashMap::new(),
            no_trigrams: Vec::new(),
            spatial: RTree::new(),
            periods: BTreeMap::new(),
        }
    }

    pub fn crs(&self) -> &CrsId {
        &self.crs
    }

    pub fn register_source(&mut self, source: NewSource) -> Result<SourceId, RegistryError> {
        let name = validate_name(&source.name)?;
        if self.source_names.contains_key(&name) {
            return Err(RegistryError::DuplicateSource(name));
        }
        if !(source.default_accuracy.is_finite() && source.default_accuracy > 0.0) {
            return Err(RegistryError::InvalidAccuracy(source.default_accuracy));
        }
        let id = SourceId(self.sources.len() as u32);
        self.source_names.insert(name.clone(), id);
        self.sources.push(HistoricalSource {
            id,
            name,
            description: source.description,
            default_period: source.default_period,
            default_accuracy: source.default_accuracy,
        });
        Ok(id)
    }

    pub fn register_process(&mut self, process: NewProcess) -> Result<ProcessId, RegistryError> {
        let name = validate_name(&process.name)?;
        if self.process_names.contains_key(&name) {
            return Err(RegistryError::DuplicateProcess(name));
        }
        if !(process.digitizing_precision.is_finite() && process.digitizing_precision >= 0.0) {
            return Err(RegistryError::InvalidPrecision(process.digitizing_precision));
        }
        let id = ProcessId(self.processes.len() as u32);
        self.process_names.insert(name.clone(), id);
        self.processes.push(NumericalOriginProcess {
            id,
            name,
            description: process.description,
            digitizing_precision: process.digitizing_precision,
        });
        Ok(id)
    }

    pub fn create_gazetteer(&mut self, name: &str, scale_class: ScaleClass) -> Result<GazetteerId, RegistryError> {
        let name = validate_name(name)?;
        if self.gazetteer_names.contains_key(&name) {
            return Err(RegistryError::DuplicateGazetteer(name));
        }
        Ok(self.push_gazetteer(name, Some(scale_class)))
    }

    fn push_gazetteer(&mut self, name: String, scale_class: Option<ScaleClass>) -> GazetteerId {
        let id = GazetteerId(self.gazetteers.len() as u32);
        self.gazetteer_names.insert(name.clone(), id);
        self.gazetteers.push(Gazetteer { id, name, scale_class });
        id
    }

    pub fn source(&self, id: SourceId) -> Option<&HistoricalSource> {
        self.sources.get(id.0 as usize)
    }

    pub fn process(&self, id: ProcessId) -> Option<&NumericalOriginProcess> {
        self.processes.get(id.0 as usize)
    }

    pub fn gazetteer(&self, id: GazetteerId) -> Option<&Gazetteer> {
        self.gazetteers.get(id.0 as usize)
    }

    pub fn source_by_name(&self, name: &str) -> Option<&HistoricalSource> {
        self.source_names.get(name.trim()).and_then(|id| self.source(*id))
    }

    pub fn process_by_name(&self, name: &str) -> Option<&NumericalOriginProcess> {
        self.process_names.get(name.trim()).and_then(|id| self.process(*id))
    }

    pub fn gazetteer_by_name(&self, name: &str) -> Option<&Gazetteer> {
        self.gazetteer_names.get(name.trim()).and_then(|id| self.gazetteer(*id))
    }

    pub fn sources(&self) -> &[HistoricalSource] {
        &self.sources
    }

    pub fn processes(&self) -> &[NumericalOriginProcess] {
        &self.processes
    }

    pub fn gazetteers(&self) -> &[Gazetteer] {
        &self.gazetteers
    }

    pub fn edit_gazetteer(&self) -> GazetteerId {
        self.gazetteer_names[EDIT_GAZETTEER]
    }

    pub fn edit_process(&self) -> ProcessId {
        self.process_names[EDIT_PROCESS]
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: ObjectId) -> Option<ObjectView<'_>> {
        self.objects.get(id.0 as usize).map(|entry| ObjectView { entry, registry: self })
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectView<'_>> {
        self.objects.iter().map(move |entry| ObjectView { entry, registry: self })
    }

    pub fn gazetteer_objects(&self, id: GazetteerId) -> impl Iterator<Item = ObjectView<'_>> {
        self.objects().filter(move |v| v.object().gazetteer == id)
    }

    /// Validates and appends a batch. Either every object is inserted or none is.
    pub fn insert_objects(
        &mut self,
        gazetteer: GazetteerId,
        objects: Vec<NewObject>,
    ) -> Result<Vec<ObjectId>, RegistryError> {
        let target = self
            .gazetteer(gazetteer)
            .ok_or_else(|| RegistryError::UnknownGazetteer(gazetteer.to_string()))?
            .clone();
        let mut prepared = Vec::with_capacity(objects.len());
        for (i, new) in objects.into_iter().enumerate() {
            let id = ObjectId((self.objects.len() + i) as u64);
            prepared.push(self.prepare(id, &target, new)?);
        }
        let ids = prepared.iter().map(|o| o.id).collect();
        for object in prepared {
            self.index(object);
        }
        Ok(ids)
    }

    /// Checks one object against the same rules `insert_objects` applies.
    pub fn validate_object(&self, gazetteer: GazetteerId, object: &NewObject) -> Result<(), RegistryError> {
        let target = self
            .gazetteer(gazetteer)
            .ok_or_else(|| RegistryError::UnknownGazetteer(gazetteer.to_string()))?;
        self.prepare(ObjectId(self.objects.len() as u64), target, object.clone()).map(|_| ())
    }

    fn prepare(&self, id: ObjectId, target: &Gazetteer, new: NewObject) -> Result<GeoHistoricalObject, RegistryError> {
        let label = new.historical_name.clone();
        if self.source(new.source).is_none() {
            return Err(RegistryError::UnknownSource { object: label, source_id: new.source });
        }
        if self.process(new.process).is_none() {
            return Err(RegistryError::UnknownProcess { object: label, process: new.process });
        }
        if new.geometry.crs() != &self.crs {
            return Err(RegistryError::CrsMismatch {
                object: label,
                expected: self.crs.to_string(),
                found: new.geometry.crs().to_string(),
            });
        }
        if let Some(a) = new.accuracy {
            if !(a.is_finite() && a >= 0.0) {
                return Err(RegistryError::InvalidObjectAccuracy { object: label, value: a });
            }
        }
        let scale_class = match (target.scale_class, new.scale_class) {
            (Some(expected), Some(found)) if expected != found => {
                return Err(RegistryError::ScaleClassMismatch { object: label, expected, found })
            }
            (Some(expected), _) => expected,
            (None, Some(found)) => found,
            (None, None) => return Err(RegistryError::MissingScaleClass { object: label }),
        };
        let normalized_name = match new.normalized_name {
            Some(n) => n.trim().to_string(),
            None => text::normalize(&new.historical_name).normalized,
        };
        if normalized_name.is_empty() {
            return Err(RegistryError::EmptyNormalizedName { object: label });
        }
        Ok(GeoHistoricalObject {
            id,
            gazetteer: target.id,
            historical_name: new.historical_name,
            normalized_name,
            source: new.source,
            process: new.process,
            period: new.period,
            geometry: new.geometry,
            accuracy: new.accuracy,
            scale_class,
        })
    }

    fn index(&mut self, object: GeoHistoricalObject) {
        let slot = self.objects.len() as u32;
        debug_assert_eq!(object.id.0, slot as u64);
        let source = &self.sources[object.source.0 as usize];
        let process = &self.processes[object.process.0 as usize];
        let effective_period = object.period.unwrap_or(source.default_period);
        let effective_accuracy = object.accuracy.unwrap_or(source.default_accuracy) + process.digitizing_precision;

        let trigrams = text::trigram_set(&object.normalized_name);
        if trigrams.is_empty() {
            self.no_trigrams.push(slot);
        }
        for t in trigrams.iter() {
            self.postings.entry(t).or_default().push(slot);
        }
        let bbox = object.geometry.bbox();
        self.spatial.insert(GeomWithData::new(
            Rectangle::from_corners([bbox.min.x, bbox.min.y], [bbox.max.x, bbox.max.y]),
            slot,
        ));
        let (start, end) = effective_period.support();
        self.periods.insert((StartKey(start), slot), end);

        self.objects.push(Entry {
            building_number: text::normalize(&object.normalized_name).building_number,
            trigram_count: trigrams.len() as u32,
            object,
            effective_period,
            effective_accuracy,
            buffered_extent: OnceLock::new(),
        });
    }

    /// All objects in the selected stores whose trigram distance to `text` is
    /// at most `max_string_distance`, optionally restricted to bounding boxes
    /// intersecting `window`. Unranked; ordered by object id.
    pub fn query_candidates(
        &self,
        text: &str,
        max_string_distance: f64,
        scale: ScaleFilter,
        window: Option<Rect>,
    ) -> Vec<Candidate<'_>> {
        self.query_candidates_with_trigrams(&text::trigram_set(text), max_string_distance, scale, window)
    }

    pub fn query_candidates_with_trigrams(
        &self,
        query: &TrigramSet,
        max_string_distance: f64,
        scale: ScaleFilter,
        window: Option<Rect>,
    ) -> Vec<Candidate<'_>> {
        let n = query.len();
        let mut counts = vec![0u32; self.objects.len()];
        let mut touched: Vec<u32> = Vec::new();
        for t in query.iter() {
            if let Some(list) = self.postings.get(&t) {
                for &slot in list {
                    let c = &mut counts[slot as usize];
                    if *c == 0 {
                        touched.push(slot);
                    }
                    *c += 1;
                }
            }
        }

        let keep = |slot: u32| -> Option<Candidate<'_>> {
            let entry = &self.objects[slot as usize];
            if !scale.accepts(entry.object.scale_class) {
                return None;
            }
            let d = distance_from_counts(counts[slot as usize] as usize, n, entry.trigram_count as usize);
            if d > max_string_distance {
                return None;
            }
            if let Some(w) = window {
                if !entry.object.geometry.bbox().intersects(&w) {
                    return None;
                }
            }
            Some(Candidate {
                view: ObjectView { entry, registry: self },
                string_distance: d,
            })
        };

        if max_string_distance >= 1.0 {
            // every object is within distance 1, including ones sharing no trigram
            let slots: Box<dyn Iterator<Item = u32>> = match window {
                Some(w) => {
                    let mut hits = self.slots_in_window(w);
                    hits.sort_unstable();
                    Box::new(hits.into_iter())
                }
                None => Box::new(0..self.objects.len() as u32),
            };
            return slots.filter_map(keep).collect();
        }

        if n == 0 {
            // only names without trigrams can be at distance 0
            touched.extend_from_slice(&self.no_trigrams);
        }
        touched.sort_unstable();
        touched.into_iter().filter_map(keep).collect()
    }

    fn slots_in_window(&self, w: Rect) -> Vec<u32> {
        let env = AABB::from_corners([w.min.x, w.min.y], [w.max.x, w.max.y]);
        self.spatial
            .locate_in_envelope_intersecting(&env)
            .map(|e| e.data)
            .collect()
    }

    /// Objects whose bounding box intersects `window`, by id.
    pub fn objects_in_window(&self, window: Rect) -> Vec<ObjectId> {
        let mut slots = self.slots_in_window(window);
        slots.sort_unstable();
        slots.into_iter().map(|s| ObjectId(s as u64)).collect()
    }

    /// Objects whose effective period envelope `[a, d]` intersects `[lo, hi]`, by id.
    pub fn objects_overlapping_period(&self, lo: f64, hi: f64) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self
            .periods
            .range(..=(StartKey(hi), u32::MAX))
            .filter(|(_, end)| **end >= lo)
            .map(|((_, slot), _)| ObjectId(*slot as u64))
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            crs: self.crs.clone(),
            sources: self.sources.clone(),
            processes: self.processes.clone(),
            gazetteers: self.gazetteers.clone(),
            objects: self.objects.iter().map(|e| e.object.clone()).collect(),
        }
    }

    /// Rebuilds a registry, indexes included, from a snapshot.
    pub fn from_snapshot(snapshot: RegistrySnapshot) -> Result<Self, RegistryError> {
        let bad = |msg: String| RegistryError::BadSnapshot(msg);
        let mut registry = Self::bare(snapshot.crs);
        for (i, s) in snapshot.sources.into_iter().enumerate() {
            if s.id.0 as usize != i {
                return Err(bad(format!("source {} out of sequence", s.id)));
            }
            let id = registry.register_source(NewSource {
                name: s.name,
                description: s.description,
                default_period: s.default_period,
                default_accuracy: s.default_accuracy,
            })?;
            debug_assert_eq!(id, s.id);
        }
        for (i, p) in snapshot.processes.into_iter().enumerate() {
            if p.id.0 as usize != i {
                return Err(bad(format!("process {} out of sequence", p.id)));
            }
            registry.register_process(NewProcess {
                name: p.name,
                description: p.description,
                digitizing_precision: p.digitizing_precision,
            })?;
        }
        for (i, g) in snapshot.gazetteers.into_iter().enumerate() {
            if g.id.0 as usize != i {
                return Err(bad(format!("gazetteer {} out of sequence", g.id)));
            }
            if registry.gazetteer_names.contains_key(&g.name) {
                return Err(RegistryError::DuplicateGazetteer(g.name));
            }
            registry.push_gazetteer(g.name, g.scale_class);
        }
        if !registry.gazetteer_names.contains_key(EDIT_GAZETTEER) || !registry.process_names.contains_key(EDIT_PROCESS) {
            return Err(bad("built-in edit gazetteer or process missing".into()));
        }
        for (i, o) in snapshot.objects.into_iter().enumerate() {
            if o.id.0 as usize != i {
                return Err(bad(format!("object {} out of sequence", o.id)));
            }
            let target = registry
                .gazetteer(o.gazetteer)
                .ok_or_else(|| RegistryError::UnknownGazetteer(o.gazetteer.to_string()))?
                .clone();
            let prepared = registry.prepare(
                o.id,
                &target,
                NewObject {
                    historical_name: o.historical_name,
                    normalized_name: Some(o.normalized_name),
                    source: o.source,
                    process: o.process,
                    period: o.period,
                    geometry: o.geometry,
                    accuracy: o.accuracy,
                    scale_class: Some(o.scale_class),
                },
            )?;
            registry.index(prepared);
        }
        Ok(registry)
    }
}
