//! Service state: the registry plus persisted result sets and edit records.
//!
//! Every mutation goes through [`Engine::commit`]: it is applied in memory
//! (all or nothing) and then appended to the journal. Replaying the
//! snapshot and journal runs the same `apply`, so a replayed engine is
//! byte-identical to the one that wrote the journal.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use histgeo::fuzzy_time::FuzzyPeriod;
use histgeo::gazetteer::{
    GazetteerId, GazetteerRegistry, GeoHistoricalObject, NewObject, NewProcess, NewSource, ObjectId, ProcessId,
    RegistryError, RegistrySnapshot, ScaleClass, SourceId,
};
use histgeo::geocoder::{batch_geocode, geocode, BatchInput, BatchOutput, BatchRowResult, GeocodeError, RowStatus};
use histgeo::geometry::{CrsId, Geometry};
use histgeo::ingest::{self, Equirectangular, IngestError, InputFormat, LoadReport, LoadTarget, Mapping};
use histgeo::{GeocodeQuery, GeocodeResult, GeocoderConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::journal::{self, Journal, JournalError, ReplayReport, ReplayStop, JOURNAL_FILE, SNAPSHOT_FILE};

/// Random 128-bit result-set identifier as 32 lowercase hex digits.
pub fn new_ruid() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// The parameters a result was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEcho {
    pub address: String,
    pub date: Option<String>,
    pub max_results: usize,
    pub max_string_distance: f64,
    pub allow_rough_fallback: bool,
    pub scoring: String,
}

impl QueryEcho {
    pub fn new(q: &GeocodeQuery, date: Option<&str>, config: &GeocoderConfig) -> Self {
        Self {
            address: q.raw_address.clone(),
            date: date.map(str::to_string),
            max_results: q.max_results,
            max_string_distance: q.max_string_distance,
            allow_rough_fallback: q.allow_rough_fallback,
            scoring: q.scoring.as_ref().unwrap_or(&config.scoring).to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Single,
    Batch,
}

/// One persisted result. Unmatched and failed rows get a record with no
/// result so the whole input stays visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// Global, sequential across all result sets.
    pub id: u64,
    pub ruid: String,
    pub row_index: usize,
    pub query: QueryEcho,
    pub status: RowStatus,
    pub error: Option<String>,
    pub result: Option<GeocodeResult>,
    pub created_at: String,
    pub edited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub ruid: String,
    pub kind: SetKind,
    pub created_at: String,
    pub records: Vec<ResultRecord>,
}

/// A geocoded row waiting to be persisted.
#[derive(Debug, Clone)]
pub struct PersistRow {
    pub query: QueryEcho,
    pub outcome: BatchRowResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub geometry: Option<Geometry>,
    pub period: Option<FuzzyPeriod>,
    pub historical_name: Option<String>,
    pub normalized_name: Option<String>,
    pub note: Option<String>,
}

impl EditRequest {
    pub fn is_empty(&self) -> bool {
        self.geometry.is_none() && self.period.is_none() && self.historical_name.is_none() && self.normalized_name.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub ruid: String,
    pub result_id: u64,
    pub original: ObjectId,
    pub object: ObjectId,
    pub geometry: Option<Geometry>,
    pub period: Option<FuzzyPeriod>,
    pub historical_name: Option<String>,
    pub normalized_name: Option<String>,
    pub note: Option<String>,
    pub created_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    RegisterSource { source: NewSource },
    RegisterProcess { process: NewProcess },
    CreateGazetteer { name: String, scale_class: ScaleClass },
    InsertObjects { gazetteer: GazetteerId, objects: Vec<NewObject> },
    PersistResults { set: ResultSet },
    Edit { record: Box<EditRecord>, object: Box<NewObject> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Source(SourceId),
    Process(ProcessId),
    Gazetteer(GazetteerId),
    Objects(Vec<ObjectId>),
    Results(String),
    Edit(ObjectId),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Geocode(#[from] GeocodeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("unknown result {0}")]
    UnknownResult(u64),
    #[error("result {result} does not belong to the presented ruid")]
    RuidMismatch { result: u64 },
    #[error("result {0} has no geocoded object to edit")]
    NoResultToEdit(u64),
    #[error("an edit needs at least one of geometry, period or names")]
    EmptyEdit,
    #[error("inconsistent mutation: {0}")]
    Inconsistent(String),
    #[error("journal replay stopped: {0:?}")]
    Corrupt(ReplayReport),
    #[error("state is read-only after a failed journal write: {0}")]
    Poisoned(String),
    #[error("engine has no data directory")]
    NoDataDir,
}

#[derive(Serialize, Deserialize)]
struct PersistedState {
    registry: RegistrySnapshot,
    results: Vec<ResultSet>,
    edits: Vec<EditRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// CRS of a fresh registry; a snapshot's own CRS wins.
    pub crs: CrsId,
    pub geocoder: GeocoderConfig,
    /// `fsync` after each journal entry.
    pub sync: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { crs: CrsId::default(), geocoder: GeocoderConfig::default(), sync: true }
    }
}

pub struct Engine {
    registry: GazetteerRegistry,
    results: Vec<ResultSet>,
    by_ruid: HashMap<String, usize>,
    /// Result id -> (set index, record index).
    records: Vec<(usize, usize)>,
    edits: Vec<EditRecord>,
    config: GeocoderConfig,
    dir: Option<PathBuf>,
    journal: Option<Journal>,
    poisoned: Option<String>,
}

impl Engine {
    pub fn in_memory(options: EngineOptions) -> Self {
        Self::from_parts(GazetteerRegistry::new(options.crs), options.geocoder)
    }

    fn from_parts(registry: GazetteerRegistry, config: GeocoderConfig) -> Self {
        Self {
            registry,
            results: Vec::new(),
            by_ruid: HashMap::new(),
            records: Vec::new(),
            edits: Vec::new(),
            config,
            dir: None,
            journal: None,
            poisoned: None,
        }
    }

    fn from_state(state: PersistedState, config: GeocoderConfig) -> Result<Self, EngineError> {
        let mut engine = Self::from_parts(GazetteerRegistry::from_snapshot(state.registry)?, config);
        for set in state.results {
            engine.apply(&Mutation::PersistResults { set })?;
        }
        for record in state.edits {
            engine.index_edit(record)?;
        }
        Ok(engine)
    }

    /// Rebuilds state from `dir` without opening the journal for writing.
    /// Replay stops at the first bad entry; the report says where.
    pub fn replay(dir: &Path, options: &EngineOptions) -> Result<(Self, ReplayReport, u64, u64), EngineError> {
        let (mut engine, last_seq) = match journal::read_snapshot::<PersistedState>(&dir.join(SNAPSHOT_FILE))? {
            Some((seq, state)) => (Self::from_state(state, options.geocoder.clone())?, seq),
            None => (Self::in_memory(options.clone()), 0),
        };
        let contents = journal::read_journal::<Mutation>(&dir.join(JOURNAL_FILE))?;
        let mut report = ReplayReport { stop: contents.stop, ..Default::default() };
        let mut expected = last_seq + 1;
        let mut valid_len = contents.valid_len;
        for (seq, m) in &contents.entries {
            if *seq < expected {
                report.skipped += 1;
                continue;
            }
            let failure = if *seq > expected {
                Some(format!("sequence {seq} but snapshot ends at {}", expected - 1))
            } else {
                engine.apply(m).err().map(|e| e.to_string())
            };
            if let Some(reason) = failure {
                let line = report.applied + report.skipped + 1;
                report.stop = Some(ReplayStop::Corrupt { line, offset: 0, reason });
                valid_len = 0;
                break;
            }
            report.applied += 1;
            expected += 1;
        }
        Ok((engine, report, valid_len, expected))
    }

    /// Loads `dir` (created if missing) and opens its journal for appends.
    /// A torn final entry is dropped and reported; any other corruption is
    /// an error.
    pub fn open(dir: &Path, options: EngineOptions) -> Result<(Self, ReplayReport), EngineError> {
        std::fs::create_dir_all(dir).map_err(|source| JournalError::Io { path: dir.to_path_buf(), source })?;
        let (mut engine, report, valid_len, next_seq) = Self::replay(dir, &options)?;
        if report.is_corrupt() {
            return Err(EngineError::Corrupt(report));
        }
        engine.journal = Some(Journal::open(&dir.join(JOURNAL_FILE), valid_len, next_seq, options.sync)?);
        engine.dir = Some(dir.to_path_buf());
        Ok((engine, report))
    }

    pub fn registry(&self) -> &GazetteerRegistry {
        &self.registry
    }

    pub fn config(&self) -> &GeocoderConfig {
        &self.config
    }

    pub fn result_set(&self, ruid: &str) -> Option<&ResultSet> {
        self.by_ruid.get(ruid).map(|i| &self.results[*i])
    }

    pub fn result_sets(&self) -> &[ResultSet] {
        &self.results
    }

    pub fn record(&self, id: u64) -> Option<&ResultRecord> {
        let (s, r) = *self.records.get(usize::try_from(id).ok()?)?;
        Some(&self.results[s].records[r])
    }

    pub fn edits(&self) -> &[EditRecord] {
        &self.edits
    }

    pub fn edits_for(&self, ruid: &str) -> impl Iterator<Item = &EditRecord> {
        let ruid = ruid.to_string();
        self.edits.iter().filter(move |e| e.ruid == ruid)
    }

    fn index_edit(&mut self, record: EditRecord) -> Result<(), EngineError> {
        let (s, r) = *usize::try_from(record.result_id)
            .ok()
            .and_then(|i| self.records.get(i))
            .ok_or(EngineError::UnknownResult(record.result_id))?;
        let target = &mut self.results[s].records[r];
        if target.ruid != record.ruid {
            return Err(EngineError::RuidMismatch { result: record.result_id });
        }
        target.edited = true;
        self.edits.push(record);
        Ok(())
    }

    fn apply(&mut self, m: &Mutation) -> Result<Applied, EngineError> {
        Ok(match m {
            Mutation::RegisterSource { source } => Applied::Source(self.registry.register_source(source.clone())?),
            Mutation::RegisterProcess { process } => Applied::Process(self.registry.register_process(process.clone())?),
            Mutation::CreateGazetteer { name, scale_class } => {
                Applied::Gazetteer(self.registry.create_gazetteer(name, *scale_class)?)
            }
            Mutation::InsertObjects { gazetteer, objects } => {
                Applied::Objects(self.registry.insert_objects(*gazetteer, objects.clone())?)
            }
            Mutation::PersistResults { set } => {
                if self.by_ruid.contains_key(&set.ruid) {
                    return Err(EngineError::Inconsistent(format!("ruid {} already used", set.ruid)));
                }
                let base = self.records.len() as u64;
                for (i, r) in set.records.iter().enumerate() {
                    if r.id != base + i as u64 || r.ruid != set.ruid {
                        return Err(EngineError::Inconsistent(format!("record {} out of sequence", r.id)));
                    }
                }
                let index = self.results.len();
                self.records.extend((0..set.records.len()).map(|r| (index, r)));
                self.by_ruid.insert(set.ruid.clone(), index);
                self.results.push(set.clone());
                Applied::Results(set.ruid.clone())
            }
            Mutation::Edit { record, object } => {
                let target = self.record(record.result_id).ok_or(EngineError::UnknownResult(record.result_id))?;
                if target.ruid != record.ruid {
                    return Err(EngineError::RuidMismatch { result: record.result_id });
                }
                match &target.result {
                    Some(r) if r.object.id == record.original => {}
                    _ => return Err(EngineError::Inconsistent(format!("edit of result {}", record.result_id))),
                }
                if record.object != ObjectId(self.registry.len() as u64) {
                    return Err(EngineError::Inconsistent(format!("edit creates object {}", record.object)));
                }
                let ids = self.registry.insert_objects(self.registry.edit_gazetteer(), vec![(**object).clone()])?;
                self.index_edit((**record).clone())?;
                Applied::Edit(ids[0])
            }
        })
    }

    /// Applies a mutation and journals it. A failed journal write leaves
    /// the engine refusing further mutations.
    pub fn commit(&mut self, m: Mutation) -> Result<Applied, EngineError> {
        if let Some(reason) = &self.poisoned {
            return Err(EngineError::Poisoned(reason.clone()));
        }
        let applied = self.apply(&m)?;
        if let Some(journal) = &mut self.journal {
            if let Err(e) = journal.append(&m) {
                self.poisoned = Some(e.to_string());
                return Err(e.into());
            }
        }
        Ok(applied)
    }

    pub fn register_source(&mut self, source: NewSource) -> Result<SourceId, EngineError> {
        match self.commit(Mutation::RegisterSource { source })? {
            Applied::Source(id) => Ok(id),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn register_process(&mut self, process: NewProcess) -> Result<ProcessId, EngineError> {
        match self.commit(Mutation::RegisterProcess { process })? {
            Applied::Process(id) => Ok(id),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn create_gazetteer(&mut self, name: &str, scale_class: ScaleClass) -> Result<GazetteerId, EngineError> {
        match self.commit(Mutation::CreateGazetteer { name: name.to_string(), scale_class })? {
            Applied::Gazetteer(id) => Ok(id),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn insert_objects(&mut self, gazetteer: GazetteerId, objects: Vec<NewObject>) -> Result<Vec<ObjectId>, EngineError> {
        match self.commit(Mutation::InsertObjects { gazetteer, objects })? {
            Applied::Objects(ids) => Ok(ids),
            other => unreachable!("{other:?}"),
        }
    }

    /// Parses a gazetteer file and inserts the good rows as one entry.
    pub fn load_objects<R: Read>(
        &mut self,
        reader: R,
        format: InputFormat,
        mapping: &Mapping,
        target: LoadTarget,
    ) -> Result<LoadReport, EngineError> {
        let parsed = ingest::read_objects(&self.registry, reader, format, mapping, target)?;
        let inserted = self.insert_objects(target.gazetteer, parsed.objects)?;
        Ok(LoadReport { rows: parsed.rows, inserted, rejects: parsed.rejects })
    }

    /// Longitude/latitude variant of [`Engine::load_objects`].
    #[allow(clippy::too_many_arguments)]
    pub fn load_modern_addresses<R: Read>(
        &mut self,
        reader: R,
        format: InputFormat,
        mapping: &Mapping,
        projection: &Equirectangular,
        period: FuzzyPeriod,
        accuracy: f64,
        target: LoadTarget,
    ) -> Result<LoadReport, EngineError> {
        let parsed =
            ingest::read_modern_addresses(&self.registry, reader, format, mapping, projection, period, accuracy, target)?;
        let inserted = self.insert_objects(target.gazetteer, parsed.objects)?;
        Ok(LoadReport { rows: parsed.rows, inserted, rejects: parsed.rejects })
    }

    pub fn geocode(&self, q: &GeocodeQuery) -> Result<Vec<GeocodeResult>, GeocodeError> {
        geocode(q, &self.registry, &self.config)
    }

    pub fn batch(&self, rows: &[BatchInput], template: &GeocodeQuery) -> BatchOutput {
        batch_geocode(rows, template, &self.registry, &self.config)
    }

    /// Stores rows under a fresh ruid.
    pub fn persist(&mut self, kind: SetKind, rows: Vec<PersistRow>) -> Result<String, EngineError> {
        let ruid = new_ruid();
        let created_at = now();
        let mut next = self.records.len() as u64;
        let mut records = Vec::new();
        for (row_index, row) in rows.into_iter().enumerate() {
            let BatchRowResult { results, status, error } = row.outcome;
            let mut push = |result: Option<GeocodeResult>| {
                records.push(ResultRecord {
                    id: next,
                    ruid: ruid.clone(),
                    row_index,
                    query: row.query.clone(),
                    status,
                    error: error.clone(),
                    result,
                    created_at: created_at.clone(),
                    edited: false,
                });
                next += 1;
            };
            if results.is_empty() {
                push(None);
            }
            for r in results {
                push(Some(r));
            }
        }
        let set = ResultSet { ruid: ruid.clone(), kind, created_at, records };
        self.commit(Mutation::PersistResults { set })?;
        Ok(ruid)
    }

    /// Builds the edited copy of a persisted result. The ruid must own the
    /// result.
    pub fn prepare_edit(&self, ruid: &str, result_id: u64, req: &EditRequest) -> Result<(EditRecord, NewObject), EngineError> {
        let record = self.record(result_id).ok_or(EngineError::UnknownResult(result_id))?;
        if record.ruid != ruid {
            return Err(EngineError::RuidMismatch { result: result_id });
        }
        let result = record.result.as_ref().ok_or(EngineError::NoResultToEdit(result_id))?;
        if req.is_empty() {
            return Err(EngineError::EmptyEdit);
        }
        let original: &GeoHistoricalObject = self
            .registry
            .object(result.object.id)
            .ok_or(EngineError::UnknownResult(result_id))?
            .object();
        let mut object = NewObject::new(
            req.historical_name.as_deref().unwrap_or(&original.historical_name),
            original.source,
            self.registry.edit_process(),
            req.geometry.clone().unwrap_or_else(|| original.geometry.clone()),
        );
        object.normalized_name = match (&req.normalized_name, &req.historical_name) {
            (Some(n), _) => Some(n.clone()),
            (None, Some(_)) => None,
            (None, None) => Some(original.normalized_name.clone()),
        };
        object.period = req.period.or(original.period);
        object.accuracy = original.accuracy;
        object.scale_class = Some(original.scale_class);
        self.registry.validate_object(self.registry.edit_gazetteer(), &object)?;
        let record = EditRecord {
            ruid: ruid.to_string(),
            result_id,
            original: original.id,
            object: ObjectId(self.registry.len() as u64),
            geometry: req.geometry.clone(),
            period: req.period,
            historical_name: req.historical_name.clone(),
            normalized_name: req.normalized_name.clone(),
            note: req.note.clone(),
            created_at: now(),
        };
        Ok((record, object))
    }

    /// Appends an edited copy of the result's object to the edit gazetteer.
    pub fn edit(&mut self, ruid: &str, result_id: u64, req: &EditRequest) -> Result<ObjectId, EngineError> {
        let (record, object) = self.prepare_edit(ruid, result_id, req)?;
        match self.commit(Mutation::Edit { record: Box::new(record), object: Box::new(object) })? {
            Applied::Edit(id) => Ok(id),
            other => unreachable!("{other:?}"),
        }
    }

    fn state_ref(&self) -> PersistedState {
        PersistedState {
            registry: self.registry.snapshot(),
            results: self.results.clone(),
            edits: self.edits.clone(),
        }
    }

    /// Canonical serialization of the whole state.
    pub fn canonical_state(&self) -> Vec<u8> {
        serde_json::to_vec(&self.state_ref()).expect("state serializes")
    }

    /// SHA-256 of [`Engine::canonical_state`], hex encoded.
    pub fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_state()))
    }

    /// Writes a snapshot covering every journaled entry, then empties the
    /// journal.
    pub fn save_snapshot(&mut self) -> Result<(), EngineError> {
        let dir = self.dir.clone().ok_or(EngineError::NoDataDir)?;
        let state = self.state_ref();
        let journal = self.journal.as_mut().ok_or(EngineError::NoDataDir)?;
        journal::write_snapshot(&dir.join(SNAPSHOT_FILE), journal.next_seq() - 1, &state)?;
        journal.reset()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        if let Some(j) = &mut self.journal {
            j.flush()?;
        }
        Ok(())
    }
}

/// Row status implied by a ranked result list.
pub fn status_of(results: &[GeocodeResult]) -> RowStatus {
    match results.first().map(|r| r.precision_class) {
        Some(ScaleClass::Precise) => RowStatus::MatchedPrecise,
        Some(ScaleClass::Rough) => RowStatus::MatchedRough,
        None => RowStatus::Unmatched,
    }
}

/// SHA-256 of one object's serialized form.
pub fn object_hash(object: &GeoHistoricalObject) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(object).expect("object serializes")))
}
