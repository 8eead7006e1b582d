//! Historical geocoding over coexisting gazetteers of geohistorical objects.
//!
//! An address and an optional fuzzy date are matched against every
//! registered gazetteer. Candidates are described by six distances (string,
//! temporal, building number, positional accuracy, level of detail and
//! spatial) and ranked by a user-supplied expression over them.

pub mod fuzzy_time;
pub mod gazetteer;
pub mod geocoder;
pub mod ingest;
pub mod geometry;
pub mod georef;
pub mod scoring;
pub mod text;

pub use fuzzy_time::{parse_fuzzy_date, temporal_distance, FuzzyPeriod, PeriodError};
pub use gazetteer::{
    GazetteerId, GazetteerRegistry, GeoHistoricalObject, NewObject, NewProcess, NewSource, ObjectId, ProcessId,
    RegistryError, ScaleClass, ScaleFilter, SourceId,
};
pub use geocoder::{batch_geocode, geocode, GeocodeQuery, GeocodeResult, GeocoderConfig};
pub use geometry::{Coord, CrsId, Geometry, GeometryError, Polygon, Rect, Shape};
pub use scoring::{parse_expression, MetricVector, ScoringExpression};
pub use text::{building_number_distance, normalize, string_distance, trigram_set};
