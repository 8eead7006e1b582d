//! Service configuration: a TOML file, then `HISTGEO_*` environment
//! overrides.

use std::path::{Path, PathBuf};

use histgeo::geocoder::{GeocoderConfig, RankingMode, DEFAULT_MAX_STRING_DISTANCE};
use histgeo::geometry::CrsId;
use histgeo::scoring::{ScaleDistanceMode, ScaleRange, ScoringExpression, DEFAULT_EXPRESSION};
use serde::Deserialize;
use thiserror::Error;

use crate::engine::EngineOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Toml { path: PathBuf, message: String },
    #[error("{var}: {message}")]
    Env { var: String, message: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeocoderSettings {
    pub scoring: String,
    pub max_string_distance: f64,
    pub max_results: usize,
    pub ranking: RankingMode,
    pub scale_mode: ScaleDistanceMode,
    pub scale_low: f64,
    pub scale_high: f64,
}

impl Default for GeocoderSettings {
    fn default() -> Self {
        let range = ScaleRange::default();
        Self {
            scoring: DEFAULT_EXPRESSION.to_string(),
            max_string_distance: DEFAULT_MAX_STRING_DISTANCE,
            max_results: 1,
            ranking: RankingMode::default(),
            scale_mode: ScaleDistanceMode::default(),
            scale_low: range.low,
            scale_high: range.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Directory served at `/` for the web UI bundle.
    pub static_dir: Option<PathBuf>,
    pub crs: String,
    /// Abbreviation table replacing the built-in one.
    pub abbreviations: Option<PathBuf>,
    /// `fsync` after every journal entry.
    pub sync_journal: bool,
    pub geocoder: GeocoderSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            static_dir: None,
            crs: histgeo::geometry::DEFAULT_CRS.into(),
            abbreviations: None,
            sync_journal: true,
            geocoder: GeocoderSettings::default(),
        }
    }
}

pub const ENV_PREFIX: &str = "HISTGEO_";

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml { path: origin.to_path_buf(), message: e.to_string() })
    }

    /// Reads `path` if given, applies the process environment, validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                Self::parse(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        config.geocoder_config()?;
        Ok(config)
    }

    /// Applies `HISTGEO_LISTEN`, `_DATA_DIR`, `_STATIC_DIR`, `_CRS`,
    /// `_ABBREVIATIONS`, `_SYNC_JOURNAL`, `_SCORING`, `_MAXDIST`,
    /// `_MAXRESULTS`, `_RANKING`. Other `HISTGEO_` names are errors.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            let bad = |message: String| ConfigError::Env { var: key.clone(), message };
            match name {
                "LISTEN" => self.listen = value,
                "DATA_DIR" => self.data_dir = value.into(),
                "STATIC_DIR" => self.static_dir = Some(value.into()),
                "CRS" => self.crs = value,
                "ABBREVIATIONS" => self.abbreviations = Some(value.into()),
                "SYNC_JOURNAL" => self.sync_journal = parse_bool(&value).map_err(bad)?,
                "SCORING" => self.geocoder.scoring = value,
                "MAXDIST" => self.geocoder.max_string_distance = value.parse().map_err(|e| bad(format!("{e}")))?,
                "MAXRESULTS" => self.geocoder.max_results = value.parse().map_err(|e| bad(format!("{e}")))?,
                "RANKING" => {
                    self.geocoder.ranking = match value.as_str() {
                        "fallback" => RankingMode::Fallback,
                        "pooled" => RankingMode::Pooled,
                        other => return Err(bad(format!("unknown ranking {other:?}"))),
                    }
                }
                _ => return Err(bad("unknown setting".into())),
            }
        }
        Ok(())
    }

    pub fn geocoder_config(&self) -> Result<GeocoderConfig, ConfigError> {
        let g = &self.geocoder;
        let scoring: ScoringExpression = g.scoring.parse().map_err(|e| ConfigError::Invalid(format!("scoring: {e}")))?;
        let scale_range =
            ScaleRange::new(g.scale_low, g.scale_high).map_err(|e| ConfigError::Invalid(format!("scale range: {e}")))?;
        if !(0.0..=1.0).contains(&g.max_string_distance) {
            return Err(ConfigError::Invalid(format!("max_string_distance {} outside [0, 1]", g.max_string_distance)));
        }
        if g.max_results == 0 {
            return Err(ConfigError::Invalid("max_results must be at least 1".into()));
        }
        Ok(GeocoderConfig { ranking: g.ranking, scale_mode: g.scale_mode, scale_range, scoring })
    }

    pub fn engine_options(&self) -> Result<EngineOptions, ConfigError> {
        Ok(EngineOptions { crs: CrsId::new(&self.crs), geocoder: self.geocoder_config()?, sync: self.sync_journal })
    }
}

pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got {other:?}")),
    }
}
