//! Command-line front end. Flags mirror the REST parameter names.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use histgeo::fuzzy_time::{parse_fuzzy_date, FuzzyPeriod};
use histgeo::gazetteer::{NewProcess, NewSource, ScaleClass};
use histgeo::geocoder::{evaluate_against_ground_truth, EvaluatedRow, TruthRow};
use histgeo::geometry::Coord;
use histgeo::georef::{fit_affine, fit_polynomial, fit_tps, read_gcps, residuals};
use histgeo::ingest::{write_rejects, Equirectangular, InputFormat, LoadTarget, Mapping};
use histgeo::scoring::ScoringExpression;
use histgeo::GeocodeQuery;
use serde_json::json;
use thiserror::Error;

use crate::api::{ApiResult, GeocodeResponse};
use crate::batch_csv::{merge_outcomes, parse_batch_csv, BatchCsvOptions};
use crate::config::Config;
use crate::engine::{Engine, PersistRow, QueryEcho, SetKind};
use crate::http::{install_abbreviations, serve};

#[derive(Debug, Parser)]
#[command(name = "histgeo", version, about = "Historical geocoder")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long = "data-dir", global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a gazetteer file into the data directory.
    Ingest(IngestArgs),
    /// Geocode one address and print ranked results as JSON.
    Geocode(GeocodeArgs),
    /// Geocode a CSV file.
    Batch(BatchArgs),
    /// Bucket result-to-truth distances into the error histogram.
    Evaluate(EvaluateArgs),
    /// Fit a transform from ground control points.
    Georef(GeorefArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub maxresults: Option<usize>,
    #[arg(long)]
    pub maxdist: Option<f64>,
    /// Precise-scale results only.
    #[arg(long)]
    pub precision: bool,
    #[arg(long)]
    pub scoring: Option<String>,
    /// Store results under a new ruid.
    #[arg(long)]
    pub persist: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// delimited or json-features; guessed from the extension when absent.
    #[arg(long)]
    pub format: Option<String>,
    /// key=value mapping file.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub gazetteer: String,
    /// Needed when the gazetteer does not exist yet.
    #[arg(long = "scale-class")]
    pub scale_class: Option<ScaleClass>,
    #[arg(long)]
    pub source: String,
    /// Default period when the source does not exist yet.
    #[arg(long = "source-period")]
    pub source_period: Option<String>,
    #[arg(long = "source-accuracy")]
    pub source_accuracy: Option<f64>,
    #[arg(long)]
    pub process: String,
    #[arg(long = "process-precision")]
    pub process_precision: Option<f64>,
    /// Treat coordinates as longitude,latitude and project around this
    /// origin, given as `LON0,LAT0`.
    #[arg(long)]
    pub project: Option<String>,
    /// Period for projected modern rows without their own.
    #[arg(long)]
    pub period: Option<String>,
    /// Accuracy in meters for projected modern rows without their own.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Where to write rejected rows.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Compact the journal into a snapshot afterwards.
    #[arg(long)]
    pub snapshot: bool,
}

#[derive(Debug, Args)]
pub struct GeocodeArgs {
    #[arg(long)]
    pub address: String,
    #[arg(long)]
    pub date: Option<String>,
    #[command(flatten)]
    pub query: QueryArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: PathBuf,
    #[arg(long = "address-column", default_value = "address")]
    pub address_column: String,
    #[arg(long = "date-column")]
    pub date_column: Option<String>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    #[command(flatten)]
    pub query: QueryArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Geocoded CSV with `x`, `y`, `score`, `w_d`, `t_d` columns.
    #[arg(long)]
    pub results: PathBuf,
    /// CSV with `x`, `y` columns.
    #[arg(long)]
    pub truth: PathBuf,
    /// Column joining the two files.
    #[arg(long = "id-column", default_value = "id")]
    pub id_column: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Affine,
    Polynomial,
    Tps,
}

#[derive(Debug, Args)]
pub struct GeorefArgs {
    /// Columns `src_x`, `src_y`, `dst_x`, `dst_y`.
    #[arg(long)]
    pub gcps: PathBuf,
    #[arg(long, value_enum, default_value = "affine")]
    pub method: Method,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Also write the transform alone to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long = "static-dir")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Serve(#[from] crate::http::ServeError),
    #[error(transparent)]
    Ingest(#[from] histgeo::ingest::IngestError),
    #[error(transparent)]
    Georef(#[from] histgeo::georef::GeorefError),
    #[error(transparent)]
    Evaluation(#[from] histgeo::geocoder::EvaluationError),
    #[error(transparent)]
    Geocode(#[from] histgeo::geocoder::GeocodeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Output(#[from] io::Error),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn period(text: &str, what: &str) -> Result<FuzzyPeriod, CliError> {
    parse_fuzzy_date(text).map_err(|e| usage(format!("{what}: {e}")))
}

fn template(args: &QueryArgs, config: &Config, address: &str) -> Result<GeocodeQuery, CliError> {
    let mut q = GeocodeQuery::new(address)
        .with_max_results(args.maxresults.unwrap_or(config.geocoder.max_results))
        .with_max_string_distance(args.maxdist.unwrap_or(config.geocoder.max_string_distance))
        .with_rough_fallback(!args.precision);
    if let Some(s) = &args.scoring {
        let expr: ScoringExpression = s.parse().map_err(|e| usage(format!("scoring: {e}")))?;
        q = q.with_scoring(expr);
    }
    Ok(q)
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(d) = &cli.data_dir {
        config.data_dir = d.clone();
    }
    install_abbreviations(&config)?;
    Ok(config)
}

/// Opens the data directory for writing.
fn open_engine(config: &Config) -> Result<Engine, CliError> {
    let (engine, report) = Engine::open(&config.data_dir, config.engine_options()?)?;
    if let Some(stop) = report.stop {
        eprintln!("journal: recovered after {stop:?}");
    }
    Ok(engine)
}

/// Loads the data directory without touching its files.
fn read_engine(config: &Config) -> Result<Engine, CliError> {
    let (engine, report, _, _) = Engine::replay(&config.data_dir, &config.engine_options()?)?;
    if report.is_corrupt() {
        return Err(crate::engine::EngineError::Corrupt(report).into());
    }
    Ok(engine)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => ingest(&load_config(&cli)?, a, out),
        Command::Geocode(a) => geocode_one(&load_config(&cli)?, a, out),
        Command::Batch(a) => batch(&load_config(&cli)?, a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Georef(a) => georef(a, out),
        Command::Serve(a) => {
            let mut config = load_config(&cli)?;
            if let Some(l) = &a.listen {
                config.listen = l.clone();
            }
            if let Some(d) = &a.static_dir {
                config.static_dir = Some(d.clone());
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(config))?;
            Ok(())
        }
    }
}

fn ingest(config: &Config, a: &IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut engine = open_engine(config)?;
    let source = match engine.registry().source_by_name(&a.source) {
        Some(s) => s.id,
        None => {
            let p = a.source_period.as_deref().ok_or_else(|| usage(format!("source {:?} is new: give --source-period", a.source)))?;
            let acc = a.source_accuracy.ok_or_else(|| usage(format!("source {:?} is new: give --source-accuracy", a.source)))?;
            engine.register_source(NewSource::new(&a.source, period(p, "source-period")?, acc))?
        }
    };
    let process = match engine.registry().process_by_name(&a.process) {
        Some(p) => p.id,
        None => {
            let prec = a
                .process_precision
                .ok_or_else(|| usage(format!("process {:?} is new: give --process-precision", a.process)))?;
            engine.register_process(NewProcess::new(&a.process, prec))?
        }
    };
    let gazetteer = match engine.registry().gazetteer_by_name(&a.gazetteer) {
        Some(g) => g.id,
        None => {
            let class = a.scale_class.ok_or_else(|| usage(format!("gazetteer {:?} is new: give --scale-class", a.gazetteer)))?;
            engine.create_gazetteer(&a.gazetteer, class)?
        }
    };
    let format = match &a.format {
        Some(f) => f.parse::<InputFormat>().map_err(usage)?,
        None => InputFormat::from_path(&a.file),
    };
    let mapping = match &a.mapping {
        Some(m) => Mapping::load(m)?,
        None => Mapping::default(),
    };
    let target = LoadTarget { gazetteer, source, process };
    let reader = open(&a.file)?;
    let report = match &a.project {
        Some(origin) => {
            let (lon0, lat0) = origin
                .split_once(',')
                .and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)))
                .ok_or_else(|| usage("--project expects LON0,LAT0"))?;
            let proj = Equirectangular::new(lon0, lat0).map_err(|e| usage(e.to_string()))?;
            let p = period(a.period.as_deref().ok_or_else(|| usage("--project needs --period"))?, "period")?;
            let acc = a.accuracy.ok_or_else(|| usage("--project needs --accuracy"))?;
            engine.load_modern_addresses(reader, format, &mapping, &proj, p, acc, target)?
        }
        None => engine.load_objects(reader, format, &mapping, target)?,
    };
    if let Some(path) = &a.rejects {
        write_rejects(&report.rejects, create(path)?)?;
    }
    if a.snapshot {
        engine.save_snapshot()?;
    }
    engine.flush()?;
    writeln!(out, "rows {} | inserted {} | rejected {}", report.rows, report.inserted.len(), report.rejects.len())?;
    Ok(())
}

fn geocode_one(config: &Config, a: &GeocodeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut q = template(&a.query, config, &a.address)?;
    if let Some(d) = &a.date {
        q.period = Some(period(d, "date")?);
    }
    let response = if a.query.persist {
        let mut engine = open_engine(config)?;
        let results = engine.geocode(&q)?;
        let status = crate::engine::status_of(&results);
        let query = QueryEcho::new(&q, a.date.as_deref(), engine.config());
        let outcome = histgeo::geocoder::BatchRowResult { results, status, error: None };
        let ruid = engine.persist(SetKind::Single, vec![PersistRow { query, outcome }])?;
        engine.flush()?;
        let set = engine.result_set(&ruid).expect("just persisted");
        let results = set.records.iter().filter_map(|r| r.result.as_ref().map(|x| ApiResult::new(x, Some(r.id)))).collect();
        GeocodeResponse { ruid: Some(ruid), results }
    } else {
        let engine = read_engine(config)?;
        let results = engine.geocode(&q)?.iter().map(|r| ApiResult::new(r, None)).collect();
        GeocodeResponse { ruid: None, results }
    };
    serde_json::to_writer_pretty(&mut *out, &response).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn batch(config: &Config, a: &BatchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !a.delimiter.is_ascii() {
        return Err(usage("--delimiter must be a single ASCII character"));
    }
    let options = BatchCsvOptions {
        address_column: a.address_column.clone(),
        date_column: a.date_column.clone(),
        delimiter: a.delimiter as u8,
    };
    let mut bytes = Vec::new();
    open(&a.input)?.read_to_end(&mut bytes).map_err(|source| CliError::Io { path: a.input.clone(), source })?;
    let csv = parse_batch_csv(&bytes, &options).map_err(|e| usage(e.to_string()))?;
    let q = template(&a.query, config, "-")?;
    let mut engine = if a.query.persist { open_engine(config)? } else { read_engine(config)? };
    let readable: Vec<_> = csv.inputs.iter().filter_map(|i| i.as_ref().ok().cloned()).collect();
    let output = engine.batch(&readable, &q);
    let outcomes = merge_outcomes(&csv.inputs, output.rows);
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(e) = &o.error {
            eprintln!("row {}: {e}", i + 1);
        }
    }
    create(&a.output)?.write_all(&csv.write(&outcomes))?;
    let report = &output.report;
    let unreadable = csv.len() - readable.len();
    writeln!(out, "{}", histgeo::geocoder::BatchReport::TABLE_HEADER)?;
    let name = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let mut full = report.clone();
    full.rows += unreadable;
    full.errors += unreadable;
    writeln!(out, "{}", full.table_row(name))?;
    if a.query.persist {
        let rows = csv
            .inputs
            .iter()
            .zip(outcomes)
            .map(|(input, outcome)| {
                let (address, date) = match input {
                    Ok(i) => (i.address.as_str(), i.date.as_deref()),
                    Err(_) => ("", None),
                };
                PersistRow { query: QueryEcho::new(&q.for_address(address), date, engine.config()), outcome }
            })
            .collect();
        let ruid = engine.persist(SetKind::Batch, rows)?;
        engine.flush()?;
        writeln!(out, "ruid {ruid}")?;
    }
    Ok(())
}

/// Index of the last column named `name`; appended result columns come
/// after any same-named input columns.
fn last_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    (0..headers.len()).rev().find(|i| headers[*i].trim() == name)
}

fn required(headers: &csv::StringRecord, name: &str, file: &Path) -> Result<usize, CliError> {
    last_column(headers, name).ok_or_else(|| usage(format!("{}: no {name:?} column", file.display())))
}

fn number(record: &csv::StringRecord, i: usize) -> Result<Option<f64>, CliError> {
    let v = record.get(i).unwrap_or("").trim();
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| usage(format!("not a number: {v:?}")))
}

pub fn read_evaluated<R: Read>(reader: R, id_column: &str, file: &Path) -> Result<Vec<EvaluatedRow>, CliError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let id = required(&headers, id_column, file)?;
    let (x, y) = (required(&headers, "x", file)?, required(&headers, "y", file)?);
    let score = last_column(&headers, "score");
    let w_d = last_column(&headers, "w_d");
    let t_d = last_column(&headers, "t_d");
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let point = match (number(&rec, x)?, number(&rec, y)?) {
            (Some(x), Some(y)) => Some(Coord::new(x, y)),
            _ => None,
        };
        let opt = |i: Option<usize>| i.map(|i| number(&rec, i)).transpose().map(Option::flatten);
        rows.push(EvaluatedRow {
            id: rec.get(id).unwrap_or("").to_string(),
            point,
            score: if point.is_some() { opt(score)? } else { None },
            w_d: opt(w_d)?.unwrap_or(0.0),
            t_d: opt(t_d)?.unwrap_or(0.0),
        });
    }
    Ok(rows)
}

pub fn read_truth<R: Read>(reader: R, id_column: &str, file: &Path) -> Result<Vec<TruthRow>, CliError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let id = required(&headers, id_column, file)?;
    let (x, y) = (required(&headers, "x", file)?, required(&headers, "y", file)?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(id).unwrap_or("").to_string();
        match (number(&rec, x)?, number(&rec, y)?) {
            (Some(x), Some(y)) => rows.push(TruthRow { id, point: Coord::new(x, y) }),
            _ => return Err(usage(format!("{}: row {id:?} has no coordinates", file.display()))),
        }
    }
    Ok(rows)
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let results = read_evaluated(open(&a.results)?, &a.id_column, &a.results)?;
    let truth = read_truth(open(&a.truth)?, &a.id_column, &a.truth)?;
    let histogram = evaluate_against_ground_truth(&results, &truth)?;
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &histogram).map_err(io::Error::from)?;
        writeln!(out)?;
    } else {
        writeln!(out, "{histogram}")?;
    }
    Ok(())
}

fn georef(a: &GeorefArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let gcps = read_gcps(open(&a.gcps)?)?;
    let transform = match a.method {
        Method::Affine => fit_affine(&gcps)?,
        Method::Polynomial => fit_polynomial(&gcps, a.order)?,
        Method::Tps => fit_tps(&gcps, a.lambda)?,
    };
    let res = residuals(&transform, &gcps);
    if let Some(path) = &a.out {
        serde_json::to_writer_pretty(create(path)?, &transform).map_err(io::Error::from)?;
    }
    serde_json::to_writer_pretty(&mut *out, &json!({ "transform": transform, "residuals": res })).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}
