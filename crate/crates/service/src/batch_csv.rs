//! Batch CSV: input rows are copied through byte for byte and the match
//! columns are appended.

use histgeo::geocoder::{BatchInput, BatchRowResult, RowStatus};
use thiserror::Error;

pub const APPENDED_COLUMNS: [&str; 13] = [
    "matched_name",
    "x",
    "y",
    "score",
    "w_d",
    "t_d",
    "b_d",
    "s_p",
    "s_d",
    "g_d",
    "gazetteer",
    "precision_class",
    "status",
];

#[derive(Debug, Error, PartialEq)]
pub enum BatchCsvError {
    #[error("input has no header row")]
    NoHeader,
    #[error("address column {0:?} not found in header")]
    MissingAddressColumn(String),
    #[error("date column {0:?} not found in header")]
    MissingDateColumn(String),
    #[error("header is not valid UTF-8")]
    HeaderEncoding,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchCsvOptions {
    pub address_column: String,
    /// `None` uses a `date` column when the header has one.
    pub date_column: Option<String>,
    pub delimiter: u8,
}

impl Default for BatchCsvOptions {
    fn default() -> Self {
        Self { address_column: "address".into(), date_column: None, delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RawLine {
    body: Vec<u8>,
    terminator: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchCsv {
    header: RawLine,
    lines: Vec<RawLine>,
    /// One entry per data row: the geocoder input, or why the row could
    /// not be read.
    pub inputs: Vec<Result<BatchInput, String>>,
    delimiter: u8,
}

fn split_terminator(raw: &[u8]) -> RawLine {
    let cut = if raw.ends_with(b"\r\n") {
        2
    } else if raw.ends_with(b"\n") || raw.ends_with(b"\r") {
        1
    } else {
        0
    };
    RawLine { body: raw[..raw.len() - cut].to_vec(), terminator: raw[raw.len() - cut..].to_vec() }
}

fn field(record: &csv::ByteRecord, index: usize, what: &str) -> Result<String, String> {
    let bytes = record.get(index).ok_or_else(|| format!("row has no {what} field"))?;
    String::from_utf8(bytes.to_vec()).map_err(|_| format!("{what} is not valid UTF-8"))
}

pub fn parse_batch_csv(input: &[u8], options: &BatchCsvOptions) -> Result<BatchCsv, BatchCsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(options.delimiter)
        .from_reader(input);
    let mut record = csv::ByteRecord::new();
    let mut cursor = 0usize;
    let mut read = |record: &mut csv::ByteRecord| -> Result<Option<RawLine>, BatchCsvError> {
        if !reader.read_byte_record(record).map_err(|e| BatchCsvError::Csv(e.to_string()))? {
            return Ok(None);
        }
        let start = record.position().map_or(cursor, |p| p.byte() as usize).max(cursor);
        let mut end = reader.position().byte() as usize;
        // The reader stops a CRLF record after the CR.
        if end > start && input[end - 1] == b'\r' && input.get(end) == Some(&b'\n') {
            end += 1;
        }
        cursor = end;
        Ok(Some(split_terminator(&input[start..end])))
    };
    let header = read(&mut record)?.ok_or(BatchCsvError::NoHeader)?;
    let names: Vec<String> = record
        .iter()
        .map(|f| String::from_utf8(f.to_vec()).map(|s| s.trim_start_matches('\u{feff}').trim().to_string()))
        .collect::<Result<_, _>>()
        .map_err(|_| BatchCsvError::HeaderEncoding)?;
    let find = |name: &str| names.iter().position(|n| n == name);
    let address = find(&options.address_column)
        .ok_or_else(|| BatchCsvError::MissingAddressColumn(options.address_column.clone()))?;
    let date = match &options.date_column {
        Some(name) => Some(find(name).ok_or_else(|| BatchCsvError::MissingDateColumn(name.clone()))?),
        None => find("date"),
    };
    let mut lines = Vec::new();
    let mut inputs = Vec::new();
    while let Some(line) = read(&mut record)? {
        lines.push(line);
        let input = field(&record, address, "address").and_then(|a| {
            let d = date.map(|i| field(&record, i, "date")).transpose()?;
            Ok(BatchInput { address: a, date: d })
        });
        inputs.push(input);
    }
    Ok(BatchCsv { header, lines, inputs, delimiter: options.delimiter })
}

impl BatchCsv {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Original row followed by the appended columns. `outcomes` must hold
    /// one entry per data row.
    pub fn write(&self, outcomes: &[BatchRowResult]) -> Vec<u8> {
        assert_eq!(outcomes.len(), self.lines.len(), "one outcome per row");
        let mut out = Vec::new();
        let default_terminator = if self.header.terminator.is_empty() { b"\n".to_vec() } else { self.header.terminator.clone() };
        let mut emit = |line: &RawLine, extra: Vec<String>| {
            out.extend_from_slice(&line.body);
            out.push(self.delimiter);
            out.extend_from_slice(&self.encode(&extra));
            out.extend_from_slice(if line.terminator.is_empty() { &default_terminator } else { &line.terminator });
        };
        emit(&self.header, APPENDED_COLUMNS.iter().map(|s| s.to_string()).collect());
        for (line, outcome) in self.lines.iter().zip(outcomes) {
            emit(line, appended_fields(outcome));
        }
        out
    }

    fn encode(&self, fields: &[String]) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(self.delimiter)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(fields).expect("writing to memory");
        let mut bytes = w.into_inner().expect("writing to memory");
        bytes.pop();
        bytes
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// The appended values for one row: the top-ranked result, or blanks.
pub fn appended_fields(outcome: &BatchRowResult) -> Vec<String> {
    let status = outcome.status.as_str().to_string();
    match outcome.results.first() {
        Some(r) if matches!(outcome.status, RowStatus::MatchedPrecise | RowStatus::MatchedRough) => {
            let m = &r.metrics;
            vec![
                r.object.historical_name.clone(),
                num(r.point.x),
                num(r.point.y),
                r.score.map(num).unwrap_or_default(),
                num(m.w_d),
                num(m.t_d),
                num(m.b_d),
                num(m.s_p),
                num(m.s_d),
                num(m.g_d),
                r.gazetteer.clone(),
                r.precision_class.to_string(),
                status,
            ]
        }
        _ => {
            let mut v = vec![String::new(); APPENDED_COLUMNS.len() - 1];
            v.push(status);
            v
        }
    }
}

/// Rows that could not be read become error outcomes; the others come from
/// `geocoded` in order.
pub fn merge_outcomes(
    inputs: &[Result<BatchInput, String>],
    geocoded: Vec<BatchRowResult>,
) -> Vec<BatchRowResult> {
    let mut geocoded = geocoded.into_iter();
    inputs
        .iter()
        .map(|i| match i {
            Ok(_) => geocoded.next().expect("one outcome per readable row"),
            Err(e) => BatchRowResult { results: Vec::new(), status: RowStatus::Error, error: Some(e.clone()) },
        })
        .collect()
}
