//! Loading, validating, harmonizing and merging the two input tables: the
//! policy corpus (one summary per row) and the long-format development
//! indicator table.
//!
//! Missing values stay missing all the way through. Nothing here imputes,
//! interpolates or zero-fills indicator cells; the only zero-fill is for
//! theme counts inside a country's observed corpus span, where a year with
//! no documents really does mean zero policies.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::indicators::ThemePanel;
use crate::theme::{CountryCode, ThemeSet};

/// Columns required in a policy corpus file, in documented order.
pub const POLICY_COLUMNS: [&str; 5] = ["doc_id", "country_iso3", "year", "summary_text", "labels"];
/// Optional column written by the classifier.
pub const PREDICTED_COLUMN: &str = "predicted_labels";
/// Columns of the long-format indicator table.
pub const WDI_COLUMNS: [&str; 4] = ["country_iso3", "year", "indicator_code", "value"];

pub const MIN_VALID_YEAR: i32 = 1900;
pub const DEFAULT_MIN_YEAR: i32 = 2015;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate doc_id {doc_id:?}")]
    DuplicateDocId { doc_id: String, line: u64 },
    #[error("line {line}: duplicate observation for key ({country}, {year}, {indicator})")]
    DuplicateKey {
        country: CountryCode,
        year: i32,
        indicator: String,
        line: u64,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("no transform configured for indicator `{0}`")]
    UnknownIndicator(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// One policy summary from the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDocument {
    pub doc_id: String,
    pub country: CountryCode,
    pub year: i32,
    pub summary_text: String,
    /// Empty for unlabeled documents.
    pub gold_labels: ThemeSet,
    /// Present only when the file carries a `predicted_labels` column.
    pub predicted_labels: Option<ThemeSet>,
}

impl PolicyDocument {
    /// Predicted labels when available, gold labels otherwise.
    pub fn effective_labels(&self) -> ThemeSet {
        self.predicted_labels.unwrap_or(self.gold_labels)
    }
}

/// A single country-year value of one development indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorObservation {
    pub country: CountryCode,
    pub year: i32,
    pub indicator_code: String,
    pub value: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn column_positions(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| IngestError::MissingColumn {
                    column: (*name).to_string(),
                })
        })
        .collect()
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_country(cell: &str, line: u64) -> Result<CountryCode> {
    cell.trim().parse().map_err(|e: crate::theme::CountryCodeError| IngestError::Row {
        line,
        message: e.to_string(),
    })
}

fn parse_year(cell: &str, line: u64) -> Result<i32> {
    let year: i32 = cell.trim().parse().map_err(|_| IngestError::Row {
        line,
        message: format!("year {cell:?} is not an integer"),
    })?;
    if year < MIN_VALID_YEAR {
        return Err(IngestError::Row {
            line,
            message: format!("year {year} is before {MIN_VALID_YEAR}"),
        });
    }
    Ok(year)
}

pub fn load_policy_corpus(path: impl AsRef<Path>) -> Result<Vec<PolicyDocument>> {
    read_policy_corpus(open(path.as_ref())?)
}

/// Parse a policy corpus from any reader. Rows come back in file order.
pub fn read_policy_corpus<R: Read>(reader: R) -> Result<Vec<PolicyDocument>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = column_positions(&headers, &POLICY_COLUMNS)?;
    let predicted_col = headers.iter().position(|h| h.trim() == PREDICTED_COLUMN);

    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let cell = |i: usize| record.get(cols[i]).unwrap_or("");

        let doc_id = cell(0).trim().to_string();
        if doc_id.is_empty() {
            return Err(IngestError::Row {
                line,
                message: "empty doc_id".into(),
            });
        }
        let country = parse_country(cell(1), line)?;
        let year = parse_year(cell(2), line)?;
        let summary_text = cell(3).to_string();
        if summary_text.trim().is_empty() {
            return Err(IngestError::Row {
                line,
                message: "summary_text is empty".into(),
            });
        }
        let labels = |raw: &str| {
            ThemeSet::parse_labels(raw).map_err(|e| IngestError::Row {
                line,
                message: e.to_string(),
            })
        };
        let gold_labels = labels(cell(4))?;
        let predicted_labels = match predicted_col {
            Some(i) => Some(labels(record.get(i).unwrap_or(""))?),
            None => None,
        };
        if !seen.insert(doc_id.clone()) {
            return Err(IngestError::DuplicateDocId { doc_id, line });
        }
        docs.push(PolicyDocument {
            doc_id,
            country,
            year,
            summary_text,
            gold_labels,
            predicted_labels,
        });
    }
    Ok(docs)
}

/// Write a corpus in the documented schema. The `predicted_labels` column is
/// emitted when `with_predictions` is set; documents lacking a prediction get
/// an empty cell.
pub fn write_policy_corpus<W: Write>(
    docs: &[PolicyDocument],
    writer: W,
    with_predictions: bool,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = POLICY_COLUMNS.to_vec();
    if with_predictions {
        header.push(PREDICTED_COLUMN);
    }
    wtr.write_record(&header)?;
    for d in docs {
        let year = d.year.to_string();
        let gold = d.gold_labels.to_labels();
        let pred = d.predicted_labels.map(ThemeSet::to_labels).unwrap_or_default();
        let mut row = vec![
            d.doc_id.as_str(),
            d.country.as_str(),
            year.as_str(),
            d.summary_text.as_str(),
            gold.as_str(),
        ];
        if with_predictions {
            row.push(pred.as_str());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn load_wdi_table(path: impl AsRef<Path>) -> Result<Vec<IndicatorObservation>> {
    read_wdi_table(open(path.as_ref())?)
}

/// Parse a long-format indicator table. Blank value cells are missing data
/// and produce no observation.
pub fn read_wdi_table<R: Read>(reader: R) -> Result<Vec<IndicatorObservation>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = column_positions(&headers, &WDI_COLUMNS)?;

    let mut keys: HashSet<(CountryCode, i32, String)> = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let cell = |i: usize| record.get(cols[i]).unwrap_or("").trim();

        let country = parse_country(cell(0), line)?;
        let year = parse_year(cell(1), line)?;
        let indicator_code = cell(2).to_string();
        if indicator_code.is_empty() {
            return Err(IngestError::Row {
                line,
                message: "empty indicator_code".into(),
            });
        }
        if !keys.insert((country, year, indicator_code.clone())) {
            return Err(IngestError::DuplicateKey {
                country,
                year,
                indicator: indicator_code,
                line,
            });
        }
        let raw = cell(3);
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw.parse().map_err(|_| IngestError::Row {
            line,
            message: format!("value {raw:?} is not a number"),
        })?;
        if !value.is_finite() {
            return Err(IngestError::Row {
                line,
                message: format!("value {raw:?} is not finite"),
            });
        }
        out.push(IndicatorObservation {
            country,
            year,
            indicator_code,
            value,
        });
    }
    Ok(out)
}

pub fn write_wdi_table<W: Write>(obs: &[IndicatorObservation], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(WDI_COLUMNS)?;
    for o in obs {
        wtr.write_record([
            o.country.as_str(),
            &o.year.to_string(),
            &o.indicator_code,
            &o.value.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    Log,
    Level,
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "LOG" => Ok(Transform::Log),
            "LEVEL" => Ok(Transform::Level),
            other => Err(format!("transform must be LOG or LEVEL, got {other:?}")),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Log => "LOG",
            Transform::Level => "LEVEL",
        })
    }
}

/// Per-indicator transforms plus the first year kept. Indicator order is the
/// order of the config file, which is also the default outcome order for the
/// regression battery.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizeConfig {
    pub transforms: Vec<(String, Transform)>,
    pub min_year: i32,
}

impl Default for HarmonizeConfig {
    /// Shipped configuration: skewed monetary series logged, FDI left in
    /// levels because inflows can be negative.
    fn default() -> Self {
        use Transform::*;
        let transforms = [
            ("GDP", Log),
            ("GNI_ATLAS", Log),
            ("GNI_PPP", Log),
            ("FDI", Level),
            ("EXT_DEBT", Log),
            ("ELEC_CONS", Level),
            ("ADOL_FERT", Level),
            ("SEC_ENROLL", Level),
        ]
        .into_iter()
        .map(|(c, t)| (c.to_string(), t))
        .collect();
        HarmonizeConfig {
            transforms,
            min_year: DEFAULT_MIN_YEAR,
        }
    }
}

impl HarmonizeConfig {
    pub fn transform_for(&self, code: &str) -> Option<Transform> {
        self.transforms
            .iter()
            .find(|(c, _)| c == code)
            .map(|(_, t)| *t)
    }

    pub fn indicator_codes(&self) -> Vec<String> {
        self.transforms.iter().map(|(c, _)| c.clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<HarmonizeConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Render in the line-oriented config syntax; `parse` of the output gives
    /// back an equal config.
    pub fn to_conf_string(&self) -> String {
        let mut s = format!("min_year = {}\n", self.min_year);
        for (code, t) in &self.transforms {
            s.push_str(&format!("{code} = {t}\n"));
        }
        s
    }
}

impl FromStr for HarmonizeConfig {
    type Err = IngestError;

    /// `key = value` lines; `#` starts a comment. `min_year` is optional and
    /// defaults to 2015. Every other key names an indicator.
    fn from_str(text: &str) -> Result<Self> {
        let mut transforms: Vec<(String, Transform)> = Vec::new();
        let mut min_year = DEFAULT_MIN_YEAR;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| IngestError::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            if key == "min_year" {
                min_year = value
                    .parse()
                    .map_err(|_| err(format!("min_year {value:?} is not an integer")))?;
                continue;
            }
            let t: Transform = value.parse().map_err(err)?;
            if transforms.iter().any(|(c, _)| c == key) {
                return Err(err(format!("indicator `{key}` configured twice")));
            }
            transforms.push((key.to_string(), t));
        }
        Ok(HarmonizeConfig {
            transforms,
            min_year,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizedRow {
    pub country: CountryCode,
    pub year: i32,
    pub indicator_code: String,
    pub value: f64,
}

/// Rows removed by `harmonize`, per indicator and per rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub before_min_year: usize,
    pub nonpositive_log: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.before_min_year + self.nonpositive_log
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizedPanel {
    pub rows: Vec<HarmonizedRow>,
    pub transforms: Vec<(String, Transform)>,
    pub min_year: i32,
    pub drops: BTreeMap<String, DropCounts>,
    pub input_rows: usize,
}

impl HarmonizedPanel {
    pub fn total_dropped(&self) -> usize {
        self.drops.values().map(DropCounts::total).sum()
    }
}

/// Apply the year filter and per-indicator transforms. Rows that cannot be
/// logged (value ≤ 0) are dropped and counted, never shifted.
pub fn harmonize(obs: &[IndicatorObservation], config: &HarmonizeConfig) -> Result<HarmonizedPanel> {
    if let Some(o) = obs
        .iter()
        .find(|o| config.transform_for(&o.indicator_code).is_none())
    {
        return Err(IngestError::UnknownIndicator(o.indicator_code.clone()));
    }

    let mut drops: BTreeMap<String, DropCounts> = BTreeMap::new();
    let mut rows = Vec::with_capacity(obs.len());
    for o in obs {
        let transform = config
            .transform_for(&o.indicator_code)
            .expect("checked above");
        if o.year < config.min_year {
            drops.entry(o.indicator_code.clone()).or_default().before_min_year += 1;
            continue;
        }
        let value = match transform {
            Transform::Level => o.value,
            Transform::Log if o.value > 0.0 => o.value.ln(),
            Transform::Log => {
                drops.entry(o.indicator_code.clone()).or_default().nonpositive_log += 1;
                continue;
            }
        };
        rows.push(HarmonizedRow {
            country: o.country,
            year: o.year,
            indicator_code: o.indicator_code.clone(),
            value,
        });
    }
    Ok(HarmonizedPanel {
        rows,
        transforms: config.transforms.clone(),
        min_year: config.min_year,
        drops,
        input_rows: obs.len(),
    })
}

/// One country-year of the merged analysis panel.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub country: CountryCode,
    pub year: i32,
    /// `None` when the country-year lies outside the corpus coverage.
    pub theme_counts: Option<[u32; 4]>,
    pub indicators: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisPanel {
    /// Sorted by (country, year), one row per key.
    pub rows: Vec<AnalysisRow>,
    pub indicator_codes: Vec<String>,
}

impl AnalysisPanel {
    pub fn get(&self, country: CountryCode, year: i32) -> Option<&AnalysisRow> {
        self.rows
            .binary_search_by(|r| (r.country, r.year).cmp(&(country, year)))
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// Full outer join of theme counts and harmonized indicators on
/// (country, year).
///
/// Theme counts are zero-filled for years inside a country's observed corpus
/// span (first to last year with at least one document). Outside that span,
/// or for countries absent from the corpus, counts stay missing.
pub fn merge_policy_and_wdi(theme_panel: &ThemePanel, hp: &HarmonizedPanel) -> AnalysisPanel {
    let mut rows: BTreeMap<(CountryCode, i32), AnalysisRow> = BTreeMap::new();
    let blank = |country, year| AnalysisRow {
        country,
        year,
        theme_counts: None,
        indicators: BTreeMap::new(),
    };

    for country in theme_panel.countries() {
        let (first, last) = theme_panel.year_span(country).expect("country has cells");
        for year in first..=last {
            let counts = theme_panel.get(country, year).unwrap_or([0; 4]);
            rows.entry((country, year))
                .or_insert_with(|| blank(country, year))
                .theme_counts = Some(counts);
        }
    }
    for r in &hp.rows {
        rows.entry((r.country, r.year))
            .or_insert_with(|| blank(r.country, r.year))
            .indicators
            .insert(r.indicator_code.clone(), r.value);
    }

    let present: BTreeSet<&str> = hp.rows.iter().map(|r| r.indicator_code.as_str()).collect();
    let mut indicator_codes: Vec<String> = hp
        .transforms
        .iter()
        .map(|(c, _)| c.clone())
        .filter(|c| present.contains(c.as_str()))
        .collect();
    for c in present {
        if !indicator_codes.iter().any(|k| k == c) {
            indicator_codes.push(c.to_string());
        }
    }

    AnalysisPanel {
        rows: rows.into_values().collect(),
        indicator_codes,
    }
}
