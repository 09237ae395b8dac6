//! Unit-level data: CSV ingestion with a strict input contract, and export of
//! matched data with appended propensity scores and weights.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::matcher::{Disposition, MatchResult};
use crate::propensity::PropensityModel;

/// Column names appended on export. Input columns may not use them.
pub const RESERVED_COLUMNS: [&str; 4] = ["_ps", "_logit_ps", "_weight", "_matched"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing or non-numeric value at row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },
    #[error("treatment must be coded 0 or 1, found '{0}'")]
    NonBinaryTreatment(String),
    #[error("dataset needs at least one treated and one control unit (treated = {treated}, control = {control})")]
    EmptyGroup { treated: usize, control: usize },
    #[error("column '{0}' appears more than once or is assigned to more than one role")]
    DuplicateColumn(String),
    #[error("column '{0}' is reserved for exported output")]
    ReservedColumn(String),
    #[error("column '{0}' not found in header")]
    UnknownColumn(String),
    #[error("at least one covariate column is required")]
    NoCovariates,
    #[error("column '{column}' has {found} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How the columns of an input file are used.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnRoles {
    /// Column holding unit identifiers. Row numbers (1-based) are used when absent.
    pub id: Option<String>,
    pub treatment: String,
    /// Columns entering the propensity model.
    pub covariates: Vec<String>,
    /// Columns checked for balance but not used in estimation.
    pub balance_only: Vec<String>,
}

impl ColumnRoles {
    pub fn new(treatment: impl Into<String>, covariates: &[&str]) -> Self {
        Self {
            id: None,
            treatment: treatment.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            balance_only: Vec::new(),
        }
    }

    pub fn with_balance_only(mut self, names: &[&str]) -> Self {
        self.balance_only = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_id(mut self, name: impl Into<String>) -> Self {
        self.id = Some(name.into());
        self
    }
}

/// A named numeric column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Id,
    Treatment,
    Covariate(usize),
    BalanceOnly(usize),
    Extra(usize),
}

/// A validated table of units. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: Vec<String>,
    sources: Vec<Source>,
    treatment_name: String,
    ids: Vec<String>,
    treatment: Vec<u8>,
    covariates: Vec<Column>,
    balance_only: Vec<Column>,
    extra: Vec<(String, Vec<String>)>,
}

impl Dataset {
    /// Builds a dataset from in-memory columns. The header order is
    /// treatment, covariates, balance-only columns, then passthrough columns;
    /// unit ids are row numbers.
    pub fn from_columns(
        treatment_name: impl Into<String>,
        treatment: Vec<u8>,
        covariates: Vec<Column>,
        balance_only: Vec<Column>,
        extra: Vec<(String, Vec<String>)>,
    ) -> Result<Self, DatasetError> {
        let treatment_name = treatment_name.into();
        let n = treatment.len();
        if let Some(&bad) = treatment.iter().find(|&&t| t > 1) {
            return Err(DatasetError::NonBinaryTreatment(bad.to_string()));
        }
        for col in covariates.iter().chain(&balance_only) {
            if col.values.len() != n {
                return Err(DatasetError::LengthMismatch {
                    column: col.name.clone(),
                    expected: n,
                    found: col.values.len(),
                });
            }
            if let Some(row) = col.values.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::MissingValue {
                    row: row + 1,
                    column: col.name.clone(),
                });
            }
        }
        for (name, cells) in &extra {
            if cells.len() != n {
                return Err(DatasetError::LengthMismatch {
                    column: name.clone(),
                    expected: n,
                    found: cells.len(),
                });
            }
        }

        let mut header = vec![treatment_name.clone()];
        let mut sources = vec![Source::Treatment];
        header.extend(covariates.iter().map(|c| c.name.clone()));
        sources.extend((0..covariates.len()).map(Source::Covariate));
        header.extend(balance_only.iter().map(|c| c.name.clone()));
        sources.extend((0..balance_only.len()).map(Source::BalanceOnly));
        header.extend(extra.iter().map(|(name, _)| name.clone()));
        sources.extend((0..extra.len()).map(Source::Extra));
        check_names(&header)?;
        check_groups(&treatment)?;

        Ok(Self {
            header,
            sources,
            treatment_name,
            ids: (1..=n).map(|i| i.to_string()).collect(),
            treatment,
            covariates,
            balance_only,
            extra,
        })
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment_name
    }

    pub fn is_treated(&self, row: usize) -> bool {
        self.treatment[row] == 1
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn covariates(&self) -> &[Column] {
        &self.covariates
    }

    pub fn balance_only(&self) -> &[Column] {
        &self.balance_only
    }

    /// Covariates and balance-only columns, in the order they appear in the header.
    pub fn balance_columns(&self) -> Vec<&Column> {
        self.sources
            .iter()
            .filter_map(|s| match *s {
                Source::Covariate(i) => Some(&self.covariates[i]),
                Source::BalanceOnly(i) => Some(&self.balance_only[i]),
                _ => None,
            })
            .collect()
    }

    /// Header of the input, in original order.
    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Raw cells of a passthrough column.
    pub fn extra_column(&self, name: &str) -> Option<&[String]> {
        self.extra
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, cells)| cells.as_slice())
    }

    /// A passthrough column parsed as numbers. `None` if the column is absent
    /// or any cell fails to parse.
    pub fn extra_numeric(&self, name: &str) -> Option<Vec<f64>> {
        self.extra_column(name)?
            .iter()
            .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect()
    }

    /// Row-major covariate values for one unit (estimation covariates only).
    pub fn covariate_row(&self, row: usize) -> Vec<f64> {
        self.covariates.iter().map(|c| c.values[row]).collect()
    }

    fn cell(&self, source: Source, row: usize) -> String {
        match source {
            Source::Id => self.ids[row].clone(),
            Source::Treatment => self.treatment[row].to_string(),
            Source::Covariate(i) => format_g17(self.covariates[i].values[row]),
            Source::BalanceOnly(i) => format_g17(self.balance_only[i].values[row]),
            Source::Extra(i) => self.extra[i].1[row].clone(),
        }
    }
}

fn check_names(header: &[String]) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for name in header {
        if RESERVED_COLUMNS.contains(&name.as_str()) {
            return Err(DatasetError::ReservedColumn(name.clone()));
        }
        if !seen.insert(name.as_str()) {
            return Err(DatasetError::DuplicateColumn(name.clone()));
        }
    }
    Ok(())
}

fn check_groups(treatment: &[u8]) -> Result<(), DatasetError> {
    let treated = treatment.iter().filter(|&&t| t == 1).count();
    let control = treatment.len() - treated;
    if treated == 0 || control == 0 {
        return Err(DatasetError::EmptyGroup { treated, control });
    }
    Ok(())
}

/// Loads and validates a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<Dataset, DatasetError> {
    let file = File::open(path)?;
    read_csv(file, roles)
}

/// Like [`load_csv`], from any reader.
pub fn read_csv<R: Read>(reader: R, roles: &ColumnRoles) -> Result<Dataset, DatasetError> {
    if roles.covariates.is_empty() {
        return Err(DatasetError::NoCovariates);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    check_names(&header)?;

    let mut assigned = HashSet::new();
    let role_names = std::iter::once(&roles.treatment)
        .chain(roles.id.iter())
        .chain(&roles.covariates)
        .chain(&roles.balance_only);
    for name in role_names {
        if !header.contains(name) {
            return Err(DatasetError::UnknownColumn(name.clone()));
        }
        if !assigned.insert(name.as_str()) {
            return Err(DatasetError::DuplicateColumn(name.clone()));
        }
    }

    let mut extra_names = Vec::new();
    let sources: Vec<Source> = header
        .iter()
        .map(|name| {
            if *name == roles.treatment {
                Source::Treatment
            } else if roles.id.as_ref() == Some(name) {
                Source::Id
            } else if let Some(i) = roles.covariates.iter().position(|c| c == name) {
                Source::Covariate(i)
            } else if let Some(i) = roles.balance_only.iter().position(|c| c == name) {
                Source::BalanceOnly(i)
            } else {
                extra_names.push(name.clone());
                Source::Extra(extra_names.len() - 1)
            }
        })
        .collect();

    let mut ids = Vec::new();
    let mut treatment = Vec::new();
    let mut covariates: Vec<Vec<f64>> = vec![Vec::new(); roles.covariates.len()];
    let mut balance_only: Vec<Vec<f64>> = vec![Vec::new(); roles.balance_only.len()];
    let mut extra: Vec<Vec<String>> = vec![Vec::new(); extra_names.len()];

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut id = None;
        for (cell, (&source, name)) in record.iter().zip(sources.iter().zip(&header)) {
            match source {
                Source::Id => id = Some(cell.to_string()),
                Source::Treatment => treatment.push(parse_treatment(cell, row, name)?),
                Source::Covariate(i) => covariates[i].push(parse_number(cell, row, name)?),
                Source::BalanceOnly(i) => balance_only[i].push(parse_number(cell, row, name)?),
                Source::Extra(i) => extra[i].push(cell.to_string()),
            }
        }
        ids.push(id.unwrap_or_else(|| row.to_string()));
    }
    check_groups(&treatment)?;

    Ok(Dataset {
        header,
        sources,
        treatment_name: roles.treatment.clone(),
        ids,
        treatment,
        covariates: roles
            .covariates
            .iter()
            .zip(covariates)
            .map(|(n, v)| Column::new(n.clone(), v))
            .collect(),
        balance_only: roles
            .balance_only
            .iter()
            .zip(balance_only)
            .map(|(n, v)| Column::new(n.clone(), v))
            .collect(),
        extra: extra_names.into_iter().zip(extra).collect(),
    })
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64, DatasetError> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DatasetError::MissingValue {
            row,
            column: column.to_string(),
        })
}

fn parse_treatment(cell: &str, row: usize, column: &str) -> Result<u8, DatasetError> {
    let v = parse_number(cell, row, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DatasetError::NonBinaryTreatment(cell.trim().to_string()))
    }
}

/// Which rows an export writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportMode {
    /// Every row, with appended score and weight columns.
    #[default]
    Full,
    /// Only rows with positive weight.
    MatchedOnly,
}

/// Writes the dataset with `_ps`, `_logit_ps`, `_weight` and `_matched` appended.
pub fn export(
    ds: &Dataset,
    model: &PropensityModel,
    result: &MatchResult,
    mode: ExportMode,
    path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    write_export(ds, model, result, mode, file)
}

/// Like [`export`], into any writer.
pub fn write_export<W: Write>(
    ds: &Dataset,
    model: &PropensityModel,
    result: &MatchResult,
    mode: ExportMode,
    writer: W,
) -> Result<(), DatasetError> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = ds.header.iter().map(String::as_str).collect();
    header.extend(RESERVED_COLUMNS);
    wtr.write_record(&header)?;

    for row in 0..ds.len() {
        let weight = result.weights[row];
        if mode == ExportMode::MatchedOnly && weight <= 0.0 {
            continue;
        }
        let mut record: Vec<String> = ds.sources.iter().map(|&s| ds.cell(s, row)).collect();
        record.push(format_g17(model.scores[row]));
        record.push(format_g17(model.logits[row]));
        record.push(format_g17(weight));
        let matched = result.disposition[row] == Disposition::Matched;
        record.push(u8::from(matched).to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the dataset as CSV in its header order, without appended columns.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(&ds.header)?;
    for row in 0..ds.len() {
        let record: Vec<String> = ds.sources.iter().map(|&s| ds.cell(s, row)).collect();
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Formats a double with 17 significant digits, dropping trailing zeros,
/// the way C's `%.17g` does. Parsing the result gives back the same value.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
