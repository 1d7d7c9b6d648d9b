use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    Dataset, FacilityRecord, FacilitySet, FeatureKind, Schema, UnitRecord, ID_COLUMN, LAT_COLUMN, LON_COLUMN,
    RATE_Y1_COLUMN, RATE_Y2_COLUMN, REQUIRED_COLUMNS,
};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowErrorKind {
    FieldCount,
    EmptyId,
    DuplicateId,
    BadCoordinate,
    OutOfRangeRate,
    NonBinaryValue,
    NotANumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line in the source file (the header is line 1).
    pub line: u64,
    pub id: Option<String>,
    pub column: Option<String>,
    pub kind: RowErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMissing {
    pub column: String,
    pub missing: usize,
}

/// Outcome of parsing a units file. Rows with any error are left out of the
/// dataset and listed in `errors`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub missing: Vec<ColumnMissing>,
    pub errors: Vec<RowError>,
    pub eligible: usize,
    pub ineligible: usize,
    pub ignored_columns: Vec<String>,
    /// Set when the file could not be read at all (e.g. a missing column).
    pub fatal: Option<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.fatal.is_none()
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            fatal: Some(message.into()),
            ..Self::default()
        }
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn column_positions(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| headers.iter().position(|h| h == *name).ok_or_else(|| Error::MissingColumn((*name).to_owned())))
        .collect()
}

struct RowContext<'a> {
    line: u64,
    id: &'a str,
    errors: Vec<RowError>,
}

impl RowContext<'_> {
    fn push(&mut self, column: &str, kind: RowErrorKind, message: String) {
        self.errors.push(RowError {
            line: self.line,
            id: (!self.id.is_empty()).then(|| self.id.to_owned()),
            column: Some(column.to_owned()),
            kind,
            message,
        });
    }

    fn number(&mut self, column: &str, cell: &str) -> Option<Option<f64>> {
        if cell.is_empty() {
            return Some(None);
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(Some(v)),
            _ => {
                self.push(column, RowErrorKind::NotANumber, format!("`{cell}` is not a finite number"));
                None
            }
        }
    }
}

/// Parses `units.csv` against `schema`.
///
/// Columns are matched by name; extra columns are ignored and listed in the
/// report. A missing required or schema column is the only fatal error.
pub fn parse_units<R: Read>(input: R, schema: &Schema) -> Result<(Dataset, ValidationReport)> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let req = column_positions(&headers, &REQUIRED_COLUMNS)?;
    let feat = column_positions(&headers, &schema.names())?;
    let known: HashSet<usize> = req.iter().chain(&feat).copied().collect();
    let ignored_columns = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !known.contains(i))
        .map(|(_, h)| h.to_owned())
        .collect();

    let mut report = ValidationReport {
        ignored_columns,
        ..ValidationReport::default()
    };
    let mut missing = vec![0usize; 2 + schema.len()];
    let mut seen_ids: HashMap<String, u64> = HashMap::new();
    let mut units = Vec::new();

    for record in rdr.records() {
        let record = record?;
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            report.errors.push(RowError {
                line,
                id: record.get(req[0]).map(str::to_owned),
                column: None,
                kind: RowErrorKind::FieldCount,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
            continue;
        }
        let id = &record[req[0]];
        let mut ctx = RowContext {
            line,
            id,
            errors: Vec::new(),
        };
        if id.is_empty() {
            ctx.errors.push(RowError {
                line,
                id: None,
                column: Some(ID_COLUMN.to_owned()),
                kind: RowErrorKind::EmptyId,
                message: "empty id".to_owned(),
            });
        } else if let Some(first) = seen_ids.get(id) {
            ctx.push(ID_COLUMN, RowErrorKind::DuplicateId, format!("id already used on line {first}"));
        }

        let lat = ctx.number(LAT_COLUMN, &record[req[1]]);
        let lon = ctx.number(LON_COLUMN, &record[req[2]]);
        let centroid = match (lat, lon) {
            (Some(Some(lat)), Some(Some(lon))) => match GeoPoint::new(lat, lon) {
                Ok(p) => Some(p),
                Err(_) => {
                    ctx.push(LAT_COLUMN, RowErrorKind::BadCoordinate, format!("invalid coordinate ({lat}, {lon})"));
                    None
                }
            },
            (Some(None), _) | (_, Some(None)) => {
                ctx.push(LAT_COLUMN, RowErrorKind::BadCoordinate, "missing coordinate".to_owned());
                None
            }
            _ => None,
        };

        let mut rates = [None, None];
        for (slot, (&pos, name)) in req[3..].iter().zip([RATE_Y1_COLUMN, RATE_Y2_COLUMN]).enumerate() {
            if let Some(v) = ctx.number(name, &record[pos]) {
                if let Some(r) = v {
                    if !(0.0..=100.0).contains(&r) {
                        ctx.push(name, RowErrorKind::OutOfRangeRate, format!("rate {r} outside [0, 100]"));
                    }
                }
                rates[slot] = v;
            }
        }

        let mut features = Vec::with_capacity(schema.len());
        for (spec, &pos) in schema.features().iter().zip(&feat) {
            let v = ctx.number(&spec.name, &record[pos]).flatten();
            if let (FeatureKind::Binary, Some(b)) = (spec.kind, v) {
                if b != 0.0 && b != 1.0 {
                    ctx.push(&spec.name, RowErrorKind::NonBinaryValue, format!("non-binary value `{}`", &record[pos]));
                }
            }
            features.push(v);
        }

        if !ctx.errors.is_empty() {
            report.errors.append(&mut ctx.errors);
            continue;
        }
        let Some(centroid) = centroid else { continue };
        seen_ids.insert(id.to_owned(), line);
        for (slot, v) in rates.iter().chain(&features).enumerate() {
            if v.is_none() {
                missing[slot] += 1;
            }
        }
        units.push(UnitRecord {
            id: id.to_owned(),
            centroid,
            rate_y1: rates[0],
            rate_y2: rates[1],
            features,
        });
    }

    report.rows_accepted = units.len();
    report.eligible = units.iter().filter(|u| u.is_eligible()).count();
    report.ineligible = units.len() - report.eligible;
    report.missing = [RATE_Y1_COLUMN, RATE_Y2_COLUMN]
        .into_iter()
        .chain(schema.names())
        .zip(missing)
        .map(|(c, m)| ColumnMissing {
            column: c.to_owned(),
            missing: m,
        })
        .collect();
    let dataset = Dataset::new(schema.clone(), units)?;
    Ok((dataset, report))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes units in the canonical column order; missing cells are empty.
pub fn write_units<W: Write>(dataset: &Dataset, output: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(dataset.schema.names());
    w.write_record(&header)?;
    for u in &dataset.units {
        let mut row = vec![
            u.id.clone(),
            u.centroid.lat().to_string(),
            u.centroid.lon().to_string(),
            cell(u.rate_y1),
            cell(u.rate_y2),
        ];
        row.extend(u.features.iter().map(|&v| cell(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `facilities.csv` (`id,lat,lon`). Bad rows are skipped and returned as errors.
pub fn parse_facilities<R: Read>(input: R) -> Result<(FacilitySet, Vec<RowError>)> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let pos = column_positions(&headers, &[ID_COLUMN, LAT_COLUMN, LON_COLUMN])?;
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut facilities = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(pos[0]).unwrap_or_default().to_owned();
        let lat = record.get(pos[1]).and_then(|s| s.parse::<f64>().ok());
        let lon = record.get(pos[2]).and_then(|s| s.parse::<f64>().ok());
        let err = |kind, message: String| RowError {
            line,
            id: Some(id.clone()),
            column: None,
            kind,
            message,
        };
        if id.is_empty() {
            errors.push(err(RowErrorKind::EmptyId, "empty id".into()));
            continue;
        }
        if !seen.insert(id.clone()) {
            errors.push(err(RowErrorKind::DuplicateId, format!("duplicate facility id `{id}`")));
            continue;
        }
        match (lat, lon) {
            (Some(lat), Some(lon)) => match GeoPoint::new(lat, lon) {
                Ok(location) => facilities.push(FacilityRecord { id, location }),
                Err(e) => errors.push(err(RowErrorKind::BadCoordinate, e.to_string())),
            },
            _ => errors.push(err(RowErrorKind::BadCoordinate, "unparseable coordinate".into())),
        }
    }
    Ok((FacilitySet::new(facilities)?, errors))
}

pub fn write_facilities<W: Write>(facilities: &FacilitySet, output: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record([ID_COLUMN, LAT_COLUMN, LON_COLUMN])?;
    for f in &facilities.facilities {
        w.write_record([f.id.clone(), f.location.lat().to_string(), f.location.lon().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
