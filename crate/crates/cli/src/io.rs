//! CSV ingestion and output.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use cmi_core::recruitment::SubjectVisits;
use cmi_core::CensoredRecord;

/// Malformed input. Maps to exit status 2.
#[derive(Debug)]
pub struct ParseError {
    pub path: PathBuf,
    pub line: Option<u64>,
    pub message: String,
}

impl ParseError {
    pub fn new(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        Self {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}, line {}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn open(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file: Box<dyn Read> = Box::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

/// A raw table: header, rows, and the file line of each row.
pub struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut rdr = open(path)?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| ParseError::new(path, Some(1), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(ParseError::new(path, Some(1), "missing header row").into());
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line());
                ParseError::new(path, line, e.to_string())
            })?;
            lines.push(rec.position().map_or(0, |p| p.line()));
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
            lines,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ParseError::new(&self.path, Some(1), format!("missing required column `{name}`")).into())
    }

    fn err(&self, row: usize, message: String) -> anyhow::Error {
        ParseError::new(&self.path, Some(self.lines[row]), message).into()
    }

    fn cell<'a>(&'a self, row: usize, col: usize) -> Result<&'a str> {
        let v = self.rows[row][col].as_str();
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            return Err(self.err(row, format!("missing value in column `{}`", self.header[col])));
        }
        Ok(v)
    }

    pub fn real(&self, row: usize, col: usize) -> Result<f64> {
        let v = self.cell(row, col)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.err(row, format!("column `{}`: `{v}` is not a finite number", self.header[col]))),
        }
    }

    pub fn flag(&self, row: usize, col: usize) -> Result<bool> {
        match self.cell(row, col)? {
            "1" | "true" | "TRUE" | "True" => Ok(true),
            "0" | "false" | "FALSE" | "False" => Ok(false),
            v => Err(self.err(row, format!("column `{}`: `{v}` is not 0/1", self.header[col]))),
        }
    }

    pub fn integer(&self, row: usize, col: usize) -> Result<u32> {
        let v = self.cell(row, col)?;
        v.parse()
            .map_err(|_| self.err(row, format!("column `{}`: `{v}` is not a whole number", self.header[col])))
    }

    pub fn date(&self, row: usize, col: usize) -> Result<NaiveDate> {
        let v = self.cell(row, col)?;
        NaiveDate::parse_from_str(v, "%Y-%m-%d")
            .map_err(|_| self.err(row, format!("column `{}`: `{v}` is not a YYYY-MM-DD date", self.header[col])))
    }

    pub fn optional_date(&self, row: usize, col: usize) -> Result<Option<NaiveDate>> {
        let v = self.rows[row][col].as_str();
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            Ok(None)
        } else {
            self.date(row, col).map(Some)
        }
    }
}

/// Columns `z_1, z_2, ...` in numeric order. The sequence must be gapless.
pub fn covariate_columns(table: &Table) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = Vec::new();
    for (i, h) in table.header.iter().enumerate() {
        if let Some(k) = h.strip_prefix("z_").and_then(|k| k.parse::<usize>().ok()) {
            found.push((k, i));
        }
    }
    found.sort();
    for (expect, (k, _)) in (1..).zip(&found) {
        if *k != expect {
            return Err(ParseError::new(&table.path, Some(1), format!("missing required column `z_{expect}`")).into());
        }
    }
    Ok(found.into_iter().map(|(_, i)| i).collect())
}

pub fn read_records(table: &Table) -> Result<Vec<CensoredRecord>> {
    let (y, w, delta) = (table.column("y")?, table.column("w")?, table.column("delta")?);
    let z = covariate_columns(table)?;
    (0..table.rows.len())
        .map(|r| {
            let covariates = z.iter().map(|&c| table.real(r, c)).collect::<Result<Vec<_>>>()?;
            let wv = table.real(r, w)?;
            if wv < 0.0 {
                return Err(table.err(r, format!("column `w`: {wv} is negative")));
            }
            Ok(CensoredRecord::new(table.real(r, y)?, wv, table.flag(r, delta)?, covariates))
        })
        .collect()
}

pub const VISIT_COLUMNS: [&str; 8] = [
    "subject_id",
    "first_visit_date",
    "last_visit_date",
    "diagnosis_date",
    "age_at_first_visit",
    "cag",
    "cuhdrs_start",
    "cuhdrs_end",
];

pub fn read_visits(table: &Table) -> Result<Vec<SubjectVisits>> {
    let c: Vec<usize> = VISIT_COLUMNS.iter().map(|n| table.column(n)).collect::<Result<_>>()?;
    (0..table.rows.len())
        .map(|r| {
            Ok(SubjectVisits {
                subject_id: table.cell(r, c[0])?.to_string(),
                first_visit_date: table.date(r, c[1])?,
                last_visit_date: table.date(r, c[2])?,
                diagnosis_date: table.optional_date(r, c[3])?,
                age_at_first_visit: table.real(r, c[4])?,
                cag: table.integer(r, c[5])?,
                cuhdrs_start: table.real(r, c[6])?,
                cuhdrs_end: table.real(r, c[7])?,
            })
        })
        .collect()
}

/// Shortest representation that parses back to the same value.
pub fn real(x: f64) -> String {
    format!("{x}")
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// Comma-delimited output preceded by the manifest comment.
pub struct Output {
    writer: Option<csv::Writer<Box<dyn Write>>>,
}

fn csv_writer(sink: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::WriterBuilder::new().flexible(true).from_writer(sink)
}

impl Output {
    pub fn create(path: Option<&Path>, manifest: &str) -> Result<Output> {
        let mut sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        writeln!(sink, "{manifest}")?;
        Ok(Output {
            writer: Some(csv_writer(sink)),
        })
    }

    fn writer(&mut self) -> &mut csv::Writer<Box<dyn Write>> {
        self.writer.as_mut().expect("writer present between calls")
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer().write_record(fields)?;
        Ok(())
    }

    /// A `# ` line after the table.
    pub fn comment(&mut self, text: &str) -> Result<()> {
        let w = self.writer.take().expect("writer present between calls");
        let mut sink = w.into_inner().map_err(|e| e.into_error())?;
        writeln!(sink, "# {text}")?;
        self.writer = Some(csv_writer(sink));
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let w = self.writer.take().expect("writer present between calls");
        w.into_inner().map_err(|e| e.into_error())?.flush()?;
        Ok(())
    }
}
