//! Streaming sample readers: one real per line, or one named column of a
//! CSV file with a header row.
//!
//! Blank lines are ignored. Unparsable or non-finite values are skipped
//! with a warning, or returned as errors in strict mode.

use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};

enum Source {
    Lines(std::io::Lines<BufReader<Box<dyn Read>>>),
    Csv {
        records: csv::StringRecordsIntoIter<Box<dyn Read>>,
        column: usize,
    },
}

pub struct SampleReader {
    source: Source,
    strict: bool,
    line: usize,
    skipped: Vec<(usize, String)>,
}

impl SampleReader {
    pub fn lines(reader: Box<dyn Read>, strict: bool) -> Self {
        SampleReader {
            source: Source::Lines(BufReader::new(reader).lines()),
            strict,
            line: 0,
            skipped: Vec::new(),
        }
    }

    pub fn csv_column(reader: Box<dyn Read>, column: &str, strict: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        let index = rdr
            .headers()?
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
        Ok(SampleReader {
            source: Source::Csv {
                records: rdr.into_records(),
                column: index,
            },
            strict,
            // the header is line 1
            line: 1,
            skipped: Vec::new(),
        })
    }

    /// `(line, reason)` for every value skipped so far.
    pub fn skipped(&self) -> &[(usize, String)] {
        &self.skipped
    }

    fn next_raw(&mut self) -> Option<Result<String>> {
        self.line += 1;
        match &mut self.source {
            Source::Lines(lines) => Some(lines.next()?.map_err(|e| Error::io("<input>", e))),
            Source::Csv { records, column } => {
                let rec = match records.next()? {
                    Ok(r) => r,
                    Err(e) => return Some(Err(e.into())),
                };
                Some(Ok(rec.get(*column).unwrap_or("").to_string()))
            }
        }
    }
}

fn parse_value(text: &str) -> Result<f64, String> {
    let x: f64 = text.parse().map_err(|_| format!("not a number: {text:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("non-finite value: {text:?}"))
    }
}

impl Iterator for SampleReader {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Result<f64>> {
        loop {
            let raw = match self.next_raw()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            let text = raw.trim();
            if text.is_empty() {
                continue;
            }
            match parse_value(text) {
                Ok(x) => return Some(Ok(x)),
                Err(message) if self.strict => {
                    return Some(Err(Error::Malformed { line: self.line, message }));
                }
                Err(message) => self.skipped.push((self.line, message)),
            }
        }
    }
}
