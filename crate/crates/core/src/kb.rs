//! The station's knowledge base of barcode records.
//!
//! Records are stored one per line in a fixed-width ASCII layout:
//!
//! | columns | width | field                 |
//! |---------|-------|-----------------------|
//! | 1-14    | 14    | barcode               |
//! | 15-24   | 10    | shipper number        |
//! | 25-28   | 4     | service type          |
//! | 29-36   | 8     | destination terminal  |
//! | 37-56   | 20    | delivery exceptions   |
//!
//! Text fields are space padded on the right; an all-space exceptions field
//! means no exception.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barcode::{Barcode, BarcodeError, BARCODE_LEN};

pub const SHIPPER_WIDTH: usize = 10;
pub const SERVICE_WIDTH: usize = 4;
pub const TERMINAL_WIDTH: usize = 8;
pub const EXCEPTIONS_WIDTH: usize = 20;
pub const RECORD_WIDTH: usize =
    BARCODE_LEN + SHIPPER_WIDTH + SERVICE_WIDTH + TERMINAL_WIDTH + EXCEPTIONS_WIDTH;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate barcode {barcode}")]
    Duplicate { line: usize, barcode: Barcode },
    #[error("knowledge base is empty")]
    Empty,
    #[error("field {field} is invalid: {reason}")]
    Field { field: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One knowledge-base row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarcodeRecord {
    pub barcode: Barcode,
    pub shipper_number: String,
    pub service_type: String,
    pub destination_terminal: String,
    pub delivery_exceptions: String,
}

fn check_field(field: &'static str, value: &str, width: usize) -> Result<(), KbError> {
    if value.len() > width {
        return Err(KbError::Field {
            field,
            reason: format!("{} characters exceeds width {width}", value.len()),
        });
    }
    if let Some(b) = value.bytes().find(|b| !(0x20..=0x7e).contains(b)) {
        return Err(KbError::Field {
            field,
            reason: format!("non-printable byte {b:#04x}"),
        });
    }
    Ok(())
}

impl BarcodeRecord {
    /// Builds a record, trimming trailing spaces from the text fields.
    pub fn new(
        barcode: Barcode,
        shipper_number: &str,
        service_type: &str,
        destination_terminal: &str,
        delivery_exceptions: &str,
    ) -> Result<Self, KbError> {
        check_field("shipper_number", shipper_number, SHIPPER_WIDTH)?;
        check_field("service_type", service_type, SERVICE_WIDTH)?;
        check_field("destination_terminal", destination_terminal, TERMINAL_WIDTH)?;
        check_field("delivery_exceptions", delivery_exceptions, EXCEPTIONS_WIDTH)?;
        Ok(BarcodeRecord {
            barcode,
            shipper_number: shipper_number.trim_end().to_owned(),
            service_type: service_type.trim_end().to_owned(),
            destination_terminal: destination_terminal.trim_end().to_owned(),
            delivery_exceptions: delivery_exceptions.trim_end().to_owned(),
        })
    }

    /// Digits 1-4 of the barcode.
    pub fn location(&self) -> &str {
        self.barcode.location()
    }

    /// Digits 7-14 of the barcode.
    pub fn destination(&self) -> &str {
        self.barcode.destination()
    }

    pub fn decision(&self) -> DecisionPayload {
        DecisionPayload {
            destination_terminal: self.destination_terminal.clone(),
            service_type: self.service_type.clone(),
            exception_flag: !self.delivery_exceptions.is_empty(),
        }
    }

    /// Parses one fixed-width line (without its newline).
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, KbError> {
        let malformed = |reason: String| KbError::Malformed {
            line: line_no,
            reason,
        };
        if !line.is_ascii() {
            return Err(malformed("non-ASCII content".into()));
        }
        if line.len() != RECORD_WIDTH {
            return Err(malformed(format!(
                "expected {RECORD_WIDTH} columns, found {}",
                line.len()
            )));
        }
        let barcode = Barcode::parse(&line[..BARCODE_LEN])
            .map_err(|e: BarcodeError| malformed(e.to_string()))?;
        let mut at = BARCODE_LEN;
        let mut take = |width: usize| {
            let s = &line[at..at + width];
            at += width;
            s
        };
        let shipper = take(SHIPPER_WIDTH);
        let service = take(SERVICE_WIDTH);
        let terminal = take(TERMINAL_WIDTH);
        let exceptions = take(EXCEPTIONS_WIDTH);
        BarcodeRecord::new(barcode, shipper, service, terminal, exceptions)
            .map_err(|e| malformed(e.to_string()))
    }

    /// The fixed-width line for this record, without a newline.
    pub fn to_line(&self) -> String {
        format!(
            "{}{:<sw$}{:<vw$}{:<tw$}{:<ew$}",
            self.barcode,
            self.shipper_number,
            self.service_type,
            self.destination_terminal,
            self.delivery_exceptions,
            sw = SHIPPER_WIDTH,
            vw = SERVICE_WIDTH,
            tw = TERMINAL_WIDTH,
            ew = EXCEPTIONS_WIDTH,
        )
    }
}

/// The routing decision a robot acts on for a barcode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionPayload {
    pub destination_terminal: String,
    pub service_type: String,
    pub exception_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveResult {
    /// `None` when the barcode is not in the knowledge base.
    pub payload: Option<DecisionPayload>,
    pub db_comparisons: u64,
}

/// Probes charged for an indexed search over `n` records: `ceil(log2 n)`,
/// never less than one.
pub fn indexed_search_cost(n: usize) -> u64 {
    if n <= 1 {
        1
    } else {
        u64::from(usize::BITS - (n - 1).leading_zeros())
    }
}

/// Read-only after construction; records keep their ingest order.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    records: IndexMap<Barcode, BarcodeRecord>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<I>(records: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = BarcodeRecord>,
    {
        let mut kb = KnowledgeBase::new();
        for (i, rec) in records.into_iter().enumerate() {
            kb.push(rec, i + 1)?;
        }
        Ok(kb)
    }

    fn push(&mut self, rec: BarcodeRecord, line: usize) -> Result<(), KbError> {
        let barcode = rec.barcode;
        if self.records.insert(barcode, rec).is_some() {
            return Err(KbError::Duplicate { line, barcode });
        }
        Ok(())
    }

    /// Reads fixed-width lines. A missing newline after the last record is
    /// tolerated.
    pub fn ingest<R: BufRead>(reader: R) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::new();
        for (i, line) in reader.split(b'\n').enumerate() {
            let line = line?;
            let line_no = i + 1;
            let line = std::str::from_utf8(&line).map_err(|_| KbError::Malformed {
                line: line_no,
                reason: "non-ASCII content".into(),
            })?;
            let rec = BarcodeRecord::parse_line(line, line_no)?;
            kb.push(rec, line_no)?;
        }
        Ok(kb)
    }

    pub fn export<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for rec in self.records.values() {
            writeln!(writer, "{}", rec.to_line())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, barcode: &Barcode) -> Option<&BarcodeRecord> {
        self.records.get(barcode)
    }

    pub fn records(&self) -> impl Iterator<Item = &BarcodeRecord> {
        self.records.values()
    }

    /// Looks a barcode up at the station. Unknown barcodes cost the same as
    /// known ones.
    pub fn resolve(&self, barcode: &Barcode) -> Result<ResolveResult, KbError> {
        if self.records.is_empty() {
            return Err(KbError::Empty);
        }
        Ok(ResolveResult {
            payload: self.records.get(barcode).map(BarcodeRecord::decision),
            db_comparisons: indexed_search_cost(self.records.len()),
        })
    }
}
