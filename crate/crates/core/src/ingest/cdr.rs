use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::Serialize;

use crate::calendar::{format_ddmonyyyy, parse_ddmonyyyy};
use crate::error::{Error, Result};

/// One logged call, columns in the order operators export them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CdrRecord {
    pub start_date: NaiveDate,
    pub start_time: NaiveTime,
    /// Seconds.
    pub duration: u32,
    pub from_id: String,
    pub to_id: String,
}

impl CdrRecord {
    /// Canonical delimited form; inverse of [`parse_cdr_line`].
    pub fn to_line(&self, delimiter: char) -> String {
        format!(
            "{d}{s}{h:02}:{m:02}:{sec:02}{s}{dur}{s}{from}{s}{to}",
            d = format_ddmonyyyy(self.start_date),
            h = self.start_time.hour(),
            m = self.start_time.minute(),
            sec = self.start_time.second(),
            dur = self.duration,
            from = self.from_id,
            to = self.to_id,
            s = delimiter,
        )
    }

    pub fn timestamp(&self) -> chrono::NaiveDateTime {
        self.start_date.and_time(self.start_time)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    FieldCount(usize),
    Date(String),
    Time(String),
    Duration(String),
    EmptyId,
    SelfCall,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount(n) => write!(f, "expected 5 fields, found {n}"),
            RejectReason::Date(s) => write!(f, "invalid date `{s}` (expected DDMONYYYY)"),
            RejectReason::Time(s) => write!(f, "invalid time `{s}` (expected HH:MM:SS)"),
            RejectReason::Duration(s) => write!(f, "invalid duration `{s}`"),
            RejectReason::EmptyId => write!(f, "empty caller or callee id"),
            RejectReason::SelfCall => write!(f, "caller and callee are the same id"),
        }
    }
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    let mut parts = s.split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let sec: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    NaiveTime::from_hms_opt(h, m, sec)
}

/// Parses one delimited row `date, time, duration, from, to`.
///
/// Fields are trimmed; identities are kept verbatim as opaque strings.
pub fn parse_cdr_line(line: &str, delimiter: char) -> std::result::Result<CdrRecord, RejectReason> {
    let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
    if fields.len() != 5 {
        return Err(RejectReason::FieldCount(fields.len()));
    }
    let start_date =
        parse_ddmonyyyy(fields[0]).ok_or_else(|| RejectReason::Date(fields[0].to_string()))?;
    let start_time = parse_time(fields[1]).ok_or_else(|| RejectReason::Time(fields[1].to_string()))?;
    let duration: u32 = fields[2]
        .parse()
        .map_err(|_| RejectReason::Duration(fields[2].to_string()))?;
    let (from, to) = (fields[3], fields[4]);
    if from.is_empty() || to.is_empty() {
        return Err(RejectReason::EmptyId);
    }
    if from == to {
        return Err(RejectReason::SelfCall);
    }
    Ok(CdrRecord {
        start_date,
        start_time,
        duration,
        from_id: from.to_string(),
        to_id: to.to_string(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Calls shorter than this many seconds are discarded.
    pub min_duration: u32,
    pub delimiter: char,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_duration: 5,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rows_filtered_short: usize,
    pub distinct_ids: usize,
}

impl IngestStats {
    pub fn rows_accepted(&self) -> usize {
        self.rows_read - self.rows_rejected - self.rows_filtered_short
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based physical line number.
    pub row: usize,
    pub reason: RejectReason,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CdrIngest {
    pub records: Vec<CdrRecord>,
    pub stats: IngestStats,
    pub rejections: Vec<Rejection>,
}

impl CdrIngest {
    /// One line per rejected row.
    pub fn write_rejection_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rejections {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }
}

fn looks_like_header(line: &str, delimiter: char) -> bool {
    let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
    fields.len() == 5 && parse_ddmonyyyy(fields[0]).is_none() && fields[2].parse::<u64>().is_err()
}

/// Streams a call log, keeping rows with `duration >= min_duration`.
///
/// A header on the first non-blank line is detected and skipped. Blank lines
/// are not rows. Every other line is counted as read and ends up accepted,
/// rejected (with its reason) or filtered as too short.
pub fn ingest_cdr<R: BufRead>(mut reader: R, opts: IngestOptions) -> Result<CdrIngest> {
    let mut out = CdrIngest::default();
    let mut ids: HashSet<String> = HashSet::new();
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut seen_content = false;
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io("<cdr stream>", e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if looks_like_header(text, opts.delimiter) {
                continue;
            }
        }
        out.stats.rows_read += 1;
        match parse_cdr_line(text, opts.delimiter) {
            Ok(rec) if rec.duration < opts.min_duration => out.stats.rows_filtered_short += 1,
            Ok(rec) => {
                if !ids.contains(&rec.from_id) {
                    ids.insert(rec.from_id.clone());
                }
                if !ids.contains(&rec.to_id) {
                    ids.insert(rec.to_id.clone());
                }
                out.records.push(rec);
            }
            Err(reason) => {
                log::debug!("cdr row {lineno} rejected: {reason}");
                out.stats.rows_rejected += 1;
                out.rejections.push(Rejection { row: lineno, reason });
            }
        }
    }
    out.stats.distinct_ids = ids.len();
    Ok(out)
}

pub const CDR_HEADER: &str = "start_date,start_time,duration,from_id,to_id";

/// Writes records with a header row, in the form [`ingest_cdr`] reads.
pub fn write_cdr<W: Write>(records: &[CdrRecord], mut w: W, delimiter: char) -> std::io::Result<()> {
    writeln!(w, "{}", CDR_HEADER.replace(',', &delimiter.to_string()))?;
    for r in records {
        writeln!(w, "{}", r.to_line(delimiter))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ingest(text: &str, min: u32) -> CdrIngest {
        ingest_cdr(
            text.as_bytes(),
            IngestOptions {
                min_duration: min,
                delimiter: ',',
            },
        )
        .unwrap()
    }

    #[test]
    fn parses_reference_row() {
        let r = parse_cdr_line("01MAY2017,14:51:14,715,(202) 555-0116,(701) 555-0191", ',').unwrap();
        assert_eq!(r.start_date, NaiveDate::from_ymd_opt(2017, 5, 1).unwrap());
        assert_eq!(r.start_time, NaiveTime::from_hms_opt(14, 51, 14).unwrap());
        assert_eq!(r.duration, 715);
        assert_eq!(r.from_id, "(202) 555-0116");
        assert_eq!(r.to_id, "(701) 555-0191");
    }

    #[test]
    fn zero_duration_parses() {
        let r = parse_cdr_line("01MAY2017,14:51:14,0,X,Y", ',').unwrap();
        assert_eq!(r.duration, 0);
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse_cdr_line("01MAY2017,25:61:00,10,X,Y", ','),
            Err(RejectReason::Time(_))
        ));
        assert!(matches!(
            parse_cdr_line("01MAY2017,10:00:00,ten,X,Y", ','),
            Err(RejectReason::Duration(_))
        ));
        assert!(matches!(
            parse_cdr_line("01MAY2017,10:00:00,10,X", ','),
            Err(RejectReason::FieldCount(4))
        ));
        assert!(matches!(
            parse_cdr_line("32MAY2017,10:00:00,10,X,Y", ','),
            Err(RejectReason::Date(_))
        ));
        assert_eq!(
            parse_cdr_line("01MAY2017,10:00:00,10,X,X", ','),
            Err(RejectReason::SelfCall)
        );
    }

    #[test]
    fn custom_delimiter() {
        let r = parse_cdr_line("01MAY2017;14:51:14;9;a,b;c", ';').unwrap();
        assert_eq!(r.from_id, "a,b");
    }

    #[test]
    fn duration_filter() {
        let out = ingest(
            "01MAY2017,10:00:00,4,A,B\n01MAY2017,10:00:00,5,A,B\n01MAY2017,10:00:00,715,B,C\n",
            5,
        );
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.stats.rows_filtered_short, 1);
        assert_eq!(out.stats.rows_read, 3);
        assert_eq!(out.stats.distinct_ids, 3);
    }

    #[test]
    fn empty_stream() {
        let out = ingest("", 5);
        assert!(out.records.is_empty());
        assert_eq!(out.stats, IngestStats::default());
    }

    #[test]
    fn partial_failure_is_logged() {
        let out = ingest(
            "start_date,start_time,duration,from_id,to_id\n01MAY2017,10:00:00,50,A,B\nnot a row\n02MAY2017,10:00:00,50,B,A\n",
            5,
        );
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.stats.rows_rejected, 1);
        assert_eq!(out.stats.rows_read, 3);
        assert_eq!(out.rejections[0].row, 3);
        let mut log = Vec::new();
        out.write_rejection_log(&mut log).unwrap();
        assert_eq!(String::from_utf8(log).unwrap(), "row 3: expected 5 fields, found 1\n");
    }

    #[test]
    fn header_is_optional() {
        let a = ingest("01MAY2017,10:00:00,50,A,B\n", 5);
        let b = ingest(&format!("{CDR_HEADER}\n01MAY2017,10:00:00,50,A,B\n"), 5);
        assert_eq!(a.records, b.records);
        assert_eq!(a.stats, b.stats);
    }

    fn arb_record() -> impl Strategy<Value = CdrRecord> {
        (
            (1990i32..2030, 1u32..=12, 1u32..=28),
            (0u32..24, 0u32..60, 0u32..60),
            0u32..100_000,
            "[A-Za-z0-9()+ -]{1,16}",
            "[A-Za-z0-9()+ -]{1,16}",
        )
            .prop_filter_map("distinct trimmed ids", |((y, mo, d), (h, mi, s), dur, a, b)| {
                let (a, b) = (a.trim().to_string(), b.trim().to_string());
                (!a.is_empty() && !b.is_empty() && a != b).then(|| CdrRecord {
                    start_date: NaiveDate::from_ymd_opt(y, mo, d).unwrap(),
                    start_time: NaiveTime::from_hms_opt(h, mi, s).unwrap(),
                    duration: dur,
                    from_id: a,
                    to_id: b,
                })
            })
    }

    proptest! {
        #[test]
        fn line_round_trip(rec in arb_record()) {
            prop_assert_eq!(parse_cdr_line(&rec.to_line(','), ',').unwrap(), rec);
        }

        #[test]
        fn stats_conserve_rows_and_filter_is_monotone(
            durs in prop::collection::vec(prop_oneof![Just(None), (0u32..20).prop_map(Some)], 0..40),
            lo in 0u32..10,
            bump in 0u32..10,
        ) {
            let text: String = durs.iter().enumerate().map(|(i, d)| match d {
                Some(d) => format!("01MAY2017,10:00:00,{d},N{i},M{i}\n"),
                None => "garbage\n".to_string(),
            }).collect();
            let a = ingest(&text, lo);
            let b = ingest(&text, lo + bump);
            for o in [&a, &b] {
                prop_assert_eq!(o.stats.rows_read,
                    o.records.len() + o.stats.rows_rejected + o.stats.rows_filtered_short);
            }
            prop_assert!(b.records.len() <= a.records.len());
        }
    }
}
