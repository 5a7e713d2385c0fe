//! Bit-exact CSV reader/writer for the pageview and session wire formats.
//!
//! Both formats are plain UTF-8, comma-separated, LF-terminated, with a
//! mandatory case-sensitive header and no quoting (every field is numeric or
//! coded). Timestamps default to `MM.DD.YYYY HH:MM`; load-time fields carry
//! exactly 3 decimals; durations are whole seconds.
//!
//! Malformed or invariant-violating rows never abort a read: they are
//! excluded and reported as [`Diagnostic`]s with their line number. A file
//! with k bad rows among n yields exactly n−k records and k diagnostics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::timefmt::{self, TimestampFormat};
use crate::types::{
    validate_pageview, validate_session, PageviewRecord, SessionRecord,
};

/// Pageview CSV column order.
pub const PAGEVIEW_FIELDS: [&str; 18] = [
    "Detail_ID",
    "Session_ID",
    "Detail_Date_Time",
    "User_ID",
    "Current_Login_Status",
    "Session_Login_Status",
    "User_Type",
    "Sex",
    "Age",
    "Age_Group",
    "User_Language_TR",
    "User_Location",
    "Browser_Type",
    "Referer_Type",
    "Server_ID",
    "Service_ID",
    "Page_Duration",
    "Page_Load_Time",
];

/// Session CSV column order.
pub const SESSION_FIELDS: [&str; 25] = [
    "Session_ID",
    "User_Type",
    "Sex",
    "Age",
    "User_Language_TR",
    "User_Location",
    "Browser_Type",
    "Referer_Type",
    "Landing_Srv_ID",
    "Exit_Srv_ID",
    "Session_Login_Status",
    "Page_Count",
    "Service_Count",
    "Total_Session_Duration",
    "Avg_Page_Duration",
    "Total_Page_Load",
    "p_gate",
    "p_mail",
    "p_obis",
    "p_abis",
    "p_pbis",
    "p_menu",
    "Exit_Method",
    "Log_Date_Time",
    "Log_Date",
];

/// Record kind a schema describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Pageview,
    Session,
}

/// CSV schema: fixed field order per record kind plus the timestamp wire
/// format tag.
#[derive(Debug, Clone, Copy)]
pub struct CsvSchema {
    pub kind: RecordKind,
    pub timestamp_format: TimestampFormat,
}

impl CsvSchema {
    pub fn pageviews(timestamp_format: TimestampFormat) -> Self {
        CsvSchema {
            kind: RecordKind::Pageview,
            timestamp_format,
        }
    }

    pub fn sessions(timestamp_format: TimestampFormat) -> Self {
        CsvSchema {
            kind: RecordKind::Session,
            timestamp_format,
        }
    }

    pub fn fields(&self) -> &'static [&'static str] {
        match self.kind {
            RecordKind::Pageview => &PAGEVIEW_FIELDS,
            RecordKind::Session => &SESSION_FIELDS,
        }
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema::pageviews(TimestampFormat::Paper)
    }
}

/// A per-row problem: the physical line number (header is line 1) and why
/// the row was excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Result of a read: all well-formed records plus one diagnostic per
/// excluded row.
#[derive(Debug, Clone)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<Diagnostic>,
}

fn check_header(line: Option<std::io::Result<String>>, schema: &CsvSchema) -> Result<()> {
    let line = match line {
        Some(Ok(l)) => l,
        Some(Err(e)) => return Err(Error::io("<stream>", e)),
        None => {
            return Err(Error::HeaderMismatch {
                position: 0,
                expected: schema.fields()[0].to_string(),
                found: "<empty file>".to_string(),
            })
        }
    };
    let found: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
    let expected = schema.fields();
    for (i, &name) in expected.iter().enumerate() {
        match found.get(i) {
            Some(&f) if f == name => {}
            other => {
                return Err(Error::HeaderMismatch {
                    position: i,
                    expected: name.to_string(),
                    found: other.unwrap_or(&"<missing>").to_string(),
                })
            }
        }
    }
    if found.len() > expected.len() {
        return Err(Error::HeaderMismatch {
            position: expected.len(),
            expected: "<end of header>".to_string(),
            found: found[expected.len()].to_string(),
        });
    }
    Ok(())
}

struct FieldParser<'a> {
    fields: &'a [&'a str],
    names: &'static [&'static str],
    cursor: usize,
}

impl<'a> FieldParser<'a> {
    fn new(fields: &'a [&'a str], names: &'static [&'static str]) -> Self {
        FieldParser {
            fields,
            names,
            cursor: 0,
        }
    }

    fn next_raw(&mut self) -> (&'a str, &'static str) {
        let out = (self.fields[self.cursor], self.names[self.cursor]);
        self.cursor += 1;
        out
    }

    fn int(&mut self) -> std::result::Result<i64, String> {
        let (raw, name) = self.next_raw();
        raw.parse::<i64>()
            .map_err(|_| format!("{name}: invalid integer {raw:?}"))
    }

    fn decimal(&mut self) -> std::result::Result<f64, String> {
        let (raw, name) = self.next_raw();
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{name}: invalid decimal {raw:?}")),
        }
    }

    fn timestamp(&mut self, fmt: TimestampFormat) -> std::result::Result<i64, String> {
        let (raw, name) = self.next_raw();
        timefmt::parse_timestamp(raw, fmt).map_err(|_| format!("{name}: invalid timestamp {raw:?}"))
    }

    fn date(&mut self, fmt: TimestampFormat) -> std::result::Result<i64, String> {
        let (raw, name) = self.next_raw();
        timefmt::parse_date(raw, fmt).map_err(|_| format!("{name}: invalid date {raw:?}"))
    }
}

fn parse_pageview(fields: &[&str], fmt: TimestampFormat) -> std::result::Result<PageviewRecord, String> {
    let mut p = FieldParser::new(fields, &PAGEVIEW_FIELDS);
    Ok(PageviewRecord {
        detail_id: p.int()?,
        session_id: p.int()?,
        detail_date_time: p.timestamp(fmt)?,
        user_id: p.int()?,
        current_login_status: p.int()?,
        session_login_status: p.int()?,
        user_type: p.int()?,
        sex: p.int()?,
        age: p.int()?,
        age_group: p.int()?,
        user_language_tr: p.int()?,
        user_location: p.int()?,
        browser_type: p.int()?,
        referer_type: p.int()?,
        server_id: p.int()?,
        service_id: p.int()?,
        page_duration: p.int()?,
        page_load_time: p.decimal()?,
    })
}

fn parse_session(fields: &[&str], fmt: TimestampFormat) -> std::result::Result<SessionRecord, String> {
    let mut p = FieldParser::new(fields, &SESSION_FIELDS);
    Ok(SessionRecord {
        session_id: p.int()?,
        user_type: p.int()?,
        sex: p.int()?,
        age: p.int()?,
        user_language_tr: p.int()?,
        user_location: p.int()?,
        browser_type: p.int()?,
        referer_type: p.int()?,
        landing_srv_id: p.int()?,
        exit_srv_id: p.int()?,
        session_login_status: p.int()?,
        page_count: p.int()?,
        service_count: p.int()?,
        total_session_duration: p.int()?,
        avg_page_duration: p.decimal()?,
        total_page_load: p.decimal()?,
        service_pages: [p.int()?, p.int()?, p.int()?, p.int()?, p.int()?, p.int()?],
        exit_method: p.int()?,
        log_date_time: p.timestamp(fmt)?,
        log_date: p.date(fmt)?,
    })
}

fn read_rows<T>(
    reader: impl BufRead,
    schema: &CsvSchema,
    parse: impl Fn(&[&str], TimestampFormat) -> std::result::Result<T, String>,
    validate: impl Fn(&T) -> Vec<String>,
) -> Result<ReadOutcome<T>> {
    let mut lines = reader.lines();
    check_header(lines.next(), schema)?;

    let expected = schema.fields().len();
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2; // header is line 1
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            diagnostics.push(Diagnostic {
                line: line_no,
                reason: format!("field count {} ≠ {}", fields.len(), expected),
            });
            continue;
        }
        match parse(&fields, schema.timestamp_format) {
            Ok(record) => {
                let violations = validate(&record);
                if violations.is_empty() {
                    records.push(record);
                } else {
                    diagnostics.push(Diagnostic {
                        line: line_no,
                        reason: violations.join("; "),
                    });
                }
            }
            Err(reason) => diagnostics.push(Diagnostic { line: line_no, reason }),
        }
    }
    Ok(ReadOutcome {
        records,
        diagnostics,
    })
}

/// Reads pageview records from a byte stream. Rows that fail to parse or
/// violate record invariants (including duplicate `Detail_ID`s) are excluded
/// with a diagnostic.
pub fn read_pageviews_from(reader: impl Read, schema: &CsvSchema) -> Result<ReadOutcome<PageviewRecord>> {
    let mut outcome = read_rows(BufReader::new(reader), schema, parse_pageview, |r| {
        validate_pageview(r).iter().map(|v| v.to_string()).collect()
    })?;
    dedup_by_id(
        &mut outcome,
        |r: &PageviewRecord| r.detail_id,
        "duplicate Detail_ID",
    );
    Ok(outcome)
}

/// Reads session records from a byte stream; same exclusion contract as
/// [`read_pageviews_from`], with session invariants (p_* sum identity and
/// friends) checked per row.
pub fn read_sessions_from(reader: impl Read, schema: &CsvSchema) -> Result<ReadOutcome<SessionRecord>> {
    let mut outcome = read_rows(BufReader::new(reader), schema, parse_session, |r| {
        validate_session(r).iter().map(|v| v.to_string()).collect()
    })?;
    dedup_by_id(
        &mut outcome,
        |r: &SessionRecord| r.session_id,
        "duplicate Session_ID",
    );
    Ok(outcome)
}

fn dedup_by_id<T>(outcome: &mut ReadOutcome<T>, id: impl Fn(&T) -> i64, label: &str) {
    let mut seen = std::collections::HashSet::with_capacity(outcome.records.len());
    let mut kept = Vec::with_capacity(outcome.records.len());
    for record in outcome.records.drain(..) {
        if seen.insert(id(&record)) {
            kept.push(record);
        } else {
            outcome.diagnostics.push(Diagnostic {
                line: 0,
                reason: format!("{label} {}", id(&record)),
            });
        }
    }
    outcome.records = kept;
}

pub fn read_pageviews(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ReadOutcome<PageviewRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pageviews_from(file, schema)
}

pub fn read_sessions(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ReadOutcome<SessionRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sessions_from(file, schema)
}

/// Canonical wire rendering of one pageview row (no trailing newline).
pub fn render_pageview(r: &PageviewRecord, fmt: TimestampFormat) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
        r.detail_id,
        r.session_id,
        timefmt::format_timestamp(r.detail_date_time, fmt),
        r.user_id,
        r.current_login_status,
        r.session_login_status,
        r.user_type,
        r.sex,
        r.age,
        r.age_group,
        r.user_language_tr,
        r.user_location,
        r.browser_type,
        r.referer_type,
        r.server_id,
        r.service_id,
        r.page_duration,
        r.page_load_time,
    )
}

/// Canonical wire rendering of one session row (no trailing newline).
pub fn render_session(r: &SessionRecord, fmt: TimestampFormat) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{},{},{},{},{},{},{},{},{}",
        r.session_id,
        r.user_type,
        r.sex,
        r.age,
        r.user_language_tr,
        r.user_location,
        r.browser_type,
        r.referer_type,
        r.landing_srv_id,
        r.exit_srv_id,
        r.session_login_status,
        r.page_count,
        r.service_count,
        r.total_session_duration,
        r.avg_page_duration,
        r.total_page_load,
        r.service_pages[0],
        r.service_pages[1],
        r.service_pages[2],
        r.service_pages[3],
        r.service_pages[4],
        r.service_pages[5],
        r.exit_method,
        timefmt::format_timestamp(r.log_date_time, fmt),
        timefmt::format_date(r.log_date, fmt),
    )
}

fn write_all(
    writer: impl Write,
    header: &[&str],
    rows: impl Iterator<Item = String>,
) -> std::io::Result<usize> {
    let mut w = BufWriter::new(writer);
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    let mut count = 0;
    for row in rows {
        w.write_all(row.as_bytes())?;
        w.write_all(b"\n")?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

/// Writes pageview records to a byte sink; returns the row count written.
pub fn write_pageviews_to(
    writer: impl Write,
    records: &[PageviewRecord],
    schema: &CsvSchema,
) -> Result<usize> {
    write_all(
        writer,
        &PAGEVIEW_FIELDS,
        records.iter().map(|r| render_pageview(r, schema.timestamp_format)),
    )
    .map_err(|e| Error::io("<stream>", e))
}

/// Writes session records to a byte sink; returns the row count written.
pub fn write_sessions_to(
    writer: impl Write,
    records: &[SessionRecord],
    schema: &CsvSchema,
) -> Result<usize> {
    write_all(
        writer,
        &SESSION_FIELDS,
        records.iter().map(|r| render_session(r, schema.timestamp_format)),
    )
    .map_err(|e| Error::io("<stream>", e))
}

pub fn write_pageviews(
    path: impl AsRef<Path>,
    records: &[PageviewRecord],
    schema: &CsvSchema,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pageviews_to(file, records, schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_sessions(
    path: impl AsRef<Path>,
    records: &[SessionRecord],
    schema: &CsvSchema,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sessions_to(file, records, schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes a two-column integer CSV (used for the anomaly ground truth and
/// the exit-event table).
pub fn write_pairs(
    path: impl AsRef<Path>,
    header: [&str; 2],
    pairs: impl Iterator<Item = (i64, i64)>,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_all(file, &header, pairs.map(|(a, b)| format!("{a},{b}")))
        .map_err(|e| Error::io(path, e))
}

/// Reads a two-column integer CSV written by [`write_pairs`].
pub fn read_pairs(path: impl AsRef<Path>, header: [&str; 2]) -> Result<Vec<(i64, i64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(l)) if l.trim_end_matches('\r') == header.join(",") => {}
        Some(Ok(l)) => {
            return Err(Error::HeaderMismatch {
                position: 0,
                expected: header.join(","),
                found: l,
            })
        }
        Some(Err(e)) => return Err(Error::io(path, e)),
        None => {
            return Err(Error::HeaderMismatch {
                position: 0,
                expected: header.join(","),
                found: "<empty file>".to_string(),
            })
        }
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a = parts
            .next()
            .and_then(|p| p.parse::<i64>().ok())
            .ok_or_else(|| Error::input(format!("invalid row {line:?} in {}", path.display())))?;
        let b = parts
            .next()
            .and_then(|p| p.parse::<i64>().ok())
            .ok_or_else(|| Error::input(format!("invalid row {line:?} in {}", path.display())))?;
        out.push((a, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefmt::epoch_for;
    use crate::types::round3;

    fn sample() -> PageviewRecord {
        PageviewRecord {
            detail_id: 89010871,
            session_id: 83665107,
            detail_date_time: epoch_for(2022, 11, 20, 13, 1),
            user_id: 184922,
            current_login_status: 1,
            session_login_status: 1,
            user_type: 6,
            sex: 2,
            age: 18,
            age_group: 1,
            user_language_tr: 1,
            user_location: 1,
            browser_type: 1,
            referer_type: 6,
            server_id: 4,
            service_id: 3,
            page_duration: 41,
            page_load_time: 0.122,
        }
    }

    const SAMPLE_ROW: &str =
        "89010871,83665107,11.20.2022 13:01,184922,1,1,6,2,18,1,1,1,1,6,4,3,41,0.122";

    #[test]
    fn sample_row_renders_exactly() {
        assert_eq!(render_pageview(&sample(), TimestampFormat::Paper), SAMPLE_ROW);
    }

    #[test]
    fn header_plus_sample_row_reads_cleanly() {
        let text = format!("{}\n{}\n", PAGEVIEW_FIELDS.join(","), SAMPLE_ROW);
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.records[0], sample());
    }

    #[test]
    fn header_only_yields_no_records_and_no_diagnostics() {
        let text = format!("{}\n", PAGEVIEW_FIELDS.join(","));
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn short_row_is_excluded_with_field_count_diagnostic() {
        let short = SAMPLE_ROW.rsplit_once(',').unwrap().0; // 17 fields
        let text = format!("{}\n{}\n", PAGEVIEW_FIELDS.join(","), short);
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].reason, "field count 17 ≠ 18");
        assert_eq!(out.diagnostics[0].line, 2);
    }

    #[test]
    fn header_mismatch_names_the_first_bad_column() {
        let mut fields: Vec<&str> = PAGEVIEW_FIELDS.to_vec();
        fields[2] = "Timestamp";
        let text = format!("{}\n", fields.join(","));
        let err = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::HeaderMismatch {
                position,
                expected,
                found,
            } => {
                assert_eq!(position, 2);
                assert_eq!(expected, "Detail_Date_Time");
                assert_eq!(found, "Timestamp");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_rows_never_abort_the_stream() {
        let mut text = format!("{}\n", PAGEVIEW_FIELDS.join(","));
        for i in 0..10 {
            if i % 3 == 0 {
                text.push_str("garbage\n");
            } else {
                let mut r = sample();
                r.detail_id += i;
                text.push_str(&render_pageview(&r, TimestampFormat::Paper));
                text.push('\n');
            }
        }
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.diagnostics.len(), 4);
    }

    #[test]
    fn invariant_violations_are_diagnostics() {
        let mut r = sample();
        r.sex = 7;
        let text = format!(
            "{}\n{}\n",
            PAGEVIEW_FIELDS.join(","),
            render_pageview(&r, TimestampFormat::Paper)
        );
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.diagnostics[0].reason.contains("sex ∈ {1,2}"));
    }

    #[test]
    fn duplicate_detail_ids_are_excluded() {
        let row = render_pageview(&sample(), TimestampFormat::Paper);
        let text = format!("{}\n{row}\n{row}\n", PAGEVIEW_FIELDS.join(","));
        let out = read_pageviews_from(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn load_time_serializes_with_three_decimals() {
        let mut r = sample();
        r.page_load_time = 0.5;
        assert!(render_pageview(&r, TimestampFormat::Paper).ends_with(",0.500"));
    }

    #[test]
    fn write_then_read_is_identity() {
        let records: Vec<PageviewRecord> = (0..5)
            .map(|i| {
                let mut r = sample();
                r.detail_id += i;
                r.page_load_time = round3(0.1 * i as f64 + 0.017);
                r
            })
            .collect();
        let mut buf = Vec::new();
        let n = write_pageviews_to(&mut buf, &records, &CsvSchema::default()).unwrap();
        assert_eq!(n, 5);
        let out = read_pageviews_from(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.records, records);
    }

    #[test]
    fn one_record_writes_two_lines() {
        let mut buf = Vec::new();
        write_pageviews_to(&mut buf, &[sample()], &CsvSchema::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    fn sample_session() -> SessionRecord {
        SessionRecord {
            session_id: 83665107,
            user_type: 6,
            sex: 2,
            age: 18,
            user_language_tr: 1,
            user_location: 1,
            browser_type: 1,
            referer_type: 6,
            landing_srv_id: 1,
            exit_srv_id: 2,
            session_login_status: 1,
            page_count: 7,
            service_count: 4,
            total_session_duration: 140,
            avg_page_duration: 20.0,
            total_page_load: 0.854,
            service_pages: [2, 1, 3, 0, 0, 1],
            exit_method: 1,
            log_date_time: epoch_for(2022, 11, 20, 13, 1),
            log_date: epoch_for(2022, 11, 20, 0, 0),
        }
    }

    #[test]
    fn session_with_consistent_sum_is_accepted() {
        let text = format!(
            "{}\n{}\n",
            SESSION_FIELDS.join(","),
            render_session(&sample_session(), TimestampFormat::Paper)
        );
        let out = read_sessions_from(text.as_bytes(), &CsvSchema::sessions(TimestampFormat::Paper))
            .unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn session_sum_mismatch_is_a_diagnostic() {
        let mut s = sample_session();
        s.page_count = 8;
        let text = format!(
            "{}\n{}\n",
            SESSION_FIELDS.join(","),
            render_session(&s, TimestampFormat::Paper)
        );
        let out = read_sessions_from(text.as_bytes(), &CsvSchema::sessions(TimestampFormat::Paper))
            .unwrap();
        assert!(out.records.is_empty());
        assert!(out.diagnostics[0].reason.contains("p_* sum mismatch"));
    }

    #[test]
    fn empty_session_file_with_header_reads_zero_records() {
        let text = format!("{}\n", SESSION_FIELDS.join(","));
        let out = read_sessions_from(text.as_bytes(), &CsvSchema::sessions(TimestampFormat::Paper))
            .unwrap();
        assert!(out.records.is_empty());
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn iso_schema_round_trips_sessions() {
        let schema = CsvSchema::sessions(TimestampFormat::Iso8601);
        let records = vec![sample_session()];
        let mut buf = Vec::new();
        write_sessions_to(&mut buf, &records, &schema).unwrap();
        let out = read_sessions_from(buf.as_slice(), &schema).unwrap();
        assert_eq!(out.records, records);
    }
}
