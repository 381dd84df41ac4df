//! Session logs as delimited text.
//!
//! One row per page visit with the columns
//! `session_id, step, timestamp_iso8601, page, customer_type`. Rows of a
//! session may appear in any order; the step index orders them.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use chrono::{DateTime, SecondsFormat};
use ddhmm_core::model::{compute_covariates, is_weekend, MAX_SESSION_LEN, MIN_SESSION_LEN};
use ddhmm_core::{PageCategory, Session};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 5] = ["session_id", "step", "timestamp_iso8601", "page", "customer_type"];

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Session ids dropped before any processing (e.g. known bots).
    pub exclude: HashSet<String>,
    /// Session lengths kept, counted after Exit labelling.
    pub length_bounds: RangeInclusive<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { exclude: HashSet::new(), length_bounds: MIN_SESSION_LEN..=MAX_SESSION_LEN }
    }
}

/// Parsed sessions plus counts of what was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSessions {
    /// Ordered by start time, then session id.
    pub sessions: Vec<Session>,
    pub too_short: usize,
    pub too_long: usize,
    pub excluded: usize,
}

struct RawRow {
    line: u64,
    step: u32,
    arrival_ms: i64,
    page: PageCategory,
    customer_type: bool,
}

pub fn load_sessions(path: &Path, options: &LoadOptions) -> Result<LoadedSessions> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sessions(BufReader::new(file), options)
}

pub fn read_sessions<R: Read>(reader: R, options: &LoadOptions) -> Result<LoadedSessions> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(row_error)?.clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Row { line: 1, message: format!("missing column `{name}`") })?;
    }

    let mut groups: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(row_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(index[i]).unwrap_or_default();
        let bad = |message: String| Error::Row { line, message };

        let session_id = field(0);
        if session_id.is_empty() {
            return Err(bad("empty session_id".into()));
        }
        let step: u32 = field(1).parse().map_err(|_| bad(format!("invalid step `{}`", field(1))))?;
        let arrival_ms = DateTime::parse_from_rfc3339(field(2))
            .map_err(|e| bad(format!("invalid timestamp `{}`: {e}", field(2))))?
            .timestamp_millis();
        let page: PageCategory =
            field(3).parse().map_err(|_| Error::UnknownPage { line, symbol: field(3).to_owned() })?;
        let customer_type = match field(4) {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(bad(format!("customer_type must be 0 or 1, found `{other}`"))),
        };
        groups.entry(session_id.to_owned()).or_default().push(RawRow { line, step, arrival_ms, page, customer_type });
    }

    let mut out = LoadedSessions { sessions: Vec::new(), too_short: 0, too_long: 0, excluded: 0 };
    for (id, rows) in groups {
        if options.exclude.contains(&id) {
            out.excluded += 1;
            continue;
        }
        let session = assemble(&id, rows)?;
        if session.len() < *options.length_bounds.start() {
            out.too_short += 1;
        } else if session.len() > *options.length_bounds.end() {
            out.too_long += 1;
        } else {
            out.sessions.push(session);
        }
    }
    out.sessions.sort_by(|a, b| a.start_time_ms.cmp(&b.start_time_ms).then_with(|| a.session_id.cmp(&b.session_id)));
    Ok(out)
}

fn row_error(e: csv::Error) -> Error {
    Error::Row { line: e.position().map_or(0, |p| p.line()), message: e.to_string() }
}

/// Orders, checks and labels the rows of one session.
fn assemble(id: &str, mut rows: Vec<RawRow>) -> Result<Session> {
    rows.sort_by_key(|r| (r.step, r.line));
    for pair in rows.windows(2) {
        if pair[0].step == pair[1].step {
            return Err(Error::DuplicateStep { line: pair[1].line, session: id.into(), step: pair[1].step });
        }
    }
    let non_monotone = |line, message: String| Error::NonMonotoneStep { line, session: id.into(), message };
    for (i, r) in rows.iter().enumerate() {
        let expected = i as u32 + 1;
        if r.step != expected {
            return Err(non_monotone(r.line, format!("expected step {expected}, found {}", r.step)));
        }
        if i > 0 && r.arrival_ms < rows[i - 1].arrival_ms {
            return Err(non_monotone(r.line, format!("timestamp of step {} precedes step {}", r.step, r.step - 1)));
        }
        if r.customer_type != rows[0].customer_type {
            return Err(Error::Row { line: r.line, message: format!("customer_type changes within session `{id}`") });
        }
        if r.page == PageCategory::Exit && i + 1 != rows.len() {
            return Err(Error::Row { line: r.line, message: "Exit must be the last page of a session".into() });
        }
    }

    let mut pages: Vec<PageCategory> = rows.iter().map(|r| r.page).collect();
    let mut arrivals: Vec<i64> = rows.iter().map(|r| r.arrival_ms).collect();
    let purchased = pages.iter().any(|p| p.is_purchase());
    if !purchased && pages.last() != Some(&PageCategory::Exit) {
        // the Exit row inherits the last observed dwell time
        let n = arrivals.len();
        let span = if n > 1 { arrivals[n - 1] - arrivals[n - 2] } else { 0 };
        pages.push(PageCategory::Exit);
        arrivals.push(arrivals[n - 1] + span);
    }
    let start = arrivals[0];
    let covariates = compute_covariates(&pages, &arrivals, is_weekend(start), rows[0].customer_type)?;
    Ok(Session::new(id, pages, covariates, start)?)
}

/// Writes sessions in the layout read by [`read_sessions`]. Arrival times
/// are rebuilt from the start time and the per-step time spans.
pub fn write_sessions<W: Write>(writer: W, sessions: &[Session]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for s in sessions {
        let customer = s.covariates.first().map_or(0.0, |c| c.customer_type);
        let customer = if customer == 1.0 { "1" } else { "0" };
        let mut clock = s.start_time_ms;
        for (t, (page, cov)) in s.pages.iter().zip(&s.covariates).enumerate() {
            if t > 0 {
                clock += (cov.time_span * 1000.0).round() as i64;
            }
            let stamp = DateTime::from_timestamp_millis(clock)
                .ok_or_else(|| ddhmm_core::Error::Domain(format!("timestamp {clock} ms is out of range")))?
                .to_rfc3339_opts(SecondsFormat::Millis, true);
            w.write_record([s.session_id.as_str(), &(t + 1).to_string(), &stamp, page.name(), customer])?;
        }
    }
    w.flush().map_err(|e| Error::io("<sessions>", e))?;
    Ok(())
}

pub fn save_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sessions(file, sessions)
}

/// Reads an exclusion list: one session id per line, `#` starts a comment.
pub fn load_exclusion_list(path: &Path) -> Result<HashSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let id = line.split('#').next().unwrap_or_default().trim();
        if !id.is_empty() {
            ids.insert(id.to_owned());
        }
    }
    Ok(ids)
}
