//! Check-in CSV ingestion: streaming parse, activity-level filtering, corpus
//! assembly, and the calendar heatmap summary.
//!
//! Input schema (with header): `user_id,venue_id,category,lat,lon,timestamp`
//! where `timestamp` is RFC 3339. Malformed rows are skipped and counted by
//! reason; an unreadable file is fatal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::corpus::{CheckIn, Corpus, Event, Interner, SideEvent, CORPUS_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::geo::Reference;
use crate::temporal::{make_temporal_token, HourGranularity, TemporalToken};

pub const CSV_HEADER: [&str; 6] = ["user_id", "venue_id", "category", "lat", "lon", "timestamp"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Minimum whitelisted check-ins a user needs to enter the corpus.
    pub min_checkins: usize,
    /// Categories that carry patterns. `None` means every category counts.
    pub category_whitelist: Option<BTreeSet<String>>,
    pub tz_offset_secs: i32,
    pub granularity: HourGranularity,
    pub reference: Reference,
}

impl IngestConfig {
    pub fn new(reference: Reference) -> Self {
        IngestConfig {
            min_checkins: 20,
            category_whitelist: None,
            tz_offset_secs: 0,
            granularity: HourGranularity::hourly(),
            reference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_checkins < 1 {
            return Err(Error::config("min_checkins must be at least 1"));
        }
        if let Some(wl) = &self.category_whitelist {
            if wl.is_empty() {
                return Err(Error::config(
                    "category whitelist must not be empty when set",
                ));
            }
        }
        Ok(())
    }

    fn is_whitelisted(&self, category: &str) -> bool {
        match &self.category_whitelist {
            Some(wl) => wl.contains(category),
            None => true,
        }
    }
}

/// Per-reason counts of rows that failed to parse.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub rows_read: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<String, u64>,
}

impl RejectionReport {
    pub fn total_rejected(&self) -> u64 {
        self.rejected.values().sum()
    }

    fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_string()).or_insert(0) += 1;
    }

    /// Line-delimited text form, one `reason<TAB>count` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rows_read\t{}", self.rows_read)?;
        writeln!(w, "accepted\t{}", self.accepted)?;
        writeln!(w, "rejected\t{}", self.total_rejected())?;
        for (reason, count) in &self.rejected {
            writeln!(w, "reject:{reason}\t{count}")?;
        }
        Ok(())
    }
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<CheckIn, &'static str> {
    if record.len() != 6 {
        return Err("wrong column count");
    }
    let lat: f64 = record[3]
        .trim()
        .parse()
        .map_err(|_| "invalid coordinate number")?;
    let lon: f64 = record[4]
        .trim()
        .parse()
        .map_err(|_| "invalid coordinate number")?;
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err("coordinate out of range");
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err("coordinate out of range");
    }
    let ts = DateTime::parse_from_rfc3339(record[5].trim()).map_err(|_| "invalid timestamp")?;
    if record[0].is_empty() || record[1].is_empty() || record[2].is_empty() {
        return Err("empty identifier field");
    }
    Ok(CheckIn {
        user_id: record[0].to_string(),
        venue_id: record[1].to_string(),
        category_id: record[2].to_string(),
        lat,
        lon,
        timestamp: ts.timestamp(),
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?;
    if headers.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::data(format!(
            "unexpected CSV header {:?}; expected {:?}",
            headers, CSV_HEADER
        )));
    }
    Ok(reader)
}

/// Stream a check-in file, applying `visit` to each well-formed record.
fn scan_checkins<F>(path: &Path, report: &mut RejectionReport, mut visit: F) -> Result<()>
where
    F: FnMut(CheckIn),
{
    let mut reader = open_reader(path)?;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        report.rows_read += 1;
        match parse_row(&record) {
            Ok(checkin) => {
                report.accepted += 1;
                visit(checkin);
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok(())
}

/// Parse a whole file into memory. Suitable for small inputs and tests; the
/// scale path is [`build_corpus_streaming`], which never materializes
/// records of users that will be dropped.
pub fn load_checkins(
    path: &Path,
    _config: &IngestConfig,
) -> Result<(Vec<CheckIn>, RejectionReport)> {
    let mut report = RejectionReport::default();
    let mut out = Vec::new();
    scan_checkins(path, &mut report, |c| out.push(c))?;
    Ok((out, report))
}

/// Keep users with at least `min_checkins` whitelisted records and build the
/// corpus from their check-ins. All of a retained user's whitelisted records
/// enter the event stream; their non-whitelisted records are kept as side
/// events for the location clustering.
pub fn filter_fans(checkins: &[CheckIn], config: &IngestConfig) -> Result<Corpus> {
    config.validate()?;
    if checkins.is_empty() {
        return Err(Error::data("no check-ins to filter"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in checkins {
        if config.is_whitelisted(&c.category_id) {
            *counts.entry(c.user_id.as_str()).or_insert(0) += 1;
        }
    }
    let retained = |user: &str| counts.get(user).is_some_and(|&n| n >= config.min_checkins);

    let mut whitelisted = Vec::new();
    let mut side = Vec::new();
    for c in checkins {
        if !retained(&c.user_id) {
            continue;
        }
        if config.is_whitelisted(&c.category_id) {
            whitelisted.push(c.clone());
        } else {
            side.push(c.clone());
        }
    }
    assemble_corpus(whitelisted, side, config)
}

/// Two-pass streaming ingestion: pass one counts whitelisted records per
/// user, pass two materializes only the retained users' records.
pub fn build_corpus_streaming(
    path: &Path,
    config: &IngestConfig,
) -> Result<(Corpus, RejectionReport)> {
    config.validate()?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut first_pass = RejectionReport::default();
    scan_checkins(path, &mut first_pass, |c| {
        if config.is_whitelisted(&c.category_id) {
            *counts.entry(c.user_id).or_insert(0) += 1;
        }
    })?;

    let mut report = RejectionReport::default();
    let mut whitelisted = Vec::new();
    let mut side = Vec::new();
    scan_checkins(path, &mut report, |c| {
        if counts
            .get(&c.user_id)
            .is_some_and(|&n| n >= config.min_checkins)
        {
            if config.is_whitelisted(&c.category_id) {
                whitelisted.push(c);
            } else {
                side.push(c);
            }
        }
    })?;
    if report != first_pass {
        return Err(Error::data("input file changed between ingestion passes"));
    }
    let corpus = assemble_corpus(whitelisted, side, config)?;
    Ok((corpus, report))
}

/// Build the indexed corpus from a retained set of records.
///
/// Vocabulary order is first-appearance order over the input; events are
/// then grouped by user and sorted chronologically (stable, so equal
/// timestamps keep input order), and time tokens are interned in final
/// event order. The whole construction is deterministic for a fixed input
/// ordering.
fn assemble_corpus(
    whitelisted: Vec<CheckIn>,
    side: Vec<CheckIn>,
    config: &IngestConfig,
) -> Result<Corpus> {
    if whitelisted.is_empty() {
        return Err(Error::data(format!(
            "no users have at least {} whitelisted check-ins; corpus is empty",
            config.min_checkins
        )));
    }
    let mut users = Interner::default();
    let mut categories = Interner::default();
    let mut venues = Interner::default();

    let mut per_user: Vec<Vec<(usize, CheckIn, u32, u32)>> = Vec::new();
    for (seq, c) in whitelisted.into_iter().enumerate() {
        c.validate()?;
        let u = users.intern(&c.user_id) as usize;
        let cat = categories.intern(&c.category_id);
        let ven = venues.intern(&c.venue_id);
        if u == per_user.len() {
            per_user.push(Vec::new());
        }
        per_user[u].push((seq, c, cat, ven));
    }
    for evs in &mut per_user {
        evs.sort_by(|a, b| a.1.timestamp.cmp(&b.1.timestamp).then(a.0.cmp(&b.0)));
    }

    let mut token_index: HashMap<TemporalToken, u32> = HashMap::new();
    let mut time_tokens: Vec<TemporalToken> = Vec::new();
    let mut events = Vec::new();
    let mut user_offsets = vec![0usize];
    for (u, evs) in per_user.iter().enumerate() {
        for (_, c, cat, ven) in evs {
            let token =
                make_temporal_token(c.timestamp, config.tz_offset_secs, &config.granularity)?;
            let t = *token_index.entry(token).or_insert_with(|| {
                time_tokens.push(token);
                (time_tokens.len() - 1) as u32
            });
            let p = config.reference.project(c.lat, c.lon)?;
            events.push(Event {
                user: u as u32,
                time: t,
                category: *cat,
                venue: *ven,
                lat: c.lat,
                lon: c.lon,
                x: p.x,
                y: p.y,
                timestamp: c.timestamp,
            });
        }
        user_offsets.push(events.len());
    }

    let mut per_user_side: Vec<Vec<(usize, CheckIn)>> = vec![Vec::new(); users.len()];
    for (seq, c) in side.into_iter().enumerate() {
        c.validate()?;
        let Some(u) = users.get(&c.user_id) else {
            return Err(Error::internal(
                "side event for a user absent from the corpus",
            ));
        };
        per_user_side[u as usize].push((seq, c));
    }
    let mut side_events = Vec::new();
    let mut side_offsets = vec![0usize];
    for (u, evs) in per_user_side.iter_mut().enumerate() {
        evs.sort_by(|a, b| a.1.timestamp.cmp(&b.1.timestamp).then(a.0.cmp(&b.0)));
        for (_, c) in evs.iter() {
            let p = config.reference.project(c.lat, c.lon)?;
            side_events.push(SideEvent {
                user: u as u32,
                lat: c.lat,
                lon: c.lon,
                x: p.x,
                y: p.y,
                timestamp: c.timestamp,
            });
        }
        side_offsets.push(side_events.len());
    }

    let corpus = Corpus {
        version: CORPUS_FORMAT_VERSION,
        users: users.into_names(),
        categories: categories.into_names(),
        venues: venues.into_names(),
        time_tokens,
        events,
        user_offsets,
        side_events,
        side_offsets,
        tz_offset_secs: config.tz_offset_secs,
        granularity: config.granularity.clone(),
        reference: config.reference,
    };
    corpus.check_invariants(config.min_checkins)?;
    Ok(corpus)
}

/// Check-in counts per (local date, hour of day). Dates run contiguously
/// from the first to the last observed day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarHeatmap {
    pub dates: Vec<NaiveDate>,
    /// One row of 24 hourly counts per date.
    pub counts: Vec<[u64; 24]>,
}

impl CalendarHeatmap {
    pub fn total(&self) -> u64 {
        self.counts.iter().flat_map(|r| r.iter()).sum()
    }

    /// CSV with a `date,0,1,...,23` header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend((0..24).map(|h| h.to_string()));
        out.write_record(&header)?;
        for (date, row) in self.dates.iter().zip(&self.counts) {
            let mut rec = vec![date.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Aggregate corpus events into the (date, hour) heatmap, in local time.
pub fn calendar_heatmap(corpus: &Corpus) -> Result<CalendarHeatmap> {
    if corpus.events.is_empty() {
        return Err(Error::data("cannot build a heatmap for an empty corpus"));
    }
    let offset = Duration::seconds(i64::from(corpus.tz_offset_secs));
    let mut stamped = Vec::with_capacity(corpus.events.len());
    for e in &corpus.events {
        let utc = DateTime::from_timestamp(e.timestamp, 0)
            .ok_or_else(|| Error::data(format!("timestamp {} out of range", e.timestamp)))?;
        let local = utc + offset;
        stamped.push((local.date_naive(), local.hour() as usize));
    }
    let first = *stamped.iter().map(|(d, _)| d).min().expect("non-empty");
    let last = *stamped.iter().map(|(d, _)| d).max().expect("non-empty");
    let n_days = (last - first).num_days() as usize + 1;
    let mut counts = vec![[0u64; 24]; n_days];
    for (date, hour) in stamped {
        let day = (date - first).num_days() as usize;
        counts[day][hour] += 1;
    }
    let dates = (0..n_days)
        .map(|d| first + Duration::days(d as i64))
        .collect();
    Ok(CalendarHeatmap { dates, counts })
}
