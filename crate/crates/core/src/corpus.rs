//! The indexed corpus: interned vocabularies over users, venue categories,
//! venues, and observed temporal tokens, plus the event stream itself.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{validate_lat_lon, ProjectedPoint, Reference};
use crate::temporal::{HourGranularity, TemporalToken};

/// One time-stamped, geolocated visit by a user to a categorized venue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckIn {
    pub user_id: String,
    pub venue_id: String,
    pub category_id: String,
    pub lat: f64,
    pub lon: f64,
    /// Epoch seconds UTC.
    pub timestamp: i64,
}

impl CheckIn {
    pub fn validate(&self) -> Result<()> {
        validate_lat_lon(self.lat, self.lon)?;
        if chrono::DateTime::from_timestamp(self.timestamp, 0).is_none() {
            return Err(Error::data(format!(
                "timestamp {} out of range",
                self.timestamp
            )));
        }
        Ok(())
    }
}

/// String-to-index interner. Indices are assigned in first-seen order, so
/// interning is deterministic for a fixed input ordering.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn into_names(self) -> Vec<String> {
        self.names
    }
}

/// A whitelisted (pattern-bearing) event in index space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub user: u32,
    pub time: u32,
    pub category: u32,
    pub venue: u32,
    pub lat: f64,
    pub lon: f64,
    pub x: f64,
    pub y: f64,
    pub timestamp: i64,
}

impl Event {
    pub fn point(&self) -> ProjectedPoint {
        ProjectedPoint::new(self.x, self.y)
    }
}

/// A retained user's non-whitelisted check-in. These carry no category or
/// time vocabulary entry; they only contribute locations to the per-user
/// activity clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideEvent {
    pub user: u32,
    pub lat: f64,
    pub lon: f64,
    pub x: f64,
    pub y: f64,
    pub timestamp: i64,
}

impl SideEvent {
    pub fn point(&self) -> ProjectedPoint {
        ProjectedPoint::new(self.x, self.y)
    }
}

/// Indexed vocabulary views over a filtered check-in set.
///
/// Events are stored grouped by user (users in index order) and
/// chronologically within each user. The temporal vocabulary contains only
/// tokens that actually occur.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub version: u32,
    pub users: Vec<String>,
    pub categories: Vec<String>,
    pub venues: Vec<String>,
    pub time_tokens: Vec<TemporalToken>,
    pub events: Vec<Event>,
    /// `events[user_offsets[u]..user_offsets[u + 1]]` are user u's events.
    pub user_offsets: Vec<usize>,
    pub side_events: Vec<SideEvent>,
    pub side_offsets: Vec<usize>,
    pub tz_offset_secs: i32,
    pub granularity: HourGranularity,
    pub reference: Reference,
}

pub const CORPUS_FORMAT_VERSION: u32 = 1;

impl Corpus {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn n_time_tokens(&self) -> usize {
        self.time_tokens.len()
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn user_events(&self, user: usize) -> &[Event] {
        &self.events[self.user_offsets[user]..self.user_offsets[user + 1]]
    }

    pub fn user_side_events(&self, user: usize) -> &[SideEvent] {
        &self.side_events[self.side_offsets[user]..self.side_offsets[user + 1]]
    }

    /// All of a user's check-in locations: whitelisted and side events,
    /// duplicates kept.
    pub fn user_locations(&self, user: usize) -> Vec<ProjectedPoint> {
        let mut pts: Vec<ProjectedPoint> =
            self.user_events(user).iter().map(Event::point).collect();
        pts.extend(self.user_side_events(user).iter().map(SideEvent::point));
        pts
    }

    /// Check the structural invariants. Used after deserialization and in
    /// tests; construction upholds these by design.
    pub fn check_invariants(&self, min_checkins: usize) -> Result<()> {
        let (u, v, t, w) = (
            self.users.len(),
            self.categories.len(),
            self.time_tokens.len(),
            self.venues.len(),
        );
        if self.user_offsets.len() != u + 1 || self.side_offsets.len() != u + 1 {
            return Err(Error::internal("user offset table has wrong length"));
        }
        if self.user_offsets[u] != self.events.len()
            || self.side_offsets[u] != self.side_events.len()
        {
            return Err(Error::internal(
                "offset tables do not cover the event lists",
            ));
        }
        for user in 0..u {
            let evs = self.user_events(user);
            if evs.len() < min_checkins {
                return Err(Error::internal(format!(
                    "user {user} has {} events, below the minimum {min_checkins}",
                    evs.len()
                )));
            }
            for e in evs {
                if e.user as usize != user {
                    return Err(Error::internal("event stored under the wrong user"));
                }
                if e.category as usize >= v || e.time as usize >= t || e.venue as usize >= w {
                    return Err(Error::internal("event index out of vocabulary bounds"));
                }
            }
            if evs.windows(2).any(|p| p[0].timestamp > p[1].timestamp) {
                return Err(Error::internal(format!(
                    "user {user} events are not chronological"
                )));
            }
        }
        Ok(())
    }
}
