//! Temporal tokens: the (month, day-of-week, hour-slot) labels attached to
//! every check-in.
//!
//! A token is derived from the check-in instant shifted by a fixed UTC
//! offset, so the same configuration always yields the same token for the
//! same instant. Hours can be kept as 24 distinct slots or grouped into
//! coarser named bands.

use chrono::{DateTime, Datelike, Duration, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MONTH_ABBR: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const DOW_ABBR: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// How the 24 hours of a day map onto slots.
///
/// `starts` holds the first hour of each slot in increasing order, starting
/// at 0; slot `i` covers `[starts[i], starts[i+1])` (the last slot runs to
/// hour 24). Slots are contiguous, so the mapping is surjective by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourGranularity {
    starts: Vec<u8>,
    names: Vec<String>,
}

impl HourGranularity {
    /// One slot per hour; slot names are the bare hour numbers.
    pub fn hourly() -> Self {
        HourGranularity {
            starts: (0..24).collect(),
            names: (0..24).map(|h| h.to_string()).collect(),
        }
    }

    /// Five named bands: night 0-6, morning 6-11, noon 11-14,
    /// afternoon 14-19, evening 19-24.
    pub fn five_slot() -> Self {
        HourGranularity {
            starts: vec![0, 6, 11, 14, 19],
            names: ["night", "morning", "noon", "afternoon", "evening"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// Custom contiguous slots given their start hours.
    pub fn from_starts(starts: Vec<u8>) -> Result<Self> {
        if starts.is_empty() || starts[0] != 0 {
            return Err(Error::config("hour slots must start at hour 0"));
        }
        if starts.iter().any(|&h| h > 23) {
            return Err(Error::config("hour slot starts must lie in 0..=23"));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "hour slot starts must be strictly increasing",
            ));
        }
        let names = starts.iter().map(|h| format!("s{h:02}")).collect();
        Ok(HourGranularity { starts, names })
    }

    /// Number of slots H.
    pub fn slots(&self) -> usize {
        self.starts.len()
    }

    pub fn slot_of_hour(&self, hour: u32) -> usize {
        debug_assert!(hour < 24);
        match self.starts.binary_search(&(hour as u8)) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn slot_name(&self, slot: usize) -> &str {
        &self.names[slot]
    }
}

impl Default for HourGranularity {
    fn default() -> Self {
        HourGranularity::hourly()
    }
}

/// A (month, day-of-week, hour-slot) label. Month is 1-12 and day_of_week
/// is 1-7 with Monday = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemporalToken {
    pub month: u8,
    pub day_of_week: u8,
    pub hour_slot: u16,
}

impl TemporalToken {
    /// Dense id in `[0, 12 * 7 * H)`; a bijection with the
    /// (month, dow, slot) triple for a fixed slot count.
    pub fn id(&self, slots: usize) -> usize {
        ((self.month as usize - 1) * 7 + (self.day_of_week as usize - 1)) * slots
            + self.hour_slot as usize
    }

    pub fn from_id(id: usize, slots: usize) -> Self {
        let slot = id % slots;
        let rest = id / slots;
        TemporalToken {
            month: (rest / 7 + 1) as u8,
            day_of_week: (rest % 7 + 1) as u8,
            hour_slot: slot as u16,
        }
    }

    /// Human-readable label, e.g. `JulFri20` or `JulFrievening`.
    pub fn label(&self, granularity: &HourGranularity) -> String {
        format!(
            "{}{}{}",
            MONTH_ABBR[self.month as usize - 1],
            DOW_ABBR[self.day_of_week as usize - 1],
            granularity.slot_name(self.hour_slot as usize)
        )
    }
}

/// Derive the temporal token for an instant under a fixed UTC offset.
pub fn make_temporal_token(
    timestamp: i64,
    tz_offset_secs: i32,
    granularity: &HourGranularity,
) -> Result<TemporalToken> {
    let utc = DateTime::from_timestamp(timestamp, 0)
        .ok_or_else(|| Error::data(format!("timestamp {timestamp} out of range")))?;
    let local = utc + Duration::seconds(i64::from(tz_offset_secs));
    Ok(TemporalToken {
        month: local.month() as u8,
        day_of_week: local.weekday().number_from_monday() as u8,
        hour_slot: granularity.slot_of_hour(local.hour()) as u16,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn epoch(y: i32, m: u32, d: u32, h: u32, min: u32) -> i64 {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, min, 0)
            .unwrap()
            .and_utc()
            .timestamp()
    }

    #[test]
    fn friday_evening_check_in_gets_jul_fri_20() {
        // 2017-07-21 20:15 local time, UTC+8.
        let ts = epoch(2017, 7, 21, 20, 15) - 8 * 3600;
        let tok = make_temporal_token(ts, 8 * 3600, &HourGranularity::hourly()).unwrap();
        assert_eq!(
            tok,
            TemporalToken {
                month: 7,
                day_of_week: 5,
                hour_slot: 20
            }
        );
        assert_eq!(tok.label(&HourGranularity::hourly()), "JulFri20");
    }

    #[test]
    fn midnight_monday_january_is_all_ones_and_slot_zero() {
        // 2018-01-01 00:00 was a Monday.
        let ts = epoch(2018, 1, 1, 0, 0);
        let tok = make_temporal_token(ts, 0, &HourGranularity::hourly()).unwrap();
        assert_eq!(
            tok,
            TemporalToken {
                month: 1,
                day_of_week: 1,
                hour_slot: 0
            }
        );
    }

    #[test]
    fn five_slot_granularity_maps_2015_to_evening() {
        let ts = epoch(2017, 7, 21, 20, 15) - 8 * 3600;
        let g = HourGranularity::five_slot();
        let tok = make_temporal_token(ts, 8 * 3600, &g).unwrap();
        assert_eq!(g.slot_name(tok.hour_slot as usize), "evening");
        assert_eq!(tok.label(&g), "JulFrievening");
    }

    #[test]
    fn five_slot_boundaries() {
        let g = HourGranularity::five_slot();
        assert_eq!(g.slot_of_hour(0), 0);
        assert_eq!(g.slot_of_hour(5), 0);
        assert_eq!(g.slot_of_hour(6), 1);
        assert_eq!(g.slot_of_hour(10), 1);
        assert_eq!(g.slot_of_hour(11), 2);
        assert_eq!(g.slot_of_hour(13), 2);
        assert_eq!(g.slot_of_hour(14), 3);
        assert_eq!(g.slot_of_hour(18), 3);
        assert_eq!(g.slot_of_hour(19), 4);
        assert_eq!(g.slot_of_hour(23), 4);
    }

    #[test]
    fn token_id_round_trips_over_entire_range() {
        for slots in [24usize, 5] {
            for id in 0..12 * 7 * slots {
                let tok = TemporalToken::from_id(id, slots);
                assert_eq!(tok.id(slots), id);
                assert!((1..=12).contains(&tok.month));
                assert!((1..=7).contains(&tok.day_of_week));
                assert!((tok.hour_slot as usize) < slots);
            }
        }
    }

    #[test]
    fn same_instant_same_config_same_token() {
        let ts = epoch(2017, 10, 1, 9, 30);
        let g = HourGranularity::hourly();
        assert_eq!(
            make_temporal_token(ts, 28800, &g).unwrap(),
            make_temporal_token(ts, 28800, &g).unwrap()
        );
    }

    #[test]
    fn offset_shifts_the_derived_hour() {
        // 23:30 UTC rolls into the next local day under +1h.
        let ts = epoch(2017, 7, 20, 23, 30);
        let g = HourGranularity::hourly();
        let utc_tok = make_temporal_token(ts, 0, &g).unwrap();
        let shifted = make_temporal_token(ts, 3600, &g).unwrap();
        assert_eq!(utc_tok.hour_slot, 23);
        assert_eq!(shifted.hour_slot, 0);
        assert_eq!(utc_tok.day_of_week, 4); // Thursday
        assert_eq!(shifted.day_of_week, 5); // Friday
    }

    #[test]
    fn invalid_slot_configs_rejected() {
        assert!(HourGranularity::from_starts(vec![]).is_err());
        assert!(HourGranularity::from_starts(vec![1, 6]).is_err());
        assert!(HourGranularity::from_starts(vec![0, 6, 6]).is_err());
        assert!(HourGranularity::from_starts(vec![0, 25]).is_err());
        assert!(HourGranularity::from_starts(vec![0, 6, 12, 18]).is_ok());
    }
}
