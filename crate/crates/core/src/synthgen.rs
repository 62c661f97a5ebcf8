//! Seeded synthetic check-in corpora with planted ground truth.
//!
//! Every pipeline stage can be exercised against known answers: users carry
//! a planted pattern, patterns have peaked venue-category and time
//! preferences, venues sit in a city with a configurable central bias, and
//! each user's non-cultural check-ins form a home (and optionally work)
//! blob so the location clustering has something real to find.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate, SecondsFormat, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CheckIn;
use crate::error::{Error, Result};
use crate::geo::{ProjectedPoint, Reference};
use crate::ingest::{IngestConfig, CSV_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Planted pattern count.
    pub k_true: usize,
    pub users: usize,
    pub categories_per_pattern: usize,
    pub venues_per_category: usize,
    pub checkins_per_user: usize,
    /// Probability a check-in's pattern deviates from the user's planted one.
    pub mixture_noise: f64,
    /// Probability a check-in's category comes from another pattern's pool.
    pub category_leak: f64,
    /// Probability the hour/day/month are drawn from the pattern's
    /// preferred sets rather than uniformly.
    pub time_concentration: f64,
    /// City edge length in meters.
    pub extent_m: f64,
    /// Probability a venue is placed near the city centre.
    pub venue_center_bias: f64,
    /// Probability a check-in picks the category's venue nearest to the
    /// user's home rather than a uniform one. Links travel distance to
    /// local venue access, which the validation stage measures.
    pub venue_distance_bias: f64,
    /// Non-cultural (home/work) check-ins per user.
    pub noncultural_per_user: usize,
    pub home_sigma_m: f64,
    /// Probability a user has a distinct work location.
    pub work_probability: f64,
    /// Fraction of non-cultural check-ins at the work location.
    pub work_fraction: f64,
    pub year: i32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            k_true: 4,
            users: 500,
            categories_per_pattern: 5,
            venues_per_category: 3,
            checkins_per_user: 40,
            mixture_noise: 0.05,
            category_leak: 0.2,
            time_concentration: 0.8,
            extent_m: 20_000.0,
            venue_center_bias: 0.8,
            venue_distance_bias: 0.6,
            noncultural_per_user: 60,
            home_sigma_m: 300.0,
            work_probability: 0.5,
            work_fraction: 0.3,
            year: 2017,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_true < 2 {
            return Err(Error::config("k_true must be at least 2"));
        }
        if self.users == 0 || self.checkins_per_user == 0 {
            return Err(Error::config(
                "users and checkins_per_user must be positive",
            ));
        }
        if self.categories_per_pattern == 0 || self.venues_per_category == 0 {
            return Err(Error::config(
                "categories_per_pattern and venues_per_category must be positive",
            ));
        }
        for (name, p) in [
            ("mixture_noise", self.mixture_noise),
            ("category_leak", self.category_leak),
            ("time_concentration", self.time_concentration),
            ("venue_center_bias", self.venue_center_bias),
            ("venue_distance_bias", self.venue_distance_bias),
            ("work_probability", self.work_probability),
            ("work_fraction", self.work_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.extent_m.is_nan()
            || self.extent_m <= 0.0
            || self.home_sigma_m.is_nan()
            || self.home_sigma_m <= 0.0
        {
            return Err(Error::config("extent_m and home_sigma_m must be positive"));
        }
        Ok(())
    }

    pub fn n_categories(&self) -> usize {
        self.k_true * self.categories_per_pattern
    }

    /// Preferred hour band of a pattern: 6 hours starting at p * 24 / K.
    pub fn hour_band(&self, pattern: usize) -> (u32, u32) {
        let start = (pattern * 24 / self.k_true) as u32 % 24;
        (start, 6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub user_ids: Vec<String>,
    pub user_patterns: Vec<usize>,
    pub user_homes: Vec<ProjectedPoint>,
    pub venue_ids: Vec<String>,
    pub venue_categories: Vec<String>,
    pub venue_patterns: Vec<usize>,
    pub venue_locations: Vec<ProjectedPoint>,
    /// The whitelist: categories carrying planted patterns.
    pub cultural_categories: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub spec: SynthSpec,
    pub checkins: Vec<CheckIn>,
    pub truth: GroundTruth,
    pub reference: Reference,
}

impl SynthOutput {
    /// Ingest configuration matching this corpus: the cultural whitelist,
    /// hourly granularity, zero offset.
    pub fn ingest_config(&self, min_checkins: usize) -> IngestConfig {
        let mut cfg = IngestConfig::new(self.reference);
        cfg.min_checkins = min_checkins;
        cfg.category_whitelist = Some(self.truth.cultural_categories.iter().cloned().collect());
        cfg
    }
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the first uniform is kept away from zero.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Days of `year`/`month` falling on the given ISO weekday (Monday = 1).
fn days_matching(year: i32, month: u32, weekday: u32) -> Vec<NaiveDate> {
    let mut days = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    while d.month() == month {
        if d.weekday().number_from_monday() == weekday {
            days.push(d);
        }
        d = d.succ_opt().expect("in-range date");
    }
    days
}

struct PatternClock<'a> {
    spec: &'a SynthSpec,
}

impl PatternClock<'_> {
    /// Sample (month, weekday, hour) from the pattern's preferences.
    fn sample(&self, rng: &mut ChaCha8Rng, pattern: usize) -> (u32, u32, u32) {
        let spec = self.spec;
        let focused = |rng: &mut ChaCha8Rng| rng.random::<f64>() < spec.time_concentration;
        let quarter = pattern % 4;
        let month = if focused(rng) {
            (quarter * 3) as u32 + rng.random_range(1..=3u32)
        } else {
            rng.random_range(1..=12u32)
        };
        let weekday = if focused(rng) {
            if pattern.is_multiple_of(2) {
                rng.random_range(6..=7u32)
            } else {
                rng.random_range(1..=5u32)
            }
        } else {
            rng.random_range(1..=7u32)
        };
        let (band_start, band_len) = spec.hour_band(pattern);
        let hour = if focused(rng) {
            (band_start + rng.random_range(0..band_len)) % 24
        } else {
            rng.random_range(0..24u32)
        };
        (month, weekday, hour)
    }

    fn timestamp(&self, rng: &mut ChaCha8Rng, pattern: usize) -> i64 {
        let (month, weekday, hour) = self.sample(rng, pattern);
        let days = days_matching(self.spec.year, month, weekday);
        let day = *pick(rng, &days);
        let minute = rng.random_range(0..60u32);
        let second = rng.random_range(0..60u32);
        day.and_hms_opt(hour, minute, second)
            .expect("valid time")
            .and_utc()
            .timestamp()
    }
}

/// Generate the corpus. Byte-identical output for identical specs.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let reference = Reference::new(39.9, 116.4).expect("fixed reference");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clock = PatternClock { spec };
    let centre = ProjectedPoint::new(spec.extent_m / 2.0, spec.extent_m / 2.0);

    // Venues, category block by category block.
    let n_categories = spec.n_categories();
    let mut venue_ids = Vec::new();
    let mut venue_categories = Vec::new();
    let mut venue_patterns = Vec::new();
    let mut venue_locations = Vec::new();
    let mut venues_of_category: Vec<Vec<usize>> = vec![Vec::new(); n_categories];
    for cat in 0..n_categories {
        let pattern = cat / spec.categories_per_pattern;
        for j in 0..spec.venues_per_category {
            let loc = if rng.random::<f64>() < spec.venue_center_bias {
                ProjectedPoint::new(
                    (centre.x + std_normal(&mut rng) * spec.extent_m / 10.0)
                        .clamp(0.0, spec.extent_m),
                    (centre.y + std_normal(&mut rng) * spec.extent_m / 10.0)
                        .clamp(0.0, spec.extent_m),
                )
            } else {
                ProjectedPoint::new(
                    rng.random::<f64>() * spec.extent_m,
                    rng.random::<f64>() * spec.extent_m,
                )
            };
            venues_of_category[cat].push(venue_ids.len());
            venue_ids.push(format!("v{cat:02}_{j}"));
            venue_categories.push(format!("c{cat:02}"));
            venue_patterns.push(pattern);
            venue_locations.push(loc);
        }
    }

    let cultural_categories: Vec<String> = (0..n_categories).map(|c| format!("c{c:02}")).collect();
    let other_patterns: Vec<Vec<usize>> = (0..spec.k_true)
        .map(|p| (0..spec.k_true).filter(|&q| q != p).collect())
        .collect();

    let mut checkins = Vec::new();
    let mut user_ids = Vec::new();
    let mut user_patterns = Vec::new();
    let mut user_homes = Vec::new();
    for u in 0..spec.users {
        let user_id = format!("u{u:04}");
        let planted = u % spec.k_true;
        let home = ProjectedPoint::new(
            rng.random::<f64>() * spec.extent_m,
            rng.random::<f64>() * spec.extent_m,
        );
        let work = if rng.random::<f64>() < spec.work_probability {
            Some(ProjectedPoint::new(
                rng.random::<f64>() * spec.extent_m,
                rng.random::<f64>() * spec.extent_m,
            ))
        } else {
            None
        };

        for _ in 0..spec.checkins_per_user {
            let pattern = if rng.random::<f64>() < spec.mixture_noise {
                *pick(&mut rng, &other_patterns[planted])
            } else {
                planted
            };
            let own_block = pattern * spec.categories_per_pattern;
            let category = if rng.random::<f64>() < spec.category_leak {
                // Uniform over every other pattern's categories.
                let mut c = rng.random_range(0..n_categories - spec.categories_per_pattern);
                if c >= own_block {
                    c += spec.categories_per_pattern;
                }
                c
            } else {
                own_block + rng.random_range(0..spec.categories_per_pattern)
            };
            let candidates = &venues_of_category[category];
            let venue = if spec.venue_distance_bias > 0.0
                && rng.random::<f64>() < spec.venue_distance_bias
            {
                *candidates
                    .iter()
                    .min_by(|&&a, &&b| {
                        home.distance(&venue_locations[a])
                            .total_cmp(&home.distance(&venue_locations[b]))
                    })
                    .expect("category has venues")
            } else {
                *pick(&mut rng, candidates)
            };
            let (lat, lon) = reference.unproject(venue_locations[venue]);
            checkins.push(CheckIn {
                user_id: user_id.clone(),
                venue_id: venue_ids[venue].clone(),
                category_id: venue_categories[venue].clone(),
                lat,
                lon,
                timestamp: clock.timestamp(&mut rng, pattern),
            });
        }

        for _ in 0..spec.noncultural_per_user {
            let at_work = work.is_some() && rng.random::<f64>() < spec.work_fraction;
            let (anchor, tag) = match (at_work, work) {
                (true, Some(w)) => (w, "work"),
                _ => (home, "home"),
            };
            let loc = ProjectedPoint::new(
                anchor.x + std_normal(&mut rng) * spec.home_sigma_m,
                anchor.y + std_normal(&mut rng) * spec.home_sigma_m,
            );
            let (lat, lon) = reference.unproject(loc);
            // Routine check-ins spread over the whole year.
            let day_of_year = rng.random_range(0..365u32);
            let secs = rng.random_range(0..86_400u32);
            let ts = NaiveDate::from_ymd_opt(spec.year, 1, 1)
                .expect("valid date")
                .and_hms_opt(0, 0, 0)
                .expect("valid time")
                .and_utc()
                .timestamp()
                + i64::from(day_of_year) * 86_400
                + i64::from(secs);
            checkins.push(CheckIn {
                user_id: user_id.clone(),
                venue_id: format!("{tag}_{user_id}"),
                category_id: format!("{tag}place"),
                lat,
                lon,
                timestamp: ts,
            });
        }

        user_ids.push(user_id);
        user_patterns.push(planted);
        user_homes.push(home);
    }

    Ok(SynthOutput {
        spec: spec.clone(),
        checkins,
        truth: GroundTruth {
            user_ids,
            user_patterns,
            user_homes,
            venue_ids,
            venue_categories,
            venue_patterns,
            venue_locations,
            cultural_categories,
        },
        reference,
    })
}

/// Write the check-in CSV in the exact ingest schema.
pub fn write_checkins_csv<W: Write>(w: W, checkins: &[CheckIn]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for c in checkins {
        let rfc3339 = Utc
            .timestamp_opt(c.timestamp, 0)
            .single()
            .ok_or_else(|| Error::internal("generated timestamp out of range"))?
            .to_rfc3339_opts(SecondsFormat::Secs, true);
        out.write_record([
            c.user_id.clone(),
            c.venue_id.clone(),
            c.category_id.clone(),
            c.lat.to_string(),
            c.lon.to_string(),
            rfc3339,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Emit `checkins.csv` plus the ground-truth sidecars into `dir`.
pub fn write_files(out: &SynthOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_checkins_csv(
        std::io::BufWriter::new(std::fs::File::create(dir.join("checkins.csv"))?),
        &out.checkins,
    )?;

    let mut users = csv::Writer::from_path(dir.join("truth_users.csv"))?;
    users.write_record([
        "user_id", "pattern", "home_x", "home_y", "home_lat", "home_lon",
    ])?;
    for (i, id) in out.truth.user_ids.iter().enumerate() {
        let home = out.truth.user_homes[i];
        let (lat, lon) = out.reference.unproject(home);
        users.write_record([
            id.clone(),
            out.truth.user_patterns[i].to_string(),
            home.x.to_string(),
            home.y.to_string(),
            lat.to_string(),
            lon.to_string(),
        ])?;
    }
    users.flush()?;

    let mut venues = csv::Writer::from_path(dir.join("truth_venues.csv"))?;
    venues.write_record(["venue_id", "category", "pattern", "x", "y", "lat", "lon"])?;
    for (i, id) in out.truth.venue_ids.iter().enumerate() {
        let loc = out.truth.venue_locations[i];
        let (lat, lon) = out.reference.unproject(loc);
        venues.write_record([
            id.clone(),
            out.truth.venue_categories[i].clone(),
            out.truth.venue_patterns[i].to_string(),
            loc.x.to_string(),
            loc.y.to_string(),
            lat.to_string(),
            lon.to_string(),
        ])?;
    }
    venues.flush()?;

    let params = serde_json::json!({
        "spec": out.spec,
        "cultural_categories": out.truth.cultural_categories,
    });
    serde_json::to_writer_pretty(std::fs::File::create(dir.join("params.json"))?, &params)?;
    Ok(())
}
