//! Model validation: do users in under-served cells travel farther for
//! their pattern's venues?
//!
//! Travel is measured from each user's activity centre to the venues of
//! their assigned pattern they actually checked in at (weighted by visit
//! multiplicity). Users are then mapped into grid cells by their centre and
//! the per-cell mean travel distance is correlated with the cell's DSR.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dsi::{DsrGrid, VenueSupplyProfile};
use crate::error::{Error, Result};
use crate::poptics::UserActivityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelRecord {
    pub user: usize,
    pub pattern: usize,
    /// Mean distance in meters from the user's centre to his pattern's
    /// visited venues.
    pub mean_travel: f64,
}

/// Per-user mean travel distance. Users without any located check-in at a
/// venue of their own pattern are omitted and counted.
pub fn travel_distances(
    corpus: &Corpus,
    profiles: &[UserActivityProfile],
    venues: &[VenueSupplyProfile],
) -> (Vec<TravelRecord>, usize) {
    let mut venue_pattern = vec![usize::MAX; corpus.venues.len()];
    for v in venues {
        venue_pattern[v.venue] = v.pattern;
    }
    let mut records = Vec::new();
    let mut omitted = 0usize;
    for profile in profiles {
        let user = profile.user;
        let mut sum = 0.0;
        let mut n = 0usize;
        for e in corpus.user_events(user) {
            if venue_pattern[e.venue as usize] == profile.pattern {
                sum += profile.centre.distance(&e.point());
                n += 1;
            }
        }
        if n == 0 {
            omitted += 1;
        } else {
            records.push(TravelRecord {
                user,
                pattern: profile.pattern,
                mean_travel: sum / n as f64,
            });
        }
    }
    (records, omitted)
}

/// Pearson correlation coefficient; `None` with fewer than three pairs or a
/// zero-variance side.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for &(x, y) in pairs {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Whether correlation pairs are aggregated per cell or taken per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationLevel {
    Cell,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pattern: usize,
    pub pairs: usize,
    /// `None` when undefined (too few pairs or zero variance).
    pub r: Option<f64>,
}

/// Correlate a pattern's cell DSR with travel distance.
///
/// At cell level, each cell with at least one contributing user and a
/// defined DSR yields one pair (cell DSR, mean travel of its users); at
/// user level every user with a defined home-cell DSR yields a pair.
pub fn dsr_travel_correlation(
    records: &[TravelRecord],
    grid: &DsrGrid,
    profiles: &[UserActivityProfile],
    pattern: usize,
    level: CorrelationLevel,
) -> Result<CorrelationResult> {
    if pattern >= grid.patterns {
        return Err(Error::config(format!("pattern {pattern} out of range")));
    }
    let dsr = &grid.dsr[pattern];
    let mut sorted: Vec<&TravelRecord> = records.iter().filter(|r| r.pattern == pattern).collect();
    sorted.sort_by_key(|r| r.user);
    let mut per_cell: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut user_pairs: Vec<(f64, f64)> = Vec::new();
    for record in sorted {
        let centre = profiles[record.user].centre;
        let Some((row, col)) = grid.spec.cell_of(centre) else {
            return Err(Error::internal("user centre outside the grid"));
        };
        let idx = grid.spec.index(row, col);
        let Some(dsr_value) = dsr[idx] else {
            continue;
        };
        user_pairs.push((dsr_value, record.mean_travel));
        match per_cell.iter_mut().find(|(i, _)| *i == idx) {
            Some((_, travels)) => travels.push(record.mean_travel),
            None => per_cell.push((idx, vec![record.mean_travel])),
        }
    }
    let pairs: Vec<(f64, f64)> = match level {
        CorrelationLevel::User => user_pairs,
        CorrelationLevel::Cell => per_cell
            .into_iter()
            .map(|(idx, travels)| {
                let mean = travels.iter().sum::<f64>() / travels.len() as f64;
                (dsr[idx].expect("only defined cells collected"), mean)
            })
            .collect(),
    };
    Ok(CorrelationResult {
        pattern,
        pairs: pairs.len(),
        r: pearson(&pairs),
    })
}

/// `pattern,pairs,r` CSV; undefined correlations get an empty r field.
pub fn write_correlation_csv<W: Write>(w: W, results: &[CorrelationResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pattern", "pairs", "r"])?;
    for res in results {
        out.write_record([
            res.pattern.to_string(),
            res.pairs.to_string(),
            res.r.map_or(String::new(), |r| r.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `user,pattern,mean_travel` CSV.
pub fn write_travel_csv<W: Write>(w: W, corpus: &Corpus, records: &[TravelRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user", "pattern", "mean_travel"])?;
    for r in records {
        out.write_record([
            corpus.users[r.user].clone(),
            r.pattern.to_string(),
            r.mean_travel.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
