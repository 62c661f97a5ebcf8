//! Sliding-window NPMI coherence over fitted models.
//!
//! Windows slide over each user's chronological event sequence (never
//! spanning two users) with step 1; occurrence within a window is boolean.
//! The temporal score couples each of a pattern's top venue categories with
//! the pattern's top time tokens; the venue-only score is the standard
//! coherence used for baseline comparisons. Both aggregate per-segment
//! cosine similarities between a single-token context vector and the
//! aggregate context vector.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tlda::{self, PatternDistributions, TldaHyperparams, VenueRanking};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Smoothing added to the joint probability before the logarithms.
    pub epsilon: f64,
    /// Exponent applied to every NPMI value (>= 1; 1 leaves them unchanged).
    pub tau: f64,
    pub top_n_venues: usize,
    pub top_n_times: usize,
    /// When set, top venues are cut by probability threshold instead of count.
    pub venue_threshold: Option<f64>,
    /// Events per sliding window.
    pub window_size: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            epsilon: 1e-12,
            tau: 1.0,
            top_n_venues: 10,
            top_n_times: 10,
            venue_threshold: None,
            window_size: 10,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        if self.tau.is_nan() || self.tau < 1.0 {
            return Err(Error::config("tau must be at least 1"));
        }
        if self.window_size < 2 {
            return Err(Error::config("window_size must be at least 2"));
        }
        if self.top_n_venues == 0 || self.top_n_times == 0 {
            return Err(Error::config("top-token counts must be positive"));
        }
        Ok(())
    }

    fn venue_ranking(&self) -> VenueRanking {
        match self.venue_threshold {
            Some(p) => VenueRanking::Threshold(p),
            None => VenueRanking::TopN(self.top_n_venues),
        }
    }
}

/// Boolean window-occurrence statistics for venue categories and time
/// tokens, plus the joint counts the coherence scores need.
#[derive(Debug, Clone)]
pub struct SlidingWindowCounts {
    pub window_size: usize,
    pub window_total: u64,
    pub venue_occur: Vec<u64>,
    pub time_occur: Vec<u64>,
    venue_time: HashMap<(u32, u32), u64>,
    venue_venue: HashMap<(u32, u32), u64>,
}

impl SlidingWindowCounts {
    pub fn co_occur_vt(&self, venue: usize, time: usize) -> u64 {
        self.venue_time
            .get(&(venue as u32, time as u32))
            .copied()
            .unwrap_or(0)
    }

    /// Venue-venue joint occurrence; a venue trivially co-occurs with itself.
    pub fn co_occur_vv(&self, a: usize, b: usize) -> u64 {
        if a == b {
            return self.venue_occur[a];
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        self.venue_venue.get(&key).copied().unwrap_or(0)
    }

    pub fn npmi_vt(&self, venue: usize, time: usize, config: &CoherenceConfig) -> f64 {
        let total = self.window_total as f64;
        npmi_score(
            self.co_occur_vt(venue, time) as f64 / total,
            self.venue_occur[venue] as f64 / total,
            self.time_occur[time] as f64 / total,
            config.epsilon,
            config.tau,
        )
    }

    pub fn npmi_vv(&self, a: usize, b: usize, config: &CoherenceConfig) -> f64 {
        let total = self.window_total as f64;
        npmi_score(
            self.co_occur_vv(a, b) as f64 / total,
            self.venue_occur[a] as f64 / total,
            self.venue_occur[b] as f64 / total,
            config.epsilon,
            config.tau,
        )
    }
}

/// The NPMI kernel on raw window probabilities, with the tau weighting
/// applied.
pub fn npmi_score(p_joint: f64, p_a: f64, p_b: f64, epsilon: f64, tau: f64) -> f64 {
    tau_pow(npmi_raw(p_joint, p_a, p_b, epsilon), tau)
}

/// Normalized pointwise mutual information with joint-only smoothing,
/// clamped to [-1, 1].
///
/// A zero marginal means the pair can never co-occur; that and the
/// degenerate everything-co-occurs case are both defined as 0, matching the
/// independence limit.
fn npmi_raw(p_joint: f64, p_a: f64, p_b: f64, epsilon: f64) -> f64 {
    if p_a <= 0.0 || p_b <= 0.0 {
        return 0.0;
    }
    let joint = p_joint + epsilon;
    if joint >= 1.0 {
        return 0.0;
    }
    let val = (joint / (p_a * p_b)).ln() / -joint.ln();
    val.clamp(-1.0, 1.0)
}

/// Sign-preserving power so fractional exponents stay defined on negative
/// scores.
fn tau_pow(x: f64, tau: f64) -> f64 {
    if tau == 1.0 {
        x
    } else if x >= 0.0 {
        x.powf(tau)
    } else {
        -(-x).powf(tau)
    }
}

/// Count boolean token occurrences over per-user sliding windows of
/// `window_size` events (step 1). Users with fewer events than the window
/// contribute a single truncated window.
pub fn build_windows(corpus: &Corpus, window_size: usize) -> Result<SlidingWindowCounts> {
    if window_size < 2 {
        return Err(Error::config("window_size must be at least 2"));
    }
    if corpus.n_events() == 0 {
        return Err(Error::data("cannot build windows over an empty corpus"));
    }
    let mut counts = SlidingWindowCounts {
        window_size,
        window_total: 0,
        venue_occur: vec![0; corpus.n_categories()],
        time_occur: vec![0; corpus.n_time_tokens()],
        venue_time: HashMap::new(),
        venue_venue: HashMap::new(),
    };
    let mut venues_seen: Vec<u32> = Vec::new();
    let mut times_seen: Vec<u32> = Vec::new();
    for user in 0..corpus.n_users() {
        let events = corpus.user_events(user);
        let n_windows = events.len().saturating_sub(window_size) + 1;
        for start in 0..n_windows {
            let end = (start + window_size).min(events.len());
            venues_seen.clear();
            times_seen.clear();
            for e in &events[start..end] {
                if !venues_seen.contains(&e.category) {
                    venues_seen.push(e.category);
                }
                if !times_seen.contains(&e.time) {
                    times_seen.push(e.time);
                }
            }
            counts.window_total += 1;
            for &v in &venues_seen {
                counts.venue_occur[v as usize] += 1;
            }
            for &t in &times_seen {
                counts.time_occur[t as usize] += 1;
            }
            for &v in &venues_seen {
                for &t in &times_seen {
                    *counts.venue_time.entry((v, t)).or_insert(0) += 1;
                }
            }
            for (i, &a) in venues_seen.iter().enumerate() {
                for &b in &venues_seen[i + 1..] {
                    let key = (a.min(b), a.max(b));
                    *counts.venue_venue.entry(key).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// A pattern's top venue categories and top time tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTopTokens {
    pub venues: Vec<usize>,
    pub times: Vec<usize>,
}

/// Cut top venues/times for every pattern of a fitted model.
pub fn model_top_tokens(
    dists: &PatternDistributions,
    config: &CoherenceConfig,
) -> Vec<PatternTopTokens> {
    let k_patterns = dists.phi.len();
    (0..k_patterns)
        .map(|k| PatternTopTokens {
            venues: tlda::top_venues(dists, k, config.venue_ranking()),
            times: tlda::top_times(dists, k, config.top_n_times),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Mean per-segment cosine, in [-1, 1].
    pub score: f64,
    pub segments: usize,
    /// Segments whose context vector was all zero (scored 0 and counted).
    pub zero_vector_segments: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some((dot / (na * nb)).clamp(-1.0, 1.0))
    }
}

fn aggregate_segments(scores: impl Iterator<Item = Option<f64>>) -> CoherenceReport {
    let mut sum = 0.0;
    let mut segments = 0usize;
    let mut zeros = 0usize;
    for s in scores {
        segments += 1;
        match s {
            Some(m) => sum += m,
            None => zeros += 1,
        }
    }
    CoherenceReport {
        score: if segments == 0 {
            0.0
        } else {
            sum / segments as f64
        },
        segments,
        zero_vector_segments: zeros,
    }
}

/// Temporal coherence: one segment per (pattern, top venue), each scored by
/// the cosine between that venue's NPMI vector over the pattern's top times
/// and the aggregate vector of all the pattern's top venues.
pub fn tcv(
    tops: &[PatternTopTokens],
    counts: &SlidingWindowCounts,
    config: &CoherenceConfig,
) -> Result<CoherenceReport> {
    config.validate()?;
    for (k, t) in tops.iter().enumerate() {
        if t.venues.is_empty() || t.times.is_empty() {
            return Err(Error::data(format!(
                "pattern {k} has an empty top venue or top time set"
            )));
        }
    }
    let mut scores = Vec::new();
    for top in tops {
        // The aggregate vector is shared by every segment of the pattern.
        let aggregate: Vec<f64> = top
            .times
            .iter()
            .map(|&t| {
                top.venues
                    .iter()
                    .map(|&v| counts.npmi_vt(v, t, config))
                    .sum()
            })
            .collect();
        for &v in &top.venues {
            let single: Vec<f64> = top
                .times
                .iter()
                .map(|&t| counts.npmi_vt(v, t, config))
                .collect();
            scores.push(cosine(&single, &aggregate));
        }
    }
    Ok(aggregate_segments(scores.into_iter()))
}

/// Standard venue-only coherence over venue-venue co-occurrence, with the
/// same one-set segmentation (each top venue against the full top set).
pub fn cv(
    top_venues: &[Vec<usize>],
    counts: &SlidingWindowCounts,
    config: &CoherenceConfig,
) -> Result<CoherenceReport> {
    config.validate()?;
    for (k, venues) in top_venues.iter().enumerate() {
        if venues.is_empty() {
            return Err(Error::data(format!(
                "pattern {k} has an empty top venue set"
            )));
        }
    }
    let mut scores = Vec::new();
    for venues in top_venues {
        let aggregate: Vec<f64> = venues
            .iter()
            .map(|&b| venues.iter().map(|&a| counts.npmi_vv(a, b, config)).sum())
            .collect();
        for &v in venues {
            let single: Vec<f64> = venues
                .iter()
                .map(|&b| counts.npmi_vv(v, b, config))
                .collect();
            scores.push(cosine(&single, &aggregate));
        }
    }
    Ok(aggregate_segments(scores.into_iter()))
}

/// Deterministic per-(K, chain) seed derivation.
pub fn chain_seed(base: u64, k: usize, chain: usize) -> u64 {
    fn splitmix(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    }
    splitmix(base ^ splitmix(k as u64 ^ splitmix(chain as u64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub chain: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectKResult {
    pub best_k: usize,
    pub rows: Vec<KScore>,
    /// Mean score per candidate, in candidate order.
    pub means: Vec<(usize, f64)>,
}

/// Fit every candidate K (averaging the temporal coherence over `chains`
/// independent chains) and pick the argmax; ties break toward the smaller K.
pub fn select_k(
    corpus: &Corpus,
    candidates: &[usize],
    template: &TldaHyperparams,
    chains: usize,
    config: &CoherenceConfig,
) -> Result<SelectKResult> {
    if candidates.is_empty() {
        return Err(Error::config("select_k needs at least one candidate"));
    }
    if chains == 0 {
        return Err(Error::config("select_k needs at least one chain"));
    }
    config.validate()?;
    let counts = build_windows(corpus, config.window_size)?;
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &k in candidates {
        let mut sum = 0.0;
        for chain in 0..chains {
            let mut hp = template.clone();
            hp.k = k;
            hp.seed = chain_seed(template.seed, k, chain);
            let model = tlda::fit(corpus, hp)?;
            let dists = tlda::distributions(&model);
            let tops = model_top_tokens(&dists, config);
            let report = tcv(&tops, &counts, config)?;
            rows.push(KScore {
                k,
                chain,
                score: report.score,
            });
            sum += report.score;
        }
        means.push((k, sum / chains as f64));
    }
    let mut best = means[0];
    for &(k, m) in &means[1..] {
        if m > best.1 || (m == best.1 && k < best.0) {
            best = (k, m);
        }
    }
    Ok(SelectKResult {
        best_k: best.0,
        rows,
        means,
    })
}

/// V x V cosine similarity between venue categories, each category
/// represented by its pattern-loading column of phi.
pub fn venue_similarity(dists: &PatternDistributions) -> Vec<Vec<f64>> {
    let k_patterns = dists.phi.len();
    let n_venues = dists.phi.first().map_or(0, Vec::len);
    let columns: Vec<Vec<f64>> = (0..n_venues)
        .map(|v| (0..k_patterns).map(|k| dists.phi[k][v]).collect())
        .collect();
    let mut sim = vec![vec![0.0; n_venues]; n_venues];
    for i in 0..n_venues {
        sim[i][i] = 1.0;
        for j in i + 1..n_venues {
            let c = cosine(&columns[i], &columns[j]).unwrap_or(0.0);
            sim[i][j] = c;
            sim[j][i] = c;
        }
    }
    sim
}

/// CSV rows `k,chain,score` followed by `k,mean,score` summary lines.
pub fn write_tcv_table_csv<W: Write>(w: W, result: &SelectKResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "chain", "score"])?;
    for row in &result.rows {
        out.write_record([
            row.k.to_string(),
            row.chain.to_string(),
            row.score.to_string(),
        ])?;
    }
    for (k, mean) in &result.means {
        out.write_record([k.to_string(), "mean".to_string(), mean.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Labeled similarity matrix CSV.
pub fn write_similarity_csv<W: Write>(w: W, labels: &[String], sim: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["category".to_string()];
    header.extend_from_slice(labels);
    out.write_record(&header)?;
    for (label, row) in labels.iter().zip(sim) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
