//! Time-aware latent pattern model over (user, time token, venue category)
//! events, fitted by collapsed Gibbs sampling.
//!
//! Each event carries a latent pattern z. The pattern assignment depends on
//! both the user's and the time token's pattern distribution, and the venue
//! category is drawn from the pattern's venue distribution. Collapsing the
//! Dirichlet parameters gives, for an event (u, t, v) with counts excluding
//! that event,
//!
//! ```text
//! P(z = k | rest) ∝ (n_uz[u][k] + alpha) * (n_tz[t][k] + gamma)
//!                   * (n_zv[k][v] + beta) / (n_z[k] + V * beta)
//! ```
//!
//! With the temporal layer disabled the time factor is dropped, which is
//! exactly collapsed-Gibbs LDA with users as documents. The user and time
//! factors are deliberately left unnormalized; see docs/model-notes.md for
//! the derivation and the consequences of that choice.
//!
//! All sampling goes through a seeded portable RNG and the count updates are
//! integer-only, so a fixed (corpus, hyperparams, seed) triple reproduces
//! the model bit for bit on any platform.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TldaHyperparams {
    /// Number of latent patterns K.
    pub k: usize,
    /// Dirichlet prior over pattern-user distributions.
    pub alpha: f64,
    /// Dirichlet prior over venue-pattern distributions.
    pub beta: f64,
    /// Dirichlet prior over pattern-time distributions.
    pub gamma: f64,
    /// Total Gibbs sweeps.
    pub iterations: usize,
    /// Sweeps discarded before sample collection (only relevant when
    /// collecting assignment samples; point estimates use the final sweep).
    pub burn_in: usize,
    pub seed: u64,
    /// `false` drops the time factor, recovering plain LDA.
    pub temporal_enabled: bool,
}

impl TldaHyperparams {
    /// Standard defaults: alpha = gamma = 50/K, beta = 0.01.
    pub fn new(k: usize) -> Self {
        TldaHyperparams {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            gamma: 50.0 / k as f64,
            iterations: 100,
            burn_in: 0,
            seed: 0,
            temporal_enabled: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config("pattern count K must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::config("alpha, beta, and gamma must all be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config("burn_in must be smaller than iterations"));
        }
        Ok(())
    }
}

/// Count matrices of a fitted model plus the per-event assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TldaModel {
    pub version: u32,
    /// U x K: events of user u assigned to pattern k.
    pub n_uz: Vec<Vec<u64>>,
    /// T x K: events at time token t assigned to pattern k.
    pub n_tz: Vec<Vec<u64>>,
    /// K x V: events of category v assigned to pattern k.
    pub n_zv: Vec<Vec<u64>>,
    /// K: total events per pattern.
    pub n_z: Vec<u64>,
    pub z_assign: Vec<u32>,
    pub hyperparams: TldaHyperparams,
    pub diagnostics: Vec<String>,
}

impl TldaModel {
    /// Verify count conservation against the corpus the model was fit on.
    pub fn check_consistency(&self, corpus: &Corpus) -> Result<()> {
        let k = self.hyperparams.k;
        if self.z_assign.len() != corpus.n_events() {
            return Err(Error::internal("assignment vector length != event count"));
        }
        if self.z_assign.iter().any(|&z| z as usize >= k) {
            return Err(Error::internal("assignment outside [0, K)"));
        }
        for kk in 0..k {
            let from_users: u64 = self.n_uz.iter().map(|row| row[kk]).sum();
            let from_times: u64 = self.n_tz.iter().map(|row| row[kk]).sum();
            let from_venues: u64 = self.n_zv[kk].iter().sum();
            if from_users != self.n_z[kk]
                || from_times != self.n_z[kk]
                || from_venues != self.n_z[kk]
            {
                return Err(Error::internal(format!(
                    "pattern {kk} marginals disagree: {from_users}/{from_times}/{from_venues} vs {}",
                    self.n_z[kk]
                )));
            }
        }
        let total: u64 = self.n_z.iter().sum();
        if total != corpus.n_events() as u64 {
            return Err(Error::internal("total assignments != corpus event count"));
        }
        for u in 0..corpus.n_users() {
            let row: u64 = self.n_uz[u].iter().sum();
            if row != corpus.user_events(u).len() as u64 {
                return Err(Error::internal(format!("user {u} row sum != event count")));
            }
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let model: TldaModel = serde_json::from_reader(r)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        Ok(model)
    }
}

/// One Gibbs chain. Strictly sequential: every event update reads counts
/// mutated by the previous one. Independent chains with different seeds can
/// run concurrently.
pub struct TldaSampler<'a> {
    corpus: &'a Corpus,
    hp: TldaHyperparams,
    n_uz: Vec<Vec<u64>>,
    n_tz: Vec<Vec<u64>>,
    n_zv: Vec<Vec<u64>>,
    n_z: Vec<u64>,
    z: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    diagnostics: Vec<String>,
}

impl<'a> TldaSampler<'a> {
    pub fn new(corpus: &'a Corpus, hp: TldaHyperparams) -> Result<Self> {
        hp.validate()?;
        let n = corpus.n_events();
        if n == 0 {
            return Err(Error::data("cannot fit a model on an empty corpus"));
        }
        if hp.k > n {
            return Err(Error::data(format!(
                "K = {} exceeds the number of events ({n})",
                hp.k
            )));
        }
        let mut diagnostics = Vec::new();
        if corpus.n_categories() < 2 {
            diagnostics.push("degenerate corpus: a single venue category".to_string());
        }
        let (u, t, v, k) = (
            corpus.n_users(),
            corpus.n_time_tokens(),
            corpus.n_categories(),
            hp.k,
        );
        let mut sampler = TldaSampler {
            corpus,
            hp,
            n_uz: vec![vec![0; k]; u],
            n_tz: vec![vec![0; k]; t],
            n_zv: vec![vec![0; v]; k],
            n_z: vec![0; k],
            z: vec![0; n],
            rng: ChaCha8Rng::seed_from_u64(0),
            weights: vec![0.0; k],
            diagnostics,
        };
        sampler.rng = ChaCha8Rng::seed_from_u64(sampler.hp.seed);
        for i in 0..n {
            let zi = sampler.rng.random_range(0..k as u32);
            sampler.z[i] = zi;
            sampler.add_event(i, zi as usize);
        }
        Ok(sampler)
    }

    fn add_event(&mut self, i: usize, k: usize) {
        let e = &self.corpus.events[i];
        self.n_uz[e.user as usize][k] += 1;
        self.n_tz[e.time as usize][k] += 1;
        self.n_zv[k][e.category as usize] += 1;
        self.n_z[k] += 1;
    }

    fn remove_event(&mut self, i: usize, k: usize) {
        let e = &self.corpus.events[i];
        self.n_uz[e.user as usize][k] -= 1;
        self.n_tz[e.time as usize][k] -= 1;
        self.n_zv[k][e.category as usize] -= 1;
        self.n_z[k] -= 1;
    }

    /// Unnormalized sampling weights for event `i`, with `i` excluded from
    /// the counts (callers must have removed it first).
    fn fill_weights(&mut self, i: usize) -> f64 {
        let e = &self.corpus.events[i];
        let (alpha, beta, gamma) = (self.hp.alpha, self.hp.beta, self.hp.gamma);
        let v_beta = self.corpus.n_categories() as f64 * beta;
        let user_row = &self.n_uz[e.user as usize];
        let time_row = &self.n_tz[e.time as usize];
        let mut total = 0.0;
        for k in 0..self.hp.k {
            let mut w = (user_row[k] as f64 + alpha)
                * (self.n_zv[k][e.category as usize] as f64 + beta)
                / (self.n_z[k] as f64 + v_beta);
            if self.hp.temporal_enabled {
                w *= time_row[k] as f64 + gamma;
            }
            self.weights[k] = w;
            total += w;
        }
        total
    }

    /// One full sweep over the corpus in event order.
    pub fn sweep(&mut self) {
        for i in 0..self.z.len() {
            let old = self.z[i] as usize;
            self.remove_event(i, old);
            let total = self.fill_weights(i);
            let target = self.rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut new = self.hp.k - 1;
            for (k, &w) in self.weights.iter().enumerate() {
                acc += w;
                if target < acc {
                    new = k;
                    break;
                }
            }
            self.z[i] = new as u32;
            self.add_event(i, new);
        }
    }

    /// The normalized conditional P(z_i = k | rest) under the current state.
    pub fn conditional(&mut self, i: usize) -> Vec<f64> {
        let old = self.z[i] as usize;
        self.remove_event(i, old);
        let total = self.fill_weights(i);
        let probs = self.weights.iter().map(|w| w / total).collect();
        self.add_event(i, old);
        probs
    }

    pub fn assignments(&self) -> &[u32] {
        &self.z
    }

    pub fn into_model(self) -> TldaModel {
        TldaModel {
            version: MODEL_FORMAT_VERSION,
            n_uz: self.n_uz,
            n_tz: self.n_tz,
            n_zv: self.n_zv,
            n_z: self.n_z,
            z_assign: self.z,
            hyperparams: self.hp,
            diagnostics: self.diagnostics,
        }
    }
}

/// Fit a model: initialize from the seed and run `iterations` sweeps.
/// Point estimates come from the final sweep's counts.
pub fn fit(corpus: &Corpus, hp: TldaHyperparams) -> Result<TldaModel> {
    let mut sampler = TldaSampler::new(corpus, hp)?;
    for _ in 0..sampler.hp.iterations {
        sampler.sweep();
    }
    let model = sampler.into_model();
    debug_assert!(model.check_consistency(corpus).is_ok());
    Ok(model)
}

/// Prior-smoothed row-stochastic distributions derived from the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistributions {
    /// U x K: theta, pattern distribution of each user.
    pub theta: Vec<Vec<f64>>,
    /// T x K: psi, pattern distribution of each time token.
    pub psi: Vec<Vec<f64>>,
    /// K x V: phi, venue-category distribution of each pattern.
    pub phi: Vec<Vec<f64>>,
}

fn smooth_rows(counts: &[Vec<u64>], prior: f64) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + row.len() as f64 * prior;
            row.iter().map(|&c| (c as f64 + prior) / denom).collect()
        })
        .collect()
}

pub fn distributions(model: &TldaModel) -> PatternDistributions {
    let hp = &model.hyperparams;
    PatternDistributions {
        theta: smooth_rows(&model.n_uz, hp.alpha),
        psi: smooth_rows(&model.n_tz, hp.gamma),
        phi: smooth_rows(&model.n_zv, hp.beta),
    }
}

/// The user's modal pattern; ties break toward the lowest index.
pub fn assign_user_pattern(dists: &PatternDistributions, user: usize) -> usize {
    let row = &dists.theta[user];
    let mut best = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = k;
        }
    }
    best
}

/// How to cut a pattern's venue ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VenueRanking {
    /// All categories with probability strictly above the threshold.
    Threshold(f64),
    /// The N most probable categories.
    TopN(usize),
}

/// Venue categories of pattern `k`, descending by probability; ties break
/// toward the lower index. Threshold mode may return an empty list.
pub fn top_venues(dists: &PatternDistributions, k: usize, mode: VenueRanking) -> Vec<usize> {
    let row = &dists.phi[k];
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    match mode {
        VenueRanking::Threshold(p) => order.into_iter().filter(|&v| row[v] > p).collect(),
        VenueRanking::TopN(n) => {
            order.truncate(n);
            order
        }
    }
}

/// Time tokens most associated with pattern `k`, ranked by the pattern's
/// share of each token (the psi column), descending. `n` larger than the
/// vocabulary returns every token.
pub fn top_times(dists: &PatternDistributions, k: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dists.psi.len()).collect();
    order.sort_by(|&a, &b| dists.psi[b][k].total_cmp(&dists.psi[a][k]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// Labeled CSV export of one row-stochastic matrix.
pub fn write_matrix_csv<W: Write>(
    w: W,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    matrix: &[Vec<f64>],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![corner.to_string()];
    header.extend_from_slice(col_labels);
    out.write_record(&header)?;
    for (label, row) in row_labels.iter().zip(matrix) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
