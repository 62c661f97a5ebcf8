//! Acceptance suite: one test per shipping criterion, each printing a
//! `criterion N (...): PASS` line (visible with `--nocapture`).
//!
//! Statistical criteria run on seeded synthetic corpora with planted ground
//! truth, so every run is reproducible.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use checkin_patterns::alignment::align_labels;
use checkin_patterns::coherence::{self, CoherenceConfig};
use checkin_patterns::corpus::{CheckIn, Corpus};
use checkin_patterns::dsi::{
    self, demand_layer, dsr_layer, supply_layer, venue_sigma, DsrGrid, GridSpec, VenueSupplyProfile,
};
use checkin_patterns::geo::{ProjectedPoint, Reference};
use checkin_patterns::ingest::{filter_fans, IngestConfig};
use checkin_patterns::pipeline::{self, RunConfig};
use checkin_patterns::poptics::{self, UserActivityProfile};
use checkin_patterns::synthgen::{generate, SynthSpec};
use checkin_patterns::temporal::HourGranularity;
use checkin_patterns::tlda::{self, TldaHyperparams, TldaSampler, VenueRanking};
use checkin_patterns::validate::{dsr_travel_correlation, travel_distances, CorrelationLevel};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ts(day: u32, hour: u32, minute: u32) -> i64 {
    NaiveDate::from_ymd_opt(2017, 7, day)
        .unwrap()
        .and_hms_opt(hour, minute, 0)
        .unwrap()
        .and_utc()
        .timestamp()
}

fn checkin(user: &str, cat: &str, day: u32, hour: u32, minute: u32) -> CheckIn {
    CheckIn {
        user_id: user.into(),
        venue_id: format!("v_{cat}"),
        category_id: cat.into(),
        lat: 39.9,
        lon: 116.4,
        timestamp: ts(day, hour, minute),
    }
}

fn tiny_corpus(checkins: &[CheckIn]) -> Corpus {
    let mut cfg = IngestConfig::new(Reference::new(39.9, 116.4).unwrap());
    cfg.min_checkins = 1;
    filter_fans(checkins, &cfg).unwrap()
}

fn five_slot_config(out: &checkin_patterns::synthgen::SynthOutput, min: usize) -> IngestConfig {
    let mut cfg = out.ingest_config(min);
    cfg.granularity = HourGranularity::five_slot();
    cfg
}

/// Planted patterns in corpus user order.
fn planted_labels(out: &checkin_patterns::synthgen::SynthOutput, corpus: &Corpus) -> Vec<usize> {
    corpus
        .users
        .iter()
        .map(|id| {
            let idx = out.truth.user_ids.iter().position(|u| u == id).unwrap();
            out.truth.user_patterns[idx]
        })
        .collect()
}

/// Exact stationary distribution over full assignment vectors, by direct
/// enumeration of the collapsed joint (sequential prefix-count products of
/// the per-event factors; the event order is irrelevant by exchangeability).
fn enumerate_exact(corpus: &Corpus, hp: &TldaHyperparams) -> Vec<f64> {
    let n = corpus.n_events();
    let k = hp.k;
    let n_cats = corpus.n_categories();
    let configs = k.pow(n as u32);
    let mut weights = vec![0.0f64; configs];
    let mut total = 0.0;
    for code in 0..configs {
        let mut z = vec![0usize; n];
        let mut c = code;
        for slot in &mut z {
            *slot = c % k;
            c /= k;
        }
        let mut n_uz = vec![vec![0u64; k]; corpus.n_users()];
        let mut n_tz = vec![vec![0u64; k]; corpus.n_time_tokens()];
        let mut n_zv = vec![vec![0u64; n_cats]; k];
        let mut n_z = vec![0u64; k];
        let mut w = 1.0f64;
        for (i, e) in corpus.events.iter().enumerate() {
            let (u, t, v) = (e.user as usize, e.time as usize, e.category as usize);
            let zi = z[i];
            w *= (n_uz[u][zi] as f64 + hp.alpha)
                * (n_tz[t][zi] as f64 + hp.gamma)
                * (n_zv[zi][v] as f64 + hp.beta)
                / (n_z[zi] as f64 + n_cats as f64 * hp.beta);
            n_uz[u][zi] += 1;
            n_tz[t][zi] += 1;
            n_zv[zi][v] += 1;
            n_z[zi] += 1;
        }
        weights[code] = w;
        total += w;
    }
    for w in &mut weights {
        *w /= total;
    }
    weights
}

#[test]
fn c1_collapsed_gibbs_matches_exact_enumeration() {
    let started = Instant::now();
    // U = 2, V = 2, T = 2, N = 6 events, K = 2: 64 assignment vectors.
    let checkins = vec![
        checkin("A", "a", 1, 10, 0),
        checkin("A", "b", 1, 10, 30),
        checkin("A", "a", 1, 20, 0),
        checkin("B", "b", 1, 10, 0),
        checkin("B", "b", 1, 20, 0),
        checkin("B", "a", 1, 20, 30),
    ];
    let corpus = tiny_corpus(&checkins);
    assert_eq!(corpus.n_users(), 2);
    assert_eq!(corpus.n_categories(), 2);
    assert_eq!(corpus.n_time_tokens(), 2);
    assert_eq!(corpus.n_events(), 6);

    let mut hp = TldaHyperparams::new(2).with_seed(12345);
    hp.alpha = 0.7;
    hp.beta = 0.5;
    hp.gamma = 0.9;
    let exact = enumerate_exact(&corpus, &hp);

    let mut sampler = TldaSampler::new(&corpus, hp.clone()).unwrap();
    for _ in 0..200 {
        sampler.sweep();
    }
    // 50,000 post-burn-in samples, thinned by 4 sweeps to cut chain
    // autocorrelation.
    let draws = 50_000usize;
    let lag = 4usize;
    let mut counts = vec![0u64; exact.len()];
    for _ in 0..draws {
        for _ in 0..lag {
            sampler.sweep();
        }
        let mut code = 0usize;
        for (i, &zi) in sampler.assignments().iter().enumerate() {
            code += (zi as usize) * 2usize.pow(i as u32);
        }
        counts[code] += 1;
    }
    let tv: f64 = exact
        .iter()
        .zip(&counts)
        .map(|(&p, &c)| (p - c as f64 / draws as f64).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.02, "total variation distance {tv}");
    assert!(
        started.elapsed().as_secs() < 60,
        "took {:?}",
        started.elapsed()
    );
    println!("criterion 1 (collapsed Gibbs vs exact enumeration, TV = {tv:.4}): PASS");
}

#[test]
fn c2_planted_pattern_recovery() {
    let spec = SynthSpec {
        users: 500,
        checkins_per_user: 40,
        noncultural_per_user: 0,
        ..SynthSpec::default()
    };
    let mut successes = 0;
    let mut accuracies = Vec::new();
    for seed in 0..10u64 {
        let started = Instant::now();
        let out = generate(&SynthSpec {
            seed,
            ..spec.clone()
        })
        .unwrap();
        let corpus = filter_fans(&out.checkins, &out.ingest_config(20)).unwrap();
        let model = tlda::fit(&corpus, TldaHyperparams::new(4).with_seed(seed)).unwrap();
        let dists = tlda::distributions(&model);
        let predicted: Vec<usize> = (0..corpus.n_users())
            .map(|u| tlda::assign_user_pattern(&dists, u))
            .collect();
        let truth = planted_labels(&out, &corpus);
        let (_, accuracy) = align_labels(&predicted, &truth, 4);
        accuracies.push(accuracy);
        if accuracy >= 0.8 {
            successes += 1;
        }
        assert!(
            started.elapsed().as_secs() < 120,
            "seed {seed} took {:?}",
            started.elapsed()
        );
    }
    assert!(
        successes >= 8,
        "only {successes}/10 seeds reached 80%: {accuracies:?}"
    );
    println!(
        "criterion 2 (planted recovery, {successes}/10 seeds >= 80%, accuracies {accuracies:?}): PASS"
    );
}

#[test]
fn c3_model_selection_recovers_planted_k() {
    let spec = SynthSpec {
        users: 500,
        checkins_per_user: 40,
        noncultural_per_user: 0,
        ..SynthSpec::default()
    };
    let candidates: Vec<usize> = (3..=9).collect();
    let mut config = CoherenceConfig::default();
    config.top_n_venues = 5;
    config.top_n_times = 5;
    let mut hits = 0;
    let mut mean_curve = vec![0.0f64; candidates.len()];
    let mut bests = Vec::new();
    for seed in 0..10u64 {
        let out = generate(&SynthSpec {
            seed,
            ..spec.clone()
        })
        .unwrap();
        let corpus = filter_fans(&out.checkins, &five_slot_config(&out, 20)).unwrap();
        let template = TldaHyperparams::new(3).with_seed(seed);
        let result = coherence::select_k(&corpus, &candidates, &template, 1, &config).unwrap();
        if result.best_k == 4 {
            hits += 1;
        }
        bests.push(result.best_k);
        for (i, &(_, m)) in result.means.iter().enumerate() {
            mean_curve[i] += m / 10.0;
        }
    }
    assert!(
        hits >= 8,
        "selected K = 4 in only {hits}/10 seeds: {bests:?}"
    );

    // Figure-4 shape: the averaged TCV curve has a single interior maximum.
    let interior_maxima: Vec<usize> = (1..mean_curve.len() - 1)
        .filter(|&i| mean_curve[i] > mean_curve[i - 1] && mean_curve[i] > mean_curve[i + 1])
        .map(|i| candidates[i])
        .collect();
    let argmax = (0..mean_curve.len())
        .max_by(|&a, &b| mean_curve[a].total_cmp(&mean_curve[b]))
        .unwrap();
    assert!(
        argmax != 0 && argmax != mean_curve.len() - 1,
        "curve maximum sits on the boundary: {mean_curve:?}"
    );
    assert_eq!(
        interior_maxima.len(),
        1,
        "expected a single interior maximum, got {interior_maxima:?} in {mean_curve:?}"
    );
    println!(
        "criterion 3 (select-k = 4 in {hits}/10 seeds, unimodal mean curve {mean_curve:?}): PASS"
    );
}

#[test]
fn c4_temporal_model_beats_plain_lda_coherence() {
    // Users mix patterns heavily while each event keeps its own pattern's
    // time signature: venue bags alone are ambiguous, chronology is not.
    let spec = SynthSpec {
        users: 500,
        checkins_per_user: 40,
        noncultural_per_user: 0,
        mixture_noise: 0.7,
        category_leak: 0.05,
        time_concentration: 0.9,
        seed: 42,
        ..SynthSpec::default()
    };
    let out = generate(&spec).unwrap();
    let corpus = filter_fans(&out.checkins, &five_slot_config(&out, 20)).unwrap();
    let config = CoherenceConfig::default();
    let counts = coherence::build_windows(&corpus, config.window_size).unwrap();
    let chains = 5usize;
    let mut rows = Vec::new();
    for k in 3..=9usize {
        let mut scores = [0.0f64; 2];
        for (slot, temporal) in [(0usize, true), (1usize, false)] {
            let mut sum = 0.0;
            for chain in 0..chains {
                let mut hp = TldaHyperparams::new(k).with_seed(coherence::chain_seed(7, k, chain));
                hp.temporal_enabled = temporal;
                let model = tlda::fit(&corpus, hp).unwrap();
                let dists = tlda::distributions(&model);
                let tops: Vec<Vec<usize>> = (0..k)
                    .map(|z| tlda::top_venues(&dists, z, VenueRanking::TopN(10)))
                    .collect();
                sum += coherence::cv(&tops, &counts, &config).unwrap().score;
            }
            scores[slot] = sum / chains as f64;
        }
        assert!(
            scores[0] > scores[1],
            "K = {k}: temporal CV {:.4} does not exceed plain-LDA CV {:.4}",
            scores[0],
            scores[1]
        );
        rows.push(format!("K={k}: {:.3}>{:.3}", scores[0], scores[1]));
    }
    println!(
        "criterion 4 (temporal CV > LDA CV for all K: {}): PASS",
        rows.join(", ")
    );
}

#[test]
fn c5_venue_similarity_separation() {
    let spec = SynthSpec {
        users: 500,
        checkins_per_user: 40,
        noncultural_per_user: 0,
        seed: 9,
        ..SynthSpec::default()
    };
    let out = generate(&spec).unwrap();
    let corpus = filter_fans(&out.checkins, &out.ingest_config(20)).unwrap();
    let model = tlda::fit(&corpus, TldaHyperparams::new(4).with_seed(9)).unwrap();
    let dists = tlda::distributions(&model);
    let sim = coherence::venue_similarity(&dists);
    let group_of = |name: &str| -> usize {
        let c: usize = name[1..].parse().unwrap();
        c / spec.categories_per_pattern
    };
    let (mut within_ok, mut within_n, mut cross_ok, mut cross_n) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..corpus.categories.len() {
        for j in i + 1..corpus.categories.len() {
            if group_of(&corpus.categories[i]) == group_of(&corpus.categories[j]) {
                within_n += 1;
                if sim[i][j] > 0.9 {
                    within_ok += 1;
                }
            } else {
                cross_n += 1;
                if sim[i][j] < 0.1 {
                    cross_ok += 1;
                }
            }
        }
    }
    let within_frac = within_ok as f64 / within_n as f64;
    let cross_frac = cross_ok as f64 / cross_n as f64;
    assert!(within_frac >= 0.9, "within-pattern: {within_ok}/{within_n}");
    assert!(cross_frac >= 0.9, "cross-pattern: {cross_ok}/{cross_n}");
    println!(
        "criterion 5 (similarity separation, within {within_ok}/{within_n}, cross {cross_ok}/{cross_n}): PASS"
    );
}

// Independent re-implementations for criterion 6, written as literal
// transcriptions with no shared code with the production path.
mod poptics_oracle {
    use checkin_patterns::geo::ProjectedPoint;

    pub fn core_distances(points: &[ProjectedPoint], eta: f64) -> Vec<f64> {
        let n = points.len();
        if n <= 1 {
            return vec![0.0; n];
        }
        let rank = ((n as f64 * eta).ceil() as usize).clamp(1, n - 1);
        (0..n)
            .map(|i| {
                let mut rest: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| points[i].distance(&points[j]))
                    .collect();
                // k-th smallest by repeated minimum extraction.
                let mut kth = 0.0;
                for _ in 0..rank {
                    let (mi, _) = rest
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .unwrap();
                    kth = rest.swap_remove(mi);
                }
                kth
            })
            .collect()
    }

    /// Reachability order recomputed from scratch each round: the tentative
    /// reach of a pending point is the minimum over all visited points of
    /// max(core, distance).
    pub fn ordering(
        points: &[ProjectedPoint],
        core: &[f64],
        max_dist: f64,
    ) -> (Vec<usize>, Vec<f64>) {
        let n = points.len();
        let mut visited: Vec<usize> = Vec::new();
        let mut pending: Vec<usize> = (1..n).collect();
        let mut order = vec![0usize];
        let mut reach = vec![0.0f64];
        visited.push(0);
        while !pending.is_empty() {
            let mut best_j = usize::MAX;
            let mut best_r = f64::INFINITY;
            for &j in &pending {
                let mut rj = max_dist;
                for &i in &visited {
                    let cur = core[i].max(points[i].distance(&points[j]));
                    if cur < rj {
                        rj = cur;
                    }
                }
                if rj < best_r {
                    best_r = rj;
                    best_j = j;
                }
            }
            pending.retain(|&j| j != best_j);
            visited.push(best_j);
            order.push(best_j);
            reach.push(best_r);
        }
        (order, reach)
    }

    pub fn threshold(reach: &[f64], n: usize) -> f64 {
        let mut candidates: Vec<f64> = reach.iter().copied().filter(|r| r.is_finite()).collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        candidates.push(f64::INFINITY);
        let mut best: Option<(f64, f64)> = None;
        for &cand in &candidates {
            let rd_star: Vec<f64> = reach
                .iter()
                .copied()
                .filter(|r| r.is_finite() && *r < cand)
                .collect();
            if rd_star.len() < 2 {
                continue;
            }
            let mean = rd_star.iter().sum::<f64>() / rd_star.len() as f64;
            let var =
                rd_star.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rd_star.len() as f64;
            let score = var.sqrt() * n as f64 / rd_star.len() as f64;
            if best.is_none() || score < best.unwrap().1 {
                best = Some((cand, score));
            }
        }
        best.map_or(f64::INFINITY, |(c, _)| c)
    }

    pub fn clusters(order: &[usize], reach: &[f64], rd_th: f64) -> Vec<Vec<usize>> {
        let mut gl = Vec::new();
        let mut tmp = Vec::new();
        for (pos, &idx) in order.iter().enumerate() {
            if reach[pos] < rd_th {
                tmp.push(idx);
            } else {
                if !tmp.is_empty() {
                    gl.push(tmp.clone());
                }
                tmp.clear();
            }
        }
        if !tmp.is_empty() {
            gl.push(tmp);
        }
        gl
    }
}

#[test]
fn c6_poptics_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let etas = [0.05, 0.1, 0.25, 0.5, 1.0];
    for instance in 0..100 {
        let n = rng.random_range(2..=60usize);
        let mut points: Vec<ProjectedPoint> = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 && rng.random::<f64>() < 0.2 {
                let j = rng.random_range(0..points.len());
                points.push(points[j]);
            } else {
                points.push(ProjectedPoint::new(
                    rng.random::<f64>() * 1000.0,
                    rng.random::<f64>() * 1000.0,
                ));
            }
        }
        let eta = etas[rng.random_range(0..etas.len())];

        let core = poptics::core_distances(&points, eta);
        let oracle_core = poptics_oracle::core_distances(&points, eta);
        for (a, b) in core.iter().zip(&oracle_core) {
            assert!(
                (a - b).abs() <= 1e-9,
                "instance {instance}: core {a} vs {b}"
            );
        }

        let ordering = poptics::optics_order(&points, &core, f64::INFINITY);
        let (oracle_order, oracle_reach) = poptics_oracle::ordering(&points, &core, f64::INFINITY);
        assert_eq!(ordering.order, oracle_order, "instance {instance}: order");
        for (a, b) in ordering.reach.iter().zip(&oracle_reach) {
            assert!(
                (a - b).abs() <= 1e-9,
                "instance {instance}: reach {a} vs {b}"
            );
        }

        let (rd_th, _, _) = poptics::select_threshold(&ordering.reach, n);
        let oracle_th = poptics_oracle::threshold(&ordering.reach, n);
        assert_eq!(rd_th, oracle_th, "instance {instance}: threshold");

        let clusters = poptics::extract_clusters(&ordering, rd_th);
        let oracle_clusters = poptics_oracle::clusters(&ordering.order, &ordering.reach, rd_th);
        assert_eq!(clusters, oracle_clusters, "instance {instance}: clusters");
    }
    println!("criterion 6 (personalized OPTICS vs brute force, 100 instances): PASS");
}

#[test]
fn c7_dsi_layers_match_double_loop() {
    let spec = GridSpec {
        origin: ProjectedPoint::new(0.0, 0.0),
        cell_size: 100.0,
        n_cols: 20,
        n_rows: 20,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let users: Vec<UserActivityProfile> = (0..10)
        .map(|u| UserActivityProfile {
            user: u,
            pattern: 0,
            centre: ProjectedPoint::new(rng.random::<f64>() * 2000.0, rng.random::<f64>() * 2000.0),
            radius_overall: 200.0 + rng.random::<f64>() * 600.0,
            radius_pattern: 150.0 + rng.random::<f64>() * 500.0,
            fallback_no_clusters: false,
        })
        .collect();
    let venues: Vec<VenueSupplyProfile> = (0..5)
        .map(|v| VenueSupplyProfile {
            venue: v,
            pattern: 0,
            location: ProjectedPoint::new(
                rng.random::<f64>() * 2000.0,
                rng.random::<f64>() * 2000.0,
            ),
            sigma: 150.0 + rng.random::<f64>() * 700.0,
            visitors: 1,
            sigma_fallback: false,
        })
        .collect();

    let demand = demand_layer(&users, &spec);
    let supply = supply_layer(&venues, &spec);
    let dsr = dsr_layer(&demand, &supply, 1e-12);

    let gauss = |d: f64, s: f64| -> f64 {
        (1.0 / (2.0 * std::f64::consts::PI * s * s).sqrt()) * (-d * d / (2.0 * s * s)).exp()
    };
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let x = spec.centroid(row, col);
            let mut d_expected = 0.0;
            for u in &users {
                let dist = x.distance(&u.centre);
                if dist <= u.radius_pattern {
                    d_expected += gauss(dist, u.radius_pattern);
                }
            }
            let mut s_expected = 0.0;
            for v in &venues {
                s_expected += gauss(x.distance(&v.location), v.sigma);
            }
            let i = spec.index(row, col);
            let d_rel = (demand[i] - d_expected).abs() / d_expected.abs().max(1e-300);
            let s_rel = (supply[i] - s_expected).abs() / s_expected.abs().max(1e-300);
            assert!(d_rel <= 1e-9, "demand cell ({row},{col}): {d_rel}");
            assert!(s_rel <= 1e-9, "supply cell ({row},{col}): {s_rel}");
            if s_expected > 1e-12 {
                let expected = d_expected / s_expected;
                let got = dsr[i].expect("defined");
                assert!((got - expected).abs() / expected.abs().max(1e-300) <= 1e-9);
            } else {
                assert!(dsr[i].is_none());
            }
        }
    }

    // Truncation boundary: a bump whose radius lands exactly on a centroid
    // three cells away is included there and zero one cell farther.
    let user = UserActivityProfile {
        user: 0,
        pattern: 0,
        centre: spec.centroid(5, 5),
        radius_overall: 300.0,
        radius_pattern: 300.0,
        fallback_no_clusters: false,
    };
    let layer = demand_layer(&[user], &spec);
    let at_boundary = layer[spec.index(5, 8)];
    let beyond = layer[spec.index(5, 9)];
    assert!((at_boundary - gauss(300.0, 300.0)).abs() <= 1e-15);
    assert_eq!(beyond, 0.0);
    println!("criterion 7 (demand/supply/DSR vs double loop, 20x20 grid): PASS");
}

#[test]
fn c8_dsr_travel_correlation() {
    // Synthetic city: venues cluster at the centre, users spread uniformly,
    // each visiting the two nearest venues of their pattern.
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let patterns = 3usize;
    let n_users = 300usize;
    let extent = 8000.0f64;
    let reference = Reference::new(39.9, 116.4).unwrap();
    let centre = ProjectedPoint::new(extent / 2.0, extent / 2.0);

    let mut venue_locs: Vec<(String, usize, ProjectedPoint)> = Vec::new();
    for z in 0..patterns {
        for j in 0..20 {
            let loc = ProjectedPoint::new(
                (centre.x + (rng.random::<f64>() - 0.5) * 1400.0).clamp(0.0, extent),
                (centre.y + (rng.random::<f64>() - 0.5) * 1400.0).clamp(0.0, extent),
            );
            venue_locs.push((format!("v{z}_{j}"), z, loc));
        }
    }
    let mut profiles = Vec::new();
    let mut checkins = Vec::new();
    for u in 0..n_users {
        let z = u % patterns;
        let home = ProjectedPoint::new(rng.random::<f64>() * extent, rng.random::<f64>() * extent);
        profiles.push(UserActivityProfile {
            user: u,
            pattern: z,
            centre: home,
            radius_overall: 600.0,
            radius_pattern: 600.0,
            fallback_no_clusters: false,
        });
        let mut own: Vec<&(String, usize, ProjectedPoint)> =
            venue_locs.iter().filter(|(_, vz, _)| *vz == z).collect();
        own.sort_by(|a, b| home.distance(&a.2).total_cmp(&home.distance(&b.2)));
        for (vid, _, loc) in own.iter().take(2) {
            let (lat, lon) = reference.unproject(*loc);
            checkins.push(CheckIn {
                user_id: format!("u{u:03}"),
                venue_id: vid.clone(),
                category_id: format!("cat{z}"),
                lat,
                lon,
                timestamp: 1_500_000_000 + checkins.len() as i64 * 60,
            });
        }
    }
    let mut icfg = IngestConfig::new(reference);
    icfg.min_checkins = 1;
    let corpus = filter_fans(&checkins, &icfg).unwrap();

    let build_venues = |locs: &[(String, usize, ProjectedPoint)]| -> Vec<VenueSupplyProfile> {
        locs.iter()
            .filter_map(|(vid, z, loc)| {
                let vidx = corpus.venues.iter().position(|v| v == vid)?;
                let mut centres = Vec::new();
                for user in 0..corpus.n_users() {
                    if corpus
                        .user_events(user)
                        .iter()
                        .any(|e| e.venue as usize == vidx)
                    {
                        centres.push(profiles[user].centre);
                    }
                }
                let (sigma, fallback) = venue_sigma(*loc, &centres, 100.0);
                Some(VenueSupplyProfile {
                    venue: vidx,
                    location: *loc,
                    pattern: *z,
                    sigma,
                    visitors: centres.len(),
                    sigma_fallback: fallback,
                })
            })
            .collect()
    };
    let spec = GridSpec {
        origin: ProjectedPoint::new(0.0, 0.0),
        cell_size: 400.0,
        n_cols: 20,
        n_rows: 20,
    };
    let make_grid = |venues: &[VenueSupplyProfile]| -> DsrGrid {
        let mut demand = Vec::new();
        let mut supply = Vec::new();
        let mut dsr = Vec::new();
        for z in 0..patterns {
            let us: Vec<UserActivityProfile> = profiles
                .iter()
                .filter(|p| p.pattern == z)
                .copied()
                .collect();
            let vs: Vec<VenueSupplyProfile> =
                venues.iter().filter(|v| v.pattern == z).copied().collect();
            let d = demand_layer(&us, &spec);
            let s = supply_layer(&vs, &spec);
            let r = dsi::dsr_layer(&d, &s, 1e-12);
            demand.push(d);
            supply.push(s);
            dsr.push(r);
        }
        DsrGrid {
            spec,
            patterns,
            demand,
            supply,
            dsr,
        }
    };

    let central = build_venues(&venue_locs);
    let grid = make_grid(&central);
    let (records, _) = travel_distances(&corpus, &profiles, &central);
    let mut central_rs = Vec::new();
    for z in 0..patterns {
        let res =
            dsr_travel_correlation(&records, &grid, &profiles, z, CorrelationLevel::Cell).unwrap();
        let r = res.r.expect("defined");
        assert!(r > 0.5, "pattern {z}: central r = {r}");
        central_rs.push(r);
    }

    // Null: relocate venues uniformly over a padded region (so boundary
    // attenuation cannot recreate a radial supply gradient) and recompute
    // supply and DSR; travel stays from the central city, severing the
    // spatial link.
    let pad = 6000.0;
    let shuffled: Vec<(String, usize, ProjectedPoint)> = venue_locs
        .iter()
        .map(|(vid, z, _)| {
            (
                vid.clone(),
                *z,
                ProjectedPoint::new(
                    -pad + rng.random::<f64>() * (extent + 2.0 * pad),
                    -pad + rng.random::<f64>() * (extent + 2.0 * pad),
                ),
            )
        })
        .collect();
    let null_grid = make_grid(&build_venues(&shuffled));
    let mut null_rs = Vec::new();
    for z in 0..patterns {
        let res =
            dsr_travel_correlation(&records, &null_grid, &profiles, z, CorrelationLevel::Cell)
                .unwrap();
        let r = res.r.expect("defined");
        assert!(r.abs() < 0.2, "pattern {z}: null |r| = {}", r.abs());
        null_rs.push(r);
    }
    println!(
        "criterion 8 (DSR-travel correlation, central {central_rs:?}, null {null_rs:?}): PASS"
    );
}

fn hash_run_dir(dir: &Path) -> BTreeMap<String, u64> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, u64>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
                continue;
            }
            let rel = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            // Stage statuses and the manifest carry wall-clock timings.
            if rel.starts_with("stages/") || rel == "run_manifest.json" || rel == ".lock" {
                continue;
            }
            out.insert(rel, pipeline::fnv64(&std::fs::read(&path).unwrap()));
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn c9_determinism_byte_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let make_cfg = |dir: &Path| -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.out_dir = dir.to_path_buf();
        cfg.seed = 77;
        cfg.k = 3;
        cfg.min_checkins = 5;
        cfg.iterations = 30;
        cfg.k_candidates = vec![2, 3];
        cfg.coherence.window_size = 4;
        cfg.coherence.top_n_venues = 3;
        cfg.coherence.top_n_times = 3;
        cfg.export_reachability = true;
        cfg.synth = SynthSpec {
            k_true: 3,
            users: 30,
            categories_per_pattern: 2,
            venues_per_category: 2,
            checkins_per_user: 15,
            noncultural_per_user: 10,
            extent_m: 5_000.0,
            ..SynthSpec::default()
        };
        cfg
    };
    let run_all = |cfg: &mut RunConfig| {
        pipeline::run_synth(cfg).unwrap();
        cfg.input = Some(cfg.out_dir.join("synth/checkins.csv"));
        cfg.categories = Some((0..6).map(|c| format!("c{c:02}")).collect());
        pipeline::run_ingest(cfg).unwrap();
        pipeline::run_select_k(cfg).unwrap();
        pipeline::run_fit(cfg).unwrap();
        pipeline::run_profiles(cfg).unwrap();
        pipeline::run_dsi(cfg).unwrap();
        pipeline::run_validate(cfg).unwrap();
        pipeline::run_report(cfg).unwrap();
    };

    let mut cfg_a = make_cfg(&tmp.path().join("a"));
    let mut cfg_b = make_cfg(&tmp.path().join("b"));
    run_all(&mut cfg_a);
    run_all(&mut cfg_b);

    let hashes_a = hash_run_dir(&cfg_a.out_dir);
    let hashes_b = hash_run_dir(&cfg_b.out_dir);
    assert!(!hashes_a.is_empty());
    assert_eq!(hashes_a, hashes_b, "parallel runs differ");

    // Rerunning every stage in place rewrites identical bytes.
    run_all(&mut cfg_a);
    let hashes_rerun = hash_run_dir(&cfg_a.out_dir);
    assert_eq!(hashes_a, hashes_rerun, "in-place rerun changed artifacts");

    // The manifests agree on every artifact hash (timings aside).
    let manifest = |dir: &Path| -> pipeline::RunManifest {
        serde_json::from_reader(std::fs::File::open(dir.join("run_manifest.json")).unwrap())
            .unwrap()
    };
    let ma = manifest(&cfg_a.out_dir);
    let mb = manifest(&cfg_b.out_dir);
    let strip = |m: &pipeline::RunManifest| -> Vec<(String, u64, String)> {
        m.artifacts
            .iter()
            .map(|a| (a.path.clone(), a.bytes, a.fnv64.clone()))
            .collect()
    };
    assert_eq!(strip(&ma), strip(&mb));
    println!(
        "criterion 9 (byte-identical artifacts across {} files, two runs + in-place rerun): PASS",
        hashes_a.len()
    );
}

mod property_suite {
    use super::*;
    use proptest::prelude::*;

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        (
            2usize..5,
            2usize..5,
            proptest::collection::vec((0u8..28, 0u8..24, 0u8..4), 6..24),
        )
            .prop_map(|(n_users, n_cats, raw)| {
                let checkins: Vec<CheckIn> = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &(day, hour, cat))| {
                        checkin(
                            &format!("u{}", i % n_users),
                            &format!("c{}", cat as usize % n_cats),
                            u32::from(day) + 1,
                            u32::from(hour),
                            (i % 60) as u32,
                        )
                    })
                    .collect();
                tiny_corpus(&checkins)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        // Row-stochasticity and count conservation of fitted models.
        #[test]
        fn fitted_models_conserve_counts_and_normalize(
            corpus in arb_corpus(),
            k in 2usize..4,
            seed in any::<u64>(),
        ) {
            prop_assume!(corpus.n_events() >= k);
            let mut hp = TldaHyperparams::new(k).with_seed(seed);
            hp.iterations = 3;
            let model = tlda::fit(&corpus, hp).unwrap();
            model.check_consistency(&corpus).unwrap();
            let dists = tlda::distributions(&model);
            for matrix in [&dists.theta, &dists.psi, &dists.phi] {
                for row in matrix.iter() {
                    let sum: f64 = row.iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                    prop_assert!(row.iter().all(|&p| p > 0.0));
                }
            }
        }

        // NPMI stays in [-1, 1] and is symmetric in its arguments.
        #[test]
        fn npmi_range_and_symmetry(
            total in 1u64..1000,
            occ_a in 0u64..1000,
            occ_b in 0u64..1000,
            joint_frac in 0.0f64..1.0,
            eps_exp in -15.0f64..-1.0,
            tau in 1.0f64..3.0,
        ) {
            let occ_a = occ_a.min(total);
            let occ_b = occ_b.min(total);
            let joint = ((occ_a.min(occ_b) as f64) * joint_frac).floor();
            let t = total as f64;
            let eps = 10f64.powf(eps_exp);
            let score = coherence::npmi_score(joint / t, occ_a as f64 / t, occ_b as f64 / t, eps, tau);
            prop_assert!((-1.0..=1.0).contains(&score), "score {score}");
            let swapped = coherence::npmi_score(joint / t, occ_b as f64 / t, occ_a as f64 / t, eps, tau);
            prop_assert_eq!(score, swapped);
        }

        // Coherence scores are means of cosines and stay in [-1, 1]; the
        // similarity matrix has unit diagonal and bounded symmetric entries.
        #[test]
        fn coherence_and_similarity_ranges(
            corpus in arb_corpus(),
            window in 2usize..5,
            seed in any::<u64>(),
        ) {
            let counts = coherence::build_windows(&corpus, window).unwrap();
            let mut hp = TldaHyperparams::new(2).with_seed(seed);
            hp.iterations = 2;
            prop_assume!(corpus.n_events() >= 2);
            let model = tlda::fit(&corpus, hp).unwrap();
            let dists = tlda::distributions(&model);
            let config = CoherenceConfig {
                top_n_venues: 2,
                top_n_times: 2,
                window_size: window,
                ..CoherenceConfig::default()
            };
            let tops = coherence::model_top_tokens(&dists, &config);
            let report = coherence::tcv(&tops, &counts, &config).unwrap();
            prop_assert!((-1.0..=1.0).contains(&report.score));
            let venue_tops: Vec<Vec<usize>> = tops.iter().map(|t| t.venues.clone()).collect();
            let cv_report = coherence::cv(&venue_tops, &counts, &config).unwrap();
            prop_assert!((-1.0..=1.0).contains(&cv_report.score));
            let sim = coherence::venue_similarity(&dists);
            for (i, row) in sim.iter().enumerate() {
                prop_assert_eq!(row[i], 1.0);
                for (j, &v) in row.iter().enumerate() {
                    prop_assert!((-1.0..=1.0).contains(&v));
                    prop_assert_eq!(v, sim[j][i]);
                }
            }
        }

        // Cluster extraction yields a duplicate-free partition of exactly
        // the sub-threshold points.
        #[test]
        fn extraction_partitions_subthreshold_points(
            reach_raw in proptest::collection::vec(0.0f64..10.0, 1..40),
            rd_th in 0.5f64..9.5,
        ) {
            let n = reach_raw.len();
            let ordering = poptics::OpticsOrdering {
                order: (0..n).collect(),
                reach: reach_raw.clone(),
                core: vec![0.0; n],
            };
            let clusters = poptics::extract_clusters(&ordering, rd_th);
            let mut seen = vec![false; n];
            for cluster in &clusters {
                prop_assert!(!cluster.is_empty());
                for &i in cluster {
                    prop_assert!(!seen[i], "index {} twice", i);
                    seen[i] = true;
                    prop_assert!(reach_raw[i] < rd_th);
                }
            }
            // Every sub-threshold point is clustered.
            for (i, &r) in reach_raw.iter().enumerate() {
                if r < rd_th {
                    prop_assert!(seen[i]);
                }
            }
        }

        // Integer translations leave demand and supply layers bit-identical.
        #[test]
        fn layers_are_translation_invariant(
            coords in proptest::collection::vec((-5_000i32..5_000, -5_000i32..5_000), 1..4),
            radii in proptest::collection::vec(100u32..2_000, 1..4),
            shift in (-100_000i32..100_000, -100_000i32..100_000),
        ) {
            let n = coords.len().min(radii.len());
            let spec = GridSpec {
                origin: ProjectedPoint::new(-6_000.0, -6_000.0),
                cell_size: 3_000.0,
                n_cols: 4,
                n_rows: 4,
            };
            let users: Vec<UserActivityProfile> = (0..n)
                .map(|i| UserActivityProfile {
                    user: i,
                    pattern: 0,
                    centre: ProjectedPoint::new(f64::from(coords[i].0), f64::from(coords[i].1)),
                    radius_overall: f64::from(radii[i]),
                    radius_pattern: f64::from(radii[i]),
                    fallback_no_clusters: false,
                })
                .collect();
            let venues: Vec<VenueSupplyProfile> = (0..n)
                .map(|i| VenueSupplyProfile {
                    venue: i,
                    pattern: 0,
                    location: ProjectedPoint::new(f64::from(coords[i].1), f64::from(coords[i].0)),
                    sigma: f64::from(radii[i]),
                    visitors: 1,
                    sigma_fallback: false,
                })
                .collect();
            let (dx, dy) = (f64::from(shift.0), f64::from(shift.1));
            let moved_spec = GridSpec {
                origin: ProjectedPoint::new(spec.origin.x + dx, spec.origin.y + dy),
                ..spec
            };
            let moved_users: Vec<UserActivityProfile> = users
                .iter()
                .map(|p| {
                    let mut q = *p;
                    q.centre = ProjectedPoint::new(p.centre.x + dx, p.centre.y + dy);
                    q
                })
                .collect();
            let moved_venues: Vec<VenueSupplyProfile> = venues
                .iter()
                .map(|v| {
                    let mut q = *v;
                    q.location = ProjectedPoint::new(v.location.x + dx, v.location.y + dy);
                    q
                })
                .collect();
            prop_assert_eq!(demand_layer(&users, &spec), demand_layer(&moved_users, &moved_spec));
            prop_assert_eq!(supply_layer(&venues, &spec), supply_layer(&moved_venues, &moved_spec));
        }

        // DSR is linear in demand, and layers ignore input order.
        #[test]
        fn dsr_linearity_and_permutation_invariance(
            pairs in proptest::collection::vec((1e-6f64..10.0, 0.0f64..10.0), 1..30),
            scale_pow in -3i32..4,
        ) {
            let demand: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let supply: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let base = dsr_layer(&demand, &supply, 1e-12);
            // Powers of two scale exactly.
            let c = 2.0f64.powi(scale_pow);
            let scaled_demand: Vec<f64> = demand.iter().map(|d| d * c).collect();
            let scaled = dsr_layer(&scaled_demand, &supply, 1e-12);
            for (a, b) in base.iter().zip(&scaled) {
                match (a, b) {
                    (Some(x), Some(y)) => prop_assert_eq!(x * c, *y),
                    (None, None) => {}
                    other => prop_assert!(false, "defined-ness changed: {:?}", other),
                }
            }

            let spec = GridSpec {
                origin: ProjectedPoint::new(0.0, 0.0),
                cell_size: 500.0,
                n_cols: 3,
                n_rows: 3,
            };
            let users: Vec<UserActivityProfile> = pairs
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| UserActivityProfile {
                    user: i,
                    pattern: 0,
                    centre: ProjectedPoint::new(a * 120.0, b * 120.0),
                    radius_overall: 300.0 + a * 10.0,
                    radius_pattern: 300.0 + a * 10.0,
                    fallback_no_clusters: false,
                })
                .collect();
            let mut reversed = users.clone();
            reversed.reverse();
            prop_assert_eq!(demand_layer(&users, &spec), demand_layer(&reversed, &spec));
        }
    }
}
