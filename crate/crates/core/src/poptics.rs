//! Personalized OPTICS over a single user's check-in locations.
//!
//! The neighbor rank behind each core distance scales with the user's own
//! location count (a fraction `eta` of it), so heavy and light users get
//! comparable density estimates. A reachability threshold is then chosen
//! automatically by minimizing `std(RD*) * N / len(RD*)` over the distinct
//! reach values, and clusters are read off the ordered reachability list.
//! Everything is deterministic for a fixed input order; ties break toward
//! the lower index.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::geo::ProjectedPoint;
use crate::tlda::{assign_user_pattern, PatternDistributions, TldaModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopticsConfig {
    /// Fraction of a user's locations used as the core-distance rank.
    pub eta: f64,
    /// Initial reachability value; must exceed every inter-point distance.
    pub max_dist: f64,
    /// Lower bound for both activity radii, in meters.
    pub radius_floor: f64,
}

impl Default for PopticsConfig {
    fn default() -> Self {
        PopticsConfig {
            eta: 0.1,
            max_dist: f64::INFINITY,
            radius_floor: 100.0,
        }
    }
}

impl PopticsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta.is_nan() || self.eta <= 0.0 || self.eta > 1.0 {
            return Err(Error::config("eta must lie in (0, 1]"));
        }
        if self.max_dist.is_nan() || self.max_dist <= 0.0 {
            return Err(Error::config("max_dist must be positive"));
        }
        if self.radius_floor.is_nan() || self.radius_floor <= 0.0 {
            return Err(Error::config("radius_floor must be positive"));
        }
        Ok(())
    }
}

/// Core distance per location: the distance to its ceil(N * eta)-th nearest
/// other point (rank clamped to N - 1). Duplicate locations are kept, so
/// coincident points yield distance 0. A single point gets 0 by convention.
pub fn core_distances(locations: &[ProjectedPoint], eta: f64) -> Vec<f64> {
    let n = locations.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let rank = ((n as f64 * eta).ceil() as usize).clamp(1, n - 1);
    let mut dists = Vec::with_capacity(n - 1);
    locations
        .iter()
        .enumerate()
        .map(|(i, p)| {
            dists.clear();
            for (j, q) in locations.iter().enumerate() {
                if i != j {
                    dists.push(p.distance(q));
                }
            }
            dists.sort_by(f64::total_cmp);
            dists[rank - 1]
        })
        .collect()
}

/// The ordered reachability structure of one user's locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsOrdering {
    /// Visit order (a permutation of location indices).
    pub order: Vec<usize>,
    /// Reachability distance per ordered position; the first is 0.
    pub reach: Vec<f64>,
    /// Core distance per location index.
    pub core: Vec<f64>,
}

/// Global-seed OPTICS expansion: start at index 0 and repeatedly emit the
/// remaining point with the smallest tentative reachability, relaxing
/// `RD(j) = min(RD(j), max(CD(i), dist(i, j)))` from each emitted point i.
pub fn optics_order(locations: &[ProjectedPoint], core: &[f64], max_dist: f64) -> OpticsOrdering {
    let n = locations.len();
    let mut rd = vec![max_dist; n];
    if n > 0 {
        rd[0] = 0.0;
    }
    let mut remaining = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut reach = Vec::with_capacity(n);
    let mut ind = 0usize;
    for _ in 0..n {
        remaining[ind] = false;
        order.push(ind);
        reach.push(rd[ind]);
        let mut next = usize::MAX;
        for j in 0..n {
            if !remaining[j] {
                continue;
            }
            let cur = core[ind].max(locations[ind].distance(&locations[j]));
            if cur < rd[j] {
                rd[j] = cur;
            }
            if next == usize::MAX || rd[j] < rd[next] {
                next = j;
            }
        }
        if next == usize::MAX {
            break;
        }
        ind = next;
    }
    OpticsOrdering {
        order,
        reach,
        core: core.to_vec(),
    }
}

/// Population standard deviation.
fn pop_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Pick the reachability threshold minimizing `std(RD*) * N / len(RD*)`,
/// where `RD*` is the set of reach values strictly below the candidate.
///
/// Candidates are the distinct finite reach values plus an
/// everything-below-it sentinel (the score is piecewise constant between
/// reach values, so this sweep is exhaustive). Candidates keeping fewer
/// than two values are skipped; if none is valid the sentinel is returned
/// and flagged as a fallback. Returns `(rd_th, score, fallback)`.
pub fn select_threshold(reach: &[f64], n: usize) -> (f64, f64, bool) {
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
        let score = pop_std(&rd_star) * n as f64 / rd_star.len() as f64;
        let better = match best {
            None => true,
            Some((_, s)) => score < s,
        };
        if better {
            best = Some((cand, score));
        }
    }
    match best {
        Some((cand, score)) => (cand, score, false),
        None => (f64::INFINITY, f64::NAN, true),
    }
}

/// Walk the ordered list: reach below the threshold extends the current
/// cluster, reach at or above it closes the cluster. The boundary point
/// itself is not retained (it is the spike separating the clusters).
pub fn extract_clusters(ordering: &OpticsOrdering, rd_th: f64) -> Vec<Vec<usize>> {
    let mut clusters = Vec::new();
    let mut current = Vec::new();
    for (pos, &idx) in ordering.order.iter().enumerate() {
        if ordering.reach[pos] < rd_th {
            current.push(idx);
        } else if !current.is_empty() {
            clusters.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        clusters.push(current);
    }
    clusters
}

/// Full per-user result: ordering, selected threshold, clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityResult {
    pub ordering: OpticsOrdering,
    pub rd_th: f64,
    pub clusters: Vec<Vec<usize>>,
    pub threshold_fallback: bool,
}

pub fn analyze(locations: &[ProjectedPoint], config: &PopticsConfig) -> Result<ReachabilityResult> {
    config.validate()?;
    if locations.is_empty() {
        return Err(Error::data("cannot cluster an empty location list"));
    }
    let core = core_distances(locations, config.eta);
    let ordering = optics_order(locations, &core, config.max_dist);
    let (rd_th, _, fallback) = select_threshold(&ordering.reach, locations.len());
    let clusters = extract_clusters(&ordering, rd_th);
    Ok(ReachabilityResult {
        ordering,
        rd_th,
        clusters,
        threshold_fallback: fallback,
    })
}

/// A user's activity centre and radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserActivityProfile {
    pub user: usize,
    pub pattern: usize,
    pub centre: ProjectedPoint,
    /// Radius of the dominant activity cluster, floored.
    pub radius_overall: f64,
    /// Radius over the user's own-pattern check-ins near the centre, floored.
    pub radius_pattern: f64,
    /// True when no cluster survived and the global centroid was used.
    pub fallback_no_clusters: bool,
}

fn centroid(points: &[ProjectedPoint]) -> ProjectedPoint {
    let n = points.len() as f64;
    ProjectedPoint::new(
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
    )
}

/// Derive the profile from all of the user's locations (whitelisted and
/// side) and the subset belonging to the user's assigned pattern.
///
/// The centre is the centroid of the largest cluster (ties prefer the
/// smaller mean reach, then the earlier cluster); the overall radius is the
/// max distance from the centre to that cluster, and the pattern radius the
/// max distance to pattern locations lying within the overall radius. Both
/// radii are floored so downstream kernels never see a zero width.
pub fn activity_profile(
    user: usize,
    pattern: usize,
    all_locations: &[ProjectedPoint],
    pattern_locations: &[ProjectedPoint],
    config: &PopticsConfig,
) -> Result<UserActivityProfile> {
    let result = analyze(all_locations, config)?;
    let mut pos_of = vec![0usize; all_locations.len()];
    for (pos, &idx) in result.ordering.order.iter().enumerate() {
        pos_of[idx] = pos;
    }
    let mean_reach = |members: &[usize]| -> f64 {
        members
            .iter()
            .map(|&i| result.ordering.reach[pos_of[i]])
            .sum::<f64>()
            / members.len() as f64
    };
    let mut chosen: Option<&Vec<usize>> = None;
    for cluster in &result.clusters {
        chosen = match chosen {
            None => Some(cluster),
            Some(best) => {
                if cluster.len() > best.len()
                    || (cluster.len() == best.len() && mean_reach(cluster) < mean_reach(best))
                {
                    Some(cluster)
                } else {
                    Some(best)
                }
            }
        };
    }
    let (centre, raw_radius, fallback) = match chosen {
        Some(members) => {
            let pts: Vec<ProjectedPoint> = members.iter().map(|&i| all_locations[i]).collect();
            let c = centroid(&pts);
            let r = pts.iter().map(|p| c.distance(p)).fold(0.0, f64::max);
            (c, r, false)
        }
        None => {
            let c = centroid(all_locations);
            let r = all_locations
                .iter()
                .map(|p| c.distance(p))
                .fold(0.0, f64::max);
            (c, r, true)
        }
    };
    let radius_overall = raw_radius.max(config.radius_floor);
    let pattern_raw = pattern_locations
        .iter()
        .map(|p| centre.distance(p))
        .filter(|&d| d <= radius_overall)
        .fold(0.0, f64::max);
    let radius_pattern = pattern_raw.max(config.radius_floor);
    Ok(UserActivityProfile {
        user,
        pattern,
        centre,
        radius_overall,
        radius_pattern,
        fallback_no_clusters: fallback,
    })
}

/// Profiles for every corpus user, using the fitted model's assignments.
///
/// Clustering runs over all of a user's locations; the pattern radius uses
/// the user's whitelisted check-ins whose sampled pattern equals the user's
/// assigned pattern.
pub fn compute_profiles(
    corpus: &Corpus,
    model: &TldaModel,
    dists: &PatternDistributions,
    config: &PopticsConfig,
) -> Result<Vec<UserActivityProfile>> {
    config.validate()?;
    let mut profiles = Vec::with_capacity(corpus.n_users());
    for user in 0..corpus.n_users() {
        let pattern = assign_user_pattern(dists, user);
        let all = corpus.user_locations(user);
        let range = corpus.user_offsets[user]..corpus.user_offsets[user + 1];
        let pattern_locations: Vec<ProjectedPoint> = range
            .clone()
            .filter(|&i| model.z_assign[i] as usize == pattern)
            .map(|i| corpus.events[i].point())
            .collect();
        profiles.push(activity_profile(
            user,
            pattern,
            &all,
            &pattern_locations,
            config,
        )?);
    }
    Ok(profiles)
}

/// CSV export: `user,pattern,mu_x,mu_y,mu_lat,mu_lon,radius,pattern_radius`.
pub fn write_profiles_csv<W: Write>(
    w: W,
    corpus: &Corpus,
    profiles: &[UserActivityProfile],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "user",
        "pattern",
        "mu_x",
        "mu_y",
        "mu_lat",
        "mu_lon",
        "radius",
        "pattern_radius",
    ])?;
    for p in profiles {
        let (lat, lon) = corpus.reference.unproject(p.centre);
        out.write_record([
            corpus.users[p.user].clone(),
            p.pattern.to_string(),
            p.centre.x.to_string(),
            p.centre.y.to_string(),
            lat.to_string(),
            lon.to_string(),
            p.radius_overall.to_string(),
            p.radius_pattern.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Debug export of every user's reachability plot:
/// `user,position,location_index,reach`.
pub fn write_reachability_csv<W: Write>(w: W, rows: &[(String, ReachabilityResult)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user", "position", "location_index", "reach"])?;
    for (user, result) in rows {
        for (pos, (&idx, &reach)) in result
            .ordering
            .order
            .iter()
            .zip(&result.ordering.reach)
            .enumerate()
        {
            out.write_record([
                user.clone(),
                pos.to_string(),
                idx.to_string(),
                reach.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> ProjectedPoint {
        ProjectedPoint::new(x, y)
    }

    fn two_blobs() -> Vec<ProjectedPoint> {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(pt(f64::from(i % 5) * 10.0, f64::from(i / 5) * 10.0));
        }
        for i in 0..10 {
            pts.push(pt(
                5000.0 + f64::from(i % 5) * 10.0,
                f64::from(i / 5) * 10.0,
            ));
        }
        pts
    }

    #[test]
    fn coincident_points_have_zero_core_distance() {
        let pts = vec![pt(3.0, 4.0), pt(3.0, 4.0)];
        assert_eq!(core_distances(&pts, 0.5), vec![0.0, 0.0]);
        assert_eq!(core_distances(&pts, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn collinear_points_rank_one() {
        // x = 0, 1, 3 with k = 1: nearest-other distances are 1, 1, 2.
        let pts = vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(3.0, 0.0)];
        let cds = core_distances(&pts, 0.2); // ceil(3 * 0.2) = 1
        assert_eq!(cds, vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn single_point_core_distance_is_zero() {
        assert_eq!(core_distances(&[pt(1.0, 2.0)], 0.5), vec![0.0]);
    }

    #[test]
    fn core_distances_match_exhaustive_knn_oracle() {
        // 50 deterministic pseudo-random points; oracle finds the k-th
        // nearest by repeated minimum extraction instead of sorting.
        let pts: Vec<ProjectedPoint> = (0..50)
            .map(|i| {
                let a = f64::from((i * 37) % 101);
                let b = f64::from((i * 61 + 13) % 97);
                pt(a * 3.7, b * 2.9)
            })
            .collect();
        for eta in [0.05, 0.1, 0.33, 1.0] {
            let got = core_distances(&pts, eta);
            let rank = ((pts.len() as f64 * eta).ceil() as usize).clamp(1, pts.len() - 1);
            for (i, p) in pts.iter().enumerate() {
                let mut rest: Vec<f64> = pts
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| p.distance(q))
                    .collect();
                let mut kth = 0.0;
                for _ in 0..rank {
                    let (mi, _) = rest
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .unwrap();
                    kth = rest.swap_remove(mi);
                }
                assert!((got[i] - kth).abs() < 1e-9, "eta {eta} point {i}");
            }
        }
    }

    #[test]
    fn two_point_ordering() {
        let pts = vec![pt(0.0, 0.0), pt(3.0, 4.0)];
        let core = core_distances(&pts, 0.5);
        let ord = optics_order(&pts, &core, f64::INFINITY);
        assert_eq!(ord.order, vec![0, 1]);
        assert_eq!(ord.reach[0], 0.0);
        assert_eq!(ord.reach[1], core[0].max(5.0));
    }

    #[test]
    fn two_blobs_show_one_spike() {
        let pts = two_blobs();
        let core = core_distances(&pts, 0.1);
        let ord = optics_order(&pts, &core, f64::INFINITY);
        let mut sorted: Vec<f64> = ord.reach[1..].to_vec();
        sorted.sort_by(f64::total_cmp);
        let spike = sorted[sorted.len() - 1];
        let runner_up = sorted[sorted.len() - 2];
        assert!(spike > 4000.0, "spike {spike}");
        assert!(runner_up < 100.0, "runner-up {runner_up}");
    }

    #[test]
    fn permuting_inputs_preserves_sub_threshold_reach_multiset() {
        // All 720 permutations of a 6-point two-blob set.
        let base = vec![
            pt(0.0, 0.0),
            pt(10.0, 0.0),
            pt(0.0, 10.0),
            pt(1000.0, 0.0),
            pt(1010.0, 0.0),
            pt(1000.0, 10.0),
        ];
        let reference_multiset = |pts: &[ProjectedPoint]| -> Vec<i64> {
            let core = core_distances(pts, 0.34); // rank 2
            let ord = optics_order(pts, &core, f64::INFINITY);
            let mut below: Vec<i64> = ord
                .reach
                .iter()
                .filter(|&&r| r < 500.0)
                .map(|&r| (r * 1e6).round() as i64)
                .collect();
            below.sort_unstable();
            below
        };
        let expected = reference_multiset(&base);
        let mut perm = [0usize, 1, 2, 3, 4, 5];
        permute_all(&mut perm, 0, &mut |p| {
            let pts: Vec<ProjectedPoint> = p.iter().map(|&i| base[i]).collect();
            assert_eq!(reference_multiset(&pts), expected, "perm {p:?}");
        });
    }

    fn permute_all(items: &mut [usize; 6], k: usize, f: &mut impl FnMut(&[usize; 6])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute_all(items, k + 1, f);
            items.swap(k, i);
        }
    }

    #[test]
    fn all_equal_reach_selects_a_threshold_above_them() {
        let reach = vec![7.0, 7.0, 7.0, 7.0];
        let (rd_th, score, fallback) = select_threshold(&reach, 4);
        assert!(rd_th > 7.0);
        assert_eq!(score, 0.0);
        assert!(!fallback);
    }

    #[test]
    fn threshold_falls_between_blob_scales() {
        let pts = two_blobs();
        let result = analyze(&pts, &PopticsConfig::default()).unwrap();
        let intra_max = result
            .ordering
            .reach
            .iter()
            .filter(|&&r| r < 1000.0)
            .fold(0.0f64, |a, &b| a.max(b));
        let spike = result.ordering.reach.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(
            result.rd_th > intra_max,
            "{} vs {}",
            result.rd_th,
            intra_max
        );
        assert!(result.rd_th <= spike);
    }

    #[test]
    fn threshold_matches_exhaustive_score_sweep() {
        let pts = two_blobs();
        let result = analyze(&pts, &PopticsConfig::default()).unwrap();
        let reach = &result.ordering.reach;
        let n = pts.len();
        // Recompute every candidate score directly.
        let mut candidates: Vec<f64> = reach.to_vec();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        candidates.push(f64::INFINITY);
        let mut best: Option<(f64, f64)> = None;
        for &cand in &candidates {
            let rd_star: Vec<f64> = reach.iter().copied().filter(|&r| r < cand).collect();
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
        assert_eq!(result.rd_th, best.unwrap().0);
    }

    #[test]
    fn extraction_all_below_threshold_is_one_cluster() {
        let ord = OpticsOrdering {
            order: vec![0, 1, 2, 3],
            reach: vec![0.0, 1.0, 1.5, 0.5],
            core: vec![0.0; 4],
        };
        let clusters = extract_clusters(&ord, 2.0);
        assert_eq!(clusters, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn extraction_alternating_reach_gives_singletons() {
        let ord = OpticsOrdering {
            order: vec![0, 1, 2, 3, 4],
            reach: vec![0.0, 10.0, 0.5, 10.0, 0.5],
            core: vec![0.0; 5],
        };
        let clusters = extract_clusters(&ord, 1.0);
        assert_eq!(clusters, vec![vec![0], vec![2], vec![4]]);
    }

    #[test]
    fn two_blob_extraction_recovers_both_groups() {
        let pts = two_blobs();
        let result = analyze(&pts, &PopticsConfig::default()).unwrap();
        assert_eq!(result.clusters.len(), 2, "{:?}", result.clusters);
        let mut first = result.clusters[0].clone();
        first.sort_unstable();
        assert_eq!(first, (0..10).collect::<Vec<_>>());
        // The entry point into the second blob carries the spike reach and
        // is dropped by the boundary rule.
        let second = &result.clusters[1];
        assert_eq!(second.len(), 9);
        assert!(second.iter().all(|&i| i >= 10));
    }

    #[test]
    fn clusters_partition_without_duplicates() {
        let pts = two_blobs();
        let result = analyze(&pts, &PopticsConfig::default()).unwrap();
        let mut seen = vec![false; pts.len()];
        for cluster in &result.clusters {
            for &i in cluster {
                assert!(!seen[i], "index {i} appears twice");
                seen[i] = true;
            }
        }
    }

    #[test]
    fn scaling_coordinates_scales_distances_and_keeps_memberships() {
        let pts = two_blobs();
        let scaled: Vec<ProjectedPoint> = pts.iter().map(|p| pt(p.x * 3.0, p.y * 3.0)).collect();
        let a = analyze(&pts, &PopticsConfig::default()).unwrap();
        let b = analyze(&scaled, &PopticsConfig::default()).unwrap();
        assert_eq!(a.ordering.order, b.ordering.order);
        assert_eq!(a.clusters, b.clusters);
        for (ra, rb) in a.ordering.reach.iter().zip(&b.ordering.reach) {
            assert!((ra * 3.0 - rb).abs() < 1e-9 * rb.max(1.0));
        }
    }

    #[test]
    fn profile_of_coincident_points_uses_the_floor() {
        let pts = vec![pt(100.0, 200.0); 5];
        let profile = activity_profile(0, 0, &pts, &pts, &PopticsConfig::default()).unwrap();
        assert_eq!(profile.centre, pt(100.0, 200.0));
        assert_eq!(profile.radius_overall, 100.0);
        assert_eq!(profile.radius_pattern, 100.0);
        assert!(!profile.fallback_no_clusters);
    }

    #[test]
    fn outlier_is_excluded_from_the_centre() {
        let mut pts: Vec<ProjectedPoint> = (0..12)
            .map(|i| pt(f64::from(i % 4) * 20.0, f64::from(i / 4) * 20.0))
            .collect();
        pts.push(pt(50_000.0, 50_000.0));
        let profile = activity_profile(0, 0, &pts, &[], &PopticsConfig::default()).unwrap();
        assert!(profile.centre.x < 100.0 && profile.centre.y < 100.0);
        assert!(profile.radius_overall < 1000.0);
    }

    #[test]
    fn pattern_radius_is_bounded_by_overall_radius() {
        let pts: Vec<ProjectedPoint> = (0..10).map(|i| pt(f64::from(i) * 30.0, 0.0)).collect();
        let profile = activity_profile(0, 2, &pts, &[pts[0]], &PopticsConfig::default()).unwrap();
        assert!(profile.radius_pattern <= profile.radius_overall);
        assert!(profile.radius_pattern >= 100.0);
        assert_eq!(profile.pattern, 2);
    }

    #[test]
    fn centre_lies_in_the_bounding_box_of_clustered_points() {
        let pts = two_blobs();
        let profile = activity_profile(0, 0, &pts, &pts, &PopticsConfig::default()).unwrap();
        assert!(profile.centre.x >= 0.0 && profile.centre.x <= 5040.0);
        assert!(profile.centre.y >= 0.0 && profile.centre.y <= 10.0);
    }
}
