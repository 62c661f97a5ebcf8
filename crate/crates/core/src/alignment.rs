//! Optimal label alignment between a clustering and a reference labeling.
//!
//! Latent-pattern labels are arbitrary up to permutation, so recovery is
//! measured after finding the one-to-one label mapping that maximizes
//! agreement (a minimum-cost assignment on the negated confusion matrix).

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// algorithm with potentials, O(n^3)). Returns the column chosen for each
/// row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(
        cost.iter().all(|row| row.len() == n),
        "cost matrix must be square"
    );
    if n == 0 {
        return Vec::new();
    }
    // 1-based with column 0 as the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Map predicted labels onto reference labels so that agreement is maximal.
/// Returns the per-predicted-label mapping and the aligned accuracy.
pub fn align_labels(predicted: &[usize], reference: &[usize], k: usize) -> (Vec<usize>, f64) {
    assert_eq!(predicted.len(), reference.len());
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in predicted.iter().zip(reference) {
        confusion[p][t] += 1;
    }
    let peak = confusion
        .iter()
        .flat_map(|row| row.iter())
        .copied()
        .max()
        .unwrap_or(0) as f64;
    let cost: Vec<Vec<f64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&c| peak - c as f64).collect())
        .collect();
    let mapping = min_cost_assignment(&cost);
    let matched: u64 = mapping
        .iter()
        .enumerate()
        .map(|(p, &t)| confusion[p][t])
        .sum();
    let accuracy = if predicted.is_empty() {
        0.0
    } else {
        matched as f64 / predicted.len() as f64
    };
    (mapping, accuracy)
}
