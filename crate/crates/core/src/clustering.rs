//! Vertical classification of forecast windows: k-means with silhouette-based
//! model selection, plus soft-DTW nearest-neighbour voting for assigning new
//! windows to an existing clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Smallest sample for which silhouette-based selection is attempted.
pub const MIN_WINDOWS_FOR_SELECTION: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Zero-based cluster id per window.
    pub labels: Vec<usize>,
    /// Mean silhouette of the selected clustering; absent when k = 1.
    pub silhouette: Option<f64>,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Within-cluster sum of squared distances.
pub fn sse(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().map_or(0, Vec::len);
    for p in points {
        if p.len() != dim {
            return Err(Error::ShapeMismatch { expected: dim, got: p.len() });
        }
    }
    Ok(dim)
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Nearest centroid, keeping `current` unless another is strictly closer.
fn nearest_sticky(p: &[f64], centroids: &[Vec<f64>], current: usize) -> usize {
    let mut best = current;
    let mut best_d = sq_dist(p, &centroids[current]);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut centroids = vec![points[rng.random_range(0..m)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids(points: &[Vec<f64>], labels: &mut [usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    // Empty clusters take the point lying farthest from its own centroid,
    // drawn from clusters that can spare a member.
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let donor = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &sums[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = donor {
            let old = labels[i];
            counts[old] -= 1;
            // shrink the donor cluster's mean by removing the point
            let n = counts[old] as f64;
            for (s, v) in sums[old].iter_mut().zip(&points[i]) {
                *s = (*s * (n + 1.0) - v) / n;
            }
            labels[i] = c;
            counts[c] = 1;
            sums[c] = points[i].clone();
        }
    }
    sums
}

/// Lloyd's algorithm from k-means++ seeds, also returning the objective
/// after every iteration.
pub fn kmeans_traced(points: &[Vec<f64>], k: usize, seed: u64) -> Result<(ClusterModel, Vec<f64>)> {
    let m = points.len();
    if k == 0 || m < k {
        return Err(Error::TooFewWindows { m, k });
    }
    let dim = check_points(points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        centroids = update_centroids(points, &mut labels, k, dim);
        history.push(sse(points, &labels, &centroids));
        let next: Vec<usize> = points.iter().zip(&labels).map(|(p, &l)| nearest_sticky(p, &centroids, l)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok((ClusterModel { k, centroids, labels, silhouette: None }, history))
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_traced(points, k, seed).map(|(model, _)| model)
}

/// Mean silhouette under Euclidean distance.
///
/// Points alone in their cluster score 0, as do points whose cohesion and
/// separation are both zero.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::ShapeMismatch { expected: points.len(), got: labels.len() });
    }
    check_points(points)?;
    // compact arbitrary label ids to 0..k
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::SingleCluster);
    }
    let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    let k = ids.len();
    let mut counts = vec![0usize; k];
    for &l in &dense {
        counts[l] += 1;
    }

    let m = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..m {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..m {
            if i != j {
                sums[dense[j]] += dist(&points[i], &points[j]);
            }
        }
        let own = dense[i];
        if counts[own] == 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / m as f64)
}

/// Picks the k in `2..=min(n_max, m)` whose k-means clustering has the best
/// silhouette (ties go to the smaller k). Samples smaller than
/// [`MIN_WINDOWS_FOR_SELECTION`], or `n_max == 1`, yield one cluster.
pub fn self_cluster(points: &[Vec<f64>], n_max: usize, seed: u64) -> Result<ClusterModel> {
    let m = points.len();
    if m == 0 {
        return Err(Error::TooFewWindows { m, k: 1 });
    }
    if n_max == 0 {
        return Err(Error::InvalidConfig("maximum category count must be at least 1".into()));
    }
    if m < MIN_WINDOWS_FOR_SELECTION || n_max == 1 {
        return kmeans(points, 1, seed);
    }
    let mut best: Option<ClusterModel> = None;
    for k in 2..=n_max.min(m) {
        let mut model = kmeans(points, k, seed.wrapping_add(k as u64))?;
        let score = silhouette_score(points, &model.labels)?;
        model.silhouette = Some(score);
        if best.as_ref().is_none_or(|b| score > b.silhouette.unwrap()) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one candidate k"))
}

/// Soft-DTW discrepancy with squared-difference local cost.
///
/// Uses the smoothed minimum `-gamma * ln(sum exp(-v / gamma))`, shifted by
/// the hard minimum so the exponentials never overflow.
pub fn soft_dtw(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("soft-DTW smoothing must be positive, got {gamma}")));
    }
    let cols = y.len() + 1;
    let mut prev = vec![f64::INFINITY; cols];
    let mut curr = vec![f64::INFINITY; cols];
    prev[0] = 0.0;
    for xi in x {
        curr[0] = f64::INFINITY;
        for j in 1..cols {
            let cost = (xi - y[j - 1]) * (xi - y[j - 1]);
            curr[j] = cost + soft_min(prev[j - 1], prev[j], curr[j - 1], gamma);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[cols - 1])
}

fn soft_min(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    let lo = a.min(b).min(c);
    if lo == f64::INFINITY {
        return lo;
    }
    let s = (-(a - lo) / gamma).exp() + (-(b - lo) / gamma).exp() + (-(c - lo) / gamma).exp();
    lo - gamma * s.ln()
}

/// Majority cluster among the `s` historical windows most similar to
/// `window` (similarity is negated soft-DTW).
///
/// Similarity ties at the cut-off favour earlier history entries; vote ties
/// favour the lowest cluster id.
pub fn vote_cluster<'a, I>(window: &[f64], history: I, s: usize, gamma: f64) -> Result<usize>
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    let mut scored = Vec::new();
    for (values, label) in history {
        scored.push((soft_dtw(window, values, gamma)?, label));
    }
    if scored.is_empty() {
        return Err(Error::EmptySet);
    }
    // stable sort keeps earlier entries first among equal distances
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let take = s.clamp(1, scored.len());
    let k = scored.iter().map(|(_, l)| *l).max().unwrap_or(0) + 1;
    let mut votes = vec![0usize; k];
    for (_, label) in &scored[..take] {
        votes[*label] += 1;
    }
    let mut winner = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[winner] {
            winner = c;
        }
    }
    Ok(winner)
}
