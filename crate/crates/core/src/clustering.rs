//! K-means with seeded restarts, knee-based choice of K and labeling of
//! clusters as RA, RT, LRA or LRT.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::agents::Archetype;
use crate::linalg::Matrix;
use crate::rng::{rng_for, Stream};
use crate::stats::{linear_fit, median};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusteringError {
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { n: usize, k: usize },
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("K range is empty")]
    EmptyRange,
    #[error("points contain a non-finite coordinate")]
    NonFinite,
    #[error("{got} trajectories for {expected} assigned points")]
    Misaligned { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 300,
            restarts: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// K rows, one centroid each.
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
    /// Σ‖x_i − c_assign(i)‖².
    pub distortion: f64,
    pub iterations: usize,
    /// Distortion after each centroid update of the winning run.
    pub trace: Vec<f64>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn distortion(points: &Matrix, centroids: &Matrix, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), centroids.row(c)))
        .sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> usize {
    let mut best = (f64::INFINITY, 0);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

fn update_means(points: &Matrix, assignment: &[usize], centroids: &mut Matrix) -> Vec<usize> {
    let k = centroids.rows();
    let dim = points.cols();
    let mut sums = Matrix::zeros(k, dim);
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        sizes[c] += 1;
        for (s, x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            let n = sizes[c] as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / n;
            }
        }
    }
    sizes
}

/// Move the farthest point of a multi-point cluster into each empty cluster.
fn repair_empty(points: &Matrix, assignment: &mut [usize], centroids: &mut Matrix) {
    loop {
        let sizes = update_means(points, assignment, centroids);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let far = (0..points.rows())
            .filter(|&i| sizes[assignment[i]] > 1)
            .map(|i| (sq_dist(points.row(i), centroids.row(assignment[i])), i))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, i)| i)
            .expect("n >= k leaves a cluster with more than one point");
        assignment[far] = empty;
        centroids.row_mut(empty).copy_from_slice(points.row(far));
    }
}

fn lloyd(points: &Matrix, mut centroids: Matrix, max_iter: usize) -> ClusteringResult {
    let n = points.rows();
    let k = centroids.rows();
    let mut assignment = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 1..=max_iter.max(1) {
        iterations = it;
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let c = nearest(points.row(i), &centroids);
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        repair_empty(points, &mut assignment, &mut centroids);
        trace.push(distortion(points, &centroids, &assignment));
    }
    ClusteringResult {
        k,
        distortion: distortion(points, &centroids, &assignment),
        centroids,
        assignment,
        iterations,
        trace,
    }
}

fn check_points(points: &Matrix, k: usize) -> Result<(), ClusteringError> {
    if k == 0 {
        return Err(ClusteringError::ZeroClusters);
    }
    if k > points.rows() {
        return Err(ClusteringError::TooFewPoints { n: points.rows(), k });
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClusteringError::NonFinite);
    }
    Ok(())
}

/// Lloyd's algorithm from `restarts` seeded initializations (K distinct data
/// points each); the lowest-distortion run wins, earlier runs on ties.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, options: KMeansOptions) -> Result<ClusteringResult, ClusteringError> {
    check_points(points, k)?;
    let n = points.rows();
    let mut best: Option<ClusteringResult> = None;
    for r in 0..options.restarts.max(1) {
        let mut rng = rng_for(seed, Stream::KMeansRestart, r as u64);
        let picks = sample(&mut rng, n, k);
        let init = Matrix::from_fn(k, points.cols(), |c, j| points[(picks.index(c), j)]);
        let run = lloyd(points, init, options.max_iter);
        if best.as_ref().is_none_or(|b| run.distortion < b.distortion) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Index of the curve point farthest from the chord joining its endpoints,
/// with both axes scaled to [0, 1]. Ties go to the earlier point.
pub fn knee_index(curve: &[(usize, f64)]) -> Option<usize> {
    let (first, last) = (curve.first()?, curve.last()?);
    let xs = (last.0 as f64 - first.0 as f64).abs().max(f64::MIN_POSITIVE);
    let ymin = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let ys = (ymax - ymin).max(f64::MIN_POSITIVE);
    let norm = |p: &(usize, f64)| ((p.0 as f64 - first.0 as f64) / xs, (p.1 - ymin) / ys);
    let (x0, y0) = norm(first);
    let (x1, y1) = norm(last);
    let len = libm::hypot(x1 - x0, y1 - y0);
    let mut best = (0usize, 0.0f64);
    if len == 0.0 {
        return Some(0);
    }
    for (i, p) in curve.iter().enumerate() {
        let (x, y) = norm(p);
        let d = ((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)).abs() / len;
        if d > best.1 + 1e-12 {
            best = (i, d);
        }
    }
    Some(best.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub selected: usize,
    /// `(K, distortion)` for every K tried.
    pub curve: Vec<(usize, f64)>,
    pub fits: Vec<ClusteringResult>,
}

impl ElbowResult {
    pub fn selected_fit(&self) -> &ClusteringResult {
        self.fits.iter().find(|f| f.k == self.selected).expect("selected K was fitted")
    }
}

pub fn elbow_select(
    points: &Matrix,
    k_range: RangeInclusive<usize>,
    seed: u64,
    options: KMeansOptions,
) -> Result<ElbowResult, ClusteringError> {
    if k_range.is_empty() {
        return Err(ClusteringError::EmptyRange);
    }
    let fits = k_range
        .map(|k| kmeans(points, k, seed, options))
        .collect::<Result<Vec<_>, _>>()?;
    let curve: Vec<(usize, f64)> = fits.iter().map(|f| (f.k, f.distortion)).collect();
    let selected = curve[knee_index(&curve).expect("range is non-empty")].0;
    Ok(ElbowResult { selected, curve, fits })
}

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeLabeling {
    /// One entry per cluster; all `None` unless K = 4.
    pub labels: Vec<Option<Archetype>>,
    /// Median ρ over every round of every member.
    pub medians: Vec<f64>,
    /// Least-squares slope of the round-wise median ρ, per round.
    pub slopes: Vec<f64>,
}

fn rule_label(median: f64, slope: f64, eps: f64) -> Archetype {
    if slope.abs() > eps {
        if slope > 0.0 {
            Archetype::LRA
        } else {
            Archetype::LRT
        }
    } else if median >= 0.5 {
        Archetype::RA
    } else {
        Archetype::RT
    }
}

fn fitness(label: Archetype, median: f64, slope: f64) -> f64 {
    match label {
        Archetype::LRA => slope,
        Archetype::LRT => -slope,
        Archetype::RA => median - 0.5,
        Archetype::RT => 0.5 - median,
    }
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| p[..i].iter().all(|&q| q != p[i])) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Name clusters by the median level and trend of their members' ρ.
/// Collisions are settled by the bijection that keeps the most rule-given
/// labels, then the highest total fitness.
pub fn label_archetypes(
    result: &ClusteringResult,
    trajectories: &[Vec<f64>],
    slope_threshold: f64,
) -> Result<ArchetypeLabeling, ClusteringError> {
    if trajectories.len() != result.assignment.len() {
        return Err(ClusteringError::Misaligned {
            expected: result.assignment.len(),
            got: trajectories.len(),
        });
    }
    let mut medians = Vec::with_capacity(result.k);
    let mut slopes = Vec::with_capacity(result.k);
    for c in 0..result.k {
        let members: Vec<&Vec<f64>> = trajectories
            .iter()
            .zip(&result.assignment)
            .filter(|(_, &a)| a == c)
            .map(|(t, _)| t)
            .collect();
        let all: Vec<f64> = members.iter().flat_map(|t| t.iter().copied()).collect();
        medians.push(median(&all).unwrap_or(0.0));
        let rounds = members.iter().map(|t| t.len()).min().unwrap_or(0);
        let xs: Vec<f64> = (1..=rounds).map(|r| r as f64).collect();
        let ys: Vec<f64> = (0..rounds)
            .map(|r| median(&members.iter().map(|t| t[r]).collect::<Vec<_>>()).unwrap_or(0.0))
            .collect();
        slopes.push(linear_fit(&xs, &ys).map_or(0.0, |(_, s)| s));
    }
    if result.k != 4 {
        return Ok(ArchetypeLabeling {
            labels: vec![None; result.k],
            medians,
            slopes,
        });
    }
    let wanted: Vec<Archetype> = (0..4).map(|c| rule_label(medians[c], slopes[c], slope_threshold)).collect();
    let mut best: Option<(usize, f64, [usize; 4])> = None;
    for p in permutations4() {
        let kept = (0..4).filter(|&c| Archetype::ALL[p[c]] == wanted[c]).count();
        let score: f64 = (0..4).map(|c| fitness(Archetype::ALL[p[c]], medians[c], slopes[c])).sum();
        let better = match best {
            None => true,
            Some((bk, bs, _)) => kept > bk || (kept == bk && score > bs + 1e-12),
        };
        if better {
            best = Some((kept, score, p));
        }
    }
    let p = best.expect("24 permutations").2;
    Ok(ArchetypeLabeling {
        labels: p.iter().map(|&l| Some(Archetype::ALL[l])).collect(),
        medians,
        slopes,
    })
}

/// Fraction of points whose cluster maps to their true class under the best
/// one-to-one matching of clusters to classes.
pub fn matched_accuracy(assignment: &[usize], truth: &[usize]) -> f64 {
    if assignment.is_empty() || assignment.len() != truth.len() {
        return 0.0;
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let l = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; l]; k];
    for (&a, &t) in assignment.iter().zip(truth) {
        table[a][t] += 1;
    }
    // best[mask] = most points matched using the classes in `mask`.
    let full = 1usize << l;
    let mut best = vec![0usize; full];
    for row in &table {
        let mut next = best.clone();
        for mask in 0..full {
            for (t, &count) in row.iter().enumerate() {
                if mask & (1 << t) == 0 {
                    let m = mask | (1 << t);
                    next[m] = next[m].max(best[mask] + count);
                }
            }
        }
        best = next;
    }
    best.into_iter().max().unwrap_or(0) as f64 / assignment.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GameRng;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn pts(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn two_pairs_on_a_line() {
        let p = pts(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let r = kmeans(&p, 2, 1, KMeansOptions::default()).unwrap();
        let mut c = [r.centroids[(0, 0)], r.centroids[(1, 0)]];
        c.sort_by(f64::total_cmp);
        assert_eq!(c, [0.5, 10.5]);
        assert_eq!(r.distortion, 1.0);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 4.0], &[2.0, 4.0]]);
        let r = kmeans(&p, 1, 0, KMeansOptions::default()).unwrap();
        assert_eq!(r.centroids.row(0), &[1.0, 2.0]);
        assert_eq!(r.distortion, 4.0 * 5.0);
    }

    #[test]
    fn k_distinct_locations_give_zero_distortion() {
        let p = pts(&[&[1.0, 1.0], &[1.0, 1.0], &[5.0, 5.0], &[9.0, 0.0], &[9.0, 0.0], &[5.0, 5.0]]);
        let r = kmeans(&p, 3, 4, KMeansOptions::default()).unwrap();
        assert_eq!(r.distortion, 0.0);
    }

    #[test]
    fn duplicates_force_empty_cluster_repair() {
        let p = pts(&[&[0.0], &[0.0], &[0.0], &[3.0]]);
        for seed in 0..10 {
            let r = kmeans(&p, 3, seed, KMeansOptions { max_iter: 50, restarts: 1 }).unwrap();
            assert!(r.cluster_sizes().iter().all(|&s| s > 0), "{:?}", r.cluster_sizes());
            assert_eq!(r.distortion, 0.0);
        }
    }

    #[test]
    fn parameter_errors() {
        let p = pts(&[&[0.0], &[1.0]]);
        assert_eq!(
            kmeans(&p, 3, 0, KMeansOptions::default()),
            Err(ClusteringError::TooFewPoints { n: 2, k: 3 })
        );
        assert_eq!(kmeans(&p, 0, 0, KMeansOptions::default()), Err(ClusteringError::ZeroClusters));
        let bad = pts(&[&[f64::NAN], &[1.0]]);
        assert_eq!(kmeans(&bad, 1, 0, KMeansOptions::default()), Err(ClusteringError::NonFinite));
    }

    fn random_points(seed: u64, n: usize, dim: usize) -> Matrix {
        let mut rng = GameRng::seed_from_u64(seed);
        Matrix::from_fn(n, dim, |_, _| rng.random::<f64>() * 10.0)
    }

    /// Best distortion over every assignment of n points to exactly k clusters.
    fn exhaustive(points: &Matrix, k: usize) -> f64 {
        let n = points.rows();
        let mut labels = vec![0usize; n];
        let mut best = f64::INFINITY;
        loop {
            // Canonical labelings only: label i never exceeds 1 + max of earlier labels.
            let ok = (0..n).all(|i| labels[i] <= labels[..i].iter().max().map_or(0, |m| m + 1));
            let used = labels.iter().max().map_or(0, |m| m + 1);
            if ok && used == k {
                let mut c = Matrix::zeros(k, points.cols());
                update_means(points, &labels, &mut c);
                best = best.min(distortion(points, &c, &labels));
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
            }
        }
    }

    #[test]
    fn small_instances_reach_exhaustive_optimum() {
        for (seed, n, dim, k) in [(1, 8, 1, 2), (2, 9, 2, 3), (3, 10, 2, 2), (4, 10, 1, 3), (5, 12, 2, 2), (6, 11, 2, 3), (7, 12, 1, 4)] {
            let p = random_points(seed, n, dim);
            let r = kmeans(&p, k, seed, KMeansOptions::default()).unwrap();
            let opt = exhaustive(&p, k);
            assert!((r.distortion - opt).abs() <= 1e-9 * opt.max(1.0), "seed {seed}: {} vs {opt}", r.distortion);
        }
    }

    #[test]
    fn distortion_recomputes_from_fields() {
        let p = random_points(9, 60, 2);
        let r = kmeans(&p, 5, 2, KMeansOptions::default()).unwrap();
        assert!((distortion(&p, &r.centroids, &r.assignment) - r.distortion).abs() < 1e-12);
        assert!(r.assignment.iter().all(|&a| a < 5));
        let again = kmeans(&p, 5, 2, KMeansOptions::default()).unwrap();
        assert_eq!(r, again);
    }

    proptest! {
        #[test]
        fn lloyd_trace_never_increases(seed in 0u64..500, k in 1usize..6) {
            let p = random_points(seed, 40, 2);
            let r = kmeans(&p, k, seed, KMeansOptions { max_iter: 100, restarts: 1 }).unwrap();
            for w in r.trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn knee_examples() {
        let curve: Vec<(usize, f64)> = [100.0, 20.0, 18.0, 17.0, 16.0, 15.5, 15.2, 15.0, 14.9, 14.8]
            .iter()
            .enumerate()
            .map(|(i, d)| (i + 1, *d))
            .collect();
        assert_eq!(curve[knee_index(&curve).unwrap()].0, 2);
        let linear: Vec<(usize, f64)> = (1..=10).map(|k| (k, 100.0 - 7.0 * k as f64)).collect();
        assert_eq!(knee_index(&linear), Some(0));
        assert_eq!(knee_index(&[(3, 1.0)]), Some(0));
        assert_eq!(knee_index(&[]), None);
    }

    #[test]
    fn four_blobs_select_four() {
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)];
        let mut rng = GameRng::seed_from_u64(5);
        let mut rows = Vec::new();
        for (cx, cy) in centers {
            for _ in 0..50 {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                rows.push(vec![cx + 0.5 * dx, cy + 0.5 * dy]);
            }
        }
        let p = Matrix::from_rows(&rows);
        let e = elbow_select(&p, 1..=10, 3, KMeansOptions::default()).unwrap();
        assert_eq!(e.selected, 4);
        assert_eq!(e.curve.len(), 10);
        let truth: Vec<usize> = (0..200).map(|i| i / 50).collect();
        assert_eq!(matched_accuracy(&e.selected_fit().assignment, &truth), 1.0);
    }

    #[test]
    fn matched_accuracy_handles_relabeling_and_extra_clusters() {
        assert_eq!(matched_accuracy(&[2, 2, 0, 0, 1, 1], &[0, 0, 1, 1, 2, 2]), 1.0);
        assert_eq!(matched_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]), 0.75);
        assert_eq!(matched_accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]), 0.5);
    }

    fn labeled(trajs: Vec<Vec<f64>>, assignment: Vec<usize>) -> (ClusteringResult, Vec<Vec<f64>>) {
        let k = assignment.iter().max().unwrap() + 1;
        let r = ClusteringResult {
            k,
            centroids: Matrix::zeros(k, 2),
            assignment,
            distortion: 0.0,
            iterations: 0,
            trace: Vec::new(),
        };
        (r, trajs)
    }

    fn ramp(a: f64, b: f64) -> Vec<f64> {
        (0..32).map(|r| a + (b - a) * r as f64 / 31.0).collect()
    }

    #[test]
    fn labels_follow_median_and_slope() {
        let (r, t) = labeled(
            vec![vec![1.0; 32], vec![1.0; 32], ramp(0.1, 0.9), vec![0.0; 32], ramp(0.9, 0.1)],
            vec![0, 0, 1, 2, 3],
        );
        let l = label_archetypes(&r, &t, DEFAULT_SLOPE_THRESHOLD).unwrap();
        assert_eq!(
            l.labels,
            vec![Some(Archetype::RA), Some(Archetype::LRA), Some(Archetype::RT), Some(Archetype::LRT)]
        );
        assert!((l.slopes[1] - 0.8 / 31.0).abs() < 1e-12);
        assert_eq!(l.medians[0], 1.0);
    }

    #[test]
    fn collisions_resolve_to_a_bijection() {
        // Two flat high clusters: the higher one keeps RA.
        let (r, t) = labeled(vec![vec![0.95; 32], vec![0.7; 32], ramp(0.1, 0.9), ramp(0.9, 0.1)], vec![0, 1, 2, 3]);
        let l = label_archetypes(&r, &t, DEFAULT_SLOPE_THRESHOLD).unwrap();
        assert_eq!(l.labels[0], Some(Archetype::RA));
        assert_eq!(l.labels[1], Some(Archetype::RT));
        let mut all: Vec<_> = l.labels.iter().flatten().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn labels_are_invariant_under_cluster_permutation() {
        let trajs = vec![vec![1.0; 32], ramp(0.1, 0.9), vec![0.0; 32], ramp(0.9, 0.1)];
        let (r, t) = labeled(trajs.clone(), vec![0, 1, 2, 3]);
        let base = label_archetypes(&r, &t, DEFAULT_SLOPE_THRESHOLD).unwrap();
        let (r2, t2) = labeled(trajs, vec![2, 0, 3, 1]);
        let perm = label_archetypes(&r2, &t2, DEFAULT_SLOPE_THRESHOLD).unwrap();
        for (point, (&a, &b)) in r.assignment.iter().zip(&r2.assignment).enumerate() {
            assert_eq!(base.labels[a], perm.labels[b], "point {point}");
        }
    }

    #[test]
    fn wrong_k_is_unlabeled() {
        let (r, t) = labeled(vec![vec![1.0; 32], vec![0.0; 32], ramp(0.1, 0.9)], vec![0, 1, 2]);
        let l = label_archetypes(&r, &t, DEFAULT_SLOPE_THRESHOLD).unwrap();
        assert_eq!(l.labels, vec![None; 3]);
        assert_eq!(l.medians.len(), 3);
    }
}
