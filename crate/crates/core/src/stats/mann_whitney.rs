use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Tie-free samples with `n·m` up to this size use the exact distribution.
pub const EXACT_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTestMethod {
    ExactDp,
    NormalApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// `#{(i,j): x_i > y_j} + ½ #{x_i = y_j}`.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: RankTestMethod,
    pub n: usize,
    pub m: usize,
}

/// Null distribution of U for sample sizes `(n, m)` without ties:
/// `P[U = u]` for `u = 0..=n·m`.
///
/// Built from `P_{i,j}(u) = i/(i+j) · P_{i−1,j}(u − j) + j/(i+j) · P_{i,j−1}(u)`:
/// the largest of the `i + j` values is an x (beating all `j` y's) with
/// probability `i/(i+j)`. Only additions of non-negative terms, so no
/// cancellation.
pub fn exact_u_distribution(n: usize, m: usize) -> Vec<f64> {
    // prev[j] holds the distribution for (i−1, j); cur[j] for (i, j).
    let mut prev: Vec<Vec<f64>> = (0..=m).map(|_| vec![1.0]).collect();
    for i in 1..=n {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        cur.push(vec![1.0]);
        for j in 1..=m {
            let total = (i + j) as f64;
            let (wx, wy) = (i as f64 / total, j as f64 / total);
            let mut dist = vec![0.0; i * j + 1];
            for (u, &p) in prev[j].iter().enumerate() {
                dist[u + j] += wx * p;
            }
            for (u, &p) in cur[j - 1].iter().enumerate() {
                dist[u] += wy * p;
            }
            cur.push(dist);
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

struct Ranked {
    u: f64,
    tie_term: f64,
    has_ties: bool,
}

fn rank_sum(x: &[f64], y: &[f64]) -> Ranked {
    let mut all: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_x = 0.0;
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_x += midrank * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let n = x.len() as f64;
    Ranked {
        u: rank_x - n * (n + 1.0) / 2.0,
        tie_term,
        has_ties,
    }
}

fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z / core::f64::consts::SQRT_2)
}

/// Two-sided Mann–Whitney U test of `x` against `y`.
///
/// Exact when there are no ties and `n·m ≤ 10 000`; otherwise the normal
/// approximation with tie-corrected variance and a ½ continuity correction.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<RankTestResult, StatsError> {
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return Err(StatsError::EmptySample);
    }
    let ranked = rank_sum(x, y);
    let u = ranked.u;
    let nm = (n * m) as f64;

    if !ranked.has_ties && n * m <= EXACT_LIMIT {
        let dist = exact_u_distribution(n, m);
        let k = libm::round(u) as usize;
        let lower: f64 = dist[..=k].iter().sum();
        let upper: f64 = dist[k..].iter().sum();
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(RankTestResult { u, p_two_sided: p, method: RankTestMethod::ExactDp, n, m });
    }

    let big_n = (n + m) as f64;
    let var = nm / 12.0 * ((big_n + 1.0) - ranked.tie_term / (big_n * (big_n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let dev = ((u - nm / 2.0).abs() - 0.5).max(0.0);
        normal_two_sided(dev / libm::sqrt(var)).min(1.0)
    };
    Ok(RankTestResult { u, p_two_sided: p, method: RankTestMethod::NormalApprox, n, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fully_separated_three_by_three() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
        assert_eq!(r.method, RankTestMethod::ExactDp);
    }

    #[test]
    fn interleaved_two_by_two() {
        let r = mann_whitney(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert_eq!(r.u, 1.0);
        assert!((r.p_two_sided - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ties_use_normal_approximation() {
        let r = mann_whitney(&[1.0, 1.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(r.method, RankTestMethod::NormalApprox);
        // x > y pairs: (2,1); tied pairs: two (1,1)
        assert_eq!(r.u, 1.0 + 0.5 * 2.0);
    }

    #[test]
    fn all_tied_gives_p_one() {
        let r = mann_whitney(&[0.5; 16], &[0.5; 16]).unwrap();
        assert_eq!(r.u, 128.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert_eq!(mann_whitney(&[], &[1.0]), Err(StatsError::EmptySample));
    }

    #[test]
    fn distribution_sums_to_one_and_is_symmetric() {
        let d = exact_u_distribution(7, 4);
        assert_eq!(d.len(), 29);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for u in 0..d.len() {
            assert!((d[u] - d[d.len() - 1 - u]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn u_statistics_are_complementary(
            x in proptest::collection::vec(0u8..20, 1..15),
            y in proptest::collection::vec(0u8..20, 1..15),
        ) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let a = mann_whitney(&x, &y).unwrap();
            let b = mann_whitney(&y, &x).unwrap();
            prop_assert!((a.u + b.u - (x.len() * y.len()) as f64).abs() < 1e-9);
            prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
            prop_assert!(a.p_two_sided > 0.0 && a.p_two_sided <= 1.0);
            prop_assert!(a.u >= 0.0 && a.u <= (x.len() * y.len()) as f64);
        }
    }
}
