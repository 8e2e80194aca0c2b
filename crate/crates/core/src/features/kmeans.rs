//! Seeded k-means with k-means++ initialization. Lloyd iterations run until
//! the largest centroid shift drops below 1e-6 or 300 iterations pass; an
//! emptied cluster is re-seeded at the point farthest from its centroid.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{rng_for, TAG_KMEANS};

use super::select::FeatureMatrix;

const MAX_ITERS: usize = 300;
const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    /// One label in [0, k) per spike.
    pub labels: Vec<usize>,
    pub k: usize,
    /// k × d.
    pub centroids: Mat,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance from the nearest chosen centroid.
fn plus_plus_init(points: &Mat, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points.row(rng.gen_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n)
        .map(|i| dist2(points.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centroids.push(points.row(next).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(dist2(points.row(i), centroids.last().unwrap()));
        }
    }
    centroids
}

fn assign(points: &Mat, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..points.rows())
        .map(|i| {
            let p = points.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d = dist2(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn wcss(points: &Mat, centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    (0..points.rows())
        .map(|i| dist2(points.row(i), &centroids[labels[i]]))
        .sum()
}

/// Runs Lloyd iterations from the given initial centroids. Returns the final
/// clustering and the within-cluster-sum-of-squares after each assignment.
pub fn kmeans_from_init(
    points: &Mat,
    mut centroids: Vec<Vec<f64>>,
    k: usize,
) -> (ClusterLabels, Vec<f64>) {
    let d = points.cols();
    let mut labels = assign(points, &centroids);
    let mut objective = vec![wcss(points, &centroids, &labels)];

    for _ in 0..MAX_ITERS {
        // Update step.
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                // Re-seed at the point farthest from its assigned centroid.
                let far = (0..points.rows())
                    .max_by(|&a, &b| {
                        dist2(points.row(a), &centroids[labels[a]])
                            .partial_cmp(&dist2(points.row(b), &centroids[labels[b]]))
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .expect("nonempty point set");
                let new_c = points.row(far).to_vec();
                shift = shift.max(dist2(&new_c, &centroids[j]).sqrt());
                centroids[j] = new_c;
                continue;
            }
            let new_c: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(dist2(&new_c, &centroids[j]).sqrt());
            centroids[j] = new_c;
        }
        labels = assign(points, &centroids);
        objective.push(wcss(points, &centroids, &labels));
        if shift < SHIFT_TOL {
            break;
        }
    }

    let mut cmat = Mat::zeros(k, d);
    for (j, c) in centroids.iter().enumerate() {
        for (col, &v) in c.iter().enumerate() {
            cmat.set(j, col, v);
        }
    }
    (
        ClusterLabels {
            labels,
            k,
            centroids: cmat,
        },
        objective,
    )
}

pub fn kmeans(features: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterLabels> {
    let points = &features.values;
    if k < 1 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if points.rows() < k {
        return Err(Error::invalid(format!(
            "cannot form {k} clusters from {} spikes",
            points.rows()
        )));
    }
    let mut rng = rng_for(seed, TAG_KMEANS);
    let init = plus_plus_init(points, k, &mut rng);
    Ok(kmeans_from_init(points, init, k).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::select::Extractor;
    use crate::rng::rng_for;
    use rand_distr::{Distribution, Normal};

    fn features_from(points: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix {
            values: Mat::from_rows(points).unwrap(),
            selected_indices: vec![0, 1],
            extractor: Extractor::DwtRef,
        }
    }

    fn two_clouds(n_per: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = rng_for(seed, 0xC10);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..(2 * n_per) {
            let c = i % 2;
            let center = if c == 0 { [-1.0, -1.0] } else { [1.0, 1.0] };
            pts.push(vec![
                center[0] + noise.sample(&mut rng),
                center[1] + noise.sample(&mut rng),
            ]);
            truth.push(c);
        }
        (features_from(pts), truth)
    }

    #[test]
    fn separated_clouds_are_recovered_exactly() {
        let (features, truth) = two_clouds(100, 1);
        let out = kmeans(&features, 2, 99).unwrap();
        // Map predicted label -> truth label via the first point, then check
        // every assignment agrees.
        let map0 = truth[out.labels.iter().position(|&l| l == 0).unwrap()];
        for (l, t) in out.labels.iter().zip(&truth) {
            let mapped = if *l == 0 { map0 } else { 1 - map0 };
            assert_eq!(mapped, *t);
        }
    }

    #[test]
    fn k1_centroid_is_the_mean() {
        let features = features_from(vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]]);
        let out = kmeans(&features, 1, 0).unwrap();
        assert!(out.labels.iter().all(|&l| l == 0));
        assert!((out.centroids.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((out.centroids.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_every_point_keeps_the_centroids() {
        let (features, _) = two_clouds(50, 2);
        let mut doubled: Vec<Vec<f64>> = Vec::new();
        for r in 0..features.values.rows() {
            doubled.push(features.values.row(r).to_vec());
            doubled.push(features.values.row(r).to_vec());
        }
        let features2 = features_from(doubled);
        let a = kmeans(&features, 2, 7).unwrap();
        let b = kmeans(&features2, 2, 7).unwrap();
        let mut ca: Vec<Vec<f64>> = (0..2).map(|j| a.centroids.row(j).to_vec()).collect();
        let mut cb: Vec<Vec<f64>> = (0..2).map(|j| b.centroids.row(j).to_vec()).collect();
        ca.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
        cb.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
        for (x, y) in ca.iter().zip(&cb) {
            assert!(dist2(x, y).sqrt() < 1e-9);
        }
    }

    #[test]
    fn objective_never_increases() {
        let (features, _) = two_clouds(100, 3);
        let mut rng = rng_for(5, TAG_KMEANS);
        let init = plus_plus_init(&features.values, 2, &mut rng);
        let (_, objective) = kmeans_from_init(&features.values, init, 2);
        for w in objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn empty_cluster_is_reseeded_at_the_farthest_point() {
        // Both initial centroids sit in one cloud; the far cloud must still
        // end up owning a centroid.
        let (features, _) = two_clouds(20, 4);
        let init = vec![vec![-1.0, -1.0], vec![-50.0, -50.0]];
        let (out, _) = kmeans_from_init(&features.values, init, 2);
        let distinct: std::collections::HashSet<usize> = out.labels.iter().copied().collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn same_seed_same_labels() {
        let (features, _) = two_clouds(60, 6);
        let a = kmeans(&features, 2, 11).unwrap();
        let b = kmeans(&features, 2, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions() {
        let features = features_from(vec![vec![0.0, 0.0]]);
        assert!(kmeans(&features, 0, 0).is_err());
        assert!(kmeans(&features, 2, 0).is_err());
    }
}
