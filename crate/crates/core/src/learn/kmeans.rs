use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, squared_distance, LearnError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel<T = f64> {
    pub centroids: Vec<Vec<T>>,
    pub seed: u64,
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroid after the last assignment.
    pub inertia: T,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<T>,
}

/// Index of the closest centroid and its squared distance; ties go to the lowest index.
pub fn nearest_centroid<T: Real>(point: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_seeding<T: Real>(points: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let first = rng.gen_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<T> = points.iter().map(|p| squared_distance(p, &points[first])).collect();
    while centroids.len() < k {
        let weights: Vec<f64> = d2.iter().map(|d| d.to_f64_lossy()).collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.gen_range(0..points.len()),
        };
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iter` updates have run. An emptied cluster is moved onto the
/// point currently farthest from its centroid.
pub fn kmeans<T: Real>(points: &[Vec<T>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansModel<T>, LearnError> {
    if k == 0 {
        return Err(LearnError::InvalidParameter("k must be positive".into()));
    }
    if points.len() < k {
        return Err(LearnError::TooFewSamples { needed: k, found: points.len() });
    }
    let dim = check_rows(points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeding(points, k, &mut rng);

    let assign = |centroids: &[Vec<T>]| -> (Vec<usize>, Vec<T>) {
        points.par_iter().map(|p| nearest_centroid(p, centroids)).unzip()
    };

    let (mut labels, mut dists) = assign(&centroids);
    let mut history = vec![dists.iter().copied().sum::<T>()];
    let mut iterations = 0;
    while iterations < max_iter {
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(p) {
                *s = *s + v;
            }
        }
        for (c, (sum, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if n > 0 {
                let inv = T::one() / T::from_usize_lossy(n);
                *c = sum.iter().map(|&s| s * inv).collect();
            }
        }
        for empty in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..points.len())
                .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a)))
                .expect("nonempty points");
            centroids[empty] = points[far].clone();
            dists[far] = T::zero();
        }
        iterations += 1;

        let (new_labels, new_dists) = assign(&centroids);
        let changed = new_labels != labels;
        labels = new_labels;
        dists = new_dists;
        history.push(dists.iter().copied().sum::<T>());
        if !changed {
            break;
        }
    }

    Ok(KMeansModel {
        centroids,
        seed,
        iterations,
        inertia: *history.last().expect("nonempty history"),
        inertia_history: history,
    })
}
