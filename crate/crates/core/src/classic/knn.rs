//! Brute-force k-nearest-neighbors classifier (Euclidean distance).

use crate::error::{Error, Result};

use super::EncodedDesign;

/// Fitted KNN model: it memorizes the training design.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub k: usize,
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
}

/// Store the training set. `k` must be between 1 and the sample count.
pub fn train_knn(design: &EncodedDesign, k: usize) -> Result<KnnModel> {
    if design.x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if k == 0 || k > design.x.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} out of range for {} training samples",
            design.x.len()
        )));
    }
    Ok(KnnModel {
        k,
        x: design.x.clone(),
        y: design.y.clone(),
        n_classes: design.class_names.len(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Predict by majority vote among the k nearest training rows.
///
/// Distance ties are broken by lower training-row index; vote ties by the
/// class of the nearest neighbor belonging to the tied set.
pub fn predict_knn(model: &KnnModel, queries: &[Vec<f64>]) -> Vec<usize> {
    queries.iter().map(|q| predict_one(model, q)).collect()
}

fn predict_one(model: &KnnModel, query: &[f64]) -> usize {
    let mut order: Vec<(f64, usize)> = model
        .x
        .iter()
        .enumerate()
        .map(|(idx, row)| (squared_distance(query, row), idx))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    let neighbors = &order[..model.k];

    let mut votes = vec![0usize; model.n_classes];
    for &(_, idx) in neighbors {
        votes[model.y[idx]] += 1;
    }
    let top = *votes.iter().max().expect("at least one class");
    let tied: Vec<usize> = (0..model.n_classes).filter(|&c| votes[c] == top).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    for &(_, idx) in neighbors {
        if tied.contains(&model.y[idx]) {
            return model.y[idx];
        }
    }
    unreachable!("tied classes all have votes among the neighbors")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(x: Vec<Vec<f64>>, y: Vec<usize>, n_classes: usize) -> EncodedDesign {
        EncodedDesign {
            feature_names: (0..x[0].len()).map(|i| format!("f{i}")).collect(),
            class_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
            x,
            y,
        }
    }

    #[test]
    fn exact_match_with_k_one() {
        let d = design(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![0, 1], 2);
        let model = train_knn(&d, 1).unwrap();
        assert_eq!(predict_knn(&model, &[vec![5.0, 5.0]]), [1]);
    }

    #[test]
    fn distance_tie_prefers_lower_row_index() {
        // Query equidistant from rows 0 (class 1) and 1 (class 0); k = 1
        // must pick row 0.
        let d = design(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![1, 0], 2);
        let model = train_knn(&d, 1).unwrap();
        assert_eq!(predict_knn(&model, &[vec![0.0, 0.0]]), [1]);
    }

    #[test]
    fn vote_tie_falls_back_to_nearest_tied_class() {
        // k = 2: nearest neighbor class 1, second class 0; one vote each.
        let d = design(vec![vec![0.0], vec![1.0], vec![10.0]], vec![1, 0, 0], 2);
        let model = train_knn(&d, 2).unwrap();
        assert_eq!(predict_knn(&model, &[vec![0.1]]), [1]);
    }

    #[test]
    fn empty_training_set_rejected() {
        let d = EncodedDesign {
            feature_names: vec![],
            class_names: vec![],
            x: vec![],
            y: vec![],
        };
        assert!(train_knn(&d, 1).is_err());
    }

    #[test]
    fn k_larger_than_sample_count_rejected() {
        let d = design(vec![vec![0.0]], vec![0], 1);
        assert!(train_knn(&d, 2).is_err());
    }

    /// Exhaustive-search oracle: recompute every distance, sort with the
    /// same tie rules, and tally votes independently.
    pub(crate) fn oracle_predict(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        k: usize,
        query: &[f64],
    ) -> usize {
        let mut scored: Vec<(f64, usize)> = x
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut votes = vec![0usize; n_classes];
        for &(_, i) in &scored[..k] {
            votes[y[i]] += 1;
        }
        let best = *votes.iter().max().unwrap();
        for &(_, i) in &scored[..k] {
            if votes[y[i]] == best {
                return y[i];
            }
        }
        unreachable!()
    }

    #[test]
    fn matches_exhaustive_oracle_on_random_2d_points() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..25 {
            let n = rng.random_range(5..100);
            let n_classes = rng.random_range(2..4);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
                .collect();
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
            let k = rng.random_range(1..=n.min(7));
            let d = design(x.clone(), y.clone(), n_classes);
            let model = train_knn(&d, k).unwrap();
            for _ in 0..20 {
                let q = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                let got = predict_knn(&model, std::slice::from_ref(&q))[0];
                let want = oracle_predict(&x, &y, n_classes, k, &q);
                assert_eq!(got, want, "trial {trial}");
            }
        }
    }
}
