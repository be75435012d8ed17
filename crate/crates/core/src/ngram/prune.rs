//! Variance-based feature pruning.
//!
//! The keep threshold is a percentile (linear interpolation between order
//! statistics) of the per-feature population variances; only columns with
//! variance strictly above the threshold survive.

use crate::error::{Error, Result};

use super::FeatureDataset;

/// Pruning parameters: a percentile in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSpec {
    pub percentile: f64,
}

impl PruneSpec {
    pub fn new(percentile: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&percentile) || percentile.is_nan() {
            return Err(Error::InvalidInput(format!(
                "percentile {percentile} outside [0, 100]"
            )));
        }
        Ok(PruneSpec { percentile })
    }
}

/// Linear-interpolated percentile of a sample: rank `p/100 * (len-1)`
/// interpolated between the surrounding order statistics.
pub fn percentile_linear(values: &[f64], percentile: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN values"));
    let rank = percentile / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
    }
}

/// Population variance of one feature column.
fn column_variance(dataset: &FeatureDataset, column: usize) -> f64 {
    let n = dataset.rows.len() as f64;
    let mean: f64 = dataset.rows.iter().map(|r| r.features[column]).sum::<f64>() / n;
    dataset
        .rows
        .iter()
        .map(|r| {
            let d = r.features[column] - mean;
            d * d
        })
        .sum::<f64>()
        / n
}

/// Drop feature columns whose population variance is at or below the
/// percentile threshold. Label columns and row count are unchanged.
/// Returns the pruned dataset and the kept column names.
pub fn variance_prune(
    dataset: &FeatureDataset,
    spec: PruneSpec,
) -> Result<(FeatureDataset, Vec<String>)> {
    PruneSpec::new(spec.percentile)?;
    if dataset.feature_names.is_empty() {
        return Err(Error::InvalidInput(
            "dataset has no feature columns to prune".into(),
        ));
    }
    if dataset.rows.is_empty() {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }

    let variances: Vec<f64> = (0..dataset.feature_names.len())
        .map(|c| column_variance(dataset, c))
        .collect();
    let threshold = percentile_linear(&variances, spec.percentile);
    let kept: Vec<usize> = (0..variances.len())
        .filter(|&c| variances[c] > threshold)
        .collect();

    let feature_names: Vec<String> = kept
        .iter()
        .map(|&c| dataset.feature_names[c].clone())
        .collect();
    let rows = dataset
        .rows
        .iter()
        .map(|row| super::DatasetRow {
            labels: row.labels.clone(),
            features: kept.iter().map(|&c| row.features[c]).collect(),
        })
        .collect();

    Ok((
        FeatureDataset {
            feature_names: feature_names.clone(),
            rows,
        },
        feature_names,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{DatasetRow, SampleLabels};
    use proptest::prelude::*;

    fn dataset_from_columns(columns: &[Vec<f64>]) -> FeatureDataset {
        let n_rows = columns[0].len();
        let rows = (0..n_rows)
            .map(|r| DatasetRow {
                labels: SampleLabels {
                    group: "g".into(),
                    name: "n".into(),
                    malware_type: "t".into(),
                    file_name: format!("f{r}"),
                },
                features: columns.iter().map(|c| c[r]).collect(),
            })
            .collect();
        FeatureDataset {
            feature_names: (0..columns.len()).map(|c| format!("c{c}")).collect(),
            rows,
        }
    }

    #[test]
    fn percentile_interpolates() {
        let values = [2.0, 4.0, 6.0, 8.0];
        assert_eq!(percentile_linear(&values, 0.0), 2.0);
        assert_eq!(percentile_linear(&values, 100.0), 8.0);
        assert_eq!(percentile_linear(&values, 50.0), 5.0);
        assert_eq!(percentile_linear(&values, 25.0), 3.5);
    }

    #[test]
    fn percentile_zero_drops_only_minimum_variance() {
        // Columns with distinct positive variances.
        let columns = vec![
            vec![0.0, 1.0, 0.0, 1.0],  // var 0.25
            vec![0.0, 2.0, 0.0, 2.0],  // var 1.0
            vec![0.0, 3.0, 0.0, 3.0],  // var 2.25
        ];
        let dataset = dataset_from_columns(&columns);
        let (_, kept) = variance_prune(&dataset, PruneSpec { percentile: 0.0 }).unwrap();
        assert_eq!(kept, ["c1", "c2"]);
    }

    #[test]
    fn constant_column_dropped_at_any_positive_threshold() {
        let columns = vec![vec![5.0; 4], vec![0.0, 1.0, 2.0, 3.0]];
        let dataset = dataset_from_columns(&columns);
        let (pruned, kept) = variance_prune(&dataset, PruneSpec { percentile: 50.0 }).unwrap();
        assert_eq!(kept, ["c1"]);
        assert_eq!(pruned.rows.len(), 4);
    }

    #[test]
    fn out_of_range_percentile_rejected() {
        let dataset = dataset_from_columns(&[vec![0.0, 1.0]]);
        assert!(variance_prune(&dataset, PruneSpec { percentile: -1.0 }).is_err());
        assert!(variance_prune(&dataset, PruneSpec { percentile: 100.1 }).is_err());
    }

    fn oracle_kept(columns: &[Vec<f64>], percentile: f64) -> Vec<usize> {
        // Independent route: sort variances, pick the interpolated threshold,
        // then filter by strict comparison.
        let variances: Vec<f64> = columns
            .iter()
            .map(|col| {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
            })
            .collect();
        let mut sorted = variances.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = percentile / 100.0 * (sorted.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let threshold = if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
        };
        (0..columns.len()).filter(|&c| variances[c] > threshold).collect()
    }

    #[test]
    fn random_matrix_matches_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let columns: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..50).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let dataset = dataset_from_columns(&columns);
        for percentile in [0.0, 10.0, 50.0, 80.0, 100.0] {
            let (_, kept) = variance_prune(&dataset, PruneSpec { percentile }).unwrap();
            let expected: Vec<String> = oracle_kept(&columns, percentile)
                .into_iter()
                .map(|c| format!("c{c}"))
                .collect();
            assert_eq!(kept, expected, "percentile {percentile}");
        }
    }

    proptest! {
        #[test]
        fn pruning_is_monotone_in_percentile(
            columns in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 6),
                2..12,
            ),
            p1 in 0.0f64..100.0,
            p2 in 0.0f64..100.0,
        ) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let dataset = dataset_from_columns(&columns);
            let (_, kept_lo) = variance_prune(&dataset, PruneSpec { percentile: lo }).unwrap();
            let (_, kept_hi) = variance_prune(&dataset, PruneSpec { percentile: hi }).unwrap();
            let lo_set: std::collections::HashSet<_> = kept_lo.iter().collect();
            prop_assert!(kept_hi.iter().all(|name| lo_set.contains(name)));
        }
    }
}
