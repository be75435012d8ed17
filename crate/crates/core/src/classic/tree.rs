//! Greedy CART decision tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! feature values. All tie-breaks are fixed: equal impurity prefers the
//! lower feature index and then the lower threshold, and leaf majority
//! ties prefer the lowest class index, so independent reimplementations
//! agree split for split.

use crate::error::{Error, Result};

use super::EncodedDesign;

#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    pub root: TreeNode,
    pub n_classes: usize,
}

impl TreeModel {
    /// Pre-order list of (feature, threshold) splits, used to compare the
    /// training trace against an independent implementation.
    pub fn split_sequence(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        collect_splits(&self.root, &mut out);
        out
    }
}

fn collect_splits(node: &TreeNode, out: &mut Vec<(usize, f64)>) {
    if let TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    } = node
    {
        out.push((*feature, *threshold));
        collect_splits(left, out);
        collect_splits(right, out);
    }
}

fn class_counts(y: &[usize], rows: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &r in rows {
        counts[y[r]] += 1;
    }
    counts
}

fn gini_from_counts(counts: &[usize], total: usize) -> f64 {
    let total = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p
        })
        .sum::<f64>()
}

fn majority_class(counts: &[usize]) -> usize {
    let mut best = 0usize;
    for (class, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = class;
        }
    }
    best
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
}

/// Scan every feature for the split minimizing size-weighted child Gini.
/// Features are visited in index order and thresholds in ascending order,
/// with updates only on strict improvement, which realizes the documented
/// tie-breaks.
fn find_best_split(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
) -> Option<BestSplit> {
    let n = rows.len();
    let mut best: Option<BestSplit> = None;

    for feature in 0..x[rows[0]].len() {
        let mut ordered: Vec<usize> = rows.to_vec();
        ordered.sort_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .expect("finite feature values")
        });

        let mut left_counts = vec![0usize; n_classes];
        let mut right_counts = class_counts(y, rows, n_classes);

        for i in 0..n - 1 {
            let row = ordered[i];
            left_counts[y[row]] += 1;
            right_counts[y[row]] -= 1;

            let value = x[row][feature];
            let next = x[ordered[i + 1]][feature];
            if value == next {
                continue;
            }
            let threshold = value + (next - value) / 2.0;
            let left_n = i + 1;
            let right_n = n - left_n;
            let weighted = (left_n as f64 * gini_from_counts(&left_counts, left_n)
                + right_n as f64 * gini_from_counts(&right_counts, right_n))
                / n as f64;
            let improves = match &best {
                None => true,
                Some(current) => weighted < current.weighted_impurity,
            };
            if improves {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    weighted_impurity: weighted,
                });
            }
        }
    }
    best
}

fn build_node(x: &[Vec<f64>], y: &[usize], rows: &[usize], n_classes: usize) -> TreeNode {
    let counts = class_counts(y, rows, n_classes);
    let impurity = gini_from_counts(&counts, rows.len());

    if impurity == 0.0 || rows.len() < 2 {
        return TreeNode::Leaf {
            class: majority_class(&counts),
        };
    }
    let split = match find_best_split(x, y, rows, n_classes) {
        Some(split) if split.weighted_impurity < impurity => split,
        _ => {
            return TreeNode::Leaf {
                class: majority_class(&counts),
            }
        }
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x[r][split.feature] <= split.threshold);
    // A midpoint of two adjacent floats can round onto an endpoint and
    // leave one side empty; such a node cannot be split further.
    if left_rows.is_empty() || right_rows.is_empty() {
        return TreeNode::Leaf {
            class: majority_class(&counts),
        };
    }

    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(build_node(x, y, &left_rows, n_classes)),
        right: Box::new(build_node(x, y, &right_rows, n_classes)),
    }
}

pub fn train_decision_tree(design: &EncodedDesign) -> Result<TreeModel> {
    if design.x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let rows: Vec<usize> = (0..design.x.len()).collect();
    let n_classes = design.class_names.len();
    Ok(TreeModel {
        root: build_node(&design.x, &design.y, &rows, n_classes),
        n_classes,
    })
}

pub fn predict_tree(model: &TreeModel, queries: &[Vec<f64>]) -> Vec<usize> {
    queries
        .iter()
        .map(|q| {
            let mut node = &model.root;
            loop {
                match node {
                    TreeNode::Leaf { class } => return *class,
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        node = if q[*feature] <= *threshold { left } else { right };
                    }
                }
            }
        })
        .collect()
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
    fn separable_single_feature_gives_depth_one_tree() {
        let d = design(
            vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let model = train_decision_tree(&d).unwrap();
        assert_eq!(model.split_sequence(), [(0, 5.5)]);
        assert_eq!(predict_tree(&model, &d.x), d.y);
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let d = design(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 1], 2);
        let model = train_decision_tree(&d).unwrap();
        assert!(matches!(model.root, TreeNode::Leaf { class: 1 }));
    }

    #[test]
    fn conflicting_duplicates_predict_majority() {
        let d = design(
            vec![vec![1.0], vec![1.0], vec![1.0]],
            vec![0, 1, 1],
            2,
        );
        let model = train_decision_tree(&d).unwrap();
        assert_eq!(predict_tree(&model, &[vec![1.0]]), [1]);
    }

    #[test]
    fn memorizes_random_conflict_free_data() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..80).map(|_| rng.random_range(0..4)).collect();
        let d = design(x, y, 4);
        let model = train_decision_tree(&d).unwrap();
        assert_eq!(predict_tree(&model, &d.x), d.y);
    }

    #[test]
    fn scaling_all_features_preserves_predictions() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let scaled: Vec<Vec<f64>> = x
            .iter()
            .map(|row| row.iter().map(|v| v * 4.25).collect())
            .collect();
        let base = train_decision_tree(&design(x.clone(), y.clone(), 3)).unwrap();
        let scaled_model = train_decision_tree(&design(scaled.clone(), y, 3)).unwrap();
        assert_eq!(predict_tree(&base, &x), predict_tree(&scaled_model, &scaled));
    }
}
