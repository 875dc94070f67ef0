//! Trajectory and histogram matchers.
//!
//! Two verifiers share the reference-set protocol: an elastic matcher that
//! warps multichannel feature trajectories onto each other, and a histogram
//! matcher that compares fixed-length occupancy vectors. Both turn a
//! question sample into a non-negative dissimilarity score; smaller means
//! more genuine.

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, HistogramFeature};

/// Non-negative, finite dissimilarity. Lower scores mean the question looks
/// more like the references.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DissimilarityScore(f64);

impl DissimilarityScore {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::contract(format!(
                "dissimilarity must be finite and non-negative, got {value}"
            )));
        }
        Ok(DissimilarityScore(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Euclidean distance between feature columns at positions `i` and `j`.
fn local_cost(a: &FeatureMatrix, b: &FeatureMatrix, i: usize, j: usize) -> f64 {
    let mut sum = 0.0;
    for c in 0..a.n_channels() {
        let d = a.channels()[c][i] - b.channels()[c][j];
        sum += d * d;
    }
    sum.sqrt()
}

/// Path-length-normalized dynamic time warping distance.
///
/// The alignment may advance either sequence alone or both together; every
/// visited cell pays the Euclidean distance between the aligned columns.
/// Among minimum-cost alignments the shortest one is charged, and the total
/// cost is divided by that path length, so the result does not grow with
/// signature duration.
pub fn dtw_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.n_channels() != b.n_channels() {
        return Err(Error::contract(format!(
            "cannot align {} channels against {}",
            a.n_channels(),
            b.n_channels()
        )));
    }
    let (n, m) = (a.len(), b.len());
    // One DP cell per pair of positions: accumulated cost plus the length of
    // the cheapest path achieving it, so ties resolve to the shortest path.
    let mut cost = vec![f64::INFINITY; n * m];
    let mut steps = vec![usize::MAX; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let here = local_cost(a, b, i, j);
            let mut best = (f64::INFINITY, usize::MAX);
            if i == 0 && j == 0 {
                best = (0.0, 0);
            } else {
                if i > 0 {
                    best = min_lex(best, (cost[at(i - 1, j)], steps[at(i - 1, j)]));
                }
                if j > 0 {
                    best = min_lex(best, (cost[at(i, j - 1)], steps[at(i, j - 1)]));
                }
                if i > 0 && j > 0 {
                    best = min_lex(best, (cost[at(i - 1, j - 1)], steps[at(i - 1, j - 1)]));
                }
            }
            cost[at(i, j)] = best.0 + here;
            steps[at(i, j)] = best.1 + 1;
        }
    }
    let total = cost[at(n - 1, m - 1)];
    let length = steps[at(n - 1, m - 1)];
    Ok(total / length as f64)
}

fn min_lex(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// How a raw question-to-reference distance is normalized into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreNorm {
    /// Divide by the mean pairwise distance among the references.
    MeanReferenceSpread,
    /// Use the raw distance unchanged.
    None,
}

/// An enrolled user's reference signatures in feature form.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    items: Vec<FeatureMatrix>,
}

impl ReferenceSet {
    pub fn new(items: Vec<FeatureMatrix>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::Protocol(format!(
                "a reference set needs at least 2 signatures, got {}",
                items.len()
            )));
        }
        let channels = items[0].n_channels();
        if items.iter().any(|m| m.n_channels() != channels) {
            return Err(Error::contract(
                "reference signatures disagree on channel count".to_string(),
            ));
        }
        Ok(ReferenceSet { items })
    }

    pub fn items(&self) -> &[FeatureMatrix] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Mean DTW distance over all unordered reference pairs. Summation runs
    /// over sorted distances so the result is identical no matter how the
    /// references were ordered.
    pub fn mean_pairwise_dtw(&self) -> Result<f64> {
        let mut dists = Vec::new();
        for i in 0..self.items.len() {
            for j in i + 1..self.items.len() {
                dists.push(dtw_distance(&self.items[i], &self.items[j])?);
            }
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        Ok(dists.iter().sum::<f64>() / dists.len() as f64)
    }
}

/// Elastic-matcher score: minimum DTW distance from the question to any
/// reference, normalized by the reference spread. A degenerate spread of
/// zero (identical references) falls back to the raw minimum distance.
pub fn dtw_score(question: &FeatureMatrix, refs: &ReferenceSet, norm: ScoreNorm) -> Result<DissimilarityScore> {
    let mut best = f64::INFINITY;
    for r in refs.items() {
        let d = dtw_distance(question, r)?;
        if d < best {
            best = d;
        }
    }
    let value = match norm {
        ScoreNorm::None => best,
        ScoreNorm::MeanReferenceSpread => {
            let spread = refs.mean_pairwise_dtw()?;
            if spread > 0.0 {
                best / spread
            } else {
                best
            }
        }
    };
    DissimilarityScore::new(value)
}

/// Histogram-matcher score: Manhattan distance between the question's
/// histogram vector and the element-wise mean of the reference vectors.
/// All histograms must share one bin layout.
pub fn manhattan_score(question: &HistogramFeature, refs: &[HistogramFeature]) -> Result<DissimilarityScore> {
    if refs.is_empty() {
        return Err(Error::Protocol("histogram matcher needs at least one reference".to_string()));
    }
    let q = question.flat_vector();
    let mut mean = vec![0.0; q.len()];
    for r in refs {
        if r.layout() != question.layout() {
            return Err(Error::contract(
                "histogram layouts differ between question and references".to_string(),
            ));
        }
        let v = r.flat_vector();
        if v.len() != q.len() {
            return Err(Error::contract(format!(
                "histogram vectors disagree on length: {} vs {}",
                v.len(),
                q.len()
            )));
        }
        for (m, x) in mean.iter_mut().zip(&v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= refs.len() as f64;
    }
    let dist = q.iter().zip(&mean).map(|(a, b)| (a - b).abs()).sum::<f64>();
    DissimilarityScore::new(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, FeatureSet, HistogramLayout, RobotKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["v".to_string()],
            vec![values.to_vec()],
            RobotKind::TwoD,
            FeatureSet::F1,
        )
        .unwrap()
    }

    fn two_channel(a: &[f64], b: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["a".to_string(), "b".to_string()],
            vec![a.to_vec(), b.to_vec()],
            RobotKind::TwoD,
            FeatureSet::F1,
        )
        .unwrap()
    }

    #[test]
    fn identical_sequences_have_zero_distance() {
        let a = series(&[0.0, 1.0, 2.0, 1.0]);
        assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn insertion_is_absorbed_by_warping() {
        let a = series(&[1.0, 2.0, 3.0]);
        let b = series(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(dtw_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_pays_per_step() {
        let a = series(&[0.0, 0.0]);
        let b = series(&[1.0, 1.0]);
        // Diagonal path: two cells, each costing 1.
        assert_abs_diff_eq!(dtw_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ties_resolve_to_the_shortest_path() {
        // All-zero sequences tie on cost everywhere; the normalizer must see
        // the diagonal length, not a staircase.
        let a = series(&[0.0; 4]);
        let b = series(&[0.0; 4]);
        assert_eq!(dtw_distance(&a, &b).unwrap(), 0.0);
        let c = series(&[5.0, 5.0, 5.0]);
        let d = series(&[5.0, 5.0, 5.0, 5.0, 5.0]);
        assert_eq!(dtw_distance(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let a = series(&[0.0, 1.0]);
        let b = two_channel(&[0.0, 1.0], &[1.0, 0.0]);
        assert!(dtw_distance(&a, &b).is_err());
    }

    #[test]
    fn multichannel_cost_is_euclidean() {
        let a = two_channel(&[0.0], &[0.0]);
        let b = two_channel(&[3.0], &[4.0]);
        assert_abs_diff_eq!(dtw_distance(&a, &b).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn score_normalizes_by_reference_spread() {
        // Pairwise distances among {2, 4, 6} as one-step sequences: 2, 4, 2
        // per unit length... using len-2 constants keeps lengths equal.
        let refs = ReferenceSet::new(vec![
            series(&[2.0, 2.0]),
            series(&[4.0, 4.0]),
            series(&[6.0, 6.0]),
        ])
        .unwrap();
        // Pairwise normalized distances: |2-4|=2, |2-6|=4, |4-6|=2, mean = 8/3.
        assert_abs_diff_eq!(refs.mean_pairwise_dtw().unwrap(), 8.0 / 3.0, epsilon = 1e-15);
        // Question at 5: min distance is 1 (to the 4s or 6s). 1 / (8/3) = 3/8.
        let q = series(&[5.0, 5.0]);
        let s = dtw_score(&q, &refs, ScoreNorm::MeanReferenceSpread).unwrap();
        assert_abs_diff_eq!(s.value(), 0.375, epsilon = 1e-15);
        let raw = dtw_score(&q, &refs, ScoreNorm::None).unwrap();
        assert_abs_diff_eq!(raw.value(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_references_fall_back_to_raw_distance() {
        let refs = ReferenceSet::new(vec![series(&[1.0, 1.0]), series(&[1.0, 1.0])]).unwrap();
        let q = series(&[3.0, 3.0]);
        let s = dtw_score(&q, &refs, ScoreNorm::MeanReferenceSpread).unwrap();
        assert_abs_diff_eq!(s.value(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_set_requires_two_items() {
        assert!(matches!(
            ReferenceSet::new(vec![series(&[1.0, 2.0])]).unwrap_err(),
            Error::Protocol(_)
        ));
    }

    fn histogram(layout: &HistogramLayout, values: &[f64]) -> HistogramFeature {
        let m = series(values);
        crate::features::histogram_features(&m, layout).unwrap()
    }

    #[test]
    fn manhattan_score_on_a_tiny_layout() {
        // One channel, two bins over [0, 2): values < 1 land in bin 0.
        let fit_on = series(&[0.0, 2.0]);
        let layout = HistogramLayout::fit(&[&fit_on], 2).unwrap();
        let r1 = histogram(&layout, &[0.0, 0.0, 2.0, 2.0]); // abs [2,2], rel [0.5,0.5]
        let r2 = histogram(&layout, &[0.0, 0.0, 0.0, 2.0]); // abs [3,1], rel [0.75,0.25]
        let q = histogram(&layout, &[0.0, 0.0, 2.0, 2.0]);
        // Mean ref vector: abs/T [0.625, 0.375], rel [0.625, 0.375].
        // Question:       abs/T [0.5,   0.5  ], rel [0.5,   0.5  ].
        // L1 = 2 * (0.125 + 0.125) = 0.5.
        let s = manhattan_score(&q, &[r1, r2]).unwrap();
        assert_abs_diff_eq!(s.value(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn manhattan_score_zero_for_matching_mean() {
        let fit_on = series(&[0.0, 2.0]);
        let layout = HistogramLayout::fit(&[&fit_on], 2).unwrap();
        let r = histogram(&layout, &[0.0, 2.0]);
        let q = histogram(&layout, &[0.0, 2.0]);
        let s = manhattan_score(&q, &[r.clone(), r]).unwrap();
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn manhattan_rejects_layout_mismatch() {
        let l1 = HistogramLayout::fit(&[&series(&[0.0, 2.0])], 2).unwrap();
        let l2 = HistogramLayout::fit(&[&series(&[0.0, 4.0])], 2).unwrap();
        let q = histogram(&l1, &[0.0, 2.0]);
        let r = histogram(&l2, &[0.0, 2.0]);
        assert!(manhattan_score(&q, &[r]).is_err());
    }

    #[test]
    fn scores_reject_non_finite_values() {
        assert!(DissimilarityScore::new(f64::NAN).is_err());
        assert!(DissimilarityScore::new(-0.5).is_err());
        assert!(DissimilarityScore::new(0.0).is_ok());
    }

    proptest! {
        #[test]
        fn dtw_is_symmetric(
            a in proptest::collection::vec(-5.0f64..5.0, 1..8),
            b in proptest::collection::vec(-5.0f64..5.0, 1..8),
        ) {
            let ma = series(&a);
            let mb = series(&b);
            let dab = dtw_distance(&ma, &mb).unwrap();
            let dba = dtw_distance(&mb, &ma).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12);
        }

        #[test]
        fn dtw_self_distance_is_zero(
            a in proptest::collection::vec(-5.0f64..5.0, 1..10),
        ) {
            let m = series(&a);
            prop_assert_eq!(dtw_distance(&m, &m).unwrap(), 0.0);
        }

        #[test]
        fn score_ignores_reference_order(
            vals in proptest::collection::vec(
                proptest::collection::vec(-3.0f64..3.0, 3..6),
                3..5,
            ),
            q in proptest::collection::vec(-3.0f64..3.0, 3..6),
        ) {
            let fwd: Vec<_> = vals.iter().map(|v| series(v)).collect();
            let mut rev = fwd.clone();
            rev.reverse();
            let question = series(&q);
            let s1 = dtw_score(&question, &ReferenceSet::new(fwd).unwrap(), ScoreNorm::MeanReferenceSpread).unwrap();
            let s2 = dtw_score(&question, &ReferenceSet::new(rev).unwrap(), ScoreNorm::MeanReferenceSpread).unwrap();
            prop_assert_eq!(s1.value(), s2.value());
        }
    }
}
