//! Per-axis score variance and the abstraction index.
//!
//! The abstraction index of a two-class point set is the mean Euclidean
//! distance over all cross-class pairs divided by the mean distance of each
//! point to its own class centroid. Values above 1 mean the classes form
//! separated clusters. Significance is assessed by shuffling the labels
//! with class sizes held fixed.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{binarize, Axis, Corpus, Pole, Space};
use crate::error::{Error, Result};

/// Relative tolerance under which a permuted statistic counts as a tie.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceKind {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1.
    Sample,
}

/// Variance of the signed scores on each axis, indexed by `Axis::index`.
pub fn dimension_variance(corpus: &Corpus, kind: VarianceKind) -> Result<[f64; 3]> {
    let n = corpus.len();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let dof = match kind {
        VarianceKind::Population => n,
        VarianceKind::Sample if n < 2 => {
            return Err(Error::InvalidParameter(
                "sample variance needs at least 2 provisions".into(),
            ))
        }
        VarianceKind::Sample => n - 1,
    };
    Ok(Axis::ALL.map(|axis| {
        let vals = corpus.provisions().iter().map(|p| p.scores.get(axis) as f64);
        let mean = vals.clone().sum::<f64>() / n as f64;
        vals.map(|v| (v - mean).powi(2)).sum::<f64>() / dof as f64
    }))
}

/// How the intra-class term is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// `α_x · mean_x d(x, x̄) + α_y · mean_y d(y, ȳ)`, i.e. the overall mean
    /// distance of a point to its own centroid.
    #[default]
    WeightedMean,
    /// `α_x · Σ_x d(x, x̄) + α_y · Σ_y d(y, ȳ)`; grows with class size.
    WeightedSum,
}

/// Row vectors with one binary pole label each.
#[derive(Debug, Clone)]
pub struct LabeledVectors {
    vectors: Array2<f64>,
    labels: Vec<Pole>,
}

impl LabeledVectors {
    pub fn new(vectors: Array2<f64>, labels: Vec<Pole>) -> Result<Self> {
        if vectors.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vectors but {} labels",
                vectors.nrows(),
                labels.len()
            )));
        }
        if vectors.nrows() < 2 || vectors.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "need at least 2 vectors of dimension >= 1, got {}x{}",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        Ok(LabeledVectors { vectors, labels })
    }

    /// Provisions with a pole on `axis`, as vectors in `space`.
    pub fn from_corpus(corpus: &Corpus, space: Space, axis: Axis) -> Result<Self> {
        let (rows, labels): (Vec<usize>, Vec<Pole>) = corpus
            .provisions()
            .iter()
            .enumerate()
            .filter_map(|(i, p)| binarize(&p.scores, axis).map(|pole| (i, pole)))
            .unzip();
        let mut m = Array2::zeros((rows.len(), corpus.dim(space)));
        for (r, &i) in rows.iter().enumerate() {
            for j in corpus.features(i, space).iter_ones() {
                m[[r, j]] = 1.0;
            }
        }
        Self::new(m, labels)
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[Pole] {
        &self.labels
    }
}

fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Evaluates the index for arbitrary relabelings of a fixed point set,
/// reusing the pairwise distance matrix.
struct IndexEvaluator<'a> {
    vectors: &'a Array2<f64>,
    distances: Array2<f64>,
    denominator: Denominator,
}

impl<'a> IndexEvaluator<'a> {
    fn new(vectors: &'a Array2<f64>, denominator: Denominator) -> Self {
        let n = vectors.nrows();
        let mut distances = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(vectors.row(i), vectors.row(j));
                distances[[i, j]] = d;
                distances[[j, i]] = d;
            }
        }
        IndexEvaluator {
            vectors,
            distances,
            denominator,
        }
    }

    fn evaluate(&self, labels: &[Pole]) -> Result<f64> {
        let d = self.vectors.ncols();
        let mut sums = [Array1::<f64>::zeros(d), Array1::<f64>::zeros(d)];
        let mut counts = [0usize; 2];
        for (row, &pole) in self.vectors.rows().into_iter().zip(labels) {
            let k = pole as usize;
            sums[k] += &row;
            counts[k] += 1;
        }
        if counts[0] == 0 {
            return Err(Error::MissingClass("First"));
        }
        if counts[1] == 0 {
            return Err(Error::MissingClass("Second"));
        }
        let centroids = [&sums[0] / counts[0] as f64, &sums[1] / counts[1] as f64];

        let mut intra = [0.0f64; 2];
        for (row, &pole) in self.vectors.rows().into_iter().zip(labels) {
            let k = pole as usize;
            intra[k] += euclidean(row, centroids[k].view());
        }

        let mut cross = 0.0;
        for (i, &pi) in labels.iter().enumerate() {
            if pi != Pole::First {
                continue;
            }
            let row = self.distances.row(i);
            for (j, &pj) in labels.iter().enumerate() {
                if pj == Pole::Second {
                    cross += row[j];
                }
            }
        }
        let numerator = cross / (counts[0] * counts[1]) as f64;

        let total = (counts[0] + counts[1]) as f64;
        let alpha = [counts[0] as f64 / total, counts[1] as f64 / total];
        let denominator = match self.denominator {
            Denominator::WeightedMean => {
                alpha[0] * intra[0] / counts[0] as f64 + alpha[1] * intra[1] / counts[1] as f64
            }
            Denominator::WeightedSum => alpha[0] * intra[0] + alpha[1] * intra[1],
        };
        if denominator <= 0.0 {
            return Err(Error::DegenerateGroups);
        }
        Ok(numerator / denominator)
    }
}

pub fn abstraction_index(data: &LabeledVectors) -> Result<f64> {
    abstraction_index_with(data, Denominator::default())
}

pub fn abstraction_index_with(data: &LabeledVectors, denominator: Denominator) -> Result<f64> {
    IndexEvaluator::new(&data.vectors, denominator).evaluate(&data.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbstractionResult {
    pub index: f64,
    /// `(1 + #{permuted >= observed}) / (1 + n_permutations)`.
    pub p_value: f64,
    pub n_permutations: usize,
}

pub fn permutation_test(data: &LabeledVectors, n_permutations: usize, seed: u64) -> Result<AbstractionResult> {
    permutation_test_with(data, n_permutations, seed, Denominator::default())
}

/// Permutation `r` shuffles the original labels with a generator seeded by
/// `(seed, r)`, so the result does not depend on evaluation order. A
/// shuffle that collapses a class onto its centroid counts as exceeding the
/// observed index.
pub fn permutation_test_with(
    data: &LabeledVectors,
    n_permutations: usize,
    seed: u64,
    denominator: Denominator,
) -> Result<AbstractionResult> {
    if n_permutations == 0 {
        return Err(Error::InvalidParameter("n_permutations must be at least 1".into()));
    }
    let eval = IndexEvaluator::new(&data.vectors, denominator);
    let observed = eval.evaluate(&data.labels)?;
    let threshold = observed - TIE_RTOL * observed.abs();

    let mut exceed = 0usize;
    let mut labels = data.labels.clone();
    for r in 0..n_permutations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        labels.copy_from_slice(&data.labels);
        labels.shuffle(&mut rng);
        match eval.evaluate(&labels) {
            Ok(v) if v >= threshold => exceed += 1,
            Ok(_) => {}
            Err(Error::DegenerateGroups) => exceed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(AbstractionResult {
        index: observed,
        p_value: (1 + exceed) as f64 / (1 + n_permutations) as f64,
        n_permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BitVector, CategoryMap, PatternScores, ProvisionDraft, Vocabulary};
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    use Pole::{First as F, Second as S};

    fn lv(v: Array2<f64>, l: &[Pole]) -> LabeledVectors {
        LabeledVectors::new(v, l.to_vec()).unwrap()
    }

    fn separated() -> LabeledVectors {
        lv(array![[0., 0.], [0., 1.], [10., 0.], [10., 1.]], &[F, F, S, S])
    }

    /// Independent double loop over the raw definition.
    fn naive_index(v: &Array2<f64>, l: &[Pole]) -> f64 {
        let rows: Vec<Vec<f64>> = v.rows().into_iter().map(|r| r.to_vec()).collect();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..a.len() {
                s += (a[k] - b[k]).powi(2);
            }
            s.sqrt()
        };
        let xs: Vec<&Vec<f64>> = rows.iter().zip(l).filter(|(_, p)| **p == F).map(|(r, _)| r).collect();
        let ys: Vec<&Vec<f64>> = rows.iter().zip(l).filter(|(_, p)| **p == S).map(|(r, _)| r).collect();
        let mut num = 0.0;
        for x in &xs {
            for y in &ys {
                num += dist(x, y);
            }
        }
        num /= (xs.len() * ys.len()) as f64;
        let centroid = |g: &[&Vec<f64>]| -> Vec<f64> {
            let mut c = vec![0.0; g[0].len()];
            for r in g {
                for k in 0..c.len() {
                    c[k] += r[k];
                }
            }
            c.iter().map(|s| s / g.len() as f64).collect()
        };
        let (cx, cy) = (centroid(&xs), centroid(&ys));
        let n = (xs.len() + ys.len()) as f64;
        let mx: f64 = xs.iter().map(|x| dist(x, &cx)).sum::<f64>() / xs.len() as f64;
        let my: f64 = ys.iter().map(|y| dist(y, &cy)).sum::<f64>() / ys.len() as f64;
        num / (xs.len() as f64 / n * mx + ys.len() as f64 / n * my)
    }

    #[test]
    fn separated_example() {
        let idx = abstraction_index(&separated()).unwrap();
        let expected = (20.0 + 2.0 * 101f64.sqrt()) / 4.0 / 0.5;
        assert_relative_eq!(idx, expected, epsilon = 1e-12);
        assert_relative_eq!(idx, 20.0499, epsilon = 1e-4);
    }

    #[test]
    fn identical_groups_give_one() {
        let d = lv(array![[0., 0.], [1., 1.], [0., 0.], [1., 1.]], &[F, F, S, S]);
        assert_relative_eq!(abstraction_index(&d).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let d = lv(Array2::ones((4, 2)), &[F, F, S, S]);
        assert!(matches!(abstraction_index(&d), Err(Error::DegenerateGroups)));
    }

    #[test]
    fn missing_class() {
        let d = lv(array![[0.], [1.]], &[S, S]);
        assert!(matches!(abstraction_index(&d), Err(Error::MissingClass("First"))));
    }

    #[test]
    fn weighted_sum_scales_with_class_size() {
        // Every class has 2 members, so the literal sum is twice the mean.
        let d = separated();
        let mean = abstraction_index_with(&d, Denominator::WeightedMean).unwrap();
        let sum = abstraction_index_with(&d, Denominator::WeightedSum).unwrap();
        assert_relative_eq!(mean, 2.0 * sum, epsilon = 1e-12);
    }

    #[test]
    fn variance_examples() {
        let corpus = |scores: &[i8]| {
            let v = Vocabulary::new(vec!["a".into()]).unwrap();
            let drafts = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| ProvisionDraft {
                    id: i.to_string(),
                    symptoms: BitVector::zeros(1),
                    herbs: BitVector::zeros(1),
                    scores: PatternScores::new(s, 1, -2),
                })
                .collect();
            Corpus::new(v.clone(), v.clone(), CategoryMap::identity(&v), drafts).unwrap()
        };
        let var = dimension_variance(&corpus(&[-3, -3, 3, 3]), VarianceKind::Population).unwrap();
        assert_eq!(var, [9.0, 0.0, 0.0]);
        let sample = dimension_variance(&corpus(&[-3, -3, 3, 3]), VarianceKind::Sample).unwrap();
        assert_relative_eq!(sample[0], 12.0);
        assert_eq!(
            dimension_variance(&corpus(&[2]), VarianceKind::Population).unwrap(),
            [0.0; 3]
        );
        assert!(matches!(
            dimension_variance(&corpus(&[]), VarianceKind::Population),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn constant_statistic_has_unit_p_value() {
        let d = lv(array![[0., 0.], [1., 1.], [0., 0.], [1., 1.]], &[F, F, S, S]);
        let r = permutation_test(&d, 200, 1).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn separated_example_p_value_matches_enumeration() {
        // Enumerate the 6 balanced relabelings of the 4 points: exactly the
        // identity and the full swap reach the observed index.
        let d = separated();
        let observed = abstraction_index(&d).unwrap();
        let mut ties = 0;
        for a in 0..4 {
            for b in a + 1..4 {
                let labels: Vec<Pole> = (0..4).map(|i| if i == a || i == b { F } else { S }).collect();
                let v = abstraction_index(&lv(d.vectors().clone(), &labels)).unwrap();
                if v >= observed * (1.0 - 1e-12) {
                    ties += 1;
                }
            }
        }
        assert_eq!(ties, 2);
        let r = permutation_test(&d, 999, 5).unwrap();
        // Binomial(999, 1/3): sd ~0.015
        assert!((r.p_value - 1.0 / 3.0).abs() < 0.06, "p = {}", r.p_value);
        assert!(r.p_value >= 1.0 / 1000.0);
    }

    #[test]
    fn zero_permutations_rejected() {
        assert!(matches!(
            permutation_test(&separated(), 0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    fn instance() -> impl Strategy<Value = (Array2<f64>, Vec<Pole>)> {
        (3usize..20, 1usize..6).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(-5.0f64..5.0, n * d),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_filter_map("both classes", move |(vals, bits)| {
                    let mut labels: Vec<Pole> = bits.iter().map(|&b| if b { S } else { F }).collect();
                    labels[0] = F;
                    labels[1] = F;
                    labels[n - 1] = S;
                    Some((Array2::from_shape_vec((n, d), vals).ok()?, labels))
                })
        })
    }

    proptest! {
        #[test]
        fn matches_naive_oracle((v, l) in instance()) {
            let got = abstraction_index(&lv(v.clone(), &l)).unwrap();
            let want = naive_index(&v, &l);
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
        }

        #[test]
        fn invariant_under_similarity_transforms((v, l) in instance(), shift in -100.0f64..100.0, scale in 0.01f64..100.0, theta in 0.0f64..6.3) {
            let base = abstraction_index(&lv(v.clone(), &l)).unwrap();
            let mut moved = v.mapv(|x| x * scale + shift);
            if moved.ncols() >= 2 {
                let (c, s) = (theta.cos(), theta.sin());
                for mut row in moved.rows_mut() {
                    let (a, b) = (row[0], row[1]);
                    row[0] = c * a - s * b;
                    row[1] = s * a + c * b;
                }
            }
            let got = abstraction_index(&lv(moved, &l)).unwrap();
            prop_assert!((got - base).abs() <= 1e-8 * base.max(1.0));
        }

        #[test]
        fn swapping_labels_and_reordering_is_neutral((v, l) in instance()) {
            let base = abstraction_index(&lv(v.clone(), &l)).unwrap();
            let swapped: Vec<Pole> = l.iter().map(|p| p.opposite()).collect();
            prop_assert!((abstraction_index(&lv(v.clone(), &swapped)).unwrap() - base).abs() <= 1e-9 * base);
            let n = v.nrows();
            let order: Vec<usize> = (0..n).rev().collect();
            let rev = v.select(ndarray::Axis(0), &order);
            let rl: Vec<Pole> = order.iter().map(|&i| l[i]).collect();
            prop_assert!((abstraction_index(&lv(rev, &rl)).unwrap() - base).abs() <= 1e-9 * base);
        }

        #[test]
        fn p_value_bounds((v, l) in instance(), perms in 1usize..60, seed in any::<u64>()) {
            let r = permutation_test(&lv(v, &l), perms, seed).unwrap();
            prop_assert!(r.p_value >= 1.0 / (1 + perms) as f64 && r.p_value <= 1.0);
        }

        #[test]
        fn variance_ignores_translation(scores in proptest::collection::vec(-3i8..=0, 1..30), shift in 0i8..=3) {
            let v = Vocabulary::new(vec!["a".into()]).unwrap();
            let mk = |s: i8| -> Corpus {
                let drafts = scores.iter().enumerate().map(|(i, &x)| ProvisionDraft {
                    id: i.to_string(),
                    symptoms: BitVector::zeros(1),
                    herbs: BitVector::zeros(1),
                    scores: PatternScores::new(x + s, 0, 0),
                }).collect();
                Corpus::new(v.clone(), v.clone(), CategoryMap::identity(&v), drafts).unwrap()
            };
            let a = dimension_variance(&mk(0), VarianceKind::Population).unwrap()[0];
            let b = dimension_variance(&mk(shift), VarianceKind::Population).unwrap()[0];
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_result_is_seed_deterministic() {
        let d = lv(
            Array2::from_shape_fn((12, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64),
            &[F, S, F, S, F, S, F, S, F, F, S, S],
        );
        let a = permutation_test(&d, 300, 9).unwrap();
        let b = permutation_test(&d, 300, 9).unwrap();
        assert_eq!(a, b);
    }
}
