//! Classical (Torgerson) multidimensional scaling.
//!
//! 1. square the distances, `A = D²`
//! 2. double-center, `B = −½ (A − row means − column means + grand mean)`
//! 3. take the top-k eigenpairs of the symmetric `B`
//! 4. coordinates are eigenvectors scaled by `√max(λ, 0)`
//!
//! Each coordinate column is flipped so that its largest-magnitude entry is
//! positive, which pins the reflection left open by the eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::corpus::{Corpus, Space};
use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// N × k, columns by eigenvalue descending.
    pub coords: Array2<f64>,
    /// Top-k eigenvalues of the double-centered matrix, descending
    /// (unclamped, so they may be negative for non-Euclidean input).
    pub eigenvalues: Vec<f64>,
    /// `‖D − D̂‖_F / ‖D‖_F`, 0 for an all-zero input.
    pub stress: f64,
}

fn validate(d: ArrayView2<f64>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::ShapeMismatch(format!("distance matrix is {}x{}", n, d.ncols())));
    }
    for i in 0..n {
        if d[[i, i]] != 0.0 {
            return Err(Error::NonZeroDiagonal(i));
        }
        for j in 0..n {
            let v = d[[i, j]];
            if v < 0.0 || v.is_nan() {
                return Err(Error::NegativeDistance(i, j));
            }
            let w = d[[j, i]];
            if (v - w).abs() > SYMMETRY_RTOL * v.abs().max(w.abs()).max(1.0) {
                return Err(Error::AsymmetricInput(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

pub fn pairwise_euclidean(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

pub fn classical_mds(distances: ArrayView2<f64>, k: usize) -> Result<Embedding> {
    validate(distances)?;
    let n = distances.nrows();
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "need at least one point and one dimension".into(),
        ));
    }

    let sq = distances.mapv(|v| v * v);
    let row_means: Vec<f64> = sq.rows().into_iter().map(|r| r.sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[[i, j]] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));

    let mut coords = Array2::zeros((n, k));
    let mut eigenvalues = Vec::with_capacity(k);
    for (col, &e) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[e];
        eigenvalues.push(lambda);
        let scale = lambda.max(0.0).sqrt();
        let v = eig.eigenvectors.column(e);
        let pivot = (0..n)
            .max_by(|&a, &c| v[a].abs().total_cmp(&v[c].abs()).then(c.cmp(&a)))
            .expect("n > 0");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[[i, col]] = sign * scale * v[i];
        }
    }
    // Fewer points than requested dimensions: pad with zero axes.
    eigenvalues.resize(k, 0.0);

    let embedded = pairwise_euclidean(coords.view());
    let norm = distances.iter().map(|v| v * v).sum::<f64>().sqrt();
    let resid = distances
        .iter()
        .zip(embedded.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let stress = if norm > 0.0 { resid / norm } else { resid };
    Ok(Embedding {
        coords,
        eigenvalues,
        stress,
    })
}

/// 3-D MDS of the corpus' binary herb vectors under Euclidean distance.
pub fn herb_embedding(corpus: &Corpus) -> Result<Embedding> {
    let x = corpus.feature_matrix(Space::Herb);
    classical_mds(pairwise_euclidean(x.view()).view(), 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ColorCode {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl ColorCode {
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

/// Min-max normalizes the first three coordinate columns into R, G and B.
/// A constant (or missing) column maps to 128.
pub fn rgb_colors(embedding: &Embedding) -> Vec<ColorCode> {
    let c = &embedding.coords;
    let channel = |col: usize| -> Vec<u8> {
        if col >= c.ncols() {
            return vec![128; c.nrows()];
        }
        let column = c.column(col);
        let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        column
            .iter()
            .map(|&v| {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                (t * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
            })
            .collect()
    };
    let (r, g, b) = (channel(0), channel(1), channel(2));
    (0..c.nrows())
        .map(|i| ColorCode {
            r: r[i],
            g: g[i],
            b: b[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points() {
        let d = array![[0., 1., 3.], [1., 0., 2.], [3., 2., 0.]];
        let e = classical_mds(d.view(), 3).unwrap();
        let back = pairwise_euclidean(e.coords.view());
        for (a, b) in d.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(e.stress <= 1e-9);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_matrix() {
        let e = classical_mds(Array2::zeros((4, 4)).view(), 3).unwrap();
        assert!(e.coords.iter().all(|&v| v == 0.0));
        assert_eq!(e.stress, 0.0);
        assert!(rgb_colors(&e)
            .iter()
            .all(|c| *c == ColorCode { r: 128, g: 128, b: 128 }));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            classical_mds(array![[0., 1.], [2., 0.]].view(), 2),
            Err(Error::AsymmetricInput(0, 1))
        ));
        assert!(matches!(
            classical_mds(array![[0., -1.], [-1., 0.]].view(), 2),
            Err(Error::NegativeDistance(0, 1))
        ));
        assert!(matches!(
            classical_mds(array![[1., 1.], [1., 0.]].view(), 2),
            Err(Error::NonZeroDiagonal(0))
        ));
    }

    #[test]
    fn sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((9, 3), |_| rng.gen_range(-1.0..1.0));
        let e = classical_mds(pairwise_euclidean(x.view()).view(), 3).unwrap();
        for col in e.coords.columns() {
            let top = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(top > 0.0);
        }
    }

    #[test]
    fn two_points_hit_channel_extremes() {
        let e = Embedding {
            coords: array![[-1.0, 2.0, 5.0], [3.0, 2.0, 5.0]],
            eigenvalues: vec![1.0, 0.0, 0.0],
            stress: 0.0,
        };
        let c = rgb_colors(&e);
        assert_eq!(c[0], ColorCode { r: 0, g: 128, b: 128 });
        assert_eq!(c[1], ColorCode { r: 255, g: 128, b: 128 });
        assert_eq!(c[1].hex(), "#ff8080");
    }

    proptest! {
        #[test]
        fn exact_for_three_dimensional_configurations(seed in any::<u64>(), n in 4usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-5.0..5.0));
            let d = pairwise_euclidean(x.view());
            let e = classical_mds(d.view(), 3).unwrap();
            let back = pairwise_euclidean(e.coords.view());
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = d.iter().zip(back.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err / norm <= 1e-6);
        }

        #[test]
        fn colors_ignore_positive_affine_column_maps(seed in any::<u64>(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coords = Array2::from_shape_fn((7, 3), |_| rng.gen_range(-1.0..1.0));
            let mut moved = coords.clone();
            moved.column_mut(1).mapv_inplace(|v| a * v + b);
            let e1 = Embedding { coords, eigenvalues: vec![0.0; 3], stress: 0.0 };
            let e2 = Embedding { coords: moved, eigenvalues: vec![0.0; 3], stress: 0.0 };
            let (c1, c2) = (rgb_colors(&e1), rgb_colors(&e2));
            for (p, q) in c1.iter().zip(&c2) {
                prop_assert_eq!(p.r, q.r);
                prop_assert_eq!(p.b, q.b);
                prop_assert!((p.g as i32 - q.g as i32).abs() <= 1);
            }
        }

        #[test]
        fn relabeling_points_permutes_the_embedding(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
            let perm: Vec<usize> = (0..n).rev().collect();
            let d = pairwise_euclidean(x.view());
            let dp = Array2::from_shape_fn((n, n), |(i, j)| d[[perm[i], perm[j]]]);
            let e = classical_mds(d.view(), 3).unwrap();
            let ep = classical_mds(dp.view(), 3).unwrap();
            for (i, &src) in perm.iter().enumerate() {
                for c in 0..3 {
                    prop_assert!((ep.coords[[i, c]] - e.coords[[src, c]]).abs() < 1e-6);
                }
            }
        }
    }
}
