//! Soft-margin linear SVM solved by dual coordinate ascent.
//!
//! The bias is handled as an extra constant feature of value 1, so the
//! problem solved is
//!
//! ```text
//! min  ½(‖w‖² + b²) + C Σ max(0, 1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! whose dual is box constrained, `0 ≤ αᵢ ≤ C`. Training works on the Gram
//! matrix of the augmented inputs, so an epoch costs O(N²) regardless of the
//! feature dimension. Coordinates are visited in a fresh seeded random
//! order every epoch; the loop stops once the duality gap drops below the
//! tolerance or the epoch cap is reached.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Pole;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop when primal minus dual objective falls to this value.
    pub gap_tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gap_tolerance: 1e-4,
            max_epochs: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epochs: usize,
    pub duality_gap: f64,
}

impl LinearClassifier {
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Second pole iff the decision value is strictly positive.
    pub fn predict(&self, x: ArrayView1<f64>) -> Pole {
        if self.decision(x) > 0.0 {
            Pole::Second
        } else {
            Pole::First
        }
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, labels: &[Pole]) -> f64 {
        let hits = x
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &l)| self.predict(*row) == l)
            .count();
        hits as f64 / labels.len() as f64
    }

    /// `½(‖w‖² + b²) + C Σ hinge`.
    pub fn primal_objective(&self, x: ArrayView2<f64>, labels: &[Pole]) -> f64 {
        let reg = 0.5 * (self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias);
        let loss: f64 = x
            .rows()
            .into_iter()
            .zip(labels)
            .map(|(row, l)| (1.0 - l.sign() * self.decision(row)).max(0.0))
            .sum();
        reg + self.c * loss
    }
}

pub fn train_linear_svm(x: ArrayView2<f64>, labels: &[Pole], c: f64, seed: u64) -> Result<LinearClassifier> {
    train_linear_svm_with(
        x,
        labels,
        &SvmParams {
            c,
            ..SvmParams::default()
        },
        seed,
    )
}

pub fn train_linear_svm_with(
    x: ArrayView2<f64>,
    labels: &[Pole],
    params: &SvmParams,
    seed: u64,
) -> Result<LinearClassifier> {
    let n = x.nrows();
    if n != labels.len() {
        return Err(Error::ShapeMismatch(format!("{n} rows but {} labels", labels.len())));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if n < 2 || labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }

    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut gram: Array2<f64> = x.dot(&x.t());
    gram.mapv_inplace(|v| v + 1.0);

    let c = params.c;
    let mut alpha = vec![0.0; n];
    // f[i] = Σ_j α_j y_j K_ij, the augmented decision value of point i.
    let mut f = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epochs = 0;
    let mut gap = f64::INFINITY;

    while epochs < params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * f[i] - 1.0;
            let old = alpha[i];
            let new = (old - g / gram[[i, i]]).clamp(0.0, c);
            if new != old {
                alpha[i] = new;
                let step = (new - old) * y[i];
                let col = gram.column(i);
                for (fk, kk) in f.iter_mut().zip(col) {
                    *fk += step * kk;
                }
            }
        }
        epochs += 1;

        let norm_sq: f64 = (0..n).map(|i| alpha[i] * y[i] * f[i]).sum();
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * f[i]).max(0.0)).sum();
        let primal = 0.5 * norm_sq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        gap = primal - dual;
        if gap <= params.gap_tolerance {
            break;
        }
    }

    let mut weights = vec![0.0; x.ncols()];
    let mut bias = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let coef = alpha[i] * y[i];
        if coef != 0.0 {
            for (w, v) in weights.iter_mut().zip(row) {
                *w += coef * v;
            }
            bias += coef;
        }
    }
    Ok(LinearClassifier {
        weights,
        bias,
        c,
        epochs,
        duality_gap: gap,
    })
}
