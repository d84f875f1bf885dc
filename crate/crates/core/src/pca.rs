//! Principal component analysis via eigendecomposition of the sample covariance.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("retain ratio {0} is outside (0, 1]")]
    InvalidRetain(f64),
    #[error("input has zero total variance")]
    ZeroVariance,
    #[error("model expects {expected} columns, input has {found}")]
    ShapeMismatch { expected: usize, found: usize },
}

pub type Result<T, E = PcaError> = std::result::Result<T, E>;

/// Slack on the cumulative-ratio comparison so `retain = 1.0` is reachable
/// despite rounding in the eigenvalue sum.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k × n_features`; rows are principal directions.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub k: usize,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_ratio.iter().sum()
    }
}

/// Centers `x`, eigendecomposes its covariance (`n − 1` denominator) and keeps
/// the fewest leading components whose explained ratios sum to at least `retain`.
/// Each component is signed so its largest-magnitude entry is positive.
pub fn pca_fit(x: &Array2<f64>, retain: f64) -> Result<PcaModel> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(PcaError::InvalidRetain(retain));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let sym = DMatrix::from_fn(p, p, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(PcaError::ZeroVariance);
    }

    let mut k = p;
    let mut cumulative = 0.0;
    for (i, v) in values.iter().enumerate() {
        cumulative += v / total;
        if cumulative >= retain - RATIO_SLACK {
            k = i + 1;
            break;
        }
    }

    let mut components = Array2::zeros((k, p));
    for (row, &i) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(i);
        let pivot = (0..p)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .expect("p >= 1");
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let norm = col.norm();
        for j in 0..p {
            components[[row, j]] = sign * col[j] / norm;
        }
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: values[..k].to_vec(),
        explained_ratio: values[..k].iter().map(|v| v / total).collect(),
        k,
    })
}

/// `(x − mean) · componentsᵀ`.
pub fn pca_transform(model: &PcaModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(PcaError::ShapeMismatch {
            expected: model.n_features(),
            found: x.ncols(),
        });
    }
    Ok((x - &model.mean).dot(&model.components.t()))
}

/// `z · components + mean`; exact inverse of [`pca_transform`] when `k` equals
/// the feature count.
pub fn pca_inverse_transform(model: &PcaModel, z: &Array2<f64>) -> Result<Array2<f64>> {
    if z.ncols() != model.k {
        return Err(PcaError::ShapeMismatch {
            expected: model.k,
            found: z.ncols(),
        });
    }
    Ok(z.dot(&model.components) + &model.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn line_is_rank_one() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let m = pca_fit(&x, 0.95).unwrap();
        assert_eq!(m.k, 1);
        let h = 1.0 / 2f64.sqrt();
        assert!((m.components[[0, 0]] - h).abs() < 1e-12);
        assert!((m.components[[0, 1]] - h).abs() < 1e-12);
        assert!((m.explained_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_retention_keeps_both_isotropic_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((500, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let m = pca_fit(&x, 1.0).unwrap();
        assert_eq!(m.k, 2);
    }

    #[test]
    fn full_rank_round_trip() {
        let x = random_matrix(200, 20, 11);
        let m = pca_fit(&x, 1.0).unwrap();
        assert_eq!(m.k, 20);
        let back = pca_inverse_transform(&m, &pca_transform(&m, &x).unwrap()).unwrap();
        assert!(max_abs(&(&back - &x)) < 1e-8);
    }

    #[test]
    fn components_are_orthonormal() {
        let x = random_matrix(150, 12, 5);
        let m = pca_fit(&x, 0.9).unwrap();
        let gram = m.components.dot(&m.components.t());
        let eye = Array2::<f64>::eye(m.k);
        assert!(max_abs(&(&gram - &eye)) < 1e-8);
    }

    #[test]
    fn k_is_minimal_and_variances_descend() {
        let x = random_matrix(120, 10, 9);
        for retain in [0.3, 0.5, 0.8, 0.95, 0.99] {
            let m = pca_fit(&x, retain).unwrap();
            let cum = m.cumulative_ratio();
            let without_last = cum - m.explained_ratio[m.k - 1];
            assert!(cum >= retain - RATIO_SLACK, "{retain}");
            assert!(without_last < retain, "{retain}");
            assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn transformed_training_columns_have_zero_mean_and_eigen_variance() {
        let x = random_matrix(200, 8, 21);
        let m = pca_fit(&x, 1.0).unwrap();
        let z = pca_transform(&m, &x).unwrap();
        let n = z.nrows() as f64;
        for c in 0..m.k {
            let col = z.column(c);
            let mean = col.sum() / n;
            assert!(mean.abs() < 1e-10);
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var - m.explained_variance[c]).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_row_maps_to_origin() {
        let x = random_matrix(50, 4, 2);
        let m = pca_fit(&x, 0.95).unwrap();
        let mean_row = m.mean.clone().insert_axis(Axis(0));
        let z = pca_transform(&m, &mean_row).unwrap();
        assert!(max_abs(&z) < 1e-12);
    }

    #[test]
    fn sign_convention_and_determinism() {
        let x = random_matrix(80, 6, 8);
        let a = pca_fit(&x, 1.0).unwrap();
        let b = pca_fit(&x, 1.0).unwrap();
        assert_eq!(a, b);
        for row in a.components.rows() {
            let big = row.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn errors() {
        assert_eq!(pca_fit(&array![[1.0, 2.0]], 0.95), Err(PcaError::TooFewRows(1)));
        let x = random_matrix(10, 3, 1);
        assert_eq!(pca_fit(&x, 0.0), Err(PcaError::InvalidRetain(0.0)));
        assert_eq!(pca_fit(&x, 1.5), Err(PcaError::InvalidRetain(1.5)));
        assert_eq!(pca_fit(&Array2::ones((5, 2)), 0.95), Err(PcaError::ZeroVariance));
        let m = pca_fit(&x, 0.95).unwrap();
        assert!(matches!(
            pca_transform(&m, &random_matrix(4, 2, 0)),
            Err(PcaError::ShapeMismatch { expected: 3, found: 2 })
        ));
    }
}
