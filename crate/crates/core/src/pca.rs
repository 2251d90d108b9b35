//! Principal component analysis of the standardized feature matrix.
//!
//! Standardization uses the sample (n - 1) standard deviation. Components are
//! eigenvectors of the correlation matrix, sorted by decreasing eigenvalue,
//! with each vector's largest-magnitude entry made positive.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loudness_model::{FEATURE_NAMES, N_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Array1<f64>,
    pub sds: Array1<f64>,
    /// d x k, one component per column.
    pub loadings: Array2<f64>,
    /// Variance of each component's scores (eigenvalues), k entries.
    pub explained_variance: Array1<f64>,
    /// Share of the total variance per component, k entries.
    pub explained_variance_ratio: Array1<f64>,
}

fn column_name(j: usize, d: usize) -> String {
    if d == N_FEATURES {
        FEATURE_NAMES[j].to_string()
    } else {
        format!("column {j}")
    }
}

/// Centers each column and scales it to unit sample standard deviation.
pub fn standardize(x: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array1<f64>)> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Shape(format!("standardization needs at least 2 rows, got {n}")));
    }
    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    let sds = x.std_axis(Axis(0), 1.0);
    for j in 0..d {
        if !(sds[j] > 0.0) || !sds[j].is_finite() {
            return Err(Error::DegenerateFeature(column_name(j, d)));
        }
    }
    let z = (&x - &means) / &sds;
    Ok((z, means, sds))
}

impl PcaModel {
    /// Standardizes `x` and extracts the leading `k` components.
    pub fn fit(x: ArrayView2<f64>, k: usize) -> Result<Self> {
        let (z, means, sds) = standardize(x)?;
        let mut model = fit_pca(z.view(), k)?;
        model.means = means;
        model.sds = sds;
        Ok(model)
    }

    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    /// Scores of raw (unstandardized) rows.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        let z = (&x - &self.means) / &self.sds;
        Ok(z.dot(&self.loadings))
    }

    /// Scores of rows that are already standardized with this model's
    /// statistics.
    pub fn project(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(z.ncols())?;
        Ok(z.dot(&self.loadings))
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if d != self.loadings.nrows() {
            return Err(Error::Shape(format!(
                "model expects {} columns, got {d}",
                self.loadings.nrows()
            )));
        }
        Ok(())
    }
}

/// PCA of an already standardized matrix. The returned model carries zero
/// means and unit standard deviations.
pub fn fit_pca(z: ArrayView2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = z.dim();
    if k == 0 || k > d {
        return Err(Error::Config(format!("component count must be in 1..={d}, got {k}")));
    }
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 rows, got {n}")));
    }
    let centered = &z - &z.mean_axis(Axis(0)).expect("n >= 2");
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let sym = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().sum();

    let mut loadings = Array2::zeros((d, k));
    let mut variance = Array1::zeros(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("d > 0");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            loadings[[i, c]] = sign * v[i];
        }
        variance[c] = eig.eigenvalues[idx].max(0.0);
    }
    let ratio = if total > 0.0 {
        &variance / total
    } else {
        Array1::zeros(k)
    };
    Ok(PcaModel {
        means: Array1::zeros(d),
        sds: Array1::ones(d),
        loadings,
        explained_variance: variance,
        explained_variance_ratio: ratio,
    })
}
