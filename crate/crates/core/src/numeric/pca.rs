use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Fitted principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One orthonormal component per row.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    /// Variance of every eigen-direction, including the discarded ones.
    pub total_variance: f64,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and eigenvectors as matrix rows.
pub fn symmetric_eigen(a: &Matrix, tol: f64) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::shape("eigen-decomposition needs a square matrix"));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = m.data.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        let mut col = v.column(i);
        // Deterministic sign: largest-magnitude entry positive.
        let big = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.row_mut(row).copy_from_slice(&col);
    }
    Ok((values, vectors))
}

pub fn pca_fit(data: &Matrix, n_components: usize) -> Result<Pca> {
    let (n, d) = (data.rows, data.cols);
    if n_components == 0 || n_components > d {
        return Err(Error::config(format!(
            "n_components must be in 1..={d}, got {n_components}"
        )));
    }
    if n < n_components || n < 2 {
        return Err(Error::config(format!(
            "PCA with {n_components} components needs at least that many rows (and 2), got {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, x) in mean.iter_mut().zip(data.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in 0..n {
        for ((c, x), m) in centered.iter_mut().zip(data.row(r)).zip(&mean) {
            *c = x - m;
        }
        cov.add_outer(1.0, &centered, &centered);
    }
    cov.data.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    let (values, vectors) = symmetric_eigen(&cov, 1e-12)?;
    let total_variance = values.iter().map(|v| v.max(0.0)).sum();
    let components = Matrix::from_vec(n_components, d, vectors.data[..n_components * d].to_vec())?;
    Ok(Pca {
        mean,
        components,
        explained_variance: values[..n_components].iter().map(|v| v.max(0.0)).collect(),
        total_variance,
    })
}

/// Fits a full PCA and keeps the fewest leading components whose cumulative
/// share of variance reaches `fraction`.
pub fn pca_fit_variance(data: &Matrix, fraction: f64) -> Result<Pca> {
    let full = pca_fit(data, data.cols)?;
    let mut acc = 0.0;
    let mut k = full.explained_variance.len();
    for (i, v) in full.explained_variance.iter().enumerate() {
        acc += v;
        if full.total_variance <= 0.0 || acc / full.total_variance >= fraction - 1e-12 {
            k = i + 1;
            break;
        }
    }
    let d = data.cols;
    Ok(Pca {
        mean: full.mean,
        components: Matrix::from_vec(k, d, full.components.data[..k * d].to_vec())?,
        explained_variance: full.explained_variance[..k].to_vec(),
        total_variance: full.total_variance,
    })
}

impl Pca {
    pub fn n_components(&self) -> usize {
        self.components.rows
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::shape(format!(
                "PCA expects {} features, got {}",
                self.mean.len(),
                x.len()
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components.matvec(&centered)
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n_components() {
            return Err(Error::shape(format!(
                "PCA has {} components, got {} scores",
                self.n_components(),
                z.len()
            )));
        }
        let mut x = self.mean.clone();
        self.components.matvec_t_acc(z, &mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rank_one_line() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = i as f64 * 0.1 - 2.0;
                vec![x + 3.0, 2.0 * x - 1.0]
            })
            .collect();
        let pca = pca_fit(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        let c = pca.components.row(0);
        let s5 = 5f64.sqrt();
        assert!((c[0] - 1.0 / s5).abs() < 1e-10 && (c[1] - 2.0 / s5).abs() < 1e-10);
        assert!(pca.explained_variance[1].abs() < 1e-10);
    }

    #[test]
    fn isotropic_gaussian_has_unit_variances() {
        let mut rng = seeded(9);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                vec![
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        let pca = pca_fit(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        for v in &pca.explained_variance {
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn full_basis_round_trips_and_is_orthonormal() {
        let mut rng = seeded(10);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..5).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let pca = pca_fit(&data, 5).unwrap();
        let gram = pca.components.matmul(&pca.components.transpose()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - e).abs() < 1e-8);
            }
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        for r in &rows {
            let back = pca.inverse_transform(&pca.transform(r).unwrap()).unwrap();
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn too_many_components_is_config_error() {
        let data = Matrix::zeros(10, 3);
        assert!(matches!(pca_fit(&data, 4), Err(Error::Config(_))));
    }
}
