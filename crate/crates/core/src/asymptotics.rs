//! Asymptotic covariance of the estimated scaling vector and of the
//! recovered squared coefficients.
//!
//! For `h_i`, `h_j` in the scaling layout,
//! `W[h_i, h_j] = d Σ_k ‖a_k‖⁻² max_{h_i} a²_·k max_{h_j} a²_·k - σ²_{h_i} σ²_{h_j}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{validation, Error, Result};
use crate::identification::{layout_len, layout_subsets, slot, TransformMatrix};
use crate::model::MlMatrix;

/// Symmetric covariance indexed like a scaling vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// `dim` is the model dimension `d`; `matrix` must be `d(d+1)/2` square
    /// and symmetric to 1e-10.
    pub fn new(dim: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = layout_len(dim);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(validation(format!(
                "covariance for d={dim} must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(1.0);
        for r in 0..n {
            for c in 0..r {
                if (matrix[(r, c)] - matrix[(c, r)]).abs() > 1e-10 * scale {
                    return Err(validation(format!("covariance not symmetric at ({r}, {c})")));
                }
            }
        }
        Ok(CovarianceMatrix { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix[(r, c)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// `tᵀ W t`.
    pub fn quadratic_form(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.size() {
            return Err(validation(format!(
                "direction has length {}, expected {}",
                t.len(),
                self.size()
            )));
        }
        let mut acc = 0.0;
        for r in 0..t.len() {
            for c in 0..t.len() {
                acc += t[r] * self.matrix[(r, c)] * t[c];
            }
        }
        Ok(acc)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

fn max_sq(a: &MlMatrix, h: &[usize], k: usize) -> f64 {
    h.iter().map(|&i| a.get(i, k).powi(2)).fold(0.0, f64::max)
}

fn column_norms_sq(a: &MlMatrix) -> Result<Vec<f64>> {
    (0..a.dim())
        .map(|k| {
            let c = a.column_norm(k).powi(2);
            if c > 0.0 {
                Ok(c)
            } else {
                Err(Error::Validation(format!("column {} has zero norm", k + 1)))
            }
        })
        .collect()
}

fn check_subset(d: usize, h: &[usize]) -> Result<()> {
    if h.is_empty() || h.iter().any(|&i| i >= d) {
        return Err(validation(format!("invalid subset {h:?} for d={d}")));
    }
    Ok(())
}

fn entry_with_norms(a: &MlMatrix, norms: &[f64], hi: &[usize], hj: &[usize]) -> f64 {
    let d = a.dim();
    let mut cross = 0.0;
    let mut si = 0.0;
    let mut sj = 0.0;
    for k in 0..d {
        let mi = max_sq(a, hi, k);
        let mj = max_sq(a, hj, k);
        cross += mi * mj / norms[k];
        si += mi;
        sj += mj;
    }
    d as f64 * cross - si * sj
}

/// One entry of `W_M` for 0-based subsets `h_i`, `h_j`.
pub fn wm_entry(a: &MlMatrix, hi: &[usize], hj: &[usize]) -> Result<f64> {
    check_subset(a.dim(), hi)?;
    check_subset(a.dim(), hj)?;
    let norms = column_norms_sq(a)?;
    Ok(entry_with_norms(a, &norms, hi, hj))
}

/// Full `W_M` over the scaling layout.
pub fn build_wm(a: &MlMatrix) -> Result<CovarianceMatrix> {
    if !a.is_standardized() {
        return Err(validation("W_M requires a standardized coefficient matrix"));
    }
    let d = a.dim();
    let norms = column_norms_sq(a)?;
    let subsets = layout_subsets(d);
    let n = subsets.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|r| {
            (0..n)
                .map(|c| entry_with_norms(a, &norms, &subsets[r], &subsets[c]))
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
    CovarianceMatrix::new(d, matrix)
}

/// `T W Tᵀ`, the asymptotic covariance of `√k (Â² - A²)`.
pub fn transform_covariance(t: &TransformMatrix, w: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if t.size() != w.size() {
        return Err(validation(format!(
            "transform has size {}, covariance has size {}",
            t.size(),
            w.size()
        )));
    }
    let td = t.to_dense();
    let mut out = &td * w.matrix() * td.transpose();
    let sym = (&out + out.transpose()) * 0.5;
    out.copy_from(&sym);
    CovarianceMatrix::new(w.dim(), out)
}

/// Indicator of the `σ_i²` slots; `W_M` is degenerate along it since
/// `Σ_i σ̂_i²` is deterministic.
pub fn singleton_direction(d: usize) -> Vec<f64> {
    let mut t = vec![0.0; layout_len(d)];
    for i in 0..d {
        t[slot(i, d - 1, d)] = 1.0;
    }
    t
}

/// Layout slots whose diagonal entry of `W_M` is not positive, with the value.
pub fn positivity_violations(w: &CovarianceMatrix, tol: f64) -> Vec<(usize, f64)> {
    w.diagonal()
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v <= tol)
        .collect()
}
