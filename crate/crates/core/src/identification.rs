//! Recovery of the squared coefficients of a well-ordered, standardized
//! model from scalings of componentwise maxima.
//!
//! Both vectors use the same triangular layout of length `d(d+1)/2`. Slot
//! `(i, j)` with `i ≤ j` holds `a_ij²` in [`SquaredCoefficients`] and, in
//! [`ScalingVector`], the squared scaling of `max(X_i, X_{j+1}, …, X_d)`
//! for `j < d` and `σ_i²` for `j = d`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::model::{scaling_of_max, MlMatrix};

/// Length of the triangular layout.
pub fn layout_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// 1-based slot of `(i, j)`, `1 ≤ i ≤ j ≤ d`.
pub fn index_l(i: usize, j: usize, d: usize) -> Result<usize> {
    if i == 0 || j > d || i > j {
        return Err(validation(format!(
            "slot ({i}, {j}) requires 1 <= i <= j <= {d}"
        )));
    }
    // (j - d) + Σ_{k=0}^{i-1} (d - k)
    Ok(i * d + j - d - i * (i - 1) / 2)
}

/// 0-based slot of 0-based `(i, j)`.
pub(crate) fn slot(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * d + j - i * (i + 1) / 2
}

/// The 0-based `(i, j)` pair stored at a 0-based slot.
pub fn slot_pair(pos: usize, d: usize) -> (usize, usize) {
    let mut start = 0;
    for i in 0..d {
        let width = d - i;
        if pos < start + width {
            return (i, i + pos - start);
        }
        start += width;
    }
    panic!("slot {pos} out of range for dimension {d}");
}

/// Node subset whose maximum is scaled at slot `(i, j)` (0-based, ascending).
pub fn slot_subset(i: usize, j: usize, d: usize) -> Vec<usize> {
    let mut h = vec![i];
    if j + 1 < d {
        h.extend(j + 1..d);
    }
    h
}

/// Every subset of the layout, in slot order.
pub fn layout_subsets(d: usize) -> Vec<Vec<usize>> {
    (0..layout_len(d))
        .map(|p| {
            let (i, j) = slot_pair(p, d);
            slot_subset(i, j, d)
        })
        .collect()
}

/// Squared scalings of maxima in the triangular layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingVector {
    dim: usize,
    values: Vec<f64>,
}

impl ScalingVector {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != layout_len(dim) {
            return Err(validation(format!(
                "scaling vector for d = {dim} needs {} entries, got {}",
                layout_len(dim),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(validation("scalings must be finite and non-negative"));
        }
        Ok(ScalingVector { dim, values })
    }

    /// Fills every slot with `f(subset)`.
    pub fn from_fn<F>(dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Result<f64>,
    {
        let values = layout_subsets(dim)
            .iter()
            .map(|h| f(h))
            .collect::<Result<Vec<_>>>()?;
        ScalingVector::new(dim, values)
    }

    /// Exact scalings of a (well-ordered) model.
    pub fn theoretical(a: &MlMatrix) -> Result<Self> {
        ScalingVector::from_fn(a.dim(), |h| scaling_of_max(a, h))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry for 0-based `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[slot(i, j, self.dim)]
    }
}

/// Row-wise vectorized `a_ij²`, `j ≥ i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquaredCoefficients {
    dim: usize,
    values: Vec<f64>,
}

impl SquaredCoefficients {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != layout_len(dim) {
            return Err(validation("squared coefficient vector has the wrong length"));
        }
        Ok(SquaredCoefficients { dim, values })
    }

    /// Upper triangle of `A` squared entrywise.
    pub fn from_matrix(a: &MlMatrix) -> Self {
        let d = a.dim();
        let mut values = Vec::with_capacity(layout_len(d));
        for i in 0..d {
            for j in i..d {
                values.push(a.get(i, j) * a.get(i, j));
            }
        }
        SquaredCoefficients { dim: d, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[slot(i, j, self.dim)]
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SquaredCoefficients) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The sparse ±1 matrix with `A² = T · S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, i8)>>,
}

impl TransformMatrix {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(validation("dimension must be at least 1"));
        }
        let mut rows = vec![Vec::new(); layout_len(d)];
        let l = |i: usize, j: usize| slot(i, j, d);
        for i in 0..d {
            for j in i..d {
                let row = &mut rows[l(i, j)];
                if i == j {
                    row.push((l(i, i), 1));
                    if i + 1 < d {
                        row.push((l(i + 1, i + 1), -1));
                    }
                } else if j + 1 < d {
                    row.push((l(i, j), 1));
                    row.push((l(j + 1, j + 1), -1));
                    row.push((l(i, j - 1), -1));
                    row.push((l(j, j), 1));
                } else {
                    row.push((l(i, d - 1), 1));
                    row.push((l(i, d - 2), -1));
                    row.push((l(d - 1, d - 1), 1));
                }
                row.sort_unstable();
            }
        }
        Ok(TransformMatrix { dim: d, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Non-zero `(column, sign)` pairs of a 0-based row.
    pub fn row(&self, r: usize) -> &[(usize, i8)] {
        &self.rows[r]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.size();
        let mut t = DMatrix::zeros(k, k);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, s) in row {
                t[(r, c)] = f64::from(s);
            }
        }
        t
    }

    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.size() {
            return Err(validation(format!(
                "expected {} entries, got {}",
                self.size(),
                s.len()
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(c, sign)| f64::from(sign) * s[c]).sum())
            .collect())
    }
}

/// `A² = T S` through the sparse transform.
pub fn recover_a2(s: &ScalingVector) -> Result<SquaredCoefficients> {
    let t = TransformMatrix::new(s.dim())?;
    SquaredCoefficients::new(s.dim(), t.apply(s.values())?)
}

/// `A²` through the row recursion: diagonal first, then each row left to
/// right, closing every row with its squared scaling.
pub fn recover_a2_recursive(s: &ScalingVector) -> Result<SquaredCoefficients> {
    let d = s.dim();
    let mut a2 = vec![0.0; layout_len(d)];
    for i in 0..d {
        a2[slot(i, i, d)] = if i + 1 < d {
            s.at(i, i) - s.at(i + 1, i + 1)
        } else {
            s.at(d - 1, d - 1)
        };
    }
    for i in 0..d.saturating_sub(1) {
        let mut row_sum = a2[slot(i, i, d)];
        for j in i + 1..d - 1 {
            let v = s.at(i, j) - s.at(j + 1, j + 1) - row_sum;
            a2[slot(i, j, d)] = v;
            row_sum += v;
        }
        a2[slot(i, d - 1, d)] = s.at(i, d - 1) - row_sum;
    }
    SquaredCoefficients::new(d, a2)
}

/// Estimated coefficients after clipping negative squares to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedCoefficients {
    /// Upper triangular `√max(a_ij², 0)`.
    pub matrix: DMatrix<f64>,
    /// 0-based rows whose recovered diagonal was not positive.
    pub nonpositive_diagonal: Vec<usize>,
    /// Number of entries that were negative before clipping.
    pub clipped: usize,
}

impl ClippedCoefficients {
    pub fn is_valid_model(&self) -> bool {
        self.nonpositive_diagonal.is_empty()
    }

    pub fn to_ml_matrix(&self) -> Result<MlMatrix> {
        MlMatrix::new(self.matrix.clone())
    }

    pub fn row_scalings(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).norm_squared())
            .collect()
    }
}

/// Entrywise `√max(·, 0)`, reshaped to an upper triangular matrix.
/// With `renormalize` each non-zero row is divided by its norm.
pub fn clip_and_sqrt(a2: &SquaredCoefficients, renormalize: bool) -> ClippedCoefficients {
    let d = a2.dim();
    let mut m = DMatrix::zeros(d, d);
    let mut clipped = 0;
    for i in 0..d {
        for j in i..d {
            let v = a2.at(i, j);
            if v < 0.0 {
                clipped += 1;
            }
            m[(i, j)] = v.max(0.0).sqrt();
        }
    }
    if renormalize {
        for i in 0..d {
            let norm = m.row(i).norm();
            if norm > 0.0 {
                for j in 0..d {
                    m[(i, j)] /= norm;
                }
            }
        }
    }
    let nonpositive_diagonal = (0..d).filter(|&i| m[(i, i)] <= 0.0).collect();
    ClippedCoefficients {
        matrix: m,
        nonpositive_diagonal,
        clipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn index_map_values() {
        assert_eq!(index_l(1, 1, 4).unwrap(), 1);
        assert_eq!(index_l(2, 2, 4).unwrap(), 5);
        assert_eq!(index_l(4, 4, 4).unwrap(), 10);
        assert_eq!(index_l(1, 4, 4).unwrap(), 4);
        assert_eq!(index_l(3, 4, 4).unwrap(), 9);
        assert!(index_l(2, 1, 4).is_err());
    }

    #[test]
    fn index_map_is_a_bijection() {
        for d in 1..12 {
            let mut seen = vec![false; layout_len(d)];
            for i in 1..=d {
                for j in i..=d {
                    let p = index_l(i, j, d).unwrap();
                    assert_eq!(slot(i - 1, j - 1, d), p - 1);
                    assert_eq!(slot_pair(p - 1, d), (i - 1, j - 1));
                    assert!(!seen[p - 1]);
                    seen[p - 1] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn transform_small_dimensions() {
        assert_eq!(TransformMatrix::new(1).unwrap().to_dense(), DMatrix::identity(1, 1));
        let t = TransformMatrix::new(2).unwrap().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[1., 0., -1., -1., 1., 1., 0., 0., 1.]);
        assert_eq!(t, expected);
    }

    #[test]
    fn two_node_recovery() {
        let s = ScalingVector::new(2, vec![1.5, 1.0, 1.0]).unwrap();
        // Layout for d = 2: (σ²_{M_12}, σ_1², σ_2²).
        let a2 = recover_a2(&s).unwrap();
        assert_abs_diff_eq!(a2.values()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a2.values()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a2.values()[2], 1.0, epsilon = 1e-15);
        assert_eq!(recover_a2_recursive(&s).unwrap(), a2);
    }

    #[test]
    fn identity_recovery() {
        for d in 1..8 {
            let s = ScalingVector::theoretical(&MlMatrix::identity(d)).unwrap();
            // σ²_{M_{i..d}} = d - i + 1 (1-based)
            for i in 0..d {
                assert_eq!(s.at(i, i), (d - i) as f64);
            }
            let a2 = recover_a2(&s).unwrap();
            assert_eq!(a2, SquaredCoefficients::from_matrix(&MlMatrix::identity(d)));
            assert_eq!(recover_a2_recursive(&s).unwrap(), a2);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(ScalingVector::new(3, vec![1.0; 5]).is_err());
    }

    #[test]
    fn clipping() {
        let a2 = SquaredCoefficients::new(2, vec![0.25, -1e-6, 1.0]).unwrap();
        let c = clip_and_sqrt(&a2, false);
        assert_eq!(c.matrix[(0, 0)], 0.5);
        assert_eq!(c.matrix[(0, 1)], 0.0);
        assert_eq!(c.clipped, 1);
        assert!(c.is_valid_model());

        let a2 = SquaredCoefficients::new(2, vec![-0.1, 0.3, 1.0]).unwrap();
        let c = clip_and_sqrt(&a2, false);
        assert_eq!(c.nonpositive_diagonal, vec![0]);
        assert!(c.to_ml_matrix().is_err());

        let a2 = SquaredCoefficients::new(2, vec![0.64, 0.5, 1.0]).unwrap();
        let c = clip_and_sqrt(&a2, false);
        assert!(c.row_scalings()[0] > 1.0);
        let r = clip_and_sqrt(&a2, true);
        assert_abs_diff_eq!(r.row_scalings()[0], 1.0, epsilon = 1e-15);
    }
}
