//! Recursive max-linear models `X = A ×max Z` with standardized Fréchet(2)
//! innovations: standardization, max-times algebra, simulation, spectral
//! atoms and the theoretical scalings of (partly rescaled) maxima.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{Dag, EdgeWeights};
use crate::error::{validation, Error, Result};

/// Tail index of every model in this crate.
pub const ALPHA: f64 = 2.0;

const ROW_NORM_TOL: f64 = 1e-12;

/// Rows simulated from one RNG stream. Fixed so that output does not depend
/// on the number of worker threads.
const SIM_BLOCK: usize = 1024;

/// ML coefficient matrix `A` (non-negative, positive diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct MlMatrix {
    a: DMatrix<f64>,
    standardized: bool,
}

impl MlMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(validation(format!(
                "coefficient matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(validation("coefficients must be finite and non-negative"));
        }
        if let Some(i) = (0..a.nrows()).find(|&i| a[(i, i)] <= 0.0) {
            return Err(validation(format!("a[{0},{0}] must be positive", i + 1)));
        }
        let standardized = rows_have_unit_norm(&a);
        Ok(MlMatrix { a, standardized })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(validation("coefficient rows must all have length d"));
        }
        MlMatrix::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        MlMatrix {
            a: DMatrix::identity(d, d),
            standardized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.a.row(i).iter().copied().collect())
            .collect()
    }

    /// Whether every row has unit Euclidean norm.
    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.a.row(i).norm()
    }

    pub fn column_norm(&self, k: usize) -> f64 {
        self.a.column(k).norm()
    }

    /// Squared scalings `σ_i² = Σ_k a_ik²`.
    pub fn row_scalings(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.a.row(i).norm_squared()).collect()
    }

    /// Rows and columns permuted together: entry `(i, j)` moves to
    /// `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        if perm.len() != d {
            return Err(validation("permutation length differs from dimension"));
        }
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                out[(perm[i], perm[j])] = self.a[(i, j)];
            }
        }
        MlMatrix::new(out)
    }

    /// `ā_jj > ā_ij` for every `j ∈ an(i)` on a well-ordered support.
    pub fn has_ancestral_dominance(&self, dag: &Dag) -> bool {
        let reach = dag.reachability();
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| !reach[j][i] || self.a[(j, j)] > self.a[(i, j)]))
    }
}

fn rows_have_unit_norm(a: &DMatrix<f64>) -> bool {
    (0..a.nrows()).all(|i| (a.row(i).norm_squared() - 1.0).abs() <= ROW_NORM_TOL)
}

/// `ā_ij = a_ij / (Σ_k a_ik^α)^{1/α}` for α = 2.
pub fn standardize(a: &MlMatrix) -> Result<MlMatrix> {
    standardize_with_index(a, ALPHA)
}

/// Row standardization for a general tail index `alpha`.
pub fn standardize_with_index(a: &MlMatrix, alpha: f64) -> Result<MlMatrix> {
    if !(alpha > 0.0) {
        return Err(validation("tail index must be positive"));
    }
    let d = a.dim();
    let mut out = a.a.clone();
    for i in 0..d {
        let mass: f64 = a.a.row(i).iter().map(|v| v.powf(alpha)).sum();
        if mass <= 0.0 {
            return Err(validation(format!("row {} is zero", i + 1)));
        }
        let norm = mass.powf(1.0 / alpha);
        for j in 0..d {
            out[(i, j)] = a.a[(i, j)] / norm;
        }
    }
    MlMatrix::new(out)
}

/// `(C ×max D)_ij = max_k c_ik d_kj`.
pub fn max_matrix_product(c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.ncols() != d.nrows() {
        return Err(validation(format!(
            "inner dimensions differ: {}x{} times {}x{}",
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    Ok(DMatrix::from_fn(c.nrows(), d.ncols(), |i, j| {
        (0..c.ncols())
            .map(|k| c[(i, k)] * d[(k, j)])
            .fold(0.0, f64::max)
    }))
}

/// `A ×max z` for a single innovation vector.
pub fn max_times_vec(a: &MlMatrix, z: &[f64], out: &mut [f64]) {
    let d = a.dim();
    for (i, o) in out.iter_mut().enumerate().take(d) {
        let mut m = 0.0f64;
        for (k, zk) in z.iter().enumerate() {
            let v = a.a[(i, k)] * zk;
            if v > m {
                m = v;
            }
        }
        *o = m;
    }
}

/// Observations as rows of non-negative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Row-major data; entries must be finite and non-negative.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(validation("sample must have at least one row and one column"));
        }
        if data.len() != rows * cols {
            return Err(validation(format!(
                "expected {} values for a {rows}x{cols} sample, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(validation(format!(
                "entry at row {}, column {} is {} (must be finite and non-negative)",
                pos / cols + 1,
                pos % cols + 1,
                data[pos]
            )));
        }
        Ok(SampleMatrix { rows, cols, data })
    }

    /// Like [`SampleMatrix::new`] but allows negative values (raw data
    /// before [`crate::spectral::negative_part`] or a rank transform).
    pub fn new_signed(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(validation("sample shape does not match data length"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(validation("sample contains non-finite values"));
        }
        Ok(SampleMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(validation("ragged sample rows"));
        }
        SampleMatrix::new(n, d, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.data[l * self.cols..(l + 1) * self.cols]
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.data[l * self.cols + i]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.rows).map(|l| self.get(l, i)).collect()
    }

    pub fn is_non_negative(&self) -> bool {
        self.data.iter().all(|v| *v >= 0.0)
    }

    /// Columns reordered so that output column `perm[i]` holds input column `i`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.cols {
            return Err(validation("permutation length differs from column count"));
        }
        let mut data = vec![0.0; self.data.len()];
        for l in 0..self.rows {
            for i in 0..self.cols {
                data[l * self.cols + perm[i]] = self.get(l, i);
            }
        }
        Ok(SampleMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Column `c` multiplied by `factor > 0`.
    pub fn scale_column(&self, c: usize, factor: f64) -> Self {
        let mut out = self.clone();
        for l in 0..self.rows {
            out.data[l * self.cols + c] *= factor;
        }
        out
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SampleMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        SampleMatrix { rows, cols, data }
    }
}

/// Innovation law: i.i.d. standard Fréchet(2), `P(Z ≤ x) = exp(-x^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub dim: usize,
    pub seed: u64,
}

/// One standard Fréchet(2) variate by inverse transform.
pub fn frechet2<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return (-u.ln()).powf(-0.5);
        }
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Draws `n` i.i.d. rows of `X = A ×max Z`.
///
/// Rows are produced in blocks with one ChaCha stream per block, so the
/// result depends on `seed` only, not on how rayon splits the work.
pub fn simulate(a: &MlMatrix, seed: u64, n: usize) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(validation("sample size must be at least 1"));
    }
    let d = a.dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(SIM_BLOCK * d)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut rng = block_rng(seed, b as u64);
            let mut z = vec![0.0; d];
            for row in chunk.chunks_mut(d) {
                for zk in z.iter_mut() {
                    *zk = frechet2(&mut rng);
                }
                max_times_vec(a, &z, row);
            }
        });
    Ok(SampleMatrix::from_parts_unchecked(n, d, data))
}

/// Same as [`simulate`] with the innovation dimension checked against `A`.
pub fn simulate_with(a: &MlMatrix, spec: &InnovationSpec, n: usize) -> Result<SampleMatrix> {
    if spec.dim != a.dim() {
        return Err(validation(format!(
            "innovation dimension {} differs from model dimension {}",
            spec.dim,
            a.dim()
        )));
    }
    simulate(a, spec.seed, n)
}

/// Edge weights with unit diagonal and squared edge weights drawn uniformly
/// from `{2/1, 2/2, …, 2/8}`.
pub fn draw_edge_weights<R: Rng + ?Sized>(dag: &Dag, rng: &mut R) -> EdgeWeights {
    let d = dag.node_count();
    let mut c = DMatrix::identity(d, d);
    for (j, i) in dag.edges() {
        let denom = rng.random_range(1..=8u32) as f64;
        c[(i, j)] = (2.0 / denom).sqrt();
    }
    EdgeWeights::new(dag, c).expect("drawn weights match the graph")
}

/// Standardized coefficient matrix for a graph with drawn edge weights.
pub fn draw_model(dag: &Dag, seed: u64) -> Result<MlMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = draw_edge_weights(dag, &mut rng);
    standardize(&crate::dag::path_analysis(dag, &c)?)
}

fn check_index(a: &MlMatrix, i: usize) -> Result<()> {
    if i >= a.dim() {
        return Err(validation(format!(
            "node {} out of range for dimension {}",
            i + 1,
            a.dim()
        )));
    }
    Ok(())
}

/// `σ_ij² = (A Aᵀ)_ij`; for `i == j` the squared scaling `σ_i²`.
pub fn scaling_pair(a: &MlMatrix, i: usize, j: usize) -> Result<f64> {
    check_index(a, i)?;
    check_index(a, j)?;
    Ok(a.a.row(i).dot(&a.a.row(j)))
}

/// `σ²` of `max_{c} w_c X_c` over the listed columns: `Σ_k max_c w_c² a_ck²`.
pub fn scaling_of_weighted_max(a: &MlMatrix, cols: &[usize], weights: &[f64]) -> Result<f64> {
    if cols.is_empty() {
        return Err(validation("node subset must be non-empty"));
    }
    if cols.len() != weights.len() {
        return Err(validation("one weight per node required"));
    }
    for &c in cols {
        check_index(a, c)?;
    }
    let d = a.dim();
    Ok((0..d)
        .map(|k| {
            cols.iter()
                .zip(weights)
                .map(|(&c, w)| {
                    let v = w * a.a[(c, k)];
                    v * v
                })
                .fold(0.0, f64::max)
        })
        .sum())
}

/// `σ²_{M_h} = Σ_k max_{i∈h} a_ik²`.
pub fn scaling_of_max(a: &MlMatrix, h: &[usize]) -> Result<f64> {
    scaling_of_weighted_max(a, h, &vec![1.0; h.len()])
}

/// Scaling of `max(a·X_h, a·X_m, X_rest)` over all `d` components.
pub fn scaling_partly_scaled(a: &MlMatrix, h: &[usize], m: usize, factor: f64) -> Result<f64> {
    let (cols, weights) = partly_scaled_weights(a.dim(), h, m, factor)?;
    scaling_of_weighted_max(a, &cols, &weights)
}

/// Columns `0..d` with weight `factor` on `h ∪ {m}` and 1 elsewhere.
pub fn partly_scaled_weights(
    d: usize,
    h: &[usize],
    m: usize,
    factor: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if !(factor > 1.0) {
        return Err(validation(format!("scale factor must exceed 1, got {factor}")));
    }
    if m >= d || h.iter().any(|&i| i >= d) {
        return Err(validation("node out of range"));
    }
    if h.contains(&m) {
        return Err(validation(format!("node {} is already in h", m + 1)));
    }
    let cols: Vec<usize> = (0..d).collect();
    let weights = cols
        .iter()
        .map(|c| if *c == m || h.contains(c) { factor } else { 1.0 })
        .collect();
    Ok((cols, weights))
}

/// One atom of the discrete spectral measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub mass: f64,
    pub direction: Vec<f64>,
}

/// Atoms `(‖a_k‖², a_k/‖a_k‖)`, one per column of `A`.
pub fn spectral_atoms(a: &MlMatrix) -> Result<Vec<SpectralAtom>> {
    (0..a.dim())
        .map(|k| {
            let col = a.a.column(k);
            let norm = col.norm();
            if norm <= 0.0 {
                return Err(validation(format!("column {} is zero", k + 1)));
            }
            Ok(SpectralAtom {
                mass: norm * norm,
                direction: col.iter().map(|v| v / norm).collect(),
            })
        })
        .collect()
}

/// `E[f(ω)]` under the normalized spectral measure.
pub fn spectral_expectation<F: Fn(&[f64]) -> f64>(a: &MlMatrix, f: F) -> Result<f64> {
    let atoms = spectral_atoms(a)?;
    let total: f64 = atoms.iter().map(|t| t.mass).sum();
    Ok(atoms.iter().map(|t| t.mass * f(&t.direction)).sum::<f64>() / total)
}

/// Extreme dependence measure `E[ω_i ω_j] = σ_ij² / Σ σ_k²`.
pub fn edm(a: &MlMatrix, i: usize, j: usize) -> Result<f64> {
    check_index(a, i)?;
    check_index(a, j)?;
    spectral_expectation(a, |w| w[i] * w[j])
}

impl TryFrom<Vec<Vec<f64>>> for MlMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MlMatrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_node() -> MlMatrix {
        let s = 0.5f64.sqrt();
        MlMatrix::from_rows(&[vec![s, s], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn standardize_rows() {
        let id = MlMatrix::identity(3);
        assert_eq!(standardize(&id).unwrap(), id);
        let a = MlMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let s = standardize(&a).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 1), 0.5f64.sqrt(), epsilon = 1e-15);
        let a = MlMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let s = standardize(&a).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 1), 0.8, epsilon = 1e-15);
        assert!(s.is_standardized());
        assert!(!a.is_standardized());
    }

    #[test]
    fn zero_diagonal_rejected() {
        assert!(MlMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn max_product_examples() {
        let z = DMatrix::from_column_slice(2, 1, &[3.0, 5.0]);
        assert_eq!(max_matrix_product(&DMatrix::identity(2, 2), &z).unwrap(), z);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let ones = DMatrix::from_element(2, 1, 1.0);
        assert_eq!(
            max_matrix_product(&c, &ones).unwrap(),
            DMatrix::from_column_slice(2, 1, &[2.0, 1.0])
        );
        let zero = DMatrix::zeros(2, 1);
        assert_eq!(max_matrix_product(&c, &zero).unwrap(), zero);
        assert!(max_matrix_product(&c, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn simulation_is_deterministic_and_bounded() {
        let a = MlMatrix::from_rows(&[vec![1.0, 0.7], vec![0.0, 1.0]]).unwrap();
        let x = simulate(&a, 7, 5000).unwrap();
        assert_eq!(x, simulate(&a, 7, 5000).unwrap());
        assert_ne!(x, simulate(&a, 8, 5000).unwrap());
        for l in 0..x.nrows() {
            // X_1 ≥ a_12 X_2 / a_22 holds since X_2 = Z_2 here.
            assert!(x.get(l, 0) >= 0.7 * x.get(l, 1));
        }
    }

    #[test]
    fn simulation_prefix_is_stable() {
        let a = MlMatrix::identity(3);
        let short = simulate(&a, 11, 100).unwrap();
        let long = simulate(&a, 11, 3000).unwrap();
        assert_eq!(short.data(), &long.data()[..300]);
    }

    #[test]
    fn theoretical_scalings() {
        let a = two_node();
        assert_abs_diff_eq!(scaling_pair(&a, 0, 1).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(scaling_pair(&a, 0, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(scaling_pair(&MlMatrix::identity(3), 0, 2).unwrap(), 0.0);
        assert!(scaling_pair(&a, 0, 2).is_err());

        assert_abs_diff_eq!(scaling_of_max(&a, &[0, 1]).unwrap(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(scaling_of_max(&a, &[0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(scaling_of_max(&a, &[]).is_err());
    }

    #[test]
    fn partly_scaled_examples() {
        let a = two_node();
        let f = 2.0f64.sqrt();
        let full = scaling_of_max(&a, &[0, 1]).unwrap();
        let initial = scaling_partly_scaled(&a, &[], 1, f).unwrap();
        assert_abs_diff_eq!(initial, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(initial - full, f * f - 1.0, epsilon = 1e-14);
        let other = scaling_partly_scaled(&a, &[], 0, f).unwrap();
        assert_abs_diff_eq!(other, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(other - full, 0.5, epsilon = 1e-14);
        assert!(scaling_partly_scaled(&a, &[0], 0, f).is_err());
        assert!(scaling_partly_scaled(&a, &[], 0, 1.0).is_err());
        // Limit of factor 1: plain maximum over all nodes.
        let near = scaling_partly_scaled(&a, &[], 0, 1.0 + 1e-12).unwrap();
        assert_abs_diff_eq!(near, full, epsilon = 1e-10);
    }

    #[test]
    fn spectral_atoms_and_expectations() {
        let atoms = spectral_atoms(&MlMatrix::identity(3)).unwrap();
        for (k, atom) in atoms.iter().enumerate() {
            assert_eq!(atom.mass, 1.0);
            assert_eq!(atom.direction[k], 1.0);
        }
        let a = two_node();
        let atoms = spectral_atoms(&a).unwrap();
        assert_abs_diff_eq!(atoms[0].mass, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(atoms[1].mass, 1.5, epsilon = 1e-15);
        let total: f64 = atoms.iter().map(|t| t.mass).sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-15);

        assert_abs_diff_eq!(spectral_expectation(&a, |_| 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let sq = spectral_expectation(&a, |w| w.iter().map(|v| v * v).sum()).unwrap();
        assert_abs_diff_eq!(sq, 1.0, epsilon = 1e-15);
        let e = edm(&a, 0, 1).unwrap();
        assert_abs_diff_eq!(e, scaling_pair(&a, 0, 1).unwrap() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn permutation_moves_rows_and_columns() {
        let a = two_node();
        let p = a.permuted(&[1, 0]).unwrap();
        assert_eq!(p.get(1, 0), a.get(0, 1));
        assert_eq!(p.get(0, 0), a.get(1, 1));
    }
}
