//! Non-parametric scaling estimators built on the empirical spectral
//! measure, plus the Fréchet(2) maximum likelihood estimator and the
//! marginal transforms applied to raw data.
//!
//! Every estimator thresholds at the `k`-th largest radius `R^(k)` and keeps
//! all observations with `R ≥ R^(k)`. The divisor stays `k` even when ties
//! push the number of exceedances above `k`. Observations with zero radius
//! are dropped before ranking.

use crate::error::{validation, Error, Result};
use crate::model::SampleMatrix;

/// `⌈√n⌉`, the default number of upper order statistics.
pub fn default_k(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

/// Documented choice for the 2285-observation portfolio series.
pub const K_PORTFOLIO: usize = 50;
/// Documented choice for the 9544-observation dietary interview data.
pub const K_DIETARY: usize = 100;

/// Observations in polar coordinates restricted to a column subset.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSample {
    subset: Vec<usize>,
    radii: Vec<f64>,
    angles: Vec<f64>,
    k: usize,
    threshold: f64,
}

impl PolarSample {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Radii of the retained (non-zero) observations.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Angle of the `l`-th retained observation, one entry per subset column.
    pub fn angle(&self, l: usize) -> &[f64] {
        let q = self.subset.len();
        &self.angles[l * q..(l + 1) * q]
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `R^(k)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn exceedances(&self) -> usize {
        self.radii.iter().filter(|&&r| r >= self.threshold).count()
    }

    /// `(|q|/k) Σ_ℓ max_{j∈h} ω_ℓj² 1{R_ℓ ≥ R^(k)}` for `h ⊆ q`.
    pub fn max_scaling(&self, h: &[usize]) -> Result<f64> {
        let pos = self.positions(h)?;
        let q = self.subset.len();
        let total: f64 = (0..self.len())
            .filter(|&l| self.radii[l] >= self.threshold)
            .map(|l| {
                let w = self.angle(l);
                pos.iter().map(|&p| w[p] * w[p]).fold(0.0, f64::max)
            })
            .sum();
        Ok(q as f64 * total / self.k as f64)
    }

    /// Empirical `E[f(ω)]` over the exceedances, divided by `k`.
    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let total: f64 = (0..self.len())
            .filter(|&l| self.radii[l] >= self.threshold)
            .map(|l| f(self.angle(l)))
            .sum();
        total / self.k as f64
    }

    fn positions(&self, h: &[usize]) -> Result<Vec<usize>> {
        if h.is_empty() {
            return Err(validation("node subset must be non-empty"));
        }
        h.iter()
            .map(|c| {
                self.subset.iter().position(|s| s == c).ok_or_else(|| {
                    validation(format!("node {} is not in the polar subset", c + 1))
                })
            })
            .collect()
    }
}

fn check_subset(x: &SampleMatrix, q: &[usize]) -> Result<()> {
    if q.is_empty() {
        return Err(validation("node subset must be non-empty"));
    }
    for (n, &c) in q.iter().enumerate() {
        if c >= x.ncols() {
            return Err(validation(format!(
                "node {} out of range for {} columns",
                c + 1,
                x.ncols()
            )));
        }
        if q[..n].contains(&c) {
            return Err(validation(format!("node {} listed twice", c + 1)));
        }
    }
    Ok(())
}

fn labels(q: &[usize]) -> Vec<usize> {
    q.iter().map(|c| c + 1).collect()
}

/// Value of the `k`-th largest radius; `radii` is scratch space.
fn kth_largest(radii: &mut [f64], k: usize) -> f64 {
    let idx = radii.len() - k;
    let (_, v, _) = radii.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *v
}

fn check_k(k: usize, positive: usize, q: &[usize]) -> Result<()> {
    if k == 0 {
        return Err(Error::Threshold {
            subset: labels(q),
            message: "k must be at least 1".into(),
        });
    }
    if positive < k {
        return Err(Error::Threshold {
            subset: labels(q),
            message: format!("only {positive} observations with positive radius, k = {k}"),
        });
    }
    Ok(())
}

/// `R_ℓ = ‖X_ℓq‖₂`, `ω_ℓ = X_ℓq / R_ℓ`, zero radii dropped, `R^(k)` set.
pub fn polar_decompose(x: &SampleMatrix, q: &[usize], k: usize) -> Result<PolarSample> {
    check_subset(x, q)?;
    let mut radii = Vec::with_capacity(x.nrows());
    let mut angles = Vec::with_capacity(x.nrows() * q.len());
    for l in 0..x.nrows() {
        let row = x.row(l);
        let r = q.iter().map(|&c| row[c] * row[c]).sum::<f64>().sqrt();
        if r > 0.0 {
            radii.push(r);
            angles.extend(q.iter().map(|&c| row[c] / r));
        }
    }
    check_k(k, radii.len(), q)?;
    let threshold = kth_largest(&mut radii.clone(), k);
    Ok(PolarSample {
        subset: q.to_vec(),
        radii,
        angles,
        k,
        threshold,
    })
}

/// Spectral estimate of the squared scaling of `max_c w_c X_c` over `cols`.
///
/// The polar decomposition uses the rescaled vector `(w_c X_c)_c`. The
/// prefactor is its spectral mass `Σ_c w_c²` (components are standardized).
pub fn estimate_scaling_weighted(
    x: &SampleMatrix,
    cols: &[usize],
    weights: &[f64],
    k: usize,
) -> Result<f64> {
    check_subset(x, cols)?;
    if cols.len() != weights.len() {
        return Err(validation("one weight per node required"));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(validation("weights must be positive and finite"));
    }
    let mut radii = Vec::with_capacity(x.nrows());
    let mut maxsq = Vec::with_capacity(x.nrows());
    for l in 0..x.nrows() {
        let row = x.row(l);
        let mut r2 = 0.0;
        let mut m2 = 0.0f64;
        for (&c, &w) in cols.iter().zip(weights) {
            let v = w * row[c];
            let v2 = v * v;
            r2 += v2;
            m2 = m2.max(v2);
        }
        if r2 > 0.0 {
            radii.push(r2.sqrt());
            maxsq.push(m2 / r2);
        }
    }
    check_k(k, radii.len(), cols)?;
    let threshold = kth_largest(&mut radii.clone(), k);
    let total: f64 = radii
        .iter()
        .zip(&maxsq)
        .filter(|(r, _)| **r >= threshold)
        .map(|(_, m)| m)
        .sum();
    let mass: f64 = weights.iter().map(|w| w * w).sum();
    Ok(mass * total / k as f64)
}

/// `σ̂²_{M_q} = (|q|/k) Σ_ℓ max_{j∈q} ω_ℓj² 1{R_ℓ ≥ R^(k)}` with the polar
/// decomposition restricted to `q`.
pub fn estimate_scaling_subset(x: &SampleMatrix, q: &[usize], k: usize) -> Result<f64> {
    estimate_scaling_weighted(x, q, &vec![1.0; q.len()], k)
}

/// Estimator on the full `d`-dimensional polar decomposition:
/// `(d/k) Σ_ℓ max_{j∈h} ω_ℓj² 1{R_ℓ ≥ R^(k)}`.
pub fn estimate_scaling_full(x: &SampleMatrix, h: &[usize], k: usize) -> Result<f64> {
    let all: Vec<usize> = (0..x.ncols()).collect();
    polar_decompose(x, &all, k)?.max_scaling(h)
}

/// Scaling of `max(a X_h, a X_m, X_rest)`: columns `h ∪ {m}` multiplied by
/// `a`, re-decomposed over all `d` columns, prefactor
/// `((a²-1)(|h|+1) + d) / k`.
pub fn estimate_scaling_rescaled(
    x: &SampleMatrix,
    h: &[usize],
    m: usize,
    a: f64,
    k: usize,
) -> Result<f64> {
    let (cols, weights) = crate::model::partly_scaled_weights(x.ncols(), h, m, a)?;
    estimate_scaling_weighted(x, &cols, &weights, k)
}

/// `σ̂² = ((1/n) Σ m_ℓ^-2)^-1`, the Fréchet(2) MLE of the squared scale.
pub fn frechet_mle_scaling(maxima: &[f64]) -> Result<f64> {
    if maxima.is_empty() {
        return Err(validation("no observations"));
    }
    if let Some(v) = maxima.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(validation(format!(
            "Fréchet MLE needs positive finite values, got {v}"
        )));
    }
    let mean_inv_sq = maxima.iter().map(|m| 1.0 / (m * m)).sum::<f64>() / maxima.len() as f64;
    Ok(1.0 / mean_inv_sq)
}

/// Fréchet MLE for the squared scale of `max_c w_c X_c`.
pub fn frechet_mle_weighted(x: &SampleMatrix, cols: &[usize], weights: &[f64]) -> Result<f64> {
    check_subset(x, cols)?;
    if cols.len() != weights.len() {
        return Err(validation("one weight per node required"));
    }
    let mut acc = 0.0;
    for l in 0..x.nrows() {
        let row = x.row(l);
        let m = cols
            .iter()
            .zip(weights)
            .map(|(&c, w)| w * row[c])
            .fold(0.0, f64::max);
        if !(m > 0.0) {
            return Err(validation(format!(
                "Fréchet MLE needs positive maxima, row {} has {m}",
                l + 1
            )));
        }
        acc += 1.0 / (m * m);
    }
    Ok(x.nrows() as f64 / acc)
}

/// Column-wise empirical integral transform to Fréchet(2) margins:
/// `(-log(rank_≤ / (n+1)))^{-1/2}` with `rank_≤` counting values `≤ x`.
pub fn empirical_frechet_transform(x: &SampleMatrix) -> Result<SampleMatrix> {
    let n = x.nrows();
    let d = x.ncols();
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let mut sorted = x.column(c);
        sorted.sort_by(f64::total_cmp);
        for l in 0..n {
            let v = x.get(l, c);
            let rank = sorted.partition_point(|s| *s <= v);
            let u = rank as f64 / (n as f64 + 1.0);
            out[l * d + c] = (-u.ln()).powf(-0.5);
        }
    }
    SampleMatrix::new(n, d, out)
}

/// Entrywise `max(-x, 0)`: losses become positive.
pub fn negative_part(x: &SampleMatrix) -> SampleMatrix {
    x.map(|v| (-v).max(0.0))
}
