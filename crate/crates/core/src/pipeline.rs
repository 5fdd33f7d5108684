//! End-to-end commands: simulate, learn, study, extremes, transform.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{build_wm, transform_covariance, CovarianceMatrix};
use crate::dag::{path_analysis, Dag, EdgeWeights};
use crate::error::{validation, Result};
use crate::identification::{
    clip_and_sqrt, recover_a2, slot_subset, ScalingVector, SquaredCoefficients, TransformMatrix,
};
use crate::io::{self, LabeledEntry, LearnJson, Samples};
use crate::learning::{
    learn_generations, learn_order, ExactScalings, FrechetMleScalings, LearnResult, ReorderConfig,
    ScalingProvider, SpectralScalings,
};
use crate::model::{draw_edge_weights, simulate, standardize, MlMatrix, SampleMatrix};
use crate::spectral::{default_k, empirical_frechet_transform, negative_part};

/// Number of largest pairwise radii kept by [`cmd_extremes`] by default.
pub const DEFAULT_EXTREMES: usize = 50;

/// SplitMix64 finalizer over `(base, a, b)`; gives independent per-run seeds.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------- simulate

/// How the edge weight matrix `C` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPolicy {
    /// `c_ii = 1`, `c_ij² ~ U{2/1, …, 2/8}` on edges.
    Paper,
    /// All weights 1.
    Unit,
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Standardized coefficient matrix.
    pub a: MlMatrix,
    pub samples: Samples,
}

/// Draws weights, builds the standardized model and simulates `n` rows.
pub fn cmd_simulate(dag: &Dag, policy: &WeightPolicy, seed: u64, n: usize) -> Result<Simulation> {
    let a = build_model(dag, policy, derive_seed(seed, 0, 0))?;
    let data = simulate(&a, derive_seed(seed, 0, 1), n)?;
    Ok(Simulation {
        a,
        samples: Samples::with_default_headers(data),
    })
}

pub fn build_model(dag: &Dag, policy: &WeightPolicy, seed: u64) -> Result<MlMatrix> {
    let weights = match policy {
        WeightPolicy::Paper => draw_edge_weights(dag, &mut ChaCha8Rng::seed_from_u64(seed)),
        WeightPolicy::Unit => EdgeWeights::unit(dag),
        WeightPolicy::Explicit(c) => EdgeWeights::new(dag, c.clone())?,
    };
    standardize(&path_analysis(dag, &weights)?)
}

// ---------------------------------------------------------------- learn

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// Empirical spectral measure with `k` upper order statistics.
    #[default]
    Spectral,
    /// Fréchet(2) MLE, for data with exact standard Fréchet margins.
    FrechetMle,
    /// Theoretical scalings of a known model.
    Exact,
}

impl ScalingMode {
    pub fn name(self) -> &'static str {
        match self {
            ScalingMode::Spectral => "spectral",
            ScalingMode::FrechetMle => "frechet-mle",
            ScalingMode::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderAlgorithm {
    /// Pairwise initial node test, then one node per step by argmax.
    #[default]
    Argmax,
    /// Threshold tests returning whole generations.
    Threshold,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Transforms {
    /// Replace each value by `max(-x, 0)`.
    pub negate: bool,
    /// Rank transform every column to Fréchet(2) margins.
    pub frechet2: bool,
}

impl Transforms {
    pub fn apply(&self, x: &SampleMatrix) -> Result<SampleMatrix> {
        let x = if self.negate { negative_part(x) } else { x.clone() };
        if self.frechet2 {
            empirical_frechet_transform(&x)
        } else {
            if !x.is_non_negative() {
                return Err(validation(
                    "samples contain negative values; use negate and/or frechet2",
                ));
            }
            Ok(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    /// Upper order statistics; `⌈√n⌉` when unset.
    pub k: Option<usize>,
    pub reorder: ReorderConfig,
    pub algorithm: OrderAlgorithm,
    pub transforms: Transforms,
    /// Divide each row of `Â` by its norm after clipping.
    pub renormalize: bool,
    /// DOT output drops edges with `â_ij` below this value.
    pub prune: f64,
    /// Add plug-in `W_M` and `T W_M Tᵀ` to the report.
    pub covariance: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            k: None,
            reorder: ReorderConfig::simulation(),
            algorithm: OrderAlgorithm::Argmax,
            transforms: Transforms::default(),
            renormalize: false,
            prune: 0.0,
            covariance: false,
        }
    }
}

/// Learned order plus estimated coefficients.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub learn: LearnResult,
    /// Scaling vector in learned labels.
    pub scalings: ScalingVector,
    pub a2: SquaredCoefficients,
    /// Upper triangular `Â` in learned labels.
    pub a_hat_ordered: DMatrix<f64>,
    /// `Â` in input labels.
    pub a_hat: DMatrix<f64>,
    pub clipped: usize,
    /// Input labels whose recovered diagonal was not positive.
    pub nonpositive_diagonal: Vec<usize>,
}

impl Estimate {
    /// `Σ_j â_ij²` per input node, unrounded.
    pub fn row_scalings(&self) -> Vec<f64> {
        (0..self.a_hat.nrows())
            .map(|i| self.a_hat.row(i).norm_squared())
            .collect()
    }

    pub fn max_abs_error(&self, a: &MlMatrix) -> f64 {
        (&self.a_hat - a.matrix()).amax()
    }

    /// `max |â_ij² - a_ij²|`; unlike [`Self::max_abs_error`] not inflated
    /// by the square root near zero.
    pub fn max_sq_error(&self, a: &MlMatrix) -> f64 {
        let sq = |m: &DMatrix<f64>| m.map(|v| v * v);
        (sq(&self.a_hat) - sq(a.matrix())).amax()
    }
}

/// Learns an order from `p`, then estimates the scaling vector in that
/// order and inverts it.
pub fn estimate<P: ScalingProvider + ?Sized>(
    p: &P,
    cfg: &ReorderConfig,
    algorithm: OrderAlgorithm,
    renormalize: bool,
) -> Result<Estimate> {
    let learn = match algorithm {
        OrderAlgorithm::Argmax => learn_order(p, cfg)?,
        OrderAlgorithm::Threshold => learn_generations(p, cfg)?,
    };
    let order = learn.order.clone().ok_or_else(|| {
        crate::error::Error::NoInitialNode(
            "a threshold pass accepted no node; relax the tolerances".into(),
        )
    })?;
    let d = p.dim();
    let inv = order.inverse();
    let scalings = ScalingVector::from_fn(d, |subset| {
        let nodes: Vec<usize> = subset.iter().map(|&q| inv[q]).collect();
        p.max_scaling(&nodes)
    })?;
    let a2 = recover_a2(&scalings)?;
    let clipped = clip_and_sqrt(&a2, renormalize);
    let nu = order.as_slice();
    let a_hat = DMatrix::from_fn(d, d, |i, j| clipped.matrix[(nu[i], nu[j])]);
    Ok(Estimate {
        nonpositive_diagonal: clipped.nonpositive_diagonal.iter().map(|&q| inv[q]).collect(),
        clipped: clipped.clipped,
        a_hat_ordered: clipped.matrix,
        a_hat,
        learn,
        scalings,
        a2,
    })
}

/// Result of [`cmd_learn`]. `elapsed` is kept out of the written files.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub names: Vec<String>,
    pub n: usize,
    pub k: Option<usize>,
    pub mode: ScalingMode,
    pub options: LearnOptions,
    pub estimate: Estimate,
    pub covariance: Option<(CovarianceMatrix, CovarianceMatrix)>,
    pub elapsed: Duration,
}

fn covariance_of(est: &Estimate) -> Result<Option<(CovarianceMatrix, CovarianceMatrix)>> {
    if !est.nonpositive_diagonal.is_empty() {
        return Ok(None);
    }
    let a = standardize(&MlMatrix::new(est.a_hat_ordered.clone())?)?;
    let w = build_wm(&a)?;
    let tw = transform_covariance(&TransformMatrix::new(a.dim())?, &w)?;
    Ok(Some((w, tw)))
}

/// Transforms, learns the order with spectral estimates and estimates `Â`.
pub fn cmd_learn(samples: &Samples, opts: &LearnOptions) -> Result<RunReport> {
    let start = Instant::now();
    opts.reorder.validate()?;
    let x = opts.transforms.apply(&samples.data)?;
    let n = x.nrows();
    let k = opts.k.unwrap_or_else(|| default_k(n));
    if k == 0 || k > n {
        return Err(validation(format!("k must be in 1..={n}, got {k}")));
    }
    let p = SpectralScalings { sample: &x, k };
    let est = estimate(&p, &opts.reorder, opts.algorithm, opts.renormalize)?;
    let covariance = if opts.covariance { covariance_of(&est)? } else { None };
    Ok(RunReport {
        names: samples.headers.clone(),
        n,
        k: Some(k),
        mode: ScalingMode::Spectral,
        options: *opts,
        estimate: est,
        covariance,
        elapsed: start.elapsed(),
    })
}

/// [`cmd_learn`] with theoretical scalings of `a` injected.
pub fn cmd_learn_exact(a: &MlMatrix, opts: &LearnOptions) -> Result<RunReport> {
    let start = Instant::now();
    let est = estimate(&ExactScalings(a), &opts.reorder, opts.algorithm, opts.renormalize)?;
    let covariance = if opts.covariance { covariance_of(&est)? } else { None };
    Ok(RunReport {
        names: (1..=a.dim()).map(|i| format!("X{i}")).collect(),
        n: 0,
        k: None,
        mode: ScalingMode::Exact,
        options: *opts,
        estimate: est,
        covariance,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReportJson {
    pub names: Vec<String>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    pub options: LearnOptions,
    pub learn: LearnJson,
    /// Rows of `Â` in input labels.
    pub a_hat: Vec<Vec<f64>>,
    /// Rows of `Â` in learned labels (upper triangular).
    pub a_hat_ordered: Vec<Vec<f64>>,
    pub row_scalings: Vec<f64>,
    pub scalings: Vec<LabeledEntry>,
    pub a2: Vec<LabeledEntry>,
    pub clipped: usize,
    pub nonpositive_diagonal: Vec<usize>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl RunReport {
    pub fn to_json(&self) -> RunReportJson {
        let e = &self.estimate;
        RunReportJson {
            names: self.names.clone(),
            n: self.n,
            k: self.k,
            options: self.options,
            learn: LearnJson::new(&e.learn, &self.options.reorder, self.mode.name()),
            a_hat: rows_of(&e.a_hat),
            a_hat_ordered: rows_of(&e.a_hat_ordered),
            row_scalings: e.row_scalings(),
            scalings: io::scaling_vector_entries(&e.scalings),
            a2: io::squared_coefficient_entries(&e.a2),
            clipped: e.clipped,
            nonpositive_diagonal: e.nonpositive_diagonal.iter().map(|v| v + 1).collect(),
        }
    }

    /// Writes `report.json`, `a_hat.csv`, `graph.dot` and, if computed,
    /// `wm.csv`, `wm.json`, `a2_cov.csv`, `a2_cov.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_json(&dir.join("report.json"), &self.to_json())?;
        io::write_string(&dir.join("a_hat.csv"), &io::matrix_to_csv(&self.estimate.a_hat))?;
        io::write_string(
            &dir.join("graph.dot"),
            &io::to_dot(&self.estimate.a_hat, &self.names, self.options.prune),
        )?;
        if let Some((w, tw)) = &self.covariance {
            io::write_string(&dir.join("wm.csv"), &io::covariance_to_csv(w))?;
            io::write_json(&dir.join("wm.json"), &io::CovarianceJson::from_covariance(w))?;
            io::write_string(&dir.join("a2_cov.csv"), &io::covariance_to_csv(tw))?;
            io::write_json(&dir.join("a2_cov.json"), &io::CovarianceJson::from_covariance(tw))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- study

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightProtocol {
    /// Fresh edge weights for every run.
    #[default]
    Redraw,
    /// One weight draw shared by all runs and sample sizes.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub reorder: ReorderConfig,
    pub mode: ScalingMode,
    pub weights: WeightProtocol,
    /// Used by the spectral mode; `⌈√n⌉` when unset.
    pub k: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            sizes: vec![2000, 3000, 5000, 10000],
            runs: 100,
            seed: 0,
            reorder: ReorderConfig::simulation(),
            mode: ScalingMode::FrechetMle,
            weights: WeightProtocol::Redraw,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub runs: usize,
    pub valid: usize,
    pub correct: usize,
    /// `correct / valid`, 0 if no run was valid.
    pub success_ratio: f64,
}

/// Outcome of one study run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub valid: bool,
    pub correct: bool,
}

/// Threshold learning on one simulated data set; failures count as invalid.
pub fn study_run(dag: &Dag, cfg: &StudyConfig, n: usize, run: usize) -> Result<RunOutcome> {
    let model_seed = match cfg.weights {
        WeightProtocol::Redraw => derive_seed(cfg.seed, run as u64, 0),
        WeightProtocol::Fixed => derive_seed(cfg.seed, u64::MAX, 0),
    };
    let a = build_model(dag, &WeightPolicy::Paper, model_seed)?;
    let result = match cfg.mode {
        ScalingMode::Exact => learn_generations(&ExactScalings(&a), &cfg.reorder),
        mode => {
            let x = simulate(&a, derive_seed(cfg.seed, run as u64, n as u64 + 1), n)?;
            if mode == ScalingMode::FrechetMle {
                learn_generations(&FrechetMleScalings(&x), &cfg.reorder)
            } else {
                let k = cfg.k.unwrap_or_else(|| default_k(n));
                learn_generations(&SpectralScalings { sample: &x, k }, &cfg.reorder)
            }
        }
    };
    Ok(match result {
        Ok(r) => RunOutcome {
            valid: r.valid,
            correct: r.matches_generations(dag),
        },
        Err(_) => RunOutcome {
            valid: false,
            correct: false,
        },
    })
}

/// Valid and correct counts per sample size. Runs execute in parallel
/// with seeds derived from `(seed, run, n)`.
pub fn cmd_study(dag: &Dag, cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.reorder.validate()?;
    if cfg.runs == 0 || cfg.sizes.is_empty() {
        return Err(validation("study needs at least one run and one sample size"));
    }
    cfg.sizes
        .iter()
        .map(|&n| {
            let outcomes = (0..cfg.runs)
                .into_par_iter()
                .map(|run| study_run(dag, cfg, n, run))
                .collect::<Result<Vec<_>>>()?;
            let valid = outcomes.iter().filter(|o| o.valid).count();
            let correct = outcomes.iter().filter(|o| o.correct).count();
            Ok(StudyRow {
                n,
                runs: cfg.runs,
                valid,
                correct,
                success_ratio: if valid == 0 { 0.0 } else { correct as f64 / valid as f64 },
            })
        })
        .collect()
}

pub fn study_to_csv(rows: &[StudyRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
        .map_err(|e| validation(e.to_string()))
}

// ---------------------------------------------------------------- extremes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRow {
    pub source: String,
    pub i: usize,
    pub j: usize,
    pub rank: usize,
    pub x_i: f64,
    pub x_j: f64,
    pub radius: f64,
}

fn top_pairs(x: &SampleMatrix, source: &str, pairs: &[(usize, usize)], count: usize) -> Vec<ExtremeRow> {
    let mut out = Vec::new();
    for &(i, j) in pairs {
        let mut idx: Vec<(f64, usize)> = (0..x.nrows())
            .map(|l| (x.get(l, i).hypot(x.get(l, j)), l))
            .collect();
        idx.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (rank, &(radius, l)) in idx.iter().take(count).enumerate() {
            out.push(ExtremeRow {
                source: source.to_owned(),
                i: i + 1,
                j: j + 1,
                rank: rank + 1,
                x_i: x.get(l, i),
                x_j: x.get(l, j),
                radius,
            });
        }
    }
    out
}

/// Observations with the `count` largest pairwise radii for each pair
/// (all pairs when `pairs` is empty). With `a_hat`, adds the same number of
/// rows simulated from `Â ×max Z`. Fewer rows than `count` keeps all of them.
pub fn cmd_extremes(
    x: &SampleMatrix,
    pairs: &[(usize, usize)],
    count: usize,
    a_hat: Option<&MlMatrix>,
    seed: u64,
) -> Result<Vec<ExtremeRow>> {
    let d = x.ncols();
    let all: Vec<(usize, usize)>;
    let pairs = if pairs.is_empty() {
        all = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        &all[..]
    } else {
        pairs
    };
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= d || *j >= d || i == j) {
        return Err(validation(format!("bad pair ({}, {})", i + 1, j + 1)));
    }
    if count > x.nrows() {
        log::warn!("requested {count} extremes but only {} rows; emitting all", x.nrows());
    }
    let mut rows = top_pairs(x, "real", pairs, count);
    if let Some(a) = a_hat {
        if a.dim() != d {
            return Err(validation("Â dimension differs from the data"));
        }
        let sim = simulate(a, seed, x.nrows())?;
        rows.extend(top_pairs(&sim, "simulated", pairs, count));
    }
    Ok(rows)
}

pub fn extremes_to_csv(rows: &[ExtremeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
        .map_err(|e| validation(e.to_string()))
}

// ---------------------------------------------------------------- transform

pub fn cmd_transform(samples: &Samples, t: &Transforms) -> Result<Samples> {
    Ok(Samples {
        headers: samples.headers.clone(),
        data: t.apply(&samples.data)?,
    })
}

/// Layout subsets in learned labels, mapped to input labels (1-based).
pub fn subsets_in_input_labels(order: &crate::dag::CausalOrder) -> Vec<Vec<usize>> {
    let d = order.len();
    let inv = order.inverse();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let mut s: Vec<usize> = slot_subset(i, j, d).iter().map(|&q| inv[q] + 1).collect();
            s.sort_unstable();
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::ten_node_dag;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn simulate_is_deterministic() {
        let dag = ten_node_dag();
        let s1 = cmd_simulate(&dag, &WeightPolicy::Paper, 5, 300).unwrap();
        let s2 = cmd_simulate(&dag, &WeightPolicy::Paper, 5, 300).unwrap();
        assert_eq!(s1.a, s2.a);
        assert_eq!(s1.samples, s2.samples);
        assert!(s1.a.has_ancestral_dominance(&dag));
    }

    #[test]
    fn edgeless_simulation_is_identity() {
        let dag = Dag::edgeless(3).unwrap();
        let s = cmd_simulate(&dag, &WeightPolicy::Paper, 1, 10).unwrap();
        assert_eq!(s.a, MlMatrix::identity(3));
    }

    #[test]
    fn exact_learn_reproduces_model() {
        let dag = ten_node_dag();
        let a = build_model(&dag, &WeightPolicy::Paper, 0).unwrap();
        for alg in [OrderAlgorithm::Argmax, OrderAlgorithm::Threshold] {
            let opts = LearnOptions {
                algorithm: alg,
                ..LearnOptions::default()
            };
            let r = cmd_learn_exact(&a, &opts).unwrap();
            assert!(r.estimate.max_sq_error(&a) < 1e-12);
            assert!(r.estimate.max_abs_error(&a) < 1e-7);
            assert!(r.estimate.learn.respects(&dag));
        }
    }

    #[test]
    fn single_column_learn() {
        let s = Samples::with_default_headers(SampleMatrix::new(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let r = cmd_learn(&s, &LearnOptions::default()).unwrap();
        assert_eq!(r.estimate.a_hat, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn negative_samples_need_transform() {
        let s = Samples::with_default_headers(SampleMatrix::new_signed(2, 1, vec![1.0, -2.0]).unwrap());
        assert!(cmd_learn(&s, &LearnOptions::default()).is_err());
        let t = cmd_transform(&s, &Transforms { negate: true, frechet2: false }).unwrap();
        assert_eq!(t.data.data(), &[0.0, 2.0]);
    }

    #[test]
    fn exact_study_single_run() {
        let dag = ten_node_dag();
        let cfg = StudyConfig {
            sizes: vec![100],
            runs: 1,
            mode: ScalingMode::Exact,
            weights: WeightProtocol::Fixed,
            ..StudyConfig::default()
        };
        let rows = cmd_study(&dag, &cfg).unwrap();
        assert_eq!(rows[0].runs, 1);
        let csv = study_to_csv(&rows).unwrap();
        assert!(csv.starts_with("n,runs,valid,correct,success_ratio\n"));
    }

    #[test]
    fn extremes_clamp_and_order() {
        let x = SampleMatrix::from_rows(&[vec![1.0, 0.0, 0.5], vec![3.0, 4.0, 0.0]]).unwrap();
        let rows = cmd_extremes(&x, &[], 5, None, 0).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].radius, 5.0);
        assert_eq!((rows[0].i, rows[0].j), (1, 2));
        assert!(cmd_extremes(&x, &[(0, 0)], 5, None, 0).is_err());
        let a = MlMatrix::identity(3);
        let rows = cmd_extremes(&x, &[(0, 2)], 1, Some(&a), 0).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].source, "simulated");
    }
}
