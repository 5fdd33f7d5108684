//! Causal order recovery from scalings of (partly rescaled) maxima.
//!
//! All algorithms consume a [`ScalingProvider`], so each one runs unchanged
//! on exact model scalings, on spectral estimates, or on Fréchet MLEs.
//!
//! Node `m` is *initial* iff `σ²(max(X_-m, a X_m)) - σ²(max X) = a² - 1`;
//! given the already ordered set `h`, `m` may come next iff
//! `σ²(max(a X_h, a X_m, X_rest)) - σ²(max X) = (a² - 1) σ²(max X_{h∪m})`.
//! Otherwise the left side is strictly smaller.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{CausalOrder, Dag, Generations};
use crate::error::{validation, Error, Result};
use crate::model::{partly_scaled_weights, scaling_of_weighted_max, MlMatrix, SampleMatrix};
use crate::spectral::{estimate_scaling_weighted, frechet_mle_weighted};

/// Source of squared scalings of weighted componentwise maxima.
pub trait ScalingProvider: Sync {
    fn dim(&self) -> usize;

    /// Squared scaling of `max_c w_c X_c` over `cols`.
    fn weighted_max(&self, cols: &[usize], weights: &[f64]) -> Result<f64>;

    /// `σ²_{M_h}`.
    fn max_scaling(&self, h: &[usize]) -> Result<f64> {
        self.weighted_max(h, &vec![1.0; h.len()])
    }

    /// `σ²` of `max(a X_h, a X_m, X_rest)` over all components.
    fn partly_scaled(&self, h: &[usize], m: usize, a: f64) -> Result<f64> {
        let (cols, weights) = partly_scaled_weights(self.dim(), h, m, a)?;
        self.weighted_max(&cols, &weights)
    }
}

/// Noise-free scalings of a known model.
#[derive(Debug, Clone, Copy)]
pub struct ExactScalings<'a>(pub &'a MlMatrix);

impl ScalingProvider for ExactScalings<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn weighted_max(&self, cols: &[usize], weights: &[f64]) -> Result<f64> {
        scaling_of_weighted_max(self.0, cols, weights)
    }
}

/// Empirical spectral measure estimates with `k` upper order statistics,
/// each scaling estimated on the columns it involves.
#[derive(Debug, Clone, Copy)]
pub struct SpectralScalings<'a> {
    pub sample: &'a SampleMatrix,
    pub k: usize,
}

impl ScalingProvider for SpectralScalings<'_> {
    fn dim(&self) -> usize {
        self.sample.ncols()
    }

    fn weighted_max(&self, cols: &[usize], weights: &[f64]) -> Result<f64> {
        estimate_scaling_weighted(self.sample, cols, weights, self.k)
    }
}

/// Fréchet(2) maximum likelihood estimates (data with exact Fréchet margins).
#[derive(Debug, Clone, Copy)]
pub struct FrechetMleScalings<'a>(pub &'a SampleMatrix);

impl ScalingProvider for FrechetMleScalings<'_> {
    fn dim(&self) -> usize {
        self.0.ncols()
    }

    fn weighted_max(&self, cols: &[usize], weights: &[f64]) -> Result<f64> {
        frechet_mle_weighted(self.0, cols, weights)
    }
}

/// Scale factor and tolerances of the reordering tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReorderConfig {
    pub a: f64,
    /// Upper tolerance for the initial node test.
    pub eps1: f64,
    /// Lower tolerance for the initial node test.
    pub eps2: f64,
    /// Two-sided tolerance for grouping a generation.
    pub eps3: f64,
}

impl ReorderConfig {
    /// Settings used for the ten-node simulation study.
    pub fn simulation() -> Self {
        ReorderConfig {
            a: 2f64.sqrt(),
            eps1: 0.1,
            eps2: 0.05,
            eps3: 0.1,
        }
    }

    /// Settings used for the seven-portfolio data set.
    pub fn data() -> Self {
        ReorderConfig {
            a: 1.01,
            eps1: 0.0045,
            eps2: 0.0045,
            eps3: 0.0045,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) || !self.a.is_finite() {
            return Err(validation(format!("scale factor a must exceed 1, got {}", self.a)));
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps3", self.eps3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(validation(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    fn a2m1(&self) -> f64 {
        self.a * self.a - 1.0
    }
}

impl Default for ReorderConfig {
    fn default() -> Self {
        ReorderConfig::simulation()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    /// Full-vector initial node test.
    InitialThreshold,
    /// Pairwise initial node test.
    InitialPairwise,
    /// Generation test with tolerance `eps3`.
    NextThreshold,
    /// Argmax selection of a single next node.
    NextArgmax,
}

/// Δ values and decision of one pass (0-based nodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPass {
    pub kind: PassKind,
    /// Nodes ordered before this pass.
    pub ordered: Vec<usize>,
    /// `(node, Δ)` for every candidate; for pairwise passes the `Δ` of the
    /// candidate is `max_i Δ_{i,m}` and `min_delta` holds `min_i Δ_{i,m}`.
    pub deltas: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_delta: Option<Vec<(usize, f64)>>,
    pub accepted: Vec<usize>,
}

/// Every pass of a run, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub passes: Vec<DeltaPass>,
}

/// Outcome of a structure learning run (0-based nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    /// Nodes in the order they were identified (causes first).
    pub discovery: Vec<usize>,
    /// Well-ordering: later-discovered nodes get smaller positions.
    /// `None` if the run stopped early.
    pub order: Option<CausalOrder>,
    /// Groups found by the threshold variant.
    pub generations: Option<Generations>,
    pub trail: DeltaReport,
    /// Every threshold pass accepted at least one node.
    pub valid: bool,
}

impl LearnResult {
    fn from_discovery(
        d: usize,
        discovery: Vec<usize>,
        generations: Option<Generations>,
        trail: DeltaReport,
    ) -> Self {
        let mut perm = vec![0; d];
        for (t, &node) in discovery.iter().enumerate() {
            perm[node] = d - 1 - t;
        }
        LearnResult {
            order: Some(CausalOrder::new(perm).expect("discovery covers every node once")),
            discovery,
            generations,
            trail,
            valid: true,
        }
    }

    /// Every node is discovered after all of its ancestors in `dag`.
    pub fn respects(&self, dag: &Dag) -> bool {
        if !self.valid || self.discovery.len() != dag.node_count() {
            return false;
        }
        let reach = dag.reachability();
        let mut pos = vec![0; dag.node_count()];
        for (t, &n) in self.discovery.iter().enumerate() {
            pos[n] = t;
        }
        (0..dag.node_count())
            .all(|i| (0..dag.node_count()).all(|j| !reach[j][i] || pos[j] < pos[i]))
    }

    /// Found groups equal the longest-path generations of `dag`.
    pub fn matches_generations(&self, dag: &Dag) -> bool {
        self.valid && self.generations.as_ref() == Some(&dag.generations())
    }
}

fn in_band(delta: f64, lower: f64, upper: f64) -> bool {
    delta >= -lower && delta <= upper
}

fn check_nodes(d: usize, nodes: &[usize]) -> Result<()> {
    if let Some(n) = nodes.iter().find(|&&n| n >= d) {
        return Err(validation(format!("node {} out of range", n + 1)));
    }
    Ok(())
}

fn initial_pass<P: ScalingProvider + ?Sized>(p: &P, cfg: &ReorderConfig) -> Result<DeltaPass> {
    cfg.validate()?;
    let d = p.dim();
    let all: Vec<usize> = (0..d).collect();
    let base = p.max_scaling(&all)?;
    let deltas = (0..d)
        .into_par_iter()
        .map(|m| Ok((m, p.partly_scaled(&[], m, cfg.a)? - base - cfg.a2m1())))
        .collect::<Result<Vec<_>>>()?;
    let accepted = deltas
        .iter()
        .filter(|(_, v)| in_band(*v, cfg.eps2, cfg.eps1))
        .map(|(m, _)| *m)
        .collect();
    Ok(DeltaPass {
        kind: PassKind::InitialThreshold,
        ordered: Vec::new(),
        deltas,
        min_delta: None,
        accepted,
    })
}

/// Nodes `m` with `-ε₂ ≤ Δ_m ≤ ε₁`, where
/// `Δ_m = σ²(max(X_-m, a X_m)) - σ²(max X) - (a² - 1)`.
pub fn initial_nodes_threshold<P: ScalingProvider + ?Sized>(
    p: &P,
    cfg: &ReorderConfig,
) -> Result<DeltaPass> {
    let pass = initial_pass(p, cfg)?;
    if pass.accepted.is_empty() {
        return Err(Error::NoInitialNode(
            "no node passed the initial node test; relax eps1/eps2".into(),
        ));
    }
    Ok(pass)
}

/// Pairwise initial node test: for each `m` and every `i`,
/// `Δ_{i,m} = σ²(max(X_i, a X_m)) - σ²(max(X_i, X_m)) - (a² - 1)`;
/// `m` is accepted iff `max_i Δ_{i,m} ≤ ε₁` and `min_i Δ_{i,m} ≥ -ε₂`.
pub fn initial_nodes_pairwise<P: ScalingProvider + ?Sized>(
    p: &P,
    cfg: &ReorderConfig,
) -> Result<DeltaPass> {
    cfg.validate()?;
    let d = p.dim();
    let rows = (0..d)
        .into_par_iter()
        .map(|m| {
            (0..d)
                .map(|i| pairwise_delta(p, i, m, cfg))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut maxes = Vec::with_capacity(d);
    let mut mins = Vec::with_capacity(d);
    let mut accepted = Vec::new();
    for (m, row) in rows.iter().enumerate() {
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        if hi <= cfg.eps1 && lo >= -cfg.eps2 {
            accepted.push(m);
        }
        maxes.push((m, hi));
        mins.push((m, lo));
    }
    if accepted.is_empty() {
        return Err(Error::NoInitialNode(
            "no node passed the pairwise initial node test; relax eps1/eps2".into(),
        ));
    }
    Ok(DeltaPass {
        kind: PassKind::InitialPairwise,
        ordered: Vec::new(),
        deltas: maxes,
        min_delta: Some(mins),
        accepted,
    })
}

/// `Δ_{i,m}` of the pairwise test.
pub fn pairwise_delta<P: ScalingProvider + ?Sized>(
    p: &P,
    i: usize,
    m: usize,
    cfg: &ReorderConfig,
) -> Result<f64> {
    let (cols, scaled, plain): (Vec<usize>, Vec<f64>, Vec<f64>) = if i == m {
        (vec![m], vec![cfg.a], vec![1.0])
    } else {
        (vec![i, m], vec![1.0, cfg.a], vec![1.0, 1.0])
    };
    Ok(p.weighted_max(&cols, &scaled)? - p.weighted_max(&cols, &plain)? - cfg.a2m1())
}

/// `Δ_m = σ²(max(a X_h, a X_m, X_rest)) - σ²(max X) - (a² - 1) σ²(max X_{h∪m})`
/// for every `m ∉ h`, ascending in `m`.
pub fn descendant_deltas<P: ScalingProvider + ?Sized>(
    p: &P,
    h: &[usize],
    cfg: &ReorderConfig,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    check_nodes(p.dim(), h)?;
    let d = p.dim();
    let all: Vec<usize> = (0..d).collect();
    let base = p.max_scaling(&all)?;
    let candidates: Vec<usize> = (0..d).filter(|m| !h.contains(m)).collect();
    candidates
        .into_par_iter()
        .map(|m| {
            let scaled = p.partly_scaled(h, m, cfg.a)?;
            let mut hm = h.to_vec();
            hm.push(m);
            hm.sort_unstable();
            let sub = p.max_scaling(&hm)?;
            Ok((m, scaled - base - cfg.a2m1() * sub))
        })
        .collect()
}

/// Unordered nodes with `|Δ_m| ≤ ε₃`.
pub fn next_generation_threshold<P: ScalingProvider + ?Sized>(
    p: &P,
    h: &[usize],
    cfg: &ReorderConfig,
) -> Result<DeltaPass> {
    let pass = next_threshold_pass(p, h, cfg)?;
    if pass.accepted.is_empty() && !pass.deltas.is_empty() {
        return Err(Error::NoInitialNode(format!(
            "no node passed the generation test after {} ordered nodes; relax eps3",
            h.len()
        )));
    }
    Ok(pass)
}

fn next_threshold_pass<P: ScalingProvider + ?Sized>(
    p: &P,
    h: &[usize],
    cfg: &ReorderConfig,
) -> Result<DeltaPass> {
    let deltas = descendant_deltas(p, h, cfg)?;
    let accepted = deltas
        .iter()
        .filter(|(_, v)| v.abs() <= cfg.eps3)
        .map(|(m, _)| *m)
        .collect();
    Ok(DeltaPass {
        kind: PassKind::NextThreshold,
        ordered: h.to_vec(),
        deltas,
        min_delta: None,
        accepted,
    })
}

/// The unordered node with the largest `Δ_m`; ties go to the smallest label.
pub fn next_node_argmax<P: ScalingProvider + ?Sized>(
    p: &P,
    h: &[usize],
    cfg: &ReorderConfig,
) -> Result<(usize, DeltaPass)> {
    let deltas = descendant_deltas(p, h, cfg)?;
    let mut best: Option<(usize, f64)> = None;
    for &(m, v) in &deltas {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((m, v));
        }
    }
    let (node, _) = best.ok_or_else(|| validation("every node is already ordered"))?;
    Ok((
        node,
        DeltaPass {
            kind: PassKind::NextArgmax,
            ordered: h.to_vec(),
            deltas,
            min_delta: None,
            accepted: vec![node],
        },
    ))
}

/// Both `i` and `j` pass the generation test given `h`; then neither is an
/// ancestor of the other.
pub fn unrelated_pair<P: ScalingProvider + ?Sized>(
    p: &P,
    h: &[usize],
    i: usize,
    j: usize,
    cfg: &ReorderConfig,
) -> Result<bool> {
    if h.contains(&i) || h.contains(&j) {
        return Err(validation("both nodes must be unordered"));
    }
    let deltas = descendant_deltas(p, h, cfg)?;
    let ok = |n: usize| {
        deltas
            .iter()
            .find(|(m, _)| *m == n)
            .is_some_and(|(_, v)| v.abs() <= cfg.eps3)
    };
    Ok(ok(i) && ok(j))
}

/// Pairwise initial node test followed by argmax selection until every
/// node is ordered. Initial nodes are ordered by ascending label.
pub fn learn_order<P: ScalingProvider + ?Sized>(p: &P, cfg: &ReorderConfig) -> Result<LearnResult> {
    let d = p.dim();
    let mut trail = DeltaReport::default();
    let mut discovery: Vec<usize> = if d == 1 {
        vec![0]
    } else {
        let pass = initial_nodes_pairwise(p, cfg)?;
        let acc = pass.accepted.clone();
        trail.passes.push(pass);
        acc
    };
    while discovery.len() < d {
        let (node, pass) = next_node_argmax(p, &discovery, cfg)?;
        trail.passes.push(pass);
        discovery.push(node);
    }
    Ok(LearnResult::from_discovery(d, discovery, None, trail))
}

/// Full-vector initial node test followed by generation tests. An empty
/// pass ends the run and marks it invalid instead of returning an error.
pub fn learn_generations<P: ScalingProvider + ?Sized>(
    p: &P,
    cfg: &ReorderConfig,
) -> Result<LearnResult> {
    let d = p.dim();
    let mut trail = DeltaReport::default();
    let first = initial_pass(p, cfg)?;
    let mut groups = vec![first.accepted.clone()];
    let mut discovery = first.accepted.clone();
    let mut valid = !first.accepted.is_empty();
    trail.passes.push(first);
    while valid && discovery.len() < d {
        let pass = next_threshold_pass(p, &discovery, cfg)?;
        if pass.accepted.is_empty() {
            valid = false;
        } else {
            groups.push(pass.accepted.clone());
            discovery.extend(&pass.accepted);
        }
        trail.passes.push(pass);
    }
    if !valid {
        return Ok(LearnResult {
            discovery,
            order: None,
            generations: None,
            trail,
            valid: false,
        });
    }
    Ok(LearnResult::from_discovery(
        d,
        discovery,
        Some(Generations(groups)),
        trail,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{path_analysis, ten_node_dag, EdgeWeights};
    use crate::model::{draw_model, standardize};
    use nalgebra::DMatrix;

    fn two_node() -> MlMatrix {
        let s = 0.5f64.sqrt();
        MlMatrix::from_rows(&[vec![s, s], vec![0.0, 1.0]]).unwrap()
    }

    fn chain() -> (Dag, MlMatrix) {
        let dag = Dag::new(3, &[(2, 1), (1, 0)]).unwrap();
        let mut c = DMatrix::identity(3, 3);
        c[(0, 1)] = 2.0;
        c[(1, 2)] = 0.5;
        let a = path_analysis(&dag, &EdgeWeights::new(&dag, c).unwrap()).unwrap();
        (dag, standardize(&a).unwrap())
    }

    #[test]
    fn two_node_initial() {
        let a = two_node();
        let cfg = ReorderConfig {
            eps1: 0.1,
            eps2: 0.1,
            ..ReorderConfig::simulation()
        };
        let pass = initial_nodes_threshold(&ExactScalings(&a), &cfg).unwrap();
        assert_eq!(pass.accepted, vec![1]);
        assert!(pass.deltas[1].1.abs() < 1e-14);
        assert!((pass.deltas[0].1 + 0.5).abs() < 1e-14);
    }

    #[test]
    fn edgeless_every_node_initial() {
        let a = MlMatrix::identity(4);
        let pass = initial_nodes_threshold(&ExactScalings(&a), &ReorderConfig::default()).unwrap();
        assert_eq!(pass.accepted, vec![0, 1, 2, 3]);
        assert!(pass.deltas.iter().all(|(_, v)| v.abs() < 1e-14));
    }

    #[test]
    fn ten_node_exact_passes() {
        let dag = ten_node_dag();
        let a = draw_model(&dag, 0).unwrap();
        let p = ExactScalings(&a);
        let cfg = ReorderConfig::simulation();
        assert_eq!(initial_nodes_threshold(&p, &cfg).unwrap().accepted, vec![9]);
        assert_eq!(next_generation_threshold(&p, &[9], &cfg).unwrap().accepted, vec![7, 8]);
        let pass = next_generation_threshold(&p, &[9, 8, 7], &cfg).unwrap();
        assert_eq!(pass.accepted, vec![4, 5, 6]);
        for (m, v) in &pass.deltas {
            if pass.accepted.contains(m) {
                assert!(v.abs() < 1e-13);
            } else {
                assert!(*v < 0.0);
            }
        }
        assert!(unrelated_pair(&p, &[9], 7, 8, &cfg).unwrap());
        assert!(unrelated_pair(&p, &[9, 8, 7], 4, 5, &cfg).unwrap());
    }

    #[test]
    fn chain_pair_is_related() {
        let (_, a) = chain();
        let p = ExactScalings(&a);
        assert!(!unrelated_pair(&p, &[2], 1, 0, &ReorderConfig::simulation()).unwrap());
        assert!(unrelated_pair(&p, &[2], 1, 2, &ReorderConfig::simulation()).is_err());
    }

    #[test]
    fn self_pair_delta_is_zero() {
        let a = two_node();
        let cfg = ReorderConfig::simulation();
        for m in 0..2 {
            assert!(pairwise_delta(&ExactScalings(&a), m, m, &cfg).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn argmax_singleton_and_chain() {
        let a = two_node();
        let (node, _) = next_node_argmax(&ExactScalings(&a), &[1], &ReorderConfig::default()).unwrap();
        assert_eq!(node, 0);
        let (dag, a) = chain();
        let r = learn_order(&ExactScalings(&a), &ReorderConfig::simulation()).unwrap();
        assert_eq!(r.discovery, vec![2, 1, 0]);
        assert!(r.respects(&dag));
        assert_eq!(r.order.unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn argmax_tie_breaks_to_smallest_label() {
        let a = MlMatrix::identity(3);
        let (node, pass) = next_node_argmax(&ExactScalings(&a), &[2], &ReorderConfig::default()).unwrap();
        assert_eq!(node, 0);
        assert_eq!(pass.deltas.len(), 2);
    }

    #[test]
    fn single_node_learn() {
        let a = MlMatrix::identity(1);
        let r = learn_order(&ExactScalings(&a), &ReorderConfig::default()).unwrap();
        assert_eq!(r.discovery, vec![0]);
        assert!(r.valid);
    }

    #[test]
    fn invalid_config_rejected() {
        let a = two_node();
        let cfg = ReorderConfig {
            a: 1.0,
            ..ReorderConfig::default()
        };
        assert!(initial_nodes_threshold(&ExactScalings(&a), &cfg).is_err());
        let cfg = ReorderConfig {
            a: 2.0,
            eps3: -0.1,
            ..ReorderConfig::default()
        };
        assert!(learn_generations(&ExactScalings(&a), &cfg).is_err());
    }

    #[test]
    fn empty_pass_marks_run_invalid() {
        let cfg = ReorderConfig {
            eps1: 0.0,
            eps2: 0.0,
            eps3: 0.0,
            a: 2.0,
        };
        let perturbed = MlMatrix::from_rows(&[vec![0.8, 0.6], vec![0.1, 1.0]]).unwrap();
        let r = learn_generations(&ExactScalings(&perturbed), &cfg).unwrap();
        assert!(!r.valid);
        assert!(r.order.is_none());
        assert!(initial_nodes_threshold(&ExactScalings(&perturbed), &cfg).is_err());
    }
}
