//! Directed acyclic graphs over nodes `0..d`, generation partitioning and
//! the path analysis that turns edge weights into ML coefficients.
//!
//! Nodes are 0-based in every API of this module. Text and JSON formats in
//! [`crate::io`] use 1-based labels.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MlMatrix;

/// A DAG given by its parent sets. An edge `j -> i` means `j ∈ pa(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG from `(parent, child)` pairs.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Graph("node count must be positive".into()));
        }
        let mut parents = vec![Vec::new(); node_count];
        let mut children = vec![Vec::new(); node_count];
        let mut seen = BTreeSet::new();
        for &(j, i) in edges {
            if j >= node_count || i >= node_count {
                return Err(Error::Graph(format!(
                    "edge {} -> {} out of range for {} nodes",
                    j + 1,
                    i + 1,
                    node_count
                )));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop at node {}", i + 1)));
            }
            if !seen.insert((j, i)) {
                return Err(Error::Graph(format!("duplicate edge {} -> {}", j + 1, i + 1)));
            }
            parents[i].push(j);
            children[j].push(i);
        }
        for p in parents.iter_mut().chain(children.iter_mut()) {
            p.sort_unstable();
        }
        let topo = kahn(&parents, &children)?;
        Ok(Dag {
            parents,
            children,
            topo,
        })
    }

    /// A graph without edges.
    pub fn edgeless(node_count: usize) -> Result<Self> {
        Dag::new(node_count, &[])
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ps) in self.parents.iter().enumerate() {
            for &j in ps {
                out.push((j, i));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// A topological order: every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn initial_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.parents[i].is_empty())
            .collect()
    }

    /// `reach[j][i]` is true iff there is a directed path of length ≥ 1 from
    /// `j` to `i`, i.e. `j ∈ an(i)`.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let d = self.node_count();
        let mut reach = vec![vec![false; d]; d];
        // Reverse topological order: descendants of a child are final before the parent.
        for &j in self.topo.iter().rev() {
            for &c in &self.children[j] {
                reach[j][c] = true;
                for i in 0..d {
                    if reach[c][i] {
                        reach[j][i] = true;
                    }
                }
            }
        }
        reach
    }

    /// Strict ancestors `an(i)`, ascending.
    pub fn ancestors(&self, i: usize) -> Vec<usize> {
        let reach = self.reachability();
        (0..self.node_count()).filter(|&j| reach[j][i]).collect()
    }

    /// Longest-path generation partition.
    pub fn generations(&self) -> Generations {
        let mut depth = vec![0usize; self.node_count()];
        for &i in &self.topo {
            for &p in &self.parents[i] {
                depth[i] = depth[i].max(depth[p] + 1);
            }
        }
        let levels = depth.iter().copied().max().unwrap_or(0) + 1;
        let mut groups = vec![Vec::new(); levels];
        for (i, &g) in depth.iter().enumerate() {
            groups[g].push(i);
        }
        Generations(groups)
    }

    /// True iff every edge `j -> i` has `j > i`.
    pub fn is_well_ordered(&self) -> bool {
        self.parents
            .iter()
            .enumerate()
            .all(|(i, ps)| ps.iter().all(|&j| j > i))
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Dag> {
        let order = CausalOrder::new(perm.to_vec())?;
        if order.len() != self.node_count() {
            return Err(Error::Validation("permutation length differs from node count".into()));
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(j, i)| (perm[j], perm[i]))
            .collect();
        Dag::new(self.node_count(), &edges)
    }

    /// A relabelling that makes the graph well-ordered: nodes of later
    /// generations get smaller labels, ascending labels within a generation.
    pub fn well_ordering(&self) -> CausalOrder {
        let gens = self.generations();
        let d = self.node_count();
        let mut perm = vec![0; d];
        let mut next = d;
        for g in gens.groups() {
            for &i in g {
                next -= 1;
                perm[i] = next;
            }
        }
        CausalOrder(perm)
    }
}

fn kahn(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    let d = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..d).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(j) = queue.pop_front() {
        order.push(j);
        for &c in &children[j] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() != d {
        return Err(Error::Graph("graph contains a directed cycle".into()));
    }
    Ok(order)
}

/// Ordered partition `G_0, G_1, …` of the node set; each group ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generations(pub Vec<Vec<usize>>);

impl Generations {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Same partition with 1-based labels.
    pub fn to_labels(&self) -> Vec<Vec<usize>> {
        self.0
            .iter()
            .map(|g| g.iter().map(|i| i + 1).collect())
            .collect()
    }
}

/// A permutation `ν` of `0..d`; `ν[i]` is the new index of node `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalOrder(Vec<usize>);

impl CausalOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Validation(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(CausalOrder(perm))
    }

    pub fn identity(d: usize) -> Self {
        CausalOrder((0..d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `inverse()[p]` is the original node placed at position `p`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }
}

/// Edge weights `c_ik`, positive exactly on `pa(i) ∪ {i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights(DMatrix<f64>);

impl EdgeWeights {
    pub fn new(dag: &Dag, weights: DMatrix<f64>) -> Result<Self> {
        let d = dag.node_count();
        if weights.nrows() != d || weights.ncols() != d {
            return Err(Error::Validation(format!(
                "weight matrix is {}x{}, graph has {} nodes",
                weights.nrows(),
                weights.ncols(),
                d
            )));
        }
        for i in 0..d {
            for k in 0..d {
                let c = weights[(i, k)];
                let expected = i == k || dag.parents(i).contains(&k);
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::Validation(format!(
                        "c[{},{}] = {c} is not a non-negative finite number",
                        i + 1,
                        k + 1
                    )));
                }
                if expected && c <= 0.0 {
                    return Err(Error::Validation(format!(
                        "c[{},{}] must be positive",
                        i + 1,
                        k + 1
                    )));
                }
                if !expected && c != 0.0 {
                    return Err(Error::Validation(format!(
                        "c[{},{}] = {c} but {} is not a parent of {}",
                        i + 1,
                        k + 1,
                        k + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(EdgeWeights(weights))
    }

    /// Unit weights on the diagonal and on every edge.
    pub fn unit(dag: &Dag) -> Self {
        let d = dag.node_count();
        let mut c = DMatrix::identity(d, d);
        for (j, i) in dag.edges() {
            c[(i, j)] = 1.0;
        }
        EdgeWeights(c)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.0[(i, k)]
    }
}

/// Max-weighted path analysis: `a_ij` is the largest product of edge
/// weights over directed paths `j -> … -> i` (times `c_jj`), `a_ii = c_ii`.
pub fn path_analysis(dag: &Dag, weights: &EdgeWeights) -> Result<MlMatrix> {
    let d = dag.node_count();
    if weights.matrix().nrows() != d {
        return Err(Error::Validation("weights do not match the graph".into()));
    }
    let mut a = DMatrix::<f64>::zeros(d, d);
    for &i in dag.topological_order() {
        a[(i, i)] = weights.get(i, i);
        for &k in dag.parents(i) {
            let c = weights.get(i, k);
            if c <= 0.0 {
                return Err(Error::Validation(format!(
                    "edge {} -> {} has non-positive weight",
                    k + 1,
                    i + 1
                )));
            }
            for j in 0..d {
                let via = c * a[(k, j)];
                if via > a[(i, j)] {
                    a[(i, j)] = via;
                }
            }
        }
    }
    MlMatrix::new(a)
}

/// The ten-node graph used throughout the simulation study, 0-based.
/// Generations (1-based): {10}, {8, 9}, {5, 6, 7}, {1, 2, 3, 4}.
pub fn ten_node_edges() -> Vec<(usize, usize)> {
    [
        (10, 9),
        (10, 8),
        (9, 7),
        (9, 6),
        (6, 2),
        (6, 3),
        (7, 4),
        (7, 3),
        (8, 5),
        (8, 6),
        (5, 1),
        (5, 2),
    ]
    .iter()
    .map(|&(j, i)| (j - 1, i - 1))
    .collect()
}

pub fn ten_node_dag() -> Dag {
    Dag::new(10, &ten_node_edges()).expect("preset graph is acyclic")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_with_shortcut() -> Dag {
        // 3 -> 2 -> 1 and 3 -> 1 (1-based)
        Dag::new(3, &[(2, 1), (1, 0), (2, 0)]).unwrap()
    }

    #[test]
    fn ten_node_generations() {
        let g = ten_node_dag().generations();
        assert_eq!(
            g.to_labels(),
            vec![vec![10], vec![8, 9], vec![5, 6, 7], vec![1, 2, 3, 4]]
        );
    }

    #[test]
    fn edgeless_single_generation() {
        let g = Dag::edgeless(3).unwrap().generations();
        assert_eq!(g.0, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn chain_generations_use_longest_path() {
        let g = chain_with_shortcut().generations();
        assert_eq!(g.to_labels(), vec![vec![3], vec![2], vec![1]]);
    }

    #[test]
    fn cycles_and_bad_edges_are_rejected() {
        assert!(matches!(Dag::new(2, &[(0, 1), (1, 0)]), Err(Error::Graph(_))));
        assert!(matches!(Dag::new(2, &[(0, 0)]), Err(Error::Graph(_))));
        assert!(matches!(Dag::new(2, &[(0, 1), (0, 1)]), Err(Error::Graph(_))));
        assert!(matches!(Dag::new(2, &[(0, 2)]), Err(Error::Graph(_))));
        assert!(matches!(Dag::new(0, &[]), Err(Error::Graph(_))));
    }

    #[test]
    fn well_ordering_checks() {
        let down = Dag::new(3, &[(2, 1), (1, 0)]).unwrap();
        let up = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(down.is_well_ordered());
        assert!(!up.is_well_ordered());
        assert!(ten_node_dag().is_well_ordered());
        assert_eq!(ten_node_dag().edge_count(), 12);
    }

    #[test]
    fn well_ordering_relabel_is_well_ordered() {
        let up = Dag::new(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let perm = up.well_ordering();
        assert!(up.relabel(perm.as_slice()).unwrap().is_well_ordered());
    }

    #[test]
    fn path_analysis_single_and_double_paths() {
        let chain = Dag::new(3, &[(2, 1), (1, 0)]).unwrap();
        let mut c = DMatrix::identity(3, 3);
        c[(0, 1)] = 2.0;
        c[(1, 2)] = 0.5;
        let a = path_analysis(&chain, &EdgeWeights::new(&chain, c.clone()).unwrap()).unwrap();
        assert_eq!(a.get(0, 2), 1.0);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(2, 0), 0.0);

        let dag = chain_with_shortcut();
        c[(0, 2)] = 0.8;
        let a = path_analysis(&dag, &EdgeWeights::new(&dag, c).unwrap()).unwrap();
        assert_eq!(a.get(0, 2), 1.0);
    }

    #[test]
    fn path_analysis_edgeless_is_identity() {
        let dag = Dag::edgeless(4).unwrap();
        let a = path_analysis(&dag, &EdgeWeights::unit(&dag)).unwrap();
        assert_eq!(a.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn inconsistent_weights_rejected() {
        let dag = Dag::new(2, &[(1, 0)]).unwrap();
        let mut c = DMatrix::identity(2, 2);
        c[(1, 0)] = 1.0; // not an edge
        assert!(EdgeWeights::new(&dag, c).is_err());
        let c = DMatrix::identity(2, 2); // edge weight missing
        assert!(EdgeWeights::new(&dag, c).is_err());
    }

    #[test]
    fn ancestors_of_ten_node_leaf() {
        let dag = ten_node_dag();
        // node 3 (1-based): parents 6, 7; ancestors 6, 7, 8, 9, 10
        let an: Vec<usize> = dag.ancestors(2).iter().map(|i| i + 1).collect();
        assert_eq!(an, vec![6, 7, 8, 9, 10]);
    }
}
