#![allow(dead_code)]

use maxlin_core::dag::Dag;
use maxlin_core::model::{draw_edge_weights, standardize, MlMatrix};
use maxlin_core::dag::path_analysis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-ordered DAG (edges `j -> i` only for `j > i`) with edge probability `p`.
pub fn random_well_ordered_dag<R: Rng>(rng: &mut R, d: usize, p: f64) -> Dag {
    let mut edges = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if rng.random_bool(p) {
                edges.push((j, i));
            }
        }
    }
    Dag::new(d, &edges).unwrap()
}

pub fn model_for(dag: &Dag, rng: &mut impl Rng) -> MlMatrix {
    let c = draw_edge_weights(dag, rng);
    standardize(&path_analysis(dag, &c).unwrap()).unwrap()
}

/// Seeded random well-ordered standardized model of dimension `d`.
pub fn random_model(seed: u64, d: usize) -> (Dag, MlMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(0.2..0.8);
    let dag = random_well_ordered_dag(&mut rng, d, p);
    let a = model_for(&dag, &mut rng);
    (dag, a)
}

/// Random permutation of `0..d`.
pub fn random_perm(seed: u64, d: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..d).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
