//! Random inputs for the property suites.

use rand::Rng;
use serde_json::json;

use crate::mmspace::{shortest_path_matrix, MMSpace};

/// Points in the unit square joined when closer than `0.5`, plus a path
/// through all points so the graph is connected. Edge lengths are Euclidean,
/// the metric is the shortest-path metric, and conductances and measure are
/// random.
pub fn random_geometric_space(rng: &mut impl Rng, n: usize) -> MMSpace {
    assert!(n >= 2, "need at least two points");
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let len = |i: usize, j: usize| {
        let (a, b) = (pts[i], pts[j]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().max(1e-3)
    };
    let mut lengths = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || len(i, j) < 0.5 {
                lengths.push((i, j, len(i, j)));
            }
        }
    }
    let dist = shortest_path_matrix(n, &lengths);
    let edges = lengths.iter().map(|&(i, j, _)| (i, j, rng.gen_range(0.2..2.0))).collect();
    let measure = random_probability(rng, n, false);
    let dist: Vec<Vec<f64>> = dist.chunks(n).map(<[f64]>::to_vec).collect();
    MMSpace::new(dist, measure, edges, None, json!({ "generator": "random_geometric", "n": n }))
        .expect("random geometric space is valid")
}

/// A probability vector; with `sparse` some entries are zero.
pub fn random_probability(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
            return v;
        }
    }
}

/// Values in `(-1, 1)`, zero on roughly a third of the points but never
/// identically zero.
pub fn random_function(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut f: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect();
    if f.iter().all(|&v| v == 0.0) {
        f[rng.gen_range(0..n)] = rng.gen_range(0.1..1.0);
    }
    f
}
