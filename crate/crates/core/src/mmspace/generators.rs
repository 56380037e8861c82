//! Model spaces.
//!
//! Geometric generators use the conductance `w = (mu(x) + mu(y)) / (2 h^2)`
//! between mesh neighbours at spacing `h`. With that choice
//! `(1/mu(x)) sum_y w(x,y) (f(x) - f(y))` is a second-order approximation of
//! `-(f'' - psi' f')`, and `w * h` at a cut edge approximates the weighted
//! perimeter density.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde_json::json;

use super::{renormalize, MMSpace};
use crate::error::{invalid, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return invalid(format!("{name} must be a positive real, got {v}"));
    }
    Ok(())
}

/// `n` equally spaced points on a circle of the given circumference.
pub fn gen_cycle(n: usize, circumference: f64) -> Result<MMSpace> {
    if n < 3 {
        return invalid(format!("cycle needs n >= 3, got {n}"));
    }
    check_positive("circumference", circumference)?;
    let h = circumference / n as f64;
    let mu = 1.0 / n as f64;
    let w = (mu + mu) / (2.0 * h * h);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            dist[i * n + j] = h * k.min(n - k) as f64;
        }
    }
    let edges = (0..n).map(|i| (i, (i + 1) % n, w)).collect();
    let label = json!({
        "generator": "cycle",
        "n": n,
        "circumference": circumference,
        "curvature_model": true,
    });
    MMSpace::from_parts(n, dist, vec![mu; n], edges, None, label)
}

/// Gaussian-weighted segment `[-half_width, half_width]` with potential
/// `psi(x) = x^2 / (2 sigma^2)` and Neumann-type end conditions.
pub fn gen_gauss_interval(n: usize, sigma: f64, half_width: f64) -> Result<MMSpace> {
    if n < 3 {
        return invalid(format!("gaussian interval needs n >= 3, got {n}"));
    }
    check_positive("sigma", sigma)?;
    check_positive("half_width", half_width)?;
    let h = 2.0 * half_width / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -half_width + h * i as f64).collect();
    let psi: Vec<f64> = xs.iter().map(|x| x * x / (2.0 * sigma * sigma)).collect();
    let mut measure: Vec<f64> = psi.iter().map(|p| (-p).exp()).collect();
    renormalize(&mut measure);
    // enforce exact mirror symmetry of the weights
    for i in 0..n / 2 {
        let m = 0.5 * (measure[i] + measure[n - 1 - i]);
        measure[i] = m;
        measure[n - 1 - i] = m;
    }
    renormalize(&mut measure);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = h * i.abs_diff(j) as f64;
        }
    }
    let edges = (0..n - 1)
        .map(|i| (i, i + 1, (measure[i] + measure[i + 1]) / (2.0 * h * h)))
        .collect();
    let label = json!({
        "generator": "gauss_interval",
        "n": n,
        "sigma": sigma,
        "half_width": half_width,
        "curvature_model": true,
    });
    MMSpace::from_parts(n, dist, measure, edges, Some(psi), label)
}

/// Two unit-conductance cliques joined through `bridge_len` intermediate
/// vertices. The path from the first clique through the bridge vertices
/// has `bridge_len` edges of conductance `bridge_weight`; the last bridge
/// vertex attaches to the second clique with conductance one. Every edge
/// has length one. Vertex `clique_size - 1` and vertex
/// `clique_size + bridge_len` are the attachment points.
pub fn gen_dumbbell(clique_size: usize, bridge_len: usize, bridge_weight: f64) -> Result<MMSpace> {
    if clique_size < 2 {
        return invalid(format!("dumbbell needs clique_size >= 2, got {clique_size}"));
    }
    if bridge_len < 1 {
        return invalid(format!("dumbbell needs bridge_len >= 1, got {bridge_len}"));
    }
    check_positive("bridge_weight", bridge_weight)?;
    let n = 2 * clique_size + bridge_len;
    let second = clique_size + bridge_len;
    let mut edges = Vec::new();
    for base in [0, second] {
        for a in 0..clique_size {
            for b in a + 1..clique_size {
                edges.push((base + a, base + b, 1.0));
            }
        }
    }
    let mut prev = clique_size - 1;
    for v in clique_size..second {
        edges.push((prev, v, bridge_weight));
        prev = v;
    }
    edges.push((prev, second, 1.0));
    let lengths: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j, _)| (i, j, 1.0)).collect();
    let dist = shortest_path_matrix(n, &lengths);
    let label = json!({
        "generator": "dumbbell",
        "clique_size": clique_size,
        "bridge_len": bridge_len,
        "bridge_weight": bridge_weight,
        "curvature_model": false,
    });
    MMSpace::from_parts(n, dist, vec![1.0 / n as f64; n], edges, None, label)
}

/// Flat torus `[0,lx) x [0,ly)` sampled on an `nx x ny` grid, uniform measure,
/// grid (L1) path metric.
pub fn gen_grid_torus(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<MMSpace> {
    if nx < 3 || ny < 3 {
        return invalid(format!("torus grid needs nx, ny >= 3, got {nx} x {ny}"));
    }
    check_positive("lx", lx)?;
    check_positive("ly", ly)?;
    let n = nx * ny;
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let mu = 1.0 / n as f64;
    let id = |i: usize, j: usize| i * ny + j;
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..nx {
        for j in 0..ny {
            edges.push((id(i, j), id((i + 1) % nx, j), mu / (hx * hx)));
            edges.push((id(i, j), id(i, (j + 1) % ny), mu / (hy * hy)));
        }
    }
    let mut dist = vec![0.0; n * n];
    for a in 0..n {
        let (ai, aj) = (a / ny, a % ny);
        for b in 0..n {
            let (bi, bj) = (b / ny, b % ny);
            let di = ai.abs_diff(bi);
            let dj = aj.abs_diff(bj);
            dist[a * n + b] = hx * di.min(nx - di) as f64 + hy * dj.min(ny - dj) as f64;
        }
    }
    let label = json!({
        "generator": "grid_torus",
        "nx": nx,
        "ny": ny,
        "lx": lx,
        "ly": ly,
        "curvature_model": true,
    });
    MMSpace::from_parts(n, dist, vec![mu; n], edges, None, label)
}

/// All-pairs shortest paths for nonnegative edge lengths (Dijkstra from every source).
pub fn shortest_path_matrix(n: usize, lengths: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j, l) in lengths {
        adj[i].push((j, l));
        adj[j].push((i, l));
    }
    let mut out = vec![f64::INFINITY; n * n];
    for s in 0..n {
        let row = &mut out[s * n..(s + 1) * n];
        row[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF64(0.0), s)));
        while let Some(Reverse((OrdF64(d), x))) = heap.pop() {
            if d > row[x] {
                continue;
            }
            for &(y, l) in &adj[x] {
                let nd = d + l;
                if nd < row[y] {
                    row[y] = nd;
                    heap.push(Reverse((OrdF64(nd), y)));
                }
            }
        }
    }
    super::symmetrize(n, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
