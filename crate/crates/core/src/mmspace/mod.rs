//! Finite weighted metric-measure spaces.
//!
//! An [`MMSpace`] carries an explicit distance matrix, a strictly positive
//! probability vector and a list of symmetric conductances. The conductances
//! define the Dirichlet form used by the Laplacian and by the discrete
//! boundary measure; the distance matrix is the metric used by every
//! neighbourhood, separation and transport computation. The two are kept
//! independent so that arbitrary mm-spaces (no geometric structure) are as
//! valid as discretized model manifolds.

mod generators;
mod io;
mod subset;

use std::sync::{Arc, OnceLock};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

pub use generators::{gen_cycle, gen_dumbbell, gen_gauss_interval, gen_grid_torus, shortest_path_matrix};
pub use io::{load_space, save_space, space_from_json, space_to_json};
pub use subset::{Subset, SubsetFamily};

/// Absolute slack allowed in the triangle inequality and metric symmetry.
pub const METRIC_TOL: f64 = 1e-9;
/// Absolute slack allowed in the total mass of the measure.
pub const MASS_TOL: f64 = 1e-12;

const TRIANGLE_EXHAUSTIVE_MAX_N: usize = 64;
const TRIANGLE_SAMPLES: usize = 200_000;

/// Undirected edge with conductance `w > 0`; stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Open (`d < r`) or closed (`d <= r`) neighbourhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodMode {
    Open,
    Closed,
}

/// A finite metric-measure space with conductances and an optional potential.
#[derive(Debug, Clone)]
pub struct MMSpace {
    n: usize,
    dist: Vec<f64>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    psi: Option<Vec<f64>>,
    label: Value,
    adjacency: Vec<Vec<(usize, f64)>>,
    spectrum: OnceLock<Arc<Spectrum>>,
}

impl MMSpace {
    /// Builds a space and validates every invariant: symmetric metric with
    /// zero diagonal and the triangle inequality, a positive probability
    /// vector and well-formed conductances.
    pub fn new(
        dist: Vec<Vec<f64>>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
        psi: Option<Vec<f64>>,
        label: Value,
    ) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::InvariantViolation {
                field: "n",
                reason: "space must contain at least one point".into(),
            });
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvariantViolation {
                field: "dist",
                reason: format!("expected a {n}x{n} matrix"),
            });
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        Self::from_parts(n, flat, measure, edges, psi, label)
    }

    pub(crate) fn from_parts(
        n: usize,
        dist: Vec<f64>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
        psi: Option<Vec<f64>>,
        label: Value,
    ) -> Result<Self> {
        validate_measure(&measure)?;
        validate_metric(n, &dist)?;
        let dist = symmetrize(n, dist);
        if let Some(p) = &psi {
            if p.len() != n || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvariantViolation {
                    field: "psi",
                    reason: format!("expected {n} finite values"),
                });
            }
        }
        let edges = normalize_edges(n, edges)?;
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.i].push((e.j, e.w));
            adjacency[e.j].push((e.i, e.w));
        }
        Ok(Self {
            n,
            dist,
            measure,
            edges,
            psi,
            label,
            adjacency,
            spectrum: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn dist_row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `i` with their conductances.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn psi(&self) -> Option<&[f64]> {
        self.psi.as_deref()
    }

    pub fn label(&self) -> &Value {
        &self.label
    }

    /// Name of the generator that produced this space, if any.
    pub fn generator(&self) -> Option<&str> {
        self.label.get("generator").and_then(Value::as_str)
    }

    /// True for discretizations of weighted manifolds with nonnegative
    /// Bakry-Emery Ricci curvature (flat circle, flat torus, Gaussian segment).
    pub fn is_curvature_model(&self) -> bool {
        self.label
            .get("curvature_model")
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    pub fn subset_measure(&self, a: &Subset) -> f64 {
        a.indices().iter().map(|&i| self.measure[i]).sum()
    }

    pub fn full_set(&self) -> Subset {
        Subset::full(self.n)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Distance from every point to the set `a` (`+inf` when `a` is empty).
    pub fn dist_to_set(&self, a: &Subset) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.n];
        for &x in a.indices() {
            for (o, &d) in out.iter_mut().zip(self.dist_row(x)) {
                if d < *o {
                    *o = d;
                }
            }
        }
        out
    }

    /// Distance between two sets, `+inf` if either is empty.
    pub fn set_distance(&self, a: &Subset, b: &Subset) -> f64 {
        let mut best = f64::INFINITY;
        for &x in a.indices() {
            for &y in b.indices() {
                best = best.min(self.dist(x, y));
            }
        }
        best
    }

    /// Open or closed `r`-neighbourhood of `a`.
    pub fn neighborhood(&self, a: &Subset, r: f64, mode: NeighborhoodMode) -> Subset {
        let d = self.dist_to_set(a);
        let members = (0..self.n).filter(|&y| match mode {
            NeighborhoodMode::Open => d[y] < r,
            NeighborhoodMode::Closed => d[y] <= r,
        });
        Subset::from_sorted(self.n, members.collect())
    }

    /// Induced sub-space on `a` with renormalized measure and the edges inside `a`.
    pub fn restrict(&self, a: &Subset) -> Result<MMSpace> {
        if a.universe() != self.n {
            return Err(Error::InvalidArgument(format!(
                "subset universe {} does not match space size {}",
                a.universe(),
                self.n
            )));
        }
        if a.is_empty() {
            return Err(Error::InvalidArgument("cannot restrict to an empty set".into()));
        }
        let idx = a.indices();
        let m = idx.len();
        let mass = self.subset_measure(a);
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut dist = Vec::with_capacity(m * m);
        for &i in idx {
            dist.extend(idx.iter().map(|&j| self.dist(i, j)));
        }
        let mut measure: Vec<f64> = idx.iter().map(|&i| self.measure[i] / mass).collect();
        renormalize(&mut measure);
        let edges = self
            .edges
            .iter()
            .filter(|e| pos[e.i] != usize::MAX && pos[e.j] != usize::MAX)
            .map(|e| (pos[e.i], pos[e.j], e.w))
            .collect();
        let psi = self
            .psi
            .as_ref()
            .map(|p| idx.iter().map(|&i| p[i]).collect());
        let label = serde_json::json!({
            "generator": "restriction",
            "parent": self.label,
            "indices": idx,
        });
        MMSpace::from_parts(m, dist, measure, edges, psi, label)
    }

    /// Connected components of the conductance graph.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut head = 0;
            while head < members.len() {
                let x = members[head];
                head += 1;
                for &(y, _) in &self.adjacency[x] {
                    if comp[y] == usize::MAX {
                        comp[y] = id;
                        members.push(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub(crate) fn spectrum_cache(&self) -> &OnceLock<Arc<Spectrum>> {
        &self.spectrum
    }

    #[cfg(test)]
    pub(crate) fn dist_flat(&self) -> &[f64] {
        &self.dist
    }
}

/// Rescales a positive vector so that it sums to one, compensating rounding.
pub(crate) fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

fn validate_measure(measure: &[f64]) -> Result<()> {
    if let Some((i, &m)) = measure
        .iter()
        .enumerate()
        .find(|(_, m)| !(m.is_finite() && **m > 0.0))
    {
        return Err(Error::InvariantViolation {
            field: "measure",
            reason: format!("entry {i} is {m}, every point must carry positive mass"),
        });
    }
    let total: f64 = measure.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvariantViolation {
            field: "measure",
            reason: format!("total mass {total} differs from 1"),
        });
    }
    Ok(())
}

/// Replaces `d(x, y)` and `d(y, x)` by their minimum so that ties between
/// distances are exact.
pub(crate) fn symmetrize(n: usize, mut d: Vec<f64>) -> Vec<f64> {
    for i in 0..n {
        for j in i + 1..n {
            let m = d[i * n + j].min(d[j * n + i]);
            d[i * n + j] = m;
            d[j * n + i] = m;
        }
    }
    d
}

fn validate_metric(n: usize, d: &[f64]) -> Result<()> {
    let bad = |reason: String| Err(Error::InvariantViolation { field: "dist", reason });
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return bad(format!("diagonal entry {i} is {}", d[i * n + i]));
        }
        for j in 0..n {
            let v = d[i * n + j];
            if !v.is_finite() || v < 0.0 {
                return bad(format!("entry ({i},{j}) = {v} is not a finite nonnegative real"));
            }
            if (v - d[j * n + i]).abs() > METRIC_TOL {
                return bad(format!("asymmetric entries ({i},{j}) = {v} and ({j},{i}) = {}", d[j * n + i]));
            }
            if i != j && v == 0.0 {
                return bad(format!("distinct points {i} and {j} at distance zero"));
            }
        }
    }
    let check = |x: usize, y: usize, z: usize| -> Result<()> {
        let lhs = d[x * n + z];
        let rhs = d[x * n + y] + d[y * n + z];
        if lhs > rhs + METRIC_TOL {
            return bad(format!("triangle inequality fails: d({x},{z}) = {lhs} > d({x},{y}) + d({y},{z}) = {rhs}"));
        }
        Ok(())
    };
    if n <= TRIANGLE_EXHAUSTIVE_MAX_N {
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    check(x, y, z)?;
                }
            }
        }
    } else {
        // splitmix-style deterministic sampling of triples
        let mut state: u64 = 0x9E37_79B9_7F4A_7C15 ^ n as u64;
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((z ^ (z >> 31)) % n as u64) as usize
        };
        for _ in 0..TRIANGLE_SAMPLES {
            let (x, y, z) = (next(), next(), next());
            check(x, y, z)?;
        }
    }
    Ok(())
}

fn normalize_edges(n: usize, raw: Vec<(usize, usize, f64)>) -> Result<Vec<Edge>> {
    let bad = |reason: String| Err(Error::InvariantViolation { field: "edges", reason });
    let mut edges: Vec<Edge> = Vec::with_capacity(raw.len());
    for (a, b, w) in raw {
        if a >= n || b >= n {
            return bad(format!("edge ({a},{b}) out of range for {n} points"));
        }
        if a == b {
            return bad(format!("self-loop at {a}"));
        }
        if !(w.is_finite() && w > 0.0) {
            return bad(format!("edge ({a},{b}) has non-positive conductance {w}"));
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        edges.push(Edge { i, j, w });
    }
    edges.sort_by_key(|e| (e.i, e.j));
    let mut out: Vec<Edge> = Vec::with_capacity(edges.len());
    for e in edges {
        match out.last() {
            Some(last) if last.i == e.i && last.j == e.j => {
                if (last.w - e.w).abs() > 1e-12 * last.w.max(e.w) {
                    return bad(format!(
                        "edge ({},{}) listed with conflicting conductances {} and {}",
                        e.i, e.j, last.w, e.w
                    ));
                }
            }
            _ => out.push(e),
        }
    }
    Ok(out)
}
