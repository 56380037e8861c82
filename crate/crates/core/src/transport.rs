//! Couplings between measures on one space: quadratic transport cost,
//! partial transport within a distance, the Prohorov-type distance, and
//! relative entropy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mmspace::MMSpace;

pub const PROHOROV_MAX_N: usize = 15;
pub const MARGINAL_TOL: f64 = 1e-9;
const FLOW_EPS: f64 = 1e-15;
const DEFICIT_EPS: f64 = 1e-12;

/// Nonnegative `n x n` plan, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub n: usize,
    pub plan: Vec<f64>,
}

impl Coupling {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plan[x * self.n + y]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n).map(|y| (0..self.n).map(|x| self.get(x, y)).sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.plan.iter().sum()
    }

    /// `sum pi(x, y) d(x, y)^p`.
    pub fn cost(&self, space: &MMSpace, p: i32) -> f64 {
        let n = self.n;
        (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .map(|(x, y)| self.get(x, y) * space.dist(x, y).powi(p))
            .sum()
    }

    /// Largest distance carrying mass above `tol`.
    pub fn reach(&self, space: &MMSpace, tol: f64) -> f64 {
        let n = self.n;
        (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .filter(|&(x, y)| self.get(x, y) > tol)
            .map(|(x, y)| space.dist(x, y))
            .fold(0.0, f64::max)
    }
}

/// A plan with row sums `<= mu` and column sums `<= nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTransport {
    pub plan: Coupling,
}

impl PartialTransport {
    pub fn deficiency(&self) -> f64 {
        (1.0 - self.plan.total()).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Entropy {
    Finite(f64),
    Infinite,
}

impl Entropy {
    pub fn is_finite(&self) -> bool {
        matches!(self, Entropy::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            Entropy::Finite(v) => *v,
            Entropy::Infinite => f64::INFINITY,
        }
    }
}

pub fn check_probability(n: usize, v: &[f64], name: &str) -> Result<()> {
    if v.len() != n {
        return invalid(format!("{name} has {} entries, expected {n}", v.len()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return invalid(format!("{name}[{i}] = {} is not a nonnegative number", v[i]));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > MARGINAL_TOL {
        return invalid(format!("{name} sums to {s}, expected 1"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    Ok(())
}

fn check_marginals(c: &Coupling, mu: &[f64], nu: &[f64], exact: bool) -> Result<()> {
    let over = |got: f64, want: f64| if exact { (got - want).abs() } else { got - want };
    for (side, sums, want) in [("row", c.row_sums(), mu), ("column", c.col_sums(), nu)] {
        for (i, (g, w)) in sums.iter().zip(want).enumerate() {
            if over(*g, *w) > MARGINAL_TOL {
                return Err(Error::InvariantViolation {
                    field: "coupling",
                    reason: format!("{side} {i} sums to {g}, marginal is {w}"),
                });
            }
        }
    }
    Ok(())
}

/// Optimal quadratic transport cost `sqrt(min sum pi d^2)` and a coupling
/// attaining it.
pub fn wasserstein2(space: &MMSpace, mu: &[f64], nu: &[f64]) -> Result<(f64, Coupling)> {
    let n = space.n();
    check_probability(n, mu, "mu")?;
    check_probability(n, nu, "nu")?;
    let mut net = Network::bipartite(mu, nu, |x, y| Some(space.dist(x, y).powi(2)));
    net.min_cost_flow();
    let c = net.plan(n);
    check_marginals(&c, mu, nu, true)?;
    Ok((c.cost(space, 2).max(0.0).sqrt(), c))
}

/// Largest partial transport moving mass only between points at distance
/// `<= eps`.
pub fn max_partial_transport(space: &MMSpace, mu: &[f64], nu: &[f64], eps: f64) -> Result<PartialTransport> {
    let n = space.n();
    check_probability(n, mu, "mu")?;
    check_probability(n, nu, "nu")?;
    let mut net = Network::bipartite(mu, nu, |x, y| (space.dist(x, y) <= eps).then_some(0.0));
    net.max_flow();
    let plan = net.plan(n);
    check_marginals(&plan, mu, nu, false)?;
    Ok(PartialTransport { plan })
}

/// Distinct distances with 0 prepended: on `[levels[i], levels[i+1])` every
/// closed `eps`-relation is the same.
fn levels(space: &MMSpace) -> Vec<f64> {
    let n = space.n();
    let mut d: Vec<f64> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).map(|(x, y)| space.dist(x, y)).collect();
    d.push(0.0);
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

/// Smallest `eps` with `deficit(level) <= lambda eps`, where `deficit` is
/// constant between consecutive levels.
fn first_admissible(levels: &[f64], lambda: f64, mut deficit: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    for (i, &lo) in levels.iter().enumerate() {
        let mut def = deficit(lo)?;
        if def <= DEFICIT_EPS {
            def = 0.0;
        }
        let eps = lo.max(def / lambda);
        if levels.get(i + 1).is_none_or(|&hi| eps < hi) {
            return Ok(eps);
        }
    }
    unreachable!("every mass moves at the largest distance")
}

/// Smallest `eps` admitting a partial transport along distances `<= eps`
/// whose deficiency is at most `lambda eps`.
pub fn transportation_distance(space: &MMSpace, mu: &[f64], nu: &[f64], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_probability(space.n(), mu, "mu")?;
    check_probability(space.n(), nu, "nu")?;
    first_admissible(&levels(space), lambda, |eps| {
        Ok(max_partial_transport(space, mu, nu, eps)?.deficiency())
    })
}

pub fn prohorov_distance(space: &MMSpace, mu: &[f64], nu: &[f64], lambda: f64) -> Result<f64> {
    prohorov_distance_with_cap(space, mu, nu, lambda, PROHOROV_MAX_N)
}

/// Smallest `eps` with `mu(C_eps(A)) >= nu(A) - lambda eps` for every `A`,
/// by enumeration of all subsets.
pub fn prohorov_distance_with_cap(space: &MMSpace, mu: &[f64], nu: &[f64], lambda: f64, cap: usize) -> Result<f64> {
    check_lambda(lambda)?;
    let n = space.n();
    check_probability(n, mu, "mu")?;
    check_probability(n, nu, "nu")?;
    if n > cap.min(24) {
        return Err(Error::CapExceeded {
            what: "subset enumeration",
            detail: format!("n = {n} exceeds the cap of {cap}"),
            hint: "use transportation_distance, which equals it",
        });
    }
    let full = 1usize << n;
    let mut nu_of = vec![0.0; full];
    let mut mu_of = vec![0.0; full];
    for a in 1..full {
        let low = a.trailing_zeros() as usize;
        nu_of[a] = nu_of[a & (a - 1)] + nu[low];
        mu_of[a] = mu_of[a & (a - 1)] + mu[low];
    }
    let mut hull = vec![0usize; full];
    first_admissible(&levels(space), lambda, |eps| {
        let ball: Vec<usize> = (0..n)
            .map(|y| (0..n).filter(|&x| space.dist(x, y) <= eps).fold(0, |m, x| m | 1 << x))
            .collect();
        let mut worst = 0.0f64;
        for a in 1..full {
            hull[a] = hull[a & (a - 1)] | ball[a.trailing_zeros() as usize];
            worst = worst.max(nu_of[a] - mu_of[hull[a]]);
        }
        Ok(worst)
    })
}

/// `sum nu log(nu / reference)`, infinite when `nu` charges a point the
/// reference does not.
pub fn relative_entropy(reference: &[f64], nu: &[f64]) -> Result<Entropy> {
    let n = reference.len();
    check_probability(n, reference, "reference")?;
    check_probability(n, nu, "nu")?;
    let mut ent = 0.0;
    for (&m, &v) in reference.iter().zip(nu) {
        if v == 0.0 {
            continue;
        }
        if m == 0.0 {
            return Ok(Entropy::Infinite);
        }
        ent += v * (v / m).ln();
    }
    Ok(Entropy::Finite(ent.max(0.0)))
}

// ------------------------------------------------------------------ flows

struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Residual network `source -> x -> y -> sink` over `n + n + 2` nodes.
struct Network {
    n: usize,
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
    middle: Vec<(usize, usize, usize)>,
}

impl Network {
    fn bipartite(mu: &[f64], nu: &[f64], cost: impl Fn(usize, usize) -> Option<f64>) -> Self {
        let n = mu.len();
        let mut net = Network { n, arcs: Vec::new(), out: vec![Vec::new(); 2 * n + 2], middle: Vec::new() };
        let (s, t) = (2 * n, 2 * n + 1);
        for x in 0..n {
            net.add(s, x, mu[x], 0.0);
            net.add(n + x, t, nu[x], 0.0);
        }
        for x in 0..n {
            for y in 0..n {
                if let Some(c) = cost(x, y) {
                    let a = net.add(x, n + y, f64::INFINITY, c);
                    net.middle.push((x, y, a));
                }
            }
        }
        net
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc { to: from, cap: 0.0, cost: -cost });
        self.out[from].push(id);
        self.out[to].push(id + 1);
        id
    }

    fn push(&mut self, path: &[usize], amount: f64) {
        for &a in path {
            self.arcs[a].cap -= amount;
            self.arcs[a ^ 1].cap += amount;
        }
    }

    /// Arcs of the path ending at `t` recorded in `via`, and its bottleneck.
    fn trace(&self, via: &[Option<usize>], t: usize) -> (Vec<usize>, f64) {
        let mut path = Vec::new();
        let mut v = t;
        let mut amount = f64::INFINITY;
        while let Some(a) = via[v] {
            path.push(a);
            amount = amount.min(self.arcs[a].cap);
            v = self.arcs[a ^ 1].to;
        }
        (path, amount)
    }

    /// Successive shortest paths (Bellman-Ford queue; residual costs may be
    /// negative).
    fn min_cost_flow(&mut self) {
        let nodes = 2 * self.n + 2;
        let (s, t) = (2 * self.n, 2 * self.n + 1);
        loop {
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via: Vec<Option<usize>> = vec![None; nodes];
            let mut queued = vec![false; nodes];
            let mut queue = std::collections::VecDeque::from([s]);
            dist[s] = 0.0;
            while let Some(u) = queue.pop_front() {
                queued[u] = false;
                for &a in &self.out[u] {
                    let arc = &self.arcs[a];
                    let d = dist[u] + arc.cost;
                    if arc.cap > FLOW_EPS && d < dist[arc.to] - 1e-13 {
                        dist[arc.to] = d;
                        via[arc.to] = Some(a);
                        if !queued[arc.to] {
                            queued[arc.to] = true;
                            queue.push_back(arc.to);
                        }
                    }
                }
            }
            if via[t].is_none() {
                return;
            }
            let (path, amount) = self.trace(&via, t);
            self.push(&path, amount);
        }
    }

    /// Edmonds-Karp.
    fn max_flow(&mut self) {
        let nodes = 2 * self.n + 2;
        let (s, t) = (2 * self.n, 2 * self.n + 1);
        loop {
            let mut via: Vec<Option<usize>> = vec![None; nodes];
            let mut seen = vec![false; nodes];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &a in &self.out[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > FLOW_EPS && !seen[arc.to] {
                        seen[arc.to] = true;
                        via[arc.to] = Some(a);
                        queue.push_back(arc.to);
                    }
                }
            }
            if !seen[t] {
                return;
            }
            let (path, amount) = self.trace(&via, t);
            self.push(&path, amount);
        }
    }

    fn plan(&self, n: usize) -> Coupling {
        let mut plan = vec![0.0; n * n];
        for &(x, y, a) in &self.middle {
            plan[x * n + y] = self.arcs[a ^ 1].cap.max(0.0);
        }
        Coupling { n, plan }
    }
}
