//! Separation distances, the concentration function, observable-diameter
//! lower bounds and profile conversions.
//!
//! Both `sep` and `alpha` reduce to the "far" relation `d(x, y) >= t`. Spaces
//! whose metric is that of points on a line or a circle are solved by a scan
//! along the order; everything else goes through closed-set enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mmspace::{MMSpace, Subset, SubsetFamily};
use crate::spectral;

mod closure;
mod ordered;

pub(crate) const MASS_EPS: f64 = 1e-12;
/// Default enumeration budget (closed sets visited) for exact searches.
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;
/// Default cap on `k` for [`sep_exact`].
pub const DEFAULT_MAX_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SepConfig {
    pub max_nodes: u64,
    pub max_k: usize,
}

impl Default for SepConfig {
    fn default() -> Self {
        SepConfig { max_nodes: DEFAULT_NODE_BUDGET, max_k: DEFAULT_MAX_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepResult {
    pub value: f64,
    /// Proven upper bound; equal to `value` when `exact`.
    pub upper: f64,
    /// Sets in the order of `kappas`; empty when no admissible family exists.
    pub witness: SubsetFamily,
    pub kappas: Vec<f64>,
    pub exact: bool,
    pub empty_feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcSample {
    pub r: f64,
    pub alpha: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcProfile {
    pub samples: Vec<ConcSample>,
}

fn check_kappas(kappas: &[f64], max_k: usize) -> Result<()> {
    if kappas.len() < 2 {
        return invalid("need at least two kappas");
    }
    if kappas.len() - 1 > max_k {
        return Err(Error::CapExceeded {
            what: "sep_exact",
            detail: format!("k = {} exceeds the cap {max_k}", kappas.len() - 1),
            hint: "use sep_heuristic for larger k",
        });
    }
    if kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return invalid("kappas must be positive and finite");
    }
    Ok(())
}

fn positive_distances(space: &MMSpace) -> Vec<f64> {
    let n = space.n();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| space.dist_row(i)[i + 1..].iter().copied())
        .collect();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

fn empty_result(kappas: &[f64], exact: bool) -> SepResult {
    SepResult {
        value: 0.0,
        upper: 0.0,
        witness: SubsetFamily::empty(),
        kappas: kappas.to_vec(),
        exact,
        empty_feasible: true,
    }
}

pub fn sep_exact(space: &MMSpace, kappas: &[f64]) -> Result<SepResult> {
    sep_exact_with(space, kappas, &SepConfig::default())
}

/// `sup min_{i != j} d(A_i, A_j)` over disjoint families with `mu(A_i) >= kappa_i`.
///
/// Returns 0 with `empty_feasible` set when no such family exists.
pub fn sep_exact_with(space: &MMSpace, kappas: &[f64], config: &SepConfig) -> Result<SepResult> {
    match refine(space, kappas, config)? {
        (r, None) => Ok(r),
        (_, Some(e)) => Err(e),
    }
}

/// [`sep_exact_with`] when the budget allows, otherwise certified bounds
/// `value <= sep <= upper` with a witness family for `value`.
pub fn sep_bounds(space: &MMSpace, kappas: &[f64], config: &SepConfig) -> Result<SepResult> {
    refine(space, kappas, config).map(|(r, _)| r)
}

/// Share of the budget spent on the approximate passes before the exact search.
const BRACKET_SHARE: u64 = 4;

/// Thresholds run over the sorted positive distances. Index `lo` is known
/// feasible (`None`: nothing found yet) and every index `>= hi` is known
/// infeasible.
struct Bracket {
    lo: Option<usize>,
    witness: Vec<Subset>,
    hi: usize,
}

impl Bracket {
    fn gap(&self) -> usize {
        self.hi - self.lo.map_or(0, |l| l + 1)
    }
}

/// The bracket from the greedy family, narrowed on lines and circles by the
/// approximate passes, then the exact search inside it. Running out of
/// budget returns the bracket reached so far together with the error.
fn refine(space: &MMSpace, kappas: &[f64], config: &SepConfig) -> Result<(SepResult, Option<Error>)> {
    check_kappas(kappas, config.max_k)?;
    if kappas.iter().sum::<f64>() > 1.0 + MASS_EPS {
        return Ok((empty_result(kappas, true), None));
    }
    let dists = positive_distances(space);
    if dists.is_empty() {
        return Ok((empty_result(kappas, true), None));
    }
    let mut order: Vec<usize> = (0..kappas.len()).collect();
    order.sort_by(|&a, &b| kappas[b].total_cmp(&kappas[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| kappas[i]).collect();
    let greedy = sep_heuristic(space, &sorted)?;
    let mut br = Bracket { lo: None, witness: Vec::new(), hi: dists.len() };
    if !greedy.empty_feasible {
        br.lo = Some(dists.partition_point(|&d| d <= greedy.value) - 1);
        br.witness = greedy.witness.into_sets();
    }
    let ord = ordered::detect(space);
    if let Some(o) = &ord {
        narrow(o, space, &dists, &sorted, config.max_nodes / BRACKET_SHARE, &mut br)?;
    }
    let solve = |t: f64| -> Result<Option<Vec<Subset>>> {
        match &ord {
            Some(o) => o.separated_groups(space, t, &sorted, config.max_nodes),
            None => closure::separated_groups(space, t, &sorted, config.max_nodes),
        }
    };
    let mut failure = None;
    while br.gap() > 0 {
        let mid = match br.lo {
            None => 0,
            Some(l) => (l + br.hi) / 2,
        };
        match solve(dists[mid]) {
            Ok(Some(w)) => {
                br.lo = Some(mid);
                br.witness = w;
            }
            Ok(None) => br.hi = mid,
            Err(e @ Error::CapExceeded { .. }) => {
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let exact = br.gap() == 0;
    if br.lo.is_none() {
        let mut r = empty_result(kappas, exact);
        r.upper = if br.hi == 0 { 0.0 } else { dists[br.hi - 1] };
        return Ok((r, failure));
    }
    let mut sets = vec![Subset::empty(space.n()); kappas.len()];
    for (slot, set) in order.iter().zip(br.witness) {
        sets[*slot] = set;
    }
    let witness = SubsetFamily::new(sets)?;
    let value = family_separation(space, &witness);
    Ok((
        SepResult {
            value,
            upper: if exact { value } else { dists[br.hi - 1] },
            witness,
            kappas: kappas.to_vec(),
            exact,
            empty_feasible: false,
        },
        failure,
    ))
}

/// Binary searches with the approximate passes alone, first for feasible
/// thresholds and then for infeasible ones.
fn narrow(ord: &ordered::Ordering, space: &MMSpace, dists: &[f64], kappas: &[f64], budget: u64, br: &mut Bracket) -> Result<()> {
    let work = std::cell::Cell::new(0);
    let mut ceiling = br.hi;
    while br.lo.map_or(0, |l| l + 1) < ceiling {
        let mid = br.lo.map_or(0, |l| (l + ceiling) / 2);
        match ord.probe(space, dists[mid], kappas, budget, &work)? {
            ordered::Probe::Feasible(w) => {
                br.lo = Some(mid);
                br.witness = w;
            }
            ordered::Probe::Infeasible => {
                br.hi = br.hi.min(mid);
                ceiling = mid;
            }
            ordered::Probe::Unknown => ceiling = mid,
        }
    }
    let mut floor = br.lo;
    while br.gap() > 0 && floor.map_or(0, |f| f + 1) < br.hi {
        let mid = floor.map_or(0, |f| (f + br.hi) / 2);
        match ord.probe(space, dists[mid], kappas, budget, &work)? {
            ordered::Probe::Infeasible => br.hi = mid,
            ordered::Probe::Feasible(w) => {
                br.lo = Some(mid);
                br.witness = w;
                floor = Some(mid);
            }
            ordered::Probe::Unknown => floor = Some(mid),
        }
    }
    Ok(())
}

/// Smallest pairwise set distance in a family.
pub fn family_separation(space: &MMSpace, family: &SubsetFamily) -> f64 {
    let sets = family.sets();
    let mut best = f64::INFINITY;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            best = best.min(space.set_distance(&sets[i], &sets[j]));
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Greedy lower bound for `sep`: grows balls from seeds inside the far set
/// of the groups placed so far. Always flagged non-exact.
pub fn sep_heuristic(space: &MMSpace, kappas: &[f64]) -> Result<SepResult> {
    check_kappas(kappas, usize::MAX)?;
    if kappas.iter().sum::<f64>() > 1.0 + MASS_EPS {
        return Ok(empty_result(kappas, false));
    }
    let dists = positive_distances(space);
    let mut best: Option<SubsetFamily> = None;
    let (mut lo, mut hi) = (0usize, dists.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        match greedy_family(space, kappas, dists[mid]) {
            Some(f) => {
                best = Some(f);
                lo = mid + 1;
            }
            None => hi = mid,
        }
    }
    match best {
        None => Ok(SepResult { upper: space.diameter(), ..empty_result(kappas, false) }),
        Some(witness) => Ok(SepResult {
            value: family_separation(space, &witness),
            upper: space.diameter(),
            witness,
            kappas: kappas.to_vec(),
            exact: false,
            empty_feasible: false,
        }),
    }
}

fn greedy_family(space: &MMSpace, kappas: &[f64], t: f64) -> Option<SubsetFamily> {
    let n = space.n();
    let mu = space.measure();
    'seed: for start in 0..n {
        let mut allowed = vec![true; n];
        let mut sets: Vec<Subset> = Vec::new();
        for (gi, &kappa) in kappas.iter().enumerate() {
            let seed = if gi == 0 {
                start
            } else {
                // farthest allowed point from everything placed so far
                let used = sets.iter().fold(Subset::empty(n), |a, s| a.union(s));
                let dd = space.dist_to_set(&used);
                match (0..n).filter(|&x| allowed[x]).max_by(|&a, &b| dd[a].total_cmp(&dd[b]).then(b.cmp(&a))) {
                    Some(x) => x,
                    None => continue 'seed,
                }
            };
            let mut pts: Vec<usize> = (0..n).filter(|&x| allowed[x]).collect();
            pts.sort_by(|&a, &b| space.dist(seed, a).total_cmp(&space.dist(seed, b)).then(a.cmp(&b)));
            let mut mass = 0.0;
            let mut chosen = Vec::new();
            for x in pts {
                if mass >= kappa - MASS_EPS {
                    break;
                }
                mass += mu[x];
                chosen.push(x);
            }
            if mass < kappa - MASS_EPS {
                continue 'seed;
            }
            let set = Subset::from_indices(n, chosen);
            let dd = space.dist_to_set(&set);
            for x in 0..n {
                allowed[x] &= dd[x] >= t;
            }
            sets.push(set);
        }
        return SubsetFamily::new(sets).ok();
    }
    None
}

// ---------------------------------------------------------- concentration

/// `alpha(r) = sup { mu(X \ O_r(A)) : mu(A) >= 1/2 }` with the open
/// neighbourhood `O_r(A) = {x : d(x, A) < r}`; `r = 0` is read as the right
/// limit, so `alpha <= 1/2` always.
pub fn concentration_function(space: &MMSpace, r: f64) -> Result<ConcSample> {
    concentration_function_with(space, r, DEFAULT_NODE_BUDGET)
}

pub fn concentration_function_with(space: &MMSpace, r: f64, max_nodes: u64) -> Result<ConcSample> {
    if !(r.is_finite() && r >= 0.0) {
        return invalid(format!("radius must be finite and nonnegative, got {r}"));
    }
    let lower = concentration_heuristic(space, r);
    // alpha never exceeds 1/2, so a lower bound at 1/2 is the value
    if lower.alpha >= 0.5 - MASS_EPS {
        return Ok(ConcSample { exact: true, ..lower });
    }
    let exact = match ordered::detect(space) {
        Some(ord) => ord.max_far_mass(space, r, lower.alpha, max_nodes),
        None => closure::max_far_mass(space, r, max_nodes),
    };
    match exact {
        // `+ 0.0` turns an empty sum's -0.0 into 0.0
        Ok(alpha) => Ok(ConcSample { r, alpha: alpha.min(0.5) + 0.0, exact: true }),
        Err(Error::CapExceeded { .. }) => Ok(lower),
        Err(e) => Err(e),
    }
}

/// Lower bound for `alpha(r)` from half-mass balls around every point.
pub fn concentration_heuristic(space: &MMSpace, r: f64) -> ConcSample {
    let n = space.n();
    let mu = space.measure();
    let mut best = 0.0f64;
    for x in 0..n {
        let mut pts: Vec<usize> = (0..n).collect();
        pts.sort_by(|&a, &b| space.dist(x, a).total_cmp(&space.dist(x, b)).then(a.cmp(&b)));
        let mut mass = 0.0;
        let mut chosen = Vec::new();
        for p in pts {
            if mass >= 0.5 - MASS_EPS {
                break;
            }
            mass += mu[p];
            chosen.push(p);
        }
        let a = Subset::from_indices(n, chosen);
        let dd = space.dist_to_set(&a);
        let outside: f64 = (0..n)
            .filter(|&y| if r == 0.0 { !a.contains(y) } else { dd[y] >= r })
            .map(|y| mu[y])
            .sum();
        best = best.max(outside);
    }
    ConcSample { r, alpha: best.min(0.5) + 0.0, exact: false }
}

/// Samples `alpha` on a grid. Heuristic samples are lower bounds, so a
/// suffix maximum keeps the profile nonincreasing without losing that.
pub fn concentration_profile(space: &MMSpace, radii: &[f64]) -> Result<ConcProfile> {
    let mut idx: Vec<usize> = (0..radii.len()).collect();
    idx.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut samples: Vec<ConcSample> = idx
        .iter()
        .map(|&i| concentration_function(space, radii[i]))
        .collect::<Result<_>>()?;
    for i in (0..samples.len().saturating_sub(1)).rev() {
        if samples[i].alpha < samples[i + 1].alpha {
            samples[i].alpha = samples[i + 1].alpha;
            samples[i].exact = false;
        }
    }
    Ok(ConcProfile { samples })
}

// ------------------------------------------------------- observable diameter

/// Functions tried by [`obs_diameter_lower`]; each is rescaled to be 1-Lipschitz.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateFamily {
    pub point_distances: bool,
    pub witness_sets: Vec<Subset>,
    pub eigenfunctions: usize,
}

impl CandidateFamily {
    pub fn standard() -> Self {
        CandidateFamily { point_distances: true, witness_sets: Vec::new(), eigenfunctions: 4 }
    }

    pub fn with_witnesses(mut self, sets: impl IntoIterator<Item = Subset>) -> Self {
        self.witness_sets.extend(sets);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsDiamBound {
    pub value: f64,
    pub candidate: String,
}

/// `max diam(f_* mu, 1 - kappa)` over the candidate functions; a lower bound
/// for the observable diameter.
pub fn obs_diameter_lower(space: &MMSpace, kappa: f64, family: &CandidateFamily) -> Result<ObsDiamBound> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return invalid(format!("kappa must lie in (0, 1), got {kappa}"));
    }
    let n = space.n();
    let mass = 1.0 - kappa;
    let mu = space.measure();
    let mut best = ObsDiamBound { value: 0.0, candidate: "constant".into() };
    let mut consider = |f: Vec<f64>, name: String| -> Result<()> {
        let v = partial_diameter(&f, mu, mass)?;
        if v > best.value {
            best = ObsDiamBound { value: v, candidate: name };
        }
        Ok(())
    };
    if family.point_distances {
        for x in 0..n {
            consider(space.dist_row(x).to_vec(), format!("dist_to_point:{x}"))?;
        }
    }
    for (i, a) in family.witness_sets.iter().enumerate() {
        if a.universe() != n || a.is_empty() {
            return invalid("candidate sets must be nonempty subsets of the space");
        }
        consider(space.dist_to_set(a), format!("dist_to_set:{i}"))?;
    }
    let m = family.eigenfunctions.min(n.saturating_sub(1));
    if m > 0 {
        let spec = spectral::eigenpairs(space, m)?;
        for j in 1..=m {
            let f = &spec.eigenfunctions[j];
            let lip = lipschitz_constant(space, f);
            if lip > 0.0 {
                consider(f.iter().map(|v| v / lip).collect(), format!("eigenfunction:{j}"))?;
            }
        }
    }
    Ok(best)
}

/// `max |f(x) - f(y)| / d(x, y)`.
pub fn lipschitz_constant(space: &MMSpace, f: &[f64]) -> f64 {
    let n = space.n();
    let mut l = 0.0f64;
    for x in 0..n {
        for y in x + 1..n {
            l = l.max((f[x] - f[y]).abs() / space.dist(x, y));
        }
    }
    l
}

/// Length of the shortest interval carrying at least `mass` of the weighted
/// values.
pub fn partial_diameter(values: &[f64], weights: &[f64], mass: f64) -> Result<f64> {
    if values.len() != weights.len() || values.is_empty() {
        return invalid("values and weights must be nonempty and of equal length");
    }
    if weights.iter().any(|w| !(*w > 0.0)) || values.iter().any(|v| !v.is_finite()) {
        return invalid("weights must be positive and values finite");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("weights sum to {total}, expected 1"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return invalid(format!("mass must lie in (0, 1], got {mass}"));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let need = mass.min(total) - MASS_EPS;
    let mut best = f64::INFINITY;
    let mut acc = 0.0;
    let mut lo = 0;
    for hi in 0..idx.len() {
        acc += weights[idx[hi]];
        while lo < hi && acc - weights[idx[lo]] >= need {
            acc -= weights[idx[lo]];
            lo += 1;
        }
        if acc >= need {
            best = best.min(values[idx[hi]] - values[idx[lo]]);
        }
    }
    Ok(best)
}

// ------------------------------------------------------------ conversions

/// `(2 / C) log(c / kappa)`: the separation bound implied by `alpha(r) <= c e^{-C r}`.
pub fn conc_to_sep(c: f64, big_c: f64, kappa: f64) -> Result<f64> {
    positive(&[("c", c), ("C", big_c), ("kappa", kappa)])?;
    Ok(2.0 / big_c * (c / kappa).ln())
}

/// `c e^{-C r}`: the concentration bound implied by a logarithmic separation bound.
pub fn sep_to_conc(c: f64, big_c: f64, r: f64) -> Result<f64> {
    positive(&[("c", c), ("C", big_c), ("r", r)])?;
    Ok(c * (-big_c * r).exp())
}

fn positive(params: &[(&str, f64)]) -> Result<()> {
    for (name, v) in params {
        if !(v.is_finite() && *v > 0.0) {
            return invalid(format!("{name} must be positive, got {v}"));
        }
    }
    Ok(())
}

/// `inf { eps > 0 : mu(|f - g| > eps) <= lambda eps }`.
pub fn me_distance(f: &[f64], g: &[f64], lambda: f64, weights: &[f64]) -> Result<f64> {
    if f.len() != g.len() || f.len() != weights.len() {
        return invalid("f, g and weights must have equal length");
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be finite and nonnegative, got {lambda}"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return invalid("weights must be nonnegative");
    }
    let mut gaps: Vec<(f64, f64)> = f
        .iter()
        .zip(g)
        .zip(weights)
        .map(|((a, b), w)| ((a - b).abs(), *w))
        .filter(|(h, w)| *h > 0.0 && *w > 0.0)
        .collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut above: f64 = gaps.iter().map(|(_, w)| w).sum();
    let mut left = 0.0f64;
    let mut i = 0;
    // on [left, next breakpoint) the mass of {|f - g| > eps} is `above`
    while i < gaps.len() {
        if lambda > 0.0 {
            let eps = left.max(above / lambda);
            if eps < gaps[i].0 {
                return Ok(eps);
            }
        }
        let level = gaps[i].0;
        while i < gaps.len() && gaps[i].0 == level {
            above -= gaps[i].1;
            i += 1;
        }
        left = level;
    }
    Ok(left)
}
