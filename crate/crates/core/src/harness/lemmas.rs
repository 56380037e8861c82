//! Exact statements that hold on every finite mm-space, checked exhaustively
//! on small spaces. Each function folds its cases into a [`Tally`] that keeps
//! the worst one.

use crate::error::{Error, Result};
use crate::harness::report::{CheckClass, InequalityReport, Relation};
use crate::isoperimetry::{self, hk_exact, hk_sweep, HK_SWEEP_TRIALS};
use crate::mmspace::{MMSpace, NeighborhoodMode, Subset};
use crate::separation::{
    concentration_function, obs_diameter_lower, sep_exact, CandidateFamily, MASS_EPS,
};
use crate::transport::{prohorov_distance_with_cap, relative_entropy, transportation_distance, wasserstein2};

/// Largest space enumerated subset by subset.
pub const EXHAUSTIVE_MAX_N: usize = 14;
/// Absolute tolerance for the transport duality.
pub const STRASSEN_TOL: f64 = 1e-6;
const COAREA_TOL: f64 = 1e-9;

/// Worst case of many evaluations of one inequality.
#[derive(Debug, Clone)]
pub struct Tally {
    relation: Relation,
    cases: usize,
    worst: Option<(f64, f64, f64, String)>,
}

impl Tally {
    pub fn new(relation: Relation) -> Self {
        Tally { relation, cases: 0, worst: None }
    }

    pub fn cases(&self) -> usize {
        self.cases
    }

    /// Records `lhs REL rhs`; `case` describes it and is built only when it
    /// becomes the worst so far.
    pub fn record(&mut self, lhs: f64, rhs: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        let excess = match self.relation {
            Relation::Le => lhs - rhs,
            Relation::Ge => rhs - lhs,
        } / (1.0 + lhs.abs().max(rhs.abs()));
        if self.worst.as_ref().is_none_or(|w| excess > w.2) {
            self.worst = Some((lhs, rhs, excess, case()));
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.cases += other.cases;
        if let Some(w) = other.worst {
            if self.worst.as_ref().is_none_or(|s| w.2 > s.2) {
                self.worst = Some(w);
            }
        }
    }

    /// A hard report on the worst case; with no cases it is vacuous.
    pub fn report(self, id: &str, anchor: &str) -> InequalityReport {
        let (lhs, rhs, case) = match self.worst {
            Some((l, r, _, c)) => (l, r, c),
            None => (0.0, 0.0, "vacuous".to_string()),
        };
        InequalityReport::evaluate(id, anchor, lhs, rhs, self.relation, CheckClass::Hard, 0.0)
            .with_param("cases", self.cases)
            .with_param("worst_case", case)
    }
}

fn exhaustive_guard(space: &MMSpace, what: &'static str) -> Result<()> {
    if space.n() > EXHAUSTIVE_MAX_N {
        return Err(Error::CapExceeded {
            what,
            detail: format!("n = {} exceeds {EXHAUSTIVE_MAX_N}", space.n()),
            hint: "run the exhaustive lemma checks on smaller spaces",
        });
    }
    Ok(())
}

fn exact_alpha(space: &MMSpace, r: f64) -> Result<f64> {
    let s = concentration_function(space, r)?;
    if !s.exact {
        return Err(Error::CapExceeded {
            what: "concentration_function",
            detail: format!("no exact value at r = {r}"),
            hint: "use a smaller space",
        });
    }
    Ok(s.alpha)
}

fn nonempty_subsets(n: usize) -> impl Iterator<Item = Subset> {
    (1u32..1 << n).map(move |m| Subset::from_indices(n, (0..n).filter(|&i| m >> i & 1 == 1)))
}

/// `mu(A) > alpha(r0)` implies `mu(X \ O_{r + r0}(A)) <= alpha(r)`, over all `A`.
pub fn neighborhood_lemma(space: &MMSpace, r0: f64, r: f64) -> Result<Tally> {
    exhaustive_guard(space, "neighborhood_lemma")?;
    let a0 = exact_alpha(space, r0)?;
    let ar = exact_alpha(space, r)?;
    let mut t = Tally::new(Relation::Le);
    for a in nonempty_subsets(space.n()) {
        if space.subset_measure(&a) <= a0 + MASS_EPS {
            continue;
        }
        let near = space.neighborhood(&a, r + r0, NeighborhoodMode::Open);
        let outside = 1.0 - space.subset_measure(&near);
        t.record(outside, ar, || format!("A = {:?}, r0 = {r0}, r = {r}", a.indices()));
    }
    Ok(t)
}

/// `sep(X_A; kappas) <= sep(X; mu(A) kappas)` for every nonempty `A`, where
/// `X_A` carries the normalized restriction of the measure.
pub fn restriction_lemma(space: &MMSpace, kappas: &[f64]) -> Result<Tally> {
    exhaustive_guard(space, "restriction_lemma")?;
    let mut t = Tally::new(Relation::Le);
    for a in nonempty_subsets(space.n()) {
        let m = space.subset_measure(&a);
        let inner = sep_exact(&space.restrict(&a)?, kappas)?.value;
        let scaled: Vec<f64> = kappas.iter().map(|k| k * m).collect();
        let outer = sep_exact(space, &scaled)?.value;
        t.record(inner, outer, || format!("A = {:?}, kappas = {kappas:?}", a.indices()));
    }
    Ok(t)
}

/// With `r = sep(kappa_0..kappa_k)`, every family `A_0..A_{k-1}` with
/// `mu(A_i) >= kappa_i` and pairwise distances `> r` has closed
/// `r`-neighbourhoods covering mass at least `1 - kappa_k`.
pub fn covering_lemma(space: &MMSpace, kappas: &[f64]) -> Result<Tally> {
    exhaustive_guard(space, "covering_lemma")?;
    let n = space.n();
    let k = kappas.len() - 1;
    let r = sep_exact(space, kappas)?.value;
    let mut t = Tally::new(Relation::Ge);
    let mut labels = vec![0usize; n];
    // labels in 0..=k, where k means "in no set"
    'families: loop {
        let sets: Vec<Subset> = (0..k)
            .map(|i| Subset::from_indices(n, (0..n).filter(|&x| labels[x] == i)))
            .collect();
        let admissible = sets
            .iter()
            .zip(kappas)
            .all(|(a, &kap)| !a.is_empty() && space.subset_measure(a) >= kap - MASS_EPS)
            && (0..k).all(|i| (i + 1..k).all(|j| space.set_distance(&sets[i], &sets[j]) > r));
        if admissible {
            let cover = sets
                .iter()
                .fold(Subset::empty(n), |u, a| u.union(&space.neighborhood(a, r, NeighborhoodMode::Closed)));
            t.record(space.subset_measure(&cover), 1.0 - kappas[k], || {
                format!("sets = {:?}, r = {r}", sets.iter().map(|a| a.indices().to_vec()).collect::<Vec<_>>())
            });
        }
        for l in labels.iter_mut() {
            *l += 1;
            if *l <= k {
                continue 'families;
            }
            *l = 0;
        }
        break;
    }
    Ok(t)
}

/// `kappa >= kappa'` componentwise implies `sep(kappa) <= sep(kappa')`, over
/// every comparable pair of a grid of `k + 1`-tuples.
pub fn sep_monotonicity(space: &MMSpace, grid: &[f64], k: usize) -> Result<Tally> {
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..=k {
        tuples = tuples
            .into_iter()
            .flat_map(|t| (0..grid.len()).map(move |g| [t.clone(), vec![g]].concat()))
            .collect();
    }
    let values: Vec<f64> = tuples
        .iter()
        .map(|t| sep_exact(space, &t.iter().map(|&g| grid[g]).collect::<Vec<_>>()).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut t = Tally::new(Relation::Le);
    for (a, ta) in tuples.iter().enumerate() {
        for (b, tb) in tuples.iter().enumerate() {
            if a != b && ta.iter().zip(tb).all(|(x, y)| x >= y) {
                t.record(values[a], values[b], || format!("sep{ta:?} vs sep{tb:?} on grid {grid:?}"));
            }
        }
    }
    Ok(t)
}

/// `h_k <= h_{k+1}` for exact values, and every sweep family bounds the
/// exact value from above.
pub fn hk_monotonicity(space: &MMSpace, sweep_k: usize, seed: u64) -> Result<(Tally, Tally)> {
    let mut mono = Tally::new(Relation::Le);
    let mut sweep = Tally::new(Relation::Ge);
    let hs: Vec<f64> = (1..space.n()).map(|k| hk_exact(space, k).map(|c| c.value)).collect::<Result<_>>()?;
    for w in 0..hs.len().saturating_sub(1) {
        mono.record(hs[w], hs[w + 1], || format!("h_{} vs h_{}", w + 1, w + 2));
    }
    for k in 1..=sweep_k.min(hs.len()) {
        let s = hk_sweep(space, k, HK_SWEEP_TRIALS, seed)?;
        let recomputed = isoperimetry::family_value(space, &s.family);
        sweep.record(s.value.min(recomputed), hs[k - 1], || format!("sweep h_{k}"));
    }
    Ok((mono, sweep))
}

/// `ObsDiam(-2 kappa) <= sep(kappa, kappa)` for the standard candidates, and
/// `ObsDiam(-kappa') >= sep(kappa, kappa)` once distances to the separation
/// witnesses are candidates and `kappa' < kappa`.
pub fn obs_sandwich(space: &MMSpace, kappa: f64, kappa_lower: f64) -> Result<(Tally, Tally)> {
    let sep = sep_exact(space, &[kappa, kappa])?;
    let mut upper = Tally::new(Relation::Le);
    let mut lower = Tally::new(Relation::Ge);
    if 2.0 * kappa < 1.0 {
        let obs = obs_diameter_lower(space, 2.0 * kappa, &CandidateFamily::standard())?;
        upper.record(obs.value, sep.value, || format!("kappa = {kappa}, candidate {}", obs.candidate));
    }
    if kappa_lower < kappa {
        let family = CandidateFamily::standard().with_witnesses(sep.witness.sets().to_vec());
        let obs = obs_diameter_lower(space, kappa_lower, &family)?;
        lower.record(obs.value, sep.value, || format!("kappa = {kappa}, kappa' = {kappa_lower}"));
    }
    Ok((upper, lower))
}

/// `alpha` is nonincreasing on the radius grid and never exceeds `1/2`.
pub fn concentration_profile_checks(space: &MMSpace, radii: &[f64]) -> Result<(Tally, Tally)> {
    let mut r = radii.to_vec();
    r.sort_by(f64::total_cmp);
    let alphas: Vec<f64> = r.iter().map(|&x| exact_alpha(space, x)).collect::<Result<_>>()?;
    let mut mono = Tally::new(Relation::Le);
    let mut half = Tally::new(Relation::Le);
    for i in 0..alphas.len() {
        half.record(alphas[i], 0.5, || format!("r = {}", r[i]));
        if i + 1 < alphas.len() {
            mono.record(alphas[i + 1], alphas[i], || format!("r = {} vs {}", r[i + 1], r[i]));
        }
    }
    Ok((mono, half))
}

/// `|tra_lambda - di_lambda| <= STRASSEN_TOL`.
pub fn strassen(space: &MMSpace, mu: &[f64], nu: &[f64], lambda: f64, cap: usize, t: &mut Tally) -> Result<()> {
    let tra = transportation_distance(space, mu, nu, lambda)?;
    let di = prohorov_distance_with_cap(space, mu, nu, lambda, cap)?;
    t.record((tra - di).abs(), STRASSEN_TOL, || format!("lambda = {lambda}, tra = {tra}, di = {di}"));
    Ok(())
}

/// Triangle inequality, symmetry and zero self-distance of `W_2` on three measures.
pub fn w2_metric(space: &MMSpace, m: [&[f64]; 3], t: &mut Tally) -> Result<()> {
    let w = |a: &[f64], b: &[f64]| wasserstein2(space, a, b).map(|r| r.0);
    let (ab, bc, ac) = (w(m[0], m[1])?, w(m[1], m[2])?, w(m[0], m[2])?);
    t.record(ac, ab + bc, || "triangle".into());
    t.record((ab - w(m[1], m[0])?).abs(), COAREA_TOL * (1.0 + ab), || "symmetry".into());
    t.record(w(m[0], m[0])?, COAREA_TOL, || "self distance".into());
    Ok(())
}

/// `tra_lambda` is nonincreasing in `lambda`.
pub fn tra_monotone(space: &MMSpace, mu: &[f64], nu: &[f64], lambdas: &[f64], t: &mut Tally) -> Result<()> {
    let mut l = lambdas.to_vec();
    l.sort_by(f64::total_cmp);
    let vals: Vec<f64> = l.iter().map(|&x| transportation_distance(space, mu, nu, x)).collect::<Result<_>>()?;
    for i in 0..vals.len().saturating_sub(1) {
        t.record(vals[i + 1], vals[i], || format!("lambda = {} vs {}", l[i + 1], l[i]));
    }
    Ok(())
}

/// Relative entropy against the space measure is nonnegative.
pub fn entropy_nonnegative(space: &MMSpace, nu: &[f64], t: &mut Tally) -> Result<()> {
    let e = relative_entropy(space.measure(), nu)?;
    if e.is_finite() {
        t.record(e.value(), 0.0, || format!("nu = {nu:?}"));
    }
    Ok(())
}

/// `int mu^+({g >= v}) dv = sum w d |g(x) - g(y)|`.
pub fn coarea(space: &MMSpace, g: &[f64], t: &mut Tally) -> Result<()> {
    let a = isoperimetry::superlevel_boundary_integral(space, g)?;
    let b = isoperimetry::edge_variation(space, g)?;
    t.record((a - b).abs(), COAREA_TOL * (1.0 + b), || format!("integral {a} vs variation {b}"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::random::{random_geometric_space, random_probability};
    use crate::harness::report::Verdict;
    use crate::mmspace::gen_cycle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tally_keeps_worst_case() {
        let mut t = Tally::new(Relation::Le);
        t.record(1.0, 2.0, || "a".into());
        t.record(1.9, 2.0, || "b".into());
        t.record(0.0, 2.0, || "c".into());
        let r = t.report("x", "");
        assert_eq!((r.lhs, r.rhs), (1.9, 2.0));
        assert_eq!(r.params["cases"], 3);
        assert_eq!(r.params["worst_case"], "b");
        let mut bad = Tally::new(Relation::Ge);
        bad.record(1.0, 2.0, || "bad".into());
        let mut t = Tally::new(Relation::Ge);
        t.record(3.0, 2.0, || "ok".into());
        t.merge(bad);
        assert_eq!(t.report("y", "").verdict, Verdict::Fail);
        assert_eq!(Tally::new(Relation::Le).report("z", "").verdict, Verdict::Pass);
    }

    #[test]
    fn lemmas_hold_on_small_random_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let n = rng.gen_range(4..=7);
            let s = random_geometric_space(&mut rng, n);
            let d = s.diameter();
            let reports = [
                neighborhood_lemma(&s, 0.3 * d, 0.2 * d).unwrap().report("nb", ""),
                restriction_lemma(&s, &[0.3, 0.3]).unwrap().report("re", ""),
                covering_lemma(&s, &[0.2, 0.2, 0.2]).unwrap().report("co", ""),
                sep_monotonicity(&s, &[0.1, 0.3, 0.45], 1).unwrap().report("sm", ""),
            ];
            for r in reports {
                assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            }
            let (a, b) = hk_monotonicity(&s, 2, 0).unwrap();
            assert_eq!(a.report("hm", "").verdict, Verdict::Pass);
            assert_eq!(b.report("hs", "").verdict, Verdict::Pass);
            let (a, b) = obs_sandwich(&s, 0.3, 0.2).unwrap();
            assert_eq!(a.report("ou", "").verdict, Verdict::Pass);
            assert_eq!(b.report("ol", "").verdict, Verdict::Pass);
            let mut st = Tally::new(Relation::Le);
            let mu = random_probability(&mut rng, n, true);
            let nu = random_probability(&mut rng, n, true);
            strassen(&s, &mu, &nu, 1.0, 10, &mut st).unwrap();
            assert_eq!(st.report("st", "").verdict, Verdict::Pass);
        }
    }

    #[test]
    fn covering_counts_families() {
        // on 4 uniform points of a cycle every nonempty set is a candidate
        let s = gen_cycle(4, 4.0).unwrap();
        let t = covering_lemma(&s, &[0.25, 0.25]).unwrap();
        assert_eq!(t.cases(), 15);
        assert_eq!(t.report("c", "").verdict, Verdict::Pass);
    }

    #[test]
    fn exhaustive_checks_refuse_large_spaces() {
        let s = gen_cycle(32, 1.0).unwrap();
        assert!(matches!(neighborhood_lemma(&s, 0.1, 0.1), Err(Error::CapExceeded { .. })));
    }
}
