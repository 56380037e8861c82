//! The inequality checks, evaluated against memoized quantities of one space.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::harness::report::{holds_with, CheckClass, InequalityReport, Provenance, Relation};
use crate::isoperimetry::{self, CutMethod, CutResult};
use crate::mmspace::MMSpace;
use crate::separation::{self, SepConfig, SepResult, DEFAULT_MAX_K};
use crate::spectral;

pub const DEFAULT_SLACK: f64 = 0.05;

/// Enumeration limits used by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Largest `n` for the exhaustive `h_k` search.
    pub hk_exact_n: usize,
    /// Node budget for exact separation and concentration searches.
    pub sep_nodes: u64,
    /// Largest `n` for the Prohorov subset scan.
    pub prohorov_n: usize,
    pub sweep_trials: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            hk_exact_n: isoperimetry::HK_EXACT_MAX_N,
            sep_nodes: separation::DEFAULT_NODE_BUDGET,
            prohorov_n: 10,
            sweep_trials: isoperimetry::HK_SWEEP_TRIALS,
        }
    }
}

/// Lazily computed `lambda_k`, `h_k`, `sep` and `alpha` of one space.
pub struct Evaluator<'a> {
    space: &'a MMSpace,
    caps: Caps,
    slack: f64,
    seed: u64,
    hk: RefCell<BTreeMap<usize, (CutResult, Provenance)>>,
    sep: RefCell<BTreeMap<Vec<u64>, (SepResult, Provenance)>>,
    alpha: RefCell<BTreeMap<u64, (f64, Provenance)>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(space: &'a MMSpace, caps: Caps, slack: f64, seed: u64) -> Self {
        Evaluator {
            space,
            caps,
            slack,
            seed,
            hk: RefCell::default(),
            sep: RefCell::default(),
            alpha: RefCell::default(),
        }
    }

    pub fn space(&self) -> &'a MMSpace {
        self.space
    }

    pub fn lambda(&self, k: usize) -> Result<f64> {
        let spec = spectral::full_spectrum(self.space)?;
        if k >= spec.len() {
            return invalid(format!("lambda_{k} needs n > {k}, got n = {}", self.space.n()));
        }
        Ok(spec.lambda(k))
    }

    /// Exhaustive search when `n` is small, the run search on paths and
    /// cycles, the spectral sweep otherwise.
    pub fn hk(&self, k: usize) -> Result<(CutResult, Provenance)> {
        if let Some(v) = self.hk.borrow().get(&k) {
            return Ok(v.clone());
        }
        let space = self.space;
        let cut = if space.n() <= self.caps.hk_exact_n {
            isoperimetry::hk_exact_with_cap(space, k, self.caps.hk_exact_n)?
        } else if isoperimetry::is_chain_graph(space) {
            isoperimetry::hk_chain(space, k)?
        } else {
            isoperimetry::hk_sweep(space, k, self.caps.sweep_trials, self.seed)?
        };
        let prov = match cut.method {
            CutMethod::Exact => Provenance::Exact,
            CutMethod::Sweep => Provenance::Sweep,
        };
        self.hk.borrow_mut().insert(k, (cut.clone(), prov));
        Ok((cut, prov))
    }

    /// Exact separation, or proven bounds once the budget runs out.
    pub fn sep(&self, kappas: &[f64]) -> Result<(SepResult, Provenance)> {
        let key: Vec<u64> = kappas.iter().map(|k| k.to_bits()).collect();
        if let Some(v) = self.sep.borrow().get(&key) {
            return Ok(v.clone());
        }
        let config = SepConfig { max_nodes: self.caps.sep_nodes, max_k: DEFAULT_MAX_K };
        let r = separation::sep_bounds(self.space, kappas, &config)?;
        let p = if r.exact { Provenance::Exact } else { Provenance::Bracket };
        self.sep.borrow_mut().insert(key, (r.clone(), p));
        Ok((r, p))
    }

    /// The end of the sep bracket that settles `sep REL rhs`: the favourable
    /// end when it passes, the other end when even that fails.
    fn sep_side(&self, sep: &SepResult, rhs: f64, relation: Relation) -> (f64, Option<&'static str>) {
        if sep.exact {
            return (sep.value, None);
        }
        let (good, bad) = match relation {
            Relation::Le => (sep.upper, sep.value),
            Relation::Ge => (sep.value, sep.upper),
        };
        if holds_with(good, rhs, relation, self.slack) {
            (good, None)
        } else if !holds_with(bad, rhs, relation, self.slack) {
            (bad, None)
        } else {
            (good, Some("sep bracket does not decide the check"))
        }
    }

    pub fn alpha(&self, r: f64) -> Result<(f64, Provenance)> {
        if let Some(v) = self.alpha.borrow().get(&r.to_bits()) {
            return Ok(*v);
        }
        let s = separation::concentration_function_with(self.space, r, self.caps.sep_nodes)?;
        let v = (s.alpha, if s.exact { Provenance::Exact } else { Provenance::Heuristic });
        self.alpha.borrow_mut().insert(r.to_bits(), v);
        Ok(v)
    }

    /// Tolerance on curvature models when the inputs err on the safe side,
    /// report-only otherwise.
    fn class(&self, unsound: Option<&'static str>) -> (CheckClass, &'static str) {
        if !self.space.is_curvature_model() {
            (CheckClass::ReportOnly, "no curvature hypothesis")
        } else if let Some(why) = unsound {
            (CheckClass::ReportOnly, why)
        } else {
            (CheckClass::Tolerance, "curvature model")
        }
    }

    fn report(
        &self,
        id: String,
        anchor: &str,
        (lhs, rhs): (f64, f64),
        relation: Relation,
        (class, reason): (CheckClass, &'static str),
    ) -> InequalityReport {
        InequalityReport::evaluate(&id, anchor, lhs, rhs, relation, class, self.slack).with_param("class_reason", reason)
    }

    pub fn cheeger_mazya(&self) -> Result<InequalityReport> {
        let (h, hp) = self.hk(1)?;
        let l = self.lambda(1)?;
        Ok(self
            .report("cheeger_mazya".into(), "h_1 <= 2 sqrt(lambda_1)", (h.value, 2.0 * l.sqrt()), Relation::Le, self.class(None))
            .with_provenance("h_1", hp)
            .with_provenance("lambda_1", Provenance::Exact))
    }

    pub fn buser_extended(&self, k: usize) -> Result<InequalityReport> {
        let (h, hp) = self.hk(k)?;
        let l = self.lambda(k)?;
        let kf = k as f64;
        let unsound = (hp != Provenance::Exact).then_some("h_k is a sweep upper bound");
        let proof = proof_constant(k);
        Ok(self
            .report(
                format!("buser_extended/k={k}"),
                "sqrt(lambda_k) <= 80 k^3 h_k",
                (l.sqrt(), 80.0 * kf.powi(3) * h.value),
                Relation::Le,
                self.class(unsound),
            )
            .with_param("k", k)
            .with_param("proof_constant", proof)
            .with_param("proof_constant_ratio", l.sqrt() / (proof * h.value))
            .with_provenance("h_k", hp)
            .with_provenance("lambda_k", Provenance::Exact))
    }

    pub fn cgy_separation(&self, kappas: &[f64]) -> Result<InequalityReport> {
        let k = kappas.len().saturating_sub(1);
        let (sep, sp) = self.sep(kappas)?;
        let l = self.lambda(k)?;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..kappas.len() {
            for j in 0..kappas.len() {
                if i != j {
                    worst = worst.max((std::f64::consts::E / (kappas[i] * kappas[j])).ln());
                }
            }
        }
        let rhs = worst / l.sqrt();
        let (lhs, unsound) = self.sep_side(&sep, rhs, Relation::Le);
        Ok(self
            .report(
                format!("cgy_separation/kappas={}", fmt_list(kappas)),
                "sep(kappa_0..kappa_k) <= max_{i != j} log(e / (kappa_i kappa_j)) / sqrt(lambda_k)",
                (lhs, rhs),
                Relation::Le,
                self.class(unsound),
            )
            .with_param("k", k)
            .with_param("kappas", kappas.to_vec())
            .with_param("empty_feasible", sep.empty_feasible)
            .with_param("sep_bracket", vec![sep.value, sep.upper])
            .with_provenance("sep", sp)
            .with_provenance("lambda_k", Provenance::Exact))
    }

    /// The spectral and the isoperimetric form.
    pub fn gromov_milman(&self, r: f64) -> Result<Vec<InequalityReport>> {
        let (alpha, ap) = self.alpha(r)?;
        let l = self.lambda(1)?;
        let (h, hp) = self.hk(1)?;
        let unsound = (ap != Provenance::Exact).then_some("alpha is a heuristic lower bound");
        let spectral = self
            .report(
                format!("gromov_milman_lambda/r={}", fmt_num(r)),
                "alpha(r) <= exp(-sqrt(lambda_1) r / 3)",
                (alpha, (-l.sqrt() * r / 3.0).exp()),
                Relation::Le,
                self.class(unsound),
            )
            .with_param("r", r)
            .with_provenance("alpha", ap)
            .with_provenance("lambda_1", Provenance::Exact);
        let iso = self
            .report(
                format!("gromov_milman_h/r={}", fmt_num(r)),
                "alpha(r) <= exp(-h_1 r / 6)",
                (alpha, (-h.value * r / 6.0).exp()),
                Relation::Le,
                self.class(unsound),
            )
            .with_param("r", r)
            .with_provenance("alpha", ap)
            .with_provenance("h_1", hp);
        Ok(vec![spectral, iso])
    }

    /// Lower bounds for `sep(kappa, kappa)` through `h_1` and through `lambda_1`.
    pub fn emilman_converse(&self, kappa: f64) -> Result<Vec<InequalityReport>> {
        let (sep, sp) = self.sep(&[kappa, kappa])?;
        let (h, hp) = self.hk(1)?;
        let l = self.lambda(1)?;
        let num = (1.0 - 2.0 * kappa).max(0.0);
        let h_unsound = (hp != Provenance::Exact).then_some("h_1 is a sweep upper bound");
        let (rhs_h, rhs_l) = (num / h.value, num / (2.0 * l.sqrt()));
        let (lhs_h, sep_unsound_h) = self.sep_side(&sep, rhs_h, Relation::Ge);
        let (lhs_l, sep_unsound_l) = self.sep_side(&sep, rhs_l, Relation::Ge);
        let by_h = self
            .report(
                format!("emilman_converse_h/kappa={}", fmt_num(kappa)),
                "sep(kappa, kappa) >= (1 - 2 kappa) / h_1",
                (lhs_h, rhs_h),
                Relation::Ge,
                self.class(h_unsound.or(sep_unsound_h)),
            )
            .with_param("kappa", kappa)
            .with_param("sep_bracket", vec![sep.value, sep.upper])
            .with_provenance("sep", sp)
            .with_provenance("h_1", hp);
        let by_lambda = self
            .report(
                format!("emilman_converse_lambda/kappa={}", fmt_num(kappa)),
                "sep(kappa, kappa) >= (1 - 2 kappa) / (2 sqrt(lambda_1))",
                (lhs_l, rhs_l),
                Relation::Ge,
                self.class(sep_unsound_l),
            )
            .with_param("kappa", kappa)
            .with_param("sep_bracket", vec![sep.value, sep.upper])
            .with_provenance("sep", sp)
            .with_provenance("lambda_1", Provenance::Exact);
        Ok(vec![by_h, by_lambda])
    }

    pub fn multiway_sep_bound(&self, k: usize, kappa: f64) -> Result<InequalityReport> {
        let kappas = vec![kappa; k + 1];
        let (sep, sp) = self.sep(&kappas)?;
        let (h, hp) = self.hk(k)?;
        let rhs = 2.0 / std::f64::consts::LN_2 * (2.0 / kappa).ln() / (h.value * kappa);
        let (lhs, unsound) = self.sep_side(&sep, rhs, Relation::Le);
        Ok(self
            .report(
                format!("multiway_sep/k={k}/kappa={}", fmt_num(kappa)),
                "sep(kappa x (k+1)) <= (2 / log 2) log(2 / kappa) / (h_k kappa)",
                (lhs, rhs),
                Relation::Le,
                self.class(unsound),
            )
            .with_param("k", k)
            .with_param("kappa", kappa)
            .with_param("sep_bracket", vec![sep.value, sep.upper])
            .with_provenance("sep", sp)
            .with_provenance("h_k", hp))
    }

    /// Quadratic form on the `k` lightest sets of the `h_k` witness.
    pub fn witness_quadratic_form(&self, k: usize, coeffs: &[f64]) -> Result<InequalityReport> {
        let (cut, hp) = self.hk(k)?;
        let mut masses: Vec<f64> = cut.family.sets().iter().map(|a| self.space.subset_measure(a)).collect();
        masses.sort_by(f64::total_cmp);
        masses.truncate(k);
        let r = check_indicator_quadratic_form(&masses, coeffs, k)?;
        Ok(InequalityReport { id: format!("{}/k={k}", r.id), ..r }.with_provenance("witness", hp))
    }

    /// Heat semigroup bounds on the witness indicators at `t = 4k(k+1)/lambda_k`.
    pub fn witness_heat_checks(&self, k: usize) -> Result<Vec<InequalityReport>> {
        let (cut, hp) = self.hk(k)?;
        let t = 4.0 * (k * (k + 1)) as f64 / self.lambda(k)?;
        let mut out = Vec::new();
        for (i, a) in cut.family.sets().iter().enumerate() {
            let f = a.indicator();
            let checks = [
                spectral::check_ledoux_l1(self.space, &f, t)?,
                spectral::check_gradient_contraction(self.space, &f, t, 2.0)?,
                spectral::check_bakry_ledoux(self.space, &f, t, 0.0)?,
            ];
            for r in checks {
                out.push(
                    InequalityReport { id: format!("{}/k={k}/set={i}", r.id), ..r }
                        .with_param("k", k)
                        .with_provenance("witness", hp),
                );
            }
        }
        Ok(out)
    }

    /// `mu^+(A) / mu(A) <= 2 || grad f ||_2 / || f ||_2` for the best sweep set.
    pub fn sweep_lemma(&self, f: &[f64], source: &str) -> Result<InequalityReport> {
        let mut r = check_sweep_lemma(self.space, f)?;
        r.id = format!("{}/{source}", r.id);
        Ok(r)
    }
}

/// `(16k(k+1) + 2) sqrt(2k(k+1))`, the constant the Buser argument produces.
pub fn proof_constant(k: usize) -> f64 {
    let m = (k * (k + 1)) as f64;
    (16.0 * m + 2.0) * (2.0 * m).sqrt()
}

pub fn check_buser_constant_chain(k: usize) -> InequalityReport {
    InequalityReport::evaluate(
        &format!("buser_constant_chain/k={k}"),
        "(16k(k+1) + 2) sqrt(2k(k+1)) <= 80 k^3",
        proof_constant(k),
        80.0 * (k as f64).powi(3),
        Relation::Le,
        CheckClass::Hard,
        0.0,
    )
    .with_param("k", k)
}

/// `Var(sum_i a_i 1_{A_i}) >= (1/(k+1)) sum_i a_i^2 mu_i (1 - mu_i)` for `k`
/// disjoint sets of masses `mu_i` with `sum mu_i <= 1 - 1/(k+1)`, using
/// `Var = sum a_i^2 mu_i - (sum a_i mu_i)^2`.
pub fn check_indicator_quadratic_form(measures: &[f64], coeffs: &[f64], k: usize) -> Result<InequalityReport> {
    if k == 0 || measures.len() != k || coeffs.len() != k {
        return invalid(format!(
            "need k >= 1 masses and coefficients, got k = {k}, {} masses, {} coefficients",
            measures.len(),
            coeffs.len()
        ));
    }
    if measures.iter().any(|m| !(m.is_finite() && *m > 0.0)) || coeffs.iter().any(|a| !a.is_finite()) {
        return invalid("masses must be positive and coefficients finite");
    }
    let total: f64 = measures.iter().sum();
    let cap = 1.0 - 1.0 / (k + 1) as f64;
    if total > cap + 1e-12 {
        return invalid(format!("total mass {total} exceeds 1 - 1/(k+1) = {cap}"));
    }
    let second: f64 = measures.iter().zip(coeffs).map(|(m, a)| a * a * m).sum();
    let first: f64 = measures.iter().zip(coeffs).map(|(m, a)| a * m).sum();
    let lhs = second - first * first;
    let rhs = measures.iter().zip(coeffs).map(|(m, a)| a * a * m * (1.0 - m)).sum::<f64>() / (k + 1) as f64;
    Ok(InequalityReport::evaluate(
        "indicator_quadratic_form",
        "int (sum a_i (1_{A_i} - mu(A_i)))^2 >= (1/(k+1)) sum a_i^2 mu(A_i)(1 - mu(A_i))",
        lhs,
        rhs,
        Relation::Ge,
        CheckClass::Hard,
        0.0,
    )
    .with_param("k", k)
    .with_param("measures", measures.to_vec())
    .with_param("coeffs", coeffs.to_vec()))
}

pub fn check_sweep_lemma(space: &MMSpace, f: &[f64]) -> Result<InequalityReport> {
    let cut = isoperimetry::sweep_cut(space, f)?;
    Ok(InequalityReport::evaluate(
        "sweep_lemma",
        "min_t mu^+({f^2 >= t}) / mu({f^2 >= t}) <= 2 || grad f ||_2 / || f ||_2",
        cut.value,
        isoperimetry::sweep_lemma_bound(space, f),
        Relation::Le,
        CheckClass::Hard,
        0.0,
    )
    .with_param("set_size", cut.family.sets()[0].len()))
}

/// One row of the growth table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: usize,
    pub lambda_k: f64,
    pub h_k: f64,
    pub lambda_ratio: f64,
    pub h_ratio: f64,
    pub h_over_k3_sqrt_lambda: f64,
    pub buser_ratio: f64,
    pub h_provenance: Provenance,
}

pub fn ratio_table(eval: &Evaluator<'_>, k_max: usize) -> Result<Vec<RatioRow>> {
    let l1 = eval.lambda(1)?;
    let h1 = eval.hk(1)?.0.value;
    let k_max = k_max.min(eval.space().n() - 1);
    (1..=k_max)
        .map(|k| {
            let l = eval.lambda(k)?;
            let (h, hp) = eval.hk(k)?;
            let k3 = (k as f64).powi(3);
            Ok(RatioRow {
                k,
                lambda_k: l,
                h_k: h.value,
                lambda_ratio: l / l1,
                h_ratio: h.value / h1,
                h_over_k3_sqrt_lambda: h.value / (k3 * l.sqrt()),
                buser_ratio: l.sqrt() / (80.0 * k3 * h.value),
                h_provenance: hp,
            })
        })
        .collect()
}

/// Report-only growth rows; the constants in these bounds are unquantified.
pub fn ratio_reports(rows: &[RatioRow]) -> Vec<InequalityReport> {
    let mut out = Vec::new();
    for r in rows {
        let entries = [
            ("lambda_growth", "lambda_k <= exp(ck) lambda_1", r.lambda_k, r.lambda_k / r.lambda_ratio),
            ("hk_growth", "h_k <= k^3 exp(ck) h_1", r.h_k, r.h_k / r.h_ratio),
            ("hk_spectral_upper", "h_k <= C k^3 sqrt(lambda_k)", r.h_k, r.h_k / r.h_over_k3_sqrt_lambda),
        ];
        for (id, anchor, lhs, rhs) in entries {
            out.push(
                InequalityReport::evaluate(&format!("{id}/k={}", r.k), anchor, lhs, rhs, Relation::Le, CheckClass::ReportOnly, 0.0)
                    .with_param("k", r.k)
                    .with_param("class_reason", "constant unquantified")
                    .with_provenance("h_k", r.h_provenance),
            );
        }
    }
    out
}

pub fn ratio_table_csv(rows: &[RatioRow]) -> String {
    let mut s = String::from("k,lambda_ratio,h_ratio,h_over_k3_sqrt_lambda,buser_ratio,h_provenance\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.lambda_ratio, r.h_ratio, r.h_over_k3_sqrt_lambda, r.buser_ratio, r.h_provenance
        ));
    }
    s
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::Verdict;
    use crate::mmspace::{gen_cycle, gen_dumbbell, gen_gauss_interval, Subset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::Value;
    use std::f64::consts::PI;

    fn two_points() -> MMSpace {
        MMSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5], vec![(0, 1, 1.0)], None, Value::Null).unwrap()
    }

    fn indicator_combination(n: usize, sets: &[Subset], coeffs: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; n];
        for (a, c) in sets.iter().zip(coeffs) {
            for &i in a.indices() {
                f[i] += c;
            }
        }
        f
    }

    fn eval(space: &MMSpace) -> Evaluator<'_> {
        Evaluator::new(space, Caps::default(), DEFAULT_SLACK, 0)
    }

    #[test]
    fn two_point_examples() {
        let s = two_points();
        let e = eval(&s);
        let c = e.cheeger_mazya().unwrap();
        assert_eq!(c.lhs, 2.0);
        assert!((c.rhs - 4.0).abs() < 1e-12);
        assert_eq!(c.class, CheckClass::ReportOnly);
        let g = e.cgy_separation(&[0.5, 0.5]).unwrap();
        assert_eq!(g.lhs, 1.0);
        assert!((g.rhs - 0.5 * (4.0 * std::f64::consts::E).ln()).abs() < 1e-12);
        assert_eq!(g.params["holds"], Value::from(true));
        let gm = e.gromov_milman(0.5).unwrap();
        assert_eq!(gm[0].lhs, 0.5);
        assert!((gm[0].rhs - (-1.0f64 / 3.0).exp()).abs() < 1e-12);
        let over = e.cgy_separation(&[0.6, 0.6]).unwrap();
        assert_eq!(over.lhs, 0.0);
    }

    #[test]
    fn cycle_examples() {
        let s = gen_cycle(256, 2.0 * PI).unwrap();
        let e = eval(&s);
        let c = e.cheeger_mazya().unwrap();
        assert_eq!(c.class, CheckClass::Tolerance);
        assert_eq!(c.verdict, Verdict::Pass);
        assert!((c.lhs - 2.0 / PI).abs() < 0.01);
        for k in 1..=3 {
            let b = e.buser_extended(k).unwrap();
            assert_eq!(b.class, CheckClass::Tolerance);
            assert_eq!(b.verdict, Verdict::Pass);
            assert_eq!(b.provenance["h_k"], Provenance::Exact);
        }
        let g = e.cgy_separation(&[0.25, 0.25]).unwrap();
        assert!((g.lhs - PI / 2.0).abs() < 0.02 * PI / 2.0);
        assert_eq!(g.verdict, Verdict::Pass);
        let em = e.emilman_converse(0.25).unwrap();
        assert!(em.iter().all(|r| r.verdict == Verdict::Pass && r.class == CheckClass::Tolerance));
        assert!((em[0].rhs - PI / 4.0).abs() < 0.01);
        let half = e.emilman_converse(0.5).unwrap();
        assert_eq!(half[0].rhs, 0.0);
        let m = e.multiway_sep_bound(1, 0.25).unwrap();
        assert!((m.rhs - 37.7).abs() < 0.3, "{}", m.rhs);
        assert_eq!(m.verdict, Verdict::Pass);
        let gm = e.gromov_milman(0.0).unwrap();
        assert!(gm.iter().all(|r| r.rhs == 1.0 && r.verdict == Verdict::Pass));
    }

    #[test]
    fn dumbbell_is_report_only() {
        let s = gen_dumbbell(5, 1, 1e-4).unwrap();
        let e = eval(&s);
        assert_eq!(e.buser_extended(2).unwrap().class, CheckClass::ReportOnly);
        let rows = ratio_table(&e, 3).unwrap();
        assert!(rows[1].lambda_ratio > 100.0);
        assert_eq!(rows[0].lambda_ratio, 1.0);
    }

    #[test]
    fn sweep_provenance_downgrades_buser() {
        let s = gen_gauss_interval(40, 1.0, 5.0).unwrap();
        let caps = Caps { hk_exact_n: 8, ..Caps::default() };
        let e = Evaluator::new(&s, caps, DEFAULT_SLACK, 0);
        assert_eq!(e.hk(2).unwrap().1, Provenance::Exact);
        let torus = crate::mmspace::gen_grid_torus(6, 6, 1.0, 1.0).unwrap();
        let e = Evaluator::new(&torus, caps, DEFAULT_SLACK, 0);
        let b = e.buser_extended(1).unwrap();
        assert_eq!(b.provenance["h_k"], Provenance::Sweep);
        assert_eq!(b.class, CheckClass::ReportOnly);
        assert_eq!(e.cheeger_mazya().unwrap().class, CheckClass::Tolerance);
    }

    #[test]
    fn bracketed_sep_decides_checks_soundly() {
        let s = gen_cycle(64, 2.0 * PI).unwrap();
        let exact = Evaluator::new(&s, Caps::default(), DEFAULT_SLACK, 0);
        let starved = Evaluator::new(&s, Caps { sep_nodes: 0, ..Caps::default() }, DEFAULT_SLACK, 0);
        let kappas = [0.2, 0.2, 0.2];
        let (truth, p) = exact.sep(&kappas).unwrap();
        assert_eq!(p, Provenance::Exact);
        let (b, p) = starved.sep(&kappas).unwrap();
        assert_eq!(p, Provenance::Bracket);
        assert!(!b.exact && b.value <= truth.value && truth.value <= b.upper);
        let r = starved.cgy_separation(&kappas).unwrap();
        assert_eq!(r.class, CheckClass::Tolerance);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.lhs, b.upper);
        let (pair, _) = starved.sep(&[0.2, 0.2]).unwrap();
        for r in starved.emilman_converse(0.2).unwrap() {
            match (pair.exact, r.class, r.verdict) {
                (true, _, _) => assert_eq!(r.lhs, pair.value),
                (false, CheckClass::Tolerance, Verdict::Pass) => assert_eq!(r.lhs, pair.value),
                (false, CheckClass::Tolerance, _) => assert_eq!(r.lhs, pair.upper),
                (false, _, _) => assert_eq!(r.params["class_reason"], "sep bracket does not decide the check"),
            }
        }
    }

    #[test]
    fn constant_chain_holds_up_to_fifty() {
        assert_eq!(proof_constant(1), 68.0);
        for k in 1..=50 {
            assert_eq!(check_buser_constant_chain(k).verdict, Verdict::Pass, "k = {k}");
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let r = check_indicator_quadratic_form(&[0.5], &[1.0], 1).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.25, 0.125));
        let r = check_indicator_quadratic_form(&[0.2, 0.3], &[0.0, 0.0], 2).unwrap();
        assert_eq!((r.lhs, r.rhs, r.verdict), (0.0, 0.0, Verdict::Pass));
        assert!(check_indicator_quadratic_form(&[0.6], &[1.0], 1).is_err());
        assert!(check_indicator_quadratic_form(&[0.0, 0.1], &[1.0, 1.0], 2).is_err());
        assert!(check_indicator_quadratic_form(&[0.1], &[1.0, 1.0], 1).is_err());
    }

    #[test]
    fn quadratic_form_matches_direct_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(3..12);
            let s = crate::harness::random::random_geometric_space(&mut rng, n);
            let k = rng.gen_range(1..n.min(5));
            let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=k)).collect();
            labels[..=k].iter_mut().enumerate().for_each(|(i, l)| *l = i);
            let mut sets: Vec<Subset> = (0..=k).map(|j| Subset::from_indices(n, (0..n).filter(|&x| labels[x] == j))).collect();
            sets.sort_by(|a, b| s.subset_measure(a).total_cmp(&s.subset_measure(b)));
            sets.truncate(k);
            let masses: Vec<f64> = sets.iter().map(|a| s.subset_measure(a)).collect();
            let coeffs: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r = check_indicator_quadratic_form(&masses, &coeffs, k).unwrap();
            assert_eq!(r.verdict, Verdict::Pass);
            let f = indicator_combination(n, &sets, &coeffs);
            let m = spectral::mean(&s, &f);
            let centered: Vec<f64> = f.iter().map(|v| v - m).collect();
            let direct = spectral::inner(&s, &centered, &centered);
            assert!((direct - r.lhs).abs() < 1e-12, "{direct} vs {}", r.lhs);
            let per_set: f64 = sets
                .iter()
                .zip(&coeffs)
                .map(|(a, c)| {
                    let g: Vec<f64> = a.indicator().iter().map(|v| v - s.subset_measure(a)).collect();
                    c * c * spectral::inner(&s, &g, &g)
                })
                .sum::<f64>()
                / (k + 1) as f64;
            assert!((per_set - r.rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_checks_on_cycle() {
        let s = gen_cycle(64, 2.0 * PI).unwrap();
        let e = eval(&s);
        let q = e.witness_quadratic_form(2, &[1.0, -0.5]).unwrap();
        assert_eq!(q.verdict, Verdict::Pass);
        let heat = e.witness_heat_checks(1).unwrap();
        assert_eq!(heat.len(), 6);
        assert!(heat.iter().all(|r| r.class == CheckClass::Tolerance), "{heat:#?}");
    }
}
