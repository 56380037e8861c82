//! Suite driver: which checks run on a space, with which parameters.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::checks::{
    check_buser_constant_chain, check_indicator_quadratic_form, ratio_reports, ratio_table, Caps, Evaluator, RatioRow,
    DEFAULT_SLACK,
};
use crate::harness::lemmas::{self, Tally};
use crate::harness::random::{random_function, random_geometric_space, random_probability};
use crate::harness::report::{InequalityReport, Relation};
use crate::mmspace::MMSpace;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Eigenvalue and isoperimetric inequalities on the input space.
    Spectral,
    /// Separation and concentration inequalities on the input space.
    Separation,
    /// Transport identities on the input space.
    Transport,
    /// Exact lemmas on random small spaces (and on the input when small).
    Lemmas,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Spectral, Suite::Separation, Suite::Transport, Suite::Lemmas];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Spectral => "spectral",
            Suite::Separation => "separation",
            Suite::Transport => "transport",
            Suite::Lemmas => "lemmas",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Relative slack for tolerance-class checks.
    pub slack: f64,
    /// Empty means every suite.
    pub suites: Vec<Suite>,
    pub k_max: usize,
    /// Number of random spaces for the lemma suite.
    pub random_spaces: usize,
    pub caps: Caps,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            slack: DEFAULT_SLACK,
            suites: Vec::new(),
            k_max: 3,
            random_spaces: 20,
            caps: Caps::default(),
        }
    }
}

impl SuiteConfig {
    fn runs(&self, s: Suite) -> bool {
        self.suites.is_empty() || self.suites.contains(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    /// Sorted by id.
    pub reports: Vec<InequalityReport>,
    /// Empty unless the spectral suite ran.
    pub ratio_rows: Vec<RatioRow>,
}

const CGY_KAPPAS: [&[f64]; 3] = [&[0.25, 0.25], &[0.1, 0.3], &[0.2, 0.2, 0.2]];
const EMILMAN_KAPPAS: [f64; 2] = [0.1, 0.25];
const MULTIWAY: [(usize, f64); 2] = [(1, 0.25), (2, 0.2)];
const GM_RADII: [f64; 4] = [0.0, 0.125, 0.25, 0.5];
const LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
const RANDOM_TUPLES: usize = 1000;
/// Largest input space whose transport identities are checked.
const TRANSPORT_MAX_N: usize = 64;
const EXHAUSTIVE_INPUT_MAX_N: usize = 10;

pub fn verify_suite(space: &MMSpace, config: &SuiteConfig) -> Result<Vec<InequalityReport>> {
    Ok(run_suite(space, config)?.reports)
}

pub fn run_suite(space: &MMSpace, config: &SuiteConfig) -> Result<SuiteOutput> {
    if !(config.slack >= 0.0 && config.slack.is_finite()) {
        return invalid(format!("slack must be finite and nonnegative, got {}", config.slack));
    }
    let eval = Evaluator::new(space, config.caps, config.slack, config.seed);
    let k_max = config.k_max.min(space.n() - 1);
    let mut reports = Vec::new();
    let mut ratio_rows = Vec::new();
    if config.runs(Suite::Spectral) && space.n() >= 2 {
        spectral_suite(&eval, k_max, config.seed, &mut reports)?;
        ratio_rows = ratio_table(&eval, k_max)?;
        reports.extend(ratio_reports(&ratio_rows));
    }
    if config.runs(Suite::Separation) && space.n() >= 2 {
        separation_suite(&eval, k_max, &mut reports)?;
    }
    if config.runs(Suite::Transport) && space.n() <= TRANSPORT_MAX_N {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7472_616e);
        reports.extend(transport_checks(space, &mut rng, config.caps.prohorov_n, "input")?);
    }
    if config.runs(Suite::Lemmas) {
        lemma_suite(space, config, &mut reports)?;
    }
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SuiteOutput { reports, ratio_rows })
}

fn spectral_suite(eval: &Evaluator<'_>, k_max: usize, seed: u64, out: &mut Vec<InequalityReport>) -> Result<()> {
    let space = eval.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7370_6563);
    out.push(eval.cheeger_mazya()?);
    for k in 1..=k_max {
        out.push(eval.buser_extended(k)?);
        let coeffs: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        out.push(eval.witness_quadratic_form(k, &coeffs)?);
        out.extend(eval.witness_heat_checks(k)?);
    }
    let spec = spectral::eigenpairs(space, k_max)?;
    for j in 1..=k_max {
        out.push(eval.sweep_lemma(&spec.eigenfunctions[j], &format!("eigenfunction={j}"))?);
    }
    let mut coarea = Tally::new(Relation::Le);
    for i in 0..3 {
        let f = random_function(&mut rng, space.n());
        out.push(eval.sweep_lemma(&f, &format!("random={i}"))?);
        lemmas::coarea(space, &f, &mut coarea)?;
    }
    out.push(coarea.report("coarea/input", COAREA));
    Ok(())
}

fn separation_suite(eval: &Evaluator<'_>, k_max: usize, out: &mut Vec<InequalityReport>) -> Result<()> {
    let diam = eval.space().diameter();
    for kappas in CGY_KAPPAS {
        if kappas.len() - 1 <= k_max {
            out.push(eval.cgy_separation(kappas)?);
        }
    }
    for f in GM_RADII {
        out.extend(eval.gromov_milman(f * diam)?);
    }
    for kappa in EMILMAN_KAPPAS {
        out.extend(eval.emilman_converse(kappa)?);
    }
    for (k, kappa) in MULTIWAY {
        if k <= k_max {
            out.push(eval.multiway_sep_bound(k, kappa)?);
        }
    }
    Ok(())
}

const COAREA: &str = "int mu^+({g >= v}) dv = sum w d |g(x) - g(y)|";

/// Transport identities on random measure pairs of one space.
pub fn transport_checks(space: &MMSpace, rng: &mut impl Rng, prohorov_n: usize, tag: &str) -> Result<Vec<InequalityReport>> {
    let n = space.n();
    let mut strassen = Tally::new(Relation::Le);
    let mut metric = Tally::new(Relation::Le);
    let mut mono = Tally::new(Relation::Le);
    let mut entropy = Tally::new(Relation::Ge);
    for _ in 0..2 {
        let m: Vec<Vec<f64>> = (0..3).map(|_| random_probability(rng, n, true)).collect();
        if n <= prohorov_n {
            for lambda in LAMBDAS {
                lemmas::strassen(space, &m[0], &m[1], lambda, prohorov_n, &mut strassen)?;
            }
        }
        lemmas::w2_metric(space, [&m[0], &m[1], &m[2]], &mut metric)?;
        lemmas::tra_monotone(space, &m[0], &m[1], &LAMBDAS, &mut mono)?;
        lemmas::entropy_nonnegative(space, &m[2], &mut entropy)?;
    }
    let mut out = vec![
        metric.report(&format!("w2_metric/{tag}"), "W2 symmetric, W2(a, a) = 0, W2(a, c) <= W2(a, b) + W2(b, c)"),
        mono.report(&format!("tra_monotone/{tag}"), "lambda <= lambda' implies tra_lambda' <= tra_lambda"),
        entropy.report(&format!("entropy_nonnegative/{tag}"), "Ent(nu | mu) >= 0"),
    ];
    if strassen.cases() > 0 {
        out.push(strassen.report(&format!("strassen/{tag}"), "|tra_lambda - di_lambda| <= 1e-6"));
    }
    Ok(out)
}

/// The exhaustive lemma checks on one small space, one report per property.
pub fn exhaustive_lemmas(space: &MMSpace, rng: &mut impl Rng, seed: u64, tag: &str) -> Result<Vec<InequalityReport>> {
    let diam = space.diameter();
    let mut nb = Tally::new(Relation::Le);
    for _ in 0..2 {
        let (r0, r) = (rng.gen_range(0.05..0.6) * diam, rng.gen_range(0.05..0.6) * diam);
        nb.merge(lemmas::neighborhood_lemma(space, r0, r)?);
    }
    let k1 = [rng.gen_range(0.1..0.45), rng.gen_range(0.1..0.45)];
    let k2 = [rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3)];
    let mut restriction = lemmas::restriction_lemma(space, &k1)?;
    restriction.merge(lemmas::restriction_lemma(space, &k2)?);
    let mut covering = lemmas::covering_lemma(space, &k1)?;
    covering.merge(lemmas::covering_lemma(space, &k2)?);
    let mut sep_mono = lemmas::sep_monotonicity(space, &[0.1, 0.25, 0.4], 1)?;
    sep_mono.merge(lemmas::sep_monotonicity(space, &[0.1, 0.2, 0.3], 2)?);
    let (hk_mono, hk_sweep) = lemmas::hk_monotonicity(space, 2, seed)?;
    let (mut obs_up, mut obs_low) = (Tally::new(Relation::Le), Tally::new(Relation::Ge));
    for kappa in [0.2, 0.3, 0.4] {
        let (u, l) = lemmas::obs_sandwich(space, kappa, kappa - 0.05)?;
        obs_up.merge(u);
        obs_low.merge(l);
    }
    let radii: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0 * diam).collect();
    let (conc_mono, conc_half) = lemmas::concentration_profile_checks(space, &radii)?;
    let mut sweep = Tally::new(Relation::Le);
    let mut coarea = Tally::new(Relation::Le);
    for _ in 0..5 {
        let f = random_function(rng, space.n());
        let r = crate::harness::checks::check_sweep_lemma(space, &f)?;
        sweep.record(r.lhs, r.rhs, || format!("f = {f:?}"));
        lemmas::coarea(space, &f, &mut coarea)?;
    }
    let id = |p: &str| format!("{p}/{tag}");
    Ok(vec![
        nb.report(&id("neighborhood_lemma"), "mu(A) > alpha(r0) implies mu(X \\ O_{r+r0}(A)) <= alpha(r)"),
        restriction.report(&id("restriction_lemma"), "sep(X_A; kappas) <= sep(X; mu(A) kappas)"),
        covering.report(
            &id("covering_lemma"),
            "r = sep(kappa_0..kappa_k), r-separated A_0..A_{k-1} imply mu(U C_r(A_i)) >= 1 - kappa_k",
        ),
        sep_mono.report(&id("sep_monotone"), "kappa >= kappa' implies sep(kappa) <= sep(kappa')"),
        hk_mono.report(&id("hk_monotone"), "h_k <= h_{k+1}"),
        hk_sweep.report(&id("hk_sweep_upper"), "sweep h_k >= exact h_k"),
        obs_up.report(&id("obs_sandwich_upper"), "ObsDiam(-2 kappa) <= sep(kappa, kappa)"),
        obs_low.report(&id("obs_sandwich_lower"), "ObsDiam(-kappa') >= sep(kappa, kappa) for kappa' < kappa"),
        conc_mono.report(&id("concentration_monotone"), "r <= r' implies alpha(r') <= alpha(r)"),
        conc_half.report(&id("concentration_half"), "alpha(r) <= 1/2"),
        sweep.report(&id("sweep_lemma"), "min_t mu^+({f^2 >= t}) / mu({f^2 >= t}) <= 2 || grad f ||_2 / || f ||_2"),
        coarea.report(&id("coarea"), COAREA),
    ])
}

/// `count` admissible random tuples for the indicator quadratic form.
pub fn random_quadratic_forms(rng: &mut impl Rng, count: usize, k_max: usize) -> Result<Tally> {
    let mut t = Tally::new(Relation::Ge);
    for _ in 0..count {
        let k = rng.gen_range(1..=k_max);
        let cap = 1.0 - 1.0 / (k + 1) as f64;
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let scale = rng.gen_range(0.05..=1.0) * cap / raw.iter().sum::<f64>();
        let masses: Vec<f64> = raw.iter().map(|m| m * scale).collect();
        let coeffs: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let r = check_indicator_quadratic_form(&masses, &coeffs, k)?;
        t.record(r.lhs, r.rhs, || format!("masses = {masses:?}, coeffs = {coeffs:?}"));
    }
    Ok(t)
}

fn lemma_suite(space: &MMSpace, config: &SuiteConfig, out: &mut Vec<InequalityReport>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6c65_6d6d);
    let mut chain = Tally::new(Relation::Le);
    for k in 1..=50 {
        let r = check_buser_constant_chain(k);
        chain.record(r.lhs, r.rhs, || format!("k = {k}"));
    }
    out.push(chain.report("buser_constant_chain/k=1..50", "(16k(k+1) + 2) sqrt(2k(k+1)) <= 80 k^3"));
    out.push(random_quadratic_forms(&mut rng, RANDOM_TUPLES, 5)?.report(
        "indicator_quadratic_form/random_tuples",
        "int (sum a_i (1_{A_i} - mu(A_i)))^2 >= (1/(k+1)) sum a_i^2 mu(A_i)(1 - mu(A_i))",
    ));
    if space.n() >= 3 && space.n() <= EXHAUSTIVE_INPUT_MAX_N {
        out.extend(exhaustive_lemmas(space, &mut rng, config.seed, "input")?);
    }
    for i in 0..config.random_spaces {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
        let n = rng.gen_range(4..=EXHAUSTIVE_INPUT_MAX_N);
        let s = random_geometric_space(&mut rng, n);
        let tag = format!("random={i:02}");
        out.extend(exhaustive_lemmas(&s, &mut rng, config.seed, &tag)?);
        out.extend(transport_checks(&s, &mut rng, config.caps.prohorov_n, &tag)?);
    }
    Ok(())
}
