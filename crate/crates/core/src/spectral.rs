//! Weighted Laplacian, its eigenpairs, the heat semigroup and the
//! gradient estimates built on them.
//!
//! The Laplacian acts as `(L f)(x) = (1/mu(x)) sum_y w(x,y) (f(x) - f(y))`,
//! which is self-adjoint and nonnegative in `L^2(mu)`. The heat semigroup is
//! `P_t = exp(-t L)`, evaluated through the full eigendecomposition.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::harness::report::{CheckClass, InequalityReport, Relation, ABS_EPS};
use crate::mmspace::MMSpace;

/// Largest space handled by the dense eigensolver.
pub const MAX_DENSE_N: usize = 2048;

/// Default slack for the gradient-estimate checks on model discretizations.
pub const GRADIENT_CHECK_SLACK: f64 = 1e-2;

/// Dense matrix of the weighted Laplacian.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    matrix: Vec<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.matrix[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(f)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

fn require_connected(space: &MMSpace) -> Result<()> {
    let comps = space.components();
    if comps.len() > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    Ok(())
}

fn require_len(space: &MMSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.n() {
        return invalid(format!("function has {} values for {} points", f.len(), space.n()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return invalid("function values must be finite");
    }
    Ok(())
}

pub fn assemble_laplacian(space: &MMSpace) -> Result<Laplacian> {
    require_connected(space)?;
    let n = space.n();
    let mu = space.measure();
    let mut matrix = vec![0.0; n * n];
    for e in space.edges() {
        matrix[e.i * n + e.j] -= e.w / mu[e.i];
        matrix[e.j * n + e.i] -= e.w / mu[e.j];
        matrix[e.i * n + e.i] += e.w / mu[e.i];
        matrix[e.j * n + e.j] += e.w / mu[e.j];
    }
    Ok(Laplacian { n, matrix })
}

/// Ascending eigenvalues with `mu`-orthonormal eigenfunctions.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `lambda_k`; panics when `k` is out of range.
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    fn truncated(&self, m: usize) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues[..=m].to_vec(),
            eigenfunctions: self.eigenfunctions[..=m].to_vec(),
        }
    }
}

/// Full eigendecomposition, computed once per space and shared.
pub fn full_spectrum(space: &MMSpace) -> Result<Arc<Spectrum>> {
    if let Some(s) = space.spectrum_cache().get() {
        return Ok(s.clone());
    }
    let s = Arc::new(compute_spectrum(space)?);
    Ok(space.spectrum_cache().get_or_init(|| s).clone())
}

fn compute_spectrum(space: &MMSpace) -> Result<Spectrum> {
    let n = space.n();
    if n > MAX_DENSE_N {
        return Err(Error::CapExceeded {
            what: "dense eigensolver",
            detail: format!("n = {n} > {MAX_DENSE_N}"),
            hint: "coarsen the space",
        });
    }
    require_connected(space)?;
    let mu = space.measure();
    let sq: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    // symmetric conjugate M^{1/2} L M^{-1/2} = M^{-1/2} (D - W) M^{-1/2}
    let mut s = DMatrix::<f64>::zeros(n, n);
    for e in space.edges() {
        let off = e.w / (sq[e.i] * sq[e.j]);
        s[(e.i, e.j)] -= off;
        s[(e.j, e.i)] -= off;
        s[(e.i, e.i)] += e.w / mu[e.i];
        s[(e.j, e.j)] += e.w / mu[e.j];
    }
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenfunctions = Vec::with_capacity(n);
    for &c in &order {
        // L is positive semidefinite; negative values are rounding noise
        eigenvalues.push(eig.eigenvalues[c].max(0.0));
        let col = eig.eigenvectors.column(c);
        let mut phi: Vec<f64> = (0..n).map(|i| col[i] / sq[i]).collect();
        orient(&mut phi);
        eigenfunctions.push(phi);
    }
    eigenvalues[0] = 0.0;
    Ok(Spectrum { eigenvalues, eigenfunctions })
}

/// Fixes the sign so that the first entry of non-negligible size is positive.
fn orient(phi: &mut [f64]) {
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(first) = phi.iter().find(|v| v.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// The first `m + 1` eigenpairs `lambda_0 <= ... <= lambda_m`.
pub fn eigenpairs(space: &MMSpace, m: usize) -> Result<Spectrum> {
    if m >= space.n() {
        return invalid(format!("requested {} eigenpairs of a {}-point space", m + 1, space.n()));
    }
    Ok(full_spectrum(space)?.truncated(m))
}

pub fn inner(space: &MMSpace, f: &[f64], g: &[f64]) -> f64 {
    space.measure().iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
}

pub fn mean(space: &MMSpace, f: &[f64]) -> f64 {
    space.measure().iter().zip(f).map(|(m, a)| m * a).sum()
}

/// `L^p(mu)` norm for `p >= 1`.
pub fn norm_lp(space: &MMSpace, f: &[f64], p: f64) -> f64 {
    let s: f64 = space
        .measure()
        .iter()
        .zip(f)
        .map(|(m, a)| m * a.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

pub fn norm_l2(space: &MMSpace, f: &[f64]) -> f64 {
    inner(space, f, f).sqrt()
}

/// `E(f) = sum over edges of w (f(x) - f(y))^2`, each edge counted once.
pub fn dirichlet_energy(space: &MMSpace, f: &[f64]) -> f64 {
    space
        .edges()
        .iter()
        .map(|e| e.w * (f[e.i] - f[e.j]).powi(2))
        .sum()
}

pub fn rayleigh(space: &MMSpace, f: &[f64]) -> Result<f64> {
    require_len(space, f)?;
    let norm2 = inner(space, f, f);
    if norm2 == 0.0 {
        return invalid("rayleigh quotient of the zero function");
    }
    Ok(dirichlet_energy(space, f) / norm2)
}

/// `f_t = P_t f` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub values: Vec<f64>,
    pub time: f64,
}

pub fn heat_apply(space: &MMSpace, f: &[f64], t: f64) -> Result<HeatState> {
    require_len(space, f)?;
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("heat time must be a finite nonnegative real, got {t}"));
    }
    if t == 0.0 {
        return Ok(HeatState { values: f.to_vec(), time: 0.0 });
    }
    let spec = full_spectrum(space)?;
    let mut out = vec![0.0; space.n()];
    for (lambda, phi) in spec.eigenvalues.iter().zip(&spec.eigenfunctions) {
        let decay = (-lambda * t).exp();
        if decay == 0.0 {
            continue;
        }
        let c = inner(space, f, phi) * decay;
        for (o, p) in out.iter_mut().zip(phi) {
            *o += c * p;
        }
    }
    Ok(HeatState { values: out, time: t })
}

/// Discrete local-gradient conventions.
///
/// `EdgeSum` is `(1/mu(x)) sum_y w(x,y) d(x,y) |f(x) - f(y)|`. Every edge
/// contributes to both of its endpoints, so on one-dimensional meshes the
/// value is twice the continuum slope and `int EdgeSum(1_A) dmu = 2 mu^+(A)`.
/// `Calibrated` halves it, which restores `int |grad 1_A| dmu = mu^+(A)` and
/// the continuum slope on model meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientConvention {
    EdgeSum,
    Calibrated,
}

impl GradientConvention {
    pub fn name(self) -> &'static str {
        match self {
            GradientConvention::EdgeSum => "edge-sum",
            GradientConvention::Calibrated => "edge-sum/2",
        }
    }
}

/// L1-type local gradient in the edge-sum convention.
pub fn grad_l1(space: &MMSpace, f: &[f64]) -> Vec<f64> {
    gradient(space, f, GradientConvention::EdgeSum)
}

pub fn gradient(space: &MMSpace, f: &[f64], convention: GradientConvention) -> Vec<f64> {
    let mut g = vec![0.0; space.n()];
    for e in space.edges() {
        let v = e.w * space.dist(e.i, e.j) * (f[e.i] - f[e.j]).abs();
        g[e.i] += v;
        g[e.j] += v;
    }
    let factor = match convention {
        GradientConvention::EdgeSum => 1.0,
        GradientConvention::Calibrated => 0.5,
    };
    for (gi, m) in g.iter_mut().zip(space.measure()) {
        *gi *= factor / m;
    }
    g
}

/// `c(t) = (1 - exp(2Kt)) / (-K)`, equal to `2t` when `K = 0`.
pub fn bakry_ledoux_c(t: f64, k: f64) -> f64 {
    if k == 0.0 {
        2.0 * t
    } else {
        (2.0 * k * t).exp_m1() / k
    }
}

fn model_class(space: &MMSpace) -> CheckClass {
    if space.is_curvature_model() {
        CheckClass::Tolerance
    } else {
        CheckClass::ReportOnly
    }
}

/// Pointwise `c(t) |grad P_t f|^2 <= P_t(f^2) - (P_t f)^2`.
///
/// The report carries the values at the worst point. On model spaces the
/// check passes when every point satisfies the inequality up to
/// `GRADIENT_CHECK_SLACK * max_x (P_t(f^2) - (P_t f)^2)(x)`.
pub fn check_bakry_ledoux(space: &MMSpace, f: &[f64], t: f64, k: f64) -> Result<InequalityReport> {
    require_len(space, f)?;
    if !(k <= 0.0 && k.is_finite()) {
        return invalid(format!("curvature bound K must be nonpositive, got {k}"));
    }
    let pf = heat_apply(space, f, t)?.values;
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let pf2 = heat_apply(space, &f2, t)?.values;
    let grad = gradient(space, &pf, GradientConvention::Calibrated);
    let c = bakry_ledoux_c(t, k);
    let lhs: Vec<f64> = grad.iter().map(|g| c * g * g).collect();
    let rhs: Vec<f64> = pf2.iter().zip(&pf).map(|(a, b)| a - b * b).collect();
    let worst = (0..space.n())
        .max_by(|&a, &b| (lhs[a] - rhs[a]).total_cmp(&(lhs[b] - rhs[b])))
        .expect("nonempty space");
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(*v));
    let class = model_class(space);
    let accepted = lhs[worst] - rhs[worst] <= GRADIENT_CHECK_SLACK * scale + ABS_EPS;
    let mut report = InequalityReport::with_acceptance(
        "bakry_ledoux",
        "c(t) |grad P_t f|^2 <= P_t(f^2) - (P_t f)^2, c(t) = (1 - exp(2Kt))/(-K)",
        lhs[worst],
        rhs[worst],
        Relation::Le,
        class,
        accepted,
    );
    if class == CheckClass::Tolerance {
        report.params.insert("slack".into(), GRADIENT_CHECK_SLACK.into());
    }
    Ok(report
        .with_param("t", t)
        .with_param("K", k)
        .with_param("worst_point", worst)
        .with_param("margin", rhs[worst] - lhs[worst])
        .with_param("slack_scale", scale)
        .with_param("gradient", GradientConvention::Calibrated.name()))
}

/// `||f - P_t f||_{L^1} <= sqrt(2t) || |grad f| ||_{L^1}`.
pub fn check_ledoux_l1(space: &MMSpace, f: &[f64], t: f64) -> Result<InequalityReport> {
    require_len(space, f)?;
    let pf = heat_apply(space, f, t)?.values;
    let diff: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
    let lhs = norm_lp(space, &diff, 1.0);
    let grad = gradient(space, f, GradientConvention::Calibrated);
    let rhs = (2.0 * t).sqrt() * norm_lp(space, &grad, 1.0);
    Ok(InequalityReport::evaluate(
        "ledoux_l1",
        "||f - P_t f||_1 <= sqrt(2t) || |grad f| ||_1",
        lhs,
        rhs,
        Relation::Le,
        model_class(space),
        GRADIENT_CHECK_SLACK,
    )
    .with_param("t", t)
    .with_param("gradient", GradientConvention::Calibrated.name()))
}

/// `|| |grad P_t f| ||_p <= ||f||_p / sqrt(2t)` for `p >= 2`, `t > 0`.
pub fn check_gradient_contraction(space: &MMSpace, f: &[f64], t: f64, p: f64) -> Result<InequalityReport> {
    require_len(space, f)?;
    if !(t > 0.0) {
        return invalid(format!("gradient contraction needs t > 0, got {t}"));
    }
    if !(p >= 2.0) {
        return invalid(format!("gradient contraction needs p >= 2, got {p}"));
    }
    let pf = heat_apply(space, f, t)?.values;
    let grad = gradient(space, &pf, GradientConvention::Calibrated);
    let lhs = norm_lp(space, &grad, p);
    let rhs = norm_lp(space, f, p) / (2.0 * t).sqrt();
    Ok(InequalityReport::evaluate(
        "gradient_contraction",
        "|| |grad P_t f| ||_p <= ||f||_p / sqrt(2t)",
        lhs,
        rhs,
        Relation::Le,
        model_class(space),
        GRADIENT_CHECK_SLACK,
    )
    .with_param("t", t)
    .with_param("p", p)
    .with_param("gradient", GradientConvention::Calibrated.name()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::Verdict;
    use crate::mmspace::{gen_cycle, gen_dumbbell, gen_gauss_interval};
    use serde_json::Value;
    use std::f64::consts::PI;

    pub(crate) fn two_points() -> MMSpace {
        MMSpace::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![(0, 1, 1.0)],
            None,
            Value::Null,
        )
        .unwrap()
    }

    fn cycle_samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(2.0 * PI * i as f64 / n as f64)).collect()
    }

    #[test]
    fn two_point_laplacian_and_spectrum() {
        let s = two_points();
        let l = assemble_laplacian(&s).unwrap();
        let lf = l.apply(&[3.0, 1.0]);
        assert_eq!(lf, vec![4.0, -4.0]);
        assert_eq!(l.apply(&[2.0, 2.0]), vec![0.0, 0.0]);
        let spec = eigenpairs(&s, 1).unwrap();
        assert!(spec.lambda(0).abs() < 1e-12);
        assert!((spec.lambda(1) - 4.0).abs() < 1e-12);
        assert!((rayleigh(&s, &[1.0, -1.0]).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(rayleigh(&s, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(rayleigh(&s, &[0.0, 0.0]).is_err());
        assert!(eigenpairs(&s, 2).is_err());
    }

    #[test]
    fn cycle_cosine_is_eigenfunction() {
        let c = gen_cycle(256, 2.0 * PI).unwrap();
        let f = cycle_samples(256, f64::cos);
        let lf = assemble_laplacian(&c).unwrap().apply(&f);
        let err = lf.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn cycle_spectrum_is_fourier() {
        let c = gen_cycle(256, 2.0 * PI).unwrap();
        let spec = eigenpairs(&c, 4).unwrap();
        let want = [0.0, 1.0, 1.0, 4.0, 4.0];
        for (l, w) in spec.eigenvalues.iter().zip(want) {
            assert!((l - w).abs() < 1e-2, "{l} vs {w}");
        }
        let r = rayleigh(&c, &spec.eigenfunctions[1]).unwrap();
        assert!((r - spec.lambda(1)).abs() < 1e-9);
    }

    #[test]
    fn gauss_spectrum_is_ornstein_uhlenbeck() {
        let g = gen_gauss_interval(400, 1.0, 5.0).unwrap();
        let spec = eigenpairs(&g, 3).unwrap();
        for k in 1..=3 {
            let rel = (spec.lambda(k) - k as f64).abs() / k as f64;
            assert!(rel < 0.02, "lambda_{k} = {}", spec.lambda(k));
        }
    }

    #[test]
    fn spectrum_invariants() {
        let d = gen_dumbbell(4, 2, 0.3).unwrap();
        let spec = full_spectrum(&d).unwrap();
        assert!(spec.lambda(0) <= 1e-9);
        let phi0 = &spec.eigenfunctions[0];
        assert!(phi0.iter().all(|v| (v - phi0[0]).abs() < 1e-8));
        for a in 0..d.n() {
            for b in 0..d.n() {
                let g = inner(&d, &spec.eigenfunctions[a], &spec.eigenfunctions[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8);
            }
        }
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(spec.lambda(1) > 1e-9);
    }

    #[test]
    fn disconnected_space_is_rejected() {
        let s = MMSpace::new(
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            vec![0.2, 0.3, 0.5],
            vec![(0, 1, 1.0)],
            None,
            Value::Null,
        )
        .unwrap();
        match assemble_laplacian(&s) {
            Err(Error::Disconnected { components }) => assert_eq!(components, vec![vec![0, 1], vec![2]]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heat_semigroup_basics() {
        let c = gen_cycle(32, 3.0).unwrap();
        let f: Vec<f64> = (0..32).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        assert_eq!(heat_apply(&c, &f, 0.0).unwrap().values, f);
        let far = heat_apply(&c, &f, 1e4).unwrap().values;
        let m = mean(&c, &f);
        assert!(far.iter().all(|v| (v - m).abs() < 1e-9));
        let a = heat_apply(&c, &heat_apply(&c, &f, 0.02).unwrap().values, 0.03).unwrap().values;
        let b = heat_apply(&c, &f, 0.05).unwrap().values;
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        assert!(heat_apply(&c, &f, -1.0).is_err());
    }

    #[test]
    fn gradient_conventions() {
        let s = two_points();
        assert_eq!(grad_l1(&s, &[0.0, 1.0]), vec![2.0, 2.0]);
        assert_eq!(grad_l1(&s, &[5.0, 5.0]), vec![0.0, 0.0]);

        let c = gen_cycle(256, 2.0 * PI).unwrap();
        let f = cycle_samples(256, f64::sin);
        let edge_sum = grad_l1(&c, &f).into_iter().fold(0.0, f64::max);
        let calibrated = gradient(&c, &f, GradientConvention::Calibrated)
            .into_iter()
            .fold(0.0, f64::max);
        assert!((edge_sum - 2.0).abs() < 0.1, "{edge_sum}");
        assert!((calibrated - 1.0).abs() < 0.05, "{calibrated}");
    }

    #[test]
    fn bakry_ledoux_on_models() {
        let c = gen_cycle(256, 2.0 * PI).unwrap();
        let f = cycle_samples(256, f64::sin);
        let r0 = check_bakry_ledoux(&c, &f, 0.0, 0.0).unwrap();
        assert_eq!(r0.lhs, 0.0);
        assert_eq!(r0.verdict, Verdict::Pass);
        let r = check_bakry_ledoux(&c, &f, 0.1, 0.0).unwrap();
        assert_eq!(r.class, CheckClass::Tolerance);
        assert!(r.rhs - r.lhs >= -1e-2, "{r:?}");
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(check_bakry_ledoux(&c, &f, 0.1, 0.5).is_err());
    }

    #[test]
    fn ledoux_on_cycle() {
        let c = gen_cycle(256, 2.0 * PI).unwrap();
        let zero = check_ledoux_l1(&c, &[1.0; 256], 0.3).unwrap();
        assert!(zero.lhs.abs() < 1e-12 && zero.rhs == 0.0);
        let half: Vec<f64> = (0..256).map(|i| if i < 128 { 1.0 } else { 0.0 }).collect();
        let smooth = heat_apply(&c, &half, 1e-3).unwrap().values;
        let r = check_ledoux_l1(&c, &smooth, 0.01).unwrap();
        assert!(r.lhs <= r.rhs, "{r:?}");
        let r = check_ledoux_l1(&c, &half, 0.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn bakry_ledoux_c_limits() {
        assert_eq!(bakry_ledoux_c(0.3, 0.0), 0.6);
        assert!((bakry_ledoux_c(0.3, -1e-9) - 0.6).abs() < 1e-9);
        assert!((bakry_ledoux_c(1.0, -1.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }
}
