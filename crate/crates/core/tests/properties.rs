use mmgeo::harness::checks::check_indicator_quadratic_form;
use mmgeo::harness::random::random_geometric_space;
use mmgeo::isoperimetry::{edge_variation, hk_exact, hk_sweep, superlevel_boundary_integral};
use mmgeo::mmspace::{space_from_json, space_to_json};
use mmgeo::separation::{concentration_function, sep_bounds, sep_exact, sep_heuristic, SepConfig};
use mmgeo::spectral::{full_spectrum, heat_apply, mean, norm_l2, rayleigh};
use mmgeo::MMSpace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(n: usize, seed: u64) -> MMSpace {
    random_geometric_space(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn boundary(space: &MMSpace, inside: &[bool]) -> f64 {
    space.edges().iter().filter(|e| inside[e.i] != inside[e.j]).map(|e| e.w * space.dist(e.i, e.j)).sum()
}

/// Every labelling of the points with `0` (unused) or a group `1..=groups`.
fn labellings(n: usize, groups: u8) -> impl Iterator<Item = Vec<u8>> {
    let total = (groups as usize + 1).pow(n as u32);
    (0..total).map(move |mut code| {
        (0..n)
            .map(|_| {
                let l = (code % (groups as usize + 1)) as u8;
                code /= groups as usize + 1;
                l
            })
            .collect()
    })
}

fn h1_oracle(space: &MMSpace) -> f64 {
    let n = space.n();
    let mut best = f64::INFINITY;
    for lab in labellings(n, 2) {
        let mut worst = 0.0f64;
        for g in 1..=2 {
            let inside: Vec<bool> = lab.iter().map(|&l| l == g).collect();
            let mass: f64 = (0..n).filter(|&i| inside[i]).map(|i| space.measure()[i]).sum();
            if mass == 0.0 {
                worst = f64::INFINITY;
                break;
            }
            worst = worst.max(boundary(space, &inside) / mass);
        }
        best = best.min(worst);
    }
    best
}

fn sep_pair_oracle(space: &MMSpace, a: f64, b: f64) -> f64 {
    let n = space.n();
    let mut best = 0.0f64;
    for lab in labellings(n, 2) {
        let mass = |g: u8| (0..n).filter(|&i| lab[i] == g).map(|i| space.measure()[i]).sum::<f64>();
        if mass(1) < a - 1e-12 || mass(2) < b - 1e-12 {
            continue;
        }
        let mut d = f64::INFINITY;
        for i in (0..n).filter(|&i| lab[i] == 1) {
            for j in (0..n).filter(|&j| lab[j] == 2) {
                d = d.min(space.dist(i, j));
            }
        }
        best = best.max(d);
    }
    best
}

fn function(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_is_nonnegative_and_bounds_rayleigh(n in 2usize..=12, seed in any::<u64>(), raw in function(12)) {
        let s = space(n, seed);
        let spec = full_spectrum(&s).unwrap();
        prop_assert!(spec.eigenvalues[0].abs() < 1e-9);
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        prop_assert!(spec.eigenvalues[1] > 1e-9);
        let f: Vec<f64> = raw[..n].to_vec();
        let m = mean(&s, &f);
        let g: Vec<f64> = f.iter().map(|v| v - m).collect();
        if norm_l2(&s, &g) > 1e-6 {
            let r = rayleigh(&s, &g).unwrap();
            prop_assert!(r >= spec.eigenvalues[1] * (1.0 - 1e-9));
            prop_assert!(r <= spec.eigenvalues[n - 1] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn heat_semigroup_preserves_mean_and_contracts(
        n in 2usize..=12, seed in any::<u64>(), raw in function(12), s_t in 0.0f64..2.0, t in 0.0f64..2.0,
    ) {
        let sp = space(n, seed);
        let f = &raw[..n];
        let pt = heat_apply(&sp, f, t).unwrap().values;
        prop_assert!((mean(&sp, &pt) - mean(&sp, f)).abs() < 1e-9);
        prop_assert!(norm_l2(&sp, &pt) <= norm_l2(&sp, f) + 1e-9);
        let twice = heat_apply(&sp, &heat_apply(&sp, f, s_t).unwrap().values, t).unwrap().values;
        let once = heat_apply(&sp, f, s_t + t).unwrap().values;
        for (a, b) in twice.iter().zip(&once) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(pt.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }

    #[test]
    fn exact_h1_matches_enumeration(n in 2usize..=7, seed in any::<u64>()) {
        let s = space(n, seed);
        let exact = hk_exact(&s, 1).unwrap();
        let oracle = h1_oracle(&s);
        prop_assert!((exact.value - oracle).abs() <= 1e-12 * (1.0 + oracle));
        prop_assert!(hk_sweep(&s, 1, 8, seed).unwrap().value >= exact.value - 1e-12);
        if n >= 3 {
            prop_assert!(hk_exact(&s, 2).unwrap().value >= exact.value - 1e-12);
        }
    }

    #[test]
    fn exact_sep_matches_enumeration_and_bounds(
        n in 2usize..=8, seed in any::<u64>(), a in 0.05f64..0.6, b in 0.05f64..0.6,
    ) {
        let s = space(n, seed);
        let exact = sep_exact(&s, &[a, b]).unwrap();
        let oracle = sep_pair_oracle(&s, a, b);
        prop_assert!((exact.value - oracle).abs() <= 1e-12 * (1.0 + oracle));
        prop_assert!(sep_heuristic(&s, &[a, b]).unwrap().value <= exact.value + 1e-12);
        let starved = sep_bounds(&s, &[a, b], &SepConfig { max_nodes: 0, max_k: 4 }).unwrap();
        prop_assert!(starved.value <= exact.value && exact.value <= starved.upper);
        prop_assert!(sep_exact(&s, &[a * 0.5, b]).unwrap().value >= exact.value);
    }

    #[test]
    fn coarea_identity(n in 2usize..=12, seed in any::<u64>(), raw in function(12)) {
        let s = space(n, seed);
        let g = &raw[..n];
        let lhs = superlevel_boundary_integral(&s, g).unwrap();
        let rhs = edge_variation(&s, g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn concentration_is_at_most_half_and_nonincreasing(n in 2usize..=10, seed in any::<u64>()) {
        let s = space(n, seed);
        let diam = s.diameter();
        let mut last = 0.5;
        for i in 0..=6 {
            let c = concentration_function(&s, diam * i as f64 / 6.0).unwrap();
            prop_assert!(c.exact);
            prop_assert!((0.0..=0.5).contains(&c.alpha));
            prop_assert!(c.alpha <= last + 1e-12);
            last = c.alpha;
        }
        // neighbourhoods are open, so only a radius past the diameter swallows everything
        prop_assert_eq!(concentration_function(&s, diam * 1.001).unwrap().alpha, 0.0);
    }

    #[test]
    fn json_round_trip_preserves_the_space(n in 1usize..=12, seed in any::<u64>()) {
        let s = if n == 1 {
            MMSpace::new(vec![vec![0.0]], vec![1.0], vec![], None, serde_json::Value::Null).unwrap()
        } else {
            space(n, seed)
        };
        let back = space_from_json(&space_to_json(&s)).unwrap();
        prop_assert_eq!(back.measure(), s.measure());
        prop_assert_eq!(back.edges(), s.edges());
        for i in 0..n {
            prop_assert_eq!(back.dist_row(i), s.dist_row(i));
        }
    }

    #[test]
    fn indicator_quadratic_form_holds(
        k in 1usize..=5, raw in prop::collection::vec(0.01f64..1.0, 5), coeffs in prop::collection::vec(-10.0f64..10.0, 5),
        fill in 0.01f64..=1.0,
    ) {
        let cap = 1.0 - 1.0 / (k + 1) as f64;
        let total: f64 = raw[..k].iter().sum();
        let masses: Vec<f64> = raw[..k].iter().map(|m| m / total * cap * fill).collect();
        let r = check_indicator_quadratic_form(&masses, &coeffs[..k], k).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }
}
