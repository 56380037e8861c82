//! Boundary measure, k-way isoperimetric constants and sweep cuts.
//!
//! The discrete boundary measure of `A` is `sum_{x in A, y not in A} w(x,y) d(x,y)`.
//! With this convention `int_0^inf mu^+({g >= t}) dt = sum_{x<y} w d |g(x) - g(y)|`
//! holds exactly, so the superlevel-set sweep bound is a theorem of the
//! discrete calculus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mmspace::{MMSpace, Subset, SubsetFamily};
use crate::spectral::{self, grad_l1, norm_l2};

/// Default size limit for [`hk_exact`].
pub const HK_EXACT_MAX_N: usize = 16;
/// Hard ceiling for the subset tables used by [`hk_exact_with_cap`].
const HK_EXACT_HARD_MAX_N: usize = 24;
/// Default number of random partitions tried by [`hk_sweep`].
pub const HK_SWEEP_TRIALS: usize = 64;

const LLOYD_ITERS: usize = 100;
const TIE_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMethod {
    Exact,
    Sweep,
}

/// A family of disjoint sets together with `max_i mu^+(A_i) / mu(A_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub family: SubsetFamily,
    pub value: f64,
    pub method: CutMethod,
}

/// `sum_{x in A, y not in A} w(x,y) d(x,y)`.
pub fn boundary_measure(space: &MMSpace, a: &Subset) -> f64 {
    let mask = a.mask();
    space
        .edges()
        .iter()
        .filter(|e| mask[e.i] != mask[e.j])
        .map(|e| e.w * space.dist(e.i, e.j))
        .sum()
}

/// `mu^+(A) / mu(A)`; `+inf` for the empty set.
pub fn cut_ratio(space: &MMSpace, a: &Subset) -> f64 {
    let m = space.subset_measure(a);
    if m == 0.0 {
        return f64::INFINITY;
    }
    boundary_measure(space, a) / m
}

/// Largest ratio over the family (0 for an empty family).
pub fn family_value(space: &MMSpace, family: &SubsetFamily) -> f64 {
    family
        .sets()
        .iter()
        .map(|a| cut_ratio(space, a))
        .fold(0.0, f64::max)
}

fn check_k(space: &MMSpace, k: usize) -> Result<()> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if k + 1 > space.n() {
        return invalid(format!("need k + 1 <= n, got k = {k} with n = {}", space.n()));
    }
    Ok(())
}

pub fn hk_exact(space: &MMSpace, k: usize) -> Result<CutResult> {
    hk_exact_with_cap(space, k, HK_EXACT_MAX_N)
}

/// Global minimum of `max_i mu^+(A_i)/mu(A_i)` over all families of `k + 1`
/// disjoint nonempty subsets.
///
/// Every subset ratio is tabulated, then
/// `best_j(T) = min over j disjoint subsets of T` is filled by splitting off
/// the part containing the lowest element of `T` (an `O(k 3^n)` sweep with
/// pruning by the running minimum).
pub fn hk_exact_with_cap(space: &MMSpace, k: usize, cap: usize) -> Result<CutResult> {
    check_k(space, k)?;
    let n = space.n();
    if n > cap.min(HK_EXACT_HARD_MAX_N) {
        return Err(Error::CapExceeded {
            what: "hk_exact",
            detail: format!("n = {n} exceeds the exhaustive cap {}", cap.min(HK_EXACT_HARD_MAX_N)),
            hint: "use hk_sweep for an upper-bound witness",
        });
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let size = 1usize << n;
    let ratio = subset_ratios(space);

    // best[j][T]: j + 1 disjoint parts inside T
    let mut best: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut first = ratio.clone();
    first[0] = f64::INFINITY;
    for bit in 0..n {
        for t in 0..size {
            if t >> bit & 1 == 1 {
                let without = first[t ^ (1 << bit)];
                if without < first[t] {
                    first[t] = without;
                }
            }
        }
    }
    best.push(first);
    for j in 1..=k {
        let prev = &best[j - 1];
        let mut cur = vec![f64::INFINITY; size];
        for t in 1..size as u32 {
            let low = t & t.wrapping_neg();
            let mut v = cur[(t ^ low) as usize];
            let rest = t ^ low;
            // subsets S of T containing `low`: S = low | sub, sub ⊆ rest
            let mut sub = rest;
            loop {
                let s = low | sub;
                let rs = ratio[s as usize];
                if rs < v {
                    let other = prev[(t ^ s) as usize];
                    let cand = if other > rs { other } else { rs };
                    if cand < v {
                        v = cand;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            cur[t as usize] = v;
        }
        best.push(cur);
    }
    let value = best[k][full as usize];
    let mut sets = Vec::with_capacity(k + 1);
    let mut t = full;
    let mut j = k;
    loop {
        if j == 0 {
            // single part of minimal ratio inside t
            let mut sub = t;
            let mut chosen = 0;
            while sub != 0 {
                if ratio[sub as usize] <= best[0][t as usize] {
                    chosen = sub;
                    break;
                }
                sub = (sub - 1) & t;
            }
            sets.push(Subset::from_bits(n, chosen as u64));
            break;
        }
        let low = t & t.wrapping_neg();
        if best[j][(t ^ low) as usize] == best[j][t as usize] {
            t ^= low;
            continue;
        }
        let rest = t ^ low;
        let mut sub = rest;
        let target = best[j][t as usize];
        loop {
            let s = low | sub;
            let cand = ratio[s as usize].max(best[j - 1][(t ^ s) as usize]);
            if cand == target {
                sets.push(Subset::from_bits(n, s as u64));
                t ^= s;
                j -= 1;
                break;
            }
            assert!(sub != 0, "witness reconstruction failed");
            sub = (sub - 1) & rest;
        }
    }
    sets.sort_by_key(|s| s.indices()[0]);
    Ok(CutResult {
        family: SubsetFamily::new(sets)?,
        value,
        method: CutMethod::Exact,
    })
}

/// `mu^+(S) / mu(S)` for every bitmask `S` (`+inf` at the empty set).
fn subset_ratios(space: &MMSpace) -> Vec<f64> {
    let n = space.n();
    let size = 1usize << n;
    let wd: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| {
            space
                .neighbors(v)
                .iter()
                .map(|&(y, w)| (y, w * space.dist(v, y)))
                .collect()
        })
        .collect();
    let mut mass = vec![0.0; size];
    let mut ratio = vec![f64::INFINITY; size];
    for s in 1..size {
        let v = s.trailing_zeros() as usize;
        mass[s] = mass[s ^ (1 << v)] + space.measure()[v];
        ratio[s] = cut_of_mask(&wd, s) / mass[s];
    }
    ratio
}

fn cut_of_mask(wd: &[Vec<(usize, f64)>], s: usize) -> f64 {
    let mut c = 0.0;
    let mut bits = s;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        for &(y, x) in &wd[v] {
            if s >> y & 1 == 0 {
                c += x;
            }
        }
    }
    c
}

/// True when [`hk_chain`] applies.
pub fn is_chain_graph(space: &MMSpace) -> bool {
    Chain::of(space).is_some()
}

/// Exact `h_k` when the edge graph is a single path or cycle.
///
/// Some component of a set has a ratio no larger than the set itself, so
/// optimal families can be taken to be runs of consecutive vertices. The answer is the least
/// run ratio that admits `k + 1` disjoint runs, found by binary search with
/// an earliest-end packing.
pub fn hk_chain(space: &MMSpace, k: usize) -> Result<CutResult> {
    check_k(space, k)?;
    let Some(chain) = Chain::of(space) else {
        return invalid("edge graph is not a single path or cycle");
    };
    let n = space.n();
    let mut ratios: Vec<f64> = (0..n)
        .flat_map(|a| (1..=chain.max_len(a)).map(move |len| (a, len)))
        .map(|(a, len)| chain.ratio(a, len))
        .collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let (mut lo, mut hi) = (0, ratios.len() - 1);
    let mut runs = chain.pack(ratios[hi], k + 1).expect("singletons always pack");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match chain.pack(ratios[mid], k + 1) {
            Some(r) => {
                runs = r;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let mut sets: Vec<Subset> = runs
        .iter()
        .map(|&(a, len)| Subset::from_indices(n, (a..a + len).map(|p| chain.order[p % n])))
        .collect();
    sets.sort_by_key(|s| s.indices()[0]);
    let family = SubsetFamily::new(sets)?;
    Ok(CutResult {
        value: family_value(space, &family),
        family,
        method: CutMethod::Exact,
    })
}

struct Chain {
    order: Vec<usize>,
    /// `w d` of the edge from `order[i]` to `order[i + 1]` (cyclically).
    cut: Vec<f64>,
    /// prefix sums of the measure along `order`, doubled for wrapping
    mass: Vec<f64>,
    circular: bool,
}

impl Chain {
    fn of(space: &MMSpace) -> Option<Chain> {
        let n = space.n();
        let deg = |i: usize| space.neighbors(i).len();
        if n < 2 || (0..n).any(|i| deg(i) == 0 || deg(i) > 2) {
            return None;
        }
        let circular = match space.edges().len() {
            m if m + 1 == n => false,
            m if m == n && n >= 3 => true,
            _ => return None,
        };
        let start = if circular { 0 } else { (0..n).find(|&i| deg(i) == 1)? };
        let mut order = vec![start];
        let mut cut = Vec::with_capacity(n);
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(&(next, w)) = space.neighbors(cur).iter().find(|&&(y, _)| y != prev) {
            cut.push(w * space.dist(cur, next));
            if next == start {
                break;
            }
            if order.len() == n {
                return None;
            }
            order.push(next);
            prev = cur;
            cur = next;
        }
        if order.len() != n || cut.len() != if circular { n } else { n - 1 } {
            return None;
        }
        let mu = space.measure();
        let mut mass = vec![0.0; 2 * n + 1];
        for p in 0..2 * n {
            mass[p + 1] = mass[p] + mu[order[p % n]];
        }
        Some(Chain { order, cut, mass, circular })
    }

    fn n(&self) -> usize {
        self.order.len()
    }

    /// Longest run starting at position `a` that is not the whole space.
    fn max_len(&self, a: usize) -> usize {
        if self.circular {
            self.n() - 1
        } else {
            (self.n() - a).min(self.n() - 1)
        }
    }

    fn ratio(&self, a: usize, len: usize) -> f64 {
        let n = self.n();
        let e = a + len - 1;
        let boundary = if self.circular {
            self.cut[(a + n - 1) % n] + self.cut[e % n]
        } else {
            let left = if a > 0 { self.cut[a - 1] } else { 0.0 };
            let right = if e + 1 < n { self.cut[e] } else { 0.0 };
            left + right
        };
        boundary / (self.mass[a + len] - self.mass[a])
    }

    /// `count` disjoint runs `(start, len)` of ratio `<= theta`, if possible.
    fn pack(&self, theta: f64, count: usize) -> Option<Vec<(usize, usize)>> {
        let n = self.n();
        let shortest: Vec<usize> = (0..n)
            .map(|a| {
                (1..=self.max_len(a))
                    .find(|&len| self.ratio(a, len) <= theta)
                    .unwrap_or(usize::MAX)
            })
            .collect();
        let starts = if self.circular { n } else { 1 };
        let mut end = vec![(usize::MAX, 0); n + 1];
        for s in 0..starts {
            // end[u - s]: earliest end of a run starting at or after u
            let limit = s + n;
            end[n] = (usize::MAX, 0);
            for u in (s..limit).rev() {
                let len = shortest[u % n];
                let here = if len != usize::MAX && u + len <= limit { (u + len, u) } else { (usize::MAX, 0) };
                end[u - s] = here.min(end[u - s + 1]);
            }
            let mut runs = Vec::with_capacity(count);
            let mut p = s;
            while p < limit && runs.len() < count {
                let (e, u) = end[p - s];
                if e == usize::MAX {
                    break;
                }
                runs.push((u, e - u));
                p = e;
            }
            if runs.len() == count {
                return Some(runs);
            }
        }
        None
    }
}

/// `sum over consecutive values v < v' of g` of `(v' - v) mu^+({g >= v'})`,
/// the integral of the boundary measure of the superlevel sets.
pub fn superlevel_boundary_integral(space: &MMSpace, g: &[f64]) -> Result<f64> {
    if g.len() != space.n() {
        return invalid(format!("function has {} values for {} points", g.len(), space.n()));
    }
    let mut values = g.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values
        .windows(2)
        .map(|v| {
            let level = Subset::from_indices(space.n(), (0..space.n()).filter(|&i| g[i] >= v[1]));
            (v[1] - v[0]) * boundary_measure(space, &level)
        })
        .sum())
}

/// `sum over edges of w d |g(x) - g(y)|`.
pub fn edge_variation(space: &MMSpace, g: &[f64]) -> Result<f64> {
    if g.len() != space.n() {
        return invalid(format!("function has {} values for {} points", g.len(), space.n()));
    }
    Ok(space
        .edges()
        .iter()
        .map(|e| e.w * space.dist(e.i, e.j) * (g[e.i] - g[e.j]).abs())
        .sum())
}

/// Best superlevel set `{x : |f(x)|^2 >= t}` over all thresholds.
///
/// Among equal ratios the smaller set wins.
pub fn sweep_cut(space: &MMSpace, f: &[f64]) -> Result<CutResult> {
    if f.len() != space.n() {
        return invalid(format!("function has {} values for {} points", f.len(), space.n()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return invalid("function values must be finite");
    }
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    let mut order: Vec<usize> = (0..space.n()).filter(|&i| sq[i] > 0.0).collect();
    if order.is_empty() {
        return invalid("sweep cut of the zero function");
    }
    order.sort_by(|&a, &b| sq[b].total_cmp(&sq[a]).then(a.cmp(&b)));
    let mut inside = vec![false; space.n()];
    let (mut mass, mut cut) = (0.0, 0.0);
    let mut best = (f64::INFINITY, 0usize);
    for (pos, &v) in order.iter().enumerate() {
        inside[v] = true;
        mass += space.measure()[v];
        for &(y, w) in space.neighbors(v) {
            let x = w * space.dist(v, y);
            if inside[y] {
                cut -= x;
            } else {
                cut += x;
            }
        }
        let level_done = order.get(pos + 1).is_none_or(|&nx| sq[nx] != sq[v]);
        if level_done {
            let r = cut.max(0.0) / mass;
            if r < best.0 * (1.0 - TIE_REL) {
                best = (r, pos + 1);
            }
        }
    }
    let set = Subset::from_indices(space.n(), order[..best.1].iter().copied());
    let value = cut_ratio(space, &set);
    Ok(CutResult {
        family: SubsetFamily::new(vec![set])?,
        value,
        method: CutMethod::Sweep,
    })
}

/// `2 || grad_l1 f ||_2 / ||f||_2`, the guaranteed ceiling for [`sweep_cut`].
pub fn sweep_lemma_bound(space: &MMSpace, f: &[f64]) -> f64 {
    2.0 * norm_l2(space, &grad_l1(space, f)) / norm_l2(space, f)
}

/// Upper-bound witness for `h_k` from the spectral embedding.
///
/// Each trial draws `k + 1` random directions, runs spherical Lloyd
/// iterations on the embedding `x -> (phi_1(x), ..., phi_k(x))`, splits the
/// points into caps, and replaces every cap by the better of itself and its
/// best sweep set of `|embedding|`. Deterministic for a fixed seed.
pub fn hk_sweep(space: &MMSpace, k: usize, trials: usize, seed: u64) -> Result<CutResult> {
    check_k(space, k)?;
    let n = space.n();
    let spec = spectral::eigenpairs(space, k)?;
    let emb: Vec<Vec<f64>> = (0..n)
        .map(|x| (1..=k).map(|j| spec.eigenfunctions[j][x]).collect())
        .collect();
    let norms: Vec<f64> = emb.iter().map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt()).collect();
    let scale = norms.iter().fold(0.0f64, |m, v| m.max(*v));
    let dirs: Vec<Option<Vec<f64>>> = emb
        .iter()
        .zip(&norms)
        .map(|(v, &r)| (r > 1e-12 * scale).then(|| v.iter().map(|a| a / r).collect()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<Subset>)> = None;
    for _ in 0..trials.max(1) {
        let centers: Vec<Vec<f64>> = (0..=k).map(|_| random_unit(&mut rng, k)).collect();
        let parts = cap_partition(space, &dirs, &norms, centers);
        if parts.iter().any(Vec::is_empty) {
            continue;
        }
        let mut sets = Vec::with_capacity(k + 1);
        for part in &parts {
            let whole = Subset::from_indices(n, part.iter().copied());
            let mut g = vec![0.0; n];
            for &x in part {
                g[x] = norms[x];
            }
            let candidate = match sweep_cut(space, &g) {
                Ok(c) if c.value < cut_ratio(space, &whole) => c.family.into_sets().remove(0),
                _ => whole,
            };
            sets.push(candidate);
        }
        let value = sets.iter().map(|s| cut_ratio(space, s)).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, sets));
        }
    }
    let (value, mut sets) = best.unwrap_or_else(|| {
        let sets: Vec<Subset> = fallback_partition(space, &spec.eigenfunctions[1], k + 1);
        let v = sets.iter().map(|s| cut_ratio(space, s)).fold(0.0, f64::max);
        (v, sets)
    });
    sets.sort_by_key(|s| s.indices()[0]);
    Ok(CutResult {
        family: SubsetFamily::new(sets)?,
        value,
        method: CutMethod::Sweep,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        // Box-Muller normals give a rotation-invariant direction
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-12 {
            return v.into_iter().map(|a| a / r).collect();
        }
    }
}

/// Spherical Lloyd iterations; returns the final caps (points with a zero
/// embedding are left out).
fn cap_partition(
    space: &MMSpace,
    dirs: &[Option<Vec<f64>>],
    norms: &[f64],
    mut centers: Vec<Vec<f64>>,
) -> Vec<Vec<usize>> {
    let parts_of = |centers: &[Vec<f64>]| -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); centers.len()];
        for (x, d) in dirs.iter().enumerate() {
            if let Some(d) = d {
                let j = (0..centers.len())
                    .max_by(|&a, &b| dot(d, &centers[a]).total_cmp(&dot(d, &centers[b])).then(b.cmp(&a)))
                    .expect("at least one center");
                parts[j].push(x);
            }
        }
        parts
    };
    let mut parts = parts_of(&centers);
    for _ in 0..LLOYD_ITERS {
        let mut moved = false;
        for (j, part) in parts.iter().enumerate() {
            if part.is_empty() {
                continue;
            }
            let mut c = vec![0.0; centers[j].len()];
            for &x in part {
                let wgt = space.measure()[x] * norms[x] * norms[x];
                for (ci, di) in c.iter_mut().zip(dirs[x].as_ref().expect("assigned")) {
                    *ci += wgt * di;
                }
            }
            let r = c.iter().map(|a| a * a).sum::<f64>().sqrt();
            if r > 0.0 {
                c.iter_mut().for_each(|a| *a /= r);
                centers[j] = c;
            }
        }
        let next = parts_of(&centers);
        if next != parts {
            moved = true;
        }
        parts = next;
        if !moved {
            break;
        }
    }
    parts
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Contiguous chunks of the points ordered by `f`; always a valid family.
fn fallback_partition(space: &MMSpace, f: &[f64], parts: usize) -> Vec<Subset> {
    let n = space.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
    (0..parts)
        .map(|p| {
            let lo = p * n / parts;
            let hi = (p + 1) * n / parts;
            Subset::from_indices(n, order[lo..hi].iter().copied())
        })
        .collect()
}
