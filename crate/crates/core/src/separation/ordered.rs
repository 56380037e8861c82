//! Exact search for spaces that sit isometrically on a line or a circle.
//!
//! If consecutive used points with different labels are `t` apart, then every
//! pair of differently labelled points is. Groups may also be taken to be
//! unions of runs of consecutive points, and a run may start right at the
//! first far point after the previous one. A scan over (position, label)
//! with Pareto fronts of capped mass vectors is therefore exact.

use std::cell::Cell;

use super::MASS_EPS;
use crate::error::{Error, Result};
use crate::mmspace::{MMSpace, Subset};

const COORD_TOL: f64 = 1e-9;
const COMPARISONS_PER_TICK: usize = 32;

/// How a scan treats a front member that almost covers a candidate: it may
/// absorb candidates short of it by at most `step` while its accumulated
/// error stays within `limit`. Merging raises the member (over-approximation),
/// otherwise the candidate is dropped (under-approximation).
#[derive(Debug, Clone, Copy)]
struct Pass {
    step: f64,
    limit: f64,
    merge: bool,
}

const EXACT: Pass = Pass { step: 0.0, limit: 0.0, merge: false };

const fn pass(step: f64, limit: f64, merge: bool) -> Pass {
    Pass { step, limit, merge }
}

const REACH_PASSES: [Pass; 9] = [
    pass(1e-2, f64::INFINITY, true),
    pass(1e-2, 1e-2, true),
    pass(1e-2, 1e-2, false),
    pass(3e-3, 3e-3, true),
    pass(3e-3, 3e-3, false),
    pass(1e-3, 1e-3, true),
    pass(1e-3, 1e-3, false),
    pass(1e-4, 1e-4, true),
    pass(1e-4, 1e-4, false),
];

/// All orderings of `0..k`.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, k - 1);
            out.push(q);
        }
    }
    out
}

pub(super) enum Probe {
    Feasible(Vec<Subset>),
    Infeasible,
    Unknown,
}

pub(super) struct Ordering {
    seq: Vec<usize>,
    circular: bool,
    /// arc length from `seq[0]` to `seq[i]`, and the total length
    offset: Vec<f64>,
    length: f64,
}

pub(super) fn detect(space: &MMSpace) -> Option<Ordering> {
    let n = space.n();
    if n <= 2 {
        let offset = (0..n).map(|i| space.dist(0, i)).collect();
        return Some(Ordering { seq: (0..n).collect(), circular: false, offset, length: space.diameter() });
    }
    line(space).or_else(|| circle(space))
}

fn tolerance(space: &MMSpace) -> f64 {
    COORD_TOL * space.diameter().max(1.0)
}

fn line(space: &MMSpace) -> Option<Ordering> {
    let n = space.n();
    let end = (0..n).max_by(|&a, &b| space.dist(0, a).total_cmp(&space.dist(0, b)).then(b.cmp(&a)))?;
    let x: Vec<f64> = (0..n).map(|i| space.dist(end, i)).collect();
    let tol = tolerance(space);
    for i in 0..n {
        for j in i + 1..n {
            if ((x[i] - x[j]).abs() - space.dist(i, j)).abs() > tol {
                return None;
            }
        }
    }
    let mut seq: Vec<usize> = (0..n).collect();
    seq.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let offset = seq.iter().map(|&i| x[i]).collect();
    Some(Ordering { seq, circular: false, offset, length: space.diameter() })
}

fn circle(space: &MMSpace) -> Option<Ordering> {
    let n = space.n();
    let near = (1..n).min_by(|&p, &q| space.dist(0, p).total_cmp(&space.dist(0, q)).then(p.cmp(&q)))?;
    let step = space.dist(0, near);
    let tol = tolerance(space);
    // signed offset from point 0; the side is read off the distance to `near`
    let signed: Vec<f64> = (0..n)
        .map(|i| {
            let t = space.dist(0, i);
            if i == 0 || (space.dist(near, i) - (t - step).abs()).abs() <= tol {
                t
            } else {
                -t
            }
        })
        .collect();
    let mut seq: Vec<usize> = (0..n).collect();
    seq.sort_by(|&p, &q| signed[p].total_cmp(&signed[q]).then(p.cmp(&q)));
    let mut pos = vec![0.0; n];
    let mut acc = 0.0;
    for k in 1..n {
        acc += space.dist(seq[k - 1], seq[k]);
        pos[seq[k]] = acc;
    }
    let perimeter = acc + space.dist(seq[n - 1], seq[0]);
    for i in 0..n {
        for j in i + 1..n {
            let a = (pos[i] - pos[j]).abs();
            if (a.min(perimeter - a) - space.dist(i, j)).abs() > tol {
                return None;
            }
        }
    }
    let offset = seq.iter().map(|&i| pos[i]).collect();
    Some(Ordering { seq, circular: true, offset, length: perimeter })
}

struct Arena {
    labels: usize,
    mass: Vec<f64>,
    /// bound on how far a node may be from the real states it stands for
    err: Vec<f64>,
    parent: Vec<u32>,
    pos: Vec<u32>,
    label: Vec<u8>,
    pass: Pass,
}

impl Arena {
    fn new(labels: usize, pass: Pass) -> Self {
        Arena { labels, mass: Vec::new(), err: Vec::new(), parent: Vec::new(), pos: Vec::new(), label: Vec::new(), pass }
    }

    fn mass(&self, id: u32) -> &[f64] {
        let s = id as usize * self.labels;
        &self.mass[s..s + self.labels]
    }

    /// Adds a node unless a front member absorbs it.
    ///
    /// A member dominating the candidate always absorbs it; see [`Pass`] for
    /// the approximate cases.
    fn offer(&mut self, front: &mut Vec<u32>, cand: &[f64], err: f64, parent: u32, pos: usize, label: usize) -> usize {
        let shortfall = |m: &[f64]| m.iter().zip(cand).fold(0.0f64, |d, (x, y)| d.max(y - x));
        for &id in front.iter() {
            let k = id as usize;
            let diff = shortfall(self.mass(id));
            let merge = self.pass.merge;
            let grown = if merge { self.err[k] + diff } else { self.err[k].max(err + diff) };
            if diff <= 0.0 || (diff <= self.pass.step && grown <= self.pass.limit) {
                if diff > 0.0 && merge {
                    let s = k * self.labels;
                    for (m, c) in self.mass[s..s + self.labels].iter_mut().zip(cand) {
                        *m = m.max(*c);
                    }
                }
                self.err[k] = if merge && diff <= 0.0 { self.err[k] } else { grown };
                return front.len();
            }
        }
        let covers = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x >= y);
        let mut inherited = err;
        let (labels, mass, errs) = (self.labels, &self.mass, &self.err);
        front.retain(|&id| {
            let s = id as usize * labels;
            if covers(cand, &mass[s..s + labels]) {
                inherited = inherited.max(errs[id as usize]);
                false
            } else {
                true
            }
        });
        let id = self.parent.len() as u32;
        self.mass.extend_from_slice(cand);
        self.err.push(if self.pass.merge { err } else { inherited });
        self.parent.push(parent);
        self.pos.push(pos as u32);
        self.label.push(label as u8);
        front.push(id);
        front.len()
    }
}

enum Goal<'a> {
    /// every group reaches its demand
    Reach(&'a [f64]),
    /// group 0 holds half the mass; maximize group 1 beyond `floor`
    FarMass { floor: f64 },
}

impl Goal<'_> {
    fn score(&self, m: &[f64]) -> Option<f64> {
        match self {
            Goal::Reach(k) => m.iter().zip(*k).all(|(a, k)| *a >= k - MASS_EPS).then_some(1.0),
            Goal::FarMass { .. } => (m[0] >= 0.5 - MASS_EPS).then_some(m[1]),
        }
    }

    fn enough(&self) -> f64 {
        match self {
            Goal::Reach(_) => 1.0,
            Goal::FarMass { .. } => 0.5 - MASS_EPS,
        }
    }

    /// Whether group `h` still has to be entered or topped up.
    fn open(&self, m: &[f64], h: usize) -> bool {
        match self {
            Goal::Reach(k) => m[h] < k[h] - MASS_EPS,
            Goal::FarMass { .. } => {
                if h == 0 {
                    m[0] < 0.5 - MASS_EPS
                } else {
                    m[1] <= 0.0
                }
            }
        }
    }
}

impl Ordering {
    /// Groups with masses `kappas` and pairwise distance `>= t`, if any exist.
    pub(super) fn separated_groups(
        &self,
        space: &MMSpace,
        t: f64,
        kappas: &[f64],
        budget: u64,
    ) -> Result<Option<Vec<Subset>>> {
        let work = Cell::new(0);
        match self.probe(space, t, kappas, budget, &work)? {
            Probe::Feasible(groups) => return Ok(Some(groups)),
            Probe::Infeasible => return Ok(None),
            Probe::Unknown => {}
        }
        let found = self.reach(space, t, kappas, EXACT, budget, &work)?;
        Ok(found.and_then(|labels| self.verified(space, t, kappas.len(), &labels)))
    }

    /// The contiguous placement and the approximate passes, without the
    /// exact scan. A failed merging pass proves infeasibility and a labelling
    /// found by a dropping pass is real. Running out of budget is `Unknown`.
    pub(super) fn probe(&self, space: &MMSpace, t: f64, kappas: &[f64], budget: u64, work: &Cell<u64>) -> Result<Probe> {
        if let Some(groups) = self.contiguous_groups(space, t, kappas) {
            return Ok(Probe::Feasible(groups));
        }
        for pass in REACH_PASSES {
            match (pass.merge, self.reach(space, t, kappas, pass, budget, work)) {
                (_, Err(Error::CapExceeded { .. })) => return Ok(Probe::Unknown),
                (_, Err(e)) => return Err(e),
                (true, Ok(None)) => return Ok(Probe::Infeasible),
                (false, Ok(Some(labels))) => {
                    if let Some(groups) = self.verified(space, t, kappas.len(), &labels) {
                        return Ok(Probe::Feasible(groups));
                    }
                }
                _ => {}
            }
        }
        Ok(Probe::Unknown)
    }

    fn reach(
        &self,
        space: &MMSpace,
        t: f64,
        kappas: &[f64],
        pass: Pass,
        budget: u64,
        work: &Cell<u64>,
    ) -> Result<Option<Vec<Option<usize>>>> {
        // groups with equal demands are interchangeable: they are opened in index order
        let prev: Vec<Option<usize>> = (0..kappas.len())
            .map(|g| (0..g).rev().find(|&h| kappas[h] == kappas[g]))
            .collect();
        let first: Vec<usize> = (0..kappas.len()).filter(|&g| prev[g].is_none()).collect();
        let ctx = Search { space, t, caps: kappas, prev: &prev, goal: Goal::Reach(kappas), pass, budget, work };
        Ok(self.search(&ctx, &first, kappas.len())?.map(|(_, labels)| labels))
    }

    fn verified(&self, space: &MMSpace, t: f64, groups: usize, labels: &[Option<usize>]) -> Option<Vec<Subset>> {
        let n = space.n();
        let sets: Vec<Subset> = (0..groups)
            .map(|g| Subset::from_indices(n, (0..n).filter(|&x| labels[x] == Some(g))))
            .collect();
        let ok = (0..groups).all(|i| (i + 1..groups).all(|j| t == 0.0 || space.set_distance(&sets[i], &sets[j]) >= t));
        ok.then_some(sets)
    }

    /// Groups placed as consecutive runs in some order, each as short as
    /// possible and started at the first point far from the previous run.
    fn contiguous_groups(&self, space: &MMSpace, t: f64, kappas: &[f64]) -> Option<Vec<Subset>> {
        let n = self.seq.len();
        let mu = |i: usize| space.measure()[self.seq[i % n]];
        let starts = if self.circular { n } else { 1 };
        let mut labels = vec![None; space.n()];
        for perm in permutations(kappas.len()) {
            'start: for s in 0..starts {
                labels.iter_mut().for_each(|l| *l = None);
                let mut p = s;
                for (step, &g) in perm.iter().enumerate() {
                    if step > 0 {
                        let last = p - 1;
                        p = (last + 1..s + n).find(|&q| t == 0.0 || space.dist(self.seq[last % n], self.seq[q % n]) >= t)
                            .unwrap_or(s + n);
                    }
                    let mut m = 0.0;
                    while m < kappas[g] - MASS_EPS {
                        if p >= s + n {
                            continue 'start;
                        }
                        m += mu(p);
                        labels[self.seq[p % n]] = Some(g);
                        p += 1;
                    }
                }
                if let Some(groups) = self.verified(space, t, kappas.len(), &labels) {
                    return Some(groups);
                }
            }
        }
        None
    }

    /// `max mu(B)` over pairs with `mu(A) >= 1/2` and `d(A, B) >= r`, or
    /// `floor` (a nonnegative known value) if nothing beats it.
    pub(super) fn max_far_mass(&self, space: &MMSpace, r: f64, floor: f64, budget: u64) -> Result<f64> {
        let work = Cell::new(0);
        let ctx = Search {
            space,
            t: r,
            caps: &[0.5, 0.5],
            prev: &[None, None],
            goal: Goal::FarMass { floor },
            pass: EXACT,
            budget,
            work: &work,
        };
        // beating a nonnegative floor needs both groups
        Ok(self.search(&ctx, &[0, 1], 2)?.map_or(floor, |(v, _)| v.max(floor)))
    }

    /// Best labelling (label per point, `None` = unused) under the goal's
    /// score of its capped mass vector. `groups` labels must all be used.
    fn search(&self, ctx: &Search, first_labels: &[usize], groups: usize) -> Result<Option<(f64, Vec<Option<usize>>)>> {
        let n = self.seq.len();
        let (space, t) = (ctx.space, ctx.t);
        let far = |a: usize, b: usize| t == 0.0 || space.dist(self.seq[a], self.seq[b]) >= t;
        let next: Vec<Option<usize>> = (0..n)
            .map(|a| {
                if self.circular {
                    (1..n).map(|k| (a + k) % n).find(|&b| far(a, b))
                } else {
                    (a + 1..n).find(|&b| far(a, b))
                }
            })
            .collect();
        let gap = self.min_gap(space, &next);
        // consecutive cluster starts on a circle are at least `t` apart, so
        // every labelling has a start within this arc
        let window = self.length - groups.saturating_sub(1) as f64 * t + tolerance(space);
        let starts: Vec<usize> = if self.circular {
            (0..n).filter(|&s| self.offset[s] <= window).collect()
        } else {
            vec![0]
        };
        let mut best: Option<(f64, Vec<Option<usize>>)> = None;
        for s in starts {
            for &g0 in first_labels {
                let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
                if let Some((v, labels)) = self.scan(ctx, &next, &far, s, g0, floor, gap)? {
                    if v > floor {
                        best = Some((v, labels));
                    }
                    if v >= ctx.goal.enough() {
                        return Ok(best);
                    }
                }
            }
        }
        Ok(best)
    }

    /// Whether the mass left after the current position, minus at least
    /// `gap` for every cluster still to be opened (and for closing the
    /// circle when the last label differs from the first), can still make
    /// `m` succeed and beat `best`.
    #[allow(clippy::too_many_arguments)]
    fn viable(&self, goal: &Goal, m: &[f64], g: usize, g0: usize, rest: f64, gap: f64, best: f64) -> bool {
        let tol = MASS_EPS * (m.len() + 1) as f64;
        let opens = (0..m.len()).filter(|&h| h != g && goal.open(m, h)).count();
        let close = self.circular && !(g == g0 && opens == 0) && !(g != g0 && goal.open(m, g0));
        let free = rest - (opens + close as usize) as f64 * gap;
        match goal {
            Goal::Reach(k) => {
                let missing: f64 = m.iter().zip(*k).map(|(a, k)| (k - a).max(0.0)).sum();
                missing <= free + tol
            }
            Goal::FarMass { floor } => {
                let left = free - (0.5 - m[0]).max(0.0);
                left >= -tol && m[1] + left > best.max(*floor)
            }
        }
    }

    /// Lightest run of points strictly between a point and its first far point.
    fn min_gap(&self, space: &MMSpace, next: &[Option<usize>]) -> f64 {
        let n = self.seq.len();
        let mu = |i: usize| space.measure()[self.seq[i]];
        let mut best = f64::INFINITY;
        for (a, b) in next.iter().enumerate() {
            if let Some(b) = *b {
                let mut m = 0.0;
                let mut i = (a + 1) % n;
                while i != b {
                    m += mu(i);
                    i = (i + 1) % n;
                }
                best = best.min(m);
            }
        }
        if best.is_finite() { best } else { 0.0 }
    }

    #[allow(clippy::too_many_arguments)]
    fn scan(
        &self,
        ctx: &Search,
        next: &[Option<usize>],
        far: &dyn Fn(usize, usize) -> bool,
        s: usize,
        g0: usize,
        floor: f64,
        gap: f64,
    ) -> Result<Option<(f64, Vec<Option<usize>>)>> {
        let (space, caps, goal) = (ctx.space, ctx.caps, &ctx.goal);
        let n = self.seq.len();
        let nl = caps.len();
        let at = |i: usize| (s + i) % n;
        let mu = |i: usize| space.measure()[self.seq[at(i)]];
        // rest[i] = mass strictly after position i
        let mut rest = vec![0.0; n];
        for i in (0..n - 1).rev() {
            rest[i] = rest[i + 1] + mu(i + 1);
        }
        let mut arena = Arena::new(nl, ctx.pass);
        let mut fronts: Vec<Vec<u32>> = vec![Vec::new(); n * nl];
        let mut m0 = vec![0.0; nl];
        m0[g0] = mu(0).min(caps[g0]);
        arena.offer(&mut fronts[g0], &m0, 0.0, u32::MAX, 0, g0);
        let mut best: Option<(f64, u32)> = None;
        let mut cand = vec![0.0; nl];
        'scan: for i in 0..n {
            // rotated index of the first far point, if it does not wrap past the start
            let jump = next[at(i)].map(|b| (b + n - s) % n).filter(|&j| j > i);
            for g in 0..nl {
                let ids = std::mem::take(&mut fronts[i * nl + g]);
                for id in ids {
                    ctx.tick()?;
                    let bar = best.map_or(floor, |b| b.0.max(floor));
                    if !self.viable(goal, arena.mass(id), g, g0, rest[i], gap, bar) {
                        continue;
                    }
                    if !self.circular || g == g0 || far(at(i), at(0)) {
                        if let Some(v) = goal.score(arena.mass(id)) {
                            if v > bar {
                                best = Some((v, id));
                                if v >= goal.enough() {
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if i + 1 < n {
                        let err = arena.err[id as usize];
                        cand.copy_from_slice(arena.mass(id));
                        cand[g] = (cand[g] + mu(i + 1)).min(caps[g]);
                        let mut front = std::mem::take(&mut fronts[(i + 1) * nl + g]);
                        ctx.charge(arena.offer(&mut front, &cand, err, id, i + 1, g));
                        fronts[(i + 1) * nl + g] = front;
                    }
                    if let Some(j) = jump {
                        for g2 in (0..nl).filter(|&g2| g2 != g) {
                            if ctx.prev[g2].is_some_and(|h| arena.mass(id)[h] <= 0.0) {
                                continue;
                            }
                            let err = arena.err[id as usize];
                            cand.copy_from_slice(arena.mass(id));
                            cand[g2] = (cand[g2] + mu(j)).min(caps[g2]);
                            let mut front = std::mem::take(&mut fronts[j * nl + g2]);
                            ctx.charge(arena.offer(&mut front, &cand, err, id, j, g2));
                            fronts[j * nl + g2] = front;
                        }
                    }
                }
            }
        }
        let Some((v, mut id)) = best else {
            return Ok(None);
        };
        let mut labels = vec![None; space.n()];
        while id != u32::MAX {
            let k = id as usize;
            labels[self.seq[at(arena.pos[k] as usize)]] = Some(arena.label[k] as usize);
            id = arena.parent[k];
        }
        Ok(Some((v, labels)))
    }
}

struct Search<'a> {
    space: &'a MMSpace,
    t: f64,
    caps: &'a [f64],
    /// previous label with the same cap; it must be opened first
    prev: &'a [Option<usize>],
    goal: Goal<'a>,
    pass: Pass,
    budget: u64,
    work: &'a Cell<u64>,
}

impl Search<'_> {
    /// Front comparisons count against the budget too.
    fn charge(&self, compared: usize) {
        self.work.set(self.work.get() + (compared / COMPARISONS_PER_TICK) as u64);
    }

    fn tick(&self) -> Result<()> {
        let v = self.work.get() + 1;
        self.work.set(v);
        if v > self.budget {
            return Err(Error::CapExceeded {
                what: "ordered separation scan",
                detail: format!("search budget of {} steps exhausted", self.budget),
                hint: "raise the node budget or use the heuristic mode",
            });
        }
        Ok(())
    }
}
