//! Close-by-One enumeration of closed sets for the far relation.
//!
//! With `F(S) = {y : d(y, S) >= t}` the map `S -> F(F(S))` is a closure
//! operator and every optimal set may be replaced by a closed one. The search
//! stops descending once the required mass is reached and prunes branches
//! whose far set is already too light.

use std::cell::Cell;

use super::MASS_EPS;
use crate::error::{Error, Result};
use crate::mmspace::{MMSpace, Subset};

/// A closed set on `n` points costs `n^2 / WORDS_PER_TICK` budget steps.
const WORDS_PER_TICK: usize = 2048;

/// Groups with masses `kappas` (in this order) and pairwise distance `>= t`,
/// if any exist.
pub(super) fn separated_groups(space: &MMSpace, t: f64, kappas: &[f64], budget: u64) -> Result<Option<Vec<Subset>>> {
    let far = Far::new(space, t, budget);
    let mut groups = Vec::new();
    let found = place(&far, &Bits::ones(space.n()), kappas, &mut groups)?;
    Ok(found.then(|| groups.iter().map(|b| b.to_subset(space.n())).collect()))
}

/// `max mu(B)` over sets `B` whose far set carries at least half the mass.
pub(super) fn max_far_mass(space: &MMSpace, r: f64, budget: u64) -> Result<f64> {
    let n = space.n();
    let far = Far::new(space, r, budget);
    let mu = space.measure();
    let mut best = 0.0f64;
    let mut step = |c: &Bits, fc: &Bits, j: usize| -> Result<Step> {
        if far.mass(fc) < 0.5 - MASS_EPS {
            return Ok(Step::Skip);
        }
        let m = far.mass(c);
        if m > best {
            best = m;
            if best >= 0.5 - MASS_EPS {
                return Ok(Step::Stop);
            }
        }
        // later points must each keep half the mass far away
        let room: f64 = (j + 1..n)
            .filter(|&y| !c.get(y))
            .filter(|&y| {
                let mut f = fc.clone();
                f.and_assign(&far.far[y]);
                far.mass(&f) >= 0.5 - MASS_EPS
            })
            .map(|y| mu[y])
            .sum();
        Ok(if m + room <= best { Step::Skip } else { Step::Descend })
    };
    let all = Bits::ones(n);
    far.cbo(&all, &Bits::zeros(n), &all, 0, 0.5, &mut step)?;
    Ok(best)
}

/// Tries to place groups `kappas[..]` inside `u`, each far from the others.
fn place(far: &Far, u: &Bits, kappas: &[f64], out: &mut Vec<Bits>) -> Result<bool> {
    let (first, rest) = kappas.split_first().expect("nonempty");
    if rest.is_empty() {
        if far.mass(u) >= first - MASS_EPS {
            out.push(u.clone());
            return Ok(true);
        }
        return Ok(false);
    }
    let need: f64 = rest.iter().sum();
    let mut visit = |c: &Bits, fc: &Bits| -> Result<bool> {
        let base = out.len();
        out.push(c.clone());
        if place(far, fc, rest, out)? {
            return Ok(true);
        }
        out.truncate(base);
        Ok(false)
    };
    far.minimal_closed(u, *first, need, &mut visit)
}


#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn ones(n: usize) -> Self {
        let mut b = Bits::zeros(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn and_assign(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a &= b;
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }


    fn to_subset(&self, n: usize) -> Subset {
        Subset::from_indices(n, self.iter())
    }

}

// ---------------------------------------------------------- far relation

struct Far<'a> {
    n: usize,
    far: Vec<Bits>,
    measure: &'a [f64],
    nodes: Cell<u64>,
    budget: u64,
    /// Budget charged per closed set, roughly its bit-operation count.
    cost: u64,
}

impl<'a> Far<'a> {
    /// `far(x, y)` iff `d(x, y) >= t`; at `t = 0` the right limit `x != y` is used.
    fn new(space: &'a MMSpace, t: f64, budget: u64) -> Self {
        let n = space.n();
        let far = (0..n)
            .map(|x| {
                let mut b = Bits::zeros(n);
                for (y, &d) in space.dist_row(x).iter().enumerate() {
                    if y != x && d >= t {
                        b.set(y);
                    }
                }
                b
            })
            .collect();
        let cost = (n * n / WORDS_PER_TICK).max(1) as u64;
        Far { n, far, measure: space.measure(), nodes: Cell::new(0), budget, cost }
    }

    fn mass(&self, s: &Bits) -> f64 {
        s.iter().map(|i| self.measure[i]).sum()
    }

    fn far_of(&self, s: &Bits, u: &Bits) -> Bits {
        let mut out = u.clone();
        for x in s.iter() {
            out.and_assign(&self.far[x]);
        }
        out
    }

    fn tick(&self) -> Result<()> {
        let v = self.nodes.get() + self.cost;
        self.nodes.set(v);
        if v > self.budget {
            return Err(Error::CapExceeded {
                what: "closed-set enumeration",
                detail: format!("search budget of {} steps exhausted", self.budget),
                hint: "raise the node budget or use the heuristic mode",
            });
        }
        Ok(())
    }

    /// Whether points after `j` that keep `keep` mass far away can still
    /// supply `missing` mass.
    ///
    /// A point taken from `F(C)` leaves the far set, so those points together
    /// can contribute at most `mu(F(C)) - keep`.
    fn room_reaches(&self, u: &Bits, c: &Bits, fc: &Bits, j: usize, keep: f64, missing: f64) -> bool {
        let slack = self.mass(fc) - keep + MASS_EPS;
        let (mut near, mut inside) = (0.0, 0.0);
        for y in u.iter().filter(|&y| y > j && !c.get(y)) {
            if fc.get(y) {
                inside += self.measure[y];
            } else {
                near += self.measure[y];
            }
        }
        if near + inside.min(slack) < missing - MASS_EPS {
            return false;
        }
        let (mut near, mut inside) = (0.0, 0.0);
        for y in u.iter().filter(|&y| y > j && !c.get(y)) {
            let mut f = fc.clone();
            f.and_assign(&self.far[y]);
            if self.mass(&f) >= keep - MASS_EPS {
                if fc.get(y) {
                    inside += self.measure[y];
                } else {
                    near += self.measure[y];
                }
                if near + inside.min(slack) >= missing - MASS_EPS {
                    return true;
                }
            }
        }
        false
    }

    /// Closure of `B + j` given `F(B + j)`, or `None` when it adds an element
    /// below `j` that is not in `B` (the Close-by-One canonicity test).
    fn canonical_closure(&self, fbj: &Bits, u: &Bits, b: &Bits, j: usize) -> Option<Bits> {
        let lw = j / 64;
        let mut low: Vec<u64> = (0..=lw)
            .map(|w| {
                let below = if w < lw { u64::MAX } else { (1u64 << (j % 64)) - 1 };
                u.0[w] & !b.0[w] & below
            })
            .collect();
        if low.iter().any(|w| *w != 0) {
            for y in fbj.iter() {
                let mut any = false;
                for (w, l) in low.iter_mut().enumerate() {
                    *l &= self.far[y].0[w];
                    any |= *l != 0;
                }
                if !any {
                    break;
                }
            }
            if low.iter().any(|w| *w != 0) {
                return None;
            }
        }
        Some(self.far_of(fbj, u))
    }

    /// Visits every closed set (inside `u`) that reaches `target` mass while
    /// all of its canonical predecessors stay below it. `prune(mass of F(C))`
    /// cuts a branch; `visit(C, F(C))` returns `true` to stop the search.
    ///
    /// Only sets whose far set keeps `keep` mass are of interest, which also
    /// bounds the points a descendant can still add.
    fn minimal_closed(
        &self,
        u: &Bits,
        target: f64,
        keep: f64,
        visit: &mut dyn FnMut(&Bits, &Bits) -> Result<bool>,
    ) -> Result<bool> {
        let empty = Bits::zeros(self.n);
        if target <= MASS_EPS {
            return visit(&empty, u);
        }
        let mut step = |c: &Bits, fc: &Bits, j: usize| -> Result<Step> {
            if self.mass(fc) < keep - MASS_EPS {
                return Ok(Step::Skip);
            }
            let m = self.mass(c);
            if m >= target - MASS_EPS {
                return Ok(if visit(c, fc)? { Step::Stop } else { Step::Skip });
            }
            Ok(if self.room_reaches(u, c, fc, j, keep, target - m) { Step::Descend } else { Step::Skip })
        };
        self.cbo(u, &empty, u, 0, keep, &mut step)
    }

    /// Close-by-One over the closed subsets of `u`; returns `true` if stopped.
    ///
    /// `keep` discards a generator before its closure is built when the far
    /// set is already lighter than that (descendants only get lighter).
    fn cbo(
        &self,
        u: &Bits,
        b: &Bits,
        fb: &Bits,
        start: usize,
        keep: f64,
        step: &mut dyn FnMut(&Bits, &Bits, usize) -> Result<Step>,
    ) -> Result<bool> {
        for j in u.iter().filter(|&j| j >= start) {
            if b.get(j) {
                continue;
            }
            let mut fbj = fb.clone();
            fbj.and_assign(&self.far[j]);
            if self.mass(&fbj) < keep - MASS_EPS {
                continue;
            }
            let Some(c) = self.canonical_closure(&fbj, u, b, j) else {
                continue;
            };
            self.tick()?;
            match step(&c, &fbj, j)? {
                Step::Stop => return Ok(true),
                Step::Skip => {}
                Step::Descend => {
                    if self.cbo(u, &c, &fbj, j + 1, keep, step)? {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }
}

enum Step {
    Stop,
    Skip,
    Descend,
}

