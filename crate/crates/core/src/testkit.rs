//! Reference oracles for the test suite.
//!
//! Everything here recomputes answers by brute force or direct geometry,
//! independently of the algorithms under test: the Prokhorov distance by
//! grid feasibility scanning, the Wasserstein distance by exhaustive
//! vertex enumeration of the transportation polytope, integrals of step
//! suprema by piecewise-constant geometry, and cell measures by exact
//! arithmetic in the field extended by sqrt(2).

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::binaryrep::sqrt2_enclosure;
use crate::cms::Space;
use crate::measures::IdealMeasure;
use crate::numeric::{RatInterval, Rational};

// ---------------------------------------------------------------------------
// Prokhorov grid oracle
// ---------------------------------------------------------------------------

/// Brute-force Prokhorov distance: gather every candidate threshold (all
/// pairwise distances and all subset-mass differences), then find the
/// first grid point beyond which the two-sided feasibility predicate
/// holds. Exponential in the support sizes.
pub fn prokhorov_grid_oracle(a: &IdealMeasure, b: &IdealMeasure, space: &Space) -> Rational {
    let dist = |x: u64, y: u64| space.exact_distance(x, y).expect("exact distance");
    let mut grid: Vec<Rational> = vec![Rational::zero()];
    for (i, _) in a.atoms() {
        for (j, _) in b.atoms() {
            grid.push(dist(*i, *j));
        }
    }
    for mass_a in subset_masses(a) {
        for mass_b in subset_masses(b) {
            grid.push((&mass_a - &mass_b).abs());
        }
    }
    grid.sort();
    grid.dedup();
    grid.push(grid.last().unwrap() + Rational::one());

    let feasible = |eps: &Rational| -> bool {
        one_sided_feasible(a, b, space, eps) && one_sided_feasible(b, a, space, eps)
    };
    // The predicate is constant strictly between grid points, so testing
    // midpoints locates the infimum exactly at a grid point.
    for k in 0..grid.len() - 1 {
        let mid = (&grid[k] + &grid[k + 1]) / Rational::from_integer(2.into());
        if feasible(&mid) {
            return grid[k].clone();
        }
    }
    grid.last().unwrap().clone()
}

fn subset_masses(m: &IdealMeasure) -> Vec<Rational> {
    let atoms = m.atoms();
    (0u64..(1 << atoms.len()))
        .map(|mask| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, (_, w))| w.clone())
                .sum()
        })
        .collect()
}

fn one_sided_feasible(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
    eps: &Rational,
) -> bool {
    let dist = |x: u64, y: u64| space.exact_distance(x, y).expect("exact distance");
    let n = a.atoms().len();
    for mask in 0u64..(1 << n) {
        let mass_a: Rational = a
            .atoms()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, (_, w))| w.clone())
            .sum();
        // b(A^eps) with the strict fattening.
        let mass_b: Rational = b
            .atoms()
            .iter()
            .filter(|(j, _)| {
                a.atoms()
                    .iter()
                    .enumerate()
                    .any(|(i, (p, _))| mask >> i & 1 == 1 && &dist(*j, *p) < eps)
            })
            .map(|(_, w)| w.clone())
            .sum();
        if mass_a > mass_b + eps {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Wasserstein vertex oracle
// ---------------------------------------------------------------------------

/// Exhaustive vertex enumeration of the transportation polytope: every
/// acyclic selection of `m + n - 1` cells is solved exactly by leaf
/// elimination, infeasible trees are skipped, and the minimum cost over
/// feasible vertices is returned.
pub fn wasserstein_vertex_oracle(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
) -> Rational {
    let m = a.atoms().len();
    let n = b.atoms().len();
    let cost: Vec<Vec<Rational>> = a
        .atoms()
        .iter()
        .map(|(i, _)| {
            b.atoms()
                .iter()
                .map(|(j, _)| space.exact_distance(*i, *j).expect("exact distance"))
                .collect()
        })
        .collect();
    let supplies: Vec<Rational> = a.atoms().iter().map(|(_, w)| w.clone()).collect();
    let demands: Vec<Rational> = b.atoms().iter().map(|(_, w)| w.clone()).collect();

    struct Search<'a> {
        m: usize,
        n: usize,
        cost: &'a [Vec<Rational>],
        supplies: &'a [Rational],
        demands: &'a [Rational],
        chosen: Vec<(usize, usize)>,
        parent: Vec<usize>,
        best: Option<Rational>,
    }

    impl Search<'_> {
        fn root(&self, mut x: usize) -> usize {
            while self.parent[x] != x {
                x = self.parent[x];
            }
            x
        }

        fn recurse(&mut self, next: usize) {
            let need = self.m + self.n - 1;
            if self.chosen.len() == need {
                self.evaluate();
                return;
            }
            let total = self.m * self.n;
            if total - next < need - self.chosen.len() {
                return;
            }
            // Skip this cell.
            self.recurse(next + 1);
            // Take it if it keeps the selection acyclic.
            let (i, j) = (next / self.n, next % self.n);
            let (ri, rj) = (self.root(i), self.root(self.m + j));
            if ri != rj {
                let saved = self.parent.clone();
                self.parent[ri] = rj;
                self.chosen.push((i, j));
                self.recurse(next + 1);
                self.chosen.pop();
                self.parent = saved;
            }
        }

        fn evaluate(&mut self) {
            // Solve the tree by leaf elimination.
            let mut rem_supply = self.supplies.to_vec();
            let mut rem_demand = self.demands.to_vec();
            let mut edges: Vec<(usize, usize, usize)> = self
                .chosen
                .iter()
                .enumerate()
                .map(|(e, &(i, j))| (e, i, self.m + j))
                .collect();
            let mut degree = vec![0usize; self.m + self.n];
            for &(_, x, y) in &edges {
                degree[x] += 1;
                degree[y] += 1;
            }
            let mut flows: Vec<Rational> = vec![Rational::zero(); edges.len()];
            let mut cost_total = Rational::zero();
            while let Some(pos) = edges
                .iter()
                .position(|&(_, x, y)| degree[x] == 1 || degree[y] == 1)
            {
                let (e, x, y) = edges.swap_remove(pos);
                let (leaf, other) = if degree[x] == 1 { (x, y) } else { (y, x) };
                let f = if leaf < self.m {
                    rem_supply[leaf].clone()
                } else {
                    rem_demand[leaf - self.m].clone()
                };
                if f.is_negative() {
                    return; // infeasible vertex
                }
                if other < self.m {
                    rem_supply[other] -= &f;
                } else {
                    rem_demand[other - self.m] -= &f;
                }
                if leaf < self.m {
                    rem_supply[leaf] = Rational::zero();
                } else {
                    rem_demand[leaf - self.m] = Rational::zero();
                }
                degree[x] -= 1;
                degree[y] -= 1;
                let (i, j) = self.chosen[e];
                cost_total += &self.cost[i][j] * &f;
                flows[e] = f;
            }
            if !edges.is_empty() {
                return; // disconnected leftover (cannot happen for trees)
            }
            if rem_supply.iter().any(|r| !r.is_zero())
                || rem_demand.iter().any(|r| !r.is_zero())
            {
                return;
            }
            match &self.best {
                Some(b) if *b <= cost_total => {}
                _ => self.best = Some(cost_total),
            }
        }
    }

    let mut search = Search {
        m,
        n,
        cost: &cost,
        supplies: &supplies,
        demands: &demands,
        chosen: Vec::new(),
        parent: (0..m + n).collect(),
        best: None,
    };
    search.recurse(0);
    search.best.expect("transportation polytope is never empty")
}

// ---------------------------------------------------------------------------
// Piecewise-constant integral oracle on [0, 1]
// ---------------------------------------------------------------------------

/// Exact Lebesgue integral of the pointwise supremum of steps on open
/// intervals, by sweeping the endpoint breakpoints.
pub fn step_sup_lebesgue_integral(steps: &[(Rational, Rational, Rational)]) -> Rational {
    let zero = Rational::zero();
    let one = Rational::one();
    let mut cuts: Vec<Rational> = vec![zero.clone(), one.clone()];
    for (lo, hi, _) in steps {
        if lo > &zero && lo < &one {
            cuts.push(lo.clone());
        }
        if hi > &zero && hi < &one {
            cuts.push(hi.clone());
        }
    }
    cuts.sort();
    cuts.dedup();
    let mut total = Rational::zero();
    for w in cuts.windows(2) {
        let mid = (&w[0] + &w[1]) / Rational::from_integer(2.into());
        let value = steps
            .iter()
            .filter(|(lo, hi, _)| lo < &mid && &mid < hi)
            .map(|(_, _, v)| v.clone())
            .max()
            .unwrap_or_else(Rational::zero);
        total += value * (&w[1] - &w[0]);
    }
    total
}

// ---------------------------------------------------------------------------
// Exact arithmetic in Q(sqrt 2)
// ---------------------------------------------------------------------------

/// `a + b sqrt(2)` with exact comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quad {
    pub a: Rational,
    pub b: Rational,
}

impl Quad {
    pub fn rational(a: Rational) -> Self {
        Quad {
            a,
            b: Rational::zero(),
        }
    }

    pub fn sqrt2_multiple(b: Rational) -> Self {
        Quad {
            a: Rational::zero(),
            b,
        }
    }

    pub fn add(&self, other: &Quad) -> Quad {
        Quad {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
        }
    }

    pub fn sub(&self, other: &Quad) -> Quad {
        Quad {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
        }
    }

    /// Sign of `a + b sqrt(2)`, exactly.
    pub fn sign(&self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        let sa = if self.a.is_positive() {
            Greater
        } else if self.a.is_negative() {
            Less
        } else {
            Equal
        };
        let sb = if self.b.is_positive() {
            Greater
        } else if self.b.is_negative() {
            Less
        } else {
            Equal
        };
        match (sa, sb) {
            (Equal, s) | (s, Equal) => s,
            (Greater, Greater) => Greater,
            (Less, Less) => Less,
            // Mixed signs: compare a^2 against 2 b^2 on the dominant side.
            (Greater, Less) | (Less, Greater) => {
                let lhs = &self.a * &self.a;
                let rhs = Rational::from_integer(2.into()) * &self.b * &self.b;
                match lhs.cmp(&rhs) {
                    Equal => Equal, // impossible for nonzero rationals
                    Greater => sa,
                    Less => sb,
                }
            }
        }
    }

    pub fn lt(&self, other: &Quad) -> bool {
        self.sub(other).sign() == std::cmp::Ordering::Less
    }

    pub fn max(&self, other: &Quad) -> Quad {
        if self.lt(other) {
            other.clone()
        } else {
            self.clone()
        }
    }

    pub fn min(&self, other: &Quad) -> Quad {
        if self.lt(other) {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Rational enclosure of width about `2^-p`.
    pub fn enclosure(&self, p: u32) -> RatInterval {
        let enc = sqrt2_enclosure(p + 4);
        let (lo_m, hi_m) = if self.b.is_negative() {
            (enc.hi().clone(), enc.lo().clone())
        } else {
            (enc.lo().clone(), enc.hi().clone())
        };
        RatInterval::new(&self.a + &self.b * lo_m, &self.a + &self.b * hi_m).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Exact cell geometry for the irrational-radius representation on [0, 1]
// ---------------------------------------------------------------------------

/// Exact interval decomposition of the cell named by `word` for the
/// unit-interval representation with radii `scale * 2^-n * sqrt(2)`:
/// intervals with endpoints in Q(sqrt 2), clipped to [0, 1].
pub fn lebesgue_cell_intervals_exact(
    space: &Space,
    word: &[bool],
    scale: &Rational,
) -> Vec<(Quad, Quad)> {
    let mut pieces = vec![(
        Quad::rational(Rational::zero()),
        Quad::rational(Rational::one()),
    )];
    for (k, bit) in word.iter().enumerate() {
        let (i, n) = crate::cms::unpair(k as u64);
        let c = space.unit_rational(i);
        let r = Quad::sqrt2_multiple(
            scale * Rational::new(BigInt::one(), BigInt::one() << (n as usize).min(4096)),
        );
        let center = Quad::rational(c);
        let lo = center.sub(&r);
        let hi = center.add(&r);
        let mut next = Vec::new();
        for (a, b) in pieces {
            if *bit {
                let na = a.max(&lo);
                let nb = b.min(&hi);
                if na.lt(&nb) {
                    next.push((na, nb));
                }
            } else {
                // Exterior of the closed ball.
                let left_hi = b.min(&lo);
                if a.lt(&left_hi) {
                    next.push((a.clone(), left_hi));
                }
                let right_lo = a.max(&hi);
                if right_lo.lt(&b) {
                    next.push((right_lo, b.clone()));
                }
            }
        }
        pieces = next;
        if pieces.is_empty() {
            break;
        }
    }
    pieces
}

/// Total length of disjoint intervals with Q(sqrt 2) endpoints.
pub fn quad_total_length(pieces: &[(Quad, Quad)]) -> Quad {
    let mut total = Quad::rational(Rational::zero());
    for (a, b) in pieces {
        total = total.add(&b.sub(a));
    }
    total
}
