//! Ideal measures, computable-measure descriptors, exact Prokhorov and
//! Wasserstein distances, staged valuation of open sets, and staged
//! integration of lower semicontinuous functions.
//!
//! Ideal measures are finite rational-weighted point masses. A measure
//! descriptor is a stage-indexed stream of ideal measures that is fast
//! Cauchy in the Prokhorov metric; the staged valuation and integration
//! operators consume only finite prefixes of the stream and return monotone
//! rational lower bounds.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::cms::{cantor_word, unit_dyadic_index, IdealBall, ROpenSet, Space};
use crate::lsc::{cantor_cylinder_len, collect_steps, LscFunction, LscNode, StepFn};
use crate::numeric::{pow2_neg, RatInterval, Rational, Stage};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasureError {
    /// Weights failed to be positive, sum to 1, or name distinct points.
    InvalidMeasure(String),
    /// A builtin constructor was given an out-of-range parameter.
    InvalidParameter(String),
    /// Exact combinatorial search refused: support beyond the cap.
    SupportTooLarge { support: usize, cap: usize },
    /// An exact algorithm needed a distance the space cannot produce
    /// exactly.
    IrrationalDistance,
    /// Wasserstein needs a diameter bound.
    UnboundedSpace,
    /// A consumed descriptor prefix provably violates the fast Cauchy
    /// contract.
    FastCauchyViolation { stage: Stage },
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::InvalidMeasure(s) => write!(f, "invalid ideal measure: {s}"),
            MeasureError::InvalidParameter(s) => write!(f, "invalid parameter: {s}"),
            MeasureError::SupportTooLarge { support, cap } => {
                write!(f, "support {support} exceeds exact-search cap {cap}")
            }
            MeasureError::IrrationalDistance => {
                write!(f, "space does not expose exact rational distances")
            }
            MeasureError::UnboundedSpace => write!(f, "space has no diameter bound"),
            MeasureError::FastCauchyViolation { stage } => {
                write!(f, "descriptor fast Cauchy contract violated at stage {stage}")
            }
        }
    }
}

impl std::error::Error for MeasureError {}

// ---------------------------------------------------------------------------
// Ideal measures
// ---------------------------------------------------------------------------

/// A probability measure concentrated on finitely many ideal points with
/// rational weights. Atoms are sorted by index, weights are positive, and
/// the weights sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealMeasure {
    atoms: Vec<(u64, Rational)>,
}

impl IdealMeasure {
    pub fn new(mut atoms: Vec<(u64, Rational)>) -> Result<Self, MeasureError> {
        atoms.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(u64, Rational)> = Vec::with_capacity(atoms.len());
        for (i, w) in atoms {
            if !w.is_positive() {
                return Err(MeasureError::InvalidMeasure(format!(
                    "weight {w} at point {i} is not positive"
                )));
            }
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => merged.push((i, w)),
            }
        }
        let total: Rational = merged.iter().map(|(_, w)| w.clone()).sum();
        if total != Rational::one() {
            return Err(MeasureError::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(IdealMeasure { atoms: merged })
    }

    pub fn dirac(i: u64) -> Self {
        IdealMeasure {
            atoms: vec![(i, Rational::one())],
        }
    }

    pub fn atoms(&self) -> &[(u64, Rational)] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    /// Total weight of atoms satisfying the predicate.
    pub fn mass_where(&self, mut pred: impl FnMut(u64) -> bool) -> Rational {
        self.atoms
            .iter()
            .filter(|(i, _)| pred(*i))
            .map(|(_, w)| w.clone())
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Measure descriptors
// ---------------------------------------------------------------------------

enum MeasureRepr {
    /// Explicit stage list; the final entry repeats forever.
    Stages(Vec<IdealMeasure>),
    /// Stage n: uniform on the 2^(n+2) dyadic midpoints of [0, 1].
    LebesgueUnit,
    /// Stage n: product weights on all binary words of length n+1.
    Bernoulli(Rational),
    Dirac(u64),
    /// Rational convex combination, mixed stagewise.
    Mix(Vec<(Rational, MeasureDescriptor)>),
    Stream(Box<dyn Fn(Stage) -> IdealMeasure + Send + Sync>),
}

struct DescriptorInner {
    repr: MeasureRepr,
    /// Stages already checked against the fast Cauchy contract.
    verified_upto: std::sync::Mutex<Stage>,
}

/// A computable measure as a fast Cauchy stream of ideal measures under the
/// Prokhorov metric: `rho(mu_n, mu_{n+1}) < 2^-n`.
#[derive(Clone)]
pub struct MeasureDescriptor(Arc<DescriptorInner>);

fn descriptor(repr: MeasureRepr) -> MeasureDescriptor {
    MeasureDescriptor(Arc::new(DescriptorInner {
        repr,
        verified_upto: std::sync::Mutex::new(0),
    }))
}

impl MeasureDescriptor {
    /// Lebesgue measure on `[0, 1]`: stage n is uniform on the dyadic
    /// midpoints `(2k+1)/2^(n+3)`, which is within `2^-(n+3)` of Lebesgue
    /// in the Prokhorov metric.
    pub fn lebesgue_unit() -> Self {
        descriptor(MeasureRepr::LebesgueUnit)
    }

    /// Bernoulli product measure on the Cantor space, `p` the weight of
    /// symbol 1; stage n sits on the length-(n+1) cylinders, within
    /// `2^-(n+1)` of the limit.
    pub fn bernoulli(p: Rational) -> Result<Self, MeasureError> {
        if !p.is_positive() || p >= Rational::one() {
            return Err(MeasureError::InvalidParameter(format!(
                "bernoulli parameter {p} outside (0, 1)"
            )));
        }
        Ok(descriptor(MeasureRepr::Bernoulli(p)))
    }

    pub fn dirac(i: u64) -> Self {
        descriptor(MeasureRepr::Dirac(i))
    }

    /// Rational-weighted convex combination, mixed atomwise per stage.
    pub fn convex_combo(
        parts: Vec<(Rational, MeasureDescriptor)>,
    ) -> Result<Self, MeasureError> {
        if parts.iter().any(|(w, _)| !w.is_positive()) {
            return Err(MeasureError::InvalidParameter(
                "mixture weights must be positive".into(),
            ));
        }
        let total: Rational = parts.iter().map(|(w, _)| w.clone()).sum();
        if total != Rational::one() {
            return Err(MeasureError::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(descriptor(MeasureRepr::Mix(parts)))
    }

    /// Explicit stage list (the last stage repeats, so the tail is
    /// trivially fast Cauchy).
    pub fn from_stages(stages: Vec<IdealMeasure>) -> Result<Self, MeasureError> {
        if stages.is_empty() {
            return Err(MeasureError::InvalidParameter(
                "descriptor needs at least one stage".into(),
            ));
        }
        Ok(descriptor(MeasureRepr::Stages(stages)))
    }

    pub fn from_stream<F>(f: F) -> Self
    where
        F: Fn(Stage) -> IdealMeasure + Send + Sync + 'static,
    {
        descriptor(MeasureRepr::Stream(Box::new(f)))
    }

    /// The stage-n ideal measure.
    pub fn ideal_at(&self, n: Stage) -> IdealMeasure {
        match &self.0.repr {
            MeasureRepr::Stages(v) => v[(n as usize).min(v.len() - 1)].clone(),
            MeasureRepr::LebesgueUnit => {
                let level = n + 3;
                let count = 1u64 << (n + 2);
                let w = pow2_neg(n + 2);
                IdealMeasure {
                    atoms: {
                        let mut atoms: Vec<(u64, Rational)> = (0..count)
                            .map(|k| (unit_dyadic_index(k, level), w.clone()))
                            .collect();
                        atoms.sort_by_key(|(i, _)| *i);
                        atoms
                    },
                }
            }
            MeasureRepr::Bernoulli(p) => {
                let len = n + 1;
                let q = Rational::one() - p;
                let mut atoms = Vec::with_capacity(1usize << len);
                for code in 0u64..(1 << len) {
                    let word: Vec<bool> = (0..len).map(|b| (code >> b) & 1 == 1).collect();
                    let mut w = Rational::one();
                    for &bit in &word {
                        w *= if bit { p } else { &q };
                    }
                    atoms.push((crate::cms::cantor_index_padded(&word), w));
                }
                atoms.sort_by_key(|(i, _)| *i);
                IdealMeasure { atoms }
            }
            MeasureRepr::Dirac(i) => IdealMeasure::dirac(*i),
            MeasureRepr::Mix(parts) => {
                let mut atoms: Vec<(u64, Rational)> = Vec::new();
                for (w, part) in parts {
                    for (i, pw) in part.ideal_at(n).atoms {
                        atoms.push((i, w * pw));
                    }
                }
                atoms.sort_by_key(|(i, _)| *i);
                let mut merged: Vec<(u64, Rational)> = Vec::new();
                for (i, w) in atoms {
                    match merged.last_mut() {
                        Some((j, acc)) if *j == i => *acc += w,
                        _ => merged.push((i, w)),
                    }
                }
                IdealMeasure { atoms: merged }
            }
            MeasureRepr::Stream(f) => f(n),
        }
    }

    /// Whether the measure is known to have no atoms (built-in Lebesgue and
    /// Bernoulli streams, and mixtures of such). Used to pick the fast
    /// almost-decidable-radius path.
    pub fn atomless_hint(&self) -> bool {
        match &self.0.repr {
            MeasureRepr::LebesgueUnit | MeasureRepr::Bernoulli(_) => true,
            MeasureRepr::Mix(parts) => parts.iter().all(|(_, p)| p.atomless_hint()),
            _ => false,
        }
    }

    /// Exact fast-Cauchy verification of the consumed prefix for explicit
    /// stage data, using the exact Prokhorov distance. Built-in streams are
    /// certified by construction; stages with support beyond the exact cap
    /// are taken as asserted. Verified prefixes are remembered, so repeated
    /// calls are cheap.
    pub fn verify_fast_prefix(&self, space: &Space, upto: Stage) -> Result<(), MeasureError> {
        match &self.0.repr {
            MeasureRepr::Stages(v) => {
                let mut done = self.0.verified_upto.lock().unwrap();
                if *done >= upto {
                    return Ok(());
                }
                for n in *done..upto {
                    let a = &v[(n as usize).min(v.len() - 1)];
                    let b = &v[((n + 1) as usize).min(v.len() - 1)];
                    if a == b {
                        continue;
                    }
                    if a.support_size() > PROKHOROV_SUPPORT_CAP
                        || b.support_size() > PROKHOROV_SUPPORT_CAP
                    {
                        continue;
                    }
                    let d = prokhorov_exact(a, b, space)?;
                    if d >= pow2_neg(n) {
                        return Err(MeasureError::FastCauchyViolation { stage: n });
                    }
                }
                *done = upto;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Stable digest of the descriptor head, used to pin binary
    /// representations to the descriptor they were built from.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for n in 0..=6u32 {
            let m = self.ideal_at(n);
            eat(&n.to_le_bytes());
            for (i, w) in m.atoms() {
                eat(&i.to_le_bytes());
                eat(w.numer().to_signed_bytes_le().as_slice());
                eat(w.denom().to_signed_bytes_le().as_slice());
            }
        }
        h
    }

    pub(crate) fn repr_tag(&self) -> &'static str {
        match &self.0.repr {
            MeasureRepr::Stages(_) => "stages",
            MeasureRepr::LebesgueUnit => "lebesgue_unit",
            MeasureRepr::Bernoulli(_) => "bernoulli",
            MeasureRepr::Dirac(_) => "dirac",
            MeasureRepr::Mix(_) => "mix",
            MeasureRepr::Stream(_) => "stream",
        }
    }
}

impl fmt::Debug for MeasureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasureDescriptor({})", self.repr_tag())
    }
}

// ---------------------------------------------------------------------------
// Exact Prokhorov distance
// ---------------------------------------------------------------------------

/// Default support cap for the subset-enumeration Prokhorov algorithm.
pub const PROKHOROV_SUPPORT_CAP: usize = 12;

/// Exact Prokhorov distance between ideal measures:
/// `inf { eps : mu(A) <= nu(A^eps) + eps for every Borel A }` with the
/// strict fattening `A^eps = { x : d(x, A) < eps }`. The infimum over all
/// Borel sets reduces to subsets of the supports; both one-sided values are
/// computed and the maximum returned.
pub fn prokhorov_exact(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
) -> Result<Rational, MeasureError> {
    prokhorov_exact_with_cap(a, b, space, PROKHOROV_SUPPORT_CAP)
}

pub fn prokhorov_exact_with_cap(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
    cap: usize,
) -> Result<Rational, MeasureError> {
    for m in [a, b] {
        if m.support_size() > cap {
            return Err(MeasureError::SupportTooLarge {
                support: m.support_size(),
                cap,
            });
        }
    }
    let ab = one_sided_prokhorov(a, b, space)?;
    let ba = one_sided_prokhorov(b, a, space)?;
    Ok(ab.max(ba))
}

/// `sup_A inf { eps : mu(A) <= nu(A^eps) + eps }` over nonempty subsets `A`
/// of the support of `mu`.
fn one_sided_prokhorov(
    mu: &IdealMeasure,
    nu: &IdealMeasure,
    space: &Space,
) -> Result<Rational, MeasureError> {
    let m = mu.support_size();
    // d(nu_atom, mu_atom), exact.
    let mut dist = vec![vec![Rational::zero(); m]; nu.support_size()];
    for (y, row) in nu.atoms().iter().zip(dist.iter_mut()) {
        for (x, cell) in mu.atoms().iter().zip(row.iter_mut()) {
            *cell = space
                .exact_distance(y.0, x.0)
                .ok_or(MeasureError::IrrationalDistance)?;
        }
    }
    let mut worst = Rational::zero();
    for mask in 1u64..(1 << m) {
        let mu_a: Rational = mu
            .atoms()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, (_, w))| w.clone())
            .sum();
        // Distances from each nu atom to the set A, with the nu mass at
        // each distinct distance.
        let mut pairs: Vec<(Rational, Rational)> = nu
            .atoms()
            .iter()
            .enumerate()
            .map(|(yi, (_, w))| {
                let d_to_a = (0..m)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| dist[yi][i].clone())
                    .min()
                    .unwrap();
                (d_to_a, w.clone())
            })
            .collect();
        pairs.sort_by(|x, y| x.0.cmp(&y.0));
        // Breakpoints with cumulative nu mass through each distance.
        let mut breakpoints: Vec<(Rational, Rational)> = Vec::new();
        let mut acc = Rational::zero();
        for (d, w) in pairs {
            acc += w;
            match breakpoints.last_mut() {
                Some((bd, bm)) if *bd == d => *bm = acc.clone(),
                _ => breakpoints.push((d, acc.clone())),
            }
        }
        // Sweep the intervals (lower_j, upper_j] on which nu(A^eps) is
        // constant; the threshold for feasibility in interval j is
        // mu(A) - M_j.
        let t_a = 'sweep: {
            for j in 0..=breakpoints.len() {
                let lower = if j == 0 {
                    Rational::zero()
                } else {
                    breakpoints[j - 1].0.clone()
                };
                let mass = if j == 0 {
                    Rational::zero()
                } else {
                    breakpoints[j - 1].1.clone()
                };
                let tau = &mu_a - &mass;
                if tau <= lower {
                    break 'sweep lower;
                }
                if j < breakpoints.len() && tau <= breakpoints[j].0 {
                    break 'sweep tau;
                }
            }
            // Unreachable: the final interval always feasible since the
            // full nu mass is 1 >= mu(A).
            unreachable!("prokhorov sweep must terminate");
        };
        worst = worst.max(t_a);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Exact Wasserstein distance (transportation simplex)
// ---------------------------------------------------------------------------

/// Support cap for the exact transportation solver.
pub const WASSERSTEIN_SUPPORT_CAP: usize = 64;

/// A feasible transport plan between two ideal measures: nonnegative flows
/// with the measures' weights as marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    pub flows: Vec<Vec<Rational>>,
}

impl TransportPlan {
    /// Checks marginals exactly.
    pub fn validate(&self, a: &IdealMeasure, b: &IdealMeasure) -> bool {
        let m = a.support_size();
        let n = b.support_size();
        if self.flows.len() != m || self.flows.iter().any(|r| r.len() != n) {
            return false;
        }
        if self
            .flows
            .iter()
            .any(|r| r.iter().any(|f| f.is_negative()))
        {
            return false;
        }
        for (i, (_, w)) in a.atoms().iter().enumerate() {
            let row: Rational = self.flows[i].iter().cloned().sum();
            if &row != w {
                return false;
            }
        }
        for (j, (_, w)) in b.atoms().iter().enumerate() {
            let col: Rational = self.flows.iter().map(|r| r[j].clone()).sum();
            if &col != w {
                return false;
            }
        }
        true
    }
}

/// Exact Wasserstein distance as the minimal transport cost, solved by the
/// transportation simplex with Bland's rule in exact rational arithmetic.
/// Returns the optimal plan as a witness.
pub fn wasserstein_exact(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
) -> Result<(Rational, TransportPlan), MeasureError> {
    if space.diameter_bound().is_none() {
        return Err(MeasureError::UnboundedSpace);
    }
    for m in [a, b] {
        if m.support_size() > WASSERSTEIN_SUPPORT_CAP {
            return Err(MeasureError::SupportTooLarge {
                support: m.support_size(),
                cap: WASSERSTEIN_SUPPORT_CAP,
            });
        }
    }
    let m = a.support_size();
    let n = b.support_size();
    let mut cost = vec![vec![Rational::zero(); n]; m];
    for i in 0..m {
        for j in 0..n {
            cost[i][j] = space
                .exact_distance(a.atoms()[i].0, b.atoms()[j].0)
                .ok_or(MeasureError::IrrationalDistance)?;
        }
    }
    let supplies: Vec<Rational> = a.atoms().iter().map(|(_, w)| w.clone()).collect();
    let demands: Vec<Rational> = b.atoms().iter().map(|(_, w)| w.clone()).collect();
    let flows = transport_simplex(&supplies, &demands, &cost);
    let value: Rational = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| &flows[i][j] * &cost[i][j])
        .sum();
    Ok((value, TransportPlan { flows }))
}

/// Primal transportation simplex. Basis kept as a spanning tree of the
/// bipartite supply/demand graph; Bland's entering rule (first negative
/// reduced cost in row-major order) with lexicographic leaving ties, which
/// rules out cycling under degeneracy.
fn transport_simplex(
    supplies: &[Rational],
    demands: &[Rational],
    cost: &[Vec<Rational>],
) -> Vec<Vec<Rational>> {
    let m = supplies.len();
    let n = demands.len();
    let mut flow = vec![vec![Rational::zero(); n]; m];
    let mut basis = vec![vec![false; n]; m];

    // Northwest-corner start: a path through the grid, m + n - 1 cells.
    {
        let mut i = 0;
        let mut j = 0;
        let mut supply = supplies.to_vec();
        let mut demand = demands.to_vec();
        loop {
            let f = supply[i].clone().min(demand[j].clone());
            flow[i][j] = f.clone();
            basis[i][j] = true;
            supply[i] -= &f;
            demand[j] -= &f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if supply[i].is_zero() && i < m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    loop {
        // Duals from the basis tree: u_i + v_j = c_ij, u_0 = 0.
        let mut u: Vec<Option<Rational>> = vec![None; m];
        let mut v: Vec<Option<Rational>> = vec![None; n];
        u[0] = Some(Rational::zero());
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..m {
                for j in 0..n {
                    if !basis[i][j] {
                        continue;
                    }
                    match (&u[i], &v[j]) {
                        (Some(ui), None) => {
                            v[j] = Some(&cost[i][j] - ui);
                            changed = true;
                        }
                        (None, Some(vj)) => {
                            u[i] = Some(&cost[i][j] - vj);
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
        let u: Vec<Rational> = u.into_iter().map(|x| x.unwrap()).collect();
        let v: Vec<Rational> = v.into_iter().map(|x| x.unwrap()).collect();

        // Bland: first cell with negative reduced cost.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if basis[i][j] {
                    continue;
                }
                if &cost[i][j] - &u[i] - &v[j] < Rational::zero() {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return flow;
        };

        // Unique cycle: path from row ei to col ej through basis edges.
        // Nodes: rows 0..m, cols m..m+n.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for i in 0..m {
            for j in 0..n {
                if basis[i][j] {
                    adj[i].push(m + j);
                    adj[m + j].push(i);
                }
            }
        }
        let mut parent: Vec<Option<usize>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let mut stack = vec![ei];
        seen[ei] = true;
        while let Some(x) = stack.pop() {
            if x == m + ej {
                break;
            }
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    stack.push(y);
                }
            }
        }
        let mut path = vec![m + ej];
        while let Some(&Some(p)) = parent.get(*path.last().unwrap()) {
            path.push(p);
            if p == ei {
                break;
            }
        }
        path.reverse(); // ei, ..., m + ej
        // Cycle edges: entering (plus), then path edges alternating
        // minus/plus starting from the entering cell's row end.
        let mut minus_cells: Vec<(usize, usize)> = Vec::new();
        let mut plus_cells: Vec<(usize, usize)> = vec![(ei, ej)];
        for (idx, w) in path.windows(2).enumerate() {
            let (x, y) = (w[0], w[1]);
            let (ri, cj) = if x < m { (x, y - m) } else { (y, x - m) };
            if idx % 2 == 0 {
                minus_cells.push((ri, cj));
            } else {
                plus_cells.push((ri, cj));
            }
        }
        let theta = minus_cells
            .iter()
            .map(|&(i, j)| flow[i][j].clone())
            .min()
            .unwrap();
        let leaving = minus_cells
            .iter()
            .filter(|&&(i, j)| flow[i][j] == theta)
            .min()
            .copied()
            .unwrap();
        for &(i, j) in &plus_cells {
            flow[i][j] += &theta;
        }
        for &(i, j) in &minus_cells {
            flow[i][j] -= &theta;
        }
        basis[ei][ej] = true;
        basis[leaving.0][leaving.1] = false;
    }
}

// ---------------------------------------------------------------------------
// Metric equivalence bounds
// ---------------------------------------------------------------------------

/// Certified inequalities tying the two metrics together on a bounded
/// space: `W <= (M+1) rho`, and `rho < eps` for every checked rational
/// `eps` with `eps^2 > W` and `eps < 1`.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub prokhorov: Rational,
    pub wasserstein: Rational,
    pub diameter_bound: Rational,
    pub lipschitz_ok: bool,
    /// `(eps, rho < eps)` for each checked candidate.
    pub prokhorov_checks: Vec<(Rational, bool)>,
}

impl EquivalenceReport {
    pub fn all_ok(&self) -> bool {
        self.lipschitz_ok && self.prokhorov_checks.iter().all(|(_, ok)| *ok)
    }
}

pub fn check_equivalence_bounds(
    a: &IdealMeasure,
    b: &IdealMeasure,
    space: &Space,
) -> Result<EquivalenceReport, MeasureError> {
    let diameter = space.diameter_bound().ok_or(MeasureError::UnboundedSpace)?;
    let rho = prokhorov_exact(a, b, space)?;
    let (w, _) = wasserstein_exact(a, b, space)?;
    let lipschitz_ok = w.clone() <= (&diameter + Rational::one()) * &rho;
    let mut prokhorov_checks = Vec::new();
    let mut candidates: Vec<Rational> = (1..=16)
        .map(|i| Rational::new(BigInt::from(i), BigInt::from(16)))
        .collect();
    candidates.push((&w + Rational::one()) / Rational::from_integer(BigInt::from(2)));
    for eps in candidates {
        if eps < Rational::one() && &eps * &eps > w {
            let ok = rho < eps;
            prokhorov_checks.push((eps, ok));
        }
    }
    Ok(EquivalenceReport {
        prokhorov: rho,
        wasserstein: w,
        diameter_bound: diameter,
        lipschitz_ok,
        prokhorov_checks,
    })
}

// ---------------------------------------------------------------------------
// Stage mass of shrunk ball unions
// ---------------------------------------------------------------------------

/// Mass of the stage-n ideal measure on the union of the given balls with
/// every radius reduced by `shrink` (strict membership). Closed-form for
/// the built-in streams, an exact atom sweep otherwise.
fn stage_mass_in_shrunk_union(
    mu: &MeasureDescriptor,
    n: Stage,
    balls: &[IdealBall],
    shrink: &Rational,
    space: &Space,
) -> Rational {
    let shrunk: Vec<IdealBall> = balls
        .iter()
        .filter_map(|b| {
            let r = &b.radius - shrink;
            if r.is_positive() {
                Some(IdealBall::new(b.center, r))
            } else {
                None
            }
        })
        .collect();
    if shrunk.is_empty() {
        return Rational::zero();
    }
    match &mu.0.repr {
        MeasureRepr::LebesgueUnit => {
            let intervals: Vec<(Rational, Rational)> = shrunk
                .iter()
                .map(|b| {
                    let c = space.unit_rational(b.center);
                    (&c - &b.radius, &c + &b.radius)
                })
                .collect();
            lebesgue_stage_mass(n, intervals)
        }
        MeasureRepr::Bernoulli(p) => {
            let cylinders: Vec<Vec<bool>> = shrunk
                .iter()
                .map(|b| {
                    let len = cantor_cylinder_len(&b.radius) as usize;
                    let w = cantor_word(b.center);
                    (0..len).map(|i| w.get(i).copied().unwrap_or(false)).collect()
                })
                .collect();
            bernoulli_stage_mass(p, n, cylinders)
        }
        MeasureRepr::Mix(parts) => parts
            .iter()
            .map(|(w, part)| w * stage_mass_in_shrunk_union(part, n, balls, shrink, space))
            .sum(),
        _ => {
            let m = mu.ideal_at(n);
            m.mass_where(|i| {
                shrunk.iter().any(|b| {
                    match space.exact_distance(i, b.center) {
                        Some(d) => d < b.radius,
                        // Count only provable membership; sound for lower
                        // bounds.
                        None => space.distance(i, b.center, n + 10).hi() < &b.radius,
                    }
                })
            })
        }
    }
}

/// Exact count of dyadic midpoints `(2k+1)/2^(n+3)` in a union of open
/// intervals, times the atom weight. Intervals are merged only where they
/// overlap with positive length, so touching endpoints are not absorbed.
fn lebesgue_stage_mass(n: Stage, mut intervals: Vec<(Rational, Rational)>) -> Rational {
    intervals.retain(|(a, b)| a < b);
    intervals.sort_by(|x, y| x.0.cmp(&y.0));
    let mut merged: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some((_, hi)) if a < *hi => {
                if b > *hi {
                    *hi = b;
                }
            }
            _ => merged.push((a, b)),
        }
    }
    let level = n + 3;
    let scale = Rational::from_integer(BigInt::one() << (level as usize));
    let two = Rational::from_integer(BigInt::from(2));
    let max_k = BigInt::from((1u64 << (level - 1)) - 1);
    let mut count = BigInt::zero();
    for (a, b) in merged {
        // a < (2k+1)/2^level < b
        let lo = (&a * &scale - Rational::one()) / &two;
        let hi = (&b * &scale - Rational::one()) / &two;
        let k_min: BigInt = lo.floor().to_integer() + 1;
        let k_max: BigInt = hi.ceil().to_integer() - 1;
        let k_min = k_min.max(BigInt::zero());
        let k_max = k_max.min(max_k.clone());
        if k_max >= k_min {
            count += k_max - k_min + 1;
        }
    }
    Rational::new(count, BigInt::one() << ((n + 2) as usize))
}

/// Mass of the stage-n Bernoulli measure on a union of cylinders, via the
/// maximal (laminar) cylinder decomposition.
fn bernoulli_stage_mass(p: &Rational, n: Stage, mut cylinders: Vec<Vec<bool>>) -> Rational {
    cylinders.sort_by_key(|c| c.len());
    let mut maximal: Vec<Vec<bool>> = Vec::new();
    'outer: for c in cylinders {
        for kept in &maximal {
            if c.len() >= kept.len() && c[..kept.len()] == kept[..] {
                continue 'outer;
            }
        }
        maximal.push(c);
    }
    let q = Rational::one() - p;
    let len = (n + 1) as usize;
    maximal
        .iter()
        .map(|v| {
            if v.len() <= len {
                v.iter()
                    .map(|&bit| if bit { p.clone() } else { q.clone() })
                    .product()
            } else {
                // Only the single padded atom can lie in a deeper cylinder.
                if v[len..].iter().any(|&bit| bit) {
                    Rational::zero()
                } else {
                    v[..len]
                        .iter()
                        .map(|&bit| if bit { p.clone() } else { q.clone() })
                        .product()
                }
            }
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Valuation
// ---------------------------------------------------------------------------

/// Staged lower bound on `mu(U)`: for each n up to the stage, the stage-n
/// ideal measure of the union with every radius shrunk by `eps_n = 2^-(n-1)`
/// minus `eps_n`, maximized over n. Monotone in the stage, never exceeds
/// `mu(U)`.
pub fn valuation_lower(
    mu: &MeasureDescriptor,
    u: &ROpenSet,
    space: &Space,
    stage: Stage,
) -> Rational {
    let balls = u.balls_through(stage);
    valuation_lower_union(mu, &balls, space, stage)
}

/// The same bound for an explicit finite ball union.
pub fn valuation_lower_union(
    mu: &MeasureDescriptor,
    balls: &[IdealBall],
    space: &Space,
    stage: Stage,
) -> Rational {
    if balls.is_empty() {
        return Rational::zero();
    }
    if let Err(e) = mu.verify_fast_prefix(space, stage.min(8)) {
        panic!("measure descriptor contract violated: {e}");
    }
    let mut best = Rational::zero();
    for n in 1..=stage {
        let eps = pow2_neg(n - 1);
        let mass = stage_mass_in_shrunk_union(mu, n, balls, &eps, space);
        let bound = mass - &eps;
        if bound > best {
            best = bound;
        }
    }
    best
}

/// Exact mass of an ideal measure on a finite union of open (strict) or
/// closed (non-strict) balls. Needs exact distances.
pub fn valuation_ideal_union(
    m: &IdealMeasure,
    balls: &[IdealBall],
    closed: bool,
    space: &Space,
) -> Result<Rational, MeasureError> {
    let mut total = Rational::zero();
    for (i, w) in m.atoms() {
        let mut inside = false;
        for b in balls {
            let d = space
                .exact_distance(*i, b.center)
                .ok_or(MeasureError::IrrationalDistance)?;
            if (closed && d <= b.radius) || (!closed && d < b.radius) {
                inside = true;
                break;
            }
        }
        if inside {
            total += w;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Staged lower bound on the integral of an lsc function: the peeling
/// recursion on the finite supremum of steps enumerated by the stage, with
/// each union mass bounded by the staged valuation. Monotone in the stage,
/// never exceeds the integral.
pub fn integrate_lower(
    mu: &MeasureDescriptor,
    f: &LscFunction,
    space: &Space,
    stage: Stage,
) -> Rational {
    match f.node() {
        LscNode::WeightedSum(pairs) => pairs
            .iter()
            .map(|(w, g)| w * integrate_lower(mu, g, space, stage))
            .sum(),
        LscNode::Scale(a, g) => a * integrate_lower(mu, g, space, stage),
        LscNode::LevelSup(levels) => {
            // Integral of the level-count function as the sum over n >= 1
            // of the measure of the first n+1 levels' intersection; a
            // truncated sum is still a sound lower bound.
            let cap = stage.min(8);
            let mut total = Rational::zero();
            let mut parts: Vec<ROpenSet> = Vec::new();
            match levels.level(0) {
                Some(u) => parts.push(u),
                None => return Rational::zero(),
            }
            for nn in 1..=cap {
                match levels.level(nn) {
                    Some(u) => parts.push(u),
                    None => break,
                }
                let inter = ROpenSet::intersection_all(parts.clone(), space);
                total += valuation_lower(mu, &inter, space, stage);
            }
            total
        }
        LscNode::Transported { rep, inner } => {
            transported_integral_lower(rep, inner, stage)
        }
        _ => {
            let steps = collect_steps(f, stage);
            peel_integral(mu, steps, space, stage)
        }
    }
}

/// The integration recursion: subtract the minimum value times the staged
/// valuation of the full union, reduce every value by the minimum, drop
/// zeros, recurse.
fn peel_integral(
    mu: &MeasureDescriptor,
    mut steps: Vec<StepFn>,
    space: &Space,
    stage: Stage,
) -> Rational {
    let mut total = Rational::zero();
    while !steps.is_empty() {
        let q_min = steps.iter().map(|s| s.value.clone()).min().unwrap();
        let balls: Vec<IdealBall> = steps.iter().map(|s| s.ball.clone()).collect();
        total += &q_min * valuation_lower_union(mu, &balls, space, stage);
        steps = steps
            .into_iter()
            .filter_map(|s| {
                let v = &s.value - &q_min;
                if v.is_positive() {
                    Some(StepFn::new(s.ball, v))
                } else {
                    None
                }
            })
            .collect();
    }
    total
}

/// Lower bound on the integral of a Cantor-space function against the
/// pushforward measure of a binary representation, via cylinder peeling
/// with cell-measure lower bounds.
fn transported_integral_lower(
    rep: &crate::binaryrep::BinaryRep,
    inner: &LscFunction,
    stage: Stage,
) -> Rational {
    let steps = collect_steps(inner, stage);
    let mut items: Vec<(Vec<bool>, Rational)> = steps
        .into_iter()
        .map(|s| {
            let len = cantor_cylinder_len(&s.ball.radius) as usize;
            let w = cantor_word(s.ball.center);
            let cyl: Vec<bool> = (0..len).map(|i| w.get(i).copied().unwrap_or(false)).collect();
            (cyl, s.value)
        })
        .collect();
    let mut total = Rational::zero();
    while !items.is_empty() {
        let q_min = items.iter().map(|(_, v)| v.clone()).min().unwrap();
        let cylinders: Vec<Vec<bool>> = items.iter().map(|(c, _)| c.clone()).collect();
        total += &q_min * cylinder_union_mass_lower(rep, &cylinders, stage);
        items = items
            .into_iter()
            .filter_map(|(c, v)| {
                let v = &v - &q_min;
                if v.is_positive() {
                    Some((c, v))
                } else {
                    None
                }
            })
            .collect();
    }
    total
}

/// Lower bound on the pushforward mass of a union of cylinders: the sum of
/// cell-measure lower bounds over the maximal disjoint cylinders.
fn cylinder_union_mass_lower(
    rep: &crate::binaryrep::BinaryRep,
    cylinders: &[Vec<bool>],
    stage: Stage,
) -> Rational {
    let mut sorted: Vec<Vec<bool>> = cylinders.to_vec();
    sorted.sort_by_key(|c| c.len());
    let mut maximal: Vec<Vec<bool>> = Vec::new();
    'outer: for c in sorted {
        for kept in &maximal {
            if c.len() >= kept.len() && c[..kept.len()] == kept[..] {
                continue 'outer;
            }
        }
        maximal.push(c);
    }
    maximal
        .iter()
        .map(|w| {
            crate::binaryrep::cell_measure(rep, w, stage)
                .lo()
                .clone()
                .max(Rational::zero())
        })
        .sum()
}

/// Two-sided staged enclosure of the integral of a bounded computable
/// function given by the lsc parts of `f + M` and `M - f`:
/// `[lower(f + M) - M, M - lower(M - f)]`. Nested across stages and always
/// contains the integral.
pub fn integrate_bounded(
    mu: &MeasureDescriptor,
    f_plus_bound: &LscFunction,
    bound_minus_f: &LscFunction,
    bound: &Rational,
    space: &Space,
    stage: Stage,
) -> RatInterval {
    let lo = integrate_lower(mu, f_plus_bound, space, stage) - bound;
    let hi = bound - integrate_lower(mu, bound_minus_f, space, stage);
    RatInterval::new(lo, hi).expect("bounded-integral enclosure must be nonempty")
}
