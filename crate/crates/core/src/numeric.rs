//! Exact rational scalars, rational intervals, and stage-indexed bounds.
//!
//! A [`LowerReal`] is the computational form of a lower semicomputable real:
//! a monotone map from stages to rational lower bounds, with a distinct
//! bottom element (no bound yet) that consumers of nonnegative quantities
//! read as 0. An [`UpperReal`] is the antitone mirror. [`RatInterval`] is a
//! plain exact enclosure used wherever a quantity is known two-sidedly.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar. Canonical form (reduced, positive denominator) is
/// maintained by the underlying representation.
pub type Rational = num_rational::BigRational;

/// Global fuel for staged evaluation.
pub type Stage = u32;

/// `n/d` as a [`Rational`]. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `2^-k` as a [`Rational`].
pub fn pow2_neg(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << (k as usize))
}

/// `2^k` as a [`Rational`].
pub fn pow2(k: u32) -> Rational {
    Rational::from_integer(BigInt::one() << (k as usize))
}

/// Canonical string form `p/q` (the denominator is printed even when 1).
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(s: &str) -> Result<Rational, NumericError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| NumericError::MalformedRational(s.to_string()))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| NumericError::MalformedRational(s.to_string()))?;
    if d.is_zero() {
        return Err(NumericError::MalformedRational(s.to_string()));
    }
    Ok(Rational::new(n, d))
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NumericError {
    /// Interval endpoints out of order.
    EmptyInterval,
    /// String did not parse as `p/q`.
    MalformedRational(String),
}

impl fmt::Display for NumericError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericError::EmptyInterval => write!(f, "interval endpoints out of order"),
            NumericError::MalformedRational(s) => write!(f, "malformed rational: {s:?}"),
        }
    }
}

impl std::error::Error for NumericError {}

// ---------------------------------------------------------------------------
// Rational intervals
// ---------------------------------------------------------------------------

/// Closed rational interval `[lo, hi]`, `lo <= hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatInterval {
    lo: Rational,
    hi: Rational,
}

impl RatInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, NumericError> {
        if lo > hi {
            return Err(NumericError::EmptyInterval);
        }
        Ok(RatInterval { lo, hi })
    }

    /// Degenerate interval `[q, q]`.
    pub fn point(q: Rational) -> Self {
        RatInterval { lo: q.clone(), hi: q }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(BigInt::from(2))
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Tightest enclosure of `a + b` over all points of the inputs.
    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    /// Tightest enclosure of `a - b`.
    pub fn sub(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    /// Tightest enclosure of `a * b` (endpoint products).
    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        RatInterval { lo, hi }
    }

    /// Tightest enclosure of `min(a, b)`.
    pub fn min(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().min(other.hi.clone()),
        }
    }

    /// Tightest enclosure of `max(a, b)`.
    pub fn max(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: self.lo.clone().max(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Intersection, or `None` if the intervals are disjoint.
    pub fn intersect(&self, other: &RatInterval) -> Option<RatInterval> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        if lo <= hi {
            Some(RatInterval { lo, hi })
        } else {
            None
        }
    }
}

impl fmt::Display for RatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            format_rational(&self.lo),
            format_rational(&self.hi)
        )
    }
}

// ---------------------------------------------------------------------------
// Stage-indexed lower bounds
// ---------------------------------------------------------------------------

enum LowerNode {
    /// Bottom: no bound at any stage.
    Bottom,
    Constant(Rational),
    /// Per-stage raw bounds; evaluation takes the running maximum so the
    /// monotonicity invariant holds regardless of the raw table.
    Table(Vec<Option<Rational>>),
    /// Raw staged bounds from a closure; evaluation takes the running max.
    Fn(Box<dyn Fn(Stage) -> Option<Rational> + Send + Sync>),
    /// Closure promised to be monotone by its author; evaluated directly.
    MonotoneFn(Box<dyn Fn(Stage) -> Option<Rational> + Send + Sync>),
    Sup(Vec<LowerReal>),
    WeightedSum(Vec<(Rational, LowerReal)>),
}

/// A lower semicomputable real realized as monotone stage-indexed rational
/// lower bounds. `bound_at(n)` is `None` while the value is still bottom;
/// once a bound appears it never decreases. The realized value is the
/// supremum over all stages, possibly `+inf`.
#[derive(Clone)]
pub struct LowerReal(Arc<LowerNode>);

impl LowerReal {
    /// The bottom element: described by nothing, bounded at no stage.
    pub fn bottom() -> Self {
        LowerReal(Arc::new(LowerNode::Bottom))
    }

    pub fn constant(q: Rational) -> Self {
        LowerReal(Arc::new(LowerNode::Constant(q)))
    }

    /// Stage table; entries beyond the end repeat the final running maximum.
    pub fn from_table(table: Vec<Option<Rational>>) -> Self {
        LowerReal(Arc::new(LowerNode::Table(table)))
    }

    /// Staged bounds from an arbitrary closure. The running maximum over
    /// stages `0..=n` is used, so the result is monotone even if the raw
    /// closure is not.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(Stage) -> Option<Rational> + Send + Sync + 'static,
    {
        LowerReal(Arc::new(LowerNode::Fn(Box::new(f))))
    }

    /// Staged bounds from a closure the caller guarantees to be monotone.
    /// Evaluated without the running-max sweep.
    pub fn from_monotone_fn<F>(f: F) -> Self
    where
        F: Fn(Stage) -> Option<Rational> + Send + Sync + 'static,
    {
        LowerReal(Arc::new(LowerNode::MonotoneFn(Box::new(f))))
    }

    /// Pointwise supremum of finitely many staged bounds. The empty list is
    /// the bottom element.
    pub fn sup(xs: Vec<LowerReal>) -> Self {
        LowerReal(Arc::new(LowerNode::Sup(xs)))
    }

    /// `sum of w_i * x_i` with positive rational weights. A bottom summand
    /// contributes the trivial lower bound 0 while any other summand has a
    /// bound; the result is bottom at stages where every summand is bottom.
    /// The empty sum is the constant 0.
    pub fn weighted_sum(pairs: Vec<(Rational, LowerReal)>) -> Self {
        LowerReal(Arc::new(LowerNode::WeightedSum(pairs)))
    }

    /// The bound at `stage`, or `None` if the value is still bottom there.
    pub fn bound_at(&self, stage: Stage) -> Option<Rational> {
        match &*self.0 {
            LowerNode::Bottom => None,
            LowerNode::Constant(q) => Some(q.clone()),
            LowerNode::Table(t) => {
                let end = (stage as usize).min(t.len().saturating_sub(1));
                if t.is_empty() {
                    return None;
                }
                let mut best: Option<Rational> = None;
                for entry in t.iter().take(end + 1) {
                    if let Some(q) = entry {
                        best = Some(match best {
                            Some(b) => b.max(q.clone()),
                            None => q.clone(),
                        });
                    }
                }
                best
            }
            LowerNode::Fn(f) => {
                let mut best: Option<Rational> = None;
                for m in 0..=stage {
                    if let Some(q) = f(m) {
                        best = Some(match best {
                            Some(b) => b.max(q),
                            None => q,
                        });
                    }
                }
                best
            }
            LowerNode::MonotoneFn(f) => f(stage),
            LowerNode::Sup(xs) => xs.iter().filter_map(|x| x.bound_at(stage)).max(),
            LowerNode::WeightedSum(pairs) => {
                if pairs.is_empty() {
                    return Some(Rational::zero());
                }
                if pairs.iter().all(|(_, x)| x.is_certainly_nonneg()) {
                    return Self::weighted_sum_raw(pairs, stage);
                }
                // A summand whose first finite bound is negative would make
                // the raw sum dip when it leaves bottom; the running max
                // keeps the invariant.
                let mut best: Option<Rational> = None;
                for m in 0..=stage {
                    if let Some(q) = Self::weighted_sum_raw(pairs, m) {
                        best = Some(match best {
                            Some(b) => b.max(q),
                            None => q,
                        });
                    }
                }
                best
            }
        }
    }

    fn weighted_sum_raw(pairs: &[(Rational, LowerReal)], stage: Stage) -> Option<Rational> {
        let mut any = false;
        let mut total = Rational::zero();
        for (w, x) in pairs {
            if let Some(b) = x.bound_at(stage) {
                any = true;
                total += w * b;
            }
        }
        if any {
            Some(total)
        } else {
            None
        }
    }

    /// The bound at `stage` with bottom read as 0, the convention for
    /// nonnegative quantities.
    pub fn bound_or_zero(&self, stage: Stage) -> Rational {
        self.bound_at(stage).unwrap_or_else(Rational::zero)
    }

    /// True iff the stage bound strictly exceeds `threshold`. Monotone in
    /// the stage: once true, true forever.
    pub fn exceeds_at(&self, threshold: &Rational, stage: Stage) -> bool {
        match self.bound_at(stage) {
            Some(b) => &b > threshold,
            None => false,
        }
    }

    /// Conservative nonnegativity check used to skip the running-max sweep.
    fn is_certainly_nonneg(&self) -> bool {
        match &*self.0 {
            LowerNode::Bottom => true,
            LowerNode::Constant(q) => !q.is_negative(),
            LowerNode::Table(t) => t
                .iter()
                .all(|e| e.as_ref().map_or(true, |q| !q.is_negative())),
            LowerNode::Fn(_) | LowerNode::MonotoneFn(_) => false,
            LowerNode::Sup(xs) => xs.iter().all(|x| x.is_certainly_nonneg()),
            LowerNode::WeightedSum(ps) => ps.iter().all(|(_, x)| x.is_certainly_nonneg()),
        }
    }
}

impl fmt::Debug for LowerReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bound_at(8) {
            Some(q) => write!(f, "LowerReal(>= {} @8)", format_rational(&q)),
            None => write!(f, "LowerReal(bottom @8)"),
        }
    }
}

// ---------------------------------------------------------------------------
// Stage-indexed upper bounds
// ---------------------------------------------------------------------------

enum UpperNode {
    /// Top: no bound at any stage.
    Top,
    Constant(Rational),
    /// Raw staged bounds; evaluation takes the running minimum.
    Fn(Box<dyn Fn(Stage) -> Option<Rational> + Send + Sync>),
    Inf(Vec<UpperReal>),
}

/// An upper semicomputable real: antitone stage-indexed rational upper
/// bounds, `None` standing for `+inf` (no bound yet).
#[derive(Clone)]
pub struct UpperReal(Arc<UpperNode>);

impl UpperReal {
    pub fn top() -> Self {
        UpperReal(Arc::new(UpperNode::Top))
    }

    pub fn constant(q: Rational) -> Self {
        UpperReal(Arc::new(UpperNode::Constant(q)))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(Stage) -> Option<Rational> + Send + Sync + 'static,
    {
        UpperReal(Arc::new(UpperNode::Fn(Box::new(f))))
    }

    pub fn inf(xs: Vec<UpperReal>) -> Self {
        UpperReal(Arc::new(UpperNode::Inf(xs)))
    }

    pub fn bound_at(&self, stage: Stage) -> Option<Rational> {
        match &*self.0 {
            UpperNode::Top => None,
            UpperNode::Constant(q) => Some(q.clone()),
            UpperNode::Fn(f) => {
                let mut best: Option<Rational> = None;
                for m in 0..=stage {
                    if let Some(q) = f(m) {
                        best = Some(match best {
                            Some(b) => b.min(q),
                            None => q,
                        });
                    }
                }
                best
            }
            UpperNode::Inf(xs) => xs.iter().filter_map(|x| x.bound_at(stage)).min(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ri(lo: (i64, i64), hi: (i64, i64)) -> RatInterval {
        RatInterval::new(rat(lo.0, lo.1), rat(hi.0, hi.1)).unwrap()
    }

    #[test]
    fn interval_add_exact_endpoints() {
        let a = RatInterval::point(rat(1, 2));
        let b = RatInterval::point(rat(1, 4));
        assert_eq!(a.add(&b), RatInterval::point(rat(3, 4)));
    }

    #[test]
    fn interval_mul_sign_analysis() {
        let a = ri((0, 1), (1, 1));
        let b = ri((-1, 1), (1, 1));
        assert_eq!(a.mul(&b), ri((-1, 1), (1, 1)));
    }

    #[test]
    fn interval_min_endpoint_cases() {
        // Oracle: enumerate endpoint pairs and take componentwise extremes.
        let a = ri((0, 1), (2, 1));
        let b = ri((1, 1), (3, 1));
        let pairs = [
            (a.lo(), b.lo()),
            (a.lo(), b.hi()),
            (a.hi(), b.lo()),
            (a.hi(), b.hi()),
        ];
        let oracle_lo = pairs
            .iter()
            .map(|(x, y)| (*x).clone().min((*y).clone()))
            .min()
            .unwrap();
        let oracle_hi = pairs
            .iter()
            .map(|(x, y)| (*x).clone().min((*y).clone()))
            .max()
            .unwrap();
        let got = a.min(&b);
        assert_eq!(got, ri((0, 1), (2, 1)));
        assert_eq!(got.lo(), &oracle_lo);
        assert_eq!(got.hi(), &oracle_hi);
    }

    #[test]
    fn sup_of_empty_is_bottom() {
        let s = LowerReal::sup(vec![]);
        for stage in [0, 1, 5, 32] {
            assert_eq!(s.bound_at(stage), None);
        }
    }

    #[test]
    fn sup_of_constants() {
        let s = LowerReal::sup(vec![
            LowerReal::constant(rat(1, 2)),
            LowerReal::constant(rat(1, 3)),
        ]);
        assert_eq!(s.bound_at(0), Some(rat(1, 2)));
    }

    #[test]
    fn sup_idempotent() {
        let x = LowerReal::from_table(vec![None, Some(rat(1, 4)), Some(rat(1, 2))]);
        let s = LowerReal::sup(vec![x.clone(), x.clone()]);
        for stage in 0..8 {
            assert_eq!(s.bound_at(stage), x.bound_at(stage));
        }
    }

    #[test]
    fn weighted_sum_of_constants() {
        let s = LowerReal::weighted_sum(vec![
            (rat(1, 2), LowerReal::constant(rat(4, 1))),
            (rat(1, 4), LowerReal::constant(rat(8, 1))),
        ]);
        assert_eq!(s.bound_at(0), Some(rat(4, 1)));
        assert_eq!(s.bound_at(17), Some(rat(4, 1)));
    }

    #[test]
    fn weighted_sum_of_bottom_is_bottom() {
        let s = LowerReal::weighted_sum(vec![(rat(1, 1), LowerReal::bottom())]);
        for stage in [0, 3, 31] {
            assert_eq!(s.bound_at(stage), None);
        }
    }

    #[test]
    fn weighted_sum_empty_is_zero() {
        let s = LowerReal::weighted_sum(vec![]);
        assert_eq!(s.bound_at(0), Some(Rational::zero()));
    }

    #[test]
    fn weighted_sum_bottom_contributes_zero_next_to_finite() {
        let s = LowerReal::weighted_sum(vec![
            (rat(1, 1), LowerReal::bottom()),
            (rat(1, 2), LowerReal::constant(rat(1, 1))),
        ]);
        assert_eq!(s.bound_at(0), Some(rat(1, 2)));
    }

    #[test]
    fn exceeds_at_constants_and_bottom() {
        assert!(LowerReal::constant(rat(1, 1)).exceeds_at(&rat(1, 2), 0));
        assert!(!LowerReal::bottom().exceeds_at(&rat(0, 1), 9));
    }

    #[test]
    fn exceeds_at_table_threshold_stage() {
        let x = LowerReal::from_table(vec![
            Some(rat(0, 1)),
            Some(rat(0, 1)),
            Some(rat(3, 4)),
        ]);
        assert!(!x.exceeds_at(&rat(1, 2), 1));
        assert!(x.exceeds_at(&rat(1, 2), 2));
        assert!(x.exceeds_at(&rat(1, 2), 3));
    }

    #[test]
    fn upper_real_running_min() {
        let u = UpperReal::from_fn(|n| Some(rat(1, 1) + pow2_neg(n)));
        let b3 = u.bound_at(3).unwrap();
        let b5 = u.bound_at(5).unwrap();
        assert!(b5 <= b3);
        assert_eq!(b5, rat(1, 1) + pow2_neg(5));
    }

    // ----- property tests -----

    fn arb_rat() -> impl Strategy<Value = Rational> {
        (-40i64..40, 1i64..12).prop_map(|(n, d)| rat(n, d))
    }

    fn arb_interval() -> impl Strategy<Value = RatInterval> {
        (arb_rat(), arb_rat()).prop_map(|(a, b)| {
            if a <= b {
                RatInterval::new(a, b).unwrap()
            } else {
                RatInterval::new(b, a).unwrap()
            }
        })
    }

    /// Random staged-bound combinator tree grown from a seed.
    fn gen_lower(rng: &mut impl rand::Rng, depth: u32) -> LowerReal {
        let choice = if depth == 0 {
            rng.gen_range(0..3)
        } else {
            rng.gen_range(0..5)
        };
        match choice {
            0 => LowerReal::bottom(),
            1 => LowerReal::constant(rat(rng.gen_range(-20..20), rng.gen_range(1..9))),
            2 => {
                let len = rng.gen_range(0..6);
                let table = (0..len)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            None
                        } else {
                            Some(rat(rng.gen_range(-20..20), rng.gen_range(1..9)))
                        }
                    })
                    .collect();
                LowerReal::from_table(table)
            }
            3 => {
                let len = rng.gen_range(0..4);
                LowerReal::sup((0..len).map(|_| gen_lower(rng, depth - 1)).collect())
            }
            _ => {
                let len = rng.gen_range(0..4);
                LowerReal::weighted_sum(
                    (0..len)
                        .map(|_| {
                            (
                                rat(rng.gen_range(1..8), rng.gen_range(1..8)),
                                gen_lower(rng, depth - 1),
                            )
                        })
                        .collect(),
                )
            }
        }
    }

    fn arb_lower(depth: u32) -> impl Strategy<Value = LowerReal> {
        any::<u64>().prop_map(move |seed| {
            use rand::SeedableRng;
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            gen_lower(&mut rng, depth)
        })
    }

    proptest! {
        #[test]
        fn interval_ops_sound(a in arb_interval(), b in arb_interval(),
                              ta in 0u8..=100, tb in 0u8..=100) {
            // Pick points inside each interval and check the exact result
            // of every operation lands in the operation's output interval.
            let pa = a.lo() + a.width() * rat(ta as i64, 100);
            let pb = b.lo() + b.width() * rat(tb as i64, 100);
            prop_assert!(a.add(&b).contains(&(&pa + &pb)));
            prop_assert!(a.sub(&b).contains(&(&pa - &pb)));
            prop_assert!(a.mul(&b).contains(&(&pa * &pb)));
            prop_assert!(a.min(&b).contains(&pa.clone().min(pb.clone())));
            prop_assert!(a.max(&b).contains(&pa.max(pb)));
        }

        #[test]
        fn staged_bounds_monotone(x in arb_lower(3)) {
            let mut prev: Option<Rational> = None;
            for stage in 0..=32u32 {
                let cur = x.bound_at(stage);
                match (&prev, &cur) {
                    (Some(p), Some(c)) => prop_assert!(c >= p),
                    (Some(_), None) => prop_assert!(false, "bound vanished"),
                    _ => {}
                }
                prev = cur;
            }
        }

        #[test]
        fn sup_commutes_with_stage_eval(tables in proptest::collection::vec(
            proptest::collection::vec(proptest::option::of((0i64..30, 1i64..8)), 0..6), 0..4),
            stage in 0u32..12)
        {
            let xs: Vec<LowerReal> = tables
                .iter()
                .map(|t| LowerReal::from_table(
                    t.iter().map(|o| o.map(|(n, d)| rat(n, d))).collect()))
                .collect();
            let combined = LowerReal::sup(xs.clone()).bound_at(stage);
            let pointwise = xs.iter().filter_map(|x| x.bound_at(stage)).max();
            prop_assert_eq!(combined, pointwise);
        }

        #[test]
        fn weighted_sum_commutes_with_stage_eval(tables in proptest::collection::vec(
            (1i64..6, proptest::collection::vec(proptest::option::of((0i64..30, 1i64..8)), 0..6)), 0..4),
            stage in 0u32..12)
        {
            // Nonnegative monotone inputs: the node value must equal the
            // stagewise formula exactly.
            let pairs: Vec<(Rational, LowerReal)> = tables
                .iter()
                .map(|(w, t)| (
                    rat(*w, 2),
                    LowerReal::from_table(
                        t.iter().map(|o| o.map(|(n, d)| rat(n, d))).collect()),
                ))
                .collect();
            let node = LowerReal::weighted_sum(pairs.clone());
            let got = node.bound_at(stage);
            let want = if pairs.is_empty() {
                Some(Rational::zero())
            } else {
                let mut any = false;
                let mut total = Rational::zero();
                for (w, x) in &pairs {
                    if let Some(b) = x.bound_at(stage) {
                        any = true;
                        total += w * b;
                    }
                }
                if any { Some(total) } else { None }
            };
            prop_assert_eq!(got, want);
        }
    }
}
