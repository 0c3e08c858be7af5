//! Computable metric spaces: ideal points, fast Cauchy point descriptors,
//! ideal balls, and recursively enumerable open sets.
//!
//! A space is described by its ideal points and an exact-interval distance
//! oracle. Points are streams of ideal-point indices subject to the fast
//! Cauchy contract `d(s_n, s_{n+1}) < 2^-n`, checked lazily on the prefixes
//! actually consumed. Membership of a point in an ideal ball is staged:
//! `Inside` and `Outside` are proofs and never flip; `Unknown` is the
//! non-halting observation.

use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::numeric::{pow2_neg, rat, RatInterval, Rational, Stage};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CmsError {
    /// A consumed prefix of a point stream provably violates the
    /// `d(s_n, s_{n+1}) < 2^-n` contract.
    FastCauchyViolation { stage: Stage },
}

impl fmt::Display for CmsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmsError::FastCauchyViolation { stage } => {
                write!(f, "fast Cauchy contract violated at stage {stage}")
            }
        }
    }
}

impl std::error::Error for CmsError {}

// ---------------------------------------------------------------------------
// Pairing helpers
// ---------------------------------------------------------------------------

/// Cantor pairing `(a, b) -> n`.
pub fn pair(a: u64, b: u64) -> u64 {
    let s = a + b;
    s * (s + 1) / 2 + b
}

/// Inverse Cantor pairing.
pub fn unpair(n: u64) -> (u64, u64) {
    // Largest s with s(s+1)/2 <= n.
    let mut s = (((8.0 * n as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while (s + 1) * (s + 2) / 2 <= n {
        s += 1;
    }
    while s * (s + 1) / 2 > n {
        s -= 1;
    }
    let b = n - s * (s + 1) / 2;
    (s - b, b)
}

/// Three-way unpairing via iterated Cantor unpairing.
pub fn unpair3(n: u64) -> (u64, u64, u64) {
    let (a, rest) = unpair(n);
    let (b, c) = unpair(rest);
    (a, b, c)
}

/// Four-way unpairing.
pub fn unpair4(n: u64) -> (u64, u64, u64, u64) {
    let (a, rest) = unpair(n);
    let (b, c, d) = unpair3(rest);
    (a, b, c, d)
}

// ---------------------------------------------------------------------------
// Canonical enumerations of rationals
// ---------------------------------------------------------------------------

/// Lazily extended enumeration backed by a filter over Cantor-pair indices.
struct FilteredEnum {
    items: Mutex<(u64, Vec<Rational>)>, // (next raw pair index, accepted items)
    accept: fn(u64) -> Option<Rational>,
}

impl FilteredEnum {
    fn new(accept: fn(u64) -> Option<Rational>) -> Self {
        FilteredEnum {
            items: Mutex::new((0, Vec::new())),
            accept,
        }
    }

    fn get(&self, idx: u64) -> Rational {
        let mut guard = self.items.lock().unwrap();
        let (ref mut raw, ref mut items) = *guard;
        while (items.len() as u64) <= idx {
            if let Some(q) = (self.accept)(*raw) {
                items.push(q);
            }
            *raw += 1;
        }
        items[idx as usize].clone()
    }

    fn index_of(&self, q: &Rational) -> u64 {
        let mut idx = 0u64;
        loop {
            if &self.get(idx) == q {
                return idx;
            }
            idx += 1;
        }
    }
}

/// Canonical rationals of `[0, 1]` with a denominator that is not a power
/// of two; the dyadics have their own closed-form indexing.
fn accept_unit_nondyadic(raw: u64) -> Option<Rational> {
    let (a, b) = unpair(raw);
    let den = b + 1;
    if a > den || den.is_power_of_two() {
        return None;
    }
    let g = BigInt::from(a).gcd(&BigInt::from(den));
    if g != BigInt::one() {
        return None;
    }
    Some(rat(a as i64, den as i64))
}

/// Dyadic stream: `0, 1, 1/2, 1/4, 3/4, 1/8, 3/8, 5/8, 7/8, 1/16, ...`
fn dyadic_at(t: u64) -> Rational {
    match t {
        0 => Rational::zero(),
        1 => Rational::one(),
        _ => {
            let u = t - 1;
            let level = 64 - u.leading_zeros(); // bit length of u
            let j = u - (1u64 << (level - 1));
            Rational::new(
                BigInt::from(2 * j + 1),
                BigInt::one() << (level as usize),
            )
        }
    }
}

/// Inverse of [`dyadic_at`] for a canonical dyadic `num / 2^level` in
/// `[0, 1]` (`num` odd unless the value is 0 or 1).
fn dyadic_position(q: &Rational) -> Option<u64> {
    if q.is_zero() {
        return Some(0);
    }
    if q.is_one() {
        return Some(1);
    }
    let den = q.denom();
    let num = q.numer();
    if num.is_negative() || num > den {
        return None;
    }
    // Denominator must be a power of two.
    let bits = den.bits();
    if (BigInt::one() << ((bits - 1) as usize)) != *den {
        return None;
    }
    let level = (bits - 1) as u32;
    if level == 0 {
        return None; // 0 and 1 handled above
    }
    let num_u: u64 = num.try_into().ok()?;
    let j = (num_u - 1) / 2;
    Some((1u64 << (level - 1)) + j + 1)
}

/// Ideal-point index of the dyadic `(2j+1)/2^level` in the unit-interval
/// numbering (even indices are dyadics).
pub fn unit_dyadic_index(j: u64, level: u32) -> u64 {
    assert!(level >= 1);
    2 * ((1u64 << (level - 1)) + j + 1)
}

/// Ideal-point index of an endpoint: 0 -> index 0, 1 -> index 2.
pub fn unit_endpoint_index(one: bool) -> u64 {
    if one {
        2
    } else {
        0
    }
}

/// Ideal-point index of a canonical dyadic in `[0, 1]`, if it is one.
pub fn unit_dyadic_index_of(q: &Rational) -> Option<u64> {
    dyadic_position(q).map(|t| 2 * t)
}

fn accept_positive_rational(raw: u64) -> Option<Rational> {
    let (a, b) = unpair(raw);
    let num = a + 1;
    let den = b + 1;
    let g = BigInt::from(num).gcd(&BigInt::from(den));
    if g != BigInt::one() {
        return None;
    }
    Some(rat(num as i64, den as i64))
}

static POSITIVE_RATIONALS: std::sync::OnceLock<FilteredEnum> = std::sync::OnceLock::new();

/// The canonical enumeration of positive rationals used by every dovetailed
/// search in the crate.
pub fn positive_rational_at(idx: u64) -> Rational {
    POSITIVE_RATIONALS
        .get_or_init(|| FilteredEnum::new(accept_positive_rational))
        .get(idx)
}

// ---------------------------------------------------------------------------
// Cantor-space words
// ---------------------------------------------------------------------------

/// Canonical word for ideal-point index `i` of the Cantor space: the empty
/// word for 0, otherwise the binary expansion of `i` with its leading 1
/// moved to the end. Words are canonical (empty or ending in 1), so the
/// numbering is injective on the finitely supported sequences.
pub fn cantor_word(i: u64) -> Vec<bool> {
    if i == 0 {
        return Vec::new();
    }
    let bits = 64 - i.leading_zeros();
    let mut w: Vec<bool> = (0..bits - 1)
        .rev()
        .map(|k| (i >> k) & 1 == 1)
        .collect();
    w.push(true);
    w
}

/// Index of a canonical word (empty or ending in 1).
pub fn cantor_index(word: &[bool]) -> u64 {
    if word.is_empty() {
        return 0;
    }
    debug_assert!(*word.last().unwrap());
    let mut i = 1u64;
    for &b in &word[..word.len() - 1] {
        i = (i << 1) | (b as u64);
    }
    i
}

/// Index of the ideal point obtained by padding `word` with zeros (strips
/// trailing zeros first).
pub fn cantor_index_padded(word: &[bool]) -> u64 {
    let end = word.iter().rposition(|&b| b).map_or(0, |p| p + 1);
    cantor_index(&word[..end])
}

fn cantor_distance(i: u64, j: u64) -> Rational {
    if i == j {
        return Rational::zero();
    }
    let wi = cantor_word(i);
    let wj = cantor_word(j);
    let n = (0..)
        .find(|&k| wi.get(k).copied().unwrap_or(false) != wj.get(k).copied().unwrap_or(false))
        .unwrap();
    pow2_neg(n as u32)
}

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

/// Distance oracle for a user-defined space: `(i, j, k)` yields an interval
/// of width at most `2^-k` containing `d(s_i, s_j)`.
pub type DistanceOracle = dyn Fn(u64, u64, Stage) -> RatInterval + Send + Sync;

enum SpaceKind {
    /// Rationals of `[0, 1]`: dyadics on even indices with closed-form
    /// position arithmetic, all other canonical rationals on odd indices
    /// via a filtered pairing enumeration. Injective.
    UnitInterval,
    /// Finitely supported binary sequences, `d = 2^-(first difference)`.
    Cantor,
    Product(Space, Space),
    Custom {
        oracle: Box<DistanceOracle>,
        exact: Option<Box<dyn Fn(u64, u64) -> Option<Rational> + Send + Sync>>,
        diameter: Option<Rational>,
        point_count: Option<u64>,
    },
}

/// A computable metric space: ideal points with an exact-interval distance
/// oracle. Cheap to clone.
#[derive(Clone)]
pub struct Space(Arc<SpaceInner>);

struct SpaceInner {
    kind: SpaceKind,
    unit_enum: Option<FilteredEnum>,
}

impl Space {
    pub fn unit_interval() -> Space {
        Space(Arc::new(SpaceInner {
            kind: SpaceKind::UnitInterval,
            unit_enum: Some(FilteredEnum::new(accept_unit_nondyadic)),
        }))
    }

    pub fn cantor() -> Space {
        Space(Arc::new(SpaceInner {
            kind: SpaceKind::Cantor,
            unit_enum: None,
        }))
    }

    /// Product space under the max metric; indices are Cantor pairs.
    pub fn product(a: Space, b: Space) -> Space {
        Space(Arc::new(SpaceInner {
            kind: SpaceKind::Product(a, b),
            unit_enum: None,
        }))
    }

    pub fn custom(
        oracle: Box<DistanceOracle>,
        exact: Option<Box<dyn Fn(u64, u64) -> Option<Rational> + Send + Sync>>,
        diameter: Option<Rational>,
        point_count: Option<u64>,
    ) -> Space {
        Space(Arc::new(SpaceInner {
            kind: SpaceKind::Custom {
                oracle,
                exact,
                diameter,
                point_count,
            },
            unit_enum: None,
        }))
    }

    /// `None` means countably infinite.
    pub fn ideal_point_count(&self) -> Option<u64> {
        match &self.0.kind {
            SpaceKind::UnitInterval | SpaceKind::Cantor => None,
            SpaceKind::Product(a, b) => match (a.ideal_point_count(), b.ideal_point_count()) {
                (Some(x), Some(y)) => Some(x * y),
                _ => None,
            },
            SpaceKind::Custom { point_count, .. } => *point_count,
        }
    }

    pub fn diameter_bound(&self) -> Option<Rational> {
        match &self.0.kind {
            SpaceKind::UnitInterval | SpaceKind::Cantor => Some(Rational::one()),
            SpaceKind::Product(a, b) => {
                let da = a.diameter_bound()?;
                let db = b.diameter_bound()?;
                Some(da.max(db))
            }
            SpaceKind::Custom { diameter, .. } => diameter.clone(),
        }
    }

    /// The ideal rational for a unit-interval index.
    pub fn unit_rational(&self, i: u64) -> Rational {
        match &self.0.kind {
            SpaceKind::UnitInterval => {
                if i % 2 == 0 {
                    dyadic_at(i / 2)
                } else {
                    self.0.unit_enum.as_ref().unwrap().get(i / 2)
                }
            }
            _ => panic!("unit_rational on a non-interval space"),
        }
    }

    /// Index of a rational in `[0, 1]` under the canonical enumeration.
    pub fn unit_index_of(&self, q: &Rational) -> u64 {
        match &self.0.kind {
            SpaceKind::UnitInterval => {
                assert!(
                    !q.is_negative() && q <= &Rational::one(),
                    "rational outside [0, 1]"
                );
                match dyadic_position(q) {
                    Some(t) => 2 * t,
                    None => 2 * self.0.unit_enum.as_ref().unwrap().index_of(q) + 1,
                }
            }
            _ => panic!("unit_index_of on a non-interval space"),
        }
    }

    /// Exact ideal distance when the space supports it (all built-ins do).
    pub fn exact_distance(&self, i: u64, j: u64) -> Option<Rational> {
        match &self.0.kind {
            SpaceKind::UnitInterval => {
                let a = self.unit_rational(i);
                let b = self.unit_rational(j);
                Some((a - b).abs())
            }
            SpaceKind::Cantor => Some(cantor_distance(i, j)),
            SpaceKind::Product(sa, sb) => {
                let (ia, ib) = unpair(i);
                let (ja, jb) = unpair(j);
                let da = sa.exact_distance(ia, ja)?;
                let db = sb.exact_distance(ib, jb)?;
                Some(da.max(db))
            }
            SpaceKind::Custom { exact, .. } => exact.as_ref().and_then(|f| f(i, j)),
        }
    }

    /// Tag naming the space family; used for digests and structured fast
    /// paths.
    pub fn kind_name(&self) -> &'static str {
        match &self.0.kind {
            SpaceKind::UnitInterval => "unit_interval",
            SpaceKind::Cantor => "cantor",
            SpaceKind::Product(..) => "product",
            SpaceKind::Custom { .. } => "custom",
        }
    }

    /// Interval of width at most `2^-k` containing `d(s_i, s_j)`.
    pub fn distance(&self, i: u64, j: u64, k: Stage) -> RatInterval {
        if let Some(d) = self.exact_distance(i, j) {
            return RatInterval::point(d);
        }
        match &self.0.kind {
            SpaceKind::Product(sa, sb) => {
                let (ia, ib) = unpair(i);
                let (ja, jb) = unpair(j);
                sa.distance(ia, ja, k).max(&sb.distance(ib, jb, k))
            }
            SpaceKind::Custom { oracle, .. } => oracle(i, j, k),
            _ => unreachable!("built-in spaces have exact distances"),
        }
    }
}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            SpaceKind::UnitInterval => write!(f, "Space(unit_interval)"),
            SpaceKind::Cantor => write!(f, "Space(cantor)"),
            SpaceKind::Product(a, b) => write!(f, "Space(product({a:?}, {b:?}))"),
            SpaceKind::Custom { .. } => write!(f, "Space(custom)"),
        }
    }
}

// ---------------------------------------------------------------------------
// Ideal balls
// ---------------------------------------------------------------------------

/// Open ball with ideal center and positive rational radius.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealBall {
    pub center: u64,
    pub radius: Rational,
}

impl IdealBall {
    pub fn new(center: u64, radius: Rational) -> Self {
        assert!(radius.is_positive(), "ideal ball radius must be positive");
        IdealBall { center, radius }
    }
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

enum PointRepr {
    /// Finite prefix; the final index repeats forever.
    Tail(Vec<u64>),
    Stream(Box<dyn Fn(Stage) -> u64 + Send + Sync>),
}

/// A point as a fast Cauchy stream of ideal-point indices.
#[derive(Clone)]
pub struct Point(Arc<PointRepr>);

impl Point {
    /// The constant stream at one ideal point.
    pub fn constant(i: u64) -> Point {
        Point(Arc::new(PointRepr::Tail(vec![i])))
    }

    /// Finite prefix, eventually constant at its last entry. The prefix must
    /// be nonempty.
    pub fn from_prefix(prefix: Vec<u64>) -> Point {
        assert!(!prefix.is_empty(), "point prefix must be nonempty");
        Point(Arc::new(PointRepr::Tail(prefix)))
    }

    pub fn from_fn<F>(f: F) -> Point
    where
        F: Fn(Stage) -> u64 + Send + Sync + 'static,
    {
        Point(Arc::new(PointRepr::Stream(Box::new(f))))
    }

    pub fn index_at(&self, stage: Stage) -> u64 {
        match &*self.0 {
            PointRepr::Tail(prefix) => prefix[(stage as usize).min(prefix.len() - 1)],
            PointRepr::Stream(f) => f(stage),
        }
    }

    /// The limit ideal point, for descriptors known to be eventually
    /// constant: such a point equals the ideal point it settles on.
    pub fn final_index(&self) -> Option<u64> {
        match &*self.0 {
            PointRepr::Tail(prefix) => Some(*prefix.last().unwrap()),
            PointRepr::Stream(_) => None,
        }
    }

    /// True when the stream is known to be constant from `stage` on, which
    /// lets consumers skip Cauchy checks on the tail.
    fn constant_from(&self, stage: Stage) -> bool {
        match &*self.0 {
            PointRepr::Tail(prefix) => stage as usize >= prefix.len() - 1,
            PointRepr::Stream(_) => false,
        }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Point[{}, {}, {}, ...]",
            self.index_at(0),
            self.index_at(1),
            self.index_at(2)
        )
    }
}

/// Checks the fast Cauchy contract on the consumed prefix `0..=upto`.
/// Errors only on a proof of violation.
fn check_fast_prefix(x: &Point, space: &Space, upto: Stage) -> Result<(), CmsError> {
    for n in 0..upto {
        if x.constant_from(n) {
            return Ok(());
        }
        let i = x.index_at(n);
        let j = x.index_at(n + 1);
        if i == j {
            continue;
        }
        let enc = space.distance(i, j, n + 3);
        if enc.lo() >= &pow2_neg(n) {
            return Err(CmsError::FastCauchyViolation { stage: n });
        }
    }
    Ok(())
}

/// Interval of width at most `2^-k` containing `d(x, y)`. Enclosures are
/// intersected across precisions, so they are nested in `k`.
pub fn point_distance(
    x: &Point,
    y: &Point,
    space: &Space,
    k: Stage,
) -> Result<RatInterval, CmsError> {
    let mut current: Option<RatInterval> = None;
    for j in 0..=k {
        let raw = raw_point_distance(x, y, space, j)?;
        current = Some(match current {
            None => raw,
            Some(prev) => prev
                .intersect(&raw)
                .ok_or(CmsError::FastCauchyViolation { stage: j })?,
        });
    }
    Ok(current.unwrap())
}

fn raw_point_distance(
    x: &Point,
    y: &Point,
    space: &Space,
    k: Stage,
) -> Result<RatInterval, CmsError> {
    // Stage-(k+4) approximants leave a tail of at most 2^-(k+3) per point
    // (zero for a stream already constant there); with an oracle call at
    // precision k+2 the total width is within 2^-k.
    let m = k + 4;
    check_fast_prefix(x, space, m)?;
    check_fast_prefix(y, space, m)?;
    let i = x.index_at(m);
    let j = y.index_at(m);
    let core = space.distance(i, j, k + 2);
    let mut slack = Rational::zero();
    for p in [x, y] {
        if !p.constant_from(m) {
            slack += pow2_neg(m - 1);
        }
    }
    let lo = (core.lo() - &slack).max(Rational::zero());
    let hi = core.hi() + &slack;
    Ok(RatInterval::new(lo, hi).unwrap())
}

/// Staged membership verdict of a point in an ideal ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Inside,
    Outside,
    Unknown,
}

/// `Inside` once the stage enclosure proves `d(x, center) < radius`,
/// `Outside` once it proves `d(x, center) > radius` (outside the closed
/// ball). Verdicts are stable because enclosures are nested. A provably
/// malformed stream never resolves.
pub fn in_ball_at_stage(x: &Point, ball: &IdealBall, space: &Space, stage: Stage) -> Verdict {
    let center = Point::constant(ball.center);
    match point_distance(x, &center, space, stage) {
        Ok(enc) => {
            if enc.hi() < &ball.radius {
                Verdict::Inside
            } else if enc.lo() > &ball.radius {
                Verdict::Outside
            } else {
                Verdict::Unknown
            }
        }
        Err(_) => Verdict::Unknown,
    }
}

// ---------------------------------------------------------------------------
// R.e. open sets
// ---------------------------------------------------------------------------

enum OpenRepr {
    Finite(Vec<IdealBall>),
    Stream(Box<dyn Fn(Stage) -> Option<IdealBall> + Send + Sync>),
    /// Interleaved enumerations: even stages from the left set, odd from the
    /// right.
    Union(ROpenSet, ROpenSet),
    /// Refined enumeration of a finite intersection; see
    /// [`ROpenSet::intersection_all`].
    Intersect {
        sets: Vec<ROpenSet>,
        space: Space,
    },
}

/// A recursively enumerable open set: a deterministic stage-indexed
/// enumeration of ideal balls whose union is the represented set.
#[derive(Clone)]
pub struct ROpenSet(Arc<OpenRepr>);

impl ROpenSet {
    pub fn empty() -> ROpenSet {
        ROpenSet(Arc::new(OpenRepr::Finite(Vec::new())))
    }

    pub fn from_balls(balls: Vec<IdealBall>) -> ROpenSet {
        ROpenSet(Arc::new(OpenRepr::Finite(balls)))
    }

    pub fn from_fn<F>(f: F) -> ROpenSet
    where
        F: Fn(Stage) -> Option<IdealBall> + Send + Sync + 'static,
    {
        ROpenSet(Arc::new(OpenRepr::Stream(Box::new(f))))
    }

    /// Union by interleaving the two enumerations.
    pub fn union(u: &ROpenSet, v: &ROpenSet) -> ROpenSet {
        ROpenSet(Arc::new(OpenRepr::Union(u.clone(), v.clone())))
    }

    /// Binary intersection; see [`ROpenSet::intersection_all`].
    pub fn intersection(u: &ROpenSet, v: &ROpenSet, space: &Space) -> ROpenSet {
        ROpenSet::intersection_all(vec![u.clone(), v.clone()], space)
    }

    /// Finite intersection, enumerated as certified sub-balls: a candidate
    /// `B(s, q)` is emitted when `hi(d(s, c_i)) + q < r_i` holds against one
    /// enumerated ball of every factor. Candidates are dovetailed over ball
    /// tuples, centers, radii, and oracle precisions, with a fast lane of
    /// candidates centered on the factors' own ball centers.
    pub fn intersection_all(sets: Vec<ROpenSet>, space: &Space) -> ROpenSet {
        if sets.is_empty() {
            panic!("intersection of no sets is the whole space; not representable");
        }
        if sets.len() == 1 {
            return sets.into_iter().next().unwrap();
        }
        ROpenSet(Arc::new(OpenRepr::Intersect {
            sets,
            space: space.clone(),
        }))
    }

    /// The ball enumerated at `stage`, if any.
    pub fn ball_at(&self, stage: Stage) -> Option<IdealBall> {
        match &*self.0 {
            OpenRepr::Finite(balls) => balls.get(stage as usize).cloned(),
            OpenRepr::Stream(f) => f(stage),
            OpenRepr::Union(u, v) => {
                if stage % 2 == 0 {
                    u.ball_at(stage / 2)
                } else {
                    v.ball_at(stage / 2)
                }
            }
            OpenRepr::Intersect { sets, space } => intersect_ball_at(sets, space, stage),
        }
    }

    /// True once membership of `x` is proven at `stage`. Unions and finite
    /// intersections are semidecided structurally (some factor / every
    /// factor), which proves membership as soon as the factors resolve;
    /// enumeration-backed sets scan their balls.
    pub fn contains_proven(&self, x: &Point, space: &Space, stage: Stage) -> bool {
        match &*self.0 {
            OpenRepr::Union(u, v) => {
                u.contains_proven(x, space, stage) || v.contains_proven(x, space, stage)
            }
            OpenRepr::Intersect { sets, space: sp } => sets
                .iter()
                .all(|s| s.contains_proven(x, sp, stage)),
            _ => (0..=stage).any(|n| match self.ball_at(n) {
                Some(ball) => in_ball_at_stage(x, &ball, space, stage) == Verdict::Inside,
                None => false,
            }),
        }
    }

    /// All balls enumerated through `stage`.
    pub fn balls_through(&self, stage: Stage) -> Vec<IdealBall> {
        (0..=stage).filter_map(|n| self.ball_at(n)).collect()
    }
}

impl fmt::Debug for ROpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<_> = self.balls_through(3).into_iter().take(4).collect();
        write!(f, "ROpenSet(head: {head:?})")
    }
}

fn intersect_ball_at(sets: &[ROpenSet], space: &Space, stage: Stage) -> Option<IdealBall> {
    let n = stage as u64;
    let (tcode, center_code, p) = unpair3(n / 2);
    let mut idxs = Vec::with_capacity(sets.len());
    let mut rest = tcode;
    for _ in 0..sets.len() - 1 {
        let (a, r) = unpair(rest);
        idxs.push(a);
        rest = r;
    }
    idxs.push(rest);
    let balls: Vec<IdealBall> = sets
        .iter()
        .zip(&idxs)
        .map(|(s, &i)| s.ball_at(i as Stage))
        .collect::<Option<Vec<_>>>()?;
    // Even stages: candidate centered on one of the tuple's own ball
    // centers. Odd stages: candidate centered on any ideal point. The
    // radius is not enumerated; it is computed as half the worst certified
    // slack at the dovetailed precision, so a candidate center strictly
    // interior to the intersection always yields a ball.
    let center = if n % 2 == 0 {
        balls[(center_code as usize) % balls.len()].center
    } else {
        center_code
    };
    let precision = p as Stage + 2;
    let mut slack: Option<Rational> = None;
    for b in &balls {
        let d_hi = space.distance(center, b.center, precision).hi().clone();
        let s = &b.radius - &d_hi;
        slack = Some(match slack {
            None => s,
            Some(cur) => cur.min(s),
        });
    }
    let slack = slack?;
    if !slack.is_positive() {
        return None;
    }
    let radius = slack / Rational::from_integer(BigInt::from(2));
    for b in &balls {
        let d_hi = space.distance(center, b.center, precision).hi().clone();
        if d_hi + &radius >= b.radius {
            return None;
        }
    }
    Some(IdealBall::new(center, radius))
}
