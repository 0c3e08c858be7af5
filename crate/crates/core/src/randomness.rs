//! Randomness tests and their converters.
//!
//! An integral test is a lower semicontinuous function with integral at
//! most 1 against the bound measure; a Martin-Löf test is a level family of
//! r.e. open sets with measure bounds `mu(U_n) <= 2^-n`. The two forms
//! convert into each other: superlevel sets at thresholds `2^n` one way
//! (Markov's inequality supplies the bounds) and the staged level-count
//! supremum the other way (the layer-cake sum certifies the integral).
//!
//! Whether a function really integrates to at most 1 is not decidable, so
//! tests carry certificates. Machine-made certificates record the
//! construction that guarantees the bound; user-asserted tests are
//! monitored, and a staged integral lower bound exceeding 1 is a hard
//! error naming the bad certificate.

use std::fmt;

use num_traits::{One, Signed};

use crate::binaryrep::BinaryRep;
use crate::cms::{unpair, IdealBall, Point, ROpenSet, Space};
use crate::lsc::{cantor_cylinder_len, eval_lower, superlevel, LevelFamily, LscFunction};
use crate::measures::{integrate_lower, valuation_lower_union, MeasureDescriptor};
use crate::numeric::{pow2, pow2_neg, Rational, Stage};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestError {
    /// The operation needs a test with certified measure bounds.
    UncertifiedBounds,
    /// A staged lower bound crossed a certified ceiling: the certificate
    /// is wrong.
    CertificateViolation { stage: Stage, bound: String },
    /// Tests combined across different bound measures.
    MeasureMismatch,
    /// A search ran out of budget; restartable.
    BudgetExhausted { what: String },
}

impl fmt::Display for TestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestError::UncertifiedBounds => write!(f, "test lacks a certificate"),
            TestError::CertificateViolation { stage, bound } => {
                write!(f, "certificate violated at stage {stage}: {bound}")
            }
            TestError::MeasureMismatch => write!(f, "tests bound to different measures"),
            TestError::BudgetExhausted { what } => write!(f, "budget exhausted: {what}"),
        }
    }
}

impl std::error::Error for TestError {}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Why the integral bound (or the level bounds) should hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// Guaranteed by the construction that produced the test; the tag
    /// names the construction.
    ByConstruction(&'static str),
    /// Claimed by the user; monitored.
    UserAsserted,
}

// ---------------------------------------------------------------------------
// Integral tests
// ---------------------------------------------------------------------------

/// A randomness test in integral form: lower semicontinuous `t >= 0` with
/// `integral t dmu <= 1`, bound to one measure descriptor.
#[derive(Clone, Debug)]
pub struct IntegralTest {
    f: LscFunction,
    space: Space,
    measure: MeasureDescriptor,
    certificate: Certificate,
}

impl IntegralTest {
    pub fn by_construction(
        f: LscFunction,
        space: Space,
        measure: MeasureDescriptor,
        construction: &'static str,
    ) -> Self {
        IntegralTest {
            f,
            space,
            measure,
            certificate: Certificate::ByConstruction(construction),
        }
    }

    pub fn user_asserted(f: LscFunction, space: Space, measure: MeasureDescriptor) -> Self {
        IntegralTest {
            f,
            space,
            measure,
            certificate: Certificate::UserAsserted,
        }
    }

    pub fn f(&self) -> &LscFunction {
        &self.f
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn measure(&self) -> &MeasureDescriptor {
        &self.measure
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Staged lower bound on the integral, with the ceiling monitored: a
    /// value above 1 exposes a bad certificate and is a hard error.
    pub fn integral_lower_monitored(&self, stage: Stage) -> Result<Rational, TestError> {
        let value = integrate_lower(&self.measure, &self.f, &self.space, stage);
        if value > Rational::one() {
            return Err(TestError::CertificateViolation {
                stage,
                bound: format!(
                    "integral lower bound {value} exceeds 1 under {:?}",
                    self.certificate
                ),
            });
        }
        Ok(value)
    }
}

// ---------------------------------------------------------------------------
// Martin-Löf tests
// ---------------------------------------------------------------------------

/// How the level measure bounds `mu(U_n) <= 2^-n` are certified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MlCertificate {
    /// Levels are finite cylinder unions on the Cantor space and the bound
    /// is checked exactly against the Bernoulli measure.
    CylinderExact,
    /// Produced by a construction that guarantees the bounds.
    ByConstruction(&'static str),
    /// Claimed by the user.
    Asserted,
}

/// A Martin-Löf test: levels `U_n` with `mu(U_n) <= 2^-n`.
#[derive(Clone)]
pub struct MlTest {
    levels: LevelFamily,
    space: Space,
    measure: MeasureDescriptor,
    certificate: MlCertificate,
}

impl fmt::Debug for MlTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MlTest({:?})", self.certificate)
    }
}

impl MlTest {
    pub fn new(
        levels: LevelFamily,
        space: Space,
        measure: MeasureDescriptor,
        certificate: MlCertificate,
    ) -> Result<Self, TestError> {
        let test = MlTest {
            levels,
            space,
            measure,
            certificate,
        };
        if test.certificate == MlCertificate::CylinderExact {
            test.verify_cylinder_bounds(10)?;
        }
        Ok(test)
    }

    pub fn levels(&self) -> &LevelFamily {
        &self.levels
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn measure(&self) -> &MeasureDescriptor {
        &self.measure
    }

    pub fn certificate(&self) -> &MlCertificate {
        &self.certificate
    }

    /// Exact check of `mu(U_n) <= 2^-n` for cylinder levels against a
    /// Bernoulli bound measure, on levels `0..=upto`.
    pub fn verify_cylinder_bounds(&self, upto: u32) -> Result<(), TestError> {
        let Some(p) = bernoulli_parameter(&self.measure) else {
            return Err(TestError::UncertifiedBounds);
        };
        for n in 0..=upto {
            let Some(level) = self.levels.level(n) else {
                break;
            };
            // Finite cylinder unions enumerate within a small window.
            let balls = level.balls_through(64);
            let mass = exact_cylinder_union_mass(&p, &balls);
            if mass > pow2_neg(n) {
                return Err(TestError::CertificateViolation {
                    stage: n,
                    bound: format!("level {n} has mass {mass} > 2^-{n}"),
                });
            }
        }
        Ok(())
    }
}

/// The Bernoulli parameter of a descriptor, when it is one.
fn bernoulli_parameter(mu: &MeasureDescriptor) -> Option<Rational> {
    // Stage 0 of a Bernoulli stream sits on the two one-symbol cylinders;
    // the weight of the word "1" is the parameter.
    if mu.repr_tag() != "bernoulli" {
        return None;
    }
    let stage0 = mu.ideal_at(0);
    let one_idx = crate::cms::cantor_index_padded(&[true]);
    stage0
        .atoms()
        .iter()
        .find(|(i, _)| *i == one_idx)
        .map(|(_, w)| w.clone())
}

/// Exact Bernoulli mass of a finite union of cylinder balls.
fn exact_cylinder_union_mass(p: &Rational, balls: &[IdealBall]) -> Rational {
    let mut cylinders: Vec<Vec<bool>> = balls
        .iter()
        .map(|b| {
            let len = cantor_cylinder_len(&b.radius) as usize;
            let w = crate::cms::cantor_word(b.center);
            (0..len).map(|i| w.get(i).copied().unwrap_or(false)).collect()
        })
        .collect();
    cylinders.sort_by_key(|c: &Vec<bool>| c.len());
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
    maximal
        .iter()
        .map(|v| {
            v.iter()
                .map(|&bit| if bit { p.clone() } else { q.clone() })
                .product::<Rational>()
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Converters
// ---------------------------------------------------------------------------

/// Martin-Löf form of an integral test: level n is the superlevel set at
/// threshold `2^n`, whose measure Markov bounds by `2^-n`.
pub fn integral_to_ml(t: &IntegralTest, budget: Stage) -> MlTest {
    let f = t.f.clone();
    let space = t.space.clone();
    let levels = LevelFamily::from_rule(move |n| {
        superlevel(&f, &pow2(n), &space, budget)
    });
    MlTest {
        levels,
        space: t.space.clone(),
        measure: t.measure.clone(),
        certificate: MlCertificate::ByConstruction("markov-superlevel"),
    }
}

/// Integral form of a Martin-Löf test: the staged count of leading levels
/// the point is proven to lie in. The layer-cake sum
/// `sum_n mu(levels 0..=n intersected) <= sum_n 2^-n <= 1` certifies the
/// integral bound.
pub fn ml_to_integral(u: &MlTest) -> Result<IntegralTest, TestError> {
    if u.certificate == MlCertificate::Asserted {
        return Err(TestError::UncertifiedBounds);
    }
    Ok(IntegralTest {
        f: LscFunction::level_sup(u.levels.clone()),
        space: u.space.clone(),
        measure: u.measure.clone(),
        certificate: Certificate::ByConstruction("level-count-sum"),
    })
}

/// The finite universal combinator: `sum_i 2^-(i+1) t_i`. Dominates every
/// input test with constant `2^-(i+1)`, and the weights certify the
/// integral bound with room to spare.
pub fn finite_universal(tests: &[IntegralTest]) -> Result<IntegralTest, TestError> {
    let Some(first) = tests.first() else {
        return Err(TestError::UncertifiedBounds);
    };
    let digest = first.measure.digest();
    if tests.iter().any(|t| t.measure.digest() != digest) {
        return Err(TestError::MeasureMismatch);
    }
    let pairs: Vec<(Rational, LscFunction)> = tests
        .iter()
        .enumerate()
        .map(|(i, t)| (pow2_neg(i as u32 + 1), t.f.clone()))
        .collect();
    Ok(IntegralTest {
        f: LscFunction::weighted_sum(pairs),
        space: first.space.clone(),
        measure: first.measure.clone(),
        certificate: Certificate::ByConstruction("weighted-universal"),
    })
}

// ---------------------------------------------------------------------------
// Deficiency
// ---------------------------------------------------------------------------

/// Finite-stage randomness evidence: a staged lower bound on the test value
/// at a point. Divergence over stages witnesses non-randomness; a bounded
/// sequence proves nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeficiencyReport {
    pub stage: Stage,
    pub lower_bound: Rational,
    /// Largest k with `lower_bound > 2^k`, the level of the effective null
    /// set filtration the point is proven inside.
    pub non_random_level: Option<u32>,
}

pub fn deficiency(x: &Point, t: &IntegralTest, stage: Stage) -> DeficiencyReport {
    let lower_bound = eval_lower(&t.f, x, &t.space, stage);
    let mut non_random_level = None;
    let mut k = 0u32;
    while lower_bound > pow2(k) {
        non_random_level = Some(k);
        k += 1;
        if k > 4096 {
            break;
        }
    }
    DeficiencyReport {
        stage,
        lower_bound,
        non_random_level,
    }
}

// ---------------------------------------------------------------------------
// Tests from full-measure open sets
// ---------------------------------------------------------------------------

/// Builds a Martin-Löf test covering the complement of a full-measure r.e.
/// open set: shrink the enumerated balls to strictly smaller rational
/// radii, find prefixes whose open union provably carries mass above
/// `1 - 2^-i`, and take the exteriors of the corresponding closed unions
/// as levels.
pub fn full_measure_open_to_ml(
    u: &ROpenSet,
    mu: &MeasureDescriptor,
    space: &Space,
    levels: u32,
    budget: Stage,
) -> Result<MlTest, TestError> {
    // Deterministic enumeration of strictly shrunken balls: every
    // enumerated ball paired with the radius factors 1 - 2^-(b+1), whose
    // union recovers the open ball.
    let shrunken = |m: u64| -> Option<IdealBall> {
        let (a, b) = unpair(m);
        let ball = u.ball_at(a as Stage)?;
        let q = &ball.radius * (Rational::one() - pow2_neg(b.min(64) as u32 + 1));
        q.is_positive().then(|| IdealBall::new(ball.center, q))
    };
    let mut cuts: Vec<Vec<IdealBall>> = Vec::new();
    for i in 0..=levels {
        let target = Rational::one() - pow2_neg(i);
        let mut found: Option<Vec<IdealBall>> = None;
        'search: for s in 1..=budget {
            let prefix: Vec<IdealBall> = (0..=(s as u64 * 4)).filter_map(shrunken).collect();
            if prefix.is_empty() {
                continue;
            }
            let mass = valuation_lower_union(mu, &prefix, space, s);
            if mass > target {
                found = Some(prefix);
                break 'search;
            }
        }
        match found {
            Some(prefix) => cuts.push(prefix),
            None => {
                return Err(TestError::BudgetExhausted {
                    what: format!("no ball prefix with provable mass above 1 - 2^-{i}"),
                })
            }
        }
    }
    let space_for_levels = space.clone();
    let level_sets: Vec<ROpenSet> = cuts
        .into_iter()
        .map(|balls| closed_union_exterior(&space_for_levels, balls))
        .collect();
    MlTest::new(
        LevelFamily::finite(level_sets),
        space.clone(),
        mu.clone(),
        MlCertificate::ByConstruction("full-measure-complement"),
    )
}

/// The r.e. open exterior of a finite union of closed balls: candidate
/// balls around every ideal point, radius half the worst certified
/// separation.
fn closed_union_exterior(space: &Space, balls: Vec<IdealBall>) -> ROpenSet {
    let space = space.clone();
    ROpenSet::from_fn(move |stage| {
        let (t, p) = unpair(stage as u64);
        let mut slack: Option<Rational> = None;
        for b in &balls {
            let enc = space.distance(t, b.center, p as Stage + 2);
            let s = enc.lo() - &b.radius;
            slack = Some(match slack {
                None => s,
                Some(cur) => cur.min(s),
            });
        }
        let slack = slack?;
        if !slack.is_positive() {
            return None;
        }
        Some(IdealBall::new(
            t,
            slack / Rational::from_integer(2.into()),
        ))
    })
}

// ---------------------------------------------------------------------------
// Transport along binary representations
// ---------------------------------------------------------------------------

/// Pulls a Cantor-space test back along the encoder of a binary
/// representation: the transported test evaluates the inner function on
/// the staged partial expansion. Measure preservation carries the integral
/// bound.
pub fn transport_test(
    rep: &BinaryRep,
    cantor_test: &IntegralTest,
    _budget: Stage,
) -> Result<IntegralTest, TestError> {
    if cantor_test.space.kind_name() != "cantor" {
        return Err(TestError::MeasureMismatch);
    }
    Ok(IntegralTest {
        f: LscFunction::transported(rep.clone(), cantor_test.f.clone()),
        space: rep.space().clone(),
        measure: rep.measure().clone(),
        certificate: Certificate::ByConstruction("pushforward"),
    })
}
