//! JSON document formats: spaces, points, measures, open sets, lsc
//! functions, tests, and binary representations.
//!
//! Rationals are serialized as canonical `"p/q"` strings, never floats.
//! Documents build into core values with full validation; building is
//! deterministic, so identical documents always produce identical
//! behavior.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::binaryrep::{BinaryRep, CertifiedRadius, RepError};
use crate::cms::{IdealBall, Point, ROpenSet, Space};
use crate::lsc::{BasicFn, HatFn, LevelFamily, LscFunction, StepFn};
use crate::measures::{IdealMeasure, MeasureDescriptor, MeasureError};
use crate::numeric::{format_rational, parse_rational, RatInterval, Rational};
use crate::randomness::{IntegralTest, MlCertificate, MlTest, TestError};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum DocError {
    Parse(String),
    Invalid(String),
    Measure(MeasureError),
    Test(TestError),
    Rep(RepError),
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocError::Parse(s) => write!(f, "document parse error: {s}"),
            DocError::Invalid(s) => write!(f, "invalid document: {s}"),
            DocError::Measure(e) => write!(f, "measure document: {e}"),
            DocError::Test(e) => write!(f, "test document: {e}"),
            DocError::Rep(e) => write!(f, "representation document: {e}"),
        }
    }
}

impl std::error::Error for DocError {}

impl From<MeasureError> for DocError {
    fn from(e: MeasureError) -> Self {
        DocError::Measure(e)
    }
}

impl From<TestError> for DocError {
    fn from(e: TestError) -> Self {
        DocError::Test(e)
    }
}

impl From<RepError> for DocError {
    fn from(e: RepError) -> Self {
        DocError::Rep(e)
    }
}

fn rational(s: &str) -> Result<Rational, DocError> {
    parse_rational(s).map_err(|e| DocError::Parse(e.to_string()))
}

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub space: SpaceKindDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceKindDoc {
    Name(String),
    Product { product: Vec<SpaceKindDoc> },
}

impl SpaceDoc {
    pub fn build(&self) -> Result<Space, DocError> {
        build_space(&self.space)
    }
}

fn build_space(kind: &SpaceKindDoc) -> Result<Space, DocError> {
    match kind {
        SpaceKindDoc::Name(name) => match name.as_str() {
            "unit_interval" => Ok(Space::unit_interval()),
            "cantor" => Ok(Space::cantor()),
            other => Err(DocError::Invalid(format!("unknown space {other:?}"))),
        },
        SpaceKindDoc::Product { product } => {
            if product.len() != 2 {
                return Err(DocError::Invalid(
                    "product space needs exactly two factors".into(),
                ));
            }
            Ok(Space::product(
                build_space(&product[0])?,
                build_space(&product[1])?,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A point as a finite index prefix that is eventually constant, or one of
/// the convenience forms for the built-in spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointDoc {
    Stream {
        ideal_stream: Vec<u64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        constant_from: Option<u32>,
    },
    UnitRational { unit_rational: String },
    CantorWord { cantor_word: String },
}

impl PointDoc {
    pub fn build(&self, space: &Space) -> Result<Point, DocError> {
        match self {
            PointDoc::Stream {
                ideal_stream,
                constant_from,
            } => {
                if ideal_stream.is_empty() {
                    return Err(DocError::Invalid("empty ideal stream".into()));
                }
                if let Some(c) = constant_from {
                    if *c as usize >= ideal_stream.len() {
                        return Err(DocError::Invalid(
                            "constant_from points past the stream prefix".into(),
                        ));
                    }
                    return Ok(Point::from_prefix(
                        ideal_stream[..=*c as usize].to_vec(),
                    ));
                }
                Ok(Point::from_prefix(ideal_stream.clone()))
            }
            PointDoc::UnitRational { unit_rational } => {
                if space.kind_name() != "unit_interval" {
                    return Err(DocError::Invalid(
                        "unit_rational point on a non-interval space".into(),
                    ));
                }
                let q = rational(unit_rational)?;
                if q < Rational::from_integer(0.into())
                    || q > Rational::from_integer(1.into())
                {
                    return Err(DocError::Invalid(format!("{unit_rational} outside [0, 1]")));
                }
                Ok(Point::constant(space.unit_index_of(&q)))
            }
            PointDoc::CantorWord { cantor_word } => {
                if space.kind_name() != "cantor" {
                    return Err(DocError::Invalid(
                        "cantor_word point on a non-Cantor space".into(),
                    ));
                }
                let bits = parse_word(cantor_word)?;
                Ok(Point::constant(crate::cms::cantor_index_padded(&bits)))
            }
        }
    }
}

pub fn parse_word(s: &str) -> Result<Vec<bool>, DocError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(DocError::Parse(format!("bad word symbol {other:?}"))),
        })
        .collect()
}

pub fn format_word(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomDoc {
    pub point: u64,
    pub weight: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureDoc {
    Ideal { atoms: Vec<AtomDoc> },
    Builtin { builtin: BuiltinMeasureDoc },
    Stages { stages: Vec<Vec<AtomDoc>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BuiltinMeasureDoc {
    Name(String),
    Bernoulli { bernoulli: String },
    Dirac { dirac: u64 },
    ConvexCombo { convex_combo: Vec<WeightedMeasureDoc> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedMeasureDoc {
    pub weight: String,
    pub measure: MeasureDoc,
}

fn build_ideal(atoms: &[AtomDoc]) -> Result<IdealMeasure, DocError> {
    let atoms = atoms
        .iter()
        .map(|a| Ok((a.point, rational(&a.weight)?)))
        .collect::<Result<Vec<_>, DocError>>()?;
    Ok(IdealMeasure::new(atoms)?)
}

impl MeasureDoc {
    pub fn build(&self) -> Result<MeasureDescriptor, DocError> {
        match self {
            MeasureDoc::Ideal { atoms } => {
                let m = build_ideal(atoms)?;
                Ok(MeasureDescriptor::from_stages(vec![m])?)
            }
            MeasureDoc::Builtin { builtin } => builtin.build(),
            MeasureDoc::Stages { stages } => {
                let stages = stages
                    .iter()
                    .map(|a| build_ideal(a))
                    .collect::<Result<Vec<_>, DocError>>()?;
                Ok(MeasureDescriptor::from_stages(stages)?)
            }
        }
    }

    /// The ideal measure named by the document when it is a single-stage
    /// one, for the exact distance commands.
    pub fn build_ideal_only(&self) -> Result<IdealMeasure, DocError> {
        match self {
            MeasureDoc::Ideal { atoms } => build_ideal(atoms),
            MeasureDoc::Stages { stages } if stages.len() == 1 => build_ideal(&stages[0]),
            _ => Err(DocError::Invalid(
                "expected a finite ideal measure (an atoms document)".into(),
            )),
        }
    }
}

impl BuiltinMeasureDoc {
    fn build(&self) -> Result<MeasureDescriptor, DocError> {
        match self {
            BuiltinMeasureDoc::Name(name) => match name.as_str() {
                "lebesgue_unit" => Ok(MeasureDescriptor::lebesgue_unit()),
                other => Err(DocError::Invalid(format!("unknown builtin measure {other:?}"))),
            },
            BuiltinMeasureDoc::Bernoulli { bernoulli } => {
                Ok(MeasureDescriptor::bernoulli(rational(bernoulli)?)?)
            }
            BuiltinMeasureDoc::Dirac { dirac } => Ok(MeasureDescriptor::dirac(*dirac)),
            BuiltinMeasureDoc::ConvexCombo { convex_combo } => {
                let parts = convex_combo
                    .iter()
                    .map(|w| Ok((rational(&w.weight)?, w.measure.build()?)))
                    .collect::<Result<Vec<_>, DocError>>()?;
                Ok(MeasureDescriptor::convex_combo(parts)?)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Open sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallDoc {
    pub center: u64,
    pub radius: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenSetDoc {
    pub balls: Vec<BallDoc>,
}

impl OpenSetDoc {
    pub fn build(&self) -> Result<ROpenSet, DocError> {
        Ok(ROpenSet::from_balls(self.build_balls()?))
    }

    pub fn build_balls(&self) -> Result<Vec<IdealBall>, DocError> {
        self.balls
            .iter()
            .map(|b| {
                let r = rational(&b.radius)?;
                if r <= Rational::from_integer(0.into()) {
                    return Err(DocError::Invalid("ball radius must be positive".into()));
                }
                Ok(IdealBall::new(b.center, r))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Lsc functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasicFnDoc {
    Step { step: StepDoc },
    Hat { hat: HatDoc },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDoc {
    pub center: u64,
    pub radius: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HatDoc {
    pub center: u64,
    pub value: String,
    pub inner_radius: String,
    pub slope_width: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LscDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basics: Vec<BasicFnDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combine: Option<CombineDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CombineDoc {
    Sup(String),
    WeightedSum { weighted_sum: Vec<WeightedLscDoc> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedLscDoc {
    pub weight: String,
    pub f: LscDoc,
}

impl LscDoc {
    pub fn build(&self) -> Result<LscFunction, DocError> {
        match &self.combine {
            None => self.build_basics(),
            Some(CombineDoc::Sup(tag)) => {
                if tag != "sup" {
                    return Err(DocError::Invalid(format!("unknown combine tag {tag:?}")));
                }
                self.build_basics()
            }
            Some(CombineDoc::WeightedSum { weighted_sum }) => {
                if !self.basics.is_empty() {
                    return Err(DocError::Invalid(
                        "a weighted_sum document must not also list basics".into(),
                    ));
                }
                let pairs = weighted_sum
                    .iter()
                    .map(|w| Ok((rational(&w.weight)?, w.f.build()?)))
                    .collect::<Result<Vec<_>, DocError>>()?;
                if pairs.iter().any(|(w, _)| w <= &Rational::from_integer(0.into())) {
                    return Err(DocError::Invalid("weights must be positive".into()));
                }
                Ok(LscFunction::weighted_sum(pairs))
            }
        }
    }

    fn build_basics(&self) -> Result<LscFunction, DocError> {
        let basics = self
            .basics
            .iter()
            .map(|b| b.build())
            .collect::<Result<Vec<_>, DocError>>()?;
        Ok(LscFunction::from_basics(basics))
    }
}

impl BasicFnDoc {
    fn build(&self) -> Result<BasicFn, DocError> {
        match self {
            BasicFnDoc::Step { step } => {
                let radius = rational(&step.radius)?;
                let value = rational(&step.value)?;
                if radius <= Rational::from_integer(0.into())
                    || value <= Rational::from_integer(0.into())
                {
                    return Err(DocError::Invalid(
                        "step radius and value must be positive".into(),
                    ));
                }
                Ok(BasicFn::Step(StepFn::new(
                    IdealBall::new(step.center, radius),
                    value,
                )))
            }
            BasicFnDoc::Hat { hat } => {
                let value = rational(&hat.value)?;
                let inner = rational(&hat.inner_radius)?;
                let slope = rational(&hat.slope_width)?;
                if value <= Rational::from_integer(0.into())
                    || slope <= Rational::from_integer(0.into())
                    || inner < Rational::from_integer(0.into())
                {
                    return Err(DocError::Invalid("hat parameters out of range".into()));
                }
                Ok(BasicFn::Hat(HatFn::new(hat.center, value, inner, slope)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TestDoc {
    #[serde(rename = "ml")]
    Ml {
        levels: Vec<OpenSetDoc>,
        certificate: String,
    },
    #[serde(rename = "integral")]
    Integral { f: LscDoc, certificate: String },
}

pub enum BuiltTest {
    Ml(MlTest),
    Integral(IntegralTest),
}

impl TestDoc {
    pub fn build(&self, space: &Space, measure: &MeasureDescriptor) -> Result<BuiltTest, DocError> {
        match self {
            TestDoc::Ml { levels, certificate } => {
                let cert = match certificate.as_str() {
                    "cylinder_exact" => MlCertificate::CylinderExact,
                    "asserted" => MlCertificate::Asserted,
                    other => {
                        return Err(DocError::Invalid(format!(
                            "unknown ml certificate {other:?}"
                        )))
                    }
                };
                let sets = levels
                    .iter()
                    .map(|l| l.build())
                    .collect::<Result<Vec<_>, DocError>>()?;
                Ok(BuiltTest::Ml(MlTest::new(
                    LevelFamily::finite(sets),
                    space.clone(),
                    measure.clone(),
                    cert,
                )?))
            }
            TestDoc::Integral { f, certificate } => {
                if certificate != "asserted" {
                    return Err(DocError::Invalid(
                        "integral test documents can only be asserted; machine \
                         certificates come from constructions"
                            .into(),
                    ));
                }
                Ok(BuiltTest::Integral(IntegralTest::user_asserted(
                    f.build()?,
                    space.clone(),
                    measure.clone(),
                )))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Binary representations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepDoc {
    pub space: SpaceKindDoc,
    pub measure: MeasureDoc,
    /// "auto" picks the construction path; explicit radii pin every ball.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<RadiusDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor_digest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusDoc {
    pub stages: Vec<[String; 2]>,
}

impl RepDoc {
    pub fn build(&self, budget: u32) -> Result<BinaryRep, DocError> {
        let space = build_space(&self.space)?;
        let measure = self.measure.build()?;
        if let Some(expected_hex) = &self.descriptor_digest {
            let expected = u64::from_str_radix(expected_hex, 16)
                .map_err(|_| DocError::Parse(format!("bad digest {expected_hex:?}")))?;
            let got = measure.digest();
            if expected != got {
                return Err(DocError::Rep(RepError::DescriptorMismatch {
                    expected,
                    got,
                }));
            }
        }
        match &self.radii {
            None => Ok(BinaryRep::construct(&space, &measure, budget)),
            Some(radii) => {
                let radii = radii
                    .iter()
                    .map(|r| {
                        let stages = r
                            .stages
                            .iter()
                            .map(|[lo, hi]| {
                                let lo = rational(lo)?;
                                let hi = rational(hi)?;
                                RatInterval::new(lo, hi)
                                    .map_err(|e| DocError::Parse(e.to_string()))
                            })
                            .collect::<Result<Vec<_>, DocError>>()?;
                        if stages.is_empty() {
                            return Err(DocError::Invalid(
                                "radius document needs at least one stage".into(),
                            ));
                        }
                        Ok(CertifiedRadius::new(stages))
                    })
                    .collect::<Result<Vec<_>, DocError>>()?;
                Ok(BinaryRep::with_explicit_radii(&space, &measure, radii))
            }
        }
    }
}

/// Canonical rendering helpers for output documents.
pub fn rational_string(q: &Rational) -> String {
    format_rational(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn space_docs_roundtrip() {
        for text in [
            r#"{"space": "unit_interval"}"#,
            r#"{"space": "cantor"}"#,
            r#"{"space": {"product": ["unit_interval", "cantor"]}}"#,
        ] {
            let doc: SpaceDoc = serde_json::from_str(text).unwrap();
            doc.build().unwrap();
        }
    }

    #[test]
    fn point_docs() {
        let s = Space::unit_interval();
        let doc: PointDoc =
            serde_json::from_str(r#"{"ideal_stream": [4, 4, 4], "constant_from": 0}"#).unwrap();
        let p = doc.build(&s).unwrap();
        assert_eq!(p.index_at(7), 4);
        let doc: PointDoc = serde_json::from_str(r#"{"unit_rational": "1/3"}"#).unwrap();
        let p = doc.build(&s).unwrap();
        assert_eq!(s.unit_rational(p.index_at(0)), rat(1, 3));
        let c = Space::cantor();
        let doc: PointDoc = serde_json::from_str(r#"{"cantor_word": "0110"}"#).unwrap();
        doc.build(&c).unwrap();
    }

    #[test]
    fn measure_docs() {
        let doc: MeasureDoc = serde_json::from_str(
            r#"{"atoms": [{"point": 0, "weight": "1/2"}, {"point": 2, "weight": "1/2"}]}"#,
        )
        .unwrap();
        let m = doc.build_ideal_only().unwrap();
        assert_eq!(m.support_size(), 2);
        let doc: MeasureDoc = serde_json::from_str(r#"{"builtin": "lebesgue_unit"}"#).unwrap();
        doc.build().unwrap();
        let doc: MeasureDoc =
            serde_json::from_str(r#"{"builtin": {"bernoulli": "1/3"}}"#).unwrap();
        doc.build().unwrap();
        let bad: MeasureDoc = serde_json::from_str(
            r#"{"atoms": [{"point": 0, "weight": "1/3"}]}"#,
        )
        .unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn lsc_docs() {
        let doc: LscDoc = serde_json::from_str(
            r#"{"basics": [
                {"step": {"center": 0, "radius": "1/2", "value": "2/1"}},
                {"hat": {"center": 4, "value": "1/1", "inner_radius": "1/4", "slope_width": "1/8"}}
            ], "combine": "sup"}"#,
        )
        .unwrap();
        doc.build().unwrap();
        let doc: LscDoc = serde_json::from_str(
            r#"{"combine": {"weighted_sum": [
                {"weight": "1/2", "f": {"basics": [{"step": {"center": 0, "radius": "1/1", "value": "1/1"}}]}}
            ]}}"#,
        )
        .unwrap();
        doc.build().unwrap();
    }

    #[test]
    fn test_docs() {
        let space = Space::cantor();
        let mu = MeasureDescriptor::bernoulli(rat(1, 2)).unwrap();
        let doc: TestDoc = serde_json::from_str(
            r#"{"kind": "ml", "levels": [
                {"balls": [{"center": 0, "radius": "2/1"}]},
                {"balls": [{"center": 0, "radius": "1/2"}]}
            ], "certificate": "cylinder_exact"}"#,
        )
        .unwrap();
        assert!(matches!(doc.build(&space, &mu), Ok(BuiltTest::Ml(_))));
        let doc: TestDoc = serde_json::from_str(
            r#"{"kind": "integral", "f": {"basics": []}, "certificate": "asserted"}"#,
        )
        .unwrap();
        assert!(matches!(doc.build(&space, &mu), Ok(BuiltTest::Integral(_))));
    }

    #[test]
    fn rep_doc_digest_checked() {
        let text = format!(
            r#"{{"space": "unit_interval", "measure": {{"builtin": "lebesgue_unit"}}, "descriptor_digest": "{:x}"}}"#,
            MeasureDescriptor::lebesgue_unit().digest()
        );
        let doc: RepDoc = serde_json::from_str(&text).unwrap();
        doc.build(1 << 16).unwrap();
        let bad = r#"{"space": "unit_interval", "measure": {"builtin": "lebesgue_unit"}, "descriptor_digest": "deadbeef"}"#;
        let doc: RepDoc = serde_json::from_str(bad).unwrap();
        assert!(doc.build(1 << 16).is_err());
    }
}
