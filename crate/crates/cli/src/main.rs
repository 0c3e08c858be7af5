//! Command-line front end: loads space/measure/test documents, runs staged
//! queries, and emits deterministic JSON results.
//!
//! Exit codes: 0 on success, 2 when a semidecidable query exhausted its
//! budget (partial staged results are still emitted), 1 on malformed
//! input, with a machine-readable error object naming the failed
//! precondition.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_traits::Signed;
use serde::Serialize;

use comprob::binaryrep::{self, BinaryRep, RepError};
use comprob::cms::{point_distance, Point, ROpenSet, Space};
use comprob::doc::{
    format_word, parse_word, BuiltTest, LscDoc, MeasureDoc, PointDoc, SpaceDoc, TestDoc,
};
use comprob::lsc::LscFunction;
use comprob::measures::{
    check_equivalence_bounds, integrate_lower, prokhorov_exact, valuation_lower,
    wasserstein_exact, MeasureDescriptor,
};
use comprob::numeric::{format_rational, Rational};
use comprob::randomness::{self, IntegralTest};

#[derive(Parser)]
#[command(
    name = "comprob",
    about = "Exact computable-probability queries: distances, valuations, integrals, \
             binary representations, and randomness tests",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Space document (path or inline JSON).
    #[arg(long)]
    space: String,
    /// Stage: the fuel for staged lower bounds and enclosures.
    #[arg(long, default_value_t = 16)]
    stage: u32,
    /// Budget for semidecidable searches.
    #[arg(long, default_value_t = 4096)]
    budget: u32,
    /// Add a decimal rendering next to exact rationals (informative only).
    #[arg(long)]
    approx: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Prokhorov/Wasserstein distance between ideal measures, or a
    /// staged distance enclosure between points.
    Dist {
        #[command(flatten)]
        common: CommonArgs,
        /// prokhorov | wasserstein | point
        #[arg(long)]
        kind: String,
        /// Left operand document.
        #[arg(long)]
        a: String,
        /// Right operand document.
        #[arg(long)]
        b: String,
    },
    /// Staged lower bound on the measure of a finite ball union.
    Val {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        /// Open-set document: {"balls": [...]}.
        #[arg(long)]
        set: String,
    },
    /// Staged lower bound on the integral of an lsc function.
    Integrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        /// Lsc function document.
        #[arg(long)]
        f: String,
    },
    /// Bits of the binary expansion of a point.
    Encode {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        point: String,
        /// Number of expansion bits requested.
        #[arg(long, default_value_t = 32)]
        bits: u64,
    },
    /// Point named by a binary expansion prefix.
    Decode {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        /// Expansion prefix as a 0/1 string.
        #[arg(long)]
        word: String,
        /// Requested output precision: the result is fast Cauchy to
        /// 2^-precision.
        #[arg(long, default_value_t = 8)]
        precision: u32,
    },
    /// Two-sided enclosure of a cell measure.
    Cellmeasure {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        /// Cell word as a 0/1 string.
        #[arg(long)]
        word: String,
    },
    /// Convert a test document between Martin-Löf and integral form.
    Testconv {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        test: String,
        /// to_ml | to_integral
        #[arg(long)]
        direction: String,
        /// Number of levels to materialize when producing ML form.
        #[arg(long, default_value_t = 4)]
        levels: u32,
    },
    /// Staged randomness deficiency of a point under a test.
    Deficiency {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        test: String,
        #[arg(long)]
        point: String,
    },
    /// Certified metric-equivalence inequalities for a measure pair.
    Checkbounds {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
}

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ErrorOut {
    error: String,
    precondition: String,
}

#[derive(Serialize)]
struct ValueOut {
    value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<String>,
}

#[derive(Serialize)]
struct LowerOut {
    lower: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<String>,
}

#[derive(Serialize)]
struct IntervalOut {
    lower: String,
    upper: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<[String; 2]>,
}

#[derive(Serialize)]
struct BitsOut {
    status: String,
    bits: String,
}

#[derive(Serialize)]
struct PointOut {
    ideal_stream: Vec<u64>,
    constant_from: u32,
}

#[derive(Serialize)]
struct DeficiencyOut {
    stage: u32,
    lower_bound: String,
    non_random_level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<String>,
}

#[derive(Serialize)]
struct CheckboundsOut {
    prokhorov: String,
    wasserstein: String,
    diameter_bound: String,
    lipschitz_ok: bool,
    prokhorov_checks: Vec<(String, bool)>,
    all_ok: bool,
}

#[derive(Serialize)]
struct MlLevelsOut {
    kind: String,
    certificate: String,
    levels: Vec<LevelOut>,
}

#[derive(Serialize)]
struct LevelOut {
    balls: Vec<BallOut>,
}

#[derive(Serialize)]
struct BallOut {
    center: u64,
    radius: String,
}

#[derive(Serialize)]
struct IntegralFormOut {
    kind: String,
    certificate: String,
    integral_lower: String,
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

enum CliError {
    Input(String, String),
    Budget(String),
}

type CliResult = Result<String, CliError>;

fn input_err(context: &str, detail: impl ToString) -> CliError {
    CliError::Input(detail.to_string(), context.to_string())
}

/// Loads a document argument: inline JSON if it starts with `{`, a file
/// path otherwise.
fn load_text(arg: &str) -> Result<String, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg)
        .map_err(|e| input_err("document path must be readable", format!("{arg}: {e}")))
}

fn parse_doc<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    let text = load_text(arg)?;
    serde_json::from_str(&text)
        .map_err(|e| input_err(&format!("{what} document must parse"), e))
}

fn load_space(arg: &str) -> Result<Space, CliError> {
    let doc: SpaceDoc = parse_doc(arg, "space")?;
    doc.build()
        .map_err(|e| input_err("space document must build", e))
}

fn load_measure(arg: &str) -> Result<MeasureDescriptor, CliError> {
    let doc: MeasureDoc = parse_doc(arg, "measure")?;
    doc.build()
        .map_err(|e| input_err("measure document must build", e))
}

fn load_point(arg: &str, space: &Space) -> Result<Point, CliError> {
    let doc: PointDoc = parse_doc(arg, "point")?;
    doc.build(space)
        .map_err(|e| input_err("point document must build", e))
}

fn approx_string(q: &Rational) -> String {
    // Deterministic decimal rendering with 12 fractional digits, truncated
    // toward zero.
    let scale = num_bigint::BigInt::from(10u64).pow(12);
    let scaled = (q * Rational::from_integer(scale.clone())).trunc();
    let int = scaled.to_integer();
    let sign = if int.is_negative() { "-" } else { "" };
    let abs = int.abs();
    let whole = &abs / &scale;
    let frac = &abs % &scale;
    format!("{sign}{whole}.{frac:012}")
}

fn maybe_approx(q: &Rational, on: bool) -> Option<String> {
    on.then(|| approx_string(q))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Dist { common, kind, a, b } => {
            let space = load_space(&common.space)?;
            match kind.as_str() {
                "prokhorov" | "wasserstein" => {
                    let da: MeasureDoc = parse_doc(&a, "measure")?;
                    let db: MeasureDoc = parse_doc(&b, "measure")?;
                    let ma = da
                        .build_ideal_only()
                        .map_err(|e| input_err("left measure must be ideal", e))?;
                    let mb = db
                        .build_ideal_only()
                        .map_err(|e| input_err("right measure must be ideal", e))?;
                    let value = if kind == "prokhorov" {
                        prokhorov_exact(&ma, &mb, &space)
                            .map_err(|e| input_err("exact Prokhorov preconditions", e))?
                    } else {
                        wasserstein_exact(&ma, &mb, &space)
                            .map_err(|e| input_err("exact Wasserstein preconditions", e))?
                            .0
                    };
                    Ok(serde_json::to_string(&ValueOut {
                        approx: maybe_approx(&value, common.approx),
                        value: format_rational(&value),
                    })
                    .unwrap())
                }
                "point" => {
                    let pa = load_point(&a, &space)?;
                    let pb = load_point(&b, &space)?;
                    let enc = point_distance(&pa, &pb, &space, common.stage)
                        .map_err(|e| input_err("points must be fast Cauchy", e))?;
                    Ok(serde_json::to_string(&IntervalOut {
                        approx: common
                            .approx
                            .then(|| [approx_string(enc.lo()), approx_string(enc.hi())]),
                        lower: format_rational(enc.lo()),
                        upper: format_rational(enc.hi()),
                    })
                    .unwrap())
                }
                other => Err(input_err(
                    "kind must be prokhorov, wasserstein, or point",
                    other,
                )),
            }
        }
        Command::Val { common, measure, set } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let doc: comprob::doc::OpenSetDoc = parse_doc(&set, "open set")?;
            let u = doc
                .build()
                .map_err(|e| input_err("open set document must build", e))?;
            let value = valuation_lower(&mu, &u, &space, common.stage);
            Ok(serde_json::to_string(&LowerOut {
                approx: maybe_approx(&value, common.approx),
                lower: format_rational(&value),
            })
            .unwrap())
        }
        Command::Integrate { common, measure, f } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let doc: LscDoc = parse_doc(&f, "lsc function")?;
            let func = doc
                .build()
                .map_err(|e| input_err("lsc document must build", e))?;
            let value = integrate_lower(&mu, &func, &space, common.stage);
            Ok(serde_json::to_string(&LowerOut {
                approx: maybe_approx(&value, common.approx),
                lower: format_rational(&value),
            })
            .unwrap())
        }
        Command::Encode { common, measure, point, bits } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let x = load_point(&point, &space)?;
            let rep = BinaryRep::construct(&space, &mu, common.budget);
            match binaryrep::encode(&rep, &x, bits, common.budget) {
                Ok(out) => Ok(serde_json::to_string(&BitsOut {
                    status: "ok".into(),
                    bits: format_word(&out),
                })
                .unwrap()),
                Err(RepError::Stalled { bits, .. }) => Err(CliError::Budget(
                    serde_json::to_string(&BitsOut {
                        status: "budget_exhausted".into(),
                        bits: format_word(&bits),
                    })
                    .unwrap(),
                )),
                Err(e) => Err(input_err("encode preconditions", e)),
            }
        }
        Command::Decode { common, measure, word, precision } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let bits =
                parse_word(&word).map_err(|e| input_err("word must be a 0/1 string", e))?;
            let rep = BinaryRep::construct(&space, &mu, common.budget);
            match binaryrep::decode(&rep, &bits, precision, common.budget) {
                Ok(p) => {
                    let stream: Vec<u64> =
                        (0..=precision).map(|n| p.index_at(n)).collect();
                    Ok(serde_json::to_string(&PointOut {
                        constant_from: precision,
                        ideal_stream: stream,
                    })
                    .unwrap())
                }
                Err(RepError::BudgetExhausted { what }) => Err(CliError::Budget(
                    serde_json::to_string(&ErrorOut {
                        error: what,
                        precondition: "status: budget_exhausted".into(),
                    })
                    .unwrap(),
                )),
                Err(e) => Err(input_err("decode preconditions", e)),
            }
        }
        Command::Cellmeasure { common, measure, word } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let bits =
                parse_word(&word).map_err(|e| input_err("word must be a 0/1 string", e))?;
            if bits.len() > 16 {
                return Err(input_err(
                    "cell words are limited to 16 bits",
                    bits.len(),
                ));
            }
            let rep = BinaryRep::construct(&space, &mu, common.budget);
            let enc = binaryrep::cell_measure(&rep, &bits, common.stage);
            Ok(serde_json::to_string(&IntervalOut {
                approx: common
                    .approx
                    .then(|| [approx_string(enc.lo()), approx_string(enc.hi())]),
                lower: format_rational(enc.lo()),
                upper: format_rational(enc.hi()),
            })
            .unwrap())
        }
        Command::Testconv { common, measure, test, direction, levels } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let doc: TestDoc = parse_doc(&test, "test")?;
            let built = doc
                .build(&space, &mu)
                .map_err(|e| input_err("test document must build", e))?;
            match (built, direction.as_str()) {
                (BuiltTest::Integral(t), "to_ml") => {
                    let ml = randomness::integral_to_ml(&t, common.budget);
                    let out = materialize_levels(&ml, levels, common.stage);
                    Ok(serde_json::to_string(&out).unwrap())
                }
                (BuiltTest::Ml(u), "to_integral") => {
                    let t = randomness::ml_to_integral(&u)
                        .map_err(|e| input_err("ml test must carry certified bounds", e))?;
                    let lower = t
                        .integral_lower_monitored(common.stage)
                        .map_err(|e| input_err("certified integral bound", e))?;
                    Ok(serde_json::to_string(&IntegralFormOut {
                        kind: "integral".into(),
                        certificate: format!("{:?}", t.certificate()),
                        integral_lower: format_rational(&lower),
                    })
                    .unwrap())
                }
                (BuiltTest::Ml(_), "to_ml") => {
                    Err(input_err("direction", "test is already in ml form"))
                }
                (BuiltTest::Integral(_), "to_integral") => {
                    Err(input_err("direction", "test is already in integral form"))
                }
                (_, other) => Err(input_err("direction must be to_ml or to_integral", other)),
            }
        }
        Command::Deficiency { common, measure, test, point } => {
            let space = load_space(&common.space)?;
            let mu = load_measure(&measure)?;
            let doc: TestDoc = parse_doc(&test, "test")?;
            let built = doc
                .build(&space, &mu)
                .map_err(|e| input_err("test document must build", e))?;
            let t: IntegralTest = match built {
                BuiltTest::Integral(t) => t,
                BuiltTest::Ml(u) => randomness::ml_to_integral(&u)
                    .map_err(|e| input_err("ml test must carry certified bounds", e))?,
            };
            let x = load_point(&point, &space)?;
            let report = randomness::deficiency(&x, &t, common.stage);
            Ok(serde_json::to_string(&DeficiencyOut {
                stage: report.stage,
                approx: maybe_approx(&report.lower_bound, common.approx),
                lower_bound: format_rational(&report.lower_bound),
                non_random_level: report.non_random_level,
            })
            .unwrap())
        }
        Command::Checkbounds { common, a, b } => {
            let space = load_space(&common.space)?;
            let da: MeasureDoc = parse_doc(&a, "measure")?;
            let db: MeasureDoc = parse_doc(&b, "measure")?;
            let ma = da
                .build_ideal_only()
                .map_err(|e| input_err("left measure must be ideal", e))?;
            let mb = db
                .build_ideal_only()
                .map_err(|e| input_err("right measure must be ideal", e))?;
            let report = check_equivalence_bounds(&ma, &mb, &space)
                .map_err(|e| input_err("equivalence bound preconditions", e))?;
            Ok(serde_json::to_string(&CheckboundsOut {
                prokhorov: format_rational(&report.prokhorov),
                wasserstein: format_rational(&report.wasserstein),
                diameter_bound: format_rational(&report.diameter_bound),
                lipschitz_ok: report.lipschitz_ok,
                prokhorov_checks: report
                    .prokhorov_checks
                    .iter()
                    .map(|(eps, ok)| (format_rational(eps), *ok))
                    .collect(),
                all_ok: report.all_ok(),
            })
            .unwrap())
        }
    }
}

fn materialize_levels(
    ml: &comprob::randomness::MlTest,
    levels: u32,
    stage: u32,
) -> MlLevelsOut {
    let mut out = Vec::new();
    for n in 0..levels {
        let balls = match ml.levels().level(n) {
            Some(set) => materialize_balls(&set, stage),
            None => Vec::new(),
        };
        out.push(LevelOut { balls });
    }
    MlLevelsOut {
        kind: "ml".into(),
        certificate: format!("{:?}", ml.certificate()),
        levels: out,
    }
}

fn materialize_balls(set: &ROpenSet, stage: u32) -> Vec<BallOut> {
    set.balls_through(stage)
        .into_iter()
        .map(|b| BallOut {
            center: b.center,
            radius: format_rational(&b.radius),
        })
        .collect()
}

// Keep the unused-import lint honest: LscFunction appears in signatures of
// re-exported helpers used by integration tests.
#[allow(dead_code)]
fn _assert_types(f: &LscFunction) -> String {
    format!("{f:?}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(CliError::Budget(json)) => {
            println!("{json}");
            ExitCode::from(2)
        }
        Err(CliError::Input(detail, precondition)) => {
            println!(
                "{}",
                serde_json::to_string(&ErrorOut {
                    error: detail,
                    precondition,
                })
                .unwrap()
            );
            ExitCode::from(1)
        }
    }
}
