//! The test-function corpus: a JSON-described collection of [0,1]-valued
//! functions (half-spaces, thresholds, box unions, balls, constants) used
//! by the verification suites.

use gauss_stab_core::semigroup::{AxisBox, HalfSpace, Orientation, TestFunction};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("corpus member {0:?} not found")]
    NoSuchMember(String),
    #[error("invalid member {id}: {reason}")]
    Invalid { id: String, reason: String },
}

/// One interval per axis; `null` bounds mean ±∞.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<Option<f64>>,
    pub hi: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MemberSpec {
    /// Indicator of {⟨a,x⟩ ≤ b} ("le") or {⟨a,x⟩ ≥ b} ("ge").
    Halfspace {
        a: Vec<f64>,
        b: f64,
        orientation: String,
    },
    /// Φ(⟨a,x⟩ - b)
    Threshold { a: Vec<f64>, b: f64 },
    /// Indicator of a disjoint union of axis-aligned boxes.
    BoxUnion { dim: usize, boxes: Vec<BoxSpec> },
    /// Indicator of the centered ball.
    Ball { dim: usize, radius: f64 },
    Constant { dim: usize, value: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusMember {
    pub id: String,
    #[serde(flatten)]
    pub spec: MemberSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub members: Vec<CorpusMember>,
}

impl CorpusMember {
    pub fn to_test_function(&self) -> Result<TestFunction, CorpusError> {
        let invalid = |reason: &str| CorpusError::Invalid {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        Ok(match &self.spec {
            MemberSpec::Halfspace { a, b, orientation } => {
                let o = match orientation.as_str() {
                    "le" => Orientation::Le,
                    "ge" => Orientation::Ge,
                    _ => return Err(invalid("orientation must be 'le' or 'ge'")),
                };
                if !a.iter().any(|&c| c != 0.0) {
                    return Err(invalid("half-space normal must be nonzero"));
                }
                TestFunction::HalfSpaceInd(HalfSpace::new(a.clone(), *b, o))
            }
            MemberSpec::Threshold { a, b } => TestFunction::LinearThreshold {
                a: a.clone(),
                b: *b,
            },
            MemberSpec::BoxUnion { dim, boxes } => {
                let mut out = Vec::new();
                for bx in boxes {
                    if bx.lo.len() != *dim || bx.hi.len() != *dim {
                        return Err(invalid("box bounds must match dim"));
                    }
                    out.push(AxisBox {
                        lo: bx.lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                        hi: bx.hi.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
                    });
                }
                TestFunction::ProductSet {
                    dim: *dim,
                    boxes: out,
                }
            }
            MemberSpec::Ball { dim, radius } => {
                if !(*radius > 0.0) || *dim > 2 {
                    return Err(invalid("ball needs radius > 0 and dim ≤ 2"));
                }
                TestFunction::BallInd {
                    dim: *dim,
                    radius: *radius,
                }
            }
            MemberSpec::Constant { dim, value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(invalid("constant must lie in [0,1]"));
                }
                TestFunction::Constant {
                    dim: *dim,
                    value: *value,
                }
            }
        })
    }
}

impl Corpus {
    pub fn load(path: &Path) -> Result<Corpus, CorpusError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(std::fs::write(path, text)?)
    }

    pub fn get(&self, id: &str) -> Result<&CorpusMember, CorpusError> {
        self.members
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| CorpusError::NoSuchMember(id.to_string()))
    }
}

/// The wedge set {x₁ < ε, x₂ < 0} ∪ {x₁ < -ε, x₂ ≥ 0}; Gaussian measure
/// exactly ½ for every ε.
pub fn wedge_boxes(eps: f64) -> Vec<BoxSpec> {
    vec![
        BoxSpec {
            lo: vec![None, None],
            hi: vec![Some(eps), Some(0.0)],
        },
        BoxSpec {
            lo: vec![None, Some(0.0)],
            hi: vec![Some(-eps), None],
        },
    ]
}

/// The two-piece set {x₁ < 2, x₂ < 0} ∪ {x₁ < 1, x₂ ≥ 0}: far from any
/// half-space, yet with deficit decaying fast as ρ → 1.
pub fn two_piece_boxes() -> Vec<BoxSpec> {
    vec![
        BoxSpec {
            lo: vec![None, None],
            hi: vec![Some(2.0), Some(0.0)],
        },
        BoxSpec {
            lo: vec![None, Some(0.0)],
            hi: vec![Some(1.0), None],
        },
    ]
}

/// The default 12-member corpus (all members 2-dimensional).
pub fn default_corpus() -> Corpus {
    let member = |id: &str, spec: MemberSpec| CorpusMember {
        id: id.to_string(),
        spec,
    };
    Corpus {
        members: vec![
            member(
                "halfspace-origin",
                MemberSpec::Halfspace {
                    a: vec![1.0, 0.0],
                    b: 0.0,
                    orientation: "le".into(),
                },
            ),
            member(
                "halfspace-tilted",
                MemberSpec::Halfspace {
                    a: vec![0.6, 0.8],
                    b: 0.5,
                    orientation: "le".into(),
                },
            ),
            member(
                "threshold-unit",
                MemberSpec::Threshold {
                    a: vec![1.0, 0.0],
                    b: 0.0,
                },
            ),
            member(
                "threshold-steep",
                MemberSpec::Threshold {
                    a: vec![2.0, 0.0],
                    b: 1.0,
                },
            ),
            member(
                "wedge-two-piece",
                MemberSpec::BoxUnion {
                    dim: 2,
                    boxes: two_piece_boxes(),
                },
            ),
            member(
                "wedge-eps",
                MemberSpec::BoxUnion {
                    dim: 2,
                    boxes: wedge_boxes(0.2),
                },
            ),
            member(
                "strip-centered",
                MemberSpec::BoxUnion {
                    dim: 2,
                    boxes: vec![BoxSpec {
                        lo: vec![Some(-0.7), None],
                        hi: vec![Some(0.7), None],
                    }],
                },
            ),
            member(
                "strip-shifted",
                MemberSpec::BoxUnion {
                    dim: 2,
                    boxes: vec![BoxSpec {
                        lo: vec![Some(0.5), None],
                        hi: vec![Some(1.8), None],
                    }],
                },
            ),
            member(
                "ball-unit",
                MemberSpec::Ball {
                    dim: 2,
                    radius: 1.0,
                },
            ),
            member(
                "ball-large",
                MemberSpec::Ball {
                    dim: 2,
                    radius: 1.5,
                },
            ),
            member(
                "const-half",
                MemberSpec::Constant {
                    dim: 2,
                    value: 0.5,
                },
            ),
            member(
                "const-low",
                MemberSpec::Constant {
                    dim: 2,
                    value: 0.2,
                },
            ),
        ],
    }
}
