//! JSON state files.
//!
//! ```json
//! {
//!   "kind": "boson",
//!   "occupation": [2, 1],
//!   "internal": {
//!     "letters": ["a", "b"],
//!     "components": [
//!       {"q": 1.0, "amps": [{"tuple": ["a", "a", "b"], "re": 1.0, "im": 0.0}]}
//!     ]
//!   },
//!   "preparation": "(13)"
//! }
//! ```
//!
//! Letters are 1-based integers, or names declared in `internal.letters`
//! (mapped to indices in declaration order). With `"normalize": true` the
//! weights and every component are normalized before validation.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::combinatorics::{ModeOccupation, Permutation};
use crate::error::Error;
use crate::states::{validate_internal, Component, InternalState, ParticleKind, PreparedState, ValidationReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Letter {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmpEntry {
    pub tuple: Vec<Letter>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub q: f64,
    pub amps: Vec<AmpEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letters: Option<Vec<String>>,
    pub components: Vec<ComponentFile>,
}

/// Raw contents of a state file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub kind: ParticleKind,
    pub occupation: Vec<usize>,
    pub internal: InternalFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

/// One finding, located in the source text where possible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub kind: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, ThisError)]
pub enum StateFileError {
    /// Malformed JSON or schema mismatch.
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    /// Well-formed file describing an invalid state.
    #[error("{}", join(.diagnostics))]
    Invalid {
        diagnostics: Vec<Diagnostic>,
        report: Option<ValidationReport>,
    },
}

impl StateFileError {
    fn invalid(line: Option<usize>, kind: &str, message: impl Into<String>) -> Self {
        StateFileError::Invalid {
            diagnostics: vec![Diagnostic {
                line,
                kind: kind.into(),
                message: message.into(),
            }],
            report: None,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            StateFileError::Syntax { line, message, .. } => vec![Diagnostic {
                line: Some(*line),
                kind: "Syntax".into(),
                message: message.clone(),
            }],
            StateFileError::Invalid { diagnostics, .. } => diagnostics.clone(),
        }
    }
}

/// Line (1-based) of every occurrence of `"key"` used as an object key.
fn key_lines(text: &str, key: &str) -> Vec<usize> {
    let pat = format!("\"{key}\"");
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut rest = line;
        while let Some(pos) = rest.find(&pat) {
            rest = &rest[pos + pat.len()..];
            if rest.trim_start().starts_with(':') {
                out.push(i + 1);
            }
        }
    }
    out
}

/// Source positions of components and amplitude entries.
struct Locations {
    components: Vec<Option<usize>>,
    tuples: BTreeMap<(usize, Vec<usize>), usize>,
}

impl Locations {
    fn component(&self, j: usize) -> Option<usize> {
        self.components.get(j).copied().flatten()
    }

    /// Line of `t`, else of a listed rearrangement of `t`, else of the
    /// component.
    fn tuple(&self, j: usize, t: &[usize]) -> Option<usize> {
        let sorted = |x: &[usize]| {
            let mut v = x.to_vec();
            v.sort_unstable();
            v
        };
        let key = sorted(t);
        self.tuples
            .get(&(j, t.to_vec()))
            .or_else(|| {
                self.tuples
                    .iter()
                    .find(|((c, u), _)| *c == j && sorted(u) == key)
                    .map(|(_, l)| l)
            })
            .copied()
            .or_else(|| self.component(j))
    }
}

fn resolve_letter(l: &Letter, letters: Option<&[String]>, m: usize) -> Result<usize, String> {
    match l {
        Letter::Index(i) if (1..=m).contains(i) => Ok(i - 1),
        Letter::Index(i) => Err(format!("letter {i} outside 1..={m}")),
        Letter::Name(name) => letters
            .and_then(|ls| ls.iter().position(|x| x == name))
            .ok_or_else(|| format!("undeclared letter {name:?}")),
    }
}

/// Parses and validates a state file.
pub fn parse_state(text: &str) -> Result<PreparedState, StateFileError> {
    let raw: StateFile = serde_json::from_str(text).map_err(|e| StateFileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let q_lines = key_lines(text, "q");
    let tuple_lines = key_lines(text, "tuple");
    let comp_line = |j: usize| q_lines.get(j).copied();
    let line_of = |key: &str| key_lines(text, key).first().copied();

    let occupation = ModeOccupation::new(raw.occupation.clone())
        .map_err(|e| StateFileError::invalid(line_of("occupation"), "InvalidOccupation", e.to_string()))?;
    let n = occupation.particles();

    let letters = raw.internal.letters.as_deref();
    let m = match (raw.internal.m, letters) {
        (Some(m), Some(ls)) if m != ls.len() => {
            return Err(StateFileError::invalid(
                line_of("m"),
                "Parse",
                format!("internal.m = {m} but {} letters are declared", ls.len()),
            ))
        }
        (Some(m), _) => m,
        (None, Some(ls)) => ls.len(),
        (None, None) => {
            return Err(StateFileError::invalid(
                line_of("internal"),
                "Parse",
                "internal needs m or letters",
            ))
        }
    };

    let mut locations = Locations {
        components: (0..raw.internal.components.len()).map(comp_line).collect(),
        tuples: BTreeMap::new(),
    };
    let mut flat = 0;
    let mut comps = Vec::with_capacity(raw.internal.components.len());
    for (j, cf) in raw.internal.components.iter().enumerate() {
        let mut amps = BTreeMap::new();
        for entry in &cf.amps {
            let line = tuple_lines.get(flat).copied();
            flat += 1;
            if entry.tuple.len() != n {
                return Err(StateFileError::invalid(
                    line,
                    "ParticleCount",
                    format!("tuple of length {} for {n} particles", entry.tuple.len()),
                ));
            }
            let t = entry
                .tuple
                .iter()
                .map(|l| resolve_letter(l, letters, m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|msg| StateFileError::invalid(line, "Parse", msg))?;
            if amps.insert(t.clone(), Complex64::new(entry.re, entry.im)).is_some() {
                return Err(StateFileError::invalid(line, "Parse", format!("duplicate tuple in component {j}")));
            }
            if let Some(l) = line {
                locations.tuples.insert((j, t), l);
            }
        }
        comps.push(Component::new(cf.q, amps));
    }

    let mut internal = InternalState::new(m, n, comps)
        .map_err(|e| StateFileError::invalid(line_of("internal"), "Parse", e.to_string()))?;
    if raw.normalize {
        internal = internal
            .normalized()
            .map_err(|e| StateFileError::invalid(line_of("normalize"), "NotNormalized", e.to_string()))?;
    }

    let report = validate_internal(&internal, &occupation, raw.kind);
    if !report.is_ok() {
        let diagnostics = report
            .violations
            .iter()
            .map(|v| Diagnostic {
                line: match (v.component(), v.tuple()) {
                    (Some(j), Some(t)) => locations.tuple(j, t),
                    (Some(j), None) => locations.component(j),
                    _ => line_of("components"),
                },
                kind: v.name().into(),
                message: v.to_string(),
            })
            .collect();
        return Err(StateFileError::Invalid {
            diagnostics,
            report: Some(report),
        });
    }

    let state = PreparedState::new(occupation, raw.kind, internal).map_err(|e| match e {
        Error::InvalidState(r) => StateFileError::Invalid {
            diagnostics: vec![Diagnostic {
                line: None,
                kind: "InvalidState".into(),
                message: r.to_string(),
            }],
            report: Some(r),
        },
        other => StateFileError::invalid(None, "InvalidState", other.to_string()),
    })?;
    match raw.preparation.as_deref() {
        None => Ok(state),
        Some(s) => {
            let line = line_of("preparation");
            let kappa = Permutation::parse_cycles(s, n)
                .map_err(|e| StateFileError::invalid(line, "InvalidPermutation", e.to_string()))?;
            state
                .with_preparation(kappa)
                .map_err(|e| StateFileError::invalid(line, "InvalidPermutation", e.to_string()))
        }
    }
}

/// File form of a prepared state, letters as 1-based integers.
pub fn to_state_file(p: &PreparedState) -> StateFile {
    let components = p
        .internal()
        .components()
        .iter()
        .map(|c| ComponentFile {
            q: c.q,
            amps: c
                .amps
                .iter()
                .map(|(t, a)| AmpEntry {
                    tuple: t.iter().map(|&x| Letter::Index(x + 1)).collect(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        })
        .collect();
    let prep = p.preparation();
    StateFile {
        kind: p.kind(),
        occupation: p.occupation().counts().to_vec(),
        internal: InternalFile {
            m: Some(p.internal().m()),
            letters: None,
            components,
        },
        preparation: (*prep != Permutation::identity(prep.len())).then(|| prep.to_string()),
        normalize: false,
    }
}

pub fn to_json(p: &PreparedState) -> String {
    serde_json::to_string_pretty(&to_state_file(p)).expect("serializable")
}
