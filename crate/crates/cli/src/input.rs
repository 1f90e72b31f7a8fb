//! Loading JSON documents and telling their kinds apart.

use std::path::Path;

use cmient_core::bayes::{build_fig1, build_fig2, build_fig3, Fig1Spec, Fig2Spec, Fig3Spec};
use cmient_core::info::JointPmf;
use cmient_core::quantum::DensityMatrix;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::CliError;

/// Any document the commands accept.
#[derive(Debug, Clone)]
pub enum Document {
    Pmf(JointPmf),
    Density(DensityMatrix),
    Fig1(Fig1Spec),
    Fig2(Fig2Spec),
    Fig3(Fig3Spec),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Pmf(_) => "pmf",
            Document::Density(_) => "density matrix",
            Document::Fig1(_) => "common-cause net",
            Document::Fig2(_) => "two-copy net",
            Document::Fig3(_) => "post-processing net",
        }
    }

    /// The joint distribution a classical document describes.
    pub fn joint(&self) -> Result<JointPmf, CliError> {
        Ok(match self {
            Document::Pmf(p) => p.clone(),
            Document::Fig1(s) => build_fig1(s)?,
            Document::Fig2(s) => build_fig2(s, false)?,
            Document::Fig3(s) => build_fig3(s)?,
            Document::Density(_) => {
                return Err(CliError::Usage(
                    "expected a classical document, got a density matrix".into(),
                ))
            }
        })
    }

    /// The bipartite `(a, b)` table of a source: a two-axis pmf, or the
    /// observed marginal of a common-cause net.
    pub fn source_pmf(&self) -> Result<JointPmf, CliError> {
        match self {
            Document::Pmf(p) => Ok(p.clone()),
            Document::Fig1(s) => {
                Ok(build_fig1(s)?.marginalize(&[&s.a_axis().name, &s.b_axis().name])?)
            }
            other => Err(CliError::Usage(format!(
                "expected a pmf or common-cause net, got a {}",
                other.kind()
            ))),
        }
    }
}

/// serde messages that describe the shape of the input rather than a
/// violated invariant of a well-formed object.
const STRUCTURAL: &[&str] = &[
    "missing field",
    "unknown field",
    "invalid type",
    "invalid length",
    "invalid value",
    "unknown variant",
    "duplicate field",
];

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        if STRUCTURAL.iter().any(|s| msg.starts_with(s)) {
            CliError::Parse(msg)
        } else {
            CliError::Invariant(msg)
        }
    })
}

pub fn parse_document(text: &str) -> Result<Document, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Parse("expected a JSON object".into()))?;
    let has = |k: &str| obj.contains_key(k);
    if has("probs") {
        typed(value).map(Document::Pmf)
    } else if has("re") || has("im") {
        typed(value).map(Document::Density)
    } else if has("x_prime") {
        typed(value).map(Document::Fig2)
    } else if has("x_given_lambda") {
        typed(value).map(Document::Fig3)
    } else if has("a_given_alpha") {
        typed(value).map(Document::Fig1)
    } else {
        Err(CliError::Parse(
            "unrecognized document: expected a pmf, density matrix or net specification".into(),
        ))
    }
}

/// Reads a document from `path`, or from `stdin` when the path is absent
/// or `-`.
pub fn load(path: Option<&Path>, stdin: &mut dyn std::io::Read) -> Result<Document, CliError> {
    let text = match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", p.display())))?,
        _ => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| CliError::Parse(format!("cannot read standard input: {e}")))?;
            s
        }
    };
    parse_document(&text)
}
