use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub const SCORE_MIN: f64 = -100.0;
pub const SCORE_MAX: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no [SCORE: n] marker in critic output")]
    Missing { raw: String },
    #[error("score {value} outside [-100, 100]")]
    OutOfRange { value: f64, raw: String },
}

impl ScoreError {
    pub fn raw_text(&self) -> &str {
        match self {
            ScoreError::Missing { raw } | ScoreError::OutOfRange { raw, .. } => raw,
        }
    }
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\[\s*score\s*:\s*([+-]?\d+(?:\.\d+)?)\s*\]").expect("valid"))
}

/// Value of the last `[SCORE: n]` marker.
pub fn parse_score<S: Scalar>(text: &str) -> Result<S, ScoreError> {
    let caps = marker()
        .captures_iter(text)
        .last()
        .ok_or_else(|| ScoreError::Missing { raw: text.to_string() })?;
    let value: f64 = caps[1].parse().expect("regex guarantees a number");
    if !(SCORE_MIN..=SCORE_MAX).contains(&value) {
        return Err(ScoreError::OutOfRange { value, raw: text.to_string() });
    }
    Ok(S::lit(value))
}

/// `min(raw, cap)`.
pub fn suppress<S: Scalar>(raw: S, cap: S) -> S {
    raw.min(cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CritiqueResult<S> {
    pub feedback: String,
    pub raw_score: S,
    pub suppressed_score: S,
}

impl<S: Scalar> CritiqueResult<S> {
    pub fn from_text(text: String, cap: S) -> Result<Self, ScoreError> {
        let raw_score = parse_score::<S>(&text)?;
        Ok(Self { feedback: text, raw_score, suppressed_score: suppress(raw_score, cap) })
    }
}
