//! Question-answer trust and the correctness diagnostics built on it.
//!
//! A correct answer given with confidence `C` earns trust `C^alpha`; an
//! incorrect one earns `(1 - C)^beta`. With the default `alpha = beta = 1`
//! well-placed confidence is rewarded exactly as much as undeserved
//! confidence is penalised.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{PredictionRecord, RecordSet};
use crate::numeric::mean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrustError {
    #[error("record set is empty")]
    EmptyRecordSet,
    #[error("parameter `{name}` must be a finite value > 0, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Which label decides a record's answer scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// The model's answer.
    #[default]
    Predicted,
    /// The oracle's answer.
    Oracle,
}

/// How answer scenarios are weighted when collapsing a spectrum to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each scenario weighted by its share of the records.
    #[default]
    Empirical,
    /// Every observed scenario weighted equally.
    Uniform,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $kw:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($kw => Ok(Self::$variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: ", $($kw, " ",)+ ")"),
                        other
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $(Self::$variant => $kw,)+
                })
            }
        }
    };
}

keyword_enum!(Grouping { Predicted => "predicted", Oracle => "oracle" });
keyword_enum!(Weighting { Empirical => "empirical", Uniform => "uniform" });

/// Exponents, KDE constant and aggregation policies shared by every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustParams {
    /// Reward relaxation exponent applied to correct answers.
    pub alpha: f64,
    /// Penalty relaxation exponent applied to incorrect answers.
    pub beta: f64,
    /// Kernel constant; the density bandwidth is `gamma / sqrt(N)`.
    pub gamma: f64,
    pub grouping: Grouping,
    pub weighting: Weighting,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            grouping: Grouping::Predicted,
            weighting: Weighting::Empirical,
        }
    }
}

impl TrustParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        grouping: Grouping,
        weighting: Weighting,
    ) -> Result<Self, TrustError> {
        let params = Self {
            alpha,
            beta,
            gamma,
            grouping,
            weighting,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(TrustError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// True when both exponents are exactly 1, where trust reduces to `C` / `1 - C`.
    pub fn is_linear(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }
}

/// A record together with its correctness and question-answer trust.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record: PredictionRecord,
    pub correct: bool,
    pub qa_trust: f64,
}

/// Splits a record set into correctly and incorrectly answered records,
/// each in input order.
pub fn partition(
    rs: &RecordSet,
) -> Result<(Vec<&PredictionRecord>, Vec<&PredictionRecord>), TrustError> {
    if rs.is_empty() {
        return Err(TrustError::EmptyRecordSet);
    }
    Ok(rs.records().iter().partition(|r| r.is_correct()))
}

/// Trust earned by a single answer.
pub fn question_answer_trust(record: &PredictionRecord, params: &TrustParams) -> f64 {
    let c = record.confidence;
    let q = if record.is_correct() {
        c.powf(params.alpha)
    } else {
        (1.0 - c).powf(params.beta)
    };
    q.clamp(0.0, 1.0)
}

/// Scores every record, preserving input order.
pub fn score_all(rs: &RecordSet, params: &TrustParams) -> Result<Vec<ScoredRecord>, TrustError> {
    if rs.is_empty() {
        return Err(TrustError::EmptyRecordSet);
    }
    params.validate()?;
    Ok(rs
        .records()
        .par_iter()
        .map(|record| ScoredRecord {
            record: record.clone(),
            correct: record.is_correct(),
            qa_trust: question_answer_trust(record, params),
        })
        .collect())
}

/// Mean confidence over correctly answered records; `None` when there are none.
pub fn expected_confidence_correct(rs: &RecordSet) -> Option<f64> {
    subset_mean_confidence(rs, true)
}

/// Mean confidence over incorrectly answered records; `None` when there are none.
pub fn expected_confidence_incorrect(rs: &RecordSet) -> Option<f64> {
    subset_mean_confidence(rs, false)
}

fn subset_mean_confidence(rs: &RecordSet, correct: bool) -> Option<f64> {
    mean(
        rs.records()
            .iter()
            .filter(|r| r.is_correct() == correct)
            .map(|r| r.confidence),
    )
}

/// Fractions of correct and incorrect answers. They sum to exactly 1.
pub fn accuracy_fractions(rs: &RecordSet) -> Result<(f64, f64), TrustError> {
    if rs.is_empty() {
        return Err(TrustError::EmptyRecordSet);
    }
    let total = rs.len();
    let correct = rs.records().iter().filter(|r| r.is_correct()).count();
    let correct_frac = correct as f64 / total as f64;
    Ok((correct_frac, 1.0 - correct_frac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, pred: &str, oracle: &str, c: f64) -> PredictionRecord {
        PredictionRecord::new(id, pred, oracle, c)
    }

    fn set(records: Vec<PredictionRecord>) -> RecordSet {
        RecordSet::new("m", records).unwrap()
    }

    fn with_exponents(alpha: f64, beta: f64) -> TrustParams {
        TrustParams {
            alpha,
            beta,
            ..TrustParams::default()
        }
    }

    #[test]
    fn partition_examples() {
        let rs = set(vec![
            rec("q1", "teapot", "teapot", 0.9),
            rec("q2", "screen", "monitor", 0.8),
        ]);
        let (ok, bad) = partition(&rs).unwrap();
        assert_eq!(
            ok.iter()
                .map(|r| r.question_id.as_str())
                .collect::<Vec<_>>(),
            ["q1"]
        );
        assert_eq!(
            bad.iter()
                .map(|r| r.question_id.as_str())
                .collect::<Vec<_>>(),
            ["q2"]
        );

        let all_ok = set(vec![rec("a", "x", "x", 0.1), rec("b", "y", "y", 0.2)]);
        assert!(partition(&all_ok).unwrap().1.is_empty());
        let all_bad = set(vec![rec("a", "x", "y", 0.1), rec("b", "y", "x", 0.2)]);
        assert!(partition(&all_bad).unwrap().0.is_empty());

        assert_eq!(partition(&set(vec![])), Err(TrustError::EmptyRecordSet));
    }

    #[test]
    fn qa_trust_examples() {
        let p1 = TrustParams::default();
        assert_eq!(question_answer_trust(&rec("q", "a", "a", 0.8), &p1), 0.8);
        assert!((question_answer_trust(&rec("q", "a", "b", 0.6), &p1) - 0.4).abs() < 1e-15);
        let harsh = with_exponents(1.0, 2.0);
        assert!((question_answer_trust(&rec("q", "a", "b", 0.9), &harsh) - 0.01).abs() < 1e-15);
        for alpha in [0.1, 1.0, 3.7, 50.0] {
            assert_eq!(
                question_answer_trust(&rec("q", "a", "a", 1.0), &with_exponents(alpha, 1.0)),
                1.0
            );
        }
    }

    #[test]
    fn score_all_examples() {
        let p = TrustParams::default();
        let rs = set(vec![rec("a", "x", "x", 0.9), rec("b", "x", "y", 0.7)]);
        let q: Vec<f64> = score_all(&rs, &p)
            .unwrap()
            .iter()
            .map(|s| s.qa_trust)
            .collect();
        assert_eq!(q[0], 0.9);
        assert!((q[1] - 0.3).abs() < 1e-15);

        let single = set(vec![rec("a", "x", "x", 0.5)]);
        assert_eq!(score_all(&single, &p).unwrap()[0].qa_trust, 0.5);

        let overconfident = set(vec![
            rec("a", "x", "y", 1.0),
            rec("b", "x", "y", 1.0),
            rec("c", "y", "x", 1.0),
        ]);
        assert!(score_all(&overconfident, &p)
            .unwrap()
            .iter()
            .all(|s| s.qa_trust == 0.0 && !s.correct));

        assert_eq!(score_all(&set(vec![]), &p), Err(TrustError::EmptyRecordSet));
    }

    #[test]
    fn expected_confidence_examples() {
        let rs = set(vec![
            rec("a", "x", "x", 0.8),
            rec("b", "x", "x", 0.6),
            rec("c", "x", "y", 0.5),
            rec("d", "x", "y", 0.5),
            rec("e", "y", "x", 0.8),
        ]);
        assert!((expected_confidence_correct(&rs).unwrap() - 0.7).abs() < 1e-15);
        assert!((expected_confidence_incorrect(&rs).unwrap() - 0.6).abs() < 1e-15);

        let one = set(vec![rec("a", "x", "x", 0.9), rec("b", "x", "y", 0.565)]);
        assert_eq!(expected_confidence_correct(&one), Some(0.9));
        assert_eq!(expected_confidence_incorrect(&one), Some(0.565));

        let all_ok = set(vec![rec("a", "x", "x", 0.9)]);
        assert_eq!(expected_confidence_incorrect(&all_ok), None);
        let all_bad = set(vec![rec("a", "x", "y", 0.9)]);
        assert_eq!(expected_confidence_correct(&all_bad), None);
    }

    #[test]
    fn accuracy_fraction_examples() {
        let rs = set(vec![
            rec("a", "x", "x", 0.9),
            rec("b", "x", "x", 0.8),
            rec("c", "x", "x", 0.7),
            rec("d", "x", "y", 0.6),
        ]);
        assert_eq!(accuracy_fractions(&rs).unwrap(), (0.75, 0.25));
        assert_eq!(
            accuracy_fractions(&set(vec![rec("a", "x", "x", 0.1)])).unwrap(),
            (1.0, 0.0)
        );

        let mut records: Vec<_> = (0..756)
            .map(|i| rec(&format!("c{i}"), "x", "x", 0.5))
            .collect();
        records.extend((0..244).map(|i| rec(&format!("w{i}"), "x", "y", 0.5)));
        let (ok, bad) = accuracy_fractions(&set(records)).unwrap();
        assert!((ok - 0.756).abs() < 1e-12 && (bad - 0.244).abs() < 1e-12);
    }

    #[test]
    fn params_validation_and_keywords() {
        assert!(
            TrustParams::new(0.0, 1.0, 0.5, Grouping::Predicted, Weighting::Empirical).is_err()
        );
        assert!(
            TrustParams::new(1.0, -1.0, 0.5, Grouping::Predicted, Weighting::Empirical).is_err()
        );
        assert!(TrustParams::new(
            1.0,
            1.0,
            f64::NAN,
            Grouping::Predicted,
            Weighting::Empirical
        )
        .is_err());
        assert_eq!("oracle".parse::<Grouping>(), Ok(Grouping::Oracle));
        assert_eq!(Weighting::Uniform.to_string(), "uniform");
        assert!("mode".parse::<Weighting>().is_err());
    }

    proptest! {
        #[test]
        fn trust_in_unit_interval(c in 0.0f64..=1.0, alpha in 0.01f64..20.0, beta in 0.01f64..20.0, correct: bool) {
            let r = rec("q", "a", if correct { "a" } else { "b" }, c);
            let q = question_answer_trust(&r, &with_exponents(alpha, beta));
            prop_assert!((0.0..=1.0).contains(&q));
        }

        #[test]
        fn harsher_exponent_lowers_trust(c in 0.001f64..0.999, e in 0.1f64..5.0, de in 0.01f64..5.0) {
            let ok = rec("q", "a", "a", c);
            let bad = rec("q", "a", "b", c);
            prop_assert!(
                question_answer_trust(&ok, &with_exponents(e + de, 1.0))
                    < question_answer_trust(&ok, &with_exponents(e, 1.0))
            );
            prop_assert!(
                question_answer_trust(&bad, &with_exponents(1.0, e + de))
                    < question_answer_trust(&bad, &with_exponents(1.0, e))
            );
        }

        #[test]
        fn expected_confidence_within_subset_bounds(cs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..40)) {
            let records: Vec<_> = cs
                .iter()
                .enumerate()
                .map(|(i, &(c, ok))| rec(&i.to_string(), "a", if ok { "a" } else { "b" }, c))
                .collect();
            let rs = set(records);
            let (ok, bad) = partition(&rs).unwrap();
            prop_assert_eq!(ok.len() + bad.len(), rs.len());
            for (subset, ec) in [(ok, expected_confidence_correct(&rs)), (bad, expected_confidence_incorrect(&rs))] {
                match ec {
                    None => prop_assert!(subset.is_empty()),
                    Some(m) => {
                        let lo = subset.iter().map(|r| r.confidence).fold(f64::INFINITY, f64::min);
                        let hi = subset.iter().map(|r| r.confidence).fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(lo <= m && m <= hi);
                    }
                }
            }
        }
    }
}
