//! Decisions on top of the statistics: p-values in both regimes and the
//! accept/reject verdicts they imply.

use serde::{Deserialize, Serialize};

use crate::distributions::{chi2_upper, std_normal_cdf, Probability};
use crate::error::{Error, Result};
use crate::statistics::StatisticPair;

/// The six test families the crate evaluates.
///
/// Each family carries a stable numeric id used as the leading segment of
/// Monte-Carlo stream paths, so archived runs stay reproducible even if
/// variants are added later.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Uniformity of signs on the sphere (Rayleigh statistic).
    Uniformity,
    /// Specified spherical location, tested through tangent signs.
    Location,
    /// Serial independence via lagged sign autocorrelation matrices.
    Serial,
    /// Serial independence using only the diagonal lag sums.
    SerialLowrank,
    /// Independence of two sign vectors observed in pairs.
    Independence,
    /// Sphericity of the underlying covariance structure.
    Sphericity,
}

impl Family {
    /// All families in id order.
    pub const ALL: [Family; 6] = [
        Family::Uniformity,
        Family::Location,
        Family::Serial,
        Family::SerialLowrank,
        Family::Independence,
        Family::Sphericity,
    ];

    /// Stable id, the first segment of every derived stream path.
    pub fn id(self) -> u64 {
        match self {
            Family::Uniformity => 0,
            Family::Location => 1,
            Family::Serial => 2,
            Family::SerialLowrank => 3,
            Family::Independence => 4,
            Family::Sphericity => 5,
        }
    }

    /// The snake_case name used in reports and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Family::Uniformity => "uniformity",
            Family::Location => "location",
            Family::Serial => "serial",
            Family::SerialLowrank => "serial_lowrank",
            Family::Independence => "independence",
            Family::Sphericity => "sphericity",
        }
    }

    /// Whether the family consumes a maximum lag `H`.
    pub fn uses_lag(self) -> bool {
        matches!(self, Family::Serial | Family::SerialLowrank)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
                Error::config(format!("unknown family {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Sample dimensions attached to a test outcome.
///
/// `q`, `h_max` and `theta0` are present only for the families that use
/// them, and are omitted from serialized output otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMeta {
    /// Number of observations.
    pub n: usize,
    /// Dimension of each observation.
    pub p: usize,
    /// Second block dimension (independence only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Maximum lag (serial families only).
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<usize>,
    /// Hypothesized location (location family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

impl TestMeta {
    /// Metadata for the single-sample families.
    pub fn sample(n: usize, p: usize) -> Self {
        TestMeta { n, p, q: None, h_max: None, theta0: None }
    }

    /// Attaches the second block dimension.
    pub fn with_q(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    /// Attaches the maximum lag.
    pub fn with_lag(mut self, h_max: usize) -> Self {
        self.h_max = Some(h_max);
        self
    }

    /// Attaches the hypothesized location.
    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Self {
        self.theta0 = Some(theta0);
        self
    }
}

/// A completed hypothesis test: the statistic pair together with p-values
/// and decisions in both regimes.
///
/// The universal p-value treats the standardized statistic as standard
/// normal and is trustworthy whenever either the sample size or the
/// dimension is large. The fixed-dimension p-value treats the raw statistic
/// as chi-square with `pair.dof` degrees of freedom and needs the sample
/// size to dominate the dimension. Both are always reported; rejection uses
/// the strict comparison `p < alpha`, so a p-value landing exactly on the
/// level does not reject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// Which test family produced this outcome.
    pub family: Family,
    /// Raw and standardized statistic values with degrees of freedom.
    pub pair: StatisticPair,
    /// Upper-tail p-value under the standard normal reference.
    pub p_value_universal: Probability,
    /// Upper-tail p-value under the chi-square reference.
    pub p_value_fixed: Probability,
    /// Nominal level the decisions were taken at.
    pub alpha: Probability,
    /// Whether `p_value_universal < alpha`.
    pub reject_universal: bool,
    /// Whether `p_value_fixed < alpha`.
    pub reject_fixed: bool,
    /// Dimensions of the data the statistic was computed from.
    pub meta: TestMeta,
}

/// Turns a statistic pair into p-values and decisions at level `alpha`.
///
/// Both regimes are one-sided upper-tail tests. The raw statistic is
/// clamped at zero before the chi-square lookup: raw values reconstructed
/// from a deeply negative standardized statistic can land below the
/// chi-square support, and everything below the support has upper tail one.
///
/// # Errors
///
/// `alpha` must lie strictly between 0 and 1.
///
/// ```
/// use hdsign::{evaluate, Family, Probability, StatisticPair, TestMeta};
///
/// let pair = StatisticPair { raw: 4.0, standardized: 1.0, dof: 2 };
/// let alpha = Probability::new(0.05).unwrap();
/// let out = evaluate(Family::Uniformity, pair, alpha, TestMeta::sample(2, 2)).unwrap();
/// assert!((out.p_value_universal.value() - 0.1587).abs() < 1e-4);
/// assert!(!out.reject_universal);
/// ```
pub fn evaluate(
    family: Family,
    pair: StatisticPair,
    alpha: Probability,
    meta: TestMeta,
) -> Result<TestOutcome> {
    let a = alpha.value();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!(
            "significance level must satisfy 0 < alpha < 1, got {a}"
        )));
    }
    let p_value_universal = std_normal_cdf(-pair.standardized)?;
    let p_value_fixed = Probability::new(chi2_upper(pair.raw.max(0.0), pair.dof)?)?;
    Ok(TestOutcome {
        family,
        pair,
        reject_universal: p_value_universal.value() < a,
        reject_fixed: p_value_fixed.value() < a,
        p_value_universal,
        p_value_fixed,
        alpha,
        meta,
    })
}
