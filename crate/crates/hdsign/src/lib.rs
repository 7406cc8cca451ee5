//! Sign tests for high-dimensional directional data.
//!
//! The crate reduces multivariate observations to their spatial signs,
//! the unit vectors `X / ‖X‖`, and builds five hypothesis tests on top
//! of that reduction: uniformity of directions, location about a fixed
//! axis, serial independence of a sequence, independence of two blocks,
//! and sphericity of a scatter matrix. Each statistic comes as a
//! [`StatisticPair`] holding a raw value, calibrated against a
//! chi-square when the dimension is small and fixed, and a standardized
//! value, calibrated against a standard normal no matter how the
//! dimension compares to the sample size. [`evaluate`] turns a pair into
//! p-values and reject decisions under both readings.
//!
//! ```
//! use hdsign::{
//!     derive_stream, evaluate, rayleigh, sample_rotsym, AngularKind, Family, Probability,
//!     TestMeta,
//! };
//! use ndarray::Array1;
//!
//! let axis = Array1::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
//! let rng = derive_stream(5, &[]);
//! let kind = AngularKind::VonMisesFisher { kappa: 4.0 };
//! let sample = sample_rotsym(&rng, 80, 6, kind, axis.view())?;
//!
//! let outcome = evaluate(
//!     Family::Uniformity,
//!     rayleigh(&sample),
//!     Probability::new(0.05)?,
//!     TestMeta::sample(80, 6),
//! )?;
//! assert!(outcome.reject_universal && outcome.reject_fixed);
//! # Ok::<(), hdsign::Error>(())
//! ```
//!
//! Statistics are exact functions of the Gram matrix of the signs, so
//! two code paths that agree on the input bytes agree on the output
//! bytes. The same discipline extends to the Monte-Carlo layer:
//! [`run_grid`] derives one RNG stream per replicate from a master seed
//! and produces reports that are byte-identical for any worker count.
//! [`rho_even_moment`] supplies exact null moments to check the whole
//! stack against.
//!
//! The guide under `book/` walks through each layer; every code block
//! in it compiles and runs as part of this crate's doc-tests.

#[cfg(doctest)]
mod book;

mod distributions;
mod inference;
mod error;
mod harness;
mod report;
mod sampling;
mod statistics;

pub use distributions::{
    beta_cdf, chi2_cdf, chi2_quantile, ks_distance, rho_even_moment, std_normal_cdf,
    std_normal_quantile, KsDistance, MomentValue, Probability,
};
pub use error::{Error, Result};
pub use harness::{
    independence_split, run_cell, run_grid, run_grid_observed, CellSummary, Histogram,
    NullModel, Provenance, SimulationConfig, SimulationReport, HISTOGRAM_BINS,
    HISTOGRAM_RANGE, SCHEMA_VERSION,
};
pub use inference::{evaluate, Family, TestMeta, TestOutcome};
pub use report::{
    canonical_json, emit_histogram_data, histogram_table, read_report, to_csv, to_json,
    write_report, ReportFile, ReportFormat,
};
pub use sampling::{
    derive_stream, normalize_rows, sample_rotsym, sample_uniform, AngularKind, RngStream,
    UnitVectorSample, AXIS_UNIT_TOL, UNIT_NORM_TOL,
};
pub use statistics::{
    gram, independence, location, portmanteau, portmanteau_lowrank, rayleigh, sign_autocorr,
    sphericity, tangent_signs, GramMatrix, SignAutocorr, StatisticPair,
};
