//! Deterministic parallel Monte-Carlo engine: draws null samples cell by
//! cell over an `(n, p)` grid, evaluates the chosen statistic on every
//! replicate, and condenses each cell into moments, a histogram, tail
//! rejection rates, and a normality distance.
//!
//! Replicate `r` of cell `(n, p)` always reads from the stream derived at
//! `[family_id, n, p, r]`, so results depend only on the configuration and
//! the master seed, never on worker count or scheduling.

use std::time::Instant;

use ndarray::{s, Array1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{chi2_upper, ks_distance, std_normal_cdf, KsDistance, Probability};
use crate::error::{Error, Result};
use crate::inference::Family;
use crate::sampling::{
    derive_stream, sample_rotsym, sample_uniform, AngularKind, RngStream, UnitVectorSample,
};
use crate::statistics::{
    check_lag_range, independence, location, portmanteau, portmanteau_lowrank, rayleigh,
    sphericity, StatisticPair,
};

/// Version stamped into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;

/// Number of histogram bins.
pub const HISTOGRAM_BINS: usize = 60;

/// Histogram support; standardized statistics essentially never leave it.
pub const HISTOGRAM_RANGE: (f64, f64) = (-5.0, 5.0);

/// Replicate values are kept for the normality distance up to this count.
const RETENTION_LIMIT: u64 = 1_000_000;

/// Replicates dispatched to the worker pool per batch.
const CHUNK: u64 = 65_536;

/// Working-set ceiling a cell may plan for before it is refused.
const MEMORY_BUDGET_BYTES: u128 = 2 << 30;

/// The sampling law replicates are drawn from.
///
/// `UniformSphere` and `GaussianDirections` coincide: the direction of a
/// standard Gaussian vector is uniform on the sphere, and both are
/// implemented by normalizing Gaussian rows, so the two tags produce
/// byte-identical runs. Both are kept so configurations can record which
/// framing was meant. `Rotsym` draws from a rotationally symmetric law
/// about the first canonical basis vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NullModel {
    /// Signs uniform on the unit sphere.
    #[default]
    UniformSphere,
    /// Directions of standard Gaussian vectors.
    GaussianDirections,
    /// Rotationally symmetric law with the given angular density.
    Rotsym {
        /// Angular density of the cosine against the symmetry axis.
        angular: AngularKind,
    },
}

fn default_alpha() -> Probability {
    Probability::new(0.05).expect("0.05 is a probability")
}

fn default_lag() -> usize {
    3
}

fn default_workers() -> usize {
    1
}

/// Everything a simulation run depends on.
///
/// The grid is the cross product `grid_n` by `grid_p`. For the independence
/// family a grid dimension `p` is split into two blocks of `p = q =
/// round(p/2)`, each at least 1, mirroring the equal-block design the
/// statistic is usually studied under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Statistic family to simulate.
    pub family: Family,
    /// Sample sizes, one per grid row.
    pub grid_n: Vec<usize>,
    /// Dimensions, one per grid column.
    pub grid_p: Vec<usize>,
    /// Replicates per cell.
    #[serde(rename = "M")]
    pub replicates: u64,
    /// Root of every derived random stream.
    pub master_seed: u64,
    /// Level for the tail rejection rates.
    #[serde(default = "default_alpha")]
    pub alpha: Probability,
    /// Maximum lag, read only by the serial families.
    #[serde(rename = "H", default = "default_lag")]
    pub h_max: usize,
    /// Sampling law for the replicates.
    #[serde(default)]
    pub null_model: NullModel,
    /// Worker threads. Results never depend on this, so it is accepted
    /// from config files but kept out of serialized reports, which must
    /// come out byte-identical for every worker count.
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
}

impl SimulationConfig {
    /// Checks every field against its documented range.
    ///
    /// # Errors
    ///
    /// Returns a configuration error naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.grid_n.is_empty() {
            return Err(Error::config("grid_n must not be empty"));
        }
        if self.grid_p.is_empty() {
            return Err(Error::config("grid_p must not be empty"));
        }
        if let Some(bad) = self.grid_n.iter().find(|&&n| n == 0) {
            return Err(Error::config(format!("grid_n entries must be positive, found {bad}")));
        }
        if let Some(bad) = self.grid_p.iter().find(|&&p| p == 0) {
            return Err(Error::config(format!("grid_p entries must be positive, found {bad}")));
        }
        if self.replicates == 0 {
            return Err(Error::config("M must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        let a = self.alpha.value();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::config(format!("alpha must lie strictly in (0, 1), got {a}")));
        }
        if self.family.uses_lag() && self.h_max == 0 {
            return Err(Error::config("H must be at least 1 for the serial families"));
        }
        if let NullModel::Rotsym { angular } = self.null_model {
            angular.validate()?;
        }
        Ok(())
    }
}

/// Fixed-width histogram of standardized statistics.
///
/// Bins partition `[lo, hi]` evenly; values outside are counted in the
/// nearest end bin so the bin counts always sum to the replicate count, and
/// the clamp counters record how often that happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Left edge of the first bin.
    pub lo: f64,
    /// Right edge of the last bin.
    pub hi: f64,
    /// Occupancy per bin.
    pub counts: Vec<u64>,
    /// Values below `lo`, clamped into the first bin.
    pub clamped_low: u64,
    /// Values above `hi`, clamped into the last bin.
    pub clamped_high: u64,
}

impl Histogram {
    /// An empty histogram over the standard support.
    pub fn new() -> Self {
        Histogram {
            lo: HISTOGRAM_RANGE.0,
            hi: HISTOGRAM_RANGE.1,
            counts: vec![0; HISTOGRAM_BINS],
            clamped_low: 0,
            clamped_high: 0,
        }
    }

    /// Width shared by all bins.
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Midpoints of the bins, in order.
    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    /// Total occupancy across all bins.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn record(&mut self, x: f64) {
        let last = self.counts.len() - 1;
        let idx = if x < self.lo {
            self.clamped_low += 1;
            0
        } else if x > self.hi {
            self.clamped_high += 1;
            last
        } else {
            (((x - self.lo) / self.bin_width()) as usize).min(last)
        };
        self.counts[idx] += 1;
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram::new()
    }
}

/// One-pass accumulator for the first three central moments.
#[derive(Clone, Debug, Default)]
struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
}

impl MomentAccumulator {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let k = self.count as f64;
        let delta = x - self.mean;
        let delta_k = delta / k;
        let term = delta * delta_k * (k - 1.0);
        self.m3 += term * delta_k * (k - 2.0) - 3.0 * delta_k * self.m2;
        self.m2 += term;
        self.mean += delta_k;
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; 0 by convention for fewer than two values.
    fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standardized third central moment; 0 when the spread vanishes.
    fn skewness(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let k = self.count as f64;
        let var = self.m2 / k;
        if var <= 0.0 {
            0.0
        } else {
            (self.m3 / k) / var.powf(1.5)
        }
    }
}

/// Summary of one grid cell.
///
/// `p` and `q` are the dimensions the statistic actually saw: for the
/// independence family a grid value is split into two blocks, and for every
/// other family `q` is absent. `stream_path` is the derivation prefix of
/// this cell's replicate streams and always records the grid coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Statistic family the cell simulated.
    pub family: Family,
    /// Sample size.
    pub n: usize,
    /// First block dimension.
    pub p: usize,
    /// Second block dimension (independence only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Maximum lag (serial families only).
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<usize>,
    /// Replicates evaluated.
    #[serde(rename = "M")]
    pub replicates: u64,
    /// Empirical mean of the standardized statistic.
    pub mean: f64,
    /// Empirical variance of the standardized statistic.
    pub variance: f64,
    /// Empirical skewness of the standardized statistic.
    pub skewness: f64,
    /// Distance to the standard normal; absent when replicate values were
    /// not retained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_normal: Option<KsDistance>,
    /// Share of replicates with universal p-value below the level.
    pub rejection_rate_universal: f64,
    /// Share of replicates with fixed-dimension p-value below the level.
    pub rejection_rate_fixed: f64,
    /// Distribution of the standardized statistic.
    pub histogram: Histogram,
    /// `[family_id, n, p]`, the prefix replicate indices are appended to.
    pub stream_path: Vec<u64>,
}

/// Build metadata and timing attached to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Name and version of the producing library.
    pub software: String,
    /// Wall-clock duration of the run. This is the one field that varies
    /// between otherwise identical runs; comparisons of report files should
    /// go through the canonical form that zeroes it.
    pub wall_time_seconds: f64,
}

/// A full simulation run: configuration echo, one summary per cell, and
/// provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    /// Format version of this document.
    pub schema_version: u32,
    /// The configuration the run was produced from.
    pub config: SimulationConfig,
    /// Cell summaries in row-major grid order.
    pub cells: Vec<CellSummary>,
    /// Build and timing metadata.
    pub provenance: Provenance,
}

fn provenance(started: Instant) -> Provenance {
    Provenance {
        software: format!("hdsign {}", env!("CARGO_PKG_VERSION")),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Equal-block split used by the independence family: both blocks get
/// `round(p/2)`, floored at 1.
pub fn independence_split(p: usize) -> usize {
    ((p as f64 / 2.0).round() as usize).max(1)
}

fn first_basis_vector(p: usize) -> Array1<f64> {
    let mut e1 = Array1::zeros(p);
    e1[0] = 1.0;
    e1
}

fn draw(model: NullModel, stream: &RngStream, n: usize, p: usize) -> Result<UnitVectorSample> {
    match model {
        NullModel::UniformSphere | NullModel::GaussianDirections => sample_uniform(stream, n, p),
        NullModel::Rotsym { angular } => {
            sample_rotsym(stream, n, p, angular, first_basis_vector(p).view())
        }
    }
}

fn replicate_pair(
    config: &SimulationConfig,
    n: usize,
    p: usize,
    replicate: u64,
) -> Result<StatisticPair> {
    let stream = derive_stream(
        config.master_seed,
        &[config.family.id(), n as u64, p as u64, replicate],
    );
    match config.family {
        Family::Uniformity => Ok(rayleigh(&draw(config.null_model, &stream, n, p)?)),
        Family::Location => {
            let u = draw(config.null_model, &stream, n, p)?;
            location(&u, first_basis_vector(p).view())
        }
        Family::Serial => portmanteau(&draw(config.null_model, &stream, n, p)?, config.h_max),
        Family::SerialLowrank => {
            portmanteau_lowrank(&draw(config.null_model, &stream, n, p)?, config.h_max)
        }
        Family::Independence => {
            let block = independence_split(p);
            let both = draw(config.null_model, &stream, 2 * n, block)?;
            let rows = both.into_rows();
            let u = UnitVectorSample::new(rows.slice(s![..n, ..]).to_owned())?;
            let v = UnitVectorSample::new(rows.slice(s![n.., ..]).to_owned())?;
            independence(&u, &v)
        }
        Family::Sphericity => sphericity(&draw(config.null_model, &stream, n, p)?),
    }
}

struct ReplicateOutcome {
    standardized: f64,
    reject_universal: bool,
    reject_fixed: bool,
}

fn run_replicate(
    config: &SimulationConfig,
    n: usize,
    p: usize,
    replicate: u64,
) -> Result<ReplicateOutcome> {
    let pair = replicate_pair(config, n, p, replicate)?;
    let alpha = config.alpha.value();
    let p_universal = std_normal_cdf(-pair.standardized)?.value();
    let p_fixed = chi2_upper(pair.raw.max(0.0), pair.dof)?;
    Ok(ReplicateOutcome {
        standardized: pair.standardized,
        reject_universal: p_universal < alpha,
        reject_fixed: p_fixed < alpha,
    })
}

fn capacity_check(config: &SimulationConfig, n: usize, p: usize) -> Result<()> {
    let m = config.replicates;
    let (rows, cols) = if config.family == Family::Independence {
        (2 * n as u128, independence_split(p) as u128)
    } else {
        (n as u128, p as u128)
    };
    let per_replicate = 8 * (rows * cols + 2 * (n as u128) * (n as u128));
    let retained = if m <= RETENTION_LIMIT { 8 * m as u128 } else { 0 };
    let chunk = 16 * CHUNK.min(m) as u128;
    let estimated_bytes =
        per_replicate * config.workers as u128 + retained + chunk + 8 * HISTOGRAM_BINS as u128;
    if estimated_bytes > MEMORY_BUDGET_BYTES {
        return Err(Error::Capacity {
            n,
            p,
            m: m as usize,
            product: n as u128 * p as u128 * m as u128,
            estimated_bytes,
            budget_bytes: MEMORY_BUDGET_BYTES,
        });
    }
    Ok(())
}

fn precheck_cell(config: &SimulationConfig, n: usize, p: usize) -> Result<()> {
    if config.family.uses_lag() {
        check_lag_range(config.h_max, n)?;
    }
    capacity_check(config, n, p)
}

fn cell_body(config: &SimulationConfig, n: usize, p: usize) -> Result<CellSummary> {
    precheck_cell(config, n, p)?;
    let m = config.replicates;
    let mut moments = MomentAccumulator::default();
    let mut histogram = Histogram::new();
    let mut retained: Option<Vec<f64>> =
        (m <= RETENTION_LIMIT).then(|| Vec::with_capacity(m as usize));
    let mut rejections_universal = 0u64;
    let mut rejections_fixed = 0u64;

    let mut start = 0u64;
    while start < m {
        let end = (start + CHUNK).min(m);
        let outcomes: Vec<Result<ReplicateOutcome>> =
            (start..end).into_par_iter().map(|r| run_replicate(config, n, p, r)).collect();
        for outcome in outcomes {
            let outcome = outcome?;
            moments.push(outcome.standardized);
            histogram.record(outcome.standardized);
            if let Some(values) = retained.as_mut() {
                values.push(outcome.standardized);
            }
            rejections_universal += u64::from(outcome.reject_universal);
            rejections_fixed += u64::from(outcome.reject_fixed);
        }
        start = end;
    }
    debug_assert_eq!(histogram.total(), m);

    let ks_normal = match retained {
        Some(mut values) => {
            values.sort_unstable_by(f64::total_cmp);
            Some(ks_distance(&values, |x| {
                std_normal_cdf(x).map(Probability::value).unwrap_or(f64::NAN)
            })?)
        }
        None => None,
    };
    let (q, p_used) = if config.family == Family::Independence {
        let block = independence_split(p);
        (Some(block), block)
    } else {
        (None, p)
    };
    Ok(CellSummary {
        family: config.family,
        n,
        p: p_used,
        q,
        h_max: config.family.uses_lag().then_some(config.h_max),
        replicates: m,
        mean: moments.mean(),
        variance: moments.variance(),
        skewness: moments.skewness(),
        ks_normal,
        rejection_rate_universal: rejections_universal as f64 / m as f64,
        rejection_rate_fixed: rejections_fixed as f64 / m as f64,
        histogram,
        stream_path: vec![config.family.id(), n as u64, p as u64],
    })
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} worker thread(s): {e}")))
}

/// Simulates a single grid cell.
///
/// # Errors
///
/// Invalid configurations, statistic preconditions violated by `(n, p)`,
/// and cells whose planned working set exceeds the memory budget are all
/// reported before any replicate runs.
pub fn run_cell(config: &SimulationConfig, n: usize, p: usize) -> Result<CellSummary> {
    config.validate()?;
    let pool = worker_pool(config.workers)?;
    pool.install(|| cell_body(config, n, p))
}

/// Simulates the full grid, invoking `observe` with each finished cell.
///
/// Cells run in row-major order over `grid_n` by `grid_p`. The observer is
/// for progress reporting; it sees each summary right after its cell
/// completes.
///
/// # Errors
///
/// A failing cell aborts the run with the grid coordinates of the failure
/// and the list of cells already completed.
pub fn run_grid_observed(
    config: &SimulationConfig,
    mut observe: impl FnMut(&CellSummary),
) -> Result<SimulationReport> {
    config.validate()?;
    let started = Instant::now();
    let pool = worker_pool(config.workers)?;
    let mut cells = Vec::with_capacity(config.grid_n.len() * config.grid_p.len());
    let mut completed: Vec<(usize, usize)> = Vec::new();
    for &n in &config.grid_n {
        for &p in &config.grid_p {
            match pool.install(|| cell_body(config, n, p)) {
                Ok(cell) => {
                    observe(&cell);
                    completed.push((n, p));
                    cells.push(cell);
                }
                Err(source) => {
                    return Err(Error::GridAborted {
                        n,
                        p,
                        source: Box::new(source),
                        completed,
                    })
                }
            }
        }
    }
    Ok(SimulationReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        cells,
        provenance: provenance(started),
    })
}

/// Simulates the full grid.
///
/// See [`run_grid_observed`] for the execution contract; this variant just
/// drops the per-cell progress.
pub fn run_grid(config: &SimulationConfig) -> Result<SimulationReport> {
    run_grid_observed(config, |_| {})
}
