//! Deterministic random streams and samplers on the unit sphere.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`], a
//! counter-style handle identified by a master seed and a path of child
//! indices. Two streams with different paths are statistically independent,
//! and the same stream always replays the same bytes regardless of thread
//! count or platform, which is what makes whole simulation grids
//! reproducible and safely parallel.

use ndarray::{Array2, ArrayView1};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Rows of observation matrices must have Euclidean norm within this
/// distance of 1 to count as directions on the sphere.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Location parameters are held to a tighter tolerance than data rows.
pub const AXIS_UNIT_TOL: f64 = 1e-12;

/// Rows with norm at or below this threshold have no direction at all.
const DEGENERATE_NORM: f64 = 1e-300;

/// Tangent projections shorter than this are treated as parallel to the axis.
pub(crate) const PROJECTION_TOL: f64 = 1e-12;

const STREAM_DOMAIN_TAG: &[u8] = b"hdsign.stream.v1";

/// A splittable, replayable source of randomness.
///
/// The generator state is a pure function of `(master_seed, path)`, so a
/// stream can be reconstructed anywhere without serializing generator
/// internals. Children are derived with [`RngStream::child`]; sibling
/// streams never share output.
///
/// ```
/// use hdsign::RngStream;
///
/// let root = RngStream::new(42);
/// let replicate = root.child(3).child(17);
/// assert_eq!(replicate.path(), &[3, 17]);
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    /// Root stream for a given master seed, with an empty path.
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, path: Vec::new() }
    }

    /// Child stream obtained by appending `index` to the path.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self { master_seed: self.master_seed, path }
    }

    /// The master seed this stream was derived from.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The child-index path below the root.
    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Instantiates the generator: the seed is a SHA-256 digest over a
    /// domain tag, the master seed, and the length-prefixed path, so
    /// distinct paths cannot collide by concatenation.
    fn generator(&self) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(STREAM_DOMAIN_TAG);
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update((self.path.len() as u64).to_le_bytes());
        for segment in &self.path {
            hasher.update(segment.to_le_bytes());
        }
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}

/// Builds the stream for `master_seed` with the given path in one step.
pub fn derive_stream(master_seed: u64, path: &[u64]) -> RngStream {
    RngStream { master_seed, path: path.to_vec() }
}

/// Standard normal variates over a stream, generated by the polar method
/// with the usual spare-value cache. Also hands out the uniforms that the
/// rejection samplers interleave with Gaussian draws.
pub(crate) struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub(crate) fn new(stream: &RngStream) -> Self {
        Self { rng: stream.generator(), spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub(crate) fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub(crate) fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform01() - 1.0;
            let v = 2.0 * self.uniform01() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    /// Fills an `n` by `p` matrix in row-major draw order.
    pub(crate) fn gaussian_matrix(&mut self, n: usize, p: usize) -> Array2<f64> {
        let mut m = Array2::zeros((n, p));
        for i in 0..n {
            for j in 0..p {
                m[[i, j]] = self.next_gaussian();
            }
        }
        m
    }
}

/// Scales `row` to unit norm in place and returns the original norm.
///
/// Shared by every code path that produces sphere points, so that samplers
/// which are supposed to agree bit for bit really do.
fn normalize_row(row: &mut [f64]) -> Result<f64> {
    let mut sq = 0.0;
    for v in row.iter() {
        if !v.is_finite() {
            return Err(Error::domain("observation entries must be finite"));
        }
        sq += v * v;
    }
    let norm = sq.sqrt();
    if norm <= DEGENERATE_NORM {
        return Err(Error::DegenerateRow { row: 0, norm });
    }
    for v in row.iter_mut() {
        *v /= norm;
    }
    Ok(norm)
}

/// Projects each row of `x` onto the unit sphere.
///
/// # Errors
///
/// Rejects empty matrices, non-finite entries, and rows with norm at or
/// below `1e-300`, which carry no usable direction.
pub fn normalize_rows(x: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::dims("observation matrix must have at least one row and one column"));
    }
    let mut out = x.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        normalize_row(row.as_slice_mut().expect("owned matrix rows are contiguous"))
            .map_err(|e| match e {
                Error::DegenerateRow { norm, .. } => Error::DegenerateRow { row: i, norm },
                other => other,
            })?;
    }
    Ok(out)
}

/// An `n` by `p` matrix whose rows are unit vectors, checked on entry.
///
/// All statistic evaluators take this type, so norm violations surface at
/// the boundary once instead of deep inside a Gram computation.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVectorSample {
    rows: Array2<f64>,
}

impl UnitVectorSample {
    /// Wraps a matrix of direction rows.
    ///
    /// # Errors
    ///
    /// Returns [`Error::NotUnit`] for the first row whose norm differs from
    /// 1 by more than [`UNIT_NORM_TOL`], and a dimension error for an empty
    /// matrix.
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        let (n, p) = rows.dim();
        if n == 0 || p == 0 {
            return Err(Error::dims("sample must have at least one row and one column"));
        }
        for (i, row) in rows.rows().into_iter().enumerate() {
            let mut sq = 0.0;
            for v in row.iter() {
                if !v.is_finite() {
                    return Err(Error::domain("sample entries must be finite"));
                }
                sq += v * v;
            }
            let norm = sq.sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnit { row: i, norm, tol: UNIT_NORM_TOL });
            }
        }
        Ok(Self { rows })
    }

    /// Normalizes raw observations and wraps the result.
    pub fn from_observations(x: &Array2<f64>) -> Result<Self> {
        Ok(Self { rows: normalize_rows(x)? })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    /// The direction rows.
    pub fn rows(&self) -> ndarray::ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Consumes the sample, returning the underlying matrix.
    pub fn into_rows(self) -> Array2<f64> {
        self.rows
    }
}

/// Angular density shapes for rotationally symmetric laws on the sphere.
///
/// A rotationally symmetric distribution with axis `theta0` has density
/// proportional to `f(theta0' u)` with respect to the uniform measure; the
/// variants here fix the generator `f`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularKind {
    /// `f(w) = 1`: the uniform distribution, for which the axis is moot.
    Uniform,
    /// `f(w) = exp(kappa * w)` with concentration `kappa` in `[0, 500]`.
    VonMisesFisher { kappa: f64 },
    /// `f(w) = 1 + slope * w` with `|slope| <= 1` so the density stays
    /// nonnegative.
    Linear { slope: f64 },
}

impl AngularKind {
    /// Checks the shape parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            AngularKind::Uniform => Ok(()),
            AngularKind::VonMisesFisher { kappa } => {
                if !kappa.is_finite() || !(0.0..=500.0).contains(&kappa) {
                    Err(Error::config(format!(
                        "von Mises-Fisher concentration must lie in [0, 500], got {kappa}"
                    )))
                } else {
                    Ok(())
                }
            }
            AngularKind::Linear { slope } => {
                if !slope.is_finite() || slope.abs() > 1.0 {
                    Err(Error::config(format!(
                        "linear angular slope must lie in [-1, 1], got {slope}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Draws `n` points uniformly on the sphere in `p` dimensions.
///
/// Each row consumes exactly `p` Gaussian variates from the stream, filled
/// row by row, so the output is a pure function of the stream identity.
pub fn sample_uniform(stream: &RngStream, n: usize, p: usize) -> Result<UnitVectorSample> {
    if n == 0 || p == 0 {
        return Err(Error::dims("sample dimensions must be positive"));
    }
    let mut g = GaussianStream::new(stream);
    let mut m = g.gaussian_matrix(n, p);
    for mut row in m.rows_mut() {
        normalize_row(row.as_slice_mut().expect("freshly drawn matrix rows are contiguous"))?;
    }
    Ok(UnitVectorSample { rows: m })
}

/// Draws `n` points from the rotationally symmetric law with angular shape
/// `kind` and axis `theta0`.
///
/// Uniform and von Mises-Fisher shapes run whole-sphere rejection: propose
/// uniformly, accept with probability `f(w) / max f`. When the acceptance
/// ratio is exactly 1 the acceptance uniform is skipped, which makes the
/// `kappa = 0` sampler replay the uniform sampler bit for bit. The linear
/// shape inverts a tabulated CDF of the colatitude density
/// `f(cos t) * sin(t)^(p-2)` instead, whose rejection bound would be loose.
///
/// # Errors
///
/// Rejects invalid shape parameters, a `theta0` whose length is not `p` or
/// whose norm strays from 1 by more than [`AXIS_UNIT_TOL`], and empty
/// dimensions.
pub fn sample_rotsym(
    stream: &RngStream,
    n: usize,
    p: usize,
    kind: AngularKind,
    theta0: ArrayView1<'_, f64>,
) -> Result<UnitVectorSample> {
    if n == 0 || p == 0 {
        return Err(Error::dims("sample dimensions must be positive"));
    }
    kind.validate()?;
    check_axis(theta0, p)?;
    let mut g = GaussianStream::new(stream);
    let rows = match kind {
        AngularKind::Uniform => rejection_rows(&mut g, n, p, theta0, |_| 1.0)?,
        AngularKind::VonMisesFisher { kappa } => {
            rejection_rows(&mut g, n, p, theta0, move |w| (kappa * (w - 1.0)).exp())?
        }
        AngularKind::Linear { slope } => {
            if p == 1 {
                let bound = 1.0 + slope.abs();
                rejection_rows(&mut g, n, p, theta0, move |w| (1.0 + slope * w) / bound)?
            } else {
                linear_rows(&mut g, n, p, theta0, slope)?
            }
        }
    };
    Ok(UnitVectorSample { rows })
}

pub(crate) fn check_axis(theta0: ArrayView1<'_, f64>, p: usize) -> Result<()> {
    if theta0.len() != p {
        return Err(Error::dims(format!(
            "axis has length {} but the ambient dimension is {p}",
            theta0.len()
        )));
    }
    let mut sq = 0.0;
    for v in theta0.iter() {
        if !v.is_finite() {
            return Err(Error::domain("axis entries must be finite"));
        }
        sq += v * v;
    }
    let norm = sq.sqrt();
    if (norm - 1.0).abs() > AXIS_UNIT_TOL {
        return Err(Error::NotUnit { row: 0, norm, tol: AXIS_UNIT_TOL });
    }
    Ok(())
}

/// Whole-sphere rejection with acceptance ratio `ratio(w)` against the
/// uniform proposal, `w` being the cosine of the angle to the axis.
fn rejection_rows(
    g: &mut GaussianStream,
    n: usize,
    p: usize,
    theta0: ArrayView1<'_, f64>,
    ratio: impl Fn(f64) -> f64,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n, p));
    let mut proposal = vec![0.0f64; p];
    for i in 0..n {
        loop {
            for slot in proposal.iter_mut() {
                *slot = g.next_gaussian();
            }
            normalize_row(&mut proposal)?;
            let w: f64 = proposal.iter().zip(theta0.iter()).map(|(a, b)| a * b).sum();
            let r = ratio(w);
            if r >= 1.0 || g.uniform01() <= r {
                for (k, v) in proposal.iter().enumerate() {
                    out[[i, k]] = *v;
                }
                break;
            }
        }
    }
    Ok(out)
}

/// Number of panels in the tabulated colatitude CDF for the linear shape.
const ANGLE_PANELS: usize = 4096;

/// Inverse-CDF sampling for the linear shape in dimension two or more.
///
/// Works in the colatitude variable, where the density
/// `(1 + slope cos t) sin(t)^(p-2)` is bounded for every `p >= 2`; the
/// cosine variable would have endpoint singularities at `p = 2`. Each row
/// consumes one uniform for the angle and then `p` Gaussians per attempt at
/// a tangent direction, retrying in the measure-zero event that the
/// proposal is parallel to the axis.
fn linear_rows(
    g: &mut GaussianStream,
    n: usize,
    p: usize,
    theta0: ArrayView1<'_, f64>,
    slope: f64,
) -> Result<Array2<f64>> {
    let (thetas, cdf) = linear_angle_table(slope, p);
    let mut out = Array2::zeros((n, p));
    let mut z = vec![0.0f64; p];
    for i in 0..n {
        let angle = invert_angle_cdf(&thetas, &cdf, g.uniform01());
        let w = angle.cos();
        let tangent_len = (1.0 - w * w).max(0.0).sqrt();
        loop {
            for slot in z.iter_mut() {
                *slot = g.next_gaussian();
            }
            let c: f64 = z.iter().zip(theta0.iter()).map(|(a, b)| a * b).sum();
            let mut sq = 0.0;
            for (slot, t) in z.iter_mut().zip(theta0.iter()) {
                *slot -= c * t;
                sq += *slot * *slot;
            }
            let norm = sq.sqrt();
            if norm > PROJECTION_TOL {
                for k in 0..p {
                    out[[i, k]] = w * theta0[k] + tangent_len * z[k] / norm;
                }
                break;
            }
        }
    }
    Ok(out)
}

/// Tabulates the normalized colatitude CDF on a uniform grid over `[0, pi]`
/// by cumulative trapezoids.
fn linear_angle_table(slope: f64, p: usize) -> (Vec<f64>, Vec<f64>) {
    let m = ANGLE_PANELS;
    let mut thetas = Vec::with_capacity(m + 1);
    let mut density = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let t = std::f64::consts::PI * k as f64 / m as f64;
        thetas.push(t);
        density.push((1.0 + slope * t.cos()) * t.sin().powi(p as i32 - 2));
    }
    let mut cdf = vec![0.0f64; m + 1];
    for k in 1..=m {
        cdf[k] = cdf[k - 1] + 0.5 * (density[k - 1] + density[k]) * (thetas[k] - thetas[k - 1]);
    }
    let total = cdf[m];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    (thetas, cdf)
}

/// Piecewise-linear inversion of a tabulated CDF.
fn invert_angle_cdf(thetas: &[f64], cdf: &[f64], u: f64) -> f64 {
    let mut lo = 0usize;
    let mut hi = cdf.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cdf[mid] < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let span = cdf[hi] - cdf[lo];
    let frac = if span > 0.0 { (u - cdf[lo]) / span } else { 0.0 };
    thetas[lo] + frac * (thetas[hi] - thetas[lo])
}
