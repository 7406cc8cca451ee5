//! The five sign-test statistic families, built on a shared Gram kernel.
//!
//! Every statistic here is a function of the pairwise inner products
//! `rho_ij = U_i'U_j` of unit direction vectors, never of the raw
//! coordinates. [`gram`] computes that matrix once; the statistic
//! evaluators then reduce it in O(n^2) or O(H n^2).
//!
//! Each family comes in two forms bundled as a [`StatisticPair`]: `raw`,
//! which is asymptotically chi-square with `dof` degrees of freedom when
//! the dimension is fixed, and `standardized`, which is asymptotically
//! standard normal as `n` and `p` grow jointly. The standardized value is
//! accumulated from the pairwise `i < j` sums directly; the raw value is
//! then `dof + sqrt(2 dof) * standardized`, which is algebraically the
//! full double sum but avoids subtracting a large centering constant from
//! a large total at high dimension.

use ndarray::{s, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::sampling::{check_axis, UnitVectorSample, PROJECTION_TOL};

/// The matrix of pairwise inner products of the observation directions.
///
/// Symmetric by construction: the upper triangle is computed and mirrored,
/// so `rho[i][j]` and `rho[j][i]` are the same float.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    rho: Array2<f64>,
}

impl GramMatrix {
    /// Number of observations.
    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    /// The inner-product matrix.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.rho.view()
    }

    fn as_slice(&self) -> &[f64] {
        self.rho.as_slice().expect("gram matrices are built row-major contiguous")
    }
}

/// A statistic in both of its calibrations.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StatisticPair {
    /// The fixed-dimension form, asymptotically chi-square with `dof`
    /// degrees of freedom.
    pub raw: f64,
    /// The universal form, asymptotically standard normal when both the
    /// sample size and the dimension grow.
    pub standardized: f64,
    /// Degrees of freedom of the fixed-dimension reference distribution.
    pub dof: u64,
}

impl StatisticPair {
    fn from_standardized(standardized: f64, dof: u64) -> Self {
        let raw = dof as f64 + (2.0 * dof as f64).sqrt() * standardized;
        Self { raw, standardized, dof }
    }

    fn from_raw(raw: f64, dof: u64) -> Self {
        let standardized = (raw - dof as f64) / (2.0 * dof as f64).sqrt();
        Self { raw, standardized, dof }
    }
}

/// A lag-`h` sign autocorrelation matrix together with its squared
/// Frobenius norm.
#[derive(Clone, Debug, PartialEq)]
pub struct SignAutocorr {
    /// The lag.
    pub h: usize,
    /// `(p/(n-h)) * sum_t U_t U_{t-h}'`, a `p` by `p` matrix.
    pub matrix: Array2<f64>,
    /// Sum of the squared entries of `matrix`.
    pub frobenius_sq: f64,
}

/// Computes the Gram matrix `rho_ij = U_i'U_j` of the sample rows.
///
/// Cost is one `n` by `n` by `p` matrix product. The strict lower triangle
/// is copied from the upper one afterwards, so exact symmetry survives any
/// asymmetry in the product kernel's summation order.
pub fn gram(sample: &UnitVectorSample) -> GramMatrix {
    let u = sample.rows();
    let product = u.dot(&u.t());
    let mut rho = if product.is_standard_layout() {
        product
    } else {
        // ndarray's thin-matrix fast paths can hand back transposed
        // storage, and the flat accumulators below need row-major rows.
        product.as_standard_layout().into_owned()
    };
    let n = rho.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            rho[[j, i]] = rho[[i, j]];
        }
    }
    GramMatrix { rho }
}

/// Sums a slice by cascading pairwise halving, which keeps the rounding
/// error growth logarithmic in the term count.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `sum_{i<j} f(rho_ij)` with per-row partials combined pairwise.
fn upper_sum(g: &GramMatrix, f: impl Fn(f64) -> f64) -> f64 {
    let n = g.n();
    let flat = g.as_slice();
    let mut partials = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let row = &flat[i * n..(i + 1) * n];
        partials.push(row[i + 1..].iter().map(|&v| f(v)).sum());
    }
    pairwise_sum(&partials)
}

/// `sum_{i<j} gu_ij * gv_ij` for the independence statistic.
fn upper_product_sum(gu: &GramMatrix, gv: &GramMatrix) -> f64 {
    let n = gu.n();
    let (fu, fv) = (gu.as_slice(), gv.as_slice());
    let mut partials = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let ru = &fu[i * n..(i + 1) * n];
        let rv = &fv[i * n..(i + 1) * n];
        partials.push(
            ru[i + 1..]
                .iter()
                .zip(&rv[i + 1..])
                .map(|(&a, &b)| a * b)
                .sum(),
        );
    }
    pairwise_sum(&partials)
}

/// `sum_{h <= s < t <= n-1} rho[s-h][t-h] * rho[s][t]` for one lag.
fn lagged_upper_sum(g: &GramMatrix, h: usize) -> f64 {
    let n = g.n();
    let flat = g.as_slice();
    let mut partials = Vec::with_capacity(n - h);
    for s in h..n.saturating_sub(1) {
        let row_cur = &flat[s * n..(s + 1) * n];
        let row_lag = &flat[(s - h) * n..(s - h + 1) * n];
        let mut acc = 0.0;
        for t in (s + 1)..n {
            acc += row_lag[t - h] * row_cur[t];
        }
        partials.push(acc);
    }
    pairwise_sum(&partials)
}

/// Shared core of the uniformity and location statistics: the sample is
/// treated as living on a sphere of effective dimension `dim`.
fn rayleigh_with_dim(sample: &UnitVectorSample, dim: usize) -> StatisticPair {
    let n = sample.n() as f64;
    let g = gram(sample);
    let upper = upper_sum(&g, |v| v);
    let standardized = (2.0 * dim as f64).sqrt() / n * upper;
    StatisticPair::from_standardized(standardized, dim as u64)
}

/// Rayleigh-type test of uniformity on the sphere.
///
/// `raw = (p/n) * sum_{i,j} rho_ij` is chi-square with `p` degrees of
/// freedom for fixed `p`; the standardized form
/// `(sqrt(2p)/n) * sum_{i<j} rho_ij` is standard normal when `n` and `p`
/// diverge together.
///
/// ```
/// use hdsign::{rayleigh, UnitVectorSample};
/// use ndarray::array;
///
/// let u = UnitVectorSample::new(array![[1.0, 0.0], [1.0, 0.0]]).unwrap();
/// let r = rayleigh(&u);
/// assert_eq!(r.raw, 4.0);
/// assert_eq!(r.standardized, 1.0);
/// ```
pub fn rayleigh(sample: &UnitVectorSample) -> StatisticPair {
    rayleigh_with_dim(sample, sample.p())
}

/// Projects each observation onto the tangent space at `theta0` and
/// renormalizes, producing the tangent signs used by the location test.
///
/// # Errors
///
/// Rejects a non-unit `theta0`, a dimension mismatch, and any row whose
/// tangent projection is shorter than `1e-12` (the row is then parallel to
/// the axis and carries no tangent direction).
pub fn tangent_signs(
    sample: &UnitVectorSample,
    theta0: ArrayView1<'_, f64>,
) -> Result<UnitVectorSample> {
    let (n, p) = (sample.n(), sample.p());
    check_axis(theta0, p)?;
    if p < 2 {
        return Err(Error::Domain(
            "tangent signs need ambient dimension p >= 2".to_string(),
        ));
    }
    let u = sample.rows();
    let mut w = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let row = u.row(i);
        let c: f64 = row.iter().zip(theta0.iter()).map(|(a, b)| a * b).sum();
        let mut sq = 0.0;
        for k in 0..p {
            let v = row[k] - c * theta0[k];
            w[[i, k]] = v;
            sq += v * v;
        }
        let norm = sq.sqrt();
        if norm <= PROJECTION_TOL {
            return Err(Error::Domain(format!(
                "row {i} is parallel to the location axis (projection norm {norm:e})"
            )));
        }
        for k in 0..p {
            w[[i, k]] /= norm;
        }
    }
    UnitVectorSample::new(w)
}

/// Sign test of the location hypothesis `theta = theta0` for rotationally
/// symmetric data.
///
/// Equals the Rayleigh statistic applied to the tangent signs, with
/// effective dimension `p - 1`; the tangent signs are uniform on the
/// tangent sphere under the null, whatever the angular density.
///
/// # Errors
///
/// As [`tangent_signs`].
pub fn location(
    sample: &UnitVectorSample,
    theta0: ArrayView1<'_, f64>,
) -> Result<StatisticPair> {
    let w = tangent_signs(sample, theta0)?;
    Ok(rayleigh_with_dim(&w, sample.p() - 1))
}

/// The lag-`h` sign autocorrelation matrix
/// `r(h) = (p/(n-h)) * sum_{t=h}^{n-1} U_t U_{t-h}'` (rows time-ordered,
/// indices zero-based).
///
/// # Errors
///
/// Requires `1 <= h <= n - 1`.
pub fn sign_autocorr(sample: &UnitVectorSample, h: usize) -> Result<SignAutocorr> {
    let (n, p) = (sample.n(), sample.p());
    if h == 0 || h >= n {
        return Err(Error::Domain(format!(
            "autocorrelation lag must satisfy 1 <= h <= n - 1, got h = {h} with n = {n}"
        )));
    }
    let u = sample.rows();
    let cur = u.slice(s![h.., ..]);
    let lag = u.slice(s![..n - h, ..]);
    let mut matrix = cur.t().dot(&lag);
    let scale = p as f64 / (n - h) as f64;
    matrix.mapv_inplace(|v| scale * v);
    let sq: Vec<f64> = matrix.iter().map(|&v| v * v).collect();
    let frobenius_sq = pairwise_sum(&sq);
    Ok(SignAutocorr { h, matrix, frobenius_sq })
}

pub(crate) fn check_lag_range(h_max: usize, n: usize) -> Result<()> {
    if h_max == 0 || h_max + 2 > n {
        return Err(Error::Domain(format!(
            "portmanteau horizon must satisfy 1 <= H <= n - 2, got H = {h_max} with n = {n}"
        )));
    }
    Ok(())
}

/// Portmanteau test of serial randomness over lags `1..=h_max`.
///
/// `raw = sum_h (n-h) * ||r(h)||_F^2` is chi-square with `H p^2` degrees
/// of freedom for fixed `p`. The standardized form sums the pairwise
/// products `rho_{s-h,t-h} rho_{st}` lag by lag:
/// `(sqrt(2 p^2)/sqrt(H)) * sum_h (n-h)^{-1} sum_{s<t} ...`.
///
/// # Errors
///
/// Requires `1 <= h_max <= n - 2`, so every lag keeps at least one
/// off-diagonal product.
pub fn portmanteau(sample: &UnitVectorSample, h_max: usize) -> Result<StatisticPair> {
    let (n, p) = (sample.n(), sample.p());
    check_lag_range(h_max, n)?;
    let g = gram(sample);
    let mut lag_terms = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        lag_terms.push(lagged_upper_sum(&g, h) / (n - h) as f64);
    }
    let total = pairwise_sum(&lag_terms);
    let pf = p as f64;
    let standardized = (2.0 * pf * pf).sqrt() / (h_max as f64).sqrt() * total;
    let dof = h_max as u64 * (p as u64) * (p as u64);
    Ok(StatisticPair::from_standardized(standardized, dof))
}

/// Lower-rank portmanteau test: one scalar runs statistic per lag instead
/// of a full `p` by `p` autocorrelation matrix.
///
/// `raw = sum_h (p/(n-h)) * (sum_t U_{t-h}'U_t)^2` is chi-square with `H`
/// degrees of freedom for fixed `p`, and the standardized form is the
/// affine map `(raw - H)/sqrt(2H)`.
///
/// # Errors
///
/// Requires `1 <= h_max <= n - 2`.
pub fn portmanteau_lowrank(sample: &UnitVectorSample, h_max: usize) -> Result<StatisticPair> {
    let (n, p) = (sample.n(), sample.p());
    check_lag_range(h_max, n)?;
    let g = gram(sample);
    let flat = g.as_slice();
    let mut lag_terms = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let mut acc = 0.0;
        for t in h..n {
            acc += flat[t * n + (t - h)];
        }
        lag_terms.push(p as f64 / (n - h) as f64 * acc * acc);
    }
    let raw = pairwise_sum(&lag_terms);
    Ok(StatisticPair::from_raw(raw, h_max as u64))
}

/// Sign test of independence between two samples observed on the same
/// items.
///
/// `raw = (pq/n) * sum_{i,j} (U_i'U_j)(V_i'V_j)` is chi-square with `pq`
/// degrees of freedom for fixed dimensions; the standardized form is
/// `(sqrt(2pq)/n) * sum_{i<j} (U_i'U_j)(V_i'V_j)`.
///
/// # Errors
///
/// The two samples must have the same number of rows.
pub fn independence(u: &UnitVectorSample, v: &UnitVectorSample) -> Result<StatisticPair> {
    if u.n() != v.n() {
        return Err(Error::DimensionMismatch(format!(
            "independence needs equal sample sizes, got {} and {}",
            u.n(),
            v.n()
        )));
    }
    let n = u.n() as f64;
    let (gu, gv) = (gram(u), gram(v));
    let upper = upper_product_sum(&gu, &gv);
    let dof = u.p() as u64 * v.p() as u64;
    let standardized = (2.0 * dof as f64).sqrt() / n * upper;
    Ok(StatisticPair::from_standardized(standardized, dof))
}

/// Sign test of sphericity built from the squared inner products.
///
/// `raw = (p(p+2)/(2n)) * sum_{i,j} ((U_i'U_j)^2 - 1/p)` is chi-square
/// with `d(p) = (p-1)(p+2)/2` degrees of freedom for fixed `p`; the
/// standardized form is
/// `(p sqrt(p+2) / (n sqrt(p-1))) * sum_{i<j} ((U_i'U_j)^2 - 1/p)`.
///
/// # Errors
///
/// Requires `p >= 2`; in one dimension `d(1) = 0` and sphericity is empty.
pub fn sphericity(sample: &UnitVectorSample) -> Result<StatisticPair> {
    let p = sample.p();
    if p < 2 {
        return Err(Error::Domain(
            "sphericity needs ambient dimension p >= 2".to_string(),
        ));
    }
    let n = sample.n() as f64;
    let pf = p as f64;
    let g = gram(sample);
    let upper = upper_sum(&g, |v| v * v - 1.0 / pf);
    let standardized = pf * (pf + 2.0).sqrt() / (n * (pf - 1.0).sqrt()) * upper;
    let dof = (p as u64 - 1) * (p as u64 + 2) / 2;
    Ok(StatisticPair::from_standardized(standardized, dof))
}
