//! Distribution functions and the exact moment oracle.
//!
//! Everything here is plain special-function numerics: the standard normal
//! CDF and quantile, chi-square and beta CDFs built on the regularized
//! incomplete gamma and beta functions, the closed-form even moments of the
//! inner product of two independent uniform unit vectors, and the one-sample
//! Kolmogorov-Smirnov distance used to compare Monte-Carlo output against a
//! reference law.
//!
//! The implementations are self-contained so that the test suite can check
//! them against independent quadrature oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability, held in `[0, 1]` by construction.
///
/// ```
/// use hdsign::Probability;
///
/// let p = Probability::new(0.05).unwrap();
/// assert_eq!(p.value(), 0.05);
/// assert!(Probability::new(1.2).is_err());
/// assert!(Probability::new(f64::NAN).is_err());
/// ```
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    /// Wraps `value`, rejecting NaN and anything outside `[0, 1]`.
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability must lie in [0, 1], got {value}")))
        }
    }

    /// The wrapped value.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// An even moment `E[rho^m]` of the inner product `rho = U'V` of two
/// independent uniform unit vectors in dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentValue {
    /// Ambient dimension.
    pub p: u32,
    /// Moment order (even).
    pub m: u32,
    /// The moment itself, in `(0, 1]`.
    pub value: f64,
}

impl MomentValue {
    /// The moment written as a ratio of integer products,
    /// e.g. `(1*3*5)/(3*5*7) = 15/105` for `p = 3`, `m = 6`.
    ///
    /// Falls back to the plain decimal value if the integer products
    /// overflow `u128`.
    pub fn product_form(&self) -> String {
        let half = self.m / 2;
        let mut num: u128 = 1;
        let mut den: u128 = 1;
        for r in 0..half as u128 {
            let (n2, d2) = (
                num.checked_mul(1 + 2 * r),
                den.checked_mul(u128::from(self.p) + 2 * r),
            );
            match (n2, d2) {
                (Some(n2), Some(d2)) => {
                    num = n2;
                    den = d2;
                }
                _ => return format!("{:.17e}", self.value),
            }
        }
        format!("{num}/{den}")
    }
}

/// A one-sample Kolmogorov-Smirnov distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsDistance {
    /// The sup-distance between the empirical CDF and the reference CDF.
    pub d: f64,
    /// Number of points the empirical CDF was built from.
    pub sample_size: usize,
}

// --- standard normal ---------------------------------------------------

/// Standard normal CDF.
///
/// Accurate to a few ulp across the whole real line; in particular the far
/// tails are computed through `erfc` and do not lose precision to
/// cancellation.
///
/// ```
/// use hdsign::std_normal_cdf;
///
/// let phi = std_normal_cdf(0.0).unwrap();
/// assert_eq!(phi.value(), 0.5);
/// ```
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(format!("std_normal_cdf needs finite x, got {x}")));
    }
    let v = 0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2);
    Probability::new(v.clamp(0.0, 1.0))
}

/// Standard normal density, used for quantile refinement and the histogram
/// overlay column.
pub(crate) fn std_normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile (inverse CDF).
///
/// Wichura's rational approximation polished by one Newton step on
/// [`std_normal_cdf`]; the endpoints are rejected because the quantile is
/// infinite there.
///
/// ```
/// use hdsign::{std_normal_quantile, Probability};
///
/// let z = std_normal_quantile(Probability::new(0.975).unwrap()).unwrap();
/// assert!((z - 1.96).abs() < 1e-3);
/// ```
pub fn std_normal_quantile(u: Probability) -> Result<f64> {
    let u = u.value();
    if u <= 0.0 || u >= 1.0 {
        return Err(Error::domain(format!(
            "std_normal_quantile needs 0 < u < 1, got {u} (the quantile is infinite at the endpoints)"
        )));
    }
    let mut x = normal_quantile_approx(u);
    // One Newton step. The residual is formed in whichever tail is small so
    // that no precision is lost to the subtraction.
    let density = std_normal_density(x);
    if density > 0.0 {
        let residual = if u <= 0.5 {
            0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2) - u
        } else {
            (1.0 - u) - 0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
        };
        x -= residual / density;
    }
    Ok(x)
}

// --- chi-square ---------------------------------------------------------

/// Chi-square CDF with `k` degrees of freedom: the regularized lower
/// incomplete gamma function at `(k/2, x/2)`.
///
/// ```
/// use hdsign::chi2_cdf;
///
/// assert_eq!(chi2_cdf(0.0, 5).unwrap().value(), 0.0);
/// ```
pub fn chi2_cdf(x: f64, k: u64) -> Result<Probability> {
    if k == 0 {
        return Err(Error::domain("chi-square needs k >= 1 degrees of freedom".to_string()));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!("chi2_cdf needs finite x >= 0, got {x}")));
    }
    let (p, _) = gamma_inc_pair(k as f64 / 2.0, x / 2.0)?;
    Probability::new(p.clamp(0.0, 1.0))
}

/// Upper tail of the chi-square distribution, `1 - chi2_cdf(x, k)`, computed
/// directly so that small p-values keep their relative accuracy.
pub(crate) fn chi2_upper(x: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("chi-square needs k >= 1 degrees of freedom".to_string()));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!("chi2 upper tail needs finite x >= 0, got {x}")));
    }
    let (_, q) = gamma_inc_pair(k as f64 / 2.0, x / 2.0)?;
    Ok(q.clamp(0.0, 1.0))
}

/// Chi-square quantile with `k` degrees of freedom.
///
/// Newton iteration from a Wilson-Hilferty starting point, safeguarded by a
/// bracketing bisection so it cannot escape or stall.
///
/// ```
/// use hdsign::{chi2_quantile, Probability};
///
/// let q = chi2_quantile(Probability::new(0.95).unwrap(), 1).unwrap();
/// assert!((q - 3.8415).abs() < 1e-3);
/// ```
pub fn chi2_quantile(u: Probability, k: u64) -> Result<f64> {
    let uv = u.value();
    if k == 0 {
        return Err(Error::domain("chi-square needs k >= 1 degrees of freedom".to_string()));
    }
    if uv <= 0.0 || uv >= 1.0 {
        return Err(Error::domain(format!("chi2_quantile needs 0 < u < 1, got {uv}")));
    }
    let kf = k as f64;
    let a = kf / 2.0;

    // Wilson-Hilferty start. When the cube goes nonpositive the target sits
    // so deep in the lower tail that the gamma series collapses to its
    // leading term, which inverts in closed form and lands near the answer.
    let z = normal_quantile_approx(uv);
    let cube = 1.0 - 2.0 / (9.0 * kf) + z * (2.0 / (9.0 * kf)).sqrt();
    let mut x = if cube > 0.0 {
        kf * cube.powi(3)
    } else {
        2.0 * ((uv.ln() + ln_gamma(a + 1.0)) / a).exp()
    };
    x = x.clamp(1e-300, f64::MAX / 4.0);

    // Establish a bracket [lo, hi] with cdf(lo) <= u <= cdf(hi).
    let mut lo = 0.0;
    let mut hi = x.max(kf);
    for _ in 0..200 {
        if chi2_cdf(hi, k)?.value() >= uv {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }

    for _ in 0..200 {
        let cdf = chi2_cdf(x, k)?.value();
        let f = cdf - uv;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let density = chi2_density(x, kf);
        // Plain Newton stalls far out in the lower tail, advancing one
        // e-fold of the cdf per step; iterating on log(cdf) instead takes
        // tail distances in a handful of steps. The bracket absorbs any
        // overshoot either way.
        let step = if density <= 0.0 {
            0.0
        } else if uv <= 0.25 && cdf > 0.0 {
            (cdf.ln() - uv.ln()) * cdf / density
        } else {
            f / density
        };
        let mut next = x - step;
        if step == 0.0 || !next.is_finite() || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1e-280) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence { what: "chi-square quantile", iterations: 200 })
}

fn chi2_density(x: f64, kf: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = kf / 2.0;
    (-(x / 2.0) + (a - 1.0) * x.ln() - a * std::f64::consts::LN_2 - ln_gamma(a)).exp()
}

// --- beta ----------------------------------------------------------------

/// Regularized incomplete beta function `I_x(a, b)`, the Beta(a, b) CDF.
///
/// ```
/// use hdsign::beta_cdf;
///
/// let c = beta_cdf(0.3, 1.0, 1.0).unwrap();
/// assert!((c.value() - 0.3).abs() < 1e-14);
/// ```
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<Probability> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("beta_cdf needs positive finite shape parameters, got a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("beta_cdf needs x in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Probability::new(0.0);
    }
    if x == 1.0 {
        return Probability::new(1.0);
    }
    // ln of x^a (1-x)^b / (a B(a, b)); (1-x) through ln_1p keeps x near 1 accurate.
    let ln_front = a * x.ln() + b * (-x).ln_1p() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() / a) * beta_cont_frac(a, b, x)?
    } else {
        1.0 - (ln_front.exp() / b) * beta_cont_frac(b, a, 1.0 - x)?
    };
    Probability::new(v.clamp(0.0, 1.0))
}

// --- moment oracle --------------------------------------------------------

/// The even moment `E[rho^m]` where `rho` is the inner product of two
/// independent uniform unit vectors in dimension `p`:
///
/// `E[rho^m] = prod_{r=0}^{m/2-1} (1 + 2r) / (p + 2r)`,
///
/// which is the `m/2`-th moment of the Beta(1/2, (p-1)/2) law of `rho^2`.
/// All odd moments vanish by symmetry, so odd `m` is rejected.
///
/// ```
/// use hdsign::rho_even_moment;
///
/// let m = rho_even_moment(4, 2).unwrap();
/// assert_eq!(m.value, 0.25);
/// assert_eq!(m.product_form(), "1/4");
/// ```
pub fn rho_even_moment(p: u32, m: u32) -> Result<MomentValue> {
    if p == 0 {
        return Err(Error::domain("rho_even_moment needs dimension p >= 1".to_string()));
    }
    if m == 0 || m % 2 != 0 {
        return Err(Error::domain(format!(
            "rho_even_moment needs even m >= 2, got {m}; odd moments are exactly zero by symmetry"
        )));
    }
    let mut value = 1.0;
    for r in 0..(m / 2) {
        value *= f64::from(1 + 2 * r) / f64::from(p + 2 * r);
    }
    Ok(MomentValue { p, m, value })
}

// --- Kolmogorov-Smirnov -----------------------------------------------------

/// One-sample Kolmogorov-Smirnov distance between a sorted sample and a
/// reference CDF.
///
/// The sample must be sorted ascending and free of NaN; `cdf` must return
/// values in `[0, 1]`.
///
/// ```
/// use hdsign::{ks_distance, std_normal_cdf};
///
/// let sample = [-0.5, 0.1, 0.9];
/// let ks = ks_distance(&sample, |x| std_normal_cdf(x).unwrap().value()).unwrap();
/// assert!(ks.d <= 1.0);
/// assert_eq!(ks.sample_size, 3);
/// ```
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsDistance> {
    if sample.is_empty() {
        return Err(Error::domain("ks_distance needs a nonempty sample".to_string()));
    }
    let n = sample.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::domain(format!("ks_distance sample contains non-finite value at index {i}")));
        }
        if i > 0 && sample[i - 1] > x {
            return Err(Error::domain(format!("ks_distance sample must be sorted ascending (violated at index {i})")));
        }
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(KsDistance { d, sample_size: n })
}

// --- internal: error function (W. J. Cody's rational approximations) -------

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// `erfc(x)` over the whole real line, accurate to a few ulp.
fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let v = if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        scaled_exp(y) * (num + ERF_C[7]) / (den + ERF_D[7])
    } else if y < 26.6 {
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let tail = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        scaled_exp(y) * (std::f64::consts::FRAC_1_PI.sqrt() - tail) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

/// `erf(x)` for `|x| <= 0.46875`.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// `exp(-y^2)` evaluated as `exp(-ysq^2) * exp(-(y-ysq)(y+ysq))` with `ysq`
/// a 1/16-grid truncation of `y`, which keeps the argument error of the
/// large exponential from dominating.
fn scaled_exp(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

// --- internal: normal quantile (Wichura's AS 241, PPND16) -------------------

fn normal_quantile_approx(u: f64) -> f64 {
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly7(r, &AS241_A) / poly7_monic(r, &AS241_B);
    }
    let r = if q < 0.0 { u } else { 1.0 - u };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly7(r, &AS241_C) / poly7_monic(r, &AS241_D)
    } else {
        r -= 5.0;
        poly7(r, &AS241_E) / poly7_monic(r, &AS241_F)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

const AS241_A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const AS241_B: [f64; 7] = [
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const AS241_C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const AS241_D: [f64; 7] = [
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const AS241_E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const AS241_F: [f64; 7] = [
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn poly7(r: f64, c: &[f64; 8]) -> f64 {
    ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]
}

fn poly7_monic(r: f64, c: &[f64; 7]) -> f64 {
    ((((((c[6] * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]) * r + 1.0
}

// --- internal: log-gamma and regularized incomplete gamma/beta -------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// `ln Gamma(x)` for positive `x` (Lanczos, g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))` with `P + Q = 1`.
///
/// Power series below the transition point `x = a + 1`, Lentz's continued
/// fraction above it; the iteration budget grows like `sqrt(a)` because both
/// expansions slow down near `x ~ a` for large shape parameters.
fn gamma_inc_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    let max_iter = 300 + (10.0 * a.sqrt()) as usize;
    let ln_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) = x^a e^-x / Gamma(a) * sum_k x^k / (a (a+1) ... (a+k)).
        let mut term = 1.0 / a;
        let mut sum = term;
        for k in 1..max_iter {
            term *= x / (a + k as f64);
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                let p = (sum.ln() + ln_prefactor).exp();
                return Ok((p.min(1.0), (1.0 - p).max(0.0)));
            }
        }
        Err(Error::Convergence { what: "incomplete gamma series", iterations: max_iter })
    } else {
        // Q(a, x) via the continued fraction (Lentz's method).
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..max_iter {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                let q = (h.ln() + ln_prefactor).exp();
                return Ok(((1.0 - q).max(0.0), q.min(1.0)));
            }
        }
        Err(Error::Convergence { what: "incomplete gamma continued fraction", iterations: max_iter })
    }
}

/// Continued fraction for the incomplete beta function (Lentz's method),
/// valid for `x < (a + 1)/(a + b + 2)`.
fn beta_cont_frac(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 400;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::Convergence { what: "incomplete beta continued fraction", iterations: MAX_ITER })
}
