//! Shared oracles for the integration tests.
//!
//! Everything in this module is deliberately independent of the library's
//! computation paths: quadrature instead of closed forms, naive double-sum
//! statistic evaluations instead of the Gram-kernel pipeline, and plain
//! bisection instead of rational quantile approximations. Tests compare the
//! library against these.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};

// --- adaptive Simpson quadrature -------------------------------------------

/// Integrates `f` over `[a, b]` by adaptive Simpson with Richardson
/// extrapolation. `tol` is absolute.
///
/// The interval is first cut into 64 equal panels so that a sharp bump in
/// the interior cannot slip between the sample points of the opening
/// stencil, which would otherwise make the recursion terminate early on a
/// deceptive near-zero estimate.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let x0 = a + k as f64 * h;
        let x1 = if k + 1 == PANELS { b } else { a + (k + 1) as f64 * h };
        let c = 0.5 * (x0 + x1);
        let (f0, f1, fc) = (f(x0), f(x1), f(c));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fc + f1);
        total += simpson_rec(f, x0, x1, f0, f1, fc, whole, panel_tol, 40);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let lm = 0.5 * (a + c);
    let rm = 0.5 * (c + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (c - a) / 6.0 * (fa + 4.0 * flm + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * frm + fb);
    let delta = left + right - whole;
    // The second acceptance clause detects when delta has reached the f64
    // rounding floor of the partial sums; pushing deeper past that point
    // cannot reduce the error and would recurse until depth exhaustion.
    let noise = 1e-15 * (left.abs() + right.abs() + whole.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= noise {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, c, fa, fc, flm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, c, b, fc, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

/// The ratio `integral of num / integral of den` over `[a, b]`, both at a
/// relative tolerance of roughly `rel`. Useful for normalized densities
/// without computing the normalizing constant in closed form.
pub fn integral_ratio(
    num: &impl Fn(f64) -> f64,
    den: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel: f64,
) -> f64 {
    let den_rough = integrate(den, a, b, 1e-8).abs().max(1e-30);
    let d = integrate(den, a, b, rel * den_rough);
    let num_rough = integrate(num, a, b, 1e-8).abs().max(rel * den_rough);
    let n = integrate(num, a, b, rel * num_rough);
    n / d
}

// --- reference CDFs by quadrature -------------------------------------------

/// Standard normal density with its own constants.
pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF by quadrature of the density from 0.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    0.5 + integrate(&normal_density, 0.0, x, 1e-15)
}

/// Upper bound on the standard normal lower tail: `phi(|x|)/|x|` for `x < 0`.
pub fn normal_tail_bound(x: f64) -> f64 {
    assert!(x < 0.0);
    normal_density(x) / (-x)
}

/// Chi-square CDF with `k` degrees of freedom by quadrature.
///
/// Written in the substituted variable `t = s^2` so the `k = 1` integrand is
/// bounded; the integrand is scaled by its peak value so large `k` cannot
/// overflow, which cancels in the normalization ratio.
pub fn chi2_cdf_quadrature(x: f64, k: u64) -> f64 {
    assert!(x >= 0.0 && k >= 1);
    let kf = k as f64;
    let s_peak = (kf - 1.0).max(1e-2).sqrt();
    let log_peak = (kf - 1.0) * s_peak.ln() - 0.5 * s_peak * s_peak;
    let f = move |s: f64| -> f64 {
        if s <= 0.0 {
            if k == 1 {
                (-log_peak).exp()
            } else {
                0.0
            }
        } else {
            ((kf - 1.0) * s.ln() - 0.5 * s * s - log_peak).exp()
        }
    };
    let s_max = (kf + 1.0).sqrt() + 45.0;
    let hi = x.sqrt().min(s_max);
    let num = {
        let rough = integrate(&|s| f(s), 0.0, hi, 1e-10).abs().max(1e-30);
        integrate(&|s| f(s), 0.0, hi, 1e-13 * rough)
    };
    let den = {
        let rough = integrate(&|s| f(s), 0.0, s_max, 1e-10).abs().max(1e-30);
        integrate(&|s| f(s), 0.0, s_max, 1e-13 * rough)
    };
    (num / den).clamp(0.0, 1.0)
}

/// Beta CDF by quadrature in the angle variable `x = sin^2(theta)`, which
/// removes the endpoint singularities for all shapes `a, b >= 1/2`.
pub fn beta_cdf_quadrature(x: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x));
    let f = move |theta: f64| -> f64 {
        let (s, c) = (theta.sin(), theta.cos());
        spow(s, 2.0 * a - 1.0) * spow(c, 2.0 * b - 1.0)
    };
    let lim = x.sqrt().asin();
    let full = std::f64::consts::FRAC_PI_2;
    let num = {
        let rough = integrate(&f, 0.0, lim, 1e-10).abs().max(1e-30);
        integrate(&f, 0.0, lim, 1e-14 * rough.max(1e-4))
    };
    let den = {
        let rough = integrate(&f, 0.0, full, 1e-10).abs().max(1e-30);
        integrate(&f, 0.0, full, 1e-14 * rough)
    };
    (num / den).clamp(0.0, 1.0)
}

/// `base^e` that treats `0^0` as 1 and avoids NaN at the closed endpoint.
pub fn spow(base: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        base.max(0.0).powf(e)
    }
}

/// The `m/2`-th moment of `rho^2` where `rho^2 ~ Beta(1/2, (p-1)/2)`,
/// computed by quadrature of the density of `rho^2 = sin^2(theta)`:
/// `E[rho^m] = int sin^m cos^(p-2) / int cos^(p-2)` over `[0, pi/2]`.
pub fn rho_moment_quadrature(p: u32, m: u32) -> f64 {
    let pf = f64::from(p);
    let mf = f64::from(m);
    let num = move |theta: f64| spow(theta.sin(), mf) * spow(theta.cos(), pf - 2.0);
    let den = move |theta: f64| spow(theta.cos(), pf - 2.0);
    integral_ratio(&num, &den, 0.0, std::f64::consts::FRAC_PI_2, 1e-13)
}

// --- bisection quantile oracle ----------------------------------------------

/// Inverts a monotone nondecreasing `cdf` on `[lo, hi]` by plain bisection.
pub fn bisect_quantile(cdf: &impl Fn(f64) -> f64, u: f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(cdf(lo) <= u && cdf(hi) >= u, "bisection bracket does not contain the quantile");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// --- two-sample Kolmogorov-Smirnov -------------------------------------------

/// Two-sample KS distance; sorts copies of both samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

// --- naive statistic evaluations ---------------------------------------------
//
// Straight transcriptions of the defining double sums, one dot product at a
// time. No Gram reuse, no pairwise accumulation: these are the independent
// reference path for the dual-form identity tests.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row(u: &ArrayView2<f64>, i: usize) -> Vec<f64> {
    u.row(i).to_vec()
}

/// `(p/n) * sum_{i,j} U_i'U_j`.
pub fn naive_rayleigh_raw(u: &ArrayView2<f64>) -> f64 {
    let (n, p) = u.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += dot(&row(u, i), &row(u, j));
        }
    }
    p as f64 / n as f64 * total
}

/// Tangent signs by direct projection, then the location raw statistic
/// `((p-1)/n) * sum_{i,j} W_i'W_j`.
pub fn naive_location_raw(u: &ArrayView2<f64>, theta0: &Array1<f64>) -> f64 {
    let (n, p) = u.dim();
    let th: Vec<f64> = theta0.to_vec();
    let mut w = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let r = row(u, i);
        let c = dot(&r, &th);
        let mut proj: Vec<f64> = r.iter().zip(&th).map(|(x, t)| x - c * t).collect();
        let norm = dot(&proj, &proj).sqrt();
        assert!(norm > 1e-12, "oracle input row {i} is parallel to theta0");
        for v in proj.iter_mut() {
            *v /= norm;
        }
        for (k, v) in proj.iter().enumerate() {
            w[[i, k]] = *v;
        }
    }
    let wv = w.view();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += dot(&row(&wv, i), &row(&wv, j));
        }
    }
    (p as f64 - 1.0) / n as f64 * total
}

/// `sum_{h=1}^{H} (n-h) * ||r(h)||_F^2` with `r(h)` accumulated entry by entry.
pub fn naive_portmanteau_raw(u: &ArrayView2<f64>, h_max: usize) -> f64 {
    let (n, p) = u.dim();
    let mut total = 0.0;
    for h in 1..=h_max {
        let mut r = vec![vec![0.0f64; p]; p];
        for t in h..n {
            let (cur, lag) = (row(u, t), row(u, t - h));
            for a in 0..p {
                for b in 0..p {
                    r[a][b] += cur[a] * lag[b];
                }
            }
        }
        let scale = p as f64 / (n - h) as f64;
        let mut frob = 0.0;
        for ra in &r {
            for v in ra {
                frob += (scale * v) * (scale * v);
            }
        }
        total += (n - h) as f64 * frob;
    }
    total
}

/// `sum_{h=1}^{H} (p/(n-h)) * (sum_t U_{t-h}'U_t)^2`.
pub fn naive_portmanteau_lowrank_raw(u: &ArrayView2<f64>, h_max: usize) -> f64 {
    let (n, p) = u.dim();
    let mut total = 0.0;
    for h in 1..=h_max {
        let mut s = 0.0;
        for t in h..n {
            s += dot(&row(u, t - h), &row(u, t));
        }
        total += p as f64 / (n - h) as f64 * s * s;
    }
    total
}

/// `(pq/n) * sum_{i,j} (U_i'U_j)(V_i'V_j)`.
pub fn naive_independence_raw(u: &ArrayView2<f64>, v: &ArrayView2<f64>) -> f64 {
    let (n, p) = u.dim();
    let (nv, q) = v.dim();
    assert_eq!(n, nv);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += dot(&row(u, i), &row(u, j)) * dot(&row(v, i), &row(v, j));
        }
    }
    (p * q) as f64 / n as f64 * total
}

/// `(p(p+2)/(2n)) * sum_{i,j} ((U_i'U_j)^2 - 1/p)`.
pub fn naive_sphericity_raw(u: &ArrayView2<f64>) -> f64 {
    let (n, p) = u.dim();
    let pf = p as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = dot(&row(u, i), &row(u, j));
            total += r * r - 1.0 / pf;
        }
    }
    pf * (pf + 2.0) / (2.0 * n as f64) * total
}

/// Relative-or-absolute closeness helper used by the identity tests.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
