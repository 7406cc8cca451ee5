//! The nine checks that gate a release. Each test prints a single
//! pass/fail line (visible with `--nocapture` or on failure) and pins its
//! tolerances in the code next to the quantity being checked.

mod common;

use common as oracle;
use hdsign::{
    canonical_json, derive_stream, independence, location, portmanteau, rayleigh,
    rho_even_moment, run_cell, run_grid, sample_rotsym, sample_uniform, sphericity, AngularKind,
    CellSummary, Family, NullModel, Probability, SimulationConfig, UnitVectorSample,
};
use ndarray::Array1;

fn announce(number: u32, label: &str, checks: &[(String, bool)]) {
    let ok = checks.iter().all(|(_, good)| *good);
    println!("acceptance {number} ({label}): {}", if ok { "PASS" } else { "FAIL" });
    let failed: Vec<&str> =
        checks.iter().filter(|(_, good)| !good).map(|(what, _)| what.as_str()).collect();
    assert!(failed.is_empty(), "acceptance {number} ({label}) failed: {}", failed.join("; "));
}

fn config(family: Family, n: usize, p: usize, m: u64, seed: u64, h: usize) -> SimulationConfig {
    SimulationConfig {
        family,
        grid_n: vec![n],
        grid_p: vec![p],
        replicates: m,
        master_seed: seed,
        alpha: Probability::new(0.05).unwrap(),
        h_max: h,
        null_model: NullModel::UniformSphere,
        workers: 2,
    }
}

fn axis(p: usize) -> Array1<f64> {
    let mut a = Array1::zeros(p);
    a[0] = 1.0;
    a
}

/// Mean, sample variance, and fourth central moment of a batch.
fn batch_moments(values: &[f64]) -> (f64, f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
    (mean, var, m4)
}

fn gaussian_regime_checks(cell: &CellSummary, label: &str) -> Vec<(String, bool)> {
    let mut checks = Vec::new();
    checks.push((format!("{label}: |mean| = {} <= 0.08", cell.mean.abs()), cell.mean.abs() <= 0.08));
    checks.push((
        format!("{label}: variance = {} in [0.88, 1.12]", cell.variance),
        (0.88..=1.12).contains(&cell.variance),
    ));
    let ks = cell.ks_normal.as_ref().expect("retained values").d;
    checks.push((format!("{label}: KS = {ks} <= 0.045"), ks <= 0.045));
    let rate = cell.rejection_rate_universal;
    checks.push((
        format!("{label}: rejection rate = {rate} in [0.035, 0.065]"),
        (0.035..=0.065).contains(&rate),
    ));
    checks
}

#[test]
fn criterion_1_universal_gaussian_regime_at_200_by_200() {
    let m = 2000;
    let seed = 2026;
    let mut checks = Vec::new();
    let cases = [
        (Family::Uniformity, 3, "uniformity"),
        (Family::Serial, 3, "serial H=3"),
        (Family::Independence, 3, "independence p=q=100"),
        (Family::Sphericity, 3, "sphericity"),
    ];
    for (family, h, label) in cases {
        let cell = run_cell(&config(family, 200, 200, m, seed, h), 200, 200).unwrap();
        checks.extend(gaussian_regime_checks(&cell, label));
    }
    announce(1, "universal Gaussian regime at (200, 200)", &checks);
}

#[test]
fn criterion_2_exact_null_moments_at_30_by_30() {
    let n = 30;
    let m = 100_000usize;
    let mut checks = Vec::new();

    let mut push = |label: &str, values: &[f64], exact_var: f64| {
        let (mean, var, m4) = batch_moments(values);
        let se_mean = (var / m as f64).sqrt();
        let se_var = ((m4 - var * var) / m as f64).sqrt();
        checks.push((
            format!("{label}: |mean| = {} <= 5 se = {}", mean.abs(), 5.0 * se_mean),
            mean.abs() <= 5.0 * se_mean,
        ));
        checks.push((
            format!("{label}: |var - {exact_var}| = {} <= 5 se = {}", (var - exact_var).abs(), 5.0 * se_var),
            (var - exact_var).abs() <= 5.0 * se_var,
        ));
    };

    let uniformity: Vec<f64> = (0..m)
        .map(|r| {
            let s = derive_stream(301, &[r as u64]);
            rayleigh(&sample_uniform(&s, n, 30).unwrap()).standardized
        })
        .collect();
    push("uniformity p=30", &uniformity, 29.0 / 30.0);

    let independence: Vec<f64> = (0..m)
        .map(|r| {
            let s = derive_stream(302, &[r as u64]);
            let both = sample_uniform(&s, 2 * n, 15).unwrap();
            let rows = both.into_rows();
            let u = UnitVectorSample::new(rows.slice(ndarray::s![..n, ..]).to_owned()).unwrap();
            let v = UnitVectorSample::new(rows.slice(ndarray::s![n.., ..]).to_owned()).unwrap();
            independence(&u, &v).unwrap().standardized
        })
        .collect();
    push("independence p=q=15", &independence, 29.0 / 30.0);

    let serial: Vec<f64> = (0..m)
        .map(|r| {
            let s = derive_stream(303, &[r as u64]);
            portmanteau(&sample_uniform(&s, n, 30).unwrap(), 2).unwrap().standardized
        })
        .collect();
    push("serial H=2", &serial, 0.5 * (28.0 / 29.0 + 27.0 / 28.0));

    announce(2, "exact null moments at (30, 30)", &checks);
}

#[test]
fn criterion_3_fixed_p_chi_square_regime_at_p_4() {
    let m = 2000;
    let mut checks = Vec::new();

    let r_cell = run_cell(&config(Family::Uniformity, 1000, 4, m, 404, 3), 1000, 4).unwrap();
    let dof = 4.0f64;
    let raw_mean = dof + (2.0 * dof).sqrt() * r_cell.mean;
    let raw_var = 2.0 * dof * r_cell.variance;
    checks.push((
        format!("uniformity raw mean = {raw_mean} in [3.75, 4.25]"),
        (3.75..=4.25).contains(&raw_mean),
    ));
    checks.push((
        format!("uniformity raw variance = {raw_var} in [7, 9]"),
        (7.0..=9.0).contains(&raw_var),
    ));

    let s_cell = run_cell(&config(Family::Sphericity, 1000, 4, m, 405, 3), 1000, 4).unwrap();
    let s_dof = 9.0f64;
    let s_raw_mean = s_dof + (2.0 * s_dof).sqrt() * s_cell.mean;
    checks.push((
        format!("sphericity raw mean = {s_raw_mean} within 9 +- 0.4"),
        (s_raw_mean - 9.0).abs() <= 0.4,
    ));

    announce(3, "fixed-p chi-square regime at p = 4", &checks);
}

#[test]
fn criterion_4_small_n_contrast_at_n_4() {
    let m = 2000;
    let r_cell = run_cell(&config(Family::Uniformity, 4, 1000, m, 505, 3), 4, 1000).unwrap();
    let t_cell = run_cell(&config(Family::Serial, 4, 1000, m, 505, 1), 4, 1000).unwrap();
    let ks_r = r_cell.ks_normal.as_ref().unwrap().d;
    let ks_t = t_cell.ks_normal.as_ref().unwrap().d;
    let checks = vec![
        (format!("KS of standardized uniformity = {ks_r} <= 0.06"), ks_r <= 0.06),
        (
            format!("KS of standardized serial = {ks_t} > 2 x {ks_r}"),
            ks_t > 2.0 * ks_r,
        ),
    ];
    announce(4, "small-n contrast at (4, 1000)", &checks);
}

#[test]
fn criterion_5_moment_oracle_against_quadrature_and_monte_carlo() {
    let mut checks = Vec::new();
    let mut worst: (f64, u32, u32) = (0.0, 0, 0);
    for p in 2..=50u32 {
        for m in [2u32, 4, 6, 8, 10] {
            let exact = rho_even_moment(p, m).unwrap().value;
            let quad = oracle::rho_moment_quadrature(p, m);
            let rel = (exact - quad).abs() / quad.abs();
            if rel > worst.0 {
                worst = (rel, p, m);
            }
        }
    }
    checks.push((
        format!("max relative gap to quadrature = {} at (p, m) = ({}, {}) <= 1e-10", worst.0, worst.1, worst.2),
        worst.0 <= 1e-10,
    ));

    let pairs = 100_000usize;
    let p = 10usize;
    let sample = sample_uniform(&derive_stream(606, &[]), 2 * pairs, p).unwrap();
    let rows = sample.rows();
    let mean_rho2 = (0..pairs)
        .map(|i| rows.row(2 * i).dot(&rows.row(2 * i + 1)).powi(2))
        .sum::<f64>()
        / pairs as f64;
    let m2 = oracle::rho_moment_quadrature(p as u32, 2);
    let m4 = oracle::rho_moment_quadrature(p as u32, 4);
    let se = ((m4 - m2 * m2) / pairs as f64).sqrt();
    checks.push((
        format!("Monte-Carlo E[rho^2] = {mean_rho2} within 4 se = {} of 0.1", 4.0 * se),
        (mean_rho2 - 0.1).abs() <= 4.0 * se,
    ));

    announce(5, "moment oracle vs quadrature and Monte Carlo", &checks);
}

#[test]
fn criterion_6_dual_forms_agree_on_100_random_inputs() {
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let n = 5 + (i as usize * 37) % 46;
        let p = 2 + (i as usize * 17) % 19;
        let q = 2 + (i as usize * 11) % 19;
        let h = 1 + (i as usize) % 3;
        let stream = derive_stream(707, &[i]);
        let u = sample_uniform(&stream.child(0), n, p).unwrap();
        let v = sample_uniform(&stream.child(1), n, q).unwrap();
        let theta0 = axis(p);

        let cases: [(&str, f64, f64, f64); 5] = [
            {
                let pair = rayleigh(&u);
                ("uniformity", pair.standardized, oracle::naive_rayleigh_raw(&u.rows()), pair.dof as f64)
            },
            {
                let pair = location(&u, theta0.view()).unwrap();
                (
                    "location",
                    pair.standardized,
                    oracle::naive_location_raw(&u.rows(), &theta0),
                    pair.dof as f64,
                )
            },
            {
                let pair = portmanteau(&u, h).unwrap();
                (
                    "serial",
                    pair.standardized,
                    oracle::naive_portmanteau_raw(&u.rows(), h),
                    pair.dof as f64,
                )
            },
            {
                let pair = independence(&u, &v).unwrap();
                (
                    "independence",
                    pair.standardized,
                    oracle::naive_independence_raw(&u.rows(), &v.rows()),
                    pair.dof as f64,
                )
            },
            {
                let pair = sphericity(&u).unwrap();
                (
                    "sphericity",
                    pair.standardized,
                    oracle::naive_sphericity_raw(&u.rows()),
                    pair.dof as f64,
                )
            },
        ];
        for (family, lib, naive_raw, dof) in cases {
            let reference = (naive_raw - dof) / (2.0 * dof).sqrt();
            let gap = (lib - reference).abs() / lib.abs().max(reference.abs()).max(1.0);
            worst = worst.max(gap);
            assert!(
                oracle::close_rel(lib, reference, 1e-9),
                "input {i} ({family}, n = {n}, p = {p}): {lib} vs {reference}"
            );
        }
    }
    let checks_entry = (
        format!("100 inputs x 5 families, worst relative gap = {worst} <= 1e-9"),
        worst <= 1e-9,
    );
    checks.push(checks_entry);
    announce(6, "dual-form identities on random inputs", &checks);
}

#[test]
fn criterion_7_location_null_is_distribution_free() {
    let n = 50;
    let p = 20;
    let m = 10_000u64;
    let direction = axis(p);
    let draw = |kind: AngularKind, tag: u64| -> Vec<f64> {
        let mut values: Vec<f64> = (0..m)
            .map(|r| {
                let stream = derive_stream(808, &[tag, r]);
                let sample = sample_rotsym(&stream, n, p, kind, direction.view()).unwrap();
                location(&sample, direction.view()).unwrap().standardized
            })
            .collect();
        values.sort_unstable_by(f64::total_cmp);
        values
    };
    let flat = draw(AngularKind::Uniform, 0);
    let peaked = draw(AngularKind::VonMisesFisher { kappa: 5.0 }, 1);
    let d = oracle::ks_two_sample(&flat, &peaked);
    let bound = 1.95 * (2.0 / m as f64).sqrt();
    let checks =
        vec![(format!("two-sample KS = {d} < {bound} between f = 1 and f = exp(5w)"), d < bound)];
    announce(7, "location null distribution-freeness", &checks);
}

#[test]
fn criterion_8_fourth_moment_matrices() {
    let m = 100_000usize;
    let mut checks = Vec::new();

    // E[vec(UU')vec(UU')'] against (I + K + J) / (p (p + 2)) at p = 3,
    // with vec stacking columns so entry (i, j) sits at index i + p j.
    let p = 3usize;
    let sample = sample_uniform(&derive_stream(909, &[0]), m, p).unwrap();
    let rows = sample.rows();
    let d = p * p;
    let mut emp = vec![0.0f64; d * d];
    for r in 0..m {
        let u = rows.row(r);
        let mut v = [0.0f64; 9];
        for j in 0..p {
            for i in 0..p {
                v[i + p * j] = u[i] * u[j];
            }
        }
        for a in 0..d {
            for b in 0..d {
                emp[a * d + b] += v[a] * v[b];
            }
        }
    }
    let mut worst_self = 0.0f64;
    for (a, row) in emp.chunks_exact(d).enumerate() {
        let (ia, ja) = (a % p, a / p);
        for (b, &sum) in row.iter().enumerate() {
            let (ib, jb) = (b % p, b / p);
            let identity = (ia == ib && ja == jb) as u8 as f64;
            let commutation = (ia == jb && ja == ib) as u8 as f64;
            let ones_on_diagonals = (ia == ja && ib == jb) as u8 as f64;
            let target = (identity + commutation + ones_on_diagonals) / (p * (p + 2)) as f64;
            worst_self = worst_self.max((sum / m as f64 - target).abs());
        }
    }
    checks.push((
        format!("p = 3 self moment: worst entry gap = {worst_self} <= 5e-3"),
        worst_self <= 5e-3,
    ));

    // E[vec(UV')vec(UV')'] against I / (p q) for independent blocks.
    let (p2, q2) = (2usize, 3usize);
    let us = sample_uniform(&derive_stream(909, &[1]), m, p2).unwrap();
    let vs = sample_uniform(&derive_stream(909, &[2]), m, q2).unwrap();
    let (ur, vr) = (us.rows(), vs.rows());
    let d2 = p2 * q2;
    let mut cross = vec![0.0f64; d2 * d2];
    for r in 0..m {
        let u = ur.row(r);
        let w = vr.row(r);
        let mut v = [0.0f64; 6];
        for j in 0..q2 {
            for i in 0..p2 {
                v[i + p2 * j] = u[i] * w[j];
            }
        }
        for a in 0..d2 {
            for b in 0..d2 {
                cross[a * d2 + b] += v[a] * v[b];
            }
        }
    }
    let mut worst_cross = 0.0f64;
    for (a, row) in cross.chunks_exact(d2).enumerate() {
        for (b, &sum) in row.iter().enumerate() {
            let target = if a == b { 1.0 / (p2 * q2) as f64 } else { 0.0 };
            worst_cross = worst_cross.max((sum / m as f64 - target).abs());
        }
    }
    checks.push((
        format!("p = 2, q = 3 cross moment: worst entry gap = {worst_cross} <= 5e-3"),
        worst_cross <= 5e-3,
    ));

    announce(8, "fourth-moment matrix identities", &checks);
}

#[test]
fn criterion_9_byte_identical_reports() {
    let mut base = config(Family::Uniformity, 4, 4, 200, 1111, 3);
    base.grid_n = vec![4, 30];
    base.grid_p = vec![4, 30];

    let mut texts = Vec::new();
    for workers in [1usize, 4, 16] {
        let mut c = base.clone();
        c.workers = workers;
        texts.push(canonical_json(&run_grid(&c).unwrap()).unwrap());
    }
    let again = canonical_json(&run_grid(&base).unwrap()).unwrap();

    let checks = vec![
        ("workers 1 and 4 give identical bytes".to_string(), texts[0] == texts[1]),
        ("workers 4 and 16 give identical bytes".to_string(), texts[1] == texts[2]),
        ("two invocations with one seed give identical bytes".to_string(), {
            let c = base.clone();
            let repeat = canonical_json(&run_grid(&c).unwrap()).unwrap();
            again == repeat && texts[0] == again
        }),
    ];
    announce(9, "byte-identical simulation reports", &checks);
}
