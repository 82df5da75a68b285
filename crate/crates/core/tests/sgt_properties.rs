mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use sgtvar::sgt::{SgtDensity, SgtParams};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn density(lambda: f64, p: f64, q: f64) -> SgtDensity {
    SgtDensity::new(SgtParams::new(lambda, p, q).unwrap()).unwrap()
}

#[test]
fn library_density_matches_formula_oracle() {
    for &(l, p, q) in &[(0.5, 2.0, 2.0), (-0.3, 1.5, 3.0), (0.8, 5.0, 10.0), (-0.8, 1.0, 2.0)] {
        let d = density(l, p, q);
        for i in -40..=40 {
            let x = i as f64 * 0.37;
            let want = common::sgt_log_pdf(x, l, p, q);
            assert!((d.log_pdf(x) - want).abs() < 1e-12, "({l},{p},{q}) at {x}");
        }
    }
}

#[test]
fn mean_shift_matches_closed_form_and_quadrature() {
    for &(l, p, q) in &[(0.5, 2.0, 2.0), (-0.3, 1.5, 3.0)] {
        let params = SgtParams::new(l, p, q).unwrap();
        let m = params.mean_shift().unwrap();
        assert!((m - common::sgt_shift(l, p, q)).abs() < 1e-14);
        let d = density(l, p, q);
        let mean = common::real_line(|x| x * d.pdf(x), -m, 1.0, 1e-12);
        assert!(mean.abs() < 1e-6, "({l},{p},{q}): mean {mean:e}");
    }
    // p = 2, q = 2: B(1, 3/2) / B(1/2, 2) = (2/3) / (4/3), so m = λ √2.
    let m = SgtParams::new(0.5, 2.0, 2.0).unwrap().mean_shift().unwrap();
    assert!((m - 0.5 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn normalization_over_grid() {
    for &l in &[-0.8, 0.0, 0.8] {
        for &p in &[1.0, 2.0, 5.0] {
            for &q in &[0.8, 2.0, 10.0] {
                let params = SgtParams { lambda: l, p, q };
                let d = if params.is_admissible() {
                    SgtDensity::new(params).unwrap()
                } else {
                    SgtDensity::uncentered(params).unwrap()
                };
                let mass = common::real_line(|x| d.pdf(x), -d.shift(), 1.0, 1e-12);
                assert!((mass - 1.0).abs() < 1e-6, "({l},{p},{q}): mass {mass}");
            }
        }
    }
}

#[test]
fn positive_lambda_puts_more_mass_right_of_the_mode() {
    for &(l, p, q) in &[(0.4, 2.0, 2.5), (0.8, 1.0, 10.0), (0.2, 5.0, 2.0)] {
        let d = density(l, p, q);
        let mode = -d.shift();
        assert!((d.cdf(mode) - (1.0 - l) / 2.0).abs() < 1e-12);
        assert!(d.cdf(mode) < 0.5);
        let mirrored = density(-l, p, q);
        assert!(mirrored.cdf(-mode) > 0.5);
    }
}

#[test]
fn symmetric_case_is_a_rescaled_student_t() {
    for &q in &[1.0, 2.5, 10.0] {
        let d = density(0.0, 2.0, q);
        let t = StudentsT::new(0.0, 1.0, 2.0 * q).unwrap();
        use statrs::distribution::Continuous;
        for i in -200..=200 {
            let x = i as f64 * 0.05;
            let want = 2f64.sqrt() * t.pdf(2f64.sqrt() * x);
            assert!((d.pdf(x) - want).abs() < 1e-8);
        }
    }
}

#[test]
fn sample_mean_within_three_standard_errors() {
    for (k, &(l, p, q)) in [(0.5, 2.0, 2.0), (-0.4, 2.0, 2.5), (0.3, 1.7, 2.5), (-0.8, 5.0, 1.0)]
        .iter()
        .enumerate()
    {
        let d = density(l, p, q);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "({l},{p},{q}): mean {mean} se {se}");
    }
}

#[test]
fn symmetric_samples_have_no_skewness() {
    let d = density(0.0, 2.0, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
    let skew = m3 / m2.powf(1.5);
    assert!(skew.abs() < 0.05, "skewness {skew}");
}

#[test]
fn symmetric_samples_match_student_t_quantiles() {
    let d = density(0.0, 2.0, 2.5);
    let t = StudentsT::new(0.0, 1.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    // Kolmogorov-Smirnov distance against the rescaled t CDF.
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = t.cdf(2f64.sqrt() * x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value 1.63 / √n.
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS distance {ks}");
    for &prob in &[0.01, 0.1, 0.5, 0.9, 0.99] {
        let emp = xs[(prob * n as f64) as usize];
        let want = t.inverse_cdf(prob) / 2f64.sqrt();
        assert!((emp - want).abs() < 0.05, "quantile {prob}: {emp} vs {want}");
    }
}

#[test]
fn variance_is_finite_and_stable_across_seeds() {
    let (l, p, q) = (0.0, 1.7, 2.5);
    assert!((SgtParams::new(l, p, q).unwrap().tail_exponent() - 4.25).abs() < 1e-12);
    let d = density(l, p, q);
    let truth = common::real_line(|x| x * x * d.pdf(x), 0.0, 1.0, 1e-12);
    let n = 10_000_000;
    for seed in 0..2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = d.sample(&mut rng);
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((var / truth - 1.0).abs() < 0.05, "seed {seed}: {var} vs {truth}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirroring_reflects_the_density(
        l in -0.99f64..0.99, p in 0.5f64..8.0, q in 0.5f64..20.0, x in -20.0f64..20.0,
    ) {
        prop_assume!(p * q > 1.05);
        let a = SgtParams::new(l, p, q).unwrap();
        let fa = a.log_pdf(x).unwrap();
        let fb = a.mirrored().log_pdf(-x).unwrap();
        prop_assert!((fa - fb).abs() < 1e-9 * fa.abs().max(1.0));
    }

    #[test]
    fn cdf_is_monotone_and_consistent_with_pdf(
        l in -0.9f64..0.9, p in 0.8f64..6.0, q in 0.8f64..20.0, x in -5.0f64..5.0,
    ) {
        prop_assume!(p * q > 1.2);
        let d = density(l, p, q);
        let h = 1e-4;
        let (lo, hi) = (d.cdf(x - h), d.cdf(x + h));
        prop_assert!(lo <= hi);
        let slope = (hi - lo) / (2.0 * h);
        prop_assert!((slope - d.pdf(x)).abs() < 1e-4 * d.pdf(x).max(1.0));
    }
}
