mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgtvar::data::Period;
use sgtvar::runner::simulate_dataset;
use sgtvar::sgt::SgtParams;
use sgtvar::var::{self, VarParams};

#[test]
fn lag_one_autocovariance_matches_yule_walker() {
    let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.4, 0.1, 0.1, 0.0, 0.3]);
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.2, 0.8, 0.3, -0.3, 0.2, 1.2]);
    let params = VarParams::new(DVector::zeros(3), vec![a.clone()]).unwrap();
    // λ = 0, p = 2, q = 2.5 is t(5) scaled by 1/√2: variance (5/3)/2.
    let shapes = vec![SgtParams::new(0.0, 2.0, 2.5).unwrap(); 3];
    let sigma = &b * b.transpose() * (5.0 / 6.0);
    let gamma1 = &a * common::var1_covariance(&a, &sigma);

    let reps = 200;
    let mut sums = DMatrix::<f64>::zeros(3, 3);
    let mut squares = DMatrix::<f64>::zeros(3, 3);
    for seed in 0..reps {
        let data = simulate_dataset(&params, &b, &shapes, 500, 200, seed).unwrap();
        let y = &data.values;
        let t = y.nrows();
        let mean = y.row_mean();
        let mut c = DMatrix::<f64>::zeros(3, 3);
        for s in 1..t {
            let now = y.row(s) - &mean;
            let before = y.row(s - 1) - &mean;
            c += now.transpose() * before;
        }
        c /= t as f64;
        sums += &c;
        squares += c.component_mul(&c);
    }
    let avg = &sums / reps as f64;
    for i in 0..3 {
        for j in 0..3 {
            let var = squares[(i, j)] / reps as f64 - avg[(i, j)].powi(2);
            let se = (var / reps as f64).sqrt();
            let err = (avg[(i, j)] - gamma1[(i, j)]).abs();
            // Sample autocovariances are biased by O(1/T).
            assert!(err < 4.0 * se + 0.02, "({i},{j}): {} vs {}", avg[(i, j)], gamma1[(i, j)]);
        }
    }
}

#[test]
fn no_dynamics_gives_impact_times_shocks() {
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
    let params = VarParams::zeros(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shocks = DMatrix::from_fn(20, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let data = var::simulate(&params, &b, &shocks, 5, Period::month(2000, 1)).unwrap();
    for t in 0..15 {
        let want = &b * shocks.row(t + 5).transpose();
        for i in 0..2 {
            assert!((data.values[(t, i)] - want[i]).abs() < 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residuals_of_simulated_data_are_impact_times_shocks(seed in any::<u64>(), p in 1usize..4, burn in 0usize..20) {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lags: Vec<_> = (0..p)
            .map(|_| DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.15..0.15)))
            .collect();
        let params = VarParams::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)), lags).unwrap();
        prop_assume!(var::is_stable(&params));
        let b = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
        let total = 60 + burn;
        let shocks = DMatrix::from_fn(total, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = var::simulate(&params, &b, &shocks, burn, Period::month(2000, 1)).unwrap();
        let u = var::residuals(&data, &params).unwrap();
        for t in 0..u.nrows() {
            let want = &b * shocks.row(burn + p + t).transpose();
            for i in 0..n {
                prop_assert!((u[(t, i)] - want[i]).abs() < 1e-9);
            }
        }
    }
}
