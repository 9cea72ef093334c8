mod common;

use common::{
    gauss_solve, newton_logistic, normal_equations, projection_residual, quantile7,
    truncated_power_natural, Lcg,
};
use drmi::harness::DEFAULT_SEED;
use drmi::numerics::{
    logistic_fit, natural_spline_basis, wls_fit, DesignMatrix, Law, Matrix, RngStream,
    SeedMaterial,
};
use proptest::prelude::*;

fn design_from_rows(rows: &[Vec<f64>]) -> DesignMatrix {
    DesignMatrix::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
}

#[test]
fn wls_matches_normal_equations() {
    let mut g = Lcg(11);
    let x: Vec<Vec<f64>> = (0..8)
        .map(|_| vec![1.0, g.next() * 4.0 - 2.0, g.normal()])
        .collect();
    let y: Vec<f64> = (0..8).map(|_| g.normal() * 3.0).collect();
    let fit = wls_fit(&design_from_rows(&x), &y, None).unwrap();
    let oracle = normal_equations(&x, &y, &[1.0; 8]);
    for (a, b) in fit.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    let w: Vec<f64> = (0..8).map(|_| g.next() + 0.1).collect();
    let fit = wls_fit(&design_from_rows(&x), &y, Some(&w)).unwrap();
    let oracle = normal_equations(&x, &y, &w);
    for (a, b) in fit.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn wls_gram_inverse_matches_oracle() {
    let mut g = Lcg(12);
    let x: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, g.normal(), g.normal()]).collect();
    let y: Vec<f64> = (0..20).map(|_| g.normal()).collect();
    let fit = wls_fit(&design_from_rows(&x), &y, None).unwrap();
    for j in 0..3 {
        let mut a = vec![vec![0.0; 3]; 3];
        for row in &x {
            for r in 0..3 {
                for c in 0..3 {
                    a[r][c] += row[r] * row[c];
                }
            }
        }
        let mut e = vec![0.0; 3];
        e[j] = 1.0;
        let col = gauss_solve(a, e);
        for (i, v) in col.iter().enumerate() {
            assert!((fit.gram_inverse[(i, j)] - v).abs() < 1e-10);
        }
    }
}

#[test]
fn irls_matches_newton() {
    let mut g = Lcg(21);
    let x: Vec<Vec<f64>> = (0..300).map(|_| vec![1.0, g.normal(), g.normal()]).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| {
            let p = 1.0 / (1.0 + (-(0.3 - 0.8 * r[1] + 1.2 * r[2])).exp());
            if g.next() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let fit = logistic_fit(&design_from_rows(&x), &y).unwrap();
    let oracle = newton_logistic(&x, &y);
    assert!(fit.converged);
    for (a, b) in fit.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn spline_spans_truncated_power_natural_space() {
    let mut g = Lcg(31);
    let train: Vec<f64> = (0..100).map(|_| g.next() * 10.0 - 3.0).collect();
    let probes = [-4.0, -3.0, -1.2, 0.0, 0.7, 2.5, 3.3, 5.0, 6.9, 8.5];
    let knots = [
        quantile7(&train, 0.0),
        quantile7(&train, 1.0 / 3.0),
        quantile7(&train, 2.0 / 3.0),
        quantile7(&train, 1.0),
    ];
    let basis = natural_spline_basis(&train, &probes, 3).unwrap();
    let ours: Vec<Vec<f64>> = (0..probes.len())
        .map(|i| {
            let mut r = vec![1.0];
            r.extend(basis.values.row(i));
            r
        })
        .collect();
    let oracle: Vec<Vec<f64>> = probes
        .iter()
        .map(|&x| truncated_power_natural(&knots, x))
        .collect();
    assert!(projection_residual(&ours, &oracle) < 1e-8);
    assert!(projection_residual(&oracle, &ours) < 1e-8);
}

#[test]
fn spline_df1_spans_linear_term() {
    let train: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
    let probes: Vec<f64> = (0..12).map(|i| i as f64 - 6.0).collect();
    let basis = natural_spline_basis(&train, &probes, 1).unwrap();
    let ours: Vec<Vec<f64>> = (0..probes.len())
        .map(|i| vec![1.0, basis.values[(i, 0)]])
        .collect();
    let linear: Vec<Vec<f64>> = probes.iter().map(|&x| vec![1.0, x]).collect();
    assert!(projection_residual(&ours, &linear) < 1e-9);
    assert!(projection_residual(&linear, &ours) < 1e-9);
}

#[test]
fn normal_mean_with_default_seed() {
    let mut s = RngStream::new(SeedMaterial {
        master: DEFAULT_SEED,
        cell: 0,
        replication: 0,
        purpose: 0,
    });
    let n = 1_000_000;
    let mean = (0..n).map(|_| s.draw(Law::StandardNormal).unwrap()).sum::<f64>() / n as f64;
    println!("mean of 1e6 standard normals: {mean:.6}");
    assert!(mean.abs() < 0.004, "{mean}");
}

#[test]
fn chi_squared_mean() {
    let mut s = RngStream::new(SeedMaterial {
        master: DEFAULT_SEED,
        cell: 0,
        replication: 0,
        purpose: 1,
    });
    let n = 100_000;
    let mean = (0..n).map(|_| s.draw(Law::ChiSquared(10.0)).unwrap()).sum::<f64>() / n as f64;
    assert!(mean > 9.85 && mean < 10.15, "{mean}");
}

#[test]
fn streams_identical_across_thread_counts() {
    use rayon::prelude::*;
    let draw_all = |threads: usize| -> Vec<Vec<f64>> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (0..64u64)
                    .into_par_iter()
                    .map(|rep| {
                        RngStream::new(SeedMaterial {
                            master: 9,
                            cell: 1,
                            replication: rep,
                            purpose: 2,
                        })
                        .normal_vec(32)
                    })
                    .collect()
            })
    };
    assert_eq!(draw_all(1), draw_all(4));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn wls_residuals_orthogonal(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 6..30),
        seed in any::<u64>(),
    ) {
        let mut g = Lcg(seed);
        let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![1.0, r[0], r[1]]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let w: Vec<f64> = x.iter().map(|_| g.next() * 2.0 + 0.01).collect();
        let design = design_from_rows(&x);
        match wls_fit(&design, &y, Some(&w)) {
            Ok(fit) => {
                let pred = fit.predict(&design);
                for j in 0..3 {
                    let s: f64 = (0..x.len()).map(|i| x[i][j] * w[i] * (y[i] - pred[i])).sum();
                    prop_assert!(s.abs() < 1e-8, "column {j}: {s}");
                }
            }
            Err(e) => {
                let singular = matches!(e, drmi::error::Error::Singular { .. });
                prop_assert!(singular, "unexpected error {:?}", e);
            }
        }
    }

    #[test]
    fn logistic_score_vanishes(seed in any::<u64>(), b0 in -1.0f64..1.0, b1 in -1.5f64..1.5) {
        let mut g = Lcg(seed);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![1.0, g.normal()]).collect();
        let y: Vec<f64> = x.iter().map(|r| {
            let p = 1.0 / (1.0 + (-(b0 + b1 * r[1])).exp());
            if g.next() < p { 1.0 } else { 0.0 }
        }).collect();
        if let Ok(fit) = logistic_fit(&design_from_rows(&x), &y) {
            let p = fit.predict(&design_from_rows(&x));
            for j in 0..2 {
                let s: f64 = (0..80).map(|i| x[i][j] * (y[i] - p[i])).sum();
                prop_assert!(s.abs() < 1e-6, "{s}");
            }
        }
    }

    #[test]
    fn spline_rows_follow_eval_order(
        train in prop::collection::vec(-5.0f64..5.0, 12..40),
        eval in prop::collection::vec(-8.0f64..8.0, 2..15),
        shift in 1usize..14,
    ) {
        let basis = natural_spline_basis(&train, &eval, 3);
        prop_assume!(basis.is_ok());
        let basis = basis.unwrap();
        let k = shift % eval.len();
        let mut rotated = eval.clone();
        rotated.rotate_left(k);
        let again = natural_spline_basis(&train, &rotated, 3).unwrap();
        for i in 0..eval.len() {
            prop_assert_eq!(again.values.row(i), basis.values.row((i + k) % eval.len()));
        }
    }
}
