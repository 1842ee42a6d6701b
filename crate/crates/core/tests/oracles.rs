mod common;

use common::*;
use rank_effects::model::Group;
use rank_effects::ranking::midranks;
use rank_effects::special::{chisq_critical_value, gamma_p, ln_gamma};
use rank_effects::{
    build_rank_table, chisq_upper_tail, covariance_general, covariance_oracle_unobservable,
    covariance_simple, derive_pattern_index, estimate_effects, estimate_effects_integral,
    placements, MaskedSample,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn midranks_match_definition() {
    let mut r = rng(1);
    for n in 1..60 {
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 + n) % 5) as f64).collect();
        assert_eq!(midranks(&x).unwrap(), brute_midranks(&x));
        let y: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        assert_eq!(midranks(&y).unwrap(), brute_midranks(&y));
    }
}

#[test]
fn rank_table_matches_definition() {
    let mut r = rng(2);
    for _ in 0..100 {
        let s = general_sample(&mut r, 2, 25, 4, 0.8);
        let idx = derive_pattern_index(&s);
        let ranks = build_rank_table(&s, &idx).unwrap();
        for l in 0..2 {
            let pooled: Vec<f64> = Group::BOTH
                .iter()
                .flat_map(|&g| s.observed_values(g, l))
                .collect();
            for g in Group::BOTH {
                let own = s.observed_values(g, l);
                for k in 0..s.n() {
                    if let Some(x) = s.get(g, l, k) {
                        let overall = 0.5 + pooled.iter().map(|&y| count_fn(x - y)).sum::<f64>();
                        let internal = 0.5 + own.iter().map(|&y| count_fn(x - y)).sum::<f64>();
                        assert_eq!(ranks.overall(g, l, k), Some(overall));
                        assert_eq!(ranks.internal(g, l, k), Some(internal));
                    }
                }
            }
        }
    }
}

#[test]
fn placements_match_definition() {
    let mut r = rng(3);
    for _ in 0..100 {
        let s = general_sample(&mut r, 3, 20, 3, 0.7);
        let idx = derive_pattern_index(&s);
        let y = placements(&build_rank_table(&s, &idx).unwrap(), &idx).unwrap();
        for g in Group::BOTH {
            for l in 0..3 {
                for k in 0..s.n() {
                    if let Some(x) = s.get(g, l, k) {
                        let want = brute_placement(&s, g.other(), l, x);
                        assert!((y.get(g, l, k).unwrap() - want).abs() < 1e-14);
                    }
                }
            }
        }
    }
}

#[test]
fn effects_three_routes_agree() {
    let mut r = rng(4);
    for i in 0..300 {
        let d = [1, 2, 3, 5][i % 4];
        let s = general_sample(&mut r, d, 5 + i % 30, (i % 4) as u32, 0.75);
        let idx = derive_pattern_index(&s);
        let rank = estimate_effects(&s, &idx, &build_rank_table(&s, &idx).unwrap()).unwrap();
        let integral = estimate_effects_integral(&s, &idx).unwrap();
        for l in 0..d {
            let brute = brute_effect(&s, l);
            assert!((rank.p_hat[l] - brute).abs() < 1e-12);
            assert!((integral.p_hat[l] - brute).abs() < 1e-12);
        }
    }
}

#[test]
fn general_covariance_matches_subjectwise_assembly() {
    let mut r = rng(5);
    for i in 0..200 {
        let d = 1 + i % 4;
        let s = general_sample(&mut r, d, 8 + i % 25, (i % 3) as u32 * 3, 0.7);
        let idx = derive_pattern_index(&s);
        let y = placements(&build_rank_table(&s, &idx).unwrap(), &idx).unwrap();
        let v = covariance_general(&s, &idx, &y).unwrap();
        let want = brute_covariance(&s, |g, l, k| {
            brute_placement(&s, g.other(), l, s.get(g, l, k).unwrap())
        });
        for a in 0..d {
            for b in 0..d {
                assert!(
                    (v.v_hat[a][b] - want[a][b]).abs() < 1e-10,
                    "{i}: {a},{b}: {} vs {}",
                    v.v_hat[a][b],
                    want[a][b]
                );
            }
        }
    }
}

#[test]
fn simple_covariance_matches_placement_form() {
    let mut r = rng(6);
    for i in 0..200 {
        let d = 1 + i % 3;
        let s = simple_sample(
            &mut r,
            d,
            2 + i % 12,
            i % 7,
            (i / 7) % 7,
            (i % 3) as u32 * 2,
        );
        let idx = derive_pattern_index(&s);
        let Ok(ranks) = build_rank_table(&s, &idx) else {
            continue;
        };
        let Ok(v) = covariance_simple(&s, &idx, &ranks) else {
            continue;
        };
        let want = brute_covariance(&s, |g, l, k| {
            brute_placement(&s, g.other(), l, s.get(g, l, k).unwrap())
        });
        for a in 0..d {
            for b in 0..d {
                assert!((v.v_hat[a][b] - want[a][b]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn oracle_covariance_uniform_moments() {
    // independent continuous groups with the same law: the true placements
    // are independent uniforms, so a complete pair contributes
    // Var(U2 - U1) = 1/6 and V = 1/6 in expectation
    let normal_cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    let mut r = rng(7);
    let reps = 400;
    let mut vals = Vec::with_capacity(reps);
    for _ in 0..reps {
        let subjects: Vec<Vec<Option<f64>>> = (0..40)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        Some(rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut r,
                        ))
                    })
                    .collect()
            })
            .collect();
        let s = MaskedSample::from_subjects(1, &subjects).unwrap();
        let idx = derive_pattern_index(&s);
        let v = covariance_oracle_unobservable(&s, &idx, |_, _, x| normal_cdf(x)).unwrap();
        let want = brute_covariance(&s, |g, l, k| normal_cdf(s.get(g, l, k).unwrap()));
        assert!((v.v_hat[0][0] - want[0][0]).abs() < 1e-12);
        vals.push(v.v_hat[0][0]);
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let se = (sample_cov(&vals, &vals) / reps as f64).sqrt();
    assert!((mean - 1.0 / 6.0).abs() < 4.0 * se, "{mean} +- {se}");
}

#[test]
fn oracle_covariance_of_constant_data_is_zero() {
    let s = MaskedSample::from_subjects(2, &vec![vec![Some(1.0); 4]; 6]).unwrap();
    let idx = derive_pattern_index(&s);
    let v = covariance_oracle_unobservable(&s, &idx, |_, _, _| 0.5).unwrap();
    assert!(v.is_zero());
}

#[test]
fn off_diagonal_vanishes_for_independent_components() {
    use rank_effects::simulation::{draw_sample, Distribution, Layout, Scenario};
    let scenario = Scenario {
        label: "independent".into(),
        distribution: Distribution::Normal,
        d: 2,
        rho: [0.0, 0.0, 0.0],
        sigma2: [1.0, 1.0],
        shift: vec![0.0, 0.0],
        layout: Layout::Design1 { n: 2010 },
        replications: 60,
        seed: 99,
        alpha: 0.05,
    };
    let off: Vec<f64> = (0..scenario.replications)
        .map(|rep| {
            let s = draw_sample(&scenario, rep).unwrap();
            let idx = derive_pattern_index(&s);
            let y = placements(&build_rank_table(&s, &idx).unwrap(), &idx).unwrap();
            covariance_general(&s, &idx, &y).unwrap().v_hat[0][1]
        })
        .collect();
    let reps = off.len() as f64;
    let mean = off.iter().sum::<f64>() / reps;
    let se = (sample_cov(&off, &off) / reps).sqrt();
    assert!(mean.abs() < 3.0 * se, "{mean} vs se {se}");
}

#[test]
fn chisq_against_statrs() {
    for &k in &[0.5, 1.0, 1.7, 2.0, 3.3, 5.0, 10.0, 24.5, 50.0] {
        let dist = ChiSquared::new(k).unwrap();
        for &x in &[0.0, 0.01, 0.3, 1.0, 2.5, 5.991, 10.0, 30.0, 75.0, 200.0] {
            let ours = chisq_upper_tail(x, k).unwrap();
            assert!(
                (ours - dist.sf(x)).abs() < 1e-10,
                "k={k} x={x}: {ours} vs {}",
                dist.sf(x)
            );
        }
    }
}

#[test]
fn chisq_against_quadrature() {
    for &k in &[0.5, 1.0, 2.6, 7.0, 19.3, 50.0] {
        for &x in &[0.05, 0.9, 4.0, 12.0, 40.0, 120.0] {
            let ours = chisq_upper_tail(x, k).unwrap();
            let q = chisq_tail_quadrature(x, k);
            assert!((ours - q).abs() < 1e-8, "k={k} x={x}: {ours} vs {q}");
        }
    }
}

#[test]
fn gamma_functions_against_statrs() {
    for &a in &[0.1, 0.5, 1.0, 3.7, 12.0, 80.0] {
        assert!(
            (ln_gamma(a) - statrs::function::gamma::ln_gamma(a)).abs()
                < 1e-12 * ln_gamma(a).abs().max(1.0)
        );
        for &x in &[0.001, 0.5, 3.0, 15.0, 90.0] {
            let want = statrs::function::gamma::gamma_lr(a, x);
            assert!((gamma_p(a, x).unwrap() - want).abs() < 1e-12, "a={a} x={x}");
        }
    }
}

#[test]
fn critical_values_invert_the_tail() {
    for &k in &[0.7, 1.0, 2.0, 4.4, 30.0] {
        for &alpha in &[0.01, 0.05, 0.1, 0.5] {
            let c = chisq_critical_value(alpha, k).unwrap();
            assert!(
                (ChiSquared::new(k).unwrap().inverse_cdf(1.0 - alpha) - c).abs()
                    < 1e-6 * c.max(1.0)
            );
        }
    }
}
