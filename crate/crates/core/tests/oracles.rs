mod common;

use std::sync::Arc;

use common::{prox_objective, prox_oracle, support, tau_oracle};
use diffnet::correlation::default_names;
use diffnet::diffnet::{estimate_all, extract_network};
use diffnet::glasso::graphical_lasso;
use diffnet::jgl::prox_group_lasso;
use diffnet::synthetic::{generate, SyntheticScenario};
use diffnet::{kendall_tau, solve_jgl, CorrelationMatrix, EstimatorKind, PenaltyParams};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn penalty() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.0f64..2.0]
}

fn tied_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec((-3i32..3).prop_map(f64::from), n),
        prop::collection::vec(-10.0f64..10.0, n),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prox_matches_numerical_minimum(
        v in prop::collection::vec(-3.0f64..3.0, 1..6),
        t1 in penalty(),
        t2 in penalty(),
    ) {
        let x = prox_group_lasso(&v, t1, t2);
        let oracle = prox_oracle(&v, t1, t2);
        for (a, b) in x.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-6, "{x:?} vs {oracle:?}");
        }
        prop_assert!(prox_objective(&x, &v, t1, t2) <= prox_objective(&oracle, &v, t1, t2) + 1e-12);
    }

    #[test]
    fn prox_shrinks_toward_zero(v in prop::collection::vec(-3.0f64..3.0, 1..6), t1 in penalty(), t2 in penalty()) {
        let x = prox_group_lasso(&v, t1, t2);
        for (a, b) in x.iter().zip(&v) {
            prop_assert!(a.abs() <= b.abs());
            prop_assert!(*a == 0.0 || a.signum() == b.signum());
        }
    }

    #[test]
    fn tau_matches_pair_enumeration(
        (x, y) in (2usize..80).prop_flat_map(|n| (tied_vector(n), tied_vector(n)))
    ) {
        prop_assert_eq!(kendall_tau(&x, &y).unwrap(), tau_oracle(&x, &y));
    }

    #[test]
    fn solver_is_equivariant_under_variable_permutation(seed in 0u64..1000, l2 in 0.0f64..1.0) {
        let data = generate(&SyntheticScenario { p: 8, m: 8, p_move: 0.3, n_conditions: 2, n_per_condition: 60, seed }).unwrap();
        let corrs = estimate_all(&data.samples, EstimatorKind::KendallSine).unwrap();
        let perm: Vec<usize> = (0..8).map(|i| (i * 3 + 1) % 8).collect();
        let permute = |m: &DMatrix<f64>| DMatrix::from_fn(8, 8, |i, j| m[(perm[i], perm[j])]);
        let permuted: Vec<CorrelationMatrix> = corrs
            .iter()
            .map(|c| CorrelationMatrix { values: permute(&c.values), ..c.clone() })
            .collect();
        let params = PenaltyParams { tol: 1e-9, max_iters: 5000, ..PenaltyParams::new(0.15, l2).unwrap() };
        let a = solve_jgl(&corrs, &params).unwrap();
        let b = solve_jgl(&permuted, &params).unwrap();
        for k in 0..2 {
            let diff = (permute(&a.thetas[k]) - &b.thetas[k]).abs().max();
            prop_assert!(diff < 1e-6, "{diff}");
        }
    }
}

/// With no similarity bias the joint problem splits into one graphical lasso
/// per condition.
#[test]
fn independent_limit_matches_graphical_lasso() {
    let mut agree = 0;
    let mut total = 0;
    for seed in 0..6 {
        let data = generate(&SyntheticScenario {
            p: 15,
            m: 15,
            p_move: 0.3,
            n_conditions: 2,
            n_per_condition: 80,
            seed,
        })
        .unwrap();
        let corrs = estimate_all(&data.samples, EstimatorKind::KendallSine).unwrap();
        let params = PenaltyParams {
            tol: 1e-8,
            max_iters: 5000,
            ..PenaltyParams::new(0.2, 0.0).unwrap()
        };
        let joint = solve_jgl(&corrs, &params).unwrap();
        for (c, theta) in corrs.iter().zip(&joint.thetas) {
            let reference = graphical_lasso(&c.values, 0.2, 1e-10, 1000).unwrap();
            let (a, b) = (support(theta), support(&reference.precision));
            agree += a.iter().zip(&b).filter(|(x, y)| x == y).count();
            total += a.len();
            assert!((theta - &reference.precision).abs().max() < 1e-3);
        }
    }
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
}

#[test]
fn extracted_network_follows_support() {
    let names = Arc::new(default_names(3));
    let theta = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, -0.5, 0.0, 2.0, 0.0, -0.5, 0.0, 2.0]);
    let net = extract_network(&theta, names).unwrap();
    assert_eq!(net.iter().collect::<Vec<_>>(), [(0, 2)]);
}
