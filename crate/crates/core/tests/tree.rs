// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

use hilbert_mfg::grid::TimeGrid;
use hilbert_mfg::model::ModelSpec;
use hilbert_mfg::tree::build_noise_tree;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Child averaging from the leaves reproduces direct leaf summation.
    #[test]
    fn backward_induction_matches_leaf_sum(
        m in 1usize..3,
        n in 1usize..6,
        coeffs in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let spec = ModelSpec::<f64>::zeros(1, 1, 0, m, 1.0);
        let grid = TimeGrid::new(n, 1.0).unwrap();
        let tree = build_noise_tree(&spec, &grid).unwrap();
        let leaves = tree.nodes_at(n);
        let values: Vec<f64> = (0..leaves)
            .map(|i| {
                let w = tree.cumulative_increment(n, i);
                coeffs[0] + coeffs[1] * w[0] + coeffs[2] * w[0] * w[0] + coeffs[3] * w.sum().powi(3)
            })
            .collect();
        let direct: f64 = values.iter().sum::<f64>() * tree.probability(n);
        let induced = tree.backward_expectation(&values);
        prop_assert!((direct - induced).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn brownian_moments_on_the_tree(m in 1usize..3, n in 1usize..7, horizon in 0.1f64..3.0) {
        let spec = ModelSpec::<f64>::zeros(1, 1, 0, m, horizon);
        let grid = TimeGrid::new(n, horizon).unwrap();
        let tree = build_noise_tree(&spec, &grid).unwrap();
        let p = tree.probability(n);
        let mut first = vec![0.0; m];
        let mut second = vec![0.0; m];
        for i in 0..tree.nodes_at(n) {
            let w = tree.cumulative_increment(n, i);
            for j in 0..m {
                first[j] += p * w[j];
                second[j] += p * w[j] * w[j];
            }
        }
        for j in 0..m {
            prop_assert!(first[j].abs() < 1e-12);
            prop_assert!((second[j] - horizon).abs() < 1e-12 * horizon.max(1.0));
        }
    }
}
