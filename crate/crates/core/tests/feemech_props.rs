use gasfee::feemech::{block_cost, tx_resource_usage, update_dynamic_gas, FeeState, ResourceSchedule, Transaction};
use proptest::prelude::*;

fn schedule_strategy() -> impl Strategy<Value = ResourceSchedule> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(m, ops)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..1e4, ops), m),
            prop::collection::vec(1e3f64..1e7, m),
        )
            .prop_map(|(g, limits)| ResourceSchedule::from_matrix(g, limits).unwrap())
    })
}

fn txs_strategy(ops: usize, max_len: usize) -> impl Strategy<Value = Vec<Transaction>> {
    prop::collection::vec((prop::collection::vec(0u64..50, ops), 0.0f64..10.0), 0..max_len).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (mut counts, p))| {
                if counts.iter().all(|&c| c == 0) {
                    counts[0] = 1;
                }
                Transaction::new(format!("t{i}"), counts, p, p + 100.0)
            })
            .collect()
    })
}

fn case() -> impl Strategy<Value = (ResourceSchedule, FeeState, Vec<Transaction>, Vec<Transaction>)> {
    schedule_strategy().prop_flat_map(|s| {
        let (m, ops) = (s.n_resources(), s.n_ops());
        (
            Just(s),
            0.0f64..100.0,
            prop::collection::vec(1.0f64 / 16.0..16.0, m),
            txs_strategy(ops, 8),
            txs_strategy(ops, 8),
        )
            .prop_map(|(s, base, lambda, a, b)| {
                let mut state = FeeState::initial(&s, base);
                state.dynamic_gas = lambda;
                (s, state, a, b)
            })
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn cost_is_additive_over_transaction_lists((s, state, a, b) in case()) {
        let both: Vec<Transaction> = a.iter().chain(&b).cloned().collect();
        let sum = block_cost(&state, &s, &a).unwrap() + block_cost(&state, &s, &b).unwrap();
        prop_assert!(close(block_cost(&state, &s, &both).unwrap(), sum));
    }

    #[test]
    fn cost_scales_with_dynamic_gas((s, state, a, _) in case(), c in 0.01f64..100.0, e in -8i32..8) {
        let base = block_cost(&state, &s, &a).unwrap();
        let scaled = |f: f64| {
            let mut st = state.clone();
            st.dynamic_gas.iter_mut().for_each(|l| *l *= f);
            block_cost(&st, &s, &a).unwrap()
        };
        prop_assert!(close(scaled(c), c * base));
        let pow2 = 2f64.powi(e);
        prop_assert_eq!(scaled(pow2), pow2 * base);
    }

    #[test]
    fn splitting_into_copies_preserves_cost_and_usage(
        (s, state, a, _) in case(),
        k in 1u64..6,
    ) {
        for tx in &a {
            let big = Transaction::new("big", tx.op_counts.iter().map(|c| c * k).collect(), tx.priority_fee, tx.max_fee);
            let copies: Vec<Transaction> = (0..k).map(|i| Transaction { id: format!("c{i}"), ..tx.clone() }).collect();
            prop_assert!(close(block_cost(&state, &s, std::slice::from_ref(&big)).unwrap(), block_cost(&state, &s, &copies).unwrap()));
            let big_usage = tx_resource_usage(&s, &big).unwrap();
            let mut sum = vec![0.0; s.n_resources()];
            for c in &copies {
                for (acc, u) in sum.iter_mut().zip(tx_resource_usage(&s, c).unwrap()) {
                    *acc += u;
                }
            }
            for (x, y) in big_usage.iter().zip(&sum) {
                prop_assert!(close(*x, *y));
            }
        }
    }

    #[test]
    fn dynamic_gas_moves_monotonically(s in schedule_strategy(), over in 1.001f64..3.0, under in 0.0f64..0.999) {
        for (factor, rising) in [(over, true), (under, false)] {
            let usage: Vec<f64> = s.limits.iter().map(|l| l * factor).collect();
            let mut state = FeeState::initial(&s, 1.0);
            for _ in 0..20_000 {
                let next = update_dynamic_gas(&state, &usage, &s).unwrap();
                for (n, p) in next.iter().zip(&state.dynamic_gas) {
                    if rising {
                        prop_assert!(*n > *p || *n == s.lambda_max);
                    } else {
                        prop_assert!(*n < *p || *n == s.lambda_min);
                    }
                }
                let done = next.iter().all(|&l| l == if rising { s.lambda_max } else { s.lambda_min });
                state.dynamic_gas = next;
                if done {
                    break;
                }
            }
            let bound = if rising { s.lambda_max } else { s.lambda_min };
            prop_assert!(state.dynamic_gas.iter().all(|&l| l == bound));
        }
    }
}
