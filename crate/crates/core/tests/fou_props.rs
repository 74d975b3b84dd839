use gasfee::fou::{fou_mean, simulate_fou, FouParams, SimGrid};
use gasfee::{stats, Execution};

/// Jarque–Bera statistic `n/6 (S^2 + K^2/4)` with population moments.
fn jarque_bera(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = stats::mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let s = m3 / m2.powf(1.5);
    let k = m4 / (m2 * m2) - 3.0;
    n / 6.0 * (s * s + k * k / 4.0)
}

// Seven Jarque–Bera checks run in this file. Bonferroni keeps the family-wise
// false alarm rate at 1%: the chi-square(2) upper point is -2 ln(alpha).
const JB_CHECKS: f64 = 7.0;
fn jb_cutoff() -> f64 {
    -2.0 * (0.01 / JB_CHECKS).ln()
}

#[test]
fn marginals_are_normal() {
    for (h, seed) in [(0.5, 1u64), (0.7, 2), (0.3, 3)] {
        let params = FouParams::constant(0.4, 3.0, 0.2, h).unwrap();
        let set = simulate_fou(&params, 3.5, SimGrid::new(300, 0.01).unwrap(), 10_000, seed, false, Execution::Parallel)
            .unwrap();
        for idx in [50, 300] {
            let jb = jarque_bera(&set.column(idx));
            assert!(jb < jb_cutoff(), "H={h} step {idx}: JB {jb}");
        }
    }
}

#[test]
fn geometric_marginals_are_log_normal() {
    let params = FouParams::constant(0.4, 3.0, 0.2, 0.7).unwrap();
    let set = simulate_fou(&params, 3.5, SimGrid::new(300, 0.01).unwrap(), 10_000, 4, true, Execution::Parallel).unwrap();
    let logs: Vec<f64> = set.column(300).iter().map(|p| p.ln()).collect();
    assert!(jarque_bera(&logs) < jb_cutoff());
}

#[test]
fn sample_mean_reverts_monotonically() {
    let theta = 1.0;
    let params = FouParams::constant(0.8, theta, 0.5, 0.7).unwrap();
    let set = simulate_fou(&params, theta + 6.0, SimGrid::new(1000, 0.005).unwrap(), 2_000, 9, false, Execution::Parallel)
        .unwrap();
    let coarse: Vec<f64> = (0..=1000).step_by(100).map(|i| stats::mean(&set.column(i))).collect();
    assert!(coarse.windows(2).all(|w| w[1] < w[0]), "{coarse:?}");
    assert!(coarse.iter().all(|&m| m > theta));
    let exact = fou_mean(&params, theta + 6.0, 5.0).unwrap();
    assert!((coarse[10] - exact).abs() < 0.05, "{} vs {exact}", coarse[10]);
}

#[test]
fn execution_strategy_does_not_change_paths() {
    let params = FouParams::constant(0.2, 3.0, 0.3, 0.6).unwrap();
    let grid = SimGrid::new(400, 0.05).unwrap();
    let par = simulate_fou(&params, 3.0, grid, 12, 5, true, Execution::Parallel).unwrap();
    let seq = simulate_fou(&params, 3.0, grid, 12, 5, true, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
}
