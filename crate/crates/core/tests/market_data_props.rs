use gasfee::market_data::{
    lognormal_fit, resample_median, summary_stats, Bucket, GasPriceSeries, PricePoint, TimeZone,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

fn series(points: &[(i64, f64)]) -> GasPriceSeries {
    GasPriceSeries::new(points.iter().map(|&(timestamp, price)| PricePoint { timestamp, price }).collect()).unwrap()
}

// 2023-01-01 to 2024-12-31, covering both daylight-saving transitions.
const START: i64 = 1_672_531_200;
const END: i64 = 1_735_603_200;

proptest! {
    #[test]
    fn resampling_is_idempotent(
        points in prop::collection::vec((START..END, 0.0f64..500.0), 1..200),
        daily in any::<bool>(),
        eastern in any::<bool>(),
    ) {
        let bucket = if daily { Bucket::Day } else { Bucket::Hour };
        let tz = if eastern { TimeZone::UsEastern } else { TimeZone::Utc };
        let once = resample_median(&series(&points), bucket, tz).unwrap();
        let twice = resample_median(&once, bucket, tz).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn summary_ignores_order(values in prop::collection::vec(0.0f64..1e4, 1..100), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        let mut rng = gasfee::rng::stream_rng(seed, 0);
        shuffled.shuffle(&mut rng);
        let a = GasPriceSeries::from_values(0, 60, &values).unwrap();
        let b = GasPriceSeries::from_values(0, 60, &shuffled).unwrap();
        prop_assert_eq!(summary_stats(&a).unwrap(), summary_stats(&b).unwrap());
    }

    #[test]
    fn quartiles_are_ordered(values in prop::collection::vec(0.0f64..1e6, 1..300)) {
        let s = summary_stats(&GasPriceSeries::from_values(0, 1, &values).unwrap()).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }
}

#[test]
fn lognormal_fit_recovers_parameters() {
    let (m, s, n) = (2.3, 0.45, 100_000usize);
    let normal = Normal::new(m, s).unwrap();
    let mut rng = gasfee::rng::stream_rng(31, 0);
    let values: Vec<f64> = (0..n).map(|_| { let z: f64 = normal.sample(&mut rng); z.exp() }).collect();
    let fit = lognormal_fit(&GasPriceSeries::from_values(0, 1, &values).unwrap()).unwrap();
    let se_mu = s / (n as f64).sqrt();
    let se_sigma = s / (2.0 * n as f64).sqrt();
    assert!((fit.mu - m).abs() < 3.0 * se_mu, "mu {}", fit.mu);
    assert!((fit.sigma - s).abs() < 3.0 * se_sigma, "sigma {}", fit.sigma);
    approx::assert_relative_eq!(fit.aic, 4.0 - 2.0 * fit.log_likelihood, max_relative = 1e-12);
}
