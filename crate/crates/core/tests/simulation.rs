mod oracles;

use loadcast::simulate::{corr_r, mse, simulate_closed_loop, simulate_closed_loop_dataset, simulate_open_loop};
use loadcast::series::{delay_embed, TimeSeries};
use loadcast::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_loop_matches_hand_stepped_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let p = rng.gen_range(1..=3);
        let y_delays: Vec<usize> = (1..=p).filter(|_| rng.gen_bool(0.7)).collect();
        let y_delays = if y_delays.is_empty() { vec![p] } else { y_delays };
        let p = *y_delays.iter().max().unwrap();
        let exo = rng.gen_bool(0.5).then(|| vec![1usize]);
        let hidden = [rng.gen_range(1..=4)];
        let net = oracles::random_network(&mut rng, &y_delays, exo.as_deref(), &hidden, 1.0);
        let priming: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
        let x: Vec<f64> = (0..p + 10).map(|_| rng.gen_range(0.0..1.0)).collect();
        let x = exo.as_ref().map(|_| x.as_slice());
        let got = simulate_closed_loop(&net, &priming, 10, x).unwrap();
        assert_eq!(got, oracles::closed_loop(&net, &priming, 10, x));
    }
}

#[test]
fn closed_loop_dataset_primes_from_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
    let series = TimeSeries::from_values("s", values.clone());
    let ds = delay_embed(&series, &[2, 3], None).unwrap();
    let net = oracles::random_network(&mut rng, &[2, 3], None, &[3], 1.0);
    let pred = simulate_closed_loop_dataset(&net, &ds, &values, None).unwrap();
    assert_eq!(pred.outputs(), oracles::closed_loop(&net, &values[..3], 17, None));
    assert_eq!(pred.rows[0].index, 4);
}

#[test]
fn open_loop_uses_actual_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
    let ds = delay_embed(&TimeSeries::from_values("s", values), &[1, 2], None).unwrap();
    let net = oracles::random_network(&mut rng, &[1, 2], None, &[5], 1.0);
    let pred = simulate_open_loop(&net, &ds).unwrap();
    let want: Vec<f64> = ds.inputs.iter().map(|row| oracles::forward(&net, row)).collect();
    assert_eq!(pred.outputs(), want);
    assert_eq!(pred.rows[0].index, 3);
}

#[test]
fn metrics_match_oracles_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let t: Vec<f64> = (0..1000).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a: Vec<f64> = t.iter().map(|v| 0.3 * v + rng.gen_range(-2.0..2.0)).collect();
        assert!((mse(&t, &a).unwrap() - oracles::mse(&t, &a)).abs() < 1e-12);
        assert!((corr_r(&t, &a).unwrap() - oracles::pearson(&t, &a)).abs() < 1e-12);
    }
}

#[test]
fn constant_sequence_has_no_correlation() {
    assert!(matches!(corr_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation)));
}

proptest! {
    #[test]
    fn affine_maps_are_perfectly_correlated(
        y in prop::collection::vec(-100.0f64..100.0, 3..200),
        a in 0.01f64..50.0,
        b in -50.0f64..50.0,
    ) {
        let spread = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assert!((corr_r(&y, &z).unwrap() - 1.0).abs() < 1e-12);
    }
}
