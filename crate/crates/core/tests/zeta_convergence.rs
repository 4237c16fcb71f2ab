//! `ζ(τ) = K/b_e(τ) - 1` against `σ√(τ|ln τ|)` for Black–Scholes with r > δ.
//! The approach is logarithmic, so the ratio creeps towards σ from below.

use exbound::european::zeta;
use exbound::levy::LevyModel;

#[test]
fn zeta_ratio_trends_to_sigma() {
    let m = LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap();
    let taus = [1e-3, 1e-4, 1e-5, 1e-6];
    let ratios: Vec<f64> = taus.iter().map(|&t| zeta(&m, t, 100.0).unwrap() / (t * t.ln().abs()).sqrt()).collect();
    println!("{:?}", taus.iter().zip(&ratios).collect::<Vec<_>>());
    // each step moves closer to σ
    for w in ratios.windows(2) {
        assert!((w[1] - 0.2).abs() < (w[0] - 0.2).abs(), "{ratios:?}");
    }
    let last = *ratios.last().unwrap();
    assert!((last / 0.2 - 1.0).abs() < 0.15, "ratio {last} at tau = 1e-6");
}
