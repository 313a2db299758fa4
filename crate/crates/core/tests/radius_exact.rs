//! Radius against a table computed in 40-digit arithmetic (mpmath).

use chance_infer::confseq::radius;

const TABLE: &str = include_str!("data/radius_mpmath.csv");

#[test]
fn radius_matches_high_precision_table() {
    let mut rows = 0;
    let mut worst = 0.0f64;
    for line in TABLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut it = line.split(',');
        let n: u64 = it.next().unwrap().parse().unwrap();
        let delta: f64 = it.next().unwrap().parse().unwrap();
        let expected: f64 = it.next().unwrap().parse().unwrap();
        let got = radius(n, delta).unwrap();
        let rel = ((got - expected) / expected).abs();
        worst = worst.max(rel);
        assert!(rel <= 1e-12, "n={n} delta={delta}: {got} vs {expected} (rel {rel:e})");
        rows += 1;
    }
    assert!(rows > 2000, "table truncated: {rows} rows");
    assert!(worst <= 1e-12);
}

#[test]
#[allow(clippy::excessive_precision)] // digits as printed by the reference computation
fn pinned_values() {
    let cases = [
        (1, 1.3581015157406194985),
        (40, 0.26298535353824225228),
        (100, 0.16915646110682648175),
        (1000, 0.055152784878077030617),
    ];
    for (n, want) in cases {
        let got = radius(n, 0.05).unwrap();
        assert!(((got - want) / want).abs() <= 1e-12, "n={n}: {got}");
    }
}
