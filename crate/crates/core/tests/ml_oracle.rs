use fracsys::ml_scalar::{ml, MLParams};
use fracsys::Complex64;

#[test]
fn mittag_leffler_reference_values() {
    let data = include_str!("data/ml_oracle.txt");
    let mut count = 0;
    for line in data.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let v: Vec<f64> = line.split_whitespace().map(|x| x.parse().unwrap()).collect();
        let p = MLParams::new(v[0], v[1]).unwrap();
        let z = Complex64::new(v[2], v[3]);
        let want = Complex64::new(v[4], v[5]);
        let got = ml(p, z).unwrap();
        let err = (got - want).norm();
        assert!(
            err <= 1e-10 * want.norm().max(1.0),
            "β={} ν={} z={z}: {got} vs {want}",
            v[0],
            v[1]
        );
        count += 1;
    }
    assert_eq!(count, 60);
}
