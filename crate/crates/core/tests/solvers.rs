use std::sync::Arc;

use fracsys::linalg::{c, from_real, CMatrix};
use fracsys::ml_scalar::{ml, ml_deriv, MLParams};
use fracsys::solver::rational::{build_augmented, reduce_rational};
use fracsys::solver::{
    auto_method, operator, solve, DerivativeKind, ForcingFn, Method, MultiOrder, Ratio, SolveOptions, SystemSpec,
    TimeGrid,
};
use fracsys::special::gamma;
use fracsys::{Complex64, Error};

fn spec(orders: &[f64], f: CMatrix, kind: DerivativeKind) -> SystemSpec {
    let m = orders.len();
    let init = (0..m).map(|j| c(1.0 + j as f64, 0.5 * j as f64)).collect();
    SystemSpec::new(MultiOrder::new(orders.to_vec()).unwrap(), f, init, kind).unwrap()
}

fn ratios(s: &[&str]) -> Vec<Ratio> {
    s.iter().map(|x| x.parse().unwrap()).collect()
}

fn max_op_diff(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn defective_block_gives_derivative_entry() {
    let lam = -0.8;
    let f = from_real(2, 2, &[lam, 1.0, 0.0, lam]);
    let sys = spec(&[0.7, 0.7], f, DerivativeKind::Caputo);
    let grid = TimeGrid::uniform(2.0, 16).unwrap();
    let ops = operator(&sys, &grid, Method::Commensurate, &SolveOptions::default()).unwrap();
    let p = MLParams::new(0.7, 1.0).unwrap();
    for (t, s) in ops.times.iter().zip(&ops.matrices) {
        let z = c(lam * t.powf(0.7), 0.0);
        let diag = ml(p, z).unwrap();
        let off = ml_deriv(p, z, 1).unwrap() * t.powf(0.7);
        assert!((s[(0, 0)] - diag).norm() < 1e-12);
        assert!((s[(1, 1)] - diag).norm() < 1e-12);
        assert!((s[(0, 1)] - off).norm() < 1e-10, "t={t}: {} vs {}", s[(0, 1)], off);
        assert!(s[(1, 0)].norm() < 1e-14);
    }
}

#[test]
fn commensurate_matches_series() {
    let f = from_real(3, 3, &[-1.0, 0.3, 0.2, 0.1, -0.5, 0.4, -0.2, 0.3, -0.9]);
    let sys = spec(&[0.6, 0.6, 0.6], f, DerivativeKind::Caputo);
    let grid = TimeGrid::uniform(2.0, 32).unwrap();
    let opts = SolveOptions::default();
    let a = solve(&sys, &grid, Method::Commensurate, &opts).unwrap();
    let b = solve(&sys, &grid, Method::Series, &opts).unwrap();
    assert!(a.max_deviation(&b).unwrap() < 1e-8);
}

#[test]
fn identity_at_zero_for_every_method() {
    let f = from_real(2, 2, &[-1.0, 0.0, 0.5, -0.3]);
    let mut sys = spec(&[0.5, 0.5], f, DerivativeKind::Caputo);
    sys.rational_orders = Some(ratios(&["1/2", "1/2"]));
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let opts = SolveOptions::default();
    for m in [
        Method::Series,
        Method::Commensurate,
        Method::Rational,
        Method::Triangular,
        Method::Talbot,
    ] {
        let ops = operator(&sys, &grid, m, &opts).unwrap();
        assert_eq!(ops.times[0], 0.0);
        let err = (&ops.matrices[0] - CMatrix::identity(2, 2))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "{m}: {err}");
    }
}

#[test]
fn zero_forcing_changes_nothing() {
    let f = from_real(2, 2, &[-1.0, 0.4, 0.2, -0.6]);
    let sys = spec(&[0.5, 0.8], f, DerivativeKind::Caputo);
    let zero: ForcingFn = Arc::new(|_| Complex64::new(0.0, 0.0));
    let forced = sys.clone().with_forcing(vec![zero.clone(), zero]).unwrap();
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let opts = SolveOptions::default();
    let a = solve(&sys, &grid, Method::Series, &opts).unwrap();
    let b = solve(&forced, &grid, Method::Series, &opts).unwrap();
    assert!(a.max_deviation(&b).unwrap() < 1e-15);
}

#[test]
fn scalar_forcing_matches_closed_form_and_adams() {
    // D^{1/2} u = t, u(0) = 1  ⇒  u = 1 + t^{3/2}/Γ(5/2)
    let sys = spec(&[0.5], CMatrix::zeros(1, 1), DerivativeKind::Caputo)
        .with_forcing(vec![Arc::new(|t| Complex64::new(t, 0.0))])
        .unwrap();
    let opts = SolveOptions::default();
    let max_err = |steps| {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let traj = solve(&sys, &grid, Method::Series, &opts).unwrap();
        let err = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(t, u)| (u[0] - (1.0 + t.powf(1.5) / gamma(2.5))).norm())
            .fold(0.0, f64::max);
        (traj, err)
    };
    // trapezoidal convolution of a t^{1/2} start: O(h^{3/2})
    let (_, coarse) = max_err(128);
    let (traj, fine) = max_err(256);
    assert!(fine < 2e-5, "{fine}");
    assert!((coarse / fine).log2() > 1.4, "{coarse} {fine}");
    let grid = TimeGrid::uniform(1.0, 256).unwrap();
    let adams = solve(&sys, &grid, Method::Adams, &opts).unwrap();
    assert!(traj.max_deviation(&adams).unwrap() < 1e-3);
}

#[test]
fn triangular_rejects_full_matrix() {
    let f = from_real(2, 2, &[-1.0, 0.5, 0.5, -1.0]);
    let sys = spec(&[0.5, 0.7], f, DerivativeKind::Caputo);
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let err = solve(&sys, &grid, Method::Triangular, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::WrongStructure(_)));
}

#[test]
fn triangular_matches_series() {
    let f = from_real(3, 3, &[-1.0, 0.0, 0.0, 0.5, -0.4, 0.0, 0.2, -0.3, -0.7]);
    for kind in [DerivativeKind::Caputo, DerivativeKind::RiemannLiouville] {
        let sys = spec(&[0.5, 0.8, 0.6], f.clone(), kind);
        assert_eq!(auto_method(&sys), Method::Triangular);
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let opts = SolveOptions::default();
        let a = operator(&sys, &grid, Method::Triangular, &opts).unwrap();
        let b = operator(&sys, &grid, Method::Series, &opts).unwrap();
        // RL operators blow up like t^{β−1}; compare t^{1−min β}·S₊
        let w = |t: f64| {
            if kind == DerivativeKind::Caputo {
                1.0
            } else {
                t.powf(0.5)
            }
        };
        let d = a
            .times
            .iter()
            .zip(a.matrices.iter().zip(&b.matrices))
            .map(|(&t, (x, y))| w(t) * max_op_diff(std::slice::from_ref(x), std::slice::from_ref(y)))
            .fold(0.0, f64::max);
        assert!(d < 1e-4, "{kind:?}: {d}");
    }
}

#[test]
fn rational_reduction_of_integers() {
    let red = reduce_rational(&ratios(&["1", "1"])).unwrap();
    assert_eq!(red.p, 1);
    assert_eq!(red.total, 2);
}

#[test]
fn augmented_companion_structure() {
    let f = from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let aug = build_augmented(&ratios(&["1/2", "1/3"]), &f).unwrap();
    assert_eq!(aug.reduction.p, 6);
    assert_eq!(aug.matrix.nrows(), 5);
    assert!((aug.order - 1.0 / 6.0).abs() < 1e-15);
    // shift structure inside each block, F in the tail rows
    assert_eq!(aug.matrix[(0, 1)], c(1.0, 0.0));
    assert_eq!(aug.matrix[(1, 2)], c(1.0, 0.0));
    assert_eq!(aug.matrix[(2, 0)], c(1.0, 0.0));
    assert_eq!(aug.matrix[(2, 3)], c(2.0, 0.0));
    assert_eq!(aug.matrix[(4, 0)], c(3.0, 0.0));
    assert_eq!(aug.matrix[(4, 3)], c(4.0, 0.0));
}

#[test]
fn rational_matches_commensurate() {
    let f = from_real(2, 2, &[-1.0, 0.4, -0.3, -0.5]);
    let mut sys = spec(&[0.5, 0.5], f, DerivativeKind::Caputo);
    sys.rational_orders = Some(ratios(&["1/2", "1/2"]));
    let grid = TimeGrid::uniform(2.0, 32).unwrap();
    let opts = SolveOptions::default();
    let a = solve(&sys, &grid, Method::Rational, &opts).unwrap();
    let b = solve(&sys, &grid, Method::Commensurate, &opts).unwrap();
    assert!(a.max_deviation(&b).unwrap() < 1e-8);
}

#[test]
fn rational_requires_exact_orders() {
    let sys = spec(&[0.5, 0.25], CMatrix::identity(2, 2), DerivativeKind::Caputo);
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let err = solve(&sys, &grid, Method::Rational, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::RequiresRationalOrders(_)));
}

#[test]
fn integer_orders_reduce_to_exponential() {
    let f = from_real(2, 2, &[-0.5, 1.0, -1.0, -0.2]);
    let sys = spec(&[1.0, 1.0], f.clone(), DerivativeKind::Caputo);
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let ops = operator(&sys, &grid, Method::Series, &SolveOptions::default()).unwrap();
    for (t, s) in ops.times.iter().zip(&ops.matrices) {
        let e = fracsys::oracles::expm(&(&f * c(*t, 0.0)));
        assert!(max_op_diff(std::slice::from_ref(s), &[e]) < 1e-12);
    }
}

#[test]
fn auto_method_choices() {
    let full = from_real(2, 2, &[-1.0, 0.5, 0.5, -1.0]);
    assert_eq!(
        auto_method(&spec(&[0.5, 0.5], full.clone(), DerivativeKind::Caputo)),
        Method::Commensurate
    );
    assert_eq!(
        auto_method(&spec(&[0.5, 0.7], full, DerivativeKind::Caputo)),
        Method::Series
    );
}

#[test]
fn invalid_inputs_rejected() {
    assert!(MultiOrder::new(vec![]).is_err());
    assert!(MultiOrder::new(vec![1.5]).is_err());
    assert!(MultiOrder::new(vec![0.0]).is_err());
    assert!(TimeGrid::uniform(0.0, 4).is_err());
    assert!(TimeGrid::uniform(1.0, 0).is_err());
    let o = MultiOrder::new(vec![0.5, 0.5]).unwrap();
    assert!(SystemSpec::new(o, CMatrix::zeros(3, 3), vec![c(1.0, 0.0); 2], DerivativeKind::Caputo).is_err());
}
