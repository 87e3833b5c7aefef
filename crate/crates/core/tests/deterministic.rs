use crnpriv::deterministic::{ode_rhs, ode_rhs_factored, steady_state, SteadyStateOptions};
use crnpriv::structure::conservation_laws;
use crnpriv::{models, parse_spec, Crn};
use proptest::prelude::*;

fn motivational() -> Crn {
    let crn = parse_spec(models::MOTIVATIONAL).unwrap().crn;
    let mut rates = crn.rates();
    rates[0] = 3.0;
    crn.with_rates(&rates).unwrap()
}

fn rk4(crn: &Crn, x0: &[f64], t_end: f64, dt: f64) -> Vec<f64> {
    let f = |x: &[f64]| ode_rhs(crn, x).unwrap();
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let mut x = x0.to_vec();
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, dt / 2.0));
        let k3 = f(&axpy(&x, &k2, dt / 2.0));
        let k4 = f(&axpy(&x, &k3, dt));
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

#[test]
fn rhs_by_hand() {
    let crn = motivational();
    assert_eq!(
        ode_rhs(&crn, &[2.0, 1.0, 2.0, 0.0, 0.0]).unwrap(),
        vec![-12.0, -2.0, -14.0, 12.0, 2.0]
    );
}

#[test]
fn steady_state_matches_long_integration() {
    let crn = motivational();
    let x0 = [2.0, 1.0, 2.0, 0.0, 0.0];
    let xbar = steady_state(&crn, &x0, &SteadyStateOptions::default()).unwrap();
    let oracle = rk4(&crn, &x0, 1000.0, 0.01);
    for (a, b) in xbar.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{:?} vs {oracle:?}", xbar.0);
    }
    let residual = ode_rhs(&crn, &xbar).unwrap();
    assert!(residual.iter().all(|r| r.abs() < 1e-10));
}

fn quartic(n: [f64; 3], k: [f64; 4], x12: f64) -> f64 {
    let t = k[3] * n[2] / (k[2] * x12 + k[3]);
    k[0] * (n[0] - n[2] - x12 + t) * (n[1] - n[2] - x12 + t) - k[1] * x12
}

#[test]
fn pairing_equilibrium_solves_the_quartic() {
    let mut m = parse_spec(models::PAIRING).unwrap();
    m.crn = m.crn.with_rates(&[1.0; 4]).unwrap();
    let n = [220.0, 220.0, 200.0];
    let xbar = steady_state(&m.crn, &[220.0, 220.0, 200.0, 0.0, 0.0], &SteadyStateOptions::default()).unwrap();
    assert!(xbar.iter().all(|&v| v > 0.0));
    let x12 = xbar[3];
    let k = [1.0; 4];
    // x¹ = N¹ − N³ − x¹² + κ4N³/(κ3x¹² + κ4) must stay non-negative; the
    // physical root lies below the point where it vanishes
    let x1 = |x12: f64| n[0] - n[2] - x12 + k[3] * n[2] / (k[2] * x12 + k[3]);
    let bisect = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let edge = bisect(&x1, 0.0, n[0]);
    assert!(quartic(n, k, 1e-9) > 0.0 && quartic(n, k, edge) < 0.0);
    let lo = bisect(&|v| quartic(n, k, v), 1e-9, edge);
    assert!((x12 - lo).abs() < 1e-8 * x12, "{x12} vs {lo}");
    assert!((xbar[0] + xbar[3] + xbar[4] - 220.0).abs() < 1e-9);
    assert!((xbar[2] + xbar[4] - 200.0).abs() < 1e-9);
}

#[test]
fn exchangeable_types_have_mirrored_equilibria() {
    let m = parse_spec(models::PAIRING).unwrap();
    let opts = SteadyStateOptions::default();
    let a = steady_state(&m.crn, &[30.0, 20.0, 25.0, 0.0, 0.0], &opts).unwrap();
    let b = steady_state(&m.crn, &[20.0, 30.0, 25.0, 0.0, 0.0], &opts).unwrap();
    assert!((a[0] - b[1]).abs() < 1e-9 && (a[1] - b[0]).abs() < 1e-9);
    for i in 2..5 {
        assert!((a[i] - b[i]).abs() < 1e-9);
    }
}

#[test]
fn zero_species_stay_at_zero() {
    let m = parse_spec(models::PAIRING).unwrap();
    let xbar = steady_state(&m.crn, &[5.0, 0.0, 4.0, 0.0, 0.0], &SteadyStateOptions::default()).unwrap();
    assert_eq!(xbar.0, vec![5.0, 0.0, 4.0, 0.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factored_form_and_conservation(x in proptest::collection::vec(0.0f64..50.0, 9),
                                      rates in proptest::collection::vec(0.1f64..5.0, 21)) {
        let crn = parse_spec(models::TASKS).unwrap().crn.with_rates(&rates).unwrap();
        let direct = ode_rhs(&crn, &x).unwrap();
        let factored = ode_rhs_factored(&crn, &x).unwrap();
        let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in direct.iter().zip(&factored) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
        for c in conservation_laws(&crn) {
            let s: f64 = c.iter().zip(&direct).map(|(&ci, d)| ci as f64 * d).sum();
            prop_assert!(s.abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn pairing_steady_states_are_equilibria(n in proptest::collection::vec(1u32..300, 3),
                                            rates in proptest::collection::vec(0.1f64..10.0, 4)) {
        let crn = parse_spec(models::PAIRING).unwrap().crn.with_rates(&rates).unwrap();
        let x0 = [n[0] as f64, n[1] as f64, n[2] as f64, 0.0, 0.0];
        let xbar = steady_state(&crn, &x0, &SteadyStateOptions::default()).unwrap();
        let residual = ode_rhs(&crn, &xbar).unwrap();
        let scale = x0.iter().fold(1.0f64, |m, v| m.max(*v));
        prop_assert!(residual.iter().all(|r| r.abs() <= 1e-7 * scale * scale), "{:?}", residual);
        prop_assert!((xbar[0] + xbar[3] + xbar[4] - x0[0]).abs() <= 1e-9 * scale);
    }
}
