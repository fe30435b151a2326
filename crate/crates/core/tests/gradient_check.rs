mod common;

use common::dd::Dd;
use common::{classifier_grad_check, dae_grad_check, FD_TOLERANCE};

#[test]
fn dae_gradients_match_central_differences() {
    for seed in 0..25 {
        let check = dae_grad_check(seed);
        assert!(
            check.max_rel_error < FD_TOLERANCE,
            "{}: relative error {:.3e}",
            check.config,
            check.max_rel_error
        );
        assert!(check.parameters > 0);
    }
}

#[test]
fn classifier_gradients_match_central_differences() {
    for seed in 0..25 {
        let check = classifier_grad_check(seed);
        assert!(
            check.max_rel_error < FD_TOLERANCE,
            "{}: relative error {:.3e}",
            check.config,
            check.max_rel_error
        );
    }
}

#[test]
fn double_double_exp_ln_round_trip() {
    for &v in &[1e-8, 0.3, 1.0, 2.5, 17.0, 700.0] {
        let x = Dd::from(v);
        let back = x.ln().exp();
        assert!(((back - x).to_f64() / v).abs() < 1e-28, "{v}");
    }
    let e = Dd::ONE.exp();
    // e = 2.718281828459045 + 1.4456468917292502e-16
    assert_eq!(e.hi, std::f64::consts::E);
    assert!((e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
}
