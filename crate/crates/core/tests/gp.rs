//! Covariance construction and kriging properties.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrapgp::gp::{build_cov, kernel_eval, kriging_conditional, mvn_draw, KernelParams};
use wrapgp::synthetic::gen_lhs;

fn sorted_lhs(n: usize, seed: u64) -> Vec<f64> {
    let mut x = gen_lhs(n, (0.0, 1.0), &mut ChaCha8Rng::seed_from_u64(seed));
    x.sort_by(f64::total_cmp);
    x
}

proptest! {
    #[test]
    fn kernel_is_symmetric(a in -10.0f64..10.0, b in -10.0f64..10.0, theta in 1e-4f64..10.0, tau2 in 1e-3f64..1e3) {
        let p = KernelParams::new(theta, tau2).unwrap();
        prop_assert_eq!(kernel_eval(a, b, &p), kernel_eval(b, a, &p));
    }

    #[test]
    fn kernel_is_bounded_by_scale(a in -1.0f64..1.0, b in -1.0f64..1.0, theta in 1e-4f64..10.0) {
        let p = KernelParams::new(theta, 2.5).unwrap();
        let k = kernel_eval(a, b, &p);
        prop_assert!((0.0..=2.5).contains(&k));
    }
}

#[test]
fn lhs_designs_factor_up_to_500_points() {
    for (i, &n) in [2usize, 10, 50, 200, 500].iter().enumerate() {
        let x = sorted_lhs(n, i as u64);
        for theta in [1e-3, 0.01, 0.1, 1.45] {
            let cov = build_cov(&x, &KernelParams::new(theta, 1.0).unwrap(), 1e-8).unwrap();
            assert_eq!(cov.dim(), n);
            let m = cov.matrix();
            for r in 0..n {
                assert!((m[(r, r)] - 1.0 - cov.jitter()).abs() < 1e-12);
                for c in 0..r {
                    assert!((m[(r, c)] - m[(c, r)]).abs() <= 1e-12 * m[(r, c)].abs().max(1e-300));
                }
            }
        }
    }
}

#[test]
fn kriging_variance_never_exceeds_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let n = rng.random_range(3..40);
        let x = sorted_lhs(n, 100 + trial);
        let theta = 10f64.powf(rng.random_range(-3.0..0.0));
        let tau2 = 10f64.powf(rng.random_range(-1.0..1.0));
        let params = KernelParams::new(theta, tau2).unwrap();
        let cov = build_cov(&x, &params, 1e-8 * tau2).unwrap();
        let z = mvn_draw(&vec![0.0; n], &cov, &mut rng);
        let xnew: Vec<f64> = (0..200).map(|i| -0.2 + 1.4 * i as f64 / 199.0).collect();
        let (_, var) = kriging_conditional(&x, &z, &xnew, 0.0, 0.0, &params).unwrap();
        for v in var {
            assert!(v >= 0.0);
            assert!(v <= tau2 + 1e-8 * tau2 + 1e-10, "{v} > {tau2}");
        }
    }
}
