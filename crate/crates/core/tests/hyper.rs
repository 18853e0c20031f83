//! Hyperparameter updates checked against their target distributions.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Exp, Gamma, InverseGamma};
use wrapgp::gp::{build_cov, mvn_draw, KernelParams};
use wrapgp::hyper::{gibbs_tau2, mh_lengthscale, mh_nu, mh_sigma2, CorrFactor, GammaPrior, ScalePrior};
use wrapgp::synthetic::gen_lhs;
use wrapgp::PriorConfig;

fn median(v: &[f64]) -> f64 {
    let s = common::sorted(v.to_vec());
    s[s.len() / 2]
}

#[test]
fn tau2_draws_follow_inverse_gamma() {
    let x = [0.0, 0.2, 0.45, 0.7, 1.0];
    let e = [0.3, -0.1, 0.8, 0.2, -0.5];
    let factor = CorrFactor::new(&x, 0.05, 0.0).unwrap();
    let prior = ScalePrior { a0: 1.0, b0: 1.0 };
    let (a, b) = prior.posterior(e.len(), factor.cov().quad_form(&e));
    let target = InverseGamma::new(a, b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| gibbs_tau2(&e, &factor, &prior, &mut rng))
        .collect();
    let stat = common::ks(&draws, |v| target.cdf(v));
    assert!(stat < common::ks_critical_1pct(draws.len()), "KS {stat}");
}

/// With no data the sigma2 and nu chains target their priors; the long-run
/// distribution of each kernel matching its target is the empirical
/// counterpart of detailed balance.
#[test]
fn mh_kernels_leave_their_priors_invariant() {
    let prior = PriorConfig::default();
    let thin = 20;
    let kept = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut s = prior.sigma2.median();
    let mut sig = Vec::with_capacity(kept);
    for t in 0..thin * kept {
        s = mh_sigma2(s, &[], 5.0, &prior.sigma2, 1.0, &mut rng).value;
        if t % thin == 0 {
            sig.push(s);
        }
    }
    let gamma = Gamma::new(prior.sigma2.shape, prior.sigma2.rate).unwrap();
    let stat = common::ks(&sig, |v| gamma.cdf(v));
    assert!(stat < common::ks_critical_1pct(kept), "sigma2 KS {stat}");

    let mut nu = prior.nu_median();
    let mut nus = Vec::with_capacity(kept);
    for t in 0..thin * kept {
        nu = mh_nu(nu, &[], 0.1, &prior, 1.0, &mut rng).value;
        if t % thin == 0 {
            nus.push(nu);
        }
    }
    let exp = Exp::new(prior.nu_rate).unwrap();
    let stat = common::ks(&nus, |v| exp.cdf(v - prior.nu_min));
    assert!(stat < common::ks_critical_1pct(kept), "nu KS {stat}");
}

#[test]
fn lengthscale_posterior_recovers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = gen_lhs(200, (0.0, 1.0), &mut rng);
    x.sort_by(f64::total_cmp);
    let cov = build_cov(&x, &KernelParams::new(0.01, 1.0).unwrap(), 1e-8).unwrap();
    let e = mvn_draw(&vec![0.0; x.len()], &cov, &mut rng);
    let prior = GammaPrior { shape: 2.5, rate: 1.5 };
    let mut factor = CorrFactor::new(&x, prior.median(), 0.0).unwrap();
    let mut kept = Vec::new();
    for t in 0..3000 {
        let step = mh_lengthscale(&factor, &e, &x, 1.0, &prior, 0.3, &mut rng);
        if let Some(f) = step.cache {
            factor = f;
        }
        if t >= 1000 {
            kept.push(factor.lengthscale);
        }
    }
    let m = median(&kept);
    assert!((0.003..=0.03).contains(&m), "posterior median {m}");
}

#[test]
fn sigma2_shrinks_on_zero_residuals() {
    let prior = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r = vec![0.0; 50];
    let mut s = prior.sigma2.median();
    let mut kept = Vec::new();
    for t in 0..6000 {
        s = mh_sigma2(s, &r, 5.0, &prior.sigma2, 0.3, &mut rng).value;
        if t >= 1000 {
            kept.push(s);
        }
    }
    assert!(median(&kept) < prior.sigma2.median());
}

#[test]
fn nu_drops_when_outliers_are_injected() {
    let prior = PriorConfig::default();
    let sigma2 = 0.05_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
    let clean: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
    let mut dirty = clean.clone();
    for (i, v) in dirty.iter_mut().take(5).enumerate() {
        *v = if i % 2 == 0 { 10.0 } else { -10.0 } * sigma2.sqrt();
    }
    let run = |r: &[f64], rng: &mut ChaCha8Rng| {
        let mut nu = prior.nu_median();
        let mut kept = Vec::new();
        for t in 0..20_000 {
            nu = mh_nu(nu, r, sigma2, &prior, 0.5, rng).value;
            if t >= 2000 {
                kept.push(nu);
            }
        }
        median(&kept)
    };
    let a = run(&clean, &mut rng);
    let b = run(&dirty, &mut rng);
    assert!(b < a, "clean {a}, with outliers {b}");
}
