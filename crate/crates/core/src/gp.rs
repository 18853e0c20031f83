//! Squared-exponential kernel, covariance factorization, multivariate normal
//! draws and pointwise kriging.
//!
//! Covariances are parameterized as `scale * (R_theta(X) + nugget * I) + jitter * I`
//! where `R_theta` is the unit-diagonal correlation matrix. The samplers keep a
//! unit-scale factor (`scale = 1`) and multiply by the output scale where
//! needed, since the scale changes every iteration while the lengthscale does
//! not; [`build_cov`] produces the fully scaled matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default diagonal jitter, relative to the output scale.
pub const DEFAULT_JITTER: f64 = 1e-8;
/// Largest relative jitter tried before giving up on a factorization.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Lengthscale `theta` (squared input units).
    pub lengthscale: f64,
    /// Output scale `tau^2`.
    pub scale: f64,
}

impl KernelParams {
    pub fn new(lengthscale: f64, scale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { lengthscale, scale })
    }

    /// Unit output scale with the given lengthscale.
    pub fn correlation(lengthscale: f64) -> Self {
        Self {
            lengthscale,
            scale: 1.0,
        }
    }
}

/// `exp(-|a - b|^2 / theta)`.
#[inline]
pub fn kernel_eval(a: f64, b: f64, params: &KernelParams) -> f64 {
    let d = a - b;
    (-d * d / params.lengthscale).exp()
}

/// A symmetric positive definite covariance with its cached lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CovMatrix {
    /// Builds `scale * (R + nugget I) + jitter I`, escalating the jitter by
    /// factors of ten up to `MAX_JITTER * scale` when the factorization fails.
    /// A zero jitter gets exactly one attempt.
    pub fn from_kernel(x: &[f64], params: &KernelParams, nugget: f64, jitter: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("covariance needs at least one input"));
        }
        if jitter < 0.0 || nugget < 0.0 {
            return Err(Error::invalid("jitter and nugget must be non-negative"));
        }
        let n = x.len();
        let mut base = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            base[(j, j)] = params.scale * (1.0 + nugget);
            for i in (j + 1)..n {
                let v = params.scale * kernel_eval(x[i], x[j], params);
                base[(i, j)] = v;
                base[(j, i)] = v;
            }
        }
        let ceiling = MAX_JITTER * params.scale;
        let mut current = jitter;
        loop {
            let mut matrix = base.clone();
            if current > 0.0 {
                for i in 0..n {
                    matrix[(i, i)] += current;
                }
            }
            if let Some(chol) = matrix.clone().cholesky() {
                return Ok(Self {
                    matrix,
                    lower: chol.unpack(),
                    jitter: current,
                });
            }
            if current == 0.0 || current * 10.0 > ceiling * (1.0 + 1e-12) {
                return Err(Error::CholeskyFailure {
                    dim: n,
                    jitter: current,
                });
            }
            current *= 10.0;
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `L L^T` equal to the matrix.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Diagonal jitter actually used (after escalation).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L^{-1} b`.
    pub fn half_solve(&self, b: &[f64]) -> DVector<f64> {
        let rhs = DVector::from_column_slice(b);
        self.lower
            .solve_lower_triangular(&rhs)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `M^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let half = self.half_solve(b);
        self.lower
            .tr_solve_lower_triangular(&half)
            .expect("Cholesky factor has a positive diagonal")
            .as_slice()
            .to_vec()
    }

    /// `v^T M^{-1} v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.half_solve(v).norm_squared()
    }

    /// `L u`.
    pub fn mul_lower(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, &uj) in u.iter().enumerate().take(n) {
            if uj == 0.0 {
                continue;
            }
            let col = self.lower.column(j);
            for i in j..n {
                out[i] += col[i] * uj;
            }
        }
        out
    }

    /// Dense inverse, for callers that need the precision matrix.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let linv = self
            .lower
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal");
        linv.transpose() * linv
    }

    /// Log density of `N(mean, c * M)` at `v`, where `c` rescales the matrix.
    pub fn mvn_logpdf(&self, v: &[f64], mean: &[f64], c: f64) -> f64 {
        let n = self.dim() as f64;
        let resid: Vec<f64> = v.iter().zip(mean).map(|(a, b)| a - b).collect();
        -0.5 * (n * (2.0 * std::f64::consts::PI * c).ln() + self.log_det() + self.quad_form(&resid) / c)
    }
}

/// Covariance `tau^2 R_theta(X) + jitter I` with a cached factor.
pub fn build_cov(x: &[f64], params: &KernelParams, jitter: f64) -> Result<CovMatrix> {
    CovMatrix::from_kernel(x, params, 0.0, jitter)
}

/// Draws `mean + L u` with `u` standard normal.
pub fn mvn_draw<R: Rng + ?Sized>(mean: &[f64], cov: &CovMatrix, rng: &mut R) -> Vec<f64> {
    scaled_mvn_draw(mean, cov, 1.0, rng)
}

/// Draws from `N(mean, c * M)`.
pub fn scaled_mvn_draw<R: Rng + ?Sized>(mean: &[f64], cov: &CovMatrix, c: f64, rng: &mut R) -> Vec<f64> {
    assert_eq!(mean.len(), cov.dim(), "mean and covariance dimensions differ");
    let u: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let sd = c.sqrt();
    cov.mul_lower(&u)
        .into_iter()
        .zip(mean)
        .map(|(d, m)| m + sd * d)
        .collect()
}

/// Pointwise Gaussian conditional of a GP with linear mean `alpha + beta x`
/// given latent values at training inputs.
#[derive(Clone, Debug)]
pub struct Kriging {
    x: Vec<f64>,
    corr: CovMatrix,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
    params: KernelParams,
}

impl Kriging {
    /// `nugget` is relative to the output scale and is part of the training
    /// covariance only.
    pub fn new(x: &[f64], z: &[f64], alpha: f64, beta: f64, params: KernelParams, nugget: f64) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::invalid("kriging: inputs and latent values differ in length"));
        }
        let corr = CovMatrix::from_kernel(
            x,
            &KernelParams::correlation(params.lengthscale),
            nugget,
            DEFAULT_JITTER,
        )?;
        Ok(Self::with_factor(x, z, alpha, beta, params, corr))
    }

    /// Reuses a unit-scale factor of the training correlation.
    pub fn with_factor(x: &[f64], z: &[f64], alpha: f64, beta: f64, params: KernelParams, corr: CovMatrix) -> Self {
        let resid: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| zi - alpha - beta * xi).collect();
        let weights = corr.solve(&resid);
        Self {
            x: x.to_vec(),
            corr,
            weights,
            alpha,
            beta,
            params,
        }
    }

    /// Conditional mean and variance of the latent process at `xnew`.
    pub fn at(&self, xnew: f64) -> (f64, f64) {
        let unit = KernelParams::correlation(self.params.lengthscale);
        let k: Vec<f64> = self.x.iter().map(|&xi| kernel_eval(xnew, xi, &unit)).collect();
        let mean = self.alpha + self.beta * xnew + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        let explained = self.corr.quad_form(&k);
        let var = (self.params.scale * (1.0 - explained)).max(0.0);
        (mean, var)
    }
}

/// Pointwise kriging mean and variance at each of `xnew`.
pub fn kriging_conditional(
    x: &[f64],
    z: &[f64],
    xnew: &[f64],
    alpha: f64,
    beta: f64,
    params: &KernelParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let krig = Kriging::new(x, z, alpha, beta, *params, 0.0)?;
    Ok(xnew.iter().map(|&xn| krig.at(xn)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(theta: f64, tau2: f64) -> KernelParams {
        KernelParams::new(theta, tau2).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = params(0.01, 1.0);
        assert_eq!(kernel_eval(0.3, 0.3, &p), 1.0);
        assert!((kernel_eval(0.0, 0.1, &p) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((kernel_eval(0.0, 0.1, &p) - 0.367879).abs() < 1e-6);
        let far = kernel_eval(0.0, 1.0, &p);
        assert!((far / 3.720075976020836e-44 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn build_cov_examples() {
        let one = build_cov(&[0.5], &params(0.3, 1.0), 0.0).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);

        let two = build_cov(&[0.0, 0.1], &params(0.01, 2.0), 0.0).unwrap();
        assert!((two.matrix()[(0, 1)] - 0.735759).abs() < 1e-6);
        assert_eq!(two.matrix()[(0, 1)], two.matrix()[(1, 0)]);

        let dup = build_cov(&[0.2, 0.2, 0.7], &params(0.1, 1.0), 0.0);
        assert!(matches!(dup, Err(Error::CholeskyFailure { .. })));
    }

    #[test]
    fn jitter_escalation_handles_replicates() {
        let cov = build_cov(&[0.2, 0.2, 0.7], &params(0.1, 1.0), DEFAULT_JITTER).unwrap();
        assert!(cov.jitter() >= DEFAULT_JITTER);
        assert!(cov.jitter() <= MAX_JITTER);
        for i in 0..3 {
            assert!((cov.matrix()[(i, i)] - (1.0 + cov.jitter())).abs() < 1e-15);
        }
    }

    #[test]
    fn solves_agree_with_dense_algebra() {
        let x = [0.0, 0.13, 0.4, 0.41, 0.9];
        let cov = build_cov(&x, &params(0.05, 1.7), 1e-6).unwrap();
        let b = [0.3, -1.0, 2.0, 0.5, 1.5];
        let s = cov.solve(&b);
        let back = cov.matrix() * DVector::from_column_slice(&s);
        for i in 0..5 {
            assert!((back[i] - b[i]).abs() < 1e-8);
        }
        let inv = cov.inverse();
        let direct = DVector::from_column_slice(&b).dot(&(&inv * DVector::from_column_slice(&b)));
        assert!((direct - cov.quad_form(&b)).abs() < 1e-6 * direct.abs());
        let det = cov.matrix().determinant();
        assert!((det.ln() - cov.log_det()).abs() < 1e-8);
    }

    #[test]
    fn degenerate_variance_returns_mean() {
        // A 1x1 covariance with zero scale is not representable through the
        // kernel constructor, so check the L u path directly with u = 0 mass.
        let cov = build_cov(&[0.1, 0.5], &params(0.1, 1e-300), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = mvn_draw(&[1.5, -2.0], &cov, &mut rng);
        assert!((draw[0] - 1.5).abs() < 1e-140);
        assert!((draw[1] + 2.0).abs() < 1e-140);
    }

    #[test]
    fn mvn_draw_is_deterministic_per_seed() {
        let cov = build_cov(&[0.0, 0.2, 0.5], &params(0.1, 1.0), DEFAULT_JITTER).unwrap();
        let a = mvn_draw(&[0.0; 3], &cov, &mut ChaCha8Rng::seed_from_u64(11));
        let b = mvn_draw(&[0.0; 3], &cov, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn mvn_draw_univariate_moments() {
        let cov = build_cov(&[0.0], &params(1.0, 1.0), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| mvn_draw(&[0.0], &cov, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn mvn_draw_covariance_matches() {
        let x = [0.0, 0.1, 0.3, 0.35, 0.8];
        let cov = build_cov(&x, &params(0.05, 2.0), DEFAULT_JITTER).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut acc = DMatrix::<f64>::zeros(5, 5);
        for _ in 0..n {
            let d = DVector::from_vec(mvn_draw(&[0.0; 5], &cov, &mut rng));
            acc += &d * d.transpose();
        }
        acc /= n as f64;
        let rel = (&acc - cov.matrix()).norm() / cov.matrix().norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn kriging_interpolates_training_points() {
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        let z = [1.0, 2.0, 0.5, 3.0, 2.5];
        let p = params(0.05, 1.3);
        let (mean, var) = kriging_conditional(&x, &z, &[0.5], 0.2, 1.0, &p).unwrap();
        assert!((mean[0] - 0.5).abs() < 1e-6);
        assert!(var[0] < 1e-6);
    }

    #[test]
    fn kriging_reverts_to_prior_far_away() {
        let x = [0.0, 0.1, 0.2];
        let z = [1.0, 2.0, 0.5];
        let p = params(0.001, 1.3);
        let (mean, var) = kriging_conditional(&x, &z, &[5.0], 0.2, 1.0, &p).unwrap();
        assert!((mean[0] - (0.2 + 5.0)).abs() < 1e-12);
        assert!((var[0] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn kriging_single_point_closed_form() {
        let (x0, z0, alpha, beta) = (0.3, 2.0, 0.5, 1.5);
        let p = params(0.2, 2.5);
        let xn = 0.45;
        let (mean, var) = kriging_conditional(&[x0], &[z0], &[xn], alpha, beta, &p).unwrap();
        let k = p.scale * kernel_eval(xn, x0, &p);
        let kxx = p.scale * (1.0 + DEFAULT_JITTER);
        let mu = alpha + beta * xn + k / kxx * (z0 - alpha - beta * x0);
        let v = p.scale - k * k / kxx;
        assert!((mean[0] - mu).abs() < 1e-12);
        assert!((var[0] - v).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn kernel_is_symmetric(a in -5.0f64..5.0, b in -5.0f64..5.0, theta in 1e-3f64..10.0) {
            let p = params(theta, 1.0);
            proptest::prop_assert_eq!(kernel_eval(a, b, &p), kernel_eval(b, a, &p));
        }

        #[test]
        fn kriging_never_inflates_variance(
            seed in 0u64..1000,
            n in 2usize..30,
            theta in 1e-3f64..1.0,
            tau2 in 0.1f64..5.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            x.sort_by(f64::total_cmp);
            let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
            let xnew: Vec<f64> = (0..20).map(|i| i as f64 / 19.0 * 1.2 - 0.1).collect();
            let p = params(theta, tau2);
            let (_, var) = kriging_conditional(&x, &z, &xnew, 0.0, 1.0, &p).unwrap();
            for v in var {
                proptest::prop_assert!(v >= 0.0);
                proptest::prop_assert!(v <= tau2 * (1.0 + DEFAULT_JITTER) + 1e-10);
            }
        }
    }
}
