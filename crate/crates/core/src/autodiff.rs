//! Layer-sequential backpropagation in ℂℝ (Wirtinger) calculus.
//!
//! Every backward routine consumes and produces cogradients `∂L/∂ū` for a
//! real-valued loss `L`. The plain derivative `∂L/∂u` is never stored since
//! it is always `conj(∂L/∂ū)`.
//!
//! For real scalars the same code computes `½·dL/du`, so real networks train
//! with ordinary SGD on the same scale.

use crate::error::{Error, Result};
use crate::linalg::{matvec, Matrix, Scalar};

/// Default batch-norm stabilizer.
pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the previous running statistic in the exponential moving average.
pub const BN_MOMENTUM: f64 = 0.9;

/// Chain rule through an elementwise map `u = f(z)`:
/// `∂L/∂z̄ = conj(g)·∂u/∂z̄ + g·conj(∂u/∂z)` with `g = ∂L/∂ū`.
pub fn backward_chain<S: Scalar>(upstream: &[S], dz: &[S], dzbar: &[S]) -> Result<Vec<S>> {
    if dz.len() != upstream.len() {
        return Err(Error::mismatch("backward_chain", upstream.len(), dz.len()));
    }
    if dzbar.len() != upstream.len() {
        return Err(Error::mismatch("backward_chain", upstream.len(), dzbar.len()));
    }
    Ok(upstream
        .iter()
        .zip(dz.iter().zip(dzbar))
        .map(|(&g, (&d, &dbar))| chain(g, d, dbar))
        .collect())
}

#[inline]
pub(crate) fn chain<S: Scalar>(g: S, dz: S, dzbar: S) -> S {
    g.conj() * dzbar + g * dz.conj()
}

/// `|out − label|²` and its cogradient `out − label`.
pub fn loss_mse<S: Scalar>(out: S, label: f64) -> (f64, S) {
    let residual = out - S::from_real(label);
    (residual.norm_sqr(), residual)
}

/// Single-vector affine map `Wx + b`.
pub fn fc_forward<S: Scalar>(w: &Matrix<S>, b: &[S], x: &[S]) -> Result<Vec<S>> {
    if b.len() != w.rows() {
        return Err(Error::mismatch("fc_forward bias", w.rows(), b.len()));
    }
    let mut y = matvec(w, x)?;
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi += *bi;
    }
    Ok(y)
}

/// Fully connected layer: `u = W x + b`, with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

/// Inputs cached by [`Dense::forward_taped`].
#[derive(Clone, Debug, Default)]
pub struct DenseTape<S> {
    input: Option<Matrix<S>>,
}

impl<S> DenseTape<S> {
    pub fn is_populated(&self) -> bool {
        self.input.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    /// `∂L/∂x̄`, present when requested.
    pub input: Option<Matrix<S>>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(weights: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::mismatch("Dense bias", weights.rows(), bias.len()));
        }
        Ok(Dense { weights, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![S::ZERO; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    /// Batched forward pass; `x` holds one sample per row.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        if x.cols() != self.inputs() {
            return Err(Error::mismatch("Dense::forward", self.inputs(), x.cols()));
        }
        let batch = x.rows();
        let mut out = Vec::with_capacity(batch * self.outputs());
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        S::gemm(x.op(), self.weights.op().t(), &mut out, true);
        Matrix::new(batch, self.outputs(), out)
    }

    pub fn forward_taped(&self, x: &Matrix<S>, tape: &mut DenseTape<S>) -> Result<Matrix<S>> {
        let y = self.forward(x)?;
        tape.input = Some(x.clone());
        Ok(y)
    }

    /// `∂L/∂W̄_ij = Σ_b g_bi·conj(x_bj)`, `∂L/∂b̄_i = Σ_b g_bi`,
    /// `∂L/∂x̄_bj = Σ_i g_bi·conj(W_ij)`.
    pub fn backward(
        &self,
        tape: &DenseTape<S>,
        upstream: &Matrix<S>,
        want_input: bool,
    ) -> Result<DenseGrads<S>> {
        let x = tape.input.as_ref().ok_or(Error::TapeNotPopulated)?;
        if upstream.cols() != self.outputs() {
            return Err(Error::mismatch("Dense::backward", self.outputs(), upstream.cols()));
        }
        if upstream.rows() != x.rows() {
            return Err(Error::mismatch("Dense::backward batch", x.rows(), upstream.rows()));
        }
        let mut dw = vec![S::ZERO; self.outputs() * self.inputs()];
        S::gemm(upstream.op().t(), x.op().conj(), &mut dw, false);

        let mut db = vec![S::ZERO; self.outputs()];
        for b in 0..upstream.rows() {
            for (acc, g) in db.iter_mut().zip(upstream.row(b)) {
                *acc += *g;
            }
        }

        let input = if want_input {
            let mut dx = vec![S::ZERO; x.rows() * self.inputs()];
            S::gemm(upstream.op(), self.weights.op().conj(), &mut dx, false);
            Some(Matrix::new(x.rows(), self.inputs(), dx)?)
        } else {
            None
        };

        Ok(DenseGrads {
            weights: Matrix::new(self.outputs(), self.inputs(), dw)?,
            bias: db,
            input,
        })
    }
}

/// Which statistics batch normalization uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsMode {
    /// Statistics of the current batch; running averages are updated.
    Batch,
    /// Stored running statistics (inference).
    Running,
}

/// Complex batch normalization: complex mean subtraction followed by real
/// scaling with the magnitude standard deviation,
/// `y = γ·(x − μ)/σ + β`, `σ = √(mean|x − μ|² + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BatchNormTape<S> {
    normalized: Option<Matrix<S>>,
    sigma: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormGrads<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub input: Matrix<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: vec![S::ONE; features],
            beta: vec![S::ZERO; features],
            running_mean: vec![S::ZERO; features],
            running_var: vec![1.0; features],
            eps: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with the given statistics. In [`StatsMode::Batch`] the
    /// running averages are updated and, if a tape is given, the values the
    /// backward pass needs are cached.
    pub fn forward(
        &mut self,
        x: &Matrix<S>,
        mode: StatsMode,
        tape: Option<&mut BatchNormTape<S>>,
    ) -> Result<Matrix<S>> {
        match mode {
            StatsMode::Running => self.forward_running(x),
            StatsMode::Batch => self.forward_batch(x, tape),
        }
    }

    pub fn forward_running(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        let f = self.features();
        if x.cols() != f {
            return Err(Error::mismatch("BatchNorm::forward", f, x.cols()));
        }
        let inv_sigma: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect();
        let mut out = x.clone();
        for b in 0..x.rows() {
            let row = &mut out.as_mut_slice()[b * f..(b + 1) * f];
            for j in 0..f {
                let xhat = (row[j] - self.running_mean[j]).scale(inv_sigma[j]);
                row[j] = self.gamma[j] * xhat + self.beta[j];
            }
        }
        Ok(out)
    }

    fn forward_batch(&mut self, x: &Matrix<S>, tape: Option<&mut BatchNormTape<S>>) -> Result<Matrix<S>> {
        let f = self.features();
        if x.cols() != f {
            return Err(Error::mismatch("BatchNorm::forward", f, x.cols()));
        }
        let batch = x.rows();
        if batch < 2 {
            return Err(Error::BatchTooSmall(batch));
        }
        let inv_n = 1.0 / batch as f64;

        let mut mean = vec![S::ZERO; f];
        for b in 0..batch {
            for (m, v) in mean.iter_mut().zip(x.row(b)) {
                *m += *v;
            }
        }
        mean.iter_mut().for_each(|m| *m = m.scale(inv_n));

        let mut var = vec![0.0; f];
        for b in 0..batch {
            for ((acc, v), m) in var.iter_mut().zip(x.row(b)).zip(&mean) {
                *acc += (*v - *m).norm_sqr();
            }
        }
        var.iter_mut().for_each(|v| *v *= inv_n);
        let sigma: Vec<f64> = var.iter().map(|v| (v + self.eps).sqrt()).collect();

        let mut xhat = x.clone();
        for b in 0..batch {
            let row = &mut xhat.as_mut_slice()[b * f..(b + 1) * f];
            for j in 0..f {
                row[j] = (row[j] - mean[j]).scale(1.0 / sigma[j]);
            }
        }
        let mut out = xhat.clone();
        for b in 0..batch {
            let row = &mut out.as_mut_slice()[b * f..(b + 1) * f];
            for j in 0..f {
                row[j] = self.gamma[j] * row[j] + self.beta[j];
            }
        }

        let keep = self.momentum;
        for j in 0..f {
            self.running_mean[j] = self.running_mean[j].scale(keep) + mean[j].scale(1.0 - keep);
            self.running_var[j] = keep * self.running_var[j] + (1.0 - keep) * var[j];
        }

        if let Some(tape) = tape {
            tape.normalized = Some(xhat);
            tape.sigma = sigma;
        }
        Ok(out)
    }

    /// Backward pass for [`StatsMode::Batch`]. With `h = conj(γ)·g` and
    /// `ρ = Re Σ_b conj(h_b)·x̂_b / B`, each feature gets
    /// `k_b = (h_b − ρ·x̂_b)/σ` and `∂L/∂x̄_b = k_b − mean(k)`.
    pub fn backward(&self, tape: &BatchNormTape<S>, upstream: &Matrix<S>) -> Result<BatchNormGrads<S>> {
        let xhat = tape.normalized.as_ref().ok_or(Error::TapeNotPopulated)?;
        let f = self.features();
        if upstream.shape() != xhat.shape() {
            return Err(Error::mismatch("BatchNorm::backward", xhat.rows() * f, upstream.rows() * upstream.cols()));
        }
        let batch = xhat.rows();
        let inv_n = 1.0 / batch as f64;

        let mut dgamma = vec![S::ZERO; f];
        let mut dbeta = vec![S::ZERO; f];
        let mut rho = vec![0.0; f];
        let mut kmean = vec![S::ZERO; f];
        let mut k = Matrix::zeros(batch, f);

        for b in 0..batch {
            let g = upstream.row(b);
            let xh = xhat.row(b);
            for j in 0..f {
                dgamma[j] += g[j] * xh[j].conj();
                dbeta[j] += g[j];
                let h = self.gamma[j].conj() * g[j];
                rho[j] += (h.conj() * xh[j]).real();
            }
        }
        rho.iter_mut().for_each(|r| *r *= inv_n);

        for b in 0..batch {
            let g = upstream.row(b);
            let xh = xhat.row(b);
            let row = &mut k.as_mut_slice()[b * f..(b + 1) * f];
            for j in 0..f {
                let h = self.gamma[j].conj() * g[j];
                let kb = (h - xh[j].scale(rho[j])).scale(1.0 / tape.sigma[j]);
                row[j] = kb;
                kmean[j] += kb;
            }
        }
        kmean.iter_mut().for_each(|m| *m = m.scale(inv_n));
        for b in 0..batch {
            let row = &mut k.as_mut_slice()[b * f..(b + 1) * f];
            for j in 0..f {
                row[j] -= kmean[j];
            }
        }

        Ok(BatchNormGrads {
            gamma: dgamma,
            beta: dbeta,
            input: k,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Complex;
    use crate::linalg::CMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_cmatrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// `∂L/∂z̄ = ½(∂L/∂re + i·∂L/∂im)` by central differences.
    fn fd_cogradient(mut loss: impl FnMut(Complex) -> f64, z: Complex, h: f64) -> Complex {
        let dre = (loss(z + c(h, 0.0)) - loss(z - c(h, 0.0))) / (2.0 * h);
        let dim = (loss(z + c(0.0, h)) - loss(z - c(0.0, h))) / (2.0 * h);
        c(0.5 * dre, 0.5 * dim)
    }

    fn close(a: Complex, b: Complex, tol: f64) -> bool {
        (a - b).magnitude() <= tol * a.magnitude().max(b.magnitude()).max(1e-3)
    }

    #[test]
    fn chain_identity_and_real_cases() {
        let g = vec![c(0.3, -1.2), c(2.0, 0.5)];
        let out = backward_chain(&g, &[Complex::ONE; 2], &[Complex::ZERO; 2]).unwrap();
        assert_eq!(out, g);

        let out = backward_chain(&[1.5f64], &[-2.0], &[0.0]).unwrap();
        assert_eq!(out, vec![-3.0]);

        assert!(matches!(
            backward_chain(&g, &[Complex::ONE], &[Complex::ZERO; 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chain_matches_finite_differences() {
        // L(z) = |f(z) − t|² with a non-holomorphic f; u = f(z), g = ∂L/∂ū = f(z) − t.
        let f = |z: Complex| crate::activations::cardioid(z) * c(0.7, -0.2) + z.conj().scale(0.3);
        let df = |z: Complex| {
            let (dz, dzbar) = crate::activations::cardioid_derivatives(z);
            (dz * c(0.7, -0.2), dzbar * c(0.7, -0.2) + Complex::from(0.3))
        };
        let target = c(0.4, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let g = f(z) - target;
            let (dz, dzbar) = df(z);
            let analytic = backward_chain(&[g], &[dz], &[dzbar]).unwrap()[0];
            let numeric = fd_cogradient(|w| (f(w) - target).norm_sqr(), z, 1e-6);
            assert!(close(analytic, numeric, 1e-5), "{analytic} vs {numeric}");
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_mse(Complex::from(3.0), 3.0).0, 0.0);
        assert_eq!(loss_mse(c(2.0, 1.0), 2.0).0, 1.0);
        assert_eq!(loss_mse(Complex::from(2.0), 1.0).1, Complex::ONE);
        assert_eq!(loss_mse(2.0f64, 1.0), (1.0, 1.0));
    }

    #[test]
    fn fc_forward_examples() {
        let x = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let id = CMatrix::identity(2);
        assert_eq!(fc_forward(&id, &[Complex::ZERO; 2], &x).unwrap(), x);
        let bias = vec![c(3.0, -1.0), c(0.0, 7.0)];
        assert_eq!(fc_forward(&CMatrix::zeros(2, 2), &bias, &x).unwrap(), bias);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_cmatrix(&mut rng, 3, 4);
        let b = random_cmatrix(&mut rng, 1, 3).into_vec();
        let x = random_cmatrix(&mut rng, 1, 4).into_vec();
        let expect: Vec<Complex> = matvec(&w, &x).unwrap().iter().zip(&b).map(|(p, q)| *p + *q).collect();
        let dense = Dense::new(w.clone(), b.clone()).unwrap();
        let batched = dense.forward(&CMatrix::new(1, 4, x.clone()).unwrap()).unwrap();
        for (p, q) in batched.as_slice().iter().zip(&expect) {
            assert!((*p - *q).magnitude() < 1e-12);
        }
        assert_eq!(fc_forward(&w, &b, &x).unwrap().len(), 3);
        assert!(fc_forward(&w, &b, &x[..3]).is_err());
    }

    #[test]
    fn fc_backward_requires_tape() {
        let dense = Dense::<Complex>::zeros(3, 2);
        let tape = DenseTape::default();
        assert!(matches!(
            dense.backward(&tape, &CMatrix::zeros(1, 2), true),
            Err(Error::TapeNotPopulated)
        ));
    }

    #[test]
    fn fc_backward_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dense = Dense::new(random_cmatrix(&mut rng, 2, 3), vec![Complex::ONE; 2]).unwrap();
        let mut tape = DenseTape::default();
        dense.forward_taped(&random_cmatrix(&mut rng, 4, 3), &mut tape).unwrap();
        let grads = dense.backward(&tape, &CMatrix::zeros(4, 2), true).unwrap();
        assert!(grads.weights.as_slice().iter().all(|g| *g == Complex::ZERO));
        assert!(grads.bias.iter().all(|g| *g == Complex::ZERO));
        assert!(grads.input.unwrap().as_slice().iter().all(|g| *g == Complex::ZERO));
    }

    #[test]
    fn fc_backward_real_scalar_case() {
        // u = w x + b, L = ½(u − t)², so dL/dw = (u − t) x.
        let dense = Dense::new(Matrix::new(1, 1, vec![2.0]).unwrap(), vec![0.5]).unwrap();
        let mut tape = DenseTape::default();
        let u = dense.forward_taped(&Matrix::new(1, 1, vec![3.0]).unwrap(), &mut tape).unwrap();
        let g = u.as_slice()[0] - 4.0;
        let grads = dense.backward(&tape, &Matrix::new(1, 1, vec![g]).unwrap(), true).unwrap();
        assert_eq!(grads.weights.as_slice(), &[g * 3.0]);
        assert_eq!(grads.bias, vec![g]);
        assert_eq!(grads.input.unwrap().as_slice(), &[g * 2.0]);
    }

    /// Scalar loss of a dense layer followed by a fixed complex read-out.
    fn dense_loss(dense: &Dense<Complex>, x: &CMatrix, readout: &[Complex], targets: &[Complex]) -> f64 {
        let u = dense.forward(x).unwrap();
        (0..x.rows())
            .map(|b| {
                let s: Complex = u.row(b).iter().zip(readout).map(|(p, q)| *p * *q).sum();
                (s - targets[b]).norm_sqr()
            })
            .sum()
    }

    #[test]
    fn fc_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dense = Dense::new(random_cmatrix(&mut rng, 4, 3), random_cmatrix(&mut rng, 1, 4).into_vec()).unwrap();
        let x = random_cmatrix(&mut rng, 5, 3);
        let readout = random_cmatrix(&mut rng, 1, 4).into_vec();
        let targets = random_cmatrix(&mut rng, 1, 5).into_vec();

        let mut tape = DenseTape::default();
        let u = dense.forward_taped(&x, &mut tape).unwrap();
        // s = Σ_i r_i u_i is holomorphic in u: ∂L/∂ū_i = (s − t)·conj(r_i).
        let upstream = CMatrix::from_fn(5, 4, |b, i| {
            let s: Complex = u.row(b).iter().zip(&readout).map(|(p, q)| *p * *q).sum();
            (s - targets[b]) * readout[i].conj()
        });
        let grads = dense.backward(&tape, &upstream, true).unwrap();

        for idx in 0..12 {
            let numeric = fd_cogradient(
                |w| {
                    let mut d = dense.clone();
                    d.weights.as_mut_slice()[idx] = w;
                    dense_loss(&d, &x, &readout, &targets)
                },
                dense.weights.as_slice()[idx],
                1e-6,
            );
            assert!(close(grads.weights.as_slice()[idx], numeric, 1e-5));
        }
        for idx in 0..4 {
            let numeric = fd_cogradient(
                |w| {
                    let mut d = dense.clone();
                    d.bias[idx] = w;
                    dense_loss(&d, &x, &readout, &targets)
                },
                dense.bias[idx],
                1e-6,
            );
            assert!(close(grads.bias[idx], numeric, 1e-5));
        }
        let dx = grads.input.unwrap();
        for idx in 0..15 {
            let numeric = fd_cogradient(
                |v| {
                    let mut xp = x.clone();
                    xp.as_mut_slice()[idx] = v;
                    dense_loss(&dense, &xp, &readout, &targets)
                },
                x.as_slice()[idx],
                1e-6,
            );
            assert!(close(dx.as_slice()[idx], numeric, 1e-5));
        }
    }

    #[test]
    fn fc_input_gradient_is_conjugate_linear_in_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dense = Dense::new(random_cmatrix(&mut rng, 3, 2), vec![Complex::ZERO; 3]).unwrap();
        let mut tape = DenseTape::default();
        dense.forward_taped(&random_cmatrix(&mut rng, 2, 2), &mut tape).unwrap();
        let g1 = random_cmatrix(&mut rng, 2, 3);
        let g2 = random_cmatrix(&mut rng, 2, 3);
        let a = c(0.3, -1.1);
        let b = c(-2.0, 0.4);
        let combo = CMatrix::from_fn(2, 3, |i, j| a * g1.get(i, j) + b * g2.get(i, j));
        let dx = |g: &CMatrix| dense.backward(&tape, g, true).unwrap().input.unwrap();
        let (d1, d2, dc) = (dx(&g1), dx(&g2), dx(&combo));
        for idx in 0..4 {
            let expect = a * d1.as_slice()[idx] + b * d2.as_slice()[idx];
            assert!((dc.as_slice()[idx] - expect).magnitude() < 1e-12);
        }
    }

    #[test]
    fn batchnorm_constant_batch_gives_beta() {
        let mut bn = BatchNorm::<Complex>::new(2);
        bn.beta = vec![c(0.5, -0.5), c(2.0, 1.0)];
        bn.gamma = vec![c(3.0, 1.0), c(-1.0, 0.0)];
        let x = CMatrix::from_fn(4, 2, |_, j| c(j as f64 + 1.0, 2.0));
        let y = bn.forward(&x, StatsMode::Batch, None).unwrap();
        for b in 0..4 {
            assert_eq!(y.row(b), bn.beta.as_slice());
        }
    }

    #[test]
    fn batchnorm_two_point_batch() {
        let cval = c(0.6, -0.8);
        let mut bn = BatchNorm::<Complex>::new(1);
        let x = CMatrix::new(2, 1, vec![cval, -cval]).unwrap();
        let y = bn.forward(&x, StatsMode::Batch, None).unwrap();
        let s = 1.0 / (cval.norm_sqr() + BN_EPSILON).sqrt();
        assert!((y.get(0, 0) - cval.scale(s)).magnitude() < 1e-15);
        assert!((y.get(1, 0) + cval.scale(s)).magnitude() < 1e-15);
    }

    #[test]
    fn batchnorm_rejects_single_sample() {
        let mut bn = BatchNorm::<Complex>::new(3);
        assert!(matches!(
            bn.forward(&CMatrix::zeros(1, 3), StatsMode::Batch, None),
            Err(Error::BatchTooSmall(1))
        ));
        assert!(bn.forward(&CMatrix::zeros(1, 3), StatsMode::Running, None).is_ok());
    }

    #[test]
    fn batchnorm_running_stats_converge_to_batch_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut bn = BatchNorm::<Complex>::new(3);
        bn.gamma = vec![c(1.0, 0.5), c(0.7, 0.0), c(-0.2, 1.0)];
        bn.beta = vec![c(0.1, 0.1), c(0.0, -0.3), c(1.0, 0.0)];
        let offset = [c(2.0, -1.0), c(0.0, 3.0), c(-1.0, -1.0)];
        let scale = [0.5, 2.0, 1.0];
        let draw = |rng: &mut ChaCha8Rng, n| {
            CMatrix::from_fn(n, 3, |_, j| {
                offset[j] + c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).scale(scale[j])
            })
        };
        for _ in 0..300 {
            let x = draw(&mut rng, 512);
            bn.forward(&x, StatsMode::Batch, None).unwrap();
        }
        let x = draw(&mut rng, 4096);
        let train = bn.clone().forward(&x, StatsMode::Batch, None).unwrap();
        let infer = bn.forward(&x, StatsMode::Running, None).unwrap();
        let err: f64 = train
            .as_slice()
            .iter()
            .zip(infer.as_slice())
            .map(|(a, b)| (*a - *b).magnitude())
            .fold(0.0, f64::max);
        assert!(err < 0.1, "max deviation {err}");
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut bn = BatchNorm::<Complex>::new(3);
        bn.gamma = random_cmatrix(&mut rng, 1, 3).into_vec();
        bn.beta = random_cmatrix(&mut rng, 1, 3).into_vec();
        let x = random_cmatrix(&mut rng, 5, 3);
        let targets = random_cmatrix(&mut rng, 5, 3);

        let loss = |bn: &BatchNorm<Complex>, x: &CMatrix| {
            let y = bn.clone().forward(x, StatsMode::Batch, None).unwrap();
            y.as_slice()
                .iter()
                .zip(targets.as_slice())
                .map(|(p, q)| (*p - *q).norm_sqr())
                .sum::<f64>()
        };

        let mut tape = BatchNormTape::default();
        let y = bn.clone().forward(&x, StatsMode::Batch, Some(&mut tape)).unwrap();
        let upstream = CMatrix::from_fn(5, 3, |b, j| y.get(b, j) - targets.get(b, j));
        let grads = bn.backward(&tape, &upstream).unwrap();

        for idx in 0..15 {
            let numeric = fd_cogradient(
                |v| {
                    let mut xp = x.clone();
                    xp.as_mut_slice()[idx] = v;
                    loss(&bn, &xp)
                },
                x.as_slice()[idx],
                1e-6,
            );
            assert!(close(grads.input.as_slice()[idx], numeric, 1e-5), "dx[{idx}]");
        }
        for j in 0..3 {
            let numeric = fd_cogradient(
                |v| {
                    let mut p = bn.clone();
                    p.gamma[j] = v;
                    loss(&p, &x)
                },
                bn.gamma[j],
                1e-6,
            );
            assert!(close(grads.gamma[j], numeric, 1e-5), "dgamma[{j}]");
            let numeric = fd_cogradient(
                |v| {
                    let mut p = bn.clone();
                    p.beta[j] = v;
                    loss(&p, &x)
                },
                bn.beta[j],
                1e-6,
            );
            assert!(close(grads.beta[j], numeric, 1e-5), "dbeta[{j}]");
        }
    }
}
