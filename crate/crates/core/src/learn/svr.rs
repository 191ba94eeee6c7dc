use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, dot, squared_distance, LearnError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel<T = f64> {
    Linear,
    Rbf { gamma: T },
}

impl<T: Real> Kernel<T> {
    #[inline]
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams<T = f64> {
    pub kernel: Kernel<T>,
    /// Box constraint on every dual coefficient.
    pub c: T,
    /// Half-width of the insensitive tube.
    pub epsilon: T,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> SvrParams<T> {
    pub fn new(kernel: Kernel<T>, c: T, epsilon: T, tol: T) -> Self {
        Self { kernel, c, epsilon, tol, max_iter: 10_000_000 }
    }

    fn validate(&self) -> Result<(), LearnError> {
        let bad = |what: &str| Err(LearnError::InvalidParameter(what.to_string()));
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return bad("C must be positive");
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return bad("epsilon must be nonnegative");
        }
        if !(self.tol > T::zero()) {
            return bad("tol must be positive");
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma > T::zero()) || !gamma.is_finite() {
                return bad("RBF gamma must be positive");
            }
        }
        Ok(())
    }
}

/// Trained ε-SVR: `f(x) = Σ coef_i k(sv_i, x) + bias`, with `coef_i = α_i − α*_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel<T = f64> {
    pub kernel: Kernel<T>,
    pub c: T,
    pub epsilon: T,
    pub dim: usize,
    pub support_vectors: Vec<Vec<T>>,
    pub coefficients: Vec<T>,
    pub bias: T,
    /// False when the solver hit `max_iter` before reaching `tol`.
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> SvrModel<T> {
    /// A model without support vectors; it predicts `bias` everywhere.
    pub fn constant(dim: usize, bias: T) -> Self {
        Self {
            kernel: Kernel::Linear,
            c: T::one(),
            epsilon: T::zero(),
            dim,
            support_vectors: Vec::new(),
            coefficients: Vec::new(),
            bias,
            converged: true,
            iterations: 0,
        }
    }

    pub fn predict(&self, x: &[T]) -> Result<T, LearnError> {
        if x.len() != self.dim {
            return Err(LearnError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .fold(self.bias, |acc, (sv, &a)| acc + a * self.kernel.eval(sv, x)))
    }
}

const TAU: f64 = 1e-12;

/// State of the dual over 2n variables: `[α_1..α_n, α*_1..α*_n]` with labels
/// `+1` for the first half and `-1` for the second.
struct Solver<'a, T> {
    n: usize,
    kmat: &'a [T],
    c: T,
    alpha: Vec<T>,
    grad: Vec<T>,
}

impl<T: Real> Solver<'_, T> {
    #[inline]
    fn sign(&self, t: usize) -> T {
        if t < self.n {
            T::one()
        } else {
            -T::one()
        }
    }

    #[inline]
    fn q(&self, i: usize, j: usize) -> T {
        let k = self.kmat[(i % self.n) * self.n + j % self.n];
        if (i < self.n) == (j < self.n) {
            k
        } else {
            -k
        }
    }

    #[inline]
    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    #[inline]
    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= T::zero()
    }

    /// Maximal-violating first index plus second-order choice of the partner.
    fn select(&self, tol: T) -> Option<(usize, usize)> {
        let two_n = 2 * self.n;
        let mut gmax = T::neg_infinity();
        let mut gmax_idx = None;
        for t in 0..two_n {
            if t < self.n {
                if !self.at_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    gmax_idx = Some(t);
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                gmax_idx = Some(t);
            }
        }
        let i = gmax_idx?;
        let tau = T::lit(TAU);
        let qd_i = self.q(i, i);
        let y_i = self.sign(i);
        let mut gmax2 = T::neg_infinity();
        let mut best = None;
        let mut obj_min = T::infinity();
        for j in 0..two_n {
            let (grad_diff, quad) = if j < self.n {
                if self.at_lower(j) {
                    continue;
                }
                gmax2 = gmax2.max(self.grad[j]);
                (gmax + self.grad[j], qd_i + self.q(j, j) - T::lit(2.0) * y_i * self.q(i, j))
            } else {
                if self.at_upper(j) {
                    continue;
                }
                gmax2 = gmax2.max(-self.grad[j]);
                (gmax - self.grad[j], qd_i + self.q(j, j) + T::lit(2.0) * y_i * self.q(i, j))
            };
            if grad_diff > T::zero() {
                let obj = -(grad_diff * grad_diff) / if quad > T::zero() { quad } else { tau };
                if obj <= obj_min {
                    obj_min = obj;
                    best = Some(j);
                }
            }
        }
        if gmax + gmax2 < tol {
            return None;
        }
        best.map(|j| (i, j))
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let tau = T::lit(TAU);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.q(i, j);
        let (qii, qjj) = (self.q(i, i), self.q(j, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let mut quad = qii + qjj + T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai = ai + delta;
            aj = aj + delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > T::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai = ai - delta;
            aj = aj + delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..2 * self.n {
            self.grad[t] = self.grad[t] + self.q(i, t) * di + self.q(j, t) * dj;
        }
    }

    /// Offset from the free variables, or the midpoint of the feasible interval.
    fn rho(&self) -> T {
        let mut ub = T::infinity();
        let mut lb = T::neg_infinity();
        let mut free = 0usize;
        let mut sum_free = T::zero();
        for t in 0..2 * self.n {
            let y = self.sign(t);
            let yg = y * self.grad[t];
            if self.at_upper(t) {
                if y < T::zero() {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if y > T::zero() {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum_free = sum_free + yg;
            }
        }
        if free > 0 {
            sum_free / T::from_usize_lossy(free)
        } else {
            (ub + lb) * T::lit(0.5)
        }
    }
}

/// Fits an ε-SVR by sequential minimal optimization on the dual.
///
/// Rows are visited in a seed-determined order, which only affects tie-breaking in
/// working-set selection. Hitting `max_iter` returns the current iterate with
/// `converged = false`.
pub fn svr_fit<T: Real>(
    x: &[Vec<T>],
    y: &[T],
    params: &SvrParams<T>,
    seed: u64,
) -> Result<SvrModel<T>, LearnError> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.len(), targets: y.len() });
    }
    if x.len() < 2 {
        return Err(LearnError::TooFewSamples { needed: 2, found: x.len() });
    }
    let dim = check_rows(x)?;
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite { row });
    }

    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let xs: Vec<&[T]> = order.iter().map(|&i| x[i].as_slice()).collect();
    let ys: Vec<T> = order.iter().map(|&i| y[i]).collect();

    let mut kmat = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let k = params.kernel.eval(xs[i], xs[j]);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }

    let mut grad = Vec::with_capacity(2 * n);
    grad.extend(ys.iter().map(|&t| params.epsilon - t));
    grad.extend(ys.iter().map(|&t| params.epsilon + t));
    let mut solver = Solver { n, kmat: &kmat, c: params.c, alpha: vec![T::zero(); 2 * n], grad };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        match solver.select(params.tol) {
            Some((i, j)) => solver.update(i, j),
            None => {
                converged = true;
                break;
            }
        }
        iterations += 1;
    }

    let bias = -solver.rho();
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (t, row) in xs.iter().enumerate() {
        let coef = solver.alpha[t] - solver.alpha[t + n];
        if coef != T::zero() {
            support_vectors.push(row.to_vec());
            coefficients.push(coef);
        }
    }
    Ok(SvrModel {
        kernel: params.kernel,
        c: params.c,
        epsilon: params.epsilon,
        dim,
        support_vectors,
        coefficients,
        bias,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn linear(c: f64, eps: f64) -> SvrParams<f64> {
        SvrParams::new(Kernel::Linear, c, eps, 1e-3)
    }

    #[test]
    fn flat_targets_give_flat_prediction() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.3, (i * i) as f64 * 0.1]).collect();
        let y = vec![4.2; 8];
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            let m = svr_fit(&x, &y, &SvrParams::new(kernel, 10.0, 0.1, 1e-3), 3).unwrap();
            for probe in [[0.0, 0.0], [5.0, -3.0], [1.1, 2.2]] {
                assert!((m.predict(&probe).unwrap() - 4.2).abs() <= 0.1 + 1e-9);
            }
        }
    }

    #[test]
    fn empty_support_predicts_bias() {
        let m = SvrModel::constant(3, -2.5_f64);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), -2.5);
        assert!(matches!(m.predict(&[1.0]), Err(LearnError::DimensionMismatch { expected: 3, found: 1 })));
    }

    #[test]
    fn rejects_bad_input() {
        let p = linear(1.0, 0.1);
        assert!(matches!(svr_fit(&[vec![0.0]], &[1.0], &p, 0), Err(LearnError::TooFewSamples { .. })));
        assert!(matches!(
            svr_fit(&[vec![0.0], vec![f64::NAN]], &[1.0, 2.0], &p, 0),
            Err(LearnError::NonFinite { row: 1 })
        ));
        assert!(matches!(svr_fit(&[vec![0.0], vec![1.0]], &[1.0], &p, 0), Err(LearnError::LengthMismatch { .. })));
        assert!(matches!(
            svr_fit(&[vec![0.0], vec![1.0]], &[1.0, 2.0], &linear(-1.0, 0.1), 0),
            Err(LearnError::InvalidParameter(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - r[1]).collect();
        let mut p = SvrParams::new(Kernel::Rbf { gamma: 1.0 }, 100.0, 0.01, 1e-6);
        p.max_iter = 2;
        let m = svr_fit(&x, &y, &p, 0).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
        assert!(m.predict(&[0.5, 0.5]).unwrap().is_finite());
    }

    #[test]
    fn coefficients_respect_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen::<f64>() * 4.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() + rng.gen::<f64>() * 0.4).collect();
        let m = svr_fit(&x, &y, &SvrParams::new(Kernel::Rbf { gamma: 2.0 }, 0.7, 0.05, 1e-4), 1).unwrap();
        assert!(m.converged);
        assert!(m.coefficients.iter().all(|a| a.abs() <= 0.7 + 1e-12));
    }

    #[test]
    fn single_precision_fit() {
        let x: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32]).collect();
        let y: Vec<f32> = (0..10).map(|i| 0.5 * i as f32 + 1.0).collect();
        let m = svr_fit(&x, &y, &SvrParams::new(Kernel::Linear, 100.0f32, 0.01, 1e-3), 0).unwrap();
        assert!((m.predict(&[4.5]).unwrap() - 3.25).abs() < 0.05);
    }
}
